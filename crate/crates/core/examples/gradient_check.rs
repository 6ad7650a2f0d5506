//! Compares backpropagated gradients with central finite differences for
//! every architecture.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use softtouch::neural::{Arch, ModelSpec, ModelWeights};
use softtouch::types::ForceVector;

fn main() -> softtouch::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for arch in Arch::ALL {
        let spec = ModelSpec::new(arch, 2, 4, 5)?;
        let params = (0..spec.param_count()).map(|_| rng.random_range(-0.5..0.5)).collect();
        let w = ModelWeights::from_params(spec, params)?;
        let x: Vec<f64> = (0..3 * 5).map(|_| rng.random_range(-1.0..1.0)).collect();
        let batch = [(x.as_slice(), ForceVector::new(0.3, -0.2, 1.0))];
        let grad = w.backward(&batch)?;
        let h = 1e-6;
        let mut worst = 0.0f64;
        for i in 0..w.params.len() {
            let (mut p, mut m) = (w.clone(), w.clone());
            p.params[i] += h;
            m.params[i] -= h;
            let fd = (p.loss(&batch)? - m.loss(&batch)?) / (2.0 * h);
            worst = worst.max((grad[i] - fd).abs() / grad[i].abs().max(fd.abs()).max(1e-4));
        }
        println!("{:<10} {:4} params  max relative error {worst:.2e}", spec.label(), spec.param_count());
    }
    Ok(())
}
