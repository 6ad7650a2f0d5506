//! Per-layer forward passes and backpropagation through time.

use super::linalg::{gemv_acc, gemv_t_acc, outer_acc, sigmoid};
use super::Arch;

/// Activations of one layer over a window, plus scratch for the backward pass.
#[derive(Debug, Clone)]
pub struct LayerCache {
    t: usize,
    input: usize,
    h: usize,
    /// Layer outputs, `t x h`.
    pub hs: Vec<f64>,
    /// Post-activation gate values, `t x G*h`.
    gates: Vec<f64>,
    /// LSTM cell state and its tanh, `t x h`.
    cells: Vec<f64>,
    tanh_c: Vec<f64>,
    /// GRU reset-gated previous state, `t x h`.
    rh: Vec<f64>,
    zeros: Vec<f64>,
    da: Vec<f64>,
    dh: Vec<f64>,
    dh_next: Vec<f64>,
    dc_next: Vec<f64>,
    drh: Vec<f64>,
}

impl LayerCache {
    pub fn new(arch: Arch, t: usize, input: usize, h: usize) -> Self {
        let g = arch.gates().max(1);
        let lstm = arch == Arch::Lstm;
        let gru = arch == Arch::Gru;
        Self {
            t,
            input,
            h,
            hs: vec![0.0; t * h],
            gates: vec![0.0; t * g * h],
            cells: if lstm { vec![0.0; t * h] } else { Vec::new() },
            tanh_c: if lstm { vec![0.0; t * h] } else { Vec::new() },
            rh: if gru { vec![0.0; t * h] } else { Vec::new() },
            zeros: vec![0.0; h],
            da: vec![0.0; g * h],
            dh: vec![0.0; h],
            dh_next: vec![0.0; h],
            dc_next: vec![0.0; h],
            drh: vec![0.0; h],
        }
    }

    fn split<'p>(&self, arch: Arch, p: &'p [f64]) -> (&'p [f64], &'p [f64], &'p [f64]) {
        let (i, h) = (self.input, self.h);
        match arch {
            Arch::Mlp => {
                let (w, b) = p.split_at(h * i);
                (w, &[], b)
            }
            a => {
                let g = a.gates();
                let (w, rest) = p.split_at(g * h * i);
                let (u, b) = rest.split_at(g * h * h);
                (w, u, b)
            }
        }
    }

    fn split_mut<'p>(&self, arch: Arch, p: &'p mut [f64]) -> (&'p mut [f64], &'p mut [f64], &'p mut [f64]) {
        let (i, h) = (self.input, self.h);
        match arch {
            Arch::Mlp => {
                let (w, b) = p.split_at_mut(h * i);
                (w, &mut [], b)
            }
            a => {
                let g = a.gates();
                let (w, rest) = p.split_at_mut(g * h * i);
                let (u, b) = rest.split_at_mut(g * h * h);
                (w, u, b)
            }
        }
    }

    /// Runs the layer over `x` (`t x input`), filling `hs`.
    pub fn forward(&mut self, arch: Arch, p: &[f64], x: &[f64]) {
        let (i, h) = (self.input, self.h);
        let (w, u, b) = self.split(arch, p);
        match arch {
            Arch::Mlp => {
                let a = &mut self.hs[..h];
                a.copy_from_slice(b);
                gemv_acc(a, w, i, &x[..i]);
                a.iter_mut().for_each(|v| *v = v.tanh());
            }
            Arch::Rnn => {
                for t in 0..self.t {
                    let (prev, cur) = self.hs.split_at_mut(t * h);
                    let hp = if t == 0 { &self.zeros[..] } else { &prev[(t - 1) * h..] };
                    let a = &mut cur[..h];
                    a.copy_from_slice(b);
                    gemv_acc(a, w, i, &x[t * i..(t + 1) * i]);
                    gemv_acc(a, u, h, hp);
                    a.iter_mut().for_each(|v| *v = v.tanh());
                }
            }
            Arch::Gru => {
                for t in 0..self.t {
                    let xt = &x[t * i..(t + 1) * i];
                    let (prev, cur) = self.hs.split_at_mut(t * h);
                    let hp = if t == 0 { &self.zeros[..] } else { &prev[(t - 1) * h..] };
                    let gt = &mut self.gates[t * 3 * h..(t + 1) * 3 * h];
                    gt.copy_from_slice(b);
                    let (zr, n) = gt.split_at_mut(2 * h);
                    gemv_acc(zr, &w[..2 * h * i], i, xt);
                    gemv_acc(zr, &u[..2 * h * h], h, hp);
                    zr.iter_mut().for_each(|v| *v = sigmoid(*v));
                    let rh = &mut self.rh[t * h..(t + 1) * h];
                    for k in 0..h {
                        rh[k] = zr[h + k] * hp[k];
                    }
                    gemv_acc(n, &w[2 * h * i..], i, xt);
                    gemv_acc(n, &u[2 * h * h..], h, rh);
                    n.iter_mut().for_each(|v| *v = v.tanh());
                    let ht = &mut cur[..h];
                    for k in 0..h {
                        let z = zr[k];
                        ht[k] = (1.0 - z) * hp[k] + z * n[k];
                    }
                }
            }
            Arch::Lstm => {
                for t in 0..self.t {
                    let xt = &x[t * i..(t + 1) * i];
                    let (prev, cur) = self.hs.split_at_mut(t * h);
                    let hp = if t == 0 { &self.zeros[..] } else { &prev[(t - 1) * h..] };
                    let gt = &mut self.gates[t * 4 * h..(t + 1) * 4 * h];
                    gt.copy_from_slice(b);
                    gemv_acc(gt, w, i, xt);
                    gemv_acc(gt, u, h, hp);
                    for (k, v) in gt.iter_mut().enumerate() {
                        *v = if (2 * h..3 * h).contains(&k) { v.tanh() } else { sigmoid(*v) };
                    }
                    let (cprev, ccur) = self.cells.split_at_mut(t * h);
                    let cp = if t == 0 { &self.zeros[..] } else { &cprev[(t - 1) * h..] };
                    for k in 0..h {
                        let (ig, fg, gg, og) = (gt[k], gt[h + k], gt[2 * h + k], gt[3 * h + k]);
                        let c = fg * cp[k] + ig * gg;
                        ccur[k] = c;
                        let tc = c.tanh();
                        self.tanh_c[t * h + k] = tc;
                        cur[k] = og * tc;
                    }
                }
            }
        }
    }

    /// Accumulates parameter gradients into `g` given `dhs`, the loss
    /// gradient with respect to each output step. Adds input gradients to
    /// `dx` when given.
    pub fn backward(&mut self, arch: Arch, p: &[f64], g: &mut [f64], x: &[f64], dhs: &[f64], mut dx: Option<&mut [f64]>) {
        let (i, h) = (self.input, self.h);
        let (w, u, _) = self.split(arch, p);
        let (gw, gu, gb) = self.split_mut(arch, g);
        self.dh_next.fill(0.0);
        self.dc_next.fill(0.0);
        for t in (0..self.t).rev() {
            let xt = &x[t * i..(t + 1) * i];
            let hp = if t == 0 { &self.zeros[..] } else { &self.hs[(t - 1) * h..t * h] };
            for k in 0..h {
                self.dh[k] = dhs[t * h + k] + self.dh_next[k];
            }
            let da = &mut self.da;
            match arch {
                Arch::Mlp | Arch::Rnn => {
                    let ht = &self.hs[t * h..(t + 1) * h];
                    for k in 0..h {
                        da[k] = self.dh[k] * (1.0 - ht[k] * ht[k]);
                    }
                }
                Arch::Gru => {
                    let gt = &self.gates[t * 3 * h..(t + 1) * 3 * h];
                    let rh = &self.rh[t * h..(t + 1) * h];
                    // candidate pre-activation first, it feeds the reset path
                    for k in 0..h {
                        let (z, n) = (gt[k], gt[2 * h + k]);
                        da[2 * h + k] = self.dh[k] * z * (1.0 - n * n);
                        self.dh_next[k] = self.dh[k] * (1.0 - z);
                    }
                    outer_acc(&mut gu[2 * h * h..], &da[2 * h..], rh);
                    let drh = &mut self.drh;
                    drh.fill(0.0);
                    gemv_t_acc(drh, &u[2 * h * h..], h, &da[2 * h..]);
                    for k in 0..h {
                        let (z, r, n) = (gt[k], gt[h + k], gt[2 * h + k]);
                        let dz = self.dh[k] * (n - hp[k]);
                        da[k] = dz * z * (1.0 - z);
                        da[h + k] = drh[k] * hp[k] * r * (1.0 - r);
                        self.dh_next[k] += drh[k] * r;
                    }
                }
                Arch::Lstm => {
                    let gt = &self.gates[t * 4 * h..(t + 1) * 4 * h];
                    let tc = &self.tanh_c[t * h..(t + 1) * h];
                    for k in 0..h {
                        let (ig, fg, gg, og) = (gt[k], gt[h + k], gt[2 * h + k], gt[3 * h + k]);
                        let cp = if t == 0 { 0.0 } else { self.cells[(t - 1) * h + k] };
                        let dc = self.dc_next[k] + self.dh[k] * og * (1.0 - tc[k] * tc[k]);
                        da[k] = dc * gg * ig * (1.0 - ig);
                        da[h + k] = dc * cp * fg * (1.0 - fg);
                        da[2 * h + k] = dc * ig * (1.0 - gg * gg);
                        da[3 * h + k] = self.dh[k] * tc[k] * og * (1.0 - og);
                        self.dc_next[k] = dc * fg;
                    }
                }
            }
            let gates = arch.gates().max(1);
            let da_all = &self.da[..gates * h];
            outer_acc(gw, da_all, xt);
            for (gbk, d) in gb.iter_mut().zip(da_all) {
                *gbk += d;
            }
            if let Some(dx) = dx.as_deref_mut() {
                gemv_t_acc(&mut dx[t * i..(t + 1) * i], w, i, da_all);
            }
            match arch {
                Arch::Mlp => {}
                Arch::Gru => {
                    if t > 0 {
                        outer_acc(&mut gu[..2 * h * h], &da_all[..2 * h], hp);
                    }
                    gemv_t_acc(&mut self.dh_next, &u[..2 * h * h], h, &da_all[..2 * h]);
                }
                Arch::Rnn | Arch::Lstm => {
                    if t > 0 {
                        outer_acc(gu, da_all, hp);
                    }
                    self.dh_next.fill(0.0);
                    gemv_t_acc(&mut self.dh_next, u, h, da_all);
                }
            }
        }
    }
}
