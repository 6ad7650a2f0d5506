//! Dense row-major kernels used by the cells.

/// `out += m * x`, with `m` of shape `rows x cols`.
#[inline]
pub fn gemv_acc(out: &mut [f64], m: &[f64], cols: usize, x: &[f64]) {
    debug_assert_eq!(m.len(), out.len() * cols);
    debug_assert_eq!(x.len(), cols);
    for (o, row) in out.iter_mut().zip(m.chunks_exact(cols)) {
        let mut acc = 0.0;
        for (a, b) in row.iter().zip(x) {
            acc += a * b;
        }
        *o += acc;
    }
}

/// `out += m^T * v`, with `m` of shape `rows x cols`, `v` of length `rows`.
#[inline]
pub fn gemv_t_acc(out: &mut [f64], m: &[f64], cols: usize, v: &[f64]) {
    debug_assert_eq!(out.len(), cols);
    debug_assert_eq!(m.len(), v.len() * cols);
    for (&vi, row) in v.iter().zip(m.chunks_exact(cols)) {
        if vi == 0.0 {
            continue;
        }
        for (o, a) in out.iter_mut().zip(row) {
            *o += vi * a;
        }
    }
}

/// `g += v * x^T`, with `g` of shape `len(v) x len(x)`.
#[inline]
pub fn outer_acc(g: &mut [f64], v: &[f64], x: &[f64]) {
    let cols = x.len();
    debug_assert_eq!(g.len(), v.len() * cols);
    for (&vi, row) in v.iter().zip(g.chunks_exact_mut(cols)) {
        if vi == 0.0 {
            continue;
        }
        for (o, b) in row.iter_mut().zip(x) {
            *o += vi * b;
        }
    }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernels_match_naive() {
        let m = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0]; // 2 x 3
        let mut out = [1.0, 1.0];
        gemv_acc(&mut out, &m, 3, &[1.0, 0.0, -1.0]);
        assert_eq!(out, [1.0 - 2.0, 1.0 - 2.0]);
        let mut out_t = [0.0; 3];
        gemv_t_acc(&mut out_t, &m, 3, &[1.0, 2.0]);
        assert_eq!(out_t, [9.0, 12.0, 15.0]);
        let mut g = [0.0; 6];
        outer_acc(&mut g, &[1.0, 2.0], &[3.0, 4.0, 5.0]);
        assert_eq!(g, [3.0, 4.0, 5.0, 6.0, 8.0, 10.0]);
        assert_eq!(sigmoid(0.0), 0.5);
    }
}
