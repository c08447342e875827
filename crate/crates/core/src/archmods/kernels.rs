//! Row-major dense kernels shared by the rollout and GRU adjoints.

/// y += W x  (W is rows × x.len(), row-major)
#[inline]
pub(crate) fn matvec_acc(w: &[f64], x: &[f64], y: &mut [f64]) {
    let cols = x.len();
    for (yi, row) in y.iter_mut().zip(w.chunks_exact(cols)) {
        let mut acc = 0.0;
        for (a, b) in row.iter().zip(x) {
            acc += a * b;
        }
        *yi += acc;
    }
}

/// y += Wᵀ d
#[inline]
pub(crate) fn matvec_t_acc(w: &[f64], d: &[f64], y: &mut [f64]) {
    let cols = y.len();
    for (di, row) in d.iter().zip(w.chunks_exact(cols)) {
        if *di == 0.0 {
            continue;
        }
        for (yj, a) in y.iter_mut().zip(row) {
            *yj += di * a;
        }
    }
}

/// G += d xᵀ
#[inline]
pub(crate) fn outer_acc(d: &[f64], x: &[f64], g: &mut [f64]) {
    let cols = x.len();
    for (di, row) in d.iter().zip(g.chunks_exact_mut(cols)) {
        if *di == 0.0 {
            continue;
        }
        for (gj, xj) in row.iter_mut().zip(x) {
            *gj += di * xj;
        }
    }
}
