//! Central-difference Jacobians, the oracle every analytic gradient in this
//! crate is tested against.

use crate::tensor::Tensor;

/// Default perturbation for central differences.
pub const DEFAULT_EPS: f64 = 1e-5;

/// Numerical Jacobian of `f` at `x` via central differences:
/// `J[i, j] = (f(x + eps e_j)_i - f(x - eps e_j)_i) / (2 eps)`.
///
/// `f` must be deterministic and smooth near `x`. The output is an
/// `out_len x in_len` matrix.
pub fn numeric_jacobian(f: impl Fn(&Tensor) -> Tensor, x: &Tensor, eps: f64) -> Tensor {
    let n = x.len();
    let m = f(x).len();
    let mut jac = Tensor::zeros(&[m, n]);
    for j in 0..n {
        let mut plus = x.clone();
        plus.data_mut()[j] += eps;
        let mut minus = x.clone();
        minus.data_mut()[j] -= eps;
        let fp = f(&plus);
        let fm = f(&minus);
        for i in 0..m {
            let v = (fp.data()[i] - fm.data()[i]) / (2.0 * eps);
            jac.data_mut()[i * n + j] = v;
        }
    }
    jac
}

/// `max |a - b| / max(max |b|, floor)` — the relative-error metric used by
/// the gradient acceptance checks.
pub fn relative_error(analytic: &Tensor, numeric: &Tensor) -> f64 {
    let diff = analytic
        .data()
        .iter()
        .zip(numeric.data())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let scale = numeric.data().iter().map(|v| v.abs()).fold(0.0, f64::max);
    diff / scale.max(1e-12)
}
