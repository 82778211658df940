//! Row-major dense kernels used by the encoder's forward and backward passes.

use std::fmt::Debug;
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::{Float, FromPrimitive};

/// Floating-point element type of the encoder. `f32` is the training
/// precision; `f64` is used for finite-difference gradient checks.
pub trait Scalar:
    Float + FromPrimitive + Sum + AddAssign + SubAssign + MulAssign + DivAssign + Send + Sync + Debug + Default + 'static
{
    fn c(v: f64) -> Self {
        Self::from_f64(v).expect("representable constant")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// `out[m x n] += a[m x k] * b[k x n]`
pub fn matmul_add<F: Scalar>(out: &mut [F], a: &[F], b: &[F], m: usize, k: usize, n: usize) {
    debug_assert_eq!(out.len(), m * n);
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    for i in 0..m {
        let row = &mut out[i * n..(i + 1) * n];
        for (p, &av) in a[i * k..(i + 1) * k].iter().enumerate() {
            if av == F::zero() {
                continue;
            }
            for (o, &bv) in row.iter_mut().zip(&b[p * n..(p + 1) * n]) {
                *o += av * bv;
            }
        }
    }
}

/// `out[m x n] += a[m x k] * b[n x k]^T`
pub fn matmul_bt_add<F: Scalar>(out: &mut [F], a: &[F], b: &[F], m: usize, k: usize, n: usize) {
    debug_assert_eq!(out.len(), m * n);
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), n * k);
    for i in 0..m {
        let ar = &a[i * k..(i + 1) * k];
        for j in 0..n {
            out[i * n + j] += dot(ar, &b[j * k..(j + 1) * k]);
        }
    }
}

/// `out[k x n] += a[m x k]^T * b[m x n]`
pub fn matmul_at_add<F: Scalar>(out: &mut [F], a: &[F], b: &[F], m: usize, k: usize, n: usize) {
    debug_assert_eq!(out.len(), k * n);
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), m * n);
    for i in 0..m {
        let br = &b[i * n..(i + 1) * n];
        for (p, &av) in a[i * k..(i + 1) * k].iter().enumerate() {
            if av == F::zero() {
                continue;
            }
            for (o, &bv) in out[p * n..(p + 1) * n].iter_mut().zip(br) {
                *o += av * bv;
            }
        }
    }
}

pub fn dot<F: Scalar>(a: &[F], b: &[F]) -> F {
    let mut acc = F::zero();
    for (&x, &y) in a.iter().zip(b) {
        acc += x * y;
    }
    acc
}

/// `x[rows x n] @ w[n x out] + bias`, returned as a fresh buffer.
pub fn affine<F: Scalar>(x: &[F], w: &[F], bias: &[F], rows: usize, n: usize, out_dim: usize) -> Vec<F> {
    let mut out = Vec::with_capacity(rows * out_dim);
    for _ in 0..rows {
        out.extend_from_slice(bias);
    }
    matmul_add(&mut out, x, w, rows, n, out_dim);
    out
}

/// Backward of [`affine`]: accumulates weight and bias gradients and, when
/// `dx` is given, the input gradient.
#[allow(clippy::too_many_arguments)]
pub fn affine_backward<F: Scalar>(
    dy: &[F],
    x: &[F],
    w: &[F],
    dw: &mut [F],
    dbias: &mut [F],
    dx: Option<&mut [F]>,
    rows: usize,
    n: usize,
    out_dim: usize,
) {
    for r in 0..rows {
        for (db, &g) in dbias.iter_mut().zip(&dy[r * out_dim..(r + 1) * out_dim]) {
            *db += g;
        }
    }
    matmul_at_add(dw, x, dy, rows, n, out_dim);
    if let Some(dx) = dx {
        matmul_bt_add(dx, dy, w, rows, out_dim, n);
    }
}

pub const LN_EPS: f64 = 1e-12;

/// Normalized activations and inverse standard deviations kept for backward.
#[derive(Debug, Clone, Default)]
pub struct LnCache<F> {
    pub xhat: Vec<F>,
    pub inv_std: Vec<F>,
}

pub fn layer_norm<F: Scalar>(x: &[F], gain: &[F], bias: &[F], d: usize) -> (Vec<F>, LnCache<F>) {
    let rows = x.len() / d;
    let eps = F::c(LN_EPS);
    let dn = F::c(d as f64);
    let mut y = vec![F::zero(); x.len()];
    let mut xhat = vec![F::zero(); x.len()];
    let mut inv_std = Vec::with_capacity(rows);
    for r in 0..rows {
        let xr = &x[r * d..(r + 1) * d];
        let mean = xr.iter().copied().sum::<F>() / dn;
        let var = xr.iter().map(|&v| (v - mean) * (v - mean)).sum::<F>() / dn;
        let inv = F::one() / (var + eps).sqrt();
        inv_std.push(inv);
        for i in 0..d {
            let h = (xr[i] - mean) * inv;
            xhat[r * d + i] = h;
            y[r * d + i] = gain[i] * h + bias[i];
        }
    }
    (y, LnCache { xhat, inv_std })
}

/// Returns dx; accumulates gain and bias gradients.
pub fn layer_norm_backward<F: Scalar>(
    dy: &[F],
    cache: &LnCache<F>,
    gain: &[F],
    dgain: &mut [F],
    dbias: &mut [F],
    d: usize,
) -> Vec<F> {
    let rows = dy.len() / d;
    let dn = F::c(d as f64);
    let mut dx = vec![F::zero(); dy.len()];
    let mut dxhat = vec![F::zero(); d];
    for r in 0..rows {
        let dyr = &dy[r * d..(r + 1) * d];
        let xh = &cache.xhat[r * d..(r + 1) * d];
        let mut sum = F::zero();
        let mut sum_xh = F::zero();
        for i in 0..d {
            dgain[i] += dyr[i] * xh[i];
            dbias[i] += dyr[i];
            dxhat[i] = dyr[i] * gain[i];
            sum += dxhat[i];
            sum_xh += dxhat[i] * xh[i];
        }
        let scale = cache.inv_std[r] / dn;
        for i in 0..d {
            dx[r * d + i] = scale * (dn * dxhat[i] - sum - xh[i] * sum_xh);
        }
    }
    dx
}

const GELU_C: f64 = 0.044_715;

fn sqrt_2_over_pi<F: Scalar>() -> F {
    F::c((2.0 / std::f64::consts::PI).sqrt())
}

/// tanh approximation of GELU.
pub fn gelu<F: Scalar>(x: F) -> F {
    let inner = sqrt_2_over_pi::<F>() * (x + F::c(GELU_C) * x * x * x);
    F::c(0.5) * x * (F::one() + inner.tanh())
}

pub fn gelu_grad<F: Scalar>(x: F) -> F {
    let k = sqrt_2_over_pi::<F>();
    let inner = k * (x + F::c(GELU_C) * x * x * x);
    let t = inner.tanh();
    let dinner = k * (F::one() + F::c(3.0 * GELU_C) * x * x);
    F::c(0.5) * (F::one() + t) + F::c(0.5) * x * (F::one() - t * t) * dinner
}

/// In-place log-softmax over one row.
pub fn log_softmax_in_place<F: Scalar>(row: &mut [F]) {
    let max = row.iter().copied().fold(F::neg_infinity(), F::max);
    let lse = max + row.iter().map(|&v| (v - max).exp()).sum::<F>().ln();
    for v in row.iter_mut() {
        *v -= lse;
    }
}
