//! Single-mode Wigner functions on phase-space grids.
//!
//! Convention: `x = (a + a^dagger)/sqrt(2)`, `hbar = 1`, so a coherent state
//! `|beta>` peaks at `(sqrt(2) Re beta, sqrt(2) Im beta)` and the vacuum has
//! `W(0, 0) = 1/pi`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::hilbert::{ReducedDensity, C64};

/// Largest tolerated loss of probability on the grid.
pub const WIGNER_DEFICIT_LIMIT: f64 = 1e-2;

/// Imaginary residue of the kernel sum above which the density matrix is rejected as non-Hermitian.
const IMAGINARY_LIMIT: f64 = 1e-10;

/// Uniform axis of `points` values on `[-half_width, half_width]`.
pub fn symmetric_axis(half_width: f64, points: usize) -> Result<Vec<f64>> {
    if points < 2 || !(half_width > 0.0) {
        return Err(Error::InvalidArgument(format!("axis needs at least 2 points and positive width, got {points}, {half_width}")));
    }
    let h = 2.0 * half_width / (points - 1) as f64;
    Ok((0..points).map(|i| -half_width + h * i as f64).collect())
}

/// 201 points on `[-9, 9]`.
pub fn default_axis() -> Vec<f64> {
    symmetric_axis(9.0, 201).expect("valid default")
}

/// Half-width that covers a mode truncated at `dim`: `sqrt(2 dim) + 3`.
pub fn covering_half_width(dim: usize) -> f64 {
    (2.0 * dim as f64).sqrt() + 3.0
}

/// `W(x, p)` sampled on a rectangular grid; `values[(i, j)]` is at `(x_axis[j], p_axis[i])`.
#[derive(Debug, Clone, PartialEq)]
pub struct WignerGrid {
    pub x_axis: Vec<f64>,
    pub p_axis: Vec<f64>,
    pub values: DMatrix<f64>,
}

fn trapezoid_weights(axis: &[f64]) -> Vec<f64> {
    let n = axis.len();
    (0..n)
        .map(|i| {
            let left = if i > 0 { axis[i] - axis[i - 1] } else { 0.0 };
            let right = if i + 1 < n { axis[i + 1] - axis[i] } else { 0.0 };
            0.5 * (left + right)
        })
        .collect()
}

impl WignerGrid {
    fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        let wx = trapezoid_weights(&self.x_axis);
        let wp = trapezoid_weights(&self.p_axis);
        let mut total = 0.0;
        for (i, &a) in wp.iter().enumerate() {
            for (j, &b) in wx.iter().enumerate() {
                total += a * b * f(self.values[(i, j)]);
            }
        }
        total
    }

    /// Trapezoid estimate of the integral of `W` over the grid.
    pub fn integral(&self) -> f64 {
        self.integrate(|w| w)
    }

    /// `2 pi` times the integral of `W^2`, an estimate of `tr(rho^2)`.
    pub fn purity(&self) -> f64 {
        2.0 * PI * self.integrate(|w| w * w)
    }

    pub fn min(&self) -> f64 {
        self.values.min()
    }

    pub fn max(&self) -> f64 {
        self.values.max()
    }

    /// Grid point `(x, p)` of the largest value.
    pub fn argmax(&self) -> (f64, f64) {
        let mut best = (0, 0, f64::NEG_INFINITY);
        for r in 0..self.values.nrows() {
            for c in 0..self.values.ncols() {
                if self.values[(r, c)] > best.2 {
                    best = (r, c, self.values[(r, c)]);
                }
            }
        }
        (self.x_axis[best.1], self.p_axis[best.0])
    }

    /// Area of the grid where `W` is negative.
    pub fn negative_volume(&self) -> f64 {
        -self.integrate(|w| w.min(0.0))
    }
}

fn check_axis(axis: &[f64], name: &str) -> Result<()> {
    if axis.len() < 2 || axis.iter().any(|v| !v.is_finite()) || axis.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument(format!("{name} axis must be finite, increasing, with at least 2 points")));
    }
    Ok(())
}

fn ln_factorials(n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n + 1];
    for k in 1..=n {
        out[k] = out[k - 1] + (k as f64).ln();
    }
    out
}

/// `(1/pi) sum_{m,n} rho_{nm} <m| D(alpha) P D(alpha)^dagger |n>` at one phase-space point.
fn wigner_point(rho: &DMatrix<C64>, lnfact: &[f64], alpha: C64) -> C64 {
    let d = rho.nrows();
    let r2 = alpha.norm_sqr();
    let x = 4.0 * r2;
    let mut acc = C64::new(0.0, 0.0);
    let mut laguerre = vec![0.0; d];
    for k in 0..d {
        // kernel for m = n + k, n = 0..d-k
        if k > 0 && r2 == 0.0 {
            break;
        }
        let count = d - k;
        laguerre[0] = 1.0;
        if count > 1 {
            laguerre[1] = 1.0 + k as f64 - x;
        }
        for n in 1..count.saturating_sub(1) {
            let nf = n as f64;
            laguerre[n + 1] = ((2.0 * nf + 1.0 + k as f64 - x) * laguerre[n] - (nf + k as f64) * laguerre[n - 1]) / (nf + 1.0);
        }
        let phase = if k == 0 { C64::new(1.0, 0.0) } else { C64::from_polar(1.0, k as f64 * alpha.arg()) };
        let ln_two_r = if k == 0 { 0.0 } else { (2.0 * r2.sqrt()).ln() };
        for n in 0..count {
            let m = n + k;
            let ln_mag = -2.0 * r2 + k as f64 * ln_two_r + 0.5 * (lnfact[n] - lnfact[m]);
            let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
            let kernel = phase * (sign * ln_mag.exp() * laguerre[n]);
            // <m|Pi|n> pairs with rho_{nm}; <n|Pi|m> is its conjugate and pairs with rho_{mn}
            acc += rho[(n, m)] * kernel;
            if k > 0 {
                acc += rho[(m, n)] * kernel.conj();
            }
        }
    }
    acc / PI
}

/// Wigner function of a single-mode density matrix on the grid `x_axis` by `p_axis`.
pub fn wigner(rho: &ReducedDensity, x_axis: &[f64], p_axis: &[f64]) -> Result<WignerGrid> {
    if rho.dims().len() != 1 {
        return Err(Error::LayoutMismatch(format!("Wigner function needs a single mode, got factors {:?}", rho.dims())));
    }
    check_axis(x_axis, "x")?;
    check_axis(p_axis, "p")?;
    let matrix = rho.matrix();
    let lnfact = ln_factorials(matrix.nrows());
    let rows: Vec<Vec<C64>> = p_axis
        .par_iter()
        .map(|&p| {
            x_axis
                .iter()
                .map(|&x| wigner_point(matrix, &lnfact, C64::new(x, p) / 2f64.sqrt()))
                .collect()
        })
        .collect();
    let residue = rows.iter().flatten().map(|w| w.im.abs()).fold(0.0, f64::max);
    if residue > IMAGINARY_LIMIT {
        return Err(Error::InvalidArgument(format!("density matrix is not Hermitian: imaginary residue {residue:.3e}")));
    }
    let values = DMatrix::from_fn(p_axis.len(), x_axis.len(), |i, j| rows[i][j].re);
    let grid = WignerGrid { x_axis: x_axis.to_vec(), p_axis: p_axis.to_vec(), values };
    let deficit = rho.trace().re - grid.integral();
    if deficit.abs() > WIGNER_DEFICIT_LIMIT {
        return Err(Error::GridTooSmall { deficit });
    }
    Ok(grid)
}
