//! The rotated harmonic oscillator `Q = −d²/dy² + iy²` in the Hermite basis
//! and its resolvent along `E = iλ + μ`.

use std::io::Write;

use faer::Mat;
use num_complex::Complex64 as c64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::numerics;

/// Compressions of `y²` and `d²/dy²` to the first `n` Hermite functions.
#[derive(Clone, Debug)]
pub struct HermiteOperator {
    pub n: usize,
    pub y2: Mat<c64>,
    pub d2: Mat<c64>,
    pub q: Mat<c64>,
}

/// Matrix of `y²` (sign = 1) or `−d²/dy²` (sign = −1) on `span{φ_0..φ_{n−1}}`.
///
/// Exact projections of the operators (not squares of the truncated
/// tridiagonal `y`), so `−D² + Y²` is diagonal with entries `2m + 1`.
fn ladder_square(n: usize, sign: f64) -> Mat<c64> {
    Mat::from_fn(n, n, |i, j| {
        let (lo, hi) = (i.min(j), i.max(j));
        if i == j {
            c64::new(i as f64 + 0.5, 0.0)
        } else if hi == lo + 2 {
            c64::new(sign * (((lo + 1) * (lo + 2)) as f64).sqrt() / 2.0, 0.0)
        } else {
            c64::new(0.0, 0.0)
        }
    })
}

pub fn build_rotated_oscillator(n: usize) -> Result<HermiteOperator> {
    if n < 4 {
        return Err(Error::InvalidInput(format!("Hermite truncation n = {n} must be at least 4")));
    }
    let y2 = ladder_square(n, 1.0);
    let minus_d2 = ladder_square(n, -1.0);
    let d2 = Mat::from_fn(n, n, |i, j| -minus_d2[(i, j)]);
    let q = Mat::from_fn(n, n, |i, j| minus_d2[(i, j)] + c64::new(0.0, 1.0) * y2[(i, j)]);
    Ok(HermiteOperator { n, y2, d2, q })
}

/// `−h²d²/dx² + ix²` on the first `n` Hermite functions.
pub fn semiclassical_oscillator(n: usize, h: f64) -> Result<Mat<c64>> {
    let op = build_rotated_oscillator(n)?;
    Ok(Mat::from_fn(n, n, |i, j| -op.d2[(i, j)] * (h * h) + c64::new(0.0, 1.0) * op.y2[(i, j)]))
}

impl HermiteOperator {
    /// Eigenvalues of `Q` sorted by modulus. Parity splits `Q` into even and
    /// odd blocks, which are diagonalized separately.
    pub fn eigenvalues(&self) -> Result<Vec<c64>> {
        let mut all = Vec::with_capacity(self.n);
        for parity in 0..2 {
            let idx: Vec<usize> = (parity..self.n).step_by(2).collect();
            let block = Mat::from_fn(idx.len(), idx.len(), |a, b| self.q[(idx[a], idx[b])]);
            all.extend(numerics::eigenvalues(block.as_ref())?);
        }
        all.sort_by(|a, b| a.norm().total_cmp(&b.norm()));
        Ok(all)
    }

    /// `1/s_min(Q − E)`.
    pub fn resolvent_norm(&self, e: c64) -> Result<f64> {
        let a = numerics::shifted(self.q.as_ref(), e);
        Ok(1.0 / numerics::smallest_singular(a.as_ref())?.s_min)
    }

    /// `Re⟨Qx, x⟩`.
    pub fn real_numerical_value(&self, x: &[c64]) -> f64 {
        numerics::inner(&numerics::mat_vec(self.q.as_ref(), x), x).re
    }
}

pub const DEFAULT_GUARD: f64 = 3.0;
/// Relative change between `n` and `1.5n` above which a cell is flagged.
pub const SENSITIVITY: f64 = 0.05;

#[derive(Clone, Debug, PartialEq)]
pub struct ScanCell {
    pub lambda: f64,
    pub mu: f64,
    pub norm: f64,
    pub flagged: bool,
}

/// `‖(Q − (iλ + μ))⁻¹‖` over `lambdas × mus`, row-major in `λ`. Every cell is
/// recomputed at `1.5n` and flagged when the two differ by more than 5%.
pub fn resolvent_scan(q: &HermiteOperator, lambdas: &[f64], mus: &[f64], guard: f64) -> Result<Vec<ScanCell>> {
    let max_l = lambdas.iter().fold(0.0f64, |m, l| m.max(l.abs()));
    if (q.n as f64) < guard * max_l {
        return Err(Error::Resolution(format!(
            "Hermite truncation n = {} below guard {guard} x max lambda = {}",
            q.n,
            guard * max_l
        )));
    }
    let fine = build_rotated_oscillator((1.5 * q.n as f64).ceil() as usize)?;
    let cells: Vec<(f64, f64)> = lambdas.iter().flat_map(|&l| mus.iter().map(move |&m| (l, m))).collect();
    cells
        .par_iter()
        .map(|&(lambda, mu)| {
            let e = c64::new(mu, lambda);
            let norm = q.resolvent_norm(e)?;
            let check = fine.resolvent_norm(e)?;
            let flagged = ((check - norm) / check).abs() > SENSITIVITY;
            Ok(ScanCell { lambda, mu, norm, flagged })
        })
        .collect()
}

pub fn write_scan_csv<W: Write>(cells: &[ScanCell], mut w: W) -> std::io::Result<()> {
    writeln!(w, "lambda,mu,norm,flag")?;
    for c in cells {
        writeln!(w, "{},{},{:.12e},{}", c.lambda, c.mu, c.norm, c.flagged as u8)?;
    }
    Ok(())
}

/// The curve `μ = λ^{1/3}(ln λ)^{2/3}`.
pub fn boundary_curve(lambda: f64) -> f64 {
    lambda.cbrt() * lambda.ln().powf(2.0 / 3.0)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RescalingCheck {
    /// `s_min(Q − (iλ + μ))`.
    pub lhs: f64,
    /// `λ·s_min(P_h − (i + μ/λ))`, `h = 1/λ`.
    pub rhs: f64,
}

impl RescalingCheck {
    pub fn relative_gap(&self) -> f64 {
        (self.lhs - self.rhs).abs() / self.lhs.abs().max(self.rhs.abs())
    }
}

/// Compares both sides of `Q − E = λ(P_h − (i + μ/λ))`. `n` is the Hermite
/// size for `Q`, `k` the one for `P_h` (which needs about `λ` times more
/// modes since its states live at scale `√h` in `x`).
pub fn rescaling_check(lambda: f64, mu: f64, n: usize, k: usize) -> Result<RescalingCheck> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidInput("lambda must be positive".into()));
    }
    if (n as f64) < DEFAULT_GUARD * lambda {
        return Err(Error::Resolution(format!("n = {n} below {DEFAULT_GUARD} x lambda")));
    }
    if (k as f64) < lambda * lambda.max(1.0) {
        return Err(Error::Resolution(format!("k = {k} below lambda^2")));
    }
    let q = build_rotated_oscillator(n)?;
    let lhs = 1.0 / q.resolvent_norm(c64::new(mu, lambda))?;
    let h = 1.0 / lambda;
    let p = semiclassical_oscillator(k, h)?;
    let z = c64::new(mu / lambda, 1.0);
    let a = numerics::shifted(p.as_ref(), z);
    let rhs = lambda * numerics::smallest_singular(a.as_ref())?.s_min;
    Ok(RescalingCheck { lhs, rhs })
}
