//! Rank-one Grushin reduction of `P − z`.
//!
//! The bordered matrix `𝒫(z) = [[P − z, R₋], [R₊, 0]]` with `R₊u = (u|e₀)` and
//! `R₋u₋ = u₋f₀` is invertible as soon as `t₁(z) > 0`; the lower right entry
//! `E₋₊(z)` of its inverse vanishes exactly on the spectrum.

use std::io::Write;

use faer::{Mat, MatRef};
use num_complex::Complex64 as c64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::numerics::{self, LuFactor};
use crate::pseudospectrum::ZGrid;
use crate::quasimode::find_crossings;
use crate::symbol::{FourierOperator, Symbol1D};

const I: c64 = c64 { re: 0.0, im: 1.0 };
/// Below `F0_SWITCH·‖P − z‖_F` the vector `f₀` comes from `(P − z)(P − z)ᴴ`
/// instead of `(P − z)e₀/t₀`.
const F0_SWITCH: f64 = 1e-8;
const GAUGE_OVERLAP: f64 = 0.9;

/// Phase convention for the singular vectors.
#[derive(Clone, Debug, PartialEq)]
pub enum Gauge {
    /// Largest entry of `e₀` real and positive, `f₀` inherits its phase
    /// through `f₀ = (P − z)e₀/t₀`. With this choice `E₋₊ = −t₀` is real.
    LargestEntry,
    /// `(e₀|e_ref)` and `(f₀|f_ref)` real and positive, fixed independently.
    /// Smooth across eigenvalues, so `E₋₊` winds once around each of them.
    Reference { e_ref: Vec<c64>, f_ref: Vec<c64> },
}

impl Gauge {
    /// Reference gauge pinned to single basis vectors.
    pub fn entries(n: usize, e_index: usize, f_index: usize) -> Self {
        let basis = |k: usize| (0..n).map(|i| c64::new((i == k) as u8 as f64, 0.0)).collect();
        Gauge::Reference { e_ref: basis(e_index), f_ref: basis(f_index) }
    }

    /// Reference gauge pinned to the largest entries of `e₀`, `f₀` at `z`.
    pub fn frozen_at(p: MatRef<'_, c64>, z: c64) -> Result<Self> {
        let d = singular_pair_matrix(p, z, &Gauge::LargestEntry)?;
        Ok(Self::entries(d.e0.len(), argmax(&d.e0), argmax(&d.f0)))
    }
}

fn argmax(v: &[c64]) -> usize {
    v.iter()
        .enumerate()
        .fold((0, -1.0), |acc, (i, x)| if x.norm() > acc.1 * (1.0 + 1e-12) { (i, x.norm()) } else { acc })
        .0
}

fn align(v: &mut [c64], reference: &[c64]) -> Result<()> {
    let o = numerics::inner(v, reference);
    if o.norm() < 1e-3 {
        return Err(Error::GaugeDiscontinuity { overlap: o.norm() });
    }
    let phase = o.conj() / o.norm();
    v.iter_mut().for_each(|x| *x *= phase);
    Ok(())
}

#[derive(Clone, Debug)]
pub struct GrushinData {
    pub z: c64,
    pub t0: f64,
    pub t1: f64,
    pub e0: Vec<c64>,
    pub f0: Vec<c64>,
    /// `E₋₊(z)`; `None` until [`effective_function`] has run.
    pub e_mp: Option<c64>,
    /// `E₊` (column) and `E₋` (row) of the inverse.
    pub e_plus: Vec<c64>,
    pub e_minus: Vec<c64>,
    pub block_residual: f64,
    /// `|E₋₊⁻¹ + R₊(P − z)⁻¹R₋|·|E₋₊|` when `(P − z)` is comfortably invertible.
    pub inverse_identity_defect: Option<f64>,
}

/// `t₀ ≤ t₁` and the vectors `e₀`, `f₀` with `(P − z)e₀ = t₀f₀` up to the gauge.
pub fn singular_pair_matrix(p: MatRef<'_, c64>, z: c64, gauge: &Gauge) -> Result<GrushinData> {
    let a = numerics::shifted(p, z);
    let q = a.adjoint() * &a;
    let pair = numerics::hermitian_smallest_two(q.as_ref())?;
    let mut e0 = pair.v0;
    let ae0 = numerics::mat_vec(a.as_ref(), &e0);
    let t0 = numerics::norm(&ae0);
    let t1 = pair.lambda1.max(0.0).sqrt().max(t0);
    let fro = numerics::frobenius(a.as_ref());
    let ground_left = || -> Result<Vec<c64>> {
        let qt = &a * a.adjoint();
        Ok(numerics::hermitian_smallest_two(qt.as_ref())?.v0)
    };
    let f0 = match gauge {
        Gauge::LargestEntry => {
            let phase = numerics::fix_phase_largest(&mut e0);
            if t0 > F0_SWITCH * fro {
                ae0.iter().map(|v| v * phase / t0).collect()
            } else {
                let mut f = ground_left()?;
                numerics::fix_phase_largest(&mut f);
                f
            }
        }
        Gauge::Reference { e_ref, f_ref } => {
            align(&mut e0, e_ref)?;
            let mut f = ground_left()?;
            align(&mut f, f_ref)?;
            f
        }
    };
    Ok(GrushinData {
        z,
        t0,
        t1,
        e0,
        f0,
        e_mp: None,
        e_plus: Vec::new(),
        e_minus: Vec::new(),
        block_residual: 0.0,
        inverse_identity_defect: None,
    })
}

pub fn singular_pair(op: &FourierOperator, z: c64, gauge: &Gauge) -> Result<GrushinData> {
    singular_pair_matrix(op.matrix.as_ref(), z, gauge)
}

fn bordered(a: MatRef<'_, c64>, e0: &[c64], f0: &[c64]) -> Mat<c64> {
    let n = a.nrows();
    Mat::from_fn(n + 1, n + 1, |i, j| match (i < n, j < n) {
        (true, true) => a[(i, j)],
        (true, false) => f0[i],
        (false, true) => e0[j].conj(),
        (false, false) => c64::new(0.0, 0.0),
    })
}

/// Solves the bordered system for `E₊`, `E₋` and `E₋₊` given the singular data.
pub fn solve_grushin(p: MatRef<'_, c64>, mut data: GrushinData) -> Result<GrushinData> {
    let n = p.nrows();
    let a = numerics::shifted(p, data.z);
    let b = bordered(a.as_ref(), &data.e0, &data.f0);
    let lu = LuFactor::new(b.as_ref())?;
    let mut unit = vec![c64::new(0.0, 0.0); n + 1];
    unit[n] = c64::new(1.0, 0.0);
    let col = lu.solve(&unit);
    let row = lu.solve_adjoint(&unit);
    let r1 = numerics::mat_vec(b.as_ref(), &col);
    let r2 = numerics::adjoint_mat_vec(b.as_ref(), &row);
    let res = |r: &[c64]| r.iter().zip(&unit).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt();
    data.block_residual = res(&r1).max(res(&r2));
    if data.block_residual > 1e-9 {
        return Err(Error::Singular { condition: lu.condition });
    }
    let e_mp = col[n];
    data.e_plus = col[..n].to_vec();
    data.e_minus = row[..n].iter().map(|v| v.conj()).collect();
    data.e_mp = Some(e_mp);
    // E₋₊⁻¹ = −R₊(P − z)⁻¹R₋ away from the spectrum
    if data.t0 > 1e-3 * numerics::frobenius(a.as_ref()) {
        if let Ok(x) = numerics::solve(a.as_ref(), &data.f0) {
            let lhs = 1.0 / e_mp;
            let rhs = -numerics::inner(&x, &data.e0);
            data.inverse_identity_defect = Some((lhs - rhs).norm() * e_mp.norm());
        }
    }
    Ok(data)
}

pub fn effective_function_matrix(p: MatRef<'_, c64>, z: c64, gauge: &Gauge) -> Result<GrushinData> {
    let data = singular_pair_matrix(p, z, gauge)?;
    if !(data.t1 > 0.0) {
        return Err(Error::Singular { condition: f64::INFINITY });
    }
    solve_grushin(p, data)
}

pub fn effective_function(op: &FourierOperator, z: c64, gauge: &Gauge) -> Result<GrushinData> {
    effective_function_matrix(op.matrix.as_ref(), z, gauge)
}

/// `t₀, t₁, E₋₊` over a grid, row-major, in parallel.
pub fn grushin_map(op: &FourierOperator, grid: &ZGrid, gauge: &Gauge) -> Vec<Result<GrushinData>> {
    (0..grid.len())
        .into_par_iter()
        .map(|idx| effective_function(op, grid.node(idx % grid.nx, idx / grid.nx), gauge))
        .collect()
}

pub fn write_map_csv<W: Write>(grid: &ZGrid, rows: &[Result<GrushinData>], mut w: W) -> std::io::Result<()> {
    writeln!(w, "re,im,t0,t1,reEmp,imEmp")?;
    for (idx, r) in rows.iter().enumerate() {
        let z = grid.node(idx % grid.nx, idx / grid.nx);
        match r {
            Ok(d) => {
                let e = d.e_mp.unwrap_or(c64::new(f64::NAN, f64::NAN));
                writeln!(w, "{:e},{:e},{:e},{:e},{:e},{:e}", z.re, z.im, d.t0, d.t1, e.re, e.im)?
            }
            Err(_) => writeln!(w, "{:e},{:e},NaN,NaN,NaN,NaN", z.re, z.im)?,
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// d-bar identity

#[derive(Clone, Debug)]
pub struct DbarSample {
    pub z: c64,
    pub step: f64,
    pub e_mp: c64,
    pub dbar_e_mp: c64,
    /// `f = (E₊|∂_z e₀) + E₋(∂_z̄ f₀)`.
    pub f_estimate: c64,
    /// `|∂_z̄E₋₊ + f·E₋₊|`.
    pub identity_residual: f64,
    /// `max(|∂_z̄E₋₊|, |f·E₋₊|)`.
    pub scale: f64,
}

impl DbarSample {
    pub fn relative_residual(&self) -> f64 {
        self.identity_residual / self.scale.max(f64::MIN_POSITIVE)
    }
}

fn check_overlap(center: &GrushinData, other: &GrushinData) -> Result<()> {
    for (u, v) in [(&center.e0, &other.e0), (&center.f0, &other.f0)] {
        let o = numerics::inner(v, u).re;
        if o < GAUGE_OVERLAP {
            return Err(Error::GaugeDiscontinuity { overlap: o });
        }
    }
    Ok(())
}

/// `∂_z̄E₋₊ + fE₋₊` by centered differences in a gauge frozen at `z`.
pub fn dbar_residual_with(p: MatRef<'_, c64>, z: c64, step: f64, gauge: &Gauge) -> Result<DbarSample> {
    if !(step > 0.0) {
        return Err(Error::InvalidInput("step must be positive".into()));
    }
    let at = |w: c64| effective_function_matrix(p, w, gauge);
    let center = at(z)?;
    let pts = [z + step, z - step, z + I * step, z - I * step];
    let stencil: Vec<GrushinData> = pts.iter().map(|&w| at(w)).collect::<Result<_>>()?;
    for s in &stencil {
        check_overlap(&center, s)?;
    }
    let diff = |sel: &dyn Fn(&GrushinData) -> Vec<c64>| -> (Vec<c64>, Vec<c64>) {
        let (xp, xm, yp, ym) = (sel(&stencil[0]), sel(&stencil[1]), sel(&stencil[2]), sel(&stencil[3]));
        let dx: Vec<c64> = xp.iter().zip(&xm).map(|(a, b)| (a - b) / (2.0 * step)).collect();
        let dy: Vec<c64> = yp.iter().zip(&ym).map(|(a, b)| (a - b) / (2.0 * step)).collect();
        (dx, dy)
    };
    let (ex, ey) = diff(&|d| d.e0.clone());
    let (fx, fy) = diff(&|d| d.f0.clone());
    let (mx, my) = diff(&|d| vec![d.e_mp.unwrap()]);
    let dz_e0: Vec<c64> = ex.iter().zip(&ey).map(|(a, b)| 0.5 * (a - I * b)).collect();
    let dzbar_f0: Vec<c64> = fx.iter().zip(&fy).map(|(a, b)| 0.5 * (a + I * b)).collect();
    let dbar_e_mp = 0.5 * (mx[0] + I * my[0]);
    let f_plus = numerics::inner(&center.e_plus, &dz_e0);
    let f_minus: c64 = center.e_minus.iter().zip(&dzbar_f0).map(|(a, b)| a * b).sum();
    let f = f_plus + f_minus;
    let e_mp = center.e_mp.unwrap();
    let identity_residual = (dbar_e_mp + f * e_mp).norm();
    let scale = dbar_e_mp.norm().max((f * e_mp).norm());
    Ok(DbarSample { z, step, e_mp, dbar_e_mp, f_estimate: f, identity_residual, scale })
}

pub fn dbar_residual(op: &FourierOperator, z: c64, step: f64) -> Result<DbarSample> {
    let gauge = Gauge::frozen_at(op.matrix.as_ref(), z)?;
    dbar_residual_with(op.matrix.as_ref(), z, step, &gauge)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SymplecticDensity {
    /// `Re 4∂_z f` by differences of `f`.
    pub lhs: f64,
    /// `(2/h)(1/B₊ − 1/B₋)`.
    pub rhs: f64,
    pub bracket_plus: f64,
    pub bracket_minus: f64,
}

/// Compares `Re ΔF = Re 4∂_z f` with the density `(2/h)(1/B₊ − 1/B₋)`.
///
/// `step` is the outer difference step; each `f` uses an inner step
/// `step/10`. One gauge, frozen at `z`, serves every stencil point.
pub fn symplectic_density_check(op: &FourierOperator, symbol: &Symbol1D, z: c64, step: f64) -> Result<SymplecticDensity> {
    let g = symbol
        .first_order_potential()
        .ok_or_else(|| Error::InvalidInput("symplectic density needs a symbol of the form ξ + g".into()))?;
    let pts = [z, z + step, z - step, z + I * step, z - I * step];
    for &w in &pts {
        find_crossings(g, w)?;
    }
    let crossings = find_crossings(g, z)?;
    let p = op.matrix.as_ref();
    let gauge = Gauge::frozen_at(p, z)?;
    let inner = 0.1 * step;
    let f_at = |w: c64| dbar_residual_with(p, w, inner, &gauge).map(|s| s.f_estimate);
    let (fxp, fxm, fyp, fym) = (f_at(pts[1])?, f_at(pts[2])?, f_at(pts[3])?, f_at(pts[4])?);
    let fx = (fxp - fxm) / (2.0 * step);
    let fy = (fyp - fym) / (2.0 * step);
    let dz_f = 0.5 * (fx - I * fy);
    let lhs = (4.0 * dz_f).re;
    let (bp, bm) = (crossings.bracket_plus, crossings.bracket_minus);
    let rhs = 2.0 / op.h * (1.0 / bp - 1.0 / bm);
    Ok(SymplecticDensity { lhs, rhs, bracket_plus: bp, bracket_minus: bm })
}
