//! Periodic symbols on T*S¹ and their truncated Fourier quantization.

use std::f64::consts::PI;

use faer::Mat;
use num_complex::Complex64 as c64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::DenseMatrix;

const I: c64 = c64 { re: 0.0, im: 1.0 };
const BANDWIDTH_TOL: f64 = 1e-13;
const FLUSH_TOL: f64 = 1e-14;

/// Samples of a smooth 2π-periodic function on `2K+1` equispaced nodes
/// together with its (cached) discrete Fourier coefficients `c_{-K..K}`.
#[derive(Clone, Debug, PartialEq)]
pub struct PeriodicFunction {
    values: Vec<c64>,
    fourier: Vec<c64>,
}

impl PeriodicFunction {
    pub fn from_samples(values: Vec<c64>) -> Result<Self> {
        let n = values.len();
        if n == 0 || n % 2 == 0 {
            return Err(Error::InvalidInput(format!("grid size must be odd and positive, got {n}")));
        }
        let mut buf = values.clone();
        FftPlanner::new().plan_fft_forward(n).process(&mut buf);
        let k = (n / 2) as i64;
        let mut fourier: Vec<c64> = (-k..=k)
            .map(|m| buf[m.rem_euclid(n as i64) as usize] / n as f64)
            .collect();
        // Flush transform roundoff so that band structure is exact downstream.
        let scale = fourier.iter().map(|c| c.norm()).fold(0.0, f64::max);
        for c in fourier.iter_mut() {
            if c.norm() <= FLUSH_TOL * scale {
                *c = c64::new(0.0, 0.0);
            }
        }
        Ok(Self { values, fourier })
    }

    /// `coeffs[m + K]` is the coefficient of `e^{imx}`.
    pub fn from_fourier(coeffs: Vec<c64>) -> Result<Self> {
        let n = coeffs.len();
        if n == 0 || n % 2 == 0 {
            return Err(Error::InvalidInput(format!("coefficient list must have odd length, got {n}")));
        }
        let k = (n / 2) as i64;
        let mut buf = vec![c64::new(0.0, 0.0); n];
        for (idx, m) in (-k..=k).enumerate() {
            buf[m.rem_euclid(n as i64) as usize] = coeffs[idx];
        }
        FftPlanner::new().plan_fft_inverse(n).process(&mut buf);
        Ok(Self { values: buf, fourier: coeffs })
    }

    pub fn from_fn(k: usize, f: impl Fn(f64) -> c64) -> Self {
        let n = 2 * k + 1;
        let values = (0..n).map(|j| f(Self::node(j, n))).collect();
        Self::from_samples(values).expect("odd grid")
    }

    pub fn constant(value: c64, k: usize) -> Self {
        let mut coeffs = vec![c64::new(0.0, 0.0); 2 * k + 1];
        coeffs[k] = value;
        Self::from_fourier(coeffs).expect("odd grid")
    }

    pub fn node(j: usize, n: usize) -> f64 {
        2.0 * PI * j as f64 / n as f64
    }

    pub fn grid_size(&self) -> usize {
        self.values.len()
    }

    pub fn order(&self) -> usize {
        self.values.len() / 2
    }

    pub fn values(&self) -> &[c64] {
        &self.values
    }

    pub fn fourier(&self) -> &[c64] {
        &self.fourier
    }

    /// Coefficient of `e^{imx}`; zero outside the stored range.
    pub fn coeff(&self, m: i64) -> c64 {
        let k = self.order() as i64;
        if m.abs() > k {
            c64::new(0.0, 0.0)
        } else {
            self.fourier[(m + k) as usize]
        }
    }

    /// Trigonometric interpolation at an arbitrary point.
    pub fn eval(&self, x: f64) -> c64 {
        let k = self.order() as i64;
        let w = c64::from_polar(1.0, x);
        let mut p = c64::from_polar(1.0, -(k as f64) * x);
        let mut s = c64::new(0.0, 0.0);
        for c in &self.fourier {
            s += c * p;
            p *= w;
        }
        s
    }

    pub fn derivative(&self) -> Self {
        let k = self.order() as i64;
        let coeffs = (-k..=k).zip(&self.fourier).map(|(m, c)| I * m as f64 * c).collect();
        Self::from_fourier(coeffs).expect("odd grid")
    }

    /// Largest `|m|` whose coefficient is above roundoff relative to the
    /// largest coefficient.
    pub fn bandwidth(&self) -> usize {
        let scale = self.fourier.iter().map(|c| c.norm()).fold(0.0, f64::max);
        if scale == 0.0 {
            return 0;
        }
        let k = self.order() as i64;
        (-k..=k)
            .zip(&self.fourier)
            .filter(|(_, c)| c.norm() > BANDWIDTH_TOL * scale)
            .map(|(m, _)| m.unsigned_abs() as usize)
            .max()
            .unwrap_or(0)
    }

    /// Zero-padded or truncated copy on a `2k+1` grid.
    pub fn resampled(&self, k: usize) -> Self {
        let coeffs = (-(k as i64)..=k as i64).map(|m| self.coeff(m)).collect();
        Self::from_fourier(coeffs).expect("odd grid")
    }

    pub fn scaled_add(&self, a: c64, other: &Self, b: c64) -> Self {
        let k = self.order().max(other.order()) as i64;
        let coeffs = (-k..=k).map(|m| a * self.coeff(m) + b * other.coeff(m)).collect();
        Self::from_fourier(coeffs).expect("odd grid")
    }

    /// `∫₀^{2π} f dx`.
    pub fn integral(&self) -> c64 {
        2.0 * PI * self.coeff(0)
    }

    /// Maximum modulus on a refined grid (`8×` oversampled).
    pub fn max_abs(&self) -> f64 {
        let n = 8 * self.grid_size();
        (0..n)
            .map(|j| self.eval(2.0 * PI * j as f64 / n as f64).norm())
            .fold(0.0, f64::max)
    }
}

/// `p(x, ξ) = Σ_r c_r(x) ξ^r` with periodic coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct Symbol1D {
    coeffs: Vec<PeriodicFunction>,
    pub analytic_hint: bool,
}

impl Symbol1D {
    pub fn new(coeffs: Vec<PeriodicFunction>, analytic_hint: bool) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::InvalidInput("symbol needs at least one coefficient".into()));
        }
        let k = coeffs.iter().map(|c| c.order()).max().unwrap();
        let coeffs: Vec<_> = coeffs
            .into_iter()
            .map(|c| if c.order() == k { c } else { c.resampled(k) })
            .collect();
        let m = coeffs.len() - 1;
        if m >= 1 {
            let lead = &coeffs[m];
            let scale = lead.values().iter().map(|v| v.norm()).fold(0.0, f64::max);
            let floor = lead.values().iter().map(|v| v.norm()).fold(f64::INFINITY, f64::min);
            if !(floor > 1e-12 * scale.max(1e-300)) {
                return Err(Error::InvalidInput("leading coefficient vanishes on the grid".into()));
            }
        }
        Ok(Self { coeffs, analytic_hint })
    }

    /// `ξ + g(x)`.
    pub fn first_order(g: PeriodicFunction, analytic_hint: bool) -> Self {
        let one = PeriodicFunction::constant(c64::new(1.0, 0.0), g.order());
        Self::new(vec![g, one], analytic_hint).expect("unit leading coefficient")
    }

    /// `ξ + e^{ix}`.
    pub fn exp_ix() -> Self {
        Self::first_order(PeriodicFunction::from_fn(4, |x| c64::from_polar(1.0, x)), true)
    }

    /// `ξ + shift + i·amplitude·cos x`.
    pub fn shifted_cos(amplitude: f64, shift: f64) -> Self {
        let g = PeriodicFunction::from_fn(4, |x| c64::new(shift, amplitude * x.cos()));
        Self::first_order(g, true)
    }

    /// `ξ² + i·amplitude·cos x`.
    pub fn schrodinger_iv(amplitude: f64) -> Self {
        let k = 4;
        let v = PeriodicFunction::from_fn(k, |x| c64::new(0.0, amplitude * x.cos()));
        let zero = PeriodicFunction::constant(c64::new(0.0, 0.0), k);
        let one = PeriodicFunction::constant(c64::new(1.0, 0.0), k);
        Self::new(vec![v, zero, one], true).expect("unit leading coefficient")
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[PeriodicFunction] {
        &self.coeffs
    }

    pub fn grid_size(&self) -> usize {
        self.coeffs[0].grid_size()
    }

    pub fn bandwidth(&self) -> usize {
        self.coeffs.iter().map(|c| c.bandwidth()).max().unwrap_or(0)
    }

    /// `g` when the symbol has the form `ξ + g(x)`.
    pub fn first_order_potential(&self) -> Option<&PeriodicFunction> {
        if self.order() != 1 {
            return None;
        }
        let lead = &self.coeffs[1];
        let k = lead.order() as i64;
        let is_one = (-k..=k).all(|m| {
            let target = if m == 0 { 1.0 } else { 0.0 };
            (lead.coeff(m) - target).norm() < 1e-13
        });
        is_one.then(|| &self.coeffs[0])
    }

    pub fn linear_combination(a: c64, p: &Self, b: c64, q: &Self) -> Result<Self> {
        let m = p.order().max(q.order());
        let zero = PeriodicFunction::constant(c64::new(0.0, 0.0), 0);
        let coeffs = (0..=m)
            .map(|r| {
                let pr = p.coeffs.get(r).unwrap_or(&zero);
                let qr = q.coeffs.get(r).unwrap_or(&zero);
                pr.scaled_add(a, qr, b)
            })
            .collect();
        Self::new(coeffs, p.analytic_hint && q.analytic_hint)
    }

    pub fn eval(&self, x: f64, xi: f64) -> c64 {
        let mut s = c64::new(0.0, 0.0);
        let mut pw = 1.0;
        for c in &self.coeffs {
            s += c.eval(x) * pw;
            pw *= xi;
        }
        s
    }

    fn eval_with(coeff_values: &[c64], xi: f64) -> c64 {
        let mut s = c64::new(0.0, 0.0);
        for c in coeff_values.iter().rev() {
            s = s * xi + c;
        }
        s
    }

    /// `(1/i){p, p̄}(x, ξ) = (1/i)(∂_ξp ∂_x p̄ − ∂_x p ∂_ξ p̄)`.
    pub fn bracket(&self, x: f64, xi: f64) -> f64 {
        let mut p_xi = c64::new(0.0, 0.0);
        let mut p_x = c64::new(0.0, 0.0);
        let mut pw = 1.0;
        for (r, c) in self.coeffs.iter().enumerate() {
            p_x += c.derivative().eval(x) * pw;
            if r + 1 < self.coeffs.len() {
                p_xi += (r + 1) as f64 * self.coeffs[r + 1].eval(x) * pw;
            }
            pw *= xi;
        }
        let b = (p_xi * p_x.conj() - p_x * p_xi.conj()) / I;
        debug_assert!(b.im.abs() <= 1e-12 * (1.0 + b.re.abs()));
        b.re
    }
}

/// Free-function form of [`Symbol1D::eval`].
pub fn eval_symbol(symbol: &Symbol1D, x: f64, xi: f64) -> c64 {
    symbol.eval(x, xi)
}

/// Free-function form of [`Symbol1D::bracket`].
pub fn bracket(symbol: &Symbol1D, x: f64, xi: f64) -> f64 {
    symbol.bracket(x, xi)
}

/// Dense matrix of `Σ_r c_r(x)(hD)^r` in the basis `e^k = (2π)^{-1/2}e^{ikx}`,
/// `k = -K..K` (row/column `i` holds mode `i - K`).
#[derive(Clone, Debug)]
pub struct FourierOperator {
    pub h: f64,
    pub k: usize,
    pub matrix: DenseMatrix,
    pub symbol: Symbol1D,
}

impl FourierOperator {
    pub fn dim(&self) -> usize {
        2 * self.k + 1
    }

    pub fn mode(&self, index: usize) -> i64 {
        index as i64 - self.k as i64
    }

    pub fn frobenius(&self) -> f64 {
        self.matrix.norm_l2()
    }
}

pub fn assemble(symbol: &Symbol1D, h: f64, k: usize) -> Result<FourierOperator> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::InvalidInput(format!("h must be positive, got {h}")));
    }
    let bandwidth = symbol.bandwidth();
    if k < bandwidth.max(1) {
        return Err(Error::Truncation { k, bandwidth });
    }
    let n = 2 * k + 1;
    if n > crate::numerics::TOLERANCES.max_dim {
        return Err(Error::DimensionTooLarge { dim: n, max: crate::numerics::TOLERANCES.max_dim });
    }
    let kk = k as i64;
    let matrix = Mat::from_fn(n, n, |i, j| {
        let (mi, mj) = (i as i64 - kk, j as i64 - kk);
        let hk = h * mj as f64;
        let mut s = c64::new(0.0, 0.0);
        let mut pw = 1.0;
        for c in symbol.coeffs() {
            s += c.coeff(mi - mj) * pw;
            pw *= hk;
        }
        s
    });
    Ok(FourierOperator { h, k, matrix, symbol: symbol.clone() })
}

// ---------------------------------------------------------------------------
// regions

#[derive(Clone, Debug, PartialEq)]
pub enum RegionKind {
    /// `[a, b] + i[c, d]`.
    Rectangle { a: f64, b: f64, c: f64, d: f64 },
    /// Positively oriented simple polygon.
    Polygon(Vec<c64>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct RegionSpec {
    pub kind: RegionKind,
    pub boundary_tolerance: f64,
}

fn segments_cross(p1: c64, p2: c64, q1: c64, q2: c64) -> bool {
    let orient = |a: c64, b: c64, c: c64| ((b - a).conj() * (c - a)).im;
    let d1 = orient(q1, q2, p1);
    let d2 = orient(q1, q2, p2);
    let d3 = orient(p1, p2, q1);
    let d4 = orient(p1, p2, q2);
    (d1 * d2 < 0.0) && (d3 * d4 < 0.0)
}

fn segment_distance(z: c64, a: c64, b: c64) -> f64 {
    let d = b - a;
    let t = ((z - a) * d.conj()).re / d.norm_sqr();
    (z - (a + d * t.clamp(0.0, 1.0))).norm()
}

impl RegionSpec {
    pub fn rectangle(a: f64, b: f64, c: f64, d: f64) -> Result<Self> {
        if !(a < b && c < d) || ![a, b, c, d].iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidInput(format!("empty rectangle [{a},{b}]+i[{c},{d}]")));
        }
        Ok(Self { kind: RegionKind::Rectangle { a, b, c, d }, boundary_tolerance: 0.0 })
    }

    pub fn polygon(vertices: Vec<c64>) -> Result<Self> {
        let n = vertices.len();
        if n < 3 {
            return Err(Error::InvalidInput("polygon needs at least three vertices".into()));
        }
        let area = Self::signed_area(&vertices);
        if !(area > 0.0) {
            return Err(Error::InvalidInput("polygon must be positively oriented with nonempty interior".into()));
        }
        for i in 0..n {
            for j in i + 1..n {
                if (j + 1) % n == i || j == i + 1 {
                    continue;
                }
                if segments_cross(vertices[i], vertices[(i + 1) % n], vertices[j], vertices[(j + 1) % n]) {
                    return Err(Error::InvalidInput("polygon is self-intersecting".into()));
                }
            }
        }
        Ok(Self { kind: RegionKind::Polygon(vertices), boundary_tolerance: 0.0 })
    }

    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.boundary_tolerance = tol.max(0.0);
        self
    }

    fn signed_area(v: &[c64]) -> f64 {
        let n = v.len();
        0.5 * (0..n).map(|i| (v[i].conj() * v[(i + 1) % n]).im).sum::<f64>()
    }

    /// Vertices in positive orientation.
    pub fn vertices(&self) -> Vec<c64> {
        match &self.kind {
            RegionKind::Rectangle { a, b, c, d } => vec![
                c64::new(*a, *c),
                c64::new(*b, *c),
                c64::new(*b, *d),
                c64::new(*a, *d),
            ],
            RegionKind::Polygon(v) => v.clone(),
        }
    }

    pub fn area(&self) -> f64 {
        Self::signed_area(&self.vertices())
    }

    pub fn perimeter(&self) -> f64 {
        let v = self.vertices();
        (0..v.len()).map(|i| (v[(i + 1) % v.len()] - v[i]).norm()).sum()
    }

    /// Open-set membership (points on the boundary are outside).
    pub fn contains(&self, z: c64) -> bool {
        match &self.kind {
            RegionKind::Rectangle { a, b, c, d } => z.re > *a && z.re < *b && z.im > *c && z.im < *d,
            RegionKind::Polygon(v) => {
                let n = v.len();
                let mut winding = 0i32;
                for i in 0..n {
                    let (p, q) = (v[i], v[(i + 1) % n]);
                    let cross = ((q - p).conj() * (z - p)).im;
                    if p.im <= z.im {
                        if q.im > z.im && cross > 0.0 {
                            winding += 1;
                        }
                    } else if q.im <= z.im && cross < 0.0 {
                        winding -= 1;
                    }
                }
                winding != 0 && self.distance_to_boundary(z) > 0.0
            }
        }
    }

    pub fn distance_to_boundary(&self, z: c64) -> f64 {
        let v = self.vertices();
        let n = v.len();
        (0..n).map(|i| segment_distance(z, v[i], v[(i + 1) % n])).fold(f64::INFINITY, f64::min)
    }

    /// Inside and farther than `boundary_tolerance` from the boundary.
    pub fn strictly_inside(&self, z: c64) -> bool {
        self.contains(z) && self.distance_to_boundary(z) > self.boundary_tolerance
    }

    /// Within `boundary_tolerance` of the boundary (either side).
    pub fn in_ring(&self, z: c64) -> bool {
        self.boundary_tolerance > 0.0 && self.distance_to_boundary(z) <= self.boundary_tolerance
    }

    pub fn max_abs(&self) -> f64 {
        self.vertices().iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn bounding_box(&self) -> (f64, f64, f64, f64) {
        let v = self.vertices();
        let fold = |f: fn(&c64) -> f64, init: f64, op: fn(f64, f64) -> f64| v.iter().map(f).fold(init, op);
        (
            fold(|z| z.re, f64::INFINITY, f64::min),
            fold(|z| z.re, f64::NEG_INFINITY, f64::max),
            fold(|z| z.im, f64::INFINITY, f64::min),
            fold(|z| z.im, f64::NEG_INFINITY, f64::max),
        )
    }

    /// Closed boundary polyline with spacing at most `spacing`, positively
    /// oriented, first point not repeated.
    pub fn boundary_points(&self, spacing: f64) -> Vec<c64> {
        let v = self.vertices();
        let n = v.len();
        let mut out = Vec::new();
        for i in 0..n {
            let (p, q) = (v[i], v[(i + 1) % n]);
            let m = ((q - p).norm() / spacing).ceil().max(1.0) as usize;
            for s in 0..m {
                out.push(p + (q - p) * (s as f64 / m as f64));
            }
        }
        out
    }
}

// ---------------------------------------------------------------------------
// phase-space volume

/// Measure of `{(x, ξ) ∈ [0,2π)×[−ξ_cut, ξ_cut] : p(x, ξ) ∈ Γ}`.
///
/// Midpoint rule on a tensor grid; cells whose corners and center disagree
/// about membership are resolved by 4×4 subsampling.
pub fn weyl_volume(symbol: &Symbol1D, region: &RegionSpec, xi_cut: Option<f64>, resolution: usize) -> Result<f64> {
    if resolution < 2 {
        return Err(Error::InvalidInput("resolution must be at least 2".into()));
    }
    let xi_cut = match xi_cut {
        Some(v) => v,
        None => default_xi_cut(symbol, region),
    };
    if !(xi_cut > 0.0) {
        return Err(Error::InvalidInput("xi_cut must be positive".into()));
    }
    let nx = resolution;
    let dx = 2.0 * PI / nx as f64;
    let nxi = ((2.0 * xi_cut / dx).ceil() as usize).max(2);
    let dxi = 2.0 * xi_cut / nxi as f64;
    const SUB: usize = 4;

    let columns: Vec<(f64, bool)> = (0..nx)
        .into_par_iter()
        .map(|i| {
            let x0 = i as f64 * dx;
            let coeffs_at = |x: f64| symbol.coeffs().iter().map(|c| c.eval(x)).collect::<Vec<_>>();
            let left = coeffs_at(x0);
            let right = coeffs_at(x0 + dx);
            let mid = coeffs_at(x0 + 0.5 * dx);
            let subs: Vec<Vec<c64>> = (0..SUB).map(|s| coeffs_at(x0 + (s as f64 + 0.5) * dx / SUB as f64)).collect();
            let inside = |c: &[c64], xi: f64| region.contains(Symbol1D::eval_with(c, xi));
            let mut total = 0.0;
            let mut edge_hit = false;
            let mut lower = (inside(&left, -xi_cut), inside(&right, -xi_cut));
            for r in 0..nxi {
                let xi0 = -xi_cut + r as f64 * dxi;
                let xi1 = xi0 + dxi;
                let upper = (inside(&left, xi1), inside(&right, xi1));
                let center = inside(&mid, xi0 + 0.5 * dxi);
                let uniform = [lower.0, lower.1, upper.0, upper.1].iter().all(|&b| b == center);
                let frac = if uniform {
                    if center { 1.0 } else { 0.0 }
                } else {
                    let mut hits = 0usize;
                    for cs in &subs {
                        for t in 0..SUB {
                            if inside(cs, xi0 + (t as f64 + 0.5) * dxi / SUB as f64) {
                                hits += 1;
                            }
                        }
                    }
                    hits as f64 / (SUB * SUB) as f64
                };
                if (r == 0 || r + 1 == nxi) && (frac > 0.0 || center || lower.0 || upper.0) {
                    edge_hit = true;
                }
                total += frac;
                lower = upper;
            }
            (total * dx * dxi, edge_hit)
        })
        .collect();
    if columns.iter().any(|c| c.1) {
        return Err(Error::XiCutoff { xi_cut });
    }
    // fixed summation order keeps the result independent of the thread count
    Ok(columns.iter().map(|c| c.0).sum())
}

/// `2·(max|Γ| + max_x Σ|c_k(x)|)`.
pub fn default_xi_cut(symbol: &Symbol1D, region: &RegionSpec) -> f64 {
    let n = 8 * symbol.grid_size();
    let coeff_max = (0..n)
        .map(|j| {
            let x = 2.0 * PI * j as f64 / n as f64;
            symbol.coeffs().iter().map(|c| c.eval(x).norm()).sum::<f64>()
        })
        .fold(0.0, f64::max);
    2.0 * (region.max_abs() + coeff_max)
}

// ---------------------------------------------------------------------------
// configuration

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoeffSpec {
    /// Coefficients of `e^{imx}` for `m = -B..B`, as `[re, im]` pairs.
    pub fourier: Vec<[f64; 2]>,
}

/// Structured description of a symbol: a named built-in or explicit Fourier
/// coefficient lists per power of ξ.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SymbolSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub builtin: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amplitude: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shift: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order: Option<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub coeff: Vec<CoeffSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub analytic: Option<bool>,
}

impl Default for SymbolSpec {
    fn default() -> Self {
        Self {
            builtin: Some("exp_ix".into()),
            amplitude: None,
            shift: None,
            order: None,
            coeff: Vec::new(),
            analytic: None,
        }
    }
}

impl SymbolSpec {
    pub fn build(&self) -> Result<Symbol1D> {
        match (&self.builtin, self.coeff.is_empty()) {
            (Some(_), false) => Err(Error::InvalidInput("symbol: give either builtin or coeff, not both".into())),
            (Some(name), true) => {
                let amp = self.amplitude.unwrap_or(1.0);
                let shift = self.shift.unwrap_or(0.0);
                match name.as_str() {
                    "exp_ix" => Ok(Symbol1D::exp_ix()),
                    "shifted_cos" => Ok(Symbol1D::shifted_cos(amp, shift)),
                    "schrodinger_iv" => Ok(Symbol1D::schrodinger_iv(amp)),
                    other => Err(Error::InvalidInput(format!("symbol.builtin: unknown symbol '{other}'"))),
                }
            }
            (None, true) => Err(Error::InvalidInput("symbol: missing builtin or coeff".into())),
            (None, false) => {
                if let Some(order) = self.order {
                    if order + 1 != self.coeff.len() {
                        return Err(Error::InvalidInput(format!(
                            "symbol.order = {order} but {} coefficient lists given",
                            self.coeff.len()
                        )));
                    }
                }
                let funcs = self
                    .coeff
                    .iter()
                    .enumerate()
                    .map(|(r, c)| {
                        let list = c.fourier.iter().map(|p| c64::new(p[0], p[1])).collect();
                        PeriodicFunction::from_fourier(list)
                            .map_err(|e| Error::InvalidInput(format!("symbol.coeff[{r}].fourier: {e}")))
                    })
                    .collect::<Result<Vec<_>>>()?;
                Symbol1D::new(funcs, self.analytic.unwrap_or(true))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionConfig {
    /// `"rectangle"` or `"polygon"`.
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<[f64; 4]>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub vertices: Vec<[f64; 2]>,
    #[serde(default)]
    pub boundary_tolerance: f64,
}

impl RegionConfig {
    pub fn rectangle(a: f64, b: f64, c: f64, d: f64) -> Self {
        Self { kind: "rectangle".into(), bounds: Some([a, b, c, d]), vertices: Vec::new(), boundary_tolerance: 0.0 }
    }

    pub fn build(&self) -> Result<RegionSpec> {
        let region = match self.kind.as_str() {
            "rectangle" => {
                let [a, b, c, d] = self
                    .bounds
                    .ok_or_else(|| Error::InvalidInput("region.bounds required for a rectangle".into()))?;
                RegionSpec::rectangle(a, b, c, d)?
            }
            "polygon" => RegionSpec::polygon(self.vertices.iter().map(|p| c64::new(p[0], p[1])).collect())?,
            other => return Err(Error::InvalidInput(format!("region.kind: unknown kind '{other}'"))),
        };
        Ok(region.with_tolerance(self.boundary_tolerance))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: c64, b: c64, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    #[test]
    fn round_trip_and_nodes() {
        let f = PeriodicFunction::from_fn(6, |x| c64::new(x.sin().exp(), (2.0 * x).cos()));
        let g = PeriodicFunction::from_fourier(f.fourier().to_vec()).unwrap();
        for (a, b) in f.values().iter().zip(g.values()) {
            assert!(close(*a, *b, 1e-12 * a.norm().max(1.0)));
        }
        assert!((PeriodicFunction::node(3, 13) - 6.0 * PI / 13.0).abs() < 1e-15);
        assert!(PeriodicFunction::from_samples(vec![c64::new(1.0, 0.0); 4]).is_err());
    }

    #[test]
    fn exp_ix_coefficients_and_derivative() {
        let g = Symbol1D::exp_ix();
        let c0 = &g.coeffs()[0];
        assert!(close(c0.coeff(1), c64::new(1.0, 0.0), 1e-14));
        assert_eq!(c0.bandwidth(), 1);
        let d = c0.derivative();
        for x in [0.0, 0.7, 2.0] {
            assert!(close(d.eval(x), I * c64::from_polar(1.0, x), 1e-13));
        }
        assert!(g.first_order_potential().is_some());
        assert!(Symbol1D::schrodinger_iv(1.0).first_order_potential().is_none());
    }

    #[test]
    fn eval_examples() {
        let p = Symbol1D::exp_ix();
        assert!(close(eval_symbol(&p, 0.0, 1.0), c64::new(2.0, 0.0), 1e-13));
        assert!(close(eval_symbol(&p, PI / 2.0, 0.0), I, 1e-13));
        let s = PeriodicFunction::from_fn(3, |x| c64::new(0.0, x.sin()));
        let z = PeriodicFunction::constant(c64::new(0.0, 0.0), 3);
        let one = PeriodicFunction::constant(c64::new(1.0, 0.0), 3);
        let q = Symbol1D::new(vec![s, z, one], true).unwrap();
        assert!(close(eval_symbol(&q, PI / 2.0, 2.0), c64::new(4.0, 1.0), 1e-13));
    }

    #[test]
    fn bracket_examples() {
        let p = Symbol1D::exp_ix();
        assert!((bracket(&p, PI, 0.3) - 2.0).abs() < 1e-12);
        // finite-difference cross-check of −2 cos x
        for x in [0.2, 1.3, 4.0] {
            let hstep = 1e-5;
            let px = (p.eval(x + hstep, 0.0) - p.eval(x - hstep, 0.0)) / (2.0 * hstep);
            let fd = 2.0 * (px.conj()).im;
            assert!((bracket(&p, x, 0.0) - fd).abs() < 1e-8);
            assert!((bracket(&p, x, 0.0) + 2.0 * x.cos()).abs() < 1e-12);
        }
        let s = Symbol1D::schrodinger_iv(0.7);
        for (x, xi) in [(0.3, 1.2), (2.0, -0.5)] {
            // V = 0.7 cos x
            let expected = -4.0 * xi * (-0.7 * f64::sin(x));
            assert!((bracket(&s, x, xi) - expected).abs() < 1e-12);
        }
        let real = Symbol1D::shifted_cos(0.0, 0.4);
        assert!(bracket(&real, 1.0, 2.0).abs() < 1e-14);
    }

    #[test]
    fn bracket_sign_change_between_crossings() {
        let p = Symbol1D::exp_ix();
        // x₊ = 5π/6, x₋ = π/6 for Im z = 1/2
        assert!(bracket(&p, 5.0 * PI / 6.0, 0.0) > 0.0);
        assert!(bracket(&p, PI / 6.0, 0.0) < 0.0);
    }

    #[test]
    fn assemble_examples() {
        let h = 0.1;
        let k = 6;
        let c = c64::new(0.3, -0.2);
        let p = Symbol1D::first_order(PeriodicFunction::constant(c, 2), true);
        let op = assemble(&p, h, k).unwrap();
        for i in 0..op.dim() {
            for j in 0..op.dim() {
                let expected = if i == j { c + h * op.mode(i) as f64 } else { c64::new(0.0, 0.0) };
                assert!(close(op.matrix[(i, j)], expected, 1e-15));
            }
        }
        let op = assemble(&Symbol1D::exp_ix(), h, k).unwrap();
        for i in 0..op.dim() {
            for j in 0..op.dim() {
                let mut expected = c64::new(0.0, 0.0);
                if i == j {
                    expected += h * op.mode(j) as f64;
                }
                if i == j + 1 {
                    expected += 1.0;
                }
                assert!(close(op.matrix[(i, j)], expected, 1e-14));
            }
        }
        let one = PeriodicFunction::constant(c64::new(1.0, 0.0), 1);
        let zero = PeriodicFunction::constant(c64::new(0.0, 0.0), 1);
        let sq = Symbol1D::new(vec![zero.clone(), zero, one], true).unwrap();
        let op = assemble(&sq, h, k).unwrap();
        for i in 0..op.dim() {
            let hk = h * op.mode(i) as f64;
            assert!(close(op.matrix[(i, i)], c64::new(hk * hk, 0.0), 1e-15));
        }
    }

    #[test]
    fn assemble_truncation_error() {
        let g = PeriodicFunction::from_fn(8, |x| c64::from_polar(1.0, 5.0 * x));
        let p = Symbol1D::first_order(g, true);
        assert!(matches!(assemble(&p, 0.1, 4), Err(Error::Truncation { k: 4, bandwidth: 5 })));
        assert!(assemble(&p, 0.1, 5).is_ok());
    }

    #[test]
    fn assemble_matches_quadrature_and_pointwise_action() {
        let g = PeriodicFunction::from_fn(5, |x| c64::new((x).cos() * 0.5, (2.0 * x).sin()).exp());
        let sym = Symbol1D::new(
            vec![
                PeriodicFunction::from_fn(5, |x| c64::new(0.0, x.cos())),
                g.clone(),
                PeriodicFunction::constant(c64::new(1.0, 0.0), 5),
            ],
            true,
        )
        .unwrap();
        let h = 0.2;
        let k = 12;
        let op = assemble(&sym, h, k).unwrap();
        // quadrature oracle for Fourier coefficients
        let quad = |f: &PeriodicFunction, m: i64| {
            let n = 256;
            (0..n)
                .map(|j| {
                    let x = 2.0 * PI * j as f64 / n as f64;
                    f.eval(x) * c64::from_polar(1.0, -(m as f64) * x)
                })
                .sum::<c64>()
                / n as f64
        };
        for (jm, km) in [(0i64, 0i64), (2, -1), (-3, 1), (4, 4)] {
            let mut expected = c64::new(0.0, 0.0);
            for (r, c) in sym.coeffs().iter().enumerate() {
                expected += quad(c, jm - km) * (h * km as f64).powi(r as i32);
            }
            let got = op.matrix[((jm + k as i64) as usize, (km + k as i64) as usize)];
            assert!(close(got, expected, 1e-11), "{jm},{km}");
        }
        // pointwise action on a trigonometric polynomial of degree ≤ K − bandwidth
        let deg = k as i64 - sym.bandwidth() as i64;
        let u: Vec<c64> = (-(k as i64)..=k as i64)
            .map(|m| if m.abs() <= deg { c64::new(1.0 / (1 + m * m) as f64, 0.1 * m as f64) } else { c64::new(0.0, 0.0) })
            .collect();
        let mu = crate::numerics::mat_vec(op.matrix.as_ref(), &u);
        let norm = (2.0 * PI).sqrt();
        for x in [0.1, 1.7, 3.3, 5.9] {
            let lhs: c64 = (-(k as i64)..=k as i64).zip(&mu).map(|(m, c)| c * c64::from_polar(1.0, m as f64 * x)).sum::<c64>() / norm;
            let mut rhs = c64::new(0.0, 0.0);
            for (m, c) in (-(k as i64)..=k as i64).zip(&u) {
                let e = c64::from_polar(1.0, m as f64 * x) / norm;
                for (r, cr) in sym.coeffs().iter().enumerate() {
                    rhs += cr.eval(x) * (h * m as f64).powi(r as i32) * c * e;
                }
            }
            assert!(close(lhs, rhs, 1e-10 * rhs.norm().max(1.0)));
        }
    }

    #[test]
    fn weyl_volume_examples() {
        let p = Symbol1D::exp_ix();
        let gamma = RegionSpec::rectangle(-1.0, 1.0, -0.5, 0.5).unwrap();
        let v = weyl_volume(&p, &gamma, None, 1600).unwrap();
        assert!((v - 4.0 * PI / 3.0).abs() < 3e-3, "{v}");
        let far = RegionSpec::rectangle(-1.0, 1.0, 3.0, 4.0).unwrap();
        assert_eq!(weyl_volume(&p, &far, None, 50).unwrap(), 0.0);
        let flat = Symbol1D::first_order(PeriodicFunction::constant(c64::new(0.0, 0.0), 1), true);
        let strip = RegionSpec::rectangle(0.0, 1.0, -1.0, 1.0).unwrap();
        let v = weyl_volume(&flat, &strip, None, 800).unwrap();
        assert!((v - 2.0 * PI).abs() < 1e-2, "{v}");
        assert!(matches!(weyl_volume(&p, &gamma, Some(1.5), 50), Err(Error::XiCutoff { .. })));
    }

    #[test]
    fn weyl_volume_converges() {
        let p = Symbol1D::exp_ix();
        let gamma = RegionSpec::rectangle(-1.0, 1.0, -0.5, 0.5).unwrap();
        let exact = 4.0 * PI / 3.0;
        for res in [100, 200, 400, 800] {
            let err = (weyl_volume(&p, &gamma, None, res).unwrap() - exact).abs();
            assert!(err * res as f64 <= 5.0, "{res}: {err}");
        }
    }

    #[test]
    fn region_geometry() {
        let sq = RegionSpec::rectangle(0.0, 1.0, 0.0, 1.0).unwrap();
        assert!(sq.contains(c64::new(0.5, 0.5)));
        assert!(!sq.contains(c64::new(1.0, 0.5)));
        assert!((sq.area() - 1.0).abs() < 1e-15);
        let tri = RegionSpec::polygon(vec![c64::new(0.0, 0.0), c64::new(1.0, 0.0), c64::new(0.0, 1.0)]).unwrap();
        assert!(tri.contains(c64::new(0.2, 0.2)));
        assert!(!tri.contains(c64::new(0.6, 0.6)));
        assert!(RegionSpec::polygon(vec![c64::new(0.0, 0.0), c64::new(0.0, 1.0), c64::new(1.0, 0.0)]).is_err());
        let bowtie = vec![c64::new(0.0, 0.0), c64::new(1.0, 1.0), c64::new(1.0, 0.0), c64::new(0.0, 1.0)];
        assert!(RegionSpec::polygon(bowtie).is_err());
        let ring = sq.clone().with_tolerance(0.1);
        assert!(ring.in_ring(c64::new(0.05, 0.5)) && !ring.strictly_inside(c64::new(0.05, 0.5)));
        let pts = sq.boundary_points(0.1);
        assert_eq!(pts.len(), 40);
    }

    #[test]
    fn specs_build() {
        let s = SymbolSpec {
            builtin: Some("shifted_cos".into()),
            amplitude: Some(0.5),
            shift: Some(0.1),
            ..SymbolSpec::default()
        };
        let p = s.build().unwrap();
        assert!(close(p.eval(0.0, 0.0), c64::new(0.1, 0.5), 1e-13));
        let explicit = SymbolSpec {
            builtin: None,
            order: Some(1),
            coeff: vec![
                CoeffSpec { fourier: vec![[0.0, 0.0], [0.0, 0.0], [1.0, 0.0]] },
                CoeffSpec { fourier: vec![[1.0, 0.0]] },
            ],
            ..SymbolSpec::default()
        };
        let q = explicit.build().unwrap();
        assert!(close(q.eval(0.4, 0.3), 0.3 + c64::from_polar(1.0, 0.4), 1e-13));
        let bad = SymbolSpec { builtin: Some("nope".into()), ..SymbolSpec::default() };
        assert!(bad.build().is_err());
    }

    proptest! {
        #[test]
        fn assembly_is_linear(a in -2.0f64..2.0, b in -2.0f64..2.0, s in -1.0f64..1.0) {
            let p = Symbol1D::exp_ix();
            let q = Symbol1D::shifted_cos(0.7, s);
            let (ca, cb) = (c64::new(a, 0.3), c64::new(b, -0.1));
            let combo = Symbol1D::linear_combination(ca, &p, cb, &q).unwrap();
            let (h, k) = (0.1, 5);
            let lhs = assemble(&combo, h, k).unwrap();
            let mp = assemble(&p, h, k).unwrap();
            let mq = assemble(&q, h, k).unwrap();
            for i in 0..lhs.dim() {
                for j in 0..lhs.dim() {
                    let rhs = ca * mp.matrix[(i, j)] + cb * mq.matrix[(i, j)];
                    prop_assert!((lhs.matrix[(i, j)] - rhs).norm() <= 1e-14 * (1.0 + rhs.norm()));
                }
            }
        }

        #[test]
        fn banded_assembly(b in 1usize..4) {
            let g = PeriodicFunction::from_fn(6, |x| c64::new((b as f64 * x).cos(), 0.5 * x.sin()));
            let op = assemble(&Symbol1D::first_order(g, true), 0.1, 8).unwrap();
            for i in 0..op.dim() {
                for j in 0..op.dim() {
                    if (i as i64 - j as i64).unsigned_abs() as usize > b {
                        prop_assert!(op.matrix[(i, j)].norm() < 1e-14);
                    }
                }
            }
        }

        #[test]
        fn volume_is_monotone(shrink in 0.05f64..0.45) {
            let p = Symbol1D::exp_ix();
            let big = RegionSpec::rectangle(-1.0, 1.0, -0.5, 0.5).unwrap();
            let small = RegionSpec::rectangle(-1.0 + shrink, 1.0 - shrink, -0.5 + shrink, 0.5 - shrink).unwrap();
            let vb = weyl_volume(&p, &big, Some(6.0), 60).unwrap();
            let vs = weyl_volume(&p, &small, Some(6.0), 60).unwrap();
            prop_assert!(vs <= vb);
        }
    }
}
