//! Zero counting for holomorphic functions: argument principle by phase
//! unwrapping, Jensen bounds, and the counting estimate
//! `#zeros ≈ (1/2πh)∫_Γ Δφ` for functions of exponential type `φ/h`.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64 as c64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::symbol::RegionSpec;

/// Something that can be sampled as a holomorphic function of `z`.
pub trait HolomorphicSampler: Sync {
    fn sample(&self, z: c64) -> Result<c64>;
}

impl<F: Fn(c64) -> c64 + Sync> HolomorphicSampler for F {
    fn sample(&self, z: c64) -> Result<c64> {
        Ok(self(z))
    }
}

/// Adapter for samplers whose evaluation can fail.
pub struct Fallible<F>(pub F);

impl<F: Fn(c64) -> Result<c64> + Sync> HolomorphicSampler for Fallible<F> {
    fn sample(&self, z: c64) -> Result<c64> {
        (self.0)(z)
    }
}

/// Largest relative Cauchy–Riemann defect `|∂_z̄ f|/max(|∂_z f|, |f|)` over
/// the given points, by centered differences.
pub fn cauchy_riemann_defect<F: HolomorphicSampler + ?Sized>(f: &F, points: &[c64], step: f64) -> Result<f64> {
    let mut worst = 0.0f64;
    for &z in points {
        let fx = (f.sample(z + step)? - f.sample(z - step)?) / (2.0 * step);
        let fy = (f.sample(z + c64::new(0.0, step))? - f.sample(z - c64::new(0.0, step))?) / (2.0 * step);
        let dz = 0.5 * (fx - c64::new(0.0, 1.0) * fy);
        let dzbar = 0.5 * (fx + c64::new(0.0, 1.0) * fy);
        let scale = dz.norm().max(f.sample(z)?.norm()).max(f64::MIN_POSITIVE);
        worst = worst.max(dzbar.norm() / scale);
    }
    Ok(worst)
}

/// Closed polygonal contour; the last node connects back to the first.
#[derive(Clone, Debug, PartialEq)]
pub struct ContourSpec {
    pub nodes: Vec<c64>,
    /// Maximum bisection depth per segment.
    pub refinement_limit: usize,
    pub min_modulus_guard: f64,
}

impl ContourSpec {
    pub fn new(nodes: Vec<c64>) -> Self {
        Self { nodes, refinement_limit: 24, min_modulus_guard: 1e-250 }
    }

    pub fn circle(center: c64, radius: f64, n: usize) -> Self {
        Self::new((0..n).map(|k| center + c64::from_polar(radius, 2.0 * PI * k as f64 / n as f64)).collect())
    }

    /// Boundary of `[a, b] + i[c, d]` with `n` nodes per side.
    pub fn rectangle(a: f64, b: f64, c: f64, d: f64, n: usize) -> Self {
        let corners = [c64::new(a, c), c64::new(b, c), c64::new(b, d), c64::new(a, d)];
        let mut nodes = Vec::with_capacity(4 * n);
        for s in 0..4 {
            let (p, q) = (corners[s], corners[(s + 1) % 4]);
            nodes.extend((0..n).map(|t| p + (q - p) * (t as f64 / n as f64)));
        }
        Self::new(nodes)
    }

    pub fn from_region(region: &RegionSpec, spacing: f64) -> Self {
        Self::new(region.boundary_points(spacing))
    }

    /// Every segment split in two.
    pub fn refined(&self) -> Self {
        let n = self.nodes.len();
        let mut nodes = Vec::with_capacity(2 * n);
        for i in 0..n {
            nodes.push(self.nodes[i]);
            nodes.push(0.5 * (self.nodes[i] + self.nodes[(i + 1) % n]));
        }
        Self { nodes, ..self.clone() }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct WeylCompare {
    /// `(1/2πh)∫_Γ Δφ`.
    pub mass: f64,
    /// `C_cal·√ε/h`.
    pub bound: f64,
    pub deviation: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ZeroCountReport {
    pub count: i64,
    /// Total phase change divided by `2π`, before rounding.
    pub winding_total: f64,
    /// Extra samples inserted by refinement.
    pub refinement_used: usize,
    pub weyl_compare: Option<WeylCompare>,
    pub flags: Vec<String>,
}

impl ZeroCountReport {
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "count,winding,mass,bound,deviation,flags")?;
        let (m, b, d) = match &self.weyl_compare {
            Some(c) => (c.mass, c.bound, c.deviation),
            None => (f64::NAN, f64::NAN, f64::NAN),
        };
        writeln!(w, "{},{:e},{:e},{:e},{:e},{}", self.count, self.winding_total, m, b, d, self.flags.join(";"))
    }
}

fn guarded<F: HolomorphicSampler + ?Sized>(f: &F, z: c64, guard: f64) -> Result<c64> {
    let v = f.sample(z)?;
    if !(v.norm() >= guard) || !v.re.is_finite() || !v.im.is_finite() {
        return Err(Error::ZeroOnContour { z, modulus: v.norm() });
    }
    Ok(v)
}

/// Phase change along one segment, bisecting while a step exceeds π/2.
fn segment_phase<F: HolomorphicSampler + ?Sized>(
    f: &F,
    za: c64,
    fa: c64,
    zb: c64,
    fb: c64,
    depth: usize,
    spec: &ContourSpec,
) -> Result<(f64, usize)> {
    let d = (fb / fa).arg();
    if d.abs() < 0.5 * PI {
        return Ok((d, 0));
    }
    if depth >= spec.refinement_limit {
        return Err(Error::RefinementLimit { limit: spec.refinement_limit });
    }
    let zm = 0.5 * (za + zb);
    let fm = guarded(f, zm, spec.min_modulus_guard)?;
    let (d1, r1) = segment_phase(f, za, fa, zm, fm, depth + 1, spec)?;
    let (d2, r2) = segment_phase(f, zm, fm, zb, fb, depth + 1, spec)?;
    Ok((d1 + d2, r1 + r2 + 1))
}

/// Number of zeros enclosed by a positively oriented contour.
pub fn argument_count<F: HolomorphicSampler + ?Sized>(f: &F, contour: &ContourSpec) -> Result<ZeroCountReport> {
    let n = contour.nodes.len();
    if n < 3 {
        return Err(Error::InvalidInput("contour needs at least three nodes".into()));
    }
    let values: Vec<c64> = contour
        .nodes
        .par_iter()
        .map(|&z| guarded(f, z, contour.min_modulus_guard))
        .collect::<Result<_>>()?;
    let pieces: Vec<(f64, usize)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let j = (i + 1) % n;
            segment_phase(f, contour.nodes[i], values[i], contour.nodes[j], values[j], 0, contour)
        })
        .collect::<Result<_>>()?;
    // sequential, fixed-order reduction
    let total: f64 = pieces.iter().map(|p| p.0).sum();
    let refinement_used = pieces.iter().map(|p| p.1).sum();
    let winding_total = total / (2.0 * PI);
    let count = winding_total.round() as i64;
    if (winding_total - count as f64).abs() > 0.1 {
        return Err(Error::RefinementLimit { limit: contour.refinement_limit });
    }
    Ok(ZeroCountReport { count, winding_total, refinement_used, weyl_compare: None, flags: Vec::new() })
}

/// `(ln M − ln|f(z0)|)/ln(R/r)`, an upper bound for the number of zeros in
/// `|z − z0| ≤ r`. `M` is sampled on `|z − z0| = R` when not supplied.
pub fn jensen_bound<F: HolomorphicSampler + ?Sized>(f: &F, z0: c64, r: f64, big_r: f64, m: Option<f64>) -> Result<f64> {
    if !(0.0 < r && r < big_r) {
        return Err(Error::InvalidInput(format!("need 0 < r < R, got r = {r}, R = {big_r}")));
    }
    let f0 = f.sample(z0)?.norm();
    if f0 == 0.0 {
        return Err(Error::InvalidInput("f(z0) = 0: Jensen bound undefined".into()));
    }
    let m = match m {
        Some(m) => m,
        None => {
            let samples: Vec<f64> = (0..2048)
                .into_par_iter()
                .map(|k| f.sample(z0 + c64::from_polar(big_r, 2.0 * PI * k as f64 / 2048.0)).map(|v| v.norm()))
                .collect::<Result<_>>()?;
            samples.into_iter().fold(0.0, f64::max)
        }
    };
    Ok(((m.ln() - f0.ln()) / (big_r / r).ln()).max(0.0))
}

/// `∮_{∂Γ} ∂_nφ |dz|` through the given closed boundary polyline, with
/// centered normal differences at `step`.
pub fn boundary_flux(phi: &(dyn Fn(c64) -> f64 + Sync), boundary: &[c64], step: f64) -> f64 {
    let n = boundary.len();
    let terms: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let (a, b) = (boundary[i], boundary[(i + 1) % n]);
            let len = (b - a).norm();
            if len == 0.0 {
                return 0.0;
            }
            let normal = (b - a) / len * c64::new(0.0, -1.0);
            // two-point Gauss rule on the segment
            let g = 0.5 / 3f64.sqrt();
            [0.5 - g, 0.5 + g]
                .iter()
                .map(|&t| {
                    let m = a + (b - a) * t;
                    0.5 * len * (phi(m + normal * step) - phi(m - normal * step)) / (2.0 * step)
                })
                .sum()
        })
        .collect();
    terms.iter().sum()
}

/// `∫_Γ Δφ` by the five-point Laplacian at cell centers (cross-check of the
/// boundary flux).
pub fn delta_phi_mass(phi: &(dyn Fn(c64) -> f64 + Sync), region: &RegionSpec, resolution: usize) -> f64 {
    let (a, b, c, d) = region.bounding_box();
    let nx = resolution.max(2);
    let dx = (b - a) / nx as f64;
    let ny = (((d - c) / dx).ceil() as usize).max(2);
    let dy = (d - c) / ny as f64;
    let s = dx.min(dy);
    let rows: Vec<f64> = (0..ny)
        .into_par_iter()
        .map(|j| {
            let mut acc = 0.0;
            for i in 0..nx {
                let z = c64::new(a + (i as f64 + 0.5) * dx, c + (j as f64 + 0.5) * dy);
                if !region.contains(z) {
                    continue;
                }
                let lap = (phi(z + s) + phi(z - s) + phi(z + c64::new(0.0, s)) + phi(z - c64::new(0.0, s)) - 4.0 * phi(z)) / (s * s);
                acc += lap * dx * dy;
            }
            acc
        })
        .collect();
    rows.iter().sum()
}

/// Inputs of the counting verification beyond the function itself.
pub struct HagerInput<'a> {
    pub phi: &'a (dyn Fn(c64) -> f64 + Sync),
    pub region: &'a RegionSpec,
    pub h: f64,
    pub eps: f64,
    /// Points `z_k` on `∂Γ` where the lower bound is checked, in order.
    pub boundary_points: &'a [c64],
    pub c_cal: f64,
}

/// Counts zeros of `u` in `Γ` and compares with `(1/2πh)∫_Γ Δφ`.
///
/// Both exponential-type hypotheses are checked by sampling; violations
/// are recorded in `flags` without aborting.
pub fn hager_verify<F: HolomorphicSampler + ?Sized>(u: &F, input: &HagerInput<'_>) -> Result<ZeroCountReport> {
    let HagerInput { phi, region, h, eps, boundary_points, c_cal } = *input;
    if !(h > 0.0 && eps > 0.0) {
        return Err(Error::InvalidInput("h and eps must be positive".into()));
    }
    let n = boundary_points.len();
    let spacing = eps.sqrt();
    let scale = region.max_abs().max(1.0);
    for i in 0..n {
        if (boundary_points[(i + 1) % n] - boundary_points[i]).norm() > spacing * (1.0 + 1e-12) {
            return Err(Error::Hypothesis(format!("boundary points are farther apart than sqrt(eps) = {spacing}")));
        }
        if region.distance_to_boundary(boundary_points[i]) > 1e-9 * scale {
            return Err(Error::Hypothesis("boundary point not on the region boundary".into()));
        }
    }
    let mut flags = Vec::new();

    let lower_violations = boundary_points
        .iter()
        .map(|&z| u.sample(z).map(|v| v.norm().ln() < (phi(z) - eps) / h))
        .collect::<Result<Vec<bool>>>()?
        .into_iter()
        .filter(|&b| b)
        .count();
    if lower_violations > 0 {
        flags.push(format!("lower_bound_violations={lower_violations}"));
    }
    let (a, b, c, d) = region.bounding_box();
    let m = 40;
    let mut interior = Vec::new();
    for j in 0..m {
        for i in 0..m {
            let z = c64::new(a + (i as f64 + 0.5) * (b - a) / m as f64, c + (j as f64 + 0.5) * (d - c) / m as f64);
            if region.contains(z) {
                interior.push(z);
            }
        }
    }
    interior.extend_from_slice(boundary_points);
    let upper_violations = interior
        .par_iter()
        .map(|&z| u.sample(z).map(|v| v.norm().ln() > (phi(z) + eps) / h))
        .collect::<Result<Vec<bool>>>()?
        .into_iter()
        .filter(|&b| b)
        .count();
    if upper_violations > 0 {
        flags.push(format!("upper_bound_violations={upper_violations}"));
    }

    let mut contour = ContourSpec::new(boundary_points.to_vec());
    contour.min_modulus_guard = 0.0;
    let mut report = argument_count(u, &contour)?;
    let flux = boundary_flux(phi, boundary_points, 0.25 * spacing);
    let mass = flux / (2.0 * PI * h);
    let bound = c_cal * spacing / h;
    let deviation = (report.count as f64 - mass).abs();
    if deviation > bound {
        flags.push("deviation_exceeds_bound".into());
    }
    report.weyl_compare = Some(WeylCompare { mass, bound, deviation });
    report.flags = flags;
    Ok(report)
}

// ---------------------------------------------------------------------------
// lattice-product family

/// `u(z) = e^{−c/h} Π (z − w)` over the square lattice of spacing `√(πh)`
/// inside a disc, so that `ln|u| ≈ |z|²/(2h)` on the unit square and the
/// zero density matches `Δφ/(2πh)` for `φ = |z|²/2`.
#[derive(Clone, Debug)]
pub struct LatticeFamily {
    pub h: f64,
    pub spacing: f64,
    pub zeros: Vec<c64>,
    /// Region `[−½, ½] + i[−½, ½]`.
    pub region: RegionSpec,
    log_norm: f64,
}

fn best_offset(spacing: f64, lo: f64, hi: f64) -> f64 {
    // choose the lattice shift that keeps both edges as far as possible from lattice lines
    let dist = |alpha: f64, x: f64| {
        let t = (x / spacing - alpha).rem_euclid(1.0);
        t.min(1.0 - t)
    };
    (0..1000)
        .map(|k| k as f64 / 1000.0)
        .max_by(|&p, &q| dist(p, lo).min(dist(p, hi)).total_cmp(&dist(q, lo).min(dist(q, hi))))
        .unwrap()
}

impl LatticeFamily {
    pub fn new(h: f64) -> Self {
        let spacing = (PI * h).sqrt();
        let region = RegionSpec::rectangle(-0.5, 0.5, -0.5, 0.5).expect("unit square");
        let alpha = best_offset(spacing, -0.5, 0.5);
        let disc = 2.0;
        let m = (disc / spacing).ceil() as i64 + 1;
        let mut zeros = Vec::new();
        for j in -m..=m {
            for i in -m..=m {
                let w = c64::new(spacing * (i as f64 + alpha), spacing * (j as f64 + alpha));
                if w.norm() < disc {
                    zeros.push(w);
                }
            }
        }
        let mut fam = Self { h, spacing, zeros, region, log_norm: 0.0 };
        // centre ln|u| − φ/h on the region
        let k = 24;
        let mut acc = 0.0;
        for j in 0..k {
            for i in 0..k {
                let z = c64::new(-0.5 + (i as f64 + 0.5) / k as f64, -0.5 + (j as f64 + 0.5) / k as f64);
                acc += fam.log_abs_raw(z) - Self::phi(z) / h;
            }
        }
        fam.log_norm = acc / (k * k) as f64;
        fam
    }

    pub fn phi(z: c64) -> f64 {
        0.5 * z.norm_sqr()
    }

    fn log_abs_raw(&self, z: c64) -> f64 {
        self.zeros.iter().map(|w| (z - w).norm().ln()).sum()
    }

    pub fn eval(&self, z: c64) -> c64 {
        // accumulate the modulus in log form to stay in range
        let mut phase = c64::new(1.0, 0.0);
        let mut log_mod = -self.log_norm;
        for w in &self.zeros {
            let d = z - w;
            let r = d.norm();
            if r == 0.0 {
                return c64::new(0.0, 0.0);
            }
            log_mod += r.ln();
            phase *= d / r;
        }
        phase * log_mod.exp()
    }

    /// Zeros strictly inside the unit square.
    pub fn zeros_inside(&self) -> usize {
        self.zeros.iter().filter(|w| self.region.contains(**w)).count()
    }

    /// Minimum distance from a zero to the region boundary.
    pub fn boundary_clearance(&self) -> f64 {
        self.zeros.iter().map(|w| self.region.distance_to_boundary(*w)).fold(f64::INFINITY, f64::min)
    }

    /// Default verification: `ε = h`, boundary points at spacing `√ε/2`.
    pub fn verify(&self, c_cal: f64) -> Result<ZeroCountReport> {
        let eps = self.h;
        let pts = self.region.boundary_points(0.5 * eps.sqrt());
        let phi = |z: c64| Self::phi(z);
        let f = |z: c64| self.eval(z);
        hager_verify(&f, &HagerInput { phi: &phi, region: &self.region, h: self.h, eps, boundary_points: &pts, c_cal })
    }
}

/// 95th percentile of `deviation/(√ε/h)` over 25 log-spaced `h` in
/// `[0.01, 0.04]`, as returned by [`calibrate_lattice`].
pub const LATTICE_C_CAL: f64 = 0.52;

/// Calibration run for the lattice family at `ε = h`.
pub fn calibrate_lattice(hs: &[f64]) -> Result<f64> {
    let ratios = hs
        .iter()
        .map(|&h| {
            let r = LatticeFamily::new(h).verify(1.0)?;
            Ok(r.weyl_compare.expect("filled by verify").deviation * h.sqrt())
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(crate::stats::quantile(&ratios, 0.95))
}

pub fn calibration_grid() -> Vec<f64> {
    (0..25).map(|i| 0.04 * 0.25f64.powf(i as f64 / 24.0)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> c64 {
        c64::new(re, im)
    }

    #[test]
    fn argument_count_examples() {
        let unit = ContourSpec::circle(c(0.0, 0.0), 1.0, 64);
        assert_eq!(argument_count(&|z: c64| z * z, &unit).unwrap().count, 2);
        let f = |z: c64| (z - 0.3) * (z + c(0.0, 0.4)) * z.exp();
        assert_eq!(argument_count(&f, &unit).unwrap().count, 2);
        assert_eq!(argument_count(&|_z: c64| c(3.0, 0.0), &unit).unwrap().count, 0);
        let on = |z: c64| z - 1.0;
        assert!(matches!(argument_count(&on, &unit), Err(Error::ZeroOnContour { .. })));
    }

    #[test]
    fn refinement_handles_coarse_contours() {
        let coarse = ContourSpec::circle(c(0.0, 0.0), 1.0, 12);
        let f = |z: c64| z.powu(7);
        let r = argument_count(&f, &coarse).unwrap();
        assert_eq!(r.count, 7);
        assert!(r.refinement_used > 0);
        let mut tight = coarse.clone();
        tight.refinement_limit = 0;
        assert!(matches!(argument_count(&f, &tight), Err(Error::RefinementLimit { .. })));
    }

    #[test]
    fn invariant_under_refinement_and_zero_free_factors() {
        let zeros = [c(0.1, 0.2), c(-0.5, 0.1), c(0.3, -0.6), c(1.5, 0.0)];
        let f = |z: c64| zeros.iter().map(|w| z - w).product::<c64>();
        let contour = ContourSpec::rectangle(-1.0, 1.0, -1.0, 1.0, 8);
        let base = argument_count(&f, &contour).unwrap().count;
        assert_eq!(base, 3);
        assert_eq!(argument_count(&f, &contour.refined()).unwrap().count, base);
        let g = |z: c64| f(z) * (c(0.3, 1.0) * z * z - c(2.0, 0.5) * z + 0.7).exp();
        assert_eq!(argument_count(&g, &contour).unwrap().count, base);
    }

    #[test]
    fn cauchy_riemann_spot_check() {
        let pts: Vec<c64> = (0..10).map(|k| c64::from_polar(0.5, k as f64)).collect();
        assert!(cauchy_riemann_defect(&|z: c64| z.exp() * z, &pts, 1e-5).unwrap() < 1e-5);
        assert!(cauchy_riemann_defect(&|z: c64| z.conj(), &pts, 1e-5).unwrap() > 0.5);
    }

    #[test]
    fn jensen_examples() {
        let z0 = c(0.0, 0.0);
        let far = |z: c64| z - c(3.0, 0.0);
        let b = jensen_bound(&far, z0, 0.5, 1.0, None).unwrap();
        assert!(b >= 0.0);
        let r = 0.4;
        let cube = |z: c64| (z - z0 - r / 2.0).powu(3);
        let b = jensen_bound(&cube, z0, r, 2.0 * r, None).unwrap();
        assert!(b >= 3.0, "{b}");
        let packed: Vec<c64> = (0..5).map(|k| c64::from_polar(0.05, k as f64)).collect();
        let p = |z: c64| packed.iter().map(|w| z - w).product::<c64>();
        let b = jensen_bound(&p, c(0.3, 0.0), 0.5, 1.0, None).unwrap();
        assert!(b >= 5.0, "{b}");
        let count = argument_count(&p, &ContourSpec::circle(c(0.3, 0.0), 0.5, 128)).unwrap().count;
        assert!(b >= count as f64);
        assert!(jensen_bound(&|z: c64| z, z0, 0.5, 1.0, None).is_err());
    }

    #[test]
    fn delta_phi_mass_examples() {
        let sq = RegionSpec::rectangle(0.0, 1.0, 0.0, 1.0).unwrap();
        let quad = |z: c64| 0.5 * z.norm_sqr();
        assert!((delta_phi_mass(&quad, &sq, 100) - 2.0).abs() < 1e-6);
        let harmonic = |z: c64| z.powu(3).re;
        assert!(delta_phi_mass(&harmonic, &sq, 100).abs() < 1e-6);
        let flux = boundary_flux(&quad, &sq.boundary_points(0.01), 1e-3);
        assert!((flux - 2.0).abs() < 1e-6);

        let h = 0.01;
        let sigma = 0.02;
        let pts = [c(0.3, 0.3), c(0.6, 0.7), c(0.5, 0.2), c(1.6, 0.5)];
        let smooth = |z: c64| h * pts.iter().map(|w| 0.5 * ((z - w).norm_sqr() + sigma * sigma).ln()).sum::<f64>();
        let inside = pts.iter().filter(|w| sq.contains(**w)).count() as f64;
        let m = delta_phi_mass(&smooth, &sq, 800);
        assert!((m - 2.0 * PI * h * inside).abs() < 0.02 * 2.0 * PI * h * inside, "{m}");
        let fl = boundary_flux(&smooth, &sq.boundary_points(0.002), 1e-4);
        assert!((fl - m).abs() <= 0.02 * m.abs());
    }

    #[test]
    fn trivial_hager_case() {
        let sq = RegionSpec::rectangle(0.0, 1.0, 0.0, 1.0).unwrap();
        let pts = sq.boundary_points(0.05);
        let zero_phi = |_z: c64| 0.0;
        let one = |_z: c64| c(1.0, 0.0);
        let r = hager_verify(
            &one,
            &HagerInput { phi: &zero_phi, region: &sq, h: 0.1, eps: 0.01, boundary_points: &pts, c_cal: 5.0 },
        )
        .unwrap();
        assert_eq!(r.count, 0);
        let w = r.weyl_compare.unwrap();
        assert_eq!(w.mass, 0.0);
        assert_eq!(w.deviation, 0.0);
        assert!(r.flags.is_empty());
        let sparse = sq.boundary_points(0.5);
        assert!(hager_verify(
            &one,
            &HagerInput { phi: &zero_phi, region: &sq, h: 0.1, eps: 0.01, boundary_points: &sparse, c_cal: 5.0 }
        )
        .is_err());
    }

    #[test]
    fn lattice_family_counts() {
        let fam = LatticeFamily::new(0.01);
        assert!(fam.boundary_clearance() > 0.2 * fam.spacing);
        let r = fam.verify(5.0).unwrap();
        assert_eq!(r.count as usize, fam.zeros_inside());
        let w = r.weyl_compare.unwrap();
        assert!((w.mass - 1.0 / (PI * 0.01)).abs() < 1e-6 * w.mass);
        assert!(w.deviation <= w.bound);
    }

    #[test]
    fn frozen_calibration_reproduces() {
        let c = calibrate_lattice(&calibration_grid()).unwrap();
        assert!(c <= LATTICE_C_CAL && c > 0.5 * LATTICE_C_CAL, "{c}");
    }

    #[test]
    fn report_csv() {
        let r = ZeroCountReport { count: 2, winding_total: 2.0, refinement_used: 0, weyl_compare: None, flags: vec![] };
        let mut out = Vec::new();
        r.write_csv(&mut out).unwrap();
        assert!(String::from_utf8(out).unwrap().starts_with("count,winding,mass,bound,deviation,flags\n2,"));
    }
}
