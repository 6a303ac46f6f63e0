//! WKB quasimodes for `P = hD + g(x)` on the circle.
//!
//! At an interior point `z` of the range of `ξ + g` the equation
//! `Im g(x) = Im z` has two roots `x₊`, `x₋`. Near `x₊` the phase
//! `φ₊(x) = ∫_{x₊}^x (z − g)` has `Im φ₊ ≥ 0` with a nondegenerate minimum,
//! so `χ(x − x₊)e^{iφ₊/h}` solves `(P − z)u = 0` up to the cutoff error.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64 as c64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::numerics;
use crate::symbol::{FourierOperator, PeriodicFunction, Symbol1D};

const ROOT_GRID: usize = 4096;
/// Fraction of the cutoff radius on which the cutoff is identically one.
pub const PLATEAU: f64 = 0.8;

#[derive(Clone, Debug, PartialEq)]
pub struct CrossingPair {
    pub z: c64,
    pub x_plus: f64,
    pub x_minus: f64,
    pub xi_plus: f64,
    pub xi_minus: f64,
    /// `(1/i){p, p̄}(x₊, ξ₊)`, positive.
    pub bracket_plus: f64,
    /// `(1/i){p, p̄}(x₋, ξ₋)`, negative.
    pub bracket_minus: f64,
}

impl CrossingPair {
    /// Length of the shorter arc between `x₊` and `x₋`.
    pub fn shorter_arc(&self) -> f64 {
        let d = (self.x_plus - self.x_minus).rem_euclid(2.0 * PI);
        d.min(2.0 * PI - d)
    }

    /// Largest admissible cutoff radius (exclusive).
    pub fn max_cutoff_radius(&self) -> f64 {
        0.5 * self.shorter_arc()
    }

    pub fn default_cutoff_radius(&self) -> f64 {
        0.25 * self.shorter_arc()
    }

    /// `0.95 ×` the admissible maximum; pushes the cutoff transition out to
    /// where `Im φ₊` is large, which sharpens the residual decay at moderate h.
    pub fn wide_cutoff_radius(&self) -> f64 {
        0.95 * self.max_cutoff_radius()
    }
}

fn wrap(x: f64) -> f64 {
    let w = x.rem_euclid(2.0 * PI);
    if w >= 2.0 * PI - 1e-14 {
        0.0
    } else {
        w
    }
}

fn sign_changes(f: impl Fn(f64) -> f64, n: usize) -> Vec<(f64, f64)> {
    let xs: Vec<f64> = (0..=n).map(|j| 2.0 * PI * j as f64 / n as f64).collect();
    let vals: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
    (0..n)
        .filter(|&j| (vals[j] >= 0.0) != (vals[j + 1] >= 0.0))
        .map(|j| (xs[j], xs[j + 1]))
        .collect()
}

fn bisect(f: &impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let fa_pos = f(a) >= 0.0;
    for _ in 0..80 {
        let m = 0.5 * (a + b);
        if (f(m) >= 0.0) == fa_pos {
            a = m;
        } else {
            b = m;
        }
        if b - a < 1e-15 {
            break;
        }
    }
    0.5 * (a + b)
}

/// Roots `x₊`, `x₋` of `Im g = Im z` with `Im g'(x₊) < 0 < Im g'(x₋)`.
pub fn find_crossings(g: &PeriodicFunction, z: c64) -> Result<CrossingPair> {
    let dg = g.derivative();
    let n = ROOT_GRID.max(64 * g.grid_size());
    let im_vals: Vec<f64> = (0..n).map(|j| g.eval(2.0 * PI * j as f64 / n as f64).im).collect();
    let lo = im_vals.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = im_vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(z.im > lo && z.im < hi) {
        return Err(Error::OutOfRange(format!("Im z = {} (range of Im g is ({lo:.6}, {hi:.6}))", z.im)));
    }
    let critical = sign_changes(|x| dg.eval(x).im, n);
    if critical.len() > 2 {
        return Err(Error::Hypothesis(format!("Im g has {} critical points, expected 2", critical.len())));
    }
    let f = |x: f64| g.eval(x).im - z.im;
    let brackets = sign_changes(f, n);
    if brackets.len() != 2 {
        return Err(Error::Hypothesis(format!("Im g = Im z has {} solutions, expected 2", brackets.len())));
    }
    let mut roots: Vec<f64> = brackets
        .iter()
        .map(|&(a, b)| {
            let mut x = bisect(&f, a, b);
            for _ in 0..3 {
                let d = dg.eval(x).im;
                if d.abs() > 1e-300 {
                    let step = f(x) / d;
                    if step.abs() < 1e-6 {
                        x -= step;
                    }
                }
            }
            wrap(x)
        })
        .collect();
    roots.sort_by(|a, b| dg.eval(*a).im.total_cmp(&dg.eval(*b).im));
    let (x_plus, x_minus) = (roots[0], roots[1]);
    if !(dg.eval(x_plus).im < 0.0 && dg.eval(x_minus).im > 0.0) {
        return Err(Error::Hypothesis("crossings are degenerate".into()));
    }
    let xi_plus = z.re - g.eval(x_plus).re;
    let xi_minus = z.re - g.eval(x_minus).re;
    let p = Symbol1D::first_order(g.clone(), true);
    Ok(CrossingPair {
        z,
        x_plus,
        x_minus,
        xi_plus,
        xi_minus,
        bracket_plus: p.bracket(x_plus, xi_plus),
        bracket_minus: p.bracket(x_minus, xi_minus),
    })
}

/// Smooth step: 0 for `s ≤ 0`, 1 for `s ≥ 1`.
fn smooth_step(s: f64) -> f64 {
    let psi = |t: f64| if t > 0.0 { (-1.0 / t).exp() } else { 0.0 };
    let a = psi(s);
    let b = psi(1.0 - s);
    if a + b == 0.0 {
        0.0
    } else {
        a / (a + b)
    }
}

/// C^∞ cutoff equal to one on `|t| ≤ PLATEAU` and zero for `|t| ≥ 1`.
pub fn cutoff(t: f64) -> f64 {
    let a = t.abs();
    if a <= PLATEAU {
        1.0
    } else if a >= 1.0 {
        0.0
    } else {
        smooth_step((1.0 - a) / (1.0 - PLATEAU))
    }
}

/// `∫_{x₊}^{x₊+t} (z − g(y)) dy` from the Fourier series of `g`.
pub fn phase(g: &PeriodicFunction, z: c64, x_plus: f64, t: f64) -> c64 {
    let k = g.order() as i64;
    let x = x_plus + t;
    let mut s = (z - g.coeff(0)) * t;
    for m in (-k..=k).filter(|&m| m != 0) {
        let c = g.coeff(m);
        if c == c64::new(0.0, 0.0) {
            continue;
        }
        let im = c64::new(0.0, m as f64);
        s -= c / im * (c64::from_polar(1.0, m as f64 * x) - c64::from_polar(1.0, m as f64 * x_plus));
    }
    s
}

#[derive(Clone, Debug)]
pub struct WkbQuasimode {
    pub z: c64,
    pub h: f64,
    pub crossings: CrossingPair,
    pub cutoff_radius: f64,
    /// Sample nodes `x_j = 2πj/M`.
    pub grid: Vec<f64>,
    /// `φ₊` at the grid nodes (local coordinate `x − x₊ ∈ [−π, π)`).
    pub phase: Vec<c64>,
    /// Normalized samples of the quasimode, `∫|u|² = 1`.
    pub samples: Vec<c64>,
    /// Coefficients on the orthonormal basis `e^k`, `k = −L..L`.
    pub coeffs: Vec<c64>,
    /// Mass outside `|x − x₊| ≤ 3(h ln(1/h)/|Im g'(x₊)|)^{1/2}`.
    pub tail_mass: f64,
    /// Potential used to build the quasimode.
    pub g: PeriodicFunction,
}

impl WkbQuasimode {
    pub fn max_mode(&self) -> usize {
        self.coeffs.len() / 2
    }

    /// Coefficients truncated to `k = −K..K` and renormalized.
    pub fn truncated(&self, k: usize) -> Result<Vec<c64>> {
        let l = self.max_mode();
        if k > l {
            return Err(Error::InvalidInput(format!("quasimode resolves modes up to {l}, operator needs {k}")));
        }
        let mut v = self.coeffs[l - k..=l + k].to_vec();
        numerics::normalize(&mut v);
        Ok(v)
    }

    /// Position of the largest sample.
    pub fn peak(&self) -> f64 {
        let (j, _) = self
            .samples
            .iter()
            .enumerate()
            .fold((0, -1.0), |acc, (j, v)| if v.norm() > acc.1 { (j, v.norm()) } else { acc });
        self.grid[j]
    }

    /// Second moment of `|u|²` about `x₊`.
    pub fn variance(&self) -> f64 {
        let dx = 2.0 * PI / self.grid.len() as f64;
        self.grid
            .iter()
            .zip(&self.samples)
            .map(|(x, u)| {
                let t = (x - self.crossings.x_plus + PI).rem_euclid(2.0 * PI) - PI;
                t * t * u.norm_sqr() * dx
            })
            .sum()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "x,re,im,abs")?;
        for (x, u) in self.grid.iter().zip(&self.samples) {
            writeln!(w, "{:e},{:e},{:e},{:e}", x, u.re, u.im, u.norm())?;
        }
        Ok(())
    }

    /// Profile `|u(x)|` over `[0, 2π)`, y-axis up.
    pub fn write_svg<W: Write>(&self, width: f64, height: f64, mut w: W) -> std::io::Result<()> {
        let top = self.samples.iter().map(|u| u.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        writeln!(w, "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width:.1}\" height=\"{height:.1}\" viewBox=\"0 0 {width:.1} {height:.1}\">")?;
        let pts: Vec<String> = self
            .grid
            .iter()
            .zip(&self.samples)
            .map(|(x, u)| format!("{:.3},{:.3}", x / (2.0 * PI) * width, height - u.norm() / top * height))
            .collect();
        writeln!(w, "<polyline stroke=\"#000000\" fill=\"none\" stroke-width=\"1\" points=\"{}\"/>", pts.join(" "))?;
        writeln!(w, "</svg>")
    }
}

/// `h^{-1/4}a₀χ((x − x₊)/r)e^{iφ₊(x)/h}` with `a₀` fixed by unit norm.
pub fn build_quasimode(g: &PeriodicFunction, z: c64, h: f64, cutoff_radius: Option<f64>) -> Result<WkbQuasimode> {
    if !(h > 0.0) {
        return Err(Error::InvalidInput(format!("h must be positive, got {h}")));
    }
    let crossings = find_crossings(g, z)?;
    let r = cutoff_radius.unwrap_or_else(|| crossings.default_cutoff_radius());
    if !(r > 0.0 && r < crossings.max_cutoff_radius()) {
        return Err(Error::Hypothesis(format!(
            "cutoff radius {r} must lie in (0, {})",
            crossings.max_cutoff_radius()
        )));
    }
    let m = ((32.0 / h).ceil() as usize).max(256).next_power_of_two();
    let dx = 2.0 * PI / m as f64;
    let grid: Vec<f64> = (0..m).map(|j| j as f64 * dx).collect();
    let x_plus = crossings.x_plus;
    let local = |x: f64| (x - x_plus + PI).rem_euclid(2.0 * PI) - PI;
    let phase_vals: Vec<c64> = grid.iter().map(|&x| phase(g, z, x_plus, local(x))).collect();
    let mut samples: Vec<c64> = grid
        .iter()
        .zip(&phase_vals)
        .map(|(&x, &ph)| {
            let chi = cutoff(local(x) / r);
            if chi == 0.0 {
                c64::new(0.0, 0.0)
            } else {
                chi * (c64::new(0.0, 1.0) * ph / h).exp() * h.powf(-0.25)
            }
        })
        .collect();
    for (&x, ph) in grid.iter().zip(&phase_vals) {
        if local(x).abs() < r && ph.im < -1e-10 {
            return Err(Error::Hypothesis(format!("Im φ₊ = {} < 0 at x = {x}", ph.im)));
        }
    }
    let l2 = (samples.iter().map(|u| u.norm_sqr()).sum::<f64>() * dx).sqrt();
    samples.iter_mut().for_each(|u| *u /= l2);

    let slope = g.derivative().eval(x_plus).im.abs();
    let width = 3.0 * (h * (1.0 / h).ln().max(0.0) / slope).sqrt();
    let tail_mass: f64 = grid
        .iter()
        .zip(&samples)
        .filter(|(&x, _)| local(x).abs() > width)
        .map(|(_, u)| u.norm_sqr() * dx)
        .sum();

    let mut buf = samples.clone();
    FftPlanner::new().plan_fft_forward(m).process(&mut buf);
    let scale = (2.0 * PI).sqrt() / m as f64;
    let l = (m / 2 - 1) as i64;
    let coeffs = (-l..=l).map(|k| buf[k.rem_euclid(m as i64) as usize] * scale).collect();

    Ok(WkbQuasimode {
        z,
        h,
        crossings,
        cutoff_radius: r,
        grid,
        phase: phase_vals,
        samples,
        coeffs,
        tail_mass,
        g: g.clone(),
    })
}

/// `‖(P_N − z)v‖` for the truncated, renormalized quasimode `v`.
pub fn residual(op: &FourierOperator, qm: &WkbQuasimode) -> Result<f64> {
    if (op.h - qm.h).abs() > 1e-12 * qm.h {
        return Err(Error::InvalidInput(format!("operator h = {} but quasimode h = {}", op.h, qm.h)));
    }
    match op.symbol.first_order_potential() {
        Some(g) if same_function(g, &qm.g) => {}
        _ => return Err(Error::InvalidInput("operator was not built from the quasimode potential".into())),
    }
    let v = qm.truncated(op.k)?;
    let a = numerics::shifted(op.matrix.as_ref(), qm.z);
    Ok(numerics::norm(&numerics::mat_vec(a.as_ref(), &v)))
}

fn same_function(a: &PeriodicFunction, b: &PeriodicFunction) -> bool {
    let k = a.order().max(b.order()) as i64;
    (-k..=k).all(|m| (a.coeff(m) - b.coeff(m)).norm() <= 1e-13)
}
