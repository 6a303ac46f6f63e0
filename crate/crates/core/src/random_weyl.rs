//! Gaussian random perturbations `P + δQ_ω` and Monte-Carlo eigenvalue
//! counts compared with the Weyl law `vol(p⁻¹(Γ))/(2πh)`.

use std::f64::consts::PI;
use std::io::Write;

use faer::{Mat, MatRef};
use num_complex::Complex64 as c64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grushin::{self, Gauge, GrushinData};
use crate::numerics::{self, TOLERANCES};
use crate::rng::{self, label, StreamRng};
use crate::stats;
use crate::symbol::{assemble, weyl_volume, FourierOperator, RegionConfig, RegionSpec, SymbolSpec};

/// Constant in the exponential tail bound.
pub const TAIL_C0: f64 = 2.0;

#[derive(Clone, Debug)]
pub struct GaussianPerturbation {
    pub h: f64,
    pub c1: f64,
    /// Mode cutoff `floor(C1/h)`.
    pub n_c: usize,
    /// `α_{j,k}`, row `j + N_c`, column `k + N_c`.
    pub alpha: Mat<c64>,
    pub seed: u64,
    pub hs_norm: f64,
}

impl GaussianPerturbation {
    pub fn block_dim(&self) -> usize {
        2 * self.n_c + 1
    }

    /// `Q_ω` as a `(2K+1)`-square matrix, zero outside the cutoff block.
    pub fn embed(&self, k: usize) -> Result<Mat<c64>> {
        if self.n_c > k {
            return Err(Error::InvalidInput(format!(
                "perturbation cutoff {} exceeds truncation K = {k}",
                self.n_c
            )));
        }
        let off = k - self.n_c;
        let b = self.block_dim();
        Ok(Mat::from_fn(2 * k + 1, 2 * k + 1, |i, j| {
            if (off..off + b).contains(&i) && (off..off + b).contains(&j) {
                self.alpha[(i - off, j - off)]
            } else {
                c64::new(0.0, 0.0)
            }
        }))
    }

    /// `P + δQ_ω` on the truncation of `p`.
    pub fn perturb(&self, p: MatRef<'_, c64>, delta: f64) -> Result<Mat<c64>> {
        let k = (p.nrows() - 1) / 2;
        let q = self.embed(k)?;
        Ok(Mat::from_fn(p.nrows(), p.ncols(), |i, j| p[(i, j)] + q[(i, j)] * delta))
    }

    /// `E₋Q_ωE₊` for vectors on a `(2K+1)` truncation.
    pub fn sandwich(&self, e_minus: &[c64], e_plus: &[c64]) -> c64 {
        let k = (e_plus.len() - 1) / 2;
        let off = k.saturating_sub(self.n_c);
        let b = self.block_dim().min(e_plus.len());
        let mut acc = c64::new(0.0, 0.0);
        for j in 0..b {
            let row: c64 = (0..b).map(|l| self.alpha[(j, l)] * e_plus[off + l]).sum();
            acc += e_minus[off + j] * row;
        }
        acc
    }
}

fn cutoff(h: f64, c1: f64) -> Result<usize> {
    if !(h > 0.0 && c1 > 0.0) {
        return Err(Error::InvalidInput("h and C1 must be positive".into()));
    }
    let n_c = (c1 / h).floor() as usize;
    if n_c < 1 {
        return Err(Error::InvalidInput(format!("mode cutoff floor(C1/h) = {n_c} must be at least 1")));
    }
    Ok(n_c)
}

pub fn sample_perturbation_from(h: f64, c1: f64, seed: u64, rng: &mut StreamRng) -> Result<GaussianPerturbation> {
    let n_c = cutoff(h, c1)?;
    let b = 2 * n_c + 1;
    let mut alpha = Mat::<c64>::zeros(b, b);
    let mut hs2 = 0.0;
    for j in 0..b {
        for k in 0..b {
            let v = rng::complex_normal(rng);
            hs2 += v.norm_sqr();
            alpha[(j, k)] = v;
        }
    }
    Ok(GaussianPerturbation { h, c1, n_c, alpha, seed, hs_norm: hs2.sqrt() })
}

/// Deterministic in `seed`.
pub fn sample_perturbation(h: f64, c1: f64, seed: u64) -> Result<GaussianPerturbation> {
    sample_perturbation_from(h, c1, seed, &mut rng::stream(seed, &[label("perturbation")]))
}

/// `P(Σ|X_j|² ≥ x) ≤ exp(C₀Σσ_j²/(2s₁) − x/(2s₁))`, `s₁ = max σ_j²`, clamped to 1.
pub fn tail_bound(sigmas: &[f64], x: f64) -> f64 {
    assert!(!sigmas.is_empty() && x >= 0.0, "tail_bound needs sigmas and x >= 0");
    let s1 = sigmas.iter().map(|s| s * s).fold(0.0, f64::max);
    let total: f64 = sigmas.iter().map(|s| s * s).sum();
    (TAIL_C0 * total / (2.0 * s1) - x / (2.0 * s1)).exp().min(1.0)
}

/// `Σ_{|j|,|k| ≤ N_c} |ê₀(k)|²|f̂₀(j)|²` for coefficient vectors on a `(2K+1)` truncation.
pub fn effective_variance_from(e0: &[c64], f0: &[c64], n_c: usize) -> f64 {
    let k = (e0.len() - 1) / 2;
    let lo = k.saturating_sub(n_c);
    let hi = (k + n_c).min(e0.len() - 1);
    let se: f64 = e0[lo..=hi].iter().map(|v| v.norm_sqr()).sum();
    let sf: f64 = f0[lo..=hi].iter().map(|v| v.norm_sqr()).sum();
    se * sf
}

pub fn effective_variance(op: &FourierOperator, z: c64, c1: f64) -> Result<f64> {
    let n_c = cutoff(op.h, c1)?;
    let d = grushin::singular_pair(op, z, &Gauge::LargestEntry)?;
    Ok(effective_variance_from(&d.e0, &d.f0, n_c))
}

/// `E₋₊^δ(z)`: the Grushin problem of `P` (same `e₀`, `f₀`) solved for `P + δQ_ω`.
pub fn perturbed_effective(op: &FourierOperator, q: &GaussianPerturbation, delta: f64, z: c64) -> Result<GrushinData> {
    let data = grushin::singular_pair(op, z, &Gauge::LargestEntry)?;
    let pd = q.perturb(op.matrix.as_ref(), delta)?;
    grushin::solve_grushin(pd.as_ref(), data)
}

/// Empirical `q`-quantile of `|E₋₊^δ(z)|` over independent perturbations.
pub fn effective_lower_quantile(
    op: &FourierOperator,
    z: c64,
    delta: f64,
    c1: f64,
    trials: usize,
    seed: u64,
    q: f64,
) -> Result<f64> {
    let data = grushin::singular_pair(op, z, &Gauge::LargestEntry)?;
    let values: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let s = rng::derive_seed(seed, &[label("lower-bound"), t as u64]);
            let pert = sample_perturbation(op.h, c1, s)?;
            let pd = pert.perturb(op.matrix.as_ref(), delta)?;
            Ok(grushin::solve_grushin(pd.as_ref(), data.clone())?.e_mp.unwrap().norm())
        })
        .collect::<Result<_>>()?;
    Ok(stats::quantile(&values, q))
}

// ---------------------------------------------------------------------------
// Weyl-law experiment

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub symbol: SymbolSpec,
    pub h_list: Vec<f64>,
    /// `δ = h^κ'`.
    pub delta_exponent: f64,
    pub region: RegionConfig,
    pub trials: usize,
    pub seed: u64,
    /// `K = ceil(c_K·C1/h)`.
    pub c_k: f64,
    pub c1: f64,
    pub c_cal: f64,
    /// Width of the boundary exclusion ring as a multiple of `h`.
    pub ring_factor: f64,
    pub volume_resolution: usize,
    /// Rerun trial 0 at `1.5K` and compare counts.
    pub truncation_check: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            symbol: SymbolSpec::default(),
            h_list: vec![0.02],
            delta_exponent: 4.0,
            region: RegionConfig::rectangle(-1.0, 1.0, -0.5, 0.5),
            trials: 20,
            seed: 0,
            c_k: 2.0,
            c1: 2.0,
            c_cal: 1.0,
            ring_factor: 0.5,
            volume_resolution: 1600,
            truncation_check: true,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta_exponent > 2.5) {
            return Err(Error::InvalidInput(format!("delta_exponent = {} must exceed 5/2", self.delta_exponent)));
        }
        if self.trials < 1 {
            return Err(Error::InvalidInput("trials must be at least 1".into()));
        }
        if self.h_list.is_empty() || self.h_list.iter().any(|h| !(*h > 0.0)) {
            return Err(Error::InvalidInput("h_list must hold positive values".into()));
        }
        if !(self.c_k >= 1.0 && self.c1 > 0.0 && self.ring_factor >= 0.0) {
            return Err(Error::InvalidInput("need c_k >= 1, c1 > 0, ring_factor >= 0".into()));
        }
        Ok(())
    }

    pub fn truncation(&self, h: f64) -> usize {
        (self.c_k * self.c1 / h).ceil() as usize
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct WeylRow {
    pub h: f64,
    pub delta: f64,
    pub trial: usize,
    pub count: usize,
    pub ring_count: usize,
    pub prediction: f64,
    pub epsilon: f64,
    pub bound_scale: f64,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct WeylSummary {
    pub h: f64,
    pub k: usize,
    pub prediction: f64,
    pub median_relative_deviation: f64,
    pub mean_count: f64,
    pub std_count: f64,
    pub mean_deviation: f64,
    pub baseline_count: usize,
    pub baseline_ring_count: usize,
    /// Fraction of trials with `|count − prediction| ≤ C_cal·√ε/h`.
    pub within_fraction: f64,
    /// Counts of trial 0 at `K` and `1.5K`.
    pub truncation_counts: Option<(usize, usize)>,
    pub max_trace_defect: f64,
}

impl WeylSummary {
    pub fn median_abs_deviation(&self) -> f64 {
        self.median_relative_deviation * self.prediction
    }

    pub fn baseline_deviation(&self) -> f64 {
        (self.baseline_count as f64 - self.prediction).abs()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct WeylResult {
    pub rows: Vec<WeylRow>,
    pub summaries: Vec<WeylSummary>,
    pub c_cal: f64,
    pub flags: Vec<String>,
}

impl WeylResult {
    /// Baseline rows have `delta = 0`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "h,delta,trial,count,ring_count,prediction,epsilon,bound_scale,seed")?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{:e},{},{},{},{:.12e},{:.12e},{:.12e},{}",
                r.h, r.delta, r.trial, r.count, r.ring_count, r.prediction, r.epsilon, r.bound_scale, r.seed
            )?;
        }
        Ok(())
    }

    pub fn write_summary_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "h,K,prediction,median_rel_dev,mean_count,std_count,baseline_count,within_fraction,c_cal")?;
        for s in &self.summaries {
            writeln!(
                w,
                "{},{},{:.12e},{:.12e},{:.12e},{:.12e},{},{:.6},{}",
                s.h,
                s.k,
                s.prediction,
                s.median_relative_deviation,
                s.mean_count,
                s.std_count,
                s.baseline_count,
                s.within_fraction,
                self.c_cal
            )?;
        }
        Ok(())
    }
}

/// `(count, ring_count)` of eigenvalues strictly inside and within the ring.
pub fn count_in_region(eigs: &[c64], region: &RegionSpec) -> (usize, usize) {
    let inside = eigs.iter().filter(|z| region.strictly_inside(**z)).count();
    let ring = eigs.iter().filter(|z| region.in_ring(**z)).count();
    (inside, ring)
}

fn trace_defect(a: MatRef<'_, c64>, eigs: &[c64]) -> f64 {
    let tr: c64 = (0..a.nrows()).map(|i| a[(i, i)]).sum();
    let sum: c64 = eigs.iter().sum();
    (tr - sum).norm() / numerics::frobenius(a).max(1.0)
}

fn check_dim(k: usize) -> Result<()> {
    let dim = 2 * k + 1;
    if dim > TOLERANCES.max_dim {
        return Err(Error::DimensionTooLarge { dim, max: TOLERANCES.max_dim });
    }
    Ok(())
}

pub fn trial_seed(master: u64, h: f64, trial: usize) -> u64 {
    rng::derive_seed(master, &[label("weyl"), h.to_bits(), trial as u64])
}

struct Accumulated {
    rows: Vec<WeylRow>,
    summary: WeylSummary,
}

#[allow(clippy::too_many_arguments)]
fn summarize(
    h: f64,
    k: usize,
    prediction: f64,
    c_cal: f64,
    rows: Vec<WeylRow>,
    baseline: (usize, usize),
    truncation_counts: Option<(usize, usize)>,
    max_trace_defect: f64,
) -> Accumulated {
    let counts: Vec<f64> = rows.iter().filter(|r| r.delta > 0.0).map(|r| r.count as f64).collect();
    let rel: Vec<f64> = counts.iter().map(|c| (c - prediction).abs() / prediction.max(f64::MIN_POSITIVE)).collect();
    let bound = rows.first().map(|r| c_cal * r.bound_scale).unwrap_or(0.0);
    let within = counts.iter().filter(|c| (*c - prediction).abs() <= bound).count() as f64 / counts.len().max(1) as f64;
    let summary = WeylSummary {
        h,
        k,
        prediction,
        median_relative_deviation: stats::median(&rel),
        mean_count: stats::mean(&counts),
        std_count: stats::std_dev(&counts),
        mean_deviation: stats::mean(&counts) - prediction,
        baseline_count: baseline.0,
        baseline_ring_count: baseline.1,
        within_fraction: within,
        truncation_counts,
        max_trace_defect,
    };
    Accumulated { rows, summary }
}

/// Monte-Carlo counts of eigenvalues of `P + δQ_ω` in `Γ`, one block of
/// trials per `h`, plus the unperturbed baseline.
pub fn run_weyl_experiment(cfg: &ExperimentConfig) -> Result<WeylResult> {
    cfg.validate()?;
    let symbol = cfg.symbol.build()?;
    let base_region = cfg.region.build()?;
    for &h in &cfg.h_list {
        check_dim(cfg.truncation(h))
            .map_err(|e| Error::InvalidInput(format!("{e}: use a larger h or a smaller C1")))?;
    }
    let volume = weyl_volume(&symbol, &base_region, None, cfg.volume_resolution)?;
    let mut flags = vec!["multiplicities: truncated-matrix algebraic multiplicities assumed to track the operator".to_string()];
    if let Some(g) = symbol.first_order_potential() {
        let (lo, hi) = g.values().iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, u), v| (l.min(v.im), u.max(v.im)));
        let (_, _, c, d) = base_region.bounding_box();
        if c <= lo || d >= hi {
            flags.push(format!("region_outside_range: Im g spans ({lo:.3}, {hi:.3})"));
        }
    }
    let mut rows = Vec::new();
    let mut summaries = Vec::new();
    for &h in &cfg.h_list {
        let k = cfg.truncation(h);
        let op = assemble(&symbol, h, k)?;
        let region = base_region.clone().with_tolerance(cfg.ring_factor * h);
        let delta = h.powf(cfg.delta_exponent);
        let epsilon = h * (1.0 / delta).ln();
        let bound_scale = epsilon.sqrt() / h;
        let prediction = volume / (2.0 * PI * h);

        let base_eigs = numerics::eigenvalues(op.matrix.as_ref())?;
        let baseline = count_in_region(&base_eigs, &region);
        let mut h_rows = vec![WeylRow {
            h,
            delta: 0.0,
            trial: 0,
            count: baseline.0,
            ring_count: baseline.1,
            prediction,
            epsilon,
            bound_scale,
            seed: 0,
        }];

        let trials: Vec<(WeylRow, f64)> = (0..cfg.trials)
            .into_par_iter()
            .map(|t| {
                let seed = trial_seed(cfg.seed, h, t);
                let q = sample_perturbation(h, cfg.c1, seed)?;
                let pd = q.perturb(op.matrix.as_ref(), delta)?;
                let eigs = numerics::eigenvalues(pd.as_ref())?;
                let (count, ring_count) = count_in_region(&eigs, &region);
                let row = WeylRow { h, delta, trial: t, count, ring_count, prediction, epsilon, bound_scale, seed };
                Ok((row, trace_defect(pd.as_ref(), &eigs)))
            })
            .collect::<Result<_>>()?;
        let max_trace_defect = trials.iter().map(|t| t.1).fold(0.0, f64::max);
        if max_trace_defect > 1e-9 {
            flags.push(format!("trace_defect: h = {h}: {max_trace_defect:e}"));
        }
        h_rows.extend(trials.into_iter().map(|t| t.0));

        let truncation_counts = if cfg.truncation_check {
            let k2 = (1.5 * k as f64).ceil() as usize;
            check_dim(k2)?;
            let big = assemble(&symbol, h, k2)?;
            let q = sample_perturbation(h, cfg.c1, h_rows[1].seed)?;
            let pd = q.perturb(big.matrix.as_ref(), delta)?;
            let count = count_in_region(&numerics::eigenvalues(pd.as_ref())?, &region).0;
            if count != h_rows[1].count {
                flags.push(format!("truncation_sensitive: h = {h}: {} at K = {k}, {count} at K = {k2}", h_rows[1].count));
            }
            Some((h_rows[1].count, count))
        } else {
            None
        };
        let acc = summarize(h, k, prediction, cfg.c_cal, h_rows, baseline, truncation_counts, max_trace_defect);
        rows.extend(acc.rows);
        summaries.push(acc.summary);
    }
    Ok(WeylResult { rows, summaries, c_cal: cfg.c_cal, flags })
}

// ---------------------------------------------------------------------------
// two-dimensional torus demo

/// `V(x) = Σ c_m e^{i m·x}` on `T²`.
#[derive(Clone, Debug, PartialEq)]
pub struct TorusPotential {
    pub terms: Vec<((i64, i64), c64)>,
}

impl TorusPotential {
    /// `V = i(cos x₁ + cos x₂)`.
    pub fn cos_sum() -> Self {
        let c = c64::new(0.0, 0.5);
        Self { terms: vec![((1, 0), c), ((-1, 0), c), ((0, 1), c), ((0, -1), c)] }
    }

    pub fn eval(&self, x1: f64, x2: f64) -> c64 {
        self.terms
            .iter()
            .map(|&((a, b), c)| c * c64::from_polar(1.0, a as f64 * x1 + b as f64 * x2))
            .sum()
    }

    /// `V(−x) = V(x)`.
    pub fn is_even(&self) -> bool {
        self.terms.iter().all(|&((a, b), c)| {
            let mirror: c64 = self.terms.iter().filter(|t| t.0 == (-a, -b)).map(|t| t.1).sum();
            let own: c64 = self.terms.iter().filter(|t| t.0 == (a, b)).map(|t| t.1).sum();
            (mirror - own).norm() <= 1e-14 * c.norm().max(1.0)
        })
    }

    pub fn bandwidth(&self) -> i64 {
        self.terms.iter().map(|t| t.0 .0.abs().max(t.0 .1.abs())).max().unwrap_or(0)
    }
}

fn torus_index(k2: usize, a: i64, b: i64) -> usize {
    let n = 2 * k2 as i64 + 1;
    ((a + k2 as i64) * n + (b + k2 as i64)) as usize
}

/// `−h²Δ + V` in the basis `e^{i(a x₁ + b x₂)}`, `|a|, |b| ≤ K₂`, row-major in `(a, b)`.
pub fn torus_operator(v: &TorusPotential, h: f64, k2: usize) -> Mat<c64> {
    let n = 2 * k2 + 1;
    let kk = k2 as i64;
    let mut m = Mat::<c64>::zeros(n * n, n * n);
    for a in -kk..=kk {
        for b in -kk..=kk {
            let i = torus_index(k2, a, b);
            m[(i, i)] += c64::new(h * h * (a * a + b * b) as f64, 0.0);
            for &((da, db), c) in &v.terms {
                let (ra, rb) = (a + da, b + db);
                if ra.abs() <= kk && rb.abs() <= kk {
                    m[(torus_index(k2, ra, rb), i)] += c;
                }
            }
        }
    }
    m
}

/// Multiplication by `Σ_{|m| ≤ L/h} α_m e^{i m·x}` on the same truncation.
pub fn torus_perturbation(h: f64, l: f64, k2: usize, seed: u64) -> Mat<c64> {
    let r = l / h;
    let rm = r.floor() as i64;
    let mut rng = rng::stream(seed, &[label("torus-perturbation")]);
    let mut coeffs = Vec::new();
    for a in -rm..=rm {
        for b in -rm..=rm {
            if ((a * a + b * b) as f64).sqrt() <= r {
                coeffs.push(((a, b), rng::complex_normal(&mut rng)));
            }
        }
    }
    torus_operator(&TorusPotential { terms: coeffs }, 0.0, k2)
}

/// Length of `{t ≥ 0 : t + w ∈ Γ}`.
fn ray_length(region: &RegionSpec, w: c64) -> f64 {
    let v = region.vertices();
    let n = v.len();
    let y = w.im;
    let mut xs: Vec<f64> = Vec::new();
    for i in 0..n {
        let (p, q) = (v[i], v[(i + 1) % n]);
        if (p.im <= y) != (q.im <= y) {
            xs.push(p.re + (y - p.im) * (q.re - p.re) / (q.im - p.im));
        }
    }
    xs.sort_by(f64::total_cmp);
    xs.chunks(2)
        .filter(|c| c.len() == 2)
        .map(|c| (c[1] - w.re).max(0.0) - (c[0] - w.re).max(0.0))
        .sum()
}

/// `vol{(x, ξ) ∈ T*T² : |ξ|² + V(x) ∈ Γ}`: midpoint rule in `x`, exact in `ξ`
/// (the `ξ`-area of `{r² ∈ I}` is `π|I|`).
pub fn torus_volume(v: &TorusPotential, region: &RegionSpec, resolution: usize) -> f64 {
    let n = resolution.max(4);
    let dx = 2.0 * PI / n as f64;
    let rows: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let x1 = (i as f64 + 0.5) * dx;
            (0..n).map(|j| PI * ray_length(region, v.eval(x1, (j as f64 + 0.5) * dx))).sum::<f64>()
        })
        .collect();
    rows.iter().sum::<f64>() * dx * dx
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Torus2dConfig {
    /// Only `"cos_sum"` is built in.
    pub potential: String,
    pub h: f64,
    pub k2: usize,
    pub region: RegionConfig,
    pub delta_exponent: f64,
    /// Perturbation modes `|m| ≤ L/h`.
    pub cutoff_l: f64,
    pub trials: usize,
    pub seed: u64,
    pub ring_factor: f64,
    pub volume_resolution: usize,
    pub c_cal: f64,
}

impl Default for Torus2dConfig {
    fn default() -> Self {
        Self {
            potential: "cos_sum".into(),
            h: 0.15,
            k2: 10,
            region: RegionConfig::rectangle(0.5, 1.5, -0.5, 0.5),
            delta_exponent: 4.0,
            cutoff_l: 1.0,
            trials: 10,
            seed: 0,
            ring_factor: 0.0,
            volume_resolution: 800,
            c_cal: 1.0,
        }
    }
}

pub const MAX_TORUS_K: usize = 12;

/// Perturbed eigenvalue counts of `−h²Δ + V` on `T²` against
/// `vol/(2πh)²`. A consistency demo: the asymptotic rates are out of reach at
/// this size.
pub fn torus2d_demo(cfg: &Torus2dConfig) -> Result<WeylResult> {
    let v = match cfg.potential.as_str() {
        "cos_sum" => TorusPotential::cos_sum(),
        other => return Err(Error::InvalidInput(format!("potential: unknown potential '{other}'"))),
    };
    if !v.is_even() {
        return Err(Error::Hypothesis("potential must be even for the symmetry assumption".into()));
    }
    if cfg.k2 > MAX_TORUS_K {
        return Err(Error::DimensionTooLarge { dim: (2 * cfg.k2 + 1).pow(2), max: (2 * MAX_TORUS_K + 1).pow(2) });
    }
    if !(cfg.h > 0.0) || cfg.trials < 1 || !(cfg.delta_exponent > 0.0) {
        return Err(Error::InvalidInput("need h > 0, trials >= 1, delta_exponent > 0".into()));
    }
    let h = cfg.h;
    let region = cfg.region.build()?.with_tolerance(cfg.ring_factor * h);
    let volume = torus_volume(&v, &cfg.region.build()?, cfg.volume_resolution);
    let prediction = volume / (2.0 * PI * h).powi(2);
    let delta = h.powf(cfg.delta_exponent);
    let epsilon = h * (1.0 / delta).ln();
    let bound_scale = epsilon.sqrt() / h;
    let p = torus_operator(&v, h, cfg.k2);
    let baseline = count_in_region(&numerics::eigenvalues(p.as_ref())?, &region);
    let mut rows = vec![WeylRow {
        h,
        delta: 0.0,
        trial: 0,
        count: baseline.0,
        ring_count: baseline.1,
        prediction,
        epsilon,
        bound_scale,
        seed: 0,
    }];
    let trials: Vec<(WeylRow, f64)> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| {
            let seed = rng::derive_seed(cfg.seed, &[label("torus"), h.to_bits(), t as u64]);
            let q = torus_perturbation(h, cfg.cutoff_l, cfg.k2, seed);
            let pd = Mat::from_fn(p.nrows(), p.ncols(), |i, j| p[(i, j)] + q[(i, j)] * delta);
            let eigs = numerics::eigenvalues(pd.as_ref())?;
            let (count, ring_count) = count_in_region(&eigs, &region);
            Ok((WeylRow { h, delta, trial: t, count, ring_count, prediction, epsilon, bound_scale, seed }, trace_defect(pd.as_ref(), &eigs)))
        })
        .collect::<Result<_>>()?;
    let max_trace_defect = trials.iter().map(|t| t.1).fold(0.0, f64::max);
    rows.extend(trials.into_iter().map(|t| t.0));
    let acc = summarize(h, cfg.k2, prediction, cfg.c_cal, rows, baseline, None, max_trace_defect);
    Ok(WeylResult {
        rows: acc.rows,
        summaries: vec![acc.summary],
        c_cal: cfg.c_cal,
        flags: vec!["consistency_demo: asymptotic rates not reproducible at this size".into()],
    })
}
