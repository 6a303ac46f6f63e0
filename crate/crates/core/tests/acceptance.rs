//! Acceptance gate: one PASS/FAIL line per criterion.
//!
//! Run with `cargo test -p pslab --test acceptance`. Set `ACCEPTANCE_ONLY=1,4`
//! to run a subset.

use std::f64::consts::{FRAC_PI_4, PI};
use std::time::Instant;

use faer::Mat;
use pslab::boundary::{self, boundary_curve, build_rotated_oscillator, rescaling_check};
use pslab::grushin::{self, effective_function, effective_function_matrix, Gauge};
use pslab::numerics;
use pslab::pseudospectrum::{instability_witness_matrix, scan, scan_matrix, ZGrid};
use pslab::quasimode::{build_quasimode, find_crossings, residual};
use pslab::random_weyl::{
    effective_variance, run_weyl_experiment, sample_perturbation, tail_bound, torus2d_demo, ExperimentConfig,
    Torus2dConfig,
};
use pslab::rng::{self, label};
use pslab::stats;
use pslab::symbol::{assemble, PeriodicFunction, Symbol1D};
use pslab::zero_count::{argument_count, ContourSpec, LatticeFamily, LATTICE_C_CAL};
use pslab::c64;

type Check = Result<(bool, String), String>;

fn fail<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

// ---------------------------------------------------------------------------

fn weyl_monte_carlo() -> Check {
    let mut medians = Vec::new();
    let mut notes = Vec::new();
    let mut ok = true;
    for (h, trials) in [(0.02, 20), (0.01, 20), (0.005, 5)] {
        let cfg = ExperimentConfig { h_list: vec![h], trials, seed: 2024, ..ExperimentConfig::default() };
        let r = run_weyl_experiment(&cfg).map_err(fail)?;
        let s = &r.summaries[0];
        // vol p⁻¹(Γ) = 2·|{x : |sin x| < ½}| = 4π/3
        let closed = (4.0 * PI / 3.0) / (2.0 * PI * h);
        if (s.prediction - closed).abs() > 1e-2 * closed {
            ok = false;
            notes.push(format!("h={h}: quadrature prediction {:.2} vs closed form {closed:.2}", s.prediction));
        }
        let counts: Vec<f64> = r.rows.iter().filter(|row| row.delta > 0.0).map(|row| row.count as f64).collect();
        let rel: Vec<f64> = counts.iter().map(|c| (c - closed).abs() / closed).collect();
        let med = stats::median(&rel);
        let perturbed_dev = med * closed;
        let baseline_dev = (s.baseline_count as f64 - closed).abs();
        if baseline_dev < 3.0 * perturbed_dev {
            ok = false;
        }
        if let Some((a, b)) = s.truncation_counts {
            if a != b {
                notes.push(format!("h={h}: 1.5K count {b} vs {a}"));
            }
        }
        notes.push(format!(
            "h={h}: pred {closed:.1}, median count {:.0}, median rel dev {med:.3}, baseline {} (contrast {:.1}x)",
            stats::median(&counts),
            s.baseline_count,
            baseline_dev / perturbed_dev.max(1e-300)
        ));
        medians.push(med);
    }
    ok &= medians[0] <= 0.25;
    ok &= medians.windows(2).all(|w| w[1] <= w[0]);
    Ok((ok, notes.join("; ")))
}

fn quasimode_decay() -> Check {
    let g = PeriodicFunction::from_fn(4, |x| c64::from_polar(1.0, x));
    let sym = Symbol1D::first_order(g.clone(), true);
    let z = c64::new(0.0, 0.5);
    let radius = find_crossings(&g, z).map_err(fail)?.wide_cutoff_radius();
    let hs = [0.1, 0.05, 0.025, 0.0125];
    let mut res = Vec::new();
    let mut smin_ok = true;
    for &h in &hs {
        let op = assemble(&sym, h, (8.0 / h) as usize).map_err(fail)?;
        let qm = build_quasimode(&g, z, h, Some(radius)).map_err(fail)?;
        let r = residual(&op, &qm).map_err(fail)?;
        let s = numerics::smallest_singular(numerics::shifted(op.matrix.as_ref(), z).as_ref()).map_err(fail)?.s_min;
        smin_ok &= s <= r;
        res.push(r);
    }
    let ratios: Vec<f64> = res.windows(2).map(|w| w[1] / w[0]).collect();
    let inv_h: Vec<f64> = hs.iter().map(|h| 1.0 / h).collect();
    let logs: Vec<f64> = res.iter().map(|r| r.ln()).collect();
    let fit = stats::linear_fit(&inv_h, &logs);
    let ok = ratios.iter().all(|&q| q < 0.2) && fit.r_squared >= 0.95 && smin_ok;
    Ok((
        ok,
        format!(
            "residuals {:.2e}; ratios {:.3e}; R^2 {:.4}; s_min <= residual: {smin_ok}",
            Sci(&res),
            Sci(&ratios),
            fit.r_squared
        ),
    ))
}

fn grushin_identities() -> Check {
    let sym = Symbol1D::exp_ix();
    // |E₋₊| = t₀ = s_min on a grid where t₀ is resolvable
    let op = assemble(&sym, 0.1, 40).map_err(fail)?;
    let grid = ZGrid::new((-1.0, 1.0), (0.6, 1.4), 20, 20).map_err(fail)?;
    let rows = grushin::grushin_map(&op, &grid, &Gauge::LargestEntry);
    let mut worst_emp = 0.0f64;
    let mut worst_svd = 0.0f64;
    for (idx, r) in rows.iter().enumerate() {
        let d = r.as_ref().map_err(|e| e.to_string())?;
        let z = grid.node(idx % grid.nx, idx / grid.nx);
        let s = numerics::smallest_singular(numerics::shifted(op.matrix.as_ref(), z).as_ref()).map_err(fail)?.s_min;
        worst_emp = worst_emp.max((d.e_mp.unwrap().norm() - d.t0).abs() / d.t0);
        worst_svd = worst_svd.max((s - d.t0).abs() / s);
    }
    let grid_ok = worst_emp <= 1e-8 && worst_svd <= 1e-8;

    // argument principle around eigenvalues of a perturbed operator
    let h = 0.05;
    let op = assemble(&sym, h, 80).map_err(fail)?;
    let q = sample_perturbation(h, 2.0, 77).map_err(fail)?;
    let pd = q.perturb(op.matrix.as_ref(), h.powi(4)).map_err(fail)?;
    let eigs = numerics::eigenvalues(pd.as_ref()).map_err(fail)?;
    let mut isolated: Vec<(c64, f64)> = eigs
        .iter()
        .filter(|l| l.re.abs() < 1.0 && l.im.abs() < 0.5)
        .map(|&l| {
            let gap = eigs.iter().filter(|m| **m != l).map(|m| (m - l).norm()).fold(f64::INFINITY, f64::min);
            (l, gap)
        })
        .collect();
    isolated.sort_by(|a, b| b.1.total_cmp(&a.1));
    isolated.truncate(10);
    let mut matches = 0;
    for &(lambda, gap) in &isolated {
        let r = 0.4 * gap;
        let gauge = Gauge::frozen_at(pd.as_ref(), lambda).map_err(fail)?;
        let f = pslab::zero_count::Fallible(|z: c64| {
            effective_function_matrix(pd.as_ref(), z, &gauge).map(|d| d.e_mp.unwrap())
        });
        let count = argument_count(&f, &ContourSpec::circle(lambda, r, 48)).map_err(fail)?.count;
        let eig_count = eigs.iter().filter(|m| (*m - lambda).norm() < r).count() as i64;
        if count == eig_count {
            matches += 1;
        }
    }
    let count_ok = isolated.len() == 10 && matches == 10;

    // t₁(0.5i)/√h across h
    let mut ratios = Vec::new();
    for h in [0.1, 0.05, 0.025] {
        let op = assemble(&sym, h, (4.0 / h) as usize).map_err(fail)?;
        let d = grushin::singular_pair(&op, c64::new(0.0, 0.5), &Gauge::LargestEntry).map_err(fail)?;
        ratios.push(d.t1 / h.sqrt());
    }
    let (lo, hi) = (ratios.iter().cloned().fold(f64::INFINITY, f64::min), ratios.iter().cloned().fold(0.0, f64::max));
    let band_ok = hi / lo < 2.0 && lo > 0.0;
    Ok((
        grid_ok && count_ok && band_ok,
        format!(
            "max rel ||E-+|-t0| {worst_emp:.1e}, |t0-s_min| {worst_svd:.1e}; winding = eig count {matches}/10; t1/sqrt(h) {:.3}",
            Sci(&ratios)
        ),
    ))
}

fn dbar_identity() -> Check {
    let op = assemble(&Symbol1D::exp_ix(), 0.1, 40).map_err(fail)?;
    let z = c64::new(0.1, 0.8);
    let a = grushin::dbar_residual(&op, z, 1e-3).map_err(fail)?;
    let b = grushin::dbar_residual(&op, z, 5e-4).map_err(fail)?;
    let dbar_ok = a.relative_residual() <= 0.05 && b.identity_residual <= 0.5 * a.identity_residual;

    let sym = Symbol1D::exp_ix();
    let zc = c64::new(0.0, 0.5);
    let mut sides = Vec::new();
    for h in [0.05, 0.025] {
        let op = assemble(&sym, h, (4.0 / h) as usize).map_err(fail)?;
        sides.push(grushin::symplectic_density_check(&op, &sym, zc, 1e-2).map_err(fail)?);
    }
    let lhs_ratio = sides[1].lhs / sides[0].lhs;
    let rhs_ratio = sides[1].rhs / sides[0].rhs;
    let density_ok = (lhs_ratio / 2.0 - 1.0).abs() <= 0.15 && (rhs_ratio / 2.0 - 1.0).abs() <= 0.15;
    Ok((
        dbar_ok && density_ok,
        format!(
            "rel residual {:.2e} at 1e-3, halving ratio {:.3}; lhs {:.2}/{:.2} (x{lhs_ratio:.3}), rhs {:.2}/{:.2} (x{rhs_ratio:.3})",
            a.relative_residual(),
            b.identity_residual / a.identity_residual,
            sides[0].lhs,
            sides[1].lhs,
            sides[0].rhs,
            sides[1].rhs
        ),
    ))
}

fn probabilistic_lemmas() -> Check {
    // tail bound against 10⁵ samples of Σ|X_j|²
    let mut rng = rng::stream(5, &[label("acceptance-tail")]);
    let mut tail_ok = true;
    for sigmas in [vec![1.0; 5], vec![1.0, 0.5, 2.0, 0.25, 1.5]] {
        let samples: Vec<f64> = (0..100_000)
            .map(|_| sigmas.iter().map(|s| (rng::complex_normal(&mut rng) * *s).norm_sqr()).sum())
            .collect();
        for x in [0.0, 2.0, 5.0, 10.0, 15.0, 20.0, 30.0, 40.0] {
            let emp = samples.iter().filter(|v| **v >= x).count() as f64 / samples.len() as f64;
            tail_ok &= emp <= tail_bound(&sigmas, x);
        }
    }

    // HS-norm event
    let (h, c1): (f64, f64) = (0.05, 2.0);
    let n_c = (c1 / h).floor();
    let hits = (0..500u64)
        .filter(|&s| {
            sample_perturbation(h, c1, rng::derive_seed(9, &[label("hs"), s])).unwrap().hs_norm
                <= 1.2 * (2.0 * n_c + 1.0)
        })
        .count();
    let freq = hits as f64 / 500.0;

    // effective variance and the Gaussian E₋QE₊
    let op = assemble(&Symbol1D::exp_ix(), h, 80).map_err(fail)?;
    let z = c64::new(0.0, 0.5);
    let sigma2 = effective_variance(&op, z, c1).map_err(fail)?;
    let d = effective_function(&op, z, &Gauge::LargestEntry).map_err(fail)?;
    let values: Vec<f64> = (0..2000u64)
        .map(|s| {
            let q = sample_perturbation(h, c1, rng::derive_seed(13, &[label("sandwich"), s])).unwrap();
            q.sandwich(&d.e_minus, &d.e_plus).norm_sqr()
        })
        .collect();
    let emp_var = stats::mean(&values);
    let ok = tail_ok && freq >= 0.99 && (0.99..=1.0).contains(&sigma2) && (emp_var / sigma2 - 1.0).abs() <= 0.05;
    Ok((
        ok,
        format!(
            "tail bound respected: {tail_ok}; HS event freq {freq:.3}; sigma^2 {sigma2:.12}; empirical variance {emp_var:.4}"
        ),
    ))
}

fn zero_counting() -> Check {
    let unit = ContourSpec::circle(c64::new(0.0, 0.0), 1.0, 128);
    let roots = [c64::new(0.2, 0.1), c64::new(-0.5, 0.4), c64::new(0.1, -0.7), c64::new(1.4, 0.2), c64::new(0.0, -1.6)];
    let poly = |z: c64| roots.iter().map(|r| z - r).product::<c64>();
    let expo = |z: c64| (z.exp() - 1.0) * (z - c64::new(0.3, 0.3));
    let entire = |z: c64| poly(z) * (c64::new(2.0, -1.0) * z * z + 3.0 * z).exp();
    let c_poly = argument_count(&poly, &unit).map_err(fail)?.count;
    let c_expo = argument_count(&expo, &unit).map_err(fail)?.count;
    let c_entire = argument_count(&entire, &unit).map_err(fail)?.count;
    let fixtures_ok = c_poly == 3 && c_expo == 2 && c_entire == 3;

    let mut lattice_ok = true;
    let mut notes = Vec::new();
    for h in [0.04, 0.02, 0.01] {
        let fam = LatticeFamily::new(h);
        let r = fam.verify(LATTICE_C_CAL).map_err(fail)?;
        let w = r.weyl_compare.clone().unwrap();
        let good = r.count as usize == fam.zeros_inside() && w.deviation <= w.bound && r.flags.is_empty();
        lattice_ok &= good;
        notes.push(format!("h={h}: count {} mass {:.2} dev {:.2} <= {:.2}", r.count, w.mass, w.deviation, w.bound));
        let fam_e = |z: c64| fam.eval(z) * (c64::new(0.5, 2.0) * z).exp();
        let contour = ContourSpec::new(fam.region.boundary_points(0.5 * h.sqrt()));
        lattice_ok &= argument_count(&fam_e, &contour).map_err(fail)?.count == r.count;
    }
    Ok((
        fixtures_ok && lattice_ok,
        format!("fixtures {c_poly}/{c_expo}/{c_entire} (expect 3/2/3); C_cal {LATTICE_C_CAL}; {}", notes.join("; ")),
    ))
}

fn boundary_resolvent() -> Check {
    let q = build_rotated_oscillator(256).map_err(fail)?;
    let coarse = build_rotated_oscillator(128).map_err(fail)?.eigenvalues().map_err(fail)?;
    let fine = q.eigenvalues().map_err(fail)?;
    let mut converged = 0;
    let mut worst_arg = 0.0f64;
    for k in 0..=20 {
        if (coarse[k] - fine[k]).norm() > 1e-6 {
            break;
        }
        converged += 1;
        worst_arg = worst_arg.max((fine[k].arg() - FRAC_PI_4).abs());
    }
    let ray_ok = converged == 21 && worst_arg <= 1e-6;

    let lambdas = [10.0, 20.0, 40.0, 80.0];
    let scan_op = build_rotated_oscillator(240).map_err(fail)?;
    let mut norms = Vec::new();
    for &l in &lambdas {
        let c = boundary::resolvent_scan(&scan_op, &[l], &[boundary_curve(l)], boundary::DEFAULT_GUARD).map_err(fail)?;
        norms.push(c[0].norm);
    }
    let slope = stats::linear_fit(
        &lambdas.iter().map(|l: &f64| l.ln()).collect::<Vec<_>>(),
        &norms.iter().map(|n| n.ln()).collect::<Vec<_>>(),
    )
    .slope;
    let c = boundary::resolvent_scan(&scan_op, &[40.0], &[20.0, 40f64.cbrt()], boundary::DEFAULT_GUARD).map_err(fail)?;
    let contrast = c[0].norm / c[1].norm;

    let mut gaps = Vec::new();
    for mu in [0.0, 3.0] {
        gaps.push(rescaling_check(20.0, mu, 80, 400).map_err(fail)?.relative_gap());
    }
    let ok = ray_ok && slope <= 3.0 && contrast >= 1e3 && gaps.iter().all(|g| *g <= 0.02);
    Ok((
        ok,
        format!(
            "{converged} converged eigenvalues, max |arg - pi/4| {worst_arg:.1e}; slope {slope:.3}; contrast {contrast:.3e}; rescaling gaps {:.1e}",
            Sci(&gaps)
        ),
    ))
}

fn pseudospectrum_oracle() -> Check {
    // normal operators: diagonal symbol and a random unitary conjugation
    let sym = Symbol1D::first_order(PeriodicFunction::constant(c64::new(0.3, -0.2), 4), true);
    let op = assemble(&sym, 0.1, 20).map_err(fail)?;
    let grid = ZGrid::new((-1.0, 1.0), (-0.7, 0.5), 25, 19).map_err(fail)?;
    let field = scan(&op, &grid);
    let mut worst: f64 = 0.0;
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            let z = grid.node(i, j);
            let dist = (-20..=20)
                .map(|k| (c64::new(0.1 * k as f64 + 0.3, -0.2) - z).norm())
                .fold(f64::INFINITY, f64::min);
            worst = worst.max((field.value(i, j) - dist).abs());
        }
    }
    let mut rng = rng::stream(21, &[label("acceptance-normal")]);
    let n = 24;
    let g = Mat::from_fn(n, n, |_, _| rng::complex_normal(&mut rng));
    let qr = g.qr();
    let u = qr.compute_Q();
    let spectrum: Vec<c64> = (0..n).map(|_| rng::complex_normal(&mut rng)).collect();
    let d = Mat::from_fn(n, n, |i, j| if i == j { spectrum[i] } else { c64::new(0.0, 0.0) });
    let normal = &u * &d * u.adjoint();
    let grid2 = ZGrid::new((-1.5, 1.5), (-1.5, 1.5), 15, 15).map_err(fail)?;
    let f2 = scan_matrix(normal.as_ref(), &grid2);
    for j in 0..grid2.ny {
        for i in 0..grid2.nx {
            let z = grid2.node(i, j);
            let dist = spectrum.iter().map(|l| (l - z).norm()).fold(f64::INFINITY, f64::min);
            worst = worst.max((f2.value(i, j) - dist).abs());
        }
    }

    let mut worst_witness: f64 = 0.0;
    for t in 0..50u64 {
        let mut r = rng::stream(33, &[label("witness"), t]);
        let n = 10 + (t as usize % 30);
        let p = Mat::from_fn(n, n, |_, _| rng::complex_normal(&mut r));
        let z = rng::complex_normal(&mut r) * 2.0;
        let w = instability_witness_matrix(p.as_ref(), z).map_err(fail)?;
        let pq = Mat::from_fn(n, n, |i, j| p[(i, j)] + w.q[(i, j)] - if i == j { z } else { c64::new(0.0, 0.0) });
        let res = numerics::norm(&numerics::mat_vec(pq.as_ref(), &w.eigenvector));
        worst_witness = worst_witness.max(res / numerics::frobenius(p.as_ref()));
    }
    Ok((
        worst <= 1e-10 && worst_witness <= 1e-10,
        format!("max |s_min - dist| {worst:.1e}; max witness residual / ||P||_F {worst_witness:.1e}"),
    ))
}

fn torus_demo() -> Check {
    let cfg = Torus2dConfig { trials: 12, seed: 99, ..Torus2dConfig::default() };
    let r = torus2d_demo(&cfg).map_err(fail)?;
    let s = &r.summaries[0];
    let counts: Vec<f64> = r.rows.iter().filter(|row| row.delta > 0.0).map(|row| row.count as f64).collect();
    let med = stats::median(&counts);
    let rel = (med - s.prediction).abs() / s.prediction;
    Ok((
        rel <= 0.35,
        format!(
            "consistency demo: prediction {:.1}, median count {med:.0} (rel dev {rel:.3}), counts {:.0}..{:.0}; delta=0 baseline {}",
            s.prediction,
            counts.iter().cloned().fold(f64::INFINITY, f64::min),
            counts.iter().cloned().fold(0.0, f64::max),
            s.baseline_count
        ),
    ))
}

// ---------------------------------------------------------------------------

struct Sci<'a>(&'a [f64]);

impl std::fmt::LowerExp for Sci<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self
            .0
            .iter()
            .map(|v| match f.precision() {
                Some(p) => format!("{v:.p$e}"),
                None => format!("{v:e}"),
            })
            .collect();
        write!(f, "[{}]", parts.join(", "))
    }
}

impl std::fmt::Display for Sci<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let p = f.precision().unwrap_or(3);
        let parts: Vec<String> = self.0.iter().map(|v| format!("{v:.p$}")).collect();
        write!(f, "[{}]", parts.join(", "))
    }
}

fn main() {
    let criteria: [(&str, fn() -> Check); 9] = [
        ("weyl-law monte carlo", weyl_monte_carlo),
        ("quasimode decay", quasimode_decay),
        ("grushin identities", grushin_identities),
        ("d-bar identity and symplectic density", dbar_identity),
        ("probabilistic lemmas", probabilistic_lemmas),
        ("zero counting", zero_counting),
        ("boundary resolvent", boundary_resolvent),
        ("pseudospectrum oracle", pseudospectrum_oracle),
        ("2-d torus demo", torus_demo),
    ];
    let only: Option<Vec<usize>> =
        std::env::var("ACCEPTANCE_ONLY").ok().map(|s| s.split(',').filter_map(|t| t.trim().parse().ok()).collect());
    let mut failures = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let n = i + 1;
        if only.as_ref().is_some_and(|o| !o.contains(&n)) {
            continue;
        }
        let start = Instant::now();
        let (pass, detail) = match check() {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            failures += 1;
        }
        println!(
            "criterion {n} [{name}]: {} ({detail}) [{:.1} s]",
            if pass { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64()
        );
    }
    if failures > 0 {
        println!("acceptance: {failures} criterion(s) failed");
        std::process::exit(1);
    }
    println!("acceptance: all criteria passed");
}
