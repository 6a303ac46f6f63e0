//! One function per subcommand. Each writes its files into the output
//! directory and returns the resolved section for the manifest.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;
use toml::Value;

use pslab::boundary::{build_rotated_oscillator, rescaling_check, resolvent_scan, write_scan_csv};
use pslab::grushin::{dbar_residual, grushin_map, symplectic_density_check, write_map_csv, Gauge};
use pslab::pseudospectrum::{level_contours, scan, write_svg, ZGrid};
use pslab::quasimode::{build_quasimode, find_crossings, residual};
use pslab::random_weyl::{run_weyl_experiment, tail_bound, torus2d_demo, WeylResult};
use pslab::rng::{self, label};
use pslab::symbol::{assemble, Symbol1D};
use pslab::zero_count::{argument_count, ContourSpec, LatticeFamily};
use pslab::{c64, Error, ErrorCategory};

use crate::config::{ConfigError, GridConfig, RadiusChoice, RunConfig};
use crate::manifest::OutputDir;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Core(Error),
    Io(std::io::Error),
    /// Replay produced different bytes.
    Mismatch(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 1,
            CliError::Core(e) => match e.category() {
                ErrorCategory::Config => 1,
                ErrorCategory::Numeric => 2,
                ErrorCategory::Hypothesis => 3,
            },
            CliError::Mismatch(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Io(e) => write!(f, "i/o error: {e}"),
            CliError::Mismatch(m) => write!(f, "replay mismatch: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.0)
    }
}

type Outcome = Result<Value, CliError>;

/// Subcommand names and their config sections.
pub const SUBCOMMANDS: &[(&str, &str)] = &[
    ("pseudospec", "pseudospec"),
    ("quasimode", "quasimode"),
    ("grushin-map", "grushin_map"),
    ("dbar-check", "dbar_check"),
    ("weyl-mc", "weyl_mc"),
    ("weyl-2d", "weyl_2d"),
    ("zero-count", "zero_count"),
    ("hager-verify", "hager_verify"),
    ("resolvent-scan", "resolvent_scan"),
    ("rescale-check", "rescale_check"),
    ("tail-bound-mc", "tail_bound_mc"),
];

pub fn section_of(subcommand: &str) -> Option<&'static str> {
    SUBCOMMANDS.iter().find(|(name, _)| *name == subcommand).map(|(_, s)| *s)
}

/// Seed handed to a subcommand. The top bit is dropped so that the value
/// fits a TOML integer.
pub fn module_seed(master: u64, subcommand: &str) -> u64 {
    rng::derive_seed(master, &[label(subcommand)]) >> 1
}

fn section<T: Serialize>(cfg: &T) -> Outcome {
    Value::try_from(cfg).map_err(|e| CliError::Config(format!("cannot serialize section: {e}")))
}

fn zgrid(g: &GridConfig) -> Result<ZGrid, CliError> {
    Ok(ZGrid::new((g.re[0], g.re[1]), (g.im[0], g.im[1]), g.nx, g.ny)?)
}

fn z_of(p: [f64; 2]) -> c64 {
    c64::new(p[0], p[1])
}

fn potential(symbol: &Symbol1D) -> Result<&pslab::symbol::PeriodicFunction, CliError> {
    symbol
        .first_order_potential()
        .ok_or_else(|| CliError::Config("this subcommand needs a symbol of the form xi + g(x)".into()))
}

pub fn run(subcommand: &str, cfg: &RunConfig, seed: u64, out: &mut OutputDir) -> Outcome {
    match subcommand {
        "pseudospec" => pseudospec(cfg, out),
        "quasimode" => quasimode(cfg, out),
        "grushin-map" => grushin_map_cmd(cfg, out),
        "dbar-check" => dbar_check(cfg, out),
        "weyl-mc" => weyl_mc(cfg, module_seed(seed, subcommand), out),
        "weyl-2d" => weyl_2d(cfg, module_seed(seed, subcommand), out),
        "zero-count" => zero_count(cfg, out),
        "hager-verify" => hager_verify(cfg, out),
        "resolvent-scan" => scan_cmd(cfg, out),
        "rescale-check" => rescale_check(cfg, out),
        "tail-bound-mc" => tail_bound_mc(cfg, module_seed(seed, subcommand), out),
        other => Err(CliError::Config(format!("unknown subcommand '{other}'"))),
    }
}

fn pseudospec(cfg: &RunConfig, out: &mut OutputDir) -> Outcome {
    let c = &cfg.pseudospec;
    let op = assemble(&c.symbol.build()?, c.h, c.k)?;
    let field = scan(&op, &zgrid(&c.grid)?);
    if !field.failed.is_empty() {
        eprintln!("warning: {} grid nodes failed and are written as NaN", field.failed.len());
    }
    let contours = level_contours(&field, &c.eps);
    out.write("pseudospec.csv", |w| field.write_csv(w))?;
    out.write("contours.csv", |w| {
        writeln!(w, "eps,line,point,re,im,closed")?;
        for set in &contours {
            for (l, line) in set.polylines.iter().enumerate() {
                for (p, z) in line.points.iter().enumerate() {
                    writeln!(w, "{:e},{l},{p},{:e},{:e},{}", set.eps, z.re, z.im, line.closed)?;
                }
            }
        }
        Ok(())
    })?;
    out.write("contours.svg", |w| write_svg(&field.grid, &contours, c.svg_width, w))?;
    section(c)
}

fn quasimode(cfg: &RunConfig, out: &mut OutputDir) -> Outcome {
    let c = &cfg.quasimode;
    if c.h_list.is_empty() {
        return Err(CliError::Config("quasimode.h_list is empty".into()));
    }
    let symbol = c.symbol.build()?;
    let g = potential(&symbol)?;
    let z = z_of(c.z);
    let radius = match &c.radius {
        RadiusChoice::Named(n) if n == "default" => None,
        RadiusChoice::Named(n) if n == "wide" => Some(find_crossings(g, z)?.wide_cutoff_radius()),
        RadiusChoice::Named(n) => return Err(CliError::Config(format!("quasimode.radius: unknown choice '{n}'"))),
        RadiusChoice::Value(r) => Some(*r),
    };
    let mut rows = Vec::new();
    let mut last = None;
    for &h in &c.h_list {
        let k = (c.k_factor / h).ceil() as usize;
        let op = assemble(&symbol, h, k)?;
        let qm = build_quasimode(g, z, h, radius)?;
        rows.push((h, k, qm.cutoff_radius, residual(&op, &qm)?));
        last = Some(qm);
    }
    out.write("residuals.csv", |w| {
        writeln!(w, "h,k,cutoff_radius,residual")?;
        for (h, k, r, res) in &rows {
            writeln!(w, "{h},{k},{r:e},{res:e}")?;
        }
        Ok(())
    })?;
    let qm = last.expect("h_list is non-empty");
    out.write("profile.csv", |w| qm.write_csv(w))?;
    out.write("profile.svg", |w| qm.write_svg(640.0, 320.0, w))?;
    section(c)
}

fn grushin_map_cmd(cfg: &RunConfig, out: &mut OutputDir) -> Outcome {
    let c = &cfg.grushin_map;
    let op = assemble(&c.symbol.build()?, c.h, c.k)?;
    let grid = zgrid(&c.grid)?;
    let rows = grushin_map(&op, &grid, &Gauge::LargestEntry);
    let failed = rows.iter().filter(|r| r.is_err()).count();
    if failed > 0 {
        eprintln!("warning: {failed} grid nodes failed");
    }
    out.write("grushin_map.csv", |w| write_map_csv(&grid, &rows, w))?;
    section(c)
}

fn dbar_check(cfg: &RunConfig, out: &mut OutputDir) -> Outcome {
    let c = &cfg.dbar_check;
    let symbol = c.symbol.build()?;
    let op = assemble(&symbol, c.h, c.k)?;
    let mut samples = Vec::new();
    for &p in &c.points {
        for &step in &c.steps {
            samples.push(dbar_residual(&op, z_of(p), step)?);
        }
    }
    out.write("dbar.csv", |w| {
        writeln!(w, "re,im,step,e_mp_re,e_mp_im,residual,relative")?;
        for s in &samples {
            writeln!(
                w,
                "{:e},{:e},{:e},{:e},{:e},{:e},{:e}",
                s.z.re,
                s.z.im,
                s.step,
                s.e_mp.re,
                s.e_mp.im,
                s.identity_residual,
                s.relative_residual()
            )?;
        }
        Ok(())
    })?;
    match c.density_point.as_slice() {
        [] => {}
        [re, im] => {
            let d = symplectic_density_check(&op, &symbol, c64::new(*re, *im), c.density_step)?;
            out.write("density.csv", |w| {
                writeln!(w, "re,im,step,lhs,rhs,bracket_plus,bracket_minus")?;
                writeln!(
                    w,
                    "{re:e},{im:e},{:e},{:e},{:e},{:e},{:e}",
                    c.density_step, d.lhs, d.rhs, d.bracket_plus, d.bracket_minus
                )
            })?;
        }
        _ => return Err(CliError::Config("dbar_check.density_point must be [re, im] or empty".into())),
    }
    section(c)
}

fn write_weyl(out: &mut OutputDir, stem: &str, r: &WeylResult) -> Result<(), CliError> {
    out.write(&format!("{stem}.csv"), |w| r.write_csv(w))?;
    out.write(&format!("{stem}_summary.csv"), |w| r.write_summary_csv(w))?;
    for f in &r.flags {
        eprintln!("note: {f}");
    }
    Ok(())
}

fn weyl_mc(cfg: &RunConfig, seed: u64, out: &mut OutputDir) -> Outcome {
    let mut c = cfg.weyl_mc.clone();
    c.seed = seed;
    c.validate()?;
    let r = run_weyl_experiment(&c)?;
    write_weyl(out, "weyl", &r)?;
    for s in &r.summaries {
        println!(
            "h = {}: prediction {:.2}, median relative deviation {:.4}, baseline {}",
            s.h, s.prediction, s.median_relative_deviation, s.baseline_count
        );
    }
    section(&c)
}

fn weyl_2d(cfg: &RunConfig, seed: u64, out: &mut OutputDir) -> Outcome {
    let mut c = cfg.weyl_2d.clone();
    c.seed = seed;
    let r = torus2d_demo(&c)?;
    write_weyl(out, "weyl_2d", &r)?;
    section(&c)
}

fn zero_count(cfg: &RunConfig, out: &mut OutputDir) -> Outcome {
    let c = &cfg.zero_count;
    if c.nodes < 3 || !(c.radius > 0.0) {
        return Err(CliError::Config("zero_count needs nodes >= 3 and radius > 0".into()));
    }
    let roots: Vec<c64> = c.roots.iter().map(|&p| z_of(p)).collect();
    let (a, b) = match c.exp_factor {
        Some([a, b]) => (z_of(a), z_of(b)),
        None => (c64::new(0.0, 0.0), c64::new(0.0, 0.0)),
    };
    let f = |z: c64| roots.iter().map(|r| z - r).product::<c64>() * (a * z * z + b * z).exp();
    let center = z_of(c.center);
    let mut contour = ContourSpec::circle(center, c.radius, c.nodes);
    contour.refinement_limit = c.refinement_limit;
    let report = argument_count(&f, &contour)?;
    let expected = roots.iter().filter(|r| (*r - center).norm() < c.radius).count();
    println!("zeros inside: {} (from the root list: {expected})", report.count);
    out.write("zero_count.csv", |w| report.write_csv(w))?;
    section(c)
}

fn hager_verify(cfg: &RunConfig, out: &mut OutputDir) -> Outcome {
    let c = &cfg.hager_verify;
    let rows: Vec<_> = c
        .h_list
        .iter()
        .map(|&h| {
            let fam = LatticeFamily::new(h);
            fam.verify(c.c_cal).map(|r| (h, fam.zeros_inside(), r))
        })
        .collect::<pslab::Result<_>>()?;
    out.write("hager.csv", |w| {
        writeln!(w, "h,count,lattice_zeros,mass,bound,deviation,flags")?;
        for (h, zeros, r) in &rows {
            let (m, b, d) = r.weyl_compare.as_ref().map_or((f64::NAN, f64::NAN, f64::NAN), |c| (c.mass, c.bound, c.deviation));
            writeln!(w, "{h},{},{zeros},{m:e},{b:e},{d:e},{}", r.count, r.flags.join(";"))?;
        }
        Ok(())
    })?;
    section(c)
}

fn scan_cmd(cfg: &RunConfig, out: &mut OutputDir) -> Outcome {
    let c = &cfg.resolvent_scan;
    let q = build_rotated_oscillator(c.n)?;
    let cells = resolvent_scan(&q, &c.lambdas, &c.mus, c.guard)?;
    let flagged = cells.iter().filter(|c| c.flagged).count();
    if flagged > 0 {
        eprintln!("warning: {flagged} cells change by more than 5% at 1.5n");
    }
    out.write("resolvent_scan.csv", |w| write_scan_csv(&cells, w))?;
    section(c)
}

fn rescale_check(cfg: &RunConfig, out: &mut OutputDir) -> Outcome {
    let c = &cfg.rescale_check;
    let rows: Vec<_> = c
        .cases
        .iter()
        .map(|&[l, m]| rescaling_check(l, m, c.n, c.k).map(|r| (l, m, r)))
        .collect::<pslab::Result<_>>()?;
    out.write("rescale.csv", |w| {
        writeln!(w, "lambda,mu,lhs,rhs,relative_gap")?;
        for (l, m, r) in &rows {
            writeln!(w, "{l},{m},{:e},{:e},{:e}", r.lhs, r.rhs, r.relative_gap())?;
        }
        Ok(())
    })?;
    section(c)
}

const TAIL_CHUNK: usize = 10_000;

fn tail_bound_mc(cfg: &RunConfig, seed: u64, out: &mut OutputDir) -> Outcome {
    let c = &cfg.tail_bound_mc;
    if c.sigmas.is_empty() || c.xs.iter().any(|x| !(*x >= 0.0)) || c.samples == 0 {
        return Err(CliError::Config("tail_bound_mc needs sigmas, x >= 0 and samples > 0".into()));
    }
    // one stream per chunk, so counts do not depend on the worker count
    let chunks = c.samples.div_ceil(TAIL_CHUNK);
    let counts = (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut r = rng::stream(seed, &[label("tail"), chunk as u64]);
            let n = TAIL_CHUNK.min(c.samples - chunk * TAIL_CHUNK);
            let mut hits = vec![0usize; c.xs.len()];
            for _ in 0..n {
                let s: f64 = c.sigmas.iter().map(|s| (rng::complex_normal(&mut r) * *s).norm_sqr()).sum();
                for (hit, x) in hits.iter_mut().zip(&c.xs) {
                    *hit += (s >= *x) as usize;
                }
            }
            hits
        })
        .reduce(|| vec![0; c.xs.len()], |a, b| a.iter().zip(&b).map(|(x, y)| x + y).collect());
    out.write("tail_bound.csv", |w| {
        writeln!(w, "x,empirical,bound")?;
        for (x, n) in c.xs.iter().zip(&counts) {
            writeln!(w, "{x},{:e},{:e}", *n as f64 / c.samples as f64, tail_bound(&c.sigmas, *x))?;
        }
        Ok(())
    })?;
    section(c)
}
