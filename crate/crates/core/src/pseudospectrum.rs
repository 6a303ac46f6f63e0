//! ε-pseudospectra on rectangular z-grids, level contours and the rank-one
//! instability witness.

use std::collections::HashMap;
use std::io::Write;

use faer::{Mat, MatRef};
use num_complex::Complex64 as c64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::numerics::{self, DenseMatrix, TOLERANCES};
use crate::symbol::FourierOperator;

/// Rectangle `[re_min, re_max] + i[im_min, im_max]` sampled on `nx × ny` nodes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ZGrid {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
    pub nx: usize,
    pub ny: usize,
}

impl ZGrid {
    pub fn new(re: (f64, f64), im: (f64, f64), nx: usize, ny: usize) -> Result<Self> {
        if nx < 2 || ny < 2 {
            return Err(Error::InvalidInput(format!("grid needs nx, ny >= 2, got {nx}x{ny}")));
        }
        if !(re.0 < re.1 && im.0 < im.1) {
            return Err(Error::InvalidInput("grid rectangle is empty".into()));
        }
        Ok(Self { re_min: re.0, re_max: re.1, im_min: im.0, im_max: im.1, nx, ny })
    }

    pub fn dx(&self) -> f64 {
        (self.re_max - self.re_min) / (self.nx - 1) as f64
    }

    pub fn dy(&self) -> f64 {
        (self.im_max - self.im_min) / (self.ny - 1) as f64
    }

    /// Node `i` along the real axis, `j` along the imaginary axis.
    pub fn node(&self, i: usize, j: usize) -> c64 {
        c64::new(self.re_min + i as f64 * self.dx(), self.im_min + j as f64 * self.dy())
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Row-major: imaginary index outer, real index inner.
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }
}

#[derive(Clone, Debug)]
pub struct PseudospecField {
    pub grid: ZGrid,
    /// `s_min(z − P)` per node; NaN where the kernel failed.
    pub values: Vec<f64>,
    pub h: Option<f64>,
    pub k: Option<usize>,
    /// Failed nodes with their error message.
    pub failed: Vec<(usize, String)>,
}

impl PseudospecField {
    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.index(i, j)]
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "re,im,smin")?;
        for j in 0..self.grid.ny {
            for i in 0..self.grid.nx {
                let z = self.grid.node(i, j);
                writeln!(w, "{:e},{:e},{:e}", z.re, z.im, self.value(i, j))?;
            }
        }
        Ok(())
    }
}

fn node_value(a: MatRef<'_, c64>, z: c64) -> Result<f64> {
    let shifted = numerics::shifted(a, z);
    let t = numerics::smallest_singular(shifted.as_ref())?;
    // value ≤ ‖(z−P)x‖ for the certified right vector
    let ax = numerics::mat_vec(shifted.as_ref(), &t.right);
    let direct = numerics::norm(&ax);
    let fro = numerics::frobenius(shifted.as_ref());
    if (direct - t.s_min).abs() > TOLERANCES.svd_residual * fro.max(f64::MIN_POSITIVE) {
        return Err(Error::SvdNoConvergence);
    }
    Ok(t.s_min.min(direct))
}

/// `s_min(zI − A)` at every node of `grid`, in parallel with row-major output.
pub fn scan_matrix(a: MatRef<'_, c64>, grid: &ZGrid) -> PseudospecField {
    let results: Vec<Result<f64>> = (0..grid.len())
        .into_par_iter()
        .map(|idx| node_value(a, grid.node(idx % grid.nx, idx / grid.nx)))
        .collect();
    let mut values = Vec::with_capacity(results.len());
    let mut failed = Vec::new();
    for (idx, r) in results.into_iter().enumerate() {
        match r {
            Ok(v) => values.push(v),
            Err(e) => {
                values.push(f64::NAN);
                failed.push((idx, e.to_string()));
            }
        }
    }
    PseudospecField { grid: *grid, values, h: None, k: None, failed }
}

pub fn scan(op: &FourierOperator, grid: &ZGrid) -> PseudospecField {
    let mut f = scan_matrix(op.matrix.as_ref(), grid);
    f.h = Some(op.h);
    f.k = Some(op.k);
    f
}

/// Rank-one `Q = −v uᴴ` of norm `s_min(P − z)` that makes `z` an eigenvalue of
/// `P + Q`.
#[derive(Clone, Debug)]
pub struct Witness {
    pub q: DenseMatrix,
    pub norm: f64,
    /// Unit eigenvector of `P + Q` for `z` (zero vector when `Q = 0`).
    pub eigenvector: Vec<c64>,
}

pub fn instability_witness_matrix(p: MatRef<'_, c64>, z: c64) -> Result<Witness> {
    let n = p.nrows();
    let a = numerics::shifted(p, z);
    let t = numerics::smallest_singular(a.as_ref())?;
    if t.s_min <= 1e-12 * numerics::frobenius(p).max(1.0) {
        return Ok(Witness { q: Mat::zeros(n, n), norm: 0.0, eigenvector: t.right });
    }
    let u = t.right;
    let v = numerics::mat_vec(a.as_ref(), &u);
    let q = Mat::from_fn(n, n, |i, j| -v[i] * u[j].conj());
    let norm = numerics::norm(&v);
    Ok(Witness { q, norm, eigenvector: u })
}

pub fn instability_witness(op: &FourierOperator, z: c64) -> Result<Witness> {
    instability_witness_matrix(op.matrix.as_ref(), z)
}

// ---------------------------------------------------------------------------
// contours

#[derive(Clone, Debug, PartialEq)]
pub struct Polyline {
    pub points: Vec<c64>,
    pub closed: bool,
}

#[derive(Clone, Debug)]
pub struct ContourSet {
    pub eps: f64,
    pub polylines: Vec<Polyline>,
}

// Edge ids: horizontal edge (i,j)-(i+1,j) is 2·idx, vertical (i,j)-(i,j+1) is 2·idx+1.
fn edge_point(field: &PseudospecField, edge: usize, eps: f64) -> c64 {
    let g = &field.grid;
    let idx = edge / 2;
    let (i, j) = (idx % g.nx, idx / g.nx);
    let (i2, j2) = if edge % 2 == 0 { (i + 1, j) } else { (i, j + 1) };
    let (a, b) = (field.value(i, j), field.value(i2, j2));
    let t = ((eps - a) / (b - a)).clamp(0.0, 1.0);
    g.node(i, j) + (g.node(i2, j2) - g.node(i, j)) * t
}

fn cell_segments(field: &PseudospecField, i: usize, j: usize, eps: f64) -> Vec<(usize, usize)> {
    let g = &field.grid;
    let v = [field.value(i, j), field.value(i + 1, j), field.value(i + 1, j + 1), field.value(i, j + 1)];
    if v.iter().any(|x| !x.is_finite()) {
        return Vec::new();
    }
    let bottom = 2 * g.index(i, j);
    let right = 2 * g.index(i + 1, j) + 1;
    let top = 2 * g.index(i, j + 1);
    let left = 2 * g.index(i, j) + 1;
    let below: Vec<bool> = v.iter().map(|&x| x < eps).collect();
    let case = below.iter().enumerate().fold(0, |acc, (k, &b)| acc | ((b as u8) << k));
    match case {
        0 | 15 => vec![],
        1 | 14 => vec![(left, bottom)],
        2 | 13 => vec![(bottom, right)],
        3 | 12 => vec![(left, right)],
        4 | 11 => vec![(right, top)],
        6 | 9 => vec![(bottom, top)],
        7 | 8 => vec![(left, top)],
        5 | 10 => {
            // saddle: the cell center decides which corners connect
            let center_below = v.iter().sum::<f64>() / 4.0 < eps;
            if (case == 5) == center_below {
                vec![(left, top), (bottom, right)]
            } else {
                vec![(left, bottom), (right, top)]
            }
        }
        _ => unreachable!(),
    }
}

fn contours_for(field: &PseudospecField, eps: f64) -> Vec<Polyline> {
    let g = &field.grid;
    let mut segments = Vec::new();
    for j in 0..g.ny - 1 {
        for i in 0..g.nx - 1 {
            segments.extend(cell_segments(field, i, j, eps));
        }
    }
    let mut by_edge: HashMap<usize, Vec<usize>> = HashMap::new();
    for (s, &(a, b)) in segments.iter().enumerate() {
        by_edge.entry(a).or_default().push(s);
        by_edge.entry(b).or_default().push(s);
    }
    let mut used = vec![false; segments.len()];
    let other = |s: usize, e: usize| if segments[s].0 == e { segments[s].1 } else { segments[s].0 };
    let next_from = |e: usize, used: &[bool]| by_edge[&e].iter().copied().find(|&s| !used[s]);
    let mut out = Vec::new();
    // open chains start at edges with a single segment, then the remaining cycles
    let mut starts: Vec<usize> = by_edge.iter().filter(|(_, v)| v.len() == 1).map(|(&e, _)| e).collect();
    starts.sort_unstable();
    let mut all_edges: Vec<usize> = by_edge.keys().copied().collect();
    all_edges.sort_unstable();
    starts.extend(all_edges);
    for start in starts {
        while let Some(s0) = next_from(start, &used) {
            let mut edges = vec![start];
            let mut e = start;
            let mut s = s0;
            loop {
                used[s] = true;
                e = other(s, e);
                edges.push(e);
                match next_from(e, &used) {
                    Some(n) => s = n,
                    None => break,
                }
            }
            let closed = edges.len() > 2 && edges.first() == edges.last();
            if closed {
                edges.pop();
            }
            out.push(Polyline { points: edges.iter().map(|&e| edge_point(field, e, eps)).collect(), closed });
        }
    }
    out
}

/// Marching-squares polylines of `value = ε` for each level, linear
/// interpolation on edges; failed (NaN) nodes exclude their cells.
pub fn level_contours(field: &PseudospecField, eps_list: &[f64]) -> Vec<ContourSet> {
    eps_list.iter().map(|&eps| ContourSet { eps, polylines: contours_for(field, eps) }).collect()
}

#[derive(Clone, Debug)]
pub struct Component {
    pub nodes: Vec<(usize, usize)>,
    pub touches_boundary: bool,
}

/// 4-connected components of the node set `{value < ε}`.
pub fn components_below(field: &PseudospecField, eps: f64) -> Vec<Component> {
    let g = &field.grid;
    let mut seen = vec![false; g.len()];
    let mut out = Vec::new();
    for start in 0..g.len() {
        if seen[start] || !(field.values[start] < eps) {
            continue;
        }
        let mut stack = vec![start];
        seen[start] = true;
        let mut nodes = Vec::new();
        let mut touches = false;
        while let Some(idx) = stack.pop() {
            let (i, j) = (idx % g.nx, idx / g.nx);
            nodes.push((i, j));
            touches |= i == 0 || j == 0 || i + 1 == g.nx || j + 1 == g.ny;
            let mut push = |ii: usize, jj: usize| {
                let n = g.index(ii, jj);
                if !seen[n] && field.values[n] < eps {
                    seen[n] = true;
                    stack.push(n);
                }
            };
            if i > 0 {
                push(i - 1, j);
            }
            if i + 1 < g.nx {
                push(i + 1, j);
            }
            if j > 0 {
                push(i, j - 1);
            }
            if j + 1 < g.ny {
                push(i, j + 1);
            }
        }
        nodes.sort_unstable_by_key(|&(i, j)| (j, i));
        out.push(Component { nodes, touches_boundary: touches });
    }
    out
}

/// Stroke color for level `rank` of `count`: blue (smallest ε) through red.
pub fn stroke_color(rank: usize, count: usize) -> String {
    let t = if count > 1 { rank as f64 / (count - 1) as f64 } else { 0.0 };
    let r = (255.0 * t).round() as u8;
    let b = (255.0 * (1.0 - t)).round() as u8;
    format!("#{r:02x}00{b:02x}")
}

/// SVG of the contours in the z-plane, y-axis up; levels are sorted by ε
/// and colored with [`stroke_color`].
pub fn write_svg<W: Write>(grid: &ZGrid, contours: &[ContourSet], width: f64, mut w: W) -> std::io::Result<()> {
    let span_re = grid.re_max - grid.re_min;
    let span_im = grid.im_max - grid.im_min;
    let height = width * span_im / span_re;
    let map = |z: c64| ((z.re - grid.re_min) / span_re * width, height - (z.im - grid.im_min) / span_im * height);
    writeln!(
        w,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width:.1}\" height=\"{height:.1}\" viewBox=\"0 0 {width:.1} {height:.1}\">"
    )?;
    let mut order: Vec<usize> = (0..contours.len()).collect();
    order.sort_by(|&a, &b| contours[a].eps.total_cmp(&contours[b].eps));
    for (rank, &c) in order.iter().enumerate() {
        let set = &contours[c];
        let color = stroke_color(rank, contours.len());
        writeln!(w, "<g stroke=\"{color}\" fill=\"none\" stroke-width=\"1\" data-eps=\"{:e}\">", set.eps)?;
        for line in &set.polylines {
            let pts: Vec<String> = line
                .points
                .iter()
                .map(|&z| {
                    let (x, y) = map(z);
                    format!("{x:.3},{y:.3}")
                })
                .collect();
            let tag = if line.closed { "polygon" } else { "polyline" };
            writeln!(w, "<{tag} points=\"{}\"/>", pts.join(" "))?;
        }
        writeln!(w, "</g>")?;
    }
    writeln!(w, "</svg>")
}
