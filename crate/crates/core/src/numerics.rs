//! Dense complex linear algebra with explicit accuracy contracts.
//!
//! The heavy lifting (Hessenberg/Schur, bidiagonal SVD, Hermitian
//! tridiagonal eigensolver, partial-pivot LU) is delegated to `faer`.
//! This module adds the pieces the rest of the crate relies on: exact
//! isolation of triangular parts before the QR sweep, certified residuals,
//! inverse iteration for the smallest singular triplet, a condition
//! estimate in front of every solve, and deterministic gauge choices.

use std::io::Write;
use std::sync::Once;

use faer::linalg::solvers::SolveCore;
use faer::{Conj, Mat, MatRef, Par, Side};
use num_complex::Complex64 as c64;

use crate::error::{Error, Result};

pub type DenseMatrix = Mat<c64>;

/// Accuracy contract shared by every kernel entry point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerances {
    /// Eigenpair residual bound, relative to the Frobenius norm.
    pub eig_residual: f64,
    /// Singular triplet residual bound, relative to the Frobenius norm.
    pub svd_residual: f64,
    pub unit_norm: f64,
    pub hermitian_check: f64,
    pub hermitian_residual: f64,
    /// Solves are refused above this 1-norm condition estimate.
    pub max_condition: f64,
    pub max_dim: usize,
    /// Above this size the smallest singular triplet comes from inverse iteration.
    pub direct_svd_max_dim: usize,
    /// Inverse iteration falls back to a full SVD after this many steps without progress.
    pub stagnation_window: usize,
    pub max_inverse_iterations: usize,
}

pub const TOLERANCES: Tolerances = Tolerances {
    eig_residual: 1e-9,
    svd_residual: 1e-10,
    unit_norm: 1e-12,
    hermitian_check: 1e-12,
    hermitian_residual: 1e-10,
    max_condition: 1e14,
    max_dim: 4096,
    direct_svd_max_dim: 512,
    stagnation_window: 50,
    max_inverse_iterations: 2000,
};

impl Default for Tolerances {
    fn default() -> Self {
        TOLERANCES
    }
}

static SEQUENTIAL: Once = Once::new();

/// Decompositions run single-threaded inside; parallelism lives one level up
/// (grid nodes, trials) so results never depend on the worker count.
fn init_kernel() {
    SEQUENTIAL.call_once(|| faer::set_global_parallelism(Par::Seq));
}

#[derive(Clone, Debug)]
pub struct SpectrumResult {
    /// Eigenvalues repeated with algebraic multiplicity.
    pub eigenvalues: Vec<c64>,
    /// Largest eigenpair residual ‖Av − λv‖ over the unreduced core (isolated
    /// eigenvalues are exact and contribute zero).
    pub max_residual: f64,
    /// Number of eigenvalues read off exactly from triangular parts.
    pub isolated: usize,
}

#[derive(Clone, Debug)]
pub struct SingularTriplet {
    pub s_min: f64,
    pub left: Vec<c64>,
    pub right: Vec<c64>,
}

#[derive(Clone, Debug)]
pub struct HermitianPair {
    pub lambda0: f64,
    pub lambda1: f64,
    pub v0: Vec<c64>,
    pub v1: Vec<c64>,
}

// ---------------------------------------------------------------------------
// small vector helpers

/// `(x|y) = Σ x_i conj(y_i)`, linear in the first slot.
pub fn inner(x: &[c64], y: &[c64]) -> c64 {
    x.iter().zip(y).map(|(a, b)| a * b.conj()).sum()
}

pub fn norm(x: &[c64]) -> f64 {
    x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

pub fn normalize(x: &mut [c64]) -> f64 {
    let n = norm(x);
    if n > 0.0 {
        x.iter_mut().for_each(|v| *v /= n);
    }
    n
}

pub fn mat_vec(a: MatRef<'_, c64>, x: &[c64]) -> Vec<c64> {
    assert_eq!(a.ncols(), x.len());
    let mut y = vec![c64::new(0.0, 0.0); a.nrows()];
    for (j, &xj) in x.iter().enumerate() {
        if xj == c64::new(0.0, 0.0) {
            continue;
        }
        let col = a.col(j);
        for (yi, aij) in y.iter_mut().zip(col.iter()) {
            *yi += aij * xj;
        }
    }
    y
}

pub fn adjoint_mat_vec(a: MatRef<'_, c64>, x: &[c64]) -> Vec<c64> {
    assert_eq!(a.nrows(), x.len());
    (0..a.ncols())
        .map(|j| a.col(j).iter().zip(x).map(|(aij, xi)| aij.conj() * xi).sum())
        .collect()
}

pub fn frobenius(a: MatRef<'_, c64>) -> f64 {
    a.norm_l2()
}

pub fn column(a: MatRef<'_, c64>, j: usize) -> Vec<c64> {
    a.col(j).iter().copied().collect()
}

/// `A − z·I`.
pub fn shifted(a: MatRef<'_, c64>, z: c64) -> DenseMatrix {
    let mut m = a.to_owned();
    for i in 0..m.nrows().min(m.ncols()) {
        m[(i, i)] -= z;
    }
    m
}

/// Multiply `v` by the unit phase making its largest-magnitude entry real and
/// positive (lowest index wins ties). Returns the phase applied.
pub fn fix_phase_largest(v: &mut [c64]) -> c64 {
    let mut best = 0;
    let mut best_abs = -1.0;
    for (i, x) in v.iter().enumerate() {
        let a = x.norm();
        if a > best_abs * (1.0 + 1e-12) {
            best = i;
            best_abs = a;
        }
    }
    if best_abs <= 0.0 {
        return c64::new(1.0, 0.0);
    }
    let phase = v[best].conj() / best_abs;
    v.iter_mut().for_each(|x| *x *= phase);
    phase
}

fn check_square(a: MatRef<'_, c64>) -> Result<usize> {
    let n = a.nrows();
    if n == 0 || a.ncols() != n {
        return Err(Error::InvalidInput(format!(
            "expected a nonempty square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    if n > TOLERANCES.max_dim {
        return Err(Error::DimensionTooLarge { dim: n, max: TOLERANCES.max_dim });
    }
    for j in 0..n {
        if a.col(j).iter().any(|x| !x.re.is_finite() || !x.im.is_finite()) {
            return Err(Error::InvalidInput("matrix has non-finite entries".into()));
        }
    }
    Ok(n)
}

// ---------------------------------------------------------------------------
// eigenvalues

/// Permutation splitting `A` into isolated eigenvalues and an unreduced core.
///
/// A row (or column) whose off-diagonal entries inside the active index set
/// are exactly zero splits off its diagonal entry as an eigenvalue. Peeling
/// repeats until no such row or column remains.
struct Isolation {
    isolated: Vec<usize>,
    core: Vec<usize>,
}

fn isolate(a: MatRef<'_, c64>) -> Isolation {
    let n = a.nrows();
    let zero = c64::new(0.0, 0.0);
    let mut active = vec![true; n];
    let mut row_count = vec![0usize; n];
    let mut col_count = vec![0usize; n];
    for j in 0..n {
        for i in 0..n {
            if i != j && a[(i, j)] != zero {
                row_count[i] += 1;
                col_count[j] += 1;
            }
        }
    }
    let mut queue: Vec<usize> = (0..n).filter(|&i| row_count[i] == 0 || col_count[i] == 0).collect();
    let mut isolated = Vec::new();
    while let Some(i) = queue.pop() {
        if !active[i] {
            continue;
        }
        active[i] = false;
        isolated.push(i);
        for k in 0..n {
            if !active[k] {
                continue;
            }
            if a[(k, i)] != zero {
                row_count[k] -= 1;
                if row_count[k] == 0 {
                    queue.push(k);
                }
            }
            if a[(i, k)] != zero {
                col_count[k] -= 1;
                if col_count[k] == 0 {
                    queue.push(k);
                }
            }
        }
    }
    let core = (0..n).filter(|&i| active[i]).collect();
    Isolation { isolated, core }
}

fn core_matrix(a: MatRef<'_, c64>, core: &[usize]) -> DenseMatrix {
    Mat::from_fn(core.len(), core.len(), |i, j| a[(core[i], core[j])])
}

/// All eigenvalues with a certified residual on the unreduced core.
pub fn eig(a: MatRef<'_, c64>) -> Result<SpectrumResult> {
    let n = check_square(a)?;
    init_kernel();
    let iso = isolate(a);
    let mut eigenvalues: Vec<c64> = iso.isolated.iter().map(|&i| a[(i, i)]).collect();
    let mut max_residual = 0.0f64;
    if !iso.core.is_empty() {
        let core = core_matrix(a, &iso.core);
        let evd = core
            .eigen()
            .map_err(|_| Error::EigNoConvergence { index: iso.core[0] })?;
        let s = evd.S().column_vector();
        let u = evd.U();
        for k in 0..core.nrows() {
            let lambda = s[k];
            let v = column(u, k);
            let av = mat_vec(core.as_ref(), &v);
            let r: f64 = av
                .iter()
                .zip(&v)
                .map(|(x, y)| (x - lambda * y).norm_sqr())
                .sum::<f64>()
                .sqrt();
            max_residual = max_residual.max(r / norm(&v).max(f64::MIN_POSITIVE));
            eigenvalues.push(lambda);
        }
        let bound = TOLERANCES.eig_residual * frobenius(a).max(f64::MIN_POSITIVE);
        if max_residual > bound {
            return Err(Error::EigNoConvergence { index: iso.core[0] });
        }
    }
    debug_assert_eq!(eigenvalues.len(), n);
    Ok(SpectrumResult { eigenvalues, max_residual, isolated: iso.isolated.len() })
}

/// Eigenvalues only; the Monte-Carlo path where eigenvectors are never used.
pub fn eigenvalues(a: MatRef<'_, c64>) -> Result<Vec<c64>> {
    check_square(a)?;
    init_kernel();
    let iso = isolate(a);
    let mut out: Vec<c64> = iso.isolated.iter().map(|&i| a[(i, i)]).collect();
    if !iso.core.is_empty() {
        let core = core_matrix(a, &iso.core);
        let vals = core
            .eigenvalues()
            .map_err(|_| Error::EigNoConvergence { index: iso.core[0] })?;
        out.extend(vals);
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// singular values

fn svd_smallest(a: MatRef<'_, c64>) -> Result<SingularTriplet> {
    let n = a.nrows();
    let svd = a.svd().map_err(|_| Error::SvdNoConvergence)?;
    let s = svd.S().column_vector()[n - 1].re.max(0.0);
    let mut right = column(svd.V(), n - 1);
    let mut left = column(svd.U(), n - 1);
    let phase = fix_phase_largest(&mut right);
    left.iter_mut().for_each(|x| *x *= phase);
    Ok(SingularTriplet { s_min: s, left, right })
}

fn start_vector(n: usize) -> Vec<c64> {
    let mut v: Vec<c64> = (0..n)
        .map(|i| {
            let t = i as f64 + 1.0;
            c64::new(1.0 + 0.5 * (t * 0.618_033_988_75).fract(), 0.25 * (t * 0.414_213_562_37).fract())
        })
        .collect();
    normalize(&mut v);
    v
}

/// Inverse iteration on `AᴴA` using one LU factorization of `A`.
fn inverse_iteration_smallest(a: MatRef<'_, c64>) -> Option<SingularTriplet> {
    let n = a.nrows();
    let lu = a.partial_piv_lu();
    let mut x = start_vector(n);
    let mut best = f64::INFINITY;
    let mut since_best = 0usize;
    let anorm = frobenius(a);
    for _ in 0..TOLERANCES.max_inverse_iterations {
        let mut rhs = Mat::from_fn(n, 1, |i, _| x[i]);
        lu.solve_transpose_in_place_with_conj(Conj::Yes, rhs.as_mut());
        lu.solve_in_place_with_conj(Conj::No, rhs.as_mut());
        let mut y: Vec<c64> = (0..n).map(|i| rhs[(i, 0)]).collect();
        if y.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return None;
        }
        if normalize(&mut y) == 0.0 {
            return None;
        }
        let ay = mat_vec(a, &y);
        let s = norm(&ay);
        let aay = adjoint_mat_vec(a, &ay);
        let resid = aay
            .iter()
            .zip(&y)
            .map(|(p, q)| (p - s * s * q).norm_sqr())
            .sum::<f64>()
            .sqrt();
        x = y;
        // ‖AᴴAx − s²x‖ small relative to ‖A‖·s certifies the pair.
        if resid <= 1e-14 * anorm * anorm.max(s) {
            let mut right = x;
            let phase = fix_phase_largest(&mut right);
            let mut left = if s > 0.0 {
                ay.iter().map(|v| v * phase / s).collect::<Vec<_>>()
            } else {
                return None;
            };
            normalize(&mut left);
            return Some(SingularTriplet { s_min: s, left, right });
        }
        if resid < best * 0.999 {
            best = resid;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= TOLERANCES.stagnation_window {
                return None;
            }
        }
    }
    None
}

/// Smallest singular value of `A` with unit left/right vectors,
/// `A·right = s_min·left`. The right vector is gauge-fixed so that its
/// largest entry is real and positive.
pub fn smallest_singular(a: MatRef<'_, c64>) -> Result<SingularTriplet> {
    let n = check_square(a)?;
    init_kernel();
    if n > TOLERANCES.direct_svd_max_dim {
        if let Some(t) = inverse_iteration_smallest(a) {
            return Ok(t);
        }
    }
    svd_smallest(a)
}

/// All singular values in nonincreasing order.
pub fn singular_values(a: MatRef<'_, c64>) -> Result<Vec<f64>> {
    check_square(a)?;
    init_kernel();
    let s = a.singular_values().map_err(|_| Error::SvdNoConvergence)?;
    Ok(s)
}

// ---------------------------------------------------------------------------
// Hermitian

fn hermitian_asymmetry(a: MatRef<'_, c64>) -> f64 {
    let n = a.nrows();
    let mut d = 0.0;
    for j in 0..n {
        for i in 0..n {
            d += (a[(i, j)] - a[(j, i)].conj()).norm_sqr();
        }
    }
    d.sqrt()
}

/// Two smallest eigenvalues and orthonormal eigenvectors of a Hermitian matrix.
pub fn hermitian_smallest_two(a: MatRef<'_, c64>) -> Result<HermitianPair> {
    let n = check_square(a)?;
    if n < 2 {
        return Err(Error::InvalidInput("need dimension >= 2".into()));
    }
    init_kernel();
    let fro = frobenius(a);
    let asym = hermitian_asymmetry(a);
    if asym > TOLERANCES.hermitian_check * fro.max(f64::MIN_POSITIVE) {
        return Err(Error::NotHermitian { asymmetry: asym / fro.max(f64::MIN_POSITIVE) });
    }
    let sym = Mat::from_fn(n, n, |i, j| 0.5 * (a[(i, j)] + a[(j, i)].conj()));
    let evd = sym
        .self_adjoint_eigen(Side::Lower)
        .map_err(|_| Error::EigNoConvergence { index: 0 })?;
    let s = evd.S().column_vector();
    let mut v0 = column(evd.U(), 0);
    let mut v1 = column(evd.U(), 1);
    fix_phase_largest(&mut v0);
    fix_phase_largest(&mut v1);
    Ok(HermitianPair { lambda0: s[0].re, lambda1: s[1].re, v0, v1 })
}

// ---------------------------------------------------------------------------
// linear solves

/// LU factorization with a 1-norm condition estimate, reusable for several
/// right-hand sides and adjoint solves.
pub struct LuFactor {
    lu: faer::linalg::solvers::PartialPivLu<c64>,
    n: usize,
    pub condition: f64,
}

impl LuFactor {
    pub fn new(a: MatRef<'_, c64>) -> Result<Self> {
        let n = check_square(a)?;
        init_kernel();
        let lu = a.partial_piv_lu();
        let mut f = LuFactor { lu, n, condition: f64::INFINITY };
        let anorm1 = (0..n)
            .map(|j| a.col(j).iter().map(|x| x.norm()).sum::<f64>())
            .fold(0.0, f64::max);
        let inv = f.inverse_norm1_estimate();
        f.condition = if inv.is_finite() { anorm1 * inv } else { f64::INFINITY };
        if !(f.condition <= TOLERANCES.max_condition) {
            return Err(Error::Singular { condition: f.condition });
        }
        Ok(f)
    }

    fn raw_solve(&self, b: &[c64], adjoint: bool) -> Vec<c64> {
        let mut rhs = Mat::from_fn(self.n, 1, |i, _| b[i]);
        if adjoint {
            self.lu.solve_transpose_in_place_with_conj(Conj::Yes, rhs.as_mut());
        } else {
            self.lu.solve_in_place_with_conj(Conj::No, rhs.as_mut());
        }
        (0..self.n).map(|i| rhs[(i, 0)]).collect()
    }

    /// Hager's 1-norm estimator for `‖A⁻¹‖₁`.
    fn inverse_norm1_estimate(&self) -> f64 {
        let n = self.n;
        let mut x = vec![c64::new(1.0 / n as f64, 0.0); n];
        let mut est = 0.0;
        for iter in 0..5 {
            let y = self.raw_solve(&x, false);
            if y.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
                return f64::INFINITY;
            }
            let ynorm: f64 = y.iter().map(|v| v.norm()).sum();
            if iter > 0 && ynorm <= est {
                break;
            }
            est = ynorm;
            let sign: Vec<c64> = y
                .iter()
                .map(|v| if v.norm() > 0.0 { v / v.norm() } else { c64::new(1.0, 0.0) })
                .collect();
            let z = self.raw_solve(&sign, true);
            let (jmax, zmax) = z
                .iter()
                .enumerate()
                .map(|(j, v)| (j, v.norm()))
                .fold((0, -1.0), |acc, cur| if cur.1 > acc.1 { cur } else { acc });
            let ztx: f64 = inner(&x, &z).re;
            if zmax <= ztx {
                break;
            }
            x = vec![c64::new(0.0, 0.0); n];
            x[jmax] = c64::new(1.0, 0.0);
        }
        est
    }

    pub fn solve(&self, b: &[c64]) -> Vec<c64> {
        assert_eq!(b.len(), self.n);
        self.raw_solve(b, false)
    }

    /// Solves `Aᴴx = b`.
    pub fn solve_adjoint(&self, b: &[c64]) -> Vec<c64> {
        assert_eq!(b.len(), self.n);
        self.raw_solve(b, true)
    }
}

/// Solves `Ax = b`, refusing when the condition estimate exceeds the contract.
pub fn solve(a: MatRef<'_, c64>, b: &[c64]) -> Result<Vec<c64>> {
    if b.len() != a.nrows() {
        return Err(Error::InvalidInput("right-hand side length mismatch".into()));
    }
    let lu = LuFactor::new(a)?;
    Ok(lu.solve(b))
}

/// Debug dump: one `row,col,re,im` line per entry.
pub fn write_matrix_csv<W: Write>(a: MatRef<'_, c64>, mut w: W) -> std::io::Result<()> {
    writeln!(w, "row,col,re,im")?;
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            let v = a[(i, j)];
            writeln!(w, "{i},{j},{:e},{:e}", v.re, v.im)?;
        }
    }
    Ok(())
}
