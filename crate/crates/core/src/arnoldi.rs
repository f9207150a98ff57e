//! Krylov bases built with the Arnoldi process, with residual-driven sizing
//! and extension by arbitrary vectors.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{self, DenseMatrix, HessenbergFactorization};
use crate::problem::OdeProblem;

/// `‖f‖` at or below this is an equilibrium: no basis can be built.
pub const ZERO_START_THRESHOLD: f64 = 1e-300;
/// `h_{i+1,i} ≤ BREAKDOWN_RTOL · ‖J v_i‖` ends the iteration.
pub const BREAKDOWN_RTOL: f64 = 1e-12;
/// Extension vectors whose orthogonal remainder is at most this fraction of
/// their norm are already in the span and are not appended.
pub const DROP_RTOL: f64 = 1e-12;
/// Residual test points for adaptive sizing.
pub const DEFAULT_TEST_INDICES: [usize; 12] = [1, 2, 3, 4, 6, 8, 11, 15, 20, 27, 36, 48];

/// Reorthogonalize while a Gram-Schmidt pass shrinks the vector below this
/// fraction of its previous norm.
const REORTH_RATIO: f64 = 0.5;
const MAX_GS_PASSES: usize = 3;

/// Orthonormal basis `V = [v_1 … v_M, v̄_1 … v̄_r]` with projected Jacobian
/// `H`.
///
/// For the pure Arnoldi part `J V_M = V_M H_M + h_next v_next e_Mᵀ`.
/// Appended vectors `v̄_k` get full columns `H[:, M+k] = Vᵀ J v̄_k` (kept
/// current as more vectors arrive), while the rows below `H_M` in the first
/// `M` columns stay zero.
#[derive(Clone, Debug)]
pub struct KrylovBasis {
    n: usize,
    v: Vec<Vec<f64>>,
    h: DenseMatrix,
    h_next: f64,
    v_next: Option<Vec<f64>>,
    beta: f64,
    core_size: usize,
    /// `J v̄_k` for each appended vector.
    ext_jv: Vec<Vec<f64>>,
    jvp_evals: usize,
}

impl KrylovBasis {
    /// The zero-dimensional basis of an equilibrium state.
    pub fn empty(n: usize) -> Self {
        Self {
            n,
            v: Vec::new(),
            h: DenseMatrix::zeros(0, 0),
            h_next: 0.0,
            v_next: None,
            beta: 0.0,
            core_size: 0,
            ext_jv: Vec::new(),
            jvp_evals: 0,
        }
    }

    /// State-space dimension `N`.
    pub fn dim(&self) -> usize {
        self.n
    }

    /// Number of basis vectors `M + r`.
    pub fn size(&self) -> usize {
        self.v.len()
    }

    pub fn core_size(&self) -> usize {
        self.core_size
    }

    pub fn ext_count(&self) -> usize {
        self.v.len() - self.core_size
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn h(&self) -> &DenseMatrix {
        &self.h
    }

    /// `h_{M+1,M}`; exactly zero after breakdown.
    pub fn h_next(&self) -> f64 {
        self.h_next
    }

    pub fn v_next(&self) -> Option<&[f64]> {
        self.v_next.as_deref()
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.v[j]
    }

    pub fn v_matrix(&self) -> DenseMatrix {
        DenseMatrix::from_columns(self.n, &self.v)
    }

    /// `J v̄_k` for the `k`-th appended vector.
    pub fn ext_jv(&self, k: usize) -> &[f64] {
        &self.ext_jv[k]
    }

    /// Jacobian-vector products spent building and extending this basis.
    pub fn jvp_evals(&self) -> usize {
        self.jvp_evals
    }

    /// `V_{:m}ᵀ x`
    pub fn project_leading(&self, m: usize, x: &[f64]) -> Vec<f64> {
        self.v[..m].iter().map(|v| linalg::dot(v, x)).collect()
    }

    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        self.project_leading(self.size(), x)
    }

    /// `V_{:m} c` with `m = c.len()`.
    pub fn combine(&self, c: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for (v, cj) in self.v.iter().zip(c) {
            if *cj != 0.0 {
                linalg::axpy(*cj, v, &mut out);
            }
        }
        out
    }

    /// `x ← (I − V_{:m} V_{:m}ᵀ) x`, with one reorthogonalization pass.
    pub fn remove_projection(&self, m: usize, x: &mut [f64]) {
        for _ in 0..2 {
            for v in &self.v[..m] {
                let c = linalg::dot(v, x);
                linalg::axpy(-c, v, x);
            }
        }
    }

    /// Appends the normalized remainder of `w` after orthogonalization
    /// against the basis. Returns `false`, leaving the basis untouched, when
    /// the remainder is at most `DROP_RTOL · ‖w‖`.
    pub fn extend<P: OdeProblem + ?Sized>(&mut self, problem: &P, y: &[f64], w: &[f64]) -> Result<bool> {
        if w.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, found: w.len() });
        }
        if !linalg::all_finite(w) {
            return Err(Error::InvalidArgument("extension vector is not finite"));
        }
        let wnorm = linalg::norm2(w);
        if wnorm == 0.0 {
            return Ok(false);
        }
        let mut r = w.to_vec();
        let mut prev = wnorm;
        for pass in 0..MAX_GS_PASSES {
            for v in &self.v {
                let c = linalg::dot(v, &r);
                linalg::axpy(-c, v, &mut r);
            }
            let now = linalg::norm2(&r);
            if now <= DROP_RTOL * wnorm {
                return Ok(false);
            }
            if pass > 0 && now >= REORTH_RATIO * prev {
                break;
            }
            prev = now;
        }
        let rnorm = linalg::norm2(&r);
        linalg::scale(1.0 / rnorm, &mut r);

        let mut jv = vec![0.0; self.n];
        problem.jvp(y, &r, &mut jv);
        self.jvp_evals += 1;
        if !linalg::all_finite(&jv) {
            return Err(Error::JvpFailure);
        }

        let m = self.size();
        let mut h = self.h.padded(m + 1, m + 1);
        for k in 0..self.ext_count() {
            h[(m, self.core_size + k)] = linalg::dot(&r, &self.ext_jv[k]);
        }
        for (i, v) in self.v.iter().enumerate() {
            h[(i, m)] = linalg::dot(v, &jv);
        }
        h[(m, m)] = linalg::dot(&r, &jv);
        self.h = h;
        self.v.push(r);
        self.ext_jv.push(jv);
        Ok(true)
    }
}

/// Incremental Arnoldi iteration shared by the fixed and adaptive builders.
struct Arnoldi<'a, P: ?Sized> {
    problem: &'a P,
    y: &'a [f64],
    beta: f64,
    /// `v_1 … v_{k+1}`; the last one is the pending `v_next`.
    v: Vec<Vec<f64>>,
    /// Column `j` of the Hessenberg matrix, entries `0..=j+1`.
    hcols: Vec<Vec<f64>>,
    broke_down: bool,
    jvp_evals: usize,
}

impl<'a, P: OdeProblem + ?Sized> Arnoldi<'a, P> {
    fn start(problem: &'a P, y: &'a [f64], f: &[f64]) -> Result<Self> {
        let n = problem.dim();
        if y.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: y.len() });
        }
        if f.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: f.len() });
        }
        let beta = linalg::norm2(f);
        if !beta.is_finite() {
            return Err(Error::NonFinite);
        }
        if beta <= ZERO_START_THRESHOLD {
            return Err(Error::ZeroStartVector);
        }
        let v1: Vec<f64> = f.iter().map(|x| x / beta).collect();
        Ok(Self { problem, y, beta, v: vec![v1], hcols: Vec::new(), broke_down: false, jvp_evals: 0 })
    }

    fn steps(&self) -> usize {
        self.hcols.len()
    }

    /// One Arnoldi step: `w = J v_k`, orthogonalized against `v_1 … v_k`.
    fn advance(&mut self) -> Result<()> {
        debug_assert!(!self.broke_down);
        let k = self.hcols.len();
        let n = self.y.len();
        let mut w = vec![0.0; n];
        self.problem.jvp(self.y, &self.v[k], &mut w);
        self.jvp_evals += 1;
        if !linalg::all_finite(&w) {
            return Err(Error::JvpFailure);
        }
        let wnorm = linalg::norm2(&w);
        let mut col = vec![0.0; k + 2];
        let mut prev = wnorm;
        for pass in 0..MAX_GS_PASSES {
            for (j, v) in self.v.iter().enumerate() {
                let c = linalg::dot(&w, v);
                linalg::axpy(-c, v, &mut w);
                col[j] += c;
            }
            let now = linalg::norm2(&w);
            if pass + 1 == MAX_GS_PASSES || now >= REORTH_RATIO * prev {
                break;
            }
            prev = now;
        }
        let hk = linalg::norm2(&w);
        // n vectors span everything: whatever is left is rounding.
        if hk <= BREAKDOWN_RTOL * wnorm || k + 1 >= n {
            self.broke_down = true;
            col[k + 1] = 0.0;
        } else {
            col[k + 1] = hk;
            linalg::scale(1.0 / hk, &mut w);
            self.v.push(w);
        }
        self.hcols.push(col);
        Ok(())
    }

    /// `H_m` from the first `m` steps.
    fn hessenberg(&self, m: usize) -> DenseMatrix {
        DenseMatrix::from_fn(m, m, |i, j| if i <= j + 1 { self.hcols[j][i] } else { 0.0 })
    }

    fn h_next(&self, m: usize) -> f64 {
        self.hcols[m - 1][m]
    }

    fn finish(mut self, m: usize) -> KrylovBasis {
        let h = self.hessenberg(m);
        let h_next = self.h_next(m);
        let v_next = if h_next != 0.0 { Some(self.v.swap_remove(m)) } else { None };
        self.v.truncate(m);
        KrylovBasis {
            n: self.y.len(),
            v: self.v,
            h,
            h_next,
            v_next,
            beta: self.beta,
            core_size: m,
            ext_jv: Vec::new(),
            jvp_evals: self.jvp_evals,
        }
    }
}

/// Arnoldi basis of `K_M(J(y), f)` with modified Gram-Schmidt. Stops early
/// at breakdown, so `core_size ≤ m`.
pub fn build_fixed<P: OdeProblem + ?Sized>(problem: &P, y: &[f64], f: &[f64], m: usize) -> Result<KrylovBasis> {
    if m == 0 {
        return Err(Error::InvalidArgument("basis size must be at least 1"));
    }
    let m = m.min(problem.dim());
    let mut it = Arnoldi::start(problem, y, f)?;
    while it.steps() < m && !it.broke_down {
        it.advance()?;
    }
    let k = it.steps();
    Ok(it.finish(k))
}

/// Outcome of residual-driven basis sizing.
#[derive(Clone, Debug)]
pub struct AdaptiveBasis {
    pub basis: KrylovBasis,
    /// First-stage residual norm at the returned size.
    pub residual: f64,
    /// No tested size met the tolerance; the basis has the maximum size.
    pub capped: bool,
}

/// Grows the Arnoldi basis until the first-stage residual
/// `|hγ h_{M+1,M}| |e_Mᵀ λ_1|`, with `(I − hγH_M) λ_1 = hβ e_1`, is at most
/// `resid_tol`. The residual is only evaluated at sizes in `test_indices`
/// and at `m_max`; breakdown returns immediately.
#[allow(clippy::too_many_arguments)]
pub fn build_adaptive<P: OdeProblem + ?Sized>(
    problem: &P,
    y: &[f64],
    f: &[f64],
    h: f64,
    gamma: f64,
    resid_tol: f64,
    m_max: usize,
    test_indices: &[usize],
) -> Result<AdaptiveBasis> {
    if !(h > 0.0) || !(gamma > 0.0) || !(resid_tol > 0.0) {
        return Err(Error::InvalidArgument("step, gamma and residual tolerance must be positive"));
    }
    if m_max == 0 {
        return Err(Error::InvalidArgument("basis size must be at least 1"));
    }
    let m_max = m_max.min(problem.dim());
    let hg = h * gamma;
    let mut it = Arnoldi::start(problem, y, f)?;
    let mut last = f64::INFINITY;
    loop {
        it.advance()?;
        let m = it.steps();
        if it.broke_down {
            let residual = first_stage_residual(&it, m, hg, h).unwrap_or(0.0);
            return Ok(AdaptiveBasis { basis: it.finish(m), residual, capped: false });
        }
        if m == m_max || test_indices.contains(&m) {
            if let Some(r) = first_stage_residual(&it, m, hg, h) {
                last = r;
                if r <= resid_tol {
                    return Ok(AdaptiveBasis { basis: it.finish(m), residual: r, capped: false });
                }
            }
        }
        if m == m_max {
            return Ok(AdaptiveBasis { basis: it.finish(m), residual: last, capped: true });
        }
    }
}

/// `None` when `I − hγH_m` is singular.
fn first_stage_residual<P: OdeProblem + ?Sized>(it: &Arnoldi<'_, P>, m: usize, hg: f64, h: f64) -> Option<f64> {
    let fac = HessenbergFactorization::factor(&it.hessenberg(m), hg).ok()?;
    let mut rhs = vec![0.0; m];
    rhs[0] = h * it.beta;
    let lambda = fac.solve(&rhs).ok()?;
    Some(libm::fabs(hg * it.h_next(m)) * libm::fabs(lambda[m - 1]))
}

/// `|hγ h_{M+1,M}| · |λ_1[M]|`, the first-stage residual norm of an
/// unextended basis, reading the last entry of the Arnoldi block.
pub fn first_stage_residual_norm(h: f64, gamma: f64, basis: &KrylovBasis, lambda1: &[f64]) -> f64 {
    if basis.core_size() == 0 || basis.h_next() == 0.0 {
        return 0.0;
    }
    libm::fabs(h * gamma * basis.h_next()) * libm::fabs(lambda1[basis.core_size() - 1])
}
