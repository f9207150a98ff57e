//! One Rosenbrock-Krylov step with `φ(z) = 1/(1 − z)`, optional stage-wise
//! basis extension, and stage residual diagnostics.

use alloc::vec;
use alloc::vec::Vec;

use crate::arnoldi::{first_stage_residual_norm, KrylovBasis};
use crate::error::{Error, Result};
use crate::linalg::{self, HessenbergFactorization};
use crate::problem::OdeProblem;
use crate::tableau::Tableau;

/// Per-stage vectors retained for residual evaluation.
#[derive(Clone, Debug)]
pub struct StageData {
    /// `F_i = f(y + Σ α_{i,j} k_j)`
    pub f: Vec<f64>,
    /// `ψ_i = V_iᵀ F_i`
    pub psi: Vec<f64>,
    /// Reduced solution, length of the basis in use at this stage.
    pub lambda: Vec<f64>,
    pub k: Vec<f64>,
    /// Basis size in use at this stage.
    pub basis_size: usize,
}

#[derive(Clone, Debug)]
pub struct StepInternals {
    pub y: Vec<f64>,
    pub h: f64,
    pub stages: Vec<StageData>,
    /// The basis after all stage extensions; `None` when nothing was appended.
    pub extended_basis: Option<KrylovBasis>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StepStats {
    /// Basis size after the last stage.
    pub basis_size: usize,
    /// Jacobian-vector products spent inside the step (extensions only).
    pub jvp_evals: usize,
    pub rhs_evals: usize,
    pub extensions: usize,
    /// `|hγ h_{M+1,M}| |e_Mᵀ λ_1|`
    pub first_stage_residual: f64,
    /// An extension needed a full refactorization of the reduced matrix.
    pub refactored: bool,
}

#[derive(Clone, Debug)]
pub struct StepResult {
    pub y_new: Vec<f64>,
    pub y_embedded: Vec<f64>,
    pub stats: StepStats,
    pub internals: StepInternals,
}

/// One step from `y` with the basis built at `y`. With `extend` set, each
/// stage right-hand side `F_i` (`i ≥ 2`) is appended to the basis first, so
/// that `F_i − Vψ_i` vanishes.
pub fn rok_step<P: OdeProblem + ?Sized>(
    problem: &P,
    y: &[f64],
    h: f64,
    tableau: &Tableau,
    basis: &KrylovBasis,
    extend: bool,
) -> Result<StepResult> {
    step_with_f1(problem, y, None, h, tableau, basis, extend)
}

/// As [`rok_step`], reusing an already evaluated `f(y)`.
pub(crate) fn step_with_f1<P: OdeProblem + ?Sized>(
    problem: &P,
    y: &[f64],
    f1: Option<&[f64]>,
    h: f64,
    tableau: &Tableau,
    basis: &KrylovBasis,
    extend: bool,
) -> Result<StepResult> {
    let n = problem.dim();
    if y.len() != n || basis.dim() != n {
        return Err(Error::DimensionMismatch { expected: n, found: if y.len() != n { y.len() } else { basis.dim() } });
    }
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::InvalidArgument("step size must be positive"));
    }
    let s = tableau.stages;
    let hg = h * tableau.gamma;
    let mut fac = HessenbergFactorization::factor(basis.h(), hg)?;
    let mut owned: Option<KrylovBasis> = None;
    let mut stats = StepStats::default();
    let mut stages: Vec<StageData> = Vec::with_capacity(s);
    let jvp_before = basis.jvp_evals();

    for i in 0..s {
        let mut yi = y.to_vec();
        for (j, st) in stages.iter().enumerate() {
            let a = tableau.alpha[(i, j)];
            if a != 0.0 {
                linalg::axpy(a, &st.k, &mut yi);
            }
        }
        let fi = match (i, f1) {
            (0, Some(f)) => f.to_vec(),
            _ => {
                let mut out = vec![0.0; n];
                problem.rhs(&yi, &mut out);
                stats.rhs_evals += 1;
                out
            }
        };
        if !linalg::all_finite(&fi) {
            return Err(Error::NonFinite);
        }

        if extend && i > 0 {
            let b = owned.get_or_insert_with(|| basis.clone());
            if b.extend(problem, y, &fi)? {
                let m = b.size() - 1;
                let hm = b.h();
                let col: Vec<f64> = (0..m).map(|r| hm[(r, m)]).collect();
                let row: Vec<f64> = (0..m).map(|c| hm[(m, c)]).collect();
                fac = fac.append(&col, &row, hm[(m, m)])?;
                stats.refactored |= fac.refactored();
                stats.extensions += 1;
            }
        }
        let cur = owned.as_ref().unwrap_or(basis);
        let m = cur.size();

        let psi = cur.project(&fi);
        // h ψ_i + h H Σ_{j<i} γ_{i,j} λ̂_j
        let mut acc = vec![0.0; m];
        for (j, st) in stages.iter().enumerate() {
            let g = tableau.gamma_lower[(i, j)];
            if g != 0.0 {
                linalg::axpy(g, &st.lambda, &mut acc[..st.lambda.len()]);
            }
        }
        let mut rhs = cur.h().matvec(&acc);
        for (r, p) in rhs.iter_mut().zip(&psi) {
            *r = h * (*r + p);
        }
        let lambda = fac.solve(&rhs)?;

        let vpsi = cur.combine(&psi);
        let mut k = cur.combine(&lambda);
        for ((kk, fv), vp) in k.iter_mut().zip(&fi).zip(&vpsi) {
            *kk += h * (fv - vp);
        }
        if !linalg::all_finite(&k) {
            return Err(Error::NonFinite);
        }
        stages.push(StageData { f: fi, psi, lambda, k, basis_size: m });
    }

    let mut y_new = y.to_vec();
    let mut y_emb = y.to_vec();
    for (i, st) in stages.iter().enumerate() {
        linalg::axpy(tableau.b[i], &st.k, &mut y_new);
        linalg::axpy(tableau.b_hat[i], &st.k, &mut y_emb);
    }
    let final_basis = owned.as_ref().unwrap_or(basis);
    stats.basis_size = final_basis.size();
    stats.jvp_evals = final_basis.jvp_evals() - jvp_before;
    stats.first_stage_residual = first_stage_residual_norm(h, tableau.gamma, basis, &stages[0].lambda);

    Ok(StepResult {
        y_new,
        y_embedded: y_emb,
        stats,
        internals: StepInternals { y: y.to_vec(), h, stages, extended_basis: owned },
    })
}

fn check_stage(internals: &StepInternals, i: usize) -> Result<()> {
    if i >= internals.stages.len() {
        return Err(Error::InvalidArgument("stage index out of range"));
    }
    Ok(())
}

/// `Σ_{j≤i} γ_{i,j} λ̂_j` zero-padded to the stage-`i` basis size.
fn gamma_lambda(tableau: &Tableau, internals: &StepInternals, i: usize) -> Vec<f64> {
    let mut c = vec![0.0; internals.stages[i].basis_size];
    for (j, st) in internals.stages[..=i].iter().enumerate() {
        linalg::axpy(tableau.gamma_ij(i, j), &st.lambda, &mut c[..st.lambda.len()]);
    }
    c
}

/// `Σ_{j≤i} γ_{i,j} (F_j − V_j ψ_j)` where `V_j` is the stage-`j` basis.
fn gamma_defect(tableau: &Tableau, basis: &KrylovBasis, internals: &StepInternals, i: usize) -> Vec<f64> {
    let mut d = vec![0.0; internals.y.len()];
    for (j, st) in internals.stages[..=i].iter().enumerate() {
        let vpsi = basis.combine(&st.psi);
        let g = tableau.gamma_ij(i, j);
        for ((dd, f), vp) in d.iter_mut().zip(&st.f).zip(&vpsi) {
            *dd += g * (f - vp);
        }
    }
    d
}

/// Stage residual of an unextended step from the Krylov relation:
/// `r_i = −h² J Σ_{j≤i} γ_{i,j}(F_j − Vψ_j) − h h_{M+1,M} v_{M+1} e_Mᵀ Σ_{j≤i} γ_{i,j} λ_j`.
/// One Jacobian-vector product.
pub fn stage_residual_formula<P: OdeProblem + ?Sized>(
    problem: &P,
    tableau: &Tableau,
    basis: &KrylovBasis,
    internals: &StepInternals,
    i: usize,
) -> Result<Vec<f64>> {
    check_stage(internals, i)?;
    if internals.extended_basis.is_some() || basis.ext_count() > 0 {
        return Err(Error::InvalidArgument("step used an extended basis"));
    }
    residual_from_relation(problem, tableau, basis, internals, i)
}

/// Stage residual of a step with stage-wise extension:
/// `r_i = −h (I − V_M V_Mᵀ) J v_M e_Mᵀ c − h (I − V_{M;i} V_{M;i}ᵀ) J Σ_k v̄_k e_{M+k}ᵀ c`
/// with `c = Σ_{j≤i} γ_{i,j} λ̂_j`. The `F_j − V_{M;j} ψ_j` contributions are
/// zero by construction except where an extension was dropped as already in
/// the span; they are included so the result stays exact in that case.
pub fn stage_residual_formula_extended<P: OdeProblem + ?Sized>(
    problem: &P,
    tableau: &Tableau,
    basis: &KrylovBasis,
    internals: &StepInternals,
    i: usize,
) -> Result<Vec<f64>> {
    check_stage(internals, i)?;
    let b = internals.extended_basis.as_ref().unwrap_or(basis);
    residual_from_relation(problem, tableau, b, internals, i)
}

fn residual_from_relation<P: OdeProblem + ?Sized>(
    problem: &P,
    tableau: &Tableau,
    basis: &KrylovBasis,
    internals: &StepInternals,
    i: usize,
) -> Result<Vec<f64>> {
    let h = internals.h;
    let n = internals.y.len();
    let core = basis.core_size();
    let mi = internals.stages[i].basis_size;
    let c = gamma_lambda(tableau, internals, i);

    let d = gamma_defect(tableau, basis, internals, i);
    let mut r = vec![0.0; n];
    if linalg::max_abs(&d) > 0.0 {
        problem.jvp(&internals.y, &d, &mut r);
        if !linalg::all_finite(&r) {
            return Err(Error::JvpFailure);
        }
        linalg::scale(-h * h, &mut r);
    }

    if core > 0 {
        if let Some(vn) = basis.v_next() {
            linalg::axpy(-h * basis.h_next() * c[core - 1], vn, &mut r);
        }
    }

    if mi > core {
        let mut t = vec![0.0; n];
        for k in 0..(mi - core) {
            linalg::axpy(c[core + k], basis.ext_jv(k), &mut t);
        }
        basis.remove_projection(mi, &mut t);
        linalg::axpy(-h, &t, &mut r);
    }
    Ok(r)
}

/// `r_i = k_i − h F_i − h J Σ_{j≤i} γ_{i,j} k_j`, evaluated directly in the
/// full space with one Jacobian-vector product.
pub fn direct_stage_residual<P: OdeProblem + ?Sized>(
    problem: &P,
    tableau: &Tableau,
    internals: &StepInternals,
    i: usize,
) -> Result<Vec<f64>> {
    check_stage(internals, i)?;
    let n = internals.y.len();
    let h = internals.h;
    let mut sk = vec![0.0; n];
    for (j, st) in internals.stages[..=i].iter().enumerate() {
        linalg::axpy(tableau.gamma_ij(i, j), &st.k, &mut sk);
    }
    let mut jsk = vec![0.0; n];
    problem.jvp(&internals.y, &sk, &mut jsk);
    if !linalg::all_finite(&jsk) {
        return Err(Error::JvpFailure);
    }
    let st = &internals.stages[i];
    Ok((0..n).map(|r| st.k[r] - h * st.f[r] - h * jsk[r]).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arnoldi::build_fixed;
    use crate::linalg::DenseMatrix;
    use crate::problem::make_linear;

    #[test]
    fn equilibrium_step_is_identity() {
        let p = make_linear(DenseMatrix::from_rows(&[&[-1.0, 0.0], &[0.0, -2.0]]));
        let y = [0.0, 0.0];
        let r = rok_step(&p, &y, 0.1, &Tableau::rok4l(), &KrylovBasis::empty(2), true).unwrap();
        assert_eq!(r.y_new, vec![0.0, 0.0]);
        assert_eq!(r.y_embedded, vec![0.0, 0.0]);
        assert!(r.internals.stages.iter().all(|s| s.k.iter().all(|x| *x == 0.0)));
    }

    #[test]
    fn first_stage_residual_matches_corollary() {
        let p = make_linear(DenseMatrix::from_fn(4, 4, |i, j| if i == j { -(i as f64 + 1.0) } else { 0.1 * (i + 2 * j) as f64 }));
        let y = [1.0, -0.5, 0.25, 2.0];
        let mut f = [0.0; 4];
        p.rhs(&y, &mut f);
        let t = Tableau::rok4l();
        let basis = build_fixed(&p, &y, &f, 2).unwrap();
        let step = rok_step(&p, &y, 0.2, &t, &basis, false).unwrap();
        let r1 = stage_residual_formula(&p, &t, &basis, &step.internals, 0).unwrap();
        let norm = linalg::norm2(&r1);
        assert!((norm - step.stats.first_stage_residual).abs() <= 1e-13 * norm);
    }
}
