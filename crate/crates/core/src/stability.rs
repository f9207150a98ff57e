//! Linear stability of the method on `y' = J y` when the stage systems use an
//! approximation `A` of the Jacobian.
//!
//! With `T = I − α⊗hJ − γ⊗hA` and `B = I − β⊗hJ` (`β = α + γ`, `γ` including
//! its diagonal), one step maps `y` to `R̃ y = y + (bᵀ⊗I) T⁻¹ (1⊗hJ) y`. The
//! classical Rosenbrock matrix `R(hJ)` is the case `A = J`, and
//! `S = R̃ − R` is the stage stability term.

use alloc::vec;
use alloc::vec::Vec;

use crate::arnoldi::KrylovBasis;
use crate::error::{Error, Result};
use crate::linalg::{self, spectral_radius, DenseLu, DenseMatrix};
use crate::problem::make_linear;
use crate::rok::rok_step;
use crate::tableau::Tableau;

/// Largest `N·s` for which block systems are assembled densely.
pub const MAX_BLOCK_DIM: usize = 2000;

fn check_inputs(j: &DenseMatrix, a: &DenseMatrix, tableau: &Tableau) -> Result<usize> {
    if !j.is_square() {
        return Err(Error::DimensionMismatch { expected: j.rows(), found: j.cols() });
    }
    if a.rows() != j.rows() || a.cols() != j.cols() {
        return Err(Error::DimensionMismatch { expected: j.rows(), found: a.rows() });
    }
    let n = j.rows();
    if n * tableau.stages > MAX_BLOCK_DIM {
        return Err(Error::InvalidArgument("block system too large for dense assembly"));
    }
    Ok(n)
}

/// `I − α⊗hJ − γ⊗hA`
fn stage_matrix(tableau: &Tableau, j: &DenseMatrix, a: &DenseMatrix, h: f64) -> DenseMatrix {
    let ns = j.rows() * tableau.stages;
    let t = tableau.alpha.kron(&j.scaled(h)).add(&tableau.gamma_matrix().kron(&a.scaled(h)));
    DenseMatrix::identity(ns).sub(&t)
}

/// `I − β⊗hJ`
fn classical_matrix(tableau: &Tableau, j: &DenseMatrix, h: f64) -> DenseMatrix {
    let ns = j.rows() * tableau.stages;
    DenseMatrix::identity(ns).sub(&tableau.beta_matrix().kron(&j.scaled(h)))
}

/// `(1⊗hJ) y`
fn stacked(tableau: &Tableau, j: &DenseMatrix, h: f64, y: &[f64]) -> Vec<f64> {
    let hjy: Vec<f64> = j.matvec(y).iter().map(|x| h * x).collect();
    let mut out = Vec::with_capacity(hjy.len() * tableau.stages);
    for _ in 0..tableau.stages {
        out.extend_from_slice(&hjy);
    }
    out
}

/// `(bᵀ⊗I) K`
fn weigh(tableau: &Tableau, k: &[f64], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n];
    for (i, bi) in tableau.b.iter().enumerate() {
        linalg::axpy(*bi, &k[i * n..(i + 1) * n], &mut out);
    }
    out
}

/// `A = V H Vᵀ`
pub fn projected_jacobian(basis: &KrylovBasis) -> DenseMatrix {
    let v = basis.v_matrix();
    v.matmul(basis.h()).matmul(&v.transpose())
}

/// `R̃(hJ, hA)` assembled from the block stage system.
pub fn transfer_matrix_analytic(j: &DenseMatrix, a: &DenseMatrix, tableau: &Tableau, h: f64) -> Result<DenseMatrix> {
    let n = check_inputs(j, a, tableau)?;
    let lu = DenseLu::factor(&stage_matrix(tableau, j, a, h))?;
    let mut r = DenseMatrix::identity(n);
    let mut e = vec![0.0; n];
    for c in 0..n {
        e.fill(0.0);
        e[c] = 1.0;
        let k = lu.solve(&stacked(tableau, j, h, &e))?;
        let w = weigh(tableau, &k, n);
        linalg::axpy(1.0, &w, r.col_mut(c));
    }
    Ok(r)
}

/// `R(hJ)`, the classical Rosenbrock stability matrix.
pub fn classical_transfer_matrix(j: &DenseMatrix, tableau: &Tableau, h: f64) -> Result<DenseMatrix> {
    transfer_matrix_analytic(j, j, tableau, h)
}

/// Where the stage systems get their Jacobian approximation.
#[derive(Clone, Copy, Debug)]
pub enum Approximation<'a> {
    /// A Krylov basis; `A = V H Vᵀ` and steps go through the reduced solver.
    Basis(&'a KrylovBasis),
    /// An explicit matrix used in the dense stage recursion.
    Matrix(&'a DenseMatrix),
}

/// One step of the stage recursion `(I − hγA) k_i = hJ(y + Σ α_{i,j} k_j) + hA Σ_{j<i} γ_{i,j} k_j`
/// with dense matrices.
pub fn w_step_linear(j: &DenseMatrix, a: &DenseMatrix, tableau: &Tableau, h: f64, y: &[f64]) -> Result<Vec<f64>> {
    let n = check_inputs(j, a, tableau)?;
    let lu = DenseLu::factor(&DenseMatrix::identity(n).sub(&a.scaled(h * tableau.gamma)))?;
    let mut ks: Vec<Vec<f64>> = Vec::with_capacity(tableau.stages);
    for i in 0..tableau.stages {
        let mut yi = y.to_vec();
        let mut g = vec![0.0; n];
        for (jj, k) in ks.iter().enumerate() {
            linalg::axpy(tableau.alpha[(i, jj)], k, &mut yi);
            linalg::axpy(tableau.gamma_lower[(i, jj)], k, &mut g);
        }
        let mut rhs = j.matvec(&yi);
        linalg::axpy(1.0, &a.matvec(&g), &mut rhs);
        linalg::scale(h, &mut rhs);
        ks.push(lu.solve(&rhs)?);
    }
    let mut out = y.to_vec();
    for (bi, k) in tableau.b.iter().zip(&ks) {
        linalg::axpy(*bi, k, &mut out);
    }
    Ok(out)
}

/// `R̃` column by column from single steps started at each `e_j`.
pub fn transfer_matrix_empirical(j: &DenseMatrix, approx: Approximation<'_>, tableau: &Tableau, h: f64) -> Result<DenseMatrix> {
    if !j.is_square() {
        return Err(Error::DimensionMismatch { expected: j.rows(), found: j.cols() });
    }
    let n = j.rows();
    let problem = make_linear(j.clone());
    let mut r = DenseMatrix::zeros(n, n);
    let mut e = vec![0.0; n];
    for c in 0..n {
        e.fill(0.0);
        e[c] = 1.0;
        let col = match approx {
            Approximation::Basis(basis) => rok_step(&problem, &e, h, tableau, basis, false)?.y_new,
            Approximation::Matrix(a) => w_step_linear(j, a, tableau, h, &e)?,
        };
        r.col_mut(c).copy_from_slice(&col);
    }
    Ok(r)
}

/// `S(hJ, hA) y = −(bᵀ⊗I) [I − β⊗hJ]⁻¹ [γ⊗(hJ − hA)] [I − γ⊗hA]⁻¹ (h F)`,
/// where `F` stacks the stage right-hand sides `J(y + Σ α_{i,j} k_j)` of the
/// approximate-Jacobian step.
pub fn stage_stability_term(j: &DenseMatrix, a: &DenseMatrix, tableau: &Tableau, h: f64, y: &[f64]) -> Result<Vec<f64>> {
    let n = check_inputs(j, a, tableau)?;
    let s = tableau.stages;
    let k = DenseLu::factor(&stage_matrix(tableau, j, a, h))?.solve(&stacked(tableau, j, h, y))?;
    let mut hf = vec![0.0; n * s];
    for i in 0..s {
        let mut yi = y.to_vec();
        for jj in 0..i {
            linalg::axpy(tableau.alpha[(i, jj)], &k[jj * n..(jj + 1) * n], &mut yi);
        }
        let fi = j.matvec(&yi);
        for (dst, v) in hf[i * n..(i + 1) * n].iter_mut().zip(fi) {
            *dst = h * v;
        }
    }
    let ga = tableau.gamma_matrix().kron(&a.scaled(h));
    let x = DenseLu::factor(&DenseMatrix::identity(n * s).sub(&ga))?.solve(&hf)?;
    let diff = tableau.gamma_matrix().kron(&j.sub(a).scaled(h));
    let z = DenseLu::factor(&classical_matrix(tableau, j, h))?.solve(&diff.matvec(&x))?;
    let mut out = weigh(tableau, &z, n);
    linalg::scale(-1.0, &mut out);
    Ok(out)
}

/// `S(hJ, hA) y = (bᵀ⊗I) (T⁻¹ − [I − β⊗hJ]⁻¹) (1⊗hJ) y`
pub fn stage_stability_term_resolvent(j: &DenseMatrix, a: &DenseMatrix, tableau: &Tableau, h: f64, y: &[f64]) -> Result<Vec<f64>> {
    let n = check_inputs(j, a, tableau)?;
    let rhs = stacked(tableau, j, h, y);
    let kt = DenseLu::factor(&stage_matrix(tableau, j, a, h))?.solve(&rhs)?;
    let kb = DenseLu::factor(&classical_matrix(tableau, j, h))?.solve(&rhs)?;
    let d: Vec<f64> = kt.iter().zip(&kb).map(|(p, q)| p - q).collect();
    Ok(weigh(tableau, &d, n))
}

/// Max-abs gap between `T⁻¹ − B⁻¹` and `−B⁻¹ [γ⊗(hJ − hA)] T⁻¹`.
pub fn check_block_identity(j: &DenseMatrix, a: &DenseMatrix, tableau: &Tableau, h: f64) -> Result<f64> {
    check_inputs(j, a, tableau)?;
    let ti = DenseLu::factor(&stage_matrix(tableau, j, a, h))?.inverse();
    let bi = DenseLu::factor(&classical_matrix(tableau, j, h))?.inverse();
    let lhs = ti.sub(&bi);
    let diff = tableau.gamma_matrix().kron(&j.sub(a).scaled(h));
    let rhs = bi.matmul(&diff).matmul(&ti).scaled(-1.0);
    Ok(lhs.sub(&rhs).max_abs())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StabilityReport {
    /// `ρ(R(hJ))`
    pub rho_classic: f64,
    /// `ρ(R̃(hJ, hA))`
    pub rho_effective: f64,
    pub h: f64,
    pub basis_size: usize,
}

pub fn stability_report(j: &DenseMatrix, basis: &KrylovBasis, tableau: &Tableau, h: f64) -> Result<StabilityReport> {
    let a = projected_jacobian(basis);
    let rho_classic = spectral_radius(&classical_transfer_matrix(j, tableau, h)?)?;
    let rho_effective = spectral_radius(&transfer_matrix_analytic(j, &a, tableau, h)?)?;
    Ok(StabilityReport { rho_classic, rho_effective, h, basis_size: basis.size() })
}

/// `count` points spaced evenly in `log10` from `lo` to `hi`.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let (a, b) = (libm::log10(lo), libm::log10(hi));
            (0..count).map(|i| libm::pow(10.0, a + (b - a) * i as f64 / (count - 1) as f64)).collect()
        }
    }
}

/// Largest sampled `h` whose effective spectral radius is at most `1 + 1e-12`.
pub fn largest_stable_step(reports: &[StabilityReport]) -> Option<f64> {
    reports.iter().filter(|r| r.rho_effective <= 1.0 + 1e-12).map(|r| r.h).fold(None, |m, h| Some(m.map_or(h, |x: f64| x.max(h))))
}

/// `A_i = P_i J P_i` with `P_i` the projector onto the first `m_i` basis
/// vectors, one matrix per stage size.
pub fn per_stage_projections(j: &DenseMatrix, basis: &KrylovBasis, stage_sizes: &[usize]) -> Vec<DenseMatrix> {
    let n = basis.dim();
    stage_sizes
        .iter()
        .map(|&m| {
            let cols: Vec<Vec<f64>> = (0..m).map(|c| basis.column(c).to_vec()).collect();
            let v = DenseMatrix::from_columns(n, &cols);
            let p = v.matmul(&v.transpose());
            p.matmul(j).matmul(&p)
        })
        .collect()
}

/// Block matrix `[γ_{i,j} A_j]` for stage-dependent approximations.
pub fn assemble_a_gamma(tableau: &Tableau, a_stages: &[DenseMatrix]) -> DenseMatrix {
    let s = tableau.stages;
    let n = a_stages.first().map_or(0, |a| a.rows());
    DenseMatrix::from_fn(n * s, n * s, |r, c| {
        let (i, jj) = (r / n, c / n);
        if jj > i {
            0.0
        } else {
            tableau.gamma_ij(i, jj) * a_stages[jj][(r % n, c % n)]
        }
    })
}

/// Diagonal-block part of the stage-`i` component of the per-stage stability
/// term: returns `[I − hγJ]⁻¹ [hγJ − hγA_i] [I − hγA_i]⁻¹ F_i` and the
/// equivalent difference `[I − hγJ]⁻¹ F_i − [I − hγA_i]⁻¹ F_i`.
pub fn diagonal_stage_component(
    j: &DenseMatrix,
    a_i: &DenseMatrix,
    gamma: f64,
    h: f64,
    f_i: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = j.rows();
    let id = DenseMatrix::identity(n);
    let lj = DenseLu::factor(&id.sub(&j.scaled(h * gamma)))?;
    let la = DenseLu::factor(&id.sub(&a_i.scaled(h * gamma)))?;
    let xa = la.solve(f_i)?;
    let product = lj.solve(&j.sub(a_i).scaled(h * gamma).matvec(&xa))?;
    let xj = lj.solve(f_i)?;
    let difference = xj.iter().zip(&xa).map(|(p, q)| p - q).collect();
    Ok((product, difference))
}
