//! Full-space solvers for reference solutions: classical Rosenbrock with the
//! exact Jacobian (dense LU or GMRES stage solves) and fixed-step RK4.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::integrate::{error_norm, RunStats, Solution};
use crate::linalg::{self, DenseLu, DenseMatrix};
use crate::problem::OdeProblem;
use crate::tableau::Tableau;

#[derive(Clone, Debug, PartialEq)]
pub struct ReferenceConfig {
    pub rtol: f64,
    pub atol: f64,
    pub h_init: f64,
    pub h_min: f64,
    pub max_steps: usize,
    /// Problems up to this size get a dense Jacobian and LU stage solves.
    pub dense_limit: usize,
    /// Relative residual target for GMRES stage solves.
    pub gmres_tol: f64,
    pub gmres_restart: usize,
    pub gmres_max_iters: usize,
}

impl Default for ReferenceConfig {
    fn default() -> Self {
        Self {
            rtol: 1e-12,
            atol: 1e-12,
            h_init: 1e-6,
            h_min: 1e-16,
            max_steps: 1_000_000,
            dense_limit: 400,
            gmres_tol: 1e-14,
            gmres_restart: 60,
            gmres_max_iters: 2000,
        }
    }
}

/// Dense Jacobian from `N` Jacobian-vector products, unless the problem
/// provides one.
pub fn assemble_jacobian<P: OdeProblem + ?Sized>(problem: &P, y: &[f64]) -> Result<DenseMatrix> {
    if let Some(j) = problem.dense_jacobian(y) {
        return Ok(j);
    }
    let n = problem.dim();
    let mut j = DenseMatrix::zeros(n, n);
    let mut e = vec![0.0; n];
    for c in 0..n {
        e.fill(0.0);
        e[c] = 1.0;
        problem.jvp(y, &e, j.col_mut(c));
    }
    if !j.is_finite() {
        return Err(Error::JvpFailure);
    }
    Ok(j)
}

/// Restarted GMRES with modified Gram-Schmidt and Givens rotations for
/// `op(x) = b`, starting from zero. Returns the solution and the iteration
/// count.
pub fn gmres(
    op: &mut dyn FnMut(&[f64], &mut [f64]),
    b: &[f64],
    tol: f64,
    restart: usize,
    max_iters: usize,
) -> Result<(Vec<f64>, usize)> {
    let n = b.len();
    let bnorm = linalg::norm2(b);
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok((x, 0));
    }
    let target = tol * bnorm;
    let restart = restart.max(1).min(n.max(1));
    let mut iters = 0;
    let mut r = b.to_vec();
    let mut w = vec![0.0; n];
    loop {
        let beta = linalg::norm2(&r);
        if beta <= target {
            return Ok((x, iters));
        }
        if iters >= max_iters {
            return Err(Error::NoConvergence { estimate: beta / bnorm });
        }
        let mut v: Vec<Vec<f64>> = vec![r.iter().map(|t| t / beta).collect()];
        let mut hcols: Vec<Vec<f64>> = Vec::new();
        let (mut cs, mut sn) = (Vec::<f64>::new(), Vec::<f64>::new());
        let mut g = vec![beta];
        let mut k = 0;
        while k < restart && iters < max_iters {
            op(&v[k], &mut w);
            let mut col = vec![0.0; k + 2];
            for _ in 0..2 {
                for (i, vi) in v.iter().enumerate() {
                    let c = linalg::dot(&w, vi);
                    linalg::axpy(-c, vi, &mut w);
                    col[i] += c;
                }
            }
            let hn = linalg::norm2(&w);
            col[k + 1] = hn;
            for i in 0..k {
                let t = cs[i] * col[i] + sn[i] * col[i + 1];
                col[i + 1] = -sn[i] * col[i] + cs[i] * col[i + 1];
                col[i] = t;
            }
            let d = libm::hypot(col[k], col[k + 1]);
            let (c, s) = if d == 0.0 { (1.0, 0.0) } else { (col[k] / d, col[k + 1] / d) };
            col[k] = d;
            col[k + 1] = 0.0;
            cs.push(c);
            sn.push(s);
            g.push(-s * g[k]);
            g[k] *= c;
            hcols.push(col);
            iters += 1;
            k += 1;
            if libm::fabs(g[k]) <= target || hn == 0.0 {
                break;
            }
            v.push(w.iter().map(|t| t / hn).collect());
        }
        // back substitution on the triangularized Hessenberg matrix
        let mut yk = vec![0.0; k];
        for i in (0..k).rev() {
            let mut s = g[i];
            for jj in i + 1..k {
                s -= hcols[jj][i] * yk[jj];
            }
            yk[i] = s / hcols[i][i];
        }
        for (i, c) in yk.iter().enumerate() {
            linalg::axpy(*c, &v[i], &mut x);
        }
        op(&x, &mut w);
        for ((ri, bi), wi) in r.iter_mut().zip(b).zip(&w) {
            *ri = bi - wi;
        }
    }
}

enum StageSolver {
    Dense { j: DenseMatrix, lu: DenseLu },
    Krylov,
}

/// One classical Rosenbrock step: `(I − hγJ) k_i = h F_i + h J Σ_{j<i} γ_{i,j} k_j`.
fn classical_step<P: OdeProblem + ?Sized>(
    problem: &P,
    y: &[f64],
    h: f64,
    tableau: &Tableau,
    solver: &StageSolver,
    cfg: &ReferenceConfig,
    stats: &mut RunStats,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = y.len();
    let hg = h * tableau.gamma;
    let mut ks: Vec<Vec<f64>> = Vec::with_capacity(tableau.stages);
    let mut fi = vec![0.0; n];
    let mut jg = vec![0.0; n];
    for i in 0..tableau.stages {
        let mut yi = y.to_vec();
        let mut g = vec![0.0; n];
        for (jj, k) in ks.iter().enumerate() {
            linalg::axpy(tableau.alpha[(i, jj)], k, &mut yi);
            linalg::axpy(tableau.gamma_lower[(i, jj)], k, &mut g);
        }
        problem.rhs(&yi, &mut fi);
        stats.rhs_evals += 1;
        if !linalg::all_finite(&fi) {
            return Err(Error::NonFinite);
        }
        let mut rhs: Vec<f64> = fi.iter().map(|f| h * f).collect();
        if i > 0 {
            match solver {
                StageSolver::Dense { j, .. } => j.matvec_into(&g, &mut jg),
                StageSolver::Krylov => {
                    problem.jvp(y, &g, &mut jg);
                    stats.jvp_evals += 1;
                }
            }
            linalg::axpy(h, &jg, &mut rhs);
        }
        let k = match solver {
            StageSolver::Dense { lu, .. } => lu.solve(&rhs)?,
            StageSolver::Krylov => {
                let mut count = 0usize;
                let mut op = |x: &[f64], out: &mut [f64]| {
                    problem.jvp(y, x, out);
                    count += 1;
                    for (o, xi) in out.iter_mut().zip(x) {
                        *o = xi - hg * *o;
                    }
                };
                let (k, _) = gmres(&mut op, &rhs, cfg.gmres_tol, cfg.gmres_restart, cfg.gmres_max_iters)?;
                stats.jvp_evals += count;
                k
            }
        };
        if !linalg::all_finite(&k) {
            return Err(Error::NonFinite);
        }
        ks.push(k);
    }
    let mut y_new = y.to_vec();
    let mut y_emb = y.to_vec();
    for (i, k) in ks.iter().enumerate() {
        linalg::axpy(tableau.b[i], k, &mut y_new);
        linalg::axpy(tableau.b_hat[i], k, &mut y_emb);
    }
    Ok((y_new, y_emb))
}

/// Adaptive classical Rosenbrock integration with the exact Jacobian, the
/// stage systems solved to near machine precision.
pub fn rosenbrock_reference<P: OdeProblem + ?Sized>(
    problem: &P,
    t0: f64,
    tf: f64,
    y0: &[f64],
    tableau: &Tableau,
    cfg: &ReferenceConfig,
) -> Result<Solution> {
    let n = problem.dim();
    if y0.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: y0.len() });
    }
    if !(tf > t0) {
        return Err(Error::InvalidArgument("final time must exceed initial time"));
    }
    let exponent = -1.0 / (tableau.controller_order() as f64 + 1.0);
    let mut stats = RunStats::default();
    let (mut t, mut y, mut h) = (t0, y0.to_vec(), cfg.h_init);
    let mut solver: Option<StageSolver> = None;
    while t < tf {
        if stats.attempted() >= cfg.max_steps {
            return Err(Error::TooManySteps { t, steps: stats.attempted() });
        }
        let last = h >= tf - t;
        let hs = if last { tf - t } else { h };
        if !last && h < cfg.h_min {
            return Err(Error::StepSizeUnderflow { t, h });
        }
        let s = match solver.take() {
            Some(s) => s,
            None if n <= cfg.dense_limit => {
                let j = assemble_jacobian(problem, &y)?;
                let lu = DenseLu::factor(&DenseMatrix::identity(n).sub(&j.scaled(hs * tableau.gamma)));
                match lu {
                    Ok(lu) => StageSolver::Dense { j, lu },
                    Err(Error::Singular { .. }) => {
                        stats.rejected += 1;
                        h = 0.5 * hs;
                        continue;
                    }
                    Err(e) => return Err(e),
                }
            }
            None => StageSolver::Krylov,
        };
        match classical_step(problem, &y, hs, tableau, &s, cfg, &mut stats) {
            Ok((y_new, y_emb)) => {
                let err = error_norm(&y_new, &y_emb, cfg.atol, cfg.rtol);
                let factor = if err == 0.0 { 5.0 } else { (0.9 * libm::pow(err, exponent)).clamp(0.2, 5.0) };
                if err <= 1.0 {
                    stats.accepted += 1;
                    t = if last { tf } else { t + hs };
                    y = y_new;
                    h = if last { h.max(hs) } else { hs } * factor;
                } else {
                    stats.rejected += 1;
                    h = hs * factor.min(1.0);
                    if let StageSolver::Krylov = s {
                        solver = Some(s);
                    }
                }
            }
            Err(Error::NonFinite) | Err(Error::NoConvergence { .. }) => {
                stats.rejected += 1;
                h = 0.5 * hs;
            }
            Err(e) => return Err(e),
        }
    }
    Ok(Solution { t, y, stats })
}

/// Classical fourth-order Runge-Kutta with `steps` equal steps.
pub fn rk4_fixed<P: OdeProblem + ?Sized>(problem: &P, t0: f64, tf: f64, y0: &[f64], steps: usize) -> Result<Vec<f64>> {
    if steps == 0 {
        return Err(Error::InvalidArgument("step count must be positive"));
    }
    let n = y0.len();
    let h = (tf - t0) / steps as f64;
    let mut y = y0.to_vec();
    let (mut k1, mut k2, mut k3, mut k4) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let mut tmp = vec![0.0; n];
    for _ in 0..steps {
        problem.rhs(&y, &mut k1);
        for i in 0..n {
            tmp[i] = y[i] + 0.5 * h * k1[i];
        }
        problem.rhs(&tmp, &mut k2);
        for i in 0..n {
            tmp[i] = y[i] + 0.5 * h * k2[i];
        }
        problem.rhs(&tmp, &mut k3);
        for i in 0..n {
            tmp[i] = y[i] + h * k3[i];
        }
        problem.rhs(&tmp, &mut k4);
        for i in 0..n {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        if !linalg::all_finite(&y) {
            return Err(Error::NonFinite);
        }
    }
    Ok(y)
}

/// Power-iteration estimate of `ρ(J(y))` from Jacobian-vector products,
/// started from a fixed deterministic vector. Underestimates when the
/// dominant eigenvalues are clustered.
pub fn estimate_spectral_radius<P: OdeProblem + ?Sized>(problem: &P, y: &[f64], iters: usize) -> Result<f64> {
    let n = problem.dim();
    let mut v: Vec<f64> = (0..n).map(|i| libm::sin(1.0 + 1.7 * i as f64)).collect();
    let nv = linalg::norm2(&v);
    linalg::scale(1.0 / nv, &mut v);
    let mut w = vec![0.0; n];
    let mut est: f64 = 0.0;
    for _ in 0..iters {
        problem.jvp(y, &v, &mut w);
        if !linalg::all_finite(&w) {
            return Err(Error::JvpFailure);
        }
        let nw = linalg::norm2(&w);
        if nw == 0.0 {
            return Ok(est);
        }
        est = est.max(nw);
        for (vi, wi) in v.iter_mut().zip(&w) {
            *vi = wi / nw;
        }
    }
    Ok(est)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::make_linear;

    #[test]
    fn gmres_solves_small_system() {
        let a = DenseMatrix::from_rows(&[&[4.0, 1.0, 0.0], &[1.0, 3.0, -1.0], &[0.0, 2.0, 5.0]]);
        let b = [1.0, 2.0, 3.0];
        let mut op = |x: &[f64], out: &mut [f64]| a.matvec_into(x, out);
        let (x, _) = gmres(&mut op, &b, 1e-14, 2, 100).unwrap();
        let r = a.matvec(&x);
        assert!(linalg::max_abs_diff(&r, &b) < 1e-13);
    }

    #[test]
    fn rk4_on_decay() {
        let p = make_linear(DenseMatrix::from_rows(&[&[-1.0]]));
        let y = rk4_fixed(&p, 0.0, 1.0, &[1.0], 1000).unwrap();
        assert!((y[0] - libm::exp(-1.0)).abs() < 1e-14);
    }

    #[test]
    fn reference_on_decay() {
        let p = make_linear(DenseMatrix::from_rows(&[&[-1.0]]));
        let sol = rosenbrock_reference(&p, 0.0, 1.0, &[1.0], &Tableau::rok4l(), &ReferenceConfig::default()).unwrap();
        assert!((sol.y[0] - libm::exp(-1.0)).abs() < 1e-11);
    }

    #[test]
    fn power_iteration_diagonal() {
        let p = make_linear(DenseMatrix::from_diagonal(&[-1.0, -10.0, 2.0]));
        let r = estimate_spectral_radius(&p, &[0.0; 3], 200).unwrap();
        assert!((r - 10.0).abs() < 1e-9);
    }
}
