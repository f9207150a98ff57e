//! Adaptive time stepping with embedded error control.

use alloc::vec;
use alloc::vec::Vec;

use crate::arnoldi::{build_adaptive, build_fixed, KrylovBasis, DEFAULT_TEST_INDICES};
use crate::error::{Error, Result};
use crate::linalg;
use crate::problem::OdeProblem;
use crate::rok::step_with_f1;
use crate::tableau::Tableau;

#[derive(Clone, Debug, PartialEq)]
pub enum BasisStrategy {
    /// Fixed Krylov dimension, clamped to the problem size.
    Fixed(usize),
    /// Residual-driven sizing with a fixed first-stage residual tolerance.
    AdaptiveResidual(f64),
    /// Residual-driven sizing with the tolerance tied to `rtol`.
    AdaptiveResidualMatchTol,
}

#[derive(Clone, Debug, PartialEq)]
pub struct IntegratorConfig {
    pub rtol: f64,
    pub atol: f64,
    pub basis_strategy: BasisStrategy,
    pub extend_with_stage_rhs: bool,
    pub h_init: f64,
    pub h_min: f64,
    pub h_max: f64,
    pub safety: f64,
    pub fac_min: f64,
    pub fac_max: f64,
    pub m_max: usize,
    pub test_indices: Vec<usize>,
    /// Attempted-step budget; exceeding it fails with `TooManySteps`.
    pub max_steps: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            rtol: 1e-6,
            atol: 1e-6,
            basis_strategy: BasisStrategy::AdaptiveResidualMatchTol,
            extend_with_stage_rhs: false,
            h_init: 1e-4,
            h_min: 1e-14,
            h_max: f64::INFINITY,
            safety: 0.9,
            fac_min: 0.2,
            fac_max: 5.0,
            m_max: 48,
            test_indices: DEFAULT_TEST_INDICES.to_vec(),
            max_steps: 200_000,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rtol > 0.0) || !(self.atol > 0.0) {
            return Err(Error::InvalidArgument("tolerances must be positive"));
        }
        if !(self.h_min > 0.0 && self.h_min <= self.h_init && self.h_init <= self.h_max) {
            return Err(Error::InvalidArgument("step sizes must satisfy 0 < h_min <= h_init <= h_max"));
        }
        if !(self.safety > 0.0 && self.safety <= 1.0) || !(self.fac_min > 0.0 && self.fac_min < 1.0) || !(self.fac_max > 1.0) {
            return Err(Error::InvalidArgument("controller factors out of range"));
        }
        if self.m_max == 0 {
            return Err(Error::InvalidArgument("m_max must be at least 1"));
        }
        match self.basis_strategy {
            BasisStrategy::Fixed(0) => return Err(Error::InvalidArgument("fixed basis size must be at least 1")),
            BasisStrategy::AdaptiveResidual(tol) if !(tol > 0.0) => {
                return Err(Error::InvalidArgument("residual tolerance must be positive"))
            }
            _ => {}
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RunStats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
    pub jvp_evals: usize,
    /// Sum of final basis sizes over attempted steps.
    pub basis_size_total: usize,
    pub extensions: usize,
    /// Steps whose adaptive basis hit `m_max` without meeting the tolerance.
    pub capped_bases: usize,
    pub max_first_stage_residual: f64,
}

impl RunStats {
    pub fn attempted(&self) -> usize {
        self.accepted + self.rejected
    }

    pub fn mean_basis(&self) -> f64 {
        if self.attempted() == 0 {
            0.0
        } else {
            self.basis_size_total as f64 / self.attempted() as f64
        }
    }
}

#[derive(Clone, Debug)]
pub struct Solution {
    pub t: f64,
    pub y: Vec<f64>,
    pub stats: RunStats,
}

/// What the observer sees after each attempted step.
#[derive(Clone, Copy, Debug)]
pub struct StepReport {
    /// Start of the attempted step.
    pub t: f64,
    pub h: f64,
    pub accepted: bool,
    pub err: f64,
    pub basis_size: usize,
    pub first_stage_residual: f64,
}

pub fn integrate<P: OdeProblem + ?Sized>(
    problem: &P,
    t0: f64,
    tf: f64,
    y0: &[f64],
    tableau: &Tableau,
    config: &IntegratorConfig,
) -> Result<Solution> {
    integrate_with_observer(problem, t0, tf, y0, tableau, config, |_| {})
}

/// Accept/reject loop. The error estimate is the RMS norm of
/// `(y_new − y_emb) / (atol + rtol |y_new|)`; the next step is
/// `h · clamp(safety · err^(−1/(q+1)), fac_min, fac_max)` with `q` the lower
/// of the two orders. Non-finite stages and singular reduced systems halve
/// the step.
pub fn integrate_with_observer<P: OdeProblem + ?Sized>(
    problem: &P,
    t0: f64,
    tf: f64,
    y0: &[f64],
    tableau: &Tableau,
    config: &IntegratorConfig,
    mut observer: impl FnMut(&StepReport),
) -> Result<Solution> {
    config.validate()?;
    let n = problem.dim();
    if y0.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: y0.len() });
    }
    if !(tf > t0) {
        return Err(Error::InvalidArgument("final time must exceed initial time"));
    }
    if !linalg::all_finite(y0) {
        return Err(Error::InvalidArgument("initial state is not finite"));
    }

    let exponent = -1.0 / (tableau.controller_order() as f64 + 1.0);
    let mut stats = RunStats::default();
    let mut t = t0;
    let mut y = y0.to_vec();
    let mut h = config.h_init.min(config.h_max);
    let mut fy = vec![0.0; n];
    problem.rhs(&y, &mut fy);
    stats.rhs_evals += 1;
    if !linalg::all_finite(&fy) {
        return Err(Error::NonFinite);
    }
    // Basis at the current state; only a fixed-size basis survives a rejection.
    let mut cached: Option<KrylovBasis> = None;

    while t < tf {
        if stats.attempted() >= config.max_steps {
            return Err(Error::TooManySteps { t, steps: stats.attempted() });
        }
        let remaining = tf - t;
        let last = h >= remaining;
        let h_step = if last { remaining } else { h };
        if !last && h < config.h_min {
            return Err(Error::StepSizeUnderflow { t, h });
        }

        let mut capped = false;
        let basis = match cached.take() {
            Some(b) => Ok(b),
            None => {
                let built = match config.basis_strategy {
                    BasisStrategy::Fixed(m) => build_fixed(problem, &y, &fy, m),
                    BasisStrategy::AdaptiveResidual(tol) => adaptive(problem, &y, &fy, h_step, tableau, tol, config, &mut capped),
                    BasisStrategy::AdaptiveResidualMatchTol => {
                        adaptive(problem, &y, &fy, h_step, tableau, config.rtol, config, &mut capped)
                    }
                };
                match built {
                    Ok(b) => {
                        stats.jvp_evals += b.jvp_evals();
                        Ok(b)
                    }
                    Err(Error::ZeroStartVector) => Ok(KrylovBasis::empty(n)),
                    Err(e) => Err(e),
                }
            }
        }?;
        if capped {
            stats.capped_bases += 1;
        }

        let outcome = step_with_f1(problem, &y, Some(&fy), h_step, tableau, &basis, config.extend_with_stage_rhs);
        let step = match outcome {
            Ok(s) => s,
            Err(Error::NonFinite) | Err(Error::Singular { .. }) => {
                stats.rejected += 1;
                stats.basis_size_total += basis.size();
                observer(&StepReport {
                    t,
                    h: h_step,
                    accepted: false,
                    err: f64::INFINITY,
                    basis_size: basis.size(),
                    first_stage_residual: f64::NAN,
                });
                if matches!(config.basis_strategy, BasisStrategy::Fixed(_)) {
                    cached = Some(basis);
                }
                h = 0.5 * h_step;
                continue;
            }
            Err(e) => return Err(e),
        };
        stats.rhs_evals += step.stats.rhs_evals;
        stats.jvp_evals += step.stats.jvp_evals;
        stats.extensions += step.stats.extensions;
        stats.basis_size_total += step.stats.basis_size;
        if step.stats.first_stage_residual > stats.max_first_stage_residual {
            stats.max_first_stage_residual = step.stats.first_stage_residual;
        }

        let err = error_norm(&step.y_new, &step.y_embedded, config.atol, config.rtol);
        let factor = if err == 0.0 {
            config.fac_max
        } else if err.is_finite() {
            (config.safety * libm::pow(err, exponent)).clamp(config.fac_min, config.fac_max)
        } else {
            config.fac_min
        };
        let accepted = err <= 1.0;
        observer(&StepReport {
            t,
            h: h_step,
            accepted,
            err,
            basis_size: step.stats.basis_size,
            first_stage_residual: step.stats.first_stage_residual,
        });

        if accepted {
            stats.accepted += 1;
            t = if last { tf } else { t + h_step };
            y = step.y_new;
            problem.rhs(&y, &mut fy);
            stats.rhs_evals += 1;
            if !linalg::all_finite(&fy) {
                return Err(Error::NonFinite);
            }
            // A clipped final step says nothing about the natural step size.
            let base = if last { h.max(h_step) } else { h_step };
            h = (base * factor).min(config.h_max);
        } else {
            stats.rejected += 1;
            if matches!(config.basis_strategy, BasisStrategy::Fixed(_)) {
                cached = Some(basis);
            }
            h = h_step * factor.min(1.0);
        }
    }
    Ok(Solution { t, y, stats })
}

#[allow(clippy::too_many_arguments)]
fn adaptive<P: OdeProblem + ?Sized>(
    problem: &P,
    y: &[f64],
    fy: &[f64],
    h: f64,
    tableau: &Tableau,
    tol: f64,
    config: &IntegratorConfig,
    capped: &mut bool,
) -> Result<KrylovBasis> {
    let a = build_adaptive(problem, y, fy, h, tableau.gamma, tol, config.m_max, &config.test_indices)?;
    *capped = a.capped;
    Ok(a.basis)
}

/// `sqrt(mean(((a − b) / (atol + rtol |a|))²))`
pub fn error_norm(y_new: &[f64], y_emb: &[f64], atol: f64, rtol: f64) -> f64 {
    if y_new.is_empty() {
        return 0.0;
    }
    let sum: f64 = y_new
        .iter()
        .zip(y_emb)
        .map(|(a, b)| {
            let e = (a - b) / (atol + rtol * libm::fabs(*a));
            e * e
        })
        .sum();
    libm::sqrt(sum / y_new.len() as f64)
}
