//! Work-precision sweeps over (strategy, tolerance) cells.

use std::io::Write;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use rok_core::integrate::integrate_with_observer;
use rok_core::{BasisStrategy, IntegratorConfig, Tableau};

use crate::config::RunConfig;
use crate::reference::relative_l2;
use crate::registry::Registry;

/// A parsed strategy label.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepStrategy {
    pub label: String,
    pub basis: BasisStrategy,
    pub extend: bool,
}

impl SweepStrategy {
    /// `M=<k>`, `R=<tol>` or `R=tol`, optionally followed by `+ext`.
    pub fn parse(label: &str) -> Result<Self, String> {
        let (core, extend) = match label.strip_suffix("+ext") {
            Some(c) => (c, true),
            None => (label, false),
        };
        let bad = || format!("bad strategy label `{label}` (expected M=<k>, R=<tol> or R=tol, optional +ext)");
        let (kind, value) = core.split_once('=').ok_or_else(bad)?;
        let basis = match (kind.trim(), value.trim()) {
            ("M", v) => match v.parse::<usize>() {
                Ok(m) if m > 0 => BasisStrategy::Fixed(m),
                _ => return Err(bad()),
            },
            ("R", "tol") => BasisStrategy::AdaptiveResidualMatchTol,
            ("R", v) => match v.parse::<f64>() {
                Ok(t) if t > 0.0 => BasisStrategy::AdaptiveResidual(t),
                _ => return Err(bad()),
            },
            _ => return Err(bad()),
        };
        Ok(Self { label: label.to_string(), basis, extend })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRecord {
    pub problem: String,
    pub strategy: String,
    pub tol: f64,
    /// Relative L2 error against the reference; `None` when the run failed.
    pub error: Option<f64>,
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evals: Option<usize>,
    pub jvp_evals: Option<usize>,
    pub mean_basis: f64,
    pub extensions: Option<usize>,
    pub wall_seconds: Option<f64>,
    pub converged: bool,
    /// Failure reason for unconverged runs.
    pub note: String,
}

pub const HEADER: [&str; 13] = [
    "problem",
    "strategy",
    "tol",
    "error",
    "accepted",
    "rejected",
    "rhs_evals",
    "jvp_evals",
    "mean_basis",
    "extensions",
    "wall_seconds",
    "converged",
    "note",
];

fn opt<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map(ToString::to_string).unwrap_or_default()
}

impl SweepRecord {
    /// Fields in header order; floats use Rust's shortest round-trip form.
    pub fn fields(&self) -> Vec<String> {
        vec![
            self.problem.clone(),
            self.strategy.clone(),
            self.tol.to_string(),
            opt(&self.error),
            self.accepted.to_string(),
            self.rejected.to_string(),
            opt(&self.rhs_evals),
            opt(&self.jvp_evals),
            self.mean_basis.to_string(),
            opt(&self.extensions),
            opt(&self.wall_seconds),
            self.converged.to_string(),
            self.note.clone(),
        ]
    }
}

pub fn write_csv(records: &[SweepRecord], out: impl Write) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(HEADER)?;
    for r in records {
        w.write_record(r.fields())?;
    }
    w.flush()?;
    Ok(())
}

/// Runs one cell on its own problem instance.
pub fn run_cell(
    registry: &Registry,
    cfg: &RunConfig,
    tableau: &Tableau,
    strategy: &SweepStrategy,
    tol: f64,
    reference: &[f64],
) -> Result<SweepRecord, String> {
    let inst = registry.build(&cfg.problem, cfg.seed)?;
    let integ = IntegratorConfig {
        rtol: tol,
        atol: tol * cfg.sweep.atol_factor,
        basis_strategy: strategy.basis.clone(),
        extend_with_stage_rhs: strategy.extend,
        ..cfg.integrator.to_core()
    };
    let (mut accepted, mut rejected, mut basis_total) = (0usize, 0usize, 0usize);
    let start = Instant::now();
    let result = integrate_with_observer(&*inst.problem, inst.t0, inst.tf, &inst.y0, tableau, &integ, |rep| {
        basis_total += rep.basis_size;
        if rep.accepted {
            accepted += 1;
        } else {
            rejected += 1;
        }
    });
    let wall = cfg.sweep.wall_time.then(|| start.elapsed().as_secs_f64());
    let attempted = accepted + rejected;
    let mean = if attempted == 0 { 0.0 } else { basis_total as f64 / attempted as f64 };
    let mut rec = SweepRecord {
        problem: inst.problem.name().to_string(),
        strategy: strategy.label.clone(),
        tol,
        error: None,
        accepted,
        rejected,
        rhs_evals: None,
        jvp_evals: None,
        mean_basis: mean,
        extensions: None,
        wall_seconds: wall,
        converged: false,
        note: String::new(),
    };
    match result {
        Ok(sol) => {
            let err = relative_l2(&sol.y, reference);
            if err.is_finite() {
                rec.error = Some(err);
                rec.converged = true;
            } else {
                rec.note = "non-finite solution".into();
            }
            rec.accepted = sol.stats.accepted;
            rec.rejected = sol.stats.rejected;
            rec.rhs_evals = Some(sol.stats.rhs_evals);
            rec.jvp_evals = Some(sol.stats.jvp_evals);
            rec.mean_basis = sol.stats.mean_basis();
            rec.extensions = Some(sol.stats.extensions);
        }
        Err(e) => rec.note = e.to_string(),
    }
    Ok(rec)
}

/// All cells of the sweep in (strategy, tolerance) order, computed by up to
/// `workers` threads.
pub fn run_sweep(registry: &Registry, cfg: &RunConfig, tableau: &Tableau, reference: &[f64]) -> Result<Vec<SweepRecord>, String> {
    let strategies: Vec<SweepStrategy> = cfg.sweep.strategies.iter().map(|s| SweepStrategy::parse(s)).collect::<Result<_, _>>()?;
    let cells: Vec<(&SweepStrategy, f64)> =
        strategies.iter().flat_map(|s| cfg.sweep.tolerances.iter().map(move |&t| (s, t))).collect();
    let slots: Vec<Mutex<Option<Result<SweepRecord, String>>>> = cells.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let workers = cfg.workers.clamp(1, cells.len().max(1));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(&(s, tol)) = cells.get(i) else { break };
                let rec = run_cell(registry, cfg, tableau, s, tol, reference);
                *slots[i].lock().expect("slot lock") = Some(rec);
            });
        }
    });
    slots.into_iter().map(|m| m.into_inner().expect("slot lock").expect("every cell ran")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels_parse() {
        assert_eq!(SweepStrategy::parse("M=4").unwrap().basis, BasisStrategy::Fixed(4));
        let r = SweepStrategy::parse("R=tol+ext").unwrap();
        assert_eq!(r.basis, BasisStrategy::AdaptiveResidualMatchTol);
        assert!(r.extend);
        assert_eq!(SweepStrategy::parse("R=1e-6").unwrap().basis, BasisStrategy::AdaptiveResidual(1e-6));
        for bad in ["M=0", "M=x", "R=-1", "K=3", "M4", "+ext"] {
            assert!(SweepStrategy::parse(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn csv_leaves_error_empty_when_unconverged() {
        let rec = SweepRecord {
            problem: "p".into(),
            strategy: "M=4".into(),
            tol: 1e-6,
            error: None,
            accepted: 3,
            rejected: 1,
            rhs_evals: None,
            jvp_evals: None,
            mean_basis: 4.0,
            extensions: None,
            wall_seconds: None,
            converged: false,
            note: "step size underflow".into(),
        };
        let mut buf = Vec::new();
        write_csv(&[rec], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), HEADER.join(","));
        assert_eq!(lines.next().unwrap(), "p,M=4,0.000001,,3,1,,,4,,,false,step size underflow");
    }
}
