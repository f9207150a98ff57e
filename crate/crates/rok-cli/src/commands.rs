//! Subcommand implementations. Each writes human-readable output to `out`
//! and files to the configured path.

use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};

use rok_core::arnoldi::build_fixed;
use rok_core::integrate::{integrate_with_observer, Solution};
use rok_core::reference::assemble_jacobian;
use rok_core::stability::{largest_stable_step, log_grid, stability_report, StabilityReport};

use crate::config::{ConfigError, ReferenceMode, RunConfig};
use crate::reference::{compute_reference, relative_l2, ReferenceError, ReferenceState};
use crate::registry::{ProblemInstance, Registry};
use crate::sweep::{run_sweep, write_csv, SweepRecord};

#[derive(Debug)]
pub enum CliError {
    Config(ConfigError),
    Setup(String),
    Run(rok_core::Error),
    Reference(ReferenceError),
    Io(std::io::Error),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(e) => e.fmt(f),
            CliError::Setup(m) => f.write_str(m),
            CliError::Run(e) => write!(f, "integration failed: {e}"),
            CliError::Reference(e) => e.fmt(f),
            CliError::Io(e) => write!(f, "io: {e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Setup(_) => 2,
            _ => 1,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e)
    }
}

impl From<ReferenceError> for CliError {
    fn from(e: ReferenceError) -> Self {
        CliError::Reference(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.into())
    }
}

fn setup(registry: &Registry, cfg: &RunConfig) -> Result<(ProblemInstance, rok_core::Tableau), CliError> {
    let tableau = cfg.tableau().map_err(CliError::Setup)?;
    let inst = registry.build(&cfg.problem, cfg.seed).map_err(CliError::Setup)?;
    Ok((inst, tableau))
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Integrates once and prints a summary. Failures, including step size
/// underflow, are returned as errors.
pub fn cmd_run(registry: &Registry, cfg: &RunConfig, out_path: Option<&Path>, out: &mut dyn Write) -> Result<Solution, CliError> {
    let (inst, tableau) = setup(registry, cfg)?;
    let integ = cfg.integrator.to_core();
    let mut lines = Vec::new();
    let result = integrate_with_observer(&*inst.problem, inst.t0, inst.tf, &inst.y0, &tableau, &integ, |rep| {
        if cfg.output.per_step {
            lines.push(format!(
                "step t={} h={} accepted={} err={} m={} r1={}",
                rep.t, rep.h, rep.accepted, rep.err, rep.basis_size, rep.first_stage_residual
            ));
        }
    });
    for l in &lines {
        writeln!(out, "{l}")?;
    }
    let sol = result.map_err(CliError::Run)?;
    let s = &sol.stats;
    writeln!(out, "problem     {}", inst.problem.name())?;
    writeln!(out, "tableau     {}", tableau.name)?;
    writeln!(out, "t_final     {}", sol.t)?;
    writeln!(out, "norm_y      {}", norm(&sol.y))?;
    writeln!(out, "accepted    {}", s.accepted)?;
    writeln!(out, "rejected    {}", s.rejected)?;
    writeln!(out, "rhs_evals   {}", s.rhs_evals)?;
    writeln!(out, "jvp_evals   {}", s.jvp_evals)?;
    writeln!(out, "mean_basis  {}", s.mean_basis())?;
    writeln!(out, "extensions  {}", s.extensions)?;
    writeln!(out, "capped      {}", s.capped_bases)?;
    if let Some(exact) = &inst.exact {
        writeln!(out, "error       {}", relative_l2(&sol.y, exact))?;
    }
    if let Some(p) = out_path {
        let state = ReferenceState { problem: inst.problem.name().to_string(), t: sol.t, rtol: integ.rtol, atol: integ.atol, y: sol.y.clone() };
        state.save(p)?;
    }
    Ok(sol)
}

/// Reference state for `inst`: the closed form when known, else loaded or
/// computed per `[reference]`.
pub fn obtain_reference(inst: &ProblemInstance, cfg: &RunConfig, tableau: &rok_core::Tableau) -> Result<Vec<f64>, CliError> {
    if let Some(exact) = &inst.exact {
        return Ok(exact.clone());
    }
    match cfg.reference.mode {
        ReferenceMode::File => {
            let path = cfg.reference.path.as_ref().ok_or_else(|| CliError::Setup("reference.path missing".into()))?;
            let state = ReferenceState::load(path)?;
            state.check_matches(inst)?;
            Ok(state.y)
        }
        ReferenceMode::Compute => Ok(compute_reference(inst, tableau, &cfg.reference)?.0.y),
    }
}

pub fn cmd_sweep(registry: &Registry, cfg: &RunConfig, out_path: Option<&Path>, out: &mut dyn Write) -> Result<Vec<SweepRecord>, CliError> {
    let (inst, tableau) = setup(registry, cfg)?;
    let reference = obtain_reference(&inst, cfg, &tableau)?;
    drop(inst);
    let records = run_sweep(registry, cfg, &tableau, &reference).map_err(CliError::Setup)?;
    match out_path {
        Some(p) => write_csv(&records, std::fs::File::create(p)?)?,
        None => write_csv(&records, &mut *out)?,
    }
    Ok(records)
}

pub fn cmd_reference(registry: &Registry, cfg: &RunConfig, out_path: Option<&Path>, out: &mut dyn Write) -> Result<ReferenceState, CliError> {
    let (inst, tableau) = setup(registry, cfg)?;
    let (state, check) = compute_reference(&inst, &tableau, &cfg.reference)?;
    writeln!(out, "problem        {}", state.problem)?;
    writeln!(out, "norm_y         {}", norm(&state.y))?;
    writeln!(out, "rk4_steps      {}", check.steps)?;
    writeln!(out, "rk4_self_gap   {}", check.self_gap)?;
    writeln!(out, "reference_gap  {}", check.reference_gap)?;
    if let Some(exact) = &inst.exact {
        writeln!(out, "exact_error    {}", relative_l2(&state.y, exact))?;
    }
    let path: PathBuf = out_path.map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from(format!("{}.rokref", state.problem)));
    state.save(&path)?;
    writeln!(out, "wrote          {}", path.display())?;
    Ok(state)
}

pub const STABILITY_HEADER: [&str; 4] = ["h", "rho_classic", "rho_effective", "M"];

pub fn cmd_stability(registry: &Registry, cfg: &RunConfig, out_path: Option<&Path>, out: &mut dyn Write) -> Result<Vec<StabilityReport>, CliError> {
    let (inst, tableau) = setup(registry, cfg)?;
    let p = &*inst.problem;
    let n = p.dim();
    if n * tableau.stages > rok_core::stability::MAX_BLOCK_DIM {
        return Err(CliError::Setup(format!("stability needs a small problem; N = {n} is too large")));
    }
    let j = assemble_jacobian(p, &inst.y0).map_err(CliError::Run)?;
    let mut f = vec![0.0; n];
    p.rhs(&inst.y0, &mut f);
    let mut sizes: Vec<usize> = cfg.stability.sizes.iter().map(|&m| m.min(n)).collect();
    sizes.dedup();
    let grid = log_grid(cfg.stability.h_min, cfg.stability.h_max, cfg.stability.points);
    let mut reports = Vec::new();
    for &m in &sizes {
        let basis = build_fixed(p, &inst.y0, &f, m).map_err(CliError::Run)?;
        let per_m: Vec<StabilityReport> =
            grid.iter().map(|&h| stability_report(&j, &basis, &tableau, h)).collect::<Result<_, _>>().map_err(CliError::Run)?;
        match largest_stable_step(&per_m) {
            Some(h) => writeln!(out, "M={m} (basis {}): largest stable sampled h = {h}", basis.size())?,
            None => writeln!(out, "M={m} (basis {}): no sampled h is stable", basis.size())?,
        }
        reports.extend(per_m);
    }
    let write = |w: &mut dyn Write| -> Result<(), CliError> {
        let mut cw = csv::Writer::from_writer(w);
        cw.write_record(STABILITY_HEADER)?;
        for r in &reports {
            cw.write_record([r.h.to_string(), r.rho_classic.to_string(), r.rho_effective.to_string(), r.basis_size.to_string()])?;
        }
        cw.flush()?;
        Ok(())
    };
    match out_path {
        Some(path) => write(&mut std::fs::File::create(path)?)?,
        None => write(out)?,
    }
    Ok(reports)
}

pub fn cmd_defaults(out: &mut dyn Write) -> Result<(), CliError> {
    out.write_all(RunConfig::default().to_toml().as_bytes())?;
    Ok(())
}
