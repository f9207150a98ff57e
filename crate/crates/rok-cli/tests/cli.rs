use std::path::Path;
use std::process::Command;

use rok_cli::config::ReferenceMode;
use rok_cli::reference::{compute_reference, relative_l2, ReferenceState};
use rok_cli::{cmd_reference, cmd_run, cmd_stability, cmd_sweep, Registry, RunConfig};
use rok_core::reference::{rosenbrock_reference, ReferenceConfig};
use rok_core::stability::StabilityReport;

fn config(src: &str) -> RunConfig {
    RunConfig::from_toml(src).unwrap()
}

fn rok(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_rok")).args(args).output().unwrap()
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn dahlquist_run_is_accurate() {
    let cfg = config("[problem]\nname = \"dahlquist\"\n[integrator]\nrtol = 1e-8\natol = 1e-8\n");
    let mut out = Vec::new();
    let sol = cmd_run(&Registry::default(), &cfg, None, &mut out).unwrap();
    assert!((sol.y[0] - (-1f64).exp()).abs() <= 1e-6);
    let text = String::from_utf8(out).unwrap();
    assert!(text.contains("accepted") && text.contains("error"));
}

#[test]
fn mildly_stiff_allen_cahn_converges_with_small_basis() {
    let cfg = config("[problem]\nalpha = 0.1\n[integrator]\nrtol = 1e-4\natol = 1e-4\nstrategy = \"fixed\"\nm = 4\n");
    let sol = cmd_run(&Registry::default(), &cfg, None, &mut Vec::new()).unwrap();
    assert_eq!(sol.t, 0.2);
    assert!(sol.y.iter().all(|v| v.is_finite()));
}

#[test]
fn per_step_lines_are_printed() {
    let cfg = config("[problem]\nname = \"smooth\"\n[output]\nper_step = true\n");
    let mut out = Vec::new();
    let sol = cmd_run(&Registry::default(), &cfg, None, &mut out).unwrap();
    let text = String::from_utf8(out).unwrap();
    assert_eq!(text.lines().filter(|l| l.starts_with("step ")).count(), sol.stats.attempted());
}

#[test]
fn binary_reports_failures_with_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad_tab = write(dir.path(), "bad.toml", "[method]\ntableau_file = \"/no/such/file.tab\"\n");
    let o = rok(&["run", "--config", &bad_tab]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("tableau_file"));

    let typo = write(dir.path(), "typo.toml", "[integrator]\nrtol = 1e-4\nstratgy = \"fixed\"\n");
    let o = rok(&["run", "--config", &typo]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr).to_string();
    assert!(err.contains("stratgy") && err.contains("line 3"), "{err}");

    // far too few steps allowed: the run fails and the exit status says so
    let budget = write(dir.path(), "budget.toml", "[problem]\nname = \"smooth\"\n[integrator]\nmax_steps = 2\n");
    let o = rok(&["run", "--config", &budget]);
    assert_eq!(o.status.code(), Some(1));

    let underflow = write(
        dir.path(),
        "under.toml",
        "[problem]\nname = \"smooth\"\n[integrator]\nrtol = 1e-14\natol = 1e-14\nh_init = 1e-3\nh_min = 1e-3\n",
    );
    let o = rok(&["run", "--config", &underflow]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("underflow"));
}

#[test]
fn defaults_output_is_a_valid_config() {
    let o = rok(&["defaults"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    assert_eq!(RunConfig::from_toml(&text).unwrap(), RunConfig::default());
}

#[test]
fn custom_tableau_file_is_used() {
    let dir = tempfile::tempdir().unwrap();
    let src = include_str!("../../core/tableaus/ros2.tab");
    let path = write(dir.path(), "mine.tab", src);
    let cfg = config(&format!("[problem]\nname = \"smooth\"\n[method]\ntableau_file = \"{path}\"\n"));
    let mut out = Vec::new();
    cmd_run(&Registry::default(), &cfg, None, &mut out).unwrap();
    assert!(String::from_utf8(out).unwrap().contains("ROS2"));
}

#[test]
fn reference_for_dahlquist_matches_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("d.rokref");
    let cfg = config("[problem]\nname = \"dahlquist\"\n");
    let state = cmd_reference(&Registry::default(), &cfg, Some(&out_path), &mut Vec::new()).unwrap();
    assert!((state.y[0] - (-1f64).exp()).abs() <= 1e-11 * (-1f64).exp());
    let back = ReferenceState::load(&out_path).unwrap();
    assert_eq!(back, state);
    assert_eq!(back.problem, "dahlquist");
    assert_eq!(back.rtol, 1e-12);
}

#[test]
fn smooth_reference_passes_step_halving_check() {
    let cfg = config("[problem]\nname = \"smooth\"\n");
    let inst = Registry::default().build(&cfg.problem, 0).unwrap();
    let (_, check) = compute_reference(&inst, &cfg.tableau().unwrap(), &cfg.reference).unwrap();
    assert!(check.reference_gap <= 1e-9 && check.self_gap <= 1e-9, "{check:?}");
}

#[test]
fn allen_cahn_reference_is_tolerance_consistent() {
    let cfg = RunConfig::default();
    let inst = Registry::default().build(&cfg.problem, 0).unwrap();
    assert_eq!(inst.y0.len(), 4096);
    let t = cfg.tableau().unwrap();
    let run = |tol: f64| {
        let rc = ReferenceConfig { rtol: tol, atol: tol, ..Default::default() };
        rosenbrock_reference(&*inst.problem, inst.t0, inst.tf, &inst.y0, &t, &rc).unwrap().y
    };
    let gap = relative_l2(&run(1e-12), &run(5e-13));
    assert!(gap <= 1e-8, "{gap}");
}

#[test]
fn sweep_uses_reference_file_and_rejects_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    let ref_path = dir.path().join("lin.rokref");
    let base = "[problem]\nname = \"linear\"\nn = 12\nstiffness = 100.0\n";
    cmd_reference(&Registry::default(), &config(base), Some(&ref_path), &mut Vec::new()).unwrap();
    let with_file = format!(
        "{base}[reference]\nmode = \"file\"\npath = \"{}\"\n[sweep]\nstrategies = [\"M=4\"]\ntolerances = [1e-3, 1e-5]\n",
        ref_path.display()
    );
    let cfg = config(&with_file);
    assert_eq!(cfg.reference.mode, ReferenceMode::File);
    let recs = cmd_sweep(&Registry::default(), &cfg, Some(&dir.path().join("a.csv")), &mut Vec::new()).unwrap();
    assert_eq!(recs.len(), 2);
    assert!(recs.iter().all(|r| r.converged));

    // a different seed gives a different matrix and name: the file must not be accepted
    let mut other = cfg.clone();
    other.seed = 7;
    assert!(cmd_sweep(&Registry::default(), &other, Some(&dir.path().join("b.csv")), &mut Vec::new()).is_err());
}

#[test]
fn sweep_records_and_error_trend() {
    let cfg = config(
        "[problem]\nname = \"linear\"\nn = 24\nstiffness = 1000.0\n[sweep]\nstrategies = [\"M=4\", \"M=16\", \"R=tol\", \"R=tol+ext\"]\n",
    );
    let recs = cmd_sweep(&Registry::default(), &cfg, None, &mut Vec::new()).unwrap();
    assert_eq!(recs.len(), 4 * 9);
    for r in &recs {
        assert_eq!(r.converged, r.error.is_some());
    }
    for label in ["M=4", "M=16"] {
        let errs: Vec<f64> = recs.iter().filter(|r| r.strategy == label && r.converged).map(|r| r.error.unwrap()).collect();
        let inversions = errs.windows(2).filter(|w| w[1] > w[0]).count();
        assert!(inversions <= 1, "{label}: {errs:?}");
    }
}

#[test]
fn sweep_csv_independent_of_worker_count() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("[problem]\nname = \"allen-cahn\"\nnx = 16\nny = 16\n[sweep]\ntolerances = [1e-2, 1e-4, 1e-6]\n");
    let mut one = cfg.clone();
    one.workers = 1;
    let mut four = cfg;
    four.workers = 4;
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    cmd_sweep(&Registry::default(), &one, Some(&a), &mut Vec::new()).unwrap();
    cmd_sweep(&Registry::default(), &four, Some(&b), &mut Vec::new()).unwrap();
    assert_eq!(std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
}

#[test]
fn stability_rows_behave() {
    let cfg = config("[problem]\nname = \"linear\"\nn = 8\nstiffness = 100.0\n[stability]\nh_min = 1e-8\nh_max = 1.0\npoints = 9\nsizes = [2, 8]\n");
    let mut out = Vec::new();
    let reps = cmd_stability(&Registry::default(), &cfg, None, &mut out).unwrap();
    let text = String::from_utf8(out).unwrap();
    assert!(text.contains("h,rho_classic,rho_effective,M"));
    let (small, full): (Vec<&StabilityReport>, Vec<&StabilityReport>) = reps.iter().partition(|r| r.basis_size == 2);
    assert_eq!(small.len(), 9);
    assert_eq!(full.len(), 9);
    for (s, f) in small.iter().zip(&full) {
        // R depends on hJ only
        assert_eq!(s.rho_classic, f.rho_classic);
        // full basis: A = J
        assert!((f.rho_classic - f.rho_effective).abs() <= 1e-10 * f.rho_classic);
    }
    let first = &small[0];
    assert!((first.rho_classic - 1.0).abs() < 1e-5 && (first.rho_effective - 1.0).abs() < 1e-5);
}

#[test]
fn stability_refuses_large_problems() {
    let cfg = RunConfig::default();
    assert!(cmd_stability(&Registry::default(), &cfg, None, &mut Vec::new()).is_err());
}
