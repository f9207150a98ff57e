//! Problems resolved by name. User code can add entries with
//! [`Registry::register`].

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rok_core::linalg::DenseMatrix;
use rok_core::problem::{
    make_allen_cahn, make_linear, make_smooth_nonlinear, AllenCahnSpec, OdeProblem, SmoothNonlinear,
};

use crate::config::ProblemConfig;

pub type DynProblem = Box<dyn OdeProblem + Send + Sync>;

/// A problem with its initial value and time span.
pub struct ProblemInstance {
    pub problem: DynProblem,
    pub y0: Vec<f64>,
    pub t0: f64,
    pub tf: f64,
    /// Closed-form solution at `tf`, when one is known.
    pub exact: Option<Vec<f64>>,
}

pub type Constructor = fn(&ProblemConfig, u64) -> Result<ProblemInstance, String>;

pub struct Registry {
    entries: BTreeMap<String, Constructor>,
}

impl Default for Registry {
    fn default() -> Self {
        let mut r = Self { entries: BTreeMap::new() };
        r.register("dahlquist", dahlquist);
        r.register("linear", random_linear);
        r.register("smooth", smooth);
        r.register("allen-cahn", allen_cahn);
        r
    }
}

impl Registry {
    pub fn register(&mut self, name: &str, ctor: Constructor) {
        self.entries.insert(name.to_string(), ctor);
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn build(&self, cfg: &ProblemConfig, seed: u64) -> Result<ProblemInstance, String> {
        let ctor = self.entries.get(&cfg.name).ok_or_else(|| {
            let known: Vec<&str> = self.names().collect();
            format!("unknown problem `{}` (known: {})", cfg.name, known.join(", "))
        })?;
        let inst = ctor(cfg, seed)?;
        if !(inst.tf > inst.t0) {
            return Err(format!("problem `{}`: final time must exceed initial time", cfg.name));
        }
        Ok(inst)
    }
}

fn dahlquist(cfg: &ProblemConfig, _seed: u64) -> Result<ProblemInstance, String> {
    let tf = cfg.tf.unwrap_or(1.0);
    let p = make_linear(DenseMatrix::from_rows(&[&[cfg.lambda]])).with_name("dahlquist");
    Ok(ProblemInstance {
        y0: p.initial_state(),
        exact: Some(vec![(cfg.lambda * (tf - cfg.t0)).exp()]),
        problem: Box::new(p),
        t0: cfg.t0,
        tf,
    })
}

/// `J = −diag(d) + coupling·noise` with `d` log-uniform in `[1, stiffness]`,
/// drawn from a ChaCha8 stream seeded by `seed`.
pub fn random_linear_matrix(n: usize, stiffness: f64, coupling: f64, seed: u64) -> DenseMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d: Vec<f64> = (0..n).map(|_| stiffness.powf(rng.gen_range(0.0..1.0))).collect();
    DenseMatrix::from_fn(n, n, |i, j| {
        let noise = coupling * rng.gen_range(-1.0..1.0);
        if i == j {
            -d[i] + noise
        } else {
            noise
        }
    })
}

fn random_linear(cfg: &ProblemConfig, seed: u64) -> Result<ProblemInstance, String> {
    if cfg.n == 0 || !(cfg.stiffness >= 1.0) {
        return Err("linear problem needs n >= 1 and stiffness >= 1".into());
    }
    let j = random_linear_matrix(cfg.n, cfg.stiffness, cfg.coupling, seed);
    let p = make_linear(j).with_name(&format!("linear-{}-s{}", cfg.n, seed));
    Ok(ProblemInstance { y0: p.initial_state(), problem: Box::new(p), t0: cfg.t0, tf: cfg.tf.unwrap_or(1.0), exact: None })
}

fn smooth(cfg: &ProblemConfig, _seed: u64) -> Result<ProblemInstance, String> {
    let p = make_smooth_nonlinear();
    Ok(ProblemInstance {
        y0: p.initial_state(),
        problem: Box::new(p),
        t0: cfg.t0,
        tf: cfg.tf.unwrap_or(SmoothNonlinear::T_FINAL),
        exact: None,
    })
}

fn allen_cahn(cfg: &ProblemConfig, _seed: u64) -> Result<ProblemInstance, String> {
    if cfg.nx < 3 || cfg.ny < 3 || !(cfg.alpha > 0.0) {
        return Err("allen-cahn needs nx, ny >= 3 and alpha > 0".into());
    }
    let spec = AllenCahnSpec { nx: cfg.nx, ny: cfg.ny, alpha: cfg.alpha, gamma_rc: cfg.gamma_rc };
    let p = make_allen_cahn(spec);
    Ok(ProblemInstance {
        y0: p.initial_state(),
        problem: Box::new(p),
        t0: cfg.t0,
        tf: cfg.tf.unwrap_or(AllenCahnSpec::T_FINAL),
        exact: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_resolve() {
        let r = Registry::default();
        for name in ["dahlquist", "linear", "smooth", "allen-cahn"] {
            let cfg = ProblemConfig { name: name.into(), nx: 8, ny: 8, n: 6, ..Default::default() };
            let inst = r.build(&cfg, 3).unwrap();
            assert_eq!(inst.y0.len(), inst.problem.dim());
        }
    }

    #[test]
    fn unknown_problem_lists_known() {
        let cfg = ProblemConfig { name: "swe".into(), ..Default::default() };
        let err = Registry::default().build(&cfg, 0).err().unwrap();
        assert!(err.contains("allen-cahn") && err.contains("swe"));
    }

    #[test]
    fn linear_is_seeded() {
        let a = random_linear_matrix(5, 100.0, 0.5, 9);
        let b = random_linear_matrix(5, 100.0, 0.5, 9);
        let c = random_linear_matrix(5, 100.0, 0.5, 10);
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn plugin_registration() {
        fn tiny(cfg: &ProblemConfig, _: u64) -> Result<ProblemInstance, String> {
            let p = make_linear(DenseMatrix::from_rows(&[&[-2.0]])).with_name("tiny");
            Ok(ProblemInstance { y0: vec![1.0], problem: Box::new(p), t0: cfg.t0, tf: 1.0, exact: None })
        }
        let mut r = Registry::default();
        r.register("tiny", tiny);
        let inst = r.build(&ProblemConfig { name: "tiny".into(), ..Default::default() }, 0).unwrap();
        assert_eq!(inst.problem.name(), "tiny");
    }
}
