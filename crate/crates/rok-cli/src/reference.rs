//! Reference solutions: computation with the full-space Rosenbrock solver,
//! cross-validation against fixed-step RK4, and the `ROKREF1` file format.
//!
//! Layout: the 7 magic bytes `ROKREF1`, the dimension as little-endian `u64`,
//! the state as little-endian `f64`s, a little-endian `u32` byte count and a
//! UTF-8 metadata trailer of `key=value` pairs separated by `;`.

use std::fmt;
use std::io::{self, Read, Write};
use std::path::Path;

use rok_core::reference::{estimate_spectral_radius, rk4_fixed, rosenbrock_reference, ReferenceConfig};
use rok_core::Tableau;

use crate::config::ReferenceSection;
use crate::registry::ProblemInstance;

pub const MAGIC: &[u8; 7] = b"ROKREF1";

#[derive(Clone, Debug, PartialEq)]
pub struct ReferenceState {
    pub problem: String,
    pub t: f64,
    pub rtol: f64,
    pub atol: f64,
    pub y: Vec<f64>,
}

#[derive(Debug)]
pub enum ReferenceError {
    Io(io::Error),
    Format(String),
    Solver(String),
    CrossCheck(String),
}

impl fmt::Display for ReferenceError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ReferenceError::Io(e) => write!(f, "reference io: {e}"),
            ReferenceError::Format(m) => write!(f, "reference file: {m}"),
            ReferenceError::Solver(m) => write!(f, "reference solve failed: {m}"),
            ReferenceError::CrossCheck(m) => write!(f, "reference cross-validation failed: {m}"),
        }
    }
}

impl std::error::Error for ReferenceError {}

impl From<io::Error> for ReferenceError {
    fn from(e: io::Error) -> Self {
        ReferenceError::Io(e)
    }
}

impl ReferenceState {
    fn metadata(&self) -> String {
        format!("problem={};t={};rtol={};atol={}", self.problem, self.t, self.rtol, self.atol)
    }

    pub fn write_to(&self, w: &mut impl Write) -> io::Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&(self.y.len() as u64).to_le_bytes())?;
        for v in &self.y {
            w.write_all(&v.to_le_bytes())?;
        }
        let meta = self.metadata();
        w.write_all(&(meta.len() as u32).to_le_bytes())?;
        w.write_all(meta.as_bytes())
    }

    pub fn read_from(r: &mut impl Read) -> Result<Self, ReferenceError> {
        let mut magic = [0u8; 7];
        r.read_exact(&mut magic).map_err(|_| ReferenceError::Format("truncated header".into()))?;
        if &magic != MAGIC {
            return Err(ReferenceError::Format("bad magic bytes".into()));
        }
        let mut b8 = [0u8; 8];
        r.read_exact(&mut b8).map_err(|_| ReferenceError::Format("truncated dimension".into()))?;
        let n = u64::from_le_bytes(b8) as usize;
        let mut y = Vec::with_capacity(n.min(1 << 24));
        for _ in 0..n {
            r.read_exact(&mut b8).map_err(|_| ReferenceError::Format("truncated state".into()))?;
            y.push(f64::from_le_bytes(b8));
        }
        let mut b4 = [0u8; 4];
        r.read_exact(&mut b4).map_err(|_| ReferenceError::Format("missing metadata".into()))?;
        let mut meta = vec![0u8; u32::from_le_bytes(b4) as usize];
        r.read_exact(&mut meta).map_err(|_| ReferenceError::Format("truncated metadata".into()))?;
        let mut rest = Vec::new();
        r.read_to_end(&mut rest)?;
        if !rest.is_empty() {
            return Err(ReferenceError::Format("trailing bytes after metadata".into()));
        }
        let meta = String::from_utf8(meta).map_err(|_| ReferenceError::Format("metadata is not UTF-8".into()))?;
        let mut out = ReferenceState { problem: String::new(), t: f64::NAN, rtol: f64::NAN, atol: f64::NAN, y };
        for pair in meta.split(';').filter(|p| !p.is_empty()) {
            let (k, v) = pair.split_once('=').ok_or_else(|| ReferenceError::Format(format!("bad metadata entry `{pair}`")))?;
            let num = || v.parse::<f64>().map_err(|_| ReferenceError::Format(format!("bad number for `{k}`")));
            match k {
                "problem" => out.problem = v.to_string(),
                "t" => out.t = num()?,
                "rtol" => out.rtol = num()?,
                "atol" => out.atol = num()?,
                _ => {}
            }
        }
        if out.problem.is_empty() {
            return Err(ReferenceError::Format("metadata lacks the problem name".into()));
        }
        Ok(out)
    }

    pub fn save(&self, path: &Path) -> Result<(), ReferenceError> {
        let mut buf = Vec::new();
        self.write_to(&mut buf)?;
        std::fs::write(path, buf)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, ReferenceError> {
        let mut f = std::fs::File::open(path)?;
        Self::read_from(&mut f)
    }

    /// Checks that the file belongs to `inst`.
    pub fn check_matches(&self, inst: &ProblemInstance) -> Result<(), ReferenceError> {
        if self.problem != inst.problem.name() {
            return Err(ReferenceError::Format(format!("file is for `{}`, run uses `{}`", self.problem, inst.problem.name())));
        }
        if self.y.len() != inst.y0.len() {
            return Err(ReferenceError::Format(format!("dimension {} does not match {}", self.y.len(), inst.y0.len())));
        }
        if self.t != inst.tf {
            return Err(ReferenceError::Format(format!("file is at t = {}, run ends at {}", self.t, inst.tf)));
        }
        Ok(())
    }
}

pub fn relative_l2(a: &[f64], b: &[f64]) -> f64 {
    let d: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let n: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    d / n.max(f64::MIN_POSITIVE)
}

/// Outcome of the fixed-step oracle comparison.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CrossCheck {
    pub steps: usize,
    /// RK4 with `steps` against RK4 with `2·steps`.
    pub self_gap: f64,
    /// Reference against RK4 with `2·steps`.
    pub reference_gap: f64,
}

/// Computes the reference at `inst.tf` and validates it with RK4 at `N` and
/// `2N` steps, `N` chosen from a spectral radius estimate so that
/// `h·ρ ≤ 1`.
pub fn compute_reference(
    inst: &ProblemInstance,
    tableau: &Tableau,
    cfg: &ReferenceSection,
) -> Result<(ReferenceState, CrossCheck), ReferenceError> {
    let rc = ReferenceConfig { rtol: cfg.rtol, atol: cfg.atol, ..Default::default() };
    let sol = rosenbrock_reference(&*inst.problem, inst.t0, inst.tf, &inst.y0, tableau, &rc)
        .map_err(|e| ReferenceError::Solver(e.to_string()))?;
    let state = ReferenceState { problem: inst.problem.name().to_string(), t: inst.tf, rtol: cfg.rtol, atol: cfg.atol, y: sol.y };
    let check = cross_check(inst, &state.y, cfg)?;
    Ok((state, check))
}

pub fn cross_check(inst: &ProblemInstance, y_ref: &[f64], cfg: &ReferenceSection) -> Result<CrossCheck, ReferenceError> {
    let span = inst.tf - inst.t0;
    let rho = estimate_spectral_radius(&*inst.problem, &inst.y0, 200).map_err(|e| ReferenceError::Solver(e.to_string()))?;
    let steps = ((span * rho).ceil() as usize).max(1000);
    if 2 * steps > cfg.check_max_steps {
        return Err(ReferenceError::CrossCheck(format!("oracle needs {} steps, cap is {}", 2 * steps, cfg.check_max_steps)));
    }
    let rk = |k| rk4_fixed(&*inst.problem, inst.t0, inst.tf, &inst.y0, k).map_err(|e| ReferenceError::Solver(e.to_string()));
    let coarse = rk(steps)?;
    let fine = rk(2 * steps)?;
    let check = CrossCheck { steps, self_gap: relative_l2(&coarse, &fine), reference_gap: relative_l2(y_ref, &fine) };
    if !(check.self_gap <= cfg.check_tol && check.reference_gap <= cfg.check_tol) {
        return Err(ReferenceError::CrossCheck(format!(
            "rk4 self gap {:e}, reference gap {:e}, tolerance {:e}",
            check.self_gap, check.reference_gap, cfg.check_tol
        )));
    }
    Ok(check)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ReferenceState {
        ReferenceState { problem: "smooth".into(), t: 2.0, rtol: 1e-12, atol: 1e-12, y: vec![0.25, -1.5e-300, f64::MAX] }
    }

    #[test]
    fn round_trip_is_exact() {
        let s = sample();
        let mut buf = Vec::new();
        s.write_to(&mut buf).unwrap();
        assert_eq!(&buf[..7], MAGIC);
        assert_eq!(u64::from_le_bytes(buf[7..15].try_into().unwrap()), 3);
        let back = ReferenceState::read_from(&mut buf.as_slice()).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn corrupt_files_rejected() {
        let mut buf = Vec::new();
        sample().write_to(&mut buf).unwrap();
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(ReferenceState::read_from(&mut bad.as_slice()).is_err());
        assert!(ReferenceState::read_from(&mut &buf[..20]).is_err());
        let mut extra = buf.clone();
        extra.push(0);
        assert!(ReferenceState::read_from(&mut extra.as_slice()).is_err());
    }
}
