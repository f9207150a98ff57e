//! Rosenbrock-Krylov coefficient sets and their flat-text representation.
//!
//! A tableau file holds one record per line: `name`, `version`, `stages s`,
//! `order p`, `embedded_order q`, `gamma g`, `alpha i j v`,
//! `gamma_lower i j v`, `b i v`, `b_hat i v`. Indices are 1-based, values
//! are decimal or `p/q` rationals, `#` starts a comment. Unlisted strictly
//! lower entries are zero; every `b` and `b_hat` entry must be present.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;

const ROK4L_SOURCE: &str = include_str!("../tableaus/rok4l.tab");
const ROS2_SOURCE: &str = include_str!("../tableaus/ros2.tab");

#[derive(Clone, Debug, PartialEq)]
pub struct Tableau {
    pub name: String,
    pub stages: usize,
    /// Strictly lower triangular `α_{i,j}`.
    pub alpha: DenseMatrix,
    /// Strictly lower triangular `γ_{i,j}`, `i > j`.
    pub gamma_lower: DenseMatrix,
    /// Shared diagonal `γ`.
    pub gamma: f64,
    pub b: Vec<f64>,
    pub b_hat: Vec<f64>,
    pub order: u32,
    pub embedded_order: u32,
}

impl Tableau {
    /// The default fourth-order method with third-order embedding.
    pub fn rok4l() -> Self {
        parse(ROK4L_SOURCE).expect("bundled tableau is valid")
    }

    pub fn ros2() -> Self {
        parse(ROS2_SOURCE).expect("bundled tableau is valid")
    }

    pub fn builtin(name: &str) -> Option<Self> {
        match name.to_ascii_lowercase().as_str() {
            "rok4l" => Some(Self::rok4l()),
            "ros2" => Some(Self::ros2()),
            _ => None,
        }
    }

    /// `γ_{i,j}` including the diagonal.
    #[inline]
    pub fn gamma_ij(&self, i: usize, j: usize) -> f64 {
        if i == j {
            self.gamma
        } else {
            self.gamma_lower[(i, j)]
        }
    }

    /// Full lower-triangular `γ` matrix (diagonal included).
    pub fn gamma_matrix(&self) -> DenseMatrix {
        DenseMatrix::from_fn(self.stages, self.stages, |i, j| if j <= i { self.gamma_ij(i, j) } else { 0.0 })
    }

    /// `β = α + γ`
    pub fn beta_matrix(&self) -> DenseMatrix {
        self.alpha.add(&self.gamma_matrix())
    }

    /// Exponent order used by the step-size controller.
    pub fn controller_order(&self) -> u32 {
        self.order.min(self.embedded_order)
    }

    pub fn validate(&self) -> Result<()> {
        let s = self.stages;
        if s == 0 {
            return Err(Error::Tableau("stage count must be positive".into()));
        }
        if self.alpha.rows() != s || self.alpha.cols() != s || self.gamma_lower.rows() != s || self.gamma_lower.cols() != s {
            return Err(Error::Tableau("coefficient matrices must be s×s".into()));
        }
        if self.b.len() != s || self.b_hat.len() != s {
            return Err(Error::Tableau("weight vectors must have s entries".into()));
        }
        for i in 0..s {
            for j in i..s {
                if self.alpha[(i, j)] != 0.0 || self.gamma_lower[(i, j)] != 0.0 {
                    return Err(Error::Tableau(format!("entry ({}, {}) is not strictly lower triangular", i + 1, j + 1)));
                }
            }
        }
        if !(self.gamma > 0.0) || !self.gamma.is_finite() {
            return Err(Error::Tableau("gamma must be positive".into()));
        }
        if self.b == self.b_hat {
            return Err(Error::Tableau("embedded weights must differ from the main weights".into()));
        }
        if self.order == 0 || self.embedded_order == 0 {
            return Err(Error::Tableau("orders must be positive".into()));
        }
        let finite = self.b.iter().chain(&self.b_hat).all(|x| x.is_finite())
            && self.alpha.is_finite()
            && self.gamma_lower.is_finite();
        if !finite {
            return Err(Error::Tableau("coefficients must be finite".into()));
        }
        Ok(())
    }
}

fn parse_value(tok: &str) -> core::result::Result<f64, String> {
    let parsed = match tok.split_once('/') {
        Some((n, d)) => {
            let n: f64 = n.trim().parse().map_err(|_| format!("bad numerator `{n}`"))?;
            let d: f64 = d.trim().parse().map_err(|_| format!("bad denominator `{d}`"))?;
            if d == 0.0 {
                return Err("zero denominator".to_string());
            }
            n / d
        }
        None => tok.parse().map_err(|_| format!("bad number `{tok}`"))?,
    };
    Ok(parsed)
}

/// Parses the flat-text tableau format and validates the result.
pub fn parse(src: &str) -> Result<Tableau> {
    let mut name = None;
    let mut stages: Option<usize> = None;
    let mut order = None;
    let mut embedded = None;
    let mut gamma = None;
    let mut entries: Vec<(usize, &str, usize, usize, f64)> = Vec::new();

    for (lineno, raw) in src.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let ln = lineno + 1;
        let err = |msg: String| Error::Tableau(format!("line {ln}: {msg}"));
        let toks: Vec<&str> = line.split_whitespace().collect();
        let idx = |t: &str| t.parse::<usize>().map_err(|_| err(format!("bad index `{t}`")));
        match (toks[0], toks.len()) {
            ("name", 2) => name = Some(toks[1].to_string()),
            ("version", 2) => {}
            ("stages", 2) => stages = Some(idx(toks[1])?),
            ("order", 2) => order = Some(idx(toks[1])? as u32),
            ("embedded_order", 2) => embedded = Some(idx(toks[1])? as u32),
            ("gamma", 2) => gamma = Some(parse_value(toks[1]).map_err(err)?),
            (key @ ("alpha" | "gamma_lower"), 4) => {
                let (i, j) = (idx(toks[1])?, idx(toks[2])?);
                entries.push((ln, key, i, j, parse_value(toks[3]).map_err(err)?));
            }
            (key @ ("b" | "b_hat"), 3) => {
                entries.push((ln, key, idx(toks[1])?, 0, parse_value(toks[2]).map_err(err)?));
            }
            (key, n) => return Err(err(format!("unrecognized record `{key}` with {} fields", n - 1))),
        }
    }

    let missing = |what: &str| Error::Tableau(format!("missing `{what}` record"));
    let s = stages.ok_or_else(|| missing("stages"))?;
    let mut t = Tableau {
        name: name.ok_or_else(|| missing("name"))?,
        stages: s,
        alpha: DenseMatrix::zeros(s, s),
        gamma_lower: DenseMatrix::zeros(s, s),
        gamma: gamma.ok_or_else(|| missing("gamma"))?,
        b: vec![f64::NAN; s],
        b_hat: vec![f64::NAN; s],
        order: order.ok_or_else(|| missing("order"))?,
        embedded_order: embedded.ok_or_else(|| missing("embedded_order"))?,
    };
    for (ln, key, i, j, v) in entries {
        let out_of_range = || Error::Tableau(format!("line {ln}: index out of range for {s} stages"));
        match key {
            "alpha" | "gamma_lower" => {
                if i == 0 || j == 0 || i > s || j > s {
                    return Err(out_of_range());
                }
                if j >= i {
                    return Err(Error::Tableau(format!("line {ln}: `{key} {i} {j}` is not strictly lower triangular")));
                }
                let m = if key == "alpha" { &mut t.alpha } else { &mut t.gamma_lower };
                m[(i - 1, j - 1)] = v;
            }
            _ => {
                if i == 0 || i > s {
                    return Err(out_of_range());
                }
                let w = if key == "b" { &mut t.b } else { &mut t.b_hat };
                w[i - 1] = v;
            }
        }
    }
    if t.b.iter().chain(&t.b_hat).any(|x| x.is_nan()) {
        return Err(Error::Tableau("every b and b_hat entry must be given (embedded weights are required)".into()));
    }
    t.validate()?;
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_tableaus_load() {
        let t = Tableau::rok4l();
        assert_eq!((t.stages, t.order, t.embedded_order), (4, 4, 3));
        assert_eq!(t.gamma_lower[(2, 0)], -0.2);
        assert_eq!(t.alpha[(3, 0)], t.alpha[(2, 0)]);
        let r = Tableau::ros2();
        assert_eq!(r.b, vec![0.5, 0.5]);
    }

    #[test]
    fn rational_values() {
        assert_eq!(parse_value("-1/20").unwrap(), -0.05);
        assert!(parse_value("1/0").is_err());
        assert!(parse_value("x").is_err());
    }

    #[test]
    fn rejects_missing_embedding() {
        let src = "name X\nstages 1\norder 1\nembedded_order 1\ngamma 1\nb 1 1\n";
        let err = parse(src).unwrap_err();
        assert!(matches!(err, Error::Tableau(m) if m.contains("embedded")));
    }

    #[test]
    fn rejects_identical_embedding() {
        let src = "name X\nstages 1\norder 1\nembedded_order 1\ngamma 1\nb 1 1\nb_hat 1 1\n";
        assert!(parse(src).is_err());
    }

    #[test]
    fn rejects_upper_entries() {
        let src = "name X\nstages 2\norder 1\nembedded_order 1\ngamma 1\nalpha 1 2 0.5\nb 1 1\nb 2 0\nb_hat 1 0\nb_hat 2 1\n";
        let err = parse(src).unwrap_err();
        assert!(matches!(err, Error::Tableau(m) if m.contains("line 6")));
    }

    #[test]
    fn rejects_nonpositive_gamma() {
        let src = "name X\nstages 1\norder 1\nembedded_order 1\ngamma 0\nb 1 1\nb_hat 1 0.5\n";
        assert!(parse(src).is_err());
    }
}
