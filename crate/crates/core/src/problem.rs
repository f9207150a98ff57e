//! Autonomous ODE problems `y' = f(y)` accessed through right-hand-side
//! evaluations and Jacobian-vector products, plus the built-in test problems.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::linalg::{self, DenseMatrix};

/// An autonomous ODE right-hand side with matrix-free Jacobian access.
///
/// Nonautonomous systems are handled by appending `t` to the state with
/// `t' = 1`.
pub trait OdeProblem {
    fn dim(&self) -> usize;

    fn name(&self) -> &str;

    /// `out = f(y)`
    fn rhs(&self, y: &[f64], out: &mut [f64]);

    /// `out = J(y) v` with `J = ∂f/∂y`.
    fn jvp(&self, y: &[f64], v: &[f64], out: &mut [f64]);

    /// Dense Jacobian for small problems.
    fn dense_jacobian(&self, _y: &[f64]) -> Option<DenseMatrix> {
        None
    }
}

impl<P: OdeProblem + ?Sized> OdeProblem for &P {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn name(&self) -> &str {
        (**self).name()
    }
    fn rhs(&self, y: &[f64], out: &mut [f64]) {
        (**self).rhs(y, out)
    }
    fn jvp(&self, y: &[f64], v: &[f64], out: &mut [f64]) {
        (**self).jvp(y, v, out)
    }
    fn dense_jacobian(&self, y: &[f64]) -> Option<DenseMatrix> {
        (**self).dense_jacobian(y)
    }
}

impl<P: OdeProblem + ?Sized> OdeProblem for alloc::boxed::Box<P> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn name(&self) -> &str {
        (**self).name()
    }
    fn rhs(&self, y: &[f64], out: &mut [f64]) {
        (**self).rhs(y, out)
    }
    fn jvp(&self, y: &[f64], v: &[f64], out: &mut [f64]) {
        (**self).jvp(y, v, out)
    }
    fn dense_jacobian(&self, y: &[f64]) -> Option<DenseMatrix> {
        (**self).dense_jacobian(y)
    }
}

/// Worst relative mismatch between `jvp` and a central difference of `rhs`
/// over the supplied probe directions.
pub fn jvp_consistency<P: OdeProblem + ?Sized>(problem: &P, y: &[f64], directions: &[Vec<f64>], eps: f64) -> f64 {
    let n = problem.dim();
    let (mut fp, mut fm, mut jv) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let mut worst: f64 = 0.0;
    for v in directions {
        let yp: Vec<f64> = y.iter().zip(v).map(|(a, b)| a + eps * b).collect();
        let ym: Vec<f64> = y.iter().zip(v).map(|(a, b)| a - eps * b).collect();
        problem.rhs(&yp, &mut fp);
        problem.rhs(&ym, &mut fm);
        problem.jvp(y, v, &mut jv);
        let fd: Vec<f64> = fp.iter().zip(&fm).map(|(a, b)| (a - b) / (2.0 * eps)).collect();
        let denom = linalg::max_abs(&jv).max(1e-300);
        worst = worst.max(linalg::max_abs_diff(&fd, &jv) / denom);
    }
    worst
}

/// `y' = J y`
#[derive(Clone, Debug)]
pub struct LinearProblem {
    jacobian: DenseMatrix,
    name: String,
}

pub fn make_linear(jacobian: DenseMatrix) -> LinearProblem {
    assert!(jacobian.is_square(), "linear problem needs a square matrix");
    LinearProblem { jacobian, name: String::from("linear") }
}

impl LinearProblem {
    pub fn with_name(mut self, name: &str) -> Self {
        self.name = String::from(name);
        self
    }

    pub fn jacobian(&self) -> &DenseMatrix {
        &self.jacobian
    }

    /// The all-ones start vector of the vector-valued linear test equation.
    pub fn initial_state(&self) -> Vec<f64> {
        vec![1.0; self.dim()]
    }
}

impl OdeProblem for LinearProblem {
    fn dim(&self) -> usize {
        self.jacobian.rows()
    }
    fn name(&self) -> &str {
        &self.name
    }
    fn rhs(&self, y: &[f64], out: &mut [f64]) {
        self.jacobian.matvec_into(y, out);
    }
    fn jvp(&self, _y: &[f64], v: &[f64], out: &mut [f64]) {
        self.jacobian.matvec_into(v, out);
    }
    fn dense_jacobian(&self, _y: &[f64]) -> Option<DenseMatrix> {
        Some(self.jacobian.clone())
    }
}

/// Two-dimensional Allen-Cahn equation on `[0,1]²`, `t ∈ [0, 0.2]`:
/// `u_t = α ∇²u + γ_rc (u − u³)` with homogeneous Neumann boundaries.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AllenCahnSpec {
    pub nx: usize,
    pub ny: usize,
    pub alpha: f64,
    /// Reaction coefficient.
    pub gamma_rc: f64,
}

impl AllenCahnSpec {
    pub const T_FINAL: f64 = 0.2;

    pub fn new(nx: usize, ny: usize, alpha: f64) -> Self {
        Self { nx, ny, alpha, gamma_rc: 1.0 }
    }
}

/// Cell-centred finite-volume discretization: cell width `1/nx` × `1/ny`,
/// 5-point Laplacian, mirror ghost cells for the Neumann closure. State index
/// is `j * nx + i` with `i` along x.
#[derive(Clone, Debug)]
pub struct AllenCahn {
    spec: AllenCahnSpec,
    inv_dx2: f64,
    inv_dy2: f64,
    name: String,
}

pub fn make_allen_cahn(spec: AllenCahnSpec) -> AllenCahn {
    assert!(spec.nx >= 3 && spec.ny >= 3, "Allen-Cahn grid needs at least 3 cells per side");
    assert!(spec.alpha > 0.0, "Allen-Cahn diffusion must be positive");
    let name = alloc::format!("allen-cahn-{}x{}-a{}", spec.nx, spec.ny, spec.alpha);
    AllenCahn {
        spec,
        inv_dx2: (spec.nx * spec.nx) as f64,
        inv_dy2: (spec.ny * spec.ny) as f64,
        name,
    }
}

impl AllenCahn {
    pub fn spec(&self) -> &AllenCahnSpec {
        &self.spec
    }

    /// Cell centre `(x_i, y_j)`.
    pub fn cell_center(&self, i: usize, j: usize) -> (f64, f64) {
        ((i as f64 + 0.5) / self.spec.nx as f64, (j as f64 + 0.5) / self.spec.ny as f64)
    }

    /// `u(0) = 0.4 + 0.1 (x + y) + 0.1 sin(10x) sin(20y)` at cell centres.
    pub fn initial_state(&self) -> Vec<f64> {
        let (nx, ny) = (self.spec.nx, self.spec.ny);
        let mut u = vec![0.0; nx * ny];
        for j in 0..ny {
            for i in 0..nx {
                let (x, y) = self.cell_center(i, j);
                u[j * nx + i] = 0.4 + 0.1 * (x + y) + 0.1 * libm::sin(10.0 * x) * libm::sin(20.0 * y);
            }
        }
        u
    }

    fn laplacian(&self, u: &[f64], out: &mut [f64]) {
        let (nx, ny) = (self.spec.nx, self.spec.ny);
        for j in 0..ny {
            let (jm, jp) = (j.saturating_sub(1), (j + 1).min(ny - 1));
            for i in 0..nx {
                let (im, ip) = (i.saturating_sub(1), (i + 1).min(nx - 1));
                let c = u[j * nx + i];
                out[j * nx + i] = (u[j * nx + im] - 2.0 * c + u[j * nx + ip]) * self.inv_dx2
                    + (u[jm * nx + i] - 2.0 * c + u[jp * nx + i]) * self.inv_dy2;
            }
        }
    }
}

impl OdeProblem for AllenCahn {
    fn dim(&self) -> usize {
        self.spec.nx * self.spec.ny
    }
    fn name(&self) -> &str {
        &self.name
    }
    fn rhs(&self, u: &[f64], out: &mut [f64]) {
        self.laplacian(u, out);
        let (a, g) = (self.spec.alpha, self.spec.gamma_rc);
        for (o, ui) in out.iter_mut().zip(u) {
            *o = a * *o + g * (ui - ui * ui * ui);
        }
    }
    fn jvp(&self, u: &[f64], v: &[f64], out: &mut [f64]) {
        self.laplacian(v, out);
        let (a, g) = (self.spec.alpha, self.spec.gamma_rc);
        for ((o, ui), vi) in out.iter_mut().zip(u).zip(v) {
            *o = a * *o + g * (1.0 - 3.0 * ui * ui) * vi;
        }
    }
}

/// Damped pendulum `θ' = ω`, `ω' = −sin θ − ω/4`, a smooth non-stiff system
/// with an equilibrium at the origin. Integrated over `[0, 2]` from `(1, 0)`.
#[derive(Clone, Copy, Debug, Default)]
pub struct SmoothNonlinear;

pub fn make_smooth_nonlinear() -> SmoothNonlinear {
    SmoothNonlinear
}

impl SmoothNonlinear {
    pub const DAMPING: f64 = 0.25;
    pub const T_FINAL: f64 = 2.0;

    pub fn initial_state(&self) -> Vec<f64> {
        vec![1.0, 0.0]
    }
}

impl OdeProblem for SmoothNonlinear {
    fn dim(&self) -> usize {
        2
    }
    fn name(&self) -> &str {
        "smooth"
    }
    fn rhs(&self, y: &[f64], out: &mut [f64]) {
        out[0] = y[1];
        out[1] = -libm::sin(y[0]) - Self::DAMPING * y[1];
    }
    fn jvp(&self, y: &[f64], v: &[f64], out: &mut [f64]) {
        out[0] = v[1];
        out[1] = -libm::cos(y[0]) * v[0] - Self::DAMPING * v[1];
    }
    fn dense_jacobian(&self, y: &[f64]) -> Option<DenseMatrix> {
        Some(DenseMatrix::from_rows(&[&[0.0, 1.0], &[-libm::cos(y[0]), -Self::DAMPING]]))
    }
}

/// `f(y) = A y + tanh(B y) + c`, a dense nonlinear problem of arbitrary size
/// with an analytic Jacobian `A + diag(1 − tanh²(B y)) B`.
#[derive(Clone, Debug)]
pub struct DenseNonlinear {
    a: DenseMatrix,
    b: DenseMatrix,
    c: Vec<f64>,
}

impl DenseNonlinear {
    pub fn new(a: DenseMatrix, b: DenseMatrix, c: Vec<f64>) -> Self {
        assert!(a.is_square() && b.is_square() && a.rows() == b.rows() && c.len() == a.rows());
        Self { a, b, c }
    }
}

impl OdeProblem for DenseNonlinear {
    fn dim(&self) -> usize {
        self.c.len()
    }
    fn name(&self) -> &str {
        "dense-nonlinear"
    }
    fn rhs(&self, y: &[f64], out: &mut [f64]) {
        self.a.matvec_into(y, out);
        let by = self.b.matvec(y);
        for ((o, z), c) in out.iter_mut().zip(by).zip(&self.c) {
            *o += libm::tanh(z) + c;
        }
    }
    fn jvp(&self, y: &[f64], v: &[f64], out: &mut [f64]) {
        self.a.matvec_into(v, out);
        let by = self.b.matvec(y);
        let bv = self.b.matvec(v);
        for ((o, z), w) in out.iter_mut().zip(by).zip(bv) {
            let t = libm::tanh(z);
            *o += (1.0 - t * t) * w;
        }
    }
    fn dense_jacobian(&self, y: &[f64]) -> Option<DenseMatrix> {
        let by = self.b.matvec(y);
        let mut j = self.a.clone();
        for c in 0..j.cols() {
            for r in 0..j.rows() {
                let t = libm::tanh(by[r]);
                j[(r, c)] += (1.0 - t * t) * self.b[(r, c)];
            }
        }
        Some(j)
    }
}
