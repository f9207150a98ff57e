//! Test oracles written independently of the library's solvers.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rok_core::arnoldi::{build_fixed, KrylovBasis};
use rok_core::linalg::DenseMatrix;
use rok_core::rok::rok_step;
use rok_core::problem::{DenseNonlinear, OdeProblem};
use rok_core::Tableau;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

pub fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DenseMatrix {
    DenseMatrix::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..1.0))
}

/// Random matrix with a spread-out spectrum: `−diag(d) + c·noise`, entries
/// of `d` drawn log-uniformly from `[1, stiffness]`.
pub fn random_stiff(rng: &mut ChaCha8Rng, n: usize, stiffness: f64, coupling: f64) -> DenseMatrix {
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

pub fn random_hessenberg(rng: &mut ChaCha8Rng, n: usize) -> DenseMatrix {
    DenseMatrix::from_fn(n, n, |i, j| if i <= j + 1 { rng.gen_range(-1.0..1.0) } else { 0.0 })
}

pub fn random_dense_nonlinear(rng: &mut ChaCha8Rng, n: usize) -> DenseNonlinear {
    let a = random_stiff(rng, n, 20.0, 0.3);
    let b = DenseMatrix::from_fn(n, n, |_, _| rng.gen_range(-0.5..0.5));
    let c = random_vec(rng, n);
    DenseNonlinear::new(a, b, c)
}

pub fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn max_abs(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |m, v| m.max(v.abs()))
}

pub fn diff_max(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

pub fn rel_diff(a: &[f64], b: &[f64]) -> f64 {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    norm(&d) / norm(b).max(f64::MIN_POSITIVE)
}

/// Row-major copy for the elimination below.
fn to_rows(a: &DenseMatrix) -> Vec<Vec<f64>> {
    (0..a.rows()).map(|i| (0..a.cols()).map(|j| a[(i, j)]).collect()).collect()
}

/// Gaussian elimination with complete row scan, on a copy.
pub fn gauss_solve(a: &DenseMatrix, b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut m = to_rows(a);
    let mut x = b.to_vec();
    for k in 0..n {
        let p = (k..n).max_by(|&i, &j| m[i][k].abs().total_cmp(&m[j][k].abs())).unwrap();
        m.swap(k, p);
        x.swap(k, p);
        for i in k + 1..n {
            let f = m[i][k] / m[k][k];
            if f != 0.0 {
                for j in k..n {
                    m[i][j] -= f * m[k][j];
                }
                x[i] -= f * x[k];
            }
        }
    }
    for k in (0..n).rev() {
        let s: f64 = (k + 1..n).map(|j| m[k][j] * x[j]).sum();
        x[k] = (x[k] - s) / m[k][k];
    }
    x
}

pub fn explicit_jacobian<P: OdeProblem + ?Sized>(p: &P, y: &[f64]) -> DenseMatrix {
    let n = p.dim();
    let mut j = DenseMatrix::zeros(n, n);
    let mut e = vec![0.0; n];
    for c in 0..n {
        e.fill(0.0);
        e[c] = 1.0;
        p.jvp(y, &e, j.col_mut(c));
    }
    j
}

/// Classical Rosenbrock step with the exact Jacobian and dense stage solves:
/// `(I − hγJ) k_i = h f(y + Σα k) + hJ Σ_{j<i} γ_{i,j} k_j`.
/// Returns `(y_new, y_embedded, stages)`.
pub fn classical_rosenbrock_step<P: OdeProblem + ?Sized>(
    p: &P,
    y: &[f64],
    h: f64,
    t: &Tableau,
) -> (Vec<f64>, Vec<f64>, Vec<Vec<f64>>) {
    let n = y.len();
    let j = explicit_jacobian(p, y);
    let lhs = DenseMatrix::from_fn(n, n, |r, c| if r == c { 1.0 } else { 0.0 } - h * t.gamma * j[(r, c)]);
    let mut ks: Vec<Vec<f64>> = Vec::new();
    for i in 0..t.stages {
        let mut yi = y.to_vec();
        let mut g = vec![0.0; n];
        for (jj, k) in ks.iter().enumerate() {
            for r in 0..n {
                yi[r] += t.alpha[(i, jj)] * k[r];
                g[r] += t.gamma_lower[(i, jj)] * k[r];
            }
        }
        let mut f = vec![0.0; n];
        p.rhs(&yi, &mut f);
        let jg = j.matvec(&g);
        let rhs: Vec<f64> = (0..n).map(|r| h * f[r] + h * jg[r]).collect();
        ks.push(gauss_solve(&lhs, &rhs));
    }
    let mut yn = y.to_vec();
    let mut ye = y.to_vec();
    for (i, k) in ks.iter().enumerate() {
        for r in 0..n {
            yn[r] += t.b[i] * k[r];
            ye[r] += t.b_hat[i] * k[r];
        }
    }
    (yn, ye, ks)
}

/// Scalar stability function `R(z) = 1 + z bᵀ (I − zβ)⁻¹ 1`.
pub fn scalar_stability(t: &Tableau, z: f64) -> f64 {
    let s = t.stages;
    let beta = DenseMatrix::from_fn(s, s, |i, j| {
        let g = if i == j { t.gamma } else if j < i { t.gamma_lower[(i, j)] } else { 0.0 };
        t.alpha[(i, j)] + g
    });
    let m = DenseMatrix::from_fn(s, s, |i, j| if i == j { 1.0 } else { 0.0 } - z * beta[(i, j)]);
    let x = gauss_solve(&m, &vec![1.0; s]);
    1.0 + z * t.b.iter().zip(&x).map(|(b, x)| b * x).sum::<f64>()
}

/// Dominant eigenvalue modulus by power iteration, for matrices whose
/// dominant eigenvalue is real and well separated.
pub fn power_method(a: &DenseMatrix, iters: usize) -> f64 {
    let n = a.rows();
    let mut v: Vec<f64> = (0..n).map(|i| 1.0 + 0.1 * i as f64).collect();
    let mut lambda = 0.0;
    for _ in 0..iters {
        let w = a.matvec(&v);
        let nw = norm(&w);
        lambda = v.iter().zip(&w).map(|(x, y)| x * y).sum::<f64>() / v.iter().map(|x| x * x).sum::<f64>();
        v = w.iter().map(|x| x / nw).collect();
    }
    lambda.abs()
}

/// `Vᵀ J V` with explicit matrices.
pub fn projected(j: &DenseMatrix, v: &DenseMatrix) -> DenseMatrix {
    v.transpose().matmul(j).matmul(v)
}

/// Absolute rounding floor for residuals evaluated as `k − hF − hJΣγk`,
/// where the terms cancel down from magnitude `‖k‖`.
pub fn cancellation_floor(k: &[f64]) -> f64 {
    64.0 * f64::EPSILON * norm(k)
}

/// `‖a − b‖ ≤ tol·‖b‖ + floor`.
pub fn agrees(a: &[f64], b: &[f64], tol: f64, floor: f64) -> bool {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    norm(&d) <= tol * norm(b) + floor
}

/// Max-abs deviations of the basis invariants against an explicit `J`:
/// orthonormality, `H = VᵀJV` outside the structurally zero block, and the
/// (extended) Arnoldi relation.
pub struct Deviations {
    pub ortho: f64,
    pub projection: f64,
    pub relation: f64,
    /// `J V − V H − h_next v_next e_Mᵀ`, for bases without extensions.
    pub pure: Option<f64>,
}

pub fn arnoldi_deviations(j: &DenseMatrix, b: &KrylovBasis) -> Deviations {
    let n = b.dim();
    let m = b.core_size();
    let size = b.size();
    let v = b.v_matrix();
    let ortho = v.transpose().matmul(&v).sub(&DenseMatrix::identity(size)).max_abs();

    let vjv = projected(j, &v);
    let mut projection: f64 = 0.0;
    for r in 0..size {
        for c in 0..size {
            // rows below the Arnoldi block in its columns are zero by construction
            if c < m && r >= m {
                assert_eq!(b.h()[(r, c)], 0.0);
                continue;
            }
            projection = projection.max((b.h()[(r, c)] - vjv[(r, c)]).abs());
        }
    }

    // J V = V H + (I − V_M V_Mᵀ) J v_M e_Mᵀ + (I − V Vᵀ) J Σ v̄_k e_{M+k}ᵀ
    let jv = j.matmul(&v);
    let mut rhs = v.matmul(b.h());
    let vm = DenseMatrix::from_columns(n, &(0..m).map(|c| b.column(c).to_vec()).collect::<Vec<_>>());
    let pm = DenseMatrix::identity(n).sub(&vm.matmul(&vm.transpose()));
    let pall = DenseMatrix::identity(n).sub(&v.matmul(&v.transpose()));
    if m > 0 {
        let t = pm.matvec(&j.matvec(b.column(m - 1)));
        for r in 0..n {
            rhs[(r, m - 1)] += t[r];
        }
    }
    for c in m..size {
        let t = pall.matvec(&j.matvec(b.column(c)));
        for r in 0..n {
            rhs[(r, c)] += t[r];
        }
    }
    let relation = jv.sub(&rhs).max_abs();

    let mut pure = None;
    if b.ext_count() == 0 && m > 0 {
        // pure form: J V = V H + h_next v_next e_Mᵀ
        let mut vh = v.matmul(b.h());
        if let Some(vn) = b.v_next() {
            for r in 0..n {
                vh[(r, m - 1)] += b.h_next() * vn[r];
            }
        }
        pure = Some(jv.sub(&vh).max_abs());
    }
    Deviations { ortho, projection, relation, pure }
}

/// `−D + K` with `D` positive diagonal (log-uniform in `[1, 50]`) and `K`
/// skew, so the field of values sits in the left half-plane and every
/// `I − c·X` with `c ≥ 0` is well conditioned.
pub fn dissipative(r: &mut ChaCha8Rng, n: usize, d: &[f64]) -> DenseMatrix {
    let k = random_matrix(r, n, n);
    DenseMatrix::from_fn(n, n, |i, j| if i == j { -d[i] } else { 2.0 * (k[(i, j)] - k[(j, i)]) })
}

/// `(J, h)` with `J` dissipative and `h` log-uniform in `[1e-4, 1]`.
pub fn random_jh(r: &mut ChaCha8Rng, n: usize) -> (DenseMatrix, f64) {
    let d: Vec<f64> = (0..n).map(|_| 50f64.powf(r.gen_range(0.0..1.0))).collect();
    let j = dissipative(r, n, &d);
    let h = 10f64.powf(r.gen_range(-4.0..0.0));
    (j, h)
}

/// A dissipative approximation of `J` differing by a relative perturbation.
pub fn perturbed(r: &mut ChaCha8Rng, j: &DenseMatrix) -> DenseMatrix {
    let n = j.rows();
    let d: Vec<f64> = (0..n).map(|i| -j[(i, i)] * r.gen_range(0.5..1.5)).collect();
    let e = dissipative(r, n, &vec![0.0; n]).scaled(r.gen_range(0.0..0.5));
    let mut a = j.add(&e);
    for i in 0..n {
        a[(i, i)] = -d[i];
    }
    a
}

pub fn basis_at<P: OdeProblem + ?Sized>(p: &P, y: &[f64], m: usize) -> KrylovBasis {
    let mut f = vec![0.0; p.dim()];
    p.rhs(y, &mut f);
    build_fixed(p, y, &f, m).unwrap()
}

/// Classical RK4 with fixed steps.
pub fn test_rk4<P: OdeProblem + ?Sized>(p: &P, y0: &[f64], tf: f64, steps: usize) -> Vec<f64> {
    let n = y0.len();
    let h = tf / steps as f64;
    let mut y = y0.to_vec();
    let eval = |y: &[f64]| {
        let mut o = vec![0.0; n];
        p.rhs(y, &mut o);
        o
    };
    let shift = |y: &[f64], k: &[f64], c: f64| -> Vec<f64> { y.iter().zip(k).map(|(a, b)| a + c * b).collect() };
    for _ in 0..steps {
        let k1 = eval(&y);
        let k2 = eval(&shift(&y, &k1, h / 2.0));
        let k3 = eval(&shift(&y, &k2, h / 2.0));
        let k4 = eval(&shift(&y, &k3, h));
        for i in 0..n {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    y
}

pub fn fixed_step_rok<P: OdeProblem + ?Sized>(p: &P, y0: &[f64], tf: f64, steps: usize, m: usize, t: &Tableau) -> Vec<f64> {
    let h = tf / steps as f64;
    let mut y = y0.to_vec();
    for _ in 0..steps {
        let b = basis_at(p, &y, m);
        y = rok_step(p, &y, h, t, &b, false).unwrap().y_new;
    }
    y
}

/// Convergence rates between successive step counts of fixed-step ROK
/// runs, measured against a 40000-step RK4 solution.
pub fn observed_orders<P: OdeProblem + ?Sized>(p: &P, y0: &[f64], tf: f64, m: usize, t: &Tableau, counts: &[usize]) -> Vec<f64> {
    let reference = test_rk4(p, y0, tf, 40_000);
    let errs: Vec<f64> = counts
        .iter()
        .map(|&c| {
            let y = fixed_step_rok(p, y0, tf, c, m, t);
            norm(&y.iter().zip(&reference).map(|(a, b)| a - b).collect::<Vec<_>>())
        })
        .collect();
    errs.windows(2).zip(counts.windows(2)).map(|(e, c)| (e[0] / e[1]).ln() / (c[1] as f64 / c[0] as f64).ln()).collect()
}
