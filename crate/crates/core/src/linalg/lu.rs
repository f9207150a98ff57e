use alloc::vec;
use alloc::vec::Vec;

use super::DenseMatrix;
use crate::error::{Error, Result};

/// Pivots at or below `PIVOT_RTOL * max|A|` are treated as zero.
pub const PIVOT_RTOL: f64 = 1e-14;

/// Row-pivoted Doolittle elimination producing explicit `L`, `U`, and `perm`
/// with `A[perm[i], :] = (L U)[i, :]`. With `hessenberg` set only the
/// sub-diagonal row is a pivot candidate, giving O(n²) work.
fn eliminate(a: &DenseMatrix, hessenberg: bool, threshold: f64) -> Result<(Vec<usize>, DenseMatrix, DenseMatrix)> {
    let n = a.rows();
    let mut u = a.clone();
    let mut l = DenseMatrix::identity(n);
    let mut perm: Vec<usize> = (0..n).collect();
    for k in 0..n {
        let last = if hessenberg { (k + 1).min(n.saturating_sub(1)) } else { n - 1 };
        let mut p = k;
        for i in k + 1..=last {
            if libm::fabs(u[(i, k)]) > libm::fabs(u[(p, k)]) {
                p = i;
            }
        }
        let pivot = u[(p, k)];
        if !(libm::fabs(pivot) > threshold) {
            return Err(Error::Singular { pivot, threshold });
        }
        if p != k {
            perm.swap(p, k);
            for j in k..n {
                let t = u[(k, j)];
                u[(k, j)] = u[(p, j)];
                u[(p, j)] = t;
            }
            for j in 0..k {
                let t = l[(k, j)];
                l[(k, j)] = l[(p, j)];
                l[(p, j)] = t;
            }
        }
        for i in k + 1..=last {
            let m = u[(i, k)] / pivot;
            if m == 0.0 {
                continue;
            }
            l[(i, k)] = m;
            u[(i, k)] = 0.0;
            for j in k + 1..n {
                let ukj = u[(k, j)];
                u[(i, j)] -= m * ukj;
            }
        }
    }
    Ok((perm, l, u))
}

fn forward_unit(l: &DenseMatrix, x: &mut [f64]) {
    let n = x.len();
    for j in 0..n {
        let xj = x[j];
        if xj != 0.0 {
            for i in j + 1..n {
                x[i] -= l[(i, j)] * xj;
            }
        }
    }
}

fn backward(u: &DenseMatrix, x: &mut [f64]) {
    for j in (0..x.len()).rev() {
        x[j] /= u[(j, j)];
        let xj = x[j];
        if xj != 0.0 {
            for i in 0..j {
                x[i] -= u[(i, j)] * xj;
            }
        }
    }
}

/// General LU factorization with partial pivoting.
#[derive(Clone, Debug)]
pub struct DenseLu {
    perm: Vec<usize>,
    l: DenseMatrix,
    u: DenseMatrix,
}

impl DenseLu {
    pub fn factor(a: &DenseMatrix) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::DimensionMismatch { expected: a.rows(), found: a.cols() });
        }
        let threshold = PIVOT_RTOL * a.max_abs();
        let (perm, l, u) = eliminate(a, false, threshold)?;
        Ok(Self { perm, l, u })
    }

    pub fn dim(&self) -> usize {
        self.perm.len()
    }

    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        if rhs.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: rhs.len() });
        }
        let mut x: Vec<f64> = self.perm.iter().map(|&p| rhs[p]).collect();
        forward_unit(&self.l, &mut x);
        backward(&self.u, &mut x);
        Ok(x)
    }

    /// Solves for every column of `rhs`.
    pub fn solve_matrix(&self, rhs: &DenseMatrix) -> Result<DenseMatrix> {
        let mut out = DenseMatrix::zeros(rhs.rows(), rhs.cols());
        for j in 0..rhs.cols() {
            let x = self.solve(rhs.col(j))?;
            out.col_mut(j).copy_from_slice(&x);
        }
        Ok(out)
    }

    pub fn inverse(&self) -> DenseMatrix {
        self.solve_matrix(&DenseMatrix::identity(self.dim()))
            .expect("dimensions match by construction")
    }
}

/// LU factors of `I − hg·H` for a (possibly extended) Hessenberg matrix `H`,
/// with `P (I − hg·H) = L U`.
///
/// Appending a basis vector grows `H` by one row and column. The factors are
/// bordered in O(M²) without touching the leading block; the row permutation
/// of the leading block is frozen. When the new diagonal pivot is too small
/// the whole matrix is refactorized with full partial pivoting instead.
#[derive(Clone, Debug)]
pub struct HessenbergFactorization {
    perm: Vec<usize>,
    l: DenseMatrix,
    u: DenseMatrix,
    hg: f64,
    /// `I − hg·H` as factorized, kept for the refactorization fallback.
    system: DenseMatrix,
    scale: f64,
    refactored: bool,
}

impl HessenbergFactorization {
    pub fn factor(h: &DenseMatrix, hg: f64) -> Result<Self> {
        if !h.is_square() {
            return Err(Error::DimensionMismatch { expected: h.rows(), found: h.cols() });
        }
        let system = DenseMatrix::identity(h.rows()).sub(&h.scaled(hg));
        Self::from_system(system, hg, h.is_upper_hessenberg(), false)
    }

    fn from_system(system: DenseMatrix, hg: f64, hessenberg: bool, refactored: bool) -> Result<Self> {
        let scale = system.max_abs();
        let (perm, l, u) = eliminate(&system, hessenberg, PIVOT_RTOL * scale)?;
        Ok(Self { perm, l, u, hg, system, scale, refactored })
    }

    pub fn dim(&self) -> usize {
        self.perm.len()
    }

    pub fn hg(&self) -> f64 {
        self.hg
    }

    pub fn perm(&self) -> &[usize] {
        &self.perm
    }

    pub fn l(&self) -> &DenseMatrix {
        &self.l
    }

    pub fn u(&self) -> &DenseMatrix {
        &self.u
    }

    /// The matrix `I − hg·H` these factors represent.
    pub fn system(&self) -> &DenseMatrix {
        &self.system
    }

    /// True when the most recent append had to refactorize from scratch.
    pub fn refactored(&self) -> bool {
        self.refactored
    }

    /// `max|P (I − hg·H) − L U|`
    pub fn factorization_error(&self) -> f64 {
        let lu = self.l.matmul(&self.u);
        let n = self.dim();
        let mut err: f64 = 0.0;
        for j in 0..n {
            for i in 0..n {
                err = err.max(libm::fabs(self.system[(self.perm[i], j)] - lu[(i, j)]));
            }
        }
        err
    }

    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        if rhs.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: rhs.len() });
        }
        let mut x: Vec<f64> = self.perm.iter().map(|&p| rhs[p]).collect();
        forward_unit(&self.l, &mut x);
        backward(&self.u, &mut x);
        Ok(x)
    }

    /// Appends a column whose entries below the old block are zero:
    /// `u_{1..M,M+1} = −hg L⁻¹ P h_{1..M,M+1}`, `u_{M+1,M+1} = 1 − hg h_{M+1,M+1}`,
    /// `l_{M+1,M+1} = 1`.
    pub fn append_column(&self, column: &[f64], diagonal: f64) -> Result<Self> {
        let zeros = vec![0.0; self.dim()];
        self.append(column, &zeros, diagonal)
    }

    /// Borders `H` with a new column (`h_{1..M,M+1}`), a new row
    /// (`h_{M+1,1..M}`) and the corner entry `h_{M+1,M+1}`.
    pub fn append(&self, column: &[f64], row: &[f64], diagonal: f64) -> Result<Self> {
        let m = self.dim();
        if column.len() != m {
            return Err(Error::DimensionMismatch { expected: m, found: column.len() });
        }
        if row.len() != m {
            return Err(Error::DimensionMismatch { expected: m, found: row.len() });
        }
        let hg = self.hg;
        let d: Vec<f64> = column.iter().map(|x| -hg * x).collect();
        let c: Vec<f64> = row.iter().map(|x| -hg * x).collect();
        let corner = 1.0 - hg * diagonal;

        let mut system = self.system.padded(m + 1, m + 1);
        for i in 0..m {
            system[(i, m)] = d[i];
            system[(m, i)] = c[i];
        }
        system[(m, m)] = corner;
        let scale = system.max_abs().max(self.scale);

        // L u = P d
        let mut u_col: Vec<f64> = self.perm.iter().map(|&p| d[p]).collect();
        forward_unit(&self.l, &mut u_col);
        // Uᵀ ℓ = c
        let mut ell = c;
        for i in 0..m {
            let mut s = ell[i];
            for k in 0..i {
                s -= self.u[(k, i)] * ell[k];
            }
            ell[i] = s / self.u[(i, i)];
        }
        let delta = corner - super::dot(&ell, &u_col);
        if !(libm::fabs(delta) > PIVOT_RTOL * scale) {
            return Self::from_system(system, hg, false, true);
        }

        let mut l = self.l.padded(m + 1, m + 1);
        let mut u = self.u.padded(m + 1, m + 1);
        for i in 0..m {
            l[(m, i)] = ell[i];
            u[(i, m)] = u_col[i];
        }
        l[(m, m)] = 1.0;
        u[(m, m)] = delta;
        let mut perm = self.perm.clone();
        perm.push(m);
        Ok(Self { perm, l, u, hg, system, scale, refactored: false })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_by_one_zero_h() {
        let f = HessenbergFactorization::factor(&DenseMatrix::from_rows(&[&[0.0]]), 0.5).unwrap();
        assert_eq!(f.u()[(0, 0)], 1.0);
        assert_eq!(f.l()[(0, 0)], 1.0);
        assert_eq!(f.solve(&[3.0]).unwrap(), vec![3.0]);
    }

    #[test]
    fn one_by_one() {
        let f = HessenbergFactorization::factor(&DenseMatrix::from_rows(&[&[2.0]]), 0.25).unwrap();
        assert_eq!(f.u()[(0, 0)], 0.5);
        assert_eq!(f.solve(&[1.0]).unwrap(), vec![2.0]);
    }

    #[test]
    fn append_to_empty() {
        let f = HessenbergFactorization::factor(&DenseMatrix::zeros(0, 0), 0.25).unwrap();
        let g = f.append_column(&[], 2.0).unwrap();
        assert_eq!(g.u()[(0, 0)], 0.5);
        assert!(!g.refactored());
    }

    #[test]
    fn forced_zero_pivot_is_singular() {
        let f = HessenbergFactorization::factor(&DenseMatrix::from_rows(&[&[1.0]]), 0.5).unwrap();
        // 1 − 0.5·2 = 0 and the new row is zero, so the bordered matrix is singular.
        let err = f.append_column(&[3.0], 2.0).unwrap_err();
        assert!(matches!(err, Error::Singular { .. }));
    }

    #[test]
    fn dimension_mismatch() {
        let f = HessenbergFactorization::factor(&DenseMatrix::identity(2), 0.1).unwrap();
        assert!(matches!(f.solve(&[1.0]), Err(Error::DimensionMismatch { expected: 2, found: 1 })));
        assert!(f.append_column(&[1.0], 0.0).is_err());
    }

    #[test]
    fn singular_fresh_factor() {
        let h = DenseMatrix::from_rows(&[&[2.0, 0.0], &[0.0, 1.0]]);
        assert!(matches!(HessenbergFactorization::factor(&h, 0.5), Err(Error::Singular { .. })));
    }

    #[test]
    fn pivoting_hessenberg() {
        // Leading entry vanishes: I − H has a zero (0,0) entry and needs a swap.
        let h = DenseMatrix::from_rows(&[&[1.0, 2.0, 0.5], &[3.0, 0.0, 1.0], &[0.0, 4.0, -1.0]]);
        let f = HessenbergFactorization::factor(&h, 1.0).unwrap();
        assert_ne!(f.perm()[0], 0);
        assert!(f.factorization_error() < 1e-14);
        let x = f.solve(&[1.0, 2.0, 3.0]).unwrap();
        let r = f.system().matvec(&x);
        for (a, b) in r.iter().zip([1.0, 2.0, 3.0]) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn bordered_row_and_column() {
        let f = HessenbergFactorization::factor(&DenseMatrix::from_rows(&[&[0.0]]), 1.0).unwrap();
        // [[1, 1], [1, 1]]: δ = 0 and the refactorization also fails
        assert!(matches!(f.append(&[-1.0], &[-1.0], 0.0), Err(Error::Singular { .. })));
        // [[1, -1], [1, 1]]: δ = 1 − (1)(−1) = 2
        let g = f.append(&[1.0], &[-1.0], 0.0).unwrap();
        assert!(!g.refactored());
        assert_eq!(g.u()[(1, 1)], 2.0);
        assert!(g.factorization_error() < 1e-15);
    }

    #[test]
    fn dense_lu_inverse() {
        let a = DenseMatrix::from_rows(&[&[0.0, 2.0, 1.0], &[1.0, 1.0, 0.0], &[3.0, 0.0, 1.0]]);
        let inv = DenseLu::factor(&a).unwrap().inverse();
        let id = a.matmul(&inv);
        assert!(id.sub(&DenseMatrix::identity(3)).max_abs() < 1e-14);
    }
}
