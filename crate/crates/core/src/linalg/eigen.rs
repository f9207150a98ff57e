use alloc::vec;
use alloc::vec::Vec;

use super::DenseMatrix;
use crate::error::{Error, Result};

const MAX_ITS_PER_EIGENVALUE: usize = 60;

/// 1-based square work array, row-major.
struct Work {
    n: usize,
    a: Vec<f64>,
}

impl Work {
    fn get(&self, i: isize, j: isize) -> f64 {
        self.a[(i as usize - 1) * self.n + (j as usize - 1)]
    }
    fn set(&mut self, i: isize, j: isize, v: f64) {
        self.a[(i as usize - 1) * self.n + (j as usize - 1)] = v;
    }
    fn add(&mut self, i: isize, j: isize, v: f64) {
        self.a[(i as usize - 1) * self.n + (j as usize - 1)] += v;
    }
}

#[inline]
fn sign(a: f64, b: f64) -> f64 {
    if b >= 0.0 {
        libm::fabs(a)
    } else {
        -libm::fabs(a)
    }
}

/// Reduction to upper Hessenberg form by stabilized elementary similarity
/// transformations.
fn reduce_to_hessenberg(w: &mut Work) {
    let n = w.n as isize;
    for m in 2..n {
        let mut x = 0.0;
        let mut i = m;
        for j in m..=n {
            if libm::fabs(w.get(j, m - 1)) > libm::fabs(x) {
                x = w.get(j, m - 1);
                i = j;
            }
        }
        if i != m {
            for j in (m - 1)..=n {
                let t = w.get(i, j);
                w.set(i, j, w.get(m, j));
                w.set(m, j, t);
            }
            for j in 1..=n {
                let t = w.get(j, i);
                w.set(j, i, w.get(j, m));
                w.set(j, m, t);
            }
        }
        if x != 0.0 {
            for i in (m + 1)..=n {
                let mut y = w.get(i, m - 1);
                if y != 0.0 {
                    y /= x;
                    w.set(i, m - 1, 0.0);
                    for j in m..=n {
                        let v = w.get(m, j);
                        w.add(i, j, -y * v);
                    }
                    for j in 1..=n {
                        let v = w.get(j, i);
                        w.add(j, m, y * v);
                    }
                }
            }
        }
    }
    for i in 1..=n {
        for j in 1..(i - 1).max(1) {
            w.set(i, j, 0.0);
        }
    }
}

/// Francis double-shift QR on an upper Hessenberg work array. Returns the
/// eigenvalues as `(re, im)`; on failure returns the eigenvalues found so far.
fn hessenberg_qr(w: &mut Work) -> core::result::Result<Vec<(f64, f64)>, Vec<(f64, f64)>> {
    let n = w.n as isize;
    let mut wr = vec![0.0; w.n + 1];
    let mut wi = vec![0.0; w.n + 1];
    let mut anorm = 0.0;
    for i in 1..=n {
        for j in (i - 1).max(1)..=n {
            anorm += libm::fabs(w.get(i, j));
        }
    }
    let mut nn = n;
    let mut t = 0.0;
    let (mut p, mut q, mut r) = (0.0f64, 0.0f64, 0.0f64);
    let (mut x, mut y, mut z);
    while nn >= 1 {
        let mut its = 0usize;
        loop {
            let mut l = nn;
            while l >= 2 {
                let mut s = libm::fabs(w.get(l - 1, l - 1)) + libm::fabs(w.get(l, l));
                if s == 0.0 {
                    s = anorm;
                }
                if libm::fabs(w.get(l, l - 1)) + s == s {
                    w.set(l, l - 1, 0.0);
                    break;
                }
                l -= 1;
            }
            x = w.get(nn, nn);
            if l == nn {
                wr[nn as usize] = x + t;
                wi[nn as usize] = 0.0;
                nn -= 1;
            } else {
                y = w.get(nn - 1, nn - 1);
                let ww = w.get(nn, nn - 1) * w.get(nn - 1, nn);
                if l == nn - 1 {
                    p = 0.5 * (y - x);
                    q = p * p + ww;
                    z = libm::sqrt(libm::fabs(q));
                    x += t;
                    if q >= 0.0 {
                        z = p + sign(z, p);
                        wr[(nn - 1) as usize] = x + z;
                        wr[nn as usize] = x + z;
                        if z != 0.0 {
                            wr[nn as usize] = x - ww / z;
                        }
                        wi[(nn - 1) as usize] = 0.0;
                        wi[nn as usize] = 0.0;
                    } else {
                        wr[(nn - 1) as usize] = x + p;
                        wr[nn as usize] = x + p;
                        wi[(nn - 1) as usize] = -z;
                        wi[nn as usize] = z;
                    }
                    nn -= 2;
                } else {
                    if its == MAX_ITS_PER_EIGENVALUE {
                        let found = ((nn + 1)..=n).map(|k| (wr[k as usize], wi[k as usize])).collect();
                        return Err(found);
                    }
                    let mut ww = ww;
                    if its == 10 || its == 20 || its == 40 {
                        t += x;
                        for i in 1..=nn {
                            w.add(i, i, -x);
                        }
                        let s = libm::fabs(w.get(nn, nn - 1)) + libm::fabs(w.get(nn - 1, nn - 2));
                        x = 0.75 * s;
                        y = x;
                        ww = -0.4375 * s * s;
                    }
                    its += 1;
                    let mut m = nn - 2;
                    while m >= l {
                        z = w.get(m, m);
                        r = x - z;
                        let s = y - z;
                        p = (r * s - ww) / w.get(m + 1, m) + w.get(m, m + 1);
                        q = w.get(m + 1, m + 1) - z - r - s;
                        r = w.get(m + 2, m + 1);
                        let s = libm::fabs(p) + libm::fabs(q) + libm::fabs(r);
                        p /= s;
                        q /= s;
                        r /= s;
                        if m == l {
                            break;
                        }
                        let u = libm::fabs(w.get(m, m - 1)) * (libm::fabs(q) + libm::fabs(r));
                        let v = libm::fabs(p)
                            * (libm::fabs(w.get(m - 1, m - 1)) + libm::fabs(z) + libm::fabs(w.get(m + 1, m + 1)));
                        if u + v == v {
                            break;
                        }
                        m -= 1;
                    }
                    for i in (m + 2)..=nn {
                        w.set(i, i - 2, 0.0);
                        if i != m + 2 {
                            w.set(i, i - 3, 0.0);
                        }
                    }
                    let mut k = m;
                    while k <= nn - 1 {
                        if k != m {
                            p = w.get(k, k - 1);
                            q = w.get(k + 1, k - 1);
                            r = 0.0;
                            if k != nn - 1 {
                                r = w.get(k + 2, k - 1);
                            }
                            x = libm::fabs(p) + libm::fabs(q) + libm::fabs(r);
                            if x != 0.0 {
                                p /= x;
                                q /= x;
                                r /= x;
                            }
                        }
                        let s = sign(libm::sqrt(p * p + q * q + r * r), p);
                        if s != 0.0 {
                            if k == m {
                                if l != m {
                                    let v = w.get(k, k - 1);
                                    w.set(k, k - 1, -v);
                                }
                            } else {
                                w.set(k, k - 1, -s * x);
                            }
                            p += s;
                            x = p / s;
                            y = q / s;
                            z = r / s;
                            q /= p;
                            r /= p;
                            for j in k..=nn {
                                let mut pp = w.get(k, j) + q * w.get(k + 1, j);
                                if k != nn - 1 {
                                    pp += r * w.get(k + 2, j);
                                    w.add(k + 2, j, -pp * z);
                                }
                                w.add(k + 1, j, -pp * y);
                                w.add(k, j, -pp * x);
                            }
                            let mmin = if nn < k + 3 { nn } else { k + 3 };
                            for i in l..=mmin {
                                let mut pp = x * w.get(i, k) + y * w.get(i, k + 1);
                                if k != nn - 1 {
                                    pp += z * w.get(i, k + 2);
                                    w.add(i, k + 2, -pp * r);
                                }
                                w.add(i, k + 1, -pp * q);
                                w.add(i, k, -pp);
                            }
                        }
                        k += 1;
                    }
                }
            }
            if !(l < nn - 1) {
                break;
            }
        }
    }
    Ok((1..=n).map(|k| (wr[k as usize], wi[k as usize])).collect())
}

fn work_from(a: &DenseMatrix) -> Work {
    let n = a.rows();
    let mut w = Work { n, a: vec![0.0; n * n] };
    for i in 0..n {
        for j in 0..n {
            w.a[i * n + j] = a[(i, j)];
        }
    }
    w
}

/// All eigenvalues of a square matrix as `(re, im)` pairs, unordered.
pub fn eigenvalues(a: &DenseMatrix) -> Result<Vec<(f64, f64)>> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch { expected: a.rows(), found: a.cols() });
    }
    if !a.is_finite() {
        return Err(Error::InvalidArgument("matrix has non-finite entries"));
    }
    let mut w = work_from(a);
    reduce_to_hessenberg(&mut w);
    hessenberg_qr(&mut w).map_err(|found| Error::NoConvergence {
        estimate: found.iter().fold(0.0, |m: f64, (re, im)| m.max(libm::hypot(*re, *im))),
    })
}

/// Largest eigenvalue modulus. On iteration failure the error carries the
/// best estimate from the eigenvalues that did converge.
pub fn spectral_radius(a: &DenseMatrix) -> Result<f64> {
    let ev = eigenvalues(a)?;
    Ok(ev.iter().fold(0.0, |m: f64, (re, im)| m.max(libm::hypot(*re, *im))))
}
