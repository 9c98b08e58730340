//! Small dense matrices over a [`Scalar`] field, plus exact rational helpers.

use std::fmt;
use std::ops::{Index, IndexMut};

use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::scalar::{Cq, Q, Scalar, C64};

/// Square matrix stored row-major.
#[derive(Clone, PartialEq)]
pub struct Mat<F> {
    n: usize,
    data: Vec<F>,
}

impl<F: Scalar> Mat<F> {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![F::zero(); n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = F::one();
        }
        m
    }

    pub fn scalar(n: usize, s: F) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = s.clone();
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<F>>) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::Dimension("matrix rows must form a square".into()));
        }
        Ok(Self { n, data: rows.into_iter().flatten().collect() })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn rows(&self) -> Vec<Vec<F>> {
        self.data.chunks(self.n.max(1)).map(|r| r.to_vec()).collect()
    }

    pub fn map<G: Scalar>(&self, f: impl Fn(&F) -> G) -> Mat<G> {
        Mat { n: self.n, data: self.data.iter().map(f).collect() }
    }

    pub fn to_c64(&self) -> Mat<C64> {
        self.map(|x| x.to_c64())
    }

    pub fn mul(&self, rhs: &Self) -> Self {
        let n = self.n;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = &self.data[i * n + k];
                if a.is_zero() {
                    continue;
                }
                for j in 0..n {
                    let t = a.clone() * rhs.data[k * n + j].clone();
                    out.data[i * n + j] = out.data[i * n + j].clone() + t;
                }
            }
        }
        out
    }

    pub fn add(&self, rhs: &Self) -> Self {
        Self {
            n: self.n,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a.clone() + b.clone()).collect(),
        }
    }

    pub fn sub(&self, rhs: &Self) -> Self {
        Self {
            n: self.n,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a.clone() - b.clone()).collect(),
        }
    }

    pub fn scale(&self, s: &F) -> Self {
        self.map(|x| x.clone() * s.clone())
    }

    pub fn apply(&self, v: &[F]) -> Vec<F> {
        (0..self.n)
            .map(|i| {
                (0..self.n).fold(F::zero(), |acc, j| acc + self.data[i * self.n + j].clone() * v[j].clone())
            })
            .collect()
    }

    pub fn adjoint(&self) -> Self {
        let n = self.n;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                out.data[j * n + i] = self.data[i * n + j].conj();
            }
        }
        out
    }

    pub fn is_identity(&self) -> bool {
        *self == Self::identity(self.n)
    }

    /// Largest entrywise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| (a.clone() - b.clone()).abs()).fold(0.0, f64::max)
    }

    /// Exact equality for `Cq`, tolerance `tol` (entrywise) otherwise.
    pub fn close_to(&self, other: &Self, tol: f64) -> bool {
        if F::EXACT {
            self == other
        } else {
            self.max_abs_diff(other) <= tol
        }
    }

    pub fn pow(&self, e: u32) -> Self {
        (0..e).fold(Self::identity(self.n), |acc, _| acc.mul(self))
    }

    /// Gauss-Jordan inverse. Pivots on the largest modulus entry.
    pub fn inverse(&self) -> Result<Self> {
        let n = self.n;
        let mut a = self.clone();
        let mut inv = Self::identity(n);
        for col in 0..n {
            let piv = (col..n)
                .filter(|&r| !a[(r, col)].is_zero())
                .max_by(|&x, &y| a[(x, col)].abs().total_cmp(&a[(y, col)].abs()))
                .ok_or_else(|| Error::RelationFailure("singular matrix".into()))?;
            if piv != col {
                for j in 0..n {
                    a.data.swap(piv * n + j, col * n + j);
                    inv.data.swap(piv * n + j, col * n + j);
                }
            }
            let p = a[(col, col)].clone();
            for j in 0..n {
                a[(col, j)] = a[(col, j)].clone() / p.clone();
                inv[(col, j)] = inv[(col, j)].clone() / p.clone();
            }
            for r in 0..n {
                if r == col || a[(r, col)].is_zero() {
                    continue;
                }
                let f = a[(r, col)].clone();
                for j in 0..n {
                    a[(r, j)] = a[(r, j)].clone() - f.clone() * a[(col, j)].clone();
                    inv[(r, j)] = inv[(r, j)].clone() - f.clone() * inv[(col, j)].clone();
                }
            }
        }
        Ok(inv)
    }
}

impl<F> Index<(usize, usize)> for Mat<F> {
    type Output = F;
    fn index(&self, (i, j): (usize, usize)) -> &F {
        &self.data[i * self.n + j]
    }
}

impl<F> IndexMut<(usize, usize)> for Mat<F> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut F {
        &mut self.data[i * self.n + j]
    }
}

impl<F: Scalar> fmt::Debug for Mat<F> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.data.chunks(self.n.max(1)).map(|r| r.iter().map(|x| x.to_c64()).collect::<Vec<_>>())).finish()
    }
}

impl Mat<C64> {
    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Operator norm induced by the Hermitian form `gram` (`‖m‖_G = sqrt(<m,m>_G)`).
    ///
    /// Computed as the square root of the largest eigenvalue of
    /// `G^{-1} A^* G A`, which is self-adjoint and positive for the form.
    pub fn op_norm_with(&self, gram: &Mat<C64>) -> f64 {
        let n = self.n;
        if n == 0 {
            return 0.0;
        }
        let ginv = gram.inverse().expect("inner product must be nondegenerate");
        let b = ginv.mul(&self.adjoint()).mul(gram).mul(self);
        // power iteration, measured in the G-norm
        let gnorm = |v: &[C64]| -> f64 {
            let gv = gram.apply(v);
            v.iter().zip(&gv).map(|(a, b)| (a.conj() * b).re).sum::<f64>().max(0.0).sqrt()
        };
        let mut best: f64 = 0.0;
        for seed in 0..n {
            let mut v: Vec<C64> = (0..n).map(|i| C64::new(1.0 + (i + seed) as f64 * 0.37, 0.1 * i as f64)).collect();
            let mut lam = 0.0;
            for _ in 0..200 {
                let w = b.apply(&v);
                let nw = gnorm(&w);
                let nv = gnorm(&v);
                if nw == 0.0 || nv == 0.0 {
                    lam = 0.0;
                    break;
                }
                let new = nw / nv;
                v = w.into_iter().map(|z| z / nw).collect();
                if (new - lam).abs() <= 1e-15 * new {
                    lam = new;
                    break;
                }
                lam = new;
            }
            best = best.max(lam);
        }
        // the Frobenius bound is always valid in the Euclidean case
        best.sqrt()
    }

    pub fn op_norm(&self) -> f64 {
        self.op_norm_with(&Mat::identity(self.n))
    }
}

impl Mat<Cq> {
    pub fn from_q_rows(rows: &[Vec<Q>]) -> Self {
        let n = rows.len();
        Self {
            n,
            data: rows.iter().flat_map(|r| r.iter().map(Cq::from_q)).collect(),
        }
    }
}

// --- exact rational vector helpers -------------------------------------------------

pub fn dot(a: &[Q], b: &[Q]) -> Q {
    a.iter().zip(b).fold(Q::zero(), |acc, (x, y)| acc + x * y)
}

pub fn vadd(a: &[Q], b: &[Q]) -> Vec<Q> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn vsub(a: &[Q], b: &[Q]) -> Vec<Q> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn vscale(a: &[Q], s: &Q) -> Vec<Q> {
    a.iter().map(|x| x * s).collect()
}

pub fn vneg(a: &[Q]) -> Vec<Q> {
    a.iter().map(|x| -x).collect()
}

/// Row-major rational matrix times vector.
pub fn qmat_apply(m: &[Vec<Q>], v: &[Q]) -> Vec<Q> {
    m.iter().map(|row| dot(row, v)).collect()
}

pub fn qmat_mul(a: &[Vec<Q>], b: &[Vec<Q>]) -> Vec<Vec<Q>> {
    let n = b.first().map_or(0, |r| r.len());
    a.iter()
        .map(|row| (0..n).map(|j| row.iter().zip(b).fold(Q::zero(), |acc, (x, br)| acc + x * &br[j])).collect())
        .collect()
}

pub fn qmat_transpose(a: &[Vec<Q>]) -> Vec<Vec<Q>> {
    let n = a.first().map_or(0, |r| r.len());
    (0..n).map(|j| a.iter().map(|r| r[j].clone()).collect()).collect()
}

pub fn qmat_identity(n: usize) -> Vec<Vec<Q>> {
    (0..n).map(|i| (0..n).map(|j| if i == j { Q::one() } else { Q::zero() }).collect()).collect()
}

/// Exact inverse of a square rational matrix.
pub fn qmat_inverse(a: &[Vec<Q>]) -> Option<Vec<Vec<Q>>> {
    let m = Mat::<Cq>::from_q_rows(a).inverse().ok()?;
    Some(m.rows().into_iter().map(|r| r.into_iter().map(|z| z.re).collect()).collect())
}

/// Coefficients `c` with `sum_j c_j basis_j = v`, if `v` lies in the rational span.
pub fn coords_in_basis(basis: &[Vec<Q>], v: &[Q]) -> Option<Vec<Q>> {
    let gram: Vec<Vec<Q>> = basis.iter().map(|a| basis.iter().map(|b| dot(a, b)).collect()).collect();
    let ginv = qmat_inverse(&gram)?;
    let rhs: Vec<Q> = basis.iter().map(|b| dot(b, v)).collect();
    let c = qmat_apply(&ginv, &rhs);
    let mut back = vec![Q::zero(); v.len()];
    for (cj, bj) in c.iter().zip(basis) {
        back = vadd(&back, &vscale(bj, cj));
    }
    (back == v).then_some(c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::q;

    #[test]
    fn exact_inverse() {
        let m = Mat::<Cq>::from_q_rows(&[vec![q(2, 1), q(1, 1)], vec![q(1, 1), q(1, 1)]]);
        let inv = m.inverse().unwrap();
        assert!(m.mul(&inv).is_identity());
    }

    #[test]
    fn op_norm_of_diagonal() {
        let mut m = Mat::<C64>::identity(3);
        m[(1, 1)] = C64::new(0.0, -4.0);
        assert!((m.op_norm() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn op_norm_with_weighted_form_is_invariant_under_isometries() {
        // reflection s(x) = x - <x, a> a in the basis of simple roots of A_2
        let gram = Mat::<C64>::from_rows(vec![
            vec![C64::new(2.0, 0.0), C64::new(-1.0, 0.0)],
            vec![C64::new(-1.0, 0.0), C64::new(2.0, 0.0)],
        ])
        .unwrap();
        let s1 = Mat::<C64>::from_rows(vec![
            vec![C64::new(-1.0, 0.0), C64::new(1.0, 0.0)],
            vec![C64::new(0.0, 0.0), C64::new(1.0, 0.0)],
        ])
        .unwrap();
        assert!((s1.op_norm_with(&gram) - 1.0).abs() < 1e-10);
        assert!(s1.op_norm() > 1.0);
    }

    #[test]
    fn span_coordinates() {
        let basis = vec![vec![q(1, 1), q(-1, 1), q(0, 1)], vec![q(0, 1), q(1, 1), q(-1, 1)]];
        let c = coords_in_basis(&basis, &[q(1, 1), q(0, 1), q(-1, 1)]).unwrap();
        assert_eq!(c, vec![q(1, 1), q(1, 1)]);
        assert!(coords_in_basis(&basis, &[q(1, 1), q(1, 1), q(1, 1)]).is_none());
    }
}
