//! Small complex linear algebra: the 2×2 matrices that carry transfer steps and
//! ϴ blocks, plus the handful of dense routines (eigenvalues of unitaries,
//! spectral norms) the rest of the crate needs.

use std::f64::consts::TAU;
use std::ops::{Mul, Neg, Sub};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::C64;

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);
pub(crate) const ONE: C64 = C64::new(1.0, 0.0);

/// Row-major complex 2×2 matrix `[[a, b], [c, d]]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mat2C {
    pub a: C64,
    pub b: C64,
    pub c: C64,
    pub d: C64,
}

impl Mat2C {
    pub const fn new(a: C64, b: C64, c: C64, d: C64) -> Self {
        Mat2C { a, b, c, d }
    }

    pub const fn identity() -> Self {
        Mat2C::new(ONE, ZERO, ZERO, ONE)
    }

    pub fn from_rows(rows: [[C64; 2]; 2]) -> Self {
        Mat2C::new(rows[0][0], rows[0][1], rows[1][0], rows[1][1])
    }

    pub fn rows(&self) -> [[C64; 2]; 2] {
        [[self.a, self.b], [self.c, self.d]]
    }

    pub fn scale(&self, s: C64) -> Self {
        Mat2C::new(self.a * s, self.b * s, self.c * s, self.d * s)
    }

    pub fn det(&self) -> C64 {
        self.a * self.d - self.b * self.c
    }

    pub fn trace(&self) -> C64 {
        self.a + self.d
    }

    pub fn adjoint(&self) -> Self {
        Mat2C::new(self.a.conj(), self.c.conj(), self.b.conj(), self.d.conj())
    }

    pub fn transpose(&self) -> Self {
        Mat2C::new(self.a, self.c, self.b, self.d)
    }

    /// Inverse via the adjugate; `None` when the determinant vanishes.
    pub fn inverse(&self) -> Option<Self> {
        let det = self.det();
        if det.norm() == 0.0 {
            return None;
        }
        Some(Mat2C::new(self.d, -self.b, -self.c, self.a).scale(det.inv()))
    }

    pub fn apply(&self, v: [C64; 2]) -> [C64; 2] {
        [self.a * v[0] + self.b * v[1], self.c * v[0] + self.d * v[1]]
    }

    pub fn max_abs(&self) -> f64 {
        self.a.norm().max(self.b.norm()).max(self.c.norm()).max(self.d.norm())
    }

    pub fn frobenius(&self) -> f64 {
        (self.a.norm_sqr() + self.b.norm_sqr() + self.c.norm_sqr() + self.d.norm_sqr()).sqrt()
    }

    /// Largest singular value, from the larger eigenvalue of `M*M`.
    pub fn norm(&self) -> f64 {
        let p = self.a.norm_sqr() + self.c.norm_sqr();
        let s = self.b.norm_sqr() + self.d.norm_sqr();
        let off = self.a.conj() * self.b + self.c.conj() * self.d;
        let half = 0.5 * (p - s);
        (0.5 * (p + s) + (half * half + off.norm_sqr()).sqrt()).sqrt()
    }

    /// Both eigenvalues, from the characteristic polynomial.
    pub fn eigenvalues(&self) -> [C64; 2] {
        let half_tr = self.trace() / 2.0;
        let root = (half_tr * half_tr - self.det()).sqrt();
        [half_tr + root, half_tr - root]
    }

    pub fn spectral_radius(&self) -> f64 {
        let [l1, l2] = self.eigenvalues();
        l1.norm().max(l2.norm())
    }

    /// `max |(M M^*) - I|` entrywise.
    pub fn unitarity_residual(&self) -> f64 {
        (*self * self.adjoint() - Mat2C::identity()).max_abs()
    }

    pub fn max_diff(&self, other: &Mat2C) -> f64 {
        (*self - *other).max_abs()
    }
}

impl Mul for Mat2C {
    type Output = Mat2C;

    fn mul(self, r: Mat2C) -> Mat2C {
        Mat2C::new(
            self.a * r.a + self.b * r.c,
            self.a * r.b + self.b * r.d,
            self.c * r.a + self.d * r.c,
            self.c * r.b + self.d * r.d,
        )
    }
}

impl Sub for Mat2C {
    type Output = Mat2C;

    fn sub(self, r: Mat2C) -> Mat2C {
        Mat2C::new(self.a - r.a, self.b - r.b, self.c - r.c, self.d - r.d)
    }
}

impl Neg for Mat2C {
    type Output = Mat2C;

    fn neg(self) -> Mat2C {
        self.scale(-ONE)
    }
}

/// Angle of `z` in `[0, 2π)`.
pub fn angle(z: C64) -> f64 {
    let t = z.arg();
    if t < 0.0 {
        t + TAU
    } else {
        t
    }
}

pub fn unit(theta: f64) -> C64 {
    C64::from_polar(1.0, theta)
}

/// Spectral norm of a dense matrix.
pub fn spectral_norm(m: &DMatrix<C64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.singular_values().max()
}

/// `max |(U U^*) - I|` entrywise. Sparse matrices are multiplied through
/// their nonzero pattern.
pub fn unitarity_residual(m: &DMatrix<C64>) -> f64 {
    let n = m.nrows();
    let cols: Vec<Vec<(usize, C64)>> = (0..m.ncols())
        .map(|k| (0..n).filter_map(|i| (m[(i, k)] != ZERO).then(|| (i, m[(i, k)]))).collect())
        .collect();
    let nnz: usize = cols.iter().map(Vec::len).sum();
    if nnz * 8 > n * n {
        let prod = m * m.adjoint();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                let target = if i == j { ONE } else { ZERO };
                worst = worst.max((prod[(i, j)] - target).norm());
            }
        }
        return worst;
    }
    let mut acc: std::collections::HashMap<(usize, usize), C64> = std::collections::HashMap::new();
    for col in &cols {
        for &(i, a) in col {
            for &(j, b) in col {
                *acc.entry((i, j)).or_insert(ZERO) += a * b.conj();
            }
        }
    }
    let mut worst = 0.0f64;
    for i in 0..n {
        if !acc.contains_key(&(i, i)) {
            worst = 1.0;
        }
    }
    for (&(i, j), &v) in &acc {
        let target = if i == j { ONE } else { ZERO };
        worst = worst.max((v - target).norm());
    }
    worst
}

/// Eigen-decomposition of a (numerically) unitary matrix.
///
/// A unitary matrix is normal, so its complex Schur form is diagonal up to
/// roundoff and the Schur vectors are eigenvectors. Column `j` of the returned
/// matrix pairs with eigenvalue `j`.
pub fn unitary_eigen(m: &DMatrix<C64>) -> (Vec<C64>, DMatrix<C64>) {
    let (q, t) = m.clone().schur().unpack();
    let values = (0..t.nrows()).map(|i| t[(i, i)]).collect();
    (values, q)
}

pub fn unitary_eigenvalues(m: &DMatrix<C64>) -> Vec<C64> {
    m.clone()
        .schur()
        .eigenvalues()
        .map(|v| v.iter().copied().collect())
        .unwrap_or_default()
}
