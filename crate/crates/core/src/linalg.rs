//! Banded complex linear algebra used by the ladder generator.

use nalgebra::DMatrix;
use num_complex::Complex64;

pub type C64 = Complex64;

/// `e^{z} - 1` without cancellation for small `|z|`.
pub fn exp_m1(z: C64) -> C64 {
    let ex = z.re.exp();
    let half = (0.5 * z.im).sin();
    // e^x (cos y - 1 + i sin y) + (e^x - 1)
    C64::new(ex * (-2.0 * half * half) + z.re.exp_m1(), ex * z.im.sin())
}

/// Square tridiagonal matrix stored by bands: `lower[i] = A[i+1][i]`,
/// `upper[i] = A[i][i+1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Tridiagonal {
    pub lower: Vec<C64>,
    pub diag: Vec<C64>,
    pub upper: Vec<C64>,
}

impl Tridiagonal {
    pub fn new(lower: Vec<C64>, diag: Vec<C64>, upper: Vec<C64>) -> Self {
        assert_eq!(lower.len() + 1, diag.len());
        assert_eq!(upper.len() + 1, diag.len());
        Self { lower, diag, upper }
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn matvec(&self, x: &[C64]) -> Vec<C64> {
        let n = self.dim();
        assert_eq!(x.len(), n);
        (0..n)
            .map(|i| {
                let mut acc = self.diag[i] * x[i];
                if i > 0 {
                    acc += self.lower[i - 1] * x[i - 1];
                }
                if i + 1 < n {
                    acc += self.upper[i] * x[i + 1];
                }
                acc
            })
            .collect()
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        let n = self.dim();
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = self.diag[i];
            if i + 1 < n {
                m[(i + 1, i)] = self.lower[i];
                m[(i, i + 1)] = self.upper[i];
            }
        }
        m
    }

    /// Largest absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        let n = self.dim();
        (0..n)
            .map(|i| {
                let mut s = self.diag[i].norm();
                if i > 0 {
                    s += self.lower[i - 1].norm();
                }
                if i + 1 < n {
                    s += self.upper[i].norm();
                }
                s
            })
            .fold(0.0, f64::max)
    }

    /// `det(A - lambda I)` by the three-term recurrence.
    pub fn shifted_determinant(&self, lambda: C64) -> C64 {
        let mut prev = C64::new(1.0, 0.0);
        let mut cur = self.diag[0] - lambda;
        for i in 1..self.dim() {
            let next = (self.diag[i] - lambda) * cur - self.lower[i - 1] * self.upper[i - 1] * prev;
            prev = cur;
            cur = next;
        }
        cur
    }

    /// Coefficients `c_0..=c_n` of `det(A - lambda I) = sum_j c_j lambda^j`.
    pub fn characteristic_polynomial(&self) -> Vec<C64> {
        // p_i(lambda) = (d_i - lambda) p_{i-1} - l_{i-1} u_{i-1} p_{i-2}
        let mut prev = vec![C64::new(1.0, 0.0)];
        let mut cur = vec![self.diag[0], C64::new(-1.0, 0.0)];
        for i in 1..self.dim() {
            let coupling = self.lower[i - 1] * self.upper[i - 1];
            let mut next = vec![C64::default(); cur.len() + 1];
            for (j, &c) in cur.iter().enumerate() {
                next[j] += self.diag[i] * c;
                next[j + 1] -= c;
            }
            for (j, &c) in prev.iter().enumerate() {
                next[j] -= coupling * c;
            }
            prev = cur;
            cur = next;
        }
        cur
    }

    /// LU factorization of `A - shift * I` with partial pivoting.
    pub fn factor_shifted(&self, shift: C64) -> TridiagonalLu {
        TridiagonalLu::new(self, shift)
    }
}

/// Pivoted LU factors of a tridiagonal matrix (same layout as LAPACK `gttrf`).
#[derive(Clone, Debug)]
pub struct TridiagonalLu {
    dl: Vec<C64>,
    d: Vec<C64>,
    du: Vec<C64>,
    du2: Vec<C64>,
    swapped: Vec<bool>,
    singular: bool,
}

impl TridiagonalLu {
    fn new(a: &Tridiagonal, shift: C64) -> Self {
        let n = a.dim();
        let mut dl = a.lower.clone();
        let mut d: Vec<C64> = a.diag.iter().map(|&x| x - shift).collect();
        let mut du = a.upper.clone();
        let mut du2 = vec![C64::default(); n.saturating_sub(2)];
        let mut swapped = vec![false; n.saturating_sub(1)];
        for i in 0..n.saturating_sub(1) {
            if d[i].norm() >= dl[i].norm() {
                if d[i] != C64::default() {
                    let fact = dl[i] / d[i];
                    dl[i] = fact;
                    d[i + 1] -= fact * du[i];
                }
            } else {
                let fact = d[i] / dl[i];
                d[i] = dl[i];
                dl[i] = fact;
                let temp = du[i];
                du[i] = d[i + 1];
                d[i + 1] = temp - fact * d[i + 1];
                if i + 2 < n {
                    du2[i] = du[i + 1];
                    du[i + 1] = -fact * du[i + 1];
                }
                swapped[i] = true;
            }
        }
        let singular = d.iter().any(|x| *x == C64::default());
        Self {
            dl,
            d,
            du,
            du2,
            swapped,
            singular,
        }
    }

    pub fn is_singular(&self) -> bool {
        self.singular
    }

    /// Solve in place. Returns `false` when a zero pivot was hit.
    pub fn solve(&self, b: &mut [C64]) -> bool {
        let n = self.d.len();
        assert_eq!(b.len(), n);
        if self.singular {
            return false;
        }
        for i in 0..n.saturating_sub(1) {
            if self.swapped[i] {
                let temp = b[i];
                b[i] = b[i + 1];
                b[i + 1] = temp - self.dl[i] * b[i];
            } else {
                b[i + 1] -= self.dl[i] * b[i];
            }
        }
        b[n - 1] /= self.d[n - 1];
        if n > 1 {
            b[n - 2] = (b[n - 2] - self.du[n - 2] * b[n - 1]) / self.d[n - 2];
        }
        for i in (0..n.saturating_sub(2)).rev() {
            b[i] = (b[i] - self.du[i] * b[i + 1] - self.du2[i] * b[i + 2]) / self.d[i];
        }
        true
    }
}

pub fn norm2(v: &[C64]) -> f64 {
    v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}
