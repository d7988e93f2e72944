//! Small dense complex matrices and the Hermitian eigensolver used for
//! fidelity, state validation and tomography clean-up.
//!
//! Everything here operates on square matrices of modest dimension (the
//! protocols never exceed a few hundred rows), so a cyclic Jacobi sweep is
//! accurate and fast enough.

use num_complex::Complex64;

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

/// Row-major square complex matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct CMat {
    n: usize,
    data: Vec<C64>,
}

impl CMat {
    pub fn zeros(n: usize) -> Self {
        CMat {
            n,
            data: vec![ZERO; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = CMat::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = ONE;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<C64>]) -> Self {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * n);
        for r in rows {
            assert_eq!(r.len(), n, "matrix must be square");
            data.extend_from_slice(r);
        }
        CMat { n, data }
    }

    /// 2x2 convenience constructor, row major.
    pub fn two(a: C64, b: C64, c: C64, d: C64) -> Self {
        CMat {
            n: 2,
            data: vec![a, b, c, d],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: C64) {
        self.data[i * self.n + j] = v;
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn mul(&self, other: &CMat) -> CMat {
        assert_eq!(self.n, other.n);
        let n = self.n;
        let mut out = CMat::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.data[i * n + k];
                if a == ZERO {
                    continue;
                }
                for j in 0..n {
                    out.data[i * n + j] += a * other.data[k * n + j];
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(self.n, v.len());
        let n = self.n;
        let mut out = vec![ZERO; n];
        for i in 0..n {
            let mut acc = ZERO;
            for j in 0..n {
                acc += self.data[i * n + j] * v[j];
            }
            out[i] = acc;
        }
        out
    }

    pub fn adjoint(&self) -> CMat {
        let n = self.n;
        let mut out = CMat::zeros(n);
        for i in 0..n {
            for j in 0..n {
                out.data[j * n + i] = self.data[i * n + j].conj();
            }
        }
        out
    }

    pub fn scale(&self, s: C64) -> CMat {
        CMat {
            n: self.n,
            data: self.data.iter().map(|x| x * s).collect(),
        }
    }

    pub fn add(&self, other: &CMat) -> CMat {
        assert_eq!(self.n, other.n);
        CMat {
            n: self.n,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn sub(&self, other: &CMat) -> CMat {
        assert_eq!(self.n, other.n);
        CMat {
            n: self.n,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    pub fn kron(&self, other: &CMat) -> CMat {
        let (n, m) = (self.n, other.n);
        let mut out = CMat::zeros(n * m);
        for i in 0..n {
            for j in 0..n {
                let a = self.data[i * n + j];
                if a == ZERO {
                    continue;
                }
                for k in 0..m {
                    for l in 0..m {
                        out.data[(i * m + k) * n * m + (j * m + l)] = a * other.data[k * m + l];
                    }
                }
            }
        }
        out
    }

    pub fn trace(&self) -> C64 {
        (0..self.n).map(|i| self.data[i * self.n + i]).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// max |U\u{2020}U - I|, the unitarity defect.
    pub fn unitarity_defect(&self) -> f64 {
        self.adjoint()
            .mul(self)
            .sub(&CMat::identity(self.n))
            .max_abs()
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        self.unitarity_defect() <= tol
    }

    pub fn hermiticity_defect(&self) -> f64 {
        self.sub(&self.adjoint()).max_abs()
    }

    /// Eigendecomposition of a Hermitian matrix by cyclic Jacobi rotations.
    /// Returns eigenvalues (ascending) and the unitary of column eigenvectors.
    pub fn hermitian_eigen(&self) -> (Vec<f64>, CMat) {
        let n = self.n;
        let mut a = self.clone();
        // enforce exact Hermitian symmetry before iterating
        for i in 0..n {
            for j in 0..n {
                let s = (a.get(i, j) + a.get(j, i).conj()) * C64::new(0.5, 0.0);
                a.set(i, j, s);
                a.set(j, i, s.conj());
            }
        }
        let mut v = CMat::identity(n);
        let scale = a.max_abs().max(1.0);
        for _sweep in 0..100 {
            let mut off = 0.0f64;
            for p in 0..n {
                for q in (p + 1)..n {
                    off = off.max(a.get(p, q).norm());
                }
            }
            if off <= 1e-15 * scale {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    let apq = a.get(p, q);
                    let r = apq.norm();
                    if r <= 1e-300 {
                        continue;
                    }
                    let phase = apq / C64::new(r, 0.0);
                    let app = a.get(p, p).re;
                    let aqq = a.get(q, q).re;
                    // tangent of the rotation that annihilates the block
                    let theta = (aqq - app) / (2.0 * r);
                    let t = if theta >= 0.0 {
                        1.0 / (theta + (1.0 + theta * theta).sqrt())
                    } else {
                        1.0 / (theta - (1.0 + theta * theta).sqrt())
                    };
                    let c = 1.0 / (1.0 + t * t).sqrt();
                    let s = t * c;
                    let cs = C64::new(c, 0.0);
                    let sp = phase * C64::new(s, 0.0);
                    // A <- R' A R with R = I except R[pp]=c, R[pq]=s*phase,
                    // R[qp]=-s*conj(phase), R[qq]=c
                    for k in 0..n {
                        let akp = a.get(k, p);
                        let akq = a.get(k, q);
                        a.set(k, p, akp * cs - akq * sp.conj());
                        a.set(k, q, akp * sp + akq * cs);
                    }
                    for k in 0..n {
                        let apk = a.get(p, k);
                        let aqk = a.get(q, k);
                        a.set(p, k, apk * cs - aqk * sp);
                        a.set(q, k, apk * sp.conj() + aqk * cs);
                    }
                    for k in 0..n {
                        let vkp = v.get(k, p);
                        let vkq = v.get(k, q);
                        v.set(k, p, vkp * cs - vkq * sp.conj());
                        v.set(k, q, vkp * sp + vkq * cs);
                    }
                }
            }
        }
        let mut order: Vec<usize> = (0..n).collect();
        let evals: Vec<f64> = (0..n).map(|i| a.get(i, i).re).collect();
        order.sort_by(|&i, &j| evals[i].partial_cmp(&evals[j]).unwrap());
        let sorted_vals: Vec<f64> = order.iter().map(|&i| evals[i]).collect();
        let mut sorted_vecs = CMat::zeros(n);
        for (col, &src) in order.iter().enumerate() {
            for row in 0..n {
                sorted_vecs.set(row, col, v.get(row, src));
            }
        }
        (sorted_vals, sorted_vecs)
    }

    /// Hermitian PSD square root via eigendecomposition. Eigenvalues in
    /// [-clamp_tol, 0) are clamped to zero; anything more negative panics in
    /// callers that validate first.
    pub fn hermitian_sqrt(&self, clamp_tol: f64) -> CMat {
        let (vals, vecs) = self.hermitian_eigen();
        let n = self.n;
        let mut out = CMat::zeros(n);
        for k in 0..n {
            let lam = if vals[k] < 0.0 && vals[k] >= -clamp_tol {
                0.0
            } else {
                vals[k]
            };
            let s = lam.max(0.0).sqrt();
            if s == 0.0 {
                continue;
            }
            for i in 0..n {
                let vik = vecs.get(i, k);
                for j in 0..n {
                    out.data[i * n + j] += vik * vecs.get(j, k).conj() * C64::new(s, 0.0);
                }
            }
        }
        out
    }
}

/// Kronecker product of a list of matrices, left factor most significant.
pub fn kron_all(mats: &[&CMat]) -> CMat {
    let mut out = CMat::identity(1);
    for m in mats {
        out = out.kron(m);
    }
    out
}
