//! Dense complex linear algebra on small matrices.
//!
//! Everything here operates on [`ComplexMatrix`], a heap-allocated row-major
//! square matrix of `Complex64`. States, projectors and unitaries up to
//! 81x81 are all carried by this one type; no sparse storage is attempted.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default tolerance for Hermiticity checks.
pub const HERM_TOL: f64 = 1e-9;
/// A matrix counts as positive semidefinite if its minimum eigenvalue is
/// at least this (slightly negative) bound.
pub const PSD_TOL: f64 = -1e-10;

#[derive(Debug, Error)]
pub enum NumError {
    #[error("matrix is not Hermitian: max |m - m^dag| deviation {deviation:e} exceeds tol {tol:e}")]
    NotHermitian { deviation: f64, tol: f64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("not a valid density matrix: {0}")]
    NotAState(String),
}

/// Dense square matrix of complex values, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    dim: usize,
    data: Vec<Complex64>,
}

/// Which subsystem a partial transpose acts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    A,
    B,
}

/// Real eigenvalues of a Hermitian matrix, ascending.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub values: Vec<f64>,
}

impl Spectrum {
    pub fn min(&self) -> f64 {
        self.values.first().copied().unwrap_or(f64::NAN)
    }

    pub fn max(&self) -> f64 {
        self.values.last().copied().unwrap_or(f64::NAN)
    }
}

/// Serde mirror of the matrix JSON schema shared by all tools:
/// `{"dim": n, "re": [...], "im": [...]}`, row-major.
#[derive(Serialize, Deserialize)]
struct MatrixJson {
    dim: usize,
    re: Vec<f64>,
    im: Vec<f64>,
}

impl Serialize for ComplexMatrix {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        MatrixJson {
            dim: self.dim,
            re: self.data.iter().map(|z| z.re).collect(),
            im: self.data.iter().map(|z| z.im).collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for ComplexMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = MatrixJson::deserialize(d)?;
        let n2 = raw.dim * raw.dim;
        if raw.re.len() != n2 || raw.im.len() != n2 {
            return Err(serde::de::Error::custom(format!(
                "matrix JSON needs {} entries per component, got re={} im={}",
                n2,
                raw.re.len(),
                raw.im.len()
            )));
        }
        let data = raw
            .re
            .iter()
            .zip(&raw.im)
            .map(|(&re, &im)| Complex64::new(re, im))
            .collect();
        Ok(ComplexMatrix { dim: raw.dim, data })
    }
}

impl ComplexMatrix {
    pub fn zeros(dim: usize) -> Self {
        assert!(dim >= 1, "dim must be >= 1");
        ComplexMatrix {
            dim,
            data: vec![Complex64::new(0.0, 0.0); dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = Complex64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    pub fn from_rows(rows: &[Vec<Complex64>]) -> Self {
        let dim = rows.len();
        assert!(rows.iter().all(|r| r.len() == dim), "rows must be square");
        ComplexMatrix {
            dim,
            data: rows.iter().flatten().copied().collect(),
        }
    }

    /// Rank-1 projector |v><v| from a (not necessarily normalized) vector.
    pub fn outer(v: &[Complex64]) -> Self {
        let dim = v.len();
        Self::from_fn(dim, |i, j| v[i] * v[j].conj())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn dagger(&self) -> Self {
        Self::from_fn(self.dim, |i, j| self[(j, i)].conj())
    }

    pub fn conj(&self) -> Self {
        Self::from_fn(self.dim, |i, j| self[(i, j)].conj())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.dim, |i, j| self[(j, i)])
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim).map(|i| self[(i, i)]).sum()
    }

    pub fn scale(&self, s: Complex64) -> Self {
        ComplexMatrix {
            dim: self.dim,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim);
        ComplexMatrix {
            dim: self.dim,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn add_scaled(&mut self, other: &Self, s: f64) {
        assert_eq!(self.dim, other.dim);
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b * s;
        }
    }

    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim, "matrix product needs equal dims");
        let n = self.dim;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self[(i, k)];
                if a.norm_sqr() == 0.0 {
                    continue;
                }
                for j in 0..n {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    /// Matrix-vector product.
    pub fn apply(&self, v: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(v.len(), self.dim);
        (0..self.dim)
            .map(|i| (0..self.dim).map(|j| self[(i, j)] * v[j]).sum())
            .collect()
    }

    /// <u| M |v>.
    pub fn sandwich(&self, u: &[Complex64], v: &[Complex64]) -> Complex64 {
        let mv = self.apply(v);
        u.iter().zip(&mv).map(|(a, b)| a.conj() * b).sum()
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.dim, other.dim);
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn hermiticity_deviation(&self) -> f64 {
        let mut dev: f64 = 0.0;
        for i in 0..self.dim {
            for j in i..self.dim {
                dev = dev.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        dev
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_deviation() <= tol
    }

    /// Checks Hermiticity, unit trace and positive semidefiniteness.
    pub fn check_state(&self, herm_tol: f64, psd_tol: f64) -> Result<(), NumError> {
        let dev = self.hermiticity_deviation();
        if dev > herm_tol {
            return Err(NumError::NotAState(format!(
                "Hermiticity deviation {dev:e}"
            )));
        }
        let tr = self.trace();
        if (tr.re - 1.0).abs() > 1e-8 || tr.im.abs() > 1e-8 {
            return Err(NumError::NotAState(format!("trace {tr} != 1")));
        }
        let spec = herm_eigvals(self, herm_tol)?;
        if spec.min() < psd_tol {
            return Err(NumError::NotAState(format!(
                "minimum eigenvalue {:e} below PSD tolerance",
                spec.min()
            )));
        }
        Ok(())
    }
}

impl std::ops::Index<(usize, usize)> for ComplexMatrix {
    type Output = Complex64;
    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.data[i * self.dim + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.data[i * self.dim + j]
    }
}

/// Kronecker product, standard entry layout: entry ((i1,i2),(j1,j2)) =
/// a(i1,j1) * b(i2,j2) with the second factor index running fastest.
pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    let (da, db) = (a.dim(), b.dim());
    let n = da * db;
    let mut out = ComplexMatrix::zeros(n);
    for i1 in 0..da {
        for j1 in 0..da {
            let f = a[(i1, j1)];
            for i2 in 0..db {
                for j2 in 0..db {
                    out[(i1 * db + i2, j1 * db + j2)] = f * b[(i2, j2)];
                }
            }
        }
    }
    out
}

/// Kronecker product of two vectors.
pub fn kron_vec(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    let mut out = Vec::with_capacity(a.len() * b.len());
    for &x in a {
        for &y in b {
            out.push(x * y);
        }
    }
    out
}

/// Transpose the chosen subsystem of a dA*dB-dimensional operator.
/// Applying it twice returns the input bit-exactly (pure index shuffle).
pub fn partial_transpose(
    m: &ComplexMatrix,
    d_a: usize,
    d_b: usize,
    side: Side,
) -> Result<ComplexMatrix, NumError> {
    if m.dim() != d_a * d_b {
        return Err(NumError::DimensionMismatch(format!(
            "matrix dim {} != dA*dB = {}",
            m.dim(),
            d_a * d_b
        )));
    }
    let mut out = ComplexMatrix::zeros(m.dim());
    for ia in 0..d_a {
        for ib in 0..d_b {
            for ja in 0..d_a {
                for jb in 0..d_b {
                    let (ri, ci) = match side {
                        Side::A => ((ja * d_b + ib), (ia * d_b + jb)),
                        Side::B => ((ia * d_b + jb), (ja * d_b + ib)),
                    };
                    out[(ri, ci)] = m[(ia * d_b + ib, ja * d_b + jb)];
                }
            }
        }
    }
    Ok(out)
}

/// Eigenvalues of a Hermitian matrix, ascending. Cyclic Jacobi with complex
/// rotations; matrices here are at most 81x81, so robustness wins over
/// asymptotics.
pub fn herm_eigvals(m: &ComplexMatrix, tol: f64) -> Result<Spectrum, NumError> {
    jacobi(m, tol, false).map(|(s, _)| s)
}

/// Full eigendecomposition; eigenvector k is column k of the returned matrix,
/// matching the ascending eigenvalue order.
pub fn herm_eig(m: &ComplexMatrix, tol: f64) -> Result<(Spectrum, ComplexMatrix), NumError> {
    let (s, v) = jacobi(m, tol, true)?;
    Ok((s, v.expect("vectors requested")))
}

fn jacobi(
    m: &ComplexMatrix,
    tol: f64,
    want_vectors: bool,
) -> Result<(Spectrum, Option<ComplexMatrix>), NumError> {
    let dev = m.hermiticity_deviation();
    if dev > tol {
        return Err(NumError::NotHermitian {
            deviation: dev,
            tol,
        });
    }
    let n = m.dim();
    // Symmetrize so round-off in the input cannot bias the rotations.
    let mut a = ComplexMatrix::from_fn(n, |i, j| (m[(i, j)] + m[(j, i)].conj()) * 0.5);
    let mut v = want_vectors.then(|| ComplexMatrix::identity(n));

    let frob: f64 = a.data().iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let stop = (frob * 1e-15).max(f64::MIN_POSITIVE);

    for _sweep in 0..60 {
        let off: f64 = {
            let mut s = 0.0;
            for i in 0..n {
                for j in (i + 1)..n {
                    s += a[(i, j)].norm_sqr();
                }
            }
            s.sqrt()
        };
        if off <= stop {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                let r = apq.norm();
                if r <= stop * 1e-2 / (n as f64) {
                    continue;
                }
                let phase = apq / r; // e^{i phi}
                let theta = (a[(q, q)].re - a[(p, p)].re) / (2.0 * r);
                // Small root of t^2 - 2*theta*t - 1 = 0, in the
                // cancellation-free form.
                let t = -theta.signum() / (theta.abs() + (1.0 + theta * theta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                let s_phase = phase * s; // s * e^{i phi}
                let s_phase_conj = s_phase.conj();

                // Column update: A <- A G with G_pp = G_qq = c,
                // G_qp = s e^{-i phi}, G_pq = -s e^{i phi}.
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = akp * c + akq * s_phase_conj;
                    a[(k, q)] = akq * c - akp * s_phase;
                }
                // Row update: A <- G^dag A.
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = apk * c + aqk * s_phase;
                    a[(q, k)] = aqk * c - apk * s_phase_conj;
                }
                a[(p, q)] = Complex64::new(0.0, 0.0);
                a[(q, p)] = Complex64::new(0.0, 0.0);
                a[(p, p)] = Complex64::new(a[(p, p)].re, 0.0);
                a[(q, q)] = Complex64::new(a[(q, q)].re, 0.0);
                if let Some(v) = v.as_mut() {
                    for k in 0..n {
                        let vkp = v[(k, p)];
                        let vkq = v[(k, q)];
                        v[(k, p)] = vkp * c + vkq * s_phase_conj;
                        v[(k, q)] = vkq * c - vkp * s_phase;
                    }
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].re.total_cmp(&a[(j, j)].re));
    let values: Vec<f64> = order.iter().map(|&i| a[(i, i)].re).collect();
    let vectors = v.map(|v| ComplexMatrix::from_fn(n, |i, j| v[(i, order[j])]));
    Ok((Spectrum { values }, vectors))
}

/// Uhlmann fidelity between two density matrices.
///
/// Convention: this is the *squared-overlap* ("probability") fidelity,
/// F = (Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2. For a pure rho = |psi><psi|
/// it reduces exactly to <psi|sigma|psi>.
pub fn fidelity(rho: &ComplexMatrix, sigma: &ComplexMatrix) -> Result<f64, NumError> {
    if rho.dim() != sigma.dim() {
        return Err(NumError::DimensionMismatch(format!(
            "fidelity dims {} vs {}",
            rho.dim(),
            sigma.dim()
        )));
    }
    rho.check_state(HERM_TOL, PSD_TOL)?;
    sigma.check_state(HERM_TOL, PSD_TOL)?;

    let (spec, vecs) = herm_eig(rho, HERM_TOL)?;
    let n = rho.dim();
    // sqrt(rho) = V sqrt(diag) V^dag, negative round-off clamped to zero.
    let mut sqrt_rho = ComplexMatrix::zeros(n);
    for k in 0..n {
        let lam = spec.values[k].max(0.0).sqrt();
        if lam == 0.0 {
            continue;
        }
        for i in 0..n {
            for j in 0..n {
                sqrt_rho[(i, j)] += vecs[(i, k)] * vecs[(j, k)].conj() * lam;
            }
        }
    }
    let inner = sqrt_rho.mul(sigma).mul(&sqrt_rho);
    let spec2 = herm_eigvals(&inner, 1e-7)?;
    let root_sum: f64 = spec2.values.iter().map(|&l| l.max(0.0).sqrt()).sum();
    Ok((root_sum * root_sum).clamp(0.0, 1.0))
}
