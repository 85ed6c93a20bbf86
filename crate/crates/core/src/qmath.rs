//! Small-dimension complex linear algebra for one- and two-qubit states.
//!
//! Joint states live in the fixed product basis
//! `(|-1>|s+>, |-1>|s->, |+1>|s+>, |+1>|s->)`, i.e. index `2 * atom + photon`
//! with atom basis `(|m_F=-1>, |m_F=+1>)` and photon basis `(|sigma+>, |sigma->)`.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Tolerance on `|M - M^dagger|` for inputs that must be Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-10;
/// Tolerance on unit norm / unit trace.
pub const NORM_TOL: f64 = 1e-9;
/// Most negative eigenvalue still accepted as positive semidefinite.
pub const PSD_TOL: f64 = 1e-10;

pub const BASIS_LABEL: &str =
    "atom(m_F=-1, m_F=+1) x photon(sigma+, sigma-); index = 2*atom + photon";

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Subsystem {
    Atom,
    Photon,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    pub fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Axis::X => "sigma_x",
            Axis::Y => "sigma_y",
            Axis::Z => "sigma_z",
        };
        f.write_str(s)
    }
}

fn check_dim(dim: usize) -> Result<()> {
    if dim == 2 || dim == 4 {
        Ok(())
    } else {
        Err(Error::Dimension {
            expected: 4,
            got: dim,
        })
    }
}

/// Dense square complex matrix of dimension 2 or 4, stored row-major.
#[derive(Clone, Copy, PartialEq)]
pub struct ComplexMatrix {
    dim: usize,
    data: [C64; 16],
}

impl ComplexMatrix {
    pub fn zeros(dim: usize) -> Result<Self> {
        check_dim(dim)?;
        Ok(Self {
            dim,
            data: [ZERO; 16],
        })
    }

    pub fn identity(dim: usize) -> Result<Self> {
        let mut m = Self::zeros(dim)?;
        for i in 0..dim {
            m[(i, i)] = ONE;
        }
        Ok(m)
    }

    /// Builds a matrix from `dim * dim` row-major entries.
    pub fn from_rows(dim: usize, entries: &[C64]) -> Result<Self> {
        check_dim(dim)?;
        if entries.len() != dim * dim {
            return Err(Error::Dimension {
                expected: dim * dim,
                got: entries.len(),
            });
        }
        let mut m = Self::zeros(dim)?;
        m.data[..dim * dim].copy_from_slice(entries);
        Ok(m)
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Result<Self> {
        let mut m = Self::zeros(diag.len())?;
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = C64::new(d, 0.0);
        }
        Ok(m)
    }

    /// Real and imaginary parts as nested row vectors.
    pub fn from_parts(re: &[Vec<f64>], im: &[Vec<f64>]) -> Result<Self> {
        let dim = re.len();
        check_dim(dim)?;
        if im.len() != dim || re.iter().chain(im).any(|row| row.len() != dim) {
            return Err(Error::Invalid(format!(
                "real/imaginary parts must both be {dim}x{dim}"
            )));
        }
        let mut m = Self::zeros(dim)?;
        for i in 0..dim {
            for j in 0..dim {
                m[(i, j)] = C64::new(re[i][j], im[i][j]);
            }
        }
        Ok(m)
    }

    pub fn to_parts(&self) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let rows = |f: fn(&C64) -> f64| {
            (0..self.dim)
                .map(|i| (0..self.dim).map(|j| f(&self[(i, j)])).collect())
                .collect()
        };
        (rows(|z| z.re), rows(|z| z.im))
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[C64] {
        &self.data[..self.dim * self.dim]
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim).map(|i| self[(i, i)]).sum()
    }

    pub fn dagger(&self) -> Self {
        let mut out = *self;
        for i in 0..self.dim {
            for j in 0..self.dim {
                out[(i, j)] = self[(j, i)].conj();
            }
        }
        out
    }

    pub fn transpose(&self) -> Self {
        let mut out = *self;
        for i in 0..self.dim {
            for j in 0..self.dim {
                out[(i, j)] = self[(j, i)];
            }
        }
        out
    }

    pub fn scale(&self, s: C64) -> Self {
        let mut out = *self;
        out.data.iter_mut().for_each(|z| *z *= s);
        out
    }

    pub fn scale_re(&self, s: f64) -> Self {
        self.scale(C64::new(s, 0.0))
    }

    /// Largest entrywise modulus of `self - other`; infinite on dimension mismatch.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        if self.dim != other.dim {
            return f64::INFINITY;
        }
        self.entries()
            .iter()
            .zip(other.entries())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.entries()
            .iter()
            .map(|z| z.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    pub fn hermitian_deviation(&self) -> f64 {
        self.max_abs_diff(&self.dagger())
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermitian_deviation() <= tol
    }

    /// `(M + M^dagger) / 2`.
    pub fn hermitian_part(&self) -> Self {
        (*self + self.dagger()).scale_re(0.5)
    }

    /// `Re tr(self * other)` without forming the product.
    pub fn trace_product_re(&self, other: &Self) -> f64 {
        debug_assert_eq!(self.dim, other.dim);
        let n = self.dim;
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                let a = self.data[i * n + j];
                let b = other.data[j * n + i];
                acc += a.re * b.re - a.im * b.im;
            }
        }
        acc
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        assert!(i < self.dim && j < self.dim, "index out of bounds");
        &self.data[i * self.dim + j]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        assert!(i < self.dim && j < self.dim, "index out of bounds");
        &mut self.data[i * self.dim + j]
    }
}

// Arithmetic panics on mismatched dimensions; callers validate dimensions first.
impl Add for ComplexMatrix {
    type Output = Self;
    fn add(mut self, rhs: Self) -> Self {
        assert_eq!(self.dim, rhs.dim, "dimension mismatch in add");
        self.data
            .iter_mut()
            .zip(rhs.data)
            .for_each(|(a, b)| *a += b);
        self
    }
}

impl Sub for ComplexMatrix {
    type Output = Self;
    fn sub(mut self, rhs: Self) -> Self {
        assert_eq!(self.dim, rhs.dim, "dimension mismatch in sub");
        self.data
            .iter_mut()
            .zip(rhs.data)
            .for_each(|(a, b)| *a -= b);
        self
    }
}

impl Mul for ComplexMatrix {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        assert_eq!(self.dim, rhs.dim, "dimension mismatch in mul");
        let n = self.dim;
        let mut out = ComplexMatrix {
            dim: n,
            data: [ZERO; 16],
        };
        for i in 0..n {
            for k in 0..n {
                let a = self.data[i * n + k];
                if a == ZERO {
                    continue;
                }
                for j in 0..n {
                    out.data[i * n + j] += a * rhs.data[k * n + j];
                }
            }
        }
        out
    }
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix({}x{}) [", self.dim, self.dim)?;
        for i in 0..self.dim {
            write!(f, "  ")?;
            for j in 0..self.dim {
                let z = self[(i, j)];
                write!(f, "{:+.6}{:+.6}i  ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

/// Pure state vector of dimension 2 or 4.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ket {
    dim: usize,
    amps: [C64; 4],
}

impl Ket {
    pub fn new(amps: &[C64]) -> Result<Self> {
        check_dim(amps.len())?;
        let mut a = [ZERO; 4];
        a[..amps.len()].copy_from_slice(amps);
        Ok(Self {
            dim: amps.len(),
            amps: a,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps[..self.dim]
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes()
            .iter()
            .map(|z| z.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    pub fn is_normalized(&self) -> bool {
        (self.norm() - 1.0).abs() <= NORM_TOL
    }

    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm();
        if n == 0.0 || !n.is_finite() {
            return Err(Error::NotNormalized(n));
        }
        let mut out = *self;
        out.amps.iter_mut().for_each(|z| *z /= n);
        Ok(out)
    }

    /// `|psi><psi|`.
    pub fn projector(&self) -> ComplexMatrix {
        let mut m = ComplexMatrix {
            dim: self.dim,
            data: [ZERO; 16],
        };
        for i in 0..self.dim {
            for j in 0..self.dim {
                m[(i, j)] = self.amps[i] * self.amps[j].conj();
            }
        }
        m
    }

    pub fn tensor(&self, other: &Ket) -> Result<Ket> {
        if self.dim != 2 || other.dim != 2 {
            return Err(Error::Dimension {
                expected: 2,
                got: if self.dim != 2 { self.dim } else { other.dim },
            });
        }
        let mut amps = [ZERO; 4];
        for a in 0..2 {
            for b in 0..2 {
                amps[2 * a + b] = self.amps[a] * other.amps[b];
            }
        }
        Ok(Ket { dim: 4, amps })
    }
}

pub fn pauli(axis: Axis) -> ComplexMatrix {
    let i = C64::i();
    let entries = match axis {
        Axis::X => [ZERO, ONE, ONE, ZERO],
        Axis::Y => [ZERO, -i, i, ZERO],
        Axis::Z => [ONE, ZERO, ZERO, -ONE],
    };
    ComplexMatrix::from_rows(2, &entries).expect("2x2")
}

pub fn identity2() -> ComplexMatrix {
    ComplexMatrix::identity(2).expect("2x2")
}

pub fn identity4() -> ComplexMatrix {
    ComplexMatrix::identity(4).expect("4x4")
}

/// Kronecker product `a (x) b` of two single-qubit operators; `a` acts on the atom.
pub fn tensor_product(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    for m in [a, b] {
        if m.dim != 2 {
            return Err(Error::Dimension {
                expected: 2,
                got: m.dim,
            });
        }
    }
    let mut out = ComplexMatrix::zeros(4)?;
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                for l in 0..2 {
                    out[(2 * i + k, 2 * j + l)] = a[(i, j)] * b[(k, l)];
                }
            }
        }
    }
    Ok(out)
}

fn require_dim4(m: &ComplexMatrix) -> Result<()> {
    if m.dim != 4 {
        return Err(Error::Dimension {
            expected: 4,
            got: m.dim,
        });
    }
    Ok(())
}

/// Reduced operator of the `keep` subsystem.
pub fn partial_trace(rho: &ComplexMatrix, keep: Subsystem) -> Result<ComplexMatrix> {
    require_dim4(rho)?;
    let mut out = ComplexMatrix::zeros(2)?;
    for i in 0..2 {
        for j in 0..2 {
            out[(i, j)] = (0..2)
                .map(|k| match keep {
                    Subsystem::Atom => rho[(2 * i + k, 2 * j + k)],
                    Subsystem::Photon => rho[(2 * k + i, 2 * k + j)],
                })
                .sum();
        }
    }
    Ok(out)
}

/// Transpose on the indices of `subsystem` only.
pub fn partial_transpose(rho: &ComplexMatrix, subsystem: Subsystem) -> Result<ComplexMatrix> {
    require_dim4(rho)?;
    let mut out = ComplexMatrix::zeros(4)?;
    for a in 0..2 {
        for b in 0..2 {
            for c in 0..2 {
                for d in 0..2 {
                    // rho[(a b), (c d)] with a, c atom and b, d photon indices
                    let (r, s) = match subsystem {
                        Subsystem::Atom => ((2 * c + b), (2 * a + d)),
                        Subsystem::Photon => ((2 * a + d), (2 * c + b)),
                    };
                    out[(2 * a + b, 2 * c + d)] = rho[(r, s)];
                }
            }
        }
    }
    Ok(out)
}

/// Spectral decomposition of a Hermitian matrix.
#[derive(Clone, Debug)]
pub struct HermitianEigen {
    /// Ascending.
    pub values: Vec<f64>,
    /// Column `k` is the eigenvector of `values[k]`.
    pub vectors: ComplexMatrix,
}

impl HermitianEigen {
    /// `V diag(lambda) V^dagger` for replacement eigenvalues `lambda`.
    pub fn reconstruct(&self, values: &[f64]) -> ComplexMatrix {
        let n = self.vectors.dim();
        let mut out = ComplexMatrix {
            dim: n,
            data: [ZERO; 16],
        };
        for (k, &lam) in values.iter().enumerate().take(n) {
            if lam == 0.0 {
                continue;
            }
            for i in 0..n {
                for j in 0..n {
                    out[(i, j)] += self.vectors[(i, k)] * self.vectors[(j, k)].conj() * lam;
                }
            }
        }
        out
    }
}

pub fn hermitian_eigen(m: &ComplexMatrix) -> Result<HermitianEigen> {
    let dev = m.hermitian_deviation();
    if dev > HERMITIAN_TOL {
        return Err(Error::NotHermitian(dev));
    }
    let n = m.dim;
    let herm = m.hermitian_part();
    let mut a = herm.entries().to_vec();
    let (values, vecs) = jacobi_hermitian(&mut a, n);
    let vectors = ComplexMatrix::from_rows(n, &vecs)?;
    Ok(HermitianEigen { values, vectors })
}

/// Eigenvalues in ascending order.
pub fn hermitian_eigenvalues(m: &ComplexMatrix) -> Result<Vec<f64>> {
    Ok(hermitian_eigen(m)?.values)
}

/// Cyclic complex Jacobi on an `n x n` Hermitian matrix given row-major.
///
/// Returns ascending eigenvalues and the row-major eigenvector matrix
/// (eigenvectors in columns). `a` is overwritten.
pub(crate) fn jacobi_hermitian(a: &mut [C64], n: usize) -> (Vec<f64>, Vec<C64>) {
    assert_eq!(a.len(), n * n);
    let mut v = vec![ZERO; n * n];
    for i in 0..n {
        v[i * n + i] = ONE;
    }
    let total: f64 = a.iter().map(|z| z.norm_sqr()).sum();

    for _sweep in 0..64 {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += a[p * n + q].norm_sqr();
            }
        }
        if off <= f64::EPSILON * f64::EPSILON * total || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                let r = apq.norm();
                if r == 0.0 {
                    continue;
                }
                let phase = apq / r;
                let app = a[p * n + p].re;
                let aqq = a[q * n + q].re;
                let theta = (aqq - app) / (2.0 * r);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                // U = diag(1, e^{-i alpha}) * [[c, s], [-s, c]] on the (p, q) plane
                let u_pp = C64::new(c, 0.0);
                let u_pq = C64::new(s, 0.0);
                let u_qp = -phase.conj() * s;
                let u_qq = phase.conj() * c;

                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = akp * u_pp + akq * u_qp;
                    a[k * n + q] = akp * u_pq + akq * u_qq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = u_pp.conj() * apk + u_qp.conj() * aqk;
                    a[q * n + k] = u_pq.conj() * apk + u_qq.conj() * aqk;
                }
                a[p * n + q] = ZERO;
                a[q * n + p] = ZERO;
                a[p * n + p] = C64::new(a[p * n + p].re, 0.0);
                a[q * n + q] = C64::new(a[q * n + q].re, 0.0);

                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = vkp * u_pp + vkq * u_qp;
                    v[k * n + q] = vkp * u_pq + vkq * u_qq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[i * n + i].re.total_cmp(&a[j * n + j].re));
    let values = order.iter().map(|&k| a[k * n + k].re).collect();
    let mut vectors = vec![ZERO; n * n];
    for (new_col, &k) in order.iter().enumerate() {
        for i in 0..n {
            vectors[i * n + new_col] = v[i * n + k];
        }
    }
    (values, vectors)
}

/// `<psi| rho |psi>`, real part.
pub fn overlap(psi: &Ket, rho: &ComplexMatrix) -> Result<f64> {
    if psi.dim != rho.dim {
        return Err(Error::Dimension {
            expected: rho.dim,
            got: psi.dim,
        });
    }
    if !psi.is_normalized() {
        return Err(Error::NotNormalized(psi.norm()));
    }
    let n = psi.dim;
    let mut acc = ZERO;
    for i in 0..n {
        for j in 0..n {
            acc += psi.amps[i].conj() * rho[(i, j)] * psi.amps[j];
        }
    }
    Ok(acc.re)
}

/// Validated density operator: Hermitian, unit trace, positive semidefinite.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DensityMatrix(ComplexMatrix);

impl DensityMatrix {
    pub fn new(m: ComplexMatrix) -> Result<Self> {
        let dev = m.hermitian_deviation();
        if dev > HERMITIAN_TOL {
            return Err(Error::NotHermitian(dev));
        }
        let tr = m.trace();
        if (tr.re - 1.0).abs() > NORM_TOL || tr.im.abs() > NORM_TOL {
            return Err(Error::Unphysical(format!("trace = {:.12}", tr.re)));
        }
        let min = hermitian_eigenvalues(&m)?[0];
        if min < -PSD_TOL {
            return Err(Error::Unphysical(format!("negative eigenvalue {min:e}")));
        }
        Ok(Self(m.hermitian_part()))
    }

    pub fn pure(psi: &Ket) -> Result<Self> {
        Self::new(psi.normalized()?.projector())
    }

    pub fn maximally_mixed(dim: usize) -> Result<Self> {
        Ok(Self(
            ComplexMatrix::identity(dim)?.scale_re(1.0 / dim as f64),
        ))
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.dim
    }

    /// Reduced state of one qubit.
    pub fn marginal(&self, keep: Subsystem) -> Result<DensityMatrix> {
        Ok(Self(partial_trace(&self.0, keep)?))
    }
}

impl std::ops::Deref for DensityMatrix {
    type Target = ComplexMatrix;
    fn deref(&self) -> &ComplexMatrix {
        &self.0
    }
}
