//! The group Sp(2n,ℝ) in the interleaved basis (x₁, y₁, x₂, y₂, …).

use nalgebra::DMatrix;
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{expm, inf_norm, is_finite, symmetrize};
use crate::tol::Tolerances;

/// The complex structure J with Je₂ᵢ₋₁ = e₂ᵢ and Je₂ᵢ = −e₂ᵢ₋₁.
#[derive(Debug, Clone, PartialEq)]
pub struct StandardForm {
    j: DMatrix<f64>,
}

impl StandardForm {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.j
    }

    pub fn dim(&self) -> usize {
        self.j.nrows()
    }

    /// ω(x, y) = yᵀJx.
    pub fn omega(&self, x: &[f64], y: &[f64]) -> f64 {
        let d = self.dim();
        (0..d).map(|i| y[i] * (0..d).map(|k| self.j[(i, k)] * x[k]).sum::<f64>()).sum()
    }
}

pub fn standard_j(n: usize) -> StandardForm {
    StandardForm { j: j_matrix(2 * n) }
}

pub(crate) fn j_matrix(dim: usize) -> DMatrix<f64> {
    let mut j = DMatrix::zeros(dim, dim);
    for i in (0..dim).step_by(2) {
        j[(i + 1, i)] = 1.0;
        j[(i, i + 1)] = -1.0;
    }
    j
}

fn check_even_square(m: &DMatrix<f64>) -> Result<()> {
    if m.nrows() != m.ncols() || m.nrows() == 0 || m.nrows() % 2 != 0 {
        return Err(Error::Dimension(format!(
            "expected a square matrix of even size, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(())
}

/// ‖AᵀJA − J‖∞ / max(1, ‖A‖∞²).
pub fn symplectic_residual(a: &DMatrix<f64>) -> f64 {
    let j = j_matrix(a.nrows());
    let r = a.transpose() * &j * a - &j;
    inf_norm(&r) / inf_norm(a).powi(2).max(1.0)
}

pub fn is_symplectic(a: &DMatrix<f64>, tol: f64) -> Result<bool> {
    check_even_square(a)?;
    if !is_finite(a) {
        return Ok(false);
    }
    let j = j_matrix(a.nrows());
    let r = a.transpose() * &j * a - &j;
    Ok(inf_norm(&r) <= tol * inf_norm(a).powi(2))
}

pub fn in_lie_algebra(x: &DMatrix<f64>, tol: f64) -> Result<bool> {
    check_even_square(x)?;
    let j = j_matrix(x.nrows());
    let r = x.transpose() * &j + &j * x;
    Ok(inf_norm(&r) <= tol)
}

/// A real matrix certified symplectic.
#[derive(Debug, Clone, PartialEq)]
pub struct SympMatrix {
    m: DMatrix<f64>,
}

impl SympMatrix {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        Self::with_tol(m, Tolerances::default().symp)
    }

    pub fn with_tol(m: DMatrix<f64>, tol: f64) -> Result<Self> {
        check_even_square(&m)?;
        if !is_finite(&m) {
            return Err(Error::NonFinite("matrix".into()));
        }
        let j = j_matrix(m.nrows());
        let norm = inf_norm(&m);
        let res = inf_norm(&(m.transpose() * &j * &m - &j));
        if res > tol * norm * norm {
            return Err(Error::NotSymplectic { residual: res / (norm * norm), tol });
        }
        // Cheap sanity check; the residual test above already implies it.
        let det = m.determinant();
        if (det - 1.0).abs() > tol.sqrt() * norm.powi(m.nrows() as i32).max(1.0) {
            return Err(Error::NotSymplectic { residual: (det - 1.0).abs(), tol });
        }
        Ok(SympMatrix { m })
    }

    pub fn from_row_slice(dim: usize, data: &[f64]) -> Result<Self> {
        if data.len() != dim * dim {
            return Err(Error::Dimension(format!("{} entries for a {dim}x{dim} matrix", data.len())));
        }
        Self::new(DMatrix::from_row_slice(dim, dim, data))
    }

    /// Wraps a matrix that is symplectic by construction (products,
    /// exponentials, inverses of certified inputs).
    pub(crate) fn trusted(m: DMatrix<f64>) -> Self {
        debug_assert!(m.nrows() % 2 == 0);
        SympMatrix { m }
    }

    pub fn identity(n: usize) -> Self {
        SympMatrix { m: DMatrix::identity(2 * n, 2 * n) }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn half_dim(&self) -> usize {
        self.m.nrows() / 2
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.m
    }

    pub fn residual(&self) -> f64 {
        symplectic_residual(&self.m)
    }

    pub fn norm(&self) -> f64 {
        inf_norm(&self.m)
    }

    pub fn mul(&self, other: &SympMatrix) -> SympMatrix {
        SympMatrix { m: &self.m * &other.m }
    }

    /// A⁻¹ = −JAᵀJ.
    pub fn inverse(&self) -> SympMatrix {
        let j = j_matrix(self.dim());
        SympMatrix { m: -(&j * self.m.transpose() * &j) }
    }

    pub fn distance(&self, other: &SympMatrix) -> f64 {
        inf_norm(&(&self.m - &other.m))
    }
}

/// A symmetric matrix P; the Hamiltonian vector field is x ↦ JPx.
#[derive(Debug, Clone, PartialEq)]
pub struct Generator {
    p: DMatrix<f64>,
}

impl Generator {
    /// Accepts matrices symmetric to rounding and stores the exact
    /// symmetric part.
    pub fn new(p: DMatrix<f64>) -> Result<Self> {
        check_even_square(&p)?;
        if !is_finite(&p) {
            return Err(Error::NonFinite("generator".into()));
        }
        let asym = inf_norm(&(&p - p.transpose()));
        if asym > 1e-10 * (1.0 + inf_norm(&p)) {
            return Err(Error::Invalid(format!("generator is not symmetric (asymmetry {asym:.3e})")));
        }
        Ok(Generator { p: symmetrize(&p) })
    }

    pub(crate) fn from_symmetric_part(p: &DMatrix<f64>) -> Self {
        Generator { p: symmetrize(p) }
    }

    pub fn from_row_slice(dim: usize, data: &[f64]) -> Result<Self> {
        if data.len() != dim * dim {
            return Err(Error::Dimension(format!("{} entries for a {dim}x{dim} generator", data.len())));
        }
        Self::new(DMatrix::from_row_slice(dim, dim, data))
    }

    pub fn identity(n: usize) -> Self {
        Generator { p: DMatrix::identity(2 * n, 2 * n) }
    }

    pub fn scaled_identity(n: usize, c: f64) -> Self {
        Generator { p: DMatrix::identity(2 * n, 2 * n) * c }
    }

    pub fn dim(&self) -> usize {
        self.p.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.p
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.p.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn is_positive_definite(&self) -> bool {
        self.min_eigenvalue() > 0.0
    }

    pub fn scale(&self, c: f64) -> Generator {
        Generator { p: &self.p * c }
    }

    /// XᵀPX.
    pub fn congruence(&self, x: &DMatrix<f64>) -> Generator {
        Generator::from_symmetric_part(&(x.transpose() * &self.p * x))
    }

    /// The Hamiltonian matrix JP.
    pub fn hamiltonian(&self) -> DMatrix<f64> {
        j_matrix(self.dim()) * &self.p
    }
}

pub fn symp_exp(p: &Generator, t: f64) -> Result<SympMatrix> {
    if !t.is_finite() {
        return Err(Error::NonFinite("time".into()));
    }
    let e = expm(&(p.hamiltonian() * t));
    if !is_finite(&e) {
        return Err(Error::NonFinite("exponential".into()));
    }
    Ok(SympMatrix::trusted(e))
}

/// X⁻¹AX.
pub fn conjugate(a: &SympMatrix, x: &SympMatrix) -> Result<SympMatrix> {
    if a.dim() != x.dim() {
        return Err(Error::Dimension(format!("{} vs {}", a.dim(), x.dim())));
    }
    let xi = x
        .matrix()
        .clone()
        .lu()
        .try_inverse()
        .ok_or_else(|| Error::Singular("conjugator".into()))?;
    let m = &xi * a.matrix() * x.matrix();
    let tol = Tolerances::default().symp;
    let cond = x.norm() * inf_norm(&xi);
    SympMatrix::with_tol(m, tol.max(1e-15 * cond * cond))
}

/// ρ(θ) = [[cos θ, −sin θ], [sin θ, cos θ]].
pub fn rotation(theta: f64) -> SympMatrix {
    let (s, c) = theta.sin_cos();
    SympMatrix::trusted(DMatrix::from_row_slice(2, 2, &[c, -s, s, c]))
}

/// Product of 2–4 exponentials of random symmetric generators with
/// entries uniform in [−spread, spread].
pub fn random_symplectic<R: Rng + ?Sized>(rng: &mut R, n: usize, spread: f64) -> SympMatrix {
    let d = 2 * n;
    let factors = rng.random_range(2..=4);
    let mut acc = DMatrix::<f64>::identity(d, d);
    for _ in 0..factors {
        let mut p = DMatrix::zeros(d, d);
        for i in 0..d {
            for k in i..d {
                let v = rng.random_range(-1.0..=1.0) * spread;
                p[(i, k)] = v;
                p[(k, i)] = v;
            }
        }
        let t = rng.random_range(0.5..=1.0);
        let g = Generator::from_symmetric_part(&p);
        acc = expm(&(g.hamiltonian() * t)) * acc;
    }
    SympMatrix::trusted(acc)
}

pub fn random_generator<R: Rng + ?Sized>(rng: &mut R, n: usize, spread: f64) -> Generator {
    let d = 2 * n;
    let mut p = DMatrix::zeros(d, d);
    for i in 0..d {
        for k in i..d {
            let v = rng.random_range(-1.0..=1.0) * spread;
            p[(i, k)] = v;
            p[(k, i)] = v;
        }
    }
    Generator::from_symmetric_part(&p)
}

/// Random positive definite generator with spectrum roughly in
/// [lo, lo + spread·d].
pub fn random_positive_generator<R: Rng + ?Sized>(rng: &mut R, n: usize, lo: f64, spread: f64) -> Generator {
    let d = 2 * n;
    let mut b = DMatrix::zeros(d, d);
    for v in b.iter_mut() {
        *v = rng.random_range(-1.0..=1.0) * spread;
    }
    let p = b.transpose() * &b + DMatrix::identity(d, d) * lo;
    Generator::from_symmetric_part(&p)
}
