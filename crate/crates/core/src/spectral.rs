//! Krein-form spectral analysis.
//!
//! For 2n ≤ 4 eigenvalues come from the palindromic reduction t = λ + 1/λ,
//! which needs no iteration; larger matrices go through nalgebra's real
//! Schur decomposition.

use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{cnull_basis, csingular_values, hermitian_eigenvalues, to_complex, CMat, CVec};
use crate::symplectic::{j_matrix, Generator, SympMatrix};
use crate::tol::Tolerances;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EigenKind {
    CirclePair,
    RealPair,
    Quadruplet,
    PlusOne,
    MinusOne,
}

impl EigenKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EigenKind::CirclePair => "CirclePair",
            EigenKind::RealPair => "RealPair",
            EigenKind::Quadruplet => "Quadruplet",
            EigenKind::PlusOne => "PlusOne",
            EigenKind::MinusOne => "MinusOne",
        }
    }

    /// Number of eigenvalues in the orbit generated by one label.
    pub fn orbit_size(self) -> usize {
        match self {
            EigenKind::CirclePair | EigenKind::RealPair => 2,
            EigenKind::Quadruplet => 4,
            EigenKind::PlusOne | EigenKind::MinusOne => 1,
        }
    }

    pub fn on_circle(self) -> bool {
        matches!(self, EigenKind::CirclePair | EigenKind::PlusOne | EigenKind::MinusOne)
    }
}

impl fmt::Display for EigenKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One orbit {λ, λ̄, 1/λ, 1/λ̄} of the spectrum, labelled by the member with
/// |λ| ≥ 1 and Im λ ≥ 0.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenGroup {
    pub label: Complex64,
    pub kind: EigenKind,
    /// Algebraic multiplicity of the label itself.
    pub multiplicity: usize,
    pub diagonalizable: bool,
    /// Krein signature on the generalized eigenspace of the label; only for
    /// eigenvalues on the circle.
    pub splitting: Option<i32>,
}

impl EigenGroup {
    /// All members of the orbit, each repeated `multiplicity` times.
    pub fn eigenvalues(&self) -> Vec<Complex64> {
        let l = self.label;
        let orbit: Vec<Complex64> = match self.kind {
            EigenKind::CirclePair => vec![l, l.conj()],
            EigenKind::RealPair => vec![l, 1.0 / l],
            EigenKind::Quadruplet => vec![l, l.conj(), 1.0 / l, 1.0 / l.conj()],
            EigenKind::PlusOne | EigenKind::MinusOne => vec![l],
        };
        orbit.iter().flat_map(|&z| std::iter::repeat_n(z, self.multiplicity)).collect()
    }

    fn orbit_distance(&self, z: Complex64) -> f64 {
        let l = self.label;
        [l, l.conj(), 1.0 / l, 1.0 / l.conj()].iter().map(|o| (o - z).norm()).fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenStructure {
    pub groups: Vec<EigenGroup>,
    /// Largest relative backward error min σ(A − λ)/‖A‖ over the labels,
    /// plus any Krein-form degeneracy that had to be ignored.
    pub residual: f64,
}

impl EigenStructure {
    pub fn eigenvalues(&self) -> Vec<Complex64> {
        self.groups.iter().flat_map(|g| g.eigenvalues()).collect()
    }

    pub fn find(&self, z: Complex64, tol: f64) -> Option<&EigenGroup> {
        self.groups
            .iter()
            .map(|g| (g.orbit_distance(z), g))
            .filter(|(d, _)| *d <= tol * z.norm().max(1.0))
            .min_by(|a, b| a.0.total_cmp(&b.0))
            .map(|(_, g)| g)
    }

    pub fn all_on_circle(&self) -> bool {
        self.groups.iter().all(|g| g.kind.on_circle())
    }

    pub fn count(&self, kind: EigenKind) -> usize {
        self.groups.iter().filter(|g| g.kind == kind).map(|g| g.multiplicity).sum()
    }
}

/// β(v, w) = −i·w̄ᵀJv.
pub fn krein_form(v: &CVec, w: &CVec) -> Result<Complex64> {
    if v.len() != w.len() || v.len() % 2 != 0 {
        return Err(Error::Dimension(format!("vectors of length {} and {}", v.len(), w.len())));
    }
    let j = to_complex(&j_matrix(v.len()));
    Ok(Complex64::new(0.0, -1.0) * w.dotc(&(j * v)))
}

/// H with H_ij = β(b_j, b_i); Hermitian.
pub(crate) fn krein_gram(basis: &CMat) -> CMat {
    let j = to_complex(&j_matrix(basis.nrows()));
    (basis.adjoint() * j * basis).map(|z| z * Complex64::new(0.0, -1.0))
}

/// Signature of β on span(basis); eigenvalues inside the band are
/// reported separately.
pub(crate) fn krein_signature(basis: &CMat, band: f64) -> (i32, f64) {
    let e = hermitian_eigenvalues(&krein_gram(basis));
    let mut sig = 0;
    let mut smallest = f64::INFINITY;
    for x in e {
        smallest = smallest.min(x.abs());
        if x > band {
            sig += 1;
        } else if x < -band {
            sig -= 1;
        }
    }
    (sig, smallest)
}

fn scale_of(a: &DMatrix<f64>) -> f64 {
    a.norm().max(1.0)
}

pub(crate) fn shifted(a: &DMatrix<f64>, z: Complex64) -> CMat {
    let mut m = to_complex(a);
    for i in 0..m.nrows() {
        m[(i, i)] -= z;
    }
    m
}

/// Orthonormal basis of the kernel of (A − z)^m.
pub(crate) fn generalized_eigenspace(a: &DMatrix<f64>, z: Complex64, m: usize) -> (Vec<f64>, CMat) {
    let s = shifted(a, z);
    let mut p = s.clone();
    for _ in 1..m {
        p = &p * &s;
    }
    cnull_basis(&p, m)
}

struct RawGroup {
    label: Complex64,
    kind: EigenKind,
    mult: usize,
}

fn push_pair(out: &mut Vec<RawGroup>, t: f64, mult: usize, tol: &Tolerances) {
    let delta = t * t - 4.0;
    if delta.abs() <= tol.disc_band * (1.0 + t * t) {
        let one = t.signum();
        let kind = if one > 0.0 { EigenKind::PlusOne } else { EigenKind::MinusOne };
        out.push(RawGroup { label: Complex64::new(one, 0.0), kind, mult: 2 * mult });
    } else if delta < 0.0 {
        let re = t / 2.0;
        let im = (1.0 - re * re).max(0.0).sqrt();
        out.push(RawGroup { label: Complex64::new(re, im), kind: EigenKind::CirclePair, mult });
    } else {
        let lam = t / 2.0 + t.signum() * (t * t / 4.0 - 1.0).sqrt();
        out.push(RawGroup { label: Complex64::new(lam, 0.0), kind: EigenKind::RealPair, mult });
    }
}

fn palindromic_groups(a: &DMatrix<f64>, tol: &Tolerances) -> Vec<RawGroup> {
    let mut out = Vec::new();
    if a.nrows() == 2 {
        push_pair(&mut out, a.trace(), 1, tol);
        return out;
    }
    let s1 = a.trace();
    let s2 = (s1 * s1 - (a * a).trace()) / 2.0;
    let disc = s2 - s1 * s1 / 4.0 - 2.0;
    if disc.abs() <= tol.disc_band * (1.0 + s1 * s1) {
        push_pair(&mut out, s1 / 2.0, 2, tol);
    } else if disc < 0.0 {
        let r = (-disc).sqrt();
        let (t1, t2) = (s1 / 2.0 + r, s1 / 2.0 - r);
        for t in [t1, t2] {
            push_pair(&mut out, t, 1, tol);
        }
        merge_equal(&mut out);
    } else {
        let t = Complex64::new(s1 / 2.0, disc.sqrt());
        let root = (t * t - 4.0).sqrt();
        let (l1, l2) = ((t + root) / 2.0, (t - root) / 2.0);
        let mut l = if l1.norm() >= l2.norm() { l1 } else { l2 };
        if l.im < 0.0 {
            l = l.conj();
        }
        if (l.norm() - 1.0).abs() <= tol.circle {
            // Cannot happen outside the disc band; kept for safety.
            l /= l.norm();
            out.push(RawGroup { label: l, kind: EigenKind::CirclePair, mult: 2 });
        } else {
            out.push(RawGroup { label: l, kind: EigenKind::Quadruplet, mult: 1 });
        }
    }
    out
}

/// Two distinct t-roots can both land on the same ±1 group.
fn merge_equal(out: &mut Vec<RawGroup>) {
    if out.len() == 2 && out[0].kind == out[1].kind && matches!(out[0].kind, EigenKind::PlusOne | EigenKind::MinusOne) {
        let m = out[0].mult + out[1].mult;
        out.truncate(1);
        out[0].mult = m;
    }
}

fn general_groups(a: &DMatrix<f64>, tol: &Tolerances) -> Result<Vec<RawGroup>> {
    let dim = a.nrows();
    let schur = nalgebra::Schur::try_new(a.clone(), f64::EPSILON, 10_000)
        .ok_or_else(|| Error::numerical("Schur iteration did not converge", f64::NAN))?;
    let eig = schur.complex_eigenvalues();
    let cluster = 1e-6;
    let mut reps: Vec<Complex64> = eig
        .iter()
        .map(|&z| {
            let mut r = if z.norm() < 1.0 { 1.0 / z } else { z };
            if r.im < 0.0 {
                r = r.conj();
            }
            r
        })
        .collect();
    reps.sort_by(|x, y| x.re.total_cmp(&y.re).then(x.im.total_cmp(&y.im)));
    let mut clusters: Vec<(Complex64, usize)> = Vec::new();
    for r in reps {
        if let Some(cl) = clusters.iter_mut().find(|(c, k)| (*c / *k as f64 - r).norm() <= cluster * r.norm()) {
            cl.0 += r;
            cl.1 += 1;
        } else {
            clusters.push((r, 1));
        }
    }
    let mut out = Vec::new();
    let mut total = 0;
    for (sum, k) in clusters {
        let z = sum / k as f64;
        total += k;
        if (z - 1.0).norm() <= cluster.sqrt() * 1e-1 || (z + 1.0).norm() <= cluster.sqrt() * 1e-1 {
            let one = z.re.signum();
            let kind = if one > 0.0 { EigenKind::PlusOne } else { EigenKind::MinusOne };
            out.push(RawGroup { label: Complex64::new(one, 0.0), kind, mult: k });
            continue;
        }
        let on_circle = (z.norm() - 1.0).abs() <= cluster.max(tol.circle);
        let real = z.im.abs() <= cluster.max(tol.circle) * z.norm();
        let (kind, label, orbit) = if on_circle {
            (EigenKind::CirclePair, z / z.norm(), 2)
        } else if real {
            (EigenKind::RealPair, Complex64::new(z.re, 0.0), 2)
        } else {
            (EigenKind::Quadruplet, z, 4)
        };
        if k % orbit != 0 {
            return Err(Error::numerical(
                format!("eigenvalue cluster at {z} has {k} members, not a multiple of {orbit}"),
                f64::NAN,
            ));
        }
        out.push(RawGroup { label, kind, mult: k / orbit });
    }
    if total != dim {
        return Err(Error::numerical("eigenvalue count mismatch", total as f64));
    }
    Ok(out)
}

pub fn eigen_structure(a: &SympMatrix, tol_circle: f64) -> Result<EigenStructure> {
    eigen_structure_with(a, &Tolerances::with_circle(tol_circle))
}

/// Grouped spectrum with multiplicities, splitting numbers and
/// diagonalizability flags.
///
/// A Krein Gram eigenvalue inside the degeneracy band does not abort the
/// computation here (it is counted as zero and added to `residual`);
/// [`splitting_number`] reports it as an error instead.
pub fn eigen_structure_with(a: &SympMatrix, tol: &Tolerances) -> Result<EigenStructure> {
    let m = a.matrix();
    let raw = if a.dim() <= 4 { palindromic_groups(m, tol) } else { general_groups(m, tol)? };
    let scale = scale_of(m);
    let mut residual: f64 = 0.0;
    let mut groups = Vec::with_capacity(raw.len());
    for g in raw {
        let sv = csingular_values(&shifted(m, g.label));
        residual = residual.max(sv[0] / scale);
        let mut splitting = None;
        let mut diag = if g.mult == 1 {
            true
        } else {
            sv.iter().filter(|&&s| s <= tol.rank * scale).count() >= g.mult
        };
        match g.kind {
            EigenKind::CirclePair => {
                let (_, basis) = generalized_eigenspace(m, g.label, g.mult);
                let (sig, smallest) = krein_signature(&basis, tol.degeneracy);
                if smallest <= tol.degeneracy {
                    residual = residual.max(smallest);
                }
                if sig.unsigned_abs() as usize == g.mult {
                    diag = true;
                }
                splitting = Some(sig);
            }
            EigenKind::PlusOne | EigenKind::MinusOne => splitting = Some(0),
            _ => {}
        }
        groups.push(EigenGroup { label: g.label, kind: g.kind, multiplicity: g.mult, diagonalizable: diag, splitting });
    }
    groups.sort_by(|x, y| group_order(x).total_cmp(&group_order(y)));
    Ok(EigenStructure { groups, residual })
}

// Circle groups by angle first, then real pairs by value, then quadruplets.
fn group_order(g: &EigenGroup) -> f64 {
    match g.kind {
        EigenKind::PlusOne => 0.0,
        EigenKind::CirclePair => g.label.arg(),
        EigenKind::MinusOne => std::f64::consts::PI,
        EigenKind::RealPair => 10.0 + g.label.re.atan() + std::f64::consts::PI,
        EigenKind::Quadruplet => 20.0 + g.label.arg() + g.label.norm().ln(),
    }
}

/// Orthonormal basis of the generalized eigenspace of λ.
pub fn invariant_subspace(a: &SympMatrix, lambda: Complex64, tol: f64) -> Result<CMat> {
    invariant_subspace_with(a, lambda, tol, &Tolerances::default())
}

pub fn invariant_subspace_with(a: &SympMatrix, lambda: Complex64, tol: f64, tols: &Tolerances) -> Result<CMat> {
    let es = eigen_structure_with(a, tols)?;
    let g = es.find(lambda, tol).ok_or_else(|| Error::NotInSpectrum(format!("{lambda}")))?;
    // Use the orbit member closest to the request so that λ and λ̄ get
    // their own eigenspaces.
    let l = g.label;
    let target = [l, l.conj(), 1.0 / l, 1.0 / l.conj()]
        .into_iter()
        .min_by(|x, y| (x - lambda).norm().total_cmp(&(y - lambda).norm()))
        .unwrap_or(l);
    let (_, basis) = generalized_eigenspace(a.matrix(), target, g.multiplicity);
    Ok(basis)
}

pub fn splitting_number(a: &SympMatrix, lambda: Complex64) -> Result<i32> {
    splitting_number_with(a, lambda, &Tolerances::default())
}

pub fn splitting_number_with(a: &SympMatrix, lambda: Complex64, tol: &Tolerances) -> Result<i32> {
    if (lambda.norm() - 1.0).abs() > tol.circle.max(1e-6) {
        return Err(Error::OffCircle(format!("{lambda}")));
    }
    let basis = invariant_subspace_with(a, lambda, 1e-6, tol)?;
    let (sig, smallest) = krein_signature(&basis, tol.degeneracy);
    if smallest <= tol.degeneracy {
        // ±1 is the one place where β is forced to vanish on eigenvectors;
        // the generalized space there still has signature 0.
        let near_one = (lambda - 1.0).norm() < 1e-6 || (lambda + 1.0).norm() < 1e-6;
        if near_one {
            return Ok(0);
        }
        return Err(Error::DegenerateForm(smallest));
    }
    Ok(sig)
}

/// dθ/dt = ⟨Px, x⟩ / β(x, x) for the flow with tangent JPA at A.
pub fn krein_velocity(a: &SympMatrix, p: &Generator, lambda: Complex64) -> Result<f64> {
    if p.dim() != a.dim() {
        return Err(Error::Dimension(format!("generator {} vs matrix {}", p.dim(), a.dim())));
    }
    let es = eigen_structure_with(a, &Tolerances::default())?;
    let g = es.find(lambda, 1e-6).ok_or_else(|| Error::NotInSpectrum(format!("{lambda}")))?;
    if g.kind != EigenKind::CirclePair {
        return Err(Error::OffCircle(format!("{lambda}")));
    }
    if g.multiplicity != 1 {
        return Err(Error::Multiplicity(format!("{lambda} has multiplicity {}", g.multiplicity)));
    }
    let target = if (g.label - lambda).norm() <= (g.label.conj() - lambda).norm() { g.label } else { g.label.conj() };
    let (_, basis) = generalized_eigenspace(a.matrix(), target, 1);
    let x = basis.column(0).into_owned();
    let px = to_complex(p.matrix()) * &x;
    let num = x.dotc(&px).re;
    let den = krein_form(&x, &x)?.re;
    Ok(num / den)
}
