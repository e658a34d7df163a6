//! Conjugacy strata of Sp(2, ℝ) and Sp(4, ℝ).

use std::fmt;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{block_diag, c, cnull_basis, hermitian_eigen, hermitian_eigenvalues, inf_norm, svd_ascending, to_complex, CMat, CVec};
use crate::spectral::{eigen_structure_with, generalized_eigenspace, krein_signature, shifted, EigenGroup, EigenKind, EigenStructure};
use crate::symplectic::{j_matrix, SympMatrix};
use crate::tol::Tolerances;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Region {
    #[serde(rename = "O_U_plus")]
    OUPlus,
    #[serde(rename = "O_U_minus")]
    OUMinus,
    #[serde(rename = "O_U")]
    OU,
    #[serde(rename = "O_C")]
    OC,
    #[serde(rename = "O_R_plus")]
    ORPlus,
    #[serde(rename = "O_R_minus")]
    ORMinus,
    #[serde(rename = "O_UR")]
    OUR,
    #[serde(rename = "B_U")]
    BU,
    #[serde(rename = "B_R")]
    BR,
    #[serde(rename = "B_UR")]
    BUR,
    #[serde(rename = "B_RU")]
    BRU,
    AtPlusOne,
    AtMinusOne,
    NonGeneric,
}

impl Region {
    pub fn as_str(self) -> &'static str {
        use Region::*;
        match self {
            OUPlus => "O_U_plus",
            OUMinus => "O_U_minus",
            OU => "O_U",
            OC => "O_C",
            ORPlus => "O_R_plus",
            ORMinus => "O_R_minus",
            OUR => "O_UR",
            BU => "B_U",
            BR => "B_R",
            BUR => "B_UR",
            BRU => "B_RU",
            AtPlusOne => "AtPlusOne",
            AtMinusOne => "AtMinusOne",
            NonGeneric => "NonGeneric",
        }
    }

    pub fn is_open(self) -> bool {
        use Region::*;
        matches!(self, OUPlus | OUMinus | OU | OC | ORPlus | ORMinus | OUR)
    }

    /// Open strata where every eigenvalue is on the circle.
    pub fn is_elliptic(self) -> bool {
        matches!(self, Region::OU | Region::OUPlus | Region::OUMinus)
    }

    /// Open strata with no eigenvalue on the circle (𝒩𝒰 for n = 2).
    pub fn is_off_circle(self) -> bool {
        matches!(self, Region::OC | Region::ORPlus | Region::ORMinus)
    }
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sign {
    #[serde(rename = "+")]
    Plus,
    #[serde(rename = "-")]
    Minus,
}

impl Sign {
    pub fn from_f64(x: f64) -> Sign {
        if x >= 0.0 {
            Sign::Plus
        } else {
            Sign::Minus
        }
    }

    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Sign::Plus => "+",
            Sign::Minus => "-",
        }
    }
}

impl fmt::Display for Sign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StratumLabel {
    pub region: Region,
    pub nilpotent_sign: Option<Sign>,
    pub labels: Vec<Complex64>,
}

impl StratumLabel {
    fn new(region: Region, nilpotent_sign: Option<Sign>, es: &EigenStructure) -> Self {
        StratumLabel { region, nilpotent_sign, labels: es.groups.iter().map(|g| g.label).collect() }
    }

    /// Same region and sign; labels ignored.
    pub fn same_class(&self, other: &StratumLabel) -> bool {
        self.region == other.region && self.nilpotent_sign == other.nilpotent_sign
    }
}

impl fmt::Display for StratumLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.nilpotent_sign {
            Some(s) => write!(f, "{}({})", self.region, s),
            None => write!(f, "{}", self.region),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymFuncs {
    pub sigma1: f64,
    pub sigma2: f64,
    pub disc: f64,
}

pub fn sym_funcs(a: &SympMatrix) -> Result<SymFuncs> {
    if a.dim() != 4 {
        return Err(Error::Dimension(format!("symmetric functions need 2n = 4, got {}", a.dim())));
    }
    let m = a.matrix();
    let s1 = m.trace();
    let s2 = (s1 * s1 - (m * m).trace()) / 2.0;
    Ok(SymFuncs { sigma1: s1, sigma2: s2, disc: s2 - s1 * s1 / 4.0 - 2.0 })
}

/// Sign of the Hermitian form h(x, y) = −i·λ̄·β((A − λ)x, y) on span(basis),
/// with the magnitude of its dominant eigenvalue.
///
/// On a 2-dimensional non-diagonalizable block at |λ| = 1 the form has rank
/// one, so its sign is the nilpotent invariant. For real λ = ±1 it reduces
/// to sign(λ·ω(x, Nx)); on the normalized circle form it is sign(Re λ̄μ).
pub(crate) fn sign_on_subspace(a: &DMatrix<f64>, lambda: Complex64, basis: &CMat) -> (Sign, f64) {
    let n = shifted(a, lambda);
    let j = to_complex(&j_matrix(a.nrows()));
    let g = (basis.adjoint() * j * n * basis).map(|z| z * Complex64::new(0.0, -1.0));
    let h = g.map(|z| z * Complex64::new(0.0, -1.0) * lambda.conj());
    let e = hermitian_eigenvalues(&h);
    let dom = e.iter().copied().max_by(|x, y| x.abs().total_cmp(&y.abs())).unwrap_or(0.0);
    (Sign::from_f64(dom), dom.abs())
}

fn group_sign(a: &DMatrix<f64>, g: &EigenGroup) -> Sign {
    let (_, basis) = generalized_eigenspace(a, g.label, g.multiplicity);
    sign_on_subspace(a, g.label, &basis).0
}

pub fn nilpotent_sign(a: &SympMatrix, lambda: Complex64) -> Result<Sign> {
    let es = eigen_structure_with(a, &Tolerances::default())?;
    let g = es.find(lambda, 1e-6).ok_or_else(|| Error::NotInSpectrum(format!("{lambda}")))?;
    if !g.kind.on_circle() {
        return Err(Error::Precondition(format!(
            "nilpotent sign is defined for eigenvalues on the unit circle, {lambda} is a {}",
            g.kind
        )));
    }
    if g.multiplicity != 2 {
        return Err(Error::Multiplicity(format!("{lambda} has multiplicity {}, expected 2", g.multiplicity)));
    }
    if g.diagonalizable {
        return Err(Error::Diagonalizable(format!("{lambda}")));
    }
    Ok(group_sign(a.matrix(), g))
}

pub fn classify(a: &SympMatrix, tol_circle: f64) -> Result<StratumLabel> {
    classify_with(a, &Tolerances::with_circle(tol_circle))
}

pub fn classify_with(a: &SympMatrix, tol: &Tolerances) -> Result<StratumLabel> {
    if a.dim() > 4 {
        return Err(Error::UnsupportedDimension(a.dim()));
    }
    let es = eigen_structure_with(a, tol)?;
    classify_structure(a, &es)
}

pub(crate) fn classify_structure(a: &SympMatrix, es: &EigenStructure) -> Result<StratumLabel> {
    use EigenKind::*;
    let m = a.matrix();
    let inconsistent = || Error::numerical(format!("inconsistent eigenvalue structure {:?}", es.groups), es.residual);
    let at_one = |g: &EigenGroup| if g.kind == PlusOne { Region::AtPlusOne } else { Region::AtMinusOne };
    if a.dim() == 2 {
        let g = es.groups.first().ok_or_else(inconsistent)?;
        let label = match g.kind {
            CirclePair => {
                let region = if m[(1, 0)] > 0.0 { Region::OUPlus } else { Region::OUMinus };
                StratumLabel::new(region, None, es)
            }
            RealPair => {
                let region = if g.label.re > 0.0 { Region::ORPlus } else { Region::ORMinus };
                StratumLabel::new(region, None, es)
            }
            PlusOne | MinusOne => {
                let sign = if g.diagonalizable { None } else { Some(group_sign(m, g)) };
                StratumLabel::new(at_one(g), sign, es)
            }
            Quadruplet => return Err(inconsistent()),
        };
        return Ok(label);
    }
    let gs = &es.groups;
    let kinds: Vec<(EigenKind, usize)> = gs.iter().map(|g| (g.kind, g.multiplicity)).collect();
    let region_sign = match kinds.as_slice() {
        [(Quadruplet, 1)] => (Region::OC, None),
        [(CirclePair, 1), (CirclePair, 1)] => (Region::OU, None),
        [(CirclePair, 2)] => {
            let g = &gs[0];
            if g.splitting.map(|s| s.abs()) == Some(2) {
                (Region::OU, None)
            } else if !g.diagonalizable {
                (Region::BU, Some(group_sign(m, g)))
            } else {
                (Region::NonGeneric, None)
            }
        }
        [(RealPair, 1), (RealPair, 1)] => {
            let region = if gs.iter().all(|g| g.label.re < 0.0) { Region::ORMinus } else { Region::ORPlus };
            (region, None)
        }
        [(RealPair, 2)] => {
            if gs[0].diagonalizable {
                (Region::NonGeneric, None)
            } else {
                (Region::BR, None)
            }
        }
        [(CirclePair, 1), (RealPair, 1)] | [(RealPair, 1), (CirclePair, 1)] => (Region::OUR, None),
        [(PlusOne, 2) | (MinusOne, 2), (CirclePair, 1)] | [(CirclePair, 1), (PlusOne, 2) | (MinusOne, 2)] => {
            let g = gs.iter().find(|g| matches!(g.kind, PlusOne | MinusOne)).ok_or_else(inconsistent)?;
            if g.diagonalizable {
                (Region::NonGeneric, None)
            } else {
                (Region::BUR, Some(group_sign(m, g)))
            }
        }
        [(PlusOne, 2) | (MinusOne, 2), (RealPair, 1)] | [(RealPair, 1), (PlusOne, 2) | (MinusOne, 2)] => {
            let g = gs.iter().find(|g| matches!(g.kind, PlusOne | MinusOne)).ok_or_else(inconsistent)?;
            if g.diagonalizable {
                (Region::NonGeneric, None)
            } else {
                (Region::BRU, Some(group_sign(m, g)))
            }
        }
        [(PlusOne, 4)] => (Region::AtPlusOne, None),
        [(MinusOne, 4)] => (Region::AtMinusOne, None),
        [(PlusOne, 2), (MinusOne, 2)] | [(MinusOne, 2), (PlusOne, 2)] => (Region::NonGeneric, None),
        _ => return Err(inconsistent()),
    };
    Ok(StratumLabel::new(region_sign.0, region_sign.1, es))
}

// ---------------------------------------------------------------------------
// Canonical representatives

pub fn rotation_block(theta: f64) -> DMatrix<f64> {
    let (s, c) = theta.sin_cos();
    DMatrix::from_row_slice(2, 2, &[c, -s, s, c])
}

pub fn hyperbolic_block(lambda: f64) -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 2, &[lambda, 0.0, 0.0, 1.0 / lambda])
}

/// N_λ^± = [[λ, 0], [±λ, λ]] for λ = ±1.
pub fn nilpotent_block(lambda: f64, sign: Sign) -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 2, &[lambda, 0.0, sign.value() * lambda, lambda])
}

/// Columns v₀, w₀, v̄₀, w̄₀ with v₀ = (1, 0, i, 0)/√2 and w₀ = −Jv₀; unitary,
/// and β(v₀, w₀) = i.
pub fn j_invariant_basis() -> CMat {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let v = [c(r, 0.0), c(0.0, 0.0), c(0.0, r), c(0.0, 0.0)];
    let w = [c(0.0, 0.0), c(-r, 0.0), c(0.0, 0.0), c(0.0, -r)];
    let mut x = CMat::zeros(4, 4);
    for i in 0..4 {
        x[(i, 0)] = v[i];
        x[(i, 1)] = w[i];
        x[(i, 2)] = v[i].conj();
        x[(i, 3)] = w[i].conj();
    }
    x
}

/// The real 4×4 matrix acting as M on V = span(v₀, w₀) and as M̄ on V̄.
pub fn realify(mv: &CMat) -> DMatrix<f64> {
    let xu = j_invariant_basis();
    let mut d = CMat::zeros(4, 4);
    d.view_mut((0, 0), (2, 2)).copy_from(mv);
    d.view_mut((2, 2), (2, 2)).copy_from(&mv.map(|z| z.conj()));
    (&xu * d * xu.adjoint()).map(|z| z.re)
}

/// Canonical 𝒪_𝒞 element with eigenvalue label λ (|λ| > 1, Im λ > 0).
pub fn quadruplet_canonical(lambda: Complex64) -> DMatrix<f64> {
    let mv = CMat::from_row_slice(2, 2, &[lambda, c(0.0, 0.0), c(0.0, 0.0), 1.0 / lambda.conj()]);
    realify(&mv)
}

/// Canonical ℬ_𝒰 element: Av₀ = λv₀, Aw₀ = λw₀ ± λv₀.
pub fn bu_canonical(lambda: Complex64, sign: Sign) -> DMatrix<f64> {
    let mv = CMat::from_row_slice(2, 2, &[lambda, lambda * sign.value(), c(0.0, 0.0), lambda]);
    realify(&mv)
}

/// ℬ_ℛ representative with double real eigenvalue λ and coupling α.
///
/// This is the symplectic form of the bifurcation example: its restriction
/// to E_λ = span(e₁, e₃) is [[λ, 0], [α, λ]] and the restriction to the dual
/// plane span(e₂, e₄) is forced by symplecticity.
pub fn br_canonical(lambda: f64, alpha: f64) -> DMatrix<f64> {
    let l = lambda;
    DMatrix::from_row_slice(
        4,
        4,
        &[l, 0.0, 0.0, 0.0, 0.0, 1.0 / l, 0.0, -alpha / (l * l), alpha, 0.0, l, 0.0, 0.0, 0.0, 0.0, 1.0 / l],
    )
}

/// Data of a canonical form, block by block.
#[derive(Debug, Clone, PartialEq)]
pub enum CanonicalBlock {
    Rotation(f64),
    Hyperbolic(f64),
    Nilpotent { lambda: f64, sign: Sign },
    Scalar(f64),
    Quadruplet(Complex64),
    BoundaryU { lambda: Complex64, sign: Sign },
    BoundaryR(f64),
}

impl CanonicalBlock {
    pub fn dim(&self) -> usize {
        match self {
            CanonicalBlock::Quadruplet(_) | CanonicalBlock::BoundaryU { .. } | CanonicalBlock::BoundaryR(_) => 4,
            _ => 2,
        }
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        match *self {
            CanonicalBlock::Rotation(t) => rotation_block(t),
            CanonicalBlock::Hyperbolic(l) => hyperbolic_block(l),
            CanonicalBlock::Nilpotent { lambda, sign } => nilpotent_block(lambda, sign),
            CanonicalBlock::Scalar(s) => DMatrix::identity(2, 2) * s,
            CanonicalBlock::Quadruplet(l) => quadruplet_canonical(l),
            CanonicalBlock::BoundaryU { lambda, sign } => bu_canonical(lambda, sign),
            CanonicalBlock::BoundaryR(l) => br_canonical(l, 1.0),
        }
    }
}

pub fn canonical_matrix(blocks: &[CanonicalBlock]) -> DMatrix<f64> {
    let ms: Vec<DMatrix<f64>> = blocks.iter().map(|b| b.matrix()).collect();
    let refs: Vec<&DMatrix<f64>> = ms.iter().collect();
    block_diag(&refs)
}

#[derive(Debug, Clone)]
pub struct NormalForm {
    pub conjugator: SympMatrix,
    pub canonical: SympMatrix,
    pub blocks: Vec<CanonicalBlock>,
    pub label: StratumLabel,
}

pub fn normal_form(a: &SympMatrix) -> Result<(SympMatrix, SympMatrix)> {
    let nf = normal_form_detailed(a)?;
    Ok((nf.conjugator, nf.canonical))
}

/// X with X⁻¹AX = N for the stratum's canonical representative N.
pub fn normal_form_detailed(a: &SympMatrix) -> Result<NormalForm> {
    let tol = Tolerances::default();
    let label = classify_with(a, &tol)?;
    let es = eigen_structure_with(a, &tol)?;
    let m = a.matrix();
    let d = a.dim();
    let (blocks, x): (Vec<CanonicalBlock>, DMatrix<f64>) = match (d, label.region) {
        (2, Region::OUPlus | Region::OUMinus) => {
            let (b, cols) = circle_block(m, &es.groups[0])?;
            (vec![b], cols)
        }
        (2, Region::ORPlus | Region::ORMinus) => {
            let (b, cols) = hyperbolic_pair(m, es.groups[0].label.re)?;
            (vec![b], cols)
        }
        (2, Region::AtPlusOne | Region::AtMinusOne) => {
            let l0 = if label.region == Region::AtPlusOne { 1.0 } else { -1.0 };
            match label.nilpotent_sign {
                None => (vec![CanonicalBlock::Scalar(l0)], DMatrix::identity(2, 2)),
                Some(_) => {
                    let e = DMatrix::identity(2, 2);
                    let (b, cols) = nilpotent_pair(m, l0, &e)?;
                    (vec![b], cols)
                }
            }
        }
        (4, Region::OU) => {
            if es.groups.len() == 2 {
                let (b1, x1) = circle_block(m, &es.groups[0])?;
                let (b2, x2) = circle_block(m, &es.groups[1])?;
                order_blocks(vec![(b1, x1), (b2, x2)])
            } else {
                double_circle(m, &es.groups[0])?
            }
        }
        (4, Region::OC) => quadruplet_form(m, es.groups[0].label)?,
        (4, Region::ORPlus | Region::ORMinus) => {
            let (b1, x1) = hyperbolic_pair(m, es.groups[0].label.re)?;
            let (b2, x2) = hyperbolic_pair(m, es.groups[1].label.re)?;
            order_blocks(vec![(b1, x1), (b2, x2)])
        }
        (4, Region::OUR) => {
            let circ = es.groups.iter().find(|g| g.kind == EigenKind::CirclePair).unwrap();
            let real = es.groups.iter().find(|g| g.kind == EigenKind::RealPair).unwrap();
            let (b1, x1) = circle_block(m, circ)?;
            let (b2, x2) = hyperbolic_pair(m, real.label.re)?;
            (vec![b1, b2], hstack(&x1, &x2))
        }
        (4, Region::BU) => bu_form(m, es.groups[0].label)?,
        (4, Region::BR) => br_form(m, es.groups[0].label.re)?,
        (4, Region::BUR | Region::BRU) => {
            let one = es.groups.iter().find(|g| matches!(g.kind, EigenKind::PlusOne | EigenKind::MinusOne)).unwrap();
            let other = es.groups.iter().find(|g| !matches!(g.kind, EigenKind::PlusOne | EigenKind::MinusOne)).unwrap();
            let (b1, x1) = if other.kind == EigenKind::CirclePair {
                circle_block(m, other)?
            } else {
                hyperbolic_pair(m, other.label.re)?
            };
            let l0 = one.label.re;
            let (_, e) = real_generalized_eigenspace(m, l0, 2);
            let (b2, x2) = nilpotent_pair(m, l0, &e)?;
            (vec![b1, b2], hstack(&x1, &x2))
        }
        (4, Region::AtMinusOne | Region::AtPlusOne) if label.nilpotent_sign.is_none() => {
            let l0 = if label.region == Region::AtPlusOne { 1.0 } else { -1.0 };
            let id = DMatrix::<f64>::identity(4, 4);
            if (m - &id * l0).norm() <= 1e-9 * m.norm() {
                (vec![CanonicalBlock::Scalar(l0), CanonicalBlock::Scalar(l0)], id)
            } else {
                return Err(Error::UnsupportedStratum(format!("{label} (codimension > 1)")));
            }
        }
        _ => return Err(Error::UnsupportedStratum(format!("{label} (codimension > 1)"))),
    };
    let n = canonical_matrix(&blocks);
    let scale = inf_norm(m).max(1.0);
    let canonical = SympMatrix::with_tol(n.clone(), 1e-9)?;
    if inf_norm(&(m - &n)) <= 1e-12 * scale {
        // Already canonical: keep A itself so that N = A bit for bit.
        let _ = canonical;
        return Ok(NormalForm { conjugator: SympMatrix::identity(d / 2), canonical: a.clone(), blocks, label });
    }
    let xi = x.clone().lu().try_inverse().ok_or_else(|| Error::Singular("normal-form conjugator".into()))?;
    let back = &xi * m * &x;
    let err = inf_norm(&(&back - &n));
    let cond = inf_norm(&x) * inf_norm(&xi);
    if err > 1e-7 * scale.max(inf_norm(&n)) {
        return Err(Error::numerical(format!("normal form of {label} (conjugator condition {cond:.2e})"), err));
    }
    let conjugator = SympMatrix::with_tol(x, 1e-7)
        .map_err(|e| Error::numerical(format!("normal-form conjugator not symplectic: {e}"), cond))?;
    Ok(NormalForm { conjugator, canonical, blocks, label })
}

fn hstack(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(a.nrows(), a.ncols() + b.ncols());
    out.view_mut((0, 0), (a.nrows(), a.ncols())).copy_from(a);
    out.view_mut((0, a.ncols()), (b.nrows(), b.ncols())).copy_from(b);
    out
}

fn block_key(b: &CanonicalBlock) -> f64 {
    match *b {
        CanonicalBlock::Rotation(t) => t,
        CanonicalBlock::Hyperbolic(l) => l,
        _ => 0.0,
    }
}

fn order_blocks(mut v: Vec<(CanonicalBlock, DMatrix<f64>)>) -> (Vec<CanonicalBlock>, DMatrix<f64>) {
    v.sort_by(|a, b| block_key(&a.0).total_cmp(&block_key(&b.0)));
    let x = hstack(&v[0].1, &v[1].1);
    (v.into_iter().map(|p| p.0).collect(), x)
}

fn omega(x: &DVector<f64>, y: &DVector<f64>) -> f64 {
    let j = j_matrix(x.len());
    y.dot(&(j * x))
}

fn ckernel_vec(m: &DMatrix<f64>, z: Complex64) -> CVec {
    let (_, b) = cnull_basis(&shifted(m, z), 1);
    b.column(0).into_owned()
}

fn real_kernel_vec(m: &DMatrix<f64>, l: f64) -> DVector<f64> {
    let s = m - DMatrix::identity(m.nrows(), m.nrows()) * l;
    let (_, v) = svd_ascending(&s);
    v.column(0).into_owned()
}

pub(crate) fn real_generalized_eigenspace(m: &DMatrix<f64>, l: f64, k: usize) -> (Vec<f64>, DMatrix<f64>) {
    let s = m - DMatrix::identity(m.nrows(), m.nrows()) * l;
    let mut p = s.clone();
    for _ in 1..k {
        p = &p * &s;
    }
    let (vals, v) = svd_ascending(&p);
    (vals, v.columns(0, k).into_owned())
}

/// Rotation block for a simple circle pair: basis (Re u, −Im u) where u is
/// the eigenvector with positive Krein norm, scaled to β(u, u) = 2.
fn circle_block(m: &DMatrix<f64>, g: &EigenGroup) -> Result<(CanonicalBlock, DMatrix<f64>)> {
    let plus = if g.splitting.unwrap_or(1) >= 0 { g.label } else { g.label.conj() };
    let u = ckernel_vec(m, plus);
    let b = crate::spectral::krein_form(&u, &u)?.re;
    if b <= 0.0 {
        return Err(Error::numerical("circle eigenvector with non-positive Krein norm", b));
    }
    let u = u * Complex64::new((2.0 / b).sqrt(), 0.0);
    let mut x = DMatrix::zeros(m.nrows(), 2);
    for i in 0..m.nrows() {
        x[(i, 0)] = u[i].re;
        x[(i, 1)] = -u[i].im;
    }
    let theta = plus.arg().rem_euclid(2.0 * std::f64::consts::PI);
    Ok((CanonicalBlock::Rotation(theta), x))
}

/// Double circle eigenvalue with definite Krein form: ρ(θ) ⊕ ρ(θ).
fn double_circle(m: &DMatrix<f64>, g: &EigenGroup) -> Result<(Vec<CanonicalBlock>, DMatrix<f64>)> {
    let plus = if g.splitting.unwrap_or(2) >= 0 { g.label } else { g.label.conj() };
    let (_, e) = generalized_eigenspace(m, plus, 2);
    let gram = crate::spectral::krein_gram(&e);
    let (vals, vecs) = hermitian_eigen(&gram);
    if vals.iter().any(|&v| v <= 0.0) {
        return Err(Error::numerical("double circle eigenvalue without definite Krein form", vals[0]));
    }
    let theta = plus.arg().rem_euclid(2.0 * std::f64::consts::PI);
    let mut x = DMatrix::zeros(m.nrows(), 4);
    for k in 0..2 {
        let u = &e * vecs.column(k) * Complex64::new((2.0 / vals[k]).sqrt(), 0.0);
        for i in 0..m.nrows() {
            x[(i, 2 * k)] = u[i].re;
            x[(i, 2 * k + 1)] = -u[i].im;
        }
    }
    Ok((vec![CanonicalBlock::Rotation(theta), CanonicalBlock::Rotation(theta)], x))
}

/// diag(λ, 1/λ) block: e ∈ E_λ, f ∈ E_{1/λ} with ω(e, f) = 1.
fn hyperbolic_pair(m: &DMatrix<f64>, l: f64) -> Result<(CanonicalBlock, DMatrix<f64>)> {
    let e = real_kernel_vec(m, l);
    let f = real_kernel_vec(m, 1.0 / l);
    let w = omega(&e, &f);
    if w.abs() < 1e-12 {
        return Err(Error::numerical("eigenvectors of a real pair are ω-orthogonal", w));
    }
    let f = f / w;
    // diag(s, 1/s) commutes with the block; balance the column norms.
    let s = (f.norm() / e.norm()).sqrt();
    let (e, f) = (e * s, f / s);
    Ok((CanonicalBlock::Hyperbolic(l), hstack(&DMatrix::from_column_slice(e.len(), 1, e.as_slice()), &DMatrix::from_column_slice(f.len(), 1, f.as_slice()))))
}

/// [[λ₀, 0], [sλ₀, λ₀]] on a 2-dimensional generalized eigenspace (columns of `e`) at λ₀ = ±1.
fn nilpotent_pair(m: &DMatrix<f64>, l0: f64, e: &DMatrix<f64>) -> Result<(CanonicalBlock, DMatrix<f64>)> {
    let d = m.nrows();
    let s = m - DMatrix::identity(d, d) * l0;
    let (_, y) = svd_ascending(&(&s * e));
    let f: DVector<f64> = e * y.column(0);
    let g: DVector<f64> = e * y.column(1);
    let cc = f.dot(&(&s * &g));
    let k = cc * omega(&g, &f);
    if k.abs() < 1e-14 {
        return Err(Error::numerical("nilpotent block with vanishing invariant", k));
    }
    let sign = Sign::from_f64(l0 * k);
    let a = (1.0 / k.abs()).sqrt();
    let gh = &g * a;
    let fh = &f * (a * cc / (sign.value() * l0));
    let mut x = DMatrix::zeros(d, 2);
    x.set_column(0, &gh);
    x.set_column(1, &fh);
    Ok((CanonicalBlock::Nilpotent { lambda: l0, sign }, x))
}

fn complex_frame_to_real(v: &CVec, w: &CVec) -> Result<DMatrix<f64>> {
    let mut t = CMat::zeros(4, 4);
    for i in 0..4 {
        t[(i, 0)] = v[i];
        t[(i, 1)] = w[i];
        t[(i, 2)] = v[i].conj();
        t[(i, 3)] = w[i].conj();
    }
    let x = t * j_invariant_basis().adjoint();
    let imag = x.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
    let real = x.map(|z| z.re);
    if imag > 1e-8 * inf_norm(&real).max(1.0) {
        return Err(Error::numerical("complex frame does not realify", imag));
    }
    Ok(real)
}

fn quadruplet_form(m: &DMatrix<f64>, l: Complex64) -> Result<(Vec<CanonicalBlock>, DMatrix<f64>)> {
    let v = ckernel_vec(m, l);
    let w0 = ckernel_vec(m, 1.0 / l.conj());
    let cvw = crate::spectral::krein_form(&v, &w0)?;
    if cvw.norm() < 1e-12 {
        return Err(Error::numerical("quadruplet eigenvectors are β-orthogonal", cvw.norm()));
    }
    let a = (Complex64::new(0.0, 1.0) / cvw).conj();
    let w = w0 * a;
    // v → sv, w → w/s keeps β(v, w) = i; balance the two norms.
    let s = (w.norm() / v.norm()).sqrt();
    let (v, w) = (v * Complex64::new(s, 0.0), w / Complex64::new(s, 0.0));
    Ok((vec![CanonicalBlock::Quadruplet(l)], complex_frame_to_real(&v, &w)?))
}

fn bu_form(m: &DMatrix<f64>, l: Complex64) -> Result<(Vec<CanonicalBlock>, DMatrix<f64>)> {
    let v = ckernel_vec(m, l);
    let (_, e) = generalized_eigenspace(m, l, 2);
    // Component of the generalized eigenspace orthogonal to v.
    let mut w0 = e.column(0).into_owned();
    let alt = e.column(1).into_owned();
    if v.dotc(&w0).norm() > v.dotc(&alt).norm() {
        w0 = alt;
    }
    let w0 = &w0 - &v * v.dotc(&w0);
    let cvw = crate::spectral::krein_form(&v, &w0)?;
    if cvw.norm() < 1e-12 {
        return Err(Error::numerical("B_U frame: β(v, w) vanishes", cvw.norm()));
    }
    let w1 = &w0 * (Complex64::new(0.0, 1.0) / cvw).conj();
    let b11 = crate::spectral::krein_form(&w1, &w1)?.re;
    let kappa = Complex64::new(0.0, b11 / 2.0);
    let w = &w1 + &v * kappa;
    let aw = to_complex(m) * &w - &w * l;
    let mu = v.dotc(&aw) / v.dotc(&v);
    let r = (l.conj() * mu).re;
    let sign = Sign::from_f64(r);
    let sc = mu.norm().sqrt();
    if sc < 1e-12 {
        return Err(Error::numerical("B_U block is diagonalizable", sc));
    }
    let v = v * Complex64::new(sc, 0.0);
    let w = w / Complex64::new(sc, 0.0);
    Ok((vec![CanonicalBlock::BoundaryU { lambda: l, sign }], complex_frame_to_real(&v, &w)?))
}

fn br_form(m: &DMatrix<f64>, l: f64) -> Result<(Vec<CanonicalBlock>, DMatrix<f64>)> {
    let (_, w) = real_generalized_eigenspace(m, l, 2);
    let (_, wd) = real_generalized_eigenspace(m, 1.0 / l, 2);
    let s = m - DMatrix::identity(4, 4) * l;
    let (_, y) = svd_ascending(&(&s * &w));
    let f: DVector<f64> = &w * y.column(0);
    let g: DVector<f64> = &w * y.column(1);
    let cc = f.dot(&(&s * &g));
    let e1 = g;
    let e3 = &f * cc;
    let p: DVector<f64> = wd.column(0).into_owned();
    let q: DVector<f64> = wd.column(1).into_owned();
    let om = nalgebra::Matrix2::new(omega(&e1, &p), omega(&e1, &q), omega(&e3, &p), omega(&e3, &q));
    let inv = om.try_inverse().ok_or_else(|| Error::numerical("B_R dual frame is degenerate", om.determinant()))?;
    let c2 = inv * nalgebra::Vector2::new(1.0, 0.0);
    let c4 = inv * nalgebra::Vector2::new(0.0, 1.0);
    let e2 = &p * c2[0] + &q * c2[1];
    let e4 = &p * c4[0] + &q * c4[1];
    let mut x = DMatrix::zeros(4, 4);
    x.set_column(0, &e1);
    x.set_column(1, &e2);
    x.set_column(2, &e3);
    x.set_column(3, &e4);
    Ok((vec![CanonicalBlock::BoundaryR(l)], x))
}

// ---------------------------------------------------------------------------
// Boundary analysis near a detected crossing

/// The two eigenvalues closest to `near` and an orthonormal basis of their
/// joint invariant subspace.
pub(crate) fn cluster_near(m: &DMatrix<f64>, near: Complex64) -> (Complex64, Complex64, CMat) {
    let mut ev: Vec<Complex64> = m.complex_eigenvalues().iter().copied().collect();
    ev.sort_by(|x, y| (x - near).norm().total_cmp(&(y - near).norm()));
    let (z1, z2) = (ev[0], ev[1]);
    let prod = shifted(m, z1) * shifted(m, z2);
    let (_, basis) = cnull_basis(&prod, 2);
    (z1, z2, basis)
}

/// Center of the closest pair of eigenvalues, preferring the upper half plane.
pub(crate) fn closest_pair_center(m: &DMatrix<f64>) -> Complex64 {
    let ev: Vec<Complex64> = m.complex_eigenvalues().iter().copied().collect();
    let mut best: Option<(f64, Complex64)> = None;
    for i in 0..ev.len() {
        for j in i + 1..ev.len() {
            let d = (ev[i] - ev[j]).norm();
            let ctr = (ev[i] + ev[j]) / 2.0;
            let better = match best {
                None => true,
                Some((bd, bc)) => d < bd * (1.0 - 1e-9) - 1e-15 || (d <= bd * (1.0 + 1e-9) + 1e-15 && ctr.im > bc.im),
            };
            if better {
                best = Some((d, ctr));
            }
        }
    }
    best.map(|b| b.1).unwrap_or(c(0.0, 0.0))
}

/// Krein signature of the invariant subspace of the two eigenvalues nearest
/// to `near`.
pub fn cluster_splitting(a: &SympMatrix, near: Complex64) -> i32 {
    let (_, _, basis) = cluster_near(a.matrix(), near);
    krein_signature(&basis, 1e-10).0
}

/// The codimension-one stratum crossed between two open regions, read off
/// from a matrix close to the crossing point.
pub fn boundary_label(a: &SympMatrix, from: Region, to: Region) -> StratumLabel {
    use Region::*;
    let m = a.matrix();
    let at_one = |m: &DMatrix<f64>| -> (f64, CMat) {
        let (p1, p2, bp) = cluster_near(m, c(1.0, 0.0));
        let (q1, q2, bq) = cluster_near(m, c(-1.0, 0.0));
        let dp = (p1 - 1.0).norm() + (p2 - 1.0).norm();
        let dq = (q1 + 1.0).norm() + (q2 + 1.0).norm();
        if dp <= dq {
            (1.0, bp)
        } else {
            (-1.0, bq)
        }
    };
    let pair = |x: Region, y: Region, p: Region, q: Region| (x == p && y == q) || (x == q && y == p);
    let elliptic1 = |r: Region| matches!(r, OUPlus | OUMinus);
    let real1 = |r: Region| matches!(r, ORPlus | ORMinus);
    if a.dim() == 2 && ((elliptic1(from) && real1(to)) || (real1(from) && elliptic1(to))) {
        let (l0, basis) = at_one(m);
        let (s, _) = sign_on_subspace(m, c(l0, 0.0), &basis);
        let region = if l0 > 0.0 { AtPlusOne } else { AtMinusOne };
        return StratumLabel { region, nilpotent_sign: Some(s), labels: vec![c(l0, 0.0)] };
    }
    if a.dim() == 4 {
        if pair(from, to, OU, OC) {
            let ctr = closest_pair_center(m);
            let lc = ctr / ctr.norm();
            let (_, _, basis) = cluster_near(m, lc);
            let (s, _) = sign_on_subspace(m, lc, &basis);
            return StratumLabel { region: BU, nilpotent_sign: Some(s), labels: vec![lc] };
        }
        if (from == OC && matches!(to, ORPlus | ORMinus)) || (to == OC && matches!(from, ORPlus | ORMinus)) {
            let ctr = closest_pair_center(m);
            return StratumLabel { region: BR, nilpotent_sign: None, labels: vec![c(ctr.re, 0.0)] };
        }
        let bur = pair(from, to, OU, OUR);
        let bru = (from == OUR && matches!(to, ORPlus | ORMinus)) || (to == OUR && matches!(from, ORPlus | ORMinus));
        if bur || bru {
            let (l0, basis) = at_one(m);
            let (s, _) = sign_on_subspace(m, c(l0, 0.0), &basis);
            let region = if bur { BUR } else { BRU };
            return StratumLabel { region, nilpotent_sign: Some(s), labels: vec![c(l0, 0.0)] };
        }
    }
    StratumLabel { region: NonGeneric, nilpotent_sign: None, labels: vec![] }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::eigen_structure;
    use crate::symplectic::{conjugate, random_symplectic, rotation, symp_exp, Generator};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn sm(m: DMatrix<f64>) -> SympMatrix {
        SympMatrix::new(m).unwrap()
    }

    fn diag(d: &[f64]) -> SympMatrix {
        sm(DMatrix::from_diagonal(&DVector::from_row_slice(d)))
    }

    fn bd(a: &DMatrix<f64>, b: &DMatrix<f64>) -> SympMatrix {
        sm(block_diag(&[a, b]))
    }

    #[test]
    fn canonical_forms_are_symplectic() {
        let ms = [
            quadruplet_canonical(Complex64::from_polar(1.3, 0.8)),
            bu_canonical(Complex64::from_polar(1.0, 0.7), Sign::Plus),
            bu_canonical(Complex64::from_polar(1.0, 2.1), Sign::Minus),
            br_canonical(2.0, 1.0),
            br_canonical(-3.0, -1.0),
        ];
        for m in ms {
            assert!(crate::symplectic::is_symplectic(&m, 1e-13).unwrap());
        }
        let xu = j_invariant_basis();
        let id = xu.adjoint() * &xu;
        assert!((id - CMat::identity(4, 4)).norm() < 1e-15);
    }

    #[test]
    fn n1_classification() {
        let l = classify(&rotation(1.0), 1e-8).unwrap();
        assert_eq!(l.region, Region::OUPlus);
        assert_eq!(classify(&rotation(-1.0), 1e-8).unwrap().region, Region::OUMinus);
        assert_eq!(classify(&diag(&[2.0, 0.5]), 1e-8).unwrap().region, Region::ORPlus);
        assert_eq!(classify(&diag(&[-2.0, -0.5]), 1e-8).unwrap().region, Region::ORMinus);
        let np = sm(DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, -1.0, -1.0]));
        let l = classify(&np, 1e-8).unwrap();
        assert_eq!((l.region, l.nilpotent_sign), (Region::AtMinusOne, Some(Sign::Plus)));
        let nm = sm(DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 1.0, -1.0]));
        assert_eq!(nilpotent_sign(&nm, c(-1.0, 0.0)).unwrap(), Sign::Minus);
        assert_eq!(nilpotent_sign(&np, c(-1.0, 0.0)).unwrap(), Sign::Plus);
        let one_plus = sm(nilpotent_block(1.0, Sign::Plus));
        assert_eq!(nilpotent_sign(&one_plus, c(1.0, 0.0)).unwrap(), Sign::Plus);
        let l = classify(&diag(&[-1.0, -1.0]), 1e-8).unwrap();
        assert_eq!((l.region, l.nilpotent_sign), (Region::AtMinusOne, None));
        assert!(matches!(nilpotent_sign(&diag(&[-1.0, -1.0]), c(-1.0, 0.0)), Err(Error::Diagonalizable(_))));
    }

    #[test]
    fn n1_flavor_agrees_with_splitting() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut n = 0;
        for _ in 0..300 {
            let a = random_symplectic(&mut rng, 1, 1.0);
            let es = eigen_structure(&a, 1e-8).unwrap();
            if es.groups[0].kind != EigenKind::CirclePair {
                continue;
            }
            let region = classify(&a, 1e-8).unwrap().region;
            let want = if es.groups[0].splitting == Some(1) { Region::OUPlus } else { Region::OUMinus };
            assert_eq!(region, want);
            n += 1;
        }
        assert!(n > 50);
    }

    #[test]
    fn nilpotent_sign_is_conjugation_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for l0 in [1.0, -1.0] {
            for s in [Sign::Plus, Sign::Minus] {
                let base = sm(nilpotent_block(l0, s));
                for _ in 0..20 {
                    let x = random_symplectic(&mut rng, 1, 0.8);
                    let b = conjugate(&base, &x).unwrap();
                    assert_eq!(nilpotent_sign(&b, c(l0, 0.0)).unwrap(), s);
                    let pert = b.matrix() + DMatrix::from_fn(2, 2, |_, _| rng.random_range(-1e-10..1e-10));
                    let label = classify(&SympMatrix::with_tol(pert, 1e-6).unwrap(), 1e-8).unwrap();
                    assert_eq!(label.nilpotent_sign, Some(s));
                }
            }
        }
        for s in [Sign::Plus, Sign::Minus] {
            let base = sm(bu_canonical(Complex64::from_polar(1.0, 1.2), s));
            for _ in 0..20 {
                let x = random_symplectic(&mut rng, 2, 0.5);
                let b = conjugate(&base, &x).unwrap();
                let l = classify(&b, 1e-8).unwrap();
                assert_eq!((l.region, l.nilpotent_sign), (Region::BU, Some(s)));
            }
        }
    }

    #[test]
    fn n2_examples() {
        assert_eq!(classify(&diag(&[2.0, 0.5, 3.0, 1.0 / 3.0]), 1e-8).unwrap().region, Region::ORPlus);
        assert_eq!(classify(&diag(&[-2.0, -0.5, -3.0, -1.0 / 3.0]), 1e-8).unwrap().region, Region::ORMinus);
        assert_eq!(classify(&sm(br_canonical(2.0, 1.0)), 1e-8).unwrap().region, Region::BR);
        assert_eq!(classify(&sm(quadruplet_canonical(Complex64::from_polar(1.5, 1.0))), 1e-8).unwrap().region, Region::OC);
        assert_eq!(classify(&bd(&rotation_block(1.0), &rotation_block(2.0)), 1e-8).unwrap().region, Region::OU);
        assert_eq!(classify(&bd(&rotation_block(1.0), &rotation_block(1.0)), 1e-8).unwrap().region, Region::OU);
        assert_eq!(classify(&bd(&rotation_block(1.0), &rotation_block(-1.0)), 1e-8).unwrap().region, Region::NonGeneric);
        assert_eq!(classify(&bd(&rotation_block(1.0), &hyperbolic_block(-2.0)), 1e-8).unwrap().region, Region::OUR);
        let bur = classify(&bd(&rotation_block(1.0), &nilpotent_block(-1.0, Sign::Minus)), 1e-8).unwrap();
        assert_eq!((bur.region, bur.nilpotent_sign), (Region::BUR, Some(Sign::Minus)));
        let bru = classify(&bd(&hyperbolic_block(3.0), &nilpotent_block(1.0, Sign::Plus)), 1e-8).unwrap();
        assert_eq!((bru.region, bru.nilpotent_sign), (Region::BRU, Some(Sign::Plus)));
        assert_eq!(classify(&diag(&[2.0, 0.5, 2.0, 0.5]), 1e-8).unwrap().region, Region::NonGeneric);
        assert!(matches!(classify(&SympMatrix::identity(3), 1e-8), Err(Error::UnsupportedDimension(6))));
    }

    #[test]
    fn br_example_structure() {
        let a = sm(br_canonical(2.0, 1.0));
        let es = eigen_structure(&a, 1e-8).unwrap();
        assert_eq!(es.groups.len(), 1);
        assert_eq!(es.groups[0].kind, EigenKind::RealPair);
        assert_eq!(es.groups[0].multiplicity, 2);
        assert!(!es.groups[0].diagonalizable);
        assert!((es.groups[0].label.re - 2.0).abs() < 1e-6);
        let f = sym_funcs(&a).unwrap();
        assert!((f.sigma1 - 5.0).abs() < 1e-14 && (f.sigma2 - 8.25).abs() < 1e-14 && f.disc.abs() < 1e-14);
    }

    #[test]
    fn disc_signs() {
        let q = sm(quadruplet_canonical(Complex64::from_polar(1.5, 1.0)));
        assert!(sym_funcs(&q).unwrap().disc > 0.0);
        assert!(sym_funcs(&diag(&[2.0, 0.5, 3.0, 1.0 / 3.0])).unwrap().disc < 0.0);
        assert!(sym_funcs(&rotation(1.0)).is_err());
        // disc = 0 exactly when the two t-roots coincide.
        for (a, b) in [(0.4, 0.4), (0.4, 1.3), (2.0, 2.0), (2.0, 3.0)] {
            let m = if a < 1.0 { bd(&rotation_block(a), &rotation_block(b)) } else { bd(&hyperbolic_block(a), &hyperbolic_block(b)) };
            let d = sym_funcs(&m).unwrap().disc;
            assert_eq!(d.abs() < 1e-12, a == b, "{a} {b} {d}");
        }
    }

    fn roundtrip(a: &SympMatrix) -> NormalForm {
        let nf = normal_form_detailed(a).unwrap();
        let back = conjugate(a, &nf.conjugator).unwrap();
        assert!(back.distance(&nf.canonical) <= 1e-7 * a.norm().max(1.0), "{} {}", nf.label, back.distance(&nf.canonical));
        nf
    }

    #[test]
    fn normal_forms_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let samples: Vec<SympMatrix> = vec![
            bd(&rotation_block(1.0), &rotation_block(2.0)),
            bd(&rotation_block(0.9), &rotation_block(0.9)),
            bd(&rotation_block(-0.9), &rotation_block(-0.9)),
            sm(quadruplet_canonical(Complex64::from_polar(1.3, 0.8))),
            sm(bu_canonical(Complex64::from_polar(1.0, 0.7), Sign::Plus)),
            sm(bu_canonical(Complex64::from_polar(1.0, 2.7), Sign::Minus)),
            sm(br_canonical(2.0, 1.0)),
            sm(br_canonical(-1.7, 1.0)),
            bd(&hyperbolic_block(2.0), &hyperbolic_block(-3.0)),
            bd(&rotation_block(2.5), &hyperbolic_block(-1.5)),
            bd(&rotation_block(2.5), &nilpotent_block(-1.0, Sign::Plus)),
            bd(&hyperbolic_block(1.5), &nilpotent_block(1.0, Sign::Minus)),
            rotation(0.3),
            rotation(-2.0),
            diag(&[-3.0, -1.0 / 3.0]),
            sm(nilpotent_block(-1.0, Sign::Minus)),
        ];
        for a in samples {
            let nf0 = roundtrip(&a);
            for _ in 0..10 {
                let x = random_symplectic(&mut rng, a.half_dim(), 0.5);
                let b = conjugate(&a, &x).unwrap();
                let nf = roundtrip(&b);
                assert!(nf.canonical.distance(&nf0.canonical) < 1e-6, "{}: {:?} vs {:?}", nf0.label, nf.blocks, nf0.blocks);
            }
        }
    }

    #[test]
    fn canonical_input_gives_identity_conjugator() {
        let a = bd(&rotation_block(1.0), &rotation_block(2.0));
        let (x, n) = normal_form(&a).unwrap();
        assert_eq!(x, SympMatrix::identity(2));
        assert_eq!(n, a);
    }

    #[test]
    fn quadruplet_label_recovered() {
        let l = Complex64::from_polar(1.3, 0.8);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = random_symplectic(&mut rng, 2, 0.6);
        let a = conjugate(&sm(quadruplet_canonical(l)), &x).unwrap();
        let (_, n) = normal_form(&a).unwrap();
        let es = eigen_structure(&n, 1e-8).unwrap();
        assert!((es.groups[0].label - l).norm() < 1e-7);
    }

    #[test]
    fn classify_is_conjugation_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for k in 0..500 {
            let a = match k % 6 {
                0 => bd(&rotation_block(rng.random_range(0.1..3.0)), &rotation_block(rng.random_range(3.3..6.1))),
                1 => sm(quadruplet_canonical(Complex64::from_polar(rng.random_range(1.1..3.0), rng.random_range(0.2..2.9)))),
                2 => bd(&hyperbolic_block(rng.random_range(1.2..3.0)), &hyperbolic_block(rng.random_range(3.2..5.0))),
                3 => bd(&hyperbolic_block(-rng.random_range(1.2..3.0)), &hyperbolic_block(-rng.random_range(3.2..5.0))),
                4 => bd(&rotation_block(rng.random_range(0.1..6.1)), &hyperbolic_block(-rng.random_range(1.2..3.0))),
                _ => sm(bu_canonical(Complex64::from_polar(1.0, rng.random_range(0.2..2.9)), if rng.random_bool(0.5) { Sign::Plus } else { Sign::Minus })),
            };
            let x = random_symplectic(&mut rng, 2, 0.5);
            let b = conjugate(&a, &x).unwrap();
            let la = classify(&a, 1e-8).unwrap();
            let lb = classify(&b, 1e-8).unwrap();
            assert!(la.same_class(&lb), "{la} vs {lb}");
        }
    }

    #[test]
    fn random_samples_are_open() {
        let mut rng = ChaCha8Rng::seed_from_u64(1234);
        for n in 1..=2 {
            for _ in 0..300 {
                let a = random_symplectic(&mut rng, n, 0.9);
                assert!(classify(&a, 1e-8).unwrap().region.is_open());
            }
        }
    }

    #[test]
    fn bifurcation_example_directions() {
        let p = Generator::from_row_slice(4, &[1.0, 0.0, 0.0, 0.0, 0.0, 5.0, -2.0, 0.0, 0.0, -2.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0]).unwrap();
        assert!(p.is_positive_definite());
        for (alpha, want) in [(-1.0, Region::OC), (1.0, Region::ORPlus)] {
            let a = sm(br_canonical(2.0, alpha));
            let b = symp_exp(&p, 1e-3).unwrap().mul(&a);
            assert_eq!(classify(&b, 1e-8).unwrap().region, want);
        }
    }

    #[test]
    fn positive_flow_through_boundaries() {
        // Forward P = Id flow through N⁻ leaves the circle, through N⁺ enters it.
        let idg = Generator::identity(2);
        for th in [0.4, 1.5, 2.6] {
            let l = Complex64::from_polar(1.0, th);
            for (s, after) in [(Sign::Minus, Region::OC), (Sign::Plus, Region::OU)] {
                let a = sm(bu_canonical(l, s));
                let fwd = symp_exp(&idg, 1e-3).unwrap().mul(&a);
                let bwd = symp_exp(&idg, -1e-3).unwrap().mul(&a);
                let before = if after == Region::OC { Region::OU } else { Region::OC };
                assert_eq!(classify(&fwd, 1e-8).unwrap().region, after);
                assert_eq!(classify(&bwd, 1e-8).unwrap().region, before);
                let b = boundary_label(&fwd, before, after);
                assert_eq!((b.region, b.nilpotent_sign), (Region::BU, Some(s)));
            }
        }
        let id1 = Generator::identity(1);
        for l0 in [1.0, -1.0] {
            let a = sm(nilpotent_block(l0, Sign::Minus));
            let fwd = symp_exp(&id1, 1e-3).unwrap().mul(&a);
            assert!(matches!(classify(&fwd, 1e-8).unwrap().region, Region::ORPlus | Region::ORMinus));
            let a = sm(nilpotent_block(l0, Sign::Plus));
            let fwd = symp_exp(&id1, 1e-3).unwrap().mul(&a);
            assert!(classify(&fwd, 1e-8).unwrap().region.is_elliptic());
        }
        let _ = PI;
    }
}
