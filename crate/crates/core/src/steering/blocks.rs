//! Positive-path primitives on canonical blocks: rotations, real slides,
//! crossing witnesses, and quadruplet moves on the J-invariant splitting.

use nalgebra::DMatrix;
use std::f64::consts::PI;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{block_diag, c, expm, CMat};
use crate::paths::{PositivePath, Segment};
use super::builder::{Builder, LegKind};
use crate::strata::{
    br_canonical, CanonicalBlock, NormalForm, bu_canonical, hyperbolic_block, nilpotent_block, quadruplet_canonical, realify, rotation_block, Sign,
};
use crate::symplectic::{j_matrix, Generator, SympMatrix};

/// Half-width (in time) of the n = 1 crossing witness.
pub(crate) const NIL_HALF: f64 = 0.3;
pub(crate) const BU_HALF: f64 = 0.05;
pub(crate) const BR_HALF: f64 = 0.05;
/// Largest eigenvalue motion of one slide or ray step.
const STEP: f64 = 0.2;
pub(crate) const ANGLE_STEP: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CrossingDirection {
    /// Leave the unit circle.
    Exit,
    /// Arrive on the unit circle.
    Enter,
}

fn trusted(m: DMatrix<f64>) -> SympMatrix {
    SympMatrix::trusted(m)
}

/// ρ(θ_from) → ρ(θ_to) with generator (θ_to − θ_from)·Id over unit time.
pub fn rotate_block(theta_from: f64, theta_to: f64) -> Result<PositivePath> {
    if !(theta_to > theta_from) || !theta_to.is_finite() || !theta_from.is_finite() {
        return Err(Error::Invalid(format!("rotation must be anticlockwise: {theta_from} -> {theta_to}")));
    }
    PositivePath::constant(trusted(rotation_block(theta_from)), Generator::scaled_identity(1, theta_to - theta_from), 1.0)
}

/// Real eigenvalue of a hyperbolic 2×2 symplectic matrix on the same side
/// of ±1 as `like`.
fn real_eigenvalue(m: &DMatrix<f64>, like: f64) -> Option<f64> {
    let tr = m[(0, 0)] + m[(1, 1)];
    let d = tr * tr - 4.0;
    if d <= 0.0 {
        return None;
    }
    let big = 0.5 * (tr + tr.signum() * d.sqrt());
    Some(if like.abs() >= 1.0 { big } else { 1.0 / big })
}

fn p_family(increase_modulus: bool) -> Generator {
    // Along e^{JPt}·diag(λ, 1/λ) the eigenvalue moves as λ′ = −qλ, q = P₁₂.
    let q = if increase_modulus { -1.0 } else { 1.0 };
    Generator::from_row_slice(2, &[2.0, q, q, 1.0]).expect("symmetric")
}

/// Rotation frequency √det B small enough that a flow e^{J B t}·diag(r, 1/r)
/// with |B₁₂| ≈ 1 pushes the modulus up to `r_to` before it turns back: the
/// trace peaks at √(T² + (r − 1/r)²/det B).
fn gain_frequency(r: f64, r_to: f64) -> f64 {
    let t0 = r + 1.0 / r;
    let t1 = r_to + 1.0 / r_to;
    let need = (t1 * t1 - t0 * t0).max(0.0).sqrt();
    let push = r - 1.0 / r;
    if push >= 2.0 * need {
        1.0
    } else {
        // (1 − ω²)/ω² = 4·need²/push²: twice the reach that is needed.
        1.0 / (1.0 + 4.0 * need * need / (push * push)).sqrt()
    }
}

/// [[1, q], [q, 1]] with q = ±√(1 − ω²): determinant ω².
fn gain_matrix(omega: f64, sign: f64) -> [f64; 4] {
    let q = sign * (1.0 - omega * omega).sqrt();
    [1.0, q, q, 1.0]
}

/// Smallest c ∈ (0, cmax] with g(c) = 0 for g(0) < 0, located by a scan
/// and bisection; `None` marks values past the admissible range.
fn solve_first_root<F: Fn(f64) -> Option<f64>>(g: F, cmax: f64) -> Result<f64> {
    const SCAN: usize = 256;
    let past = |c: f64| g(c).is_none_or(|v| v >= 0.0);
    let mut lo = 0.0;
    let mut hi = f64::NAN;
    for k in 1..=SCAN {
        let c = cmax * k as f64 / SCAN as f64;
        if past(c) {
            hi = c;
            break;
        }
        lo = c;
    }
    if hi.is_nan() {
        return Err(Error::numerical("step target out of reach", cmax));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= 1e-15 * hi {
            break;
        }
        if past(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Quarter period π/(2√det) of the elliptic flow of a positive 2×2
/// generator with the given determinant; the trace peaks before it.
fn quarter_period(det: f64) -> f64 {
    0.5 * PI / det.max(1e-300).sqrt()
}

/// One slide step from diag(λ, 1/λ) to a matrix with real eigenvalue `to`.
pub(crate) fn slide_step(from: f64, to: f64) -> Result<PositivePath> {
    let up = to.abs() > from.abs() && from.abs() > 1.0 || to.abs() < from.abs() && from.abs() < 1.0;
    let m = from.abs().max(1.0 / from.abs());
    let omega = if up { gain_frequency(m, to.abs().max(1.0 / to.abs())) } else { 1.0 };
    let p = if omega < 1.0 {
        Generator::from_row_slice(2, &gain_matrix(omega, if to.abs() > from.abs() { -1.0 } else { 1.0 }))?
    } else {
        p_family(to.abs() > from.abs())
    };
    let a = hyperbolic_block(from);
    let jp = p.hamiltonian();
    let target = to.abs().ln();
    let g = |c: f64| -> Option<f64> {
        let m = expm(&(&jp * c)) * &a;
        let l = real_eigenvalue(&m, from)?;
        if l.signum() != from.signum() {
            return None;
        }
        let diff = l.abs().ln() - target;
        Some(if to.abs() > from.abs() { diff } else { -diff })
    };
    let cstar = solve_first_root(g, quarter_period(p.matrix().determinant()))?;
    PositivePath::constant(trusted(a), p.scale(cstar), 1.0)
}

/// diag(λ_from, 1/λ_from) → a matrix with real eigenvalue λ_to, in steps of
/// at most 0.2, each re-expressed in the canonical frame of its start.
pub fn real_slide(lambda_from: f64, lambda_to: f64) -> Result<PositivePath> {
    let ok = |l: f64| l.is_finite() && l != 0.0 && (l.abs() - 1.0).abs() > 1e-9;
    if !ok(lambda_from) || !ok(lambda_to) {
        return Err(Error::Invalid(format!("slide endpoints must be real and away from ±1: {lambda_from}, {lambda_to}")));
    }
    if lambda_from.signum() != lambda_to.signum() || (lambda_from.abs() > 1.0) != (lambda_to.abs() > 1.0) {
        return Err(Error::Invalid(format!("{lambda_from} and {lambda_to} lie in different components of ℝ ∖ [−1, 1]")));
    }
    let mut b = Builder::new(trusted(hyperbolic_block(lambda_from)));
    if lambda_to == lambda_from {
        let away = if lambda_from.abs() > 1.0 { 1.1 } else { 1.0 / 1.1 };
        slide_to(&mut b, lambda_from * away)?;
    }
    slide_to(&mut b, lambda_to)?;
    b.into_path()
}

fn current_real(b: &Builder) -> Result<(NormalForm, f64)> {
    let nf = b.normal_form()?;
    match nf.blocks.as_slice() {
        [CanonicalBlock::Hyperbolic(l)] => {
            let l = *l;
            Ok((nf, l))
        }
        other => Err(Error::numerical(format!("expected a single real pair, found {other:?}"), 0.0)),
    }
}

/// Slides the single real pair of a 2×2 builder to `to`.
pub(crate) fn slide_to(b: &mut Builder, to: f64) -> Result<()> {
    let (_, from) = current_real(b)?;
    for w in ray_waypoints(from, to) {
        let (nf, cur) = current_real(b)?;
        if (cur - w).abs() <= 1e-14 * w.abs() {
            continue;
        }
        let step = slide_step(cur, w)?;
        b.push_canonical(&nf, &step, LegKind::RealSlide { target: w, increasing: w.abs() > cur.abs() }, vec![0])?;
    }
    Ok(())
}

/// ρ(u)·N_{λ₀}^s for u ∈ [−before, after], generator Id.
pub(crate) fn nil_witness(l0: f64, sign: Sign, before: f64, after: f64) -> PositivePath {
    let origin = rotation_block(-before) * nilpotent_block(l0, sign);
    PositivePath::constant(trusted(origin), Generator::identity(1), before + after).expect("witness")
}

/// e^{uJ}·B_U(λ, s) for u ∈ [−before, after], generator Id.
pub(crate) fn bu_witness(lambda: Complex64, sign: Sign, before: f64, after: f64) -> PositivePath {
    let origin = expm(&(j_matrix(4) * -before)) * bu_canonical(lambda, sign);
    PositivePath::constant(trusted(origin), Generator::identity(2), before + after).expect("witness")
}

/// The generator of the bifurcation example at the double real pair.
pub fn bifurcation_generator() -> Generator {
    Generator::from_row_slice(4, &[1., 0., 0., 0., 0., 5., -2., 0., 0., -2., 1., 0., 0., 0., 0., 1.]).expect("symmetric")
}

/// e^{uJP}·A(λ, α) for u ∈ [−before, after], with P the bifurcation
/// example's generator.
pub(crate) fn br_witness(lambda: f64, alpha: f64, before: f64, after: f64) -> PositivePath {
    let p = bifurcation_generator();
    let origin = expm(&(p.hamiltonian() * -before)) * br_canonical(lambda, alpha);
    PositivePath::constant(trusted(origin), p, before + after).expect("witness")
}

/// Witness path crossing the codimension-one boundary at the circle point λ
/// in the given direction through the nilpotent class of the given sign.
///
/// Positive paths leave the circle only through the − class and arrive only
/// through the + class; other requests are infeasible.
pub fn exit_enter_via_n(lambda: Complex64, direction: CrossingDirection, sign: Sign) -> Result<PositivePath> {
    let legal = matches!((direction, sign), (CrossingDirection::Exit, Sign::Minus) | (CrossingDirection::Enter, Sign::Plus));
    if !legal {
        let what = if direction == CrossingDirection::Exit { "exit" } else { "entry" };
        return Err(Error::infeasible(
            "illegal crossing",
            format!("{what} through the {sign} nilpotent class: the positive cone points out of the circle region only at the − class and into it only at the + class"),
        ));
    }
    if !lambda.norm().is_finite() || (lambda.norm() - 1.0).abs() > 1e-9 {
        return Err(Error::OffCircle(format!("{lambda}")));
    }
    if lambda.im.abs() <= 1e-12 {
        return Ok(nil_witness(lambda.re.signum(), sign, NIL_HALF, NIL_HALF));
    }
    let l = if lambda.im < 0.0 { lambda.conj() } else { lambda };
    Ok(bu_witness(l / l.norm(), sign, BU_HALF, BU_HALF))
}

// ---------------------------------------------------------------------------
// Quadruplet moves. On V = span(v₀, w₀) the canonical 𝒪_𝒞 element acts as
// e^{iφ}·diag(r, 1/r) and a generator realify(B) (B Hermitian, positive)
// acts as e^{J_V B t} with J_V = [[0, 1], [−1, 0]].

fn v_generator(b: &CMat) -> Generator {
    Generator::from_symmetric_part(&realify(b))
}

fn quad_label(m: &DMatrix<f64>) -> Option<Complex64> {
    m.complex_eigenvalues()
        .iter()
        .filter(|z| z.norm() > 1.0 && z.im >= 0.0)
        .max_by(|a, b| a.im.total_cmp(&b.im))
        .copied()
}

/// Ray move: keeps arg λ, sends |λ| to `r_to`.
pub(crate) fn quad_ray_step(lambda: Complex64, r_to: f64) -> Result<PositivePath> {
    let a = quadruplet_canonical(lambda);
    let r0 = lambda.norm();
    let up = r_to > r0;
    // On V the flow is e^{J_V B t}; the modulus grows for q = B₁₂ > 0.
    let omega = if up { gain_frequency(r0, r_to) } else { 1.0 };
    let e = if omega < 1.0 { gain_matrix(omega, 1.0) } else { [2.0, if up { 1.0 } else { -1.0 }, if up { 1.0 } else { -1.0 }, 1.0] };
    let b = CMat::from_row_slice(2, 2, &e.map(|x| c(x, 0.0)));
    let p = v_generator(&b);
    let jp = p.hamiltonian();
    let g = |s: f64| -> Option<f64> {
        let m = expm(&(&jp * s)) * &a;
        let l = quad_label(&m)?;
        let d = l.norm().ln() - r_to.ln();
        Some(if up { d } else { -d })
    };
    let cstar = solve_first_root(g, quarter_period(e[0] * e[3] - e[1] * e[2]))?;
    PositivePath::constant(trusted(a), p.scale(cstar), 1.0)
}

/// Angle move: arg λ changes by exactly `dphi`, |λ| shrinks slightly.
pub(crate) fn quad_angle_step(lambda: Complex64, dphi: f64) -> Result<PositivePath> {
    let a = quadruplet_canonical(lambda);
    // J_V(φ′I + c·iJ_V) = φ′J_V − icI: phase e^{−ict} times a real rotation.
    let cc = -dphi;
    let spin = 1.5 * dphi.abs();
    let jv = CMat::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(-1.0, 0.0), c(0.0, 0.0)]);
    let b = CMat::identity(2, 2) * c(spin, 0.0) + jv * c(0.0, cc);
    let p = v_generator(&b);
    if !p.is_positive_definite() {
        return Err(Error::numerical("angle move generator is not positive", p.min_eigenvalue()));
    }
    PositivePath::constant(trusted(a), p, 1.0)
}

/// Smallest modulus at which an angle step of size 0.1 keeps the real
/// part of the V-action hyperbolic with room to spare.
pub(crate) const QUAD_SAFE_RADIUS: f64 = 1.5;

pub(crate) fn ray_waypoints(from: f64, to: f64) -> Vec<f64> {
    let k = ((to - from).abs() / STEP).ceil().max(1.0) as usize;
    (1..=k).map(|i| from + (to - from) * i as f64 / k as f64).collect()
}

/// Block-diagonal parallel composition; every block path is rescaled to
/// unit duration and breakpoints are merged.
pub(crate) fn parallel(blocks: &[PositivePath]) -> Result<PositivePath> {
    let scaled: Vec<PositivePath> = blocks.iter().map(|b| b.time_scaled(b.total_duration())).collect::<Result<_>>()?;
    let mut cuts: Vec<f64> = scaled.iter().flat_map(|b| b.breakpoints()).collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup_by(|a, b| (*a - *b).abs() <= 1e-12);
    if let Some(last) = cuts.last_mut() {
        *last = 1.0;
    }
    let origins: Vec<&DMatrix<f64>> = scaled.iter().map(|b| b.origin().matrix()).collect();
    let origin = trusted(block_diag(&origins));
    let mut segs = Vec::new();
    for w in cuts.windows(2) {
        let mid = 0.5 * (w[0] + w[1]);
        let gens: Vec<DMatrix<f64>> =
            scaled.iter().map(|b| b.generator_at(mid).map(|g| g.p.matrix().clone())).collect::<Result<_>>()?;
        let refs: Vec<&DMatrix<f64>> = gens.iter().collect();
        segs.push(Segment::new(w[1] - w[0], Generator::from_symmetric_part(&block_diag(&refs))));
    }
    PositivePath::new(origin, segs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::paths::eigen_trajectory;
    use crate::spectral::eigen_structure;
    use crate::strata::{classify, Region};
    use std::f64::consts::PI;

    #[test]
    fn rotations() {
        let p = rotate_block(0.0, PI).unwrap();
        let e = p.endpoint();
        assert!((e.matrix() + DMatrix::<f64>::identity(2, 2)).norm() < 1e-15);
        let full = rotate_block(0.0, 2.0 * PI).unwrap();
        assert!((full.endpoint().matrix() - DMatrix::<f64>::identity(2, 2)).norm() < 1e-14);
        assert!((rotate_block(0.3, 1.0).unwrap().verify_positive().margin - 0.7).abs() < 1e-15);
        assert!(rotate_block(1.0, 0.5).is_err());
    }

    fn top_real(m: &SympMatrix) -> f64 {
        let es = eigen_structure(m, 1e-8).unwrap();
        es.groups[0].label.re
    }

    #[test]
    fn slides() {
        for (a, b) in [(2.0, 3.0), (2.0, 1.5), (-2.0, -3.7), (-4.0, -1.3), (2.0, 2.0)] {
            let p = real_slide(a, b).unwrap();
            assert!(p.verify_positive().positive);
            assert!((top_real(&p.endpoint()) - b).abs() < 1e-7, "{a} -> {b}");
            let tr = eigen_trajectory(&p, 64).unwrap();
            assert_eq!(tr.open_regions().len(), 1);
        }
        // The increasing direction uses q < 0.
        let up = slide_step(2.0, 2.2).unwrap();
        assert!(up.segments()[0].generator.matrix()[(0, 1)] < 0.0);
        let down = slide_step(2.0, 1.8).unwrap();
        assert!(down.segments()[0].generator.matrix()[(0, 1)] > 0.0);
        assert!(real_slide(2.0, -2.0).is_err());
        assert!(real_slide(2.0, 0.5).is_err());
    }

    #[test]
    fn crossing_witnesses() {
        let l = Complex64::from_polar(1.0, 0.7);
        let enter = exit_enter_via_n(l, CrossingDirection::Enter, Sign::Plus).unwrap();
        let tr = eigen_trajectory(&enter, 128).unwrap();
        assert_eq!(tr.open_regions(), vec![Region::OC, Region::OU]);
        let exit = exit_enter_via_n(l, CrossingDirection::Exit, Sign::Minus).unwrap();
        let tr = eigen_trajectory(&exit, 128).unwrap();
        assert_eq!(tr.open_regions(), vec![Region::OU, Region::OC]);
        assert_eq!(tr.crossings[0].via.nilpotent_sign, Some(Sign::Minus));
        assert!(matches!(exit_enter_via_n(l, CrossingDirection::Exit, Sign::Plus), Err(Error::Infeasible { .. })));
        for l0 in [1.0, -1.0] {
            let w = exit_enter_via_n(c(l0, 0.0), CrossingDirection::Exit, Sign::Minus).unwrap();
            let regs = eigen_trajectory(&w, 128).unwrap().open_regions();
            assert!(regs[0] == Region::OUPlus || regs[0] == Region::OUMinus);
            assert_eq!(regs[1], if l0 > 0.0 { Region::ORPlus } else { Region::ORMinus });
        }
    }

    #[test]
    fn br_witness_directions() {
        for l in [2.0, 1.4, -2.0, -1.6] {
            let mut seen = Vec::new();
            for alpha in [-1.0, 1.0] {
                let w = br_witness(l, alpha, BR_HALF, BR_HALF);
                let a = classify(w.origin(), 1e-8).unwrap().region;
                let b = classify(&w.endpoint(), 1e-8).unwrap().region;
                seen.push((alpha, a, b));
            }
            let to_c = seen.iter().filter(|s| s.2 == Region::OC && s.1 != Region::OC).count();
            let to_r = seen.iter().filter(|s| s.1 == Region::OC && s.2 != Region::OC).count();
            assert_eq!((to_c, to_r), (1, 1), "λ = {l}: {seen:?}");
        }
    }

    #[test]
    fn quadruplet_moves() {
        let l = Complex64::from_polar(1.8, 1.0);
        let up = quad_ray_step(l, 2.0).unwrap();
        assert!(up.verify_positive().positive);
        let z = quad_label(up.endpoint().matrix()).unwrap();
        assert!((z.norm() - 2.0).abs() < 1e-10 && (z.arg() - 1.0).abs() < 1e-10);
        let down = quad_ray_step(l, 1.6).unwrap();
        let z = quad_label(down.endpoint().matrix()).unwrap();
        assert!((z.norm() - 1.6).abs() < 1e-10 && (z.arg() - 1.0).abs() < 1e-10);
        for d in [0.1, -0.1] {
            let turn = quad_angle_step(l, d).unwrap();
            assert!(turn.verify_positive().positive);
            let z = quad_label(turn.endpoint().matrix()).unwrap();
            assert!((z.arg() - (1.0 + d)).abs() < 1e-10, "{z}");
            assert!(z.norm() < 1.8 && z.norm() > 1.5);
        }
    }

    #[test]
    fn parallel_blocks() {
        let a = rotate_block(0.0, 1.0).unwrap();
        let b = real_slide(2.0, 3.0).unwrap();
        let p = parallel(&[a, b]).unwrap();
        assert!(p.verify_positive().positive);
        assert_eq!(p.dim(), 4);
        assert!((p.total_duration() - 1.0).abs() < 1e-14);
        assert_eq!(classify(&p.endpoint(), 1e-8).unwrap().region, Region::OUR);
    }
}
