//! Route planning through the strata of Sp(2) and Sp(4).
//!
//! Every plan is assembled from block primitives on canonical forms. Paths
//! to a target B are planned from Id to the canonical form of B and then
//! conjugated as a whole, which keeps the origin fixed; a damped Newton
//! correction on the last generator removes the remaining endpoint error.

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::blocks::{
    bu_witness, br_witness, nil_witness, parallel, quad_angle_step, quad_ray_step, ray_waypoints, rotate_block,
    slide_step, slide_to, ANGLE_STEP, BR_HALF, BU_HALF, NIL_HALF, QUAD_SAFE_RADIUS,
};
use super::builder::{quad_of, Builder, LegKind, Route};
use crate::error::{Error, Result};
use crate::linalg::{expm, svd_ascending};
use crate::paths::{eigen_trajectory, is_short, PositivePath, Segment};
use crate::spectral::{eigen_structure, EigenKind};
use crate::strata::{
    classify, hyperbolic_block, normal_form_detailed, CanonicalBlock, NormalForm, Region, Sign,
};
use crate::symplectic::{j_matrix, Generator, SympMatrix};
use std::f64::consts::{PI, TAU};

/// Shift durations tried, in order, when an endpoint is not generic.
const SHIFTS: [f64; 6] = [0.02, 0.05, 0.1, 0.17, 0.29, 0.41];
/// Entry witnesses start from a real pair with |λ| below the golden ratio;
/// larger pairs first slide down to this value.
const ENTRY_START: f64 = 1.4;
const ENTRY_LIMIT: f64 = 1.55;
/// Real pairs produced by a quadruplet collapse sit at this value.
const COLLAPSE_AT: f64 = 1.5;
const ENDPOINT_TARGET: f64 = 1e-13;
const ENDPOINT_LIMIT: f64 = 1e-6;
const AUDIT_SAMPLES: usize = 256;

fn unsupported(dim: usize) -> Result<()> {
    if dim == 2 || dim == 4 {
        Ok(())
    } else {
        Err(Error::UnsupportedDimension(dim))
    }
}

/// Positive-definite generator without block structure, used for the
/// shift off non-generic points.
fn shift_generator(dim: usize) -> Generator {
    if dim == 2 {
        Generator::from_row_slice(2, &[1.0, 0.2, 0.2, 1.3]).expect("symmetric")
    } else {
        #[rustfmt::skip]
        let p = [1.0, 0.2, 0.1, 0.0,
                 0.2, 1.3, 0.0, 0.15,
                 0.1, 0.0, 0.8, 0.2,
                 0.0, 0.15, 0.2, 1.1];
        Generator::from_row_slice(4, &p).expect("symmetric")
    }
}

fn is_scalar(nf: &NormalForm) -> bool {
    nf.blocks.iter().all(|b| matches!(b, CanonicalBlock::Scalar(_)))
}

/// A witness moved into the canonical frame of its own start.
fn canonical_leg(w: &PositivePath) -> Result<(NormalForm, PositivePath)> {
    let nf = normal_form_detailed(w.origin())?;
    let p = w.conjugate(&nf.conjugator)?.with_origin(nf.canonical.clone())?;
    Ok((nf, p))
}

fn single_route(kind: LegKind, duration: f64) -> Route {
    Route { legs: vec![super::builder::Leg { kind, blocks: vec![0], start: 0.0, end: duration }] }
}

fn rotate_part(from: f64, to: f64) -> Result<(PositivePath, Route)> {
    let p = rotate_block(from, to)?;
    Ok((p, single_route(LegKind::RotateCircle { targets: vec![to] }, 1.0)))
}

fn idle_part(block: &CanonicalBlock) -> Result<(PositivePath, Route)> {
    match *block {
        CanonicalBlock::Rotation(t) => rotate_part(t, t + (0.5 * (TAU - t)).min(0.1)),
        CanonicalBlock::Hyperbolic(l) => {
            let p = slide_step(l, l * 1.05)?;
            Ok((p, single_route(LegKind::RealSlide { target: l * 1.05, increasing: true }, 1.0)))
        }
        ref other => Err(Error::UnsupportedStratum(format!("no idle motion for {other:?}"))),
    }
}

/// Runs 2×2 block routes side by side from `nf.canonical`.
fn push_parallel(b: &mut Builder, nf: &NormalForm, parts: Vec<(PositivePath, Route)>) -> Result<()> {
    let paths: Vec<PositivePath> = parts.iter().map(|p| p.0.clone()).collect();
    let leg = parallel(&paths)?;
    let t0 = b.elapsed();
    b.push_canonical(nf, &leg, LegKind::Parallel, (0..parts.len()).collect())?;
    let span = leg.total_duration();
    let mut extra = Vec::new();
    for (i, (p, r)) in parts.iter().enumerate() {
        let scale = span / p.total_duration();
        for l in &r.legs {
            extra.push(super::builder::Leg { kind: l.kind.clone(), blocks: vec![i], start: t0 + l.start * scale, end: t0 + l.end * scale });
        }
    }
    b.annotate(extra);
    Ok(())
}

/// Id₂ → diag(λ, 1/λ): rotate to the start of the exit witness at sign(λ),
/// leave the circle through the − class, slide to λ. `stagger` shortens the
/// witness so that parallel exits land on distinct eigenvalues.
fn n1_exit(lambda: f64, stagger: f64) -> Result<(PositivePath, Route)> {
    let w = nil_witness(lambda.signum(), Sign::Minus, NIL_HALF, NIL_HALF - stagger);
    let (nfw, wc) = canonical_leg(&w)?;
    let theta = match nfw.blocks.as_slice() {
        [CanonicalBlock::Rotation(t)] => *t,
        other => return Err(Error::numerical(format!("exit witness starts at {other:?}"), 0.0)),
    };
    let mut b = Builder::new(SympMatrix::identity(1));
    b.push_raw(rotate_block(0.0, theta)?.segments().to_vec(), LegKind::RotateCircle { targets: vec![theta] }, vec![0]);
    let nf = b.normal_form()?;
    b.push_canonical(&nf, &wc, LegKind::ExitViaN(Sign::Minus), vec![0])?;
    slide_to(&mut b, lambda)?;
    b.finish()
}

/// diag(λ, 1/λ) → the circle, arriving through the + class at sign(λ).
fn n1_enter(lambda: f64) -> Result<(PositivePath, Route)> {
    let mut b = Builder::new(SympMatrix::trusted(hyperbolic_block(lambda)));
    let mut cur = lambda;
    if cur.abs() > ENTRY_LIMIT || cur.abs() < 1.0 / ENTRY_LIMIT {
        slide_to(&mut b, lambda.signum() * ENTRY_START)?;
        cur = match b.normal_form()?.blocks.as_slice() {
            [CanonicalBlock::Hyperbolic(l)] => *l,
            other => return Err(Error::numerical(format!("slide ended at {other:?}"), 0.0)),
        };
    }
    // ρ(−u)·N⁺ has trace λ₀(2cos u + sin u); pick u so that it equals tr.
    let tr = (cur + 1.0 / cur).abs();
    let (mut lo, mut hi) = (0.0_f64, 0.5_f64.atan());
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if 2.0 * mid.cos() + mid.sin() < tr {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let w = nil_witness(cur.signum(), Sign::Plus, 0.5 * (lo + hi), NIL_HALF);
    let (_, wc) = canonical_leg(&w)?;
    let nf = b.normal_form()?;
    b.push_canonical(&nf, &wc, LegKind::EnterViaN(Sign::Plus), vec![0])?;
    b.finish()
}

fn quad_now(b: &Builder) -> Result<(NormalForm, Complex64)> {
    let nf = b.normal_form()?;
    let l = quad_of(&nf).ok_or_else(|| Error::numerical(format!("expected a quadruplet, found {:?}", nf.blocks), 0.0))?;
    Ok((nf, l))
}

fn ray_to(b: &mut Builder, r: f64) -> Result<()> {
    let (_, l) = quad_now(b)?;
    for w in ray_waypoints(l.norm(), r) {
        let (nf, l) = quad_now(b)?;
        if (l.norm() - w).abs() <= 1e-14 * w {
            continue;
        }
        let kind = if w < l.norm() { LegKind::RayDescent { target: w } } else { LegKind::RayAscent { target: w } };
        b.push_canonical(&nf, &quad_ray_step(l, w)?, kind, vec![0])?;
    }
    Ok(())
}

/// Moves the quadruplet label to `target` inside 𝒪_𝒞: up to the safe
/// radius if needed, round in angle steps, then along the ray.
fn quad_moves_to(b: &mut Builder, target: Complex64) -> Result<()> {
    let (_, l) = quad_now(b)?;
    if (l.arg() - target.arg()).abs() > 1e-13 {
        if l.norm() < QUAD_SAFE_RADIUS {
            ray_to(b, QUAD_SAFE_RADIUS)?;
        }
        for _ in 0..200 {
            let (nf, l) = quad_now(b)?;
            let rest = target.arg() - l.arg();
            if rest.abs() <= 1e-13 {
                break;
            }
            let d = rest.clamp(-ANGLE_STEP, ANGLE_STEP);
            b.push_canonical(&nf, &quad_angle_step(l, d)?, LegKind::AngleMove { delta: d }, vec![0])?;
            if quad_now(b)?.1.norm() < QUAD_SAFE_RADIUS {
                ray_to(b, QUAD_SAFE_RADIUS)?;
            }
        }
    }
    ray_to(b, target.norm())?;
    let (_, l) = quad_now(b)?;
    if (l - target).norm() > 1e-9 * target.norm() {
        return Err(Error::numerical("quadruplet moves missed their target", (l - target).norm()));
    }
    Ok(())
}

/// Circle crossings stay this far from ±1 so that the witness never
/// meets the real axis.
fn witness_angle(alpha: f64) -> f64 {
    alpha.clamp(0.5, PI - 0.5)
}

/// Id₄ → 𝒪_𝒞 through 𝒩_λ^− at λ = e^{iα}.
fn exit_to_oc(b: &mut Builder, alpha: f64) -> Result<()> {
    let w = bu_witness(Complex64::from_polar(1.0, witness_angle(alpha)), Sign::Minus, BU_HALF, BU_HALF);
    let (nfw, wc) = canonical_leg(&w)?;
    let parts = nfw
        .blocks
        .iter()
        .map(|blk| match *blk {
            CanonicalBlock::Rotation(t) => rotate_part(0.0, t),
            ref other => Err(Error::numerical(format!("exit witness starts at {other:?}"), 0.0)),
        })
        .collect::<Result<Vec<_>>>()?;
    let nf = b.normal_form()?;
    if !is_scalar(&nf) {
        return Err(Error::numerical("exit to 𝒪_𝒞 must start at the identity", 0.0));
    }
    push_parallel(b, &nf, parts)?;
    let nf = b.normal_form()?;
    b.push_canonical(&nf, &wc, LegKind::ExitViaN(Sign::Minus), vec![0, 1])
}

/// 𝒪_𝒞 → 𝒪_𝒰 through 𝒩_λ^+ at the circle point in the label's direction.
fn enter_from_oc(b: &mut Builder) -> Result<()> {
    let (_, l) = quad_now(b)?;
    let w = bu_witness(Complex64::from_polar(1.0, witness_angle(l.arg())), Sign::Plus, BU_HALF, BU_HALF);
    let (nfw, wc) = canonical_leg(&w)?;
    let start = quad_of(&nfw).ok_or_else(|| Error::numerical("entry witness does not start in 𝒪_𝒞", 0.0))?;
    quad_moves_to(b, start)?;
    let nf = b.normal_form()?;
    b.push_canonical(&nf, &wc, LegKind::EnterViaN(Sign::Plus), vec![0])
}

/// The collapse witness at λ* in the requested direction.
fn collapse_witness(lambda: f64, into_real: bool) -> Result<PositivePath> {
    for alpha in [-1.0, 1.0] {
        let w = br_witness(lambda, alpha, BR_HALF, BR_HALF);
        let a = classify(w.origin(), 1e-8)?.region;
        let e = classify(&w.endpoint(), 1e-8)?.region;
        let ok = if into_real { a == Region::OC && e.is_off_circle() && e != Region::OC } else { e == Region::OC && a != Region::OC };
        if ok {
            return Ok(w);
        }
    }
    Err(Error::numerical(format!("no collapse direction at {lambda}"), 0.0))
}

/// 𝒪_𝒞 → 𝒪_ℛ⁺ by collapsing the quadruplet onto ℝ⁺, then sliding.
fn quad_to_real(b: &mut Builder, targets: [f64; 2]) -> Result<()> {
    let (nfw, wc) = canonical_leg(&collapse_witness(collapse_point(targets), true)?)?;
    let start = quad_of(&nfw).ok_or_else(|| Error::numerical("collapse witness does not start in 𝒪_𝒞", 0.0))?;
    quad_moves_to(b, start)?;
    let nf = b.normal_form()?;
    b.push_canonical(&nf, &wc, LegKind::SplitQuadruplet, vec![0])?;
    let nf = b.normal_form()?;
    match nf.blocks.as_slice() {
        [CanonicalBlock::Hyperbolic(a), CanonicalBlock::Hyperbolic(c)] => {
            let parts = vec![slide_part(*a, targets[0])?, slide_part(*c, targets[1])?];
            push_parallel(b, &nf, parts)
        }
        other => Err(Error::numerical(format!("collapse ended at {other:?}"), 0.0)),
    }
}

/// 𝒪_ℛ⁺ → 𝒪_𝒞: slide both pairs to the collapse witness and merge them.
fn real_to_quad(b: &mut Builder, nf: &NormalForm) -> Result<()> {
    let cur = match nf.blocks.as_slice() {
        [CanonicalBlock::Hyperbolic(a), CanonicalBlock::Hyperbolic(c)] => [*a, *c],
        other => return Err(Error::numerical(format!("unexpected blocks {other:?}"), 0.0)),
    };
    let (nfw, wc) = canonical_leg(&collapse_witness(collapse_point(cur), false)?)?;
    let start = match nfw.blocks.as_slice() {
        [CanonicalBlock::Hyperbolic(x), CanonicalBlock::Hyperbolic(y)] => [*x, *y],
        other => return Err(Error::numerical(format!("unexpected blocks {other:?}"), 0.0)),
    };
    push_parallel(b, nf, vec![slide_part(cur[0], start[0])?, slide_part(cur[1], start[1])?])?;
    let nf = b.normal_form()?;
    b.push_canonical(&nf, &wc, LegKind::MergeRealPairs, vec![0, 1])
}

/// Collapse modulus for real pairs near `pairs`: their geometric mean, so the
/// slides after (or before) the collision stay short.
fn collapse_point(pairs: [f64; 2]) -> f64 {
    (pairs[0] * pairs[1]).abs().sqrt().clamp(COLLAPSE_AT, 4.0)
}

fn slide_part(from: f64, to: f64) -> Result<(PositivePath, Route)> {
    let mut b = Builder::new(SympMatrix::trusted(hyperbolic_block(from)));
    if (from - to).abs() <= 1e-14 * to.abs() {
        // Nothing to do; a tiny outward-and-back wiggle keeps the leg nonempty.
        slide_to(&mut b, from * 1.01)?;
    }
    slide_to(&mut b, to)?;
    b.finish()
}

/// Flows along a fixed positive generator until the endpoint is generic
/// (or exactly ±Id).
fn ensure_generic(b: &mut Builder) -> Result<NormalForm> {
    for k in 0..=SHIFTS.len() {
        match b.normal_form() {
            Ok(nf) if nf.label.region.is_open() || is_scalar(&nf) => return Ok(nf),
            _ if k < SHIFTS.len() => {
                let tau = SHIFTS[k];
                b.push_raw(vec![Segment::new(tau, shift_generator(b.dim()))], LegKind::Shift { tau }, vec![]);
            }
            Ok(nf) => return Err(Error::UnsupportedStratum(format!("{} stays non-generic", nf.label))),
            Err(e) => return Err(e),
        }
    }
    unreachable!()
}

fn log_distance(l: f64) -> f64 {
    l.abs().ln().abs()
}

/// Moves the endpoint into 𝒪_𝒰 (or onto ±Id). With `short`, routes never
/// pass eigenvalue 1.
fn to_circle(b: &mut Builder, short: bool) -> Result<NormalForm> {
    use CanonicalBlock::*;
    for _ in 0..12 {
        let nf = ensure_generic(b)?;
        if nf.label.region.is_elliptic() || is_scalar(&nf) {
            return Ok(nf);
        }
        let refuse = |what: &str| Error::Precondition(format!("{what}: no short positive path can continue into 𝒪_𝒰 from here"));
        match nf.blocks.as_slice() {
            [Hyperbolic(l)] => {
                if short && *l > 0.0 {
                    return Err(refuse("endpoint in 𝒪_ℛ⁺"));
                }
                let part = n1_enter(*l)?;
                b.push_canonical(&nf, &part.0, LegKind::EnterViaN(Sign::Plus), vec![0])?;
            }
            [Rotation(t), Hyperbolic(l)] => {
                if short && *l > 0.0 {
                    return Err(refuse("real pair on ℝ⁺"));
                }
                let parts = vec![idle_part(&Rotation(*t))?, n1_enter(*l)?];
                push_parallel(b, &nf, parts)?;
            }
            [Hyperbolic(l1), Hyperbolic(l2)] => {
                if *l1 > 0.0 && *l2 > 0.0 && short {
                    real_to_quad(b, &nf)?;
                    continue;
                }
                if short && (*l1 > 0.0 || *l2 > 0.0) {
                    return Err(refuse("odd number of real eigenvalues above 1"));
                }
                let first = log_distance(*l1) <= log_distance(*l2);
                let parts = if first {
                    vec![n1_enter(*l1)?, idle_part(&Hyperbolic(*l2))?]
                } else {
                    vec![idle_part(&Hyperbolic(*l1))?, n1_enter(*l2)?]
                };
                push_parallel(b, &nf, parts)?;
            }
            [Quadruplet(_)] => enter_from_oc(b)?,
            other => return Err(Error::UnsupportedStratum(format!("{other:?}"))),
        }
    }
    Err(Error::numerical("route to 𝒪_𝒰 did not terminate", 0.0))
}

/// Runs every circle angle up to 2π; the endpoint becomes Id.
fn rotate_home(b: &mut Builder, nf: &NormalForm) -> Result<()> {
    let mut angles = Vec::new();
    for blk in &nf.blocks {
        match *blk {
            CanonicalBlock::Rotation(t) => angles.push(t),
            CanonicalBlock::Scalar(s) if s < 0.0 => angles.push(PI),
            CanonicalBlock::Scalar(_) => {}
            ref other => return Err(Error::numerical(format!("cannot rotate home from {other:?}"), 0.0)),
        }
    }
    if angles.is_empty() {
        return Ok(());
    }
    if angles.len() != nf.blocks.len() {
        return Err(Error::numerical(format!("cannot rotate home from {:?}", nf.blocks), 0.0));
    }
    let legs = angles.iter().map(|&t| rotate_part(t, TAU)).collect::<Result<Vec<_>>>()?;
    if legs.len() == 1 {
        b.push_canonical(nf, &legs[0].0, LegKind::RotateCircle { targets: vec![TAU] }, vec![0])
    } else {
        push_parallel(b, nf, legs)
    }
}

/// Id → a matrix with the canonical form of `target`.
fn plan_from_identity(target: &NormalForm) -> Result<Builder> {
    use CanonicalBlock::*;
    let dim = target.canonical.dim();
    let mut b = Builder::new(SympMatrix::identity(dim / 2));
    let id = b.normal_form()?;
    match target.blocks.as_slice() {
        [Rotation(t)] => {
            b.push_raw(rotate_block(0.0, *t)?.segments().to_vec(), LegKind::RotateCircle { targets: vec![*t] }, vec![0]);
        }
        [Hyperbolic(l)] => {
            let (p, _) = n1_exit(*l, 0.0)?;
            b.push_raw(p.segments().to_vec(), LegKind::ExitViaN(Sign::Minus), vec![0]);
        }
        [Rotation(a), Rotation(c)] => push_parallel(&mut b, &id, vec![rotate_part(0.0, *a)?, rotate_part(0.0, *c)?])?,
        [Rotation(t), Hyperbolic(l)] => push_parallel(&mut b, &id, vec![rotate_part(0.0, *t)?, n1_exit(*l, 0.0)?])?,
        [Hyperbolic(l1), Hyperbolic(l2)] if *l1 > 0.0 && *l2 > 0.0 => {
            let w = collapse_witness(COLLAPSE_AT, true)?;
            let (nfw, _) = canonical_leg(&w)?;
            let start = quad_of(&nfw).ok_or_else(|| Error::numerical("collapse witness does not start in 𝒪_𝒞", 0.0))?;
            exit_to_oc(&mut b, start.arg())?;
            quad_to_real(&mut b, [*l1, *l2])?;
        }
        [Hyperbolic(l1), Hyperbolic(l2)] => push_parallel(&mut b, &id, vec![n1_exit(*l1, 0.0)?, n1_exit(*l2, 0.1)?])?,
        [Quadruplet(l)] => {
            exit_to_oc(&mut b, l.arg())?;
            quad_moves_to(&mut b, *l)?;
        }
        other => return Err(Error::UnsupportedStratum(format!("no plan towards {other:?}"))),
    }
    Ok(b)
}

/// Newton correction of the last generator so that the endpoint is `target`.
fn correct_endpoint(path: PositivePath, target: &SympMatrix) -> Result<PositivePath> {
    let scale = target.norm().max(1.0);
    let err = path.endpoint().distance(target);
    if err <= ENDPOINT_TARGET * scale || path.segments().is_empty() {
        return if err <= ENDPOINT_LIMIT * scale { Ok(path) } else { Err(Error::numerical("endpoint mismatch", err)) };
    }
    let segs = path.segments();
    let last = segs.len() - 1;
    let d = segs[last].duration;
    let start = path.segments_prefix(last);
    let dim = path.dim();
    let j = j_matrix(dim);
    let b = target.matrix();
    let f = |p: &DMatrix<f64>| expm(&(&j * p * d)) * &start - b;
    let mut p = segs[last].generator.matrix().clone();
    let basis: Vec<(usize, usize)> = (0..dim).flat_map(|i| (i..dim).map(move |k| (i, k))).collect();
    let mut r = f(&p);
    for _ in 0..30 {
        if r.norm() <= ENDPOINT_TARGET * scale {
            break;
        }
        let h = 1e-6 * p.norm().max(1.0);
        let mut jac = DMatrix::<f64>::zeros(dim * dim, basis.len());
        for (col, &(i, k)) in basis.iter().enumerate() {
            let mut e = DMatrix::<f64>::zeros(dim, dim);
            e[(i, k)] = 1.0;
            e[(k, i)] = 1.0;
            let diff = (f(&(&p + &e * h)) - f(&(&p - &e * h))) / (2.0 * h);
            jac.set_column(col, &DMatrix::from_column_slice(dim * dim, 1, diff.as_slice()).column(0));
        }
        let rhs = DMatrix::from_column_slice(dim * dim, 1, r.as_slice());
        let svd = jac.svd(true, true);
        let step = svd.solve(&(-rhs), 1e-12).map_err(|e| Error::numerical(e, r.norm()))?;
        let mut next = p.clone();
        for (col, &(i, k)) in basis.iter().enumerate() {
            next[(i, k)] += step[col];
            if i != k {
                next[(k, i)] += step[col];
            }
        }
        let rn = f(&next);
        if rn.norm() >= r.norm() {
            break;
        }
        p = next;
        r = rn;
    }
    let g = Generator::new(p)?;
    if !g.is_positive_definite() {
        return Err(Error::numerical("endpoint correction lost positivity", g.min_eigenvalue()));
    }
    if r.norm() > ENDPOINT_LIMIT * scale {
        return Err(Error::numerical("endpoint correction did not converge", r.norm()));
    }
    let mut out = segs.to_vec();
    out[last] = Segment::new(d, g);
    PositivePath::new(path.origin().clone(), out)
}

fn circle_count(r: Region, dim: usize) -> Option<usize> {
    match r {
        Region::OU | Region::OUPlus | Region::OUMinus => Some(dim),
        Region::OUR => Some(2),
        Region::OC | Region::ORPlus | Region::ORMinus => Some(0),
        _ => None,
    }
}

/// Checks that eigenvalues leave the circle only through − classes and
/// arrive only through + classes.
pub fn audit_crossings(path: &PositivePath) -> Result<()> {
    let tr = eigen_trajectory(path, AUDIT_SAMPLES)?;
    for c in &tr.crossings {
        let (Some(a), Some(z)) = (circle_count(c.from, path.dim()), circle_count(c.to, path.dim())) else { continue };
        let needed = if z < a {
            Sign::Minus
        } else if z > a {
            Sign::Plus
        } else {
            continue;
        };
        if let Some(s) = c.via.nilpotent_sign {
            if s != needed {
                return Err(Error::infeasible(
                    "illegal crossing",
                    format!("{} → {} at t = {:.6} through the {s} class", c.from, c.to, c.t),
                ));
            }
        }
    }
    Ok(())
}

/// Id → B, exact endpoint, with the route followed.
fn from_identity(target: &SympMatrix, short: bool) -> Result<(PositivePath, Route)> {
    let dim = target.dim();
    let p_shift = shift_generator(dim);
    let mut last_err = None;
    for tau in std::iter::once(0.0).chain(SHIFTS) {
        let shifted = if tau > 0.0 {
            SympMatrix::trusted(expm(&(p_shift.hamiltonian() * -tau)) * target.matrix())
        } else {
            target.clone()
        };
        let nf_t = match normal_form_detailed(&shifted) {
            Ok(nf) if nf.label.region.is_open() => nf,
            Ok(_) => continue,
            Err(e) => {
                last_err = Some(e);
                continue;
            }
        };
        let attempt = (|| -> Result<(PositivePath, Route)> {
            let b = plan_from_identity(&nf_t)?;
            let mut route = b.route();
            let nf_e = b.normal_form()?;
            let gap = (nf_e.canonical.matrix() - nf_t.canonical.matrix()).norm();
            if gap > 1e-6 * nf_t.canonical.norm() {
                return Err(Error::numerical("planned route missed the target class", gap));
            }
            let z = nf_e.conjugator.mul(&nf_t.conjugator.inverse());
            let lifted = b.into_path()?.conjugate(&z)?.with_origin(SympMatrix::identity(dim / 2))?;
            let mut lifted = lifted;
            if tau > 0.0 {
                let t0 = lifted.total_duration();
                lifted = lifted.then(&[Segment::new(tau, p_shift.clone())])?;
                route.legs.push(super::builder::Leg { kind: LegKind::Shift { tau }, blocks: vec![], start: t0, end: t0 + tau });
            }
            let path = correct_endpoint(lifted, target)?;
            if short && !is_short(&path)? {
                return Err(Error::numerical("planned path is not short", 0.0));
            }
            Ok((path, route))
        })();
        match attempt {
            Ok(r) => return Ok(r),
            Err(e) => last_err = Some(e),
        }
    }
    Err(last_err.unwrap_or_else(|| Error::UnsupportedStratum("target stays non-generic under every shift".into())))
}

/// A positive path from `a` to `b` (2n ≤ 4), with the route it follows.
pub fn connect_with_route(a: &SympMatrix, b: &SympMatrix) -> Result<(PositivePath, Route)> {
    if a.dim() != b.dim() {
        return Err(Error::Dimension(format!("{} vs {}", a.dim(), b.dim())));
    }
    unsupported(a.dim())?;
    let n = a.half_dim();
    let home = if a.distance(&SympMatrix::identity(n)) <= 1e-14 {
        None
    } else {
        let mut first = Builder::new(a.clone());
        let nf = to_circle(&mut first, false)?;
        rotate_home(&mut first, &nf)?;
        Some(first.finish()?)
    };
    let (second, r2) = from_identity(b, false)?;
    let (path, route) = match home {
        None => (second, r2),
        Some((first, mut r1)) => {
            let t0 = first.total_duration();
            r1.legs.extend(r2.shifted(t0).legs);
            let joined = first.then(second.segments())?;
            (correct_endpoint(joined, b)?, r1)
        }
    };
    audit_crossings(&path)?;
    Ok((path, route))
}

/// A positive path from `a` to `b`: down to Id through 𝒰, then out to `b`.
pub fn connect(a: &SympMatrix, b: &SympMatrix) -> Result<PositivePath> {
    connect_with_route(a, b).map(|r| r.0)
}

/// Real eigenvalues above 1, with multiplicity.
fn count_above_one(b: &SympMatrix) -> Result<usize> {
    let es = eigen_structure(b, 1e-8)?;
    Ok(es
        .groups
        .iter()
        .filter(|g| g.kind == EigenKind::RealPair && g.label.re > 0.0)
        .map(|g| g.multiplicity)
        .sum())
}

/// A short positive path from Id to `b`, if the parity rule allows one.
pub fn short_path_to_with_route(b: &SympMatrix) -> Result<(PositivePath, Route)> {
    unsupported(b.dim())?;
    let n = b.half_dim();
    let smin = svd_ascending(&(b.matrix() - DMatrix::<f64>::identity(2 * n, 2 * n))).0[0];
    if smin <= 1e-8 * b.norm() {
        return Err(Error::Precondition(format!("target has eigenvalue 1 (σ_min(B − Id) = {smin:.3e})")));
    }
    let k = count_above_one(b)?;
    if k % 2 == 1 {
        return Err(Error::infeasible(
            "parity",
            format!("a short positive path from Id ends at a matrix with an even number of real eigenvalues greater than 1; this target has {k}"),
        ));
    }
    let (path, route) = from_identity(b, true)?;
    audit_crossings(&path)?;
    Ok((path, route))
}

pub fn short_path_to(b: &SympMatrix) -> Result<PositivePath> {
    short_path_to_with_route(b).map(|r| r.0)
}

/// Prolongs a short positive path from Id so that it ends in 𝒪_𝒰 and stays short.
pub fn extend_to_u_with_route(path: &PositivePath) -> Result<(PositivePath, Route)> {
    unsupported(path.dim())?;
    if path.origin().distance(&SympMatrix::identity(path.half_dim())) > 1e-12 {
        return Err(Error::Precondition("path must start at the identity".into()));
    }
    if !path.verify_positive().positive {
        return Err(Error::Precondition("path is not certified positive".into()));
    }
    if !is_short(path)? {
        return Err(Error::Precondition("path is not short".into()));
    }
    let mut b = Builder::from_path(path);
    match b.normal_form() {
        Ok(nf) if nf.label.region.is_elliptic() => {
            b.push_raw(vec![Segment::new(1e-6, Generator::identity(path.half_dim()))], LegKind::RotateCircle { targets: vec![] }, vec![]);
        }
        _ => {
            to_circle(&mut b, true)?;
        }
    }
    let (out, route) = b.finish()?;
    let region = classify(&out.endpoint(), 1e-8)?.region;
    if !region.is_elliptic() {
        return Err(Error::numerical(format!("extension ended in {region}"), 0.0));
    }
    if !is_short(&out)? {
        return Err(Error::numerical("extension is not short", 0.0));
    }
    audit_crossings(&out)?;
    Ok((out, route))
}

pub fn extend_to_u(path: &PositivePath) -> Result<PositivePath> {
    extend_to_u_with_route(path).map(|r| r.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::paths::conley_zehnder_index;
    use crate::strata::{br_canonical, quadruplet_canonical, rotation_block};
    use crate::symplectic::random_symplectic;
    use crate::linalg::block_diag;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn m(d: DMatrix<f64>) -> SympMatrix {
        SympMatrix::new(d).unwrap()
    }

    fn diag(v: &[f64]) -> SympMatrix {
        let blocks: Vec<DMatrix<f64>> = v.chunks(2).map(|c| DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(c))).collect();
        let refs: Vec<&DMatrix<f64>> = blocks.iter().collect();
        m(block_diag(&refs))
    }

    fn check_endpoint(p: &PositivePath, b: &SympMatrix) {
        assert!(p.verify_positive().positive);
        let err = p.endpoint().distance(b);
        assert!(err <= 1e-6 * b.norm(), "endpoint error {err:.3e}");
        assert!(p.max_symplectic_residual(64) <= 1e-8);
    }

    #[test]
    fn connect_examples() {
        let id = SympMatrix::identity(1);
        let r1 = m(rotation_block(1.0));
        let (p, route) = connect_with_route(&id, &r1).unwrap();
        check_endpoint(&p, &r1);
        assert_eq!(p.segments().len(), 1);
        assert!(matches!(route.legs[0].kind, LegKind::RotateCircle { .. }));

        let minus = m(-DMatrix::<f64>::identity(2, 2));
        let p = connect(&diag(&[2.0, 0.5]), &minus).unwrap();
        assert_eq!(p.origin(), &diag(&[2.0, 0.5]));
        check_endpoint(&p, &minus);
        let tr = eigen_trajectory(&p, 256).unwrap();
        let entry = &tr.crossings[0];
        assert_eq!((entry.from, entry.via.nilpotent_sign), (Region::ORPlus, Some(Sign::Plus)));
        assert!(tr.open_regions().contains(&Region::OUMinus));
    }

    #[test]
    fn connect_loops_and_random_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in [1, 2] {
            for _ in 0..6 {
                let a = random_symplectic(&mut rng, n, 0.8);
                let b = random_symplectic(&mut rng, n, 0.8);
                let p = connect(&a, &a).unwrap();
                assert_eq!(p.origin(), &a);
                check_endpoint(&p, &a);
                let p = connect(&a, &b).unwrap();
                check_endpoint(&p, &b);
                let want = classify(&b, 1e-8).unwrap();
                assert!(classify(&p.endpoint(), 1e-8).unwrap().same_class(&want));
            }
        }
    }

    #[test]
    fn parity_gate() {
        let err = short_path_to(&diag(&[2.0, 0.5])).unwrap_err();
        assert!(matches!(&err, Error::Infeasible { rule, .. } if rule == "parity"), "{err}");
        assert!(short_path_to(&diag(&[2.0, 0.5, -3.0, -1.0 / 3.0])).is_err());
        assert!(matches!(short_path_to(&SympMatrix::identity(1)), Err(Error::Precondition(_))));

        let b = diag(&[-2.0, -0.5]);
        let p = short_path_to(&b).unwrap();
        check_endpoint(&p, &b);
        assert!(is_short(&p).unwrap());
        let tr = eigen_trajectory(&p, 256).unwrap();
        let exit = tr.crossings.iter().find(|c| c.to == Region::ORMinus).unwrap();
        assert_eq!((exit.via.region, exit.via.nilpotent_sign), (Region::AtMinusOne, Some(Sign::Minus)));

        let b = diag(&[2.0, 0.5, 3.0, 1.0 / 3.0]);
        let (p, route) = short_path_to_with_route(&b).unwrap();
        check_endpoint(&p, &b);
        assert!(is_short(&p).unwrap());
        assert!(route.kinds().contains(&&LegKind::SplitQuadruplet));
        assert!(eigen_trajectory(&p, 256).unwrap().open_regions().contains(&Region::OC));
    }

    #[test]
    fn short_paths_to_each_stratum() {
        let quad = m(quadruplet_canonical(Complex64::from_polar(1.3, 2.0)));
        let targets = vec![
            m(block_diag(&[&rotation_block(1.0), &rotation_block(5.5)])),
            quad,
            m(block_diag(&[&rotation_block(2.0), &hyperbolic_block(-3.0)])),
            diag(&[-2.0, -0.5, -4.0, -0.25]),
            m(-DMatrix::<f64>::identity(4, 4)),
            diag(&[1.2, 1.0 / 1.2, 7.0, 1.0 / 7.0]),
            m(br_canonical(-2.0, 0.5)),
        ];
        for b in targets {
            let p = short_path_to(&b).unwrap();
            check_endpoint(&p, &b);
            assert!(is_short(&p).unwrap());
            assert_eq!(conley_zehnder_index(&p).unwrap(), 0);
        }
    }

    #[test]
    fn extensions_end_in_u() {
        let starts = vec![
            m(quadruplet_canonical(Complex64::from_polar(2.5, 0.4))),
            diag(&[-2.0, -0.5, -1.5, -1.0 / 1.5]),
            m(block_diag(&[&rotation_block(4.0), &hyperbolic_block(-5.0)])),
            diag(&[3.0, 1.0 / 3.0, 1.7, 1.0 / 1.7]),
            diag(&[-6.0, -1.0 / 6.0]),
        ];
        for b in starts {
            let p = short_path_to(&b).unwrap();
            let (e, route) = extend_to_u_with_route(&p).unwrap();
            assert_eq!(&e.segments()[..p.segments().len()], p.segments());
            assert!(classify(&e.endpoint(), 1e-8).unwrap().region.is_elliptic());
            assert!(is_short(&e).unwrap());
            assert!(route.kinds().iter().any(|k| matches!(k, LegKind::EnterViaN(Sign::Plus))));
        }
        let r = PositivePath::constant(SympMatrix::identity(1), Generator::identity(1), 1.0).unwrap();
        let e = extend_to_u(&r).unwrap();
        assert_eq!(e.segments().len(), 2);
        assert!(e.total_duration() - 1.0 <= 1e-6 + 1e-15);

        let long = PositivePath::constant(SympMatrix::identity(1), Generator::identity(1), 7.0).unwrap();
        assert!(matches!(extend_to_u(&long), Err(Error::Precondition(_))));
    }
}
