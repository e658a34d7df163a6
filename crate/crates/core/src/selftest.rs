//! The acceptance checks, shared by the `acceptance` test target and the
//! CLI `selftest` verb. Each check returns one [`Outcome`].

use std::f64::consts::PI;
use std::time::Instant;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::linalg::{block_diag, CVec};
use crate::paths::{conley_zehnder_index, diagnose, eigen_trajectory, is_short, PositivePath, Segment, Trajectory};
use crate::spectral::{krein_form, splitting_number, EigenKind};
use crate::stability::{critical_mu, is_stable, is_strongly_stable, monodromy, perturb, PeriodicSystem};
use crate::steering::blocks::br_witness;
use crate::steering::{extend_to_u, short_path_to};
use crate::strata::{br_canonical, classify, hyperbolic_block, quadruplet_canonical, rotation_block, Region, Sign};
use crate::symplectic::{random_positive_generator, random_symplectic, rotation, Generator, SympMatrix};

#[derive(Debug, Clone)]
pub struct Outcome {
    pub id: usize,
    pub title: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
    pub budget: f64,
    /// Largest symplecticity residual over the paths this check integrated.
    pub max_residual: f64,
}

impl Outcome {
    pub fn line(&self) -> String {
        format!(
            "[{}] {:>2} {} — {} ({:.2}s of {:.0}s)",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.title,
            self.detail,
            self.seconds,
            self.budget
        )
    }
}

pub const COUNT: usize = 10;

const TITLES: [&str; COUNT] = [
    "Krein form and splitting numbers",
    "double real pair bifurcation",
    "parity gate for short paths",
    "extension of short paths into O_U",
    "short positive paths in Sp(2)",
    "Krein monotonicity and departures in Sp(4)",
    "strong stability versus perturbation sampling",
    "critical parameter of constant systems",
    "excursions versus index",
    "symplectic conservation and rotation index",
];

const BUDGETS: [f64; COUNT] = [1.0, 5.0, 30.0, 120.0, 120.0, 180.0, 180.0, 10.0, 300.0, 60.0];

struct Check {
    passed: bool,
    detail: String,
    residual: f64,
}

fn finish(id: usize, start: Instant, c: Check) -> Outcome {
    let seconds = start.elapsed().as_secs_f64();
    let budget = BUDGETS[id - 1];
    let mut detail = c.detail;
    if seconds > budget {
        detail.push_str("; over the time budget");
    }
    Outcome { id, title: TITLES[id - 1], passed: c.passed && seconds <= budget, detail, seconds, budget, max_residual: c.residual }
}

/// Runs check `id` (1-based). Check 10 folds in the residuals of `earlier`.
pub fn run(id: usize, seed: u64, earlier: &[Outcome]) -> Outcome {
    let start = Instant::now();
    let c = match id {
        1 => krein_fidelity(),
        2 => bifurcation(),
        3 => parity_gate(),
        4 => extensions(seed),
        5 => sp2_suite(seed),
        6 => sp4_monotonicity(seed),
        7 => strong_stability(seed),
        8 => critical_parameter(),
        9 => excursion_bounds(seed),
        10 => conservation(earlier),
        _ => Check { passed: false, detail: format!("no check {id}"), residual: 0.0 },
    };
    finish(id.clamp(1, COUNT), start, c)
}

pub fn run_all(seed: u64) -> Vec<Outcome> {
    let mut out: Vec<Outcome> = Vec::with_capacity(COUNT);
    for id in 1..=COUNT {
        let o = run(id, seed, &out);
        out.push(o);
    }
    out
}

fn err_check(e: impl std::fmt::Display) -> Check {
    Check { passed: false, detail: format!("error: {e}"), residual: 0.0 }
}

fn residual_of(p: &PositivePath) -> f64 {
    p.max_symplectic_residual(64)
}

fn diag(v: &[f64]) -> SympMatrix {
    let blocks: Vec<DMatrix<f64>> = v.chunks(2).map(|c| DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(c))).collect();
    let refs: Vec<&DMatrix<f64>> = blocks.iter().collect();
    SympMatrix::trusted(block_diag(&refs))
}

fn krein_fidelity() -> Check {
    let v = CVec::from_vec(vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, -1.0)]);
    let beta = match krein_form(&v, &v) {
        Ok(b) => b,
        Err(e) => return err_check(e),
    };
    let r = rotation(PI / 2.0);
    let (sp, sm) = match (splitting_number(&r, Complex64::i()), splitting_number(&r, -Complex64::i())) {
        (Ok(a), Ok(b)) => (a, b),
        (Err(e), _) | (_, Err(e)) => return err_check(e),
    };
    let ok = (beta - 2.0).norm() <= 1e-12 && sp == 1 && sm == -1;
    Check { passed: ok, detail: format!("β = {beta:.3}, σ(i) = {sp:+}, σ(−i) = {sm:+}"), residual: 0.0 }
}

fn disc_of(m: &DMatrix<f64>) -> f64 {
    let s1 = m.trace();
    let s2 = (s1 * s1 - (m * m).trace()) / 2.0;
    s2 - s1 * s1 / 4.0
}

fn bifurcation() -> Check {
    let p = crate::steering::bifurcation_generator();
    let jp = p.hamiltonian();
    let id = DMatrix::<f64>::identity(4, 4);
    let lambda: f64 = 2.0;
    let h = 1e-5;
    let mut ok = true;
    let mut parts = Vec::new();
    let mut residual: f64 = 0.0;
    for (alpha, want) in [(-1.0, Region::OC), (1.0, Region::ORPlus)] {
        let a = br_canonical(lambda, alpha);
        let f = |t: f64| disc_of(&((&id + &jp * t) * &a));
        let fd = (f(h) - f(-h)) / (2.0 * h);
        let expect = -2.0 * alpha * (lambda.sqrt() - lambda.powf(-1.5)).powi(2);
        let w = br_witness(lambda, alpha, 0.05, 0.05);
        residual = residual.max(residual_of(&w));
        let entered = match eigen_trajectory(&w, 256) {
            Ok(tr) => tr.itinerary.iter().skip_while(|e| e.label.region != Region::BR).any(|e| e.label.region == want),
            Err(e) => return err_check(e),
        };
        ok &= (fd - expect).abs() <= 1e-4 && entered && (expect - (-2.25 * alpha)).abs() <= 1e-12;
        parts.push(format!("α = {alpha:+}: d/dt = {fd:.6} (expect {expect:.6}), enters {}: {entered}", want.as_str()));
    }
    Check { passed: ok, detail: parts.join("; "), residual }
}

fn endpoint_ok(p: &PositivePath, b: &SympMatrix) -> bool {
    p.endpoint().distance(b) <= 1e-6 * b.norm().max(1.0)
}

fn parity_gate() -> Check {
    let gate = matches!(short_path_to(&diag(&[2.0, 0.5])), Err(crate::Error::Infeasible { ref rule, .. }) if rule == "parity");
    let b = diag(&[2.0, 0.5, 3.0, 1.0 / 3.0]);
    let p = match short_path_to(&b) {
        Ok(p) => p,
        Err(e) => return Check { passed: false, detail: format!("parity error raised: {gate}; double pair failed: {e}"), residual: 0.0 },
    };
    let cert = p.verify_positive();
    let short = is_short(&p).unwrap_or(false);
    let err = p.endpoint().distance(&b);
    let ok = gate && cert.positive && cert.margin > 0.0 && short && err <= 1e-6;
    Check {
        passed: ok,
        detail: format!("parity error raised: {gate}; margin {:.3e}, short {short}, endpoint error {err:.2e}", cert.margin),
        residual: residual_of(&p),
    }
}

/// Random targets in O_C, O_R⁻ and O_UR, conjugated by moderate random
/// symplectic matrices.
fn extension_targets(rng: &mut ChaCha8Rng, per: usize) -> Vec<(Region, SympMatrix)> {
    let mut out = Vec::new();
    for k in 0..3 * per {
        let x = random_symplectic(rng, 2, 0.25);
        let (region, canon) = match k % 3 {
            0 => {
                let l = Complex64::from_polar(rng.random_range(1.2..2.5), rng.random_range(0.3..PI - 0.3));
                (Region::OC, quadruplet_canonical(l))
            }
            1 => {
                let a = rng.random_range(1.3..3.0);
                let b = rng.random_range(1.3..3.0);
                (Region::ORMinus, diag(&[-a, -1.0 / a, -b, -1.0 / b]).into_matrix())
            }
            _ => {
                let t = rng.random_range(0.3..2.0 * PI - 0.3);
                let a = rng.random_range(1.3..3.0);
                (Region::OUR, block_diag(&[&rotation_block(t), &hyperbolic_block(-a)]))
            }
        };
        let m = x.matrix() * canon * x.inverse().matrix();
        out.push((region, SympMatrix::trusted(m)));
    }
    out
}

fn extensions(seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x4e78);
    let targets = extension_targets(&mut rng, 25);
    let mut failures = Vec::new();
    let mut residual: f64 = 0.0;
    for (k, (region, b)) in targets.iter().enumerate() {
        let r = (|| -> crate::Result<bool> {
            if classify(b, 1e-8)?.region != *region {
                return Ok(false);
            }
            let p = short_path_to(b)?;
            let e = extend_to_u(&p)?;
            residual = residual.max(residual_of(&e));
            Ok(endpoint_ok(&p, b) && classify(&e.endpoint(), 1e-8)?.region.is_elliptic() && is_short(&e)?)
        })();
        match r {
            Ok(true) => {}
            Ok(false) => failures.push(format!("#{k} ({})", region.as_str())),
            Err(e) => failures.push(format!("#{k} ({}): {e}", region.as_str())),
        }
    }
    Check {
        passed: failures.is_empty(),
        detail: format!("{} paths, {} failures{}", targets.len(), failures.len(), summarize(&failures)),
        residual,
    }
}

fn summarize(items: &[String]) -> String {
    if items.is_empty() {
        String::new()
    } else {
        format!(" [{}]", items.iter().take(3).cloned().collect::<Vec<_>>().join("; "))
    }
}

fn random_positive_path(rng: &mut ChaCha8Rng, n: usize, origin: SympMatrix, segments: usize, dur: f64) -> PositivePath {
    let eccentric = rng.random_bool(0.5);
    let segs = (0..segments)
        .map(|_| {
            if eccentric {
                let (p, omega) = eccentric_generator(rng, n);
                Segment::new(rng.random_range(0.3..0.6) * PI / omega, p)
            } else {
                let spread = rng.random_range(0.2..1.2);
                Segment::new(rng.random_range(0.2..1.0) * dur, random_positive_generator(rng, n, 0.05, spread))
            }
        })
        .collect();
    PositivePath::new(origin, segs).expect("valid random path")
}

/// QᵀDQ with D = c·diag(a, 1/a, …) and Q a random rotation; its flow turns
/// ellipses with frequency c. Alternating axes push the product off the
/// circle.
fn eccentric_generator(rng: &mut ChaCha8Rng, n: usize) -> (Generator, f64) {
    let d = 2 * n;
    let c = rng.random_range(0.5..2.0);
    let mut diag = Vec::with_capacity(d);
    for _ in 0..n {
        let a: f64 = rng.random_range(2.0..8.0);
        diag.extend([c * a, c / a]);
    }
    let g = DMatrix::<f64>::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0));
    let q = g.qr().q();
    let p = q.transpose() * DMatrix::from_diagonal(&nalgebra::DVector::from_vec(diag)) * &q;
    (Generator::from_symmetric_part(&p), c)
}

/// Angle of the positive-Krein eigenvalue of a simple circle pair, in (0, 2π).
fn positive_angle(label: Complex64, splitting: i32) -> f64 {
    let a = label.arg();
    if splitting > 0 {
        a
    } else {
        2.0 * PI - a
    }
}

fn legal_transitions(tr: &Trajectory) -> Result<(), String> {
    for c in &tr.crossings {
        let sign = c.via.nilpotent_sign;
        if c.from.is_elliptic() && c.to.is_off_circle() && sign != Some(Sign::Minus) {
            return Err(format!("left the circle at t = {:.4} via {}", c.t, c.via));
        }
        if c.from.is_off_circle() && c.to.is_elliptic() && sign != Some(Sign::Plus) {
            return Err(format!("entered the circle at t = {:.4} via {}", c.t, c.via));
        }
    }
    Ok(())
}

fn sp2_path_violation(tr: &Trajectory) -> Option<String> {
    let first = tr.itinerary.iter().find(|e| e.end > 0.0 && e.label.region.is_open()).map(|e| e.label.region);
    if first != Some(Region::OUPlus) {
        return Some(format!("first stratum {first:?}"));
    }
    if tr.visits(Region::ORPlus) {
        return Some("visited O_R_plus".into());
    }
    if let Err(e) = legal_transitions(tr) {
        return Some(e);
    }
    let mut last: Option<f64> = None;
    for s in tr.samples.iter().skip(1) {
        let g = &s.structure.groups;
        match g.as_slice() {
            [grp] if grp.kind == EigenKind::CirclePair => {
                if let Some(k) = grp.splitting {
                    let th = positive_angle(grp.label, k);
                    if let Some(prev) = last {
                        if th < prev - 1e-9 {
                            return Some(format!("θ decreased at t = {:.4}: {prev:.6} → {th:.6}", s.t));
                        }
                    }
                    last = Some(th);
                }
            }
            _ => {}
        }
    }
    None
}

fn sp2_suite(seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5052);
    let (mut done, mut tries, mut left_circle) = (0, 0, 0);
    let mut violations = Vec::new();
    let mut residual: f64 = 0.0;
    while done < 300 && tries < 3000 {
        tries += 1;
        let segs = rng.random_range(1..=4);
        let p = random_positive_path(&mut rng, 1, SympMatrix::identity(1), segs, 1.2);
        if !p.verify_positive().positive || !is_short(&p).unwrap_or(false) {
            continue;
        }
        done += 1;
        residual = residual.max(residual_of(&p));
        match eigen_trajectory(&p, 256) {
            Ok(tr) => {
                if tr.crossings.iter().any(|c| c.to.is_off_circle()) {
                    left_circle += 1;
                }
                if let Some(v) = sp2_path_violation(&tr) {
                    violations.push(format!("#{done}: {v}"));
                }
            }
            Err(e) => violations.push(format!("#{done}: {e}")),
        }
    }
    Check {
        passed: done == 300 && violations.is_empty(),
        detail: format!("{done} short paths ({left_circle} leave the circle), {} violations{}", violations.len(), summarize(&violations)),
        residual,
    }
}

fn sp4_violation(tr: &Trajectory) -> Option<String> {
    for w in tr.samples.windows(2) {
        for g in &w[1].groups {
            let Some(prev) = w[0].groups.iter().find(|h| h.track == g.track) else { continue };
            let simple = |x: &crate::spectral::EigenGroup| x.kind == EigenKind::CirclePair && x.multiplicity == 1;
            if !(simple(&g.group) && simple(&prev.group)) {
                continue;
            }
            let (Some(k0), Some(k1)) = (prev.group.splitting, g.group.splitting) else { continue };
            if k0 != k1 {
                continue;
            }
            let d = g.group.label.arg() - prev.group.label.arg();
            if (k1 > 0 && d < -1e-9) || (k1 < 0 && d > 1e-9) {
                return Some(format!("track {} turned clockwise at t = {:.4}", g.track, w[1].t));
            }
        }
    }
    for c in &tr.crossings {
        if let Some(s) = c.departure_splitting {
            if s != 0 {
                return Some(format!("departure at t = {:.4} with splitting {s}", c.t));
            }
        }
    }
    None
}

fn sp4_monotonicity(seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5054);
    let mut violations = Vec::new();
    let (mut departures, mut skipped) = (0, 0);
    let mut residual: f64 = 0.0;
    for k in 0..200 {
        let origin = if k % 2 == 0 { SympMatrix::identity(2) } else { random_symplectic(&mut rng, 2, 0.3) };
        let segs = rng.random_range(1..=4);
        let p = random_positive_path(&mut rng, 2, origin, segs, 1.5);
        residual = residual.max(residual_of(&p));
        match eigen_trajectory(&p, 256) {
            Ok(tr) => {
                departures += tr.crossings.iter().filter(|c| c.departure_splitting.is_some()).count();
                if let Some(v) = sp4_violation(&tr) {
                    violations.push(format!("#{k}: {v}"));
                }
            }
            Err(crate::Error::Tracking { .. }) => skipped += 1,
            Err(e) => violations.push(format!("#{k}: {e}")),
        }
    }
    Check {
        passed: violations.is_empty() && skipped <= 10,
        detail: format!(
            "200 paths, {departures} circle departures, {skipped} untrackable, {} violations{}",
            violations.len(),
            summarize(&violations)
        ),
        residual,
    }
}

/// 50 stable matrices: 30 strongly stable, 20 not.
fn stability_samples(rng: &mut ChaCha8Rng) -> Vec<(bool, SympMatrix)> {
    let mut out = Vec::new();
    for k in 0..50 {
        let x = random_symplectic(rng, 2, 0.2);
        let t1 = rng.random_range(0.4..1.3);
        let t2 = t1 + rng.random_range(0.5..1.3);
        let (strong, canon) = match k % 5 {
            0 => (true, block_diag(&[&rotation_block(t1), &rotation_block(t2)])),
            1 => (true, block_diag(&[&rotation_block(t1), &rotation_block(-t2)])),
            2 => (true, block_diag(&[&rotation_block(t1), &rotation_block(t1)])),
            3 => (false, block_diag(&[&rotation_block(t1), &rotation_block(-t1)])),
            _ => match (k / 5) % 3 {
                0 => (false, -DMatrix::<f64>::identity(4, 4)),
                1 => (false, DMatrix::<f64>::identity(4, 4)),
                _ => (false, block_diag(&[&rotation_block(t1), &(-DMatrix::<f64>::identity(2, 2))])),
            },
        };
        out.push((strong, SympMatrix::trusted(x.matrix() * canon * x.inverse().matrix())));
    }
    out
}

fn strong_stability(seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5353);
    let samples = stability_samples(&mut rng);
    let mut mismatches = Vec::new();
    let mut strong_count = 0;
    for (k, (expect, a)) in samples.iter().enumerate() {
        if !is_stable(a) {
            mismatches.push(format!("#{k} not stable"));
            continue;
        }
        let claimed = is_strongly_stable(a);
        strong_count += claimed as usize;
        let sampled = if claimed {
            (0..1000).all(|_| is_stable(&perturb(&mut rng, a, 1e-5)))
        } else {
            (0..1000).any(|_| !is_stable(&perturb(&mut rng, a, 1e-3)))
        };
        if claimed != *expect || !sampled {
            mismatches.push(format!("#{k}: classified {claimed}, expected {expect}, sampling agrees {sampled}"));
        }
    }
    Check {
        passed: mismatches.is_empty(),
        detail: format!("50 matrices ({strong_count} strongly stable), {} disagreements{}", mismatches.len(), summarize(&mismatches)),
        residual: 0.0,
    }
}

fn critical_parameter() -> Check {
    let mut parts = Vec::new();
    let mut ok = true;
    for (c, expect) in [(1.0, PI), (2.0, PI / 2.0)] {
        let sys = PeriodicSystem::constant(Generator::scaled_identity(1, c));
        match critical_mu(&sys, 10.0) {
            Ok(Some(mu0)) => {
                let strong = [0.1, 0.5, 0.9].iter().all(|f| is_strongly_stable(&monodromy(&sys, f * mu0)));
                ok &= (mu0 - expect).abs() <= 1e-8 && strong;
                parts.push(format!("P = {c}·Id: μ₀ = {mu0:.12} (error {:.1e}), strongly stable below: {strong}", (mu0 - expect).abs()));
            }
            Ok(None) => return Check { passed: false, detail: format!("no μ₀ for P = {c}·Id"), residual: 0.0 },
            Err(e) => return err_check(e),
        }
    }
    Check { passed: ok, detail: parts.join("; "), residual: 0.0 }
}

fn excursion_bounds(seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x4558);
    let mut residual: f64 = 0.0;
    let mut violations = Vec::new();
    let (mut short_done, mut free_done, mut tries, mut skipped, mut with_excursion) = (0, 0, 0, 0, 0);
    while (short_done < 200 || free_done < 200) && tries < 20_000 {
        tries += 1;
        let want_short = short_done < 200;
        let segs = rng.random_range(2..=5);
        let dur = if want_short { 0.8 } else { 2.0 };
        let p = random_positive_path(&mut rng, 2, SympMatrix::identity(2), segs, dur);
        if !is_stable(&p.endpoint()) || !p.verify_positive().positive {
            continue;
        }
        let d = match diagnose(&p, 256) {
            Ok(d) => d,
            Err(_) => {
                skipped += 1;
                continue;
            }
        };
        let (Some(short), Some(i), Some(e)) = (d.short, d.cz_index, d.excursions) else { continue };
        if want_short && !short {
            continue;
        }
        residual = residual.max(d.max_residual);
        with_excursion += (e > 0) as usize;
        if short && want_short {
            short_done += 1;
            if e > 1 {
                violations.push(format!("short path with e = {e}"));
            }
        } else {
            free_done += 1;
            if e > i + 1 {
                violations.push(format!("e = {e} > i + 1 = {}", i + 1));
            }
        }
    }
    let complete = short_done == 200 && free_done == 200;
    let growth = iterated_constant(&mut rng);
    Check {
        passed: complete && violations.is_empty() && skipped * 10 <= short_done + free_done,
        detail: format!(
            "{short_done} short + {free_done} unrestricted stable paths ({with_excursion} with excursions, {skipped} undiagnosable), {} violations{}; {growth}",
            violations.len(),
            summarize(&violations)
        ),
        residual,
    }
}

/// Report only: e_A(t) over five periods of random stable systems, and the
/// smallest C with e_A(t) ≤ C·i_A(1)·⌊t⌋ + 1.
fn iterated_constant(rng: &mut ChaCha8Rng) -> String {
    let mut worst: Option<f64> = None;
    let mut used = 0;
    for _ in 0..200 {
        if used == 5 {
            break;
        }
        let (p1, _) = eccentric_generator(rng, 2);
        let p2 = random_positive_generator(rng, 2, 0.1, 0.6);
        let Ok(sys) = PeriodicSystem::new(vec![Segment::new(0.5, p1), Segment::new(0.5, p2)]) else { continue };
        let mu = rng.random_range(2.0..6.0);
        if !is_stable(&monodromy(&sys, mu)) {
            continue;
        }
        if let Ok(g) = crate::stability::excursion_growth(&sys, mu, 5, 128) {
            used += 1;
            if let Some(c) = g.constant {
                worst = Some(worst.map_or(c, |w: f64| w.max(c)));
            }
        }
    }
    match worst {
        Some(c) => format!("iterated systems: empirical C = {c:.3} over {used}"),
        None => format!("iterated systems: no index growth over {used}"),
    }
}

fn conservation(earlier: &[Outcome]) -> Check {
    let p = PositivePath::from_identity(1, vec![Segment::new(2.0 * PI + 0.5, Generator::identity(1))]).expect("rotation path");
    let index = conley_zehnder_index(&p);
    let residual = earlier.iter().map(|o| o.max_residual).fold(residual_of(&p), f64::max);
    let ok = residual <= 1e-8 && index.as_ref().map(|&i| i == 2).unwrap_or(false);
    Check {
        passed: ok,
        detail: format!("max residual {residual:.2e} over {} earlier checks, rotation index {index:?}", earlier.len()),
        residual,
    }
}
