//! Periodic linear Hamiltonian systems: monodromy, stability, strong
//! stability and the first parameter at which strong stability is lost.

use nalgebra::DMatrix;
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{expm, singular_values};
use crate::paths::{conley_zehnder_index, diagnose, eigen_trajectory, excursions_from, PositivePath, Segment};
use crate::spectral::{eigen_structure_with, EigenKind, EigenStructure};
use crate::symplectic::{random_generator, symp_exp, Generator, SympMatrix};
use crate::tol::Tolerances;

const PERIOD_TOL: f64 = 1e-12;
const SCAN_STEPS: usize = 1000;
// Relative width at which the μ₀ bisection stops.
const ROOT_TOL: f64 = 1e-12;
// σ_min(A_μ + I)/‖A_μ‖ below this at a scan minimum is a touch of −1.
const TOUCH_TOL: f64 = 1e-9;
const MAX_POWER: usize = 64;

/// One period of a 1-periodic schedule t ↦ P_t, given as (duration, P) pieces.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicSystem {
    schedule: Vec<Segment>,
}

impl PeriodicSystem {
    pub fn new(schedule: Vec<Segment>) -> Result<Self> {
        let first = schedule.first().ok_or_else(|| Error::Invalid("empty schedule".into()))?;
        let d = first.generator.dim();
        for (k, s) in schedule.iter().enumerate() {
            if s.generator.dim() != d {
                return Err(Error::Dimension(format!("piece {k} has dimension {}, expected {d}", s.generator.dim())));
            }
            if !(s.duration.is_finite() && s.duration > 0.0) {
                return Err(Error::Invalid(format!("piece {k} has duration {}", s.duration)));
            }
        }
        let total: f64 = schedule.iter().map(|s| s.duration).sum();
        if (total - 1.0).abs() > PERIOD_TOL {
            return Err(Error::Invalid(format!("durations sum to {total}, not 1")));
        }
        Ok(PeriodicSystem { schedule })
    }

    pub fn constant(p: Generator) -> Self {
        PeriodicSystem { schedule: vec![Segment::new(1.0, p)] }
    }

    pub fn schedule(&self) -> &[Segment] {
        &self.schedule
    }

    pub fn dim(&self) -> usize {
        self.schedule[0].generator.dim()
    }

    pub fn half_dim(&self) -> usize {
        self.dim() / 2
    }

    pub fn is_positive(&self) -> bool {
        self.schedule.iter().all(|s| s.generator.is_positive_definite())
    }

    /// Fundamental solution A_t of x' = μJP_tx for any t ≥ 0.
    pub fn flow(&self, mu: f64, t: f64) -> Result<SympMatrix> {
        if !(t.is_finite() && t >= 0.0) {
            return Err(Error::OutOfRange { t, total: f64::INFINITY });
        }
        let k = t.floor();
        let within = partial_period(&self.schedule, mu, t - k);
        let m = monodromy_matrix(&self.schedule, mu);
        let mut pow = DMatrix::<f64>::identity(self.dim(), self.dim());
        for _ in 0..k as usize {
            pow = &m * pow;
        }
        Ok(SympMatrix::trusted(within * pow))
    }

    /// The system over `periods` periods at parameter μ > 0, as a path from Id.
    pub fn path(&self, mu: f64, periods: usize) -> Result<PositivePath> {
        if periods == 0 {
            return Err(Error::Invalid("need at least one period".into()));
        }
        let segs: Vec<Segment> = (0..periods)
            .flat_map(|_| self.schedule.iter().map(|s| Segment::new(s.duration, s.generator.scale(mu))))
            .collect();
        PositivePath::from_identity(self.half_dim(), segs)
    }
}

fn partial_period(schedule: &[Segment], mu: f64, t: f64) -> DMatrix<f64> {
    let d = schedule[0].generator.dim();
    let mut acc = DMatrix::<f64>::identity(d, d);
    let mut left = t;
    for s in schedule {
        if left <= 0.0 {
            break;
        }
        let dt = s.duration.min(left);
        acc = expm(&(s.generator.hamiltonian() * (mu * dt))) * acc;
        left -= dt;
    }
    acc
}

fn monodromy_matrix(schedule: &[Segment], mu: f64) -> DMatrix<f64> {
    partial_period(schedule, mu, f64::INFINITY)
}

/// Time-1 map A₁ of x' = μJP_tx.
pub fn monodromy(sys: &PeriodicSystem, mu: f64) -> SympMatrix {
    SympMatrix::trusted(monodromy_matrix(&sys.schedule, mu))
}

// The grouped structure snaps near-collisions (a band quadratic in the
// distance); stability also needs the unsnapped moduli on the circle.
fn raw_on_circle(a: &SympMatrix, tol: &Tolerances) -> bool {
    a.matrix().complex_eigenvalues().iter().all(|z| (z.norm() - 1.0).abs() <= tol.circle)
}

fn circle_ok(a: &SympMatrix, s: &EigenStructure, tol: &Tolerances) -> bool {
    s.groups.iter().all(|g| g.kind.on_circle() && g.diagonalizable) && raw_on_circle(a, tol)
}

/// ‖A^64‖ / ‖A^16‖ with the intermediate ‖A^32‖ ratio; two successive
/// doublings mean the powers grow (at least) linearly.
fn power_growth(a: &DMatrix<f64>) -> (f64, f64) {
    let mut p = a.clone();
    let mut norms = vec![p.norm()];
    for _ in 1..MAX_POWER {
        p = a * &p;
        norms.push(p.norm());
    }
    let n16 = norms[15];
    let n32 = norms[31];
    let n64 = norms[63];
    (n32 / n16, n64 / n32)
}

fn powers_grow(a: &DMatrix<f64>) -> bool {
    let (r1, r2) = power_growth(a);
    r1 >= 1.8 && r2 >= 1.8
}

pub fn is_stable(a: &SympMatrix) -> bool {
    is_stable_with(a, &Tolerances::default())
}

/// All eigenvalues on the circle, every circle group semisimple, and no
/// visible growth of ‖A^k‖ for k ≤ 64.
pub fn is_stable_with(a: &SympMatrix, tol: &Tolerances) -> bool {
    match eigen_structure_with(a, tol) {
        Ok(s) => circle_ok(a, &s, tol) && !powers_grow(a.matrix()),
        Err(_) => false,
    }
}

pub fn is_strongly_stable(a: &SympMatrix) -> bool {
    is_strongly_stable_with(a, &Tolerances::default())
}

/// Spectrum in S¹ ∖ {±1} with |splitting| equal to the multiplicity for
/// every eigenvalue.
pub fn is_strongly_stable_with(a: &SympMatrix, tol: &Tolerances) -> bool {
    let Ok(s) = eigen_structure_with(a, tol) else {
        return false;
    };
    s.groups.iter().all(|g| {
        g.kind == EigenKind::CirclePair && g.splitting.map(|k| k.unsigned_abs() as usize == g.multiplicity).unwrap_or(false)
    }) && raw_on_circle(a, tol)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityReport {
    pub stable: bool,
    pub strongly_stable: bool,
    /// (label re, label im, kind, multiplicity, splitting)
    pub groups: Vec<(f64, f64, &'static str, usize, Option<i32>)>,
    /// ‖A^32‖/‖A^16‖ and ‖A^64‖/‖A^32‖; only computed for spectrally stable A.
    pub power_ratios: Option<(f64, f64)>,
}

pub fn stability_report(a: &SympMatrix, tol: &Tolerances) -> Result<StabilityReport> {
    let s = eigen_structure_with(a, tol)?;
    let spectral = circle_ok(a, &s, tol);
    let power_ratios = spectral.then(|| power_growth(a.matrix()));
    Ok(StabilityReport {
        stable: spectral && !power_ratios.map(|(r1, r2)| r1 >= 1.8 && r2 >= 1.8).unwrap_or(false),
        strongly_stable: is_strongly_stable_with(a, tol),
        groups: s.groups.iter().map(|g| (g.label.re, g.label.im, g.kind.as_str(), g.multiplicity, g.splitting)).collect(),
        power_ratios,
    })
}

/// A·exp(εJS) for a random symmetric S with ‖S‖_F = 1.
pub fn perturb<R: Rng + ?Sized>(rng: &mut R, a: &SympMatrix, size: f64) -> SympMatrix {
    let g = random_generator(rng, a.half_dim(), 1.0);
    let g = g.scale(1.0 / g.matrix().norm().max(f64::MIN_POSITIVE));
    let e = symp_exp(&g, size).expect("finite perturbation");
    a.mul(&e)
}

fn touch_measure(sys: &PeriodicSystem, mu: f64) -> f64 {
    let a = monodromy_matrix(&sys.schedule, mu);
    let d = a.nrows();
    singular_values(&(&a + DMatrix::<f64>::identity(d, d)))[0] / a.norm().max(1.0)
}

fn det_plus_id(sys: &PeriodicSystem, mu: f64) -> f64 {
    let a = monodromy_matrix(&sys.schedule, mu);
    let d = a.nrows();
    (a + DMatrix::<f64>::identity(d, d)).determinant()
}

/// Smallest μ in (0, μ_max] at which A_μ has eigenvalue −1, or `None` when
/// there is none. Requires a positive definite schedule.
pub fn critical_mu(sys: &PeriodicSystem, mu_max: f64) -> Result<Option<f64>> {
    if !(mu_max.is_finite() && mu_max > 0.0) {
        return Err(Error::Invalid(format!("μ_max = {mu_max}")));
    }
    if !sys.is_positive() {
        return Err(Error::Precondition("critical μ needs every P_t positive definite".into()));
    }
    let h = mu_max / SCAN_STEPS as f64;
    let mus: Vec<f64> = (0..=SCAN_STEPS).map(|k| k as f64 * h).collect();
    let g: Vec<f64> = mus.iter().map(|&m| det_plus_id(sys, m)).collect();
    let s: Vec<f64> = mus.iter().map(|&m| touch_measure(sys, m)).collect();
    for k in 1..=SCAN_STEPS {
        // odd crossing: det(A_μ + I) changes sign
        if g[k] == 0.0 {
            return Ok(Some(mus[k]));
        }
        if g[k - 1].signum() != g[k].signum() {
            return Ok(Some(bisect(|m| det_plus_id(sys, m), mus[k - 1], mus[k], g[k - 1])));
        }
        // even touch: σ_min(A_μ + I) has a local minimum near zero
        let right = if k < SCAN_STEPS { s[k + 1] } else { f64::INFINITY };
        if s[k] <= s[k - 1] && s[k] <= right {
            let hi = if k < SCAN_STEPS { mus[k + 1] } else { mus[k] };
            let (m, v) = golden_min(|m| touch_measure(sys, m), mus[k - 1], hi);
            if v <= TOUCH_TOL {
                return Ok(Some(m));
            }
        }
    }
    Ok(None)
}

fn bisect<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, mut fa: f64) -> f64 {
    while b - a > ROOT_TOL * b.abs().max(f64::MIN_POSITIVE) {
        let m = 0.5 * (a + b);
        let fm = f(m);
        if fm == 0.0 {
            return m;
        }
        if fm.signum() == fa.signum() {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

fn golden_min<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64) -> (f64, f64) {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > 1e-15 * b.abs().max(1.0) {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    if fc < fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExcursionRecord {
    pub excursions: usize,
    pub cz_index: usize,
    pub short: bool,
    pub stable_endpoint: bool,
    pub violations: Vec<String>,
}

/// e_A ≤ i_A + 1 for every path, and e_A ≤ 1 for short ones. Paths must start
/// at Id in Sp(4).
pub fn excursion_index_check(paths: &[PositivePath], samples: usize) -> Result<Vec<ExcursionRecord>> {
    paths.iter().map(|p| excursion_record(p, samples)).collect()
}

fn excursion_record(p: &PositivePath, samples: usize) -> Result<ExcursionRecord> {
    if p.dim() != 4 {
        return Err(Error::UnsupportedDimension(p.dim()));
    }
    let d = diagnose(p, samples)?;
    let (Some(short), Some(cz_index), Some(excursions)) = (d.short, d.cz_index, d.excursions) else {
        return Err(Error::Precondition("excursion check needs paths from the identity".into()));
    };
    let mut violations = Vec::new();
    if excursions > cz_index + 1 {
        violations.push(format!("e = {excursions} exceeds i + 1 = {}", cz_index + 1));
    }
    if short && excursions > 1 {
        violations.push(format!("short path with e = {excursions}"));
    }
    Ok(ExcursionRecord { excursions, cz_index, short, stable_endpoint: is_stable(&p.endpoint()), violations })
}

/// e_A(t) at t = 1, …, periods for the iterated system, with i_A(1).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExcursionGrowth {
    pub index_one_period: usize,
    pub counts: Vec<(usize, usize)>,
    /// max over t of (e_A(t) − 1)/(i_A(1)·t); measured, not a bound.
    pub constant: Option<f64>,
}

pub fn excursion_growth(sys: &PeriodicSystem, mu: f64, periods: usize, samples: usize) -> Result<ExcursionGrowth> {
    if sys.dim() != 4 {
        return Err(Error::UnsupportedDimension(sys.dim()));
    }
    let one = sys.path(mu, 1)?;
    let i1 = conley_zehnder_index(&one)?;
    let path = sys.path(mu, periods)?;
    let tr = eigen_trajectory(&path, samples * periods)?;
    let counts: Vec<(usize, usize)> = (1..=periods).map(|k| (k, excursions_from(&tr.itinerary, k as f64 + 1e-12))).collect();
    let constant = (i1 > 0).then(|| {
        counts.iter().map(|&(k, e)| (e as f64 - 1.0).max(0.0) / (i1 * k) as f64).fold(0.0, f64::max)
    });
    Ok(ExcursionGrowth { index_one_period: i1, counts, constant })
}
