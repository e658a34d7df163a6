//! Conley–Zehnder index, shortness and excursion counts.

use nalgebra::DMatrix;

use super::track::{eigen_trajectory, ItineraryEntry, Trajectory};
use super::PositivePath;
use crate::error::{Error, Result};
use crate::linalg::{expm, singular_values};
use crate::strata::Region;
use crate::symplectic::{j_matrix, SympMatrix};

// σ_min(A − I) at or below this (relative to ‖A‖) is a contact with 𝒮₁.
const ZERO_TOL: f64 = 1e-8;
// Local minima between ZERO_TOL and this are undecidable.
const GRAY_TOL: f64 = 1e-6;
// Singular values below this at a contact count towards its multiplicity.
const KERNEL_TOL: f64 = 1e-5;
const MAX_HALVINGS: usize = 10;
// A gray minimum whose spectrum stays this far from 1 is only ill-conditioning.
const SPECTRAL_CLEAR: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct CzReport {
    pub index: usize,
    /// Perturbation size at which the count stabilised.
    pub epsilon: f64,
    /// Perturbed contacts (t, kernel dimension) at the final ε.
    pub crossings: Vec<(f64, usize)>,
    /// Counts for the successive ε tried.
    pub counts: Vec<(f64, usize)>,
    /// Times where the unperturbed path touches 𝒮₁ non-generically
    /// (kernel dimension ≥ 2) or comes undecidably close.
    pub tangencies: Vec<f64>,
}

struct Contact {
    t: f64,
    kernel: usize,
}

fn check_origin(path: &PositivePath) -> Result<()> {
    let id = SympMatrix::identity(path.half_dim());
    if path.origin().distance(&id) > 1e-12 {
        return Err(Error::Precondition("index and shortness are defined for paths starting at the identity".into()));
    }
    if path.segments().is_empty() {
        return Err(Error::Invalid("path has no segments".into()));
    }
    Ok(())
}

fn grid_size(path: &PositivePath) -> usize {
    let speed: f64 = path
        .segments()
        .iter()
        .map(|s| s.duration * s.generator.matrix().norm())
        .sum();
    ((200.0 * speed).ceil() as usize).clamp(2000, 40_000)
}

/// Scans σ_min(e^{Jεt}A_t − I) on (0, T] and collects the contacts.
/// Returns contacts and undecidable near-misses.
fn scan(path: &PositivePath, eps: f64) -> Result<(Vec<Contact>, Vec<f64>)> {
    let total = path.total_duration();
    let n = path.half_dim();
    let jm = j_matrix(2 * n);
    let id = DMatrix::<f64>::identity(2 * n, 2 * n);
    let value = |t: f64| -> Result<DMatrix<f64>> {
        let a = path.evaluate(t)?.into_matrix();
        Ok(if eps == 0.0 { a } else { expm(&(&jm * (eps * t))) * a })
    };
    let f = |t: f64| -> Result<(f64, f64)> {
        let a = value(t)?;
        let scale = a.norm().max(1.0);
        Ok((singular_values(&(&a - &id))[0] / scale, scale))
    };
    let k = grid_size(path);
    let ts: Vec<f64> = (0..=k).map(|i| total * i as f64 / k as f64).collect();
    let fs: Vec<f64> = ts.iter().map(|&t| f(t).map(|x| x.0)).collect::<Result<_>>()?;
    let mut contacts = Vec::new();
    let mut gray = Vec::new();
    for i in 1..=k {
        let left_ok = fs[i] <= fs[i - 1];
        let right_ok = i == k || fs[i] <= fs[i + 1];
        if !(left_ok && right_ok) {
            continue;
        }
        let lo = ts[i - 1];
        let hi = if i == k { ts[k] } else { ts[i + 1] };
        let (tm, fm) = golden_min(|t| f(t).map(|x| x.0).unwrap_or(f64::INFINITY), lo, hi);
        // golden section stays inside (lo, hi); the endpoint itself may be lower
        let (tm, fm) = if i == k && fs[k] < fm { (ts[k], fs[k]) } else { (tm, fm) };
        if fm <= ZERO_TOL {
            let a = value(tm)?;
            let scale = a.norm().max(1.0);
            let kernel = singular_values(&(&a - &id)).iter().filter(|&&s| s / scale <= KERNEL_TOL).count().max(1);
            if contacts.last().map(|c: &Contact| (c.t - tm).abs() > 1e-9 * total.max(1.0)).unwrap_or(true) {
                contacts.push(Contact { t: tm, kernel });
            }
        } else if fm <= GRAY_TOL && distance_to_one(&value(tm)?) <= SPECTRAL_CLEAR {
            gray.push(tm);
        }
    }
    Ok((contacts, gray))
}

fn distance_to_one(a: &DMatrix<f64>) -> f64 {
    a.complex_eigenvalues().iter().map(|z| (z - 1.0).norm()).fold(f64::INFINITY, f64::min)
}

fn golden_min<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64) -> (f64, f64) {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..80 {
        if (b - a) <= 1e-15 * b.abs().max(1.0) {
            break;
        }
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

pub fn conley_zehnder_report(path: &PositivePath) -> Result<CzReport> {
    check_origin(path)?;
    let total = path.total_duration();
    let (base, gray) = scan(path, 0.0)?;
    let mut tangencies: Vec<f64> = base.iter().filter(|c| c.kernel >= 2).map(|c| c.t).collect();
    tangencies.extend(gray);
    tangencies.sort_by(f64::total_cmp);

    let mut eps = 1e-2 / total.max(1.0);
    let mut counts: Vec<(f64, usize)> = Vec::new();
    let mut last: Option<Vec<(f64, usize)>> = None;
    for _ in 0..=MAX_HALVINGS {
        let (cs, _) = scan(path, eps)?;
        let crossings: Vec<(f64, usize)> = cs.iter().map(|c| (c.t, c.kernel)).collect();
        let count = crossings.iter().map(|c| c.1).sum();
        if let Some(&(_, prev)) = counts.last() {
            if prev == count {
                return Ok(CzReport { index: count, epsilon: eps, crossings, counts: { counts.push((eps, count)); counts }, tangencies });
            }
        }
        counts.push((eps, count));
        last = Some(crossings);
        eps *= 0.5;
    }
    let _ = last;
    let detail = counts.iter().map(|(e, c)| format!("ε={e:.2e}: {c}")).collect::<Vec<_>>().join(", ");
    Err(Error::numerical(format!("index count did not stabilise ({detail})"), eps))
}

pub fn conley_zehnder_index(path: &PositivePath) -> Result<usize> {
    Ok(conley_zehnder_report(path)?.index)
}

/// A path from the identity is short when A_t − I stays invertible for all
/// t > 0.
pub fn is_short(path: &PositivePath) -> Result<bool> {
    check_origin(path)?;
    let (contacts, gray) = scan(path, 0.0)?;
    if !contacts.is_empty() {
        return Ok(false);
    }
    if let Some(&t) = gray.first() {
        let total = path.total_duration();
        return Err(Error::Tracking { t0: (t - 1e-3 * total).max(0.0), t1: (t + 1e-3 * total).min(total) });
    }
    Ok(conley_zehnder_index(path)? == 0)
}

fn is_circle_free(r: Region) -> bool {
    matches!(r, Region::OC | Region::ORPlus | Region::ORMinus)
}

/// Number of completed excursions into {O_C, O_R±} and back to O_U on (0, s].
pub fn excursions_from(itinerary: &[ItineraryEntry], s: f64) -> usize {
    let mut away = false;
    let mut count = 0;
    for e in itinerary.iter().filter(|e| e.start < s) {
        let r = e.label.region;
        if is_circle_free(r) {
            away = true;
        } else if r == Region::OU && away {
            count += 1;
            away = false;
        }
    }
    count
}

pub fn excursions(path: &PositivePath, s: f64) -> Result<usize> {
    if path.dim() != 4 {
        return Err(Error::UnsupportedDimension(path.dim()));
    }
    let tr = eigen_trajectory(path, 512)?;
    Ok(excursions_from(&tr.itinerary, s))
}

#[derive(Debug, Clone)]
pub struct PathDiagnostics {
    pub positive: bool,
    pub margin: f64,
    /// `None` when the path does not start at the identity.
    pub short: Option<bool>,
    pub cz_index: Option<usize>,
    /// Only for 2n = 4.
    pub excursions: Option<usize>,
    pub itinerary: Vec<ItineraryEntry>,
    pub crossing_times: Vec<f64>,
    pub tangencies: Vec<f64>,
    pub max_residual: f64,
}

pub fn diagnose(path: &PositivePath, samples: usize) -> Result<PathDiagnostics> {
    let cert = path.verify_positive();
    let tr: Trajectory = eigen_trajectory(path, samples)?;
    let from_id = check_origin(path).is_ok();
    let (short, cz_index, tangencies) = if from_id {
        let rep = conley_zehnder_report(path)?;
        let (contacts, _) = scan(path, 0.0)?;
        (Some(contacts.is_empty() && rep.index == 0), Some(rep.index), rep.tangencies)
    } else {
        (None, None, Vec::new())
    };
    let excursions = (path.dim() == 4).then(|| excursions_from(&tr.itinerary, path.total_duration()));
    Ok(PathDiagnostics {
        positive: cert.positive,
        margin: cert.margin,
        short,
        cz_index,
        excursions,
        crossing_times: tr.crossing_times(),
        itinerary: tr.itinerary,
        tangencies,
        max_residual: path.max_symplectic_residual(samples),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::paths::Segment;
    use crate::symplectic::{random_positive_generator, Generator};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn rot(n: usize, t: f64) -> PositivePath {
        PositivePath::from_identity(n, vec![Segment::new(t, Generator::identity(n))]).unwrap()
    }

    // Oracle: det(ρ((1+ε)t) − I) = 2 − 2cos((1+ε)t) vanishes at t = 2πk/(1+ε),
    // each a double root of the 2×2 determinant with a 2-dimensional kernel.
    fn rotation_oracle(t_max: f64, eps: f64) -> usize {
        let mut k = 1;
        let mut count = 0;
        while 2.0 * PI * k as f64 / (1.0 + eps) <= t_max {
            count += 2;
            k += 1;
        }
        count
    }

    #[test]
    fn rotation_indices() {
        assert_eq!(conley_zehnder_index(&rot(1, PI)).unwrap(), 0);
        assert!(is_short(&rot(1, PI)).unwrap());
        let long = rot(1, 2.0 * PI + 0.5);
        let rep = conley_zehnder_report(&long).unwrap();
        assert_eq!(rep.index, rotation_oracle(2.0 * PI + 0.5, rep.epsilon));
        assert_eq!(rep.index, 2);
        assert_eq!(rep.tangencies.len(), 1);
        assert!(!is_short(&long).unwrap());
        assert_eq!(conley_zehnder_index(&rot(1, 4.0 * PI + 1.0)).unwrap(), 4);
        assert_eq!(conley_zehnder_index(&rot(2, 2.0 * PI + 0.5)).unwrap(), 4);
    }

    #[test]
    fn index_needs_identity_origin() {
        let p = rot(1, 1.0);
        let q = p.with_origin(crate::symplectic::rotation(0.3)).unwrap();
        assert!(matches!(conley_zehnder_index(&q), Err(Error::Precondition(_))));
    }

    #[test]
    fn crossing_counts_add_up() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..4 {
            let segs: Vec<Segment> = (0..4).map(|_| Segment::new(1.2, random_positive_generator(&mut rng, 2, 0.3, 0.8))).collect();
            let whole = PositivePath::from_identity(2, segs.clone()).unwrap();
            let head = PositivePath::from_identity(2, segs[..2].to_vec()).unwrap();
            let i_whole = conley_zehnder_report(&whole).unwrap();
            let i_head = conley_zehnder_report(&head).unwrap();
            let t_head = head.total_duration();
            let junction_clear = i_whole.crossings.iter().all(|c| (c.0 - t_head).abs() > 1e-3);
            if junction_clear {
                let tail = i_whole.crossings.iter().filter(|c| c.0 > t_head).map(|c| c.1).sum::<usize>();
                assert_eq!(i_whole.index, i_head.index + tail);
            }
        }
    }

    #[test]
    fn excursion_counting() {
        let stay = rot(2, 1.0);
        assert_eq!(excursions(&stay, 1.0).unwrap(), 0);
        assert!(excursions(&rot(1, 1.0), 1.0).is_err());
    }
}
