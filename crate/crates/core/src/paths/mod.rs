//! Piecewise positive paths: segments of constant generator applied to an
//! origin, plus diagnostics (tracking, itinerary, index, excursions).

mod index;
mod track;

pub use index::{
    conley_zehnder_index, conley_zehnder_report, diagnose, excursions, excursions_from, is_short, CzReport,
    PathDiagnostics,
};
pub use track::{eigen_trajectory, Crossing, ItineraryEntry, TrackedGroup, Trajectory, TrajectorySample};

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{expm, inf_norm, symmetrize};
use crate::symplectic::{j_matrix, symplectic_residual, Generator, SympMatrix};

#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub duration: f64,
    pub generator: Generator,
}

impl Segment {
    pub fn new(duration: f64, generator: Generator) -> Self {
        Segment { duration, generator }
    }
}

/// `value(t) = exp(JPₖτ)·…·exp(JP₁d₁)·origin`.
#[derive(Debug, Clone)]
pub struct PositivePath {
    origin: SympMatrix,
    segments: Vec<Segment>,
    starts: Vec<f64>,
    // value at the start of each segment, plus the endpoint
    prefix: Vec<DMatrix<f64>>,
}

impl PartialEq for PositivePath {
    fn eq(&self, other: &Self) -> bool {
        self.origin == other.origin && self.segments == other.segments
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PositivityCertificate {
    pub positive: bool,
    /// Smallest eigenvalue of any generator on the path.
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorSample {
    pub p: Generator,
    /// t sits on a junction; `p` is the right-hand value there (left-hand at
    /// the final time).
    pub corner: bool,
}

impl PositivePath {
    pub fn new(origin: SympMatrix, segments: Vec<Segment>) -> Result<Self> {
        let d = origin.dim();
        for (k, s) in segments.iter().enumerate() {
            if s.generator.dim() != d {
                return Err(Error::Dimension(format!("segment {k} has dimension {}, origin {d}", s.generator.dim())));
            }
            if !(s.duration.is_finite() && s.duration > 0.0) {
                return Err(Error::Invalid(format!("segment {k} has duration {}", s.duration)));
            }
        }
        let mut starts = Vec::with_capacity(segments.len());
        let mut prefix = Vec::with_capacity(segments.len() + 1);
        let mut acc = origin.matrix().clone();
        let mut t = 0.0;
        for s in &segments {
            starts.push(t);
            prefix.push(acc.clone());
            acc = expm(&(s.generator.hamiltonian() * s.duration)) * acc;
            t += s.duration;
        }
        prefix.push(acc);
        Ok(PositivePath { origin, segments, starts, prefix })
    }

    pub fn from_identity(n: usize, segments: Vec<Segment>) -> Result<Self> {
        Self::new(SympMatrix::identity(n), segments)
    }

    /// One segment of generator `p` and the given duration.
    pub fn constant(origin: SympMatrix, p: Generator, duration: f64) -> Result<Self> {
        Self::new(origin, vec![Segment::new(duration, p)])
    }

    pub fn origin(&self) -> &SympMatrix {
        &self.origin
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn dim(&self) -> usize {
        self.origin.dim()
    }

    pub fn half_dim(&self) -> usize {
        self.origin.half_dim()
    }

    pub fn total_duration(&self) -> f64 {
        self.segments.iter().map(|s| s.duration).sum()
    }

    pub fn breakpoints(&self) -> Vec<f64> {
        let mut b = self.starts.clone();
        b.push(self.total_duration());
        b
    }

    /// Value at the start of segment `k`.
    pub(crate) fn segments_prefix(&self, k: usize) -> DMatrix<f64> {
        self.prefix[k].clone()
    }

    pub fn endpoint(&self) -> SympMatrix {
        SympMatrix::trusted(self.prefix.last().cloned().unwrap_or_else(|| self.origin.matrix().clone()))
    }

    fn locate(&self, t: f64) -> Result<(usize, f64)> {
        let total = self.total_duration();
        let slack = 1e-12 * total.max(1.0);
        if !(t >= -slack && t <= total + slack) {
            return Err(Error::OutOfRange { t, total });
        }
        if self.segments.is_empty() {
            return Ok((0, 0.0));
        }
        let t = t.clamp(0.0, total);
        let k = match self.starts.binary_search_by(|s| s.total_cmp(&t)) {
            Ok(k) => k,
            Err(k) => k - 1,
        };
        let tau = (t - self.starts[k]).min(self.segments[k].duration);
        Ok((k, tau))
    }

    pub fn evaluate(&self, t: f64) -> Result<SympMatrix> {
        let (k, tau) = self.locate(t)?;
        if self.segments.is_empty() {
            return Ok(self.origin.clone());
        }
        let seg = &self.segments[k];
        Ok(SympMatrix::trusted(expm(&(seg.generator.hamiltonian() * tau)) * &self.prefix[k]))
    }

    pub fn generator_at(&self, t: f64) -> Result<GeneratorSample> {
        let (k, tau) = self.locate(t)?;
        if self.segments.is_empty() {
            return Err(Error::Invalid("path has no segments".into()));
        }
        let total = self.total_duration();
        let eps = 1e-12 * total.max(1.0);
        let at_end = (t - total).abs() <= eps;
        let corner = (k > 0 && tau <= eps) || (at_end && self.segments.len() > 1);
        Ok(GeneratorSample { p: self.segments[k].generator.clone(), corner })
    }

    pub fn verify_positive(&self) -> PositivityCertificate {
        let margin = self.segments.iter().map(|s| s.generator.min_eigenvalue()).fold(f64::INFINITY, f64::min);
        PositivityCertificate { positive: margin > 0.0 && !self.segments.is_empty(), margin }
    }

    /// X⁻¹·γ(t)·X, with generators XᵀPX.
    pub fn conjugate(&self, x: &SympMatrix) -> Result<PositivePath> {
        let origin = crate::symplectic::conjugate(&self.origin, x)?;
        let segments = self
            .segments
            .iter()
            .map(|s| Segment::new(s.duration, s.generator.congruence(x.matrix())))
            .collect();
        PositivePath::new(origin, segments)
    }

    /// Same curve on a new origin; only the segments are kept.
    pub fn with_origin(&self, origin: SympMatrix) -> Result<PositivePath> {
        PositivePath::new(origin, self.segments.clone())
    }

    /// Runs the same curve `c` times faster.
    pub fn time_scaled(&self, c: f64) -> Result<PositivePath> {
        let segs = self.segments.iter().map(|s| Segment::new(s.duration / c, s.generator.scale(c))).collect();
        PositivePath::new(self.origin.clone(), segs)
    }

    pub fn then(&self, more: &[Segment]) -> Result<PositivePath> {
        let mut segs = self.segments.clone();
        segs.extend_from_slice(more);
        PositivePath::new(self.origin.clone(), segs)
    }

    /// Largest relative symplecticity residual over `samples` evenly spaced
    /// times and every junction.
    pub fn max_symplectic_residual(&self, samples: usize) -> f64 {
        let total = self.total_duration();
        let mut worst: f64 = self.prefix.iter().map(symplectic_residual).fold(0.0, f64::max);
        for k in 0..samples.max(2) {
            let t = total * k as f64 / (samples.max(2) - 1) as f64;
            if let Ok(a) = self.evaluate(t) {
                worst = worst.max(a.residual());
            }
        }
        worst
    }
}

pub fn evaluate(path: &PositivePath, t: f64) -> Result<SympMatrix> {
    path.evaluate(t)
}

pub fn verify_positive(path: &PositivePath) -> PositivityCertificate {
    path.verify_positive()
}

pub fn conjugate_path(path: &PositivePath, x: &SympMatrix) -> Result<PositivePath> {
    path.conjugate(x)
}

const JUNCTION_TOL: f64 = 1e-8;

/// Joins paths end to end; each later path is re-based exactly on the
/// running endpoint.
pub fn concat(paths: &[PositivePath]) -> Result<PositivePath> {
    let first = paths.first().ok_or_else(|| Error::Invalid("nothing to concatenate".into()))?;
    let mut segs = first.segments.clone();
    let mut end = first.endpoint();
    for (k, p) in paths.iter().enumerate().skip(1) {
        let gap = end.distance(p.origin());
        if gap > JUNCTION_TOL * end.norm().max(1.0) {
            return Err(Error::Invalid(format!("path {k} starts {gap:.3e} away from the previous endpoint")));
        }
        segs.extend_from_slice(&p.segments);
        end = p.with_origin(end)?.endpoint();
    }
    PositivePath::new(first.origin.clone(), segs)
}

/// Concatenation with a blend segment at every junction between paths.
///
/// The blend generator is (P_a + P_b)/2 over a width of `blend` times the
/// shorter adjacent segment; the neighbours shrink by half the width each.
/// With `blend = None` this is plain [`concat`].
pub fn smooth_concat(paths: &[PositivePath], blend: Option<f64>) -> Result<PositivePath> {
    let raw = concat(paths)?;
    let Some(frac) = blend else { return Ok(raw) };
    if !(frac > 0.0 && frac < 1.0) {
        return Err(Error::Invalid(format!("blend fraction {frac} outside (0, 1)")));
    }
    let mut junctions = Vec::new();
    let mut k = 0;
    for p in &paths[..paths.len() - 1] {
        k += p.segments.len();
        junctions.push(k);
    }
    let mut segs: Vec<Segment> = Vec::new();
    for (i, s) in raw.segments.iter().enumerate() {
        let mut s = s.clone();
        if junctions.contains(&(i + 1)) && i + 1 < raw.segments.len() {
            let next = &raw.segments[i + 1];
            let w = frac * s.duration.min(next.duration);
            s.duration -= w / 2.0;
            segs.push(s);
            let mix = Generator::from_symmetric_part(&((s_mat(&raw.segments[i]) + s_mat(next)) * 0.5));
            segs.push(Segment::new(w, mix));
            continue;
        }
        if i > 0 && junctions.contains(&i) {
            let prev = &raw.segments[i - 1];
            let w = frac * s.duration.min(prev.duration);
            s.duration -= w / 2.0;
        }
        segs.push(s);
    }
    PositivePath::new(raw.origin.clone(), segs)
}

fn s_mat(s: &Segment) -> DMatrix<f64> {
    s.generator.matrix().clone()
}

/// A path known only through samples; read-only support for diagnostics.
#[derive(Debug, Clone)]
pub struct SampledPath {
    pub times: Vec<f64>,
    pub values: Vec<SympMatrix>,
}

impl SampledPath {
    pub fn new(times: Vec<f64>, values: Vec<SympMatrix>) -> Result<Self> {
        if times.len() != values.len() || times.len() < 3 {
            return Err(Error::Invalid("sampled path needs at least three matching samples".into()));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Invalid("sample times must increase".into()));
        }
        Ok(SampledPath { times, values })
    }

    pub fn from_path(path: &PositivePath, samples: usize) -> Result<Self> {
        let total = path.total_duration();
        let n = samples.max(3);
        let times: Vec<f64> = (0..n).map(|k| total * k as f64 / (n - 1) as f64).collect();
        let values = times.iter().map(|&t| path.evaluate(t)).collect::<Result<Vec<_>>>()?;
        Self::new(times, values)
    }

    /// P = −J·A′·A⁻¹ from second-order differences on the sample grid,
    /// evaluated at the sample nearest to t.
    pub fn generator_at(&self, t: f64) -> Result<GeneratorSample> {
        let n = self.times.len();
        let (t0, t1) = (self.times[0], self.times[n - 1]);
        if t < t0 - 1e-12 || t > t1 + 1e-12 {
            return Err(Error::OutOfRange { t, total: t1 });
        }
        let k = (0..n).min_by(|&a, &b| (self.times[a] - t).abs().total_cmp(&(self.times[b] - t).abs())).unwrap_or(0);
        let deriv = if k == 0 {
            let (h1, h2) = (self.times[1] - self.times[0], self.times[2] - self.times[0]);
            let (a0, a1, a2) = (self.values[0].matrix(), self.values[1].matrix(), self.values[2].matrix());
            // Quadratic fit through three points, derivative at the first.
            a0 * (-(h1 + h2) / (h1 * h2)) + a1 * (h2 / (h1 * (h2 - h1))) - a2 * (h1 / (h2 * (h2 - h1)))
        } else if k == n - 1 {
            let (h1, h2) = (self.times[k] - self.times[k - 1], self.times[k] - self.times[k - 2]);
            let (a0, a1, a2) = (self.values[k].matrix(), self.values[k - 1].matrix(), self.values[k - 2].matrix());
            -(a0 * (-(h1 + h2) / (h1 * h2)) + a1 * (h2 / (h1 * (h2 - h1))) - a2 * (h1 / (h2 * (h2 - h1))))
        } else {
            let (hm, hp) = (self.times[k] - self.times[k - 1], self.times[k + 1] - self.times[k]);
            let (am, a0, ap) = (self.values[k - 1].matrix(), self.values[k].matrix(), self.values[k + 1].matrix());
            ap * (hm / (hp * (hm + hp))) + a0 * ((hp - hm) / (hm * hp)) - am * (hp / (hm * (hm + hp)))
        };
        let a = &self.values[k];
        let p = -(j_matrix(a.dim()) * deriv * a.inverse().matrix());
        let corner = (self.times[k] - t).abs() > 1e-12 * t1.abs().max(1.0);
        Ok(GeneratorSample { p: Generator::from_symmetric_part(&symmetrize(&p)), corner })
    }

    pub fn verify_positive(&self, grid: usize) -> PositivityCertificate {
        let n = self.times.len();
        let step = (n / grid.max(1)).max(1);
        let mut margin = f64::INFINITY;
        for k in (0..n).step_by(step) {
            if let Ok(g) = self.generator_at(self.times[k]) {
                margin = margin.min(g.p.min_eigenvalue());
            }
        }
        PositivityCertificate { positive: margin > 0.0, margin }
    }

    pub fn asymmetry_at(&self, k: usize) -> f64 {
        inf_norm(self.values[k].matrix())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symplectic::{random_positive_generator, random_symplectic, rotation};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn id_path(n: usize, dur: f64) -> PositivePath {
        PositivePath::from_identity(n, vec![Segment::new(dur, Generator::identity(n))]).unwrap()
    }

    #[test]
    fn evaluate_examples() {
        let p = id_path(1, 1.0);
        for th in [0.0, 0.3, 1.0] {
            assert!(p.evaluate(th).unwrap().distance(&rotation(th)) < 1e-15);
        }
        assert_eq!(p.evaluate(0.0).unwrap(), SympMatrix::identity(1));
        assert!(p.evaluate(1.5).is_err());
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let g = random_positive_generator(&mut rng, 2, 0.5, 0.7);
        let one = PositivePath::from_identity(2, vec![Segment::new(1.0, g.clone())]).unwrap();
        let two = PositivePath::from_identity(2, vec![Segment::new(0.4, g.clone()), Segment::new(0.6, g)]).unwrap();
        for t in [0.0, 0.2, 0.4, 0.77, 1.0] {
            assert!(one.evaluate(t).unwrap().distance(&two.evaluate(t).unwrap()) < 1e-10);
        }
    }

    #[test]
    fn generator_recovery() {
        let p = id_path(1, 1.0);
        let g = p.generator_at(0.5).unwrap();
        assert_eq!(g.p, Generator::identity(1));
        assert!(!g.corner);
        let two = PositivePath::from_identity(1, vec![Segment::new(0.5, Generator::identity(1)), Segment::new(0.5, Generator::scaled_identity(1, 2.0))]).unwrap();
        let g = two.generator_at(0.5).unwrap();
        assert!(g.corner);
        assert_eq!(g.p, Generator::scaled_identity(1, 2.0));

        let times: Vec<f64> = (0..=1000).map(|k| k as f64 * 1e-3).collect();
        let fwd = SampledPath::new(times.clone(), times.iter().map(|&t| rotation(t)).collect()).unwrap();
        for t in [0.0, 0.5, 1.0] {
            let g = fwd.generator_at(t).unwrap();
            assert!((g.p.matrix() - DMatrix::<f64>::identity(2, 2)).norm() < 1e-6);
        }
        assert!(fwd.verify_positive(50).positive);
        let back = SampledPath::new(times.clone(), times.iter().map(|&t| rotation(-t)).collect()).unwrap();
        let g = back.generator_at(0.4).unwrap();
        assert!((g.p.matrix() + DMatrix::<f64>::identity(2, 2)).norm() < 1e-6);
        assert!(!back.verify_positive(50).positive);
    }

    #[test]
    fn positivity_certificates() {
        let c = id_path(1, 1.0).verify_positive();
        assert!(c.positive && (c.margin - 1.0).abs() < 1e-15);
        let bad = PositivePath::from_identity(1, vec![Segment::new(1.0, Generator::from_row_slice(2, &[1.0, 0.0, 0.0, -1.0]).unwrap())]).unwrap();
        assert!(!bad.verify_positive().positive);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let segs = (0..3).map(|_| Segment::new(0.3, random_positive_generator(&mut rng, 2, 0.2, 0.8))).collect();
        let p = PositivePath::from_identity(2, segs).unwrap();
        let x = random_symplectic(&mut rng, 2, 0.8);
        let q = p.conjugate(&x).unwrap();
        assert!(q.verify_positive().positive);
        for t in [0.0, 0.45, 0.9] {
            let lhs = q.evaluate(t).unwrap();
            let rhs = crate::symplectic::conjugate(&p.evaluate(t).unwrap(), &x).unwrap();
            assert!(lhs.distance(&rhs) < 1e-9 * rhs.norm());
        }
        let same = p.conjugate(&SympMatrix::identity(2)).unwrap();
        assert!(same.endpoint().distance(&p.endpoint()) < 1e-14);
    }

    #[test]
    fn concatenation() {
        let a = id_path(1, 1.0);
        let b = id_path(1, 1.0).with_origin(a.endpoint()).unwrap();
        let ab = smooth_concat(&[a.clone(), b.clone()], None).unwrap();
        let whole = id_path(1, 2.0);
        for t in [0.0, 0.7, 1.0, 1.6, 2.0] {
            assert!(ab.evaluate(t).unwrap().distance(&whole.evaluate(t).unwrap()) < 1e-12);
        }
        let twice = PositivePath::constant(a.endpoint(), Generator::scaled_identity(1, 2.0), 1.0).unwrap();
        let blended = smooth_concat(&[a.clone(), twice.clone()], Some(1e-3)).unwrap();
        assert!(blended.verify_positive().positive);
        assert_eq!(blended.segments().len(), 3);
        assert!((blended.total_duration() - 2.0).abs() < 1e-14);

        let raw = smooth_concat(&[a.clone(), twice.clone()], None).unwrap();
        let sup = |w: f64| {
            let m = smooth_concat(&[a.clone(), twice.clone()], Some(w)).unwrap();
            (0..=200).map(|k| 2.0 * k as f64 / 200.0).map(|t| m.evaluate(t).unwrap().distance(&raw.evaluate(t).unwrap())).fold(0.0, f64::max)
        };
        let (d1, d2, d3) = (sup(1e-1), sup(1e-2), sup(1e-3));
        assert!(d1 > d2 && d2 > d3 && d3 < 1e-3);

        let far = id_path(1, 1.0);
        assert!(concat(&[a, far]).is_err());
    }

    #[test]
    fn symplecticity_along_paths() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..10 {
            let segs = (0..5).map(|_| Segment::new(0.8, random_positive_generator(&mut rng, 2, 0.1, 0.8))).collect();
            let p = PositivePath::from_identity(2, segs).unwrap();
            assert!(p.max_symplectic_residual(200) <= 1e-8);
        }
    }
}
