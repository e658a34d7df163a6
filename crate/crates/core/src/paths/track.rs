//! Eigenvalue tracking along a path, stratum itineraries and crossings.

use num_complex::Complex64;

use super::PositivePath;
use crate::error::{Error, Result};
use crate::spectral::{eigen_structure_with, EigenGroup, EigenKind, EigenStructure};
use crate::strata::{boundary_label, classify_structure, closest_pair_center, cluster_splitting, Region, StratumLabel};
use crate::symplectic::SympMatrix;
use crate::tol::Tolerances;

// Largest label motion accepted between neighbouring samples.
const MAX_STEP: f64 = 0.25;
// Bisection stops at this fraction of the total duration.
const LABEL_FLOOR: f64 = 1e-10;
const MOTION_FLOOR: f64 = 1e-6;
const EXTRA_PROBES: usize = 100_000;

#[derive(Debug, Clone, PartialEq)]
pub struct TrackedGroup {
    pub track: usize,
    pub group: EigenGroup,
}

#[derive(Debug, Clone)]
pub struct TrajectorySample {
    pub t: f64,
    pub value: SympMatrix,
    pub structure: EigenStructure,
    pub groups: Vec<TrackedGroup>,
    /// Only for 2n ≤ 4.
    pub stratum: Option<StratumLabel>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ItineraryEntry {
    pub start: f64,
    pub end: f64,
    pub label: StratumLabel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Crossing {
    pub t: f64,
    pub from: Region,
    pub to: Region,
    /// The boundary stratum passed through.
    pub via: StratumLabel,
    /// Krein signature of the colliding pair at the last sample before the
    /// crossing, when the crossing removes eigenvalues from the circle.
    pub departure_splitting: Option<i32>,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub samples: Vec<TrajectorySample>,
    pub itinerary: Vec<ItineraryEntry>,
    pub crossings: Vec<Crossing>,
    pub max_residual: f64,
}

impl Trajectory {
    pub fn crossing_times(&self) -> Vec<f64> {
        self.crossings.iter().map(|c| c.t).collect()
    }

    pub fn track_count(&self) -> usize {
        self.samples.iter().flat_map(|s| s.groups.iter().map(|g| g.track + 1)).max().unwrap_or(0)
    }

    /// (t, group) for every sample where track `id` is present.
    pub fn track(&self, id: usize) -> Vec<(f64, &EigenGroup)> {
        self.samples
            .iter()
            .filter_map(|s| s.groups.iter().find(|g| g.track == id).map(|g| (s.t, &g.group)))
            .collect()
    }

    /// Open regions visited, in order, with repeats collapsed.
    pub fn open_regions(&self) -> Vec<Region> {
        let mut out: Vec<Region> = Vec::new();
        for e in &self.itinerary {
            if e.label.region.is_open() && out.last() != Some(&e.label.region) {
                out.push(e.label.region);
            }
        }
        out
    }

    pub fn visits(&self, region: Region) -> bool {
        self.itinerary.iter().any(|e| e.label.region == region)
    }
}

struct Probe {
    t: f64,
    value: SympMatrix,
    es: EigenStructure,
    label: Option<StratumLabel>,
}

fn probe(path: &PositivePath, t: f64, tol: &Tolerances) -> Result<Probe> {
    let value = path.evaluate(t)?;
    let es = eigen_structure_with(&value, tol)?;
    let label = if value.dim() <= 4 {
        Some(classify_structure(&value, &es).unwrap_or_else(|_| StratumLabel {
            region: Region::NonGeneric,
            nilpotent_sign: None,
            labels: es.groups.iter().map(|g| g.label).collect(),
        }))
    } else {
        None
    };
    Ok(Probe { t, value, es, label })
}

fn kinds(es: &EigenStructure) -> Vec<(EigenKind, usize)> {
    let mut k: Vec<(EigenKind, usize)> = es.groups.iter().map(|g| (g.kind, g.multiplicity)).collect();
    k.sort_by_key(|(kind, m)| (kind.as_str(), *m));
    k
}

fn same_class(a: &Probe, b: &Probe) -> bool {
    let labels = match (&a.label, &b.label) {
        (Some(x), Some(y)) => x.same_class(y),
        _ => true,
    };
    labels && kinds(&a.es) == kinds(&b.es)
}

/// Distance to the nearest collision partner of each group, minimised.
fn gap(es: &EigenStructure) -> f64 {
    let mut g = f64::INFINITY;
    for (i, a) in es.groups.iter().enumerate() {
        match a.kind {
            EigenKind::CirclePair | EigenKind::Quadruplet => g = g.min(2.0 * a.label.im.abs()),
            EigenKind::RealPair => g = g.min((a.label.re - 1.0 / a.label.re).abs()),
            _ => {}
        }
        if a.kind == EigenKind::Quadruplet {
            g = g.min((a.label.norm() - 1.0 / a.label.norm()).abs());
        }
        for b in &es.groups[i + 1..] {
            g = g.min((a.label - b.label).norm());
        }
    }
    g
}

/// Greedy nearest assignment of `next` groups to `prev` groups; returns
/// for each `next` group the index of its partner, and the largest
/// matched distance.
fn greedy_match(prev: &[Complex64], next: &[Complex64]) -> (Vec<Option<usize>>, f64) {
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for (i, p) in prev.iter().enumerate() {
        for (j, q) in next.iter().enumerate() {
            pairs.push(((p - q).norm(), i, j));
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut used = vec![false; prev.len()];
    let mut out = vec![None; next.len()];
    let mut worst: f64 = 0.0;
    for (d, i, j) in pairs {
        if used[i] || out[j].is_some() {
            continue;
        }
        used[i] = true;
        out[j] = Some(i);
        worst = worst.max(d);
    }
    (out, worst)
}

fn labels_of(es: &EigenStructure) -> Vec<Complex64> {
    es.groups.iter().map(|g| g.label).collect()
}

pub fn eigen_trajectory(path: &PositivePath, samples: usize) -> Result<Trajectory> {
    eigen_trajectory_with(path, samples, &Tolerances::default())
}

pub fn eigen_trajectory_with(path: &PositivePath, samples: usize, tol: &Tolerances) -> Result<Trajectory> {
    if samples < 2 {
        return Err(Error::Invalid(format!("need at least 2 samples, got {samples}")));
    }
    let total = path.total_duration();
    let grid: Vec<f64> = (0..samples).map(|k| total * k as f64 / (samples - 1) as f64).collect();
    let mut probes: Vec<Probe> = Vec::new();
    let budget = samples * 64 + EXTRA_PROBES;
    let mut spent = 0usize;
    let first = probe(path, 0.0, tol)?;
    let origin_open = first.label.as_ref().map(|l| l.region.is_open()).unwrap_or(true);
    probes.push(first);
    for w in grid.windows(2) {
        let right = probe(path, w[1], tol)?;
        let left = probes.pop().expect("left probe");
        // Paths that start or end on a boundary are not bisected towards it.
        let skip = (w[0] == 0.0 && !origin_open)
            || (w[1] == total && !right.label.as_ref().map(|l| l.region.is_open()).unwrap_or(true));
        let mut seg = refine(path, tol, left, right, total, skip, budget, &mut spent)?;
        probes.append(&mut seg);
    }

    let mut out_samples: Vec<TrajectorySample> = Vec::with_capacity(probes.len());
    let mut next_id = 0usize;
    let mut prev_ids: Vec<usize> = Vec::new();
    let mut prev_labels: Vec<Complex64> = Vec::new();
    let mut max_residual: f64 = 0.0;
    for p in probes.iter() {
        let labels = labels_of(&p.es);
        let (assign, _) = greedy_match(&prev_labels, &labels);
        let mut ids = Vec::with_capacity(labels.len());
        for a in assign {
            match a {
                Some(i) => ids.push(prev_ids[i]),
                None => {
                    ids.push(next_id);
                    next_id += 1;
                }
            }
        }
        max_residual = max_residual.max(p.es.residual);
        out_samples.push(TrajectorySample {
            t: p.t,
            value: p.value.clone(),
            structure: p.es.clone(),
            groups: p.es.groups.iter().zip(&ids).map(|(g, &id)| TrackedGroup { track: id, group: g.clone() }).collect(),
            stratum: p.label.clone(),
        });
        prev_ids = ids;
        prev_labels = labels;
    }

    let itinerary = build_itinerary(&out_samples, total);
    let crossings = find_crossings(&out_samples, &itinerary);
    Ok(Trajectory { samples: out_samples, itinerary, crossings, max_residual })
}

/// Samples strictly inside (left.t, right.t], refined until consecutive
/// samples agree in class and move less than half the collision gap.
#[allow(clippy::too_many_arguments)]
fn refine(
    path: &PositivePath,
    tol: &Tolerances,
    left: Probe,
    right: Probe,
    total: f64,
    skip: bool,
    budget: usize,
    spent: &mut usize,
) -> Result<Vec<Probe>> {
    let mut done = vec![left];
    let mut stack = vec![right];
    while let Some(r) = stack.pop() {
        let l = done.last().expect("left sample");
        let width = r.t - l.t;
        let class_change = !same_class(l, &r);
        let split = if class_change {
            width > LABEL_FLOOR * total && !skip
        } else {
            let (_, d) = greedy_match(&labels_of(&l.es), &labels_of(&r.es));
            let g = gap(&l.es).min(gap(&r.es));
            (d > 0.5 * g || d > MAX_STEP) && width > MOTION_FLOOR * total
        };
        if !split {
            done.push(r);
            continue;
        }
        *spent += 1;
        if *spent > budget {
            return Err(Error::Tracking { t0: l.t, t1: r.t });
        }
        let mid = probe(path, 0.5 * (l.t + r.t), tol)?;
        stack.push(r);
        stack.push(mid);
    }
    Ok(done)
}

fn build_itinerary(samples: &[TrajectorySample], total: f64) -> Vec<ItineraryEntry> {
    // Runs of equal class over the samples with t > 0: (label, first, last).
    let mut runs: Vec<(&StratumLabel, usize, usize)> = Vec::new();
    for (k, s) in samples.iter().enumerate().filter(|(_, s)| s.t > 0.0) {
        let Some(label) = &s.stratum else { return Vec::new() };
        match runs.last_mut() {
            Some(r) if r.0.same_class(label) => r.2 = k,
            _ => runs.push((label, k, k)),
        }
    }
    // An endpoint alone on a boundary is an instant, not an interval.
    if runs.len() > 1 {
        let r = runs[runs.len() - 1];
        if r.1 == r.2 && !r.0.region.is_open() {
            runs.pop();
        }
    }
    let mut out: Vec<ItineraryEntry> = Vec::with_capacity(runs.len());
    for (i, (label, first, _)) in runs.iter().enumerate() {
        let start = if i == 0 { 0.0 } else { 0.5 * (samples[first - 1].t + samples[*first].t) };
        if let Some(prev) = out.last_mut() {
            prev.end = start;
        }
        out.push(ItineraryEntry { start, end: total, label: (*label).clone() });
    }
    out
}

fn circle_count(es: &EigenStructure) -> usize {
    es.groups
        .iter()
        .filter(|g| g.kind.on_circle())
        .map(|g| g.multiplicity * if g.kind == EigenKind::CirclePair { 2 } else { 1 })
        .sum()
}

fn find_crossings(samples: &[TrajectorySample], itinerary: &[ItineraryEntry]) -> Vec<Crossing> {
    let mut out = Vec::new();
    // Index of the last sample with an open label, and its region.
    let mut last_open: Option<(usize, Region)> = None;
    let mut boundary_start: Option<usize> = None;
    for (k, s) in samples.iter().enumerate() {
        if s.t == 0.0 {
            continue;
        }
        let Some(label) = &s.stratum else { return out };
        let region = label.region;
        if !region.is_open() {
            if boundary_start.is_none() {
                boundary_start = Some(k);
            }
            continue;
        }
        if let Some((i, from)) = last_open {
            if from != region {
                let near = boundary_start.unwrap_or(i);
                let via = boundary_label(&samples[near].value, from, region);
                let t = match boundary_start {
                    Some(b) => 0.5 * (samples[b].t + samples[k - 1].t),
                    None => 0.5 * (samples[i].t + s.t),
                };
                let departure_splitting = if circle_count(&samples[i].structure) > circle_count(&s.structure) {
                    let center = via.labels.first().copied().unwrap_or_else(|| closest_pair_center(samples[i].value.matrix()));
                    Some(cluster_splitting(&samples[i].value, center))
                } else {
                    None
                };
                out.push(Crossing { t, from, to: region, via, departure_splitting });
            }
        }
        last_open = Some((k, region));
        boundary_start = None;
    }
    let _ = itinerary;
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::paths::Segment;
    use crate::strata::{br_canonical, Sign};
    use crate::symplectic::{rotation, Generator};
    use std::f64::consts::PI;

    #[test]
    fn rotation_half_turn() {
        let p = PositivePath::from_identity(1, vec![Segment::new(PI, Generator::identity(1))]).unwrap();
        let tr = eigen_trajectory(&p, 64).unwrap();
        assert_eq!(tr.itinerary.len(), 1);
        assert_eq!(tr.itinerary[0].label.region, Region::OUPlus);
        assert_eq!(tr.itinerary[0].start, 0.0);
        assert_eq!(tr.itinerary[0].end, PI);
        for s in tr.samples.iter().filter(|s| s.t > 1e-3 && s.t < PI - 1e-3) {
            let z = s.groups[0].group.label;
            assert!((z - Complex64::from_polar(1.0, s.t)).norm() < 1e-9, "t = {}", s.t);
        }
        assert!(tr.crossings.is_empty());
    }

    fn bifurcation_path(alpha: f64) -> PositivePath {
        let a = SympMatrix::new(br_canonical(2.0, alpha)).unwrap();
        let p = Generator::from_row_slice(4, &[1., 0., 0., 0., 0., 5., -2., 0., 0., -2., 1., 0., 0., 0., 0., 1.]).unwrap();
        PositivePath::constant(a, p, 0.05).unwrap()
    }

    #[test]
    fn bifurcation_directions() {
        let into_c = eigen_trajectory(&bifurcation_path(-1.0), 64).unwrap();
        assert_eq!(into_c.open_regions(), vec![Region::OC]);
        let into_r = eigen_trajectory(&bifurcation_path(1.0), 64).unwrap();
        assert_eq!(into_r.open_regions(), vec![Region::ORPlus]);
    }

    #[test]
    fn n1_exit_and_entry_crossings() {
        // Quarter turn, then a strongly anisotropic generator: leaves the
        // circle through −1 and comes back.
        let p = Generator::from_row_slice(2, &[9.0, 0.0, 0.0, 0.1]).unwrap();
        let segs = vec![Segment::new(PI / 2.0, Generator::identity(1)), Segment::new(3.2, p)];
        let path = PositivePath::from_identity(1, segs).unwrap();
        let tr = eigen_trajectory(&path, 256).unwrap();
        let regs = tr.open_regions();
        assert_eq!(regs[0], Region::OUPlus);
        assert!(!tr.visits(Region::ORPlus));
        assert!(tr.visits(Region::ORMinus));
        for c in &tr.crossings {
            let expect = if c.to == Region::ORMinus { Sign::Minus } else { Sign::Plus };
            assert_eq!(c.via.nilpotent_sign, Some(expect), "{c:?}");
            if c.to == Region::ORMinus {
                assert_eq!(c.departure_splitting, Some(0));
            }
        }
        // itinerary partitions (0, T]
        assert_eq!(tr.itinerary.first().unwrap().start, 0.0);
        assert_eq!(tr.itinerary.last().unwrap().end, path.total_duration());
        assert_eq!(tr.crossings.len(), 2);
        for w in tr.itinerary.windows(2) {
            assert_eq!(w[0].end, w[1].start);
        }
    }

    #[test]
    fn rotation_origin_is_open() {
        let path = PositivePath::constant(rotation(0.5), Generator::identity(1), 1.0).unwrap();
        let tr = eigen_trajectory(&path, 16).unwrap();
        assert_eq!(tr.open_regions(), vec![Region::OUPlus]);
        assert_eq!(tr.track_count(), 1);
    }
}
