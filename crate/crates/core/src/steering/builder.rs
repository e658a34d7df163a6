//! Incremental route assembly. Legs are planned on canonical blocks and
//! moved into the frame of the running endpoint before being appended.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::expm;
use crate::paths::{PositivePath, Segment};
use crate::strata::{normal_form_detailed, NormalForm, Sign};
use crate::symplectic::SympMatrix;

/// Legs whose canonical origin misses the current normal form by more than
/// this (relative) are rejected.
const FRAME_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub enum LegKind {
    RotateCircle { targets: Vec<f64> },
    /// Quadruplet ray motion towards the circle.
    RayDescent { target: f64 },
    RayAscent { target: f64 },
    /// Quadruplet label turned by `delta` at (nearly) fixed modulus.
    AngleMove { delta: f64 },
    RealSlide { target: f64, increasing: bool },
    /// Two real pairs collide and leave as a quadruplet, or the reverse.
    MergeRealPairs,
    SplitQuadruplet,
    EnterViaN(Sign),
    ExitViaN(Sign),
    /// Several block routes run side by side.
    Parallel,
    /// e^{τJ} flow used to move off a non-generic point.
    Shift { tau: f64 },
    /// Path supplied by the caller and kept verbatim.
    Prefix,
    Correction,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Leg {
    pub kind: LegKind,
    /// Indices into the normal-form block list at the start of the leg.
    pub blocks: Vec<usize>,
    pub start: f64,
    pub end: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Route {
    pub legs: Vec<Leg>,
}

impl Route {
    pub fn kinds(&self) -> Vec<&LegKind> {
        self.legs.iter().map(|l| &l.kind).collect()
    }

    pub(crate) fn shifted(mut self, dt: f64) -> Route {
        for l in &mut self.legs {
            l.start += dt;
            l.end += dt;
        }
        self
    }
}

pub(crate) struct Builder {
    origin: SympMatrix,
    segments: Vec<Segment>,
    end: DMatrix<f64>,
    elapsed: f64,
    legs: Vec<Leg>,
}

impl Builder {
    pub fn new(origin: SympMatrix) -> Self {
        let end = origin.matrix().clone();
        Builder { origin, segments: Vec::new(), end, elapsed: 0.0, legs: Vec::new() }
    }

    pub fn from_path(path: &PositivePath) -> Self {
        let mut b = Builder::new(path.origin().clone());
        if !path.segments().is_empty() {
            b.push_raw(path.segments().to_vec(), LegKind::Prefix, vec![]);
        }
        b
    }

    pub fn dim(&self) -> usize {
        self.origin.dim()
    }

    pub fn endpoint(&self) -> SympMatrix {
        SympMatrix::trusted(self.end.clone())
    }

    pub fn normal_form(&self) -> Result<NormalForm> {
        normal_form_detailed(&self.endpoint())
    }

    pub fn push_raw(&mut self, segments: Vec<Segment>, kind: LegKind, blocks: Vec<usize>) {
        let start = self.elapsed;
        for s in segments {
            self.end = expm(&(s.generator.hamiltonian() * s.duration)) * &self.end;
            self.elapsed += s.duration;
            self.segments.push(s);
        }
        self.legs.push(Leg { kind, blocks, start, end: self.elapsed });
    }

    /// Appends `leg`, planned from `nf.canonical`, in the frame of the
    /// current endpoint: generators P become YᵀPY with Y = X⁻¹.
    pub fn push_canonical(&mut self, nf: &NormalForm, leg: &PositivePath, kind: LegKind, blocks: Vec<usize>) -> Result<()> {
        let gap = (leg.origin().matrix() - nf.canonical.matrix()).norm();
        if gap > FRAME_TOL * nf.canonical.norm().max(1.0) {
            return Err(Error::numerical("leg does not start at the current normal form", gap));
        }
        let y = nf.conjugator.inverse();
        let segs = leg.segments().iter().map(|s| Segment::new(s.duration, s.generator.congruence(y.matrix()))).collect();
        self.push_raw(segs, kind, blocks);
        Ok(())
    }

    pub fn elapsed(&self) -> f64 {
        self.elapsed
    }

    /// Extra route entries (sub-legs of a parallel leg).
    pub fn annotate(&mut self, legs: Vec<Leg>) {
        self.legs.extend(legs);
    }

    pub fn route(&self) -> Route {
        Route { legs: self.legs.clone() }
    }

    pub fn into_path(self) -> Result<PositivePath> {
        PositivePath::new(self.origin, self.segments)
    }

    pub fn finish(self) -> Result<(PositivePath, Route)> {
        let route = self.route();
        Ok((self.into_path()?, route))
    }
}

/// Label of the single quadruplet block of a normal form.
pub(crate) fn quad_of(nf: &NormalForm) -> Option<Complex64> {
    match nf.blocks.as_slice() {
        [crate::strata::CanonicalBlock::Quadruplet(l)] => Some(*l),
        _ => None,
    }
}
