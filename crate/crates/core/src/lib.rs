//! Positive paths in the real symplectic group Sp(2n, ℝ).
//!
//! The crate covers Krein-form spectral analysis, the conjugacy strata of
//! Sp(2) and Sp(4), integration and diagnosis of piecewise positive paths,
//! constructive steering through the strata, and strong stability of
//! periodic linear Hamiltonian systems.

pub mod error;
pub mod io;
pub mod linalg;
pub mod paths;
pub mod selftest;
pub mod spectral;
pub mod stability;
pub mod steering;
pub mod strata;
pub mod symplectic;
pub mod tol;

pub use error::{Error, ErrorKind, Result};
pub use spectral::{
    eigen_structure, eigen_structure_with, invariant_subspace, krein_form, krein_velocity, splitting_number,
    EigenGroup, EigenKind, EigenStructure,
};
pub use symplectic::{
    conjugate, in_lie_algebra, is_symplectic, random_symplectic, rotation, standard_j, symp_exp, Generator,
    StandardForm, SympMatrix,
};
pub use paths::{
    conley_zehnder_index, diagnose, eigen_trajectory, excursions, is_short, PathDiagnostics, PositivePath, Segment,
    Trajectory,
};
pub use stability::{
    critical_mu, excursion_index_check, is_stable, is_strongly_stable, monodromy, PeriodicSystem, StabilityReport,
};
pub use steering::{connect, extend_to_u, short_path_to, Route};
pub use strata::{classify, normal_form, NormalForm, Region, Sign, StratumLabel};
pub use tol::Tolerances;
pub use nalgebra::DMatrix;
pub use num_complex::Complex64;
