/// Numerical tolerances shared by every module.
///
/// All values are relative unless noted; the defaults are the ones the
/// classification and steering code was calibrated against.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// ‖AᵀJA − J‖∞ ≤ symp·‖A‖∞² certifies a matrix as symplectic.
    pub symp: f64,
    /// Eigenvalues with ||λ| − 1| below this snap onto the unit circle.
    pub circle: f64,
    /// Band around zero for eigenvalues of Krein Gram matrices.
    pub degeneracy: f64,
    /// |disc| ≤ disc_band·(1 + σ₁²) counts as a collision of eigenvalue labels.
    pub disc_band: f64,
    /// Relative singular-value threshold used for rank decisions in A − λ.
    pub rank: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { symp: 1e-9, circle: 1e-8, degeneracy: 1e-8, disc_band: 1e-7, rank: 1e-3 }
    }
}

impl Tolerances {
    pub fn with_circle(tol_circle: f64) -> Self {
        Tolerances { circle: tol_circle, ..Default::default() }
    }
}
