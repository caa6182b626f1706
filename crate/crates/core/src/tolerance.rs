/// Every numerical threshold used by the crate, in one place.
///
/// Relative thresholds are scaled by the norm of the data they judge, so the
/// defaults work across problem scales.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Absolute singular-value cutoff for [`rank_tol`](crate::numkernel::rank_tol).
    /// Zero selects `max(rows, cols) * eps * sigma_max`.
    pub rank: f64,
    /// Relative cutoff for rank decisions on the PBH pencil and in the
    /// observability staircase: a singular value counts as zero when it is at
    /// most `structural * max(1, scale)`.
    pub structural: f64,
    /// Eigenvalues with `Re(lambda) >= -stability` count as unstable.
    pub stability: f64,
    /// Two eigenvalues are the same when `|a - b| <= cluster * (1 + |a|)`.
    pub cluster: f64,
    /// Residual gate for reports: `||TA - FT - GC||_F <= residual * (1 + ||A||_F)`.
    pub residual: f64,
    /// Iteration cap handed to the Schur reduction.
    pub schur_max_iter: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            rank: 0.0,
            structural: 1e-9,
            stability: 1e-9,
            cluster: 1e-8,
            residual: 1e-8,
            schur_max_iter: 10_000,
        }
    }
}

impl Tolerances {
    /// Defaults with the structural (rank-decision) tolerance replaced.
    pub fn with_structural(tol: f64) -> Self {
        Self {
            structural: tol,
            ..Self::default()
        }
    }
}
