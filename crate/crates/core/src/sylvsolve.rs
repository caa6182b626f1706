//! Constrained Sylvester-observer equation `T A - F T = G C` with `[C; T]`
//! nonsingular, `F` Hurwitz and `T` of full row rank.
//!
//! A solution exists exactly when `(A, C)` is detectable. The construction
//! normalizes the output with `L` (`C L = [I_p, 0]`), partitions
//! `L^-1 A L = [[A11, A12], [A21, A22]]`, stabilizes the reduced pair
//! `(A22, A12)` by output injection `K`, and then sets
//!
//! ```text
//! T = [K, I] L^-1
//! F = A22 + K A12
//! G = K A11 + A21 - F K
//! ```

use crate::error::{Error, Result};
use crate::numkernel::{
    build_transform_l, inverse_transform_l, min_singular_value, rank_tol, spectral_abscissa,
    vstack, RealMatrix,
};
use crate::stabilize::{stabilizing_gain, PoleSet};
use crate::structure::{check_detectability, check_pair, is_zero};
use crate::tolerance::Tolerances;

#[derive(Debug, Clone, PartialEq)]
pub struct SylvesterSolution {
    pub t: RealMatrix,
    pub f: RealMatrix,
    pub g: RealMatrix,
    pub l: RealMatrix,
    pub k: RealMatrix,
    pub a11: RealMatrix,
    pub a12: RealMatrix,
    pub a21: RealMatrix,
    pub a22: RealMatrix,
}

/// Quantities recomputed from a candidate `(T, F, G)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveReport {
    /// `||T A - F T - G C||_F`
    pub residual_norm: f64,
    /// Smallest singular value of `[C; T]` (zero when it is not square).
    pub stacked_min_singular_value: f64,
    /// `-inf` when `F` is empty.
    pub f_spectral_abscissa: f64,
    pub t_rank: usize,
}

impl SolveReport {
    /// Residual scaled to `(1 + ||A||_F)`, stacked matrix nonsingular, `F`
    /// Hurwitz and `T` of row rank `n - p`.
    pub fn is_valid(&self, a: &RealMatrix, c: &RealMatrix, tols: &Tolerances) -> bool {
        let (n, p) = (a.nrows(), c.nrows());
        let scaled_singular_floor = n.max(1) as f64 * f64::EPSILON * (a.norm() + c.norm()).max(1.0);
        self.residual_norm <= tols.residual * (1.0 + a.norm())
            && self.stacked_min_singular_value > scaled_singular_floor
            && self.f_spectral_abscissa < 0.0
            && self.t_rank == n - p
    }
}

/// `L` with `C L = [I_p, 0]` and the blocks of `L^-1 A L`.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputPartition {
    pub l: RealMatrix,
    pub l_inv: RealMatrix,
    pub a11: RealMatrix,
    pub a12: RealMatrix,
    pub a21: RealMatrix,
    pub a22: RealMatrix,
}

pub fn output_partition(
    a: &RealMatrix,
    c: &RealMatrix,
    tols: &Tolerances,
) -> Result<OutputPartition> {
    let n = check_pair(a, c)?;
    let p = c.nrows();
    let l = build_transform_l(c, tols)?;
    let l_inv = inverse_transform_l(c, &l);
    let a1 = &l_inv * a * &l;
    let r = n - p;
    Ok(OutputPartition {
        a11: a1.view((0, 0), (p, p)).into_owned(),
        a12: a1.view((0, p), (p, r)).into_owned(),
        a21: a1.view((p, 0), (r, p)).into_owned(),
        a22: a1.view((p, p), (r, r)).into_owned(),
        l,
        l_inv,
    })
}

pub fn solve_constrained_sylvester(
    a: &RealMatrix,
    c: &RealMatrix,
    desired: Option<&PoleSet>,
    tols: &Tolerances,
) -> Result<SylvesterSolution> {
    let n = check_pair(a, c)?;
    let p = c.nrows();
    if p == 0 || is_zero(c) {
        return Err(Error::ZeroOutput);
    }
    if p > n {
        return Err(Error::DimensionMismatch(format!(
            "C has {p} rows but the state has dimension {n}"
        )));
    }
    let rank = rank_tol(c, tols.rank);
    if rank != p {
        return Err(Error::RankDeficient { rank, expected: p });
    }

    let verdict = check_detectability(a, c, tols)?;
    if !verdict.detectable {
        return Err(Error::Undetectable {
            offending: verdict.offending,
        });
    }

    let OutputPartition {
        l,
        l_inv,
        a11,
        a12,
        a21,
        a22,
    } = output_partition(a, c, tols)?;
    let r = n - p;

    let k = stabilizing_gain(&a22, &a12, desired, tols)?;

    let mut k_identity = RealMatrix::zeros(r, n);
    k_identity.view_mut((0, 0), (r, p)).copy_from(&k);
    k_identity
        .view_mut((0, p), (r, r))
        .copy_from(&RealMatrix::identity(r, r));
    let t = k_identity * &l_inv;
    let f = &a22 + &k * &a12;
    let g = &k * &a11 + &a21 - &f * &k;

    Ok(SylvesterSolution {
        t,
        f,
        g,
        l,
        k,
        a11,
        a12,
        a21,
        a22,
    })
}

pub fn verify_solution(
    a: &RealMatrix,
    c: &RealMatrix,
    t: &RealMatrix,
    f: &RealMatrix,
    g: &RealMatrix,
    tols: &Tolerances,
) -> Result<SolveReport> {
    let n = check_pair(a, c)?;
    let p = c.nrows();
    let r = t.nrows();
    if t.ncols() != n || f.shape() != (r, r) || g.shape() != (r, p) {
        return Err(Error::DimensionMismatch(format!(
            "expected T {r}x{n}, F {r}x{r}, G {r}x{p}; got T {}x{}, F {}x{}, G {}x{}",
            t.nrows(),
            t.ncols(),
            f.nrows(),
            f.ncols(),
            g.nrows(),
            g.ncols()
        )));
    }
    let residual = t * a - f * t - g * c;
    let stacked = vstack(c, t);
    let stacked_min_singular_value = if stacked.nrows() == n {
        min_singular_value(&stacked)
    } else {
        0.0
    };
    Ok(SolveReport {
        residual_norm: residual.norm(),
        stacked_min_singular_value,
        f_spectral_abscissa: spectral_abscissa(f)?,
        t_rank: rank_tol(t, tols.rank),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkernel::matrix;

    fn m(rows: usize, cols: usize, data: &[f64]) -> RealMatrix {
        matrix(rows, cols, data).unwrap()
    }

    fn worked() -> (RealMatrix, RealMatrix) {
        (m(2, 2, &[0.0, 1.0, 0.0, 0.0]), m(1, 2, &[1.0, 0.0]))
    }

    #[test]
    fn worked_double_integrator() {
        let (a, c) = worked();
        let t = Tolerances::default();
        let sol = solve_constrained_sylvester(&a, &c, Some(&PoleSet::real(&[-1.0])), &t).unwrap();
        assert_eq!(sol.t, m(1, 2, &[-1.0, 1.0]));
        assert_eq!(sol.f, m(1, 1, &[-1.0]));
        assert_eq!(sol.g, m(1, 1, &[-1.0]));
        assert_eq!(sol.l, RealMatrix::identity(2, 2));
        assert_eq!(sol.k, m(1, 1, &[-1.0]));

        let report = verify_solution(&a, &c, &sol.t, &sol.f, &sol.g, &t).unwrap();
        assert!(report.residual_norm <= 1e-12);
        assert!(report.stacked_min_singular_value > 0.3);
        assert_eq!(report.f_spectral_abscissa, -1.0);
        assert_eq!(report.t_rank, 1);
        assert!(report.is_valid(&a, &c, &t));
    }

    #[test]
    fn worked_stacked_min_singular_value() {
        // [[1,0],[-1,1]] has Gram eigenvalues (3 -+ sqrt 5)/2.
        let (a, c) = worked();
        let t = Tolerances::default();
        let sol = solve_constrained_sylvester(&a, &c, Some(&PoleSet::real(&[-1.0])), &t).unwrap();
        let report = verify_solution(&a, &c, &sol.t, &sol.f, &sol.g, &t).unwrap();
        let expected = ((3.0 - 5f64.sqrt()) / 2.0).sqrt();
        assert!((report.stacked_min_singular_value - expected).abs() < 1e-14);
    }

    #[test]
    fn undetectable_pair_is_rejected() {
        let err = solve_constrained_sylvester(
            &RealMatrix::identity(2, 2),
            &m(1, 2, &[1.0, 0.0]),
            None,
            &Tolerances::default(),
        );
        assert!(matches!(err, Err(Error::Undetectable { .. })));
    }

    #[test]
    fn input_errors() {
        let t = Tolerances::default();
        let a = RealMatrix::identity(2, 2);
        assert_eq!(
            solve_constrained_sylvester(&a, &RealMatrix::zeros(1, 2), None, &t),
            Err(Error::ZeroOutput)
        );
        assert_eq!(
            solve_constrained_sylvester(&a, &RealMatrix::zeros(0, 2), None, &t),
            Err(Error::ZeroOutput)
        );
        assert_eq!(
            solve_constrained_sylvester(&-a, &m(2, 2, &[1.0, 2.0, 2.0, 4.0]), None, &t),
            Err(Error::RankDeficient {
                rank: 1,
                expected: 2
            })
        );
    }

    #[test]
    fn full_output_gives_empty_solution() {
        let a = m(2, 2, &[-1.0, 0.0, 0.0, 2.0]);
        let c = RealMatrix::identity(2, 2);
        let t = Tolerances::default();
        let sol = solve_constrained_sylvester(&a, &c, None, &t).unwrap();
        assert_eq!(sol.t.shape(), (0, 2));
        assert_eq!(sol.f.shape(), (0, 0));
        assert_eq!(sol.g.shape(), (0, 2));
        let report = verify_solution(&a, &c, &sol.t, &sol.f, &sol.g, &t).unwrap();
        assert_eq!(report.residual_norm, 0.0);
        assert_eq!(report.stacked_min_singular_value, 1.0);
        assert!(report.is_valid(&a, &c, &t));
    }

    #[test]
    fn zero_t_is_flagged() {
        let (a, c) = worked();
        let t = Tolerances::default();
        let report = verify_solution(
            &a,
            &c,
            &RealMatrix::zeros(1, 2),
            &m(1, 1, &[-1.0]),
            &RealMatrix::zeros(1, 1),
            &t,
        )
        .unwrap();
        assert_eq!(report.residual_norm, 0.0);
        assert_eq!(report.t_rank, 0);
        assert_eq!(report.stacked_min_singular_value, 0.0);
        assert!(!report.is_valid(&a, &c, &t));
    }

    #[test]
    fn perturbed_g_shows_in_residual() {
        let (a, c) = worked();
        let t = Tolerances::default();
        let report = verify_solution(
            &a,
            &c,
            &m(1, 2, &[-1.0, 1.0]),
            &m(1, 1, &[-1.0]),
            &m(1, 1, &[-0.9]),
            &t,
        )
        .unwrap();
        assert!((report.residual_norm - 0.1).abs() < 1e-15);
    }

    #[test]
    fn verify_rejects_mismatched_shapes() {
        let (a, c) = worked();
        let err = verify_solution(
            &a,
            &c,
            &RealMatrix::zeros(1, 2),
            &RealMatrix::zeros(2, 2),
            &RealMatrix::zeros(1, 1),
            &Tolerances::default(),
        );
        assert!(matches!(err, Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn partially_unobservable_reduced_pair() {
        // (A22, A12) has a stable mode invisible through A12.
        let a = m(3, 3, &[0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, -3.0]);
        let c = m(1, 3, &[1.0, 0.0, 0.0]);
        let t = Tolerances::default();
        let sol = solve_constrained_sylvester(&a, &c, Some(&PoleSet::real(&[-2.0])), &t).unwrap();
        let report = verify_solution(&a, &c, &sol.t, &sol.f, &sol.g, &t).unwrap();
        assert!(report.is_valid(&a, &c, &t), "{report:?}");
        let eig = crate::numkernel::eigenvalues(&sol.f).unwrap();
        assert!((eig.values()[0].re + 2.0).abs() < 1e-12);
        assert!((eig.values()[1].re + 3.0).abs() < 1e-12);
    }
}
