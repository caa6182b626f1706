//! Observability and detectability of a pair `(A, C)`.
//!
//! Detectability is decided eigenvalue by eigenvalue with the PBH rank test:
//! `(A, C)` is detectable exactly when every eigenvalue with
//! `Re(lambda) >= 0` keeps `[C; lambda I - A]` at full column rank. The
//! observability staircase splits the state into an observable block and an
//! unobservable block whose eigenvalues are the unobservable modes.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::numkernel::{
    complex_singular_values, eigen_order, eigenvalues, ensure_square, orthogonal_completion, svd,
    Complex64, RealMatrix,
};
use crate::tolerance::Tolerances;

/// PBH outcome for one distinct eigenvalue of `A`.
#[derive(Debug, Clone, PartialEq)]
pub struct EigAnalysis {
    pub eigenvalue: Complex64,
    pub multiplicity: usize,
    pub observable: bool,
    pub stable: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectabilityVerdict {
    pub detectable: bool,
    pub per_eigenvalue: Vec<EigAnalysis>,
    /// Unstable eigenvalues that fail the PBH test.
    pub offending: Vec<Complex64>,
}

/// Orthogonal observability staircase: `Tsim^T A Tsim = [[A11, 0], [A21, A22]]`
/// and `C Tsim = [C1, 0]` with `(A11, C1)` observable.
#[derive(Debug, Clone, PartialEq)]
pub struct ObsDecomposition {
    pub tsim: RealMatrix,
    pub a11: RealMatrix,
    pub a21: RealMatrix,
    pub a22: RealMatrix,
    pub c1: RealMatrix,
    /// Dimension of the observable subsystem.
    pub observable_dim: usize,
}

pub(crate) fn check_pair(a: &RealMatrix, c: &RealMatrix) -> Result<usize> {
    let n = ensure_square(a)?;
    if c.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "A is {n}x{n} but C has {} columns",
            c.ncols()
        )));
    }
    Ok(n)
}

pub(crate) fn is_zero(m: &RealMatrix) -> bool {
    m.iter().all(|&v| v == 0.0)
}

fn check_nonzero_pair(a: &RealMatrix, c: &RealMatrix) -> Result<usize> {
    let n = check_pair(a, c)?;
    if is_zero(c) {
        return Err(Error::ZeroOutput);
    }
    Ok(n)
}

/// PBH rank test: does `[C; lambda I - A]` have numerical rank `n`?
pub fn pbh_eig_observable(
    a: &RealMatrix,
    c: &RealMatrix,
    lambda: Complex64,
    tols: &Tolerances,
) -> Result<bool> {
    check_nonzero_pair(a, c)?;
    Ok(pbh_full_rank(a, c, lambda, tols))
}

pub(crate) fn pbh_full_rank(
    a: &RealMatrix,
    c: &RealMatrix,
    lambda: Complex64,
    tols: &Tolerances,
) -> bool {
    let n = a.nrows();
    let p = c.nrows();
    if n == 0 {
        return true;
    }
    let stacked = DMatrix::<Complex64>::from_fn(p + n, n, |r, col| {
        if r < p {
            Complex64::new(c[(r, col)], 0.0)
        } else {
            let i = r - p;
            let diag = if i == col {
                lambda
            } else {
                Complex64::new(0.0, 0.0)
            };
            diag - Complex64::new(a[(i, col)], 0.0)
        }
    });
    let sv = complex_singular_values(&stacked);
    let smax = sv.first().copied().unwrap_or(0.0);
    let cut = tols.structural * smax.max(1.0);
    sv.iter().filter(|&&s| s > cut).count() == n
}

/// Groups eigenvalues that agree within the cluster tolerance and returns
/// each group's mean with its multiplicity.
pub(crate) fn distinct_eigenvalues(
    values: &[Complex64],
    tols: &Tolerances,
) -> Vec<(Complex64, usize)> {
    let mut groups: Vec<(Complex64, Vec<Complex64>)> = Vec::new();
    for &v in values {
        match groups
            .iter_mut()
            .find(|(rep, _)| (v - *rep).norm() <= tols.cluster * (1.0 + rep.norm()))
        {
            Some((_, members)) => members.push(v),
            None => groups.push((v, vec![v])),
        }
    }
    let mut out: Vec<(Complex64, usize)> = groups
        .into_iter()
        .map(|(_, members)| {
            let k = members.len();
            let sum: Complex64 = members.iter().sum();
            (sum / k as f64, k)
        })
        .collect();
    out.sort_by(|x, y| eigen_order(&x.0, &y.0));
    out
}

pub(crate) fn detectability_unchecked(
    a: &RealMatrix,
    c: &RealMatrix,
    tols: &Tolerances,
) -> Result<DetectabilityVerdict> {
    let spectrum = eigenvalues(a)?;
    let mut per_eigenvalue = Vec::new();
    let mut offending = Vec::new();
    for (lambda, multiplicity) in distinct_eigenvalues(spectrum.values(), tols) {
        let stable = lambda.re < -tols.stability;
        let observable = pbh_full_rank(a, c, lambda, tols);
        if !stable && !observable {
            offending.push(lambda);
        }
        per_eigenvalue.push(EigAnalysis {
            eigenvalue: lambda,
            multiplicity,
            observable,
            stable,
        });
    }
    Ok(DetectabilityVerdict {
        detectable: offending.is_empty(),
        per_eigenvalue,
        offending,
    })
}

pub fn check_detectability(
    a: &RealMatrix,
    c: &RealMatrix,
    tols: &Tolerances,
) -> Result<DetectabilityVerdict> {
    check_nonzero_pair(a, c)?;
    detectability_unchecked(a, c, tols)
}

pub fn check_observability(a: &RealMatrix, c: &RealMatrix, tols: &Tolerances) -> Result<bool> {
    check_nonzero_pair(a, c)?;
    observable_unchecked(a, c, tols)
}

pub(crate) fn observable_unchecked(
    a: &RealMatrix,
    c: &RealMatrix,
    tols: &Tolerances,
) -> Result<bool> {
    let spectrum = eigenvalues(a)?;
    Ok(distinct_eigenvalues(spectrum.values(), tols)
        .into_iter()
        .all(|(lambda, _)| pbh_full_rank(a, c, lambda, tols)))
}

pub fn obs_decompose(
    a: &RealMatrix,
    c: &RealMatrix,
    tols: &Tolerances,
) -> Result<ObsDecomposition> {
    check_nonzero_pair(a, c)?;
    Ok(staircase(a, c, tols))
}

/// Controllability staircase of the dual pair `(A^T, C^T)`, transposed back.
/// Accepts a zero `C`, in which case nothing is observable.
pub(crate) fn staircase(a: &RealMatrix, c: &RealMatrix, tols: &Tolerances) -> ObsDecomposition {
    let n = a.nrows();
    let scale = (a.norm() + c.norm()).max(1.0);
    let cut = tols.structural * scale;

    let mut dual = a.transpose();
    let mut tsim = RealMatrix::identity(n, n);
    let mut found = 0;
    let mut block = c.transpose();
    while found < n && block.ncols() > 0 {
        let rows = n - found;
        let dec = svd(&block);
        let rank = dec.s.iter().filter(|&&s| s > cut).count();
        if rank == 0 {
            break;
        }
        let basis = dec.u.columns(0, rank).into_owned();
        let local = orthogonal_completion(&basis);
        let mut z = RealMatrix::identity(n, n);
        z.view_mut((found, found), (rows, rows)).copy_from(&local);
        dual = z.transpose() * &dual * &z;
        tsim = &tsim * &z;
        let start = found;
        found += rank;
        block = dual.view((found, start), (n - found, rank)).into_owned();
    }

    let transformed = tsim.transpose() * a * &tsim;
    let no = found;
    let ct = c * &tsim;
    ObsDecomposition {
        a11: transformed.view((0, 0), (no, no)).into_owned(),
        a21: transformed.view((no, 0), (n - no, no)).into_owned(),
        a22: transformed.view((no, no), (n - no, n - no)).into_owned(),
        c1: ct.columns(0, no).into_owned(),
        tsim,
        observable_dim: no,
    }
}
