//! Output-injection gains `K` for `A + K C`: exact pole assignment on
//! observable pairs and stabilization of detectable pairs through the
//! observability staircase.

use crate::error::{Error, Result};
use crate::numkernel::{sort_eigenvalues, Complex64, RealMatrix};
use crate::placement;
use crate::structure::{
    check_pair, detectability_unchecked, is_zero, observable_unchecked, staircase,
};
use crate::tolerance::Tolerances;

/// Conjugate-closed multiset of target eigenvalues.
#[derive(Debug, Clone, PartialEq)]
pub struct PoleSet {
    values: Vec<Complex64>,
}

impl PoleSet {
    /// Validates conjugate closure. Imaginary parts below `1e-12 * (1 + |lambda|)`
    /// are snapped to zero and matched partners are made exact conjugates.
    pub fn new(values: Vec<Complex64>) -> Result<Self> {
        let mut values: Vec<Complex64> = values
            .into_iter()
            .map(|l| {
                if l.im.abs() <= 1e-12 * (1.0 + l.norm()) {
                    Complex64::new(l.re, 0.0)
                } else {
                    l
                }
            })
            .collect();
        if let Some(bad) = values
            .iter()
            .find(|l| !l.re.is_finite() || !l.im.is_finite())
        {
            return Err(Error::InvalidPoles(format!("non-finite pole {bad}")));
        }
        let mut used = vec![false; values.len()];
        for i in 0..values.len() {
            if used[i] || values[i].im <= 0.0 {
                continue;
            }
            let want = values[i].conj();
            let partner = (0..values.len())
                .filter(|&j| !used[j] && j != i && values[j].im < 0.0)
                .min_by(|&x, &y| {
                    (values[x] - want)
                        .norm()
                        .total_cmp(&(values[y] - want).norm())
                })
                .filter(|&j| (values[j] - want).norm() <= 1e-9 * (1.0 + want.norm()));
            match partner {
                Some(j) => {
                    values[j] = want;
                    used[i] = true;
                    used[j] = true;
                }
                None => {
                    return Err(Error::InvalidPoles(format!(
                        "{} has no conjugate partner",
                        crate::numkernel::format_complex(values[i])
                    )))
                }
            }
        }
        if let Some(j) = (0..values.len()).find(|&j| values[j].im < 0.0 && !used[j]) {
            return Err(Error::InvalidPoles(format!(
                "{} has no conjugate partner",
                crate::numkernel::format_complex(values[j])
            )));
        }
        sort_eigenvalues(&mut values);
        Ok(Self { values })
    }

    pub fn real(values: &[f64]) -> Self {
        Self::new(values.iter().map(|&r| Complex64::new(r, 0.0)).collect())
            .expect("real poles are conjugate-closed")
    }

    /// `{-1.0, -1.5, -2.0, ...}` with `n` entries.
    pub fn default_stable(n: usize) -> Self {
        let poles: Vec<f64> = (0..n).map(|k| -1.0 - 0.5 * k as f64).collect();
        Self::real(&poles)
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_hurwitz(&self) -> bool {
        self.values.iter().all(|l| l.re < 0.0)
    }
}

/// Gain `K` (`n x p`) with `eig(Ao + K Co)` equal to `desired`.
///
/// For `p > 1` the gain is reproducible but not canonical.
pub fn place_poles(
    ao: &RealMatrix,
    co: &RealMatrix,
    desired: &PoleSet,
    tols: &Tolerances,
) -> Result<RealMatrix> {
    let n = check_pair(ao, co)?;
    if desired.len() != n {
        return Err(Error::InvalidPoles(format!(
            "{} poles given for a system of order {n}",
            desired.len()
        )));
    }
    if n == 0 {
        return Ok(RealMatrix::zeros(0, co.nrows()));
    }
    if is_zero(co) || !observable_unchecked(ao, co, tols)? {
        return Err(Error::Unobservable);
    }
    // Output injection on (A, C) is state feedback on (A^T, C^T).
    let f = placement::assign(&ao.transpose(), &co.transpose(), desired.values(), tols)?;
    Ok(f.transpose())
}

/// Gain `K` making `Ao + K Co` Hurwitz for a detectable pair.
///
/// Observable pairs get every pole from `desired` (default
/// [`PoleSet::default_stable`]). Otherwise the poles go to the observable
/// block of the staircase `(A11, C1)` only, and `K = Tsim [K1; 0]` leaves the
/// stable unobservable eigenvalues where they are; `desired` must then have
/// the observable block's dimension.
pub fn stabilizing_gain(
    ao: &RealMatrix,
    co: &RealMatrix,
    desired: Option<&PoleSet>,
    tols: &Tolerances,
) -> Result<RealMatrix> {
    let n = check_pair(ao, co)?;
    let p = co.nrows();
    if n == 0 {
        return Ok(RealMatrix::zeros(0, p));
    }
    if let Some(poles) = desired {
        if !poles.is_hurwitz() {
            return Err(Error::InvalidPoles(
                "stabilization targets must have negative real parts".into(),
            ));
        }
    }
    let verdict = detectability_unchecked(ao, co, tols)?;
    if !verdict.detectable {
        return Err(Error::Undetectable {
            offending: verdict.offending,
        });
    }

    let dec = staircase(ao, co, tols);
    let no = dec.observable_dim;
    let default;
    let poles = match desired {
        Some(poles) => poles,
        None => {
            default = PoleSet::default_stable(no);
            &default
        }
    };
    if poles.len() != no {
        return Err(Error::InvalidPoles(format!(
            "{} poles given but the observable part has order {no}",
            poles.len()
        )));
    }
    if no == n {
        return place_poles(ao, co, poles, tols);
    }
    let mut k = RealMatrix::zeros(n, p);
    if no > 0 {
        let k1 = place_poles(&dec.a11, &dec.c1, poles, tols)?;
        k.view_mut((0, 0), (no, p)).copy_from(&k1);
    }
    Ok(&dec.tsim * k)
}
