//! Reduced-order observer `z' = F z + G y + P u` for the plant
//! `x' = A x + B u`, `y = C x`.
//!
//! With `T A - F T = G C` and `P = T B`, the error `e = z - T x` obeys
//! `e' = F e` whatever the input, so `z` tracks `T x` and the full state is
//! recovered as `x_hat = [C; T]^-1 [y; z]`.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::numkernel::{ensure_square, rank_tol, solve_linear, vstack, RealMatrix};
use crate::stabilize::PoleSet;
use crate::sylvsolve::solve_constrained_sylvester;
use crate::tolerance::Tolerances;

pub type RealVector = DVector<f64>;

#[derive(Debug, Clone, PartialEq)]
pub struct Plant {
    a: RealMatrix,
    b: RealMatrix,
    c: RealMatrix,
}

impl Plant {
    pub fn new(a: RealMatrix, b: RealMatrix, c: RealMatrix, tols: &Tolerances) -> Result<Self> {
        let n = ensure_square(&a)?;
        if b.nrows() != n {
            return Err(Error::DimensionMismatch(format!(
                "B has {} rows, expected {n}",
                b.nrows()
            )));
        }
        if c.ncols() != n {
            return Err(Error::DimensionMismatch(format!(
                "C has {} columns, expected {n}",
                c.ncols()
            )));
        }
        let p = c.nrows();
        let rank = rank_tol(&c, tols.rank);
        if rank != p {
            return Err(Error::RankDeficient { rank, expected: p });
        }
        Ok(Self { a, b, c })
    }

    pub fn a(&self) -> &RealMatrix {
        &self.a
    }

    pub fn b(&self) -> &RealMatrix {
        &self.b
    }

    pub fn c(&self) -> &RealMatrix {
        &self.c
    }

    pub fn states(&self) -> usize {
        self.a.nrows()
    }

    pub fn inputs(&self) -> usize {
        self.b.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.c.nrows()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReducedObserver {
    pub f: RealMatrix,
    pub g: RealMatrix,
    pub p: RealMatrix,
    pub t: RealMatrix,
    /// `[C; T]^-1`
    pub w: RealMatrix,
}

impl ReducedObserver {
    pub fn order(&self) -> usize {
        self.f.nrows()
    }

    pub fn states(&self) -> usize {
        self.t.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.g.ncols()
    }

    pub fn inputs(&self) -> usize {
        self.p.ncols()
    }

    /// Checks that the observer's shapes fit the plant.
    pub fn check_compatible(&self, plant: &Plant) -> Result<()> {
        let r = self.order();
        let (n, m, p) = (plant.states(), plant.inputs(), plant.outputs());
        let ok = r + p == n
            && self.f.shape() == (r, r)
            && self.g.shape() == (r, p)
            && self.p.shape() == (r, m)
            && self.t.shape() == (r, n)
            && self.w.shape() == (n, n);
        if ok {
            Ok(())
        } else {
            Err(Error::DimensionMismatch(format!(
                "observer (order {r}, F {:?}, G {:?}, P {:?}, T {:?}, W {:?}) does not fit a plant with n={n}, m={m}, p={p}",
                self.f.shape(),
                self.g.shape(),
                self.p.shape(),
                self.t.shape(),
                self.w.shape()
            )))
        }
    }

    /// Assembles an observer from stored matrices, validating internal shapes.
    pub fn from_parts(
        f: RealMatrix,
        g: RealMatrix,
        p: RealMatrix,
        t: RealMatrix,
        w: RealMatrix,
    ) -> Result<Self> {
        let r = f.nrows();
        let n = t.ncols();
        if f.ncols() != r
            || g.nrows() != r
            || p.nrows() != r
            || t.nrows() != r
            || w.shape() != (n, n)
            || g.ncols() + r != n
        {
            return Err(Error::DimensionMismatch(format!(
                "inconsistent observer shapes: F {:?}, G {:?}, P {:?}, T {:?}, W {:?}",
                f.shape(),
                g.shape(),
                p.shape(),
                t.shape(),
                w.shape()
            )));
        }
        Ok(Self { f, g, p, t, w })
    }
}

pub fn synthesize_observer(
    plant: &Plant,
    desired: Option<&PoleSet>,
    tols: &Tolerances,
) -> Result<ReducedObserver> {
    let sol = solve_constrained_sylvester(plant.a(), plant.c(), desired, tols)?;
    let p = &sol.t * plant.b();
    let n = plant.states();
    let stacked = vstack(plant.c(), &sol.t);
    let w = solve_linear(&stacked, &RealMatrix::identity(n, n))?;
    Ok(ReducedObserver {
        f: sol.f,
        g: sol.g,
        p,
        t: sol.t,
        w,
    })
}

fn check_len(what: &str, v: &RealVector, want: usize) -> Result<()> {
    if v.len() != want {
        return Err(Error::DimensionMismatch(format!(
            "{what} has length {}, expected {want}",
            v.len()
        )));
    }
    Ok(())
}

/// `x_hat = W [y; z]`.
pub fn estimate_state(obs: &ReducedObserver, y: &RealVector, z: &RealVector) -> Result<RealVector> {
    check_len("y", y, obs.outputs())?;
    check_len("z", z, obs.order())?;
    let p = obs.outputs();
    let stacked = RealVector::from_fn(p + obs.order(), |i, _| if i < p { y[i] } else { z[i - p] });
    Ok(&obs.w * stacked)
}

/// `F z + G y + P u`.
pub fn observer_derivative(
    obs: &ReducedObserver,
    z: &RealVector,
    y: &RealVector,
    u: &RealVector,
) -> Result<RealVector> {
    check_len("z", z, obs.order())?;
    check_len("y", y, obs.outputs())?;
    check_len("u", u, obs.inputs())?;
    Ok(&obs.f * z + &obs.g * y + &obs.p * u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkernel::matrix;

    fn m(rows: usize, cols: usize, data: &[f64]) -> RealMatrix {
        matrix(rows, cols, data).unwrap()
    }

    fn v(data: &[f64]) -> RealVector {
        RealVector::from_column_slice(data)
    }

    fn worked(b: RealMatrix) -> ReducedObserver {
        let t = Tolerances::default();
        let plant =
            Plant::new(m(2, 2, &[0.0, 1.0, 0.0, 0.0]), b, m(1, 2, &[1.0, 0.0]), &t).unwrap();
        synthesize_observer(&plant, Some(&PoleSet::real(&[-1.0])), &t).unwrap()
    }

    #[test]
    fn worked_observer() {
        let obs = worked(m(2, 1, &[0.0, 1.0]));
        assert_eq!(obs.f, m(1, 1, &[-1.0]));
        assert_eq!(obs.g, m(1, 1, &[-1.0]));
        assert_eq!(obs.t, m(1, 2, &[-1.0, 1.0]));
        assert_eq!(obs.p, m(1, 1, &[1.0]));
        assert!((&obs.w - m(2, 2, &[1.0, 0.0, 1.0, 1.0])).norm() < 1e-15);
    }

    #[test]
    fn zero_input_matrix_gives_zero_p() {
        let obs = worked(RealMatrix::zeros(2, 1));
        assert_eq!(obs.p, RealMatrix::zeros(1, 1));
        assert_eq!(obs.f, m(1, 1, &[-1.0]));
    }

    #[test]
    fn undetectable_plant() {
        let t = Tolerances::default();
        let plant = Plant::new(
            RealMatrix::identity(2, 2),
            m(2, 1, &[1.0, 1.0]),
            m(1, 2, &[1.0, 0.0]),
            &t,
        )
        .unwrap();
        assert!(matches!(
            synthesize_observer(&plant, None, &t),
            Err(Error::Undetectable { .. })
        ));
    }

    #[test]
    fn plant_validation() {
        let t = Tolerances::default();
        let a = RealMatrix::identity(2, 2);
        assert!(matches!(
            Plant::new(a.clone(), RealMatrix::zeros(3, 1), m(1, 2, &[1.0, 0.0]), &t),
            Err(Error::DimensionMismatch(_))
        ));
        assert!(matches!(
            Plant::new(
                a,
                RealMatrix::zeros(2, 1),
                m(2, 2, &[1.0, 1.0, 1.0, 1.0]),
                &t
            ),
            Err(Error::RankDeficient { .. })
        ));
    }

    #[test]
    fn estimate_examples() {
        let obs = worked(m(2, 1, &[0.0, 1.0]));
        let x = estimate_state(&obs, &v(&[2.0]), &v(&[3.0])).unwrap();
        assert!((x - v(&[2.0, 5.0])).norm() < 1e-15);
        let x = estimate_state(&obs, &v(&[0.0]), &v(&[0.0])).unwrap();
        assert_eq!(x, v(&[0.0, 0.0]));
        let x0 = v(&[0.7, -1.3]);
        let c = m(1, 2, &[1.0, 0.0]);
        let x = estimate_state(&obs, &(&c * &x0), &(&obs.t * &x0)).unwrap();
        assert!((x - x0).norm() < 1e-15);
        assert!(matches!(
            estimate_state(&obs, &v(&[1.0, 2.0]), &v(&[0.0])),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn derivative_examples() {
        let obs = worked(m(2, 1, &[0.0, 1.0]));
        let d = |z: f64, y: f64, u: f64| {
            observer_derivative(&obs, &v(&[z]), &v(&[y]), &v(&[u])).unwrap()[0]
        };
        assert_eq!(d(1.0, 0.0, 0.0), -1.0);
        assert_eq!(d(0.0, 1.0, 0.0), -1.0);
        assert_eq!(d(1.0, 2.0, 3.0), 0.0);
        assert!(matches!(
            observer_derivative(&obs, &v(&[1.0]), &v(&[1.0]), &v(&[])),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn order_zero_observer() {
        let t = Tolerances::default();
        let c = m(2, 2, &[2.0, 1.0, 0.0, 1.0]);
        let plant = Plant::new(
            m(2, 2, &[-1.0, 0.0, 0.0, 2.0]),
            m(2, 1, &[1.0, 0.0]),
            c.clone(),
            &t,
        )
        .unwrap();
        let obs = synthesize_observer(&plant, None, &t).unwrap();
        assert_eq!(obs.order(), 0);
        obs.check_compatible(&plant).unwrap();
        let x = v(&[0.25, -4.0]);
        let xhat = estimate_state(&obs, &(&c * &x), &v(&[])).unwrap();
        assert!((xhat - x).norm() < 1e-12);
    }
}
