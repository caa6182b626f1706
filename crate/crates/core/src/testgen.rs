//! Seeded generator of `(A, C)` pairs with known structure.
//!
//! Every pair is built as `A = S [[A11, 0], [A21, A22]] S^-1`,
//! `C = [C1, 0] S^-1`, with `(A11, C1)` observable by a margin and the
//! eigenvalues of `A22` planted, so the unobservable modes (and whether any of
//! them is unstable) are known exactly.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::numkernel::{eigenvalues, Complex64, RealMatrix};
use crate::structure::check_observability;
use crate::tolerance::Tolerances;

/// PBH cutoff used when sampling the observable block.
pub const OBSERVABILITY_MARGIN: f64 = 1e-2;
/// Minimum distance between planted eigenvalues and any other eigenvalue.
pub const EIGENVALUE_GAP: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairKind {
    Observable,
    Detectable,
    Undetectable,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedPair {
    pub a: RealMatrix,
    pub c: RealMatrix,
    pub kind: PairKind,
    pub observable_dim: usize,
    /// Eigenvalues of the unobservable block.
    pub unobservable: Vec<Complex64>,
    /// The unobservable eigenvalues with nonnegative real part.
    pub offending: Vec<Complex64>,
}

impl GeneratedPair {
    pub fn is_detectable(&self) -> bool {
        self.offending.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct PairGenerator {
    rng: ChaCha8Rng,
}

impl PairGenerator {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    /// `(n, p)` with `2 <= n <= max_n` and `1 <= p < n`.
    pub fn dims(&mut self, max_n: usize) -> (usize, usize) {
        assert!(max_n >= 2, "need room for at least one unmeasured state");
        let n = self.rng.gen_range(2..=max_n);
        let p = self.rng.gen_range(1..n);
        (n, p)
    }

    /// Entries uniform in `[-1, 1]`.
    pub fn matrix(&mut self, rows: usize, cols: usize) -> RealMatrix {
        RealMatrix::from_fn(rows, cols, |_, _| self.rng.gen_range(-1.0..=1.0))
    }

    pub fn orthogonal(&mut self, n: usize) -> RealMatrix {
        loop {
            let m = self.matrix(n, n);
            let qr = m.clone().qr();
            let r = qr.r();
            if (0..n).all(|i| r[(i, i)].abs() > 1e-3) {
                return qr.q();
            }
        }
    }

    /// `(S, S^-1)` with `S = U diag(d) V`, `d` in `[0.5, 2]`, so `cond(S) <= 4`.
    pub fn similarity(&mut self, n: usize) -> (RealMatrix, RealMatrix) {
        let u = self.orthogonal(n);
        let v = self.orthogonal(n);
        let d: Vec<f64> = (0..n).map(|_| self.rng.gen_range(0.5..=2.0)).collect();
        let dm = RealMatrix::from_diagonal(&nalgebra::DVector::from_vec(d.clone()));
        let dinv = RealMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            n,
            d.iter().map(|x| 1.0 / x),
        ));
        (&u * dm * &v, v.transpose() * dinv * u.transpose())
    }

    /// Observable pair of order `n` with `p` outputs and full-row-rank `C`.
    pub fn observable(&mut self, n: usize, p: usize) -> GeneratedPair {
        self.embed(n, p, n, PairKind::Observable)
    }

    /// Detectable pair; may or may not have stable unobservable modes.
    pub fn detectable(&mut self, n: usize, p: usize) -> GeneratedPair {
        let no = self.rng.gen_range(p..=n);
        self.embed(n, p, no, PairKind::Detectable)
    }

    /// Pair with at least one unstable unobservable mode. Requires `p < n`.
    pub fn undetectable(&mut self, n: usize, p: usize) -> GeneratedPair {
        assert!(p < n, "an unobservable mode needs p < n");
        let no = self.rng.gen_range(p..n);
        self.embed(n, p, no, PairKind::Undetectable)
    }

    pub fn any(&mut self, n: usize, p: usize) -> GeneratedPair {
        let kinds: &[PairKind] = if p < n {
            &[
                PairKind::Observable,
                PairKind::Detectable,
                PairKind::Undetectable,
            ]
        } else {
            &[PairKind::Observable, PairKind::Detectable]
        };
        match *kinds.choose(&mut self.rng).expect("non-empty") {
            PairKind::Observable => self.observable(n, p),
            PairKind::Detectable => self.detectable(n, p),
            PairKind::Undetectable => self.undetectable(n, p),
        }
    }

    fn embed(&mut self, n: usize, p: usize, no: usize, kind: PairKind) -> GeneratedPair {
        assert!(1 <= p && p <= no && no <= n);
        let nu = n - no;
        let planted = self.planted(nu, kind == PairKind::Undetectable);
        let (a11, c1) = self.observable_block(no, p, &planted);
        let a22 = self.quasi_triangular_block(&planted);

        let mut a = RealMatrix::zeros(n, n);
        a.view_mut((0, 0), (no, no)).copy_from(&a11);
        a.view_mut((no, 0), (nu, no))
            .copy_from(&self.matrix(nu, no));
        a.view_mut((no, no), (nu, nu)).copy_from(&a22);
        let mut c = RealMatrix::zeros(p, n);
        c.view_mut((0, 0), (p, no)).copy_from(&c1);

        let (s, s_inv) = self.similarity(n);
        let offending = planted.iter().copied().filter(|l| l.re >= 0.0).collect();
        GeneratedPair {
            a: &s * a * &s_inv,
            c: c * s_inv,
            kind,
            observable_dim: no,
            unobservable: planted,
            offending,
        }
    }

    fn planted(&mut self, count: usize, need_unstable: bool) -> Vec<Complex64> {
        loop {
            let mut out: Vec<Complex64> = Vec::with_capacity(count);
            while out.len() < count {
                let unstable = need_unstable && out.is_empty();
                let re = if unstable {
                    self.rng.gen_range(0.0..=2.0)
                } else {
                    self.rng.gen_range(-3.0..=-0.3)
                };
                if count - out.len() >= 2 && self.rng.gen_bool(0.3) {
                    let im = self.rng.gen_range(0.3..=2.0);
                    out.push(Complex64::new(re, im));
                    out.push(Complex64::new(re, -im));
                } else {
                    out.push(Complex64::new(re, 0.0));
                }
            }
            if separated(&out, &[]) {
                return out;
            }
        }
    }

    fn observable_block(
        &mut self,
        no: usize,
        p: usize,
        avoid: &[Complex64],
    ) -> (RealMatrix, RealMatrix) {
        let tols = Tolerances::with_structural(OBSERVABILITY_MARGIN);
        loop {
            let a11 = self.matrix(no, no);
            let c1 = self.matrix(p, no);
            if crate::numkernel::min_singular_value(&c1.transpose()) < 0.1 {
                continue;
            }
            let Ok(spectrum) = eigenvalues(&a11) else {
                continue;
            };
            if !avoid.iter().all(|x| {
                spectrum
                    .values()
                    .iter()
                    .all(|y| (x - y).norm() >= EIGENVALUE_GAP)
            }) {
                continue;
            }
            if check_observability(&a11, &c1, &tols).unwrap_or(false) {
                return (a11, c1);
            }
        }
    }

    /// Random orthogonal similarity of a real quasi-triangular matrix whose
    /// diagonal blocks carry `values` exactly.
    fn quasi_triangular_block(&mut self, values: &[Complex64]) -> RealMatrix {
        let n = values.len();
        let mut u = RealMatrix::zeros(n, n);
        let mut i = 0;
        while i < n {
            let l = values[i];
            if l.im == 0.0 {
                u[(i, i)] = l.re;
                i += 1;
            } else {
                // [[re, s], [-im^2 / s, re]] has eigenvalues re +- i im.
                let s = self.rng.gen_range(0.5..=2.0);
                u[(i, i)] = l.re;
                u[(i + 1, i + 1)] = l.re;
                u[(i, i + 1)] = s;
                u[(i + 1, i)] = -l.im * l.im / s;
                i += 2;
            }
        }
        for r in 0..n {
            for c in r + 1..n {
                if u[(r, c)] == 0.0 && !(c == r + 1 && u[(c, r)] != 0.0) {
                    u[(r, c)] = self.rng.gen_range(-1.0..=1.0);
                }
            }
        }
        let q = self.orthogonal(n);
        &q * u * q.transpose()
    }
}

fn separated(values: &[Complex64], others: &[Complex64]) -> bool {
    values.iter().enumerate().all(|(i, x)| {
        values[i + 1..]
            .iter()
            .chain(others)
            .all(|y| (x - y).norm() >= EIGENVALUE_GAP)
    })
}
