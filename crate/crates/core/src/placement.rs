//! Recursive Schur-form eigenvalue assignment for state feedback `A + B F`.
//!
//! The closed loop is kept in real Schur form. Each step assigns the bottom
//! 1x1 or 2x2 diagonal block through the last columns of `F`, which leaves
//! the leading blocks untouched, and then swaps the freshly assigned block up
//! past the still-unassigned blocks so the next step again works on the bottom.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::numkernel::{
    eig2, orthogonal_completion, quasi_blocks, real_schur, svd, Complex64, RealMatrix,
};
use crate::tolerance::Tolerances;

struct Workspace {
    /// Closed loop in the current orthogonal coordinates.
    m: RealMatrix,
    b: RealMatrix,
    q: RealMatrix,
    /// Feedback in the current coordinates: `F = f q^T`.
    f: RealMatrix,
    blocks: Vec<usize>,
    cut: f64,
    cluster: f64,
}

/// Returns `F` (`m x n`) with `eig(A + B F)` equal to `poles`.
///
/// `poles` must be conjugate-closed with length `n`, and `(A, B)` controllable.
pub(crate) fn assign(
    a: &RealMatrix,
    b: &RealMatrix,
    poles: &[Complex64],
    tols: &Tolerances,
) -> Result<RealMatrix> {
    let n = a.nrows();
    let inputs = b.ncols();
    if n == 0 {
        return Ok(RealMatrix::zeros(inputs, 0));
    }
    let (q, s) = real_schur(a, tols.schur_max_iter)?;
    let mut ws = Workspace {
        blocks: quasi_blocks(&s),
        b: q.transpose() * b,
        m: s,
        q,
        f: RealMatrix::zeros(inputs, n),
        cut: tols.structural * (a.norm() + b.norm()).max(1.0),
        cluster: tols.cluster,
    };
    ws.split_real_blocks();

    let mut remaining: Vec<Complex64> = poles.to_vec();
    let mut done = 0;
    while done < ws.blocks.len() {
        let last = ws.blocks.len() - 1;
        let fresh = if ws.blocks[last] == 2 {
            let current = ws.block_eigenvalues(last)[0];
            if let Some(pair) = take_pair(&mut remaining, current) {
                ws.assign_pair(pair)?;
            } else {
                let r1 = take_real(&mut remaining, current.re).ok_or_else(exhausted)?;
                let r2 = take_real(&mut remaining, current.re).ok_or_else(exhausted)?;
                ws.assign_pair([Complex64::new(r1, 0.0), Complex64::new(r2, 0.0)])?;
            }
            ws.split_block_if_real(last)
        } else {
            let current = ws.m[(n - 1, n - 1)];
            if let Some(r) = take_real(&mut remaining, current) {
                ws.assign_real(r)?;
                1
            } else {
                let pair = take_pair(&mut remaining, Complex64::new(current, 0.0))
                    .ok_or_else(exhausted)?;
                let partner = (done..last)
                    .rev()
                    .find(|&j| ws.blocks[j] == 1)
                    .ok_or_else(exhausted)?;
                for j in partner..last - 1 {
                    ws.swap(j);
                }
                ws.blocks.truncate(last - 1);
                ws.blocks.push(2);
                ws.assign_pair(pair)?;
                ws.split_block_if_real(last - 1)
            }
        };
        let len = ws.blocks.len();
        for i in 0..fresh {
            let from = len - fresh + i;
            for j in (done..from).rev() {
                ws.swap(j);
            }
            done += 1;
        }
    }
    Ok(&ws.f * ws.q.transpose())
}

fn exhausted() -> Error {
    Error::InvalidPoles("pole set does not match the real/complex block structure".into())
}

fn take_real(poles: &mut Vec<Complex64>, near: f64) -> Option<f64> {
    let idx = poles
        .iter()
        .enumerate()
        .filter(|(_, l)| l.im == 0.0)
        .min_by(|(_, x), (_, y)| (x.re - near).abs().total_cmp(&(y.re - near).abs()))
        .map(|(i, _)| i)?;
    Some(poles.remove(idx).re)
}

fn take_pair(poles: &mut Vec<Complex64>, near: Complex64) -> Option<[Complex64; 2]> {
    let idx = poles
        .iter()
        .enumerate()
        .filter(|(_, l)| l.im > 0.0)
        .min_by(|(_, x), (_, y)| (**x - near).norm().total_cmp(&(**y - near).norm()))
        .map(|(i, _)| i)?;
    let upper = poles.remove(idx);
    let conj = poles.iter().position(|l| *l == upper.conj())?;
    poles.remove(conj);
    Some([upper, upper.conj()])
}

impl Workspace {
    fn n(&self) -> usize {
        self.m.nrows()
    }

    fn start(&self, idx: usize) -> usize {
        self.blocks[..idx].iter().sum()
    }

    fn block_eigenvalues(&self, idx: usize) -> Vec<Complex64> {
        let s = self.start(idx);
        if self.blocks[idx] == 1 {
            vec![Complex64::new(self.m[(s, s)], 0.0)]
        } else {
            eig2(
                self.m[(s, s)],
                self.m[(s, s + 1)],
                self.m[(s + 1, s)],
                self.m[(s + 1, s + 1)],
            )
            .to_vec()
        }
    }

    /// Applies the orthogonal change of coordinates `diag(I, local, I)` with
    /// `local` acting on rows/columns `start..start + local.nrows()`.
    fn rotate(&mut self, start: usize, local: &RealMatrix) {
        let n = self.n();
        let k = local.nrows();
        let mut z = RealMatrix::identity(n, n);
        z.view_mut((start, start), (k, k)).copy_from(local);
        self.m = z.transpose() * &self.m * &z;
        self.b = z.transpose() * &self.b;
        self.q = &self.q * &z;
        self.f = &self.f * &z;
    }

    fn add_feedback(&mut self, start: usize, local: &RealMatrix) {
        let mut delta = RealMatrix::zeros(self.f.nrows(), self.n());
        delta.view_mut((0, start), local.shape()).copy_from(local);
        self.m += &self.b * &delta;
        self.f += delta;
    }

    fn split_real_blocks(&mut self) {
        let mut idx = 0;
        while idx < self.blocks.len() {
            if self.blocks[idx] == 2 {
                idx += self.split_block_if_real(idx);
            } else {
                idx += 1;
            }
        }
    }

    /// Triangularizes a 2x2 block with real eigenvalues into two 1x1 blocks.
    /// Returns the number of blocks now occupying the slot.
    fn split_block_if_real(&mut self, idx: usize) -> usize {
        let l1 = self.block_eigenvalues(idx)[0];
        if l1.im != 0.0 {
            return 1;
        }
        let s = self.start(idx);
        let (r11, r12, r21, r22) = (
            self.m[(s, s)],
            self.m[(s, s + 1)],
            self.m[(s + 1, s)],
            self.m[(s + 1, s + 1)],
        );
        // Eigenvector of the block for l1, taken from whichever row of
        // (R - l1 I) gives the better-scaled null vector.
        let from_first = [r12, l1.re - r11];
        let from_second = [l1.re - r22, r21];
        let norm = |v: &[f64; 2]| v[0].hypot(v[1]);
        let mut v = if norm(&from_first) >= norm(&from_second) {
            from_first
        } else {
            from_second
        };
        let nv = norm(&v);
        if nv == 0.0 {
            v = [1.0, 0.0];
        } else {
            v = [v[0] / nv, v[1] / nv];
        }
        let local = RealMatrix::from_row_slice(2, 2, &[v[0], -v[1], v[1], v[0]]);
        self.rotate(s, &local);
        self.m[(s + 1, s)] = 0.0;
        self.blocks.splice(idx..=idx, [1, 1]);
        2
    }

    /// Exchanges blocks `idx` and `idx + 1`. Blocks with coinciding spectra
    /// are left in place: only the eigenvalue values matter to the caller.
    fn swap(&mut self, idx: usize) {
        let (p1, p2) = (self.blocks[idx], self.blocks[idx + 1]);
        if p1 == p2 && self.same_spectrum(idx) {
            return;
        }
        let s = self.start(idx);
        let a11 = self.m.view((s, s), (p1, p1)).into_owned();
        let a12 = self.m.view((s, s + p1), (p1, p2)).into_owned();
        let a22 = self.m.view((s + p1, s + p1), (p2, p2)).into_owned();
        // span [X; I] is invariant with spectrum eig(A22) when A11 X - X A22 = -A12.
        let kron = RealMatrix::identity(p2, p2).kronecker(&a11)
            - a22.transpose().kronecker(&RealMatrix::identity(p1, p1));
        let rhs = -DMatrix::from_column_slice(p1 * p2, 1, a12.as_slice());
        let Some(x) = kron.full_piv_lu().solve(&rhs) else {
            return;
        };
        let mut basis = RealMatrix::zeros(p1 + p2, p2);
        basis
            .view_mut((0, 0), (p1, p2))
            .copy_from(&DMatrix::from_column_slice(p1, p2, x.as_slice()));
        basis
            .view_mut((p1, 0), (p2, p2))
            .copy_from(&RealMatrix::identity(p2, p2));
        let local = orthogonal_completion(&basis);
        self.rotate(s, &local);
        self.m.view_mut((s + p2, s), (p1, p2)).fill(0.0);
        self.blocks[idx] = p2;
        self.blocks[idx + 1] = p1;
    }

    fn same_spectrum(&self, idx: usize) -> bool {
        let a = self.block_eigenvalues(idx);
        let b = self.block_eigenvalues(idx + 1);
        a.iter().all(|x| {
            b.iter()
                .any(|y| (x - y).norm() <= self.cluster * (1.0 + x.norm()))
        })
    }

    fn assign_real(&mut self, target: f64) -> Result<()> {
        let s = self.n() - 1;
        let row = self.b.row(s).into_owned();
        let nrm2 = row.norm_squared();
        if nrm2.sqrt() <= self.cut {
            return Err(Error::Unobservable);
        }
        let scale = (target - self.m[(s, s)]) / nrm2;
        let gain = RealMatrix::from_iterator(row.len(), 1, row.iter().map(|v| v * scale));
        self.add_feedback(s, &gain);
        Ok(())
    }

    /// Gives the trailing 2x2 block the characteristic polynomial with roots `pair`.
    fn assign_pair(&mut self, pair: [Complex64; 2]) -> Result<()> {
        let s = self.n() - 2;
        let r = self.m.view((s, s), (2, 2)).into_owned();
        let bb = self.b.rows(s, 2).into_owned();
        let trace = (pair[0] + pair[1]).re;
        let det = (pair[0] * pair[1]).re;

        let dec = svd(&bb);
        let sv = &dec.s;
        if sv[0] <= self.cut {
            return Err(Error::Unobservable);
        }
        let mut candidates: Vec<RealMatrix> = Vec::new();

        // Rank-one route through the dominant input direction v:
        // tr(R + u g^T) = tr R + g.u and det(R + u g^T) = det R + g.(adj R u).
        let v = dec.v.column(0).into_owned();
        let u = &bb * &v;
        let w = [
            r[(1, 1)] * u[0] - r[(0, 1)] * u[1],
            -r[(1, 0)] * u[0] + r[(0, 0)] * u[1],
        ];
        let sys = RealMatrix::from_row_slice(2, 2, &[u[0], u[1], w[0], w[1]]);
        let sys_det = sys.determinant();
        if sys_det.abs() > 1e-12 * u.norm() * w[0].hypot(w[1]).max(f64::MIN_POSITIVE) {
            let rhs =
                RealMatrix::from_column_slice(2, 1, &[trace - r.trace(), det - r.determinant()]);
            if let Some(g) = sys.lu().solve(&rhs) {
                candidates.push(&v * g.transpose());
            }
        }

        // Full-rank route: R + Bb F = target exactly.
        if sv.len() > 1 && sv[1] > self.cut {
            let target = if pair[0].im != 0.0 {
                let (re, im) = (pair[0].re, pair[0].im.abs());
                RealMatrix::from_row_slice(2, 2, &[re, im, -im, re])
            } else {
                RealMatrix::from_row_slice(2, 2, &[pair[0].re, 0.0, 0.0, pair[1].re])
            };
            // Bb has full row rank 2: pinv = V_2 S_2^-1 U^T.
            let mut pinv = RealMatrix::zeros(bb.ncols(), 2);
            for (k, s) in sv.iter().enumerate().take(2) {
                pinv += dec.v.column(k) * dec.u.column(k).transpose() / *s;
            }
            candidates.push(pinv * (target - &r));
        }

        let gain = candidates
            .into_iter()
            .min_by(|x, y| x.norm().total_cmp(&y.norm()))
            .ok_or(Error::Unobservable)?;
        self.add_feedback(s, &gain);
        Ok(())
    }
}
