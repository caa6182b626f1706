//! Dense real-matrix kernels shared by every other module: numerical rank,
//! eigenvalues through the real Schur form, linear solves and the output
//! normalizing transformation `L` with `C L = [I_p, 0]`.

use std::cmp::Ordering;

use nalgebra::linalg::Schur;
use nalgebra::{Complex, DMatrix};

use crate::error::{Error, Result};
use crate::tolerance::Tolerances;

pub type RealMatrix = DMatrix<f64>;
pub type Complex64 = Complex<f64>;

/// Builds a matrix from row-major data, rejecting wrong lengths and non-finite entries.
pub fn matrix(rows: usize, cols: usize, data: &[f64]) -> Result<RealMatrix> {
    if data.len() != rows * cols {
        return Err(Error::DataLength {
            rows,
            cols,
            got: data.len(),
        });
    }
    let m = RealMatrix::from_row_slice(rows, cols, data);
    ensure_finite(&m)?;
    Ok(m)
}

pub fn ensure_finite(m: &RealMatrix) -> Result<()> {
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            if !m[(r, c)].is_finite() {
                return Err(Error::NonFinite { row: r, col: c });
            }
        }
    }
    Ok(())
}

pub fn ensure_square(m: &RealMatrix) -> Result<usize> {
    if m.nrows() != m.ncols() {
        return Err(Error::NonSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    Ok(m.nrows())
}

/// Full singular value decomposition `M = U diag(s) V^T`, `s` descending.
///
/// Backed by faer: nalgebra 0.35's SVD returns inaccurate factors for some
/// rank-deficient inputs, which the rank decisions here cannot tolerate.
pub(crate) struct Svd {
    pub u: RealMatrix,
    pub s: Vec<f64>,
    pub v: RealMatrix,
}

fn to_faer<T: Copy>(m: &DMatrix<T>) -> faer::Mat<T> {
    faer::Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

fn from_faer(m: faer::MatRef<'_, f64>) -> RealMatrix {
    RealMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

/// # Panics
/// If the iteration fails to converge, which does not happen for finite input.
pub(crate) fn svd(m: &RealMatrix) -> Svd {
    let (rows, cols) = m.shape();
    if rows == 0 || cols == 0 {
        return Svd {
            u: RealMatrix::identity(rows, rows),
            s: Vec::new(),
            v: RealMatrix::identity(cols, cols),
        };
    }
    let dec = to_faer(m).svd().expect("SVD converges on finite input");
    Svd {
        u: from_faer(dec.U()),
        s: dec.S().column_vector().iter().copied().collect(),
        v: from_faer(dec.V()),
    }
}

/// Singular values of a complex matrix, descending.
pub(crate) fn complex_singular_values(m: &DMatrix<Complex64>) -> Vec<f64> {
    if m.is_empty() {
        return Vec::new();
    }
    to_faer(m)
        .singular_values()
        .expect("SVD converges on finite input")
}

/// Singular values in descending order. Empty for a matrix with a zero dimension.
pub fn singular_values(m: &RealMatrix) -> Vec<f64> {
    if m.is_empty() {
        return Vec::new();
    }
    to_faer(m)
        .singular_values()
        .expect("SVD converges on finite input")
}

/// Smallest singular value; zero for an empty matrix.
pub fn min_singular_value(m: &RealMatrix) -> f64 {
    singular_values(m).last().copied().unwrap_or(0.0)
}

/// Number of singular values strictly above the effective tolerance: `tol`
/// when positive, otherwise `max(rows, cols) * eps * sigma_max`.
pub fn rank_tol(m: &RealMatrix, tol: f64) -> usize {
    let sv = singular_values(m);
    let smax = sv.first().copied().unwrap_or(0.0);
    let cut = if tol > 0.0 {
        tol
    } else {
        m.nrows().max(m.ncols()) as f64 * f64::EPSILON * smax
    };
    sv.iter().filter(|&&s| s > cut).count()
}

/// Eigenvalues of a real matrix, with multiplicity.
///
/// Conjugate pairs come out exactly paired. Ordering is by descending real
/// part, then descending imaginary part.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    values: Vec<Complex64>,
}

impl Spectrum {
    pub fn new(mut values: Vec<Complex64>) -> Self {
        sort_eigenvalues(&mut values);
        Self { values }
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

    pub fn abscissa(&self) -> f64 {
        self.values
            .iter()
            .map(|l| l.re)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn into_vec(self) -> Vec<Complex64> {
        self.values
    }
}

/// Descending real part, then descending imaginary part.
pub(crate) fn eigen_order(a: &Complex64, b: &Complex64) -> Ordering {
    b.re.partial_cmp(&a.re)
        .unwrap_or(Ordering::Equal)
        .then(b.im.partial_cmp(&a.im).unwrap_or(Ordering::Equal))
}

pub(crate) fn sort_eigenvalues(values: &mut [Complex64]) {
    values.sort_by(eigen_order);
}

/// Real Schur factorization `M = Q S Q^T` with `S` quasi upper triangular.
pub(crate) fn real_schur(m: &RealMatrix, max_iter: usize) -> Result<(RealMatrix, RealMatrix)> {
    let n = ensure_square(m)?;
    if n == 0 {
        return Ok((RealMatrix::zeros(0, 0), RealMatrix::zeros(0, 0)));
    }
    let schur = Schur::try_new(m.clone(), f64::EPSILON, max_iter).ok_or(Error::NoConvergence)?;
    let (q, mut s) = schur.unpack();
    for c in 0..n {
        for r in (c + 2)..n {
            s[(r, c)] = 0.0;
        }
    }
    Ok((q, s))
}

/// Sizes (1 or 2) of the diagonal blocks of a quasi upper triangular matrix.
pub(crate) fn quasi_blocks(s: &RealMatrix) -> Vec<usize> {
    let n = s.nrows();
    let mut sizes = Vec::new();
    let mut i = 0;
    while i < n {
        if i + 1 < n && s[(i + 1, i)] != 0.0 {
            sizes.push(2);
            i += 2;
        } else {
            sizes.push(1);
            i += 1;
        }
    }
    sizes
}

/// Eigenvalues of a real 2x2 matrix; complex roots are returned as an exact
/// conjugate pair with the positive imaginary part first.
pub(crate) fn eig2(a: f64, b: f64, c: f64, d: f64) -> [Complex64; 2] {
    let half_tr = 0.5 * (a + d);
    let half_diff = 0.5 * (a - d);
    let disc = half_diff * half_diff + b * c;
    if disc < 0.0 {
        let im = (-disc).sqrt();
        [Complex64::new(half_tr, im), Complex64::new(half_tr, -im)]
    } else {
        let root = disc.sqrt();
        // Avoid cancellation: compute the larger-magnitude root directly and
        // recover the other from the determinant.
        let big = if half_tr >= 0.0 {
            half_tr + root
        } else {
            half_tr - root
        };
        let det = a * d - b * c;
        let other = if big != 0.0 {
            det / big
        } else {
            half_tr - root
        };
        [Complex64::new(big, 0.0), Complex64::new(other, 0.0)]
    }
}

pub(crate) fn quasi_triangular_eigenvalues(s: &RealMatrix, sizes: &[usize]) -> Vec<Complex64> {
    let mut out = Vec::with_capacity(s.nrows());
    let mut i = 0;
    for &k in sizes {
        if k == 1 {
            out.push(Complex64::new(s[(i, i)], 0.0));
        } else {
            out.extend(eig2(
                s[(i, i)],
                s[(i, i + 1)],
                s[(i + 1, i)],
                s[(i + 1, i + 1)],
            ));
        }
        i += k;
    }
    out
}

pub fn eigenvalues(m: &RealMatrix) -> Result<Spectrum> {
    let (_, s) = real_schur(m, Tolerances::default().schur_max_iter)?;
    let sizes = quasi_blocks(&s);
    Ok(Spectrum::new(quasi_triangular_eigenvalues(&s, &sizes)))
}

/// Largest real part over the spectrum; `-inf` for an empty matrix.
pub fn spectral_abscissa(m: &RealMatrix) -> Result<f64> {
    Ok(eigenvalues(m)?.abscissa())
}

/// Orthogonal `n x n` matrix whose leading `r` columns span the columns of `basis`.
///
/// Every column is sign-normalized so its largest-magnitude entry is positive;
/// columns past `r` are an orthonormal basis of the orthogonal complement.
pub(crate) fn orthogonal_completion(basis: &RealMatrix) -> RealMatrix {
    let n = basis.nrows();
    let r = basis.ncols();
    if n == 0 {
        return RealMatrix::zeros(0, 0);
    }
    let mut padded = RealMatrix::zeros(n, n);
    padded.view_mut((0, 0), (n, r)).copy_from(basis);
    let mut q = padded.qr().q();
    for j in 0..n {
        normalize_sign(&mut q, j);
    }
    q
}

fn normalize_sign(q: &mut RealMatrix, col: usize) {
    let mut pivot = 0.0f64;
    for i in 0..q.nrows() {
        if q[(i, col)].abs() > pivot.abs() + 1e-12 {
            pivot = q[(i, col)];
        }
    }
    if pivot < 0.0 {
        q.column_mut(col).neg_mut();
    }
}

/// Builds `L = [C^T (C C^T)^-1 | N]` so that `C L = [I_p, 0]`.
///
/// `N` is an orthonormal basis of the null space of `C`, which makes
/// `L^-1 = [C; N^T]` available in closed form (see [`inverse_transform_l`]).
pub fn build_transform_l(c: &RealMatrix, tols: &Tolerances) -> Result<RealMatrix> {
    let (p, n) = c.shape();
    if p > n {
        return Err(Error::DimensionMismatch(format!(
            "C has {p} rows but only {n} columns"
        )));
    }
    let rank = rank_tol(c, tols.rank);
    if rank != p {
        return Err(Error::RankDeficient { rank, expected: p });
    }
    let gram = c * c.transpose();
    let right_inverse = c.transpose() * solve_linear(&gram, &RealMatrix::identity(p, p))?;
    let null = null_space(c);
    let mut l = RealMatrix::zeros(n, n);
    l.view_mut((0, 0), (n, p)).copy_from(&right_inverse);
    l.view_mut((0, p), (n, n - p)).copy_from(&null);
    Ok(l)
}

/// `L^-1 = [C; N^T]` for the `L` produced by [`build_transform_l`].
pub fn inverse_transform_l(c: &RealMatrix, l: &RealMatrix) -> RealMatrix {
    let (p, n) = c.shape();
    let mut inv = RealMatrix::zeros(n, n);
    inv.view_mut((0, 0), (p, n)).copy_from(c);
    let null = l.columns(p, n - p);
    inv.view_mut((p, 0), (n - p, n))
        .copy_from(&null.transpose());
    inv
}

/// Orthonormal basis of the null space of a full-row-rank `C` (columns).
pub(crate) fn null_space(c: &RealMatrix) -> RealMatrix {
    let (p, n) = c.shape();
    let q = orthogonal_completion(&c.transpose());
    q.columns(p, n - p).into_owned()
}

/// Solves `M X = RHS`, rejecting `M` whose reciprocal condition number is at
/// round-off level.
pub fn solve_linear(m: &RealMatrix, rhs: &RealMatrix) -> Result<RealMatrix> {
    let n = ensure_square(m)?;
    if rhs.nrows() != n {
        return Err(Error::DimensionMismatch(format!(
            "system matrix is {n}x{n} but right-hand side has {} rows",
            rhs.nrows()
        )));
    }
    if n == 0 {
        return Ok(RealMatrix::zeros(0, rhs.ncols()));
    }
    let sv = singular_values(m);
    let smax = sv[0];
    let smin = sv[sv.len() - 1];
    if smin <= n as f64 * f64::EPSILON * smax || smax == 0.0 {
        return Err(Error::Singular {
            min_singular_value: smin,
        });
    }
    m.clone().full_piv_lu().solve(rhs).ok_or(Error::Singular {
        min_singular_value: smin,
    })
}

pub fn format_complex(l: Complex64) -> String {
    if l.im == 0.0 {
        format!("{}", l.re)
    } else if l.im > 0.0 {
        format!("{}+{}i", l.re, l.im)
    } else {
        format!("{}-{}i", l.re, -l.im)
    }
}

/// Vertical stack `[top; bottom]`.
pub fn vstack(top: &RealMatrix, bottom: &RealMatrix) -> RealMatrix {
    assert_eq!(top.ncols(), bottom.ncols(), "vstack column mismatch");
    let mut out = RealMatrix::zeros(top.nrows() + bottom.nrows(), top.ncols());
    out.view_mut((0, 0), top.shape()).copy_from(top);
    out.view_mut((top.nrows(), 0), bottom.shape())
        .copy_from(bottom);
    out
}
