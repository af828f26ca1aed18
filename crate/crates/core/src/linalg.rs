//! Small dense kernels shared by the geometries.
//!
//! Matrices are `nalgebra::DMatrix<f64>` (column-major) everywhere. Each
//! routine touches at most `O(d·r²)` data for a `d × r` factor, or `O(r³)`
//! for `r × r` blocks.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::opcount;

/// Relative tolerance below which a singular value or eigenvalue counts as zero.
pub const RANK_TOL: f64 = 1e-12;

/// Symmetry tolerance used when validating SPD inputs.
pub const SYMMETRY_TOL: f64 = 1e-13;

pub fn mul(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    opcount::add(a.nrows() * a.ncols() * b.ncols());
    a * b
}

/// `aᵀ b`
pub fn mul_tn(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    opcount::add(a.nrows() * a.ncols() * b.ncols());
    a.tr_mul(b)
}

/// `a bᵀ`
pub fn mul_nt(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    opcount::add(a.nrows() * a.ncols() * b.nrows());
    a * b.transpose()
}

/// Frobenius inner product `Tr(aᵀ b)`.
pub fn inner(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    debug_assert_eq!(a.shape(), b.shape());
    opcount::add(a.len());
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

pub fn sym(a: &DMatrix<f64>) -> DMatrix<f64> {
    (a + a.transpose()) * 0.5
}

/// Which sign the skew-symmetric part carries.
///
/// `Standard` is `(A − Aᵀ)/2`. `Transposed` is `(Aᵀ − A)/2`, the opposite
/// sign. Only `Standard` makes the polar and subspace horizontal projections
/// annihilate vertical vectors; the other is kept to demonstrate that.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
pub enum SkewConvention {
    #[default]
    Standard,
    Transposed,
}

pub fn skew(a: &DMatrix<f64>, convention: SkewConvention) -> DMatrix<f64> {
    match convention {
        SkewConvention::Standard => (a - a.transpose()) * 0.5,
        SkewConvention::Transposed => (a.transpose() - a) * 0.5,
    }
}

pub fn skew_std(a: &DMatrix<f64>) -> DMatrix<f64> {
    skew(a, SkewConvention::Standard)
}

pub fn diag_part(a: &DMatrix<f64>) -> DMatrix<f64> {
    DMatrix::from_diagonal(&a.diagonal())
}

/// Largest absolute entry of `a − aᵀ` relative to the largest entry of `a`.
pub fn symmetry_defect(a: &DMatrix<f64>) -> f64 {
    let scale = a.amax().max(f64::MIN_POSITIVE);
    (a - a.transpose()).amax() / scale
}

/// `‖DᵀD − I‖_max`.
pub fn orthonormality_defect(d: &DMatrix<f64>) -> f64 {
    let g = d.tr_mul(d);
    (g - DMatrix::identity(d.ncols(), d.ncols())).amax()
}

pub fn ensure_finite(a: &DMatrix<f64>, what: &str) -> Result<()> {
    if a.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what.to_string()))
    }
}

/// A symmetric positive definite matrix stored with its eigendecomposition.
#[derive(Debug, Clone)]
pub struct SpdMatrix {
    mat: DMatrix<f64>,
    eigvals: DVector<f64>,
    eigvecs: DMatrix<f64>,
}

impl SpdMatrix {
    /// Validates symmetry (to [`SYMMETRY_TOL`] relative) and positivity.
    pub fn new(mat: DMatrix<f64>) -> Result<Self> {
        if !mat.is_square() {
            return Err(Error::Shape(format!("SPD matrix must be square, got {:?}", mat.shape())));
        }
        ensure_finite(&mat, "SPD matrix")?;
        let defect = symmetry_defect(&mat);
        if defect > SYMMETRY_TOL {
            return Err(Error::NotSymmetric { defect });
        }
        Self::from_symmetrized(mat)
    }

    /// Symmetrizes `mat` before validating positivity.
    pub fn from_symmetrized(mat: DMatrix<f64>) -> Result<Self> {
        let mat = sym(&mat);
        let n = mat.nrows();
        opcount::add(10 * n * n * n);
        let eig = SymmetricEigen::new(mat.clone());
        let smallest = eig.eigenvalues.min();
        if !(smallest > 0.0) {
            return Err(Error::NotPositiveDefinite { smallest });
        }
        Ok(SpdMatrix { mat, eigvals: eig.eigenvalues, eigvecs: eig.eigenvectors })
    }

    pub fn identity(r: usize) -> Self {
        SpdMatrix {
            mat: DMatrix::identity(r, r),
            eigvals: DVector::from_element(r, 1.0),
            eigvecs: DMatrix::identity(r, r),
        }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.mat
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.mat
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigvals
    }

    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.eigvecs
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigvals.min()
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.eigvals.max()
    }

    /// `Q f(Λ) Qᵀ` with eigenvalues floored at `1e-14 · trace`.
    pub fn map_spectrum(&self, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
        let floor = 1e-14 * self.eigvals.sum();
        let q = &self.eigvecs;
        let n = self.dim();
        let qf = DMatrix::from_fn(n, n, |i, j| q[(i, j)] * f(self.eigvals[j].max(floor)));
        opcount::add(n * n * n);
        sym(&(qf * q.transpose()))
    }

    pub fn sqrt(&self) -> DMatrix<f64> {
        self.map_spectrum(f64::sqrt)
    }

    pub fn inv_sqrt(&self) -> DMatrix<f64> {
        self.map_spectrum(|x| 1.0 / x.sqrt())
    }

    pub fn inverse(&self) -> DMatrix<f64> {
        self.map_spectrum(|x| 1.0 / x)
    }

    /// `A⁻¹ M` through the eigendecomposition.
    pub fn solve(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        let n = self.dim();
        let mut t = self.eigvecs.tr_mul(m);
        for i in 0..n {
            let inv = 1.0 / self.eigvals[i];
            t.row_mut(i).scale_mut(inv);
        }
        opcount::add(2 * n * n * m.ncols());
        &self.eigvecs * t
    }
}

/// Solves `A X + X B = Q` for SPD `A`, `B` in their eigenbases.
pub fn solve_sylvester_spd(a: &SpdMatrix, b: &SpdMatrix, q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (n, m) = (a.dim(), b.dim());
    if q.shape() != (n, m) {
        return Err(Error::Shape(format!("Sylvester rhs {:?}, expected {:?}", q.shape(), (n, m))));
    }
    for c in [a, b] {
        let norm = c.max_eigenvalue();
        let smallest = c.min_eigenvalue();
        if smallest <= RANK_TOL * norm {
            return Err(Error::SingularCoefficient { smallest, norm });
        }
    }
    let qa = a.eigenvectors();
    let qb = b.eigenvectors();
    let mut t = qa.tr_mul(q) * qb;
    for j in 0..m {
        for i in 0..n {
            t[(i, j)] /= a.eigenvalues()[i] + b.eigenvalues()[j];
        }
    }
    opcount::add(4 * n * m * (n + m));
    Ok(qa * t * qb.transpose())
}

/// Solves the Lyapunov equation `A X + X A = Q` for SPD `A`.
pub fn solve_lyapunov(a: &SpdMatrix, q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    solve_sylvester_spd(a, a, q)
}

/// Solves `X C + C X = Q` where `C = A B` is a product of two SPD matrices.
///
/// `C` is similar to the SPD matrix `K = A^{1/2} B A^{1/2}`, so the equation
/// reduces to a Lyapunov equation in `K`.
pub fn solve_lyapunov_product(a: &SpdMatrix, b: &SpdMatrix, q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let a_half = a.sqrt();
    let a_ihalf = a.inv_sqrt();
    let k = SpdMatrix::from_symmetrized(&a_half * b.matrix() * &a_half)?;
    let rhs = &a_ihalf * q * &a_half;
    let xt = solve_lyapunov(&k, &rhs)?;
    Ok(a_half * xt * a_ihalf)
}

/// Thin singular value decomposition truncated to `k` triplets.
#[derive(Debug, Clone)]
pub struct ThinSvd {
    pub u: DMatrix<f64>,
    pub s: DVector<f64>,
    pub v: DMatrix<f64>,
}

impl ThinSvd {
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let us = DMatrix::from_fn(self.u.nrows(), self.u.ncols(), |i, j| self.u[(i, j)] * self.s[j]);
        us * self.v.transpose()
    }
}

/// Flips singular vector pairs so that the largest-magnitude entry of each
/// left vector is nonnegative.
pub fn normalize_svd_signs(u: &mut DMatrix<f64>, v: &mut DMatrix<f64>) {
    for j in 0..u.ncols() {
        let col = u.column(j);
        let mut best = 0.0f64;
        let mut sign = 1.0;
        for &x in col.iter() {
            if x.abs() > best {
                best = x.abs();
                sign = x.signum();
            }
        }
        if sign < 0.0 {
            u.column_mut(j).neg_mut();
            v.column_mut(j).neg_mut();
        }
    }
}

pub fn thin_svd(a: &DMatrix<f64>, k: usize) -> Result<ThinSvd> {
    let (m, n) = a.shape();
    if k > m.min(n) {
        return Err(Error::Shape(format!("thin_svd rank {k} exceeds min({m}, {n})")));
    }
    ensure_finite(a, "thin_svd input")?;
    opcount::add(4 * m * n * m.min(n));
    let svd = a.clone().svd(true, true);
    let u_all = svd.u.expect("requested U");
    let vt_all = svd.v_t.expect("requested Vᵀ");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let order = &order[..k];
    let mut u = DMatrix::from_fn(m, k, |i, j| u_all[(i, order[j])]);
    let mut v = DMatrix::from_fn(n, k, |i, j| vt_all[(order[j], i)]);
    let s = DVector::from_fn(k, |j, _| svd.singular_values[order[j]]);
    normalize_svd_signs(&mut u, &mut v);
    Ok(ThinSvd { u, s, v })
}

/// Smallest and largest singular value of a tall `d × r` matrix via QR.
pub fn extreme_singular_values(d: &DMatrix<f64>) -> (f64, f64) {
    let r = d.ncols();
    opcount::add(2 * d.nrows() * r * r + 10 * r * r * r);
    let rr = d.clone().qr().r();
    let s = rr.singular_values();
    (s.min(), s.max())
}

/// Fails with [`Error::RankDrop`] unless the `d × r` matrix `d` has full column rank.
///
/// Uses QR plus a small SVD for `r ≤ 16`, otherwise a Cholesky attempt on the Gram matrix.
pub fn ensure_full_column_rank(d: &DMatrix<f64>) -> Result<()> {
    ensure_finite(d, "factor")?;
    let r = d.ncols();
    if d.nrows() < r {
        return Err(Error::Shape(format!("factor {:?} cannot have full column rank", d.shape())));
    }
    if r <= 16 {
        let (smallest, largest) = extreme_singular_values(d);
        if !(smallest > RANK_TOL * largest) {
            return Err(Error::RankDrop { smallest, largest });
        }
    } else {
        let g = mul_tn(d, d);
        let largest = g.diagonal().max().sqrt();
        if g.cholesky().is_none() {
            return Err(Error::RankDrop { smallest: 0.0, largest });
        }
    }
    Ok(())
}

/// Orthogonal factor `D (DᵀD)^{-1/2}` of a full column rank matrix, through
/// `D = QR` and the SVD of the small `R`.
pub fn polar_factor(d: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    ensure_finite(d, "polar_factor input")?;
    let (n, r) = d.shape();
    if n < r {
        return Err(Error::Shape(format!("polar factor of {:?}", d.shape())));
    }
    opcount::add(4 * n * r * r + 20 * r * r * r);
    let qr = d.clone().qr();
    let q = qr.q();
    let rr = qr.r();
    let svd = rr.svd(true, true);
    let s = &svd.singular_values;
    let (smallest, largest) = (s.min(), s.max());
    if !(smallest > RANK_TOL * largest) {
        return Err(Error::RankDrop { smallest, largest });
    }
    let u = svd.u.expect("requested U");
    let vt = svd.v_t.expect("requested Vᵀ");
    Ok(q * (u * vt))
}

/// Matrix exponential of a symmetric matrix via its eigendecomposition.
pub fn sym_expm(s: &DMatrix<f64>) -> Result<SpdMatrix> {
    if !s.is_square() {
        return Err(Error::Shape(format!("sym_expm of {:?}", s.shape())));
    }
    ensure_finite(s, "sym_expm input")?;
    let defect = (s - s.transpose()).amax() / s.amax().max(1.0);
    if defect > RANK_TOL {
        return Err(Error::NotSymmetric { defect });
    }
    let n = s.nrows();
    opcount::add(12 * n * n * n);
    let eig = SymmetricEigen::new(sym(s));
    let q = &eig.eigenvectors;
    let vals = eig.eigenvalues.map(f64::exp);
    let qe = DMatrix::from_fn(n, n, |i, j| q[(i, j)] * vals[j]);
    let mat = sym(&(qe * q.transpose()));
    Ok(SpdMatrix { mat, eigvals: vals, eigvecs: eig.eigenvectors })
}

/// Evaluates `Σ c_k s^k` by Horner's rule.
pub fn polyval(coeffs: &[f64], s: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * s + c)
}

fn derivative(coeffs: &[f64]) -> Vec<f64> {
    coeffs.iter().enumerate().skip(1).map(|(k, &c)| k as f64 * c).collect()
}

/// Global minimizer over the reals of a polynomial of degree at most six,
/// given by ascending coefficients `c[k]` of `s^k`.
///
/// Critical points come from the eigenvalues of the companion matrix of the
/// derivative, refined by Newton steps. Returns `(s_min, p(s_min))`; ties go to
/// the smallest `s`.
pub fn minimize_polynomial(coeffs: &[f64]) -> Result<(f64, f64)> {
    if coeffs.len() > 7 {
        return Err(Error::Invalid(format!("degree {} exceeds 6", coeffs.len() - 1)));
    }
    if coeffs.iter().any(|c| !c.is_finite()) {
        return Err(Error::NonFinite("polynomial coefficient".into()));
    }
    let degree = match coeffs.iter().rposition(|&c| c != 0.0) {
        None => return Ok((0.0, 0.0)),
        Some(d) => d,
    };
    let p = &coeffs[..=degree];
    if degree == 0 {
        return Ok((0.0, p[0]));
    }
    if degree % 2 == 1 || p[degree] < 0.0 {
        return Err(Error::UnboundedPolynomial);
    }

    let dp = derivative(p);
    let ddp = derivative(&dp);
    let n = dp.len() - 1; // degree of the derivative, odd and ≥ 1
    let lead = dp[n];
    let mut companion = DMatrix::<f64>::zeros(n, n);
    for i in 1..n {
        companion[(i, i - 1)] = 1.0;
    }
    for i in 0..n {
        companion[(i, n - 1)] = -dp[i] / lead;
    }
    let roots = companion.complex_eigenvalues();

    let mut candidates: Vec<f64> = roots
        .iter()
        .map(|z| {
            let mut s = z.re;
            for _ in 0..8 {
                let d1 = polyval(&dp, s);
                let d2 = polyval(&ddp, s);
                if d2 == 0.0 {
                    break;
                }
                let next = s - d1 / d2;
                if !next.is_finite() || polyval(&dp, next).abs() >= d1.abs() {
                    break;
                }
                s = next;
            }
            s
        })
        .collect();
    candidates.sort_by(f64::total_cmp);

    let mut best = (candidates[0], polyval(p, candidates[0]));
    for &s in &candidates[1..] {
        let v = polyval(p, s);
        if v < best.1 {
            best = (s, v);
        }
    }
    Ok(best)
}

/// Pairwise (tree) summation; the reduction order depends only on the length.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const BLOCK: usize = 128;
    if xs.len() <= BLOCK {
        xs.iter().sum()
    } else {
        let mid = xs.len() / 2;
        pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
    }
}
