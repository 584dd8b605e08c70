//! Dense complex matrix helpers shared by every module.
//!
//! Hermitian eigendecompositions are normalized so that repeated runs give
//! identical output: eigenvalues are sorted in descending order and each
//! eigenvector is rotated so its largest-magnitude entry is real and positive.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

#[inline]
pub fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// Hermitian part `(m + m*) / 2`.
pub fn hermitian_part(m: &CMat) -> CMat {
    (m + m.adjoint()) * c(0.5)
}

/// Largest absolute entry of `m - m*`.
pub fn hermitian_defect(m: &CMat) -> f64 {
    max_abs(&(m - m.adjoint()))
}

pub fn max_abs(m: &CMat) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

/// Sorted eigendecomposition of the Hermitian part of `m`.
pub struct HermitianEigen {
    /// Descending.
    pub values: Vec<f64>,
    /// Column `k` belongs to `values[k]`.
    pub vectors: CMat,
}

impl HermitianEigen {
    pub fn new(m: &CMat) -> Self {
        let n = m.nrows();
        if n == 0 {
            return Self {
                values: vec![],
                vectors: CMat::zeros(0, 0),
            };
        }
        let eig = nalgebra::SymmetricEigen::new(hermitian_part(m));
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| {
            eig.eigenvalues[b]
                .partial_cmp(&eig.eigenvalues[a])
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        let values: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
        let mut vectors = CMat::zeros(n, n);
        for (dst, &src) in order.iter().enumerate() {
            let col = eig.eigenvectors.column(src);
            let mut best = 0;
            let mut best_abs = -1.0;
            for (i, z) in col.iter().enumerate() {
                // strict comparison with slack keeps the first index on near-ties
                if z.norm() > best_abs + 1e-12 {
                    best = i;
                    best_abs = z.norm();
                }
            }
            let phase = if best_abs > 0.0 {
                col[best].conj() / best_abs
            } else {
                ONE
            };
            for i in 0..n {
                vectors[(i, dst)] = col[i] * phase;
            }
        }
        Self { values, vectors }
    }

    pub fn min(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }

    pub fn max(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }

    /// `Σ f(λ_k) v_k v_k*`.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> CMat {
        let n = self.values.len();
        let mut scaled = self.vectors.clone();
        for k in 0..n {
            let s = c(f(self.values[k]));
            for i in 0..n {
                scaled[(i, k)] *= s;
            }
        }
        &scaled * self.vectors.adjoint()
    }

    /// Eigenvectors whose eigenvalue exceeds `threshold`.
    pub fn range(&self, threshold: f64) -> (Vec<f64>, CMat) {
        let keep: Vec<usize> = (0..self.values.len())
            .filter(|&k| self.values[k] > threshold)
            .collect();
        let n = self.vectors.nrows();
        let mut out = CMat::zeros(n, keep.len());
        for (j, &k) in keep.iter().enumerate() {
            out.set_column(j, &self.vectors.column(k));
        }
        (keep.iter().map(|&k| self.values[k]).collect(), out)
    }

    /// Eigenvectors whose eigenvalue is at most `threshold`.
    pub fn kernel(&self, threshold: f64) -> CMat {
        let keep: Vec<usize> = (0..self.values.len())
            .filter(|&k| self.values[k] <= threshold)
            .collect();
        let n = self.vectors.nrows();
        let mut out = CMat::zeros(n, keep.len());
        for (j, &k) in keep.iter().enumerate() {
            out.set_column(j, &self.vectors.column(k));
        }
        out
    }
}

pub fn min_eigenvalue(m: &CMat) -> f64 {
    HermitianEigen::new(m).min()
}

pub fn max_eigenvalue(m: &CMat) -> f64 {
    HermitianEigen::new(m).max()
}

/// Largest singular value.
pub fn op_norm(m: &CMat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    let g = if m.nrows() <= m.ncols() {
        m * m.adjoint()
    } else {
        m.adjoint() * m
    };
    max_eigenvalue(&g).max(0.0).sqrt()
}

/// Hilbert–Schmidt (Frobenius) norm.
pub fn hs_norm(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// `tr(a* b)`.
pub fn hs_inner(a: &CMat, b: &CMat) -> C64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

/// Square root of the positive part of a Hermitian matrix.
pub fn psd_sqrt(m: &CMat) -> CMat {
    HermitianEigen::new(m).map(|x| x.max(0.0).sqrt())
}

/// Moore–Penrose inverse square root on the support (eigenvalues above
/// `rel * λ_max`), zero on the kernel.
pub fn pinv_sqrt(m: &CMat, rel: f64) -> CMat {
    let e = HermitianEigen::new(m);
    let thr = rel * e.max().abs().max(f64::MIN_POSITIVE);
    e.map(|x| if x > thr { 1.0 / x.sqrt() } else { 0.0 })
}

/// Projection onto the support of a PSD matrix.
pub fn support_projection(m: &CMat, rel: f64) -> CMat {
    let e = HermitianEigen::new(m);
    let thr = rel * e.max().abs().max(f64::MIN_POSITIVE);
    e.map(|x| if x > thr { 1.0 } else { 0.0 })
}

pub fn kron(a: &CMat, b: &CMat) -> CMat {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    let mut out = CMat::zeros(ar * br, ac * bc);
    for i in 0..ar {
        for j in 0..ac {
            let s = a[(i, j)];
            if s == ZERO {
                continue;
            }
            for k in 0..br {
                for l in 0..bc {
                    out[(i * br + k, j * bc + l)] = s * b[(k, l)];
                }
            }
        }
    }
    out
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

/// Matrix unit `e_ij` of size `n`.
pub fn matrix_unit(n: usize, i: usize, j: usize) -> CMat {
    let mut m = CMat::zeros(n, n);
    m[(i, j)] = ONE;
    m
}

/// Orthonormal basis (as columns) of the span of the columns of `v`,
/// dropping directions whose Gram eigenvalue is below `rel * λ_max`.
pub fn orthonormal_span(v: &CMat, rel: f64) -> CMat {
    if v.ncols() == 0 {
        return CMat::zeros(v.nrows(), 0);
    }
    let gram = v.adjoint() * v;
    let e = HermitianEigen::new(&gram);
    let thr = rel * e.max().max(f64::MIN_POSITIVE);
    let (vals, vecs) = e.range(thr);
    let mut basis = v * vecs;
    for (k, lam) in vals.iter().enumerate() {
        let s = c(1.0 / lam.sqrt());
        for i in 0..basis.nrows() {
            basis[(i, k)] *= s;
        }
    }
    basis
}

/// Orthonormal basis of `{x : m x = 0}` computed from the Gram matrix `m* m`.
pub fn null_space(m: &CMat, rel: f64) -> CMat {
    null_space_at_scale(m, rel, 0.0)
}

/// As [`null_space`], measuring `rel` against at least `scale²` so an all-roundoff `m` has a full kernel.
pub fn null_space_at_scale(m: &CMat, rel: f64, scale: f64) -> CMat {
    let n = m.ncols();
    if m.nrows() == 0 {
        return identity(n);
    }
    let gram = m.adjoint() * m;
    let e = HermitianEigen::new(&gram);
    let thr = rel * e.max().max(scale * scale).max(f64::MIN_POSITIVE);
    e.kernel(thr)
}

/// Moore–Penrose inverse, dropping Gram eigenvalues below `rel * λ_max`.
pub fn pinv(m: &CMat, rel: f64) -> CMat {
    if m.is_empty() {
        return CMat::zeros(m.ncols(), m.nrows());
    }
    let e = HermitianEigen::new(&(m.adjoint() * m));
    let thr = rel * e.max().max(f64::MIN_POSITIVE);
    e.map(|x| if x > thr { 1.0 / x } else { 0.0 }) * m.adjoint()
}

/// Least-squares solution `x` of `x * s = t`.
pub fn solve_right(s: &CMat, t: &CMat, rel: f64) -> CMat {
    t * pinv(s, rel)
}

/// Partial isometry `w` of the polar decomposition `m = w |m|`.
pub fn polar_part(m: &CMat) -> CMat {
    m * pinv_sqrt(&(m.adjoint() * m), 1e-14)
}

pub fn random_gaussian<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> CMat {
    CMat::from_fn(rows, cols, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
    })
}

pub fn random_hermitian<R: Rng + ?Sized>(rng: &mut R, n: usize) -> CMat {
    hermitian_part(&random_gaussian(rng, n, n))
}

/// Haar-ish unitary from the polar part of a Gaussian matrix.
/// Haar unitary: `Q` of a Gaussian matrix with the phases of `diag R` removed.
pub fn random_unitary<R: Rng + ?Sized>(rng: &mut R, n: usize) -> CMat {
    let qr = random_gaussian(rng, n, n).qr();
    let (mut q, r) = (qr.q(), qr.r());
    for j in 0..n {
        let d = r[(j, j)];
        if d.norm() > 0.0 {
            let phase = d / d.norm();
            for i in 0..n {
                q[(i, j)] *= phase;
            }
        }
    }
    q
}

pub fn commutator(a: &CMat, b: &CMat) -> CMat {
    a * b - b * a
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn eigen_is_sorted_and_phase_fixed() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let h = random_hermitian(&mut rng, 6);
        let e = HermitianEigen::new(&h);
        assert!(e.values.windows(2).all(|w| w[0] >= w[1]));
        for k in 0..6 {
            let col = e.vectors.column(k);
            let big =
                col.iter()
                    .cloned()
                    .fold(ZERO, |a, z| if z.norm() > a.norm() + 1e-12 { z } else { a });
            assert!(big.im.abs() < 1e-14 && big.re > 0.0);
        }
        let rec = e.map(|x| x);
        assert!(max_abs(&(rec - &h)) < 1e-12);
    }

    #[test]
    fn op_norm_of_nilpotent() {
        let mut m = CMat::zeros(2, 2);
        m[(0, 1)] = c(2.0);
        assert!((op_norm(&m) - 2.0).abs() < 1e-14);
    }

    #[test]
    fn null_space_of_rank_one() {
        let m = CMat::from_row_slice(1, 3, &[ONE, ONE, ZERO]);
        let k = null_space(&m, 1e-12);
        assert_eq!(k.ncols(), 2);
        assert!(max_abs(&(&m * &k)) < 1e-12);
    }

    #[test]
    fn random_unitary_is_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let u = random_unitary(&mut rng, 4);
        assert!(max_abs(&(u.adjoint() * &u - identity(4))) < 1e-12);
    }
}
