//! Finite-dimensional C*-algebras `M_{d_1} ⊕ … ⊕ M_{d_m}` and their elements.
//!
//! Elements are stored block by block, so membership in the algebra is a
//! structural property. Coordinates refer to the matrix-unit basis, which is
//! orthonormal for the trace of the ambient `N × N` matrix algebra.

use std::fmt;

use nalgebra::DVector;
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{self, c, CMat, CVec, HermitianEigen, C64, ZERO};

/// `M_{d_1} ⊕ … ⊕ M_{d_m}`. Equality ignores the label.
#[derive(Clone, Debug)]
pub struct MultiMatrixAlgebra {
    blocks: Vec<usize>,
    label: String,
}

impl PartialEq for MultiMatrixAlgebra {
    fn eq(&self, other: &Self) -> bool {
        self.blocks == other.blocks
    }
}

impl Eq for MultiMatrixAlgebra {}

impl fmt::Display for MultiMatrixAlgebra {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.blocks.iter().map(|d| format!("M{d}")).collect();
        if self.label.is_empty() {
            write!(f, "{}", parts.join("⊕"))
        } else {
            write!(f, "{}={}", self.label, parts.join("⊕"))
        }
    }
}

impl MultiMatrixAlgebra {
    pub fn new(blocks: &[usize]) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::EmptyBlocks);
        }
        if let Some(&d) = blocks.iter().find(|&&d| d == 0) {
            return Err(Error::NonPositiveBlock(d));
        }
        Ok(Self {
            blocks: blocks.to_vec(),
            label: String::new(),
        })
    }

    /// `M_n`.
    pub fn full(n: usize) -> Result<Self> {
        Self::new(&[n])
    }

    /// `ℂ^n`.
    pub fn abelian(n: usize) -> Result<Self> {
        Self::new(&vec![1; n])
    }

    /// Random blocks of size at most 3 with total ambient size at most `max_ambient`.
    pub fn random<R: Rng + ?Sized>(max_ambient: usize, rng: &mut R) -> Result<Self> {
        let mut blocks = Vec::new();
        let mut left = max_ambient;
        while left > 0 && (blocks.is_empty() || rng.random_bool(0.5)) {
            let d = rng.random_range(1..=left.min(3));
            blocks.push(d);
            left -= d;
        }
        Self::new(&blocks)
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn blocks(&self) -> &[usize] {
        &self.blocks
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    /// `N = Σ d_k`.
    pub fn ambient_dim(&self) -> usize {
        self.blocks.iter().sum()
    }

    /// Vector-space dimension `Σ d_k²`.
    pub fn dim(&self) -> usize {
        self.blocks.iter().map(|d| d * d).sum()
    }

    /// Row offset of each block inside the ambient matrix.
    pub fn ambient_offsets(&self) -> Vec<usize> {
        offsets(self.blocks.iter().copied())
    }

    /// Offset of each block inside the coordinate vector.
    pub fn coord_offsets(&self) -> Vec<usize> {
        offsets(self.blocks.iter().map(|d| d * d))
    }

    /// Block containing each ambient index.
    pub fn block_of_ambient(&self) -> Vec<usize> {
        self.blocks
            .iter()
            .enumerate()
            .flat_map(|(k, &d)| std::iter::repeat_n(k, d))
            .collect()
    }

    /// `(block, row, col)` of a coordinate index.
    pub fn coord_position(&self, idx: usize) -> (usize, usize, usize) {
        let mut rest = idx;
        for (k, &d) in self.blocks.iter().enumerate() {
            if rest < d * d {
                return (k, rest / d, rest % d);
            }
            rest -= d * d;
        }
        panic!("coordinate {idx} out of range for {self}");
    }

    /// Ambient `(row, col)` of a coordinate index.
    pub fn coord_to_ambient(&self, idx: usize) -> (usize, usize) {
        let (k, i, j) = self.coord_position(idx);
        let off = self.ambient_offsets()[k];
        (off + i, off + j)
    }

    pub fn zero(&self) -> AlgebraElement {
        AlgebraElement {
            algebra: self.clone(),
            blocks: self.blocks.iter().map(|&d| CMat::zeros(d, d)).collect(),
        }
    }

    pub fn unit(&self) -> AlgebraElement {
        AlgebraElement {
            algebra: self.clone(),
            blocks: self.blocks.iter().map(|&d| CMat::identity(d, d)).collect(),
        }
    }

    /// The matrix unit with coordinate index `idx`.
    pub fn basis_element(&self, idx: usize) -> AlgebraElement {
        let (k, i, j) = self.coord_position(idx);
        let mut e = self.zero();
        e.blocks[k][(i, j)] = linalg::ONE;
        e
    }

    /// Matrix units, block-major and row-major within a block.
    pub fn basis(&self) -> Vec<AlgebraElement> {
        (0..self.dim()).map(|i| self.basis_element(i)).collect()
    }

    /// Matrix unit `e_ij` of block `k`.
    pub fn matrix_unit(&self, k: usize, i: usize, j: usize) -> AlgebraElement {
        let mut e = self.zero();
        e.blocks[k][(i, j)] = linalg::ONE;
        e
    }

    /// Central projections: the identity of each block.
    pub fn center_basis(&self) -> Vec<AlgebraElement> {
        (0..self.num_blocks())
            .map(|k| {
                let mut e = self.zero();
                e.blocks[k] = CMat::identity(self.blocks[k], self.blocks[k]);
                e
            })
            .collect()
    }

    /// `M_n(A)` realized as `⊕ M_{n d_k}`.
    pub fn amplify(&self, n: usize) -> MultiMatrixAlgebra {
        assert!(n >= 1, "amplification order must be positive");
        let blocks: Vec<usize> = self.blocks.iter().map(|d| n * d).collect();
        let label = if self.label.is_empty() {
            String::new()
        } else {
            format!("M{n}({})", self.label)
        };
        MultiMatrixAlgebra { blocks, label }
    }

    /// `A ⊕ B` with the blocks of `self` first.
    pub fn direct_sum(&self, other: &MultiMatrixAlgebra) -> MultiMatrixAlgebra {
        let mut blocks = self.blocks.clone();
        blocks.extend_from_slice(&other.blocks);
        MultiMatrixAlgebra {
            blocks,
            label: String::new(),
        }
    }

    /// The opposite algebra in its transpose model.
    pub fn opposite(&self) -> (MultiMatrixAlgebra, OppositeMap) {
        let label = if self.label.is_empty() {
            String::new()
        } else {
            format!("{}^op", self.label)
        };
        let op = MultiMatrixAlgebra {
            blocks: self.blocks.clone(),
            label,
        };
        (op.clone(), OppositeMap { target: op })
    }

    pub fn same_shape(&self, other: &MultiMatrixAlgebra) -> bool {
        self.blocks == other.blocks
    }

    pub fn check_same(&self, other: &MultiMatrixAlgebra) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::AlgebraMismatch(format!("{self} vs {other}")))
        }
    }

    /// Element with independent complex Gaussian entries.
    pub fn random_element<R: Rng + ?Sized>(&self, rng: &mut R) -> AlgebraElement {
        AlgebraElement {
            algebra: self.clone(),
            blocks: self
                .blocks
                .iter()
                .map(|&d| linalg::random_gaussian(rng, d, d))
                .collect(),
        }
    }

    pub fn random_hermitian<R: Rng + ?Sized>(&self, rng: &mut R) -> AlgebraElement {
        self.random_element(rng).real_part()
    }

    /// `g* g` for Gaussian `g`.
    pub fn random_positive<R: Rng + ?Sized>(&self, rng: &mut R) -> AlgebraElement {
        let g = self.random_element(rng);
        g.adjoint() * &g
    }

    /// Block-diagonal unitary with Haar-ish blocks.
    pub fn random_unitary<R: Rng + ?Sized>(&self, rng: &mut R) -> AlgebraElement {
        AlgebraElement {
            algebra: self.clone(),
            blocks: self
                .blocks
                .iter()
                .map(|&d| linalg::random_unitary(rng, d))
                .collect(),
        }
    }
}

fn offsets(sizes: impl Iterator<Item = usize>) -> Vec<usize> {
    let mut acc = 0;
    sizes
        .map(|s| {
            let o = acc;
            acc += s;
            o
        })
        .collect()
}

/// Transpose realization of `A → A^op`.
///
/// As a map out of `A^op` (product `a ·_op b = b a`) it is a *-isomorphism onto
/// the transpose model; read on `A` it reverses products.
#[derive(Clone, Debug)]
pub struct OppositeMap {
    target: MultiMatrixAlgebra,
}

impl OppositeMap {
    pub fn apply(&self, a: &AlgebraElement) -> AlgebraElement {
        AlgebraElement {
            algebra: self.target.clone(),
            blocks: a.blocks.iter().map(|b| b.transpose()).collect(),
        }
    }

    /// Product of the opposite algebra.
    pub fn op_mul(a: &AlgebraElement, b: &AlgebraElement) -> AlgebraElement {
        b * a
    }
}

/// Element of a multi-matrix algebra.
#[derive(Clone, Debug, PartialEq)]
pub struct AlgebraElement {
    algebra: MultiMatrixAlgebra,
    blocks: Vec<CMat>,
}

impl AlgebraElement {
    pub fn from_blocks(algebra: &MultiMatrixAlgebra, blocks: Vec<CMat>) -> Result<Self> {
        if blocks.len() != algebra.num_blocks() {
            return Err(Error::ShapeMismatch(format!(
                "{} blocks given for {algebra}",
                blocks.len()
            )));
        }
        for (k, (b, &d)) in blocks.iter().zip(algebra.blocks()).enumerate() {
            if b.shape() != (d, d) {
                return Err(Error::ShapeMismatch(format!(
                    "block {k} has shape {:?}, expected {d}x{d}",
                    b.shape()
                )));
            }
        }
        Ok(Self {
            algebra: algebra.clone(),
            blocks,
        })
    }

    pub fn from_coords(algebra: &MultiMatrixAlgebra, coords: &CVec) -> Self {
        assert_eq!(coords.len(), algebra.dim(), "coordinate vector length");
        let mut idx = 0;
        let blocks = algebra
            .blocks()
            .iter()
            .map(|&d| {
                let m = CMat::from_fn(d, d, |i, j| coords[idx + i * d + j]);
                idx += d * d;
                m
            })
            .collect();
        Self {
            algebra: algebra.clone(),
            blocks,
        }
    }

    /// Compression of an ambient `N × N` matrix onto the block diagonal.
    pub fn from_ambient(algebra: &MultiMatrixAlgebra, m: &CMat) -> Self {
        let n = algebra.ambient_dim();
        assert_eq!(m.shape(), (n, n), "ambient matrix shape");
        let offs = algebra.ambient_offsets();
        let blocks = algebra
            .blocks()
            .iter()
            .zip(&offs)
            .map(|(&d, &o)| m.view((o, o), (d, d)).into_owned())
            .collect();
        Self {
            algebra: algebra.clone(),
            blocks,
        }
    }

    /// Multiple of the unit.
    pub fn scalar(algebra: &MultiMatrixAlgebra, z: C64) -> Self {
        algebra.unit() * z
    }

    pub fn algebra(&self) -> &MultiMatrixAlgebra {
        &self.algebra
    }

    pub fn blocks(&self) -> &[CMat] {
        &self.blocks
    }

    pub fn block(&self, k: usize) -> &CMat {
        &self.blocks[k]
    }

    pub fn block_mut(&mut self, k: usize) -> &mut CMat {
        &mut self.blocks[k]
    }

    pub fn coords(&self) -> CVec {
        let mut v = DVector::from_element(self.algebra.dim(), ZERO);
        let mut idx = 0;
        for b in &self.blocks {
            let d = b.nrows();
            for i in 0..d {
                for j in 0..d {
                    v[idx + i * d + j] = b[(i, j)];
                }
            }
            idx += d * d;
        }
        v
    }

    /// Block-diagonal `N × N` matrix.
    pub fn to_ambient(&self) -> CMat {
        let n = self.algebra.ambient_dim();
        let mut m = CMat::zeros(n, n);
        let mut o = 0;
        for b in &self.blocks {
            let d = b.nrows();
            m.view_mut((o, o), (d, d)).copy_from(b);
            o += d;
        }
        m
    }

    pub fn try_add(&self, other: &Self) -> Result<Self> {
        self.algebra.check_same(&other.algebra)?;
        Ok(self.zip_blocks(other, |a, b| a + b))
    }

    pub fn try_sub(&self, other: &Self) -> Result<Self> {
        self.algebra.check_same(&other.algebra)?;
        Ok(self.zip_blocks(other, |a, b| a - b))
    }

    pub fn try_mul(&self, other: &Self) -> Result<Self> {
        self.algebra.check_same(&other.algebra)?;
        Ok(self.zip_blocks(other, |a, b| a * b))
    }

    fn zip_blocks(&self, other: &Self, f: impl Fn(&CMat, &CMat) -> CMat) -> Self {
        Self {
            algebra: self.algebra.clone(),
            blocks: self
                .blocks
                .iter()
                .zip(&other.blocks)
                .map(|(a, b)| f(a, b))
                .collect(),
        }
    }

    pub fn adjoint(&self) -> Self {
        Self {
            algebra: self.algebra.clone(),
            blocks: self.blocks.iter().map(|b| b.adjoint()).collect(),
        }
    }

    pub fn scale(&self, z: C64) -> Self {
        Self {
            algebra: self.algebra.clone(),
            blocks: self.blocks.iter().map(|b| b * z).collect(),
        }
    }

    /// `(a + a*) / 2`.
    pub fn real_part(&self) -> Self {
        Self {
            algebra: self.algebra.clone(),
            blocks: self.blocks.iter().map(linalg::hermitian_part).collect(),
        }
    }

    pub fn map_blocks(&self, f: impl Fn(&CMat) -> CMat) -> Self {
        Self {
            algebra: self.algebra.clone(),
            blocks: self.blocks.iter().map(f).collect(),
        }
    }

    /// C*-norm: largest singular value over all blocks.
    pub fn op_norm(&self) -> f64 {
        self.blocks.iter().map(linalg::op_norm).fold(0.0, f64::max)
    }

    pub fn hs_norm(&self) -> f64 {
        self.blocks
            .iter()
            .map(|b| linalg::hs_norm(b).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// Largest absolute coordinate.
    pub fn max_abs(&self) -> f64 {
        self.blocks.iter().map(linalg::max_abs).fold(0.0, f64::max)
    }

    /// Ambient trace.
    pub fn trace(&self) -> C64 {
        self.blocks.iter().map(|b| b.trace()).sum()
    }

    pub fn hermitian_defect(&self) -> f64 {
        self.blocks
            .iter()
            .map(linalg::hermitian_defect)
            .fold(0.0, f64::max)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermitian_defect() <= tol
    }

    /// Smallest eigenvalue of the Hermitian part.
    pub fn min_eigenvalue(&self) -> f64 {
        self.blocks
            .iter()
            .map(linalg::min_eigenvalue)
            .fold(f64::INFINITY, f64::min)
    }

    /// Hermitian within `tol` and every block has spectrum `≥ -tol`.
    pub fn is_positive(&self, tol: f64) -> bool {
        self.is_hermitian(tol) && self.min_eigenvalue() >= -tol
    }

    /// Positive square root of the positive part (blockwise).
    pub fn sqrt(&self) -> Self {
        self.map_blocks(linalg::psd_sqrt)
    }

    /// Inverse square root on the support; zero on the kernel.
    /// Square root with eigenvalues at most `rel·‖x‖` set to zero.
    pub fn support_sqrt(&self, rel: f64) -> Self {
        let scale = self.op_norm().max(f64::MIN_POSITIVE);
        self.map_blocks(|b| {
            let e = HermitianEigen::new(b);
            e.map(|x| if x > rel * scale { x.sqrt() } else { 0.0 })
        })
    }

    pub fn pinv_sqrt(&self, rel: f64) -> Self {
        let scale = self.op_norm().max(f64::MIN_POSITIVE);
        self.map_blocks(|b| {
            let e = HermitianEigen::new(b);
            e.map(|x| if x > rel * scale { 1.0 / x.sqrt() } else { 0.0 })
        })
    }

    /// `true` when every block is a multiple of the identity, i.e. `self ∈ Z(A)`.
    pub fn central_defect(&self) -> f64 {
        self.blocks
            .iter()
            .map(|b| {
                let d = b.nrows();
                let s = b.trace() / c(d as f64);
                linalg::max_abs(&(b - CMat::identity(d, d) * s))
            })
            .fold(0.0, f64::max)
    }

    /// Scalar of each block when the element is central.
    pub fn central_values(&self) -> Vec<C64> {
        self.blocks
            .iter()
            .map(|b| b.trace() / c(b.nrows() as f64))
            .collect()
    }

    pub fn distance(&self, other: &Self) -> f64 {
        self.try_sub(other)
            .map(|d| d.op_norm())
            .unwrap_or(f64::INFINITY)
    }
}

macro_rules! binop {
    ($tr:ident, $f:ident, $checked:ident) => {
        impl std::ops::$tr<&AlgebraElement> for &AlgebraElement {
            type Output = AlgebraElement;
            /// Panics when the algebras differ; use the `try_` form to recover.
            fn $f(self, rhs: &AlgebraElement) -> AlgebraElement {
                self.$checked(rhs).expect("algebra mismatch")
            }
        }
        impl std::ops::$tr<&AlgebraElement> for AlgebraElement {
            type Output = AlgebraElement;
            fn $f(self, rhs: &AlgebraElement) -> AlgebraElement {
                (&self).$f(rhs)
            }
        }
        impl std::ops::$tr<AlgebraElement> for AlgebraElement {
            type Output = AlgebraElement;
            fn $f(self, rhs: AlgebraElement) -> AlgebraElement {
                (&self).$f(&rhs)
            }
        }
        impl std::ops::$tr<AlgebraElement> for &AlgebraElement {
            type Output = AlgebraElement;
            fn $f(self, rhs: AlgebraElement) -> AlgebraElement {
                self.$f(&rhs)
            }
        }
    };
}

binop!(Add, add, try_add);
binop!(Sub, sub, try_sub);
binop!(Mul, mul, try_mul);

impl std::ops::Mul<C64> for AlgebraElement {
    type Output = AlgebraElement;
    fn mul(self, z: C64) -> AlgebraElement {
        self.scale(z)
    }
}

impl std::ops::Mul<C64> for &AlgebraElement {
    type Output = AlgebraElement;
    fn mul(self, z: C64) -> AlgebraElement {
        self.scale(z)
    }
}

impl std::ops::Mul<f64> for &AlgebraElement {
    type Output = AlgebraElement;
    fn mul(self, s: f64) -> AlgebraElement {
        self.scale(c(s))
    }
}

impl std::ops::Mul<f64> for AlgebraElement {
    type Output = AlgebraElement;
    fn mul(self, s: f64) -> AlgebraElement {
        self.scale(c(s))
    }
}

impl std::ops::Neg for AlgebraElement {
    type Output = AlgebraElement;
    fn neg(self) -> AlgebraElement {
        self.scale(c(-1.0))
    }
}

/// Embeds an `n × n` matrix over `A` into `M_n(A) = ⊕ M_{n d_k}`.
///
/// Row `(i, p)` of block `k` sits at `i * d_k + p`.
pub fn embed_matrix(
    algebra: &MultiMatrixAlgebra,
    entries: &[Vec<AlgebraElement>],
) -> Result<AlgebraElement> {
    let n = entries.len();
    if n == 0 || entries.iter().any(|r| r.len() != n) {
        return Err(Error::ShapeMismatch(
            "matrix over A must be square and non-empty".into(),
        ));
    }
    let amp = algebra.amplify(n);
    let mut blocks = Vec::with_capacity(algebra.num_blocks());
    for (k, &d) in algebra.blocks().iter().enumerate() {
        let mut m = CMat::zeros(n * d, n * d);
        for (i, row) in entries.iter().enumerate() {
            for (j, x) in row.iter().enumerate() {
                algebra.check_same(x.algebra())?;
                m.view_mut((i * d, j * d), (d, d)).copy_from(&x.blocks[k]);
            }
        }
        blocks.push(m);
    }
    AlgebraElement::from_blocks(&amp, blocks)
}

/// Inverse of [`embed_matrix`].
pub fn extract_matrix(
    algebra: &MultiMatrixAlgebra,
    n: usize,
    x: &AlgebraElement,
) -> Result<Vec<Vec<AlgebraElement>>> {
    algebra.amplify(n).check_same(x.algebra())?;
    let mut out = vec![vec![algebra.zero(); n]; n];
    for (k, &d) in algebra.blocks().iter().enumerate() {
        for (i, row) in out.iter_mut().enumerate() {
            for (j, e) in row.iter_mut().enumerate() {
                e.blocks[k] = x.blocks[k].view((i * d, j * d), (d, d)).into_owned();
            }
        }
    }
    Ok(out)
}

/// `Σ_ij e_ij ⊗ x` placed at entry `(i, j)` only.
pub fn elementary(
    algebra: &MultiMatrixAlgebra,
    n: usize,
    i: usize,
    j: usize,
    x: &AlgebraElement,
) -> Result<AlgebraElement> {
    let mut entries = vec![vec![algebra.zero(); n]; n];
    entries[i][j] = x.clone();
    embed_matrix(algebra, &entries)
}

/// Splits an element of `A ⊕ B` into its two summands.
pub fn split_direct_sum(
    a: &MultiMatrixAlgebra,
    b: &MultiMatrixAlgebra,
    x: &AlgebraElement,
) -> Result<(AlgebraElement, AlgebraElement)> {
    a.direct_sum(b).check_same(x.algebra())?;
    let m = a.num_blocks();
    Ok((
        AlgebraElement {
            algebra: a.clone(),
            blocks: x.blocks[..m].to_vec(),
        },
        AlgebraElement {
            algebra: b.clone(),
            blocks: x.blocks[m..].to_vec(),
        },
    ))
}

/// `x ⊕ y`.
pub fn join_direct_sum(x: &AlgebraElement, y: &AlgebraElement) -> AlgebraElement {
    let mut blocks = x.blocks.clone();
    blocks.extend(y.blocks.iter().cloned());
    AlgebraElement {
        algebra: x.algebra.direct_sum(&y.algebra),
        blocks,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::ONE;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn m2() -> MultiMatrixAlgebra {
        MultiMatrixAlgebra::full(2).unwrap()
    }

    #[test]
    fn make_algebra_examples() {
        assert_eq!(MultiMatrixAlgebra::new(&[2]).unwrap().ambient_dim(), 2);
        let a = MultiMatrixAlgebra::new(&[2, 3]).unwrap();
        assert_eq!(a.ambient_dim(), 5);
        assert_eq!(a.dim(), 13);
        assert_eq!(MultiMatrixAlgebra::new(&[1, 1]).unwrap().ambient_dim(), 2);
        assert_eq!(MultiMatrixAlgebra::new(&[]), Err(Error::EmptyBlocks));
        assert_eq!(
            MultiMatrixAlgebra::new(&[2, 0]),
            Err(Error::NonPositiveBlock(0))
        );
    }

    #[test]
    fn matrix_unit_arithmetic() {
        let a = m2();
        let e12 = a.matrix_unit(0, 0, 1);
        let e21 = a.matrix_unit(0, 1, 0);
        assert_eq!(&e12 * &e21, a.matrix_unit(0, 0, 0));
        assert_eq!(e12.adjoint(), e21);
        let b = MultiMatrixAlgebra::new(&[2, 3]).unwrap();
        let u = b.unit();
        assert_eq!(u.block(0), &CMat::identity(2, 2));
        assert_eq!(u.block(1), &CMat::identity(3, 3));
        assert!(matches!(e12.try_mul(&u), Err(Error::AlgebraMismatch(_))));
    }

    #[test]
    fn adjoint_is_involutive() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = MultiMatrixAlgebra::new(&[2, 3]).unwrap();
        let x = a.random_element(&mut rng);
        assert_eq!(x.adjoint().adjoint(), x);
    }

    #[test]
    fn op_norm_examples() {
        let a = MultiMatrixAlgebra::new(&[2, 3]).unwrap();
        let x = AlgebraElement::from_blocks(
            &a,
            vec![CMat::identity(2, 2), CMat::identity(3, 3) * c(2.0)],
        )
        .unwrap();
        assert!((x.op_norm() - 2.0).abs() < 1e-14);
        assert!((m2().matrix_unit(0, 0, 1).op_norm() - 1.0).abs() < 1e-14);
        let y = m2().matrix_unit(0, 0, 1) * 2.0;
        assert!((y.op_norm() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn positivity_examples() {
        let a = m2();
        assert!(a.unit().is_positive(1e-9));
        assert!(!(-a.matrix_unit(0, 0, 0)).is_positive(1e-9));
        let b = MultiMatrixAlgebra::new(&[2, 1]).unwrap();
        let x = AlgebraElement::from_blocks(
            &b,
            vec![
                CMat::from_row_slice(2, 2, &[ONE, c(0.6), c(0.6), ONE]),
                CMat::identity(1, 1),
            ],
        )
        .unwrap();
        assert!(x.is_positive(1e-9));
        assert!((x.min_eigenvalue() - 0.4).abs() < 1e-12);
    }

    #[test]
    fn center_basis_examples() {
        assert_eq!(m2().center_basis(), vec![m2().unit()]);
        let b = MultiMatrixAlgebra::new(&[2, 3]).unwrap();
        let z = b.center_basis();
        assert_eq!(z.len(), 2);
        assert_eq!(z[0].block(1), &CMat::zeros(3, 3));
        assert_eq!(
            MultiMatrixAlgebra::abelian(3).unwrap().center_basis().len(),
            3
        );
    }

    #[test]
    fn amplify_examples() {
        assert_eq!(m2().amplify(2).blocks(), &[4]);
        assert_eq!(
            MultiMatrixAlgebra::new(&[2, 3])
                .unwrap()
                .amplify(2)
                .blocks(),
            &[4, 6]
        );
        assert_eq!(
            MultiMatrixAlgebra::abelian(2).unwrap().amplify(3).blocks(),
            &[3, 3]
        );
    }

    #[test]
    fn embed_extract_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = MultiMatrixAlgebra::new(&[1, 2]).unwrap();
        let entries: Vec<Vec<_>> = (0..3)
            .map(|_| (0..3).map(|_| a.random_element(&mut rng)).collect())
            .collect();
        let x = embed_matrix(&a, &entries).unwrap();
        assert_eq!(extract_matrix(&a, 3, &x).unwrap(), entries);
    }

    #[test]
    fn opposite_map_examples() {
        let a = m2();
        let (_, map) = a.opposite();
        assert_eq!(map.apply(&a.matrix_unit(0, 0, 1)), a.matrix_unit(0, 1, 0));
    }

    #[test]
    fn coords_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a = MultiMatrixAlgebra::new(&[3, 1, 2]).unwrap();
        let x = a.random_element(&mut rng);
        assert_eq!(AlgebraElement::from_coords(&a, &x.coords()), x);
        assert_eq!(AlgebraElement::from_ambient(&a, &x.to_ambient()), x);
        for idx in 0..a.dim() {
            let (r, s) = a.coord_to_ambient(idx);
            assert_eq!(a.basis_element(idx).to_ambient()[(r, s)], ONE);
        }
    }
}
