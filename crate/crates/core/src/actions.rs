//! Central actions of a coefficient algebra, bimodule structures and
//! bimodule Hilbert spaces.
//!
//! A *-homomorphism into the center of `A = ⊕ M_{d_k}` is determined by one
//! character of the acting algebra per block of `A`. Characters of a
//! multi-matrix algebra are evaluations at its `1 × 1` blocks, so an action is
//! stored as `Option<source block>` per target block (`None` is the zero
//! character).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::algebra::{embed_matrix, extract_matrix, AlgebraElement, MultiMatrixAlgebra};
use crate::cpcalc::{module_residual, BlockLinearMap};
use crate::error::{Error, Result};
use crate::linalg::{self, c, kron, max_abs, CMat, HermitianEigen, ZERO};

const HOM_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct CentralAction {
    source: MultiMatrixAlgebra,
    target: MultiMatrixAlgebra,
    rho: Vec<AlgebraElement>,
    unital: bool,
    characters: Vec<Option<usize>>,
}

/// Validates `rho` given by the images of the source basis.
pub fn make_action(
    source: &MultiMatrixAlgebra,
    target: &MultiMatrixAlgebra,
    rho_images: Vec<AlgebraElement>,
    unital: bool,
) -> Result<CentralAction> {
    if rho_images.len() != source.dim() {
        return Err(Error::SizeMismatch(format!(
            "{} images for a {}-dimensional algebra",
            rho_images.len(),
            source.dim()
        )));
    }
    for r in &rho_images {
        target.check_same(r.algebra())?;
    }
    let scale = rho_images.iter().map(|r| r.max_abs()).fold(1.0, f64::max);
    let central = rho_images
        .iter()
        .map(|r| r.central_defect())
        .fold(0.0, f64::max);
    if central > HOM_TOL * scale {
        return Err(Error::NotCentral(central));
    }
    // Blockwise scalar values χ_k(e_i) of each image.
    let values: Vec<Vec<linalg::C64>> = rho_images.iter().map(|r| r.central_values()).collect();
    let basis = source.basis();
    let rho = |x: &AlgebraElement| -> Vec<linalg::C64> {
        let cx = x.coords();
        (0..target.num_blocks())
            .map(|k| (0..cx.len()).map(|i| cx[i] * values[i][k]).sum())
            .collect()
    };
    let mut hom: f64 = 0.0;
    for (i, a) in basis.iter().enumerate() {
        let star = rho(&a.adjoint());
        for k in 0..target.num_blocks() {
            hom = hom.max((star[k] - values[i][k].conj()).norm());
        }
        for (j, b) in basis.iter().enumerate() {
            let prod = rho(&(a * b));
            for k in 0..target.num_blocks() {
                hom = hom.max((prod[k] - values[i][k] * values[j][k]).norm());
            }
        }
    }
    if hom > HOM_TOL * scale {
        return Err(Error::NotStarHom(hom));
    }
    let co = source.coord_offsets();
    let mut characters = Vec::with_capacity(target.num_blocks());
    for k in 0..target.num_blocks() {
        let nonzero: Vec<usize> = (0..source.dim())
            .filter(|&i| values[i][k].norm() > 0.5)
            .collect();
        let ch = match nonzero.as_slice() {
            [] => None,
            [i] => {
                let (s, _, _) = source.coord_position(*i);
                if source.blocks()[s] != 1 || co[s] != *i {
                    return Err(Error::NotStarHom((values[*i][k] - c(1.0)).norm().max(1.0)));
                }
                Some(s)
            }
            _ => return Err(Error::NotStarHom(1.0)),
        };
        characters.push(ch);
    }
    let act = CentralAction::from_characters(source, target, characters)?;
    if unital {
        let defect = (act.rho(&source.unit()) - target.unit()).max_abs();
        if defect > 0.0 {
            return Err(Error::NotUnital(defect));
        }
    }
    let drift = act
        .rho
        .iter()
        .zip(&rho_images)
        .map(|(a, b)| (a - b).max_abs())
        .fold(0.0, f64::max);
    if drift > HOM_TOL * scale {
        return Err(Error::NotStarHom(drift));
    }
    Ok(CentralAction { unital, ..act })
}

impl CentralAction {
    /// Action with the given character per target block.
    pub fn from_characters(
        source: &MultiMatrixAlgebra,
        target: &MultiMatrixAlgebra,
        characters: Vec<Option<usize>>,
    ) -> Result<Self> {
        if characters.len() != target.num_blocks() {
            return Err(Error::SizeMismatch(format!(
                "{} characters for {} blocks",
                characters.len(),
                target.num_blocks()
            )));
        }
        for ch in characters.iter().flatten() {
            if *ch >= source.num_blocks() || source.blocks()[*ch] != 1 {
                return Err(Error::NotStarHom(1.0));
            }
        }
        let co = source.coord_offsets();
        let rho = (0..source.dim())
            .map(|i| {
                let mut r = target.zero();
                for (k, ch) in characters.iter().enumerate() {
                    if ch.is_some_and(|s| co[s] == i) {
                        *r.block_mut(k) = CMat::identity(target.blocks()[k], target.blocks()[k]);
                    }
                }
                r
            })
            .collect();
        let unital = characters.iter().all(Option::is_some);
        Ok(Self {
            source: source.clone(),
            target: target.clone(),
            rho,
            unital,
            characters,
        })
    }

    /// `ℂ` acting by scalars.
    pub fn trivial(target: &MultiMatrixAlgebra) -> Self {
        let one = MultiMatrixAlgebra::abelian(1).unwrap();
        Self::from_characters(&one, target, vec![Some(0); target.num_blocks()]).unwrap()
    }

    pub fn source(&self) -> &MultiMatrixAlgebra {
        &self.source
    }

    pub fn target(&self) -> &MultiMatrixAlgebra {
        &self.target
    }

    pub fn rho_images(&self) -> &[AlgebraElement] {
        &self.rho
    }

    pub fn is_unital(&self) -> bool {
        self.unital
    }

    pub fn characters(&self) -> &[Option<usize>] {
        &self.characters
    }

    /// Character of each ambient index of the target.
    pub fn index_labels(&self) -> Vec<Option<usize>> {
        self.target
            .block_of_ambient()
            .into_iter()
            .map(|k| self.characters[k])
            .collect()
    }

    /// `ρ(α)`, a central element of the target.
    pub fn rho(&self, alpha: &AlgebraElement) -> AlgebraElement {
        let mut out = self.target.zero();
        for (k, ch) in self.characters.iter().enumerate() {
            if let Some(s) = ch {
                let v = alpha.block(*s)[(0, 0)];
                let d = self.target.blocks()[k];
                *out.block_mut(k) = CMat::identity(d, d) * v;
            }
        }
        out
    }

    /// `α · a = ρ(α) a`.
    pub fn act(&self, alpha: &AlgebraElement, a: &AlgebraElement) -> Result<AlgebraElement> {
        self.source.check_same(alpha.algebra())?;
        self.target.check_same(a.algebra())?;
        Ok(&self.rho(alpha) * a)
    }

    /// `ρ_n` on `M_n(source) → M_n(target)`.
    pub fn amplified_rho(&self, n: usize, alpha: &AlgebraElement) -> Result<AlgebraElement> {
        let entries = extract_matrix(&self.source, n, alpha)?;
        let mapped: Vec<Vec<AlgebraElement>> = entries
            .iter()
            .map(|r| r.iter().map(|x| self.rho(x)).collect())
            .collect();
        embed_matrix(&self.target, &mapped)
    }

    /// The same characters acting on `M_n(target)`.
    pub fn amplify(&self, n: usize) -> Self {
        Self::from_characters(
            &self.source,
            &self.target.amplify(n),
            self.characters.clone(),
        )
        .unwrap()
    }

    /// Action on `target ⊕ other.target`.
    pub fn direct_sum(&self, other: &CentralAction) -> Result<Self> {
        if self.source != other.source {
            return Err(Error::SourceMismatch);
        }
        let mut chars = self.characters.clone();
        chars.extend(other.characters.iter().copied());
        Self::from_characters(&self.source, &self.target.direct_sum(&other.target), chars)
    }

    /// Left multiplication of a commutative algebra on itself.
    pub fn on_itself(algebra: &MultiMatrixAlgebra) -> Result<Self> {
        if algebra.blocks().iter().any(|&d| d != 1) {
            return Err(Error::NonCommutativeActing);
        }
        Self::from_characters(
            algebra,
            algebra,
            (0..algebra.num_blocks()).map(Some).collect(),
        )
    }

    /// Residuals of `(α·a)* = α*·a*`, `α·(ab) = (α·a)b` and `(αβ)·a = α·(β·a)` over basis data.
    pub fn compatibility_residuals(&self) -> CompatibilityResiduals {
        let sb = self.source.basis();
        let tb = self.target.basis();
        let mut out = CompatibilityResiduals::default();
        for alpha in &sb {
            let r = self.rho(alpha);
            let rs = self.rho(&alpha.adjoint());
            for (idx, a) in tb.iter().enumerate() {
                let act = &r * a;
                out.star = out.star.max((act.adjoint() - &rs * &a.adjoint()).max_abs());
                let (k, _, j) = self.target.coord_position(idx);
                let d = self.target.blocks()[k];
                let off = self.target.coord_offsets()[k];
                // only products inside the same block can be nonzero
                for l in 0..d {
                    let b = &tb[off + j * d + l];
                    out.product = out.product.max((&r * &(a * b) - &act * b).max_abs());
                }
            }
            for beta in &sb {
                let rb = self.rho(beta);
                let rab = self.rho(&(alpha * beta));
                for a in &tb {
                    out.composition = out.composition.max((&rab * a - &r * &(&rb * a)).max_abs());
                }
            }
        }
        out
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct CompatibilityResiduals {
    pub star: f64,
    pub product: f64,
    pub composition: f64,
}

impl CompatibilityResiduals {
    pub fn max(&self) -> f64 {
        self.star.max(self.product).max(self.composition)
    }
}

/// Random action; `unital` forces a character on every block.
pub fn random_central_action<R: Rng + ?Sized>(
    source: &MultiMatrixAlgebra,
    target: &MultiMatrixAlgebra,
    unital: bool,
    rng: &mut R,
) -> Result<CentralAction> {
    let scalars: Vec<usize> = (0..source.num_blocks())
        .filter(|&s| source.blocks()[s] == 1)
        .collect();
    if unital && scalars.is_empty() {
        return Err(Error::NonUnitalAction);
    }
    let chars = (0..target.num_blocks())
        .map(|_| {
            if scalars.is_empty() || (!unital && rng.random_bool(0.25)) {
                None
            } else {
                Some(scalars[rng.random_range(0..scalars.len())])
            }
        })
        .collect();
    CentralAction::from_characters(source, target, chars)
}

/// Left action of one algebra and right action of another on the same target.
#[derive(Clone, Debug, PartialEq)]
pub struct BimoduleStructure {
    pub left: CentralAction,
    pub right: CentralAction,
}

impl BimoduleStructure {
    pub fn new(left: CentralAction, right: CentralAction) -> Result<Self> {
        left.target().check_same(right.target())?;
        let s = Self { left, right };
        let r = s.commutation_residual();
        if r > HOM_TOL {
            return Err(Error::NotCentral(r));
        }
        Ok(s)
    }

    pub fn target(&self) -> &MultiMatrixAlgebra {
        self.left.target()
    }

    pub fn commutation_residual(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for a in self.left.source().basis() {
            let ra = self.left.rho(&a);
            for b in self.right.source().basis() {
                let rb = self.right.rho(&b);
                worst = worst.max((&ra * &rb - &rb * &ra).max_abs());
            }
        }
        worst
    }

    /// `α · a · β`.
    pub fn act(
        &self,
        alpha: &AlgebraElement,
        a: &AlgebraElement,
        beta: &AlgebraElement,
    ) -> Result<AlgebraElement> {
        let la = self.left.act(alpha, a)?;
        self.right.source().check_same(beta.algebra())?;
        Ok(&la * &self.right.rho(beta))
    }

    pub fn index_labels(&self) -> IndexLabels {
        IndexLabels {
            left: self.left.index_labels(),
            right: self.right.index_labels(),
        }
    }
}

/// Per ambient index labels of a left and right action by diagonal operators.
///
/// A map is a module map for actions with these labels exactly when its Choi
/// entry at `(I, P), (J, Q)` vanishes unless `left[I] = left'[P]` and
/// `right[J] = right'[Q]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IndexLabels {
    pub left: Vec<Option<usize>>,
    pub right: Vec<Option<usize>>,
}

impl IndexLabels {
    /// Left module labels; the right side is unconstrained.
    pub fn from_action(act: &CentralAction) -> Self {
        let left = act.index_labels();
        let right = vec![None; left.len()];
        Self { left, right }
    }

    pub fn unconstrained(n: usize) -> Self {
        Self {
            left: vec![None; n],
            right: vec![None; n],
        }
    }

    pub fn len(&self) -> usize {
        self.left.len()
    }

    pub fn is_empty(&self) -> bool {
        self.left.is_empty()
    }
}

pub fn is_module_map(
    theta: &BlockLinearMap,
    act_a: &CentralAction,
    act_b: &CentralAction,
    tol: f64,
) -> Result<bool> {
    Ok(module_residual(theta, act_a, act_b)? <= tol)
}

/// Largest left or right module defect on basis elements.
pub fn bimodule_residual(
    theta: &BlockLinearMap,
    bim_a: &BimoduleStructure,
    bim_b: &BimoduleStructure,
) -> Result<f64> {
    let left = module_residual(theta, &bim_a.left, &bim_b.left)?;
    let right = module_residual(theta, &bim_a.right, &bim_b.right)?;
    Ok(left.max(right))
}

pub fn is_bimodule_map(
    theta: &BlockLinearMap,
    bim_a: &BimoduleStructure,
    bim_b: &BimoduleStructure,
    tol: f64,
) -> Result<bool> {
    Ok(bimodule_residual(theta, bim_a, bim_b)? <= tol)
}

/// `ℂ^d` with a representation of one algebra and an anti-representation of another.
#[derive(Clone, Debug, PartialEq)]
pub struct BimoduleHilbert {
    dim: usize,
    left_algebra: MultiMatrixAlgebra,
    right_algebra: MultiMatrixAlgebra,
    pi_left: Vec<CMat>,
    pi_right_op: Vec<CMat>,
}

impl BimoduleHilbert {
    /// `pi_left[i]` and `pi_right_op[i]` are the images of basis element `i`.
    pub fn new(
        dim: usize,
        left_algebra: &MultiMatrixAlgebra,
        right_algebra: &MultiMatrixAlgebra,
        pi_left: Vec<CMat>,
        pi_right_op: Vec<CMat>,
    ) -> Result<Self> {
        Self::with_tolerance(
            dim,
            left_algebra,
            right_algebra,
            pi_left,
            pi_right_op,
            HOM_TOL,
        )
    }

    /// As [`BimoduleHilbert::new`] with a caller-chosen residual tolerance.
    pub fn with_tolerance(
        dim: usize,
        left_algebra: &MultiMatrixAlgebra,
        right_algebra: &MultiMatrixAlgebra,
        pi_left: Vec<CMat>,
        pi_right_op: Vec<CMat>,
        tol: f64,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidRepresentation(
                "zero-dimensional space".into(),
            ));
        }
        if pi_left.len() != left_algebra.dim() || pi_right_op.len() != right_algebra.dim() {
            return Err(Error::InvalidRepresentation(
                "one image per basis element is required".into(),
            ));
        }
        if pi_left
            .iter()
            .chain(&pi_right_op)
            .any(|m| m.shape() != (dim, dim))
        {
            return Err(Error::InvalidRepresentation(format!(
                "images must be {dim}x{dim}"
            )));
        }
        let h = Self {
            dim,
            left_algebra: left_algebra.clone(),
            right_algebra: right_algebra.clone(),
            pi_left,
            pi_right_op,
        };
        let l = h.hom_residual(false);
        if l > tol {
            return Err(Error::InvalidRepresentation(format!(
                "left map is not a *-homomorphism ({l:.3e})"
            )));
        }
        let r = h.hom_residual(true);
        if r > tol {
            return Err(Error::InvalidRepresentation(format!(
                "right map is not a *-anti-homomorphism ({r:.3e})"
            )));
        }
        let mut comm: f64 = 0.0;
        for a in &h.pi_left {
            for b in &h.pi_right_op {
                comm = comm.max(max_abs(&linalg::commutator(a, b)));
            }
        }
        if comm > tol {
            return Err(Error::InvalidRepresentation(format!(
                "ranges do not commute ({comm:.3e})"
            )));
        }
        Ok(h)
    }

    fn hom_residual(&self, right: bool) -> f64 {
        let (alg, imgs) = if right {
            (&self.right_algebra, &self.pi_right_op)
        } else {
            (&self.left_algebra, &self.pi_left)
        };
        let basis = alg.basis();
        let apply = |x: &AlgebraElement| linear_image(imgs, x, self.dim);
        let mut worst: f64 = 0.0;
        for (i, a) in basis.iter().enumerate() {
            worst = worst.max(max_abs(&(apply(&a.adjoint()) - imgs[i].adjoint())));
            for (j, b) in basis.iter().enumerate() {
                let want = if right {
                    &imgs[j] * &imgs[i]
                } else {
                    &imgs[i] * &imgs[j]
                };
                worst = worst.max(max_abs(&(apply(&(a * b)) - want)));
            }
        }
        worst
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn left_algebra(&self) -> &MultiMatrixAlgebra {
        &self.left_algebra
    }

    pub fn right_algebra(&self) -> &MultiMatrixAlgebra {
        &self.right_algebra
    }

    pub fn pi_left(&self, alpha: &AlgebraElement) -> CMat {
        linear_image(&self.pi_left, alpha, self.dim)
    }

    /// Image of `β` under the anti-representation: `ξ · β = pi_right_op(β) ξ`.
    pub fn pi_right_op(&self, beta: &AlgebraElement) -> CMat {
        linear_image(&self.pi_right_op, beta, self.dim)
    }

    /// Random space assembled from irreducible pieces `ℂ^{d_a} ⊗ ℂ^{d_b}` and rotated.
    pub fn random<R: Rng + ?Sized>(
        left_algebra: &MultiMatrixAlgebra,
        right_algebra: &MultiMatrixAlgebra,
        max_dim: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let mut pieces = Vec::new();
        let mut dim = 0;
        for _ in 0..8 {
            let a = rng.random_range(0..left_algebra.num_blocks());
            let b = rng.random_range(0..right_algebra.num_blocks());
            let d = left_algebra.blocks()[a] * right_algebra.blocks()[b];
            if dim + d <= max_dim {
                pieces.push((a, b));
                dim += d;
            }
        }
        if pieces.is_empty() {
            return Err(Error::InvalidRepresentation(format!(
                "no irreducible piece fits in dimension {max_dim}"
            )));
        }
        let u = linalg::random_unitary(rng, dim);
        let build = |alg: &MultiMatrixAlgebra, right: bool| -> Vec<CMat> {
            alg.basis()
                .iter()
                .map(|e| {
                    let mut m = CMat::zeros(dim, dim);
                    let mut off = 0;
                    for &(a, b) in &pieces {
                        let (da, db) = (left_algebra.blocks()[a], right_algebra.blocks()[b]);
                        let piece = if right {
                            kron(&CMat::identity(da, da), &e.block(b).transpose())
                        } else {
                            kron(e.block(a), &CMat::identity(db, db))
                        };
                        m.view_mut((off, off), (da * db, da * db)).copy_from(&piece);
                        off += da * db;
                    }
                    &u * m * u.adjoint()
                })
                .collect()
        };
        let pl = build(left_algebra, false);
        let pr = build(right_algebra, true);
        Self::new(dim, left_algebra, right_algebra, pl, pr)
    }
}

fn linear_image(images: &[CMat], x: &AlgebraElement, dim: usize) -> CMat {
    let cx = x.coords();
    let mut out = CMat::zeros(dim, dim);
    for (i, z) in cx.iter().enumerate() {
        if *z != ZERO {
            out += &images[i] * *z;
        }
    }
    out
}

#[derive(Clone, Debug, Serialize)]
pub struct MatricialBoundReport {
    pub trials: usize,
    pub k: f64,
    /// Smallest eigenvalue of `k(α·1·β) ± θ_n(a)` over all trials.
    pub min_eigenvalue: f64,
    pub passed: bool,
}

/// Samples `α, β` and `a` with `±a ≤ α·1·β` and checks `±θ_n(a) ≤ k(α·1·β)`.
///
/// One of `α, β` is a general positive matrix and the other is `p ⊗ I_n` for a
/// positive `p`, which keeps `α·1·β` positive.
#[allow(clippy::too_many_arguments)]
pub fn matricial_bound_check(
    theta: &BlockLinearMap,
    bim_a: &BimoduleStructure,
    bim_b: &BimoduleStructure,
    k: f64,
    trials: usize,
    n_max: usize,
    seed: u64,
    tol: f64,
) -> Result<MatricialBoundReport> {
    if !theta.is_hermitian_preserving(1e-9) {
        return Err(Error::NotHermitianPreserving(theta.hermitian_defect()));
    }
    bim_a.target().check_same(theta.source())?;
    bim_b.target().check_same(theta.target())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let fa = bim_a.left.source().clone();
    let fb = bim_a.right.source().clone();
    let mut amps: Vec<Option<BlockLinearMap>> = vec![None; n_max.max(1) + 1];
    let mut worst = f64::INFINITY;
    for _ in 0..trials {
        let n = rng.random_range(1..=n_max.max(1));
        let general_left = rng.random_bool(0.5);
        let positive = |alg: &MultiMatrixAlgebra, rng: &mut ChaCha8Rng| -> AlgebraElement {
            let g = alg.random_element(rng);
            g.adjoint() * &g + alg.unit() * c(1e-6)
        };
        let diag = |alg: &MultiMatrixAlgebra, rng: &mut ChaCha8Rng| -> Result<AlgebraElement> {
            let p = positive(alg, rng);
            let entries: Vec<Vec<AlgebraElement>> = (0..n)
                .map(|i| {
                    (0..n)
                        .map(|j| if i == j { p.clone() } else { alg.zero() })
                        .collect()
                })
                .collect();
            embed_matrix(alg, &entries)
        };
        let (alpha, beta) = if general_left {
            (positive(&fa.amplify(n), &mut rng), diag(&fb, &mut rng)?)
        } else {
            (diag(&fa, &mut rng)?, positive(&fb.amplify(n), &mut rng))
        };
        let p_a = &bim_a.left.amplified_rho(n, &alpha)? * &bim_a.right.amplified_rho(n, &beta)?;
        let p_b = &bim_b.left.amplified_rho(n, &alpha)? * &bim_b.right.amplified_rho(n, &beta)?;
        let h = theta.source().amplify(n).random_hermitian(&mut rng);
        let x = h.scale(c(1.0 / h.op_norm().max(f64::MIN_POSITIVE)));
        let root = p_a.real_part().sqrt();
        let a = &root * &(&x * &root);
        let th = amps[n].get_or_insert_with(|| theta.amplify(n));
        let ta = th.eval(&a);
        let kp = p_b.scale(c(k));
        for y in [&kp + &ta, &kp - &ta] {
            let m = y
                .blocks()
                .iter()
                .map(|b| HermitianEigen::new(b).min())
                .fold(f64::INFINITY, f64::min);
            worst = worst.min(m);
        }
    }
    if trials == 0 {
        worst = 0.0;
    }
    Ok(MatricialBoundReport {
        trials,
        k,
        min_eigenvalue: worst,
        passed: worst >= -tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::MultiMatrixAlgebra as Alg;
    use crate::cpcalc::conditional_expectation;

    fn c2() -> Alg {
        Alg::abelian(2).unwrap()
    }

    #[test]
    fn make_action_examples() {
        let a = Alg::new(&[2, 3]).unwrap();
        let imgs = vec![a.center_basis()[0].clone(), a.center_basis()[1].clone()];
        let act = make_action(&c2(), &a, imgs, true).unwrap();
        assert_eq!(act.characters(), &[Some(0), Some(1)]);

        let m2 = Alg::full(2).unwrap();
        let one = Alg::abelian(1).unwrap();
        let triv = make_action(&one, &m2, vec![m2.unit()], true).unwrap();
        assert_eq!(triv, CentralAction::trivial(&m2));

        let bad = make_action(
            &c2(),
            &m2,
            vec![m2.matrix_unit(0, 0, 0), m2.matrix_unit(0, 1, 1)],
            false,
        );
        assert!(matches!(bad, Err(Error::NotCentral(_))));
        let not_hom = make_action(&one, &m2, vec![m2.unit() * 2.0], false);
        assert!(matches!(not_hom, Err(Error::NotStarHom(_))));
        let not_unital = make_action(&c2(), &a, vec![a.center_basis()[0].clone(), a.zero()], true);
        assert!(matches!(not_unital, Err(Error::NotUnital(_))));
    }

    #[test]
    fn act_examples() {
        let a = Alg::new(&[2, 3]).unwrap();
        let act = CentralAction::from_characters(&c2(), &a, vec![Some(0), Some(1)]).unwrap();
        let alpha = AlgebraElement::from_blocks(
            &c2(),
            vec![CMat::identity(1, 1) * c(2.0), CMat::zeros(1, 1)],
        )
        .unwrap();
        let got = act.act(&alpha, &a.unit()).unwrap();
        let want =
            AlgebraElement::from_blocks(&a, vec![CMat::identity(2, 2) * c(2.0), CMat::zeros(3, 3)])
                .unwrap();
        assert_eq!(got, want);
        let triv = CentralAction::trivial(&a);
        let x = a.random_element(&mut ChaCha8Rng::seed_from_u64(1));
        assert_eq!(triv.act(&Alg::abelian(1).unwrap().unit(), &x).unwrap(), x);
        assert!(act.compatibility_residuals().max() <= 1e-12);
    }

    #[test]
    fn module_map_examples() {
        let a = Alg::new(&[2, 2]).unwrap();
        let act = CentralAction::from_characters(&c2(), &a, vec![Some(0), Some(1)]).unwrap();
        let id = BlockLinearMap::identity(&a);
        assert!(is_module_map(&id, &act, &act, 1e-12).unwrap());
        let swap = BlockLinearMap::from_fn(&a, &a, |x| {
            AlgebraElement::from_blocks(&a, vec![x.block(1).clone(), x.block(0).clone()])
        })
        .unwrap();
        assert!(!is_module_map(&swap, &act, &act, 1e-12).unwrap());
        let triv = CentralAction::trivial(&a);
        assert!(is_module_map(&swap, &triv, &triv, 1e-12).unwrap());
        let other = CentralAction::trivial(&Alg::full(2).unwrap());
        assert!(matches!(
            is_module_map(&id, &act, &other, 1e-12),
            Err(Error::SourceMismatch)
        ));
    }

    #[test]
    fn bimodule_examples() {
        let a = Alg::new(&[2, 2]).unwrap();
        let left = CentralAction::trivial(&a);
        let right = CentralAction::from_characters(&c2(), &a, vec![Some(0), Some(1)]).unwrap();
        let bim = BimoduleStructure::new(left.clone(), right.clone()).unwrap();
        assert!(is_bimodule_map(&BlockLinearMap::identity(&a), &bim, &bim, 1e-12).unwrap());
        assert!(is_bimodule_map(&BlockLinearMap::zero(&a, &a), &bim, &bim, 1e-12).unwrap());
        let swap = BlockLinearMap::from_fn(&a, &a, |x| {
            AlgebraElement::from_blocks(&a, vec![x.block(1).clone(), x.block(0).clone()])
        })
        .unwrap();
        assert!(is_module_map(&swap, &left, &left, 1e-12).unwrap());
        assert!(!is_bimodule_map(&swap, &bim, &bim, 1e-12).unwrap());
    }

    #[test]
    fn bimodule_hilbert_validation() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let fa = Alg::new(&[1, 2]).unwrap();
        let fb = Alg::new(&[2, 1]).unwrap();
        let h = BimoduleHilbert::random(&fa, &fb, 8, &mut rng).unwrap();
        let x = fb.random_element(&mut rng);
        let y = fb.random_element(&mut rng);
        let lhs = h.pi_right_op(&(&x * &y));
        assert!(max_abs(&(lhs - h.pi_right_op(&y) * h.pi_right_op(&x))) < 1e-12);
        let bad = BimoduleHilbert::new(
            2,
            &Alg::abelian(1).unwrap(),
            &Alg::abelian(1).unwrap(),
            vec![CMat::identity(2, 2) * c(2.0)],
            vec![CMat::identity(2, 2)],
        );
        assert!(matches!(bad, Err(Error::InvalidRepresentation(_))));
    }

    #[test]
    fn matricial_bound_examples() {
        let m2 = Alg::full(2).unwrap();
        let triv = CentralAction::trivial(&m2);
        let bim = BimoduleStructure::new(triv.clone(), triv).unwrap();
        let id = BlockLinearMap::identity(&m2);
        assert!(
            matricial_bound_check(&id, &bim, &bim, 1.0, 20, 3, 1, 1e-9)
                .unwrap()
                .passed
        );
        let half = id.scale(c(0.5));
        assert!(
            matricial_bound_check(&half, &bim, &bim, 0.5, 20, 3, 2, 1e-9)
                .unwrap()
                .passed
        );
        let e = conditional_expectation(&m2, &[m2.matrix_unit(0, 0, 0), m2.matrix_unit(0, 1, 1)])
            .unwrap();
        assert!(
            matricial_bound_check(&e, &bim, &bim, 1.0, 20, 3, 3, 1e-9)
                .unwrap()
                .passed
        );
        // k below the norm must fail somewhere
        assert!(
            !matricial_bound_check(&id, &bim, &bim, 0.5, 20, 2, 4, 1e-9)
                .unwrap()
                .passed
        );
    }
}
