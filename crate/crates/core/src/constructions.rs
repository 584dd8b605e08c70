//! Unitization, extension formulas, rescaling to unital maps, lifts of
//! factorization witnesses, the matrix-coefficient correspondences and the
//! 2×2 assembly of four maps.
//!
//! The unitization `Ã` of `A` by `𝔄` is modelled as `A ⊕ 𝔄` through
//! `(a, α) ↦ (a + ρ(α)) ⊕ α`. With the pair product
//! `(a, α)(b, β) = (ab + α·b + β·a, αβ)` this is a *-isomorphism.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::actions::{bimodule_residual, BimoduleStructure, CentralAction, IndexLabels};
use crate::algebra::{
    elementary, embed_matrix, extract_matrix, join_direct_sum, split_direct_sum, AlgebraElement,
    MultiMatrixAlgebra,
};
use crate::cpcalc::{cb_norm_at_most, compose, module_residual, BlockLinearMap};
use crate::cpsolve::CpMapProblem;
use crate::error::{Error, Result};
use crate::feasibility::{SolveReport, SolverOptions};
use crate::linalg::{self, CMat, C64, ONE, ZERO};

/// Tolerance for the c.c.p. and module checks on inputs.
pub const CHECK_TOL: f64 = 1e-7;
const MULT_DOMAIN_TOL: f64 = 1e-9;
/// Relative eigenvalue below which `φ̃(1)` counts as singular.
const SINGULAR_REL: f64 = 1e-8;

#[derive(Clone, Debug)]
pub struct UnitizationResult {
    action: CentralAction,
    action_tilde: CentralAction,
}

/// `Ã = A × 𝔄` realized as `A ⊕ 𝔄`, with `𝔄` acting by `α·(a, β) = (α·a, αβ)`.
pub fn unitize(action: &CentralAction) -> Result<UnitizationResult> {
    if !action.is_unital() {
        return Err(Error::NonUnitalAction);
    }
    let own = CentralAction::on_itself(action.source())?;
    let action_tilde = action.direct_sum(&own)?;
    Ok(UnitizationResult {
        action: action.clone(),
        action_tilde,
    })
}

impl UnitizationResult {
    pub fn base(&self) -> &MultiMatrixAlgebra {
        self.action.target()
    }

    pub fn acting(&self) -> &MultiMatrixAlgebra {
        self.action.source()
    }

    pub fn algebra_tilde(&self) -> &MultiMatrixAlgebra {
        self.action_tilde.target()
    }

    pub fn action(&self) -> &CentralAction {
        &self.action
    }

    pub fn action_tilde(&self) -> &CentralAction {
        &self.action_tilde
    }

    pub fn iso(&self, a: &AlgebraElement, alpha: &AlgebraElement) -> Result<AlgebraElement> {
        self.base().check_same(a.algebra())?;
        self.acting().check_same(alpha.algebra())?;
        Ok(join_direct_sum(&(a + self.action.rho(alpha)), alpha))
    }

    pub fn inverse(&self, y: &AlgebraElement) -> Result<(AlgebraElement, AlgebraElement)> {
        let (x, alpha) = split_direct_sum(self.base(), self.acting(), y)?;
        let a = x - self.action.rho(&alpha);
        Ok((a, alpha))
    }

    pub fn iota_a(&self, a: &AlgebraElement) -> Result<AlgebraElement> {
        self.iso(a, &self.acting().zero())
    }

    /// Image of `(0, 1_𝔄)`.
    pub fn unit_tilde(&self) -> AlgebraElement {
        self.iso(&self.base().zero(), &self.acting().unit())
            .unwrap()
    }

    pub fn pair_product(
        &self,
        x: &(AlgebraElement, AlgebraElement),
        y: &(AlgebraElement, AlgebraElement),
    ) -> (AlgebraElement, AlgebraElement) {
        let (a, alpha) = x;
        let (b, beta) = y;
        let first = a * b + &self.action.rho(alpha) * b + &self.action.rho(beta) * a;
        (first, alpha * beta)
    }

    fn pair_basis(&self) -> Vec<(AlgebraElement, AlgebraElement)> {
        let (base, acting) = (self.base(), self.acting());
        base.basis()
            .into_iter()
            .map(|b| (b, acting.zero()))
            .chain(acting.basis().into_iter().map(|f| (base.zero(), f)))
            .collect()
    }

    /// `max ‖iso(xy) − iso(x) iso(y)‖` over basis pairs.
    pub fn multiplicativity_residual(&self) -> f64 {
        let basis = self.pair_basis();
        let images: Vec<AlgebraElement> = basis
            .iter()
            .map(|(a, al)| self.iso(a, al).unwrap())
            .collect();
        let mut worst: f64 = 0.0;
        for (x, ix) in basis.iter().zip(&images) {
            for (y, iy) in basis.iter().zip(&images) {
                let (p, q) = self.pair_product(x, y);
                let lhs = self.iso(&p, &q).unwrap();
                worst = worst.max((lhs - ix * iy).max_abs());
            }
        }
        worst
    }

    /// Checks `(0, α)(b, 0) = (α·b, 0)` and `(b, 0)(0, α) = (α·b, 0)` on bases.
    pub fn ideal_residual(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for alpha in self.acting().basis() {
            let ia = self.iso(&self.base().zero(), &alpha).unwrap();
            let ra = self.action.rho(&alpha);
            for b in self.base().basis() {
                let ib = self.iota_a(&b).unwrap();
                let expected = self.iota_a(&(&ra * &b)).unwrap();
                worst = worst.max((&ia * &ib - &expected).max_abs());
                worst = worst.max((&ib * &ia - &expected).max_abs());
            }
        }
        worst
    }

    /// Norm of `(a, α)` in the model `A ⊕ 𝔄`.
    pub fn model_norm(&self, a: &AlgebraElement, alpha: &AlgebraElement) -> Result<f64> {
        Ok(self.iso(a, alpha)?.op_norm())
    }
}

/// `sup {‖ab + α·b‖ : ‖b‖ = 1}`, which is `‖a + ρ(α)‖` for unital `A`.
///
/// Only a seminorm: `(−1, 1)` under the trivial action evaluates to zero.
pub fn unitization_seminorm(
    u: &UnitizationResult,
    a: &AlgebraElement,
    alpha: &AlgebraElement,
) -> Result<f64> {
    u.base().check_same(a.algebra())?;
    u.acting().check_same(alpha.algebra())?;
    Ok((a + u.action().rho(alpha)).op_norm())
}

/// Reason `theta` fails to be a c.c.p. module map, if any.
fn ccp_module_defect(
    theta: &BlockLinearMap,
    act_a: &CentralAction,
    act_b: &CentralAction,
    tol: f64,
) -> Result<Option<Error>> {
    if act_a.source() != act_b.source() {
        return Err(Error::SourceMismatch);
    }
    act_a.target().check_same(theta.source())?;
    act_b.target().check_same(theta.target())?;
    let min = theta.choi_min_eigenvalue();
    if !theta.is_hermitian_preserving(tol) || min < -tol {
        return Ok(Some(Error::NotCCP(format!(
            "min Choi eigenvalue {min:.3e}"
        ))));
    }
    let slack = (theta.target().unit() - theta.unit_image()).min_eigenvalue();
    if slack < -tol {
        return Ok(Some(Error::NotCCP(format!(
            "1 - θ(1) has eigenvalue {slack:.3e}"
        ))));
    }
    let r = module_residual(theta, act_a, act_b)?;
    if r > tol {
        return Ok(Some(Error::NotModuleMap(r)));
    }
    Ok(None)
}

fn require_ccp_module(
    theta: &BlockLinearMap,
    act_a: &CentralAction,
    act_b: &CentralAction,
) -> Result<()> {
    match ccp_module_defect(theta, act_a, act_b, CHECK_TOL)? {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExtensionMode {
    /// `θ̃(a, α) = θ(a) + ρ_B(α)` into `B`.
    UnitalTarget,
    /// `θ̃(a, α) = (θ(a), α)` into `B̃ = B ⊕ 𝔄`.
    General,
}

/// Extension of a c.c.p. module map to the unitization of its source.
pub fn extend_to_unitization(
    theta: &BlockLinearMap,
    act_a: &CentralAction,
    act_b: &CentralAction,
    mode: ExtensionMode,
) -> Result<BlockLinearMap> {
    require_ccp_module(theta, act_a, act_b)?;
    if !act_b.is_unital() {
        return Err(Error::NonUnitalAction);
    }
    let u = unitize(act_a)?;
    let acting = act_a.source();
    let target = match mode {
        ExtensionMode::UnitalTarget => theta.target().clone(),
        ExtensionMode::General => theta.target().direct_sum(acting),
    };
    BlockLinearMap::from_fn(u.algebra_tilde(), &target, |y| {
        let (a, alpha) = u.inverse(y)?;
        let b = theta.apply(&a)? + act_b.rho(&alpha);
        Ok(match mode {
            ExtensionMode::UnitalTarget => b,
            ExtensionMode::General => join_direct_sum(&b, &alpha),
        })
    })
}

/// `θ̃(a ⊕ α) = θ(a) + α·(1 − θ(1))` on `A ⊕ 𝔄`, for `1_A` in the multiplicative domain.
pub fn extend_direct_sum(
    theta: &BlockLinearMap,
    act_a: &CentralAction,
    act_b: &CentralAction,
) -> Result<BlockLinearMap> {
    require_ccp_module(theta, act_a, act_b)?;
    let t1 = theta.unit_image();
    let defect = (&t1 - &(&t1 * &t1)).trace().re;
    if defect > MULT_DOMAIN_TOL {
        return Err(Error::UnitNotInMultiplicativeDomain(defect));
    }
    let complement = theta.target().unit() - &t1;
    let acting = act_a.source();
    let source = theta.source().direct_sum(acting);
    BlockLinearMap::from_fn(&source, theta.target(), |y| {
        let (a, alpha) = split_direct_sum(theta.source(), acting, y)?;
        Ok(theta.apply(&a)? + &act_b.rho(&alpha) * &complement)
    })
}

#[derive(Clone, Debug)]
pub struct FactorizationStage {
    pub k: usize,
    /// `A → M_k(E)`.
    pub phi: BlockLinearMap,
    /// `M_k(E) → B`.
    pub psi: BlockLinearMap,
}

/// Stages `ψ_n ∘ φ_n` approximating a map through amplifications of `E`.
///
/// An empty stage list stands for the factorization through the zero algebra.
#[derive(Clone, Debug)]
pub struct FactorizationWitness {
    pub e: MultiMatrixAlgebra,
    pub act_e: CentralAction,
    pub stages: Vec<FactorizationStage>,
    /// Elements on which gaps are measured; the source basis when empty.
    pub probes: Vec<AlgebraElement>,
}

#[derive(Clone, Debug, Serialize)]
pub struct StageReport {
    pub k: usize,
    pub phi_min_choi: f64,
    pub psi_min_choi: f64,
    pub gap: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct FactorizationReport {
    pub stages: Vec<StageReport>,
    pub final_gap: f64,
    pub monotone: bool,
}

impl FactorizationReport {
    pub fn gaps(&self) -> Vec<f64> {
        self.stages.iter().map(|s| s.gap).collect()
    }
}

fn probes_or_basis(w: &FactorizationWitness, source: &MultiMatrixAlgebra) -> Vec<AlgebraElement> {
    if w.probes.is_empty() {
        source.basis()
    } else {
        w.probes.clone()
    }
}

/// Checks every stage is a c.c.p. module map and measures `max ‖ψ(φ(a)) − θ(a)‖` over the probes.
pub fn verify_factorization(
    theta: &BlockLinearMap,
    act_a: &CentralAction,
    act_b: &CentralAction,
    w: &FactorizationWitness,
) -> Result<FactorizationReport> {
    if w.act_e.source() != act_a.source() {
        return Err(Error::SourceMismatch);
    }
    w.act_e.target().check_same(&w.e)?;
    let probes = probes_or_basis(w, theta.source());
    for p in &probes {
        theta.source().check_same(p.algebra())?;
    }
    let mut stages = Vec::with_capacity(w.stages.len());
    for (n, st) in w.stages.iter().enumerate() {
        let mk = w.e.amplify(st.k);
        let shapes_ok = st.phi.source() == theta.source()
            && st.phi.target() == &mk
            && st.psi.source() == &mk
            && st.psi.target() == theta.target();
        if !shapes_ok {
            return Err(Error::ShapeMismatch(format!(
                "stage {n} does not factor through M_{}({})",
                st.k, w.e
            )));
        }
        let act_k = w.act_e.amplify(st.k);
        for (map, a, b) in [(&st.phi, act_a, &act_k), (&st.psi, &act_k, act_b)] {
            if let Some(e) = ccp_module_defect(map, a, b, CHECK_TOL)? {
                return Err(Error::StageNotCCP {
                    stage: n,
                    reason: e.to_string(),
                });
            }
        }
        let gap = probes
            .iter()
            .map(|a| (st.psi.eval(&st.phi.eval(a)) - theta.eval(a)).op_norm())
            .fold(0.0, f64::max);
        stages.push(StageReport {
            k: st.k,
            phi_min_choi: st.phi.choi_min_eigenvalue(),
            psi_min_choi: st.psi.choi_min_eigenvalue(),
            gap,
        });
    }
    let final_gap = match stages.last() {
        Some(s) => s.gap,
        None => probes
            .iter()
            .map(|a| theta.eval(a).op_norm())
            .fold(0.0, f64::max),
    };
    let monotone = stages.windows(2).all(|p| p[1].gap <= p[0].gap + 1e-12);
    Ok(FactorizationReport {
        stages,
        final_gap,
        monotone,
    })
}

/// Witness for the general-mode extension `θ̃: Ã → B̃` together with the actions on both sides.
#[derive(Clone, Debug)]
pub struct LiftedWitness {
    pub theta_tilde: BlockLinearMap,
    pub source_action: CentralAction,
    pub target_action: CentralAction,
    pub witness: FactorizationWitness,
}

/// Lifts each stage through `M_k(E ⊕ 𝔄)` using `x ⊕ α ↦ x ⊕ (α ⊗ 1_k)` and the corner projection back.
pub fn lift_nuclearity_witness(
    theta: &BlockLinearMap,
    act_a: &CentralAction,
    act_b: &CentralAction,
    w: &FactorizationWitness,
) -> Result<LiftedWitness> {
    verify_factorization(theta, act_a, act_b, w)?;
    let theta_tilde = extend_to_unitization(theta, act_a, act_b, ExtensionMode::General)?;
    let ua = unitize(act_a)?;
    let ub = unitize(act_b)?;
    let ue = unitize(&w.act_e)?;
    let acting = act_a.source();
    let e_tilde = ue.algebra_tilde().clone();

    let mut stages = Vec::new();
    if w.stages.is_empty() {
        let phi = BlockLinearMap::from_fn(ua.algebra_tilde(), &e_tilde, |y| {
            let (_, alpha) = ua.inverse(y)?;
            Ok(join_direct_sum(&w.act_e.rho(&alpha), &alpha))
        })?;
        let psi = BlockLinearMap::from_fn(&e_tilde, ub.algebra_tilde(), |y| {
            let (_, z) = split_direct_sum(&w.e, acting, y)?;
            Ok(join_direct_sum(&act_b.rho(&z), &z))
        })?;
        stages.push(FactorizationStage { k: 1, phi, psi });
    }
    for st in &w.stages {
        let k = st.k;
        let mk = w.e.amplify(k);
        let ak = acting.amplify(k);
        let act_k = w.act_e.amplify(k);
        let phi_g = extend_to_unitization(&st.phi, act_a, &act_k, ExtensionMode::General)?;
        let psi_g = extend_to_unitization(&st.psi, &act_k, act_b, ExtensionMode::General)?;
        let mk_sum = mk.direct_sum(acting);
        let amplified = e_tilde.amplify(k);
        let inclusion = BlockLinearMap::from_fn(&mk_sum, &amplified, |y| {
            let (x, alpha) = split_direct_sum(&mk, acting, y)?;
            let diag: Vec<Vec<AlgebraElement>> = (0..k)
                .map(|i| {
                    (0..k)
                        .map(|j| if i == j { alpha.clone() } else { acting.zero() })
                        .collect()
                })
                .collect();
            Ok(join_direct_sum(&x, &embed_matrix(acting, &diag)?))
        })?;
        let corner = BlockLinearMap::from_fn(&amplified, &mk_sum, |y| {
            let (x, z) = split_direct_sum(&mk, &ak, y)?;
            let entries = extract_matrix(acting, k, &z)?;
            Ok(join_direct_sum(&x, &entries[0][0]))
        })?;
        stages.push(FactorizationStage {
            k,
            phi: compose(&inclusion, &phi_g)?,
            psi: compose(&psi_g, &corner)?,
        });
    }
    let mut probes: Vec<AlgebraElement> = probes_or_basis(w, theta.source())
        .iter()
        .map(|a| ua.iota_a(a))
        .collect::<Result<_>>()?;
    probes.push(ua.unit_tilde());
    Ok(LiftedWitness {
        theta_tilde,
        source_action: ua.action_tilde().clone(),
        target_action: ub.action_tilde().clone(),
        witness: FactorizationWitness {
            e: e_tilde,
            act_e: ue.action_tilde().clone(),
            stages,
            probes,
        },
    })
}

#[derive(Clone, Debug)]
pub struct Rescaled {
    /// `φ̃(1)`.
    pub u: AlgebraElement,
    pub phi: BlockLinearMap,
    /// `max ‖u^{½} φ(e) u^{½} − φ̃(e)‖` over the source basis.
    pub residual: f64,
    pub singular: bool,
    pub report: Option<SolveReport>,
}

/// u.c.p. module map `φ` with `φ̃(a) = u^{½} φ(a) u^{½}` where `u = φ̃(1)`.
pub fn ucp_rescale(
    phi_t: &BlockLinearMap,
    act_a: &CentralAction,
    act_t: &CentralAction,
    opts: SolverOptions,
) -> Result<Rescaled> {
    if act_a.source() != act_t.source() {
        return Err(Error::SourceMismatch);
    }
    act_a.target().check_same(phi_t.source())?;
    act_t.target().check_same(phi_t.target())?;
    let min = phi_t.choi_min_eigenvalue();
    if min < -CHECK_TOL {
        return Err(Error::NotCP(min));
    }
    let r = module_residual(phi_t, act_a, act_t)?;
    if r > CHECK_TOL {
        return Err(Error::NotModuleMap(r));
    }
    let (src, tgt) = (phi_t.source(), phi_t.target());
    let u = phi_t.unit_image();
    let scale = u.op_norm();
    let singular = !(scale > 0.0 && u.min_eigenvalue() > SINGULAR_REL * scale);
    // roundoff-sized eigenvalues are exact zeros, else the compression rows are ill-posed
    let root = u.support_sqrt(SINGULAR_REL);
    let closed_form =
        |w: &AlgebraElement| BlockLinearMap::from_fn(src, tgt, |x| Ok(w * &phi_t.apply(x)? * w));
    let (phi, report) = if !singular {
        (closed_form(&u.pinv_sqrt(0.0))?, None)
    } else {
        let mut problem = CpMapProblem::new(
            src,
            tgt,
            &IndexLabels::from_action(act_a),
            &IndexLabels::from_action(act_t),
        );
        problem.constrain_image(&src.unit(), None, &tgt.unit());
        for e in src.basis() {
            problem.constrain_image(&e, Some(&root), &phi_t.eval(&e));
        }
        let start = closed_form(&u.pinv_sqrt(SINGULAR_REL))?;
        let (phi, rep) = problem.solve(opts, Some(&start))?;
        if !rep.is_feasible() {
            return Err(Error::Stalled {
                iters: rep.iters,
                gap: rep.gap,
            });
        }
        (phi, Some(rep))
    };
    let residual = src
        .basis()
        .iter()
        .map(|e| (&root * &phi.eval(e) * &root - phi_t.eval(e)).max_abs())
        .fold(0.0, f64::max);
    Ok(Rescaled {
        u,
        phi,
        residual,
        singular,
        report,
    })
}

/// `θ(1)^{-½} θ θ(1)^{-½}` with the inverse taken on the support.
pub fn normalized_map(theta: &BlockLinearMap) -> Result<BlockLinearMap> {
    let w = theta.unit_image().pinv_sqrt(1e-10);
    BlockLinearMap::from_fn(theta.source(), theta.target(), |x| {
        Ok(&w * &theta.apply(x)? * &w)
    })
}

#[derive(Clone, Debug)]
pub struct UnitalizedWitness {
    pub witness: FactorizationWitness,
    /// The map the u.c.p. stages approximate.
    pub target: BlockLinearMap,
}

/// Replaces every c.c.p. stage `(φ̃, ψ̃)` by u.c.p. module maps `(φ, ψ)` with
/// `φ̃ = u^{½} φ u^{½}` and `ψ(x) = c^{-½} ψ̃(u^{½} x u^{½}) c^{-½}`, `c = ψ̃(u)`.
pub fn unitalize_factorization(
    theta: &BlockLinearMap,
    act_a: &CentralAction,
    act_b: &CentralAction,
    w: &FactorizationWitness,
    opts: SolverOptions,
) -> Result<UnitalizedWitness> {
    verify_factorization(theta, act_a, act_b, w)?;
    let mut stages = Vec::with_capacity(w.stages.len());
    for st in &w.stages {
        let mk = w.e.amplify(st.k);
        let act_k = w.act_e.amplify(st.k);
        let first = ucp_rescale(&st.phi, act_a, &act_k, opts)?;
        let root = first.u.sqrt();
        let chi =
            BlockLinearMap::from_fn(&mk, theta.target(), |x| st.psi.apply(&(&root * x * &root)))?;
        let second = ucp_rescale(&chi, &act_k, act_b, opts)?;
        stages.push(FactorizationStage {
            k: st.k,
            phi: first.phi,
            psi: second.phi,
        });
    }
    Ok(UnitalizedWitness {
        witness: FactorizationWitness {
            e: w.e.clone(),
            act_e: w.act_e.clone(),
            stages,
            probes: w.probes.clone(),
        },
        target: normalized_map(theta)?,
    })
}

fn full_matrix_size(a: &MultiMatrixAlgebra) -> Result<usize> {
    match a.blocks() {
        [n] => Ok(*n),
        _ => Err(Error::ShapeMismatch(format!(
            "expected a full matrix algebra, got {a}"
        ))),
    }
}

fn shape_check(expected: &MultiMatrixAlgebra, got: &MultiMatrixAlgebra) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::ShapeMismatch(format!(
            "expected {expected}, got {got}"
        )))
    }
}

/// `θ̃(Σ α_ij ⊗ e_ij) = Σ α_ij · θ(e_ij)` on `M_n(𝔄)` for c.p. `θ: M_n → A`.
pub fn cp1_forward(theta: &BlockLinearMap, act: &CentralAction) -> Result<BlockLinearMap> {
    let min = theta.choi_min_eigenvalue();
    if min < -CHECK_TOL {
        return Err(Error::NotCP(min));
    }
    cp1_lift(theta, act)
}

/// `θ̃(Σ α_ij ⊗ e_ij) = Σ α_ij·θ(e_ij)` for any linear `θ` on `M_n`.
pub fn cp1_lift(theta: &BlockLinearMap, act: &CentralAction) -> Result<BlockLinearMap> {
    let n = full_matrix_size(theta.source())?;
    act.target().check_same(theta.target())?;
    let acting = act.source();
    let images: Vec<Vec<AlgebraElement>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| theta.eval(&theta.source().matrix_unit(0, i, j)))
                .collect()
        })
        .collect();
    BlockLinearMap::from_fn(&acting.amplify(n), theta.target(), |x| {
        let entries = extract_matrix(acting, n, x)?;
        let mut out = theta.target().zero();
        for (row, imgs) in entries.iter().zip(&images) {
            for (alpha, img) in row.iter().zip(imgs) {
                out = out + &act.rho(alpha) * img;
            }
        }
        Ok(out)
    })
}

/// `θ(x) = σ(1_𝔄 ⊗ x)` for `σ` on `M_n(𝔄)`.
pub fn cp1_backward(
    sigma: &BlockLinearMap,
    acting: &MultiMatrixAlgebra,
    n: usize,
) -> Result<BlockLinearMap> {
    shape_check(&acting.amplify(n), sigma.source())?;
    let mn = MultiMatrixAlgebra::full(n)?;
    let one = acting.unit();
    BlockLinearMap::from_fn(&mn, sigma.target(), |x| {
        let m = x.block(0);
        let entries: Vec<Vec<AlgebraElement>> = (0..n)
            .map(|i| (0..n).map(|j| one.scale(m[(i, j)])).collect())
            .collect();
        sigma.apply(&embed_matrix(acting, &entries)?)
    })
}

/// `[θ(e_ij)] ∈ M_n(A)`, positive exactly when `θ` is c.p.
pub fn cp1_choi_element(theta: &BlockLinearMap) -> Result<AlgebraElement> {
    let n = full_matrix_size(theta.source())?;
    let entries: Vec<Vec<AlgebraElement>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| theta.eval(&theta.source().matrix_unit(0, i, j)))
                .collect()
        })
        .collect();
    embed_matrix(theta.target(), &entries)
}

/// The map `M_n → A` with `θ(e_ij) = p_ij`.
pub fn cp1_from_element(
    p: &AlgebraElement,
    a: &MultiMatrixAlgebra,
    n: usize,
) -> Result<BlockLinearMap> {
    let entries = extract_matrix(a, n, p)?;
    let mn = MultiMatrixAlgebra::full(n)?;
    BlockLinearMap::from_fn(&mn, a, |x| {
        let m = x.block(0);
        let mut out = a.zero();
        for (i, row) in entries.iter().enumerate() {
            for (j, e) in row.iter().enumerate() {
                if m[(i, j)] != ZERO {
                    out = out + e.scale(m[(i, j)]);
                }
            }
        }
        Ok(out)
    })
}

/// `φ̂([a_ij]) = Σ φ(a_ij)_{ij}` for `φ: A → M_n(𝔄)`.
pub fn cp2_forward(
    phi: &BlockLinearMap,
    acting: &MultiMatrixAlgebra,
    n: usize,
) -> Result<BlockLinearMap> {
    shape_check(&acting.amplify(n), phi.target())?;
    let a = phi.source();
    BlockLinearMap::from_fn(&a.amplify(n), acting, |x| {
        let entries = extract_matrix(a, n, x)?;
        let mut out = acting.zero();
        for (i, row) in entries.iter().enumerate() {
            for (j, e) in row.iter().enumerate() {
                if e.max_abs() > 0.0 {
                    out = out + &extract_matrix(acting, n, &phi.apply(e)?)?[i][j];
                }
            }
        }
        Ok(out)
    })
}

/// `φ(a)_{ij} = φ̂(e_ij ⊗ a)`.
pub fn cp2_backward(
    phi_hat: &BlockLinearMap,
    a: &MultiMatrixAlgebra,
    n: usize,
) -> Result<BlockLinearMap> {
    shape_check(&a.amplify(n), phi_hat.source())?;
    let acting = phi_hat.target();
    BlockLinearMap::from_fn(a, &acting.amplify(n), |x| {
        let entries = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| phi_hat.apply(&elementary(a, n, i, j, x)?))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        embed_matrix(acting, &entries)
    })
}

/// `Θ[[a, b], [c, d]] = [[θ1(a), θ2(b)], [θ3(c), θ4(d)]]`.
pub fn assemble_2x2(parts: [&BlockLinearMap; 4]) -> Result<BlockLinearMap> {
    let (src, tgt) = (parts[0].source(), parts[0].target());
    for p in &parts[1..] {
        shape_check(src, p.source())?;
        shape_check(tgt, p.target())?;
    }
    BlockLinearMap::from_fn(&src.amplify(2), &tgt.amplify(2), |x| {
        let e = extract_matrix(src, 2, x)?;
        let out = vec![
            vec![parts[0].apply(&e[0][0])?, parts[1].apply(&e[0][1])?],
            vec![parts[2].apply(&e[1][0])?, parts[3].apply(&e[1][1])?],
        ];
        embed_matrix(tgt, &out)
    })
}

fn halve(a: &MultiMatrixAlgebra) -> Result<MultiMatrixAlgebra> {
    if a.blocks().iter().any(|d| d % 2 != 0) {
        return Err(Error::ShapeMismatch(format!(
            "{a} is not a 2×2 amplification"
        )));
    }
    MultiMatrixAlgebra::new(&a.blocks().iter().map(|d| d / 2).collect::<Vec<_>>())
}

/// The four corner maps of a map between 2×2 amplifications.
pub fn split_2x2(big: &BlockLinearMap) -> Result<[BlockLinearMap; 4]> {
    let (a, b) = (halve(big.source())?, halve(big.target())?);
    let corner = |i: usize, j: usize| {
        BlockLinearMap::from_fn(&a, &b, |x| {
            let y = big.apply(&elementary(&a, 2, i, j, x)?)?;
            Ok(extract_matrix(&b, 2, &y)?[i][j].clone())
        })
    };
    Ok([corner(0, 0)?, corner(0, 1)?, corner(1, 0)?, corner(1, 1)?])
}

#[derive(Clone, Debug, Serialize)]
pub struct TwoByTwoReport {
    pub choi_min_eigenvalue: f64,
    /// (i) residual for `𝔄 ⊕ 𝔄` and `𝔅 ⊕ 𝔅` acting diagonally.
    pub doubled_bimodule_residual: f64,
    /// (ii)
    pub corner_min_choi: f64,
    pub corner_bimodule_residual: f64,
    /// (iii) `max ‖θ2(b) − θ3(b*)*‖`.
    pub flip_residual: f64,
    pub off_diagonal_bimodule_residual: f64,
    /// `‖θ2‖_cb ≤ ‖θ(1)‖ + 1e-3`.
    pub cb_off_diagonal_bounded: bool,
    pub cb_total: f64,
    /// (iv) over sampled positive inputs and `λ ∈ {1, i, −1, −i}`.
    pub roots_min_eigenvalue: f64,
    /// (v) over sampled inputs at levels `n ≤ 3`.
    pub schwarz_min_eigenvalue: f64,
    pub passed: [bool; 5],
}

impl TwoByTwoReport {
    pub fn all_passed(&self) -> bool {
        self.passed.iter().all(|&p| p)
    }
}

fn diag2(alg: &MultiMatrixAlgebra, slot: usize, x: &AlgebraElement) -> Result<AlgebraElement> {
    elementary(alg, 2, slot, slot, x)
}

fn doubled_residual(
    big: &BlockLinearMap,
    bim_a: &BimoduleStructure,
    bim_b: &BimoduleStructure,
) -> Result<f64> {
    let (a, b) = (bim_a.target(), bim_b.target());
    let basis = big.source().basis();
    let images: Vec<AlgebraElement> = basis.iter().map(|x| big.eval(x)).collect();
    let mut worst: f64 = 0.0;
    for slot in 0..2 {
        for alpha in bim_a.left.source().basis() {
            let la = diag2(a, slot, &bim_a.left.rho(&alpha))?;
            let lb = diag2(b, slot, &bim_b.left.rho(&alpha))?;
            for (x, y) in basis.iter().zip(&images) {
                worst = worst.max((big.eval(&(&la * x)) - &lb * y).max_abs());
            }
        }
        for beta in bim_a.right.source().basis() {
            let ra = diag2(a, slot, &bim_a.right.rho(&beta))?;
            let rb = diag2(b, slot, &bim_b.right.rho(&beta))?;
            for (x, y) in basis.iter().zip(&images) {
                worst = worst.max((big.eval(&(x * &ra)) - y * &rb).max_abs());
            }
        }
    }
    Ok(worst)
}

/// Checks the consequences of complete positivity of an assembled 2×2 map.
///
/// (v) is checked as `‖Θ‖ θ1(xx*) ≥ θ2(x)θ2(x)*` and `‖Θ‖ θ4(x*x) ≥ θ2(x)*θ2(x)`
/// at every level `n ≤ 3`. Both follow from the Schwarz inequality for `Θ_n`
/// applied to `x ⊗ e_12`.
pub fn verify_2x2(
    big: &BlockLinearMap,
    bimodules: Option<(&BimoduleStructure, &BimoduleStructure)>,
    tol: f64,
    trials: usize,
    seed: u64,
) -> Result<TwoByTwoReport> {
    let min = big.choi_min_eigenvalue();
    if !big.is_hermitian_preserving(tol) || min < -tol {
        return Err(Error::NotCP(min));
    }
    let (a, b) = (halve(big.source())?, halve(big.target())?);
    let trivial;
    let (bim_a, bim_b) = match bimodules {
        Some(p) => p,
        None => {
            trivial = (
                BimoduleStructure::new(CentralAction::trivial(&a), CentralAction::trivial(&a))?,
                BimoduleStructure::new(CentralAction::trivial(&b), CentralAction::trivial(&b))?,
            );
            (&trivial.0, &trivial.1)
        }
    };
    shape_check(&a, bim_a.target())?;
    shape_check(&b, bim_b.target())?;
    let [t1, t2, t3, t4] = split_2x2(big)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let doubled_bimodule_residual = doubled_residual(big, bim_a, bim_b)?;

    let corner_min_choi = t1.choi_min_eigenvalue().min(t4.choi_min_eigenvalue());
    let corner_bimodule_residual =
        bimodule_residual(&t1, bim_a, bim_b)?.max(bimodule_residual(&t4, bim_a, bim_b)?);

    let flip_residual = a
        .basis()
        .iter()
        .map(|x| (t2.eval(x) - t3.eval(&x.adjoint()).adjoint()).max_abs())
        .fold(0.0, f64::max);
    let off_diagonal_bimodule_residual = bimodule_residual(&t2, bim_a, bim_b)?;
    let cb_total = big.unit_image().op_norm();
    let cb_off_diagonal_bounded =
        cb_norm_at_most(&t2, cb_total + 1e-3, SolverOptions::from_env())?.is_some();

    let roots = [ONE, C64::new(0.0, 1.0), -ONE, C64::new(0.0, -1.0)];
    let mut roots_min = f64::INFINITY;
    for _ in 0..trials {
        let x = a.random_positive(&mut rng);
        let scale = x.op_norm().max(1.0);
        let half = (t1.eval(&x) + t4.eval(&x)) * 0.5;
        let off = t2.eval(&x);
        for &lam in &roots {
            let z = off.scale(lam);
            let re = (&z + &z.adjoint()) * 0.5;
            roots_min = roots_min.min((&half + &re).min_eigenvalue() / scale);
            roots_min = roots_min.min((&half - &re).min_eigenvalue() / scale);
        }
    }

    let mut schwarz_min = f64::INFINITY;
    for n in 1..=3 {
        let (t1n, t2n, t4n) = (t1.amplify(n), t2.amplify(n), t4.amplify(n));
        let an = a.amplify(n);
        for _ in 0..trials {
            let x = an.random_element(&mut rng);
            let scale = x.op_norm().powi(2).max(1e-300);
            let y = t2n.eval(&x);
            let left = t1n.eval(&(&x * &x.adjoint())) * cb_total - &y * &y.adjoint();
            let right = t4n.eval(&(&x.adjoint() * &x)) * cb_total - &y.adjoint() * &y;
            schwarz_min = schwarz_min
                .min(left.min_eigenvalue() / scale)
                .min(right.min_eigenvalue() / scale);
        }
    }

    let passed = [
        doubled_bimodule_residual <= tol,
        corner_min_choi >= -tol && corner_bimodule_residual <= tol,
        flip_residual <= tol && off_diagonal_bimodule_residual <= tol && cb_off_diagonal_bounded,
        roots_min >= -tol,
        schwarz_min >= -tol,
    ];
    Ok(TwoByTwoReport {
        choi_min_eigenvalue: min,
        doubled_bimodule_residual,
        corner_min_choi,
        corner_bimodule_residual,
        flip_residual,
        off_diagonal_bimodule_residual,
        cb_off_diagonal_bounded,
        cb_total,
        roots_min_eigenvalue: roots_min,
        schwarz_min_eigenvalue: schwarz_min,
        passed,
    })
}

fn masked_kraus<R: Rng + ?Sized>(
    a: &MultiMatrixAlgebra,
    b: &MultiMatrixAlgebra,
    la: &IndexLabels,
    lb: &IndexLabels,
    rng: &mut R,
) -> CMat {
    let mut v = linalg::random_gaussian(rng, a.ambient_dim(), b.ambient_dim());
    for i in 0..a.ambient_dim() {
        for p in 0..b.ambient_dim() {
            if la.left[i] != lb.left[p] || la.right[i] != lb.right[p] {
                v[(i, p)] = ZERO;
            }
        }
    }
    v
}

/// `x ↦ E_B(Σ v_k* x w_k)`.
fn sandwich(
    a: &MultiMatrixAlgebra,
    b: &MultiMatrixAlgebra,
    v: &[CMat],
    w: &[CMat],
) -> Result<BlockLinearMap> {
    BlockLinearMap::from_fn(a, b, |x| {
        let xa = x.to_ambient();
        let mut m = CMat::zeros(b.ambient_dim(), b.ambient_dim());
        for (vk, wk) in v.iter().zip(w) {
            m += vk.adjoint() * &xa * wk;
        }
        Ok(AlgebraElement::from_ambient(b, &m))
    })
}

/// c.p. bimodule map `X ↦ E(Σ W_k* X W_k)` with `W_k = diag(V_k, U_k)`, returned as its four corners.
pub fn random_cp_2x2<R: Rng + ?Sized>(
    bim_a: &BimoduleStructure,
    bim_b: &BimoduleStructure,
    rank: usize,
    rng: &mut R,
) -> Result<[BlockLinearMap; 4]> {
    let (a, b) = (bim_a.target(), bim_b.target());
    let (la, lb) = (bim_a.index_labels(), bim_b.index_labels());
    let v: Vec<CMat> = (0..rank)
        .map(|_| masked_kraus(a, b, &la, &lb, rng))
        .collect();
    let u: Vec<CMat> = (0..rank)
        .map(|_| masked_kraus(a, b, &la, &lb, rng))
        .collect();
    if v.iter().chain(&u).all(|k| linalg::max_abs(k) == 0.0) {
        return Err(Error::EmptyIntertwinerSpace);
    }
    Ok([
        sandwich(a, b, &v, &v)?,
        sandwich(a, b, &v, &u)?,
        sandwich(a, b, &u, &v)?,
        sandwich(a, b, &u, &u)?,
    ])
}

/// Corners `(φ, μφ, μ̄φ, φ)` with `|μ| ∈ (1.2, 3)`; the assembled map is not c.p.
pub fn random_non_cp_2x2<R: Rng + ?Sized>(
    bim_a: &BimoduleStructure,
    bim_b: &BimoduleStructure,
    rank: usize,
    rng: &mut R,
) -> Result<[BlockLinearMap; 4]> {
    let (a, b) = (bim_a.target(), bim_b.target());
    let (la, lb) = (bim_a.index_labels(), bim_b.index_labels());
    let v: Vec<CMat> = (0..rank.max(1))
        .map(|_| masked_kraus(a, b, &la, &lb, rng))
        .collect();
    if v.iter().all(|k| linalg::max_abs(k) == 0.0) {
        return Err(Error::EmptyIntertwinerSpace);
    }
    let phi = BlockLinearMap::from_kraus(a, b, &v)?;
    let mu = C64::from_polar(
        rng.random_range(1.2..3.0),
        rng.random_range(0.0..std::f64::consts::TAU),
    );
    Ok([phi.clone(), phi.scale(mu), phi.scale(mu.conj()), phi])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;

    fn m2() -> MultiMatrixAlgebra {
        MultiMatrixAlgebra::full(2).unwrap()
    }

    fn trivial_pair(a: &MultiMatrixAlgebra) -> (CentralAction, CentralAction) {
        (CentralAction::trivial(a), CentralAction::trivial(a))
    }

    #[test]
    fn unitization_of_m2_by_scalars() {
        let a = m2();
        let u = unitize(&CentralAction::trivial(&a)).unwrap();
        assert_eq!(u.algebra_tilde().blocks(), &[2, 1]);
        let one = MultiMatrixAlgebra::abelian(1).unwrap();
        let x = a.matrix_unit(0, 0, 1);
        let lam = one.unit().scale(c(2.0));
        let y = u.iso(&x, &lam).unwrap();
        assert!((y.block(0) - (x.block(0) + CMat::identity(2, 2) * c(2.0)))
            .iter()
            .all(|z| z.norm() < 1e-15));
        assert!(u.multiplicativity_residual() <= 1e-12);
        assert!(u.ideal_residual() <= 1e-12);
        let (back, beta) = u.inverse(&y).unwrap();
        assert!(back.distance(&x) < 1e-15 && beta.distance(&lam) < 1e-15);
        // The seminorm vanishes on (−1, 1) while the model norm does not.
        assert!(unitization_seminorm(&u, &(-a.unit()), &one.unit()).unwrap() < 1e-15);
        assert!((u.model_norm(&(-a.unit()), &one.unit()).unwrap() - 1.0).abs() < 1e-15);
        assert!((unitization_seminorm(&u, &a.zero(), &one.unit()).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn unitization_requires_unital_action() {
        let a = m2();
        let one = MultiMatrixAlgebra::abelian(1).unwrap();
        let act = CentralAction::from_characters(&one, &a, vec![None]).unwrap();
        assert!(matches!(unitize(&act), Err(Error::NonUnitalAction)));
    }

    #[test]
    fn extension_of_half_identity() {
        let a = m2();
        let (aa, ab) = trivial_pair(&a);
        let theta = BlockLinearMap::identity(&a).scale(c(0.5));
        let ext = extend_to_unitization(&theta, &aa, &ab, ExtensionMode::UnitalTarget).unwrap();
        assert!(ext.is_unital(1e-12));
        assert!(ext.choi_min_eigenvalue() >= -1e-10);
        let u = unitize(&aa).unwrap();
        let one = MultiMatrixAlgebra::abelian(1).unwrap();
        let x = a.matrix_unit(0, 1, 0);
        let y = ext.eval(&u.iso(&x, &one.unit().scale(c(3.0))).unwrap());
        let expected = x.scale(c(0.5)) + a.unit().scale(c(3.0));
        assert!(y.distance(&expected) < 1e-12);
        let general = extend_to_unitization(&theta, &aa, &ab, ExtensionMode::General).unwrap();
        assert!(general.is_unital(1e-12) && general.is_cp(1e-10));
    }

    #[test]
    fn extension_of_zero_is_scalar() {
        let a = m2();
        let (aa, ab) = trivial_pair(&a);
        let ext = extend_to_unitization(
            &BlockLinearMap::zero(&a, &a),
            &aa,
            &ab,
            ExtensionMode::UnitalTarget,
        )
        .unwrap();
        assert!(ext.is_unital(1e-12) && ext.is_cp(1e-12));
        let u = unitize(&aa).unwrap();
        assert!(
            ext.eval(&u.iota_a(&a.matrix_unit(0, 0, 0)).unwrap())
                .max_abs()
                < 1e-12
        );
    }

    #[test]
    fn direct_sum_extension_of_corner_compression() {
        let a = m2();
        let (aa, ab) = trivial_pair(&a);
        let q = a.matrix_unit(0, 0, 0);
        let theta = BlockLinearMap::from_fn(&a, &a, |x| Ok(&q * x * &q)).unwrap();
        let ext = extend_direct_sum(&theta, &aa, &ab).unwrap();
        assert!(ext.choi_min_eigenvalue() >= -1e-10 && ext.is_unital(1e-12));
        let half = BlockLinearMap::identity(&a).scale(c(0.5));
        match extend_direct_sum(&half, &aa, &ab) {
            Err(Error::UnitNotInMultiplicativeDomain(d)) => assert!((d - 0.5).abs() < 1e-12),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn factorization_through_diagonal() {
        let a = m2();
        let (aa, ab) = trivial_pair(&a);
        let e = MultiMatrixAlgebra::abelian(2).unwrap();
        let act_e = CentralAction::trivial(&e);
        let phi = BlockLinearMap::from_fn(&a, &e, |x| {
            AlgebraElement::from_blocks(
                &e,
                vec![
                    x.block(0).view((0, 0), (1, 1)).into_owned(),
                    x.block(0).view((1, 1), (1, 1)).into_owned(),
                ],
            )
        })
        .unwrap();
        let psi = BlockLinearMap::from_fn(&e, &a, |x| {
            Ok(a.matrix_unit(0, 0, 0).scale(x.block(0)[(0, 0)])
                + a.matrix_unit(0, 1, 1).scale(x.block(1)[(0, 0)]))
        })
        .unwrap();
        let theta = compose(&psi, &phi).unwrap();
        let w = FactorizationWitness {
            e,
            act_e,
            stages: vec![FactorizationStage { k: 1, phi, psi }],
            probes: vec![],
        };
        let rep = verify_factorization(&theta, &aa, &ab, &w).unwrap();
        assert!(rep.final_gap < 1e-14);
        let lifted = lift_nuclearity_witness(&theta, &aa, &ab, &w).unwrap();
        let lrep = verify_factorization(
            &lifted.theta_tilde,
            &lifted.source_action,
            &lifted.target_action,
            &lifted.witness,
        )
        .unwrap();
        assert!(lrep.final_gap <= 1e-10);
        for st in &lifted.witness.stages {
            assert!(st.phi.is_unital(1e-12) && st.psi.is_unital(1e-12));
        }
    }

    #[test]
    fn lift_of_empty_witness_for_zero_map() {
        let a = m2();
        let (aa, ab) = trivial_pair(&a);
        let e = MultiMatrixAlgebra::full(1).unwrap();
        let w = FactorizationWitness {
            e: e.clone(),
            act_e: CentralAction::trivial(&e),
            stages: vec![],
            probes: vec![],
        };
        let theta = BlockLinearMap::zero(&a, &a);
        let lifted = lift_nuclearity_witness(&theta, &aa, &ab, &w).unwrap();
        let rep = verify_factorization(
            &lifted.theta_tilde,
            &lifted.source_action,
            &lifted.target_action,
            &lifted.witness,
        )
        .unwrap();
        assert!(rep.final_gap < 1e-14);
    }

    #[test]
    fn rescale_closed_form_and_singular() {
        let a = m2();
        let (aa, ab) = trivial_pair(&a);
        let half = BlockLinearMap::identity(&a).scale(c(0.5));
        let r = ucp_rescale(&half, &aa, &ab, SolverOptions::default()).unwrap();
        assert!(!r.singular && r.phi.distance(&BlockLinearMap::identity(&a)) < 1e-12);

        let v = a.matrix_unit(0, 0, 0);
        let ad = BlockLinearMap::from_fn(&a, &a, |x| Ok(&v * x * &v)).unwrap();
        let r = ucp_rescale(&ad, &aa, &ab, SolverOptions::default()).unwrap();
        assert!(r.singular && r.residual <= 1e-7);
        assert!(r.phi.is_unital(1e-6) && r.phi.is_cp(1e-9));
    }

    #[test]
    fn unitalize_half_identity_witness() {
        let a = m2();
        let (aa, ab) = trivial_pair(&a);
        let half = BlockLinearMap::identity(&a).scale(c(0.5));
        let theta = compose(&half, &half).unwrap();
        let w = FactorizationWitness {
            e: a.clone(),
            act_e: CentralAction::trivial(&a),
            stages: vec![FactorizationStage {
                k: 1,
                phi: half.clone(),
                psi: half,
            }],
            probes: vec![],
        };
        let out = unitalize_factorization(&theta, &aa, &ab, &w, SolverOptions::default()).unwrap();
        let st = &out.witness.stages[0];
        assert!(st.phi.distance(&BlockLinearMap::identity(&a)) < 1e-12);
        assert!(st.psi.distance(&BlockLinearMap::identity(&a)) < 1e-12);
        assert!(out.target.distance(&BlockLinearMap::identity(&a)) < 1e-12);
    }

    #[test]
    fn cp1_identity_and_round_trip() {
        let m = m2();
        let one = MultiMatrixAlgebra::abelian(1).unwrap();
        let id = BlockLinearMap::identity(&m);
        let fwd = cp1_forward(&id, &CentralAction::trivial(&m)).unwrap();
        assert!(fwd.distance(&id) < 1e-15);
        let back = cp1_backward(&fwd, &one, 2).unwrap();
        assert!(back.distance(&id) < 1e-15);
        let p = cp1_choi_element(&id).unwrap();
        assert!(p.min_eigenvalue() >= -1e-15);
        assert!(cp1_from_element(&p, &m, 2).unwrap().distance(&id) < 1e-15);
    }

    #[test]
    fn cp2_identity_is_entangled_pairing() {
        let m = m2();
        let one = MultiMatrixAlgebra::abelian(1).unwrap();
        let hat = cp2_forward(&BlockLinearMap::identity(&m), &one, 2).unwrap();
        assert!(hat.is_cp(1e-12));
        // pairing with Σ e_i ⊗ e_i: e_ij ⊗ e_ij ↦ 1
        let x = elementary(&m, 2, 0, 1, &m.matrix_unit(0, 0, 1)).unwrap();
        assert!((hat.eval(&x).block(0)[(0, 0)] - ONE).norm() < 1e-15);
        let back = cp2_backward(&hat, &m, 2).unwrap();
        assert!(back.distance(&BlockLinearMap::identity(&m)) < 1e-15);
    }

    #[test]
    fn two_by_two_examples() {
        let a = m2();
        let id = BlockLinearMap::identity(&a);
        let zero = BlockLinearMap::zero(&a, &a);
        let half = id.scale(c(0.5));
        assert!(assemble_2x2([&id, &zero, &zero, &id]).unwrap().is_cp(1e-12));
        assert!(assemble_2x2([&id, &half, &half, &id]).unwrap().is_cp(1e-12));
        // all four equal to id assemble to the identity of M₂(M₂), which is c.p.
        let all = assemble_2x2([&id, &id, &id, &id]).unwrap();
        assert!(all.distance(&BlockLinearMap::identity(&a.amplify(2))) < 1e-15);
        let twice = id.scale(c(2.0));
        assert!(
            assemble_2x2([&id, &twice, &twice, &id])
                .unwrap()
                .choi_min_eigenvalue()
                < -0.5
        );

        let big = assemble_2x2([&id, &half, &half, &id]).unwrap();
        let rep = verify_2x2(&big, None, 1e-8, 20, 7).unwrap();
        assert!(rep.all_passed(), "{rep:?}");
        let split = split_2x2(&big).unwrap();
        assert!(split[1].distance(&half) < 1e-15);

        let tr = BlockLinearMap::transpose(&a).scale(c(0.5));
        let bad = assemble_2x2([&id, &tr, &tr, &id]).unwrap();
        assert!(matches!(
            verify_2x2(&bad, None, 1e-8, 5, 1),
            Err(Error::NotCP(_))
        ));

        let diag = assemble_2x2([&id, &zero, &zero, &id]).unwrap();
        assert!(verify_2x2(&diag, None, 1e-8, 10, 3).unwrap().all_passed());
    }

    #[test]
    fn random_assemblies() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = MultiMatrixAlgebra::new(&[2, 1]).unwrap();
        let ab = MultiMatrixAlgebra::abelian(2).unwrap();
        let left = CentralAction::from_characters(&ab, &a, vec![Some(0), Some(1)]).unwrap();
        let right = CentralAction::trivial(&a);
        let bim = BimoduleStructure::new(left, right).unwrap();
        let parts = random_cp_2x2(&bim, &bim, 2, &mut rng).unwrap();
        let big = assemble_2x2([&parts[0], &parts[1], &parts[2], &parts[3]]).unwrap();
        assert!(big.is_cp(1e-10));
        let rep = verify_2x2(&big, Some((&bim, &bim)), 1e-8, 10, 5).unwrap();
        assert!(rep.all_passed(), "{rep:?}");
        let parts = random_non_cp_2x2(&bim, &bim, 2, &mut rng).unwrap();
        let big = assemble_2x2([&parts[0], &parts[1], &parts[2], &parts[3]]).unwrap();
        assert!(big.choi_min_eigenvalue() < -1e-6);
    }
}
