//! Extensions of completely positive and completely bounded module maps from
//! operator systems and subalgebras, posed as Choi feasibility problems.
//!
//! Every multi-matrix algebra is injective, so the targets here need no
//! further hypothesis. A map on an operator system counts as completely
//! positive exactly when the feasibility problem for an extension succeeds.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::actions::{bimodule_residual, BimoduleStructure, CentralAction, IndexLabels};
use crate::algebra::{elementary, extract_matrix, AlgebraElement, MultiMatrixAlgebra};
use crate::cpcalc::{
    cb_norm, cb_norm_at_most, compose, module_residual, random_cp_labeled_map,
    random_cp_module_map, sampled_norm, BlockLinearMap,
};
use crate::cpsolve::CpMapProblem;
use crate::error::{Error, Result};
use crate::feasibility::{SolveReport, SolverOptions};
use crate::linalg::{self, c, CMat, CVec, C64, ZERO};

/// Closure tolerance for operator systems (relative to the element norm).
pub const SYSTEM_TOL: f64 = 1e-12;
/// Adjoint compatibility of partial maps.
pub const ADJOINT_TOL: f64 = 1e-10;
/// Tolerance of the cb-norm bisection inside the Wittstock extension.
pub const WITTSTOCK_CB_TOL: f64 = 1e-4;
/// Relative slack on the normalized cb-norm that keeps the doubled problem strictly feasible.
pub const WITTSTOCK_SLACK: f64 = 2e-4;
/// Allowed cb-norm excess of any returned extension; the slack is capped at half of it.
pub const WITTSTOCK_CB_BUDGET: f64 = 5e-4;
/// Iterations of the first, short solve; its point is kept if the corner already meets the budget.
pub const WITTSTOCK_SHORT_ITERS: usize = 2_000;

/// Self-adjoint unital subspace of `A` that is closed under a central action.
#[derive(Clone, Debug)]
pub struct OperatorSystem {
    ambient: MultiMatrixAlgebra,
    basis: Vec<AlgebraElement>,
    action: CentralAction,
    /// Basis coordinates as columns.
    coords: CMat,
    span: CMat,
    expand: CMat,
}

impl OperatorSystem {
    pub fn new(
        ambient: &MultiMatrixAlgebra,
        basis: Vec<AlgebraElement>,
        action: &CentralAction,
    ) -> Result<Self> {
        ambient.check_same(action.target())?;
        if basis.is_empty() {
            return Err(Error::NotOperatorSystem("empty basis".into()));
        }
        for e in &basis {
            ambient.check_same(e.algebra())?;
        }
        let coords = CMat::from_fn(ambient.dim(), basis.len(), |i, j| basis[j].coords()[i]);
        let span = linalg::orthonormal_span(&coords, SYSTEM_TOL);
        let expand = linalg::pinv(&coords, 1e-12);
        let s = Self {
            ambient: ambient.clone(),
            basis,
            action: action.clone(),
            coords,
            span,
            expand,
        };
        let r = s.membership_residual(&ambient.unit());
        if r > SYSTEM_TOL {
            return Err(Error::NotOperatorSystem(format!(
                "unit is not in the span (residual {r:.3e})"
            )));
        }
        for e in &s.basis {
            let r = s.membership_residual(&e.adjoint());
            if r > SYSTEM_TOL * e.max_abs().max(1.0) {
                return Err(Error::NotOperatorSystem(format!(
                    "not closed under adjoints (residual {r:.3e})"
                )));
            }
            for f in action.source().basis() {
                let r = s.membership_residual(&action.act(&f, e)?);
                if r > SYSTEM_TOL * e.max_abs().max(1.0) {
                    return Err(Error::NotOperatorSystem(format!(
                        "not closed under the action (residual {r:.3e})"
                    )));
                }
            }
        }
        Ok(s)
    }

    /// `span{1}` inside `A`.
    pub fn scalars(action: &CentralAction) -> Result<Self> {
        let a = action.target();
        Self::new(a, vec![a.unit()], action)
    }

    pub fn ambient(&self) -> &MultiMatrixAlgebra {
        &self.ambient
    }

    pub fn basis(&self) -> &[AlgebraElement] {
        &self.basis
    }

    pub fn action(&self) -> &CentralAction {
        &self.action
    }

    pub fn dim(&self) -> usize {
        self.span.ncols()
    }

    /// Distance of `y` from the span, in max-abs coordinates.
    pub fn membership_residual(&self, y: &AlgebraElement) -> f64 {
        let v = y.coords();
        let r = &v - &self.span * (self.span.adjoint() * &v);
        r.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Least-squares coefficients of `y` in the basis.
    pub fn expand(&self, y: &AlgebraElement) -> CVec {
        &self.expand * y.coords()
    }

    /// Null relations among the basis elements.
    fn relations(&self) -> CMat {
        linalg::null_space(&self.coords, 1e-12)
    }

    /// Random element `Σ z_j q_j` over an orthonormal basis of the span.
    pub fn random_element<R: Rng + ?Sized>(&self, rng: &mut R) -> AlgebraElement {
        let z = linalg::random_gaussian(rng, self.dim(), 1);
        AlgebraElement::from_coords(&self.ambient, &(&self.span * z.column(0)))
    }

    /// Random positive element `h + ‖h‖·1` with `h` Hermitian in the span.
    pub fn random_positive<R: Rng + ?Sized>(&self, rng: &mut R) -> AlgebraElement {
        let h = self.random_element(rng).real_part();
        let t: f64 = rng.random_range(0.0..1.0);
        &h + &(self.ambient.unit() * (h.op_norm() * (1.0 + t)))
    }
}

/// Random system `span{1, ρ(f), ρ(f)x_k, (1 − ρ(1))x_k}` for Hermitian `x_k`, pruned to a basis.
pub fn random_operator_system<R: Rng + ?Sized>(
    action: &CentralAction,
    extra: usize,
    rng: &mut R,
) -> Result<OperatorSystem> {
    let a = action.target();
    let rho_one = action.rho(&action.source().unit());
    let complement = &a.unit() - &rho_one;
    let mut candidates = vec![a.unit()];
    candidates.extend(action.source().basis().iter().map(|f| action.rho(f)));
    for _ in 0..extra {
        let x = a.random_hermitian(rng);
        for f in action.source().basis() {
            candidates.push(action.act(&f, &x)?);
        }
        candidates.push(&complement * &x);
    }
    let mut basis: Vec<AlgebraElement> = Vec::new();
    let mut q = CMat::zeros(a.dim(), 0);
    for e in candidates {
        let v = e.coords();
        let r = &v - &q * (q.adjoint() * &v);
        let n = r.norm();
        let r = r / c(n.max(f64::MIN_POSITIVE));
        if n > 1e-8 * v.norm().max(1.0) {
            let k = q.ncols();
            q = q.insert_column(k, ZERO);
            q.set_column(k, &r);
            basis.push(e);
        }
    }
    OperatorSystem::new(a, basis, action)
}

/// Linear map prescribed on the basis of an operator system.
#[derive(Clone, Debug)]
pub struct PartialMap {
    system: OperatorSystem,
    values: Vec<AlgebraElement>,
    target_action: CentralAction,
}

impl PartialMap {
    pub fn new(
        system: OperatorSystem,
        values: Vec<AlgebraElement>,
        target_action: &CentralAction,
    ) -> Result<Self> {
        if values.len() != system.basis.len() {
            return Err(Error::SizeMismatch(format!(
                "{} values for {} basis elements",
                values.len(),
                system.basis.len()
            )));
        }
        if system.action.source() != target_action.source() {
            return Err(Error::SourceMismatch);
        }
        for v in &values {
            target_action.target().check_same(v.algebra())?;
        }
        let p = Self {
            system,
            values,
            target_action: target_action.clone(),
        };
        let scale = p.values.iter().map(|v| v.max_abs()).fold(1.0, f64::max);
        let rel = p.relation_residual();
        if rel > ADJOINT_TOL * scale {
            return Err(Error::InconsistentConstraints(rel));
        }
        for (e, v) in p.system.basis.iter().zip(&p.values) {
            let r = (p.value(&e.adjoint()) - v.adjoint()).max_abs();
            if r > ADJOINT_TOL * scale {
                return Err(Error::InvalidDescriptor(format!(
                    "partial map is not self-adjoint (residual {r:.3e})"
                )));
            }
        }
        Ok(p)
    }

    /// Restriction of `theta` to the system.
    pub fn restrict(
        system: OperatorSystem,
        theta: &BlockLinearMap,
        target_action: &CentralAction,
    ) -> Result<Self> {
        system.ambient.check_same(theta.source())?;
        let values = system.basis.iter().map(|e| theta.eval(e)).collect();
        Self::new(system, values, target_action)
    }

    pub fn system(&self) -> &OperatorSystem {
        &self.system
    }

    pub fn values(&self) -> &[AlgebraElement] {
        &self.values
    }

    pub fn target(&self) -> &MultiMatrixAlgebra {
        self.target_action.target()
    }

    pub fn target_action(&self) -> &CentralAction {
        &self.target_action
    }

    /// Value on an element of the span, through the basis expansion.
    pub fn value(&self, y: &AlgebraElement) -> AlgebraElement {
        let z = self.system.expand(y);
        self.values
            .iter()
            .zip(z.iter())
            .fold(self.target().zero(), |acc, (v, &w)| acc + v * w)
    }

    /// `max ‖Σ n_j v_j‖` over null relations `n` of the basis.
    pub fn relation_residual(&self) -> f64 {
        let rel = self.system.relations();
        (0..rel.ncols())
            .map(|k| {
                self.values
                    .iter()
                    .enumerate()
                    .fold(self.target().zero(), |acc, (j, v)| acc + v * rel[(j, k)])
                    .max_abs()
            })
            .fold(0.0, f64::max)
    }

    pub fn scaled(&self, t: f64) -> Self {
        Self {
            values: self.values.iter().map(|v| v * t).collect(),
            ..self.clone()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExtensionKind {
    /// Contractive: `θ(1) ≤ 1`.
    Ccp,
    /// Unital: `θ(1) = 1`.
    Ucp,
}

#[derive(Clone, Debug)]
pub struct Extension {
    pub map: BlockLinearMap,
    pub report: SolveReport,
    pub agreement_residual: f64,
    pub module_residual: f64,
    pub choi_min_eigenvalue: f64,
}

fn require_feasible(rep: &SolveReport) -> Result<()> {
    if rep.is_feasible() {
        Ok(())
    } else {
        Err(Error::Stalled {
            iters: rep.iters,
            gap: rep.gap,
        })
    }
}

/// Solves for a CP map with the given label pattern and prescribed values.
///
/// The returned map is the affine iterate, so it meets the data even when the solve stalls.
fn solve_extension(
    source: &MultiMatrixAlgebra,
    target: &MultiMatrixAlgebra,
    src_labels: &IndexLabels,
    tgt_labels: &IndexLabels,
    data: &[(AlgebraElement, AlgebraElement)],
    kind: ExtensionKind,
    opts: SolverOptions,
) -> Result<(BlockLinearMap, SolveReport, f64)> {
    let mut p = CpMapProblem::new(source, target, src_labels, tgt_labels);
    for (x, y) in data {
        p.constrain_image(x, None, y);
    }
    match kind {
        ExtensionKind::Ucp => p.constrain_image(&source.unit(), None, &target.unit()),
        ExtensionKind::Ccp => p.constrain_contractive(),
    }
    let (map, rep) = p.solve(opts, None)?;
    let agreement = data
        .iter()
        .map(|(x, y)| (map.eval(x) - y).max_abs())
        .fold(0.0, f64::max);
    Ok((map, rep, agreement))
}

/// c.c.p. or u.c.p. module map on the ambient algebra extending `psi`.
pub fn arveson_extend(
    psi: &PartialMap,
    kind: ExtensionKind,
    opts: SolverOptions,
) -> Result<Extension> {
    let sys = &psi.system;
    let data: Vec<_> = sys
        .basis
        .iter()
        .cloned()
        .zip(psi.values.iter().cloned())
        .collect();
    let (map, report, agreement_residual) = solve_extension(
        &sys.ambient,
        psi.target(),
        &IndexLabels::from_action(&sys.action),
        &IndexLabels::from_action(&psi.target_action),
        &data,
        kind,
        opts,
    )?;
    require_feasible(&report)?;
    let module_residual = module_residual(&map, &sys.action, &psi.target_action)?;
    let choi_min_eigenvalue = map.choi_min_eigenvalue();
    Ok(Extension {
        map,
        report,
        agreement_residual,
        module_residual,
        choi_min_eigenvalue,
    })
}

/// Unital injective *-homomorphism of a subalgebra into an ambient algebra.
#[derive(Clone, Debug)]
pub struct Embedding {
    map: BlockLinearMap,
}

impl Embedding {
    pub fn new(map: BlockLinearMap) -> Result<Self> {
        let sub = map.source();
        let basis = sub.basis();
        let bad = |what: &str, r: f64| Error::NotSubalgebra(format!("{what} (residual {r:.3e})"));
        let r = map.unital_defect();
        if r > 1e-10 {
            return Err(bad("embedding is not unital", r));
        }
        for x in &basis {
            let r = (map.eval(&x.adjoint()) - map.eval(x).adjoint()).max_abs();
            if r > 1e-10 {
                return Err(bad("embedding does not preserve adjoints", r));
            }
            for y in &basis {
                let r = (map.eval(&(x * y)) - map.eval(x) * map.eval(y)).max_abs();
                if r > 1e-10 {
                    return Err(bad("embedding is not multiplicative", r));
                }
            }
        }
        let rank = linalg::orthonormal_span(map.superop(), 1e-10).ncols();
        if rank < sub.dim() {
            return Err(Error::NotSubalgebra(format!(
                "embedding has rank {rank} < {}",
                sub.dim()
            )));
        }
        Ok(Self { map })
    }

    /// Places copies of sub blocks along the diagonal of each ambient block.
    pub fn block_diagonal(
        sub: &MultiMatrixAlgebra,
        ambient: &MultiMatrixAlgebra,
        placements: &[Vec<usize>],
    ) -> Result<Self> {
        if placements.len() != ambient.num_blocks() {
            return Err(Error::SizeMismatch(format!(
                "{} placements for {} ambient blocks",
                placements.len(),
                ambient.num_blocks()
            )));
        }
        for (k, pl) in placements.iter().enumerate() {
            if pl.iter().any(|&s| s >= sub.num_blocks()) {
                return Err(Error::InvalidDescriptor(format!(
                    "placement of ambient block {k} names a missing sub block"
                )));
            }
            let total: usize = pl.iter().map(|&s| sub.blocks()[s]).sum();
            if total != ambient.blocks()[k] {
                return Err(Error::SizeMismatch(format!(
                    "ambient block {k} has size {} but its placements fill {total}",
                    ambient.blocks()[k]
                )));
            }
        }
        let map = BlockLinearMap::from_fn(sub, ambient, |x| {
            let blocks = placements
                .iter()
                .zip(ambient.blocks())
                .map(|(pl, &d)| {
                    let mut m = CMat::zeros(d, d);
                    let mut off = 0;
                    for &s in pl {
                        let ds = sub.blocks()[s];
                        m.view_mut((off, off), (ds, ds)).copy_from(x.block(s));
                        off += ds;
                    }
                    m
                })
                .collect();
            AlgebraElement::from_blocks(ambient, blocks)
        })?;
        Self::new(map)
    }

    pub fn identity(a: &MultiMatrixAlgebra) -> Self {
        Self {
            map: BlockLinearMap::identity(a),
        }
    }

    /// Diagonal matrices in `M_n`.
    pub fn diagonal(n: usize) -> Result<Self> {
        Self::block_diagonal(
            &MultiMatrixAlgebra::abelian(n)?,
            &MultiMatrixAlgebra::full(n)?,
            &[(0..n).collect()],
        )
    }

    /// Scalar multiples of the unit.
    pub fn scalars(a: &MultiMatrixAlgebra) -> Result<Self> {
        let placements: Vec<Vec<usize>> = a.blocks().iter().map(|&d| vec![0; d]).collect();
        Self::block_diagonal(&MultiMatrixAlgebra::abelian(1)?, a, &placements)
    }

    pub fn sub(&self) -> &MultiMatrixAlgebra {
        self.map.source()
    }

    pub fn ambient(&self) -> &MultiMatrixAlgebra {
        self.map.target()
    }

    pub fn map(&self) -> &BlockLinearMap {
        &self.map
    }

    pub fn apply(&self, x: &AlgebraElement) -> Result<AlgebraElement> {
        self.map.apply(x)
    }

    /// The action on the subalgebra that the embedding intertwines with `act`.
    pub fn induced_action(&self, act: &CentralAction) -> Result<CentralAction> {
        self.ambient().check_same(act.target())?;
        let sub = self.sub();
        let chars = (0..sub.num_blocks())
            .map(|s| {
                let mut unit_s = sub.zero();
                let d = sub.blocks()[s];
                *unit_s.block_mut(s) = CMat::identity(d, d);
                let img = self.map.eval(&unit_s);
                let mut found: Option<Option<usize>> = None;
                for k in 0..self.ambient().num_blocks() {
                    if img.block(k).iter().any(|z| z.norm() > 1e-10) {
                        let ch = act.characters()[k];
                        match found {
                            None => found = Some(ch),
                            Some(prev) if prev != ch => {
                                return Err(Error::NotSubalgebra(
                                    "subalgebra is not a submodule".into(),
                                ));
                            }
                            _ => {}
                        }
                    }
                }
                Ok(found.flatten())
            })
            .collect::<Result<Vec<_>>>()?;
        let induced = CentralAction::from_characters(act.source(), sub, chars)?;
        for f in act.source().basis() {
            for x in sub.basis() {
                let r = (self.map.eval(&induced.act(&f, &x)?) - act.act(&f, &self.map.eval(&x))?)
                    .max_abs();
                if r > 1e-10 {
                    return Err(Error::NotSubalgebra(format!(
                        "subalgebra is not a submodule (residual {r:.3e})"
                    )));
                }
            }
        }
        Ok(induced)
    }

    pub fn induced_bimodule(&self, bim: &BimoduleStructure) -> Result<BimoduleStructure> {
        BimoduleStructure::new(
            self.induced_action(&bim.left)?,
            self.induced_action(&bim.right)?,
        )
    }
}

/// Labels on `M₂(A)` for the actions by `diag(ρ_L(α), ρ_R(β))` on both sides.
fn doubled_labels(bim: &BimoduleStructure) -> IndexLabels {
    let a = bim.target();
    let offset = bim.left.source().num_blocks();
    let (left, right) = (bim.left.index_labels(), bim.right.index_labels());
    let ao = a.ambient_offsets();
    let mut lab = Vec::with_capacity(2 * a.ambient_dim());
    for (k, &d) in a.blocks().iter().enumerate() {
        for i in 0..2 {
            for p in 0..d {
                let idx = ao[k] + p;
                lab.push(if i == 0 {
                    left[idx]
                } else {
                    right[idx].map(|s| offset + s)
                });
            }
        }
    }
    IndexLabels {
        left: lab.clone(),
        right: lab,
    }
}

#[derive(Clone, Debug)]
pub struct WittstockExtension {
    pub map: BlockLinearMap,
    /// Upper estimate of the cb-norm of the input.
    pub cb_original: f64,
    /// Normalization actually used, slightly above `cb_original`.
    pub scale: f64,
    pub report: Option<SolveReport>,
    /// Upper bound on the cb-norm of the extension: the normalization after a
    /// converged solve, otherwise a computed cb-norm.
    pub cb_bound: f64,
    pub agreement_residual: f64,
    pub bimodule_residual: f64,
}

/// Bimodule extension `A → B` of a bimodule map on an embedded subalgebra with the same cb-norm.
///
/// The normalized map is placed in the corner of a unital map on the system
/// `[[ρ(𝔄), A₀], [A₀*, ρ(𝔅)]]` inside `M₂(A)`. A u.c.p. extension to `M₂(A)`
/// that is a module map for the diagonal actions has a bimodule map in its
/// upper-right corner.
pub fn wittstock_extend(
    theta0: &BlockLinearMap,
    emb: &Embedding,
    bim_a: &BimoduleStructure,
    bim_b: &BimoduleStructure,
    opts: SolverOptions,
) -> Result<WittstockExtension> {
    let (a, b) = (emb.ambient(), bim_b.target());
    a.check_same(bim_a.target())?;
    emb.sub().check_same(theta0.source())?;
    b.check_same(theta0.target())?;
    if bim_a.left.source() != bim_b.left.source() || bim_a.right.source() != bim_b.right.source() {
        return Err(Error::SourceMismatch);
    }
    let bim0 = emb.induced_bimodule(bim_a)?;
    let scale_in = theta0
        .superop()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max);
    let r = bimodule_residual(theta0, &bim0, bim_b)?;
    if r > 1e-9 * scale_in.max(1.0) {
        return Err(Error::NotBimoduleMap(r));
    }
    let c0 = if scale_in == 0.0 {
        0.0
    } else {
        cb_norm(theta0, WITTSTOCK_CB_TOL)?
    };
    if c0 <= 1e-12 {
        return Ok(WittstockExtension {
            map: BlockLinearMap::zero(a, b),
            cb_original: c0,
            scale: 0.0,
            report: None,
            cb_bound: 0.0,
            agreement_residual: scale_in,
            bimodule_residual: 0.0,
        });
    }
    let scale = c0 + (c0 * WITTSTOCK_SLACK).min(0.5 * WITTSTOCK_CB_BUDGET);
    let inv = 1.0 / scale;
    let mut data = Vec::new();
    for f in bim_a.left.source().basis() {
        data.push((
            elementary(a, 2, 0, 0, &bim_a.left.rho(&f))?,
            elementary(b, 2, 0, 0, &bim_b.left.rho(&f))?,
        ));
    }
    for g in bim_a.right.source().basis() {
        data.push((
            elementary(a, 2, 1, 1, &bim_a.right.rho(&g))?,
            elementary(b, 2, 1, 1, &bim_b.right.rho(&g))?,
        ));
    }
    for e in emb.sub().basis() {
        let x = emb.apply(&e)?;
        let y = theta0.eval(&e) * inv;
        data.push((elementary(a, 2, 0, 1, &x)?, elementary(b, 2, 0, 1, &y)?));
        data.push((
            elementary(a, 2, 1, 0, &x.adjoint())?,
            elementary(b, 2, 1, 0, &y.adjoint())?,
        ));
    }
    let corner = |big: &BlockLinearMap| {
        BlockLinearMap::from_fn(a, b, |x| {
            let y = big.apply(&elementary(a, 2, 0, 1, x)?)?;
            Ok(extract_matrix(b, 2, &y)?[0][1].clone() * scale)
        })
    };
    // A stalled point still meets the data and module constraints exactly, so its
    // corner is kept whenever its own cb-norm is within budget.
    let attempt = |max_iters: usize| -> Result<(BlockLinearMap, SolveReport, f64)> {
        let (big, report, _) = solve_extension(
            &a.amplify(2),
            &b.amplify(2),
            &doubled_labels(bim_a),
            &doubled_labels(bim_b),
            &data,
            ExtensionKind::Ucp,
            SolverOptions { max_iters, ..opts },
        )?;
        let map = corner(&big)?;
        let cb_bound = if report.is_feasible() {
            scale
        } else {
            cb_norm_at_most(&map, c0 + WITTSTOCK_CB_BUDGET, opts)?.unwrap_or(f64::INFINITY)
        };
        Ok((map, report, cb_bound))
    };
    let mut out = attempt(opts.max_iters.min(WITTSTOCK_SHORT_ITERS))?;
    if out.2 > c0 + WITTSTOCK_CB_BUDGET && opts.max_iters > WITTSTOCK_SHORT_ITERS {
        out = attempt(opts.max_iters)?;
    }
    let (map, report, cb_bound) = out;
    if cb_bound > c0 + WITTSTOCK_CB_BUDGET {
        return Err(Error::Stalled {
            iters: report.iters,
            gap: report.gap,
        });
    }
    let agreement_residual = emb
        .sub()
        .basis()
        .iter()
        .map(|e| Ok((map.eval(&emb.apply(e)?) - theta0.eval(e)).max_abs()))
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    let bimodule_residual = bimodule_residual(&map, bim_a, bim_b)?;
    Ok(WittstockExtension {
        map,
        cb_original: c0,
        scale,
        report: Some(report),
        cb_bound,
        agreement_residual,
        bimodule_residual,
    })
}

#[derive(Clone, Debug)]
pub struct ExtensionAudit {
    pub agreement_residual: f64,
    /// `‖ψ(1)‖`.
    pub unit_norm: f64,
    /// Sampled `sup ‖ψ(x)‖ / ‖x‖` over positive elements of the system.
    pub positive_cone_norm: f64,
    /// Sampled `sup ‖ψ(x)‖ / ‖x‖` over the system.
    pub psi_norm: f64,
    /// Sampled norm of the extension.
    pub extension_norm: f64,
    pub norm_preserving: bool,
    /// Smallest eigenvalue of `θ(x)/‖x‖` over sampled positive `x`.
    pub min_eigenvalue: f64,
    pub positive: bool,
    /// Worst positive input, kept when positivity fails for a norm-preserving extension.
    pub counterexample: Option<AlgebraElement>,
}

impl ExtensionAudit {
    /// A norm-preserving extension must be positive.
    pub fn consistent(&self) -> bool {
        !self.norm_preserving || self.positive
    }
}

/// Sampled check that a norm-preserving module extension of a positive map is positive.
pub fn positive_extension_audit(
    psi: &PartialMap,
    extension: &BlockLinearMap,
    samples: usize,
    seed: u64,
    tol: f64,
) -> Result<ExtensionAudit> {
    psi.system.ambient.check_same(extension.source())?;
    psi.target().check_same(extension.target())?;
    let agreement_residual = psi
        .system
        .basis
        .iter()
        .zip(&psi.values)
        .map(|(e, v)| (extension.eval(e) - v).max_abs())
        .fold(0.0, f64::max);
    if agreement_residual > tol {
        return Err(Error::NotExtension(agreement_residual));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unit_norm = psi.value(&psi.system.ambient.unit()).op_norm();
    let mut positive_cone_norm: f64 = unit_norm;
    let mut psi_norm: f64 = unit_norm;
    for _ in 0..samples {
        let x = psi.system.random_positive(&mut rng);
        let n = x.op_norm();
        if n > 0.0 {
            positive_cone_norm = positive_cone_norm.max(psi.value(&x).op_norm() / n);
        }
        let y = psi.system.random_element(&mut rng);
        let n = y.op_norm();
        if n > 0.0 {
            psi_norm = psi_norm.max(psi.value(&y).op_norm() / n);
        }
    }
    let extension_norm =
        sampled_norm(extension, samples, &mut rng).max(extension.unit_image().op_norm());
    let norm_preserving = extension_norm <= psi_norm * (1.0 + tol) + tol;
    let mut min_eigenvalue = f64::INFINITY;
    let mut worst = None;
    let amb = &psi.system.ambient;
    for _ in 0..samples {
        let x = amb.random_positive(&mut rng);
        let x = &x * (1.0 / x.op_norm().max(f64::MIN_POSITIVE));
        let m = extension.eval(&x).real_part().min_eigenvalue();
        if m < min_eigenvalue {
            min_eigenvalue = m;
            worst = Some(x);
        }
    }
    let positive = min_eigenvalue >= -tol;
    let counterexample = if norm_preserving && !positive {
        worst
    } else {
        None
    };
    Ok(ExtensionAudit {
        agreement_residual,
        unit_norm,
        positive_cone_norm,
        psi_norm,
        extension_norm,
        norm_preserving,
        min_eigenvalue,
        positive,
        counterexample,
    })
}

#[derive(Clone, Debug)]
pub struct Expectation {
    /// `E: ambient → sub` with `E ∘ ι = id`.
    pub onto_sub: BlockLinearMap,
    /// `ι ∘ E` on the ambient algebra.
    pub expectation: BlockLinearMap,
    pub report: SolveReport,
    pub idempotence_residual: f64,
    pub identity_residual: f64,
    pub module_residual: f64,
    pub choi_min_eigenvalue: f64,
}

/// Module conditional expectation onto an embedded subalgebra, from a u.c.p. extension of its identity map.
pub fn injectivity_expectation(
    emb: &Embedding,
    act: &CentralAction,
    opts: SolverOptions,
) -> Result<Expectation> {
    let act_sub = emb.induced_action(act)?;
    let data = emb
        .sub()
        .basis()
        .into_iter()
        .map(|e| Ok((emb.apply(&e)?, e)))
        .collect::<Result<Vec<_>>>()?;
    let (onto_sub, report, _) = solve_extension(
        emb.ambient(),
        emb.sub(),
        &IndexLabels::from_action(act),
        &IndexLabels::from_action(&act_sub),
        &data,
        ExtensionKind::Ucp,
        opts,
    )?;
    require_feasible(&report)?;
    let expectation = compose(emb.map(), &onto_sub)?;
    let idempotence_residual = compose(&expectation, &expectation)?.distance(&expectation);
    let identity_residual =
        compose(&onto_sub, emb.map())?.distance(&BlockLinearMap::identity(emb.sub()));
    let module_residual = module_residual(&expectation, act, act)?;
    let choi_min_eigenvalue = expectation.choi_min_eigenvalue();
    Ok(Expectation {
        onto_sub,
        expectation,
        report,
        idempotence_residual,
        identity_residual,
        module_residual,
        choi_min_eigenvalue,
    })
}

/// Random restriction problem: a c.c.p. module map into `M_n(ℂ^m)` restricted to a random system.
#[derive(Clone, Debug)]
pub struct ArvesonInstance {
    pub witness: BlockLinearMap,
    pub psi: PartialMap,
}

pub fn random_arveson_instance<R: Rng + ?Sized>(rng: &mut R) -> Result<ArvesonInstance> {
    let m = rng.random_range(1..=2);
    let n = rng.random_range(1..=3);
    let acting = MultiMatrixAlgebra::abelian(m)?;
    let a = MultiMatrixAlgebra::random(5, rng)?;
    let act_a = crate::actions::random_central_action(&acting, &a, true, rng)?;
    let act_t = CentralAction::on_itself(&acting)?.amplify(n);
    // Full Kraus rank keeps the witness in the relative interior of the cone.
    let rank = a.ambient_dim() * act_t.target().ambient_dim();
    let theta = random_cp_module_map(&act_a, &act_t, rank, rng.random())?;
    let u = theta.unit_image().op_norm();
    let witness = theta.scale(c(1.0 / (u * rng.random_range(1.05..2.0))));
    let system = random_operator_system(&act_a, rng.random_range(0..=2), rng)?;
    let psi = PartialMap::restrict(system, &witness, &act_t)?;
    Ok(ArvesonInstance { witness, psi })
}

/// Random bimodule map on a block-diagonal subalgebra, with actions by `ℂ^m`.
#[derive(Clone, Debug)]
pub struct WittstockInstance {
    pub embedding: Embedding,
    pub bim_a: BimoduleStructure,
    pub bim_b: BimoduleStructure,
    pub theta0: BlockLinearMap,
}

pub fn random_wittstock_instance<R: Rng + ?Sized>(rng: &mut R) -> Result<WittstockInstance> {
    let alg_l = MultiMatrixAlgebra::abelian(rng.random_range(1..=2))?;
    let alg_r = MultiMatrixAlgebra::abelian(rng.random_range(1..=2))?;
    let a = MultiMatrixAlgebra::random(4, rng)?;
    let b = MultiMatrixAlgebra::random(3, rng)?;
    let left_a: Vec<Option<usize>> = (0..a.num_blocks())
        .map(|_| Some(rng.random_range(0..alg_l.num_blocks())))
        .collect();
    let right_a: Vec<Option<usize>> = (0..a.num_blocks())
        .map(|_| Some(rng.random_range(0..alg_r.num_blocks())))
        .collect();
    let picks: Vec<usize> = (0..b.num_blocks())
        .map(|_| rng.random_range(0..a.num_blocks()))
        .collect();
    let bim_a = BimoduleStructure::new(
        CentralAction::from_characters(&alg_l, &a, left_a.clone())?,
        CentralAction::from_characters(&alg_r, &a, right_a.clone())?,
    )?;
    let bim_b = BimoduleStructure::new(
        CentralAction::from_characters(&alg_l, &b, picks.iter().map(|&k| left_a[k]).collect())?,
        CentralAction::from_characters(&alg_r, &b, picks.iter().map(|&k| right_a[k]).collect())?,
    )?;
    let mut sub_blocks = Vec::new();
    let mut placements = Vec::new();
    for &d in a.blocks() {
        let mut pl = Vec::new();
        let mut left = d;
        while left > 0 {
            let p = if rng.random_bool(0.5) {
                left
            } else {
                rng.random_range(1..=left)
            };
            pl.push(sub_blocks.len());
            sub_blocks.push(p);
            left -= p;
        }
        placements.push(pl);
    }
    let sub = MultiMatrixAlgebra::new(&sub_blocks)?;
    let embedding = Embedding::block_diagonal(&sub, &a, &placements)?;
    let bim0 = embedding.induced_bimodule(&bim_a)?;
    let (l0, lb) = (bim0.index_labels(), bim_b.index_labels());
    let mut theta0 = BlockLinearMap::zero(&sub, &b);
    for z in [c(1.0), c(-1.0), C64::new(0.0, 1.0)] {
        let rank = sub.ambient_dim() * b.ambient_dim();
        let phi = random_cp_labeled_map(&sub, &b, &l0, &lb, rank, rng)?;
        theta0 = theta0.try_add(&phi.scale(z * rng.random_range(0.2..1.0)))?;
    }
    let size = sub
        .basis()
        .iter()
        .map(|e| theta0.eval(e).op_norm())
        .fold(0.0, f64::max);
    if size > 0.0 {
        theta0 = theta0.scale(c(rng.random_range(0.5..2.0) / size));
    }
    Ok(WittstockInstance {
        embedding,
        bim_a,
        bim_b,
        theta0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cpcalc::conditional_expectation;

    fn m(n: usize) -> MultiMatrixAlgebra {
        MultiMatrixAlgebra::full(n).unwrap()
    }

    #[test]
    fn operator_system_validation() {
        let a = m(2);
        let act = CentralAction::trivial(&a);
        assert!(OperatorSystem::new(&a, vec![a.unit(), a.matrix_unit(0, 0, 1)], &act).is_err());
        assert!(OperatorSystem::new(&a, vec![a.matrix_unit(0, 0, 0)], &act).is_err());
        let s = OperatorSystem::new(
            &a,
            vec![a.unit(), a.matrix_unit(0, 0, 1), a.matrix_unit(0, 1, 0)],
            &act,
        )
        .unwrap();
        assert_eq!(s.dim(), 3);
    }

    #[test]
    fn random_restrictions_extend() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..4 {
            let inst = random_arveson_instance(&mut rng).unwrap();
            let ext =
                arveson_extend(&inst.psi, ExtensionKind::Ccp, SolverOptions::default()).unwrap();
            assert!(ext.agreement_residual <= 1e-7, "{}", ext.agreement_residual);
            assert!(ext.choi_min_eigenvalue >= -1e-7);
            assert!(ext.module_residual <= 1e-7);
        }
    }

    #[test]
    fn unit_only_system_gives_normalized_trace() {
        let a = m(3);
        let act = CentralAction::trivial(&a);
        let one = MultiMatrixAlgebra::abelian(1).unwrap();
        let psi = PartialMap::new(
            OperatorSystem::scalars(&act).unwrap(),
            vec![one.unit()],
            &CentralAction::trivial(&one),
        )
        .unwrap();
        let ext = arveson_extend(&psi, ExtensionKind::Ucp, SolverOptions::default()).unwrap();
        let x = a.random_element(&mut ChaCha8Rng::seed_from_u64(1));
        assert!((ext.map.eval(&x).block(0)[(0, 0)] - x.trace() / c(3.0)).norm() < 1e-6);
    }

    #[test]
    fn norm_violating_data_stalls() {
        let a = m(2);
        let act = CentralAction::trivial(&a);
        let (e12, e21) = (a.matrix_unit(0, 0, 1), a.matrix_unit(0, 1, 0));
        let sys = OperatorSystem::new(&a, vec![a.unit(), e12.clone(), e21.clone()], &act).unwrap();
        let psi = PartialMap::new(sys, vec![a.unit(), &e12 * 2.0, &e21 * 2.0], &act).unwrap();
        let opts = SolverOptions {
            max_iters: 5000,
            ..Default::default()
        };
        match arveson_extend(&psi, ExtensionKind::Ucp, opts) {
            Err(Error::Stalled { gap, .. }) => assert!(gap > 1e-6),
            other => panic!("expected a stall, got {other:?}"),
        }
    }

    #[test]
    fn inconsistent_relations_are_rejected() {
        let a = m(2);
        let act = CentralAction::trivial(&a);
        let sys = OperatorSystem::new(&a, vec![a.unit(), a.unit() * 2.0], &act).unwrap();
        assert!(matches!(
            PartialMap::new(sys, vec![a.unit(), a.unit()], &act),
            Err(Error::InconsistentConstraints(_))
        ));
    }

    #[test]
    fn wittstock_examples() {
        let amb = m(2);
        let bim =
            BimoduleStructure::new(CentralAction::trivial(&amb), CentralAction::trivial(&amb))
                .unwrap();
        let opts = SolverOptions::default();

        let emb = Embedding::diagonal(2).unwrap();
        let incl = emb.map().clone();
        let w = wittstock_extend(&incl, &emb, &bim, &bim, opts).unwrap();
        assert!(w.agreement_residual <= 1e-7 && w.bimodule_residual <= 1e-7);
        assert!(cb_norm(&w.map, 1e-4).unwrap() <= w.cb_original + 1e-3);
        assert!((w.cb_original - 1.0).abs() < 1e-3);

        let id = Embedding::identity(&amb);
        let t = BlockLinearMap::transpose(&amb);
        let w = wittstock_extend(&t, &id, &bim, &bim, opts).unwrap();
        assert!(w.map.distance(&t) < 1e-6);

        let zero = BlockLinearMap::zero(&amb, &amb);
        let w = wittstock_extend(&zero, &id, &bim, &bim, opts).unwrap();
        assert_eq!(
            w.map.superop().iter().map(|z| z.norm()).fold(0.0, f64::max),
            0.0
        );
    }

    #[test]
    fn random_wittstock_instances_keep_cb_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..2 {
            let inst = random_wittstock_instance(&mut rng).unwrap();
            let w = wittstock_extend(
                &inst.theta0,
                &inst.embedding,
                &inst.bim_a,
                &inst.bim_b,
                SolverOptions::default(),
            )
            .unwrap();
            assert!(w.agreement_residual <= 1e-7, "{}", w.agreement_residual);
            assert!(w.bimodule_residual <= 1e-7, "{}", w.bimodule_residual);
            assert!(cb_norm(&w.map, 1e-4).unwrap() <= w.cb_original + 1e-3);
        }
    }

    #[test]
    fn expectations_onto_standard_subalgebras() {
        let opts = SolverOptions::default();
        let a = m(2);
        let act = CentralAction::trivial(&a);

        let emb = Embedding::diagonal(2).unwrap();
        let e = injectivity_expectation(&emb, &act, opts).unwrap();
        let sub_basis = vec![a.matrix_unit(0, 0, 0), a.matrix_unit(0, 1, 1)];
        assert!(
            e.expectation
                .distance(&conditional_expectation(&a, &sub_basis).unwrap())
                < 1e-6
        );
        assert!(e.idempotence_residual < 1e-6 && e.identity_residual < 1e-6);

        let e = injectivity_expectation(&Embedding::identity(&a), &act, opts).unwrap();
        assert!(e.expectation.distance(&BlockLinearMap::identity(&a)) < 1e-6);

        let a3 = m(3);
        let e = injectivity_expectation(
            &Embedding::scalars(&a3).unwrap(),
            &CentralAction::trivial(&a3),
            opts,
        )
        .unwrap();
        let x = a3.random_element(&mut ChaCha8Rng::seed_from_u64(2));
        assert!((e.expectation.eval(&x) - a3.unit() * (x.trace() / c(3.0))).max_abs() < 1e-6);
    }

    #[test]
    fn expectation_respects_module_structure() {
        let acting = MultiMatrixAlgebra::abelian(2).unwrap();
        let a = MultiMatrixAlgebra::new(&[2, 2]).unwrap();
        let act = CentralAction::from_characters(&acting, &a, vec![Some(0), Some(1)]).unwrap();
        let sub = MultiMatrixAlgebra::new(&[1, 1, 1]).unwrap();
        let emb = Embedding::block_diagonal(&sub, &a, &[vec![0, 1], vec![2, 2]]).unwrap();
        let e = injectivity_expectation(&emb, &act, SolverOptions::default()).unwrap();
        assert!(
            e.module_residual < 1e-7
                && e.idempotence_residual < 1e-6
                && e.choi_min_eigenvalue > -1e-7
        );
    }

    #[test]
    fn audit_flags_inflated_extension() {
        let a = m(2);
        let act = CentralAction::trivial(&a);
        let one = MultiMatrixAlgebra::abelian(1).unwrap();
        let state =
            BlockLinearMap::from_fn(&a, &one, |x| Ok(one.unit() * x.block(0)[(0, 0)])).unwrap();
        let sys = OperatorSystem::new(&a, vec![a.unit(), a.matrix_unit(0, 0, 0)], &act).unwrap();
        let psi = PartialMap::restrict(sys, &state, &CentralAction::trivial(&one)).unwrap();
        let rep = positive_extension_audit(&psi, &state, 500, 3, 1e-9).unwrap();
        assert!(rep.norm_preserving && rep.positive && rep.consistent());

        let off = BlockLinearMap::from_fn(&a, &one, |x| {
            Ok(one.unit() * (x.block(0)[(0, 1)] + x.block(0)[(1, 0)]))
        })
        .unwrap();
        let inflated = state.try_add(&off.scale(c(2.0))).unwrap();
        let rep = positive_extension_audit(&psi, &inflated, 500, 3, 1e-9).unwrap();
        assert!(!rep.norm_preserving && !rep.positive && rep.consistent());

        assert!(matches!(
            positive_extension_audit(&psi, &state.scale(c(2.0)), 10, 3, 1e-9),
            Err(Error::NotExtension(_))
        ));
    }
}
