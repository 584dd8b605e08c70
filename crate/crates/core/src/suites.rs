//! Randomized verification harness. Each suite draws seeded random instances
//! for one construction, runs its checks and keeps the worst value of every
//! checked quantity.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::actions::{
    matricial_bound_check, random_central_action, BimoduleHilbert, BimoduleStructure,
    CentralAction, IndexLabels,
};
use crate::algebra::{split_direct_sum, AlgebraElement, MultiMatrixAlgebra};
use crate::constructions::{
    assemble_2x2, cp1_backward, cp1_choi_element, cp1_forward, cp1_from_element, cp1_lift,
    cp2_backward, cp2_forward, extend_direct_sum, extend_to_unitization, lift_nuclearity_witness,
    normalized_map, random_cp_2x2, random_non_cp_2x2, ucp_rescale, unitalize_factorization,
    unitize, verify_2x2, verify_factorization, ExtensionMode, FactorizationStage,
    FactorizationWitness,
};
use crate::cpcalc::{
    cb_norm, compose, module_residual, random_cp_labeled_map, random_cp_module_map, BlockLinearMap,
};
use crate::dilation::{
    commutant_lift, minimize_dilation, random_cp_bimodule_map, range_commutant, stinespring_module,
    verify_dilation,
};
use crate::error::{Error, Result};
use crate::extension::{
    arveson_extend, injectivity_expectation, positive_extension_audit, random_arveson_instance,
    random_operator_system, random_wittstock_instance, Embedding, ExtensionKind, PartialMap,
};
use crate::feasibility::SolverOptions;
use crate::linalg::{self, c, max_abs, CMat};

pub const SUITES: [&str; 13] = [
    "exp",
    "unital",
    "in",
    "ucp-factor",
    "inj",
    "hom",
    "wittstock",
    "dial",
    "cp1",
    "cp2",
    "cp3",
    "arv",
    "expectation",
];

/// Size overrides; anything left out is drawn at random per instance.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Sizes {
    pub instances: Option<usize>,
    /// Blocks of the base algebra.
    #[serde(rename = "A", skip_serializing_if = "Option::is_none")]
    pub a: Option<Vec<usize>>,
    /// Largest Hilbert space dimension for `dial`.
    #[serde(rename = "H", skip_serializing_if = "Option::is_none")]
    pub h: Option<usize>,
    /// Matrix amplification for `cp1`, `cp2` and `in`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    /// Number of blocks of the commutative acting algebra.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub acting: Option<usize>,
    /// Bound on the ambient size of random base algebras.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_ambient: Option<usize>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SuiteReport {
    pub suite: String,
    pub seed: u64,
    pub instances: usize,
    pub passed: usize,
    pub failures: Vec<String>,
    /// Largest value of each upper-bounded quantity, smallest of each lower-bounded one.
    pub worst: BTreeMap<String, f64>,
    pub counts: BTreeMap<String, usize>,
}

impl SuiteReport {
    pub fn all_passed(&self) -> bool {
        self.failures.is_empty() && self.passed == self.instances
    }
}

struct Checks<'a> {
    report: &'a mut SuiteReport,
    failed: Vec<String>,
}

impl Checks<'_> {
    fn le(&mut self, name: &str, v: f64, bound: f64) {
        let w = self
            .report
            .worst
            .entry(name.into())
            .or_insert(f64::NEG_INFINITY);
        *w = w.max(v);
        if !(v <= bound) {
            self.failed.push(format!("{name} = {v:.3e} > {bound:.0e}"));
        }
    }

    fn ge(&mut self, name: &str, v: f64, bound: f64) {
        let w = self
            .report
            .worst
            .entry(name.into())
            .or_insert(f64::INFINITY);
        *w = w.min(v);
        if !(v >= bound) {
            self.failed.push(format!("{name} = {v:.3e} < {bound:.0e}"));
        }
    }

    fn holds(&mut self, name: &str, ok: bool) {
        if !ok {
            self.failed.push(name.into());
        }
    }

    fn count(&mut self, name: &str) {
        *self.report.counts.entry(name.into()).or_default() += 1;
    }
}

type Instance = fn(usize, &Sizes, &mut ChaCha8Rng, &mut Checks) -> Result<()>;

fn lookup(name: &str) -> Result<(Instance, usize)> {
    Ok(match name {
        "exp" => (exp, 10),
        "unital" => (unital, 20),
        "in" => (rescale, 10),
        "ucp-factor" => (ucp_factor, 10),
        "inj" => (two_by_two, 10),
        "hom" => (matricial_bound, 10),
        "wittstock" => (wittstock, 2),
        "dial" => (dilation, 10),
        "cp1" => (cp1, 20),
        "cp2" => (cp2, 20),
        "cp3" => (cp3, 10),
        "arv" => (arveson, 10),
        "expectation" => (expectation, 10),
        other => return Err(Error::UnknownSuite(other.into())),
    })
}

/// Instance `i` of every suite draws from stream `i` of the seed.
pub fn instance_rng(seed: u64, i: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(i as u64);
    rng
}

pub fn run_suite(name: &str, seed: u64, sizes: &Sizes) -> Result<SuiteReport> {
    let (instance, default_count) = lookup(name)?;
    let instances = sizes.instances.unwrap_or(default_count);
    let mut report = SuiteReport {
        suite: name.into(),
        seed,
        instances,
        passed: 0,
        failures: Vec::new(),
        worst: BTreeMap::new(),
        counts: BTreeMap::new(),
    };
    for i in 0..instances {
        let mut rng = instance_rng(seed, i);
        let mut checks = Checks {
            report: &mut report,
            failed: Vec::new(),
        };
        let outcome = instance(i, sizes, &mut rng, &mut checks);
        let mut failed = checks.failed;
        if let Err(e) = outcome {
            failed.push(format!("error: {e}"));
        }
        if failed.is_empty() {
            report.passed += 1;
        } else {
            report
                .failures
                .push(format!("instance {i}: {}", failed.join("; ")));
        }
    }
    Ok(report)
}

/// `name` may be `all`.
pub fn run(name: &str, seed: u64, sizes: &Sizes) -> Result<Vec<SuiteReport>> {
    if name == "all" {
        SUITES.iter().map(|s| run_suite(s, seed, sizes)).collect()
    } else {
        Ok(vec![run_suite(name, seed, sizes)?])
    }
}

fn opts() -> SolverOptions {
    SolverOptions::from_env()
}

fn acting(sizes: &Sizes, rng: &mut ChaCha8Rng) -> Result<MultiMatrixAlgebra> {
    let m = sizes.acting.unwrap_or_else(|| rng.random_range(1..=2));
    MultiMatrixAlgebra::abelian(m)
}

fn base(sizes: &Sizes, rng: &mut ChaCha8Rng, max_ambient: usize) -> Result<MultiMatrixAlgebra> {
    match &sizes.a {
        Some(blocks) => MultiMatrixAlgebra::new(blocks),
        None => MultiMatrixAlgebra::random(sizes.max_ambient.unwrap_or(max_ambient), rng),
    }
}

/// Action whose characters are drawn from `pool`, so maps from an algebra
/// carrying those characters can have invertible unit image.
fn action_from(
    acting: &MultiMatrixAlgebra,
    target: &MultiMatrixAlgebra,
    pool: &[Option<usize>],
    rng: &mut ChaCha8Rng,
) -> Result<CentralAction> {
    let chars = (0..target.num_blocks())
        .map(|_| pool[rng.random_range(0..pool.len())])
        .collect();
    CentralAction::from_characters(acting, target, chars)
}

fn full_rank(a: &CentralAction, b: &CentralAction) -> usize {
    a.target().ambient_dim() * b.target().ambient_dim()
}

/// Random c.c.p. module map with `‖θ(1)‖ ∈ (½, 1]`; the zero map when no sector is allowed.
fn random_ccp(
    act_a: &CentralAction,
    act_b: &CentralAction,
    rng: &mut ChaCha8Rng,
) -> Result<BlockLinearMap> {
    let theta = match random_cp_module_map(act_a, act_b, full_rank(act_a, act_b), rng.random()) {
        Ok(t) => t,
        Err(Error::EmptyIntertwinerSpace) => {
            return Ok(BlockLinearMap::zero(act_a.target(), act_b.target()))
        }
        Err(e) => return Err(e),
    };
    let u = theta.unit_image().op_norm();
    Ok(if u > 0.0 {
        theta.scale(c(1.0 / (u * rng.random_range(1.0..2.0))))
    } else {
        theta
    })
}

/// `φ1 − sφ2` with `s` large enough that the Choi matrix has a negative eigenvalue.
fn non_cp(phi1: &BlockLinearMap, phi2: &BlockLinearMap) -> Result<BlockLinearMap> {
    let top = |m: &BlockLinearMap| linalg::max_eigenvalue(&m.choi());
    let s = 2.0 * top(phi1) / top(phi2);
    phi1.try_sub(&phi2.scale(c(s)))
}

fn is_cp(m: &BlockLinearMap) -> bool {
    m.choi_min_eigenvalue() >= -1e-9
}

/// Bimodule structures on a random `A` and `B`, with `B`'s characters copied from blocks of `A`.
fn random_bimodules(
    sizes: &Sizes,
    rng: &mut ChaCha8Rng,
) -> Result<(BimoduleStructure, BimoduleStructure)> {
    let fl = acting(sizes, rng)?;
    let fr = MultiMatrixAlgebra::abelian(rng.random_range(1..=2))?;
    let a = base(sizes, rng, 3)?;
    let b = MultiMatrixAlgebra::random(3, rng)?;
    let left = random_central_action(&fl, &a, true, rng)?;
    let right = random_central_action(&fr, &a, true, rng)?;
    let picks: Vec<usize> = (0..b.num_blocks())
        .map(|_| rng.random_range(0..a.num_blocks()))
        .collect();
    let copy = |act: &CentralAction| -> Vec<Option<usize>> {
        picks.iter().map(|&k| act.characters()[k]).collect()
    };
    let bim_b = BimoduleStructure::new(
        CentralAction::from_characters(&fl, &b, copy(&left))?,
        CentralAction::from_characters(&fr, &b, copy(&right))?,
    )?;
    Ok((BimoduleStructure::new(left, right)?, bim_b))
}

struct FactorizationCase {
    theta: BlockLinearMap,
    act_a: CentralAction,
    act_b: CentralAction,
    witness: FactorizationWitness,
}

/// `θ = ψ∘φ` through `M_k(E)`, witnessed by a coarse stage and the exact one.
fn factorization_case(sizes: &Sizes, rng: &mut ChaCha8Rng) -> Result<FactorizationCase> {
    let fa = acting(sizes, rng)?;
    let a = base(sizes, rng, 4)?;
    let act_a = random_central_action(&fa, &a, true, rng)?;
    let e = MultiMatrixAlgebra::random(3, rng)?;
    let act_e = action_from(&fa, &e, act_a.characters(), rng)?;
    let b = MultiMatrixAlgebra::random(4, rng)?;
    let act_b = action_from(&fa, &b, act_e.characters(), rng)?;
    let k = rng.random_range(1..=2);
    let act_k = act_e.amplify(k);
    let phi = random_ccp(&act_a, &act_k, rng)?;
    let psi = random_ccp(&act_k, &act_b, rng)?;
    let theta = compose(&psi, &phi)?;
    let coarse = FactorizationStage {
        k,
        phi: phi.scale(c(0.5)),
        psi: psi.clone(),
    };
    let witness = FactorizationWitness {
        e,
        act_e,
        stages: vec![coarse, FactorizationStage { k, phi, psi }],
        probes: vec![],
    };
    Ok(FactorizationCase {
        theta,
        act_a,
        act_b,
        witness,
    })
}

fn exp(_: usize, sizes: &Sizes, rng: &mut ChaCha8Rng, ck: &mut Checks) -> Result<()> {
    let f = factorization_case(sizes, rng)?;
    let rep = verify_factorization(&f.theta, &f.act_a, &f.act_b, &f.witness)?;
    for st in &rep.stages {
        ck.ge(
            "stage_min_choi",
            st.phi_min_choi.min(st.psi_min_choi),
            -1e-9,
        );
    }
    ck.le("final_gap", rep.final_gap, 1e-10);
    ck.holds("gaps are not monotone", rep.monotone);
    let lifted = lift_nuclearity_witness(&f.theta, &f.act_a, &f.act_b, &f.witness)?;
    let lrep = verify_factorization(
        &lifted.theta_tilde,
        &lifted.source_action,
        &lifted.target_action,
        &lifted.witness,
    )?;
    ck.le("lifted_gap", lrep.final_gap, rep.final_gap + 1e-9);
    for st in &lifted.witness.stages {
        ck.le(
            "lifted_unital_defect",
            st.phi.unital_defect().max(st.psi.unital_defect()),
            1e-9,
        );
        ck.ge(
            "lifted_min_choi",
            st.phi
                .choi_min_eigenvalue()
                .min(st.psi.choi_min_eigenvalue()),
            -1e-9,
        );
    }
    Ok(())
}

fn ucp_factor(_: usize, sizes: &Sizes, rng: &mut ChaCha8Rng, ck: &mut Checks) -> Result<()> {
    let f = factorization_case(sizes, rng)?;
    let gap = verify_factorization(&f.theta, &f.act_a, &f.act_b, &f.witness)?.final_gap;
    let u = unitalize_factorization(&f.theta, &f.act_a, &f.act_b, &f.witness, opts())?;
    for st in &u.witness.stages {
        let act_k = u.witness.act_e.amplify(st.k);
        ck.le(
            "unital_defect",
            st.phi.unital_defect().max(st.psi.unital_defect()),
            1e-8,
        );
        ck.ge(
            "min_choi",
            st.phi
                .choi_min_eigenvalue()
                .min(st.psi.choi_min_eigenvalue()),
            -1e-8,
        );
        let r = module_residual(&st.phi, &f.act_a, &act_k)?
            .max(module_residual(&st.psi, &act_k, &f.act_b)?);
        ck.le("module_residual", r, 1e-8);
    }
    let rep = verify_factorization(&u.target, &f.act_a, &f.act_b, &u.witness)?;
    ck.le("unital_gap", rep.final_gap, 2.0 * gap + 1e-8);
    Ok(())
}

fn block_projection(alg: &MultiMatrixAlgebra, keep: &[bool]) -> AlgebraElement {
    let mut q = alg.zero();
    for (k, &d) in alg.blocks().iter().enumerate() {
        if keep[k] {
            *q.block_mut(k) = CMat::identity(d, d);
        }
    }
    q
}

fn unital(_: usize, sizes: &Sizes, rng: &mut ChaCha8Rng, ck: &mut Checks) -> Result<()> {
    let fa = acting(sizes, rng)?;
    let a = base(sizes, rng, 4)?;
    let act_a = random_central_action(&fa, &a, true, rng)?;
    let b = MultiMatrixAlgebra::random(4, rng)?;
    let act_b = action_from(&fa, &b, act_a.characters(), rng)?;
    // Half the maps compress a unital map by a central projection, so 1 lies in the multiplicative domain.
    let compressed = rng.random_bool(0.5);
    let theta = if compressed {
        let ucp = normalized_map(&random_cp_module_map(
            &act_a,
            &act_b,
            full_rank(&act_a, &act_b),
            rng.random(),
        )?)?;
        let mut keep: Vec<bool> = (0..b.num_blocks()).map(|_| rng.random_bool(0.6)).collect();
        let pick = rng.random_range(0..keep.len());
        keep[pick] = true;
        let q = block_projection(&b, &keep);
        BlockLinearMap::from_fn(&a, &b, |x| Ok(&q * &ucp.apply(x)? * &q))?
    } else {
        random_ccp(&act_a, &act_b, rng)?
    };
    let ua = unitize(&act_a)?;
    let ub = unitize(&act_b)?;

    let t = extend_to_unitization(&theta, &act_a, &act_b, ExtensionMode::UnitalTarget)?;
    ck.le("unital_defect", t.unital_defect(), 1e-12);
    ck.le(
        "module_residual",
        module_residual(&t, ua.action_tilde(), &act_b)?,
        1e-9,
    );
    ck.ge("min_choi", t.choi_min_eigenvalue(), -1e-9);
    let restriction = a
        .basis()
        .iter()
        .map(|e| Ok((t.eval(&ua.iota_a(e)?) - theta.eval(e)).max_abs()))
        .collect::<Result<Vec<_>>>()?;
    ck.le(
        "restriction_residual",
        restriction.into_iter().fold(0.0, f64::max),
        1e-12,
    );

    let g = extend_to_unitization(&theta, &act_a, &act_b, ExtensionMode::General)?;
    ck.le("general_unital_defect", g.unital_defect(), 1e-12);
    ck.le(
        "general_module_residual",
        module_residual(&g, ua.action_tilde(), ub.action_tilde())?,
        1e-9,
    );
    ck.ge("general_min_choi", g.choi_min_eigenvalue(), -1e-9);

    match extend_direct_sum(&theta, &act_a, &act_b) {
        Ok(s) => {
            ck.count("direct_sum");
            ck.le("sum_unital_defect", s.unital_defect(), 1e-12);
            ck.le(
                "sum_module_residual",
                module_residual(&s, ua.action_tilde(), &act_b)?,
                1e-9,
            );
            ck.ge("sum_min_choi", s.choi_min_eigenvalue(), -1e-9);
            let padded = BlockLinearMap::from_fn(s.source(), &b, |y| {
                theta.apply(&split_direct_sum(&a, &fa, y)?.0)
            })?;
            ck.ge(
                "sum_difference_min_choi",
                s.try_sub(&padded)?.choi_min_eigenvalue(),
                -1e-9,
            );
        }
        Err(Error::UnitNotInMultiplicativeDomain(_)) => {
            ck.count("direct_sum_precondition_fails");
            ck.holds("compressed map rejected by extend_direct_sum", !compressed);
        }
        Err(e) => return Err(e),
    }
    Ok(())
}

fn rescale(i: usize, sizes: &Sizes, rng: &mut ChaCha8Rng, ck: &mut Checks) -> Result<()> {
    let fa = acting(sizes, rng)?;
    let a = base(sizes, rng, 3)?;
    let act_a = random_central_action(&fa, &a, true, rng)?;
    let e = MultiMatrixAlgebra::random(2, rng)?;
    let act_e = action_from(&fa, &e, act_a.characters(), rng)?;
    let singular = i % 2 == 1;
    let mut n = sizes.n.unwrap_or_else(|| rng.random_range(1..=2));
    if singular && n == 1 && e.blocks().iter().all(|&d| d == 1) {
        n = 2;
    }
    let act_t = act_e.amplify(n);
    let target = act_t.target().clone();
    let phi = random_cp_module_map(&act_a, &act_t, full_rank(&act_a, &act_t), rng.random())?;
    let phi_t = if singular {
        // a rank-deficient projection inside one block is not central
        let wide: Vec<usize> = (0..target.num_blocks())
            .filter(|&k| target.blocks()[k] >= 2)
            .collect();
        let t = wide[rng.random_range(0..wide.len())];
        let d = target.blocks()[t];
        let r = rng.random_range(1..d);
        let u = linalg::random_unitary(rng, d);
        let cols = u.columns(0, r).into_owned();
        let mut p = target.unit();
        *p.block_mut(t) = &cols * cols.adjoint();
        BlockLinearMap::from_fn(&a, &target, |x| Ok(&p * &phi.apply(x)? * &p))?
    } else {
        phi
    };
    let r = ucp_rescale(&phi_t, &act_a, &act_t, opts())?;
    if r.singular {
        ck.count("singular");
    }
    ck.holds("singularity misdetected", r.singular == singular);
    ck.le("reconstruction_residual", r.residual, 1e-7);
    ck.le("unital_defect", r.phi.unital_defect(), 1e-7);
    ck.ge("min_choi", r.phi.choi_min_eigenvalue(), -1e-7);
    ck.le(
        "module_residual",
        module_residual(&r.phi, &act_a, &act_t)?,
        1e-7,
    );
    Ok(())
}

fn two_by_two(_: usize, sizes: &Sizes, rng: &mut ChaCha8Rng, ck: &mut Checks) -> Result<()> {
    let (bim_a, bim_b) = random_bimodules(sizes, rng)?;
    let rank = rng.random_range(1..=2);
    let p = random_cp_2x2(&bim_a, &bim_b, rank, rng)?;
    let big = assemble_2x2([&p[0], &p[1], &p[2], &p[3]])?;
    let rep = verify_2x2(&big, Some((&bim_a, &bim_b)), 1e-8, 10, rng.random())?;
    for (k, ok) in rep.passed.iter().enumerate() {
        ck.holds(
            &format!("assertion {} failed", ["i", "ii", "iii", "iv", "v"][k]),
            *ok,
        );
    }
    ck.ge("min_choi", rep.choi_min_eigenvalue, -1e-8);
    ck.le(
        "doubled_bimodule_residual",
        rep.doubled_bimodule_residual,
        1e-8,
    );
    ck.le("flip_residual", rep.flip_residual, 1e-8);
    ck.ge("roots_min_eigenvalue", rep.roots_min_eigenvalue, -1e-8);
    ck.ge("schwarz_min_eigenvalue", rep.schwarz_min_eigenvalue, -1e-8);

    let q = random_non_cp_2x2(&bim_a, &bim_b, rank, rng)?;
    let bad = assemble_2x2([&q[0], &q[1], &q[2], &q[3]])?;
    ck.le("non_cp_min_choi", bad.choi_min_eigenvalue(), -1e-6);
    let rejected = matches!(
        verify_2x2(&bad, Some((&bim_a, &bim_b)), 1e-8, 1, 0),
        Err(Error::NotCP(_))
    );
    ck.holds("non-CP assembly accepted", rejected);
    Ok(())
}

fn matricial_bound(_: usize, sizes: &Sizes, rng: &mut ChaCha8Rng, ck: &mut Checks) -> Result<()> {
    let (bim_a, bim_b) = random_bimodules(sizes, rng)?;
    let (a, b) = (bim_a.target().clone(), bim_b.target().clone());
    let (la, lb) = (bim_a.index_labels(), bim_b.index_labels());
    let rank = rng.random_range(1..=2);
    let phi1 = random_cp_labeled_map(&a, &b, &la, &lb, rank, rng)?;
    let phi2 = random_cp_labeled_map(&a, &b, &la, &lb, rank, rng)?;
    let theta = phi1.try_sub(&phi2)?;
    let k = cb_norm(&theta, 1e-4)?;
    let rep = matricial_bound_check(&theta, &bim_a, &bim_b, k, 20, 2, rng.random(), 1e-7)?;
    ck.ge("min_eigenvalue", rep.min_eigenvalue, -1e-7);
    ck.holds("matricial bound violated", rep.passed);
    Ok(())
}

fn random_commutant_element(basis: &[CMat], rng: &mut ChaCha8Rng) -> CMat {
    let g = linalg::random_gaussian(rng, basis.len(), 1);
    let d = basis[0].nrows();
    basis
        .iter()
        .enumerate()
        .fold(CMat::zeros(d, d), |acc, (i, b)| acc + b * g[(i, 0)])
}

fn dilation(_: usize, sizes: &Sizes, rng: &mut ChaCha8Rng, ck: &mut Checks) -> Result<()> {
    let fa = acting(sizes, rng)?;
    let fb = MultiMatrixAlgebra::abelian(rng.random_range(1..=2))?;
    let a = base(sizes, rng, 3)?;
    let h_max = sizes.h.unwrap_or(4);
    let mut drawn = None;
    // some action pairs admit no intertwiners for any small H, so both are redrawn
    for _ in 0..50 {
        let bim = BimoduleStructure::new(
            random_central_action(&fa, &a, true, rng)?,
            random_central_action(&fb, &a, true, rng)?,
        )?;
        let h = BimoduleHilbert::random(&fb, &fa, h_max, rng)?;
        let unital = rng.random_bool(0.5);
        match random_cp_bimodule_map(&bim, &h, rng.random_range(1..=3), unital, rng) {
            Ok(theta) => {
                drawn = Some((bim, h, theta));
                break;
            }
            Err(Error::EmptyIntertwinerSpace | Error::NotUCP(_)) => continue,
            Err(e) => return Err(e),
        }
    }
    let (bim, h, theta) = drawn.ok_or(Error::EmptyIntertwinerSpace)?;

    let d = stinespring_module(&theta, &bim, &h)?;
    let rep = verify_dilation(&d, &theta, &bim, &h, 1e-8)?;
    ck.le("reconstruction_residual", rep.reconstruction_residual, 1e-8);
    ck.le("hom_residual", rep.hom_residual, 1e-8);
    ck.le(
        "bimodule_residual",
        rep.pi_bimodule_residual.max(rep.v_bimodule_residual),
        1e-8,
    );
    ck.le("balancing_residual", rep.balancing_residual, 1e-9);
    ck.holds(
        "K_dim exceeds dim(A)^2 H_dim",
        d.k_dim <= a.dim() * a.dim() * h.dim(),
    );

    let m = minimize_dilation(&d)?;
    ck.holds("minimized dilation is not minimal", m.is_minimal());
    ck.holds(
        "minimized dilation fails verification",
        verify_dilation(&m, &theta, &bim, &h, 1e-8)?.passed,
    );

    let basis = range_commutant(&theta)?;
    let xs: Vec<CMat> = (0..20)
        .map(|_| random_commutant_element(&basis, rng))
        .collect();
    let mut lifts = Vec::with_capacity(xs.len());
    for x in &xs {
        let l = commutant_lift(&m, &theta, x)?;
        ck.le("lift_identity_residual", l.identity_residual, 1e-8);
        ck.le("lift_commutator_residual", l.commutator_residual, 1e-8);
        lifts.push(l.rho);
    }
    for k in 0..5 {
        let (x, y) = (&xs[2 * k], &xs[2 * k + 1]);
        let rho_xy = commutant_lift(&m, &theta, &(x * y))?.rho;
        ck.le(
            "lift_multiplicativity",
            max_abs(&(rho_xy - &lifts[2 * k] * &lifts[2 * k + 1])),
            1e-7,
        );
    }

    // π is itself a representation; its own minimal dilation has V an isometry.
    if let (true, Some(k_actions)) = (m.k_dim > 0, &m.k_actions) {
        let kfull = MultiMatrixAlgebra::full(m.k_dim)?;
        let rep_map = BlockLinearMap::from_fn(&a, &kfull, |x| {
            AlgebraElement::from_blocks(&kfull, vec![m.pi(x)])
        })?;
        let dd = minimize_dilation(&stinespring_module(&rep_map, &bim, k_actions)?)?;
        let vv = &dd.v.adjoint() * &dd.v - CMat::identity(m.k_dim, m.k_dim);
        ck.le("representation_isometry_defect", max_abs(&vv), 1e-10);
        ck.holds(
            "representation dilation is not minimal in K_dim",
            dd.k_dim == m.k_dim,
        );
    }
    Ok(())
}

fn cp1(i: usize, sizes: &Sizes, rng: &mut ChaCha8Rng, ck: &mut Checks) -> Result<()> {
    let fa = acting(sizes, rng)?;
    let a = base(sizes, rng, 3)?;
    let act = random_central_action(&fa, &a, true, rng)?;
    let n = sizes.n.unwrap_or_else(|| rng.random_range(1..=3));
    let mn = MultiMatrixAlgebra::full(n)?;
    let (ln, la) = (
        IndexLabels::unconstrained(n),
        IndexLabels::unconstrained(a.ambient_dim()),
    );
    let mut theta = random_cp_labeled_map(&mn, &a, &ln, &la, rng.random_range(1..=3), rng)?;
    if i % 2 == 1 {
        theta = non_cp(&theta, &random_cp_labeled_map(&mn, &a, &ln, &la, 1, rng)?)?;
    }
    let sigma = cp1_lift(&theta, &act)?;
    ck.le(
        "round_trip",
        cp1_backward(&sigma, &fa, n)?.distance(&theta),
        1e-12,
    );
    let on_matrices = CentralAction::on_itself(&fa)?.amplify(n);
    ck.le(
        "module_residual",
        module_residual(&sigma, &on_matrices, &act)?,
        1e-12,
    );
    let cp = is_cp(&theta);
    ck.count(if cp { "cp" } else { "not_cp" });
    ck.holds("CP differs across the correspondence", cp == is_cp(&sigma));
    let p = cp1_choi_element(&theta)?;
    ck.holds(
        "Choi element positivity differs from CP",
        cp == (p.min_eigenvalue() >= -1e-9),
    );
    ck.le(
        "element_round_trip",
        cp1_from_element(&p, &a, n)?.distance(&theta),
        1e-12,
    );
    match cp1_forward(&theta, &act) {
        Ok(f) => ck.le("forward_matches_lift", f.distance(&sigma), 1e-12),
        Err(Error::NotCP(_)) => ck.holds("CP map rejected by the forward map", !cp),
        Err(e) => return Err(e),
    }
    Ok(())
}

fn cp2(i: usize, sizes: &Sizes, rng: &mut ChaCha8Rng, ck: &mut Checks) -> Result<()> {
    let fa = acting(sizes, rng)?;
    let a = base(sizes, rng, 3)?;
    let act_a = random_central_action(&fa, &a, true, rng)?;
    let n = sizes.n.unwrap_or_else(|| rng.random_range(1..=2));
    let act_t = CentralAction::on_itself(&fa)?.amplify(n);
    let mut phi = random_cp_module_map(&act_a, &act_t, rng.random_range(1..=3), rng.random())?;
    if i % 2 == 1 {
        phi = non_cp(
            &phi,
            &random_cp_module_map(&act_a, &act_t, 1, rng.random())?,
        )?;
    }
    let hat = cp2_forward(&phi, &fa, n)?;
    let back = cp2_backward(&hat, &a, n)?;
    ck.le("round_trip", back.distance(&phi), 1e-12);
    ck.le(
        "reverse_round_trip",
        cp2_forward(&back, &fa, n)?.distance(&hat),
        1e-12,
    );
    let r = module_residual(&hat, &act_a.amplify(n), &CentralAction::on_itself(&fa)?)?;
    ck.le("module_residual", r, 1e-12);
    let cp = is_cp(&phi);
    ck.count(if cp { "cp" } else { "not_cp" });
    ck.holds("CP differs across the correspondence", cp == is_cp(&hat));
    Ok(())
}

fn cp3(_: usize, _: &Sizes, rng: &mut ChaCha8Rng, ck: &mut Checks) -> Result<()> {
    let fa = MultiMatrixAlgebra::abelian(rng.random_range(1..=2))?;
    let a = MultiMatrixAlgebra::random(5, rng)?;
    let act_a = random_central_action(&fa, &a, true, rng)?;
    let act_t = CentralAction::on_itself(&fa)?;
    let theta = random_ccp(&act_a, &act_t, rng)?;
    let system = random_operator_system(&act_a, rng.random_range(0..=2), rng)?;
    let psi = PartialMap::restrict(system, &theta, &act_t)?;
    let ext = arveson_extend(&psi, ExtensionKind::Ccp, opts())?;
    for (label, map) in [("witness", &theta), ("solved", &ext.map)] {
        let audit = positive_extension_audit(&psi, map, 500, rng.random(), 1e-7)?;
        ck.holds(
            &format!("{label} extension is not norm preserving"),
            audit.norm_preserving,
        );
        ck.holds(
            &format!("{label} extension is not positive"),
            audit.positive,
        );
        ck.holds(
            &format!("{label} extension contradicts the audit"),
            audit.consistent(),
        );
        ck.ge("audit_min_eigenvalue", audit.min_eigenvalue, -1e-7);
    }
    Ok(())
}

fn arveson(i: usize, _: &Sizes, rng: &mut ChaCha8Rng, ck: &mut Checks) -> Result<()> {
    let inst = random_arveson_instance(rng)?;
    let ext = arveson_extend(&inst.psi, ExtensionKind::Ccp, opts())?;
    ck.le("agreement_residual", ext.agreement_residual, 1e-7);
    ck.ge("min_choi", ext.choi_min_eigenvalue, -1e-7);
    ck.le("module_residual", ext.module_residual, 1e-7);
    if i % 4 == 0 {
        // ψ(1) has norm above 1, so no c.c.p. extension exists
        let bad = inst.psi.scaled(3.0);
        let o = opts();
        let budget = SolverOptions {
            max_iters: o.max_iters.min(5000),
            ..o
        };
        match arveson_extend(&bad, ExtensionKind::Ccp, budget) {
            Err(Error::Stalled { gap, .. }) => ck.ge("infeasible_gap", gap, 1e-6),
            Ok(_) => ck.holds("norm-violating data reported feasible", false),
            Err(e) => return Err(e),
        }
    }
    Ok(())
}

fn wittstock(_: usize, _: &Sizes, rng: &mut ChaCha8Rng, ck: &mut Checks) -> Result<()> {
    let inst = random_wittstock_instance(rng)?;
    let ext = crate::extension::wittstock_extend(
        &inst.theta0,
        &inst.embedding,
        &inst.bim_a,
        &inst.bim_b,
        opts(),
    )?;
    ck.le("agreement_residual", ext.agreement_residual, 1e-7);
    ck.le("bimodule_residual", ext.bimodule_residual, 1e-7);
    ck.le("cb_excess", ext.cb_bound - ext.cb_original, 1e-3);
    Ok(())
}

/// Block-diagonal subalgebra whose blocks each sit inside blocks of one character.
fn random_submodule_algebra(rng: &mut ChaCha8Rng) -> Result<(Embedding, CentralAction)> {
    let m = rng.random_range(1..=2);
    let acting = MultiMatrixAlgebra::abelian(m)?;
    let sub = MultiMatrixAlgebra::random(3, rng)?;
    let sub_chars: Vec<usize> = (0..sub.num_blocks())
        .map(|_| rng.random_range(0..m))
        .collect();
    let (mut placements, mut blocks, mut chars) = (Vec::new(), Vec::new(), Vec::new());
    for ch in 0..m {
        let members: Vec<usize> = (0..sub.num_blocks())
            .filter(|&s| sub_chars[s] == ch)
            .collect();
        let mut at = 0;
        while at < members.len() {
            let take = rng.random_range(1..=2).min(members.len() - at);
            let mut pl = members[at..at + take].to_vec();
            if rng.random_bool(0.3) {
                pl.push(pl[0]);
            }
            at += take;
            blocks.push(pl.iter().map(|&s| sub.blocks()[s]).sum());
            chars.push(Some(ch));
            placements.push(pl);
        }
    }
    let ambient = MultiMatrixAlgebra::new(&blocks)?;
    let emb = Embedding::block_diagonal(&sub, &ambient, &placements)?;
    Ok((
        emb,
        CentralAction::from_characters(&acting, &ambient, chars)?,
    ))
}

fn expectation(_: usize, _: &Sizes, rng: &mut ChaCha8Rng, ck: &mut Checks) -> Result<()> {
    let (emb, act) = random_submodule_algebra(rng)?;
    let e = injectivity_expectation(&emb, &act, opts())?;
    ck.le("idempotence_residual", e.idempotence_residual, 1e-6);
    ck.le("identity_residual", e.identity_residual, 1e-6);
    ck.le("module_residual", e.module_residual, 1e-7);
    ck.ge("min_choi", e.choi_min_eigenvalue, -1e-7);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(instances: usize) -> Sizes {
        Sizes {
            instances: Some(instances),
            ..Sizes::default()
        }
    }

    #[test]
    fn unknown_suite_is_rejected() {
        assert!(matches!(
            run_suite("unknown", 1, &Sizes::default()),
            Err(Error::UnknownSuite(_))
        ));
    }

    #[test]
    fn fixed_size_dilation_suite() {
        let sizes = Sizes {
            instances: Some(4),
            a: Some(vec![2]),
            h: Some(2),
            ..Sizes::default()
        };
        let rep = run_suite("dial", 7, &sizes).unwrap();
        assert!(rep.all_passed(), "{rep:?}");
        assert!(rep.worst["reconstruction_residual"] <= 1e-8);
    }

    #[test]
    fn cp1_round_trip_is_exact_for_two_by_two() {
        let sizes = Sizes {
            instances: Some(4),
            n: Some(2),
            acting: Some(2),
            ..Sizes::default()
        };
        let rep = run_suite("cp1", 3, &sizes).unwrap();
        assert!(rep.all_passed(), "{rep:?}");
        assert!(rep.worst["round_trip"] <= 1e-12);
        assert_eq!(rep.counts["cp"] + rep.counts["not_cp"], 4);
    }

    #[test]
    fn cheap_suites_pass() {
        for name in [
            "exp",
            "unital",
            "in",
            "ucp-factor",
            "inj",
            "hom",
            "cp2",
            "cp3",
            "expectation",
        ] {
            let rep = run_suite(name, 11, &small(3)).unwrap();
            assert!(rep.all_passed(), "{rep:?}");
        }
    }

    #[test]
    fn runs_are_deterministic() {
        let a = serde_json::to_string(&run_suite("unital", 5, &small(3)).unwrap()).unwrap();
        let b = serde_json::to_string(&run_suite("unital", 5, &small(3)).unwrap()).unwrap();
        assert_eq!(a, b);
    }
}
