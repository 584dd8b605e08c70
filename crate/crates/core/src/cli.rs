//! Command-line front end: problem files in, certificates out.

use std::io::Read;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use crate::actions::{random_central_action, BimoduleHilbert, CentralAction};
use crate::algebra::MultiMatrixAlgebra;
use crate::constructions::{
    assemble_2x2, cp1_backward, cp1_choi_element, cp1_forward, cp2_backward, cp2_forward,
    extend_direct_sum, extend_to_unitization, lift_nuclearity_witness, ucp_rescale,
    unitalize_factorization, unitization_seminorm, unitize, verify_2x2, verify_factorization,
    ExtensionMode, FactorizationStage, FactorizationWitness,
};
use crate::cpcalc::{cb_norm_with, classify, module_residual, BlockLinearMap};
use crate::dilation::{minimize_dilation, stinespring_module, verify_dilation};
use crate::extension::{
    arveson_extend, injectivity_expectation, wittstock_extend, Embedding, ExtensionKind,
    OperatorSystem, PartialMap,
};
use crate::feasibility::{dykstra_solve, ProblemBuilder, SolverOptions};
use crate::io::{
    matrix_from_json, matrix_to_json, Certificate, ElementDesc, ElementWitness, JsonMatrix,
    MapWitness, Problem,
};
use crate::linalg::C64;
use crate::suites::{self, Sizes};
use crate::{Error, Result};

#[derive(Parser, Debug)]
#[command(
    name = "modcp",
    version,
    about = "Completely positive module maps with numerical certificates"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Classify a map: CP, unital, contractive, module.
    Check { file: String },
    /// Module Stinespring dilation of a CP bimodule map into B(H).
    Dilate { file: String },
    /// Extend a partial or subalgebra map.
    Extend {
        #[arg(long, value_enum)]
        mode: ExtendMode,
        file: String,
    },
    /// Unitization of a module action.
    Unitize { file: String },
    /// Completely bounded norm.
    Cbnorm {
        file: String,
        #[arg(long, default_value_t = 1e-4)]
        tol: f64,
    },
    /// Run randomized verification suites.
    Verify {
        #[arg(long)]
        suite: String,
        #[arg(long)]
        seed: u64,
        /// JSON object of instance sizes.
        #[arg(long)]
        sizes: Option<String>,
    },
    /// Quick end-to-end check of the engines.
    Selftest,
    /// Extension of a c.c.p. module map to the unitization of its source.
    ExtendUnital { file: String },
    /// Extension to the direct sum with the acting algebra.
    ExtendSum { file: String },
    /// Check a staged factorization and optionally lift or unitalize it.
    VerifyFactorization { file: String },
    /// Rescale a c.p. module map to a u.c.p. one.
    Rescale { file: String },
    /// Correspondence between maps on M_n and module maps on M_n(𝔄).
    Cp1 { file: String },
    /// Correspondence between maps into M_n(𝔄) and maps on M_n(A).
    Cp2 { file: String },
    /// Consequences of complete positivity of a 2×2 map matrix.
    TwoByTwo { file: String },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ExtendMode {
    Arveson,
    Wittstock,
    Expectation,
}

/// Exit code and captured output of one invocation.
#[derive(Clone, Debug, PartialEq)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

/// Runs the CLI on `args` (including the program name).
pub fn run<I, T>(args: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 3 } else { 0 };
            let text = e.render().to_string();
            return if e.use_stderr() {
                Outcome {
                    code,
                    stdout: String::new(),
                    stderr: text,
                }
            } else {
                Outcome {
                    code,
                    stdout: text,
                    stderr: String::new(),
                }
            };
        }
    };
    let start = Instant::now();
    let mut cert = dispatch(cli.command);
    cert.timing_ms = start.elapsed().as_secs_f64() * 1e3;
    let stderr = cert
        .error
        .clone()
        .map(|e| format!("modcp: {e}\n"))
        .unwrap_or_default();
    let stdout = serde_json::to_string_pretty(&cert).unwrap_or_default() + "\n";
    Outcome {
        code: cert.status.exit_code(),
        stdout,
        stderr,
    }
}

fn dispatch(command: Command) -> Certificate {
    let (task, file, handler): (&str, String, Handler) = match command {
        Command::Check { file } => ("check", file, check),
        Command::Dilate { file } => ("dilate", file, dilate),
        Command::Extend { mode, file } => (
            "extend",
            file,
            match mode {
                ExtendMode::Arveson => extend_arveson,
                ExtendMode::Wittstock => extend_wittstock,
                ExtendMode::Expectation => extend_expectation,
            },
        ),
        Command::Unitize { file } => ("unitize", file, unitize_task),
        Command::Cbnorm { file, tol } => {
            return with_problem("cbnorm", &file, |p, c| cbnorm(p, c, tol));
        }
        Command::Verify { suite, seed, sizes } => return verify(&suite, seed, sizes.as_deref()),
        Command::Selftest => return selftest(),
        Command::ExtendUnital { file } => ("extend-unital", file, extend_unital),
        Command::ExtendSum { file } => ("extend-sum", file, extend_sum),
        Command::VerifyFactorization { file } => ("verify-factorization", file, factorization),
        Command::Rescale { file } => ("rescale", file, rescale),
        Command::Cp1 { file } => ("cp1", file, cp1),
        Command::Cp2 { file } => ("cp2", file, cp2),
        Command::TwoByTwo { file } => ("two-by-two", file, two_by_two),
    };
    with_problem(task, &file, handler)
}

type Handler = fn(&Problem, &mut Certificate) -> Result<()>;

fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidDescriptor(msg.into())
}

fn read_input(path: &str) -> Result<String> {
    let mut text = String::new();
    let r = if path == "-" {
        std::io::stdin().read_to_string(&mut text).map(|_| ())
    } else {
        std::fs::read_to_string(path).map(|t| text = t)
    };
    r.map_err(|e| invalid(format!("cannot read {path}: {e}")))?;
    Ok(text)
}

fn with_problem(
    task: &str,
    path: &str,
    f: impl FnOnce(&Problem, &mut Certificate) -> Result<()>,
) -> Certificate {
    let mut cert = Certificate::new(task);
    let result = read_input(path)
        .and_then(|t| Problem::from_text(&t))
        .and_then(|p| {
            if p.task != task {
                return Err(invalid(format!(
                    "file task '{}' does not match subcommand '{task}'",
                    p.task
                )));
            }
            f(&p, &mut cert)
        });
    match result {
        Ok(()) => cert,
        Err(e) => Certificate::from_error(task, &e),
    }
}

fn opts() -> SolverOptions {
    SolverOptions::from_env()
}

fn action_pair<'p>(p: &'p Problem) -> Result<(&'p CentralAction, &'p CentralAction)> {
    Ok((
        p.action(p.param_str("source_action")?)?,
        p.action(p.param_str("target_action")?)?,
    ))
}

fn check(p: &Problem, c: &mut Certificate) -> Result<()> {
    let theta = p.map(p.param_str("map")?)?;
    let acts = match (p.opt_str("source_action")?, p.opt_str("target_action")?) {
        (Some(a), Some(b)) => Some((p.action(a)?, p.action(b)?)),
        (None, None) => None,
        _ => {
            return Err(invalid(
                "source_action and target_action must be given together",
            ))
        }
    };
    let tol = p.opt_f64("tol")?.unwrap_or(1e-9);
    let class = classify(theta, acts, tol);
    c.residual("min_choi_eigenvalue", class.min_choi_eigenvalue)
        .residual("hermitian_defect", theta.hermitian_defect())
        .residual("unital_defect", theta.unital_defect())
        .value("cp", class.cp)
        .value("ucp", class.ucp())
        .value("ccp", class.ccp());
    if let Some(r) = class.module_residual {
        c.residual("module_residual", r);
    }
    c.value("class", &class);
    Ok(())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct HilbertDesc {
    left_algebra: String,
    right_algebra: String,
    pi_left: Vec<JsonMatrix>,
    pi_right_op: Vec<JsonMatrix>,
}

fn hilbert(p: &Problem, dim: usize) -> Result<BimoduleHilbert> {
    let mats = |ms: &[JsonMatrix]| ms.iter().map(matrix_from_json).collect::<Result<Vec<_>>>();
    match p.param("hilbert") {
        None | Some(serde_json::Value::Null) => {
            let one = MultiMatrixAlgebra::abelian(1)?;
            let id = vec![crate::linalg::CMat::identity(dim, dim)];
            BimoduleHilbert::new(dim, &one, &one, id.clone(), id)
        }
        Some(_) => {
            let h: HilbertDesc = p.param_as("hilbert")?;
            BimoduleHilbert::new(
                dim,
                p.algebra(&h.left_algebra)?,
                p.algebra(&h.right_algebra)?,
                mats(&h.pi_left)?,
                mats(&h.pi_right_op)?,
            )
        }
    }
}

fn dilate(p: &Problem, c: &mut Certificate) -> Result<()> {
    let theta = p.map(p.param_str("map")?)?;
    let dim = match theta.target().blocks() {
        [d] => *d,
        _ => {
            return Err(invalid(
                "dilate needs a map into a single full matrix algebra B(H)",
            ))
        }
    };
    let bim = p.bimodule("bimodule", theta.source())?;
    let h = hilbert(p, dim)?;
    let mut d = stinespring_module(theta, &bim, &h)?;
    let minimal = p.param("minimal").map(|v| {
        v.as_bool()
            .ok_or_else(|| invalid("minimal must be a boolean"))
    });
    if minimal.transpose()?.unwrap_or(true) {
        d = minimize_dilation(&d)?;
    }
    let rep = verify_dilation(&d, theta, &bim, &h, 1e-8)?;
    c.assert_le("reconstruction_residual", rep.reconstruction_residual, 1e-8)
        .assert_le("hom_residual", rep.hom_residual, 1e-8)
        .assert_le("pi_bimodule_residual", rep.pi_bimodule_residual, 1e-8)
        .assert_le("v_bimodule_residual", rep.v_bimodule_residual, 1e-8)
        .assert_le("balancing_residual", rep.balancing_residual, 1e-8)
        .residual("isometry_defect", rep.isometry_defect)
        .value("minimal", d.is_minimal())
        .value("report", &rep)
        .witness("v", matrix_to_json(&d.v))
        .witness("pi", d.pi.iter().map(matrix_to_json).collect::<Vec<_>>());
    Ok(())
}

fn extend_arveson(p: &Problem, c: &mut Certificate) -> Result<()> {
    let (act_a, act_b) = action_pair(p)?;
    let kind = match p.opt_str("kind")?.unwrap_or("ucp") {
        "ucp" => ExtensionKind::Ucp,
        "ccp" => ExtensionKind::Ccp,
        k => return Err(invalid(format!("kind must be ucp or ccp (got '{k}')"))),
    };
    let system = OperatorSystem::new(act_a.target(), p.elements("system")?, act_a)?;
    let psi = PartialMap::new(system, p.elements("values")?, act_b)?;
    let ext = arveson_extend(&psi, kind, opts())?;
    c.assert_le("agreement_residual", ext.agreement_residual, 1e-7)
        .assert_le("module_residual", ext.module_residual, 1e-7)
        .assert_ge("choi_min_eigenvalue", ext.choi_min_eigenvalue, -1e-7)
        .value("solve", &ext.report)
        .witness("map", MapWitness::of(&ext.map));
    Ok(())
}

fn embedding(p: &Problem) -> Result<Embedding> {
    Embedding::new(p.map(p.param_str("embedding")?)?.clone())
}

fn extend_wittstock(p: &Problem, c: &mut Certificate) -> Result<()> {
    let theta0 = p.map(p.param_str("map")?)?;
    let emb = embedding(p)?;
    let bim_a = p.bimodule("bim_a", emb.ambient())?;
    let bim_b = p.bimodule("bim_b", theta0.target())?;
    let w = wittstock_extend(theta0, &emb, &bim_a, &bim_b, opts())?;
    c.assert_le("agreement_residual", w.agreement_residual, 1e-7)
        .assert_le("bimodule_residual", w.bimodule_residual, 1e-7)
        .assert_le("cb_excess", w.cb_bound - w.cb_original, 1e-3)
        .value("cb_original", w.cb_original)
        .value("cb_bound", w.cb_bound)
        .value("solve", &w.report)
        .witness("map", MapWitness::of(&w.map));
    Ok(())
}

fn extend_expectation(p: &Problem, c: &mut Certificate) -> Result<()> {
    let emb = embedding(p)?;
    let act = p.action(p.param_str("action")?)?;
    let e = injectivity_expectation(&emb, act, opts())?;
    c.assert_le("idempotence_residual", e.idempotence_residual, 1e-6)
        .assert_le("identity_residual", e.identity_residual, 1e-6)
        .assert_le("module_residual", e.module_residual, 1e-7)
        .assert_ge("choi_min_eigenvalue", e.choi_min_eigenvalue, -1e-7)
        .value("solve", &e.report)
        .witness("onto_sub", MapWitness::of(&e.onto_sub))
        .witness("expectation", MapWitness::of(&e.expectation));
    Ok(())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PairDesc {
    a: ElementDesc,
    alpha: ElementDesc,
}

fn unitize_task(p: &Problem, c: &mut Certificate) -> Result<()> {
    let act = p.action(p.param_str("action")?)?;
    let u = unitize(act)?;
    c.assert_le(
        "multiplicativity_residual",
        u.multiplicativity_residual(),
        1e-12,
    )
    .assert_le("ideal_residual", u.ideal_residual(), 1e-12)
    .value("algebra_tilde", u.algebra_tilde().blocks())
    .value("action_tilde_characters", u.action_tilde().characters())
    .witness("unit_tilde", ElementWitness::of(&u.unit_tilde()));
    if p.param("element").is_some() {
        let pair: PairDesc = p.param_as("element")?;
        let (a, alpha) = (p.element(&pair.a)?, p.element(&pair.alpha)?);
        let y = u.iso(&a, &alpha)?;
        let seminorm = unitization_seminorm(&u, &a, &alpha)?;
        let model = u.model_norm(&a, &alpha)?;
        c.value("seminorm", seminorm)
            .value("model_norm", model)
            .residual("norm_gap", (seminorm - model).abs())
            .witness("image", ElementWitness::of(&y));
    }
    Ok(())
}

fn cbnorm(p: &Problem, c: &mut Certificate, tol: f64) -> Result<()> {
    if !(tol > 0.0) {
        return Err(invalid("--tol must be positive"));
    }
    let theta = p.map(p.param_str("map")?)?;
    let r = cb_norm_with(theta, tol, opts())?;
    c.value("cb_norm", r.value)
        .value("lower", r.lower)
        .value("solves", r.solves)
        .residual("bracket", r.value - r.lower);
    Ok(())
}

fn verify(suite: &str, seed: u64, sizes: Option<&str>) -> Certificate {
    let mut c = Certificate::new("verify");
    c.seed = Some(seed);
    let result = sizes
        .map(|s| serde_json::from_str::<Sizes>(s).map_err(|e| invalid(format!("--sizes: {e}"))))
        .transpose()
        .and_then(|s| suites::run(suite, seed, &s.unwrap_or_default()));
    let reports = match result {
        Ok(r) => r,
        Err(e) => {
            let mut c = Certificate::from_error("verify", &e);
            c.seed = Some(seed);
            return c;
        }
    };
    for r in &reports {
        for (k, v) in &r.worst {
            c.residual(&format!("{}/{k}", r.suite), *v);
        }
        if !r.all_passed() {
            c.fail(format!(
                "suite {} passed {}/{} instances",
                r.suite, r.passed, r.instances
            ));
        }
    }
    c.value("suites", &reports);
    c
}

fn extend_unital(p: &Problem, c: &mut Certificate) -> Result<()> {
    let theta = p.map(p.param_str("map")?)?;
    let (act_a, act_b) = action_pair(p)?;
    let mode = match p.opt_str("mode")?.unwrap_or("unital-target") {
        "unital-target" => ExtensionMode::UnitalTarget,
        "general" => ExtensionMode::General,
        m => {
            return Err(invalid(format!(
                "mode must be unital-target or general (got '{m}')"
            )))
        }
    };
    let ext = extend_to_unitization(theta, act_a, act_b, mode)?;
    let ua = unitize(act_a)?;
    let module = match mode {
        ExtensionMode::UnitalTarget => module_residual(&ext, ua.action_tilde(), act_b)?,
        ExtensionMode::General => {
            module_residual(&ext, ua.action_tilde(), unitize(act_b)?.action_tilde())?
        }
    };
    c.assert_le("unital_defect", ext.unital_defect(), 1e-12)
        .assert_le("module_residual", module, 1e-9)
        .assert_ge("choi_min_eigenvalue", ext.choi_min_eigenvalue(), -1e-9)
        .value("mode", mode)
        .witness("map", MapWitness::of(&ext));
    if mode == ExtensionMode::UnitalTarget {
        let mut worst: f64 = 0.0;
        for e in theta.source().basis() {
            worst = worst.max((ext.eval(&ua.iota_a(&e)?) - theta.eval(&e)).max_abs());
        }
        c.assert_le("restriction_residual", worst, 1e-12);
    }
    Ok(())
}

fn extend_sum(p: &Problem, c: &mut Certificate) -> Result<()> {
    let theta = p.map(p.param_str("map")?)?;
    let (act_a, act_b) = action_pair(p)?;
    let ext = extend_direct_sum(theta, act_a, act_b)?;
    let ua = unitize(act_a)?;
    c.assert_le("unital_defect", ext.unital_defect(), 1e-12)
        .assert_le(
            "module_residual",
            module_residual(&ext, ua.action_tilde(), act_b)?,
            1e-9,
        )
        .assert_ge("choi_min_eigenvalue", ext.choi_min_eigenvalue(), -1e-9)
        .witness("map", MapWitness::of(&ext));
    Ok(())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct StageDesc {
    k: usize,
    phi: String,
    psi: String,
}

fn factorization(p: &Problem, c: &mut Certificate) -> Result<()> {
    let theta = p.map(p.param_str("map")?)?;
    let (act_a, act_b) = action_pair(p)?;
    let act_e = p.action(p.param_str("factor_action")?)?.clone();
    let stages: Vec<StageDesc> = p.param_as("stages")?;
    let stages = stages
        .iter()
        .map(|s| {
            Ok(FactorizationStage {
                k: s.k,
                phi: p.map(&s.phi)?.clone(),
                psi: p.map(&s.psi)?.clone(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let probes = if p.param("probes").is_some() {
        p.elements("probes")?
    } else {
        Vec::new()
    };
    let w = FactorizationWitness {
        e: act_e.target().clone(),
        act_e,
        stages,
        probes,
    };
    let rep = verify_factorization(theta, act_a, act_b, &w)?;
    c.residual("final_gap", rep.final_gap)
        .value("monotone", rep.monotone)
        .value("report", &rep);
    let flag = |key: &str| p.param(key).and_then(|v| v.as_bool()).unwrap_or(false);
    if flag("lift") {
        let lifted = lift_nuclearity_witness(theta, act_a, act_b, &w)?;
        let lrep = verify_factorization(
            &lifted.theta_tilde,
            &lifted.source_action,
            &lifted.target_action,
            &lifted.witness,
        )?;
        c.assert_le("lifted_gap_excess", lrep.final_gap - rep.final_gap, 1e-9)
            .value("lifted_report", &lrep)
            .witness("theta_tilde", MapWitness::of(&lifted.theta_tilde));
    }
    if flag("unitalize") {
        let u = unitalize_factorization(theta, act_a, act_b, &w, opts())?;
        let ucp_min_choi = u
            .witness
            .stages
            .iter()
            .flat_map(|s| [s.phi.choi_min_eigenvalue(), s.psi.choi_min_eigenvalue()])
            .fold(f64::INFINITY, f64::min);
        let ucp_defect = u
            .witness
            .stages
            .iter()
            .flat_map(|s| [s.phi.unital_defect(), s.psi.unital_defect()])
            .fold(0.0, f64::max);
        c.assert_le("unitalized_unital_defect", ucp_defect, 1e-7)
            .assert_ge("unitalized_min_choi", ucp_min_choi.min(0.0), -1e-7)
            .witness("unitalized_target", MapWitness::of(&u.target));
    }
    Ok(())
}

fn rescale(p: &Problem, c: &mut Certificate) -> Result<()> {
    let theta = p.map(p.param_str("map")?)?;
    let (act_a, act_t) = action_pair(p)?;
    let r = ucp_rescale(theta, act_a, act_t, opts())?;
    c.assert_le("reconstruction_residual", r.residual, 1e-7)
        .assert_le("unital_defect", r.phi.unital_defect(), 1e-7)
        .assert_le(
            "module_residual",
            module_residual(&r.phi, act_a, act_t)?,
            1e-7,
        )
        .assert_ge("choi_min_eigenvalue", r.phi.choi_min_eigenvalue(), -1e-7)
        .value("singular", r.singular)
        .witness("u", ElementWitness::of(&r.u))
        .witness("map", MapWitness::of(&r.phi));
    if let Some(rep) = &r.report {
        c.value("solve", rep);
    }
    Ok(())
}

fn direction(p: &Problem) -> Result<&str> {
    match p.opt_str("direction")?.unwrap_or("forward") {
        d @ ("forward" | "backward") => Ok(d),
        d => Err(invalid(format!(
            "direction must be forward or backward (got '{d}')"
        ))),
    }
}

fn size_param(p: &Problem) -> Result<usize> {
    p.opt_usize("n")?
        .ok_or_else(|| invalid("task_params.n is required"))
}

fn cp1(p: &Problem, c: &mut Certificate) -> Result<()> {
    let theta = p.map(p.param_str("map")?)?;
    if direction(p)? == "forward" {
        let act = p.action(p.param_str("action")?)?;
        let n = theta.source().blocks()[0];
        let sigma = cp1_forward(theta, act)?;
        let module = module_residual(
            &sigma,
            &CentralAction::on_itself(act.source())?.amplify(n),
            act,
        )?;
        c.assert_le(
            "round_trip",
            cp1_backward(&sigma, act.source(), n)?.distance(theta),
            1e-12,
        )
        .assert_le("module_residual", module, 1e-12)
        .residual("choi_min_eigenvalue", sigma.choi_min_eigenvalue())
        .witness(
            "choi_element",
            ElementWitness::of(&cp1_choi_element(theta)?),
        )
        .witness("map", MapWitness::of(&sigma));
    } else {
        let acting = p.algebra(p.param_str("acting")?)?;
        let back = cp1_backward(theta, acting, size_param(p)?)?;
        c.residual("choi_min_eigenvalue", back.choi_min_eigenvalue())
            .witness("map", MapWitness::of(&back));
    }
    Ok(())
}

fn cp2(p: &Problem, c: &mut Certificate) -> Result<()> {
    let theta = p.map(p.param_str("map")?)?;
    let n = size_param(p)?;
    let (out, round_trip) = if direction(p)? == "forward" {
        let acting = p.algebra(p.param_str("acting")?)?;
        let hat = cp2_forward(theta, acting, n)?;
        let rt = cp2_backward(&hat, theta.source(), n)?.distance(theta);
        (hat, rt)
    } else {
        let a = p.algebra(p.param_str("algebra")?)?;
        let phi = cp2_backward(theta, a, n)?;
        let rt = cp2_forward(&phi, theta.target(), n)?.distance(theta);
        (phi, rt)
    };
    c.assert_le("round_trip", round_trip, 1e-12)
        .residual("input_choi_min_eigenvalue", theta.choi_min_eigenvalue())
        .residual("choi_min_eigenvalue", out.choi_min_eigenvalue())
        .witness("map", MapWitness::of(&out));
    Ok(())
}

fn two_by_two(p: &Problem, c: &mut Certificate) -> Result<()> {
    let big = match p.opt_str("map")? {
        Some(m) => p.map(m)?.clone(),
        None => {
            let names: Vec<String> = p.param_as("parts")?;
            let parts = names.iter().map(|n| p.map(n)).collect::<Result<Vec<_>>>()?;
            let parts: [&BlockLinearMap; 4] = parts
                .try_into()
                .map_err(|_| invalid("task_params.parts must name exactly four maps"))?;
            assemble_2x2(parts)?
        }
    };
    let bims = match (p.param("bim_a"), p.param("bim_b")) {
        (None, None) => None,
        (Some(_), Some(_)) => {
            let half = |a: &MultiMatrixAlgebra| {
                let blocks: Vec<usize> = a.blocks().iter().map(|d| d / 2).collect();
                MultiMatrixAlgebra::new(&blocks)
            };
            let (a, b) = (half(big.source())?, half(big.target())?);
            Some((p.bimodule("bim_a", &a)?, p.bimodule("bim_b", &b)?))
        }
        _ => return Err(invalid("bim_a and bim_b must be given together")),
    };
    let seed = p
        .param("seed")
        .map(|v| v.as_u64().ok_or_else(|| invalid("seed must be an integer")))
        .transpose()?;
    let seed = seed.unwrap_or(0);
    c.seed = Some(seed);
    let tol = p.opt_f64("tol")?.unwrap_or(1e-8);
    let trials = p.opt_usize("trials")?.unwrap_or(10);
    let rep = verify_2x2(&big, bims.as_ref().map(|(a, b)| (a, b)), tol, trials, seed)?;
    c.residual("choi_min_eigenvalue", rep.choi_min_eigenvalue)
        .residual("doubled_bimodule_residual", rep.doubled_bimodule_residual)
        .residual("flip_residual", rep.flip_residual)
        .residual("roots_min_eigenvalue", rep.roots_min_eigenvalue)
        .residual("schwarz_min_eigenvalue", rep.schwarz_min_eigenvalue)
        .value("report", &rep);
    if !rep.all_passed() {
        c.fail(format!("assertions passed: {:?}", rep.passed));
    }
    Ok(())
}

fn selftest() -> Certificate {
    let mut c = Certificate::new("selftest");
    c.seed = Some(0);
    if let Err(e) = selftest_checks(&mut c) {
        return Certificate::from_error("selftest", &e);
    }
    c
}

fn selftest_checks(c: &mut Certificate) -> Result<()> {
    let a = MultiMatrixAlgebra::new(&[2, 1])?;
    let class = classify(&BlockLinearMap::identity(&a), None, 1e-9);
    c.value("identity_ucp", class.ucp());
    if !class.ucp() {
        c.fail("identity map is not classified u.c.p.".into());
    }

    let m2 = MultiMatrixAlgebra::full(2)?;
    let id = cb_norm_with(&BlockLinearMap::identity(&m2), 1e-6, opts())?.value;
    let tr = cb_norm_with(&BlockLinearMap::transpose(&m2), 1e-4, opts())?.value;
    c.assert_le("cb_identity_error", (id - 1.0).abs(), 1e-6)
        .assert_le("cb_transpose_error", (tr - 2.0).abs(), 1e-3);

    let pinned = |off: f64| {
        let mut b = ProblemBuilder::new();
        let x = b.add_block(2, true);
        b.add_complex(
            &[(x, 0, 0, C64::new(1.0, 0.0)), (x, 1, 1, C64::new(1.0, 0.0))],
            C64::new(1.0, 0.0),
        );
        b.pin_entry(x, 0, 1, C64::new(off, 0.0));
        dykstra_solve(&b.build(SolverOptions::default()), None)
    };
    let feasible = pinned(0.4)?;
    let infeasible = pinned(0.6)?;
    c.assert_le("feasible_affine_residual", feasible.affine_residual, 1e-7)
        .assert_ge("feasible_psd_residual", feasible.psd_residual, -1e-7)
        .assert_ge("infeasible_gap", infeasible.gap, 1e-6);
    if !feasible.is_feasible() || infeasible.is_feasible() {
        c.fail("closed-form feasibility instances resolved wrongly".into());
    }

    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let fa = MultiMatrixAlgebra::abelian(2)?;
        let base = MultiMatrixAlgebra::random(6, &mut rng)?;
        worst = worst.max(
            random_central_action(&fa, &base, true, &mut rng)?
                .compatibility_residuals()
                .max(),
        );
    }
    c.assert_le("compatibility_residual", worst, 1e-12);

    for (suite, sizes) in [
        ("dial", r#"{"instances": 3}"#),
        ("cp1", r#"{"instances": 4}"#),
    ] {
        let sizes: Sizes = serde_json::from_str(sizes).map_err(|e| invalid(e.to_string()))?;
        let r = suites::run_suite(suite, 0, &sizes)?;
        if !r.all_passed() {
            c.fail(format!("suite {suite}: {:?}", r.failures));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::Status;

    fn run_with_file(cmd: &[&str], body: &str) -> Outcome {
        let dir = std::env::temp_dir().join(format!("modcp-cli-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join(format!("{}.json", cmd.join("_")));
        std::fs::write(&path, body).unwrap();
        let mut args = vec!["modcp"];
        args.extend_from_slice(cmd);
        args.push(path.to_str().unwrap());
        run(args)
    }

    fn cert(o: &Outcome) -> Certificate {
        serde_json::from_str(&o.stdout).unwrap()
    }

    const IDENTITY: &str = r#"{"version": 1, "algebras": {"A": {"blocks": [2, 1]}},
        "maps": {"id": {"source": "A", "target": "A", "kind": "identity"}},
        "task": "check", "task_params": {"map": "id"}}"#;

    #[test]
    fn check_identity_is_cp() {
        let o = run_with_file(&["check"], IDENTITY);
        assert_eq!(o.code, 0, "{}", o.stderr);
        let c = cert(&o);
        assert_eq!(c.status, Status::Ok);
        assert_eq!(c.values["cp"], serde_json::Value::Bool(true));
    }

    #[test]
    fn cbnorm_of_transpose_is_two() {
        let body = r#"{"version": 1, "algebras": {"M2": {"blocks": [2]}},
            "maps": {"t": {"source": "M2", "target": "M2", "kind": "transpose"}},
            "task": "cbnorm", "task_params": {"map": "t"}}"#;
        let o = run_with_file(&["cbnorm"], body);
        assert_eq!(o.code, 0, "{}", o.stderr);
        let v = cert(&o).values["cb_norm"].as_f64().unwrap();
        assert!((v - 2.0).abs() <= 1e-3, "{v}");
    }

    #[test]
    fn unknown_suite_exits_three() {
        let o = run(["modcp", "verify", "--suite", "unknown", "--seed", "1"]);
        assert_eq!(o.code, 3);
        assert_eq!(cert(&o).status, Status::Invalid);
    }

    #[test]
    fn bad_usage_and_task_mismatch_are_invalid() {
        assert_eq!(run(["modcp", "frobnicate"]).code, 3);
        assert_eq!(run(["modcp", "check"]).code, 3);
        assert_eq!(run(["modcp", "--help"]).code, 0);
        assert_eq!(run_with_file(&["unitize"], IDENTITY).code, 3);
        assert_eq!(run(["modcp", "check", "/nonexistent/problem.json"]).code, 3);
    }

    #[test]
    fn verify_is_deterministic_modulo_timing() {
        let args = [
            "modcp",
            "verify",
            "--suite",
            "cp2",
            "--seed",
            "5",
            "--sizes",
            r#"{"instances": 4}"#,
        ];
        let (a, b) = (run(args), run(args));
        assert_eq!(a.code, 0, "{}", a.stdout);
        let (ca, cb) = (cert(&a), cert(&b));
        assert_eq!(ca.seed, Some(5));
        assert_eq!(ca.to_json_without_timing(), cb.to_json_without_timing());
    }

    #[test]
    fn unitize_reports_exact_residuals() {
        let body = r#"{"version": 1,
            "algebras": {"F": {"blocks": [1, 1]}, "A": {"blocks": [2, 1]}},
            "actions": {"act": {"source": "F", "target": "A", "characters": [0, 1]}},
            "task": "unitize", "task_params": {"action": "act"}}"#;
        let o = run_with_file(&["unitize"], body);
        assert_eq!(o.code, 0, "{}", o.stdout);
        assert!(cert(&o).residuals["ideal_residual"] <= 1e-12);
    }

    #[test]
    fn dilate_identity_has_isometric_v() {
        let body = r#"{"version": 1, "algebras": {"M2": {"blocks": [2]}},
            "maps": {"id": {"source": "M2", "target": "M2", "kind": "identity"}},
            "task": "dilate", "task_params": {"map": "id"}}"#;
        let o = run_with_file(&["dilate"], body);
        assert_eq!(o.code, 0, "{}", o.stdout);
        assert!(cert(&o).residuals["isometry_defect"] <= 1e-10);
    }
}
