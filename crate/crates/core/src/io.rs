//! JSON descriptors for algebras, elements, actions and maps, the problem
//! file that names them, and the certificate written for every task.
//!
//! Complex numbers are `[re, im]` pairs (a bare number is read as real) and
//! matrices are lists of rows.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::actions::{make_action, BimoduleStructure, CentralAction};
use crate::algebra::{AlgebraElement, MultiMatrixAlgebra};
use crate::cpcalc::BlockLinearMap;
use crate::error::{Error, Result};
use crate::linalg::{CMat, C64};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Entry {
    Pair([f64; 2]),
    Real(f64),
}

impl From<Entry> for C64 {
    fn from(e: Entry) -> C64 {
        match e {
            Entry::Pair([re, im]) => C64::new(re, im),
            Entry::Real(re) => C64::new(re, 0.0),
        }
    }
}

pub type JsonMatrix = Vec<Vec<Entry>>;

pub fn matrix_to_json(m: &CMat) -> JsonMatrix {
    (0..m.nrows())
        .map(|i| {
            (0..m.ncols())
                .map(|j| Entry::Pair([m[(i, j)].re, m[(i, j)].im]))
                .collect()
        })
        .collect()
}

pub fn matrix_from_json(m: &JsonMatrix) -> Result<CMat> {
    let rows = m.len();
    let cols = m.first().map_or(0, Vec::len);
    if m.iter().any(|r| r.len() != cols) {
        return Err(Error::InvalidDescriptor("ragged matrix".into()));
    }
    Ok(CMat::from_fn(rows, cols, |i, j| m[i][j].into()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgebraDesc {
    pub blocks: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

/// Largest linear dimension accepted from a file; maps on it already need 16 MiB.
pub const MAX_FILE_ALGEBRA_DIM: usize = 1024;

impl AlgebraDesc {
    pub fn build(&self) -> Result<MultiMatrixAlgebra> {
        let dim = self.blocks.iter().try_fold(0usize, |acc, &d| {
            d.checked_mul(d).and_then(|s| acc.checked_add(s))
        });
        if dim.is_none_or(|d| d > MAX_FILE_ALGEBRA_DIM) {
            return Err(invalid(format!(
                "algebra dimension exceeds {MAX_FILE_ALGEBRA_DIM}"
            )));
        }
        let a = MultiMatrixAlgebra::new(&self.blocks)?;
        Ok(match &self.label {
            Some(l) => a.with_label(l.clone()),
            None => a,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ElementDesc {
    pub algebra: String,
    /// One matrix per block.
    pub data: Vec<JsonMatrix>,
}

pub fn element_from_data(a: &MultiMatrixAlgebra, data: &[JsonMatrix]) -> Result<AlgebraElement> {
    let blocks = data
        .iter()
        .map(matrix_from_json)
        .collect::<Result<Vec<_>>>()?;
    AlgebraElement::from_blocks(a, blocks)
}

pub fn element_to_data(x: &AlgebraElement) -> Vec<JsonMatrix> {
    x.blocks().iter().map(matrix_to_json).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActionDesc {
    pub source: String,
    pub target: String,
    /// Images of the source basis.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<Vec<ElementDesc>>,
    /// Character index per target block, as a shorthand for `rho`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub characters: Option<Vec<Option<usize>>>,
    #[serde(default = "yes")]
    pub unital: bool,
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapDesc {
    pub source: String,
    pub target: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub superop: Option<JsonMatrix>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub choi: Option<JsonMatrix>,
    /// Ambient Kraus operators `v` of shape `N_source × N_target` for `x ↦ Σ v* x v`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kraus: Option<Vec<JsonMatrix>>,
    /// `identity`, `transpose` or `zero`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<String>,
}

/// Self-contained serialization of a map for certificates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MapWitness {
    pub source: Vec<usize>,
    pub target: Vec<usize>,
    pub superop: JsonMatrix,
}

impl MapWitness {
    pub fn of(theta: &BlockLinearMap) -> Self {
        Self {
            source: theta.source().blocks().to_vec(),
            target: theta.target().blocks().to_vec(),
            superop: matrix_to_json(theta.superop()),
        }
    }

    pub fn to_map(&self) -> Result<BlockLinearMap> {
        let source = MultiMatrixAlgebra::new(&self.source)?;
        let target = MultiMatrixAlgebra::new(&self.target)?;
        BlockLinearMap::new(&source, &target, matrix_from_json(&self.superop)?)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ElementWitness {
    pub blocks: Vec<usize>,
    pub data: Vec<JsonMatrix>,
}

impl ElementWitness {
    pub fn of(x: &AlgebraElement) -> Self {
        Self {
            blocks: x.algebra().blocks().to_vec(),
            data: element_to_data(x),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub version: u32,
    #[serde(default)]
    pub algebras: BTreeMap<String, AlgebraDesc>,
    #[serde(default)]
    pub actions: BTreeMap<String, ActionDesc>,
    #[serde(default)]
    pub maps: BTreeMap<String, MapDesc>,
    pub task: String,
    #[serde(default)]
    pub task_params: Value,
}

/// A problem file with every name resolved and validated.
#[derive(Clone, Debug)]
pub struct Problem {
    pub task: String,
    pub params: Value,
    pub algebras: BTreeMap<String, MultiMatrixAlgebra>,
    pub actions: BTreeMap<String, CentralAction>,
    pub maps: BTreeMap<String, BlockLinearMap>,
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidDescriptor(msg.into())
}

impl ProblemFile {
    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| invalid(e.to_string()))
    }

    pub fn resolve(&self) -> Result<Problem> {
        if self.version != 1 {
            return Err(invalid(format!("unsupported version {}", self.version)));
        }
        let mut p = Problem {
            task: self.task.clone(),
            params: self.task_params.clone(),
            algebras: BTreeMap::new(),
            actions: BTreeMap::new(),
            maps: BTreeMap::new(),
        };
        for (name, d) in &self.algebras {
            p.algebras.insert(name.clone(), d.build()?);
        }
        for (name, d) in &self.actions {
            let source = p.algebra(&d.source)?.clone();
            let target = p.algebra(&d.target)?.clone();
            let act = match (&d.rho, &d.characters) {
                (Some(rho), None) => {
                    let images = rho
                        .iter()
                        .map(|e| p.element(e))
                        .collect::<Result<Vec<_>>>()?;
                    make_action(&source, &target, images, d.unital)?
                }
                (None, Some(chars)) => {
                    let act = CentralAction::from_characters(&source, &target, chars.clone())?;
                    if d.unital && !act.is_unital() {
                        return Err(Error::NotUnital(1.0));
                    }
                    act
                }
                _ => {
                    return Err(invalid(format!(
                        "action '{name}' needs exactly one of rho or characters"
                    )))
                }
            };
            p.actions.insert(name.clone(), act);
        }
        for (name, d) in &self.maps {
            let source = p.algebra(&d.source)?;
            let target = p.algebra(&d.target)?;
            let given = [
                d.superop.is_some(),
                d.choi.is_some(),
                d.kraus.is_some(),
                d.kind.is_some(),
            ];
            if given.iter().filter(|&&g| g).count() != 1 {
                return Err(invalid(format!(
                    "map '{name}' needs exactly one of superop, choi, kraus or kind"
                )));
            }
            let map = if let Some(s) = &d.superop {
                BlockLinearMap::new(source, target, matrix_from_json(s)?)?
            } else if let Some(c) = &d.choi {
                BlockLinearMap::from_choi(&matrix_from_json(c)?, source, target)?
            } else if let Some(k) = &d.kraus {
                let ops = k.iter().map(matrix_from_json).collect::<Result<Vec<_>>>()?;
                BlockLinearMap::from_kraus(source, target, &ops)?
            } else {
                let kind = d.kind.as_deref().unwrap_or_default();
                match kind {
                    "zero" => BlockLinearMap::zero(source, target),
                    "identity" | "transpose" => {
                        source.check_same(target)?;
                        if kind == "identity" {
                            BlockLinearMap::identity(source)
                        } else {
                            BlockLinearMap::transpose(source)
                        }
                    }
                    other => return Err(invalid(format!("unknown map kind '{other}'"))),
                }
            };
            p.maps.insert(name.clone(), map);
        }
        Ok(p)
    }
}

impl Problem {
    pub fn from_text(text: &str) -> Result<Self> {
        ProblemFile::parse(text)?.resolve()
    }

    pub fn algebra(&self, name: &str) -> Result<&MultiMatrixAlgebra> {
        self.algebras
            .get(name)
            .ok_or_else(|| invalid(format!("unknown algebra '{name}'")))
    }

    pub fn action(&self, name: &str) -> Result<&CentralAction> {
        self.actions
            .get(name)
            .ok_or_else(|| invalid(format!("unknown action '{name}'")))
    }

    pub fn map(&self, name: &str) -> Result<&BlockLinearMap> {
        self.maps
            .get(name)
            .ok_or_else(|| invalid(format!("unknown map '{name}'")))
    }

    pub fn element(&self, d: &ElementDesc) -> Result<AlgebraElement> {
        element_from_data(self.algebra(&d.algebra)?, &d.data)
    }

    /// Name of the algebra registered as exactly `a`, if any.
    pub fn algebra_name(&self, a: &MultiMatrixAlgebra) -> Option<&str> {
        self.algebras
            .iter()
            .find(|(_, b)| *b == a)
            .map(|(n, _)| n.as_str())
    }

    pub fn param(&self, key: &str) -> Option<&Value> {
        self.params.get(key)
    }

    pub fn param_str(&self, key: &str) -> Result<&str> {
        self.param(key)
            .and_then(Value::as_str)
            .ok_or_else(|| invalid(format!("task_params.{key} must be a string")))
    }

    pub fn opt_str(&self, key: &str) -> Result<Option<&str>> {
        match self.param(key) {
            None | Some(Value::Null) => Ok(None),
            Some(v) => v
                .as_str()
                .map(Some)
                .ok_or_else(|| invalid(format!("task_params.{key} must be a string"))),
        }
    }

    pub fn opt_f64(&self, key: &str) -> Result<Option<f64>> {
        match self.param(key) {
            None | Some(Value::Null) => Ok(None),
            Some(v) => v
                .as_f64()
                .map(Some)
                .ok_or_else(|| invalid(format!("task_params.{key} must be a number"))),
        }
    }

    pub fn opt_usize(&self, key: &str) -> Result<Option<usize>> {
        match self.param(key) {
            None | Some(Value::Null) => Ok(None),
            Some(v) => v.as_u64().map(|n| Some(n as usize)).ok_or_else(|| {
                invalid(format!("task_params.{key} must be a non-negative integer"))
            }),
        }
    }

    /// Deserializes a nested parameter.
    pub fn param_as<T: serde::de::DeserializeOwned>(&self, key: &str) -> Result<T> {
        let v = self.param(key).cloned().unwrap_or(Value::Null);
        serde_json::from_value(v).map_err(|e| invalid(format!("task_params.{key}: {e}")))
    }

    pub fn elements(&self, key: &str) -> Result<Vec<AlgebraElement>> {
        let descs: Vec<ElementDesc> = self.param_as(key)?;
        descs.iter().map(|d| self.element(d)).collect()
    }

    /// `{"left": action, "right": action}`; trivial actions of `ℂ` on `a` when absent.
    pub fn bimodule(&self, key: &str, a: &MultiMatrixAlgebra) -> Result<BimoduleStructure> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Pair {
            left: String,
            right: String,
        }
        match self.param(key) {
            None | Some(Value::Null) => {
                BimoduleStructure::new(CentralAction::trivial(a), CentralAction::trivial(a))
            }
            Some(_) => {
                let p: Pair = self.param_as(key)?;
                BimoduleStructure::new(
                    self.action(&p.left)?.clone(),
                    self.action(&p.right)?.clone(),
                )
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Ok,
    Stalled,
    Invalid,
    Failed,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Ok => 0,
            Status::Stalled => 2,
            Status::Invalid => 3,
            Status::Failed => 4,
        }
    }
}

/// Status that an error maps to: solver stalls are distinguished from invalid input.
pub fn error_status(e: &Error) -> Status {
    match e {
        Error::Stalled { .. } | Error::UpperBoundInfeasible => Status::Stalled,
        _ => Status::Invalid,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub task: String,
    pub status: Status,
    pub residuals: BTreeMap<String, f64>,
    pub values: BTreeMap<String, Value>,
    pub witnesses: BTreeMap<String, Value>,
    pub timing_ms: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl Certificate {
    pub fn new(task: impl Into<String>) -> Self {
        Self {
            task: task.into(),
            status: Status::Ok,
            residuals: BTreeMap::new(),
            values: BTreeMap::new(),
            witnesses: BTreeMap::new(),
            timing_ms: 0.0,
            seed: None,
            error: None,
        }
    }

    pub fn from_error(task: impl Into<String>, e: &Error) -> Self {
        let mut c = Self::new(task);
        c.status = error_status(e);
        c.error = Some(e.to_string());
        if let Error::Stalled { iters, gap } = e {
            c.values.insert("iters".into(), Value::from(*iters));
            c.residuals.insert("gap".into(), *gap);
        }
        c
    }

    pub fn residual(&mut self, name: &str, v: f64) -> &mut Self {
        self.residuals.insert(name.into(), v);
        self
    }

    pub fn value(&mut self, name: &str, v: impl Serialize) -> &mut Self {
        self.values
            .insert(name.into(), serde_json::to_value(v).unwrap_or(Value::Null));
        self
    }

    pub fn witness(&mut self, name: &str, v: impl Serialize) -> &mut Self {
        self.witnesses
            .insert(name.into(), serde_json::to_value(v).unwrap_or(Value::Null));
        self
    }

    /// Records an asserted bound; a violation marks the certificate failed.
    pub fn assert_le(&mut self, name: &str, v: f64, bound: f64) -> &mut Self {
        self.residuals.insert(name.into(), v);
        if !(v <= bound) {
            self.fail(format!("{name} = {v:.3e} exceeds {bound:.1e}"));
        }
        self
    }

    pub fn assert_ge(&mut self, name: &str, v: f64, bound: f64) -> &mut Self {
        self.residuals.insert(name.into(), v);
        if !(v >= bound) {
            self.fail(format!("{name} = {v:.3e} is below {bound:.1e}"));
        }
        self
    }

    pub fn fail(&mut self, msg: String) {
        if self.status == Status::Ok {
            self.status = Status::Failed;
        }
        match &mut self.error {
            Some(e) => {
                e.push_str("; ");
                e.push_str(&msg);
            }
            None => self.error = Some(msg),
        }
    }

    /// Pretty JSON with the timing field zeroed, for byte comparisons.
    pub fn to_json_without_timing(&self) -> String {
        let mut c = self.clone();
        c.timing_ms = 0.0;
        serde_json::to_string_pretty(&c).unwrap_or_default()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const IDENTITY: &str = r#"{
        "version": 1,
        "algebras": {"A": {"blocks": [2]}},
        "maps": {"id": {"source": "A", "target": "A", "kind": "identity"}},
        "task": "check",
        "task_params": {"map": "id"}
    }"#;

    #[test]
    fn parses_and_resolves_names() {
        let p = Problem::from_text(IDENTITY).unwrap();
        assert_eq!(
            p.map("id").unwrap(),
            &BlockLinearMap::identity(&MultiMatrixAlgebra::full(2).unwrap())
        );
        assert_eq!(p.param_str("map").unwrap(), "id");
        assert!(matches!(p.map("nope"), Err(Error::InvalidDescriptor(_))));
    }

    #[test]
    fn rejects_bad_version_and_dangling_names() {
        let bad = IDENTITY.replace("\"version\": 1", "\"version\": 2");
        assert!(matches!(
            Problem::from_text(&bad),
            Err(Error::InvalidDescriptor(_))
        ));
        let dangling = IDENTITY.replace("\"target\": \"A\"", "\"target\": \"B\"");
        assert!(matches!(
            Problem::from_text(&dangling),
            Err(Error::InvalidDescriptor(_))
        ));
    }

    #[test]
    fn actions_from_images_and_characters() {
        let text = r#"{
            "version": 1,
            "algebras": {"C2": {"blocks": [1, 1]}, "A": {"blocks": [1, 2]}},
            "actions": {
                "by_rho": {"source": "C2", "target": "A", "rho": [
                    {"algebra": "A", "data": [[[1]], [[0, 0], [0, 0]]]},
                    {"algebra": "A", "data": [[[0]], [[1, 0], [0, [1, 0]]]]}
                ]},
                "by_chars": {"source": "C2", "target": "A", "characters": [0, 1]}
            },
            "task": "check"
        }"#;
        let p = Problem::from_text(text).unwrap();
        assert_eq!(
            p.action("by_rho").unwrap().characters(),
            p.action("by_chars").unwrap().characters()
        );
    }

    #[test]
    fn matrices_round_trip() {
        let m = CMat::from_fn(2, 3, |i, j| C64::new(i as f64, -(j as f64)));
        assert_eq!(matrix_from_json(&matrix_to_json(&m)).unwrap(), m);
        assert!(matrix_from_json(&vec![vec![Entry::Real(1.0)], vec![]]).is_err());
    }

    #[test]
    fn map_witness_round_trip() {
        let a = MultiMatrixAlgebra::new(&[2, 1]).unwrap();
        let t = BlockLinearMap::transpose(&a);
        assert_eq!(MapWitness::of(&t).to_map().unwrap(), t);
    }

    #[test]
    fn certificate_status_codes() {
        let mut c = Certificate::new("check");
        c.assert_le("r", 1e-3, 1e-6);
        assert_eq!(c.status.exit_code(), 4);
        let s = Certificate::from_error("extend", &Error::Stalled { iters: 3, gap: 0.5 });
        assert_eq!(s.status.exit_code(), 2);
        assert_eq!(
            Certificate::from_error("verify", &Error::UnknownSuite("x".into()))
                .status
                .exit_code(),
            3
        );
    }
}
