//! Report structure shared by all commands.  Serialization is
//! deterministic: struct fields emit in declaration order, all maps are
//! ordered, and the timestamp is the only field allowed to differ between
//! two runs on identical inputs (it is appended last and takes no part in
//! any hash).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use homlift::field::Scalar;
use homlift::solver::{ObstructionClass, StageNote};
use homlift::tree::Node;

pub const ENGINE_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Serialize, Deserialize, Debug)]
pub struct Report {
    pub schema: u32,
    pub command: String,
    pub engine_version: String,
    /// Hash of the manifest bytes and the effective flags, not of this
    /// report; two runs agree on it exactly when their inputs agree.
    pub input_hash: String,
    pub verdict: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub field: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub operad: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grade_cutoff: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub arity_cutoff: Option<u8>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stages: Option<Vec<StageLine>>,
    /// Weight-zero block of the produced map, when the command produced one.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub w0: Option<Vec<(usize, usize, String)>>,
    /// Higher components of the produced map, one line per basis cell.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub components: Option<Vec<TermLine>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub obstruction: Option<ObstructionLine>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub blocks: Option<Vec<BlockLine>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub residuals: Option<Vec<ResidualLine>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub basis: Option<Vec<BasisLine>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<LabelLine>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub missing: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub checks: Option<Vec<CheckLine>>,
    pub timestamp: u64,
}

#[derive(Serialize, Deserialize, Debug)]
pub struct StageLine {
    pub stage: u32,
    pub unknowns: usize,
    pub equations: usize,
    pub full_tree_term: bool,
}

/// One cell of a term-list map: the tree with slot-numbered leaves, the
/// basis indices fed into the slots, and the values on the target basis.
#[derive(Serialize, Deserialize, Debug)]
pub struct TermLine {
    pub tree: serde_json::Value,
    pub inputs: Vec<u32>,
    pub values: Vec<(u32, String)>,
}

#[derive(Serialize, Deserialize, Debug)]
pub struct ObstructionLine {
    pub stage: u32,
    pub cocycle: Vec<TermLine>,
    pub cocycle_coords: Vec<String>,
    pub witness: Vec<String>,
    pub mid_dim: usize,
    pub block_kernel: usize,
    pub block_image: usize,
    pub block_quotient: usize,
}

#[derive(Serialize, Deserialize, Debug)]
pub struct BlockLine {
    pub stage: u32,
    pub h1_kernel: usize,
    pub h1_image: usize,
    pub h1_quotient: usize,
    pub h1_mid: usize,
    pub h0_kernel: usize,
    pub h0_image: usize,
    pub h0_quotient: usize,
    pub h0_mid: usize,
}

#[derive(Serialize, Deserialize, Debug)]
pub struct ResidualLine {
    pub map: String,
    pub cells: Vec<TermLine>,
}

#[derive(Serialize, Deserialize, Debug)]
pub struct BasisLine {
    pub arity: u8,
    pub grade: u32,
    pub count: usize,
    pub cells: Vec<serde_json::Value>,
}

#[derive(Serialize, Deserialize, Debug)]
pub struct LabelLine {
    pub arity: u8,
    pub id: u32,
    pub operation: u32,
    pub tuple: Vec<Vec<u8>>,
    pub degree: i64,
}

#[derive(Serialize, Deserialize, Debug)]
pub struct CheckLine {
    pub name: String,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl Report {
    pub fn new(command: &str, input_hash: String, verdict: &str) -> Report {
        Report {
            schema: 1,
            command: command.to_string(),
            engine_version: ENGINE_VERSION.to_string(),
            input_hash,
            verdict: verdict.to_string(),
            field: None,
            operad: None,
            grade_cutoff: None,
            arity_cutoff: None,
            stages: None,
            w0: None,
            components: None,
            obstruction: None,
            blocks: None,
            residuals: None,
            basis: None,
            labels: None,
            missing: None,
            checks: None,
            timestamp: now(),
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serialization");
        s.push('\n');
        s
    }
}

fn now() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

/// Hash of the inputs that determine a report: the manifest bytes and the
/// effective command line.
pub fn input_hash(manifest_bytes: &[u8], flags: &str) -> String {
    let mut h = Sha256::new();
    h.update(manifest_bytes);
    h.update([0u8]);
    h.update(flags.as_bytes());
    hex::encode(h.finalize())
}

pub fn stage_lines(stages: &[StageNote]) -> Vec<StageLine> {
    stages
        .iter()
        .map(|s| StageLine {
            stage: s.stage,
            unknowns: s.unknowns,
            equations: s.equations,
            full_tree_term: s.full_tree_term,
        })
        .collect()
}

/// Renders an engine cell back into the manifest's tree-expression form:
/// leaves become slot numbers in planar order and the payloads move to the
/// inputs tuple.
pub fn term_line(t: &Node, values: &[(u32, Scalar)]) -> TermLine {
    let mut inputs = Vec::new();
    let tree = expr_of(t, &mut inputs);
    TermLine {
        tree,
        inputs,
        values: values.iter().map(|(i, v)| (*i, v.to_string())).collect(),
    }
}

fn expr_of(t: &Node, inputs: &mut Vec<u32>) -> serde_json::Value {
    match t {
        Node::Leaf(p) => {
            inputs.push(*p);
            serde_json::Value::from(inputs.len() - 1)
        }
        Node::V { label, kids, .. } => {
            let mut items = vec![serde_json::Value::from(*label)];
            items.extend(kids.iter().map(|k| expr_of(k, inputs)));
            serde_json::Value::Array(items)
        }
    }
}

/// Renders a cooperad cell (leaf numbers, no inputs tuple).
pub fn cell_expr(t: &Node) -> serde_json::Value {
    match t {
        Node::Leaf(p) => serde_json::Value::from(*p),
        Node::V { label, kids, .. } => {
            let mut items = vec![serde_json::Value::from(*label)];
            items.extend(kids.iter().map(cell_expr));
            serde_json::Value::Array(items)
        }
    }
}

pub fn term_lines(comps: &BTreeMap<Node, Vec<(u32, Scalar)>>) -> Vec<TermLine> {
    comps.iter().map(|(t, vals)| term_line(t, vals)).collect()
}

pub fn obstruction_line(class: &ObstructionClass) -> ObstructionLine {
    ObstructionLine {
        stage: class.stage,
        cocycle: term_lines(&class.cocycle),
        cocycle_coords: class.cocycle_coords.iter().map(|v| v.to_string()).collect(),
        witness: class.witness.iter().map(|v| v.to_string()).collect(),
        mid_dim: class.mid_dim,
        block_kernel: class.block_kernel,
        block_image: class.block_image,
        block_quotient: class.block_quotient,
    }
}

/// The report bytes with the timestamp line removed, for byte-identity
/// comparisons between runs.
pub fn strip_timestamp(json: &str) -> String {
    json.lines()
        .filter(|l| !l.trim_start().starts_with("\"timestamp\""))
        .collect::<Vec<_>>()
        .join("\n")
}
