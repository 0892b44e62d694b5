//! Manifest schema and its translation into engine objects.
//!
//! A manifest is a single JSON document describing one problem: the
//! coefficient field, the operad (builtin name or full presentation), the
//! graded bases with differentials, the structure maps as sparse term
//! lists, optional morphism data, optional provider tables, and the
//! truncation cutoffs.  Every semantic failure is reported with the JSON
//! path that caused it.

use std::collections::BTreeMap;

use serde::Deserialize;
use serde_json::Value;

use homlift::bar::{BarCtx, TermView};
use homlift::coalg::{CellMap, Complex};
use homlift::cyl::{Diagonal, IntervalAction, StandardDiagonal, StandardInterval};
use homlift::error::{Error, Result};
use homlift::etuple::ETuple;
use homlift::field::{Field, Scalar};
use homlift::linalg::SparseMatrix;
use homlift::operad::{builtin_ass, builtin_com, OperadPresentation};
use homlift::perm::Perm;
use homlift::sigma::{BasisItem, GradedSpace, SigmaComponent, SigmaModule};
use homlift::tree::{canonicalize, Node};

use crate::providers::{TableDiagonal, TableInterval};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestDoc {
    pub schema: u32,
    pub field: FieldSpec,
    pub operad: OperadSpec,
    pub cutoffs: CutoffSpec,
    pub source: SpaceSpec,
    pub alpha: MapSpec,
    #[serde(default)]
    pub target: Option<SpaceSpec>,
    #[serde(default)]
    pub beta: Option<MapSpec>,
    #[serde(default)]
    pub f0: Option<Vec<MatrixEntry>>,
    #[serde(default)]
    pub f_zero: Option<MapSpec>,
    #[serde(default)]
    pub f_one: Option<MapSpec>,
    #[serde(default)]
    pub providers: Option<ProvidersSpec>,
}

#[derive(Deserialize)]
#[serde(untagged)]
pub enum FieldSpec {
    Name(String),
    Prime { p: u64 },
}

#[derive(Deserialize)]
#[serde(untagged)]
pub enum OperadSpec {
    Builtin(String),
    Custom(PresentationSpec),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PresentationSpec {
    pub name: String,
    pub components: Vec<ComponentSpec>,
    #[serde(default)]
    pub compositions: Vec<CompositionSpec>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentSpec {
    pub arity: u8,
    pub basis: Vec<BasisItemSpec>,
    /// Action matrices of the adjacent transpositions (1 2), (2 3), ...
    #[serde(default)]
    pub gens: Vec<Vec<MatrixEntry>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompositionSpec {
    pub r: u8,
    pub i: u8,
    pub s: u8,
    pub matrix: Vec<MatrixEntry>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CutoffSpec {
    pub grade: u32,
    pub arity: u8,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceSpec {
    pub basis: Vec<BasisItemSpec>,
    #[serde(default)]
    pub differential: Vec<MatrixEntry>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasisItemSpec {
    pub id: String,
    pub degree: i64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapSpec {
    #[serde(default)]
    pub terms: Vec<TermSpec>,
}

/// One sparse entry of a structure or morphism map: a tree expression whose
/// integer leaves index into `inputs`, the tuple of basis indices fed into
/// those slots, and the values produced on the target basis.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermSpec {
    pub tree: Value,
    pub inputs: Vec<u32>,
    pub values: Vec<(u32, CoefSpec)>,
}

/// Row, column, coefficient.
pub type MatrixEntry = (usize, usize, CoefSpec);

#[derive(Deserialize, Clone)]
#[serde(untagged)]
pub enum CoefSpec {
    Int(i64),
    Str(String),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProvidersSpec {
    #[serde(default)]
    pub interval: Option<IntervalTableSpec>,
    #[serde(default)]
    pub diagonal: Option<DiagonalTableSpec>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntervalTableSpec {
    pub degree_bound: i64,
    #[serde(default)]
    pub entries: Vec<IntervalEntrySpec>,
}

/// Value of one tuple on one interval word.  Words are spelled with the
/// letters "0", "1" and "01"; the value is given by its three coefficients.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntervalEntrySpec {
    pub tuple: Vec<Vec<u8>>,
    pub word: Vec<String>,
    #[serde(default)]
    pub at0: Option<CoefSpec>,
    #[serde(default)]
    pub at1: Option<CoefSpec>,
    #[serde(default)]
    pub seg: Option<CoefSpec>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagonalTableSpec {
    pub weight_bound: u32,
    #[serde(default)]
    pub entries: Vec<DiagonalEntrySpec>,
}

/// Splittings of one cell: each split is a front cell, the residual tuple
/// its back parts compose to, and a coefficient.  Cell expressions use leaf
/// numbers directly.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagonalEntrySpec {
    pub cell: Value,
    pub splits: Vec<SplitSpec>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitSpec {
    pub front: Value,
    pub back: Vec<Vec<u8>>,
    pub coef: CoefSpec,
}

/// A manifest resolved against the engine: everything the commands need.
pub struct Problem {
    pub field: Field,
    pub operad_name: String,
    pub bar: BarCtx,
    pub grade_cutoff: u32,
    pub source: Complex,
    pub alpha: CellMap,
    pub target: Option<Complex>,
    pub beta: Option<CellMap>,
    pub f0: Option<SparseMatrix>,
    pub f_zero_comps: BTreeMap<Node, Vec<(u32, Scalar)>>,
    pub f_one_comps: BTreeMap<Node, Vec<(u32, Scalar)>>,
    pub interval: Box<dyn IntervalAction>,
    pub diagonal: Box<dyn Diagonal>,
}

impl Problem {
    /// The two morphisms of the comparison problem, sharing their
    /// weight-zero block.
    pub fn morphisms(&self) -> Result<(CellMap, CellMap)> {
        let f0 = self
            .f0
            .as_ref()
            .ok_or_else(|| Error::input("manifest.f0: missing, but the command needs a morphism"))?;
        let lower = CellMap {
            w0: f0.clone(),
            comps: self.f_zero_comps.clone(),
            degree: 0,
        };
        let upper = CellMap {
            w0: f0.clone(),
            comps: self.f_one_comps.clone(),
            degree: 0,
        };
        Ok((lower, upper))
    }

    pub fn target_and_beta(&self) -> Result<(&Complex, &CellMap, &SparseMatrix)> {
        match (&self.target, &self.beta, &self.f0) {
            (Some(t), Some(b), Some(f0)) => Ok((t, b, f0)),
            (None, _, _) => Err(Error::input(
                "manifest.target: missing, but the command needs a target algebra",
            )),
            (_, None, _) => Err(Error::input(
                "manifest.beta: missing, but the command needs a target structure map",
            )),
            (_, _, None) => Err(Error::input(
                "manifest.f0: missing, but the command needs a morphism",
            )),
        }
    }
}

fn located(path: &str, msg: impl std::fmt::Display) -> Error {
    Error::input(format!("manifest.{path}: {msg}"))
}

pub fn parse_doc(bytes: &str) -> Result<ManifestDoc> {
    let doc: ManifestDoc = serde_json::from_str(bytes)
        .map_err(|e| Error::input(format!("manifest does not match the schema: {e}")))?;
    if doc.schema != SCHEMA_VERSION {
        return Err(located(
            "schema",
            format!("version {} is not supported (expected {SCHEMA_VERSION})", doc.schema),
        ));
    }
    Ok(doc)
}

fn coef(f: Field, c: &CoefSpec, path: &str) -> Result<Scalar> {
    match c {
        CoefSpec::Int(n) => Ok(Scalar::from_i64(f, *n)),
        CoefSpec::Str(s) => Scalar::parse(f, s).map_err(|e| located(path, e)),
    }
}

fn matrix(
    f: Field,
    rows: usize,
    cols: usize,
    entries: &[MatrixEntry],
    path: &str,
) -> Result<SparseMatrix> {
    let mut m = SparseMatrix::new(rows, cols, f);
    for (k, (r, c, v)) in entries.iter().enumerate() {
        if *r >= rows || *c >= cols {
            return Err(located(
                path,
                format!("entry {k} at ({r},{c}) is outside the {rows}x{cols} block"),
            ));
        }
        m.add_to(*r, *c, &coef(f, v, path)?);
    }
    Ok(m)
}

fn space(f: Field, spec: &SpaceSpec, path: &str) -> Result<Complex> {
    let items: Vec<BasisItem> = spec
        .basis
        .iter()
        .map(|b| BasisItem {
            id: b.id.clone(),
            degree: b.degree,
        })
        .collect();
    let mut seen = std::collections::BTreeSet::new();
    for b in &items {
        if !seen.insert(&b.id) {
            return Err(located(path, format!("duplicate basis id {:?}", b.id)));
        }
    }
    let n = items.len();
    let d = matrix(f, n, n, &spec.differential, &format!("{path}.differential"))?;
    let cx = Complex::new(GradedSpace::new(items), d);
    cx.validate(f, path)?;
    Ok(cx)
}

fn perm(word: &[u8], path: &str) -> Result<Perm> {
    let n = word.len() as u8;
    let mut seen = vec![false; n as usize];
    for &x in word {
        if x == 0 || x > n || seen[x as usize - 1] {
            return Err(located(path, format!("{word:?} is not a permutation of 1..={n}")));
        }
        seen[x as usize - 1] = true;
    }
    Ok(Perm::new(word.to_vec()))
}

fn etuple(words: &[Vec<u8>], path: &str) -> Result<ETuple> {
    if words.is_empty() {
        return Err(located(path, "empty permutation tuple"));
    }
    let perms = words
        .iter()
        .map(|w| perm(w, path))
        .collect::<Result<Vec<_>>>()?;
    if perms.iter().any(|p| p.arity() != perms[0].arity()) {
        return Err(located(path, "tuple mixes arities"));
    }
    ETuple::of(perms).ok_or_else(|| located(path, "degenerate tuple (adjacent repeats)"))
}

/// Parses a nested-array tree expression.  Interior arrays are
/// `[label_id, child, ...]`; bare integers are leaves.  `leaf` maps each
/// integer payload (slot number or leaf number) to the engine payload.
fn tree_expr(bar: &BarCtx, v: &Value, path: &str, leaf: &dyn Fn(u64) -> Result<u32>) -> Result<Node> {
    match v {
        Value::Number(n) => {
            let p = n
                .as_u64()
                .ok_or_else(|| located(path, format!("leaf {n} is not a small nonnegative integer")))?;
            Ok(Node::Leaf(leaf(p)?))
        }
        Value::Array(items) => {
            if items.len() < 3 {
                return Err(located(
                    path,
                    "an interior vertex needs a label and at least two children",
                ));
            }
            let label = items[0]
                .as_u64()
                .ok_or_else(|| located(path, "vertex label must be an integer id"))?;
            let arity = (items.len() - 1) as u8;
            if arity > bar.arity_cutoff {
                return Err(located(
                    path,
                    format!("vertex of arity {arity} exceeds the arity cutoff {}", bar.arity_cutoff),
                ));
            }
            let count = bar.label_count(arity) as u64;
            if label >= count {
                return Err(located(
                    path,
                    format!("label id {label} is out of range at arity {arity} ({count} labels)"),
                ));
            }
            let kids = items[1..]
                .iter()
                .map(|k| tree_expr(bar, k, path, leaf))
                .collect::<Result<Vec<_>>>()?;
            Ok(Node::V {
                arity,
                label: label as u32,
                kids,
            })
        }
        other => Err(located(path, format!("{other} is neither a leaf nor a vertex"))),
    }
}

/// Builds a term-list map.  Leaves of the tree expressions are slot numbers
/// indexing `inputs`; the resulting cells are canonicalized against the
/// source basis and the given values are folded through the canonical sign.
fn cell_map(
    bar: &BarCtx,
    spec: &MapSpec,
    source: &Complex,
    target: &Complex,
    degree: i64,
    path: &str,
) -> Result<CellMap> {
    let f = bar.field();
    let src_degs = source.degrees();
    let view = TermView {
        bar,
        leaf_degrees: &src_degs,
    };
    let mut map = CellMap::zero(f, target.dim(), source.dim(), degree);
    for (k, term) in spec.terms.iter().enumerate() {
        let path = format!("{path}.terms[{k}]");
        let inputs = &term.inputs;
        for (j, i) in inputs.iter().enumerate() {
            if *i as usize >= source.dim() {
                return Err(located(
                    &path,
                    format!("inputs[{j}] = {i} is outside the source basis"),
                ));
            }
        }
        let mut used = vec![false; inputs.len()];
        let node = tree_expr(bar, &term.tree, &path, &|slot| {
            let s = slot as usize;
            if s >= inputs.len() {
                return Err(located(
                    &path,
                    format!("leaf slot {slot} has no entry in inputs (length {})", inputs.len()),
                ));
            }
            Ok(inputs[s])
        })?;
        // every slot must be consumed exactly once, in any order
        let mut slots = Vec::new();
        collect_slots(&term.tree, &mut slots);
        for s in &slots {
            let s = *s as usize;
            if s < used.len() && !used[s] {
                used[s] = true;
            } else {
                return Err(located(&path, format!("leaf slot {s} is repeated or out of range")));
            }
        }
        if used.iter().any(|u| !u) {
            return Err(located(&path, "not every input slot appears in the tree"));
        }
        if matches!(node, Node::Leaf(_)) {
            return Err(located(&path, "bare-leaf terms are not allowed; use a matrix block"));
        }
        let Some((tc, ts)) = canonicalize(&view, &node) else {
            return Err(located(&path, "term is degenerate: it vanishes in coinvariants"));
        };
        let entry = map.comps.entry(tc).or_default();
        for (vi, (b, c)) in term.values.iter().enumerate() {
            if *b as usize >= target.dim() {
                return Err(located(
                    &path,
                    format!("values[{vi}] targets basis index {b} outside the target basis"),
                ));
            }
            let v = coef(f, c, &path)?.mul(&ts);
            match entry.iter_mut().find(|(i, _)| i == b) {
                Some((_, cur)) => *cur = cur.add(&v),
                None => entry.push((*b, v)),
            }
        }
    }
    for (_, vals) in map.comps.iter_mut() {
        vals.retain(|(_, v)| !v.is_zero());
        vals.sort_by_key(|(i, _)| *i);
    }
    map.comps.retain(|_, vals| !vals.is_empty());
    Ok(map)
}

fn collect_slots(v: &Value, out: &mut Vec<u64>) {
    match v {
        Value::Number(n) => {
            if let Some(p) = n.as_u64() {
                out.push(p);
            }
        }
        Value::Array(items) => items.iter().skip(1).for_each(|k| collect_slots(k, out)),
        _ => {}
    }
}

fn field_of(spec: &FieldSpec) -> Result<Field> {
    match spec {
        FieldSpec::Name(s) if s == "Q" => Ok(Field::Q),
        FieldSpec::Name(s) => Err(located("field", format!("unknown field {s:?}"))),
        FieldSpec::Prime { p } => Field::fp(*p).map_err(|e| located("field", e)),
    }
}

fn presentation(f: Field, spec: &OperadSpec, arity_cutoff: u8) -> Result<OperadPresentation> {
    let p = match spec {
        OperadSpec::Builtin(name) if name == "Com" => builtin_com(f, arity_cutoff),
        OperadSpec::Builtin(name) if name == "Ass" => builtin_ass(f, arity_cutoff),
        OperadSpec::Builtin(name) => {
            return Err(located("operad", format!("unknown builtin operad {name:?}")))
        }
        OperadSpec::Custom(ps) => {
            let mut components = BTreeMap::new();
            for (k, comp) in ps.components.iter().enumerate() {
                let path = format!("operad.components[{k}]");
                let items: Vec<BasisItem> = comp
                    .basis
                    .iter()
                    .map(|b| BasisItem {
                        id: b.id.clone(),
                        degree: b.degree,
                    })
                    .collect();
                let dim = items.len();
                let want = comp.arity.saturating_sub(1) as usize;
                if comp.gens.len() != want {
                    return Err(located(
                        &path,
                        format!(
                            "arity {} needs {want} transposition actions, found {}",
                            comp.arity,
                            comp.gens.len()
                        ),
                    ));
                }
                let gens = comp
                    .gens
                    .iter()
                    .map(|g| matrix(f, dim, dim, g, &format!("{path}.gens")))
                    .collect::<Result<Vec<_>>>()?;
                components.insert(
                    comp.arity,
                    SigmaComponent {
                        space: GradedSpace::new(items),
                        gens,
                    },
                );
            }
            let module = SigmaModule { field: f, components };
            let mut compositions = BTreeMap::new();
            for (k, cs) in ps.compositions.iter().enumerate() {
                let path = format!("operad.compositions[{k}]");
                let out = module.dim(cs.r + cs.s - 1);
                let inn = module.dim(cs.r) * module.dim(cs.s);
                compositions.insert((cs.r, cs.i, cs.s), matrix(f, out, inn, &cs.matrix, &path)?);
            }
            OperadPresentation {
                name: ps.name.clone(),
                module,
                compositions,
            }
        }
    };
    p.validate()?;
    Ok(p)
}

/// Resolves a parsed manifest into engine objects, applying cutoff
/// overrides from the command line.
pub fn resolve(
    doc: &ManifestDoc,
    grade_override: Option<u32>,
    arity_override: Option<u8>,
) -> Result<Problem> {
    let f = field_of(&doc.field)?;
    let grade_cutoff = grade_override.unwrap_or(doc.cutoffs.grade);
    let arity_cutoff = arity_override.unwrap_or(doc.cutoffs.arity);
    if grade_cutoff == 0 {
        return Err(located("cutoffs.grade", "grade cutoff must be at least 1"));
    }
    if arity_cutoff < 2 {
        return Err(located("cutoffs.arity", "arity cutoff must be at least 2"));
    }
    let operad = presentation(f, &doc.operad, arity_cutoff)?;
    let operad_name = operad.name.clone();
    // stage windows reach one tuple degree above the grade cutoff
    let bar = BarCtx::new(operad, arity_cutoff, grade_cutoff as i64 + 1)?;

    let source = space(f, &doc.source, "source")?;
    let alpha = cell_map(&bar, &doc.alpha, &source, &source, -1, "alpha")?;
    let src_degs = source.degrees();
    let view_src = TermView {
        bar: &bar,
        leaf_degrees: &src_degs,
    };
    alpha.validate_against(&view_src, &source, &source, "manifest.alpha")?;

    let target = match &doc.target {
        Some(ts) => Some(space(f, ts, "target")?),
        None => None,
    };
    let beta = match (&doc.beta, &target) {
        (Some(bs), Some(t)) => {
            let b = cell_map(&bar, bs, t, t, -1, "beta")?;
            let t_degs = t.degrees();
            let view_t = TermView {
                bar: &bar,
                leaf_degrees: &t_degs,
            };
            b.validate_against(&view_t, t, t, "manifest.beta")?;
            Some(b)
        }
        (Some(_), None) => return Err(located("beta", "given without a target algebra")),
        (None, _) => None,
    };
    let f0 = match (&doc.f0, &target) {
        (Some(entries), Some(t)) => Some(matrix(f, t.dim(), source.dim(), entries, "f0")?),
        (Some(_), None) => return Err(located("f0", "given without a target algebra")),
        (None, _) => None,
    };
    let mut f_zero_comps = BTreeMap::new();
    let mut f_one_comps = BTreeMap::new();
    for (spec, out, path) in [
        (&doc.f_zero, &mut f_zero_comps, "f_zero"),
        (&doc.f_one, &mut f_one_comps, "f_one"),
    ] {
        if let Some(ms) = spec {
            let t = target
                .as_ref()
                .ok_or_else(|| located(path, "given without a target algebra"))?;
            if f0.is_none() {
                return Err(located(path, "given without the weight-zero matrix f0"));
            }
            *out = cell_map(&bar, ms, &source, t, 0, path)?.comps;
        }
    }

    let (interval, diagonal) = providers(&bar, doc.providers.as_ref())?;

    Ok(Problem {
        field: f,
        operad_name,
        bar,
        grade_cutoff,
        source,
        alpha,
        target,
        beta,
        f0,
        f_zero_comps,
        f_one_comps,
        interval,
        diagonal,
    })
}

fn providers(
    bar: &BarCtx,
    spec: Option<&ProvidersSpec>,
) -> Result<(Box<dyn IntervalAction>, Box<dyn Diagonal>)> {
    let f = bar.field();
    let mut interval: Box<dyn IntervalAction> = Box::new(StandardInterval);
    let mut diagonal: Box<dyn Diagonal> = Box::new(StandardDiagonal);
    let Some(spec) = spec else {
        return Ok((interval, diagonal));
    };
    if let Some(it) = &spec.interval {
        let mut entries = BTreeMap::new();
        for (k, e) in it.entries.iter().enumerate() {
            let path = format!("providers.interval.entries[{k}]");
            let tuple = etuple(&e.tuple, &path)?;
            let word = e
                .word
                .iter()
                .map(|w| crate::providers::letter(w, &path))
                .collect::<Result<Vec<_>>>()?;
            let mut value = homlift::cyl::IntervalCochain::zero(f);
            if let Some(c) = &e.at0 {
                value.at0 = coef(f, c, &path)?;
            }
            if let Some(c) = &e.at1 {
                value.at1 = coef(f, c, &path)?;
            }
            if let Some(c) = &e.seg {
                value.seg = coef(f, c, &path)?;
            }
            entries.insert((tuple, word), value);
        }
        interval = Box::new(TableInterval {
            bound: it.degree_bound,
            entries,
        });
    }
    if let Some(dt) = &spec.diagonal {
        let mut entries = BTreeMap::new();
        for (k, e) in dt.entries.iter().enumerate() {
            let path = format!("providers.diagonal.entries[{k}]");
            let cell = tree_expr(bar, &e.cell, &path, &|n| Ok(n as u32))?;
            let mut splits = Vec::new();
            for s in &e.splits {
                let front = tree_expr(bar, &s.front, &path, &|n| Ok(n as u32))?;
                let back = etuple(&s.back, &path)?;
                splits.push((front, back, coef(f, &s.coef, &path)?));
            }
            entries.insert(cell, splits);
        }
        diagonal = Box::new(TableDiagonal {
            bound: dt.weight_bound,
            entries,
        });
    }
    Ok((interval, diagonal))
}
