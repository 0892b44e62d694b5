//! Basis cache: one JSON file per (operad hash, arity, grade) holding the
//! canonical cooperad cells of that block.  Files are keyed and verified by
//! a content hash of the operad presentation and the cutoffs, never by
//! timestamps, and are written atomically so a crashed run cannot leave a
//! torn file behind.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use homlift::bar::{enumerate_cells, BarCtx};
use homlift::error::{Error, Result};
use homlift::operad::OperadPresentation;
use homlift::tree::Node;

use crate::report::cell_expr;

/// Deterministic digest of everything the basis depends on.
pub fn basis_key(operad: &OperadPresentation, arity_cutoff: u8, e_bound: i64) -> String {
    let mut h = Sha256::new();
    h.update(operad.name.as_bytes());
    h.update([0]);
    for (arity, comp) in &operad.module.components {
        h.update([*arity]);
        for item in &comp.space.items {
            h.update(item.id.as_bytes());
            h.update(item.degree.to_le_bytes());
        }
        for g in &comp.gens {
            for ((r, c), v) in g.iter() {
                h.update(r.to_le_bytes());
                h.update(c.to_le_bytes());
                h.update(v.to_string().as_bytes());
            }
        }
    }
    for ((r, i, s), m) in &operad.compositions {
        h.update([*r, *i, *s]);
        for ((row, col), v) in m.iter() {
            h.update(row.to_le_bytes());
            h.update(col.to_le_bytes());
            h.update(v.to_string().as_bytes());
        }
    }
    h.update([0xff]);
    h.update([arity_cutoff]);
    h.update(e_bound.to_le_bytes());
    hex::encode(&h.finalize()[..16])
}

#[derive(Serialize, Deserialize)]
struct CacheFile {
    key: String,
    arity: u8,
    grade: u32,
    cells: Vec<serde_json::Value>,
}

pub struct BasisCache {
    dir: PathBuf,
    key: String,
}

impl BasisCache {
    pub fn new(dir: &Path, key: String) -> Result<BasisCache> {
        std::fs::create_dir_all(dir)
            .map_err(|e| Error::input(format!("cache directory {}: {e}", dir.display())))?;
        Ok(BasisCache {
            dir: dir.to_path_buf(),
            key,
        })
    }

    fn file(&self, arity: u8, grade: u32) -> PathBuf {
        self.dir.join(format!("{}-a{arity}-g{grade}.json", self.key))
    }

    /// The canonical cells with `arity` leaves in the given grade, loaded
    /// from the cache when a fresh entry exists, computed and stored
    /// otherwise.  A file whose embedded key disagrees is stale and is
    /// recomputed in place.
    pub fn cells(&self, bar: &BarCtx, arity: u8, grade: u32) -> Result<Vec<Node>> {
        let path = self.file(arity, grade);
        if let Ok(bytes) = std::fs::read_to_string(&path) {
            if let Ok(cf) = serde_json::from_str::<CacheFile>(&bytes) {
                if cf.key == self.key && cf.arity == arity && cf.grade == grade {
                    return cf
                        .cells
                        .iter()
                        .map(|v| parse_cell(v))
                        .collect::<Result<Vec<_>>>();
                }
            }
        }
        let cells = compute_cells(bar, arity, grade)?;
        let cf = CacheFile {
            key: self.key.clone(),
            arity,
            grade,
            cells: cells.iter().map(cell_expr).collect(),
        };
        let body = serde_json::to_string_pretty(&cf).expect("cache serialization");
        let mut tmp = tempfile::NamedTempFile::new_in(&self.dir)
            .map_err(|e| Error::input(format!("cache write: {e}")))?;
        tmp.write_all(body.as_bytes())
            .map_err(|e| Error::input(format!("cache write: {e}")))?;
        tmp.persist(&path)
            .map_err(|e| Error::input(format!("cache write: {e}")))?;
        Ok(cells)
    }
}

/// Direct enumeration, shared by cold cache fills and cache-free runs.
pub fn compute_cells(bar: &BarCtx, arity: u8, grade: u32) -> Result<Vec<Node>> {
    let mut out = Vec::new();
    if grade == 0 {
        return Ok(if arity == 1 { vec![Node::Leaf(1)] } else { vec![] });
    }
    for weight in 1..=grade {
        for cell in enumerate_cells(bar, arity, weight, None)? {
            if bar.grade(&cell) == grade {
                out.push(cell);
            }
        }
    }
    Ok(out)
}

fn parse_cell(v: &serde_json::Value) -> Result<Node> {
    match v {
        serde_json::Value::Number(n) => n
            .as_u64()
            .map(|p| Node::Leaf(p as u32))
            .ok_or_else(|| Error::input("cache cell leaf is not an integer")),
        serde_json::Value::Array(items) if items.len() >= 3 => {
            let label = items[0]
                .as_u64()
                .ok_or_else(|| Error::input("cache cell label is not an integer"))?;
            let kids = items[1..]
                .iter()
                .map(parse_cell)
                .collect::<Result<Vec<_>>>()?;
            Ok(Node::V {
                arity: (items.len() - 1) as u8,
                label: label as u32,
                kids,
            })
        }
        _ => Err(Error::input("cache cell is neither a leaf nor a vertex")),
    }
}
