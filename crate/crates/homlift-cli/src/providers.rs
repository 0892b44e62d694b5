//! Provider implementations backed by manifest data tables.  A table
//! declares the range it covers; lookups beyond the range or absent from
//! the table fail with a capability error, which the comparison solver
//! reports as an insufficient provider rather than a wrong answer.

use std::collections::BTreeMap;

use homlift::bar::BarCtx;
use homlift::cyl::{Diagonal, IntervalAction, IntervalBasis, IntervalCochain};
use homlift::error::{Error, Result};
use homlift::etuple::ETuple;
use homlift::field::{Field, Scalar};
use homlift::tree::Node;

pub fn letter(s: &str, path: &str) -> Result<IntervalBasis> {
    match s {
        "0" => Ok(IntervalBasis::V0),
        "1" => Ok(IntervalBasis::V1),
        "01" => Ok(IntervalBasis::Seg),
        other => Err(Error::input(format!(
            "manifest.{path}: unknown interval letter {other:?} (expected \"0\", \"1\" or \"01\")"
        ))),
    }
}

fn spell(word: &[IntervalBasis]) -> String {
    word.iter()
        .map(|b| match b {
            IntervalBasis::V0 => "0",
            IntervalBasis::V1 => "1",
            IntervalBasis::Seg => "01",
        })
        .collect::<Vec<_>>()
        .join(" ")
}

pub struct TableInterval {
    pub bound: i64,
    pub entries: BTreeMap<(ETuple, Vec<IntervalBasis>), IntervalCochain>,
}

impl IntervalAction for TableInterval {
    fn degree_bound(&self) -> i64 {
        self.bound
    }

    fn act(&self, _f: Field, e: &ETuple, eps: &[IntervalBasis]) -> Result<IntervalCochain> {
        let d = e.degree();
        if d > self.bound {
            return Err(Error::capability(format!(
                "interval action at tuple degree {d} is outside the loaded table (bound {})",
                self.bound
            )));
        }
        match self.entries.get(&(e.clone(), eps.to_vec())) {
            Some(v) => Ok(v.clone()),
            None => Err(Error::capability(format!(
                "interval action table has no entry for a degree-{d} tuple on the word {}",
                spell(eps)
            ))),
        }
    }
}

pub struct TableDiagonal {
    pub bound: u32,
    pub entries: BTreeMap<Node, Vec<(Node, ETuple, Scalar)>>,
}

impl Diagonal for TableDiagonal {
    fn weight_bound(&self) -> u32 {
        self.bound
    }

    fn eval(&self, bar: &BarCtx, cell: &Node) -> Result<Vec<(Node, ETuple, Scalar)>> {
        let w = cell.weight();
        if w > self.bound {
            return Err(Error::capability(format!(
                "diagonal splitting at weight {w} is outside the loaded table (bound {})",
                self.bound
            )));
        }
        if w == 0 {
            // leaves split trivially; tables never need to list them
            return Ok(vec![(
                cell.clone(),
                ETuple::identity(1),
                Scalar::one(bar.field()),
            )]);
        }
        match self.entries.get(cell) {
            Some(v) => Ok(v.clone()),
            None => Err(Error::capability(format!(
                "diagonal table has no entry for a weight-{w} cell"
            ))),
        }
    }
}
