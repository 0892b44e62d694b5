//! Shared fixtures for the unit tests: strict structure maps over small
//! graded-commutative algebras.

use std::collections::BTreeMap;

use crate::bar::{BarCtx, TermView};
use crate::coalg::CellMap;
use crate::field::{Field, Scalar};
use crate::linalg::SparseMatrix;
use crate::tree::{canonicalize, Node};

/// Strict structure map: the given product on every degree-zero label,
/// recorded on the self-canonical corollas.
pub fn strict_map(
    bar: &BarCtx,
    degs: &[i64],
    prods: &dyn Fn(&[u32]) -> Vec<(u32, Scalar)>,
) -> CellMap {
    let f = bar.field();
    let view = TermView {
        bar,
        leaf_degrees: degs,
    };
    let dim = degs.len() as u32;
    let mut comps = BTreeMap::new();
    for r in 2..=bar.arity_cutoff {
        for li in 0..bar.label_count(r) as u32 {
            if bar.suspended_degree(r, li) != 1 {
                continue;
            }
            let mut tup = vec![0u32; r as usize];
            'tuples: loop {
                let kids: Vec<Node> = tup.iter().map(|i| Node::Leaf(*i)).collect();
                let t = Node::V {
                    arity: r,
                    label: li,
                    kids,
                };
                if let Some((cn, _)) = canonicalize(&view, &t) {
                    if cn == t {
                        let v = prods(&tup);
                        if !v.is_empty() {
                            comps.insert(t, v);
                        }
                    }
                }
                let mut k = r as usize;
                loop {
                    if k == 0 {
                        break 'tuples;
                    }
                    k -= 1;
                    if tup[k] + 1 < dim {
                        let v = tup[k] + 1;
                        tup[k..].iter_mut().for_each(|x| *x = v);
                        break;
                    }
                }
            }
        }
    }
    CellMap {
        w0: SparseMatrix::new(degs.len(), degs.len(), f),
        comps,
        degree: -1,
    }
}

/// Graded-commutative product on the span of square-free generator subsets,
/// indexed by bitmask.  Mask 0 is the unit; each generator is odd.
pub fn wedge_products(f: Field, gens: u32) -> impl Fn(&[u32]) -> Vec<(u32, Scalar)> {
    move |tup: &[u32]| {
        let mut mask = 0u32;
        let mut sign = 0i64;
        for &m in tup {
            if mask & m != 0 {
                return vec![];
            }
            for i in 0..gens {
                if m & (1 << i) != 0 {
                    sign += i64::from((mask >> (i + 1)).count_ones());
                }
            }
            mask |= m;
        }
        vec![(mask, Scalar::sign(f, sign))]
    }
}

pub fn mask_degs(gens: u32) -> Vec<i64> {
    (0..1u32 << gens)
        .map(|m| i64::from(m.count_ones()))
        .collect()
}
