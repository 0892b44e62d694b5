//! The stagewise realization machinery: pushing a weight-one action down to
//! homology through a splitting, solving the lifting equations grade by
//! grade, and reporting the obstruction groups around each stage.

use std::collections::BTreeMap;

use crate::bar::{BarCtx, TermView};
use crate::chain::{chain_add, chain_add_all, chain_is_zero, Chain};
use crate::coalg::{
    check_morphism, expand_morphism, full_differential, validate_structure, CellMap, Complex,
};
use crate::dercx::{gamma_block, matrix_col, terms_of_grade, window, DerEnv, GammaBlock};
use crate::error::{Error, Result};
use crate::field::Scalar;
use crate::linalg::{rank, solve, subquotient_dims, SparseMatrix};
use crate::sigma::GradedSpace;
use crate::tree::{canonicalize, Node};

/// The realized morphism: the weight-zero block plus one equivariant
/// component per positive grade, all sharing homological degree zero.
pub type MorphismComponents = CellMap;

/// Certificate that one stage's linear system has no solution.
#[derive(Debug)]
pub struct ObstructionClass {
    pub stage: u32,
    /// Right-hand side of the failed stage, presented on basis terms.
    pub cocycle: BTreeMap<Node, Vec<(u32, Scalar)>>,
    pub cocycle_coords: Vec<Scalar>,
    /// Left-kernel vector of the stage matrix pairing nontrivially with the
    /// cocycle.
    pub witness: Vec<Scalar>,
    pub mid_dim: usize,
    /// Dimensions of the obstruction block the class lives in: cocycles,
    /// coboundaries, and their quotient at the failed stage.
    pub block_kernel: usize,
    pub block_image: usize,
    pub block_quotient: usize,
}

/// What one solved (or failed) stage looked like.
#[derive(Debug)]
pub struct StageNote {
    pub stage: u32,
    pub unknowns: usize,
    pub equations: usize,
    /// Whether the whole-tree insertion of the source structure fed the
    /// right-hand side at this stage.
    pub full_tree_term: bool,
}

pub enum RealizeOutcome {
    Realized {
        f: MorphismComponents,
        stages: Vec<StageNote>,
    },
    Obstructed {
        class: ObstructionClass,
        stages: Vec<StageNote>,
    },
}

/// Shape and homogeneity of a degree-`shift` matrix block between two
/// graded bases.
fn check_block(
    name: &str,
    m: &SparseMatrix,
    tgt: &[i64],
    src: &[i64],
    shift: i64,
) -> Result<()> {
    if m.rows != tgt.len() || m.cols != src.len() {
        return Err(Error::input(format!(
            "{name}: block is {}x{}, expected {}x{}",
            m.rows,
            m.cols,
            tgt.len(),
            src.len()
        )));
    }
    for ((r, c), v) in m.iter() {
        if !v.is_zero() && tgt[*r] != src[*c] + shift {
            return Err(Error::input(format!(
                "{name}: entry ({r},{c}) violates degree homogeneity"
            )));
        }
    }
    Ok(())
}

/// Pushes a weight-one action on a module with differential down to the
/// given homology basis through a splitting.  `section` embeds the homology
/// basis into the cycles; the induced value on a tuple of classes is the
/// class of the action on their images.
pub fn induce_homology_action(
    bar: &BarCtx,
    a: &Complex,
    alpha: &CellMap,
    section: &SparseMatrix,
    homology: &GradedSpace,
) -> Result<CellMap> {
    let f = bar.field();
    a.validate(f, "module")?;
    let a_degs = a.degrees();
    let h_degs: Vec<i64> = homology.items.iter().map(|i| i.degree).collect();
    let view_a = TermView {
        bar,
        leaf_degrees: &a_degs,
    };
    alpha.validate_against(&view_a, a, a, "action")?;
    check_block("section", section, &a_degs, &h_degs, 0)?;
    if !a.d.mul_mat(section).is_zero() {
        return Err(Error::input("section image is not contained in the cycles"));
    }
    let rd = rank(&a.d);
    let mut combo = SparseMatrix::new(a.dim(), homology.dim() + a.dim(), f);
    for ((r, c), v) in section.iter() {
        combo.set(*r, *c, v.clone());
    }
    for ((r, c), v) in a.d.iter() {
        combo.set(*r, homology.dim() + *c, v.clone());
    }
    if rank(&combo) != homology.dim() + rd {
        return Err(Error::input(
            "not a section: the picked classes are dependent modulo boundaries",
        ));
    }
    if homology.dim() + 2 * rd != a.dim() {
        return Err(Error::input(
            "splitting does not span the cycles: wrong homology dimension",
        ));
    }

    let class_of = |v: &Chain<u32>| -> Result<Vec<(u32, Scalar)>> {
        let mut dense = vec![Scalar::zero(f); a.dim()];
        for (i, c) in v {
            dense[*i as usize] = c.clone();
        }
        let out = solve(&combo, &dense)?;
        let sol = out.solution.ok_or_else(|| {
            Error::internal("a checked cycle failed to decompose over the splitting")
        })?;
        Ok(sol[..homology.dim()]
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.is_zero())
            .map(|(i, c)| (i as u32, c.clone()))
            .collect())
    };

    let mut comps = BTreeMap::new();
    if homology.dim() > 0 {
        let hmin = h_degs.iter().copied().min().unwrap();
        let hmax = h_degs.iter().copied().max().unwrap();
        for t in terms_of_grade(bar, &h_degs, 1, hmin + 1, hmax + 1)? {
            let Node::V { arity, label, kids } = &t else {
                continue;
            };
            // substitute the section images of the classes and act
            let mut picks: Vec<(Vec<u32>, Scalar)> = vec![(Vec::new(), Scalar::one(f))];
            for k in kids {
                let Node::Leaf(hidx) = k else { unreachable!() };
                let col = matrix_col(section, *hidx as usize);
                let mut next = Vec::with_capacity(picks.len() * col.len());
                for (fill, cf) in &picks {
                    for (ai, av) in &col {
                        let mut f2 = fill.clone();
                        f2.push(*ai);
                        next.push((f2, cf.mul(av)));
                    }
                }
                picks = next;
            }
            let mut value: Chain<u32> = Chain::new();
            for (fill, cf) in picks {
                let cor = Node::V {
                    arity: *arity,
                    label: *label,
                    kids: fill.into_iter().map(Node::Leaf).collect(),
                };
                if let Some((cn, cs)) = canonicalize(&view_a, &cor) {
                    for (ai, av) in alpha.eval_cell(&cn) {
                        chain_add(&mut value, ai, cf.mul(&cs).mul(&av));
                    }
                }
            }
            if chain_is_zero(&value) {
                continue;
            }
            let mut dense = vec![Scalar::zero(f); a.dim()];
            for (i, c) in &value {
                dense[*i as usize] = c.clone();
            }
            if a.d.mul_vec(&dense).iter().any(|v| !v.is_zero()) {
                return Err(Error::input(format!(
                    "the action does not preserve cycles on {t:?}"
                )));
            }
            let cls = class_of(&value)?;
            if !cls.is_empty() {
                comps.insert(t, cls);
            }
        }
    }
    Ok(CellMap {
        w0: SparseMatrix::new(homology.dim(), homology.dim(), f),
        comps,
        degree: -1,
    })
}

/// Shared validation of the two structures a solver connects: complexes
/// with zero differentials and homogeneous structure maps squaring to zero
/// within the window.  Returns the two degree vectors.
pub(crate) fn validate_structures(
    bar: &BarCtx,
    a: &Complex,
    b: &Complex,
    alpha: &CellMap,
    beta: &CellMap,
    grade_cutoff: u32,
) -> Result<(Vec<i64>, Vec<i64>)> {
    let f = bar.field();
    a.validate(f, "source complex")?;
    b.validate(f, "target complex")?;
    if !a.d.is_zero() || !b.d.is_zero() {
        return Err(Error::input(
            "the stage solvers require zero differentials; reduce to homology first",
        ));
    }
    let a_degs = a.degrees();
    let b_degs = b.degrees();
    let view_a = TermView {
        bar,
        leaf_degrees: &a_degs,
    };
    let view_b = TermView {
        bar,
        leaf_degrees: &b_degs,
    };
    alpha.validate_against(&view_a, a, a, "source structure")?;
    beta.validate_against(&view_b, b, b, "target structure")?;
    if !alpha.w0.is_zero() || !beta.w0.is_zero() {
        return Err(Error::input(
            "structure counit parts must equal the (zero) differentials",
        ));
    }

    let square = |view: &TermView,
                  m: &CellMap,
                  degs: &[i64],
                  name: &str|
     -> Result<()> {
        if degs.is_empty() {
            return Ok(());
        }
        let lo = degs.iter().copied().min().unwrap() + 2;
        let hi = degs.iter().copied().max().unwrap() + 2;
        let mut terms = Vec::new();
        for g in 1..=grade_cutoff + 1 {
            terms.extend(terms_of_grade(bar, degs, g, lo, hi)?);
        }
        let bad = validate_structure(view, m, &terms)?;
        if let Some((t, r)) = bad.iter().next() {
            return Err(Error::input(format!(
                "{name} does not square to zero: residual on {t:?} is {r:?} ({} cells total)",
                bad.len()
            )));
        }
        Ok(())
    };
    square(&view_a, alpha, &a_degs, "source structure")?;
    square(&view_b, beta, &b_degs, "target structure")?;
    Ok((a_degs, b_degs))
}

/// Full validation for the realization solvers: the structures, plus a
/// weight-zero map that is a morphism of the strict parts.
fn validate_problem(
    bar: &BarCtx,
    a: &Complex,
    b: &Complex,
    alpha: &CellMap,
    beta: &CellMap,
    f0: &SparseMatrix,
    grade_cutoff: u32,
) -> Result<()> {
    let (a_degs, b_degs) = validate_structures(bar, a, b, alpha, beta, grade_cutoff)?;
    check_block("weight-zero map", f0, &b_degs, &a_degs, 0)?;
    if !b_degs.is_empty() {
        let view_a = TermView {
            bar,
            leaf_degrees: &a_degs,
        };
        let view_b = TermView {
            bar,
            leaf_degrees: &b_degs,
        };
        let bmin = b_degs.iter().copied().min().unwrap();
        let bmax = b_degs.iter().copied().max().unwrap();
        let f_zero = CellMap {
            w0: f0.clone(),
            comps: BTreeMap::new(),
            degree: 0,
        };
        let g1 = terms_of_grade(bar, &a_degs, 1, bmin + 1, bmax + 1)?;
        let bad = check_morphism(&view_a, &view_b, alpha, beta, &f_zero, &g1)?;
        if let Some((t, r)) = bad.iter().next() {
            return Err(Error::input(format!(
                "the weight-zero map is not a morphism of the strict structures: residual on {t:?} is {r:?}"
            )));
        }
    }
    Ok(())
}

pub(crate) fn verify_witness(m: &SparseMatrix, w: &[Scalar], rhs: &[Scalar]) -> Result<()> {
    let wm = m.transpose().mul_vec(w);
    if wm.iter().any(|v| !v.is_zero()) {
        return Err(Error::internal("witness does not annihilate the stage matrix"));
    }
    let pair = w
        .iter()
        .zip(rhs)
        .fold(Scalar::zero(m.field), |acc, (a, b)| acc.add(&a.mul(b)));
    if pair.is_zero() {
        return Err(Error::internal("witness pairs to zero with the right-hand side"));
    }
    Ok(())
}

/// Lifts the weight-zero morphism grade by grade up to the cutoff.  Each
/// stage solves a linear system whose right-hand side collects everything
/// already known; an unsolvable stage returns its certified obstruction.
/// `perturb` optionally shifts the solution at one stage by a kernel vector,
/// to check that later obstructions do not depend on the choice made.
pub fn realize(
    bar: &BarCtx,
    a: &Complex,
    b: &Complex,
    alpha: &CellMap,
    beta: &CellMap,
    f0: &SparseMatrix,
    grade_cutoff: u32,
    perturb: Option<(u32, usize)>,
) -> Result<RealizeOutcome> {
    let f = bar.field();
    validate_problem(bar, a, b, alpha, beta, f0, grade_cutoff)?;
    let a_degs = a.degrees();
    let b_degs = b.degrees();
    let view_a = TermView {
        bar,
        leaf_degrees: &a_degs,
    };
    let view_b = TermView {
        bar,
        leaf_degrees: &b_degs,
    };
    let env = DerEnv {
        bar,
        a_degs: &a_degs,
        b_degs: &b_degs,
        alpha,
        beta,
        f0,
    };
    let mut f_known = CellMap {
        w0: f0.clone(),
        comps: BTreeMap::new(),
        degree: 0,
    };
    let mut stages = Vec::new();
    for d in 1..=grade_cutoff {
        let win = window(&env, d, 0)?;
        let mut values: BTreeMap<Node, Chain<u32>> = BTreeMap::new();
        let mut full_tree = false;
        for t in &win.mid.cells {
            let phi = expand_morphism(&view_a, &view_b, &f_known, t)?;
            let mut r = beta.eval_chain(f, &phi);
            let dt = full_differential(&view_a, alpha, t)?;
            let known = f_known.eval_chain(f, &dt);
            chain_add_all(&mut r, &known, &Scalar::one(f).neg());
            if !full_tree {
                full_tree = alpha
                    .eval_cell(t)
                    .iter()
                    .any(|(i, v)| !v.is_zero() && !matrix_col(f0, *i as usize).is_empty());
            }
            if !chain_is_zero(&r) {
                values.insert(t.clone(), r);
            }
        }
        let rhs = win.mid.coords(f, &values)?;
        if win.d_out.mul_vec(&rhs).iter().any(|v| !v.is_zero()) {
            return Err(Error::internal(format!(
                "stage-{d} right-hand side is not a cocycle: sign conventions are broken"
            )));
        }
        let note = StageNote {
            stage: d,
            unknowns: win.cols.dim(),
            equations: win.mid.dim(),
            full_tree_term: full_tree,
        };
        let out = solve(&win.d_in, &rhs)?;
        match out.solution {
            Some(mut x) => {
                if let Some((pd, ki)) = perturb {
                    if pd == d && !out.kernel.is_empty() {
                        let kv = &out.kernel[ki % out.kernel.len()];
                        for (xi, kvi) in x.iter_mut().zip(kv) {
                            *xi = xi.add(kvi);
                        }
                    }
                }
                for (t, vals) in win.cols.components(&x) {
                    f_known.comps.insert(t, vals);
                }
                stages.push(note);
            }
            None => {
                let w = out
                    .witness
                    .ok_or_else(|| Error::internal("unsolvable stage without a witness"))?;
                verify_witness(&win.d_in, &w, &rhs)?;
                let sq = subquotient_dims(&win.d_out, &win.d_in)?;
                stages.push(note);
                return Ok(RealizeOutcome::Obstructed {
                    class: ObstructionClass {
                        stage: d,
                        cocycle: win.mid.components(&rhs),
                        cocycle_coords: rhs,
                        witness: w,
                        mid_dim: win.mid.dim(),
                        block_kernel: sq.dim_kernel,
                        block_image: sq.dim_image,
                        block_quotient: sq.dim_quotient,
                    },
                    stages,
                });
            }
        }
    }
    // independent residual check over the whole solved range
    if !b_degs.is_empty() {
        let bmin = b_degs.iter().copied().min().unwrap();
        let bmax = b_degs.iter().copied().max().unwrap();
        let mut terms = Vec::new();
        for g in 1..=grade_cutoff + 1 {
            terms.extend(terms_of_grade(bar, &a_degs, g, bmin + 1, bmax + 1)?);
        }
        let bad = check_morphism(&view_a, &view_b, alpha, beta, &f_known, &terms)?;
        if let Some((t, r)) = bad.iter().next() {
            return Err(Error::internal(format!(
                "realized morphism fails the independent residual check on {t:?}: {r:?}"
            )));
        }
    }
    Ok(RealizeOutcome::Realized { f: f_known, stages })
}

/// Obstruction-group dimensions around every stage up to the cutoff, after
/// the same validation as the realization solver.
pub fn gamma_cohomology(
    bar: &BarCtx,
    a: &Complex,
    b: &Complex,
    alpha: &CellMap,
    beta: &CellMap,
    f0: &SparseMatrix,
    grade_cutoff: u32,
) -> Result<Vec<GammaBlock>> {
    validate_problem(bar, a, b, alpha, beta, f0, grade_cutoff)?;
    let a_degs = a.degrees();
    let b_degs = b.degrees();
    let env = DerEnv {
        bar,
        a_degs: &a_degs,
        b_degs: &b_degs,
        alpha,
        beta,
        f0,
    };
    (1..=grade_cutoff).map(|d| gamma_block(&env, d)).collect()
}
