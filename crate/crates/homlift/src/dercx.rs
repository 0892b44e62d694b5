//! Cochain blocks for the stagewise solvers.  A cochain assigns to every
//! canonical term cell of one grade a value in the target basis; its
//! differential reads the unknown on the cell boundary and on the weight-one
//! insertions of the source structure, and subtracts the weight-one target
//! product with one input routed through the unknown and the rest through
//! the weight-zero morphism.  Consecutive blocks form the windows whose
//! subquotients are the obstruction groups.

use std::collections::{BTreeMap, BTreeSet};

use crate::bar::{differential, BarCtx, QView, TermView};
use crate::chain::Chain;
use crate::coalg::{coderivation_apply, enumerate_terms, CellMap};
use crate::error::{Error, Result};
use crate::field::{Field, Scalar};
use crate::linalg::{subquotient_dims, SparseMatrix, Subquotient};
use crate::tree::Node;

/// Everything the blocks are built from: the label tables, the two graded
/// bases, both structure maps and the weight-zero morphism the routed
/// products are anchored to.  Only the weight-one parts of the structures
/// are consulted here, so passing the full maps is fine.
pub struct DerEnv<'a> {
    pub bar: &'a BarCtx,
    pub a_degs: &'a [i64],
    pub b_degs: &'a [i64],
    pub alpha: &'a CellMap,
    pub beta: &'a CellMap,
    pub f0: &'a SparseMatrix,
}

impl<'a> DerEnv<'a> {
    pub fn view_a(&self) -> TermView<'_> {
        TermView {
            bar: self.bar,
            leaf_degrees: self.a_degs,
        }
    }

    pub fn view_b(&self) -> TermView<'_> {
        TermView {
            bar: self.bar,
            leaf_degrees: self.b_degs,
        }
    }
}

/// All canonical term cells of one grade whose total degree lies in
/// [lo, hi].  Grade zero is the leaf basis itself.
pub fn terms_of_grade(
    bar: &BarCtx,
    leaf_degrees: &[i64],
    grade: u32,
    lo: i64,
    hi: i64,
) -> Result<Vec<Node>> {
    if grade == 0 {
        return enumerate_terms(bar, leaf_degrees, 1, 0, lo, hi);
    }
    let mut set = BTreeSet::new();
    for w in 1..=grade {
        // a weight-w tree has at least w+1 leaves
        for n in (w + 1)..=u32::from(bar.arity_cutoff) {
            for t in enumerate_terms(bar, leaf_degrees, n as u8, w, lo, hi)? {
                if bar.grade(&t) == grade {
                    set.insert(t);
                }
            }
        }
    }
    Ok(set.into_iter().collect())
}

/// Basis of one cochain block: pairs of a term cell of fixed grade and a
/// target element whose degree exceeds the cell's by `shift`.  Cells with no
/// matching target element carry no coordinates and are dropped.
pub struct Cochains {
    pub grade: u32,
    pub shift: i64,
    pub cells: Vec<Node>,
    pub pairs: Vec<(usize, u32)>,
    cell_index: BTreeMap<Node, usize>,
    by_cell: Vec<Vec<(usize, u32)>>,
    pair_index: BTreeMap<(usize, u32), usize>,
}

impl Cochains {
    pub fn build(env: &DerEnv, grade: u32, shift: i64) -> Result<Cochains> {
        let mut out = Cochains {
            grade,
            shift,
            cells: Vec::new(),
            pairs: Vec::new(),
            cell_index: BTreeMap::new(),
            by_cell: Vec::new(),
            pair_index: BTreeMap::new(),
        };
        if env.b_degs.is_empty() || env.a_degs.is_empty() {
            return Ok(out);
        }
        let lo = env.b_degs.iter().copied().min().unwrap() - shift;
        let hi = env.b_degs.iter().copied().max().unwrap() - shift;
        let view = env.view_a();
        for t in terms_of_grade(env.bar, env.a_degs, grade, lo, hi)? {
            let want = t.degree(&view) + shift;
            let bs: Vec<u32> = (0..env.b_degs.len() as u32)
                .filter(|b| env.b_degs[*b as usize] == want)
                .collect();
            if bs.is_empty() {
                continue;
            }
            let ci = out.cells.len();
            out.cell_index.insert(t.clone(), ci);
            let mut row = Vec::new();
            for b in bs {
                out.pair_index.insert((ci, b), out.pairs.len());
                row.push((out.pairs.len(), b));
                out.pairs.push((ci, b));
            }
            out.by_cell.push(row);
            out.cells.push(t);
        }
        Ok(out)
    }

    pub fn dim(&self) -> usize {
        self.pairs.len()
    }

    /// Coordinate of the value of cell `t` on target element `b`.
    pub fn index_of(&self, t: &Node, b: u32) -> Option<usize> {
        let ci = self.cell_index.get(t)?;
        self.pair_index.get(&(*ci, b)).copied()
    }

    /// Packs per-cell value chains into a coordinate vector.  A component
    /// outside the block means the caller's degree bookkeeping is broken,
    /// so that is reported as an internal failure.
    pub fn coords(
        &self,
        field: Field,
        values: &BTreeMap<Node, Chain<u32>>,
    ) -> Result<Vec<Scalar>> {
        let mut out = vec![Scalar::zero(field); self.dim()];
        for (t, ch) in values {
            for (b, v) in ch {
                match self.index_of(t, *b) {
                    Some(i) => out[i] = out[i].add(v),
                    None => {
                        return Err(Error::internal(format!(
                            "value component ({t:?}, {b}) falls outside the cochain block"
                        )))
                    }
                }
            }
        }
        Ok(out)
    }

    /// Unpacks a coordinate vector into structure-map components.
    pub fn components(&self, x: &[Scalar]) -> BTreeMap<Node, Vec<(u32, Scalar)>> {
        let mut out: BTreeMap<Node, Vec<(u32, Scalar)>> = BTreeMap::new();
        for (i, v) in x.iter().enumerate() {
            if v.is_zero() {
                continue;
            }
            let (ci, b) = self.pairs[i];
            out.entry(self.cells[ci].clone())
                .or_default()
                .push((b, v.clone()));
        }
        out
    }
}

/// One summand of the differential evaluated on a term cell: the unknown is
/// read on `cell`, fed through `post` when present, and scaled by `coeff`.
pub struct DeltaRow {
    pub coeff: Scalar,
    pub cell: Node,
    pub post: Option<SparseMatrix>,
}

pub(crate) fn matrix_col(m: &SparseMatrix, c: usize) -> Vec<(u32, Scalar)> {
    m.iter()
        .filter(|((_, cc), v)| *cc == c && !v.is_zero())
        .map(|((r, _), v)| (*r as u32, v.clone()))
        .collect()
}

/// The differential of an unknown of operator degree `h`, expanded on the
/// term cell `t`.  Three families: the cell boundary, the weight-one
/// insertions of the source structure, and the routed weight-one target
/// products.  Routing is linear in the unknown, so the expansion is valid
/// for unknowns supported on any positive grade and, when `h` is nonzero,
/// on grade zero; the grade-zero, degree-zero corner is the (nonlinear)
/// morphism defect and lives with the solvers.
pub fn delta_rows(env: &DerEnv, h: i64, t: &Node) -> Result<Vec<DeltaRow>> {
    let f = env.bar.field();
    let view_a = env.view_a();
    let mut rows = Vec::new();
    for (s, c) in differential(&view_a, t)? {
        rows.push(DeltaRow {
            coeff: c,
            cell: s,
            post: None,
        });
    }
    let keep = |u: &Node| env.bar.grade(u) == 1;
    for (s, c) in coderivation_apply(&view_a, env.alpha, t, &keep) {
        rows.push(DeltaRow {
            coeff: c,
            cell: s,
            post: None,
        });
    }
    // Routed products: only a weight-one lower piece can keep the grades
    // balanced, so the root must carry a degree-zero tuple and every input
    // except the routed one must be a leaf.
    let Node::V { arity, label, kids } = t else {
        return Ok(rows);
    };
    if env.bar.label(*arity, *label).e.degree() != 0 {
        return Ok(rows);
    }
    let view_b = env.view_b();
    let bdim = env.b_degs.len();
    let mut presum = 0i64;
    for (i, routed) in kids.iter().enumerate() {
        let others_leaves = kids
            .iter()
            .enumerate()
            .all(|(j, k)| j == i || matches!(k, Node::Leaf(_)));
        if others_leaves {
            if let Some((rc, rs)) = view_a.canon(routed) {
                let want = routed.degree(&view_a) + h;
                let mut picks: Vec<(Vec<u32>, Scalar)> =
                    vec![(vec![0; kids.len()], Scalar::one(f))];
                for (j, k) in kids.iter().enumerate() {
                    if j == i {
                        continue;
                    }
                    let Node::Leaf(p) = k else { unreachable!() };
                    let col = matrix_col(env.f0, *p as usize);
                    let mut next = Vec::with_capacity(picks.len() * col.len());
                    for (fill, cf) in &picks {
                        for (bi, cv) in &col {
                            let mut f2 = fill.clone();
                            f2[j] = *bi;
                            next.push((f2, cf.mul(cv)));
                        }
                    }
                    picks = next;
                }
                let mut post = SparseMatrix::new(bdim, bdim, f);
                for bin in 0..bdim as u32 {
                    if env.b_degs[bin as usize] != want {
                        continue;
                    }
                    for (fill, cf) in &picks {
                        let kb: Vec<Node> = (0..kids.len())
                            .map(|j| Node::Leaf(if j == i { bin } else { fill[j] }))
                            .collect();
                        let cor = Node::V {
                            arity: *arity,
                            label: *label,
                            kids: kb,
                        };
                        if let Some((cn, cs)) = view_b.canon(&cor) {
                            for (bout, v) in env.beta.eval_cell(&cn) {
                                post.add_to(bout as usize, bin as usize, &cf.mul(&cs).mul(&v));
                            }
                        }
                    }
                }
                if !post.is_zero() {
                    let coeff = Scalar::sign(f, h * presum).neg().mul(&rs);
                    rows.push(DeltaRow {
                        coeff,
                        cell: rc,
                        post: Some(post),
                    });
                }
            }
        }
        presum += routed.degree(&view_a);
    }
    Ok(rows)
}

/// Matrix of the differential from the block of unknowns (`cols`, whose
/// shift is the operator degree) into the block one grade up and one shift
/// down.
pub fn delta_matrix(env: &DerEnv, cols: &Cochains, rows: &Cochains) -> Result<SparseMatrix> {
    if rows.grade != cols.grade + 1 || rows.shift != cols.shift - 1 {
        return Err(Error::internal("mismatched cochain blocks for a differential"));
    }
    let f = env.bar.field();
    let mut m = SparseMatrix::new(rows.dim(), cols.dim(), f);
    for (ti, tcell) in rows.cells.iter().enumerate() {
        for dr in delta_rows(env, cols.shift, tcell)? {
            match &dr.post {
                None => {
                    for (pi, b) in &rows.by_cell[ti] {
                        if let Some(ci) = cols.index_of(&dr.cell, *b) {
                            m.add_to(*pi, ci, &dr.coeff);
                        }
                    }
                }
                Some(pm) => {
                    for ((bout, bin), v) in pm.iter() {
                        if v.is_zero() {
                            continue;
                        }
                        let Some(pi) = cols.index_of(&dr.cell, *bin as u32) else {
                            continue;
                        };
                        if let Some(ri) = rows.pair_index.get(&(ti, *bout as u32)) {
                            m.add_to(*ri, pi, &dr.coeff.mul(v));
                        }
                    }
                }
            }
        }
    }
    Ok(m)
}

/// Three consecutive blocks around one family of unknowns, with the two
/// differential matrices between them.  The unknowns live on grade-`w`
/// cells and carry operator degree `h`; residuals land in `mid`.
pub struct Window {
    pub cols: Cochains,
    pub mid: Cochains,
    pub next: Cochains,
    pub d_in: SparseMatrix,
    pub d_out: SparseMatrix,
}

pub fn window(env: &DerEnv, w: u32, h: i64) -> Result<Window> {
    let cols = Cochains::build(env, w, h)?;
    let mid = Cochains::build(env, w + 1, h - 1)?;
    let next = Cochains::build(env, w + 2, h - 2)?;
    let d_in = delta_matrix(env, &cols, &mid)?;
    let d_out = delta_matrix(env, &mid, &next)?;
    Ok(Window {
        cols,
        mid,
        next,
        d_in,
        d_out,
    })
}

/// The two obstruction groups of one stage: the degree-one block receives
/// realization obstructions, the degree-zero block homotopy obstructions.
pub struct GammaBlock {
    pub stage: u32,
    pub h1: Subquotient,
    pub h1_mid: usize,
    pub h0: Subquotient,
    pub h0_mid: usize,
}

pub fn gamma_block(env: &DerEnv, stage: u32) -> Result<GammaBlock> {
    if stage == 0 {
        return Err(Error::input("cohomology blocks are indexed from stage 1"));
    }
    let w1 = window(env, stage, 0)?;
    let w0 = window(env, stage, 1)?;
    Ok(GammaBlock {
        stage,
        h1_mid: w1.mid.dim(),
        h1: subquotient_dims(&w1.d_out, &w1.d_in)?,
        h0_mid: w0.mid.dim(),
        h0: subquotient_dims(&w0.d_out, &w0.d_in)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operad::builtin_com;
    use crate::testutil::{mask_degs, strict_map, wedge_products};
    use crate::tree::canonicalize;

    /// One odd generator mapping into two: the inclusion is a strict
    /// morphism, and both structures are valid, so the block differentials
    /// must compose to zero in every window.
    fn wedge_env(f: Field, bar: &BarCtx) -> (Vec<i64>, Vec<i64>, CellMap, CellMap, SparseMatrix) {
        let a_degs = mask_degs(1);
        let b_degs = mask_degs(2);
        let alpha = strict_map(bar, &a_degs, &wedge_products(f, 1));
        let beta = strict_map(bar, &b_degs, &wedge_products(f, 2));
        let mut f0 = SparseMatrix::new(b_degs.len(), a_degs.len(), f);
        f0.set(0, 0, Scalar::one(f));
        f0.set(1, 1, Scalar::one(f));
        (a_degs, b_degs, alpha, beta, f0)
    }

    #[test]
    fn window_differentials_compose_to_zero_over_both_fields() {
        for f in [Field::Q, Field::Fp(2)] {
            let bar = BarCtx::new(builtin_com(f, 3), 3, 3).unwrap();
            let (a_degs, b_degs, alpha, beta, f0) = wedge_env(f, &bar);
            let env = DerEnv {
                bar: &bar,
                a_degs: &a_degs,
                b_degs: &b_degs,
                alpha: &alpha,
                beta: &beta,
                f0: &f0,
            };
            let mut seen = 0usize;
            for stage in 1..=2u32 {
                for h in [0i64, 1] {
                    let w = window(&env, stage, h).unwrap();
                    assert!(
                        w.d_out.mul_mat(&w.d_in).is_zero(),
                        "window ({stage}, {h}) fails to compose to zero over {f:?}"
                    );
                    seen += w.mid.dim();
                }
            }
            assert!(seen > 0, "all test windows were empty over {f:?}");
        }
    }

    #[test]
    fn routed_rows_match_the_hand_computed_stage_operator() {
        let f = Field::Q;
        let bar = BarCtx::new(builtin_com(f, 2), 2, 1).unwrap();
        let a_degs = vec![0i64, 1];
        let alpha = strict_map(&bar, &a_degs, &wedge_products(f, 1));
        let f0 = SparseMatrix::identity(2, f);
        let env = DerEnv {
            bar: &bar,
            a_degs: &a_degs,
            b_degs: &a_degs,
            alpha: &alpha,
            beta: &alpha,
            f0: &f0,
        };
        let t = Node::V {
            arity: 2,
            label: 0,
            kids: vec![Node::Leaf(0), Node::Leaf(0)],
        };
        assert_eq!(bar.label(2, 0).e.degree(), 0);
        let rows = delta_rows(&env, 1, &t).unwrap();
        // no boundary at weight one and tuple degree zero, one insertion
        // row reading the unknown on the product, and one routed row per
        // input position
        assert_eq!(rows.len(), 3);
        assert!(rows.iter().all(|r| r.cell == Node::Leaf(0)));
        let plain: Vec<_> = rows.iter().filter(|r| r.post.is_none()).collect();
        assert_eq!(plain.len(), 1);
        assert!(plain[0].coeff.is_one());
        for r in rows.iter().filter(|r| r.post.is_some()) {
            assert_eq!(r.coeff, Scalar::one(f).neg());
            let pm = r.post.as_ref().unwrap();
            // routing the degree-one unknown through either slot lands on
            // the odd generator times the unit
            assert!(pm.get(1, 1).is_one());
            assert_eq!(pm.nnz(), 1);
        }
    }

    fn dense_rank(f: Field, m: &SparseMatrix) -> usize {
        let mut a: Vec<Vec<Scalar>> = (0..m.rows)
            .map(|r| (0..m.cols).map(|c| m.get(r, c)).collect())
            .collect();
        let mut rank = 0usize;
        for c in 0..m.cols {
            let Some(p) = (rank..m.rows).find(|r| !a[*r][c].is_zero()) else {
                continue;
            };
            a.swap(rank, p);
            let inv = a[rank][c].inv().unwrap();
            for x in a[rank].iter_mut() {
                *x = x.mul(&inv);
            }
            for r in 0..m.rows {
                if r != rank && !a[r][c].is_zero() {
                    let s = a[r][c].clone();
                    for cc in 0..m.cols {
                        let sub = a[rank][cc].mul(&s);
                        a[r][cc] = a[r][cc].sub(&sub);
                    }
                }
            }
            rank += 1;
            let _ = f;
        }
        rank
    }

    #[test]
    fn block_dimensions_match_a_dense_elimination_oracle() {
        for f in [Field::Q, Field::Fp(5)] {
            let bar = BarCtx::new(builtin_com(f, 3), 3, 3).unwrap();
            let a_degs = vec![0i64, 0, 1];
            let b_degs = vec![0i64, 1, 2, 3];
            let zero_a = CellMap::zero(f, 3, 3, -1);
            let zero_b = CellMap::zero(f, 4, 4, -1);
            let f0 = SparseMatrix::new(4, 3, f);
            let env = DerEnv {
                bar: &bar,
                a_degs: &a_degs,
                b_degs: &b_degs,
                alpha: &zero_a,
                beta: &zero_b,
                f0: &f0,
            };
            for (w0, h) in [(1u32, 0i64), (1, 1), (2, 0)] {
                let w = window(&env, w0, h).unwrap();
                assert!(w.mid.dim() > 0);
                let sq = subquotient_dims(&w.d_out, &w.d_in).unwrap();
                let rin = dense_rank(f, &w.d_in);
                let rout = dense_rank(f, &w.d_out);
                assert_eq!(sq.dim_image, rin);
                assert_eq!(sq.dim_kernel, w.mid.dim() - rout);
                assert_eq!(sq.dim_quotient, w.mid.dim() - rout - rin);
            }
        }
    }

    /// Rebuilds a structure map after permuting the underlying basis.
    fn permute_map(bar: &BarCtx, new_degs: &[i64], p: &[u32], m: &CellMap) -> CellMap {
        let f = bar.field();
        let view = TermView {
            bar,
            leaf_degrees: new_degs,
        };
        let mut out = CellMap::zero(f, m.w0.rows, m.w0.cols, m.degree);
        for ((r, c), v) in m.w0.iter() {
            out.w0.add_to(p[*r] as usize, p[*c] as usize, v);
        }
        for (t, vals) in &m.comps {
            let (cn, cs) = canonicalize(&view, &t.map_leaves(&|l| p[l as usize])).unwrap();
            let moved: Vec<(u32, Scalar)> =
                vals.iter().map(|(i, v)| (p[*i as usize], v.mul(&cs))).collect();
            out.comps.insert(cn, moved);
        }
        out
    }

    #[test]
    fn block_dimensions_survive_relabeling() {
        let f = Field::Q;
        let bar = BarCtx::new(builtin_com(f, 3), 3, 3).unwrap();
        let (a_degs, b_degs, alpha, beta, f0) = wedge_env(f, &bar);
        let env = DerEnv {
            bar: &bar,
            a_degs: &a_degs,
            b_degs: &b_degs,
            alpha: &alpha,
            beta: &beta,
            f0: &f0,
        };
        let base = gamma_block(&env, 1).unwrap();

        // reverse both bases
        let pa: Vec<u32> = (0..a_degs.len() as u32).rev().collect();
        let pb: Vec<u32> = (0..b_degs.len() as u32).rev().collect();
        let a2: Vec<i64> = { let mut v = a_degs.clone(); v.reverse(); v };
        let b2: Vec<i64> = { let mut v = b_degs.clone(); v.reverse(); v };
        let alpha2 = permute_map(&bar, &a2, &pa, &alpha);
        let beta2 = permute_map(&bar, &b2, &pb, &beta);
        let mut f02 = SparseMatrix::new(b2.len(), a2.len(), f);
        for ((r, c), v) in f0.iter() {
            f02.add_to(pb[*r] as usize, pa[*c] as usize, v);
        }
        let env2 = DerEnv {
            bar: &bar,
            a_degs: &a2,
            b_degs: &b2,
            alpha: &alpha2,
            beta: &beta2,
            f0: &f02,
        };
        let moved = gamma_block(&env2, 1).unwrap();
        assert_eq!(base.h1_mid, moved.h1_mid);
        assert_eq!(base.h1.dim_quotient, moved.h1.dim_quotient);
        assert_eq!(base.h1.dim_kernel, moved.h1.dim_kernel);
        assert_eq!(base.h0_mid, moved.h0_mid);
        assert_eq!(base.h0.dim_quotient, moved.h0.dim_quotient);
        assert_eq!(base.h0.dim_kernel, moved.h0.dim_kernel);
    }

    #[test]
    fn empty_target_yields_empty_blocks() {
        let f = Field::Q;
        let bar = BarCtx::new(builtin_com(f, 2), 2, 1).unwrap();
        let a_degs = vec![0i64];
        let b_degs: Vec<i64> = vec![];
        let alpha = CellMap::zero(f, 1, 1, -1);
        let beta = CellMap::zero(f, 0, 0, -1);
        let f0 = SparseMatrix::new(0, 1, f);
        let env = DerEnv {
            bar: &bar,
            a_degs: &a_degs,
            b_degs: &b_degs,
            alpha: &alpha,
            beta: &beta,
            f0: &f0,
        };
        let g = gamma_block(&env, 1).unwrap();
        assert_eq!(g.h1_mid, 0);
        assert_eq!(g.h1.dim_quotient, 0);
        assert_eq!(g.h0.dim_quotient, 0);
    }
}
