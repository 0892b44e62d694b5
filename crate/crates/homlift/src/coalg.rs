//! The quasi-cofree coalgebra engine.
//!
//! Everything here works with maps *out of* the coalgebra, recorded by their
//! corestrictions: a matrix on the weight-0 part (bare basis leaves) plus a
//! table of values on canonical higher-weight term cells.  Structure maps
//! induce coderivations, morphism data expands to a full coalgebra morphism,
//! and both validations reduce to residuals of corestricted identities.

use std::collections::{BTreeMap, BTreeSet};

use crate::bar::{differential, enumerate_cells, BarCtx, QView, TermView};
use crate::chain::{chain_add, chain_add_all, chain_is_zero, Chain};
use crate::error::{Error, Result};
use crate::field::{Field, Scalar};
use crate::linalg::SparseMatrix;
use crate::sigma::GradedSpace;
use crate::tree::{canonicalize, coder_splits, nu_splits, Node, TreeCtx};

/// A finite graded basis carrying a square-zero degree -1 operator.
#[derive(Debug, Clone)]
pub struct Complex {
    pub space: GradedSpace,
    pub d: SparseMatrix,
}

impl Complex {
    pub fn new(space: GradedSpace, d: SparseMatrix) -> Complex {
        Complex { space, d }
    }

    /// A complex with zero differential on the given basis.
    pub fn undifferentiated(field: Field, space: GradedSpace) -> Complex {
        let n = space.dim();
        Complex {
            space,
            d: SparseMatrix::new(n, n, field),
        }
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    pub fn degrees(&self) -> Vec<i64> {
        self.space.items.iter().map(|it| it.degree).collect()
    }

    /// (min, max) basis degree; (0, 0) for the zero space.
    pub fn degree_range(&self) -> (i64, i64) {
        let mut lo = i64::MAX;
        let mut hi = i64::MIN;
        for it in &self.space.items {
            lo = lo.min(it.degree);
            hi = hi.max(it.degree);
        }
        if lo > hi {
            (0, 0)
        } else {
            (lo, hi)
        }
    }

    pub fn validate(&self, field: Field, name: &str) -> Result<()> {
        let n = self.dim();
        if self.d.rows != n || self.d.cols != n {
            return Err(Error::input(format!(
                "{name}: differential is {}x{} on a basis of {n}",
                self.d.rows, self.d.cols
            )));
        }
        for ((r, c), v) in self.d.iter() {
            if v.is_zero() {
                continue;
            }
            let (dr, dc) = (self.space.items[*r].degree, self.space.items[*c].degree);
            if dr != dc - 1 {
                return Err(Error::input(format!(
                    "{name}: differential entry ({r},{c}) maps degree {dc} to {dr}"
                )));
            }
        }
        if !self.d.mul_mat(&self.d).is_zero() {
            return Err(Error::input(format!("{name}: differential does not square to zero")));
        }
        let _ = field;
        Ok(())
    }
}

/// A homogeneous map out of the coalgebra, given by its corestriction.
///
/// `w0` acts on bare leaves (columns index the source basis), `comps` holds
/// values on canonical term cells of weight >= 1, and absent keys are zero.
/// `degree` is the degree of the map: -1 for structure maps, 0 for morphism
/// data, +1 for homotopies.
#[derive(Debug, Clone)]
pub struct CellMap {
    pub w0: SparseMatrix,
    pub comps: BTreeMap<Node, Vec<(u32, Scalar)>>,
    pub degree: i64,
}

impl CellMap {
    pub fn zero(field: Field, target_dim: usize, source_dim: usize, degree: i64) -> CellMap {
        CellMap {
            w0: SparseMatrix::new(target_dim, source_dim, field),
            comps: BTreeMap::new(),
            degree,
        }
    }

    pub fn eval_cell(&self, t: &Node) -> Vec<(u32, Scalar)> {
        match t {
            Node::Leaf(p) => self
                .w0
                .iter()
                .filter(|((_, c), v)| *c == *p as usize && !v.is_zero())
                .map(|((r, _), v)| (*r as u32, v.clone()))
                .collect(),
            Node::V { .. } => self.comps.get(t).cloned().unwrap_or_default(),
        }
    }

    pub fn eval_chain(&self, field: Field, ch: &Chain<Node>) -> Chain<u32> {
        let mut out = Chain::new();
        for (t, c) in ch {
            for (i, v) in self.eval_cell(t) {
                chain_add(&mut out, i, c.mul(&v));
            }
        }
        let _ = field;
        out
    }

    /// Checks shapes, canonicality of the keys and homogeneity of every
    /// recorded value against the two graded bases.
    pub fn validate_against(
        &self,
        view: &TermView,
        source: &Complex,
        target: &Complex,
        name: &str,
    ) -> Result<()> {
        if self.w0.rows != target.dim() || self.w0.cols != source.dim() {
            return Err(Error::input(format!(
                "{name}: weight-0 block is {}x{}, expected {}x{}",
                self.w0.rows,
                self.w0.cols,
                target.dim(),
                source.dim()
            )));
        }
        for ((r, c), v) in self.w0.iter() {
            if v.is_zero() {
                continue;
            }
            let want = source.space.items[*c].degree + self.degree;
            if target.space.items[*r].degree != want {
                return Err(Error::input(format!(
                    "{name}: weight-0 entry ({r},{c}) lands in degree {}, expected {want}",
                    target.space.items[*r].degree
                )));
            }
        }
        for (t, vals) in &self.comps {
            check_term(view.bar, source.dim(), t, name)?;
            match canonicalize(view, t) {
                Some((cn, s)) if cn == *t && s.is_one() => {}
                _ => {
                    return Err(Error::input(format!(
                        "{name}: key {t:?} is not a canonical cell"
                    )))
                }
            }
            let want = t.degree(view) + self.degree;
            for (i, v) in vals {
                if v.is_zero() {
                    continue;
                }
                let got = target
                    .space
                    .items
                    .get(*i as usize)
                    .ok_or_else(|| {
                        Error::input(format!("{name}: value index {i} out of range"))
                    })?
                    .degree;
                if got != want {
                    return Err(Error::input(format!(
                        "{name}: value on {t:?} lands in degree {got}, expected {want}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Walks a term and rejects unknown labels, out-of-range arities and leaf
/// payloads outside the source basis.
pub fn check_term(bar: &BarCtx, source_dim: usize, t: &Node, name: &str) -> Result<()> {
    match t {
        Node::Leaf(p) => {
            if *p as usize >= source_dim {
                return Err(Error::input(format!(
                    "{name}: leaf payload {p} outside a basis of {source_dim}"
                )));
            }
            Ok(())
        }
        Node::V { arity, label, kids } => {
            if *label as usize >= bar.label_count(*arity) {
                return Err(Error::input(format!(
                    "{name}: label {label} out of range at arity {arity}"
                )));
            }
            if kids.len() != *arity as usize {
                return Err(Error::input(format!(
                    "{name}: vertex of arity {arity} has {} children",
                    kids.len()
                )));
            }
            kids.iter().try_for_each(|k| check_term(bar, source_dim, k, name))
        }
    }
}

/// The coderivation induced by `map`, applied to one term.  Every position
/// (vertex subtree or leaf) is replaced in place by the map's value on it;
/// reaching the position costs (-1)^(degree * pre).  `keep` filters by the
/// extracted subtree, so callers can separate the linear part from the rest.
pub fn coderivation_apply(
    view: &TermView,
    map: &CellMap,
    t: &Node,
    keep: &dyn Fn(&Node) -> bool,
) -> Chain<Node> {
    let f = view.field();
    let mut out = Chain::new();
    for sp in coder_splits(view, t) {
        if !keep(&sp.upper) {
            continue;
        }
        let vals = map.eval_cell(&sp.upper);
        if vals.is_empty() {
            continue;
        }
        let reach = Scalar::sign(f, map.degree * sp.pre);
        for (i, c) in vals {
            let filled = sp.lower.fill_holes(std::slice::from_ref(&Node::Leaf(i)));
            if let Some((cn, cs)) = view.canon(&filled) {
                chain_add(&mut out, cn, reach.mul(&c).mul(&cs));
            }
        }
    }
    out
}

/// Cell differential plus the coderivation of the structure map: the full
/// differential the structure induces on the coalgebra.
pub fn full_differential(view: &TermView, alpha: &CellMap, t: &Node) -> Result<Chain<Node>> {
    let mut out = differential(view, t)?;
    let cod = coderivation_apply(view, alpha, t, &|_| true);
    chain_add_all(&mut out, &cod, &Scalar::one(view.field()));
    Ok(out)
}

/// Applies `full_differential` to every term of a chain.
pub fn full_differential_chain(
    view: &TermView,
    alpha: &CellMap,
    ch: &Chain<Node>,
) -> Result<Chain<Node>> {
    let mut out = Chain::new();
    for (t, c) in ch {
        let dt = full_differential(view, alpha, t)?;
        chain_add_all(&mut out, &dt, c);
    }
    Ok(out)
}

/// The coalgebra morphism extending `fmap`: every full split sends its
/// uppers through the map and reassembles the images under the lower tree.
/// Signs: extraction, the copies of the map crossing what precedes them,
/// and re-insertion of the (shifted) images past the lower labels.
pub fn expand_morphism(
    view_a: &TermView,
    view_b: &TermView,
    fmap: &CellMap,
    t: &Node,
) -> Result<Chain<Node>> {
    let f = view_a.field();
    let h = fmap.degree;
    let mut out = Chain::new();
    for sp in nu_splits(view_a, t) {
        let evs: Vec<Vec<(u32, Scalar)>> = sp.uppers.iter().map(|u| fmap.eval_cell(u)).collect();
        if evs.iter().any(|e| e.is_empty()) {
            continue;
        }
        let lower_total = sp.pre_lower[0] + sp.post_lower[0];
        let mut sign = sp.extraction_sign.clone();
        let mut seen = 0i64;
        for j in 0..sp.uppers.len() {
            sign = sign.mul(&Scalar::sign(f, h * (lower_total + seen)));
            seen += sp.upper_deg[j];
            sign = sign.mul(&Scalar::sign(f, (sp.upper_deg[j] + h) * sp.post_lower[j]));
        }
        let mut picks: Vec<(Vec<Node>, Scalar)> = vec![(Vec::new(), sign)];
        for ev in &evs {
            let mut next = Vec::with_capacity(picks.len() * ev.len());
            for (fills, coeff) in &picks {
                for (i, c) in ev {
                    let mut fs = fills.clone();
                    fs.push(Node::Leaf(*i));
                    next.push((fs, coeff.mul(c)));
                }
            }
            picks = next;
        }
        for (fills, coeff) in picks {
            let filled = sp.lower.fill_holes(&fills);
            if let Some((cn, cs)) = view_b.canon(&filled) {
                chain_add(&mut out, cn, coeff.mul(&cs));
            }
        }
    }
    Ok(out)
}

/// Residuals of the structure equations: the corestriction applied to the
/// full differential of each given cell.  An empty report means the induced
/// differential squares to zero on the span of those cells.
pub fn validate_structure(
    view: &TermView,
    alpha: &CellMap,
    terms: &[Node],
) -> Result<BTreeMap<Node, Chain<u32>>> {
    let f = view.field();
    let mut bad = BTreeMap::new();
    for t in terms {
        let dt = full_differential(view, alpha, t)?;
        let r = alpha.eval_chain(f, &dt);
        if !chain_is_zero(&r) {
            bad.insert(t.clone(), r);
        }
    }
    Ok(bad)
}

/// Independent cross-check: the induced differential applied twice.
pub fn square_probe(view: &TermView, alpha: &CellMap, t: &Node) -> Result<Chain<Node>> {
    let once = full_differential(view, alpha, t)?;
    full_differential_chain(view, alpha, &once)
}

/// Residuals of the morphism equations on the given cells: corestricting
/// the target structure through the expanded morphism must agree with the
/// map applied to the source differential.
pub fn check_morphism(
    view_a: &TermView,
    view_b: &TermView,
    alpha: &CellMap,
    beta: &CellMap,
    fmap: &CellMap,
    terms: &[Node],
) -> Result<BTreeMap<Node, Chain<u32>>> {
    let f = view_a.field();
    let minus = Scalar::one(f).neg();
    let mut bad = BTreeMap::new();
    for t in terms {
        let phi = expand_morphism(view_a, view_b, fmap, t)?;
        let mut lhs = beta.eval_chain(f, &phi);
        let dt = full_differential(view_a, alpha, t)?;
        let rhs = fmap.eval_chain(f, &dt);
        chain_add_all(&mut lhs, &rhs, &minus);
        if !chain_is_zero(&lhs) {
            bad.insert(t.clone(), lhs);
        }
    }
    Ok(bad)
}

/// All canonical term cells with `n` leaves drawn from the graded basis, of
/// the given weight, whose total degree lies in [lo, hi].
pub fn enumerate_terms(
    bar: &BarCtx,
    leaf_degrees: &[i64],
    n: u8,
    weight: u32,
    lo: i64,
    hi: i64,
) -> Result<Vec<Node>> {
    let dim = leaf_degrees.len() as u32;
    if dim == 0 {
        return Ok(Vec::new());
    }
    if weight == 0 {
        if n != 1 {
            return Ok(Vec::new());
        }
        return Ok((0..dim)
            .filter(|i| {
                let d = leaf_degrees[*i as usize];
                lo <= d && d <= hi
            })
            .map(Node::Leaf)
            .collect());
    }
    let min_leaf = leaf_degrees.iter().copied().min().unwrap();
    let cap = hi - i64::from(n) * min_leaf;
    let cells = enumerate_cells(bar, n, weight, Some(cap))?;
    let view = TermView { bar, leaf_degrees };
    let mut set = BTreeSet::new();
    let mut assign = vec![0u32; n as usize];
    for cell in &cells {
        assign.iter_mut().for_each(|a| *a = 0);
        'odometer: loop {
            let t = cell.map_leaves(&|l| assign[(l - 1) as usize]);
            let d = t.degree(&view);
            if lo <= d && d <= hi {
                if let Some((cn, _)) = canonicalize(&view, &t) {
                    set.insert(cn);
                }
            }
            let mut k = 0;
            loop {
                if k == assign.len() {
                    break 'odometer;
                }
                assign[k] += 1;
                if assign[k] < dim {
                    break;
                }
                assign[k] = 0;
                k += 1;
            }
        }
    }
    Ok(set.into_iter().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::SparseMatrix;
    use crate::operad::builtin_com;
    use crate::sigma::BasisItem;

    fn basis(degs: &[i64]) -> GradedSpace {
        GradedSpace::new(
            degs.iter()
                .enumerate()
                .map(|(i, d)| BasisItem {
                    id: format!("a{i}"),
                    degree: *d,
                })
                .collect(),
        )
    }

    /// Structure map of a strict algebra: the same product value on every
    /// zero-degree label, recorded on the self-canonical corollas only.
    fn strict_alpha(
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
        for r in 2..=3u8 {
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
                    // next weakly increasing tuple
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

    /// The exterior algebra on one odd generator: e in degree 0 acts as the
    /// unit, x has degree 1 and x*x = 0.
    fn exterior_products(f: Field) -> impl Fn(&[u32]) -> Vec<(u32, Scalar)> {
        move |tup: &[u32]| {
            let xs = tup.iter().filter(|&&i| i == 1).count();
            match xs {
                0 => vec![(0, Scalar::one(f))],
                1 => vec![(1, Scalar::one(f))],
                _ => vec![],
            }
        }
    }

    fn all_terms(bar: &BarCtx, degs: &[i64], lo: i64, hi: i64, with_leaves: bool) -> Vec<Node> {
        let mut terms = Vec::new();
        let w0 = if with_leaves { 0 } else { 1 };
        for n in 1..=3u8 {
            for w in w0..=3u32 {
                terms.extend(enumerate_terms(bar, degs, n, w, lo, hi).unwrap());
            }
        }
        terms
    }

    #[test]
    fn strict_graded_structure_validates() {
        let f = Field::Q;
        let bar = BarCtx::new(builtin_com(f, 3), 3, 3).unwrap();
        let degs = vec![0i64, 1];
        let alpha = strict_alpha(&bar, &degs, &exterior_products(f));
        let a = Complex::undifferentiated(f, basis(&degs));
        let view = TermView {
            bar: &bar,
            leaf_degrees: &degs,
        };
        alpha.validate_against(&view, &a, &a, "alpha").unwrap();
        let terms = all_terms(&bar, &degs, -1, 5, false);
        assert!(terms.len() > 100);
        let bad = validate_structure(&view, &alpha, &terms).unwrap();
        assert!(bad.is_empty(), "unexpected residuals: {bad:?}");
    }

    #[test]
    fn square_of_the_induced_differential_matches_the_residual_report() {
        let f = Field::Q;
        let bar = BarCtx::new(builtin_com(f, 3), 3, 2).unwrap();
        let degs = vec![0i64, 1];
        let alpha = strict_alpha(&bar, &degs, &exterior_products(f));
        let view = TermView {
            bar: &bar,
            leaf_degrees: &degs,
        };
        for t in all_terms(&bar, &degs, -1, 4, false) {
            let sq = square_probe(&view, &alpha, &t).unwrap();
            assert!(chain_is_zero(&sq), "square fails on {t:?}: {sq:?}");
        }
    }

    #[test]
    fn broken_product_is_reported_and_agrees_with_the_square() {
        let f = Field::Q;
        let bar = BarCtx::new(builtin_com(f, 3), 3, 1).unwrap();
        let degs = vec![0i64, 0];
        // commutative but not associative: u*u = v, u*v = u, v*v = 0, and no
        // triple products at all
        let prods = move |tup: &[u32]| -> Vec<(u32, Scalar)> {
            match tup {
                [0, 0] => vec![(1, Scalar::one(f))],
                [0, 1] => vec![(0, Scalar::one(f))],
                _ => vec![],
            }
        };
        let alpha = strict_alpha(&bar, &degs, &prods);
        let view = TermView {
            bar: &bar,
            leaf_degrees: &degs,
        };
        let terms = all_terms(&bar, &degs, -2, 3, false);
        let bad = validate_structure(&view, &alpha, &terms).unwrap();
        assert!(!bad.is_empty());
        // the residual is exactly the weight-0 component of the square
        for t in &terms {
            let sq = square_probe(&view, &alpha, t).unwrap();
            let mut w0: Chain<u32> = Chain::new();
            for (s, c) in &sq {
                if let Node::Leaf(i) = s {
                    chain_add(&mut w0, *i, c.clone());
                }
            }
            let want = bad.get(t).cloned().unwrap_or_default();
            assert_eq!(w0, want, "weight-0 square disagrees on {t:?}");
        }
    }

    #[test]
    fn identity_is_a_morphism_and_a_scaled_unit_is_not() {
        let f = Field::Q;
        let bar = BarCtx::new(builtin_com(f, 3), 3, 2).unwrap();
        let degs = vec![0i64, 1];
        let alpha = strict_alpha(&bar, &degs, &exterior_products(f));
        let view = TermView {
            bar: &bar,
            leaf_degrees: &degs,
        };
        let terms = all_terms(&bar, &degs, -1, 4, true);
        let ident = CellMap {
            w0: SparseMatrix::identity(2, f),
            comps: BTreeMap::new(),
            degree: 0,
        };
        let bad = check_morphism(&view, &view, &alpha, &alpha, &ident, &terms).unwrap();
        assert!(bad.is_empty(), "identity fails: {bad:?}");

        let mut w0 = SparseMatrix::identity(2, f);
        w0.set(0, 0, Scalar::from_i64(f, 2));
        let doubled = CellMap {
            w0,
            comps: BTreeMap::new(),
            degree: 0,
        };
        let bad = check_morphism(&view, &view, &alpha, &alpha, &doubled, &terms).unwrap();
        assert!(!bad.is_empty());
    }

    #[test]
    fn strict_morphism_expansion_reassembles_the_tree() {
        let f = Field::Q;
        let bar = BarCtx::new(builtin_com(f, 2), 2, 1).unwrap();
        let degs = vec![0i64, 1];
        let view = TermView {
            bar: &bar,
            leaf_degrees: &degs,
        };
        let ident = CellMap {
            w0: SparseMatrix::identity(2, f),
            comps: BTreeMap::new(),
            degree: 0,
        };
        let leaf = Node::Leaf(1);
        let phi = expand_morphism(&view, &view, &ident, &leaf).unwrap();
        assert_eq!(phi.len(), 1);
        assert!(phi.get(&leaf).unwrap().is_one());

        let t = Node::corolla(2, 0, &[0, 1]);
        let phi = expand_morphism(&view, &view, &ident, &t).unwrap();
        assert_eq!(phi.len(), 1);
        assert!(phi.get(&t).unwrap().is_one());
    }

    #[test]
    fn term_enumeration_collapses_orbits() {
        let f = Field::Q;
        let bar = BarCtx::new(builtin_com(f, 2), 2, 1).unwrap();
        let degs = vec![0i64, 1];
        // arity 2, weight 1: by hand, four zero-degree cells (one per equal
        // pair, two for the mixed pair) and four degree-one cells likewise
        let terms = enumerate_terms(&bar, &degs, 2, 1, -1, 5).unwrap();
        assert_eq!(terms.len(), 8);
        for t in &terms {
            let view = TermView {
                bar: &bar,
                leaf_degrees: &degs,
            };
            let (cn, s) = canonicalize(&view, t).unwrap();
            assert_eq!(&cn, t);
            assert!(s.is_one());
        }
    }
}
