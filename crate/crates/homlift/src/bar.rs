use crate::chain::{chain_add, chain_add_all, Chain};
use crate::error::{Error, Result};
use crate::etuple::ETuple;
use crate::field::{Field, Scalar};
use crate::operad::OperadPresentation;
use crate::perm::Perm;
use crate::tree::{canon_bar, canonicalize, coder_splits, koszul_move, Node, TreeCtx};
use std::collections::BTreeMap;

/// A vertex label: a basis operation of the input operad paired with a
/// permutation tuple of the same arity.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct QLabel {
    pub p: u32,
    pub e: ETuple,
}

/// Label tables for trees over one operad: for every arity up to the cutoff,
/// all labels with tuple degree up to `e_bound`, their signed transposition
/// actions, and composition/differential lookups.  Vertex degrees are
/// suspended: a label of operation degree dp and tuple degree t sits in
/// degree dp + t + 1, so every vertex costs at least one.
pub struct BarCtx {
    pub operad: OperadPresentation,
    pub arity_cutoff: u8,
    pub e_bound: i64,
    labels: BTreeMap<u8, Vec<QLabel>>,
    lookup: BTreeMap<u8, BTreeMap<(u32, ETuple), u32>>,
    acts: BTreeMap<u8, Vec<Vec<(u32, Scalar)>>>,
    min_susp: BTreeMap<u8, i64>,
}

impl BarCtx {
    pub fn new(operad: OperadPresentation, arity_cutoff: u8, e_bound: i64) -> Result<BarCtx> {
        if arity_cutoff > operad.max_arity() {
            return Err(Error::capability(format!(
                "arity cutoff {arity_cutoff} exceeds the operad's stored arities"
            )));
        }
        let mut labels = BTreeMap::new();
        let mut lookup = BTreeMap::new();
        let mut acts = BTreeMap::new();
        let mut min_susp = BTreeMap::new();
        for r in 2..=arity_cutoff {
            let comp = operad
                .module
                .component(r)
                .ok_or_else(|| Error::capability(format!("operad has no arity-{r} component")))?;
            for item in &comp.space.items {
                if item.degree < 0 {
                    return Err(Error::input(
                        "operation degrees must be nonnegative for the enumeration to terminate",
                    ));
                }
            }
            let pmono = comp.monomial_tables().ok_or_else(|| {
                Error::capability(format!(
                    "arity-{r} action is not by signed permutations; canonical forms need one"
                ))
            })?;
            let mut tab: Vec<QLabel> = Vec::new();
            let mut map: BTreeMap<(u32, ETuple), u32> = BTreeMap::new();
            for t in 0..=e_bound {
                for e in ETuple::basis(r, t) {
                    for p in 0..comp.space.dim() {
                        map.insert((p as u32, e.clone()), tab.len() as u32);
                        tab.push(QLabel { p: p as u32, e: e.clone() });
                    }
                }
            }
            let mut gen_tabs: Vec<Vec<(u32, Scalar)>> = Vec::new();
            for k in 1..r {
                let s = Perm::adjacent(r, k);
                let mut gt = Vec::with_capacity(tab.len());
                for q in &tab {
                    let e2 = q.e.act(&s);
                    let (p2, sp) = pmono[(k - 1) as usize][q.p as usize].clone();
                    let idx = map[&(p2 as u32, e2)];
                    gt.push((idx, sp));
                }
                gen_tabs.push(gt);
            }
            let ms = comp
                .space
                .items
                .iter()
                .map(|i| i.degree + 1)
                .min()
                .unwrap_or(1);
            min_susp.insert(r, ms);
            labels.insert(r, tab);
            lookup.insert(r, map);
            acts.insert(r, gen_tabs);
        }
        Ok(BarCtx {
            operad,
            arity_cutoff,
            e_bound,
            labels,
            lookup,
            acts,
            min_susp,
        })
    }

    pub fn field(&self) -> Field {
        self.operad.field()
    }

    pub fn label_count(&self, arity: u8) -> usize {
        self.labels.get(&arity).map(Vec::len).unwrap_or(0)
    }

    pub fn label(&self, arity: u8, idx: u32) -> &QLabel {
        &self.labels[&arity][idx as usize]
    }

    pub fn find_label(&self, arity: u8, p: u32, e: &ETuple) -> Result<u32> {
        self.lookup
            .get(&arity)
            .and_then(|m| m.get(&(p, e.clone())))
            .copied()
            .ok_or_else(|| {
                Error::capability(format!(
                    "label at arity {arity}, tuple degree {} is outside the tabulated range",
                    e.degree()
                ))
            })
    }

    pub fn suspended_degree(&self, arity: u8, idx: u32) -> i64 {
        let q = self.label(arity, idx);
        let dp = self.operad.module.component(arity).unwrap().space.items[q.p as usize].degree;
        dp + q.e.degree() + 1
    }

    pub fn min_suspended(&self, arity: u8) -> i64 {
        *self.min_susp.get(&arity).unwrap_or(&1)
    }

    /// Weight plus the tuple degrees of all labels.  This is the filtration
    /// the stagewise solvers climb: it is preserved by the symmetric action
    /// and strictly dropped by every differential and insertion term.
    pub fn grade(&self, node: &Node) -> u32 {
        match node {
            Node::Leaf(_) => 0,
            Node::V { arity, label, kids } => {
                let e = self.label(*arity, *label).e.degree() as u32;
                1 + e + kids.iter().map(|k| self.grade(k)).sum::<u32>()
            }
        }
    }

    /// Signed left action on a label, through the transposition tables.
    pub fn act_label_full(&self, arity: u8, idx: u32, perm: &Perm) -> (u32, Scalar) {
        let f = self.field();
        let mut cur = idx;
        let mut sign = Scalar::one(f);
        let tabs = &self.acts[&arity];
        for k in perm.adjacent_factorization().iter().rev() {
            let (nxt, s) = &tabs[(*k - 1) as usize][cur as usize];
            cur = *nxt;
            sign = sign.mul(s);
        }
        (cur, sign)
    }

    /// The vertex differential: the operation part is carried across the
    /// suspension, so it contributes its degree as a sign to the tuple
    /// faces.
    pub fn label_differential(&self, arity: u8, idx: u32) -> Result<Vec<(u32, Scalar)>> {
        let f = self.field();
        let q = self.label(arity, idx).clone();
        let dp = self.operad.module.component(arity).unwrap().space.items[q.p as usize].degree;
        let sign = Scalar::sign(f, dp);
        let mut out = Vec::new();
        for (e2, c) in q.e.differential(f) {
            out.push((self.find_label(arity, q.p, &e2)?, c.mul(&sign)));
        }
        Ok(out)
    }

    /// Composite of two labels at input slot k (1-based): operation and
    /// tuple compose side by side, with the Koszul sign of the left tuple
    /// passing the right operation.
    pub fn label_compose(&self, r: u8, k: u8, s: u8, lu: u32, lv: u32) -> Result<Vec<(u32, Scalar)>> {
        let f = self.field();
        let qu = self.label(r, lu).clone();
        let qv = self.label(s, lv).clone();
        let dp_v = self.operad.module.component(s).unwrap().space.items[qv.p as usize].degree;
        let swap = Scalar::sign(f, qu.e.degree() * dp_v);
        let pcomp = self.operad.compose_pair(r, k, s, qu.p as usize, qv.p as usize)?;
        let ecomp = qu.e.compose(k, &qv.e, f);
        let mut out = Vec::new();
        for (e2, ce) in &ecomp {
            for (p2, cp) in &pcomp {
                let idx = self.find_label(r + s - 1, *p2 as u32, e2)?;
                out.push((idx, swap.mul(ce).mul(cp)));
            }
        }
        Ok(out)
    }
}

/// Tree context for cooperad cells: leaves are numbered slots of degree 0.
pub struct BarView<'a> {
    pub bar: &'a BarCtx,
}

/// Tree context for evaluated terms: leaf payloads index a graded basis.
pub struct TermView<'a> {
    pub bar: &'a BarCtx,
    pub leaf_degrees: &'a [i64],
}

impl<'a> TreeCtx for BarView<'a> {
    fn field(&self) -> Field {
        self.bar.field()
    }
    fn label_degree(&self, arity: u8, label: u32) -> i64 {
        self.bar.suspended_degree(arity, label)
    }
    fn leaf_degree(&self, _payload: u32) -> i64 {
        0
    }
    fn act_label(&self, arity: u8, label: u32, perm: &Perm) -> (u32, Scalar) {
        self.bar.act_label_full(arity, label, perm)
    }
}

impl<'a> TreeCtx for TermView<'a> {
    fn field(&self) -> Field {
        self.bar.field()
    }
    fn label_degree(&self, arity: u8, label: u32) -> i64 {
        self.bar.suspended_degree(arity, label)
    }
    fn leaf_degree(&self, payload: u32) -> i64 {
        self.leaf_degrees[payload as usize]
    }
    fn act_label(&self, arity: u8, label: u32, perm: &Perm) -> (u32, Scalar) {
        self.bar.act_label_full(arity, label, perm)
    }
}

/// Shared behaviour of the two views: access to the label tables and the
/// appropriate canonical form (leaf-sorted cells, content-sorted terms).
pub trait QView: TreeCtx + Sized {
    fn bar(&self) -> &BarCtx;
    fn canon(&self, n: &Node) -> Option<(Node, Scalar)>;
}

impl<'a> QView for BarView<'a> {
    fn bar(&self) -> &BarCtx {
        self.bar
    }
    fn canon(&self, n: &Node) -> Option<(Node, Scalar)> {
        Some(canon_bar(self, n))
    }
}

impl<'a> QView for TermView<'a> {
    fn bar(&self) -> &BarCtx {
        self.bar
    }
    fn canon(&self, n: &Node) -> Option<(Node, Scalar)> {
        canonicalize(self, n)
    }
}

struct VertexPos {
    path: Vec<usize>,
    arity: u8,
    label: u32,
    pre: i64,
}

struct EdgePos {
    parent_path: Vec<usize>,
    kid_index: usize,
    r: u8,
    s: u8,
    label_u: u32,
    label_v: u32,
    pre_u: i64,
    between: i64,
    sdeg_u: i64,
    sdeg_v: i64,
}

fn scan_tree<V: QView>(
    view: &V,
    node: &Node,
    path: &mut Vec<usize>,
    prefix: &mut i64,
    verts: &mut Vec<VertexPos>,
    edges: &mut Vec<EdgePos>,
) {
    match node {
        Node::Leaf(p) => {
            *prefix += view.leaf_degree(*p);
        }
        Node::V { arity, label, kids } => {
            let pre = *prefix;
            let sdeg = view.label_degree(*arity, *label);
            verts.push(VertexPos {
                path: path.clone(),
                arity: *arity,
                label: *label,
                pre,
            });
            *prefix += sdeg;
            for (j, kid) in kids.iter().enumerate() {
                if let Node::V {
                    arity: s,
                    label: lv,
                    ..
                } = kid
                {
                    edges.push(EdgePos {
                        parent_path: path.clone(),
                        kid_index: j,
                        r: *arity,
                        s: *s,
                        label_u: *label,
                        label_v: *lv,
                        pre_u: pre,
                        between: *prefix - (pre + sdeg),
                        sdeg_u: sdeg,
                        sdeg_v: view.label_degree(*s, *lv),
                    });
                }
                path.push(j);
                scan_tree(view, kid, path, prefix, verts, edges);
                path.pop();
            }
        }
    }
}

fn with_label(node: &Node, path: &[usize], new_label: u32) -> Node {
    match node {
        Node::Leaf(_) => unreachable!(),
        Node::V { arity, label, kids } => {
            if path.is_empty() {
                Node::V {
                    arity: *arity,
                    label: new_label,
                    kids: kids.clone(),
                }
            } else {
                let mut ks = kids.clone();
                ks[path[0]] = with_label(&kids[path[0]], &path[1..], new_label);
                Node::V {
                    arity: *arity,
                    label: *label,
                    kids: ks,
                }
            }
        }
    }
}

fn contract_edge(node: &Node, path: &[usize], kid_index: usize, new_label: u32) -> Node {
    match node {
        Node::Leaf(_) => unreachable!(),
        Node::V { arity, label, kids } => {
            if path.is_empty() {
                let Node::V { kids: vkids, .. } = &kids[kid_index] else {
                    unreachable!()
                };
                let mut ks: Vec<Node> = Vec::with_capacity(kids.len() + vkids.len() - 1);
                ks.extend(kids[..kid_index].iter().cloned());
                ks.extend(vkids.iter().cloned());
                ks.extend(kids[kid_index + 1..].iter().cloned());
                Node::V {
                    arity: arity + vkids.len() as u8 - 1,
                    label: new_label,
                    kids: ks,
                }
            } else {
                let mut ks = kids.clone();
                ks[path[0]] = contract_edge(&kids[path[0]], &path[1..], kid_index, new_label);
                Node::V {
                    arity: *arity,
                    label: *label,
                    kids: ks,
                }
            }
        }
    }
}

/// The faces of the differential in the planar presentation, before any
/// canonical form is taken: tuple faces at every vertex plus contraction of
/// every internal edge, with signs read off the planar symbol string.
/// Useful when faces must be compared slot-by-slot rather than as classes.
pub fn planar_faces<V: QView>(view: &V, tree: &Node) -> Result<Chain<Node>> {
    let f = view.field();
    let mut verts = Vec::new();
    let mut edges = Vec::new();
    scan_tree(view, tree, &mut Vec::new(), &mut 0, &mut verts, &mut edges);
    let mut out: Chain<Node> = Chain::new();
    for v in &verts {
        let pass = Scalar::sign(f, v.pre);
        for (l2, c) in view.bar().label_differential(v.arity, v.label)? {
            chain_add(&mut out, with_label(tree, &v.path, l2), pass.mul(&c));
        }
    }
    for e in &edges {
        // The contraction carries the parent label across the suspension:
        // its reduced degree (one less than the vertex degree) is the sign
        // that makes strict structures close.
        let sign = Scalar::sign(f, e.pre_u)
            .mul(&koszul_move(f, e.sdeg_v, e.between))
            .mul(&Scalar::sign(f, e.sdeg_u + 1));
        let k = (e.kid_index + 1) as u8;
        for (l2, c) in view.bar().label_compose(e.r, k, e.s, e.label_u, e.label_v)? {
            let t2 = contract_edge(tree, &e.parent_path, e.kid_index, l2);
            chain_add(&mut out, t2, sign.mul(&c));
        }
    }
    Ok(out)
}

/// The cell differential: the planar faces folded into canonical form.
pub fn differential<V: QView>(view: &V, tree: &Node) -> Result<Chain<Node>> {
    let mut out: Chain<Node> = Chain::new();
    for (t2, c) in planar_faces(view, tree)? {
        if let Some((cn, cs)) = view.canon(&t2) {
            chain_add(&mut out, cn, c.mul(&cs));
        }
    }
    Ok(out)
}

pub fn differential_chain<V: QView>(view: &V, chain: &Chain<Node>) -> Result<Chain<Node>> {
    let mut out = Chain::new();
    for (t, c) in chain {
        let d = differential(view, t)?;
        chain_add_all(&mut out, &d, c);
    }
    Ok(out)
}

/// Renumbers a cell's leaves order-preservingly to 1..n.
pub fn renumber(node: &Node) -> Node {
    let mut ls = node.leaves();
    ls.sort_unstable();
    let map: BTreeMap<u32, u32> = ls.iter().enumerate().map(|(i, l)| (*l, i as u32 + 1)).collect();
    node.map_leaves(&|l| map[&l])
}

/// Two-factor decompositions of a cell: for every vertex or leaf position,
/// the subtree there (renumbered) paired with the cell left behind, whose
/// fresh leaf takes the extracted subtree's minimal leaf number.  The sign
/// moves the extracted block to the right, past everything after it.
pub fn nu2_pairs<'a>(view: &BarView<'a>, tree: &Node) -> Result<Chain<(Node, Node)>> {
    let f = view.field();
    let total = tree.degree(view);
    let mut out: Chain<(Node, Node)> = Chain::new();
    for sp in coder_splits(view, tree) {
        let udeg = sp.upper.degree(view);
        let post = total - sp.pre - udeg;
        let sign = koszul_move(f, udeg, post);
        let slot = sp.upper.min_leaf();
        let lower = renumber(&sp.lower.fill_holes(&[Node::Leaf(slot)]));
        let upper = renumber(&sp.upper);
        // Extracted blocks keep their internal planar order, and both
        // pieces stay leaf-sorted, so renumbering costs no sign.
        chain_add(&mut out, (lower, upper), sign);
    }
    Ok(out)
}

/// All cells with the given leaf count and vertex count, in content order.
/// Labels run over the tabulated range, optionally pruned by total degree.
pub fn enumerate_cells(
    ctx: &BarCtx,
    n: u8,
    weight: u32,
    max_degree: Option<i64>,
) -> Result<Vec<Node>> {
    if weight == 0 {
        return Ok(if n == 1 { vec![Node::Leaf(1)] } else { vec![] });
    }
    if n < 2 {
        return Ok(vec![]);
    }
    let leaves: Vec<u32> = (1..=n as u32).collect();
    let mut shapes = Vec::new();
    tree_shapes(ctx.arity_cutoff, &leaves, weight, &mut shapes);
    let mut cells = Vec::new();
    for shape in &shapes {
        fill_labels(ctx, shape, max_degree, &mut cells)?;
    }
    cells.sort();
    Ok(cells)
}

fn tree_shapes(max_arity: u8, leaves: &[u32], weight: u32, out: &mut Vec<Node>) {
    if weight == 0 {
        if leaves.len() == 1 {
            out.push(Node::Leaf(leaves[0]));
        }
        return;
    }
    if (leaves.len() as u32) < weight + 1 {
        return;
    }
    let top = max_arity.min(leaves.len() as u8);
    for r in 2..=top {
        for blocks in partitions_by_minima(leaves, r as usize) {
            for wsplit in compositions(weight - 1, r as usize) {
                let mut kid_options: Vec<Vec<Node>> = Vec::with_capacity(r as usize);
                let mut dead = false;
                for (b, w) in blocks.iter().zip(wsplit.iter()) {
                    let mut opts = Vec::new();
                    tree_shapes(max_arity, b, *w, &mut opts);
                    if opts.is_empty() {
                        dead = true;
                        break;
                    }
                    kid_options.push(opts);
                }
                if dead {
                    continue;
                }
                let mut combos: Vec<Vec<Node>> = vec![Vec::new()];
                for opts in &kid_options {
                    let mut next = Vec::new();
                    for c in &combos {
                        for o in opts {
                            let mut c2 = c.clone();
                            c2.push(o.clone());
                            next.push(c2);
                        }
                    }
                    combos = next;
                }
                for kids in combos {
                    out.push(Node::V {
                        arity: r,
                        label: 0,
                        kids,
                    });
                }
            }
        }
    }
}

/// Partitions of a sorted leaf list into exactly `r` nonempty blocks, listed
/// in order of their minima (restricted growth encoding).
fn partitions_by_minima(leaves: &[u32], r: usize) -> Vec<Vec<Vec<u32>>> {
    let n = leaves.len();
    let mut out = Vec::new();
    let mut codes = vec![0usize; n];
    fn rec(
        leaves: &[u32],
        codes: &mut Vec<usize>,
        i: usize,
        maxc: usize,
        r: usize,
        out: &mut Vec<Vec<Vec<u32>>>,
    ) {
        let n = leaves.len();
        if i == n {
            if maxc + 1 == r {
                let mut blocks = vec![Vec::new(); r];
                for (j, &c) in codes.iter().enumerate() {
                    blocks[c].push(leaves[j]);
                }
                out.push(blocks);
            }
            return;
        }
        // Remaining positions must still be able to reach r blocks.
        for c in 0..=(maxc + 1).min(r - 1) {
            codes[i] = c;
            let newmax = maxc.max(c);
            if newmax + 1 + (n - i - 1) >= r {
                rec(leaves, codes, i + 1, newmax, r, out);
            }
        }
    }
    if n == 0 || r == 0 || r > n {
        return out;
    }
    codes[0] = 0;
    rec(leaves, &mut codes, 1, 0, r, &mut out);
    out
}

fn compositions(total: u32, parts: usize) -> Vec<Vec<u32>> {
    if parts == 0 {
        return if total == 0 { vec![vec![]] } else { vec![] };
    }
    let mut out = Vec::new();
    for first in 0..=total {
        for mut rest in compositions(total - first, parts - 1) {
            let mut v = vec![first];
            v.append(&mut rest);
            out.push(v);
        }
    }
    out
}

fn fill_labels(ctx: &BarCtx, shape: &Node, max_degree: Option<i64>, out: &mut Vec<Node>) -> Result<()> {
    // Collect vertex arities in DFS order, then assign labels with a
    // remaining-degree budget.
    fn arities(n: &Node, v: &mut Vec<u8>) {
        if let Node::V { arity, kids, .. } = n {
            v.push(*arity);
            kids.iter().for_each(|k| arities(k, v));
        }
    }
    let mut ar = Vec::new();
    arities(shape, &mut ar);
    let min_rest: Vec<i64> = {
        let mut suffix = vec![0i64; ar.len() + 1];
        for i in (0..ar.len()).rev() {
            suffix[i] = suffix[i + 1] + ctx.min_suspended(ar[i]);
        }
        suffix
    };
    let mut assignment: Vec<u32> = Vec::with_capacity(ar.len());
    fn rec(
        ctx: &BarCtx,
        shape: &Node,
        ar: &[u8],
        min_rest: &[i64],
        max_degree: Option<i64>,
        used: i64,
        assignment: &mut Vec<u32>,
        out: &mut Vec<Node>,
    ) {
        let i = assignment.len();
        if i == ar.len() {
            let mut it = assignment.iter();
            out.push(apply_labels(shape, &mut it));
            return;
        }
        for idx in 0..ctx.label_count(ar[i]) {
            let d = ctx.suspended_degree(ar[i], idx as u32);
            if let Some(m) = max_degree {
                if used + d + min_rest[i + 1] > m {
                    continue;
                }
            }
            assignment.push(idx as u32);
            rec(ctx, shape, ar, min_rest, max_degree, used + d, assignment, out);
            assignment.pop();
        }
    }
    fn apply_labels<'a>(n: &Node, it: &mut impl Iterator<Item = &'a u32>) -> Node {
        match n {
            Node::Leaf(p) => Node::Leaf(*p),
            Node::V { arity, kids, .. } => {
                let label = *it.next().unwrap();
                Node::V {
                    arity: *arity,
                    label,
                    kids: kids.iter().map(|k| apply_labels(k, it)).collect(),
                }
            }
        }
    }
    rec(ctx, shape, &ar, &min_rest, max_degree, 0, &mut assignment, out);
    Ok(())
}
