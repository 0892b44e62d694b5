use crate::field::{Field, Scalar};
use crate::perm::Perm;

/// Leaf payloads at or above this value are slot holes awaiting substitution.
pub const HOLE_BASE: u32 = 1 << 30;

/// A rooted tree with labelled internal vertices.  Leaf payloads are either
/// leaf numbers (for cooperad cells) or basis indices of attached inputs (for
/// evaluated terms).  The derived ordering is plain content order and is what
/// canonical forms sort by.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum Node {
    Leaf(u32),
    V { arity: u8, label: u32, kids: Vec<Node> },
}

/// Degree and sign data for the trees: the homological degree of each vertex
/// label (already including the shift that makes every vertex contribute at
/// least one), the degree of each leaf payload, and a signed permutation
/// action on labels.
pub trait TreeCtx {
    fn field(&self) -> Field;
    fn label_degree(&self, arity: u8, label: u32) -> i64;
    fn leaf_degree(&self, payload: u32) -> i64;
    /// Left action of `perm` on the arity-`arity` label, as a signed basis
    /// element.
    fn act_label(&self, arity: u8, label: u32, perm: &Perm) -> (u32, Scalar);
}

impl Node {
    pub fn corolla(arity: u8, label: u32, payloads: &[u32]) -> Node {
        assert_eq!(arity as usize, payloads.len());
        Node::V {
            arity,
            label,
            kids: payloads.iter().map(|p| Node::Leaf(*p)).collect(),
        }
    }

    pub fn weight(&self) -> u32 {
        match self {
            Node::Leaf(_) => 0,
            Node::V { kids, .. } => 1 + kids.iter().map(Node::weight).sum::<u32>(),
        }
    }

    pub fn collect_leaves(&self, out: &mut Vec<u32>) {
        match self {
            Node::Leaf(p) => out.push(*p),
            Node::V { kids, .. } => kids.iter().for_each(|k| k.collect_leaves(out)),
        }
    }

    pub fn leaves(&self) -> Vec<u32> {
        let mut v = Vec::new();
        self.collect_leaves(&mut v);
        v
    }

    pub fn leaf_count(&self) -> usize {
        match self {
            Node::Leaf(_) => 1,
            Node::V { kids, .. } => kids.iter().map(Node::leaf_count).sum(),
        }
    }

    pub fn min_leaf(&self) -> u32 {
        match self {
            Node::Leaf(p) => *p,
            Node::V { kids, .. } => kids.iter().map(Node::min_leaf).min().unwrap(),
        }
    }

    pub fn degree<C: TreeCtx>(&self, ctx: &C) -> i64 {
        match self {
            Node::Leaf(p) => {
                if *p >= HOLE_BASE {
                    0
                } else {
                    ctx.leaf_degree(*p)
                }
            }
            Node::V { arity, label, kids } => {
                ctx.label_degree(*arity, *label)
                    + kids.iter().map(|k| k.degree(ctx)).sum::<i64>()
            }
        }
    }

    /// Degrees of the interleaved symbol string: label symbols and leaf
    /// symbols in planar depth-first order.
    pub fn symbols<C: TreeCtx>(&self, ctx: &C, out: &mut Vec<i64>) {
        match self {
            Node::Leaf(p) => out.push(if *p >= HOLE_BASE { 0 } else { ctx.leaf_degree(*p) }),
            Node::V { arity, label, kids } => {
                out.push(ctx.label_degree(*arity, *label));
                kids.iter().for_each(|k| k.symbols(ctx, out));
            }
        }
    }

    pub fn map_leaves(&self, f: &impl Fn(u32) -> u32) -> Node {
        match self {
            Node::Leaf(p) => Node::Leaf(f(*p)),
            Node::V { arity, label, kids } => Node::V {
                arity: *arity,
                label: *label,
                kids: kids.iter().map(|k| k.map_leaves(f)).collect(),
            },
        }
    }

    /// Replaces every hole leaf `HOLE_BASE + j` by `fills[j]`.
    pub fn fill_holes(&self, fills: &[Node]) -> Node {
        match self {
            Node::Leaf(p) if *p >= HOLE_BASE => fills[(*p - HOLE_BASE) as usize].clone(),
            Node::Leaf(p) => Node::Leaf(*p),
            Node::V { arity, label, kids } => Node::V {
                arity: *arity,
                label: *label,
                kids: kids.iter().map(|k| k.fill_holes(fills)).collect(),
            },
        }
    }
}

/// Koszul sign of rearranging graded blocks: `order[j]` is the source block
/// placed at target slot j; each inverted pair of odd blocks contributes -1.
pub fn koszul_reorder(field: Field, degs: &[i64], order: &[usize]) -> Scalar {
    let mut exp: i64 = 0;
    for j in 0..order.len() {
        for k in j + 1..order.len() {
            if order[j] > order[k] {
                exp += degs[order[j]] * degs[order[k]];
            }
        }
    }
    Scalar::sign(field, exp)
}

/// Koszul sign of moving a block of degree `d` past symbols totalling `past`.
pub fn koszul_move(field: Field, d: i64, past: i64) -> Scalar {
    Scalar::sign(field, d * past)
}

fn argsort_by<T, K: Ord>(items: &[T], key: impl Fn(&T) -> K) -> Vec<usize> {
    let mut order: Vec<usize> = (0..items.len()).collect();
    order.sort_by_key(|&i| (key(&items[i]), i));
    order
}

/// Canonical form of a cooperad cell: every vertex lists its children in
/// increasing order of minimal leaf.  Returns the sorted tree and the Koszul
/// sign picked up by the block moves and label transport.  Leaf numbers must
/// be pairwise distinct.
pub fn canon_bar<C: TreeCtx>(ctx: &C, node: &Node) -> (Node, Scalar) {
    let f = ctx.field();
    match node {
        Node::Leaf(_) => (node.clone(), Scalar::one(f)),
        Node::V { arity, label, kids } => {
            let mut sign = Scalar::one(f);
            let mut cs = Vec::with_capacity(kids.len());
            for k in kids {
                let (c, s) = canon_bar(ctx, k);
                sign = sign.mul(&s);
                cs.push(c);
            }
            let order = argsort_by(&cs, Node::min_leaf);
            let mut lab = *label;
            if order.iter().enumerate().any(|(j, &o)| j != o) {
                let degs: Vec<i64> = cs.iter().map(|c| c.degree(ctx)).collect();
                sign = sign.mul(&koszul_reorder(f, &degs, &order));
                let rho = Perm::new(order.iter().map(|&o| (o + 1) as u8).collect());
                let (l2, s2) = ctx.act_label(*arity, *label, &rho.inverse());
                lab = l2;
                sign = sign.mul(&s2);
            }
            let sorted = order.iter().map(|&o| cs[o].clone()).collect();
            (
                Node::V {
                    arity: *arity,
                    label: lab,
                    kids: sorted,
                },
                sign,
            )
        }
    }
}

/// Leaf relabelling action of a permutation on a cooperad cell: leaf l is
/// renamed sigma(l), then the tree is re-sorted into canonical form.
pub fn act_bar<C: TreeCtx>(ctx: &C, node: &Node, sigma: &Perm) -> (Node, Scalar) {
    let relabelled = node.map_leaves(&|l| sigma.apply(l as u8) as u32);
    canon_bar(ctx, &relabelled)
}

fn stabilizer_perms(runs: &[(usize, usize)], arity: u8) -> Vec<Perm> {
    let mut out = vec![Perm::identity(arity)];
    for &(start, len) in runs {
        let mut next = Vec::new();
        for base in &out {
            for run_perm in Perm::all(len as u8) {
                let mut word = base.0.clone();
                for i in 0..len {
                    word[start + i] = (start as u8) + run_perm.apply((i + 1) as u8);
                }
                next.push(Perm::new(word));
            }
        }
        out = next;
    }
    out
}

/// Canonical form of an evaluated term: children sorted by content, ties
/// broken by transporting the label along the stabilizer of the repeated
/// children and taking the least reachable label.  Returns None when the two
/// signs of the same least label collide, i.e. the term is zero.
pub fn canonicalize<C: TreeCtx>(ctx: &C, node: &Node) -> Option<(Node, Scalar)> {
    let f = ctx.field();
    match node {
        Node::Leaf(_) => Some((node.clone(), Scalar::one(f))),
        Node::V { arity, label, kids } => {
            let mut sign = Scalar::one(f);
            let mut cs = Vec::with_capacity(kids.len());
            for k in kids {
                let (c, s) = canonicalize(ctx, k)?;
                sign = sign.mul(&s);
                cs.push(c);
            }
            let order = argsort_by(&cs, |c| c.clone());
            let degs: Vec<i64> = cs.iter().map(|c| c.degree(ctx)).collect();
            let mut lab = *label;
            if order.iter().enumerate().any(|(j, &o)| j != o) {
                sign = sign.mul(&koszul_reorder(f, &degs, &order));
                let rho = Perm::new(order.iter().map(|&o| (o + 1) as u8).collect());
                let (l2, s2) = ctx.act_label(*arity, *label, &rho.inverse());
                lab = l2;
                sign = sign.mul(&s2);
            }
            let sorted: Vec<Node> = order.iter().map(|&o| cs[o].clone()).collect();
            let sorted_degs: Vec<i64> = order.iter().map(|&o| degs[o]).collect();

            let mut runs = Vec::new();
            let mut i = 0;
            while i < sorted.len() {
                let mut j = i + 1;
                while j < sorted.len() && sorted[j] == sorted[i] {
                    j += 1;
                }
                if j - i >= 2 {
                    runs.push((i, j - i));
                }
                i = j;
            }
            let mut best: Option<(u32, Scalar)> = None;
            let mut zero = false;
            if runs.is_empty() {
                best = Some((lab, Scalar::one(f)));
            } else {
                for pi in stabilizer_perms(&runs, *arity) {
                    let ord: Vec<usize> = (1..=*arity).map(|i| (pi.apply(i) - 1) as usize).collect();
                    let kappa = koszul_reorder(f, &sorted_degs, &ord);
                    let (lp, sp) = ctx.act_label(*arity, lab, &pi);
                    let total = kappa.mul(&sp);
                    match &best {
                        None => best = Some((lp, total)),
                        Some((bl, bs)) => {
                            if lp < *bl {
                                best = Some((lp, total));
                            } else if lp == *bl && *bs != total {
                                zero = true;
                            }
                        }
                    }
                }
            }
            if zero {
                return None;
            }
            let (bl, bs) = best.unwrap();
            Some((
                Node::V {
                    arity: *arity,
                    label: bl,
                    kids: sorted,
                },
                sign.mul(&bs),
            ))
        }
    }
}

/// Substitutes `guest` (a cell with leaves 1..s) for leaf `leaf_no` of
/// `host`; the guest's leaves become leaf_no..leaf_no+s-1 and later host
/// leaves shift up.  The sign moves the guest block from the end of the
/// concatenated string into its slot, past everything after the leaf.
pub fn graft<C: TreeCtx>(ctx: &C, host: &Node, leaf_no: u32, guest: &Node) -> (Node, Scalar) {
    let f = ctx.field();
    let s = guest.leaf_count() as u32;
    let mut post = 0i64;
    let mut seen = false;
    let mut syms: Vec<(Option<u32>, i64)> = Vec::new();
    collect_symbols(ctx, host, &mut syms);
    for (leaf, d) in &syms {
        if seen {
            post += d;
        }
        if *leaf == Some(leaf_no) {
            seen = true;
        }
    }
    assert!(seen, "host has no leaf {leaf_no}");
    let sign = koszul_move(f, guest.degree(ctx), post);
    let shifted_guest = guest.map_leaves(&|l| l + leaf_no - 1);
    let out = splice(host, leaf_no, &shifted_guest, s);
    (out, sign)
}

fn collect_symbols<C: TreeCtx>(ctx: &C, node: &Node, out: &mut Vec<(Option<u32>, i64)>) {
    match node {
        Node::Leaf(p) => out.push((
            Some(*p),
            if *p >= HOLE_BASE { 0 } else { ctx.leaf_degree(*p) },
        )),
        Node::V { arity, label, kids } => {
            out.push((None, ctx.label_degree(*arity, *label)));
            kids.iter().for_each(|k| collect_symbols(ctx, k, out));
        }
    }
}

fn splice(host: &Node, leaf_no: u32, guest: &Node, s: u32) -> Node {
    match host {
        Node::Leaf(p) => {
            if *p == leaf_no {
                guest.clone()
            } else if *p > leaf_no && *p < HOLE_BASE {
                Node::Leaf(*p + s - 1)
            } else {
                Node::Leaf(*p)
            }
        }
        Node::V { arity, label, kids } => Node::V {
            arity: *arity,
            label: *label,
            kids: kids.iter().map(|k| splice(k, leaf_no, guest, s)).collect(),
        },
    }
}

/// One position of a coderivation-style split: the subtree at a single
/// vertex or leaf is handed to the corestriction, whose value fills the hole
/// left behind.  `pre` is the total degree of the symbols strictly before
/// the extracted block in the planar string; an operator of degree h picks
/// up the sign (-1)^(h*pre) on its way in.
#[derive(Debug, Clone)]
pub struct CoderSplit {
    pub lower: Node,
    pub upper: Node,
    pub pre: i64,
}

pub fn coder_splits<C: TreeCtx>(ctx: &C, tree: &Node) -> Vec<CoderSplit> {
    let mut out = Vec::new();
    let mut prefix = 0i64;
    walk_coder(ctx, tree, tree, &mut Vec::new(), &mut prefix, &mut out);
    out
}

fn replace_at_path(node: &Node, path: &[usize], with: &Node) -> Node {
    if path.is_empty() {
        return with.clone();
    }
    match node {
        Node::Leaf(_) => unreachable!("path descends through a leaf"),
        Node::V { arity, label, kids } => {
            let mut ks = kids.clone();
            ks[path[0]] = replace_at_path(&kids[path[0]], &path[1..], with);
            Node::V {
                arity: *arity,
                label: *label,
                kids: ks,
            }
        }
    }
}

fn walk_coder<C: TreeCtx>(
    ctx: &C,
    root: &Node,
    node: &Node,
    path: &mut Vec<usize>,
    prefix: &mut i64,
    out: &mut Vec<CoderSplit>,
) {
    out.push(CoderSplit {
        lower: replace_at_path(root, path, &Node::Leaf(HOLE_BASE)),
        upper: node.clone(),
        pre: *prefix,
    });
    match node {
        Node::Leaf(p) => {
            *prefix += if *p >= HOLE_BASE { 0 } else { ctx.leaf_degree(*p) };
        }
        Node::V { arity, label, kids } => {
            *prefix += ctx.label_degree(*arity, *label);
            for (i, k) in kids.iter().enumerate() {
                path.push(i);
                walk_coder(ctx, root, k, path, prefix, out);
                path.pop();
            }
        }
    }
}

/// One full split: a downward-closed set of vertices containing the root
/// stays below (with hole leaves `HOLE_BASE + j` in planar order), and each
/// cut branch or exposed leaf becomes the upper at slot j.  The extraction
/// sign rewrites the planar string as (lower symbols)(upper 1)...(upper r);
/// `pre_lower`/`post_lower` give, per slot, the lower label degrees strictly
/// before/after that slot, for consumers to pay the re-insertion costs.
#[derive(Debug, Clone)]
pub struct NuSplit {
    pub lower: Node,
    pub uppers: Vec<Node>,
    pub lower_grade: u32,
    pub pre_lower: Vec<i64>,
    pub post_lower: Vec<i64>,
    pub upper_deg: Vec<i64>,
    pub extraction_sign: Scalar,
}

pub fn nu_splits<C: TreeCtx>(ctx: &C, tree: &Node) -> Vec<NuSplit> {
    let f = ctx.field();
    let counit = NuSplit {
        lower: Node::Leaf(HOLE_BASE),
        uppers: vec![tree.clone()],
        lower_grade: 0,
        pre_lower: vec![0],
        post_lower: vec![0],
        upper_deg: vec![tree.degree(ctx)],
        extraction_sign: Scalar::one(f),
    };
    let mut out = vec![counit];
    if matches!(tree, Node::Leaf(_)) {
        return out;
    }
    for (lower, uppers) in nu_fragments(tree) {
        let mut pre = vec![0i64; uppers.len()];
        let mut acc = 0i64;
        fill_pre(ctx, &lower, &mut acc, &mut pre);
        let total = acc;
        let post: Vec<i64> = pre.iter().map(|p| total - p).collect();
        let upper_deg: Vec<i64> = uppers.iter().map(|u| u.degree(ctx)).collect();
        let mut ext = Scalar::one(f);
        for (j, d) in upper_deg.iter().enumerate() {
            ext = ext.mul(&koszul_move(f, *d, post[j]));
        }
        out.push(NuSplit {
            lower_grade: lower.weight(),
            lower,
            uppers,
            pre_lower: pre,
            post_lower: post,
            upper_deg,
            extraction_sign: ext,
        });
    }
    out
}

fn fill_pre<C: TreeCtx>(ctx: &C, node: &Node, acc: &mut i64, pre: &mut Vec<i64>) {
    match node {
        Node::Leaf(p) => {
            assert!(*p >= HOLE_BASE);
            pre[(*p - HOLE_BASE) as usize] = *acc;
        }
        Node::V { arity, label, kids } => {
            *acc += ctx.label_degree(*arity, *label);
            kids.iter().for_each(|k| fill_pre(ctx, k, acc, pre));
        }
    }
}

fn shift_holes(node: &Node, by: u32) -> Node {
    node.map_leaves(&|l| if l >= HOLE_BASE { l + by } else { l })
}

/// All ways to keep the root vertex and, per child, either cut the branch or
/// keep descending.  Returns (lower-with-holes, uppers in planar order).
fn nu_fragments(node: &Node) -> Vec<(Node, Vec<Node>)> {
    let Node::V { arity, label, kids } = node else {
        unreachable!()
    };
    let per_kid: Vec<Vec<(Node, Vec<Node>)>> = kids
        .iter()
        .map(|k| {
            let mut opts = vec![(Node::Leaf(HOLE_BASE), vec![k.clone()])];
            if matches!(k, Node::V { .. }) {
                opts.extend(nu_fragments(k));
            }
            opts
        })
        .collect();
    let mut combos: Vec<(Vec<Node>, Vec<Node>)> = vec![(Vec::new(), Vec::new())];
    for opts in &per_kid {
        let mut next = Vec::new();
        for (lows, ups) in &combos {
            for (low, up) in opts {
                let mut lows2 = lows.clone();
                let mut ups2 = ups.clone();
                lows2.push(shift_holes(low, ups.len() as u32));
                ups2.extend(up.iter().cloned());
                next.push((lows2, ups2));
            }
        }
        combos = next;
    }
    combos
        .into_iter()
        .map(|(lows, ups)| {
            (
                Node::V {
                    arity: *arity,
                    label: *label,
                    kids: lows,
                },
                ups,
            )
        })
        .collect()
}
