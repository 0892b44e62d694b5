use crate::error::{Error, Result};
use crate::field::{Field, Scalar};
use crate::linalg::SparseMatrix;
use crate::perm::Perm;
use crate::sigma::{left_mult_matrix, BasisItem, GradedSpace, SigmaComponent, SigmaModule};
use std::collections::BTreeMap;

/// A chain operad with zero differential, given by its symmetric module of
/// operations and the partial-composition structure constants.
///
/// `compositions[(r, i, s)]` sends the pair basis of arity-r and arity-s
/// operations (left-major: index `p * dim(s) + q`) to arity `r + s - 1`.
#[derive(Debug, Clone)]
pub struct OperadPresentation {
    pub name: String,
    pub module: SigmaModule,
    pub compositions: BTreeMap<(u8, u8, u8), SparseMatrix>,
}

impl OperadPresentation {
    pub fn field(&self) -> Field {
        self.module.field
    }

    pub fn max_arity(&self) -> u8 {
        self.module.components.keys().copied().max().unwrap_or(0)
    }

    pub fn space(&self, arity: u8) -> Result<&GradedSpace> {
        self.module
            .component(arity)
            .map(|c| &c.space)
            .ok_or_else(|| Error::capability(format!("no operations stored at arity {arity}")))
    }

    pub fn composition(&self, r: u8, i: u8, s: u8) -> Result<&SparseMatrix> {
        self.compositions.get(&(r, i, s)).ok_or_else(|| {
            Error::capability(format!("no composition table for arity {r} at slot {i} with arity {s}"))
        })
    }

    /// Composite of basis operations: p at arity r receives q at slot i.
    pub fn compose_pair(&self, r: u8, i: u8, s: u8, p: usize, q: usize) -> Result<Vec<(usize, Scalar)>> {
        let m = self.composition(r, i, s)?;
        let sdim = self.module.dim(s);
        let col = p * sdim + q;
        let mut out = Vec::new();
        for ((row, c), v) in m.iter() {
            if *c == col {
                out.push((*row, v.clone()));
            }
        }
        Ok(out)
    }

    /// Full structural validation: module relations, connectedness at arity 1
    /// (a one-dimensional unit that composes as the identity on both sides),
    /// degree bookkeeping, equivariance of the composition tables on both
    /// factors, and sequential/parallel associativity over the stored range.
    pub fn validate(&self) -> Result<()> {
        let f = self.field();
        self.module.validate()?;
        let unit_c = self
            .module
            .component(1)
            .ok_or_else(|| Error::input("operad is missing its arity-1 component"))?;
        if unit_c.space.dim() != 1 || unit_c.space.items[0].degree != 0 {
            return Err(Error::input(
                "arity-1 component must be one-dimensional in degree zero",
            ));
        }
        for ((r, i, s), m) in &self.compositions {
            let (r, i, s) = (*r, *i, *s);
            if i == 0 || i > r {
                return Err(Error::input(format!("slot {i} out of range for arity {r}")));
            }
            let (dr, ds) = (self.module.dim(r), self.module.dim(s));
            let dout = self.module.dim(r + s - 1);
            if m.rows != dout || m.cols != dr * ds {
                return Err(Error::input(format!(
                    "composition table ({r},{i},{s}) has shape {}x{}, expected {dout}x{}",
                    m.rows,
                    m.cols,
                    dr * ds
                )));
            }
            // Degrees add under composition.
            let rsp = &self.module.component(r).unwrap().space;
            let ssp = &self.module.component(s).unwrap().space;
            let osp = &self.module.component(r + s - 1).unwrap().space;
            for ((row, col), v) in m.iter() {
                if v.is_zero() {
                    continue;
                }
                let dp = rsp.items[col / ds].degree;
                let dq = ssp.items[col % ds].degree;
                if osp.items[*row].degree != dp + dq {
                    return Err(Error::input(format!(
                        "composition ({r},{i},{s}) breaks degree at entry ({row},{col})"
                    )));
                }
            }
        }
        // Units act as identities where both tables exist.
        for (&arity, comp) in &self.module.components {
            let d = comp.space.dim();
            if let Some(m) = self.compositions.get(&(1, 1, arity)) {
                if *m != SparseMatrix::identity(d, f) {
                    return Err(Error::input(format!("left unit fails at arity {arity}")));
                }
            }
            for i in 1..=arity {
                if let Some(m) = self.compositions.get(&(arity, i, 1)) {
                    if *m != SparseMatrix::identity(d, f) {
                        return Err(Error::input(format!(
                            "right unit fails at arity {arity} slot {i}"
                        )));
                    }
                }
            }
        }
        self.validate_equivariance()?;
        self.validate_associativity()?;
        Ok(())
    }

    fn act(&self, arity: u8, p: &Perm, v: &[(usize, Scalar)]) -> Vec<(usize, Scalar)> {
        let c = self.module.component(arity).unwrap();
        let m = c.action(p, self.field());
        let mut acc: BTreeMap<usize, Scalar> = BTreeMap::new();
        for (idx, coeff) in v {
            for ((row, col), mv) in m.iter() {
                if col == idx {
                    let add = mv.mul(coeff);
                    let cur = acc.remove(row).unwrap_or_else(|| Scalar::zero(self.field()));
                    let nv = cur.add(&add);
                    if !nv.is_zero() {
                        acc.insert(*row, nv);
                    }
                }
            }
        }
        acc.into_iter().collect()
    }

    fn validate_equivariance(&self) -> Result<()> {
        for (&(r, i, s), _) in &self.compositions {
            let (dr, ds) = (self.module.dim(r), self.module.dim(s));
            for pi in Perm::all(r) {
                let moved = pi.inverse().apply(i);
                if !self.compositions.contains_key(&(r, moved, s)) {
                    continue;
                }
                let outer = pi.block_compose(i, &Perm::identity(s));
                for p in 0..dr {
                    let pip = self.act(r, &pi, &[(p, Scalar::one(self.field()))]);
                    for q in 0..ds {
                        let mut lhs: BTreeMap<usize, Scalar> = BTreeMap::new();
                        for (pp, cc) in &pip {
                            for (o, ov) in self.compose_pair(r, i, s, *pp, q)? {
                                let add = ov.mul(cc);
                                let cur = lhs
                                    .remove(&o)
                                    .unwrap_or_else(|| Scalar::zero(self.field()));
                                let nv = cur.add(&add);
                                if !nv.is_zero() {
                                    lhs.insert(o, nv);
                                }
                            }
                        }
                        let base = self.compose_pair(r, moved, s, p, q)?;
                        let rhs: BTreeMap<usize, Scalar> =
                            self.act(r + s - 1, &outer, &base).into_iter().collect();
                        if lhs != rhs {
                            return Err(Error::input(format!(
                                "outer equivariance fails at ({r},{i},{s}) with {pi}"
                            )));
                        }
                    }
                }
            }
            for tau in Perm::all(s) {
                let inner = Perm::block_at(r, i, &tau);
                for p in 0..dr {
                    for q in 0..ds {
                        let tq = self.act(s, &tau, &[(q, Scalar::one(self.field()))]);
                        let mut lhs: BTreeMap<usize, Scalar> = BTreeMap::new();
                        for (qq, cc) in &tq {
                            for (o, ov) in self.compose_pair(r, i, s, p, *qq)? {
                                let add = ov.mul(cc);
                                let cur = lhs
                                    .remove(&o)
                                    .unwrap_or_else(|| Scalar::zero(self.field()));
                                let nv = cur.add(&add);
                                if !nv.is_zero() {
                                    lhs.insert(o, nv);
                                }
                            }
                        }
                        let base = self.compose_pair(r, i, s, p, q)?;
                        let rhs: BTreeMap<usize, Scalar> =
                            self.act(r + s - 1, &inner, &base).into_iter().collect();
                        if lhs != rhs {
                            return Err(Error::input(format!(
                                "inner equivariance fails at ({r},{i},{s}) with {tau}"
                            )));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    fn chain_compose(
        &self,
        r: u8,
        i: u8,
        s: u8,
        a: &[(usize, Scalar)],
        b: &[(usize, Scalar)],
    ) -> Result<BTreeMap<usize, Scalar>> {
        let mut out: BTreeMap<usize, Scalar> = BTreeMap::new();
        for (p, cp) in a {
            for (q, cq) in b {
                for (o, ov) in self.compose_pair(r, i, s, *p, *q)? {
                    let add = ov.mul(cp).mul(cq);
                    let cur = out.remove(&o).unwrap_or_else(|| Scalar::zero(self.field()));
                    let nv = cur.add(&add);
                    if !nv.is_zero() {
                        out.insert(o, nv);
                    }
                }
            }
        }
        Ok(out)
    }

    fn validate_associativity(&self) -> Result<()> {
        let f = self.field();
        let max = self.max_arity();
        let arities: Vec<u8> = self.module.components.keys().copied().collect();
        for &r in &arities {
            for &s in &arities {
                for &u in &arities {
                    if r as usize + s as usize + u as usize - 2 > max as usize {
                        continue;
                    }
                    let (dr, ds, du) = (self.module.dim(r), self.module.dim(s), self.module.dim(u));
                    let rsp = &self.module.component(r).unwrap().space;
                    let ssp = &self.module.component(s).unwrap().space;
                    let usp = &self.module.component(u).unwrap().space;
                    for p in 0..dr {
                        for q in 0..ds {
                            for t in 0..du {
                                let one = [(p, Scalar::one(f))];
                                let qv = [(q, Scalar::one(f))];
                                let tv = [(t, Scalar::one(f))];
                                // Sequential: substitute into the substituted slot.
                                for i in 1..=r {
                                    for j in 1..=s {
                                        let pq = self.chain_compose(r, i, s, &one, &qv)?;
                                        let pqv: Vec<_> = pq.into_iter().collect();
                                        let lhs = self.chain_compose(
                                            r + s - 1,
                                            i + j - 1,
                                            u,
                                            &pqv,
                                            &tv,
                                        )?;
                                        let qt = self.chain_compose(s, j, u, &qv, &tv)?;
                                        let qtv: Vec<_> = qt.into_iter().collect();
                                        let rhs =
                                            self.chain_compose(r, i, s + u - 1, &one, &qtv)?;
                                        if lhs != rhs {
                                            return Err(Error::input(format!(
                                                "sequential associativity fails at r={r} i={i} s={s} j={j} u={u}"
                                            )));
                                        }
                                    }
                                }
                                // Parallel: two disjoint slots commute up to the
                                // Koszul sign of the operands passing each other.
                                for i in 1..=r {
                                    for j in (i + 1)..=r {
                                        let pq = self.chain_compose(r, i, s, &one, &qv)?;
                                        let pqv: Vec<_> = pq.into_iter().collect();
                                        let lhs = self.chain_compose(
                                            r + s - 1,
                                            j + s - 1,
                                            u,
                                            &pqv,
                                            &tv,
                                        )?;
                                        let pt = self.chain_compose(r, j, u, &one, &tv)?;
                                        let ptv: Vec<_> = pt.into_iter().collect();
                                        let mut rhs =
                                            self.chain_compose(r + u - 1, i, s, &ptv, &qv)?;
                                        let sign = Scalar::sign(
                                            f,
                                            ssp.items[q].degree * usp.items[t].degree,
                                        );
                                        for v in rhs.values_mut() {
                                            *v = v.mul(&sign);
                                        }
                                        let _ = &rsp.items[p];
                                        if lhs != rhs {
                                            return Err(Error::input(format!(
                                                "parallel associativity fails at r={r} i={i} j={j}"
                                            )));
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

/// The operad of commutative multiplications: one operation in each arity,
/// trivial action, all composites equal to the generator.
pub fn builtin_com(field: Field, arity_cutoff: u8) -> OperadPresentation {
    let mut components = BTreeMap::new();
    for r in 1..=arity_cutoff {
        let space = GradedSpace::new(vec![BasisItem {
            id: format!("c{r}"),
            degree: 0,
        }]);
        components.insert(r, SigmaComponent::trivial(field, space, r));
    }
    let mut compositions = BTreeMap::new();
    for r in 1..=arity_cutoff {
        for s in 1..=arity_cutoff {
            if r as usize + s as usize - 1 > arity_cutoff as usize {
                continue;
            }
            for i in 1..=r {
                let mut m = SparseMatrix::new(1, 1, field);
                m.set(0, 0, Scalar::one(field));
                compositions.insert((r, i, s), m);
            }
        }
    }
    OperadPresentation {
        name: "Com".into(),
        module: SigmaModule { field, components },
        compositions,
    }
}

/// The operad of associative multiplications: the regular representation in
/// each arity, composing by block substitution of permutation words.
pub fn builtin_ass(field: Field, arity_cutoff: u8) -> OperadPresentation {
    let mut components = BTreeMap::new();
    let mut bases: BTreeMap<u8, Vec<Perm>> = BTreeMap::new();
    for r in 1..=arity_cutoff {
        let perms = Perm::all(r);
        let items = perms
            .iter()
            .map(|p| BasisItem {
                id: format!("m{p}"),
                degree: 0,
            })
            .collect();
        let gens = (1..r)
            .map(|k| left_mult_matrix(field, &perms, &Perm::adjacent(r, k)))
            .collect();
        components.insert(
            r,
            SigmaComponent {
                space: GradedSpace::new(items),
                gens,
            },
        );
        bases.insert(r, perms);
    }
    let mut compositions = BTreeMap::new();
    for r in 1..=arity_cutoff {
        for s in 1..=arity_cutoff {
            if r as usize + s as usize - 1 > arity_cutoff as usize {
                continue;
            }
            let out = &bases[&(r + s - 1)];
            let out_idx: BTreeMap<&Perm, usize> =
                out.iter().enumerate().map(|(k, p)| (p, k)).collect();
            let ds = bases[&s].len();
            for i in 1..=r {
                let mut m = SparseMatrix::new(out.len(), bases[&r].len() * ds, field);
                for (pi, p) in bases[&r].iter().enumerate() {
                    for (qi, q) in bases[&s].iter().enumerate() {
                        let comp = p.block_compose(i, q);
                        m.set(out_idx[&comp], pi * ds + qi, Scalar::one(field));
                    }
                }
                compositions.insert((r, i, s), m);
            }
        }
    }
    OperadPresentation {
        name: "Ass".into(),
        module: SigmaModule { field, components },
        compositions,
    }
}
