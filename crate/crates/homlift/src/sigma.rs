use crate::error::{Error, Result};
use crate::field::{Field, Scalar};
use crate::linalg::{solve, SparseMatrix};
use crate::perm::Perm;
use std::collections::BTreeMap;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BasisItem {
    pub id: String,
    pub degree: i64,
}

/// A finite list of named basis elements with integer homological degrees.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct GradedSpace {
    pub items: Vec<BasisItem>,
}

impl GradedSpace {
    pub fn new(items: Vec<BasisItem>) -> Self {
        GradedSpace { items }
    }

    pub fn dim(&self) -> usize {
        self.items.len()
    }

    pub fn indices_in_degree(&self, d: i64) -> Vec<usize> {
        self.items
            .iter()
            .enumerate()
            .filter(|(_, it)| it.degree == d)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.items.iter().position(|it| it.id == id)
    }
}

/// One arity of a symmetric-group module: a graded space together with the
/// action of the adjacent transpositions; arbitrary permutations act through
/// their factorization into adjacent swaps.
#[derive(Debug, Clone)]
pub struct SigmaComponent {
    pub space: GradedSpace,
    /// `gens[k]` is the action of the transposition swapping k+1 and k+2
    /// (so `gens.len() == arity - 1`).
    pub gens: Vec<SparseMatrix>,
}

impl SigmaComponent {
    pub fn trivial(field: Field, space: GradedSpace, arity: u8) -> Self {
        let d = space.dim();
        SigmaComponent {
            space,
            gens: (1..arity).map(|_| SparseMatrix::identity(d, field)).collect(),
        }
    }

    pub fn action(&self, p: &Perm, field: Field) -> SparseMatrix {
        let d = self.space.dim();
        let mut m = SparseMatrix::identity(d, field);
        for k in p.adjacent_factorization() {
            m = m.mul_mat(&self.gens[k as usize - 1]);
        }
        m
    }

    /// Checks the defining relations of the symmetric group on the generator
    /// matrices, and that each generator preserves degree.
    pub fn validate(&self, field: Field) -> Result<()> {
        let d = self.space.dim();
        let id = SparseMatrix::identity(d, field);
        for (k, g) in self.gens.iter().enumerate() {
            if g.rows != d || g.cols != d {
                return Err(Error::input(format!(
                    "generator {k} has shape {}x{}, expected {d}x{d}",
                    g.rows, g.cols
                )));
            }
            for ((r, c), v) in g.iter() {
                if self.space.items[*r].degree != self.space.items[*c].degree && !v.is_zero() {
                    return Err(Error::input(format!(
                        "generator {k} does not preserve degree at entry ({r},{c})"
                    )));
                }
            }
            if g.mul_mat(g) != id {
                return Err(Error::input(format!("generator {k} does not square to 1")));
            }
        }
        for k in 0..self.gens.len() {
            for l in k + 1..self.gens.len() {
                let a = &self.gens[k];
                let b = &self.gens[l];
                if l == k + 1 {
                    let aba = a.mul_mat(b).mul_mat(a);
                    let bab = b.mul_mat(a).mul_mat(b);
                    if aba != bab {
                        return Err(Error::input(format!(
                            "braid relation fails between generators {k} and {l}"
                        )));
                    }
                } else if a.mul_mat(b) != b.mul_mat(a) {
                    return Err(Error::input(format!(
                        "distant generators {k} and {l} do not commute"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Monomial tables: for each generator, column j holds (image row, sign).
    /// Returns None when some generator is not a signed permutation matrix.
    pub fn monomial_tables(&self) -> Option<Vec<Vec<(usize, Scalar)>>> {
        let d = self.space.dim();
        let mut out = Vec::with_capacity(self.gens.len());
        for g in &self.gens {
            let mut cols: Vec<Option<(usize, Scalar)>> = vec![None; d];
            for ((r, c), v) in g.iter() {
                if cols[*c].is_some() {
                    return None;
                }
                if !v.is_one() && !v.neg().is_one() {
                    return None;
                }
                cols[*c] = Some((*r, v.clone()));
            }
            let table: Option<Vec<(usize, Scalar)>> = cols.into_iter().collect();
            out.push(table?);
        }
        Some(out)
    }
}

/// A symmetric module: one component per arity.  Missing arities are zero.
#[derive(Debug, Clone)]
pub struct SigmaModule {
    pub field: Field,
    pub components: BTreeMap<u8, SigmaComponent>,
}

impl SigmaModule {
    pub fn component(&self, arity: u8) -> Option<&SigmaComponent> {
        self.components.get(&arity)
    }

    pub fn dim(&self, arity: u8) -> usize {
        self.component(arity).map(|c| c.space.dim()).unwrap_or(0)
    }

    /// Connectedness: nothing in arity 0, exactly a one-dimensional
    /// degree-zero piece in arity 1.
    pub fn is_connected(&self) -> bool {
        if self.dim(0) != 0 {
            return false;
        }
        match self.component(1) {
            Some(c) => c.space.dim() == 1 && c.space.items[0].degree == 0,
            None => false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (arity, c) in &self.components {
            if c.gens.len() + 1 != *arity as usize && !(*arity <= 1 && c.gens.is_empty()) {
                return Err(Error::input(format!(
                    "arity {arity} component has {} generators",
                    c.gens.len()
                )));
            }
            c.validate(self.field)?;
        }
        Ok(())
    }
}

fn kronecker(a: &SparseMatrix, b: &SparseMatrix) -> SparseMatrix {
    let mut out = SparseMatrix::new(a.rows * b.rows, a.cols * b.cols, a.field);
    for ((ra, ca), va) in a.iter() {
        for ((rb, cb), vb) in b.iter() {
            out.set(ra * b.rows + rb, ca * b.cols + cb, va.mul(vb));
        }
    }
    out
}

/// Arity-wise tensor product with the diagonal action.  Pair basis elements
/// are ordered left-major; degrees add.  The group acts simultaneously on
/// both factors, and since the action operators have degree zero no Koszul
/// sign enters: the generator matrices are plain Kronecker products.
pub fn boxtimes(a: &SigmaModule, b: &SigmaModule) -> SigmaModule {
    assert_eq!(a.field, b.field);
    let mut components = BTreeMap::new();
    for (arity, ca) in &a.components {
        let Some(cb) = b.components.get(arity) else {
            continue;
        };
        let mut items = Vec::with_capacity(ca.space.dim() * cb.space.dim());
        for ia in &ca.space.items {
            for ib in &cb.space.items {
                items.push(BasisItem {
                    id: format!("{}*{}", ia.id, ib.id),
                    degree: ia.degree + ib.degree,
                });
            }
        }
        let gens = ca
            .gens
            .iter()
            .zip(cb.gens.iter())
            .map(|(ga, gb)| kronecker(ga, gb))
            .collect();
        components.insert(
            *arity,
            SigmaComponent {
                space: GradedSpace::new(items),
                gens,
            },
        );
    }
    SigmaModule {
        field: a.field,
        components,
    }
}

/// Deterministic basis of equivariant maps from the degree-`delta` slice of
/// `src` to `target`, where `target` carries the trivial action and the maps
/// shift homological degree by `shift` (0 = degree-preserving).  Returned
/// matrices have `target.dim()` rows and `src.space.dim()` columns, with
/// entries only in the relevant degree slices.
pub fn equivariant_map_basis(
    field: Field,
    src: &SigmaComponent,
    delta: i64,
    target: &GradedSpace,
    shift: i64,
) -> Result<Vec<SparseMatrix>> {
    let src_idx = src.space.indices_in_degree(delta);
    let tgt_idx = target.indices_in_degree(delta + shift);
    let nunk = src_idx.len() * tgt_idx.len();
    if nunk == 0 {
        return Ok(Vec::new());
    }
    let unk = |spos: usize, tpos: usize| spos * tgt_idx.len() + tpos;
    let src_pos: BTreeMap<usize, usize> = src_idx.iter().enumerate().map(|(p, i)| (*i, p)).collect();

    let mut rows: Vec<BTreeMap<usize, Scalar>> = Vec::new();
    for g in &src.gens {
        for (spos, &scol) in src_idx.iter().enumerate() {
            // g(action(s) x) = g(x):  sum_x' M[x',x] g(x') - g(x) = 0
            for tpos in 0..tgt_idx.len() {
                let mut row: BTreeMap<usize, Scalar> = BTreeMap::new();
                for &srow in &src_idx {
                    let v = g.get(srow, scol);
                    if !v.is_zero() {
                        let u = unk(src_pos[&srow], tpos);
                        let cur = row.remove(&u).unwrap_or_else(|| Scalar::zero(field));
                        let nv = cur.add(&v);
                        if !nv.is_zero() {
                            row.insert(u, nv);
                        }
                    }
                }
                let u = unk(spos, tpos);
                let cur = row.remove(&u).unwrap_or_else(|| Scalar::zero(field));
                let nv = cur.sub(&Scalar::one(field));
                if !nv.is_zero() {
                    row.insert(u, nv);
                }
                if !row.is_empty() {
                    rows.push(row);
                }
            }
        }
    }

    let mut m = SparseMatrix::new(rows.len(), nunk, field);
    for (r, row) in rows.iter().enumerate() {
        for (c, v) in row {
            m.set(r, *c, v.clone());
        }
    }
    let zero = vec![Scalar::zero(field); rows.len()];
    let out = solve(&m, &zero)?;
    let mut basis = Vec::new();
    for k in out.kernel {
        let mut map = SparseMatrix::new(target.dim(), src.space.dim(), field);
        for (spos, &scol) in src_idx.iter().enumerate() {
            for (tpos, &trow) in tgt_idx.iter().enumerate() {
                let v = &k[unk(spos, tpos)];
                if !v.is_zero() {
                    map.set(trow, scol, v.clone());
                }
            }
        }
        basis.push(map);
    }
    Ok(basis)
}

/// Left-multiplication permutation matrix on the regular representation with
/// basis `perms` (matrix column idx(p) has a 1 in row idx(g o p)).
pub fn left_mult_matrix(field: Field, perms: &[Perm], g: &Perm) -> SparseMatrix {
    let idx: BTreeMap<&Perm, usize> = perms.iter().enumerate().map(|(i, p)| (p, i)).collect();
    let mut m = SparseMatrix::new(perms.len(), perms.len(), field);
    for (col, p) in perms.iter().enumerate() {
        let gp = g.compose(p);
        m.set(idx[&gp], col, Scalar::one(field));
    }
    m
}
