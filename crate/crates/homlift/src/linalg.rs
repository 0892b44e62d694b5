use crate::error::{Error, Result};
use crate::field::{Field, Scalar};
use std::collections::BTreeMap;

/// Sparse matrix over an exact field.  Zero entries are never stored, so
/// equality and iteration order are insertion-order independent.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparseMatrix {
    pub rows: usize,
    pub cols: usize,
    pub field: Field,
    entries: BTreeMap<(usize, usize), Scalar>,
}

impl SparseMatrix {
    pub fn new(rows: usize, cols: usize, field: Field) -> Self {
        SparseMatrix {
            rows,
            cols,
            field,
            entries: BTreeMap::new(),
        }
    }

    pub fn identity(n: usize, field: Field) -> Self {
        let mut m = SparseMatrix::new(n, n, field);
        for i in 0..n {
            m.set(i, i, Scalar::one(field));
        }
        m
    }

    pub fn from_dense(field: Field, data: &[Vec<i64>]) -> Self {
        let rows = data.len();
        let cols = data.first().map(|r| r.len()).unwrap_or(0);
        let mut m = SparseMatrix::new(rows, cols, field);
        for (i, row) in data.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                m.set(i, j, Scalar::from_i64(field, *v));
            }
        }
        m
    }

    pub fn set(&mut self, r: usize, c: usize, v: Scalar) {
        assert!(r < self.rows && c < self.cols, "index out of range");
        if v.is_zero() {
            self.entries.remove(&(r, c));
        } else {
            self.entries.insert((r, c), v);
        }
    }

    pub fn add_to(&mut self, r: usize, c: usize, v: &Scalar) {
        let cur = self.get(r, c);
        self.set(r, c, cur.add(v));
    }

    pub fn get(&self, r: usize, c: usize) -> Scalar {
        self.entries
            .get(&(r, c))
            .cloned()
            .unwrap_or_else(|| Scalar::zero(self.field))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&(usize, usize), &Scalar)> {
        self.entries.iter()
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn mul_vec(&self, x: &[Scalar]) -> Vec<Scalar> {
        assert_eq!(x.len(), self.cols, "dimension mismatch");
        let mut out = vec![Scalar::zero(self.field); self.rows];
        for ((r, c), v) in &self.entries {
            if !x[*c].is_zero() {
                out[*r] = out[*r].add(&v.mul(&x[*c]));
            }
        }
        out
    }

    pub fn mul_mat(&self, other: &SparseMatrix) -> SparseMatrix {
        assert_eq!(self.cols, other.rows, "dimension mismatch");
        assert_eq!(self.field, other.field, "field mismatch");
        let mut out = SparseMatrix::new(self.rows, other.cols, self.field);
        // Group other's entries by row for the sparse product.
        let mut by_row: BTreeMap<usize, Vec<(usize, &Scalar)>> = BTreeMap::new();
        for ((r, c), v) in &other.entries {
            by_row.entry(*r).or_default().push((*c, v));
        }
        for ((r, k), v) in &self.entries {
            if let Some(cols) = by_row.get(k) {
                for (c, w) in cols {
                    out.add_to(*r, *c, &v.mul(w));
                }
            }
        }
        out
    }

    pub fn transpose(&self) -> SparseMatrix {
        let mut out = SparseMatrix::new(self.cols, self.rows, self.field);
        for ((r, c), v) in &self.entries {
            out.set(*c, *r, v.clone());
        }
        out
    }

    fn working_rows(&self) -> Vec<BTreeMap<usize, Scalar>> {
        let mut rows = vec![BTreeMap::new(); self.rows];
        for ((r, c), v) in &self.entries {
            rows[*r].insert(*c, v.clone());
        }
        rows
    }
}

/// Result of an exact linear solve `M x = b`.
#[derive(Debug, Clone)]
pub struct SolveOutcome {
    /// A particular solution with all free variables set to zero, or `None`
    /// when the system is inconsistent.
    pub solution: Option<Vec<Scalar>>,
    /// Deterministic basis of the kernel of `M` (one vector per free column,
    /// in increasing column order).
    pub kernel: Vec<Vec<Scalar>>,
    /// When the system is inconsistent: a row vector `w` with `w M = 0` and
    /// `w b != 0`, certifying unsolvability.
    pub witness: Option<Vec<Scalar>>,
}

fn scale_row(row: &mut BTreeMap<usize, Scalar>, s: &Scalar) {
    for v in row.values_mut() {
        *v = v.mul(s);
    }
}

/// dst += s * src
fn axpy_row(dst: &mut BTreeMap<usize, Scalar>, s: &Scalar, src: &BTreeMap<usize, Scalar>) {
    for (c, v) in src {
        let add = s.mul(v);
        match dst.get(c) {
            Some(cur) => {
                let nv = cur.add(&add);
                if nv.is_zero() {
                    dst.remove(c);
                } else {
                    dst.insert(*c, nv);
                }
            }
            None => {
                if !add.is_zero() {
                    dst.insert(*c, add);
                }
            }
        }
    }
}

struct Rref {
    rows: Vec<BTreeMap<usize, Scalar>>,
    /// Row transform: `transform[i]` expresses reduced row i in terms of the
    /// original rows, i.e. `rows = transform * original`.
    transform: Vec<BTreeMap<usize, Scalar>>,
    /// (column, row) pairs in pivot order.
    pivots: Vec<(usize, usize)>,
    field: Field,
    ncols: usize,
}

/// Deterministic reduced row echelon form with full row-transform tracking.
/// Pivot choice scans columns left to right; within a column the pivot is the
/// not-yet-used row of smallest index with a nonzero entry.
fn rref(m: &SparseMatrix) -> Rref {
    let field = m.field;
    let mut rows = m.working_rows();
    let mut transform: Vec<BTreeMap<usize, Scalar>> = (0..m.rows)
        .map(|i| {
            let mut t = BTreeMap::new();
            t.insert(i, Scalar::one(field));
            t
        })
        .collect();
    let mut used = vec![false; m.rows];
    let mut pivots = Vec::new();

    for col in 0..m.cols {
        let pivot = (0..m.rows).find(|&r| !used[r] && rows[r].contains_key(&col));
        let Some(p) = pivot else { continue };
        used[p] = true;
        let inv = rows[p]
            .get(&col)
            .expect("pivot entry")
            .inv()
            .expect("nonzero pivot");
        scale_row(&mut rows[p], &inv);
        scale_row(&mut transform[p], &inv);
        let prow = rows[p].clone();
        let ptrans = transform[p].clone();
        for r in 0..m.rows {
            if r == p {
                continue;
            }
            if let Some(v) = rows[r].get(&col).cloned() {
                let s = v.neg();
                axpy_row(&mut rows[r], &s, &prow);
                axpy_row(&mut transform[r], &s, &ptrans);
            }
        }
        pivots.push((col, p));
    }

    Rref {
        rows,
        transform,
        pivots,
        field,
        ncols: m.cols,
    }
}

impl Rref {
    fn rank(&self) -> usize {
        self.pivots.len()
    }

    fn kernel_basis(&self) -> Vec<Vec<Scalar>> {
        let pivot_cols: BTreeMap<usize, usize> = self.pivots.iter().cloned().collect();
        let mut basis = Vec::new();
        for free in 0..self.ncols {
            if pivot_cols.contains_key(&free) {
                continue;
            }
            let mut v = vec![Scalar::zero(self.field); self.ncols];
            v[free] = Scalar::one(self.field);
            for (pcol, prow) in &self.pivots {
                if let Some(e) = self.rows[*prow].get(&free) {
                    v[*pcol] = e.neg();
                }
            }
            basis.push(v);
        }
        basis
    }
}

/// Solves `M x = b` exactly.  Deterministic: identical inputs give identical
/// particular solutions, kernel bases, and witnesses regardless of how the
/// matrix was assembled.
pub fn solve(m: &SparseMatrix, b: &[Scalar]) -> Result<SolveOutcome> {
    if b.len() != m.rows {
        return Err(Error::input(format!(
            "rhs length {} does not match row count {}",
            b.len(),
            m.rows
        )));
    }
    let red = rref(m);
    // c = transform * b
    let mut c = vec![Scalar::zero(m.field); m.rows];
    for (i, t) in red.transform.iter().enumerate() {
        let mut acc = Scalar::zero(m.field);
        for (j, v) in t {
            if !b[*j].is_zero() {
                acc = acc.add(&v.mul(&b[*j]));
            }
        }
        c[i] = acc;
    }

    let pivot_rows: Vec<usize> = red.pivots.iter().map(|(_, r)| *r).collect();
    for r in 0..m.rows {
        if !pivot_rows.contains(&r) && !red.rows[r].is_empty() {
            // Should not happen: every nonzero reduced row has a pivot.
            return Err(Error::internal("non-pivot row left nonzero"));
        }
    }

    // First inconsistent zero row (deterministic) yields the witness.
    for r in 0..m.rows {
        if red.rows[r].is_empty() && !c[r].is_zero() {
            let mut w = vec![Scalar::zero(m.field); m.rows];
            for (j, v) in &red.transform[r] {
                w[*j] = v.clone();
            }
            return Ok(SolveOutcome {
                solution: None,
                kernel: red.kernel_basis(),
                witness: Some(w),
            });
        }
    }

    let mut x = vec![Scalar::zero(m.field); m.cols];
    for (col, row) in &red.pivots {
        x[*col] = c[*row].clone();
    }
    Ok(SolveOutcome {
        solution: Some(x),
        kernel: red.kernel_basis(),
        witness: None,
    })
}

pub fn rank(m: &SparseMatrix) -> usize {
    rref(m).rank()
}

/// Incremental row-space tracker used for rank filtering.
pub struct RankTracker {
    dim: usize,
    // Reduced rows keyed by leading column.
    rows: BTreeMap<usize, Vec<Scalar>>,
}

impl RankTracker {
    pub fn new(_field: Field, dim: usize) -> Self {
        RankTracker {
            dim,
            rows: BTreeMap::new(),
        }
    }

    pub fn rank(&self) -> usize {
        self.rows.len()
    }

    /// Reduces `v` against the tracked span; if a nonzero remainder is left,
    /// absorbs it and returns true.
    pub fn add(&mut self, v: &[Scalar]) -> bool {
        assert_eq!(v.len(), self.dim);
        let mut w = v.to_vec();
        loop {
            let lead = match w.iter().position(|x| !x.is_zero()) {
                Some(l) => l,
                None => return false,
            };
            match self.rows.get(&lead) {
                Some(row) => {
                    let s = w[lead].neg();
                    for (wi, ri) in w.iter_mut().zip(row.iter()) {
                        *wi = wi.add(&s.mul(ri));
                    }
                }
                None => {
                    let inv = w[lead].inv().expect("nonzero lead");
                    for wi in w.iter_mut() {
                        *wi = wi.mul(&inv);
                    }
                    self.rows.insert(lead, w);
                    return true;
                }
            }
        }
    }
}

/// Kernel/image/quotient data for a pair of consecutive maps
/// `left --d_in--> middle --d_out--> right`.
#[derive(Debug, Clone)]
pub struct Subquotient {
    pub dim_kernel: usize,
    pub dim_image: usize,
    pub dim_quotient: usize,
    /// Kernel vectors of `d_out` projecting to a basis of kernel/image.
    pub representatives: Vec<Vec<Scalar>>,
}

/// Computes dim ker(d_out), dim im(d_in), their quotient, and deterministic
/// quotient representatives.  Errors with a complex-consistency failure if
/// `d_out . d_in != 0`, since that indicates a sign or structure bug in
/// whatever produced the two maps.
pub fn subquotient_dims(d_out: &SparseMatrix, d_in: &SparseMatrix) -> Result<Subquotient> {
    if d_out.cols != d_in.rows {
        return Err(Error::input(format!(
            "middle dimension mismatch: d_out has {} columns, d_in has {} rows",
            d_out.cols, d_in.rows
        )));
    }
    let comp = d_out.mul_mat(d_in);
    if !comp.is_zero() {
        return Err(Error::complex(
            "composite of consecutive differentials is nonzero",
        ));
    }
    let n = d_out.cols;
    let field = d_out.field;

    let red_out = rref(d_out);
    let kernel = red_out.kernel_basis();
    let dim_kernel = kernel.len();

    let mut tracker = RankTracker::new(field, n);
    for c in 0..d_in.cols {
        let mut col = vec![Scalar::zero(field); n];
        for r in 0..n {
            let v = d_in.get(r, c);
            if !v.is_zero() {
                col[r] = v;
            }
        }
        tracker.add(&col);
    }
    let dim_image = tracker.rank();

    let mut representatives = Vec::new();
    for k in &kernel {
        if tracker.add(k) {
            representatives.push(k.clone());
        }
    }
    let dim_quotient = dim_kernel - dim_image;
    debug_assert_eq!(representatives.len(), dim_quotient);

    Ok(Subquotient {
        dim_kernel,
        dim_image,
        dim_quotient,
        representatives,
    })
}
