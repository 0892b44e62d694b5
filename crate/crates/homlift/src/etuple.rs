use crate::chain::{chain_add, Chain};
use crate::field::{Field, Scalar};
use crate::perm::Perm;

/// Degree-t basis element of the permutation-tuple complex at a fixed arity:
/// a (t+1)-tuple of permutations with no two adjacent entries equal.  Tuples
/// with adjacent repeats are degenerate and identified with zero; they are
/// never materialized.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ETuple(pub Vec<Perm>);

impl ETuple {
    pub fn of(perms: Vec<Perm>) -> Option<ETuple> {
        let t = ETuple(perms);
        if t.is_degenerate() {
            None
        } else {
            Some(t)
        }
    }

    pub fn single(p: Perm) -> ETuple {
        ETuple(vec![p])
    }

    pub fn identity(n: u8) -> ETuple {
        ETuple(vec![Perm::identity(n)])
    }

    pub fn arity(&self) -> u8 {
        self.0[0].arity()
    }

    pub fn degree(&self) -> i64 {
        self.0.len() as i64 - 1
    }

    pub fn is_degenerate(&self) -> bool {
        self.0.windows(2).any(|w| w[0] == w[1])
    }

    /// Componentwise left multiplication; the group action carries no sign.
    pub fn act(&self, pi: &Perm) -> ETuple {
        ETuple(self.0.iter().map(|w| pi.compose(w)).collect())
    }

    /// Simplicial boundary: alternating sum of entry drops, with degenerate
    /// results (adjacent repeats) discarded.
    pub fn differential(&self, field: Field) -> Chain<ETuple> {
        let mut out = Chain::new();
        if self.0.len() < 2 {
            return out;
        }
        for i in 0..self.0.len() {
            let mut w = self.0.clone();
            w.remove(i);
            if let Some(t) = ETuple::of(w) {
                chain_add(&mut out, t, Scalar::sign(field, i as i64));
            }
        }
        out
    }

    /// Operadic composition: sum over monotone lattice paths from (0,0) to
    /// (m,n) where m, n are the two degrees.  A path visiting points
    /// (x_0,y_0) ... (x_{m+n},y_{m+n}) contributes the tuple whose k-th entry
    /// is `self[x_k] o_i other[y_k]`, with the sign of the associated
    /// (m,n)-shuffle: (-1)^{#pairs of a vertical step before a horizontal
    /// one}.  The all-horizontal-first path has sign +1.
    pub fn compose(&self, i: u8, other: &ETuple, field: Field) -> Chain<ETuple> {
        let m = self.0.len() - 1;
        let n = other.0.len() - 1;
        let mut out = Chain::new();
        // Enumerate step sequences: bitmask over m+n steps, 1 = vertical.
        let total = m + n;
        let masks = 1u32 << total;
        for mask in 0..masks {
            if (mask as u32).count_ones() as usize != n {
                continue;
            }
            // Shuffle sign: vertical step at position a, horizontal at b>a.
            let mut invs = 0i64;
            for a in 0..total {
                if mask >> a & 1 == 1 {
                    for b in a + 1..total {
                        if mask >> b & 1 == 0 {
                            invs += 1;
                        }
                    }
                }
            }
            let mut x = 0usize;
            let mut y = 0usize;
            let mut tuple = Vec::with_capacity(total + 1);
            tuple.push(self.0[x].block_compose(i, &other.0[y]));
            let mut degenerate = false;
            for a in 0..total {
                if mask >> a & 1 == 1 {
                    y += 1;
                } else {
                    x += 1;
                }
                let entry = self.0[x].block_compose(i, &other.0[y]);
                if *tuple.last().unwrap() == entry {
                    degenerate = true;
                    break;
                }
                tuple.push(entry);
            }
            if degenerate {
                continue;
            }
            chain_add(&mut out, ETuple(tuple), Scalar::sign(field, invs));
        }
        out
    }

    /// All normalized tuples of the given degree at the given arity, in
    /// lexicographic order.
    pub fn basis(n: u8, degree: i64) -> Vec<ETuple> {
        let mut out = Vec::new();
        Self::basis_for_each(n, degree, |t| out.push(t));
        out
    }

    /// Streams the basis in lexicographic order without retaining it; large
    /// arity/degree sweeps stay in constant memory this way.
    pub fn basis_for_each(n: u8, degree: i64, mut f: impl FnMut(ETuple)) {
        let perms = Perm::all(n);
        let len = (degree + 1) as usize;
        let mut prefix: Vec<usize> = Vec::with_capacity(len);
        fn rec(perms: &[Perm], len: usize, prefix: &mut Vec<usize>, f: &mut impl FnMut(ETuple)) {
            if prefix.len() == len {
                f(ETuple(prefix.iter().map(|&k| perms[k].clone()).collect()));
                return;
            }
            for k in 0..perms.len() {
                if prefix.last() == Some(&k) {
                    continue;
                }
                prefix.push(k);
                rec(perms, len, prefix, f);
                prefix.pop();
            }
        }
        rec(&perms, len, &mut prefix, &mut f);
    }
}

impl std::fmt::Display for ETuple {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "(")?;
        for (k, p) in self.0.iter().enumerate() {
            if k > 0 {
                write!(f, "|")?;
            }
            write!(f, "{p}")?;
        }
        write!(f, ")")
    }
}
