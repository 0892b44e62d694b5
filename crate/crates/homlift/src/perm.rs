use std::fmt;

/// A permutation of {1..n} in one-line notation: `word[k]` is the image of
/// k+1.  Throughout the crate a permutation names the multilinear operation
/// that reads its inputs through the word, so the left action
/// `(pi . w)(a_1,...,a_n) = w-operation(a_{pi(1)},...,a_{pi(n)})`
/// is composition of functions: `pi . w = pi o w`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Perm(pub Vec<u8>);

impl Perm {
    pub fn identity(n: u8) -> Perm {
        Perm((1..=n).collect())
    }

    pub fn new(word: Vec<u8>) -> Perm {
        let n = word.len();
        debug_assert!(
            {
                let mut seen = vec![false; n];
                word.iter().all(|&v| {
                    let ok = v >= 1 && (v as usize) <= n && !seen[v as usize - 1];
                    if ok {
                        seen[v as usize - 1] = true;
                    }
                    ok
                })
            },
            "not a permutation word: {word:?}"
        );
        Perm(word)
    }

    pub fn arity(&self) -> u8 {
        self.0.len() as u8
    }

    /// 1-based application.
    pub fn apply(&self, i: u8) -> u8 {
        self.0[i as usize - 1]
    }

    pub fn is_identity(&self) -> bool {
        self.0.iter().enumerate().all(|(k, &v)| v as usize == k + 1)
    }

    /// Function composition: (self . other)(i) = self(other(i)).
    pub fn compose(&self, other: &Perm) -> Perm {
        debug_assert_eq!(self.arity(), other.arity());
        Perm(other.0.iter().map(|&v| self.apply(v)).collect())
    }

    pub fn inverse(&self) -> Perm {
        let mut w = vec![0u8; self.0.len()];
        for (k, &v) in self.0.iter().enumerate() {
            w[v as usize - 1] = k as u8 + 1;
        }
        Perm(w)
    }

    /// The adjacent transposition swapping k and k+1 (1-based, k < n).
    pub fn adjacent(n: u8, k: u8) -> Perm {
        debug_assert!(k >= 1 && k < n);
        let mut w: Vec<u8> = (1..=n).collect();
        w.swap(k as usize - 1, k as usize);
        Perm(w)
    }

    /// Writes the permutation as a product of adjacent transpositions
    /// (indices k meaning swap of k,k+1), suitable for extending an action
    /// given on generators.
    pub fn adjacent_factorization(&self) -> Vec<u8> {
        // Bubble sort the word back to the identity; applied in reverse the
        // recorded swaps rebuild the permutation.
        let mut w = self.0.clone();
        let mut swaps = Vec::new();
        let n = w.len();
        loop {
            let mut moved = false;
            for k in 0..n.saturating_sub(1) {
                if w[k] > w[k + 1] {
                    w.swap(k, k + 1);
                    swaps.push(k as u8 + 1);
                    moved = true;
                }
            }
            if !moved {
                break;
            }
        }
        // w is now the identity and  self = s_{k1} . s_{k2} ... s_{km}
        // reading the recorded swaps in reverse order.
        swaps.reverse();
        swaps
    }

    pub fn inversions(&self) -> usize {
        let n = self.0.len();
        let mut inv = 0;
        for a in 0..n {
            for b in a + 1..n {
                if self.0[a] > self.0[b] {
                    inv += 1;
                }
            }
        }
        inv
    }

    pub fn sign_parity(&self) -> i64 {
        self.inversions() as i64
    }

    /// All permutations of {1..n} in lexicographic word order.
    pub fn all(n: u8) -> Vec<Perm> {
        let mut out = Vec::new();
        let mut word: Vec<u8> = (1..=n).collect();
        loop {
            out.push(Perm(word.clone()));
            // next_permutation in lex order
            let len = word.len();
            if len < 2 {
                break;
            }
            let mut i = len - 1;
            while i > 0 && word[i - 1] >= word[i] {
                i -= 1;
            }
            if i == 0 {
                break;
            }
            let mut j = len - 1;
            while word[j] <= word[i - 1] {
                j -= 1;
            }
            word.swap(i - 1, j);
            word[i..].reverse();
        }
        out
    }

    /// Operadic substitution on permutation words: grafts `inner` into input
    /// slot `i` (1-based) of `outer`.  In the word of `outer` the letter `i`
    /// is replaced by the block `i-1+inner(1), ..., i-1+inner(s)` and every
    /// letter above `i` is shifted up by s-1.
    pub fn block_compose(&self, i: u8, inner: &Perm) -> Perm {
        let r = self.arity();
        let s = inner.arity();
        debug_assert!(i >= 1 && i <= r);
        let mut w = Vec::with_capacity((r + s - 1) as usize);
        for &x in &self.0 {
            if x == i {
                for l in 1..=s {
                    w.push(i - 1 + inner.apply(l));
                }
            } else if x > i {
                w.push(x + s - 1);
            } else {
                w.push(x);
            }
        }
        Perm(w)
    }

    /// The block permutation `1 ⊕ ... ⊕ rho ⊕ ... ⊕ 1` acting on the inputs
    /// of slot `i` once that slot has been expanded to `rho.arity()` inputs
    /// inside an arity-`r` operation.
    pub fn block_at(r: u8, i: u8, rho: &Perm) -> Perm {
        Perm::identity(r).block_compose(i, rho)
    }
}

impl fmt::Display for Perm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (k, v) in self.0.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{v}")?;
        }
        write!(f, "]")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent semantic oracle: evaluates the word-indexed operation on
    /// formal symbols and substitutes a block, then reads the composite word
    /// back off the symbol sequence.
    fn semantic_block(outer: &Perm, i: u8, inner: &Perm) -> Perm {
        let r = outer.arity() as usize;
        let s = inner.arity() as usize;
        // Arguments of the outer operation: arg i is itself the inner
        // operation applied to the symbol block i-1+1 .. i-1+s; other args
        // are single symbols with shifted names.
        let arg = |j: usize| -> Vec<u8> {
            let j = j as u8 + 1;
            if j < i {
                vec![j]
            } else if j == i {
                (1..=s as u8).map(|l| i - 1 + inner.apply(l)).collect()
            } else {
                vec![j + s as u8 - 1]
            }
        };
        let mut word = Vec::new();
        for k in 0..r {
            word.extend(arg(outer.0[k] as usize - 1));
        }
        Perm::new(word)
    }

    #[test]
    fn identity_block_compose() {
        let id2 = Perm::identity(2);
        assert_eq!(id2.block_compose(1, &id2), Perm::identity(3));
        assert_eq!(id2.block_compose(2, &id2), Perm::identity(3));
    }

    #[test]
    fn block_compose_matches_semantics() {
        for r in 1..=3u8 {
            for s in 1..=3u8 {
                for outer in Perm::all(r) {
                    for inner in Perm::all(s) {
                        for i in 1..=r {
                            assert_eq!(
                                outer.block_compose(i, &inner),
                                semantic_block(&outer, i, &inner),
                                "outer={outer} i={i} inner={inner}"
                            );
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn sequential_associativity() {
        // (p o_i q) o_{i-1+j} t == p o_i (q o_j t)
        for p in Perm::all(2) {
            for q in Perm::all(2) {
                for t in Perm::all(2) {
                    for i in 1..=2u8 {
                        for j in 1..=2u8 {
                            let lhs = p.block_compose(i, &q).block_compose(i - 1 + j, &t);
                            let rhs = p.block_compose(i, &q.block_compose(j, &t));
                            assert_eq!(lhs, rhs);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn parallel_associativity() {
        // For i < k: (p o_k t) o_i q == (p o_i q) o_{k + arity(q) - 1} t
        for p in Perm::all(3) {
            for q in Perm::all(2) {
                for t in Perm::all(2) {
                    for i in 1..=2u8 {
                        for k in (i + 1)..=3u8 {
                            let lhs = p.block_compose(k, &t).block_compose(i, &q);
                            let rhs = p
                                .block_compose(i, &q)
                                .block_compose(k + q.arity() - 1, &t);
                            assert_eq!(lhs, rhs);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn upper_equivariance() {
        // (pi . p) o_i q == block(pi, i) . (p o_{pi^{-1}(i)} q)
        for pi in Perm::all(3) {
            for p in Perm::all(3) {
                for q in Perm::all(2) {
                    for i in 1..=3u8 {
                        let lhs = pi.compose(&p).block_compose(i, &q);
                        let u = pi.block_compose(i, &Perm::identity(q.arity()));
                        let rhs = u.compose(&p.block_compose(pi.inverse().apply(i), &q));
                        assert_eq!(lhs, rhs, "pi={pi} p={p} q={q} i={i}");
                    }
                }
            }
        }
    }

    #[test]
    fn lower_equivariance() {
        // p o_i (rho . q) == (1 ⊕ rho ⊕ 1)_i . (p o_i q)
        for p in Perm::all(3) {
            for rho in Perm::all(2) {
                for q in Perm::all(2) {
                    for i in 1..=3u8 {
                        let lhs = p.block_compose(i, &rho.compose(&q));
                        let v = Perm::block_at(3, i, &rho);
                        let rhs = v.compose(&p.block_compose(i, &q));
                        assert_eq!(lhs, rhs);
                    }
                }
            }
        }
    }

    #[test]
    fn adjacent_factorization_rebuilds() {
        for n in 1..=4u8 {
            for p in Perm::all(n) {
                let mut acc = Perm::identity(n);
                for k in p.adjacent_factorization() {
                    acc = acc.compose(&Perm::adjacent(n, k));
                }
                assert_eq!(acc, p, "factorization of {p}");
            }
        }
    }

    #[test]
    fn inverse_and_parity() {
        for p in Perm::all(4) {
            assert!(p.compose(&p.inverse()).is_identity());
            assert_eq!(
                p.adjacent_factorization().len() % 2,
                (p.sign_parity() as usize) % 2
            );
        }
    }
}
