use crate::field::Scalar;
use std::collections::BTreeMap;

/// A formal linear combination with exact coefficients, keyed by basis
/// element.  Zero coefficients are dropped eagerly so equality of chains is
/// structural equality.
pub type Chain<K> = BTreeMap<K, Scalar>;

pub fn chain_add<K: Ord>(c: &mut Chain<K>, k: K, v: Scalar) {
    if v.is_zero() {
        return;
    }
    match c.get_mut(&k) {
        Some(cur) => {
            let nv = cur.add(&v);
            if nv.is_zero() {
                c.remove(&k);
            } else {
                *cur = nv;
            }
        }
        None => {
            c.insert(k, v);
        }
    }
}

pub fn chain_add_all<K: Ord + Clone>(c: &mut Chain<K>, other: &Chain<K>, scale: &Scalar) {
    if scale.is_zero() {
        return;
    }
    for (k, v) in other {
        chain_add(c, k.clone(), v.mul(scale));
    }
}

pub fn chain_is_zero<K: Ord>(c: &Chain<K>) -> bool {
    c.is_empty()
}
