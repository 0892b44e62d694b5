use crate::error::{Error, Result};
use num::bigint::BigInt;
use num::rational::BigRational;
use num::traits::{One, Zero};
use std::fmt;
use std::str::FromStr;

/// The coefficient field: exact rationals or a prime field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Field {
    Q,
    /// GF(p); the modulus is validated to be prime on construction.
    Fp(u64),
}

impl Field {
    pub fn fp(p: u64) -> Result<Field> {
        if !is_prime(p) {
            return Err(Error::input(format!("modulus {p} is not prime")));
        }
        Ok(Field::Fp(p))
    }

    pub fn characteristic(&self) -> u64 {
        match self {
            Field::Q => 0,
            Field::Fp(p) => *p,
        }
    }
}

impl fmt::Display for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Field::Q => write!(f, "Q"),
            Field::Fp(p) => write!(f, "GF({p})"),
        }
    }
}

fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    if n % 2 == 0 {
        return n == 2;
    }
    let mut d = 3u64;
    while d.checked_mul(d).map(|s| s <= n).unwrap_or(false) {
        if n % d == 0 {
            return false;
        }
        d += 2;
    }
    true
}

/// A field element.  Rationals are kept in lowest terms with positive
/// denominator (num-rational maintains that form); GF(p) values are reduced
/// representatives in `0..p`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Scalar {
    Q(BigRational),
    Fp { v: u64, p: u64 },
}

impl Scalar {
    pub fn field(&self) -> Field {
        match self {
            Scalar::Q(_) => Field::Q,
            Scalar::Fp { p, .. } => Field::Fp(*p),
        }
    }

    pub fn zero(f: Field) -> Scalar {
        match f {
            Field::Q => Scalar::Q(BigRational::zero()),
            Field::Fp(p) => Scalar::Fp { v: 0, p },
        }
    }

    pub fn one(f: Field) -> Scalar {
        match f {
            Field::Q => Scalar::Q(BigRational::one()),
            Field::Fp(p) => Scalar::Fp { v: 1 % p, p },
        }
    }

    pub fn from_i64(f: Field, n: i64) -> Scalar {
        match f {
            Field::Q => Scalar::Q(BigRational::from_integer(BigInt::from(n))),
            Field::Fp(p) => {
                let r = n.rem_euclid(p as i64) as u64;
                Scalar::Fp { v: r, p }
            }
        }
    }

    /// (-1)^k in the field; the workhorse for Koszul signs.
    pub fn sign(f: Field, k: i64) -> Scalar {
        if k.rem_euclid(2) == 0 {
            Scalar::one(f)
        } else {
            Scalar::from_i64(f, -1)
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Scalar::Q(r) => r.is_zero(),
            Scalar::Fp { v, .. } => *v == 0,
        }
    }

    pub fn is_one(&self) -> bool {
        match self {
            Scalar::Q(r) => r.is_one(),
            Scalar::Fp { v, p } => *v == 1 % p,
        }
    }

    fn check_same(&self, other: &Scalar) {
        debug_assert_eq!(
            self.field(),
            other.field(),
            "mixed-field scalar arithmetic"
        );
    }

    pub fn add(&self, other: &Scalar) -> Scalar {
        self.check_same(other);
        match (self, other) {
            (Scalar::Q(a), Scalar::Q(b)) => Scalar::Q(a + b),
            (Scalar::Fp { v: a, p }, Scalar::Fp { v: b, .. }) => Scalar::Fp {
                v: (a + b) % p,
                p: *p,
            },
            _ => unreachable!(),
        }
    }

    pub fn sub(&self, other: &Scalar) -> Scalar {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Scalar {
        match self {
            Scalar::Q(a) => Scalar::Q(-a),
            Scalar::Fp { v, p } => Scalar::Fp {
                v: if *v == 0 { 0 } else { p - v },
                p: *p,
            },
        }
    }

    pub fn mul(&self, other: &Scalar) -> Scalar {
        self.check_same(other);
        match (self, other) {
            (Scalar::Q(a), Scalar::Q(b)) => Scalar::Q(a * b),
            (Scalar::Fp { v: a, p }, Scalar::Fp { v: b, .. }) => Scalar::Fp {
                v: ((*a as u128 * *b as u128) % *p as u128) as u64,
                p: *p,
            },
            _ => unreachable!(),
        }
    }

    pub fn inv(&self) -> Result<Scalar> {
        if self.is_zero() {
            return Err(Error::input("division by zero".to_string()));
        }
        match self {
            Scalar::Q(a) => Ok(Scalar::Q(a.recip())),
            Scalar::Fp { v, p } => Ok(Scalar::Fp {
                v: pow_mod(*v, p - 2, *p),
                p: *p,
            }),
        }
    }

    pub fn div(&self, other: &Scalar) -> Result<Scalar> {
        Ok(self.mul(&other.inv()?))
    }

    /// Parses "5", "-7", "2/3", "-2/3" over Q, and an integer (reduced mod p)
    /// over GF(p).
    pub fn parse(f: Field, s: &str) -> Result<Scalar> {
        let s = s.trim();
        match f {
            Field::Q => {
                let (num, den) = match s.split_once('/') {
                    Some((n, d)) => (n.trim(), d.trim()),
                    None => (s, "1"),
                };
                let n = BigInt::from_str(num)
                    .map_err(|_| Error::input(format!("bad rational numerator {num:?}")))?;
                let d = BigInt::from_str(den)
                    .map_err(|_| Error::input(format!("bad rational denominator {den:?}")))?;
                if d.is_zero() {
                    return Err(Error::input(format!("zero denominator in {s:?}")));
                }
                Ok(Scalar::Q(BigRational::new(n, d)))
            }
            Field::Fp(p) => {
                let n = i128::from_str(s)
                    .map_err(|_| Error::input(format!("bad GF({p}) element {s:?}")))?;
                let r = n.rem_euclid(p as i128) as u64;
                Ok(Scalar::Fp { v: r, p })
            }
        }
    }
}

fn pow_mod(b: u64, mut e: u64, m: u64) -> u64 {
    let mut acc: u128 = 1;
    let mut bb = b as u128 % m as u128;
    while e > 0 {
        if e & 1 == 1 {
            acc = acc * bb % m as u128;
        }
        bb = bb * bb % m as u128;
        e >>= 1;
    }
    acc as u64
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scalar::Q(r) => {
                if r.denom().is_one() {
                    write!(f, "{}", r.numer())
                } else {
                    write!(f, "{}/{}", r.numer(), r.denom())
                }
            }
            Scalar::Fp { v, .. } => write!(f, "{v}"),
        }
    }
}
