//! Exact rational scalars and the few combinatorial helpers the rest of the crate needs.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

pub type Q = BigRational;

pub fn q(n: i64, d: i64) -> Q {
    Q::new(BigInt::from(n), BigInt::from(d))
}

pub fn qi(n: i64) -> Q {
    Q::from_integer(BigInt::from(n))
}

pub fn zero() -> Q {
    Q::zero()
}

pub fn one() -> Q {
    Q::one()
}

/// Canonical text form: `p` or `p/q`, never a decimal.
pub fn to_str(x: &Q) -> String {
    if x.denom().is_one() {
        x.numer().to_string()
    } else {
        format!("{}/{}", x.numer(), x.denom())
    }
}

pub fn parse(s: &str) -> Option<Q> {
    let s = s.trim();
    match s.split_once('/') {
        Some((n, d)) => {
            let n: BigInt = n.trim().parse().ok()?;
            let d: BigInt = d.trim().parse().ok()?;
            if d.is_zero() {
                None
            } else {
                Some(Q::new(n, d))
            }
        }
        None => s.parse::<BigInt>().ok().map(Q::from_integer),
    }
}

/// Generalized binomial coefficient binom(x, k) for rational x.
pub fn binom(x: &Q, k: usize) -> Q {
    let mut r = one();
    for j in 0..k {
        r = r * (x - qi(j as i64)) / qi(j as i64 + 1);
    }
    r
}

pub fn factorial(n: usize) -> Q {
    (1..=n).fold(one(), |acc, j| acc * qi(j as i64))
}

/// Falling factorial m (m-1) ... (m-k+1) as an integer-valued rational.
pub fn falling(m: usize, k: usize) -> Q {
    if k > m {
        return zero();
    }
    (0..k).fold(one(), |acc, j| acc * qi((m - j) as i64))
}

pub fn pow_int(x: &Q, e: i64) -> Q {
    let mut r = one();
    let base = if e < 0 { x.recip() } else { x.clone() };
    for _ in 0..e.unsigned_abs() {
        r *= &base;
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip() {
        for x in [q(3, 8), q(-5, 16), qi(7), zero()] {
            assert_eq!(parse(&to_str(&x)).unwrap(), x);
        }
        assert_eq!(to_str(&q(2, 4)), "1/2");
        assert!(parse("1/0").is_none());
        assert!(parse("0.5").is_none());
    }

    #[test]
    fn half_binomials() {
        let h = q(1, 2);
        assert_eq!(binom(&h, 0), one());
        assert_eq!(binom(&h, 1), q(1, 2));
        assert_eq!(binom(&h, 2), q(-1, 8));
        assert_eq!(binom(&h, 3), q(1, 16));
        assert_eq!(binom(&qi(5), 7), zero());
    }

    #[test]
    fn falling_factorials() {
        assert_eq!(falling(5, 2), qi(20));
        assert_eq!(falling(2, 3), zero());
        assert_eq!(falling(3, 0), one());
    }
}
