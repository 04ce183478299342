//! Truncated univariate Laurent series with exact coefficients.
//!
//! A series knows its coefficients for every exponent up to `order`; nothing is
//! claimed above it. Series in z⁻¹ are stored as ascending series in w = 1/z and
//! tagged, so every algorithm below is a single ascending code path.

use std::collections::BTreeMap;

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rational::{self, one, q, qi, zero, Q};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    #[serde(rename = "z")]
    Z,
    #[serde(rename = "z^-1")]
    ZInv,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Parity {
    Even,
    Odd,
}

#[derive(Debug, Error, PartialEq)]
pub enum SeriesError {
    #[error("direction mismatch")]
    Direction,
    #[error("leading coefficient is zero or unknown")]
    ZeroLeading,
    #[error("invalid leading term: {0}")]
    InvalidLeading(String),
    #[error("vector field does not raise the exponent (term m = {0})")]
    NoTermination(i64),
    #[error("series violates {0:?} parity at exponent {1}")]
    Parity(Parity, i64),
    #[error("target has support off the stride at exponent {0}")]
    Stride(i64),
    #[error("insufficient order: need {need}, have {have}")]
    Order { need: i64, have: i64 },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Series1 {
    dir: Direction,
    start: i64,
    coeffs: Vec<Q>,
    order: i64,
}

impl Series1 {
    /// Coefficients listed from exponent `start`; exponents up to `order` not listed are zero.
    pub fn new(dir: Direction, start: i64, coeffs: Vec<Q>, order: i64) -> Series1 {
        let mut s = Series1 { dir, start, coeffs, order };
        s.normalize();
        s
    }

    pub fn zero(dir: Direction, order: i64) -> Series1 {
        Series1::new(dir, order + 1, vec![], order)
    }

    pub fn monomial(dir: Direction, e: i64, c: Q, order: i64) -> Series1 {
        Series1::new(dir, e, vec![c], order)
    }

    /// Build from a coefficient function on [start, order].
    pub fn from_fn(dir: Direction, start: i64, order: i64, f: impl Fn(i64) -> Q) -> Series1 {
        Series1::new(dir, start, (start..=order).map(f).collect(), order)
    }

    fn normalize(&mut self) {
        let keep = (self.order - self.start + 1).max(0) as usize;
        self.coeffs.truncate(keep);
        let lead = self.coeffs.iter().position(|c| !c.is_zero());
        match lead {
            Some(i) => {
                self.coeffs.drain(..i);
                self.start += i as i64;
            }
            None => {
                self.coeffs.clear();
                self.start = self.order + 1;
            }
        }
        while self.coeffs.last().is_some_and(|c| c.is_zero()) {
            self.coeffs.pop();
        }
    }

    pub fn direction(&self) -> Direction {
        self.dir
    }

    pub fn order(&self) -> i64 {
        self.order
    }

    /// Lowest exponent with a nonzero coefficient; `None` for a series known to be zero.
    pub fn valuation(&self) -> Option<i64> {
        (!self.coeffs.is_empty()).then_some(self.start)
    }

    fn val_or_past(&self) -> i64 {
        self.valuation().unwrap_or(self.order + 1)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Coefficient at `e`, or `None` when `e` is beyond the known order.
    pub fn coeff(&self, e: i64) -> Option<Q> {
        if e > self.order {
            return None;
        }
        Some(self.c(e))
    }

    /// Coefficient of xᵉ, zero below the start; no order check.
    pub fn c(&self, e: i64) -> Q {
        if e < self.start {
            return zero();
        }
        self.coeffs.get((e - self.start) as usize).cloned().unwrap_or_else(zero)
    }

    /// Nonzero terms as (exponent, coefficient).
    pub fn terms(&self) -> impl Iterator<Item = (i64, &Q)> {
        self.coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.is_zero())
            .map(move |(i, c)| (self.start + i as i64, c))
    }

    pub fn truncate(&self, order: i64) -> Series1 {
        let o = order.min(self.order);
        Series1::new(self.dir, self.start, self.coeffs.clone(), o)
    }

    fn check_dir(&self, other: &Series1) -> Result<(), SeriesError> {
        if self.dir == other.dir {
            Ok(())
        } else {
            Err(SeriesError::Direction)
        }
    }

    pub fn add(&self, other: &Series1) -> Result<Series1, SeriesError> {
        self.check_dir(other)?;
        let order = self.order.min(other.order);
        let start = self.val_or_past().min(other.val_or_past());
        Ok(Series1::from_fn(self.dir, start, order, |e| self.c(e) + other.c(e)))
    }

    pub fn sub(&self, other: &Series1) -> Result<Series1, SeriesError> {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Series1 {
        self.scale(&-one())
    }

    pub fn scale(&self, c: &Q) -> Series1 {
        Series1::new(self.dir, self.start, self.coeffs.iter().map(|x| x * c).collect(), self.order)
    }

    /// Multiply by x^k in the series' own variable.
    pub fn shift(&self, k: i64) -> Series1 {
        Series1::new(self.dir, self.start + k, self.coeffs.clone(), self.order + k)
    }

    pub fn mul(&self, other: &Series1) -> Result<Series1, SeriesError> {
        self.check_dir(other)?;
        let (va, vb) = (self.val_or_past(), other.val_or_past());
        let order = (va + other.order).min(vb + self.order);
        let start = va + vb;
        let mut out = vec![zero(); (order - start + 1).max(0) as usize];
        for (ea, ca) in self.terms() {
            for (eb, cb) in other.terms() {
                let e = ea + eb;
                if e > order {
                    break;
                }
                out[(e - start) as usize] += ca * cb;
            }
        }
        Ok(Series1::new(self.dir, start, out, order))
    }

    /// The series without its leading monomial factor: s = c·x^v·(1 + …) ↦ (v, c, 1 + …).
    fn split_unit(&self) -> Result<(i64, Q, Series1), SeriesError> {
        let v = self.valuation().ok_or(SeriesError::ZeroLeading)?;
        let c = self.c(v);
        let unit = self.shift(-v).scale(&c.recip());
        Ok((v, c, unit))
    }

    pub fn inverse(&self) -> Result<Series1, SeriesError> {
        let (v, c, u) = self.split_unit()?;
        let n = u.order;
        let mut inv = vec![zero(); (n + 1).max(0) as usize];
        if n >= 0 {
            inv[0] = one();
        }
        for k in 1..=n {
            let mut acc = zero();
            for j in 1..=k {
                let uj = u.c(j);
                if !uj.is_zero() {
                    acc -= uj * &inv[(k - j) as usize];
                }
            }
            inv[k as usize] = acc;
        }
        Ok(Series1::new(self.dir, 0, inv, n).scale(&c.recip()).shift(-v))
    }

    pub fn div(&self, other: &Series1) -> Result<Series1, SeriesError> {
        self.mul(&other.inverse()?)
    }

    /// d/dx in the series' own variable.
    pub fn derivative(&self) -> Series1 {
        let coeffs = (self.start..=self.order).map(|e| self.c(e) * qi(e)).collect();
        Series1::new(self.dir, self.start, coeffs, self.order).shift(-1)
    }

    /// x·d/dx in the series' own variable (keeps the order).
    pub fn euler(&self) -> Series1 {
        Series1::from_fn(self.dir, self.start, self.order, |e| self.c(e) * qi(e))
    }

    /// s^p for rational p. Requires s = x^v (1 + …) with v·p integral; the
    /// leading coefficient must be 1 unless p is an integer.
    pub fn pow_rational(&self, p: &Q) -> Result<Series1, SeriesError> {
        let (v, c, u) = self.split_unit()?;
        let vp = qi(v) * p;
        if !vp.is_integer() {
            return Err(SeriesError::InvalidLeading(format!(
                "x^{v} raised to {}",
                rational::to_str(p)
            )));
        }
        let cp = if p.is_integer() {
            let e: i64 = p.to_integer().try_into().map_err(|_| SeriesError::ZeroLeading)?;
            rational::pow_int(&c, e)
        } else if c.is_one() {
            one()
        } else {
            return Err(SeriesError::InvalidLeading(format!(
                "leading coefficient {} has no exact {} power",
                rational::to_str(&c),
                rational::to_str(p)
            )));
        };
        let n = u.order;
        let mut a = vec![zero(); (n + 1).max(0) as usize];
        if n >= 0 {
            a[0] = one();
        }
        for k in 1..=n {
            let mut acc = zero();
            for j in 1..=k {
                let uj = u.c(j);
                if !uj.is_zero() {
                    acc += (p * qi(j) - qi(k - j)) * uj * &a[(k - j) as usize];
                }
            }
            a[k as usize] = acc / qi(k);
        }
        let shift: i64 = vp.to_integer().try_into().map_err(|_| SeriesError::ZeroLeading)?;
        Ok(Series1::new(self.dir, 0, a, n).scale(&cp).shift(shift))
    }

    pub fn sqrt(&self) -> Result<Series1, SeriesError> {
        self.pow_rational(&q(1, 2))
    }

    fn require_unit(&self) -> Result<(), SeriesError> {
        if self.start < 0 || !self.c(0).is_one() || self.order < 0 {
            return Err(SeriesError::InvalidLeading("expected 1 + O(x)".into()));
        }
        Ok(())
    }

    pub fn log(&self) -> Result<Series1, SeriesError> {
        self.require_unit()?;
        let n = self.order;
        let mut l = vec![zero(); (n + 1) as usize];
        for k in 1..=n {
            let mut acc = qi(k) * self.c(k);
            for j in 1..k {
                if !l[j as usize].is_zero() {
                    acc -= qi(j) * &l[j as usize] * self.c(k - j);
                }
            }
            l[k as usize] = acc / qi(k);
        }
        Ok(Series1::new(self.dir, 0, l, n))
    }

    pub fn exp(&self) -> Result<Series1, SeriesError> {
        if self.val_or_past() < 1 {
            return Err(SeriesError::InvalidLeading("exp needs zero constant term".into()));
        }
        let n = self.order;
        let mut e = vec![zero(); (n + 1).max(0) as usize];
        if n >= 0 {
            e[0] = one();
        }
        for k in 1..=n {
            let mut acc = zero();
            for j in 1..=k {
                let sj = self.c(j);
                if !sj.is_zero() {
                    acc += qi(j) * sj * &e[(k - j) as usize];
                }
            }
            e[k as usize] = acc / qi(k);
        }
        Ok(Series1::new(self.dir, 0, e, n))
    }

    /// outer(inner(x)); inner must have valuation ≥ 1. Negative powers of the
    /// outer series are allowed and go through the inverse of inner.
    pub fn compose(&self, inner: &Series1) -> Result<Series1, SeriesError> {
        self.check_dir(inner)?;
        let (v, c, u) = inner.split_unit()?;
        if v < 1 {
            return Err(SeriesError::InvalidLeading(format!("inner valuation {v} < 1")));
        }
        let mut order = v * (self.order + 1) - 1;
        for (k, _) in self.terms() {
            if k != 0 {
                order = order.min(k * v + inner.order - v);
            }
        }
        let mut acc = Series1::zero(self.dir, order);
        let lead = Series1::monomial(self.dir, v, c, order);
        let base = lead.mul(&u)?.truncate(order);
        let terms: Vec<(i64, Q)> = self.terms().map(|(k, x)| (k, x.clone())).collect();
        if terms.is_empty() {
            return Ok(acc);
        }
        let kmin = terms[0].0;
        let mut pw = Series1::monomial(self.dir, 0, one(), order);
        if kmin < 0 {
            let inv = base.inverse()?;
            for _ in 0..-kmin {
                pw = pw.mul(&inv)?.truncate(order);
            }
        }
        let mut k = kmin.min(0);
        for (e, x) in terms {
            while k < e {
                pw = pw.mul(&base)?.truncate(order);
                k += 1;
            }
            acc = acc.add(&pw.scale(&x))?;
        }
        Ok(acc.truncate(order))
    }

    /// Compositional inverse by Lagrange inversion; needs valuation exactly 1.
    pub fn revert(&self) -> Result<Series1, SeriesError> {
        if self.valuation() != Some(1) {
            return Err(SeriesError::InvalidLeading("revert needs valuation 1".into()));
        }
        let n = self.order;
        let r = self.shift(-1);
        let rinv = r.inverse()?;
        let mut g = vec![zero(); (n + 1).max(0) as usize];
        let mut pw = Series1::monomial(self.dir, 0, one(), n - 1);
        for k in 1..=n {
            pw = pw.mul(&rinv)?.truncate(n - 1);
            g[k as usize] = pw.c(k - 1) / qi(k);
        }
        Ok(Series1::new(self.dir, 0, g, n))
    }

    pub fn parity_violation(&self, p: Parity) -> Option<i64> {
        let want = match p {
            Parity::Even => 0,
            Parity::Odd => 1,
        };
        self.terms().map(|(e, _)| e).find(|e| e.rem_euclid(2) != want)
    }

    pub fn assert_parity(self, p: Parity) -> Result<Series1, SeriesError> {
        match self.parity_violation(p) {
            Some(e) => Err(SeriesError::Parity(p, e)),
            None => Ok(self),
        }
    }

    pub fn to_json(&self) -> SeriesJson {
        SeriesJson {
            direction: self.dir,
            valuation: self.start.min(self.order + 1),
            order: self.order,
            coeffs: (self.start..=self.order).map(|e| rational::to_str(&self.c(e))).collect(),
        }
    }

    pub fn from_json(j: &SeriesJson) -> Option<Series1> {
        let coeffs = j.coeffs.iter().map(|s| rational::parse(s)).collect::<Option<Vec<_>>>()?;
        Some(Series1::new(j.direction, j.valuation, coeffs, j.order))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeriesJson {
    pub direction: Direction,
    pub valuation: i64,
    pub order: i64,
    pub coeffs: Vec<String>,
}

/// Coefficients of the vector field Σ aₘ x^{1+step·m} d/dx in the series' own variable.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VFieldCoeffs {
    pub step: i64,
    pub coeffs: BTreeMap<i64, Q>,
}

impl VFieldCoeffs {
    pub fn new(step: i64) -> VFieldCoeffs {
        VFieldCoeffs { step, coeffs: BTreeMap::new() }
    }

    pub fn with(step: i64, pairs: &[(i64, Q)]) -> VFieldCoeffs {
        let mut v = VFieldCoeffs::new(step);
        for (m, a) in pairs {
            if !a.is_zero() {
                v.coeffs.insert(*m, a.clone());
            }
        }
        v
    }

    pub fn get(&self, m: i64) -> Q {
        self.coeffs.get(&m).cloned().unwrap_or_else(zero)
    }
}

/// exp(sign·X)·g with X = Σ aₘ x^{1+step·m} d/dx.
pub fn vfield_exp_apply(a: &VFieldCoeffs, g: &Series1, sign: i64) -> Result<Series1, SeriesError> {
    for (m, c) in &a.coeffs {
        if !c.is_zero() && a.step * m < 1 {
            return Err(SeriesError::NoTermination(*m));
        }
    }
    let order = g.order;
    let field: Vec<(i64, Q)> = a.coeffs.iter().map(|(m, c)| (a.step * m, c * qi(sign))).collect();
    let mut acc = g.clone();
    let mut cur = g.clone();
    let mut n = 1;
    while !cur.is_zero() {
        let d = cur.euler();
        let mut next = Series1::zero(g.dir, order);
        for (s, c) in &field {
            next = next.add(&d.shift(*s).scale(c).truncate(order))?;
        }
        cur = next.scale(&qi(n).recip());
        acc = acc.add(&cur)?;
        n += 1;
    }
    Ok(acc)
}

/// Solve exp(X)·x^{±1} = target for the coefficients of X, order by order.
pub fn solve_vfield_coeffs(target: &Series1, step: i64) -> Result<VFieldCoeffs, SeriesError> {
    let e0 = target.valuation().ok_or(SeriesError::ZeroLeading)?;
    if (e0 != 1 && e0 != -1) || !target.c(e0).is_one() {
        return Err(SeriesError::InvalidLeading(format!(
            "target must start with x^1 or x^-1 with coefficient 1, got exponent {e0}"
        )));
    }
    if let Some((e, _)) = target.terms().find(|(e, _)| (e - e0).rem_euclid(step) != 0) {
        return Err(SeriesError::Stride(e));
    }
    let mut a = VFieldCoeffs::new(step);
    let mut m = 1;
    while e0 + step * m <= target.order {
        let e = e0 + step * m;
        // only the coefficient of xᵉ is needed, so work to order e
        let cur = vfield_exp_apply(&a, &Series1::monomial(target.dir, e0, one(), e), 1)?;
        let gap = target.c(e) - cur.c(e);
        if !gap.is_zero() {
            a.coeffs.insert(m, gap / qi(e0));
        }
        m += 1;
    }
    Ok(a)
}

/// Even solution of (1+z²) z h′ + (2+z²) h + z² = 0 with h(0) = 0.
pub fn solve_h_ode(order: i64) -> Series1 {
    let n = order.max(0) as usize;
    let mut h = vec![zero(); n + 1];
    let mut k = 2;
    while k <= n {
        let prev = h[k - 2].clone();
        let forcing = if k == 2 { one() } else { zero() };
        h[k] = -(qi(k as i64 - 1) * prev + forcing) / qi(k as i64 + 2);
        k += 2;
    }
    Series1::new(Direction::Z, 0, h, order)
}

/// (f, φ): f from integrating z f′ = f/(1−h), φ its compositional inverse.
pub fn compute_f_phi(order: i64) -> Result<(Series1, Series1), SeriesError> {
    let z = Direction::Z;
    let h = solve_h_ode(order);
    let one_s = Series1::monomial(z, 0, one(), order);
    let k = h.div(&one_s.sub(&h)?)?;
    // z u′ = u·h/(1−h) with f = z u, so log u = Σ kₙ zⁿ / n.
    let integ = Series1::from_fn(z, 1, order, |e| k.c(e) / qi(e));
    let u = integ.exp()?;
    let f = u.shift(1).truncate(order).assert_parity(Parity::Odd)?;
    let phi = f.revert()?.assert_parity(Parity::Odd)?;
    Ok((f, phi))
}

type Homog = Vec<Vec<Q>>;

fn homog_log(a: &Homog, deg: usize) -> Homog {
    // Euler-operator recurrence on homogeneous parts: n Lₙ = n Aₙ − Σ k Lₖ A_{n−k}.
    let mut l: Homog = (0..=deg).map(|n| vec![zero(); n + 1]).collect();
    for n in 1..=deg {
        let mut acc: Vec<Q> = a[n].iter().map(|c| c * qi(n as i64)).collect();
        for k in 1..n {
            for (i, lk) in l[k].iter().enumerate() {
                if lk.is_zero() {
                    continue;
                }
                for (j, am) in a[n - k].iter().enumerate() {
                    if !am.is_zero() {
                        acc[i + j] -= qi(k as i64) * lk * am;
                    }
                }
            }
        }
        l[n] = acc.into_iter().map(|c| c / qi(n as i64)).collect();
    }
    l
}

/// Homogeneous parts of (η(y) ∓ η(x))/(y ∓ x), indexed [total degree][power of x].
fn divided_difference(eta: &Series1, deg: usize, plus: bool) -> Homog {
    let mut a: Homog = (0..=deg).map(|n| vec![zero(); n + 1]).collect();
    for (k, c) in eta.terms() {
        let k = k as usize;
        if k == 0 || k - 1 > deg {
            continue;
        }
        for i in 0..k {
            let sign = if plus && i % 2 == 1 { -one() } else { one() };
            a[k - 1][i] += c * sign;
        }
    }
    a
}

fn check_eta(eta: &Series1, maxdeg: usize) -> Result<(), SeriesError> {
    if eta.valuation() != Some(1) || !eta.c(1).is_one() {
        return Err(SeriesError::InvalidLeading("eta must be z + higher terms".into()));
    }
    if eta.order < maxdeg as i64 + 1 {
        return Err(SeriesError::Order { need: maxdeg as i64 + 1, have: eta.order });
    }
    Ok(())
}

/// Qᵢⱼ = [x^{2i+1} y^{2j+1}] ½ log((η(y)−η(x))/(η(y)+η(x)) · (y+x)/(y−x)), for 2i+2j+2 ≤ maxdeg.
pub fn qij_coeffs(eta: &Series1, maxdeg: usize) -> Result<BTreeMap<(usize, usize), Q>, SeriesError> {
    check_eta(eta, maxdeg)?;
    if let Some(e) = eta.parity_violation(Parity::Odd) {
        return Err(SeriesError::Parity(Parity::Odd, e));
    }
    let lm = homog_log(&divided_difference(eta, maxdeg, false), maxdeg);
    let lp = homog_log(&divided_difference(eta, maxdeg, true), maxdeg);
    let mut out = BTreeMap::new();
    for i in 0.. {
        if 2 * i + 2 > maxdeg {
            break;
        }
        for j in 0.. {
            if 2 * i + 2 * j + 2 > maxdeg {
                break;
            }
            let d = 2 * i + 2 * j + 2;
            let v = (&lm[d][2 * i + 1] - &lp[d][2 * i + 1]) / qi(2);
            out.insert((i, j), v);
        }
    }
    Ok(out)
}

/// Qᵢⱼ = [xⁱ yʲ] log((1/η(x) − 1/η(y))·xy/(y−x)) for i, j ≥ 1, i + j ≤ maxdeg.
/// Only the mixed part of log((η(y)−η(x))/(y−x)) survives i, j ≥ 1.
pub fn qij_general(eta: &Series1, maxdeg: usize) -> Result<BTreeMap<(usize, usize), Q>, SeriesError> {
    check_eta(eta, maxdeg)?;
    let l = homog_log(&divided_difference(eta, maxdeg, false), maxdeg);
    let mut out = BTreeMap::new();
    for (d, part) in l.iter().enumerate() {
        for i in 1..d {
            out.insert((i, d - i), part[i].clone());
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const Z: Direction = Direction::Z;

    fn poly(cs: &[(i64, i64, i64)], order: i64) -> Series1 {
        let mut s = Series1::zero(Z, order);
        for &(e, n, d) in cs {
            s = s.add(&Series1::monomial(Z, e, q(n, d), order)).unwrap();
        }
        s
    }

    // Independent oracle: binomial expansion of (1 + c z^2)^p.
    fn binomial_series(c: Q, p: Q, order: i64) -> Series1 {
        Series1::from_fn(Z, 0, order, |e| {
            if e % 2 != 0 {
                return zero();
            }
            let k = (e / 2) as usize;
            rational::binom(&p, k) * rational::pow_int(&c, k as i64)
        })
    }

    #[test]
    fn products_and_orders() {
        let a = poly(&[(0, 1, 1), (1, 1, 1)], 10);
        let b = poly(&[(0, 1, 1), (1, -1, 1)], 10);
        assert_eq!(a.mul(&b).unwrap(), poly(&[(0, 1, 1), (2, -1, 1)], 10));
        let zz = Series1::monomial(Z, 1, one(), 5).mul(&Series1::monomial(Z, -1, one(), 5)).unwrap();
        assert_eq!(zz.coeff(0), Some(one()));
        assert_eq!(zz.order(), 4);
        let x = poly(&[(2, 1, 1)], 6);
        let y = poly(&[(0, 1, 1), (3, 2, 1)], 4);
        assert_eq!(x.mul(&y).unwrap().order(), 6);
        assert!(a.mul(&Series1::zero(Direction::ZInv, 3)).is_err());
    }

    #[test]
    fn zero_is_distinct_from_unknown() {
        let z0 = Series1::zero(Z, 5);
        assert!(z0.is_zero());
        assert_eq!(z0.coeff(5), Some(zero()));
        assert_eq!(z0.coeff(6), None);
    }

    #[test]
    fn elementary_functions() {
        let s = poly(&[(0, 1, 1), (2, 1, 1)], 12).sqrt().unwrap();
        assert_eq!(s, binomial_series(one(), q(1, 2), 12));
        let x = poly(&[(1, 1, 1)], 15);
        assert_eq!(x.exp().unwrap().log().unwrap(), x);
        let lg = poly(&[(0, 1, 1), (1, 1, 1)], 8).log().unwrap();
        for e in 1..=8 {
            let sign = if e % 2 == 1 { 1 } else { -1 };
            assert_eq!(lg.coeff(e).unwrap(), q(sign, e));
        }
        assert!(poly(&[(0, 2, 1)], 4).log().is_err());
    }

    #[test]
    fn reversion() {
        let id = poly(&[(1, 1, 1)], 9);
        assert_eq!(id.revert().unwrap(), id);
        assert!(poly(&[(2, 1, 1)], 9).revert().is_err());
    }

    #[test]
    fn h_matches_closed_form() {
        let h = solve_h_ode(30);
        assert_eq!(h.coeff(2), Some(q(-1, 4)));
        assert_eq!(h.coeff(4), Some(q(1, 8)));
        // (2√(1+z²) − z² − 2)/z²
        let oracle = binomial_series(one(), q(1, 2), 32)
            .scale(&qi(2))
            .sub(&poly(&[(0, 2, 1), (2, 1, 1)], 32))
            .unwrap()
            .shift(-2);
        assert_eq!(h, oracle.truncate(30));
        // ODE residual
        let z2 = poly(&[(2, 1, 1)], 30);
        let lhs = poly(&[(0, 1, 1), (2, 1, 1)], 30)
            .mul(&h.euler())
            .unwrap()
            .add(&poly(&[(0, 2, 1), (2, 1, 1)], 30).mul(&h).unwrap())
            .unwrap()
            .add(&z2)
            .unwrap();
        assert!(lhs.is_zero());
    }

    #[test]
    fn f_and_phi() {
        let (f, phi) = compute_f_phi(31).unwrap();
        let phi_oracle = binomial_series(q(1, 4), q(1, 2), 30).shift(1);
        assert_eq!(phi, phi_oracle);
        assert_eq!(phi.coeff(3), Some(q(1, 8)));
        assert_eq!(f.coeff(3), Some(q(-1, 8)));
        let inner = binomial_series(one(), q(1, 2), 34).scale(&qi(2)).sub(&poly(&[(0, 2, 1)], 34)).unwrap();
        let f_oracle = inner.sqrt().unwrap();
        assert_eq!(f, f_oracle.truncate(31));
        assert_eq!(f.mul(&f).unwrap().coeff(6), Some(q(1, 8)));
        // z f′ (1 − h) = f
        let h = solve_h_ode(31);
        let one_s = poly(&[(0, 1, 1)], 31);
        let res = f.euler().mul(&one_s.sub(&h).unwrap()).unwrap().sub(&f).unwrap();
        assert!(res.is_zero());
        assert_eq!(phi.compose(&f).unwrap().truncate(31), poly(&[(1, 1, 1)], 31));
    }

    #[test]
    fn vfield_examples() {
        let z = poly(&[(1, 1, 1)], 21);
        let a = VFieldCoeffs::with(2, &[(1, q(-1, 2))]);
        let got = vfield_exp_apply(&a, &z, 1).unwrap();
        let oracle = binomial_series(one(), q(-1, 2), 20).shift(1);
        assert_eq!(got, oracle);
        assert_eq!(vfield_exp_apply(&VFieldCoeffs::new(2), &z, 1).unwrap(), z);
        let bad = VFieldCoeffs::with(2, &[(-1, one())]);
        assert_eq!(vfield_exp_apply(&bad, &z, 1), Err(SeriesError::NoTermination(-1)));
    }

    #[test]
    fn a_coefficients() {
        let (_, phi) = compute_f_phi(25).unwrap();
        let a = solve_vfield_coeffs(&phi, 2).unwrap();
        let expected = [
            (1, q(1, 8)),
            (2, q(-1, 32)),
            (3, q(3, 256)),
            (4, q(-1, 192)),
            (5, q(31, 12288)),
        ];
        for (m, v) in expected {
            assert_eq!(a.get(m), v, "a_{m}");
        }
        assert_eq!(vfield_exp_apply(&a, &poly(&[(1, 1, 1)], 25), 1).unwrap(), phi);
        // f = exp(−X)·z
        let (f, _) = compute_f_phi(25).unwrap();
        assert_eq!(vfield_exp_apply(&a, &poly(&[(1, 1, 1)], 25), -1).unwrap(), f);
        assert!(solve_vfield_coeffs(&poly(&[(1, 1, 1)], 9), 2).unwrap().coeffs.is_empty());
    }

    #[test]
    fn negative_family() {
        // φ₂ = z√(1 − z⁻²) stored in w = 1/z: w⁻¹ (1 − w²)^{1/2}
        let w = Direction::ZInv;
        let phi2 = Series1::from_fn(w, 0, 24, |e| {
            if e % 2 == 0 {
                rational::binom(&q(1, 2), (e / 2) as usize) * rational::pow_int(&qi(-1), e / 2)
            } else {
                zero()
            }
        })
        .shift(-1);
        let a = solve_vfield_coeffs(&phi2, 2).unwrap();
        assert_eq!(a.get(1), q(1, 2));
        assert!(a.coeffs.keys().all(|&m| m == 1));
        let seed = Series1::monomial(w, -1, one(), 23);
        let f2 = vfield_exp_apply(&a, &seed, -1).unwrap();
        assert_eq!(f2.coeff(1), Some(q(1, 2)));
        assert_eq!(f2.coeff(3), Some(q(-1, 8)));
    }

    #[test]
    fn qij_basics() {
        let z = poly(&[(1, 1, 1)], 12);
        assert!(qij_coeffs(&z, 10).unwrap().values().all(|v| v.is_zero()));
        let (_, phi) = compute_f_phi(13).unwrap();
        let qm = qij_coeffs(&phi, 12).unwrap();
        for (&(i, j), v) in &qm {
            assert_eq!(qm[&(j, i)], *v);
        }
        // Brute-force oracle at total degree 2: with η = z + c z³ + …,
        // log((η(y)−η(x))/(y−x)) ≈ c(x²+xy+y²), log((η(y)+η(x))/(y+x)) ≈ c(x²−xy+y²),
        // so Q₀₀ = ½·2c = c.
        assert_eq!(qm[&(0, 0)], q(1, 8));
        assert!(qij_coeffs(&poly(&[(1, 1, 1), (2, 1, 1)], 12), 10).is_err());
    }

    fn odd_series() -> impl Strategy<Value = Series1> {
        prop::collection::vec(-6i64..=6, 6).prop_map(|cs| {
            let mut s = poly(&[(1, 1, 1)], 13);
            for (k, c) in cs.into_iter().enumerate() {
                s = s.add(&Series1::monomial(Z, 3 + 2 * k as i64, q(c, 5), 13)).unwrap();
            }
            s
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]
        #[test]
        fn reversion_round_trip(s in odd_series()) {
            let r = s.revert().unwrap();
            let id = poly(&[(1, 1, 1)], 13);
            prop_assert_eq!(r.compose(&s).unwrap().truncate(13), id.clone());
            prop_assert_eq!(s.compose(&r).unwrap().truncate(13), id);
            prop_assert!(r.parity_violation(Parity::Odd).is_none());
        }

        #[test]
        fn solver_round_trip(s in odd_series()) {
            let a = solve_vfield_coeffs(&s, 2).unwrap();
            prop_assert_eq!(vfield_exp_apply(&a, &poly(&[(1, 1, 1)], 13), 1).unwrap(), s);
        }

        #[test]
        fn qij_symmetric(s in odd_series()) {
            let m = qij_coeffs(&s, 12).unwrap();
            for (&(i, j), v) in &m {
                prop_assert_eq!(&m[&(j, i)], v);
            }
        }

        #[test]
        fn exp_log_inverse(cs in prop::collection::vec(-9i64..=9, 8)) {
            let mut s = Series1::zero(Z, 10);
            for (k, c) in cs.into_iter().enumerate() {
                s = s.add(&Series1::monomial(Z, k as i64 + 1, q(c, 7), 10)).unwrap();
            }
            prop_assert_eq!(s.exp().unwrap().log().unwrap(), s);
        }
    }
}
