//! The two tau-functions, generated from their linear constraints.
//!
//! Both constraint families contain a single first-order term −c·∂ₖ with no
//! ħ-dressing of the q's, so the coefficient of a monomial μ ∋ qₖ is fixed by
//! lower-weight data: [∂ₖZ]_{μ/qₖ} = mult·Z_μ. Monomials are solved in order of
//! weight; every pulled-back input has strictly smaller weight.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::fock::{FockError, FockSeries, Grading, HLaurent, QMonomial, TruncationSpec};
use crate::operators::families::{lhat, ltilde};
use crate::operators::{OpError, OpPoly};
use crate::rational::{self, one, q, qi, Q};

#[derive(Debug, Error, PartialEq)]
pub enum TaugenError {
    #[error("ħ-window [{hmin}, {hmax}] misses grading exponents in [{need_min}, {need_max}] at weight ≤ {dq}")]
    Window { dq: u32, hmin: i32, hmax: i32, need_min: i32, need_max: i32 },
    #[error("requested data beyond the truncation: {0}")]
    Beyond(String),
    #[error(transparent)]
    Op(#[from] OpError),
    #[error(transparent)]
    Fock(#[from] FockError),
}

/// Which variable of μ the recursion eliminates. Any choice gives the same
/// series; the largest index is the default.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Pick {
    Largest,
    Smallest,
}

impl Pick {
    fn of(self, mono: &QMonomial) -> u16 {
        let ix = mono.indices();
        match self {
            Pick::Largest => ix[ix.len() - 1],
            Pick::Smallest => ix[0],
        }
    }
}

/// Partitions of `w` into odd parts, each as a sorted index list.
pub fn odd_partitions(w: u32) -> Vec<QMonomial> {
    fn go(rest: u32, max: u32, cur: &mut Vec<u16>, out: &mut Vec<QMonomial>) {
        if rest == 0 {
            out.push(QMonomial::new(cur.clone()));
            return;
        }
        let mut k = max.min(rest);
        if k % 2 == 0 {
            k -= 1;
        }
        while k >= 1 {
            cur.push(k as u16);
            go(rest - k, k, cur, out);
            cur.pop();
            if k < 2 {
                break;
            }
            k -= 2;
        }
    }
    let mut out = Vec::new();
    go(w, w.max(1), &mut Vec::new(), &mut out);
    out
}

/// Range of ħ-exponents of Z_K at weights ≤ dq: products of genus-0 pieces
/// (q₁³ at ħ⁻²) reach −2⌊dq/3⌋, a single top-genus piece reaches ⌊dq/3⌋ − 1.
pub fn kw_exponent_range(dq: u32) -> (i32, i32) {
    let t = (dq / 3) as i32;
    (-2 * t, (t - 1).max(0))
}

pub fn gen_kw(trunc: TruncationSpec) -> Result<FockSeries, TaugenError> {
    gen_kw_with(trunc, Pick::Largest)
}

pub fn gen_kw_with(trunc: TruncationSpec, pick: Pick) -> Result<FockSeries, TaugenError> {
    let (lo, hi) = kw_exponent_range(trunc.dq);
    if trunc.hmin > lo || trunc.hmax < hi {
        return Err(TaugenError::Window { dq: trunc.dq, hmin: trunc.hmin, hmax: trunc.hmax, need_min: lo, need_max: hi });
    }
    let bound = trunc.dq.max(1) as u16;
    let mut ops: BTreeMap<u16, OpPoly> = BTreeMap::new();
    let mut z = FockSeries::one(trunc);
    for w in 1..=trunc.dq {
        // coefficients vanish unless 3 | weight
        if w % 3 != 0 {
            continue;
        }
        for mu in odd_partitions(w) {
            let k = pick.of(&mu);
            let nu = mu.remove(&[k]).expect("k occurs in μ");
            let m = (k as i64 - 3) / 2;
            let op = ops.entry(k).or_insert_with(|| lhat(2 * m, bound));
            let mut rhs = op.coeff_of_image(&z, &nu);
            if m == 0 {
                rhs.add_assign(&z.get(&nu).scale(&q(1, 8)));
            }
            let denom = qi(k as i64 * mu.mult(k) as i64);
            z.add_coeff(&mu, &rhs.scale(&denom.recip()));
        }
    }
    Ok(z)
}

/// The BGW coefficients have ħ-exponent 3·weight − #factors ≥ 2·weight, and each
/// is ħ² times data of lower weight, so cutting at Hmax loses nothing below it.
pub fn gen_bgw(trunc: TruncationSpec) -> Result<FockSeries, TaugenError> {
    gen_bgw_with(trunc, Pick::Largest)
}

pub fn gen_bgw_with(trunc: TruncationSpec, pick: Pick) -> Result<FockSeries, TaugenError> {
    if trunc.hmin > 0 {
        return Err(TaugenError::Window { dq: trunc.dq, hmin: trunc.hmin, hmax: trunc.hmax, need_min: 0, need_max: 0 });
    }
    let bound = trunc.dq.max(1) as u16;
    let mut ops: BTreeMap<u16, OpPoly> = BTreeMap::new();
    let mut z = FockSeries::one(trunc);
    for w in 1..=trunc.dq {
        for mu in odd_partitions(w) {
            if Grading::Bgw.exponent(&mu) > qi(trunc.hmax as i64) {
                continue;
            }
            let k = pick.of(&mu);
            let nu = mu.remove(&[k]).expect("k occurs in μ");
            let m = (k as i64 - 1) / 2;
            let op = match ops.entry(k) {
                std::collections::btree_map::Entry::Occupied(o) => o.into_mut(),
                std::collections::btree_map::Entry::Vacant(v) => v.insert(ltilde(2 * m, bound)?),
            };
            let mut rhs = op.coeff_of_image(&z, &nu);
            if m == 0 {
                rhs.add_assign(&z.get(&nu).scale(&q(1, 8)));
            }
            let denom = qi(2 * k as i64 * mu.mult(k) as i64);
            z.add_coeff(&mu, &rhs.shift(2).scale(&denom.recip()));
        }
    }
    Ok(z)
}

fn double_factorial_odd(k: i64) -> Q {
    // (2k−1)!!, with (−1)!! = 1
    let mut r = one();
    let mut j = 2 * k - 1;
    while j > 1 {
        r *= qi(j);
        j -= 2;
    }
    r
}

/// ⟨τ_{d₁}…τ_{dₙ}⟩ read from log Z_K through tₖ = (2k−1)!! q_{2k+1}.
pub fn intersection_from_log(log_zk: &FockSeries, d: &[u32]) -> Result<Q, TaugenError> {
    let n = d.len() as i64;
    let s: i64 = d.iter().map(|&x| x as i64).sum();
    // Σdᵢ = 3g − 3 + n
    if n == 0 || (s + 3 - n) % 3 != 0 || (s + 3 - n) < 0 {
        return Ok(rational::zero());
    }
    let g = (s + 3 - n) / 3;
    if 2 * g - 2 + n <= 0 {
        return Ok(rational::zero());
    }
    let mono = QMonomial::new(d.iter().map(|&x| (2 * x + 1) as u16).collect());
    let t = log_zk.trunc();
    let e = (2 * g - 2) as i32;
    if !t.admits(&mono, e) {
        return Err(TaugenError::Beyond(format!("{mono} at ħ^{e} is outside Dq={} window [{}, {}]", t.dq, t.hmin, t.hmax)));
    }
    let mut c = log_zk.get(&mono).get(e);
    let mut counts: BTreeMap<u32, usize> = BTreeMap::new();
    for &x in d {
        *counts.entry(x).or_default() += 1;
        c /= double_factorial_odd(x as i64);
    }
    for m in counts.values() {
        c *= rational::factorial(*m);
    }
    Ok(c)
}

pub fn intersection_number(d: &[u32]) -> Result<Q, TaugenError> {
    let w: u32 = d.iter().map(|&x| 2 * x + 1).sum();
    let (lo, hi) = kw_exponent_range(w);
    let zk = gen_kw(TruncationSpec::new(w, lo, hi)?)?;
    intersection_from_log(&zk.log()?, d)
}

/// Ω_K = M̂₋₄ − L̂₋₁ + ⅛q₄, which annihilates Z_K.
pub fn kw_cut_and_join(bound: u16) -> OpPoly {
    use crate::operators::families::mhat;
    let mut op = mhat(-4, bound).sub(&lhat(-1, bound));
    op.add_coeff(crate::operators::OpKey::new(vec![4], vec![]), &HLaurent::constant(q(1, 8)));
    op
}

/// Ω_B = M̂₋₂ − 2ħ⁻²L̂₋₁ + ⅛q₂, which annihilates the BGW function.
pub fn bgw_cut_and_join(bound: u16) -> OpPoly {
    use crate::operators::families::mhat;
    let mut op = mhat(-2, bound).sub(&lhat(-1, bound).scale_h(-2, qi(2)));
    op.add_coeff(crate::operators::OpKey::new(vec![2], vec![]), &HLaurent::constant(q(1, 8)));
    op
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::OpKey;
    use crate::rational::factorial;

    fn kw(dq: u32) -> FockSeries {
        let (lo, hi) = kw_exponent_range(dq);
        gen_kw(TruncationSpec::new(dq, lo, hi).unwrap()).unwrap()
    }

    #[test]
    fn partitions() {
        assert_eq!(odd_partitions(0).len(), 1);
        assert_eq!(odd_partitions(7).len(), 5);
        assert_eq!(odd_partitions(20).len(), 64);
    }

    #[test]
    fn kw_low_coefficients() {
        let f = kw(9).log().unwrap();
        assert_eq!(f.coeff(&[3], 0), q(1, 24));
        assert_eq!(f.coeff(&[1, 1, 1], -2), q(1, 6));
        assert_eq!(intersection_number(&[1]).unwrap(), q(1, 24));
        assert_eq!(intersection_number(&[0, 0, 0]).unwrap(), one());
        assert_eq!(intersection_number(&[0, 0]).unwrap(), qi(0));
        assert_eq!(intersection_number(&[4]).unwrap(), q(1, 1152));
        assert_eq!(intersection_number(&[0, 0, 0, 1]).unwrap(), one());
        assert_eq!(intersection_number(&[1, 1]).unwrap(), q(1, 24));
    }

    #[test]
    fn kw_tau1_powers() {
        let f = kw(15).log().unwrap();
        for k in 1..=5usize {
            let expect = factorial(k - 1) / qi(24);
            assert_eq!(intersection_from_log(&f, &vec![1; k]).unwrap(), expect);
        }
    }

    #[test]
    fn dilaton_equation() {
        let f = kw(18).log().unwrap();
        let cases: &[&[u32]] = &[&[4], &[2, 0], &[1, 1, 1], &[3, 0, 0, 0], &[2, 2, 0, 0], &[5, 0, 0], &[4, 1]];
        for d in cases {
            let n = d.len() as i64;
            let s: i64 = d.iter().map(|&x| x as i64).sum();
            let g = (s + 3 - n) / 3;
            let mut with = d.to_vec();
            with.push(1);
            let lhs = intersection_from_log(&f, &with).unwrap();
            assert_eq!(lhs, qi(2 * g - 2 + n) * intersection_from_log(&f, d).unwrap(), "{d:?}");
        }
        assert!(intersection_from_log(&kw(3).log().unwrap(), &[4]).is_err());
    }

    #[test]
    fn kw_window_checked() {
        assert!(matches!(gen_kw(TruncationSpec::new(9, -2, 2).unwrap()), Err(TaugenError::Window { .. })));
        assert_eq!(gen_kw(TruncationSpec::new(0, 0, 0).unwrap()).unwrap(), FockSeries::one(TruncationSpec::new(0, 0, 0).unwrap()));
    }

    #[test]
    fn kw_constraints_and_cut_and_join() {
        const DQ: u32 = 15;
        let dq = DQ;
        let z = kw(dq);
        let b = dq as u16;
        assert!(z.grading_check(Grading::Kw).unwrap().is_empty());
        for m in -1..=((dq as i64 - 3) / 2) {
            let k = (2 * m + 3) as u16;
            let mut c = lhat(2 * m, b).sub(&OpPoly::term(&[], &[k], 0, qi(k as i64)));
            if m == 0 {
                c.add_coeff(OpKey::new(vec![], vec![]), &HLaurent::constant(q(1, 8)));
            }
            // the ∂ₖ term reads weight w + k, so the image is exact up to Dq − k
            let img = c.apply(&z);
            assert!(img.iter().all(|(mono, _)| mono.qdeg() + k as u32 > DQ), "m = {m}");
        }
        assert!(kw_cut_and_join(b).apply(&z).is_empty());
        // string equation
        assert!(lhat(-2, b).sub(&OpPoly::term(&[], &[1], 0, one())).apply(&z).is_empty());
        assert_eq!(gen_kw_with(z.trunc(), Pick::Smallest).unwrap(), z);
    }

    #[test]
    fn bgw_coefficients_and_closure() {
        const DQ: u32 = 7;
        let t = TruncationSpec::new(DQ, -4, 16).unwrap();
        let z = gen_bgw(t).unwrap();
        let f = z.log().unwrap();
        assert_eq!(f.coeff(&[1], 2), q(1, 16));
        assert!(z.iter().all(|(m, _)| m.is_odd()));
        assert!(z.grading_check(Grading::Bgw).unwrap().is_empty());
        assert_eq!(gen_bgw_with(t, Pick::Smallest).unwrap(), z);
        for m in 0..=3i64 {
            let k = (2 * m + 1) as u16;
            let mut c = ltilde(2 * m, 7).unwrap().sub(&OpPoly::term(&[], &[k], -2, qi(2 * k as i64)));
            if m == 0 {
                c.add_coeff(OpKey::new(vec![], vec![]), &HLaurent::constant(q(1, 8)));
            }
            // the ħ⁻²∂ₖ term reads weight w + k at exponent e + 2
            let img = c.apply(&z);
            assert!(img.iter().all(|(mono, h)| mono.qdeg() + k as u32 > DQ || h.min_exp().unwrap() > t.hmax - 2), "m = {m}");
        }
        // Ω_B reaches down by ħ⁻⁴, so the image is exact below Hmax − 4
        let img = bgw_cut_and_join(7).apply(&z);
        assert!(img.iter().all(|(_, h)| h.min_exp().unwrap() > t.hmax - 4), "{img:?}");
        assert!(gen_bgw(TruncationSpec::new(3, 1, 9).unwrap()).is_err());
    }
}
