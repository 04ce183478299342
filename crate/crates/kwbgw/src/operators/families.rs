//! The infinite operator families, materialized up to a variable-index bound.
//!
//! `bound` caps every creator and annihilator index. A term with a derivative
//! index above the bound kills every monomial of weight ≤ bound, so for actions on
//! such monomials the omitted terms are exactly zero.

use serde::Serialize;

use super::{OpError, OpKey, OpPoly};
use crate::fock::HLaurent;
use crate::rational::{one, q, qi, Q};
use crate::series1d::{self, Direction, Series1, VFieldCoeffs};

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum OpFamily {
    /// α̂ₙ: n∂ₙ for n > 0, ħ⁻²q₋ₙ for n < 0, zero for n = 0
    AlphaHat(i64),
    /// αₙ without ħ: n∂ₙ, q₋ₙ
    Alpha(i64),
    Lhat(i64),
    /// odd-variable part of L̂ at an even index
    Ltilde(i64),
    Mhat(i64),
    /// Σ (2k+1) q_{2k−2m+1} ∂_{2k+1}, parameter is 2m
    Xtilde(i64),
    /// Σ k q_{k−m} ∂_k
    X(i64),
    P1,
    P2,
    /// P₂ with ħ^{−2k−2} powers; fails the conjugation identity, kept as a control
    P2Printed,
    Dq(u16),
    Q(u16),
}

fn push(p: &mut OpPoly, cre: &[u16], ann: &[u16], e: i32, c: Q) {
    p.add_term(OpKey::new(cre.to_vec(), ann.to_vec()), e, c);
}

fn idx(v: i64, bound: u16) -> Option<u16> {
    (v >= 1 && v <= bound as i64).then_some(v as u16)
}

pub fn alpha_hat(n: i64, bound: u16) -> OpPoly {
    let mut p = OpPoly::zero();
    if let Some(k) = idx(n, bound) {
        push(&mut p, &[], &[k], 0, qi(n));
    } else if let Some(k) = idx(-n, bound) {
        push(&mut p, &[k], &[], -2, one());
    }
    p
}

pub fn alpha(n: i64, bound: u16) -> OpPoly {
    let mut p = OpPoly::zero();
    if let Some(k) = idx(n, bound) {
        push(&mut p, &[], &[k], 0, qi(n));
    } else if let Some(k) = idx(-n, bound) {
        push(&mut p, &[k], &[], 0, one());
    }
    p
}

fn lhat_filtered(m: i64, bound: u16, keep: impl Fn(i64) -> bool) -> OpPoly {
    let b = bound as i64;
    let mut p = OpPoly::zero();
    for k in 1..=b {
        if let (Some(c), Some(a)) = (idx(k, bound), idx(k + m, bound)) {
            if keep(k) && keep(k + m) {
                push(&mut p, &[c], &[a], 0, qi(k + m));
            }
        }
    }
    for a in 1..=b {
        if let Some(bb) = idx(m - a, bound) {
            if keep(a) && keep(m - a) {
                push(&mut p, &[], &[a as u16, bb], 2, q(a * (m - a), 2));
            }
        }
    }
    for i in 1..=b {
        if let Some(j) = idx(-m - i, bound) {
            if keep(i) && keep(-m - i) {
                push(&mut p, &[i as u16, j], &[], -2, q(1, 2));
            }
        }
    }
    p
}

pub fn lhat(m: i64, bound: u16) -> OpPoly {
    lhat_filtered(m, bound, |_| true)
}

pub fn ltilde(two_m: i64, bound: u16) -> Result<OpPoly, OpError> {
    if two_m % 2 != 0 {
        return Err(OpError::Family(format!("L~ is defined on even indices only, got {two_m}")));
    }
    Ok(lhat_filtered(two_m, bound, |k| k % 2 != 0))
}

pub fn mhat(k: i64, bound: u16) -> OpPoly {
    let b = bound as i64;
    let mut p = OpPoly::zero();
    for i in 1..=b {
        for j in 1..=b {
            if let Some(s) = idx(i + j + k, bound) {
                push(&mut p, &[i as u16, j as u16], &[s], 0, q(i + j + k, 2));
            }
            if let Some(s) = idx(i + j - k, bound) {
                push(&mut p, &[s], &[i as u16, j as u16], 2, q(i * j, 2));
            }
            if let Some(s) = idx(k - i - j, bound) {
                push(&mut p, &[], &[i as u16, j as u16, s], 4, q(i * j * (k - i - j), 6));
            }
            if let Some(s) = idx(-k - i - j, bound) {
                push(&mut p, &[i as u16, j as u16, s], &[], -2, q(1, 6));
            }
        }
    }
    p
}

pub fn xtilde(two_m: i64, bound: u16) -> Result<OpPoly, OpError> {
    if two_m % 2 != 0 {
        return Err(OpError::Family(format!("X~ is defined on even indices only, got {two_m}")));
    }
    let mut p = OpPoly::zero();
    let mut k = 0;
    while 2 * k + 1 <= bound as i64 {
        if let Some(c) = idx(2 * k - two_m + 1, bound) {
            push(&mut p, &[c], &[(2 * k + 1) as u16], 0, qi(2 * k + 1));
        }
        k += 1;
    }
    Ok(p)
}

pub fn x_family(m: i64, bound: u16) -> OpPoly {
    let mut p = OpPoly::zero();
    for k in 1..=bound as i64 {
        if let Some(c) = idx(k - m, bound) {
            push(&mut p, &[c], &[k as u16], 0, qi(k));
        }
    }
    p
}

/// Coefficients (1/3)[z^{2k+1}](2√(1+z²)−2)^{3/2}, k ≥ 1.
pub fn p1_series(order: i64) -> Result<Series1, OpError> {
    let z = Direction::Z;
    let e = |err: series1d::SeriesError| OpError::Family(err.to_string());
    let one_z2 = Series1::from_fn(z, 0, order + 2, |k| if k == 0 || k == 2 { one() } else { q(0, 1) });
    let inner = one_z2.sqrt().map_err(e)?.scale(&qi(2)).sub(&Series1::monomial(z, 0, qi(2), order + 2)).map_err(e)?;
    Ok(inner.pow_rational(&q(3, 2)).map_err(e)?.scale(&q(1, 3)))
}

pub fn p1(bound: u16) -> Result<OpPoly, OpError> {
    let s = p1_series(bound as i64 + 1)?;
    let mut p = OpPoly::zero();
    push(&mut p, &[], &[1], -2, -one());
    let mut k = 1;
    while 2 * k + 1 <= bound as i64 {
        let c = s.coeff(2 * k + 1).expect("order covers bound");
        push(&mut p, &[], &[(2 * k + 1) as u16], (2 * k - 2) as i32, c * qi(2 * k + 1));
        k += 1;
    }
    Ok(p)
}

fn p2_with(bound: u16, extra: i32) -> Result<OpPoly, OpError> {
    let z = Direction::Z;
    let n = bound as i64 + 3;
    let s = Series1::from_fn(z, 0, n, |k| if k == 0 { one() } else if k == 2 { -one() } else { q(0, 1) })
        .sqrt()
        .map_err(|err| OpError::Family(err.to_string()))?
        .shift(1);
    let mut p = OpPoly::zero();
    let mut k = 1;
    while 2 * k - 1 <= bound as i64 {
        let c = s.coeff(2 * k + 1).expect("order covers bound");
        push(&mut p, &[(2 * k - 1) as u16], &[], (-2 * k - 2) as i32 + extra, c);
        k += 1;
    }
    Ok(p)
}

/// P₂ = Σ [z^{2k+1}](z√(1−z²)) ħ^{−2k−4} q_{2k−1}.
pub fn p2(bound: u16) -> Result<OpPoly, OpError> {
    p2_with(bound, -2)
}

pub fn p2_printed(bound: u16) -> Result<OpPoly, OpError> {
    p2_with(bound, 0)
}

/// The coefficients aₘ with exp(Σ aₘ z^{1+2m} d/dz)·z = z√(1+z²/4).
pub fn build_a_coeffs(order: i64) -> Result<VFieldCoeffs, OpError> {
    let e = |err: series1d::SeriesError| OpError::Family(err.to_string());
    let (_, phi) = series1d::compute_f_phi(order).map_err(e)?;
    series1d::solve_vfield_coeffs(&phi, 2).map_err(e)
}

/// U = Σ aₘ ħ^{2m} L̂_{2m}, for 2m ≤ max_shift.
pub fn u_operator(a: &VFieldCoeffs, max_shift: i64, bound: u16, odd_only: bool) -> Result<OpPoly, OpError> {
    let mut u = OpPoly::zero();
    for (&m, am) in &a.coeffs {
        if 2 * m > max_shift {
            continue;
        }
        let l = if odd_only { ltilde(2 * m, bound)? } else { lhat(2 * m, bound) };
        u.add_assign(&l.scale(&HLaurent::mono((2 * m) as i32, am.clone())));
    }
    Ok(u)
}

impl OpFamily {
    pub fn materialize(&self, bound: u16) -> Result<OpPoly, OpError> {
        Ok(match *self {
            OpFamily::AlphaHat(n) => alpha_hat(n, bound),
            OpFamily::Alpha(n) => alpha(n, bound),
            OpFamily::Lhat(m) => lhat(m, bound),
            OpFamily::Ltilde(m) => ltilde(m, bound)?,
            OpFamily::Mhat(k) => mhat(k, bound),
            OpFamily::Xtilde(m) => xtilde(m, bound)?,
            OpFamily::X(m) => x_family(m, bound),
            OpFamily::P1 => p1(bound)?,
            OpFamily::P2 => p2(bound)?,
            OpFamily::P2Printed => p2_printed(bound)?,
            OpFamily::Dq(n) => OpPoly::term(&[], &[n], 0, one()),
            OpFamily::Q(n) => OpPoly::term(&[n], &[], 0, one()),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{FockSeries, QMonomial, TruncationSpec};

    #[test]
    fn euler_term_of_l0() {
        let t = TruncationSpec::new(10, -10, 10).unwrap();
        let z = FockSeries::from_terms(t, [(QMonomial::new(vec![3]), HLaurent::constant(one()))]);
        assert_eq!(lhat(0, 10).apply(&z).coeff(&[3], 0), qi(3));
    }

    #[test]
    fn p1_coefficients() {
        let p = p1(15).unwrap();
        assert_eq!(p.get(&[], &[3]), HLaurent::constant(one()));
        assert_eq!(p.get(&[], &[1]), HLaurent::mono(-2, -one()));
        // P₁ = Σ [z^{2k+1}](−z + f z²/√(1+z²)) ħ^{2k−2} ∂_{2k+1}
        let (f, _) = series1d::compute_f_phi(20).unwrap();
        let z = Direction::Z;
        let sq = Series1::from_fn(z, 0, 20, |k| if k == 0 || k == 2 { one() } else { q(0, 1) }).sqrt().unwrap();
        let alt = f.shift(2).div(&sq).unwrap().sub(&Series1::monomial(z, 1, one(), 20)).unwrap();
        for k in 0..=7i64 {
            let c = alt.coeff(2 * k + 1).unwrap();
            assert_eq!(p.get(&[], &[(2 * k + 1) as u16]), HLaurent::mono((2 * k - 2) as i32, c));
        }
    }

    #[test]
    fn p2_coefficients() {
        let p = p2(9).unwrap();
        // z√(1−z²) = z − z³/2 − z⁵/8 − …
        assert_eq!(p.get(&[1], &[]), HLaurent::mono(-6, q(-1, 2)));
        assert_eq!(p.get(&[3], &[]), HLaurent::mono(-8, q(-1, 8)));
        assert_eq!(p2_printed(9).unwrap().get(&[1], &[]), HLaurent::mono(-4, q(-1, 2)));
    }

    #[test]
    fn a1() {
        assert_eq!(build_a_coeffs(12).unwrap().get(1), q(1, 8));
    }

    #[test]
    fn ltilde_rejects_odd() {
        assert!(ltilde(3, 10).is_err());
        assert!(OpFamily::Ltilde(-2).materialize(7).is_ok());
    }
}
