//! The abstract algebra spanned by α̂ₙ, Lₘ, Mₖ and a central 𝟙, with the
//! structure constants of the ħ-scaled realization:
//!
//!   [α̂ₘ, α̂ₙ] = m ħ⁻² δ_{m+n,0} 𝟙
//!   [α̂ₙ, Lₖ] = n α̂_{n+k}
//!   [α̂ₙ, Mₖ] = n L_{n+k}
//!   [Lₘ, Lₙ] = (m−n) L_{m+n} + (m³−m)/12 δ_{m+n,0} 𝟙
//!   [Lₙ, Mₖ] = (2n−k) M_{n+k} + ħ²(n³−n)/12 α̂_{n+k}
//!
//! [Mₖ, Mₗ] is not in this span and is reported as an error.

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;

use super::families::{alpha_hat, lhat, mhat};
use super::{OpError, OpPoly};
use crate::fock::HLaurent;
use crate::rational::{q, qi, Q};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Basis {
    One,
    Alpha(i64),
    L(i64),
    M(i64),
}

impl fmt::Display for Basis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Basis::One => write!(f, "1"),
            Basis::Alpha(n) => write!(f, "a[{n}]"),
            Basis::L(n) => write!(f, "L[{n}]"),
            Basis::M(n) => write!(f, "M[{n}]"),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct WElem(BTreeMap<Basis, HLaurent>);

impl WElem {
    pub fn zero() -> WElem {
        WElem::default()
    }

    pub fn basis(b: Basis) -> WElem {
        WElem::term(b, HLaurent::constant(qi(1)))
    }

    pub fn term(b: Basis, c: HLaurent) -> WElem {
        let mut w = WElem::zero();
        w.add_term(b, &c);
        w
    }

    pub fn add_term(&mut self, b: Basis, c: &HLaurent) {
        if matches!(b, Basis::Alpha(0)) || c.is_zero() {
            return;
        }
        let slot = self.0.entry(b).or_default();
        slot.add_assign(c);
        if slot.is_zero() {
            self.0.remove(&b);
        }
    }

    pub fn add(&self, other: &WElem) -> WElem {
        let mut r = self.clone();
        for (b, c) in &other.0 {
            r.add_term(*b, c);
        }
        r
    }

    pub fn scale(&self, c: &HLaurent) -> WElem {
        let mut r = WElem::zero();
        for (b, x) in &self.0 {
            r.add_term(*b, &x.mul(c));
        }
        r
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Basis, &HLaurent)> {
        self.0.iter()
    }

    pub fn m_count(&self) -> usize {
        self.0.keys().filter(|b| matches!(b, Basis::M(_))).count()
    }
}

impl fmt::Display for WElem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let parts: Vec<String> = self.0.iter().map(|(b, c)| format!("({c})*{b}")).collect();
        write!(f, "{}", parts.join(" + "))
    }
}

fn c(x: Q) -> HLaurent {
    HLaurent::constant(x)
}

/// Bracket of two basis elements.
pub fn basis_bracket(a: Basis, b: Basis) -> Result<WElem, OpError> {
    use Basis::*;
    Ok(match (a, b) {
        (One, _) | (_, One) => WElem::zero(),
        (Alpha(m), Alpha(n)) => {
            if m + n == 0 {
                WElem::term(One, HLaurent::mono(-2, qi(m)))
            } else {
                WElem::zero()
            }
        }
        (Alpha(n), L(k)) => WElem::term(Alpha(n + k), c(qi(n))),
        (Alpha(n), M(k)) => WElem::term(L(n + k), c(qi(n))),
        (L(m), L(n)) => {
            let mut w = WElem::term(L(m + n), c(qi(m - n)));
            if m + n == 0 {
                w.add_term(One, &c(q(m * m * m - m, 12)));
            }
            w
        }
        (L(n), M(k)) => {
            let mut w = WElem::term(M(n + k), c(qi(2 * n - k)));
            w.add_term(Alpha(n + k), &HLaurent::mono(2, q(n * n * n - n, 12)));
            w
        }
        (M(k), M(l)) => return Err(OpError::OutsideSpan(format!("[M[{k}], M[{l}]]"))),
        (L(_), Alpha(_)) | (M(_), Alpha(_)) | (M(_), L(_)) => {
            return Ok(basis_bracket(b, a)?.scale(&c(qi(-1))));
        }
    })
}

pub fn walgebra_bracket(a: &WElem, b: &WElem) -> Result<WElem, OpError> {
    let mut r = WElem::zero();
    for (x, cx) in a.iter() {
        for (y, cy) in b.iter() {
            let br = basis_bracket(*x, *y)?;
            r = r.add(&br.scale(&cx.mul(cy)));
        }
    }
    Ok(r)
}

pub fn realize_basis(b: Basis, bound: u16) -> OpPoly {
    match b {
        Basis::One => OpPoly::scalar(HLaurent::constant(qi(1))),
        Basis::Alpha(n) => alpha_hat(n, bound),
        Basis::L(m) => lhat(m, bound),
        Basis::M(k) => mhat(k, bound),
    }
}

pub fn walgebra_realize(a: &WElem, bound: u16) -> OpPoly {
    let mut p = OpPoly::zero();
    for (b, c) in a.iter() {
        p.add_assign(&realize_basis(*b, bound).scale(c));
    }
    p
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn examples() {
        let a2 = WElem::term(Basis::Alpha(2), c(q(1, 2)));
        let l = WElem::basis(Basis::L(-2));
        // α̂₂/2 with L₋₂ lands on α̂₀ = 0
        assert!(walgebra_bracket(&a2, &l).unwrap().is_zero());
        let br = walgebra_bracket(&WElem::basis(Basis::L(2)), &l).unwrap();
        let mut expect = WElem::term(Basis::L(0), c(qi(4)));
        expect.add_term(Basis::One, &c(q(1, 2)));
        assert_eq!(br, expect);
        assert!(walgebra_bracket(&WElem::basis(Basis::M(1)), &WElem::basis(Basis::M(2))).is_err());
    }

    fn basis_elem(allow_m: bool) -> impl Strategy<Value = Basis> {
        let hi = if allow_m { 3 } else { 2 };
        (0..hi, -4i64..=4).prop_map(|(t, n)| match t {
            0 => Basis::Alpha(if n == 0 { 1 } else { n }),
            1 => Basis::L(n),
            _ => Basis::M(n),
        })
    }

    fn elem(allow_m: bool) -> impl Strategy<Value = WElem> {
        prop::collection::vec((basis_elem(allow_m), -3i64..=3, -1i32..=1), 1..3).prop_map(|ts| {
            let mut w = WElem::zero();
            for (b, x, e) in ts {
                w.add_term(b, &HLaurent::mono(2 * e, qi(x)));
            }
            w
        })
    }

    fn jacobi(a: &WElem, b: &WElem, cc: &WElem) -> WElem {
        let t1 = walgebra_bracket(a, &walgebra_bracket(b, cc).unwrap()).unwrap();
        let t2 = walgebra_bracket(b, &walgebra_bracket(cc, a).unwrap()).unwrap();
        let t3 = walgebra_bracket(cc, &walgebra_bracket(a, b).unwrap()).unwrap();
        t1.add(&t2).add(&t3)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]
        #[test]
        fn jacobi_identity(a in elem(true), b in elem(false), cc in elem(false)) {
            prop_assert!(jacobi(&a, &b, &cc).is_zero());
            prop_assert!(jacobi(&b, &a, &cc).is_zero());
        }

        #[test]
        fn antisymmetry(a in elem(true), b in elem(false)) {
            let x = walgebra_bracket(&a, &b).unwrap();
            let y = walgebra_bracket(&b, &a).unwrap();
            prop_assert!(x.add(&y).is_zero());
        }
    }
}
