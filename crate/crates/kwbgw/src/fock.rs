//! Sparse series in the times q₁, q₂, … with Laurent-in-ħ coefficients,
//! truncated by total weight and by an ħ-exponent window.

use std::collections::BTreeMap;
use std::fmt;

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rational::{self, one, q, qi, Q};

#[derive(Debug, Error, PartialEq)]
pub enum FockError {
    #[error("truncation specs differ")]
    SpecMismatch,
    #[error("invalid truncation spec")]
    InvalidSpec,
    #[error("constant term must be {0}")]
    ConstantTerm(&'static str),
    #[error("no finiteness certificate for this shift: {0}")]
    NoCertificate(String),
    #[error("malformed series data: {0}")]
    Malformed(String),
}

/// Finite Laurent polynomial in ħ.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct HLaurent(BTreeMap<i32, Q>);

impl HLaurent {
    pub fn zero() -> HLaurent {
        HLaurent(BTreeMap::new())
    }

    pub fn mono(e: i32, c: Q) -> HLaurent {
        let mut h = HLaurent::zero();
        h.add_term(e, c);
        h
    }

    pub fn constant(c: Q) -> HLaurent {
        HLaurent::mono(0, c)
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_one(&self) -> bool {
        self.0.len() == 1 && self.0.get(&0).is_some_and(|c| c.is_one())
    }

    pub fn get(&self, e: i32) -> Q {
        self.0.get(&e).cloned().unwrap_or_else(Q::zero)
    }

    pub fn iter(&self) -> impl Iterator<Item = (i32, &Q)> {
        self.0.iter().map(|(e, c)| (*e, c))
    }

    pub fn min_exp(&self) -> Option<i32> {
        self.0.keys().next().copied()
    }

    pub fn max_exp(&self) -> Option<i32> {
        self.0.keys().next_back().copied()
    }

    pub fn add_term(&mut self, e: i32, c: Q) {
        if c.is_zero() {
            return;
        }
        let slot = self.0.entry(e).or_insert_with(Q::zero);
        *slot += c;
        if slot.is_zero() {
            self.0.remove(&e);
        }
    }

    pub fn add_assign(&mut self, other: &HLaurent) {
        for (e, c) in other.iter() {
            self.add_term(e, c.clone());
        }
    }

    pub fn add(&self, other: &HLaurent) -> HLaurent {
        let mut r = self.clone();
        r.add_assign(other);
        r
    }

    pub fn neg(&self) -> HLaurent {
        self.scale(&-one())
    }

    pub fn sub(&self, other: &HLaurent) -> HLaurent {
        self.add(&other.neg())
    }

    pub fn scale(&self, c: &Q) -> HLaurent {
        if c.is_zero() {
            return HLaurent::zero();
        }
        HLaurent(self.0.iter().map(|(e, x)| (*e, x * c)).collect())
    }

    pub fn shift(&self, k: i32) -> HLaurent {
        HLaurent(self.0.iter().map(|(e, x)| (e + k, x.clone())).collect())
    }

    pub fn mul(&self, other: &HLaurent) -> HLaurent {
        let mut r = HLaurent::zero();
        for (e1, c1) in self.iter() {
            for (e2, c2) in other.iter() {
                r.add_term(e1 + e2, c1 * c2);
            }
        }
        r
    }

    pub fn window(&self, hmin: i32, hmax: i32) -> HLaurent {
        HLaurent(self.0.range(hmin..=hmax).map(|(e, c)| (*e, c.clone())).collect())
    }

    pub fn retain(&mut self, mut keep: impl FnMut(i32) -> bool) {
        self.0.retain(|e, _| keep(*e));
    }

    pub fn to_json(&self) -> BTreeMap<i32, String> {
        self.0.iter().map(|(e, c)| (*e, rational::to_str(c))).collect()
    }

    pub fn from_json(m: &BTreeMap<i32, String>) -> Option<HLaurent> {
        let mut h = HLaurent::zero();
        for (e, s) in m {
            h.add_term(*e, rational::parse(s)?);
        }
        Some(h)
    }
}

impl fmt::Display for HLaurent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let parts: Vec<String> = self
            .iter()
            .map(|(e, c)| match e {
                0 => rational::to_str(c),
                _ => format!("{}*h^{}", rational::to_str(c), e),
            })
            .collect();
        write!(f, "{}", parts.join(" + "))
    }
}

/// ∏ q_k as a sorted multiset of indices.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct QMonomial(Vec<u16>);

impl QMonomial {
    pub fn one() -> QMonomial {
        QMonomial(Vec::new())
    }

    pub fn new(mut idx: Vec<u16>) -> QMonomial {
        assert!(idx.iter().all(|&k| k >= 1), "variable indices start at 1");
        idx.sort_unstable();
        QMonomial(idx)
    }

    pub fn indices(&self) -> &[u16] {
        &self.0
    }

    pub fn qdeg(&self) -> u32 {
        self.0.iter().map(|&k| k as u32).sum()
    }

    pub fn count(&self) -> usize {
        self.0.len()
    }

    pub fn mult(&self, k: u16) -> usize {
        self.0.iter().filter(|&&x| x == k).count()
    }

    pub fn is_odd(&self) -> bool {
        self.0.iter().all(|k| k % 2 == 1)
    }

    pub fn max_index(&self) -> Option<u16> {
        self.0.last().copied()
    }

    pub fn mul(&self, other: &QMonomial) -> QMonomial {
        let mut v = Vec::with_capacity(self.0.len() + other.0.len());
        let (mut i, mut j) = (0, 0);
        while i < self.0.len() || j < other.0.len() {
            if j == other.0.len() || (i < self.0.len() && self.0[i] <= other.0[j]) {
                v.push(self.0[i]);
                i += 1;
            } else {
                v.push(other.0[j]);
                j += 1;
            }
        }
        QMonomial(v)
    }

    /// Remove a sorted sub-multiset; `None` if it is not contained.
    pub fn remove(&self, sub: &[u16]) -> Option<QMonomial> {
        let mut out = Vec::with_capacity(self.0.len());
        let mut j = 0;
        for &k in &self.0 {
            if j < sub.len() && sub[j] == k {
                j += 1;
            } else {
                if j < sub.len() && sub[j] < k {
                    return None;
                }
                out.push(k);
            }
        }
        (j == sub.len()).then_some(QMonomial(out))
    }

    /// Coefficient of ∏∂ over `sub` acting on this monomial: ∏ falling(mult, mult_sub).
    pub fn derivative_factor(&self, sub: &[u16]) -> Q {
        let mut c = one();
        let mut i = 0;
        while i < sub.len() {
            let k = sub[i];
            let mut r = 0;
            while i < sub.len() && sub[i] == k {
                r += 1;
                i += 1;
            }
            c *= rational::falling(self.mult(k), r);
        }
        c
    }
}

impl fmt::Display for QMonomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "1");
        }
        let parts: Vec<String> = self.0.iter().map(|k| format!("q{k}")).collect();
        write!(f, "{}", parts.join("*"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TruncationSpec {
    #[serde(rename = "Dq")]
    pub dq: u32,
    #[serde(rename = "Hmin")]
    pub hmin: i32,
    #[serde(rename = "Hmax")]
    pub hmax: i32,
}

impl TruncationSpec {
    pub fn new(dq: u32, hmin: i32, hmax: i32) -> Result<TruncationSpec, FockError> {
        if hmin > hmax {
            return Err(FockError::InvalidSpec);
        }
        Ok(TruncationSpec { dq, hmin, hmax })
    }

    pub fn intersect(&self, other: &TruncationSpec) -> TruncationSpec {
        TruncationSpec {
            dq: self.dq.min(other.dq),
            hmin: self.hmin.max(other.hmin),
            hmax: self.hmax.min(other.hmax),
        }
    }

    pub fn admits(&self, mono: &QMonomial, e: i32) -> bool {
        mono.qdeg() <= self.dq && e >= self.hmin && e <= self.hmax
    }
}

/// The two tau-function gradings: the ħ-exponent of a monomial coefficient is
/// a·(weight) + b·(number of factors).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Grading {
    /// e = qdeg/3 − n
    Kw,
    /// e = 3·qdeg − n
    Bgw,
}

impl Grading {
    fn law(self) -> (Q, Q) {
        match self {
            Grading::Kw => (q(1, 3), qi(-1)),
            Grading::Bgw => (qi(3), qi(-1)),
        }
    }

    pub fn exponent(self, mono: &QMonomial) -> Q {
        let (a, b) = self.law();
        a * qi(mono.qdeg() as i64) + b * qi(mono.count() as i64)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FockSeries {
    terms: BTreeMap<QMonomial, HLaurent>,
    trunc: TruncationSpec,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FockTermJson {
    pub mono: Vec<u16>,
    pub coeff: BTreeMap<i32, String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FockJson {
    pub trunc: TruncationSpec,
    pub terms: Vec<FockTermJson>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct GradingViolation {
    pub mono: Vec<u16>,
    pub exponents: Vec<i32>,
    pub expected: String,
}

impl FockSeries {
    pub fn zero(trunc: TruncationSpec) -> FockSeries {
        FockSeries { terms: BTreeMap::new(), trunc }
    }

    pub fn one(trunc: TruncationSpec) -> FockSeries {
        let mut s = FockSeries::zero(trunc);
        s.add_term(&QMonomial::one(), 0, one());
        s
    }

    pub fn from_terms(trunc: TruncationSpec, terms: impl IntoIterator<Item = (QMonomial, HLaurent)>) -> FockSeries {
        let mut s = FockSeries::zero(trunc);
        for (m, h) in terms {
            s.add_coeff(&m, &h);
        }
        s
    }

    pub fn trunc(&self) -> TruncationSpec {
        self.trunc
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&QMonomial, &HLaurent)> {
        self.terms.iter()
    }

    pub fn get(&self, mono: &QMonomial) -> HLaurent {
        self.terms.get(mono).cloned().unwrap_or_default()
    }

    pub fn coeff(&self, idx: &[u16], e: i32) -> Q {
        self.get(&QMonomial::new(idx.to_vec())).get(e)
    }

    /// Add c·ħ^e·mono, dropping it silently if it lies outside the truncation.
    pub fn add_term(&mut self, mono: &QMonomial, e: i32, c: Q) {
        if c.is_zero() || !self.trunc.admits(mono, e) {
            return;
        }
        let slot = self.terms.entry(mono.clone()).or_default();
        slot.add_term(e, c);
        if slot.is_zero() {
            self.terms.remove(mono);
        }
    }

    pub fn add_coeff(&mut self, mono: &QMonomial, h: &HLaurent) {
        for (e, c) in h.iter() {
            self.add_term(mono, e, c.clone());
        }
    }

    pub fn add(&self, other: &FockSeries) -> Result<FockSeries, FockError> {
        if self.trunc != other.trunc {
            return Err(FockError::SpecMismatch);
        }
        let mut r = self.clone();
        for (m, h) in other.iter() {
            r.add_coeff(m, h);
        }
        Ok(r)
    }

    pub fn sub(&self, other: &FockSeries) -> Result<FockSeries, FockError> {
        self.add(&other.scale(&HLaurent::constant(-one())))
    }

    pub fn scale(&self, c: &HLaurent) -> FockSeries {
        let mut r = FockSeries::zero(self.trunc);
        for (m, h) in self.iter() {
            r.add_coeff(m, &h.mul(c));
        }
        r
    }

    /// Product of the stored data, truncated to the intersection of the two specs.
    pub fn mul(&self, other: &FockSeries) -> FockSeries {
        let trunc = self.trunc.intersect(&other.trunc);
        let mut r = FockSeries::zero(trunc);
        for (m1, h1) in self.iter() {
            for (m2, h2) in other.iter() {
                if m1.qdeg() + m2.qdeg() > trunc.dq {
                    continue;
                }
                r.add_coeff(&m1.mul(m2), &h1.mul(h2));
            }
        }
        r
    }

    /// Re-truncate to a spec contained in the current one.
    pub fn truncate(&self, trunc: TruncationSpec) -> FockSeries {
        let t = self.trunc.intersect(&trunc);
        FockSeries::from_terms(t, self.terms.clone())
    }

    fn widened(&self) -> FockSeries {
        // Intermediate powers may leave the ħ-window and come back; keep every
        // exponent until the final truncation.
        let wide = TruncationSpec { dq: self.trunc.dq, hmin: i32::MIN / 4, hmax: i32::MAX / 4 };
        FockSeries::from_terms(wide, self.terms.clone())
    }

    pub fn exp(&self) -> Result<FockSeries, FockError> {
        if !self.get(&QMonomial::one()).is_zero() {
            return Err(FockError::ConstantTerm("0"));
        }
        let f = self.widened();
        let mut acc = FockSeries::one(f.trunc);
        let mut pw = acc.clone();
        for n in 1..=self.trunc.dq as i64 {
            pw = pw.mul(&f).scale(&HLaurent::constant(qi(n).recip()));
            if pw.is_empty() {
                break;
            }
            acc = acc.add(&pw)?;
        }
        Ok(acc.truncate(self.trunc))
    }

    pub fn log(&self) -> Result<FockSeries, FockError> {
        if !self.get(&QMonomial::one()).is_one() {
            return Err(FockError::ConstantTerm("1"));
        }
        let wide = self.widened();
        let t = wide.sub(&FockSeries::one(wide.trunc))?;
        let mut acc = FockSeries::zero(wide.trunc);
        let mut pw = FockSeries::one(wide.trunc);
        for n in 1..=self.trunc.dq as i64 {
            pw = pw.mul(&t);
            if pw.is_empty() {
                break;
            }
            let sign = if n % 2 == 1 { one() } else { -one() };
            acc = acc.add(&pw.scale(&HLaurent::constant(sign / qi(n))))?;
        }
        Ok(acc.truncate(self.trunc))
    }

    /// Exact substitution q_k ↦ q_k + c on the stored polynomial. This says
    /// nothing about the untruncated series; see [`FockSeries::shift_variable`].
    pub fn substitute(&self, k: u16, c: &HLaurent) -> FockSeries {
        let mut r = FockSeries::zero(self.trunc);
        for (m, h) in self.iter() {
            let mk = m.mult(k);
            let rest = m.remove(&vec![k; mk]).expect("multiplicity counted");
            let mut cpow = HLaurent::constant(one());
            for j in 0..=mk {
                let mono = rest.mul(&QMonomial(vec![k; mk - j]));
                let coef = cpow.mul(h).scale(&rational::binom(&qi(mk as i64), j));
                r.add_coeff(&mono, &coef);
                cpow = cpow.mul(c);
            }
        }
        r
    }

    /// q_k ↦ q_k + c on a graded series. Every output coefficient is a sum over
    /// q_k-powers of the input; with the grading law those contributions move in
    /// ħ at a fixed nonzero slope, so only finitely many land in the window. The
    /// result is narrowed to the weights for which every contribution is present.
    pub fn shift_variable(&self, k: u16, c: &HLaurent, grading: Grading) -> Result<FockSeries, FockError> {
        let Some(ec) = c.min_exp() else {
            return Ok(self.clone());
        };
        if c.max_exp() != Some(ec) {
            return Err(FockError::NoCertificate("shift must be a single ħ-power".into()));
        }
        let (a, b) = grading.law();
        let slope = a.clone() * qi(k as i64) + b.clone() + qi(ec as i64);
        if slope.is_zero() {
            return Err(FockError::NoCertificate(format!(
                "each q{k}-power contributes at the same ħ-exponent, so coefficients are infinite sums"
            )));
        }
        let t = self.trunc;
        let mut dq_ok: Option<u32> = None;
        for w in 0..=t.dq {
            // extreme grading exponents at weight w: n = 1 or n = w factors
            let ends = if w == 0 { vec![Q::zero()] } else { vec![qi(1), qi(w as i64)] };
            let es: Vec<Q> = ends.iter().map(|n| a.clone() * qi(w as i64) + b.clone() * n.clone()).collect();
            let j_star = qi(((t.dq - w) / k as u32 + 1) as i64);
            let complete = if slope > Q::zero() {
                let lo = es.iter().min().unwrap().clone();
                lo + slope.clone() * j_star > qi(t.hmax as i64)
            } else {
                let hi = es.iter().max().unwrap().clone();
                hi + slope.clone() * j_star < qi(t.hmin as i64)
            };
            if complete {
                dq_ok = Some(w);
            } else {
                break;
            }
        }
        let Some(dq) = dq_ok else {
            return Err(FockError::NoCertificate("window too wide for the stored weight".into()));
        };
        let narrowed = TruncationSpec { dq, ..t };
        Ok(self.substitute(k, c).truncate(narrowed))
    }

    /// Check the ħ-exponent law of log Z monomial by monomial.
    pub fn grading_check(&self, which: Grading) -> Result<Vec<GradingViolation>, FockError> {
        let f = self.log()?;
        let mut out = Vec::new();
        for (m, h) in f.iter() {
            let exps: Vec<i32> = h.iter().map(|(e, _)| e).collect();
            let expected = which.exponent(m);
            let ok = m.is_odd()
                && expected.is_integer()
                && exps.len() == 1
                && qi(exps[0] as i64) == expected
                && (which == Grading::Bgw || exps[0] % 2 == 0);
            if !ok {
                out.push(GradingViolation {
                    mono: m.indices().to_vec(),
                    exponents: exps,
                    expected: rational::to_str(&expected),
                });
            }
        }
        Ok(out)
    }

    pub fn to_json(&self) -> FockJson {
        FockJson {
            trunc: self.trunc,
            terms: self
                .iter()
                .map(|(m, h)| FockTermJson { mono: m.indices().to_vec(), coeff: h.to_json() })
                .collect(),
        }
    }

    pub fn from_json(j: &FockJson) -> Result<FockSeries, FockError> {
        let mut s = FockSeries::zero(j.trunc);
        for t in &j.terms {
            if t.mono.iter().any(|&k| k == 0) {
                return Err(FockError::Malformed("index 0".into()));
            }
            let h = HLaurent::from_json(&t.coeff).ok_or_else(|| FockError::Malformed("coefficient".into()))?;
            s.add_coeff(&QMonomial::new(t.mono.clone()), &h);
        }
        Ok(s)
    }

    /// Monomials that contain an even-index variable.
    pub fn even_support(&self) -> Vec<QMonomial> {
        self.terms.keys().filter(|m| !m.is_odd()).cloned().collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn spec(dq: u32) -> TruncationSpec {
        TruncationSpec::new(dq, -20, 20).unwrap()
    }

    fn mono(idx: &[u16]) -> QMonomial {
        QMonomial::new(idx.to_vec())
    }

    #[test]
    fn monomial_ops() {
        let a = mono(&[3, 1, 1]);
        assert_eq!(a.indices(), &[1, 1, 3]);
        assert_eq!(a.qdeg(), 5);
        assert_eq!(a.remove(&[1, 3]), Some(mono(&[1])));
        assert_eq!(a.remove(&[2]), None);
        assert_eq!(a.derivative_factor(&[1, 1]), qi(2));
        assert_eq!(a.mul(&mono(&[2])), mono(&[1, 1, 2, 3]));
    }

    #[test]
    fn ring_basics() {
        let t = spec(6);
        let a = FockSeries::from_terms(t, [(mono(&[1]), HLaurent::mono(2, q(1, 16)))]);
        assert_eq!(a.add(&FockSeries::zero(t)).unwrap(), a);
        let sq = a.mul(&a);
        assert_eq!(sq.coeff(&[1, 1], 4), q(1, 256));
        assert!(a.add(&FockSeries::zero(spec(5))).is_err());
        // exp against direct factorial sums
        let e = a.exp().unwrap();
        for j in 0..=6usize {
            let expect = rational::pow_int(&q(1, 16), j as i64) / rational::factorial(j);
            assert_eq!(e.coeff(&vec![1; j], 2 * j as i32), expect);
        }
        assert!(e.exp().is_err());
        assert_eq!(FockSeries::zero(t).exp().unwrap(), FockSeries::one(t));
    }

    #[test]
    fn truncation_idempotent() {
        let t = spec(8);
        let a = FockSeries::from_terms(
            t,
            [(mono(&[1]), HLaurent::mono(-2, one())), (mono(&[3]), HLaurent::mono(4, q(1, 24)))],
        );
        let e = a.exp().unwrap();
        let small = TruncationSpec::new(5, -20, 20).unwrap();
        assert_eq!(e.truncate(small).truncate(small), e.truncate(small));
        assert_eq!(a.truncate(small).exp().unwrap(), e.truncate(small));
    }

    #[test]
    fn substitution_is_taylor() {
        let t = spec(6);
        let z = FockSeries::from_terms(
            t,
            [(mono(&[1, 1, 3]), HLaurent::mono(0, qi(2))), (mono(&[3, 3]), HLaurent::mono(-2, one()))],
        );
        let s = z.substitute(3, &HLaurent::mono(1, q(1, 2)));
        assert_eq!(s.coeff(&[1, 1], 1), qi(1));
        assert_eq!(s.coeff(&[3], -1), qi(1));
        assert_eq!(s.coeff(&[], 0), q(1, 4));
        assert_eq!(z.substitute(3, &HLaurent::zero()), z);
    }

    #[test]
    fn grading_laws() {
        let kw = Grading::Kw;
        assert_eq!(kw.exponent(&mono(&[3])), qi(0));
        assert_eq!(kw.exponent(&mono(&[1, 1, 1])), qi(-2));
        assert_eq!(Grading::Bgw.exponent(&mono(&[1])), qi(2));
    }

    fn small_series() -> impl Strategy<Value = FockSeries> {
        prop::collection::vec((prop::collection::vec(1u16..=4, 1..3), -2i32..=2, -5i64..=5), 0..5).prop_map(|ts| {
            let t = TruncationSpec::new(8, -40, 40).unwrap();
            let mut s = FockSeries::zero(t);
            for (idx, e, c) in ts {
                s.add_term(&QMonomial::new(idx), e, q(c, 3));
            }
            s
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn ring_axioms(a in small_series(), b in small_series(), c in small_series()) {
            prop_assert_eq!(a.mul(&b).mul(&c), a.mul(&b.mul(&c)));
            prop_assert_eq!(a.mul(&b.add(&c).unwrap()), a.mul(&b).add(&a.mul(&c)).unwrap());
            prop_assert_eq!(a.mul(&b), b.mul(&a));
        }

        #[test]
        fn log_exp_round_trip(a in small_series()) {
            let e = a.exp().unwrap();
            prop_assert_eq!(e.log().unwrap(), a);
        }

        #[test]
        fn json_round_trip(a in small_series()) {
            let j = serde_json::to_string(&a.to_json()).unwrap();
            let back: FockJson = serde_json::from_str(&j).unwrap();
            prop_assert_eq!(FockSeries::from_json(&back).unwrap(), a);
        }
    }

    fn kw(dq: u32) -> FockSeries {
        let (lo, hi) = crate::taugen::kw_exponent_range(dq);
        crate::taugen::gen_kw(TruncationSpec::new(dq, lo, hi).unwrap()).unwrap()
    }

    #[test]
    fn shift_by_zero_is_identity() {
        let z = kw(9);
        assert_eq!(z.shift_variable(3, &HLaurent::zero(), Grading::Kw).unwrap(), z);
    }

    #[test]
    fn positive_slope_shift_matches_the_exponential() {
        // q₃ ↦ q₃ + ½ħ²: slope 2, so high q₃-powers leave the top of the window
        let z = kw(12);
        let c = HLaurent::mono(2, q(1, 2));
        let y = z.shift_variable(3, &c, Grading::Kw).unwrap();
        assert!(y.trunc().dq > 0 && y.trunc().dq <= 12);
        let op = crate::operators::OpPoly::term(&[], &[3], 2, q(1, 2));
        assert_eq!(op.exp_apply(&z).unwrap().truncate(y.trunc()), y);
    }

    #[test]
    fn zero_slope_shifts_are_refused() {
        let z = kw(9);
        assert!(matches!(z.shift_variable(3, &HLaurent::constant(q(5, 8)), Grading::Kw), Err(FockError::NoCertificate(_))));
        let zb = crate::taugen::gen_bgw(TruncationSpec::new(5, 0, 10).unwrap()).unwrap();
        assert!(zb.shift_variable(1, &HLaurent::mono(-2, qi(-1)), Grading::Bgw).is_err());
        assert!(z.shift_variable(1, &HLaurent::mono(-2, qi(1)), Grading::Kw).is_ok());
        assert!(z.shift_variable(3, &HLaurent::mono(0, q(1, 2)).add(&HLaurent::mono(2, qi(1))), Grading::Kw).is_err());
    }
}
