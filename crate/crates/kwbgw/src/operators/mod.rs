//! Normal-ordered differential operators on Fock series.
//!
//! A term is coeff(ħ)·∏q_c·∏∂_a with every multiplication left of every
//! derivative. Products are normal-ordered by Wick contraction.

pub mod families;
pub mod script;
pub mod walgebra;

use std::collections::BTreeMap;
use std::fmt;

use num_traits::Zero;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fock::{FockSeries, HLaurent, QMonomial, TruncationSpec};
use crate::rational::{self, one, qi, Q};

#[derive(Clone, Debug, Error, PartialEq)]
pub enum OpError {
    #[error("no termination certificate: term {0} neither raises the weight nor the ħ-exponent monotonically")]
    NoCertificate(String),
    #[error("ad-series did not terminate within {0} steps")]
    NonTerminating(usize),
    #[error("bracket leaves the span of the algebra: {0}")]
    OutsideSpan(String),
    #[error("{0}")]
    Family(String),
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct OpKey {
    pub cre: Vec<u16>,
    pub ann: Vec<u16>,
}

impl OpKey {
    pub fn new(mut cre: Vec<u16>, mut ann: Vec<u16>) -> OpKey {
        cre.sort_unstable();
        ann.sort_unstable();
        OpKey { cre, ann }
    }

    pub fn cre_weight(&self) -> i64 {
        self.cre.iter().map(|&k| k as i64).sum()
    }

    pub fn ann_weight(&self) -> i64 {
        self.ann.iter().map(|&k| k as i64).sum()
    }

    pub fn has_even_ann(&self) -> bool {
        self.ann.iter().any(|k| k % 2 == 0)
    }
}

impl fmt::Display for OpKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts: Vec<String> = self.cre.iter().map(|k| format!("q{k}")).collect();
        parts.extend(self.ann.iter().map(|k| format!("d{k}")));
        if parts.is_empty() {
            write!(f, "1")
        } else {
            write!(f, "{}", parts.join("*"))
        }
    }
}

/// Region of (creator weight, annihilator weight, ħ-exponent) kept by windowed operations.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Region {
    pub cre_max: Option<i64>,
    pub ann_max: Option<i64>,
    pub h_min: Option<i32>,
    pub h_max: Option<i32>,
    pub cre_plus_h_max: Option<i64>,
}

impl Region {
    pub fn all() -> Region {
        Region::default()
    }

    pub fn contains(&self, c: i64, a: i64, e: i32) -> bool {
        self.cre_max.is_none_or(|m| c <= m)
            && self.ann_max.is_none_or(|m| a <= m)
            && self.h_min.is_none_or(|m| e >= m)
            && self.h_max.is_none_or(|m| e <= m)
            && self.cre_plus_h_max.is_none_or(|m| c + e as i64 <= m)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct DegreeShiftProfile {
    pub qdeg_min: i64,
    pub qdeg_max: i64,
    pub h_min: i32,
    pub h_max: i32,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct OpPoly {
    terms: BTreeMap<OpKey, HLaurent>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpTermJson {
    pub cre: Vec<u16>,
    pub ann: Vec<u16>,
    pub coeff: BTreeMap<i32, String>,
}

/// Certificate under which an operator exponential terminates on a truncated series.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum ExpCertificate {
    /// every term raises the weight; ħ is left free until the end
    QdegRaising,
    /// every term raises the ħ-exponent; weight is left free until the end
    HbarRaising,
    /// every term raises one of the two and lowers neither
    Monotone,
    /// every term lowers the weight, so the series is nilpotent on polynomials
    QdegLowering,
}

impl OpPoly {
    pub fn zero() -> OpPoly {
        OpPoly::default()
    }

    pub fn term(cre: &[u16], ann: &[u16], e: i32, c: Q) -> OpPoly {
        let mut p = OpPoly::zero();
        p.add_term(OpKey::new(cre.to_vec(), ann.to_vec()), e, c);
        p
    }

    pub fn scalar(h: HLaurent) -> OpPoly {
        let mut p = OpPoly::zero();
        p.add_coeff(OpKey::new(vec![], vec![]), &h);
        p
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&OpKey, &HLaurent)> {
        self.terms.iter()
    }

    pub fn get(&self, cre: &[u16], ann: &[u16]) -> HLaurent {
        self.terms.get(&OpKey::new(cre.to_vec(), ann.to_vec())).cloned().unwrap_or_default()
    }

    pub fn add_term(&mut self, key: OpKey, e: i32, c: Q) {
        if c.is_zero() {
            return;
        }
        let slot = self.terms.entry(key.clone()).or_default();
        slot.add_term(e, c);
        if slot.is_zero() {
            self.terms.remove(&key);
        }
    }

    pub fn add_coeff(&mut self, key: OpKey, h: &HLaurent) {
        if h.is_zero() {
            return;
        }
        let slot = self.terms.entry(key.clone()).or_default();
        slot.add_assign(h);
        if slot.is_zero() {
            self.terms.remove(&key);
        }
    }

    pub fn add_assign(&mut self, other: &OpPoly) {
        for (k, h) in other.iter() {
            self.add_coeff(k.clone(), h);
        }
    }

    pub fn add(&self, other: &OpPoly) -> OpPoly {
        let mut r = self.clone();
        r.add_assign(other);
        r
    }

    pub fn sub(&self, other: &OpPoly) -> OpPoly {
        self.add(&other.scale_q(&-one()))
    }

    pub fn scale(&self, c: &HLaurent) -> OpPoly {
        let mut r = OpPoly::zero();
        for (k, h) in self.iter() {
            r.add_coeff(k.clone(), &h.mul(c));
        }
        r
    }

    pub fn scale_q(&self, c: &Q) -> OpPoly {
        self.scale(&HLaurent::constant(c.clone()))
    }

    /// Multiply by c·ħ^e.
    pub fn scale_h(&self, e: i32, c: Q) -> OpPoly {
        self.scale(&HLaurent::mono(e, c))
    }

    pub fn retain(&self, keep: impl Fn(&OpKey, i32) -> bool) -> OpPoly {
        let mut r = OpPoly::zero();
        for (k, h) in self.iter() {
            let mut h = h.clone();
            h.retain(|e| keep(k, e));
            r.add_coeff(k.clone(), &h);
        }
        r
    }

    pub fn restrict(&self, region: &Region) -> OpPoly {
        self.retain(|k, e| region.contains(k.cre_weight(), k.ann_weight(), e))
    }

    /// Drop every term with an even-index derivative. Such terms kill any series
    /// supported on odd variables, and they form a left ideal preserved by every
    /// conjugation used here.
    pub fn mod_even_ann(&self) -> OpPoly {
        self.retain(|k, _| !k.has_even_ann())
    }

    pub fn profile(&self) -> Option<DegreeShiftProfile> {
        let mut p: Option<DegreeShiftProfile> = None;
        for (k, h) in self.iter() {
            let d = k.cre_weight() - k.ann_weight();
            let (lo, hi) = (h.min_exp().unwrap(), h.max_exp().unwrap());
            p = Some(match p {
                None => DegreeShiftProfile { qdeg_min: d, qdeg_max: d, h_min: lo, h_max: hi },
                Some(p) => DegreeShiftProfile {
                    qdeg_min: p.qdeg_min.min(d),
                    qdeg_max: p.qdeg_max.max(d),
                    h_min: p.h_min.min(lo),
                    h_max: p.h_max.max(hi),
                },
            });
        }
        p
    }

    /// Normal-ordered product self·other.
    pub fn mul(&self, other: &OpPoly) -> OpPoly {
        let mut out = OpPoly::zero();
        for (k1, h1) in self.iter() {
            for (k2, h2) in other.iter() {
                let h = h1.mul(h2);
                wick(&k1.ann, &k2.cre, false, |c, ann_left, cre_left| {
                    let key = OpKey::new(
                        k1.cre.iter().chain(cre_left.iter()).copied().collect(),
                        ann_left.iter().chain(k2.ann.iter()).copied().collect(),
                    );
                    out.add_coeff(key, &h.scale(&c));
                });
            }
        }
        out
    }

    /// [self, other], built from contractions only; the fully uncontracted
    /// parts of the two products cancel.
    pub fn commutator(&self, other: &OpPoly) -> OpPoly {
        let mut out = OpPoly::zero();
        let other_by_cre = index_by(other, |k| &k.cre);
        let other_by_ann = index_by(other, |k| &k.ann);
        let terms: Vec<(&OpKey, &HLaurent)> = other.iter().collect();
        for (k1, h1) in self.iter() {
            for j in candidates(&k1.ann, &other_by_cre) {
                let (k2, h2) = terms[j];
                let h = h1.mul(h2);
                wick(&k1.ann, &k2.cre, true, |c, ann_left, cre_left| {
                    let key = OpKey::new(
                        k1.cre.iter().chain(cre_left.iter()).copied().collect(),
                        ann_left.iter().chain(k2.ann.iter()).copied().collect(),
                    );
                    out.add_coeff(key, &h.scale(&c));
                });
            }
            for j in candidates(&k1.cre, &other_by_ann) {
                let (k2, h2) = terms[j];
                let h = h1.mul(h2);
                wick(&k2.ann, &k1.cre, true, |c, ann_left, cre_left| {
                    let key = OpKey::new(
                        k2.cre.iter().chain(cre_left.iter()).copied().collect(),
                        ann_left.iter().chain(k1.ann.iter()).copied().collect(),
                    );
                    out.add_coeff(key, &h.scale(&-c));
                });
            }
        }
        out
    }

    /// Action on a Fock series, truncated to the series' spec.
    pub fn apply(&self, z: &FockSeries) -> FockSeries {
        self.apply_into(z, z.trunc())
    }

    pub fn apply_into(&self, z: &FockSeries, trunc: TruncationSpec) -> FockSeries {
        let mut out = FockSeries::zero(trunc);
        for (k, h) in self.iter() {
            let aw = k.ann_weight() as u32;
            let cw = k.cre_weight() as u32;
            let cre = QMonomial::new(k.cre.clone());
            for (m, hz) in z.iter() {
                let w = m.qdeg();
                if w < aw || w - aw + cw > trunc.dq {
                    continue;
                }
                let Some(rest) = m.remove(&k.ann) else { continue };
                let f = m.derivative_factor(&k.ann);
                out.add_coeff(&rest.mul(&cre), &h.mul(hz).scale(&f));
            }
        }
        out
    }

    /// Coefficient of `target` in op·z, computed by pulling back each term.
    pub fn coeff_of_image(&self, z: &FockSeries, target: &QMonomial) -> HLaurent {
        let mut acc = HLaurent::zero();
        for (k, h) in self.iter() {
            let Some(rest) = target.remove(&k.cre) else { continue };
            let src = rest.mul(&QMonomial::new(k.ann.clone()));
            let hz = z.get(&src);
            if hz.is_zero() {
                continue;
            }
            acc.add_assign(&h.mul(&hz).scale(&src.derivative_factor(&k.ann)));
        }
        acc
    }

    pub fn exp_certificate(&self) -> Result<ExpCertificate, OpError> {
        let shifts: Vec<(&OpKey, i64, i32, i32)> = self
            .iter()
            .map(|(k, h)| (k, k.cre_weight() - k.ann_weight(), h.min_exp().unwrap(), h.max_exp().unwrap()))
            .collect();
        if shifts.iter().all(|s| s.1 > 0) {
            return Ok(ExpCertificate::QdegRaising);
        }
        if shifts.iter().all(|s| s.2 > 0) {
            return Ok(ExpCertificate::HbarRaising);
        }
        if shifts.iter().all(|s| s.1 < 0) {
            return Ok(ExpCertificate::QdegLowering);
        }
        match shifts.iter().find(|s| !(s.1 >= 0 && s.2 >= 0 && (s.1 > 0 || s.2 > 0))) {
            None => Ok(ExpCertificate::Monotone),
            Some(s) => Err(OpError::NoCertificate(s.0.to_string())),
        }
    }

    /// exp(self)·z under a termination certificate; exact on z's truncation.
    pub fn exp_apply(&self, z: &FockSeries) -> Result<FockSeries, OpError> {
        let t = z.trunc();
        if self.is_zero() {
            return Ok(z.clone());
        }
        let cert = self.exp_certificate()?;
        let p = self.profile().expect("nonzero operator");
        let work = match cert {
            ExpCertificate::QdegRaising | ExpCertificate::QdegLowering => {
                TruncationSpec { dq: t.dq, hmin: i32::MIN / 4, hmax: i32::MAX / 4 }
            }
            ExpCertificate::HbarRaising => {
                let steps = (t.hmax - t.hmin).max(0) as i64 / p.h_min.max(1) as i64 + 1;
                let extra = (steps * p.qdeg_max.max(0)) as u32;
                TruncationSpec { dq: t.dq + extra, hmin: t.hmin, hmax: t.hmax }
            }
            ExpCertificate::Monotone => t,
        };
        let z0 = FockSeries::from_terms(work, z.iter().map(|(m, h)| (m.clone(), h.clone())));
        let mut acc = z0.clone();
        let mut cur = z0;
        let mut n = 1i64;
        loop {
            cur = self.apply(&cur).scale(&HLaurent::constant(qi(n).recip()));
            if cur.is_empty() {
                break;
            }
            acc = acc.add(&cur).expect("same spec");
            n += 1;
        }
        Ok(acc.truncate(t))
    }

    pub fn to_json(&self) -> Vec<OpTermJson> {
        self.iter()
            .map(|(k, h)| OpTermJson { cre: k.cre.clone(), ann: k.ann.clone(), coeff: h.to_json() })
            .collect()
    }

    /// Largest variable index that appears in any term.
    pub fn max_index(&self) -> u16 {
        self.iter().flat_map(|(k, _)| k.cre.iter().chain(k.ann.iter()).copied()).max().unwrap_or(0)
    }
}

impl fmt::Display for OpPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let parts: Vec<String> = self.iter().map(|(k, h)| format!("({h})*{k}")).collect();
        write!(f, "{}", parts.join(" + "))
    }
}

fn index_by(p: &OpPoly, side: impl Fn(&OpKey) -> &Vec<u16>) -> BTreeMap<u16, Vec<usize>> {
    let mut m: BTreeMap<u16, Vec<usize>> = BTreeMap::new();
    for (j, (k, _)) in p.iter().enumerate() {
        let mut idx = side(k).clone();
        idx.dedup();
        for i in idx {
            m.entry(i).or_default().push(j);
        }
    }
    m
}

fn candidates(indices: &[u16], by: &BTreeMap<u16, Vec<usize>>) -> Vec<usize> {
    let mut out: Vec<usize> = Vec::new();
    let mut idx = indices.to_vec();
    idx.dedup();
    for i in idx {
        if let Some(v) = by.get(&i) {
            out.extend_from_slice(v);
        }
    }
    out.sort_unstable();
    out.dedup();
    out
}

/// Enumerate partial matchings between the annihilators `ann` (left factor) and
/// creators `cre` (right factor) of equal index. For r contractions at an index
/// with a derivatives and c multiplications there are binom(a,r)·c!/(c−r)! matchings.
fn wick(ann: &[u16], cre: &[u16], need_contraction: bool, mut emit: impl FnMut(Q, &[u16], &[u16])) {
    let mut groups: Vec<(u16, usize, usize)> = Vec::new();
    let mut i = 0;
    while i < ann.len() {
        let k = ann[i];
        let mut a = 0;
        while i < ann.len() && ann[i] == k {
            a += 1;
            i += 1;
        }
        let c = cre.iter().filter(|&&x| x == k).count();
        if c > 0 {
            groups.push((k, a, c));
        }
    }
    let mut r = vec![0usize; groups.len()];
    loop {
        let total: usize = r.iter().sum();
        if total > 0 || !need_contraction {
            let mut coef = one();
            let mut ann_left = ann.to_vec();
            let mut cre_left = cre.to_vec();
            for (g, &rg) in groups.iter().zip(r.iter()) {
                if rg == 0 {
                    continue;
                }
                coef *= rational::binom(&qi(g.1 as i64), rg) * rational::falling(g.2, rg);
                for _ in 0..rg {
                    let p = ann_left.iter().position(|&x| x == g.0).unwrap();
                    ann_left.remove(p);
                    let p = cre_left.iter().position(|&x| x == g.0).unwrap();
                    cre_left.remove(p);
                }
            }
            emit(coef, &ann_left, &cre_left);
        }
        // next multi-index
        let mut j = 0;
        loop {
            if j == groups.len() {
                return;
            }
            if r[j] < groups[j].1.min(groups[j].2) {
                r[j] += 1;
                break;
            }
            r[j] = 0;
            j += 1;
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConjMode {
    /// ad_X must reach zero; error after the step cap.
    Exact,
    /// Each ad-step is restricted to the region. Sound only when the region is
    /// closed under the inverse of ad_X's degree flow; callers establish that.
    Windowed(Region),
}

/// e^X Y e^{−X} = Σ ad_Xⁿ(Y)/n!
pub fn conjugate(x: &OpPoly, y: &OpPoly, mode: ConjMode) -> Result<OpPoly, OpError> {
    const CAP: usize = 400;
    let clip = |p: OpPoly| match mode {
        ConjMode::Exact => p,
        ConjMode::Windowed(r) => p.restrict(&r),
    };
    let mut acc = clip(y.clone());
    let mut cur = acc.clone();
    for n in 1..=CAP {
        cur = clip(x.commutator(&cur)).scale_q(&qi(n as i64).recip());
        if cur.is_zero() {
            return Ok(acc);
        }
        acc.add_assign(&cur);
    }
    Err(OpError::NonTerminating(CAP))
}
