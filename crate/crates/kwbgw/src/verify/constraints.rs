//! The generated tau-functions against their annihilators. The cut-and-join
//! operators are not used by the generator, so they are independent checks;
//! the Virasoro family is checked on every monomial, not only the one the
//! recursion solves for.

use crate::fock::{FockSeries, Grading, HLaurent, TruncationSpec};
use crate::operators::families::{lhat, ltilde};
use crate::operators::{OpKey, OpPoly};
use crate::rational::{factorial, q, qi, Q};
use crate::taugen::{self, Pick};

use super::{diff_series, nonzero_terms, Params, Report};

fn kw_series(dq: u32, pick: Pick) -> Result<FockSeries, String> {
    let (lo, hi) = taugen::kw_exponent_range(dq);
    let t = TruncationSpec::new(dq, lo, hi).map_err(|e| e.to_string())?;
    taugen::gen_kw_with(t, pick).map_err(|e| e.to_string())
}

fn bgw_series(dq: u32, hmin: i32, hmax: i32, pick: Pick) -> Result<FockSeries, String> {
    let t = TruncationSpec::new(dq, hmin, hmax).map_err(|e| e.to_string())?;
    taugen::gen_bgw_with(t, pick).map_err(|e| e.to_string())
}

fn vanish(r: &mut Report, name: &str, input: &FockSeries, out: &FockSeries) {
    r.record(name, input.len(), nonzero_terms(out));
}

/// L̂_{2m} − (2m+3)∂_{2m+3} + ⅛δ_{m,0}
pub fn kw_virasoro(m: i64, bound: u16) -> OpPoly {
    let k = (2 * m + 3) as u16;
    let mut op = lhat(2 * m, bound);
    op.add_term(OpKey::new(vec![], vec![k]), 0, -qi(k as i64));
    if m == 0 {
        op.add_term(OpKey::new(vec![], vec![]), 0, q(1, 8));
    }
    op
}

/// L̃_{2m} − 2(2m+1)ħ⁻²∂_{2m+1} + ⅛δ_{m,0}
pub fn bgw_virasoro(m: i64, bound: u16) -> OpPoly {
    let k = (2 * m + 1) as u16;
    let mut op = ltilde(2 * m, bound).expect("even index");
    op.add_term(OpKey::new(vec![], vec![k]), -2, -qi(2 * k as i64));
    if m == 0 {
        op.add_term(OpKey::new(vec![], vec![]), 0, q(1, 8));
    }
    op
}

pub fn kw_annihilator(p: &Params) -> Report {
    let dq = p.dq.unwrap_or(12);
    let mut r = Report::new("kw-annihilator");
    r.param("dq", dq);
    let z = match kw_series(dq, Pick::Largest) {
        Ok(z) => z,
        Err(e) => {
            r.record_error("generation", e);
            return r;
        }
    };
    let bound = dq as u16 + 4;
    vanish(&mut r, "cut-and-join", &z, &taugen::kw_cut_and_join(bound).apply(&z));
    // ∂₁ reads one weight up, so the string equation is exact below dq
    let below = TruncationSpec { dq: dq.saturating_sub(1), ..z.trunc() };
    vanish(&mut r, "string equation", &z, &kw_virasoro(-1, bound).apply_into(&z, below));
    match kw_series(dq, Pick::Smallest) {
        Ok(other) => {
            let (n, bad) = diff_series(&z, &other);
            r.record("independent of the eliminated variable", n, bad);
        }
        Err(e) => r.record_error("independent of the eliminated variable", e),
    }
    let one = z.get(&crate::fock::QMonomial::one());
    r.record_bool("normalization", one.is_one(), "1", &one);
    match z.grading_check(Grading::Kw) {
        Ok(v) => {
            let bad = v.iter().map(|g| (super::mono_str(&g.mono), g.expected.clone(), format!("{:?}", g.exponents))).collect();
            r.record("grading of log Z", z.len(), bad);
        }
        Err(e) => r.record_error("grading of log Z", e),
    }
    // intersection numbers read from log Z
    let log = match z.log() {
        Ok(f) => f,
        Err(e) => {
            r.record_error("intersection numbers", e);
            return r;
        }
    };
    let mut cases: Vec<(Vec<u32>, Q)> = vec![(vec![0, 0, 0], qi(1))];
    for k in 1..=4usize {
        if 3 * k as u32 <= dq {
            cases.push((vec![1; k], factorial(k - 1) * q(1, 24)));
        }
    }
    let mut bad = Vec::new();
    for (d, want) in &cases {
        match taugen::intersection_from_log(&log, d) {
            Ok(got) if &got == want => {}
            Ok(got) => bad.push((format!("<tau{d:?}>"), crate::rational::to_str(want), crate::rational::to_str(&got))),
            Err(e) => bad.push((format!("<tau{d:?}>"), crate::rational::to_str(want), e.to_string())),
        }
    }
    r.record("intersection numbers", cases.len(), bad);
    r
}

pub fn bgw_annihilator(p: &Params) -> Report {
    let dq = p.dq.unwrap_or(8);
    let (hmin, hmax) = (p.hmin.unwrap_or(0), p.hmax.unwrap_or(14));
    let mut r = Report::new("bgw-annihilator");
    r.param("dq", dq);
    r.param("hmin", hmin);
    r.param("hmax", hmax);
    // Ω_B lowers ħ by at most 4, so generating 4 past the window makes the check exact on it
    let z = match bgw_series(dq, hmin.min(0), hmax + 4, Pick::Largest) {
        Ok(z) => z,
        Err(e) => {
            r.record_error("generation", e);
            return r;
        }
    };
    let out = match TruncationSpec::new(dq, hmin, hmax) {
        Ok(t) => t,
        Err(e) => {
            r.record_error("window", e);
            return r;
        }
    };
    let bound = dq as u16 + 4;
    vanish(&mut r, "cut-and-join", &z, &taugen::bgw_cut_and_join(bound).apply_into(&z, out));
    match bgw_series(dq, hmin.min(0), hmax + 4, Pick::Smallest) {
        Ok(other) => {
            let (n, bad) = diff_series(&z, &other);
            r.record("independent of the eliminated variable", n, bad);
        }
        Err(e) => r.record_error("independent of the eliminated variable", e),
    }
    // every retained coefficient is pinned: below the cut each one is ħ² times
    // lower-weight data, so regenerating with a wider window changes nothing inside
    match bgw_series(dq, hmin.min(0), hmax + 10, Pick::Largest) {
        Ok(wide) => {
            let (n, bad) = diff_series(&z.truncate(out), &wide.truncate(out));
            r.record("window does not move retained coefficients", n, bad);
        }
        Err(e) => r.record_error("window does not move retained coefficients", e),
    }
    let one = z.get(&crate::fock::QMonomial::one());
    r.record_bool("normalization", one.is_one(), "1", &one);
    let odd = z.even_support().is_empty();
    r.record_bool("odd variables only", odd, "no even index", if odd { "none" } else { "present" });
    let c1 = z.get(&crate::fock::QMonomial::new(vec![1]));
    let want = HLaurent::mono(2, q(1, 16));
    r.record_bool("q1 coefficient", c1 == want, &want, &c1);
    r
}

pub fn virasoro(p: &Params) -> Report {
    let dq = p.dq.unwrap_or(10);
    let mut r = Report::new("virasoro");
    r.param("dq", dq);
    // ∂ₖ reads k weights up: generate at 2·dq and check every k ≤ dq on weight ≤ dq
    let zk = match kw_series(2 * dq, Pick::Largest) {
        Ok(z) => z,
        Err(e) => {
            r.record_error("KW generation", e);
            return r;
        }
    };
    let bound = (2 * dq) as u16 + 2;
    let out = TruncationSpec { dq, ..zk.trunc() };
    let mut m = -1i64;
    while 2 * m + 3 <= dq as i64 {
        let res = kw_virasoro(m, bound).apply_into(&zk, out);
        vanish(&mut r, &format!("KW L[{}]", 2 * m), &zk, &res);
        m += 1;
    }
    let (hmin, hmax) = (p.hmin.unwrap_or(0), p.hmax.unwrap_or(14));
    r.param("bgw hmin", hmin);
    r.param("bgw hmax", hmax);
    let zb = match bgw_series(2 * dq, hmin.min(0), hmax + 2, Pick::Largest) {
        Ok(z) => z,
        Err(e) => {
            r.record_error("BGW generation", e);
            return r;
        }
    };
    let out = TruncationSpec { dq, hmin, hmax };
    let mut m = 0i64;
    while 2 * m + 1 <= dq as i64 {
        let res = bgw_virasoro(m, bound).apply_into(&zb, out);
        vanish(&mut r, &format!("BGW L[{}]", 2 * m), &zb, &res);
        m += 1;
    }
    r
}
