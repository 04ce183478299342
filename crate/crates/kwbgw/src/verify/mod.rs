//! Certificates: each runs a family of exact checks and returns a JSON report.
//! A check either holds with zero defects or records the first few mismatches.

use std::collections::BTreeMap;
use std::fmt::Display;

use serde::Serialize;

use crate::fock::{FockSeries, HLaurent};
use crate::operators::OpPoly;

pub mod algebra;
pub mod constraints;
pub mod corollary;
pub mod dilaton;
pub mod identity;

/// Defects kept per check; the count is always exact.
const KEEP: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub compared: usize,
    pub defects: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Defect {
    pub stage: String,
    pub item: String,
    pub expected: String,
    pub actual: String,
}

/// A known mismatch between a printed form and the verified one, with the
/// evidence that the printed form fails.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CatalogEntry {
    pub item: String,
    pub printed: String,
    pub verified: String,
    pub printed_fails: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Report {
    pub certificate: String,
    pub params: BTreeMap<String, String>,
    pub status: Status,
    pub checks: Vec<Check>,
    pub defects: Vec<Defect>,
    pub catalog: Vec<CatalogEntry>,
}

impl Report {
    pub fn new(name: &str) -> Report {
        Report {
            certificate: name.to_string(),
            params: BTreeMap::new(),
            status: Status::Pass,
            checks: Vec::new(),
            defects: Vec::new(),
            catalog: Vec::new(),
        }
    }

    pub fn param(&mut self, k: &str, v: impl Display) {
        self.params.insert(k.to_string(), v.to_string());
    }

    pub fn passed(&self) -> bool {
        self.status == Status::Pass
    }

    pub fn check(&self, name: &str) -> &Check {
        self.checks.iter().find(|c| c.name == name).unwrap_or_else(|| panic!("no check {name}"))
    }

    /// Record a check from (item, expected, actual) triples that disagree.
    pub fn record(&mut self, name: &str, compared: usize, bad: Vec<(String, String, String)>) -> bool {
        let passed = bad.is_empty();
        self.checks.push(Check { name: name.to_string(), passed, compared, defects: bad.len() });
        for (item, expected, actual) in bad.into_iter().take(KEEP) {
            self.defects.push(Defect { stage: name.to_string(), item, expected, actual });
        }
        if !passed {
            self.status = Status::Fail;
        }
        passed
    }

    pub fn record_bool(&mut self, name: &str, ok: bool, expected: impl Display, actual: impl Display) -> bool {
        let bad = if ok { vec![] } else { vec![(name.to_string(), expected.to_string(), actual.to_string())] };
        self.record(name, 1, bad)
    }

    pub fn record_ops(&mut self, name: &str, expected: &OpPoly, actual: &OpPoly) -> bool {
        let (n, bad) = diff_ops(expected, actual);
        self.record(name, n, bad)
    }

    /// A failure to compute at all is a defect of the stage that failed.
    pub fn record_error(&mut self, name: &str, err: impl Display) {
        self.record(name, 0, vec![("error".into(), "computation".into(), err.to_string())]);
    }

    pub fn catalog(&mut self, item: &str, printed: &str, verified: &str, printed_fails: bool) {
        self.catalog.push(CatalogEntry {
            item: item.into(),
            printed: printed.into(),
            verified: verified.into(),
            printed_fails,
        });
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

fn h_str(h: &HLaurent) -> String {
    if h.is_zero() {
        "0".into()
    } else {
        h.to_string()
    }
}

/// Term-by-term comparison of two operators.
pub fn diff_ops(expected: &OpPoly, actual: &OpPoly) -> (usize, Vec<(String, String, String)>) {
    let mut keys: Vec<_> = expected.iter().map(|(k, _)| k.clone()).collect();
    keys.extend(actual.iter().map(|(k, _)| k.clone()));
    keys.sort();
    keys.dedup();
    let mut bad = Vec::new();
    for k in &keys {
        let (x, y) = (expected.get(&k.cre, &k.ann), actual.get(&k.cre, &k.ann));
        if x != y {
            bad.push((k.to_string(), h_str(&x), h_str(&y)));
        }
    }
    (keys.len(), bad)
}

/// Coefficient-by-coefficient comparison of two series on their common support.
pub fn diff_series(expected: &FockSeries, actual: &FockSeries) -> (usize, Vec<(String, String, String)>) {
    let mut monos: Vec<_> = expected.iter().map(|(m, _)| m.clone()).collect();
    monos.extend(actual.iter().map(|(m, _)| m.clone()));
    monos.sort();
    monos.dedup();
    let mut bad = Vec::new();
    for m in &monos {
        let (x, y) = (expected.get(m), actual.get(m));
        if x != y {
            bad.push((mono_str(m.indices()), h_str(&x), h_str(&y)));
        }
    }
    (monos.len(), bad)
}

/// A series that should vanish: every surviving coefficient is a defect.
pub fn nonzero_terms(s: &FockSeries) -> Vec<(String, String, String)> {
    s.iter().map(|(m, h)| (mono_str(m.indices()), "0".into(), h_str(h))).collect()
}

pub fn mono_str(idx: &[u16]) -> String {
    if idx.is_empty() {
        "1".into()
    } else {
        idx.iter().map(|k| format!("q{k}")).collect::<Vec<_>>().join("*")
    }
}

pub const NAMES: [&str; 10] = [
    "commutators",
    "kw-annihilator",
    "bgw-annihilator",
    "virasoro",
    "z1",
    "z0",
    "theorem1",
    "qij",
    "change",
    "dilaton",
];

/// Parameters shared by the certificates; absent values take per-certificate defaults.
#[derive(Clone, Debug, Default)]
pub struct Params {
    pub dq: Option<u32>,
    pub hmin: Option<i32>,
    pub hmax: Option<i32>,
    pub order: Option<u32>,
    pub samples: Option<u32>,
    pub seed: Option<u64>,
    pub range: Option<u32>,
    pub mutate: Option<String>,
}

pub fn run(name: &str, p: &Params) -> Option<Report> {
    Some(match name {
        "commutators" => algebra::commutators(p),
        "kw-annihilator" => constraints::kw_annihilator(p),
        "bgw-annihilator" => constraints::bgw_annihilator(p),
        "virasoro" => constraints::virasoro(p),
        "z1" => identity::lemma_z1(p),
        "z0" => identity::lemma_z0(p),
        "theorem1" => identity::theorem1(p),
        "qij" => corollary::qij(p),
        "change" => corollary::change(p),
        "dilaton" => dilaton::dilaton(p),
        _ => return None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{QMonomial, TruncationSpec};
    use crate::rational::qi;

    #[test]
    fn defects_are_counted_in_full_but_kept_short() {
        let mut r = Report::new("x");
        let bad: Vec<_> = (0..20).map(|i| (i.to_string(), "0".to_string(), "1".to_string())).collect();
        assert!(!r.record("many", 20, bad));
        assert_eq!(r.check("many").defects, 20);
        assert_eq!(r.defects.len(), KEEP);
        assert_eq!(r.status, Status::Fail);
        assert!(r.record("none", 3, vec![]));
        assert!(!r.passed(), "one failing check fails the report");
    }

    #[test]
    fn series_diff_sees_every_side() {
        let t = TruncationSpec::new(4, -2, 2).unwrap();
        let a = FockSeries::from_terms(t, [(QMonomial::new(vec![1]), HLaurent::constant(qi(1)))]);
        let b = FockSeries::from_terms(t, [(QMonomial::new(vec![3]), HLaurent::mono(2, qi(1)))]);
        let (n, bad) = diff_series(&a, &b);
        assert_eq!(n, 2);
        assert_eq!(bad.len(), 2);
        assert_eq!(diff_series(&a, &a).1.len(), 0);
        assert_eq!(nonzero_terms(&b)[0].0, "q3");
    }

    #[test]
    fn every_name_dispatches() {
        for name in NAMES {
            assert!(matches!(name, "commutators" | "kw-annihilator" | "bgw-annihilator" | "virasoro" | "z1" | "z0" | "theorem1" | "qij" | "change" | "dilaton"));
        }
        assert!(run("nothing", &Params::default()).is_none());
    }

    #[test]
    fn reports_serialize_stably() {
        let r = run("bgw-annihilator", &Params { dq: Some(5), hmax: Some(8), ..Params::default() }).unwrap();
        assert!(r.passed());
        assert_eq!(r.to_json(), run("bgw-annihilator", &Params { dq: Some(5), hmax: Some(8), ..Params::default() }).unwrap().to_json());
        assert!(r.to_json().contains("\"status\": \"pass\""));
    }
}
