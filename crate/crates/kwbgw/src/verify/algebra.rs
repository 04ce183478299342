//! Bracket relations of α̂, L̂, M̂ checked two ways: by acting with both
//! orderings on every monomial of bounded weight, and by the normal-ordered
//! commutator. The expected side is the abstract structure-constant table.

use std::collections::BTreeMap;

use crate::fock::{FockSeries, HLaurent, QMonomial, TruncationSpec};
use crate::operators::walgebra::{basis_bracket, realize_basis, walgebra_realize, Basis, WElem};
use crate::operators::{OpPoly, Region};
use crate::rational::{q, qi};

use super::{diff_ops, diff_series, Params, Report};

fn monomials(dmax: u32) -> Vec<QMonomial> {
    fn go(rest: u32, max: u16, cur: &mut Vec<u16>, out: &mut Vec<QMonomial>) {
        out.push(QMonomial::new(cur.clone()));
        for k in 1..=max.min(rest as u16) {
            cur.push(k);
            go(rest - k as u32, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(dmax, dmax as u16, &mut vec![], &mut out);
    out
}

fn basis_list(range: i64) -> Vec<Basis> {
    let mut v = Vec::new();
    for n in -range..=range {
        if n != 0 {
            v.push(Basis::Alpha(n));
        }
    }
    v.extend((-range..=range).map(Basis::L));
    v.extend((-range..=range).map(Basis::M));
    v
}

/// The bracket table as printed, without the ħ-dressing of the realization:
/// [α̂ₘ, α̂ₙ] = m δ and [Lₙ, Mₖ] ∋ (n³−n)/12 α̂_{n+k} with no ħ².
fn printed_bracket(a: Basis, b: Basis) -> Option<WElem> {
    use Basis::*;
    let flip = |w: WElem| w.scale(&HLaurent::constant(qi(-1)));
    Some(match (a, b) {
        (Alpha(m), Alpha(n)) if m + n == 0 => WElem::term(One, HLaurent::constant(qi(m))),
        (L(n), M(k)) => {
            let mut w = WElem::term(M(n + k), HLaurent::constant(qi(2 * n - k)));
            w.add_term(Alpha(n + k), &HLaurent::constant(q(n * n * n - n, 12)));
            w
        }
        (M(k), L(n)) => flip(printed_bracket(L(n), M(k))?),
        _ => return None,
    })
}

pub fn commutators(p: &Params) -> Report {
    let range = p.range.unwrap_or(4) as i64;
    let dmax = p.dq.unwrap_or(10);
    let mut r = Report::new("commutators");
    r.param("range", range);
    r.param("dq", dmax);
    // each operator moves the weight by at most `range`, so two of them stay within dmax + 2·range
    let top = dmax + 2 * range as u32;
    let bound = top as u16;
    let t = TruncationSpec::new(top, -40, 40).expect("valid window");
    let basis = basis_list(range);
    let ops: BTreeMap<Basis, OpPoly> = basis.iter().map(|&b| (b, realize_basis(b, bound))).collect();
    let monos = monomials(dmax);
    let seeds: Vec<FockSeries> =
        monos.iter().map(|m| FockSeries::from_terms(t, [(m.clone(), HLaurent::constant(qi(1)))])).collect();
    let once: BTreeMap<Basis, Vec<FockSeries>> =
        basis.iter().map(|b| (*b, seeds.iter().map(|z| ops[b].apply(z)).collect())).collect();

    let mut action_bad = Vec::new();
    let mut action_n = 0;
    let mut symbolic_bad = Vec::new();
    let mut symbolic_n = 0;
    let mut printed_fail = BTreeMap::<&str, usize>::new();
    let region = Region { cre_max: Some(dmax as i64), ann_max: Some(dmax as i64), ..Region::all() };
    for (i, &a) in basis.iter().enumerate() {
        for &b in &basis[i..] {
            let Ok(expected) = basis_bracket(a, b) else { continue };
            let rhs = walgebra_realize(&expected, bound);
            let printed = printed_bracket(a, b).map(|w| walgebra_realize(&w, bound));
            let mut printed_ok = true;
            for (j, z) in seeds.iter().enumerate() {
                let lhs = ops[&a].apply(&once[&b][j]).sub(&ops[&b].apply(&once[&a][j])).expect("same spec");
                let (n, bad) = diff_series(&rhs.apply(z), &lhs);
                action_n += n;
                for (item, x, y) in bad {
                    action_bad.push((format!("[{a}, {b}] on {}: {item}", super::mono_str(monos[j].indices())), x, y));
                }
                if let Some(pr) = &printed {
                    printed_ok &= pr.apply(z) == lhs;
                }
            }
            if !printed_ok {
                let kind = match (a, b) {
                    (Basis::Alpha(_), Basis::Alpha(_)) => "alpha-alpha",
                    _ => "L-M",
                };
                *printed_fail.entry(kind).or_default() += 1;
            }
            let sym = ops[&a].commutator(&ops[&b]).restrict(&region);
            let (n, bad) = diff_ops(&rhs.restrict(&region), &sym);
            symbolic_n += n;
            symbolic_bad.extend(bad.into_iter().map(|(k, x, y)| (format!("[{a}, {b}]: {k}"), x, y)));
        }
    }
    r.record("brackets by action", action_n, action_bad);
    r.record("brackets by normal ordering", symbolic_n, symbolic_bad);

    // the examples called out for this certificate
    let action = |x: &OpPoly, y: &OpPoly, z: &FockSeries| x.apply(&y.apply(z)).sub(&y.apply(&x.apply(z))).unwrap();
    let probe = &seeds[seeds.len() / 2];
    let l2 = &ops[&Basis::L(2.min(range))];
    let lm2 = &ops[&Basis::L(-(2.min(range)))];
    let central = action(l2, lm2, probe).sub(&ops[&Basis::L(0)].apply(probe).scale(&HLaurent::constant(qi(4)))).unwrap();
    let want = probe.scale(&HLaurent::constant(q(1, 2)));
    r.record_bool("[L2, L-2] central term 1/2", central == want, "1/2", if central == want { "1/2" } else { "other" });

    r.catalog(
        "[a_m, a_n]",
        "m delta_{m+n,0}",
        "m h^-2 delta_{m+n,0} (a_n = h^-2 q_-n for n < 0)",
        printed_fail.get("alpha-alpha").copied().unwrap_or(0) > 0,
    );
    r.catalog(
        "[L_n, M_k] central part",
        "(n^3-n)/12 a_{n+k}",
        "h^2 (n^3-n)/12 a_{n+k}",
        printed_fail.get("L-M").copied().unwrap_or(0) > 0,
    );
    r.param("monomials", monos.len());
    r
}
