//! Factorization of exp(Σ ãₘ L̃_{±2m}) into a change of variables and a
//! Gaussian factor, and the change of variables itself in closed form.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::fock::{FockSeries, HLaurent, QMonomial, TruncationSpec};
use crate::operators::families::{build_a_coeffs, ltilde, xtilde};
use crate::operators::{OpKey, OpPoly};
use crate::rational::{binom, q, qi, to_str, Q};
use crate::series1d::{vfield_exp_apply, Direction, Series1, VFieldCoeffs};
use crate::taugen::odd_partitions;

use super::{diff_series, Params, Report};

type Bad = Vec<(String, String, String)>;

fn random_coeffs(rng: &mut ChaCha8Rng, count: i64) -> VFieldCoeffs {
    let pairs: Vec<(i64, Q)> = (1..=count)
        .map(|m| {
            let mut n = 0;
            while n == 0 {
                n = rng.gen_range(-3i64..=3);
            }
            (m, q(n, rng.gen_range(1i64..=4)))
        })
        .collect();
    VFieldCoeffs::with(2, &pairs)
}

fn coeffs_str(a: &VFieldCoeffs) -> String {
    a.coeffs.iter().map(|(m, c)| format!("a{m}={}", to_str(c))).collect::<Vec<_>>().join(",")
}

/// Σ ãₘ F(2m) over the given sign of the index.
fn combine(a: &VFieldCoeffs, sign: i64, w: u32, f: impl Fn(i64, u16) -> OpPoly) -> OpPoly {
    let mut op = OpPoly::zero();
    for (m, c) in &a.coeffs {
        if 2 * m <= w as i64 {
            op.add_assign(&f(sign * 2 * m, w as u16).scale_q(c));
        }
    }
    op
}

/// Both directions of the factorization for one ã, on odd monomials of weight ≤ w.
fn qij_case(a: &VFieldCoeffs, w: u32) -> Result<(usize, Bad), String> {
    let err = |e: &dyn std::fmt::Display| e.to_string();
    let eta = vfield_exp_apply(a, &Series1::monomial(Direction::Z, 1, qi(1), w as i64 + 2), 1).map_err(|e| err(&e))?;
    let qm = crate::series1d::qij_coeffs(&eta, w as usize).map_err(|e| err(&e))?;
    let mut plus_gauss = OpPoly::zero();
    let mut minus_gauss = OpPoly::zero();
    for (&(i, j), v) in &qm {
        let (ki, kj) = ((2 * i + 1) as u16, (2 * j + 1) as u16);
        if (ki + kj) as u32 > w {
            continue;
        }
        let weight = qi(ki as i64 * kj as i64);
        plus_gauss.add_term(OpKey::new(vec![], vec![ki, kj]), 2, v * weight * q(1, 2));
        minus_gauss.add_term(OpKey::new(vec![ki, kj], vec![]), -2, -v * q(1, 2));
    }
    let lt = |k, b| ltilde(k, b).expect("even index");
    let xt = |k, b| xtilde(k, b).expect("even index");
    let l_plus = combine(a, 1, w, lt);
    let x_plus = combine(a, 1, w, xt);
    let l_minus = combine(a, -1, w, lt).scale_q(&qi(-1));
    let x_minus = combine(a, -1, w, xt).scale_q(&qi(-1));
    let t = TruncationSpec::new(w, -4 * w as i32, 4 * w as i32).map_err(|e| err(&e))?;
    let (mut n, mut bad) = (0, Vec::new());
    for wt in 0..=w {
        for mono in odd_partitions(wt) {
            let z = FockSeries::from_terms(t, [(mono.clone(), HLaurent::constant(qi(1)))]);
            for (tag, l, x, g) in [("+", &l_plus, &x_plus, &plus_gauss), ("-", &l_minus, &x_minus, &minus_gauss)] {
                let lhs = l.exp_apply(&z).map_err(|e| err(&e))?;
                let rhs = x.exp_apply(&g.exp_apply(&z).map_err(|e| err(&e))?).map_err(|e| err(&e))?;
                let (k, b) = diff_series(&lhs, &rhs);
                n += k;
                let m = super::mono_str(mono.indices());
                bad.extend(b.into_iter().map(|(i, e, a)| (format!("{tag} on {m}: {i}"), e, a)));
            }
        }
    }
    Ok((n, bad))
}

pub fn qij(p: &Params) -> Report {
    let order = p.order.unwrap_or(8);
    let samples = p.samples.unwrap_or(5);
    let seed = p.seed.unwrap_or(20240611);
    let w = 2 * order + 1;
    let mut r = Report::new("qij");
    r.param("order", order);
    r.param("max weight", w);
    r.param("samples", samples);
    r.param("seed", seed);
    let mut cases = vec![("single a1".to_string(), VFieldCoeffs::with(2, &[(1, q(1, 3))]), 13u32)];
    for s in 0..samples {
        let mut rng = ChaCha8Rng::seed_from_u64(seed + s as u64);
        let a = random_coeffs(&mut rng, order as i64);
        cases.push((format!("sample {s}"), a, w));
    }
    for (name, a, wt) in cases {
        r.param(&format!("{name} coefficients"), coeffs_str(&a));
        match qij_case(&a, wt) {
            Ok((n, bad)) => {
                r.record(&format!("factorization, {name}"), n, bad);
            }
            Err(e) => r.record_error(&format!("factorization, {name}"), e),
        }
    }
    r
}

/// exp(op)·q_{2n+1}, read as the coefficient list over odd indices.
fn linear_image(op: &OpPoly, n: i64, w: u32) -> Result<FockSeries, String> {
    let t = TruncationSpec::new(w, -1, 1).map_err(|e| e.to_string())?;
    let z = FockSeries::from_terms(t, [(QMonomial::new(vec![(2 * n + 1) as u16]), HLaurent::constant(qi(1)))]);
    op.exp_apply(&z).map_err(|e| e.to_string())
}

fn lin(coeffs: impl IntoIterator<Item = (i64, Q)>, w: u32) -> FockSeries {
    let t = TruncationSpec::new(w, -1, 1).expect("valid");
    FockSeries::from_terms(
        t,
        coeffs.into_iter().filter(|(k, _)| *k as u32 <= w).map(|(k, c)| (QMonomial::new(vec![k as u16]), HLaurent::constant(c))),
    )
}

/// (2i+1)[z^{2i+1}] exp(Σãₘz^{1−2m}d/dz)·z^{2n+1}, computed in w = 1/z where the
/// field is −Σãₘw^{1+2m}d/dw and z^{2n+1} = w^{−2n−1}.
fn lowering_by_series(a: &VFieldCoeffs, n: i64) -> Result<Vec<Q>, String> {
    let neg = VFieldCoeffs::with(a.step, &a.coeffs.iter().map(|(m, c)| (*m, -c.clone())).collect::<Vec<_>>());
    let g = Series1::monomial(Direction::Z, -2 * n - 1, qi(1), 0);
    let s = vfield_exp_apply(&neg, &g, 1).map_err(|e| e.to_string())?;
    Ok((0..=n).map(|i| s.c(-2 * i - 1)).collect())
}

/// (2n+1)/(2i+1)·[z^{2n+1}] exp(Σãₘz^{1+2m}d/dz)·z^{2i+1}
fn lowering_by_transpose(a: &VFieldCoeffs, n: i64) -> Result<Vec<Q>, String> {
    (0..=n)
        .map(|i| {
            let g = Series1::monomial(Direction::Z, 2 * i + 1, qi(1), 2 * n + 2);
            let s = vfield_exp_apply(a, &g, 1).map_err(|e| e.to_string())?;
            Ok(s.c(2 * n + 1) * q(2 * n + 1, 2 * i + 1))
        })
        .collect()
}

pub fn change(p: &Params) -> Report {
    let nmax = p.order.unwrap_or(6) as i64;
    let tail = 8i64;
    let mut r = Report::new("change");
    r.param("n max", nmax);
    r.param("terms", tail + 1);
    let w = (2 * nmax + 1 + 2 * tail) as u32;
    let raise = xtilde(-2, w as u16).expect("even").scale_q(&q(-1, 2));

    // exp(−½X̃₋₂)·q_{2n+1}: exponent −(2n+1)/2 (the printed +(2n+1)/2 fails)
    let (mut n1, mut bad1, mut printed_ok) = (0, Vec::new(), true);
    for n in 0..=nmax {
        let img = match linear_image(&raise, n, w) {
            Ok(s) => s,
            Err(e) => return { r.record_error("raising change", e); r },
        };
        let top = (w as i64 - 2 * n - 1) / 2;
        let want = lin((0..=top).map(|i| (2 * n + 2 * i + 1, binom(&q(-(2 * n + 1), 2), i as usize))), w);
        let printed = lin((0..=top).map(|i| (2 * n + 2 * i + 1, binom(&q(2 * n + 1, 2), i as usize))), w);
        printed_ok &= printed == img;
        let (k, b) = diff_series(&want, &img);
        n1 += k;
        bad1.extend(b.into_iter().map(|(i, e, a)| (format!("n={n}: {i}"), e, a)));
    }
    r.record("raising change", n1, bad1);
    r.catalog("exp(-1/2 X-2) q_(2n+1)", "binom((2n+1)/2, i)", "binom(-(2n+1)/2, i)", !printed_ok);

    // exp(Σ aₘX̃_{2m})·q_{2n+1} with the aₘ of the main identity
    let a = match build_a_coeffs(2 * nmax + 4) {
        Ok(a) => a,
        Err(e) => return { r.record_error("lowering change", e); r },
    };
    let lower = combine(&a, 1, w, |k, b| xtilde(k, b).expect("even"));
    let (mut n2, mut bad2, mut printed_ok) = (0, Vec::new(), true);
    let (mut n3, mut bad3) = (0, Vec::new());
    for n in 0..=nmax {
        let img = match linear_image(&lower, n, w) {
            Ok(s) => s,
            Err(e) => return { r.record_error("lowering change", e); r },
        };
        let closed = |i: i64, scale4: bool| {
            let b = binom(&q(2 * i + 1, 2), (n - i) as usize) * q(2 * n + 1, 2 * i + 1);
            if scale4 {
                b * q(1, 1i64 << (2 * (n - i)))
            } else {
                b
            }
        };
        let want = lin((0..=n).map(|i| (2 * i + 1, closed(i, true))), w);
        let printed = lin((0..=n).map(|i| (2 * i + 1, closed(i, false))), w);
        printed_ok &= printed == img;
        let (k, b) = diff_series(&want, &img);
        n2 += k;
        bad2.extend(b.into_iter().map(|(i, e, a)| (format!("n={n}: {i}"), e, a)));
        // the transpose identity, both sides from one-variable series
        match (lowering_by_series(&a, n), lowering_by_transpose(&a, n)) {
            (Ok(x), Ok(y)) => {
                for i in 0..=n as usize {
                    n3 += 1;
                    if x[i] != y[i] || x[i] != img.coeff(&[(2 * i + 1) as u16], 0) {
                        bad3.push((format!("n={n}, i={i}"), to_str(&y[i]), to_str(&x[i])));
                    }
                }
            }
            (Err(e), _) | (_, Err(e)) => bad3.push((format!("n={n}"), "series".into(), e)),
        }
    }
    r.record("lowering change", n2, bad2);
    r.record("transpose identity", n3, bad3);
    r.catalog(
        "exp(sum a_m X_2m) q_(2n+1)",
        "(2n+1)/(2i+1) binom((2i+1)/2, n-i)",
        "(2n+1)/(2i+1) binom((2i+1)/2, n-i) 4^-(n-i)",
        !printed_ok,
    );

    // transpose identity for random coefficients
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed.unwrap_or(20240611));
    let (mut n4, mut bad4) = (0, Vec::new());
    for s in 0..p.samples.unwrap_or(3) {
        let at = random_coeffs(&mut rng, nmax);
        let op = combine(&at, 1, w, |k, b| xtilde(k, b).expect("even"));
        for n in 0..=nmax {
            let img = match linear_image(&op, n, w) {
                Ok(x) => x,
                Err(e) => {
                    bad4.push((format!("sample {s}"), "image".into(), e));
                    continue;
                }
            };
            match lowering_by_transpose(&at, n) {
                Ok(y) => {
                    for (i, yi) in y.iter().enumerate() {
                        n4 += 1;
                        let got = img.coeff(&[(2 * i + 1) as u16], 0);
                        if &got != yi {
                            bad4.push((format!("sample {s}, n={n}, i={i}"), to_str(yi), to_str(&got)));
                        }
                    }
                }
                Err(e) => bad4.push((format!("sample {s}"), "series".into(), e)),
            }
        }
    }
    r.record("transpose identity, random coefficients", n4, bad4);
    r
}
