//! Operator scripts: a whitespace-separated sequence of exponential factors,
//! applied right to left like the written product.
//!
//! ```text
//! EXP(-1 * h^-2 * D[1])  EXP(P2)  EXP(1/2 * h^-2 * Lt[-2])  EXP(P1)
//! EXPSUM(m = 1.., a[m] * h^(2*m) * Lt[2*m])
//! ```
//!
//! `#` starts a comment. Families: Lt (odd part of L̂), Lh (L̂), M (M̂), Xt, X,
//! A (α̂), plus P1, P2, P2p (P₂ with the uncorrected ħ powers), D[n] = ∂ₙ, Q[n] = qₙ.
//! `a[m]` refers to the coefficients of the vector field z√(1+z²/4).

use std::fmt;

use serde::Serialize;
use thiserror::Error;

use super::families::OpFamily;
use super::{OpError, OpPoly};
use crate::fock::HLaurent;
use crate::rational::{one, qi, Q};
use crate::series1d::VFieldCoeffs;

#[derive(Debug, Error, PartialEq)]
pub enum ScriptError {
    #[error("{line}:{col}: syntax error: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("{line}:{col}: {msg}")]
    Semantic { line: usize, col: usize, msg: String },
    #[error(transparent)]
    Op(#[from] OpError),
}

/// `mul * var + add`, or a constant when `mul == 0`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Linear {
    pub mul: i64,
    pub add: i64,
}

impl Linear {
    pub fn constant(c: i64) -> Linear {
        Linear { mul: 0, add: c }
    }

    pub fn at(&self, v: i64) -> i64 {
        self.mul * v + self.add
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum FamilyName {
    Lt,
    Lh,
    M,
    Xt,
    X,
    A,
    P1,
    P2,
    P2p,
    D,
    Q,
}

impl FamilyName {
    fn lookup(s: &str) -> Option<FamilyName> {
        Some(match s {
            "Lt" => FamilyName::Lt,
            "Lh" | "L" => FamilyName::Lh,
            "M" => FamilyName::M,
            "Xt" => FamilyName::Xt,
            "X" => FamilyName::X,
            "A" => FamilyName::A,
            "P1" => FamilyName::P1,
            "P2" => FamilyName::P2,
            "P2p" => FamilyName::P2p,
            "D" => FamilyName::D,
            "Q" => FamilyName::Q,
            _ => return None,
        })
    }

    fn indexed(self) -> bool {
        !matches!(self, FamilyName::P1 | FamilyName::P2 | FamilyName::P2p)
    }

    pub fn family(self, i: i64) -> Result<OpFamily, OpError> {
        let pos = |i: i64| {
            u16::try_from(i).ok().filter(|&k| k >= 1).ok_or_else(|| OpError::Family(format!("variable index must be ≥ 1, got {i}")))
        };
        Ok(match self {
            FamilyName::Lt => {
                if i % 2 != 0 {
                    return Err(OpError::Family(format!("Lt is defined on even indices only, got {i}")));
                }
                OpFamily::Ltilde(i)
            }
            FamilyName::Lh => OpFamily::Lhat(i),
            FamilyName::M => OpFamily::Mhat(i),
            FamilyName::Xt => {
                if i % 2 != 0 {
                    return Err(OpError::Family(format!("Xt is defined on even indices only, got {i}")));
                }
                OpFamily::Xtilde(i)
            }
            FamilyName::X => OpFamily::X(i),
            FamilyName::A => OpFamily::AlphaHat(i),
            FamilyName::P1 => OpFamily::P1,
            FamilyName::P2 => OpFamily::P2,
            FamilyName::P2p => OpFamily::P2Printed,
            FamilyName::D => OpFamily::Dq(pos(i)?),
            FamilyName::Q => OpFamily::Q(pos(i)?),
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Factor {
    Exp { scalar: HLaurent, op: OpFamily },
    ExpSum { var: String, start: i64, scalar: HLaurent, hpow: Linear, coeff_a: bool, family: FamilyName, index: Linear },
}

impl fmt::Display for Factor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Factor::Exp { scalar, op } => write!(f, "EXP(({scalar}) * {op:?})"),
            Factor::ExpSum { var, start, family, index, .. } => {
                write!(f, "EXPSUM({var}={start}.., {family:?}[{}*{var}+{}])", index.mul, index.add)
            }
        }
    }
}

/// Everything a factor may need when it is turned into an operator.
pub struct ResolveCtx<'a> {
    pub bound: u16,
    pub a: Option<&'a VFieldCoeffs>,
}

impl Factor {
    /// The exponent of this factor as a finite operator.
    pub fn resolve(&self, ctx: &ResolveCtx) -> Result<OpPoly, OpError> {
        match self {
            Factor::Exp { scalar, op } => Ok(op.materialize(ctx.bound)?.scale(scalar)),
            Factor::ExpSum { start, scalar, hpow, coeff_a, family, index, .. } => {
                let mut out = OpPoly::zero();
                // families shift weight by their index; beyond 2·bound nothing survives
                let limit = 2 * ctx.bound as i64 + 2;
                let mut v = *start;
                loop {
                    let i = index.at(v);
                    if index.mul == 0 || i.abs() > limit {
                        if index.mul == 0 {
                            return Err(OpError::Family("EXPSUM index must depend on the summation variable".into()));
                        }
                        break;
                    }
                    let mut c = scalar.shift(hpow.at(v) as i32);
                    if *coeff_a {
                        let a = ctx.a.ok_or_else(|| OpError::Family("a[m] needs the vector-field coefficients".into()))?;
                        c = c.scale(&a.get(v));
                    }
                    if !c.is_zero() {
                        out.add_assign(&family.family(i)?.materialize(ctx.bound)?.scale(&c));
                    }
                    v += 1;
                }
                Ok(out)
            }
        }
    }

    pub fn needs_a(&self) -> bool {
        matches!(self, Factor::ExpSum { coeff_a: true, .. })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Pipeline {
    /// In written order; application runs from the last factor to the first.
    pub factors: Vec<Factor>,
}

impl Pipeline {
    pub fn resolve(&self, ctx: &ResolveCtx) -> Result<Vec<OpPoly>, OpError> {
        self.factors.iter().map(|f| f.resolve(ctx)).collect()
    }

    pub fn needs_a(&self) -> bool {
        self.factors.iter().any(Factor::needs_a)
    }
}

// ---------------------------------------------------------------- lexer

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Ident(String),
    Int(i64),
    Sym(char),
    DotDot,
}

#[derive(Clone, Debug)]
struct Spanned {
    tok: Tok,
    line: usize,
    col: usize,
}

fn lex(text: &str) -> Result<Vec<Spanned>, ScriptError> {
    let mut out = Vec::new();
    for (ln, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("");
        let chars: Vec<char> = line.chars().collect();
        let mut i = 0;
        while i < chars.len() {
            let ch = chars[i];
            let (l, c) = (ln + 1, i + 1);
            if ch.is_whitespace() {
                i += 1;
            } else if ch.is_ascii_digit() {
                let s = i;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
                let txt: String = chars[s..i].iter().collect();
                let v = txt.parse().map_err(|_| ScriptError::Syntax { line: l, col: c, msg: format!("integer out of range: {txt}") })?;
                out.push(Spanned { tok: Tok::Int(v), line: l, col: c });
            } else if ch.is_ascii_alphabetic() || ch == '_' {
                let s = i;
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                out.push(Spanned { tok: Tok::Ident(chars[s..i].iter().collect()), line: l, col: c });
            } else if ch == '.' && chars.get(i + 1) == Some(&'.') {
                out.push(Spanned { tok: Tok::DotDot, line: l, col: c });
                i += 2;
            } else if "()[]*/^+-=,".contains(ch) {
                out.push(Spanned { tok: Tok::Sym(ch), line: l, col: c });
                i += 1;
            } else {
                return Err(ScriptError::Syntax { line: l, col: c, msg: format!("unexpected character '{ch}'") });
            }
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------- parser

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
    end: (usize, usize),
}

enum Item {
    Rational(Q),
    HPow(Linear),
    ACoeff,
    Op(FamilyName, Linear, (usize, usize)),
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|s| &s.tok)
    }

    fn here(&self) -> (usize, usize) {
        self.toks.get(self.pos).map_or(self.end, |s| (s.line, s.col))
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T, ScriptError> {
        let (line, col) = self.here();
        Err(ScriptError::Syntax { line, col, msg: msg.into() })
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|s| s.tok.clone());
        self.pos += 1;
        t
    }

    fn expect(&mut self, c: char) -> Result<(), ScriptError> {
        if self.peek() == Some(&Tok::Sym(c)) {
            self.pos += 1;
            Ok(())
        } else {
            self.err(format!("expected '{c}'"))
        }
    }

    fn ident(&mut self) -> Result<String, ScriptError> {
        match self.peek() {
            Some(Tok::Ident(s)) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            _ => self.err("expected identifier"),
        }
    }

    fn signed_int(&mut self) -> Result<i64, ScriptError> {
        let neg = self.peek() == Some(&Tok::Sym('-'));
        if neg {
            self.pos += 1;
        }
        match self.bump() {
            Some(Tok::Int(v)) => Ok(if neg { -v } else { v }),
            _ => {
                self.pos -= 1;
                self.err("expected integer")
            }
        }
    }

    /// int | [int "*"] var [(+|-) int]
    fn linear(&mut self, var: Option<&str>) -> Result<Linear, ScriptError> {
        let at_var = |p: &Parser| matches!(p.peek(), Some(Tok::Ident(s)) if Some(s.as_str()) == var);
        if at_var(self) {
            self.pos += 1;
            let add = self.linear_tail()?;
            return Ok(Linear { mul: 1, add });
        }
        if let Some(Tok::Ident(s)) = self.peek() {
            let s = s.clone();
            return self.semantic(format!("unknown variable '{s}'"));
        }
        let k = self.signed_int()?;
        if self.peek() == Some(&Tok::Sym('*')) {
            self.pos += 1;
            if !at_var(self) {
                return self.err("expected summation variable");
            }
            self.pos += 1;
            let add = self.linear_tail()?;
            return Ok(Linear { mul: k, add });
        }
        Ok(Linear::constant(k))
    }

    fn linear_tail(&mut self) -> Result<i64, ScriptError> {
        match self.peek() {
            Some(Tok::Sym('+')) => {
                self.pos += 1;
                self.signed_int()
            }
            Some(Tok::Sym('-')) => {
                self.pos += 1;
                Ok(-self.signed_int()?)
            }
            _ => Ok(0),
        }
    }

    fn semantic<T>(&self, msg: impl Into<String>) -> Result<T, ScriptError> {
        let (line, col) = self.here();
        Err(ScriptError::Semantic { line, col, msg: msg.into() })
    }

    fn item(&mut self, var: Option<&str>) -> Result<Item, ScriptError> {
        match self.peek().cloned() {
            Some(Tok::Int(_)) | Some(Tok::Sym('-')) => {
                let n = self.signed_int()?;
                if self.peek() == Some(&Tok::Sym('/')) {
                    self.pos += 1;
                    let d = self.signed_int()?;
                    if d == 0 {
                        return self.semantic("zero denominator");
                    }
                    return Ok(Item::Rational(Q::new(n.into(), d.into())));
                }
                Ok(Item::Rational(qi(n)))
            }
            Some(Tok::Ident(name)) => {
                let at = self.here();
                self.pos += 1;
                if name == "h" {
                    self.expect('^')?;
                    if self.peek() == Some(&Tok::Sym('(')) {
                        self.pos += 1;
                        let l = self.linear(var)?;
                        self.expect(')')?;
                        return Ok(Item::HPow(l));
                    }
                    return Ok(Item::HPow(Linear::constant(self.signed_int()?)));
                }
                if name == "a" {
                    self.expect('[')?;
                    match (self.ident(), var) {
                        (Ok(v), Some(w)) if v == w => {}
                        _ => {
                            self.pos = self.pos.saturating_sub(1);
                            return self.semantic("a[...] must be indexed by the summation variable");
                        }
                    }
                    self.expect(']')?;
                    return Ok(Item::ACoeff);
                }
                let Some(fam) = FamilyName::lookup(&name) else {
                    return Err(ScriptError::Semantic { line: at.0, col: at.1, msg: format!("unknown operator family '{name}'") });
                };
                if !fam.indexed() {
                    return Ok(Item::Op(fam, Linear::constant(0), at));
                }
                if self.peek() != Some(&Tok::Sym('[')) {
                    return Err(ScriptError::Semantic { line: at.0, col: at.1, msg: format!("'{name}' needs an index") });
                }
                self.pos += 1;
                let l = self.linear(var)?;
                self.expect(']')?;
                Ok(Item::Op(fam, l, at))
            }
            _ => self.err("expected scalar or operator"),
        }
    }

    /// scalar-items "*" ... "*" opref, up to the closing parenthesis
    fn product(&mut self, var: Option<&str>) -> Result<(HLaurent, Linear, bool, FamilyName, Linear, (usize, usize)), ScriptError> {
        let mut c = one();
        let mut hp = Linear::constant(0);
        let mut coeff_a = false;
        loop {
            match self.item(var)? {
                Item::Rational(r) => c *= r,
                Item::HPow(l) => {
                    hp = Linear { mul: hp.mul + l.mul, add: hp.add + l.add };
                }
                Item::ACoeff => coeff_a = true,
                Item::Op(f, l, at) => {
                    if self.peek() != Some(&Tok::Sym(')')) {
                        return self.err("the operator must be the last factor");
                    }
                    return Ok((HLaurent::constant(c), hp, coeff_a, f, l, at));
                }
            }
            self.expect('*')?;
        }
    }

    fn factor(&mut self) -> Result<Factor, ScriptError> {
        let head = self.ident()?;
        match head.as_str() {
            "EXP" => {
                self.expect('(')?;
                let (scalar, hp, _, fam, idx, at) = self.product(None)?;
                self.expect(')')?;
                let op = fam.family(idx.add).map_err(|e| ScriptError::Semantic { line: at.0, col: at.1, msg: e.to_string() })?;
                Ok(Factor::Exp { scalar: scalar.shift(hp.add as i32), op })
            }
            "EXPSUM" => {
                self.expect('(')?;
                let var = self.ident()?;
                self.expect('=')?;
                let start = self.signed_int()?;
                if self.bump() != Some(Tok::DotDot) {
                    self.pos -= 1;
                    return self.err("expected '..'");
                }
                self.expect(',')?;
                let (scalar, hpow, coeff_a, family, index, at) = self.product(Some(&var))?;
                self.expect(')')?;
                if !family.indexed() || index.mul == 0 {
                    return Err(ScriptError::Semantic { line: at.0, col: at.1, msg: "EXPSUM operator index must use the summation variable".into() });
                }
                // reject parity mismatches up front, e.g. Lt[2*m+1]
                if let Err(e) = family.family(index.at(start)).and_then(|_| family.family(index.at(start + 1))) {
                    return Err(ScriptError::Semantic { line: at.0, col: at.1, msg: e.to_string() });
                }
                Ok(Factor::ExpSum { var, start, scalar, hpow, coeff_a, family, index })
            }
            other => {
                self.pos -= 1;
                self.semantic(format!("expected EXP or EXPSUM, found '{other}'"))
            }
        }
    }
}

pub fn parse_opscript(text: &str) -> Result<Pipeline, ScriptError> {
    let toks = lex(text)?;
    let last_line = text.lines().count().max(1);
    let end = (last_line, text.lines().last().map_or(1, |l| l.chars().count() + 1));
    let mut p = Parser { toks, pos: 0, end };
    let mut factors = Vec::new();
    while p.peek().is_some() {
        factors.push(p.factor()?);
    }
    Ok(Pipeline { factors })
}

/// The five-factor connection from the Kontsevich–Witten to the BGW partition function.
pub const MAIN_SCRIPT: &str = "\
EXP(-1 * h^-2 * D[1])
EXP(P2)
EXP(1/2 * h^-2 * Lt[-2])
EXP(P1)
EXPSUM(m = 1.., a[m] * h^(2*m) * Lt[2*m])
";

/// Exponent operators for the main script, in written order.
pub fn main_factors(bound: u16, a: &VFieldCoeffs) -> Result<Vec<OpPoly>, OpError> {
    let p = parse_opscript(MAIN_SCRIPT).map_err(|e| OpError::Family(e.to_string()))?;
    p.resolve(&ResolveCtx { bound, a: Some(a) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::families;
    use crate::rational::q;

    #[test]
    fn single_factor() {
        let p = parse_opscript("EXP(1/2 * h^-2 * Lt[-2])").unwrap();
        assert_eq!(p.factors, vec![Factor::Exp { scalar: HLaurent::mono(-2, q(1, 2)), op: OpFamily::Ltilde(-2) }]);
    }

    #[test]
    fn main_script_has_five_factors() {
        let p = parse_opscript(MAIN_SCRIPT).unwrap();
        assert_eq!(p.factors.len(), 5);
        assert_eq!(p.factors[0], Factor::Exp { scalar: HLaurent::mono(-2, qi(-1)), op: OpFamily::Dq(1) });
        assert_eq!(p.factors[1], Factor::Exp { scalar: HLaurent::constant(one()), op: OpFamily::P2 });
        assert_eq!(p.factors[3], Factor::Exp { scalar: HLaurent::constant(one()), op: OpFamily::P1 });
        assert!(p.needs_a());
    }

    #[test]
    fn rejects_odd_ltilde() {
        let e = parse_opscript("EXP(Lt[3])").unwrap_err();
        assert!(matches!(e, ScriptError::Semantic { line: 1, col: 5, .. }), "{e}");
        assert!(parse_opscript("EXPSUM(m=1.., Lt[2*m+1])").is_err());
    }

    #[test]
    fn errors_carry_location() {
        let e = parse_opscript("EXP(P1)\n  EXP(1/2 * Foo[2])").unwrap_err();
        assert_eq!(e, ScriptError::Semantic { line: 2, col: 13, msg: "unknown operator family 'Foo'".into() });
        let e = parse_opscript("EXP(P1").unwrap_err();
        assert!(matches!(e, ScriptError::Syntax { line: 1, .. }));
        assert!(matches!(parse_opscript("EXP(P1) $").unwrap_err(), ScriptError::Syntax { line: 1, col: 9, .. }));
        assert!(parse_opscript("EXP(2 * Lt[-2] * h^2)").is_err());
    }

    #[test]
    fn empty_script() {
        assert!(parse_opscript("# nothing\n").unwrap().factors.is_empty());
    }

    #[test]
    fn expsum_resolves_to_u() {
        let a = families::build_a_coeffs(12).unwrap();
        let p = parse_opscript("EXPSUM(m = 1.., a[m] * h^(2*m) * Lt[2*m])").unwrap();
        let u = p.resolve(&ResolveCtx { bound: 9, a: Some(&a) }).unwrap().remove(0);
        assert_eq!(u, families::u_operator(&a, 20, 9, true).unwrap());
    }
}
