//! Term algebra: names, function symbols, terms, and equational theories.
//!
//! Terms are built from atomic names, symbols (opaque handles for values a
//! component has seen but cannot inspect), and applications of arity-indexed
//! function symbols. An equational theory is a set of subterm-convergent
//! equations oriented left-to-right; `normalize` rewrites to the unique
//! normal form and `eq_mod_e` decides equality modulo the theory.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::symbolic::Symbol;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TermError {
    #[error("arity mismatch for {sym}/{expected}: got {got} arguments")]
    ArityMismatch {
        sym: String,
        expected: usize,
        got: usize,
    },
    #[error("rewrite step bound exceeded after {0} steps (non-terminating theory?)")]
    RewriteDepthExceeded(usize),
    #[error("invalid equation `{0}`: {1}")]
    InvalidEquation(String, String),
    #[error("term parse error at byte {pos}: {msg}")]
    Parse { pos: usize, msg: String },
}

/// An atomic protocol name. Public names are known to everyone; private
/// names model keys, nonces and other high-entropy values.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Name {
    text: String,
    public: bool,
}

impl Name {
    pub fn public(text: impl Into<String>) -> Self {
        Name {
            text: text.into(),
            public: true,
        }
    }

    pub fn private(text: impl Into<String>) -> Self {
        Name {
            text: text.into(),
            public: false,
        }
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn is_public(&self) -> bool {
        self.public
    }
}

impl fmt::Display for Name {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

/// A function symbol with a fixed arity. Identity is the (name, arity) pair.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FnSym {
    name: String,
    arity: usize,
}

impl FnSym {
    pub fn new(name: impl Into<String>, arity: usize) -> Self {
        FnSym {
            name: name.into(),
            arity,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn arity(&self) -> usize {
        self.arity
    }
}

impl fmt::Display for FnSym {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.name, self.arity)
    }
}

/// A message term.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Term {
    Name(Name),
    Sym(Symbol),
    App(FnSym, Vec<Term>),
}

/// Builds an application node, checking the argument count against the
/// symbol's arity.
pub fn mk_app(f: &FnSym, args: Vec<Term>) -> Result<Term, TermError> {
    if args.len() != f.arity() {
        return Err(TermError::ArityMismatch {
            sym: f.name().to_string(),
            expected: f.arity(),
            got: args.len(),
        });
    }
    Ok(Term::App(f.clone(), args))
}

impl Term {
    pub fn sym(s: impl Into<String>) -> Self {
        Term::Sym(Symbol::new(s))
    }

    /// All subterms of `self`, including `self`.
    pub fn subterms(&self) -> Vec<&Term> {
        let mut out = Vec::new();
        let mut stack = vec![self];
        while let Some(t) = stack.pop() {
            out.push(t);
            if let Term::App(_, args) = t {
                stack.extend(args.iter());
            }
        }
        out
    }

    pub fn size(&self) -> usize {
        self.subterms().len()
    }

    /// Whether `other` occurs somewhere inside `self` (strictly).
    pub fn has_strict_subterm(&self, other: &Term) -> bool {
        match self {
            Term::App(_, args) => args.iter().any(|a| a == other || a.has_strict_subterm(other)),
            _ => false,
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, Term::Name(_)) || matches!(self, Term::App(f, _) if f.arity() == 0)
    }
}

/// Set of `Sym` leaves in `t`.
pub fn symbols_of(t: &Term) -> BTreeSet<Symbol> {
    let mut out = BTreeSet::new();
    for s in t.subterms() {
        if let Term::Sym(x) = s {
            out.insert(x.clone());
        }
    }
    out
}

/// Private names occurring in `t`.
pub fn private_names_of(t: &Term) -> BTreeSet<Name> {
    let mut out = BTreeSet::new();
    for s in t.subterms() {
        if let Term::Name(n) = s {
            if !n.is_public() {
                out.insert(n.clone());
            }
        }
    }
    out
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Name(n) => write!(f, "{n}"),
            Term::Sym(s) => write!(f, "{s}"),
            Term::App(g, args) => {
                write!(f, "{}", g.name())?;
                if !args.is_empty() {
                    write!(f, "(")?;
                    for (i, a) in args.iter().enumerate() {
                        if i > 0 {
                            write!(f, ",")?;
                        }
                        write!(f, "{a}")?;
                    }
                    write!(f, ")")?;
                }
                Ok(())
            }
        }
    }
}

/// One oriented equation `lhs = rhs`. Construction enforces the
/// subterm-convergent restriction: the right-hand side is either a strict
/// subterm of the left-hand side or a constant, and introduces no symbols
/// of its own. Symbols inside equations act as rule variables.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Equation {
    lhs: Term,
    rhs: Term,
}

impl Equation {
    pub fn new(lhs: Term, rhs: Term) -> Result<Self, TermError> {
        let rendered = format!("{lhs} = {rhs}");
        let rhs_syms = symbols_of(&rhs);
        let lhs_syms = symbols_of(&lhs);
        if !rhs_syms.is_subset(&lhs_syms) {
            return Err(TermError::InvalidEquation(
                rendered,
                "right-hand side introduces symbols not bound on the left".into(),
            ));
        }
        if !lhs.has_strict_subterm(&rhs) && !rhs.is_constant() {
            return Err(TermError::InvalidEquation(
                rendered,
                "right-hand side is neither a strict subterm of the left nor a constant".into(),
            ));
        }
        Ok(Equation { lhs, rhs })
    }

    pub fn lhs(&self) -> &Term {
        &self.lhs
    }

    pub fn rhs(&self) -> &Term {
        &self.rhs
    }
}

impl fmt::Display for Equation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} = {}", self.lhs, self.rhs)
    }
}

/// Matches `pat` against `subject`, treating symbols in `pat` as rule
/// variables. Symbols in the subject are opaque constants.
fn match_pattern(pat: &Term, subject: &Term, binds: &mut BTreeMap<Symbol, Term>) -> bool {
    match pat {
        Term::Sym(v) => match binds.get(v) {
            Some(bound) => bound == subject,
            None => {
                binds.insert(v.clone(), subject.clone());
                true
            }
        },
        Term::Name(n) => matches!(subject, Term::Name(m) if m == n),
        Term::App(f, args) => match subject {
            Term::App(g, sargs) if g == f => args
                .iter()
                .zip(sargs.iter())
                .all(|(p, s)| match_pattern(p, s, binds)),
            _ => false,
        },
    }
}

/// Pattern matching with equation symbols as rule variables, exposed for
/// proof search.
pub fn match_pattern_pub(pat: &Term, subject: &Term, binds: &mut BTreeMap<Symbol, Term>) -> bool {
    match_pattern(pat, subject, binds)
}

/// Substitution of rule variables, exposed for proof search.
pub fn instantiate_pub(t: &Term, binds: &BTreeMap<Symbol, Term>) -> Term {
    instantiate(t, binds)
}

fn instantiate(t: &Term, binds: &BTreeMap<Symbol, Term>) -> Term {
    match t {
        Term::Sym(v) => binds.get(v).cloned().unwrap_or_else(|| t.clone()),
        Term::Name(_) => t.clone(),
        Term::App(f, args) => Term::App(
            f.clone(),
            args.iter().map(|a| instantiate(a, binds)).collect(),
        ),
    }
}

pub const DEFAULT_REWRITE_BOUND: usize = 10_000;

/// A subterm-convergent rewrite theory.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Theory {
    equations: Vec<Equation>,
    max_steps: usize,
}

impl Theory {
    pub fn new(equations: Vec<Equation>) -> Self {
        Theory {
            equations,
            max_steps: DEFAULT_REWRITE_BOUND,
        }
    }

    pub fn empty() -> Self {
        Theory::new(Vec::new())
    }

    pub fn equations(&self) -> &[Equation] {
        &self.equations
    }

    pub fn with_step_bound(mut self, max_steps: usize) -> Self {
        self.max_steps = max_steps;
        self
    }

    /// Unique normal form of `t` under exhaustive innermost rewriting.
    pub fn normalize(&self, t: &Term) -> Result<Term, TermError> {
        let mut steps = 0usize;
        self.norm_inner(t, &mut steps)
    }

    fn norm_inner(&self, t: &Term, steps: &mut usize) -> Result<Term, TermError> {
        let mut current = match t {
            Term::App(f, args) => {
                let nargs = args
                    .iter()
                    .map(|a| self.norm_inner(a, steps))
                    .collect::<Result<Vec<_>, _>>()?;
                Term::App(f.clone(), nargs)
            }
            _ => t.clone(),
        };
        // Arguments are normal, so only root redexes remain.
        'outer: loop {
            for eq in &self.equations {
                let mut binds = BTreeMap::new();
                if match_pattern(eq.lhs(), &current, &mut binds) {
                    *steps += 1;
                    if *steps > self.max_steps {
                        return Err(TermError::RewriteDepthExceeded(self.max_steps));
                    }
                    current = instantiate(eq.rhs(), &binds);
                    continue 'outer;
                }
            }
            return Ok(current);
        }
    }

    /// Equality modulo the theory: both sides share a normal form.
    pub fn eq_mod_e(&self, a: &Term, b: &Term) -> Result<bool, TermError> {
        Ok(self.normalize(a)? == self.normalize(b)?)
    }
}

/// Resolves identifiers while parsing terms: declared names stay names,
/// everything else becomes a symbol.
#[derive(Debug, Clone, Default)]
pub struct NameTable {
    names: BTreeMap<String, Name>,
}

impl NameTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn declare(&mut self, n: Name) {
        self.names.insert(n.text().to_string(), n);
    }

    pub fn lookup(&self, ident: &str) -> Option<&Name> {
        self.names.get(ident)
    }

    pub fn names(&self) -> impl Iterator<Item = &Name> {
        self.names.values()
    }
}

/// Parses the textual term grammar: `ident` for names and symbols,
/// `f(t1,...,tn)` for applications. Arities are inferred from use unless
/// the signature pins them down.
pub fn parse_term(src: &str, names: &NameTable, sig: &[FnSym]) -> Result<Term, TermError> {
    let mut p = TermParser {
        src: src.as_bytes(),
        pos: 0,
        names,
        sig,
    };
    let t = p.term()?;
    p.skip_ws();
    if p.pos != p.src.len() {
        return Err(TermError::Parse {
            pos: p.pos,
            msg: "trailing input after term".into(),
        });
    }
    Ok(t)
}

struct TermParser<'a> {
    src: &'a [u8],
    pos: usize,
    names: &'a NameTable,
    sig: &'a [FnSym],
}

impl TermParser<'_> {
    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn term(&mut self) -> Result<Term, TermError> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len()
            && (self.src[self.pos].is_ascii_alphanumeric()
                || self.src[self.pos] == b'_'
                || self.src[self.pos] == b'\'')
        {
            self.pos += 1;
        }
        if self.pos == start {
            // Permit bracketed constant names produced by extraction.
            if self.src[self.pos..].starts_with("\u{231c}".as_bytes()) {
                return self.const_name(start);
            }
            return Err(TermError::Parse {
                pos: self.pos,
                msg: "expected identifier".into(),
            });
        }
        let ident = std::str::from_utf8(&self.src[start..self.pos])
            .expect("ascii ident")
            .to_string();
        self.skip_ws();
        if self.pos < self.src.len() && self.src[self.pos] == b'(' {
            self.pos += 1;
            let mut args = Vec::new();
            self.skip_ws();
            if self.pos < self.src.len() && self.src[self.pos] == b')' {
                self.pos += 1;
            } else {
                loop {
                    args.push(self.term()?);
                    self.skip_ws();
                    match self.src.get(self.pos) {
                        Some(b',') => self.pos += 1,
                        Some(b')') => {
                            self.pos += 1;
                            break;
                        }
                        _ => {
                            return Err(TermError::Parse {
                                pos: self.pos,
                                msg: "expected `,` or `)`".into(),
                            })
                        }
                    }
                }
            }
            let f = self
                .sig
                .iter()
                .find(|f| f.name() == ident)
                .cloned()
                .unwrap_or_else(|| FnSym::new(&ident, args.len()));
            mk_app(&f, args)
        } else if let Some(n) = self.names.lookup(&ident) {
            Ok(Term::Name(n.clone()))
        } else {
            Ok(Term::sym(ident))
        }
    }

    fn const_name(&mut self, start: usize) -> Result<Term, TermError> {
        let open = "\u{231c}";
        let close = "\u{231d}";
        self.pos += open.len();
        let rest = &self.src[self.pos..];
        let rel = std::str::from_utf8(rest)
            .ok()
            .and_then(|s| s.find(close))
            .ok_or(TermError::Parse {
                pos: start,
                msg: "unterminated constant name".into(),
            })?;
        let inner = std::str::from_utf8(&rest[..rel]).expect("utf8 inner");
        let text = format!("{open}{inner}{close}");
        self.pos += rel + close.len();
        Ok(Term::Name(Name::public(text)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn senc() -> FnSym {
        FnSym::new("senc", 2)
    }

    fn sdec() -> FnSym {
        FnSym::new("sdec", 2)
    }

    fn dec_theory() -> Theory {
        // sdec(senc(x,y),y) = x
        let x = Term::sym("x");
        let y = Term::sym("y");
        let lhs = mk_app(
            &sdec(),
            vec![mk_app(&senc(), vec![x.clone(), y.clone()]).unwrap(), y],
        )
        .unwrap();
        Theory::new(vec![Equation::new(lhs, x).unwrap()])
    }

    #[test]
    fn mk_app_builds_applications() {
        let m = Term::sym("m");
        let k = Term::sym("k");
        let t = mk_app(&senc(), vec![m, k]).unwrap();
        assert_eq!(t.to_string(), "senc(m,k)");

        let c = mk_app(&FnSym::new("c", 0), vec![]).unwrap();
        assert_eq!(c.to_string(), "c");

        let err = mk_app(&senc(), vec![Term::sym("m")]);
        assert_eq!(
            err,
            Err(TermError::ArityMismatch {
                sym: "senc".into(),
                expected: 2,
                got: 1
            })
        );
    }

    #[test]
    fn normalize_applies_decryption() {
        let th = dec_theory();
        let m = Term::sym("m");
        let k = Term::sym("k");
        let enc = mk_app(&senc(), vec![m.clone(), k.clone()]).unwrap();
        let dec = mk_app(&sdec(), vec![enc, k.clone()]).unwrap();
        assert_eq!(th.normalize(&dec).unwrap(), m);

        // A normal form is a fixed point.
        assert_eq!(th.normalize(&k).unwrap(), k);

        // Single rule application on a nested ciphertext.
        let a = Term::sym("a");
        let k1 = Term::sym("k1");
        let k2 = Term::sym("k2");
        let inner = mk_app(&senc(), vec![a, k1]).unwrap();
        let outer = mk_app(&senc(), vec![inner.clone(), k2.clone()]).unwrap();
        let dec2 = mk_app(&sdec(), vec![outer, k2]).unwrap();
        assert_eq!(th.normalize(&dec2).unwrap(), inner);
    }

    #[test]
    fn eq_mod_e_examples() {
        let th = dec_theory();
        let m = Term::sym("m");
        let k = Term::sym("k");
        let k2 = Term::sym("k2");
        let enc = mk_app(&senc(), vec![m.clone(), k.clone()]).unwrap();
        let dec = mk_app(&sdec(), vec![enc.clone(), k.clone()]).unwrap();
        assert!(th.eq_mod_e(&dec, &m).unwrap());
        assert!(th.eq_mod_e(&m, &m).unwrap());
        let enc2 = mk_app(&senc(), vec![m.clone(), k2]).unwrap();
        assert!(!th.eq_mod_e(&enc, &enc2).unwrap());
    }

    #[test]
    fn symbols_of_collects_leaves() {
        let x = Term::sym("x");
        let k = Term::sym("k");
        let t = mk_app(&senc(), vec![x.clone(), k.clone()]).unwrap();
        let syms = symbols_of(&t);
        assert_eq!(syms.len(), 2);
        assert!(syms.contains(&Symbol::new("x")) && syms.contains(&Symbol::new("k")));

        assert!(symbols_of(&Term::Name(Name::public("c"))).is_empty());

        // Duplicates collapse.
        let g = FnSym::new("g", 2);
        let f = FnSym::new("f", 2);
        let n = Term::Name(Name::private("n"));
        let inner = mk_app(&g, vec![x.clone(), n]).unwrap();
        let t2 = mk_app(&f, vec![x, inner]).unwrap();
        assert_eq!(symbols_of(&t2).len(), 1);
    }

    #[test]
    fn equation_validation() {
        let x = Term::sym("x");
        let y = Term::sym("y");
        // rhs introduces a fresh symbol: rejected.
        let lhs = mk_app(&FnSym::new("h", 1), vec![x.clone()]).unwrap();
        assert!(Equation::new(lhs.clone(), y.clone()).is_err());
        // rhs not a subterm and not constant: rejected.
        let lhs2 = mk_app(&FnSym::new("h", 1), vec![x.clone()]).unwrap();
        let rhs2 = mk_app(&FnSym::new("g", 1), vec![x.clone()]).unwrap();
        assert!(Equation::new(lhs2, rhs2).is_err());
        // constant rhs accepted.
        let ok = Equation::new(lhs, mk_app(&FnSym::new("zero", 0), vec![]).unwrap());
        assert!(ok.is_ok());
    }

    #[test]
    fn nonterminating_theory_hits_the_step_guard() {
        // Constant right-hand sides pass the shape checks, so a two-rule
        // cycle is expressible; the step bound catches it.
        let c = mk_app(&FnSym::new("c", 0), vec![]).unwrap();
        let d = mk_app(&FnSym::new("d", 0), vec![]).unwrap();
        let th = Theory::new(vec![
            Equation::new(c.clone(), d.clone()).unwrap(),
            Equation::new(d, c.clone()).unwrap(),
        ])
        .with_step_bound(50);
        assert_eq!(th.normalize(&c), Err(TermError::RewriteDepthExceeded(50)));
    }

    #[test]
    fn parse_roundtrip() {
        let mut names = NameTable::new();
        names.declare(Name::private("k"));
        let sig = vec![senc(), sdec()];
        let t = parse_term("sdec(senc(m,k),k)", &names, &sig).unwrap();
        assert_eq!(t.to_string(), "sdec(senc(m,k),k)");
        match &t {
            Term::App(f, args) => {
                assert_eq!(f, &sdec());
                assert!(matches!(args[1], Term::Name(_)));
            }
            _ => panic!("expected application"),
        }
    }
}
