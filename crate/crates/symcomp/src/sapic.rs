//! The process-calculus fragment extracted from execution trees: AST,
//! tree-to-process translation, a trace semantics over the shared event
//! alphabet, a pretty-printer with companion parser, and the executable
//! trace-inclusion check between a tree and its translation.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use crate::bir::{BinOp, Bval, UnOp};
use crate::sbir::{ExecTree, SymExpr};
use crate::symbolic::{
    mint_named, AssignRhs, Event, EventTag, Slts, SymState, Symbol, SymbolSet,
};
use crate::terms::{mk_app, FnSym, Name, NameTable, Term};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SapicError {
    #[error("event `{0}` has no process counterpart")]
    UntranslatableEvent(String),
    #[error("operator `{0}` has no translation")]
    UnmappedOperator(String),
    #[error("process parse error at byte {pos}: {msg}")]
    Parse { pos: usize, msg: String },
    #[error("let pattern `{0}` is not a variable")]
    UnsupportedPattern(String),
}

/// Function symbols standing for translated operators.
pub const TRANSLATED_OPS: [&str; 6] = ["xor", "plus", "mult", "concat", "equal", "not"];

pub fn binop_symbol(op: BinOp) -> FnSym {
    let name = match op {
        BinOp::Xor => "xor",
        BinOp::Add => "plus",
        BinOp::Mul => "mult",
        BinOp::Concat => "concat",
        BinOp::Eq => "equal",
    };
    FnSym::new(name, 2)
}

/// Process-side facts: the equalities installed by let bindings.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum SapicPred {
    LetEq(Symbol, Term),
}

impl fmt::Display for SapicPred {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SapicPred::LetEq(x, t) => write!(f, "{x} = {t}"),
        }
    }
}

/// The process AST.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum Process {
    Nil,
    In(Symbol, Box<Process>),
    Out(Term, Box<Process>),
    Event(Term, Box<Process>),
    Let {
        pat: Term,
        rhs: Term,
        then: Box<Process>,
        els: Box<Process>,
    },
    New(Name, Box<Process>),
    Bang(Box<Process>),
    Par(Box<Process>, Box<Process>),
    Choice(Box<Process>, Box<Process>),
}

impl Process {
    pub fn out(t: Term, p: Process) -> Process {
        Process::Out(t, Box::new(p))
    }

    pub fn let_in(pat: Term, rhs: Term, then: Process) -> Process {
        Process::Let {
            pat,
            rhs,
            then: Box::new(then),
            els: Box::new(Process::Nil),
        }
    }
}

/// Memoizes the public name standing for each constant, so equal values
/// translate to the same name within one extraction.
#[derive(Debug, Clone, Default)]
pub struct ConstTable {
    map: std::collections::BTreeMap<Bval, Name>,
}

impl ConstTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn name_for(&mut self, v: &Bval) -> Name {
        if let Some(n) = self.map.get(v) {
            return n.clone();
        }
        let n = Name::public(format!("\u{231c}{v}\u{231d}"));
        self.map.insert(v.clone(), n.clone());
        n
    }
}

/// Translates a symbolic expression to a term: constants become public
/// names, references stay variables, operators become function symbols.
pub fn translate_expr(e: &SymExpr, consts: &mut ConstTable) -> Result<Term, SapicError> {
    match e {
        SymExpr::Const(v) => Ok(Term::Name(consts.name_for(v))),
        SymExpr::Var(x) => Ok(Term::sym(x.clone())),
        SymExpr::Sym(s) => Ok(Term::Sym(s.clone())),
        SymExpr::Name(n) => Ok(Term::Name(n.clone())),
        SymExpr::Unop(UnOp::Not, a) => {
            let ta = translate_expr(a, consts)?;
            Ok(mk_app(&FnSym::new("not", 1), vec![ta]).expect("unary arity"))
        }
        SymExpr::Unop(UnOp::Named(n), _) => Err(SapicError::UnmappedOperator(n.clone())),
        SymExpr::Binop(op, a, b) => {
            let ta = translate_expr(a, consts)?;
            let tb = translate_expr(b, consts)?;
            Ok(mk_app(&binop_symbol(*op), vec![ta, tb]).expect("binary arity"))
        }
    }
}

/// `translate_expr` with a throwaway constant table.
pub fn translate_expr_standalone(e: &SymExpr) -> Result<Term, SapicError> {
    translate_expr(e, &mut ConstTable::new())
}

/// Translates an execution tree into a process.
pub fn translate_tree(t: &ExecTree) -> Result<Process, SapicError> {
    let mut consts = ConstTable::new();
    translate_tree_with(t, &mut consts)
}

fn translate_tree_with(t: &ExecTree, consts: &mut ConstTable) -> Result<Process, SapicError> {
    match t {
        ExecTree::Leaf => Ok(Process::Nil),
        ExecTree::Branch { then_t, else_t, .. } => Ok(Process::Choice(
            Box::new(translate_tree_with(then_t, consts)?),
            Box::new(translate_tree_with(else_t, consts)?),
        )),
        ExecTree::Node { ev, next, .. } => {
            let cont = translate_tree_with(next, consts)?;
            match ev {
                Event::Ev(e) => Ok(Process::Event(Term::Sym(e.clone()), Box::new(cont))),
                Event::A2P(x) => Ok(Process::In(x.clone(), Box::new(cont))),
                Event::P2A(x) => Ok(Process::Out(Term::Sym(x.clone()), Box::new(cont))),
                Event::FCall(f, args, y) => {
                    let rhs = mk_app(f, args.iter().cloned().map(Term::Sym).collect())
                        .expect("event arity is checked at emission");
                    Ok(Process::Let {
                        pat: Term::Sym(y.clone()),
                        rhs,
                        then: Box::new(cont),
                        els: Box::new(Process::Nil),
                    })
                }
                Event::Assign(x, AssignRhs::Expr(e)) => Ok(Process::Let {
                    pat: Term::Sym(x.clone()),
                    rhs: translate_expr(e, consts)?,
                    then: Box::new(cont),
                    els: Box::new(Process::Nil),
                }),
                Event::Assign(x, AssignRhs::Term(t)) => Ok(Process::Let {
                    pat: Term::Sym(x.clone()),
                    rhs: t.clone(),
                    then: Box::new(cont),
                    els: Box::new(Process::Nil),
                }),
                Event::SFr(n) => Ok(Process::New(n.clone(), Box::new(cont))),
                Event::Loop => Ok(Process::Bang(Box::new(cont))),
                other => Err(SapicError::UntranslatableEvent(other.to_string())),
            }
        }
    }
}

/// Translates an execution-side trace into the process-side alphabet:
/// assignment payloads become terms, everything else is kept verbatim.
pub fn translate_trace(t: &[Event]) -> Result<Vec<Event>, SapicError> {
    let mut consts = ConstTable::new();
    t.iter()
        .map(|ev| match ev {
            Event::Assign(x, AssignRhs::Expr(e)) => Ok(Event::Assign(
                x.clone(),
                AssignRhs::Term(translate_expr(e, &mut consts)?),
            )),
            Event::Silent(_) | Event::Tau | Event::Alias(..) => {
                Err(SapicError::UntranslatableEvent(ev.to_string()))
            }
            other => Ok(other.clone()),
        })
        .collect()
}

/// Function symbols used by crypto-call lets in a tree; these decide which
/// lets replay as calls rather than assignments.
pub fn tree_signature(t: &ExecTree) -> Vec<FnSym> {
    fn go(t: &ExecTree, out: &mut Vec<FnSym>) {
        match t {
            ExecTree::Leaf => {}
            ExecTree::Node { ev, next, .. } => {
                if let Event::FCall(f, ..) = ev {
                    if !out.contains(f) {
                        out.push(f.clone());
                    }
                }
                go(next, out);
            }
            ExecTree::Branch { then_t, else_t, .. } => {
                go(then_t, out);
                go(else_t, out);
            }
        }
    }
    let mut out = Vec::new();
    go(t, &mut out);
    out.sort();
    out
}

// ---------------------------------------------------------------------
// Pretty printer and parser
// ---------------------------------------------------------------------

const LVL_PAR: u8 = 0;
const LVL_CHOICE: u8 = 1;
const LVL_PREFIX: u8 = 2;

/// Deterministic single-line rendering; `parse_process` reads it back.
pub fn pretty_print(p: &Process) -> String {
    let mut out = String::new();
    pp(p, LVL_PAR, &mut out);
    out
}

fn pp(p: &Process, need: u8, out: &mut String) {
    let wrap = |lvl: u8| lvl < need;
    match p {
        Process::Nil => out.push('0'),
        Process::Par(a, b) => {
            let w = wrap(LVL_PAR);
            if w {
                out.push('(');
            }
            pp(a, LVL_CHOICE, out);
            out.push_str(" | ");
            pp(b, LVL_PAR, out);
            if w {
                out.push(')');
            }
        }
        Process::Choice(a, b) => {
            let w = wrap(LVL_CHOICE);
            if w {
                out.push('(');
            }
            pp(a, LVL_PREFIX, out);
            out.push_str(" + ");
            pp(b, LVL_CHOICE, out);
            if w {
                out.push(')');
            }
        }
        Process::Bang(inner) => {
            out.push('!');
            match inner.as_ref() {
                Process::Nil => out.push('0'),
                p @ (Process::Par(..) | Process::Choice(..)) => {
                    out.push('(');
                    pp(p, LVL_PAR, out);
                    out.push(')');
                }
                p => pp(p, LVL_PREFIX, out),
            }
        }
        Process::New(n, cont) => {
            out.push_str(&format!("new {n}"));
            pp_cont(cont, out);
        }
        Process::In(x, cont) => {
            out.push_str(&format!("in({x})"));
            pp_cont(cont, out);
        }
        Process::Out(t, cont) => {
            out.push_str(&format!("out({t})"));
            pp_cont(cont, out);
        }
        Process::Event(e, cont) => {
            out.push_str(&format!("event {e}"));
            pp_cont(cont, out);
        }
        Process::Let {
            pat,
            rhs,
            then,
            els,
        } => {
            out.push_str(&format!("let {pat} = {rhs} in "));
            pp(then, LVL_PREFIX, out);
            if els.as_ref() != &Process::Nil {
                out.push_str(" else ");
                pp(els, LVL_PREFIX, out);
            }
        }
    }
}

fn pp_cont(cont: &Process, out: &mut String) {
    if cont == &Process::Nil {
        return;
    }
    out.push_str("; ");
    pp(cont, LVL_PREFIX, out);
}

struct ProcParser<'a> {
    src: &'a str,
    pos: usize,
    names: NameTable,
    sig: Vec<FnSym>,
}

impl<'a> ProcParser<'a> {
    fn err(&self, msg: impl Into<String>) -> SapicError {
        SapicError::Parse {
            pos: self.pos,
            msg: msg.into(),
        }
    }

    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    fn skip_ws(&mut self) {
        let n = self.rest().len() - self.rest().trim_start().len();
        self.pos += n;
    }

    fn eat(&mut self, tok: &str) -> bool {
        self.skip_ws();
        if self.rest().starts_with(tok) {
            self.pos += tok.len();
            true
        } else {
            false
        }
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        self.skip_ws();
        let r = self.rest();
        if let Some(after) = r.strip_prefix(kw) {
            if after
                .chars()
                .next()
                .map(|c| !c.is_ascii_alphanumeric() && c != '_')
                .unwrap_or(true)
            {
                self.pos += kw.len();
                return true;
            }
        }
        false
    }

    fn ident(&mut self) -> Result<String, SapicError> {
        self.skip_ws();
        let r = self.rest();
        let n = r
            .char_indices()
            .take_while(|(_, c)| c.is_ascii_alphanumeric() || *c == '_' || *c == '\'')
            .last()
            .map(|(i, c)| i + c.len_utf8())
            .unwrap_or(0);
        if n == 0 {
            return Err(self.err("expected identifier"));
        }
        let s = r[..n].to_string();
        self.pos += n;
        Ok(s)
    }

    /// A term extends to the next top-level delimiter.
    fn term(&mut self, stops: &[&str]) -> Result<Term, SapicError> {
        self.skip_ws();
        let start = self.pos;
        let mut depth = 0i32;
        let bytes = self.src.as_bytes();
        while self.pos < self.src.len() {
            let r = self.rest();
            if depth == 0 {
                let boundary = stops.iter().any(|s| {
                    if !r.starts_with(s) {
                        return false;
                    }
                    if s.chars().all(|c| c.is_ascii_alphabetic()) {
                        // Keyword stops need a word boundary on both sides.
                        let before_ok = self.pos == start
                            || !bytes[self.pos - 1].is_ascii_alphanumeric();
                        let after = &r[s.len()..];
                        let after_ok = after
                            .chars()
                            .next()
                            .map(|c| !c.is_ascii_alphanumeric() && c != '_')
                            .unwrap_or(true);
                        before_ok && after_ok
                    } else {
                        true
                    }
                });
                if boundary {
                    break;
                }
            }
            let c = r.chars().next().unwrap();
            match c {
                '(' => depth += 1,
                ')' => {
                    if depth == 0 {
                        break;
                    }
                    depth -= 1;
                }
                _ => {}
            }
            self.pos += c.len_utf8();
        }
        let text = self.src[start..self.pos].trim();
        if text.is_empty() {
            return Err(self.err("expected term"));
        }
        crate::terms::parse_term(text, &self.names, &self.sig).map_err(|e| SapicError::Parse {
            pos: start,
            msg: e.to_string(),
        })
    }

    fn parse_par(&mut self) -> Result<Process, SapicError> {
        let first = self.parse_choice()?;
        if self.eat("|") {
            let rest = self.parse_par()?;
            return Ok(Process::Par(Box::new(first), Box::new(rest)));
        }
        Ok(first)
    }

    fn parse_choice(&mut self) -> Result<Process, SapicError> {
        let first = self.parse_seq()?;
        self.skip_ws();
        if self.rest().starts_with('+') {
            self.pos += 1;
            let rest = self.parse_choice()?;
            return Ok(Process::Choice(Box::new(first), Box::new(rest)));
        }
        Ok(first)
    }

    fn parse_cont(&mut self) -> Result<Process, SapicError> {
        if self.eat(";") {
            self.parse_seq()
        } else {
            Ok(Process::Nil)
        }
    }

    fn parse_seq(&mut self) -> Result<Process, SapicError> {
        self.skip_ws();
        if self.eat_kw("new") {
            let id = self.ident()?;
            let name = Name::private(id);
            self.names.declare(name.clone());
            let cont = self.parse_cont()?;
            return Ok(Process::New(name, Box::new(cont)));
        }
        if self.eat_kw("in") {
            if !self.eat("(") {
                return Err(self.err("expected `(` after in"));
            }
            let id = self.ident()?;
            if !self.eat(")") {
                return Err(self.err("expected `)`"));
            }
            let cont = self.parse_cont()?;
            return Ok(Process::In(Symbol::new(id), Box::new(cont)));
        }
        if self.eat_kw("out") {
            if !self.eat("(") {
                return Err(self.err("expected `(` after out"));
            }
            let t = self.term(&[")"])?;
            if !self.eat(")") {
                return Err(self.err("expected `)`"));
            }
            let cont = self.parse_cont()?;
            return Ok(Process::Out(t, Box::new(cont)));
        }
        if self.eat_kw("event") {
            let t = self.term(&[";", ")", "+", "|"])?;
            let cont = self.parse_cont()?;
            return Ok(Process::Event(t, Box::new(cont)));
        }
        if self.eat_kw("let") {
            let pat = self.term(&["="])?;
            if !self.eat("=") {
                return Err(self.err("expected `=` in let"));
            }
            let rhs = self.term(&["in"])?;
            if !self.eat_kw("in") {
                return Err(self.err("expected `in`"));
            }
            let then = self.parse_seq()?;
            let els = if self.eat_kw("else") {
                self.parse_seq()?
            } else {
                Process::Nil
            };
            return Ok(Process::Let {
                pat,
                rhs,
                then: Box::new(then),
                els: Box::new(els),
            });
        }
        if self.eat("!") {
            let inner = self.parse_atom()?;
            return Ok(Process::Bang(Box::new(inner)));
        }
        self.parse_atom()
    }

    fn parse_atom(&mut self) -> Result<Process, SapicError> {
        self.skip_ws();
        if self.eat("0") {
            return Ok(Process::Nil);
        }
        if self.eat("(") {
            let p = self.parse_par()?;
            if !self.eat(")") {
                return Err(self.err("expected `)`"));
            }
            return Ok(p);
        }
        self.parse_seq()
    }
}

/// Parses the pretty-printed process syntax. `names` declares free names
/// (for instance from a signature header); `new`-bound identifiers become
/// private names, applications use `sig` arities.
pub fn parse_process(
    src: &str,
    names: &NameTable,
    sig: &[FnSym],
) -> Result<Process, SapicError> {
    let mut p = ProcParser {
        src,
        pos: 0,
        names: names.clone(),
        sig: sig.to_vec(),
    };
    let proc = p.parse_par()?;
    p.skip_ws();
    if p.pos != p.src.len() {
        return Err(p.err("trailing input after process"));
    }
    Ok(proc)
}

// ---------------------------------------------------------------------
// Trace semantics
// ---------------------------------------------------------------------

/// A running process instance.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
enum RProc {
    Run(Process),
    /// A replication with its remaining unfold budget.
    Repl(Process, u32),
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct SapicInner {
    procs: Vec<RProc>,
    names_used: BTreeSet<String>,
}

pub type SapicState = SymState<SapicInner, SapicPred>;

/// The process as a symbolic LTS over the shared event alphabet.
#[derive(Debug, Clone)]
pub struct SapicLts {
    pub proc: Process,
    /// Crypto functions whose lets replay as calls.
    pub sig: Vec<FnSym>,
    pub repl_budget: u32,
}

impl SapicLts {
    pub fn new(proc: Process, sig: Vec<FnSym>, repl_budget: u32) -> Self {
        SapicLts {
            proc,
            sig,
            repl_budget,
        }
    }

    /// Convenience constructor for a translated tree.
    pub fn for_tree(tree: &ExecTree, repl_budget: u32) -> Result<Self, SapicError> {
        Ok(SapicLts::new(
            translate_tree(tree)?,
            tree_signature(tree),
            repl_budget,
        ))
    }

    fn spawn(&self, p: Process, procs: &mut Vec<RProc>) {
        match p {
            Process::Nil => {}
            Process::Par(a, b) => {
                self.spawn(*a, procs);
                self.spawn(*b, procs);
            }
            Process::Bang(q) => procs.push(RProc::Repl(*q, self.repl_budget)),
            other => procs.push(RProc::Run(other)),
        }
    }

    fn with_procs(&self, base: &SapicState, procs: Vec<RProc>) -> SapicState {
        let mut inner = base.inner.clone();
        inner.procs = procs;
        inner.procs.sort();
        SymState::new(base.sigma.clone(), base.pi.clone(), inner)
    }

    /// Replaces entry `i` with the spawn of `p`.
    fn replace(&self, base: &SapicState, i: usize, p: Process) -> SapicState {
        let mut procs = base.inner.procs.clone();
        procs.remove(i);
        self.spawn(p, &mut procs);
        self.with_procs(base, procs)
    }

    fn step_entry(
        &self,
        s: &SapicState,
        i: usize,
        incoming: Option<&Symbol>,
        out: &mut Vec<(Event, SapicState)>,
    ) {
        match s.inner.procs[i].clone() {
            RProc::Repl(q, budget) => {
                if budget > 0 {
                    let mut procs = s.inner.procs.clone();
                    procs[i] = RProc::Repl(q.clone(), budget - 1);
                    let mut next = self.with_procs(s, procs);
                    let mut procs2 = next.inner.procs.clone();
                    self.spawn(q, &mut procs2);
                    next = self.with_procs(&next, procs2);
                    out.push((Event::Loop, next));
                }
            }
            RProc::Run(p) => match p {
                Process::Nil | Process::Par(..) | Process::Bang(..) => {
                    unreachable!("normalized away at spawn")
                }
                Process::Choice(a, b) => {
                    let left = self.replace(s, i, *a);
                    let right = self.replace(s, i, *b);
                    self.successors_with(&left, incoming, out);
                    self.successors_with(&right, incoming, out);
                }
                Process::In(x, cont) => {
                    let (bound, sigma) = match incoming {
                        Some(given) => {
                            let mut sigma = s.sigma.clone();
                            sigma.insert(given.clone());
                            (given.clone(), sigma)
                        }
                        None => mint_named(&s.sigma, x.id()),
                    };
                    let cont = subst_sym_proc(&cont, &x, &bound);
                    let mut next = self.replace(s, i, cont);
                    next.sigma = sigma;
                    out.push((Event::A2P(bound), next));
                }
                Process::Out(t, cont) => match &t {
                    Term::Sym(x) => {
                        let mut next = self.replace(s, i, (*cont).clone());
                        next.sigma.insert(x.clone());
                        out.push((Event::P2A(x.clone()), next));
                    }
                    composite => {
                        let (alias, sigma) = mint_named(&s.sigma, "a");
                        let mut next = self.replace(s, i, (*cont).clone());
                        next.sigma = sigma;
                        next.pi
                            .insert(SapicPred::LetEq(alias.clone(), composite.clone()));
                        out.push((Event::P2A(alias), next));
                    }
                },
                Process::Event(t, cont) => {
                    if let Term::Sym(e) = &t {
                        let mut next = self.replace(s, i, (*cont).clone());
                        next.sigma.insert(e.clone());
                        out.push((Event::Ev(e.clone()), next));
                    }
                }
                Process::New(n, cont) => {
                    let id = mint_name_from(&s.inner.names_used, n.text());
                    let fresh = Name::private(id.clone());
                    let cont = subst_name_proc(&cont, &n, &fresh);
                    let mut next = self.replace(s, i, cont);
                    next.inner.names_used.insert(id);
                    out.push((Event::SFr(fresh), next));
                }
                Process::Let {
                    pat,
                    rhs,
                    then,
                    els: _,
                } => {
                    let Term::Sym(y) = &pat else {
                        return;
                    };
                    let (bound, sigma) = mint_named(&s.sigma, y.id());
                    let then = subst_sym_proc(&then, y, &bound);
                    let mut next = self.replace(s, i, then);
                    next.sigma = sigma;
                    next.pi.insert(SapicPred::LetEq(bound.clone(), rhs.clone()));
                    let call_args = match &rhs {
                        Term::App(f, args) if self.sig.contains(f) => {
                            let syms: Option<Vec<Symbol>> = args
                                .iter()
                                .map(|a| match a {
                                    Term::Sym(s) => Some(s.clone()),
                                    _ => None,
                                })
                                .collect();
                            syms.map(|xs| (f.clone(), xs))
                        }
                        _ => None,
                    };
                    match call_args {
                        Some((f, xs)) => out.push((Event::FCall(f, xs, bound), next)),
                        None => out.push((
                            Event::Assign(bound, AssignRhs::Term(rhs.clone())),
                            next,
                        )),
                    }
                }
            },
        }
    }

    fn successors_with(
        &self,
        s: &SapicState,
        incoming: Option<&Symbol>,
        out: &mut Vec<(Event, SapicState)>,
    ) {
        for i in 0..s.inner.procs.len() {
            self.step_entry(s, i, incoming, out);
        }
    }
}

fn mint_name_from(used: &BTreeSet<String>, hint: &str) -> String {
    if !used.contains(hint) {
        return hint.to_string();
    }
    let mut n = 0usize;
    loop {
        let cand = format!("{hint}{n}");
        if !used.contains(&cand) {
            return cand;
        }
        n += 1;
    }
}

fn subst_sym_term(t: &Term, from: &Symbol, to: &Symbol) -> Term {
    match t {
        Term::Sym(s) if s == from => Term::Sym(to.clone()),
        Term::App(f, args) => Term::App(
            f.clone(),
            args.iter().map(|a| subst_sym_term(a, from, to)).collect(),
        ),
        other => other.clone(),
    }
}

fn subst_sym_proc(p: &Process, from: &Symbol, to: &Symbol) -> Process {
    if from == to {
        return p.clone();
    }
    match p {
        Process::Nil => Process::Nil,
        Process::In(x, cont) => {
            if x == from {
                // Shadowed.
                Process::In(x.clone(), cont.clone())
            } else {
                Process::In(x.clone(), Box::new(subst_sym_proc(cont, from, to)))
            }
        }
        Process::Out(t, cont) => Process::Out(
            subst_sym_term(t, from, to),
            Box::new(subst_sym_proc(cont, from, to)),
        ),
        Process::Event(t, cont) => Process::Event(
            subst_sym_term(t, from, to),
            Box::new(subst_sym_proc(cont, from, to)),
        ),
        Process::Let {
            pat,
            rhs,
            then,
            els,
        } => {
            let rhs = subst_sym_term(rhs, from, to);
            let els = Box::new(subst_sym_proc(els, from, to));
            if pat == &Term::Sym(from.clone()) {
                Process::Let {
                    pat: pat.clone(),
                    rhs,
                    then: then.clone(),
                    els,
                }
            } else {
                Process::Let {
                    pat: pat.clone(),
                    rhs,
                    then: Box::new(subst_sym_proc(then, from, to)),
                    els,
                }
            }
        }
        Process::New(n, cont) => {
            Process::New(n.clone(), Box::new(subst_sym_proc(cont, from, to)))
        }
        Process::Bang(q) => Process::Bang(Box::new(subst_sym_proc(q, from, to))),
        Process::Par(a, b) => Process::Par(
            Box::new(subst_sym_proc(a, from, to)),
            Box::new(subst_sym_proc(b, from, to)),
        ),
        Process::Choice(a, b) => Process::Choice(
            Box::new(subst_sym_proc(a, from, to)),
            Box::new(subst_sym_proc(b, from, to)),
        ),
    }
}

fn subst_name_term(t: &Term, from: &Name, to: &Name) -> Term {
    match t {
        Term::Name(n) if n == from => Term::Name(to.clone()),
        Term::App(f, args) => Term::App(
            f.clone(),
            args.iter().map(|a| subst_name_term(a, from, to)).collect(),
        ),
        other => other.clone(),
    }
}

fn subst_name_proc(p: &Process, from: &Name, to: &Name) -> Process {
    if from == to {
        return p.clone();
    }
    match p {
        Process::Nil => Process::Nil,
        Process::In(x, cont) => {
            Process::In(x.clone(), Box::new(subst_name_proc(cont, from, to)))
        }
        Process::Out(t, cont) => Process::Out(
            subst_name_term(t, from, to),
            Box::new(subst_name_proc(cont, from, to)),
        ),
        Process::Event(t, cont) => Process::Event(
            subst_name_term(t, from, to),
            Box::new(subst_name_proc(cont, from, to)),
        ),
        Process::Let {
            pat,
            rhs,
            then,
            els,
        } => Process::Let {
            pat: pat.clone(),
            rhs: subst_name_term(rhs, from, to),
            then: Box::new(subst_name_proc(then, from, to)),
            els: Box::new(subst_name_proc(els, from, to)),
        },
        Process::New(n, cont) => {
            if n == from {
                Process::New(n.clone(), cont.clone())
            } else {
                Process::New(n.clone(), Box::new(subst_name_proc(cont, from, to)))
            }
        }
        Process::Bang(q) => Process::Bang(Box::new(subst_name_proc(q, from, to))),
        Process::Par(a, b) => Process::Par(
            Box::new(subst_name_proc(a, from, to)),
            Box::new(subst_name_proc(b, from, to)),
        ),
        Process::Choice(a, b) => Process::Choice(
            Box::new(subst_name_proc(a, from, to)),
            Box::new(subst_name_proc(b, from, to)),
        ),
    }
}

impl Slts for SapicLts {
    type Inner = SapicInner;
    type Pred = SapicPred;

    fn initial(&self) -> SapicState {
        let mut procs = Vec::new();
        self.spawn(self.proc.clone(), &mut procs);
        procs.sort();
        SymState::new(
            SymbolSet::new(),
            BTreeSet::new(),
            SapicInner {
                procs,
                names_used: BTreeSet::new(),
            },
        )
    }

    fn successors(&self, s: &SapicState) -> Vec<(Event, SapicState)> {
        let mut out = Vec::new();
        self.successors_with(s, None, &mut out);
        out.sort();
        out.dedup();
        out
    }

    fn accept(&self, s: &SapicState, ev: &Event) -> Vec<SapicState> {
        match ev {
            Event::A2P(x) => {
                let mut all = Vec::new();
                self.successors_with(s, Some(x), &mut all);
                all.into_iter()
                    .filter(|(e, _)| e == ev)
                    .map(|(_, s2)| s2)
                    .collect()
            }
            _ => self
                .successors(s)
                .into_iter()
                .filter(|(e, _)| e == ev)
                .map(|(_, s2)| s2)
                .collect(),
        }
    }

    fn sync_tags(&self) -> BTreeSet<EventTag> {
        [EventTag::SFr, EventTag::A2P, EventTag::P2A, EventTag::FCall]
            .into_iter()
            .collect()
    }
}

/// Checks that every translated path of the tree is a trace of the
/// translated process at matched budgets.
pub fn check_trace_inclusion(
    tree: &ExecTree,
    repl_budget: u32,
) -> Result<crate::compose::CheckReport, SapicError> {
    let lts = SapicLts::for_tree(tree, repl_budget)?;
    let paths = tree.paths();
    let depth = paths.iter().map(|p| p.len()).max().unwrap_or(0);
    let traces = crate::symbolic::enumerate_traces(
        &lts,
        crate::symbolic::Limits::new(depth, 0),
    )
    .map_err(|e| SapicError::Parse {
        pos: 0,
        msg: e.to_string(),
    })?;
    for path in &paths {
        let translated = translate_trace(path)?;
        if !traces.contains(&translated) {
            return Ok(crate::compose::CheckReport::fail(
                "trace-inclusion",
                crate::symbolic::format_trace_inline(&translated),
            ));
        }
    }
    Ok(crate::compose::CheckReport::pass("trace-inclusion")
        .with_detail(format!("{} paths checked", paths.len())))
}
