//! Crypto-aware symbolic execution of BIR programs.
//!
//! Execution keeps the program counter concrete, maps registers to symbolic
//! expressions, and maintains a path condition plus a predicate set of
//! per-statement equalities, declared constants, and crypto-call aliases.
//! Configured jump targets act as crypto or network calls and emit the
//! corresponding synchronizing events. The same step machinery backs both
//! execution-tree construction and the symbolic-LTS view.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::bir::{apply_binop, apply_unop, BinOp, BirExpr, BirProgram, BirStmt, Bval, Pc, UnOp};
use crate::symbolic::{
    mint_named, Event, EventTag, SymState, SymbolSet, Slts, Symbol,
};
use crate::terms::{mk_app, FnSym, Name, Term};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SbirError {
    #[error("jump target {0} is neither a block nor a configured label")]
    UnmappedExternalJump(String),
    #[error("jump target `{0}` does not evaluate to a label")]
    IllegalJumpTarget(String),
    #[error("state budget exceeded while building the tree ({0} nodes)")]
    StateBudgetExceeded(usize),
    #[error("no node with program counter {0} in the tree")]
    PcNotFound(String),
    #[error("register `{0}` used by a call has no value")]
    MissingRegister(String),
}

/// A symbolic expression: a BIR expression whose leaves may also be
/// symbols or fresh names.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum SymExpr {
    Const(Bval),
    Var(String),
    Sym(Symbol),
    Name(Name),
    Unop(UnOp, Box<SymExpr>),
    Binop(BinOp, Box<SymExpr>, Box<SymExpr>),
}

impl SymExpr {
    pub fn sym(s: impl Into<String>) -> Self {
        SymExpr::Sym(Symbol::new(s))
    }

    pub fn int(v: u64) -> Self {
        SymExpr::Const(Bval::Int(v))
    }

    pub fn from_bir(e: &BirExpr) -> Self {
        match e {
            BirExpr::Const(v) => SymExpr::Const(v.clone()),
            BirExpr::Var(x) => SymExpr::Var(x.clone()),
            BirExpr::Unop(op, a) => SymExpr::Unop(op.clone(), Box::new(Self::from_bir(a))),
            BirExpr::Binop(op, a, b) => SymExpr::Binop(
                *op,
                Box::new(Self::from_bir(a)),
                Box::new(Self::from_bir(b)),
            ),
        }
    }

    pub fn subexprs(&self) -> Vec<&SymExpr> {
        let mut out = Vec::new();
        let mut stack = vec![self];
        while let Some(e) = stack.pop() {
            out.push(e);
            match e {
                SymExpr::Unop(_, a) => stack.push(a),
                SymExpr::Binop(_, a, b) => {
                    stack.push(a);
                    stack.push(b);
                }
                _ => {}
            }
        }
        out
    }

    /// Symbol leaves.
    pub fn symbols(&self) -> BTreeSet<Symbol> {
        let mut out = BTreeSet::new();
        for e in self.subexprs() {
            if let SymExpr::Sym(s) = e {
                out.insert(s.clone());
            }
        }
        out
    }

    /// Leaves the attacker could come to know: symbols and private names,
    /// as terms.
    pub fn knowables(&self) -> BTreeSet<Term> {
        let mut out = BTreeSet::new();
        for e in self.subexprs() {
            match e {
                SymExpr::Sym(s) => {
                    out.insert(Term::Sym(s.clone()));
                }
                SymExpr::Name(n) if !n.is_public() => {
                    out.insert(Term::Name(n.clone()));
                }
                _ => {}
            }
        }
        out
    }

    /// Whether every leaf is a literal constant.
    pub fn is_literal(&self) -> bool {
        self.subexprs()
            .iter()
            .all(|e| matches!(e, SymExpr::Const(_) | SymExpr::Unop(..) | SymExpr::Binop(..)))
    }

    /// Constant folding. Returns `Const` whenever the expression has no
    /// symbolic leaves and evaluates without error.
    pub fn fold(&self) -> SymExpr {
        match self {
            SymExpr::Unop(op, a) => {
                let fa = a.fold();
                if let SymExpr::Const(v) = &fa {
                    if let Ok(res) = apply_unop(op, v) {
                        return SymExpr::Const(res);
                    }
                }
                SymExpr::Unop(op.clone(), Box::new(fa))
            }
            SymExpr::Binop(op, a, b) => {
                let fa = a.fold();
                let fb = b.fold();
                if let (SymExpr::Const(va), SymExpr::Const(vb)) = (&fa, &fb) {
                    if let Ok(res) = apply_binop(*op, va, vb) {
                        return SymExpr::Const(res);
                    }
                }
                SymExpr::Binop(*op, Box::new(fa), Box::new(fb))
            }
            _ => self.clone(),
        }
    }

    pub fn negate(&self) -> SymExpr {
        SymExpr::Unop(UnOp::Not, Box::new(self.clone()))
    }

    fn fmt_prec(&self, f: &mut fmt::Formatter<'_>, outer: u8) -> fmt::Result {
        match self {
            SymExpr::Const(v) => write!(f, "{v}"),
            SymExpr::Var(x) => write!(f, "{x}"),
            SymExpr::Sym(s) => write!(f, "{s}"),
            SymExpr::Name(n) => write!(f, "{n}"),
            SymExpr::Unop(UnOp::Not, e) => {
                write!(f, "!")?;
                e.fmt_prec(f, 10)
            }
            SymExpr::Unop(UnOp::Named(n), e) => {
                write!(f, "{n}(")?;
                e.fmt_prec(f, 0)?;
                write!(f, ")")
            }
            SymExpr::Binop(op, l, r) => {
                let p = binop_prec(*op);
                if p < outer {
                    write!(f, "(")?;
                }
                l.fmt_prec(f, p)?;
                write!(f, " {} ", op.token())?;
                r.fmt_prec(f, p + 1)?;
                if p < outer {
                    write!(f, ")")?;
                }
                Ok(())
            }
        }
    }
}

fn binop_prec(op: BinOp) -> u8 {
    match op {
        BinOp::Eq => 1,
        BinOp::Xor => 2,
        BinOp::Concat => 3,
        BinOp::Add => 4,
        BinOp::Mul => 5,
    }
}

impl fmt::Display for SymExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_prec(f, 0)
    }
}

/// Facts collected by symbolic execution.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum SbirPred {
    /// `x ≐ e`: the symbol minted for an assignment equals its expression.
    Eq(Symbol, SymExpr),
    /// `const e`: the expression denotes a value knowable in advance.
    Const(SymExpr),
    /// `y ↦ f(xs)`: a crypto-call output aliases a term.
    Alias(Symbol, Term),
}

impl fmt::Display for SbirPred {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SbirPred::Eq(x, e) => write!(f, "{x} \u{2250} {e}"),
            SbirPred::Const(e) => write!(f, "const {e}"),
            SbirPred::Alias(x, t) => write!(f, "{x} \u{21a6} {t}"),
        }
    }
}

/// What a configured jump target means.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Role {
    Rng { name_hint: String },
    Send { reg: String },
    Recv { reg: String },
    Event { name: String },
    Fn { sym: FnSym, out_hint: String },
}

/// Label roles, the crypto signature they imply, and declared constant
/// operators.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CryptoConfig {
    pub roles: BTreeMap<Bval, Role>,
    pub const_ops: BTreeSet<String>,
}

impl CryptoConfig {
    pub fn signature(&self) -> Vec<FnSym> {
        let mut sig: Vec<FnSym> = self
            .roles
            .values()
            .filter_map(|r| match r {
                Role::Fn { sym, .. } => Some(sym.clone()),
                _ => None,
            })
            .collect();
        sig.sort();
        sig.dedup();
        sig
    }
}

/// Component-local execution state.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct SbirInner {
    pub pc: Option<Pc>,
    pub env: BTreeMap<String, SymExpr>,
    /// Path condition, as a conjunction.
    pub phi: BTreeSet<SymExpr>,
    seen: BTreeSet<Pc>,
    unroll_left: u32,
    names_used: BTreeSet<String>,
}

pub type SbirState = SymState<SbirInner, SbirPred>;

/// Execution tree: event nodes, branch nodes, leaves.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ExecTree {
    Leaf,
    Node {
        pc: Pc,
        ev: Event,
        next: Box<ExecTree>,
    },
    Branch {
        pc: Pc,
        cond: SymExpr,
        then_t: Box<ExecTree>,
        else_t: Box<ExecTree>,
    },
}

impl ExecTree {
    pub fn node_count(&self) -> usize {
        match self {
            ExecTree::Leaf => 1,
            ExecTree::Node { next, .. } => 1 + next.node_count(),
            ExecTree::Branch { then_t, else_t, .. } => 1 + then_t.node_count() + else_t.node_count(),
        }
    }

    /// All root-to-leaf event sequences.
    pub fn paths(&self) -> Vec<Vec<Event>> {
        match self {
            ExecTree::Leaf => vec![Vec::new()],
            ExecTree::Node { ev, next, .. } => next
                .paths()
                .into_iter()
                .map(|mut p| {
                    p.insert(0, ev.clone());
                    p
                })
                .collect(),
            ExecTree::Branch { then_t, else_t, .. } => {
                let mut out = then_t.paths();
                out.extend(else_t.paths());
                out
            }
        }
    }

    /// Prefix closure of `paths()`: the tree's trace set.
    pub fn traces(&self) -> BTreeSet<Vec<Event>> {
        let mut out = BTreeSet::new();
        for p in self.paths() {
            for i in 0..=p.len() {
                out.insert(p[..i].to_vec());
            }
        }
        out
    }

    /// Graph description text for visualization: one node per line, then
    /// the parent-child edges.
    pub fn to_graph_text(&self) -> String {
        fn label(t: &ExecTree) -> String {
            match t {
                ExecTree::Leaf => "Leaf".into(),
                ExecTree::Node { pc, ev, .. } => format!("{}:{} {}", pc.0, pc.1, ev),
                ExecTree::Branch { pc, cond, .. } => format!("{}:{} branch {}", pc.0, pc.1, cond),
            }
        }
        fn walk(t: &ExecTree, id: usize, next_id: &mut usize, nodes: &mut Vec<String>, edges: &mut Vec<(usize, usize)>) {
            nodes.push(format!("n{} [{}]", id, label(t)));
            match t {
                ExecTree::Leaf => {}
                ExecTree::Node { next, .. } => {
                    let c = *next_id;
                    *next_id += 1;
                    edges.push((id, c));
                    walk(next, c, next_id, nodes, edges);
                }
                ExecTree::Branch { then_t, else_t, .. } => {
                    let a = *next_id;
                    *next_id += 1;
                    edges.push((id, a));
                    walk(then_t, a, next_id, nodes, edges);
                    let b = *next_id;
                    *next_id += 1;
                    edges.push((id, b));
                    walk(else_t, b, next_id, nodes, edges);
                }
            }
        }
        let mut nodes = Vec::new();
        let mut edges = Vec::new();
        let mut next_id = 1;
        walk(self, 0, &mut next_id, &mut nodes, &mut edges);
        let mut out = nodes.join("\n");
        out.push('\n');
        for (a, b) in edges {
            out.push_str(&format!("n{a} -> n{b}\n"));
        }
        out
    }
}

/// First node in preorder whose program counter matches.
pub fn tree_select<'t>(t: &'t ExecTree, pc: &Pc) -> Result<&'t ExecTree, SbirError> {
    fn go<'t>(t: &'t ExecTree, pc: &Pc) -> Option<&'t ExecTree> {
        match t {
            ExecTree::Leaf => None,
            ExecTree::Node { pc: p, next, .. } => {
                if p == pc {
                    Some(t)
                } else {
                    go(next, pc)
                }
            }
            ExecTree::Branch {
                pc: p,
                then_t,
                else_t,
                ..
            } => {
                if p == pc {
                    Some(t)
                } else {
                    go(then_t, pc).or_else(|| go(else_t, pc))
                }
            }
        }
    }
    go(t, pc).ok_or_else(|| SbirError::PcNotFound(format!("{}:{}", pc.0, pc.1)))
}

/// One resolved step of the executor.
enum Step {
    Halt,
    Emit {
        pc: Pc,
        ev: Event,
        next: SbirState,
    },
    Branch {
        pc: Pc,
        cond: SymExpr,
        then_s: SbirState,
        else_s: SbirState,
    },
    Silent(SbirState),
}

/// The symbolic-LTS view of a configured BIR program.
#[derive(Debug, Clone)]
pub struct SbirLts {
    pub program: BirProgram,
    pub cfg: CryptoConfig,
    pub unroll: u32,
}

impl SbirLts {
    pub fn new(program: BirProgram, cfg: CryptoConfig, unroll: u32) -> Self {
        SbirLts {
            program,
            cfg,
            unroll,
        }
    }

    /// Checks that every constant jump target resolves to a block or a
    /// configured label.
    pub fn validate(&self) -> Result<(), SbirError> {
        for (_, stmts) in self.program.blocks() {
            for s in stmts {
                let targets: Vec<&BirExpr> = match s {
                    BirStmt::Jmp(t) => vec![t],
                    BirStmt::Cjmp(_, a, b) => vec![a, b],
                    _ => vec![],
                };
                for t in targets {
                    if let BirExpr::Const(label) = t {
                        if !self.program.has_block(label) && !self.cfg.roles.contains_key(label) {
                            return Err(SbirError::UnmappedExternalJump(label.to_string()));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    fn eval(
        &self,
        e: &BirExpr,
        st: &mut SbirState,
    ) -> SymExpr {
        match e {
            BirExpr::Const(v) => SymExpr::Const(v.clone()),
            BirExpr::Var(x) => match st.inner.env.get(x) {
                Some(bound) => bound.clone(),
                None => {
                    // Unbound program variables are symbolic inputs.
                    let (s, sigma) = mint_named(&st.sigma, x);
                    st.sigma = sigma;
                    let expr = SymExpr::Sym(s);
                    st.inner.env.insert(x.clone(), expr.clone());
                    expr
                }
            },
            BirExpr::Unop(op, a) => SymExpr::Unop(op.clone(), Box::new(self.eval(a, st))),
            BirExpr::Binop(op, a, b) => SymExpr::Binop(
                *op,
                Box::new(self.eval(a, st)),
                Box::new(self.eval(b, st)),
            ),
        }
    }

    /// Adds `cond` to the path condition, unless folding or a syntactic
    /// negation refutes it.
    fn assume(phi: &BTreeSet<SymExpr>, cond: &SymExpr) -> Option<BTreeSet<SymExpr>> {
        let folded = cond.fold();
        if let SymExpr::Const(v) = &folded {
            if v.truthy() {
                return Some(phi.clone());
            }
            return None;
        }
        let neg = match &folded {
            SymExpr::Unop(UnOp::Not, inner) => (**inner).clone(),
            other => other.negate(),
        };
        if phi.contains(&neg) {
            return None;
        }
        let mut out = phi.clone();
        out.insert(folded);
        Some(out)
    }

    fn label_of(&self, e: &SymExpr, raw: &BirExpr) -> Result<Bval, SbirError> {
        match e.fold() {
            SymExpr::Const(v) => Ok(v),
            _ => Err(SbirError::IllegalJumpTarget(raw.to_string())),
        }
    }

    /// Ensures the register holds a bare symbol, aliasing composite values
    /// through a fresh symbol first. Returns the symbol and the state after
    /// the lookup, or the aliasing step to take before retrying.
    fn symbol_in_reg(
        &self,
        st: &SbirState,
        pc: &Pc,
        reg: &str,
    ) -> Result<(Symbol, SbirState), Box<Step>> {
        let mut after = st.clone();
        let expr = self.eval(&BirExpr::Var(reg.to_string()), &mut after);
        if let SymExpr::Sym(s) = &expr {
            return Ok((s.clone(), after));
        }
        let (alias, sigma) = mint_named(&after.sigma, reg);
        let mut next = after;
        next.sigma = sigma;
        next.pi.insert(SbirPred::Eq(alias.clone(), expr.clone()));
        next.inner
            .env
            .insert(reg.to_string(), SymExpr::Sym(alias.clone()));
        // The statement will be revisited once the alias is in place.
        next.inner.seen.remove(pc);
        Err(Box::new(Step::Emit {
            pc: pc.clone(),
            ev: Event::Assign(alias, crate::symbolic::AssignRhs::Expr(expr)),
            next,
        }))
    }

    fn role_step(
        &self,
        st: &SbirState,
        pc: &Pc,
        role: &Role,
        incoming: Option<&Symbol>,
    ) -> Result<Step, SbirError> {
        let advance = |mut s: SbirState| -> SbirState {
            s.inner.pc = self.program.advance(pc);
            s
        };
        match role {
            Role::Rng { name_hint } => {
                let mut next = st.clone();
                let id = mint_name(&next.inner.names_used, name_hint);
                next.inner.names_used.insert(id.clone());
                let name = Name::private(id);
                next.inner.env.insert("R0".into(), SymExpr::Name(name.clone()));
                Ok(Step::Emit {
                    pc: pc.clone(),
                    ev: Event::SFr(name),
                    next: advance(next),
                })
            }
            Role::Send { reg } => match self.symbol_in_reg(st, pc, reg) {
                Ok((sym, next)) => Ok(Step::Emit {
                    pc: pc.clone(),
                    ev: Event::P2A(sym),
                    next: advance(next),
                }),
                Err(step) => Ok(*step),
            },
            Role::Recv { reg } => {
                let mut next = st.clone();
                let x = match incoming {
                    Some(given) => {
                        next.sigma.insert(given.clone());
                        given.clone()
                    }
                    None => {
                        let (x, sigma) = mint_named(&next.sigma, "x");
                        next.sigma = sigma;
                        x
                    }
                };
                next.inner.env.insert(reg.clone(), SymExpr::Sym(x.clone()));
                Ok(Step::Emit {
                    pc: pc.clone(),
                    ev: Event::A2P(x),
                    next: advance(next),
                })
            }
            Role::Event { name } => {
                let mut next = st.clone();
                let (e, sigma) = mint_named(&next.sigma, name);
                next.sigma = sigma;
                Ok(Step::Emit {
                    pc: pc.clone(),
                    ev: Event::Ev(e),
                    next: advance(next),
                })
            }
            Role::Fn { sym, out_hint } => {
                let mut args = Vec::new();
                let mut cur = st.clone();
                for i in 0..sym.arity() {
                    let reg = format!("R{i}");
                    match self.symbol_in_reg(&cur, pc, &reg) {
                        Ok((s, after)) => {
                            args.push(s);
                            cur = after;
                        }
                        Err(step) => return Ok(*step),
                    }
                }
                let mut next = cur;
                let (y, sigma) = mint_named(&next.sigma, out_hint);
                next.sigma = sigma;
                let term_args = args.iter().cloned().map(Term::Sym).collect();
                let term = mk_app(sym, term_args).expect("arity checked by construction");
                next.pi.insert(SbirPred::Alias(y.clone(), term));
                next.inner.env.insert("R0".into(), SymExpr::Sym(y.clone()));
                Ok(Step::Emit {
                    pc: pc.clone(),
                    ev: Event::FCall(sym.clone(), args, y),
                    next: advance(next),
                })
            }
        }
    }

    fn explore(&self, st: &SbirState) -> Result<Step, SbirError> {
        self.explore_with(st, None)
    }

    fn explore_with(&self, st: &SbirState, incoming: Option<&Symbol>) -> Result<Step, SbirError> {
        let Some(pc) = st.inner.pc.clone() else {
            return Ok(Step::Halt);
        };
        if st.inner.seen.contains(&pc) {
            if st.inner.unroll_left == 0 {
                return Ok(Step::Halt);
            }
            let mut next = st.clone();
            next.inner.seen.clear();
            next.inner.unroll_left -= 1;
            return Ok(Step::Emit {
                pc,
                ev: Event::Loop,
                next,
            });
        }
        let mut st = st.clone();
        st.inner.seen.insert(pc.clone());
        let Some(stmt) = self.program.stmt_at(&pc).cloned() else {
            return Ok(Step::Halt);
        };
        match stmt {
            BirStmt::Halt => Ok(Step::Halt),
            BirStmt::Assign(x, e) => {
                let mut next = st.clone();
                let rhs = self.eval(&e, &mut next);
                let (xsym, sigma) = mint_named(&next.sigma, &x);
                next.sigma = sigma;
                next.pi.insert(SbirPred::Eq(xsym.clone(), rhs.clone()));
                next.inner.env.insert(x, SymExpr::Sym(xsym.clone()));
                next.inner.pc = self.program.advance(&pc);
                Ok(Step::Emit {
                    pc,
                    ev: Event::Assign(xsym, crate::symbolic::AssignRhs::Expr(rhs)),
                    next,
                })
            }
            BirStmt::Jmp(t) => {
                let mut scratch = st.clone();
                let te = self.eval(&t, &mut scratch);
                let label = self.label_of(&te, &t)?;
                if let Some(role) = self.cfg.roles.get(&label) {
                    return self.role_step(&scratch, &pc, &role.clone(), incoming);
                }
                if self.program.has_block(&label) {
                    let mut next = scratch;
                    next.inner.pc = Some((label, 0));
                    return Ok(Step::Silent(next));
                }
                Err(SbirError::UnmappedExternalJump(label.to_string()))
            }
            BirStmt::Cjmp(c, t1, t2) => {
                let mut scratch = st.clone();
                let cond = self.eval(&c, &mut scratch).fold();
                let l1 = self.label_of(&self.eval(&t1, &mut scratch), &t1)?;
                let l2 = self.label_of(&self.eval(&t2, &mut scratch), &t2)?;
                for l in [&l1, &l2] {
                    if !self.program.has_block(l) {
                        return Err(SbirError::UnmappedExternalJump(l.to_string()));
                    }
                }
                let then_phi = Self::assume(&scratch.inner.phi, &cond);
                let else_phi = Self::assume(&scratch.inner.phi, &cond.negate());
                let mk = |phi: BTreeSet<SymExpr>, label: Bval| -> SbirState {
                    let mut s = scratch.clone();
                    s.inner.phi = phi;
                    s.inner.pc = Some((label, 0));
                    s
                };
                match (then_phi, else_phi) {
                    (Some(tp), Some(ep)) => Ok(Step::Branch {
                        pc,
                        cond,
                        then_s: mk(tp, l1),
                        else_s: mk(ep, l2),
                    }),
                    (Some(tp), None) => Ok(Step::Silent(mk(tp, l1))),
                    (None, Some(ep)) => Ok(Step::Silent(mk(ep, l2))),
                    (None, None) => Ok(Step::Halt),
                }
            }
        }
    }

    pub fn initial_state(&self) -> SbirState {
        SymState::new(
            SymbolSet::new(),
            BTreeSet::new(),
            SbirInner {
                pc: Some(self.program.entry()),
                env: BTreeMap::new(),
                phi: BTreeSet::new(),
                seen: BTreeSet::new(),
                unroll_left: self.unroll,
                names_used: BTreeSet::new(),
            },
        )
    }

    /// Builds the execution tree by depth-first exploration. `max_events`
    /// bounds the events per path; `max_nodes` bounds total tree size.
    pub fn build_tree(&self, max_events: usize, max_nodes: usize) -> Result<ExecTree, SbirError> {
        self.validate()?;
        let mut nodes = 0usize;
        self.build_rec(&self.initial_state(), max_events, max_nodes, &mut nodes)
    }

    fn build_rec(
        &self,
        st: &SbirState,
        depth: usize,
        max_nodes: usize,
        nodes: &mut usize,
    ) -> Result<ExecTree, SbirError> {
        *nodes += 1;
        if *nodes > max_nodes {
            return Err(SbirError::StateBudgetExceeded(max_nodes));
        }
        match self.explore(st)? {
            Step::Halt => Ok(ExecTree::Leaf),
            Step::Emit { pc, ev, next } => {
                if depth == 0 {
                    return Ok(ExecTree::Leaf);
                }
                let sub = self.build_rec(&next, depth - 1, max_nodes, nodes)?;
                Ok(ExecTree::Node {
                    pc,
                    ev,
                    next: Box::new(sub),
                })
            }
            Step::Branch {
                pc,
                cond,
                then_s,
                else_s,
            } => {
                let a = self.build_rec(&then_s, depth, max_nodes, nodes)?;
                let b = self.build_rec(&else_s, depth, max_nodes, nodes)?;
                Ok(ExecTree::Branch {
                    pc,
                    cond,
                    then_t: Box::new(a),
                    else_t: Box::new(b),
                })
            }
            Step::Silent(next) => self.build_rec(&next, depth, max_nodes, nodes),
        }
    }

    fn visible_successors(&self, st: &SbirState, out: &mut Vec<(Event, SbirState)>) {
        match self.explore(st) {
            Ok(Step::Halt) | Err(_) => {}
            Ok(Step::Emit { ev, next, .. }) => out.push((ev, next)),
            Ok(Step::Branch { then_s, else_s, .. }) => {
                self.visible_successors(&then_s, out);
                self.visible_successors(&else_s, out);
            }
            Ok(Step::Silent(next)) => self.visible_successors(&next, out),
        }
    }

    /// Runs the silent closure until the next receive, binding the
    /// partner-supplied symbol instead of minting one.
    fn accept_recv(&self, st: &SbirState, x: &Symbol, out: &mut Vec<SbirState>) {
        let step = match self.explore_with(st, Some(x)) {
            Ok(s) => s,
            Err(_) => return,
        };
        match step {
            Step::Silent(next) => self.accept_recv(&next, x, out),
            Step::Branch { then_s, else_s, .. } => {
                self.accept_recv(&then_s, x, out);
                self.accept_recv(&else_s, x, out);
            }
            Step::Emit { ev, next, .. } => {
                if ev == Event::A2P(x.clone()) {
                    out.push(next);
                }
            }
            Step::Halt => {}
        }
    }
}

fn mint_name(used: &BTreeSet<String>, hint: &str) -> String {
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

impl Slts for SbirLts {
    type Inner = SbirInner;
    type Pred = SbirPred;

    fn initial(&self) -> SbirState {
        self.initial_state()
    }

    fn successors(&self, s: &SbirState) -> Vec<(Event, SbirState)> {
        let mut out = Vec::new();
        self.visible_successors(s, &mut out);
        out
    }

    fn accept(&self, s: &SbirState, ev: &Event) -> Vec<SbirState> {
        if let Event::A2P(x) = ev {
            let mut out = Vec::new();
            self.accept_recv(s, x, &mut out);
            return out;
        }
        self.successors(s)
            .into_iter()
            .filter(|(e, _)| e == ev)
            .map(|(_, s2)| s2)
            .collect()
    }

    fn deduce_step(&self, s: &SbirState) -> Vec<SbirPred> {
        let mut out = Vec::new();
        for p in &s.pi {
            let SbirPred::Eq(_, e) = p else { continue };
            for sub in e.subexprs() {
                let declared = matches!(sub, SymExpr::Unop(UnOp::Named(n), _) if self.cfg.const_ops.contains(n));
                let literal = matches!(sub.fold(), SymExpr::Const(_));
                if declared || literal {
                    let fact = SbirPred::Const(sub.clone());
                    if !s.pi.contains(&fact) {
                        out.push(fact);
                    }
                }
            }
        }
        out.sort();
        out.dedup();
        out
    }

    fn sync_tags(&self) -> BTreeSet<EventTag> {
        [EventTag::SFr, EventTag::A2P, EventTag::P2A, EventTag::FCall]
            .into_iter()
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bir::parse_program;

    pub fn fig5_program() -> BirProgram {
        parse_program(
            "block 0x0:\n  jmp(0x44)\n  assign(R1, var(R0))\n  assign(R0, m)\n  jmp(0x20)\n  jmp(0x04)\n  assign(R2, R1 ^ 0xdeadbeef)\n  jmp(0x05)\n  halt\n",
        )
        .unwrap()
    }

    pub fn fig5_cfg() -> CryptoConfig {
        let mut roles = BTreeMap::new();
        roles.insert(
            Bval::Int(0x44),
            Role::Rng {
                name_hint: "k".into(),
            },
        );
        roles.insert(
            Bval::Int(0x20),
            Role::Fn {
                sym: FnSym::new("senc", 2),
                out_hint: "c".into(),
            },
        );
        roles.insert(Bval::Int(0x04), Role::Send { reg: "R0".into() });
        roles.insert(Bval::Int(0x05), Role::Send { reg: "R2".into() });
        CryptoConfig {
            roles,
            const_ops: BTreeSet::new(),
        }
    }

    fn fig5_lts() -> SbirLts {
        SbirLts::new(fig5_program(), fig5_cfg(), 1)
    }

    #[test]
    fn fig5_tree_is_linear_with_seven_events() {
        let tree = fig5_lts().build_tree(64, 1024).unwrap();
        let paths = tree.paths();
        assert_eq!(paths.len(), 1);
        let evs: Vec<String> = paths[0].iter().map(|e| e.to_string()).collect();
        assert_eq!(
            evs,
            vec![
                "SFr(k)",
                "Assign(R1,k)",
                "Assign(R0,m)",
                "FCall(senc,R0,R1;c)",
                "P2A(c)",
                "Assign(R2,R1 ^ 0xdeadbeef)",
                "P2A(R2)",
            ]
        );
    }

    #[test]
    fn fig5_rng_and_fcall_steps() {
        let lts = fig5_lts();
        let s0 = lts.initial_state();
        let succ = lts.successors(&s0);
        assert_eq!(succ.len(), 1);
        assert_eq!(succ[0].0, Event::SFr(Name::private("k")));

        // Walk to the crypto call and check its alias predicate.
        let mut st = succ[0].1.clone();
        for _ in 0..3 {
            let next = lts.successors(&st);
            assert_eq!(next.len(), 1);
            st = next[0].1.clone();
        }
        let alias = st
            .pi
            .iter()
            .find(|p| matches!(p, SbirPred::Alias(..)))
            .expect("call installs an alias");
        assert_eq!(alias.to_string(), "c \u{21a6} senc(R0,R1)");
    }

    #[test]
    fn constant_condition_prunes_branch() {
        let p = parse_program(
            "block 0:\n  cjmp(0x0 == 0x0, 0x1, 0x2)\nblock 1:\n  halt\nblock 2:\n  assign(R9, 0x1)\n  halt\n",
        )
        .unwrap();
        let lts = SbirLts::new(p, CryptoConfig::default(), 1);
        let tree = lts.build_tree(16, 256).unwrap();
        assert_eq!(tree, ExecTree::Leaf);
    }

    #[test]
    fn symbolic_condition_branches() {
        let p = parse_program(
            "block 0:\n  cjmp(x, 0x1, 0x2)\nblock 1:\n  assign(R1, 0x1)\n  halt\nblock 2:\n  assign(R1, 0x2)\n  halt\n",
        )
        .unwrap();
        let lts = SbirLts::new(p, CryptoConfig::default(), 1);
        let tree = lts.build_tree(16, 256).unwrap();
        match &tree {
            ExecTree::Branch { cond, .. } => assert_eq!(cond.to_string(), "x"),
            other => panic!("expected branch, got {other:?}"),
        }
        assert_eq!(tree.paths().len(), 2);
    }

    #[test]
    fn back_edge_emits_loop_and_unrolls_once() {
        let p = parse_program(
            "block 0:\n  assign(R0, 0x1)\n  jmp(0x0)\n",
        )
        .unwrap();
        let lts = SbirLts::new(p, CryptoConfig::default(), 1);
        let tree = lts.build_tree(16, 256).unwrap();
        let paths = tree.paths();
        assert_eq!(paths.len(), 1);
        let tags: Vec<EventTag> = paths[0].iter().map(|e| e.tag()).collect();
        assert_eq!(
            tags,
            vec![EventTag::Assign, EventTag::Loop, EventTag::Assign]
        );
    }

    #[test]
    fn tree_select_finds_first_preorder_match() {
        let tree = fig5_lts().build_tree(64, 1024).unwrap();
        let node = tree_select(&tree, &(Bval::Int(0), 3)).unwrap();
        match node {
            ExecTree::Node { ev, .. } => assert_eq!(ev.tag(), EventTag::FCall),
            other => panic!("unexpected {other:?}"),
        }
        assert!(tree_select(&ExecTree::Leaf, &(Bval::Int(0), 0)).is_err());
    }

    #[test]
    fn unmapped_jump_is_reported() {
        let p = parse_program("block 0:\n  jmp(0x99)\n  halt\n").unwrap();
        let lts = SbirLts::new(p, CryptoConfig::default(), 1);
        assert_eq!(
            lts.build_tree(8, 64),
            Err(SbirError::UnmappedExternalJump("0x99".into()))
        );
    }

    #[test]
    fn every_used_symbol_is_registered() {
        fn expr_symbols_registered(e: &SymExpr, sigma: &crate::symbolic::SymbolSet) -> bool {
            e.symbols().iter().all(|s| sigma.contains(s))
        }
        let lts = fig5_lts();
        let mut frontier = vec![lts.initial_state()];
        while let Some(st) = frontier.pop() {
            for p in &st.pi {
                match p {
                    SbirPred::Eq(x, e) => {
                        assert!(st.sigma.contains(x));
                        assert!(expr_symbols_registered(e, &st.sigma));
                    }
                    SbirPred::Const(e) => assert!(expr_symbols_registered(e, &st.sigma)),
                    SbirPred::Alias(x, t) => {
                        assert!(st.sigma.contains(x));
                        assert!(crate::terms::symbols_of(t)
                            .iter()
                            .all(|s| st.sigma.contains(s)));
                    }
                }
            }
            for e in st.inner.env.values() {
                assert!(expr_symbols_registered(e, &st.sigma));
            }
            for (_, next) in lts.successors(&st) {
                frontier.push(next);
            }
        }
    }

    #[test]
    fn tree_traces_match_slts_enumeration() {
        use crate::symbolic::{enumerate_traces, Limits};
        let lts = fig5_lts();
        let tree = lts.build_tree(32, 1024).unwrap();
        let enumerated = enumerate_traces(&lts, Limits::new(8, 0)).unwrap();
        assert_eq!(tree.traces(), enumerated);
    }
}
