//! Scenario files: one flat key/section text file fully determines a run.
//! Top-level keys pick the program, combiner, and budgets; sections
//! declare names, label roles, the crypto signature, equations, constant
//! operators, and knowledge queries. This module also wires the pipeline:
//! program, library and attacker composed under the selected combiner,
//! driven along execution-tree paths for queries.

use std::fmt;

use thiserror::Error;

use crate::bir::{parse_label_text, parse_program, BirProgram};
use crate::combiners::{
    bit_combiner, bit_prime_combiner, bit_prime_sapic_combiner, eq_share_combiner, lift_right,
    over_approx_combiner,
};
use crate::compose::{compose, CombinedPred, Combiner, Composed, EmptyCombiner};
use crate::dy::{dy_deduce, DeduceError, DyAttacker, DyPred, Proof};
use crate::dylib::{lib_att_combiner, DyLibrary, LibPred};
use crate::sapic::{translate_trace, SapicLts, SapicPred};
use crate::sbir::{CryptoConfig, ExecTree, Role, SbirLts, SbirPred};
use crate::symbolic::{saturate, Event, Slts, SymState};
use crate::terms::{parse_term, Equation, FnSym, Name, NameTable, Theory};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("scenario line {0}: {1}")]
    Syntax(usize, String),
    #[error("cannot load program `{0}`: {1}")]
    Program(String, String),
    #[error(transparent)]
    Bir(#[from] crate::bir::BirError),
    #[error(transparent)]
    Sbir(#[from] crate::sbir::SbirError),
    #[error(transparent)]
    Term(#[from] crate::terms::TermError),
    #[error(transparent)]
    Sapic(#[from] crate::sapic::SapicError),
    #[error("query `{0}` is not K(t) or Eq(t1,t2)")]
    BadQuery(String),
    #[error("combiner `{0}` is unknown")]
    BadCombiner(String),
    #[error("{0}")]
    Other(String),
}

/// Outer combiner selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CombKind {
    Empty,
    OverApprox,
    EqShare,
    Bit,
    BitPrime,
    BitPrimeSapic,
    /// Names the always-on library-attacker relation; as an outer choice
    /// it adds nothing beyond `Empty`.
    LibAtt,
}

impl CombKind {
    pub fn parse(s: &str) -> Result<Self, ScenarioError> {
        Ok(match s {
            "empty" => CombKind::Empty,
            "overapprox" => CombKind::OverApprox,
            "eqshare" => CombKind::EqShare,
            "bit" => CombKind::Bit,
            "bitp" => CombKind::BitPrime,
            "bitp-sapic" => CombKind::BitPrimeSapic,
            "lib-att" => CombKind::LibAtt,
            other => return Err(ScenarioError::BadCombiner(other.to_string())),
        })
    }
}

impl fmt::Display for CombKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            CombKind::Empty => "empty",
            CombKind::OverApprox => "overapprox",
            CombKind::EqShare => "eqshare",
            CombKind::Bit => "bit",
            CombKind::BitPrime => "bitp",
            CombKind::BitPrimeSapic => "bitp-sapic",
            CombKind::LibAtt => "lib-att",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub program_src: String,
    pub cfg: CryptoConfig,
    pub signature: Vec<FnSym>,
    pub equations: Vec<Equation>,
    pub names: Vec<Name>,
    pub combiner: CombKind,
    pub depth: usize,
    pub ded_budget: usize,
    pub unroll: u32,
    pub replication: u32,
    pub queries: Vec<String>,
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario {
            program_src: String::new(),
            cfg: CryptoConfig::default(),
            signature: Vec::new(),
            equations: Vec::new(),
            names: Vec::new(),
            combiner: CombKind::BitPrime,
            depth: 16,
            ded_budget: 8,
            unroll: 1,
            replication: 2,
            queries: Vec::new(),
        }
    }
}

fn parse_role(text: &str) -> Result<Role, ScenarioError> {
    let mut words = text.split_whitespace();
    let head = words.next().unwrap_or_default();
    let err = || ScenarioError::Other(format!("bad label role `{text}`"));
    match head {
        "rng" => Ok(Role::Rng {
            name_hint: words.next().unwrap_or("n").to_string(),
        }),
        "send" => Ok(Role::Send {
            reg: words.next().unwrap_or("R0").to_string(),
        }),
        "recv" => Ok(Role::Recv {
            reg: words.next().unwrap_or("R0").to_string(),
        }),
        "event" => Ok(Role::Event {
            name: words.next().ok_or_else(err)?.to_string(),
        }),
        "fn" => {
            let spec = words.next().ok_or_else(err)?;
            let (name, arity) = spec.split_once('/').ok_or_else(err)?;
            let arity: usize = arity.parse().map_err(|_| err())?;
            let out_hint = match (words.next(), words.next()) {
                (Some("->"), Some(h)) => h.to_string(),
                (None, _) => "y".to_string(),
                _ => return Err(err()),
            };
            Ok(Role::Fn {
                sym: FnSym::new(name, arity),
                out_hint,
            })
        }
        _ => Err(err()),
    }
}

fn parse_fn_spec(text: &str) -> Result<FnSym, ScenarioError> {
    let t = text.trim().trim_start_matches("fn").trim();
    let (name, arity) = t
        .split_once('/')
        .ok_or_else(|| ScenarioError::Other(format!("bad signature entry `{text}`")))?;
    let arity: usize = arity
        .trim()
        .parse()
        .map_err(|_| ScenarioError::Other(format!("bad arity in `{text}`")))?;
    Ok(FnSym::new(name.trim(), arity))
}

fn unquote(v: &str) -> &str {
    let v = v.trim();
    v.strip_prefix('"')
        .and_then(|s| s.strip_suffix('"'))
        .unwrap_or(v)
}

/// Parses a scenario file. `load` resolves the `program` key to the
/// program source text.
pub fn parse_scenario(
    src: &str,
    load: &dyn Fn(&str) -> Result<String, String>,
) -> Result<Scenario, ScenarioError> {
    let mut sc = Scenario::default();
    let mut section = String::new();
    let mut eq_lines: Vec<String> = Vec::new();

    for (idx, raw) in src.lines().enumerate() {
        let lineno = idx + 1;
        let line = {
            let cut = raw.find('#').unwrap_or(raw.len());
            raw[..cut].trim()
        };
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| ScenarioError::Syntax(lineno, "unterminated section".into()))?;
            section = name.trim().to_string();
            continue;
        }
        match section.as_str() {
            "" => {
                let (key, value) = line
                    .split_once('=')
                    .ok_or_else(|| ScenarioError::Syntax(lineno, "expected key = value".into()))?;
                let value = unquote(value);
                match key.trim() {
                    "program" => {
                        sc.program_src = load(value)
                            .map_err(|e| ScenarioError::Program(value.to_string(), e))?;
                    }
                    "combiner" => sc.combiner = CombKind::parse(value)?,
                    "depth" => {
                        sc.depth = value.parse().map_err(|_| {
                            ScenarioError::Syntax(lineno, "depth must be an integer".into())
                        })?;
                    }
                    "ded_budget" => {
                        sc.ded_budget = value.parse().map_err(|_| {
                            ScenarioError::Syntax(lineno, "ded_budget must be an integer".into())
                        })?;
                    }
                    "unroll" => {
                        sc.unroll = value.parse().map_err(|_| {
                            ScenarioError::Syntax(lineno, "unroll must be an integer".into())
                        })?;
                    }
                    "replication" => {
                        sc.replication = value.parse().map_err(|_| {
                            ScenarioError::Syntax(lineno, "replication must be an integer".into())
                        })?;
                    }
                    other => {
                        return Err(ScenarioError::Syntax(
                            lineno,
                            format!("unknown key `{other}`"),
                        ))
                    }
                }
            }
            "labels" => {
                let (key, value) = line
                    .split_once('=')
                    .ok_or_else(|| ScenarioError::Syntax(lineno, "expected label = role".into()))?;
                let label = parse_label_text(key.trim())?;
                let role = parse_role(unquote(value))?;
                sc.cfg.roles.insert(label, role);
            }
            "names" => {
                let mut words = line.split_whitespace();
                match words.next() {
                    Some("priv") => {
                        for w in words {
                            sc.names.push(Name::private(w.trim_matches(',')));
                        }
                    }
                    Some("pub") => {
                        for w in words {
                            sc.names.push(Name::public(w.trim_matches(',')));
                        }
                    }
                    _ => {
                        return Err(ScenarioError::Syntax(
                            lineno,
                            "name lines start with `priv` or `pub`".into(),
                        ))
                    }
                }
            }
            "signature" => {
                for part in line.split(',') {
                    if !part.trim().is_empty() {
                        sc.signature.push(parse_fn_spec(part)?);
                    }
                }
            }
            "equations" => eq_lines.push(line.to_string()),
            "consts" => {
                for part in line.split(',') {
                    let op = part.trim().trim_start_matches("op").trim();
                    if !op.is_empty() {
                        sc.cfg.const_ops.insert(op.to_string());
                    }
                }
            }
            "queries" => sc.queries.push(line.to_string()),
            other => {
                return Err(ScenarioError::Syntax(
                    lineno,
                    format!("unknown section `[{other}]`"),
                ))
            }
        }
    }

    // Roles also contribute to the signature.
    for f in sc.cfg.signature() {
        if !sc.signature.contains(&f) {
            sc.signature.push(f);
        }
    }
    sc.signature.sort();

    let table = NameTable::new();
    for line in eq_lines {
        let (lhs, rhs) = line
            .split_once('=')
            .ok_or_else(|| ScenarioError::Other(format!("bad equation `{line}`")))?;
        let l = parse_term(lhs.trim(), &table, &sc.signature)?;
        let r = parse_term(rhs.trim(), &table, &sc.signature)?;
        sc.equations.push(Equation::new(l, r)?);
    }
    Ok(sc)
}

/// The program, library and attacker composed pairwise: the library and
/// attacker share mapping facts, the outer combiner links the program to
/// the attacker's knowledge.
pub type DySide = Composed<DyLibrary, DyAttacker>;
pub type FullSystem = Composed<SbirLts, DySide>;
pub type FullPred = CombinedPred<SbirPred, CombinedPred<LibPred, DyPred>>;
pub type FullState = SymState<
    (crate::sbir::SbirInner, ((), ())),
    FullPred,
>;

/// The extracted process in place of the program.
pub type SapicSystem = Composed<SapicLts, DySide>;

type OuterComb = Box<dyn Combiner<SbirPred, CombinedPred<LibPred, DyPred>>>;

impl Scenario {
    pub fn theory(&self) -> Theory {
        Theory::new(self.equations.clone())
    }

    pub fn program(&self) -> Result<BirProgram, ScenarioError> {
        Ok(parse_program(&self.program_src)?)
    }

    pub fn sbir(&self) -> Result<SbirLts, ScenarioError> {
        let lts = SbirLts::new(self.program()?, self.cfg.clone(), self.unroll);
        lts.validate()?;
        Ok(lts)
    }

    pub fn tree(&self) -> Result<ExecTree, ScenarioError> {
        Ok(self.sbir()?.build_tree(self.depth.max(32), 100_000)?)
    }

    pub fn library(&self) -> DyLibrary {
        DyLibrary::new(self.signature.clone(), self.names.clone())
    }

    pub fn attacker(&self) -> DyAttacker {
        let mut att = DyAttacker::new(self.names.clone(), self.signature.clone(), self.theory());
        att.bound = self.ded_budget.max(4);
        att
    }

    pub fn dy_side(&self) -> DySide {
        compose(self.library(), self.attacker(), lib_att_combiner())
    }

    /// DY side whose attacker derives knowledge on demand only; queries
    /// use this so proofs show the derivation instead of a stored fact.
    pub fn dy_side_quiet(&self) -> DySide {
        let mut att = self.attacker();
        att.saturate_knowledge = false;
        compose(self.library(), att, lib_att_combiner())
    }

    fn outer_combiner(&self, kind: CombKind) -> OuterComb {
        match kind {
            CombKind::Empty | CombKind::LibAtt | CombKind::BitPrimeSapic => {
                Box::new(EmptyCombiner)
            }
            CombKind::OverApprox => Box::new(lift_right(over_approx_combiner())),
            CombKind::EqShare => Box::new(lift_right(eq_share_combiner())),
            CombKind::Bit => Box::new(lift_right(bit_combiner())),
            CombKind::BitPrime => Box::new(lift_right(bit_prime_combiner())),
        }
    }

    /// Program composed with the DY side under the selected combiner.
    pub fn full(&self, kind: CombKind) -> Result<FullSystem, ScenarioError> {
        Ok(compose(self.sbir()?, self.dy_side(), self.outer_combiner(kind)))
    }

    /// Like `full`, with on-demand attacker deduction.
    pub fn full_quiet(&self, kind: CombKind) -> Result<FullSystem, ScenarioError> {
        Ok(compose(
            self.sbir()?,
            self.dy_side_quiet(),
            self.outer_combiner(kind),
        ))
    }

    /// The extracted process composed with the DY side under the
    /// translated combiner.
    pub fn sapic_system(&self) -> Result<(SapicSystem, ExecTree), ScenarioError> {
        let tree = self.tree()?;
        let proc = crate::sapic::translate_tree(&tree)?;
        let lts = SapicLts::new(proc, self.signature.clone(), self.replication);
        let comb: Box<dyn Combiner<SapicPred, CombinedPred<LibPred, DyPred>>> =
            Box::new(lift_right(bit_prime_sapic_combiner()));
        Ok((compose(lts, self.dy_side_quiet(), comb), tree))
    }

    /// Name table for parsing queries: declared names plus the names rng
    /// labels will mint.
    pub fn query_names(&self) -> NameTable {
        let mut t = NameTable::new();
        for n in &self.names {
            t.declare(n.clone());
        }
        for role in self.cfg.roles.values() {
            if let Role::Rng { name_hint } = role {
                t.declare(Name::private(name_hint.clone()));
            }
        }
        t
    }

    pub fn parse_query(&self, q: &str) -> Result<DyPred, ScenarioError> {
        let q = q.trim();
        let names = self.query_names();
        if let Some(inner) = q.strip_prefix("K(").and_then(|s| s.strip_suffix(')')) {
            let t = parse_term(inner, &names, &self.signature)?;
            return Ok(DyPred::K(t));
        }
        if let Some(inner) = q.strip_prefix("Eq(").and_then(|s| s.strip_suffix(')')) {
            let parts = split_two(inner)
                .ok_or_else(|| ScenarioError::BadQuery(q.to_string()))?;
            let a = parse_term(&parts.0, &names, &self.signature)?;
            let b = parse_term(&parts.1, &names, &self.signature)?;
            return Ok(DyPred::Eq(a, b));
        }
        Err(ScenarioError::BadQuery(q.to_string()))
    }
}

fn split_two(s: &str) -> Option<(String, String)> {
    let mut depth = 0;
    for (i, c) in s.char_indices() {
        match c {
            '(' => depth += 1,
            ')' => depth -= 1,
            ',' if depth == 0 => {
                return Some((s[..i].trim().to_string(), s[i + 1..].trim().to_string()));
            }
            _ => {}
        }
    }
    None
}

/// Drives a composed system along a fixed event path, saturating
/// deduction after every step and backtracking over acceptance choices.
/// Returns the final state, or the event that could not be taken.
pub fn run_guided<L: Slts>(
    system: &L,
    path: &[Event],
    ded_budget: usize,
) -> Result<SymState<L::Inner, L::Pred>, Event> {
    fn go<L: Slts>(
        system: &L,
        state: SymState<L::Inner, L::Pred>,
        path: &[Event],
        ded_budget: usize,
        stuck_at: &mut Option<Event>,
    ) -> Option<SymState<L::Inner, L::Pred>> {
        let Some((ev, rest)) = path.split_first() else {
            return Some(state);
        };
        let nexts = system.accept(&state, ev);
        if nexts.is_empty() && stuck_at.is_none() {
            *stuck_at = Some(ev.clone());
        }
        for next in nexts {
            let next = saturate(system, next, ded_budget);
            if let Some(done) = go(system, next, rest, ded_budget, stuck_at) {
                return Some(done);
            }
        }
        None
    }
    let init = saturate(system, system.initial(), ded_budget);
    let mut stuck_at = None;
    go(system, init, path, ded_budget, &mut stuck_at)
        .ok_or_else(|| stuck_at.unwrap_or(Event::Tau))
}

/// The attacker's predicate set inside a full-system state.
pub fn attacker_pi(state: &FullState) -> std::collections::BTreeSet<DyPred> {
    state
        .pi
        .iter()
        .filter_map(|p| match p {
            CombinedPred::Right(CombinedPred::Right(d)) => Some(d.clone()),
            _ => None,
        })
        .collect()
}

#[derive(Debug, Clone)]
pub enum QueryVerdict {
    Derived(Proof),
    NotDerived { inconclusive: bool },
}

impl QueryVerdict {
    pub fn is_derived(&self) -> bool {
        matches!(self, QueryVerdict::Derived(_))
    }
}

impl fmt::Display for QueryVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            QueryVerdict::Derived(p) => write!(f, "DERIVED\n{p}"),
            QueryVerdict::NotDerived { inconclusive } => {
                if *inconclusive {
                    write!(f, "NOT-DERIVED (within budget; inconclusive)")
                } else {
                    write!(f, "NOT-DERIVED")
                }
            }
        }
    }
}

/// Runs a knowledge query: the program's execution tree is replayed path
/// by path against the composed system; the goal is checked against the
/// attacker's saturated knowledge after each complete path.
pub fn query(sc: &Scenario, kind: CombKind, goal: &DyPred) -> Result<QueryVerdict, ScenarioError> {
    let tree = sc.tree()?;
    let theory = sc.theory();
    let bound = sc.ded_budget.max(4);

    if kind == CombKind::BitPrimeSapic {
        let (system, _) = sc.sapic_system()?;
        return run_query_paths(&system, &tree, goal, sc, &theory, bound, true);
    }
    let system = sc.full_quiet(kind)?;
    run_query_paths(&system, &tree, goal, sc, &theory, bound, false)
}

fn run_query_paths<A>(
    system: &Composed<A, DySide>,
    tree: &ExecTree,
    goal: &DyPred,
    sc: &Scenario,
    theory: &Theory,
    bound: usize,
    translate: bool,
) -> Result<QueryVerdict, ScenarioError>
where
    A: Slts,
{
    let mut inconclusive = false;
    for path in tree.paths() {
        let path = if translate {
            translate_trace(&path)?
        } else {
            path
        };
        let final_state = match run_guided(system, &path, sc.ded_budget) {
            Ok(s) => s,
            Err(ev) => {
                return Err(ScenarioError::Other(format!(
                    "composed system rejected event `{ev}` along the execution path"
                )))
            }
        };
        let pi_att: std::collections::BTreeSet<DyPred> = final_state
            .pi
            .iter()
            .filter_map(|p| match p {
                CombinedPred::Right(CombinedPred::Right(d)) => Some(d.clone()),
                _ => None,
            })
            .collect();
        match dy_deduce(&pi_att, goal, bound, theory) {
            Ok(proof) => return Ok(QueryVerdict::Derived(proof)),
            Err(DeduceError::BoundExceeded) => inconclusive = true,
            Err(DeduceError::NotDerivable) => {}
        }
    }
    Ok(QueryVerdict::NotDerived { inconclusive })
}
