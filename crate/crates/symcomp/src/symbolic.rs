//! Symbol space, events, the symbolic-LTS contract, bounded trace
//! enumeration, and the partially synchronized interleaving oracle.
//!
//! A symbolic LTS carries a monotonically growing symbol set, a predicate
//! set, and a deduction relation whose derivations fire as silent steps.
//! Components communicate by emitting events over a shared alphabet; the
//! tags in `sync_tags` mark the events a component synchronizes on.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::rc::Rc;

use thiserror::Error;

use crate::sbir::SymExpr;
use crate::terms::{FnSym, Name, Term};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EnumError {
    #[error("state budget exceeded: visited more than {0} states")]
    StateBudgetExceeded(usize),
    #[error("oracle scale exceeded: |t1| + |t2| = {0} > {1}")]
    OracleScaleExceeded(usize, usize),
}

/// An opaque handle for a value. Identity is the full id string; the
/// leading hint is only there to keep traces readable.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Symbol {
    id: String,
}

impl Symbol {
    pub fn new(id: impl Into<String>) -> Self {
        Symbol { id: id.into() }
    }

    pub fn id(&self) -> &str {
        &self.id
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.id)
    }
}

/// The set of symbols drawn so far. Grows monotonically along every run.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord)]
pub struct SymbolSet {
    members: BTreeSet<Symbol>,
}

impl SymbolSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn contains(&self, s: &Symbol) -> bool {
        self.members.contains(s)
    }

    pub fn insert(&mut self, s: Symbol) {
        self.members.insert(s);
    }

    pub fn union(&self, other: &SymbolSet) -> SymbolSet {
        let mut out = self.clone();
        out.members.extend(other.members.iter().cloned());
        out
    }

    pub fn is_subset(&self, other: &SymbolSet) -> bool {
        self.members.is_subset(&other.members)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Symbol> {
        self.members.iter()
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// Draws a globally fresh symbol: `hint` plus the smallest ordinal whose
/// composed id is unused. Deterministic in `sigma` and `hint`.
pub fn fresh_symbol(sigma: &SymbolSet, hint: &str) -> (Symbol, SymbolSet) {
    let mut n = 0usize;
    loop {
        let cand = Symbol::new(format!("{hint}{n}"));
        if !sigma.contains(&cand) {
            let mut next = sigma.clone();
            next.insert(cand.clone());
            return (cand, next);
        }
        n += 1;
    }
}

/// Like `fresh_symbol` but tries the bare base name first, so the first
/// binding of a register or event keeps its source-level name.
pub fn mint_named(sigma: &SymbolSet, base: &str) -> (Symbol, SymbolSet) {
    let bare = Symbol::new(base);
    if !sigma.contains(&bare) {
        let mut next = sigma.clone();
        next.insert(bare.clone());
        return (bare, next);
    }
    fresh_symbol(sigma, base)
}

/// Right-hand side carried by an `Assign` event: a symbolic expression on
/// the execution side, a term once translated into the process world.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum AssignRhs {
    Expr(SymExpr),
    Term(Term),
}

impl fmt::Display for AssignRhs {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AssignRhs::Expr(e) => write!(f, "{e}"),
            AssignRhs::Term(t) => write!(f, "{t}"),
        }
    }
}

/// The shared event alphabet.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum Event {
    /// A fresh private name is drawn and announced.
    SFr(Name),
    /// A symbol travels from the attacker to the program.
    A2P(Symbol),
    /// A symbol travels from the program to the attacker.
    P2A(Symbol),
    /// A crypto-library call: function, argument symbols, output symbol.
    FCall(FnSym, Vec<Symbol>, Symbol),
    /// The attacker names a composite term.
    Alias(Symbol, Term),
    /// Internal freshness synchronization for attacker-picked names.
    Silent(Name),
    /// Deduction step.
    Tau,
    /// A visible protocol event.
    Ev(Symbol),
    /// Loop entry marker.
    Loop,
    /// A local binding of a symbol to an expression.
    Assign(Symbol, AssignRhs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EventTag {
    SFr,
    A2P,
    P2A,
    FCall,
    Alias,
    Silent,
    Tau,
    Ev,
    Loop,
    Assign,
}

impl Event {
    pub fn tag(&self) -> EventTag {
        match self {
            Event::SFr(_) => EventTag::SFr,
            Event::A2P(_) => EventTag::A2P,
            Event::P2A(_) => EventTag::P2A,
            Event::FCall(..) => EventTag::FCall,
            Event::Alias(..) => EventTag::Alias,
            Event::Silent(_) => EventTag::Silent,
            Event::Tau => EventTag::Tau,
            Event::Ev(_) => EventTag::Ev,
            Event::Loop => EventTag::Loop,
            Event::Assign(..) => EventTag::Assign,
        }
    }
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Event::SFr(n) => write!(f, "SFr({n})"),
            Event::A2P(x) => write!(f, "A2P({x})"),
            Event::P2A(x) => write!(f, "P2A({x})"),
            Event::FCall(g, args, y) => {
                write!(f, "FCall({}", g.name())?;
                for a in args {
                    write!(f, ",{a}")?;
                }
                write!(f, ";{y})")
            }
            Event::Alias(x, t) => write!(f, "Alias({x},{t})"),
            Event::Silent(n) => write!(f, "Silent({n})"),
            Event::Tau => write!(f, "Tau"),
            Event::Ev(e) => write!(f, "Ev({e})"),
            Event::Loop => write!(f, "Loop"),
            Event::Assign(x, e) => write!(f, "Assign({x},{e})"),
        }
    }
}

pub type Trace = Vec<Event>;

/// One event per line, in the trace grammar.
pub fn format_trace(t: &[Event]) -> String {
    t.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("\n")
}

pub fn format_trace_inline(t: &[Event]) -> String {
    let body = t.iter().map(|e| e.to_string()).collect::<Vec<_>>().join(", ");
    format!("[{body}]")
}

/// A symbolic state: symbol set, predicate set, and component-local state.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct SymState<I, P: Ord> {
    pub sigma: SymbolSet,
    pub pi: BTreeSet<P>,
    pub inner: I,
}

impl<I, P: Ord> SymState<I, P> {
    pub fn new(sigma: SymbolSet, pi: BTreeSet<P>, inner: I) -> Self {
        SymState { sigma, pi, inner }
    }
}

/// The symbolic-LTS contract.
///
/// `successors` lists the component's own moves, drawing any fresh symbols
/// canonically. `accept` answers whether the component can take exactly the
/// given event, adopting symbols or names minted by the proposing side;
/// composition matches a proposal from one side against acceptance by the
/// other. `deduce_step` is the one-step deduction relation; every derivable
/// predicate may be installed by a silent step at any time.
pub trait Slts {
    type Inner: Clone + Ord;
    type Pred: Clone + Ord;

    fn initial(&self) -> SymState<Self::Inner, Self::Pred>;

    fn successors(
        &self,
        s: &SymState<Self::Inner, Self::Pred>,
    ) -> Vec<(Event, SymState<Self::Inner, Self::Pred>)>;

    fn accept(
        &self,
        s: &SymState<Self::Inner, Self::Pred>,
        ev: &Event,
    ) -> Vec<SymState<Self::Inner, Self::Pred>> {
        self.successors(s)
            .into_iter()
            .filter(|(e, _)| e == ev)
            .map(|(_, s2)| s2)
            .collect()
    }

    fn deduce_step(&self, s: &SymState<Self::Inner, Self::Pred>) -> Vec<Self::Pred> {
        let _ = s;
        Vec::new()
    }

    fn sync_tags(&self) -> BTreeSet<EventTag>;
}

#[derive(Debug, Clone, Copy)]
pub struct Limits {
    /// Maximum number of visible events per trace.
    pub depth: usize,
    /// Maximum deduction rounds interposed between visible events.
    pub ded_budget: usize,
    /// Cap on explored states.
    pub max_states: usize,
}

impl Limits {
    pub fn new(depth: usize, ded_budget: usize) -> Self {
        Limits {
            depth,
            ded_budget,
            max_states: 500_000,
        }
    }
}

impl Default for Limits {
    fn default() -> Self {
        Limits::new(4, 4)
    }
}

/// Installs everything derivable within `rounds` one-step deduction
/// rounds. Each round evaluates the relation against the predicate set the
/// round started from, then adds all newly derivable facts at once.
pub fn saturate<L: Slts>(
    lts: &L,
    mut s: SymState<L::Inner, L::Pred>,
    rounds: usize,
) -> SymState<L::Inner, L::Pred> {
    for _ in 0..rounds {
        let fresh: Vec<L::Pred> = lts
            .deduce_step(&s)
            .into_iter()
            .filter(|p| !s.pi.contains(p))
            .collect();
        if fresh.is_empty() {
            break;
        }
        s.pi.extend(fresh);
    }
    s
}

/// All event sequences of length at most `limits.depth` reachable from the
/// initial state, with deduction saturated between visible events. The
/// result is prefix-closed; silent steps never appear.
pub fn enumerate_traces<L: Slts>(lts: &L, limits: Limits) -> Result<BTreeSet<Trace>, EnumError> {
    type Memo<I, P> = BTreeMap<(SymState<I, P>, usize), Rc<BTreeSet<Trace>>>;

    fn suffixes<L: Slts>(
        lts: &L,
        state: SymState<L::Inner, L::Pred>,
        depth: usize,
        limits: &Limits,
        memo: &mut Memo<L::Inner, L::Pred>,
        visited: &mut usize,
    ) -> Result<Rc<BTreeSet<Trace>>, EnumError> {
        let key = (state.clone(), depth);
        if let Some(hit) = memo.get(&key) {
            return Ok(hit.clone());
        }
        *visited += 1;
        if *visited > limits.max_states {
            return Err(EnumError::StateBudgetExceeded(limits.max_states));
        }
        let mut out = BTreeSet::new();
        out.insert(Vec::new());
        if depth > 0 {
            for (ev, next) in lts.successors(&state) {
                debug_assert!(
                    state.sigma.is_subset(&next.sigma),
                    "symbol set must grow monotonically"
                );
                debug_assert_ne!(ev.tag(), EventTag::Tau, "successors must be visible");
                let next = saturate(lts, next, limits.ded_budget);
                let sub = suffixes(lts, next, depth - 1, limits, memo, visited)?;
                for suffix in sub.iter() {
                    let mut t = Vec::with_capacity(1 + suffix.len());
                    t.push(ev.clone());
                    t.extend(suffix.iter().cloned());
                    out.insert(t);
                }
            }
        }
        let rc = Rc::new(out);
        memo.insert(key, rc.clone());
        Ok(rc)
    }

    let mut memo = Memo::new();
    let mut visited = 0usize;
    let init = saturate(lts, lts.initial(), limits.ded_budget);
    let set = suffixes(lts, init, limits.depth, &limits, &mut memo, &mut visited)?;
    Ok(set.as_ref().clone())
}

/// Event types that carry a synchronization tag. Lets the interleaving
/// oracle work over both symbolic and concrete event alphabets.
pub trait TaggedEvent: Clone + Ord {
    type Tag: Clone + Ord;
    fn sync_tag(&self) -> Self::Tag;
}

impl TaggedEvent for Event {
    type Tag = EventTag;
    fn sync_tag(&self) -> EventTag {
        self.tag()
    }
}

/// Whether `t` is a partially synchronized interleaving of `t1` and `t2`:
/// a merge preserving each side's order in which events with a tag in
/// `sync` occur once, matched by both sides, and every other event comes
/// from exactly one side.
pub fn is_interleaving<E: TaggedEvent>(
    t: &[E],
    t1: &[E],
    t2: &[E],
    sync: &BTreeSet<E::Tag>,
) -> bool {
    fn go<E: TaggedEvent>(
        t: &[E],
        t1: &[E],
        t2: &[E],
        sync: &BTreeSet<E::Tag>,
        i: usize,
        j: usize,
        k: usize,
        dead: &mut BTreeSet<(usize, usize, usize)>,
    ) -> bool {
        if k == t.len() {
            return i == t1.len() && j == t2.len();
        }
        if dead.contains(&(i, j, k)) {
            return false;
        }
        let ev = &t[k];
        let mut ok = false;
        if sync.contains(&ev.sync_tag()) {
            if i < t1.len() && j < t2.len() && &t1[i] == ev && &t2[j] == ev {
                ok = go(t, t1, t2, sync, i + 1, j + 1, k + 1, dead);
            }
        } else {
            if i < t1.len() && &t1[i] == ev {
                ok = go(t, t1, t2, sync, i + 1, j, k + 1, dead);
            }
            if !ok && j < t2.len() && &t2[j] == ev {
                ok = go(t, t1, t2, sync, i, j + 1, k + 1, dead);
            }
        }
        if !ok {
            dead.insert((i, j, k));
        }
        ok
    }
    let mut dead = BTreeSet::new();
    go(t, t1, t2, sync, 0, 0, 0, &mut dead)
}

pub const ORACLE_SCALE: usize = 12;

/// Brute-force enumeration of every partially synchronized interleaving of
/// two short traces.
pub fn all_interleavings<E: TaggedEvent>(
    t1: &[E],
    t2: &[E],
    sync: &BTreeSet<E::Tag>,
) -> Result<BTreeSet<Vec<E>>, EnumError> {
    if t1.len() + t2.len() > ORACLE_SCALE {
        return Err(EnumError::OracleScaleExceeded(
            t1.len() + t2.len(),
            ORACLE_SCALE,
        ));
    }
    fn go<E: TaggedEvent>(
        t1: &[E],
        t2: &[E],
        sync: &BTreeSet<E::Tag>,
        i: usize,
        j: usize,
        prefix: &mut Vec<E>,
        out: &mut BTreeSet<Vec<E>>,
    ) {
        if i == t1.len() && j == t2.len() {
            out.insert(prefix.clone());
            return;
        }
        if i < t1.len() && !sync.contains(&t1[i].sync_tag()) {
            prefix.push(t1[i].clone());
            go(t1, t2, sync, i + 1, j, prefix, out);
            prefix.pop();
        }
        if j < t2.len() && !sync.contains(&t2[j].sync_tag()) {
            prefix.push(t2[j].clone());
            go(t1, t2, sync, i, j + 1, prefix, out);
            prefix.pop();
        }
        if i < t1.len()
            && j < t2.len()
            && sync.contains(&t1[i].sync_tag())
            && t1[i] == t2[j]
        {
            prefix.push(t1[i].clone());
            go(t1, t2, sync, i + 1, j + 1, prefix, out);
            prefix.pop();
        }
    }
    let mut out = BTreeSet::new();
    let mut prefix = Vec::new();
    go(t1, t2, sync, 0, 0, &mut prefix, &mut out);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(id: &str) -> Event {
        Event::Ev(Symbol::new(id))
    }

    #[test]
    fn fresh_symbol_ordinals() {
        let (s, sigma) = fresh_symbol(&SymbolSet::new(), "x");
        assert_eq!(s.id(), "x0");
        assert_eq!(sigma.len(), 1);

        let (s2, sigma2) = fresh_symbol(&sigma, "x");
        assert_eq!(s2.id(), "x1");
        assert!(sigma2.contains(&Symbol::new("x0")) && sigma2.contains(&Symbol::new("x1")));

        let mut sigma3 = sigma2.clone();
        sigma3.insert(Symbol::new("y0"));
        let (s3, _) = fresh_symbol(&sigma3, "y");
        assert_eq!(s3.id(), "y1");
    }

    #[test]
    fn mint_named_prefers_bare() {
        let (a, sigma) = mint_named(&SymbolSet::new(), "R1");
        assert_eq!(a.id(), "R1");
        let (b, _) = mint_named(&sigma, "R1");
        assert_eq!(b.id(), "R10");
    }

    /// Two-state LTS with one labeled transition.
    struct OneStep(Event);

    impl Slts for OneStep {
        type Inner = bool;
        type Pred = String;

        fn initial(&self) -> SymState<bool, String> {
            SymState::new(SymbolSet::new(), BTreeSet::new(), false)
        }

        fn successors(&self, s: &SymState<bool, String>) -> Vec<(Event, SymState<bool, String>)> {
            if s.inner {
                vec![]
            } else {
                vec![(
                    self.0.clone(),
                    SymState::new(s.sigma.clone(), s.pi.clone(), true),
                )]
            }
        }

        fn sync_tags(&self) -> BTreeSet<EventTag> {
            BTreeSet::new()
        }
    }

    #[test]
    fn enumerate_depth_zero_is_epsilon() {
        let l = OneStep(ev("e"));
        let traces = enumerate_traces(&l, Limits::new(0, 0)).unwrap();
        assert_eq!(traces.len(), 1);
        assert!(traces.contains(&Vec::new()));
    }

    #[test]
    fn enumerate_exhausts_short_lts() {
        let l = OneStep(ev("e"));
        let traces = enumerate_traces(&l, Limits::new(3, 0)).unwrap();
        let expected: BTreeSet<Trace> = [vec![], vec![ev("e")]].into_iter().collect();
        assert_eq!(traces, expected);
    }

    #[test]
    fn attacker_alone_can_receive_at_depth_one() {
        use crate::dy::DyAttacker;
        use crate::terms::Theory;
        let att = DyAttacker::new(vec![], vec![], Theory::empty());
        let traces = enumerate_traces(&att, Limits::new(1, 1)).unwrap();
        assert!(traces.contains(&vec![Event::P2A(Symbol::new("x0"))]));
    }

    #[test]
    fn interleaving_basics() {
        let a = ev("a");
        let b = ev("b");
        let none = BTreeSet::new();
        assert!(is_interleaving(
            &[a.clone(), b.clone()],
            std::slice::from_ref(&a),
            std::slice::from_ref(&b),
            &none
        ));
        assert!(!is_interleaving(
            &[b.clone(), a.clone()],
            &[a.clone(), b.clone()],
            &[],
            &none
        ));

        let s = Event::SFr(Name::private("n"));
        let sync: BTreeSet<EventTag> = [EventTag::SFr].into_iter().collect();
        assert!(is_interleaving(
            std::slice::from_ref(&s),
            std::slice::from_ref(&s),
            std::slice::from_ref(&s),
            &sync
        ));
        // A synchronizing event missing on one side blocks the merge.
        assert!(!is_interleaving(std::slice::from_ref(&s), std::slice::from_ref(&s), &[], &sync));
    }

    #[test]
    fn all_interleavings_examples() {
        let a = ev("a");
        let b = ev("b");
        let none = BTreeSet::new();
        let got = all_interleavings(std::slice::from_ref(&a), std::slice::from_ref(&b), &none).unwrap();
        let expected: BTreeSet<Vec<Event>> = [
            vec![a.clone(), b.clone()],
            vec![b.clone(), a.clone()],
        ]
        .into_iter()
        .collect();
        assert_eq!(got, expected);

        let s = Event::SFr(Name::private("s"));
        let sync: BTreeSet<EventTag> = [EventTag::SFr].into_iter().collect();
        let got = all_interleavings(
            &[s.clone(), a.clone()],
            &[s.clone(), b.clone()],
            &sync,
        )
        .unwrap();
        let expected: BTreeSet<Vec<Event>> = [
            vec![s.clone(), a.clone(), b.clone()],
            vec![s.clone(), b.clone(), a.clone()],
        ]
        .into_iter()
        .collect();
        assert_eq!(got, expected);

        let empty: [Event; 0] = [];
        let got = all_interleavings(&empty, &empty, &none).unwrap();
        assert_eq!(got.len(), 1);
        assert!(got.contains(&vec![]));
    }

    #[test]
    fn oracle_scale_guard() {
        let t: Vec<Event> = (0..7).map(|i| ev(&format!("e{i}"))).collect();
        let err = all_interleavings(&t, &t, &BTreeSet::new());
        assert!(matches!(err, Err(EnumError::OracleScaleExceeded(14, _))));
    }

    #[test]
    fn oracle_agrees_with_membership() {
        let a = ev("a");
        let b = ev("b");
        let s = Event::SFr(Name::private("s"));
        let sync: BTreeSet<EventTag> = [EventTag::SFr].into_iter().collect();
        let t1 = vec![a.clone(), s.clone()];
        let t2 = vec![s.clone(), b.clone()];
        let all = all_interleavings(&t1, &t2, &sync).unwrap();
        for t in &all {
            assert!(is_interleaving(t, &t1, &t2, &sync));
        }
        // And a non-member is rejected.
        let bogus = vec![s.clone(), a.clone(), b.clone()];
        assert_eq!(
            all.contains(&bogus),
            is_interleaving(&bogus, &t1, &t2, &sync)
        );
    }
}
