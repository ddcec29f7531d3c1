//! Parallel composition of symbolic LTS, parametric in a combined
//! deduction relation, together with the plain CSP-style product of
//! concrete LTS and the executable correctness checks built on the
//! interleaving oracle.
//!
//! Composition shares one symbol space. Events whose tag lies in both
//! components' synchronization alphabets fire only when one side proposes
//! the event and the other accepts it verbatim; everything else moves
//! asynchronously with the complement's predicate projection untouched.

use std::collections::BTreeSet;
use std::fmt;
use std::rc::Rc;

use crate::bir::{CEvent, CEventTag};
use crate::symbolic::{
    all_interleavings, enumerate_traces, EnumError, Event, EventTag, Limits, Slts, SymState,
    Trace,
};

/// A predicate in the disjoint union of two components' predicate spaces.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum CombinedPred<L, R> {
    Left(L),
    Right(R),
}

impl<L: fmt::Display, R: fmt::Display> fmt::Display for CombinedPred<L, R> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CombinedPred::Left(p) => write!(f, "left({p})"),
            CombinedPred::Right(p) => write!(f, "right({p})"),
        }
    }
}

pub fn proj_left<L: Clone + Ord, R: Clone + Ord>(
    pi: &BTreeSet<CombinedPred<L, R>>,
) -> BTreeSet<L> {
    pi.iter()
        .filter_map(|p| match p {
            CombinedPred::Left(l) => Some(l.clone()),
            CombinedPred::Right(_) => None,
        })
        .collect()
}

pub fn proj_right<L: Clone + Ord, R: Clone + Ord>(
    pi: &BTreeSet<CombinedPred<L, R>>,
) -> BTreeSet<R> {
    pi.iter()
        .filter_map(|p| match p {
            CombinedPred::Left(_) => None,
            CombinedPred::Right(r) => Some(r.clone()),
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CombinerClass {
    Enabling,
    Disabling,
    Neutral,
}

/// A combined deduction relation: one derivation step over the union
/// predicate space. Implementations must be monotone in their input and
/// derive nothing from the empty set.
pub trait Combiner<L, R> {
    fn derive(&self, pi: &BTreeSet<CombinedPred<L, R>>) -> Vec<CombinedPred<L, R>>;
    fn class(&self) -> CombinerClass;
    fn name(&self) -> &'static str {
        "combiner"
    }
}

impl<L, R> Combiner<L, R> for Box<dyn Combiner<L, R>> {
    fn derive(&self, pi: &BTreeSet<CombinedPred<L, R>>) -> Vec<CombinedPred<L, R>> {
        self.as_ref().derive(pi)
    }

    fn class(&self) -> CombinerClass {
        self.as_ref().class()
    }

    fn name(&self) -> &'static str {
        self.as_ref().name()
    }
}

/// Derives nothing; enabling and disabling hold vacuously.
#[derive(Debug, Clone, Copy, Default)]
pub struct EmptyCombiner;

impl<L, R> Combiner<L, R> for EmptyCombiner {
    fn derive(&self, _pi: &BTreeSet<CombinedPred<L, R>>) -> Vec<CombinedPred<L, R>> {
        Vec::new()
    }

    fn class(&self) -> CombinerClass {
        CombinerClass::Neutral
    }

    fn name(&self) -> &'static str {
        "empty"
    }
}

/// The symbolic parallel composition of two components.
pub struct Composed<A: Slts, B: Slts> {
    pub left: A,
    pub right: B,
    comb: Rc<dyn Combiner<A::Pred, B::Pred>>,
    shared: BTreeSet<EventTag>,
}

impl<A: Slts + Clone, B: Slts + Clone> Clone for Composed<A, B> {
    fn clone(&self) -> Self {
        Composed {
            left: self.left.clone(),
            right: self.right.clone(),
            comb: self.comb.clone(),
            shared: self.shared.clone(),
        }
    }
}

/// Builds the composition. The synchronization alphabet is the
/// intersection of both components' alphabets; the combined deduction
/// relation is iterated to a fixpoint by the enumeration budget.
pub fn compose<A: Slts, B: Slts>(
    left: A,
    right: B,
    comb: impl Combiner<A::Pred, B::Pred> + 'static,
) -> Composed<A, B> {
    let shared: BTreeSet<EventTag> = left
        .sync_tags()
        .intersection(&right.sync_tags())
        .cloned()
        .collect();
    Composed {
        left,
        right,
        comb: Rc::new(comb),
        shared,
    }
}

type St<L> = SymState<<L as Slts>::Inner, <L as Slts>::Pred>;

impl<A: Slts, B: Slts> Composed<A, B> {
    pub fn shared_tags(&self) -> &BTreeSet<EventTag> {
        &self.shared
    }

    pub fn combiner(&self) -> &dyn Combiner<A::Pred, B::Pred> {
        self.comb.as_ref()
    }

    fn split(&self, s: &St<Self>) -> (St<A>, St<B>) {
        let l = SymState::new(s.sigma.clone(), proj_left(&s.pi), s.inner.0.clone());
        let r = SymState::new(s.sigma.clone(), proj_right(&s.pi), s.inner.1.clone());
        (l, r)
    }

    fn join(&self, l: &St<A>, r: &St<B>) -> St<Self> {
        let sigma = l.sigma.union(&r.sigma);
        let mut pi: BTreeSet<CombinedPred<A::Pred, B::Pred>> = BTreeSet::new();
        pi.extend(l.pi.iter().cloned().map(CombinedPred::Left));
        pi.extend(r.pi.iter().cloned().map(CombinedPred::Right));
        SymState::new(sigma, pi, (l.inner.clone(), r.inner.clone()))
    }

    /// Like `saturate`, but reports the order in which new facts were
    /// installed: per round, facts from the combined relation come before
    /// facts from the components' own deduction.
    pub fn saturate_recording(
        &self,
        mut state: St<Self>,
        rounds: usize,
    ) -> (St<Self>, Vec<CombinedPred<A::Pred, B::Pred>>) {
        let mut order = Vec::new();
        for _ in 0..rounds {
            let comb_new: Vec<_> = self
                .comb
                .derive(&state.pi)
                .into_iter()
                .filter(|p| !state.pi.contains(p))
                .collect();
            let (sl, sr) = self.split(&state);
            let mut side_new: Vec<_> = self
                .left
                .deduce_step(&sl)
                .into_iter()
                .map(CombinedPred::Left)
                .chain(
                    self.right
                        .deduce_step(&sr)
                        .into_iter()
                        .map(CombinedPred::Right),
                )
                .filter(|p| !state.pi.contains(p) && !comb_new.contains(p))
                .collect();
            side_new.dedup();
            if comb_new.is_empty() && side_new.is_empty() {
                break;
            }
            for p in comb_new.into_iter().chain(side_new) {
                if state.pi.insert(p.clone()) {
                    order.push(p);
                }
            }
        }
        (state, order)
    }
}

impl<A: Slts, B: Slts> Slts for Composed<A, B> {
    type Inner = (A::Inner, B::Inner);
    type Pred = CombinedPred<A::Pred, B::Pred>;

    fn initial(&self) -> St<Self> {
        self.join(&self.left.initial(), &self.right.initial())
    }

    fn successors(&self, s: &St<Self>) -> Vec<(Event, St<Self>)> {
        let (sl, sr) = self.split(s);
        let mut out: BTreeSet<(Event, St<Self>)> = BTreeSet::new();
        for (ev, sl2) in self.left.successors(&sl) {
            if self.shared.contains(&ev.tag()) {
                for sr2 in self.right.accept(&sr, &ev) {
                    out.insert((ev.clone(), self.join(&sl2, &sr2)));
                }
            } else {
                let next = self.join(&sl2, &sr);
                debug_assert!(
                    proj_right::<A::Pred, B::Pred>(&next.pi) == proj_right(&s.pi),
                    "asynchronous move must not touch the complement's facts"
                );
                out.insert((ev.clone(), next));
            }
        }
        for (ev, sr2) in self.right.successors(&sr) {
            if self.shared.contains(&ev.tag()) {
                for sl2 in self.left.accept(&sl, &ev) {
                    out.insert((ev.clone(), self.join(&sl2, &sr2)));
                }
            } else {
                let next = self.join(&sl, &sr2);
                debug_assert!(
                    proj_left::<A::Pred, B::Pred>(&next.pi) == proj_left(&s.pi),
                    "asynchronous move must not touch the complement's facts"
                );
                out.insert((ev.clone(), next));
            }
        }
        out.into_iter().collect()
    }

    fn accept(&self, s: &St<Self>, ev: &Event) -> Vec<St<Self>> {
        let (sl, sr) = self.split(s);
        let mut out: BTreeSet<St<Self>> = BTreeSet::new();
        if self.shared.contains(&ev.tag()) {
            for sl2 in self.left.accept(&sl, ev) {
                for sr2 in self.right.accept(&sr, ev) {
                    out.insert(self.join(&sl2, &sr2));
                }
            }
        } else {
            for sl2 in self.left.accept(&sl, ev) {
                out.insert(self.join(&sl2, &sr));
            }
            for sr2 in self.right.accept(&sr, ev) {
                out.insert(self.join(&sl, &sr2));
            }
        }
        out.into_iter().collect()
    }

    fn deduce_step(&self, s: &St<Self>) -> Vec<Self::Pred> {
        let (sl, sr) = self.split(s);
        let mut out: BTreeSet<Self::Pred> = BTreeSet::new();
        for p in self.comb.derive(&s.pi) {
            if !s.pi.contains(&p) {
                out.insert(p);
            }
        }
        for p in self.left.deduce_step(&sl) {
            let lifted = CombinedPred::Left(p);
            if !s.pi.contains(&lifted) {
                out.insert(lifted);
            }
        }
        for p in self.right.deduce_step(&sr) {
            let lifted = CombinedPred::Right(p);
            if !s.pi.contains(&lifted) {
                out.insert(lifted);
            }
        }
        out.into_iter().collect()
    }

    fn sync_tags(&self) -> BTreeSet<EventTag> {
        self.left
            .sync_tags()
            .union(&self.right.sync_tags())
            .cloned()
            .collect()
    }
}

/// A plain labeled transition system over concrete events.
pub trait CLts {
    type State: Clone + Ord;

    fn initial(&self) -> Self::State;
    fn successors(&self, s: &Self::State) -> Vec<(CEvent, Self::State)>;

    fn accept(&self, s: &Self::State, ev: &CEvent) -> Vec<Self::State> {
        self.successors(s)
            .into_iter()
            .filter(|(e, _)| e == ev)
            .map(|(_, s2)| s2)
            .collect()
    }

    fn sync_tags(&self) -> BTreeSet<CEventTag>;
}

/// CSP-style product of two concrete LTS: shared tags synchronize,
/// everything else interleaves. No symbols, no predicates.
pub struct ComposedConcrete<A: CLts, B: CLts> {
    pub left: A,
    pub right: B,
    shared: BTreeSet<CEventTag>,
}

pub fn compose_concrete<A: CLts, B: CLts>(left: A, right: B) -> ComposedConcrete<A, B> {
    let shared = left
        .sync_tags()
        .intersection(&right.sync_tags())
        .cloned()
        .collect();
    ComposedConcrete {
        left,
        right,
        shared,
    }
}

impl<A: CLts, B: CLts> CLts for ComposedConcrete<A, B> {
    type State = (A::State, B::State);

    fn initial(&self) -> Self::State {
        (self.left.initial(), self.right.initial())
    }

    fn successors(&self, s: &Self::State) -> Vec<(CEvent, Self::State)> {
        let mut out: BTreeSet<(CEvent, Self::State)> = BTreeSet::new();
        for (ev, l2) in self.left.successors(&s.0) {
            if self.shared.contains(&ev.tag()) {
                for r2 in self.right.accept(&s.1, &ev) {
                    out.insert((ev.clone(), (l2.clone(), r2)));
                }
            } else {
                out.insert((ev.clone(), (l2.clone(), s.1.clone())));
            }
        }
        for (ev, r2) in self.right.successors(&s.1) {
            if self.shared.contains(&ev.tag()) {
                for l2 in self.left.accept(&s.0, &ev) {
                    out.insert((ev.clone(), (l2, r2.clone())));
                }
            } else {
                out.insert((ev.clone(), (s.0.clone(), r2.clone())));
            }
        }
        out.into_iter().collect()
    }

    fn accept(&self, s: &Self::State, ev: &CEvent) -> Vec<Self::State> {
        let mut out: BTreeSet<Self::State> = BTreeSet::new();
        if self.shared.contains(&ev.tag()) {
            for l2 in self.left.accept(&s.0, ev) {
                for r2 in self.right.accept(&s.1, ev) {
                    out.insert((l2.clone(), r2));
                }
            }
        } else {
            for l2 in self.left.accept(&s.0, ev) {
                out.insert((l2, s.1.clone()));
            }
            for r2 in self.right.accept(&s.1, ev) {
                out.insert((s.0.clone(), r2));
            }
        }
        out.into_iter().collect()
    }

    fn sync_tags(&self) -> BTreeSet<CEventTag> {
        self.left
            .sync_tags()
            .union(&self.right.sync_tags())
            .cloned()
            .collect()
    }
}

/// Prefix-closed concrete trace set to the given depth.
pub fn enumerate_concrete<L: CLts>(
    lts: &L,
    depth: usize,
    max_states: usize,
) -> Result<BTreeSet<Vec<CEvent>>, EnumError> {
    fn go<L: CLts>(
        lts: &L,
        s: &L::State,
        depth: usize,
        prefix: &mut Vec<CEvent>,
        out: &mut BTreeSet<Vec<CEvent>>,
        visited: &mut usize,
        max_states: usize,
    ) -> Result<(), EnumError> {
        *visited += 1;
        if *visited > max_states {
            return Err(EnumError::StateBudgetExceeded(max_states));
        }
        out.insert(prefix.clone());
        if depth == 0 {
            return Ok(());
        }
        for (ev, next) in lts.successors(s) {
            prefix.push(ev);
            go(lts, &next, depth - 1, prefix, out, visited, max_states)?;
            prefix.pop();
        }
        Ok(())
    }
    let mut out = BTreeSet::new();
    let mut visited = 0usize;
    let mut prefix = Vec::new();
    go(
        lts,
        &lts.initial(),
        depth,
        &mut prefix,
        &mut out,
        &mut visited,
        max_states,
    )?;
    Ok(out)
}

/// Outcome of one executable correctness check.
#[derive(Debug, Clone)]
pub struct CheckReport {
    pub name: String,
    pub pass: bool,
    pub details: Vec<String>,
    pub counterexample: Option<String>,
}

impl CheckReport {
    pub fn pass(name: impl Into<String>) -> Self {
        CheckReport {
            name: name.into(),
            pass: true,
            details: Vec::new(),
            counterexample: None,
        }
    }

    pub fn fail(name: impl Into<String>, witness: String) -> Self {
        CheckReport {
            name: name.into(),
            pass: false,
            details: Vec::new(),
            counterexample: Some(witness),
        }
    }

    pub fn with_detail(mut self, d: impl Into<String>) -> Self {
        self.details.push(d.into());
        self
    }
}

impl fmt::Display for CheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{}: {}",
            self.name,
            if self.pass { "pass" } else { "FAIL" }
        )?;
        for d in &self.details {
            writeln!(f, "  {d}")?;
        }
        if let Some(w) = &self.counterexample {
            writeln!(f, "  counterexample: {w}")?;
        }
        Ok(())
    }
}

/// Composed trace set versus the interleaving oracle over the component
/// trace sets, in the directions demanded by the combiner's class.
pub fn verify_thm1<A, B>(
    left: A,
    right: B,
    comb: impl Combiner<A::Pred, B::Pred> + 'static,
    limits: Limits,
) -> Result<CheckReport, EnumError>
where
    A: Slts + Clone,
    B: Slts + Clone,
{
    let t_left = enumerate_traces(&left, limits)?;
    let t_right = enumerate_traces(&right, limits)?;
    let class = comb.class();
    let name = format!("thm1[{}]", comb.name());
    let composed = compose(left, right, comb);
    let shared = composed.shared_tags().clone();
    let t_comp = enumerate_traces(&composed, limits)?;

    let mut oracle: BTreeSet<Trace> = BTreeSet::new();
    for t1 in &t_left {
        for t2 in &t_right {
            if t1.len().max(t2.len()) > limits.depth {
                continue;
            }
            for t in all_interleavings(t1, t2, &shared)? {
                if t.len() <= limits.depth {
                    oracle.insert(t);
                }
            }
        }
    }

    let check_superset = matches!(class, CombinerClass::Enabling | CombinerClass::Neutral);
    let check_subset = matches!(class, CombinerClass::Disabling | CombinerClass::Neutral);

    if check_superset {
        if let Some(missing) = oracle.difference(&t_comp).next() {
            return Ok(CheckReport::fail(
                name,
                format!(
                    "interleaving not reachable in composition: {}",
                    crate::symbolic::format_trace_inline(missing)
                ),
            ));
        }
    }
    if check_subset {
        if let Some(extra) = t_comp.difference(&oracle).next() {
            return Ok(CheckReport::fail(
                name,
                format!(
                    "composed trace is not an interleaving: {}",
                    crate::symbolic::format_trace_inline(extra)
                ),
            ));
        }
    }
    Ok(CheckReport::pass(name)
        .with_detail(format!(
            "component traces: {} x {}, composed: {}, oracle: {}",
            t_left.len(),
            t_right.len(),
            t_comp.len(),
            oracle.len()
        )))
}

/// Trace-set equality for commutativity and associativity of the empty
/// composition.
pub fn verify_symmetry_associativity<A, B, C>(
    a: A,
    b: B,
    c: C,
    limits: Limits,
) -> Result<CheckReport, EnumError>
where
    A: Slts + Clone,
    B: Slts + Clone,
    C: Slts + Clone,
{
    let ab = enumerate_traces(&compose(a.clone(), b.clone(), EmptyCombiner), limits)?;
    let ba = enumerate_traces(&compose(b.clone(), a.clone(), EmptyCombiner), limits)?;
    if ab != ba {
        let witness = ab
            .symmetric_difference(&ba)
            .next()
            .map(|t| crate::symbolic::format_trace_inline(t))
            .unwrap_or_default();
        return Ok(CheckReport::fail("symmetry", witness));
    }
    let ab_c = enumerate_traces(
        &compose(
            compose(a.clone(), b.clone(), EmptyCombiner),
            c.clone(),
            EmptyCombiner,
        ),
        limits,
    )?;
    let a_bc = enumerate_traces(
        &compose(a, compose(b, c, EmptyCombiner), EmptyCombiner),
        limits,
    )?;
    if ab_c != a_bc {
        let witness = ab_c
            .symmetric_difference(&a_bc)
            .next()
            .map(|t| crate::symbolic::format_trace_inline(t))
            .unwrap_or_default();
        return Ok(CheckReport::fail("associativity", witness));
    }
    Ok(CheckReport::pass("symmetry-associativity")
        .with_detail(format!("trace sets of size {} / {}", ab.len(), ab_c.len())))
}

/// Walks reachable composed states and checks that installing predicates
/// derived by the combiner never removes an available successor.
pub fn check_enabling<A, B>(
    left: A,
    right: B,
    comb: impl Combiner<A::Pred, B::Pred> + 'static,
    limits: Limits,
) -> Result<CheckReport, EnumError>
where
    A: Slts,
    B: Slts,
{
    let composed = compose(left, right, comb);
    let mut frontier = vec![composed.initial()];
    let mut seen: BTreeSet<St<Composed<A, B>>> = BTreeSet::new();
    let mut visited = 0usize;
    for _level in 0..=limits.depth {
        let mut next_frontier = Vec::new();
        for state in frontier {
            if !seen.insert(state.clone()) {
                continue;
            }
            visited += 1;
            if visited > limits.max_states {
                return Err(EnumError::StateBudgetExceeded(limits.max_states));
            }
            let signature = |s: &St<Composed<A, B>>| -> BTreeSet<(Event, _)> {
                composed
                    .successors(s)
                    .into_iter()
                    .map(|(e, n)| (e, (n.sigma.clone(), n.inner.clone())))
                    .collect()
            };
            let base = signature(&state);
            let derived = composed.combiner().derive(&state.pi);
            for phi in &derived {
                let mut enriched = state.clone();
                enriched.pi.insert(phi.clone());
                let grown = signature(&enriched);
                if !base.is_subset(&grown) {
                    let lost = base.difference(&grown).next().unwrap();
                    return Ok(CheckReport::fail(
                        "enabling",
                        format!("installing a derived predicate disabled `{}`", lost.0),
                    ));
                }
            }
            // Deduction steps are themselves reachable states.
            if !derived.is_empty() {
                let mut enriched = state.clone();
                enriched.pi.extend(derived);
                next_frontier.push(enriched);
            }
            for (_, succ) in composed.successors(&state) {
                next_frontier.push(succ);
            }
        }
        frontier = next_frontier;
    }
    Ok(CheckReport::pass("enabling").with_detail(format!("visited {visited} states")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dy::{DyAttacker, DyPred};
    use crate::dylib::{DyLibrary, LibPred};
    use crate::fixtures::{
        announcer_fixture, cevent, cfixture_single, cshared, fixture_sync_tags, guarded_fixture,
        local_event, FixtureLts, FxPred, UnlockCombiner,
    };
    use crate::symbolic::{enumerate_traces, saturate, Symbol};
    use crate::terms::{Name, Term, Theory};

    #[test]
    fn async_move_leaves_complement_untouched() {
        let a = FixtureLts::plain(
            vec![(0, local_event('l', 0), 1)],
            fixture_sync_tags(),
        );
        let b = announcer_fixture();
        let composed = compose(a, b, EmptyCombiner);
        let init = composed.initial();
        let moves = composed.successors(&init);
        let left_move = moves
            .iter()
            .find(|(ev, _)| *ev == local_event('l', 0))
            .expect("left side can move alone");
        assert_eq!(
            proj_right::<FxPred, FxPred>(&left_move.1.pi),
            proj_right(&init.pi)
        );
        assert_eq!(left_move.1.inner.1, init.inner.1);
    }

    #[test]
    fn shared_freshness_cannot_repeat() {
        let names = vec![Name::private("n")];
        let lib = DyLibrary::new(vec![], names.clone());
        let att = DyAttacker::new(names, vec![], Theory::empty());
        let composed = compose(lib, att, crate::dylib::lib_att_combiner());
        let init = composed.initial();
        let first: Vec<_> = composed
            .successors(&init)
            .into_iter()
            .filter(|(e, _)| matches!(e, Event::SFr(_)))
            .collect();
        assert_eq!(first.len(), 1, "one name, one draw");
        let after = &first[0].1;
        // Both sides recorded the mark; no second draw of the same name.
        assert!(after
            .pi
            .contains(&CombinedPred::Left(LibPred::LFresh(Name::private("n")))));
        assert!(after
            .pi
            .contains(&CombinedPred::Right(DyPred::Fresh(Name::private("n")))));
        assert!(!composed
            .successors(after)
            .iter()
            .any(|(e, _)| matches!(e, Event::SFr(_) | Event::Silent(_))));
    }

    #[test]
    fn combiner_facts_install_during_saturation() {
        let composed = compose(announcer_fixture(), guarded_fixture(), UnlockCombiner);
        let init = composed.initial();
        // Take the announcing move, then saturate: `go` appears.
        let (_, after) = composed
            .successors(&init)
            .into_iter()
            .find(|(e, _)| *e == local_event('a', 0))
            .unwrap();
        let sat = saturate(&composed, after, 2);
        assert!(sat.pi.contains(&CombinedPred::Right(FxPred("go".into()))));
        // The unlocked move is now available.
        assert!(composed
            .successors(&sat)
            .iter()
            .any(|(e, _)| *e == local_event('b', 1)));
    }

    #[test]
    fn attacker_knowledge_flows_through_guided_receive() {
        // The attacker learns whatever symbol a sender proposes.
        let att = DyAttacker::new(vec![], vec![], Theory::empty());
        let s = att.initial();
        let ev = Event::P2A(Symbol::new("c"));
        let accepted = att.accept(&s, &ev);
        assert_eq!(accepted.len(), 1);
        assert!(accepted[0].pi.contains(&DyPred::K(Term::sym("c"))));
    }

    #[test]
    fn concrete_product_free_and_forced() {
        let free: std::collections::BTreeSet<CEventTag> = BTreeSet::new();
        let a = cfixture_single(cevent("a"), free.clone());
        let b = cfixture_single(cevent("b"), free.clone());
        let traces = enumerate_concrete(&compose_concrete(a, b), 4, 10_000).unwrap();
        let expected: BTreeSet<Vec<CEvent>> = [
            vec![],
            vec![cevent("a")],
            vec![cevent("b")],
            vec![cevent("a"), cevent("b")],
            vec![cevent("b"), cevent("a")],
        ]
        .into_iter()
        .collect();
        assert_eq!(traces, expected);

        let sync: std::collections::BTreeSet<CEventTag> =
            [CEventTag::Fr].into_iter().collect();
        let a = cfixture_single(cshared(0), sync.clone());
        let b = cfixture_single(cshared(0), sync.clone());
        let traces = enumerate_concrete(&compose_concrete(a, b), 4, 10_000).unwrap();
        let expected: BTreeSet<Vec<CEvent>> =
            [vec![], vec![cshared(0)]].into_iter().collect();
        assert_eq!(traces, expected);
    }

    #[test]
    fn verify_thm1_neutral_checks_both_directions() {
        let a = FixtureLts::plain(
            vec![(0, local_event('a', 0), 1), (1, shared(), 2)],
            fixture_sync_tags(),
        );
        let b = FixtureLts::plain(vec![(0, shared(), 1)], fixture_sync_tags());
        let report = verify_thm1(a, b, EmptyCombiner, Limits::new(4, 0)).unwrap();
        assert!(report.pass, "{report}");
    }

    fn shared() -> Event {
        crate::fixtures::shared_event(0)
    }

    #[test]
    fn trace_inclusion_is_compositional() {
        // Removing transitions refines a component; composition with a
        // shared partner preserves the inclusion, with the empty relation
        // and with an enabling one on the abstract side.
        let mut rng = crate::fixtures::Rng::new(11);
        let limits = Limits::new(4, 2);
        for _ in 0..20 {
            let abstract_side = crate::fixtures::random_fixture(&mut rng, 'a');
            let mut refined = abstract_side.clone();
            if refined.transitions.len() > 1 {
                let drop = (rng.next_u64() as usize) % refined.transitions.len();
                refined.transitions.remove(drop);
            }
            let partner = crate::fixtures::random_fixture(&mut rng, 'b');

            let t_refined = enumerate_traces(
                &compose(refined.clone(), partner.clone(), EmptyCombiner),
                limits,
            )
            .unwrap();
            let t_abstract = enumerate_traces(
                &compose(abstract_side.clone(), partner.clone(), EmptyCombiner),
                limits,
            )
            .unwrap();
            assert!(
                t_refined.is_subset(&t_abstract),
                "inclusion lost under empty composition"
            );

            // Enabling relation on the abstract side only adds behavior.
            let t_abstract_enabled = enumerate_traces(
                &compose(abstract_side.clone(), partner.clone(), UnlockCombiner),
                limits,
            )
            .unwrap();
            assert!(
                t_refined.is_subset(&t_abstract_enabled),
                "inclusion lost against the enabled abstract side"
            );
        }
    }

    #[test]
    fn state_budget_is_enforced() {
        let a = FixtureLts::plain(
            vec![(0, local_event('a', 0), 0), (0, local_event('a', 1), 0)],
            fixture_sync_tags(),
        );
        let mut limits = Limits::new(10, 0);
        limits.max_states = 5;
        assert!(matches!(
            enumerate_traces(&a, limits),
            Err(EnumError::StateBudgetExceeded(5))
        ));
    }
}
