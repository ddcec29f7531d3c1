//! Small hand-built and seed-generated transition systems used by the
//! property suites: plain finite LTS over a mixed event alphabet, guarded
//! variants whose moves react to predicates, and the combiners that
//! exercise enabling and disabling behavior.

use std::collections::BTreeSet;
use std::fmt;

use crate::bir::{Bval, CEvent, CEventTag};
use crate::compose::{CLts, CombinedPred, Combiner, CombinerClass};
use crate::symbolic::{Event, EventTag, Slts, SymState, Symbol, SymbolSet};
use crate::terms::Name;

/// SplitMix64: deterministic across platforms and releases.
#[derive(Debug, Clone)]
pub struct Rng(u64);

impl Rng {
    pub fn new(seed: u64) -> Self {
        Rng(seed)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }

    pub fn below(&mut self, n: usize) -> usize {
        (self.next_u64() % n.max(1) as u64) as usize
    }
}

/// Fixture predicate: an opaque token.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct FxPred(pub String);

impl fmt::Display for FxPred {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Guard on a transition: the predicate must be present or absent.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Guard {
    Present(FxPred),
    Absent(FxPred),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FxTrans {
    pub from: usize,
    pub ev: Event,
    pub to: usize,
    pub guard: Option<Guard>,
    pub adds: Vec<FxPred>,
}

/// A finite LTS with optionally guarded transitions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FixtureLts {
    pub initial: usize,
    pub transitions: Vec<FxTrans>,
    pub sync: BTreeSet<EventTag>,
}

impl FixtureLts {
    pub fn plain(transitions: Vec<(usize, Event, usize)>, sync: BTreeSet<EventTag>) -> Self {
        FixtureLts {
            initial: 0,
            transitions: transitions
                .into_iter()
                .map(|(from, ev, to)| FxTrans {
                    from,
                    ev,
                    to,
                    guard: None,
                    adds: Vec::new(),
                })
                .collect(),
            sync,
        }
    }
}

impl Slts for FixtureLts {
    type Inner = usize;
    type Pred = FxPred;

    fn initial(&self) -> SymState<usize, FxPred> {
        SymState::new(SymbolSet::new(), BTreeSet::new(), self.initial)
    }

    fn successors(&self, s: &SymState<usize, FxPred>) -> Vec<(Event, SymState<usize, FxPred>)> {
        self.transitions
            .iter()
            .filter(|t| t.from == s.inner)
            .filter(|t| match &t.guard {
                None => true,
                Some(Guard::Present(p)) => s.pi.contains(p),
                Some(Guard::Absent(p)) => !s.pi.contains(p),
            })
            .map(|t| {
                let mut pi = s.pi.clone();
                pi.extend(t.adds.iter().cloned());
                (t.ev.clone(), SymState::new(s.sigma.clone(), pi, t.to))
            })
            .collect()
    }

    fn sync_tags(&self) -> BTreeSet<EventTag> {
        self.sync.clone()
    }
}

/// Shared fixture events synchronize on the `SFr` tag; local ones use the
/// `Ev` tag.
pub fn shared_event(i: usize) -> Event {
    Event::SFr(Name::private(format!("s{i}")))
}

pub fn local_event(side: char, i: usize) -> Event {
    Event::Ev(Symbol::new(format!("{side}{i}")))
}

pub fn fixture_sync_tags() -> BTreeSet<EventTag> {
    [EventTag::SFr].into_iter().collect()
}

/// A random LTS over up to three states: a few transitions mixing shared
/// and side-local events. Deterministic in the seed.
pub fn random_fixture(rng: &mut Rng, side: char) -> FixtureLts {
    let n_states = 3;
    let n_trans = 2 + rng.below(4);
    let mut transitions = Vec::new();
    for _ in 0..n_trans {
        let from = rng.below(n_states);
        let to = rng.below(n_states);
        let ev = if rng.below(2) == 0 {
            shared_event(rng.below(2))
        } else {
            local_event(side, rng.below(3))
        };
        transitions.push((from, ev, to));
    }
    FixtureLts::plain(transitions, fixture_sync_tags())
}

/// Left side announces `ping`; the combiner mirrors it as `go` on the
/// right, where a transition waits for it.
#[derive(Debug, Clone, Copy, Default)]
pub struct UnlockCombiner;

impl Combiner<FxPred, FxPred> for UnlockCombiner {
    fn derive(
        &self,
        pi: &BTreeSet<CombinedPred<FxPred, FxPred>>,
    ) -> Vec<CombinedPred<FxPred, FxPred>> {
        let has_ping = pi.contains(&CombinedPred::Left(FxPred("ping".into())));
        let go = CombinedPred::Right(FxPred("go".into()));
        if has_ping && !pi.contains(&go) {
            vec![go]
        } else {
            Vec::new()
        }
    }

    fn class(&self) -> CombinerClass {
        CombinerClass::Enabling
    }

    fn name(&self) -> &'static str {
        "unlock"
    }
}

/// Like `UnlockCombiner` but the derived fact falsifies an absence guard,
/// so installing it disables a transition.
#[derive(Debug, Clone, Copy, Default)]
pub struct SpoilerCombiner;

impl Combiner<FxPred, FxPred> for SpoilerCombiner {
    fn derive(
        &self,
        pi: &BTreeSet<CombinedPred<FxPred, FxPred>>,
    ) -> Vec<CombinedPred<FxPred, FxPred>> {
        let has_ping = pi.contains(&CombinedPred::Left(FxPred("ping".into())));
        let poison = CombinedPred::Right(FxPred("poison".into()));
        if has_ping && !pi.contains(&poison) {
            vec![poison]
        } else {
            Vec::new()
        }
    }

    fn class(&self) -> CombinerClass {
        CombinerClass::Disabling
    }

    fn name(&self) -> &'static str {
        "spoiler"
    }
}

/// Left component of the guarded pair: one move that records `ping`.
pub fn announcer_fixture() -> FixtureLts {
    FixtureLts {
        initial: 0,
        transitions: vec![FxTrans {
            from: 0,
            ev: local_event('a', 0),
            to: 1,
            guard: None,
            adds: vec![FxPred("ping".into())],
        }],
        sync: fixture_sync_tags(),
    }
}

/// Right component: an unguarded move, one waiting on `go`, and one
/// blocked by `poison`.
pub fn guarded_fixture() -> FixtureLts {
    FixtureLts {
        initial: 0,
        transitions: vec![
            FxTrans {
                from: 0,
                ev: local_event('b', 0),
                to: 1,
                guard: None,
                adds: Vec::new(),
            },
            FxTrans {
                from: 0,
                ev: local_event('b', 1),
                to: 2,
                guard: Some(Guard::Present(FxPred("go".into()))),
                adds: Vec::new(),
            },
            FxTrans {
                from: 0,
                ev: local_event('b', 2),
                to: 2,
                guard: Some(Guard::Absent(FxPred("poison".into()))),
                adds: Vec::new(),
            },
        ],
        sync: fixture_sync_tags(),
    }
}

/// A finite concrete LTS for product tests.
#[derive(Debug, Clone)]
pub struct CFixture {
    pub initial: usize,
    pub transitions: Vec<(usize, CEvent, usize)>,
    pub sync: BTreeSet<CEventTag>,
}

impl CLts for CFixture {
    type State = usize;

    fn initial(&self) -> usize {
        self.initial
    }

    fn successors(&self, s: &usize) -> Vec<(CEvent, usize)> {
        self.transitions
            .iter()
            .filter(|(from, _, _)| from == s)
            .map(|(_, ev, to)| (ev.clone(), *to))
            .collect()
    }

    fn sync_tags(&self) -> BTreeSet<CEventTag> {
        self.sync.clone()
    }
}

pub fn cfixture_single(ev: CEvent, sync: BTreeSet<CEventTag>) -> CFixture {
    CFixture {
        initial: 0,
        transitions: vec![(0, ev, 1)],
        sync,
    }
}

pub fn cevent(label: &str) -> CEvent {
    CEvent::Ev(label.to_string())
}

pub fn cshared(i: usize) -> CEvent {
    CEvent::Fr(Bval::Int(i as u64))
}

/// A random execution tree over well-formed events: binders mint against
/// the running symbol set, references use already-bound symbols.
pub fn random_tree(rng: &mut Rng, max_nodes: usize) -> crate::sbir::ExecTree {
    use crate::sbir::{ExecTree, SymExpr};
    use crate::symbolic::AssignRhs;
    use crate::terms::FnSym;

    struct Gen<'a> {
        rng: &'a mut Rng,
        nodes_left: usize,
    }

    fn mint(seen: &mut Vec<String>, base: &str) -> String {
        let mut cand = base.to_string();
        let mut i = 0;
        while seen.contains(&cand) {
            cand = format!("{base}{i}");
            i += 1;
        }
        seen.push(cand.clone());
        cand
    }

    impl Gen<'_> {
        fn go(&mut self, bound: &mut Vec<String>, names: &mut Vec<String>, depth: usize) -> crate::sbir::ExecTree {
            if self.nodes_left == 0 || depth > 8 {
                return ExecTree::Leaf;
            }
            self.nodes_left -= 1;
            let pc = (Bval::Int(depth as u64), 0);
            let pick = self.rng.below(10);
            match pick {
                // Branch node.
                0 if depth < 4 => {
                    let cond = SymExpr::sym(mint(bound, "g"));
                    let a = self.go(&mut bound.clone(), &mut names.clone(), depth + 1);
                    let b = self.go(&mut bound.clone(), &mut names.clone(), depth + 1);
                    ExecTree::Branch {
                        pc,
                        cond,
                        then_t: Box::new(a),
                        else_t: Box::new(b),
                    }
                }
                // Loop marker.
                1 if depth < 4 => {
                    let next = self.go(bound, names, depth + 1);
                    ExecTree::Node {
                        pc,
                        ev: Event::Loop,
                        next: Box::new(next),
                    }
                }
                2 => {
                    let n = mint(names, "n");
                    let ev = Event::SFr(Name::private(n));
                    let next = self.go(bound, names, depth + 1);
                    ExecTree::Node {
                        pc,
                        ev,
                        next: Box::new(next),
                    }
                }
                3 | 4 => {
                    let x = mint(bound, "x");
                    let ev = Event::A2P(Symbol::new(x));
                    let next = self.go(bound, names, depth + 1);
                    ExecTree::Node {
                        pc,
                        ev,
                        next: Box::new(next),
                    }
                }
                5 | 6 if !bound.is_empty() => {
                    let x = bound[self.rng.below(bound.len())].clone();
                    let ev = Event::P2A(Symbol::new(x));
                    let next = self.go(bound, names, depth + 1);
                    ExecTree::Node {
                        pc,
                        ev,
                        next: Box::new(next),
                    }
                }
                7 if !bound.is_empty() => {
                    let a = bound[self.rng.below(bound.len())].clone();
                    let y = mint(bound, "h");
                    let ev = Event::FCall(
                        FnSym::new("h", 1),
                        vec![Symbol::new(a)],
                        Symbol::new(y),
                    );
                    let next = self.go(bound, names, depth + 1);
                    ExecTree::Node {
                        pc,
                        ev,
                        next: Box::new(next),
                    }
                }
                _ => {
                    let rhs = if !bound.is_empty() && self.rng.below(2) == 0 {
                        SymExpr::Binop(
                            crate::bir::BinOp::Xor,
                            Box::new(SymExpr::sym(
                                bound[self.rng.below(bound.len())].clone(),
                            )),
                            Box::new(SymExpr::int(self.rng.next_u64() % 16)),
                        )
                    } else {
                        SymExpr::int(self.rng.next_u64() % 16)
                    };
                    let x = mint(bound, "r");
                    let ev = Event::Assign(Symbol::new(x), AssignRhs::Expr(rhs));
                    let next = self.go(bound, names, depth + 1);
                    ExecTree::Node {
                        pc,
                        ev,
                        next: Box::new(next),
                    }
                }
            }
        }
    }

    let mut gen = Gen {
        rng,
        nodes_left: max_nodes,
    };
    gen.go(&mut Vec::new(), &mut Vec::new(), 0)
}
