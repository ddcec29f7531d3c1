//! The Dolev-Yao attacker as a symbolic LTS.
//!
//! The predicate set holds knowledge facts `K(t)`, equivalences `t1 ~ t2`,
//! freshness marks `fresh(n)`, and alias mappings `x ↦ t`. `dy_deduce` is a
//! bounded backward-chaining prover over the six deduction rules and
//! returns an explicit proof tree; the transition relation covers message
//! receipt, sending of known symbols, aliasing, and freshness bookkeeping.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::symbolic::{fresh_symbol, Event, EventTag, Slts, SymState, Symbol, SymbolSet};
use crate::terms::{mk_app, FnSym, Name, Term, Theory};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DeduceError {
    #[error("goal is not derivable (search exhausted)")]
    NotDerivable,
    #[error("proof bound exceeded (inconclusive)")]
    BoundExceeded,
}

/// The attacker's facts.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum DyPred {
    K(Term),
    Eq(Term, Term),
    Fresh(Name),
    Maps(Symbol, Term),
}

impl fmt::Display for DyPred {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DyPred::K(t) => write!(f, "K({t})"),
            DyPred::Eq(a, b) => write!(f, "{a} ~ {b}"),
            DyPred::Fresh(n) => write!(f, "fresh({n})"),
            DyPred::Maps(x, t) => write!(f, "{x} \u{21a6} {t}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum DyRule {
    K0,
    App,
    Pub,
    Subst,
    Eq,
    AlSubst,
    /// An equivalence fact taken directly from the predicate set, as
    /// installed by events or combined deduction.
    EqFact,
}

impl fmt::Display for DyRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            DyRule::K0 => "K0",
            DyRule::App => "App",
            DyRule::Pub => "Pub",
            DyRule::Subst => "Subst",
            DyRule::Eq => "Eq",
            DyRule::AlSubst => "AlSubst",
            DyRule::EqFact => "EqFact",
        };
        f.write_str(s)
    }
}

/// A derivation tree; each node names the rule that concluded it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Proof {
    pub rule: DyRule,
    pub goal: DyPred,
    pub detail: Option<String>,
    pub premises: Vec<Proof>,
}

impl Proof {
    fn leaf(rule: DyRule, goal: DyPred) -> Self {
        Proof {
            rule,
            goal,
            detail: None,
            premises: Vec::new(),
        }
    }

    pub fn rule_counts(&self) -> BTreeMap<DyRule, usize> {
        let mut out = BTreeMap::new();
        let mut stack = vec![self];
        while let Some(p) = stack.pop() {
            *out.entry(p.rule).or_insert(0) += 1;
            stack.extend(p.premises.iter());
        }
        out
    }

    fn render_into(&self, out: &mut String, indent: usize) {
        for _ in 0..indent {
            out.push_str("  ");
        }
        out.push_str(&self.rule.to_string());
        if let Some(d) = &self.detail {
            out.push(' ');
            out.push_str(d);
        }
        out.push_str(": ");
        out.push_str(&self.goal.to_string());
        out.push('\n');
        for p in &self.premises {
            p.render_into(out, indent + 1);
        }
    }
}

impl fmt::Display for Proof {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = String::new();
        self.render_into(&mut s, 0);
        f.write_str(s.trim_end())
    }
}

/// Subterm closure of every term mentioned in the predicate set, plus the
/// goal's subterms. Symbols on the left of alias facts count as terms.
fn term_pool(pi: &BTreeSet<DyPred>, goal: Option<&DyPred>) -> Vec<Term> {
    let mut pool: BTreeSet<Term> = BTreeSet::new();
    let mut add = |t: &Term| {
        for s in t.subterms() {
            pool.insert(s.clone());
        }
    };
    for p in pi {
        match p {
            DyPred::K(t) => add(t),
            DyPred::Eq(a, b) => {
                add(a);
                add(b);
            }
            DyPred::Fresh(n) => add(&Term::Name(n.clone())),
            DyPred::Maps(x, t) => {
                add(&Term::Sym(x.clone()));
                add(t);
            }
        }
    }
    match goal {
        Some(DyPred::K(t)) => add(t),
        Some(DyPred::Eq(a, b)) => {
            add(a);
            add(b);
        }
        _ => {}
    }
    pool.into_iter().collect()
}

struct Search<'a> {
    pi: &'a BTreeSet<DyPred>,
    theory: &'a Theory,
    pool: Vec<Term>,
    memo_fail: BTreeMap<DyPred, usize>,
    memo_ok: BTreeMap<DyPred, Proof>,
    cut: bool,
}

const SUBST_TUPLE_CAP: usize = 4096;

impl Search<'_> {
    fn prove(&mut self, goal: &DyPred, depth: usize) -> Option<Proof> {
        if let Some(p) = self.memo_ok.get(goal) {
            return Some(p.clone());
        }
        if depth == 0 {
            self.cut = true;
            return None;
        }
        if let Some(&failed_at) = self.memo_fail.get(goal) {
            if failed_at >= depth {
                return None;
            }
        }
        let result = match goal {
            DyPred::K(t) => self.prove_k(t, depth),
            DyPred::Eq(a, b) => self.prove_eq(a, b),
            _ => None,
        };
        match &result {
            Some(p) => {
                self.memo_ok.insert(goal.clone(), p.clone());
            }
            None => {
                let entry = self.memo_fail.entry(goal.clone()).or_insert(0);
                *entry = (*entry).max(depth);
            }
        }
        result
    }

    fn prove_k(&mut self, t: &Term, depth: usize) -> Option<Proof> {
        let goal = DyPred::K(t.clone());
        if self.pi.contains(&goal) {
            return Some(Proof::leaf(DyRule::K0, goal));
        }
        if let Term::Name(n) = t {
            if n.is_public() {
                return Some(Proof::leaf(DyRule::Pub, goal));
            }
        }
        // Al-Subst: a known symbol aliases this exact term.
        let aliases: Vec<Symbol> = self
            .pi
            .iter()
            .filter_map(|p| match p {
                DyPred::Maps(x, u) if u == t => Some(x.clone()),
                _ => None,
            })
            .collect();
        for x in aliases {
            if let Some(pk) = self.prove(&DyPred::K(Term::Sym(x.clone())), depth - 1) {
                return Some(Proof {
                    rule: DyRule::AlSubst,
                    goal,
                    detail: Some(x.to_string()),
                    premises: vec![pk],
                });
            }
        }
        // The mapping carries knowledge the other way as well: an alias
        // of a derivable term is itself transmittable.
        if let Term::Sym(x) = t {
            let aliased: Vec<Term> = self
                .pi
                .iter()
                .filter_map(|p| match p {
                    DyPred::Maps(y, u) if y == x => Some(u.clone()),
                    _ => None,
                })
                .collect();
            for u in aliased {
                if let Some(pk) = self.prove(&DyPred::K(u), depth - 1) {
                    return Some(Proof {
                        rule: DyRule::AlSubst,
                        goal,
                        detail: Some(x.to_string()),
                        premises: vec![pk],
                    });
                }
            }
        }
        // App: build the term from its pieces.
        if let Term::App(f, args) = t {
            let mut premises = Vec::with_capacity(args.len());
            let mut ok = true;
            for a in args {
                match self.prove(&DyPred::K(a.clone()), depth - 1) {
                    Some(p) => premises.push(p),
                    None => {
                        ok = false;
                        break;
                    }
                }
            }
            if ok {
                return Some(Proof {
                    rule: DyRule::App,
                    goal,
                    detail: Some(f.name().to_string()),
                    premises,
                });
            }
        }
        // Subst via an equivalence fact already present.
        let eq_mates: Vec<Term> = self
            .pi
            .iter()
            .filter_map(|p| match p {
                DyPred::Eq(a, b) if b == t => Some(a.clone()),
                DyPred::Eq(a, b) if a == t => Some(b.clone()),
                _ => None,
            })
            .collect();
        for mate in eq_mates {
            if let Some(pk) = self.prove(&DyPred::K(mate.clone()), depth - 1) {
                let eq = Proof::leaf(DyRule::EqFact, DyPred::Eq(mate.clone(), t.clone()));
                return Some(Proof {
                    rule: DyRule::Subst,
                    goal,
                    detail: None,
                    premises: vec![pk, eq],
                });
            }
        }
        // Subst via one rewrite-rule instance: fix the rule's result to
        // the goal and complete the remaining variables by matching the
        // rule's argument patterns against the candidate pool.
        for eq in self.theory.equations().to_vec() {
            let mut base = BTreeMap::new();
            if !crate::terms::match_pattern_pub(eq.rhs(), t, &mut base) {
                continue;
            }
            let Term::App(_, lhs_args) = eq.lhs() else {
                continue;
            };
            let mut completions = vec![base];
            for pat in lhs_args {
                let mut grown = Vec::new();
                for binds in &completions {
                    let unbound = crate::terms::symbols_of(pat)
                        .into_iter()
                        .any(|v| !binds.contains_key(&v));
                    if !unbound {
                        grown.push(binds.clone());
                        continue;
                    }
                    for u in &self.pool {
                        let mut b2 = binds.clone();
                        if crate::terms::match_pattern_pub(pat, u, &mut b2) {
                            grown.push(b2);
                        }
                    }
                }
                grown.sort();
                grown.dedup();
                grown.truncate(SUBST_TUPLE_CAP);
                completions = grown;
            }
            for binds in completions {
                let candidate = crate::terms::instantiate_pub(eq.lhs(), &binds);
                if candidate == *t {
                    continue;
                }
                let Ok(true) = self.theory.eq_mod_e(&candidate, t) else {
                    continue;
                };
                if let Some(pk) = self.prove(&DyPred::K(candidate.clone()), depth - 1) {
                    let eqp = Proof::leaf(DyRule::Eq, DyPred::Eq(candidate, t.clone()));
                    return Some(Proof {
                        rule: DyRule::Subst,
                        goal,
                        detail: None,
                        premises: vec![pk, eqp],
                    });
                }
            }
        }
        None
    }

    fn prove_eq(&mut self, a: &Term, b: &Term) -> Option<Proof> {
        let goal = DyPred::Eq(a.clone(), b.clone());
        if let Ok(true) = self.theory.eq_mod_e(a, b) {
            return Some(Proof::leaf(DyRule::Eq, goal));
        }
        if self.pi.contains(&goal) || self.pi.contains(&DyPred::Eq(b.clone(), a.clone())) {
            return Some(Proof::leaf(DyRule::EqFact, goal));
        }
        None
    }
}

fn tuple_assignments<'a>(pool: &'a [Term], k: usize) -> Box<dyn Iterator<Item = Vec<&'a Term>> + 'a> {
    if k == 0 {
        return Box::new(std::iter::once(Vec::new()));
    }
    Box::new(tuple_assignments(pool, k - 1).flat_map(move |prefix| {
        pool.iter().map(move |t| {
            let mut v = prefix.clone();
            v.push(t);
            v
        })
    }))
}

/// Bounded backward-chaining proof search for `K(t)` and `t1 ~ t2` goals.
pub fn dy_deduce(
    pi: &BTreeSet<DyPred>,
    goal: &DyPred,
    bound: usize,
    theory: &Theory,
) -> Result<Proof, DeduceError> {
    let mut search = Search {
        pi,
        theory,
        pool: term_pool(pi, Some(goal)),
        memo_fail: BTreeMap::new(),
        memo_ok: BTreeMap::new(),
        cut: false,
    };
    match search.prove(goal, bound.max(1)) {
        Some(p) => Ok(p),
        None if search.cut => Err(DeduceError::BoundExceeded),
        None => Err(DeduceError::NotDerivable),
    }
}

/// The stateless DY attacker.
#[derive(Debug, Clone)]
pub struct DyAttacker {
    /// Names the attacker may pick or mention on its own.
    pub names: Vec<Name>,
    pub sig: Vec<FnSym>,
    pub theory: Theory,
    /// Proof depth for derivability checks inside the transition relation.
    pub bound: usize,
    /// Cap on the candidate pool for alias argument terms.
    pub alias_pool_cap: usize,
    /// Whether silent steps eagerly install every derivable knowledge
    /// fact. Derivability itself is unaffected; queries run the same
    /// closure on demand.
    pub saturate_knowledge: bool,
}

impl DyAttacker {
    pub fn new(names: Vec<Name>, sig: Vec<FnSym>, theory: Theory) -> Self {
        DyAttacker {
            names,
            sig,
            theory,
            bound: 8,
            alias_pool_cap: 12,
            saturate_knowledge: true,
        }
    }

    pub fn knows(&self, pi: &BTreeSet<DyPred>, t: &Term) -> bool {
        dy_deduce(pi, &DyPred::K(t.clone()), self.bound, &self.theory).is_ok()
    }

    fn private_pool(&self) -> impl Iterator<Item = &Name> {
        self.names.iter().filter(|n| !n.is_public())
    }
}

pub type DyState = SymState<(), DyPred>;

impl Slts for DyAttacker {
    type Inner = ();
    type Pred = DyPred;

    fn initial(&self) -> DyState {
        SymState::new(SymbolSet::new(), BTreeSet::new(), ())
    }

    fn successors(&self, s: &DyState) -> Vec<(Event, DyState)> {
        let mut out = Vec::new();
        // Receive: always enabled, the environment picks the symbol.
        let (x, sigma) = fresh_symbol(&s.sigma, "x");
        let mut pi = s.pi.clone();
        pi.insert(DyPred::K(Term::Sym(x.clone())));
        out.push((
            Event::P2A(x),
            SymState::new(sigma, pi, ()),
        ));
        // Send any known symbol.
        for x in s.sigma.iter() {
            if self.knows(&s.pi, &Term::Sym(x.clone())) {
                out.push((Event::A2P(x.clone()), s.clone()));
            }
        }
        // Alias a composite term built over the candidate pool.
        let pool: Vec<Term> = term_pool(&s.pi, None)
            .into_iter()
            .chain(self.names.iter().filter(|n| n.is_public()).map(|n| Term::Name(n.clone())))
            .take(self.alias_pool_cap)
            .collect();
        for f in &self.sig {
            if f.arity() == 0 {
                continue;
            }
            if pool.len().pow(f.arity() as u32) > SUBST_TUPLE_CAP {
                continue;
            }
            for args in tuple_assignments(&pool, f.arity()) {
                let term = mk_app(f, args.into_iter().cloned().collect())
                    .expect("pool tuples match arity");
                let (z, sigma) = fresh_symbol(&s.sigma, "z");
                let mut pi = s.pi.clone();
                pi.insert(DyPred::Maps(z.clone(), term.clone()));
                out.push((Event::Alias(z, term), SymState::new(sigma, pi, ())));
            }
        }
        // Freshness: observe another component's draw, or pick a name.
        for n in self.private_pool() {
            if s.pi.contains(&DyPred::Fresh(n.clone())) {
                continue;
            }
            let mut pi = s.pi.clone();
            pi.insert(DyPred::Fresh(n.clone()));
            out.push((Event::SFr(n.clone()), SymState::new(s.sigma.clone(), pi, ())));

            let mut pi2 = s.pi.clone();
            pi2.insert(DyPred::Fresh(n.clone()));
            pi2.insert(DyPred::K(Term::Name(n.clone())));
            out.push((
                Event::Silent(n.clone()),
                SymState::new(s.sigma.clone(), pi2, ()),
            ));
        }
        out
    }

    fn accept(&self, s: &DyState, ev: &Event) -> Vec<DyState> {
        match ev {
            // Adopt whatever symbol the sender minted.
            Event::P2A(x) => {
                let mut sigma = s.sigma.clone();
                sigma.insert(x.clone());
                let mut pi = s.pi.clone();
                pi.insert(DyPred::K(Term::Sym(x.clone())));
                vec![SymState::new(sigma, pi, ())]
            }
            Event::A2P(x) => {
                if s.sigma.contains(x) {
                    // Replay of an existing symbol: only if known.
                    if self.knows(&s.pi, &Term::Sym(x.clone())) {
                        vec![s.clone()]
                    } else {
                        vec![]
                    }
                } else {
                    // Injection: the receiver minted a placeholder for a
                    // value the attacker chose, so the attacker knows it.
                    let mut sigma = s.sigma.clone();
                    sigma.insert(x.clone());
                    let mut pi = s.pi.clone();
                    pi.insert(DyPred::K(Term::Sym(x.clone())));
                    vec![SymState::new(sigma, pi, ())]
                }
            }
            Event::SFr(n) => {
                if n.is_public() || s.pi.contains(&DyPred::Fresh(n.clone())) {
                    return vec![];
                }
                let mut pi = s.pi.clone();
                pi.insert(DyPred::Fresh(n.clone()));
                vec![SymState::new(s.sigma.clone(), pi, ())]
            }
            Event::Silent(n) => {
                if n.is_public() || s.pi.contains(&DyPred::Fresh(n.clone())) {
                    return vec![];
                }
                let mut pi = s.pi.clone();
                pi.insert(DyPred::Fresh(n.clone()));
                pi.insert(DyPred::K(Term::Name(n.clone())));
                vec![SymState::new(s.sigma.clone(), pi, ())]
            }
            _ => vec![],
        }
    }

    fn deduce_step(&self, s: &DyState) -> Vec<DyPred> {
        if !self.saturate_knowledge {
            return Vec::new();
        }
        let mut out = Vec::new();
        for t in term_pool(&s.pi, None) {
            let fact = DyPred::K(t.clone());
            if s.pi.contains(&fact) {
                continue;
            }
            if dy_deduce(&s.pi, &fact, self.bound, &self.theory).is_ok() {
                out.push(fact);
            }
        }
        out
    }

    fn sync_tags(&self) -> BTreeSet<EventTag> {
        [EventTag::SFr, EventTag::A2P, EventTag::P2A, EventTag::Silent]
            .into_iter()
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::terms::Equation;

    fn senc() -> FnSym {
        FnSym::new("senc", 2)
    }

    fn sdec() -> FnSym {
        FnSym::new("sdec", 2)
    }

    fn dec_theory() -> Theory {
        let x = Term::sym("x");
        let y = Term::sym("y");
        let lhs = mk_app(
            &sdec(),
            vec![mk_app(&senc(), vec![x.clone(), y.clone()]).unwrap(), y],
        )
        .unwrap();
        Theory::new(vec![Equation::new(lhs, x).unwrap()])
    }

    fn example2_pi() -> BTreeSet<DyPred> {
        let m = Term::sym("m");
        let k = Term::sym("k");
        let enc = mk_app(&senc(), vec![m, k.clone()]).unwrap();
        [
            DyPred::K(Term::sym("c")),
            DyPred::Maps(Symbol::new("c"), enc),
            DyPred::K(k),
        ]
        .into_iter()
        .collect()
    }

    #[test]
    fn logical_truth_derivation() {
        let pi = example2_pi();
        let proof = dy_deduce(&pi, &DyPred::K(Term::sym("m")), 6, &dec_theory()).unwrap();
        let counts = proof.rule_counts();
        assert_eq!(counts.get(&DyRule::Subst), Some(&1));
        assert_eq!(counts.get(&DyRule::App), Some(&1));
        assert_eq!(counts.get(&DyRule::Eq), Some(&1));
        assert_eq!(counts.get(&DyRule::AlSubst), Some(&1));
        assert_eq!(counts.get(&DyRule::K0), Some(&2));
        assert_eq!(counts.get(&DyRule::Pub), None);
    }

    #[test]
    fn public_names_are_known() {
        let pi = BTreeSet::new();
        let goal = DyPred::K(Term::Name(Name::public("n_pub")));
        let proof = dy_deduce(&pi, &goal, 2, &Theory::empty()).unwrap();
        assert_eq!(proof.rule, DyRule::Pub);
    }

    #[test]
    fn missing_key_blocks_decryption() {
        let m = Term::sym("m");
        let k = Term::sym("k");
        let enc = mk_app(&senc(), vec![m.clone(), k]).unwrap();
        let pi: BTreeSet<DyPred> = [
            DyPred::K(Term::sym("c")),
            DyPred::Maps(Symbol::new("c"), enc),
        ]
        .into_iter()
        .collect();
        let err = dy_deduce(&pi, &DyPred::K(m), 8, &dec_theory());
        assert!(err.is_err());
    }

    fn attacker() -> DyAttacker {
        DyAttacker::new(
            vec![Name::private("n"), Name::private("n2")],
            vec![senc(), sdec()],
            dec_theory(),
        )
    }

    #[test]
    fn receive_is_always_enabled() {
        let a = attacker();
        let s = a.initial();
        let succ = a.successors(&s);
        let p2a: Vec<_> = succ
            .iter()
            .filter(|(e, _)| matches!(e, Event::P2A(_)))
            .collect();
        assert_eq!(p2a.len(), 1);
        match &p2a[0].0 {
            Event::P2A(x) => {
                assert_eq!(x.id(), "x0");
                assert!(p2a[0].1.pi.contains(&DyPred::K(Term::Sym(x.clone()))));
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn known_symbols_can_be_sent() {
        let a = attacker();
        let mut s = a.initial();
        let x = Symbol::new("x0");
        s.sigma.insert(x.clone());
        s.pi.insert(DyPred::K(Term::Sym(x.clone())));
        let succ = a.successors(&s);
        assert!(succ.iter().any(|(e, _)| *e == Event::A2P(x.clone())));
    }

    #[test]
    fn freshness_guard_blocks_reuse() {
        let a = attacker();
        let mut s = a.initial();
        s.pi.insert(DyPred::Fresh(Name::private("n")));
        let succ = a.successors(&s);
        assert!(!succ
            .iter()
            .any(|(e, _)| *e == Event::SFr(Name::private("n"))));
        // The other pool name is still available.
        assert!(succ
            .iter()
            .any(|(e, _)| *e == Event::SFr(Name::private("n2"))));
    }

    /// Forward-saturation oracle over a finite pool: the least fixed point
    /// of the deduction rules, used to cross-check the backward prover.
    fn forward_saturate(pi: &BTreeSet<DyPred>, theory: &Theory, pool: &[Term]) -> BTreeSet<Term> {
        let mut known: BTreeSet<Term> = pi
            .iter()
            .filter_map(|p| match p {
                DyPred::K(t) => Some(t.clone()),
                _ => None,
            })
            .collect();
        for t in pool {
            if let Term::Name(n) = t {
                if n.is_public() {
                    known.insert(t.clone());
                }
            }
        }
        loop {
            let mut added = false;
            for t in pool {
                if known.contains(t) {
                    continue;
                }
                let mut derivable = false;
                // App
                if let Term::App(_, args) = t {
                    if args.iter().all(|a| known.contains(a)) {
                        derivable = true;
                    }
                }
                // Al-Subst, in both directions of the mapping.
                if !derivable {
                    derivable = pi.iter().any(|p| {
                        matches!(p, DyPred::Maps(x, u) if u == t && known.contains(&Term::Sym(x.clone())))
                    });
                }
                if !derivable {
                    derivable = pi.iter().any(|p| {
                        matches!(p, DyPred::Maps(x, u) if Term::Sym(x.clone()) == *t && known.contains(u))
                    });
                }
                // Subst via stored equivalences.
                if !derivable {
                    derivable = pi.iter().any(|p| match p {
                        DyPred::Eq(a, b) => {
                            (b == t && known.contains(a)) || (a == t && known.contains(b))
                        }
                        _ => false,
                    });
                }
                // Subst via the equational theory across the pool.
                if !derivable {
                    derivable = known
                        .iter()
                        .any(|u| theory.eq_mod_e(u, t).unwrap_or(false));
                }
                if derivable {
                    known.insert(t.clone());
                    added = true;
                }
            }
            if !added {
                return known;
            }
        }
    }

    #[test]
    fn private_names_are_never_invented() {
        let theory = dec_theory();
        let n = Name::private("n");
        let goal = DyPred::K(Term::Name(n.clone()));
        // Nothing known: no proof.
        assert!(dy_deduce(&BTreeSet::new(), &goal, 8, &theory).is_err());
        // Observing another party's draw marks the name but reveals nothing.
        let observed: BTreeSet<DyPred> = [DyPred::Fresh(n.clone())].into_iter().collect();
        assert!(dy_deduce(&observed, &goal, 8, &theory).is_err());
        // Picking the name itself is the only direct route.
        let a = attacker();
        let picked = a
            .accept(&a.initial(), &Event::Silent(n.clone()))
            .remove(0);
        assert!(dy_deduce(&picked.pi, &goal, 8, &theory).is_ok());
    }

    #[test]
    fn knowledge_is_monotone_in_the_fact_set() {
        let theory = dec_theory();
        let pi = example2_pi();
        let goal = DyPred::K(Term::sym("m"));
        assert!(dy_deduce(&pi, &goal, 8, &theory).is_ok());
        let mut bigger = pi.clone();
        bigger.insert(DyPred::K(Term::sym("noise")));
        bigger.insert(DyPred::Fresh(Name::private("n9")));
        assert!(dy_deduce(&bigger, &goal, 8, &theory).is_ok());
    }

    #[test]
    fn aliases_of_known_terms_are_transmittable() {
        // The attacker constructs senc(n_pub, n_pub), aliases it, and can
        // then send the alias.
        let theory = dec_theory();
        let pubn = Term::Name(Name::public("p"));
        let built = mk_app(&senc(), vec![pubn.clone(), pubn]).unwrap();
        let pi: BTreeSet<DyPred> = [DyPred::Maps(Symbol::new("z0"), built)]
            .into_iter()
            .collect();
        let proof = dy_deduce(&pi, &DyPred::K(Term::sym("z0")), 6, &theory).unwrap();
        assert_eq!(proof.rule, DyRule::AlSubst);

        let a = attacker();
        let mut s = a.initial();
        s.sigma.insert(Symbol::new("z0"));
        s.pi = pi;
        assert!(a
            .successors(&s)
            .iter()
            .any(|(e, _)| *e == Event::A2P(Symbol::new("z0"))));
    }

    #[test]
    fn fresh_injections_are_adopted_and_known() {
        let a = attacker();
        let s = a.initial();
        let x = Symbol::new("x");
        let accepted = a.accept(&s, &Event::A2P(x.clone()));
        assert_eq!(accepted.len(), 1);
        assert!(accepted[0].sigma.contains(&x));
        assert!(accepted[0].pi.contains(&DyPred::K(Term::Sym(x.clone()))));

        // Replaying a symbol in scope still requires knowledge.
        let mut in_scope = a.initial();
        in_scope.sigma.insert(x.clone());
        assert!(a.accept(&in_scope, &Event::A2P(x)).is_empty());
    }

    #[test]
    fn shallow_bound_is_inconclusive() {
        let pi = example2_pi();
        let err = dy_deduce(&pi, &DyPred::K(Term::sym("m")), 2, &dec_theory());
        assert_eq!(err, Err(DeduceError::BoundExceeded));
    }

    #[test]
    fn backward_prover_matches_forward_oracle() {
        let theory = dec_theory();
        let pi = example2_pi();
        let m = Term::sym("m");
        let k = Term::sym("k");
        let enc = mk_app(&senc(), vec![m.clone(), k.clone()]).unwrap();
        let dec = mk_app(&sdec(), vec![enc.clone(), k.clone()]).unwrap();
        let mut pool = term_pool(&pi, None);
        pool.push(dec);
        for t in &pool {
            let forward = forward_saturate(&pi, &theory, &pool).contains(t);
            let backward = dy_deduce(&pi, &DyPred::K(t.clone()), 8, &theory).is_ok();
            assert_eq!(forward, backward, "disagreement on {t}");
        }
    }
}
