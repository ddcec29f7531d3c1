//! The Dolev-Yao crypto library: a stateless component that abstracts
//! crypto calls into term constructions and keeps freshness bookkeeping.
//! Knowledge stays on the attacker side; the library's mapping facts flow
//! there through the library-attacker combiner.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use crate::compose::{CombinedPred, Combiner, CombinerClass};
use crate::dy::DyPred;
use crate::symbolic::{mint_named, Event, EventTag, Slts, SymState, SymbolSet};
use crate::terms::{mk_app, FnSym, Name, Term};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LibError {
    #[error("signature conflict: `{0}` declared with arity {1} and {2}")]
    SignatureConflict(String, usize, usize),
}

/// Library-side facts.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum LibPred {
    LFresh(Name),
    /// `y ↦ f(x1..xn)`: the output symbol of a performed call.
    CallEq(crate::symbolic::Symbol, Term),
}

impl fmt::Display for LibPred {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LibPred::LFresh(n) => write!(f, "fresh({n})"),
            LibPred::CallEq(x, t) => write!(f, "{x} \u{21a6} {t}"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct DyLibrary {
    pub sig: Vec<FnSym>,
    pub names: Vec<Name>,
    pub out_hint: String,
    /// Skip call enumeration when the argument tuple space exceeds this.
    pub tuple_cap: usize,
}

impl DyLibrary {
    pub fn new(sig: Vec<FnSym>, names: Vec<Name>) -> Self {
        DyLibrary {
            sig,
            names,
            out_hint: "c".into(),
            tuple_cap: 4096,
        }
    }

    fn private_pool(&self) -> impl Iterator<Item = &Name> {
        self.names.iter().filter(|n| !n.is_public())
    }
}

pub type LibState = SymState<(), LibPred>;

impl Slts for DyLibrary {
    type Inner = ();
    type Pred = LibPred;

    fn initial(&self) -> LibState {
        SymState::new(SymbolSet::new(), BTreeSet::new(), ())
    }

    fn successors(&self, s: &LibState) -> Vec<(Event, LibState)> {
        let mut out = Vec::new();
        for n in self.private_pool() {
            if s.pi.contains(&LibPred::LFresh(n.clone())) {
                continue;
            }
            let mut pi = s.pi.clone();
            pi.insert(LibPred::LFresh(n.clone()));
            out.push((
                Event::SFr(n.clone()),
                SymState::new(s.sigma.clone(), pi.clone(), ()),
            ));
            out.push((
                Event::Silent(n.clone()),
                SymState::new(s.sigma.clone(), pi, ()),
            ));
        }
        let symbols: Vec<_> = s.sigma.iter().cloned().collect();
        for f in &self.sig {
            let space = symbols.len().checked_pow(f.arity() as u32);
            if space.is_none() || space.unwrap() > self.tuple_cap {
                continue;
            }
            for args in tuples(&symbols, f.arity()) {
                let (y, sigma) = mint_named(&s.sigma, &self.out_hint);
                let term = mk_app(f, args.iter().cloned().map(Term::Sym).collect())
                    .expect("tuple arity matches");
                let mut pi = s.pi.clone();
                pi.insert(LibPred::CallEq(y.clone(), term));
                out.push((Event::FCall(f.clone(), args, y), SymState::new(sigma, pi, ())));
            }
        }
        out
    }

    fn accept(&self, s: &LibState, ev: &Event) -> Vec<LibState> {
        match ev {
            Event::SFr(n) | Event::Silent(n) => {
                if n.is_public() || s.pi.contains(&LibPred::LFresh(n.clone())) {
                    return vec![];
                }
                let mut pi = s.pi.clone();
                pi.insert(LibPred::LFresh(n.clone()));
                vec![SymState::new(s.sigma.clone(), pi, ())]
            }
            Event::FCall(f, args, y) => {
                if !self.sig.contains(f) || args.len() != f.arity() {
                    return vec![];
                }
                if args.iter().any(|a| !s.sigma.contains(a)) {
                    return vec![];
                }
                if s.sigma.contains(y) {
                    return vec![];
                }
                let mut sigma = s.sigma.clone();
                sigma.insert(y.clone());
                let term = mk_app(f, args.iter().cloned().map(Term::Sym).collect())
                    .expect("arity checked");
                let mut pi = s.pi.clone();
                pi.insert(LibPred::CallEq(y.clone(), term));
                vec![SymState::new(sigma, pi, ())]
            }
            _ => vec![],
        }
    }

    fn sync_tags(&self) -> BTreeSet<EventTag> {
        [EventTag::SFr, EventTag::Silent, EventTag::FCall]
            .into_iter()
            .collect()
    }
}

fn tuples<T: Clone>(pool: &[T], k: usize) -> Vec<Vec<T>> {
    if k == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for prefix in tuples(pool, k - 1) {
        for item in pool {
            let mut v = prefix.clone();
            v.push(item.clone());
            out.push(v);
        }
    }
    out
}

/// Shares mapping facts between library and attacker, in both directions.
#[derive(Debug, Clone, Copy, Default)]
pub struct LibAttCombiner;

pub fn lib_att_combiner() -> LibAttCombiner {
    LibAttCombiner
}

impl Combiner<LibPred, DyPred> for LibAttCombiner {
    fn derive(
        &self,
        pi: &BTreeSet<CombinedPred<LibPred, DyPred>>,
    ) -> Vec<CombinedPred<LibPred, DyPred>> {
        let mut out = Vec::new();
        for p in pi {
            match p {
                CombinedPred::Left(LibPred::CallEq(x, t)) => {
                    let mirrored = CombinedPred::Right(DyPred::Maps(x.clone(), t.clone()));
                    if !pi.contains(&mirrored) {
                        out.push(mirrored);
                    }
                }
                CombinedPred::Right(DyPred::Maps(x, t)) => {
                    let mirrored = CombinedPred::Left(LibPred::CallEq(x.clone(), t.clone()));
                    if !pi.contains(&mirrored) {
                        out.push(mirrored);
                    }
                }
                _ => {}
            }
        }
        out
    }

    fn class(&self) -> CombinerClass {
        CombinerClass::Enabling
    }

    fn name(&self) -> &'static str {
        "lib-att"
    }
}

/// Union of two signatures; same-name symbols must agree on arity.
pub fn merge_libraries(sig1: &[FnSym], sig2: &[FnSym]) -> Result<Vec<FnSym>, LibError> {
    let mut out: Vec<FnSym> = sig1.to_vec();
    for f in sig2 {
        if let Some(existing) = out.iter().find(|g| g.name() == f.name()) {
            if existing.arity() != f.arity() {
                return Err(LibError::SignatureConflict(
                    f.name().to_string(),
                    existing.arity(),
                    f.arity(),
                ));
            }
            continue;
        }
        out.push(f.clone());
    }
    out.sort();
    out.dedup();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbolic::Symbol;

    fn lib() -> DyLibrary {
        DyLibrary::new(
            vec![FnSym::new("senc", 2)],
            vec![Name::private("n"), Name::private("n2")],
        )
    }

    #[test]
    fn fcall_mints_output_and_records_call() {
        let l = lib();
        let mut s = l.initial();
        s.sigma.insert(Symbol::new("R0"));
        s.sigma.insert(Symbol::new("R1"));
        let succ = l.successors(&s);
        let call = succ
            .iter()
            .find(|(e, _)| {
                matches!(e, Event::FCall(f, args, _) if f.name() == "senc"
                    && args == &vec![Symbol::new("R0"), Symbol::new("R1")])
            })
            .expect("senc call over R0,R1");
        match &call.0 {
            Event::FCall(_, _, y) => {
                assert_eq!(y.id(), "c");
                assert!(call.1.pi.iter().any(|p| p.to_string() == "c \u{21a6} senc(R0,R1)"));
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn freshness_guard_suppresses_taken_names() {
        let l = lib();
        let mut s = l.initial();
        s.pi.insert(LibPred::LFresh(Name::private("n")));
        let succ = l.successors(&s);
        assert!(!succ
            .iter()
            .any(|(e, _)| *e == Event::SFr(Name::private("n"))));
        assert!(succ
            .iter()
            .any(|(e, _)| *e == Event::SFr(Name::private("n2"))));
    }

    #[test]
    fn empty_signature_only_freshness() {
        let l = DyLibrary::new(vec![], vec![Name::private("n")]);
        let succ = l.successors(&l.initial());
        assert!(succ
            .iter()
            .all(|(e, _)| matches!(e, Event::SFr(_) | Event::Silent(_))));
    }

    #[test]
    fn combiner_mirrors_mappings_both_ways() {
        let c = lib_att_combiner();
        let senc = FnSym::new("senc", 2);
        let t = mk_app(&senc, vec![Term::sym("m"), Term::sym("k")]).unwrap();
        let pi: BTreeSet<_> = [CombinedPred::Left(LibPred::CallEq(
            Symbol::new("c"),
            t.clone(),
        ))]
        .into_iter()
        .collect();
        let derived = c.derive(&pi);
        assert_eq!(
            derived,
            vec![CombinedPred::Right(DyPred::Maps(Symbol::new("c"), t.clone()))]
        );

        assert!(c.derive(&BTreeSet::new()).is_empty());

        let h = FnSym::new("h", 1);
        let ht = mk_app(&h, vec![Term::sym("a")]).unwrap();
        let pi2: BTreeSet<_> = [CombinedPred::Right(DyPred::Maps(
            Symbol::new("x"),
            ht.clone(),
        ))]
        .into_iter()
        .collect();
        assert_eq!(
            c.derive(&pi2),
            vec![CombinedPred::Left(LibPred::CallEq(Symbol::new("x"), ht))]
        );
    }

    #[test]
    fn merge_signatures() {
        let senc = FnSym::new("senc", 2);
        let sdec = FnSym::new("sdec", 2);
        assert_eq!(
            merge_libraries(std::slice::from_ref(&senc), std::slice::from_ref(&sdec)).unwrap(),
            vec![sdec.clone(), senc.clone()]
        );
        assert_eq!(
            merge_libraries(std::slice::from_ref(&senc), std::slice::from_ref(&senc)).unwrap(),
            vec![senc]
        );
        let err = merge_libraries(&[FnSym::new("h", 1)], &[FnSym::new("h", 2)]);
        assert_eq!(
            err,
            Err(LibError::SignatureConflict("h".into(), 1, 2))
        );
    }
}
