//! Built-in reproductions of the worked examples, each returning a
//! structured report the CLI renders and the acceptance suite asserts on.

use std::collections::BTreeSet;

use crate::combiners::eq_share_combiner;
use crate::compose::{CombinedPred, Combiner};
use crate::dy::{dy_deduce, DyPred, DyRule, Proof};
use crate::sapic::{pretty_print, translate_tree};
use crate::sbir::{SbirPred, SymExpr};
use crate::scenario::{
    attacker_pi, parse_scenario, query, CombKind, Scenario, ScenarioError,
};
use crate::symbolic::{enumerate_traces, Event, EventTag, Limits, Slts, Symbol};
use crate::terms::{mk_app, FnSym, Name, Term, Theory};

pub const FIG5_BIR: &str = include_str!("../assets/fig5.bir");
pub const FIG5_SCN: &str = include_str!("../assets/fig5.scn");
pub const CONCAT_BIR: &str = include_str!("../assets/concat.bir");
pub const CONCAT_SCN: &str = include_str!("../assets/concat.scn");

pub fn load_embedded(path: &str) -> Result<String, String> {
    match path {
        "fig5.bir" => Ok(FIG5_BIR.to_string()),
        "fig5.scn" => Ok(FIG5_SCN.to_string()),
        "concat.bir" => Ok(CONCAT_BIR.to_string()),
        "concat.scn" => Ok(CONCAT_SCN.to_string()),
        other => Err(format!("no embedded asset `{other}`")),
    }
}

pub fn fig5_scenario() -> Scenario {
    parse_scenario(FIG5_SCN, &load_embedded).expect("bundled scenario parses")
}

pub fn concat_scenario() -> Scenario {
    parse_scenario(CONCAT_SCN, &load_embedded).expect("bundled scenario parses")
}

/// One statement row of the four-column run.
#[derive(Debug, Clone)]
pub struct Fig5Line {
    pub stmt: String,
    pub event: String,
    pub sbir_preds: Vec<String>,
    pub dy_preds: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct Fig5Report {
    pub lines: Vec<Fig5Line>,
    pub process: String,
    /// Newly acquired knowledge facts during final saturation, in order.
    pub acquisitions: Vec<String>,
}

impl Fig5Report {
    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str("statement                      | event                     | program facts            | attacker facts\n");
        out.push_str("-------------------------------+---------------------------+--------------------------+---------------------------\n");
        for l in &self.lines {
            out.push_str(&format!(
                "{:<30} | {:<25} | {:<24} | {}\n",
                l.stmt,
                l.event,
                l.sbir_preds.join(", "),
                l.dy_preds.join(", "),
            ));
        }
        out.push_str("\nextracted process:\n  ");
        out.push_str(&self.process);
        out.push_str("\n\nderived by the combined deduction, in acquisition order:\n");
        for (i, a) in self.acquisitions.iter().enumerate() {
            out.push_str(&format!("  ({}) {}\n", i + 1, a));
        }
        out
    }
}

/// Runs the masked-key example end to end: events, per-line predicate
/// updates, the extracted process, and the combined-deduction closure.
pub fn fig5_report() -> Result<Fig5Report, ScenarioError> {
    let sc = fig5_scenario();
    let tree = sc.tree()?;
    let path = tree
        .paths()
        .into_iter()
        .next()
        .expect("the run is linear");
    let process = pretty_print(&translate_tree(&tree)?);

    let system = sc.full(CombKind::BitPrime)?;
    let program = sc.program()?;
    let mut state = system.initial();
    let mut lines = Vec::new();
    for (stmt_idx, ev) in path.iter().enumerate() {
        let before_sbir: BTreeSet<SbirPred> = crate::compose::proj_left(&state.pi);
        let before_att = attacker_pi(&state);
        let mut nexts = system.accept(&state, ev);
        assert!(!nexts.is_empty(), "linear path must replay");
        state = nexts.remove(0);
        // Let only the library-attacker mirror fire between steps; the
        // knowledge closure is reported separately below.
        loop {
            let new_maps: Vec<_> = system
                .deduce_step(&state)
                .into_iter()
                .filter(|p| {
                    matches!(
                        p,
                        CombinedPred::Right(CombinedPred::Right(DyPred::Maps(..)))
                    )
                })
                .collect();
            if new_maps.is_empty() {
                break;
            }
            state.pi.extend(new_maps);
        }
        let after_sbir: BTreeSet<SbirPred> = crate::compose::proj_left(&state.pi);
        let after_att = attacker_pi(&state);
        let stmt = program.blocks()[0]
            .1
            .get(stmt_idx)
            .map(|s| s.to_string())
            .unwrap_or_default();
        lines.push(Fig5Line {
            stmt,
            event: ev.to_string(),
            sbir_preds: after_sbir
                .difference(&before_sbir)
                .map(|p| p.to_string())
                .collect(),
            dy_preds: after_att
                .difference(&before_att)
                .map(|p| p.to_string())
                .collect(),
        });
    }

    let (_, order) = system.saturate_recording(state, sc.ded_budget);
    let acquisitions = order
        .into_iter()
        .filter_map(|p| match p {
            CombinedPred::Right(CombinedPred::Right(DyPred::K(t))) => Some(format!("K({t})")),
            _ => None,
        })
        .collect();
    Ok(Fig5Report {
        lines,
        process,
        acquisitions,
    })
}

#[derive(Debug, Clone)]
pub struct QueryReport {
    pub combiner: CombKind,
    pub goal: String,
    pub verdict: String,
    pub derived: bool,
}

/// Masked encryption key: the message slot is recoverable exactly when
/// the execution-side combiner is switched on.
pub fn ex1_report() -> Result<Vec<QueryReport>, ScenarioError> {
    let sc = fig5_scenario();
    let goal = sc.parse_query("K(R0)")?;
    let mut out = Vec::new();
    for kind in [CombKind::BitPrime, CombKind::Empty] {
        let verdict = query(&sc, kind, &goal)?;
        out.push(QueryReport {
            combiner: kind,
            goal: "K(R0)".into(),
            derived: verdict.is_derived(),
            verdict: verdict.to_string(),
        });
    }
    Ok(out)
}

/// Logical truth: decryption from an aliased ciphertext and a known key,
/// with the full proof tree.
pub fn ex2_report() -> (Proof, BTreeSet<DyPred>) {
    let senc = FnSym::new("senc", 2);
    let sdec = FnSym::new("sdec", 2);
    let m = Term::sym("m");
    let k = Term::sym("k");
    let enc = mk_app(&senc, vec![m.clone(), k.clone()]).unwrap();
    let pi: BTreeSet<DyPred> = [
        DyPred::K(Term::sym("c")),
        DyPred::Maps(Symbol::new("c"), enc.clone()),
        DyPred::K(k.clone()),
    ]
    .into_iter()
    .collect();
    let x = Term::sym("x");
    let y = Term::sym("y");
    let lhs = mk_app(
        &sdec,
        vec![mk_app(&senc, vec![x.clone(), y.clone()]).unwrap(), y],
    )
    .unwrap();
    let theory = Theory::new(vec![crate::terms::Equation::new(lhs, x).unwrap()]);
    let proof = dy_deduce(&pi, &DyPred::K(m), 6, &theory).expect("decryption chain derives");
    (proof, pi)
}

#[derive(Debug, Clone)]
pub struct Ex3Report {
    pub transferred: Vec<String>,
    pub key_equality: bool,
    pub proof: Option<Proof>,
}

/// Transferable equalities: a program-side equality chain hands the
/// attacker an equivalence it can substitute along.
pub fn ex3_report() -> Ex3Report {
    let senc = FnSym::new("senc", 2);
    let sdec = FnSym::new("sdec", 2);
    let m = Term::sym("m");
    let k3 = Symbol::new("k'''");
    let enc = mk_app(&senc, vec![m.clone(), Term::Sym(k3.clone())]).unwrap();

    let mut pi: BTreeSet<CombinedPred<SbirPred, DyPred>> = [
        CombinedPred::Left(SbirPred::Eq(k3.clone(), SymExpr::sym("k'"))),
        CombinedPred::Right(DyPred::Eq(Term::sym("k'"), Term::sym("k"))),
        CombinedPred::Right(DyPred::K(Term::sym("k"))),
        CombinedPred::Right(DyPred::K(Term::sym("c"))),
        CombinedPred::Right(DyPred::Maps(Symbol::new("c"), enc)),
    ]
    .into_iter()
    .collect();

    let comb = eq_share_combiner();
    let mut transferred = Vec::new();
    loop {
        let new = comb.derive(&pi);
        if new.is_empty() {
            break;
        }
        for p in new {
            if pi.insert(p.clone()) {
                transferred.push(p.to_string());
            }
        }
    }
    let key_equality = pi.contains(&CombinedPred::Right(DyPred::Eq(
        Term::Sym(k3.clone()),
        Term::sym("k"),
    )));

    let pi_att: BTreeSet<DyPred> = pi
        .iter()
        .filter_map(|p| match p {
            CombinedPred::Right(d) => Some(d.clone()),
            _ => None,
        })
        .collect();
    let x = Term::sym("x");
    let y = Term::sym("y");
    let lhs = mk_app(
        &sdec,
        vec![mk_app(&senc, vec![x.clone(), y.clone()]).unwrap(), y],
    )
    .unwrap();
    let theory = Theory::new(vec![crate::terms::Equation::new(lhs, x).unwrap()]);
    let proof = dy_deduce(&pi_att, &DyPred::K(m), 8, &theory).ok();
    Ex3Report {
        transferred,
        key_equality,
        proof,
    }
}

/// Length-prefixed payload: recoverable with the constant-aware combiner,
/// opaque without it.
pub fn ex4_report() -> Result<Vec<QueryReport>, ScenarioError> {
    let sc = concat_scenario();
    let goal = sc.parse_query("K(m)")?;
    let mut out = Vec::new();
    for kind in [CombKind::Bit, CombKind::Empty] {
        let verdict = query(&sc, kind, &goal)?;
        out.push(QueryReport {
            combiner: kind,
            goal: "K(m)".into(),
            derived: verdict.is_derived(),
            verdict: verdict.to_string(),
        });
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct Ex5Report {
    pub traces: usize,
    pub duplicate_freshness: Option<String>,
    pub witness: Option<String>,
}

fn freshness_names(t: &[Event]) -> Vec<Name> {
    t.iter()
        .filter_map(|e| match e {
            Event::SFr(n) | Event::Silent(n) => Some(n.clone()),
            _ => None,
        })
        .collect()
}

/// Library and attacker composed: freshness marks are mutually exclusive,
/// so no name is ever drawn twice and the attacker's own pick differs
/// from the library's. The scenario is freshness-only: random draws, no
/// crypto calls.
pub fn ex5_report(depth: usize) -> Result<Ex5Report, crate::symbolic::EnumError> {
    let sc = Scenario {
        names: vec![Name::private("n"), Name::private("n2")],
        ..Scenario::default()
    };
    let side = sc.dy_side();
    let traces = enumerate_traces(&side, Limits::new(depth, 2))?;
    let mut duplicate = None;
    let mut witness = None;
    for t in &traces {
        let names = freshness_names(t);
        let mut seen = BTreeSet::new();
        for n in &names {
            if !seen.insert(n.clone()) {
                duplicate = Some(crate::symbolic::format_trace_inline(t));
            }
        }
        if witness.is_none() && names.len() >= 2 {
            let has_lib = t.iter().any(|e| e.tag() == EventTag::SFr);
            let has_att = t.iter().any(|e| e.tag() == EventTag::Silent);
            if has_lib && has_att {
                witness = Some(crate::symbolic::format_trace_inline(t));
            }
        }
    }
    Ok(Ex5Report {
        traces: traces.len(),
        duplicate_freshness: duplicate,
        witness,
    })
}

pub fn rule_multiset(proof: &Proof) -> Vec<(DyRule, usize)> {
    proof.rule_counts().into_iter().collect()
}
