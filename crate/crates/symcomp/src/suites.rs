//! Named property suites behind `check`: randomized composition-versus-
//! oracle comparisons, translation trace inclusion, refinement of the
//! concrete semantics, and the freshness exclusivity scan.

use std::collections::{BTreeMap, BTreeSet};

use crate::bir::{concrete_step, parse_program, BirProgram, Bval, CEvent, ConcreteState, Env, ScriptedWorld};
use crate::compose::{
    check_enabling, compose, verify_symmetry_associativity, verify_thm1, CheckReport,
    EmptyCombiner,
};
use crate::dylib::DyLibrary;
use crate::fixtures::{
    announcer_fixture, guarded_fixture, random_fixture, random_tree, Rng, SpoilerCombiner,
    UnlockCombiner,
};
use crate::sapic::check_trace_inclusion;
use crate::sbir::{CryptoConfig, Role, SbirLts, SbirState, SymExpr};
use crate::scenario::Scenario;
use crate::symbolic::{Event, Limits, Slts};
use crate::terms::{FnSym, Name};

fn summarize(name: &str, reports: Vec<CheckReport>) -> Vec<CheckReport> {
    let failed = reports.iter().filter(|r| !r.pass).count();
    let mut out = reports;
    out.push(if failed == 0 {
        CheckReport::pass(format!("{name}: all cases"))
    } else {
        CheckReport::fail(format!("{name}: {failed} case(s)"), String::new())
    });
    out
}

/// Composed trace sets versus the interleaving oracle: equality on random
/// pairs under the empty relation, the enabling direction on the guarded
/// fixture, a spoiler that must be caught, and the library corollary.
pub fn suite_thm1(seed: u64, pairs: usize, depth: usize) -> Vec<CheckReport> {
    let mut rng = Rng::new(seed);
    let mut reports = Vec::new();
    let limits = Limits::new(depth, 2);
    let mut failures = 0;
    for i in 0..pairs {
        let a = random_fixture(&mut rng, 'a');
        let b = random_fixture(&mut rng, 'b');
        match verify_thm1(a, b, EmptyCombiner, limits) {
            Ok(r) if r.pass => {}
            Ok(r) => {
                failures += 1;
                reports.push(CheckReport::fail(
                    format!("thm1 seed pair {i}"),
                    r.counterexample.unwrap_or_default(),
                ));
            }
            Err(e) => {
                failures += 1;
                reports.push(CheckReport::fail(format!("thm1 seed pair {i}"), e.to_string()));
            }
        }
    }
    reports.push(if failures == 0 {
        CheckReport::pass(format!("thm1: {pairs} random pairs, both inclusions"))
    } else {
        CheckReport::fail(format!("thm1: {failures}/{pairs} random pairs"), String::new())
    });

    // Enabling fixture: the derived fact unlocks an extra move, so the
    // oracle stays included while the composition gains behavior.
    match verify_thm1(
        announcer_fixture(),
        guarded_fixture(),
        UnlockCombiner,
        limits,
    ) {
        Ok(r) => reports.push(CheckReport {
            name: "thm1: enabling fixture (oracle \u{2286} composed)".into(),
            ..r
        }),
        Err(e) => reports.push(CheckReport::fail("thm1: enabling fixture", e.to_string())),
    }
    match check_enabling(
        announcer_fixture(),
        guarded_fixture(),
        UnlockCombiner,
        limits,
    ) {
        Ok(r) if r.pass => reports.push(CheckReport::pass("enabling: unlock fixture")),
        Ok(r) => reports.push(CheckReport::fail(
            "enabling: unlock fixture",
            r.counterexample.unwrap_or_default(),
        )),
        Err(e) => reports.push(CheckReport::fail("enabling: unlock fixture", e.to_string())),
    }
    // The spoiler derives a guard-falsifying fact; the check must flag it.
    match check_enabling(
        announcer_fixture(),
        guarded_fixture(),
        SpoilerCombiner,
        limits,
    ) {
        Ok(r) if !r.pass => {
            reports.push(CheckReport::pass("enabling: spoiler fixture is caught"))
        }
        Ok(_) => reports.push(CheckReport::fail(
            "enabling: spoiler fixture is caught",
            "spoiler went unnoticed".into(),
        )),
        Err(e) => reports.push(CheckReport::fail("enabling: spoiler", e.to_string())),
    }

    // Library corollary: two libraries compose to exactly the partially
    // synchronized interleavings of their trace sets.
    let names = vec![Name::private("n"), Name::private("n2")];
    let lib1 = DyLibrary::new(vec![FnSym::new("senc", 2)], names.clone());
    let lib2 = DyLibrary::new(vec![FnSym::new("senc", 2), FnSym::new("h", 1)], names.clone());
    match verify_thm1(lib1, lib2, EmptyCombiner, Limits::new(3, 2)) {
        Ok(r) => reports.push(CheckReport {
            name: "thm1: library merge/split corollary".into(),
            ..r
        }),
        Err(e) => reports.push(CheckReport::fail("thm1: library corollary", e.to_string())),
    }

    // Library with attacker under the mapping-sharing relation: the
    // enabling inclusion holds.
    let sc = Scenario {
        names: names.clone(),
        signature: vec![FnSym::new("senc", 2)],
        ..Scenario::default()
    };
    match verify_thm1(
        sc.library(),
        sc.attacker(),
        crate::dylib::lib_att_combiner(),
        Limits::new(3, 2),
    ) {
        Ok(r) => reports.push(CheckReport {
            name: "thm1: library with attacker (oracle \u{2286} composed)".into(),
            ..r
        }),
        Err(e) => reports.push(CheckReport::fail("thm1: lib~attacker", e.to_string())),
    }
    reports
}

pub fn suite_sym_assoc(seed: u64, triples: usize, depth: usize) -> Vec<CheckReport> {
    let mut rng = Rng::new(seed);
    let limits = Limits::new(depth, 2);
    let mut reports = Vec::new();
    for i in 0..triples {
        let a = random_fixture(&mut rng, 'a');
        let b = random_fixture(&mut rng, 'b');
        let c = random_fixture(&mut rng, 'c');
        match verify_symmetry_associativity(a, b, c, limits) {
            Ok(r) if r.pass => {}
            Ok(r) => reports.push(CheckReport::fail(
                format!("sym-assoc triple {i}"),
                r.counterexample.unwrap_or_default(),
            )),
            Err(e) => reports.push(CheckReport::fail(format!("sym-assoc triple {i}"), e.to_string())),
        }
    }
    // An inert partner with a disjoint alphabet leaves the trace set
    // untouched.
    let inert = crate::fixtures::FixtureLts::plain(vec![], BTreeSet::new());
    let lively = random_fixture(&mut rng, 'a');
    let alone = crate::symbolic::enumerate_traces(&lively, limits);
    let padded = crate::symbolic::enumerate_traces(&compose(lively, inert, EmptyCombiner), limits);
    match (alone, padded) {
        (Ok(t1), Ok(t2)) if t1 == t2 => reports.push(CheckReport::pass("sym-assoc: inert unit")),
        (Ok(_), Ok(_)) => reports.push(CheckReport::fail(
            "sym-assoc: inert unit",
            "trace sets differ".into(),
        )),
        (Err(e), _) | (_, Err(e)) => {
            reports.push(CheckReport::fail("sym-assoc: inert unit", e.to_string()))
        }
    }
    summarize(&format!("sym-assoc: {triples} random triples"), reports)
}

/// Trace inclusion on bundled and random trees, plus the mutated negative
/// control.
pub fn suite_thm3(seed: u64, trees: usize) -> Vec<CheckReport> {
    let mut reports = Vec::new();
    // Bundled trees: the linear run, a branching one, a loop.
    let fig5_tree = crate::demos::fig5_scenario().tree().expect("bundled scenario builds");
    match check_trace_inclusion(&fig5_tree, 2) {
        Ok(r) if r.pass => reports.push(CheckReport::pass("thm3: bundled linear tree")),
        Ok(r) => reports.push(CheckReport::fail(
            "thm3: bundled linear tree",
            r.counterexample.unwrap_or_default(),
        )),
        Err(e) => reports.push(CheckReport::fail("thm3: bundled linear tree", e.to_string())),
    }

    let branchy = branchy_tree();
    match check_trace_inclusion(&branchy, 2) {
        Ok(r) if r.pass => reports.push(CheckReport::pass("thm3: bundled branching tree")),
        Ok(r) => reports.push(CheckReport::fail(
            "thm3: bundled branching tree",
            r.counterexample.unwrap_or_default(),
        )),
        Err(e) => reports.push(CheckReport::fail("thm3: bundled branching tree", e.to_string())),
    }

    let loopy = loopy_tree();
    match check_trace_inclusion(&loopy, 2) {
        Ok(r) if r.pass => reports.push(CheckReport::pass("thm3: bundled loop tree")),
        Ok(r) => reports.push(CheckReport::fail(
            "thm3: bundled loop tree",
            r.counterexample.unwrap_or_default(),
        )),
        Err(e) => reports.push(CheckReport::fail("thm3: bundled loop tree", e.to_string())),
    }

    let mut rng = Rng::new(seed);
    let mut failures = 0;
    for i in 0..trees {
        let tree = random_tree(&mut rng, 10);
        match check_trace_inclusion(&tree, 2) {
            Ok(r) if r.pass => {}
            Ok(r) => {
                failures += 1;
                reports.push(CheckReport::fail(
                    format!("thm3 random tree {i}"),
                    r.counterexample.unwrap_or_default(),
                ));
            }
            Err(e) => {
                failures += 1;
                reports.push(CheckReport::fail(format!("thm3 random tree {i}"), e.to_string()));
            }
        }
    }
    reports.push(if failures == 0 {
        CheckReport::pass(format!("thm3: {trees} random trees"))
    } else {
        CheckReport::fail(format!("thm3: {failures}/{trees} random trees"), String::new())
    });

    // Negative control: dropping a let loses a trace, and the check says so.
    reports.push(match mutated_translation_fails(&fig5_tree) {
        Ok(Some(witness)) => {
            CheckReport::pass("thm3: mutated translation fails").with_detail(witness)
        }
        Ok(None) => CheckReport::fail(
            "thm3: mutated translation fails",
            "mutant passed trace inclusion".into(),
        ),
        Err(e) => CheckReport::fail("thm3: mutated translation", e),
    });
    reports
}

fn branchy_tree() -> crate::sbir::ExecTree {
    let program = parse_program(
        "block 0:\n  cjmp(var(g), 0x1, 0x2)\nblock 1:\n  assign(R0, 0x1)\n  jmp(0x04)\n  halt\nblock 2:\n  assign(R0, 0x2)\n  jmp(0x04)\n  halt\n",
    )
    .unwrap();
    let mut roles = BTreeMap::new();
    roles.insert(Bval::Int(0x04), Role::Send { reg: "R0".into() });
    let cfg = CryptoConfig {
        roles,
        const_ops: BTreeSet::new(),
    };
    SbirLts::new(program, cfg, 1).build_tree(32, 1024).unwrap()
}

fn loopy_tree() -> crate::sbir::ExecTree {
    let program = parse_program(
        "block 0:\n  jmp(0x44)\n  assign(R0, var(R0) ^ 0x1)\n  jmp(0x0)\n",
    )
    .unwrap();
    let mut roles = BTreeMap::new();
    roles.insert(Bval::Int(0x44), Role::Rng { name_hint: "k".into() });
    let cfg = CryptoConfig {
        roles,
        const_ops: BTreeSet::new(),
    };
    SbirLts::new(program, cfg, 1).build_tree(32, 1024).unwrap()
}

fn mutated_translation_fails(tree: &crate::sbir::ExecTree) -> Result<Option<String>, String> {
    use crate::sapic::{translate_trace, Process, SapicLts};
    let proc = crate::sapic::translate_tree(tree).map_err(|e| e.to_string())?;
    fn drop_first_let(p: &Process) -> Process {
        match p {
            Process::Let { then, .. } => (**then).clone(),
            Process::New(n, c) => Process::New(n.clone(), Box::new(drop_first_let(c))),
            Process::In(x, c) => Process::In(x.clone(), Box::new(drop_first_let(c))),
            Process::Out(t, c) => Process::Out(t.clone(), Box::new(drop_first_let(c))),
            other => other.clone(),
        }
    }
    let mutated = drop_first_let(&proc);
    if mutated == proc {
        return Err("no let to drop".into());
    }
    let lts = SapicLts::new(mutated, crate::sapic::tree_signature(tree), 2);
    let paths = tree.paths();
    let depth = paths.iter().map(|p| p.len()).max().unwrap_or(0);
    let traces = crate::symbolic::enumerate_traces(&lts, Limits::new(depth, 0))
        .map_err(|e| e.to_string())?;
    for p in &paths {
        let translated = translate_trace(p).map_err(|e| e.to_string())?;
        if !traces.contains(&translated) {
            return Ok(Some(format!(
                "missing trace: {}",
                crate::symbolic::format_trace_inline(&translated)
            )));
        }
    }
    Ok(None)
}

// ---------------------------------------------------------------------
// Refinement
// ---------------------------------------------------------------------

/// An interpretation: symbol and name identifiers mapped to base values.
pub type Interp = BTreeMap<String, Bval>;

fn eval_under(e: &SymExpr, interp: &Interp) -> Option<Bval> {
    match e {
        SymExpr::Const(v) => Some(v.clone()),
        SymExpr::Var(_) => None,
        SymExpr::Sym(s) => interp.get(s.id()).cloned(),
        SymExpr::Name(n) => interp.get(n.text()).cloned(),
        SymExpr::Unop(op, a) => {
            let v = eval_under(a, interp)?;
            crate::bir::apply_unop(op, &v).ok()
        }
        SymExpr::Binop(op, a, b) => {
            let va = eval_under(a, interp)?;
            let vb = eval_under(b, interp)?;
            crate::bir::apply_binop(*op, &va, &vb).ok()
        }
    }
}

fn bind(interp: &mut Interp, key: &str, v: &Bval) -> bool {
    match interp.get(key) {
        Some(old) => old == v,
        None => {
            interp.insert(key.to_string(), v.clone());
            true
        }
    }
}

fn unify_event(sym: &Event, conc: &CEvent, interp: &Interp) -> Option<Interp> {
    let mut next = interp.clone();
    let ok = match (sym, conc) {
        (Event::SFr(n), CEvent::Fr(v)) => bind(&mut next, n.text(), v),
        (Event::A2P(x), CEvent::In(v)) => bind(&mut next, x.id(), v),
        (Event::P2A(x), CEvent::Out(v)) => {
            eval_under(&SymExpr::Sym(x.clone()), &next).as_ref() == Some(v)
        }
        (Event::FCall(f, args, y), CEvent::FCall(g, cargs, cv)) => {
            f == g
                && args.len() == cargs.len()
                && args
                    .iter()
                    .zip(cargs.iter())
                    .all(|(a, v)| next.get(a.id()) == Some(v))
                && bind(&mut next, y.id(), cv)
        }
        (Event::Ev(e), CEvent::Ev(name)) => e.id() == name,
        (Event::Assign(x, crate::symbolic::AssignRhs::Expr(e)), CEvent::Assign(_, v)) => {
            eval_under(e, &next).as_ref() == Some(v) && bind(&mut next, x.id(), v)
        }
        _ => false,
    };
    ok.then_some(next)
}

/// Searches the symbolic transition system for a run matching the
/// concrete trace under some interpretation: program counters advance in
/// lockstep, the interpreted environment matches at the end, and the path
/// condition interprets to true.
pub fn find_refinement(
    lts: &SbirLts,
    ctrace: &[CEvent],
    final_env: &Env,
    init_env: &Env,
) -> Option<Interp> {
    fn search(
        lts: &SbirLts,
        state: &SbirState,
        ct: &[CEvent],
        i: usize,
        interp: &Interp,
        final_env: &Env,
    ) -> Option<Interp> {
        if i == ct.len() {
            // Path condition must interpret to true.
            for conj in &state.inner.phi {
                match eval_under(conj, interp) {
                    Some(v) if v.truthy() => {}
                    _ => return None,
                }
            }
            // Interpreted environment agrees with the concrete one.
            for (var, cval) in final_env {
                let sym_val = state.inner.env.get(var)?;
                if eval_under(sym_val, interp).as_ref() != Some(cval) {
                    return None;
                }
            }
            return Some(interp.clone());
        }
        for (ev, next) in lts.successors(state) {
            if ev == Event::Loop {
                if let Some(found) = search(lts, &next, ct, i, interp, final_env) {
                    return Some(found);
                }
                continue;
            }
            if let Some(extended) = unify_event(&ev, &ct[i], interp) {
                if let Some(found) = search(lts, &next, ct, i + 1, &extended, final_env) {
                    return Some(found);
                }
            }
        }
        None
    }
    // Inputs are minted under their variable names; seed them directly.
    let interp: Interp = init_env
        .iter()
        .map(|(k, v)| (k.clone(), v.clone()))
        .collect();
    search(lts, &lts.initial(), ctrace, 0, &interp, final_env)
}

struct RefinementCase {
    name: &'static str,
    program: &'static str,
    roles: Vec<(u64, Role)>,
    inputs: Vec<&'static str>,
}

fn refinement_cases() -> Vec<RefinementCase> {
    vec![
        RefinementCase {
            name: "mask-and-send",
            program: "block 0:\n  jmp(0x44)\n  assign(R1, var(R0))\n  assign(R2, R1 ^ 0xdeadbeef)\n  jmp(0x04)\n  halt\n",
            roles: vec![
                (0x44, Role::Rng { name_hint: "k".into() }),
                (0x04, Role::Send { reg: "R2".into() }),
            ],
            inputs: vec![],
        },
        RefinementCase {
            name: "branch-on-input",
            program: "block 0:\n  cjmp(var(x) == 0x1, 0x1, 0x2)\nblock 1:\n  assign(R0, 0x10)\n  jmp(0x04)\n  halt\nblock 2:\n  assign(R0, 0x20)\n  jmp(0x04)\n  halt\n",
            roles: vec![(0x04, Role::Send { reg: "R0".into() })],
            inputs: vec!["x"],
        },
        RefinementCase {
            name: "recv-combine",
            program: "block 0:\n  jmp(0x08)\n  assign(R1, var(R0) + 0x3)\n  assign(R0, var(R1) * 0x2)\n  jmp(0x04)\n  halt\n",
            roles: vec![
                (0x08, Role::Recv { reg: "R0".into() }),
                (0x04, Role::Send { reg: "R0".into() }),
            ],
            inputs: vec![],
        },
        RefinementCase {
            name: "call-and-send",
            program: "block 0:\n  assign(R0, var(m))\n  assign(R1, var(key))\n  jmp(0x20)\n  jmp(0x04)\n  halt\n",
            roles: vec![
                (
                    0x20,
                    Role::Fn {
                        sym: FnSym::new("senc", 2),
                        out_hint: "c".into(),
                    },
                ),
                (0x04, Role::Send { reg: "R0".into() }),
            ],
            inputs: vec!["m", "key"],
        },
    ]
}

/// Concrete runs with scripted worlds each refine some symbolic path.
pub fn suite_refinement(seed: u64, runs: usize) -> Vec<CheckReport> {
    let mut rng = Rng::new(seed);
    let cases = refinement_cases();
    let mut reports = Vec::new();
    let mut passed = 0;
    for i in 0..runs {
        let case = &cases[i % cases.len()];
        let program = parse_program(case.program).expect("fixture parses");
        let cfg = CryptoConfig {
            roles: case
                .roles
                .iter()
                .map(|(l, r)| (Bval::Int(*l), r.clone()))
                .collect(),
            const_ops: BTreeSet::new(),
        };
        let mut world = ScriptedWorld {
            rng: vec![Bval::Int(rng.next_u64() % 1000)],
            recv: vec![Bval::Int(rng.next_u64() % 1000)],
            fcall: vec![Bval::Int(rng.next_u64() % 1000)],
        };
        let mut init_env = Env::new();
        for input in &case.inputs {
            init_env.insert(
                input.to_string(),
                Bval::Int(rng.next_u64() % 4),
            );
        }
        let (ctrace, final_env) =
            run_concrete(&program, &cfg, &mut world, init_env.clone()).expect("fixture runs");
        let lts = SbirLts::new(program, cfg, 1);
        match find_refinement(&lts, &ctrace, &final_env, &init_env) {
            Some(_) => passed += 1,
            None => reports.push(CheckReport::fail(
                format!("refinement run {i} ({})", case.name),
                ctrace
                    .iter()
                    .map(|e| e.to_string())
                    .collect::<Vec<_>>()
                    .join(", "),
            )),
        }
    }
    reports.push(if passed == runs {
        CheckReport::pass(format!("refinement: {passed}/{runs} concrete runs matched"))
    } else {
        CheckReport::fail(
            format!("refinement: {passed}/{runs} concrete runs matched"),
            String::new(),
        )
    });
    reports
}

fn run_concrete(
    p: &BirProgram,
    cfg: &CryptoConfig,
    world: &mut ScriptedWorld,
    init_env: Env,
) -> Result<(Vec<CEvent>, Env), crate::bir::BirError> {
    let mut state = ConcreteState {
        env: init_env,
        pc: Some(p.entry()),
    };
    let mut out = Vec::new();
    for _ in 0..10_000 {
        if state.pc.is_none() {
            return Ok((out, state.env));
        }
        let (ev, next) = concrete_step(p, cfg, &state, world)?;
        if let Some(e) = ev {
            out.push(e);
        }
        state = next;
    }
    Ok((out, state.env))
}

/// Full enumeration of the library-attacker composition: no name is ever
/// drawn twice.
pub fn suite_freshness(depth: usize) -> Vec<CheckReport> {
    match crate::demos::ex5_report(depth) {
        Ok(r) => {
            let mut out = Vec::new();
            match r.duplicate_freshness {
                None => out.push(
                    CheckReport::pass(format!(
                        "freshness: no duplicate names over {} traces (depth {depth})",
                        r.traces
                    ))
                    .with_detail(
                        r.witness
                            .map(|w| format!("attacker picks a distinct name: {w}"))
                            .unwrap_or_default(),
                    ),
                ),
                Some(w) => out.push(CheckReport::fail("freshness", w)),
            }
            out
        }
        Err(e) => vec![CheckReport::fail("freshness", e.to_string())],
    }
}

/// Concrete product versus the interleaving oracle at small depth.
pub fn suite_concrete(depth: usize) -> Vec<CheckReport> {
    use crate::compose::{compose_concrete, enumerate_concrete};
    use crate::fixtures::{cevent, cfixture_single, cshared};
    use crate::symbolic::all_interleavings;

    let mut reports = Vec::new();
    let free_sync: BTreeSet<crate::bir::CEventTag> = BTreeSet::new();
    let a = cfixture_single(cevent("a"), free_sync.clone());
    let b = cfixture_single(cevent("b"), free_sync.clone());
    let t1 = enumerate_concrete(&a, depth, 10_000).unwrap();
    let t2 = enumerate_concrete(&b, depth, 10_000).unwrap();
    let prod = enumerate_concrete(&compose_concrete(a, b), depth, 10_000).unwrap();
    let mut oracle = BTreeSet::new();
    for x in &t1 {
        for y in &t2 {
            if x.len().max(y.len()) > depth {
                continue;
            }
            for t in all_interleavings(x, y, &free_sync).unwrap() {
                if t.len() <= depth {
                    oracle.insert(t);
                }
            }
        }
    }
    reports.push(if prod == oracle {
        CheckReport::pass("concrete product: free interleaving")
    } else {
        CheckReport::fail("concrete product: free interleaving", String::new())
    });

    let sync: BTreeSet<crate::bir::CEventTag> =
        [crate::bir::CEventTag::Fr].into_iter().collect();
    let a = cfixture_single(cshared(0), sync.clone());
    let b = cfixture_single(cshared(0), sync.clone());
    let prod = enumerate_concrete(&compose_concrete(a, b), depth, 10_000).unwrap();
    let expected: BTreeSet<Vec<CEvent>> =
        [vec![], vec![cshared(0)]].into_iter().collect();
    reports.push(if prod == expected {
        CheckReport::pass("concrete product: forced synchronization")
    } else {
        CheckReport::fail("concrete product: forced synchronization", String::new())
    });

    // A stub environment that absorbs network and freshness events lets a
    // real program drive the product.
    let sc = crate::demos::fig5_scenario();
    let program = sc.program().expect("bundled program");
    let mut init_env = Env::new();
    init_env.insert("m".into(), Bval::Int(5));
    let prog_lts = crate::bir::ConcreteProgramLts {
        program,
        cfg: sc.cfg.clone(),
        script: ScriptedWorld {
            rng: vec![Bval::Int(7)],
            recv: vec![],
            fcall: vec![Bval::Int(99)],
        },
        init_env,
    };
    let product = compose_concrete(prog_lts, crate::bir::StubEnvironment);
    match enumerate_concrete(&product, 8, 10_000) {
        Ok(traces) => {
            let longest = traces.iter().max_by_key(|t| t.len()).cloned().unwrap_or_default();
            let tags: Vec<_> = longest
                .iter()
                .filter(|e| !matches!(e, CEvent::Assign(..)))
                .map(|e| e.tag())
                .collect();
            let expected = vec![
                crate::bir::CEventTag::Fr,
                crate::bir::CEventTag::FCall,
                crate::bir::CEventTag::Out,
                crate::bir::CEventTag::Out,
            ];
            reports.push(if tags == expected {
                CheckReport::pass("concrete product: program with stub environment")
            } else {
                CheckReport::fail(
                    "concrete product: program with stub environment",
                    format!("{tags:?}"),
                )
            });
        }
        Err(e) => reports.push(CheckReport::fail("concrete product: program", e.to_string())),
    }
    reports
}
