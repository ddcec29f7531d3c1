//! Acceptance suite: one test per criterion, each printing a pass line
//! and enforcing its time budget.

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use symcomp::bir::{BinOp, UnOp};
use symcomp::combiners::{bit_combiner, eq_share_combiner};
use symcomp::compose::{CombinedPred, Combiner, EmptyCombiner};
use symcomp::demos;
use symcomp::dy::{DyPred, DyRule};
use symcomp::fixtures::{announcer_fixture, guarded_fixture, random_fixture, Rng, UnlockCombiner};
use symcomp::sbir::{SbirPred, SymExpr};
use symcomp::scenario::{query, CombKind};
use symcomp::suites;
use symcomp::symbolic::{Limits, Symbol};
use symcomp::terms::Term;

fn timed<T>(budget: Duration, f: impl FnOnce() -> T) -> T {
    let start = Instant::now();
    let out = f();
    let elapsed = start.elapsed();
    assert!(
        elapsed <= budget,
        "exceeded time budget: {elapsed:?} > {budget:?}"
    );
    out
}

fn norm_ws(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

#[test]
fn criterion_01_fig5_end_to_end() {
    timed(Duration::from_secs(5), || {
        let report = demos::fig5_report().expect("fig5 runs");

        // (a) The event column, exactly.
        let events: Vec<String> = report.lines.iter().map(|l| l.event.clone()).collect();
        assert_eq!(
            events,
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

        // (b) The process column, textually modulo whitespace.
        assert_eq!(
            norm_ws(&report.process),
            norm_ws(
                "new k; let R1 = k in let R0 = m in let c = senc(R0,R1) in out(c); \
                 let R2 = xor(R1,\u{231c}0xdeadbeef\u{231d}) in out(R2)"
            )
        );

        // (c) The attacker-fact column.
        let dy: Vec<Vec<String>> = report.lines.iter().map(|l| l.dy_preds.clone()).collect();
        assert_eq!(
            dy,
            vec![
                vec!["fresh(k)".to_string()],
                vec![],
                vec![],
                vec!["c \u{21a6} senc(R0,R1)".to_string()],
                vec!["K(c)".to_string()],
                vec![],
                vec!["K(R2)".to_string()],
            ]
        );

        // (d) Combined deduction acquires K(R1), then K(k), then K(R0).
        let tracked: Vec<&str> = report
            .acquisitions
            .iter()
            .map(String::as_str)
            .filter(|a| matches!(*a, "K(R1)" | "K(k)" | "K(R0)"))
            .collect();
        assert_eq!(tracked, vec!["K(R1)", "K(k)", "K(R0)"]);
    });
    println!("criterion 1 (fig5 end-to-end reproduction): pass");
}

#[test]
fn criterion_02_masked_key_queries() {
    timed(Duration::from_secs(5), || {
        let sc = demos::fig5_scenario();
        assert_eq!(sc.ded_budget, 8);
        let goal = sc.parse_query("K(R0)").unwrap();
        let with_bitp = query(&sc, CombKind::BitPrime, &goal).unwrap();
        assert!(with_bitp.is_derived(), "{with_bitp}");
        let with_empty = query(&sc, CombKind::Empty, &goal).unwrap();
        assert!(!with_empty.is_derived(), "{with_empty}");
    });
    println!("criterion 2 (masked encryption key verdicts): pass");
}

#[test]
fn criterion_03_bit_combiner_concatenation() {
    timed(Duration::from_secs(1), || {
        let len_m = SymExpr::Unop(UnOp::Named("len".into()), Box::new(SymExpr::sym("m")));
        let packed = SymExpr::Binop(
            BinOp::Concat,
            Box::new(SymExpr::sym("m")),
            Box::new(len_m.clone()),
        );
        let pi: BTreeSet<CombinedPred<SbirPred, DyPred>> = [
            CombinedPred::Right(DyPred::K(Term::sym("b"))),
            CombinedPred::Left(SbirPred::Eq(Symbol::new("b"), packed)),
            CombinedPred::Left(SbirPred::Const(len_m)),
        ]
        .into_iter()
        .collect();
        let derived = bit_combiner().derive(&pi);
        assert_eq!(
            derived,
            vec![CombinedPred::Right(DyPred::K(Term::sym("m")))]
        );
    });
    println!("criterion 3 (bitstring concatenation via bit): pass");
}

#[test]
fn criterion_04_logical_truth_proof() {
    timed(Duration::from_secs(1), || {
        let (proof, _) = demos::ex2_report();
        let counts = proof.rule_counts();
        let expected: Vec<(DyRule, usize)> = vec![
            (DyRule::K0, 2),
            (DyRule::App, 1),
            (DyRule::Subst, 1),
            (DyRule::Eq, 1),
            (DyRule::AlSubst, 1),
        ];
        let got: Vec<(DyRule, usize)> = counts.into_iter().collect();
        let mut expected_sorted = expected;
        expected_sorted.sort();
        assert_eq!(got, expected_sorted);
    });
    println!("criterion 4 (logical-truth proof tree): pass");
}

#[test]
fn criterion_05_transferable_equalities() {
    timed(Duration::from_secs(1), || {
        // The minimal derivation itself.
        let pi: BTreeSet<CombinedPred<SbirPred, DyPred>> = [
            CombinedPred::Left(SbirPred::Eq(Symbol::new("k'''"), SymExpr::sym("k'"))),
            CombinedPred::Right(DyPred::Eq(Term::sym("k'"), Term::sym("k"))),
        ]
        .into_iter()
        .collect();
        let derived = eq_share_combiner().derive(&pi);
        assert!(derived.contains(&CombinedPred::Right(DyPred::Eq(
            Term::sym("k'''"),
            Term::sym("k")
        ))));

        // And the full example: the transferred equality unlocks K(m).
        let report = demos::ex3_report();
        assert!(report.key_equality);
        let proof = report.proof.expect("K(m) derivable after transfer");
        assert!(proof.rule_counts().contains_key(&DyRule::Subst));
    });
    println!("criterion 5 (transferable equalities): pass");
}

#[test]
fn criterion_06_freshness_exclusivity() {
    timed(Duration::from_secs(10), || {
        let report = demos::ex5_report(6).expect("enumeration within budget");
        assert!(
            report.duplicate_freshness.is_none(),
            "duplicate freshness in {:?}",
            report.duplicate_freshness
        );
        let witness = report.witness.expect("a trace with both draws exists");
        assert!(witness.contains("SFr(n)") && witness.contains("Silent(n2)"));
    });
    println!("criterion 6 (freshness over full enumeration): pass");
}

#[test]
fn criterion_07_thm1_property_suite() {
    timed(Duration::from_secs(60), || {
        let mut rng = Rng::new(1);
        for i in 0..100 {
            let a = random_fixture(&mut rng, 'a');
            let b = random_fixture(&mut rng, 'b');
            let report =
                symcomp::compose::verify_thm1(a, b, EmptyCombiner, Limits::new(4, 2)).unwrap();
            assert!(report.pass, "pair {i}: {report}");
        }
        let report = symcomp::compose::verify_thm1(
            announcer_fixture(),
            guarded_fixture(),
            UnlockCombiner,
            Limits::new(4, 2),
        )
        .unwrap();
        assert!(report.pass, "enabling fixture: {report}");
    });
    println!("criterion 7 (composition vs interleaving oracle, 100 seeds): pass");
}

#[test]
fn criterion_08_symmetry_associativity() {
    timed(Duration::from_secs(30), || {
        let mut rng = Rng::new(2);
        for i in 0..50 {
            let a = random_fixture(&mut rng, 'a');
            let b = random_fixture(&mut rng, 'b');
            let c = random_fixture(&mut rng, 'c');
            let report =
                symcomp::compose::verify_symmetry_associativity(a, b, c, Limits::new(3, 2))
                    .unwrap();
            assert!(report.pass, "triple {i}: {report}");
        }
    });
    println!("criterion 8 (symmetry and associativity, 50 triples): pass");
}

#[test]
fn criterion_09_translation_trace_inclusion() {
    timed(Duration::from_secs(60), || {
        let reports = suites::suite_thm3(3, 100);
        for r in &reports {
            assert!(r.pass, "{r}");
        }
        // The negative control reported a concrete witness.
        let control = reports
            .iter()
            .find(|r| r.name.contains("mutated"))
            .expect("control present");
        assert!(control.details.iter().any(|d| d.contains("missing trace")));
    });
    println!("criterion 9 (process-model trace inclusion, 100 trees): pass");
}

#[test]
fn criterion_10_refinement_spot_check() {
    timed(Duration::from_secs(30), || {
        let reports = suites::suite_refinement(4, 20);
        for r in &reports {
            assert!(r.pass, "{r}");
        }
        assert!(reports
            .iter()
            .any(|r| r.name.contains("20/20 concrete runs matched")));
    });
    println!("criterion 10 (refinement spot-check, 20 runs): pass");
}
