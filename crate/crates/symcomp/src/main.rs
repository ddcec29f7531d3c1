use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use symcomp::bir::parse_program;
use symcomp::compose::CheckReport;
use symcomp::demos;
use symcomp::sapic::{pretty_print, translate_tree};
use symcomp::scenario::{parse_scenario, query, CombKind, Scenario, ScenarioError};
use symcomp::suites;
use symcomp::symbolic::format_trace;

/// Symbolic composition toolkit: parse and symbolically execute programs,
/// compose them with the attacker model, query knowledge, extract process
/// models, and run the property suites.
#[derive(Parser)]
#[command(name = "symcomp", version, about)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Parse a program and print its canonical form.
    Parse {
        program: PathBuf,
        /// Print the abstract syntax tree instead.
        #[arg(long)]
        dump_ast: bool,
    },
    /// Symbolically execute the scenario's program.
    Exec {
        scenario: PathBuf,
        /// Print the execution tree as graph text.
        #[arg(long)]
        dump_tree: bool,
    },
    /// Extract the process model from the scenario's program.
    Extract {
        scenario: PathBuf,
        /// Output path; stdout when omitted.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Run a knowledge query against the composed system.
    Query {
        scenario: PathBuf,
        /// Goal such as `K(R0)`; defaults to the scenario's queries.
        goal: Option<String>,
        /// Override the scenario's combiner.
        #[arg(long)]
        combiner: Option<String>,
    },
    /// Run a property suite.
    Check {
        /// thm1 | sym-assoc | thm3 | refinement | freshness | concrete | all
        suite: String,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Machine-readable report.
        #[arg(long)]
        json: bool,
    },
    /// Reproduce a bundled example.
    Demo {
        /// ex1 | ex2 | ex3 | ex4 | ex5 | fig5
        name: String,
    },
}

fn load_scenario(path: &Path) -> Result<Scenario, ScenarioError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ScenarioError::Program(path.display().to_string(), e.to_string()))?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    parse_scenario(&text, &move |rel: &str| {
        std::fs::read_to_string(base.join(rel)).map_err(|e| e.to_string())
    })
}

fn json_escape(s: &str) -> String {
    s.chars()
        .flat_map(|c| match c {
            '"' => "\\\"".chars().collect::<Vec<_>>(),
            '\\' => "\\\\".chars().collect(),
            '\n' => "\\n".chars().collect(),
            c => vec![c],
        })
        .collect()
}

fn reports_json(reports: &[CheckReport]) -> String {
    let items: Vec<String> = reports
        .iter()
        .map(|r| {
            let cex = r
                .counterexample
                .as_ref()
                .map(|c| format!(",\"counterexample\":\"{}\"", json_escape(c)))
                .unwrap_or_default();
            format!(
                "{{\"name\":\"{}\",\"pass\":{}{}}}",
                json_escape(&r.name),
                r.pass,
                cex
            )
        })
        .collect();
    format!("[{}]", items.join(","))
}

fn print_reports(reports: &[CheckReport], json: bool) -> bool {
    if json {
        println!("{}", reports_json(reports));
    } else {
        for r in reports {
            print!("{r}");
        }
    }
    reports.iter().all(|r| r.pass)
}

fn sapic_file(sc: &Scenario, process: &str) -> String {
    let fns: Vec<String> = sc.signature.iter().map(|f| f.to_string()).collect();
    let eqs: Vec<String> = sc.equations.iter().map(|e| e.to_string()).collect();
    let mut out = String::new();
    if !fns.is_empty() {
        out.push_str(&format!("functions: {}\n", fns.join(", ")));
    }
    if !eqs.is_empty() {
        out.push_str(&format!("equations: {}\n", eqs.join(", ")));
    }
    if !out.is_empty() {
        out.push('\n');
    }
    out.push_str(process);
    out.push('\n');
    out
}

const EXIT_NEGATIVE: u8 = 1;
const EXIT_INPUT: u8 = 2;
const EXIT_BUDGET: u8 = 3;

fn fail(e: impl std::fmt::Display, code: u8) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(code)
}

fn scenario_code(e: &ScenarioError) -> u8 {
    match e {
        ScenarioError::Sbir(symcomp::sbir::SbirError::StateBudgetExceeded(_)) => EXIT_BUDGET,
        _ => EXIT_INPUT,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.cmd {
        Cmd::Parse { program, dump_ast } => {
            let src = match std::fs::read_to_string(&program) {
                Ok(s) => s,
                Err(e) => return fail(e, EXIT_INPUT),
            };
            match parse_program(&src) {
                Ok(p) => {
                    if dump_ast {
                        println!("{p:#?}");
                    } else {
                        print!("{}", p.pretty());
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => fail(e, EXIT_INPUT),
            }
        }
        Cmd::Exec {
            scenario,
            dump_tree,
        } => {
            let sc = match load_scenario(&scenario) {
                Ok(s) => s,
                Err(e) => return fail(e, EXIT_INPUT),
            };
            let tree = match sc.tree() {
                Ok(t) => t,
                Err(e) => return fail(&e, scenario_code(&e)),
            };
            if dump_tree {
                print!("{}", tree.to_graph_text());
            } else {
                for (i, p) in tree.paths().iter().enumerate() {
                    println!("path {i}:");
                    for line in format_trace(p).lines() {
                        println!("  {line}");
                    }
                }
            }
            ExitCode::SUCCESS
        }
        Cmd::Extract { scenario, output } => {
            let sc = match load_scenario(&scenario) {
                Ok(s) => s,
                Err(e) => return fail(e, EXIT_INPUT),
            };
            let tree = match sc.tree() {
                Ok(t) => t,
                Err(e) => return fail(&e, scenario_code(&e)),
            };
            let proc = match translate_tree(&tree) {
                Ok(p) => p,
                Err(e) => return fail(e, EXIT_INPUT),
            };
            let text = sapic_file(&sc, &pretty_print(&proc));
            match output {
                Some(path) => {
                    if let Err(e) = std::fs::write(&path, text) {
                        return fail(e, EXIT_INPUT);
                    }
                }
                None => print!("{text}"),
            }
            ExitCode::SUCCESS
        }
        Cmd::Query {
            scenario,
            goal,
            combiner,
        } => {
            let sc = match load_scenario(&scenario) {
                Ok(s) => s,
                Err(e) => return fail(e, EXIT_INPUT),
            };
            let kind = match combiner {
                Some(c) => match CombKind::parse(&c) {
                    Ok(k) => k,
                    Err(e) => return fail(e, EXIT_INPUT),
                },
                None => sc.combiner,
            };
            let goals: Vec<String> = match goal {
                Some(g) => vec![g],
                None => sc.queries.clone(),
            };
            if goals.is_empty() {
                return fail("no query given and none in the scenario", EXIT_INPUT);
            }
            let mut all_derived = true;
            for g in goals {
                let parsed = match sc.parse_query(&g) {
                    Ok(p) => p,
                    Err(e) => return fail(e, EXIT_INPUT),
                };
                match query(&sc, kind, &parsed) {
                    Ok(v) => {
                        println!("{g} [{kind}]: {v}");
                        all_derived &= v.is_derived();
                    }
                    Err(e) => return fail(&e, scenario_code(&e)),
                }
            }
            if all_derived {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_NEGATIVE)
            }
        }
        Cmd::Check { suite, seed, json } => {
            let reports = match suite.as_str() {
                "thm1" => suites::suite_thm1(seed, 100, 4),
                "sym-assoc" => suites::suite_sym_assoc(seed, 50, 3),
                "thm3" => suites::suite_thm3(seed, 100),
                "refinement" => suites::suite_refinement(seed, 20),
                "freshness" => suites::suite_freshness(6),
                "concrete" => suites::suite_concrete(4),
                "all" => {
                    let mut all = suites::suite_thm1(seed, 100, 4);
                    all.extend(suites::suite_sym_assoc(seed, 50, 3));
                    all.extend(suites::suite_thm3(seed, 100));
                    all.extend(suites::suite_refinement(seed, 20));
                    all.extend(suites::suite_freshness(6));
                    all.extend(suites::suite_concrete(4));
                    all
                }
                other => return fail(format!("unknown suite `{other}`"), EXIT_INPUT),
            };
            if print_reports(&reports, json) {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_NEGATIVE)
            }
        }
        Cmd::Demo { name } => run_demo(&name),
    }
}

fn run_demo(name: &str) -> ExitCode {
    match name {
        "fig5" => match demos::fig5_report() {
            Ok(r) => {
                print!("{}", r.render());
                ExitCode::SUCCESS
            }
            Err(e) => fail(e, EXIT_INPUT),
        },
        "ex1" => match demos::ex1_report() {
            Ok(reports) => {
                println!("masked encryption key: can the attacker recover the plaintext slot?");
                for r in reports {
                    println!("--combiner {}: {}", r.combiner, r.verdict);
                }
                ExitCode::SUCCESS
            }
            Err(e) => fail(e, EXIT_INPUT),
        },
        "ex2" => {
            let (proof, pi) = demos::ex2_report();
            println!("attacker facts:");
            for p in &pi {
                println!("  {p}");
            }
            println!("derivation of K(m):\n{proof}");
            ExitCode::SUCCESS
        }
        "ex3" => {
            let r = demos::ex3_report();
            println!("transferred facts: {}", r.transferred.join(", "));
            println!(
                "key equality shared: {}",
                if r.key_equality { "yes" } else { "no" }
            );
            match r.proof {
                Some(p) => println!("derivation of K(m):\n{p}"),
                None => println!("K(m) not derivable"),
            }
            ExitCode::SUCCESS
        }
        "ex4" => match demos::ex4_report() {
            Ok(reports) => {
                println!("length-prefixed payload: can the attacker strip the length?");
                for r in reports {
                    println!("--combiner {}: {}", r.combiner, r.verdict);
                }
                ExitCode::SUCCESS
            }
            Err(e) => fail(e, EXIT_INPUT),
        },
        "ex5" => match demos::ex5_report(6) {
            Ok(r) => {
                println!("library and attacker composed; {} traces enumerated", r.traces);
                match r.duplicate_freshness {
                    None => println!("no name is ever drawn twice"),
                    Some(w) => println!("FOUND duplicate freshness: {w}"),
                }
                if let Some(w) = r.witness {
                    println!("attacker's own pick uses a distinct name: {w}");
                }
                ExitCode::SUCCESS
            }
            Err(e) => fail(e, EXIT_BUDGET),
        },
        other => fail(format!("unknown demo `{other}`"), EXIT_INPUT),
    }
}
