use std::path::PathBuf;
use std::process::{Command, Output};

use std::collections::BTreeMap;

use deltalog_core::derive::{derive_program, DeriveConfig};
use deltalog_core::formula::Term;
use deltalog_core::frontend::{decode_change_atoms, load_program, parse_clauses, parse_delta, parse_facts};
use deltalog_core::gen::{int_constants, random_interpretation, with_random_changes};
use deltalog_core::relation::{positional_name, ActiveDomain, Name, Schema};
use deltalog_core::semantics::eval;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

fn deltalog(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_deltalog"))
        .args(args)
        .env_remove("DELTALOG_MAX_RELATION_SIZE")
        .output()
        .expect("binary runs")
}

fn run_ok(args: &[&str]) -> String {
    let out = deltalog(args);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn p(name: &str) -> String {
    data(name).display().to_string()
}

#[test]
fn eval_prints_closure() {
    let out = run_ok(&["eval", &p("tc.dl"), &p("tc.facts")]);
    assert_eq!(
        out,
        "% tc: 6 facts\ntc(1,2).\ntc(1,3).\ntc(1,4).\ntc(2,3).\ntc(2,4).\ntc(3,4).\n"
    );
    let facts = parse_facts(&out).unwrap();
    assert_eq!(facts.get("tc").unwrap().len(), 6);
}

#[test]
fn seminaive_trace_rows() {
    let out = run_ok(&["eval", &p("tc.dl"), &p("tc.facts"), "--trace"]);
    let rows: Vec<&str> = out.lines().filter(|l| l.starts_with("% ") && l.contains(" | ")).collect();
    assert_eq!(
        rows,
        [
            "% iteration | Δtc | tc",
            "% 0 | {(1,2), (2,3), (3,4)} | {(1,2), (2,3), (3,4)}",
            "% 1 | {(1,3), (2,4)} | {(1,2), (1,3), (2,3), (2,4), (3,4)}",
            "% 2 | {(1,4)} | {(1,2), (1,3), (1,4), (2,3), (2,4), (3,4)}",
            "% 3 | {} | (as above)",
        ]
    );
}

#[test]
fn naive_trace_counts_rederived_facts() {
    let out = run_ok(&["eval", &p("tc.dl"), &p("tc.facts"), "--trace", "--engine", "naive"]);
    let last = out.lines().find(|l| l.starts_with("% 4 |")).unwrap();
    assert_eq!(last, "% 4 | {} | (as above) | 6");
}

#[test]
fn trace_timings_go_to_stderr() {
    let out = deltalog(&["eval", &p("tc.dl"), &p("tc.facts"), "--trace"]);
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains("stratum 0 iteration 0"), "{stderr}");
    assert!(!String::from_utf8(out.stdout).unwrap().contains("µs"));
}

#[test]
fn engines_print_the_same_facts() {
    for (prog, facts) in [("tc.dl", "tc.facts"), ("treeP.dl", "treeP.facts"), ("sg.dl", "sg.facts"), ("reach.dl", "reach.facts")] {
        let a = run_ok(&["eval", &p(prog), &p(facts), "--engine", "naive"]);
        let b = run_ok(&["eval", &p(prog), &p(facts), "--engine", "seminaive"]);
        let c = run_ok(&["eval", &p(prog), &p(facts), "--parallel"]);
        assert_eq!(a, b, "{prog}");
        assert_eq!(b, c, "{prog}");
    }
}

#[test]
fn odd_negation_is_an_input_error() {
    let out = deltalog(&["eval", &p("odd.dl"), &p("empty.facts")]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains("odd number of negations: p -> r -> p"), "{stderr}");
    assert!(out.stdout.is_empty());
}

#[test]
fn syntax_errors_carry_a_location() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.dl");
    std::fs::write(&bad, "tc(X,Y) :- e(X,Y).\ntc(X,Y) :- e(X,Z) tc(Z,Y).\n").unwrap();
    let out = deltalog(&["eval", bad.to_str().unwrap(), &p("empty.facts")]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains("2:19"), "{stderr}");
}

#[test]
fn empty_facts_give_empty_idb() {
    let out = run_ok(&["eval", &p("tc.dl"), &p("empty.facts")]);
    assert_eq!(out, "% tc: 0 facts\n");
}

#[test]
fn divergence_cap_exits_2() {
    let out = deltalog(&["eval", &p("tc.dl"), &p("tc.facts"), "--max-iters", "2"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(deltalog(&["eval", &p("tc.dl"), &p("tc.facts"), "--max-iters", "0"]).status.code(), Some(1));
}

#[test]
fn relation_size_cap_comes_from_the_environment() {
    let run = |cap: &str| {
        Command::new(env!("CARGO_BIN_EXE_deltalog"))
            .args(["check", &p("tc.dl"), "--samples", "5"])
            .env("DELTALOG_MAX_RELATION_SIZE", cap)
            .output()
            .unwrap()
    };
    assert_eq!(run("4").status.code(), Some(2));
    assert_eq!(run("1000").status.code(), Some(0));
    assert_eq!(run("many").status.code(), Some(1));
}

#[test]
fn output_flag_writes_a_file() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("out.facts");
    let stdout = run_ok(&["eval", &p("tc.dl"), &p("tc.facts"), "--output", target.to_str().unwrap()]);
    assert!(stdout.is_empty());
    let written = std::fs::read_to_string(&target).unwrap();
    assert_eq!(parse_facts(&written).unwrap().get("tc").unwrap().len(), 6);
}

#[test]
fn maintain_insert() {
    let out = run_ok(&["maintain", &p("tc.dl"), &p("tc.facts"), &p("insert.delta"), "--validate"]);
    assert!(out.starts_with(
        "% change to tc: 4 added, 0 removed\n+tc(1,5).\n+tc(2,5).\n+tc(3,5).\n+tc(4,5).\n\
         % validation: derivative strategy matched recomputation\n"
    ), "{out}");
    assert!(out.contains("% tc: 10 facts\n"));
}

#[test]
fn maintain_delete_trivial() {
    let out = run_ok(&["maintain", &p("tc.dl"), &p("tc.facts"), &p("delete.delta"), "--strategy", "trivial"]);
    assert!(out.starts_with("% change to tc: 0 added, 4 removed\n-tc(1,3).\n-tc(1,4).\n-tc(2,3).\n-tc(2,4).\n"), "{out}");
    assert!(out.ends_with("% tc: 2 facts\ntc(1,2).\ntc(3,4).\n"), "{out}");
}

#[test]
fn maintain_empty_delta_is_zero() {
    let out = run_ok(&["maintain", &p("tc.dl"), &p("tc.facts"), &p("empty.delta")]);
    assert!(out.starts_with("% change to tc: 0 added, 0 removed\n% updated\n% tc: 6 facts\n"), "{out}");
}

#[test]
fn maintain_outputs_reparse() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().join("idb.delta");
    let f = dir.path().join("idb.facts");
    run_ok(&[
        "maintain",
        &p("treeP.dl"),
        &p("treeP.facts"),
        &p("treeP.delta"),
        "--delta-out",
        d.to_str().unwrap(),
        "--facts-out",
        f.to_str().unwrap(),
    ]);
    let delta = parse_delta(&std::fs::read_to_string(&d).unwrap()).unwrap();
    let facts = parse_facts(&std::fs::read_to_string(&f).unwrap()).unwrap();
    let fresh = run_ok(&["eval", &p("treeP.dl"), &p("treeP_updated.facts")]);
    assert_eq!(parse_facts(&fresh).unwrap(), facts);
    assert!(!delta["treeP"].is_zero());
}

#[test]
fn maintain_rejects_idb_changes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.delta");
    std::fs::write(&bad, "+tc(1,1).\n").unwrap();
    let out = deltalog(&["maintain", &p("tc.dl"), &p("tc.facts"), bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    std::fs::write(&bad, "+e(1,1).\n-e(1,1).\n").unwrap();
    let out = deltalog(&["maintain", &p("tc.dl"), &p("tc.facts"), bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn derive_atom_cases() {
    let out = run_ok(&["derive", &p("simple.dl")]);
    assert_eq!(out, "% p\ndelta_p(X) :- delta_q(X).\nnabla_p(X) :- nabla_q(X).\n");
}

#[test]
fn derive_tc_has_both_disjuncts() {
    let out = run_ok(&["derive", &p("tc.dl")]);
    let up = out.lines().find(|l| l.starts_with("delta_tc")).unwrap();
    assert!(up.contains("delta_e(X, Z), ((tc(Z, Y) ; delta_tc(Z, Y)), !nabla_tc(Z, Y))"), "{up}");
    assert!(up.contains("delta_tc(Z, Y), ((e(X, Z) ; delta_e(X, Z)), !nabla_e(X, Z))"), "{up}");
}

#[test]
fn derive_treep_with_static_edb() {
    let out = run_ok(&["derive", &p("treeP.dl"), "--static-edb"]);
    let down = out.lines().find(|l| l.starts_with("nabla_treeP")).unwrap();
    assert_eq!(down, "nabla_treeP(X) :- p(X), exists Y: (nabla_treeP(Y), child(X, Y)).");
}

#[test]
fn check_passes_on_corpus() {
    for prog in ["tc.dl", "treeP.dl", "reach.dl"] {
        let out = run_ok(&["check", &p(prog), "--samples", "100", "--universe", "3"]);
        assert!(out.contains("result: pass"), "{out}");
    }
}

#[test]
fn check_catches_a_mutated_transform() {
    let out = deltalog(&["check", &p("treeP.dl"), "--mutate", "negation"]);
    assert_eq!(out.status.code(), Some(4));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("result: fail"));
    assert!(stdout.contains("counterexample: derivative correctness fails for treeP"), "{stdout}");
}

#[test]
fn mutate_flag_is_hidden() {
    let help = run_ok(&["check", "--help"]);
    assert!(help.contains("--samples"));
    assert!(!help.contains("--mutate"));
}

#[test]
fn missing_file_is_an_input_error() {
    let out = deltalog(&["eval", "/nonexistent/x.dl", &p("tc.facts")]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn maintenance_cap_exits_3_without_fallback() {
    // Four iterations suffice for the original closure but not for the update.
    let args = ["maintain", &p("tc.dl"), &p("tc.facts"), &p("insert.delta"), "--max-iters", "4"];
    let strict = [&args[..], &["--no-fallback"]].concat();
    let out = deltalog(&strict);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8(out.stderr).unwrap().contains("did not converge"));
    assert_eq!(deltalog(&args).status.code(), Some(2));
}

#[test]
fn repeated_runs_are_byte_identical() {
    let cases: [&[&str]; 4] = [
        &["eval", &p("sg.dl"), &p("sg.facts"), "--trace"],
        &["maintain", &p("treeP.dl"), &p("treeP.facts"), &p("treeP.delta")],
        &["derive", &p("reach.dl")],
        &["check", &p("reach.dl"), "--samples", "50", "--parallel"],
    ];
    for args in cases {
        let first = deltalog(args).stdout;
        for _ in 0..3 {
            assert_eq!(deltalog(args).stdout, first, "{args:?}");
        }
    }
}

#[test]
fn derive_output_reparses_to_the_same_derivatives() {
    for prog in ["tc.dl", "treeP.dl", "sg.dl", "reach.dl"] {
        let p = load_program(&std::fs::read_to_string(data(prog)).unwrap()).unwrap();
        let derivs = derive_program(&p, DeriveConfig::default()).unwrap();
        let printed = run_ok(&["derive", &data(prog).display().to_string()]);
        let clauses = parse_clauses(&printed).unwrap();
        assert_eq!(clauses.len(), 2 * derivs.len(), "{prog}");

        let mut arities = p.edb().clone();
        arities.extend(p.idb().iter().map(|(k, v)| (k.clone(), *v)));
        let mut dom = ActiveDomain::new(int_constants(3));
        dom.extend(p.constants());
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for (head, body) in &clauses {
            let (pred, down) = match head.pred.strip_prefix("delta_") {
                Some(rest) => (rest, false),
                None => (head.pred.strip_prefix("nabla_").expect("change head"), true),
            };
            let d = &derivs[pred];
            let want = if down { &d.down } else { &d.up };
            let to_positional: BTreeMap<Name, Name> = head
                .args
                .iter()
                .enumerate()
                .map(|(i, t)| match t {
                    Term::Var(v) => (v.clone(), positional_name(pred, i)),
                    Term::Const(c) => panic!("constant {c} in head"),
                })
                .collect();
            let got = decode_change_atoms(body).rename_free(&to_positional);
            let schema = Schema::positional(pred, head.args.len());
            for _ in 0..20 {
                let env = random_interpretation(&mut rng, &arities, &dom, 0.4);
                let env = with_random_changes(&mut rng, env, &arities, &dom, 0.25);
                assert_eq!(
                    eval(&got, &schema, &env, &dom).unwrap(),
                    eval(want, &schema, &env, &dom).unwrap(),
                    "{prog}: {}",
                    head.pred
                );
            }
        }
    }
}
