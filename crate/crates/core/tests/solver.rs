use std::collections::BTreeSet;
use std::net::TcpListener;
use std::thread;

use lawlab_core::evaluation::{evaluate_task, sample_eval_inputs, symbolic_equivalent, EQUIV_TOL};
use lawlab_core::expr::{parse, Symbols};
use lawlab_core::forge::{shipped_catalog, Distribution};
use lawlab_core::session::{open_session, serve_tcp, LineClient, SessionConfig};
use lawlab_core::solver::*;
use lawlab_core::system::{shipped_suite, Setting, TaskSpec};
use lawlab_core::{Expr, Node, Op};

fn task(id: &str) -> &'static TaskSpec {
    shipped_suite().iter().find(|t| t.id == id).unwrap()
}

fn candidate(text: &str, vars: &[&str]) -> CandidateStructure {
    let symbols = Symbols::new(vars.iter().map(|v| v.to_string()), Vec::<String>::new()).allow_free_constants();
    CandidateStructure {
        id: 0,
        label: text.to_string(),
        tree: parse(text, &symbols).unwrap().canonicalize(),
    }
}

fn log_uniform(vars: &[&str], low: f64, high: f64) -> Vec<(String, Distribution)> {
    vars.iter()
        .map(|v| (v.to_string(), Distribution::LogUniform { low, high }))
        .collect()
}

fn observations(law: &Expr, vars: &[&str], points: Vec<Vec<f64>>) -> Observations {
    let mut data = Observations::new(vars.iter().map(|v| v.to_string()).collect());
    for p in points {
        let b: Vec<(String, f64)> = vars.iter().map(|v| v.to_string()).zip(p.iter().copied()).collect();
        let z = law.evaluate(&b).unwrap().value().unwrap();
        data.push(p, z);
    }
    data
}

#[test]
fn catalog_closure_has_ten_structures_per_domain() {
    for law in &shipped_catalog().laws {
        let c = enumerate_candidates(HypothesisSpace::CatalogClosure(law), &law.variable_names()).unwrap();
        assert_eq!(c.len(), 10, "{}", law.domain);
        assert_eq!(c[0].label, "canonical");
        let texts: BTreeSet<String> = c.iter().map(|c| c.tree.to_string()).collect();
        assert_eq!(texts.len(), 10);
        assert!(c.iter().all(|c| c.tree.is_canonical() && c.param_count() >= 1));
    }
}

#[test]
fn grammar_depth_one_keeps_one_product() {
    let vars = ["x".to_string()];
    let space = HypothesisSpace::FreeGrammar {
        depth: 1,
        max_params: 1,
        cap: 10_000,
    };
    let c = enumerate_candidates(space, &vars).unwrap();
    let products = c
        .iter()
        .filter(|c| {
            matches!(c.tree.root(), Node::Apply(Op::Mul, args)
                if args.iter().any(|a| matches!(a, Node::Var(_))) && args.iter().any(|a| matches!(a, Node::Const(_))))
        })
        .count();
    assert_eq!(products, 1);
    assert!(c.iter().all(|c| c.tree.depth() <= 2));
}

#[test]
fn grammar_rejects_bad_bounds() {
    let vars = ["x".to_string()];
    let zero = HypothesisSpace::FreeGrammar {
        depth: 0,
        max_params: 1,
        cap: 100,
    };
    assert!(matches!(enumerate_candidates(zero, &vars), Err(SolverError::Config(_))));
    let tight = HypothesisSpace::FreeGrammar {
        depth: 2,
        max_params: 1,
        cap: 50,
    };
    assert_eq!(
        enumerate_candidates(tight, &vars).unwrap_err(),
        SolverError::TooManyCandidates { cap: 50 }
    );
}

/// Every tree with at most `depth` operator levels, no sharing between levels.
fn brute_trees(leaves: &[Node], depth: usize) -> Vec<Node> {
    if depth == 0 {
        return leaves.to_vec();
    }
    let below = brute_trees(leaves, depth - 1);
    let mut out = leaves.to_vec();
    for t in &below {
        for op in Op::UNARY {
            out.push(Node::unary(op, t.clone()));
        }
    }
    for a in &below {
        for b in &below {
            for op in Op::BINARY {
                out.push(Node::binary(op, a.clone(), b.clone()));
            }
        }
    }
    out
}

fn name_params(node: &Node, order: &[usize], next: &mut usize) -> Node {
    match node {
        Node::Const(_) => {
            let n = Node::constant(format!("C{}", order[*next]), 1.0);
            *next += 1;
            n
        }
        Node::Apply(op, args) => Node::Apply(*op, args.iter().map(|a| name_params(a, order, next)).collect()),
        other => other.clone(),
    }
}

fn count_params(node: &Node) -> usize {
    match node {
        Node::Const(_) => 1,
        Node::Apply(_, args) => args.iter().map(count_params).sum(),
        _ => 0,
    }
}

/// Text that ignores which parameter is which: the smallest canonical
/// rendering over all namings, with indices erased.
fn param_blind_key(node: &Node) -> String {
    let k = count_params(node);
    let orders: Vec<Vec<usize>> = match k {
        0 => vec![vec![]],
        1 => vec![vec![1]],
        2 => vec![vec![1, 2], vec![2, 1]],
        _ => unreachable!(),
    };
    orders
        .iter()
        .map(|o| {
            let e = Expr::new(name_params(node, o, &mut 0)).unwrap().canonicalize();
            let mut text = e.to_string();
            for i in 1..=2 {
                text = text.replace(&format!("C{i}"), "C");
            }
            text
        })
        .min()
        .unwrap()
}

#[test]
fn grammar_count_matches_brute_force() {
    let vars: Vec<String> = ["m1", "m2", "r"].iter().map(|s| s.to_string()).collect();
    let space = HypothesisSpace::FreeGrammar {
        depth: 2,
        max_params: 2,
        cap: 1_000_000,
    };
    let got = enumerate_candidates(space, &vars).unwrap();
    let mut leaves: Vec<Node> = vars.iter().map(|v| Node::var(v.clone())).collect();
    leaves.push(Node::constant("C", 1.0));
    let keys: BTreeSet<String> = brute_trees(&leaves, 2)
        .iter()
        .filter(|t| count_params(t) <= 2)
        .map(param_blind_key)
        .collect();
    assert_eq!(got.len(), keys.len());
}

#[test]
fn exponent_difference_is_separated_by_two_points() {
    let a = candidate("C * r ^ 2", &["r"]);
    let b = candidate("C * r ^ 1.5", &["r"]);
    let data = observations(&a.tree, &["r"], vec![vec![1.5], vec![3.0]]);
    assert!(fit_structure(&b, &data, 0.0).residual > SEPARATION_TOL);
    let set = design_probe_set(&[a, b], &log_uniform(&["r"], 0.1, 10.0), DEFAULT_MARGIN, 1).unwrap();
    assert_eq!(set.len(), 1 + DEFAULT_MARGIN);
    assert!(set.aliases.is_empty());
}

#[test]
fn product_and_sum_are_separated() {
    let mut a = candidate("C * m1 * m2", &["m1", "m2"]);
    let mut b = candidate("C * (m1 + m2)", &["m1", "m2"]);
    a.id = 0;
    b.id = 1;
    let set = design_probe_set(&[a.clone(), b.clone()], &log_uniform(&["m1", "m2"], 0.1, 10.0), 6, 9).unwrap();
    for (x, y) in [(&a, &b), (&b, &a)] {
        let data = observations(&x.tree.inline_constants(), &["m1", "m2"], set.points.clone());
        assert!(fit_structure(y, &data, 0.0).residual > 1e-3);
        assert!(fit_structure(x, &data, 0.0).residual < NOISELESS_TOL);
    }
    assert!(set.points.iter().any(|p| (p[0] - p[1]).abs() > 1e-6));
}

#[test]
fn probe_points_are_distinct_and_in_domain() {
    let law = shipped_catalog().law("gravitation").unwrap();
    let c = enumerate_candidates(HypothesisSpace::CatalogClosure(law), &law.variable_names()).unwrap();
    let ranges = law.sampling(None);
    let set = design_probe_set(&c, &ranges, DEFAULT_MARGIN, 5).unwrap();
    assert!(set.len() >= 7);
    for (i, p) in set.points.iter().enumerate() {
        assert!(!set.points[..i].contains(p));
        for (v, (_, d)) in p.iter().zip(&ranges) {
            assert!(*v >= d.low() && *v <= d.high());
        }
    }
}

#[test]
fn fits_the_gravitation_constant() {
    let vars = ["m1", "m2", "r"];
    let truth = parse(
        "6.674e-5 * m1 * m2 / r ^ 1.5",
        &Symbols::new(vars.map(String::from), Vec::<String>::new()),
    )
    .unwrap();
    let points: Vec<Vec<f64>> = (0..8)
        .map(|i| vec![0.5 + i as f64, 2.0 + 0.3 * i as f64, 1.0 + 0.7 * i as f64])
        .collect();
    let data = observations(&truth, &vars, points);
    let right = fit_structure(&candidate("C * m1 * m2 / r ^ 1.5", &vars), &data, 0.0);
    assert!(right.accepted(0.0));
    assert!((right.params[0].1 / 6.674e-5 - 1.0).abs() < 1e-9);
    let wrong = fit_structure(&candidate("C * m1 * m2 / r ^ 2", &vars), &data, 0.0);
    assert!(wrong.residual >= 0.1);
}

#[test]
fn free_exponent_snaps_to_the_palette() {
    let truth = parse("3 * r ^ 1.5", &Symbols::new(["r".to_string()], Vec::<String>::new())).unwrap();
    let points: Vec<Vec<f64>> = (1..10).map(|i| vec![0.37 * i as f64]).collect();
    let data = observations(&truth, &["r"], points);
    let fit = fit_structure(&candidate("C1 * r ^ C2", &["r"]), &data, 0.0);
    assert_eq!(fit.snapped, vec![("C2".to_string(), 1.5)]);
    assert!(fit.residual < 1e-12);
    assert!(fit.law.to_string().ends_with("r ^ 1.5"), "{}", fit.law);
}

#[test]
fn fit_needs_enough_data() {
    let data = Observations::new(vec!["r".into()]);
    assert_eq!(
        fit_structure(&candidate("C * r", &["r"]), &data, 0.0).residual,
        f64::INFINITY
    );
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs())
}

#[test]
fn oracle_reproduces_the_target_on_every_system() {
    for task in shipped_suite().iter().filter(|t| t.setting != Setting::Vanilla) {
        let (mut s, _) = open_session(task, SessionConfig::default(), "o").unwrap();
        let data = sample_eval_inputs(&task.target, task.target_sampling(), 20, 4).unwrap();
        let mut oracle = isolate_target_oracle(task, &mut s);
        let zs = oracle.observe(&data.points, 1).unwrap();
        for (z, y) in zs.iter().zip(&data.y) {
            assert!(rel(z.unwrap(), *y) < 1e-9, "{}", task.id);
        }
        assert_eq!(s.rounds_used(), 1);
    }
}

#[test]
fn acoustics_inverts_the_echo_time() {
    let task = task("acoustics/1/easy/simple");
    let (mut s, _) = open_session(task, SessionConfig::default(), "a").unwrap();
    let mut oracle = isolate_target_oracle(task, &mut s);
    let point = sample_eval_inputs(&task.target, task.target_sampling(), 1, 2)
        .unwrap()
        .points[0]
        .clone();
    let inputs = oracle.system_inputs(&point);
    let z = oracle.observe(std::slice::from_ref(&point), 1).unwrap()[0].unwrap();
    let b: Vec<(String, f64)> = inputs.into_iter().collect();
    let truth = task.target.evaluate(&b).unwrap().value().unwrap();
    assert!(rel(z, truth) < 1e-12);
}

#[test]
fn vanilla_oracle_is_the_identity_and_noise_passes_through() {
    let task = task("gravitation/1/easy/vanilla");
    let point = vec![2.0, 2.0, 4.0];
    let (mut s, _) = open_session(task, SessionConfig::default(), "v").unwrap();
    let z = isolate_target_oracle(task, &mut s)
        .observe(std::slice::from_ref(&point), 1)
        .unwrap()[0]
        .unwrap();
    assert!(rel(z, 3.337e-5) < 1e-12);
    let noisy = SessionConfig {
        noise_sigma: 0.1,
        rng_seed: 3,
        ..SessionConfig::default()
    };
    let (mut s, _) = open_session(task, noisy, "n").unwrap();
    let z = isolate_target_oracle(task, &mut s).observe(&[point], 1).unwrap()[0].unwrap();
    assert!(rel(z, 3.337e-5) > 1e-6);
}

#[test]
fn oracle_refuses_to_overspend() {
    let task = task("gravitation/1/easy/vanilla");
    let config = SessionConfig {
        max_rounds: 1,
        ..SessionConfig::default()
    };
    let (mut s, _) = open_session(task, config, "b").unwrap();
    let points = vec![vec![1.0, 1.0, 1.0]; 21];
    let err = isolate_target_oracle(task, &mut s).observe(&points, 1).unwrap_err();
    assert_eq!(err, SolverError::Budget { needed: 2, left: 1 });
    assert_eq!(s.rounds_used(), 0);
}

fn solve(id: &str, sigma: f64) -> (TaskSpec, Expr, DiscoveryReport, usize) {
    let task = task(id).clone();
    let config = SessionConfig {
        noise_sigma: sigma,
        ..SessionConfig::default()
    };
    let (mut s, _) = open_session(&task, config, "d").unwrap();
    let (law, report) = discover(&task, &mut s, &SolverConfig::default()).unwrap();
    assert_eq!(s.submission().unwrap().to_string(), law.to_string());
    let used = s.rounds_used();
    (task, law, report, used)
}

#[test]
fn discovers_vanilla_easy_gravitation() {
    let (task, law, report, rounds) = solve("gravitation/1/easy/vanilla", 0.0);
    assert_eq!(report.selected, "1/easy");
    assert_eq!(report.accepted, vec!["1/easy".to_string()]);
    assert!(law.to_string().ends_with("* m1 * m2 / r ^ 1.5"), "{law}");
    assert!(rounds <= 10 && report.queries <= 200);
    assert!(evaluate_task(&task, &law, 2000, 1).unwrap().symbolic_accuracy);
    assert_eq!(report.candidate_count, 10);
    assert!(report.render().contains("selected: 1/easy"));
}

#[test]
fn discovers_simple_acoustics() {
    let (task, law, report, _) = solve("acoustics/1/easy/simple", 0.0);
    assert_eq!(report.selected, "1/easy");
    assert!(evaluate_task(&task, &law, 2000, 1).unwrap().symbolic_accuracy);
}

#[test]
fn noisy_runs_average_repeats() {
    let (_, _, report, _) = solve("gravitation/1/easy/vanilla", 0.01);
    assert_eq!(report.queries, 4 * report.probes);
    assert_eq!(report.sigma, 0.01);
}

#[test]
fn discovers_over_the_wire() {
    let task = task("thermal-conduction/2/medium/complex").clone();
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let served = task.clone();
    let server = thread::spawn(move || serve_tcp(listener, &served, SessionConfig::default(), Some(1)).unwrap());
    let mut client = LineClient::connect(addr).unwrap();
    let (law, report) = discover(&task, &mut client, &SolverConfig::default()).unwrap();
    let sessions = server.join().unwrap();
    assert_eq!(sessions[0].submission().unwrap().to_string(), law.to_string());
    assert_eq!(sessions[0].rounds_used(), report.rounds);
    assert!(evaluate_task(&task, &law, 2000, 1).unwrap().symbolic_accuracy);
}

/// Vanilla tasks where several catalog structures fit the noiseless data;
/// each group is one function under the fitted constants.
const ALIASED_TASKS: [&str; 16] = [
    "nuclear-physics/1/medium/vanilla",
    "nuclear-physics/1/hard/vanilla",
    "nuclear-physics/2/medium/vanilla",
    "oscillations/1/easy/vanilla",
    "oscillations/1/medium/vanilla",
    "oscillations/2/medium/vanilla",
    "elasticity/1/easy/vanilla",
    "elasticity/1/medium/vanilla",
    "elasticity/2/easy/vanilla",
    "elasticity/2/medium/vanilla",
    "elasticity/2/hard/vanilla",
    "elasticity/3/easy/vanilla",
    "elasticity/3/medium/vanilla",
    "elasticity/3/hard/vanilla",
    "calorimetry/1/medium/vanilla",
    "calorimetry/3/easy/vanilla",
];

#[test]
fn one_structure_fits_up_to_aliases() {
    let mut aliased = Vec::new();
    for task in shipped_suite().iter().filter(|t| t.setting == Setting::Vanilla) {
        let (mut s, _) = open_session(task, SessionConfig::default(), "u").unwrap();
        let (_, report) = discover(task, &mut s, &SolverConfig::default()).unwrap();
        assert!(!report.accepted.is_empty(), "{}", task.id);
        if report.accepted.len() > 1 {
            aliased.push(task.id.clone());
            let data = sample_eval_inputs(&task.target, task.target_sampling(), 1024, 8).unwrap();
            let symbols = Symbols::new(task.target_inputs.clone(), Vec::<String>::new());
            for r in report.residuals.iter().filter(|r| report.accepted.contains(&r.label)) {
                let law = parse(r.law.as_deref().unwrap(), &symbols).unwrap();
                assert!(
                    symbolic_equivalent(&task.target, &law, &data, EQUIV_TOL).unwrap(),
                    "{} {}",
                    task.id,
                    r.label
                );
            }
        }
    }
    assert_eq!(aliased, ALIASED_TASKS);
}

#[test]
fn sigma_scales_the_tolerance() {
    assert_eq!(acceptance_tolerance(0.0), 1e-8);
    assert!((acceptance_tolerance(0.01) - 0.05).abs() < 1e-15);
}
