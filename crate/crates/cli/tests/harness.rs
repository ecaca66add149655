use std::collections::BTreeSet;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::net::TcpStream;
use std::path::Path;
use std::thread;

use lawlab::config::{derive_seed, AgentConfig, SuiteConfig, TaskFilter};
use lawlab::report::{aggregate_records, summarize};
use lawlab::rescore::rescore_dir;
use lawlab::runner::{read_records, run_suite, RunStatus, RUNS_FILE};
use lawlab_core::evaluation::EvaluationReport;
use lawlab_core::forge::Tier;
use lawlab_core::session::{Action, Message};
use lawlab_core::system::{shipped_suite, Setting};
use proptest::prelude::*;

fn gravitation_vanilla(dir: &Path) -> SuiteConfig {
    SuiteConfig {
        filter: TaskFilter {
            domains: vec!["gravitation".into()],
            tiers: vec![],
            settings: vec![Setting::Vanilla],
        },
        repeats: 1,
        master_seed: 7,
        output: dir.to_path_buf(),
        eval_points: 400,
        ..SuiteConfig::default()
    }
}

#[test]
fn filter_selects_nine_gravitation_tasks() {
    let dir = tempfile::tempdir().unwrap();
    let c = gravitation_vanilla(dir.path());
    let tasks = c.select(shipped_suite()).unwrap();
    assert_eq!(tasks.len(), 9);
    assert!(tasks
        .iter()
        .all(|t| t.domain == "gravitation" && t.setting == Setting::Vanilla));
}

#[test]
fn empty_selection_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = gravitation_vanilla(dir.path());
    c.filter.domains = vec!["alchemy".into()];
    assert!(c.select(shipped_suite()).is_err());
}

#[test]
fn config_validation() {
    let ok = SuiteConfig::from_toml(
        r#"
        repeats = 2
        noise_sigma = 0.01
        master_seed = 3
        [filter]
        domains = ["acoustics"]
        tiers = ["easy"]
        [agent]
        kind = "external-endpoint"
        listen = "127.0.0.1:0"
        [solver]
        noisy_repeats = 2
        "#,
    )
    .unwrap();
    ok.validate().unwrap();
    assert_eq!(ok.filter.tiers, vec![Tier::Easy]);
    assert_eq!(
        ok.agent,
        AgentConfig::ExternalEndpoint {
            listen: "127.0.0.1:0".into()
        }
    );

    let full = SuiteConfig::from_toml(
        r#"
        repeats = 4
        noise_sigma = 0.0
        master_seed = 0
        output = "results"
        workers = 0
        [filter]
        domains = ["gravitation", "acoustics"]
        tiers = ["easy"]
        settings = ["vanilla"]
        [agent]
        kind = "builtin-solver"
        [session]
        max_rounds = 10
        max_sets_per_round = 20
        [solver.mode]
        kind = "free-grammar"
        depth = 2
        max_params = 2
        cap = 5000
        "#,
    )
    .unwrap();
    full.validate().unwrap();
    assert_eq!(full.select(shipped_suite()).unwrap().len(), 6);

    assert!(SuiteConfig::from_toml("repeats = 1\nbogus = true").is_err());
    for bad in ["repeats = 0", "noise_sigma = 0.05", "eval_points = 0"] {
        let c = SuiteConfig::from_toml(bad).unwrap();
        assert!(c.validate().is_err(), "{bad}");
    }
}

#[test]
fn seeds_are_pure_and_distinct() {
    assert_eq!(
        derive_seed(1, "gravitation/1/easy/vanilla", 0),
        derive_seed(1, "gravitation/1/easy/vanilla", 0)
    );
    let mut seen = BTreeSet::new();
    for master in 0..3 {
        for task in shipped_suite().iter().take(20) {
            for repeat in 0..4 {
                assert!(seen.insert(derive_seed(master, &task.id, repeat)));
            }
        }
    }
}

fn file_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                out.push((rel, fs::read(&path).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn runs_are_deterministic_and_resumable() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let first = run_suite(&gravitation_vanilla(a.path())).unwrap();
    assert_eq!(first.executed, 9);
    assert_eq!(first.errors, 0);
    let mut cb = gravitation_vanilla(b.path());
    cb.workers = 1;
    run_suite(&cb).unwrap();
    assert_eq!(file_bytes(a.path()), file_bytes(b.path()));

    let (records, corrupt) = read_records(a.path()).unwrap();
    assert_eq!((records.len(), corrupt), (9, 0));
    assert!(records
        .iter()
        .all(|r| r.status == RunStatus::Ok && r.evaluation.symbolic_accuracy));
    let summary = first.summary;
    let overall = summary.overall.as_ref().unwrap();
    assert_eq!((overall.sa_mean, overall.sa_std), (100.0, 0.0));
    assert_eq!(summary.grid.len(), 9);
    assert_eq!(summary.domains.len(), 12);
    assert!(summary.domains[0].summary.is_some());
    assert!(summary.domains[1..].iter().all(|d| d.summary.is_none()));
    assert_eq!(summary, summarize(&records, 0));
    let on_disk: lawlab::Summary =
        serde_json::from_str(&fs::read_to_string(a.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(on_disk, summarize(&records, 0));

    // Second call with two repeats only runs the new repeat.
    let mut more = gravitation_vanilla(a.path());
    more.repeats = 2;
    let second = run_suite(&more).unwrap();
    assert_eq!((second.executed, second.skipped), (9, 9));
    let (records, _) = read_records(a.path()).unwrap();
    assert_eq!(records.len(), 18);
    let keys: BTreeSet<_> = records.iter().map(|r| r.key()).collect();
    assert_eq!(keys.len(), 18);
    let third = run_suite(&more).unwrap();
    assert_eq!((third.executed, third.skipped), (0, 18));
    for name in ["summary.json", "summary.txt", "summary.csv"] {
        assert!(a.path().join(name).exists());
    }

    let rescored = rescore_dir(a.path(), &more).unwrap();
    assert_eq!(rescored.len(), 18);
    for (r, rec) in rescored.iter().zip(&records) {
        assert!(r.replay_matches && r.error.is_none(), "{r:?}");
        assert_eq!(r.evaluation.as_ref(), Some(&rec.evaluation));
    }
}

#[test]
fn corrupt_lines_are_skipped() {
    let dir = tempfile::tempdir().unwrap();
    run_suite(&SuiteConfig {
        filter: TaskFilter {
            domains: vec!["elasticity".into()],
            tiers: vec![Tier::Easy],
            settings: vec![Setting::Vanilla],
        },
        ..gravitation_vanilla(dir.path())
    })
    .unwrap();
    let path = dir.path().join(RUNS_FILE);
    let mut f = fs::OpenOptions::new().append(true).open(&path).unwrap();
    writeln!(f, "{{\"task\": truncated").unwrap();
    let (records, corrupt) = read_records(dir.path()).unwrap();
    assert_eq!((records.len(), corrupt), (3, 1));
}

fn report(correct: bool) -> EvaluationReport {
    EvaluationReport {
        symbolic_accuracy: correct,
        rmsle: Some(if correct { 0.0 } else { 1.0 }),
        ..EvaluationReport::missing()
    }
}

#[test]
fn aggregates_group_by_repeat_and_count_errors_as_wrong() {
    let dir = tempfile::tempdir().unwrap();
    run_suite(&gravitation_vanilla(dir.path())).unwrap();
    let (template, _) = read_records(dir.path()).unwrap();
    let mut records = Vec::new();
    // Repeat 0: 2 of 2 correct; repeat 1: 1 correct, 1 errored.
    for (repeat, ok, correct) in [(0, true, true), (0, true, true), (1, true, true), (1, false, true)] {
        let mut r = template[0].clone();
        r.repeat = repeat;
        r.evaluation = report(correct);
        if !ok {
            r.status = RunStatus::Error;
        }
        records.push(r);
    }
    let cell = aggregate_records(&records).unwrap();
    assert_eq!(cell.runs, 2);
    assert_eq!(cell.sa_mean, 75.0);
    assert_eq!(cell.sa_std, 25.0);
    assert_eq!(cell.rmsle_infinite, 1);
}

#[test]
fn external_agent_drives_a_run() {
    let dir = tempfile::tempdir().unwrap();
    let port = std::net::TcpListener::bind("127.0.0.1:0")
        .unwrap()
        .local_addr()
        .unwrap()
        .port();
    let listen = format!("127.0.0.1:{port}");
    let config = SuiteConfig {
        filter: TaskFilter {
            domains: vec!["gravitation".into()],
            tiers: vec![Tier::Easy],
            settings: vec![Setting::Vanilla],
        },
        agent: AgentConfig::ExternalEndpoint { listen: listen.clone() },
        ..gravitation_vanilla(dir.path())
    };
    let server = thread::spawn(move || run_suite(&config).unwrap());
    // One connection per selected task (the three easy chains), in suite order.
    for _ in 0..3 {
        let stream = loop {
            match TcpStream::connect(&listen) {
                Ok(s) => break s,
                Err(_) => thread::sleep(std::time::Duration::from_millis(20)),
            }
        };
        let mut reader = BufReader::new(stream.try_clone().unwrap());
        let mut writer = stream;
        let mut line = String::new();
        reader.read_line(&mut line).unwrap();
        let id = Message::from_line(&line).unwrap().session_id;
        let submit = Message::request(&id, 0, &Action::SubmitFinalLaw("C * m1 * m2 / r ^ 1.5".into()));
        writeln!(writer, "{}", submit.to_line()).unwrap();
        line.clear();
        reader.read_line(&mut line).unwrap();
        assert!(line.contains("accepted"), "{line}");
    }
    let outcome = server.join().unwrap();
    assert_eq!((outcome.executed, outcome.errors), (3, 0));
    let (records, _) = read_records(dir.path()).unwrap();
    let verdicts: Vec<bool> = records.iter().map(|r| r.evaluation.symbolic_accuracy).collect();
    assert_eq!(verdicts, [true, false, false]);
    assert!(records.iter().all(|r| r.rounds_used == 0));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn seed_depends_on_every_component(master in any::<u64>(), repeat in 0usize..100) {
        let task = "acoustics/2/hard/complex";
        let s = derive_seed(master, task, repeat);
        prop_assert_eq!(s, derive_seed(master, task, repeat));
        prop_assert_ne!(s, derive_seed(master, task, repeat + 1));
        prop_assert_ne!(s, derive_seed(master.wrapping_add(1), task, repeat));
        prop_assert_ne!(s, derive_seed(master, "acoustics/2/hard/simple", repeat));
    }
}

#[test]
fn resume_rejects_a_different_configuration() {
    let dir = tempfile::tempdir().unwrap();
    let base = SuiteConfig {
        filter: TaskFilter {
            domains: vec!["elasticity".into()],
            tiers: vec![Tier::Easy],
            settings: vec![Setting::Vanilla],
        },
        ..gravitation_vanilla(dir.path())
    };
    run_suite(&base).unwrap();
    let noisy = SuiteConfig {
        noise_sigma: 0.01,
        ..base.clone()
    };
    assert!(run_suite(&noisy).is_err());
    let reseeded = SuiteConfig { master_seed: 8, ..base };
    assert!(run_suite(&reseeded).is_err());
}

#[test]
fn binary_runs_reports_and_exits_nonzero_on_bad_input() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r");
    let bin = env!("CARGO_BIN_EXE_lawlab");
    let status = std::process::Command::new(bin)
        .args([
            "run",
            "--domain",
            "elasticity",
            "--tier",
            "easy",
            "--setting",
            "vanilla",
            "--repeats",
            "1",
        ])
        .arg("--output")
        .arg(&out)
        .env("LAWLAB_SEED", "11")
        .output()
        .unwrap();
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    let (records, _) = read_records(&out).unwrap();
    assert_eq!(records.len(), 3);
    assert_eq!(records[0].seed, derive_seed(11, &records[0].task, 0));

    let report = std::process::Command::new(bin)
        .arg("report")
        .arg(&out)
        .output()
        .unwrap();
    assert!(report.status.success());
    assert!(String::from_utf8_lossy(&report.stdout).contains("elasticity"));

    let bad = std::process::Command::new(bin)
        .args(["run", "--noise", "0.05", "--output"])
        .arg(&out)
        .output()
        .unwrap();
    assert!(!bad.status.success());
}
