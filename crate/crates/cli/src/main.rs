use std::net::TcpListener;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use lawlab::analytics::{transcript_stats, WordSets};
use lawlab::config::SuiteConfig;
use lawlab::rescore::rescore_dir;
use lawlab::{render_report, run_suite, HarnessError};
use lawlab_core::forge::Tier;
use lawlab_core::session::{serve_tcp, SessionConfig};
use lawlab_core::system::{shipped_suite, Setting};

#[derive(Parser)]
#[command(name = "lawlab", version, about = "Run and score the law-discovery benchmark")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the task suite and append to a results directory.
    Run {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long)]
        repeats: Option<usize>,
        #[arg(long)]
        noise: Option<f64>,
        #[arg(long = "domain")]
        domains: Vec<String>,
        #[arg(long = "tier", value_parser = parse_tier)]
        tiers: Vec<Tier>,
        #[arg(long = "setting", value_parser = parse_setting)]
        settings: Vec<Setting>,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long, env = "LAWLAB_SEED")]
        seed: Option<u64>,
        /// Wait for an external agent on this address instead of the built-in solver.
        #[arg(long)]
        listen: Option<String>,
    },
    /// Replay and re-score the transcripts of a results directory.
    Eval {
        dir: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Write summary files for a results directory.
    Report { dir: PathBuf },
    /// Exploration rate and size of transcripts.
    AnalyzeTranscripts {
        #[arg(required = true)]
        paths: Vec<PathBuf>,
        #[arg(long)]
        word_sets: Option<PathBuf>,
    },
    /// Serve sessions for one task over TCP.
    Serve {
        #[arg(long)]
        task: String,
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        #[arg(long, default_value_t = 0, env = "LAWLAB_SEED")]
        seed: u64,
        #[arg(long)]
        max_rounds: Option<usize>,
        #[arg(long)]
        max_sets: Option<usize>,
        #[arg(long, default_value = "127.0.0.1:7878")]
        listen: String,
        /// Stop after this many sessions.
        #[arg(long)]
        sessions: Option<usize>,
    },
}

fn parse_tier(s: &str) -> Result<Tier, String> {
    Tier::ALL
        .into_iter()
        .find(|t| t.as_str() == s)
        .ok_or_else(|| format!("unknown tier {s:?}"))
}

fn parse_setting(s: &str) -> Result<Setting, String> {
    Setting::ALL
        .into_iter()
        .find(|t| t.as_str() == s)
        .ok_or_else(|| format!("unknown setting {s:?}"))
}

fn execute(command: Command) -> Result<bool, HarnessError> {
    match command {
        Command::Run {
            config,
            output,
            repeats,
            noise,
            domains,
            tiers,
            settings,
            workers,
            seed,
            listen,
        } => {
            let mut c = match config {
                Some(path) => SuiteConfig::load(&path)?,
                None => SuiteConfig::default(),
            };
            if let Some(v) = output {
                c.output = v;
            }
            if let Some(v) = repeats {
                c.repeats = v;
            }
            if let Some(v) = noise {
                c.noise_sigma = v;
            }
            if !domains.is_empty() {
                c.filter.domains = domains;
            }
            if !tiers.is_empty() {
                c.filter.tiers = tiers;
            }
            if !settings.is_empty() {
                c.filter.settings = settings;
            }
            if let Some(v) = workers {
                c.workers = v;
            }
            if let Some(v) = seed {
                c.master_seed = v;
            }
            if let Some(listen) = listen {
                c.agent = lawlab::AgentConfig::ExternalEndpoint { listen };
            }
            let outcome = run_suite(&c)?;
            print!("{}", outcome.summary.render_text());
            println!(
                "executed {} runs, skipped {} already recorded, {} errored",
                outcome.executed, outcome.skipped, outcome.errors
            );
            Ok(outcome.errors == 0)
        }
        Command::Eval { dir, config } => {
            let c = match config {
                Some(path) => SuiteConfig::load(&path)?,
                None => SuiteConfig::default(),
            };
            let rescored = rescore_dir(&dir, &c)?;
            let correct = rescored
                .iter()
                .filter(|r| r.evaluation.as_ref().is_some_and(|e| e.symbolic_accuracy))
                .count();
            let mismatched = rescored.iter().filter(|r| !r.replay_matches).count();
            let failed = rescored.iter().filter(|r| r.error.is_some()).count();
            println!(
                "rescored {} runs: {correct} equivalent, {mismatched} replay mismatches, {failed} errors",
                rescored.len()
            );
            Ok(failed == 0 && mismatched == 0)
        }
        Command::Report { dir } => {
            let summary = render_report(&dir)?;
            print!("{}", summary.render_text());
            Ok(true)
        }
        Command::AnalyzeTranscripts { paths, word_sets } => {
            let sets = match word_sets {
                Some(path) => WordSets::load(&path)?,
                None => WordSets::default(),
            };
            let matcher = sets.matcher()?;
            for path in paths {
                let stats = transcript_stats(&path, &matcher)?;
                println!("{}", serde_json::to_string(&stats).expect("stats serialize"));
            }
            Ok(true)
        }
        Command::Serve {
            task,
            noise,
            seed,
            max_rounds,
            max_sets,
            listen,
            sessions,
        } => {
            let spec = shipped_suite()
                .iter()
                .find(|t| t.id == task)
                .ok_or_else(|| HarnessError::Config(format!("unknown task {task:?}")))?;
            let defaults = SessionConfig::default();
            let config = SessionConfig {
                max_rounds: max_rounds.unwrap_or(defaults.max_rounds),
                max_sets_per_round: max_sets.unwrap_or(defaults.max_sets_per_round),
                noise_sigma: noise,
                rng_seed: seed,
                ..defaults
            };
            let listener = TcpListener::bind(&listen).map_err(|e| HarnessError::Endpoint(format!("{listen}: {e}")))?;
            log::info!("serving {task} on {listen}");
            let done = serve_tcp(listener, spec, config, sessions).map_err(|e| HarnessError::Session(e.to_string()))?;
            for s in &done {
                let law = s.submission().map(|l| l.to_string()).unwrap_or_else(|| "-".into());
                println!("{}: rounds {} submission {law}", s.id(), s.rounds_used());
            }
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match execute(Cli::parse().command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
