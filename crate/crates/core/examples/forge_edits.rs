//! Maintenance tool for the catalog file: rewrites every expression in
//! canonical form and fills empty edit lists with a searched edit sequence.
//!
//! Usage: cargo run --release -p lawlab-core --example forge_edits -- data/catalog.json

use lawlab_core::expr::parse;
use lawlab_core::forge::search::{find_edits, find_edits_with};
use lawlab_core::forge::{validate_mutation_chain, CatalogFile, Tier};

fn main() {
    let path = std::env::args().nth(1).expect("catalog path");
    let text = std::fs::read_to_string(&path).expect("readable catalog");
    let mut file: CatalogFile = serde_json::from_str(&text).expect("catalog schema");
    let mut missing = 0;
    for law in &mut file.laws {
        let symbols = law.symbols();
        let canon = |t: &str| parse(t, &symbols).expect(t).canonicalize();
        let base = canon(&law.canonical);
        law.canonical = base.to_string();
        for (ci, chain) in law.chains.iter_mut().enumerate() {
            let mut prev = base.clone();
            let mut history = Vec::new();
            for tier in Tier::ALL {
                let rec = chain.tier_mut(tier);
                let target = canon(&rec.expr);
                rec.expr = target.to_string();
                if rec.edits.is_empty() {
                    let clean = |tail: &[_]| {
                        let all: Vec<_> = history.iter().chain(tail).cloned().collect();
                        let verdict = validate_mutation_chain(&base, &all);
                        verdict.failed_edit.is_none() && verdict.violations.iter().all(|v| v.edit < history.len())
                    };
                    let found = find_edits_with(&prev, &target, 2, &clean).or_else(|| find_edits(&prev, &target, 2));
                    match found {
                        Some(edits) => rec.edits = edits,
                        None => {
                            missing += 1;
                            println!(
                                "{} chain {} {tier}: no path from {prev} to {target}",
                                law.domain,
                                ci + 1
                            );
                        }
                    }
                }
                history.extend(rec.edits.iter().cloned());
                prev = target;
            }
            let verdict = validate_mutation_chain(&base, &history);
            if !verdict.passed() {
                println!("{} chain {}: {:?}", law.domain, ci + 1, verdict);
            }
        }
    }
    let out = serde_json::to_string_pretty(&file).unwrap() + "\n";
    std::fs::write(&path, out).expect("writable catalog");
    println!("{missing} tier(s) still need hand-written edits");
}
