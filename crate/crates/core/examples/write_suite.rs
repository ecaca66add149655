//! Regenerates data/suite.json from the shipped catalog and systems.

use lawlab_core::forge::shipped_catalog;
use lawlab_core::system::{build_suite, shipped_systems};

fn main() {
    let suite = build_suite(shipped_catalog(), shipped_systems());
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/data/suite.json");
    let mut text = serde_json::to_string_pretty(&suite).unwrap();
    text.push('\n');
    std::fs::write(path, text).unwrap();
    println!("{} tasks", suite.tasks.len());
}
