//! Acceptance suite: one line per criterion, non-zero exit if any fails.

use std::process::ExitCode;

use triboson::validation::{run_all, ValidationOptions};

fn main() -> ExitCode {
    let quick = std::env::args().any(|a| a == "--quick");
    let outcomes = run_all(&ValidationOptions {
        quick,
        ..Default::default()
    });
    for o in &outcomes {
        println!("{o}");
    }
    let failed = outcomes.iter().filter(|o| !o.passed).count();
    println!(
        "acceptance: {} passed, {failed} failed",
        outcomes.len() - failed
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
