//! Runs every acceptance criterion in sequence and prints one PASS/FAIL line
//! each. Exits non-zero if any criterion fails.
//!
//! `cargo test -p revkit --test acceptance -- 6 8` runs a subset.

use std::process::ExitCode;

use revkit::selftest;

fn main() -> ExitCode {
    let ids: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    let mut ran = 0;
    for &(id, ..) in selftest::CRITERIA.iter() {
        if !ids.is_empty() && !ids.contains(&id) {
            continue;
        }
        let outcome = selftest::run(id).expect("known criterion");
        println!("{}", outcome.line());
        ran += 1;
        if !outcome.passed {
            failed += 1;
        }
    }
    println!("acceptance: {} of {ran} criteria passed", ran - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
