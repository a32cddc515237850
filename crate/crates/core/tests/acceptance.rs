//! Acceptance suite: one line per criterion, non-zero exit on any failure.

use liouville::verification::{run_criterion, CRITERIA};
use liouville::SeedStream;
use std::process::ExitCode;
use std::time::Instant;

fn main() -> ExitCode {
    let seeds = SeedStream::default();
    let mut failed = 0;
    println!("\nrunning {} acceptance criteria (seed {})", CRITERIA.len(), seeds.seed());
    for id in 1..=CRITERIA.len() {
        let start = Instant::now();
        let result = run_criterion(id, &seeds);
        println!("{result}  ({:.2}s)", start.elapsed().as_secs_f64());
        if !result.passed {
            failed += 1;
        }
    }
    println!(
        "acceptance result: {} passed, {} failed\n",
        CRITERIA.len() - failed,
        failed
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
