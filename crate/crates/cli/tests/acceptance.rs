//! Full acceptance suite, one line per criterion, followed by a harness
//! self-check that a corrupted tolerance is reported as a failure.

use std::process::ExitCode;

use scatter_cli::verify::{run, run_with, Status, VerifyOptions};

const SELF_CHECK_CRITERION: u32 = 6;

fn main() -> ExitCode {
    let report = run_with(&VerifyOptions::default(), |r| println!("{r}"));

    let corrupted = run(&VerifyOptions {
        corrupt: Some(SELF_CHECK_CRITERION),
        only: Some(vec![SELF_CHECK_CRITERION]),
        ..VerifyOptions::default()
    });
    let self_check = corrupted.criteria.len() == 1 && corrupted.criteria[0].status == Status::Failed;
    println!(
        "{} [self-check] corrupted tolerance on criterion {SELF_CHECK_CRITERION} reported as failure",
        if self_check { "PASS" } else { "FAIL" }
    );

    if report.passed() && self_check {
        println!("acceptance: all criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failed criteria {:?}", report.failures());
        ExitCode::FAILURE
    }
}
