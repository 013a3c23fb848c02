//! Prints one PASS/FAIL line per criterion; exits non-zero if any fails.

use std::process::ExitCode;

fn main() -> ExitCode {
    let checks = cachesage_eval::run_all();
    let mut failed = 0;
    for (i, (name, v)) in checks.iter().enumerate() {
        println!("criterion {:>2} {}: {name}: {}", i + 1, if v.ok { "PASS" } else { "FAIL" }, v.detail);
        failed += usize::from(!v.ok);
    }
    println!("{} of {} criteria pass", checks.len() - failed, checks.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
