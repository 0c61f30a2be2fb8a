//! One PASS/FAIL line per acceptance criterion. Exits nonzero if any fails.
//!
//! `NAVIER_CRITERIA=1,2,8a` limits the run to the listed ids.

use std::io::Write;
use std::process::ExitCode;
use std::time::Instant;

use navier_harness::checks::{self, Check, StandardRun};
use navier_harness::config::ExperimentConfig;
use navier_harness::error::HarnessError;

fn main() -> ExitCode {
    let only: Option<Vec<String>> = std::env::var("NAVIER_CRITERIA")
        .ok()
        .map(|s| s.split(',').map(|t| t.trim().to_string()).collect());
    let want = |id: &str| only.as_ref().is_none_or(|v| v.iter().any(|t| t == id));
    let cfg = ExperimentConfig::standard();
    let mut failed = 0;
    let mut emit = |id: &str, r: Result<Check, HarnessError>, t: Instant| {
        let line = match r {
            Ok(c) => {
                failed += usize::from(!c.passed);
                c.line()
            }
            Err(e) => {
                failed += 1;
                format!("FAIL [{id}] {e}")
            }
        };
        println!("{line} ({:.1} s)", t.elapsed().as_secs_f64());
        let _ = std::io::stdout().flush();
    };

    type Free = fn() -> Result<Check, HarnessError>;
    type Single = fn(&ExperimentConfig) -> Result<Check, HarnessError>;
    let free: [(&str, Free); 5] = [
        ("1", checks::specfun_remainder_slopes),
        ("2", checks::green_residual_and_symbol),
        ("3", checks::covariance_exponents),
        ("4", checks::solver_consistency),
        ("5", checks::leading_order_truncation),
    ];
    for (id, f) in free {
        if want(id) {
            let t = Instant::now();
            emit(id, f(), t);
        }
    }
    if want("6") || want("7") {
        let t = Instant::now();
        let run: Result<StandardRun, HarnessError> = checks::standard_run(&cfg);
        match run {
            Ok(run) => {
                if want("6") {
                    emit("6", Ok(checks::theorem1_standard(&run)), t);
                }
                if want("7") {
                    emit("7", Ok(checks::u1_ratio_standard(&run)), t);
                }
            }
            Err(e) => emit("6", Err(e), t),
        }
    }
    let with_cfg: [(&str, Single); 3] = [
        ("8a", checks::inverse_crime),
        ("8b", checks::end_to_end_recovery),
        ("inv", checks::exact_moment_trend),
    ];
    for (id, f) in with_cfg {
        if want(id) {
            let t = Instant::now();
            emit(id, f(&cfg), t);
        }
    }
    if failed > 0 {
        println!("{failed} criterion line(s) failed");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
