//! Acceptance criteria at full scale, one line per criterion.

use std::process::ExitCode;

use oppenheim_cli::suite::{run_check, Scale, CHECKS};

fn main() -> ExitCode {
    let mut blocking = Vec::new();
    for (id, check) in CHECKS {
        match run_check(check, Scale::Full) {
            Ok(outcomes) => {
                for o in outcomes {
                    println!("{o}");
                    if o.is_blocking() {
                        blocking.push(o.id);
                    }
                }
            }
            Err(e) => {
                println!("FAIL         {id:<4} error: {e}");
                blocking.push(id);
            }
        }
    }
    if blocking.is_empty() {
        println!("acceptance: all criteria pass apart from recorded deviations");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failing criteria {blocking:?}");
        ExitCode::FAILURE
    }
}
