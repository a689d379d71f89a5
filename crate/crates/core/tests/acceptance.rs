//! Acceptance suite: one summary line per criterion, run through the
//! library's driver so the CLI `acceptance` subcommand and this target stay
//! in lockstep.

use laxcorr::acceptance::{run_all, Tolerances};

#[test]
fn acceptance_suite() {
    let reports = run_all(&Tolerances::default());
    let mut all_pass = true;
    for rep in &reports {
        println!("{}", rep.summary_line());
        if !rep.pass {
            println!("{}", rep.to_json().to_string_pretty());
            all_pass = false;
        }
    }
    assert!(all_pass, "at least one acceptance criterion failed");
}
