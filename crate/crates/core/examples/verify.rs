//! The built-in self-checks: operator identities, the error decomposition,
//! the bound on a real trace, network gradients and the gates.

use tabql::verify::{format_table, run_all};

fn main() {
    let results = run_all(0);
    print!("{}", format_table(&results));
    if results.iter().any(|r| !r.passed) {
        std::process::exit(2);
    }
}
