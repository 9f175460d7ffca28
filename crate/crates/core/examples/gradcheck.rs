//! Compare every analytic gradient against central differences.

use cegan::gradcheck::{run_gradcheck, GradcheckConfig};

fn main() -> cegan::Result<()> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    let report = run_gradcheck(&GradcheckConfig { seed, ..Default::default() })?;
    println!("{report}");
    if !report.passed() {
        std::process::exit(2);
    }
    Ok(())
}
