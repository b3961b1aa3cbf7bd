//! Parses a scenario file, runs it and prints the verdicts.
//!
//! ```text
//! cargo run --release --example scenario_run -- docs/scenarios/canonical.toml
//! ```

use jflow::scenario::{parse_scenario, run_scenario, ParseOptions};

fn main() -> jflow::Result<()> {
    let path = std::env::args().nth(1).unwrap_or_else(|| "docs/scenarios/stationary.toml".into());
    let parsed = parse_scenario(&path, &ParseOptions::default())?;
    println!("{} ({})", parsed.config.name, &parsed.hash[..12]);
    let outcome = run_scenario(&parsed, None)?;
    for (name, v) in &outcome.summary.verdicts {
        println!("  {name:<28} {:<5} {:.3e} (tol {:.1e})", if v.passed { "ok" } else { "FAIL" }, v.value, v.tolerance);
    }
    println!("status {}", outcome.summary.status);
    Ok(())
}
