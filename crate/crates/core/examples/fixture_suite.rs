//! Runs the regression fixture suite and prints its report as CSV.
//! Exits nonzero when a fixture fails.
//!
//!     cargo run --example fixture_suite
//!     cargo run --example fixture_suite -- --tmax 10   # expected to fail

use mixclarity::fixtures::{run_fixture_suite_with, write_report_csv};
use mixclarity::MetricConfig;

fn main() -> mixclarity::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let mut metric = MetricConfig::default();
    if let Some(i) = args.iter().position(|a| a == "--tmax") {
        metric.tmax_db = args
            .get(i + 1)
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| mixclarity::Error::InvalidParameter("--tmax needs a number".into()))?;
    }
    let report = run_fixture_suite_with(&metric)?;
    write_report_csv(&report, std::io::stdout().lock())?;
    for f in report.failures() {
        eprintln!("FAILED {}: expected {} got {}", f.name, f.expected, f.actual);
    }
    if !report.all_passed() {
        std::process::exit(1);
    }
    Ok(())
}
