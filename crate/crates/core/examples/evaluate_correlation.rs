//! Correlates model scores with listening-test scores from two CSV tables
//! joined on stimulus id.
//!
//!     cargo run --example evaluate_correlation

use mixclarity::eval::{evaluate_correlation, median_ci, permutation_p_value, Coefficient};
use mixclarity::ScoreTable;

const MODEL: &str = "stimulus_id,value
a,-4.1
b,-2.0
c,-6.3
d,-1.2
e,-3.3
f,-5.0
g,-0.7
h,-2.9
";

const LISTENERS: &str = "stimulus_id,value
a.wav,55
b.wav,71
c.wav,40
d.wav,69
e.wav,52
f.wav,45
g.wav,88
h.wav,60
x.wav,12
";

fn main() -> mixclarity::Result<()> {
    let model = ScoreTable::from_reader(MODEL.as_bytes(), None)?;
    let listeners = ScoreTable::from_reader(LISTENERS.as_bytes(), None)?;
    let (report, joined) = evaluate_correlation(&model, &listeners)?;
    println!("matched {} stimuli, unmatched {:?}", report.n, joined.unmatched);
    println!("pearson  r   = {:.4}  p = {:.2e}", report.pearson_r, report.p_value_pearson);
    println!("spearman rho = {:.4}  p = {:.2e}", report.spearman_rho, report.p_value_spearman);

    let p = permutation_p_value(&joined.left, &joined.right, Coefficient::Spearman, 9_999, 1)?;
    println!("spearman permutation p = {p:.4}");

    let (median, lo, hi) = median_ci(&joined.right)?;
    println!("listener median {median} (95% {lo}..{hi})");
    Ok(())
}
