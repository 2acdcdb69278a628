//! Writes the degradation dataset for the first two synthetic mixes: one
//! reference plus 7 pink-noise, 7 reverb and 7 clipping files each.
//!
//!     cargo run --release --example build_dataset -- /tmp/dataset

use std::collections::BTreeMap;

use mixclarity::fixtures::synthetic_bank;
use mixclarity::{build_dataset, measure_loudness, load_wav, DatasetInput, ReverbConfig};

fn main() -> mixclarity::Result<()> {
    let out = std::env::args()
        .nth(1)
        .map(Into::into)
        .unwrap_or_else(|| std::env::temp_dir().join("mixclarity-dataset"));
    let inputs: Vec<DatasetInput> = synthetic_bank()?
        .into_iter()
        .take(2)
        .map(|(stem, clip)| DatasetInput { stem, clip })
        .collect();
    let manifest = build_dataset(&inputs, &out, 7, &ReverbConfig::default())?;
    println!("{} files in {}", manifest.rows.len(), out.display());

    let mut per_set = BTreeMap::new();
    for row in &manifest.rows {
        *per_set.entry(row.set.to_string()).or_insert(0) += 1;
    }
    println!("{per_set:?}");

    for row in manifest.rows.iter().take(8) {
        let clip = load_wav(out.join(&row.file))?;
        println!("  {:<32} {:7.2} LUFS", row.file, measure_loudness(&clip)?.integrated_lufs);
    }
    Ok(())
}
