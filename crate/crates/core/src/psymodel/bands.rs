//! Scale-factor band layouts and the partition → band threshold mapping.

use std::sync::Arc;

use serde::Serialize;

use super::partition::PartitionTable;
use crate::error::{Error, Result};

/// Bins 0..512 are grouped into bands; the Nyquist bin is left out.
pub const BAND_BINS: usize = 512;

/// Layer III long-block scale-factor band edges at 44.1 kHz, in MDCT lines
/// (576 lines span 0..fs/2). The last entry closes the top band.
pub const L3_SFB_LINES: [usize; 23] = [
    0, 4, 8, 12, 16, 20, 24, 30, 36, 44, 52, 62, 74, 90, 110, 134, 162, 196, 238, 288, 342, 418,
    576,
];

/// Contiguous half-open bin ranges.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BandLayout {
    edges: Arc<[usize]>,
}

impl BandLayout {
    pub fn from_edges(edges: Vec<usize>) -> Result<Self> {
        if edges.len() < 2
            || edges[0] != 0
            || *edges.last().unwrap() != BAND_BINS
            || edges.windows(2).any(|w| w[0] >= w[1])
        {
            return Err(Error::InvalidParameter(format!(
                "band edges must rise strictly from 0 to {BAND_BINS}"
            )));
        }
        Ok(Self { edges: edges.into() })
    }

    /// 32 equal bands of 16 bins (Layer II subbands).
    pub fn linear32() -> Self {
        Self::from_edges((0..=32).map(|i| i * 16).collect()).unwrap()
    }

    /// Layer III long-block scale-factor bands mapped from MDCT lines onto
    /// FFT bins.
    pub fn layer3() -> Self {
        let edges = L3_SFB_LINES
            .iter()
            .map(|&line| ((line * BAND_BINS) as f64 / 576.0).round() as usize)
            .collect();
        Self::from_edges(edges).unwrap()
    }

    /// One band spanning every bin.
    pub fn single() -> Self {
        Self::from_edges(vec![0, BAND_BINS]).unwrap()
    }

    pub fn len(&self) -> usize {
        self.edges.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self, band: usize) -> std::ops::Range<usize> {
        self.edges[band]..self.edges[band + 1]
    }

    pub fn edges(&self) -> &[usize] {
        &self.edges
    }
}

/// Energy and masking threshold per scale-factor band for one analysis frame.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BandFrame {
    pub frame_index: usize,
    pub energy: Vec<f64>,
    pub threshold: Vec<f64>,
    /// Threshold in quiet summed over each band's bins.
    pub quiet: Vec<f64>,
    #[serde(skip)]
    pub layout: BandLayout,
}

impl BandFrame {
    pub fn n_bands(&self) -> usize {
        self.energy.len()
    }

    /// Signal-to-mask ratio of every band.
    pub fn smr(&self) -> Result<Vec<f64>> {
        self.energy
            .iter()
            .zip(&self.threshold)
            .map(|(&e, &mt)| crate::metric::smr(e, mt))
            .collect()
    }

    /// Checks `threshold >= quiet` in every band.
    pub fn respects_quiet_floor(&self) -> bool {
        self.threshold
            .iter()
            .zip(&self.quiet)
            .all(|(mt, q)| mt >= q && *mt > 0.0)
    }
}

/// Spreads each partition threshold uniformly over its bins and returns the
/// per-bin threshold density (all [`super::partition::N_BINS`] bins).
pub fn threshold_density(partition_threshold: &[f64], table: &PartitionTable) -> Result<Vec<f64>> {
    if partition_threshold.len() != table.len() {
        return Err(Error::BandMismatch {
            expected: table.len(),
            found: partition_threshold.len(),
        });
    }
    let mut density = Vec::with_capacity(super::partition::N_BINS);
    for (p, &mt) in table.partitions().iter().zip(partition_threshold) {
        let d = mt / p.width() as f64;
        density.extend(std::iter::repeat_n(d, p.width()));
    }
    Ok(density)
}

/// Groups bin energies and spread-back partition thresholds into bands.
pub fn map_to_bands(
    frame_index: usize,
    partition_threshold: &[f64],
    bin_energy: &[f64],
    table: &PartitionTable,
    layout: &BandLayout,
) -> Result<BandFrame> {
    if bin_energy.len() < BAND_BINS {
        return Err(Error::BandMismatch {
            expected: BAND_BINS,
            found: bin_energy.len(),
        });
    }
    let quiet_density: Vec<f64> = (0..BAND_BINS)
        .map(|w| table.partitions()[table.partition_of(w)].quiet_density)
        .collect();
    // A floored partition threshold divided back by its width can land one
    // ulp under the quiet density.
    let density: Vec<f64> = threshold_density(partition_threshold, table)?
        .into_iter()
        .zip(quiet_density.iter().chain(std::iter::repeat(&0.0)))
        .map(|(d, &q)| if d < q && d >= q * (1.0 - 1e-12) { q } else { d })
        .collect();

    let sum = |v: &[f64], band: usize| -> f64 { v[layout.range(band)].iter().sum() };
    let bands = 0..layout.len();
    Ok(BandFrame {
        frame_index,
        energy: bands.clone().map(|b| sum(bin_energy, b)).collect(),
        threshold: bands.clone().map(|b| sum(&density, b)).collect(),
        quiet: bands.map(|b| sum(&quiet_density, b)).collect(),
        layout: layout.clone(),
    })
}
