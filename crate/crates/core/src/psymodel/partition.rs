//! Threshold-calculation partitions, spreading functions and the threshold
//! in quiet for the 1024-point analysis at 44.1 kHz.

use crate::error::{Error, Result};

/// FFT length of the psychoacoustic analysis.
pub const FFT_LEN: usize = 1024;
/// Bins 0..=512 of the one-sided spectrum.
pub const N_BINS: usize = FFT_LEN / 2 + 1;
pub const SAMPLE_RATE: f64 = 44_100.0;

/// Partition width on the Bark scale (a third of a critical band).
pub const PARTITION_WIDTH_BARK: f64 = 1.0 / 3.0;

pub fn bin_frequency(bin: usize) -> f64 {
    bin as f64 * SAMPLE_RATE / FFT_LEN as f64
}

/// Zwicker's critical-band rate in Bark.
pub fn bark(freq_hz: f64) -> f64 {
    13.0 * (0.00076 * freq_hz).atan() + 3.5 * (freq_hz / 7500.0).powi(2).atan()
}

/// Terhardt's threshold in quiet, dB SPL. Frequencies below 20 Hz are
/// evaluated at 20 Hz.
pub fn threshold_in_quiet_db(freq_hz: f64) -> f64 {
    let f = freq_hz.max(20.0) / 1000.0;
    3.64 * f.powf(-0.8) - 6.5 * (-0.6 * (f - 3.3).powi(2)).exp() + 1e-3 * f.powi(4)
}

/// How masking energy spreads between partitions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpreadingShape {
    /// Layer II: one scale factor (1.05) on both sides of the masker.
    Layer2,
    /// Layer III: steeper below the masker (x3) than above it (x1.5).
    Layer3,
}

/// Spreading weight from a masker at `masker_bark` into `maskee_bark`.
pub fn spreading(shape: SpreadingShape, maskee_bark: f64, masker_bark: f64) -> f64 {
    let delta = maskee_bark - masker_bark;
    let tmpx = match shape {
        SpreadingShape::Layer2 => 1.05 * delta,
        SpreadingShape::Layer3 if delta >= 0.0 => 1.5 * delta,
        SpreadingShape::Layer3 => 3.0 * delta,
    };
    let x = if (0.5..=2.5).contains(&tmpx) {
        let t = tmpx - 0.5;
        8.0 * (t * t - 2.0 * t)
    } else {
        0.0
    };
    let t = tmpx + 0.474;
    let tmpy = 15.811_389 + 7.5 * t - 17.5 * (1.0 + t * t).sqrt();
    if tmpy <= -60.0 {
        0.0
    } else {
        10f64.powf((x + tmpy) / 10.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    /// First bin (inclusive).
    pub low_bin: usize,
    /// Last bin (inclusive).
    pub high_bin: usize,
    pub bark_center: f64,
    /// Per-bin threshold in quiet: the minimum over the partition's bins, so
    /// any band summing these densities stays at or below the partition floor.
    pub quiet_density: f64,
}

impl Partition {
    pub fn width(&self) -> usize {
        self.high_bin - self.low_bin + 1
    }

    /// Threshold in quiet for the whole partition.
    pub fn quiet_threshold(&self) -> f64 {
        self.quiet_density * self.width() as f64
    }
}

/// Contiguous partitions covering every analysis bin, plus the spreading
/// matrix between them.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionTable {
    partitions: Vec<Partition>,
    /// `spread[b][k]`: weight of masker partition `k` in maskee partition `b`.
    spread: Vec<Vec<f64>>,
    /// `1 / sum_k spread[b][k]`.
    spread_norm: Vec<f64>,
    bin_to_partition: Vec<usize>,
    shape: SpreadingShape,
}

impl PartitionTable {
    /// Partitions for 1024-point / 44.1 kHz analysis: bins are grouped while
    /// their centres stay within a third of a Bark of the partition's first
    /// bin.
    pub fn standard(shape: SpreadingShape) -> Self {
        let mut starts = vec![0];
        let mut start_bark = bark(bin_frequency(0));
        for w in 1..N_BINS {
            let z = bark(bin_frequency(w));
            if z - start_bark >= PARTITION_WIDTH_BARK {
                starts.push(w);
                start_bark = z;
            }
        }
        let mut edges = starts;
        edges.push(N_BINS);
        Self::from_edges(&edges, shape).expect("generated edges are valid")
    }

    /// Builds a table from partition boundaries: partition `i` spans bins
    /// `edges[i]..edges[i + 1]`. Edges must start at 0 and end at
    /// [`N_BINS`].
    pub fn from_edges(edges: &[usize], shape: SpreadingShape) -> Result<Self> {
        if edges.len() < 2
            || edges[0] != 0
            || *edges.last().unwrap() != N_BINS
            || edges.windows(2).any(|w| w[0] >= w[1])
        {
            return Err(Error::InvalidParameter(format!(
                "partition edges must rise strictly from 0 to {N_BINS}"
            )));
        }
        let partitions: Vec<Partition> = edges
            .windows(2)
            .map(|w| {
                let (lo, hi) = (w[0], w[1] - 1);
                let centre = (bin_frequency(lo) + bin_frequency(hi)) / 2.0;
                let quiet_db = (lo..=hi)
                    .map(|b| threshold_in_quiet_db(bin_frequency(b)))
                    .fold(f64::INFINITY, f64::min);
                Partition {
                    low_bin: lo,
                    high_bin: hi,
                    bark_center: bark(centre),
                    quiet_density: 10f64.powf(quiet_db / 10.0),
                }
            })
            .collect();
        Ok(Self::with_partitions(partitions, shape))
    }

    /// Builds a table from explicit partitions (quiet densities included).
    pub fn with_partitions(partitions: Vec<Partition>, shape: SpreadingShape) -> Self {
        let spread: Vec<Vec<f64>> = partitions
            .iter()
            .map(|maskee| {
                partitions
                    .iter()
                    .map(|masker| spreading(shape, maskee.bark_center, masker.bark_center))
                    .collect()
            })
            .collect();
        let spread_norm = spread.iter().map(|row| 1.0 / row.iter().sum::<f64>()).collect();
        let mut bin_to_partition = vec![0; N_BINS];
        for (i, p) in partitions.iter().enumerate() {
            for slot in &mut bin_to_partition[p.low_bin..=p.high_bin] {
                *slot = i;
            }
        }
        Self {
            partitions,
            spread,
            spread_norm,
            bin_to_partition,
            shape,
        }
    }

    pub fn partitions(&self) -> &[Partition] {
        &self.partitions
    }

    pub fn len(&self) -> usize {
        self.partitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.partitions.is_empty()
    }

    pub fn spread(&self) -> &[Vec<f64>] {
        &self.spread
    }

    pub fn spread_norm(&self) -> &[f64] {
        &self.spread_norm
    }

    pub fn partition_of(&self, bin: usize) -> usize {
        self.bin_to_partition[bin]
    }

    pub fn shape(&self) -> SpreadingShape {
        self.shape
    }

    /// Quiet threshold of every partition.
    pub fn quiet_thresholds(&self) -> Vec<f64> {
        self.partitions.iter().map(Partition::quiet_threshold).collect()
    }
}
