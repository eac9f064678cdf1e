use serde::{Deserialize, Serialize};

use super::{ExperimentReport, HarnessError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub series: String,
    pub bin_left: f64,
    pub bin_right: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub bins: Vec<HistogramBin>,
}

impl Histogram {
    fn build(series: &[(&str, Vec<f64>)], lo: f64, hi: f64, bins: usize) -> Self {
        let width = (hi - lo) / bins as f64;
        let mut out = Vec::with_capacity(series.len() * bins);
        for (name, values) in series {
            let mut counts = vec![0usize; bins];
            for v in values {
                // Out-of-range values are clamped into the edge bins; the
                // right edge belongs to the last bin.
                let idx = if width > 0.0 { ((v - lo) / width).floor() } else { 0.0 };
                let idx = if idx.is_nan() { 0 } else { (idx.max(0.0) as usize).min(bins - 1) };
                counts[idx] += 1;
            }
            out.extend(counts.into_iter().enumerate().map(|(i, count)| HistogramBin {
                series: name.to_string(),
                bin_left: lo + width * i as f64,
                bin_right: if i + 1 == bins { hi } else { lo + width * (i + 1) as f64 },
                count,
            }));
        }
        Self { bins: out }
    }

    pub fn total(&self, series: &str) -> usize {
        self.bins.iter().filter(|b| b.series == series).map(|b| b.count).sum()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("series,bin_left,bin_right,count\n");
        for b in &self.bins {
            out.push_str(&format!("{},{},{},{}\n", b.series, b.bin_left, b.bin_right, b.count));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histograms {
    /// Over `[0, 1]`.
    pub stress: Histogram,
    /// Over `[0, ln K]` for `K` context labels.
    pub entropy: Histogram,
}

/// Stress and entropy histograms for the original, dependent and independent series.
pub fn emit_histograms(report: &ExperimentReport, bins: usize) -> Result<Histograms, HarnessError> {
    if bins == 0 {
        return Err(HarnessError::BadBins);
    }
    let rs = &report.records;
    let stress = [
        ("original", rs.iter().map(|r| r.original.stress).collect()),
        ("dependent", rs.iter().map(|r| r.dependent.stress).collect()),
        ("independent", rs.iter().map(|r| r.independent.stress).collect()),
    ];
    let entropy = [
        ("original", rs.iter().map(|r| r.original.entropy).collect()),
        ("dependent", rs.iter().map(|r| r.dependent.entropy).collect()),
        ("independent", rs.iter().map(|r| r.independent.entropy).collect()),
    ];
    let k = report.config.context_labels.len().max(2) as f64;
    Ok(Histograms {
        stress: Histogram::build(&stress, 0.0, 1.0, bins),
        entropy: Histogram::build(&entropy, 0.0, k.ln(), bins),
    })
}
