//! Occupancy-balance filter and dataset statistics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Both volumes below this occupancy count as empty.
pub const EMPTY_OCCUPANCY: f64 = 0.001;
/// Smallest accepted ratio between the lighter and the heavier volume.
pub const MIN_BALANCE_RATIO: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterReason {
    Balanced,
    BothEmpty,
    UnbalancedRatio,
}

/// Keep/discard decision on the occupancy ratios of the two volumes.
///
/// An object is discarded when both ratios are below 0.001, or when
/// `min / max < 0.1` (with `max = 0` counting as ratio 0).
pub fn filter_object(o1: f64, o2: f64) -> Result<(bool, FilterReason)> {
    for o in [o1, o2] {
        if !(0.0..=1.0).contains(&o) {
            return Err(Error::Validation(format!("occupancy ratio {o} outside [0, 1]")));
        }
    }
    if o1 < EMPTY_OCCUPANCY && o2 < EMPTY_OCCUPANCY {
        return Ok((false, FilterReason::BothEmpty));
    }
    let (lo, hi) = (o1.min(o2), o1.max(o2));
    let ratio = if hi == 0.0 { 0.0 } else { lo / hi };
    if ratio < MIN_BALANCE_RATIO {
        Ok((false, FilterReason::UnbalancedRatio))
    } else {
        Ok((true, FilterReason::Balanced))
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimings {
    pub load_ms: f64,
    pub parts_ms: f64,
    pub graph_ms: f64,
    pub packing_ms: f64,
    pub volumes_ms: f64,
    pub total_ms: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurationReport {
    pub object: String,
    pub o1: f64,
    pub o2: f64,
    pub kept: bool,
    pub reason: FilterReason,
    pub part_count: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timing: Option<StageTimings>,
}

impl CurationReport {
    pub fn new(object: impl Into<String>, o1: f64, o2: f64, part_count: usize) -> Result<Self> {
        let (kept, reason) = filter_object(o1, o2)?;
        Ok(CurationReport {
            object: object.into(),
            o1,
            o2,
            kept,
            reason,
            part_count,
            timing: None,
        })
    }
}

/// Part-count bins: 1, 2-9, 10-49, 50-199, 200 and more.
pub const BIN_LABELS: [&str; 5] = ["1", "2-9", "10-49", "50-199", ">=200"];

pub fn part_count_bin(count: usize) -> usize {
    match count {
        0..=1 => 0,
        2..=9 => 1,
        10..=49 => 2,
        50..=199 => 3,
        _ => 4,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub label: String,
    pub count: usize,
    pub fraction: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReasonCounts {
    pub balanced: usize,
    pub both_empty: usize,
    pub unbalanced_ratio: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub objects: usize,
    pub kept: usize,
    pub keep_rate: f64,
    pub reasons: ReasonCounts,
    pub part_histogram: Vec<HistogramBin>,
    pub mean_part_count: f64,
}

impl DatasetStats {
    pub fn histogram_csv(&self) -> String {
        let mut s = String::from("bin,count,fraction\n");
        for b in &self.part_histogram {
            s.push_str(&format!("{},{},{}\n", b.label, b.count, b.fraction));
        }
        s
    }
}

pub fn dataset_stats(reports: &[CurationReport]) -> Result<DatasetStats> {
    if reports.is_empty() {
        return Err(Error::Validation("no reports to summarize".into()));
    }
    let n = reports.len();
    let mut counts = [0usize; 5];
    let mut reasons = ReasonCounts {
        balanced: 0,
        both_empty: 0,
        unbalanced_ratio: 0,
    };
    for r in reports {
        counts[part_count_bin(r.part_count)] += 1;
        match r.reason {
            FilterReason::Balanced => reasons.balanced += 1,
            FilterReason::BothEmpty => reasons.both_empty += 1,
            FilterReason::UnbalancedRatio => reasons.unbalanced_ratio += 1,
        }
    }
    let kept = reports.iter().filter(|r| r.kept).count();
    Ok(DatasetStats {
        objects: n,
        kept,
        keep_rate: kept as f64 / n as f64,
        reasons,
        part_histogram: BIN_LABELS
            .iter()
            .zip(counts)
            .map(|(label, count)| HistogramBin {
                label: label.to_string(),
                count,
                fraction: count as f64 / n as f64,
            })
            .collect(),
        mean_part_count: reports.iter().map(|r| r.part_count as f64).sum::<f64>() / n as f64,
    })
}
