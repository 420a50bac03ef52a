//! Efficiency, effectiveness and predictive-power measures.

use serde::{Deserialize, Serialize};

use crate::testing::{Provenance, VerdictTable};

/// `(vanilla - accelerated) / vanilla`.
pub fn speed_up(vanilla_seconds: f64, accelerated_seconds: f64) -> Option<f64> {
    (vanilla_seconds > 0.0).then(|| (vanilla_seconds - accelerated_seconds) / vanilla_seconds)
}

/// `(|M| - tested) / |M|`.
pub fn reduction(mutant_count: usize, tested: usize) -> f64 {
    if mutant_count == 0 {
        return 0.0;
    }
    (mutant_count as f64 - tested as f64) / mutant_count as f64
}

/// `|MS_V - MS_0| / MS_V`; undefined when `MS_V = 0`.
pub fn ms_error(vanilla_ms: f64, accelerated_ms: f64) -> Option<f64> {
    (vanilla_ms != 0.0).then(|| (vanilla_ms - accelerated_ms).abs() / vanilla_ms)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Measures {
    pub speed_up: Option<f64>,
    pub reduction: f64,
    pub ms_error: Option<f64>,
    pub vanilla_ms: f64,
    pub accelerated_ms: f64,
}

pub fn measures(vanilla: &VerdictTable, other: &VerdictTable) -> Measures {
    let vanilla_ms = vanilla.mutation_score().unwrap_or(0.0);
    let accelerated_ms = other.mutation_score().unwrap_or(0.0);
    Measures {
        speed_up: speed_up(vanilla.timing.total(), other.timing.total()),
        reduction: reduction(other.verdicts.len(), other.timing.tested_mutants),
        ms_error: ms_error(vanilla_ms, accelerated_ms),
        vanilla_ms,
        accelerated_ms,
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    pub fn_: u64,
}

impl Confusion {
    /// Positive = killed. `actual` and `predicted` are aligned per mutant.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (bool, bool)>) -> Self {
        let mut c = Confusion::default();
        for (actual, predicted) in pairs {
            match (actual, predicted) {
                (true, true) => c.tp += 1,
                (false, true) => c.fp += 1,
                (false, false) => c.tn += 1,
                (true, false) => c.fn_ += 1,
            }
        }
        c
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn precision(&self) -> Option<f64> {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> Option<f64> {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn f1(&self) -> Option<f64> {
        ratio(2 * self.tp, 2 * self.tp + self.fp + self.fn_)
    }

    /// `None` when any marginal is zero.
    pub fn mcc(&self) -> Option<f64> {
        let (tp, fp, tn, fn_) = (self.tp as f64, self.fp as f64, self.tn as f64, self.fn_ as f64);
        let denom = ((tp + fp) * (tp + fn_) * (tn + fp) * (tn + fn_)).sqrt();
        (denom > 0.0).then(|| (tp * tn - fp * fn_) / denom)
    }
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictiveMetrics {
    pub mae: f64,
    /// MAE divided by the mean actual killing-label count.
    pub rmae: Option<f64>,
    pub confusion: Confusion,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
    pub mcc: Option<f64>,
    pub compared: usize,
}

/// Compare predicted against actual verdicts for every mutant the
/// prediction did not leave untested.
///
/// Killed/survived uses the classical reading: a mutant is killed when its
/// prediction differs from the original's on some point.
pub fn predictive_metrics(actual: &VerdictTable, predicted: &VerdictTable) -> PredictiveMetrics {
    let mut abs_err = 0.0;
    let mut actual_sum = 0.0;
    let mut pairs = Vec::new();
    for p in predicted.verdicts.iter().filter(|v| v.provenance != Provenance::Untested) {
        let Some(a) = actual.get(p.id) else { continue };
        abs_err += (a.killing_labels as f64 - p.killing_labels as f64).abs();
        actual_sum += a.killing_labels as f64;
        pairs.push((a.diverges, p.diverges));
    }
    let n = pairs.len();
    let mae = if n > 0 { abs_err / n as f64 } else { 0.0 };
    let rmae = (actual_sum > 0.0).then(|| mae / (actual_sum / n as f64));
    let confusion = Confusion::from_pairs(pairs);
    PredictiveMetrics {
        mae,
        rmae,
        confusion,
        precision: confusion.precision(),
        recall: confusion.recall(),
        f1: confusion.f1(),
        mcc: confusion.mcc(),
        compared: n,
    }
}

/// Render an optional metric, using `N/A` for undefined values.
pub fn fmt_opt(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x:.6}"),
        None => "N/A".into(),
    }
}

/// Average ranks (1-based), ties sharing the mean of their positions.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for k in &order[i..=j] {
            ranks[*k] = r;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    (sxx > 0.0 && syy > 0.0).then(|| sxy / (sxx * syy).sqrt())
}

/// Spearman rank correlation; `None` if either series is constant or the
/// lengths differ or fewer than two points are given.
pub fn spearman_rho(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    pearson(&average_ranks(x), &average_ranks(y))
}
