//! Versioned run reports, verdict CSV and cross-report comparison tables.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::cluster::SearchTrace;
use crate::metrics::{ms_error, predictive_metrics, reduction, speed_up, PredictiveMetrics};
use crate::mutation::MutantId;
use crate::pipeline::AcceleratedRun;
use crate::testing::{MutantVerdict, Provenance, TimingRecord, VerdictTable};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("report json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported report schema version {0}")]
    Schema(u32),
    #[error("reports disagree on {what}: {left} vs {right}")]
    HashMismatch { what: &'static str, left: String, right: String },
    #[error("{0}")]
    Invalid(String),
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn file_sha256(path: impl AsRef<Path>) -> Result<String, ReportError> {
    Ok(sha256_hex(&std::fs::read(path)?))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputHashes {
    pub model_sha256: String,
    pub dataset_sha256: String,
    pub manifest_sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSummary {
    pub per_class: usize,
    pub sample_size: usize,
    pub tau: f64,
    pub cluster_count: usize,
    pub reduction_rate: f64,
    pub max_iterations: Option<usize>,
    pub trace: Option<SearchTrace>,
    pub clusters: Vec<Vec<MutantId>>,
    /// `(representative, members)` per cluster.
    pub representatives: Vec<(MutantId, Vec<MutantId>)>,
    pub quarantined: Vec<MutantId>,
}

impl SearchSummary {
    pub fn from_run(run: &AcceleratedRun, mutant_count: usize) -> Self {
        let tested = run.clusters.len() + run.quarantined.len();
        Self {
            per_class: run.per_class(),
            sample_size: run.sample.len(),
            tau: run.tau(),
            cluster_count: run.clusters.len(),
            reduction_rate: reduction(mutant_count, tested),
            max_iterations: run.trace.as_ref().map(SearchTrace::max_iterations),
            trace: run.trace.clone(),
            clusters: run.clusters.clusters.clone(),
            representatives: run.representatives.pairs.clone(),
            quarantined: run.quarantined.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub mode: String,
    /// Effective configuration as flat key/value pairs.
    pub config: BTreeMap<String, String>,
    pub inputs: InputHashes,
    pub mutant_count: usize,
    pub label_count: usize,
    pub tested_points: usize,
    pub tested_mutants: usize,
    pub mutation_score: Option<f64>,
    pub verdicts: Vec<MutantVerdict>,
    /// Operator short name per mutant id, for the verdict CSV.
    pub kinds: BTreeMap<u32, String>,
    pub search: Option<SearchSummary>,
    pub notes: Vec<String>,
    pub timing: TimingRecord,
    #[serde(default)]
    pub test_seconds: Vec<(MutantId, f64)>,
}

/// Fields that depend on the wall clock and are skipped by determinism checks.
pub const TIMING_FIELDS: [&str; 2] = ["timing", "test_seconds"];

impl RunReport {
    pub fn new(
        table: &VerdictTable,
        config: BTreeMap<String, String>,
        inputs: InputHashes,
        kinds: BTreeMap<u32, String>,
    ) -> Self {
        Self {
            schema_version: REPORT_SCHEMA_VERSION,
            mode: table.mode.clone(),
            config,
            inputs,
            mutant_count: table.verdicts.len(),
            label_count: table.label_count,
            tested_points: table.tested_points,
            tested_mutants: table.timing.tested_mutants,
            mutation_score: table.mutation_score().ok(),
            verdicts: table.verdicts.clone(),
            kinds,
            search: None,
            notes: Vec::new(),
            timing: table.timing.clone(),
            test_seconds: table.test_seconds.clone(),
        }
    }

    /// Rebuild the verdict table view of this report.
    pub fn table(&self) -> VerdictTable {
        VerdictTable {
            mode: self.mode.clone(),
            verdicts: self.verdicts.clone(),
            label_count: self.label_count,
            tested_points: self.tested_points,
            timing: self.timing.clone(),
            test_seconds: self.test_seconds.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, ReportError> {
        let report: RunReport = serde_json::from_str(text)?;
        if report.schema_version != REPORT_SCHEMA_VERSION {
            return Err(ReportError::Schema(report.schema_version));
        }
        Ok(report)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ReportError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// The report as JSON with every wall-clock field removed.
    pub fn deterministic_json(&self) -> String {
        let mut value = serde_json::to_value(self).expect("report serializes");
        if let Some(obj) = value.as_object_mut() {
            for f in TIMING_FIELDS {
                obj.remove(f);
            }
        }
        serde_json::to_string_pretty(&value).expect("value serializes")
    }

    pub fn verdict_csv(&self) -> String {
        let reps: HashMap<MutantId, MutantId> = self
            .search
            .iter()
            .flat_map(|s| s.representatives.iter())
            .flat_map(|(r, members)| members.iter().map(move |m| (*m, *r)))
            .collect();
        let mut out = String::from(VERDICT_CSV_HEADER);
        out.push('\n');
        for v in &self.verdicts {
            let status = match v.provenance {
                Provenance::Untested => "untested",
                _ if v.killed => "killed",
                _ => "survived",
            };
            let representative = match v.provenance {
                Provenance::Propagated { from } => from.to_string(),
                _ => reps.get(&v.id).map(|r| r.to_string()).unwrap_or_default(),
            };
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                v.id,
                self.kinds.get(&v.id.0).map(String::as_str).unwrap_or(""),
                status,
                v.killing_labels,
                v.diverges,
                v.provenance.name(),
                representative
            ));
        }
        out
    }

    pub fn timing_csv(&self) -> String {
        let mut out = String::from("phase,seconds\n");
        for (phase, secs) in &self.timing.phases {
            let name = serde_json::to_value(phase).expect("phase serializes");
            out.push_str(&format!("{},{secs:.6}\n", name.as_str().unwrap_or("?")));
        }
        out.push_str(&format!("total,{:.6}\n", self.timing.total()));
        out
    }
}

pub const VERDICT_CSV_HEADER: &str = "mutant_id,kind,status,killing_labels,diverges,provenance,representative";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub avg: f64,
    pub min: f64,
    pub max: f64,
}

impl Stat {
    fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        Some(Self {
            avg: values.iter().sum::<f64>() / values.len() as f64,
            min: values.iter().copied().fold(f64::INFINITY, f64::min),
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub mode: String,
    pub runs: usize,
    /// Relative mutation-score error against the vanilla report.
    pub loss: Option<Stat>,
    pub reduction: Option<Stat>,
    pub speed_up: Option<Stat>,
    pub predictive: Vec<PredictiveMetrics>,
}

fn check(what: &'static str, left: &str, right: &str) -> Result<(), ReportError> {
    if left != right {
        return Err(ReportError::HashMismatch { what, left: left.into(), right: right.into() });
    }
    Ok(())
}

/// Aggregate each mode's reports against one vanilla report.
pub fn compare(vanilla: &RunReport, others: &[RunReport]) -> Result<Vec<ComparisonRow>, ReportError> {
    let vanilla_ms =
        vanilla.mutation_score.ok_or_else(|| ReportError::Invalid("vanilla report has no mutation score".into()))?;
    let mut order: Vec<String> = Vec::new();
    let mut groups: HashMap<String, Vec<&RunReport>> = HashMap::new();
    for r in others {
        check("model hash", &vanilla.inputs.model_sha256, &r.inputs.model_sha256)?;
        check("dataset hash", &vanilla.inputs.dataset_sha256, &r.inputs.dataset_sha256)?;
        check("manifest hash", &vanilla.inputs.manifest_sha256, &r.inputs.manifest_sha256)?;
        if !groups.contains_key(&r.mode) {
            order.push(r.mode.clone());
        }
        groups.entry(r.mode.clone()).or_default().push(r);
    }
    let vt = vanilla.table();
    Ok(order
        .into_iter()
        .map(|mode| {
            let reports = &groups[&mode];
            let losses: Vec<f64> =
                reports.iter().filter_map(|r| r.mutation_score.and_then(|ms| ms_error(vanilla_ms, ms))).collect();
            let reductions: Vec<f64> = reports.iter().map(|r| reduction(r.mutant_count, r.tested_mutants)).collect();
            let speed: Vec<f64> =
                reports.iter().filter_map(|r| speed_up(vanilla.timing.total(), r.timing.total())).collect();
            ComparisonRow {
                runs: reports.len(),
                loss: Stat::of(&losses),
                reduction: Stat::of(&reductions),
                speed_up: Stat::of(&speed),
                predictive: reports.iter().map(|r| predictive_metrics(&vt, &r.table())).collect(),
                mode,
            }
        })
        .collect())
}

pub const COMPARISON_CSV_HEADER: &str =
    "mode,runs,loss_avg,loss_min,loss_max,reduction_avg,reduction_min,reduction_max,speedup_avg,speedup_min,speedup_max";

pub fn comparison_csv(rows: &[ComparisonRow]) -> String {
    let cells = |s: &Option<Stat>| match s {
        Some(s) => format!("{:.6},{:.6},{:.6}", s.avg, s.min, s.max),
        None => "N/A,N/A,N/A".into(),
    };
    let mut out = String::from(COMPARISON_CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.mode,
            r.runs,
            cells(&r.loss),
            cells(&r.reduction),
            cells(&r.speed_up)
        ));
    }
    out
}
