//! Threshold-driven average-linkage agglomerative clustering, representative
//! selection, and the coupled sampling-rate / linkage-threshold search.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mutation::MutantId;
use crate::rng::SplitMix64;
use crate::spectral::{SampleSet, SimilarityGraph, SpectralError};

/// Sampling rates tried in order by the parameter search.
pub const SAMPLING_RATES: [usize; 11] = [1, 3, 5, 10, 20, 30, 40, 50, 100, 200, 300];
/// At or below this threshold clustering yields a single cluster.
pub const TAU_FLOOR: f64 = 1e-5;
/// At or above this threshold clustering yields singletons.
pub const TAU_CEILING: f64 = 0.99999;
/// A search round also stops once the threshold interval is this narrow.
pub const TAU_WIDTH_CAP: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum ClusterError {
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReductionConstraint {
    pub lo: f64,
    pub hi: f64,
}

impl ReductionConstraint {
    pub fn new(lo: f64, hi: f64) -> Result<Self, ClusterError> {
        if !(0.0 <= lo && lo <= hi && hi <= 1.0) {
            return Err(ClusterError::Parameter(format!(
                "reduction constraint [{lo}, {hi}] must satisfy 0 <= lo <= hi <= 1"
            )));
        }
        Ok(Self { lo, hi })
    }

    pub fn contains(&self, rate: f64) -> bool {
        self.lo <= rate && rate <= self.hi
    }
}

impl Default for ReductionConstraint {
    fn default() -> Self {
        Self { lo: 0.26, hi: 0.56 }
    }
}

/// Partition of mutant ids. Clusters are sorted by their smallest member and
/// members are ascending.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSet {
    pub clusters: Vec<Vec<MutantId>>,
    pub tau: f64,
    pub per_class: Option<usize>,
}

impl ClusterSet {
    pub fn len(&self) -> usize {
        self.clusters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }

    pub fn member_count(&self) -> usize {
        self.clusters.iter().map(Vec::len).sum()
    }

    pub fn singletons(ids: &[MutantId]) -> Self {
        let mut ids = ids.to_vec();
        ids.sort();
        Self { clusters: ids.into_iter().map(|id| vec![id]).collect(), tau: 1.0, per_class: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Merge {
    /// Node positions of the smallest member of each side; `left < right`.
    pub left: usize,
    pub right: usize,
    pub linkage: f64,
}

/// Full greedy merge sequence of a similarity graph under average linkage.
///
/// At every step the pair of clusters with the greatest mean cross-edge
/// similarity is merged; among equal linkages the pair whose smaller
/// cluster-minimum is lowest wins, then the larger one.
#[derive(Debug, Clone)]
pub struct Dendrogram {
    nodes: Vec<MutantId>,
    merges: Vec<Merge>,
}

impl Dendrogram {
    pub fn build(graph: &SimilarityGraph) -> Self {
        let n = graph.node_count();
        let mut sums = vec![0.0f64; n * n];
        for i in 0..n {
            for j in i + 1..n {
                let w = graph.weight_at(i, j);
                sums[i * n + j] = w;
                sums[j * n + i] = w;
            }
        }
        let mut size = vec![1usize; n];
        let mut active: Vec<usize> = (0..n).collect();
        let mut merges = Vec::with_capacity(n.saturating_sub(1));
        while active.len() > 1 {
            let mut best: Option<(f64, usize, usize)> = None;
            for (pa, &a) in active.iter().enumerate() {
                for &b in &active[pa + 1..] {
                    let link = sums[a * n + b] / (size[a] * size[b]) as f64;
                    // Ascending scan order means the first maximum already has the lowest key.
                    if best.is_none_or(|(l, _, _)| link > l) {
                        best = Some((link, a, b));
                    }
                }
            }
            let (linkage, a, b) = best.expect("at least two active clusters");
            for &c in &active {
                if c != a && c != b {
                    let s = sums[a * n + c] + sums[b * n + c];
                    sums[a * n + c] = s;
                    sums[c * n + a] = s;
                }
            }
            size[a] += size[b];
            active.retain(|&c| c != b);
            merges.push(Merge { left: a, right: b, linkage });
        }
        Self { nodes: graph.nodes().to_vec(), merges }
    }

    pub fn merges(&self) -> &[Merge] {
        &self.merges
    }

    /// Number of merges performed at threshold `tau` (stops at the first
    /// merge whose linkage falls below `tau`).
    pub fn merges_at(&self, tau: f64) -> usize {
        if tau >= TAU_CEILING {
            0
        } else if tau <= TAU_FLOOR {
            self.merges.len()
        } else {
            self.merges.iter().take_while(|m| m.linkage >= tau).count()
        }
    }

    pub fn cluster_count_at(&self, tau: f64) -> usize {
        self.nodes.len() - self.merges_at(tau)
    }

    pub fn cut(&self, tau: f64) -> ClusterSet {
        let n = self.nodes.len();
        let mut owner: Vec<usize> = (0..n).collect();
        for m in &self.merges[..self.merges_at(tau)] {
            for o in owner.iter_mut() {
                if *o == m.right {
                    *o = m.left;
                }
            }
        }
        let mut clusters: Vec<Vec<MutantId>> = Vec::new();
        let mut slot = vec![usize::MAX; n];
        for (pos, &o) in owner.iter().enumerate() {
            if slot[o] == usize::MAX {
                slot[o] = clusters.len();
                clusters.push(Vec::new());
            }
            clusters[slot[o]].push(self.nodes[pos]);
        }
        ClusterSet { clusters, tau, per_class: None }
    }
}

fn check_tau(tau: f64) -> Result<(), ClusterError> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(ClusterError::Parameter(format!("linkage threshold {tau} outside (0, 1)")));
    }
    Ok(())
}

/// Merge clusters while the best average linkage is at least `tau`.
///
/// Thresholds at or above [`TAU_CEILING`] behave as 1 (singletons) and those
/// at or below [`TAU_FLOOR`] as 0 (one cluster).
pub fn hac_cluster(graph: &SimilarityGraph, tau: f64) -> Result<ClusterSet, ClusterError> {
    check_tau(tau)?;
    Ok(Dendrogram::build(graph).cut(tau))
}

pub fn mutant_reduction_rate(mutant_count: usize, clusters: usize) -> f64 {
    if mutant_count == 0 {
        return 0.0;
    }
    (mutant_count - clusters.min(mutant_count)) as f64 / mutant_count as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RoundEnd {
    /// A partition inside the constraint was found.
    Satisfied,
    /// The next midpoint left `[TAU_FLOOR, TAU_CEILING]`.
    MidpointOutOfRange,
    /// The threshold interval shrank below [`TAU_WIDTH_CAP`].
    WidthCap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchProbe {
    pub tau: f64,
    pub clusters: usize,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchRound {
    pub per_class: usize,
    pub sample_size: usize,
    pub mutant_count: usize,
    pub probes: Vec<SearchProbe>,
    pub end: RoundEnd,
}

impl SearchRound {
    pub fn iterations(&self) -> usize {
        self.probes.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchTrace {
    pub constraint: ReductionConstraint,
    pub rounds: Vec<SearchRound>,
}

impl SearchTrace {
    pub fn max_iterations(&self) -> usize {
        self.rounds.iter().map(SearchRound::iterations).max().unwrap_or(0)
    }
}

#[derive(Debug, Clone)]
pub enum SearchOutcome {
    Satisfied { clusters: ClusterSet, sample: SampleSet, graph: SimilarityGraph, trace: SearchTrace },
    NotSatisfiable { trace: SearchTrace },
}

pub const NOT_SATISFIABLE_MESSAGE: &str = "Mutant reduction goal not satisfiable";

/// Binary search on the threshold for one graph; `None` if no probe lands in `constraint`.
pub fn search_threshold(
    dendrogram: &Dendrogram,
    node_count: usize,
    constraint: &ReductionConstraint,
    round: &mut SearchRound,
) -> Option<f64> {
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    loop {
        let mid = lo + (hi - lo) / 2.0;
        if !(TAU_FLOOR..=TAU_CEILING).contains(&mid) {
            round.end = RoundEnd::MidpointOutOfRange;
            return None;
        }
        if hi - lo < TAU_WIDTH_CAP {
            log::debug!("threshold search hit width cap at tau={mid}");
            round.end = RoundEnd::WidthCap;
            return None;
        }
        let tau = mid;
        let clusters = dendrogram.cluster_count_at(tau);
        let rate = mutant_reduction_rate(node_count, clusters);
        round.probes.push(SearchProbe { tau, clusters, rate });
        if rate < constraint.lo {
            hi = tau;
        } else if rate > constraint.hi {
            lo = tau;
        } else {
            round.end = RoundEnd::Satisfied;
            return Some(tau);
        }
    }
}

/// Try each sampling rate in `rates` in order and binary-search the linkage
/// threshold on its graph until the reduction rate lands in `constraint`.
///
/// `graph_for` builds the sample and similarity graph for a sampling rate.
pub fn parameter_search<F>(
    rates: &[usize],
    constraint: &ReductionConstraint,
    mut graph_for: F,
) -> Result<SearchOutcome, ClusterError>
where
    F: FnMut(usize) -> Result<(SampleSet, SimilarityGraph), ClusterError>,
{
    let mut trace = SearchTrace { constraint: *constraint, rounds: Vec::new() };
    for &x in rates {
        let (sample, graph) = graph_for(x)?;
        let dendrogram = Dendrogram::build(&graph);
        let mut round = SearchRound {
            per_class: x,
            sample_size: sample.len(),
            mutant_count: graph.node_count(),
            probes: Vec::new(),
            end: RoundEnd::MidpointOutOfRange,
        };
        let found = search_threshold(&dendrogram, graph.node_count(), constraint, &mut round);
        trace.rounds.push(round);
        if let Some(tau) = found {
            let mut clusters = dendrogram.cut(tau);
            clusters.per_class = Some(x);
            return Ok(SearchOutcome::Satisfied { clusters, sample, graph, trace });
        }
    }
    Ok(SearchOutcome::NotSatisfiable { trace })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RepresentativeMode {
    Random,
    LowestId,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepresentativeMap {
    /// `(representative, members)` per cluster; members include the representative.
    pub pairs: Vec<(MutantId, Vec<MutantId>)>,
    pub seed: u64,
    pub mode: RepresentativeMode,
}

impl RepresentativeMap {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn representative_of(&self, id: MutantId) -> Option<MutantId> {
        self.pairs.iter().find(|(_, members)| members.contains(&id)).map(|(r, _)| *r)
    }
}

/// One pick per cluster, in cluster order, from a single seeded stream.
pub fn select_representatives(clusters: &ClusterSet, seed: u64, mode: RepresentativeMode) -> RepresentativeMap {
    let mut rng = SplitMix64::new(seed);
    let pairs = clusters
        .clusters
        .iter()
        .map(|members| {
            let rep = match mode {
                RepresentativeMode::Random => members[rng.below_usize(members.len())],
                RepresentativeMode::LowestId => *members.iter().min().expect("nonempty cluster"),
            };
            (rep, members.clone())
        })
        .collect();
    RepresentativeMap { pairs, seed, mode }
}
