//! Topological gains: what stitching a second filter adds to a mapper,
//! measured within each interval of the first filter's cover.
//!
//! A mapper is restricted to an interval either to its *interior* (the
//! subcomplex induced by the vertices built from that interval) or to its
//! *boundary* (the interior plus every coface in the mapper, closed under
//! faces). On each restriction we measure a Betti number over ℤ/2, the
//! Euler characteristic, or a graph entropy of the 1-skeleton, and difference
//! the bivariate value against the univariate one.

use std::collections::{BTreeSet, HashMap, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mapper::{MapperComplex, Simplex};

#[derive(Debug, Error, PartialEq)]
pub enum GainsError {
    #[error("interval {index} out of range for a cover of {len} intervals")]
    InvalidInterval { index: usize, len: usize },
    #[error("Betti numbers are only exposed for p = 0 and p = 1, got p = {0}")]
    UnsupportedDimension(usize),
    #[error("entropy of an empty graph is undefined")]
    EmptyGraph,
    #[error("edge weights must be positive and finite")]
    NonPositiveWeight,
    #[error("expected {edges} edge weights, got {weights}")]
    WeightCount { edges: usize, weights: usize },
    #[error("the bivariate mapper's first cover does not match the univariate mapper's cover")]
    CoverMismatch,
    #[error("mapper carries no cover information")]
    MissingLens,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RestrictionMode {
    Interior,
    Boundary,
}

impl std::str::FromStr for RestrictionMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "interior" => Ok(Self::Interior),
            "boundary" => Ok(Self::Boundary),
            other => Err(format!("unknown restriction `{other}`")),
        }
    }
}

/// Which quantity a gain vector differences.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Measure {
    /// β₀ per interval.
    Lhd0,
    /// β₁ per interval.
    Lhd1,
    /// Euler characteristic per interval.
    Lrec,
    /// Distance-matrix entropy of the mapper graph per interval.
    LedD,
    /// Adjacency entropy of the mapper graph per interval.
    LedA,
}

impl Measure {
    pub const ALL: [Measure; 5] = [
        Measure::Lhd0,
        Measure::Lhd1,
        Measure::Lrec,
        Measure::LedD,
        Measure::LedA,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Measure::Lhd0 => "lhd0",
            Measure::Lhd1 => "lhd1",
            Measure::Lrec => "lrec",
            Measure::LedD => "led_d",
            Measure::LedA => "led_a",
        }
    }

    /// Entropy measures work on the 1-skeleton; the others on the complex.
    pub fn on_graph(self) -> bool {
        matches!(self, Measure::LedD | Measure::LedA)
    }
}

impl std::str::FromStr for Measure {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Measure::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown measure `{s}`"))
    }
}

/// Subcomplex of `complex` for interval `interval` of its first cover.
pub fn restrict(complex: &MapperComplex, interval: usize, mode: RestrictionMode) -> Result<MapperComplex, GainsError> {
    if let Some(len) = complex.first_factor_len() {
        if interval >= len {
            return Err(GainsError::InvalidInterval { index: interval, len });
        }
    }
    let inside: Vec<bool> = complex
        .vertices()
        .iter()
        .map(|v| v.origin.first() == interval)
        .collect();
    let simplices: BTreeSet<Simplex> = match mode {
        RestrictionMode::Interior => complex
            .simplices()
            .iter()
            .filter(|s| s.iter().all(|&v| inside[v]))
            .cloned()
            .collect(),
        RestrictionMode::Boundary => {
            let mut out = BTreeSet::new();
            for s in complex.simplices().iter().filter(|s| s.iter().any(|&v| inside[v])) {
                crate::mapper::for_each_subset(s, s.len(), |face| {
                    out.insert(face.to_vec());
                });
            }
            out
        }
    };
    Ok(complex.subcomplex(&simplices))
}

struct DisjointSet {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            rank: vec![0; n],
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) -> bool {
        let (a, b) = (self.find(a), self.find(b));
        if a == b {
            return false;
        }
        match self.rank[a].cmp(&self.rank[b]) {
            std::cmp::Ordering::Less => self.parent[a] = b,
            std::cmp::Ordering::Greater => self.parent[b] = a,
            std::cmp::Ordering::Equal => {
                self.parent[b] = a;
                self.rank[a] += 1;
            }
        }
        true
    }
}

fn connected_components(complex: &MapperComplex) -> usize {
    let mut dsu = DisjointSet::new(complex.vertex_count());
    let merges = complex.edges().filter(|&(a, b)| dsu.union(a, b)).count();
    complex.vertex_count() - merges
}

/// Rank over ℤ/2 of the boundary map from `dim`-simplices to
/// `(dim−1)`-simplices.
pub(crate) fn boundary_rank(complex: &MapperComplex, dim: usize) -> usize {
    if dim == 0 {
        return 0;
    }
    let rows: HashMap<&Simplex, usize> = complex
        .simplices_of_dim(dim - 1)
        .enumerate()
        .map(|(i, s)| (s, i))
        .collect();
    let words = rows.len().div_ceil(64);
    // pivot row -> reduced column holding it as lowest set bit
    let mut pivots: HashMap<usize, Vec<u64>> = HashMap::new();
    let mut rank = 0;
    for s in complex.simplices_of_dim(dim) {
        let mut column = vec![0u64; words];
        for skip in 0..s.len() {
            let face: Simplex = s
                .iter()
                .enumerate()
                .filter(|&(k, _)| k != skip)
                .map(|(_, &v)| v)
                .collect();
            let row = rows[&face];
            column[row / 64] ^= 1 << (row % 64);
        }
        while let Some(low) = lowest_bit(&column) {
            match pivots.get(&low) {
                Some(other) => column.iter_mut().zip(other).for_each(|(a, b)| *a ^= b),
                None => {
                    pivots.insert(low, column);
                    rank += 1;
                    break;
                }
            }
        }
    }
    rank
}

fn lowest_bit(column: &[u64]) -> Option<usize> {
    column
        .iter()
        .enumerate()
        .rev()
        .find(|(_, w)| **w != 0)
        .map(|(i, w)| i * 64 + 63 - w.leading_zeros() as usize)
}

/// β_p over ℤ/2 for any `p`, used to cross-check [`betti`].
#[cfg(test)]
pub(crate) fn betti_any(complex: &MapperComplex, p: usize) -> usize {
    let n_p = complex.count_of_dim(p);
    n_p - boundary_rank(complex, p) - boundary_rank(complex, p + 1)
}

/// β₀ (components, by union-find) or β₁ (by ℤ/2 elimination).
pub fn betti(complex: &MapperComplex, p: usize) -> Result<usize, GainsError> {
    match p {
        0 => Ok(connected_components(complex)),
        1 => {
            let cycles = complex.count_of_dim(1) - (complex.vertex_count() - connected_components(complex));
            Ok(cycles - boundary_rank(complex, 2))
        }
        other => Err(GainsError::UnsupportedDimension(other)),
    }
}

/// Alternating sum of simplex counts.
pub fn euler(complex: &MapperComplex) -> i64 {
    complex
        .simplices()
        .iter()
        .map(|s| if s.len() % 2 == 1 { 1 } else { -1 })
        .sum()
}

/// An unweighted simple graph on vertices `0..n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MapperGraph {
    pub n_vertices: usize,
    pub edges: Vec<(usize, usize)>,
}

impl MapperGraph {
    pub fn new(n_vertices: usize, edges: Vec<(usize, usize)>) -> Self {
        Self { n_vertices, edges }
    }

    /// The 1-skeleton of a complex.
    pub fn from_complex(complex: &MapperComplex) -> Self {
        Self {
            n_vertices: complex.vertex_count(),
            edges: complex.edges().collect(),
        }
    }

    fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n_vertices];
        for &(a, b) in &self.edges {
            adj[a].push(b);
            adj[b].push(a);
        }
        adj
    }
}

fn plogp(count: usize, total: f64) -> f64 {
    if count == 0 {
        return 0.0;
    }
    let p = count as f64 / total;
    p * p.ln()
}

/// Mean entropy on distances (natural log).
///
/// The `N²` entries of the all-pairs distance matrix are grouped by value:
/// distance 0 (the `N` diagonal entries), each finite distance, and `∞` for
/// ordered pairs in different components.
pub fn entropy_distance(graph: &MapperGraph) -> Result<f64, GainsError> {
    let n = graph.n_vertices;
    if n == 0 {
        return Err(GainsError::EmptyGraph);
    }
    let adj = graph.adjacency();
    let mut histogram: Vec<usize> = Vec::new();
    let mut unreachable = 0;
    let mut dist = vec![usize::MAX; n];
    let mut queue = VecDeque::new();
    for source in 0..n {
        dist.fill(usize::MAX);
        dist[source] = 0;
        queue.push_back(source);
        let mut reached = 1;
        while let Some(x) = queue.pop_front() {
            for &y in &adj[x] {
                if dist[y] == usize::MAX {
                    dist[y] = dist[x] + 1;
                    if histogram.len() <= dist[y] {
                        histogram.resize(dist[y] + 1, 0);
                    }
                    histogram[dist[y]] += 1;
                    reached += 1;
                    queue.push_back(y);
                }
            }
        }
        unreachable += n - reached;
    }
    let total = (n * n) as f64;
    let diagonal = -(1.0 / n as f64) * (1.0 / n as f64).ln();
    let finite: f64 = histogram.iter().skip(1).map(|&c| plogp(c, total)).sum();
    Ok(diagonal - finite - plogp(unreachable, total))
}

/// Mean entropy on adjacency (natural log): `−Σ q log q` over edges with
/// `q = w / W`. Unit weights when `weights` is `None`; 0 for an edgeless
/// graph. Edges never join different components, so the edge sum needs no
/// special case for disconnected graphs.
pub fn entropy_adjacency(graph: &MapperGraph, weights: Option<&[f64]>) -> Result<f64, GainsError> {
    let weights: Vec<f64> = match weights {
        Some(w) if w.len() != graph.edges.len() => {
            return Err(GainsError::WeightCount {
                edges: graph.edges.len(),
                weights: w.len(),
            })
        }
        Some(w) => w.to_vec(),
        None => vec![1.0; graph.edges.len()],
    };
    if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
        return Err(GainsError::NonPositiveWeight);
    }
    let total: f64 = weights.iter().sum();
    Ok(weights
        .iter()
        .map(|w| {
            let q = w / total;
            q * (1.0 / q).ln()
        })
        .sum())
}

/// The measure on an already restricted (or unrestricted) complex. Empty
/// complexes measure 0.
pub fn measure_value(complex: &MapperComplex, measure: Measure) -> f64 {
    match measure {
        Measure::Lhd0 => connected_components(complex) as f64,
        Measure::Lhd1 => betti(complex, 1).expect("p = 1 is supported") as f64,
        Measure::Lrec => euler(complex) as f64,
        Measure::LedD => entropy_distance(&MapperGraph::from_complex(complex)).unwrap_or(0.0),
        Measure::LedA => {
            entropy_adjacency(&MapperGraph::from_complex(complex), None).expect("unit weights are positive")
        }
    }
}

/// LH / χ / LE vector: the measure on each interval's restriction.
///
/// Entropies are taken on restrictions of the mapper graph (the
/// 1-skeleton), the other measures on restrictions of the full complex.
pub fn local_vector(complex: &MapperComplex, measure: Measure, mode: RestrictionMode) -> Result<Vec<f64>, GainsError> {
    let len = complex.first_factor_len().ok_or(GainsError::MissingLens)?;
    let base = if measure.on_graph() {
        complex.skeleton(1)
    } else {
        complex.clone()
    };
    (0..len)
        .map(|i| Ok(measure_value(&restrict(&base, i, mode)?, measure)))
        .collect()
}

/// The measure on the whole mapper (graph for entropies).
pub fn global_value(complex: &MapperComplex, measure: Measure) -> f64 {
    if measure.on_graph() {
        measure_value(&complex.skeleton(1), measure)
    } else {
        measure_value(complex, measure)
    }
}

/// Per-interval and global differences between a bivariate mapper and the
/// univariate mapper of its first filter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainReport {
    pub measure: Measure,
    pub restriction: RestrictionMode,
    pub base: Vec<f64>,
    pub stitched: Vec<f64>,
    pub diff: Vec<f64>,
    pub global_base: f64,
    pub global_stitched: f64,
    pub global_diff: f64,
}

pub fn gain_report(
    uni: &MapperComplex,
    bi: &MapperComplex,
    measure: Measure,
    mode: RestrictionMode,
) -> Result<GainReport, GainsError> {
    let (Some(u), Some(b)) = (uni.lenses().first(), bi.lenses().first()) else {
        return Err(GainsError::MissingLens);
    };
    if u.cover != b.cover || u.values != b.values || uni.n_points() != bi.n_points() {
        return Err(GainsError::CoverMismatch);
    }
    let base = local_vector(uni, measure, mode)?;
    let stitched = local_vector(bi, measure, mode)?;
    let diff = stitched.iter().zip(&base).map(|(s, b)| s - b).collect();
    let global_base = global_value(uni, measure);
    let global_stitched = global_value(bi, measure);
    Ok(GainReport {
        measure,
        restriction: mode,
        base,
        stitched,
        diff,
        global_base,
        global_stitched,
        global_diff: global_stitched - global_base,
    })
}
