//! Pullback covers and mapper complexes.
//!
//! Path-connectivity is fixed once for the whole cloud by an ε-neighborhood
//! graph: the components of any subset of points are the components of the
//! subgraph it induces. Every pullback, univariate or bivariate, and every
//! composed cover element is computed against the same graph, which is what
//! makes composed and directly built bivariate mappers comparable exactly.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cover::{Cover, CoverError, ProductCover};
use crate::dataset::{DatasetError, FilterFunction, PointCloud};

/// Default maximum simplex dimension of a mapper complex.
pub const DEFAULT_MAX_DIM: usize = 3;
/// Neighbor rank used by [`NeighborhoodGraph::default_epsilon`].
pub const DEFAULT_EPSILON_K: usize = 5;
/// Multiplier used by [`NeighborhoodGraph::default_epsilon`].
pub const DEFAULT_EPSILON_SCALE: f64 = 1.5;

#[derive(Debug, Error)]
pub enum MapperError {
    #[error("epsilon must be positive and finite, got {0}")]
    BadEpsilon(f64),
    #[error("max_dim must be at least 1")]
    ZeroMaxDim,
    #[error("expected {expected} filter values, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Cover(#[from] CoverError),
}

/// Undirected ε-neighborhood graph over point indices.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborhoodGraph {
    epsilon: f64,
    adjacency: Vec<Vec<usize>>,
}

fn distance_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

impl NeighborhoodGraph {
    /// Connects every pair of distinct points at Euclidean distance `<= epsilon`.
    pub fn build(cloud: &PointCloud, epsilon: f64) -> Result<Self, MapperError> {
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(MapperError::BadEpsilon(epsilon));
        }
        let eps_sq = epsilon * epsilon;
        let points = cloud.points();
        let adjacency = (0..points.len())
            .into_par_iter()
            .map(|i| {
                (0..points.len())
                    .filter(|&j| j != i && distance_sq(&points[i], &points[j]) <= eps_sq)
                    .collect()
            })
            .collect();
        Ok(Self { epsilon, adjacency })
    }

    /// Builds a graph from an explicit edge list. Mostly useful in tests.
    pub fn from_edges(n_points: usize, edges: &[(usize, usize)]) -> Self {
        let mut adjacency = vec![Vec::new(); n_points];
        for &(a, b) in edges {
            if a != b {
                adjacency[a].push(b);
                adjacency[b].push(a);
            }
        }
        for list in &mut adjacency {
            list.sort_unstable();
            list.dedup();
        }
        Self {
            epsilon: f64::NAN,
            adjacency,
        }
    }

    /// `1.5 ×` the mean over points of the distance to the 5th nearest
    /// neighbor (fewer when the cloud is small).
    pub fn default_epsilon(cloud: &PointCloud) -> f64 {
        let points = cloud.points();
        let n = points.len();
        if n < 2 {
            return 1.0;
        }
        let k = DEFAULT_EPSILON_K.min(n - 1);
        let total: f64 = (0..n)
            .into_par_iter()
            .map(|i| {
                let mut d: Vec<f64> = (0..n)
                    .filter(|&j| j != i)
                    .map(|j| distance_sq(&points[i], &points[j]))
                    .collect();
                let (_, kth, _) = d.select_nth_unstable_by(k - 1, f64::total_cmp);
                kth.sqrt()
            })
            .sum();
        let eps = DEFAULT_EPSILON_SCALE * total / n as f64;
        if eps > 0.0 {
            eps
        } else {
            f64::MIN_POSITIVE
        }
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn n_points(&self) -> usize {
        self.adjacency.len()
    }

    pub fn neighbors(&self, point: usize) -> &[usize] {
        &self.adjacency[point]
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// Connected components of the subgraph induced by `subset`. Each
    /// component is sorted and the list is ordered by smallest member.
    pub fn components(&self, subset: &[usize]) -> Vec<Vec<usize>> {
        let mut in_subset = BTreeMap::new();
        for &p in subset {
            in_subset.insert(p, false);
        }
        let mut out = Vec::new();
        let mut queue = VecDeque::new();
        let starts: Vec<usize> = in_subset.keys().copied().collect();
        for start in starts {
            if in_subset[&start] {
                continue;
            }
            in_subset.insert(start, true);
            queue.push_back(start);
            let mut component = Vec::new();
            while let Some(p) = queue.pop_front() {
                component.push(p);
                for &q in &self.adjacency[p] {
                    if let Some(seen) = in_subset.get_mut(&q) {
                        if !*seen {
                            *seen = true;
                            queue.push_back(q);
                        }
                    }
                }
            }
            component.sort_unstable();
            out.push(component);
        }
        out
    }
}

/// Which cover piece a vertex came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    Interval(usize),
    Cell(usize, usize),
}

impl Origin {
    /// Interval index in the first filter's cover.
    pub fn first(self) -> usize {
        match self {
            Origin::Interval(i) | Origin::Cell(i, _) => i,
        }
    }

    pub fn second(self) -> Option<usize> {
        match self {
            Origin::Interval(_) => None,
            Origin::Cell(_, j) => Some(j),
        }
    }

    pub fn transposed(self) -> Self {
        match self {
            Origin::Cell(i, j) => Origin::Cell(j, i),
            other => other,
        }
    }
}

/// A path-connected piece of a pullback cover.
///
/// Vertices are identified by `(origin, members)`; two cover pieces of
/// different intervals can hold the same points and are still distinct.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CoverElement {
    pub origin: Origin,
    pub members: Vec<usize>,
}

impl CoverElement {
    pub fn new(origin: Origin, mut members: Vec<usize>) -> Self {
        members.sort_unstable();
        members.dedup();
        Self { origin, members }
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, point: usize) -> bool {
        self.members.binary_search(&point).is_ok()
    }

    pub fn is_subset_of(&self, other: &CoverElement) -> bool {
        is_sorted_subset(&self.members, &other.members)
    }
}

fn is_sorted_subset(small: &[usize], large: &[usize]) -> bool {
    if small.len() > large.len() {
        return false;
    }
    let mut it = large.iter();
    small.iter().all(|x| it.any(|y| y == x))
}

/// True when the sorted member lists share at least one point.
pub fn have_common_point(sets: &[&[usize]]) -> bool {
    let Some(smallest) = sets.iter().min_by_key(|s| s.len()) else {
        return false;
    };
    smallest.iter().any(|p| sets.iter().all(|s| s.binary_search(p).is_ok()))
}

/// A simplex as a sorted list of vertex indices.
pub type Simplex = Vec<usize>;

/// Filter values and the cover they were pulled back through.
#[derive(Debug, Clone, PartialEq)]
pub struct Lens {
    pub label: String,
    pub values: Vec<f64>,
    pub cover: Cover,
}

/// A nerve of cover elements: vertices plus a downward-closed simplex set
/// (0-simplices included) of dimension at most `max_dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct MapperComplex {
    vertices: Vec<CoverElement>,
    simplices: BTreeSet<Simplex>,
    max_dim: usize,
    n_points: usize,
    lenses: Vec<Arc<Lens>>,
}

impl MapperComplex {
    /// An empty complex.
    pub fn empty(max_dim: usize) -> Self {
        Self {
            vertices: Vec::new(),
            simplices: BTreeSet::new(),
            max_dim,
            n_points: 0,
            lenses: Vec::new(),
        }
    }

    /// Assembles a complex from vertices and simplices, sorting vertices into
    /// canonical order (origin, then smallest member) and re-indexing the
    /// simplices accordingly. Returns the complex and the old-to-new vertex
    /// index map.
    pub fn from_parts(
        vertices: Vec<CoverElement>,
        simplices: impl IntoIterator<Item = Simplex>,
        max_dim: usize,
        n_points: usize,
        lenses: Vec<Arc<Lens>>,
    ) -> (Self, Vec<usize>) {
        let mut order: Vec<usize> = (0..vertices.len()).collect();
        order.sort_by(|&a, &b| vertices[a].cmp(&vertices[b]));
        let mut new_index = vec![0; vertices.len()];
        for (new, &old) in order.iter().enumerate() {
            new_index[old] = new;
        }
        let mut slots: Vec<Option<CoverElement>> = vertices.into_iter().map(Some).collect();
        let vertices = order
            .iter()
            .map(|&old| slots[old].take().expect("each vertex moved once"))
            .collect();
        let simplices = simplices
            .into_iter()
            .map(|s| {
                let mut s: Simplex = s.into_iter().map(|v| new_index[v]).collect();
                s.sort_unstable();
                s
            })
            .collect();
        (
            Self {
                vertices,
                simplices,
                max_dim,
                n_points,
                lenses,
            },
            new_index,
        )
    }

    pub fn vertices(&self) -> &[CoverElement] {
        &self.vertices
    }

    pub fn vertex(&self, index: usize) -> &CoverElement {
        &self.vertices[index]
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn simplices(&self) -> &BTreeSet<Simplex> {
        &self.simplices
    }

    pub fn contains(&self, simplex: &[usize]) -> bool {
        self.simplices.contains(simplex)
    }

    /// Simplices with exactly `dim + 1` vertices.
    pub fn simplices_of_dim(&self, dim: usize) -> impl Iterator<Item = &Simplex> {
        self.simplices.iter().filter(move |s| s.len() == dim + 1)
    }

    pub fn count_of_dim(&self, dim: usize) -> usize {
        self.simplices_of_dim(dim).count()
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.simplices_of_dim(1).map(|s| (s[0], s[1]))
    }

    /// Largest dimension present, `None` when empty.
    pub fn dimension(&self) -> Option<usize> {
        self.simplices.iter().map(|s| s.len() - 1).max()
    }

    pub fn max_dim(&self) -> usize {
        self.max_dim
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// The filters this complex was built from, first factor first.
    pub fn lenses(&self) -> &[Arc<Lens>] {
        &self.lenses
    }

    /// Number of intervals in the first filter's cover, when known.
    pub fn first_factor_len(&self) -> Option<usize> {
        self.lenses.first().map(|l| l.cover.len())
    }

    /// True when the simplex's vertices share a point.
    pub fn satisfies_nerve(&self, simplex: &[usize]) -> bool {
        let sets: Vec<&[usize]> = simplex.iter().map(|&v| self.vertices[v].members.as_slice()).collect();
        have_common_point(&sets)
    }

    /// Simplices of dimension at most `dim`, with the same vertices.
    pub fn skeleton(&self, dim: usize) -> MapperComplex {
        MapperComplex {
            vertices: self.vertices.clone(),
            simplices: self.simplices.iter().filter(|s| s.len() <= dim + 1).cloned().collect(),
            max_dim: self.max_dim.min(dim),
            n_points: self.n_points,
            lenses: self.lenses.clone(),
        }
    }

    /// The subcomplex made of `simplices` (which must be simplices of
    /// `self`), keeping only the vertices they use.
    pub fn subcomplex(&self, simplices: &BTreeSet<Simplex>) -> MapperComplex {
        let used: BTreeSet<usize> = simplices.iter().flatten().copied().collect();
        let mut remap = vec![usize::MAX; self.vertices.len()];
        let mut vertices = Vec::with_capacity(used.len());
        for (new, &old) in used.iter().enumerate() {
            remap[old] = new;
            vertices.push(self.vertices[old].clone());
        }
        let simplices = simplices
            .iter()
            .map(|s| s.iter().map(|&v| remap[v]).collect())
            .collect();
        MapperComplex {
            vertices,
            simplices,
            max_dim: self.max_dim,
            n_points: self.n_points,
            lenses: self.lenses.clone(),
        }
    }

    /// Swaps the two factors of a bivariate complex.
    pub fn transposed(&self) -> MapperComplex {
        let vertices = self
            .vertices
            .iter()
            .map(|v| CoverElement {
                origin: v.origin.transposed(),
                members: v.members.clone(),
            })
            .collect();
        let lenses = self.lenses.iter().rev().cloned().collect();
        Self::from_parts(
            vertices,
            self.simplices.iter().cloned(),
            self.max_dim,
            self.n_points,
            lenses,
        )
        .0
    }
}

/// Decomposes each interval's preimage into components.
///
/// Elements come out ordered by interval, then by smallest member.
pub fn pullback(values: &[f64], cover: &Cover, graph: &NeighborhoodGraph) -> Result<Vec<CoverElement>, MapperError> {
    if values.len() != graph.n_points() {
        return Err(MapperError::LengthMismatch {
            expected: graph.n_points(),
            actual: values.len(),
        });
    }
    let mut buckets = vec![Vec::new(); cover.len()];
    for (p, &v) in values.iter().enumerate() {
        for i in cover.locate(v) {
            buckets[i].push(p);
        }
    }
    Ok(buckets
        .par_iter()
        .enumerate()
        .flat_map_iter(|(i, subset)| {
            graph
                .components(subset)
                .into_iter()
                .map(move |c| CoverElement::new(Origin::Interval(i), c))
        })
        .collect())
}

/// Decomposes each rectangle's preimage into components.
pub fn bivariate_pullback(
    values_a: &[f64],
    values_b: &[f64],
    product: &ProductCover,
    graph: &NeighborhoodGraph,
) -> Result<Vec<CoverElement>, MapperError> {
    for values in [values_a, values_b] {
        if values.len() != graph.n_points() {
            return Err(MapperError::LengthMismatch {
                expected: graph.n_points(),
                actual: values.len(),
            });
        }
    }
    let m = product.second.len();
    let mut buckets = vec![Vec::new(); product.cell_count()];
    for (p, (&a, &b)) in values_a.iter().zip(values_b).enumerate() {
        for (i, j) in product.locate(a, b) {
            buckets[i * m + j].push(p);
        }
    }
    Ok(buckets
        .par_iter()
        .enumerate()
        .flat_map_iter(|(cell, subset)| {
            let origin = Origin::Cell(cell / m, cell % m);
            graph
                .components(subset)
                .into_iter()
                .map(move |c| CoverElement::new(origin, c))
        })
        .collect())
}

/// Nerve of a family of cover elements, truncated at `max_dim`.
///
/// Every simplex of a nerve is witnessed by a point lying in all of its
/// vertices, so the simplices are exactly the subsets (of size at most
/// `max_dim + 1`) of the elements containing each point.
pub fn nerve(elements: Vec<CoverElement>, max_dim: usize) -> MapperComplex {
    let n_points = elements
        .iter()
        .filter_map(|e| e.members.last())
        .max()
        .map_or(0, |&m| m + 1);
    nerve_with(elements, max_dim, n_points, Vec::new())
}

fn nerve_with(elements: Vec<CoverElement>, max_dim: usize, n_points: usize, lenses: Vec<Arc<Lens>>) -> MapperComplex {
    let (mut complex, _) = MapperComplex::from_parts(elements, Vec::new(), max_dim, n_points, lenses);
    let mut incidence: Vec<Vec<usize>> = vec![Vec::new(); n_points];
    for (v, e) in complex.vertices.iter().enumerate() {
        for &p in &e.members {
            incidence[p].push(v);
        }
    }
    let mut simplices = BTreeSet::new();
    for v in 0..complex.vertices.len() {
        simplices.insert(vec![v]);
    }
    let mut seen: BTreeSet<&[usize]> = BTreeSet::new();
    for star in &incidence {
        if star.len() < 2 || !seen.insert(star.as_slice()) {
            continue;
        }
        for_each_subset(star, max_dim + 1, |s| {
            if s.len() >= 2 {
                simplices.insert(s.to_vec());
            }
        });
    }
    complex.simplices = simplices;
    complex
}

/// Calls `f` on every nonempty subset of `items` with at most `max_len`
/// elements, preserving order.
pub(crate) fn for_each_subset(items: &[usize], max_len: usize, mut f: impl FnMut(&[usize])) {
    fn rec(items: &[usize], start: usize, max_len: usize, buf: &mut Vec<usize>, f: &mut dyn FnMut(&[usize])) {
        for i in start..items.len() {
            buf.push(items[i]);
            f(buf);
            if buf.len() < max_len {
                rec(items, i + 1, max_len, buf, f);
            }
            buf.pop();
        }
    }
    rec(items, 0, max_len, &mut Vec::new(), &mut f);
}

/// Univariate mapper `M(f, U)` from precomputed filter values.
pub fn build_mapper_from_values(
    label: impl Into<String>,
    values: Vec<f64>,
    cover: &Cover,
    graph: &NeighborhoodGraph,
    max_dim: usize,
) -> Result<MapperComplex, MapperError> {
    if max_dim == 0 {
        return Err(MapperError::ZeroMaxDim);
    }
    let elements = pullback(&values, cover, graph)?;
    let lens = Arc::new(Lens {
        label: label.into(),
        values,
        cover: cover.clone(),
    });
    Ok(nerve_with(elements, max_dim, graph.n_points(), vec![lens]))
}

/// Univariate mapper `M(f, U)`.
pub fn build_mapper(
    cloud: &PointCloud,
    filter: &FilterFunction,
    cover: &Cover,
    graph: &NeighborhoodGraph,
    max_dim: usize,
) -> Result<MapperComplex, MapperError> {
    let values = cloud.evaluate(filter)?;
    build_mapper_from_values(filter.label.clone(), values, cover, graph, max_dim)
}

/// Bivariate mapper `M((f, g), U × V)` built directly from rectangles.
pub fn build_bivariate_mapper(
    cloud: &PointCloud,
    filter_a: &FilterFunction,
    filter_b: &FilterFunction,
    product: &ProductCover,
    graph: &NeighborhoodGraph,
    max_dim: usize,
) -> Result<MapperComplex, MapperError> {
    let a = cloud.evaluate(filter_a)?;
    let b = cloud.evaluate(filter_b)?;
    let lens_a = Arc::new(Lens {
        label: filter_a.label.clone(),
        values: a,
        cover: product.first.clone(),
    });
    let lens_b = Arc::new(Lens {
        label: filter_b.label.clone(),
        values: b,
        cover: product.second.clone(),
    });
    build_bivariate_from_lenses(lens_a, lens_b, graph, max_dim)
}

/// Bivariate mapper from two lenses (for instance those of two univariate
/// mappers).
pub fn build_bivariate_from_lenses(
    first: Arc<Lens>,
    second: Arc<Lens>,
    graph: &NeighborhoodGraph,
    max_dim: usize,
) -> Result<MapperComplex, MapperError> {
    if max_dim == 0 {
        return Err(MapperError::ZeroMaxDim);
    }
    let product = ProductCover::new(first.cover.clone(), second.cover.clone());
    let elements = bivariate_pullback(&first.values, &second.values, &product, graph)?;
    Ok(nerve_with(elements, max_dim, graph.n_points(), vec![first, second]))
}
