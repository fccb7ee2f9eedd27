//! Stitching two univariate mappers into a bivariate mapper.
//!
//! [`compose`] runs three phases over `M(f, U)` and `M(g, V)`:
//!
//! * **stitch**, per interval `U_i` of the first cover: every vertex `v` of
//!   the second mapper that reaches into `U_i` is replaced by the components
//!   of `μ(u) ∩ μ(v)` for the first-mapper vertices `u` of `U_i`, and the
//!   simplices of the second mapper among those `v` are lifted onto the
//!   replacements;
//! * **fix**: simplices of the first mapper are lifted onto composed
//!   elements, which adds the simplices crossing intervals;
//! * **complete**: higher simplices whose facets are all present are added
//!   when their vertices share a point.
//!
//! Each phase only keeps candidates that pass the nerve condition. The
//! result is the nerve of the composed cover, which equals the bivariate
//! mapper built directly from rectangles; [`verify_equivalence`] checks that.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::mapper::{have_common_point, CoverElement, MapperComplex, NeighborhoodGraph, Origin, Simplex};

#[derive(Debug, Error, PartialEq)]
pub enum CompositionError {
    #[error("mappers are built over different clouds ({first} vs {second} points)")]
    MismatchedClouds { first: usize, second: usize },
    #[error("neighborhood graph has {graph} points but the mappers have {mappers}")]
    GraphSize { graph: usize, mappers: usize },
    #[error("vertex {vertex} of the {which} mapper is not connected in the neighborhood graph")]
    InconsistentGraph { which: &'static str, vertex: usize },
    #[error("the {0} mapper carries no filter values")]
    MissingLens(&'static str),
    #[error("interval {0} is not in the first mapper's cover")]
    BadInterval(usize),
    #[error("max_dim must be at least 1")]
    ZeroMaxDim,
    #[error("composed element {element} (interval {interval}) is contained in {found} first-mapper vertices of its interval, expected exactly one")]
    ContainingVertex {
        element: usize,
        interval: usize,
        found: usize,
    },
}

/// A composed cover element together with the first-mapper vertex `u` and
/// second-mapper vertex `v` it was cut from.
#[derive(Debug, Clone, PartialEq)]
pub struct ComposedElement {
    pub element: CoverElement,
    pub first: usize,
    pub second: usize,
}

/// Output of the stitch phase for one interval of the first cover.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalStitch {
    pub interval: usize,
    /// Second-mapper vertices reaching into the interval.
    pub replaced: Vec<usize>,
    pub elements: Vec<ComposedElement>,
    /// Simplices over `elements` (local indices), including 0-simplices.
    pub simplices: BTreeSet<Simplex>,
    pub checks_performed: usize,
    pub edge_checks: usize,
}

/// Composed elements and simplices accumulated so far.
#[derive(Debug, Clone, PartialEq)]
pub struct PartialComposition {
    pub elements: Vec<ComposedElement>,
    pub simplices: BTreeSet<Simplex>,
    pub max_dim: usize,
}

impl PartialComposition {
    /// Concatenates per-interval stitches in interval order.
    pub fn from_stitches(stitches: &[IntervalStitch], max_dim: usize) -> Self {
        let mut elements = Vec::new();
        let mut simplices = BTreeSet::new();
        for stitch in stitches {
            let offset = elements.len();
            elements.extend(stitch.elements.iter().cloned());
            simplices.extend(
                stitch
                    .simplices
                    .iter()
                    .map(|s| s.iter().map(|v| v + offset).collect::<Simplex>()),
            );
        }
        Self {
            elements,
            simplices,
            max_dim,
        }
    }

    fn members(&self, index: usize) -> &[usize] {
        &self.elements[index].element.members
    }

    fn satisfies_nerve(&self, simplex: &[usize]) -> bool {
        let sets: Vec<&[usize]> = simplex.iter().map(|&v| self.members(v)).collect();
        have_common_point(&sets)
    }

    /// Element indices grouped by the first-mapper vertex they were cut from.
    fn by_first(&self, n_first: usize) -> Vec<Vec<usize>> {
        let mut groups = vec![Vec::new(); n_first];
        for (i, e) in self.elements.iter().enumerate() {
            groups[e.first].push(i);
        }
        groups
    }
}

/// Simplices added by each phase, for one interval of the first cover.
/// Vertex indices refer to the final composed complex.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntervalTrace {
    pub interval: usize,
    pub replaced_vertices: Vec<usize>,
    pub elements: Vec<usize>,
    pub stitch_added: Vec<Simplex>,
    pub fix_added: Vec<Simplex>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompleteRound {
    pub dim: usize,
    pub added: Vec<Simplex>,
}

/// What each phase of [`compose`] contributed.
///
/// `checks_performed` counts explicit intersection tests;
/// `checks_avoided` counts vertex pairs of the composed cover that a naive
/// nerve would have tested but the composition never had to.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct CompositionTrace {
    pub intervals: Vec<IntervalTrace>,
    pub complete_rounds: Vec<CompleteRound>,
    pub checks_performed: usize,
    pub checks_avoided: usize,
}

impl CompositionTrace {
    pub fn stitch_simplices(&self) -> impl Iterator<Item = &Simplex> {
        self.intervals.iter().flat_map(|t| &t.stitch_added)
    }

    pub fn fix_simplices(&self) -> impl Iterator<Item = &Simplex> {
        self.intervals.iter().flat_map(|t| &t.fix_added)
    }

    pub fn complete_simplices(&self) -> impl Iterator<Item = &Simplex> {
        self.complete_rounds.iter().flat_map(|r| &r.added)
    }

    /// The composed complex as it stood after lifting the first mapper's
    /// simplices and before completion.
    pub fn before_complete(&self, composed: &MapperComplex) -> MapperComplex {
        let simplices = self.stitch_simplices().chain(self.fix_simplices()).cloned().collect();
        composed.subcomplex(&simplices)
    }

    /// The composed complex right after the stitch phase.
    pub fn after_stitch(&self, composed: &MapperComplex) -> MapperComplex {
        composed.subcomplex(&self.stitch_simplices().cloned().collect())
    }
}

fn sorted_intersection(a: &[usize], b: &[usize]) -> Vec<usize> {
    let (mut i, mut j) = (0, 0);
    let mut out = Vec::new();
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                out.push(a[i]);
                i += 1;
                j += 1;
            }
        }
    }
    out
}

/// Calls `f` with one pick from each list, for every combination.
fn for_each_choice(lists: &[&[usize]], f: &mut dyn FnMut(&[usize])) {
    fn rec(lists: &[&[usize]], buf: &mut Vec<usize>, f: &mut dyn FnMut(&[usize])) {
        match lists.split_first() {
            None => f(buf),
            Some((head, rest)) => {
                for &x in *head {
                    buf.push(x);
                    rec(rest, buf, f);
                    buf.pop();
                }
            }
        }
    }
    rec(lists, &mut Vec::with_capacity(lists.len()), f);
}

/// The stitch phase for interval `interval` of the first mapper's cover.
///
/// The first-mapper vertices of the interval are those built from it. A
/// second-mapper vertex takes part when some of its points have first-filter
/// values in the interval; it is replaced by the components of its overlap
/// with each first-mapper vertex of the interval. A simplex of the second
/// mapper is lifted over every choice of replacements, keeping the choices
/// whose member sets share a point. Choices mixing different first-mapper
/// vertices are disjoint and skipped without a check.
pub fn stitch_interval(
    interval: usize,
    mf: &MapperComplex,
    mg: &MapperComplex,
    graph: &NeighborhoodGraph,
) -> Result<IntervalStitch, CompositionError> {
    let lens = mf.lenses().first().ok_or(CompositionError::MissingLens("first"))?;
    let range = *lens
        .cover
        .interval(interval)
        .ok_or(CompositionError::BadInterval(interval))?;
    let f = &lens.values;

    let us: Vec<usize> = (0..mf.vertex_count())
        .filter(|&u| mf.vertex(u).origin.first() == interval)
        .collect();
    let vs: Vec<usize> = (0..mg.vertex_count())
        .filter(|&v| mg.vertex(v).members.iter().any(|&p| range.contains(f[p])))
        .collect();

    let mut elements = Vec::new();
    // second-mapper vertex -> first-mapper vertex -> element indices
    let mut pieces: BTreeMap<usize, BTreeMap<usize, Vec<usize>>> = BTreeMap::new();
    for &v in &vs {
        let mv = &mg.vertex(v).members;
        let j = mg.vertex(v).origin.first();
        for &u in &us {
            let common = sorted_intersection(&mf.vertex(u).members, mv);
            if common.is_empty() {
                continue;
            }
            for component in graph.components(&common) {
                pieces.entry(v).or_default().entry(u).or_default().push(elements.len());
                elements.push(ComposedElement {
                    element: CoverElement::new(Origin::Cell(interval, j), component),
                    first: u,
                    second: v,
                });
            }
        }
    }

    let vs_set: BTreeSet<usize> = vs.iter().copied().collect();
    let mut simplices = BTreeSet::new();
    let mut checks_performed = 0;
    let mut edge_checks = 0;
    let empty = BTreeMap::new();
    for sigma in mg.simplices() {
        if !sigma.iter().all(|v| vs_set.contains(v)) {
            continue;
        }
        for &u in &us {
            let lists: Option<Vec<&[usize]>> = sigma
                .iter()
                .map(|v| pieces.get(v).unwrap_or(&empty).get(&u).map(Vec::as_slice))
                .collect();
            let Some(lists) = lists else { continue };
            for_each_choice(&lists, &mut |choice| {
                if choice.len() > 1 {
                    checks_performed += 1;
                    if choice.len() == 2 {
                        edge_checks += 1;
                    }
                    let sets: Vec<&[usize]> = choice.iter().map(|&w| elements[w].element.members.as_slice()).collect();
                    if !have_common_point(&sets) {
                        return;
                    }
                }
                let mut s = choice.to_vec();
                s.sort_unstable();
                simplices.insert(s);
            });
        }
    }

    Ok(IntervalStitch {
        interval,
        replaced: vs,
        elements,
        simplices,
        checks_performed,
        edge_checks,
    })
}

/// Per-interval simplices added while lifting the first mapper, plus check
/// counters.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FixOutcome {
    pub added: BTreeMap<usize, Vec<Simplex>>,
    pub checks_performed: usize,
    pub edge_checks: usize,
}

/// First stage of the fix phase: for each composed element `W`, find the
/// first-mapper vertex `u` of its interval with `W ⊆ μ(u)` (it must be
/// unique), and lift every simplex of the first mapper containing `u`:
/// `u` becomes `W` and each other vertex `u'` becomes an element cut from
/// `u'`. Lifts whose member sets share a point are added.
pub fn fix_cross_interval(
    partial: &mut PartialComposition,
    mf: &MapperComplex,
) -> Result<FixOutcome, CompositionError> {
    let mut cofaces: Vec<Vec<&Simplex>> = vec![Vec::new(); mf.vertex_count()];
    for s in mf
        .simplices()
        .iter()
        .filter(|s| s.len() >= 2 && s.len() <= partial.max_dim + 1)
    {
        for &u in s {
            cofaces[u].push(s);
        }
    }
    let by_first = partial.by_first(mf.vertex_count());
    let mut outcome = FixOutcome::default();
    let mut rejected: HashSet<Simplex> = HashSet::new();

    for w in 0..partial.elements.len() {
        let element = &partial.elements[w].element;
        let interval = element.origin.first();
        let containing: Vec<usize> = (0..mf.vertex_count())
            .filter(|&u| mf.vertex(u).origin.first() == interval && element.is_subset_of(mf.vertex(u)))
            .collect();
        let &[u] = containing.as_slice() else {
            return Err(CompositionError::ContainingVertex {
                element: w,
                interval,
                found: containing.len(),
            });
        };
        for sigma in &cofaces[u] {
            let others: Vec<&[usize]> = sigma
                .iter()
                .filter(|&&x| x != u)
                .map(|&x| by_first[x].as_slice())
                .collect();
            let mut found = Vec::new();
            for_each_choice(&others, &mut |choice| {
                let mut candidate: Simplex = choice.to_vec();
                candidate.push(w);
                candidate.sort_unstable();
                if partial.simplices.contains(&candidate) || rejected.contains(&candidate) {
                    return;
                }
                outcome.checks_performed += 1;
                if candidate.len() == 2 {
                    outcome.edge_checks += 1;
                }
                if partial.satisfies_nerve(&candidate) {
                    found.push(candidate);
                } else {
                    rejected.insert(candidate);
                }
            });
            for candidate in found {
                if partial.simplices.insert(candidate.clone()) {
                    outcome.added.entry(interval).or_default().push(candidate);
                }
            }
        }
    }
    Ok(outcome)
}

/// Adds, for each dimension `d = 2..=max_dim` in turn, every `(d+1)`-vertex
/// set all of whose facets are present and whose members share a point.
///
/// Candidates are generated from the existing `(d−1)`-simplices and the
/// 1-skeleton, so only sets with every facet present reach the explicit
/// intersection test. Returns the rounds and the number of tests run.
fn complete_in_place(
    simplices: &mut BTreeSet<Simplex>,
    members: &[&[usize]],
    max_dim: usize,
) -> (Vec<CompleteRound>, usize) {
    let mut upper: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();
    for s in simplices.iter().filter(|s| s.len() == 2) {
        upper.entry(s[0]).or_default().insert(s[1]);
    }
    let mut rounds = Vec::new();
    let mut checks = 0;
    for dim in 2..=max_dim {
        let mut added = Vec::new();
        for face in simplices.iter().filter(|s| s.len() == dim) {
            let last = *face.last().expect("faces are nonempty");
            let Some(next) = upper.get(&last) else { continue };
            for &x in next {
                let adjacent = face[..dim - 1]
                    .iter()
                    .all(|v| upper.get(v).is_some_and(|n| n.contains(&x)));
                if !adjacent {
                    continue;
                }
                let mut candidate = face.clone();
                candidate.push(x);
                if simplices.contains(&candidate) {
                    continue;
                }
                let facets_present = (0..dim).all(|skip| {
                    let facet: Simplex = candidate
                        .iter()
                        .enumerate()
                        .filter(|&(k, _)| k != skip)
                        .map(|(_, &v)| v)
                        .collect();
                    simplices.contains(&facet)
                });
                if !facets_present {
                    continue;
                }
                checks += 1;
                let sets: Vec<&[usize]> = candidate.iter().map(|&v| members[v]).collect();
                if have_common_point(&sets) {
                    added.push(candidate);
                }
            }
        }
        simplices.extend(added.iter().cloned());
        rounds.push(CompleteRound { dim, added });
    }
    (rounds, checks)
}

/// Completion of a complex up to `max_dim`, gated by the nerve condition.
pub fn complete(complex: &MapperComplex, max_dim: usize) -> (MapperComplex, Vec<CompleteRound>) {
    let mut simplices = complex.simplices().clone();
    let members: Vec<&[usize]> = complex.vertices().iter().map(|v| v.members.as_slice()).collect();
    let (rounds, _) = complete_in_place(&mut simplices, &members, max_dim);
    let (out, _) = MapperComplex::from_parts(
        complex.vertices().to_vec(),
        simplices,
        complex.max_dim().max(max_dim),
        complex.n_points(),
        complex.lenses().to_vec(),
    );
    (out, rounds)
}

/// The full fix phase: lifts the first mapper's simplices, then completes.
pub fn fix(
    partial: &mut PartialComposition,
    mf: &MapperComplex,
) -> Result<(FixOutcome, Vec<CompleteRound>, usize), CompositionError> {
    let outcome = fix_cross_interval(partial, mf)?;
    let members: Vec<&[usize]> = partial.elements.iter().map(|e| e.element.members.as_slice()).collect();
    let (rounds, checks) = complete_in_place(&mut partial.simplices, &members, partial.max_dim);
    Ok((outcome, rounds, checks))
}

fn check_inputs(
    mf: &MapperComplex,
    mg: &MapperComplex,
    graph: &NeighborhoodGraph,
    max_dim: usize,
) -> Result<(), CompositionError> {
    if max_dim == 0 {
        return Err(CompositionError::ZeroMaxDim);
    }
    if mf.n_points() != mg.n_points() {
        return Err(CompositionError::MismatchedClouds {
            first: mf.n_points(),
            second: mg.n_points(),
        });
    }
    if graph.n_points() != mf.n_points() {
        return Err(CompositionError::GraphSize {
            graph: graph.n_points(),
            mappers: mf.n_points(),
        });
    }
    if mf.lenses().is_empty() {
        return Err(CompositionError::MissingLens("first"));
    }
    if mg.lenses().is_empty() {
        return Err(CompositionError::MissingLens("second"));
    }
    for (which, m) in [("first", mf), ("second", mg)] {
        if let Some(vertex) = (0..m.vertex_count()).find(|&v| graph.components(&m.vertex(v).members).len() != 1) {
            return Err(CompositionError::InconsistentGraph { which, vertex });
        }
    }
    Ok(())
}

/// Stitches `mg` onto `mf`, returning the composed bivariate mapper (with
/// origins `(i, j)` indexing the first and second covers) and a trace of
/// what each phase added.
pub fn compose(
    mf: &MapperComplex,
    mg: &MapperComplex,
    graph: &NeighborhoodGraph,
    max_dim: usize,
) -> Result<(MapperComplex, CompositionTrace), CompositionError> {
    check_inputs(mf, mg, graph, max_dim)?;
    let n_intervals = mf.lenses()[0].cover.len();
    let stitches = (0..n_intervals)
        .into_par_iter()
        .map(|i| stitch_interval(i, mf, mg, graph))
        .collect::<Result<Vec<_>, _>>()?;

    let mut partial = PartialComposition::from_stitches(&stitches, max_dim);
    let (outcome, rounds, complete_checks) = fix(&mut partial, mf)?;

    let n_elements = partial.elements.len();
    let lenses = vec![mf.lenses()[0].clone(), mg.lenses()[0].clone()];
    let (complex, remap) = MapperComplex::from_parts(
        partial.elements.into_iter().map(|e| e.element).collect(),
        partial.simplices,
        max_dim,
        mf.n_points(),
        lenses,
    );
    let canon = |s: &Simplex| -> Simplex {
        let mut out: Simplex = s.iter().map(|&v| remap[v]).collect();
        out.sort_unstable();
        out
    };

    let mut offset = 0;
    let mut intervals = Vec::with_capacity(stitches.len());
    for stitch in &stitches {
        let shifted = |s: &Simplex| canon(&s.iter().map(|v| v + offset).collect());
        intervals.push(IntervalTrace {
            interval: stitch.interval,
            replaced_vertices: stitch.replaced.clone(),
            elements: (offset..offset + stitch.elements.len()).map(|v| remap[v]).collect(),
            stitch_added: stitch.simplices.iter().map(shifted).collect(),
            fix_added: outcome
                .added
                .get(&stitch.interval)
                .map(|list| list.iter().map(canon).collect())
                .unwrap_or_default(),
        });
        offset += stitch.elements.len();
    }
    let complete_rounds = rounds
        .into_iter()
        .map(|r| CompleteRound {
            dim: r.dim,
            added: r.added.iter().map(canon).collect(),
        })
        .collect();

    let edge_checks = stitches.iter().map(|s| s.edge_checks).sum::<usize>() + outcome.edge_checks;
    let naive_pairs = n_elements * n_elements.saturating_sub(1) / 2;
    let trace = CompositionTrace {
        intervals,
        complete_rounds,
        checks_performed: stitches.iter().map(|s| s.checks_performed).sum::<usize>()
            + outcome.checks_performed
            + complete_checks,
        checks_avoided: naive_pairs.saturating_sub(edge_checks),
    };
    Ok((complex, trace))
}

/// A simplex named by its cover elements rather than vertex indices.
pub type CanonicalSimplex = Vec<CoverElement>;

/// Simplices present in one complex and not the other.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct DiffReport {
    /// In the direct complex, absent from the composed one.
    pub missing: Vec<CanonicalSimplex>,
    /// In the composed complex, absent from the direct one.
    pub extra: Vec<CanonicalSimplex>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Equivalence {
    Equal,
    Different(DiffReport),
}

impl Equivalence {
    pub fn is_equal(&self) -> bool {
        matches!(self, Equivalence::Equal)
    }
}

pub fn canonical_simplices(complex: &MapperComplex) -> BTreeSet<CanonicalSimplex> {
    complex
        .simplices()
        .iter()
        .map(|s| s.iter().map(|&v| complex.vertex(v).clone()).collect())
        .collect()
}

/// Compares two complexes by their canonical vertices and simplices.
pub fn verify_equivalence(composed: &MapperComplex, direct: &MapperComplex) -> Equivalence {
    let a = canonical_simplices(composed);
    let b = canonical_simplices(direct);
    if a == b {
        return Equivalence::Equal;
    }
    Equivalence::Different(DiffReport {
        missing: b.difference(&a).cloned().collect(),
        extra: a.difference(&b).cloned().collect(),
    })
}
