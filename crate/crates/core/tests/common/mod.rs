//! Randomized corpus shared by the integration suites.

#![allow(dead_code)]

use std::collections::BTreeSet;

use mapper_stitch::mapper::{build_bivariate_from_lenses, build_mapper_from_values};
use mapper_stitch::{compose, CompositionTrace, Cover, MapperComplex, NeighborhoodGraph, PointCloud};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const CORPUS_SEEDS: std::ops::Range<u64> = 0..120;
pub const MAX_DIM: usize = 3;

/// One randomized composition problem.
pub struct Case {
    pub seed: u64,
    pub cloud: PointCloud,
    pub graph: NeighborhoodGraph,
    pub mf: MapperComplex,
    pub mg: MapperComplex,
    pub params: String,
}

impl Case {
    pub fn compose(&self) -> (MapperComplex, CompositionTrace) {
        compose(&self.mf, &self.mg, &self.graph, MAX_DIM).expect("composition succeeds")
    }

    pub fn direct(&self) -> MapperComplex {
        build_bivariate_from_lenses(
            self.mf.lenses()[0].clone(),
            self.mg.lenses()[0].clone(),
            &self.graph,
            MAX_DIM,
        )
        .expect("direct construction succeeds")
    }
}

/// Up to 60 points in 2 or 3 dimensions: uniform in a box, noisy rings or
/// a few blobs. Filters are random linear projections; `n ∈ [2, 5]` and
/// `p ∈ [0.1, 0.4]` per filter; `ε` spans sparse to dense graphs.
pub fn case(seed: u64) -> Case {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = rng.random_range(2..=3);
    let n = rng.random_range(8..=60);
    let points: Vec<Vec<f64>> = match rng.random_range(0..3) {
        0 => (0..n)
            .map(|_| (0..dim).map(|_| rng.random_range(0.0..1.0)).collect())
            .collect(),
        1 => (0..n)
            .map(|_| {
                let t = rng.random_range(0.0..std::f64::consts::TAU);
                let r = 0.5 + rng.random_range(-0.05..0.05);
                let mut p = vec![0.5 + r * t.cos(), 0.5 + r * t.sin()];
                if dim == 3 {
                    p.push(rng.random_range(0.0..1.0));
                }
                p
            })
            .collect(),
        _ => {
            let centers: Vec<Vec<f64>> = (0..rng.random_range(2..=4))
                .map(|_| (0..dim).map(|_| rng.random_range(0.0..1.0)).collect())
                .collect();
            (0..n)
                .map(|_| {
                    let c = &centers[rng.random_range(0..centers.len())];
                    c.iter().map(|v| v + rng.random_range(-0.12..0.12)).collect()
                })
                .collect()
        }
    };
    let cloud = PointCloud::new(points).unwrap();
    let epsilon = rng.random_range(0.08..0.45);
    let graph = NeighborhoodGraph::build(&cloud, epsilon).unwrap();

    let projection = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        let w: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        cloud
            .points()
            .iter()
            .map(|p| p.iter().zip(&w).map(|(a, b)| a * b).sum())
            .collect()
    };
    let f = projection(&mut rng);
    let g = projection(&mut rng);
    let (nf, pf) = (rng.random_range(2..=5), rng.random_range(0.1..=0.4));
    let (ng, pg) = (rng.random_range(2..=5), rng.random_range(0.1..=0.4));
    let cf = Cover::build(&f, nf, pf).unwrap();
    let cg = Cover::build(&g, ng, pg).unwrap();
    let mf = build_mapper_from_values("f", f, &cf, &graph, MAX_DIM).unwrap();
    let mg = build_mapper_from_values("g", g, &cg, &graph, MAX_DIM).unwrap();
    Case {
        seed,
        params: format!("seed={seed} points={n} dim={dim} eps={epsilon:.3} f=({nf},{pf:.2}) g=({ng},{pg:.2})"),
        cloud,
        graph,
        mf,
        mg,
    }
}

/// β₀ and β₁ over ℤ/2 by dense Gaussian elimination on explicit boundary
/// matrices (independent of the library's union-find and bitset code).
pub fn dense_betti(complex: &MapperComplex) -> (usize, usize) {
    let rank = |dim: usize| -> usize {
        let rows: Vec<&Vec<usize>> = complex.simplices_of_dim(dim - 1).collect();
        let mut matrix: Vec<Vec<bool>> = complex
            .simplices_of_dim(dim)
            .map(|s| rows.iter().map(|r| r.iter().all(|v| s.contains(v))).collect())
            .collect();
        let mut rank = 0;
        let width = rows.len();
        for col in 0..width {
            let Some(pivot) = (rank..matrix.len()).find(|&r| matrix[r][col]) else {
                continue;
            };
            matrix.swap(rank, pivot);
            let pivot_row = matrix[rank].clone();
            for (r, row) in matrix.iter_mut().enumerate() {
                if r != rank && row[col] {
                    row.iter_mut().zip(&pivot_row).for_each(|(a, b)| *a ^= b);
                }
            }
            rank += 1;
        }
        rank
    };
    let v = complex.count_of_dim(0);
    let e = complex.count_of_dim(1);
    let r1 = rank(1);
    let r2 = rank(2);
    (v - r1, e - r1 - r2)
}

/// Whether every simplex's cover elements share a point.
pub fn nerve_holds(complex: &MapperComplex) -> bool {
    complex.simplices().iter().all(|s| {
        let common: BTreeSet<usize> = s
            .iter()
            .map(|&v| complex.vertex(v).members.iter().copied().collect::<BTreeSet<_>>())
            .reduce(|a, b| a.intersection(&b).copied().collect())
            .unwrap_or_default();
        !common.is_empty()
    })
}
