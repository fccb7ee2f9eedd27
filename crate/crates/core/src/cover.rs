//! Uniform overlapping interval covers and their products.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Half-width used when all filter values coincide.
pub const DEGENERATE_HALF_WIDTH: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum CoverError {
    #[error("cannot cover an empty set of values")]
    Empty,
    #[error("filter values must be finite")]
    NonFinite,
    #[error("resolution must be at least 1")]
    ZeroResolution,
    #[error("overlap out of range")]
    OverlapOutOfRange,
}

/// A closed interval `[lo, hi]` at position `index` of its cover.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub index: usize,
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn contains(&self, value: f64) -> bool {
        self.lo <= value && value <= self.hi
    }

    pub fn length(&self) -> f64 {
        self.hi - self.lo
    }
}

/// `n` closed intervals of common length `ℓ` whose consecutive members
/// overlap by `p·ℓ`, spanning `[min, max]` of the filter values.
///
/// With range `R`, `ℓ = R / (n − (n−1)·p)` and interval `i` starts at
/// `min + i·(1−p)·ℓ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cover {
    intervals: Vec<Interval>,
    overlap: f64,
    range: (f64, f64),
    length: f64,
}

impl Cover {
    pub fn build(values: &[f64], resolution: usize, overlap: f64) -> Result<Self, CoverError> {
        let (min, max) = values
            .iter()
            .try_fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                v.is_finite().then(|| (lo.min(v), hi.max(v)))
            })
            .ok_or(CoverError::NonFinite)?;
        if values.is_empty() {
            return Err(CoverError::Empty);
        }
        Self::over_range(min, max, resolution, overlap)
    }

    /// Builds the cover of `[min, max]` directly.
    pub fn over_range(min: f64, max: f64, resolution: usize, overlap: f64) -> Result<Self, CoverError> {
        if resolution == 0 {
            return Err(CoverError::ZeroResolution);
        }
        if !(0.0..1.0).contains(&overlap) {
            return Err(CoverError::OverlapOutOfRange);
        }
        if !(min.is_finite() && max.is_finite()) || min > max {
            return Err(CoverError::NonFinite);
        }
        if max == min {
            let lo = min - DEGENERATE_HALF_WIDTH;
            let hi = min + DEGENERATE_HALF_WIDTH;
            return Ok(Self {
                intervals: vec![Interval { index: 0, lo, hi }],
                overlap,
                range: (min, max),
                length: hi - lo,
            });
        }
        let n = resolution as f64;
        let length = (max - min) / (n - (n - 1.0) * overlap);
        let step = (1.0 - overlap) * length;
        let mut intervals: Vec<Interval> = (0..resolution)
            .map(|i| {
                let lo = min + i as f64 * step;
                Interval {
                    index: i,
                    lo,
                    hi: lo + length,
                }
            })
            .collect();
        // absorb rounding so the top of the range is always covered
        if let Some(last) = intervals.last_mut() {
            last.hi = last.hi.max(max);
        }
        Ok(Self {
            intervals,
            overlap,
            range: (min, max),
            length,
        })
    }

    pub fn intervals(&self) -> &[Interval] {
        &self.intervals
    }

    pub fn interval(&self, index: usize) -> Option<&Interval> {
        self.intervals.get(index)
    }

    /// Number of intervals actually built (1 for a degenerate range).
    pub fn len(&self) -> usize {
        self.intervals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn overlap(&self) -> f64 {
        self.overlap
    }

    pub fn range(&self) -> (f64, f64) {
        self.range
    }

    /// Common interval length `ℓ`.
    pub fn length(&self) -> f64 {
        self.length
    }

    /// Indices of every interval containing `value` (closed at both ends).
    pub fn locate(&self, value: f64) -> Vec<usize> {
        self.intervals
            .iter()
            .filter(|iv| iv.contains(value))
            .map(|iv| iv.index)
            .collect()
    }
}

/// The rectangles `U_i × V_j` of two covers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductCover {
    pub first: Cover,
    pub second: Cover,
}

impl ProductCover {
    pub fn new(first: Cover, second: Cover) -> Self {
        Self { first, second }
    }

    /// Every index pair `(i, j)`, row-major in the first factor.
    pub fn cells(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let m = self.second.len();
        (0..self.first.len()).flat_map(move |i| (0..m).map(move |j| (i, j)))
    }

    pub fn cell_count(&self) -> usize {
        self.first.len() * self.second.len()
    }

    pub fn cell(&self, i: usize, j: usize) -> Option<(Interval, Interval)> {
        Some((*self.first.interval(i)?, *self.second.interval(j)?))
    }

    /// Cells containing the point `(a, b)`.
    pub fn locate(&self, a: f64, b: f64) -> Vec<(usize, usize)> {
        let second = self.second.locate(b);
        self.first
            .locate(a)
            .into_iter()
            .flat_map(|i| second.iter().map(move |&j| (i, j)))
            .collect()
    }
}
