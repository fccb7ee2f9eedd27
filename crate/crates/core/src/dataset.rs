//! Point clouds, synthetic shapes and filter functions.
//!
//! A [`PointCloud`] is an immutable table: every point has a coordinate vector
//! of the same dimension, and any number of named real-valued attribute
//! columns ride along with it. Point order is fixed at construction and the
//! point index is used as the stable identity everywhere downstream.

use std::f64::consts::PI;
use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Radii of the inner and outer circle of [`Shape::TwoCircles`].
pub const TWO_CIRCLES_RADII: (f64, f64) = (1.0, 3.0);
/// Radius of the cylinder and half-cylinder shapes.
pub const CYLINDER_RADIUS: f64 = 1.0;
/// Height of the cylinder and half-cylinder shapes, centered on `z = 0`.
pub const CYLINDER_HEIGHT: f64 = 4.0;
/// Radius of the sphere shape.
pub const SPHERE_RADIUS: f64 = 1.0;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("row {row}, column `{column}`: cannot parse `{value}` as a finite number")]
    BadCell { row: usize, column: String, value: String },
    #[error("unknown shape `{0}`")]
    UnknownShape(String),
    #[error("shapes need at least 10 points, got {0}")]
    TooFewPoints(usize),
    #[error("noise must be finite and non-negative, got {0}")]
    BadNoise(f64),
    #[error("axis {axis} out of range for {dim}-dimensional points")]
    AxisOutOfRange { axis: usize, dim: usize },
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("point cloud is empty")]
    Empty,
    #[error("invalid point cloud: {0}")]
    Invalid(String),
}

/// An immutable point cloud with optional named attribute columns.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    dim: usize,
    points: Vec<Vec<f64>>,
    columns: Vec<(String, Vec<f64>)>,
}

impl PointCloud {
    /// Builds a cloud from coordinate vectors, checking that every point has
    /// the same dimension and that every value is finite.
    pub fn new(points: Vec<Vec<f64>>) -> Result<Self, DatasetError> {
        Self::with_columns(points, Vec::new())
    }

    pub fn with_columns(points: Vec<Vec<f64>>, columns: Vec<(String, Vec<f64>)>) -> Result<Self, DatasetError> {
        let dim = points.first().map(Vec::len).ok_or(DatasetError::Empty)?;
        if dim == 0 {
            return Err(DatasetError::Invalid("points must have dimension >= 1".into()));
        }
        for (i, p) in points.iter().enumerate() {
            if p.len() != dim {
                return Err(DatasetError::Invalid(format!(
                    "point {i} has dimension {}, expected {dim}",
                    p.len()
                )));
            }
            if p.iter().any(|v| !v.is_finite()) {
                return Err(DatasetError::Invalid(format!("point {i} has a non-finite coordinate")));
            }
        }
        for (name, values) in &columns {
            if values.len() != points.len() {
                return Err(DatasetError::Invalid(format!(
                    "column `{name}` has {} values for {} points",
                    values.len(),
                    points.len()
                )));
            }
            if values.iter().any(|v| !v.is_finite()) {
                return Err(DatasetError::Invalid(format!("column `{name}` has a non-finite value")));
            }
        }
        Ok(Self { dim, points, columns })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn point(&self, index: usize) -> &[f64] {
        &self.points[index]
    }

    pub fn column_names(&self) -> impl Iterator<Item = &str> {
        self.columns.iter().map(|(name, _)| name.as_str())
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.columns
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, values)| values.as_slice())
    }

    /// Loads a cloud from a CSV file with a header row.
    ///
    /// Coordinates are taken from `coordinate_columns` in the given order and
    /// attributes from `attribute_columns`. Row order is preserved. Errors
    /// name the offending 1-based data row and column.
    pub fn load_csv(
        path: impl AsRef<Path>,
        coordinate_columns: &[&str],
        attribute_columns: &[&str],
    ) -> Result<Self, DatasetError> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|source| DatasetError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::read_csv(file, coordinate_columns, attribute_columns)
    }

    /// Same as [`PointCloud::load_csv`] but reads from any byte source.
    pub fn read_csv<R: std::io::Read>(
        reader: R,
        coordinate_columns: &[&str],
        attribute_columns: &[&str],
    ) -> Result<Self, DatasetError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        let position = |name: &str| {
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| DatasetError::MissingColumn(name.to_string()))
        };
        let coord_idx = coordinate_columns
            .iter()
            .map(|c| position(c))
            .collect::<Result<Vec<_>, _>>()?;
        let attr_idx = attribute_columns
            .iter()
            .map(|c| position(c))
            .collect::<Result<Vec<_>, _>>()?;

        let mut points = Vec::new();
        let mut columns: Vec<(String, Vec<f64>)> =
            attribute_columns.iter().map(|c| (c.to_string(), Vec::new())).collect();
        for (row, record) in rdr.records().enumerate() {
            let record = record?;
            let cell = |idx: usize| -> Result<f64, DatasetError> {
                let raw = record.get(idx).unwrap_or("");
                raw.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| DatasetError::BadCell {
                        row: row + 1,
                        column: headers.get(idx).unwrap_or("").to_string(),
                        value: raw.to_string(),
                    })
            };
            points.push(coord_idx.iter().map(|&i| cell(i)).collect::<Result<Vec<_>, _>>()?);
            for (slot, &i) in columns.iter_mut().zip(&attr_idx) {
                slot.1.push(cell(i)?);
            }
        }
        Self::with_columns(points, columns)
    }

    /// Reads the header row of a CSV file.
    pub fn csv_headers(path: impl AsRef<Path>) -> Result<Vec<String>, DatasetError> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|source| DatasetError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let mut rdr = csv::Reader::from_reader(file);
        Ok(rdr.headers()?.iter().map(str::to_string).collect())
    }

    /// Writes the cloud as CSV: coordinate columns named by
    /// [`PointCloud::coordinate_names`], followed by the attribute columns.
    /// Values use the shortest representation that parses back exactly.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), DatasetError> {
        let mut wtr = csv::Writer::from_writer(writer);
        let mut header = self.coordinate_names();
        header.extend(self.columns.iter().map(|(n, _)| n.clone()));
        wtr.write_record(&header)?;
        for (i, p) in self.points.iter().enumerate() {
            let row = p
                .iter()
                .copied()
                .chain(self.columns.iter().map(|(_, values)| values[i]))
                .map(|v| v.to_string());
            wtr.write_record(row)?;
        }
        wtr.flush().map_err(|source| DatasetError::Io {
            path: "<writer>".into(),
            source,
        })?;
        Ok(())
    }

    /// `x, y, z` for clouds of dimension up to three, `x0, x1, ...` beyond.
    pub fn coordinate_names(&self) -> Vec<String> {
        if self.dim <= 3 {
            ["x", "y", "z"][..self.dim].iter().map(|s| s.to_string()).collect()
        } else {
            (0..self.dim).map(|i| format!("x{i}")).collect()
        }
    }

    /// Evaluates a filter on every point.
    pub fn evaluate(&self, filter: &FilterFunction) -> Result<Vec<f64>, DatasetError> {
        match &filter.kind {
            FilterKind::Coordinate(axis) => {
                if *axis >= self.dim {
                    return Err(DatasetError::AxisOutOfRange {
                        axis: *axis,
                        dim: self.dim,
                    });
                }
                Ok(self.points.iter().map(|p| p[*axis]).collect())
            }
            FilterKind::Column(name) => self
                .column(name)
                .map(<[f64]>::to_vec)
                .ok_or_else(|| DatasetError::UnknownColumn(name.clone())),
            FilterKind::LinfNorm => Ok(self
                .points
                .iter()
                .map(|p| p.iter().fold(0.0_f64, |acc, v| acc.max(v.abs())))
                .collect()),
        }
    }
}

/// What a filter function computes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterKind {
    Coordinate(usize),
    Column(String),
    LinfNorm,
}

/// A named real-valued function on the points of a cloud.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterFunction {
    pub kind: FilterKind,
    pub label: String,
}

impl FilterFunction {
    pub fn coordinate(axis: usize) -> Self {
        let label = match axis {
            0 => "x".to_string(),
            1 => "y".to_string(),
            2 => "z".to_string(),
            _ => format!("x{axis}"),
        };
        Self {
            kind: FilterKind::Coordinate(axis),
            label,
        }
    }

    pub fn column(name: impl Into<String>) -> Self {
        let name = name.into();
        Self {
            kind: FilterKind::Column(name.clone()),
            label: name,
        }
    }

    pub fn linf_norm() -> Self {
        Self {
            kind: FilterKind::LinfNorm,
            label: "linf".to_string(),
        }
    }

    /// Resolves a variable label against a cloud.
    ///
    /// Attribute columns win over everything else. Otherwise `x`, `y`, `z`
    /// and `x<k>` name coordinates, and `linf` names the L-infinity norm.
    pub fn resolve(label: &str, cloud: &PointCloud) -> Result<Self, DatasetError> {
        if cloud.column(label).is_some() {
            return Ok(Self::column(label));
        }
        let axis = match label {
            "x" => Some(0),
            "y" => Some(1),
            "z" => Some(2),
            "linf" => return Ok(Self::linf_norm()),
            other => other.strip_prefix('x').and_then(|rest| rest.parse::<usize>().ok()),
        };
        match axis {
            Some(axis) if axis < cloud.dim() => Ok(Self {
                kind: FilterKind::Coordinate(axis),
                label: label.to_string(),
            }),
            Some(axis) => Err(DatasetError::AxisOutOfRange { axis, dim: cloud.dim() }),
            None => Err(DatasetError::UnknownColumn(label.to_string())),
        }
    }
}

/// Synthetic test shapes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shape {
    Circle,
    TwoCircles,
    Cylinder,
    /// The `x <= 0` half of [`Shape::Cylinder`].
    HalfCylinder,
    Sphere,
}

impl Shape {
    pub const ALL: [Shape; 5] = [
        Shape::Circle,
        Shape::TwoCircles,
        Shape::Cylinder,
        Shape::HalfCylinder,
        Shape::Sphere,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Shape::Circle => "circle",
            Shape::TwoCircles => "two_circles",
            Shape::Cylinder => "cylinder",
            Shape::HalfCylinder => "half_cylinder",
            Shape::Sphere => "sphere",
        }
    }

    pub fn dim(self) -> usize {
        match self {
            Shape::Circle | Shape::TwoCircles => 2,
            Shape::Cylinder | Shape::HalfCylinder | Shape::Sphere => 3,
        }
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Shape {
    type Err = DatasetError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Shape::ALL
            .into_iter()
            .find(|shape| shape.name() == s)
            .ok_or_else(|| DatasetError::UnknownShape(s.to_string()))
    }
}

/// Samples `n_points` from a shape with isotropic Gaussian noise of standard
/// deviation `noise`. Deterministic for a fixed seed.
///
/// Circles use uniform angles; the two circles share points in proportion to
/// their circumference. Cylinders are uniform in angle times height, and the
/// sphere is uniform in area (normalized Gaussian directions).
pub fn generate_shape(shape: Shape, n_points: usize, noise: f64, seed: u64) -> Result<PointCloud, DatasetError> {
    if n_points < 10 {
        return Err(DatasetError::TooFewPoints(n_points));
    }
    if !(noise.is_finite() && noise >= 0.0) {
        return Err(DatasetError::BadNoise(noise));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(n_points);
    for k in 0..n_points {
        let p = match shape {
            Shape::Circle => {
                let t = rng.random_range(0.0..2.0 * PI);
                vec![t.cos(), t.sin()]
            }
            Shape::TwoCircles => {
                let (inner, outer) = TWO_CIRCLES_RADII;
                let n_inner = (n_points as f64 * inner / (inner + outer)).round() as usize;
                let r = if k < n_inner { inner } else { outer };
                let t = rng.random_range(0.0..2.0 * PI);
                vec![r * t.cos(), r * t.sin()]
            }
            Shape::Cylinder => {
                let t = rng.random_range(0.0..2.0 * PI);
                let z = rng.random_range(-CYLINDER_HEIGHT / 2.0..=CYLINDER_HEIGHT / 2.0);
                vec![CYLINDER_RADIUS * t.cos(), CYLINDER_RADIUS * t.sin(), z]
            }
            Shape::HalfCylinder => {
                let t = rng.random_range(PI / 2.0..=3.0 * PI / 2.0);
                let z = rng.random_range(-CYLINDER_HEIGHT / 2.0..=CYLINDER_HEIGHT / 2.0);
                vec![CYLINDER_RADIUS * t.cos(), CYLINDER_RADIUS * t.sin(), z]
            }
            Shape::Sphere => loop {
                let g: [f64; 3] = [
                    rng.sample(StandardNormal),
                    rng.sample(StandardNormal),
                    rng.sample(StandardNormal),
                ];
                let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
                if norm > 1e-12 {
                    break g.iter().map(|v| SPHERE_RADIUS * v / norm).collect();
                }
            },
        };
        points.push(p);
    }
    if noise > 0.0 {
        for p in &mut points {
            for v in p.iter_mut() {
                let e: f64 = rng.sample(StandardNormal);
                *v += noise * e;
            }
        }
    }
    PointCloud::new(points)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_row_csv() {
        let data = "x,y\n1,2\n3,4\n5,6\n";
        let cloud = PointCloud::read_csv(data.as_bytes(), &["x", "y"], &[]).unwrap();
        assert_eq!(cloud.len(), 3);
        assert_eq!(cloud.dim(), 2);
        assert_eq!(cloud.point(2), &[5.0, 6.0]);
    }

    #[test]
    fn iris_style_csv_gives_four_filters() {
        let data = "sepal_length,sepal_width,petal_length,petal_width,species\n\
                    5.1,3.5,1.4,0.2,0\n4.9,3.0,1.4,0.2,0\n6.3,3.3,6.0,2.5,2\n";
        let names = ["sepal_length", "sepal_width", "petal_length", "petal_width"];
        let cloud = PointCloud::read_csv(data.as_bytes(), &names, &names).unwrap();
        for name in names {
            let f = FilterFunction::resolve(name, &cloud).unwrap();
            assert_eq!(f.kind, FilterKind::Column(name.to_string()));
            assert_eq!(cloud.evaluate(&f).unwrap().len(), 3);
        }
    }

    #[test]
    fn nan_cell_names_row_and_column() {
        let data = "a,b\n1,2\n3,NaN\n";
        let err = PointCloud::read_csv(data.as_bytes(), &["a", "b"], &[]).unwrap_err();
        match err {
            DatasetError::BadCell { row, column, .. } => {
                assert_eq!(row, 2);
                assert_eq!(column, "b");
            }
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn missing_column_and_file() {
        let err = PointCloud::read_csv("a\n1\n".as_bytes(), &["b"], &[]).unwrap_err();
        assert!(matches!(err, DatasetError::MissingColumn(c) if c == "b"));
        let err = PointCloud::load_csv("/nonexistent/file.csv", &["a"], &[]).unwrap_err();
        assert!(matches!(err, DatasetError::Io { .. }));
    }

    #[test]
    fn circle_points_on_unit_circle() {
        let cloud = generate_shape(Shape::Circle, 100, 0.0, 1).unwrap();
        assert_eq!(cloud.len(), 100);
        for p in cloud.points() {
            assert!((p[0] * p[0] + p[1] * p[1] - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn cylinder_geometry() {
        let cloud = generate_shape(Shape::Cylinder, 600, 0.0, 7).unwrap();
        assert_eq!(cloud.dim(), 3);
        let h = CYLINDER_HEIGHT / 2.0;
        let (mut zmin, mut zmax) = (f64::INFINITY, f64::NEG_INFINITY);
        for p in cloud.points() {
            assert!((p[0].hypot(p[1]) - 1.0).abs() < 1e-9);
            assert!(p[2] >= -h && p[2] <= h);
            zmin = zmin.min(p[2]);
            zmax = zmax.max(p[2]);
        }
        // 600 uniform draws reach within 0.1 of both ends.
        assert!(zmin < -h + 0.1 && zmax > h - 0.1);
    }

    #[test]
    fn half_cylinder_is_nonpositive_in_x() {
        let cloud = generate_shape(Shape::HalfCylinder, 200, 0.0, 2).unwrap();
        assert!(cloud.points().iter().all(|p| p[0] <= 1e-12));
    }

    #[test]
    fn two_circles_residual_within_noise() {
        let noise = 0.01;
        let cloud = generate_shape(Shape::TwoCircles, 400, noise, 3).unwrap();
        let (r1, r2) = TWO_CIRCLES_RADII;
        let close = cloud
            .points()
            .iter()
            .filter(|p| {
                let r = p[0].hypot(p[1]);
                (r - r1).abs().min((r - r2).abs()) <= 5.0 * noise
            })
            .count();
        assert!(close as f64 >= 0.99 * 400.0, "{close}");
    }

    #[test]
    fn sphere_is_on_unit_sphere() {
        let cloud = generate_shape(Shape::Sphere, 300, 0.0, 5).unwrap();
        for p in cloud.points() {
            let r = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
            assert!((r - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn shape_errors() {
        assert!(matches!("torus".parse::<Shape>(), Err(DatasetError::UnknownShape(_))));
        assert!(matches!(
            generate_shape(Shape::Circle, 9, 0.0, 1),
            Err(DatasetError::TooFewPoints(9))
        ));
    }

    #[test]
    fn filters() {
        let cloud = PointCloud::new(vec![vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(cloud.evaluate(&FilterFunction::coordinate(0)).unwrap(), vec![1.0, 3.0]);
        let cloud = PointCloud::new(vec![vec![1.0, -2.0], vec![0.5, 0.1]]).unwrap();
        assert_eq!(cloud.evaluate(&FilterFunction::linf_norm()).unwrap(), vec![2.0, 0.5]);
        assert!(matches!(
            cloud.evaluate(&FilterFunction::coordinate(2)),
            Err(DatasetError::AxisOutOfRange { axis: 2, dim: 2 })
        ));
        assert!(matches!(
            cloud.evaluate(&FilterFunction::column("MEDV")),
            Err(DatasetError::UnknownColumn(_))
        ));
    }

    #[test]
    fn column_filter_is_verbatim() {
        let data = "RM,TAX,MEDV\n6.575,296,24\n6.421,242,21.6\n";
        let cloud = PointCloud::read_csv(data.as_bytes(), &["RM", "TAX"], &["MEDV"]).unwrap();
        let medv = FilterFunction::resolve("MEDV", &cloud).unwrap();
        assert_eq!(cloud.evaluate(&medv).unwrap(), vec![24.0, 21.6]);
    }

    #[test]
    fn resolve_labels() {
        let cloud = generate_shape(Shape::Cylinder, 20, 0.0, 1).unwrap();
        assert_eq!(
            FilterFunction::resolve("z", &cloud).unwrap().kind,
            FilterKind::Coordinate(2)
        );
        assert_eq!(
            FilterFunction::resolve("x1", &cloud).unwrap().kind,
            FilterKind::Coordinate(1)
        );
        assert_eq!(
            FilterFunction::resolve("linf", &cloud).unwrap().kind,
            FilterKind::LinfNorm
        );
        assert!(FilterFunction::resolve("x7", &cloud).is_err());
        assert!(FilterFunction::resolve("bogus", &cloud).is_err());
    }
}
