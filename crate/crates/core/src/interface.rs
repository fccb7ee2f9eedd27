//! The mapper-graph matrix: a `k × k` grid over a list of filter variables
//! with univariate mappers on the diagonal and stitched bivariate mappers
//! off it, plus its versioned JSON form shared by the CLI and the service.

use std::collections::BTreeSet;
use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::composition::{compose, verify_equivalence, CompositionError, DiffReport, Equivalence};
use crate::cover::{Cover, CoverError};
use crate::dataset::{generate_shape, DatasetError, FilterFunction, PointCloud, Shape};
use crate::gains::{gain_report, global_value, local_vector, GainsError, Measure, RestrictionMode};
use crate::mapper::{build_bivariate_from_lenses, build_mapper, MapperComplex, MapperError, NeighborhoodGraph};

/// Schema version of [`MatrixResult`]. The major part changes only on
/// incompatible edits.
pub const SCHEMA_VERSION: &str = "1.0";

/// Matrices are capped at this many variables to stay readable.
pub const MAX_VARIABLES: usize = 8;

pub const DEFAULT_MAX_DIM: usize = 3;

#[derive(Debug, Error, PartialEq)]
pub enum SpecError {
    #[error("too few variables: need at least 2, got {0}")]
    TooFewVariables(usize),
    #[error("too many variables: at most {MAX_VARIABLES}, got {0}")]
    TooManyVariables(usize),
    #[error("expected 1 or {expected} interval counts, got {got}")]
    IntervalCount { expected: usize, got: usize },
    #[error("expected 1 or {expected} overlaps, got {got}")]
    OverlapCount { expected: usize, got: usize },
    #[error("resolution must be at least 1")]
    ZeroResolution,
    #[error("overlap out of range")]
    OverlapOutOfRange,
    #[error("epsilon must be positive and finite")]
    BadEpsilon,
    #[error("max_dim must be at least 1")]
    ZeroMaxDim,
    #[error("dataset name `{0}` must be a plain file name")]
    BadDatasetName(String),
}

impl SpecError {
    /// Stable machine-readable reason, reported by the service.
    pub fn reason(&self) -> &'static str {
        match self {
            SpecError::TooFewVariables(_) => "too few variables",
            SpecError::TooManyVariables(_) => "too many variables",
            SpecError::IntervalCount { .. } => "interval count mismatch",
            SpecError::OverlapCount { .. } => "overlap count mismatch",
            SpecError::ZeroResolution => "resolution out of range",
            SpecError::OverlapOutOfRange => "overlap out of range",
            SpecError::BadEpsilon => "epsilon out of range",
            SpecError::ZeroMaxDim => "max_dim out of range",
            SpecError::BadDatasetName(_) => "invalid dataset name",
        }
    }
}

#[derive(Debug, Error)]
pub enum InterfaceError {
    #[error(transparent)]
    Spec(#[from] SpecError),
    #[error("unknown dataset `{0}`")]
    UnknownDataset(String),
    #[error("variable `{0}` cannot be resolved")]
    UnknownVariable(String),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Cover(#[from] CoverError),
    #[error(transparent)]
    Mapper(#[from] MapperError),
    #[error(transparent)]
    Composition(#[from] CompositionError),
    #[error(transparent)]
    Gains(#[from] GainsError),
    #[error("cell ({row}, {col}): stitched mapper differs from direct construction ({} missing, {} extra simplices)", report.missing.len(), report.extra.len())]
    Verification { row: usize, col: usize, report: DiffReport },
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Where the point cloud of a matrix comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DatasetRef {
    /// A CSV file in the data directory. Coordinates default to every column.
    Csv {
        name: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        coordinates: Option<Vec<String>>,
    },
    /// A synthetic shape sampled with the spec's seed.
    Shape {
        shape: Shape,
        n_points: usize,
        #[serde(default)]
        noise: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixSpec {
    pub dataset: DatasetRef,
    /// Filter labels: column names, `x`/`y`/`z`/`x<k>` or `linf`.
    pub variables: Vec<String>,
    /// Interval count, shared (one entry) or per variable.
    pub intervals: Vec<usize>,
    /// Overlap fraction in `[0, 1)`, shared (one entry) or per variable.
    pub overlaps: Vec<f64>,
    /// Neighborhood radius; derived from the cloud when absent.
    #[serde(default)]
    pub epsilon: Option<f64>,
    pub measure: Measure,
    pub restriction: RestrictionMode,
    #[serde(default = "default_max_dim")]
    pub max_dim: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub verify: bool,
    #[serde(default)]
    pub include_members: bool,
    #[serde(default)]
    pub include_simplices: bool,
    #[serde(default)]
    pub include_trace: bool,
}

fn default_max_dim() -> usize {
    DEFAULT_MAX_DIM
}

impl MatrixSpec {
    /// A spec with 10 intervals at 30% overlap, LED_A on boundaries.
    pub fn new(dataset: DatasetRef, variables: Vec<String>) -> Self {
        Self {
            dataset,
            variables,
            intervals: vec![10],
            overlaps: vec![0.3],
            epsilon: None,
            measure: Measure::LedA,
            restriction: RestrictionMode::Boundary,
            max_dim: DEFAULT_MAX_DIM,
            seed: 0,
            verify: false,
            include_members: false,
            include_simplices: false,
            include_trace: false,
        }
    }

    pub fn validate(&self) -> Result<(), SpecError> {
        let k = self.variables.len();
        if k < 2 {
            return Err(SpecError::TooFewVariables(k));
        }
        if k > MAX_VARIABLES {
            return Err(SpecError::TooManyVariables(k));
        }
        if !(self.intervals.len() == 1 || self.intervals.len() == k) {
            return Err(SpecError::IntervalCount {
                expected: k,
                got: self.intervals.len(),
            });
        }
        if !(self.overlaps.len() == 1 || self.overlaps.len() == k) {
            return Err(SpecError::OverlapCount {
                expected: k,
                got: self.overlaps.len(),
            });
        }
        if self.intervals.contains(&0) {
            return Err(SpecError::ZeroResolution);
        }
        if self.overlaps.iter().any(|p| !(0.0..1.0).contains(p)) {
            return Err(SpecError::OverlapOutOfRange);
        }
        if self.epsilon.is_some_and(|e| !(e.is_finite() && e > 0.0)) {
            return Err(SpecError::BadEpsilon);
        }
        if self.max_dim == 0 {
            return Err(SpecError::ZeroMaxDim);
        }
        if let DatasetRef::Csv { name, .. } = &self.dataset {
            check_dataset_name(name)?;
        }
        Ok(())
    }

    /// `(n, p)` of variable `index`.
    pub fn cover_params(&self, index: usize) -> (usize, f64) {
        let pick = |len: usize| if len == 1 { 0 } else { index };
        (
            self.intervals[pick(self.intervals.len())],
            self.overlaps[pick(self.overlaps.len())],
        )
    }
}

fn check_dataset_name(name: &str) -> Result<(), SpecError> {
    let plain =
        !name.is_empty() && name != "." && name != ".." && !name.contains(['/', '\\']) && !name.starts_with('.');
    if plain {
        Ok(())
    } else {
        Err(SpecError::BadDatasetName(name.to_string()))
    }
}

/// Loads the cloud a spec refers to. CSV names resolve inside `data_dir`.
pub fn load_dataset(dataset: &DatasetRef, seed: u64, data_dir: &Path) -> Result<PointCloud, InterfaceError> {
    match dataset {
        DatasetRef::Csv { name, coordinates } => {
            check_dataset_name(name)?;
            let path = data_dir.join(name);
            if !path.is_file() {
                return Err(InterfaceError::UnknownDataset(name.clone()));
            }
            let headers = PointCloud::csv_headers(&path)?;
            let all: Vec<&str> = headers.iter().map(String::as_str).collect();
            let coords: Vec<&str> = match coordinates {
                Some(c) => c.iter().map(String::as_str).collect(),
                None => all.clone(),
            };
            Ok(PointCloud::load_csv(&path, &coords, &all)?)
        }
        DatasetRef::Shape { shape, n_points, noise } => Ok(generate_shape(*shape, *n_points, *noise, seed)?),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetInfo {
    pub name: String,
    pub kind: String,
    pub variables: Vec<String>,
}

/// CSV files in `data_dir` (sorted by name) followed by the built-in shapes.
pub fn list_datasets(data_dir: &Path) -> Vec<DatasetInfo> {
    let mut csvs: Vec<DatasetInfo> = std::fs::read_dir(data_dir)
        .into_iter()
        .flatten()
        .flatten()
        .filter_map(|entry| {
            let name = entry.file_name().into_string().ok()?;
            if !name.ends_with(".csv") || check_dataset_name(&name).is_err() {
                return None;
            }
            let mut variables = PointCloud::csv_headers(entry.path()).ok()?;
            variables.push("linf".into());
            Some(DatasetInfo {
                name,
                kind: "csv".into(),
                variables,
            })
        })
        .collect();
    csvs.sort_by(|a, b| a.name.cmp(&b.name));
    csvs.extend(Shape::ALL.into_iter().map(|shape| {
        let mut variables: Vec<String> = ["x", "y", "z"][..shape.dim()].iter().map(|s| s.to_string()).collect();
        variables.push("linf".into());
        DatasetInfo {
            name: shape.name().into(),
            kind: "shape".into(),
            variables,
        }
    }));
    csvs
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: usize,
    /// Interval of the row variable's cover.
    pub interval: usize,
    /// Interval of the column variable's cover (off-diagonal cells only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub second_interval: Option<usize>,
    pub size: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub members: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphJson {
    pub nodes: Vec<Node>,
    pub edges: Vec<[usize; 2]>,
    /// Simplices of dimension 2 and up.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simplices: Option<Vec<Vec<usize>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vectors {
    pub base: Vec<f64>,
    pub stitched: Option<Vec<f64>>,
    pub diff: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Globals {
    pub base: f64,
    pub stitched: Option<f64>,
    pub diff: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub row: usize,
    pub col: usize,
    pub graph: GraphJson,
    pub vectors: Vectors,
    pub global: Globals,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<serde_json::Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixResult {
    pub version: String,
    pub spec: MatrixSpec,
    /// Row-major, `k²` cells.
    pub cells: Vec<Cell>,
}

impl MatrixResult {
    pub fn cell(&self, row: usize, col: usize) -> Option<&Cell> {
        self.cells.iter().find(|c| c.row == row && c.col == col)
    }

    /// The canonical serialization: pretty-printed with a trailing newline.
    pub fn to_json_string(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("matrix results serialize");
        s.push('\n');
        s
    }

    pub fn export_json(&self, path: impl AsRef<Path>) -> Result<(), InterfaceError> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json_string()).map_err(|source| InterfaceError::Io {
            path: path.display().to_string(),
            source,
        })
    }
}

fn graph_json(complex: &MapperComplex, members: bool, simplices: bool) -> GraphJson {
    GraphJson {
        nodes: complex
            .vertices()
            .iter()
            .enumerate()
            .map(|(id, v)| Node {
                id,
                interval: v.origin.first(),
                second_interval: v.origin.second(),
                size: v.len(),
                members: members.then(|| v.members.clone()),
            })
            .collect(),
        edges: complex.edges().map(|(a, b)| [a, b]).collect(),
        simplices: simplices.then(|| complex.simplices().iter().filter(|s| s.len() > 2).cloned().collect()),
    }
}

/// Builds the matrix for `spec` over `cloud`. Univariate mappers are built
/// once per variable; cells are computed in parallel and assembled in
/// row-major order, so the result is deterministic.
pub fn compute_matrix(spec: &MatrixSpec, cloud: &PointCloud) -> Result<MatrixResult, InterfaceError> {
    spec.validate()?;
    let filters = spec
        .variables
        .iter()
        .map(|label| FilterFunction::resolve(label, cloud).map_err(|_| InterfaceError::UnknownVariable(label.clone())))
        .collect::<Result<Vec<_>, _>>()?;
    let epsilon = spec
        .epsilon
        .unwrap_or_else(|| NeighborhoodGraph::default_epsilon(cloud));
    let graph = NeighborhoodGraph::build(cloud, epsilon)?;

    let univariate: Vec<MapperComplex> = filters
        .par_iter()
        .enumerate()
        .map(|(v, filter)| {
            let values = cloud.evaluate(filter)?;
            let (n, p) = spec.cover_params(v);
            let cover = Cover::build(&values, n, p)?;
            Ok::<_, InterfaceError>(build_mapper(cloud, filter, &cover, &graph, spec.max_dim)?)
        })
        .collect::<Result<_, _>>()?;

    let k = filters.len();
    let cells = (0..k * k)
        .into_par_iter()
        .map(|index| matrix_cell(spec, &univariate, &graph, index / k, index % k))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(MatrixResult {
        version: SCHEMA_VERSION.into(),
        spec: spec.clone(),
        cells,
    })
}

fn matrix_cell(
    spec: &MatrixSpec,
    univariate: &[MapperComplex],
    graph: &NeighborhoodGraph,
    row: usize,
    col: usize,
) -> Result<Cell, InterfaceError> {
    let base = &univariate[row];
    if row == col {
        return Ok(Cell {
            row,
            col,
            graph: graph_json(base, spec.include_members, spec.include_simplices),
            vectors: Vectors {
                base: local_vector(base, spec.measure, spec.restriction)?,
                stitched: None,
                diff: None,
            },
            global: Globals {
                base: global_value(base, spec.measure),
                stitched: None,
                diff: None,
            },
            trace: None,
        });
    }
    let (stitched, trace) = compose(base, &univariate[col], graph, spec.max_dim)?;
    if spec.verify {
        let direct = build_bivariate_from_lenses(
            Arc::clone(&base.lenses()[0]),
            Arc::clone(&univariate[col].lenses()[0]),
            graph,
            spec.max_dim,
        )?;
        if let Equivalence::Different(report) = verify_equivalence(&stitched, &direct) {
            return Err(InterfaceError::Verification { row, col, report });
        }
    }
    let report = gain_report(base, &stitched, spec.measure, spec.restriction)?;
    Ok(Cell {
        row,
        col,
        graph: graph_json(&stitched, spec.include_members, spec.include_simplices),
        vectors: Vectors {
            base: report.base,
            stitched: Some(report.stitched),
            diff: Some(report.diff),
        },
        global: Globals {
            base: report.global_base,
            stitched: Some(report.global_stitched),
            diff: Some(report.global_diff),
        },
        trace: spec
            .include_trace
            .then(|| serde_json::to_value(&trace).expect("traces serialize")),
    })
}

/// Distinct vertex sets of the stitched cells, used to check that `(i, j)`
/// and `(j, i)` hold the same complex up to transposition.
pub fn cell_member_sets(cell: &Cell) -> Option<BTreeSet<Vec<usize>>> {
    cell.graph
        .nodes
        .iter()
        .map(|n| n.members.clone())
        .collect::<Option<BTreeSet<_>>>()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn shape_spec(shape: Shape, n_points: usize, variables: &[&str]) -> MatrixSpec {
        let mut spec = MatrixSpec::new(
            DatasetRef::Shape {
                shape,
                n_points,
                noise: 0.0,
            },
            variables.iter().map(|s| s.to_string()).collect(),
        );
        spec.intervals = vec![4];
        spec.overlaps = vec![0.25];
        spec.seed = 3;
        spec
    }

    fn run(spec: &MatrixSpec) -> MatrixResult {
        let cloud = load_dataset(&spec.dataset, spec.seed, Path::new(".")).unwrap();
        compute_matrix(spec, &cloud).unwrap()
    }

    #[test]
    fn validation_reasons() {
        let mut spec = shape_spec(Shape::Circle, 100, &["x", "y"]);
        assert!(spec.validate().is_ok());
        spec.overlaps = vec![1.2];
        assert_eq!(spec.validate().unwrap_err().reason(), "overlap out of range");
        spec.overlaps = vec![0.2];
        spec.variables = vec!["x".into()];
        assert_eq!(spec.validate(), Err(SpecError::TooFewVariables(1)));
        spec.variables = vec!["x".into(); 9];
        assert_eq!(spec.validate(), Err(SpecError::TooManyVariables(9)));
        spec.variables = vec!["x".into(), "y".into(), "linf".into()];
        spec.intervals = vec![3, 4];
        assert_eq!(spec.validate(), Err(SpecError::IntervalCount { expected: 3, got: 2 }));
        spec.intervals = vec![3, 4, 5];
        assert!(spec.validate().is_ok());
        assert_eq!(spec.cover_params(2), (5, 0.2));
        spec.dataset = DatasetRef::Csv {
            name: "../etc/passwd".into(),
            coordinates: None,
        };
        assert_eq!(spec.validate().unwrap_err().reason(), "invalid dataset name");
    }

    #[test]
    fn matrix_layout_and_round_trip() {
        let mut spec = shape_spec(Shape::Circle, 200, &["x", "y", "linf"]);
        spec.measure = Measure::Lhd0;
        spec.include_members = true;
        spec.include_simplices = true;
        spec.verify = true;
        let result = run(&spec);
        assert_eq!(result.version, SCHEMA_VERSION);
        assert_eq!(result.cells.len(), 9);
        for cell in &result.cells {
            assert_eq!(cell.vectors.base.len(), 4);
            assert_eq!(cell.vectors.stitched.is_none(), cell.row == cell.col);
            assert_eq!(cell.global.diff.is_none(), cell.row == cell.col);
        }
        // (i, j) and (j, i) carry the same complex with different bases
        let xy = result.cell(0, 1).unwrap();
        let yx = result.cell(1, 0).unwrap();
        assert_eq!(cell_member_sets(xy), cell_member_sets(yx));
        assert_eq!(xy.graph.edges.len(), yx.graph.edges.len());
        assert_eq!(xy.vectors.base, result.cell(0, 0).unwrap().vectors.base);
        assert_eq!(yx.vectors.base, result.cell(1, 1).unwrap().vectors.base);

        let json = result.to_json_string();
        let parsed: MatrixResult = serde_json::from_str(&json).unwrap();
        assert_eq!(parsed, result);
        assert_eq!(parsed.to_json_string(), json);
    }

    #[test]
    fn deterministic_bytes() {
        let spec = shape_spec(Shape::Sphere, 300, &["x", "z"]);
        assert_eq!(run(&spec).to_json_string(), run(&spec).to_json_string());
    }

    #[test]
    fn self_stitch_has_no_component_gain() {
        let mut spec = shape_spec(Shape::TwoCircles, 300, &["y", "y"]);
        spec.measure = Measure::Lhd0;
        spec.restriction = RestrictionMode::Interior;
        let result = run(&spec);
        let cell = result.cell(0, 1).unwrap();
        assert!(cell.vectors.diff.as_ref().unwrap().iter().all(|d| *d == 0.0));
    }

    #[test]
    fn optional_fields_are_omitted() {
        let spec = shape_spec(Shape::Circle, 100, &["x", "y"]);
        let json = run(&spec).to_json_string();
        assert!(!json.contains("\"members\""));
        assert!(!json.contains("\"simplices\""));
        assert!(!json.contains("\"trace\""));
        assert!(json.contains("\"stitched\": null"));
    }

    #[test]
    fn unknown_variable_and_dataset() {
        let spec = shape_spec(Shape::Circle, 100, &["x", "petal"]);
        let cloud = load_dataset(&spec.dataset, 0, Path::new(".")).unwrap();
        assert!(matches!(
            compute_matrix(&spec, &cloud),
            Err(InterfaceError::UnknownVariable(v)) if v == "petal"
        ));
        let dir = tempfile::tempdir().unwrap();
        let missing = DatasetRef::Csv {
            name: "nope.csv".into(),
            coordinates: None,
        };
        assert!(matches!(
            load_dataset(&missing, 0, dir.path()),
            Err(InterfaceError::UnknownDataset(_))
        ));
    }

    #[test]
    fn csv_datasets_are_listed_and_loaded() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("tiny.csv"), "a,b,c\n0,0,1\n1,0,2\n2,1,3\n").unwrap();
        std::fs::write(dir.path().join("notes.txt"), "ignored").unwrap();
        let listed = list_datasets(dir.path());
        assert_eq!(listed[0].name, "tiny.csv");
        assert_eq!(listed[0].variables, vec!["a", "b", "c", "linf"]);
        assert_eq!(listed.len(), 1 + Shape::ALL.len());

        let dref = DatasetRef::Csv {
            name: "tiny.csv".into(),
            coordinates: Some(vec!["a".into(), "b".into()]),
        };
        let cloud = load_dataset(&dref, 0, dir.path()).unwrap();
        assert_eq!(cloud.dim(), 2);
        assert_eq!(cloud.column("c").unwrap(), &[1.0, 2.0, 3.0]);
    }

    #[test]
    fn spec_json_defaults() {
        let spec: MatrixSpec = serde_json::from_str(
            r#"{"dataset": {"kind": "shape", "shape": "circle", "n_points": 50},
                "variables": ["x", "y"], "intervals": [5], "overlaps": [0.33],
                "measure": "lhd1", "restriction": "interior"}"#,
        )
        .unwrap();
        assert_eq!(spec.max_dim, DEFAULT_MAX_DIM);
        assert_eq!(spec.epsilon, None);
        assert!(!spec.verify);
    }
}
