//! Argument parsing and the `gen`, `matrix` and `serve` commands.

use std::ffi::OsString;
use std::io::Write;
use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mapper_stitch::interface::{load_dataset, DatasetRef, InterfaceError};
use mapper_stitch::{compute_matrix, generate_shape, MatrixSpec, Measure, RestrictionMode, Shape};

pub const EXIT_USAGE: u8 = 1;
pub const EXIT_DATA: u8 = 2;
pub const EXIT_VERIFY: u8 = 3;

/// Caps the rayon pool (and the service's worker threads).
pub const THREADS_ENV: &str = "MAPPER_STITCH_THREADS";

#[derive(Debug, Parser)]
#[command(name = "mapper-stitch", version, about = "Build, stitch and compare mapper graphs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample a synthetic shape and write it as CSV.
    Gen(GenArgs),
    /// Compute a mapper graph matrix and write it as JSON.
    Matrix(MatrixArgs),
    /// Serve the matrix API over HTTP.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct GenArgs {
    /// circle, two_circles, cylinder, half_cylinder or sphere.
    pub shape: Shape,
    #[arg(long, default_value_t = 2000)]
    pub n_points: usize,
    /// Standard deviation of isotropic Gaussian noise.
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MatrixArgs {
    /// A CSV file with a header row, or a shape name.
    #[arg(long)]
    pub input: String,
    /// CSV columns used as coordinates (default: all columns).
    #[arg(long, value_delimiter = ',')]
    pub coords: Option<Vec<String>>,
    /// Sample size when the input is a shape.
    #[arg(long, default_value_t = 2000)]
    pub n_points: usize,
    /// Noise level when the input is a shape.
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    /// Filter variables: column names, x/y/z, x<k> or linf.
    #[arg(long, value_delimiter = ',', required = true)]
    pub vars: Vec<String>,
    /// Interval count, one shared value or one per variable.
    #[arg(long, value_delimiter = ',', default_value = "10")]
    pub intervals: Vec<usize>,
    /// Overlap fraction in [0, 1), one shared value or one per variable.
    #[arg(long, value_delimiter = ',', default_value = "0.3")]
    pub overlap: Vec<f64>,
    /// Neighborhood radius; derived from the data when absent.
    #[arg(long)]
    pub eps: Option<f64>,
    /// lhd0, lhd1, lrec, led_d or led_a.
    #[arg(long, default_value = "led_a")]
    pub measure: Measure,
    /// interior or boundary.
    #[arg(long, default_value = "boundary")]
    pub restriction: RestrictionMode,
    #[arg(long, default_value_t = 3)]
    pub max_dim: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Check every stitched cell against direct construction.
    #[arg(long)]
    pub verify: bool,
    #[arg(long)]
    pub include_members: bool,
    #[arg(long)]
    pub include_simplices: bool,
    #[arg(long)]
    pub include_trace: bool,
    /// Output file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub bind: IpAddr,
    /// Directory of CSV datasets.
    #[arg(long, default_value = "data")]
    pub data: PathBuf,
}

/// Why a command stopped, mapped onto the documented exit codes.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Data(String),
    /// Message plus a JSON dump of the differing simplices.
    Verification(String, String),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Usage(_) => EXIT_USAGE,
            Failure::Data(_) => EXIT_DATA,
            Failure::Verification(..) => EXIT_VERIFY,
        }
    }
}

impl From<InterfaceError> for Failure {
    fn from(err: InterfaceError) -> Self {
        match err {
            InterfaceError::Spec(e) => Failure::Usage(e.to_string()),
            InterfaceError::Verification { row, col, report } => Failure::Verification(
                format!("verification failed for cell ({row}, {col})"),
                serde_json::to_string_pretty(&report).expect("diff reports serialize"),
            ),
            other => Failure::Data(other.to_string()),
        }
    }
}

pub fn main<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    let verbose = matches!(cli.command, Command::Serve(_));
    let _ = tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| {
                if verbose {
                    "info".into()
                } else {
                    "warn".into()
                }
            }),
        )
        .try_init();

    let result = thread_cap().and_then(|threads| run(cli.command, threads));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            match &failure {
                Failure::Usage(msg) => eprintln!("error: {msg}"),
                Failure::Data(msg) => eprintln!("error: {msg}"),
                Failure::Verification(msg, dump) => eprintln!("error: {msg}\n{dump}"),
            }
            ExitCode::from(failure.exit_code())
        }
    }
}

fn thread_cap() -> Result<Option<usize>, Failure> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(None);
    };
    let threads = raw
        .trim()
        .parse::<usize>()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Failure::Usage(format!("{THREADS_ENV} must be a positive integer, got `{raw}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Failure::Usage(e.to_string()))?;
    Ok(Some(threads))
}

fn run(command: Command, threads: Option<usize>) -> Result<(), Failure> {
    match command {
        Command::Gen(args) => generate(args),
        Command::Matrix(args) => matrix(args),
        Command::Serve(args) => serve(args, threads),
    }
}

fn write_output(out: Option<&Path>, bytes: &[u8]) -> Result<(), Failure> {
    match out {
        Some(path) => {
            std::fs::write(path, bytes).map_err(|e| Failure::Data(format!("cannot write {}: {e}", path.display())))
        }
        None => std::io::stdout()
            .write_all(bytes)
            .map_err(|e| Failure::Data(format!("cannot write to stdout: {e}"))),
    }
}

fn generate(args: GenArgs) -> Result<(), Failure> {
    let cloud =
        generate_shape(args.shape, args.n_points, args.noise, args.seed).map_err(|e| Failure::Usage(e.to_string()))?;
    let mut buf = Vec::new();
    cloud.write_csv(&mut buf).map_err(|e| Failure::Data(e.to_string()))?;
    write_output(args.out.as_deref(), &buf)
}

/// The spec a `matrix` invocation describes, plus the directory its CSV
/// lives in. CSV inputs are recorded by file name so the same spec can be
/// posted to a service serving that directory.
pub fn matrix_spec(args: &MatrixArgs) -> Result<(MatrixSpec, PathBuf), Failure> {
    let path = Path::new(&args.input);
    let (dataset, data_dir) = if path.is_file() {
        let name = path
            .file_name()
            .and_then(|n| n.to_str())
            .ok_or_else(|| Failure::Usage(format!("cannot use `{}` as a dataset name", args.input)))?;
        let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let dir = if dir.as_os_str().is_empty() {
            PathBuf::from(".")
        } else {
            dir
        };
        (
            DatasetRef::Csv {
                name: name.to_string(),
                coordinates: args.coords.clone(),
            },
            dir,
        )
    } else if let Ok(shape) = args.input.parse::<Shape>() {
        (
            DatasetRef::Shape {
                shape,
                n_points: args.n_points,
                noise: args.noise,
            },
            PathBuf::from("."),
        )
    } else {
        return Err(Failure::Data(format!(
            "input `{}` is neither a file nor a shape",
            args.input
        )));
    };
    let spec = MatrixSpec {
        dataset,
        variables: args.vars.clone(),
        intervals: args.intervals.clone(),
        overlaps: args.overlap.clone(),
        epsilon: args.eps,
        measure: args.measure,
        restriction: args.restriction,
        max_dim: args.max_dim,
        seed: args.seed,
        verify: args.verify,
        include_members: args.include_members,
        include_simplices: args.include_simplices,
        include_trace: args.include_trace,
    };
    spec.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    Ok((spec, data_dir))
}

fn matrix(args: MatrixArgs) -> Result<(), Failure> {
    let (spec, data_dir) = matrix_spec(&args)?;
    let cloud = load_dataset(&spec.dataset, spec.seed, &data_dir).map_err(|e| match e {
        InterfaceError::Dataset(mapper_stitch::dataset::DatasetError::TooFewPoints(_)) => Failure::Usage(e.to_string()),
        other => Failure::from(other),
    })?;
    let result = compute_matrix(&spec, &cloud)?;
    write_output(args.out.as_deref(), result.to_json_string().as_bytes())
}

fn serve(args: ServeArgs, threads: Option<usize>) -> Result<(), Failure> {
    if !args.data.is_dir() {
        return Err(Failure::Data(format!(
            "data directory {} not found",
            args.data.display()
        )));
    }
    let mut builder = tokio::runtime::Builder::new_multi_thread();
    if let Some(n) = threads {
        builder.worker_threads(n);
    }
    let runtime = builder
        .enable_all()
        .build()
        .map_err(|e| Failure::Data(format!("cannot start runtime: {e}")))?;
    let addr = SocketAddr::new(args.bind, args.port);
    runtime
        .block_on(crate::service::serve(addr, args.data))
        .map_err(|e| Failure::Data(format!("{e:#}")))
}
