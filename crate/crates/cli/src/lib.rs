//! Command-line front end: `analyze`, `enumerate`, `tile2d`, `bounds`, `canon`.
//!
//! Exit codes: 0 success, 1 internal error, 2 invalid input (including usage
//! errors and missing files), 3 enumeration budget exceeded.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use relu_pwa::bounds::{
    gradient_stability_report, lipschitz_config_bound, lipschitz_global_bound,
    spectral_lipschitz_bound, BoundReport,
};
use relu_pwa::region::{DEFAULT_BUDGET, DEFAULT_TOLERANCE};
use relu_pwa::{
    affine_piece, atomic_decomposition, build_tiling, enumerate_regions, feasibility, load_network,
    region_constraints, render_svg, synthesis_coefficients, to_canonical_json, AffinePiece, Atom,
    BoundingBox, Configuration, EnumerationOptions, Error, NetworkSpec, Verdict,
};

pub const EXIT_INTERNAL: i32 = 1;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_BUDGET: i32 = 3;

const DEFAULT_HALF_WIDTH: f64 = 5.0;

#[derive(Debug, Parser)]
#[command(
    name = "relu-pwa",
    version,
    about = "Piecewise-affine analysis of ReLU networks"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Configuration, affine piece, atoms and synthesis coefficients at one input.
    Analyze {
        net: PathBuf,
        /// Comma-separated input coordinates.
        #[arg(allow_hyphen_values = true)]
        x: String,
    },
    /// Enumerate the linear regions inside a box as CSV.
    Enumerate {
        net: PathBuf,
        #[command(flatten)]
        region: RegionArgs,
    },
    /// Render the region tiling of a planar input box as SVG, with a JSON sidecar.
    Tile2d {
        net: PathBuf,
        #[command(flatten)]
        region: RegionArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Lipschitz bounds, globally and per region, as JSON.
    Bounds {
        net: PathBuf,
        #[command(flatten)]
        region: RegionArgs,
        /// Restrict the per-region report to one configuration.
        #[arg(long)]
        config: Option<String>,
        /// Add gradient-stability reports with this smoothness constant.
        #[arg(long)]
        beta: Option<f64>,
    },
    /// Print a network file in canonical form.
    Canon {
        net: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct RegionArgs {
    /// Lower box corner, comma-separated per axis (a single value applies to every axis).
    #[arg(long, allow_hyphen_values = true)]
    pub lo: Option<String>,
    /// Upper box corner, comma-separated per axis.
    #[arg(long, allow_hyphen_values = true)]
    pub hi: Option<String>,
    #[arg(long, default_value_t = DEFAULT_TOLERANCE)]
    pub tol: f64,
    #[arg(long, default_value_t = DEFAULT_BUDGET)]
    pub budget: usize,
}

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::BudgetExceeded { .. } => EXIT_BUDGET,
            Error::Lp(_) | Error::Inconsistent(_) => EXIT_INTERNAL,
            _ => EXIT_INVALID,
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError {
            code: EXIT_INTERNAL,
            message: e.to_string(),
        }
    }
}

fn invalid(message: impl Into<String>) -> CliError {
    CliError {
        code: EXIT_INVALID,
        message: message.into(),
    }
}

fn parse_reals(text: &str, what: &str) -> Result<Vec<f64>, CliError> {
    text.split(',')
        .map(|s| {
            let s = s.trim();
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| invalid(format!("{what}: '{s}' is not a finite number")))
        })
        .collect()
}

fn axis_values(
    text: Option<&str>,
    default: f64,
    dim: usize,
    what: &str,
) -> Result<Vec<f64>, CliError> {
    let Some(text) = text else {
        return Ok(vec![default; dim]);
    };
    let v = parse_reals(text, what)?;
    match v.len() {
        1 => Ok(vec![v[0]; dim]),
        n if n == dim => Ok(v),
        n => Err(invalid(format!("{what}: expected {dim} values, got {n}"))),
    }
}

impl RegionArgs {
    fn domain(&self, dim: usize) -> Result<BoundingBox, CliError> {
        let lo = axis_values(self.lo.as_deref(), -DEFAULT_HALF_WIDTH, dim, "--lo")?;
        let hi = axis_values(self.hi.as_deref(), DEFAULT_HALF_WIDTH, dim, "--hi")?;
        Ok(BoundingBox::new(lo, hi)?)
    }

    fn options(&self) -> Result<EnumerationOptions, CliError> {
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(invalid(format!("--tol must be positive, got {}", self.tol)));
        }
        Ok(EnumerationOptions {
            tol: self.tol,
            budget: self.budget,
        })
    }
}

/// Parse `args` (including the program name) and run the command, writing
/// results to `out`.
pub fn run<I, T>(args: I, out: &mut dyn Write) -> Result<(), CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                write!(out, "{e}")?;
                return Ok(());
            }
            return Err(invalid(e.render().to_string().trim_end()));
        }
    };
    execute(cli.command, out)
}

pub fn execute(command: Command, out: &mut dyn Write) -> Result<(), CliError> {
    match command {
        Command::Analyze { net, x } => cmd_analyze(&net, &x, out),
        Command::Enumerate { net, region } => cmd_enumerate(&net, &region, out),
        Command::Tile2d {
            net,
            region,
            out: path,
        } => cmd_tile2d(&net, &region, &path, out),
        Command::Bounds {
            net,
            region,
            config,
            beta,
        } => cmd_bounds(&net, &region, config.as_deref(), beta, out),
        Command::Canon { net, out: path } => {
            let text = to_canonical_json(&load_network(&net)?);
            match path {
                Some(p) => write_file(&p, text.as_bytes()),
                None => Ok(out.write_all(text.as_bytes())?),
            }
        }
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    std::fs::write(path, bytes).map_err(|e| invalid(format!("{}: {e}", path.display())))
}

fn write_json<T: Serialize>(out: &mut dyn Write, value: &T) -> Result<(), CliError> {
    serde_json::to_writer_pretty(&mut *out, value).map_err(|e| CliError {
        code: EXIT_INTERNAL,
        message: e.to_string(),
    })?;
    writeln!(out)?;
    Ok(())
}

#[derive(Serialize)]
struct Synthesis {
    index: usize,
    alpha: f64,
}

#[derive(Serialize)]
struct Analysis {
    configuration: Configuration,
    output: Vec<f64>,
    affine: AffinePiece,
    atoms: Vec<Atom>,
    synthesis: Vec<Synthesis>,
    /// `‖forward(x) − (A x + b)‖`.
    residual: f64,
}

fn cmd_analyze(path: &Path, x: &str, out: &mut dyn Write) -> Result<(), CliError> {
    let net = load_network(path)?;
    let x = parse_reals(x, "input")?;
    let trace = net.forward_pass(&x)?;
    let configuration = trace.configuration();
    let affine = affine_piece(&net, &configuration)?;
    let piece = affine.evaluate(&x)?;
    let residual = (&trace.output - &piece).mapv(|v| v * v).sum().sqrt();
    let atoms = atomic_decomposition(&net, &configuration)?.atoms().to_vec();
    let synthesis = synthesis_coefficients(&net, &configuration, &x)?
        .entries
        .into_iter()
        .map(|(index, alpha)| Synthesis { index, alpha })
        .collect();
    write_json(
        out,
        &Analysis {
            configuration,
            output: trace.output.to_vec(),
            affine,
            atoms,
            synthesis,
            residual,
        },
    )
}

fn region_bound(net: &NetworkSpec, theta: &Configuration) -> Result<Option<BoundReport>, Error> {
    match lipschitz_config_bound(net, theta) {
        Ok(r) => Ok(Some(r)),
        Err(Error::Unsupported(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

fn cmd_enumerate(path: &Path, region: &RegionArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let net = load_network(path)?;
    let domain = region.domain(net.input_dim())?;
    let tree = enumerate_regions(&net, &domain, &region.options()?)?;
    let mut text = String::from("configuration,verdict,atoms,lipschitz_bound\n");
    for node in tree.full_depth() {
        let atoms = atomic_decomposition(&net, &node.prefix)?.nonzero_count();
        let bound = match region_bound(&net, &node.prefix)? {
            Some(r) => relu_pwa::io::format_float(r.value),
            None => "NA".to_string(),
        };
        text.push_str(&format!(
            "{},{},{atoms},{bound}\n",
            node.prefix,
            node.verdict()
        ));
    }
    out.write_all(text.as_bytes())?;
    Ok(())
}

/// The sidecar path next to the SVG: `tiling.svg` -> `tiling.json`.
pub fn sidecar_path(svg: &Path) -> PathBuf {
    svg.with_extension("json")
}

fn cmd_tile2d(
    path: &Path,
    region: &RegionArgs,
    svg: &Path,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let net = load_network(path)?;
    if net.input_dim() != 2 {
        return Err(invalid(format!(
            "tile2d needs a network with 2 inputs, this one has {}",
            net.input_dim()
        )));
    }
    let domain = region.domain(2)?;
    let tree = enumerate_regions(&net, &domain, &region.options()?)?;
    let doc = build_tiling(&net, &tree)?;
    write_file(svg, render_svg(&doc).as_bytes())?;
    let mut json = serde_json::to_string_pretty(&doc).map_err(|e| CliError {
        code: EXIT_INTERNAL,
        message: e.to_string(),
    })?;
    json.push('\n');
    let sidecar = sidecar_path(svg);
    write_file(&sidecar, json.as_bytes())?;
    writeln!(
        out,
        "{} regions -> {}, {}",
        doc.regions.len(),
        svg.display(),
        sidecar.display()
    )?;
    Ok(())
}

#[derive(Serialize)]
#[serde(untagged)]
enum Entry {
    Report(BoundReport),
    Unsupported { unsupported: String },
}

fn entry(result: Result<BoundReport, Error>) -> Result<Entry, Error> {
    match result {
        Ok(r) => Ok(Entry::Report(r)),
        Err(Error::Unsupported(m)) => Ok(Entry::Unsupported { unsupported: m }),
        Err(e) => Err(e),
    }
}

#[derive(Serialize)]
struct RegionBounds {
    configuration: Configuration,
    verdict: Verdict,
    weight_magnitude: Entry,
    /// Point the gradient reports were evaluated at.
    #[serde(skip_serializing_if = "Option::is_none")]
    point: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    gradient: Option<Vec<BoundReport>>,
}

#[derive(Serialize)]
struct BoundsDocument {
    global: Entry,
    spectral: BoundReport,
    regions: Vec<RegionBounds>,
}

fn cmd_bounds(
    path: &Path,
    region: &RegionArgs,
    config: Option<&str>,
    beta: Option<f64>,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let net = load_network(path)?;
    let domain = region.domain(net.input_dim())?;
    let options = region.options()?;
    // (configuration, verdict, interior point)
    let selected: Vec<(Configuration, Verdict, Option<Vec<f64>>)> = match config {
        Some(bits) => {
            let theta: Configuration = bits.parse()?;
            theta.check_for(&net)?;
            let feas = feasibility(&region_constraints(&net, &theta, &domain)?, options.tol)?;
            if feas.verdict == Verdict::Empty {
                return Err(invalid(format!(
                    "{theta} is not a configuration of this network inside the box"
                )));
            }
            vec![(theta, feas.verdict, feas.witness)]
        }
        None => enumerate_regions(&net, &domain, &options)?
            .leaves()
            .into_iter()
            .map(|n| (n.prefix.clone(), n.verdict(), n.feasibility.witness.clone()))
            .collect(),
    };
    let mut regions = Vec::with_capacity(selected.len());
    for (theta, verdict, witness) in selected {
        let weight_magnitude = entry(lipschitz_config_bound(&net, &theta))?;
        let (point, gradient) = match (beta, witness) {
            (Some(beta), Some(x)) => {
                // squared loss ½‖y_L‖², whose gradient is the output itself
                let y = net.evaluate(&x)?;
                let reports = gradient_stability_report(&net, &x, &y.to_vec(), beta)?;
                (Some(x), Some(reports))
            }
            _ => (None, None),
        };
        regions.push(RegionBounds {
            configuration: theta,
            verdict,
            weight_magnitude,
            point,
            gradient,
        });
    }
    write_json(
        out,
        &BoundsDocument {
            global: entry(lipschitz_global_bound(&net))?,
            spectral: spectral_lipschitz_bound(&net),
            regions,
        },
    )
}
