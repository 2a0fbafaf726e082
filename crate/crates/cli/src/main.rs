//! `hstv`: command-line experiments for Hessian-Schatten total variation.
//!
//! Exit codes: 0 on success, 1 on domain errors (bad files, failed checks,
//! numerical failures), 2 on usage errors.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use htv_core::acceptance::run_all;
use htv_core::approx::{convergence_experiment_with, resolve_level, PlanMode};
use htv_core::extremal::{decompose, is_extremal};
use htv_core::field::BuiltinField;
use htv_core::htv::htv_cpwl;
use htv_core::mesh::{load_mesh, mesh_to_json, render_svg, save_mesh, SvgOptions};
use htv_core::{CpwlFunction, HtvError, SchattenP, Triangulation};

#[derive(Parser, Debug)]
#[command(name = "hstv", version, about = "Hessian-Schatten total variation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// HTV of the CPWL function stored in a mesh file.
    Htv {
        mesh: PathBuf,
        /// Schatten exponent: 1, 2, inf or any real p > 1. The CPWL value does not depend on it.
        #[arg(long, default_value = "1")]
        p: SchattenP,
        #[arg(long, value_enum, default_value_t = Report::Text)]
        report: Report,
    },
    /// Aligned CPWL approximations of a smooth field over a range of refinement levels.
    Approx(ApproxArgs),
    /// Extreme points of the HTV unit ball.
    #[command(subcommand)]
    Extremal(ExtremalCommand),
    /// Mesh utilities.
    #[command(subcommand)]
    Mesh(MeshCommand),
    /// Runs the numerical acceptance checks; exits with 1 if any fails.
    Selftest {
        /// Print the results as JSON instead of one line per check.
        #[arg(long)]
        json: bool,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Report {
    /// The total only.
    Text,
    /// One row per interior edge: edge, x1, y1, x2, y2, jump_norm, length, contribution.
    Csv,
    /// The total with every edge contribution.
    Json,
}

#[derive(Args, Debug)]
struct ApproxArgs {
    /// Field descriptor `name:p1,p2,...`, e.g. `quadratic:iso` or `rotated-quadratic:2,1,0.4636`.
    #[arg(long)]
    field: BuiltinField,
    /// Level of the dyadic partition (2^N x 2^N squares). Defaults to 1 unless --eps is given.
    #[arg(long = "N")]
    n: Option<u32>,
    /// Angle tolerance; picks the smallest N with 2^-N <= eps, or checks a given N against it.
    #[arg(long)]
    eps: Option<f64>,
    /// Refinement levels, `a..b` (inclusive) or a single level.
    #[arg(long = "K", default_value = "1..5")]
    k: LevelRange,
    /// How the per-square grids are made commensurable: `lcm` or `product`.
    #[arg(long, default_value = "lcm")]
    mode: PlanMode,
    /// Schatten exponent of the reported HTV values.
    #[arg(long, default_value = "1")]
    p: SchattenP,
    /// CSV destination; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Directory receiving one mesh file per level.
    #[arg(long)]
    emit_mesh: Option<PathBuf>,
    /// Directory receiving one SVG drawing per level.
    #[arg(long)]
    emit_svg: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum ExtremalCommand {
    /// Decides whether the function in a mesh file is extremal modulo affine maps.
    Test {
        mesh: PathBuf,
        /// Relative singular-value threshold of the nullspace computation.
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        /// Where to save a witness function when the input is not extremal.
        #[arg(long)]
        witness: Option<PathBuf>,
    },
    /// Writes the function as a positive combination of extremal ones.
    Decompose {
        mesh: PathBuf,
        /// Largest accepted vertex residual.
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        /// JSON destination; standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand, Debug)]
enum MeshCommand {
    /// Draws a mesh file as SVG.
    Render {
        mesh: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Width and height in pixels.
        #[arg(long, default_value_t = 800.0)]
        size: f64,
        /// Shade triangles by their mean value.
        #[arg(long)]
        fill: bool,
    },
    /// Writes an n x n uniform grid mesh, optionally carrying unit hats.
    Grid {
        #[arg(long)]
        n: usize,
        /// Split cells along the falling diagonal instead of the rising one.
        #[arg(long)]
        falling: bool,
        /// Vertex `i,j` (column, row) carrying a unit hat; repeatable.
        #[arg(long, value_parser = parse_index_pair)]
        hat: Vec<(usize, usize)>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct LevelRange {
    lo: u32,
    hi: u32,
}

impl FromStr for LevelRange {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parse = |t: &str| t.trim().parse::<u32>().map_err(|_| format!("bad level `{t}`"));
        let (lo, hi) = match s.split_once("..") {
            Some((a, b)) => (parse(a)?, parse(b.trim_start_matches('='))?),
            None => {
                let k = parse(s)?;
                (k, k)
            }
        };
        if lo > hi {
            return Err(format!("empty level range `{s}`"));
        }
        Ok(Self { lo, hi })
    }
}

fn parse_index_pair(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s.split_once(',').ok_or_else(|| format!("expected `i,j`, got `{s}`"))?;
    let parse = |t: &str| t.trim().parse::<usize>().map_err(|_| format!("bad index `{t}`"));
    Ok((parse(a)?, parse(b)?))
}

enum Failure {
    Usage(String),
    Domain(String),
}

impl From<HtvError> for Failure {
    fn from(e: HtvError) -> Self {
        Failure::Domain(e.to_string())
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Domain(e.to_string())
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Failure::Domain(e.to_string())
    }
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let outcome = configure_threads().and_then(|()| run(cli.command));
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Domain(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

fn configure_threads() -> Outcome {
    let Ok(raw) = std::env::var("HTV_THREADS") else { return Ok(()) };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Failure::Usage(format!("HTV_THREADS must be a positive integer, got `{raw}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::Domain(e.to_string()))
}

fn run(command: Command) -> Outcome {
    match command {
        Command::Htv { mesh, p, report } => htv_command(&mesh, p, report),
        Command::Approx(args) => approx_command(args),
        Command::Extremal(ExtremalCommand::Test { mesh, tol, witness }) => extremal_test(&mesh, tol, witness.as_deref()),
        Command::Extremal(ExtremalCommand::Decompose { mesh, tol, out }) => extremal_decompose(&mesh, tol, out.as_deref()),
        Command::Mesh(MeshCommand::Render { mesh, out, size, fill }) => {
            if !(size > 0.0 && size.is_finite()) {
                return Err(Failure::Usage(format!("--size must be positive, got {size}")));
            }
            let g = load(&mesh)?;
            render_svg(&g, &out, &SvgOptions { size, fill_by_value: fill, ..SvgOptions::default() })?;
            Ok(())
        }
        Command::Mesh(MeshCommand::Grid { n, falling, hat, out }) => {
            if n == 0 {
                return Err(Failure::Usage("--n must be positive".into()));
            }
            let mesh = Arc::new(Triangulation::uniform_grid(n, !falling));
            let mut values = vec![0.0; mesh.num_vertices()];
            for (i, j) in hat {
                if i > n || j > n {
                    return Err(Failure::Usage(format!("hat vertex ({i}, {j}) is outside the {n} x {n} grid")));
                }
                values[j * (n + 1) + i] = 1.0;
            }
            save_mesh(&CpwlFunction::new(mesh, values)?, &out)?;
            Ok(())
        }
        Command::Selftest { json } => selftest(json),
    }
}

fn load(path: &Path) -> Result<CpwlFunction, Failure> {
    load_mesh(path).map_err(|e| Failure::Domain(format!("{}: {e}", path.display())))
}

#[derive(Serialize)]
struct EdgeRow {
    edge: usize,
    x1: f64,
    y1: f64,
    x2: f64,
    y2: f64,
    jump_norm: f64,
    length: f64,
    contribution: f64,
}

fn htv_command(path: &Path, p: SchattenP, report: Report) -> Outcome {
    let g = load(path)?;
    let rep = htv_cpwl(&g, p)?;
    let mut stdout = io::stdout().lock();
    match report {
        Report::Text => writeln!(stdout, "{}", rep.total)?,
        Report::Json => {
            serde_json::to_writer_pretty(&mut stdout, &rep).map_err(|e| Failure::Domain(e.to_string()))?;
            writeln!(stdout)?;
        }
        Report::Csv => {
            let mesh = g.mesh();
            let mut w = csv::Writer::from_writer(stdout);
            for c in &rep.per_edge {
                let [a, b] = mesh.edges()[c.edge].vertices;
                let (pa, pb) = (mesh.coords()[a], mesh.coords()[b]);
                w.serialize(EdgeRow {
                    edge: c.edge,
                    x1: pa[0],
                    y1: pa[1],
                    x2: pb[0],
                    y2: pb[1],
                    jump_norm: c.jump[0].hypot(c.jump[1]),
                    length: c.length,
                    contribution: c.contribution,
                })?;
            }
            w.flush()?;
        }
    }
    Ok(())
}

fn approx_command(args: ApproxArgs) -> Outcome {
    let n = match (args.n, args.eps) {
        (None, None) => 1,
        (n, eps) => resolve_level(n, eps).map_err(|e| Failure::Usage(e.to_string()))?,
    };
    for dir in [&args.emit_mesh, &args.emit_svg].into_iter().flatten() {
        fs::create_dir_all(dir)?;
    }
    let levels: Vec<u32> = (args.k.lo..=args.k.hi).collect();
    let sink: Box<dyn Write> = match &args.out {
        Some(path) => Box::new(io::BufWriter::new(fs::File::create(path)?)),
        None => Box::new(io::stdout().lock()),
    };
    let mut w = csv::Writer::from_writer(sink);
    convergence_experiment_with(&args.field, n, &levels, args.p, args.mode, |row, g| {
        if let Some(dir) = &args.emit_mesh {
            save_mesh(g, dir.join(format!("mesh_K{}.json", row.k)))?;
        }
        if let Some(dir) = &args.emit_svg {
            render_svg(g, dir.join(format!("mesh_K{}.svg", row.k)), &SvgOptions::default())?;
        }
        w.serialize(row).map_err(|e| HtvError::Io(io::Error::other(e)))?;
        w.flush()?;
        Ok(())
    })?;
    Ok(())
}

fn extremal_test(path: &Path, tol: f64, witness: Option<&Path>) -> Outcome {
    if !(tol > 0.0 && tol < 1.0) {
        return Err(Failure::Usage(format!("--tol must lie in (0, 1), got {tol}")));
    }
    let g = load(path)?;
    let cert = is_extremal(&g, tol)?;
    if cert.extremal {
        println!("extremal (dim={})", cert.dim);
    } else {
        println!("not extremal (dim={})", cert.dim);
        if let (Some(out), Some(w)) = (witness, &cert.witness) {
            save_mesh(w, out)?;
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct DecompositionFile {
    htv: f64,
    residual: f64,
    coefficient_sum: f64,
    components: Vec<ComponentEntry>,
}

#[derive(Serialize)]
struct ComponentEntry {
    coefficient: f64,
    htv: f64,
    mesh: serde_json::Value,
}

fn extremal_decompose(path: &Path, tol: f64, out: Option<&Path>) -> Outcome {
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(Failure::Usage(format!("--tol must be positive, got {tol}")));
    }
    let g = load(path)?;
    let d = decompose(&g, tol)?;
    let components = d
        .components
        .iter()
        .map(|(t, c)| {
            let mesh = serde_json::from_str(&mesh_to_json(&t.function)).expect("mesh JSON round-trips");
            Ok(ComponentEntry { coefficient: *c, htv: t.htv()?, mesh })
        })
        .collect::<Result<Vec<_>, HtvError>>()?;
    let file = DecompositionFile {
        htv: htv_core::htv::htv(&g)?,
        residual: d.residual,
        coefficient_sum: d.coefficient_sum(),
        components,
    };
    let text = serde_json::to_string_pretty(&file).map_err(|e| Failure::Domain(e.to_string()))?;
    match out {
        Some(path) => fs::write(path, text + "\n")?,
        None => println!("{text}"),
    }
    Ok(())
}

fn selftest(json: bool) -> Outcome {
    let reports = run_all();
    if json {
        println!("{}", serde_json::to_string_pretty(&reports).map_err(|e| Failure::Domain(e.to_string()))?);
    } else {
        for r in &reports {
            println!("{r}");
        }
    }
    let failed: Vec<String> = reports.iter().filter(|r| !r.passed).map(|r| r.id.to_string()).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Domain(format!("failing checks: {}", failed.join(", "))))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn level_ranges() {
        assert_eq!("1..5".parse::<LevelRange>().unwrap(), LevelRange { lo: 1, hi: 5 });
        assert_eq!("2..=3".parse::<LevelRange>().unwrap(), LevelRange { lo: 2, hi: 3 });
        assert_eq!("4".parse::<LevelRange>().unwrap(), LevelRange { lo: 4, hi: 4 });
        assert!("5..1".parse::<LevelRange>().is_err());
        assert!("a..b".parse::<LevelRange>().is_err());
    }

    #[test]
    fn index_pairs() {
        assert_eq!(parse_index_pair("4, 2").unwrap(), (4, 2));
        assert!(parse_index_pair("4").is_err());
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
