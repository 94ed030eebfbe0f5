mod config;
mod output;
mod presets;
mod run;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use scarlab_core::{build_lattice, Boundary, Error, LatticeKind, LatticeSpec};

use config::{RunConfig, Target};
use output::{Meta, Sink};

#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Cap(String),
    Numerical(String),
    Io(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Cap(_) => 3,
            CliError::Numerical(_) => 4,
            CliError::Io(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Validation(m) => write!(f, "invalid input: {m}"),
            CliError::Cap(m) => write!(f, "cap exceeded: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let msg = e.to_string();
        match e {
            Error::DimensionCap { .. } | Error::DenseCap { .. } | Error::TooManySites(_) => CliError::Cap(msg),
            Error::InvalidLattice(_)
            | Error::InvalidSite { .. }
            | Error::LengthMismatch { .. }
            | Error::WrongLattice { .. }
            | Error::NotBipartite
            | Error::IllegalConfiguration(_)
            | Error::InvalidParameter(_)
            | Error::NonUniformConnectivity(_) => CliError::Validation(msg),
            _ => CliError::Numerical(msg),
        }
    }
}

#[derive(Parser)]
#[command(name = "scarlab", version, about = "Scar dynamics on constrained Rydberg lattices")]
struct Cli {
    /// Worker threads for parallel kernels.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone)]
struct Source {
    /// Embedded preset name (see `scarlab presets`).
    #[arg(long, conflicts_with = "config")]
    preset: Option<String>,
    /// Path to a TOML run configuration.
    #[arg(long, alias = "model")]
    config: Option<PathBuf>,
    /// Output directory (overrides `output.dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Maximal constrained dimension.
    #[arg(long)]
    dim_cap: Option<usize>,
}

#[derive(Args)]
struct OptimizeArgs {
    #[command(flatten)]
    source: Source,
    #[arg(long, value_parser = ["deformation", "boundary", "frequency"])]
    target: Option<String>,
    #[arg(long)]
    max_evals: Option<usize>,
}

#[derive(Args)]
struct LatticeArgs {
    #[arg(long, conflicts_with_all = ["config", "kind"])]
    preset: Option<String>,
    #[arg(long, conflicts_with = "kind")]
    config: Option<PathBuf>,
    /// square, honeycomb or decorated-honeycomb.
    #[arg(long)]
    kind: Option<String>,
    #[arg(long, default_value_t = 4)]
    lx: usize,
    #[arg(long, default_value_t = 4)]
    ly: usize,
    #[arg(long, default_value_t = false)]
    open: bool,
}

#[derive(Subcommand)]
enum Cmd {
    /// Time evolution of the return probability and local observables.
    Evolve(Source),
    /// Full spectrum, overlaps with |M_A> and entanglement entropies.
    Spectrum(Source),
    /// Forward-scattering subspace diagnostics and Casimir dynamics.
    Fsa(Source),
    /// Two-angle variational orbits and the synchronizing frequency.
    Tdvp(Source),
    /// Nelder-Mead maximization of the first-revival fidelity.
    Optimize(OptimizeArgs),
    /// Parameter scans of leakage or revival fidelity.
    Scan(Source),
    /// List embedded presets or print one.
    Presets {
        #[arg(long)]
        show: Option<String>,
    },
    /// Dump a lattice graph as JSON.
    Lattice(LatticeArgs),
}

/// Writes a line to stdout; a closed pipe is not an error.
fn emit(text: &str) {
    let _ = writeln!(std::io::stdout().lock(), "{text}");
}

fn load(source: &Source) -> Result<(RunConfig, String), CliError> {
    let (mut cfg, origin) = match (&source.preset, &source.config) {
        (Some(name), _) => (presets::find(name)?.config()?, format!("preset:{name}")),
        (None, Some(path)) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Validation(format!("cannot read {}: {e}", path.display())))?;
            (RunConfig::from_toml(&text)?, format!("config:{}", path.display()))
        }
        (None, None) => return Err(CliError::Validation("one of --preset or --config is required".into())),
    };
    if let Some(dir) = &source.out {
        cfg.output.dir = dir.display().to_string();
    }
    if let Some(cap) = source.dim_cap {
        cfg.numeric.dim_cap = Some(cap);
    }
    cfg.validate()?;
    Ok((cfg, origin))
}

fn execute(source: &Source, expected: &str, adjust: impl FnOnce(&mut RunConfig)) -> Result<(), CliError> {
    let (mut cfg, origin) = load(source)?;
    adjust(&mut cfg);
    cfg.validate()?;
    if cfg.experiment.name() != expected {
        return Err(CliError::Validation(format!(
            "{origin} describes a '{}' experiment; run `scarlab {}`",
            cfg.experiment.name(),
            cfg.experiment.name()
        )));
    }
    let meta = Meta { experiment: expected.into(), source: origin, config_hash: cfg.hash() };
    let mut sink = Sink::new(std::path::Path::new(&cfg.output.dir), meta)?;
    let mut ctx = run::Context::new(cfg)?;
    let report = run::run(&mut ctx, &mut sink)?;
    let doc = serde_json::json!({
        "meta": sink.meta_json(),
        "report": report,
        "files": sink.written.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
    });
    emit(&serde_json::to_string_pretty(&doc).map_err(|e| CliError::Io(e.to_string()))?);
    Ok(())
}

fn lattice_dump(args: &LatticeArgs) -> Result<(), CliError> {
    let spec = if args.preset.is_some() || args.config.is_some() {
        let src = Source { preset: args.preset.clone(), config: args.config.clone(), out: None, dim_cap: None };
        load(&src)?.0.lattice
    } else {
        let kind: LatticeKind = args.kind.as_deref().unwrap_or("square").parse()?;
        let boundary = if args.open { Boundary::Open } else { Boundary::Periodic };
        LatticeSpec::new(kind, args.lx, args.ly, boundary)
    };
    spec.validate()?;
    let graph = build_lattice(spec)?;
    emit(&serde_json::to_string_pretty(&graph.dump()).map_err(|e| CliError::Io(e.to_string()))?);
    Ok(())
}

fn list_presets(show: Option<&str>) -> Result<(), CliError> {
    if let Some(name) = show {
        emit(presets::find(name)?.source.trim_end());
        return Ok(());
    }
    for p in presets::PRESETS {
        let cfg = p.config()?;
        emit(&format!("{:<12} {:<9} {:<9} {}", p.name, cfg.experiment.name(), p.budget.as_str(), cfg.description));
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Validation("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Validation(e.to_string()))?;
    }
    match cli.cmd {
        Cmd::Evolve(s) => execute(&s, "evolve", |_| {}),
        Cmd::Spectrum(s) => execute(&s, "spectrum", |_| {}),
        Cmd::Fsa(s) => execute(&s, "fsa", |_| {}),
        Cmd::Tdvp(s) => execute(&s, "tdvp", |_| {}),
        Cmd::Scan(s) => execute(&s, "scan", |_| {}),
        Cmd::Optimize(o) => execute(&o.source, "optimize", |cfg| {
            if let config::Experiment::Optimize(e) = &mut cfg.experiment {
                if let Some(t) = &o.target {
                    e.target = match t.as_str() {
                        "boundary" => Target::Boundary,
                        "frequency" => Target::Frequency,
                        _ => Target::Deformation,
                    };
                }
                if let Some(m) = o.max_evals {
                    e.max_evals = m;
                }
            }
        }),
        Cmd::Presets { show } => list_presets(show.as_deref()),
        Cmd::Lattice(a) => lattice_dump(&a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("scarlab: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
