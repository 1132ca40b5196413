use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use metastab_core::experiments::{emit_csv, run, ExperimentConfig, Overrides, Study};
use metastab_core::Error;

const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "metastab", version, about = "Metastability studies for viscous Burgers dynamics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// List the registered studies.
    List,
    /// Run one study and write its CSV files.
    Run(Box<RunArgs>),
}

#[derive(clap::Args, Debug)]
struct RunArgs {
    /// Study name (see `metastab list`).
    study: String,
    /// Flat `key = value` config file; flags given here override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Viscosity; repeat for a sweep.
    #[arg(long = "mu")]
    mu: Vec<f64>,
    #[arg(long)]
    mass: Option<f64>,
    #[arg(long, requires = "q")]
    p: Option<f64>,
    #[arg(long, requires = "p")]
    q: Option<f64>,
    /// Weight exponent of the L²(m) norm.
    #[arg(long)]
    m: Option<f64>,
    #[arg(long = "grid-n")]
    grid_n: Option<usize>,
    #[arg(long = "grid-l")]
    grid_l: Option<f64>,
    /// Initial time step of the solver.
    #[arg(long)]
    dt: Option<f64>,
    /// Output directory; files go to `<out>/<study>/`.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

impl RunArgs {
    fn overrides(&self) -> Overrides {
        let mut o = Overrides::default();
        if !self.mu.is_empty() {
            let list: Vec<String> = self.mu.iter().map(|m| m.to_string()).collect();
            o.push("mu", list.join(","));
        }
        let scalars = [
            ("mass", self.mass),
            ("p", self.p),
            ("q", self.q),
            ("m", self.m),
            ("grid_l", self.grid_l),
            ("dt", self.dt),
        ];
        for (key, value) in scalars {
            if let Some(v) = value {
                o.push(key, v);
            }
        }
        if let Some(n) = self.grid_n {
            o.push("grid_n", n);
        }
        if let Some(out) = &self.out {
            o.push("out", out.display());
        }
        if let Some(seed) = self.seed {
            o.push("seed", seed);
        }
        o
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::InvalidParameter(_) | Error::InvalidGrid(_) | Error::Io { .. } => EXIT_CONFIG,
        _ => EXIT_NUMERICAL,
    }
}

fn build_config(args: &RunArgs) -> Result<ExperimentConfig, Error> {
    let study = Study::from_name(&args.study).ok_or_else(|| {
        Error::Config(format!("unknown study '{}'; try `metastab list`", args.study))
    })?;
    let mut config = ExperimentConfig::new(study);
    if let Some(path) = &args.config {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        let file = Overrides::parse(&text)?;
        if let Some((_, s)) = file.entries.iter().find(|(k, _)| k == "study") {
            if s != study.name() {
                return Err(Error::Config(format!(
                    "config file is for study '{s}', command line asks for '{study}'"
                )));
            }
        }
        config.apply(&file)?;
    }
    config.apply(&args.overrides())?;
    config.validate()?;
    Ok(config)
}

fn run_study(args: &RunArgs) -> Result<u8, Error> {
    let config = build_config(args)?;
    let result = run(&config)?;
    let dir = config.output_dir.join(config.study.name());
    let files = emit_csv(&result, &dir)?;
    println!("{} ({} rows)", result.tag(), result.rows.len());
    for f in files {
        println!("  wrote {}", f.display());
    }
    if result.failures.is_empty() {
        return Ok(0);
    }
    let mut code = 0;
    for f in &result.failures {
        eprintln!("error: mu = {}: {}", f.mu, f.error);
        code = code.max(exit_code(&f.error));
    }
    Ok(code)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::List => {
            for s in Study::ALL {
                println!("{:<20} {}", s.name(), s.description());
            }
            ExitCode::SUCCESS
        }
        Command::Run(args) => match run_study(&args) {
            Ok(code) => ExitCode::from(code),
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(exit_code(&e))
            }
        },
    }
}
