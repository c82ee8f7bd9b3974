use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use cnls::run::write_error_record;
use cnls::{run, status, Command, RawConfig, RunError};

#[derive(Parser)]
#[command(
    name = "cnls",
    version,
    about = "Ground states and dynamics of the radial NLS with combined powers"
)]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Zero-mass static solution, decay law and mountain-pass constants.
    Static(Flags),
    /// Fiber-map analysis of a Gaussian or of the static solution.
    Fiber(Flags),
    /// Ground states at given masses or frequencies.
    Groundstate(Flags),
    /// Ground-state energy over a list of masses.
    Curve(Flags),
    /// Split-step evolution with conservation and virial diagnostics.
    Evolve(Flags),
    /// Evolution of a rescaled ground state, classified global or blow-up.
    Dichotomy(Flags),
    /// Plot-ready data for the two energy-curve panels.
    Figure(Flags),
}

/// Every flag is a config key; commands reject keys they do not use.
#[derive(Args, Default)]
struct Flags {
    /// INI file; the unnamed section and the `[command]` section are read.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    p: Option<String>,
    #[arg(long)]
    q: Option<String>,
    #[arg(long)]
    rmax: Option<String>,
    #[arg(long)]
    n: Option<String>,
    /// Output directory (default `results`).
    #[arg(long)]
    out: Option<String>,
    /// Reuse cached results (the default).
    #[arg(long, overrides_with = "no_cache")]
    cache: bool,
    #[arg(long)]
    no_cache: bool,
    #[arg(long)]
    cache_dir: Option<String>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    jobs: Option<String>,
    /// Comma-separated mass parameters rho = sqrt(M).
    #[arg(long, allow_hyphen_values = true)]
    masses: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    omegas: Option<String>,
    #[arg(long)]
    source: Option<String>,
    #[arg(long)]
    datum: Option<String>,
    #[arg(long)]
    amplitude: Option<String>,
    #[arg(long)]
    width: Option<String>,
    #[arg(long)]
    rho: Option<String>,
    #[arg(long)]
    rho_fraction: Option<String>,
    #[arg(long)]
    mu_scale: Option<String>,
    #[arg(long)]
    t_end: Option<String>,
    #[arg(long)]
    dt: Option<String>,
    #[arg(long)]
    sample_every: Option<String>,
    #[arg(long)]
    left_p: Option<String>,
    #[arg(long)]
    left_q: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    left_masses: Option<String>,
    #[arg(long)]
    right_p: Option<String>,
    #[arg(long)]
    right_q: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    right_masses: Option<String>,
}

impl Flags {
    fn overrides(&self) -> Vec<(&'static str, String)> {
        let mut v: Vec<(&'static str, String)> = [
            ("p", &self.p),
            ("q", &self.q),
            ("rmax", &self.rmax),
            ("n", &self.n),
            ("out", &self.out),
            ("cache_dir", &self.cache_dir),
            ("jobs", &self.jobs),
            ("masses", &self.masses),
            ("omegas", &self.omegas),
            ("source", &self.source),
            ("datum", &self.datum),
            ("amplitude", &self.amplitude),
            ("width", &self.width),
            ("rho", &self.rho),
            ("rho_fraction", &self.rho_fraction),
            ("mu_scale", &self.mu_scale),
            ("t_end", &self.t_end),
            ("dt", &self.dt),
            ("sample_every", &self.sample_every),
            ("left_p", &self.left_p),
            ("left_q", &self.left_q),
            ("left_masses", &self.left_masses),
            ("right_p", &self.right_p),
            ("right_q", &self.right_q),
            ("right_masses", &self.right_masses),
        ]
        .into_iter()
        .filter_map(|(k, v)| v.clone().map(|v| (k, v)))
        .collect();
        if self.cache {
            v.push(("cache", "true".into()));
        }
        if self.no_cache {
            v.push(("cache", "false".into()));
        }
        v
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() {
                status::CONFIG
            } else {
                status::SUCCESS
            });
        }
    };
    let (command, flags) = match cli.command {
        Sub::Static(f) => (Command::Static, f),
        Sub::Fiber(f) => (Command::Fiber, f),
        Sub::Groundstate(f) => (Command::GroundState, f),
        Sub::Curve(f) => (Command::Curve, f),
        Sub::Evolve(f) => (Command::Evolve, f),
        Sub::Dichotomy(f) => (Command::Dichotomy, f),
        Sub::Figure(f) => (Command::Figure, f),
    };

    let mut raw = match &flags.config {
        Some(path) => match RawConfig::from_ini(path, command) {
            Ok(r) => r,
            Err(e) => return fail(flags.out.as_deref(), e.into()),
        },
        None => RawConfig::default(),
    };
    for (key, value) in flags.overrides() {
        raw.set(key, value);
    }
    let config = match raw.resolve(command) {
        Ok(c) => c,
        Err(e) => return fail(raw.get("out"), e.into()),
    };
    match run(&config) {
        Ok(summary) => {
            let verb = if summary.reused { "reused" } else { "wrote" };
            println!(
                "{verb} {} artifacts in {} (config {})",
                summary.artifacts.len(),
                config.out.display(),
                summary.config_hash
            );
            for a in &summary.artifacts {
                println!("  {}", a.path);
            }
            ExitCode::from(summary.status)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.status())
        }
    }
}

fn fail(out: Option<&str>, err: RunError) -> ExitCode {
    eprintln!("error: {err}");
    write_error_record(&PathBuf::from(out.unwrap_or("results")), &err);
    ExitCode::from(err.status())
}
