use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use gridstates_experiments::audit::audit;
use gridstates_experiments::config::{Experiment, ExperimentConfig, Settings};
use gridstates_experiments::error::{CliError, Result};
use gridstates_experiments::runs::{estimate_seconds, run};

/// Regenerates grid-state preparation tables and figure data.
///
/// Values come from built-in defaults, then `--config`, then flags.
#[derive(Debug, Parser)]
#[command(name = "gridstates", version)]
struct Cli {
    experiment: Experiment,

    /// Flat TOML file with `schema_version = 1`.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory [default: results].
    #[arg(long)]
    out: Option<PathBuf>,
    /// Number of rounds.
    #[arg(long)]
    n: Option<usize>,
    /// Input squeezing in dB.
    #[arg(long)]
    input_db: Option<f64>,
    /// square, rect:C or hex.
    #[arg(long)]
    lattice: Option<String>,
    /// Logical amplitude as RE,IM.
    #[arg(long, value_parser = parse_complex, allow_hyphen_values = true)]
    c0: Option<[f64; 2]>,
    #[arg(long, value_parser = parse_complex, allow_hyphen_values = true)]
    c1: Option<[f64; 2]>,
    /// trapped_ion or microwave_cavity.
    #[arg(long)]
    preset: Option<String>,
    /// qubit_decay, qubit_dephasing, boson_loss or boson_dephasing.
    #[arg(long)]
    channel: Option<String>,
    /// Single rate in units of the gate time.
    #[arg(long)]
    gamma_t: Option<f64>,
    /// Only run the postselected branch.
    #[arg(long)]
    postselect: bool,
    /// shift_error, delta_p or flat.
    #[arg(long)]
    objective: Option<String>,
    #[arg(long)]
    fock_dim: Option<usize>,
    /// Worker threads.
    #[arg(long)]
    jobs: Option<usize>,
    /// Allow cells with four or more rounds.
    #[arg(long)]
    long: bool,
    /// Recorded in the metadata; every run is deterministic.
    #[arg(long)]
    seed: Option<u64>,
    /// Wigner grid points per axis, 0 to skip.
    #[arg(long)]
    wigner_points: Option<usize>,
    /// Rerun at doubled dimension and check published values.
    #[arg(long)]
    audit: bool,
}

fn parse_complex(s: &str) -> std::result::Result<[f64; 2], String> {
    let (re, im) = s.split_once(',').ok_or_else(|| format!("expected RE,IM, got '{s}'"))?;
    let p = |x: &str| x.trim().parse::<f64>().map_err(|e| format!("'{x}': {e}"));
    Ok([p(re)?, p(im)?])
}

impl Cli {
    fn settings(&self) -> Settings {
        Settings {
            experiment: Some(self.experiment),
            n: self.n,
            input_db: self.input_db,
            lattice: self.lattice.clone(),
            c0: self.c0,
            c1: self.c1,
            objective: self.objective.clone(),
            preset: self.preset.clone(),
            channel: self.channel.clone(),
            gamma_t: self.gamma_t,
            postselect: self.postselect.then_some(true),
            fock_dim: self.fock_dim,
            out: self.out.clone(),
            jobs: self.jobs,
            long: self.long.then_some(true),
            seed: self.seed,
            wigner_points: self.wigner_points,
            ..Settings::default()
        }
    }
}

fn execute(cli: &Cli) -> Result<()> {
    let cfg = ExperimentConfig::load(cli.config.as_deref(), cli.settings())?;
    let mut secs = estimate_seconds(&cfg);
    if cli.audit && cfg.experiment != Experiment::Table1 {
        // the doubled-dimension rerun costs about four times as much
        secs *= 5.0;
    }
    eprintln!("{}: estimated {:.0} s", cfg.experiment.as_str(), secs.ceil());
    let (out, failed) = if cli.audit {
        let (out, checks) = audit(&cfg)?;
        for c in checks.iter().filter(|c| !c.pass) {
            eprintln!("audit FAIL {}: {} vs {} (tol {})", c.name, c.value, c.reference, c.tolerance);
        }
        eprintln!("audit: {} of {} checks passed", checks.iter().filter(|c| c.pass).count(), checks.len());
        (out, checks.iter().filter(|c| !c.pass).count())
    } else {
        (run(&cfg)?, 0)
    };
    for f in out.write(&cfg.out)? {
        println!("{}", f.display());
    }
    if failed > 0 {
        return Err(CliError::Audit { failed });
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
