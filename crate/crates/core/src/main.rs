use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ewa_mcmc::error::Error;
use ewa_mcmc::harness::{run_pipeline, ExperimentConfig, InitSpec, Stages};
use ewa_mcmc::report::Verdict;

#[derive(Parser)]
#[command(
    name = "ewa-mcmc",
    version,
    about = "Model-selection MCMC sampler with exact diagnostics"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate instances and write instance.json per seed
    Gen(Common),
    /// Run the thresholded lasso initializer
    Init(Common),
    /// Run the sampler
    Sample(Common),
    /// Build the exact transition matrix and check its spectrum
    Oracle(Common),
    /// Canonical paths, loadings and the path inequalities
    Paths(Common),
    /// Exact TV decay and mixing times
    Mixing(Common),
    /// Every stage
    Suite(Common),
}

#[derive(Args, Clone)]
struct Common {
    /// TOML experiment config
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Output directory (EWA_MCMC_OUTPUT_DIR takes precedence)
    #[arg(short, long)]
    out: Option<PathBuf>,
    #[arg(long, num_args = 1.., value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    #[arg(long)]
    replications: Option<u64>,
    #[arg(short)]
    n: Option<usize>,
    #[arg(short)]
    p: Option<usize>,
    #[arg(long = "s-star")]
    s_star: Option<usize>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    c: Option<f64>,
    /// "lasso", "truth", or comma-separated indices
    #[arg(long = "t-hat")]
    t_hat: Option<String>,
    /// Run the non-lazy chain
    #[arg(long)]
    no_lazy: bool,
    /// Print the report without writing files
    #[arg(long)]
    dry_run: bool,
}

impl Common {
    fn config(&self) -> Result<ExperimentConfig, Error> {
        let mut e = match &self.config {
            Some(path) => ExperimentConfig::from_file(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(o) = &self.out {
            e.outputs = o.clone();
        }
        if let Some(s) = &self.seeds {
            e.seeds = s.clone();
        }
        if let Some(r) = self.replications {
            e.replications = r;
        }
        if let Some(v) = self.n {
            e.n = v;
        }
        if let Some(v) = self.p {
            e.p = v;
        }
        if let Some(v) = self.s_star {
            e.s_star = v;
        }
        if let Some(v) = self.steps {
            e.steps = v;
        }
        if let Some(v) = self.eps {
            e.eps = v;
        }
        if let Some(v) = self.c {
            e.chain.c = Some(v);
        }
        if let Some(t) = &self.t_hat {
            e.chain.t_hat = match t.as_str() {
                "lasso" | "truth" => InitSpec::Named(t.clone()),
                list => InitSpec::Indices(
                    list.split(',')
                        .filter(|s| !s.trim().is_empty())
                        .map(|s| s.trim().parse::<usize>())
                        .collect::<Result<_, _>>()
                        .map_err(|err| Error::ConfigInvalid(format!("--t-hat: {err}")))?,
                ),
            };
        }
        if self.no_lazy {
            e.lazy = false;
        }
        e.validate()?;
        Ok(e)
    }
}

fn stages(cmd: &Cmd) -> (Stages, &Common) {
    let none = Stages::NONE;
    match cmd {
        Cmd::Gen(c) => (none, c),
        Cmd::Init(c) => (
            Stages {
                initializer: true,
                ..none
            },
            c,
        ),
        Cmd::Sample(c) => (Stages { sampler: true, ..none }, c),
        Cmd::Oracle(c) => (
            Stages {
                oracle: true,
                events: true,
                ..none
            },
            c,
        ),
        Cmd::Paths(c) => (
            Stages {
                paths: true,
                events: true,
                ..none
            },
            c,
        ),
        Cmd::Mixing(c) => (
            Stages {
                mixing: true,
                events: true,
                ..none
            },
            c,
        ),
        Cmd::Suite(c) => (Stages::ALL, c),
    }
}

fn run(cli: &Cli) -> Result<bool, Error> {
    let (st, common) = stages(&cli.cmd);
    let ecfg = common.config()?;
    let exact_only = !matches!(cli.cmd, Cmd::Suite(_)) && (st.oracle || st.paths || st.mixing);
    if exact_only && (1u128 << ecfg.p) > ecfg.oracle_cap as u128 {
        return Err(Error::StateSpaceTooLarge {
            states: 1u128 << ecfg.p,
            cap: ecfg.oracle_cap as u128,
        });
    }
    let (summary, reports) = run_pipeline(&ecfg, st, !common.dry_run)?;
    for r in &reports {
        let fails: Vec<_> = r.ledger.enforced_failures();
        let info = r
            .ledger
            .checks
            .iter()
            .filter(|c| !c.enforced && c.verdict == Verdict::Fail)
            .count();
        println!(
            "seed {}: {} ({} checks, {} enforced failures, {} informational failures)",
            r.seed,
            if fails.is_empty() { "pass" } else { "FAIL" },
            r.ledger.checks.len(),
            fails.len(),
            info
        );
        for c in fails {
            println!(
                "  {}: {} (measured {:?}, threshold {:?})",
                c.name, c.claim, c.measured, c.threshold
            );
        }
    }
    if !common.dry_run {
        println!("outputs in {}", ecfg.output_dir().display());
    }
    Ok(summary.all_pass())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) if e.is_resource_cap() => {
            eprintln!("error: {e}");
            ExitCode::from(3)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
