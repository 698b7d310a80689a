use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use trustmdp::experiment::{
    fit_population_prior, PriorSpec, RobotWeightName, RobotWeightSpec, ScenarioSource,
};
use trustmdp::scenario::{load_scenario, save_scenario};
use trustmdp::service::{SessionDefaults, SessionManager};
use trustmdp::{
    generate_scenario, run_comparison, ComparisonTable, ExperimentConfig, MissionConfig,
    StrategyKind,
};

use crate::api::{router, AppState};

#[derive(Debug, Parser)]
#[command(
    name = "trustmdp",
    version,
    about = "Trust-aware recommendation experiments"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Monte-Carlo comparison of recommendation strategies.
    Run(RunArgs),
    /// Write a generated scenario to a JSON file.
    Generate {
        #[arg(long, default_value_t = 40)]
        sites: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit an informed prior from synthetic population missions.
    FitPrior {
        #[arg(long, default_value_t = 30)]
        humans: usize,
        #[arg(long, default_value_t = 40)]
        sites: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Experiment configuration JSON describing the population.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Serve interactive sessions over HTTP.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
        /// Directory for per-session event logs; sessions there are replayed on start.
        #[arg(long)]
        log_dir: Option<PathBuf>,
        #[arg(long)]
        robot_w_health: Option<f64>,
        #[arg(long)]
        kappa: Option<f64>,
    },
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Use this scenario file for every replication.
    #[arg(long, conflicts_with = "generate")]
    pub scenario: Option<PathBuf>,
    /// Generate one `M`-site scenario from `SEED` and use it for every replication.
    #[arg(long, num_args = 2, value_names = ["M", "SEED"])]
    pub generate: Option<Vec<u64>>,
    /// Sites per freshly generated scenario when neither `--scenario` nor
    /// `--generate` is given.
    #[arg(long)]
    pub sites: Option<usize>,
    /// Comma-separated strategies, or `all`.
    #[arg(long, value_delimiter = ',')]
    pub strategy: Option<Vec<String>>,
    /// `uniform`, `uniform:N` or `file:PATH`.
    #[arg(long)]
    pub prior: Option<String>,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Robot health weight, or `prior-mean`.
    #[arg(long)]
    pub robot_w_health: Option<String>,
    #[arg(long)]
    pub kappa: Option<f64>,
    /// Base experiment configuration (JSON); flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

fn read_config(path: &Path) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn parse_strategies(names: &[String]) -> Result<Vec<StrategyKind>> {
    if names.iter().any(|n| n == "all") {
        return Ok(StrategyKind::ALL.to_vec());
    }
    names
        .iter()
        .map(|n| Ok(n.parse::<StrategyKind>()?))
        .collect()
}

fn parse_robot_weight(s: &str) -> Result<RobotWeightSpec> {
    if s == "prior-mean" {
        return Ok(RobotWeightSpec::Named(RobotWeightName::PriorMean));
    }
    let w: f64 = s
        .parse()
        .with_context(|| format!("robot weight `{s}` is neither a number nor prior-mean"))?;
    if !(0.0..=1.0).contains(&w) {
        bail!("robot weight {w} outside [0, 1]");
    }
    Ok(RobotWeightSpec::Fixed(w))
}

/// Experiment configuration described by `args`.
pub fn experiment_config(args: &RunArgs) -> Result<ExperimentConfig> {
    let mut cfg = match &args.config {
        Some(p) => read_config(p)?,
        None => ExperimentConfig::new(40, 200, 0),
    };
    if let Some(path) = &args.scenario {
        cfg.scenario = ScenarioSource::Fixed {
            scenario: load_scenario(path)?,
        };
    } else if let Some(g) = &args.generate {
        let (m, seed) = (g[0] as usize, g[1]);
        cfg.scenario = ScenarioSource::Fixed {
            scenario: generate_scenario(&MissionConfig::new(m), seed)?,
        };
    } else if let Some(m) = args.sites {
        cfg.scenario = ScenarioSource::Generate {
            mission: MissionConfig::new(m),
        };
    }
    if let Some(s) = &args.strategy {
        cfg.strategies = parse_strategies(s)?;
    }
    if let Some(p) = &args.prior {
        cfg.prior = p.parse::<PriorSpec>()?;
    }
    if let Some(r) = args.reps {
        cfg.reps = r;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(w) = &args.robot_w_health {
        cfg.robot_w_health = parse_robot_weight(w)?;
    }
    if let Some(k) = args.kappa {
        cfg.robot_kappa = k;
    }
    Ok(cfg)
}

pub fn run(args: &RunArgs) -> Result<ComparisonTable> {
    let cfg = experiment_config(args)?;
    let table = run_comparison(&cfg)?;
    table.write_outputs(&args.out)?;
    Ok(table)
}

fn print_summary(table: &ComparisonTable, out: &Path) {
    println!(
        "{:<14} {:>6} {:>16} {:>16} {:>14} {:>16}",
        "strategy", "n", "avg trust", "end trust", "agreements", "performance"
    );
    for s in &table.summary {
        println!(
            "{:<14} {:>6} {:>8.3} ± {:<5.3} {:>8.3} ± {:<5.3} {:>6.1} ± {:<5.1} {:>8.1} ± {:<5.1}",
            s.strategy.as_str(),
            s.n,
            s.average_trust.mean,
            s.average_trust.sd,
            s.end_trust.mean,
            s.end_trust.sd,
            s.agreements.mean,
            s.agreements.sd,
            s.performance.mean,
            s.performance.sd
        );
    }
    println!("outputs written to {}", out.display());
}

pub fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run(args) => {
            let table = run(&args)?;
            print_summary(&table, &args.out);
        }
        Command::Generate { sites, seed, out } => {
            let scenario = generate_scenario(&MissionConfig::new(sites), seed)?;
            save_scenario(&scenario, &out)?;
        }
        Command::FitPrior {
            humans,
            sites,
            seed,
            config,
            out,
        } => {
            let mut cfg = match config {
                Some(p) => read_config(&p)?,
                None => ExperimentConfig::new(sites, 1, seed),
            };
            if let ScenarioSource::Generate { mission } = &mut cfg.scenario {
                mission.num_sites = sites;
            }
            let prior = fit_population_prior(&cfg, humans, seed)?;
            prior.save(&out)?;
            println!(
                "prior mean {:.4} written to {}",
                prior.mean(),
                out.display()
            );
        }
        Command::Serve {
            addr,
            log_dir,
            robot_w_health,
            kappa,
        } => {
            let mut defaults = SessionDefaults::default();
            if let Some(w) = robot_w_health {
                defaults.robot_w_health = w;
            }
            if let Some(k) = kappa {
                defaults.kappa = k;
            }
            let sessions = match log_dir {
                Some(dir) => SessionManager::persistent(dir)?,
                None => SessionManager::in_memory(),
            }
            .with_defaults(defaults);
            serve(addr, AppState::new(sessions))?;
        }
    }
    Ok(())
}

fn serve(addr: SocketAddr, state: AppState) -> Result<()> {
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr).await?;
        eprintln!("listening on http://{}", listener.local_addr()?);
        axum::serve(listener, router(state))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await?;
        Ok(())
    })
}
