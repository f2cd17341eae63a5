use std::path::PathBuf;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use archipelago::island::{Island, IslandConfig};
use archipelago::scenario::{self, ScenarioConfig, Trinity};

#[derive(Parser)]
#[command(name = "archipelago", version, about = "Federated active-data islands")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one island service.
    Island {
        #[arg(long)]
        name: Option<String>,
        #[arg(long)]
        port: Option<u16>,
        #[arg(long)]
        data_dir: Option<PathBuf>,
        /// TOML island config; flags override it.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// The three-island prototype.
    Demo {
        #[command(subcommand)]
        action: Demo,
    },
}

#[derive(Subcommand)]
enum Demo {
    /// Deploy the prototype and keep in-process islands running.
    Deploy(DemoArgs),
    /// Deploy, stream the workload and report delivery delays.
    Run(DemoArgs),
    /// Run the delay experiment and write CSV files and a summary.
    Delays(DemoArgs),
}

#[derive(Args)]
struct DemoArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Channel period, e.g. `1s` or `PT2S`. For `delays` it replaces the
    /// configured period list.
    #[arg(long)]
    period: Option<String>,
    #[arg(long)]
    executions: Option<u32>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

impl DemoArgs {
    fn scenario(&self, single_period: bool) -> anyhow::Result<ScenarioConfig> {
        let mut cfg = match &self.config {
            Some(p) => ScenarioConfig::load(p)?,
            None => ScenarioConfig::default(),
        };
        if let Some(p) = &self.period {
            cfg.period = p.clone();
            if single_period {
                cfg.periods = vec![p.clone()];
            }
        }
        if let Some(n) = self.executions {
            cfg.executions = n;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(d) = &self.out_dir {
            cfg.out_dir = d.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

async fn island(
    name: Option<String>,
    port: Option<u16>,
    data_dir: Option<PathBuf>,
    config: Option<PathBuf>,
) -> anyhow::Result<()> {
    let mut cfg = match config {
        Some(p) => {
            let text =
                std::fs::read_to_string(&p).with_context(|| format!("reading {}", p.display()))?;
            IslandConfig::from_toml(&text)?
        }
        None => IslandConfig::default(),
    };
    if let Some(n) = name {
        cfg.name = n;
    }
    if let Some(p) = port {
        cfg.port = p;
    }
    if data_dir.is_some() {
        cfg.data_dir = data_dir;
    }
    let island = Island::start(cfg).await?;
    println!(
        "island {} listening on {}",
        island.name(),
        island.url().unwrap_or_default()
    );
    tokio::signal::ctrl_c().await?;
    island.shutdown();
    Ok(())
}

async fn demo(action: Demo) -> anyhow::Result<()> {
    match action {
        Demo::Deploy(args) => {
            let cfg = args.scenario(false)?;
            let t = Trinity::connect(&cfg).await?;
            let d = scenario::deploy_trinity(&cfg, &t, cfg.period()?).await?;
            println!("dhs  {}", t.dhs.base_url());
            println!("ocsd {}", t.ocsd.base_url());
            println!("uci  {}", t.uci.base_url());
            println!(
                "tweet feed {}  location feed {}",
                d.tweet_feed, d.location_feed
            );
            if !t.local().is_empty() {
                println!("islands run in this process; ctrl-c stops them");
                tokio::signal::ctrl_c().await?;
            }
            t.shutdown();
        }
        Demo::Run(args) => {
            let cfg = args.scenario(false)?;
            let t = Trinity::connect(&cfg).await?;
            let d = scenario::deploy_trinity(&cfg, &t, cfg.period()?).await?;
            let log = scenario::run_workload(&cfg, &t, &d, cfg.executions).await?;
            t.shutdown();
            let (records, islands) = scenario::delay_records(&log)?;
            println!(
                "{} tweets sent, {} officer updates",
                log.tweets.len(),
                log.officer_posts
            );
            for i in islands {
                println!(
                    "{:<5} mean delay {:.1} ms over {} deliveries in {} executions",
                    i.island, i.mean_delay_ms, i.deliveries, i.executions
                );
            }
            for r in records {
                println!("{},{},{:.1}", r.execution_index, r.island, r.mean_delay_ms);
            }
            if let Some(why) = log.aborted {
                anyhow::bail!("run aborted: {why}");
            }
        }
        Demo::Delays(args) => {
            let cfg = args.scenario(true)?;
            let report = scenario::run_delay_experiment(&cfg).await?;
            print!("{}", report.summary);
            println!("summary written to {}", report.summary_path.display());
        }
    }
    Ok(())
}

#[tokio::main]
async fn main() -> anyhow::Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "warn".into()),
        )
        .with_writer(std::io::stderr)
        .init();
    match Cli::parse().command {
        Command::Island {
            name,
            port,
            data_dir,
            config,
        } => island(name, port, data_dir, config).await,
        Command::Demo { action } => demo(action).await,
    }
}
