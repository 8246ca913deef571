//! `lanegraph` command line: every pipeline stage as a subcommand over files.

use std::fs;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::LazyLock;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use log::{info, warn};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use tempfile::NamedTempFile;

use lanegraph::analysis::{classify, render_plg, render_scenario, summarise, CornerCaseRecord, Summary};
use lanegraph::config::RunConfig;
use lanegraph::container;
use lanegraph::corpus::TickCorpus;
use lanegraph::ingest::{generate_synthetic_corpus, load_dataset, write_dataset, ColumnMapping, Dataset};
use lanegraph::planner::{build_conditional_table, default_max_len, plan_path, PlanEnd};
use lanegraph::plg::{
    build_plg, deserialise_bundle, deserialise_plg, nodal_paths, serialise_bundle, PlgBundle,
    PLG_FORMAT_VERSION,
};
use lanegraph::policy::{
    deserialise_empirical, fit_empirical_policy, serialise_empirical, serialise_policy, AnyPolicy,
    PolicyCheckpoint, EMPIRICAL_FORMAT_VERSION, POLICY_FORMAT_VERSION,
};
use lanegraph::ppo::{initial_policy, train, IterationMetrics};
use lanegraph::sim::{
    deserialise_seeds, extract_seed_states, read_episode_csv, serialise_seeds, simulate_episodes,
    write_episode_csv, EpisodeMeta, EpisodeSidecar, Policies, SEED_FORMAT_VERSION,
};

const EPISODE_FORMAT_VERSION: u32 = 1;
const REPORT_FORMAT_VERSION: u32 = 1;

static VERSION_MATRIX: LazyLock<String> = LazyLock::new(|| {
    format!(
        "{}\nformat versions:\n  plg          {PLG_FORMAT_VERSION}\n  policy       {POLICY_FORMAT_VERSION}\n  empirical    {EMPIRICAL_FORMAT_VERSION}\n  seeds        {SEED_FORMAT_VERSION}\n  episodes     {EPISODE_FORMAT_VERSION}\n  report       {REPORT_FORMAT_VERSION}",
        env!("CARGO_PKG_VERSION")
    )
});

#[derive(Parser)]
#[command(name = "lanegraph", version, long_version = VERSION_MATRIX.as_str(), about = "Lane-graph learning, simulation and corner-case search")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Run configuration (TOML, or JSON with a .json extension); flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for every random choice in the command.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for simulation and rollouts.
    #[arg(long, global = true)]
    jobs: Option<usize>,
}

#[derive(Args)]
struct DataArgs {
    /// Trajectory CSV.
    #[arg(long)]
    data: PathBuf,
    /// Column mapping (TOML or JSON); the canonical layout when omitted.
    #[arg(long)]
    mapping: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic trajectory corpus in the canonical CSV layout.
    SynthData {
        #[arg(long)]
        out: PathBuf,
    },
    /// Learn a lane graph and conditional path table from trajectories.
    BuildPlg {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        radius: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Sample paths toward a target exit cluster and print them as CSV.
    Plan {
        #[arg(long)]
        plg: PathBuf,
        #[arg(long)]
        start: usize,
        #[arg(long)]
        target: usize,
        #[arg(long, default_value_t = 100)]
        n: usize,
        #[arg(long)]
        max_len: Option<usize>,
    },
    /// Fit the empirical risk-conditioned action policy.
    FitPolicy {
        #[arg(long)]
        plg: PathBuf,
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        out: PathBuf,
        /// Also write the behaviour-cloned network training would start from.
        #[arg(long)]
        clone_out: Option<PathBuf>,
    },
    /// Extract high-risk seed states from the data.
    ExtractSeeds {
        #[arg(long)]
        plg: PathBuf,
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        tau: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the action policy with PPO.
    Train {
        #[arg(long)]
        plg: PathBuf,
        #[arg(long)]
        empirical: PathBuf,
        #[arg(long)]
        seeds: PathBuf,
        #[arg(long)]
        policy_out: PathBuf,
        /// Per-iteration metrics CSV; next to the policy when omitted.
        #[arg(long)]
        metrics_out: Option<PathBuf>,
        #[arg(long)]
        iterations: Option<usize>,
        #[arg(long)]
        lr: Option<f64>,
    },
    /// Simulate episodes from seed states and log them.
    Simulate {
        #[arg(long)]
        plg: PathBuf,
        /// Trained or empirical policy file.
        #[arg(long)]
        policy: PathBuf,
        /// Policy for the other vehicles when only the ego is assigned the main one.
        #[arg(long)]
        background: Option<PathBuf>,
        #[arg(long)]
        seeds: PathBuf,
        #[arg(long, default_value_t = 1000)]
        episodes: usize,
        #[arg(long)]
        max_ticks: Option<usize>,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Classify collisions and summarise a run directory.
    Analyse {
        #[arg(long)]
        runs: PathBuf,
        /// Lane-change look-back horizon, seconds.
        #[arg(long = "T")]
        horizon: Option<f64>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        render_dir: Option<PathBuf>,
        /// Most scenarios drawn into the render directory.
        #[arg(long, default_value_t = 20)]
        render_limit: usize,
    },
    /// Draw the lane graph, or one episode over it.
    Render {
        #[arg(long)]
        plg: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Run directory holding the episode to draw.
        #[arg(long, requires = "episode")]
        runs: Option<PathBuf>,
        #[arg(long, requires = "runs")]
        episode: Option<usize>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .format_target(false)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", describe(&e));
            ExitCode::from(2)
        }
    }
}

/// The error chain joined by `: `, dropping causes already quoted by the layer above.
fn describe(e: &anyhow::Error) -> String {
    let mut out = String::new();
    let mut prev = String::new();
    for cause in e.chain() {
        let text = cause.to_string();
        if !prev.contains(&text) {
            if !out.is_empty() {
                out.push_str(": ");
            }
            out.push_str(&text);
        }
        prev = text;
    }
    out
}

fn run(cli: Cli) -> Result<()> {
    if let Some(jobs) = cli.global.jobs {
        if jobs == 0 {
            bail!("--jobs must be at least 1");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .context("configuring the worker pool")?;
    }
    let mut cfg = match &cli.global.config {
        Some(p) => RunConfig::load(p).with_context(|| format!("loading {}", p.display()))?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.global.seed {
        cfg.seed = s;
    }
    cfg.sim.seed = cfg.seed;
    cfg.train.seed = cfg.seed;
    match cli.command {
        Command::SynthData { out } => synth_data(&cfg, &out),
        Command::BuildPlg { data, radius, out } => {
            if let Some(r) = radius {
                cfg.plg.radius = r;
            }
            build(&cfg, &data, &out)
        }
        Command::Plan {
            plg,
            start,
            target,
            n,
            max_len,
        } => plan(&cfg, &plg, start, target, n, max_len),
        Command::FitPolicy {
            plg,
            data,
            out,
            clone_out,
        } => fit_policy(&cfg, &plg, &data, &out, clone_out.as_deref()),
        Command::ExtractSeeds { plg, data, tau, out } => {
            if let Some(t) = tau {
                cfg.seeds.tau = t;
            }
            extract_seeds(&cfg, &plg, &data, &out)
        }
        Command::Train {
            plg,
            empirical,
            seeds,
            policy_out,
            metrics_out,
            iterations,
            lr,
        } => {
            if let Some(i) = iterations {
                cfg.train.iterations = i;
            }
            if let Some(lr) = lr {
                cfg.train.lr = lr;
            }
            let metrics_out = metrics_out.unwrap_or_else(|| policy_out.with_extension("metrics.csv"));
            train_cmd(&cfg, &plg, &empirical, &seeds, &policy_out, &metrics_out)
        }
        Command::Simulate {
            plg,
            policy,
            background,
            seeds,
            episodes,
            max_ticks,
            out,
        } => {
            if let Some(m) = max_ticks {
                cfg.sim.max_ticks = m;
            }
            simulate(&cfg, &plg, &policy, background.as_deref(), &seeds, episodes, &out)
        }
        Command::Analyse {
            runs,
            horizon,
            out,
            render_dir,
            render_limit,
        } => {
            if let Some(t) = horizon {
                cfg.analysis.horizon = t;
            }
            analyse(&cfg, &runs, &out, render_dir.as_deref(), render_limit)
        }
        Command::Render {
            plg,
            out,
            runs,
            episode,
        } => render(&cfg, &plg, &out, runs.as_deref().zip(episode)),
    }
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).with_context(|| format!("reading {}", path.display()))
}

/// Writes to a temporary sibling file that is renamed over `path` by `commit`.
fn stage(path: &Path, bytes: &[u8]) -> Result<(NamedTempFile, PathBuf)> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut tmp = NamedTempFile::new_in(&dir).with_context(|| format!("creating a file in {}", dir.display()))?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    Ok((tmp, path.to_path_buf()))
}

fn commit(staged: Vec<(NamedTempFile, PathBuf)>) -> Result<()> {
    for (tmp, path) in staged {
        tmp.persist(&path)
            .with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    commit(vec![stage(path, bytes)?])
}

fn to_json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut v = serde_json::to_vec_pretty(value)?;
    v.push(b'\n');
    Ok(v)
}

fn load_data(args: &DataArgs) -> Result<Dataset> {
    let mapping = match &args.mapping {
        Some(p) => ColumnMapping::from_file(p).with_context(|| format!("loading mapping {}", p.display()))?,
        None => ColumnMapping::canonical(),
    };
    let outcome = load_dataset(&args.data, &mapping)
        .with_context(|| format!("loading {}", args.data.display()))?;
    if !outcome.rejected.is_empty() {
        warn!("{} rows rejected", outcome.rejected.len());
    }
    info!(
        "{} vehicles, {} samples",
        outcome.dataset.vehicle_count(),
        outcome.dataset.sample_count()
    );
    Ok(outcome.dataset)
}

fn load_bundle(path: &Path) -> Result<PlgBundle> {
    let bytes = read(path)?;
    deserialise_bundle(&bytes).with_context(|| format!("decoding {}", path.display()))
}

/// Either a full bundle or a bare graph file.
fn load_graph(path: &Path) -> Result<lanegraph::plg::Plg> {
    let bytes = read(path)?;
    let kind = container::peek_kind(&bytes).with_context(|| format!("decoding {}", path.display()))?;
    let plg = if &kind == b"PLGB" {
        deserialise_bundle(&bytes).map(|b| b.plg)
    } else {
        deserialise_plg(&bytes)
    };
    plg.with_context(|| format!("decoding {}", path.display()))
}

fn validated(cfg: &RunConfig) -> Result<()> {
    cfg.validate().map_err(|e| anyhow!(e))
}

fn synth_data(cfg: &RunConfig, out: &Path) -> Result<()> {
    let data = generate_synthetic_corpus(&cfg.synth, cfg.seed)?;
    info!("generated {} vehicles, {} samples", data.vehicle_count(), data.sample_count());
    let mut buf = Vec::new();
    write_dataset(&data, &mut buf)?;
    write_atomic(out, &buf)
}

fn build(cfg: &RunConfig, data: &DataArgs, out: &Path) -> Result<()> {
    validated(cfg)?;
    let dataset = load_data(data)?;
    let built = build_plg(&dataset, &cfg.plg)?;
    let table = build_conditional_table(&built.paths);
    info!(
        "{} nodes, {} edges, {} exit clusters, {} table entries",
        built.plg.node_count(),
        built.plg.edges().count(),
        built.plg.clusters().len(),
        table.len()
    );
    let bundle = PlgBundle {
        plg: built.plg,
        table,
        config: cfg.to_json(),
    };
    write_atomic(out, &serialise_bundle(&bundle)?)
}

fn plan(cfg: &RunConfig, plg: &Path, start: usize, target: usize, n: usize, max_len: Option<usize>) -> Result<()> {
    let bundle = load_bundle(plg)?;
    let max_len = max_len.unwrap_or_else(|| default_max_len(bundle.plg.node_count()));
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let stdout = std::io::stdout();
    let mut w = stdout.lock();
    writeln!(w, "path,end,log_prob,nodes")?;
    for i in 0..n {
        let p = plan_path(&bundle.table, &bundle.plg, start, target, max_len, &mut rng)?;
        let end = match p.end {
            PlanEnd::Reached => "reached",
            PlanEnd::DeadEnd => "dead_end",
            PlanEnd::Truncated => "truncated",
        };
        let nodes: Vec<String> = p.nodes.iter().map(|n| n.to_string()).collect();
        writeln!(w, "{i},{end},{:?},{}", p.log_prob, nodes.join(" "))?;
    }
    Ok(())
}

fn corpus_for(cfg: &RunConfig, plg: &Path, data: &DataArgs) -> Result<(lanegraph::plg::Plg, TickCorpus)> {
    let graph = load_graph(plg)?;
    let dataset = load_data(data)?;
    let paths = nodal_paths(&dataset, &graph);
    let corpus = TickCorpus::build(&dataset, &graph, &paths, cfg.sim.dt)?;
    Ok((graph, corpus))
}

fn fit_policy(cfg: &RunConfig, plg: &Path, data: &DataArgs, out: &Path, clone_out: Option<&Path>) -> Result<()> {
    validated(cfg)?;
    let (graph, corpus) = corpus_for(cfg, plg, data)?;
    let obs = corpus.observations(&graph, &cfg.policy.grid, &cfg.sim.risk);
    let emp = fit_empirical_policy(&obs, &cfg.policy.grid, &cfg.policy.bins, cfg.policy.alpha)?;
    for b in 0..emp.bins.len() {
        info!("risk bin {b}: {} observations", emp.observations_in(b));
    }
    let mut staged = vec![stage(out, &serialise_empirical(&emp)?)?];
    if let Some(p) = clone_out {
        let (net, worst) = initial_policy(&emp, &cfg.sim, &cfg.train)?;
        info!("behaviour clone discrepancy {worst:.2e}");
        let ckpt = PolicyCheckpoint {
            params: net,
            config: cfg.to_json(),
        };
        staged.push(stage(p, &serialise_policy(&ckpt)?)?);
    }
    commit(staged)
}

fn extract_seeds(cfg: &RunConfig, plg: &Path, data: &DataArgs, out: &Path) -> Result<()> {
    validated(cfg)?;
    let (graph, corpus) = corpus_for(cfg, plg, data)?;
    let set = extract_seed_states(&corpus, &graph, &cfg.seeds);
    info!(
        "{} trajectories, {} states, {} seeds (tau {} s)",
        set.trajectories,
        set.states,
        set.seeds.len(),
        cfg.seeds.tau
    );
    write_atomic(out, &serialise_seeds(&set)?)
}

const METRICS_HEADER: &str =
    "iteration,episodes,steps,mean_reward,collision_rate,clip_fraction,mean_ratio,initial_ratio,value_loss,entropy";

fn metrics_line(m: &IterationMetrics) -> String {
    format!(
        "{},{},{},{:?},{:?},{:?},{:?},{:?},{:?},{:?}",
        m.iteration,
        m.episodes,
        m.steps,
        m.mean_reward,
        m.collision_rate,
        m.clip_fraction,
        m.mean_ratio,
        m.initial_ratio,
        m.value_loss,
        m.entropy
    )
}

fn train_cmd(
    cfg: &RunConfig,
    plg: &Path,
    empirical: &Path,
    seeds: &Path,
    policy_out: &Path,
    metrics_out: &Path,
) -> Result<()> {
    validated(cfg)?;
    let bundle = load_bundle(plg)?;
    let emp = deserialise_empirical(&read(empirical)?).with_context(|| format!("decoding {}", empirical.display()))?;
    let set = deserialise_seeds(&read(seeds)?).with_context(|| format!("decoding {}", seeds.display()))?;
    // metrics go to a temporary file as they arrive and replace the target at the end
    let dir = metrics_out.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let mut metrics = NamedTempFile::new_in(dir)?;
    writeln!(metrics, "{METRICS_HEADER}")?;
    let mut write_err = None;
    let outcome = train(&bundle.plg, &bundle.table, &emp, &set.seeds, &cfg.sim, &cfg.train, |m| {
        info!(
            "iteration {}: reward {:.4}, collision rate {:.3}, clip {:.3}, ratio {:.4}",
            m.iteration, m.mean_reward, m.collision_rate, m.clip_fraction, m.mean_ratio
        );
        if let Err(e) = writeln!(metrics, "{}", metrics_line(m)).and_then(|_| metrics.flush()) {
            write_err.get_or_insert(e);
        }
    });
    let outcome = match outcome {
        Ok(o) => o,
        Err(lanegraph::Error::Diverged { iteration, last_good }) => {
            let ckpt = PolicyCheckpoint {
                params: *last_good,
                config: cfg.to_json(),
            };
            let rescue = policy_out.with_extension("last_good.bin");
            write_atomic(&rescue, &serialise_policy(&ckpt)?)?;
            bail!(
                "training diverged at iteration {iteration}; last good policy written to {}",
                rescue.display()
            );
        }
        Err(e) => return Err(e.into()),
    };
    if let Some(e) = write_err {
        return Err(e).context("writing metrics");
    }
    info!("behaviour clone discrepancy {:.2e}", outcome.clone_discrepancy);
    let ckpt = PolicyCheckpoint {
        params: outcome.params,
        config: cfg.to_json(),
    };
    let staged = stage(policy_out, &serialise_policy(&ckpt)?)?;
    metrics.as_file().sync_all()?;
    commit(vec![staged, (metrics, metrics_out.to_path_buf())])
}

fn simulate(
    cfg: &RunConfig,
    plg: &Path,
    policy: &Path,
    background: Option<&Path>,
    seeds: &Path,
    episodes: usize,
    out: &Path,
) -> Result<()> {
    validated(cfg)?;
    let plg_bytes = read(plg)?;
    let bundle = deserialise_bundle(&plg_bytes).with_context(|| format!("decoding {}", plg.display()))?;
    let primary = AnyPolicy::from_bytes(&read(policy)?).with_context(|| format!("decoding {}", policy.display()))?;
    let bg = background
        .map(|p| AnyPolicy::from_bytes(&read(p)?).with_context(|| format!("decoding {}", p.display())))
        .transpose()?;
    let set = deserialise_seeds(&read(seeds)?).with_context(|| format!("decoding {}", seeds.display()))?;
    let policies = Policies {
        primary: primary.as_policy(),
        background: bg.as_ref().map_or(primary.as_policy(), |b| b.as_policy()),
    };
    let result = simulate_episodes(&set.seeds, episodes, &cfg.sim, policies, &bundle.table, &bundle.plg)?;
    info!(
        "{} episodes over {} seeds, corner-case rate {:.4}",
        result.episodes.len(),
        set.seeds.len(),
        result.rate
    );
    let mut csv = Vec::new();
    write_episode_csv(&result.episodes, &mut csv)?;
    let sidecar = EpisodeSidecar {
        format_version: EPISODE_FORMAT_VERSION,
        config: cfg.to_json(),
        corner_case_rate: result.rate,
        episodes: result.episodes.iter().map(EpisodeMeta::of).collect(),
    };
    commit(vec![
        stage(&out.join("episodes.csv"), &csv)?,
        stage(&out.join("episodes.json"), &to_json_bytes(&sidecar)?)?,
        stage(&out.join("plg.bin"), &plg_bytes)?,
    ])
}

#[derive(Serialize)]
struct Report<'a> {
    format_version: u32,
    horizon: f64,
    #[serde(flatten)]
    summary: &'a Summary,
    corner_cases: &'a [CornerCaseRecord],
    config: serde_json::Value,
    simulation_config: &'a serde_json::Value,
}

fn analyse(cfg: &RunConfig, runs: &Path, out: &Path, render_dir: Option<&Path>, render_limit: usize) -> Result<()> {
    validated(cfg)?;
    let sidecar_path = runs.join("episodes.json");
    let sidecar: EpisodeSidecar = serde_json::from_slice(&read(&sidecar_path)?)
        .with_context(|| format!("decoding {}", sidecar_path.display()))?;
    if sidecar.format_version != EPISODE_FORMAT_VERSION {
        bail!(
            "episode log format version {} (expected {EPISODE_FORMAT_VERSION})",
            sidecar.format_version
        );
    }
    let csv_path = runs.join("episodes.csv");
    let file = fs::File::open(&csv_path).with_context(|| format!("reading {}", csv_path.display()))?;
    let episodes = read_episode_csv(BufReader::new(file), &sidecar.episodes)?;
    let graph = load_graph(&runs.join("plg.bin"))?;
    let records = episodes
        .iter()
        .filter(|e| e.termination.is_collision())
        .map(|e| classify(e, &graph, cfg.analysis.horizon))
        .collect::<lanegraph::Result<Vec<_>>>()?;
    let summary = summarise(&records, &episodes);
    info!(
        "{} of {} episodes collided (r_cc {:.4}); cases {:?}",
        summary.collisions, summary.episodes, summary.corner_case_rate, summary.case_counts
    );
    let report = Report {
        format_version: REPORT_FORMAT_VERSION,
        horizon: cfg.analysis.horizon,
        summary: &summary,
        corner_cases: &records,
        config: cfg.to_json(),
        simulation_config: &sidecar.config,
    };
    let mut staged = vec![stage(out, &to_json_bytes(&report)?)?];
    if let Some(dir) = render_dir {
        staged.push(stage(&dir.join("plg.svg"), render_plg(&graph, &cfg.render).as_bytes())?);
        for e in episodes.iter().filter(|e| e.termination.is_collision()).take(render_limit) {
            let svg = render_scenario(e, &graph, &cfg.render);
            staged.push(stage(&dir.join(format!("episode_{:06}.svg", e.episode_id)), svg.as_bytes())?);
        }
    }
    commit(staged)
}

fn render(cfg: &RunConfig, plg: &Path, out: &Path, episode: Option<(&Path, usize)>) -> Result<()> {
    validated(cfg)?;
    let graph = load_graph(plg)?;
    let svg = match episode {
        None => render_plg(&graph, &cfg.render),
        Some((runs, id)) => {
            let sidecar: EpisodeSidecar = serde_json::from_slice(&read(&runs.join("episodes.json"))?)?;
            let file = fs::File::open(runs.join("episodes.csv"))?;
            let episodes = read_episode_csv(BufReader::new(file), &sidecar.episodes)?;
            let Some(e) = episodes.iter().find(|e| e.episode_id == id) else {
                bail!("episode {id} not found in {}", runs.display());
            };
            render_scenario(e, &graph, &cfg.render)
        }
    };
    write_atomic(out, svg.as_bytes())
}
