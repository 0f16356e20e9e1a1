use std::fs::{self, File};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::net::{TcpListener, TcpStream};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::thread;

use clap::Args;
use serde::Serialize;

use pcnsim::analysis::{evolve_network, heuristic_policy, EvolutionConfig};
use pcnsim::protocol::{self, record_in_process, record_over, serve_stream, Response, Session, Transcript};
use pcnsim::routing::FlowReport;
use pcnsim::{
    load_snapshot, run_heuristic, scale_free_graph, write_snapshot, ChannelGraph, Env, EnvConfig,
    HeuristicKind, SampleConfig, Sampler, SyntheticConfig,
};

use crate::EnvArgs;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Runtime(String),
    #[error(transparent)]
    Core(#[from] pcnsim::Error),
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Core(pcnsim::Error::Config(_)) => 1,
            _ => 2,
        }
    }
}

type CliResult<T = ()> = Result<T, CliError>;

fn read_file(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

fn create_file(path: &Path) -> CliResult<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

/// Writes `text` to `path`, or to stdout when no path is given.
fn emit(path: Option<&Path>, text: &str) -> CliResult {
    match path {
        Some(p) => {
            let mut w = create_file(p)?;
            w.write_all(text.as_bytes())?;
            w.flush()?;
        }
        None => {
            let mut out = io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()?;
        }
    }
    Ok(())
}

fn to_json(value: &impl Serialize) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}

impl EnvArgs {
    pub fn load_graph(&self) -> CliResult<ChannelGraph> {
        match &self.snapshot {
            Some(path) => {
                let file = File::open(path)
                    .map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
                Ok(load_snapshot(BufReader::new(file))?)
            }
            None => Ok(scale_free_graph(&SyntheticConfig {
                nodes: self.graph_nodes,
                seed: self.graph_seed,
                ..Default::default()
            })?),
        }
    }

    pub fn env_config(&self) -> CliResult<EnvConfig> {
        let mut cfg = match &self.config {
            Some(path) => EnvConfig::from_json(&read_file(path)?)?,
            None => EnvConfig::default(),
        };
        if let Some(n) = self.nodes {
            cfg.sample.target_size = n;
        }
        if let Some(t) = self.channels {
            cfg.episode_length = t;
        }
        if let Some(k) = self.k {
            cfg.buckets = k;
        }
        if let Some(c) = self.budget {
            cfg.budget_msat = c;
        }
        if let Some(b) = self.provider_bias {
            cfg.flow.provider_bias = b;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn sampler(&self) -> CliResult<Sampler> {
        Ok(Sampler::new(Arc::new(self.load_graph()?)))
    }
}

#[derive(Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 2000)]
    nodes: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Minimum channels opened by each joining node.
    #[arg(long, default_value_t = 1)]
    attach: usize,
    /// Pareto shape of per-node channel counts; 0 opens exactly `attach`.
    #[arg(long, default_value_t = 1.0)]
    attach_shape: f64,
    #[arg(long, default_value_t = 0.1)]
    provider_fraction: f64,
    /// Exponent tying channel capacity to the smaller endpoint degree.
    #[arg(long, default_value_t = 1.0)]
    capacity_degree_exponent: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn synth(a: SynthArgs) -> CliResult {
    let graph = scale_free_graph(&SyntheticConfig {
        nodes: a.nodes,
        seed: a.seed,
        attach: a.attach,
        attach_shape: (a.attach_shape > 0.0).then_some(a.attach_shape),
        provider_fraction: a.provider_fraction,
        capacity_degree_exponent: a.capacity_degree_exponent,
        ..Default::default()
    })?;
    emit(a.out.as_deref(), &pcnsim::snapshot::snapshot_to_string(&graph))
}

#[derive(Args)]
pub struct SampleArgs {
    #[command(flatten)]
    env: EnvArgs,
    #[arg(long, default_value_t = 50)]
    size: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    p_forward: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn sample(a: SampleArgs) -> CliResult {
    let mut cfg = SampleConfig {
        target_size: a.size,
        seed: a.seed,
        ..Default::default()
    };
    if let Some(p) = a.p_forward {
        cfg.p_forward = p;
    }
    cfg.validate()?;
    let graph = a.env.sampler()?.sample(&cfg)?;
    match &a.out {
        Some(p) => {
            let mut w = create_file(p)?;
            write_snapshot(&graph, &mut w)?;
            w.flush()?;
        }
        None => write_snapshot(&graph, io::stdout().lock())?,
    }
    Ok(())
}

#[derive(Args)]
pub struct EvalArgs {
    #[command(flatten)]
    env: EnvArgs,
    /// Heuristic id, or `external` to take actions over the protocol.
    #[arg(long)]
    policy: String,
    #[arg(long, default_value_t = 1000)]
    episodes: usize,
    /// Episode `i` uses seed `seed + i`.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads (0 = available parallelism).
    #[arg(long, default_value_t = 0)]
    threads: usize,
    /// JSON lines with each episode's final-step flow report.
    #[arg(long)]
    emit_flow: Option<PathBuf>,
    /// With `external`: listen on this TCP port instead of stdio.
    #[arg(long)]
    port: Option<u16>,
}

#[derive(Serialize)]
struct Summary<'a> {
    policy: &'a str,
    nodes: usize,
    channels: usize,
    mean: f64,
    std: f64,
    count: usize,
}

#[derive(Serialize)]
struct EpisodeFlow {
    episode: usize,
    seed: u64,
    reward: f64,
    flow: FlowReport,
}

/// Sample mean and standard deviation (n - 1 denominator).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

/// Final-step rewards of `episodes` heuristic episodes, in episode order.
/// The result does not depend on the thread count.
pub fn run_episodes(
    sampler: &Sampler,
    cfg: &EnvConfig,
    kind: HeuristicKind,
    episodes: usize,
    seed: u64,
    threads: usize,
    keep_flow: bool,
) -> CliResult<Vec<(f64, Option<FlowReport>)>> {
    let threads = match threads {
        0 => thread::available_parallelism().map_or(1, |n| n.get()),
        t => t,
    }
    .min(episodes.max(1));
    type Worker = CliResult<Vec<(usize, f64, Option<FlowReport>)>>;
    let results: Vec<Worker> = thread::scope(|scope| {
        let handles: Vec<_> = (0..threads)
            .map(|w| {
                scope.spawn(move || -> CliResult<_> {
                    let mut env = Env::with_sampler(sampler.clone(), cfg.clone())?;
                    let mut out = Vec::new();
                    for i in (w..episodes).step_by(threads) {
                        let s = seed.wrapping_add(i as u64);
                        env.reset(s)?;
                        let reward = run_heuristic(&mut env, kind, s)?;
                        let flow = if keep_flow {
                            Some(env.last_flow()?.report(env.graph()?))
                        } else {
                            None
                        };
                        out.push((i, reward, flow));
                    }
                    Ok(out)
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
    });
    let mut all = Vec::with_capacity(episodes);
    for r in results {
        all.extend(r?);
    }
    all.sort_by_key(|(i, _, _)| *i);
    Ok(all.into_iter().map(|(_, r, f)| (r, f)).collect())
}

pub fn eval(a: EvalArgs) -> CliResult {
    let cfg = a.env.env_config()?;
    if a.policy == "external" {
        return eval_external(&a, cfg);
    }
    let kind: HeuristicKind = a.policy.parse().map_err(|e: pcnsim::Error| CliError::Usage(e.to_string()))?;
    let sampler = a.env.sampler()?;
    let results = run_episodes(&sampler, &cfg, kind, a.episodes, a.seed, a.threads, a.emit_flow.is_some())?;
    if let Some(path) = &a.emit_flow {
        let mut w = create_file(path)?;
        for (i, (reward, flow)) in results.iter().enumerate() {
            let line = EpisodeFlow {
                episode: i,
                seed: a.seed.wrapping_add(i as u64),
                reward: *reward,
                flow: flow.clone().expect("flow kept"),
            };
            serde_json::to_writer(&mut w, &line).map_err(io::Error::other)?;
            writeln!(w)?;
        }
        w.flush()?;
    }
    let rewards: Vec<f64> = results.iter().map(|(r, _)| *r).collect();
    print_summary(&a.policy, &cfg, &rewards)
}

fn print_summary(policy: &str, cfg: &EnvConfig, rewards: &[f64]) -> CliResult {
    let (mean, std) = mean_std(rewards);
    let summary = Summary {
        policy,
        nodes: cfg.sample.target_size,
        channels: cfg.episode_length,
        mean,
        std,
        count: rewards.len(),
    };
    println!("{}", serde_json::to_string(&summary).expect("summary serializes"));
    Ok(())
}

/// The learner drives episodes over the protocol; every `done` state counts
/// as one evaluated episode. The summary goes to stderr with stdio transport.
fn eval_external(a: &EvalArgs, cfg: EnvConfig) -> CliResult {
    let mut session = Session::new(a.env.sampler()?, cfg.clone())?;
    let mut rewards = Vec::new();
    let mut pump = |input: &mut dyn BufRead, output: &mut dyn Write| -> CliResult {
        for line in input.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let response = session.respond(&line);
            if let Response::State { reward, done: true, .. } = &response {
                rewards.push(*reward);
            }
            writeln!(output, "{}", response.to_line())?;
            output.flush()?;
            if session.is_closed() || rewards.len() >= a.episodes {
                break;
            }
        }
        Ok(())
    };
    match a.port {
        Some(port) => {
            let listener = TcpListener::bind(("127.0.0.1", port))?;
            println!("listening on {}", listener.local_addr()?);
            let (stream, _) = listener.accept()?;
            let mut input = BufReader::new(stream.try_clone()?);
            let mut output = BufWriter::new(stream);
            pump(&mut input, &mut output)?;
            print_summary("external", &cfg, &rewards)
        }
        None => {
            pump(&mut io::stdin().lock(), &mut io::stdout().lock())?;
            let (mean, std) = mean_std(&rewards);
            eprintln!(
                "{}",
                serde_json::json!({"policy": "external", "mean": mean, "std": std, "count": rewards.len()})
            );
            Ok(())
        }
    }
}

#[derive(Args)]
pub struct ServeArgs {
    #[command(flatten)]
    env: EnvArgs,
    #[arg(long, conflicts_with = "stdio", required_unless_present = "stdio")]
    port: Option<u16>,
    #[arg(long)]
    stdio: bool,
    #[arg(long, default_value = "127.0.0.1")]
    host: String,
}

pub fn serve(a: ServeArgs) -> CliResult {
    let cfg = a.env.env_config()?;
    let sampler = a.env.sampler()?;
    if a.stdio {
        let mut session = Session::new(sampler, cfg)?;
        serve_stream(&mut session, io::stdin().lock(), io::stdout().lock())?;
        return Ok(());
    }
    let port = a.port.expect("clap enforces --port or --stdio");
    let listener = TcpListener::bind((a.host.as_str(), port))?;
    println!("listening on {}", listener.local_addr()?);
    io::stdout().flush()?;
    protocol::serve_tcp(listener, sampler, cfg)?;
    Ok(())
}

#[derive(Args)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    env: EnvArgs,
    /// Heuristic id deployed in every episode.
    #[arg(long, default_value = "random")]
    policy: String,
    #[arg(long, default_value_t = 100)]
    episodes: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = pcnsim::analysis::DEFAULT_BINS)]
    bins: usize,
    #[arg(long, default_value_t = pcnsim::analysis::DEFAULT_RENYI_ORDER)]
    renyi_order: f64,
    /// Report destination (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the evolved graph as a snapshot document.
    #[arg(long)]
    evolved_out: Option<PathBuf>,
}

pub fn analyze(a: AnalyzeArgs) -> CliResult {
    let kind: HeuristicKind = a.policy.parse().map_err(|e: pcnsim::Error| CliError::Usage(e.to_string()))?;
    if a.bins == 0 {
        return Err(CliError::Usage("--bins must be at least 1".into()));
    }
    if a.renyi_order == 1.0 || a.renyi_order.is_nan() || a.renyi_order <= 0.0 {
        return Err(CliError::Usage("--renyi-order must be positive and not 1".into()));
    }
    let cfg = EvolutionConfig {
        env: a.env.env_config()?,
        seed: a.seed,
        bins: a.bins,
        renyi_order: a.renyi_order,
    };
    let base = a.env.load_graph()?;
    let evolution = evolve_network(&base, a.episodes, &cfg, heuristic_policy(kind))?;
    if let Some(path) = &a.evolved_out {
        let mut w = create_file(path)?;
        write_snapshot(&evolution.graph, &mut w)?;
        w.flush()?;
    }
    emit(a.out.as_deref(), &to_json(&evolution.report))
}

#[derive(Args)]
pub struct ReplayArgs {
    #[command(flatten)]
    env: EnvArgs,
    /// Transcript to verify: its requests are replayed and every response
    /// must match byte for byte.
    #[arg(long, conflicts_with = "requests", required_unless_present = "requests")]
    transcript: Option<PathBuf>,
    /// Request script (one JSON request per line) to record.
    #[arg(long)]
    requests: Option<PathBuf>,
    /// Server address; an in-process session is used when absent.
    #[arg(long)]
    connect: Option<String>,
    /// Where to write the recorded transcript (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn record(a: &ReplayArgs, requests: &[&str]) -> CliResult<Transcript> {
    match &a.connect {
        Some(addr) => {
            let stream = TcpStream::connect(addr)
                .map_err(|e| CliError::Runtime(format!("cannot connect to {addr}: {e}")))?;
            Ok(record_over(&stream, requests.iter().copied())?)
        }
        None => {
            let mut session = Session::new(a.env.sampler()?, a.env.env_config()?)?;
            Ok(record_in_process(&mut session, requests.iter().copied()))
        }
    }
}

pub fn replay(a: ReplayArgs) -> CliResult {
    if let Some(path) = &a.transcript {
        let expected = Transcript::parse(&read_file(path)?)?;
        let requests: Vec<&str> = expected.requests().collect();
        let actual = record(&a, &requests)?;
        if let Some(out) = &a.out {
            emit(Some(out), &actual.to_text())?;
        }
        return match expected.first_mismatch(&actual) {
            None => {
                println!("identical: {} exchanges", expected.exchanges.len());
                Ok(())
            }
            Some(i) => Err(CliError::Runtime(format!(
                "response {} differs\n  expected: {}\n  actual:   {}",
                i + 1,
                expected.exchanges.get(i).map_or("<none>", |e| e.1.as_str()),
                actual.exchanges.get(i).map_or("<none>", |e| e.1.as_str()),
            ))),
        };
    }
    let script = read_file(a.requests.as_deref().expect("clap enforces one source"))?;
    let requests: Vec<&str> = script
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .collect();
    let transcript = record(&a, &requests)?;
    emit(a.out.as_deref(), &transcript.to_text())
}
