//! `dptopk` command line. Exit codes: 0 success (including a rejected
//! session query), 1 runtime error (IO, malformed input), 2 usage or
//! validation error, 3 verification failure.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use dptopk_core::accountant::{request_privacy, BudgetSession, QueryOutcome};
use dptopk_core::mechanisms::run_mechanism;
use dptopk_core::noise::SeededRng;
use dptopk_core::{DomainConfig, Error as CoreError, Histogram, Mechanism, PrivacyParams, SensitivitySetting, TopKRequest};

use crate::accuracy::{run_accuracy, Distribution};
use crate::compose::{compose_table, write_csv};
use crate::io::{read_histogram, IngestError};
use crate::service::{budget_json, privacy_json, session_view, AppState};
use crate::store::{load_session, save_session, Store};
use crate::verify::{parse_selector, run_suites, VerifyOptions};

pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_VERIFY: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "dptopk", version, about = "Differentially private top-k selection")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one private top-k query over a histogram file.
    Topk(TopkArgs),
    /// Pay-what-you-get budget sessions kept in a local state file.
    Session {
        #[command(subcommand)]
        command: SessionCommand,
    },
    /// CSV table of bounded-range versus optimal composition.
    Compose(ComposeArgs),
    /// Monte-Carlo accuracy experiment.
    Accuracy(AccuracyArgs),
    /// Run the exact oracle suites.
    Verify(VerifyArgs),
    /// Start the HTTP service.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
struct SeedArg {
    /// RNG seed; random when absent.
    #[arg(long, env = "DPTOPK_SEED")]
    seed: Option<u64>,
}

impl SeedArg {
    fn resolve(&self) -> u64 {
        self.seed.unwrap_or_else(rand::random)
    }
}

#[derive(Debug, Args)]
struct QueryArgs {
    #[arg(long)]
    k: usize,
    /// Domain cutoff k̄ (upper cutoff for optimal-threshold); defaults to k.
    #[arg(long)]
    kbar: Option<usize>,
    /// limited-domain, strict, laplace, optimal-threshold or fixed-threshold.
    #[arg(long, default_value = "limited-domain")]
    mechanism: Mechanism,
    /// `unrestricted` or `restricted:<Δ>`.
    #[arg(long, default_value = "unrestricted")]
    sensitivity: SensitivitySetting,
    /// Comma separated padding labels for domains with fewer than k̄ labels.
    #[arg(long, value_delimiter = ',')]
    reserve: Vec<String>,
}

impl QueryArgs {
    fn request(&self) -> Result<TopKRequest, CliError> {
        Ok(TopKRequest::new(self.k, self.kbar.unwrap_or(self.k), self.mechanism)?)
    }

    fn domain(&self) -> DomainConfig {
        if self.reserve.is_empty() {
            DomainConfig::default()
        } else {
            DomainConfig::with_reserve(self.reserve.clone())
        }
    }
}

#[derive(Debug, Args)]
struct TopkArgs {
    /// Histogram file: CSV `label,count` lines, or a `.json` label→count object.
    #[arg(long)]
    input: PathBuf,
    #[command(flatten)]
    query: QueryArgs,
    #[arg(long)]
    eps: f64,
    #[arg(long)]
    delta: f64,
    #[arg(long, default_value_t = 0.0)]
    delta_prime: f64,
    #[command(flatten)]
    seed: SeedArg,
}

#[derive(Debug, Subcommand)]
enum SessionCommand {
    /// Create a new session file.
    Create {
        #[arg(long)]
        state: PathBuf,
        #[arg(long)]
        kmax: u64,
        #[arg(long)]
        ellmax: u64,
        #[arg(long)]
        eps: f64,
        #[arg(long)]
        delta: f64,
        #[arg(long, default_value_t = 0.0)]
        delta_prime: f64,
        #[arg(long, default_value_t = 1)]
        id: u64,
        /// Overwrite an existing state file.
        #[arg(long)]
        force: bool,
    },
    /// Run a query against the session budget.
    Query {
        #[arg(long)]
        state: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[command(flatten)]
        query: QueryArgs,
        #[command(flatten)]
        seed: SeedArg,
    },
    /// Print budget, privacy statement and log.
    Report {
        #[arg(long)]
        state: PathBuf,
    },
    /// Close the session; later queries fail.
    Close {
        #[arg(long)]
        state: PathBuf,
    },
}

#[derive(Debug, Args)]
struct ComposeArgs {
    /// `a:b`, `a:b:step` or a comma list.
    #[arg(long, default_value = "1:100")]
    k: String,
    /// Comma list of per-call ε.
    #[arg(long, default_value = "0.01,0.05,0.1,0.5,1.0")]
    eps: String,
    /// δ cap for the optimal bound.
    #[arg(long, default_value_t = 1e-6)]
    delta: f64,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum DistKind {
    Powerlaw,
    Flat,
    Custom,
}

#[derive(Debug, Args)]
struct AccuracyArgs {
    #[arg(long, value_enum, default_value = "powerlaw")]
    distribution: DistKind,
    /// Histogram file for `custom`.
    #[arg(long, required_if_eq("distribution", "custom"))]
    input: Option<PathBuf>,
    /// Number of labels for `powerlaw` and `flat`.
    #[arg(long, default_value_t = 50)]
    support: usize,
    /// C in ⌊C·r^(−s)⌋.
    #[arg(long, default_value_t = 1000.0)]
    scale: f64,
    /// s in ⌊C·r^(−s)⌋.
    #[arg(long, default_value_t = 1.5)]
    exponent: f64,
    /// Shared count for `flat`.
    #[arg(long, default_value_t = 100)]
    count: u64,
    #[command(flatten)]
    query: QueryArgs,
    #[arg(long)]
    eps: f64,
    #[arg(long)]
    delta: f64,
    #[arg(long, default_value_t = 0.1)]
    beta: f64,
    #[arg(long, default_value_t = 10_000)]
    trials: u64,
    #[command(flatten)]
    seed: SeedArg,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    /// `all` or a comma list of dp, bad-event, equivalence.
    #[arg(long, default_value = "all")]
    suite: String,
    /// Largest neighbor family a check may enumerate.
    #[arg(long, default_value_t = 5000)]
    max_pairs: usize,
    /// Draws for the equivalence suite.
    #[arg(long, default_value_t = 200_000)]
    samples: u64,
    #[arg(long, default_value_t = 20_240_601)]
    seed: u64,
    /// Scale the threshold's additive term (mutation testing only).
    #[arg(long, default_value_t = 1.0, hide = true)]
    additive_scale: f64,
}

#[derive(Debug, Args)]
struct ServeArgs {
    #[arg(long, env = "DPTOPK_BIND", default_value = "127.0.0.1:8080")]
    bind: String,
    #[arg(long, env = "DPTOPK_STORE", default_value = "dptopk-data")]
    store: PathBuf,
    /// Honour the seed header on queries.
    #[arg(long, env = "DPTOPK_TEST_MODE")]
    test_mode: bool,
}

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn usage(m: impl Into<String>) -> Self {
        Self { code: EXIT_USAGE, message: m.into() }
    }

    fn runtime(m: impl Into<String>) -> Self {
        Self { code: EXIT_RUNTIME, message: m.into() }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        Self::usage(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::runtime(e.to_string())
    }
}

fn read_input(path: &Path) -> Result<Histogram, CliError> {
    read_histogram(path).map_err(|e: IngestError| CliError::runtime(format!("{}: {e}", path.display())))
}

fn print_json<W: Write>(out: &mut W, v: &impl Serialize) -> Result<(), CliError> {
    let s = serde_json::to_string_pretty(v).map_err(|e| CliError::runtime(e.to_string()))?;
    writeln!(out, "{s}")?;
    Ok(())
}

fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>, CliError> {
    let items: Vec<&str> = s.split(',').map(str::trim).filter(|x| !x.is_empty()).collect();
    if items.is_empty() {
        return Err(CliError::usage(format!("{what}: empty list")));
    }
    items
        .into_iter()
        .map(|x| x.parse().map_err(|_| CliError::usage(format!("{what}: cannot parse {x:?}"))))
        .collect()
}

/// Comma list whose items are `n`, `a:b` or `a:b:step`.
fn parse_k_range(s: &str) -> Result<Vec<u64>, CliError> {
    let items: Vec<&str> = s.split(',').map(str::trim).filter(|x| !x.is_empty()).collect();
    if items.is_empty() {
        return Err(CliError::usage("--k: empty list"));
    }
    let mut out = Vec::new();
    for item in items {
        let bad = || CliError::usage(format!("--k: bad item {item:?}"));
        let parts: Vec<u64> = item.split(':').map(|x| x.trim().parse().map_err(|_| bad())).collect::<Result<_, _>>()?;
        let (a, b, step) = match parts[..] {
            [a] => (a, a, 1),
            [a, b] => (a, b, 1),
            [a, b, st] => (a, b, st),
            _ => return Err(bad()),
        };
        if a == 0 || step == 0 || a > b {
            return Err(CliError::usage(format!("--k: {item:?} is empty or starts at 0")));
        }
        out.extend((a..=b).step_by(step as usize));
    }
    Ok(out)
}

fn cmd_topk<W: Write>(a: &TopkArgs, out: &mut W) -> Result<i32, CliError> {
    let req = a.query.request()?;
    let params = PrivacyParams::new(a.eps, a.delta, a.delta_prime, a.query.sensitivity)?;
    let privacy = request_privacy(&req, &params)?;
    let h = read_input(&a.input)?;
    let seed = a.seed.resolve();
    let run = run_mechanism(&h, &req, &params, &a.query.domain(), &mut SeededRng::new(seed))?;
    print_json(
        out,
        &json!({
            "indices": run.output.indices,
            "terminated": run.output.terminated,
            "cost": run.cost,
            "kbar": run.kbar,
            "privacy": { "eps_prime": privacy.eps_total, "delta_total": privacy.delta_total },
            "seed": seed,
        }),
    )?;
    Ok(0)
}

fn load(state: &Path) -> Result<BudgetSession, CliError> {
    load_session(state).map_err(|e| CliError::runtime(format!("{}: {e}", state.display())))
}

fn cmd_session<W: Write>(c: &SessionCommand, out: &mut W) -> Result<i32, CliError> {
    match c {
        SessionCommand::Create { state, kmax, ellmax, eps, delta, delta_prime, id, force } => {
            let s = BudgetSession::create(*id, *kmax, *ellmax, *eps, *delta, *delta_prime)?;
            if state.exists() && !force {
                return Err(CliError::runtime(format!("{} exists; pass --force to overwrite", state.display())));
            }
            save_session(state, &s)?;
            print_json(out, &json!({ "session_id": s.session_id, "privacy": privacy_json(&s)? }))?;
        }
        SessionCommand::Query { state, input, query, seed } => {
            let mut s = load(state)?;
            let req = query.request()?;
            let h = read_input(input)?;
            let seed = seed.resolve();
            let v = match s.query(&h, &req, query.sensitivity, &query.domain(), &mut SeededRng::new(seed))? {
                QueryOutcome::Rejected(reason) => json!({
                    "status": "rejected",
                    "reason": reason,
                    "message": reason.message(),
                    "budget": budget_json(&s),
                }),
                QueryOutcome::Accepted(run) => {
                    save_session(state, &s)?;
                    json!({
                        "status": "accepted",
                        "indices": run.output.indices,
                        "terminated": run.output.terminated,
                        "cost": run.cost,
                        "kbar": run.kbar,
                        "budget": budget_json(&s),
                        "seed": seed,
                    })
                }
            };
            print_json(out, &v)?;
        }
        SessionCommand::Report { state } => print_json(out, &session_view(&load(state)?)?)?,
        SessionCommand::Close { state } => {
            let mut s = load(state)?;
            s.close();
            save_session(state, &s)?;
            print_json(out, &session_view(&s)?)?;
        }
    }
    Ok(0)
}

fn cmd_compose<W: Write>(a: &ComposeArgs, out: &mut W) -> Result<i32, CliError> {
    let ks = parse_k_range(&a.k)?;
    let epss: Vec<f64> = parse_list(&a.eps, "--eps")?;
    let rows = compose_table(&ks, &epss, a.delta)?;
    write_csv(&rows, out).map_err(|e| CliError::runtime(e.to_string()))?;
    Ok(0)
}

fn cmd_accuracy<W: Write>(a: &AccuracyArgs, out: &mut W) -> Result<i32, CliError> {
    let dist = match a.distribution {
        DistKind::Powerlaw => Distribution::PowerLaw { scale: a.scale, exponent: a.exponent, support: a.support },
        DistKind::Flat => Distribution::Flat { count: a.count, support: a.support },
        DistKind::Custom => Distribution::Custom(read_input(a.input.as_deref().expect("required by clap"))?),
    };
    let req = a.query.request()?;
    let params = PrivacyParams::new(a.eps, a.delta, 0.0, a.query.sensitivity)?;
    let seed = a.seed.resolve();
    let h = dist.histogram();
    let r = run_accuracy(&h, &req, &params, a.beta, a.trials, &a.query.domain(), &SeededRng::new(seed))?;
    let mut v = serde_json::to_value(&r).map_err(|e| CliError::runtime(e.to_string()))?;
    v["mechanism"] = json!(req.mechanism);
    v["distribution"] = json!(format!("{:?}", a.distribution).to_lowercase());
    v["seed"] = json!(seed);
    print_json(out, &v)?;
    Ok(0)
}

fn cmd_verify<W: Write>(a: &VerifyArgs, out: &mut W) -> Result<i32, CliError> {
    let suites = parse_selector(&a.suite).map_err(CliError::usage)?;
    let opts = VerifyOptions {
        max_pairs: a.max_pairs,
        samples: a.samples,
        seed: a.seed,
        additive_scale: a.additive_scale,
    };
    let summary = run_suites(&suites, &opts)?;
    print_json(out, &summary)?;
    Ok(if summary.pass { 0 } else { EXIT_VERIFY })
}

fn cmd_serve(a: &ServeArgs) -> Result<i32, CliError> {
    let state = AppState::load(Store::open(&a.store)?, a.test_mode)?;
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async {
        let listener = tokio::net::TcpListener::bind(&a.bind).await?;
        eprintln!("dptopk listening on {}", listener.local_addr()?);
        crate::service::serve(listener, state).await
    })?;
    Ok(0)
}

/// Parses `args` and runs the command, writing results to `out`. Returns the
/// process exit code; errors are printed to stderr.
pub fn run<I, T, W>(args: I, out: &mut W) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
    W: Write,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let res = match &cli.command {
        Command::Topk(a) => cmd_topk(a, out),
        Command::Session { command } => cmd_session(command, out),
        Command::Compose(a) => cmd_compose(a, out),
        Command::Accuracy(a) => cmd_accuracy(a, out),
        Command::Verify(a) => cmd_verify(a, out),
        Command::Serve(a) => cmd_serve(a),
    };
    match res {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}
