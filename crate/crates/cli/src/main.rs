use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use coarse_auction::dist::{read_samples_csv, EpsGrid};
use coarse_auction::envs::Environment;
use coarse_auction::fixtures::{iid_per_profile_check, Tight, Triangle};
use coarse_auction::io::{myersonian_to_toml, sp_auction_to_toml, AnyAuction, DistSpec};
use coarse_auction::iid::learn_iid_from_table;
use coarse_auction::learn::{learn_approx_single_parameter, learn_single_item, learn_single_parameter, LearnReport};
use coarse_auction::par::Execution;
use coarse_auction::revenue::{brute_force_revenue, exact_revenue_single_item, monte_carlo_revenue, PROFILE_LIMIT};
use coarse_auction::rounding::{draw_randomized_rule, greedy_round, round_phis, RoundingRule};
use coarse_auction::sprounding::SamplePolicy;
use coarse_auction::verify::{verify, VerifyConfig};
use coarse_auction::{Error, Mechanism};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

#[derive(Parser)]
#[command(name = "coarse-auction", version, about = "Learn, evaluate, round and verify ε-coarse auctions")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Learn an auction from a sample CSV
    Learn(LearnArgs),
    /// Revenue of an auction under a distribution spec
    Eval(EvalArgs),
    /// Round a Myersonian auction to the ε-grid
    Round(RoundArgs),
    /// Check truthfulness, individual rationality and coarseness
    Verify(VerifyArgs),
    /// Reproduce a reference fixture
    Repro(ReproArgs),
}

fn is_false(b: &bool) -> bool {
    !*b
}

#[derive(Args, Serialize, Deserialize, Default)]
#[serde(default, rename_all = "kebab-case")]
struct LearnArgs {
    /// single-item, iid, or a path to an environment TOML file
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    env: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    eps: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    delta: Option<f64>,
    /// CSV with header bidder_1,…,bidder_n
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    samples: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    /// value upper bound H (default 1)
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    h: Option<f64>,
    /// exact, or approx for knapsack
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    maximizer: Option<MaximizerArg>,
    /// output directory (default: current directory)
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    out: Option<PathBuf>,
    /// run with fewer samples than the guarantee needs, recording a caveat
    #[arg(long)]
    #[serde(skip_serializing_if = "is_false")]
    allow_insufficient: bool,
    /// TOML file whose keys mirror these flags; flags take precedence
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum MaximizerArg {
    Exact,
    Approx,
}

#[derive(Args, Serialize, Deserialize, Default)]
#[serde(default, rename_all = "kebab-case")]
struct EvalArgs {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    auction: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    dist: Option<PathBuf>,
    /// use Monte Carlo even when exact evaluation is possible
    #[arg(long)]
    #[serde(skip_serializing_if = "is_false")]
    mc: bool,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    trials: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum Method {
    Greedy,
    Randomized,
    RoundDown,
}

#[derive(Args, Serialize, Deserialize, Default)]
#[serde(default, rename_all = "kebab-case")]
struct RoundArgs {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    auction: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    dist: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    eps: Option<f64>,
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    method: Option<Method>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    /// write the rounded auction here instead of stdout
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    out: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
}

#[derive(Args, Serialize, Deserialize, Default)]
#[serde(default, rename_all = "kebab-case")]
struct VerifyArgs {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    auction: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    dist: Option<PathBuf>,
    /// also check ε-coarseness on this grid
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    eps: Option<f64>,
    /// maximum number of mechanism runs
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    budget: Option<u64>,
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Fixture {
    Triangle,
    Tight,
    RoundDownLoss,
    IidPerprofile,
}

#[derive(Args)]
struct ReproArgs {
    #[arg(value_enum)]
    fixture: Fixture,
    /// required for the Monte Carlo and randomized fixtures
    #[arg(long)]
    seed: Option<u64>,
    /// override the default number of samples or checks
    #[arg(long)]
    trials: Option<usize>,
}

/// A failure with its exit status.
struct Fail(u8, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::InsufficientSamples { .. } | Error::InstanceTooLarge { .. } | Error::BitsExhausted { .. } => 2,
            _ => 1,
        };
        Fail(code, e.to_string())
    }
}

type CmdResult = Result<(), Fail>;

fn input(msg: impl Into<String>) -> Fail {
    Fail(1, msg.into())
}

fn read(path: &Path) -> Result<String, Fail> {
    fs::read_to_string(path).map_err(|e| input(format!("{}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> CmdResult {
    fs::write(path, text).map_err(|e| input(format!("{}: {e}", path.display())))
}

/// Fill unset flags from the config file.
fn with_config<T: Serialize + DeserializeOwned>(args: T, config: Option<&Path>) -> Result<T, Fail> {
    let Some(path) = config else {
        return Ok(args);
    };
    let mut table: toml::Table = toml::from_str(&read(path)?)
        .map_err(|e| input(format!("{}: {}", path.display(), e.message())))?;
    let flags = toml::Table::try_from(&args).map_err(|e| input(e.to_string()))?;
    table.extend(flags);
    table
        .try_into()
        .map_err(|e: toml::de::Error| input(format!("{}: {}", path.display(), e.message())))
}

fn need<T>(v: Option<T>, flag: &str) -> Result<T, Fail> {
    v.ok_or_else(|| input(format!("missing required --{flag}")))
}

fn unit_interval(v: f64, flag: &str) -> Result<f64, Fail> {
    if v > 0.0 && v <= 1.0 {
        Ok(v)
    } else {
        Err(input(format!("--{flag} must be in (0, 1], got {v}")))
    }
}

fn load_dist(path: &Path) -> Result<DistSpec, Fail> {
    Ok(DistSpec::parse(&read(path)?)?)
}

fn load_auction(path: &Path) -> Result<AnyAuction, Fail> {
    Ok(AnyAuction::parse(&read(path)?)?)
}

fn cmd_learn(args: LearnArgs) -> CmdResult {
    let config = args.config.clone();
    let a = with_config(args, config.as_deref())?;
    let env = need(a.env, "env")?;
    let eps = unit_interval(need(a.eps, "eps")?, "eps")?;
    let delta = unit_interval(need(a.delta, "delta")?, "delta")?;
    let samples_path = need(a.samples, "samples")?;
    let seed = need(a.seed, "seed")?;
    let h = a.h.unwrap_or(1.0);
    if !(h > 0.0 && h.is_finite()) {
        return Err(input(format!("--h must be positive, got {h}")));
    }
    let policy = if a.allow_insufficient { SamplePolicy::Waive } else { SamplePolicy::Enforce };
    let out = a.out.unwrap_or_else(|| PathBuf::from("."));
    let file = fs::File::open(&samples_path).map_err(|e| input(format!("{}: {e}", samples_path.display())))?;
    let samples = read_samples_csv(file, h)?;
    let exec = Execution::default();

    let (auction_file, auction_text, report): (&str, String, LearnReport) = match env.as_str() {
        "single-item" => {
            let l = learn_single_item(&samples, eps, delta, policy, exec)?;
            ("auction.txt", l.sequence.to_text(), l.report)
        }
        "iid" => {
            let l = learn_iid_from_table(&samples, eps, delta, policy, seed, exec)?;
            ("auction.txt", l.auction.to_text(), l.report)
        }
        path => {
            let env: Environment = toml::from_str(&read(Path::new(path))?)
                .map_err(|e| input(format!("{path}: {}", e.message())))?;
            let l = match a.maximizer {
                Some(MaximizerArg::Approx) => learn_approx_single_parameter(&samples, &env, eps, delta, policy, seed, exec)?,
                _ => learn_single_parameter(&samples, &env, eps, delta, policy, seed, exec)?,
            };
            ("auction.toml", sp_auction_to_toml(&l.auction), l.report)
        }
    };
    fs::create_dir_all(&out).map_err(|e| input(format!("{}: {e}", out.display())))?;
    write(&out.join(auction_file), &auction_text)?;
    write(&out.join("report.json"), &report.to_json())?;
    println!("pipeline {}", report.pipeline);
    println!("samples {} (guarantee needs {})", report.samples_available, report.s_required.unwrap_or(report.t_required));
    for r in &report.revenues {
        println!("{} {:.6} ({})", r.label, r.value, r.mode);
    }
    for c in &report.caveats {
        println!("caveat: {c}");
    }
    println!("wrote {} and {}", out.join(auction_file).display(), out.join("report.json").display());
    Ok(())
}

fn cmd_eval(args: EvalArgs) -> CmdResult {
    let config = args.config.clone();
    let a = with_config(args, config.as_deref())?;
    let auction = load_auction(&need(a.auction, "auction")?)?;
    let spec = load_dist(&need(a.dist, "dist")?)?;
    let exec = Execution::default();
    if auction.n() != spec.sources().len() {
        return Err(Error::DimensionMismatch { expected: auction.n(), got: spec.sources().len() }.into());
    }
    if !a.mc {
        if let Some(f) = spec.product() {
            let f = f?;
            if f.profile_count() > PROFILE_LIMIT {
                return Err(Fail(
                    2,
                    format!("{} profiles exceed the exact budget of {PROFILE_LIMIT}; rerun with --mc", f.profile_count()),
                ));
            }
            let rev = match &auction {
                AnyAuction::Myersonian(m) => exact_revenue_single_item(m, &f)?,
                other => brute_force_revenue(other, &f, exec)?,
            };
            println!("revenue {rev:.12}");
            println!("mode exact");
            return Ok(());
        }
    }
    let seed = need(a.seed, "seed")?;
    let trials = a.trials.unwrap_or(100_000);
    let e = monte_carlo_revenue(&auction, &spec.sources(), trials, seed, exec)?;
    println!("revenue {:.6} ± {:.6}", e.mean, e.std_error);
    println!("mode monte-carlo (trials {trials}, seed {seed})");
    Ok(())
}

fn cmd_round(args: RoundArgs) -> CmdResult {
    let config = args.config.clone();
    let a = with_config(args, config.as_deref())?;
    let auction = load_auction(&need(a.auction, "auction")?)?;
    let eps = need(a.eps, "eps")?;
    let grid = EpsGrid::new(eps, auction.h())?;
    let method = a.method.unwrap_or(Method::Greedy);
    let discrete = || -> Result<_, Fail> {
        let spec = load_dist(&need(a.dist.clone(), "dist")?)?;
        spec.product()
            .ok_or_else(|| input("this rounding needs a discrete distribution spec"))?
            .map_err(Fail::from)
    };
    let rule = |n: usize| -> Result<RoundingRule, Fail> {
        match method {
            Method::RoundDown => Ok(RoundingRule::left_endpoints(grid, n)),
            Method::Randomized => {
                let seed = need(a.seed, "seed")?;
                let f = discrete()?;
                Ok(draw_randomized_rule(&f, &grid, &mut coarse_auction::dist::seeded_rng(seed)))
            }
            Method::Greedy => unreachable!(),
        }
    };
    let text = match (&auction, method) {
        (AnyAuction::Myersonian(m), Method::Greedy) => {
            let f = discrete()?;
            let r = greedy_round(m, &f, &grid, Execution::default())?;
            eprintln!(
                "revenue {:.6} -> {:.6}",
                exact_revenue_single_item(m, &f)?,
                exact_revenue_single_item(&r, &f)?
            );
            myersonian_to_toml(&r)
        }
        (AnyAuction::Myersonian(m), _) => {
            let phis = round_phis(m.phis(), &rule(m.n())?)?;
            myersonian_to_toml(&coarse_auction::SingleItemAuction::new(phis)?.with_payment_rule(m.payment_rule()))
        }
        (AnyAuction::SingleParameter(_), Method::Greedy) => {
            return Err(input("greedy rounding is defined for single-item auctions; use --method randomized"));
        }
        (AnyAuction::SingleParameter(s), _) => sp_auction_to_toml(&s.with_phis(round_phis(s.phis(), &rule(s.n())?)?)?),
        (AnyAuction::ReserveIroned(r), Method::RoundDown) => r.round_down(&grid).to_text(),
        _ => return Err(input("only Myersonian auctions, or (p, I) auctions with round-down, can be rounded")),
    };
    match a.out {
        Some(p) => write(&p, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn cmd_verify(args: VerifyArgs) -> CmdResult {
    let config = args.config.clone();
    let a = with_config(args, config.as_deref())?;
    let auction = load_auction(&need(a.auction, "auction")?)?;
    let spec = load_dist(&need(a.dist, "dist")?)?;
    let f = spec
        .product()
        .ok_or_else(|| input("verification needs a discrete distribution spec"))??;
    let mut cfg = VerifyConfig::default();
    if let Some(eps) = a.eps {
        cfg.grid = Some(EpsGrid::new(eps, auction.h())?);
    }
    if let Some(b) = a.budget {
        cfg.budget = b;
    }
    let r = verify(&auction, &f, &cfg, Execution::default())?;
    println!("profiles {} runs {}", r.profiles, r.runs);
    if r.is_clean() {
        println!("CLEAN");
        return Ok(());
    }
    for v in &r.violations {
        println!("{v}");
    }
    Err(Fail(3, format!("{} violations", r.total_violations)))
}

fn verdict(pass: bool) -> CmdResult {
    if pass {
        println!("PASS");
        Ok(())
    } else {
        println!("FAIL");
        Err(Fail(3, "fixture check failed".into()))
    }
}

fn cmd_repro(a: ReproArgs) -> CmdResult {
    let exec = Execution::default();
    match a.fixture {
        Fixture::Tight => {
            let fx = Tight::default();
            let r = fx.check()?;
            println!("opt revenue {} (eta {})", r.opt_revenue, fx.eta);
            println!("myerson revenue {}", r.myerson_revenue);
            println!("best coarse revenue {} over {} auctions", r.best_coarse_revenue, r.coarse_auctions_checked);
            verdict((r.opt_revenue - fx.eta).abs() < 1e-15 && r.best_coarse_revenue == 0.0)
        }
        Fixture::Triangle => {
            let seed = need(a.seed, "seed")?;
            let fx = Triangle { eps: 0.1 };
            let opt = fx.closed_form_opt();
            let [w1, w2] = fx.witness_profiles();
            let r1 = opt.run(&w1)?.revenue();
            let r2 = opt.run(&w2)?.revenue();
            println!("witness revenues {r1:.9} {r2:.9} (expected 7/6, 4/3)");
            let trials = a.trials.unwrap_or(1_000_000);
            let e = monte_carlo_revenue(&opt, &fx.sources(), trials, seed, exec)?;
            println!("opt revenue {:.6} ± {:.6} (lower bound {:.6})", e.mean, e.std_error, fx.opt_lower_bound());
            verdict(
                (r1 - 7.0 / 6.0).abs() < 1e-9
                    && (r2 - 4.0 / 3.0).abs() < 1e-9
                    && e.mean + 3.0 * e.std_error > fx.opt_lower_bound(),
            )
        }
        Fixture::RoundDownLoss => {
            let seed = need(a.seed, "seed")?;
            let fx = Triangle { eps: 0.1 };
            let trials = a.trials.unwrap_or(1_000_000);
            let (gap, opt, rd) = fx.round_down_gap(trials, seed, exec)?;
            println!("opt revenue {:.6} ± {:.6}", opt.mean, opt.std_error);
            println!("round-down revenue {:.6} ± {:.6} (closed form {:.6})", rd.mean, rd.std_error, fx.round_down_revenue());
            println!("gap {:.6} ± {:.6}, threshold 0.125", gap.mean, gap.std_error);
            verdict(gap.mean - 3.0 * gap.std_error > 0.125)
        }
        Fixture::IidPerprofile => {
            let seed = need(a.seed, "seed")?;
            let r = iid_per_profile_check(a.trials.unwrap_or(100_000), seed);
            println!("checks {} failures {} worst margin {:.3e}", r.checks, r.failures, r.worst_margin);
            verdict(r.failures == 0)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let r = match cli.cmd {
        Cmd::Learn(a) => cmd_learn(a),
        Cmd::Eval(a) => cmd_eval(a),
        Cmd::Round(a) => cmd_round(a),
        Cmd::Verify(a) => cmd_verify(a),
        Cmd::Repro(a) => cmd_repro(a),
    };
    match r {
        Ok(()) => ExitCode::SUCCESS,
        Err(Fail(code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}
