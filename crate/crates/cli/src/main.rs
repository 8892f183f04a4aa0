//! Batch driver for the auction simulation lab.
//!
//! Exit codes: 0 success, 1 usage/config error, 2 experiment cell failure,
//! 3 individual-rationality violation, 4 truthfulness regression.

mod config;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use auctionsim::curve::DiscountCurve;
use auctionsim::dist::ValuationDistribution;
use auctionsim::game::{run_adaptive_game, AcceptanceProbe, ConstantProbe, ThresholdProbe};
use auctionsim::harness::{run_experiment, ExperimentConfig, ReplicationRule};
use auctionsim::instances::{ArrivalMode, InstancePreset};
use auctionsim::market::{BidStream, MarketInstance};
use auctionsim::mech::{
    CompareMode, LearningMechanism, MechanismConfig, MechanismId, PostedMechanism, PostedRule,
};
use auctionsim::oracle;
use auctionsim::probe::{
    class_crossing_delay, truthfulness_probe, truthfulness_probe_exact, CoValues, DeviationKind,
    ProbeSetup, Verdict,
};

use config::{parse_n_spec, FlatConfig, EXPERIMENT_KEYS};

const EXIT_USAGE: u8 = 1;
const EXIT_CELL_FAILURE: u8 = 2;
const EXIT_IR_VIOLATION: u8 = 3;
const EXIT_TRUTH_REGRESSION: u8 = 4;

#[derive(Parser)]
#[command(name = "auctionsim", version, about = "Online-auction simulation lab")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte Carlo experiment sweep and write a report.
    Experiment(ExperimentArgs),
    /// Generate a preset market instance as JSON.
    Instance(InstanceArgs),
    /// Probe a mechanism for profitable deviations.
    Probe(ProbeArgs),
    /// Play the adaptive bidding game against a probe mechanism.
    Game(GameArgs),
    /// Export a posted-price reservation schedule as CSV.
    Schedule(ScheduleArgs),
    /// Evaluate offline oracles on an archived instance.
    Oracle(OracleArgs),
}

#[derive(Args)]
struct ExperimentArgs {
    /// Flat key-value config file; flags override file values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Named preset (`paper-fig-ratios`, `quick`).
    #[arg(long)]
    preset: Option<String>,
    /// Comma list of mechanisms (m_r, m_1, m_w, m_mw, mod1, m_z, m_f, m_d, m_t, m_l, vickrey).
    #[arg(long)]
    mech: Option<String>,
    /// Comma list of curve presets D1..D6.
    #[arg(long)]
    curve: Option<String>,
    /// Comma list of valuation presets (uni, nor, exp, ext).
    #[arg(long)]
    dist: Option<String>,
    /// Buyer counts: value, comma list, or lo..hi:step.
    #[arg(long)]
    n: Option<String>,
    /// Discount-class base B.
    #[arg(long = "B", visible_alias = "base")]
    base: Option<f64>,
    /// Valuation-gap exponent bound k.
    #[arg(long)]
    k: Option<f64>,
    /// Arrival rate; `auto` means n / horizon.
    #[arg(long)]
    lambda: Option<String>,
    #[arg(long)]
    horizon: Option<f64>,
    /// Replications per cell: a count or `10n`.
    #[arg(long)]
    reps: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Arrival process: grid or poisson.
    #[arg(long)]
    arrivals: Option<String>,
    /// Comparison convention in select mechanisms: valuation or price.
    #[arg(long)]
    compare: Option<String>,
    /// Retain transcripts and audit individual rationality.
    #[arg(long)]
    audit: bool,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output format: csv (with a JSON mirror next to it) or json.
    #[arg(long, default_value = "csv")]
    format: String,
}

#[derive(Args)]
struct InstanceArgs {
    /// Preset id: eq10, thm8, thm10, eq26, eq27, eq28, eq29, eq33.
    #[arg(long)]
    preset: String,
    #[arg(long, default_value_t = 16)]
    n: u64,
    #[arg(long, default_value_t = 5.0)]
    k: f64,
    /// Large value K (preset-specific default when omitted).
    #[arg(long = "K", visible_alias = "big-k")]
    big_k: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long = "B", default_value_t = 2.0)]
    base: f64,
    /// Window size for thm8.
    #[arg(long)]
    x: Option<u64>,
    /// Nesting depth for thm10 (n = c^(4c)).
    #[arg(long)]
    c: Option<u32>,
    /// Instance index for thm10.
    #[arg(long)]
    t: Option<u32>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ProbeArgs {
    #[arg(long)]
    mech: String,
    #[arg(long, default_value = "D1")]
    curve: String,
    #[arg(long, default_value_t = 12)]
    n: usize,
    #[arg(long, default_value_t = 2000.0)]
    horizon: f64,
    /// Deviations: `scale`, `delay`, or `all`.
    #[arg(long, default_value = "all")]
    deviation: String,
    #[arg(long, default_value_t = 1)]
    target_slot: usize,
    /// Target's true valuation (default: near the top of the distribution).
    #[arg(long)]
    target_value: Option<f64>,
    /// Co-bidder / planning distribution preset.
    #[arg(long, default_value = "uni")]
    dist: String,
    /// Exact enumeration instead of sampling (needs n <= 7).
    #[arg(long)]
    exact: bool,
    #[arg(long, default_value_t = 2000)]
    reps: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GameArgs {
    /// Probe spec: `constant:<p>` or `threshold:<reserve>:<p>`.
    #[arg(long, default_value = "constant:0.25")]
    probe: String,
    #[arg(long, default_value_t = 100)]
    n: usize,
    /// Escalation factor applied after generous rounds.
    #[arg(long, default_value_t = 1e6)]
    escalate: f64,
    #[arg(long, default_value_t = 1.0)]
    b1: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ScheduleArgs {
    /// Posted mechanism whose schedule to export: m_f, m_d, or m_t.
    #[arg(long, default_value = "m_t")]
    mech: String,
    /// Distribution: preset (uni, nor, exp) or `uniform:<lo>:<hi>`,
    /// `normal:<mean>:<sd>`, `exponential:<rate>`.
    #[arg(long, default_value = "uniform:0:1")]
    dist: String,
    #[arg(long, default_value = "D1")]
    curve: String,
    /// Explicit per-slot discount grid (comma list), overriding the curve.
    #[arg(long)]
    grid: Option<String>,
    #[arg(long, default_value_t = 100)]
    n: u64,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long, default_value_t = 2000.0)]
    horizon: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct OracleArgs {
    /// Archived instance JSON.
    #[arg(long)]
    instance: PathBuf,
    /// Oracle: vickrey, opt1, exact-vickrey, observe-select.
    #[arg(long, default_value = "exact-vickrey")]
    op: String,
    /// Class slot range (1-based, inclusive start) for observe-select.
    #[arg(long, default_value_t = 1)]
    class_lo: usize,
    #[arg(long)]
    class_hi: Option<usize>,
}

fn main() -> ExitCode {
    if let Ok(width) = std::env::var("AUCTIONSIM_PARALLELISM") {
        if let Ok(width) = width.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(width).build_global();
        }
    }
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Experiment(args) => cmd_experiment(args),
        Command::Instance(args) => cmd_instance(args),
        Command::Probe(args) => cmd_probe(args),
        Command::Game(args) => cmd_game(args),
        Command::Schedule(args) => cmd_schedule(args),
        Command::Oracle(args) => cmd_oracle(args),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(EXIT_USAGE)
        }
    }
}

fn split_list(s: &str) -> Vec<String> {
    s.split([',', '+'])
        .map(|p| p.trim().to_string())
        .filter(|p| !p.is_empty())
        .collect()
}

fn write_or_print(out: &Option<PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(path) => {
            std::fs::write(path, text)
                .with_context(|| format!("cannot write {}", path.display()))?;
        }
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
        }
    }
    Ok(())
}

fn build_experiment_config(args: &ExperimentArgs) -> Result<ExperimentConfig> {
    let file = match &args.config {
        Some(path) => FlatConfig::load(path)?,
        None => FlatConfig::default(),
    };
    for key in file.keys() {
        if !EXPERIMENT_KEYS.contains(&key) {
            bail!("unknown config key `{key}` (known: {})", EXPERIMENT_KEYS.join(", "));
        }
    }
    let pick = |flag: &Option<String>, key: &str| -> Option<String> {
        flag.clone().or_else(|| file.get(key).map(String::from))
    };

    let preset = pick(&args.preset, "preset");
    let mut cfg = match preset.as_deref() {
        None => ExperimentConfig::new(),
        Some("paper-fig-ratios") => ExperimentConfig::paper_fig_ratios(),
        Some("quick") => {
            let mut c = ExperimentConfig::new();
            c.mechanisms = vec![MechanismId::MR, MechanismId::MW, MechanismId::MZ];
            c.curves = vec!["D1".into(), "D4".into()];
            c.dists = vec!["uni".into()];
            c.n_values = vec![200];
            c.replications = ReplicationRule::Count(2000);
            c
        }
        Some(other) => bail!("unknown experiment preset `{other}`"),
    };

    if let Some(mechs) = pick(&args.mech, "mech") {
        cfg.mechanisms = split_list(&mechs)
            .iter()
            .map(|m| MechanismId::parse(m).map_err(|e| anyhow!(e)))
            .collect::<Result<_>>()?;
    }
    if let Some(curves) = pick(&args.curve, "curve") {
        cfg.curves = split_list(&curves);
    }
    if let Some(dists) = pick(&args.dist, "dist") {
        cfg.dists = split_list(&dists);
    }
    if let Some(nspec) = pick(&args.n, "n") {
        cfg.n_values = parse_n_spec(&nspec)?;
    }
    if let Some(b) = args.base.or_else(|| file.get("b").and_then(|v| v.parse().ok())) {
        cfg.base = b;
    }
    if let Some(k) = args.k.or_else(|| file.get("k").and_then(|v| v.parse().ok())) {
        cfg.k = k;
    }
    if let Some(lambda) = pick(&args.lambda, "lambda") {
        cfg.lambda = match lambda.as_str() {
            "auto" => None,
            v => Some(v.parse::<f64>().context("lambda must be a number or `auto`")?),
        };
    }
    if let Some(h) = args.horizon.or_else(|| file.get("horizon").and_then(|v| v.parse().ok())) {
        cfg.horizon = h;
    }
    if let Some(reps) = pick(&args.reps, "reps") {
        cfg.replications = ReplicationRule::parse(&reps).map_err(|e| anyhow!(e))?;
    }
    if let Some(seed) = args.seed.or_else(|| file.get("seed").and_then(|v| v.parse().ok())) {
        cfg.base_seed = seed;
    }
    if let Some(arrivals) = pick(&args.arrivals, "arrivals") {
        cfg.arrivals = ArrivalMode::parse(&arrivals).map_err(|e| anyhow!(e))?;
    }
    if let Some(compare) = pick(&args.compare, "compare") {
        cfg.compare = match compare.to_ascii_lowercase().as_str() {
            "valuation" => CompareMode::Valuation,
            "price" => CompareMode::Price,
            other => bail!("compare must be `valuation` or `price`, got `{other}`"),
        };
    }
    if args.audit || file.get("audit").is_some_and(|v| v == "true" || v == "1") {
        cfg.audit = true;
    }
    Ok(cfg)
}

fn cmd_experiment(args: ExperimentArgs) -> Result<u8> {
    let cfg = build_experiment_config(&args)?;
    let cell_count =
        cfg.mechanisms.len() * cfg.curves.len() * cfg.dists.len() * cfg.n_values.len();
    eprintln!("running {cell_count} cells: {}", cfg.echo());
    let report = run_experiment(&cfg).map_err(|e| anyhow!(e))?;
    for cell in &report.cells {
        match &cell.failure {
            Some(err) => eprintln!(
                "cell {}/{}/{}/n={}: FAILED ({err})",
                cell.mechanism, cell.curve, cell.dist, cell.n
            ),
            None => eprintln!(
                "cell {}/{}/{}/n={}: ratio {:.6} (ci {:.6}) in {} ms",
                cell.mechanism, cell.curve, cell.dist, cell.n, cell.ratio, cell.ci95_ratio,
                cell.wall_ms
            ),
        }
    }
    match args.format.as_str() {
        "csv" => {
            write_or_print(&args.out, &report.to_csv())?;
            if let Some(path) = &args.out {
                let mirror = path.with_extension("json");
                std::fs::write(&mirror, report.to_json().map_err(|e| anyhow!(e))?)?;
            }
        }
        "json" => write_or_print(&args.out, &report.to_json().map_err(|e| anyhow!(e))?)?,
        other => bail!("format must be csv or json, got `{other}`"),
    }
    if report.any_failure() {
        return Ok(EXIT_CELL_FAILURE);
    }
    if report.total_ir_violations() > 0 {
        return Ok(EXIT_IR_VIOLATION);
    }
    Ok(0)
}

fn cmd_instance(args: InstanceArgs) -> Result<u8> {
    let preset = match args.preset.as_str() {
        "eq10" => InstancePreset::Eq10 { n: args.n, k: args.k, big_k: args.big_k, delta: args.delta },
        "thm8" => InstancePreset::Thm8 {
            n: args.n,
            x: args.x.ok_or_else(|| anyhow!("thm8 needs --x"))?,
            k: args.k,
            big_k: args.big_k,
            delta: args.delta,
        },
        "thm10" => InstancePreset::Thm10 {
            c: args.c.ok_or_else(|| anyhow!("thm10 needs --c"))?,
            t: args.t.ok_or_else(|| anyhow!("thm10 needs --t"))?,
            big_k: args.big_k,
        },
        "eq26" => InstancePreset::Eq26 { n: args.n, big_k: args.big_k, eps: args.eps },
        "eq27" => InstancePreset::Eq27 {
            n: args.n,
            k: args.k,
            base: args.base,
            big_k: args.big_k,
            delta: args.delta,
        },
        "eq28" => InstancePreset::Eq28 { n: args.n, base: args.base, big_k: args.big_k },
        "eq29" => InstancePreset::Eq29 { n: args.n, k: args.k, big_k: args.big_k, delta: args.delta },
        "eq33" => InstancePreset::Eq33 { n: args.n, base: args.base, big_k: args.big_k },
        other => bail!("unknown instance preset `{other}`"),
    };
    let instance = preset.build(args.lambda).map_err(|e| anyhow!(e))?;
    write_or_print(&args.out, &instance.to_json().map_err(|e| anyhow!(e))?)?;
    Ok(0)
}

fn parse_deviations(spec: &str, setup: &ProbeSetup) -> Result<Vec<DeviationKind>> {
    let mut out = Vec::new();
    for part in split_list(spec) {
        match part.as_str() {
            "scale" => out.extend(
                [0.5, 0.9, 1.1, 2.0].map(|factor| DeviationKind::ScaleBid { factor }),
            ),
            "delay" => {
                out.push(DeviationKind::DelaySlots { delta: 1 });
                out.push(DeviationKind::DelaySlots { delta: 2 });
                let arrivals = auctionsim::instances::grid_arrivals(
                    setup.n,
                    setup.config.lambda,
                    setup.config.horizon,
                );
                if let Some(delta) = class_crossing_delay(
                    &setup.config.curve,
                    &arrivals,
                    setup.target_slot,
                    setup.config.base,
                ) {
                    out.push(DeviationKind::DelaySlots { delta });
                }
            }
            "all" => {
                out.extend(parse_deviations("scale", setup)?);
                out.extend(parse_deviations("delay", setup)?);
            }
            other => bail!("unknown deviation `{other}` (scale, delay, all)"),
        }
    }
    Ok(out)
}

fn cmd_probe(args: ProbeArgs) -> Result<u8> {
    let mech = MechanismId::parse(&args.mech).map_err(|e| anyhow!(e))?;
    let lambda = args.n as f64 / args.horizon;
    let curve = DiscountCurve::preset(&args.curve, args.n as u64, lambda, args.horizon)
        .map_err(|e| anyhow!(e))?;
    let dist = parse_dist_spec(&args.dist)?;
    let (_, hi) = dist.support();
    let target_value = args.target_value.unwrap_or(0.95 * hi);
    let mut config = MechanismConfig::new(curve, lambda, args.horizon, args.n as u64);
    config.dist = Some(dist.clone());
    let setup = ProbeSetup {
        mechanism: mech,
        config,
        n: args.n,
        target_slot: args.target_slot,
        target_value,
        co_values: if args.exact {
            // Exact mode enumerates a fixed co-bidder multiset.
            let mut rng = auctionsim::seeding::rng_for(args.seed);
            CoValues::Fixed((0..args.n - 1).map(|_| dist.sample(&mut rng)).collect())
        } else {
            CoValues::Dist(dist.clone())
        },
        reps: args.reps,
        seed: args.seed,
    };
    let deviations = parse_deviations(&args.deviation, &setup)?;
    let verdicts = if args.exact {
        truthfulness_probe_exact(&setup, &deviations).map_err(|e| anyhow!(e))?
    } else {
        truthfulness_probe(&setup, &deviations).map_err(|e| anyhow!(e))?
    };

    let mut text = String::from("mechanism,deviation,truthful,deviant,gain,gain_3se,exact,verdict\n");
    let (value_truthful, time_truthful) = mech.documented_truthful();
    let mut regression = false;
    for v in &verdicts {
        let documented = match v.deviation {
            DeviationKind::ScaleBid { .. } => value_truthful,
            DeviationKind::DelaySlots { .. } => time_truthful,
            DeviationKind::ScaleAndDelay { .. } => value_truthful && time_truthful,
        };
        if v.verdict == Verdict::Fail && documented {
            regression = true;
        }
        text.push_str(&format!(
            "{},{:?},{},{},{},{},{},{:?}\n",
            v.mechanism.name(),
            v.deviation,
            v.truthful_mean,
            v.deviant_mean,
            v.gain,
            v.gain_3se,
            v.exact,
            v.verdict
        ));
    }
    write_or_print(&args.out, &text)?;
    Ok(if regression { EXIT_TRUTH_REGRESSION } else { 0 })
}

fn cmd_game(args: GameArgs) -> Result<u8> {
    let parts: Vec<&str> = args.probe.split(':').collect();
    let mut probe: Box<dyn AcceptanceProbe> = match parts.as_slice() {
        ["constant", p] => Box::new(ConstantProbe(p.parse()?)),
        ["threshold", reserve, p] => {
            Box::new(ThresholdProbe { reserve: reserve.parse()?, p: p.parse()? })
        }
        _ => bail!("probe must be `constant:<p>` or `threshold:<reserve>:<p>`"),
    };
    let transcript = run_adaptive_game(probe.as_mut(), args.n, args.escalate, args.b1)
        .map_err(|e| anyhow!(e))?;
    eprintln!(
        "game: vickrey {} vs mechanism {} -> ratio {}",
        transcript.vickrey_revenue, transcript.mechanism_revenue, transcript.realized_ratio
    );
    write_or_print(&args.out, &serde_json::to_string_pretty(&transcript)?)?;
    Ok(0)
}

fn parse_dist_spec(spec: &str) -> Result<ValuationDistribution> {
    if let Ok(preset) = ValuationDistribution::preset(spec) {
        return Ok(preset);
    }
    let parts: Vec<&str> = spec.split(':').collect();
    Ok(match parts.as_slice() {
        ["uniform", lo, hi] => ValuationDistribution::Uniform { lo: lo.parse()?, hi: hi.parse()? },
        ["normal", mean, sd] => {
            ValuationDistribution::Normal { mean: mean.parse()?, sd: sd.parse()? }
        }
        ["exponential", rate] => ValuationDistribution::Exponential { rate: rate.parse()? },
        _ => bail!("unknown distribution spec `{spec}`"),
    })
}

fn cmd_schedule(args: ScheduleArgs) -> Result<u8> {
    let mech = MechanismId::parse(&args.mech).map_err(|e| anyhow!(e))?;
    let dist = parse_dist_spec(&args.dist)?;
    if args.n == 0 {
        write_or_print(&args.out, "j,t,d,x,rho,r_ladder,r_semi_ladder\n")?;
        return Ok(0);
    }
    if let Some(grid) = &args.grid {
        // Explicit grid: backward induction straight over the given slots.
        let ds: Vec<f64> = split_list(grid)
            .iter()
            .map(|s| s.parse::<f64>().map_err(Into::into))
            .collect::<Result<_>>()?;
        let times: Vec<f64> = (1..=ds.len()).map(|j| j as f64).collect();
        let schedule = auctionsim::mech::dynamic_schedule_for_grid(&dist, times, ds)
            .map_err(|e| anyhow!(e))?;
        write_or_print(&args.out, &schedule.to_csv())?;
        return Ok(0);
    }
    let lambda = args.lambda.unwrap_or(args.n as f64 / args.horizon);
    let curve = DiscountCurve::preset(&args.curve, args.n, lambda, args.horizon)
        .map_err(|e| anyhow!(e))?;
    let mut config = MechanismConfig::new(curve, lambda, args.horizon, args.n);
    config.dist = Some(dist);
    let text = match mech {
        MechanismId::MF => {
            let m = PostedMechanism::new(PostedRule::Fixed, &config).map_err(|e| anyhow!(e))?;
            format!("# fixed_price: {}\n{}", m.fixed_price(), m.schedule().to_csv())
        }
        MechanismId::MD => PostedMechanism::new(PostedRule::Dynamic, &config)
            .map_err(|e| anyhow!(e))?
            .schedule()
            .to_csv(),
        MechanismId::MT => PostedMechanism::new(PostedRule::SemiTruthful, &config)
            .map_err(|e| anyhow!(e))?
            .schedule()
            .to_csv(),
        MechanismId::ML => {
            let m = LearningMechanism::new(&config).map_err(|e| anyhow!(e))?;
            format!("# learning samples n_s: {}\n", m.n_s())
        }
        other => bail!("`{}` has no reservation schedule", other.name()),
    };
    write_or_print(&args.out, &text)?;
    Ok(0)
}

fn cmd_oracle(args: OracleArgs) -> Result<u8> {
    let text = std::fs::read_to_string(&args.instance)
        .with_context(|| format!("cannot read {}", args.instance.display()))?;
    let instance = MarketInstance::from_json(&text).map_err(|e| anyhow!(e))?;
    let stream = BidStream::identity(&instance);
    let value = match args.op.as_str() {
        "vickrey" => {
            let out = oracle::vickrey_offline(&stream);
            println!("winner: {:?}", out.winner);
            out.revenue
        }
        "opt1" => oracle::opt1(&stream),
        "exact-vickrey" => oracle::exact_expected_vickrey(&instance).map_err(|e| anyhow!(e))?,
        "observe-select" => {
            let hi = args.class_hi.unwrap_or(instance.n());
            if args.class_lo < 1 || hi < args.class_lo {
                bail!("bad class slot range {}..{}", args.class_lo, hi);
            }
            oracle::exact_expected_observe_select(&instance, args.class_lo - 1..hi)
                .map_err(|e| anyhow!(e))?
        }
        other => bail!("unknown oracle `{other}`"),
    };
    println!("{value}");
    Ok(0)
}
