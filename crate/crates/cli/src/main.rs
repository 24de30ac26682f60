//! `olps`: list strategies, generate synthetic markets and run backtests.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use olps::backtest::{summarize, Report};
use olps::benchmarks::bcrp;
use olps::market::{load_price_relatives, synthetic_cg86, synthetic_iid, FileFormat};
use olps::registry::{build, catalog, lookup, BuildContext, ExpertRequest, ParamKind, Params, StrategyInfo};
use olps::simplex::crp_wealth;
use olps::{run_backtest, CostSpec, OlpsError, PriceRelatives};

#[derive(Parser)]
#[command(name = "olps", version, about = "Online portfolio selection backtester")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the strategy catalog.
    List {
        #[arg(long, value_enum, default_value_t = ListOutput::Table)]
        output: ListOutput,
    },
    /// Backtest one strategy, or every registered strategy with --all.
    Run(RunArgs),
    /// Write a synthetic market as price relatives in CSV.
    Generate {
        #[command(flatten)]
        market: SyntheticArgs,
        /// Destination file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ListOutput {
    Json,
    Table,
}

#[derive(Clone, Copy, ValueEnum)]
enum Output {
    Json,
    Csv,
    Table,
}

#[derive(Clone, Copy, ValueEnum)]
enum DataFormat {
    Relatives,
    Prices,
}

#[derive(Clone, Copy, ValueEnum)]
enum Synthetic {
    Cg86,
    Iid,
}

#[derive(clap::Args)]
struct SyntheticArgs {
    #[arg(long, value_enum, default_value_t = Synthetic::Cg86)]
    synthetic: Synthetic,
    #[arg(long, default_value_t = 100)]
    periods: usize,
    /// Asset count for the i.i.d. market.
    #[arg(long, default_value_t = 5)]
    assets: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Lower end of the i.i.d. relatives.
    #[arg(long, default_value_t = 0.5)]
    low: f64,
    /// Upper end of the i.i.d. relatives.
    #[arg(long, default_value_t = 1.5)]
    high: f64,
}

#[derive(clap::Args)]
struct RunArgs {
    /// CSV market file, one period per row.
    #[arg(long, conflicts_with = "synthetic")]
    data: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = DataFormat::Relatives)]
    format: DataFormat,
    /// The first CSV row holds asset names.
    #[arg(long)]
    header: bool,
    #[arg(long, value_enum)]
    synthetic: Option<Synthetic>,
    #[arg(long, default_value_t = 100)]
    periods: usize,
    #[arg(long, default_value_t = 5)]
    assets: usize,
    /// Seed for synthetic data and sampling strategies.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.5)]
    low: f64,
    #[arg(long, default_value_t = 1.5)]
    high: f64,
    #[arg(long, required_unless_present = "all")]
    strategy: Option<String>,
    /// Strategy parameters as `k=v,k=v`.
    #[arg(long, alias = "meta-params", default_value = "")]
    params: String,
    /// Experts for meta strategies, e.g. `pamr,olmar(window=10;eps=5)`.
    #[arg(long, default_value = "")]
    experts: String,
    #[arg(long, default_value_t = 0.0)]
    tc_buy: f64,
    #[arg(long, default_value_t = 0.0)]
    tc_sell: f64,
    #[arg(long, value_enum, default_value_t = Output::Json)]
    output: Output,
    /// Also write the wealth path of a single run to this CSV file.
    #[arg(long)]
    wealth_csv: Option<PathBuf>,
    /// Run every registered strategy with default parameters.
    #[arg(long, conflicts_with_all = ["strategy", "experts", "wealth_csv"])]
    all: bool,
}

fn exit_code(e: &OlpsError) -> u8 {
    match e {
        OlpsError::UnknownStrategy(_) | OlpsError::Parameter { .. } | OlpsError::Argument(_) => 2,
        OlpsError::Parse { .. } | OlpsError::Shape(_) | OlpsError::Io(_) => 3,
        OlpsError::Numeric(_) | OlpsError::Convergence { .. } | OlpsError::ContractViolation { .. } => 4,
    }
}

fn synthetic_market(kind: Synthetic, periods: usize, assets: usize, seed: u64, low: f64, high: f64) -> olps::Result<PriceRelatives> {
    match kind {
        Synthetic::Cg86 => synthetic_cg86(periods),
        Synthetic::Iid => synthetic_iid(assets, periods, seed, low, high),
    }
}

fn load_market(args: &RunArgs) -> olps::Result<PriceRelatives> {
    match (&args.data, args.synthetic) {
        (Some(path), _) => {
            let format = match args.format {
                DataFormat::Relatives => FileFormat::Relatives,
                DataFormat::Prices => FileFormat::Prices,
            };
            load_price_relatives(path, format, args.header)
        }
        (None, Some(kind)) => synthetic_market(kind, args.periods, args.assets, args.seed, args.low, args.high),
        (None, None) => Err(OlpsError::Argument("either --data or --synthetic is required".into())),
    }
}

struct Job {
    name: String,
    params: Params,
    experts: Vec<ExpertRequest>,
    expert_labels: Vec<String>,
}

fn run_one(job: &Job, seq: &PriceRelatives, costs: CostSpec, seed: u64, bcrp_wealth: f64) -> olps::Result<(Report, olps::backtest::BacktestResult)> {
    let ctx = BuildContext { market: seq, costs, seed };
    let mut strategy = build(&job.name, &job.params, &job.experts, &ctx)?;
    let result = run_backtest(&mut strategy, seq, costs)?;
    let mut report = summarize(&result, bcrp_wealth)?;
    report.strategy = job.name.clone();
    report.params = job.params.as_map().clone();
    report.experts = job.expert_labels.clone();
    report.costs = costs;
    report.m = seq.m();
    Ok((report, result))
}

fn fmt_f(v: f64) -> String {
    format!("{v:.6e}")
}

fn render(reports: &[Report], output: Output) -> String {
    match output {
        Output::Json if reports.len() == 1 => reports[0].to_json(),
        Output::Json => serde_json::to_string_pretty(reports).expect("reports serialize"),
        Output::Csv => {
            let mut s = String::from("strategy,n,m,final_wealth,growth_rate,bcrp_wealth,regret,max_period_loss,total_costs,cost_drag\n");
            for r in reports {
                s.push_str(&format!(
                    "{},{},{},{},{},{},{},{},{},{}\n",
                    r.strategy, r.n, r.m, r.final_wealth, r.growth_rate, r.bcrp_wealth, r.regret, r.max_period_loss, r.total_costs, r.cost_drag
                ));
            }
            s.pop();
            s
        }
        Output::Table => {
            let mut s = format!(
                "{:<16} {:>14} {:>14} {:>14} {:>14}",
                "strategy", "final_wealth", "growth_rate", "regret", "total_costs"
            );
            for r in reports {
                s.push_str(&format!(
                    "\n{:<16} {:>14} {:>14} {:>14} {:>14}",
                    r.strategy,
                    fmt_f(r.final_wealth),
                    fmt_f(r.growth_rate),
                    fmt_f(r.regret),
                    fmt_f(r.total_costs)
                ));
                for e in r.expert_summaries.iter().flatten() {
                    s.push_str(&format!(
                        "\n  {:<14} {:>14} weight {:.4}",
                        e.name,
                        fmt_f(e.wealth),
                        e.weight
                    ));
                }
            }
            s
        }
    }
}

fn param_summary(info: &StrategyInfo) -> String {
    info.params
        .iter()
        .map(|p| {
            let kind = match &p.kind {
                ParamKind::Real => "real".to_string(),
                ParamKind::Integer => "int".to_string(),
                ParamKind::Choice(c) => c.join("|"),
                ParamKind::Weights => "w1:w2:..".to_string(),
            };
            match p.default {
                Some(d) => format!("{}={} ({kind})", p.key, d),
                None => format!("{} ({kind})", p.key),
            }
        })
        .collect::<Vec<_>>()
        .join(", ")
}

fn list(output: ListOutput) -> olps::Result<String> {
    let cat = catalog();
    Ok(match output {
        ListOutput::Json => serde_json::to_string_pretty(&cat).expect("catalog serializes"),
        ListOutput::Table => {
            let mut s = format!("{:<16} {:<18} {}", "name", "category", "parameters");
            for info in &cat {
                let mut name = info.name.to_string();
                if info.hindsight {
                    name.push('*');
                }
                s.push_str(&format!("\n{:<16} {:<18} {}", name, info.category.label(), param_summary(info)));
            }
            s.push_str("\n* hindsight benchmark");
            s
        }
    })
}

fn run(args: &RunArgs) -> olps::Result<String> {
    let costs = CostSpec::new(args.tc_buy, args.tc_sell)?;
    let params = Params::parse(&args.params)?;
    let experts = ExpertRequest::parse_list(&args.experts)?;
    let expert_labels: Vec<String> = if args.experts.trim().is_empty() {
        Vec::new()
    } else {
        split_top_level(&args.experts)
    };

    let jobs: Vec<Job> = if args.all {
        if !params.is_empty() {
            return Err(OlpsError::Argument("--params cannot be combined with --all".into()));
        }
        catalog()
            .into_iter()
            .map(|info| Job {
                name: info.name.to_string(),
                params: Params::new(),
                experts: Vec::new(),
                expert_labels: Vec::new(),
            })
            .collect()
    } else {
        let name = args.strategy.clone().expect("clap requires --strategy without --all");
        lookup(&name)?;
        vec![Job { name, params, experts, expert_labels }]
    };

    let seq = load_market(args)?;
    let bcrp_wealth = crp_wealth(&bcrp(&seq)?, &seq)?;

    let outcomes: Vec<olps::Result<(Report, olps::backtest::BacktestResult)>> = std::thread::scope(|scope| {
        let handles: Vec<_> = jobs
            .iter()
            .map(|job| scope.spawn(|| run_one(job, &seq, costs, args.seed, bcrp_wealth)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|_| Err(OlpsError::Numeric("strategy thread panicked".into()))))
            .collect()
    });

    let mut reports = Vec::with_capacity(outcomes.len());
    let mut first_error = None;
    for (job, outcome) in jobs.iter().zip(outcomes) {
        match outcome {
            Ok((report, result)) => {
                if let Some(path) = &args.wealth_csv {
                    let file = std::fs::File::create(path)?;
                    result.write_wealth_csv(std::io::BufWriter::new(file))?;
                }
                reports.push(report);
            }
            Err(e) if args.all => {
                eprintln!("olps: {}: {e}", job.name);
                first_error.get_or_insert(e);
            }
            Err(e) => return Err(e),
        }
    }
    if let Some(e) = first_error {
        println!("{}", render(&reports, args.output));
        return Err(e);
    }
    Ok(render(&reports, args.output))
}

/// Splits on commas outside parentheses.
fn split_top_level(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut depth = 0usize;
    let mut current = String::new();
    for ch in text.chars() {
        match ch {
            '(' => depth += 1,
            ')' => depth = depth.saturating_sub(1),
            ',' if depth == 0 => {
                out.push(current.trim().to_string());
                current.clear();
                continue;
            }
            _ => {}
        }
        current.push(ch);
    }
    if !current.trim().is_empty() {
        out.push(current.trim().to_string());
    }
    out
}

fn generate(market: &SyntheticArgs, out: &Option<PathBuf>) -> olps::Result<String> {
    let seq = synthetic_market(market.synthetic, market.periods, market.assets, market.seed, market.low, market.high)?;
    match out {
        Some(path) => {
            seq.save_csv(path)?;
            Ok(String::new())
        }
        None => {
            let mut buf = Vec::new();
            seq.write_csv(&mut buf)?;
            Ok(String::from_utf8(buf).expect("csv output is utf-8").trim_end().to_string())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::List { output } => list(*output),
        Command::Run(args) => run(args),
        Command::Generate { market, out } => generate(market, out),
    };
    match result {
        Ok(text) => {
            if !text.is_empty() {
                let mut stdout = std::io::stdout().lock();
                let _ = writeln!(stdout, "{text}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("olps: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
