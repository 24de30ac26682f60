//! Named strategies, their parameter schemas, and construction from text.

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;

use crate::backtest::{CostSpec, Strategy};
use crate::benchmarks::{BuyAndHold, ConstantRebalanced, Hindsight};
use crate::error::{OlpsError, Result};
use crate::follow_loser::{Anticor, Cwmr, Olmar, Pamr, PamrSpec, PamrVariant, Rmr};
use crate::follow_winner::{
    ExpConcaveFtl, FollowLeader, FtlVariant, GradientMode, GradientStrategy, OnlineNewtonStep,
    SwitchingPortfolio, UniversalPortfolio, UpMode, UpPrior, UpSpec,
};
use crate::market::PriceRelatives;
use crate::meta_learning::flh::BaseFactory;
use crate::meta_learning::{stock_experts, FollowLeadingHistory, MetaRule, MetaStrategy};
use crate::pattern_matching::{pm_expert_family, PatternMatching, SelectorMethod, SelectorSpec, UtilitySpec};
use crate::simplex::Portfolio;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Category {
    #[serde(rename = "Benchmark")]
    Benchmark,
    #[serde(rename = "Follow-the-Winner")]
    FollowTheWinner,
    #[serde(rename = "Follow-the-Loser")]
    FollowTheLoser,
    #[serde(rename = "Pattern-Matching")]
    PatternMatching,
    #[serde(rename = "Meta-Learning")]
    MetaLearning,
}

impl Category {
    pub const ALL: [Category; 5] = [
        Category::Benchmark,
        Category::FollowTheWinner,
        Category::FollowTheLoser,
        Category::PatternMatching,
        Category::MetaLearning,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Category::Benchmark => "Benchmark",
            Category::FollowTheWinner => "Follow-the-Winner",
            Category::FollowTheLoser => "Follow-the-Loser",
            Category::PatternMatching => "Pattern-Matching",
            Category::MetaLearning => "Meta-Learning",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamKind {
    Real,
    Integer,
    Choice(Vec<&'static str>),
    /// Colon-separated portfolio weights, e.g. `0.3:0.7`.
    Weights,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParamInfo {
    pub key: &'static str,
    pub kind: ParamKind,
    pub default: Option<&'static str>,
    pub help: &'static str,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StrategyInfo {
    pub name: &'static str,
    pub category: Category,
    pub summary: &'static str,
    pub hindsight: bool,
    pub takes_experts: bool,
    pub params: Vec<ParamInfo>,
}

fn real(key: &'static str, default: &'static str, help: &'static str) -> ParamInfo {
    ParamInfo {
        key,
        kind: ParamKind::Real,
        default: Some(default),
        help,
    }
}

fn opt_real(key: &'static str, help: &'static str) -> ParamInfo {
    ParamInfo {
        key,
        kind: ParamKind::Real,
        default: None,
        help,
    }
}

fn int(key: &'static str, default: Option<&'static str>, help: &'static str) -> ParamInfo {
    ParamInfo {
        key,
        kind: ParamKind::Integer,
        default,
        help,
    }
}

fn choice(key: &'static str, options: &[&'static str], default: &'static str, help: &'static str) -> ParamInfo {
    ParamInfo {
        key,
        kind: ParamKind::Choice(options.to_vec()),
        default: Some(default),
        help,
    }
}

fn pm_params(extra: Vec<ParamInfo>) -> Vec<ParamInfo> {
    let mut p = vec![
        int("w", None, "single window length; omit to combine windows 1..=w_max"),
        int("w_max", Some("5"), "largest window in the combined family"),
        choice("agg", &["bah", "exp"], "bah", "how the window family is combined"),
        real("eta", "1", "learning rate for exponential combination"),
        ParamInfo {
            key: "selector",
            kind: ParamKind::Choice(vec!["histogram", "kernel", "nn", "correlation"]),
            default: None,
            help: "override the sample selection method",
        },
        int("bins", Some("2"), "histogram cells per coordinate"),
        real("radius", "0.2", "kernel radius on flattened windows"),
        int("neighbors", Some("10"), "nearest neighbors to keep"),
        real("rho", "0.1", "correlation threshold"),
    ];
    p.extend(extra);
    p
}

fn info(
    name: &'static str,
    category: Category,
    summary: &'static str,
    params: Vec<ParamInfo>,
) -> StrategyInfo {
    StrategyInfo {
        name,
        category,
        summary,
        hindsight: matches!(name, "best" | "bcrp"),
        takes_experts: name.starts_with("meta:"),
        params,
    }
}

/// Every registered strategy.
pub fn catalog() -> Vec<StrategyInfo> {
    use Category::*;
    let gamma_sp = real("gamma", "0.1", "switching probability");
    vec![
        info("bah", Benchmark, "uniform buy and hold", vec![]),
        info("best", Benchmark, "best single stock in hindsight", vec![]),
        info(
            "crp",
            Benchmark,
            "constant rebalanced portfolio",
            vec![ParamInfo {
                key: "b",
                kind: ParamKind::Weights,
                default: None,
                help: "target weights; uniform when omitted",
            }],
        ),
        info("ucrp", Benchmark, "uniform constant rebalanced portfolio", vec![]),
        info("bcrp", Benchmark, "best constant rebalanced portfolio in hindsight", vec![]),
        info(
            "up",
            FollowTheWinner,
            "universal portfolio",
            vec![
                choice("mode", &["auto", "grid", "mc"], "auto", "discretization of the prior"),
                real("step", "0.05", "grid spacing"),
                int("samples", Some("10000"), "prior draws in sampling mode"),
                choice("prior", &["uniform", "dirichlet_half"], "uniform", "prior over portfolios"),
                int("seed", None, "sampling seed; defaults to the run seed"),
            ],
        ),
        info("eg", FollowTheWinner, "exponentiated gradient", vec![real("eta", "0.05", "learning rate")]),
        info("gp", FollowTheWinner, "gradient projection", vec![real("eta", "0.05", "learning rate")]),
        info("em", FollowTheWinner, "expectation maximization", vec![real("eta", "0.05", "learning rate")]),
        info("ftl", FollowTheWinner, "follow the leader", vec![]),
        info("scrp", FollowTheWinner, "successive constant rebalanced portfolio", vec![]),
        info(
            "wscrp",
            FollowTheWinner,
            "weighted successive constant rebalanced portfolio",
            vec![real("gamma", "0.5", "weight on the previous portfolio")],
        ),
        info(
            "vrp",
            FollowTheWinner,
            "variable rebalanced portfolio over a sliding window",
            vec![int("window", Some("10"), "periods in the window")],
        ),
        info("ordentlich", FollowTheWinner, "leader mixed with uniform at rate 1/(t+1)", vec![]),
        info(
            "ons",
            FollowTheWinner,
            "online Newton step",
            vec![real("beta", "1", "trade-off parameter"), real("delta", "0.125", "scale")],
        ),
        info("expconcave_ftl", FollowTheWinner, "regularized follow the leader", vec![]),
        info("sp", FollowTheWinner, "switching portfolios", vec![gamma_sp]),
        info(
            "anticor",
            FollowTheLoser,
            "anti-correlation transfers",
            vec![
                int("window", None, "single window; omit to combine windows 2..=w_max"),
                int("w_max", Some("30"), "largest window in the combined family"),
            ],
        ),
        info(
            "pamr",
            FollowTheLoser,
            "passive aggressive mean reversion",
            vec![
                real("eps", "0.5", "reversion threshold"),
                choice("variant", &["0", "1", "2"], "0", "plain, capped, or smoothed step"),
                real("c", "500", "aggressiveness for variants 1 and 2"),
            ],
        ),
        info(
            "cwmr",
            FollowTheLoser,
            "confidence weighted mean reversion",
            vec![
                real("eps", "0.5", "reversion threshold"),
                real("theta", "0.95", "confidence level"),
                opt_real("phi", "confidence multiplier; overrides theta"),
            ],
        ),
        info(
            "olmar",
            FollowTheLoser,
            "moving average reversion",
            vec![real("eps", "10", "reversion threshold"), int("window", Some("5"), "moving average length")],
        ),
        info(
            "rmr",
            FollowTheLoser,
            "robust median reversion",
            vec![real("eps", "5", "reversion threshold"), int("window", Some("5"), "median window")],
        ),
        info("bh", PatternMatching, "histogram selection, log-optimal", pm_params(vec![])),
        info("bk", PatternMatching, "kernel selection, log-optimal", pm_params(vec![])),
        info("bnn", PatternMatching, "nearest neighbor selection, log-optimal", pm_params(vec![])),
        info("corn", PatternMatching, "correlation selection, log-optimal", pm_params(vec![])),
        info("bs", PatternMatching, "kernel selection, semi-log-optimal", pm_params(vec![])),
        info(
            "bm",
            PatternMatching,
            "kernel selection, mean-variance",
            pm_params(vec![real("lambda", "0.5", "variance penalty")]),
        ),
        info(
            "bgv",
            PatternMatching,
            "kernel selection, log return net of costs",
            pm_params(vec![
                opt_real("tc_buy", "buy rate inside the utility; defaults to the run's rate"),
                opt_real("tc_sell", "sell rate inside the utility; defaults to the run's rate"),
            ]),
        ),
        info("meta:aa", MetaLearning, "aggregating algorithm", vec![real("eta", "1", "learning rate")]),
        info("meta:bah", MetaLearning, "even split, experts run on their own", vec![]),
        info("meta:ogu", MetaLearning, "online gradient updates", vec![real("eta", "0.05", "learning rate")]),
        info(
            "meta:onu",
            MetaLearning,
            "online Newton updates",
            vec![real("beta", "1", "trade-off parameter"), real("delta", "0.125", "scale")],
        ),
        info("meta:flh", MetaLearning, "follow the leading history over one base strategy", vec![]),
    ]
}

pub fn lookup(name: &str) -> Result<StrategyInfo> {
    catalog()
        .into_iter()
        .find(|i| i.name == name)
        .ok_or_else(|| OlpsError::UnknownStrategy(name.to_string()))
}

/// `key=value` pairs for one strategy.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Params(BTreeMap<String, String>);

impl Params {
    pub fn new() -> Self {
        Self::default()
    }

    /// Parses `k=v` pairs separated by `sep`.
    pub fn parse_with(text: &str, sep: char) -> Result<Self> {
        let mut map = BTreeMap::new();
        for pair in text.split(sep).map(str::trim).filter(|p| !p.is_empty()) {
            let (k, v) = pair.split_once('=').ok_or_else(|| OlpsError::Parameter {
                strategy: String::new(),
                key: pair.to_string(),
                reason: "expected key=value".into(),
            })?;
            let (k, v) = (k.trim().to_string(), v.trim().to_string());
            if map.insert(k.clone(), v).is_some() {
                return Err(OlpsError::Parameter {
                    strategy: String::new(),
                    key: k,
                    reason: "given twice".into(),
                });
            }
        }
        Ok(Self(map))
    }

    /// Parses `k=v,k=v`.
    pub fn parse(text: &str) -> Result<Self> {
        Self::parse_with(text, ',')
    }

    pub fn set(&mut self, key: impl Into<String>, value: impl Into<String>) -> &mut Self {
        self.0.insert(key.into(), value.into());
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }

    pub fn as_map(&self) -> &BTreeMap<String, String> {
        &self.0
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// A strategy name with its own parameters, written `name` or `name(k=v;k=v)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExpertRequest {
    pub name: String,
    pub params: Params,
}

impl ExpertRequest {
    pub fn parse(text: &str) -> Result<Self> {
        let text = text.trim();
        match text.find('(') {
            None => Ok(Self {
                name: text.to_string(),
                params: Params::new(),
            }),
            Some(open) => {
                let inner = text[open + 1..].strip_suffix(')').ok_or_else(|| OlpsError::Parameter {
                    strategy: text.to_string(),
                    key: String::new(),
                    reason: "unbalanced parentheses".into(),
                })?;
                Ok(Self {
                    name: text[..open].trim().to_string(),
                    params: Params::parse_with(inner, ';')?,
                })
            }
        }
    }

    /// Comma-separated list; commas inside parentheses belong to the expert.
    pub fn parse_list(text: &str) -> Result<Vec<Self>> {
        let mut out = Vec::new();
        let mut depth = 0usize;
        let mut start = 0;
        for (i, ch) in text.char_indices() {
            match ch {
                '(' => depth += 1,
                ')' => depth = depth.saturating_sub(1),
                ',' if depth == 0 => {
                    if !text[start..i].trim().is_empty() {
                        out.push(Self::parse(&text[start..i])?);
                    }
                    start = i + 1;
                }
                _ => {}
            }
        }
        if !text[start..].trim().is_empty() {
            out.push(Self::parse(&text[start..])?);
        }
        Ok(out)
    }
}

/// What a strategy may see at construction time.
#[derive(Debug, Clone, Copy)]
pub struct BuildContext<'a> {
    /// Hindsight benchmarks are fitted on this market; others only read its width.
    pub market: &'a PriceRelatives,
    pub costs: CostSpec,
    pub seed: u64,
}

struct Reader<'a> {
    strategy: &'a str,
    params: &'a Params,
}

impl Reader<'_> {
    fn error(&self, key: &str, reason: impl Into<String>) -> OlpsError {
        OlpsError::Parameter {
            strategy: self.strategy.to_string(),
            key: key.to_string(),
            reason: reason.into(),
        }
    }

    fn opt_f64(&self, key: &str) -> Result<Option<f64>> {
        self.params
            .get(key)
            .map(|v| {
                v.parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| self.error(key, format!("`{v}` is not a finite number")))
            })
            .transpose()
    }

    fn f64(&self, key: &str, default: f64) -> Result<f64> {
        Ok(self.opt_f64(key)?.unwrap_or(default))
    }

    fn opt_usize(&self, key: &str) -> Result<Option<usize>> {
        self.params
            .get(key)
            .map(|v| {
                v.parse::<usize>()
                    .map_err(|_| self.error(key, format!("`{v}` is not a non-negative integer")))
            })
            .transpose()
    }

    fn usize(&self, key: &str, default: usize) -> Result<usize> {
        Ok(self.opt_usize(key)?.unwrap_or(default))
    }

    fn u64(&self, key: &str, default: u64) -> Result<u64> {
        self.params
            .get(key)
            .map(|v| v.parse::<u64>().map_err(|_| self.error(key, format!("`{v}` is not an integer"))))
            .unwrap_or(Ok(default))
    }

    fn text(&self, key: &str, default: &'static str) -> String {
        self.params.get(key).unwrap_or(default).to_string()
    }

    /// Re-labels argument errors from constructors as errors in this strategy's parameters.
    fn wrap<T>(&self, r: Result<T>) -> Result<T> {
        r.map_err(|e| match e {
            OlpsError::Argument(reason) => {
                let keys: Vec<&str> = self.params.as_map().keys().map(String::as_str).collect();
                let key = if keys.is_empty() { "defaults".to_string() } else { keys.join(",") };
                self.error(&key, reason)
            }
            other => other,
        })
    }
}

/// Rejects keys missing from the schema and choice values outside their options.
pub fn validate_params(info: &StrategyInfo, params: &Params) -> Result<()> {
    for (key, value) in params.as_map() {
        let spec = info.params.iter().find(|p| p.key == key).ok_or_else(|| OlpsError::Parameter {
            strategy: info.name.to_string(),
            key: key.clone(),
            reason: format!(
                "unknown parameter; expected one of [{}]",
                info.params.iter().map(|p| p.key).collect::<Vec<_>>().join(", ")
            ),
        })?;
        if let ParamKind::Choice(options) = &spec.kind {
            if !options.contains(&value.as_str()) {
                return Err(OlpsError::Parameter {
                    strategy: info.name.to_string(),
                    key: key.clone(),
                    reason: format!("`{value}` is not one of [{}]", options.join(", ")),
                });
            }
        }
    }
    Ok(())
}

fn boxed<S: Strategy + 'static>(s: S) -> Box<dyn Strategy> {
    Box::new(s)
}

/// Builds a registered strategy. `experts` is only meaningful for `meta:*` names.
pub fn build(
    name: &str,
    params: &Params,
    experts: &[ExpertRequest],
    ctx: &BuildContext<'_>,
) -> Result<Box<dyn Strategy>> {
    let info = lookup(name)?;
    validate_params(&info, params)?;
    if !experts.is_empty() && !info.takes_experts {
        return Err(OlpsError::Parameter {
            strategy: name.to_string(),
            key: "experts".into(),
            reason: "only combination strategies take experts".into(),
        });
    }
    let r = Reader { strategy: name, params };
    let m = ctx.market.m();

    let strategy = match name {
        "bah" => boxed(BuyAndHold::new()),
        "best" => boxed(Hindsight::best_stock(ctx.market)),
        "bcrp" => boxed(Hindsight::bcrp(ctx.market)?),
        "ucrp" => boxed(ConstantRebalanced::uniform()),
        "crp" => match params.get("b") {
            None => boxed(ConstantRebalanced::uniform()),
            Some(text) => {
                let weights = text
                    .split(':')
                    .map(|v| v.trim().parse::<f64>())
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(|_| r.error("b", format!("`{text}` is not a list of numbers")))?;
                let b = Portfolio::new(weights).map_err(|e| r.error("b", e.to_string()))?;
                if b.len() != m {
                    return Err(r.error("b", format!("{} weights for {m} assets", b.len())));
                }
                boxed(ConstantRebalanced::new(b))
            }
        },
        "up" => {
            let spec = UpSpec {
                mode: match r.text("mode", "auto").as_str() {
                    "grid" => UpMode::Grid,
                    "mc" => UpMode::MonteCarlo,
                    _ => UpMode::Auto,
                },
                grid_step: r.f64("step", 0.05)?,
                samples: r.usize("samples", 10_000)?,
                seed: r.u64("seed", ctx.seed)?,
                prior: match r.text("prior", "uniform").as_str() {
                    "dirichlet_half" => UpPrior::DirichletHalf,
                    _ => UpPrior::Uniform,
                },
            };
            boxed(r.wrap(UniversalPortfolio::new(spec))?)
        }
        "eg" | "gp" | "em" => {
            let mode = match name {
                "eg" => GradientMode::Eg,
                "gp" => GradientMode::Gp,
                _ => GradientMode::Em,
            };
            boxed(r.wrap(GradientStrategy::new(mode, r.f64("eta", 0.05)?))?)
        }
        "ftl" => boxed(FollowLeader::new(FtlVariant::Ftl)?),
        "scrp" => boxed(FollowLeader::new(FtlVariant::Scrp)?),
        "wscrp" => boxed(r.wrap(FollowLeader::new(FtlVariant::Wscrp {
            gamma: r.f64("gamma", 0.5)?,
        }))?),
        "vrp" => boxed(r.wrap(FollowLeader::new(FtlVariant::Vrp {
            window: r.usize("window", 10)?,
        }))?),
        "ordentlich" => boxed(FollowLeader::new(FtlVariant::Ordentlich)?),
        "ons" => boxed(r.wrap(OnlineNewtonStep::new(r.f64("beta", 1.0)?, r.f64("delta", 0.125)?))?),
        "expconcave_ftl" => boxed(ExpConcaveFtl),
        "sp" => {
            if m < 2 {
                return Err(r.error("", "switching needs at least two assets"));
            }
            boxed(r.wrap(SwitchingPortfolio::new(r.f64("gamma", 0.1)?))?)
        }
        "anticor" => match r.opt_usize("window")? {
            Some(w) => boxed(r.wrap(Anticor::new(w))?),
            None => {
                let w_max = r.usize("w_max", 30)?;
                if w_max < 2 {
                    return Err(r.error("w_max", "must be at least 2"));
                }
                let experts = (2..=w_max)
                    .map(|w| Anticor::new(w).map(boxed))
                    .collect::<Result<Vec<_>>>()?;
                boxed(MetaStrategy::new(MetaRule::Bah, experts)?.with_label("anticor"))
            }
        },
        "pamr" => {
            let c = r.f64("c", 500.0)?;
            let variant = match r.text("variant", "0").as_str() {
                "1" => PamrVariant::Capped(c),
                "2" => PamrVariant::Smoothed(c),
                _ => PamrVariant::Plain,
            };
            boxed(r.wrap(Pamr::new(PamrSpec {
                epsilon: r.f64("eps", 0.5)?,
                variant,
            }))?)
        }
        "cwmr" => {
            let eps = r.f64("eps", 0.5)?;
            match r.opt_f64("phi")? {
                Some(phi) => boxed(r.wrap(Cwmr::new(eps, phi))?),
                None => boxed(r.wrap(Cwmr::with_confidence(eps, r.f64("theta", 0.95)?))?),
            }
        }
        "olmar" => boxed(r.wrap(Olmar::new(r.f64("eps", 10.0)?, r.usize("window", 5)?))?),
        "rmr" => boxed(r.wrap(Rmr::new(r.f64("eps", 5.0)?, r.usize("window", 5)?))?),
        "bh" | "bk" | "bnn" | "corn" | "bs" | "bm" | "bgv" => build_pattern_matching(name, &r, ctx)?,
        _ => build_meta(name, &r, experts, ctx)?,
    };
    Ok(strategy)
}

fn build_pattern_matching(name: &str, r: &Reader<'_>, ctx: &BuildContext<'_>) -> Result<Box<dyn Strategy>> {
    let default_selector = match name {
        "bh" => "histogram",
        "bnn" => "nn",
        "corn" => "correlation",
        _ => "kernel",
    };
    let selector = match r.params.get("selector") {
        Some(s) if !s.is_empty() => s.to_string(),
        _ => default_selector.to_string(),
    };
    let method = match selector.as_str() {
        "histogram" => SelectorMethod::Histogram {
            bins: r.usize("bins", 2)?,
        },
        "nn" => SelectorMethod::NearestNeighbor {
            neighbors: r.usize("neighbors", 10)?,
        },
        "correlation" => SelectorMethod::Correlation {
            rho: r.f64("rho", 0.1)?,
        },
        _ => SelectorMethod::Kernel {
            radius: r.f64("radius", 0.2)?,
        },
    };
    let utility = match name {
        "bs" => UtilitySpec::SemiLog,
        "bm" => UtilitySpec::Markowitz {
            lambda: r.f64("lambda", 0.5)?,
        },
        "bgv" => UtilitySpec::Gv {
            costs: r.wrap(CostSpec::new(
                r.f64("tc_buy", ctx.costs.gamma_buy)?,
                r.f64("tc_sell", ctx.costs.gamma_sell)?,
            ))?,
        },
        _ => UtilitySpec::LogOptimal,
    };
    r.wrap(utility.validate())?;

    if let Some(w) = r.opt_usize("w")? {
        let spec = r.wrap(SelectorSpec::new(method, w))?;
        return Ok(boxed(r.wrap(PatternMatching::new(name, spec, utility))?));
    }
    let w_max = r.usize("w_max", 5)?;
    if w_max == 0 {
        return Err(r.error("w_max", "must be at least 1"));
    }
    let grid = (1..=w_max)
        .map(|w| r.wrap(SelectorSpec::new(method, w)))
        .collect::<Result<Vec<_>>>()?;
    let experts: Vec<Box<dyn Strategy>> = pm_expert_family(name, &grid, utility)?.into_iter().map(boxed).collect();
    let rule = match r.text("agg", "bah").as_str() {
        "exp" => MetaRule::Aa {
            eta: r.f64("eta", 1.0)?,
        },
        _ => MetaRule::Bah,
    };
    Ok(boxed(r.wrap(MetaStrategy::new(rule, experts))?.with_label(name)))
}

fn build_meta(
    name: &str,
    r: &Reader<'_>,
    experts: &[ExpertRequest],
    ctx: &BuildContext<'_>,
) -> Result<Box<dyn Strategy>> {
    if name == "meta:flh" {
        let base = match experts {
            [] => ExpertRequest {
                name: "ons".into(),
                params: Params::new(),
            },
            [one] => one.clone(),
            _ => return Err(r.error("experts", "follow the leading history takes exactly one base strategy")),
        };
        let base_info = lookup(&base.name)?;
        if base_info.hindsight {
            return Err(r.error("experts", "a hindsight benchmark cannot be a base strategy"));
        }
        let market = ctx.market.clone();
        let (costs, seed) = (ctx.costs, ctx.seed);
        let factory: BaseFactory = Box::new(move || {
            let ctx = BuildContext {
                market: &market,
                costs,
                seed,
            };
            build(&base.name, &base.params, &[], &ctx)
        });
        return Ok(boxed(FollowLeadingHistory::new(factory)?));
    }

    let rule = match name {
        "meta:aa" => MetaRule::Aa {
            eta: r.f64("eta", 1.0)?,
        },
        "meta:bah" => MetaRule::Bah,
        "meta:ogu" => MetaRule::Ogu {
            eta: r.f64("eta", 0.05)?,
        },
        "meta:onu" => MetaRule::Onu {
            beta: r.f64("beta", 1.0)?,
            delta: r.f64("delta", 0.125)?,
        },
        other => return Err(OlpsError::UnknownStrategy(other.to_string())),
    };
    let pool = if experts.is_empty() {
        stock_experts(ctx.market.m(), ctx.market.asset_names())
    } else {
        experts
            .iter()
            .map(|e| build(&e.name, &e.params, &[], ctx))
            .collect::<Result<Vec<_>>>()?
    };
    Ok(boxed(r.wrap(MetaStrategy::new(rule, pool))?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backtest::run_backtest;
    use crate::market::synthetic_cg86;

    fn ctx(seq: &PriceRelatives) -> BuildContext<'_> {
        BuildContext {
            market: seq,
            costs: CostSpec::zero(),
            seed: 0,
        }
    }

    #[test]
    fn catalog_is_complete() {
        let cat = catalog();
        let names: Vec<&str> = cat.iter().map(|i| i.name).collect();
        for n in [
            "bah", "best", "crp", "ucrp", "bcrp", "up", "eg", "gp", "em", "ftl", "scrp", "wscrp", "vrp", "ons",
            "expconcave_ftl", "sp", "anticor", "pamr", "cwmr", "olmar", "rmr", "bh", "bk", "bnn", "corn", "bs",
            "bm", "bgv", "meta:aa", "meta:bah", "meta:ogu", "meta:onu", "meta:flh",
        ] {
            assert!(names.contains(&n), "{n} missing");
        }
        assert_eq!(lookup("up").unwrap().category, Category::FollowTheWinner);
        assert_eq!(lookup("corn").unwrap().category, Category::PatternMatching);
        let mut cats: Vec<Category> = cat.iter().map(|i| i.category).collect();
        cats.sort();
        cats.dedup();
        assert_eq!(cats, Category::ALL.to_vec());
    }

    #[test]
    fn params_parse() {
        let p = Params::parse("eps=0.4, window=3").unwrap();
        assert_eq!(p.get("eps"), Some("0.4"));
        assert_eq!(p.get("window"), Some("3"));
        assert!(Params::parse("eps").is_err());
        assert!(Params::parse("a=1,a=2").is_err());
        assert!(Params::parse("").unwrap().is_empty());
    }

    #[test]
    fn experts_parse() {
        let list = ExpertRequest::parse_list("pamr(eps=0.3;variant=1),olmar,ucrp").unwrap();
        assert_eq!(list.len(), 3);
        assert_eq!(list[0].name, "pamr");
        assert_eq!(list[0].params.get("variant"), Some("1"));
        assert!(list[1].params.is_empty());
    }

    #[test]
    fn bad_names_and_params() {
        let seq = synthetic_cg86(4).unwrap();
        let c = ctx(&seq);
        assert!(matches!(build("nosuch", &Params::new(), &[], &c), Err(OlpsError::UnknownStrategy(_))));
        let unknown = Params::parse("speed=3").unwrap();
        assert!(matches!(build("pamr", &unknown, &[], &c), Err(OlpsError::Parameter { .. })));
        let bad = Params::parse("eps=abc").unwrap();
        assert!(matches!(build("pamr", &bad, &[], &c), Err(OlpsError::Parameter { .. })));
        let out_of_range = Params::parse("eps=3").unwrap();
        assert!(matches!(build("pamr", &out_of_range, &[], &c), Err(OlpsError::Parameter { .. })));
        let bad_choice = Params::parse("mode=exact").unwrap();
        assert!(matches!(build("up", &bad_choice, &[], &c), Err(OlpsError::Parameter { .. })));
        let experts = ExpertRequest::parse_list("ucrp").unwrap();
        assert!(build("pamr", &Params::new(), &experts, &c).is_err());
    }

    #[test]
    fn crp_weights_param() {
        let seq = synthetic_cg86(2).unwrap();
        let p = Params::parse("b=0:1").unwrap();
        let mut s = build("crp", &p, &[], &ctx(&seq)).unwrap();
        let r = run_backtest(&mut s, &seq, CostSpec::zero()).unwrap();
        assert!((r.final_wealth() - 1.0).abs() < 1e-15);
        assert!(build("crp", &Params::parse("b=0.5:0.2").unwrap(), &[], &ctx(&seq)).is_err());
    }

    #[test]
    fn every_strategy_builds_and_runs() {
        let seq = crate::market::synthetic_iid(3, 15, 6, 0.8, 1.25).unwrap();
        for i in catalog() {
            let mut s = build(i.name, &Params::new(), &[], &ctx(&seq)).unwrap();
            let r = run_backtest(&mut s, &seq, CostSpec::zero()).unwrap();
            assert!(r.final_wealth() > 0.0, "{}", i.name);
            assert_eq!(s.is_hindsight(), i.hindsight, "{}", i.name);
        }
    }
}
