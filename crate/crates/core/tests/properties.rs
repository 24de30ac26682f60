use nalgebra::SymmetricEigen;
use olps::backtest::{
    cost_factor, cost_factor_from_holdings, cost_residual, decision_path, truncation_causality_check,
    CausalityVerdict,
};
use olps::benchmarks::{bcrp, ConstantRebalanced};
use olps::follow_loser::{
    anticor_claims, anticor_update, cwmr_update, l1_median_trace, l1_objective, olmar_predict, pamr_update,
    reversion_pa_step, rmr_predict, GaussianPortfolio, PamrSpec, PamrVariant,
};
use olps::follow_winner::{
    gradient_family_update, simplex_grid, switching_portfolio_update, GradientMode, OnsState,
    UniversalPortfolio,
};
use olps::market::synthetic_cg86;
use olps::meta_learning::{MetaRule, MetaStrategy};
use olps::pattern_matching::selection::{bin_of, quantile_edges};
use olps::pattern_matching::{select_samples, SelectorMethod, SelectorSpec};
use olps::registry::{build, BuildContext, Params};
use olps::simplex::{crp_wealth, log_optimal_default, project_to_simplex, ScenarioSet};
use olps::{run_backtest, CostSpec, MarketWindow, Portfolio, PriceRelatives, Result, Strategy as Olps};
use proptest::prelude::*;

fn rows(m: usize, n: std::ops::Range<usize>) -> impl proptest::strategy::Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(0.5f64..1.5, m), n)
}

fn market(m: std::ops::Range<usize>, n: std::ops::Range<usize>) -> impl proptest::strategy::Strategy<Value = PriceRelatives> {
    m.prop_flat_map(move |m| rows(m, n.clone()))
        .prop_map(|r| PriceRelatives::new(r).unwrap())
}

fn portfolio(m: usize) -> impl proptest::strategy::Strategy<Value = Portfolio> {
    prop::collection::vec(0.0f64..1.0, m).prop_map(|v| {
        let s: f64 = v.iter().sum();
        if s <= 1e-9 {
            Portfolio::uniform(v.len())
        } else {
            Portfolio::new(v.iter().map(|w| w / s).collect()).unwrap()
        }
    })
}

fn portfolio_and_relative() -> impl proptest::strategy::Strategy<Value = (Portfolio, Vec<f64>)> {
    (2usize..7).prop_flat_map(|m| (portfolio(m), prop::collection::vec(0.2f64..3.0, m)))
}

fn feasible(b: &Portfolio, m: usize) -> bool {
    b.check(m).is_ok()
}

fn demeaned(x: &[f64]) -> Vec<f64> {
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    x.iter().map(|v| v - mean).collect()
}

fn step_dot(before: &Portfolio, after: &Portfolio, direction: &[f64]) -> f64 {
    after
        .iter()
        .zip(before.iter())
        .zip(direction)
        .map(|((a, b), d)| (a - b) * d)
        .sum()
}

fn grid_best_m2(scen: &ScenarioSet) -> f64 {
    (0..=1000)
        .map(|i| {
            let w = i as f64 / 1000.0;
            scen.expected_log(&[w, 1.0 - w])
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

fn grid_best_m3(scen: &ScenarioSet) -> f64 {
    let mut best = f64::NEG_INFINITY;
    for i in 0..=1000 {
        for j in 0..=(1000 - i) {
            let (a, b) = (i as f64 / 1000.0, j as f64 / 1000.0);
            best = best.max(scen.expected_log(&[a, b, (1.0 - a - b).max(0.0)]));
        }
    }
    best
}

proptest! {
    #[test]
    fn prices_round_trip(prices in (2usize..4).prop_flat_map(|m| prop::collection::vec(prop::collection::vec(1.0f64..100.0, m), 2..20))) {
        let seq = PriceRelatives::from_prices(&prices).unwrap();
        prop_assert_eq!(seq.n(), prices.len() - 1);
        let mut acc = vec![1.0; seq.m()];
        for (t, x) in seq.rows().enumerate() {
            for i in 0..seq.m() {
                acc[i] *= x[i];
                let ratio = prices[t + 1][i] / prices[0][i];
                prop_assert!((acc[i] / ratio - 1.0).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn cg86_cash_column_is_one(n in 1usize..200) {
        let seq = synthetic_cg86(n).unwrap();
        prop_assert!(seq.rows().all(|x| x[0] == 1.0));
    }

    #[test]
    fn projection_is_feasible_and_idempotent(v in prop::collection::vec(-10.0f64..10.0, 1..12)) {
        let p = project_to_simplex(&v).unwrap();
        prop_assert!(feasible(&p, v.len()));
        let again = project_to_simplex(p.weights()).unwrap();
        prop_assert!(again.distance(&p) <= 1e-12);
    }

    #[test]
    fn log_optimal_matches_grid_m2(r in rows(2, 1..25)) {
        let scen = ScenarioSet::uniform(r).unwrap();
        let solved = scen.expected_log(&log_optimal_default(&scen).unwrap());
        let grid = grid_best_m2(&scen);
        prop_assert!(solved >= grid - 1e-12);
        prop_assert!(solved - grid <= 1e-6);
    }

    #[test]
    fn log_optimal_is_order_independent(r in rows(3, 1..20), seed in any::<u64>()) {
        let scen = ScenarioSet::uniform(r.clone()).unwrap();
        let mut shuffled = r;
        let k = shuffled.len();
        for i in (1..k).rev() {
            shuffled.swap(i, (seed.wrapping_mul(i as u64 + 7) % (i as u64 + 1)) as usize);
        }
        let scen2 = ScenarioSet::uniform(shuffled).unwrap();
        let a = scen.expected_log(&log_optimal_default(&scen).unwrap());
        let b = scen2.expected_log(&log_optimal_default(&scen2).unwrap());
        prop_assert!((a - b).abs() <= 1e-10);
    }

    #[test]
    fn bcrp_dominates_and_ignores_order(seq in market(2..5, 2..30)) {
        let s = crp_wealth(&bcrp(&seq).unwrap(), &seq).unwrap();
        let stocks = seq.column_products();
        let best = stocks.iter().cloned().fold(0.0, f64::max);
        let bah = stocks.iter().sum::<f64>() / seq.m() as f64;
        let ucrp = crp_wealth(&Portfolio::uniform(seq.m()), &seq).unwrap();
        prop_assert!(s >= best.max(bah).max(ucrp) - 1e-6);
        let reversed: Vec<usize> = (0..seq.n()).rev().collect();
        let rev = seq.permuted(&reversed).unwrap();
        prop_assert!((crp_wealth(&bcrp(&rev).unwrap(), &rev).unwrap() - s).abs() <= 1e-6);
    }

    #[test]
    fn crp_wealth_matches_engine(seq in market(2..5, 1..30), seed in 0.0f64..1.0) {
        let m = seq.m();
        let b = Portfolio::mixture(m, [(seed, &Portfolio::vertex(m, 0)), (1.0 - seed, &Portfolio::uniform(m))]);
        let r = run_backtest(&mut ConstantRebalanced::new(b.clone()), &seq, CostSpec::zero()).unwrap();
        prop_assert!((r.final_wealth() / crp_wealth(&b, &seq).unwrap() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn gradient_updates_stay_feasible((b, x) in portfolio_and_relative(), eta in 0.0f64..50.0) {
        for mode in [GradientMode::Eg, GradientMode::Gp, GradientMode::Em] {
            let next = gradient_family_update(&b, &x, eta, mode).unwrap();
            prop_assert!(feasible(&next, b.len()), "{:?} left the simplex", mode);
        }
    }

    #[test]
    fn switching_update_stays_feasible(b in (2usize..8).prop_flat_map(portfolio), gamma in 0.0f64..1.0) {
        let next = switching_portfolio_update(&b, gamma).unwrap();
        prop_assert!(feasible(&next, b.len()));
    }

    #[test]
    fn ons_eigenvalues_stay_above_one(seq in market(2..5, 1..20)) {
        let mut state = OnsState::new(seq.m(), 1.0, 0.125).unwrap();
        for x in seq.rows() {
            let b = state.decide().unwrap();
            prop_assert!(feasible(&b, seq.m()));
            state.accumulate(&b, x).unwrap();
            let eig = SymmetricEigen::new(state.a.clone()).eigenvalues;
            prop_assert!(eig.iter().all(|v| *v >= 1.0 - 1e-9));
        }
    }

    #[test]
    fn pamr_moves_away_from_winners((b, x) in portfolio_and_relative(), eps in 0.0f64..1.0, variant in 0usize..3, c in 0.1f64..1000.0) {
        let variant = match variant {
            0 => PamrVariant::Plain,
            1 => PamrVariant::Capped(c),
            _ => PamrVariant::Smoothed(c),
        };
        let next = pamr_update(&b, &x, PamrSpec { epsilon: eps, variant }).unwrap();
        prop_assert!(feasible(&next, b.len()));
        prop_assert!(step_dot(&b, &next, &demeaned(&x)) <= 1e-12);
    }

    #[test]
    fn cwmr_moves_away_from_winners((b, x) in portfolio_and_relative(), eps in 0.0f64..1.0, phi in 0.0f64..3.0) {
        let m = b.len();
        let g = GaussianPortfolio { mu: b.clone(), sigma: vec![1.0 / (m * m) as f64; m] };
        let next = cwmr_update(&g, &x, eps, phi).unwrap();
        prop_assert!(feasible(&next.mu, m));
        prop_assert!(next.sigma.iter().all(|s| *s > 0.0));
        let s_total: f64 = g.sigma.iter().sum();
        let xbar: f64 = g.sigma.iter().zip(&x).map(|(s, v)| s * v).sum::<f64>() / s_total;
        let driving: Vec<f64> = g.sigma.iter().zip(&x).map(|(s, v)| s * (v - xbar)).collect();
        prop_assert!(step_dot(&b, &next.mu, &driving) <= 1e-12);
    }

    #[test]
    fn reversion_step_moves_toward_prediction((b, xhat) in portfolio_and_relative(), eps in 1.0f64..20.0) {
        let next = reversion_pa_step(&b, &xhat, eps).unwrap();
        prop_assert!(feasible(&next, b.len()));
        prop_assert!(step_dot(&b, &next, &demeaned(&xhat)) >= -1e-12);
    }

    #[test]
    fn olmar_and_rmr_predictions_are_positive(seq in market(2..5, 2..12)) {
        let m = seq.m();
        let recent: Vec<&[f64]> = seq.rows().collect();
        let w = recent.len() + 1;
        let xhat = olmar_predict(&recent, w, m).unwrap();
        prop_assert!(xhat.iter().all(|v| *v > 0.0 && v.is_finite()));
        let mut prices = vec![vec![1.0; m]];
        for x in &recent {
            let last = prices.last().unwrap().clone();
            prices.push(last.iter().zip(x.iter()).map(|(p, r)| p * r).collect());
        }
        let predicted = rmr_predict(&prices).unwrap();
        prop_assert!(predicted.iter().all(|v| *v > 0.0 && v.is_finite()));
        let next = reversion_pa_step(&Portfolio::uniform(m), &predicted, 5.0).unwrap();
        prop_assert!(feasible(&next, m));
    }

    #[test]
    fn anticor_transfers_stay_feasible(
        (b, y1, y2) in (2usize..5, 2usize..7).prop_flat_map(|(m, w)| (portfolio(m), rows(m, w..w + 1), rows(m, w..w + 1)))
    ) {
        let logs = |r: Vec<Vec<f64>>| r.into_iter().map(|x| x.iter().map(|v| v.ln()).collect()).collect::<Vec<Vec<f64>>>();
        let claims = anticor_claims(&logs(y1), &logs(y2)).unwrap();
        let next = anticor_update(&b, &claims);
        prop_assert!(feasible(&next, b.len()));
    }

    #[test]
    fn weiszfeld_objective_is_monotone(points in (2usize..4).prop_flat_map(|d| prop::collection::vec(prop::collection::vec(-5.0f64..5.0, d), 2..12))) {
        let trace = l1_median_trace(&points, 1e-10, 100_000).unwrap();
        prop_assert!(trace.objectives.windows(2).all(|w| w[1] <= w[0]));
        let d = points[0].len();
        let mean: Vec<f64> = (0..d)
            .map(|j| points.iter().map(|p| p[j]).sum::<f64>() / points.len() as f64)
            .collect();
        prop_assert!(l1_objective(&points, &trace.median) <= l1_objective(&points, &mean) + 1e-12);
    }

    #[test]
    fn selections_never_look_ahead(seq in market(2..4, 1..25), w in 1usize..4, method in 0usize..4) {
        let method = match method {
            0 => SelectorMethod::Histogram { bins: 2 },
            1 => SelectorMethod::Kernel { radius: 0.5 },
            2 => SelectorMethod::NearestNeighbor { neighbors: 3 },
            _ => SelectorMethod::Correlation { rho: 0.0 },
        };
        let spec = SelectorSpec::new(method, w).unwrap();
        let t = seq.n();
        let c = select_samples(&seq.full(), &spec).unwrap();
        prop_assert!(c.indices.windows(2).all(|p| p[0] < p[1]));
        prop_assert!(c.indices.iter().all(|&i| w < i && i <= t));
        if !c.is_empty() {
            prop_assert!((c.probabilities.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn kernel_selection_grows_with_radius(seq in market(2..4, 3..25), w in 1usize..3, r1 in 0.01f64..1.0, extra in 0.0f64..1.0) {
        let small = select_samples(&seq.full(), &SelectorSpec::new(SelectorMethod::Kernel { radius: r1 }, w).unwrap()).unwrap();
        let large = select_samples(&seq.full(), &SelectorSpec::new(SelectorMethod::Kernel { radius: r1 + extra }, w).unwrap()).unwrap();
        prop_assert!(small.indices.iter().all(|i| large.indices.contains(i)));
    }

    #[test]
    fn nearest_neighbor_count(seq in market(2..4, 1..25), w in 1usize..4, l in 1usize..10) {
        let c = select_samples(&seq.full(), &SelectorSpec::new(SelectorMethod::NearestNeighbor { neighbors: l }, w).unwrap()).unwrap();
        let t = seq.n();
        let candidates = if t <= w + 1 { 0 } else { t - w };
        prop_assert_eq!(c.len(), l.min(candidates));
    }

    #[test]
    fn histogram_cells_partition_candidates(seq in market(2..4, 3..25), w in 1usize..3, bins in 1usize..4) {
        let t = seq.n();
        prop_assume!(t > w + 1);
        let history = seq.full();
        let edges = quantile_edges(&history, bins);
        let key = |start: usize, end: usize| -> Vec<usize> {
            (start..=end).flat_map(|p| history.period(p).iter().map(|v| bin_of(*v, &edges)).collect::<Vec<_>>()).collect()
        };
        let mut cells: std::collections::BTreeMap<Vec<usize>, Vec<usize>> = Default::default();
        for i in w + 1..=t {
            cells.entry(key(i - w, i - 1)).or_default().push(i);
        }
        let covered: usize = cells.values().map(Vec::len).sum();
        prop_assert_eq!(covered, t - w);
        let c = select_samples(&history, &SelectorSpec::new(SelectorMethod::Histogram { bins }, w).unwrap()).unwrap();
        let expected = cells.get(&key(t + 1 - w, t)).cloned().unwrap_or_default();
        prop_assert_eq!(c.indices, expected);
    }

    #[test]
    fn cost_residual_is_increasing_and_solved(
        (held, target) in (2usize..6).prop_flat_map(|m| (portfolio(m), portfolio(m))),
        buy in 0.0f64..0.2,
        sell in 0.0f64..0.2,
    ) {
        let costs = CostSpec::new(buy, sell).unwrap();
        let c = cost_factor_from_holdings(&held, &target, costs).unwrap();
        prop_assert!(c >= costs.lower_bound() - 1e-12 && c <= 1.0 + 1e-12);
        prop_assert!(cost_residual(&held, &target, costs, c).abs() < 1e-12);
        let mut prev = f64::NEG_INFINITY;
        for k in 0..=20 {
            let z = costs.lower_bound() + (1.0 - costs.lower_bound()) * k as f64 / 20.0;
            let g = cost_residual(&held, &target, costs, z);
            prop_assert!(g > prev);
            prev = g;
        }
    }

    #[test]
    fn zero_cost_wealth_identity(seq in market(2..5, 1..30), name in prop::sample::select(vec!["eg", "ons", "pamr", "olmar", "rmr", "cwmr", "bk", "anticor"])) {
        let ctx = BuildContext { market: &seq, costs: CostSpec::zero(), seed: 0 };
        let mut s = build(name, &Params::new(), &[], &ctx).unwrap();
        let r = run_backtest(&mut s, &seq, CostSpec::zero()).unwrap();
        let product: f64 = r.portfolios.iter().zip(seq.rows()).map(|(b, x)| b.dot(x)).product();
        prop_assert!((r.final_wealth() / product - 1.0).abs() <= 1e-12);
        prop_assert!(r.portfolios.iter().all(|b| feasible(b, seq.m())));
    }

    #[test]
    fn costs_never_help(seq in market(2..4, 2..25), name in prop::sample::select(vec!["ucrp", "bah", "eg", "pamr", "olmar", "corn"]), buy in 0.0f64..0.05, sell in 0.0f64..0.05, more in 0.0f64..0.05) {
        let ctx = BuildContext { market: &seq, costs: CostSpec::zero(), seed: 0 };
        let run = |costs| {
            let mut s = build(name, &Params::new(), &[], &ctx).unwrap();
            run_backtest(&mut s, &seq, costs).unwrap()
        };
        let free = run(CostSpec::zero());
        let low = run(CostSpec::new(buy, sell).unwrap());
        let high_buy = run(CostSpec::new(buy + more, sell).unwrap());
        let high_sell = run(CostSpec::new(buy, sell + more).unwrap());
        prop_assert!(low.final_wealth() <= free.final_wealth() * (1.0 + 1e-12));
        prop_assert!(high_buy.final_wealth() <= low.final_wealth() * (1.0 + 1e-12));
        prop_assert!(high_sell.final_wealth() <= low.final_wealth() * (1.0 + 1e-12));
        for (t, c) in low.cost_factors.iter().enumerate().skip(1) {
            let direct = cost_factor(&low.portfolios[t - 1], seq.row(t - 1), &low.portfolios[t], CostSpec::new(buy, sell).unwrap()).unwrap();
            prop_assert!((c - direct).abs() <= 1e-15);
        }
    }

    #[test]
    fn up_equals_aa_over_crp_grid(seq in market(2..4, 1..15)) {
        let m = seq.m();
        let grid = simplex_grid(m, 4).unwrap();
        let experts: Vec<Box<dyn Olps>> = grid
            .iter()
            .map(|b| Box::new(ConstantRebalanced::new(b.clone())) as Box<dyn Olps>)
            .collect();
        let mut aa = MetaStrategy::new(MetaRule::Aa { eta: 1.0 }, experts).unwrap();
        let mut up = UniversalPortfolio::with_nodes(grid).unwrap();
        let a = decision_path(&mut aa, &seq).unwrap();
        let u = decision_path(&mut up, &seq).unwrap();
        for (pa, pu) in a.iter().zip(&u) {
            prop_assert!(pa.distance(pu) <= 1e-10);
        }
    }

    #[test]
    fn meta_bah_is_mean_of_expert_wealth(seq in market(2..4, 2..25)) {
        let ctx = BuildContext { market: &seq, costs: CostSpec::zero(), seed: 0 };
        let experts = olps::registry::ExpertRequest::parse_list("pamr,olmar,ucrp").unwrap();
        let mut meta = build("meta:bah", &Params::new(), &experts, &ctx).unwrap();
        let r = run_backtest(&mut meta, &seq, CostSpec::zero()).unwrap();
        prop_assert!(r.portfolios.iter().all(|b| feasible(b, seq.m())));
        let summaries = r.expert_summaries.clone().unwrap();
        let mean = summaries.iter().map(|s| s.wealth).sum::<f64>() / summaries.len() as f64;
        prop_assert!((r.final_wealth() - mean).abs() <= 1e-12 * mean.max(1.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn log_optimal_matches_grid_m3(r in rows(3, 1..6)) {
        let scen = ScenarioSet::uniform(r).unwrap();
        let solved = scen.expected_log(&log_optimal_default(&scen).unwrap());
        let grid = grid_best_m3(&scen);
        prop_assert!(solved >= grid - 1e-12);
        prop_assert!(solved - grid <= 1e-6);
    }
}

/// Reads the period after the one it is asked about.
struct Peeking {
    future: PriceRelatives,
}

impl Olps for Peeking {
    fn name(&self) -> String {
        "peeking".into()
    }

    fn reset(&mut self) {}

    fn init(&mut self, m: usize) -> Result<Portfolio> {
        Ok(Portfolio::uniform(m))
    }

    fn decide(&mut self, history: MarketWindow<'_>) -> Result<Portfolio> {
        let t = history.end();
        if t >= self.future.n() {
            return Ok(Portfolio::uniform(history.m()));
        }
        let next = self.future.row(t);
        let best = (0..next.len()).fold(0, |b, i| if next[i] > next[b] { i } else { b });
        Ok(Portfolio::vertex(history.m(), best))
    }
}

#[test]
fn peeking_strategy_fails_causality() {
    let seq = olps::market::synthetic_iid(3, 20, 11, 0.5, 1.5).unwrap();
    let factory = |s: &PriceRelatives| -> Result<Box<dyn Olps>> { Ok(Box::new(Peeking { future: s.clone() })) };
    let verdict = truncation_causality_check(factory, &seq, 10).unwrap();
    assert!(matches!(verdict, CausalityVerdict::Fail { period, .. } if period <= 10), "{verdict:?}");
    let honest = |s: &PriceRelatives| {
        build("olmar", &Params::new(), &[], &BuildContext { market: s, costs: CostSpec::zero(), seed: 0 })
    };
    assert_eq!(truncation_causality_check(honest, &seq, 10).unwrap(), CausalityVerdict::Pass);
}
