//! Follow the leading history: a working set of base strategies started at
//! different times, mixed by their recent performance.

use crate::backtest::{Cursor, ExpertSummary, Strategy};
use crate::error::{argument, Result};
use crate::market::{MarketWindow, PriceRelatives};
use crate::simplex::Portfolio;

pub type BaseFactory = Box<dyn Fn() -> Result<Box<dyn Strategy>> + Send>;

struct Member {
    start: usize,
    strategy: Box<dyn Strategy>,
    /// Periods since `start`, owned so the member sees only its own history.
    seen: Option<PriceRelatives>,
    current: Portfolio,
    weight: f64,
    wealth: f64,
}

/// Age bucket: `0`, then `[1, 2)`, `[2, 4)`, `[4, 8)`, ...
fn bucket(age: usize) -> u32 {
    if age == 0 {
        0
    } else {
        usize::BITS - age.leading_zeros()
    }
}

pub struct FollowLeadingHistory {
    factory: BaseFactory,
    base_name: String,
    members: Vec<Member>,
    m: usize,
    cursor: Cursor,
}

impl FollowLeadingHistory {
    pub fn new(factory: BaseFactory) -> Result<Self> {
        let base_name = factory()?.name();
        Ok(Self {
            factory,
            base_name,
            members: Vec::new(),
            m: 0,
            cursor: Cursor::default(),
        })
    }

    pub fn working_set_size(&self) -> usize {
        self.members.len()
    }

    pub fn start_times(&self) -> Vec<usize> {
        self.members.iter().map(|e| e.start).collect()
    }

    fn spawn(&self, start: usize, weight: f64) -> Result<Member> {
        let mut strategy = (self.factory)()?;
        strategy.reset();
        let current = strategy.init(self.m)?;
        Ok(Member {
            start,
            strategy,
            seen: None,
            current,
            weight,
            wealth: 1.0,
        })
    }

    fn combine(&self) -> Portfolio {
        Portfolio::mixture(self.m, self.members.iter().map(|e| (e.weight, &e.current)))
    }

    /// Keeps the oldest member of every age bucket, then renormalizes.
    fn prune(&mut self, period: usize) {
        let mut kept_buckets = Vec::new();
        self.members.sort_by_key(|e| e.start);
        self.members.retain(|e| {
            let b = bucket(period - e.start);
            if kept_buckets.contains(&b) {
                false
            } else {
                kept_buckets.push(b);
                true
            }
        });
        let total: f64 = self.members.iter().map(|e| e.weight).sum();
        self.members.iter_mut().for_each(|e| e.weight /= total);
    }
}

impl Strategy for FollowLeadingHistory {
    fn name(&self) -> String {
        format!("meta:flh({})", self.base_name)
    }

    fn reset(&mut self) {
        self.members.clear();
        self.cursor.reset();
    }

    fn init(&mut self, m: usize) -> Result<Portfolio> {
        self.reset();
        self.m = m;
        self.members.push(self.spawn(1, 1.0)?);
        Ok(self.combine())
    }

    fn decide(&mut self, history: MarketWindow<'_>) -> Result<Portfolio> {
        if self.members.is_empty() {
            self.init(history.m())?;
        }
        for t in self.cursor.advance(&history)? {
            let x = history.period(t);
            let mut total = 0.0;
            for e in self.members.iter_mut() {
                let r = e.current.dot(x);
                if !(r > 0.0) {
                    return Err(argument(format!("member started at {} has return {r}", e.start)));
                }
                e.wealth *= r;
                e.weight *= r;
                total += e.weight;
            }
            let alpha = 1.0 / (t + 1) as f64;
            for e in self.members.iter_mut() {
                e.weight *= (1.0 - alpha) / total;
                match e.seen.as_mut() {
                    Some(seq) => seq.push_row(x)?,
                    None => e.seen = Some(PriceRelatives::new(vec![x.to_vec()])?),
                }
                e.current = e.strategy.decide(e.seen.as_ref().unwrap().full())?;
                e.current
                    .check(self.m)
                    .map_err(|reason| argument(format!("member at period {}: {reason}", t + 1)))?;
            }
            let newcomer = self.spawn(t + 1, alpha)?;
            self.members.push(newcomer);
            self.prune(t + 1);
        }
        Ok(self.combine())
    }

    fn expert_summaries(&self) -> Option<Vec<ExpertSummary>> {
        Some(
            self.members
                .iter()
                .map(|e| ExpertSummary {
                    name: format!("{}@{}", e.strategy.name(), e.start),
                    wealth: e.wealth,
                    weight: e.weight,
                })
                .collect(),
        )
    }
}
