//! Reference online algorithms and their exact or sampled evaluation.

use itertools::Itertools;
use num::{ToPrimitive, Zero};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::{self, Action, InformationState, Observation, Policy, MAX_ENUMERATION_N};
use crate::error::{Error, Result};
use crate::exact::{self, ExactNumber, Precision};
use crate::instance::{scenario_max, validate_family, PriorFamily, Scenario};

/// A deterministic online decision rule.
///
/// `decide` sees only the arrivals so far, so every implementation respects
/// the online contract by construction.
pub trait OnlineAlgorithm: Sync {
    fn name(&self) -> String;

    fn decide(&self, history: &[Observation], current: &Observation, n: usize) -> Action;

    /// Per-run streaming form of [`OnlineAlgorithm::decide`]. The default
    /// keeps the history and defers to `decide`.
    fn stream<'a>(&'a self, n: usize) -> Box<dyn DecisionStream + 'a> {
        Box::new(HistoryStream {
            alg: self,
            n,
            history: Vec::with_capacity(n),
        })
    }
}

/// Fresh state for one run of an online algorithm.
pub trait DecisionStream {
    fn decide(&mut self, current: &Observation) -> Action;
}

struct HistoryStream<'a, A: OnlineAlgorithm + ?Sized> {
    alg: &'a A,
    n: usize,
    history: Vec<Observation>,
}

impl<A: OnlineAlgorithm + ?Sized> DecisionStream for HistoryStream<'_, A> {
    fn decide(&mut self, current: &Observation) -> Action {
        let a = self.alg.decide(&self.history, current, self.n);
        if a == Action::Reject {
            self.history.push(current.clone());
        }
        a
    }
}

/// `floor(n/e)`, certified against the `e` enclosure.
pub fn dynkin_cutoff(n: usize, precision: &Precision) -> Result<usize> {
    if n == 0 {
        return Ok(0);
    }
    let n_rat = exact::int(n as i64);
    let mut digits = precision.start_digits.max(1);
    loop {
        let enc = exact::inv_e_enclosure(digits);
        let lo = (&n_rat * &enc.lower).floor();
        let hi = (&n_rat * &enc.upper).floor();
        if lo == hi {
            return Ok(lo.to_integer().to_usize().expect("cutoff fits usize"));
        }
        if digits >= precision.max_digits {
            return Err(Error::PrecisionExhausted { digits });
        }
        digits = (digits * 2).min(precision.max_digits);
    }
}

/// Classic rule: skip the first `cutoff` arrivals, then take the first
/// value at least the maximum of that prefix. The last arrival is taken if
/// nothing qualified.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DynkinRule {
    cutoff: usize,
}

impl DynkinRule {
    pub fn with_cutoff(cutoff: usize) -> Self {
        Self { cutoff }
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }
}

pub fn dynkin_policy(n: usize) -> DynkinRule {
    DynkinRule::with_cutoff(dynkin_cutoff(n, &Precision::default()).expect("n/e is never an integer"))
}

impl OnlineAlgorithm for DynkinRule {
    /// Records the no-qualifier fallback: the last arrival is accepted.
    fn name(&self) -> String {
        format!("dynkin(cutoff={}, fallback=accept-last)", self.cutoff)
    }

    fn decide(&self, history: &[Observation], current: &Observation, n: usize) -> Action {
        let pos = history.len();
        if pos < self.cutoff {
            return Action::Reject;
        }
        let qualifies = history[..self.cutoff]
            .iter()
            .map(|o| &o.value)
            .max()
            .is_none_or(|m| &current.value >= m);
        if qualifies || pos + 1 >= n {
            Action::Accept
        } else {
            Action::Reject
        }
    }

    fn stream<'a>(&'a self, n: usize) -> Box<dyn DecisionStream + 'a> {
        Box::new(DynkinStream {
            cutoff: self.cutoff,
            n,
            seen: 0,
            prefix_max: None,
        })
    }
}

struct DynkinStream {
    cutoff: usize,
    n: usize,
    seen: usize,
    prefix_max: Option<ExactNumber>,
}

impl DecisionStream for DynkinStream {
    fn decide(&mut self, current: &Observation) -> Action {
        let pos = self.seen;
        self.seen += 1;
        if pos < self.cutoff {
            if self.prefix_max.as_ref().is_none_or(|m| &current.value > m) {
                self.prefix_max = Some(current.value.clone());
            }
            return Action::Reject;
        }
        let qualifies = self.prefix_max.as_ref().is_none_or(|m| &current.value >= m);
        if qualifies || pos + 1 >= self.n {
            Action::Accept
        } else {
            Action::Reject
        }
    }
}

/// Accepts the first arrival whose index attains the largest prediction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PredictionArgmax {
    predictions: Vec<ExactNumber>,
    is_max: Vec<bool>,
}

pub fn prediction_argmax_policy(predictions: &[ExactNumber]) -> PredictionArgmax {
    let max = predictions.iter().max().expect("predictions are non-empty");
    PredictionArgmax {
        predictions: predictions.to_vec(),
        is_max: predictions.iter().map(|p| p == max).collect(),
    }
}

impl PredictionArgmax {
    pub fn predictions(&self) -> &[ExactNumber] {
        &self.predictions
    }
}

impl OnlineAlgorithm for PredictionArgmax {
    fn name(&self) -> String {
        "pred-argmax".to_string()
    }

    fn decide(&self, _history: &[Observation], current: &Observation, _n: usize) -> Action {
        if self.is_max.get(current.index).copied().unwrap_or(false) {
            Action::Accept
        } else {
            Action::Reject
        }
    }
}

/// Online algorithm backed by an explicit state policy.
#[derive(Debug, Clone)]
pub struct PolicyAlgorithm {
    name: String,
    policy: Policy,
}

impl PolicyAlgorithm {
    /// Wraps `policy` after checking it is total on the family's reachable states.
    pub fn new(name: impl Into<String>, policy: Policy, family: &PriorFamily) -> Result<Self> {
        let codec = family.codec();
        for state in engine::reachable_states(family)? {
            if policy.get(&state).is_none() {
                return Err(Error::MissingState(state.render(&codec)));
            }
        }
        Ok(Self {
            name: name.into(),
            policy,
        })
    }

    pub fn policy(&self) -> &Policy {
        &self.policy
    }
}

impl OnlineAlgorithm for PolicyAlgorithm {
    fn name(&self) -> String {
        self.name.clone()
    }

    fn decide(&self, history: &[Observation], current: &Observation, _n: usize) -> Action {
        let state = InformationState::new(history.to_vec(), current.clone());
        self.policy
            .get(&state)
            .expect("policy checked total on reachable states")
    }
}

/// Candidate index chosen by `alg` on `scenario` under arrival `order`.
pub fn run_once<A: OnlineAlgorithm + ?Sized>(alg: &A, scenario: &Scenario, order: &[usize]) -> Option<usize> {
    let mut stream = alg.stream(order.len());
    order.iter().copied().find(|&j| {
        let obs = Observation::new(j, scenario.values()[j].clone());
        stream.decide(&obs) == Action::Accept
    })
}

fn checked_enumerable(family: &PriorFamily) -> Result<()> {
    let report = validate_family(family);
    if !report.is_valid() {
        return Err(Error::InvalidFamily(report.violations));
    }
    if family.n > MAX_ENUMERATION_N {
        return Err(Error::EnumerationTooLarge {
            n: family.n,
            max: MAX_ENUMERATION_N,
        });
    }
    Ok(())
}

/// Exact expected ratio over every (scenario, arrival order) pair.
pub fn exact_expected_ratio<A: OnlineAlgorithm + ?Sized>(alg: &A, family: &PriorFamily) -> Result<ExactNumber> {
    checked_enumerable(family)?;
    let n = family.n;
    let orders: Vec<Vec<usize>> = (0..n).permutations(n).collect();
    let mut total = ExactNumber::zero();
    for (sc, p) in family.scenarios.iter().zip(&family.probabilities) {
        if p.is_zero() {
            continue;
        }
        let max = scenario_max(sc);
        let mut sum = ExactNumber::zero();
        for order in &orders {
            let mut history: Vec<Observation> = Vec::with_capacity(n);
            for &j in order {
                let cur = Observation::new(j, sc.values()[j].clone());
                if alg.decide(&history, &cur, n) == Action::Accept {
                    sum += &cur.value / &max;
                    break;
                }
                history.push(cur);
            }
        }
        total += p * sum;
    }
    Ok(total / exact::int(orders.len() as i64))
}

/// Tabulates `alg` on every reachable state of `family`.
pub fn induced_policy<A: OnlineAlgorithm + ?Sized>(alg: &A, family: &PriorFamily) -> Result<Policy> {
    let states = engine::reachable_states(family)?;
    Ok(states
        .into_iter()
        .map(|st| {
            let a = alg.decide(&st.observed, &st.current, family.n);
            (st, a)
        })
        .collect())
}

/// Statistic averaged by [`monte_carlo_estimate`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    /// Accepted value over the scenario maximum.
    Ratio,
    /// 1 when a maximum was accepted, else 0.
    Success,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub trials: u64,
    pub seed: u64,
}

/// Seeded estimate of `metric` with one ChaCha stream per trial.
///
/// Each trial draws a scenario from the prior and a uniform order. Trials
/// run in parallel; sums are folded in trial order so the mean is
/// bit-identical for a given seed.
pub fn monte_carlo_estimate<A: OnlineAlgorithm + ?Sized>(
    alg: &A,
    family: &PriorFamily,
    trials: u64,
    seed: u64,
    metric: Metric,
) -> Result<MonteCarloEstimate> {
    if trials == 0 {
        return Err(Error::InvalidParams("trials must be at least 1".to_string()));
    }
    let report = validate_family(family);
    if !report.is_valid() {
        return Err(Error::InvalidFamily(report.violations));
    }
    let n = family.n;
    let mut cumulative = Vec::with_capacity(family.scenarios.len());
    let mut acc = ExactNumber::zero();
    for p in &family.probabilities {
        acc += p;
        cumulative.push(acc.to_f64().unwrap_or(0.0));
    }
    // Payoff tables in f64; ratios are at most 1 so they never overflow.
    let payoff: Vec<Vec<f64>> = family
        .scenarios
        .iter()
        .map(|sc| {
            let max = scenario_max(sc);
            sc.values()
                .iter()
                .map(|v| match metric {
                    Metric::Ratio => (v / &max).to_f64().unwrap_or(0.0),
                    Metric::Success => f64::from(u8::from(v == &max)),
                })
                .collect()
        })
        .collect();

    let samples: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(t);
            let u: f64 = rng.gen();
            let row = cumulative
                .iter()
                .position(|c| u < *c)
                .unwrap_or(cumulative.len() - 1);
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut rng);
            run_once(alg, &family.scenarios[row], &order).map_or(0.0, |j| payoff[row][j])
        })
        .collect();

    let count = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / count;
    let var = if samples.len() > 1 {
        samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (count - 1.0)
    } else {
        0.0
    };
    Ok(MonteCarloEstimate {
        mean,
        std_error: (var / count).sqrt(),
        trials,
        seed,
    })
}

/// Single scenario with values `1..=n`, all distinct.
pub fn classic_family(n: usize) -> PriorFamily {
    let values = (1..=n as i64).map(exact::int).collect();
    PriorFamily {
        n,
        base_s: None,
        scenarios: vec![Scenario::new(1, values).expect("n >= 1")],
        probabilities: vec![exact::int(1)],
        prediction_id: 1,
    }
}

/// Registry lookup by CLI name.
pub fn algorithm_by_name(name: &str, family: &PriorFamily) -> Result<Box<dyn OnlineAlgorithm>> {
    match name {
        "dynkin" => Ok(Box::new(DynkinRule::with_cutoff(dynkin_cutoff(
            family.n,
            &Precision::from_env(),
        )?))),
        "pred-argmax" => {
            let pred = family
                .prediction()
                .ok_or_else(|| Error::InvalidParams("family has no prediction scenario".into()))?;
            Ok(Box::new(prediction_argmax_policy(pred.values())))
        }
        other => Err(Error::InvalidParams(format!(
            "unknown algorithm {other:?} (expected dynkin, pred-argmax or policy:<file>)"
        ))),
    }
}
