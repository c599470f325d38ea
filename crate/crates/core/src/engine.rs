//! Information states, Bayesian posteriors, and exact optimal stopping.
//!
//! Candidates arrive in a uniformly random order that is independent of the
//! realized scenario. The algorithm sees the index and value of each arrival,
//! so the likelihood of an observation history is the same for every
//! scenario that agrees with it and zero otherwise. Posteriors are therefore
//! the prior restricted to the consistent scenarios.
//!
//! [`solve_optimal`] runs backward induction over every reachable state.
//! Internally values are interned to small ids and state values are kept
//! unnormalized (prior mass times conditional expectation), which avoids a
//! division per state and leaves the argmax unchanged.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use itertools::Itertools;
use num::{Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::{self, ExactNumber, ValueCodec};
use crate::instance::{scenario_max, validate_family, PriorFamily, Scenario};

/// Largest candidate count for which arrival orders are enumerated.
pub const MAX_ENUMERATION_N: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Action {
    Accept,
    Reject,
}

/// One arrival: zero-based candidate index and its revealed value.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Observation {
    pub index: usize,
    pub value: ExactNumber,
}

impl Observation {
    pub fn new(index: usize, value: ExactNumber) -> Self {
        Self { index, value }
    }
}

/// Rejected arrivals so far, in order, plus the arrival awaiting a decision.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct InformationState {
    pub observed: Vec<Observation>,
    pub current: Observation,
}

impl InformationState {
    pub fn new(observed: Vec<Observation>, current: Observation) -> Self {
        Self { observed, current }
    }

    fn all(&self) -> impl Iterator<Item = &Observation> {
        self.observed.iter().chain(std::iter::once(&self.current))
    }

    fn has_arrived(&self, index: usize) -> bool {
        self.all().any(|o| o.index == index)
    }

    /// `(idx:value),(idx:value)|current=(idx:value)` with one-based indices.
    pub fn render(&self, codec: &ValueCodec) -> String {
        let obs = |o: &Observation| format!("({}:{})", o.index + 1, codec.render(&o.value));
        format!(
            "{}|current={}",
            self.observed.iter().map(obs).join(","),
            obs(&self.current)
        )
    }

    pub fn parse(text: &str, codec: &ValueCodec) -> Result<Self> {
        let bad = |reason: &str| Error::Parse {
            text: text.to_string(),
            reason: reason.to_string(),
        };
        let (hist, cur) = text
            .split_once("|current=")
            .ok_or_else(|| bad("missing `|current=`"))?;
        let parse_obs = |chunk: &str| -> Result<Observation> {
            let inner = chunk
                .trim()
                .strip_prefix('(')
                .and_then(|c| c.strip_suffix(')'))
                .ok_or_else(|| bad("observation must be `(idx:value)`"))?;
            let (idx, val) = inner.split_once(':').ok_or_else(|| bad("missing `:`"))?;
            let idx: usize = idx.trim().parse().map_err(|_| bad("bad index"))?;
            if idx == 0 {
                return Err(bad("indices are one-based"));
            }
            Ok(Observation::new(idx - 1, codec.parse(val)?))
        };
        let observed = if hist.trim().is_empty() {
            Vec::new()
        } else {
            hist.split("),")
                .map(|c| {
                    if c.ends_with(')') {
                        parse_obs(c)
                    } else {
                        parse_obs(&format!("{c})"))
                    }
                })
                .collect::<Result<Vec<_>>>()?
        };
        Ok(Self::new(observed, parse_obs(cur)?))
    }
}

impl fmt::Display for InformationState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render(&ValueCodec::plain()))
    }
}

/// Deterministic action map over information states.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Policy {
    actions: BTreeMap<InformationState, Action>,
}

impl Policy {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, state: InformationState, action: Action) {
        self.actions.insert(state, action);
    }

    pub fn get(&self, state: &InformationState) -> Option<Action> {
        self.actions.get(state).copied()
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&InformationState, &Action)> {
        self.actions.iter()
    }

    /// JSON object from rendered state to action, keys sorted.
    pub fn to_json(&self, codec: &ValueCodec) -> String {
        let dump: BTreeMap<String, Action> = self
            .actions
            .iter()
            .map(|(s, a)| (s.render(codec), *a))
            .collect();
        let mut out = serde_json::to_string_pretty(&dump).expect("policy serializes");
        out.push('\n');
        out
    }

    pub fn from_json(text: &str, codec: &ValueCodec) -> Result<Self> {
        let dump: BTreeMap<String, Action> = serde_json::from_str(text)?;
        let mut policy = Policy::new();
        for (key, action) in dump {
            policy.insert(InformationState::parse(&key, codec)?, action);
        }
        Ok(policy)
    }
}

impl FromIterator<(InformationState, Action)> for Policy {
    fn from_iter<T: IntoIterator<Item = (InformationState, Action)>>(iter: T) -> Self {
        Self {
            actions: iter.into_iter().collect(),
        }
    }
}

/// Nonempty subset of {Accept, Reject}.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AllowedActions {
    pub accept: bool,
    pub reject: bool,
}

impl AllowedActions {
    pub const BOTH: AllowedActions = AllowedActions {
        accept: true,
        reject: true,
    };

    pub fn contains(&self, action: Action) -> bool {
        match action {
            Action::Accept => self.accept,
            Action::Reject => self.reject,
        }
    }

    pub fn to_vec(&self) -> Vec<Action> {
        let mut v = Vec::with_capacity(2);
        if self.accept {
            v.push(Action::Accept);
        }
        if self.reject {
            v.push(Action::Reject);
        }
        v
    }
}

fn consistency_rule(on_prediction_path: bool, current_is_max: bool, future_has_max: bool) -> AllowedActions {
    if !on_prediction_path {
        return AllowedActions::BOTH;
    }
    AllowedActions {
        accept: current_is_max,
        reject: future_has_max,
    }
}

/// Actions a 1-consistent algorithm may take at `state`.
///
/// Off the prediction path anything goes. On it, accepting is allowed only
/// when the current candidate attains the predicted maximum and rejecting
/// only when a candidate that has not arrived yet attains it.
pub fn consistent_actions(prediction: &Scenario, state: &InformationState) -> AllowedActions {
    let pred = prediction.values();
    let on_path = state
        .all()
        .all(|o| pred.get(o.index).is_some_and(|v| v == &o.value));
    if !on_path {
        return AllowedActions::BOTH;
    }
    let max = scenario_max(prediction);
    let current_is_max = pred[state.current.index] == max;
    let future_has_max = (0..pred.len()).any(|j| !state.has_arrived(j) && pred[j] == max);
    consistency_rule(true, current_is_max, future_has_max)
}

fn state_consistent_with(state: &InformationState, scenario: &Scenario) -> bool {
    state
        .all()
        .all(|o| scenario.values().get(o.index).is_some_and(|v| v == &o.value))
}

fn check_state_shape(state: &InformationState, n: usize) -> Result<()> {
    let mut seen = BTreeSet::new();
    for o in state.all() {
        if o.index >= n || !seen.insert(o.index) {
            return Err(Error::UnreachableState(state.to_string()));
        }
    }
    Ok(())
}

/// Exact posterior over scenario ids given the observations in `state`.
pub fn posterior(family: &PriorFamily, state: &InformationState) -> Result<BTreeMap<u32, ExactNumber>> {
    check_state_shape(state, family.n)?;
    let weights: Vec<(u32, &ExactNumber)> = family
        .scenarios
        .iter()
        .zip(&family.probabilities)
        .filter(|(sc, p)| p.is_positive() && state_consistent_with(state, sc))
        .map(|(sc, p)| (sc.id(), p))
        .collect();
    let mass: ExactNumber = weights.iter().map(|(_, p)| *p).sum();
    if !mass.is_positive() {
        return Err(Error::UnreachableState(state.to_string()));
    }
    Ok(family
        .scenarios
        .iter()
        .map(|sc| {
            let p = weights
                .iter()
                .find(|(id, _)| *id == sc.id())
                .map(|(_, p)| *p / &mass)
                .unwrap_or_else(ExactNumber::zero);
            (sc.id(), p)
        })
        .collect())
}

/// Optimal policy and its exact performance.
#[derive(Debug, Clone)]
pub struct SolveReport {
    /// Expected competitive ratio over the prior and uniform arrival orders.
    pub optimum: ExactNumber,
    pub policy: Policy,
    /// Conditional expected ratio for each positive-probability scenario.
    pub per_row: BTreeMap<u32, ExactNumber>,
    pub worst_row: (u32, ExactNumber),
    pub constrained: bool,
}

/// Exact performance of a fixed policy.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PolicyEvaluation {
    pub expected: ExactNumber,
    pub per_row: BTreeMap<u32, ExactNumber>,
    pub worst_row: (u32, ExactNumber),
}

fn worst_of(per_row: &BTreeMap<u32, ExactNumber>) -> (u32, ExactNumber) {
    per_row
        .iter()
        .min_by(|a, b| a.1.cmp(b.1).then(a.0.cmp(b.0)))
        .map(|(id, v)| (*id, v.clone()))
        .expect("at least one positive-probability scenario")
}

fn enumeration_guard(n: usize) -> Result<()> {
    if n > MAX_ENUMERATION_N {
        return Err(Error::EnumerationTooLarge {
            n,
            max: MAX_ENUMERATION_N,
        });
    }
    Ok(())
}

fn factorial(n: usize) -> i64 {
    (1..=n as i64).product()
}

/// Family with values interned to ids and zero-probability rows dropped.
struct Compiled {
    n: usize,
    values: Vec<ExactNumber>,
    ids: Vec<u32>,
    rows: Vec<Vec<u32>>,
    probs: Vec<ExactNumber>,
    ratios: Vec<Vec<ExactNumber>>,
    prediction: Vec<u32>,
    prediction_is_max: Vec<bool>,
}

impl Compiled {
    fn new(family: &PriorFamily) -> Result<Self> {
        let report = validate_family(family);
        if !report.is_valid() {
            return Err(Error::InvalidFamily(report.violations));
        }
        enumeration_guard(family.n)?;
        let mut table: HashMap<ExactNumber, u32> = HashMap::new();
        let mut values = Vec::new();
        let mut intern = |v: &ExactNumber| -> u32 {
            *table.entry(v.clone()).or_insert_with(|| {
                values.push(v.clone());
                (values.len() - 1) as u32
            })
        };
        let pred_sc = family.prediction().expect("validated");
        let prediction: Vec<u32> = pred_sc.values().iter().map(&mut intern).collect();
        let pred_max = scenario_max(pred_sc);
        let prediction_is_max = pred_sc.values().iter().map(|v| v == &pred_max).collect();

        let mut ids = Vec::new();
        let mut rows = Vec::new();
        let mut probs = Vec::new();
        let mut ratios = Vec::new();
        for (sc, p) in family.scenarios.iter().zip(&family.probabilities) {
            if !p.is_positive() {
                continue;
            }
            let max = scenario_max(sc);
            ids.push(sc.id());
            rows.push(sc.values().iter().map(&mut intern).collect());
            probs.push(p.clone());
            ratios.push(sc.values().iter().map(|v| v / &max).collect());
        }
        Ok(Self {
            n: family.n,
            values,
            ids,
            rows,
            probs,
            ratios,
            prediction,
            prediction_is_max,
        })
    }

    fn allowed(&self, seq: &[(usize, u32)]) -> AllowedActions {
        let on_path = seq.iter().all(|&(j, v)| self.prediction[j] == v);
        let cur = seq.last().expect("nonempty state").0;
        let future_has_max =
            (0..self.n).any(|j| self.prediction_is_max[j] && !seq.iter().any(|&(i, _)| i == j));
        consistency_rule(on_path, self.prediction_is_max[cur], future_has_max)
    }

    fn to_state(&self, seq: &[(usize, u32)]) -> InformationState {
        let obs = |&(j, v): &(usize, u32)| Observation::new(j, self.values[v as usize].clone());
        let (last, head) = seq.split_last().expect("nonempty state");
        InformationState::new(head.iter().map(obs).collect(), obs(last))
    }

    /// Splits `support` by the value of column `j`, in first-seen order.
    fn split(&self, support: &[usize], j: usize) -> Vec<(u32, Vec<usize>)> {
        let mut groups: Vec<(u32, Vec<usize>)> = Vec::new();
        for &r in support {
            let v = self.rows[r][j];
            match groups.iter_mut().find(|(gv, _)| *gv == v) {
                Some((_, g)) => g.push(r),
                None => groups.push((v, vec![r])),
            }
        }
        groups
    }
}

struct Induction<'a> {
    compiled: &'a Compiled,
    constrained: bool,
    actions: HashMap<Vec<(usize, u32)>, Action>,
}

impl Induction<'_> {
    /// Prior mass of `support` times the optimal conditional expected ratio.
    fn value(&mut self, seq: &mut Vec<(usize, u32)>, support: &[usize]) -> ExactNumber {
        let c = self.compiled;
        let cur = seq.last().expect("nonempty state").0;
        let accept: ExactNumber = support.iter().map(|&r| &c.probs[r] * &c.ratios[r][cur]).sum();

        let remaining: Vec<usize> = (0..c.n).filter(|j| !seq.iter().any(|&(i, _)| i == *j)).collect();
        let reject = if remaining.is_empty() {
            ExactNumber::zero()
        } else {
            let mut total = ExactNumber::zero();
            for &j in &remaining {
                for (v, group) in c.split(support, j) {
                    seq.push((j, v));
                    total += self.value(seq, &group);
                    seq.pop();
                }
            }
            total / exact::int(remaining.len() as i64)
        };

        let allowed = if self.constrained {
            c.allowed(seq)
        } else {
            AllowedActions::BOTH
        };
        let (action, best) = if allowed.accept && (!allowed.reject || accept >= reject) {
            (Action::Accept, accept)
        } else {
            (Action::Reject, reject)
        };
        self.actions.insert(seq.clone(), action);
        best
    }
}

/// Ratio obtained on `row` under arrival `order` when following `decide`.
fn run_order<F>(c: &Compiled, row: usize, order: &[usize], mut decide: F) -> Result<ExactNumber>
where
    F: FnMut(&[(usize, u32)]) -> Result<Action>,
{
    let mut seq = Vec::with_capacity(order.len());
    for &j in order {
        seq.push((j, c.rows[row][j]));
        if decide(&seq)? == Action::Accept {
            return Ok(c.ratios[row][j].clone());
        }
    }
    Ok(ExactNumber::zero())
}

/// Average over all `n!` orders of the ratio on each compiled row.
fn per_row_ratios<F>(c: &Compiled, mut decide: F) -> Result<Vec<ExactNumber>>
where
    F: FnMut(&[(usize, u32)]) -> Result<Action>,
{
    let orders: Vec<Vec<usize>> = (0..c.n).permutations(c.n).collect();
    let norm = exact::int(factorial(c.n));
    (0..c.rows.len())
        .map(|r| {
            let mut sum = ExactNumber::zero();
            for order in &orders {
                sum += run_order(c, r, order, &mut decide)?;
            }
            Ok(sum / &norm)
        })
        .collect()
}

/// Exact Bayes-optimal stopping policy by backward induction.
///
/// With `constrained`, every state is restricted to [`consistent_actions`].
/// Ties go to Accept.
pub fn solve_optimal(family: &PriorFamily, constrained: bool) -> Result<SolveReport> {
    let c = Compiled::new(family)?;
    let mut ind = Induction {
        compiled: &c,
        constrained,
        actions: HashMap::new(),
    };
    let all: Vec<usize> = (0..c.rows.len()).collect();
    let mut total = ExactNumber::zero();
    let mut seq = Vec::with_capacity(c.n);
    for j in 0..c.n {
        for (v, group) in c.split(&all, j) {
            seq.push((j, v));
            total += ind.value(&mut seq, &group);
            seq.pop();
        }
    }
    let optimum = total / exact::int(c.n as i64);
    let actions = ind.actions;

    let per_row_vals = per_row_ratios(&c, |seq| {
        Ok(*actions.get(seq).expect("induction visits every reachable state"))
    })?;
    let per_row: BTreeMap<u32, ExactNumber> = c.ids.iter().copied().zip(per_row_vals).collect();
    debug_assert_eq!(
        c.probs.iter().zip(per_row.values()).map(|(p, v)| p * v).sum::<ExactNumber>(),
        optimum
    );
    let worst_row = worst_of(&per_row);
    let policy = actions
        .iter()
        .map(|(seq, a)| (c.to_state(seq), *a))
        .collect();
    Ok(SolveReport {
        optimum,
        policy,
        per_row,
        worst_row,
        constrained,
    })
}

/// Exact expected ratio of `policy` by enumerating every (scenario, order).
pub fn evaluate_policy(policy: &Policy, family: &PriorFamily) -> Result<PolicyEvaluation> {
    let c = Compiled::new(family)?;
    let per_row_vals = per_row_ratios(&c, |seq| {
        let state = c.to_state(seq);
        policy
            .get(&state)
            .ok_or_else(|| Error::MissingState(state.render(&family.codec())))
    })?;
    let expected = c.probs.iter().zip(&per_row_vals).map(|(p, v)| p * v).sum();
    let per_row: BTreeMap<u32, ExactNumber> = c.ids.iter().copied().zip(per_row_vals).collect();
    let worst_row = worst_of(&per_row);
    Ok(PolicyEvaluation {
        expected,
        per_row,
        worst_row,
    })
}

/// True iff `policy` accepts a maximum of `prediction` under every arrival
/// order of the predicted values.
pub fn is_consistent(policy: &Policy, prediction: &Scenario) -> Result<bool> {
    let n = prediction.len();
    enumeration_guard(n)?;
    let max = scenario_max(prediction);
    let vals = prediction.values();
    for order in (0..n).permutations(n) {
        let mut observed = Vec::with_capacity(n);
        let mut accepted = None;
        for &j in &order {
            let state = InformationState::new(observed.clone(), Observation::new(j, vals[j].clone()));
            match policy.get(&state) {
                None => return Err(Error::MissingState(state.to_string())),
                Some(Action::Accept) => {
                    accepted = Some(j);
                    break;
                }
                Some(Action::Reject) => observed.push(state.current),
            }
        }
        if accepted.map(|j| &vals[j]) != Some(&max) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Every information state with positive probability under `family`.
pub fn reachable_states(family: &PriorFamily) -> Result<Vec<InformationState>> {
    let c = Compiled::new(family)?;
    let mut seen: BTreeSet<Vec<(usize, u32)>> = BTreeSet::new();
    for row in &c.rows {
        for order in (0..c.n).permutations(c.n) {
            let mut seq = Vec::with_capacity(c.n);
            for &j in &order {
                seq.push((j, row[j]));
                seen.insert(seq.clone());
            }
        }
    }
    Ok(seen.into_iter().map(|seq| c.to_state(&seq)).collect())
}

/// JSON summary of a [`SolveReport`]; the policy itself is dumped separately.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolveSummary {
    pub constrained: bool,
    #[serde(with = "exact::serde_rich")]
    pub optimum: ExactNumber,
    pub per_row: Vec<RowRatio>,
    pub worst_row: RowRatio,
    pub policy_states: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowRatio {
    pub id: u32,
    #[serde(with = "exact::serde_rich")]
    pub ratio: ExactNumber,
}

impl SolveReport {
    pub fn summary(&self) -> SolveSummary {
        SolveSummary {
            constrained: self.constrained,
            optimum: self.optimum.clone(),
            per_row: self
                .per_row
                .iter()
                .map(|(id, r)| RowRatio {
                    id: *id,
                    ratio: r.clone(),
                })
                .collect(),
            worst_row: RowRatio {
                id: self.worst_row.0,
                ratio: self.worst_row.1.clone(),
            },
            policy_states: self.policy.len(),
        }
    }
}
