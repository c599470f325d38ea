//! Independent oracles shared by the integration tests.
//!
//! Nothing here calls the backward-induction code: policies are enumerated
//! explicitly and scored by forward simulation over (row, order) pairs.

#![allow(dead_code)]

use std::collections::BTreeMap;

use itertools::Itertools;
use num::{One, Zero};
use secretary_lab::exact::{frac, int, ExactNumber};
use secretary_lab::instance::PriorFamily;

/// Arrival history: (candidate, value) pairs, last entry is the current arrival.
pub type Seq = Vec<(usize, ExactNumber)>;

/// Reached-state action map of one deterministic strategy.
pub type Strategy = BTreeMap<Seq, bool>;

struct Row {
    values: Vec<ExactNumber>,
    max: ExactNumber,
    prob: ExactNumber,
}

fn rows(family: &PriorFamily) -> Vec<Row> {
    family
        .scenarios
        .iter()
        .zip(&family.probabilities)
        .filter(|(_, p)| !p.is_zero())
        .map(|(sc, p)| Row {
            values: sc.values().to_vec(),
            max: sc.values().iter().max().unwrap().clone(),
            prob: p.clone(),
        })
        .collect()
}

/// The 1-consistency rule restated from its definition.
fn allowed(prediction: &[ExactNumber], seq: &Seq, constrained: bool) -> Vec<bool> {
    let agrees = seq.iter().all(|(j, v)| &prediction[*j] == v);
    if !constrained || !agrees {
        return vec![true, false];
    }
    let best = prediction.iter().max().unwrap();
    let (cur, _) = seq.last().unwrap();
    let mut out = Vec::new();
    if &prediction[*cur] == best {
        out.push(true);
    }
    let pending = (0..prediction.len()).any(|j| !seq.iter().any(|(i, _)| *i == j) && &prediction[j] == best);
    if pending {
        out.push(false);
    }
    out
}

fn strategies(rows: &[Row], support: &[usize], seq: &Seq, prediction: &[ExactNumber], constrained: bool) -> Vec<Strategy> {
    let n = prediction.len();
    let mut out = Vec::new();
    for accept in allowed(prediction, seq, constrained) {
        if accept {
            out.push(Strategy::from([(seq.clone(), true)]));
            continue;
        }
        let mut combos: Vec<Strategy> = vec![Strategy::from([(seq.clone(), false)])];
        for j in (0..n).filter(|j| !seq.iter().any(|(i, _)| i == j)) {
            let mut groups: Vec<(ExactNumber, Vec<usize>)> = Vec::new();
            for &r in support {
                let v = rows[r].values[j].clone();
                match groups.iter_mut().find(|(g, _)| *g == v) {
                    Some((_, g)) => g.push(r),
                    None => groups.push((v, vec![r])),
                }
            }
            for (v, group) in groups {
                let mut child = seq.clone();
                child.push((j, v));
                let subs = strategies(rows, &group, &child, prediction, constrained);
                combos = combos
                    .iter()
                    .flat_map(|c| {
                        subs.iter().map(move |s| {
                            let mut m = c.clone();
                            m.extend(s.iter().map(|(k, v)| (k.clone(), *v)));
                            m
                        })
                    })
                    .collect();
            }
        }
        out.extend(combos);
    }
    out
}

fn play(row: &Row, order: &[usize], decide: &mut dyn FnMut(&Seq) -> bool) -> ExactNumber {
    let mut seq: Seq = Vec::new();
    for &j in order {
        seq.push((j, row.values[j].clone()));
        if decide(&seq) {
            return &row.values[j] / &row.max;
        }
    }
    ExactNumber::zero()
}

/// Best expected ratio over all deterministic (optionally 1-consistent)
/// policies, by exhaustive strategy enumeration per first arrival.
pub fn brute_force_optimum(family: &PriorFamily, constrained: bool) -> ExactNumber {
    let rows = rows(family);
    let n = family.n;
    let prediction = family.prediction().unwrap().values().to_vec();
    let orders: Vec<Vec<usize>> = (0..n).permutations(n).collect();
    let norm = int(orders.len() as i64);
    let mut total = ExactNumber::zero();
    for first in 0..n {
        let mut groups: Vec<(ExactNumber, Vec<usize>)> = Vec::new();
        for (r, row) in rows.iter().enumerate() {
            let v = row.values[first].clone();
            match groups.iter_mut().find(|(g, _)| *g == v) {
                Some((_, g)) => g.push(r),
                None => groups.push((v, vec![r])),
            }
        }
        for (v, support) in groups {
            let root: Seq = vec![(first, v)];
            let mut best: Option<ExactNumber> = None;
            for strat in strategies(&rows, &support, &root, &prediction, constrained) {
                let mut score = ExactNumber::zero();
                for &r in &support {
                    for order in orders.iter().filter(|o| o[0] == first) {
                        let ratio = play(&rows[r], order, &mut |seq| strat[seq]);
                        score += &rows[r].prob * ratio;
                    }
                }
                if best.as_ref().is_none_or(|b| &score > b) {
                    best = Some(score);
                }
            }
            total += best.unwrap();
        }
    }
    total / norm
}

/// Optimum by forward tree search: at each history take the better of
/// accepting now and continuing, with every (row, order) pair counted
/// explicitly. Polynomial in the tree size, unlike [`brute_force_optimum`].
pub fn tree_search_optimum(family: &PriorFamily, constrained: bool) -> ExactNumber {
    let rows = rows(family);
    let n = family.n;
    let prediction = family.prediction().unwrap().values().to_vec();
    let orders: Vec<Vec<usize>> = (0..n).permutations(n).collect();
    let all: Vec<(usize, &Vec<usize>)> = (0..rows.len()).flat_map(|r| orders.iter().map(move |o| (r, o))).collect();
    let total = search(&rows, &prediction, constrained, &Vec::new(), &all);
    total / int(orders.len() as i64)
}

type Path<'a> = (usize, &'a Vec<usize>);

fn search(rows: &[Row], prediction: &[ExactNumber], constrained: bool, seq: &Seq, paths: &[Path]) -> ExactNumber {
    let t = seq.len();
    if t == prediction.len() {
        return ExactNumber::zero();
    }
    // Branch on what arrives next.
    let mut branches: Vec<(usize, ExactNumber, Vec<Path>)> = Vec::new();
    for &(r, o) in paths {
        let j = o[t];
        let v = rows[r].values[j].clone();
        match branches.iter_mut().find(|(bj, bv, _)| *bj == j && *bv == v) {
            Some((_, _, b)) => b.push((r, o)),
            None => branches.push((j, v, vec![(r, o)])),
        }
    }
    let mut total = ExactNumber::zero();
    for (j, v, sub) in branches {
        let mut child = seq.clone();
        child.push((j, v));
        let mut best: Option<ExactNumber> = None;
        for accept in allowed(prediction, &child, constrained) {
            let value = if accept {
                sub.iter()
                    .map(|&(r, _)| &rows[r].prob * (&rows[r].values[j] / &rows[r].max))
                    .fold(ExactNumber::zero(), |a, b| a + b)
            } else {
                search(rows, prediction, constrained, &child, &sub)
            };
            if best.as_ref().is_none_or(|b| &value > b) {
                best = Some(value);
            }
        }
        // No allowed action: the history is unreachable for a consistent rule.
        total += best.unwrap_or_else(ExactNumber::zero);
    }
    total
}

/// Exact expected ratio of an arbitrary online rule by full enumeration.
pub fn simulate(family: &PriorFamily, mut decide: impl FnMut(&Seq) -> bool) -> ExactNumber {
    let rows = rows(family);
    let n = family.n;
    let orders: Vec<Vec<usize>> = (0..n).permutations(n).collect();
    let mut total = ExactNumber::zero();
    for row in &rows {
        let mut sum = ExactNumber::zero();
        for order in &orders {
            sum += play(row, order, &mut decide);
        }
        total += &row.prob * sum;
    }
    total / int(orders.len() as i64)
}

/// Success probability of the cutoff rule on `n` distinct values:
/// `(l/n) * sum_{i=l+1}^{n} 1/(i-1)`.
pub fn dynkin_success_formula(n: i64, cutoff: i64) -> ExactNumber {
    let mut sum = ExactNumber::zero();
    for i in (cutoff + 1)..=n {
        sum += frac(1, i - 1);
    }
    frac(cutoff, n) * sum
}

/// Closed-form constrained optimum, restated from the per-case analysis.
pub fn closed_form_optimum(eps: &ExactNumber, s: &ExactNumber, k: i64) -> ExactNumber {
    let one = ExactNumber::one();
    let r = int(2 * k - 1);
    let rm1 = &r - &one;
    let mut ladder = ExactNumber::zero();
    for m in 3..=(k + 1) {
        ladder += secretary_lab::exact::pow(s, 1 - m);
    }
    let case1 = eps + (&one - eps) * int(2) / &rm1 * ladder;
    let case2 = eps
        + (&one - eps) * int(2) / &rm1
        + (&one - eps) * (&r - int(3)) / &rm1 * (frac(1, 2) + frac(1, 2) / s);
    frac(1, 3) * case1 + frac(2, 3) * case2
}
