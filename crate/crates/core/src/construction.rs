//! Generator for the geometric-ladder hardness family.
//!
//! Row 1 is the announced prediction `(s, 1, 1, ...)`. Rows `2t` and `2t+1`
//! (for `t = 1..k-1`) form a swap pair carrying `s^(t+1)` and `s^(t+2)` in
//! columns `X_2`/`X_3`. For odd `t` the even row puts the lower exponent in
//! `X_2`; for even `t` it puts the higher one there. Every row has `X_1 = s`,
//! and any columns past the third are padded with `1`.

use std::fmt::Write as _;

use num::{One, Signed};

use crate::error::{Error, Result};
use crate::exact::{self, ExactNumber};
use crate::instance::{PriorFamily, Scenario};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConstructionParams {
    pub mix_eps: ExactNumber,
    pub s: ExactNumber,
    pub k: u32,
    pub n: usize,
}

impl ConstructionParams {
    pub fn new(mix_eps: ExactNumber, s: ExactNumber, k: u32, n: usize) -> Result<Self> {
        let p = Self { mix_eps, s, k, n };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.mix_eps.is_positive() || self.mix_eps >= ExactNumber::one() {
            return Err(Error::InvalidParams(format!(
                "mix_eps must lie strictly between 0 and 1, got {}",
                exact::render(&self.mix_eps)
            )));
        }
        if self.s <= ExactNumber::one() {
            return Err(Error::InvalidParams(format!(
                "s must exceed 1, got {}",
                exact::render(&self.s)
            )));
        }
        if self.k < 4 {
            return Err(Error::InvalidParams(format!("k must be at least 4, got {}", self.k)));
        }
        if !self.k.is_multiple_of(2) {
            return Err(Error::InvalidParams(format!("k must be even, got {}", self.k)));
        }
        if self.n < 3 {
            return Err(Error::InvalidParams(format!("n must be at least 3, got {}", self.n)));
        }
        Ok(())
    }

    /// Number of rows, `2k - 1`.
    pub fn row_count(&self) -> u32 {
        2 * self.k - 1
    }
}

/// Column selector for the two informative columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Column {
    X2,
    X3,
}

/// Exponents of `s` in columns `X_2` and `X_3` for rows `2..=2k-1`, in row
/// order. Row 1 is not on the ladder and is omitted.
pub fn ladder_exponents(k: u32) -> Vec<(u32, [u32; 2])> {
    let mut rows = Vec::with_capacity(2 * k as usize);
    for t in 1..k {
        let (lo, hi) = (t + 1, t + 2);
        let even_row = if t % 2 == 1 { [lo, hi] } else { [hi, lo] };
        rows.push((2 * t, even_row));
        rows.push((2 * t + 1, [even_row[1], even_row[0]]));
    }
    rows
}

pub fn build_hard_family(params: &ConstructionParams) -> Result<PriorFamily> {
    params.validate()?;
    let s = &params.s;
    let one = ExactNumber::one();
    let pad = params.n - 3;
    let ladder_prob = (&one - &params.mix_eps) / exact::int(2 * i64::from(params.k) - 2);

    let mut scenarios = Vec::with_capacity(params.row_count() as usize);
    let mut probabilities = Vec::with_capacity(params.row_count() as usize);

    let mut prediction = vec![s.clone(), one.clone(), one.clone()];
    prediction.extend(std::iter::repeat_n(one.clone(), pad));
    scenarios.push(Scenario::new(1, prediction)?);
    probabilities.push(params.mix_eps.clone());

    for (row, [e2, e3]) in ladder_exponents(params.k) {
        let mut values = vec![
            s.clone(),
            exact::pow(s, i64::from(e2)),
            exact::pow(s, i64::from(e3)),
        ];
        values.extend(std::iter::repeat_n(one.clone(), pad));
        scenarios.push(Scenario::new(row, values)?);
        probabilities.push(ladder_prob.clone());
    }

    Ok(PriorFamily {
        n: params.n,
        base_s: Some(s.clone()),
        scenarios,
        probabilities,
        prediction_id: 1,
    })
}

/// First row whose `X_2` entry is `s^i`: `2i - 4 + (i mod 2)`.
pub fn first_appearance_row(i: u32, k: u32) -> Result<u32> {
    if i < 3 || i > k + 1 {
        return Err(Error::OutOfRange(format!("exponent {i} outside 3..={}", k + 1)));
    }
    Ok(2 * i - 4 + i % 2)
}

/// The two rows whose `column` entry equals `s^i`, found by scanning the
/// ladder. `s^2` and `s^(k+1)` occur once per column and are rejected.
pub fn confusion_pair_rows(i: u32, column: Column, k: u32) -> Result<(u32, u32)> {
    if i < 3 || i > k {
        return Err(Error::OutOfRange(format!("exponent {i} outside 3..={k}")));
    }
    let col = match column {
        Column::X2 => 0,
        Column::X3 => 1,
    };
    let hits: Vec<u32> = ladder_exponents(k)
        .into_iter()
        .filter(|(_, e)| e[col] == i)
        .map(|(row, _)| row)
        .collect();
    let [a, b] = hits[..] else {
        unreachable!("every exponent in 3..=k appears twice per column")
    };
    debug_assert_eq!(
        (a, b),
        closed_form_pair(i, column),
        "scan disagrees with closed form"
    );
    Ok((a, b))
}

fn closed_form_pair(i: u32, column: Column) -> (u32, u32) {
    let lo = 2 * i - 4 + i % 2;
    let hi = 2 * i - 2 + i % 2;
    match column {
        Column::X2 => (lo, hi),
        Column::X3 => (swap_partner(lo), swap_partner(hi)),
    }
}

/// Row paired with `row` by the `X_2`/`X_3` swap.
fn swap_partner(row: u32) -> u32 {
    if row.is_multiple_of(2) {
        row + 1
    } else {
        row - 1
    }
}

/// Markdown table in the layout `row | X_1..X_n | probability`.
pub fn render_markdown(family: &PriorFamily) -> String {
    let codec = family.codec();
    let mut out = String::new();
    let header: Vec<String> = (1..=family.n).map(|i| format!("X_{i}")).collect();
    let _ = writeln!(out, "| row | {} | probability |", header.join(" | "));
    let _ = writeln!(out, "|---|{}---|", "---|".repeat(family.n));
    for (sc, p) in family.scenarios.iter().zip(&family.probabilities) {
        let vals: Vec<String> = sc.values().iter().map(|v| codec.render(v)).collect();
        let tag = if sc.id() == family.prediction_id {
            " (prediction)"
        } else {
            ""
        };
        let _ = writeln!(
            out,
            "| {}{} | {} | {} |",
            sc.id(),
            tag,
            vals.join(" | "),
            exact::render(p)
        );
    }
    out
}

/// CSV table with header `row,X_1,..,X_n,probability`.
pub fn render_csv(family: &PriorFamily) -> String {
    let codec = family.codec();
    let mut out = String::from("row");
    for i in 1..=family.n {
        let _ = write!(out, ",X_{i}");
    }
    out.push_str(",probability\n");
    for (sc, p) in family.scenarios.iter().zip(&family.probabilities) {
        let _ = write!(out, "{}", sc.id());
        for v in sc.values() {
            let _ = write!(out, ",{}", codec.render(v));
        }
        let _ = writeln!(out, ",{}", exact::render(p));
    }
    out
}
