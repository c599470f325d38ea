//! Closed-form bounds for the hardness family and end-to-end verification.
//!
//! With `r = 2k - 1` rows:
//!
//! * `alpha = 1/3 + 2/3 (eps + (1 - eps)(1/s + 1/(k-1)))` is the simplified
//!   upper bound on any 1-consistent algorithm;
//! * `beta = 3/2 (1/e - 1/3)` is the budget `alpha` must undercut to beat `1/e`;
//! * the displayed bound is the per-case sum before the final relaxation;
//! * the oracle optimum replaces the case-1 relaxation by the exact per-row
//!   ratios `s^(1-m)` and is attained by the constrained backward induction.

use num::{One, Signed};
use serde::{Deserialize, Serialize};

use crate::construction::{build_hard_family, ConstructionParams};
use crate::engine::solve_optimal;
use crate::error::{Error, Result};
use crate::exact::{self, compare_to_inv_e, frac, int, Enclosure, ExactNumber, Precision, Verdict};

const PRESETS_TOML: &str = include_str!("../presets.toml");

/// Strict lower bound on `k` for the asymptotic argument.
pub const PROOF_MIN_K: u32 = 20;
/// Looser lower bound on `k` quoted alongside the construction.
pub const CAPTION_MIN_K: u32 = 12;

fn check_k(k: u32) -> Result<()> {
    if k < 2 {
        return Err(Error::InvalidParams(format!("k must be at least 2, got {k}")));
    }
    Ok(())
}

fn row_count(k: u32) -> ExactNumber {
    int(2 * i64::from(k) - 1)
}

pub fn alpha_value(mix_eps: &ExactNumber, s: &ExactNumber, k: u32) -> Result<ExactNumber> {
    check_k(k)?;
    let one = ExactNumber::one();
    let inner = mix_eps + (&one - mix_eps) * (s.recip() + int(i64::from(k) - 1).recip());
    Ok(frac(1, 3) + frac(2, 3) * inner)
}

/// Certified enclosure of `beta = 3/2 (1/e - 1/3)`, width below `10^-digits`.
pub fn beta_bounds(digits: u32) -> Enclosure {
    let mut enc = exact::inv_e_enclosure(digits + 1).affine(&frac(3, 2), &frac(-1, 2));
    enc.digits = digits;
    enc
}

/// Certified enclosure of `(beta - eps) / (1 - eps)`.
///
/// Fails with [`Error::NonpositiveBudget`] when `eps >= beta`.
pub fn threshold_value(mix_eps: &ExactNumber, precision: &Precision) -> Result<Enclosure> {
    if mix_eps >= &ExactNumber::one() {
        return Err(Error::NonpositiveBudget);
    }
    if precision.certify(mix_eps, beta_bounds)? == Verdict::Greater {
        return Err(Error::NonpositiveBudget);
    }
    let scale = (ExactNumber::one() - mix_eps).recip();
    Ok(beta_bounds(precision.start_digits).affine(&scale, &(-(mix_eps * &scale))))
}

/// Case sum with the case-1 term relaxed to
/// `eps + (1 - eps)/s`.
pub fn ub_display(mix_eps: &ExactNumber, s: &ExactNumber, k: u32) -> Result<ExactNumber> {
    check_k(k)?;
    let one = ExactNumber::one();
    let r = row_count(k);
    let rest = &one - mix_eps;
    let case1 = mix_eps + &rest / s;
    let case23 = case2_value(mix_eps, s, &r);
    Ok(frac(1, 3) * case1 + frac(2, 3) * case23)
}

/// Exact constrained optimum: case 1 with its exact per-row ratios.
pub fn oracle_optimum(mix_eps: &ExactNumber, s: &ExactNumber, k: u32) -> Result<ExactNumber> {
    check_k(k)?;
    let one = ExactNumber::one();
    let r = row_count(k);
    let rest = &one - mix_eps;
    let inv_s = s.recip();
    // sum_{m=3}^{k+1} s^(1-m), a geometric series starting at s^-2.
    let mut ladder = ExactNumber::from_integer(0.into());
    let mut term = &inv_s * &inv_s;
    for _ in 3..=k + 1 {
        ladder += &term;
        term *= &inv_s;
    }
    let case1 = mix_eps + &rest * int(2) / (&r - &one) * ladder;
    let case23 = case2_value(mix_eps, s, &r);
    Ok(frac(1, 3) * case1 + frac(2, 3) * case23)
}

/// Best value when `X_2` (or `X_3`) arrives first: `eps + 2(1-eps)/(r-1)
/// + (1-eps)(r-3)/(r-1) (1/2 + 1/(2s))`.
fn case2_value(mix_eps: &ExactNumber, s: &ExactNumber, r: &ExactNumber) -> ExactNumber {
    let one = ExactNumber::one();
    let rest = &one - mix_eps;
    let rm1 = r - &one;
    let half = frac(1, 2);
    mix_eps
        + &rest * int(2) / &rm1
        + &rest * (r - int(3)) / &rm1 * (&half + &half / s)
}

/// Named parameter set from the preset registry.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Preset {
    pub name: String,
    pub params: ConstructionParams,
}

#[derive(Deserialize)]
struct Registry {
    version: u32,
    preset: Vec<RegistryEntry>,
}

#[derive(Deserialize)]
struct RegistryEntry {
    name: String,
    mix_eps: String,
    s: String,
    k: u32,
    #[serde(default = "default_n")]
    n: usize,
}

fn default_n() -> usize {
    3
}

pub fn presets() -> Result<Vec<Preset>> {
    let reg: Registry = toml::from_str(PRESETS_TOML).map_err(|e| Error::Registry(e.to_string()))?;
    if reg.version != 1 {
        return Err(Error::Registry(format!("unsupported registry version {}", reg.version)));
    }
    reg.preset
        .into_iter()
        .map(|e| {
            let params = ConstructionParams::new(
                exact::parse_value(&e.mix_eps, None)?,
                exact::parse_value(&e.s, None)?,
                e.k,
                e.n,
            )?;
            Ok(Preset { name: e.name, params })
        })
        .collect()
}

pub fn preset(name: &str) -> Result<Preset> {
    presets()?
        .into_iter()
        .find(|p| p.name == name)
        .ok_or_else(|| Error::UnknownPreset(name.to_string()))
}

/// Either a registry name or explicit parameters.
#[derive(Debug, Clone)]
pub enum Target {
    Preset(String),
    Params(ConstructionParams),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamsRecord {
    #[serde(with = "exact::serde_rich")]
    pub mix_eps: ExactNumber,
    #[serde(with = "exact::serde_rich")]
    pub s: ExactNumber,
    pub k: u32,
    pub n: usize,
    pub row_count: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnclosureRecord {
    #[serde(with = "exact::serde_rich")]
    pub lower: ExactNumber,
    #[serde(with = "exact::serde_rich")]
    pub upper: ExactNumber,
    pub digits: u32,
}

impl From<&Enclosure> for EnclosureRecord {
    fn from(e: &Enclosure) -> Self {
        Self {
            lower: e.lower.clone(),
            upper: e.upper.clone(),
            digits: e.digits,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorstRow {
    pub id: u32,
    #[serde(with = "exact::serde_rich")]
    pub ratio: ExactNumber,
}

/// Everything computed for one parameterization.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TheoremReport {
    pub preset: Option<String>,
    pub params: ParamsRecord,
    #[serde(with = "exact::serde_rich")]
    pub alpha: ExactNumber,
    pub alpha_vs_inv_e: Verdict,
    pub beta_enclosure: EnclosureRecord,
    /// `None` when `mix_eps >= beta`.
    pub threshold: Option<EnclosureRecord>,
    #[serde(with = "exact::serde_rich")]
    pub preset_lhs: ExactNumber,
    pub preset_inequality_holds: bool,
    #[serde(with = "exact::serde_rich")]
    pub ub_display: ExactNumber,
    #[serde(with = "exact::serde_rich")]
    pub oracle_optimum: ExactNumber,
    #[serde(with = "exact::serde_rich")]
    pub dp_optimum: ExactNumber,
    pub oracle_matches_dp: bool,
    /// `dp_optimum < ub_display < alpha`.
    pub chain_holds: bool,
    pub verdict_vs_inv_e: Verdict,
    /// Certified lower bound on `1/e - dp_optimum` (negative when above `1/e`).
    #[serde(with = "exact::serde_rich")]
    pub inv_e_margin_lower: ExactNumber,
    pub worst_row: WorstRow,
    pub k_min_proof: u32,
    pub k_min_caption: u32,
    pub e_digits: u32,
    pub notes: Vec<String>,
}

impl TheoremReport {
    pub fn to_json(&self) -> String {
        let mut out = serde_json::to_string_pretty(self).expect("report serializes");
        out.push('\n');
        out
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Builds the family, solves it under the consistency constraint, and checks
/// every closed form against the exact optimum.
pub fn verify_theorem(target: &Target, precision: &Precision) -> Result<TheoremReport> {
    let (name, params) = match target {
        Target::Preset(name) => {
            let p = preset(name)?;
            (Some(p.name), p.params)
        }
        Target::Params(p) => {
            p.validate()?;
            (None, p.clone())
        }
    };
    let (eps, s, k) = (&params.mix_eps, &params.s, params.k);

    let family = build_hard_family(&params)?;
    let solved = solve_optimal(&family, true)?;
    let dp = solved.optimum;

    let alpha = alpha_value(eps, s, k)?;
    let ub = ub_display(eps, s, k)?;
    let oracle = oracle_optimum(eps, s, k)?;
    let beta = beta_bounds(precision.start_digits);
    let lhs = s.recip() + int(i64::from(k) - 1).recip();

    let threshold = match threshold_value(eps, precision) {
        Ok(t) => Some(t),
        Err(Error::NonpositiveBudget) => None,
        Err(e) => return Err(e),
    };
    let preset_inequality_holds = match &threshold {
        Some(_) => {
            let scale = (ExactNumber::one() - eps).recip();
            let make = |d: u32| beta_bounds(d).affine(&scale, &(-(eps * &scale)));
            precision.certify(&lhs, make)? == Verdict::Less
        }
        None => false,
    };

    let verdict = compare_to_inv_e(&dp, precision)?;
    let alpha_verdict = compare_to_inv_e(&alpha, precision)?;
    let inv_e = exact::inv_e_enclosure(precision.start_digits);
    let margin = &inv_e.lower - &dp;

    let chain_holds = dp < ub && ub < alpha;
    let mut notes = Vec::new();
    if threshold.is_none() {
        notes.push("mix_eps is not below beta: no budget for 1/s + 1/(k-1)".to_string());
    } else if !preset_inequality_holds {
        notes.push(format!(
            "parameters violate 1/s + 1/(k-1) < (beta - eps)/(1 - eps): lhs = {}",
            exact::to_decimal(&lhs, 6)
        ));
    }
    if verdict == Verdict::Greater {
        notes.push("constrained optimum exceeds 1/e: these parameters do not certify the 1/e gap".to_string());
    }
    if k < PROOF_MIN_K {
        notes.push(format!("k = {k} is below the asymptotic minimum {PROOF_MIN_K}"));
    }
    if oracle != dp {
        notes.push("closed-form optimum disagrees with backward induction".to_string());
    }
    if !chain_holds {
        notes.push("strict chain dp < ub_display < alpha fails".to_string());
    }

    Ok(TheoremReport {
        preset: name,
        params: ParamsRecord {
            mix_eps: eps.clone(),
            s: s.clone(),
            k,
            n: params.n,
            row_count: params.row_count(),
        },
        alpha,
        alpha_vs_inv_e: alpha_verdict,
        beta_enclosure: (&beta).into(),
        threshold: threshold.as_ref().map(Into::into),
        preset_lhs: lhs,
        preset_inequality_holds,
        ub_display: ub,
        oracle_matches_dp: oracle == dp,
        oracle_optimum: oracle,
        dp_optimum: dp,
        chain_holds,
        verdict_vs_inv_e: verdict,
        inv_e_margin_lower: margin,
        worst_row: WorstRow {
            id: solved.worst_row.0,
            ratio: solved.worst_row.1,
        },
        k_min_proof: PROOF_MIN_K,
        k_min_caption: CAPTION_MIN_K,
        e_digits: precision.start_digits,
        notes,
    })
}

/// Parameters whose `alpha` (and hence optimum) lies below `1/3 + delta`.
///
/// Uses `eps = delta/4` and `s = k`, doubling `k` until the bound holds.
pub fn params_below_one_third_plus(delta: &ExactNumber) -> Result<ConstructionParams> {
    if !delta.is_positive() || delta > &frac(2, 3) {
        return Err(Error::InvalidParams("delta must lie in (0, 2/3]".to_string()));
    }
    let eps = delta / int(4);
    let target = frac(1, 3) + delta;
    let mut k: u32 = 4;
    loop {
        let s = int(i64::from(k));
        if alpha_value(&eps, &s, k)? < target {
            return ConstructionParams::new(eps, s, k, 3);
        }
        k = k.checked_mul(2).ok_or_else(|| Error::InvalidParams("delta too small".to_string()))?;
    }
}
