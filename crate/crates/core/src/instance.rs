//! Scenarios, prior families, and the elementary competitive-analysis
//! formulas shared by every other module.

use std::collections::BTreeSet;

use num::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::{self, ExactNumber, ValueCodec};

/// One realizable assignment of values to candidates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Scenario {
    id: u32,
    values: Vec<ExactNumber>,
}

impl Scenario {
    pub fn new(id: u32, values: Vec<ExactNumber>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidParams(format!("scenario {id} has no values")));
        }
        Ok(Self { id, values })
    }

    pub fn id(&self) -> u32 {
        self.id
    }

    pub fn values(&self) -> &[ExactNumber] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Multiplies every value by `c`.
    pub fn scale(&self, c: &ExactNumber) -> Scenario {
        Scenario {
            id: self.id,
            values: self.values.iter().map(|v| v * c).collect(),
        }
    }
}

/// Largest value in the scenario.
pub fn scenario_max(scenario: &Scenario) -> ExactNumber {
    scenario
        .values
        .iter()
        .max()
        .cloned()
        .expect("scenario values are non-empty")
}

/// `accepted / max(values)`, or zero when nothing was accepted.
pub fn competitive_ratio(accepted: Option<&ExactNumber>, scenario: &Scenario) -> Result<ExactNumber> {
    let max = scenario_max(scenario);
    if !max.is_positive() {
        return Err(Error::DegenerateInstance { id: scenario.id });
    }
    match accepted {
        None => Ok(ExactNumber::zero()),
        Some(v) => {
            if !scenario.values.contains(v) {
                return Err(Error::NotAScenarioValue {
                    id: scenario.id,
                    value: exact::render(v),
                });
            }
            Ok(v / max)
        }
    }
}

/// Maximum multiplicative error `max_i |1 - predicted_i / value_i|`.
pub fn prediction_error(values: &[ExactNumber], predictions: &[ExactNumber]) -> Result<ExactNumber> {
    if values.len() != predictions.len() {
        return Err(Error::LengthMismatch {
            left: values.len(),
            right: predictions.len(),
        });
    }
    let mut worst = ExactNumber::zero();
    for (i, (v, p)) in values.iter().zip(predictions).enumerate() {
        if v.is_zero() {
            return Err(Error::UndefinedPredictionError { index: i + 1 });
        }
        let err = (ExactNumber::one() - p / v).abs();
        if err > worst {
            worst = err;
        }
    }
    Ok(worst)
}

/// Finite prior over scenarios, one of which is announced as the prediction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PriorFamily {
    pub n: usize,
    /// Base used for the `s^e` shorthand in files, if any.
    pub base_s: Option<ExactNumber>,
    pub scenarios: Vec<Scenario>,
    pub probabilities: Vec<ExactNumber>,
    pub prediction_id: u32,
}

/// Result of [`validate_family`]; empty `violations` means valid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidationReport {
    pub probability_sum: ExactNumber,
    pub violations: Vec<String>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

pub fn validate_family(family: &PriorFamily) -> ValidationReport {
    let mut violations = Vec::new();
    let sum: ExactNumber = family.probabilities.iter().sum();
    if family.n == 0 {
        violations.push("candidate count n is zero".to_string());
    }
    if family.scenarios.is_empty() {
        violations.push("no scenarios".to_string());
    }
    if family.probabilities.len() != family.scenarios.len() {
        violations.push(format!(
            "{} probabilities for {} scenarios",
            family.probabilities.len(),
            family.scenarios.len()
        ));
    }
    if family.probabilities.iter().any(|p| p.is_negative()) {
        violations.push("negative probability".to_string());
    }
    if !sum.is_one() {
        violations.push(format!("mass ≠ 1 (sum = {})", exact::render(&sum)));
    }
    let mut ids = BTreeSet::new();
    for sc in &family.scenarios {
        if !ids.insert(sc.id) {
            violations.push(format!("ids not unique (duplicate {})", sc.id));
        }
        if sc.values.len() != family.n {
            violations.push(format!(
                "scenario {} has {} values, expected {}",
                sc.id,
                sc.values.len(),
                family.n
            ));
        }
        if sc.values.iter().any(|v| v.is_negative()) {
            violations.push(format!("scenario {} has a negative value", sc.id));
        }
        if !sc.values.iter().any(|v| v.is_positive()) {
            violations.push(format!("scenario {} has no positive value", sc.id));
        }
    }
    if !ids.contains(&family.prediction_id) {
        violations.push(format!("prediction_id {} not present", family.prediction_id));
    }
    ValidationReport {
        probability_sum: sum,
        violations,
    }
}

impl PriorFamily {
    pub fn scenario(&self, id: u32) -> Option<&Scenario> {
        self.scenarios.iter().find(|s| s.id == id)
    }

    pub fn probability(&self, id: u32) -> Option<&ExactNumber> {
        self.scenarios
            .iter()
            .position(|s| s.id == id)
            .and_then(|i| self.probabilities.get(i))
    }

    pub fn prediction(&self) -> Option<&Scenario> {
        self.scenario(self.prediction_id)
    }

    /// Validates and returns `self`, or the list of violations as an error.
    pub fn checked(self) -> Result<Self> {
        let report = validate_family(&self);
        if report.is_valid() {
            Ok(self)
        } else {
            Err(Error::InvalidFamily(report.violations))
        }
    }

    /// Codec that writes powers of `base_s` in `s^e` form.
    pub fn codec(&self) -> ValueCodec {
        match &self.base_s {
            Some(base) => {
                let max = self
                    .scenarios
                    .iter()
                    .flat_map(|s| s.values.iter())
                    .max()
                    .cloned()
                    .unwrap_or_else(ExactNumber::one);
                ValueCodec::with_base(base, &max)
            }
            None => ValueCodec::plain(),
        }
    }

    pub fn to_file(&self) -> FamilyFile {
        let codec = self.codec();
        FamilyFile {
            n: self.n,
            base_s: self.base_s.as_ref().map(exact::render),
            scenarios: self
                .scenarios
                .iter()
                .zip(&self.probabilities)
                .map(|(sc, p)| ScenarioEntry {
                    id: sc.id,
                    values: sc.values.iter().map(|v| codec.render(v)).collect(),
                    probability: exact::render(p),
                })
                .collect(),
            prediction_id: self.prediction_id,
        }
    }

    pub fn to_json(&self) -> String {
        let mut out = serde_json::to_string_pretty(&self.to_file()).expect("family serializes");
        out.push('\n');
        out
    }

    /// Parses and validates a family file.
    pub fn from_json(text: &str) -> Result<Self> {
        let file: FamilyFile = serde_json::from_str(text)?;
        PriorFamily::from_file(&file)?.checked()
    }

    /// Parses a family file without validating the result.
    pub fn from_file(file: &FamilyFile) -> Result<Self> {
        let base_s = file
            .base_s
            .as_deref()
            .map(|b| exact::parse_value(b, None))
            .transpose()?;
        let mut scenarios = Vec::with_capacity(file.scenarios.len());
        let mut probabilities = Vec::with_capacity(file.scenarios.len());
        for entry in &file.scenarios {
            let values = entry
                .values
                .iter()
                .map(|v| exact::parse_value(v, base_s.as_ref()))
                .collect::<Result<Vec<_>>>()?;
            scenarios.push(Scenario::new(entry.id, values)?);
            probabilities.push(exact::parse_value(&entry.probability, base_s.as_ref())?);
        }
        Ok(PriorFamily {
            n: file.n,
            base_s,
            scenarios,
            probabilities,
            prediction_id: file.prediction_id,
        })
    }
}

/// On-disk JSON layout of a [`PriorFamily`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FamilyFile {
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base_s: Option<String>,
    pub scenarios: Vec<ScenarioEntry>,
    pub prediction_id: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioEntry {
    pub id: u32,
    pub values: Vec<String>,
    pub probability: String,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{frac, int, pow};
    use proptest::prelude::*;

    fn row(id: u32, vals: &[ExactNumber]) -> Scenario {
        Scenario::new(id, vals.to_vec()).unwrap()
    }

    #[test]
    fn ratio_examples() {
        let s = int(7);
        let row2 = row(2, &[s.clone(), pow(&s, 2), pow(&s, 3)]);
        assert_eq!(competitive_ratio(Some(&pow(&s, 3)), &row2).unwrap(), int(1));
        assert_eq!(competitive_ratio(None, &row2).unwrap(), int(0));
        let row6 = row(6, &[s.clone(), pow(&s, 4), pow(&s, 5)]);
        assert_eq!(competitive_ratio(Some(&pow(&s, 4)), &row6).unwrap(), s.recip());
    }

    #[test]
    fn ratio_rejects_degenerate_and_foreign_values() {
        let zeros = row(1, &[int(0), int(0)]);
        assert!(matches!(competitive_ratio(None, &zeros), Err(Error::DegenerateInstance { id: 1 })));
        let r = row(2, &[int(1), int(2)]);
        assert!(matches!(competitive_ratio(Some(&int(3)), &r), Err(Error::NotAScenarioValue { .. })));
    }

    #[test]
    fn max_examples() {
        let s = int(19);
        assert_eq!(scenario_max(&row(1, &[s.clone(), int(1), int(1)])), s);
        assert_eq!(scenario_max(&row(1, &[int(1), int(1), int(1)])), int(1));
        let k = 20;
        let last = row(39, &[s.clone(), pow(&s, k + 1), pow(&s, k)]);
        assert_eq!(scenario_max(&last), pow(&s, k + 1));
    }

    #[test]
    fn prediction_error_examples() {
        let v = vec![int(3), int(5)];
        assert_eq!(prediction_error(&v, &v).unwrap(), int(0));
        assert_eq!(prediction_error(&[int(2), int(4)], &[int(1), int(4)]).unwrap(), frac(1, 2));
        let s = int(5);
        let row2 = [s.clone(), pow(&s, 2), pow(&s, 3)];
        let row1 = [s.clone(), int(1), int(1)];
        assert_eq!(
            prediction_error(&row2, &row1).unwrap(),
            int(1) - pow(&s, -3)
        );
        assert!(matches!(
            prediction_error(&[int(0)], &[int(1)]),
            Err(Error::UndefinedPredictionError { index: 1 })
        ));
        assert!(matches!(prediction_error(&[int(1)], &[]), Err(Error::LengthMismatch { .. })));
    }

    fn small_family() -> PriorFamily {
        PriorFamily {
            n: 2,
            base_s: None,
            scenarios: vec![row(1, &[int(1), int(2)]), row(2, &[int(2), int(1)])],
            probabilities: vec![frac(1, 2), frac(1, 2)],
            prediction_id: 1,
        }
    }

    #[test]
    fn validation_flags_mass_and_ids() {
        let ok = small_family();
        let rep = validate_family(&ok);
        assert!(rep.is_valid());
        assert_eq!(rep.probability_sum, int(1));

        let mut light = small_family();
        light.probabilities = vec![frac(49, 100), frac(1, 2)];
        let rep = validate_family(&light);
        assert!(rep.violations.iter().any(|v| v.starts_with("mass ≠ 1")));

        let mut dup = small_family();
        dup.scenarios[1] = row(1, &[int(2), int(1)]);
        let rep = validate_family(&dup);
        assert!(rep.violations.iter().any(|v| v.starts_with("ids not unique")));

        let mut missing = small_family();
        missing.prediction_id = 9;
        assert!(!validate_family(&missing).is_valid());
    }

    #[test]
    fn family_json_round_trip_with_base() {
        let s = int(5);
        let fam = PriorFamily {
            n: 2,
            base_s: Some(s.clone()),
            scenarios: vec![row(1, &[s.clone(), int(1)]), row(2, &[s.clone(), pow(&s, 3)])],
            probabilities: vec![frac(1, 10), frac(9, 10)],
            prediction_id: 1,
        };
        let text = fam.to_json();
        assert!(text.contains("\"s^3\""));
        assert_eq!(PriorFamily::from_json(&text).unwrap(), fam);
    }

    proptest! {
        #[test]
        fn ratio_scale_invariant(vals in prop::collection::vec(1i64..1000, 1..6), pick in 0usize..6, c in (1i64..500, 1i64..500)) {
            let sc = Scenario::new(1, vals.iter().map(|v| int(*v)).collect()).unwrap();
            let c = frac(c.0, c.1);
            let chosen = sc.values()[pick % vals.len()].clone();
            let base = competitive_ratio(Some(&chosen), &sc).unwrap();
            let scaled = competitive_ratio(Some(&(&chosen * &c)), &sc.scale(&c)).unwrap();
            prop_assert_eq!(base, scaled);
        }

        #[test]
        fn prediction_error_self_zero_and_permutation_invariant(
            pairs in prop::collection::vec((1i64..1000, 0i64..1000), 1..6),
            rot in 0usize..6,
        ) {
            let v: Vec<_> = pairs.iter().map(|p| int(p.0)).collect();
            let p: Vec<_> = pairs.iter().map(|p| int(p.1)).collect();
            prop_assert_eq!(prediction_error(&v, &v).unwrap(), int(0));
            let mut vr = v.clone();
            let mut pr = p.clone();
            let r = rot % v.len();
            vr.rotate_left(r);
            pr.rotate_left(r);
            vr.reverse();
            pr.reverse();
            prop_assert_eq!(prediction_error(&v, &p).unwrap(), prediction_error(&vr, &pr).unwrap());
        }
    }
}
