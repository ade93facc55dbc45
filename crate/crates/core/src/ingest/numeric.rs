use serde::{Deserialize, Serialize};

use crate::kg::{AttributePayload, EntityKind, MISSING_NUMERIC};

/// Numeric vector width: slot 0 is age, slot 1 is weight, the rest padding.
pub const DEFAULT_NUMERIC_WIDTH: usize = 8;
pub const AGE_SLOT: usize = 0;
pub const WEIGHT_SLOT: usize = 1;

/// Observed range of one numeric field.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldRange {
    pub min: f64,
    pub max: f64,
}

impl FieldRange {
    pub fn fit(values: impl IntoIterator<Item = f64>) -> Option<Self> {
        values.into_iter().filter(|v| v.is_finite()).fold(None, |acc, v| match acc {
            None => Some(Self { min: v, max: v }),
            Some(r) => Some(Self { min: r.min.min(v), max: r.max.max(v) }),
        })
    }

    /// Min-max scaling clamped to `[0, 1]`; a degenerate range maps to 0.5.
    pub fn scale(&self, v: f64) -> f64 {
        if self.max <= self.min {
            0.5
        } else {
            ((v - self.min) / (self.max - self.min)).clamp(0.0, 1.0)
        }
    }
}

/// Min-max statistics for the numeric literals, fitted on training data.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NumericEncoder {
    pub width: usize,
    pub age: Option<FieldRange>,
    pub weight: Option<FieldRange>,
}

impl NumericEncoder {
    pub fn fit(ages: impl IntoIterator<Item = f64>, weights: impl IntoIterator<Item = f64>, width: usize) -> Self {
        assert!(width >= 2, "numeric width must hold age and weight");
        Self { width, age: FieldRange::fit(ages), weight: FieldRange::fit(weights) }
    }

    fn scale(range: Option<FieldRange>, v: Option<f64>) -> f64 {
        match v {
            None => MISSING_NUMERIC,
            Some(v) if v == MISSING_NUMERIC => MISSING_NUMERIC,
            Some(v) => range.map_or(0.5, |r| r.scale(v)),
        }
    }

    /// `[age, weight, 0, ...]` for one record, with -1 for missing values.
    pub fn encode_record(&self, age: Option<f64>, weight: Option<f64>) -> Vec<f64> {
        let mut out = vec![0.0; self.width];
        out[AGE_SLOT] = Self::scale(self.age, age);
        out[WEIGHT_SLOT] = Self::scale(self.weight, weight);
        out
    }

    /// Numeric vector of one entity: only Age and Weight entities fill
    /// their own slot, everything else stays zero.
    pub fn encode_entity(&self, kind: EntityKind, payload: &AttributePayload) -> Vec<f64> {
        let mut out = vec![0.0; self.width];
        if let AttributePayload::Numeric(v) = payload {
            match kind {
                EntityKind::Age => out[AGE_SLOT] = Self::scale(self.age, Some(*v)),
                EntityKind::Weight => out[WEIGHT_SLOT] = Self::scale(self.weight, Some(*v)),
                _ => {}
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn enc() -> NumericEncoder {
        NumericEncoder::fit([0.0, 10.0, 4.0], [2.0, 2.0], DEFAULT_NUMERIC_WIDTH)
    }

    #[test]
    fn missing_weight_is_minus_one() {
        let v = enc().encode_record(Some(3.0), None);
        assert_eq!(v[WEIGHT_SLOT], -1.0);
        assert_eq!(v.len(), 8);
        assert!(v[2..].iter().all(|x| *x == 0.0));
    }

    #[test]
    fn min_max_endpoints() {
        let e = enc();
        assert_eq!(e.encode_record(Some(10.0), None)[AGE_SLOT], 1.0);
        assert_eq!(e.encode_record(Some(0.0), None)[AGE_SLOT], 0.0);
        assert_eq!(e.encode_record(Some(5.0), None)[AGE_SLOT], 0.5);
    }

    #[test]
    fn degenerate_range_is_half() {
        assert_eq!(enc().encode_record(None, Some(2.0))[WEIGHT_SLOT], 0.5);
    }

    #[test]
    fn entity_slots() {
        let e = enc();
        let age = e.encode_entity(EntityKind::Age, &AttributePayload::Numeric(5.0));
        assert_eq!(&age[..2], &[0.5, 0.0]);
        let missing = e.encode_entity(EntityKind::Weight, &AttributePayload::Numeric(MISSING_NUMERIC));
        assert_eq!(&missing[..2], &[0.0, -1.0]);
        let none = e.encode_entity(EntityKind::Animal, &AttributePayload::None);
        assert!(none.iter().all(|x| *x == 0.0));
    }
}
