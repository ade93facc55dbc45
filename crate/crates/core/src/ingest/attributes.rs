use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::numeric::NumericEncoder;
use super::text::TextEmbedder;
use crate::error::{Error, Result};
use crate::kg::{AttributePayload, EntityId, EntityKind, KnowledgeGraph, RelationKind, MISSING_NUMERIC};
use crate::numerics::Tensor;

/// Per-entity numeric and text literal vectors, one row per entity.
#[derive(Clone, Debug, PartialEq)]
pub struct AttributeVectors {
    pub numeric: Tensor,
    pub text: Tensor,
}

#[derive(Serialize, Deserialize)]
struct SidecarEntry {
    #[serde(skip_serializing_if = "Option::is_none")]
    numeric: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    text: Option<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct Sidecar {
    entities: usize,
    numeric_width: usize,
    text_width: usize,
    /// Entities missing from the map have all-zero vectors.
    vectors: BTreeMap<usize, SidecarEntry>,
}

impl AttributeVectors {
    pub fn encode(kg: &KnowledgeGraph, numeric: &NumericEncoder, text: &TextEmbedder) -> Self {
        let n = kg.num_entities();
        let (nw, tw) = (numeric.width, text.width());
        let mut num = Vec::with_capacity(n * nw);
        let mut txt = Vec::with_capacity(n * tw);
        for e in kg.entities() {
            num.extend(numeric.encode_entity(e.kind, &e.payload));
            match &e.payload {
                AttributePayload::Text(s) => txt.extend(text.embed(s)),
                _ => txt.extend(std::iter::repeat(0.0).take(tw)),
            }
        }
        Self {
            numeric: Tensor::matrix(n, nw, num).expect("row-major by construction"),
            text: Tensor::matrix(n, tw, txt).expect("row-major by construction"),
        }
    }

    pub fn num_entities(&self) -> usize {
        self.numeric.rows()
    }

    pub fn numeric_width(&self) -> usize {
        self.numeric.row_width()
    }

    pub fn text_width(&self) -> usize {
        self.text.row_width()
    }

    /// Copy with the disabled modalities zeroed out.
    pub fn with_literals(&self, use_numeric: bool, use_text: bool) -> Self {
        let zero = |t: &Tensor| Tensor::zeros(t.shape());
        Self {
            numeric: if use_numeric { self.numeric.clone() } else { zero(&self.numeric) },
            text: if use_text { self.text.clone() } else { zero(&self.text) },
        }
    }

    /// Rows reordered so that new row `i` is old row `order[i]`.
    pub fn permuted(&self, order: &[usize]) -> Self {
        let pick = |t: &Tensor| {
            let data = order.iter().flat_map(|&i| t.row(i).to_vec()).collect();
            Tensor::matrix(order.len(), t.row_width(), data).expect("same width")
        };
        Self { numeric: pick(&self.numeric), text: pick(&self.text) }
    }

    pub fn to_json(&self) -> Result<String> {
        let mut vectors = BTreeMap::new();
        for i in 0..self.num_entities() {
            let (nr, tr) = (self.numeric.row(i), self.text.row(i));
            let nonzero = |r: &[f64]| r.iter().any(|v| *v != 0.0);
            if nonzero(nr) || nonzero(tr) {
                vectors.insert(
                    i,
                    SidecarEntry {
                        numeric: nonzero(nr).then(|| nr.to_vec()),
                        text: nonzero(tr).then(|| tr.to_vec()),
                    },
                );
            }
        }
        let doc = Sidecar {
            entities: self.num_entities(),
            numeric_width: self.numeric_width(),
            text_width: self.text_width(),
            vectors,
        };
        Ok(serde_json::to_string(&doc)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: Sidecar = serde_json::from_str(text)?;
        let mut numeric = Tensor::zeros(&[doc.entities, doc.numeric_width]);
        let mut txt = Tensor::zeros(&[doc.entities, doc.text_width]);
        for (i, entry) in doc.vectors {
            if i >= doc.entities {
                return Err(Error::Parse(format!("attribute row {i} beyond {} entities", doc.entities)));
            }
            let put = |t: &mut Tensor, v: Option<Vec<f64>>, w: usize| -> Result<()> {
                if let Some(v) = v {
                    if v.len() != w {
                        return Err(Error::Parse(format!("attribute row {i} has width {}, expected {w}", v.len())));
                    }
                    t.data_mut()[i * w..(i + 1) * w].copy_from_slice(&v);
                }
                Ok(())
            };
            put(&mut numeric, entry.numeric, doc.numeric_width)?;
            put(&mut txt, entry.text, doc.text_width)?;
        }
        Ok(Self { numeric, text: txt })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }
}

/// Fits min-max statistics on the ages and weights of the given records only.
pub fn fit_numeric_on_records(kg: &KnowledgeGraph, records: &[EntityId], width: usize) -> NumericEncoder {
    let mut ages = Vec::new();
    let mut weights = Vec::new();
    for &m in records {
        for &ti in kg.neighborhood(m) {
            let t = kg.triples()[ti];
            if t.head != m {
                continue;
            }
            let tail = kg.entity(t.tail);
            let AttributePayload::Numeric(v) = tail.payload else { continue };
            if v == MISSING_NUMERIC {
                continue;
            }
            match (t.relation, tail.kind) {
                (RelationKind::RecordAge, EntityKind::Age) => ages.push(v),
                (RelationKind::RecordWeight, EntityKind::Weight) => weights.push(v),
                _ => {}
            }
        }
    }
    NumericEncoder::fit(ages, weights, width)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{build_kg, EmrRecord};

    fn kg() -> KnowledgeGraph {
        let r = |id: &str, age: f64, w: Option<f64>| EmrRecord {
            record_id: id.into(),
            animal_id: format!("A{id}"),
            age: Some(age),
            weight: w,
            symptom: Some("vomiting".into()),
            disease: Some("gastritis".into()),
            species: Some("Canine".into()),
            ..Default::default()
        };
        build_kg(&[r("1", 2.0, Some(3.0)), r("2", 10.0, None), r("3", 6.0, Some(9.0))]).unwrap()
    }

    #[test]
    fn non_attribute_kinds_are_zero() {
        let kg = kg();
        let enc = fit_numeric_on_records(&kg, kg.entities_of(EntityKind::MedicalRecord), 8);
        let attrs = AttributeVectors::encode(&kg, &enc, &TextEmbedder::new(16));
        for e in kg.entities() {
            let i = e.id.index();
            let zero_num = attrs.numeric.row(i).iter().all(|v| *v == 0.0);
            let zero_txt = attrs.text.row(i).iter().all(|v| *v == 0.0);
            match e.kind {
                // the youngest age scales to 0, so only the text side is pinned
                EntityKind::Age | EntityKind::Weight => assert!(zero_txt, "{e:?}"),
                EntityKind::Symptom | EntityKind::Disease => assert!(zero_num && !zero_txt, "{e:?}"),
                _ => assert!(zero_num && zero_txt, "{e:?}"),
            }
        }
    }

    #[test]
    fn stats_come_from_given_records_only() {
        let kg = kg();
        let first = kg.find(EntityKind::MedicalRecord, "1").unwrap();
        let enc = fit_numeric_on_records(&kg, &[first], 8);
        assert_eq!(enc.age.unwrap().min, 2.0);
        assert_eq!(enc.age.unwrap().max, 2.0);
    }

    #[test]
    fn sidecar_round_trip_and_literal_masks() {
        let kg = kg();
        let enc = fit_numeric_on_records(&kg, kg.entities_of(EntityKind::MedicalRecord), 8);
        let attrs = AttributeVectors::encode(&kg, &enc, &TextEmbedder::new(16));
        let back = AttributeVectors::from_json(&attrs.to_json().unwrap()).unwrap();
        assert_eq!(back, attrs);
        let none = attrs.with_literals(false, false);
        assert!(none.numeric.data().iter().chain(none.text.data()).all(|v| *v == 0.0));
        let text_only = attrs.with_literals(false, true);
        assert_eq!(text_only.text, attrs.text);
    }
}
