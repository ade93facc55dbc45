use super::records::EmrRecord;
use crate::error::{Error, Result};
use crate::kg::{AttributePayload, EntityId, EntityKind, KnowledgeGraph, RelationKind, MISSING_NUMERIC};

/// Entity name used for a missing age or weight.
pub const MISSING_NAME: &str = "missing";

fn number_name(v: f64) -> String {
    format!("{v}")
}

/// Builds the record graph: one MedicalRecord per record, one Animal per
/// distinct animal id, and shared (deduplicated) entities for everything else.
pub fn build_kg(records: &[EmrRecord]) -> Result<KnowledgeGraph> {
    if records.is_empty() {
        return Err(Error::Contract("cannot build a graph from zero records".into()));
    }
    let mut kg = KnowledgeGraph::new();
    for rec in records {
        if kg.find(EntityKind::MedicalRecord, &rec.record_id).is_some() {
            return Err(Error::Schema(format!("duplicate record_id `{}`", rec.record_id)));
        }
        let m = kg.add_entity(EntityKind::MedicalRecord, &rec.record_id, AttributePayload::None)?;
        let animal = kg.add_entity(EntityKind::Animal, &rec.animal_id, AttributePayload::None)?;
        kg.add_triple(m, RelationKind::RecordAnimal, animal)?;

        let link = |kg: &mut KnowledgeGraph, head: EntityId, rel: RelationKind, name: &Option<String>, text: bool| -> Result<Option<EntityId>> {
            let Some(name) = name else { return Ok(None) };
            let kind = rel.signature().1;
            let payload = if text { AttributePayload::Text(name.clone()) } else { AttributePayload::None };
            let id = kg.add_entity(kind, name, payload)?;
            kg.add_triple(head, rel, id)?;
            Ok(Some(id))
        };

        link(&mut kg, animal, RelationKind::AnimalSpecies, &rec.species, false)?;
        link(&mut kg, animal, RelationKind::AnimalBreed, &rec.breed, false)?;
        link(&mut kg, m, RelationKind::RecordGender, &rec.gender, false)?;
        link(&mut kg, m, RelationKind::RecordSymptom, &rec.symptom, true)?;
        link(&mut kg, m, RelationKind::RecordComment, &rec.comment, true)?;
        if let Some(d) = link(&mut kg, m, RelationKind::RecordDisease, &rec.disease, true)? {
            link(&mut kg, d, RelationKind::DiseaseCategory, &rec.disease_category, false)?;
        }
        if let Some(p) = link(&mut kg, m, RelationKind::RecordPrescription, &rec.prescription, true)? {
            link(&mut kg, p, RelationKind::PrescriptionDrug, &rec.drug_code, false)?;
        }
        if let Some(t) = link(&mut kg, m, RelationKind::RecordTreatment, &rec.treatment, true)? {
            link(&mut kg, t, RelationKind::TreatmentCode, &rec.treatment_code, false)?;
        }

        let (age_name, age_value) = match rec.age {
            Some(a) => (number_name(a), a),
            None => (MISSING_NAME.to_string(), MISSING_NUMERIC),
        };
        let age = kg.add_entity(EntityKind::Age, &age_name, AttributePayload::Numeric(age_value))?;
        kg.add_triple(m, RelationKind::RecordAge, age)?;
        if let Some(group) = rec.age_group() {
            let g = kg.add_entity(EntityKind::AgeGroup, group.label(), AttributePayload::None)?;
            kg.add_triple(m, RelationKind::RecordAgeGroup, g)?;
        }
        let (weight_name, weight_value) = match rec.weight {
            Some(w) => (number_name(w), w),
            None => (MISSING_NAME.to_string(), MISSING_NUMERIC),
        };
        let weight = kg.add_entity(EntityKind::Weight, &weight_name, AttributePayload::Numeric(weight_value))?;
        kg.add_triple(m, RelationKind::RecordWeight, weight)?;
    }
    Ok(kg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(id: &str, animal: &str) -> EmrRecord {
        EmrRecord { record_id: id.into(), animal_id: animal.into(), ..Default::default() }
    }

    #[test]
    fn same_animal_two_records() {
        let kg = build_kg(&[rec("M1", "A1"), rec("M2", "A1")]).unwrap();
        assert_eq!(kg.entities_of(EntityKind::Animal).len(), 1);
        assert_eq!(kg.entities_of(EntityKind::MedicalRecord).len(), 2);
        assert_eq!(kg.triples_of(RelationKind::RecordAnimal).count(), 2);
    }

    #[test]
    fn age_fourteen_is_super_aged() {
        let r = EmrRecord { age: Some(14.0), ..rec("M1", "A1") };
        let kg = build_kg(&[r]).unwrap();
        let g = kg.entities_of(EntityKind::AgeGroup);
        assert_eq!(g.len(), 1);
        assert_eq!(kg.entity(g[0]).name, "Super-aged");
        let age = kg.find(EntityKind::Age, "14").unwrap();
        assert_eq!(kg.entity(age).payload, AttributePayload::Numeric(14.0));
    }

    #[test]
    fn shared_disease_deduplicated() {
        let a = EmrRecord { disease: Some("otitis".into()), disease_category: Some("ear".into()), ..rec("M1", "A1") };
        let b = EmrRecord { disease: Some("otitis".into()), disease_category: Some("ear".into()), ..rec("M2", "A2") };
        let kg = build_kg(&[a, b]).unwrap();
        assert_eq!(kg.entities_of(EntityKind::Disease).len(), 1);
        assert_eq!(kg.triples_of(RelationKind::RecordDisease).count(), 2);
        assert_eq!(kg.triples_of(RelationKind::DiseaseCategory).count(), 1);
    }

    #[test]
    fn missing_weight_gets_sentinel_entity() {
        let kg = build_kg(&[rec("M1", "A1")]).unwrap();
        let w = kg.find(EntityKind::Weight, MISSING_NAME).unwrap();
        assert_eq!(kg.entity(w).payload, AttributePayload::Numeric(-1.0));
        assert!(kg.entities_of(EntityKind::AgeGroup).is_empty());
    }

    #[test]
    fn duplicate_record_ids_rejected() {
        assert!(build_kg(&[rec("M1", "A1"), rec("M1", "A2")]).is_err());
        assert!(build_kg(&[]).is_err());
    }
}
