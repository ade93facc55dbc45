use std::fmt;

use serde::{Deserialize, Serialize};

/// The sixteen entity types of the medical record graph.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EntityKind {
    MedicalRecord,
    Animal,
    Species,
    Breed,
    Disease,
    Symptom,
    Drugs,
    Prescription,
    TreatmentCode,
    Treatment,
    Comment,
    Age,
    AgeGroup,
    Gender,
    Weight,
    DiseaseCategory,
}

impl EntityKind {
    pub const ALL: [EntityKind; 16] = [
        EntityKind::MedicalRecord,
        EntityKind::Animal,
        EntityKind::Species,
        EntityKind::Breed,
        EntityKind::Disease,
        EntityKind::Symptom,
        EntityKind::Drugs,
        EntityKind::Prescription,
        EntityKind::TreatmentCode,
        EntityKind::Treatment,
        EntityKind::Comment,
        EntityKind::Age,
        EntityKind::AgeGroup,
        EntityKind::Gender,
        EntityKind::Weight,
        EntityKind::DiseaseCategory,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    /// Kinds whose entities may carry a text literal.
    pub fn carries_text(self) -> bool {
        matches!(
            self,
            EntityKind::Disease
                | EntityKind::Symptom
                | EntityKind::Prescription
                | EntityKind::Treatment
                | EntityKind::Comment
        )
    }

    /// Kinds whose entities may carry a numeric literal.
    pub fn carries_numeric(self) -> bool {
        matches!(self, EntityKind::Age | EntityKind::Weight)
    }
}

impl fmt::Display for EntityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Typed, directed relations. Each one connects exactly one pair of kinds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RelationKind {
    #[serde(rename = "r_A")]
    RecordAnimal,
    #[serde(rename = "r_D")]
    RecordDisease,
    #[serde(rename = "r_Y")]
    RecordSymptom,
    #[serde(rename = "r_P")]
    RecordPrescription,
    #[serde(rename = "r_T")]
    RecordTreatment,
    #[serde(rename = "r_C")]
    RecordComment,
    #[serde(rename = "r_E")]
    RecordAge,
    #[serde(rename = "r_U")]
    RecordAgeGroup,
    #[serde(rename = "r_W")]
    RecordWeight,
    #[serde(rename = "r_G")]
    RecordGender,
    #[serde(rename = "r_B")]
    AnimalBreed,
    #[serde(rename = "r_S")]
    AnimalSpecies,
    #[serde(rename = "r_I")]
    DiseaseCategory,
    #[serde(rename = "r_R")]
    PrescriptionDrug,
    #[serde(rename = "r_O")]
    TreatmentCode,
}

impl RelationKind {
    /// Every relation in a fixed order; the order defines relation indices.
    pub const ALL: [RelationKind; 15] = [
        RelationKind::RecordAnimal,
        RelationKind::RecordDisease,
        RelationKind::RecordSymptom,
        RelationKind::RecordPrescription,
        RelationKind::RecordTreatment,
        RelationKind::RecordComment,
        RelationKind::RecordAge,
        RelationKind::RecordAgeGroup,
        RelationKind::RecordWeight,
        RelationKind::RecordGender,
        RelationKind::AnimalBreed,
        RelationKind::AnimalSpecies,
        RelationKind::DiseaseCategory,
        RelationKind::PrescriptionDrug,
        RelationKind::TreatmentCode,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    /// `(head kind, tail kind)` accepted by this relation.
    pub fn signature(self) -> (EntityKind, EntityKind) {
        use EntityKind as E;
        match self {
            RelationKind::RecordAnimal => (E::MedicalRecord, E::Animal),
            RelationKind::RecordDisease => (E::MedicalRecord, E::Disease),
            RelationKind::RecordSymptom => (E::MedicalRecord, E::Symptom),
            RelationKind::RecordPrescription => (E::MedicalRecord, E::Prescription),
            RelationKind::RecordTreatment => (E::MedicalRecord, E::Treatment),
            RelationKind::RecordComment => (E::MedicalRecord, E::Comment),
            RelationKind::RecordAge => (E::MedicalRecord, E::Age),
            RelationKind::RecordAgeGroup => (E::MedicalRecord, E::AgeGroup),
            RelationKind::RecordWeight => (E::MedicalRecord, E::Weight),
            RelationKind::RecordGender => (E::MedicalRecord, E::Gender),
            RelationKind::AnimalBreed => (E::Animal, E::Breed),
            RelationKind::AnimalSpecies => (E::Animal, E::Species),
            RelationKind::DiseaseCategory => (E::Disease, E::DiseaseCategory),
            RelationKind::PrescriptionDrug => (E::Prescription, E::Drugs),
            RelationKind::TreatmentCode => (E::Treatment, E::TreatmentCode),
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            RelationKind::RecordAnimal => "r_A",
            RelationKind::RecordDisease => "r_D",
            RelationKind::RecordSymptom => "r_Y",
            RelationKind::RecordPrescription => "r_P",
            RelationKind::RecordTreatment => "r_T",
            RelationKind::RecordComment => "r_C",
            RelationKind::RecordAge => "r_E",
            RelationKind::RecordAgeGroup => "r_U",
            RelationKind::RecordWeight => "r_W",
            RelationKind::RecordGender => "r_G",
            RelationKind::AnimalBreed => "r_B",
            RelationKind::AnimalSpecies => "r_S",
            RelationKind::DiseaseCategory => "r_I",
            RelationKind::PrescriptionDrug => "r_R",
            RelationKind::TreatmentCode => "r_O",
        }
    }
}

impl fmt::Display for RelationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

/// Which way a stored triple is traversed during message passing.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    Forward,
    Inverse,
}

/// A relation together with its traversal direction. Forward and inverse
/// directions are distinct relation types for the propagation layers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct DirectedRelation {
    pub relation: RelationKind,
    pub direction: Direction,
}

impl DirectedRelation {
    /// Number of directed relation types.
    pub const COUNT: usize = 2 * RelationKind::ALL.len();

    pub fn index(self) -> usize {
        match self.direction {
            Direction::Forward => self.relation.index(),
            Direction::Inverse => RelationKind::ALL.len() + self.relation.index(),
        }
    }
}

/// Literal attached to an entity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "value", rename_all = "snake_case")]
pub enum AttributePayload {
    None,
    Numeric(f64),
    Text(String),
}

/// Stand-in numeric value for a missing measurement.
pub const MISSING_NUMERIC: f64 = -1.0;
