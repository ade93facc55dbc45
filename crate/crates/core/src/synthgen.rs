//! Synthetic veterinary record corpora with planted disease structure.
//!
//! Each disease owns a disjoint set of signature symptom phrases, an age
//! band, a weight band, and pools of prescriptions and treatments. The
//! signal mode decides where a record's disease can be read from:
//!
//! * `literal_dependent`: symptom text is drawn from the disease's
//!   signature and age/weight from its bands, while every structural field
//!   (animal, breed, prescription, treatment) is independent of the disease.
//!   Every symptom text is unique, so no symptom node is shared between
//!   records.
//! * `structural_only`: the disease follows from the graph (each animal has
//!   a chronic condition, prescriptions and treatments come from the
//!   disease's pools), while symptom text and numbers are drawn independently
//!   of the disease.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::EmrRecord;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignalMode {
    StructuralOnly,
    LiteralDependent,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub n_animals: usize,
    /// Inclusive range of records per animal.
    pub records_per_animal: (usize, usize),
    pub n_diseases: usize,
    pub n_symptom_vocab: usize,
    pub seed: u64,
    pub signal_mode: SignalMode,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_animals: 1000,
            records_per_animal: (1, 3),
            n_diseases: 10,
            n_symptom_vocab: 60,
            seed: 0,
            signal_mode: SignalMode::LiteralDependent,
        }
    }
}

/// Signature phrases drawn per record, and the chance that each is
/// replaced by a phrase from the whole vocabulary.
pub const PHRASES_PER_RECORD: usize = 3;
pub const PHRASE_NOISE: f64 = 0.1;
/// Chance that a structural field follows the disease in structural mode.
pub const STRUCTURE_FIDELITY: f64 = 0.85;
const POOL_SIZE: usize = 3;
const MAX_AGE: f64 = 16.0;
const MAX_DAYS: u32 = 60;

const SYLLABLES: [&str; 40] = [
    "ka", "lo", "mir", "ven", "sta", "dru", "pel", "nox", "ri", "tam", "qua", "zel", "bo", "fen", "gar", "hul",
    "is", "jor", "kep", "lum", "mo", "nar", "os", "pri", "ru", "sil", "tor", "ul", "vak", "wen", "xi", "yor",
    "zum", "ach", "bri", "cor", "del", "eth", "fro", "gli",
];

const SPECIES_BREEDS: [(&str, [&str; 4]); 2] = [
    ("Canine", ["Poodle", "Beagle", "Maltese", "Shiba"]),
    ("Feline", ["Persian", "Siamese", "Bengal", "Ragdoll"]),
];
const GENDERS: [&str; 3] = ["Male", "Female", "Neutered"];
const CATEGORIES: [&str; 4] = ["Digestive", "Dermatologic", "Respiratory", "Musculoskeletal"];
const COMMENTS: [&str; 4] = ["routine visit", "follow-up visit", "referred case", "emergency visit"];

/// The planted ground truth behind a corpus.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiseaseProfile {
    pub name: String,
    pub category: String,
    pub signature: Vec<String>,
    pub age_band: (f64, f64),
    pub weight_band: (f64, f64),
    pub prescriptions: Vec<(String, String)>,
    pub treatments: Vec<(String, String)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthCorpus {
    pub records: Vec<EmrRecord>,
    pub diseases: Vec<DiseaseProfile>,
    pub vocabulary: Vec<String>,
}

fn word(rng: &mut ChaCha8Rng, syllables: usize) -> String {
    (0..syllables).map(|_| *SYLLABLES.choose(rng).expect("nonempty")).collect()
}

/// `n` distinct strings produced by `make`.
fn distinct(n: usize, rng: &mut ChaCha8Rng, mut make: impl FnMut(&mut ChaCha8Rng) -> String) -> Vec<String> {
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let s = make(rng);
        if seen.insert(s.clone()) {
            out.push(s);
        }
    }
    out
}

fn round2(v: f64) -> f64 {
    (v * 100.0).round() / 100.0
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.records_per_animal;
        if self.n_animals == 0 || self.n_diseases == 0 || self.n_symptom_vocab == 0 || lo == 0 || hi < lo {
            return Err(Error::Config(format!("invalid synthetic corpus sizes in {self:?}")));
        }
        if self.n_symptom_vocab < self.n_diseases {
            return Err(Error::Config(format!(
                "symptom vocabulary of {} cannot give {} diseases a signature each",
                self.n_symptom_vocab, self.n_diseases
            )));
        }
        Ok(())
    }
}

pub fn generate(cfg: &SynthConfig) -> Result<SynthCorpus> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let vocabulary = distinct(cfg.n_symptom_vocab, &mut rng, |r| format!("{} {}", word(r, 2), word(r, 3)));
    let per = cfg.n_symptom_vocab / cfg.n_diseases;
    let n_pool = cfg.n_diseases * POOL_SIZE;
    let rx_names = distinct(n_pool, &mut rng, |r| format!("{} tablets", word(r, 3)));
    let tx_names = distinct(n_pool, &mut rng, |r| format!("{} therapy", word(r, 3)));
    let disease_names = distinct(cfg.n_diseases, &mut rng, |r| format!("{} syndrome", word(r, 3)));

    let diseases: Vec<DiseaseProfile> = (0..cfg.n_diseases)
        .map(|d| {
            let age_lo = rng.gen_range(0.0..MAX_AGE - 4.0);
            let weight_lo = rng.gen_range(1.0..30.0);
            let pool = |names: &[String], prefix: &str| {
                (0..POOL_SIZE)
                    .map(|j| {
                        let i = d * POOL_SIZE + j;
                        (names[i].clone(), format!("{prefix}{i:03}"))
                    })
                    .collect()
            };
            DiseaseProfile {
                name: disease_names[d].clone(),
                category: CATEGORIES[d % CATEGORIES.len()].to_string(),
                signature: vocabulary[d * per..(d + 1) * per].to_vec(),
                age_band: (age_lo, age_lo + 4.0),
                weight_band: (weight_lo, weight_lo + 8.0),
                prescriptions: pool(&rx_names, "DRG"),
                treatments: pool(&tx_names, "TRT"),
            }
        })
        .collect();
    let all_rx: Vec<&(String, String)> = diseases.iter().flat_map(|d| &d.prescriptions).collect();
    let all_tx: Vec<&(String, String)> = diseases.iter().flat_map(|d| &d.treatments).collect();

    let structural = cfg.signal_mode == SignalMode::StructuralOnly;
    let mut records = Vec::new();
    let mut symptom_texts = HashSet::new();
    for a in 0..cfg.n_animals {
        let animal_id = format!("A{a:05}");
        let (species, breeds) = SPECIES_BREEDS[rng.gen_range(0..SPECIES_BREEDS.len())];
        let breed = breeds[rng.gen_range(0..breeds.len())];
        let gender = GENDERS[rng.gen_range(0..GENDERS.len())];
        let chronic = rng.gen_range(0..cfg.n_diseases);
        let n_records = rng.gen_range(cfg.records_per_animal.0..=cfg.records_per_animal.1);
        for _ in 0..n_records {
            let follows = |rng: &mut ChaCha8Rng| structural && rng.gen_bool(STRUCTURE_FIDELITY);
            let d = if follows(&mut rng) { chronic } else { rng.gen_range(0..cfg.n_diseases) };
            let prof = &diseases[d];

            let mut phrases: Vec<&str> = if structural {
                (0..PHRASES_PER_RECORD).map(|_| vocabulary.choose(&mut rng).expect("nonempty").as_str()).collect()
            } else {
                prof.signature
                    .choose_multiple(&mut rng, PHRASES_PER_RECORD.min(prof.signature.len()))
                    .map(|p| {
                        if rng.gen_bool(PHRASE_NOISE) {
                            vocabulary.choose(&mut rng).expect("nonempty").as_str()
                        } else {
                            p.as_str()
                        }
                    })
                    .collect()
            };
            // phrase order and duration make the text unique without
            // changing its bag of n-grams much
            let symptom = loop {
                phrases.shuffle(&mut rng);
                let text = format!("{} for {} days", phrases.join(", "), rng.gen_range(1..=MAX_DAYS));
                if symptom_texts.insert(text.clone()) {
                    break text;
                }
            };

            let (age, weight) = if structural {
                (rng.gen_range(0.0..MAX_AGE), rng.gen_range(1.0..38.0))
            } else {
                (rng.gen_range(prof.age_band.0..prof.age_band.1), rng.gen_range(prof.weight_band.0..prof.weight_band.1))
            };
            let rx = if follows(&mut rng) { prof.prescriptions.choose(&mut rng) } else { all_rx.choose(&mut rng).copied() }
                .expect("nonempty");
            let tx = if follows(&mut rng) { prof.treatments.choose(&mut rng) } else { all_tx.choose(&mut rng).copied() }
                .expect("nonempty");

            records.push(EmrRecord {
                record_id: format!("R{:06}", records.len()),
                animal_id: animal_id.clone(),
                species: Some(species.to_string()),
                breed: Some(breed.to_string()),
                gender: Some(gender.to_string()),
                age: Some(round2(age)),
                weight: if rng.gen_bool(0.05) { None } else { Some(round2(weight)) },
                symptom: Some(symptom),
                disease: Some(prof.name.clone()),
                disease_category: Some(prof.category.clone()),
                prescription: Some(rx.0.clone()),
                drug_code: Some(rx.1.clone()),
                treatment: Some(tx.0.clone()),
                treatment_code: Some(tx.1.clone()),
                comment: Some(COMMENTS.choose(&mut rng).expect("nonempty").to_string()),
            });
        }
    }
    Ok(SynthCorpus { records, diseases, vocabulary })
}

/// Predicts the disease whose signature phrases occur most often in the
/// symptom text (ties go to the earlier disease).
pub fn phrase_oracle(diseases: &[DiseaseProfile], symptom: &str) -> usize {
    let mut best = (0, 0);
    for (i, d) in diseases.iter().enumerate() {
        let hits = d.signature.iter().filter(|p| symptom.contains(p.as_str())).count();
        if hits > best.1 {
            best = (i, hits);
        }
    }
    best.0
}

/// Share of records whose disease the phrase oracle recovers.
pub fn phrase_oracle_accuracy(corpus: &SynthCorpus) -> f64 {
    let hits = corpus
        .records
        .iter()
        .filter(|r| {
            let guess = phrase_oracle(&corpus.diseases, r.symptom.as_deref().unwrap_or(""));
            r.disease.as_deref() == Some(corpus.diseases[guess].name.as_str())
        })
        .count();
    hits as f64 / corpus.records.len() as f64
}
