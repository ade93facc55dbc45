use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Share of malformed rows above which parsing aborts.
pub const MAX_MALFORMED_FRACTION: f64 = 0.10;

pub const FIELDS: [&str; 15] = [
    "record_id",
    "animal_id",
    "species",
    "breed",
    "gender",
    "age",
    "weight",
    "symptom",
    "disease",
    "disease_category",
    "prescription",
    "drug_code",
    "treatment",
    "treatment_code",
    "comment",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RecordFormat {
    Csv,
    Jsonl,
}

impl RecordFormat {
    /// Guesses the format from a file extension (`.csv`, `.jsonl`/`.json`).
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "csv" => Some(RecordFormat::Csv),
            "jsonl" | "json" | "ndjson" => Some(RecordFormat::Jsonl),
            _ => None,
        }
    }
}

/// One visit record. Everything but the two ids is optional.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EmrRecord {
    pub record_id: String,
    pub animal_id: String,
    pub species: Option<String>,
    pub breed: Option<String>,
    pub gender: Option<String>,
    /// Years.
    pub age: Option<f64>,
    /// Kilograms.
    pub weight: Option<f64>,
    pub symptom: Option<String>,
    pub disease: Option<String>,
    pub disease_category: Option<String>,
    pub prescription: Option<String>,
    pub drug_code: Option<String>,
    pub treatment: Option<String>,
    pub treatment_code: Option<String>,
    pub comment: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum AgeGroup {
    Infancy,
    Adult,
    OldAge,
    SuperAged,
}

impl AgeGroup {
    pub fn of(age: f64) -> Self {
        if age < 1.0 {
            AgeGroup::Infancy
        } else if age < 7.0 {
            AgeGroup::Adult
        } else if age < 13.0 {
            AgeGroup::OldAge
        } else {
            AgeGroup::SuperAged
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            AgeGroup::Infancy => "Infancy",
            AgeGroup::Adult => "Adult",
            AgeGroup::OldAge => "Old-age",
            AgeGroup::SuperAged => "Super-aged",
        }
    }
}

impl EmrRecord {
    pub fn age_group(&self) -> Option<AgeGroup> {
        self.age.map(AgeGroup::of)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RowError {
    /// 1-based data row (CSV) or line (JSONL) number.
    pub row: usize,
    pub message: String,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct ParseReport {
    pub records: Vec<EmrRecord>,
    pub errors: Vec<RowError>,
}

impl ParseReport {
    pub fn total_rows(&self) -> usize {
        self.records.len() + self.errors.len()
    }
}

fn clean(v: Option<String>) -> Option<String> {
    v.map(|s| s.trim().to_string()).filter(|s| !s.is_empty())
}

fn parse_number(field: &str, raw: Option<String>) -> std::result::Result<Option<f64>, String> {
    match clean(raw) {
        None => Ok(None),
        Some(s) => s
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .map(Some)
            .ok_or_else(|| format!("{field} `{s}` is not a number")),
    }
}

/// Turns loosely typed field values into a validated record.
fn validate(mut get: impl FnMut(&str) -> Option<String>) -> std::result::Result<EmrRecord, String> {
    let record_id = clean(get("record_id")).ok_or("missing record_id")?;
    let animal_id = clean(get("animal_id")).ok_or("missing animal_id")?;
    let age = parse_number("age", get("age"))?;
    let weight = parse_number("weight", get("weight"))?;
    if let Some(a) = age.filter(|a| *a < 0.0) {
        return Err(format!("age {a} is negative"));
    }
    if let Some(w) = weight.filter(|w| *w <= 0.0) {
        return Err(format!("weight {w} is not positive"));
    }
    Ok(EmrRecord {
        record_id,
        animal_id,
        species: clean(get("species")),
        breed: clean(get("breed")),
        gender: clean(get("gender")),
        age,
        weight,
        symptom: clean(get("symptom")),
        disease: clean(get("disease")),
        disease_category: clean(get("disease_category")),
        prescription: clean(get("prescription")),
        drug_code: clean(get("drug_code")),
        treatment: clean(get("treatment")),
        treatment_code: clean(get("treatment_code")),
        comment: clean(get("comment")),
    })
}

fn check_columns<'a>(columns: impl Iterator<Item = &'a str>) -> Result<()> {
    let mut seen = Vec::new();
    for c in columns {
        if !FIELDS.contains(&c) {
            return Err(Error::Parse(format!("unknown column `{c}`")));
        }
        seen.push(c);
    }
    for required in ["record_id", "animal_id"] {
        if !seen.contains(&required) {
            return Err(Error::Parse(format!("missing required column `{required}`")));
        }
    }
    Ok(())
}

fn parse_csv(path: &Path) -> Result<ParseReport> {
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .from_path(path)
        .map_err(|e| csv_io(path, e))?;
    let headers = reader.headers().map_err(|e| csv_io(path, e))?.clone();
    check_columns(headers.iter().map(str::trim))?;
    let mut report = ParseReport::default();
    for (i, row) in reader.records().enumerate() {
        let row_no = i + 1;
        let row = match row {
            Ok(r) => r,
            Err(e) => {
                report.errors.push(RowError { row: row_no, message: e.to_string() });
                continue;
            }
        };
        if row.len() != headers.len() {
            report.errors.push(RowError {
                row: row_no,
                message: format!("expected {} fields, found {}", headers.len(), row.len()),
            });
            continue;
        }
        let get = |name: &str| headers.iter().position(|h| h.trim() == name).and_then(|i| row.get(i)).map(str::to_string);
        match validate(get) {
            Ok(r) => report.records.push(r),
            Err(message) => report.errors.push(RowError { row: row_no, message }),
        }
    }
    Ok(report)
}

fn csv_io(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Parse(format!("{}: {other:?}", path.display())),
    }
}

fn parse_jsonl(path: &Path) -> Result<ParseReport> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut report = ParseReport::default();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let row_no = i + 1;
        let obj = match serde_json::from_str::<serde_json::Map<String, serde_json::Value>>(&line) {
            Ok(o) => o,
            Err(e) => {
                report.errors.push(RowError { row: row_no, message: e.to_string() });
                continue;
            }
        };
        if let Some(unknown) = obj.keys().find(|k| !FIELDS.contains(&k.as_str())) {
            report.errors.push(RowError { row: row_no, message: format!("unknown key `{unknown}`") });
            continue;
        }
        let get = |name: &str| match obj.get(name) {
            None | Some(serde_json::Value::Null) => None,
            Some(serde_json::Value::String(s)) => Some(s.clone()),
            Some(other) => Some(other.to_string()),
        };
        match validate(get) {
            Ok(r) => report.records.push(r),
            Err(message) => report.errors.push(RowError { row: row_no, message }),
        }
    }
    Ok(report)
}

/// Reads a record file. Malformed rows are listed in the report; more than
/// [`MAX_MALFORMED_FRACTION`] of them aborts with a parse error.
pub fn parse_records(path: &Path, format: RecordFormat) -> Result<ParseReport> {
    let report = match format {
        RecordFormat::Csv => parse_csv(path)?,
        RecordFormat::Jsonl => parse_jsonl(path)?,
    };
    let total = report.total_rows();
    if total > 0 && report.errors.len() as f64 > MAX_MALFORMED_FRACTION * total as f64 {
        let first: Vec<String> = report.errors.iter().take(5).map(|e| format!("row {}: {}", e.row, e.message)).collect();
        return Err(Error::Parse(format!(
            "{} of {total} rows malformed in {} (first: {})",
            report.errors.len(),
            path.display(),
            first.join("; ")
        )));
    }
    Ok(report)
}

/// Writes records in the same layout [`parse_records`] reads.
pub fn write_records(path: &Path, records: &[EmrRecord], format: RecordFormat) -> Result<()> {
    let io = |e| Error::io(path, e);
    match format {
        RecordFormat::Csv => {
            let mut w = csv::Writer::from_path(path).map_err(|e| csv_io(path, e))?;
            for r in records {
                w.serialize(r).map_err(|e| csv_io(path, e))?;
            }
            w.flush().map_err(io)?;
        }
        RecordFormat::Jsonl => {
            let mut w = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
            for r in records {
                serde_json::to_writer(&mut w, r)?;
                w.write_all(b"\n").map_err(io)?;
            }
            w.flush().map_err(io)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &tempfile::TempDir, name: &str, body: &str) -> std::path::PathBuf {
        let p = dir.path().join(name);
        std::fs::write(&p, body).unwrap();
        p
    }

    const HEADER: &str = "record_id,animal_id,species,breed,gender,age,weight,symptom,disease,disease_category,prescription,drug_code,treatment,treatment_code,comment\n";

    #[test]
    fn three_valid_rows() {
        let dir = tempfile::tempdir().unwrap();
        let body = format!(
            "{HEADER}M1,A1,Canine,Poodle,spayed female,14,2.5,Vomiting,gastritis,digestive,1 tab,ANB065,injection,A022,fine\n\
             M2,A1,Canine,Poodle,spayed female,14,,cough,kennel cough,respiratory,,,,,\n\
             M3,A2,Feline,,,3,4.1,,,,,,,,\n"
        );
        let p = write(&dir, "r.csv", &body);
        let report = parse_records(&p, RecordFormat::Csv).unwrap();
        assert_eq!(report.records.len(), 3);
        assert!(report.errors.is_empty());
        assert_eq!(report.records[1].weight, None);
        assert_eq!(report.records[0].age_group(), Some(AgeGroup::SuperAged));
    }

    #[test]
    fn bad_age_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let mut body = HEADER.to_string();
        for i in 0..20 {
            let age = if i == 7 { "abc".to_string() } else { i.to_string() };
            body.push_str(&format!("M{i},A{i},,,,{age},,,,,,,,,\n"));
        }
        let p = write(&dir, "r.csv", &body);
        let report = parse_records(&p, RecordFormat::Csv).unwrap();
        assert_eq!(report.records.len(), 19);
        assert_eq!(report.errors.len(), 1);
        assert_eq!(report.errors[0].row, 8);
        assert!(report.errors[0].message.contains("abc"));
    }

    #[test]
    fn too_many_malformed_rows_abort() {
        let dir = tempfile::tempdir().unwrap();
        let body = format!("{HEADER}M1,A1,,,,abc,,,,,,,,,\nM2,A2,,,,1,,,,,,,,,\n");
        let p = write(&dir, "r.csv", &body);
        assert!(matches!(parse_records(&p, RecordFormat::Csv), Err(Error::Parse(_))));
    }

    #[test]
    fn missing_file_is_io_error() {
        let err = parse_records(Path::new("/nonexistent/records.csv"), RecordFormat::Csv).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
        let err = parse_records(Path::new("/nonexistent/records.jsonl"), RecordFormat::Jsonl).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }

    #[test]
    fn jsonl_accepts_numbers_and_strings() {
        let dir = tempfile::tempdir().unwrap();
        let body = "{\"record_id\":\"M1\",\"animal_id\":\"A1\",\"age\":4,\"weight\":\"3.5\"}\n\n\
                    {\"record_id\":\"M2\",\"animal_id\":\"A1\",\"age\":null}\n";
        let p = write(&dir, "r.jsonl", body);
        let report = parse_records(&p, RecordFormat::Jsonl).unwrap();
        assert_eq!(report.records.len(), 2);
        assert_eq!(report.records[0].age, Some(4.0));
        assert_eq!(report.records[0].weight, Some(3.5));
        assert_eq!(report.records[1].age, None);
    }

    #[test]
    fn write_then_parse_preserves_records() {
        let dir = tempfile::tempdir().unwrap();
        let recs = vec![
            EmrRecord { record_id: "M1".into(), animal_id: "A1".into(), age: Some(0.5), symptom: Some("a, b".into()), ..Default::default() },
            EmrRecord { record_id: "M2".into(), animal_id: "A2".into(), weight: Some(12.25), ..Default::default() },
        ];
        for (name, format) in [("x.csv", RecordFormat::Csv), ("x.jsonl", RecordFormat::Jsonl)] {
            let p = dir.path().join(name);
            write_records(&p, &recs, format).unwrap();
            assert_eq!(parse_records(&p, format).unwrap().records, recs);
        }
    }

    #[test]
    fn age_bands() {
        assert_eq!(AgeGroup::of(0.5), AgeGroup::Infancy);
        assert_eq!(AgeGroup::of(1.0), AgeGroup::Adult);
        assert_eq!(AgeGroup::of(6.9), AgeGroup::Adult);
        assert_eq!(AgeGroup::of(7.0), AgeGroup::OldAge);
        assert_eq!(AgeGroup::of(12.5), AgeGroup::OldAge);
        assert_eq!(AgeGroup::of(13.0), AgeGroup::SuperAged);
        assert_eq!(AgeGroup::of(14.0).label(), "Super-aged");
    }
}
