//! Loading, validation, and partitioning of CoT corpora in JSONL form.
//!
//! One record per line with required keys `id`, `group`, `cot_body` and
//! optional keys `preamble`, `summary`, `metadata`. Unknown top-level keys
//! are folded into `metadata` so that foreign corpora survive a round trip.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde_json::{Map, Value};
use thiserror::Error;

/// One chain-of-thought record.
///
/// `preamble` is context-only and may be empty; `cot_body` is the scored
/// reasoning chain and must be non-empty after trimming. `metadata` is
/// opaque: the harness round-trips it without interpreting it.
#[derive(Debug, Clone, PartialEq)]
pub struct CotSample {
    pub id: String,
    pub group: String,
    pub preamble: String,
    pub cot_body: String,
    pub summary: String,
    pub metadata: Map<String, Value>,
}

/// An ordered, validated collection of [`CotSample`]s.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub samples: Vec<CotSample>,
    pub groups: Vec<String>,
    pub source_path: String,
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}:{line}: malformed JSON: {message}")]
    MalformedLine {
        path: String,
        line: usize,
        message: String,
    },
    #[error("{path}:{line}: {source}")]
    InvalidRecord {
        path: String,
        line: usize,
        source: RecordError,
    },
    #[error("{path}: duplicate id \"{id}\" on lines {first_line} and {second_line}")]
    DuplicateId {
        path: String,
        id: String,
        first_line: usize,
        second_line: usize,
    },
    #[error(
        "{path}:{line}: unknown group \"{group}\" for id \"{id}\" (declared groups: {declared:?})"
    )]
    UnknownGroup {
        path: String,
        line: usize,
        id: String,
        group: String,
        declared: Vec<String>,
    },
}

/// A single-record validation failure, independent of file position.
#[derive(Debug, Error)]
pub enum RecordError {
    #[error("record is not a JSON object")]
    NotAnObject,
    #[error("missing required field \"{0}\"")]
    MissingField(&'static str),
    #[error("field \"{field}\" must be a {expected}")]
    WrongType {
        field: String,
        expected: &'static str,
    },
    #[error("field \"id\" is empty")]
    EmptyId,
    #[error("field \"cot_body\" is empty after trimming")]
    EmptyCotBody,
    #[error("extra key \"{0}\" collides with an existing metadata key")]
    MetadataCollision(String),
}

fn take_string(
    obj: &mut Map<String, Value>,
    field: &'static str,
    required: bool,
) -> Result<String, RecordError> {
    match obj.remove(field) {
        Some(Value::String(s)) => Ok(s),
        Some(_) => Err(RecordError::WrongType {
            field: field.to_string(),
            expected: "string",
        }),
        None if required => Err(RecordError::MissingField(field)),
        None => Ok(String::new()),
    }
}

/// Validate one parsed JSONL record into a [`CotSample`].
///
/// Unknown top-level keys are preserved by moving them into `metadata`.
pub fn validate_sample(record: Value) -> Result<CotSample, RecordError> {
    let Value::Object(mut obj) = record else {
        return Err(RecordError::NotAnObject);
    };

    let id = take_string(&mut obj, "id", true)?;
    if id.is_empty() {
        return Err(RecordError::EmptyId);
    }
    let group = take_string(&mut obj, "group", true)?;
    if group.is_empty() {
        return Err(RecordError::MissingField("group"));
    }
    let preamble = take_string(&mut obj, "preamble", false)?;
    let cot_body = take_string(&mut obj, "cot_body", true)?;
    if cot_body.trim().is_empty() {
        return Err(RecordError::EmptyCotBody);
    }
    let summary = take_string(&mut obj, "summary", false)?;

    let mut metadata = match obj.remove("metadata") {
        Some(Value::Object(m)) => m,
        Some(_) => {
            return Err(RecordError::WrongType {
                field: "metadata".to_string(),
                expected: "object",
            })
        }
        None => Map::new(),
    };
    // Whatever remains is an unknown key; fold it into metadata.
    for (key, value) in obj {
        if metadata.contains_key(&key) {
            return Err(RecordError::MetadataCollision(key));
        }
        metadata.insert(key, value);
    }

    Ok(CotSample {
        id,
        group,
        preamble,
        cot_body,
        summary,
        metadata,
    })
}

/// Load and validate a JSONL corpus against a declared group set.
///
/// Line numbers are 1-based and reported in every diagnostic. A UTF-8
/// byte-order mark on the first line is stripped.
pub fn load_corpus<P: AsRef<Path>>(path: P, groups: &[String]) -> Result<Corpus, CorpusError> {
    let path_str = path.as_ref().display().to_string();
    let file = File::open(path.as_ref()).map_err(|source| CorpusError::Io {
        path: path_str.clone(),
        source,
    })?;
    load_corpus_from_reader(BufReader::new(file), &path_str, groups)
}

/// Same as [`load_corpus`] but over any buffered reader (`path` is used
/// only for diagnostics).
pub fn load_corpus_from_reader<R: BufRead>(
    reader: R,
    path: &str,
    groups: &[String],
) -> Result<Corpus, CorpusError> {
    let mut samples: Vec<CotSample> = Vec::new();
    let mut seen: BTreeMap<String, usize> = BTreeMap::new();

    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let mut text = line.map_err(|source| CorpusError::Io {
            path: path.to_string(),
            source,
        })?;
        if line_no == 1 {
            if let Some(stripped) = text.strip_prefix('\u{feff}') {
                text = stripped.to_string();
            }
        }
        if text.trim().is_empty() {
            continue;
        }
        let value: Value = serde_json::from_str(&text).map_err(|e| CorpusError::MalformedLine {
            path: path.to_string(),
            line: line_no,
            message: e.to_string(),
        })?;
        let sample = validate_sample(value).map_err(|source| CorpusError::InvalidRecord {
            path: path.to_string(),
            line: line_no,
            source,
        })?;
        if let Some(&first_line) = seen.get(&sample.id) {
            return Err(CorpusError::DuplicateId {
                path: path.to_string(),
                id: sample.id,
                first_line,
                second_line: line_no,
            });
        }
        if !groups.iter().any(|g| g == &sample.group) {
            return Err(CorpusError::UnknownGroup {
                path: path.to_string(),
                line: line_no,
                id: sample.id,
                group: sample.group,
                declared: groups.to_vec(),
            });
        }
        seen.insert(sample.id.clone(), line_no);
        samples.push(sample);
    }

    Ok(Corpus {
        samples,
        groups: groups.to_vec(),
        source_path: path.to_string(),
    })
}

/// Merge several corpora sharing one declared group set, preserving order
/// and re-checking id uniqueness across files.
pub fn merge_corpora(parts: Vec<Corpus>, groups: &[String]) -> Result<Corpus, CorpusError> {
    let mut samples = Vec::new();
    let mut seen: BTreeMap<String, (String, usize)> = BTreeMap::new();
    let mut sources = Vec::new();
    for part in parts {
        sources.push(part.source_path.clone());
        for (offset, sample) in part.samples.into_iter().enumerate() {
            if let Some((first_path, _)) = seen.get(&sample.id) {
                return Err(CorpusError::DuplicateId {
                    path: format!("{first_path} + {}", part.source_path),
                    id: sample.id,
                    first_line: 0,
                    second_line: offset + 1,
                });
            }
            seen.insert(sample.id.clone(), (part.source_path.clone(), offset + 1));
            samples.push(sample);
        }
    }
    Ok(Corpus {
        samples,
        groups: groups.to_vec(),
        source_path: sources.join(" + "),
    })
}

impl CotSample {
    /// Serialize with the fixed key order
    /// `id, group, preamble, cot_body, summary, metadata`.
    pub fn to_json_line(&self) -> String {
        let mut obj = Map::new();
        obj.insert("id".into(), Value::String(self.id.clone()));
        obj.insert("group".into(), Value::String(self.group.clone()));
        obj.insert("preamble".into(), Value::String(self.preamble.clone()));
        obj.insert("cot_body".into(), Value::String(self.cot_body.clone()));
        obj.insert("summary".into(), Value::String(self.summary.clone()));
        obj.insert("metadata".into(), Value::Object(self.metadata.clone()));
        serde_json::to_string(&Value::Object(obj)).expect("JSON object serialization")
    }
}

impl Corpus {
    /// Write the corpus back out as JSONL. Byte-stable for identical input.
    pub fn write_jsonl<W: Write>(&self, mut writer: W) -> std::io::Result<()> {
        for sample in &self.samples {
            writeln!(writer, "{}", sample.to_json_line())?;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Split a corpus into per-group sample lists, preserving corpus order.
/// Only groups with at least one sample appear in the result.
pub fn partition_by_group(corpus: &Corpus) -> BTreeMap<String, Vec<&CotSample>> {
    let mut parts: BTreeMap<String, Vec<&CotSample>> = BTreeMap::new();
    for sample in &corpus.samples {
        parts.entry(sample.group.clone()).or_default().push(sample);
    }
    parts
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn groups_ab() -> Vec<String> {
        vec!["A".to_string(), "B".to_string()]
    }

    fn line(id: &str, group: &str) -> String {
        format!(
            r#"{{"id":"{id}","group":"{group}","preamble":"bg","cot_body":"Some reasoning.","summary":"s","metadata":{{}}}}"#
        )
    }

    #[test]
    fn accepts_full_record() {
        let corpus =
            load_corpus_from_reader(Cursor::new(line("S-01", "A")), "mem", &groups_ab()).unwrap();
        assert_eq!(corpus.len(), 1);
        assert_eq!(corpus.samples[0].id, "S-01");
        assert_eq!(corpus.samples[0].group, "A");
    }

    #[test]
    fn rejects_missing_cot_body_with_line() {
        let input = r#"{"id":"S-01","group":"A","preamble":"x"}"#;
        let err = load_corpus_from_reader(Cursor::new(input), "mem", &groups_ab()).unwrap_err();
        match err {
            CorpusError::InvalidRecord { line, source, .. } => {
                assert_eq!(line, 1);
                assert!(matches!(source, RecordError::MissingField("cot_body")));
            }
            other => panic!("unexpected error: {other}"),
        }
    }

    #[test]
    fn duplicate_id_cites_both_lines() {
        let input = format!("{}\n{}", line("S-01", "A"), line("S-01", "B"));
        let err = load_corpus_from_reader(Cursor::new(input), "mem", &groups_ab()).unwrap_err();
        match err {
            CorpusError::DuplicateId {
                id,
                first_line,
                second_line,
                ..
            } => {
                assert_eq!(id, "S-01");
                assert_eq!((first_line, second_line), (1, 2));
            }
            other => panic!("unexpected error: {other}"),
        }
    }

    #[test]
    fn unknown_group_is_hard_error() {
        let err = load_corpus_from_reader(Cursor::new(line("S-01", "C")), "mem", &groups_ab())
            .unwrap_err();
        assert!(matches!(err, CorpusError::UnknownGroup { .. }));
    }

    #[test]
    fn empty_preamble_accepted() {
        let input = r#"{"id":"S-01","group":"A","preamble":"","cot_body":"x."}"#;
        let corpus = load_corpus_from_reader(Cursor::new(input), "mem", &groups_ab()).unwrap();
        assert_eq!(corpus.samples[0].preamble, "");
        assert_eq!(corpus.samples[0].summary, "");
    }

    #[test]
    fn whitespace_cot_body_rejected() {
        let record: Value =
            serde_json::from_str(r#"{"id":"S-01","group":"A","cot_body":"  \n\t "}"#).unwrap();
        assert!(matches!(
            validate_sample(record),
            Err(RecordError::EmptyCotBody)
        ));
    }

    #[test]
    fn extra_key_folds_into_metadata() {
        let record: Value = serde_json::from_str(
            r#"{"id":"S-01","group":"A","cot_body":"x.","notes":"keep me","metadata":{"k":1}}"#,
        )
        .unwrap();
        let sample = validate_sample(record).unwrap();
        assert_eq!(sample.metadata["notes"], Value::String("keep me".into()));
        assert_eq!(sample.metadata["k"], Value::from(1));
    }

    #[test]
    fn metadata_key_collision_rejected() {
        let record: Value = serde_json::from_str(
            r#"{"id":"S-01","group":"A","cot_body":"x.","notes":"a","metadata":{"notes":"b"}}"#,
        )
        .unwrap();
        assert!(matches!(
            validate_sample(record),
            Err(RecordError::MetadataCollision(_))
        ));
    }

    #[test]
    fn non_string_id_rejected() {
        let record: Value =
            serde_json::from_str(r#"{"id":7,"group":"A","cot_body":"x."}"#).unwrap();
        assert!(matches!(
            validate_sample(record),
            Err(RecordError::WrongType { .. })
        ));
    }

    #[test]
    fn bom_on_first_line_is_stripped() {
        let input = format!("\u{feff}{}", line("S-01", "A"));
        let corpus = load_corpus_from_reader(Cursor::new(input), "mem", &groups_ab()).unwrap();
        assert_eq!(corpus.samples[0].id, "S-01");
    }

    #[test]
    fn partition_sizes_and_order() {
        let mut lines = Vec::new();
        for i in 0..20 {
            lines.push(line(&format!("A-{i:02}"), "A"));
        }
        for i in 0..20 {
            lines.push(line(&format!("B-{i:02}"), "B"));
        }
        let corpus =
            load_corpus_from_reader(Cursor::new(lines.join("\n")), "mem", &groups_ab()).unwrap();
        let parts = partition_by_group(&corpus);
        assert_eq!(parts.len(), 2);
        assert_eq!(parts["A"].len(), 20);
        assert_eq!(parts["B"].len(), 20);
        assert_eq!(parts["A"][0].id, "A-00");
        assert_eq!(parts["A"][19].id, "A-19");
    }

    #[test]
    fn partition_single_group_and_empty() {
        let corpus =
            load_corpus_from_reader(Cursor::new(line("S-01", "A")), "mem", &groups_ab()).unwrap();
        assert_eq!(partition_by_group(&corpus).len(), 1);

        let empty = load_corpus_from_reader(Cursor::new(""), "mem", &groups_ab()).unwrap();
        assert!(partition_by_group(&empty).is_empty());
    }

    #[test]
    fn round_trip_preserves_fields() {
        let input = format!(
            "{}\n{}",
            r#"{"id":"S-01","group":"A","cot_body":"x.","notes":"n","metadata":{"z":[1,2]}}"#,
            line("S-02", "B"),
        );
        let corpus = load_corpus_from_reader(Cursor::new(input), "mem", &groups_ab()).unwrap();
        let mut buf = Vec::new();
        corpus.write_jsonl(&mut buf).unwrap();
        let reloaded =
            load_corpus_from_reader(Cursor::new(buf.clone()), "mem", &groups_ab()).unwrap();
        assert_eq!(corpus.samples, reloaded.samples);

        let mut buf2 = Vec::new();
        reloaded.write_jsonl(&mut buf2).unwrap();
        assert_eq!(buf, buf2);
    }
}
