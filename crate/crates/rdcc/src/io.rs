//! Corpus JSON lines, column export, lexicon TSV and atomic file writes.

use std::fs;
use std::io::Write;
use std::path::Path;

use rdcc_core::corpus::{split_clauses, Document};
use rdcc_core::dictionary::{dict_features, Lexicon};
use rdcc_core::tags::validate_spans;
use rdcc_core::{EntitySpan, EntityType};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Writes through a temporary file in the same directory, so a failed
/// write leaves no partial output behind.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(path, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
struct SpanRecord {
    start: usize,
    end: usize,
    #[serde(rename = "type")]
    kind: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct Record {
    text: String,
    #[serde(default)]
    entities: Vec<SpanRecord>,
}

/// Entity types may be written as names (`"body"`) or codes (`"b"`).
pub fn parse_document(line: &str) -> std::result::Result<Document, String> {
    let rec: Record = serde_json::from_str(line).map_err(|e| e.to_string())?;
    let mut entities = Vec::with_capacity(rec.entities.len());
    for s in rec.entities {
        let kind: EntityType = s.kind.parse().map_err(|e: rdcc_core::Error| e.to_string())?;
        entities.push(EntitySpan::new(s.start, s.end, kind));
    }
    validate_spans(&entities, rec.text.chars().count()).map_err(|e| e.to_string())?;
    Ok(Document::new(rec.text, entities))
}

pub fn document_json(doc: &Document) -> String {
    let rec = Record {
        text: doc.text.clone(),
        entities: doc
            .entities
            .iter()
            .map(|e| SpanRecord {
                start: e.start,
                end: e.end,
                kind: e.kind.name().to_string(),
            })
            .collect(),
    };
    serde_json::to_string(&rec).expect("records always serialize")
}

/// One document per non-blank line.
pub fn parse_corpus(path: &Path, text: &str) -> Result<Vec<Document>> {
    let mut docs = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        docs.push(parse_document(line).map_err(|m| Error::parse(path, i + 1, m))?);
    }
    Ok(docs)
}

pub fn read_corpus(path: &Path) -> Result<Vec<Document>> {
    parse_corpus(path, &read_to_string(path)?)
}

pub fn corpus_jsonl(docs: &[Document]) -> String {
    docs.iter().map(|d| document_json(d) + "\n").collect()
}

/// Input for prediction and dictionary tagging: a line holding a JSON
/// object is read as a corpus record, any other line as raw text. Blank
/// lines are kept so the output stays aligned with the input.
pub fn read_texts(path: &Path) -> Result<Vec<String>> {
    let content = read_to_string(path)?;
    let mut out = Vec::new();
    for (i, line) in content.lines().enumerate() {
        if line.trim_start().starts_with('{') {
            out.push(parse_document(line).map_err(|m| Error::parse(path, i + 1, m))?.text);
        } else {
            out.push(line.to_string());
        }
    }
    Ok(out)
}

/// `char<TAB>tag` per character, blank line between clauses.
pub fn columns(docs: &[Document]) -> Result<String> {
    let mut out = String::new();
    for doc in docs {
        for clause in doc.labeled_clauses()? {
            for (c, t) in clause.chars.iter().zip(&clause.tags) {
                out.push_str(&format!("{c}\t{t}\n"));
            }
            out.push('\n');
        }
    }
    Ok(out)
}

/// Rebuilds documents from column output, one document per clause.
pub fn parse_columns(path: &Path, text: &str) -> Result<Vec<Document>> {
    let mut docs = Vec::new();
    let mut chars = String::new();
    let mut tags = Vec::new();
    let mut flush = |chars: &mut String, tags: &mut Vec<rdcc_core::Tag>| {
        if !tags.is_empty() {
            let spans = rdcc_core::tags::decode_bieos(tags);
            docs.push(Document::new(std::mem::take(chars), spans));
            tags.clear();
        }
    };
    for (i, line) in text.lines().enumerate() {
        if line.is_empty() {
            flush(&mut chars, &mut tags);
            continue;
        }
        let (c, t) = line
            .split_once('\t')
            .ok_or_else(|| Error::parse(path, i + 1, "expected char<TAB>tag"))?;
        let mut cs = c.chars();
        let ch = match (cs.next(), cs.next()) {
            (Some(ch), None) => ch,
            _ => return Err(Error::parse(path, i + 1, format!("expected one character, got {c:?}"))),
        };
        chars.push(ch);
        tags.push(t.parse().map_err(|e: rdcc_core::Error| Error::parse(path, i + 1, e.to_string()))?);
    }
    flush(&mut chars, &mut tags);
    Ok(docs)
}

/// `surface<TAB>type` per line; a surface without a type column is an
/// untyped segmentation word. `#` starts a comment line.
pub fn parse_lexicon(path: &Path, text: &str) -> Result<Lexicon> {
    let mut lex = Lexicon::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() || line.trim_start().starts_with('#') {
            continue;
        }
        let mut fields = line.split('\t');
        let surface = fields.next().unwrap_or("").trim();
        let kind = match fields.next().map(str::trim) {
            None | Some("") => None,
            Some(t) => Some(t.parse().map_err(|e: rdcc_core::Error| Error::parse(path, i + 1, e.to_string()))?),
        };
        if fields.next().is_some() {
            return Err(Error::parse(path, i + 1, "expected at most two tab-separated columns"));
        }
        lex.insert_entry(surface, kind).map_err(|e| Error::parse(path, i + 1, e.to_string()))?;
    }
    Ok(lex)
}

pub fn read_lexicon(path: &Path) -> Result<Lexicon> {
    parse_lexicon(path, &read_to_string(path)?)
}

pub fn lexicon_tsv(lex: &Lexicon) -> String {
    let mut out = String::new();
    for (surface, kind) in lex.iter() {
        match kind {
            Some(k) => out.push_str(&format!("{surface}\t{}\n", k.name())),
            None => out.push_str(&format!("{surface}\n")),
        }
    }
    out
}

/// `char<TAB>feature` per character of each clause, blank line between
/// clauses.
pub fn dict_tag(texts: &[String], lex: &Lexicon) -> String {
    let mut out = String::new();
    for text in texts {
        for clause in split_clauses(text) {
            for (c, f) in clause.chars.iter().zip(dict_features(&clause.chars, lex)) {
                out.push_str(&format!("{c}\t{f}\n"));
            }
            out.push('\n');
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const P: &str = "test";

    #[test]
    fn corpus_round_trip() {
        let line = r#"{"text":"腹平坦，未见腹壁静脉曲张。","entities":[{"start":0,"end":0,"type":"body"},{"start":6,"end":7,"type":"b"},{"start":8,"end":11,"type":"symptom"}]}"#;
        let docs = parse_corpus(Path::new(P), &format!("{line}\n\n")).unwrap();
        assert_eq!(docs.len(), 1);
        assert_eq!(docs[0].entities[1], EntitySpan::new(6, 7, EntityType::Body));
        let again = parse_corpus(Path::new(P), &corpus_jsonl(&docs)).unwrap();
        assert_eq!(again, docs);
        assert!(corpus_jsonl(&docs).contains(r#""type":"body""#));
    }

    #[test]
    fn corpus_errors_carry_line_numbers() {
        let text = "{\"text\":\"ab\"}\n{\"text\":\"ab\",\"entities\":[{\"start\":1,\"end\":5,\"type\":\"d\"}]}\n";
        match parse_corpus(Path::new(P), text) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        let text = "{\"text\":\"ab\",\"entities\":[{\"start\":0,\"end\":0,\"type\":\"x\"}]}";
        assert!(matches!(parse_corpus(Path::new(P), text), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn columns_round_trip_per_clause() {
        let doc = Document::new(
            "腹平坦，未见腹壁静脉曲张。",
            vec![
                EntitySpan::new(0, 0, EntityType::Body),
                EntitySpan::new(6, 7, EntityType::Body),
                EntitySpan::new(8, 11, EntityType::Symptom),
            ],
        );
        let text = columns(&[doc]).unwrap();
        assert!(text.starts_with("腹\tS-b\n平\tO\n坦\tO\n，\tO\n\n未\tO\n"));
        let back = parse_columns(Path::new(P), &text).unwrap();
        assert_eq!(back[0].text, "腹平坦，");
        assert_eq!(back[1].entities, [EntitySpan::new(2, 3, EntityType::Body), EntitySpan::new(4, 7, EntityType::Symptom)]);
    }

    #[test]
    fn lexicon_tsv_parsing() {
        let lex = parse_lexicon(Path::new(P), "# anatomy\n腹\tbody\n静脉曲张\ts\n\n腹壁\n").unwrap();
        assert_eq!(lex.len(), 3);
        assert_eq!(lex.get(&['腹', '壁']), Some(None));
        assert_eq!(parse_lexicon(Path::new(P), &lexicon_tsv(&lex)).unwrap(), lex);
        let err = parse_lexicon(Path::new(P), "腹\tbody\n肝\tdisease\n腹\tsymptom\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }));
        assert!(err.to_string().contains("腹"));
        assert!(matches!(parse_lexicon(Path::new(P), "肝\tliver\n"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse_lexicon(Path::new(P), "a\tb\tc\n"), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn dict_tag_reproduces_the_table_one_row() {
        let lex = parse_lexicon(Path::new(P), "腹\tbody\n静脉曲张\tsymptom\n腹壁\n").unwrap();
        let out = dict_tag(&["腹平坦，未见腹壁静脉曲张。".to_string()], &lex);
        let features: Vec<&str> = out.lines().filter(|l| !l.is_empty()).map(|l| l.split('\t').nth(1).unwrap()).collect();
        assert_eq!(features.join(" "), "S-b None None None None None None None B-s I-s I-s E-s None");
        assert_eq!(out.matches("\n\n").count(), 2);
        let empty = dict_tag(&["腹平坦".to_string()], &Lexicon::new());
        assert_eq!(empty, "腹\tNone\n平\tNone\n坦\tNone\n\n");
    }
}
