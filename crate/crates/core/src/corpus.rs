//! Annotated documents, comma clause splitting and strict span evaluation.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::tags::{encode_bieos, validate_spans, EntitySpan, EntityType, Tag};
use crate::{Error, Result};

/// Full-width and ASCII commas.
pub const CLAUSE_DELIMITERS: [char; 2] = ['，', ','];

/// A run of characters cut from a source text. `offset` is the char index
/// of `chars[0]` in the source, so clause position `j` maps to `offset + j`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Clause {
    pub chars: Vec<char>,
    pub offset: usize,
}

impl Clause {
    pub fn len(&self) -> usize {
        self.chars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chars.is_empty()
    }

    pub fn text(&self) -> String {
        self.chars.iter().collect()
    }

    /// Source char index of clause position `i`.
    pub fn source_index(&self, i: usize) -> usize {
        self.offset + i
    }
}

/// Splits after every delimiter; the delimiter stays with the clause it ends.
pub fn split_clauses(text: &str) -> Vec<Clause> {
    let mut clauses = Vec::new();
    let mut current = Vec::new();
    let mut offset = 0;
    for (i, c) in text.chars().enumerate() {
        current.push(c);
        if CLAUSE_DELIMITERS.contains(&c) {
            clauses.push(Clause {
                chars: core::mem::take(&mut current),
                offset,
            });
            offset = i + 1;
        }
    }
    if !current.is_empty() {
        clauses.push(Clause {
            chars: current,
            offset,
        });
    }
    clauses
}

/// One corpus record: a text and its entities in char coordinates.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Document {
    pub text: String,
    #[serde(default)]
    pub entities: Vec<EntitySpan>,
}

/// A clause with its gold tag sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledClause {
    pub chars: Vec<char>,
    pub tags: Vec<Tag>,
}

impl Document {
    pub fn new(text: impl Into<String>, entities: Vec<EntitySpan>) -> Self {
        Self {
            text: text.into(),
            entities,
        }
    }

    pub fn char_len(&self) -> usize {
        self.text.chars().count()
    }

    /// Splits into clauses with entities re-based to clause coordinates.
    /// Entities may not straddle a delimiter.
    pub fn labeled_clauses(&self) -> Result<Vec<LabeledClause>> {
        validate_spans(&self.entities, self.char_len())?;
        let clauses = split_clauses(&self.text);
        let mut buckets: Vec<Vec<EntitySpan>> = clauses.iter().map(|_| Vec::new()).collect();
        for span in &self.entities {
            let idx = clauses
                .iter()
                .rposition(|c| c.offset <= span.start)
                .expect("validated span lies inside the text");
            let clause = &clauses[idx];
            let clause_end = clause.offset + clause.len() - 1;
            if span.end > clause_end {
                return Err(Error::SpanCrossesClause {
                    start: span.start,
                    end: span.end,
                    boundary: clause_end,
                });
            }
            buckets[idx].push(EntitySpan::new(
                span.start - clause.offset,
                span.end - clause.offset,
                span.kind,
            ));
        }
        clauses
            .into_iter()
            .zip(buckets)
            .map(|(c, spans)| {
                let tags = encode_bieos(&spans, c.len())?;
                Ok(LabeledClause {
                    chars: c.chars,
                    tags,
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Counts {
    pub true_pos: usize,
    pub false_pos: usize,
    pub false_neg: usize,
}

impl Counts {
    pub fn precision(&self) -> f64 {
        ratio(self.true_pos, self.true_pos + self.false_pos)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.true_pos, self.true_pos + self.false_neg)
    }

    pub fn f1(&self) -> f64 {
        let (p, r) = (self.precision(), self.recall());
        if p + r > 0.0 {
            2.0 * p * r / (p + r)
        } else {
            0.0
        }
    }

    fn add(&mut self, other: &Counts) {
        self.true_pos += other.true_pos;
        self.false_pos += other.false_pos;
        self.false_neg += other.false_neg;
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EvalReport {
    /// Indexed by [`EntityType::index`].
    pub per_type: [Counts; 5],
    pub micro: Counts,
}

impl EvalReport {
    pub fn for_type(&self, kind: EntityType) -> &Counts {
        &self.per_type[kind.index()]
    }
}

/// Strict matching: a prediction counts only if start, end and type all
/// agree with a gold span. Micro counts are summed over every record.
pub fn evaluate(gold: &[Vec<EntitySpan>], pred: &[Vec<EntitySpan>]) -> Result<EvalReport> {
    if gold.len() != pred.len() {
        return Err(Error::RecordCountMismatch {
            gold: gold.len(),
            pred: pred.len(),
        });
    }
    let mut report = EvalReport::default();
    for (g, p) in gold.iter().zip(pred) {
        let mut g: Vec<EntitySpan> = g.clone();
        let mut p: Vec<EntitySpan> = p.clone();
        g.sort();
        p.sort();
        let (mut i, mut j) = (0, 0);
        while i < g.len() || j < p.len() {
            let order = match (g.get(i), p.get(j)) {
                (Some(a), Some(b)) => a.cmp(b),
                (Some(_), None) => core::cmp::Ordering::Less,
                _ => core::cmp::Ordering::Greater,
            };
            match order {
                core::cmp::Ordering::Equal => {
                    report.per_type[g[i].kind.index()].true_pos += 1;
                    i += 1;
                    j += 1;
                }
                core::cmp::Ordering::Less => {
                    report.per_type[g[i].kind.index()].false_neg += 1;
                    i += 1;
                }
                core::cmp::Ordering::Greater => {
                    report.per_type[p[j].kind.index()].false_pos += 1;
                    j += 1;
                }
            }
        }
    }
    let mut micro = Counts::default();
    for c in &report.per_type {
        micro.add(c);
    }
    report.micro = micro;
    Ok(report)
}
