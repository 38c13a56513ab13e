//! BIEOS tag vocabulary and conversion between tag sequences and spans.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// The five clinical entity categories.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EntityType {
    Disease,
    Symptom,
    Exam,
    Treatment,
    Body,
}

impl EntityType {
    pub const ALL: [EntityType; 5] = [
        EntityType::Disease,
        EntityType::Symptom,
        EntityType::Exam,
        EntityType::Treatment,
        EntityType::Body,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    /// Single-letter code used inside composite tags such as `B-b`.
    pub fn code(self) -> char {
        match self {
            EntityType::Disease => 'd',
            EntityType::Symptom => 's',
            EntityType::Exam => 'e',
            EntityType::Treatment => 't',
            EntityType::Body => 'b',
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            EntityType::Disease => "disease",
            EntityType::Symptom => "symptom",
            EntityType::Exam => "exam",
            EntityType::Treatment => "treatment",
            EntityType::Body => "body",
        }
    }

    pub fn from_code(code: char) -> Option<Self> {
        Self::ALL.into_iter().find(|t| t.code() == code)
    }
}

impl fmt::Display for EntityType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Accepts either the full name (`"symptom"`) or the one-letter code (`"s"`).
impl FromStr for EntityType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut chars = s.chars();
        if let (Some(c), None) = (chars.next(), chars.next()) {
            if let Some(t) = Self::from_code(c) {
                return Ok(t);
            }
        }
        Self::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| Error::UnknownEntityType(s.to_string()))
    }
}

/// Position of a character inside an entity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Marker {
    Begin,
    Inside,
    End,
    Single,
}

impl Marker {
    pub const ALL: [Marker; 4] = [Marker::Begin, Marker::Inside, Marker::End, Marker::Single];

    pub fn letter(self) -> char {
        match self {
            Marker::Begin => 'B',
            Marker::Inside => 'I',
            Marker::End => 'E',
            Marker::Single => 'S',
        }
    }
}

/// A BIEOS tag. `Outside` carries no entity type.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Tag {
    Outside,
    Entity(Marker, EntityType),
}

impl Tag {
    /// 5 types x 4 markers + O.
    pub const COUNT: usize = 21;

    /// Dense index: `O` is 0, `<marker>-<type>` is `1 + 4 * type + marker`.
    pub fn index(self) -> usize {
        match self {
            Tag::Outside => 0,
            Tag::Entity(m, t) => 1 + 4 * t.index() + m as usize,
        }
    }

    pub fn from_index(index: usize) -> Option<Self> {
        match index {
            0 => Some(Tag::Outside),
            i if i < Self::COUNT => {
                let t = EntityType::ALL[(i - 1) / 4];
                let m = Marker::ALL[(i - 1) % 4];
                Some(Tag::Entity(m, t))
            }
            _ => None,
        }
    }

    pub fn all() -> impl Iterator<Item = Tag> {
        (0..Self::COUNT).filter_map(Tag::from_index)
    }

    pub fn marker(self) -> Option<Marker> {
        match self {
            Tag::Outside => None,
            Tag::Entity(m, _) => Some(m),
        }
    }

    pub fn entity_type(self) -> Option<EntityType> {
        match self {
            Tag::Outside => None,
            Tag::Entity(_, t) => Some(t),
        }
    }

    /// Whether `next` may follow `prev` (`None` = sequence start) in a
    /// well-formed BIEOS sequence.
    pub fn can_follow(prev: Option<Tag>, next: Tag) -> bool {
        let open = match prev {
            Some(Tag::Entity(Marker::Begin | Marker::Inside, t)) => Some(t),
            _ => None,
        };
        match (open, next) {
            (Some(t), Tag::Entity(Marker::Inside | Marker::End, u)) => t == u,
            (Some(_), _) => false,
            (None, Tag::Entity(Marker::Inside | Marker::End, _)) => false,
            (None, _) => true,
        }
    }
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tag::Outside => f.write_str("O"),
            Tag::Entity(m, t) => write!(f, "{}-{}", m.letter(), t.code()),
        }
    }
}

impl FromStr for Tag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "O" {
            return Ok(Tag::Outside);
        }
        let bad = || Error::UnknownTag(s.to_string());
        let (m, t) = s.split_once('-').ok_or_else(bad)?;
        let marker = match m {
            "B" => Marker::Begin,
            "I" => Marker::Inside,
            "E" => Marker::End,
            "S" => Marker::Single,
            _ => return Err(bad()),
        };
        let mut code = t.chars();
        let kind = match (code.next(), code.next()) {
            (Some(c), None) => EntityType::from_code(c).ok_or_else(bad)?,
            _ => return Err(bad()),
        };
        Ok(Tag::Entity(marker, kind))
    }
}

/// Typed entity occupying characters `start..=end`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EntitySpan {
    pub start: usize,
    pub end: usize,
    #[serde(rename = "type")]
    pub kind: EntityType,
}

impl EntitySpan {
    pub fn new(start: usize, end: usize, kind: EntityType) -> Self {
        Self { start, end, kind }
    }

    pub fn len(&self) -> usize {
        self.end + 1 - self.start
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Rejects spans that are inverted, out of `[0, n)`, or overlap each other.
pub fn validate_spans(spans: &[EntitySpan], n: usize) -> Result<()> {
    for s in spans {
        if s.start > s.end || s.end >= n {
            return Err(Error::SpanOutOfRange {
                start: s.start,
                end: s.end,
                kind: s.kind,
                len: n,
            });
        }
    }
    let mut sorted: Vec<&EntitySpan> = spans.iter().collect();
    sorted.sort_by_key(|s| (s.start, s.end));
    for pair in sorted.windows(2) {
        if pair[1].start <= pair[0].end {
            return Err(Error::SpanOverlap {
                start: pair[1].start,
                end: pair[1].end,
                kind: pair[1].kind,
                other_start: pair[0].start,
                other_end: pair[0].end,
            });
        }
    }
    Ok(())
}

/// Writes spans into a length-`n` BIEOS sequence.
pub fn encode_bieos(spans: &[EntitySpan], n: usize) -> Result<Vec<Tag>> {
    validate_spans(spans, n)?;
    let mut tags = vec![Tag::Outside; n];
    for s in spans {
        if s.start == s.end {
            tags[s.start] = Tag::Entity(Marker::Single, s.kind);
            continue;
        }
        tags[s.start] = Tag::Entity(Marker::Begin, s.kind);
        for t in &mut tags[s.start + 1..s.end] {
            *t = Tag::Entity(Marker::Inside, s.kind);
        }
        tags[s.end] = Tag::Entity(Marker::End, s.kind);
    }
    Ok(tags)
}

/// Reads spans back out of a tag sequence. Total on malformed input:
///
/// * `B-x` and `S-x` always start a fresh span.
/// * `I-x` / `E-x` continue an open span of type `x`, otherwise they start
///   one (an orphan `E-x` therefore yields a one-character span).
/// * `E-x`, `S-x` and `O` close the open span; a span still open at the end
///   of the sequence (or interrupted by a different type) ends at its last
///   tagged character.
pub fn decode_bieos(tags: &[Tag]) -> Vec<EntitySpan> {
    let mut spans = Vec::new();
    let mut open: Option<(usize, EntityType)> = None;
    for (i, &tag) in tags.iter().enumerate() {
        let (marker, kind) = match tag {
            Tag::Outside => {
                if let Some((start, kind)) = open.take() {
                    spans.push(EntitySpan::new(start, i - 1, kind));
                }
                continue;
            }
            Tag::Entity(m, t) => (m, t),
        };
        let continues = matches!(open, Some((_, k)) if k == kind)
            && matches!(marker, Marker::Inside | Marker::End);
        if !continues {
            if let Some((start, k)) = open.take() {
                spans.push(EntitySpan::new(start, i - 1, k));
            }
        }
        match marker {
            Marker::Single => spans.push(EntitySpan::new(i, i, kind)),
            Marker::Begin => open = Some((i, kind)),
            Marker::Inside => {
                if !continues {
                    open = Some((i, kind));
                }
            }
            Marker::End => {
                let start = open.take().map_or(i, |(s, _)| s);
                spans.push(EntitySpan::new(start, i, kind));
            }
        }
    }
    if let Some((start, kind)) = open {
        spans.push(EntitySpan::new(start, tags.len() - 1, kind));
    }
    spans
}

/// Space-separated tag string, mostly for diagnostics and tests.
pub fn format_tags(tags: &[Tag]) -> String {
    let mut out = String::new();
    for (i, t) in tags.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        out.push_str(&t.to_string());
    }
    out
}

pub fn parse_tags(s: &str) -> Result<Vec<Tag>> {
    s.split_whitespace().map(str::parse).collect()
}
