//! Typed lexicon and bi-directional maximum matching features.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::tags::{EntityType, Marker, Tag};
use crate::{Error, Result};

/// Exact-match dictionary. Entries are typed entity surfaces or untyped
/// words; untyped words only take part in segmentation and yield `None`
/// features.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Lexicon {
    entries: BTreeMap<Vec<char>, Option<EntityType>>,
    max_len: usize,
}

fn kind_name(kind: Option<EntityType>) -> String {
    kind.map_or_else(|| "an untyped word".to_string(), |k| k.name().to_string())
}

impl Lexicon {
    pub fn new() -> Self {
        Self::default()
    }

    /// Re-inserting a surface with the same type is a no-op; a different
    /// type is an error.
    pub fn insert(&mut self, surface: &str, kind: EntityType) -> Result<()> {
        self.insert_entry(surface, Some(kind))
    }

    /// Adds a segmentation-only word.
    pub fn insert_word(&mut self, surface: &str) -> Result<()> {
        self.insert_entry(surface, None)
    }

    pub fn insert_entry(&mut self, surface: &str, kind: Option<EntityType>) -> Result<()> {
        let key: Vec<char> = surface.chars().collect();
        if key.is_empty() {
            return Err(Error::EmptySurface);
        }
        if let Some(&first) = self.entries.get(&key) {
            if first != kind {
                return Err(Error::ConflictingSurface {
                    surface: surface.to_string(),
                    first: kind_name(first),
                    second: kind_name(kind),
                });
            }
            return Ok(());
        }
        self.max_len = self.max_len.max(key.len());
        self.entries.insert(key, kind);
        Ok(())
    }

    pub fn from_entries<'a, I>(entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (&'a str, EntityType)>,
    {
        let mut lex = Self::new();
        for (s, t) in entries {
            lex.insert(s, t)?;
        }
        Ok(lex)
    }

    /// `None` if absent, `Some(None)` for an untyped word.
    pub fn get(&self, surface: &[char]) -> Option<Option<EntityType>> {
        self.entries.get(surface).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Longest surface, in chars.
    pub fn max_len(&self) -> usize {
        self.max_len
    }

    pub fn iter(&self) -> impl Iterator<Item = (String, Option<EntityType>)> + '_ {
        self.entries.iter().map(|(k, &v)| (k.iter().collect(), v))
    }
}

/// One piece of a segmentation; `kind` is set when the piece is a typed
/// lexicon hit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Segment {
    pub start: usize,
    pub end: usize,
    pub kind: Option<EntityType>,
}

impl Segment {
    pub fn len(&self) -> usize {
        self.end + 1 - self.start
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

fn longest_match(chars: &[char], lex: &Lexicon, limit: usize, at: impl Fn(usize) -> (usize, usize)) -> Segment {
    for len in (1..=limit.min(lex.max_len())).rev() {
        let (start, end) = at(len);
        if let Some(kind) = lex.get(&chars[start..=end]) {
            return Segment {
                start,
                end,
                kind,
            };
        }
    }
    let (start, end) = at(1);
    Segment {
        start,
        end,
        kind: None,
    }
}

/// Greedy left-to-right longest match.
pub fn forward_max_match(chars: &[char], lex: &Lexicon) -> Vec<Segment> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let seg = longest_match(chars, lex, chars.len() - i, |len| (i, i + len - 1));
        i = seg.end + 1;
        out.push(seg);
    }
    out
}

/// Greedy right-to-left longest match, returned in text order.
pub fn backward_max_match(chars: &[char], lex: &Lexicon) -> Vec<Segment> {
    let mut out = Vec::new();
    let mut j = chars.len();
    while j > 0 {
        let seg = longest_match(chars, lex, j, |len| (j - len, j - 1));
        j = seg.start;
        out.push(seg);
    }
    out.reverse();
    out
}

/// Picks between forward and backward matching: fewer segments wins, then
/// fewer single-character segments, then the backward result.
pub fn bdmm_segment(chars: &[char], lex: &Lexicon) -> Vec<Segment> {
    let fwd = forward_max_match(chars, lex);
    let bwd = backward_max_match(chars, lex);
    let singles = |s: &[Segment]| s.iter().filter(|g| g.start == g.end).count();
    if (fwd.len(), singles(&fwd)) < (bwd.len(), singles(&bwd)) {
        fwd
    } else {
        bwd
    }
}

/// Per-character dictionary feature: a BIEOS tag inside a lexicon hit,
/// `NoMatch` (printed `None`) elsewhere.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DictFeature {
    NoMatch,
    Tag(Tag),
}

impl DictFeature {
    /// 21 tags + the no-match value.
    pub const COUNT: usize = Tag::COUNT + 1;

    /// `NoMatch` is 0, tag `t` is `1 + t.index()`.
    pub fn index(self) -> usize {
        match self {
            DictFeature::NoMatch => 0,
            DictFeature::Tag(t) => 1 + t.index(),
        }
    }

    pub fn from_index(i: usize) -> Option<Self> {
        match i {
            0 => Some(DictFeature::NoMatch),
            _ => Tag::from_index(i - 1).map(DictFeature::Tag),
        }
    }
}

impl fmt::Display for DictFeature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DictFeature::NoMatch => f.write_str("None"),
            DictFeature::Tag(t) => t.fmt(f),
        }
    }
}

impl FromStr for DictFeature {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "None" {
            Ok(DictFeature::NoMatch)
        } else {
            s.parse().map(DictFeature::Tag)
        }
    }
}

pub fn dict_features(chars: &[char], lex: &Lexicon) -> Vec<DictFeature> {
    let mut out = Vec::with_capacity(chars.len());
    for seg in bdmm_segment(chars, lex) {
        match seg.kind {
            None => out.extend((seg.start..=seg.end).map(|_| DictFeature::NoMatch)),
            Some(kind) if seg.start == seg.end => {
                out.push(DictFeature::Tag(Tag::Entity(Marker::Single, kind)))
            }
            Some(kind) => {
                out.push(DictFeature::Tag(Tag::Entity(Marker::Begin, kind)));
                for _ in seg.start + 1..seg.end {
                    out.push(DictFeature::Tag(Tag::Entity(Marker::Inside, kind)));
                }
                out.push(DictFeature::Tag(Tag::Entity(Marker::End, kind)));
            }
        }
    }
    out
}
