//! Seeded generator for a small templated corpus with a known lexicon.
//!
//! Clauses are built from 50 symbols: 10 neutral fillers, one prefix and
//! one suffix cue per entity type, and 30 characters that only occur inside
//! entities. Entity surfaces carry no type information of their own; the
//! type is signalled by the cue around them, except in bare clauses where
//! only memory or the lexicon can tell. Some lexicon surfaces are held out
//! of the training split, so the lexicon is the only source that knows
//! them.

use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::Document;
use crate::dictionary::Lexicon;
use crate::tags::{EntitySpan, EntityType};
use crate::{Error, Result};

pub const FILLERS: &str = "未见有无于并可后前经";
/// Prefix and suffix cue per type, in `EntityType::ALL` order.
pub const CUES: [(char, char); 5] = [('患', '史'), ('伴', '感'), ('查', '示'), ('予', '术'), ('位', '处')];
pub const ENTITY_CHARS: &str = "肝肾脾胃肺心脑骨血管炎瘤癌痛热咳喘肿胀酸麻疹溃疡结石囊腺膜腔";

/// Every character the generator can emit inside a clause.
pub fn alphabet() -> Vec<char> {
    let mut out: Vec<char> = FILLERS.chars().collect();
    for (p, s) in CUES {
        out.push(p);
        out.push(s);
    }
    out.extend(ENTITY_CHARS.chars());
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub seed: u64,
    pub train_clauses: usize,
    pub test_clauses: usize,
    pub clauses_per_document: usize,
    pub surfaces_per_type: usize,
    /// Fraction of all surfaces that never occur in training text, taken
    /// from the lexicon-covered ones. At most `lexicon_coverage`.
    pub held_out: f64,
    /// Fraction of all surfaces listed in the lexicon.
    pub lexicon_coverage: f64,
    /// Probability that a mention appears without its type cue.
    pub bare: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            train_clauses: 500,
            test_clauses: 100,
            clauses_per_document: 5,
            surfaces_per_type: 20,
            held_out: 0.15,
            lexicon_coverage: 0.6,
            bare: 0.3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    pub train: Vec<Document>,
    pub test: Vec<Document>,
    pub lexicon: Lexicon,
    /// All surfaces with their types, held-out ones included.
    pub surfaces: Vec<(String, EntityType, bool)>,
}

impl SyntheticCorpus {
    /// Surfaces that occur only in the test split.
    pub fn held_out_surfaces(&self) -> impl Iterator<Item = &str> {
        self.surfaces.iter().filter(|s| s.2).map(|s| s.0.as_str())
    }
}

struct Builder {
    text: Vec<char>,
    entities: Vec<EntitySpan>,
}

impl Builder {
    fn fillers(&mut self, rng: &mut ChaCha8Rng, lo: usize, hi: usize) {
        let pool: Vec<char> = FILLERS.chars().collect();
        for _ in 0..rng.gen_range(lo..=hi) {
            self.text.push(*pool.choose(rng).unwrap());
        }
    }

    fn mention(&mut self, surface: &[char], kind: EntityType) {
        let start = self.text.len();
        self.text.extend_from_slice(surface);
        self.entities.push(EntitySpan::new(start, self.text.len() - 1, kind));
    }
}

pub fn generate(config: &SyntheticConfig) -> Result<SyntheticCorpus> {
    for (name, p) in [
        ("held_out", config.held_out),
        ("lexicon_coverage", config.lexicon_coverage),
        ("bare", config.bare),
    ] {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Config(alloc::format!("{name} must lie in [0, 1], got {p}")));
        }
    }
    if config.held_out > config.lexicon_coverage {
        return Err(Error::Config("held_out cannot exceed lexicon_coverage".into()));
    }
    if config.clauses_per_document == 0 || config.surfaces_per_type == 0 {
        return Err(Error::Config("clauses_per_document and surfaces_per_type must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let entity_chars: Vec<char> = ENTITY_CHARS.chars().collect();

    // No surface occurs inside another, so every mention has one reading.
    let contains = |a: &[char], b: &[char]| a.windows(b.len()).any(|w| w == b);
    let mut surfaces: Vec<(Vec<char>, EntityType, bool)> = Vec::new();
    for kind in EntityType::ALL {
        let mut made = 0;
        let mut attempts = 0;
        while made < config.surfaces_per_type {
            attempts += 1;
            if attempts > 100_000 {
                return Err(Error::Config("too many surfaces for the entity alphabet".into()));
            }
            let len = rng.gen_range(2..=4);
            let s: Vec<char> = (0..len).map(|_| *entity_chars.choose(&mut rng).unwrap()).collect();
            if surfaces.iter().all(|(t, _, _)| !contains(t, &s) && !contains(&s, t)) {
                surfaces.push((s, kind, false));
                made += 1;
            }
        }
    }
    let mut order: Vec<usize> = (0..surfaces.len()).collect();
    order.shuffle(&mut rng);
    let covered = libm::round(config.lexicon_coverage * surfaces.len() as f64) as usize;
    let mut lexicon = Lexicon::new();
    for &i in &order[..covered] {
        let s: String = surfaces[i].0.iter().collect();
        lexicon.insert(&s, surfaces[i].1)?;
    }
    let held = libm::round(config.held_out * surfaces.len() as f64) as usize;
    for &i in &order[..held] {
        surfaces[i].2 = true;
    }

    let train_pool: Vec<usize> = (0..surfaces.len()).filter(|&i| !surfaces[i].2).collect();
    let test_pool: Vec<usize> = (0..surfaces.len()).collect();
    let train = documents(&mut rng, config, config.train_clauses, &surfaces, &train_pool);
    let test = documents(&mut rng, config, config.test_clauses, &surfaces, &test_pool);
    Ok(SyntheticCorpus {
        train,
        test,
        lexicon,
        surfaces: surfaces.into_iter().map(|(s, k, h)| (s.into_iter().collect(), k, h)).collect(),
    })
}

fn clause(
    b: &mut Builder,
    rng: &mut ChaCha8Rng,
    config: &SyntheticConfig,
    surfaces: &[(Vec<char>, EntityType, bool)],
    pool: &[usize],
) {
    let mentions = match rng.gen_range(0..10) {
        0 => 0,
        1 | 2 => 2,
        _ => 1,
    };
    if mentions == 0 || pool.is_empty() {
        b.fillers(rng, 2, 4);
        return;
    }
    b.fillers(rng, 0, 2);
    for m in 0..mentions {
        if m > 0 {
            b.fillers(rng, 1, 1);
        }
        let (surface, kind, _) = &surfaces[*pool.choose(rng).unwrap()];
        let (prefix, suffix) = CUES[kind.index()];
        if rng.gen_bool(config.bare) {
            b.fillers(rng, 1, 1);
            b.mention(surface, *kind);
        } else {
            b.text.push(prefix);
            b.mention(surface, *kind);
            if rng.gen_bool(0.5) {
                b.text.push(suffix);
            }
        }
    }
    b.fillers(rng, 0, 2);
}

fn documents(
    rng: &mut ChaCha8Rng,
    config: &SyntheticConfig,
    clauses: usize,
    surfaces: &[(Vec<char>, EntityType, bool)],
    pool: &[usize],
) -> Vec<Document> {
    let mut docs = Vec::new();
    let mut left = clauses;
    while left > 0 {
        let n = left.min(config.clauses_per_document);
        let mut b = Builder {
            text: Vec::new(),
            entities: Vec::new(),
        };
        for c in 0..n {
            if c > 0 {
                b.text.push('，');
            }
            clause(&mut b, rng, config, surfaces, pool);
        }
        docs.push(Document {
            text: b.text.into_iter().collect(),
            entities: b.entities,
        });
        left -= n;
    }
    docs
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::collections::BTreeSet;
    use crate::corpus::split_clauses;

    #[test]
    fn alphabet_has_fifty_distinct_symbols() {
        let a = alphabet();
        assert_eq!(a.len(), 50);
        assert_eq!(a.iter().collect::<BTreeSet<_>>().len(), 50);
    }

    #[test]
    fn shape_and_determinism() {
        let config = SyntheticConfig::default();
        let a = generate(&config).unwrap();
        let b = generate(&config).unwrap();
        assert_eq!(a.train, b.train);
        assert_eq!(a.test, b.test);
        assert_eq!(a.lexicon, b.lexicon);
        let count = |docs: &[Document]| docs.iter().map(|d| split_clauses(&d.text).len()).sum::<usize>();
        assert_eq!(count(&a.train), 500);
        assert_eq!(count(&a.test), 100);
        assert_eq!(a.surfaces.len(), 100);
        assert_eq!(a.lexicon.len(), 60);
        let other = generate(&SyntheticConfig { seed: 1, ..config }).unwrap();
        assert_ne!(a.train, other.train);
    }

    #[test]
    fn annotations_are_valid_and_held_out_surfaces_stay_out_of_training() {
        let c = generate(&SyntheticConfig::default()).unwrap();
        let held: BTreeSet<&str> = c.held_out_surfaces().collect();
        assert_eq!(held.len(), 15);
        for s in &held {
            let key: Vec<char> = s.chars().collect();
            assert!(c.lexicon.get(&key).is_some());
        }
        let alpha: BTreeSet<char> = alphabet().into_iter().collect();
        for (split, docs) in [("train", &c.train), ("test", &c.test)] {
            for d in docs.iter() {
                d.labeled_clauses().unwrap();
                assert!(d.text.chars().all(|ch| ch == '，' || alpha.contains(&ch)));
                let chars: Vec<char> = d.text.chars().collect();
                for e in &d.entities {
                    let s: String = chars[e.start..=e.end].iter().collect();
                    let (_, kind, _) = c.surfaces.iter().find(|x| x.0 == s).unwrap();
                    assert_eq!(*kind, e.kind);
                    if split == "train" {
                        assert!(!held.contains(s.as_str()));
                    }
                }
            }
        }
        let test_mentions_held = c
            .test
            .iter()
            .flat_map(|d| {
                let chars: Vec<char> = d.text.chars().collect();
                d.entities
                    .iter()
                    .map(move |e| chars[e.start..=e.end].iter().collect::<String>())
                    .collect::<Vec<_>>()
            })
            .filter(|s| held.contains(s.as_str()))
            .count();
        assert!(test_mentions_held > 0);
    }

    #[test]
    fn rejects_bad_fractions() {
        let bad = SyntheticConfig {
            bare: 1.5,
            ..SyntheticConfig::default()
        };
        assert!(matches!(generate(&bad), Err(Error::Config(_))));
        let bad = SyntheticConfig {
            held_out: 0.7,
            ..SyntheticConfig::default()
        };
        assert!(matches!(generate(&bad), Err(Error::Config(_))));
    }
}
