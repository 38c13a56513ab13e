//! Binary model files.
//!
//! Layout: `RDCC`, format version (u32 LE), header length (u32 LE), UTF-8
//! JSON header, then for every parameter in header order its rank (u32),
//! extents (u32 each) and row-major f64 LE values.

use std::path::Path;

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rdcc_core::dictionary::DictFeature;
use rdcc_core::model::ParamKind;
use rdcc_core::trainer::TrainConfig;
use rdcc_core::{CharVocab, Model, Tag};
use serde::{Deserialize, Serialize};

use crate::io::write_atomic;
use crate::{Error, Result};

pub const MAGIC: &[u8; 4] = b"RDCC";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamInfo {
    pub name: String,
    pub shape: Vec<usize>,
    pub trainable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Header {
    pub config: TrainConfig,
    /// Characters from id 2 on; ids 0 and 1 are PAD and UNK.
    pub vocab: Vec<char>,
    pub tags: Vec<String>,
    pub dict_features: Vec<String>,
    pub params: Vec<ParamInfo>,
}

impl Header {
    pub fn of(model: &Model) -> Self {
        Header {
            config: model.config.clone(),
            vocab: model.vocab.chars().to_vec(),
            tags: Tag::all().map(|t| t.to_string()).collect(),
            dict_features: (0..DictFeature::COUNT)
                .map(|i| DictFeature::from_index(i).expect("in range").to_string())
                .collect(),
            params: model
                .params
                .named()
                .into_iter()
                .map(|(name, kind, t)| ParamInfo {
                    name,
                    shape: t.shape().to_vec(),
                    trainable: kind == ParamKind::Trainable,
                })
                .collect(),
        }
    }
}

pub fn to_bytes(model: &Model) -> Vec<u8> {
    let header = serde_json::to_vec(&Header::of(model)).expect("header always serializes");
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(header.len() as u32).to_le_bytes());
    out.extend_from_slice(&header);
    for (_, _, t) in model.params.named() {
        out.extend_from_slice(&(t.shape().len() as u32).to_le_bytes());
        for &e in t.shape() {
            out.extend_from_slice(&(e as u32).to_le_bytes());
        }
        for v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.bytes.len() - self.at < n {
            return Err(Error::format(self.path, format!("truncated file while reading {what}")));
        }
        let s = &self.bytes[self.at..self.at + n];
        self.at += n;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().expect("4 bytes")))
    }
}

pub fn from_bytes(path: &Path, bytes: &[u8]) -> Result<Model> {
    let mut r = Reader { bytes, at: 0, path };
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return Err(Error::format(path, "bad magic: not an RDCC model file"));
    }
    r.at = 4;
    let version = r.u32("version")?;
    if version != VERSION {
        return Err(Error::format(
            path,
            format!("unsupported format version: expected {VERSION}, found {version}"),
        ));
    }
    let len = r.u32("header length")? as usize;
    let header: Header = serde_json::from_slice(r.take(len, "header")?)
        .map_err(|e| Error::format(path, format!("bad header: {e}")))?;
    if header.tags.len() != Tag::COUNT {
        return Err(Error::format(path, format!("expected {} tags, header lists {}", Tag::COUNT, header.tags.len())));
    }
    let vocab = CharVocab::from_chars(header.vocab.iter().copied());
    if vocab.chars().len() != header.vocab.len() {
        return Err(Error::format(path, "vocabulary lists a character twice"));
    }
    // The rebuilt architecture must agree with the header before any value
    // is copied; the initial values themselves are overwritten.
    let mut model = Model::new(header.config.clone(), vocab, &mut ChaCha8Rng::seed_from_u64(0))?;
    let expected = Header::of(&model).params;
    if expected != header.params {
        return Err(Error::format(path, "parameter list does not match the configured architecture"));
    }
    for (info, (_, _, t)) in header.params.iter().zip(model.params.named_mut()) {
        let rank = r.u32(&info.name)? as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(r.u32(&info.name)? as usize);
        }
        if shape != info.shape {
            return Err(Error::format(
                path,
                format!("{}: blob shape {shape:?}, header shape {:?}", info.name, info.shape),
            ));
        }
        let raw = r.take(8 * t.data().len(), &info.name)?;
        for (v, chunk) in t.data_mut().iter_mut().zip(raw.chunks_exact(8)) {
            *v = f64::from_le_bytes(chunk.try_into().expect("8 bytes"));
        }
    }
    if r.at != bytes.len() {
        return Err(Error::format(path, format!("{} trailing bytes after the parameters", bytes.len() - r.at)));
    }
    Ok(model)
}

pub fn save(model: &Model, path: &Path) -> Result<()> {
    write_atomic(path, &to_bytes(model))
}

pub fn load(path: &Path) -> Result<Model> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    from_bytes(path, &bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rdcc_core::encoder::EncoderConfig;

    fn model() -> Model {
        let config = TrainConfig {
            encoder: EncoderConfig {
                char_dim: 3,
                feature_dim: 3,
                filters: 6,
                std_filters: 6,
                ..EncoderConfig::default()
            },
            learning_rate: 0.1 + 0.2,
            ..TrainConfig::default()
        };
        let mut m = Model::new(config, CharVocab::from_chars("腹平坦".chars()), &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        m.params.transitions.data_mut()[0] = f64::MIN_POSITIVE / 3.0;
        m
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let m = model();
        let bytes = to_bytes(&m);
        let back = from_bytes(Path::new("m"), &bytes).unwrap();
        assert_eq!(back.config, m.config);
        assert_eq!(back.vocab, m.vocab);
        for ((_, _, a), (_, _, b)) in m.params.named().into_iter().zip(back.params.named()) {
            let bits = |t: &rdcc_core::nn::Tensor| t.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(a), bits(b));
        }
        assert_eq!(to_bytes(&back), bytes);
    }

    #[test]
    fn corrupt_files_are_refused() {
        let bytes = to_bytes(&model());
        let p = Path::new("m");
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(from_bytes(p, &bad).unwrap_err().to_string().contains("bad magic"));
        let mut bad = bytes.clone();
        bad[4] = 7;
        let msg = from_bytes(p, &bad).unwrap_err().to_string();
        assert!(msg.contains("expected 1, found 7"), "{msg}");
        assert!(from_bytes(p, &bytes[..bytes.len() - 1]).unwrap_err().to_string().contains("truncated"));
        let mut long = bytes.clone();
        long.push(0);
        assert!(from_bytes(p, &long).unwrap_err().to_string().contains("trailing"));
        assert!(from_bytes(p, b"RD").is_err());
    }

    #[test]
    fn header_lists_tags_and_parameters() {
        let h = Header::of(&model());
        assert_eq!(h.tags.len(), 21);
        assert_eq!(h.tags[0], "O");
        assert_eq!(h.dict_features[0], "None");
        assert_eq!(h.params.last().unwrap().name, "crf.transitions");
        assert_eq!(h.params.last().unwrap().shape, [22, 21]);
        assert!(h.params.iter().any(|p| !p.trainable));
    }
}
