//! Flat `key = value` run configuration over every `TrainConfig` field.

use std::path::Path;

use rdcc_core::encoder::Branches;
use rdcc_core::trainer::TrainConfig;

use crate::{Error, Result};

/// Every accepted key with a short description, in file order.
pub const KEYS: &[(&str, &str)] = &[
    ("char_dim", "character embedding width"),
    ("feature_dim", "dictionary feature embedding width"),
    ("blocks", "residual blocks in the dilated branch"),
    ("filters", "filters per dilated convolution"),
    ("window", "window of the dilated convolutions"),
    ("dilation_base", "block i uses dilation dilation_base^i"),
    ("std_filters", "filters of the standard convolution"),
    ("std_window", "window of the standard convolution"),
    ("branches", "left, right or both"),
    ("residual", "identity skip around each block"),
    ("leaky_slope", "negative slope of the leaky ReLU"),
    ("bn_momentum", "running-statistics momentum"),
    ("bn_epsilon", "batch-norm variance epsilon"),
    ("batch_size", "clauses per batch"),
    ("learning_rate", "Adam step size"),
    ("beta1", "Adam first-moment decay"),
    ("beta2", "Adam second-moment decay"),
    ("adam_epsilon", "Adam denominator epsilon"),
    ("epochs", "passes over the training clauses"),
    ("seed", "initialisation, shuffling and dropout seed"),
    ("char_dropout", "probability of replacing a training character by UNK"),
    ("max_clause_len", "longest accepted clause in characters"),
    ("constrained_decoding", "forbid invalid BIEOS transitions when decoding"),
    ("refresh_bn_stats", "recompute batch-norm statistics after training"),
];

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> std::result::Result<T, String>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e| format!("bad value {value:?} for {key}: {e}"))
}

/// Sets one field. Unknown keys are an error.
pub fn set(config: &mut TrainConfig, key: &str, value: &str) -> std::result::Result<(), String> {
    let e = &mut config.encoder;
    match key {
        "char_dim" => e.char_dim = parse(key, value)?,
        "feature_dim" => e.feature_dim = parse(key, value)?,
        "blocks" => e.blocks = parse(key, value)?,
        "filters" => e.filters = parse(key, value)?,
        "window" => e.window = parse(key, value)?,
        "dilation_base" => e.dilation_base = parse(key, value)?,
        "std_filters" => e.std_filters = parse(key, value)?,
        "std_window" => e.std_window = parse(key, value)?,
        "branches" => e.branches = value.parse::<Branches>().map_err(|err| err.to_string())?,
        "residual" => e.residual = parse(key, value)?,
        "leaky_slope" => e.leaky_slope = parse(key, value)?,
        "bn_momentum" => e.bn_momentum = parse(key, value)?,
        "bn_epsilon" => e.bn_epsilon = parse(key, value)?,
        "batch_size" => config.batch_size = parse(key, value)?,
        "learning_rate" => config.learning_rate = parse(key, value)?,
        "beta1" => config.beta1 = parse(key, value)?,
        "beta2" => config.beta2 = parse(key, value)?,
        "adam_epsilon" => config.adam_epsilon = parse(key, value)?,
        "epochs" => config.epochs = parse(key, value)?,
        "seed" => config.seed = parse(key, value)?,
        "char_dropout" => config.char_dropout = parse(key, value)?,
        "max_clause_len" => config.max_clause_len = parse(key, value)?,
        "constrained_decoding" => config.constrained_decoding = parse(key, value)?,
        "refresh_bn_stats" => config.refresh_bn_stats = parse(key, value)?,
        _ => return Err(format!("unknown key {key:?}")),
    }
    Ok(())
}

pub fn get(config: &TrainConfig, key: &str) -> Option<String> {
    let e = &config.encoder;
    Some(match key {
        "char_dim" => e.char_dim.to_string(),
        "feature_dim" => e.feature_dim.to_string(),
        "blocks" => e.blocks.to_string(),
        "filters" => e.filters.to_string(),
        "window" => e.window.to_string(),
        "dilation_base" => e.dilation_base.to_string(),
        "std_filters" => e.std_filters.to_string(),
        "std_window" => e.std_window.to_string(),
        "branches" => e.branches.name().to_string(),
        "residual" => e.residual.to_string(),
        "leaky_slope" => e.leaky_slope.to_string(),
        "bn_momentum" => e.bn_momentum.to_string(),
        "bn_epsilon" => e.bn_epsilon.to_string(),
        "batch_size" => config.batch_size.to_string(),
        "learning_rate" => config.learning_rate.to_string(),
        "beta1" => config.beta1.to_string(),
        "beta2" => config.beta2.to_string(),
        "adam_epsilon" => config.adam_epsilon.to_string(),
        "epochs" => config.epochs.to_string(),
        "seed" => config.seed.to_string(),
        "char_dropout" => config.char_dropout.to_string(),
        "max_clause_len" => config.max_clause_len.to_string(),
        "constrained_decoding" => config.constrained_decoding.to_string(),
        "refresh_bn_stats" => config.refresh_bn_stats.to_string(),
        _ => return None,
    })
}

/// Applies a config file on top of `config`. Later lines win.
pub fn apply_file(config: &mut TrainConfig, path: &Path, text: &str) -> Result<()> {
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::parse(path, i + 1, "expected key = value"))?;
        set(config, key.trim(), value.trim()).map_err(|m| Error::parse(path, i + 1, m))?;
    }
    Ok(())
}

/// Applies `key=value` overrides from the command line.
pub fn apply_overrides(config: &mut TrainConfig, overrides: &[String]) -> Result<()> {
    for item in overrides {
        let (key, value) = item
            .split_once('=')
            .ok_or_else(|| Error::Usage(format!("override {item:?} is not key=value")))?;
        set(config, key.trim(), value.trim()).map_err(Error::Usage)?;
    }
    Ok(())
}

/// A complete config file with every key and its current value.
pub fn render(config: &TrainConfig) -> String {
    let mut out = String::new();
    for (key, doc) in KEYS {
        out.push_str(&format!("# {doc}\n{key} = {}\n", get(config, key).expect("listed keys exist")));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rendered_defaults_parse_back() {
        let defaults = TrainConfig::default();
        let mut c = TrainConfig {
            seed: 99,
            ..TrainConfig::default()
        };
        apply_file(&mut c, Path::new("x"), &render(&defaults)).unwrap();
        assert_eq!(c, defaults);
        for (key, _) in KEYS {
            assert!(get(&defaults, key).is_some(), "{key}");
        }
    }

    #[test]
    fn values_comments_and_errors() {
        let mut c = TrainConfig::default();
        let text = "# ablation\nbranches = right  # standard only\nresidual=false\n\nlearning_rate = 0.01\n";
        apply_file(&mut c, Path::new("x"), text).unwrap();
        assert_eq!(c.encoder.branches, Branches::Right);
        assert!(!c.encoder.residual);
        assert_eq!(c.learning_rate, 0.01);
        let err = apply_file(&mut c, Path::new("x"), "epochs = 3\nfilter = 8\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
        assert!(err.to_string().contains("unknown key"));
        assert!(apply_file(&mut c, Path::new("x"), "epochs = many\n").is_err());
        assert!(apply_file(&mut c, Path::new("x"), "epochs\n").is_err());
        apply_overrides(&mut c, &["epochs=4".into()]).unwrap();
        assert_eq!(c.epochs, 4);
        assert!(matches!(apply_overrides(&mut c, &["nope=1".into()]), Err(Error::Usage(_))));
    }
}
