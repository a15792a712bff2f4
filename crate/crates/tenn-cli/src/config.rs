//! Flat key=value config files with optional [network]/[adam]/[loss]
//! sections. Unknown keys are collected and reported together.

use std::collections::BTreeMap;
use std::path::Path;
use tenn_core::jet::ActivationKind;
use tenn_core::losses::{
    TERM_CURL, TERM_FLUX, TERM_IC_TENN, TERM_IC_VANILLA, TERM_INCMP, TERM_PDE,
};
use tenn_core::network::{HiddenLayer, NetworkSpec, PeriodicDictionary};
use tenn_core::trainer::{ModelKind, TrainConfig};
use tenn_core::TennVariant;

#[derive(Debug)]
pub enum ConfigError {
    Io(std::io::Error),
    Syntax { line: usize, text: String },
    UnknownKeys(Vec<String>),
    UnknownSection { line: usize, section: String },
    BadValue { key: String, value: String, reason: String },
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ConfigError::Io(e) => write!(f, "cannot read config: {e}"),
            ConfigError::Syntax { line, text } => {
                write!(f, "config syntax error on line {line}: {text:?} (expected key = value)")
            }
            ConfigError::UnknownKeys(keys) => {
                write!(f, "unknown config keys: {}", keys.join(", "))
            }
            ConfigError::UnknownSection { line, section } => {
                write!(f, "unknown config section [{section}] on line {line}")
            }
            ConfigError::BadValue { key, value, reason } => {
                write!(f, "bad value for {key}: {value:?} ({reason})")
            }
        }
    }
}

impl std::error::Error for ConfigError {}

impl From<std::io::Error> for ConfigError {
    fn from(e: std::io::Error) -> Self {
        ConfigError::Io(e)
    }
}

const SECTIONS: [&str; 4] = ["", "network", "adam", "loss"];

const TOP_KEYS: [&str; 11] = [
    "model",
    "variant",
    "re",
    "t_end",
    "epochs",
    "interior_points",
    "ic_points",
    "batch_size",
    "seed",
    "eps_div",
    "deterministic",
];
const NETWORK_KEYS: [&str; 3] = ["harmonics", "hidden", "activation"];
const ADAM_KEYS: [&str; 4] = ["lr", "beta1", "beta2", "eps"];
const LOSS_KEYS: [&str; 6] =
    ["alpha_pde", "alpha_curl", "alpha_incmp", "alpha_ic_vanilla", "alpha_ic_tenn", "alpha_flux"];

/// Parsed key/value pairs, keyed by "section.key" ("" section keys are bare).
pub fn parse_pairs(text: &str) -> Result<BTreeMap<String, String>, ConfigError> {
    let mut section = String::new();
    let mut pairs = BTreeMap::new();
    let mut unknown = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
            let name = name.trim().to_string();
            if !SECTIONS.contains(&name.as_str()) {
                return Err(ConfigError::UnknownSection { line: n + 1, section: name });
            }
            section = name;
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(ConfigError::Syntax { line: n + 1, text: raw.to_string() });
        };
        let key = key.trim();
        let known = match section.as_str() {
            "" => TOP_KEYS.contains(&key),
            "network" => NETWORK_KEYS.contains(&key),
            "adam" => ADAM_KEYS.contains(&key),
            "loss" => LOSS_KEYS.contains(&key),
            _ => false,
        };
        let full = if section.is_empty() { key.to_string() } else { format!("{section}.{key}") };
        if !known {
            unknown.push(full);
            continue;
        }
        pairs.insert(full, value.trim().to_string());
    }
    if !unknown.is_empty() {
        return Err(ConfigError::UnknownKeys(unknown));
    }
    Ok(pairs)
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e: T::Err| ConfigError::BadValue {
        key: key.to_string(),
        value: value.to_string(),
        reason: e.to_string(),
    })
}

/// Assemble a TrainConfig: model/variant pick the preset, every other key
/// overrides a preset field.
pub fn config_from_pairs(pairs: &BTreeMap<String, String>) -> Result<TrainConfig, ConfigError> {
    let model: ModelKind = match pairs.get("model") {
        Some(v) => parse_value("model", v)?,
        None => ModelKind::Tenn,
    };
    let variant = match pairs.get("variant").map(String::as_str) {
        None | Some("potential") => TennVariant::PotentialB,
        Some("split") => TennVariant::SplitA,
        Some(other) => {
            return Err(ConfigError::BadValue {
                key: "variant".into(),
                value: other.into(),
                reason: "expected potential|split".into(),
            })
        }
    };
    let re = match pairs.get("re") {
        Some(v) => parse_value("re", v)?,
        None => 100.0,
    };

    let mut config = TrainConfig::preset(model, re);
    config.variant = variant;
    config.weights = TrainConfig::preset_weights(model, variant);
    config.network.heads = config.head_role();

    if let Some(v) = pairs.get("t_end") {
        config.t_end = parse_value("t_end", v)?;
    }
    if let Some(v) = pairs.get("epochs") {
        config.epochs = parse_value("epochs", v)?;
    }
    if let Some(v) = pairs.get("interior_points") {
        config.interior_points = parse_value("interior_points", v)?;
    }
    if let Some(v) = pairs.get("ic_points") {
        config.ic_points = parse_value("ic_points", v)?;
    }
    if let Some(v) = pairs.get("batch_size") {
        config.batch_size = parse_value("batch_size", v)?;
    }
    if let Some(v) = pairs.get("seed") {
        config.seed = parse_value("seed", v)?;
    }
    if let Some(v) = pairs.get("eps_div") {
        config.eps_div = parse_value("eps_div", v)?;
    }
    if let Some(v) = pairs.get("deterministic") {
        config.deterministic = parse_value("deterministic", v)?;
    }

    let harmonics = match pairs.get("network.harmonics") {
        Some(v) => parse_value("network.harmonics", v)?,
        None => config.network.dictionary.harmonics,
    };
    let widths: Vec<usize> = match pairs.get("network.hidden") {
        Some(v) => v
            .split(',')
            .map(|s| parse_value::<usize>("network.hidden", s.trim()))
            .collect::<Result<_, _>>()?,
        None => config.network.hidden.iter().map(|h| h.width).collect(),
    };
    let acts: Vec<ActivationKind> = match pairs.get("network.activation") {
        Some(v) => {
            let parsed: Vec<ActivationKind> = v
                .split(',')
                .map(|s| {
                    s.trim().parse().map_err(|e: String| ConfigError::BadValue {
                        key: "network.activation".into(),
                        value: s.trim().into(),
                        reason: e,
                    })
                })
                .collect::<Result<_, _>>()?;
            if parsed.len() == 1 {
                vec![parsed[0]; widths.len()]
            } else if parsed.len() == widths.len() {
                parsed
            } else {
                return Err(ConfigError::BadValue {
                    key: "network.activation".into(),
                    value: v.clone(),
                    reason: format!("expected 1 or {} activations", widths.len()),
                });
            }
        }
        None => vec![config.network.hidden[0].activation; widths.len()],
    };
    config.network = NetworkSpec {
        dictionary: PeriodicDictionary { harmonics, ..Default::default() },
        hidden: widths
            .iter()
            .zip(&acts)
            .map(|(&width, &activation)| HiddenLayer { width, activation })
            .collect(),
        heads: config.head_role(),
    };

    if let Some(v) = pairs.get("adam.lr") {
        config.adam.lr = parse_value("adam.lr", v)?;
    }
    if let Some(v) = pairs.get("adam.beta1") {
        config.adam.beta1 = parse_value("adam.beta1", v)?;
    }
    if let Some(v) = pairs.get("adam.beta2") {
        config.adam.beta2 = parse_value("adam.beta2", v)?;
    }
    if let Some(v) = pairs.get("adam.eps") {
        config.adam.eps = parse_value("adam.eps", v)?;
    }

    for (key, idx) in [
        ("loss.alpha_pde", TERM_PDE),
        ("loss.alpha_curl", TERM_CURL),
        ("loss.alpha_incmp", TERM_INCMP),
        ("loss.alpha_ic_vanilla", TERM_IC_VANILLA),
        ("loss.alpha_ic_tenn", TERM_IC_TENN),
        ("loss.alpha_flux", TERM_FLUX),
    ] {
        if let Some(v) = pairs.get(key) {
            config.weights.alpha[idx] = parse_value(key, v)?;
        }
    }

    Ok(config)
}

/// Load a config file and apply it over the presets.
pub fn load_config(path: &Path) -> Result<TrainConfig, ConfigError> {
    let text = std::fs::read_to_string(path)?;
    config_from_pairs(&parse_pairs(&text)?)
}

/// Key-by-key documentation of the config format, with defaults.
pub fn config_help() -> String {
    let d = TrainConfig::preset(ModelKind::Tenn, 100.0);
    format!(
        "CONFIG FILE FORMAT (key = value; # comments; sections in brackets):\n\
         \n\
         model = tenn                 vanilla | tenn (default tenn)\n\
         variant = potential          potential | split (TENN head wiring, default potential)\n\
         re = 100                     Reynolds number (default 100)\n\
         t_end = {t_end}                  time horizon (default {t_end})\n\
         epochs = {epochs}                epochs; collocation resampled each epoch (default {epochs})\n\
         interior_points = {ip}       interior collocation per epoch (default {ip})\n\
         ic_points = {icp}            t = 0 collocation per epoch (default {icp})\n\
         batch_size = {bs}                interior minibatch per ADAM step; 0 = full batch (default {bs})\n\
         seed = {seed}                     RNG seed (default {seed})\n\
         eps_div = {eps}               velocity-recovery regularizer (default {eps})\n\
         deterministic = {det}         bit-reproducible runs (default {det}; runs are\n\
                                      deterministic at any worker count either way)\n\
         \n\
         [network]\n\
         harmonics = {k}                periodic-dictionary harmonics K (default {k})\n\
         hidden = 64,64,64,64         hidden-layer widths (default 64,64,64,64)\n\
         activation = tanh            sin | tanh | softplus; one value or per-layer list (default tanh)\n\
         \n\
         [adam]\n\
         lr = {lr}                    learning rate (default {lr})\n\
         beta1 = {b1}                    (default {b1})\n\
         beta2 = {b2}                  (default {b2})\n\
         eps = {aeps}                     (default {aeps})\n\
         \n\
         [loss]\n\
         alpha_pde / alpha_curl / alpha_incmp / alpha_ic_vanilla / alpha_ic_tenn / alpha_flux\n\
                                      term weights; defaults are the model preset\n\
                                      (vanilla: pde,incmp,ic_vanilla = 1; tenn: curl,incmp,ic_tenn = 1)\n",
        t_end = d.t_end,
        epochs = d.epochs,
        ip = d.interior_points,
        icp = d.ic_points,
        bs = d.batch_size,
        seed = d.seed,
        eps = d.eps_div,
        det = d.deterministic,
        k = d.network.dictionary.harmonics,
        lr = d.adam.lr,
        b1 = d.adam.beta1,
        b2 = d.adam.beta2,
        aeps = d.adam.eps,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_full_config() {
        let text = "\
            # experiment\n\
            model = vanilla\n\
            re = 0.1\n\
            epochs = 12\n\
            [network]\n\
            hidden = 8,8\n\
            activation = sin\n\
            [adam]\n\
            lr = 5e-4\n\
            [loss]\n\
            alpha_pde = 2.5\n";
        let config = config_from_pairs(&parse_pairs(text).unwrap()).unwrap();
        assert_eq!(config.model, ModelKind::Vanilla);
        assert_eq!(config.re, 0.1);
        assert_eq!(config.epochs, 12);
        assert_eq!(config.network.hidden.len(), 2);
        assert_eq!(config.network.hidden[0].width, 8);
        assert_eq!(config.network.hidden[0].activation, ActivationKind::Sin);
        assert_eq!(config.adam.lr, 5e-4);
        assert_eq!(config.weights.alpha[TERM_PDE], 2.5);
        // vanilla preset zeroes the TENN terms
        assert_eq!(config.weights.alpha[TERM_CURL], 0.0);
        config.validate().unwrap();
    }

    #[test]
    fn unknown_keys_are_listed() {
        let text = "model = tenn\nbogus = 1\n[network]\nwat = 2\n";
        match parse_pairs(text) {
            Err(ConfigError::UnknownKeys(keys)) => {
                assert_eq!(keys, vec!["bogus".to_string(), "network.wat".to_string()]);
            }
            other => panic!("expected unknown keys, got {other:?}"),
        }
    }

    #[test]
    fn syntax_and_section_errors() {
        assert!(matches!(parse_pairs("model tenn\n"), Err(ConfigError::Syntax { line: 1, .. })));
        assert!(matches!(
            parse_pairs("[weird]\n"),
            Err(ConfigError::UnknownSection { line: 1, .. })
        ));
    }

    #[test]
    fn split_variant_selects_preset() {
        let text = "model = tenn\nvariant = split\n";
        let config = config_from_pairs(&parse_pairs(text).unwrap()).unwrap();
        assert_eq!(config.head_role(), tenn_core::HeadRole::TennSplit);
        assert_eq!(config.weights.alpha[TERM_FLUX], 1.0);
        assert_eq!(config.weights.alpha[TERM_CURL], 0.0);
    }
}
