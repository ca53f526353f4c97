//! Run configuration: a strict flat `key = value` text format.
//!
//! One file describes a whole recognition run — candidate set, channel,
//! dataset generation, model profile, and training budget — so that every
//! command-line invocation is reproducible from the file plus a seed. The
//! format is deliberately primitive: one `key = value` pair per line,
//! `#` starts a comment, keys are dotted to group them by stage. Unknown
//! keys, duplicate keys, and malformed values are hard errors so a typo can
//! never silently fall back to a default.

use std::collections::BTreeMap;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::channel::{ChannelConfig, ChannelModel};
use crate::codebook::Scheme;
use crate::dataset::{self, SplitSpec};
use crate::features::EvidenceSource;
use crate::fec::DecoderConfig;
use crate::nn::{ModelConfig, TrainConfig};
use crate::{Error, Result};

// ---------------------------------------------------------------------------
// Model profiles
// ---------------------------------------------------------------------------

/// Which network architecture a run trains.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelProfile {
    /// Compact single-core profile: same layer pattern as the full
    /// architecture at a fraction of the width.
    Compact,
    /// The full published architecture (128-channel convolutions, two
    /// 1024-wide dense layers).
    Full,
}

impl ModelProfile {
    pub fn as_str(&self) -> &'static str {
        match self {
            ModelProfile::Compact => "compact",
            ModelProfile::Full => "full",
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        match text {
            "compact" => Ok(ModelProfile::Compact),
            "full" => Ok(ModelProfile::Full),
            other => Err(Error::config(format!(
                "unknown model profile `{other}` (expected compact|full)"
            ))),
        }
    }
}

// ---------------------------------------------------------------------------
// RunConfig
// ---------------------------------------------------------------------------

/// Everything a recognition run needs besides the master seed.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// Code family under test.
    pub scheme: Scheme,
    /// Channel condition template; `snr_db` inside is a placeholder — the
    /// dataset grid supplies per-cell SNRs.
    pub channel: ChannelConfig,
    /// Explicit SNR grid in dB, or `None` for the family default.
    pub snr_grid: Option<Vec<f64>>,
    /// Frames per (channel, SNR, class) cell.
    pub frames_per_cell: usize,
    /// Which per-candidate evidence vector feeds the tensor.
    pub evidence: EvidenceSource,
    /// Iteration budgets for the decoder bank.
    pub decoder: DecoderConfig,
    /// Train/validation/test fractions. The seed field is overwritten with
    /// the run's master seed by the command layer.
    pub split: SplitSpec,
    /// Network size profile.
    pub profile: ModelProfile,
    /// Optional dropout override; `None` keeps the profile's own rate.
    pub dropout: Option<f64>,
    /// Optimisation budget.
    pub train: TrainConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            scheme: Scheme::Ldpc,
            channel: ChannelConfig::default(),
            snr_grid: None,
            frames_per_cell: dataset::DEFAULT_FRAMES_PER_CELL,
            evidence: EvidenceSource::default(),
            decoder: DecoderConfig::default(),
            split: SplitSpec::default(),
            profile: ModelProfile::Compact,
            dropout: None,
            train: TrainConfig::default(),
        }
    }
}

impl RunConfig {
    /// Parses a configuration file. See the module docs for the format.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::config(format!("cannot read {}: {e}", path.display()))
        })?;
        Self::from_text(&text)
    }

    /// Parses configuration text.
    pub fn from_text(text: &str) -> Result<Self> {
        let pairs = parse_pairs(text)?;
        let mut config = RunConfig::default();
        for (key, value) in &pairs {
            config.apply(key, value)?;
        }
        config.validate()?;
        Ok(config)
    }

    fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "set.scheme" => self.scheme = Scheme::parse(value)?,
            "channel.model" => self.channel.model = ChannelModel::parse(value)?,
            "channel.doppler_ratio" => {
                self.channel.doppler_ratio = parse_value(key, value)?
            }
            "channel.path_delay" => {
                self.channel.path_delay_samples = parse_value(key, value)?
            }
            "channel.path_gain0_db" => {
                self.channel.path_gains_db[0] = parse_value(key, value)?
            }
            "channel.path_gain1_db" => {
                self.channel.path_gains_db[1] = parse_value(key, value)?
            }
            "dataset.snr_grid" => self.snr_grid = Some(parse_grid(value)?),
            "dataset.frames_per_cell" => {
                self.frames_per_cell = parse_value(key, value)?
            }
            "dataset.evidence" => self.evidence = EvidenceSource::parse(value)?,
            "dataset.bp_iterations" => {
                self.decoder.bp_iterations = parse_value(key, value)?
            }
            "dataset.turbo_iterations" => {
                self.decoder.turbo_iterations = parse_value(key, value)?
            }
            "dataset.list_size" => self.decoder.list_size = parse_value(key, value)?,
            "dataset.train_fraction" => self.split.train = parse_value(key, value)?,
            "dataset.val_fraction" => self.split.validation = parse_value(key, value)?,
            "dataset.test_fraction" => self.split.test = parse_value(key, value)?,
            "model.profile" => self.profile = ModelProfile::parse(value)?,
            "model.dropout" => self.dropout = Some(parse_value(key, value)?),
            "train.max_epochs" => self.train.max_epochs = parse_value(key, value)?,
            "train.batch_size" => self.train.batch_size = parse_value(key, value)?,
            "train.learning_rate" => {
                self.train.learning_rate = parse_value(key, value)?
            }
            "train.beta1" => self.train.beta1 = parse_value(key, value)?,
            "train.beta2" => self.train.beta2 = parse_value(key, value)?,
            "train.epsilon" => self.train.epsilon = parse_value(key, value)?,
            "train.patience" => self.train.patience = parse_value(key, value)?,
            "train.min_delta" => self.train.min_delta = parse_value(key, value)?,
            other => {
                return Err(Error::config(format!("unknown key `{other}`")));
            }
        }
        Ok(())
    }

    fn validate(&self) -> Result<()> {
        self.channel.validate().map_err(|e| Error::config(e.to_string()))?;
        if self.frames_per_cell == 0 {
            return Err(Error::config("dataset.frames_per_cell must be positive"));
        }
        if let Some(grid) = &self.snr_grid {
            if grid.is_empty() {
                return Err(Error::config("dataset.snr_grid must be non-empty"));
            }
            if grid.iter().any(|s| !s.is_finite()) {
                return Err(Error::config("dataset.snr_grid entries must be finite"));
            }
        }
        if let Some(rate) = self.dropout {
            if !(0.0..1.0).contains(&rate) {
                return Err(Error::config(format!(
                    "model.dropout must lie in [0, 1), got {rate}"
                )));
            }
        }
        Ok(())
    }

    /// Dropout rate the run will actually train with: the explicit override
    /// if set, otherwise the profile's own rate.
    pub fn resolved_dropout(&self) -> f64 {
        match self.dropout {
            Some(rate) => rate,
            // The geometry arguments do not influence the dropout field, so
            // any placeholder shape reads the profile's rate.
            None => match self.profile {
                ModelProfile::Compact => ModelConfig::compact(2, 1, 1).dropout,
                ModelProfile::Full => ModelConfig::full_scale(2, 1, 1).dropout,
            },
        }
    }

    /// The SNR grid this run sweeps: explicit if configured, otherwise the
    /// family default.
    pub fn resolved_snr_grid(&self) -> Vec<f64> {
        match &self.snr_grid {
            Some(grid) => grid.clone(),
            None => dataset::default_snr_grid(self.scheme),
        }
    }

    /// Instantiates the network architecture for a tensor geometry
    /// (`side`×`side`×`channels` input, `classes` outputs).
    pub fn model_config(
        &self,
        side: usize,
        channels: usize,
        classes: usize,
    ) -> Result<ModelConfig> {
        let mut model = match self.profile {
            ModelProfile::Compact => ModelConfig::compact(side, channels, classes),
            ModelProfile::Full => ModelConfig::full_scale(side, channels, classes),
        };
        if let Some(rate) = self.dropout {
            model.dropout = rate;
        }
        model.validate()?;
        Ok(model)
    }

    /// Deterministic full serialisation, defaults included. Cosmetic edits
    /// to a config file (comments, ordering, number formatting) leave this
    /// string — and therefore [`RunConfig::digest_hex`] — unchanged.
    pub fn canonical_text(&self) -> String {
        let mut out = String::new();
        let grid = self.resolved_snr_grid();
        let grid = grid
            .iter()
            .map(|s| format!("{s}"))
            .collect::<Vec<_>>()
            .join(",");
        let lines = [
            format!("set.scheme = {}", self.scheme.as_str()),
            format!("channel.model = {}", self.channel.model.as_str()),
            format!("channel.doppler_ratio = {}", self.channel.doppler_ratio),
            format!("channel.path_delay = {}", self.channel.path_delay_samples),
            format!("channel.path_gain0_db = {}", self.channel.path_gains_db[0]),
            format!("channel.path_gain1_db = {}", self.channel.path_gains_db[1]),
            format!("dataset.snr_grid = {grid}"),
            format!("dataset.frames_per_cell = {}", self.frames_per_cell),
            format!("dataset.evidence = {}", self.evidence.as_str()),
            format!("dataset.bp_iterations = {}", self.decoder.bp_iterations),
            format!("dataset.turbo_iterations = {}", self.decoder.turbo_iterations),
            format!("dataset.list_size = {}", self.decoder.list_size),
            format!("dataset.train_fraction = {}", self.split.train),
            format!("dataset.val_fraction = {}", self.split.validation),
            format!("dataset.test_fraction = {}", self.split.test),
            format!("model.profile = {}", self.profile.as_str()),
            format!("model.dropout = {}", self.resolved_dropout()),
            format!("train.max_epochs = {}", self.train.max_epochs),
            format!("train.batch_size = {}", self.train.batch_size),
            format!("train.learning_rate = {}", self.train.learning_rate),
            format!("train.beta1 = {}", self.train.beta1),
            format!("train.beta2 = {}", self.train.beta2),
            format!("train.epsilon = {}", self.train.epsilon),
            format!("train.patience = {}", self.train.patience),
            format!("train.min_delta = {}", self.train.min_delta),
        ];
        for line in lines {
            out.push_str(&line);
            out.push('\n');
        }
        out
    }

    /// SHA-256 of [`RunConfig::canonical_text`], hex-encoded. Recorded in
    /// every output manifest so results can be traced to the exact
    /// configuration that produced them.
    pub fn digest_hex(&self) -> String {
        let digest = Sha256::digest(self.canonical_text().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

/// Splits config text into `(key, value)` pairs, rejecting malformed lines
/// and duplicate keys. Order is preserved (it does not affect semantics but
/// keeps error messages stable).
fn parse_pairs(text: &str) -> Result<Vec<(String, String)>> {
    let mut pairs = Vec::new();
    let mut seen: BTreeMap<String, usize> = BTreeMap::new();
    for (index, raw) in text.lines().enumerate() {
        let line_no = index + 1;
        let line = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        };
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::config(format!(
                "line {line_no}: expected `key = value`, got `{}`",
                line
            )));
        };
        let key = key.trim();
        let value = value.trim();
        if key.is_empty() || value.is_empty() {
            return Err(Error::config(format!(
                "line {line_no}: empty key or value in `{line}`"
            )));
        }
        if let Some(first) = seen.insert(key.to_string(), line_no) {
            return Err(Error::config(format!(
                "line {line_no}: duplicate key `{key}` (first set on line {first})"
            )));
        }
        pairs.push((key.to_string(), value.to_string()));
    }
    Ok(pairs)
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value.parse::<T>().map_err(|_| {
        Error::config(format!(
            "key `{key}`: cannot parse `{value}` as {}",
            std::any::type_name::<T>()
        ))
    })
}

fn parse_grid(value: &str) -> Result<Vec<f64>> {
    value
        .split(',')
        .map(|part| {
            let part = part.trim();
            part.parse::<f64>().map_err(|_| {
                Error::config(format!(
                    "dataset.snr_grid: cannot parse `{part}` as a dB value"
                ))
            })
        })
        .collect()
}

// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_text_is_a_fixed_point() {
        // Canonical text is itself valid input, and reparsing it reproduces
        // the same canonical text (semantic round trip: an implicit dropout
        // becomes explicit with the same value).
        for text in ["", "model.profile = full\n", "set.scheme = turbo\n"] {
            let config = RunConfig::from_text(text).unwrap();
            let canon = config.canonical_text();
            let reparsed = RunConfig::from_text(&canon).unwrap();
            assert_eq!(reparsed.canonical_text(), canon);
            assert_eq!(reparsed.digest_hex(), config.digest_hex());
        }
    }

    #[test]
    fn full_file_parses() {
        let text = "\
# recognition run: convolutional family over a fading channel
set.scheme = conv
channel.model = rayleigh2   # dual path
channel.doppler_ratio = 0.002
channel.path_delay = 3
channel.path_gain0_db = 0
channel.path_gain1_db = -3
dataset.snr_grid = -4, -2, 0, 2
dataset.frames_per_cell = 64
dataset.evidence = agreement
dataset.bp_iterations = 10
dataset.turbo_iterations = 4
dataset.list_size = 4
dataset.train_fraction = 0.5
dataset.val_fraction = 0.25
dataset.test_fraction = 0.25
model.profile = compact
model.dropout = 0.4
train.max_epochs = 20
train.batch_size = 32
train.learning_rate = 0.001
train.beta1 = 0.9
train.beta2 = 0.999
train.epsilon = 1e-8
train.patience = 5
train.min_delta = 0.001
";
        let config = RunConfig::from_text(text).unwrap();
        assert_eq!(config.scheme, Scheme::Conv);
        assert_eq!(config.channel.model, ChannelModel::DualPathRayleigh);
        assert_eq!(config.channel.path_gains_db, [0.0, -3.0]);
        assert_eq!(config.snr_grid, Some(vec![-4.0, -2.0, 0.0, 2.0]));
        assert_eq!(config.frames_per_cell, 64);
        assert_eq!(config.decoder.bp_iterations, 10);
        assert_eq!(config.split.test, 0.25);
        assert_eq!(config.dropout, Some(0.4));
        assert_eq!(config.train.max_epochs, 20);
        assert_eq!(config.train.min_delta, 0.001);
    }

    #[test]
    fn empty_text_gives_defaults() {
        let config = RunConfig::from_text("# nothing but comments\n\n").unwrap();
        assert_eq!(config, RunConfig::default());
        assert_eq!(config.resolved_snr_grid(), dataset::default_snr_grid(Scheme::Ldpc));
    }

    #[test]
    fn snr_grid_falls_back_per_scheme() {
        let config = RunConfig::from_text("set.scheme = polar\n").unwrap();
        assert_eq!(config.resolved_snr_grid(), dataset::default_snr_grid(Scheme::Polar));
        let explicit = RunConfig::from_text(
            "set.scheme = polar\ndataset.snr_grid = 1.5\n",
        )
        .unwrap();
        assert_eq!(explicit.resolved_snr_grid(), vec![1.5]);
    }

    #[test]
    fn malformed_lines_are_rejected() {
        let cases = [
            ("set.scheme ldpc\n", "expected `key = value`"),
            ("set.scheme =\n", "empty key or value"),
            ("= ldpc\n", "empty key or value"),
            ("set.scheme = ldpc\nset.scheme = conv\n", "duplicate key"),
            ("no.such.key = 1\n", "unknown key"),
            ("train.batch_size = many\n", "cannot parse"),
            ("dataset.snr_grid = 1,,2\n", "cannot parse"),
            ("set.scheme = hamming\n", "hamming"),
            ("model.dropout = 1.0\n", "dropout"),
            ("dataset.frames_per_cell = 0\n", "must be positive"),
        ];
        for (text, needle) in cases {
            let err = RunConfig::from_text(text).unwrap_err().to_string();
            assert!(
                err.contains(needle),
                "expected `{needle}` in `{err}` for input {text:?}"
            );
        }
    }

    #[test]
    fn digest_ignores_formatting_but_not_values() {
        let a = RunConfig::from_text("set.scheme = ldpc\n").unwrap();
        let b = RunConfig::from_text("# comment\n  set.scheme   =   ldpc  \n").unwrap();
        assert_eq!(a.digest_hex(), b.digest_hex());
        let c = RunConfig::from_text("set.scheme = conv\n").unwrap();
        assert_ne!(a.digest_hex(), c.digest_hex());
        assert_eq!(a.digest_hex().len(), 64);
    }

    #[test]
    fn model_config_respects_profile_and_override() {
        let compact = RunConfig::from_text("set.scheme = conv\n").unwrap();
        let model = compact.model_config(11, 7, 7).unwrap();
        assert_eq!(model.input_side, 11);
        assert_eq!(model.input_channels, 7);
        assert_eq!(model.classes(), 7);
        assert_eq!(model.dropout, 0.5);

        let full = RunConfig::from_text(
            "set.scheme = conv\nmodel.profile = full\nmodel.dropout = 0.65\n",
        )
        .unwrap();
        let model = full.model_config(11, 7, 7).unwrap();
        assert_eq!(model.dense, vec![1024, 1024, 7]);
        assert_eq!(model.dropout, 0.65);
    }
}
