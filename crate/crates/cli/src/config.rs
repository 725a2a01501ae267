//! Pipeline configuration resolved from flags, an optional config file and defaults.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use serde::Deserialize;

use georef_core::matching::MatchWeights;
use georef_core::pipeline::PipelineConfig;

/// Tuning flags shared by `georeference` and `inspect`. Unset flags fall back
/// to the config file, then to the built-in defaults.
#[derive(Debug, Clone, Default, Args)]
pub struct TuningArgs {
    /// Key-value config file (TOML syntax) with any of: weights, threshold,
    /// delta_d, near_alpha, near_beta, near_gamma, promotion, strict, dict
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Reference and spatial weights `w_ref,w_spat`, summing to 1 [default: 0.7,0.3]
    #[arg(long, value_name = "W_REF,W_SPAT")]
    pub weights: Option<MatchWeights>,

    /// Classification threshold in [0, 1] [default: 0.7]
    #[arg(long)]
    pub threshold: Option<f64>,

    /// K-function distance interval in meters [default: 100]
    #[arg(long, value_name = "METERS")]
    pub delta_d: Option<f64>,

    /// Near-buffer constant term in meters [default: 100]
    #[arg(long)]
    pub near_alpha: Option<f64>,

    /// Near-buffer coefficient on the relatum area [default: 0.001]
    #[arg(long)]
    pub near_beta: Option<f64>,

    /// Near-buffer coefficient on the context area [default: 0.00005]
    #[arg(long)]
    pub near_gamma: Option<f64>,

    /// Score every place against anchors only, in a single pass
    #[arg(long)]
    pub no_promotion: bool,

    /// Reject relation phrases missing from the synonym table (the default)
    #[arg(long, conflicts_with = "lenient")]
    pub strict: bool,

    /// Drop edges with unknown relation phrases, with a warning
    #[arg(long)]
    pub lenient: bool,

    /// Semantic dictionary replacing the built-in one
    #[arg(long, value_name = "FILE")]
    pub dict: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    weights: Option<[f64; 2]>,
    threshold: Option<f64>,
    delta_d: Option<f64>,
    near_alpha: Option<f64>,
    near_beta: Option<f64>,
    near_gamma: Option<f64>,
    promotion: Option<bool>,
    strict: Option<bool>,
    dict: Option<PathBuf>,
}

fn read_config_file(path: &Path) -> Result<ConfigFile> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("parsing config file {}", path.display()))
}

impl TuningArgs {
    /// Applies precedence flags > config file > defaults and validates the result.
    pub fn resolve(&self) -> Result<PipelineConfig> {
        let file = match &self.config {
            Some(p) => read_config_file(p)?,
            None => ConfigFile::default(),
        };
        let mut cfg = PipelineConfig::default();

        if let Some([r, s]) = file.weights {
            cfg.weights = MatchWeights::new(r, s).context("config file `weights`")?;
        }
        if let Some(w) = self.weights {
            cfg.weights = w;
        }
        cfg.threshold = self.threshold.or(file.threshold).unwrap_or(cfg.threshold);
        cfg.delta_d = self.delta_d.or(file.delta_d).unwrap_or(cfg.delta_d);
        cfg.near.alpha = self.near_alpha.or(file.near_alpha).unwrap_or(cfg.near.alpha);
        cfg.near.beta = self.near_beta.or(file.near_beta).unwrap_or(cfg.near.beta);
        cfg.near.gamma = self.near_gamma.or(file.near_gamma).unwrap_or(cfg.near.gamma);
        cfg.promotion = if self.no_promotion {
            false
        } else {
            file.promotion.unwrap_or(cfg.promotion)
        };
        cfg.strict = match (self.strict, self.lenient) {
            (true, _) => true,
            (_, true) => false,
            _ => file.strict.unwrap_or(cfg.strict),
        };
        // A relative dictionary path in the config file is relative to that file.
        let file_dict = file.dict.map(|d| match self.config.as_deref().and_then(Path::parent) {
            Some(dir) if d.is_relative() => dir.join(d),
            _ => d,
        });
        cfg.dictionary = self
            .dict
            .clone()
            .or(file_dict)
            .map(|p| p.to_string_lossy().into_owned());

        if let Err(e) = cfg.validate() {
            bail!("invalid configuration: {e}");
        }
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn config_file(body: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(body.as_bytes()).unwrap();
        f
    }

    #[test]
    fn defaults_without_flags() {
        let cfg = TuningArgs::default().resolve().unwrap();
        assert_eq!(cfg.threshold, 0.7);
        assert!(cfg.promotion && cfg.strict);
    }

    #[test]
    fn flags_override_file_override_defaults() {
        let f = config_file("threshold = 0.5\ndelta_d = 250.0\nweights = [0.6, 0.4]\nstrict = false\n");
        let args = TuningArgs {
            config: Some(f.path().to_path_buf()),
            threshold: Some(0.8),
            ..TuningArgs::default()
        };
        let cfg = args.resolve().unwrap();
        assert_eq!(cfg.threshold, 0.8);
        assert_eq!(cfg.delta_d, 250.0);
        assert_eq!(cfg.weights, MatchWeights::new(0.6, 0.4).unwrap());
        assert!(!cfg.strict);
        assert_eq!(cfg.near.alpha, 100.0);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        let f = config_file("treshold = 0.5\n");
        let args = TuningArgs {
            config: Some(f.path().to_path_buf()),
            ..TuningArgs::default()
        };
        assert!(args.resolve().is_err());
        let args = TuningArgs {
            threshold: Some(1.5),
            ..TuningArgs::default()
        };
        assert!(args.resolve().is_err());
    }
}
