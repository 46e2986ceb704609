//! Pipeline configuration, read from TOML.
//!
//! Every section is optional and falls back to the defaults below; unknown
//! keys are rejected. Credentials never live here: the remote zero-shot
//! client reads its key from the environment.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::annotation::{ImportMapping, SplitFractions, DEFAULT_SEED_BATCH};
use crate::clarity::{ContrastiveOptions, EncoderConfig, HeadOptions, Pooling, PromptOptions, DEFAULT_PAIRS_PER_ITEM};
use crate::ingest::{HeadingPatterns, Segmenter};
use crate::io::sha256_hex;
use crate::relevance::{Lexicon, RelevanceHyper};
use crate::scoring::ScoreConfig;
use crate::zeroshot::{PromptTemplate, RemoteConfig};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("invalid config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

fn invalid(msg: impl std::fmt::Display) -> ConfigError {
    ConfigError::Invalid(msg.to_string())
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    /// Directory of prospectus files for `ingest`.
    pub corpus_dir: Option<PathBuf>,
    /// Replaces the bundled ESG lexicon.
    pub lexicon: Option<PathBuf>,
    /// Replaces the bundled heading patterns.
    pub headings: Option<PathBuf>,
    /// Added to the bundled abbreviation list.
    pub abbreviations: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RelevanceConfig {
    pub seed: u64,
    pub model: RelevanceHyper,
}

impl Default for RelevanceConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            model: RelevanceHyper::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClarityConfig {
    /// Encoder preset (`small` or `base`) for contrastive fine-tuning.
    pub encoder: String,
    /// Encoder preset kept frozen under prompt tuning.
    pub prompt_encoder: String,
    pub pooling: Pooling,
    pub encoder_seed: u64,
    pub r_per_item: usize,
    pub contrastive: ContrastiveOptions,
    pub prompt: PromptOptions,
    pub head: HeadOptions,
}

impl Default for ClarityConfig {
    fn default() -> Self {
        Self {
            encoder: "small".into(),
            prompt_encoder: "base".into(),
            pooling: Pooling::Mean,
            encoder_seed: 0,
            r_per_item: DEFAULT_PAIRS_PER_ITEM,
            contrastive: ContrastiveOptions::default(),
            prompt: PromptOptions::default(),
            head: HeadOptions::default(),
        }
    }
}

impl ClarityConfig {
    pub fn encoder_config(&self) -> Result<EncoderConfig, ConfigError> {
        self.preset(&self.encoder)
    }

    pub fn prompt_encoder_config(&self) -> Result<EncoderConfig, ConfigError> {
        self.preset(&self.prompt_encoder)
    }

    fn preset(&self, name: &str) -> Result<EncoderConfig, ConfigError> {
        let mut c = EncoderConfig::preset(name).ok_or_else(|| invalid(format!("unknown encoder preset {name:?}")))?;
        c.pooling = self.pooling;
        Ok(c)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnnotationConfig {
    /// Independent annotators needed before an item can become gold.
    pub annotators_per_item: usize,
    pub seed_batch: usize,
    pub round_batch: usize,
    pub splits: SplitFractions,
    pub split_seed: u64,
    pub import: ImportMapping,
}

impl Default for AnnotationConfig {
    fn default() -> Self {
        Self {
            annotators_per_item: 2,
            seed_batch: DEFAULT_SEED_BATCH,
            round_batch: 50,
            splits: SplitFractions::default(),
            split_seed: 42,
            import: ImportMapping::default(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ZeroShotConfig {
    /// Replaces the bundled prompt template.
    pub template: Option<PathBuf>,
    pub remote: RemoteConfig,
}

impl ZeroShotConfig {
    pub fn template(&self) -> Result<PromptTemplate, ConfigError> {
        match &self.template {
            Some(p) => PromptTemplate::load(p).map_err(invalid),
            None => Ok(PromptTemplate::default()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub host: String,
    pub port: u16,
    /// Annotation store directory.
    pub store_dir: PathBuf,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            host: "127.0.0.1".into(),
            port: 8642,
            store_dir: PathBuf::from("annotations"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IngestConfig {
    /// Heading regexes tried before the bundled ones.
    pub extra_headings: Vec<String>,
    pub extra_abbreviations: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub paths: PathsConfig,
    pub ingest: IngestConfig,
    pub relevance: RelevanceConfig,
    pub clarity: ClarityConfig,
    pub annotation: AnnotationConfig,
    pub scoring: ScoreConfig,
    pub zeroshot: ZeroShotConfig,
    pub service: ServiceConfig,
}

impl PipelineConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let c: Self = toml::from_str(text)?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }

    /// Built-in defaults, or the file when given.
    pub fn load_or_default(path: Option<&Path>) -> Result<Self, ConfigError> {
        path.map_or_else(|| Ok(Self::default()), Self::load)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.clarity.encoder_config()?;
        self.clarity.prompt_encoder_config()?;
        let c = &self.clarity;
        if c.r_per_item == 0 {
            return Err(invalid("clarity.r_per_item must be positive"));
        }
        if c.contrastive.epochs == 0
            || c.contrastive.batch_size == 0
            || (c.contrastive.learning_rate.is_nan() || c.contrastive.learning_rate <= 0.0)
        {
            return Err(invalid(
                "clarity.contrastive needs positive epochs, batch_size and learning_rate",
            ));
        }
        if c.prompt.num_virtual_tokens == 0
            || c.prompt.epochs == 0
            || c.prompt.batch_size == 0
            || (c.prompt.learning_rate.is_nan() || c.prompt.learning_rate <= 0.0)
        {
            return Err(invalid(
                "clarity.prompt needs positive num_virtual_tokens, epochs, batch_size and learning_rate",
            ));
        }
        if c.head.iterations == 0
            || (c.head.learning_rate.is_nan() || c.head.learning_rate <= 0.0)
            || (c.head.l2.is_nan() || c.head.l2 < 0.0)
        {
            return Err(invalid(
                "clarity.head needs positive iterations and learning_rate, l2 >= 0",
            ));
        }
        let r = &self.relevance.model;
        if r.c_grid.is_empty() || r.c_grid.iter().any(|&c| c.is_nan() || c <= 0.0) {
            return Err(invalid("relevance.c_grid must be non-empty and positive"));
        }
        if r.folds < 2 {
            return Err(invalid("relevance.folds must be at least 2"));
        }
        if !(r.threshold > 0.0 && r.threshold < 1.0) {
            return Err(invalid("relevance.threshold must lie in (0, 1)"));
        }
        let a = &self.annotation;
        if a.annotators_per_item < 2 {
            return Err(invalid("annotation.annotators_per_item must be at least 2"));
        }
        if a.seed_batch == 0 || a.round_batch == 0 {
            return Err(invalid("annotation batch sizes must be positive"));
        }
        let f = a.splits;
        let parts = [f.train, f.validation, f.test];
        if parts.iter().any(|x| !(0.0..=1.0).contains(x)) || (parts.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(invalid("annotation.splits must be in [0, 1] and sum to 1"));
        }
        self.scoring.validate().map_err(invalid)?;
        let z = &self.zeroshot.remote;
        if (z.requests_per_second.is_nan() || z.requests_per_second <= 0.0) || z.max_in_flight == 0 {
            return Err(invalid(
                "zeroshot.remote needs positive requests_per_second and max_in_flight",
            ));
        }
        if self.ingest.extra_headings.iter().any(|h| h.trim().is_empty()) {
            return Err(invalid("ingest.extra_headings has an empty pattern"));
        }
        if !self.ingest.extra_headings.is_empty() {
            HeadingPatterns::new(&self.ingest.extra_headings).map_err(invalid)?;
        }
        Ok(())
    }

    /// Short content digest stamped into artifacts produced under this config.
    pub fn digest(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        sha256_hex(&json)[..16].to_string()
    }

    pub fn heading_patterns(&self) -> Result<HeadingPatterns, ConfigError> {
        let base = match &self.paths.headings {
            Some(p) => read(p)?,
            None => crate::ingest::DEFAULT_HEADINGS.to_string(),
        };
        let mut lines: Vec<String> = self.ingest.extra_headings.clone();
        lines.extend(
            base.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#'))
                .map(String::from),
        );
        HeadingPatterns::new(&lines).map_err(invalid)
    }

    pub fn segmenter(&self) -> Result<Segmenter, ConfigError> {
        let mut extra: Vec<String> = self.ingest.extra_abbreviations.clone();
        if let Some(p) = &self.paths.abbreviations {
            extra.extend(
                read(p)?
                    .lines()
                    .map(str::trim)
                    .filter(|l| !l.is_empty() && !l.starts_with('#'))
                    .map(String::from),
            );
        }
        Ok(Segmenter::default().with_abbreviations(extra))
    }

    pub fn lexicon(&self) -> Result<Lexicon, ConfigError> {
        match &self.paths.lexicon {
            Some(p) => Lexicon::parse(&read(p)?).map_err(invalid),
            None => Ok(Lexicon::default()),
        }
    }
}

fn read(path: &Path) -> Result<String, ConfigError> {
    std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
        path: path.to_path_buf(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_defaults() {
        let c = PipelineConfig::parse("").unwrap();
        assert_eq!(c, PipelineConfig::default());
        assert_eq!(c.clarity.r_per_item, 20);
        assert_eq!(c.clarity.contrastive.epochs, 1);
        assert_eq!(c.clarity.prompt.num_virtual_tokens, 20);
        assert_eq!(c.annotation.annotators_per_item, 2);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(matches!(
            PipelineConfig::parse("[clarity]\nbogus = 1"),
            Err(ConfigError::Parse(_))
        ));
        assert!(PipelineConfig::parse("extra = true").is_err());
        assert!(PipelineConfig::parse("[relevance]\nseed = 1\nbogus = 2").is_err());
    }

    #[test]
    fn api_key_cannot_come_from_file() {
        assert!(PipelineConfig::parse("[zeroshot.remote]\napi_key = \"sk\"").is_err());
    }

    #[test]
    fn nested_sections_parse() {
        let c = PipelineConfig::parse(
            r#"
            [clarity]
            encoder = "base"
            pooling = "mean-tokens"
            r_per_item = 5
            [clarity.contrastive]
            epochs = 2
            [scoring.scaling]
            kind = "constant"
            factor = 2.0
            [relevance]
            seed = 3
            [relevance.model]
            c_grid = [1.0]
            "#,
        )
        .unwrap();
        let e = c.clarity.encoder_config().unwrap();
        assert_eq!(e.dim, 128);
        assert_eq!(e.pooling, Pooling::MeanTokens);
        assert_eq!(c.clarity.contrastive.epochs, 2);
        assert_eq!(c.scoring.factor(0), 2.0);
        assert_eq!(c.relevance.model.c_grid, [1.0]);
    }

    #[test]
    fn validation_failures() {
        for bad in [
            "[clarity]\nencoder = \"huge\"",
            "[clarity]\nr_per_item = 0",
            "[annotation]\nannotators_per_item = 1",
            "[annotation.splits]\ntrain = 0.5\nvalidation = 0.1\ntest = 0.1",
            "[scoring.scaling]\nkind = \"constant\"\nfactor = 0.0",
            "[relevance.model]\nthreshold = 1.0",
            "[ingest]\nextra_headings = [\"(\"]",
        ] {
            assert!(
                matches!(PipelineConfig::parse(bad), Err(ConfigError::Invalid(_))),
                "{bad}"
            );
        }
    }

    #[test]
    fn digest_tracks_content() {
        let a = PipelineConfig::default();
        let mut b = a.clone();
        assert_eq!(a.digest(), b.digest());
        b.clarity.encoder_seed = 1;
        assert_ne!(a.digest(), b.digest());
        assert_eq!(a.digest().len(), 16);
    }

    #[test]
    fn extra_headings_take_priority() {
        let c = PipelineConfig::parse("[ingest]\nextra_headings = [\"how we invest\"]").unwrap();
        let p = c.heading_patterns().unwrap();
        assert_eq!(p.len(), HeadingPatterns::default().len() + 1);
    }
}
