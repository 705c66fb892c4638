use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::attribution::{CassetteMode, LiveConfig, RetryPolicy, DEFAULT_GLOBAL_BUDGET, DEFAULT_LOCAL_BUDGET};
use crate::error::ArgumentError;
use crate::layout::{LayoutConfig, SplitMode};
use crate::perception::{DEFAULT_MIN_APPEARANCES, DEFAULT_N_REF};

/// Which perception signals the model receives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Setting {
    /// Gold identity, no intensity.
    A,
    /// Gold identity plus predicted intensity.
    B,
    /// Predicted identity plus predicted intensity.
    #[default]
    C,
}

impl std::str::FromStr for Setting {
    type Err = ArgumentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "A" | "a" => Ok(Setting::A),
            "B" | "b" => Ok(Setting::B),
            "C" | "c" => Ok(Setting::C),
            other => Err(ArgumentError(format!("unknown setting {other:?}; expected A, B or C"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusConfig {
    /// Directory holding one `<title>.xml` per title.
    pub annotations: Option<PathBuf>,
    pub speaker_links: Option<PathBuf>,
    pub emotion_labels: Option<PathBuf>,
    /// A corpus dump to read instead of the XML directory.
    pub dump: Option<PathBuf>,
    /// Titles to keep; empty keeps all (or the `test_titles` selection).
    pub titles: Vec<String>,
    /// Keep the N titles with the most emotion annotations.
    pub test_titles: Option<usize>,
    /// First N page images of each title.
    pub pages_limit: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct LayoutSection {
    pub split: SplitMode,
    #[serde(flatten)]
    pub config: LayoutConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IdentityChoice {
    #[default]
    Oracle,
    Noisy,
    Adapter,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntensityChoice {
    Oracle,
    #[default]
    Miscalibrated,
    Adapter,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OcrChoice {
    #[default]
    Oracle,
    Adapter,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdapterConfig {
    /// Child process command line speaking the adapter protocol on stdio.
    pub command: Vec<String>,
    /// HTTP endpoint, used when `command` is empty.
    pub url: Option<String>,
    pub timeout_secs: f64,
    pub image_root: Option<PathBuf>,
}

impl Default for AdapterConfig {
    fn default() -> Self {
        Self { command: Vec::new(), url: None, timeout_secs: 60.0, image_root: None }
    }
}

impl AdapterConfig {
    pub fn timeout(&self) -> Duration {
        Duration::from_secs_f64(self.timeout_secs)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PerceptionConfig {
    pub identity: IdentityChoice,
    /// Label flip probability for the noisy identity oracle.
    pub epsilon: f64,
    pub intensity: IntensityChoice,
    pub ocr: OcrChoice,
    /// A character is a main character when it has more body instances than this.
    pub min_appearances: usize,
    pub n_ref: usize,
    pub adapter: Option<AdapterConfig>,
}

impl Default for PerceptionConfig {
    fn default() -> Self {
        Self {
            identity: IdentityChoice::Oracle,
            epsilon: 0.0,
            intensity: IntensityChoice::Miscalibrated,
            ocr: OcrChoice::Oracle,
            min_appearances: DEFAULT_MIN_APPEARANCES,
            n_ref: DEFAULT_N_REF,
            adapter: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LlmChoice {
    #[default]
    Scripted,
    Cassette,
    Live,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LlmConfig {
    pub backend: LlmChoice,
    pub cassette: Option<PathBuf>,
    pub cassette_mode: CassetteMode,
    /// Write every exchange to this cassette file.
    pub record: Option<PathBuf>,
    pub max_retries: u32,
    pub global_budget: usize,
    pub local_budget: usize,
    pub live: LiveConfig,
}

impl Default for LlmConfig {
    fn default() -> Self {
        Self {
            backend: LlmChoice::Scripted,
            cassette: None,
            cassette_mode: CassetteMode::Strict,
            record: None,
            max_retries: RetryPolicy::default().max_retries,
            global_budget: DEFAULT_GLOBAL_BUDGET,
            local_budget: DEFAULT_LOCAL_BUDGET,
            live: LiveConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TtsMode {
    #[default]
    ManifestOnly,
    Adapter,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TtsConfig {
    /// TOML voice profile book; without one every line goes to a default narrator.
    pub profiles: Option<PathBuf>,
    pub mode: TtsMode,
    pub max_concurrent: usize,
    pub adapter: Option<AdapterConfig>,
}

impl Default for TtsConfig {
    fn default() -> Self {
        Self { profiles: None, mode: TtsMode::ManifestOnly, max_concurrent: 4, adapter: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub setting: Setting,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "one")]
    pub workers: usize,
    pub output_dir: PathBuf,
    pub corpus: CorpusConfig,
    #[serde(default)]
    pub layout: LayoutSection,
    #[serde(default)]
    pub perception: PerceptionConfig,
    #[serde(default)]
    pub llm: LlmConfig,
    #[serde(default)]
    pub tts: TtsConfig,
}

fn one() -> usize {
    1
}

fn rebase(base: &Path, p: &mut Option<PathBuf>) {
    if let Some(path) = p {
        if path.is_relative() {
            *path = base.join(&*path);
        }
    }
}

impl RunConfig {
    pub fn from_toml(src: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(src)
    }

    /// Reads a config file; relative paths inside it are taken from the file's directory.
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let src = std::fs::read_to_string(path)?;
        let mut cfg = Self::from_toml(&src)?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        cfg.resolve_paths(&base);
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let c = &mut self.corpus;
        for p in [&mut c.annotations, &mut c.speaker_links, &mut c.emotion_labels, &mut c.dump] {
            rebase(base, p);
        }
        rebase(base, &mut self.llm.cassette);
        rebase(base, &mut self.llm.record);
        rebase(base, &mut self.tts.profiles);
        for a in [&mut self.perception.adapter, &mut self.tts.adapter].into_iter().flatten() {
            rebase(base, &mut a.image_root);
        }
        if self.output_dir.is_relative() {
            self.output_dir = base.join(&self.output_dir);
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Gold identity in A and B, a real identity signal in C, no intensity in A.
    pub fn validate(&self) -> Result<(), ArgumentError> {
        let p = &self.perception;
        let err = |m: String| Err(ArgumentError(m));
        if self.corpus.annotations.is_none() && self.corpus.dump.is_none() {
            return err("corpus needs either `annotations` or `dump`".into());
        }
        if !(0.0..=1.0).contains(&p.epsilon) {
            return err(format!("epsilon {} is outside [0, 1]", p.epsilon));
        }
        if self.workers == 0 {
            return err("workers must be at least 1".into());
        }
        match self.setting {
            Setting::A | Setting::B if p.identity != IdentityChoice::Oracle => {
                return err(format!("setting {:?} uses gold identity; set perception.identity = \"oracle\"", self.setting));
            }
            Setting::C if p.identity == IdentityChoice::Oracle => {
                return err("setting C needs predicted identity: use \"adapter\", or \"noisy\" with epsilon > 0".into());
            }
            Setting::C if p.identity == IdentityChoice::Noisy && p.epsilon <= 0.0 => {
                return err("setting C with the noisy identity oracle needs epsilon > 0".into());
            }
            _ => {}
        }
        let wants_adapter = p.identity == IdentityChoice::Adapter
            || (self.uses_intensity() && p.intensity == IntensityChoice::Adapter)
            || p.ocr == OcrChoice::Adapter;
        if wants_adapter && p.adapter.is_none() {
            return err("an adapter channel is selected but [perception.adapter] is missing".into());
        }
        if let Some(a) = &p.adapter {
            if a.command.is_empty() && a.url.is_none() {
                return err("[perception.adapter] needs `command` or `url`".into());
            }
        }
        if self.llm.backend == LlmChoice::Cassette && self.llm.cassette.is_none() {
            return err("llm.backend = \"cassette\" needs llm.cassette".into());
        }
        if self.tts.mode == TtsMode::Adapter && self.tts.adapter.is_none() {
            return err("tts.mode = \"adapter\" needs [tts.adapter]".into());
        }
        Ok(())
    }

    pub fn uses_intensity(&self) -> bool {
        self.setting != Setting::A
    }

    pub fn retry_policy(&self) -> RetryPolicy {
        RetryPolicy { max_retries: self.llm.max_retries }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base(extra: &str) -> RunConfig {
        RunConfig::from_toml(&format!("output_dir = \"out\"\n{extra}\n[corpus]\ndump = \"c.jsonl\"\n")).unwrap()
    }

    #[test]
    fn defaults_round_trip_through_toml() {
        let cfg = base("setting = \"C\"\n[perception]\nidentity = \"noisy\"\nepsilon = 0.1");
        let again = RunConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(again, cfg);
        assert_eq!(cfg.llm.max_retries, 2);
        assert_eq!(cfg.layout.config.merge_iou, 0.4);
    }

    #[test]
    fn settings_gate_identity_choices() {
        let mut a = base("setting = \"A\"");
        assert!(a.validate().is_ok());
        assert!(!a.uses_intensity());
        a.perception.identity = IdentityChoice::Noisy;
        assert!(a.validate().is_err());

        let mut c = base("setting = \"C\"");
        assert!(c.validate().is_err());
        c.perception.identity = IdentityChoice::Noisy;
        assert!(c.validate().is_err());
        c.perception.epsilon = 0.2;
        assert!(c.validate().is_ok());
        c.perception.identity = IdentityChoice::Adapter;
        assert!(c.validate().is_err());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::from_toml("output_dir = \"o\"\nbogus = 1\n[corpus]\n").is_err());
    }

    #[test]
    fn relative_paths_follow_the_config_file() {
        let mut cfg = base("");
        cfg.resolve_paths(Path::new("/cfg"));
        assert_eq!(cfg.corpus.dump.as_deref(), Some(Path::new("/cfg/c.jsonl")));
        assert_eq!(cfg.output_dir, Path::new("/cfg/out"));
    }
}
