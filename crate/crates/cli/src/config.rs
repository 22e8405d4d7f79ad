//! Service and CLI configuration.
//!
//! The file holds one `key = value` pair per line. Blank lines and lines
//! starting with `#` are ignored; values are taken verbatim after trimming.
//! Every key can be overridden by an environment variable named
//! `CODEWE_` followed by the upper-cased key, e.g. `CODEWE_LISTEN`.
//!
//! | key            | default                  |
//! |----------------|--------------------------|
//! | `listen`       | `127.0.0.1:8080`         |
//! | `ledger`       | `<home>/ledger.snap`     |
//! | `cas`          | `<home>/cas`             |
//! | `reports`      | `<home>/reports`         |
//! | `codesign`     | `<home>/codesign`        |
//! | `admin_key`    | `<home>/admin.key`       |
//! | `tokens`       | `<home>/tokens.txt`      |
//! | `rate_limit`   | `10` (submissions per minute per address, `0` disables) |

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}:{line}: expected `key = value`")]
    Syntax { path: PathBuf, line: usize },
    #[error("unknown configuration key `{0}`")]
    UnknownKey(String),
    #[error("invalid value for `{key}`: {value}")]
    BadValue { key: String, value: String },
    #[error("cannot read {0}: {1}")]
    Io(PathBuf, std::io::Error),
}

pub const KEYS: [&str; 8] = [
    "listen", "ledger", "cas", "reports", "codesign", "admin_key", "tokens", "rate_limit",
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ServiceConfig {
    pub listen: String,
    pub ledger: PathBuf,
    pub cas: PathBuf,
    pub reports: PathBuf,
    pub codesign: PathBuf,
    pub admin_key: PathBuf,
    pub tokens: PathBuf,
    pub rate_limit: u32,
}

impl ServiceConfig {
    pub fn with_home(home: &Path) -> Self {
        Self {
            listen: "127.0.0.1:8080".into(),
            ledger: home.join("ledger.snap"),
            cas: home.join("cas"),
            reports: home.join("reports"),
            codesign: home.join("codesign"),
            admin_key: home.join("admin.key"),
            tokens: home.join("tokens.txt"),
            rate_limit: 10,
        }
    }

    /// Defaults under `home`, then the file (if any), then `CODEWE_*`
    /// variables from `env`.
    pub fn load(
        home: &Path,
        file: Option<&Path>,
        env: impl IntoIterator<Item = (String, String)>,
    ) -> Result<Self, ConfigError> {
        let mut cfg = Self::with_home(home);
        if let Some(path) = file {
            let text = fs::read_to_string(path).map_err(|e| ConfigError::Io(path.into(), e))?;
            for (key, value) in parse(&text, path)? {
                cfg.set(&key, &value)?;
            }
        }
        for (name, value) in env {
            if let Some(key) = name.strip_prefix("CODEWE_") {
                let key = key.to_ascii_lowercase();
                if KEYS.contains(&key.as_str()) {
                    cfg.set(&key, &value)?;
                }
            }
        }
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        match key {
            "listen" => self.listen = value.into(),
            "ledger" => self.ledger = value.into(),
            "cas" => self.cas = value.into(),
            "reports" => self.reports = value.into(),
            "codesign" => self.codesign = value.into(),
            "admin_key" => self.admin_key = value.into(),
            "tokens" => self.tokens = value.into(),
            "rate_limit" => {
                self.rate_limit = value.parse().map_err(|_| ConfigError::BadValue {
                    key: key.into(),
                    value: value.into(),
                })?
            }
            other => return Err(ConfigError::UnknownKey(other.into())),
        }
        Ok(())
    }

    /// Creates the directories the stores live in.
    pub fn ensure_dirs(&self) -> std::io::Result<()> {
        for dir in [&self.cas, &self.reports, &self.codesign] {
            fs::create_dir_all(dir)?;
        }
        if let Some(parent) = self.ledger.parent() {
            fs::create_dir_all(parent)?;
        }
        Ok(())
    }
}

pub fn parse(text: &str, path: &Path) -> Result<BTreeMap<String, String>, ConfigError> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
            path: path.into(),
            line: i + 1,
        })?;
        let key = key.trim();
        if key.is_empty() {
            return Err(ConfigError::Syntax { path: path.into(), line: i + 1 });
        }
        if !KEYS.contains(&key) {
            return Err(ConfigError::UnknownKey(key.into()));
        }
        out.insert(key.to_string(), value.trim().to_string());
    }
    Ok(out)
}
