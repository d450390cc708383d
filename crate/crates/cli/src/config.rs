use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use refeval_core::{Error, Result};

/// Values from `--config <file>`, a TOML file with one table per
/// subcommand whose keys mirror the long flag names:
///
/// ```toml
/// [gen]
/// pairs = 180
/// seed = 7
///
/// [score.model]
/// literal = "models/literal.bin"
/// ```
///
/// Command-line flags always win over config values.
pub struct FileConfig {
    table: toml::Table,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<FileConfig> {
        let Some(path) = path else {
            return Ok(FileConfig { table: toml::Table::new() });
        };
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let table = text
            .parse::<toml::Table>()
            .map_err(|e| Error::Usage(format!("config {}: {e}", path.display())))?;
        Ok(FileConfig { table })
    }

    fn entry(&self, command: &str, key: &str) -> Option<&toml::Value> {
        self.table.get(command)?.as_table()?.get(key)
    }

    fn type_err(command: &str, key: &str, expected: &str) -> Error {
        Error::Usage(format!("config [{command}] {key}: expected {expected}"))
    }

    pub fn usize_value(&self, command: &str, key: &str) -> Result<Option<usize>> {
        match self.entry(command, key) {
            None => Ok(None),
            Some(v) => match v.as_integer().and_then(|i| usize::try_from(i).ok()) {
                Some(i) => Ok(Some(i)),
                None => Err(Self::type_err(command, key, "a non-negative integer")),
            },
        }
    }

    pub fn u64_value(&self, command: &str, key: &str) -> Result<Option<u64>> {
        match self.entry(command, key) {
            None => Ok(None),
            Some(v) => match v.as_integer().and_then(|i| u64::try_from(i).ok()) {
                Some(i) => Ok(Some(i)),
                None => Err(Self::type_err(command, key, "a non-negative integer")),
            },
        }
    }

    pub fn f64_value(&self, command: &str, key: &str) -> Result<Option<f64>> {
        match self.entry(command, key) {
            None => Ok(None),
            Some(v) => match v.as_float().or_else(|| v.as_integer().map(|i| i as f64)) {
                Some(x) => Ok(Some(x)),
                None => Err(Self::type_err(command, key, "a number")),
            },
        }
    }

    pub fn string_value(&self, command: &str, key: &str) -> Result<Option<String>> {
        match self.entry(command, key) {
            None => Ok(None),
            Some(v) => match v.as_str() {
                Some(s) => Ok(Some(s.to_string())),
                None => Err(Self::type_err(command, key, "a string")),
            },
        }
    }

    pub fn path_value(&self, command: &str, key: &str) -> Result<Option<PathBuf>> {
        Ok(self.string_value(command, key)?.map(PathBuf::from))
    }

    /// A sub-table of string values, e.g. `[score.model]`.
    pub fn string_map(&self, command: &str, key: &str) -> Result<BTreeMap<String, String>> {
        let Some(v) = self.entry(command, key) else {
            return Ok(BTreeMap::new());
        };
        let table = v
            .as_table()
            .ok_or_else(|| Self::type_err(command, key, "a table of strings"))?;
        let mut map = BTreeMap::new();
        for (k, v) in table {
            let s = v
                .as_str()
                .ok_or_else(|| Self::type_err(command, &format!("{key}.{k}"), "a string"))?;
            map.insert(k.clone(), s.to_string());
        }
        Ok(map)
    }
}

/// Final value of a required setting, from flag or config.
pub fn require<T>(flag: &str, value: Option<T>) -> Result<T> {
    value.ok_or_else(|| Error::Usage(format!("missing --{flag} (no flag and no config value)")))
}
