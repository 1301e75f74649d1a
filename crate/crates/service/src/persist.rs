use std::io;
use std::path::{Path, PathBuf};

use epiroom_core::{CountryConfig, Scenario};
use serde::{Deserialize, Serialize};

use crate::model::LoggedCommand;

/// Everything needed to rebuild a hosted simulation by replay. Engine state
/// itself is never written out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub id: String,
    pub config: CountryConfig,
    pub scenario: Scenario,
    pub seed: u64,
    /// Last simulated day at the time of the snapshot.
    pub current_day: u32,
    pub commands: Vec<LoggedCommand>,
}

impl Record {
    pub fn path(dir: &Path, id: &str) -> PathBuf {
        dir.join(format!("{id}.json"))
    }

    /// Write atomically through a temporary sibling file.
    pub fn save(&self, dir: &Path) -> io::Result<()> {
        let path = Self::path(dir, &self.id);
        let tmp = path.with_extension("json.tmp");
        std::fs::write(&tmp, serde_json::to_vec_pretty(self)?)?;
        std::fs::rename(tmp, path)
    }

    pub fn load(path: &Path) -> io::Result<Record> {
        let text = std::fs::read(path)?;
        Ok(serde_json::from_slice(&text)?)
    }

    /// All records in `dir`, skipping (and reporting) unreadable files.
    pub fn load_all(dir: &Path) -> io::Result<Vec<Record>> {
        let mut records = Vec::new();
        let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        paths.sort();
        for path in paths {
            match Record::load(&path) {
                Ok(record) => records.push(record),
                Err(e) => log::warn!("skipping {}: {e}", path.display()),
            }
        }
        Ok(records)
    }

    pub fn remove(dir: &Path, id: &str) -> io::Result<()> {
        match std::fs::remove_file(Self::path(dir, id)) {
            Err(e) if e.kind() != io::ErrorKind::NotFound => Err(e),
            _ => Ok(()),
        }
    }
}
