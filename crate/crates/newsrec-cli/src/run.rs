//! Run-directory plumbing: resolved-config snapshots, the artifact
//! manifest, and the checkpoint-directory lock.

use std::collections::BTreeMap;
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::CliError;

/// One manifest record: what a command read and wrote.
#[derive(Debug, Default, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub command: String,
    pub finished_unix: u64,
    pub config_snapshot: String,
    pub inputs: BTreeMap<String, String>,
    pub outputs: Vec<String>,
}

impl ManifestEntry {
    pub fn new(command: &str) -> Self {
        let finished_unix = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        Self {
            command: command.to_string(),
            finished_unix,
            ..Self::default()
        }
    }

    pub fn input(mut self, key: &str, path: &Path) -> Self {
        self.inputs.insert(key.to_string(), path.display().to_string());
        self
    }

    pub fn output(mut self, path: &Path) -> Self {
        self.outputs.push(path.display().to_string());
        self
    }
}

/// The directory all artifacts of a run live under.
pub struct RunDir {
    pub root: PathBuf,
}

impl RunDir {
    pub fn create(root: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(root).map_err(|e| {
            CliError::runtime(format!("cannot create run directory {}: {e}", root.display()))
        })?;
        Ok(Self {
            root: root.to_path_buf(),
        })
    }

    fn write_file(&self, path: &Path, content: &str) -> Result<(), CliError> {
        fs::write(path, content)
            .map_err(|e| CliError::runtime(format!("cannot write {}: {e}", path.display())))
    }

    /// Writes the resolved configuration for one command invocation.
    /// The file is itself a valid config file.
    pub fn write_snapshot(&self, cfg: &RunConfig, name: &str) -> Result<PathBuf, CliError> {
        let path = self.root.join(format!("resolved_config_{name}.conf"));
        self.write_file(&path, &cfg.snapshot())?;
        Ok(path)
    }

    /// Appends one entry to `manifest.json`, creating it on first use.
    pub fn record(&self, mut entry: ManifestEntry, snapshot: &Path) -> Result<PathBuf, CliError> {
        entry.config_snapshot = snapshot.display().to_string();
        let path = self.root.join("manifest.json");
        let mut entries: Vec<ManifestEntry> = match fs::read_to_string(&path) {
            Ok(text) => serde_json::from_str(&text).unwrap_or_default(),
            Err(_) => Vec::new(),
        };
        entries.push(entry);
        let json = serde_json::to_string_pretty(&entries).expect("manifest serializes");
        self.write_file(&path, &json)?;
        Ok(path)
    }
}

/// Exclusive hold on a checkpoint directory for the life of one
/// command, so concurrent commands cannot share it. The lock file is
/// removed on drop.
#[derive(Debug)]
pub struct DirLock {
    path: PathBuf,
}

impl DirLock {
    pub fn acquire(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|e| {
            CliError::runtime(format!("cannot create checkpoint directory {}: {e}", dir.display()))
        })?;
        let path = dir.join(".lock");
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(mut f) => {
                let _ = writeln!(f, "{}", std::process::id());
                Ok(Self { path })
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                Err(CliError::runtime(format!(
                    "checkpoint directory {} is locked by another command; remove {} if that process is gone",
                    dir.display(),
                    path.display()
                )))
            }
            Err(e) => Err(CliError::runtime(format!("cannot lock {}: {e}", dir.display()))),
        }
    }
}

impl Drop for DirLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lock_excludes_second_holder_and_releases_on_drop() {
        let dir = tempfile::tempdir().unwrap();
        let lock = DirLock::acquire(dir.path()).unwrap();
        let err = DirLock::acquire(dir.path()).unwrap_err();
        assert_eq!(err.exit_code(), 3);
        assert!(err.to_string().contains("locked"), "{err}");
        drop(lock);
        DirLock::acquire(dir.path()).expect("lock must be free after drop");
    }

    #[test]
    fn manifest_accumulates_entries() {
        let dir = tempfile::tempdir().unwrap();
        let run = RunDir::create(dir.path()).unwrap();
        let snap = run.write_snapshot(&RunConfig::default(), "train").unwrap();
        run.record(ManifestEntry::new("train"), &snap).unwrap();
        let manifest = run
            .record(ManifestEntry::new("evaluate").output(Path::new("r.json")), &snap)
            .unwrap();
        let entries: Vec<ManifestEntry> =
            serde_json::from_str(&fs::read_to_string(manifest).unwrap()).unwrap();
        assert_eq!(entries.len(), 2);
        assert_eq!(entries[0].command, "train");
        assert_eq!(entries[1].outputs, vec!["r.json".to_string()]);
    }

    #[test]
    fn snapshot_file_is_a_valid_config() {
        let dir = tempfile::tempdir().unwrap();
        let run = RunDir::create(dir.path()).unwrap();
        let mut cfg = RunConfig::default();
        cfg.apply("seed", "77").unwrap();
        let snap = run.write_snapshot(&cfg, "evaluate").unwrap();
        let reloaded = RunConfig::load(&snap, &[]).unwrap();
        assert_eq!(reloaded, cfg);
    }
}
