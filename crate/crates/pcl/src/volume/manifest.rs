//! Dataset manifests: a JSON list of volume files with family and split tags.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{load_volume, Volume};
use crate::error::{Error, Result};

/// How a volume participates in experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Split {
    /// Unlabeled pretraining pool.
    #[serde(rename = "pretrain")]
    Pretrain,
    /// Labeled volumes available for fine-tuning and fold evaluation.
    #[serde(rename = "labeled-pool")]
    LabeledPool,
    /// Held-out volumes for standalone evaluation.
    #[serde(rename = "test")]
    Test,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: PathBuf,
    pub family_id: String,
    pub split: Split,
}

/// An ordered list of volume files. Relative entry paths resolve against
/// the manifest's own directory.
#[derive(Debug, Clone)]
pub struct DatasetManifest {
    base_dir: PathBuf,
    entries: Vec<ManifestEntry>,
}

impl DatasetManifest {
    pub fn new(base_dir: PathBuf, entries: Vec<ManifestEntry>) -> Result<Self> {
        let mut seen = HashSet::new();
        for e in &entries {
            if !seen.insert(e.path.clone()) {
                return Err(Error::Config(format!(
                    "duplicate manifest path {}",
                    e.path.display()
                )));
            }
        }
        Ok(DatasetManifest { base_dir, entries })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        let entries: Vec<ManifestEntry> = serde_json::from_str(&text)?;
        let base_dir = path.parent().unwrap_or(Path::new(".")).to_path_buf();
        let manifest = DatasetManifest::new(base_dir, entries)?;
        for e in &manifest.entries {
            let resolved = manifest.resolve(&e.path);
            if !resolved.exists() {
                return Err(Error::Config(format!(
                    "manifest references missing file {}",
                    resolved.display()
                )));
            }
        }
        Ok(manifest)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(&self.entries)?;
        std::fs::write(path, text).map_err(|e| Error::Io {
            path: path.display().to_string(),
            source: e,
        })
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn entries(&self) -> &[ManifestEntry] {
        &self.entries
    }

    /// Loads every volume in the given split, in manifest order.
    /// `strip_labels` drops label grids at load time, which is how the
    /// pretraining pool stays label-blind.
    pub fn load_split(&self, split: Split, strip_labels: bool) -> Result<Vec<Volume>> {
        let mut volumes = Vec::new();
        for e in self.entries.iter().filter(|e| e.split == split) {
            let v = load_volume(&self.resolve(&e.path))?;
            volumes.push(if strip_labels { v.without_labels() } else { v });
        }
        Ok(volumes)
    }

    /// Pretraining pool: `pretrain`-tagged volumes plus the labeled pool,
    /// all label-stripped. Pretraining never reads labels, so reusing the
    /// labeled volumes here leaks nothing.
    pub fn load_pretrain_pool(&self) -> Result<Vec<Volume>> {
        let mut volumes = self.load_split(Split::Pretrain, true)?;
        volumes.extend(self.load_split(Split::LabeledPool, true)?);
        Ok(volumes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume::{generate_synthetic_volume, save_volume, FamilySpec};

    #[test]
    fn roundtrip_and_split_loading() {
        let dir = std::env::temp_dir().join("pcl-manifest-test");
        std::fs::create_dir_all(&dir).unwrap();
        let fam = FamilySpec::preset("a").unwrap();
        let mut entries = Vec::new();
        for seed in 0..3 {
            let v = generate_synthetic_volume(&fam, seed).unwrap();
            let name = format!("v{seed}.vvol");
            save_volume(&v, &dir.join(&name)).unwrap();
            entries.push(ManifestEntry {
                path: PathBuf::from(name),
                family_id: "a".into(),
                split: if seed == 0 { Split::Pretrain } else { Split::LabeledPool },
            });
        }
        let manifest = DatasetManifest::new(dir.clone(), entries).unwrap();
        let mpath = dir.join("manifest.json");
        manifest.save(&mpath).unwrap();

        let loaded = DatasetManifest::load(&mpath).unwrap();
        assert_eq!(loaded.entries().len(), 3);
        let labeled = loaded.load_split(Split::LabeledPool, false).unwrap();
        assert_eq!(labeled.len(), 2);
        assert!(labeled.iter().all(|v| v.has_labels()));
        let pool = loaded.load_pretrain_pool().unwrap();
        assert_eq!(pool.len(), 3);
        assert!(pool.iter().all(|v| !v.has_labels()));
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn duplicate_paths_rejected() {
        let entries = vec![
            ManifestEntry {
                path: PathBuf::from("x.vvol"),
                family_id: "a".into(),
                split: Split::Pretrain,
            },
            ManifestEntry {
                path: PathBuf::from("x.vvol"),
                family_id: "a".into(),
                split: Split::Test,
            },
        ];
        assert!(DatasetManifest::new(PathBuf::from("."), entries).is_err());
    }

    #[test]
    fn missing_file_rejected_at_load() {
        let dir = std::env::temp_dir().join("pcl-manifest-missing");
        std::fs::create_dir_all(&dir).unwrap();
        let mpath = dir.join("manifest.json");
        std::fs::write(
            &mpath,
            r#"[{"path":"absent.vvol","family_id":"a","split":"pretrain"}]"#,
        )
        .unwrap();
        assert!(DatasetManifest::load(&mpath).is_err());
        std::fs::remove_dir_all(&dir).ok();
    }
}
