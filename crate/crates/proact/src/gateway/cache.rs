//! Disk-backed response cache. One JSON file per entry, keyed by a stable
//! hash of the full request plus the backend id, partitioned by capability.
//! Writes go through a temp file and rename so concurrent readers never see
//! a torn entry.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{de::DeserializeOwned, Serialize};

use crate::error::Result;

pub struct DiskCache {
    dir: PathBuf,
}

impl DiskCache {
    pub fn open(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref().to_path_buf();
        fs::create_dir_all(&dir)?;
        Ok(Self { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path(&self, capability: &str, key: &str) -> PathBuf {
        self.dir.join(capability).join(format!("{key}.json"))
    }

    pub fn get<T: DeserializeOwned>(&self, capability: &str, key: &str) -> Result<Option<T>> {
        let path = self.path(capability, key);
        match fs::read_to_string(&path) {
            Ok(body) => Ok(serde_json::from_str(&body).ok()),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(e.into()),
        }
    }

    pub fn put<T: Serialize>(&self, capability: &str, key: &str, value: &T) -> Result<()> {
        let path = self.path(capability, key);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        let tmp = path.with_extension("tmp");
        fs::write(&tmp, serde_json::to_vec(value)?)?;
        fs::rename(&tmp, &path)?;
        Ok(())
    }
}
