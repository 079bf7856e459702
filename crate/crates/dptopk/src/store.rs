//! File persistence: one JSON file per session, one per dataset.
//!
//! Writes go to a temporary file that is then renamed over the target, so a
//! crash leaves either the old or the new state on disk.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use dptopk_core::accountant::BudgetSession;
use dptopk_core::Histogram;

pub fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)
}

fn to_io(e: serde_json::Error) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidData, e)
}

pub fn save_session(path: &Path, s: &BudgetSession) -> io::Result<()> {
    let mut bytes = serde_json::to_vec_pretty(s).map_err(to_io)?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

/// Loads a session file and checks its bookkeeping.
pub fn load_session(path: &Path) -> io::Result<BudgetSession> {
    let s: BudgetSession = serde_json::from_slice(&fs::read(path)?).map_err(to_io)?;
    s.check_consistency()
        .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, format!("{}: {e}", path.display())))?;
    Ok(s)
}

/// Dataset ids are used as file names, so only `[A-Za-z0-9_-]` is allowed.
pub fn valid_dataset_id(id: &str) -> bool {
    !id.is_empty() && id.len() <= 64 && id.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'-' || b == b'_')
}

/// A storage directory with `sessions/` and `datasets/` underneath.
#[derive(Debug, Clone)]
pub struct Store {
    root: PathBuf,
}

impl Store {
    pub fn open(root: impl Into<PathBuf>) -> io::Result<Self> {
        let root = root.into();
        fs::create_dir_all(root.join("sessions"))?;
        fs::create_dir_all(root.join("datasets"))?;
        Ok(Self { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn session_path(&self, id: u64) -> PathBuf {
        self.root.join("sessions").join(format!("{id}.json"))
    }

    fn dataset_path(&self, id: &str) -> PathBuf {
        self.root.join("datasets").join(format!("{id}.json"))
    }

    pub fn save_session(&self, s: &BudgetSession) -> io::Result<()> {
        save_session(&self.session_path(s.session_id), s)
    }

    pub fn load_sessions(&self) -> io::Result<Vec<BudgetSession>> {
        let mut out = Vec::new();
        for entry in fs::read_dir(self.root.join("sessions"))? {
            let path = entry?.path();
            if path.extension().is_some_and(|e| e == "json") {
                out.push(load_session(&path)?);
            }
        }
        out.sort_by_key(|s| s.session_id);
        Ok(out)
    }

    pub fn save_dataset(&self, id: &str, h: &Histogram) -> io::Result<()> {
        if !valid_dataset_id(id) {
            return Err(io::Error::new(io::ErrorKind::InvalidInput, format!("bad dataset id {id:?}")));
        }
        write_atomic(&self.dataset_path(id), &serde_json::to_vec(h).map_err(to_io)?)
    }

    pub fn load_dataset(&self, id: &str) -> io::Result<Option<Histogram>> {
        if !valid_dataset_id(id) {
            return Ok(None);
        }
        match fs::read(self.dataset_path(id)) {
            Ok(bytes) => Ok(Some(serde_json::from_slice(&bytes).map_err(to_io)?)),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(e),
        }
    }
}
