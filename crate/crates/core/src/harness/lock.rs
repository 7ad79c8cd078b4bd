//! Run lock: prevents two runs from writing into the same output directory.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

const LOCK_FILE: &str = ".ocrprobe.lock";

/// Held for the lifetime of a run; the lock file is removed on drop.
#[derive(Debug)]
pub struct RunLock {
    path: PathBuf,
}

impl RunLock {
    /// Create the output directory if needed and take the lock. Fails when
    /// another run holds it.
    pub fn acquire(out_dir: &Path) -> Result<RunLock> {
        fs::create_dir_all(out_dir)?;
        let path = out_dir.join(LOCK_FILE);
        match fs::OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(_) => Ok(RunLock { path }),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                Err(Error::OutputLocked(out_dir.display().to_string()))
            }
            Err(e) => Err(e.into()),
        }
    }
}

impl Drop for RunLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lock_excludes_concurrent_runs_and_releases() {
        let dir = tempfile::tempdir().unwrap();
        let lock = RunLock::acquire(dir.path()).unwrap();
        assert!(matches!(
            RunLock::acquire(dir.path()),
            Err(Error::OutputLocked(_))
        ));
        drop(lock);
        let again = RunLock::acquire(dir.path());
        assert!(again.is_ok());
    }
}
