use std::io::Write;
use std::path::Path;

use anyhow::Context;

/// A command failure and the exit code it maps to.
#[derive(Debug)]
pub enum Failure {
    /// Reading or writing files failed (exit 1).
    Io(anyhow::Error),
    /// Invalid input or settings (exit 2).
    Invalid(anyhow::Error),
    /// Refused because a size cap would be exceeded (exit 3).
    Refused(anyhow::Error),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Io(_) => 1,
            Failure::Invalid(_) => 2,
            Failure::Refused(_) => 3,
        }
    }

    pub fn error(&self) -> &anyhow::Error {
        match self {
            Failure::Io(e) | Failure::Invalid(e) | Failure::Refused(e) => e,
        }
    }
}

pub fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display())).map_err(Failure::Io)
}

/// Writes `bytes` to a temporary file beside `path` and renames it into
/// place, so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let attempt = || -> anyhow::Result<()> {
        let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
        tmp.write_all(bytes)?;
        tmp.as_file().sync_all()?;
        tmp.persist(path)?;
        Ok(())
    };
    attempt().with_context(|| format!("cannot write {}", path.display())).map_err(Failure::Io)
}
