use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::event::LoggedEvent;

/// One JSON-lines file per session under a data directory.
#[derive(Debug, Clone)]
pub struct Store {
    dir: PathBuf,
}

impl Store {
    pub fn open(dir: impl Into<PathBuf>) -> std::io::Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(Store { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path(&self, id: &str) -> PathBuf {
        self.dir.join(format!("{id}.jsonl"))
    }

    /// Appends and syncs one line.
    pub fn append(&self, id: &str, entry: &LoggedEvent) -> std::io::Result<()> {
        let mut line = serde_json::to_vec(entry)?;
        line.push(b'\n');
        let mut f = fs::OpenOptions::new().create(true).append(true).open(self.path(id))?;
        f.write_all(&line)?;
        f.sync_data()
    }

    /// Every session log in the directory, sorted by file name. A final
    /// line cut short by a crash is dropped.
    pub fn load_all(&self) -> std::io::Result<Vec<(String, std::io::Result<Vec<LoggedEvent>>)>> {
        let mut ids: Vec<String> = fs::read_dir(&self.dir)?
            .filter_map(|e| e.ok())
            .filter_map(|e| e.file_name().to_str().and_then(|n| n.strip_suffix(".jsonl")).map(str::to_string))
            .collect();
        ids.sort();
        Ok(ids
            .into_iter()
            .map(|id| {
                let log = self.load(&id);
                (id, log)
            })
            .collect())
    }

    pub fn load(&self, id: &str) -> std::io::Result<Vec<LoggedEvent>> {
        let text = fs::read_to_string(self.path(id))?;
        let complete = text.ends_with('\n');
        let lines: Vec<&str> = text.lines().collect();
        let mut log = Vec::with_capacity(lines.len());
        for (i, line) in lines.iter().enumerate() {
            match serde_json::from_str(line) {
                Ok(e) => log.push(e),
                Err(_) if i + 1 == lines.len() && !complete => {
                    tracing::warn!("{id}: dropping truncated final log line");
                    let keep = text.rfind('\n').map_or(0, |p| p + 1);
                    fs::OpenOptions::new().write(true).open(self.path(id))?.set_len(keep as u64)?;
                }
                Err(e) => return Err(std::io::Error::new(std::io::ErrorKind::InvalidData, format!("line {}: {e}", i + 1))),
            }
        }
        Ok(log)
    }
}
