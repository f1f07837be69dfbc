use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Duration;

use splinemix::io::write_text;
use splinemix::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.txt";

/// Record of one command invocation, written next to its outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub command: String,
    /// Canonical text of the effective configuration.
    pub config: String,
    pub seed: Option<u64>,
    pub version: String,
    pub duration: Duration,
    /// Output files, relative to the output directory.
    pub outputs: Vec<PathBuf>,
}

impl RunManifest {
    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "command = {}", self.command);
        let _ = writeln!(s, "version = {}", self.version);
        match self.seed {
            Some(seed) => {
                let _ = writeln!(s, "seed = {seed}");
            }
            None => s.push_str("seed = none\n"),
        }
        let _ = writeln!(s, "duration_seconds = {:.3}", self.duration.as_secs_f64());
        for o in &self.outputs {
            let _ = writeln!(s, "output = {}", o.display());
        }
        s.push_str("\n[config]\n");
        s.push_str(&self.config);
        s
    }

    /// Checks that every listed output exists, then writes the manifest.
    pub fn write(&self, out_dir: &Path) -> Result<PathBuf> {
        if let Some(missing) = self.outputs.iter().find(|o| !out_dir.join(o).is_file()) {
            return Err(Error::io(
                out_dir.join(missing),
                std::io::Error::new(std::io::ErrorKind::NotFound, "listed output was not written"),
            ));
        }
        let path = out_dir.join(MANIFEST_FILE);
        write_text(&path, &self.render())?;
        Ok(path)
    }
}
