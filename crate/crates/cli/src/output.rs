//! Output directory handling. Files are written to a temporary sibling and
//! renamed into place, so a reader never observes a partial file.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use aqurate_core::Result as CoreResult;
use tempfile::NamedTempFile;

use crate::{CliError, CliResult};

#[derive(Debug, Clone)]
pub struct OutDir {
    root: PathBuf,
    written: Vec<PathBuf>,
}

impl OutDir {
    pub fn create(root: &Path) -> CliResult<Self> {
        fs::create_dir_all(root).map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", root.display())))?;
        Ok(Self {
            root: root.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Files written so far, in order.
    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }

    /// Writes `name` atomically through `fill`.
    pub fn write<F>(&mut self, name: &str, fill: F) -> CliResult<PathBuf>
    where
        F: FnOnce(&mut BufWriter<&mut NamedTempFile>) -> CoreResult<()>,
    {
        let path = self.root.join(name);
        let fail = |e: &dyn std::fmt::Display| CliError::Runtime(format!("writing {}: {e}", path.display()));
        let mut tmp = NamedTempFile::new_in(&self.root).map_err(|e| fail(&e))?;
        {
            let mut w = BufWriter::new(&mut tmp);
            fill(&mut w).map_err(|e| fail(&e))?;
            w.flush().map_err(|e| fail(&e))?;
        }
        tmp.as_file().sync_all().map_err(|e| fail(&e))?;
        tmp.persist(&path).map_err(|e| fail(&e.error))?;
        self.written.push(path.clone());
        Ok(path)
    }

    pub fn write_text(&mut self, name: &str, text: &str) -> CliResult<PathBuf> {
        self.write(name, |w| {
            w.write_all(text.as_bytes())?;
            Ok(())
        })
    }
}
