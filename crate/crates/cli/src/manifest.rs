//! Run manifests: every command writes `<output>.manifest` holding the
//! command name, every effective parameter, wall time, and output stats, so
//! a run can be reproduced from the manifest alone.

use std::io::Write;
use std::path::{Path, PathBuf};

use crate::CliError;

pub struct Manifest {
    command: &'static str,
    entries: Vec<(String, String)>,
    started: std::time::Instant,
}

impl Manifest {
    pub fn start(command: &'static str) -> Self {
        Manifest {
            command,
            entries: Vec::new(),
            started: std::time::Instant::now(),
        }
    }

    pub fn record(&mut self, params: &[(String, String)]) {
        self.entries.extend(params.iter().cloned());
    }

    pub fn add(&mut self, key: &str, value: impl std::fmt::Display) {
        self.entries.push((key.to_string(), value.to_string()));
    }

    pub fn elapsed_secs(&self) -> f64 {
        self.started.elapsed().as_secs_f64()
    }

    pub fn write_for(self, output: &Path) -> Result<(), CliError> {
        let path = manifest_path(output);
        let wall = self.elapsed_secs();
        let mut out = String::new();
        out.push_str(&format!("command = {}\n", self.command));
        for (key, value) in &self.entries {
            out.push_str(&format!("{key} = {value}\n"));
        }
        out.push_str(&format!("wall_time_secs = {wall}\n"));
        let mut file = std::fs::File::create(&path)
            .map_err(|e| CliError::Io(path.display().to_string(), e))?;
        file.write_all(out.as_bytes())
            .map_err(|e| CliError::Io(path.display().to_string(), e))
    }
}

pub fn manifest_path(output: &Path) -> PathBuf {
    let mut name = output.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest");
    output.with_file_name(name)
}
