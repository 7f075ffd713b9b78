//! Single writer for everything a run puts on disk.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::config::{Format, OutputConfig};
use crate::error::{CliError, CliResult};

/// Environment variable overriding the output directory of the config.
pub const OUT_ENV: &str = "KERNELBOUND_OUT";

pub struct Reporter {
    dir: PathBuf,
    formats: Vec<Format>,
    written: Vec<PathBuf>,
    quiet: bool,
}

impl Reporter {
    /// Directory precedence: `--out`, then `KERNELBOUND_OUT`, then
    /// `output.dir`, then `kernelbound-out`.
    pub fn new(cli_out: Option<&Path>, cfg: &OutputConfig, quiet: bool) -> CliResult<Self> {
        let dir = cli_out
            .map(Path::to_path_buf)
            .or_else(|| std::env::var_os(OUT_ENV).filter(|v| !v.is_empty()).map(PathBuf::from))
            .or_else(|| cfg.dir.clone())
            .unwrap_or_else(|| PathBuf::from("kernelbound-out"));
        std::fs::create_dir_all(&dir).map_err(|source| CliError::Output { path: dir.clone(), source })?;
        Ok(Self { dir, formats: cfg.formats.clone(), written: Vec::new(), quiet })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn wants(&self, f: Format) -> bool {
        self.formats.contains(&f)
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn subdir(&self, name: &str) -> CliResult<PathBuf> {
        let p = self.dir.join(name);
        std::fs::create_dir_all(&p).map_err(|source| CliError::Output { path: p.clone(), source })?;
        Ok(p)
    }

    pub fn write(&mut self, name: &str, contents: &str) -> CliResult<()> {
        let p = self.path(name);
        if let Some(parent) = p.parent() {
            std::fs::create_dir_all(parent)
                .map_err(|source| CliError::Output { path: parent.to_path_buf(), source })?;
        }
        std::fs::write(&p, contents).map_err(|source| CliError::Output { path: p.clone(), source })?;
        self.written.push(p);
        Ok(())
    }

    /// Writes the file if its format is enabled.
    pub fn write_as(&mut self, format: Format, name: &str, contents: &str) -> CliResult<()> {
        if self.wants(format) {
            self.write(name, contents)?;
        }
        Ok(())
    }

    pub fn record(&mut self, path: PathBuf) {
        self.written.push(path);
    }

    /// Progress line on stderr.
    pub fn progress(&self, msg: &str) {
        if !self.quiet {
            eprintln!("{msg}");
        }
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }
}

/// `key = value` lines, one per pair.
pub fn kv(pairs: &[(&str, String)]) -> String {
    let mut s = String::new();
    for (k, v) in pairs {
        let _ = writeln!(s, "{k} = {v}");
    }
    s
}

pub fn fmt_list(v: &[f64]) -> String {
    format!("[{}]", v.iter().map(|x| format!("{x:e}")).collect::<Vec<_>>().join(", "))
}
