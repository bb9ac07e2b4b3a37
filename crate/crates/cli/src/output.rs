use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};

use fadtk_core::Error as CoreError;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(CoreError),
    Write(PathBuf, std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Core(CoreError::Argument(_) | CoreError::Spec(_)) => 2,
            _ => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "{m}"),
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Write(p, e) => write!(f, "cannot write {}: {e}", p.display()),
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        CliError::Core(e)
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Core(CoreError::Csv(e))
    }
}

pub type CliResult<T = ()> = Result<T, CliError>;

/// Resolved run configuration, echoed as `# key=value` lines above a CSV
/// report. The thread count is left out so reports do not depend on it.
#[derive(Debug, Clone)]
pub struct Header {
    lines: Vec<(String, String)>,
}

impl Header {
    pub fn new(command: &str, seed: u64) -> Self {
        let mut h = Self { lines: Vec::new() };
        h.set("fadtk", env!("CARGO_PKG_VERSION"));
        h.set("command", command);
        h.set("seed", seed);
        h
    }

    pub fn set(&mut self, key: &str, value: impl fmt::Display) -> &mut Self {
        let value = value.to_string().replace(['\n', '\r'], " ");
        self.lines.push((key.to_string(), value));
        self
    }

    fn write(&self, out: &mut Vec<u8>) {
        for (k, v) in &self.lines {
            out.extend_from_slice(format!("# {k}={v}\n").as_bytes());
        }
    }
}

/// Renders the header and body in memory, then writes them to `path` or
/// stdout in one go.
pub fn emit(
    path: Option<&Path>,
    header: &Header,
    body: impl FnOnce(&mut Vec<u8>) -> fadtk_core::Result<()>,
) -> CliResult {
    let mut buf = Vec::new();
    header.write(&mut buf);
    body(&mut buf)?;
    match path {
        Some(p) => std::fs::write(p, &buf).map_err(|e| CliError::Write(p.to_path_buf(), e)),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(&buf)
                .and_then(|()| stdout.flush())
                .map_err(|e| CliError::Write("<stdout>".into(), e))
        }
    }
}

/// One line per pipeline stage on stderr.
pub fn stage(msg: impl fmt::Display) {
    eprintln!("[fadtk] {msg}");
}
