use std::collections::HashSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Background,
    Evaluation,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::Background => "background",
            Role::Evaluation => "evaluation",
        })
    }
}

impl FromStr for Role {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "background" => Ok(Role::Background),
            "evaluation" => Ok(Role::Evaluation),
            other => Err(Error::Manifest(format!("unknown role {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub clip_id: String,
    pub path: PathBuf,
    pub role: Role,
}

/// List of corpus clips with their background/evaluation role.
///
/// On disk this is a CSV with header `clip_id,path,role`. Relative paths are
/// resolved against the manifest's directory when loaded.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CorpusManifest {
    entries: Vec<ManifestEntry>,
    /// Expected clip duration, if known.
    pub clip_seconds: Option<f64>,
}

#[derive(Deserialize)]
struct Row {
    clip_id: String,
    path: String,
    role: String,
}

impl CorpusManifest {
    pub fn new(entries: Vec<ManifestEntry>) -> Result<Self> {
        let mut seen = HashSet::new();
        for e in &entries {
            if !seen.insert(e.clip_id.as_str()) {
                return Err(Error::Manifest(format!("duplicate clip_id {:?}", e.clip_id)));
            }
        }
        Ok(Self {
            entries,
            clip_seconds: None,
        })
    }

    pub fn entries(&self) -> &[ManifestEntry] {
        &self.entries
    }

    pub fn with_role(&self, role: Role) -> impl Iterator<Item = &ManifestEntry> {
        self.entries.iter().filter(move |e| e.role == role)
    }

    /// Manifest restricted to one role.
    pub fn subset(&self, role: Role) -> CorpusManifest {
        CorpusManifest {
            entries: self.with_role(role).cloned().collect(),
            clip_seconds: self.clip_seconds,
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn from_reader(reader: impl std::io::Read, base_dir: Option<&Path>) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["clip_id", "path", "role"] {
            return Err(Error::Manifest(format!(
                "expected header clip_id,path,role, got {}",
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let mut entries = Vec::new();
        for row in rdr.deserialize::<Row>() {
            let row = row?;
            let mut path = PathBuf::from(&row.path);
            if let (true, Some(base)) = (path.is_relative(), base_dir) {
                path = base.join(path);
            }
            entries.push(ManifestEntry {
                clip_id: row.clip_id,
                path,
                role: row.role.parse()?,
            });
        }
        Self::new(entries)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_reader(file, path.parent())
    }

    pub fn write(&self, writer: impl std::io::Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["clip_id", "path", "role"])?;
        for e in &self.entries {
            w.write_record([
                e.clip_id.as_str(),
                &e.path.to_string_lossy(),
                &e.role.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<manifest>", e))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write(file)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_resolves_paths() {
        let text = "clip_id,path,role\na,x/a.wav,background\nb,/abs/b.wav,evaluation\n";
        let m = CorpusManifest::from_reader(text.as_bytes(), Some(Path::new("/data"))).unwrap();
        assert_eq!(m.len(), 2);
        assert_eq!(m.entries()[0].path, PathBuf::from("/data/x/a.wav"));
        assert_eq!(m.entries()[1].path, PathBuf::from("/abs/b.wav"));
        assert_eq!(m.with_role(Role::Evaluation).count(), 1);
    }

    #[test]
    fn rejects_duplicates_bad_roles_and_headers() {
        let dup = "clip_id,path,role\na,a.wav,background\na,b.wav,evaluation\n";
        assert!(CorpusManifest::from_reader(dup.as_bytes(), None).is_err());
        let role = "clip_id,path,role\na,a.wav,training\n";
        assert!(CorpusManifest::from_reader(role.as_bytes(), None).is_err());
        let header = "id,path,role\na,a.wav,background\n";
        assert!(CorpusManifest::from_reader(header.as_bytes(), None).is_err());
    }

    #[test]
    fn write_then_read() {
        let m = CorpusManifest::new(vec![ManifestEntry {
            clip_id: "c1".into(),
            path: "/tmp/c1.wav".into(),
            role: Role::Evaluation,
        }])
        .unwrap();
        let mut buf = Vec::new();
        m.write(&mut buf).unwrap();
        assert_eq!(CorpusManifest::from_reader(&buf[..], None).unwrap(), m);
    }
}
