use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

use crate::frontend::{check_program, parse_named, Program, StaticError, SyntaxError};

pub const MANIFEST_FILE: &str = "MANIFEST.toml";

#[derive(Debug, Clone)]
pub struct CorpusFile {
    /// File name relative to the corpus directory.
    pub name: String,
    pub source: String,
    pub program: Program,
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleEntry {
    pub class: String,
    pub max_calls: usize,
    pub arg_pool: Vec<i64>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    #[serde(default)]
    pub oracle: Vec<OracleEntry>,
}

#[derive(Debug, Clone)]
pub struct Corpus {
    pub files: Vec<CorpusFile>,
    pub manifest: Manifest,
    /// Class name to index into `files`.
    pub classes: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostics(pub Vec<StaticError>);

impl fmt::Display for Diagnostics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CorpusError {
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("{file}: {error}")]
    Syntax { file: String, error: SyntaxError },
    #[error("{file}: {errors}")]
    Static { file: String, errors: Diagnostics },
    #[error("class `{class}` is declared in both {first} and {second}")]
    DuplicateClass { class: String, first: String, second: String },
    #[error("{MANIFEST_FILE}: {0}")]
    Manifest(String),
    #[error("no .mo files in {0}")]
    Empty(PathBuf),
}

fn io_err(path: &Path, e: std::io::Error) -> CorpusError {
    CorpusError::Io { path: path.to_path_buf(), message: e.to_string() }
}

impl Corpus {
    /// Loads every `*.mo` file directly inside `dir` (sorted by name) and the
    /// optional manifest. Any syntax or static error aborts the load.
    pub fn load(dir: &Path) -> Result<Corpus, CorpusError> {
        let mut names = Vec::new();
        for entry in fs::read_dir(dir).map_err(|e| io_err(dir, e))? {
            let entry = entry.map_err(|e| io_err(dir, e))?;
            let path = entry.path();
            if path.is_file() && path.extension().is_some_and(|x| x == "mo") {
                names.push(entry.file_name().to_string_lossy().into_owned());
            }
        }
        names.sort();
        if names.is_empty() {
            return Err(CorpusError::Empty(dir.to_path_buf()));
        }
        let mut sources = Vec::new();
        for name in names {
            let path = dir.join(&name);
            sources.push((name, fs::read_to_string(&path).map_err(|e| io_err(&path, e))?));
        }
        let manifest_path = dir.join(MANIFEST_FILE);
        let manifest = if manifest_path.is_file() {
            let text = fs::read_to_string(&manifest_path).map_err(|e| io_err(&manifest_path, e))?;
            Some(text)
        } else {
            None
        };
        Corpus::from_sources(sources, manifest.as_deref())
    }

    pub fn from_sources(sources: Vec<(String, String)>, manifest: Option<&str>) -> Result<Corpus, CorpusError> {
        let mut files = Vec::new();
        let mut classes: BTreeMap<String, usize> = BTreeMap::new();
        for (name, source) in sources {
            let program =
                parse_named(&source, &name).map_err(|error| CorpusError::Syntax { file: name.clone(), error })?;
            let errors = check_program(&program);
            if !errors.is_empty() {
                return Err(CorpusError::Static { file: name, errors: Diagnostics(errors) });
            }
            for c in &program.classes {
                if let Some(&prev) = classes.get(&c.name) {
                    return Err(CorpusError::DuplicateClass {
                        class: c.name.clone(),
                        first: files.get(prev).map(|f: &CorpusFile| f.name.clone()).unwrap_or_else(|| name.clone()),
                        second: name.clone(),
                    });
                }
                classes.insert(c.name.clone(), files.len());
            }
            files.push(CorpusFile { name, source, program });
        }
        let manifest = match manifest {
            Some(text) => toml::from_str::<Manifest>(text).map_err(|e| CorpusError::Manifest(e.to_string()))?,
            None => Manifest::default(),
        };
        for entry in &manifest.oracle {
            if !classes.contains_key(&entry.class) {
                return Err(CorpusError::Manifest(format!("oracle class `{}` is not in the corpus", entry.class)));
            }
        }
        Ok(Corpus { files, manifest, classes })
    }

    pub fn program_of(&self, class: &str) -> Option<&Program> {
        self.classes.get(class).map(|&i| &self.files[i].program)
    }

    pub fn file_of(&self, class: &str) -> Option<&CorpusFile> {
        self.classes.get(class).map(|&i| &self.files[i])
    }
}
