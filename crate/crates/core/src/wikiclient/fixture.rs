use std::collections::HashMap;
use std::io;
use std::path::{Path, PathBuf};

use async_trait::async_trait;

use super::{canonical_title, BackendMode, SearchBackend, WikiError};

/// Offline backend over a snapshot directory:
///
/// ```text
/// <dir>/search_index.tsv   query <TAB> title <TAB> rank
/// <dir>/pages/<title>.txt  plain text of one article
/// ```
///
/// Queries match after lower-casing and whitespace collapsing. Page files
/// may use either the canonical title or its underscore form.
#[derive(Debug, Clone)]
pub struct FixtureBackend {
    root: PathBuf,
    index: HashMap<String, Vec<String>>,
}

pub(crate) fn normalize_query(q: &str) -> String {
    q.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

impl FixtureBackend {
    pub fn open(root: impl AsRef<Path>) -> io::Result<FixtureBackend> {
        let root = root.as_ref().to_path_buf();
        let index_path = root.join("search_index.tsv");
        let raw = std::fs::read_to_string(&index_path)?;
        let mut rows: HashMap<String, Vec<(usize, usize, String)>> = HashMap::new();
        for (lineno, line) in raw.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            let bad = || {
                io::Error::new(
                    io::ErrorKind::InvalidData,
                    format!(
                        "{}:{}: expected `query<TAB>title<TAB>rank`",
                        index_path.display(),
                        lineno + 1
                    ),
                )
            };
            if fields.len() != 3 {
                return Err(bad());
            }
            let rank: usize = fields[2].trim().parse().map_err(|_| bad())?;
            rows.entry(normalize_query(fields[0]))
                .or_default()
                .push((rank, lineno, fields[1].trim().to_string()));
        }
        let index = rows
            .into_iter()
            .map(|(q, mut hits)| {
                hits.sort();
                (q, hits.into_iter().map(|(_, _, t)| t).collect())
            })
            .collect();
        Ok(FixtureBackend { root, index })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn page_path(&self, title: &str) -> Option<PathBuf> {
        let canonical = canonical_title(title);
        let pages = self.root.join("pages");
        [canonical.clone(), canonical.replace(' ', "_")]
            .into_iter()
            .filter(|name| !name.is_empty() && !name.contains(['/', '\\']) && name != "..")
            .map(|name| pages.join(format!("{name}.txt")))
            .find(|p| p.is_file())
    }
}

#[async_trait]
impl SearchBackend for FixtureBackend {
    fn mode(&self) -> BackendMode {
        BackendMode::Fixture
    }

    async fn search(&self, query: &str, limit: usize) -> Result<Vec<String>, WikiError> {
        Ok(self
            .index
            .get(&normalize_query(query))
            .map(|hits| hits.iter().take(limit).cloned().collect())
            .unwrap_or_default())
    }

    async fn get_text(&self, title: &str) -> Result<Option<String>, WikiError> {
        match self.page_path(title) {
            Some(path) => std::fs::read_to_string(&path)
                .map(Some)
                .map_err(|e| WikiError::Backend(format!("{}: {e}", path.display()))),
            None => Ok(None),
        }
    }
}
