use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::corpus::EncodedDoc;
use crate::error::{Error, Result};

/// Signed sentiment scores keyed by lowercased token.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Lexicon {
    pub name: String,
    scores: HashMap<String, f64>,
    /// Lines whose token had already been seen; the later score wins.
    pub duplicates: usize,
}

impl Lexicon {
    pub fn new(name: impl Into<String>) -> Self {
        Lexicon {
            name: name.into(),
            ..Default::default()
        }
    }

    pub fn from_pairs<I, S>(name: impl Into<String>, pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, f64)>,
        S: AsRef<str>,
    {
        let mut lex = Lexicon::new(name);
        for (t, s) in pairs {
            lex.insert(t.as_ref(), s)?;
        }
        Ok(lex)
    }

    pub fn insert(&mut self, token: &str, score: f64) -> Result<()> {
        if !score.is_finite() {
            return Err(Error::Data(format!("non-finite score for `{token}`")));
        }
        if self.scores.insert(token.to_lowercase(), score).is_some() {
            self.duplicates += 1;
        }
        Ok(())
    }

    pub fn score(&self, token: &str) -> Option<f64> {
        self.scores.get(token).copied()
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    /// Entries sorted by token.
    pub fn entries(&self) -> Vec<(&str, f64)> {
        let mut v: Vec<_> = self.scores.iter().map(|(k, &s)| (k.as_str(), s)).collect();
        v.sort_by(|a, b| a.0.cmp(b.0));
        v
    }

    pub fn write_tsv(&self, path: &Path) -> Result<()> {
        let mut out = Vec::new();
        for (t, s) in self.entries() {
            writeln!(out, "{t}\t{s}").expect("write to vec");
        }
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }
}

/// Parses a `token<TAB>score` file. Blank lines and `#` comments are ignored.
pub fn load_lexicon(path: &Path) -> Result<Lexicon> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let mut lex = Lexicon::new(name);
    for (i, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |msg: String| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            msg,
        };
        let (token, score) = line
            .split_once('\t')
            .ok_or_else(|| err("expected `token<TAB>score`".into()))?;
        // Some published lexicons carry extra columns (e.g. std. dev.) after the score.
        let score = score.split('\t').next().unwrap_or("").trim();
        let score: f64 = score
            .parse()
            .map_err(|_| err(format!("unparsable score `{score}`")))?;
        lex.insert(token.trim(), score).map_err(|e| err(e.to_string()))?;
    }
    if lex.duplicates > 0 {
        log::warn!("{}: {} duplicate tokens, later scores kept", path.display(), lex.duplicates);
    }
    Ok(lex)
}

/// Lexicon files (`*.tsv`, `*.txt`) in `dir`, sorted by file name.
pub fn lexicon_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && matches!(p.extension().and_then(|e| e.to_str()), Some("tsv" | "txt")))
        .collect();
    files.sort();
    Ok(files)
}

/// Per-token scores aligned with `doc`; OOV and padded positions are 0.
///
/// `tokens` must be the token sequence `doc` was encoded from.
pub fn sentiment_vector(doc: &EncodedDoc, tokens: &[String], lexicon: &Lexicon) -> Vec<f64> {
    (0..doc.max_len())
        .map(|i| {
            if doc.mask[i] {
                tokens.get(i).and_then(|t| lexicon.score(t)).unwrap_or(0.0)
            } else {
                0.0
            }
        })
        .collect()
}
