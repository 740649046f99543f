use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::vocab::{Vocab, PAD};
use crate::autodiff::Matrix;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Half-width of the uniform init for rows without a pretrained vector.
pub const INIT_RANGE: f64 = 0.05;

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable<T: Scalar> {
    /// |V|×d, row 0 (padding) all zeros.
    pub matrix: Matrix<T>,
    pub trainable: bool,
}

impl<T: Scalar> EmbeddingTable<T> {
    /// Every row drawn from U(−0.05, 0.05) except the zero padding row.
    pub fn random(vocab_size: usize, dim: usize, seed: u64, trainable: bool) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut matrix = Matrix::from_fn(vocab_size, dim, |_, _| T::lit(rng.gen_range(-INIT_RANGE..INIT_RANGE)));
        matrix.row_mut(PAD).fill(T::zero());
        EmbeddingTable { matrix, trainable }
    }

    pub fn dim(&self) -> usize {
        self.matrix.cols()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingReport {
    pub matched: usize,
    /// matched / (|V| − 2)
    pub coverage: f64,
    pub skipped_lines: usize,
}

/// Loads `token v₁ … v_d` lines for the tokens of `vocab`.
///
/// Rows of tokens absent from the file keep their seeded random init. A line
/// whose vector length differs from `dim` is an error; a line that cannot be
/// read or whose numbers do not parse is skipped and counted. A leading
/// `count dim` header line is ignored.
pub fn load_embeddings<T: Scalar>(
    path: &Path,
    vocab: &Vocab,
    dim: usize,
    seed: u64,
    trainable: bool,
) -> Result<(EmbeddingTable<T>, EmbeddingReport)> {
    let mut table = EmbeddingTable::random(vocab.len(), dim, seed, trainable);
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut seen = vec![false; vocab.len()];
    let mut report = EmbeddingReport {
        matched: 0,
        coverage: 0.0,
        skipped_lines: 0,
    };
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let Ok(line) = line else {
            report.skipped_lines += 1;
            continue;
        };
        let mut fields = line.split_whitespace();
        let Some(token) = fields.next() else { continue };
        let rest: Vec<&str> = fields.collect();
        if lineno == 0 && rest.len() == 1 && token.parse::<usize>().is_ok() && rest[0].parse::<usize>().is_ok() {
            continue;
        }
        if rest.len() != dim {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: lineno + 1,
                msg: format!("expected {dim} values, found {}", rest.len()),
            });
        }
        let Ok(values) = rest.iter().map(|s| s.parse::<f64>()).collect::<std::result::Result<Vec<_>, _>>() else {
            report.skipped_lines += 1;
            continue;
        };
        if let Some(id) = vocab.get(token) {
            if !seen[id] {
                report.matched += 1;
                seen[id] = true;
            }
            for (dst, v) in table.matrix.row_mut(id).iter_mut().zip(values) {
                *dst = T::lit(v);
            }
        }
    }
    if report.skipped_lines > 0 {
        log::warn!("{}: skipped {} unreadable lines", path.display(), report.skipped_lines);
    }
    let real = vocab.len().saturating_sub(2);
    report.coverage = if real == 0 { 0.0 } else { report.matched as f64 / real as f64 };
    Ok((table, report))
}
