use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use super::vocab::Vocabulary;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Frozen `[|V|×d]` lookup table. Rows for `<PAD>`, `<OOV>` and tokens absent
/// from the source file are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    rows: Vec<f64>,
}

impl EmbeddingTable {
    pub fn zeros(vocab_len: usize, dim: usize) -> Self {
        Self {
            dim,
            rows: vec![0.0; vocab_len * dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.rows.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn row(&self, id: u32) -> &[f64] {
        let i = id as usize;
        &self.rows[i * self.dim..(i + 1) * self.dim]
    }

    pub fn set_row(&mut self, id: u32, values: &[f64]) {
        let i = id as usize;
        self.rows[i * self.dim..(i + 1) * self.dim].copy_from_slice(values);
    }

    /// `[d×len]` matrix whose columns are the embeddings of `ids`.
    pub fn sentence_matrix(&self, ids: &[u32]) -> Tensor {
        let len = ids.len();
        let mut data = vec![0.0; self.dim * len];
        for (t, &id) in ids.iter().enumerate() {
            for (i, v) in self.row(id).iter().enumerate() {
                data[i * len + t] = *v;
            }
        }
        Tensor::from_parts(vec![self.dim, len], data)
    }
}

/// Reads the `token v1 v2 … vd` text format. The dimension is taken from the
/// first line and every later line must agree; it must also equal
/// `expected_dim` when given. The first occurrence of a token wins.
pub fn load_embeddings(
    path: impl AsRef<Path>,
    vocab: &Vocabulary,
    expected_dim: Option<usize>,
) -> Result<EmbeddingTable> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let shown = path.display().to_string();
    let format_err = |line: usize, detail: String| Error::Format {
        path: shown.clone(),
        line,
        detail,
    };

    let mut dim: Option<usize> = None;
    let mut found: HashMap<u32, Vec<f64>> = HashMap::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let token = parts.next().unwrap_or_default();
        let values: Vec<f64> = parts
            .map(|p| p.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| format_err(line_no, format!("bad float: {e}")))?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(format_err(line_no, "non-finite value".into()));
        }
        match dim {
            None => {
                if values.is_empty() {
                    return Err(format_err(line_no, "no vector values".into()));
                }
                if let Some(expected) = expected_dim {
                    if values.len() != expected {
                        return Err(Error::Contract(format!(
                            "embedding file {shown} has dimension {}, hyperparameters say {expected}",
                            values.len()
                        )));
                    }
                }
                dim = Some(values.len());
            }
            Some(d) if values.len() != d => {
                return Err(format_err(
                    line_no,
                    format!("expected {d} values, found {}", values.len()),
                ));
            }
            Some(_) => {}
        }
        let id = vocab.id(token);
        if id >= 2 {
            found.entry(id).or_insert(values);
        }
    }

    let dim = dim
        .or(expected_dim)
        .ok_or_else(|| format_err(0, "empty embedding file and no expected dimension".into()))?;
    let mut table = EmbeddingTable::zeros(vocab.len(), dim);
    for (id, values) in found {
        table.set_row(id, &values);
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use std::io::Write;

    use super::*;

    fn write(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn reads_rows_and_zero_fills() {
        let f = write("cat 0.1 0.2 0.3\ndog -1 0 2.5\n");
        let vocab = Vocabulary::build(["dog", "cat", "emu"]);
        let t = load_embeddings(f.path(), &vocab, Some(3)).unwrap();
        assert_eq!(t.row(vocab.id("cat")), &[0.1, 0.2, 0.3]);
        assert_eq!(t.row(vocab.id("dog")), &[-1.0, 0.0, 2.5]);
        assert_eq!(t.row(vocab.id("emu")), &[0.0; 3]);
        assert_eq!(t.row(0), &[0.0; 3]);
        assert_eq!(t.row(1), &[0.0; 3]);
    }

    #[test]
    fn inconsistent_dimension_names_line() {
        let f = write("a 1 2 3\nb 1 2\n");
        let vocab = Vocabulary::build(["a"]);
        match load_embeddings(f.path(), &vocab, None) {
            Err(Error::Format { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected format error, got {other:?}"),
        }
    }

    #[test]
    fn dimension_must_match_hyperparameters() {
        let f = write("a 1 2 3\n");
        let vocab = Vocabulary::build(["a"]);
        assert!(matches!(
            load_embeddings(f.path(), &vocab, Some(4)),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn sentence_matrix_is_column_per_token() {
        let mut t = EmbeddingTable::zeros(4, 2);
        t.set_row(2, &[1.0, 2.0]);
        t.set_row(3, &[3.0, 4.0]);
        let m = t.sentence_matrix(&[3, 2, 0]);
        assert_eq!(m.shape(), &[2, 3]);
        assert_eq!(m.data(), &[3.0, 1.0, 0.0, 4.0, 2.0, 0.0]);
    }
}
