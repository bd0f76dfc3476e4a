use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{digest_f64s, AdapterInfo, ParamDigest, TextEncoder, TokenId};
use crate::error::{Error, Result};
use crate::hash::{derive_seed, fnv1a64, Fnv1a};

const BEGIN: &str = "<|startoftext|>";
const END: &str = "<|endoftext|>";
const WORD_END: &str = "</w>";

/// Desk-scale stand-in for a CLIP text encoder.
///
/// Tokenization lowercases, splits on whitespace, emits punctuation as single
/// tokens and cuts alphanumeric runs into pieces of at most `max_piece`
/// characters (the last piece of a word carries a `</w>` suffix). Token ids are
/// the FNV-1a hash of the piece. Dictionary rows are drawn from a ChaCha8
/// stream seeded by `(seed, id)`, so an id's embedding never depends on what
/// else has been looked up. The transformer is a fixed random linear map
/// applied per position plus a positional offset.
#[derive(Debug, Clone)]
pub struct SyntheticTextEncoder {
    seed: u64,
    dim: usize,
    max_len: usize,
    scale: f64,
    max_piece: usize,
    projection: DMatrix<f64>,
    positions: DMatrix<f64>,
}

impl SyntheticTextEncoder {
    pub fn new(seed: u64, dim: usize, max_len: usize) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidArgument(format!(
                "text encoder dimension must be at least 2, got {dim}"
            )));
        }
        if max_len < 3 {
            return Err(Error::InvalidArgument(format!(
                "max sequence length must be at least 3, got {max_len}"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "transform"));
        let std = 1.0 / (dim as f64).sqrt();
        let projection = DMatrix::from_fn(dim, dim, |_, _| gaussian(&mut rng) * std);
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "positions"));
        let positions = DMatrix::from_fn(max_len, dim, |_, _| gaussian(&mut rng) * 0.02 * std);
        Ok(SyntheticTextEncoder {
            seed,
            dim,
            max_len,
            scale: 0.1,
            max_piece: 8,
            projection,
            positions,
        })
    }

    /// Set the expected norm of a dictionary embedding.
    pub fn with_scale(mut self, scale: f64) -> Self {
        self.scale = scale;
        self
    }

    pub fn with_max_piece(mut self, max_piece: usize) -> Self {
        self.max_piece = max_piece.max(1);
        self
    }

    /// Sub-word pieces of `text` in order.
    pub fn pieces(&self, text: &str) -> Vec<String> {
        let mut out = Vec::new();
        for word in text.split_whitespace() {
            let mut run = String::new();
            for ch in word.to_lowercase().chars() {
                if ch.is_alphanumeric() {
                    run.push(ch);
                } else {
                    self.flush_run(&mut run, &mut out);
                    out.push(format!("{ch}{WORD_END}"));
                }
            }
            self.flush_run(&mut run, &mut out);
        }
        out
    }

    fn flush_run(&self, run: &mut String, out: &mut Vec<String>) {
        if run.is_empty() {
            return;
        }
        let chars: Vec<char> = run.chars().collect();
        let chunks: Vec<String> = chars
            .chunks(self.max_piece)
            .map(|c| c.iter().collect())
            .collect();
        let last = chunks.len() - 1;
        for (i, chunk) in chunks.into_iter().enumerate() {
            if i == last {
                out.push(format!("{chunk}{WORD_END}"));
            } else {
                out.push(chunk);
            }
        }
        run.clear();
    }

    fn embedding_row(&self, id: TokenId) -> impl Iterator<Item = f64> {
        let stream = Fnv1a::new()
            .write_u64(self.seed)
            .write(b"dictionary")
            .write_u64(id.0)
            .finish();
        let mut rng = ChaCha8Rng::seed_from_u64(stream);
        let std = self.scale / (self.dim as f64).sqrt();
        (0..self.dim).map(move |_| gaussian(&mut rng) * std)
    }
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

pub(crate) fn piece_id(piece: &str) -> TokenId {
    TokenId(fnv1a64(piece.as_bytes()))
}

impl AdapterInfo for SyntheticTextEncoder {
    fn id(&self) -> String {
        format!(
            "synthetic-text(seed={},d={},max_len={},scale={})",
            self.seed, self.dim, self.max_len, self.scale
        )
    }

    fn parameter_digests(&self) -> Vec<(String, ParamDigest)> {
        vec![
            ("text.projection".into(), digest_f64s(self.projection.iter())),
            ("text.positions".into(), digest_f64s(self.positions.iter())),
        ]
    }
}

impl TextEncoder for SyntheticTextEncoder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn max_len(&self) -> usize {
        self.max_len
    }

    fn tokenize(&self, text: &str) -> Result<Vec<TokenId>> {
        Ok(self.pieces(text).iter().map(|p| piece_id(p)).collect())
    }

    fn begin_token(&self) -> Option<TokenId> {
        Some(piece_id(BEGIN))
    }

    fn end_token(&self) -> Option<TokenId> {
        Some(piece_id(END))
    }

    fn dictionary_embed(&self, ids: &[TokenId]) -> Result<DMatrix<f64>> {
        let mut out = DMatrix::zeros(ids.len(), self.dim);
        for (r, &id) in ids.iter().enumerate() {
            for (c, v) in self.embedding_row(id).enumerate() {
                out[(r, c)] = v;
            }
        }
        Ok(out)
    }

    fn transform(&self, sequence: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let (l, d) = sequence.shape();
        if d != self.dim {
            return Err(Error::DimensionMismatch {
                what: "sequence embedding",
                expected: self.dim,
                actual: d,
            });
        }
        if l > self.max_len {
            return Err(Error::SequenceTooLong {
                len: l,
                max: self.max_len,
            });
        }
        Ok(sequence * self.projection.transpose() + self.positions.rows(0, l))
    }

    fn transform_vjp(&self, sequence: &DMatrix<f64>, grad: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if grad.shape() != sequence.shape() {
            return Err(Error::DimensionMismatch {
                what: "transform gradient rows",
                expected: sequence.nrows(),
                actual: grad.nrows(),
            });
        }
        Ok(grad * &self.projection)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn encoder() -> SyntheticTextEncoder {
        SyntheticTextEncoder::new(11, 16, 77).unwrap()
    }

    #[test]
    fn one_token_per_short_word() {
        let enc = encoder();
        assert_eq!(enc.pieces("Anne Hathaway"), ["anne</w>", "hathaway</w>"]);
        assert_eq!(enc.tokenize("Anne Hathaway").unwrap().len(), 2);
    }

    #[test]
    fn long_words_split_into_sub_words() {
        let enc = encoder();
        let pieces = enc.pieces("Arnold Schwarzenegger");
        assert_eq!(pieces, ["arnold</w>", "schwarze", "negger</w>"]);
    }

    #[test]
    fn punctuation_is_its_own_token() {
        let enc = encoder();
        assert_eq!(enc.pieces("Jr."), ["jr</w>", ".</w>"]);
        assert_eq!(enc.pieces("{x}"), ["{</w>", "x</w>", "}</w>"]);
    }

    #[test]
    fn continuation_piece_differs_from_word() {
        // "schwarze" mid-word and "schwarze</w>" as a full word are distinct tokens.
        let enc = encoder();
        let a = enc.tokenize("Schwarzenegger").unwrap();
        let b = enc.tokenize("Schwarze").unwrap();
        assert_ne!(a[0], b[0]);
    }

    #[test]
    fn dictionary_is_pure_lookup() {
        let enc = encoder();
        let ids = enc.tokenize("a photo of a face").unwrap();
        let all = enc.dictionary_embed(&ids).unwrap();
        let single = enc.dictionary_embed(&ids[3..4]).unwrap();
        assert_eq!(all.row(3), single.row(0));
        assert_eq!(all.row(0), all.row(3));
    }

    #[test]
    fn transform_preserves_length_and_checks_bounds() {
        let enc = SyntheticTextEncoder::new(1, 8, 4).unwrap();
        let seq = DMatrix::from_element(3, 8, 0.1);
        assert_eq!(enc.transform(&seq).unwrap().shape(), (3, 8));
        let long = DMatrix::zeros(5, 8);
        assert!(matches!(
            enc.transform(&long),
            Err(Error::SequenceTooLong { len: 5, max: 4 })
        ));
    }

    #[test]
    fn vjp_matches_linear_map() {
        let enc = encoder();
        let seq = enc.dictionary_embed(&enc.tokenize("x y z").unwrap()).unwrap();
        let grad = DMatrix::from_fn(3, 16, |r, c| (r * 16 + c) as f64 * 0.01 - 0.2);
        let g = enc.transform_vjp(&seq, &grad).unwrap();
        // <grad, T(seq + h e)> - <grad, T(seq)> = h * g[e]
        let h = 1e-3;
        let base = enc.transform(&seq).unwrap().dot(&grad);
        let mut bumped = seq.clone();
        bumped[(1, 5)] += h;
        let next = enc.transform(&bumped).unwrap().dot(&grad);
        assert!(((next - base) / h - g[(1, 5)]).abs() < 1e-9);
    }

    #[test]
    fn rejects_tiny_dimension() {
        assert!(SyntheticTextEncoder::new(0, 1, 77).is_err());
    }
}
