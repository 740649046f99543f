//! Risk indicators: lexicon sentiment per token and LDA topic mixtures per document.

mod lda;
mod lexicon;

pub use lda::{doc_seed, greedy_purity, lda_fit, LdaConfig, LdaModel, LdaSampler, TopicVector};
pub use lexicon::{lexicon_files, load_lexicon, sentiment_vector, Lexicon};
