//! Ingestion, tokenization, vocabulary, embeddings and synthetic corpora.

mod dataset;
mod embeddings;
mod synthetic;
mod tokenize;
mod vocab;

pub use dataset::{
    concat_user, encode, group_users, load_jsonl, user_tokens, write_jsonl, EncodedDoc, Post, PostRecord, UserRecord,
};
pub use embeddings::{load_embeddings, EmbeddingReport, EmbeddingTable, INIT_RANGE};
pub use synthetic::{
    gen_synthetic, topic_word, ClassMode, ClassSpec, PlantedTopic, Polarity, SyntheticCorpus, SyntheticSpec,
};
pub use tokenize::{tokenize, SEP_TOKEN, URL_TOKEN, USER_TOKEN};
pub use vocab::{Vocab, PAD, PAD_TOKEN, UNK, UNK_TOKEN};
