//! Analogy and paraphrase-retrieval evaluation of sequence embeddings.

pub mod analogy;
pub mod embedder;
pub mod retrieval;

pub use analogy::{
    answer_analogy, answer_from_vectors, build_candidates, evaluate_analogy, expand_templates, read_analogies,
    write_analogies, AnalogyQuestion, AnalogyReport, LengthStats, Template,
};
pub use embedder::{embed_corpus, BowEmbedder, Embedder, EmbeddingMatrix, EncoderEmbedder};
pub use retrieval::{
    bm25_rank, retrieve_topk, topk_accuracy, Bm25, RetrievalReport, RetrievalSet, BM25_B, BM25_K1, DEFAULT_KS,
};
