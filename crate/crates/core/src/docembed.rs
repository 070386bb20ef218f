//! Joint document and word vectors.
//!
//! The built-in trainer is PV-DBOW with interleaved skip-gram word training:
//! each document vector predicts its own tokens, each word vector predicts the
//! words around it, and both share one output layer, so documents and words
//! land in the same space. Vectors can also be loaded from disk.

use std::path::Path;

use log::warn;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::{AtemError, Result};
use crate::linalg;
use crate::par::{self, Execution};
use crate::seed;
use crate::sgns::{self, NoiseTable, Scratch, SharedMatrix};
use crate::text::Vocabulary;
use crate::vecio::NamedVectors;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmbedParams {
    pub dim: usize,
    pub epochs: usize,
    pub window: usize,
    pub negatives: usize,
    pub learning_rate: f32,
    pub min_token_count: u64,
    pub seed: u64,
    pub execution: Execution,
}

impl Default for EmbedParams {
    fn default() -> Self {
        EmbedParams {
            dim: 64,
            epochs: 20,
            window: 5,
            negatives: 5,
            learning_rate: 0.025,
            min_token_count: 3,
            seed: 42,
            execution: Execution::Deterministic,
        }
    }
}

impl EmbedParams {
    pub fn validate(&self) -> Result<()> {
        if self.dim < 2 {
            return Err(AtemError::InvalidParam(format!("embed dim must be >= 2 (got {})", self.dim)));
        }
        if self.epochs < 1 {
            return Err(AtemError::InvalidParam("embed epochs must be >= 1".into()));
        }
        if self.window < 1 {
            return Err(AtemError::InvalidParam("embed window must be >= 1".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(AtemError::InvalidParam("embed learning_rate must be > 0".into()));
        }
        Ok(())
    }
}

/// Document vectors in corpus order, plus word vectors when trained here.
#[derive(Debug, Clone, PartialEq)]
pub struct DocEmbeddings {
    pub dim: usize,
    pub doc_vectors: NamedVectors,
    pub word_vectors: Option<NamedVectors>,
    /// Documents that received the corpus-mean vector.
    pub mean_filled: Vec<String>,
}

impl DocEmbeddings {
    pub fn doc(&self, i: usize) -> &[f32] {
        self.doc_vectors.row(i)
    }
}

/// Build the corpus vocabulary (stored on the corpus) and return encoded documents.
pub fn prepare_vocabulary(corpus: &mut Corpus, min_token_count: u64) -> Vec<Vec<u32>> {
    let texts: Vec<String> = corpus.documents().iter().map(|d| d.text()).collect();
    corpus.vocabulary = Vocabulary::build(texts.iter().map(|s| s.as_str()), min_token_count);
    texts.iter().map(|t| corpus.vocabulary.encode(t)).collect()
}

pub fn train_doc_embeddings(corpus: &mut Corpus, params: &EmbedParams) -> Result<DocEmbeddings> {
    params.validate()?;
    let encoded = prepare_vocabulary(corpus, params.min_token_count);
    let vocab = &corpus.vocabulary;
    if vocab.is_empty() {
        return Err(AtemError::EmptyVocabulary);
    }
    let dim = params.dim;
    let n_docs = corpus.len();

    let mut init_rng = seed::rng(seed::derive_str(params.seed, "init"));
    let doc_init: Vec<f32> = (0..n_docs).flat_map(|_| sgns::init_row(dim, &mut init_rng)).collect();
    let word_init: Vec<f32> = (0..vocab.len()).flat_map(|_| sgns::init_row(dim, &mut init_rng)).collect();
    let docs_w = SharedMatrix::from_vec(dim, &doc_init);
    let words_in = SharedMatrix::from_vec(dim, &word_init);
    let words_out = SharedMatrix::zeros(vocab.len(), dim);
    let noise = NoiseTable::new((0..vocab.len() as u32).map(|i| vocab.count(i) as f64));

    let total_tokens: usize = encoded.iter().map(Vec::len).sum();
    let total_steps = (total_tokens * params.epochs).max(1) as f64;
    let lr0 = params.learning_rate;
    let trainable: Vec<usize> = (0..n_docs).filter(|&d| !encoded[d].is_empty()).collect();

    for epoch in 0..params.epochs {
        let mut order = trainable.clone();
        order.shuffle(&mut seed::rng_for(params.seed, &[1, epoch as u64]));
        let done_before = (epoch * total_tokens) as f64;
        let chunk = if params.execution.is_parallel() { 64 } else { order.len().max(1) };
        par::for_each_chunk(params.execution, &order, chunk, |ci, docs| {
            let mut rng = seed::rng_for(params.seed, &[2, epoch as u64, ci as u64]);
            let mut scratch = Scratch::new(dim);
            // Progress estimate for the learning-rate schedule: exact in
            // sequential mode, chunk-local in parallel mode.
            let mut seen = (ci * chunk) as f64 * (total_tokens as f64 / order.len().max(1) as f64);
            for &d in docs {
                let toks = &encoded[d];
                for (p, &w) in toks.iter().enumerate() {
                    let progress = (done_before + seen) / total_steps;
                    let lr = (lr0 * (1.0 - progress as f32)).max(lr0 * 1e-4);
                    seen += 1.0;
                    sgns::train_pair(&docs_w, d, &words_out, w as usize, &noise, params.negatives, lr, &mut rng, &mut scratch);
                    // Sampled window shrink, as in word2vec.
                    let reach = rng.gen_range(1..=params.window);
                    let lo = p.saturating_sub(reach);
                    let hi = (p + reach + 1).min(toks.len());
                    for q in lo..hi {
                        if q != p {
                            sgns::train_pair(&words_in, w as usize, &words_out, toks[q] as usize, &noise, params.negatives, lr, &mut rng, &mut scratch);
                        }
                    }
                }
            }
        });
    }

    let mut doc_vectors = NamedVectors::new(dim);
    let mut mean_filled = Vec::new();
    let raw = docs_w.to_vec();
    let mean = linalg::mean(trainable.iter().map(|&d| &raw[d * dim..(d + 1) * dim]), dim)
        .unwrap_or_else(|| vec![0.0; dim]);
    for (d, doc) in corpus.documents().iter().enumerate() {
        if encoded[d].is_empty() {
            mean_filled.push(doc.doc_id.clone());
            doc_vectors.push(doc.doc_id.clone(), &mean)?;
        } else {
            doc_vectors.push(doc.doc_id.clone(), &raw[d * dim..(d + 1) * dim])?;
        }
    }
    if !mean_filled.is_empty() {
        warn!("{} documents have no in-vocabulary tokens; assigned the corpus mean", mean_filled.len());
    }
    let mut word_vectors = NamedVectors::new(dim);
    for (i, tok) in vocab.tokens().iter().enumerate() {
        word_vectors.push(tok.clone(), &words_in.row_vec(i))?;
    }
    if doc_vectors.data.iter().chain(&word_vectors.data).any(|x| !x.is_finite()) {
        return Err(AtemError::Format("embedding training diverged (non-finite values)".into()));
    }
    Ok(DocEmbeddings {
        dim,
        doc_vectors,
        word_vectors: Some(word_vectors),
        mean_filled,
    })
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub documents: usize,
    pub covered: usize,
    pub mean_filled: usize,
    pub unknown_ids_ignored: usize,
}

/// Align externally produced vectors to the corpus. Missing documents get
/// the mean of the covered ones.
pub fn align_doc_embeddings(table: &NamedVectors, corpus: &Corpus) -> Result<(DocEmbeddings, CoverageReport)> {
    let dim = table.dim;
    if dim == 0 || table.is_empty() {
        return Err(AtemError::Format("embedding file holds no vectors".into()));
    }
    let mut slot: Vec<Option<usize>> = vec![None; corpus.len()];
    let mut unknown = 0;
    for (row, id) in table.ids.iter().enumerate() {
        match corpus.idx(id) {
            Some(i) => slot[i] = Some(row),
            None => unknown += 1,
        }
    }
    let mean = linalg::mean(slot.iter().flatten().map(|&r| table.row(r)), dim)
        .ok_or_else(|| AtemError::Format("no embedding row matches a corpus document".into()))?;
    let mut doc_vectors = NamedVectors::new(dim);
    let mut mean_filled = Vec::new();
    for (i, doc) in corpus.documents().iter().enumerate() {
        match slot[i] {
            Some(r) => doc_vectors.push(doc.doc_id.clone(), table.row(r))?,
            None => {
                mean_filled.push(doc.doc_id.clone());
                doc_vectors.push(doc.doc_id.clone(), &mean)?;
            }
        }
    }
    if !mean_filled.is_empty() {
        warn!("{} documents missing from embedding file; mean-filled", mean_filled.len());
    }
    let report = CoverageReport {
        documents: corpus.len(),
        covered: corpus.len() - mean_filled.len(),
        mean_filled: mean_filled.len(),
        unknown_ids_ignored: unknown,
    };
    Ok((
        DocEmbeddings {
            dim,
            doc_vectors,
            word_vectors: None,
            mean_filled,
        },
        report,
    ))
}

pub fn load_doc_embeddings(path: &Path, corpus: &Corpus) -> Result<(DocEmbeddings, CoverageReport)> {
    let table = NamedVectors::load(path)?;
    align_doc_embeddings(&table, corpus)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Document;

    fn small_params(epochs: usize) -> EmbedParams {
        EmbedParams {
            dim: 16,
            epochs,
            min_token_count: 1,
            ..EmbedParams::default()
        }
    }

    fn two_cluster_corpus() -> Corpus {
        let a = ["alpha", "beta", "gamma", "delta", "epsilon", "zeta"];
        let b = ["red", "green", "blue", "cyan", "magenta", "yellow"];
        let mut docs = Vec::new();
        for i in 0..20 {
            let pick = |v: &[&str]| (0..8).map(|k| v[(i * 7 + k * 3) % v.len()]).collect::<Vec<_>>().join(" ");
            docs.push(Document::new(format!("a{i:02}"), pick(&a), "", 2000));
            docs.push(Document::new(format!("b{i:02}"), pick(&b), "", 2000));
        }
        Corpus::from_documents(docs).unwrap()
    }

    #[test]
    fn duplicates_end_up_nearly_parallel() {
        let text = "graph neural embedding of citation context across periods";
        let docs = vec![
            Document::new("x", text, "", 2000),
            Document::new("y", text, "", 2000),
            Document::new("z", "completely unrelated words about cooking pasta recipes", "", 2000),
        ];
        let mut c = Corpus::from_documents(docs).unwrap();
        let e = train_doc_embeddings(&mut c, &small_params(200)).unwrap();
        let sim = linalg::cosine(e.doc(0), e.doc(1)).unwrap();
        assert!(sim > 0.9, "cosine {sim}");
    }

    #[test]
    fn clusters_separate_and_norms_are_sane() {
        let mut c = two_cluster_corpus();
        let e = train_doc_embeddings(&mut c, &small_params(30)).unwrap();
        let (mut intra, mut ni, mut inter, mut nx) = (0.0, 0, 0.0, 0);
        for i in 0..c.len() {
            let n = linalg::norm(e.doc(i));
            assert!(n > 0.0 && n < 100.0);
            for j in (i + 1)..c.len() {
                let s = linalg::cosine(e.doc(i), e.doc(j)).unwrap();
                if c.doc(i).doc_id[..1] == c.doc(j).doc_id[..1] {
                    intra += s;
                    ni += 1;
                } else {
                    inter += s;
                    nx += 1;
                }
            }
        }
        assert!(intra / ni as f32 > inter / nx as f32);
    }

    #[test]
    fn deterministic_mode_is_bit_identical() {
        let mut c1 = two_cluster_corpus();
        let mut c2 = two_cluster_corpus();
        let a = train_doc_embeddings(&mut c1, &small_params(3)).unwrap();
        let b = train_doc_embeddings(&mut c2, &small_params(3)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn parallel_mode_produces_finite_vectors() {
        let mut c = two_cluster_corpus();
        let p = EmbedParams {
            execution: Execution::Parallel,
            ..small_params(3)
        };
        let e = train_doc_embeddings(&mut c, &p).unwrap();
        assert!(e.doc_vectors.data.iter().all(|x| x.is_finite()));
    }

    #[test]
    fn out_of_vocabulary_document_gets_mean() {
        let docs = vec![
            Document::new("a", "knn crf knn", "", 2000),
            Document::new("b", "crf knn crf", "", 2000),
            Document::new("c", "zzz", "", 2000),
        ];
        let mut c = Corpus::from_documents(docs).unwrap();
        let p = EmbedParams {
            min_token_count: 2,
            ..small_params(2)
        };
        let e = train_doc_embeddings(&mut c, &p).unwrap();
        assert_eq!(e.mean_filled, vec!["c".to_string()]);
        let mean = linalg::mean([e.doc(0), e.doc(1)], 16).unwrap();
        assert_eq!(e.doc(2), mean.as_slice());
    }

    #[test]
    fn empty_vocabulary_is_fatal() {
        let mut c = Corpus::from_documents(vec![Document::new("a", "one", "", 2000)]).unwrap();
        let err = train_doc_embeddings(&mut c, &EmbedParams::default()).unwrap_err();
        assert!(matches!(err, AtemError::EmptyVocabulary));
    }

    #[test]
    fn loading_reports_coverage() {
        let docs = (0..5).map(|i| Document::new(format!("d{i}"), "t", "", 2000)).collect();
        let c = Corpus::from_documents(docs).unwrap();
        let mut t = NamedVectors::new(4);
        for i in 0..5 {
            t.push(format!("d{i}"), &[i as f32, 1.0, 0.0, 0.0]).unwrap();
        }
        let (_, full) = align_doc_embeddings(&t, &c).unwrap();
        assert_eq!(full.covered, 5);

        let mut partial = NamedVectors::new(4);
        for i in 0..3 {
            partial.push(format!("d{i}"), &[i as f32, 1.0, 0.0, 0.0]).unwrap();
        }
        partial.push("ghost", &[9.0; 4]).unwrap();
        let (e, r) = align_doc_embeddings(&partial, &c).unwrap();
        assert_eq!((r.covered, r.mean_filled, r.unknown_ids_ignored), (3, 2, 1));
        assert_eq!(e.doc(4), &[1.0, 1.0, 0.0, 0.0]);
    }
}
