//! Evolving topics: per-period document buckets and term representations.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::cluster::TopicSet;
use crate::corpus::{Corpus, DocIdx};
use crate::docembed::DocEmbeddings;
use crate::error::{AtemError, Result};
use crate::linalg;
use crate::text::tokenize;

/// Top-weighted terms, sorted by weight descending then token ascending.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermVector {
    pub entries: Vec<(String, f64)>,
    pub top_n: usize,
}

impl TermVector {
    /// Keep the `top_n` heaviest entries (ties broken lexicographically).
    pub fn top(mut entries: Vec<(String, f64)>, top_n: usize) -> Self {
        entries.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        entries.truncate(top_n);
        TermVector { entries, top_n }
    }

    pub fn weight(&self, token: &str) -> Option<f64> {
        self.entries.iter().find(|(t, _)| t == token).map(|(_, w)| *w)
    }

    pub fn tokens(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(t, _)| t.as_str())
    }

    /// Union of two vectors keeping the larger weight on collisions.
    pub fn union_max(&self, other: &TermVector) -> TermVector {
        let mut m: BTreeMap<&str, f64> = BTreeMap::new();
        for (t, w) in self.entries.iter().chain(&other.entries) {
            let e = m.entry(t.as_str()).or_insert(*w);
            *e = e.max(*w);
        }
        let entries: Vec<(String, f64)> = m.into_iter().map(|(t, w)| (t.to_string(), w)).collect();
        let n = entries.len();
        TermVector::top(entries, n)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RepKind {
    Ctfidf,
    NearestWords,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolvingTopic {
    pub topic_id: String,
    /// Sorted document indices per period; empty where the sub-cluster was dropped.
    pub per_period_docs: Vec<Vec<DocIdx>>,
    /// Defined exactly where the period's documents are non-empty.
    pub per_period_rep: Vec<Option<TermVector>>,
}

impl EvolvingTopic {
    pub fn periods(&self) -> usize {
        self.per_period_docs.len()
    }

    pub fn active_periods(&self) -> impl Iterator<Item = usize> + '_ {
        self.per_period_docs
            .iter()
            .enumerate()
            .filter(|(_, d)| !d.is_empty())
            .map(|(i, _)| i)
    }

    /// Terms summed over all periods, keeping the `top_n` heaviest.
    pub fn profile(&self, top_n: usize) -> TermVector {
        let mut m: BTreeMap<&str, f64> = BTreeMap::new();
        for rep in self.per_period_rep.iter().flatten() {
            for (t, w) in &rep.entries {
                *m.entry(t.as_str()).or_insert(0.0) += w;
            }
        }
        TermVector::top(m.into_iter().map(|(t, w)| (t.to_string(), w)).collect(), top_n)
    }
}

/// Bucket each topic's documents by period; buckets smaller than `min_docs`
/// are emptied and topics left with no bucket are dropped.
pub fn slice_topics(topic_set: &TopicSet, corpus: &Corpus, min_docs: usize) -> Vec<EvolvingTopic> {
    let n = corpus.timeline.len();
    topic_set
        .topics
        .iter()
        .filter_map(|t| {
            let mut buckets = vec![Vec::new(); n];
            for &d in &t.docs {
                for p in corpus.timeline.periods_of(corpus.doc(d).year) {
                    buckets[p].push(d);
                }
            }
            for b in buckets.iter_mut() {
                if b.len() < min_docs {
                    b.clear();
                }
                b.sort_unstable();
            }
            if buckets.iter().all(Vec::is_empty) {
                return None;
            }
            Some(EvolvingTopic {
                topic_id: t.topic_id.clone(),
                per_period_rep: vec![None; n],
                per_period_docs: buckets,
            })
        })
        .collect()
}

fn doc_tokens(corpus: &Corpus, d: DocIdx) -> Vec<String> {
    let text = corpus.doc(d).text();
    if corpus.vocabulary.is_empty() {
        tokenize(&text)
    } else {
        tokenize(&text)
            .into_iter()
            .filter(|t| corpus.vocabulary.id(t).is_some())
            .collect()
    }
}

/// Class-based TF-IDF over every (topic, period) group:
/// `w(t, g) = tf(t, g) * ln(1 + A / f(t))`, with `f(t)` the count of `t`
/// over all groups and `A` the mean number of tokens per group.
pub fn represent_ctfidf(topics: &mut [EvolvingTopic], corpus: &Corpus, top_n: usize) {
    let mut groups: Vec<(usize, usize, BTreeMap<String, u64>)> = Vec::new();
    for (ti, t) in topics.iter().enumerate() {
        for (p, docs) in t.per_period_docs.iter().enumerate() {
            if docs.is_empty() {
                continue;
            }
            let mut tf = BTreeMap::new();
            for &d in docs {
                for tok in doc_tokens(corpus, d) {
                    *tf.entry(tok).or_insert(0u64) += 1;
                }
            }
            groups.push((ti, p, tf));
        }
    }
    let weights = ctfidf_weights(groups.iter().map(|g| &g.2));
    for ((ti, p, _), w) in groups.iter().zip(weights) {
        topics[*ti].per_period_rep[*p] = Some(TermVector::top(w, top_n));
    }
}

/// c-TF-IDF weights for each group's tokens.
pub fn ctfidf_weights<'a>(groups: impl IntoIterator<Item = &'a BTreeMap<String, u64>> + Clone) -> Vec<Vec<(String, f64)>> {
    let mut freq: BTreeMap<&str, u64> = BTreeMap::new();
    let mut total = 0u64;
    let mut n_groups = 0usize;
    for g in groups.clone() {
        n_groups += 1;
        for (t, c) in g {
            *freq.entry(t.as_str()).or_insert(0) += c;
            total += c;
        }
    }
    let avg = if n_groups == 0 { 0.0 } else { total as f64 / n_groups as f64 };
    groups
        .into_iter()
        .map(|g| {
            g.iter()
                .map(|(t, &c)| {
                    let f = freq[t.as_str()] as f64;
                    (t.clone(), c as f64 * (1.0 + avg / f).ln())
                })
                .collect()
        })
        .collect()
}

/// Nearest words to each sub-cluster centroid, weighted by cosine similarity.
pub fn represent_nearest_words(topics: &mut [EvolvingTopic], embeddings: &DocEmbeddings, top_n: usize) -> Result<()> {
    let words = embeddings.word_vectors.as_ref().ok_or(AtemError::MissingWordVectors)?;
    if words.is_empty() {
        return Err(AtemError::MissingWordVectors);
    }
    for t in topics.iter_mut() {
        for p in 0..t.per_period_docs.len() {
            let docs = &t.per_period_docs[p];
            let Some(centroid) = linalg::mean(docs.iter().map(|&d| embeddings.doc(d)), embeddings.dim) else {
                continue;
            };
            let scored: Vec<(String, f64)> = words
                .iter()
                .filter_map(|(tok, v)| linalg::cosine(&centroid, v).map(|s| (tok.to_string(), f64::from(s))))
                .collect();
            t.per_period_rep[p] = Some(TermVector::top(scored, top_n));
        }
    }
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct TopicLine {
    topic_id: String,
    period: usize,
    doc_ids: Vec<String>,
    rep: Vec<(String, f64)>,
    rep_kind: RepKind,
}

/// One line per non-empty (topic, period).
pub fn to_jsonl(topics: &[EvolvingTopic], corpus: &Corpus, kind: RepKind) -> Result<String> {
    let mut out = String::new();
    for t in topics {
        for p in t.active_periods() {
            let line = TopicLine {
                topic_id: t.topic_id.clone(),
                period: p,
                doc_ids: t.per_period_docs[p].iter().map(|&d| corpus.doc(d).doc_id.clone()).collect(),
                rep: t.per_period_rep[p].as_ref().map(|r| r.entries.clone()).unwrap_or_default(),
                rep_kind: kind,
            };
            out.push_str(&serde_json::to_string(&line)?);
            out.push('\n');
        }
    }
    Ok(out)
}

pub fn from_jsonl(text: &str, corpus: &Corpus, top_n: usize) -> Result<Vec<EvolvingTopic>> {
    let n = corpus.timeline.len();
    let mut map: BTreeMap<String, EvolvingTopic> = BTreeMap::new();
    let mut order: Vec<String> = Vec::new();
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        let l: TopicLine = serde_json::from_str(line)?;
        if l.period >= n {
            return Err(AtemError::Format(format!("topic {} has period {} beyond timeline", l.topic_id, l.period)));
        }
        let t = map.entry(l.topic_id.clone()).or_insert_with(|| {
            order.push(l.topic_id.clone());
            EvolvingTopic {
                topic_id: l.topic_id.clone(),
                per_period_docs: vec![Vec::new(); n],
                per_period_rep: vec![None; n],
            }
        });
        let mut docs = Vec::with_capacity(l.doc_ids.len());
        for id in &l.doc_ids {
            docs.push(corpus.idx(id).ok_or_else(|| AtemError::Format(format!("unknown doc {id:?}")))?);
        }
        docs.sort_unstable();
        t.per_period_docs[l.period] = docs;
        t.per_period_rep[l.period] = Some(TermVector {
            entries: l.rep,
            top_n,
        });
    }
    Ok(order.into_iter().map(|id| map.remove(&id).unwrap()).collect())
}
