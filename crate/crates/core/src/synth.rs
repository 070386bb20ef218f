//! Synthetic corpora with planted topics, citation structure and emergence
//! events, plus scoring of detections against the planted events.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, DocIdx, Document};
use crate::emergence::NeighborEvent;
use crate::error::{AtemError, Result};
use crate::seed;
use crate::topics::EvolvingTopic;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventSpec {
    pub topic_a: usize,
    pub topic_b: usize,
    pub period: usize,
    /// Co-citation probability as a multiple of `intra_cite_prob`.
    pub co_cite_boost: f64,
    pub shared_docs_after: usize,
    /// Topics both members start citing; drawn from the seed when empty.
    #[serde(default)]
    pub co_cited: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSpec {
    pub n_topics: usize,
    pub docs_per_topic_per_period: usize,
    pub n_periods: usize,
    pub start_year: i32,
    pub vocab_per_topic: usize,
    pub background_vocab: usize,
    pub tokens_per_doc: usize,
    pub signature_share: f64,
    pub intra_cite_prob: f64,
    pub cross_cite_prob: f64,
    /// Each topic habitually cites this many other topics.
    pub affinity_topics: usize,
    pub affinity_cite_prob: f64,
    /// Size of the third-party set drawn for events without `co_cited`.
    pub co_cited_topics: usize,
    pub events: Vec<EventSpec>,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        let event = |a, b, k| EventSpec {
            topic_a: a,
            topic_b: b,
            period: k,
            co_cite_boost: 4.0,
            shared_docs_after: 6,
            co_cited: Vec::new(),
        };
        SynthSpec {
            n_topics: 12,
            docs_per_topic_per_period: 16,
            n_periods: 10,
            start_year: 2000,
            vocab_per_topic: 40,
            background_vocab: 200,
            tokens_per_doc: 30,
            signature_share: 0.8,
            intra_cite_prob: 0.05,
            cross_cite_prob: 0.0002,
            affinity_topics: 2,
            affinity_cite_prob: 0.002,
            co_cited_topics: 1,
            events: vec![event(0, 1, 3), event(2, 3, 4), event(4, 5, 5), event(6, 7, 6)],
            seed: 7,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(AtemError::InvalidParam(m));
        if self.n_topics == 0 || self.docs_per_topic_per_period == 0 || self.n_periods == 0 || self.tokens_per_doc == 0 {
            return bad("synthetic corpus would have no documents".into());
        }
        if self.vocab_per_topic == 0 {
            return bad("vocab_per_topic must be >= 1".into());
        }
        for (name, p) in [
            ("signature_share", self.signature_share),
            ("intra_cite_prob", self.intra_cite_prob),
            ("cross_cite_prob", self.cross_cite_prob),
            ("affinity_cite_prob", self.affinity_cite_prob),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} must lie in [0, 1]"));
            }
        }
        if self.background_vocab == 0 && self.signature_share < 1.0 {
            return bad("background_vocab is 0 but signature_share < 1".into());
        }
        for (i, e) in self.events.iter().enumerate() {
            if e.topic_a >= self.n_topics || e.topic_b >= self.n_topics || e.topic_a == e.topic_b {
                return bad(format!("event {i} needs two distinct valid topics"));
            }
            if e.period >= self.n_periods {
                return bad(format!("event {i} period {} is not < n_periods", e.period));
            }
            if !(e.co_cite_boost >= 0.0) {
                return bad(format!("event {i} co_cite_boost must be >= 0"));
            }
            if e.co_cited.iter().any(|&z| z >= self.n_topics || z == e.topic_a || z == e.topic_b) {
                return bad(format!("event {i} co_cited must name other valid topics"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedEvent {
    pub topic_a: usize,
    pub topic_b: usize,
    pub period: usize,
    pub co_cited: Vec<usize>,
    pub shared_docs: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub n_topics: usize,
    /// Planted topics of every document (two for mixed documents).
    pub doc_topics: BTreeMap<String, Vec<usize>>,
    pub affinity: Vec<Vec<usize>>,
    pub events: Vec<PlantedEvent>,
}

impl GroundTruth {
    pub fn topic_docs(&self) -> Vec<BTreeSet<String>> {
        let mut out = vec![BTreeSet::new(); self.n_topics];
        for (d, ts) in &self.doc_topics {
            for &t in ts {
                out[t].insert(d.clone());
            }
        }
        out
    }
}

pub fn signature_token(topic: usize, j: usize) -> String {
    format!("s{topic}x{j}")
}

fn background_token(j: usize) -> String {
    format!("bg{j}")
}

struct Draft {
    id: String,
    topics: Vec<usize>,
    period: usize,
}

fn tokens(spec: &SynthSpec, topics: &[usize], rng: &mut ChaCha8Rng) -> Vec<String> {
    (0..spec.tokens_per_doc)
        .map(|i| {
            if rng.gen_bool(spec.signature_share) {
                let t = topics[i % topics.len()];
                signature_token(t, rng.gen_range(0..spec.vocab_per_topic))
            } else {
                background_token(rng.gen_range(0..spec.background_vocab))
            }
        })
        .collect()
}

/// Generate a corpus. Deterministic for a fixed spec.
pub fn generate_corpus(spec: &SynthSpec) -> Result<(Corpus, GroundTruth)> {
    spec.validate()?;
    let mut rng = seed::rng_for(spec.seed, &[0x5717]);
    let others = |t: usize| (0..spec.n_topics).filter(move |&u| u != t);

    let affinity: Vec<Vec<usize>> = (0..spec.n_topics)
        .map(|t| {
            let mut pool: Vec<usize> = others(t).collect();
            pool.shuffle(&mut rng);
            pool.truncate(spec.affinity_topics);
            pool.sort_unstable();
            pool
        })
        .collect();
    // Third-party sets prefer topics outside every event and not yet used by
    // an earlier event.
    let in_events: BTreeSet<usize> = spec.events.iter().flat_map(|e| [e.topic_a, e.topic_b]).collect();
    let mut used: BTreeSet<usize> = BTreeSet::new();
    let mut co_cited: Vec<Vec<usize>> = Vec::with_capacity(spec.events.len());
    for e in &spec.events {
        if !e.co_cited.is_empty() {
            let mut v = e.co_cited.clone();
            v.sort_unstable();
            v.dedup();
            co_cited.push(v);
            continue;
        }
        let mut pick = Vec::new();
        let tiers: [&dyn Fn(usize) -> bool; 3] = [
            &|z| !in_events.contains(&z) && !used.contains(&z),
            &|z| !in_events.contains(&z),
            &|_| true,
        ];
        for tier in tiers {
            let mut pool: Vec<usize> = others(e.topic_a)
                .filter(|&z| z != e.topic_b && tier(z) && !pick.contains(&z))
                .collect();
            pool.shuffle(&mut rng);
            pick.extend(pool.into_iter().take(spec.co_cited_topics - pick.len()));
            if pick.len() == spec.co_cited_topics {
                break;
            }
        }
        pick.sort_unstable();
        used.extend(pick.iter().copied());
        co_cited.push(pick);
    }

    // Generation order: period, then topic, then ordinary before mixed docs.
    let mut drafts: Vec<Draft> = Vec::new();
    let mut texts: Vec<Vec<String>> = Vec::new();
    let mut shared: Vec<Vec<String>> = vec![Vec::new(); spec.events.len()];
    for p in 0..spec.n_periods {
        for t in 0..spec.n_topics {
            for g in 0..spec.docs_per_topic_per_period {
                drafts.push(Draft {
                    id: format!("p{p:02}-t{t:03}-{g:04}"),
                    topics: vec![t],
                    period: p,
                });
                texts.push(tokens(spec, &[t], &mut rng));
            }
        }
        for (ei, e) in spec.events.iter().enumerate() {
            if p < e.period {
                continue;
            }
            let span = spec.n_periods - e.period;
            let here = (0..e.shared_docs_after).filter(|j| e.period + j % span == p);
            for j in here {
                let id = format!("p{p:02}-m{ei:03}-{j:04}");
                drafts.push(Draft {
                    id: id.clone(),
                    topics: vec![e.topic_a, e.topic_b],
                    period: p,
                });
                texts.push(tokens(spec, &[e.topic_a, e.topic_b], &mut rng));
                shared[ei].push(id);
            }
        }
    }

    // Citations only point backwards in generation order, so never to a
    // later period.
    let mut by_topic: Vec<Vec<usize>> = vec![Vec::new(); spec.n_topics];
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    for (i, d) in drafts.iter().enumerate() {
        let mut probs = vec![spec.cross_cite_prob; spec.n_topics];
        for &t in &d.topics {
            for &z in &affinity[t] {
                probs[z] = probs[z].max(spec.affinity_cite_prob);
            }
        }
        for (ei, e) in spec.events.iter().enumerate() {
            if d.period >= e.period && (d.topics.contains(&e.topic_a) || d.topics.contains(&e.topic_b)) {
                let p = (spec.intra_cite_prob * e.co_cite_boost).min(1.0);
                for &z in &co_cited[ei] {
                    probs[z] = probs[z].max(p);
                }
            }
        }
        for &t in &d.topics {
            probs[t] = spec.intra_cite_prob;
        }
        for (z, docs) in by_topic.iter().enumerate() {
            if probs[z] <= 0.0 {
                continue;
            }
            for &j in docs {
                if rng.gen_bool(probs[z]) {
                    pairs.push((i, j));
                }
            }
        }
        for &t in &d.topics {
            by_topic[t].push(i);
        }
    }
    pairs.sort_unstable();
    pairs.dedup();

    let docs: Vec<Document> = drafts
        .iter()
        .zip(&texts)
        .map(|(d, toks)| {
            let split = toks.len().min(6);
            Document::new(
                d.id.clone(),
                toks[..split].join(" "),
                toks[split..].join(" "),
                spec.start_year + d.period as i32,
            )
        })
        .collect();
    let mut corpus = Corpus::from_documents(docs)?;
    corpus.set_citations(pairs.iter().map(|&(a, b)| (drafts[a].id.as_str(), drafts[b].id.as_str())))?;

    let truth = GroundTruth {
        n_topics: spec.n_topics,
        doc_topics: drafts.iter().map(|d| (d.id.clone(), d.topics.clone())).collect(),
        affinity,
        events: spec
            .events
            .iter()
            .zip(co_cited)
            .zip(shared)
            .map(|((e, co_cited), shared_docs)| PlantedEvent {
                topic_a: e.topic_a,
                topic_b: e.topic_b,
                period: e.period,
                co_cited,
                shared_docs,
            })
            .collect(),
    };
    Ok((corpus, truth))
}

/// Greedy one-to-one matching of planted topics to detected topics by
/// Jaccard overlap of their document sets; pairs below `min_overlap` stay
/// unmatched.
pub fn match_topics(truth: &GroundTruth, corpus: &Corpus, topics: &[EvolvingTopic], min_overlap: f64) -> Vec<Option<usize>> {
    let planted: Vec<BTreeSet<DocIdx>> = truth
        .topic_docs()
        .iter()
        .map(|s| s.iter().filter_map(|d| corpus.idx(d)).collect())
        .collect();
    let found: Vec<BTreeSet<DocIdx>> = topics
        .iter()
        .map(|t| t.per_period_docs.iter().flatten().copied().collect())
        .collect();
    let mut cand: Vec<(f64, usize, usize)> = Vec::new();
    for (i, p) in planted.iter().enumerate() {
        for (j, f) in found.iter().enumerate() {
            let inter = p.intersection(f).count();
            let union = p.len() + f.len() - inter;
            if union > 0 {
                let jac = inter as f64 / union as f64;
                if jac >= min_overlap {
                    cand.push((jac, i, j));
                }
            }
        }
    }
    cand.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut out = vec![None; planted.len()];
    let mut used = BTreeSet::new();
    for (_, i, j) in cand {
        if out[i].is_none() && !used.contains(&j) {
            out[i] = Some(j);
            used.insert(j);
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventOutcome {
    pub topic_a: usize,
    pub topic_b: usize,
    pub period: usize,
    pub matched: [Option<usize>; 2],
    /// Earliest period at which either member had the other in its top-k
    /// new-neighbour set.
    pub detected_period: Option<usize>,
    pub found: bool,
    /// Detected before the planted period.
    pub early: bool,
    pub lag: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthMetrics {
    pub events: usize,
    pub found: usize,
    pub recall: f64,
    pub mean_lag: Option<f64>,
    /// Found events detected before their planted period.
    pub early: usize,
    /// Recall a non-event pair of matched topics would score under the same
    /// rule, averaged over the planted periods. `None` without such pairs.
    pub chance_recall: Option<f64>,
    pub outcomes: Vec<EventOutcome>,
}

/// Recall of planted events among new-neighbour detections. An event counts
/// when the matched partner appears in the top-`top_k` new neighbours of
/// either member at a period `<= k + 1`; its lag is `max(0, detected - k)`.
pub fn ground_truth_eval(detected: &[NeighborEvent], truth: &GroundTruth, matching: &[Option<usize>], top_k: usize) -> TruthMetrics {
    let mut ranked: BTreeMap<(usize, usize), Vec<&NeighborEvent>> = BTreeMap::new();
    for e in detected {
        ranked.entry((e.t, e.period)).or_default().push(e);
    }
    let mut kept: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for list in ranked.values_mut() {
        list.sort_by(|a, b| a.distance.total_cmp(&b.distance).then(a.tx.cmp(&b.tx)));
        for e in list.iter().take(top_k) {
            let slot = kept.entry((e.t.min(e.tx), e.t.max(e.tx))).or_insert(e.period);
            *slot = (*slot).min(e.period);
        }
    }
    let outcomes: Vec<EventOutcome> = truth
        .events
        .iter()
        .map(|ev| {
            let matched = [
                matching.get(ev.topic_a).copied().flatten(),
                matching.get(ev.topic_b).copied().flatten(),
            ];
            let detected_period = match matched {
                [Some(a), Some(b)] => kept.get(&(a.min(b), a.max(b))).copied(),
                _ => None,
            };
            let found = detected_period.is_some_and(|p| p <= ev.period + 1);
            EventOutcome {
                topic_a: ev.topic_a,
                topic_b: ev.topic_b,
                period: ev.period,
                matched,
                detected_period,
                found,
                early: found && detected_period.is_some_and(|p| p < ev.period),
                lag: detected_period.filter(|_| found).map(|p| p.saturating_sub(ev.period)),
            }
        })
        .collect();
    let found = outcomes.iter().filter(|o| o.found).count();
    let lags: Vec<f64> = outcomes.iter().filter_map(|o| o.lag).map(|l| l as f64).collect();
    let planted: BTreeSet<(usize, usize)> = outcomes
        .iter()
        .filter_map(|o| match o.matched {
            [Some(a), Some(b)] => Some((a.min(b), a.max(b))),
            _ => None,
        })
        .collect();
    let mut nodes: Vec<usize> = matching.iter().flatten().copied().collect();
    nodes.sort_unstable();
    nodes.dedup();
    let mut hits = 0usize;
    let mut trials = 0usize;
    for (i, &a) in nodes.iter().enumerate() {
        for &b in &nodes[i + 1..] {
            if planted.contains(&(a, b)) {
                continue;
            }
            for ev in &truth.events {
                trials += 1;
                hits += usize::from(kept.get(&(a, b)).is_some_and(|&p| p <= ev.period + 1));
            }
        }
    }
    TruthMetrics {
        events: outcomes.len(),
        found,
        recall: if outcomes.is_empty() { 0.0 } else { found as f64 / outcomes.len() as f64 },
        mean_lag: crate::evaluation::mean(&lags),
        early: outcomes.iter().filter(|o| o.early).count(),
        chance_recall: (trials > 0).then(|| hits as f64 / trials as f64),
        outcomes,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{write_citations_csv, write_documents_jsonl};
    use crate::text::tokenize;

    fn small(events: Vec<EventSpec>) -> SynthSpec {
        SynthSpec {
            n_topics: 5,
            docs_per_topic_per_period: 6,
            n_periods: 8,
            events,
            ..SynthSpec::default()
        }
    }

    fn ev(a: usize, b: usize, k: usize, shared: usize) -> EventSpec {
        EventSpec {
            topic_a: a,
            topic_b: b,
            period: k,
            co_cite_boost: 1.0,
            shared_docs_after: shared,
            co_cited: Vec::new(),
        }
    }

    fn signature_topics(doc: &Document) -> BTreeSet<usize> {
        tokenize(&doc.text())
            .iter()
            .filter_map(|t| t.strip_prefix('s').and_then(|r| r.split_once('x')).and_then(|(a, _)| a.parse().ok()))
            .collect()
    }

    #[test]
    fn without_events_topics_share_no_signature_tokens() {
        let (c, _) = generate_corpus(&small(vec![])).unwrap();
        assert!(c.documents().iter().all(|d| signature_topics(d).len() <= 1));
    }

    #[test]
    fn shared_docs_are_mixed_and_not_early() {
        let spec = small(vec![ev(0, 1, 5, 6)]);
        let (c, truth) = generate_corpus(&spec).unwrap();
        let ids = &truth.events[0].shared_docs;
        assert_eq!(ids.len(), 6);
        for id in ids {
            let d = c.doc(c.idx(id).unwrap());
            assert!(d.year >= spec.start_year + 5);
            assert_eq!(signature_topics(d), BTreeSet::from([0, 1]));
            assert_eq!(truth.doc_topics[id], vec![0, 1]);
        }
        let mixed = c.documents().iter().filter(|d| signature_topics(d).len() > 1).count();
        assert_eq!(mixed, 6);
    }

    #[test]
    fn fixed_seed_gives_identical_bytes() {
        let spec = small(vec![ev(0, 1, 3, 4)]);
        let (a, ta) = generate_corpus(&spec).unwrap();
        let (b, tb) = generate_corpus(&spec).unwrap();
        assert_eq!(write_documents_jsonl(&a).unwrap(), write_documents_jsonl(&b).unwrap());
        assert_eq!(write_citations_csv(&a).unwrap(), write_citations_csv(&b).unwrap());
        assert_eq!(ta, tb);
        let (c, _) = generate_corpus(&SynthSpec { seed: 8, ..spec }).unwrap();
        assert_ne!(write_citations_csv(&a).unwrap(), write_citations_csv(&c).unwrap());
    }

    #[test]
    fn citations_never_point_forward() {
        for s in 0..5 {
            let (c, _) = generate_corpus(&SynthSpec { seed: s, ..small(vec![ev(1, 2, 2, 3)]) }).unwrap();
            assert!(!c.citations.is_empty());
            for e in &c.citations {
                assert!(c.doc(e.dst).year <= c.doc(e.src).year);
            }
        }
    }

    #[test]
    fn the_event_pair_alone_shares_cited_topics() {
        let spec = SynthSpec {
            cross_cite_prob: 0.0,
            affinity_cite_prob: 0.0,
            ..small(vec![ev(0, 3, 2, 0)])
        };
        let (c, truth) = generate_corpus(&spec).unwrap();
        let topic_of = |i: DocIdx| truth.doc_topics[&c.doc(i).doc_id][0];
        let mut cited: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); spec.n_topics];
        for e in &c.citations {
            let (s, d) = (topic_of(e.src), topic_of(e.dst));
            if s != d {
                cited[s].insert(d);
            }
        }
        let mut sharing = Vec::new();
        for u in 0..spec.n_topics {
            for v in u + 1..spec.n_topics {
                let common = cited[u].intersection(&cited[v]).filter(|z| **z != u && **z != v).count();
                if common > 0 {
                    sharing.push((u, v));
                }
            }
        }
        assert_eq!(sharing, vec![(0, 3)]);
        assert_eq!(cited[0], truth.events[0].co_cited.iter().copied().collect());
    }

    #[test]
    fn invalid_specs_are_rejected() {
        assert!(generate_corpus(&SynthSpec { docs_per_topic_per_period: 0, ..small(vec![]) }).is_err());
        assert!(generate_corpus(&small(vec![ev(0, 9, 1, 1)])).is_err());
        assert!(generate_corpus(&small(vec![ev(0, 1, 8, 1)])).is_err());
        assert!(generate_corpus(&SynthSpec { intra_cite_prob: 1.5, ..small(vec![]) }).is_err());
    }

    fn truth_with(events: &[(usize, usize, usize)]) -> GroundTruth {
        GroundTruth {
            n_topics: 6,
            doc_topics: BTreeMap::new(),
            affinity: vec![],
            events: events
                .iter()
                .map(|&(a, b, k)| PlantedEvent {
                    topic_a: a,
                    topic_b: b,
                    period: k,
                    co_cited: vec![],
                    shared_docs: vec![],
                })
                .collect(),
        }
    }

    fn det(t: usize, tx: usize, period: usize) -> NeighborEvent {
        NeighborEvent { t, tx, period, distance: 0.1 }
    }

    #[test]
    fn truth_eval_examples() {
        let truth = truth_with(&[(0, 1, 3), (2, 3, 4)]);
        let identity: Vec<Option<usize>> = (0..6).map(Some).collect();
        let exact = ground_truth_eval(&[det(0, 1, 3), det(3, 2, 4)], &truth, &identity, 10);
        assert_eq!((exact.recall, exact.mean_lag), (1.0, Some(0.0)));
        let none = ground_truth_eval(&[], &truth, &identity, 10);
        assert_eq!((none.recall, none.mean_lag), (0.0, None));
        let late = ground_truth_eval(&[det(0, 1, 4)], &truth, &identity, 10);
        assert_eq!(late.outcomes[0].lag, Some(1));
        assert_eq!(late.recall, 0.5);
        let too_late = ground_truth_eval(&[det(0, 1, 5)], &truth, &identity, 10);
        assert_eq!(too_late.recall, 0.0);
        let unmatched = ground_truth_eval(&[det(0, 1, 3)], &truth, &[Some(0), None], 10);
        assert_eq!(unmatched.recall, 0.0);
        let crowded = ground_truth_eval(
            &[NeighborEvent { t: 0, tx: 5, period: 3, distance: 0.01 }, det(0, 1, 3)],
            &truth,
            &identity,
            1,
        );
        assert!(!crowded.outcomes[0].found);
        let early = ground_truth_eval(&[det(1, 0, 1)], &truth, &identity, 10);
        assert!(early.outcomes[0].early && early.outcomes[0].found);
        assert_eq!(early.early, 1);
    }

    #[test]
    fn chance_recall_counts_non_event_pairs() {
        let truth = truth_with(&[(0, 1, 3), (2, 3, 4)]);
        let m: Vec<Option<usize>> = (0..4).map(Some).collect();
        // Non-event pairs among 4 matched topics: 6 - 2 = 4, times 2 periods.
        let r = ground_truth_eval(&[det(0, 1, 3), det(0, 2, 4), det(1, 3, 9)], &truth, &m, 10);
        // (0,2) at 4 passes k=3 (4 <= 4) and k=4; (1,3) at 9 passes neither.
        assert_eq!(r.chance_recall, Some(2.0 / 8.0));
        assert_eq!(ground_truth_eval(&[], &truth, &[Some(0), Some(1)], 10).chance_recall, None);
    }

    #[test]
    fn matching_recovers_planted_topics() {
        let spec = small(vec![ev(0, 1, 3, 4)]);
        let (c, truth) = generate_corpus(&spec).unwrap();
        let docs = truth.topic_docs();
        let topics: Vec<EvolvingTopic> = (0..spec.n_topics)
            .rev()
            .map(|t| EvolvingTopic {
                topic_id: format!("x{t}"),
                per_period_docs: vec![docs[t].iter().filter(|d| !d.contains("-m")).map(|d| c.idx(d).unwrap()).collect()],
                per_period_rep: vec![None],
            })
            .collect();
        let m = match_topics(&truth, &c, &topics, 0.5);
        assert_eq!(m, (0..spec.n_topics).rev().map(Some).collect::<Vec<_>>());
        assert_eq!(match_topics(&truth, &c, &topics[..1], 0.5).iter().flatten().count(), 1);
    }
}
