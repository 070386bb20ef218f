//! Emergence predictability and the neighbour-vs-connected protocol.

use std::collections::{BTreeMap, BTreeSet};

use log::warn;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::dynembed::{embedding_distance, TopicEmbeddingSeries};
use crate::emergence::{detect_new_neighbors, form_emerging_pair, DetectionParams, DocSets};
use crate::error::{AtemError, Result};
use crate::par::{self, Execution};
use crate::seed;
use crate::tcgraph::TopicCitationGraph;
use crate::topics::EvolvingTopic;

/// `(future - past) / (future + past)`, undefined when both are zero.
pub fn predictability(past: u64, future: u64) -> Option<f64> {
    let total = past + future;
    (total > 0).then(|| (future as f64 - past as f64) / total as f64)
}

/// `(e + 1) / (1 - e)`: how many future documents per past document.
pub fn future_past_ratio(e: f64) -> f64 {
    if e >= 1.0 {
        f64::INFINITY
    } else {
        (e + 1.0) / (1.0 - e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PairSource {
    N,
    C,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub pair_src: String,
    pub pair_dst: String,
    pub source: PairSource,
    pub period: usize,
    pub distance: Option<f64>,
    pub past: u64,
    pub future: u64,
    pub emergence: Option<f64>,
}

impl ReportRow {
    fn key(&self) -> (&str, &str, PairSource, usize) {
        (&self.pair_src, &self.pair_dst, self.source, self.period)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProtocolParams {
    pub sample_size: usize,
    pub k: usize,
    pub max_path_len: usize,
    pub bootstrap_iterations: usize,
    pub confidence: f64,
    pub seed: u64,
    pub execution: Execution,
}

impl Default for ProtocolParams {
    fn default() -> Self {
        ProtocolParams {
            sample_size: 200,
            k: 10,
            max_path_len: 3,
            bootstrap_iterations: 2000,
            confidence: 0.9,
            seed: 42,
            execution: Execution::Deterministic,
        }
    }
}

impl ProtocolParams {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.sample_size == 0 {
            return Err(AtemError::InvalidParam("eval k and sample_size must be >= 1".into()));
        }
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return Err(AtemError::InvalidParam("confidence must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

/// Upstream artifacts the protocol reads.
pub struct ProtocolInputs<'a> {
    pub corpus: &'a Corpus,
    pub topics: &'a [EvolvingTopic],
    pub graph: &'a TopicCitationGraph,
    pub series: &'a TopicEmbeddingSeries,
    pub docs: &'a DocSets,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PeriodCounts {
    pub period: usize,
    pub n: usize,
    pub c: usize,
    pub cn: usize,
}

/// Topics sampled for the protocol, sorted.
pub fn sample_topics(count: usize, sample_size: usize, seed_value: u64) -> Vec<usize> {
    let mut all: Vec<usize> = (0..count).collect();
    if sample_size >= count {
        if sample_size > count {
            warn!("sample size {sample_size} exceeds {count} topics; using all");
        }
        return all;
    }
    all.shuffle(&mut seed::rng_for(seed_value, &[0x5A3]));
    all.truncate(sample_size);
    all.sort_unstable();
    all
}

pub fn protocol_rows(
    inputs: &ProtocolInputs<'_>,
    params: &ProtocolParams,
    detection: &DetectionParams,
) -> Result<(Vec<ReportRow>, Vec<PeriodCounts>)> {
    params.validate()?;
    let n_topics = inputs.series.nodes.len();
    if inputs.topics.len() != n_topics || inputs.graph.nodes.len() != n_topics {
        return Err(AtemError::Format("topics, graph and embeddings disagree on the topic list".into()));
    }
    let sampled = sample_topics(n_topics, params.sample_size, params.seed);
    let periods = inputs.series.periods();
    let det = DetectionParams { k: params.k, ..detection.clone() };
    let series = inputs.series;
    let per_topic = par::map(params.execution, &sampled, |&t| -> Result<(Vec<ReportRow>, Vec<PeriodCounts>)> {
        let mut rows = Vec::new();
        let mut counts = Vec::with_capacity(periods);
        for i in 0..periods {
            let n_set: Vec<(usize, f64)> = detect_new_neighbors(series, t, i, &det).hits;
            let c_set = inputs.graph.connected_pairs(t, i, params.max_path_len, params.k, params.seed);
            let n_ids: BTreeSet<usize> = n_set.iter().map(|h| h.0).collect();
            counts.push(PeriodCounts {
                period: i,
                n: n_set.len(),
                c: c_set.len(),
                cn: c_set.iter().filter(|u| n_ids.contains(u)).count(),
            });
            let candidates = n_set
                .iter()
                .map(|&(u, d)| (PairSource::N, u, Some(d)))
                .chain(c_set.iter().map(|&u| {
                    let d = match (series.vector(t, i), series.vector(u, i)) {
                        (Some(a), Some(b)) => embedding_distance(a, b).ok(),
                        _ => None,
                    };
                    (PairSource::C, u, d)
                }));
            for (source, u, distance) in candidates {
                let e = form_emerging_pair(t, u, i, inputs.topics, inputs.corpus, inputs.docs)?;
                rows.push(ReportRow {
                    pair_src: inputs.topics[t].topic_id.clone(),
                    pair_dst: inputs.topics[u].topic_id.clone(),
                    source,
                    period: i,
                    distance,
                    past: e.past.len() as u64,
                    future: e.future.len() as u64,
                    emergence: e.emergence(),
                });
            }
        }
        Ok((rows, counts))
    });
    let mut rows = Vec::new();
    let mut counts = vec![PeriodCounts::default(); periods];
    for (i, c) in counts.iter_mut().enumerate() {
        c.period = i;
    }
    for r in per_topic {
        let (rs, cs) = r?;
        rows.extend(rs);
        for c in cs {
            counts[c.period].n += c.n;
            counts[c.period].c += c.c;
            counts[c.period].cn += c.cn;
        }
    }
    Ok((rows, counts))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceSummary {
    pub rows: usize,
    pub defined: usize,
    pub mean: Option<f64>,
    pub quartiles: Option<[f64; 3]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct YearSummary {
    pub period: usize,
    pub year: Option<i32>,
    pub mean_n: Option<f64>,
    pub mean_c: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DifferenceCi {
    pub difference: f64,
    pub low: f64,
    pub high: f64,
    pub confidence: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    pub n: SourceSummary,
    pub c: SourceSummary,
    pub by_period: Vec<YearSummary>,
    pub counts: Vec<PeriodCounts>,
    pub difference: Option<DifferenceCi>,
    pub correlation_labels: Vec<String>,
    pub correlations: Vec<Vec<Option<f64>>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationReport {
    pub rows: Vec<ReportRow>,
    pub aggregates: Aggregates,
}

pub fn run_protocol(inputs: &ProtocolInputs<'_>, params: &ProtocolParams, detection: &DetectionParams) -> Result<EvaluationReport> {
    let (rows, counts) = protocol_rows(inputs, params, detection)?;
    let years: Vec<Option<i32>> = (0..inputs.series.periods())
        .map(|i| inputs.corpus.timeline.periods.get(i).map(|p| p.start_year))
        .collect();
    Ok(aggregate(rows, counts, &years, params))
}

/// Summaries over `rows`; the result does not depend on row order.
pub fn aggregate(mut rows: Vec<ReportRow>, counts: Vec<PeriodCounts>, years: &[Option<i32>], params: &ProtocolParams) -> EvaluationReport {
    rows.sort_by(|a, b| a.key().cmp(&b.key()));
    let values = |src: PairSource| -> Vec<f64> {
        rows.iter().filter(|r| r.source == src).filter_map(|r| r.emergence).collect()
    };
    let (vn, vc) = (values(PairSource::N), values(PairSource::C));
    let summary = |src: PairSource, v: &[f64]| SourceSummary {
        rows: rows.iter().filter(|r| r.source == src).count(),
        defined: v.len(),
        mean: mean(v),
        quartiles: quartiles(v),
    };
    let by_period = (0..years.len())
        .map(|p| {
            let m = |src| mean(&rows.iter().filter(|r| r.period == p && r.source == src).filter_map(|r| r.emergence).collect::<Vec<_>>());
            YearSummary {
                period: p,
                year: years[p],
                mean_n: m(PairSource::N),
                mean_c: m(PairSource::C),
            }
        })
        .collect();
    let difference = bootstrap_mean_difference(&vn, &vc, params.bootstrap_iterations, params.confidence, params.seed);
    let labels = ["year", "distance", "emergence", "cluster_size"];
    let columns: Vec<Vec<Option<f64>>> = vec![
        rows.iter().map(|r| years.get(r.period).copied().flatten().map(f64::from)).collect(),
        rows.iter().map(|r| r.distance).collect(),
        rows.iter().map(|r| r.emergence).collect(),
        rows.iter().map(|r| Some((r.past + r.future) as f64)).collect(),
    ];
    let aggregates = Aggregates {
        n: summary(PairSource::N, &vn),
        c: summary(PairSource::C, &vc),
        by_period,
        counts,
        difference,
        correlation_labels: labels.iter().map(|s| s.to_string()).collect(),
        correlations: correlations(&columns),
    };
    EvaluationReport { rows, aggregates }
}

pub fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

/// Linear-interpolated 25th, 50th and 75th percentiles.
pub fn quartiles(v: &[f64]) -> Option<[f64; 3]> {
    if v.is_empty() {
        return None;
    }
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    Some([0.25, 0.5, 0.75].map(|q| percentile_sorted(&s, q)))
}

fn percentile_sorted(s: &[f64], q: f64) -> f64 {
    let pos = q * (s.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    s[lo] + (s[hi] - s[lo]) * (pos - lo as f64)
}

/// Percentile bootstrap of `mean(a) - mean(b)`, resampling each group.
pub fn bootstrap_mean_difference(a: &[f64], b: &[f64], iterations: usize, confidence: f64, seed_value: u64) -> Option<DifferenceCi> {
    let difference = mean(a)? - mean(b)?;
    let mut rng = seed::rng_for(seed_value, &[0xB007]);
    let mut resample = |v: &[f64]| (0..v.len()).map(|_| v[rng.gen_range(0..v.len())]).sum::<f64>() / v.len() as f64;
    let mut diffs: Vec<f64> = (0..iterations.max(1)).map(|_| resample(a) - resample(b)).collect();
    diffs.sort_by(f64::total_cmp);
    let tail = (1.0 - confidence) / 2.0;
    Some(DifferenceCi {
        difference,
        low: percentile_sorted(&diffs, tail),
        high: percentile_sorted(&diffs, 1.0 - tail),
        confidence,
        iterations: iterations.max(1),
    })
}

pub fn pearson(x: &[Option<f64>], y: &[Option<f64>]) -> Option<f64> {
    let pairs: Vec<(f64, f64)> = x.iter().zip(y).filter_map(|(a, b)| Some(((*a)?, (*b)?))).collect();
    if pairs.len() < 3 {
        return None;
    }
    let n = pairs.len() as f64;
    let mx = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in &pairs {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Symmetric Pearson matrix over pairwise-complete observations.
pub fn correlations(columns: &[Vec<Option<f64>>]) -> Vec<Vec<Option<f64>>> {
    let k = columns.len();
    let mut m = vec![vec![None; k]; k];
    for i in 0..k {
        for j in i..k {
            let r = pearson(&columns[i], &columns[j]);
            let r = if i == j { r.map(|_| 1.0) } else { r };
            m[i][j] = r;
            m[j][i] = r;
        }
    }
    m
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn rows_to_csv(rows: &[ReportRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["pair_src", "pair_dst", "source", "period", "distance", "past", "future", "emergence"])?;
    for r in rows {
        w.write_record([
            r.pair_src.clone(),
            r.pair_dst.clone(),
            format!("{:?}", r.source),
            r.period.to_string(),
            fmt_opt(r.distance),
            r.past.to_string(),
            r.future.to_string(),
            fmt_opt(r.emergence),
        ])?;
    }
    finish(w)
}

pub fn rows_from_csv(text: &str) -> Result<Vec<ReportRow>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let opt = |s: &str| -> Result<Option<f64>> {
        if s.is_empty() {
            Ok(None)
        } else {
            s.parse().map(Some).map_err(|_| AtemError::Format(format!("bad number {s:?} in report.csv")))
        }
    };
    let int = |s: &str| -> Result<u64> { s.parse().map_err(|_| AtemError::Format(format!("bad count {s:?} in report.csv"))) };
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        if rec.len() != 8 {
            return Err(AtemError::Format("report.csv rows need 8 fields".into()));
        }
        out.push(ReportRow {
            pair_src: rec[0].to_string(),
            pair_dst: rec[1].to_string(),
            source: match &rec[2] {
                "N" => PairSource::N,
                "C" => PairSource::C,
                s => return Err(AtemError::Format(format!("unknown pair source {s:?}"))),
            },
            period: int(&rec[3])? as usize,
            distance: opt(&rec[4])?,
            past: int(&rec[5])?,
            future: int(&rec[6])?,
            emergence: opt(&rec[7])?,
        });
    }
    Ok(out)
}

pub fn correlations_to_csv(labels: &[String], m: &[Vec<Option<f64>>]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["variable".to_string()];
    header.extend(labels.iter().cloned());
    w.write_record(&header)?;
    for (l, row) in labels.iter().zip(m) {
        let mut rec = vec![l.clone()];
        rec.extend(row.iter().map(|v| fmt_opt(*v)));
        w.write_record(&rec)?;
    }
    finish(w)
}

pub(crate) fn finish(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| AtemError::Format(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| AtemError::Format(e.to_string()))
}

/// Per-period mean of defined emergence values for one source.
pub fn mean_by_period(rows: &[ReportRow], source: PairSource) -> BTreeMap<usize, f64> {
    let mut acc: BTreeMap<usize, (f64, usize)> = BTreeMap::new();
    for r in rows.iter().filter(|r| r.source == source) {
        if let Some(e) = r.emergence {
            let s = acc.entry(r.period).or_insert((0.0, 0));
            s.0 += e;
            s.1 += 1;
        }
    }
    acc.into_iter().map(|(p, (s, n))| (p, s / n as f64)).collect()
}
