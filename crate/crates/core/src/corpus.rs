//! Documents, citation edges and the period timeline.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::Path;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{AtemError, Result};
use crate::text::Vocabulary;

/// Dense index of a document inside a [`Corpus`] (documents are kept sorted by id).
pub type DocIdx = usize;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    #[serde(rename = "id")]
    pub doc_id: String,
    pub title: String,
    #[serde(rename = "abstract", default)]
    pub body: String,
    pub year: i32,
}

impl Document {
    pub fn new(doc_id: impl Into<String>, title: impl Into<String>, body: impl Into<String>, year: i32) -> Self {
        Document {
            doc_id: doc_id.into(),
            title: title.into(),
            body: body.into(),
            year,
        }
    }

    /// Text fed to tokenization: title, a space, then the body.
    pub fn text(&self) -> String {
        if self.body.is_empty() {
            self.title.clone()
        } else {
            format!("{} {}", self.title, self.body)
        }
    }
}

/// A collapsed citation `src -> dst` with the number of times it was listed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CitationEdge {
    pub src: DocIdx,
    pub dst: DocIdx,
    pub multiplicity: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Period {
    pub start_year: i32,
    pub end_year: i32,
}

impl Period {
    pub fn contains(&self, year: i32) -> bool {
        self.start_year <= year && year <= self.end_year
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Timeline {
    pub periods: Vec<Period>,
    pub overlap: i32,
}

impl Timeline {
    pub fn len(&self) -> usize {
        self.periods.len()
    }

    pub fn is_empty(&self) -> bool {
        self.periods.is_empty()
    }

    /// Indices of every period whose window contains `year`.
    pub fn periods_of(&self, year: i32) -> impl Iterator<Item = usize> + '_ {
        self.periods
            .iter()
            .enumerate()
            .filter(move |(_, p)| p.contains(year))
            .map(|(i, _)| i)
    }

    pub fn first_period_of(&self, year: i32) -> Option<usize> {
        self.periods_of(year).next()
    }

    pub fn label(&self, i: usize) -> String {
        let p = self.periods[i];
        if p.start_year == p.end_year {
            p.start_year.to_string()
        } else {
            format!("{}-{}", p.start_year, p.end_year)
        }
    }
}

/// Counts collected while loading; reported by [`validate`].
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoadDiagnostics {
    pub skipped_records: usize,
    pub out_of_range_records: usize,
    pub dangling_dropped: usize,
    pub self_citations_dropped: usize,
    pub duplicate_citations_collapsed: usize,
}

#[derive(Debug, Clone)]
pub struct Corpus {
    docs: Vec<Document>,
    index: HashMap<String, DocIdx>,
    pub citations: Vec<CitationEdge>,
    pub timeline: Timeline,
    pub vocabulary: Vocabulary,
    pub diagnostics: LoadDiagnostics,
}

impl PartialEq for Corpus {
    fn eq(&self, other: &Self) -> bool {
        self.docs == other.docs
            && self.citations == other.citations
            && self.timeline == other.timeline
            && self.diagnostics == other.diagnostics
    }
}

impl Corpus {
    /// Build a corpus from documents; ids must be unique. The timeline
    /// defaults to non-overlapping yearly windows.
    pub fn from_documents(mut docs: Vec<Document>) -> Result<Self> {
        if docs.is_empty() {
            return Err(AtemError::Format("corpus has no documents".into()));
        }
        docs.sort_by(|a, b| a.doc_id.cmp(&b.doc_id));
        for w in docs.windows(2) {
            if w[0].doc_id == w[1].doc_id {
                return Err(AtemError::DuplicateId {
                    id: w[0].doc_id.clone(),
                    first: 0,
                    second: 0,
                });
            }
        }
        let index = docs
            .iter()
            .enumerate()
            .map(|(i, d)| (d.doc_id.clone(), i))
            .collect();
        let mut corpus = Corpus {
            docs,
            index,
            citations: Vec::new(),
            timeline: Timeline {
                periods: Vec::new(),
                overlap: 0,
            },
            vocabulary: Vocabulary::default(),
            diagnostics: LoadDiagnostics::default(),
        };
        corpus.timeline = build_timeline(&corpus, 1, 0)?;
        Ok(corpus)
    }

    pub fn documents(&self) -> &[Document] {
        &self.docs
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn doc(&self, i: DocIdx) -> &Document {
        &self.docs[i]
    }

    pub fn idx(&self, doc_id: &str) -> Option<DocIdx> {
        self.index.get(doc_id).copied()
    }

    pub fn year_span(&self) -> (i32, i32) {
        let min = self.docs.iter().map(|d| d.year).min().unwrap_or(0);
        let max = self.docs.iter().map(|d| d.year).max().unwrap_or(0);
        (min, max)
    }

    /// Replace the citation set with `(src, dst)` id pairs, dropping self and
    /// dangling citations and collapsing duplicates.
    pub fn set_citations<'a>(&mut self, pairs: impl IntoIterator<Item = (&'a str, &'a str)>) -> Result<()> {
        let mut counts: BTreeMap<(DocIdx, DocIdx), u32> = BTreeMap::new();
        let mut total = 0usize;
        let mut dangling = 0usize;
        let mut selfs = 0usize;
        let mut dups = 0usize;
        for (s, d) in pairs {
            total += 1;
            let (Some(si), Some(di)) = (self.idx(s), self.idx(d)) else {
                dangling += 1;
                continue;
            };
            if si == di {
                selfs += 1;
                continue;
            }
            let c = counts.entry((si, di)).or_insert(0);
            if *c > 0 {
                dups += 1;
            }
            *c += 1;
        }
        if total > 0 && dangling * 2 > total {
            return Err(AtemError::TooManyDangling { dangling, total });
        }
        if dangling > 0 {
            warn!("dropped {dangling} dangling citation edges");
        }
        self.citations = counts
            .into_iter()
            .map(|((src, dst), multiplicity)| CitationEdge { src, dst, multiplicity })
            .collect();
        self.diagnostics.dangling_dropped = dangling;
        self.diagnostics.self_citations_dropped = selfs;
        self.diagnostics.duplicate_citations_collapsed = dups;
        Ok(())
    }

    /// Total citation count including multiplicities.
    pub fn citation_total(&self) -> u64 {
        self.citations.iter().map(|e| u64::from(e.multiplicity)).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorpusFormat {
    Jsonl,
    Csv,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct LoadOptions {
    pub min_year: Option<i32>,
    pub max_year: Option<i32>,
}

pub fn load_corpus(path: &Path, format: CorpusFormat) -> Result<Corpus> {
    load_corpus_with(path, format, &LoadOptions::default())
}

pub fn load_corpus_with(path: &Path, format: CorpusFormat, opts: &LoadOptions) -> Result<Corpus> {
    let raw: Vec<(usize, RawRecord)> = match format {
        CorpusFormat::Jsonl => read_jsonl_records(path)?,
        CorpusFormat::Csv => read_csv_records(path)?,
    };
    let mut diagnostics = LoadDiagnostics::default();
    let mut seen: HashMap<String, usize> = HashMap::new();
    let mut docs = Vec::with_capacity(raw.len());
    for (line, rec) in raw {
        let Some(doc) = rec.into_document() else {
            warn!("{}: record {line} lacks a usable id or year; skipped", path.display());
            diagnostics.skipped_records += 1;
            continue;
        };
        if opts.min_year.is_some_and(|m| doc.year < m) || opts.max_year.is_some_and(|m| doc.year > m) {
            diagnostics.out_of_range_records += 1;
            continue;
        }
        if let Some(first) = seen.insert(doc.doc_id.clone(), line) {
            return Err(AtemError::DuplicateId {
                id: doc.doc_id,
                first,
                second: line,
            });
        }
        docs.push(doc);
    }
    let mut corpus = Corpus::from_documents(docs)?;
    corpus.diagnostics = diagnostics;
    Ok(corpus)
}

/// A record before validation; any field may be absent or ill-typed.
#[derive(Debug, Default)]
struct RawRecord {
    id: Option<String>,
    title: Option<String>,
    body: Option<String>,
    year: Option<String>,
}

impl RawRecord {
    fn into_document(self) -> Option<Document> {
        let id = self.id.filter(|s| !s.is_empty())?;
        let year: i32 = self.year?.trim().parse().ok()?;
        Some(Document::new(id, self.title.unwrap_or_default(), self.body.unwrap_or_default(), year))
    }
}

fn value_to_string(v: &serde_json::Value) -> Option<String> {
    match v {
        serde_json::Value::String(s) => Some(s.clone()),
        serde_json::Value::Number(n) => Some(n.to_string()),
        _ => None,
    }
}

fn read_jsonl_records(path: &Path) -> Result<Vec<(usize, RawRecord)>> {
    let f = fs::File::open(path).map_err(|e| AtemError::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| AtemError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = match serde_json::from_str::<serde_json::Value>(&line) {
            Ok(serde_json::Value::Object(m)) => RawRecord {
                id: m.get("id").and_then(value_to_string),
                title: m.get("title").and_then(value_to_string),
                body: m.get("abstract").and_then(value_to_string),
                year: m.get("year").and_then(value_to_string),
            },
            _ => RawRecord::default(),
        };
        out.push((i + 1, rec));
    }
    Ok(out)
}

fn read_csv_records(path: &Path) -> Result<Vec<(usize, RawRecord)>> {
    let mut rdr = csv::ReaderBuilder::new()
        .flexible(true)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => AtemError::io(path, io),
            other => AtemError::Format(format!("{other:?}")),
        })?;
    let headers = rdr.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let (ci, ct, ca, cy) = (col("id"), col("title"), col("abstract"), col("year"));
    let mut out = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let rec = match row {
            Ok(r) => {
                let get = |c: Option<usize>| c.and_then(|c| r.get(c)).map(str::to_string);
                RawRecord {
                    id: get(ci),
                    title: get(ct),
                    body: get(ca),
                    year: get(cy),
                }
            }
            Err(_) => RawRecord::default(),
        };
        out.push((i + 2, rec));
    }
    Ok(out)
}

/// Read `src,dst` rows and attach them to `corpus`.
pub fn load_citations(path: &Path, corpus: &mut Corpus) -> Result<()> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => AtemError::io(path, io),
        other => AtemError::Format(format!("{other:?}")),
    })?;
    let headers = rdr.headers()?.clone();
    let si = headers.iter().position(|h| h == "src").unwrap_or(0);
    let di = headers.iter().position(|h| h == "dst").unwrap_or(1);
    let mut pairs = Vec::new();
    for row in rdr.records() {
        let row = row?;
        match (row.get(si), row.get(di)) {
            (Some(s), Some(d)) => pairs.push((s.to_string(), d.to_string())),
            _ => return Err(AtemError::Format(format!("{}: short citation row", path.display()))),
        }
    }
    corpus.set_citations(pairs.iter().map(|(s, d)| (s.as_str(), d.as_str())))
}

/// Windows of `window_years` starting at the first corpus year and stepping by
/// `window_years - overlap_years` until the last corpus year is covered.
pub fn build_timeline(corpus: &Corpus, window_years: i32, overlap_years: i32) -> Result<Timeline> {
    if window_years < 1 || overlap_years < 0 || overlap_years >= window_years {
        return Err(AtemError::InvalidParam(format!(
            "timeline needs window >= 1 and 0 <= overlap < window (got {window_years}, {overlap_years})"
        )));
    }
    let (min, max) = corpus.year_span();
    let step = window_years - overlap_years;
    let mut periods = Vec::new();
    let mut start = min;
    loop {
        let end = start + window_years - 1;
        periods.push(Period {
            start_year: start,
            end_year: end,
        });
        if end >= max {
            break;
        }
        start += step;
    }
    if periods.len() < 2 {
        warn!("timeline has a single period ({min}-{max}); emergence needs at least two");
    }
    Ok(Timeline {
        periods,
        overlap: overlap_years,
    })
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub documents: usize,
    pub edges: usize,
    pub citations: u64,
    pub skipped_records: usize,
    pub out_of_range_records: usize,
    pub dangling_dropped: usize,
    pub self_citations_dropped: usize,
    pub duplicate_citations_collapsed: usize,
    pub anachronistic: usize,
    pub periods: usize,
}

pub fn validate(corpus: &Corpus) -> ValidationReport {
    let anachronistic = corpus
        .citations
        .iter()
        .filter(|e| corpus.doc(e.src).year < corpus.doc(e.dst).year)
        .count();
    let d = &corpus.diagnostics;
    ValidationReport {
        documents: corpus.len(),
        edges: corpus.citations.len(),
        citations: corpus.citation_total(),
        skipped_records: d.skipped_records,
        out_of_range_records: d.out_of_range_records,
        dangling_dropped: d.dangling_dropped,
        self_citations_dropped: d.self_citations_dropped,
        duplicate_citations_collapsed: d.duplicate_citations_collapsed,
        anachronistic,
        periods: corpus.timeline.len(),
    }
}

/// Write documents as JSONL in corpus (id) order.
pub fn write_documents_jsonl(corpus: &Corpus) -> Result<String> {
    let mut s = String::new();
    for d in corpus.documents() {
        let v = serde_json::json!({
            "id": d.doc_id,
            "title": d.title,
            "abstract": if d.body.is_empty() { serde_json::Value::Null } else { d.body.clone().into() },
            "year": d.year,
        });
        s.push_str(&serde_json::to_string(&v)?);
        s.push('\n');
    }
    Ok(s)
}

/// Write citations as `src,dst` CSV, repeating rows by multiplicity.
pub fn write_citations_csv(corpus: &Corpus) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["src", "dst"])?;
    for e in &corpus.citations {
        for _ in 0..e.multiplicity {
            w.write_record([&corpus.doc(e.src).doc_id, &corpus.doc(e.dst).doc_id])?;
        }
    }
    let bytes = w.into_inner().map_err(|e| AtemError::Format(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| AtemError::Format(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_tmp(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    fn abc() -> Corpus {
        let f = write_tmp(
            r#"{"id":"a","title":"A","abstract":null,"year":2000}
{"id":"b","title":"B","abstract":"x","year":2001}
{"id":"c","title":"C","abstract":"y","year":2002}
"#,
        );
        load_corpus(f.path(), CorpusFormat::Jsonl).unwrap()
    }

    #[test]
    fn loads_three_documents() {
        let c = abc();
        assert_eq!(c.len(), 3);
        assert_eq!(c.doc(c.idx("b").unwrap()).body, "x");
        assert_eq!(c.doc(c.idx("a").unwrap()).text(), "A");
    }

    #[test]
    fn bad_year_is_skipped_with_warning() {
        let f = write_tmp(
            r#"{"id":"a","title":"A","year":2000}
{"id":"b","title":"B","year":"20x1"}
{"title":"no id","year":2001}
"#,
        );
        let c = load_corpus(f.path(), CorpusFormat::Jsonl).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c.diagnostics.skipped_records, 2);
    }

    #[test]
    fn duplicate_id_names_the_id() {
        let f = write_tmp(
            r#"{"id":"a","title":"A","year":2000}
{"id":"a","title":"A2","year":2001}
"#,
        );
        let err = load_corpus(f.path(), CorpusFormat::Jsonl).unwrap_err();
        match &err {
            AtemError::DuplicateId { id, first, second } => {
                assert_eq!(id, "a");
                assert_eq!((*first, *second), (1, 2));
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(err.to_string().contains("\"a\""));
    }

    #[test]
    fn csv_format_loads() {
        let f = write_tmp("id,title,abstract,year\na,Alpha,,2000\nb,Beta,text,2001\nc,Gamma,,nope\n");
        let c = load_corpus(f.path(), CorpusFormat::Csv).unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(c.diagnostics.skipped_records, 1);
    }

    #[test]
    fn unreadable_file_is_fatal() {
        let err = load_corpus(Path::new("/nonexistent/docs.jsonl"), CorpusFormat::Jsonl).unwrap_err();
        assert!(matches!(err, AtemError::Io { .. }));
    }

    #[test]
    fn loading_is_idempotent() {
        let f = write_tmp("{\"id\":\"z\",\"title\":\"Z\",\"year\":1999}\n{\"id\":\"y\",\"title\":\"Y\",\"year\":2003}\n");
        let a = load_corpus(f.path(), CorpusFormat::Jsonl).unwrap();
        let b = load_corpus(f.path(), CorpusFormat::Jsonl).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn citation_filtering() {
        let mut c = abc();
        let f = write_tmp("src,dst\na,b\nb,c\n");
        load_citations(f.path(), &mut c).unwrap();
        assert_eq!(c.citations.len(), 2);

        c.set_citations([("a", "b"), ("b", "c"), ("c", "a"), ("a", "zz")]).unwrap();
        assert_eq!(c.citations.len(), 3);
        assert_eq!(c.diagnostics.dangling_dropped, 1);

        c.set_citations([("a", "a"), ("a", "b")]).unwrap();
        assert_eq!(c.citations.len(), 1);
        assert_eq!(c.diagnostics.self_citations_dropped, 1);

        c.set_citations([("a", "b"), ("a", "b")]).unwrap();
        assert_eq!(c.citations[0].multiplicity, 2);
        assert_eq!(c.citation_total(), 2);

        let err = c.set_citations([("a", "x"), ("a", "y"), ("a", "b")]).unwrap_err();
        assert!(matches!(err, AtemError::TooManyDangling { dangling: 2, total: 3 }));
    }

    #[test]
    fn every_retained_edge_resolves() {
        let mut c = abc();
        c.set_citations([("a", "b"), ("q", "c"), ("c", "b")]).unwrap();
        assert!(c.citations.iter().all(|e| e.src < c.len() && e.dst < c.len()));
    }

    fn corpus_with_years(years: &[i32]) -> Corpus {
        let docs = years
            .iter()
            .enumerate()
            .map(|(i, y)| Document::new(format!("d{i}"), "t", "", *y))
            .collect();
        Corpus::from_documents(docs).unwrap()
    }

    #[test]
    fn yearly_timeline_over_two_decades() {
        let c = corpus_with_years(&[2000, 2010, 2020]);
        let t = build_timeline(&c, 1, 0).unwrap();
        assert_eq!(t.len(), 21);
        assert_eq!(t.label(20), "2020");
    }

    #[test]
    fn overlapping_windows() {
        let c = corpus_with_years(&[2000, 2003]);
        let t = build_timeline(&c, 2, 1).unwrap();
        let got: Vec<(i32, i32)> = t.periods.iter().map(|p| (p.start_year, p.end_year)).collect();
        assert_eq!(got, vec![(2000, 2001), (2001, 2002), (2002, 2003)]);
        assert_eq!(t.periods_of(2001).collect::<Vec<_>>(), vec![0, 1]);
    }

    #[test]
    fn degenerate_span_gives_one_period() {
        let c = corpus_with_years(&[2005, 2005]);
        let t = build_timeline(&c, 3, 0).unwrap();
        assert_eq!(t.len(), 1);
        assert!(build_timeline(&c, 2, 2).is_err());
        assert!(build_timeline(&c, 0, 0).is_err());
    }

    #[test]
    fn validation_counts() {
        let mut c = abc();
        c.set_citations([("a", "b"), ("b", "a")]).unwrap();
        let r = validate(&c);
        assert_eq!(r.anachronistic, 1);
        assert_eq!(r.edges, 2);

        c.set_citations([("c", "b"), ("b", "a")]).unwrap();
        let r = validate(&c);
        assert_eq!((r.anachronistic, r.dangling_dropped, r.skipped_records), (0, 0, 0));

        c.set_citations([("c", "b"), ("b", "a"), ("c", "a"), ("x", "a"), ("y", "a"), ("a", "z")])
            .unwrap();
        assert_eq!(validate(&c).dangling_dropped, 3);
    }

    #[test]
    fn jsonl_and_csv_writers_round_trip() {
        let mut c = abc();
        c.set_citations([("c", "b"), ("c", "b"), ("b", "a")]).unwrap();
        let docs = write_tmp(&write_documents_jsonl(&c).unwrap());
        let cites = write_tmp(&write_citations_csv(&c).unwrap());
        let mut back = load_corpus(docs.path(), CorpusFormat::Jsonl).unwrap();
        load_citations(cites.path(), &mut back).unwrap();
        assert_eq!(back.documents(), c.documents());
        assert_eq!(back.citations, c.citations);
    }

    proptest::proptest! {
        #[test]
        fn timeline_covers_every_year(
            years in proptest::collection::vec(1990i32..2030, 1..30),
            window in 1i32..6,
            overlap_frac in 0.0f64..1.0,
        ) {
            let overlap = ((window as f64) * overlap_frac) as i32 % window;
            let c = corpus_with_years(&years);
            let t = build_timeline(&c, window, overlap).unwrap();
            for y in &years {
                proptest::prop_assert!(t.periods_of(*y).next().is_some());
            }
            for w in t.periods.windows(2) {
                proptest::prop_assert!(w[0].start_year < w[1].start_year);
            }
        }
    }
}
