//! Labeled text corpora: JSONL/CSV loading, synthetic multi-generator
//! corpora, stratified splitting, and binary (human-vs-AI) relabeling.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::io::{BufRead, BufWriter, Write};
use std::path::Path;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Label assigned to every non-human document by [`relabel_binary`].
pub const BINARY_AI_LABEL: &str = "AI";

/// A single labeled text object.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub text: String,
    pub label: String,
}

impl Document {
    fn validate(&self) -> Result<()> {
        if self.id.is_empty() {
            return Err(Error::invalid("document id must be non-empty"));
        }
        if self.text.is_empty() {
            return Err(Error::invalid(format!("document {}: empty text", self.id)));
        }
        if self.label.is_empty() {
            return Err(Error::invalid(format!("document {}: empty label", self.id)));
        }
        Ok(())
    }
}

/// An ordered collection of documents over at least two categories.
///
/// Categories are kept in lexicographic order; this is the canonical order
/// used for centroid indices and confusion-matrix axes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    docs: Vec<Document>,
    categories: Vec<String>,
}

impl Corpus {
    /// Builds a corpus, validating every document and deriving the sorted
    /// category set.
    pub fn new(docs: Vec<Document>) -> Result<Self> {
        if docs.is_empty() {
            return Err(Error::invalid("empty corpus"));
        }
        let mut seen = HashSet::new();
        let mut categories = BTreeSet::new();
        for doc in &docs {
            doc.validate()?;
            if !seen.insert(doc.id.as_str()) {
                return Err(Error::invalid(format!("duplicate document id: {}", doc.id)));
            }
            categories.insert(doc.label.clone());
        }
        if categories.len() < 2 {
            return Err(Error::invalid(
                "corpus must contain at least 2 categories",
            ));
        }
        Ok(Corpus {
            docs,
            categories: categories.into_iter().collect(),
        })
    }

    pub fn docs(&self) -> &[Document] {
        &self.docs
    }

    /// Category names in lexicographic order.
    pub fn categories(&self) -> &[String] {
        &self.categories
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    /// Document counts per category, in category order.
    pub fn category_counts(&self) -> Vec<(String, usize)> {
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for doc in &self.docs {
            *counts.entry(doc.label.as_str()).or_insert(0) += 1;
        }
        self.categories
            .iter()
            .map(|c| (c.clone(), counts.get(c.as_str()).copied().unwrap_or(0)))
            .collect()
    }

    /// Keeps only documents whose label passes the predicate.
    pub fn filter_labels(&self, keep: impl Fn(&str) -> bool) -> Result<Corpus> {
        let docs: Vec<Document> = self
            .docs
            .iter()
            .filter(|d| keep(&d.label))
            .cloned()
            .collect();
        Corpus::new(docs)
    }
}

/// Reads documents from a JSONL file without corpus-level validation.
///
/// Each line must be a JSON object with string fields `id`, `text`, `label`.
/// Used directly by the CLI for inputs that may carry a single category
/// (e.g. docs for a newly registered generator).
pub fn read_jsonl_docs(path: impl AsRef<Path>) -> Result<Vec<Document>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = std::io::BufReader::new(file);
    let mut docs = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let doc: Document = serde_json::from_str(&line)
            .map_err(|e| Error::parse(path, lineno, e.to_string()))?;
        doc.validate()
            .map_err(|e| Error::parse(path, lineno, e.to_string()))?;
        if !seen.insert(doc.id.clone()) {
            return Err(Error::parse(
                path,
                lineno,
                format!("duplicate document id: {}", doc.id),
            ));
        }
        docs.push(doc);
    }
    if docs.is_empty() {
        return Err(Error::invalid("empty corpus"));
    }
    Ok(docs)
}

/// Loads a corpus from JSONL (one `{id, text, label}` object per line).
pub fn load_jsonl(path: impl AsRef<Path>) -> Result<Corpus> {
    Corpus::new(read_jsonl_docs(path)?)
}

/// Writes a corpus as JSONL with LF line endings. Deterministic byte output.
pub fn write_jsonl(corpus: &Corpus, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for doc in corpus.docs() {
        let line = serde_json::to_string(doc).expect("document serialization cannot fail");
        w.write_all(line.as_bytes())
            .and_then(|_| w.write_all(b"\n"))
            .map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Loads a corpus from a CSV file with a header row (RFC-4180 quoting).
///
/// One document per data row. If an `id` column exists it is used,
/// otherwise the 0-based data-row index becomes the id.
pub fn load_csv(
    path: impl AsRef<Path>,
    text_column: &str,
    label_column: &str,
) -> Result<Corpus> {
    let path = path.as_ref();
    let mut reader = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::parse(path, 0, format!("{other:?}")),
    })?;
    let headers = reader
        .headers()
        .map_err(|e| Error::parse(path, 1, e.to_string()))?
        .clone();
    let col_index = |name: &str| headers.iter().position(|h| h == name);
    let text_idx = col_index(text_column)
        .ok_or_else(|| Error::invalid(format!("missing column: {text_column}")))?;
    let label_idx = col_index(label_column)
        .ok_or_else(|| Error::invalid(format!("missing column: {label_column}")))?;
    let id_idx = col_index("id");

    let mut docs = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::parse(path, row + 2, e.to_string()))?;
        let field = |idx: usize| -> Result<String> {
            record
                .get(idx)
                .map(str::to_owned)
                .ok_or_else(|| Error::parse(path, row + 2, "short row".to_string()))
        };
        let id = match id_idx {
            Some(idx) => field(idx)?,
            None => row.to_string(),
        };
        docs.push(Document {
            id,
            text: field(text_idx)?,
            label: field(label_idx)?,
        });
    }
    Corpus::new(docs)
}

/// Recipe for a synthetic multi-generator corpus.
///
/// "Human" documents are contiguous excerpts of a seed text; each synthetic
/// generator is a character-level Markov chain trained on the same seed,
/// differing in order and sampling temperature so classes have controllable
/// separability.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthSpec {
    pub n_generators: usize,
    pub docs_per_class: usize,
    /// Path to a plain-text seed file.
    pub human_source: std::path::PathBuf,
    /// Per-generator Markov order (chars of context), length `n_generators`.
    pub generator_orders: Vec<usize>,
    /// Per-generator sampling temperature (> 0), length `n_generators`.
    pub generator_temperatures: Vec<f64>,
    /// Target whitespace-token count per document.
    pub doc_length: usize,
}

impl SynthSpec {
    fn validate(&self) -> Result<()> {
        if self.n_generators < 1 {
            return Err(Error::invalid("n_generators must be >= 1"));
        }
        if self.docs_per_class < 2 {
            return Err(Error::invalid("docs_per_class must be >= 2"));
        }
        if self.doc_length == 0 {
            return Err(Error::invalid("doc_length must be > 0"));
        }
        if self.generator_orders.len() != self.n_generators
            || self.generator_temperatures.len() != self.n_generators
        {
            return Err(Error::invalid(
                "generator_orders and generator_temperatures must have n_generators entries",
            ));
        }
        if self.generator_orders.contains(&0) {
            return Err(Error::invalid("generator orders must be >= 1"));
        }
        if self.generator_temperatures.iter().any(|&t| t <= 0.0) {
            return Err(Error::invalid("generator temperatures must be > 0"));
        }
        Ok(())
    }

    /// Default order/temperature assignment for `n` generators: distinct
    /// (order, temperature) pairs cycling through small context sizes, with
    /// temperatures spread wide so class statistics separate cleanly.
    pub fn default_generator_params(n: usize) -> (Vec<usize>, Vec<f64>) {
        let orders: Vec<usize> = (0..n).map(|i| 2 + (i % 3)).collect();
        let temps: Vec<f64> = (0..n)
            .map(|i| [1.0, 1.45, 0.7, 1.9, 0.45][i % 5])
            .collect();
        (orders, temps)
    }
}

/// Character-level Markov chain with temperature sampling.
struct CharMarkov {
    // Successor counts per context; BTreeMap keeps candidate iteration
    // deterministic.
    table: HashMap<Vec<char>, BTreeMap<char, u32>>,
    contexts: Vec<Vec<char>>,
}

impl CharMarkov {
    fn train(chars: &[char], order: usize) -> Self {
        let mut table: HashMap<Vec<char>, BTreeMap<char, u32>> = HashMap::new();
        for window in chars.windows(order + 1) {
            let ctx = window[..order].to_vec();
            let next = window[order];
            *table.entry(ctx).or_default().entry(next).or_insert(0) += 1;
        }
        let mut contexts: Vec<Vec<char>> = table.keys().cloned().collect();
        contexts.sort();
        CharMarkov { table, contexts }
    }

    /// Samples the next char for a context. Temperature reshapes the count
    /// distribution as p_i ∝ count_i^(1/temperature), computed in log space
    /// to avoid overflow at low temperatures.
    fn sample(&self, ctx: &[char], temperature: f64, rng: &mut StdRng) -> Option<char> {
        let successors = self.table.get(ctx)?;
        let inv_t = 1.0 / temperature;
        let log_weights: Vec<(char, f64)> = successors
            .iter()
            .map(|(&c, &n)| (c, (n as f64).ln() * inv_t))
            .collect();
        let max_lw = log_weights
            .iter()
            .map(|&(_, lw)| lw)
            .fold(f64::NEG_INFINITY, f64::max);
        let weights: Vec<f64> = log_weights.iter().map(|&(_, lw)| (lw - max_lw).exp()).collect();
        let total: f64 = weights.iter().sum();
        let mut pick = rng.gen_range(0.0..total);
        for (i, &w) in weights.iter().enumerate() {
            pick -= w;
            if pick <= 0.0 {
                return Some(log_weights[i].0);
            }
        }
        log_weights.last().map(|&(c, _)| c)
    }

    fn random_context(&self, rng: &mut StdRng) -> Vec<char> {
        self.contexts[rng.gen_range(0..self.contexts.len())].clone()
    }

    /// Generates text until it contains `n_tokens` whitespace-separated
    /// tokens (or a character budget runs out).
    fn generate(&self, n_tokens: usize, temperature: f64, rng: &mut StdRng) -> String {
        let budget = n_tokens * 64 + 256;
        let mut ctx = self.random_context(rng);
        let mut out: String = ctx.iter().collect();
        let mut produced = 0;
        while produced < budget {
            let next = match self.sample(&ctx, temperature, rng) {
                Some(c) => c,
                // Dead end (context seen only at the end of the source):
                // restart from a random context.
                None => {
                    ctx = self.random_context(rng);
                    out.push(' ');
                    continue;
                }
            };
            out.push(next);
            ctx.remove(0);
            ctx.push(next);
            produced += 1;
            if produced % 16 == 0 && out.split_whitespace().count() > n_tokens {
                break;
            }
        }
        let tokens: Vec<&str> = out.split_whitespace().take(n_tokens).collect();
        if tokens.is_empty() {
            // Extremely low-temperature chains can cycle without whitespace;
            // fall back to the raw character stream as one token.
            out.trim().to_string()
        } else {
            tokens.join(" ")
        }
    }
}

/// Generates a synthetic corpus from a seed file. Deterministic given `seed`.
pub fn synth_corpus(spec: &SynthSpec, seed: u64) -> Result<Corpus> {
    let text = std::fs::read_to_string(&spec.human_source)
        .map_err(|e| Error::io(&spec.human_source, e))?;
    synth_corpus_from_text(spec, &text, seed)
}

/// Like [`synth_corpus`] but takes the seed text directly.
pub fn synth_corpus_from_text(spec: &SynthSpec, text: &str, seed: u64) -> Result<Corpus> {
    spec.validate()?;
    let tokens: Vec<&str> = text.split_whitespace().collect();
    let chars: Vec<char> = text.chars().collect();
    let max_order = spec.generator_orders.iter().copied().max().unwrap_or(1);
    if tokens.len() < spec.doc_length || chars.len() <= max_order + spec.doc_length {
        return Err(Error::invalid(format!(
            "human source too short: {} tokens / {} chars for order {} and doc_length {}",
            tokens.len(),
            chars.len(),
            max_order,
            spec.doc_length
        )));
    }

    let mut rng = StdRng::seed_from_u64(seed);
    let mut docs = Vec::with_capacity(spec.docs_per_class * (spec.n_generators + 1));

    for i in 0..spec.docs_per_class {
        let start = rng.gen_range(0..=tokens.len() - spec.doc_length);
        docs.push(Document {
            id: format!("human-{i:04}"),
            text: tokens[start..start + spec.doc_length].join(" "),
            label: "human".to_string(),
        });
    }

    // Chains are cached per order; temperature only affects sampling.
    let mut chains: HashMap<usize, CharMarkov> = HashMap::new();
    for g in 0..spec.n_generators {
        let order = spec.generator_orders[g];
        let temperature = spec.generator_temperatures[g];
        let chain = chains
            .entry(order)
            .or_insert_with(|| CharMarkov::train(&chars, order));
        let label = format!("gen-{g}");
        for i in 0..spec.docs_per_class {
            let text = chain.generate(spec.doc_length, temperature, &mut rng);
            docs.push(Document {
                id: format!("{label}-{i:04}"),
                text,
                label: label.clone(),
            });
        }
    }

    Corpus::new(docs)
}

/// Stratified train/val/test split. Per category, quota counts come from
/// largest-remainder apportionment with empty buckets filled first; a
/// category that cannot put at least one document in every split is an error.
pub fn split(
    corpus: &Corpus,
    train_frac: f64,
    val_frac: f64,
    seed: u64,
) -> Result<(Corpus, Corpus, Corpus)> {
    if !(train_frac > 0.0 && val_frac > 0.0 && train_frac + val_frac < 1.0) {
        return Err(Error::invalid(format!(
            "invalid split fractions: train={train_frac}, val={val_frac}"
        )));
    }
    let mut rng = StdRng::seed_from_u64(seed);
    let mut by_cat: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, doc) in corpus.docs().iter().enumerate() {
        by_cat.entry(doc.label.as_str()).or_default().push(i);
    }

    let mut assignment: Vec<u8> = vec![0; corpus.len()];
    for (cat, indices) in &by_cat {
        let n = indices.len();
        let counts = apportion(n, &[train_frac, val_frac, 1.0 - train_frac - val_frac]);
        if counts.contains(&0) {
            return Err(Error::invalid(format!(
                "category {cat} too small to stratify ({n} docs)"
            )));
        }
        let mut shuffled = indices.clone();
        shuffle(&mut shuffled, &mut rng);
        let mut cursor = 0;
        for (bucket, &count) in counts.iter().enumerate() {
            for &doc_idx in &shuffled[cursor..cursor + count] {
                assignment[doc_idx] = bucket as u8;
            }
            cursor += count;
        }
    }

    // Splits preserve the original document order.
    let pick = |bucket: u8| -> Result<Corpus> {
        Corpus::new(
            corpus
                .docs()
                .iter()
                .enumerate()
                .filter(|(i, _)| assignment[*i] == bucket)
                .map(|(_, d)| d.clone())
                .collect(),
        )
    };
    Ok((pick(0)?, pick(1)?, pick(2)?))
}

/// Largest-remainder apportionment of `n` items over fractional quotas,
/// giving remainders to empty buckets first.
fn apportion(n: usize, fracs: &[f64]) -> Vec<usize> {
    let quotas: Vec<f64> = fracs.iter().map(|f| f * n as f64).collect();
    let mut counts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..fracs.len()).collect();
    order.sort_by(|&a, &b| {
        let key = |i: usize| {
            (
                counts[i] > 0, // empty buckets first
                std::cmp::Reverse(ordered(quotas[i] - counts[i] as f64)),
            )
        };
        key(a).cmp(&key(b))
    });
    for i in 0..n - assigned {
        counts[order[i % order.len()]] += 1;
    }
    counts
}

fn ordered(x: f64) -> impl Ord {
    // Quotas are finite by construction.
    (x * 1e12) as i64
}

/// Fisher-Yates shuffle; rand's own is equivalent but this keeps the exact
/// draw sequence pinned in-crate.
fn shuffle<T>(items: &mut [T], rng: &mut StdRng) {
    for i in (1..items.len()).rev() {
        let j = rng.gen_range(0..=i);
        items.swap(i, j);
    }
}

/// Maps every label other than `human_label` to [`BINARY_AI_LABEL`],
/// turning an attribution corpus into a Turing-Test corpus.
pub fn relabel_binary(corpus: &Corpus, human_label: &str) -> Result<Corpus> {
    if !corpus.categories().iter().any(|c| c == human_label) {
        return Err(Error::invalid(format!(
            "label {human_label} not present in corpus"
        )));
    }
    let docs = corpus
        .docs()
        .iter()
        .map(|d| Document {
            id: d.id.clone(),
            text: d.text.clone(),
            label: if d.label == human_label {
                d.label.clone()
            } else {
                BINARY_AI_LABEL.to_string()
            },
        })
        .collect();
    Corpus::new(docs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(id: &str, text: &str, label: &str) -> Document {
        Document {
            id: id.into(),
            text: text.into(),
            label: label.into(),
        }
    }

    fn write_temp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    const SEED_TEXT: &str = "the quick brown fox jumps over the lazy dog while a \
        careful reader counts every word in this small seed text and the river \
        runs past the old mill where children play games under tall trees that \
        sway gently in the warm summer wind as birds sing their morning songs \
        and farmers walk slowly along dusty roads carrying baskets of fresh \
        bread and ripe fruit toward the busy market square where neighbors \
        trade stories about the harvest and the weather and the long winter \
        that finally gave way to a bright and welcome spring season of growth";

    #[test]
    fn load_jsonl_basic() {
        let f = write_temp(
            "{\"id\":\"a\",\"text\":\"x\",\"label\":\"human\"}\n\
             {\"id\":\"b\",\"text\":\"y\",\"label\":\"gpt\"}\n\
             {\"id\":\"c\",\"text\":\"z\",\"label\":\"gpt\"}\n",
        );
        let corpus = load_jsonl(f.path()).unwrap();
        assert_eq!(corpus.len(), 3);
        assert_eq!(corpus.categories(), &["gpt".to_string(), "human".to_string()]);
    }

    #[test]
    fn load_jsonl_empty_file() {
        let f = write_temp("");
        let err = load_jsonl(f.path()).unwrap_err();
        assert!(err.to_string().contains("empty corpus"), "{err}");
    }

    #[test]
    fn load_jsonl_missing_label_names_line() {
        let f = write_temp(
            "{\"id\":\"a\",\"text\":\"x\",\"label\":\"human\"}\n\
             {\"id\":\"b\",\"text\":\"y\"}\n",
        );
        let err = load_jsonl(f.path()).unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other}"),
        }
    }

    #[test]
    fn load_jsonl_duplicate_id_named() {
        let f = write_temp(
            "{\"id\":\"a\",\"text\":\"x\",\"label\":\"human\"}\n\
             {\"id\":\"a\",\"text\":\"y\",\"label\":\"gpt\"}\n",
        );
        let err = load_jsonl(f.path()).unwrap_err();
        assert!(err.to_string().contains("duplicate document id: a"), "{err}");
    }

    #[test]
    fn load_csv_basic_and_quoting() {
        let f = write_temp("text,label\nhello world,human\n\"a, quoted, field\",gpt\n");
        let corpus = load_csv(f.path(), "text", "label").unwrap();
        assert_eq!(corpus.len(), 2);
        assert_eq!(corpus.docs()[1].text, "a, quoted, field");
        assert_eq!(corpus.docs()[0].id, "0");
    }

    #[test]
    fn load_csv_missing_column() {
        let f = write_temp("text,label\na,human\n");
        let err = load_csv(f.path(), "txt", "label").unwrap_err();
        assert!(err.to_string().contains("missing column: txt"), "{err}");
    }

    #[test]
    fn load_csv_id_column_used() {
        let f = write_temp("id,text,label\nd7,a,human\nd8,b,gpt\n");
        let corpus = load_csv(f.path(), "text", "label").unwrap();
        assert_eq!(corpus.docs()[0].id, "d7");
    }

    fn small_spec(n_generators: usize, docs_per_class: usize) -> SynthSpec {
        let (orders, temps) = SynthSpec::default_generator_params(n_generators);
        SynthSpec {
            n_generators,
            docs_per_class,
            human_source: "unused".into(),
            generator_orders: orders,
            generator_temperatures: temps,
            doc_length: 12,
        }
    }

    #[test]
    fn synth_counts() {
        let spec = small_spec(2, 10);
        let corpus = synth_corpus_from_text(&spec, SEED_TEXT, 7).unwrap();
        assert_eq!(corpus.len(), 30);
        assert_eq!(corpus.categories().len(), 3);
        for (_, count) in corpus.category_counts() {
            assert_eq!(count, 10);
        }
    }

    #[test]
    fn synth_deterministic() {
        let spec = small_spec(2, 5);
        let a = synth_corpus_from_text(&spec, SEED_TEXT, 42).unwrap();
        let b = synth_corpus_from_text(&spec, SEED_TEXT, 42).unwrap();
        assert_eq!(a, b);
        let c = synth_corpus_from_text(&spec, SEED_TEXT, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn synth_source_too_short() {
        let spec = small_spec(1, 2);
        let err = synth_corpus_from_text(&spec, "too short", 1).unwrap_err();
        assert!(err.to_string().contains("too short"), "{err}");
    }

    fn char_entropy(texts: &[&str]) -> f64 {
        let mut counts: HashMap<char, usize> = HashMap::new();
        let mut total = 0usize;
        for t in texts {
            for c in t.chars() {
                *counts.entry(c).or_insert(0) += 1;
                total += 1;
            }
        }
        counts
            .values()
            .map(|&n| {
                let p = n as f64 / total as f64;
                -p * p.log2()
            })
            .sum()
    }

    #[test]
    fn synth_temperature_controls_entropy() {
        // Near-zero temperature collapses sampling toward argmax successors,
        // so its documents carry strictly lower character entropy.
        let spec = SynthSpec {
            n_generators: 2,
            docs_per_class: 20,
            human_source: "unused".into(),
            generator_orders: vec![2, 2],
            generator_temperatures: vec![0.05, 2.0],
            doc_length: 30,
        };
        let corpus = synth_corpus_from_text(&spec, SEED_TEXT, 5).unwrap();
        let texts_of = |label: &str| -> Vec<&str> {
            corpus
                .docs()
                .iter()
                .filter(|d| d.label == label)
                .map(|d| d.text.as_str())
                .collect()
        };
        let cold = char_entropy(&texts_of("gen-0"));
        let hot = char_entropy(&texts_of("gen-1"));
        assert!(
            cold < hot,
            "expected cold entropy {cold:.3} < hot entropy {hot:.3}"
        );
    }

    #[test]
    fn split_proportions_and_partition() {
        let docs: Vec<Document> = (0..100)
            .map(|i| doc(&format!("d{i}"), "t", if i % 2 == 0 { "a" } else { "b" }))
            .collect();
        let corpus = Corpus::new(docs).unwrap();
        let (train, val, test) = split(&corpus, 0.8, 0.1, 3).unwrap();
        assert_eq!((train.len(), val.len(), test.len()), (80, 10, 10));
        // Per-class proportions preserved.
        for c in ["a", "b"] {
            let count = |s: &Corpus| s.docs().iter().filter(|d| d.label == c).count();
            assert_eq!(count(&train), 40);
            assert_eq!(count(&val), 5);
            assert_eq!(count(&test), 5);
        }
        // Partition: disjoint and exhaustive by id.
        let mut all: Vec<&str> = train
            .docs()
            .iter()
            .chain(val.docs())
            .chain(test.docs())
            .map(|d| d.id.as_str())
            .collect();
        all.sort();
        all.dedup();
        assert_eq!(all.len(), 100);
    }

    #[test]
    fn split_small_class_errors() {
        let docs = vec![
            doc("a1", "t", "a"),
            doc("a2", "t", "a"),
            doc("b1", "t", "b"),
            doc("b2", "t", "b"),
            doc("b3", "t", "b"),
        ];
        let corpus = Corpus::new(docs).unwrap();
        let err = split(&corpus, 0.6, 0.2, 1).unwrap_err();
        assert!(err.to_string().contains("category a"), "{err}");
    }

    #[test]
    fn split_deterministic() {
        let docs: Vec<Document> = (0..60)
            .map(|i| doc(&format!("d{i}"), "t", if i % 3 == 0 { "a" } else { "b" }))
            .collect();
        let corpus = Corpus::new(docs).unwrap();
        let (t1, v1, s1) = split(&corpus, 0.7, 0.15, 9).unwrap();
        let (t2, v2, s2) = split(&corpus, 0.7, 0.15, 9).unwrap();
        assert_eq!(t1, t2);
        assert_eq!(v1, v2);
        assert_eq!(s1, s2);
    }

    #[test]
    fn relabel_binary_basic() {
        let corpus = Corpus::new(vec![
            doc("1", "t", "human"),
            doc("2", "t", "gen-0"),
            doc("3", "t", "gen-1"),
        ])
        .unwrap();
        let binary = relabel_binary(&corpus, "human").unwrap();
        assert_eq!(
            binary.categories(),
            &[BINARY_AI_LABEL.to_string(), "human".to_string()]
        );
        assert_eq!(binary.len(), 3);
        assert_eq!(binary.docs()[0].label, "human");
        assert_eq!(binary.docs()[1].label, BINARY_AI_LABEL);
    }

    #[test]
    fn relabel_binary_idempotent() {
        let corpus = Corpus::new(vec![
            doc("1", "t", "human"),
            doc("2", "t", "gen-0"),
        ])
        .unwrap();
        let once = relabel_binary(&corpus, "human").unwrap();
        let twice = relabel_binary(&once, "human").unwrap();
        assert_eq!(once, twice);
    }

    #[test]
    fn relabel_binary_label_agnostic() {
        let corpus = Corpus::new(vec![
            doc("1", "t", "human"),
            doc("2", "t", "gen-0"),
            doc("3", "t", "gen-1"),
        ])
        .unwrap();
        let binary = relabel_binary(&corpus, "gen-0").unwrap();
        assert_eq!(
            binary.categories(),
            &[BINARY_AI_LABEL.to_string(), "gen-0".to_string()]
        );
    }

    #[test]
    fn relabel_binary_absent_label_errors() {
        let corpus = Corpus::new(vec![doc("1", "t", "a"), doc("2", "t", "b")]).unwrap();
        assert!(relabel_binary(&corpus, "human").is_err());
    }

    #[test]
    fn corpus_requires_two_categories() {
        let err = Corpus::new(vec![doc("1", "t", "a"), doc("2", "t", "a")]).unwrap_err();
        assert!(err.to_string().contains("at least 2 categories"), "{err}");
    }

    proptest::proptest! {
        /// The three splits partition the corpus: exhaustive, disjoint by
        /// id, and every category lands in every split.
        #[test]
        fn split_is_a_partition(
            seed in proptest::prelude::any::<u64>(),
            classes in 2usize..5,
            per_class in 10usize..40,
            train_frac in 0.4f64..0.7,
            val_frac in 0.15f64..0.25,
        ) {
            let docs: Vec<Document> = (0..classes)
                .flat_map(|c| {
                    (0..per_class).map(move |i| Document {
                        id: format!("c{c}-d{i}"),
                        text: "t".to_string(),
                        label: format!("c{c}"),
                    })
                })
                .collect();
            let corpus = Corpus::new(docs).unwrap();
            let (train, val, test) = split(&corpus, train_frac, val_frac, seed).unwrap();

            let mut ids: Vec<&str> = train
                .docs()
                .iter()
                .chain(val.docs())
                .chain(test.docs())
                .map(|d| d.id.as_str())
                .collect();
            proptest::prop_assert_eq!(ids.len(), corpus.len());
            ids.sort_unstable();
            ids.dedup();
            proptest::prop_assert_eq!(ids.len(), corpus.len());
            for part in [&train, &val, &test] {
                proptest::prop_assert_eq!(part.categories().len(), classes);
            }
        }
    }

    #[test]
    fn jsonl_roundtrip_is_deterministic() {
        let spec = small_spec(1, 3);
        let corpus = synth_corpus_from_text(&spec, SEED_TEXT, 11).unwrap();
        let f1 = tempfile::NamedTempFile::new().unwrap();
        let f2 = tempfile::NamedTempFile::new().unwrap();
        write_jsonl(&corpus, f1.path()).unwrap();
        write_jsonl(&corpus, f2.path()).unwrap();
        let b1 = std::fs::read(f1.path()).unwrap();
        let b2 = std::fs::read(f2.path()).unwrap();
        assert_eq!(b1, b2);
        assert_eq!(load_jsonl(f1.path()).unwrap(), corpus);
    }
}
