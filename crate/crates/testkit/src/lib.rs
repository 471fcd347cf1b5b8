//! Reference oracles for tablefill tests.
//!
//! Everything here recomputes results by scanning the raw fixture tables and
//! entity records. Nothing goes through the index or the engine's
//! estimators; only the data types, tokenizer and label normalizer are
//! shared with the implementation.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tablefill_core::ingest::{read_corpus, read_kb};
use tablefill_core::synth::{generate, SynthConfig};
use tablefill_core::{
    normalize_label, tokenize, CorpusTable, EntityRecord, IndexBundle, ScoringParams, SeedTable,
    TcDenominator,
};

/// Raw fixture data: ingested tables and entities.
#[derive(Debug, Clone)]
pub struct Fixture {
    pub tables: Vec<CorpusTable>,
    pub kb: Vec<EntityRecord>,
}

impl Fixture {
    /// The 10-table, 20-entity, 15-category synthetic fixture.
    pub fn generated(seed: u64) -> Self {
        Self::from_config(&SynthConfig::fixture(seed))
    }

    pub fn from_config(cfg: &SynthConfig) -> Self {
        let corpus = generate(cfg);
        let mut kb_bytes = Vec::new();
        corpus.write_kb(&mut kb_bytes).unwrap();
        let mut table_bytes = Vec::new();
        corpus.write_tables(&mut table_bytes).unwrap();
        let kb = read_kb(kb_bytes.as_slice()).unwrap();
        let tables = read_corpus(table_bytes.as_slice(), &kb.ids()).unwrap();
        Self {
            tables: tables.tables,
            kb: kb.entities,
        }
    }

    pub fn bundle(&self) -> IndexBundle {
        IndexBundle::build(self.tables.clone(), self.kb.clone())
    }

    pub fn entity(&self, id: &str) -> &EntityRecord {
        self.kb.iter().find(|e| e.id.as_str() == id).unwrap()
    }

    fn holds(t: &CorpusTable, e: &str) -> bool {
        t.core_entities.iter().any(|x| x.as_str() == e)
    }

    fn norm_labels(t: &CorpusTable) -> BTreeSet<String> {
        t.labels
            .iter()
            .map(|l| normalize_label(l))
            .filter(|l| !l.is_empty())
            .collect()
    }

    fn field_tokens(t: &CorpusTable) -> Vec<String> {
        tokenize(&t.caption)
    }

    /// BM25 of `query` against every table caption, by full scan.
    pub fn bm25_caption(&self, query: &[String], params: &ScoringParams) -> BTreeMap<String, f64> {
        let docs: Vec<Vec<String>> = self.tables.iter().map(Self::field_tokens).collect();
        bm25_scan(&docs, query, params.bm25_k1, params.bm25_b)
            .into_iter()
            .zip(&self.tables)
            .map(|(s, t)| (t.id.0.clone(), s))
            .collect()
    }

    fn cap(mut ranked: Vec<(String, f64)>, k: usize) -> BTreeSet<String> {
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        ranked.into_iter().take(k).map(|(t, _)| t).collect()
    }

    /// Related tables by evaluating the three route predicates on every table.
    pub fn related_tables(&self, seed: &SeedTable, params: &ScoringParams) -> BTreeSet<String> {
        let k = params.top_k_tables;
        let query = tokenize(seed.caption());
        let mut out = BTreeSet::new();
        if !query.is_empty() {
            let scores = self.bm25_caption(&query, params);
            out.extend(Self::cap(
                scores.into_iter().filter(|(_, s)| *s > 0.0).collect(),
                k,
            ));
        }
        let by_entity: Vec<(String, f64)> = self
            .tables
            .iter()
            .map(|t| {
                let n = seed
                    .entities()
                    .iter()
                    .filter(|e| Self::holds(t, e.as_str()))
                    .count();
                (t.id.0.clone(), n as f64)
            })
            .filter(|(_, n)| *n > 0.0)
            .collect();
        out.extend(Self::cap(by_entity, k));
        let by_label: Vec<(String, f64)> = self
            .tables
            .iter()
            .map(|t| {
                let labels = Self::norm_labels(t);
                let n = seed
                    .normalized_labels()
                    .iter()
                    .filter(|l| labels.contains(*l))
                    .count();
                (t.id.0.clone(), n as f64)
            })
            .filter(|(_, n)| *n > 0.0)
            .collect();
        out.extend(Self::cap(by_label, k));
        out
    }

    /// Row candidates: category neighbours plus core entities of related
    /// tables, minus the seed.
    pub fn row_candidates(&self, seed: &SeedTable, params: &ScoringParams) -> BTreeSet<String> {
        let seeds: BTreeSet<&str> = seed.entities().iter().map(|e| e.as_str()).collect();
        let seed_cats: BTreeSet<&str> = seed
            .entities()
            .iter()
            .flat_map(|e| self.entity(e.as_str()).categories.iter().map(|c| c.as_str()))
            .collect();
        let mut out: BTreeSet<String> = self
            .kb
            .iter()
            .filter(|e| e.categories.iter().any(|c| seed_cats.contains(c.as_str())))
            .map(|e| e.id.0.clone())
            .collect();
        let related = self.related_tables(seed, params);
        for t in &self.tables {
            if related.contains(t.id.as_str()) {
                out.extend(t.core_entities.iter().map(|e| e.0.clone()));
            }
        }
        out.retain(|e| !seeds.contains(e.as_str()));
        out
    }

    /// Row scores `(entity, [similarity, labels, caption])` for every
    /// candidate, best first.
    pub fn row_scores(&self, seed: &SeedTable, params: &ScoringParams) -> Vec<(String, f64, [f64; 3])> {
        let seeds: Vec<&str> = seed.entities().iter().map(|e| e.as_str()).collect();

        let seed_tables: Vec<&CorpusTable> = self
            .tables
            .iter()
            .filter(|t| match params.tc_denominator {
                TcDenominator::All => seeds.iter().all(|e| Self::holds(t, e)),
                TcDenominator::Any => seeds.iter().any(|e| Self::holds(t, e)),
            })
            .collect();

        // Collection label LM over every heading token of every table.
        let mut label_coll: BTreeMap<String, f64> = BTreeMap::new();
        let mut label_total = 0.0;
        for t in &self.tables {
            for l in &t.labels {
                for tok in tokenize(l) {
                    *label_coll.entry(tok).or_default() += 1.0;
                    label_total += 1.0;
                }
            }
        }
        let mut abs_coll: BTreeMap<String, f64> = BTreeMap::new();
        let mut abs_total = 0.0;
        for e in &self.kb {
            for tok in tokenize(&e.abstract_text) {
                *abs_coll.entry(tok).or_default() += 1.0;
                abs_total += 1.0;
            }
        }
        let p = |coll: &BTreeMap<String, f64>, total: f64, t: &str| {
            if total == 0.0 {
                0.0
            } else {
                coll.get(t).copied().unwrap_or(0.0) / total
            }
        };

        let mut out: Vec<(String, f64, [f64; 3])> = self
            .row_candidates(seed, params)
            .into_iter()
            .map(|cand| {
                let rec = self.entity(&cand);

                let mut kb_sim = 0.0;
                for s in &seeds {
                    let other = &self.entity(s).categories;
                    let inter = rec.categories.intersection(other).count() as f64;
                    let union = rec.categories.union(other).count() as f64;
                    kb_sim += if union == 0.0 { 0.0 } else { inter / union };
                }
                kb_sim /= seeds.len() as f64;
                let tc_sim = if seed_tables.is_empty() {
                    0.0
                } else {
                    seed_tables.iter().filter(|t| Self::holds(t, &cand)).count() as f64
                        / seed_tables.len() as f64
                };
                let similarity = params.lambda_e * kb_sim + (1.0 - params.lambda_e) * tc_sim;

                let holding: Vec<&CorpusTable> =
                    self.tables.iter().filter(|t| Self::holds(t, &cand)).collect();

                let labels = if seed.labels().is_empty() {
                    1.0
                } else {
                    let mut tf: BTreeMap<String, f64> = BTreeMap::new();
                    let mut len = 0.0;
                    for t in &holding {
                        for l in &t.labels {
                            for tok in tokenize(l) {
                                *tf.entry(tok).or_default() += 1.0;
                                len += 1.0;
                            }
                        }
                    }
                    let mu = params.mu_labels;
                    let mut sum = 0.0;
                    for l in seed.labels() {
                        let mut prod = 1.0;
                        for tok in tokenize(l) {
                            let f = tf.get(&tok).copied().unwrap_or(0.0);
                            prod *= (f + mu * p(&label_coll, label_total, &tok)) / (len + mu);
                        }
                        sum += prod;
                    }
                    sum
                };

                let caption_terms = tokenize(seed.caption());
                let caption = if caption_terms.is_empty() {
                    1.0
                } else {
                    let abs = tokenize(&rec.abstract_text);
                    let mu = params.mu_entity;
                    let mut prod = 1.0;
                    for t in &caption_terms {
                        let f = abs.iter().filter(|x| *x == t).count() as f64;
                        let kb = (f + mu * p(&abs_coll, abs_total, t)) / (abs.len() as f64 + mu);
                        let with_term = holding
                            .iter()
                            .filter(|tb| tokenize(&tb.caption).contains(t))
                            .count() as f64;
                        let tc = if holding.is_empty() {
                            0.0
                        } else {
                            with_term / holding.len() as f64
                        };
                        prod *= params.lambda_c * kb + (1.0 - params.lambda_c) * tc;
                    }
                    prod
                };
                (
                    cand,
                    similarity * labels * caption,
                    [similarity, labels, caption],
                )
            })
            .collect();
        out.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        out
    }

    /// Relevance components `(coverage, caption, overlap)` of each related table.
    pub fn table_relevance(
        &self,
        seed: &SeedTable,
        params: &ScoringParams,
    ) -> BTreeMap<String, (f64, f64, f64)> {
        let related = self.related_tables(seed, params);
        let query = tokenize(seed.caption());
        let bm25 = self.bm25_caption(&query, params);
        self.tables
            .iter()
            .filter(|t| related.contains(t.id.as_str()))
            .map(|t| {
                let cov = if seed.entities().is_empty() {
                    1.0
                } else {
                    seed.entities()
                        .iter()
                        .filter(|e| Self::holds(t, e.as_str()))
                        .count() as f64
                        / seed.entities().len() as f64
                };
                let cap = if query.is_empty() { 1.0 } else { bm25[t.id.as_str()] };
                let labels = Self::norm_labels(t);
                let ov = if seed.labels().is_empty() {
                    1.0
                } else {
                    seed.normalized_labels()
                        .iter()
                        .filter(|l| labels.contains(*l))
                        .count() as f64
                        / seed.labels().len() as f64
                };
                (t.id.0.clone(), (cov, cap, ov))
            })
            .collect()
    }

    /// Label scores `(display form, score)`, best first; ties by normalized label.
    pub fn label_scores(&self, seed: &SeedTable, params: &ScoringParams) -> Vec<(String, f64)> {
        let relevance = self.table_relevance(seed, params);
        let seed_labels: BTreeSet<&str> =
            seed.normalized_labels().iter().map(String::as_str).collect();
        // normalized → (score, raw form → (count, first table id))
        let mut acc: BTreeMap<String, (f64, BTreeMap<String, (usize, String)>)> = BTreeMap::new();
        for t in &self.tables {
            let Some(&(c, p, o)) = relevance.get(t.id.as_str()) else {
                continue;
            };
            for l in Self::norm_labels(t) {
                if !seed_labels.contains(l.as_str()) {
                    acc.entry(l).or_default().0 += c * p * o;
                }
            }
            for raw in &t.labels {
                if let Some(entry) = acc.get_mut(&normalize_label(raw)) {
                    entry
                        .1
                        .entry(raw.clone())
                        .or_insert((0, t.id.0.clone()))
                        .0 += 1;
                }
            }
        }
        let mut out: Vec<(String, String, f64)> = acc
            .into_iter()
            .map(|(norm, (score, forms))| {
                let mut forms: Vec<(String, (usize, String))> = forms.into_iter().collect();
                forms.sort_by(|a, b| b.1 .0.cmp(&a.1 .0).then(a.1 .1.cmp(&b.1 .1)).then(a.0.cmp(&b.0)));
                (norm, forms[0].0.clone(), score)
            })
            .collect();
        out.sort_by(|a, b| b.2.total_cmp(&a.2).then(a.0.cmp(&b.0)));
        out.into_iter().map(|(_, display, s)| (display, s)).collect()
    }
}

/// Straight-line BM25 over pre-tokenized documents, IDF floored via `+1`.
pub fn bm25_scan(docs: &[Vec<String>], query: &[String], k1: f64, b: f64) -> Vec<f64> {
    let n = docs.len() as f64;
    let avg = if docs.is_empty() {
        0.0
    } else {
        docs.iter().map(Vec::len).sum::<usize>() as f64 / n
    };
    docs.iter()
        .map(|d| {
            let mut score = 0.0;
            for q in query {
                let df = docs.iter().filter(|x| x.contains(q)).count() as f64;
                let tf = d.iter().filter(|x| *x == q).count() as f64;
                if tf == 0.0 {
                    continue;
                }
                let idf = ((n - df + 0.5) / (df + 0.5) + 1.0).ln();
                score += idf * tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * d.len() as f64 / avg));
            }
            score
        })
        .collect()
}

/// A random seed table drawn from the fixture: entities mostly from one
/// table, plus optional strays, a few of its labels and caption words.
pub fn random_seed(fx: &Fixture, rng_seed: u64) -> SeedTable {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let base = fx.tables.choose(&mut rng).unwrap();
    let mut entities: Vec<String> = base
        .core_entities
        .iter()
        .take(rng.random_range(1..=3))
        .map(|e| e.0.clone())
        .collect();
    if rng.random_bool(0.4) {
        let stray = &fx.kb.choose(&mut rng).unwrap().id.0;
        if !entities.contains(stray) {
            entities.push(stray.clone());
        }
    }
    let mut labels: Vec<String> = Vec::new();
    for l in base.labels.iter().take(rng.random_range(0..=3)) {
        if !labels.iter().any(|x| normalize_label(x) == normalize_label(l)) {
            labels.push(l.clone());
        }
    }
    let caption = if rng.random_bool(0.8) {
        let words = tokenize(&base.caption);
        let mut c: Vec<&str> = words.iter().take(2).map(String::as_str).collect();
        let other = tokenize(&fx.tables.choose(&mut rng).unwrap().caption);
        if let Some(w) = other.first() {
            c.push(w);
        }
        c.join(" ")
    } else {
        String::new()
    };
    SeedTable::new(caption, entities.into_iter().map(Into::into).collect(), labels).unwrap()
}

/// `|a - b| <= tol * max(|a|, |b|)`, with exact zeros equal.
pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    a == b || (a - b).abs() <= tol * a.abs().max(b.abs())
}
