//! Deterministic synthetic knowledge base and table corpus.
//!
//! Output uses the on-disk line formats, so it goes through ingestion like
//! real data. Categories act as topics: a table draws most of its core
//! entities, caption words and headings from one category, which gives the
//! estimators realistic co-occurrence structure. Popularity of categories,
//! words and labels is skewed.

use std::collections::BTreeSet;
use std::io::{self, Write};

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ingest::{EntityLine, TableLine};
use crate::model::Cell;

const SYLLABLES: [&str; 24] = [
    "ka", "lo", "mi", "ne", "ru", "ta", "vo", "shi", "per", "dan", "tor", "gal", "bel", "sa",
    "qui", "zen", "for", "ma", "ti", "rho", "cas", "lin", "ud", "ex",
];

// Most to least popular.
const GENERIC_LABELS: [&str; 12] = [
    "Year", "Notes", "Country", "Date", "Rank", "Location", "Position", "Points", "Result",
    "Score", "Team", "Status",
];

// Headings of the core column, most to least popular.
const CORE_LABELS: [&str; 16] = [
    "Name", "Player", "Team", "Title", "Club", "Country", "Athlete", "Film", "Album", "Driver",
    "Artist", "School", "City", "Station", "Company", "Species",
];

#[derive(Debug, Clone)]
pub struct SynthConfig {
    pub tables: usize,
    pub entities: usize,
    pub categories: usize,
    pub seed: u64,
    /// Probability that a table cell link points outside the knowledge base.
    pub dangling_rate: f64,
    /// Extra knowledge-base lines with an empty abstract.
    pub abstractless_entities: usize,
    /// Columns besides the core column carry cell text only when set.
    pub attribute_cells: bool,
}

impl SynthConfig {
    /// Small corpus for oracle tests.
    pub fn fixture(seed: u64) -> Self {
        Self {
            tables: 10,
            entities: 20,
            categories: 15,
            seed,
            dangling_rate: 0.05,
            abstractless_entities: 1,
            attribute_cells: true,
        }
    }

    pub fn scaled(tables: usize, entities: usize, seed: u64) -> Self {
        Self {
            tables,
            entities,
            categories: (entities / 25).max(1),
            seed,
            dangling_rate: 0.01,
            abstractless_entities: entities / 100,
            attribute_cells: false,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct SynthCorpus {
    pub kb: Vec<EntityLine>,
    pub tables: Vec<TableLine>,
}

impl SynthCorpus {
    pub fn write_kb<W: Write>(&self, mut w: W) -> io::Result<()> {
        for line in &self.kb {
            serde_json::to_writer(&mut w, line)?;
            w.write_all(b"\n")?;
        }
        w.flush()
    }

    pub fn write_tables<W: Write>(&self, mut w: W) -> io::Result<()> {
        for line in &self.tables {
            serde_json::to_writer(&mut w, line)?;
            w.write_all(b"\n")?;
        }
        w.flush()
    }
}

fn word(mut i: usize) -> String {
    let mut s = String::new();
    loop {
        s.push_str(SYLLABLES[i % SYLLABLES.len()]);
        i /= SYLLABLES.len();
        if i == 0 {
            break;
        }
        i -= 1;
    }
    s
}

fn capitalize(w: &str) -> String {
    let mut c = w.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

/// Index in `0..n` biased toward 0.
fn skewed(rng: &mut ChaCha8Rng, n: usize, power: f64) -> usize {
    let u: f64 = rng.random();
    ((u.powf(power) * n as f64) as usize).min(n - 1)
}

struct Topic {
    core_label: &'static str,
    words: Vec<usize>,
    labels: Vec<String>,
    members: Vec<usize>,
}

pub fn generate(cfg: &SynthConfig) -> SynthCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let vocab = (cfg.entities * 2).clamp(60, 20_000);
    let n_cats = cfg.categories.max(1);
    let specific_labels: Vec<String> = (0..(n_cats * 2).clamp(20, 2_000))
        .map(|i| {
            if i % 3 == 0 {
                format!("{} {}", capitalize(&word(i + 7)), word(i * 5 + 3))
            } else {
                capitalize(&word(i + 11))
            }
        })
        .collect();

    let mut topics: Vec<Topic> = (0..n_cats)
        .map(|_| {
            let n_labels = rng.random_range(4..=8);
            let mut labels: Vec<String> = Vec::new();
            while labels.len() < n_labels {
                let l = if rng.random_bool(0.35) {
                    GENERIC_LABELS[skewed(&mut rng, GENERIC_LABELS.len(), 1.5)].to_string()
                } else {
                    specific_labels[skewed(&mut rng, specific_labels.len(), 1.6)].clone()
                };
                if !labels.contains(&l) {
                    labels.push(l);
                }
            }
            Topic {
                core_label: CORE_LABELS[skewed(&mut rng, CORE_LABELS.len(), 2.0)],
                words: (0..3).map(|_| skewed(&mut rng, vocab, 1.4)).collect(),
                labels,
                members: Vec::new(),
            }
        })
        .collect();

    let mut kb = Vec::with_capacity(cfg.entities + cfg.abstractless_entities);
    for e in 0..cfg.entities {
        let primary = skewed(&mut rng, n_cats, 1.3);
        let mut cats = BTreeSet::from([primary]);
        let extra = match rng.random_range(0..10) {
            0 => 0,
            1..=5 => 1,
            _ => 2,
        };
        for _ in 0..extra {
            cats.insert(rng.random_range(0..n_cats));
        }
        // A few entities carry no category at all.
        if rng.random_bool(0.03) {
            cats.clear();
        }
        for &c in &cats {
            topics[c].members.push(e);
        }
        // Entities without a category still belong to a topic for table use.
        if cats.is_empty() {
            topics[primary].members.push(e);
        }
        let name_words = rng.random_range(1..=3);
        let label = (0..name_words)
            .map(|_| capitalize(&word(rng.random_range(0..vocab))))
            .collect::<Vec<_>>()
            .join(" ");
        let n_words = rng.random_range(6..=16);
        let topic_words = &topics[primary].words;
        let abstract_text = (0..n_words)
            .map(|_| {
                if rng.random_bool(0.4) {
                    word(*topic_words.choose(&mut rng).unwrap())
                } else {
                    word(skewed(&mut rng, vocab, 1.8))
                }
            })
            .collect::<Vec<_>>()
            .join(" ");
        kb.push(EntityLine {
            id: format!("E{e:06}"),
            label,
            abstract_text: Some(format!("{abstract_text}.")),
            categories: cats.iter().map(|c| format!("C{c:05}")).collect(),
        });
    }
    for i in 0..cfg.abstractless_entities {
        kb.push(EntityLine {
            id: format!("X{i:06}"),
            label: format!("Stub {i}"),
            abstract_text: if i % 2 == 0 { Some(String::new()) } else { None },
            categories: vec![format!("C{:05}", i % n_cats)],
        });
    }

    let mut tables = Vec::with_capacity(cfg.tables);
    for t in 0..cfg.tables {
        let mut ti = skewed(&mut rng, n_cats, 1.3);
        if topics[ti].members.is_empty() {
            ti = topics.iter().position(|tp| !tp.members.is_empty()).unwrap_or(0);
        }
        let topic = &topics[ti];

        let want = rng.random_range(3..=10);
        let mut ents: Vec<usize> = if topic.members.is_empty() {
            Vec::new()
        } else {
            (0..want)
                .map(|_| topic.members[skewed(&mut rng, topic.members.len(), 1.2)])
                .collect()
        };
        if cfg.entities > 0 {
            for _ in 0..rng.random_range(0..=2) {
                ents.push(rng.random_range(0..cfg.entities));
            }
        }
        let mut seen = BTreeSet::new();
        ents.retain(|e| seen.insert(*e));

        let mut labels = vec![topic.core_label.to_string()];
        let mut pool = topic.labels.clone();
        pool.shuffle(&mut rng);
        let keep = rng.random_range(3..=pool.len().max(3));
        for l in pool.into_iter().take(keep) {
            if !labels.contains(&l) {
                labels.push(l);
            }
        }
        if rng.random_bool(0.3) {
            let g = GENERIC_LABELS[skewed(&mut rng, GENERIC_LABELS.len(), 1.5)].to_string();
            if !labels.contains(&g) {
                labels.push(g);
            }
        }

        let numbered = rng.random_bool(0.2);
        if numbered {
            labels.insert(0, "No.".into());
        }
        let core = usize::from(numbered);

        let n_caption = rng.random_range(2..=5);
        let caption = (0..n_caption)
            .map(|_| {
                if rng.random_bool(0.6) {
                    word(*topic.words.choose(&mut rng).unwrap())
                } else {
                    word(skewed(&mut rng, vocab, 1.5))
                }
            })
            .collect::<Vec<_>>()
            .join(" ");

        let rows = ents
            .iter()
            .enumerate()
            .map(|(r, &e)| {
                let name = &kb[e].label;
                let mut row = Vec::with_capacity(labels.len());
                if numbered {
                    row.push(Cell::text((r + 1).to_string()));
                }
                let target = if rng.random_bool(cfg.dangling_rate) {
                    format!("MISSING{t}_{r}")
                } else {
                    kb[e].id.clone()
                };
                row.push(Cell::linked(name.clone(), target));
                if cfg.attribute_cells {
                    for c in core + 1..labels.len() {
                        row.push(Cell::text(format!("{}", (r * 7 + c * 13 + t) % 100)));
                    }
                }
                row
            })
            .collect();

        tables.push(TableLine {
            id: format!("T{t:07}"),
            page_title: capitalize(&word(topic.words[0])),
            section_title: capitalize(&word(skewed(&mut rng, vocab, 1.2))),
            caption: capitalize(&caption),
            headers: labels,
            core_column_index: Some(core),
            rows,
        });
    }
    SynthCorpus { kb, tables }
}
