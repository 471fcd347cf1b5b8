//! Row population: suggest entities for the seed table's core column.
//!
//! Candidates come from the knowledge base (entities sharing a category with
//! a seed entity) and from the table corpus (core-column entities of related
//! tables). Each candidate `e` is scored as
//!
//! ```text
//! score(e) = entity_similarity(e) * label_likelihood(e) * caption_likelihood(e)
//! ```
//!
//! * entity similarity mixes the mean category Jaccard against the seed
//!   entities with the fraction of seed-holding tables that also hold `e`;
//! * label likelihood sums, over seed labels, the product of the
//!   Dirichlet-smoothed label-LM probabilities of the label's tokens;
//! * caption likelihood multiplies, over caption tokens, a mixture of the
//!   entity's abstract LM and the caption co-occurrence ratio `#(t,e)/#(e)`.
//!
//! Empty labels or an empty caption contribute the neutral factor 1.

use std::collections::{BTreeSet, HashSet};

use crate::error::QueryError;
use crate::index::IndexBundle;
use crate::model::{rank_order, EntityId, ScoringParams, SeedTable, Suggestion, TcDenominator};
use crate::retrieval::{related_ordinals, ResolvedSeed};
use crate::scoring::{dirichlet_lm_prob, dirichlet_smoothed, jaccard, sorted_intersection_len};
use crate::text::tokenize;

pub const ENTITY_SIMILARITY: &str = "entity-similarity";
pub const LABEL_LIKELIHOOD: &str = "label-likelihood";
pub const CAPTION_LIKELIHOOD: &str = "caption-likelihood";

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RowCandidateSet {
    pub candidates: BTreeSet<EntityId>,
    /// Candidates contributed by shared categories.
    pub from_kb: usize,
    /// Candidates contributed by related tables.
    pub from_tc: usize,
    ordinals: Vec<u32>,
}

impl RowCandidateSet {
    pub fn len(&self) -> usize {
        self.ordinals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ordinals.is_empty()
    }
}

pub fn select_row_candidates(
    seed: &SeedTable,
    bundle: &IndexBundle,
    params: &ScoringParams,
) -> Result<RowCandidateSet, QueryError> {
    if seed.entities().is_empty() {
        return Err(QueryError::EmptySeedEntities);
    }
    let resolved = ResolvedSeed::new(seed, bundle)?;
    Ok(candidates_for(&resolved, bundle, params))
}

fn candidates_for(
    seed: &ResolvedSeed<'_>,
    bundle: &IndexBundle,
    params: &ScoringParams,
) -> RowCandidateSet {
    let seeds: HashSet<u32> = seed.entities.iter().copied().collect();

    let mut kb: HashSet<u32> = HashSet::new();
    for &e in &seed.entities {
        for c in &bundle.entities.record(e).categories {
            kb.extend(bundle.categories.members(c.as_str()));
        }
    }
    kb.retain(|e| !seeds.contains(e));

    let mut tc: HashSet<u32> = HashSet::new();
    for t in related_ordinals(seed, bundle, params) {
        tc.extend(bundle.tables.table_entities(t));
    }
    tc.retain(|e| !seeds.contains(e));

    let (from_kb, from_tc) = (kb.len(), tc.len());
    let mut ordinals: Vec<u32> = kb.into_iter().chain(tc).collect();
    ordinals.sort_unstable();
    ordinals.dedup();
    RowCandidateSet {
        candidates: ordinals
            .iter()
            .map(|&e| bundle.entities.record(e).id.clone())
            .collect(),
        from_kb,
        from_tc,
        ordinals,
    }
}

/// Scores and ranks `candidates`, best first, at most `limit` entries.
pub fn rank_rows(
    seed: &SeedTable,
    candidates: &RowCandidateSet,
    bundle: &IndexBundle,
    params: &ScoringParams,
    limit: usize,
) -> Result<Vec<Suggestion>, QueryError> {
    if limit == 0 {
        return Ok(Vec::new());
    }
    let resolved = ResolvedSeed::new(seed, bundle)?;
    let scorer = RowScorer::new(&resolved, bundle, params);
    let mut out: Vec<Suggestion> = candidates
        .ordinals
        .iter()
        .filter(|e| !resolved.entities.contains(e))
        .map(|&e| scorer.score(e))
        .collect();
    out.sort_by(rank_order);
    out.truncate(limit);
    Ok(out)
}

/// Candidate selection followed by ranking.
pub fn suggest_rows(
    seed: &SeedTable,
    bundle: &IndexBundle,
    params: &ScoringParams,
    limit: usize,
) -> Result<Vec<Suggestion>, QueryError> {
    let candidates = select_row_candidates(seed, bundle, params)?;
    rank_rows(seed, &candidates, bundle, params, limit)
}

/// Per-query state shared across candidates.
struct RowScorer<'a> {
    bundle: &'a IndexBundle,
    params: &'a ScoringParams,
    seed_entities: &'a [u32],
    /// Tables forming the denominator of the corpus side of entity similarity.
    seed_tables: Vec<u32>,
    /// Per label: tokens with their collection label-LM probability.
    labels: Vec<Vec<(String, f64)>>,
    /// Caption tokens with their collection abstract-LM probability.
    caption: Vec<(String, f64)>,
}

impl<'a> RowScorer<'a> {
    fn new(seed: &'a ResolvedSeed<'a>, bundle: &'a IndexBundle, params: &'a ScoringParams) -> Self {
        let tables = &bundle.tables;
        let seed_tables = match params.tc_denominator {
            TcDenominator::All => {
                let mut iter = seed.entities.iter();
                let mut acc: Vec<u32> = iter
                    .next()
                    .map(|&e| tables.entity_postings(e).to_vec())
                    .unwrap_or_default();
                for &e in iter {
                    let other = tables.entity_postings(e);
                    acc.retain(|t| other.binary_search(t).is_ok());
                }
                acc
            }
            TcDenominator::Any => {
                let mut acc: Vec<u32> = seed
                    .entities
                    .iter()
                    .flat_map(|&e| tables.entity_postings(e).iter().copied())
                    .collect();
                acc.sort_unstable();
                acc.dedup();
                acc
            }
        };
        let label_lm = &bundle.stats.label_lm;
        let labels = seed
            .labels
            .iter()
            .map(|l| {
                tokenize(l)
                    .into_iter()
                    .map(|t| {
                        let p = label_lm.prob(&t);
                        (t, p)
                    })
                    .collect()
            })
            .collect();
        let caption = seed
            .caption_terms
            .iter()
            .map(|t| (t.clone(), bundle.stats.abstract_lm.prob(t)))
            .collect();
        Self {
            bundle,
            params,
            seed_entities: &seed.entities,
            seed_tables,
            labels,
            caption,
        }
    }

    fn entity_similarity(&self, e: u32) -> f64 {
        let ents = &self.bundle.entities;
        let cats = &ents.record(e).categories;
        let kb = self
            .seed_entities
            .iter()
            .map(|&s| jaccard(cats, &ents.record(s).categories))
            .sum::<f64>()
            / self.seed_entities.len() as f64;
        let tc = if self.seed_tables.is_empty() {
            0.0
        } else {
            sorted_intersection_len(self.bundle.tables.entity_postings(e), &self.seed_tables)
                as f64
                / self.seed_tables.len() as f64
        };
        self.params.lambda_e * kb + (1.0 - self.params.lambda_e) * tc
    }

    fn label_likelihood(&self, e: u32) -> f64 {
        if self.labels.is_empty() {
            return 1.0;
        }
        let tv = self.bundle.entities.label_terms(e);
        self.labels
            .iter()
            .map(|toks| {
                toks.iter()
                    .map(|(t, p)| dirichlet_smoothed(tv.tf(t), tv.total(), *p, self.params.mu_labels))
                    .product::<f64>()
            })
            .sum()
    }

    fn caption_likelihood(&self, e: u32) -> f64 {
        if self.caption.is_empty() {
            return 1.0;
        }
        let tv = self.bundle.entities.abstract_terms(e);
        let tables = self.bundle.entity_table_count(e);
        let lambda = self.params.lambda_c;
        self.caption
            .iter()
            .map(|(t, p)| {
                let kb = dirichlet_smoothed(tv.tf(t), tv.total(), *p, self.params.mu_entity);
                let tc = if tables == 0 {
                    0.0
                } else {
                    f64::from(self.bundle.stats.caption_cooccurrence(e, t)) / tables as f64
                };
                lambda * kb + (1.0 - lambda) * tc
            })
            .product()
    }

    fn score(&self, e: u32) -> Suggestion {
        Suggestion::from_components(
            self.bundle.entities.record(e).id.as_str(),
            [
                (ENTITY_SIMILARITY, self.entity_similarity(e)),
                (LABEL_LIKELIHOOD, self.label_likelihood(e)),
                (CAPTION_LIKELIHOOD, self.caption_likelihood(e)),
            ],
        )
    }
}

/// Caption likelihood of a single entity, computed term by term through the
/// public estimators.
pub fn caption_likelihood(
    caption: &str,
    entity: &str,
    bundle: &IndexBundle,
    params: &ScoringParams,
) -> f64 {
    let terms = tokenize(caption);
    if terms.is_empty() {
        return 1.0;
    }
    let Some(e) = bundle.entity_ordinal(entity) else {
        return 0.0;
    };
    let tables = bundle.entity_table_count(e);
    terms
        .iter()
        .map(|t| {
            let kb = dirichlet_lm_prob(
                t,
                bundle.entities.abstract_terms(e),
                &bundle.stats.abstract_lm,
                params.mu_entity,
            );
            let tc = if tables == 0 {
                0.0
            } else {
                f64::from(bundle.stats.caption_cooccurrence(e, t)) / tables as f64
            };
            params.lambda_c * kb + (1.0 - params.lambda_c) * tc
        })
        .product()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{CorpusTable, EntityRecord};

    fn entity(id: &str, cats: &[&str]) -> EntityRecord {
        EntityRecord {
            id: id.into(),
            label: id.into(),
            abstract_text: format!("{id} is a thing"),
            categories: cats.iter().map(|&c| c.into()).collect(),
        }
    }

    fn table(id: &str, ents: &[&str]) -> CorpusTable {
        CorpusTable {
            id: id.into(),
            page_title: String::new(),
            section_title: String::new(),
            caption: String::new(),
            labels: vec!["name".into()],
            core_entities: ents.iter().map(|&s| s.into()).collect(),
            core_column: 0,
            cells: vec![],
        }
    }

    fn seed(ents: &[&str]) -> SeedTable {
        SeedTable::new("", ents.iter().map(|&s| s.into()).collect(), vec![]).unwrap()
    }

    fn targets(s: &[Suggestion]) -> Vec<&str> {
        s.iter().map(|x| x.target.as_str()).collect()
    }

    #[test]
    fn single_category_expansion() {
        let b = IndexBundle::build(
            vec![],
            vec![entity("E1", &["C1"]), entity("E9", &["C1"]), entity("E5", &["C2"])],
        );
        let c = select_row_candidates(&seed(&["E1"]), &b, &Default::default()).unwrap();
        assert_eq!(c.candidates, BTreeSet::from([EntityId::from("E9")]));
        assert_eq!((c.from_kb, c.from_tc), (1, 0));
    }

    #[test]
    fn corpus_candidates_from_shared_table() {
        let b = IndexBundle::build(
            vec![table("T1", &["E1", "E5"])],
            vec![entity("E1", &[]), entity("E5", &[])],
        );
        let c = select_row_candidates(&seed(&["E1"]), &b, &Default::default()).unwrap();
        assert!(c.candidates.contains("E5"));
        assert_eq!((c.from_kb, c.from_tc), (0, 1));
    }

    #[test]
    fn empty_seed_entities_rejected() {
        let b = IndexBundle::build(vec![], vec![entity("E1", &[])]);
        let s = SeedTable::new("cup", vec![], vec!["a".into()]).unwrap();
        assert_eq!(
            select_row_candidates(&s, &b, &Default::default()),
            Err(QueryError::EmptySeedEntities)
        );
    }

    #[test]
    fn identical_categories_score_one() {
        let b = IndexBundle::build(
            vec![],
            vec![entity("E1", &["C1", "C2"]), entity("E2", &["C1", "C2"])],
        );
        let params = ScoringParams {
            lambda_e: 1.0,
            ..Default::default()
        };
        let out = suggest_rows(&seed(&["E1"]), &b, &params, 10).unwrap();
        assert_eq!(targets(&out), ["E2"]);
        assert_eq!(out[0].score, 1.0);
    }

    #[test]
    fn co_occurrence_ranks_first() {
        // E2 and E3 are symmetric except that E3 shares T1 with the seed.
        let b = IndexBundle::build(
            vec![table("T1", &["E1", "E3"]), table("T2", &["E2"]), table("T3", &["E2", "E3", "E9"])],
            vec![
                entity("E1", &["C1"]),
                entity("E2", &["C1"]),
                entity("E3", &["C1"]),
                entity("E9", &[]),
            ],
        );
        let params = ScoringParams {
            lambda_e: 0.0,
            ..Default::default()
        };
        let out = suggest_rows(&seed(&["E1"]), &b, &params, 10).unwrap();
        assert_eq!(targets(&out)[0], "E3");
        assert!(out[0].score > out[1].score);
    }

    #[test]
    fn limit_zero_and_seed_exclusion() {
        let b = IndexBundle::build(
            vec![table("T1", &["E1", "E2"])],
            vec![entity("E1", &["C1"]), entity("E2", &["C1"])],
        );
        let s = seed(&["E1"]);
        let c = select_row_candidates(&s, &b, &Default::default()).unwrap();
        assert!(rank_rows(&s, &c, &b, &Default::default(), 0).unwrap().is_empty());
        assert!(!c.candidates.contains("E1"));
    }

    #[test]
    fn any_denominator_counts_partial_seed_tables() {
        let b = IndexBundle::build(
            vec![table("T1", &["E1", "E3"]), table("T2", &["E2"])],
            vec![entity("E1", &[]), entity("E2", &[]), entity("E3", &[])],
        );
        let s = seed(&["E1", "E2"]);
        let all = ScoringParams {
            lambda_e: 0.0,
            ..Default::default()
        };
        let any = ScoringParams {
            tc_denominator: TcDenominator::Any,
            ..all
        };
        let c = select_row_candidates(&s, &b, &all).unwrap();
        let out = rank_rows(&s, &c, &b, &all, 5).unwrap();
        assert_eq!(out[0].components[ENTITY_SIMILARITY], 0.0);
        let out = rank_rows(&s, &c, &b, &any, 5).unwrap();
        assert_eq!(out[0].components[ENTITY_SIMILARITY], 0.5);
    }
}
