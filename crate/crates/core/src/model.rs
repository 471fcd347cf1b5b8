//! Domain vocabulary shared by every module. No I/O and no scoring here.

use std::borrow::Borrow;
use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::ModelError;
use crate::text::normalize_label;

macro_rules! string_id {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub String);

        impl $name {
            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                Self(s.to_owned())
            }
        }

        impl From<String> for $name {
            fn from(s: String) -> Self {
                Self(s)
            }
        }

        impl Borrow<str> for $name {
            fn borrow(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }
    };
}

string_id!(
    /// Knowledge-base entity identifier.
    EntityId
);
string_id!(
    /// Corpus table identifier, unique across the corpus.
    TableId
);
string_id!(
    /// Knowledge-base category identifier.
    CategoryId
);

/// The user's in-progress table: caption, core column entities and heading
/// labels. Construct with [`SeedTable::new`], which enforces uniqueness.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeedTable {
    caption: String,
    entities: Vec<EntityId>,
    labels: Vec<String>,
    #[serde(skip)]
    normalized_labels: Vec<String>,
}

impl SeedTable {
    pub fn new(
        caption: impl Into<String>,
        entities: Vec<EntityId>,
        labels: Vec<String>,
    ) -> Result<Self, ModelError> {
        let mut seen = HashSet::new();
        for e in &entities {
            if e.0.is_empty() {
                return Err(ModelError::EmptyEntity);
            }
            if !seen.insert(e.as_str()) {
                return Err(ModelError::DuplicateEntity(e.0.clone()));
            }
        }
        let mut normalized_labels = Vec::with_capacity(labels.len());
        for raw in &labels {
            let norm = normalize_label(raw);
            if norm.is_empty() {
                return Err(ModelError::EmptyLabel(raw.clone()));
            }
            if normalized_labels.contains(&norm) {
                return Err(ModelError::DuplicateLabel(raw.clone()));
            }
            normalized_labels.push(norm);
        }
        Ok(Self {
            caption: caption.into(),
            entities,
            labels,
            normalized_labels,
        })
    }

    pub fn caption(&self) -> &str {
        &self.caption
    }

    pub fn entities(&self) -> &[EntityId] {
        &self.entities
    }

    /// Raw (display) labels, in the user's order.
    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Labels in comparison form, parallel to [`SeedTable::labels`].
    pub fn normalized_labels(&self) -> &[String] {
        &self.normalized_labels
    }

    pub fn is_empty(&self) -> bool {
        self.caption.trim().is_empty() && self.entities.is_empty() && self.labels.is_empty()
    }

    /// Same caption and labels, core column cut to the first `n` entities.
    pub fn with_entity_prefix(&self, n: usize) -> Self {
        let mut seed = self.clone();
        seed.entities.truncate(n);
        seed
    }

    /// Same caption and entities, labels cut to the first `n`.
    pub fn with_label_prefix(&self, n: usize) -> Self {
        let mut seed = self.clone();
        seed.labels.truncate(n);
        seed.normalized_labels.truncate(n);
        seed
    }
}

#[derive(Deserialize)]
struct RawSeed {
    #[serde(default)]
    caption: String,
    #[serde(default)]
    entities: Vec<EntityId>,
    #[serde(default)]
    labels: Vec<String>,
}

impl<'de> Deserialize<'de> for SeedTable {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = RawSeed::deserialize(d)?;
        SeedTable::new(raw.caption, raw.entities, raw.labels).map_err(serde::de::Error::custom)
    }
}

/// One cell of a corpus table.
#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
pub struct Cell {
    pub text: String,
    #[serde(rename = "entityId", default)]
    pub entity_id: Option<EntityId>,
}

// Binary formats need a fixed field count; JSON omits an absent link.
impl Serialize for Cell {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let skip = s.is_human_readable() && self.entity_id.is_none();
        let mut st = s.serialize_struct("Cell", if skip { 1 } else { 2 })?;
        st.serialize_field("text", &self.text)?;
        if skip {
            st.skip_field("entityId")?;
        } else {
            st.serialize_field("entityId", &self.entity_id)?;
        }
        st.end()
    }
}

impl Cell {
    pub fn text(text: impl Into<String>) -> Self {
        Self {
            text: text.into(),
            entity_id: None,
        }
    }

    pub fn linked(text: impl Into<String>, entity: impl Into<EntityId>) -> Self {
        Self {
            text: text.into(),
            entity_id: Some(entity.into()),
        }
    }
}

/// One table of the corpus, after ingestion.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusTable {
    pub id: TableId,
    pub page_title: String,
    pub section_title: String,
    pub caption: String,
    /// Raw heading labels.
    pub labels: Vec<String>,
    /// Distinct entity ids of the core column, in row order.
    pub core_entities: Vec<EntityId>,
    pub core_column: usize,
    pub cells: Vec<Vec<Cell>>,
}

/// A knowledge-base entity.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityRecord {
    pub id: EntityId,
    pub label: String,
    #[serde(rename = "abstract")]
    pub abstract_text: String,
    pub categories: BTreeSet<CategoryId>,
}

/// A ranked recommendation.
///
/// The score is always the product of the component values, so the
/// breakdown fully explains the ranking.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Suggestion {
    pub target: String,
    pub score: f64,
    pub components: BTreeMap<String, f64>,
}

impl Suggestion {
    pub fn from_components<'a>(
        target: impl Into<String>,
        components: impl IntoIterator<Item = (&'a str, f64)>,
    ) -> Self {
        let components: BTreeMap<String, f64> = components
            .into_iter()
            .map(|(k, v)| (k.to_owned(), v))
            .collect();
        let score = components.values().product();
        Self {
            target: target.into(),
            score,
            components,
        }
    }
}

/// Orders suggestions by descending score, ties by ascending target.
pub fn rank_order(a: &Suggestion, b: &Suggestion) -> std::cmp::Ordering {
    b.score
        .total_cmp(&a.score)
        .then_with(|| a.target.cmp(&b.target))
}

/// Which seed-table set forms the denominator of the table-corpus entity
/// similarity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TcDenominator {
    /// Tables whose core column holds every seed entity.
    #[default]
    All,
    /// Tables whose core column holds at least one seed entity.
    Any,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default, deny_unknown_fields)]
pub struct ScoringParams {
    /// Weight of the knowledge-base (category Jaccard) side of entity similarity.
    pub lambda_e: f64,
    /// Weight of the entity language model side of caption likelihood.
    pub lambda_c: f64,
    /// Dirichlet prior for the column-label language model.
    pub mu_labels: f64,
    /// Dirichlet prior for the entity abstract language model.
    pub mu_entity: f64,
    pub bm25_k1: f64,
    pub bm25_b: f64,
    /// Per-route cap on tables pulled in by caption, entity or label match.
    pub top_k_tables: usize,
    pub tc_denominator: TcDenominator,
}

impl Default for ScoringParams {
    fn default() -> Self {
        Self {
            lambda_e: 0.5,
            lambda_c: 0.5,
            mu_labels: 2000.0,
            mu_entity: 2000.0,
            bm25_k1: 1.2,
            bm25_b: 0.75,
            top_k_tables: 256,
            tc_denominator: TcDenominator::All,
        }
    }
}

impl ScoringParams {
    pub fn validate(self) -> Result<Self, ModelError> {
        fn unit(name: &'static str, v: f64) -> Result<(), ModelError> {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(ModelError::InvalidParam {
                    name,
                    value: v,
                    expected: "must lie in [0, 1]",
                })
            }
        }
        fn positive(name: &'static str, v: f64) -> Result<(), ModelError> {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(ModelError::InvalidParam {
                    name,
                    value: v,
                    expected: "must be positive and finite",
                })
            }
        }
        unit("lambdaE", self.lambda_e)?;
        unit("lambdaC", self.lambda_c)?;
        positive("muLabels", self.mu_labels)?;
        positive("muEntity", self.mu_entity)?;
        positive("bm25K1", self.bm25_k1)?;
        unit("bm25B", self.bm25_b)?;
        if self.top_k_tables == 0 {
            return Err(ModelError::InvalidParam {
                name: "topKTables",
                value: 0.0,
                expected: "must be a positive integer",
            });
        }
        Ok(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(xs: &[&str]) -> Vec<EntityId> {
        xs.iter().map(|&s| s.into()).collect()
    }

    #[test]
    fn seed_rejects_duplicates() {
        assert_eq!(
            SeedTable::new("", ids(&["E1", "E1"]), vec![]),
            Err(ModelError::DuplicateEntity("E1".into()))
        );
        assert_eq!(
            SeedTable::new("", vec![], vec!["Team".into(), " team ".into()]),
            Err(ModelError::DuplicateLabel(" team ".into()))
        );
        assert!(matches!(
            SeedTable::new("", vec![], vec!["  ".into()]),
            Err(ModelError::EmptyLabel(_))
        ));
    }

    #[test]
    fn seed_allows_empty_parts() {
        let seed = SeedTable::new("", vec![], vec![]).unwrap();
        assert!(seed.is_empty());
        let seed = SeedTable::new("cup", vec![], vec!["Wins ".into()]).unwrap();
        assert_eq!(seed.normalized_labels(), ["wins"]);
        assert_eq!(seed.labels(), ["Wins "]);
    }

    #[test]
    fn seed_json_validates() {
        let ok: SeedTable =
            serde_json::from_str(r#"{"caption":"c","entities":["E1"],"labels":["a"]}"#).unwrap();
        assert_eq!(ok.entities(), ids(&["E1"]).as_slice());
        assert!(serde_json::from_str::<SeedTable>(r#"{"entities":["E1","E1"]}"#).is_err());
    }

    #[test]
    fn suggestion_score_is_component_product() {
        let s = Suggestion::from_components("E1", [("a", 0.5), ("b", 0.25), ("c", 2.0)]);
        assert_eq!(s.score, 0.25);
        let empty = Suggestion::from_components("x", []);
        assert_eq!(empty.score, 1.0);
    }

    #[test]
    fn params_bounds() {
        assert!(ScoringParams::default().validate().is_ok());
        let bad = ScoringParams {
            lambda_e: 1.5,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = ScoringParams {
            mu_labels: 0.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = ScoringParams {
            top_k_tables: 0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let parsed: ScoringParams = serde_json::from_str(r#"{"lambdaE":0.3}"#).unwrap();
        assert_eq!(parsed.lambda_e, 0.3);
        assert_eq!(parsed.mu_entity, 2000.0);
    }
}
