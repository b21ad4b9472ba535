//! Unified label space construction.
//!
//! The largest source label space seeds the unified space. Every other
//! space, in descending size (ties by dataset id), is mapped category by
//! category onto the unified space through embedding cosine similarity:
//! a category joins the most similar unified category when the similarity
//! is strictly above the threshold and is appended as a novel category
//! otherwise. Two categories of one dataset never share a unified index;
//! assignment is greedy in descending similarity, so the loser of a
//! collision falls back to its next candidate (or becomes novel) and is
//! reported as displaced.

mod embedding;
mod io;
mod overrides;

use std::collections::{HashMap, HashSet};

use thiserror::Error;

pub use embedding::{cosine_similarity, embed_category, EmbeddingTable, Fallback};
pub use io::{parse_label_space, parse_report, parse_unified, write_plan, write_report, write_unified};
pub use overrides::{apply_overrides, parse_overrides, Override, OverrideAction};

pub const DEFAULT_THRESHOLD: f64 = 0.8;

#[derive(Debug, Error, PartialEq)]
pub enum LabelError {
    #[error("MissingToken: category {name:?} has no embedding for token {token:?}")]
    MissingToken { name: String, token: String },
    #[error("DimensionMismatch: expected dimension {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("ZeroVector: {0:?} has zero norm")]
    ZeroVector(String),
    #[error("EmptyInput: no label spaces given")]
    EmptyInput,
    #[error("EmptySpace: dataset {0:?} has no categories")]
    EmptySpace(String),
    #[error("DuplicateCategory: {category:?} appears twice in dataset {dataset:?}")]
    DuplicateCategory { dataset: String, category: String },
    #[error("DuplicateDataset: dataset {0:?} was already merged")]
    DuplicateDataset(String),
    #[error("UnknownCategoryInOverride: {0}")]
    UnknownCategoryInOverride(String),
    #[error("ConflictingOverride: {0}")]
    ConflictingOverride(String),
    #[error("BadRecord: line {line}: {text:?}")]
    BadRecord { line: usize, text: String },
}

/// One dataset's ordered categories.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelSpace {
    pub dataset_id: String,
    pub categories: Vec<String>,
}

impl LabelSpace {
    pub fn new<S: Into<String>>(
        dataset_id: impl Into<String>,
        categories: impl IntoIterator<Item = S>,
    ) -> Result<Self, LabelError> {
        let dataset_id = dataset_id.into();
        let categories: Vec<String> = categories.into_iter().map(Into::into).collect();
        if categories.is_empty() {
            return Err(LabelError::EmptySpace(dataset_id));
        }
        let mut seen = HashSet::new();
        for c in &categories {
            if !seen.insert(c.as_str()) {
                return Err(LabelError::DuplicateCategory {
                    dataset: dataset_id,
                    category: c.clone(),
                });
            }
        }
        Ok(Self {
            dataset_id,
            categories,
        })
    }

    pub fn len(&self) -> usize {
        self.categories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.categories.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Provenance {
    pub dataset: String,
    pub category: String,
    pub index: usize,
}

/// Merged categories plus the map from every source category to its index.
#[derive(Debug, Clone, PartialEq)]
pub struct UnifiedLabelSpace {
    pub(crate) categories: Vec<String>,
    /// Name whose embedding represents each unified category.
    pub(crate) origins: Vec<String>,
    pub(crate) provenance: Vec<Provenance>,
    pub(crate) datasets: Vec<String>,
}

impl UnifiedLabelSpace {
    fn seed(space: &LabelSpace) -> Self {
        Self {
            categories: space.categories.clone(),
            origins: space.categories.clone(),
            provenance: space
                .categories
                .iter()
                .enumerate()
                .map(|(index, c)| Provenance {
                    dataset: space.dataset_id.clone(),
                    category: c.clone(),
                    index,
                })
                .collect(),
            datasets: vec![space.dataset_id.clone()],
        }
    }

    pub fn categories(&self) -> &[String] {
        &self.categories
    }

    pub fn provenance(&self) -> &[Provenance] {
        &self.provenance
    }

    /// Datasets in merge order; the first seeded the space.
    pub fn datasets(&self) -> &[String] {
        &self.datasets
    }

    pub fn len(&self) -> usize {
        self.categories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.categories.is_empty()
    }

    pub fn index_of(&self, dataset: &str, category: &str) -> Option<usize> {
        self.provenance
            .iter()
            .find(|p| p.dataset == dataset && p.category == category)
            .map(|p| p.index)
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.categories.iter().position(|c| c == name)
    }

    fn vectors(&self, table: &EmbeddingTable) -> Result<Vec<Vec<f64>>, LabelError> {
        self.origins.iter().map(|o| embed_category(o, table)).collect()
    }

    /// Appends a category, qualifying the name with its dataset on a clash.
    fn append(&mut self, dataset: &str, category: &str) -> usize {
        let name = if self.position(category).is_some() {
            format!("{category} ({dataset})")
        } else {
            category.to_string()
        };
        self.categories.push(name);
        self.origins.push(category.to_string());
        self.categories.len() - 1
    }

    /// Checks the structural invariants: provenance indices in range, each
    /// unified index referenced, no dataset mapping twice onto one index.
    pub fn check(&self) -> bool {
        let mut referenced = vec![false; self.categories.len()];
        let mut per_dataset = HashSet::new();
        for p in &self.provenance {
            if p.index >= self.categories.len() || !per_dataset.insert((&p.dataset, p.index)) {
                return false;
            }
            referenced[p.index] = true;
        }
        self.origins.len() == self.categories.len() && referenced.iter().all(|&r| r)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Similarity,
    Override,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Match {
    pub dataset: String,
    pub category: String,
    pub index: usize,
    pub unified: String,
    pub score: f64,
    pub decided_by: Decision,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Novel {
    pub dataset: String,
    pub category: String,
    pub index: usize,
}

/// A category with two or more unified candidates above the threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct Ambiguity {
    pub dataset: String,
    pub category: String,
    pub candidates: Vec<(usize, f64)>,
}

/// A category whose best candidate was taken by a more similar category of
/// the same dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct Displacement {
    pub dataset: String,
    pub category: String,
    pub wanted: usize,
    pub got: Option<usize>,
}

/// Every mapping decision for the non-seed datasets.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MappingReport {
    pub initial: Option<String>,
    pub matches: Vec<Match>,
    pub novel: Vec<Novel>,
    pub ambiguous: Vec<Ambiguity>,
    pub displaced: Vec<Displacement>,
    pub accepted: Vec<(String, String)>,
}

impl MappingReport {
    fn extend(&mut self, other: MappingReport) {
        self.matches.extend(other.matches);
        self.novel.extend(other.novel);
        self.ambiguous.extend(other.ambiguous);
        self.displaced.extend(other.displaced);
        self.accepted.extend(other.accepted);
    }
}

/// Classifier rows to add when a dataset is merged into a trained space.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HeadExtension {
    pub prefix_len: usize,
    pub appended: Vec<String>,
}

fn merge_into(
    unified: &mut UnifiedLabelSpace,
    space: &LabelSpace,
    table: &EmbeddingTable,
    threshold: f64,
) -> Result<MappingReport, LabelError> {
    if unified.datasets.iter().any(|d| d == &space.dataset_id) {
        return Err(LabelError::DuplicateDataset(space.dataset_id.clone()));
    }
    let targets = unified.vectors(table)?;
    let sources: Vec<Vec<f64>> = space
        .categories
        .iter()
        .map(|c| embed_category(c, table))
        .collect::<Result<_, _>>()?;

    let mut report = MappingReport::default();
    let mut candidates: Vec<Vec<(usize, f64)>> = Vec::with_capacity(sources.len());
    let mut pairs = Vec::new();
    for (i, s) in sources.iter().enumerate() {
        let mut above = Vec::new();
        for (j, t) in targets.iter().enumerate() {
            let sim = cosine_similarity(s, t)?;
            if sim > threshold {
                above.push((j, sim));
                pairs.push((i, j, sim));
            }
        }
        above.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        if above.len() >= 2 {
            report.ambiguous.push(Ambiguity {
                dataset: space.dataset_id.clone(),
                category: space.categories[i].clone(),
                candidates: above.clone(),
            });
        }
        candidates.push(above);
    }

    pairs.sort_by(|a, b| b.2.total_cmp(&a.2).then(a.0.cmp(&b.0)).then(a.1.cmp(&b.1)));
    let mut assigned: Vec<Option<(usize, f64)>> = vec![None; sources.len()];
    let mut taken = HashSet::new();
    for (i, j, sim) in pairs {
        if assigned[i].is_none() && !taken.contains(&j) {
            assigned[i] = Some((j, sim));
            taken.insert(j);
        }
    }

    let dataset = &space.dataset_id;
    for (i, category) in space.categories.iter().enumerate() {
        if let Some(&(wanted, _)) = candidates[i].first() {
            let got = assigned[i].map(|a| a.0);
            if got != Some(wanted) {
                report.displaced.push(Displacement {
                    dataset: dataset.clone(),
                    category: category.clone(),
                    wanted,
                    got,
                });
            }
        }
        match assigned[i] {
            Some((index, score)) => {
                report.matches.push(Match {
                    dataset: dataset.clone(),
                    category: category.clone(),
                    index,
                    unified: unified.categories[index].clone(),
                    score,
                    decided_by: Decision::Similarity,
                });
                unified.provenance.push(Provenance {
                    dataset: dataset.clone(),
                    category: category.clone(),
                    index,
                });
            }
            None => {
                let index = unified.append(dataset, category);
                report.novel.push(Novel {
                    dataset: dataset.clone(),
                    category: category.clone(),
                    index,
                });
                unified.provenance.push(Provenance {
                    dataset: dataset.clone(),
                    category: category.clone(),
                    index,
                });
            }
        }
    }
    unified.datasets.push(dataset.clone());
    Ok(report)
}

/// Builds the unified space from scratch.
pub fn build_unified(
    spaces: &[LabelSpace],
    table: &EmbeddingTable,
    threshold: f64,
) -> Result<(UnifiedLabelSpace, MappingReport), LabelError> {
    if spaces.is_empty() {
        return Err(LabelError::EmptyInput);
    }
    let mut seen = HashSet::new();
    for s in spaces {
        if !seen.insert(s.dataset_id.as_str()) {
            return Err(LabelError::DuplicateDataset(s.dataset_id.clone()));
        }
    }
    let mut order: Vec<&LabelSpace> = spaces.iter().collect();
    order.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a.dataset_id.cmp(&b.dataset_id)));

    // every category of the seed must be embeddable too
    for c in &order[0].categories {
        embed_category(c, table)?;
    }
    let mut unified = UnifiedLabelSpace::seed(order[0]);
    let mut report = MappingReport {
        initial: Some(order[0].dataset_id.clone()),
        ..MappingReport::default()
    };
    for space in &order[1..] {
        let r = merge_into(&mut unified, space, table, threshold)?;
        report.extend(r);
    }
    Ok((unified, report))
}

/// Merges one new dataset into an existing unified space.
pub fn merge_new_dataset(
    unified: &UnifiedLabelSpace,
    space: &LabelSpace,
    table: &EmbeddingTable,
    threshold: f64,
) -> Result<(UnifiedLabelSpace, HeadExtension, MappingReport), LabelError> {
    let mut next = unified.clone();
    let prefix_len = next.len();
    let report = merge_into(&mut next, space, table, threshold)?;
    let extension = HeadExtension {
        prefix_len,
        appended: next.categories[prefix_len..].to_vec(),
    };
    Ok((next, extension, report))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SurgeryEntry {
    Exact(usize),
    Nearest(usize, f64),
}

impl SurgeryEntry {
    pub fn index(&self) -> usize {
        match *self {
            SurgeryEntry::Exact(i) | SurgeryEntry::Nearest(i, _) => i,
        }
    }
}

/// One source row of the unified head per target category.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadSurgeryPlan {
    pub entries: Vec<(String, SurgeryEntry)>,
}

impl HeadSurgeryPlan {
    pub fn rows(&self) -> Vec<usize> {
        self.entries.iter().map(|(_, e)| e.index()).collect()
    }
}

/// Maps each target category to its most similar unified category (ties to
/// the lowest index): `Exact` above the threshold, `Nearest` otherwise.
pub fn head_surgery_plan(
    unified: &UnifiedLabelSpace,
    target: &LabelSpace,
    table: &EmbeddingTable,
    threshold: f64,
) -> Result<HeadSurgeryPlan, LabelError> {
    if unified.is_empty() {
        return Err(LabelError::EmptyInput);
    }
    let vectors = unified.vectors(table)?;
    let mut cache: HashMap<&str, Vec<f64>> = HashMap::new();
    let mut entries = Vec::with_capacity(target.len());
    for c in &target.categories {
        let v = match cache.get(c.as_str()) {
            Some(v) => v.clone(),
            None => {
                let v = embed_category(c, table)?;
                cache.insert(c, v.clone());
                v
            }
        };
        let mut best = (0usize, f64::NEG_INFINITY);
        for (j, u) in vectors.iter().enumerate() {
            let sim = cosine_similarity(&v, u)?;
            if sim > best.1 {
                best = (j, sim);
            }
        }
        let entry = if best.1 > threshold {
            SurgeryEntry::Exact(best.0)
        } else {
            SurgeryEntry::Nearest(best.0, best.1)
        };
        entries.push((c.clone(), entry));
    }
    Ok(HeadSurgeryPlan { entries })
}
