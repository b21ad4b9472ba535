//! Task-specific data selection.
//!
//! Source and target images are summarised per category by a represent
//! vector, the mean of that image's instance features for the category.
//! Retrieval ranks same-category source images by cosine similarity to the
//! target represent vectors. Zero vectors have similarity 0 with everything.

mod features;

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::io::{self, Write};

use rand::seq::SliceRandom;
use thiserror::Error;

use crate::rng;

pub use features::{load_features, parse_features, write_features, MAGIC, VERSION};

pub const DEFAULT_BUDGET: usize = 1000;

#[derive(Debug, Error)]
pub enum SelectError {
    #[error("BadRecord: record {line}: {reason}")]
    BadRecord { line: usize, reason: String },
    #[error("DimensionMismatch: record {record} has {found} values, expected {expected}")]
    DimensionMismatch { record: usize, expected: usize, found: usize },
    #[error("NoSharedCategory: source and target have no category in common")]
    NoSharedCategory,
    #[error("EmptySource: no source images")]
    EmptySource,
    #[error("InvalidBudget: budget must be at least 1")]
    InvalidBudget,
    #[error("UnknownCategory: category {category} outside a {size}-category space (record {record})")]
    UnknownCategory { record: usize, category: u32, size: usize },
    #[error("Io: {0}")]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct InstanceFeature {
    pub image: String,
    pub dataset: String,
    /// Index in the unified label space.
    pub category: u32,
    pub vector: Vec<f32>,
}

impl InstanceFeature {
    pub fn new(image: impl Into<String>, dataset: impl Into<String>, category: u32, vector: Vec<f32>) -> Self {
        Self {
            image: image.into(),
            dataset: dataset.into(),
            category,
            vector,
        }
    }
}

/// Fails on the first category id that is not below `size`.
pub fn check_categories(features: &[InstanceFeature], size: usize) -> Result<(), SelectError> {
    match features.iter().position(|f| f.category as usize >= size) {
        Some(i) => Err(SelectError::UnknownCategory {
            record: i + 1,
            category: features[i].category,
            size,
        }),
        None => Ok(()),
    }
}

/// Represent vectors keyed by `(image, category)`, iterated in key order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Represents {
    map: BTreeMap<(String, u32), Vec<f64>>,
}

impl Represents {
    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn get(&self, image: &str, category: u32) -> Option<&[f64]> {
        self.map.get(&(image.to_string(), category)).map(Vec::as_slice)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, u32, &[f64])> {
        self.map.iter().map(|((i, c), v)| (i.as_str(), *c, v.as_slice()))
    }

    pub fn images(&self) -> BTreeSet<&str> {
        self.map.keys().map(|(i, _)| i.as_str()).collect()
    }

    pub fn categories(&self) -> BTreeSet<u32> {
        self.map.keys().map(|(_, c)| *c).collect()
    }

    pub fn insert(&mut self, image: impl Into<String>, category: u32, vector: Vec<f64>) {
        self.map.insert((image.into(), category), vector);
    }

    /// Multiplies every vector by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            map: self
                .map
                .iter()
                .map(|(k, v)| (k.clone(), v.iter().map(|x| x * factor).collect()))
                .collect(),
        }
    }
}

/// Mean instance vector per `(image, category)`, accumulated in record
/// order in f64.
pub fn represent_vectors(features: &[InstanceFeature]) -> Represents {
    let mut sums: BTreeMap<(String, u32), (Vec<f64>, usize)> = BTreeMap::new();
    for f in features {
        let entry = sums
            .entry((f.image.clone(), f.category))
            .or_insert_with(|| (vec![0.0; f.vector.len()], 0));
        for (s, &v) in entry.0.iter_mut().zip(&f.vector) {
            *s += f64::from(v);
        }
        entry.1 += 1;
    }
    Represents {
        map: sums
            .into_iter()
            .map(|(k, (s, n))| (k, s.into_iter().map(|x| x / n as f64).collect()))
            .collect(),
    }
}

fn unit(v: &[f64]) -> Vec<f64> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        return vec![0.0; v.len()];
    }
    v.iter().map(|x| x / norm).collect()
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    unit(a).iter().zip(unit(b)).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Strategy {
    /// Up to `k` nearest sources per target unit; `None` picks
    /// `max(1, ceil(budget / units))`. Units are `(image, category)` pairs,
    /// or whole target images when `per_image` is set.
    TopK { k: Option<usize>, per_image: bool },
    MostSimilar,
    Random,
}

impl Strategy {
    pub fn top_k(k: usize) -> Self {
        Strategy::TopK {
            k: Some(k),
            per_image: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Selected {
    pub image: String,
    /// Similarity and the `(target image, category)` that matched; absent
    /// for random selection.
    pub score: Option<f64>,
    pub target: Option<String>,
    pub category: Option<u32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionResult {
    pub strategy: Strategy,
    pub budget: usize,
    pub selected: Vec<Selected>,
}

impl SelectionResult {
    pub fn images(&self) -> Vec<&str> {
        self.selected.iter().map(|s| s.image.as_str()).collect()
    }

    /// Lines `rank<TAB>image<TAB>score<TAB>target<TAB>category`, ranks from
    /// 1; `-` marks absent provenance.
    pub fn write_lines<W: Write>(&self, mut w: W) -> io::Result<()> {
        for (i, s) in self.selected.iter().enumerate() {
            let dash = || "-".to_string();
            writeln!(
                w,
                "{}\t{}\t{}\t{}\t{}",
                i + 1,
                s.image,
                s.score.map_or_else(dash, |v| v.to_string()),
                s.target.clone().unwrap_or_else(dash),
                s.category.map_or_else(dash, |c| c.to_string()),
            )?;
        }
        Ok(())
    }
}

struct Scored<'a> {
    score: f64,
    source: &'a str,
    target: &'a str,
    category: u32,
}

fn by_score(a: &Scored, b: &Scored) -> std::cmp::Ordering {
    b.score
        .total_cmp(&a.score)
        .then_with(|| a.source.cmp(b.source))
        .then_with(|| a.target.cmp(b.target))
        .then_with(|| a.category.cmp(&b.category))
}

fn emit(s: &Scored) -> Selected {
    Selected {
        image: s.source.to_string(),
        score: Some(s.score),
        target: Some(s.target.to_string()),
        category: Some(s.category),
    }
}

/// Unit-normalised source vectors grouped by category.
fn by_category(source: &Represents) -> BTreeMap<u32, Vec<(&str, Vec<f64>)>> {
    let mut out: BTreeMap<u32, Vec<(&str, Vec<f64>)>> = BTreeMap::new();
    for (img, c, v) in source.iter() {
        out.entry(c).or_default().push((img, unit(v)));
    }
    out
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn most_similar<'a>(source: &'a Represents, target: &'a Represents, budget: usize) -> Vec<Selected> {
    let sources = by_category(source);
    let mut pairs = Vec::new();
    for (t, c, v) in target.iter() {
        let Some(cands) = sources.get(&c) else { continue };
        let tv = unit(v);
        for (s, sv) in cands {
            pairs.push(Scored {
                score: dot(sv, &tv),
                source: s,
                target: t,
                category: c,
            });
        }
    }
    pairs.sort_by(by_score);
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for p in &pairs {
        if out.len() == budget {
            break;
        }
        if seen.insert(p.source) {
            out.push(emit(p));
        }
    }
    out
}

fn top_k<'a>(
    source: &'a Represents,
    target: &'a Represents,
    budget: usize,
    k: Option<usize>,
    per_image: bool,
) -> Vec<Selected> {
    let sources = by_category(source);
    // one ranked candidate list per target unit, in key order
    let mut units: BTreeMap<(&str, Option<u32>), Vec<Scored>> = BTreeMap::new();
    for (t, c, v) in target.iter() {
        let Some(cands) = sources.get(&c) else { continue };
        let tv = unit(v);
        let list = units.entry((t, (!per_image).then_some(c))).or_default();
        list.extend(cands.iter().map(|(s, sv)| Scored {
            score: dot(sv, &tv),
            source: s,
            target: t,
            category: c,
        }));
    }
    let k = k.unwrap_or_else(|| budget.div_ceil(units.len().max(1)).max(1));
    let lists: Vec<Vec<Scored>> = units
        .into_values()
        .map(|mut l| {
            l.sort_by(by_score);
            // a whole-image unit may list one source under several categories
            let mut seen = HashSet::new();
            l.retain(|s| seen.insert(s.source));
            l.truncate(k);
            l
        })
        .collect();
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for round in 0..k {
        for l in &lists {
            if out.len() == budget {
                return out;
            }
            if let Some(s) = l.get(round) {
                if seen.insert(s.source) {
                    out.push(emit(s));
                }
            }
        }
    }
    out
}

/// Picks up to `budget` distinct source images for the target.
pub fn select(
    strategy: Strategy,
    source: &Represents,
    target: &Represents,
    budget: usize,
    seed: u64,
) -> Result<SelectionResult, SelectError> {
    if budget == 0 {
        return Err(SelectError::InvalidBudget);
    }
    if source.is_empty() {
        return Err(SelectError::EmptySource);
    }
    let needs_overlap = !matches!(strategy, Strategy::Random);
    if needs_overlap && source.categories().is_disjoint(&target.categories()) {
        return Err(SelectError::NoSharedCategory);
    }
    let selected = match strategy {
        Strategy::MostSimilar => most_similar(source, target, budget),
        Strategy::TopK { k, per_image } => top_k(source, target, budget, k, per_image),
        Strategy::Random => {
            let mut ids: Vec<&str> = source.images().into_iter().collect();
            ids.shuffle(&mut rng::derived(seed, "tsds-random"));
            ids.truncate(budget);
            ids.into_iter()
                .map(|i| Selected {
                    image: i.to_string(),
                    score: None,
                    target: None,
                    category: None,
                })
                .collect()
        }
    };
    Ok(SelectionResult {
        strategy,
        budget,
        selected,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reps(items: &[(&str, u32, [f64; 2])]) -> Represents {
        let mut r = Represents::default();
        for (i, c, v) in items {
            r.insert(*i, *c, v.to_vec());
        }
        r
    }

    #[test]
    fn represent_means() {
        let f = vec![
            InstanceFeature::new("a", "d", 0, vec![1.0, 0.0]),
            InstanceFeature::new("a", "d", 0, vec![0.0, 1.0]),
            InstanceFeature::new("a", "d", 2, vec![3.0, 4.0]),
            InstanceFeature::new("b", "d", 0, vec![2.0, 2.0]),
        ];
        let r = represent_vectors(&f);
        assert_eq!(r.len(), 3);
        assert_eq!(r.get("a", 0).unwrap(), &[0.5, 0.5]);
        assert_eq!(r.get("a", 2).unwrap(), &[3.0, 4.0]);
        assert_eq!(r.get("b", 0).unwrap(), &[2.0, 2.0]);
        assert!(check_categories(&f, 3).is_ok());
        assert!(matches!(check_categories(&f, 2), Err(SelectError::UnknownCategory { record: 3, .. })));
    }

    #[test]
    fn most_similar_crafted_fixture() {
        // cos to t1=(1,0): s1 1.0, s2 0.6, s3 0; cos to t2=(0,1): s1 0, s2 0.8, s3 1.0
        let src = reps(&[("s1", 0, [1.0, 0.0]), ("s2", 0, [3.0, 4.0]), ("s3", 0, [0.0, 2.0])]);
        let tgt = reps(&[("t1", 0, [1.0, 0.0]), ("t2", 0, [0.0, 5.0])]);
        let r = select(Strategy::MostSimilar, &src, &tgt, 2, 0).unwrap();
        assert_eq!(r.images(), vec!["s1", "s3"]);
        assert_eq!(r.selected[1].target.as_deref(), Some("t2"));
        let all = select(Strategy::MostSimilar, &src, &tgt, 10, 0).unwrap();
        assert_eq!(all.images(), vec!["s1", "s3", "s2"]);
        assert!((all.selected[2].score.unwrap() - 0.8).abs() < 1e-15);
    }

    #[test]
    fn top_one_is_per_target_argmax() {
        let src = reps(&[("s1", 0, [1.0, 0.0]), ("s2", 0, [3.0, 4.0]), ("s3", 1, [0.0, 2.0])]);
        let tgt = reps(&[("t1", 0, [0.6, 0.8]), ("t1", 1, [1.0, 1.0]), ("t2", 0, [1.0, 0.1])]);
        let r = select(Strategy::top_k(1), &src, &tgt, 3, 0).unwrap();
        assert_eq!(r.images(), vec!["s2", "s3", "s1"]);
    }

    #[test]
    fn default_k_and_round_robin() {
        let src = reps(&[
            ("a", 0, [1.0, 0.0]),
            ("b", 0, [0.9, 0.1]),
            ("c", 0, [0.0, 1.0]),
            ("d", 0, [0.1, 0.9]),
        ]);
        let tgt = reps(&[("t1", 0, [1.0, 0.0]), ("t2", 0, [0.0, 1.0])]);
        let strat = Strategy::TopK {
            k: None,
            per_image: false,
        };
        let r = select(strat, &src, &tgt, 4, 0).unwrap();
        assert_eq!(r.images(), vec!["a", "c", "b", "d"]);
        let r3 = select(strat, &src, &tgt, 3, 0).unwrap();
        assert_eq!(r3.images(), vec!["a", "c", "b"]);
    }

    #[test]
    fn budget_and_errors() {
        let src = reps(&[("s1", 0, [1.0, 0.0]), ("s2", 1, [0.0, 1.0])]);
        let tgt = reps(&[("t", 0, [1.0, 1.0])]);
        for s in [Strategy::MostSimilar, Strategy::top_k(5), Strategy::Random] {
            assert!(matches!(select(s, &src, &tgt, 0, 0), Err(SelectError::InvalidBudget)));
            assert!(matches!(select(s, &Represents::default(), &tgt, 5, 0), Err(SelectError::EmptySource)));
        }
        let other = reps(&[("t", 7, [1.0, 1.0])]);
        assert!(matches!(select(Strategy::MostSimilar, &src, &other, 5, 0), Err(SelectError::NoSharedCategory)));
        let r = select(Strategy::Random, &src, &other, 5, 0).unwrap();
        assert_eq!(r.selected.len(), 2);
    }

    #[test]
    fn random_is_seeded() {
        let items: Vec<(String, u32, [f64; 2])> = (0..50).map(|i| (format!("s{i:02}"), 0, [1.0, 0.0])).collect();
        let mut src = Represents::default();
        for (i, c, v) in &items {
            src.insert(i.clone(), *c, v.to_vec());
        }
        let tgt = reps(&[("t", 0, [1.0, 0.0])]);
        let a = select(Strategy::Random, &src, &tgt, 10, 3).unwrap();
        let b = select(Strategy::Random, &src, &tgt, 10, 3).unwrap();
        let c = select(Strategy::Random, &src, &tgt, 10, 4).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(a.images().iter().collect::<HashSet<_>>().len(), 10);
    }

    #[test]
    fn output_lines() {
        let src = reps(&[("s1", 0, [1.0, 0.0])]);
        let tgt = reps(&[("t", 0, [1.0, 0.0])]);
        let mut buf = Vec::new();
        select(Strategy::MostSimilar, &src, &tgt, 5, 0).unwrap().write_lines(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "1\ts1\t1\tt\t0\n");
    }
}
