//! Human verification of candidate mappings.
//!
//! Override lines: `accept|reject|redirect <dataset>:<category> [-> <unified>]`.
//! A rejected match becomes a novel category. A redirect wins regardless of
//! similarity but may not make one dataset map two categories onto one
//! index. A novel category left unreferenced by a redirect is dropped and
//! later indices shift down by one.

use super::{
    cosine_similarity, embed_category, Decision, EmbeddingTable, LabelError, MappingReport, Match, Novel,
    Provenance, UnifiedLabelSpace,
};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OverrideAction {
    Accept,
    Reject,
    Redirect(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Override {
    pub dataset: String,
    pub category: String,
    pub action: OverrideAction,
}

pub fn parse_overrides(text: &str) -> Result<Vec<Override>, LabelError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = || LabelError::BadRecord {
            line: i + 1,
            text: raw.to_string(),
        };
        let (verb, rest) = line.split_once(char::is_whitespace).ok_or_else(bad)?;
        let (subject, target) = match rest.split_once("->") {
            Some((s, t)) => (s.trim(), Some(t.trim().to_string())),
            None => (rest.trim(), None),
        };
        let (dataset, category) = subject.split_once(':').ok_or_else(bad)?;
        let action = match (verb, target) {
            ("accept", None) => OverrideAction::Accept,
            ("reject", None) => OverrideAction::Reject,
            ("redirect", Some(t)) if !t.is_empty() => OverrideAction::Redirect(t),
            _ => return Err(bad()),
        };
        out.push(Override {
            dataset: dataset.trim().to_string(),
            category: category.trim().to_string(),
            action,
        });
    }
    Ok(out)
}

fn set_provenance(u: &mut UnifiedLabelSpace, dataset: &str, category: &str, index: usize) {
    for p in &mut u.provenance {
        if p.dataset == dataset && p.category == category {
            p.index = index;
        }
    }
}

/// Drops unified index `idx` when nothing references it anymore.
fn drop_if_orphan(u: &mut UnifiedLabelSpace, report: &mut MappingReport, idx: usize) {
    if u.provenance.iter().any(|p| p.index == idx) {
        return;
    }
    u.categories.remove(idx);
    u.origins.remove(idx);
    let shift = |i: &mut usize| {
        if *i > idx {
            *i -= 1;
        }
    };
    u.provenance.iter_mut().for_each(|p: &mut Provenance| shift(&mut p.index));
    report.matches.iter_mut().for_each(|m| shift(&mut m.index));
    report.novel.iter_mut().for_each(|n| shift(&mut n.index));
}

/// Applies overrides in file order and returns the revised space and report.
pub fn apply_overrides(
    unified: &UnifiedLabelSpace,
    report: &MappingReport,
    overrides: &[Override],
    table: &EmbeddingTable,
) -> Result<(UnifiedLabelSpace, MappingReport), LabelError> {
    let mut u = unified.clone();
    let mut r = report.clone();
    for o in overrides {
        let unknown = || LabelError::UnknownCategoryInOverride(format!("{}:{}", o.dataset, o.category));
        let matched = r
            .matches
            .iter()
            .position(|m| m.dataset == o.dataset && m.category == o.category);
        let novel = r
            .novel
            .iter()
            .position(|n| n.dataset == o.dataset && n.category == o.category);
        if matched.is_none() && novel.is_none() {
            return Err(unknown());
        }
        match &o.action {
            OverrideAction::Accept => {
                let key = (o.dataset.clone(), o.category.clone());
                if !r.accepted.contains(&key) {
                    r.accepted.push(key);
                }
            }
            OverrideAction::Reject => {
                if let Some(mi) = matched {
                    r.matches.remove(mi);
                    let index = u.append(&o.dataset, &o.category);
                    set_provenance(&mut u, &o.dataset, &o.category, index);
                    r.novel.push(Novel {
                        dataset: o.dataset.clone(),
                        category: o.category.clone(),
                        index,
                    });
                }
            }
            OverrideAction::Redirect(target) => {
                let index = u.position(target).ok_or_else(|| {
                    LabelError::UnknownCategoryInOverride(format!("unified category {target:?}"))
                })?;
                let score = cosine_similarity(
                    &embed_category(&o.category, table)?,
                    &embed_category(&u.origins[index], table)?,
                )?;
                let previous = u.index_of(&o.dataset, &o.category).ok_or_else(unknown)?;
                let clash = u
                    .provenance
                    .iter()
                    .any(|p| p.dataset == o.dataset && p.category != o.category && p.index == index);
                if clash {
                    return Err(LabelError::ConflictingOverride(format!(
                        "{}:{} -> {target}: dataset already maps another category there",
                        o.dataset, o.category
                    )));
                }
                if let Some(mi) = matched {
                    r.matches.remove(mi);
                }
                if let Some(ni) = novel {
                    r.novel.remove(ni);
                }
                set_provenance(&mut u, &o.dataset, &o.category, index);
                r.matches.push(Match {
                    dataset: o.dataset.clone(),
                    category: o.category.clone(),
                    index,
                    unified: target.clone(),
                    score,
                    decided_by: Decision::Override,
                });
                if previous != index {
                    drop_if_orphan(&mut u, &mut r, previous);
                }
            }
        }
    }
    Ok((u, r))
}

#[cfg(test)]
mod tests {
    use super::super::{build_unified, tests::table, LabelSpace, DEFAULT_THRESHOLD};
    use super::*;

    fn fixture() -> (UnifiedLabelSpace, MappingReport) {
        let spaces = [
            LabelSpace::new("a", ["car", "dog"]).unwrap(),
            LabelSpace::new("b", ["automobile", "zebra"]).unwrap(),
        ];
        build_unified(&spaces, &table(), DEFAULT_THRESHOLD).unwrap()
    }

    #[test]
    fn parse_lines() {
        let o = parse_overrides("# c\naccept b:automobile\nredirect b:police car -> car\n").unwrap();
        assert_eq!(o.len(), 2);
        assert_eq!(o[1].category, "police car");
        assert_eq!(o[1].action, OverrideAction::Redirect("car".into()));
        assert!(parse_overrides("redirect b:x").is_err());
        assert!(parse_overrides("drop b:x").is_err());
    }

    #[test]
    fn empty_overrides_change_nothing() {
        let (u, r) = fixture();
        let (u2, r2) = apply_overrides(&u, &r, &[], &table()).unwrap();
        assert_eq!((u2, r2), (u, r));
    }

    #[test]
    fn reject_appends_novel() {
        let (u, r) = fixture();
        let o = parse_overrides("reject b:automobile").unwrap();
        let (u2, r2) = apply_overrides(&u, &r, &o, &table()).unwrap();
        assert_eq!(u2.categories(), ["car", "dog", "zebra", "automobile"]);
        assert_eq!(u2.index_of("b", "automobile"), Some(3));
        assert!(r2.matches.is_empty());
        assert!(u2.check());
    }

    #[test]
    fn redirect_wins_regardless_of_similarity() {
        let (u, r) = fixture();
        let o = parse_overrides("redirect b:automobile -> dog").unwrap();
        let (u2, r2) = apply_overrides(&u, &r, &o, &table()).unwrap();
        assert_eq!(u2.index_of("b", "automobile"), Some(1));
        assert_eq!(r2.matches[0].decided_by, Decision::Override);

        // a redirected novel category disappears and indices compact
        let o = parse_overrides("redirect b:zebra -> dog").unwrap();
        let (u3, _) = apply_overrides(&u, &r, &o, &table()).unwrap();
        assert_eq!(u3.categories(), ["car", "dog"]);
        assert!(u3.check());

        let o = parse_overrides("redirect b:zebra -> car").unwrap();
        assert!(matches!(
            apply_overrides(&u, &r, &o, &table()),
            Err(LabelError::ConflictingOverride(_))
        ));
    }

    #[test]
    fn unknown_categories() {
        let (u, r) = fixture();
        let o = parse_overrides("reject b:unicorn").unwrap();
        assert!(matches!(
            apply_overrides(&u, &r, &o, &table()),
            Err(LabelError::UnknownCategoryInOverride(_))
        ));
        let o = parse_overrides("redirect b:zebra -> horse").unwrap();
        assert!(matches!(
            apply_overrides(&u, &r, &o, &table()),
            Err(LabelError::UnknownCategoryInOverride(_))
        ));
    }
}
