//! Text formats: label-space files, the unified space, mapping reports and
//! surgery plans. All tables are line-delimited with tab-separated fields.

use std::fmt::Write as _;

use super::{
    Ambiguity, Decision, Displacement, HeadSurgeryPlan, LabelError, LabelSpace, MappingReport, Match, Novel,
    Provenance, SurgeryEntry, UnifiedLabelSpace,
};

/// One category per line. A `#dataset: <id>` header overrides
/// `default_id`; other `#` lines are comments.
pub fn parse_label_space(text: &str, default_id: &str) -> Result<LabelSpace, LabelError> {
    let mut id = default_id.to_string();
    let mut categories = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            if let Some(v) = rest.trim().strip_prefix("dataset:") {
                id = v.trim().to_string();
            }
            continue;
        }
        categories.push(line.to_string());
    }
    LabelSpace::new(id, categories)
}

pub fn write_unified(u: &UnifiedLabelSpace) -> String {
    let mut out = String::new();
    for d in &u.datasets {
        let _ = writeln!(out, "dataset\t{d}");
    }
    for (i, (name, origin)) in u.categories.iter().zip(&u.origins).enumerate() {
        let _ = writeln!(out, "category\t{i}\t{name}\t{origin}");
    }
    for p in &u.provenance {
        let _ = writeln!(out, "source\t{}\t{}\t{}", p.dataset, p.category, p.index);
    }
    out
}

fn bad(line: usize, text: &str) -> LabelError {
    LabelError::BadRecord {
        line,
        text: text.to_string(),
    }
}

pub fn parse_unified(text: &str) -> Result<UnifiedLabelSpace, LabelError> {
    let mut u = UnifiedLabelSpace {
        categories: Vec::new(),
        origins: Vec::new(),
        provenance: Vec::new(),
        datasets: Vec::new(),
    };
    for (i, raw) in text.lines().enumerate() {
        if raw.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = raw.split('\t').collect();
        match f[..] {
            ["dataset", d] => u.datasets.push(d.to_string()),
            ["category", idx, name, origin] => {
                if idx.parse::<usize>().ok() != Some(u.categories.len()) {
                    return Err(bad(i + 1, raw));
                }
                u.categories.push(name.to_string());
                u.origins.push(origin.to_string());
            }
            ["source", d, c, idx] => u.provenance.push(Provenance {
                dataset: d.to_string(),
                category: c.to_string(),
                index: idx.parse().map_err(|_| bad(i + 1, raw))?,
            }),
            _ => return Err(bad(i + 1, raw)),
        }
    }
    if !u.check() {
        return Err(bad(0, "unified space violates provenance invariants"));
    }
    Ok(u)
}

pub fn write_report(r: &MappingReport) -> String {
    let mut out = String::new();
    if let Some(d) = &r.initial {
        let _ = writeln!(out, "initial\t{d}");
    }
    for m in &r.matches {
        let by = match m.decided_by {
            Decision::Similarity => "similarity",
            Decision::Override => "override",
        };
        let _ = writeln!(
            out,
            "match\t{}\t{}\t{}\t{}\t{}\t{by}",
            m.dataset, m.category, m.index, m.unified, m.score
        );
    }
    for n in &r.novel {
        let _ = writeln!(out, "novel\t{}\t{}\t{}", n.dataset, n.category, n.index);
    }
    for a in &r.ambiguous {
        let c: Vec<String> = a.candidates.iter().map(|(i, s)| format!("{i}:{s}")).collect();
        let _ = writeln!(out, "ambiguous\t{}\t{}\t{}", a.dataset, a.category, c.join(","));
    }
    for d in &r.displaced {
        let got = d.got.map_or_else(|| "-".to_string(), |g| g.to_string());
        let _ = writeln!(out, "displaced\t{}\t{}\t{}\t{got}", d.dataset, d.category, d.wanted);
    }
    for (d, c) in &r.accepted {
        let _ = writeln!(out, "accepted\t{d}\t{c}");
    }
    out
}

pub fn parse_report(text: &str) -> Result<MappingReport, LabelError> {
    let mut r = MappingReport::default();
    for (i, raw) in text.lines().enumerate() {
        if raw.trim().is_empty() {
            continue;
        }
        let err = || bad(i + 1, raw);
        let f: Vec<&str> = raw.split('\t').collect();
        match f[..] {
            ["initial", d] => r.initial = Some(d.to_string()),
            ["match", d, c, idx, unified, score, by] => r.matches.push(Match {
                dataset: d.into(),
                category: c.into(),
                index: idx.parse().map_err(|_| err())?,
                unified: unified.into(),
                score: score.parse().map_err(|_| err())?,
                decided_by: match by {
                    "similarity" => Decision::Similarity,
                    "override" => Decision::Override,
                    _ => return Err(err()),
                },
            }),
            ["novel", d, c, idx] => r.novel.push(Novel {
                dataset: d.into(),
                category: c.into(),
                index: idx.parse().map_err(|_| err())?,
            }),
            ["ambiguous", d, c, list] => {
                let candidates = list
                    .split(',')
                    .map(|p| {
                        let (i, s) = p.split_once(':')?;
                        Some((i.parse().ok()?, s.parse().ok()?))
                    })
                    .collect::<Option<Vec<_>>>()
                    .ok_or_else(err)?;
                r.ambiguous.push(Ambiguity {
                    dataset: d.into(),
                    category: c.into(),
                    candidates,
                });
            }
            ["displaced", d, c, wanted, got] => r.displaced.push(Displacement {
                dataset: d.into(),
                category: c.into(),
                wanted: wanted.parse().map_err(|_| err())?,
                got: if got == "-" { None } else { Some(got.parse().map_err(|_| err())?) },
            }),
            ["accepted", d, c] => r.accepted.push((d.into(), c.into())),
            _ => return Err(err()),
        }
    }
    Ok(r)
}

/// `target_category<TAB>exact|nearest<TAB>unified index<TAB>score`.
pub fn write_plan(plan: &HeadSurgeryPlan, unified: &UnifiedLabelSpace) -> String {
    let mut out = String::new();
    for (c, e) in &plan.entries {
        let name = &unified.categories[e.index()];
        match e {
            SurgeryEntry::Exact(i) => {
                let _ = writeln!(out, "{c}\texact\t{i}\t{name}\t-");
            }
            SurgeryEntry::Nearest(i, s) => {
                let _ = writeln!(out, "{c}\tnearest\t{i}\t{name}\t{s}");
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::super::{build_unified, tests::table, DEFAULT_THRESHOLD};
    use super::*;

    #[test]
    fn label_space_file() {
        let s = parse_label_space("#dataset: coco\n# comment\ncar\n\npolice car\n", "stem").unwrap();
        assert_eq!(s.dataset_id, "coco");
        assert_eq!(s.categories, ["car", "police car"]);
        assert_eq!(parse_label_space("dog\n", "stem").unwrap().dataset_id, "stem");
    }

    #[test]
    fn unified_and_report_round_trip() {
        let spaces = [
            LabelSpace::new("a", ["car", "dog"]).unwrap(),
            LabelSpace::new("b", ["automobile", "zebra"]).unwrap(),
        ];
        let (u, r) = build_unified(&spaces, &table(), DEFAULT_THRESHOLD).unwrap();
        let text = write_unified(&u);
        assert_eq!(parse_unified(&text).unwrap(), u);
        assert_eq!(parse_report(&write_report(&r)).unwrap(), r);
        assert!(parse_unified("category\t3\tx\tx\n").is_err());
    }
}
