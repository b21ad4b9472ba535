//! FLOPs bands: half-open GFLOPs intervals `[lo, hi)`.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq)]
pub struct Band {
    pub label: String,
    pub lo: f64,
    pub hi: f64,
}

impl Band {
    pub fn new(label: impl Into<String>, lo: f64, hi: f64) -> Self {
        Self {
            label: label.into(),
            lo,
            hi,
        }
    }

    pub fn contains(&self, gflops: f64) -> bool {
        gflops >= self.lo && gflops < self.hi
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum BandError {
    #[error("line {line}: expected `label lo hi`, got {text:?}")]
    BadLine { line: usize, text: String },
    #[error("bands must be sorted and non-overlapping (at {0:?})")]
    Unsorted(String),
}

/// The ten FLOPs groups used for the searched-model comparison.
pub fn table2_bands() -> Vec<Band> {
    [
        (30, 45),
        (45, 60),
        (60, 75),
        (75, 90),
        (90, 105),
        (105, 120),
        (120, 135),
        (135, 150),
        (150, 180),
        (180, 210),
    ]
    .into_iter()
    .map(|(lo, hi)| Band::new(format!("{lo}-{hi}B"), f64::from(lo), f64::from(hi)))
    .collect()
}

/// Parses `label lo hi` lines (GFLOPs) and checks ordering.
pub fn parse_bands(text: &str) -> Result<Vec<Band>, BandError> {
    let mut bands = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = || BandError::BadLine {
            line: i + 1,
            text: raw.to_string(),
        };
        let fields: Vec<&str> = line.split_whitespace().collect();
        let [label, lo, hi] = fields[..] else {
            return Err(bad());
        };
        let lo: f64 = lo.parse().map_err(|_| bad())?;
        let hi: f64 = hi.parse().map_err(|_| bad())?;
        if lo.is_nan() || hi.is_nan() || lo >= hi {
            return Err(bad());
        }
        bands.push(Band::new(label, lo, hi));
    }
    for w in bands.windows(2) {
        if w[1].lo < w[0].hi {
            return Err(BandError::Unsorted(w[1].label.clone()));
        }
    }
    Ok(bands)
}

/// Label of the band containing `gflops`, if any.
pub fn flops_band(gflops: f64, bands: &[Band]) -> Option<&str> {
    bands.iter().find(|b| b.contains(gflops)).map(|b| b.label.as_str())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lookup() {
        let bands = table2_bands();
        assert_eq!(flops_band(44.3, &bands), Some("30-45B"));
        assert_eq!(flops_band(45.0, &bands), Some("45-60B"));
        assert_eq!(flops_band(209.8, &bands), Some("180-210B"));
        assert_eq!(flops_band(250.0, &bands), None);
        assert_eq!(flops_band(29.9, &bands), None);
    }

    #[test]
    fn parse() {
        let b = parse_bands("# g\nsmall 0 10\nbig 10 20\n").unwrap();
        assert_eq!(b.len(), 2);
        assert_eq!(flops_band(10.0, &b), Some("big"));
        assert!(matches!(parse_bands("a 0 10\nb 5 20"), Err(BandError::Unsorted(_))));
        assert!(matches!(parse_bands("a 0"), Err(BandError::BadLine { line: 1, .. })));
    }
}
