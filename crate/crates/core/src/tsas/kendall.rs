//! Kendall's tau-b in O(n log n) (Knight's algorithm).
//!
//! `tau_b = (n0 - n1 - n2 + n3 - 2·swaps) / sqrt((n0 - n1)(n0 - n2))` where
//! `n0 = n(n-1)/2`, `n1`/`n2` count pairs tied in x / y, `n3` pairs tied in
//! both, and `swaps` is the number of strict inversions of y after sorting
//! by (x, y).

use std::cmp::Ordering;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum TauError {
    #[error("need at least 2 pairs, got {0}")]
    TooFewPairs(usize),
    #[error("AllTied: every pair is tied in x or in y")]
    AllTied,
    #[error("non-finite score at position {0}")]
    NonFinite(usize),
    #[error("x and y lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
}

fn cmp(a: f64, b: f64) -> Ordering {
    a.total_cmp(&b)
}

fn tied_pairs(sorted: &[f64]) -> u64 {
    let mut total = 0u64;
    let mut run = 1u64;
    for w in sorted.windows(2) {
        if w[0] == w[1] {
            run += 1;
        } else {
            total += run * (run - 1) / 2;
            run = 1;
        }
    }
    total + run * (run - 1) / 2
}

/// Sorts `v` and returns the number of strict inversions.
fn merge_count(v: &mut [f64], buf: &mut [f64]) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut swaps = {
        let (l, r) = v.split_at_mut(mid);
        let (bl, br) = buf.split_at_mut(mid);
        merge_count(l, bl) + merge_count(r, br)
    };
    let (mut i, mut j, mut k) = (0, mid, 0);
    while i < mid && j < n {
        if v[j] < v[i] {
            buf[k] = v[j];
            swaps += (mid - i) as u64;
            j += 1;
        } else {
            buf[k] = v[i];
            i += 1;
        }
        k += 1;
    }
    buf[k..k + (mid - i)].copy_from_slice(&v[i..mid]);
    k += mid - i;
    buf[k..k + (n - j)].copy_from_slice(&v[j..n]);
    v.copy_from_slice(&buf[..n]);
    swaps
}

/// Tau-b over `(x, y)` score pairs.
pub fn kendall_tau(pairs: &[(f64, f64)]) -> Result<f64, TauError> {
    let n = pairs.len();
    if n < 2 {
        return Err(TauError::TooFewPairs(n));
    }
    if let Some(i) = pairs.iter().position(|(x, y)| !x.is_finite() || !y.is_finite()) {
        return Err(TauError::NonFinite(i));
    }
    // +0.0 folds -0.0 into +0.0 so total_cmp treats them as ties
    let mut sorted: Vec<(f64, f64)> = pairs.iter().map(|&(x, y)| (x + 0.0, y + 0.0)).collect();
    sorted.sort_by(|a, b| cmp(a.0, b.0).then(cmp(a.1, b.1)));

    let n0 = (n as u64) * (n as u64 - 1) / 2;
    let xs: Vec<f64> = sorted.iter().map(|p| p.0).collect();
    let n1 = tied_pairs(&xs);

    let mut n3 = 0u64;
    let mut run = 1u64;
    for w in sorted.windows(2) {
        if w[0] == w[1] {
            run += 1;
        } else {
            n3 += run * (run - 1) / 2;
            run = 1;
        }
    }
    n3 += run * (run - 1) / 2;

    let mut ys: Vec<f64> = sorted.iter().map(|p| p.1).collect();
    let mut buf = vec![0.0; n];
    let swaps = merge_count(&mut ys, &mut buf);
    let n2 = tied_pairs(&ys);

    let denom = ((n0 - n1) as f64) * ((n0 - n2) as f64);
    if denom == 0.0 {
        return Err(TauError::AllTied);
    }
    let numer = n0 as i128 - n1 as i128 - n2 as i128 + n3 as i128 - 2 * swaps as i128;
    Ok(numer as f64 / denom.sqrt())
}

pub fn kendall_tau_xy(x: &[f64], y: &[f64]) -> Result<f64, TauError> {
    if x.len() != y.len() {
        return Err(TauError::LengthMismatch(x.len(), y.len()));
    }
    let pairs: Vec<(f64, f64)> = x.iter().copied().zip(y.iter().copied()).collect();
    kendall_tau(&pairs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixed_cases() {
        assert_eq!(kendall_tau(&[(1.0, 1.0), (2.0, 2.0), (3.0, 3.0)]).unwrap(), 1.0);
        assert_eq!(kendall_tau(&[(1.0, 3.0), (2.0, 2.0), (3.0, 1.0)]).unwrap(), -1.0);
        let t = kendall_tau(&[(1.0, 2.0), (2.0, 1.0), (3.0, 4.0), (4.0, 3.0), (5.0, 5.0)]).unwrap();
        assert!((t - 0.6).abs() < 1e-15);
    }

    #[test]
    fn ties_and_errors() {
        assert_eq!(kendall_tau(&[(1.0, 1.0), (1.0, 2.0)]), Err(TauError::AllTied));
        assert_eq!(kendall_tau(&[(1.0, 1.0)]), Err(TauError::TooFewPairs(1)));
        assert_eq!(kendall_tau(&[(1.0, f64::NAN), (2.0, 1.0)]), Err(TauError::NonFinite(0)));
        // signed zeros are ties
        let a = kendall_tau(&[(0.0, 1.0), (-0.0, 2.0), (1.0, 3.0)]).unwrap();
        let b = kendall_tau(&[(0.0, 1.0), (0.0, 2.0), (1.0, 3.0)]).unwrap();
        assert_eq!(a, b);
        assert!(kendall_tau_xy(&[1.0], &[1.0, 2.0]).is_err());
    }
}
