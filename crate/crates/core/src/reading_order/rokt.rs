use std::collections::HashMap;
use std::fmt::Debug;
use std::hash::Hash;

use crate::error::{Error, Result};

fn merge_count(v: &mut [usize], buf: &mut Vec<usize>) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut inv = merge_count(&mut v[..mid], buf) + merge_count(&mut v[mid..], buf);
    buf.clear();
    let (mut i, mut j) = (0, mid);
    while i < mid && j < n {
        if v[i] <= v[j] {
            buf.push(v[i]);
            i += 1;
        } else {
            buf.push(v[j]);
            inv += (mid - i) as u64;
            j += 1;
        }
    }
    buf.extend_from_slice(&v[i..mid]);
    buf.extend_from_slice(&v[j..]);
    v.copy_from_slice(buf);
    inv
}

/// Kendall tau-a between two orderings of the same elements.
///
/// Discordant pairs are counted as inversions, so the cost is O(n log n).
/// Fewer than two elements score 1.0.
pub fn rokt<T: Eq + Hash + Debug>(predicted: &[T], gold: &[T]) -> Result<f64> {
    let pos: HashMap<&T, usize> = gold.iter().enumerate().map(|(i, t)| (t, i)).collect();
    if pos.len() != gold.len() {
        return Err(Error::ElementMismatch("gold order has duplicate elements".into()));
    }
    if predicted.len() != gold.len() {
        return Err(Error::ElementMismatch(format!(
            "predicted has {} elements, gold has {}",
            predicted.len(),
            gold.len()
        )));
    }
    let mut ranks = Vec::with_capacity(predicted.len());
    let mut seen = vec![false; gold.len()];
    for t in predicted {
        let &r = pos
            .get(t)
            .ok_or_else(|| Error::ElementMismatch(format!("{t:?} not in gold order")))?;
        if std::mem::replace(&mut seen[r], true) {
            return Err(Error::ElementMismatch(format!("{t:?} repeated in predicted order")));
        }
        ranks.push(r);
    }
    let n = ranks.len() as u64;
    if n < 2 {
        return Ok(1.0);
    }
    let pairs = n * (n - 1) / 2;
    let discordant = merge_count(&mut ranks, &mut Vec::with_capacity(n as usize));
    Ok((pairs as f64 - 2.0 * discordant as f64) / pairs as f64)
}
