use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::model::{NGramClass, Vocabulary};

/// Counts every contiguous n-gram (for each size in `n_sizes`) inside the
/// whitespace-separated words of `transcripts` and keeps the classes seen at
/// least `min_count` times.
pub fn build_vocabulary<S: AsRef<str>>(
    transcripts: &[S],
    n_sizes: &[usize],
    min_count: u64,
) -> Result<Vocabulary> {
    if transcripts.is_empty() {
        return Err(Error::contract("no transcripts"));
    }
    if n_sizes.is_empty() || n_sizes.contains(&0) {
        return Err(Error::contract(format!("n-gram sizes must be positive and non-empty, got {n_sizes:?}")));
    }
    if min_count == 0 {
        return Err(Error::contract("min_count must be at least 1"));
    }
    let mut sizes = n_sizes.to_vec();
    sizes.sort_unstable();
    sizes.dedup();

    let mut counts: BTreeMap<String, u64> = BTreeMap::new();
    for line in transcripts {
        for word in line.as_ref().split_whitespace() {
            let chars: Vec<char> = word.chars().collect();
            for &n in &sizes {
                for window in chars.windows(n) {
                    *counts.entry(window.iter().collect()).or_default() += 1;
                }
            }
        }
    }
    let kept = counts
        .into_iter()
        .filter(|&(_, c)| c >= min_count)
        .map(|(label, c)| Ok((NGramClass::new(&label)?, c)))
        .collect::<Result<BTreeMap<_, _>>>()?;
    Vocabulary::from_counts(kept)
}
