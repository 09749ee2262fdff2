//! Domain splitting by sorting on one feature.
//!
//! Rows are sorted by the chosen feature and cut into contiguous blocks; each
//! block becomes a domain and the sorting feature is removed so it cannot be
//! used to tell the domains apart.

use crate::error::{Error, Result};
use crate::points::{LabeledPool, PointSet};

/// One block of a feature-sort split.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitPart {
    pub pool: LabeledPool,
    /// Original row index of every row in `pool`.
    pub rows: Vec<usize>,
}

/// Block sizes for `n` rows in `parts` blocks: sizes differ by at most one
/// and earlier blocks take the extra rows.
pub fn block_sizes(n: usize, parts: usize) -> Vec<usize> {
    if parts == 0 {
        return Vec::new();
    }
    let base = n / parts;
    let extra = n % parts;
    (0..parts).map(|i| base + usize::from(i < extra)).collect()
}

/// Row indices stably sorted ascending by `feature` (ties keep input order).
pub fn sort_order(data: &PointSet, feature: usize) -> Result<Vec<usize>> {
    if feature >= data.dim() {
        return Err(Error::invalid(format!(
            "feature {feature} out of range for dimension {}",
            data.dim()
        )));
    }
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.sort_by(|&a, &b| data.row(a)[feature].total_cmp(&data.row(b)[feature]));
    Ok(order)
}

/// Sorts by `feature`, cuts into blocks of the given `sizes`, and drops the feature.
pub fn split_by_sizes(
    data: &PointSet,
    labels: &[f64],
    feature: usize,
    sizes: &[usize],
) -> Result<Vec<SplitPart>> {
    if labels.len() != data.len() {
        return Err(Error::invalid(format!(
            "{} labels for {} rows",
            labels.len(),
            data.len()
        )));
    }
    if sizes.iter().sum::<usize>() != data.len() {
        return Err(Error::invalid("block sizes must add up to the row count"));
    }
    let order = sort_order(data, feature)?;
    let reduced = data.drop_column(feature)?;
    let mut parts = Vec::with_capacity(sizes.len());
    let mut start = 0;
    for &size in sizes {
        let rows = order[start..start + size].to_vec();
        start += size;
        let pool = LabeledPool::new(
            reduced.select_rows(&rows),
            rows.iter().map(|&i| labels[i]).collect(),
        )?;
        parts.push(SplitPart { pool, rows });
    }
    Ok(parts)
}

/// Splits into `parts` near-equal domains along `feature`.
pub fn feature_sort_split(
    data: &PointSet,
    labels: &[f64],
    feature: usize,
    parts: usize,
) -> Result<Vec<SplitPart>> {
    if parts < 2 {
        return Err(Error::invalid("a split needs at least 2 parts"));
    }
    if data.len() < parts {
        return Err(Error::invalid(format!(
            "cannot split {} rows into {parts} parts",
            data.len()
        )));
    }
    split_by_sizes(data, labels, feature, &block_sizes(data.len(), parts))
}
