//! Order-preserving maps that run on rayon when the `parallel` feature is on.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

pub(crate) fn map_range<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

pub(crate) fn map_slice<S, T, F>(items: &[S], f: F) -> Vec<T>
where
    S: Sync,
    T: Send,
    F: Fn(&S) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).collect()
    }
}

/// Index of the smallest value; values within a relative `1e-12` of the
/// running best count as ties and keep the earlier index.
pub(crate) fn argmin_tied(values: impl IntoIterator<Item = (usize, f64)>) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (i, v) in values {
        match best {
            None => best = Some((i, v)),
            Some((_, b)) => {
                if v < b - tie_tolerance(b) {
                    best = Some((i, v));
                }
            }
        }
    }
    best
}

/// Mirror of [`argmin_tied`] for maxima.
pub(crate) fn argmax_tied(values: impl IntoIterator<Item = (usize, f64)>) -> Option<(usize, f64)> {
    argmin_tied(values.into_iter().map(|(i, v)| (i, -v))).map(|(i, v)| (i, -v))
}

pub(crate) fn tie_tolerance(v: f64) -> f64 {
    if v.is_finite() {
        1e-12 * v.abs().max(1e-300)
    } else {
        0.0
    }
}
