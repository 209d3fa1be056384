//! Nearest-neighbour privacy score.
//!
//! The real rows are shuffled into two equal halves `D1` and `D2`. For each
//! `x` in `D1` the ratio of its distance to `D2` over its distance to the
//! rest of `D1` measures how close an unrelated real sample typically comes;
//! the low percentile `alpha` of these ratios is the threshold. The score is
//! the fraction of real rows whose ratio of distance to the synthetic data
//! over distance to the rest of the real data falls below `alpha`.

use alloc::vec::Vec;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::joined_secondary;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::preprocess::TableCodec;
use crate::relational::{join_on_identifier, RelationalDataset};
use crate::seed::{stage_rng, STAGE_PRIVACY};

pub const PRIVACY_PERCENTILE: f64 = 5.0;
pub const PRIVACY_THRESHOLD: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrivacyReport {
    pub score: f64,
    pub alpha: f64,
    pub threshold: f64,
    pub passed: bool,
    pub real_rows: usize,
    pub synthetic_rows: usize,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Euclidean distance from each query row to its nearest reference row.
/// With `exclude_self`, queries and references are the same rows and a row
/// never matches itself.
pub fn nn_distances(queries: &Matrix, reference: &Matrix, exclude_self: bool) -> Vec<f64> {
    (0..queries.rows())
        .map(|i| {
            let q = queries.row(i);
            let best = (0..reference.rows())
                .filter(|&j| !(exclude_self && i == j))
                .map(|j| sq_dist(q, reference.row(j)))
                .fold(f64::INFINITY, f64::min);
            libm::sqrt(best)
        })
        .collect()
}

fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        if num > 0.0 {
            f64::INFINITY
        } else {
            0.0
        }
    } else {
        num / den
    }
}

/// Linear-interpolation percentile, `p` in `[0, 100]`, positions
/// `p / 100 * (n - 1)` on the sorted values.
pub fn percentile(values: &[f64], p: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = p / 100.0 * (v.len() - 1) as f64;
    let lo = libm::floor(pos) as usize;
    let hi = libm::ceil(pos) as usize;
    let frac = pos - lo as f64;
    if lo == hi || v[lo] == v[hi] || frac == 0.0 {
        v[lo]
    } else {
        v[lo] + frac * (v[hi] - v[lo])
    }
}

/// Privacy score of `synthetic` against the encoded real rows `real`.
pub fn privacy_score(real: &Matrix, synthetic: &Matrix, seed: u64) -> Result<PrivacyReport> {
    if real.rows() < 4 {
        return Err(Error::InvalidArgument(alloc::format!("privacy needs at least 4 real rows, got {}", real.rows())));
    }
    if synthetic.rows() == 0 {
        return Err(Error::EmptyTable("synthetic".into()));
    }
    if real.cols() != synthetic.cols() {
        return Err(Error::ShapeMismatch(alloc::format!(
            "real rows have {} columns, synthetic rows {}",
            real.cols(),
            synthetic.cols()
        )));
    }
    let mut order: Vec<usize> = (0..real.rows()).collect();
    order.shuffle(&mut stage_rng(seed, STAGE_PRIVACY));
    let half = real.rows() / 2;
    let d1 = real.gather_rows(&order[..half]);
    let d2 = real.gather_rows(&order[half..2 * half]);

    let baseline: Vec<f64> = nn_distances(&d1, &d2, false)
        .into_iter()
        .zip(nn_distances(&d1, &d1, true))
        .map(|(num, den)| ratio(num, den))
        .collect();
    let alpha = percentile(&baseline, PRIVACY_PERCENTILE);

    let close = nn_distances(real, synthetic, false)
        .into_iter()
        .zip(nn_distances(real, real, true))
        .filter(|&(num, den)| ratio(num, den) < alpha)
        .count();
    let score = close as f64 / real.rows() as f64;
    Ok(PrivacyReport {
        score,
        alpha,
        threshold: PRIVACY_THRESHOLD,
        passed: score <= PRIVACY_THRESHOLD,
        real_rows: real.rows(),
        synthetic_rows: synthetic.rows(),
    })
}

/// Privacy score on the rows of `secondary` joined with their primary rows,
/// both datasets encoded with codecs fitted on the real rows.
pub fn privacy_score_datasets(
    real: &RelationalDataset,
    synthetic: &RelationalDataset,
    secondary: Option<&str>,
    seed: u64,
) -> Result<PrivacyReport> {
    let secondary = joined_secondary(real, secondary)?;
    let real_j = join_on_identifier(real, secondary)?;
    let synth_j = join_on_identifier(synthetic, secondary)?;
    let codec = TableCodec::fit(&real_j)?;
    privacy_score(&codec.encode(&real_j)?.matrix, &codec.encode(&synth_j)?.matrix, seed)
}
