//! Permutation-free cross-ED and cross-MMD tests.
//!
//! Each sample is split into a first half (`floor(n/2)` rows) and a second
//! half. Cross matrices between the halves give a studentized statistic that
//! is compared to the upper tail of a standard normal.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::matrix::{
    check_bandwidth, euclidean_distance_matrix, gaussian_kernel_matrix, mean_of, DataMatrix,
    PairwiseMatrix,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SplitSizes {
    pub n_x1: usize,
    pub n_x2: usize,
    pub n_y1: usize,
    pub n_y2: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrossTestResult {
    /// Cross statistic, the average of the four-sample kernel over all index tuples.
    pub u_hat: f64,
    pub sigma_hat: f64,
    /// `u_hat / sigma_hat`.
    pub z: f64,
    pub p_value: f64,
    pub split_sizes: SplitSizes,
}

/// Standard normal CDF via the complementary error function.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

/// Upper tail `1 - normal_cdf(z)`, without cancellation for large `z`.
pub fn normal_sf(z: f64) -> f64 {
    0.5 * libm::erfc(z / std::f64::consts::SQRT_2)
}

struct Halves {
    x1: DataMatrix,
    x2: DataMatrix,
    y1: DataMatrix,
    y2: DataMatrix,
    sizes: SplitSizes,
}

fn split(x: &DataMatrix, y: &DataMatrix) -> Result<Halves> {
    if x.cols() != y.cols() {
        return Err(Error::DimensionMismatch {
            what: "x and y column counts differ",
            left: x.cols(),
            right: y.cols(),
        });
    }
    for (n, what) in [(x.rows(), "cross test (x)"), (y.rows(), "cross test (y)")] {
        if n < 4 {
            return Err(Error::InsufficientSamples { what, needed: 4, got: n });
        }
    }
    let (n_x1, n_y1) = (x.rows() / 2, y.rows() / 2);
    Ok(Halves {
        x1: x.slice_rows(0, n_x1),
        x2: x.slice_rows(n_x1, x.rows()),
        y1: y.slice_rows(0, n_y1),
        y2: y.slice_rows(n_y1, y.rows()),
        sizes: SplitSizes {
            n_x1,
            n_x2: x.rows() - n_x1,
            n_y1,
            n_y2: y.rows() - n_y1,
        },
    })
}

/// Mean over rows of `(rowmean(plus) - rowmean(minus) - centre)^2`.
fn row_mean_variance(plus: &PairwiseMatrix, minus: &PairwiseMatrix, centre: f64) -> f64 {
    let rows = plus.n1();
    let dev: Vec<f64> = (0..rows)
        .map(|i| {
            let d = mean_of(plus.row(i)) - mean_of(minus.row(i)) - centre;
            d * d
        })
        .collect();
    mean_of(&dev)
}

fn conclude(
    u_hat: f64,
    sigma_x: f64,
    sigma_y: f64,
    sizes: SplitSizes,
    scale: f64,
    tail: impl Fn(f64) -> f64,
) -> Result<CrossTestResult> {
    let sigma_hat = (sigma_x / sizes.n_x1 as f64 + sigma_y / sizes.n_y1 as f64).sqrt();
    // all-zero spreads, or spreads at rounding level relative to the data
    if !sigma_hat.is_finite() || sigma_hat <= 8.0 * f64::EPSILON * scale {
        return Err(Error::DegenerateVariance);
    }
    let z = u_hat / sigma_hat;
    Ok(CrossTestResult {
        u_hat,
        sigma_hat,
        z,
        p_value: tail(z),
        split_sizes: sizes,
    })
}

fn scale_of(ms: [&PairwiseMatrix; 4]) -> f64 {
    ms.iter().map(|m| mean_of(m.values()).abs()).fold(0.0, f64::max)
}

/// Cross-ED test; large positive `u_hat` rejects.
pub fn cross_ed_test(x: &DataMatrix, y: &DataMatrix) -> Result<CrossTestResult> {
    let h = split(x, y)?;
    let d_x1x2 = euclidean_distance_matrix(&h.x1, &h.x2)?;
    let d_y1y2 = euclidean_distance_matrix(&h.y1, &h.y2)?;
    let d_x1y2 = euclidean_distance_matrix(&h.x1, &h.y2)?;
    let d_y1x2 = euclidean_distance_matrix(&h.y1, &h.x2)?;

    let u_x = mean_of(d_x1y2.values()) - mean_of(d_x1x2.values());
    let u_y = mean_of(d_y1y2.values()) - mean_of(d_y1x2.values());
    let sigma_x = row_mean_variance(&d_x1y2, &d_x1x2, u_x);
    let sigma_y = row_mean_variance(&d_y1y2, &d_y1x2, u_y);
    let scale = scale_of([&d_x1x2, &d_y1y2, &d_x1y2, &d_y1x2]);
    conclude(u_x - u_y, sigma_x, sigma_y, h.sizes, scale, normal_sf)
}

/// Cross-MMD test with a Gaussian kernel; large positive `u_hat` rejects.
pub fn cross_mmd_test(x: &DataMatrix, y: &DataMatrix, bandwidth: f64) -> Result<CrossTestResult> {
    check_bandwidth(bandwidth)?;
    let h = split(x, y)?;
    let k = |a: &DataMatrix, b: &DataMatrix| gaussian_kernel_matrix(a, b, bandwidth);
    cross_kernel_template(&h, k, normal_sf)
}

/// The cross-MMD recipe applied to arbitrary cross matrices, with a
/// caller-chosen tail. Feeding it distance matrices and the lower tail gives
/// an alternative route to the cross-ED p-value.
fn cross_kernel_template<F>(
    h: &Halves,
    matrix: F,
    tail: impl Fn(f64) -> f64,
) -> Result<CrossTestResult>
where
    F: Fn(&DataMatrix, &DataMatrix) -> Result<PairwiseMatrix>,
{
    let k_x1x2 = matrix(&h.x1, &h.x2)?;
    let k_y1y2 = matrix(&h.y1, &h.y2)?;
    let k_x1y2 = matrix(&h.x1, &h.y2)?;
    let k_y1x2 = matrix(&h.y1, &h.x2)?;

    let u_x = mean_of(k_x1x2.values()) - mean_of(k_x1y2.values());
    let u_y = mean_of(k_y1x2.values()) - mean_of(k_y1y2.values());
    let sigma_x = row_mean_variance(&k_x1x2, &k_x1y2, u_x);
    let sigma_y = row_mean_variance(&k_y1x2, &k_y1y2, u_y);
    let scale = scale_of([&k_x1x2, &k_y1y2, &k_x1y2, &k_y1x2]);
    conclude(u_x - u_y, sigma_x, sigma_y, h.sizes, scale, tail)
}

/// Cross-ED p-value computed through the kernel template with distance
/// matrices: `p = 1 - Phi(-u / sigma)`.
pub fn cross_ed_via_kernel_template(x: &DataMatrix, y: &DataMatrix) -> Result<CrossTestResult> {
    let h = split(x, y)?;
    cross_kernel_template(&h, euclidean_distance_matrix, |z| normal_sf(-z))
}
