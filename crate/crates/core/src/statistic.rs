//! Energy distance and biased squared MMD evaluated from pre-computed matrices.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{mean_of, PairwiseKind, PairwiseMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StatisticKind {
    #[serde(alias = "ed", alias = "EnergyDistance")]
    EnergyDistance,
    #[serde(alias = "mmd", alias = "MmdBiasedSquared")]
    MmdBiasedSquared,
}

impl StatisticKind {
    /// The matrix kind this statistic is defined over.
    pub fn matrix_kind(self) -> PairwiseKind {
        match self {
            StatisticKind::EnergyDistance => PairwiseKind::EuclideanDistance,
            StatisticKind::MmdBiasedSquared => PairwiseKind::GaussianKernel,
        }
    }

    pub fn short_name(self) -> &'static str {
        match self {
            StatisticKind::EnergyDistance => "ed",
            StatisticKind::MmdBiasedSquared => "mmd",
        }
    }

    /// Evaluates the statistic from the three within/between matrices.
    pub fn evaluate(
        self,
        xy: &PairwiseMatrix,
        xx: &PairwiseMatrix,
        yy: &PairwiseMatrix,
    ) -> Result<f64> {
        match self {
            StatisticKind::EnergyDistance => energy_statistic(xy, xx, yy),
            StatisticKind::MmdBiasedSquared => mmd_biased_statistic(xx, yy, xy),
        }
    }

    /// Hot-loop form over raw, already shape-checked buffers.
    #[inline]
    pub(crate) fn evaluate_raw(self, xy: &[f64], xx: &[f64], yy: &[f64]) -> f64 {
        let (m_xy, m_xx, m_yy) = (mean_of(xy), mean_of(xx), mean_of(yy));
        match self {
            StatisticKind::EnergyDistance => 2.0 * m_xy - m_xx - m_yy,
            StatisticKind::MmdBiasedSquared => m_xx + m_yy - 2.0 * m_xy,
        }
    }
}

fn check_shapes(
    xy: &PairwiseMatrix,
    xx: &PairwiseMatrix,
    yy: &PairwiseMatrix,
    kind: PairwiseKind,
) -> Result<()> {
    for (name, m) in [("xy", xy), ("xx", xx), ("yy", yy)] {
        if m.kind() != kind {
            return Err(Error::KindMismatch(format!(
                "{name} matrix is {:?}, expected {kind:?}",
                m.kind()
            )));
        }
        if m.is_empty() {
            return Err(Error::Empty("statistic input matrix"));
        }
    }
    let (nx, ny) = (xy.n1(), xy.n2());
    if xx.n1() != nx || xx.n2() != nx {
        return Err(Error::InvalidShape(format!(
            "xx is {}x{}, expected {nx}x{nx}",
            xx.n1(),
            xx.n2()
        )));
    }
    if yy.n1() != ny || yy.n2() != ny {
        return Err(Error::InvalidShape(format!(
            "yy is {}x{}, expected {ny}x{ny}",
            yy.n1(),
            yy.n2()
        )));
    }
    Ok(())
}

/// `2 * mean(D_xy) - mean(D_xx) - mean(D_yy)`.
pub fn energy_statistic(
    d_xy: &PairwiseMatrix,
    d_xx: &PairwiseMatrix,
    d_yy: &PairwiseMatrix,
) -> Result<f64> {
    check_shapes(d_xy, d_xx, d_yy, PairwiseKind::EuclideanDistance)?;
    Ok(StatisticKind::EnergyDistance.evaluate_raw(d_xy.values(), d_xx.values(), d_yy.values()))
}

/// `mean(K_xx) + mean(K_yy) - 2 * mean(K_xy)`.
pub fn mmd_biased_statistic(
    k_xx: &PairwiseMatrix,
    k_yy: &PairwiseMatrix,
    k_xy: &PairwiseMatrix,
) -> Result<f64> {
    check_shapes(k_xy, k_xx, k_yy, PairwiseKind::GaussianKernel)?;
    Ok(StatisticKind::MmdBiasedSquared.evaluate_raw(k_xy.values(), k_xx.values(), k_yy.values()))
}
