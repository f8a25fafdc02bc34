//! Cloud-side billing model: expected cost under an idle/active autoscaling
//! split, the cost-minimizing quota, and the minimum cost itself.
//!
//! Per monitoring interval the service pays `g_b` dollars per uploaded bit
//! (transfer/storage), `i_b` per bit of unused quota while the aggregate
//! volume stays below the autoscaling quota `c_b`, and `p_b` per bit in
//! excess of the quota once the active tier kicks in:
//!
//! ```text
//! B_exp = g_b E[psi] + i_b L(c_b) + p_b U1(c_b)
//!       = (g_b + p_b) E[psi] - p_b c_b + (i_b + p_b) L(c_b)
//! ```
//!
//! `B_exp` is convex in `c_b`, and its global minimizer is the quantile of
//! the aggregate volume at probability `p_b / (i_b + p_b)`.

use crate::dist::{Family, QueryVolumeDistribution};
use crate::numerics::erf_inv;
use crate::{Error, Result};

/// Per-bit billing rates in dollars, plus an optional fixed quota.
///
/// `c_b` set means "bill at this quota"; absent means "use the optimal
/// quota". `p_b <= i_b` makes scaling up never pay; it is flagged by
/// [`BillingParams::autoscaling_pays`] rather than rejected, since the
/// expressions remain valid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BillingParams {
    pub g_b: f64,
    pub i_b: f64,
    pub p_b: f64,
    pub c_b: Option<f64>,
}

impl BillingParams {
    pub fn new(g_b: f64, i_b: f64, p_b: f64, c_b: Option<f64>) -> Result<Self> {
        if !(g_b >= 0.0 && g_b.is_finite()) {
            return Err(Error::InvalidParameter(format!("g_b must be >= 0, got {g_b}")));
        }
        if !(i_b > 0.0 && i_b.is_finite()) {
            return Err(Error::InvalidParameter(format!("i_b must be > 0, got {i_b}")));
        }
        if !(p_b > 0.0 && p_b.is_finite()) {
            return Err(Error::InvalidParameter(format!("p_b must be > 0, got {p_b}")));
        }
        if let Some(c) = c_b {
            if !(c >= 0.0 && c.is_finite()) {
                return Err(Error::InvalidParameter(format!("c_b must be >= 0, got {c}")));
            }
        }
        Ok(Self { g_b, i_b, p_b, c_b })
    }

    /// False when `p_b <= i_b`: the active tier is never cheaper to avoid,
    /// so the optimal quota collapses toward the low quantiles.
    pub fn autoscaling_pays(&self) -> bool {
        self.p_b > self.i_b
    }

    /// The quantile probability `p_b / (i_b + p_b)` defining the optimal
    /// quota.
    pub fn quota_quantile(&self) -> f64 {
        self.p_b / (self.i_b + self.p_b)
    }
}

/// Expected billing per monitoring interval, in dollars, at the quota
/// `b.c_b` (or the optimal quota when absent).
///
/// Dispatches to the family closed form; `expected_billing_generic` follows
/// the partial-moment route and the two agree to working precision.
pub fn expected_billing(b: &BillingParams, agg: &QueryVolumeDistribution) -> f64 {
    let c = b.c_b.unwrap_or_else(|| optimal_quota(b, agg));
    let BillingParams { g_b, i_b, p_b, .. } = *b;
    let r = agg.mean();
    match agg.family() {
        Family::Uniform if c <= 2.0 * r => {
            (g_b + p_b) * r - p_b * c + (i_b + p_b) * c * c / (4.0 * r)
        }
        Family::Pareto => {
            let alpha = agg.shape().unwrap();
            let v = agg.pareto_scale().unwrap();
            if c < v {
                (g_b + p_b) * r - p_b * c
            } else {
                // (alpha-1)^(alpha-1) / (alpha^alpha c^(alpha-1)) * r^alpha
                // rewritten in overflow-safe ratio form.
                let tail = (v / c).powf(alpha) * c / (alpha - 1.0);
                (g_b - i_b) * r + i_b * c + (i_b + p_b) * tail
            }
        }
        Family::Exponential => (g_b - i_b) * r + i_b * c + (i_b + p_b) * r * (-c / r).exp(),
        Family::Fixed if c >= r => (g_b - i_b) * r + i_b * c,
        _ => expected_billing_generic(b, agg, c),
    }
}

/// Expected billing via the generic partial-moment route.
pub fn expected_billing_generic(b: &BillingParams, agg: &QueryVolumeDistribution, c_b: f64) -> f64 {
    let r = agg.mean();
    (b.g_b + b.p_b) * r - b.p_b * c_b + (b.i_b + b.p_b) * agg.lower_partial_moment(c_b)
}

/// The autoscaling quota minimizing the expected billing: the aggregate
/// volume quantile at `p_b / (i_b + p_b)`. For the fixed-volume aggregate
/// this is the mean itself.
pub fn optimal_quota(b: &BillingParams, agg: &QueryVolumeDistribution) -> f64 {
    let q = b.quota_quantile();
    let r = agg.mean();
    match agg.family() {
        Family::Uniform => 2.0 * r * q,
        Family::Pareto => {
            let alpha = agg.shape().unwrap();
            ((b.i_b + b.p_b) / b.i_b).powf(1.0 / alpha) * (alpha - 1.0) / alpha * r
        }
        Family::Exponential => r * ((b.i_b + b.p_b) / b.i_b).ln(),
        Family::HalfGaussian => {
            r * std::f64::consts::PI.sqrt() * erf_inv(q).expect("quota quantile lies in (0,1)")
        }
        Family::Fixed => r,
    }
}

/// Minimum expected billing, attained at [`optimal_quota`]. Linear in the
/// aggregate mean volume: `min_billing = unit_min_cost * r_tot`.
pub fn min_billing(b: &BillingParams, agg: &QueryVolumeDistribution) -> f64 {
    unit_min_cost(b, agg) * agg.mean()
}

/// Minimum expected billing per bit of mean aggregate volume, in $/b.
pub fn unit_min_cost(b: &BillingParams, agg: &QueryVolumeDistribution) -> f64 {
    let BillingParams { g_b, i_b, p_b, .. } = *b;
    match agg.family() {
        Family::Uniform => g_b + p_b - p_b * p_b / (i_b + p_b),
        Family::Pareto => {
            let alpha = agg.shape().unwrap();
            g_b - i_b + i_b * ((i_b + p_b) / i_b).powf(1.0 / alpha)
        }
        Family::Exponential => g_b + i_b * ((i_b + p_b) / i_b).ln(),
        Family::HalfGaussian => {
            let w = erf_inv(b.quota_quantile()).expect("quota quantile lies in (0,1)");
            g_b - i_b + (i_b + p_b) * (-w * w).exp()
        }
        Family::Fixed => g_b,
    }
}
