//! Aggregator-level planning: can a billing target be met under the upload
//! volume cap, and how many devices per activity zone should be admitted.
//!
//! The minimum expected billing is linear in the mean aggregate volume,
//! `min_billing = unit_min_cost * r_tot`, so a billing target `b_mean` is
//! reachable under the cap `v_max` iff `b_mean <= v_max * unit_min_cost`.
//! Admission then splits the implied volume `r_tot = b_mean / unit_min_cost`
//! across the `A` zones by proportional fairness: every zone receives the
//! same volume share, `n_a * r_a = r_tot / A`. At the feasibility boundary
//! this reduces to `n_a = v_max / (A * r_a)`.
//!
//! Device counts are planned as reals the way the model treats them; a
//! floored integer companion and the billing it realizes are reported
//! alongside so deployments can see the rounding gap.

use crate::billing::{self, BillingParams};
use crate::dist::{self, AggregateMode, Family, QueryVolumeDistribution, SamplerMode};
use crate::numerics::{find_root, Tolerance};
use crate::{Error, Result};

/// A class of devices sharing one query-volume distribution.
#[derive(Debug, Clone)]
pub struct ActivityZone {
    pub dist: QueryVolumeDistribution,
    pub label: String,
}

impl ActivityZone {
    pub fn new(dist: QueryVolumeDistribution, label: impl Into<String>) -> Self {
        Self { dist, label: label.into() }
    }
}

/// Planning input: the zones behind one IoT aggregator, the upload volume
/// cap and billing target per monitoring interval, and how zone volumes
/// combine into the uploaded aggregate.
#[derive(Debug, Clone)]
pub struct AggregatorScenario {
    pub zones: Vec<ActivityZone>,
    /// Maximum mean upload volume per interval, bits.
    pub v_max: f64,
    /// Target mean billing per interval, dollars.
    pub b_mean: f64,
    /// Monitoring interval length, seconds (reporting only).
    pub interval_seconds: f64,
    pub billing: BillingParams,
    pub aggregate_mode: AggregateMode,
}

impl AggregatorScenario {
    pub fn validate(&self) -> Result<()> {
        if self.zones.is_empty() {
            return Err(Error::InvalidParameter("scenario needs at least one zone".into()));
        }
        if !(self.v_max > 0.0 && self.v_max.is_finite()) {
            return Err(Error::InvalidParameter(format!("v_max must be > 0, got {}", self.v_max)));
        }
        if !(self.b_mean > 0.0 && self.b_mean.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "b_mean must be > 0, got {}",
                self.b_mean
            )));
        }
        if !(self.interval_seconds > 0.0) {
            return Err(Error::InvalidParameter("monitoring interval must be > 0 s".into()));
        }
        Ok(())
    }

    /// A representative aggregate distribution for scaled mode (unit mean;
    /// the unit minimum cost does not depend on the mean). Errors when the
    /// zones mix families or Pareto shapes.
    fn scaled_family(&self) -> Result<QueryVolumeDistribution> {
        let pairs: Vec<(QueryVolumeDistribution, f64)> =
            self.zones.iter().map(|z| (z.dist, 1.0)).collect();
        match dist::aggregate(&pairs, AggregateMode::Scaled, 0, 0)? {
            dist::Aggregate::Scaled(d) => d.with_mean(1.0),
            _ => unreachable!("scaled mode returns a distribution"),
        }
    }
}

/// Which constraint pins the plan.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BindingConstraint {
    BillingTarget,
    VolumeCap,
    Both,
}

impl std::fmt::Display for BindingConstraint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            BindingConstraint::BillingTarget => "billing-target",
            BindingConstraint::VolumeCap => "volume-cap",
            BindingConstraint::Both => "both",
        })
    }
}

/// Feasibility verdict for a scenario: whether the billing target fits
/// under the volume cap, and by what dollar margin.
#[derive(Debug, Clone, Copy)]
pub struct Feasibility {
    pub feasible: bool,
    /// `v_max * unit_min_cost - b_mean`, dollars.
    pub margin: f64,
}

/// Proportional-fair admission plan.
#[derive(Debug, Clone)]
pub struct AdmissionPlan {
    /// Planned per-zone device counts (continuous, as the model treats them).
    pub counts: Vec<f64>,
    /// Floored integer companion of `counts`.
    pub counts_floor: Vec<u64>,
    /// Planned mean aggregate volume, `sum(n_a r_a)`, bits.
    pub r_tot: f64,
    pub feasible: bool,
    pub binding: BindingConstraint,
    /// Minimum billing realized by the floored counts, dollars.
    pub floored_billing: f64,
    /// 95% half-width of the Monte Carlo billing estimate, set only in
    /// convolved mode.
    pub billing_ci95: Option<f64>,
}

/// Minimum expected billing per bit of mean aggregate volume for a family
/// (`shape` applies to Pareto only).
pub fn unit_min_cost(b: &BillingParams, family: Family, shape: Option<f64>) -> Result<f64> {
    let d = QueryVolumeDistribution::new(family, 1.0, shape)?;
    Ok(billing::unit_min_cost(b, &d))
}

/// Monte Carlo settings for the convolved-aggregate fallback.
#[derive(Debug, Clone, Copy)]
pub struct McSettings {
    pub seed: u64,
    pub n_samples: usize,
}

impl Default for McSettings {
    fn default() -> Self {
        Self { seed: 0x51ED_CAFE, n_samples: 20_000 }
    }
}

/// Whether `b_mean` is achievable under `v_max`, with the dollar margin
/// `v_max * unit_min_cost - b_mean`.
pub fn check_feasibility(s: &AggregatorScenario) -> Result<Feasibility> {
    check_feasibility_with(s, &McSettings::default())
}

pub fn check_feasibility_with(s: &AggregatorScenario, mc: &McSettings) -> Result<Feasibility> {
    s.validate()?;
    let best_at_cap = match s.aggregate_mode {
        AggregateMode::Scaled => {
            billing::unit_min_cost(&s.billing, &s.scaled_family()?) * s.v_max
        }
        AggregateMode::Convolved => mc_min_billing(s, s.v_max, mc)?.0,
    };
    let margin = best_at_cap - s.b_mean;
    Ok(Feasibility { feasible: margin >= 0.0, margin })
}

/// Plan per-zone device counts so the minimum billing equals `b_mean` and
/// zone volume shares are equal. Errors when the scenario is infeasible.
pub fn plan_devices(s: &AggregatorScenario) -> Result<AdmissionPlan> {
    plan_devices_with(s, &McSettings::default())
}

pub fn plan_devices_with(s: &AggregatorScenario, mc: &McSettings) -> Result<AdmissionPlan> {
    let feas = check_feasibility_with(s, mc)?;
    if !feas.feasible {
        return Err(Error::Infeasible(format!(
            "billing target {} $ exceeds the cap-constrained minimum by {} $",
            s.b_mean, -feas.margin
        )));
    }
    let a = s.zones.len() as f64;

    let (r_tot, billing_ci95) = match s.aggregate_mode {
        AggregateMode::Scaled => {
            let unit = billing::unit_min_cost(&s.billing, &s.scaled_family()?);
            ((s.b_mean / unit).min(s.v_max), None)
        }
        AggregateMode::Convolved => {
            // No closed unit cost: bisect the Monte Carlo minimum billing
            // over the planned volume. Common seeds keep the curve monotone.
            let target = s.b_mean;
            let f = |r_tot: f64| match mc_min_billing(s, r_tot, mc) {
                Ok((b, _)) => b - target,
                Err(_) => f64::NAN,
            };
            let tol = Tolerance { rel: 1e-9, abs: 0.0, max_iter: 200 };
            let r = find_root(f, s.v_max * 1e-9, s.v_max, &tol)?;
            let (_, ci) = mc_min_billing(s, r, mc)?;
            (r, Some(ci))
        }
    };

    let counts: Vec<f64> = s.zones.iter().map(|z| r_tot / (a * z.dist.mean())).collect();
    let counts_floor: Vec<u64> = counts.iter().map(|n| n.floor() as u64).collect();
    let r_tot_floor: f64 = counts_floor
        .iter()
        .zip(&s.zones)
        .map(|(n, z)| *n as f64 * z.dist.mean())
        .sum();

    let floored_billing = match s.aggregate_mode {
        AggregateMode::Scaled => {
            billing::unit_min_cost(&s.billing, &s.scaled_family()?) * r_tot_floor
        }
        AggregateMode::Convolved => {
            if r_tot_floor > 0.0 {
                mc_min_billing(s, r_tot_floor, mc)?.0
            } else {
                0.0
            }
        }
    };

    let binding = if feas.margin <= 1e-9 * s.b_mean.abs() {
        BindingConstraint::Both
    } else {
        BindingConstraint::BillingTarget
    };

    Ok(AdmissionPlan {
        counts,
        counts_floor,
        r_tot,
        feasible: true,
        binding,
        floored_billing,
        billing_ci95,
    })
}

/// Monte Carlo estimate of the minimum billing for the convolved aggregate
/// at mean volume `r_tot` (proportional-fair counts): the empirical optimal
/// quota is the sample quantile at `p_b/(i_b+p_b)`, and the billing at that
/// quota is averaged over the sample set. Returns (estimate, 95% CI
/// half-width).
fn mc_min_billing(s: &AggregatorScenario, r_tot: f64, mc: &McSettings) -> Result<(f64, f64)> {
    let a = s.zones.len() as f64;
    let pairs: Vec<(QueryVolumeDistribution, f64)> = s
        .zones
        .iter()
        .map(|z| (z.dist, r_tot / (a * z.dist.mean())))
        .collect();
    let n = mc.n_samples.max(2);
    let mut sums = Vec::with_capacity(n);
    for j in 0..n {
        sums.push(dist::convolved_sum(&pairs, mc.seed, j as u64, SamplerMode::InverseTransform)?);
    }
    let mut sorted = sums.clone();
    sorted.sort_by(f64::total_cmp);
    let q = s.billing.quota_quantile();
    let idx = ((n as f64 * q).floor() as usize).min(n - 1);
    let c_b = sorted[idx];

    let BillingParams { g_b, i_b, p_b, .. } = s.billing;
    let costs: Vec<f64> = sums
        .iter()
        .map(|&v| g_b * v + i_b * (c_b - v).max(0.0) + p_b * (v - c_b).max(0.0))
        .collect();
    let mean = costs.iter().sum::<f64>() / n as f64;
    let var = costs.iter().map(|c| (c - mean) * (c - mean)).sum::<f64>() / (n as f64 - 1.0);
    let ci = 1.96 * (var / n as f64).sqrt();
    Ok((mean, ci))
}
