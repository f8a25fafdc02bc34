//! Device-side energy model: expected consumption, one-sided variation, and
//! the two constrained threshold optimizations.
//!
//! A device spends `g_e` Joule per produced-and-transmitted query bit and
//! `i_e` Joule per bit-interval while idling. Whenever the interval's query
//! volume falls below `c_e * E[psi]` bits the device idles for the
//! difference, so per monitoring interval
//!
//! ```text
//! E_exp = g_e * E[psi] + i_e * L(c_e * E[psi])          (expected energy)
//! E_var = g_e^2 * U2(c_e * E[psi])                      (one-sided variation)
//! ```
//!
//! with `L` and `U2` the lower/upper partial moments of the volume
//! distribution. `E_exp` is convex nondecreasing and `E_var` convex
//! nonincreasing in `c_e`, so each constrained minimization is solved by
//! meeting its constraint with equality:
//!
//! - primary: minimize `E_var` subject to `E_exp <= e_max_exp`;
//! - dual: minimize `E_exp` subject to `E_var <= e_max_var`.
//!
//! Closed forms exist for every family (uniform and exponential throughout;
//! Pareto for the dual; the fixed-volume limit for both). The remaining
//! solves bisect the strictly monotone objective, which reaches the same
//! optimum by convexity.

use crate::dist::{Family, QueryVolumeDistribution};
use crate::numerics::{erf, find_root, lambert_w0, Tolerance};
use crate::{Error, Result};

/// Per-bit energy rates: `g_e` while producing/transmitting, `i_e` while
/// idle, both in Joule per bit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyRates {
    pub g_e: f64,
    pub i_e: f64,
}

impl EnergyRates {
    pub fn new(g_e: f64, i_e: f64) -> Result<Self> {
        if !(g_e > 0.0 && g_e.is_finite()) {
            return Err(Error::InvalidParameter(format!("g_e must be > 0, got {g_e}")));
        }
        if !(i_e >= 0.0 && i_e.is_finite()) {
            return Err(Error::InvalidParameter(format!("i_e must be >= 0, got {i_e}")));
        }
        Ok(Self { g_e, i_e })
    }
}

/// Energy rates plus the activation threshold `c_e` (fraction of the mean
/// volume below which the device idles).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyParams {
    pub rates: EnergyRates,
    pub c_e: f64,
}

impl EnergyParams {
    pub fn new(rates: EnergyRates, c_e: f64) -> Result<Self> {
        if !(c_e >= 0.0 && c_e.is_finite()) {
            return Err(Error::InvalidParameter(format!("c_e must be >= 0, got {c_e}")));
        }
        Ok(Self { rates, c_e })
    }
}

/// Optional budgets for the two constrained problems, per monitoring
/// interval: a cap on expected energy (J) and/or on the one-sided
/// variation (J^2).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EnergyConstraints {
    pub e_max_exp: Option<f64>,
    pub e_max_var: Option<f64>,
}

impl EnergyConstraints {
    pub fn new(e_max_exp: Option<f64>, e_max_var: Option<f64>) -> Result<Self> {
        for (name, v) in [("e_max_exp", e_max_exp), ("e_max_var", e_max_var)] {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(Error::InvalidParameter(format!("{name} must be > 0, got {v}")));
                }
            }
        }
        Ok(Self { e_max_exp, e_max_var })
    }
}

/// A device population: its query-volume distribution and the monitoring
/// interval length in seconds. The interval length is carried for reporting
/// only; every model quantity is already per-interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeviceProfile {
    pub dist: QueryVolumeDistribution,
    pub interval_seconds: f64,
}

impl DeviceProfile {
    pub fn new(dist: QueryVolumeDistribution, interval_seconds: f64) -> Result<Self> {
        if !(interval_seconds > 0.0 && interval_seconds.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "monitoring interval must be > 0 s, got {interval_seconds}"
            )));
        }
        Ok(Self { dist, interval_seconds })
    }
}

/// Expected energy per monitoring interval, in Joule.
///
/// Dispatches to the family closed form; `expected_energy_generic` follows
/// the partial-moment route and the two agree to working precision.
pub fn expected_energy(p: &EnergyParams, d: &DeviceProfile) -> f64 {
    let EnergyRates { g_e, i_e } = p.rates;
    let c = p.c_e;
    let r = d.dist.mean();
    match d.dist.family() {
        Family::Uniform if c <= 2.0 => (g_e + i_e * c * c / 4.0) * r,
        Family::Pareto => {
            let alpha = d.dist.shape().unwrap();
            let lo = (alpha - 1.0) / alpha;
            if c < lo {
                // Below the support the device never idles.
                g_e * r
            } else {
                let coeff = lo.powf(alpha - 1.0) / alpha; // (a-1)^(a-1) / a^a
                (g_e + i_e * (coeff * c.powf(1.0 - alpha) + c - 1.0)) * r
            }
        }
        Family::Exponential => (g_e + i_e * (c + (-c).exp() - 1.0)) * r,
        Family::HalfGaussian => {
            let u = c / std::f64::consts::PI.sqrt();
            (g_e + i_e * c * erf(u) + i_e * (-u * u).exp_m1()) * r
        }
        Family::Fixed => (g_e + i_e * (c - 1.0).max(0.0)) * r,
        // Uniform beyond the practical threshold range falls back to the
        // generic partial-moment route rather than extrapolating the
        // closed form.
        Family::Uniform => expected_energy_generic(p, d),
    }
}

/// Expected energy via the generic partial-moment route,
/// `g_e E[psi] + i_e L(c_e E[psi])`.
pub fn expected_energy_generic(p: &EnergyParams, d: &DeviceProfile) -> f64 {
    let r = d.dist.mean();
    p.rates.g_e * r + p.rates.i_e * d.dist.lower_partial_moment(p.c_e * r)
}

/// One-sided energy variation per monitoring interval, in Joule^2.
pub fn energy_variation(p: &EnergyParams, d: &DeviceProfile) -> f64 {
    let g_e = p.rates.g_e;
    let c = p.c_e;
    let r = d.dist.mean();
    match d.dist.family() {
        Family::Uniform if c <= 2.0 => {
            let d3 = (2.0 - c) * (2.0 - c) * (2.0 - c);
            g_e * g_e * d3 / 6.0 * r * r
        }
        Family::Uniform => 0.0,
        Family::Pareto => {
            let alpha = d.dist.shape().unwrap();
            let lo = (alpha - 1.0) / alpha;
            if c < lo {
                energy_variation_generic(p, d)
            } else {
                let coeff = lo.powf(alpha - 1.0) / alpha;
                2.0 * g_e * g_e * coeff * c.powf(2.0 - alpha) / (alpha - 2.0) * r * r
            }
        }
        Family::Exponential => 2.0 * g_e * g_e * (-c).exp() * r * r,
        Family::HalfGaussian => {
            let u = c / std::f64::consts::PI.sqrt();
            g_e * g_e / 2.0
                * ((2.0 * c * c + std::f64::consts::PI) * (1.0 - erf(u))
                    - 2.0 * c * (-u * u).exp())
                * r
                * r
        }
        Family::Fixed => {
            let excess = (1.0 - c).max(0.0) * r;
            g_e * g_e * excess * excess
        }
    }
}

/// One-sided variation via the generic partial-moment route,
/// `g_e^2 U2(c_e E[psi])`.
pub fn energy_variation_generic(p: &EnergyParams, d: &DeviceProfile) -> f64 {
    let r = d.dist.mean();
    p.rates.g_e * p.rates.g_e * d.dist.upper_sq_partial_moment(p.c_e * r)
}

/// Threshold fractions of practical relevance for a family: beyond this
/// range every interval idles (or, for the uniform family, the closed
/// forms stop applying). Reports use it to flag diagnostic-only inputs.
pub fn practical_threshold_limit(dist: &QueryVolumeDistribution) -> f64 {
    match dist.family() {
        Family::Uniform => 2.0,
        _ => f64::INFINITY,
    }
}

fn root_tol() -> Tolerance {
    Tolerance { rel: 1e-12, abs: 0.0, max_iter: 200 }
}

/// Solve the primary problem: the `c_e` minimizing the one-sided variation
/// subject to `E_exp <= e_max_exp`. By monotonicity the budget binds, so
/// the result satisfies `E_exp(c_e) = e_max_exp`.
///
/// Fails with an infeasible-budget error when `e_max_exp <= g_e * r` (the
/// budget cannot even cover production) and, for the uniform family, with a
/// domain error when `e_max_exp >= (g_e + i_e) * r` (no threshold in the
/// practical range reaches the budget).
pub fn solve_primary(rates: &EnergyRates, d: &DeviceProfile, e_max_exp: f64) -> Result<f64> {
    let r = d.dist.mean();
    let EnergyRates { g_e, i_e } = *rates;
    if !(e_max_exp > g_e * r) {
        return Err(Error::Infeasible(format!(
            "energy budget {e_max_exp} J cannot cover production cost {} J",
            g_e * r
        )));
    }
    if i_e == 0.0 {
        return Err(Error::Infeasible(
            "idle rate is zero: expected energy does not depend on the threshold".into(),
        ));
    }
    let surplus = (e_max_exp - g_e * r) / (i_e * r);
    match d.dist.family() {
        Family::Uniform => {
            if e_max_exp >= (g_e + i_e) * r {
                return Err(Error::Domain(format!(
                    "uniform energy budget must lie below (g_e + i_e) r = {} J",
                    (g_e + i_e) * r
                )));
            }
            Ok(2.0 * surplus.sqrt())
        }
        Family::Exponential => {
            // c + exp(-c) = 1 + surplus, solved by the principal Lambert W
            // branch; the argument stays within (-1/e, 0).
            let k = 1.0 + surplus;
            let c = k + lambert_w0(-(-k).exp())?;
            Ok(c.max(0.0))
        }
        Family::Fixed => Ok(1.0 + surplus),
        Family::Pareto | Family::HalfGaussian => {
            // Bracketed bisection on the strictly increasing E_exp.
            let lo = match d.dist.family() {
                Family::Pareto => {
                    let alpha = d.dist.shape().unwrap();
                    (alpha - 1.0) / alpha
                }
                _ => 0.0,
            };
            // L(c r) >= c r - r gives E_exp >= g r + i r (c - 1), so the
            // budget is certainly reached by c = 1 + surplus.
            let hi = (1.0 + surplus).max(lo + 1e-12);
            let f = |c: f64| {
                let p = EnergyParams { rates: *rates, c_e: c };
                expected_energy(&p, d) - e_max_exp
            };
            find_root(f, lo, hi, &root_tol())
        }
    }
}

/// Solve the dual problem: the `c_e` minimizing the expected energy subject
/// to `E_var <= e_max_var`.
///
/// When the cap already holds unconstrained (`e_max_var >= E_var(0)`) the
/// minimum-energy threshold `c_e = 0` is returned; otherwise the cap binds
/// and the result satisfies `E_var(c_e) = e_max_var`. Always feasible since
/// the variation decays to zero for large thresholds.
pub fn solve_dual(rates: &EnergyRates, d: &DeviceProfile, e_max_var: f64) -> Result<f64> {
    if !(e_max_var > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "variation cap must be > 0, got {e_max_var}"
        )));
    }
    let r = d.dist.mean();
    let g_e = rates.g_e;
    let at_zero = g_e * g_e * d.dist.second_moment();
    if e_max_var >= at_zero {
        return Ok(0.0);
    }
    match d.dist.family() {
        Family::Uniform => {
            let c = 2.0 - (6.0 * e_max_var / (g_e * g_e * r * r)).cbrt();
            Ok(c)
        }
        Family::Exponential => Ok((2.0 * g_e * g_e * r * r / e_max_var).ln()),
        Family::Pareto => {
            let alpha = d.dist.shape().unwrap();
            let lo = (alpha - 1.0) / alpha;
            let coeff = lo.powf(alpha - 1.0) / alpha;
            let c = (alpha - 2.0) * e_max_var / (2.0 * g_e * g_e * coeff * r * r);
            let c = c.powf(1.0 / (2.0 - alpha));
            if c >= lo {
                Ok(c)
            } else {
                // Cap binds below the support: bisect the quadratic branch.
                let f = |x: f64| {
                    let p = EnergyParams { rates: *rates, c_e: x };
                    energy_variation(&p, d) - e_max_var
                };
                find_root(f, 0.0, lo, &root_tol())
            }
        }
        Family::Fixed => Ok(1.0 - e_max_var.sqrt() / (g_e * r)),
        Family::HalfGaussian => {
            // Strictly decreasing; grow the bracket until the cap is met.
            let mut hi = 1.0;
            let f = |x: f64| {
                let p = EnergyParams { rates: *rates, c_e: x };
                energy_variation(&p, d) - e_max_var
            };
            while f(hi) > 0.0 {
                hi *= 2.0;
                if hi > 1e9 {
                    return Err(Error::NonConvergence {
                        what: "solve_dual".into(),
                        detail: "variation cap not reached within bracket".into(),
                    });
                }
            }
            find_root(f, 0.0, hi, &root_tol())
        }
    }
}

/// Solve whichever constrained problem the given budget selects.
pub fn solve_constrained(
    rates: &EnergyRates,
    d: &DeviceProfile,
    constraints: &EnergyConstraints,
) -> Result<f64> {
    match (constraints.e_max_exp, constraints.e_max_var) {
        (Some(e), None) => solve_primary(rates, d, e),
        (None, Some(v)) => solve_dual(rates, d, v),
        (Some(_), Some(_)) => Err(Error::InvalidParameter(
            "exactly one of e_max_exp / e_max_var must be set, found both".into(),
        )),
        (None, None) => Err(Error::InvalidParameter(
            "exactly one of e_max_exp / e_max_var must be set, found neither".into(),
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::QueryVolumeDistribution;

    fn profile(dist: QueryVolumeDistribution) -> DeviceProfile {
        DeviceProfile::new(dist, 60.0).unwrap()
    }

    fn rates(g: f64, i: f64) -> EnergyRates {
        EnergyRates::new(g, i).unwrap()
    }

    #[test]
    fn uniform_closed_forms() {
        let d = profile(QueryVolumeDistribution::uniform(1.0).unwrap());
        let p = EnergyParams::new(rates(1.0, 1.0), 1.0).unwrap();
        assert!((expected_energy(&p, &d) - 1.25).abs() < 1e-15);
        let p2 = EnergyParams::new(rates(1.0, 1.0), 2.0).unwrap();
        assert_eq!(energy_variation(&p2, &d), 0.0);
    }

    #[test]
    fn zero_threshold_gives_production_only() {
        for dist in [
            QueryVolumeDistribution::uniform(3.0).unwrap(),
            QueryVolumeDistribution::pareto(3.0, 4.0).unwrap(),
            QueryVolumeDistribution::exponential(3.0).unwrap(),
            QueryVolumeDistribution::half_gaussian(3.0).unwrap(),
            QueryVolumeDistribution::fixed(3.0).unwrap(),
        ] {
            let d = profile(dist);
            let p = EnergyParams::new(rates(2.0, 0.7), 0.0).unwrap();
            assert!(
                (expected_energy(&p, &d) - 6.0).abs() <= 1e-12,
                "{}",
                dist.family()
            );
        }
    }

    #[test]
    fn pareto_below_support_is_production_only() {
        let d = profile(QueryVolumeDistribution::pareto(1.0, 4.0).unwrap());
        let p = EnergyParams::new(rates(1.5, 1.0), 0.5).unwrap();
        assert_eq!(expected_energy(&p, &d), 1.5);
        let pv = EnergyParams::new(rates(1.0, 0.0), 0.75).unwrap();
        assert!((energy_variation(&pv, &d) - 0.1875).abs() < 1e-14);
    }

    #[test]
    fn closed_forms_match_generic_route() {
        let dists = [
            QueryVolumeDistribution::uniform(2.5).unwrap(),
            QueryVolumeDistribution::pareto(2.5, 3.3).unwrap(),
            QueryVolumeDistribution::exponential(2.5).unwrap(),
            QueryVolumeDistribution::half_gaussian(2.5).unwrap(),
            QueryVolumeDistribution::fixed(2.5).unwrap(),
        ];
        for dist in dists {
            let d = profile(dist);
            for c in [0.0, 0.1, 0.5, 0.75, 1.0, 1.3, 1.9, 2.4] {
                let p = EnergyParams::new(rates(1.7e-6, 6.1e-7), c).unwrap();
                let a = expected_energy(&p, &d);
                let b = expected_energy_generic(&p, &d);
                assert!(
                    (a - b).abs() <= 1e-10 * b.abs().max(1e-30),
                    "{} E_exp at c = {c}: {a} vs {b}",
                    dist.family()
                );
                let av = energy_variation(&p, &d);
                let bv = energy_variation_generic(&p, &d);
                assert!(
                    (av - bv).abs() <= 1e-10 * bv.abs().max(1e-30),
                    "{} E_var at c = {c}: {av} vs {bv}",
                    dist.family()
                );
            }
        }
    }

    #[test]
    fn solve_primary_examples() {
        let d = profile(QueryVolumeDistribution::uniform(1.0).unwrap());
        let c = solve_primary(&rates(1.0, 1.0), &d, 1.25).unwrap();
        assert!((c - 1.0).abs() < 1e-12);

        let e = profile(QueryVolumeDistribution::exponential(1.0).unwrap());
        let c = solve_primary(&rates(1.0, 1.0), &e, 1.19315).unwrap();
        assert!((c - 0.69315).abs() < 1e-4, "c = {c}");
        // Round trip through the closed form.
        let p = EnergyParams::new(rates(1.0, 1.0), c).unwrap();
        assert!((expected_energy(&p, &e) - 1.19315).abs() < 1e-12);

        // Boundary of feasibility: budget barely above production cost.
        let c = solve_primary(&rates(1.0, 1.0), &e, 1.0 + 1e-9).unwrap();
        assert!(c < 1e-3, "c = {c}");

        assert!(matches!(
            solve_primary(&rates(1.0, 1.0), &e, 0.9),
            Err(Error::Infeasible(_))
        ));
        assert!(matches!(
            solve_primary(&rates(1.0, 1.0), &d, 2.5),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn solve_dual_examples() {
        let d = profile(QueryVolumeDistribution::uniform(1.0).unwrap());
        let c = solve_dual(&rates(1.0, 1.0), &d, 1.0 / 6.0).unwrap();
        assert!((c - 1.0).abs() < 1e-12);
        assert_eq!(solve_dual(&rates(1.0, 1.0), &d, 4.0 / 3.0).unwrap(), 0.0);
        assert_eq!(solve_dual(&rates(1.0, 1.0), &d, 2.0).unwrap(), 0.0);

        let p = profile(QueryVolumeDistribution::pareto(1.0, 4.0).unwrap());
        let c = solve_dual(&rates(1.0, 1.0), &p, 0.1875).unwrap();
        assert!((c - 0.75).abs() < 1e-10, "c = {c}");

        let e = profile(QueryVolumeDistribution::exponential(1.0).unwrap());
        let c = solve_dual(&rates(1.0, 1.0), &e, 2.0 * (-1.0f64).exp()).unwrap();
        assert!((c - 1.0).abs() < 1e-12);
    }

    #[test]
    fn dual_below_pareto_support() {
        // Cap between E_var at the support edge and E_var(0) forces the
        // quadratic branch.
        let dist = QueryVolumeDistribution::pareto(1.0, 4.0).unwrap();
        let d = profile(dist);
        let g = 1.0;
        let at_edge = g * g * dist.upper_sq_partial_moment(0.75);
        let at_zero = g * g * dist.second_moment();
        let cap = 0.5 * (at_edge + at_zero);
        let c = solve_dual(&rates(g, 1.0), &d, cap).unwrap();
        assert!(c > 0.0 && c < 0.75, "c = {c}");
        let p = EnergyParams::new(rates(g, 1.0), c).unwrap();
        assert!((energy_variation(&p, &d) - cap).abs() <= 1e-9 * cap);
    }

    #[test]
    fn monotone_and_convex_in_threshold() {
        for dist in [
            QueryVolumeDistribution::uniform(1.0).unwrap(),
            QueryVolumeDistribution::pareto(1.0, 3.0).unwrap(),
            QueryVolumeDistribution::exponential(1.0).unwrap(),
            QueryVolumeDistribution::half_gaussian(1.0).unwrap(),
        ] {
            let d = profile(dist);
            let rt = rates(1.3, 0.8);
            let grid: Vec<f64> = (0..100).map(|k| 2.2 * k as f64 / 99.0).collect();
            let ee: Vec<f64> = grid
                .iter()
                .map(|&c| expected_energy(&EnergyParams { rates: rt, c_e: c }, &d))
                .collect();
            let ev: Vec<f64> = grid
                .iter()
                .map(|&c| energy_variation(&EnergyParams { rates: rt, c_e: c }, &d))
                .collect();
            for w in ee.windows(2) {
                assert!(w[1] >= w[0] - 1e-12, "{}: E_exp not nondecreasing", dist.family());
            }
            for w in ev.windows(2) {
                assert!(w[1] <= w[0] + 1e-12, "{}: E_var not nonincreasing", dist.family());
            }
            for w in ee.windows(3) {
                assert!(
                    w[2] - 2.0 * w[1] + w[0] >= -1e-8,
                    "{}: E_exp second difference negative",
                    dist.family()
                );
            }
            for w in ev.windows(3) {
                assert!(
                    w[2] - 2.0 * w[1] + w[0] >= -1e-8 * ev[0].abs().max(1.0),
                    "{}: E_var second difference negative",
                    dist.family()
                );
            }
        }
    }
}
