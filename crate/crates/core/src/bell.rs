//! Feasibility arithmetic for an event-ready Bell test between two atoms
//! entangled by swapping from two atom-photon pairs.

use serde::{Deserialize, Serialize};

use crate::error::{check_range, Error, Result};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// CHSH classical bound is reached at this visibility.
pub const THRESHOLD_VISIBILITY: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Inputs in SI units. Defaults are the figures quoted for a 75 m fiber link.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentPlan {
    /// Atom-photon visibility of each node.
    pub v_atph: f64,
    /// Multiplies the swapped visibility (1 = ideal Bell-state measurement).
    pub bsm_fidelity: f64,
    /// Photon detection efficiency per emission.
    pub eta_ph: f64,
    /// Combined transmission of both fibers.
    pub transmission: f64,
    /// Excitation attempts per second over the link, s^-1.
    pub rep_rate: f64,
    /// Success probability of the photonic Bell-state measurement.
    pub p_bsm: f64,
    /// Fraction of wall-clock time spent taking data.
    pub duty: f64,
    /// Attempt rate of a single-node experiment, used for the heralded-pair rate.
    pub attempt_rate: f64,
    pub target_sigmas: f64,
    pub t_stirap: f64,
    /// Excited-state lifetimes waited for fluorescence readout.
    pub n_lifetimes: f64,
    pub lifetime_tau: f64,
    /// Quoted overall measurement window; the locality bound uses the larger
    /// of this and the STIRAP + readout time.
    pub measurement_window: f64,
}

impl Default for ExperimentPlan {
    fn default() -> Self {
        Self {
            v_atph: 0.86,
            bsm_fidelity: 1.0,
            eta_ph: 5e-4,
            transmission: 0.9,
            rep_rate: 5e5,
            p_bsm: 0.5,
            duty: 1.0,
            attempt_rate: 400.0,
            target_sigmas: 3.0,
            t_stirap: 0.2e-6,
            n_lifetimes: 10.0,
            lifetime_tau: 26e-9,
            measurement_window: 0.5e-6,
        }
    }
}

fn check_positive(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::OutOfRange {
            name,
            value,
            min: 0.0,
            max: f64::INFINITY,
        })
    }
}

fn check_non_negative(name: &'static str, value: f64) -> Result<()> {
    check_range(name, value, 0.0, f64::INFINITY)?;
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::OutOfRange {
            name,
            value,
            min: 0.0,
            max: f64::MAX,
        })
    }
}

impl ExperimentPlan {
    pub fn validate(&self) -> Result<()> {
        check_range("v_atph", self.v_atph, 0.0, 1.0)?;
        check_range("bsm_fidelity", self.bsm_fidelity, 0.0, 1.0)?;
        check_range("eta_ph", self.eta_ph, 0.0, 1.0)?;
        check_range("transmission", self.transmission, 0.0, 1.0)?;
        check_range("p_bsm", self.p_bsm, 0.0, 1.0)?;
        check_range("duty", self.duty, 0.0, 1.0)?;
        check_positive("duty", self.duty)?;
        check_positive("rep_rate", self.rep_rate)?;
        check_positive("attempt_rate", self.attempt_rate)?;
        check_positive("target_sigmas", self.target_sigmas)?;
        check_non_negative("t_stirap", self.t_stirap)?;
        check_non_negative("n_lifetimes", self.n_lifetimes)?;
        check_non_negative("lifetime_tau", self.lifetime_tau)?;
        check_non_negative("measurement_window", self.measurement_window)?;
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanReport {
    pub v_atat: f64,
    pub chsh_s: f64,
    pub pairs_needed: u64,
    /// Atom-atom pairs per second.
    pub pair_rate: f64,
    /// Heralded atom-photon pairs per second in a single node.
    pub heralding_rate: f64,
    /// Seconds.
    pub duration: f64,
    pub collapse_probability: f64,
    /// Seconds.
    pub measurement_time: f64,
    /// Meters.
    pub min_separation: f64,
}

/// `v1 * v2 * kappa_bsm`, clipped to [0, 1].
pub fn swapped_visibility(v1: f64, v2: f64, kappa_bsm: f64) -> Result<f64> {
    check_range("v1", v1, 0.0, 1.0)?;
    check_range("v2", v2, 0.0, 1.0)?;
    check_range("kappa_bsm", kappa_bsm, 0.0, 1.0)?;
    Ok((v1 * v2 * kappa_bsm).clamp(0.0, 1.0))
}

/// Expected CHSH value `2 sqrt(2) v` for a Werner-like pair of visibility `v`.
pub fn chsh_expected(v: f64) -> f64 {
    2.0 * std::f64::consts::SQRT_2 * v
}

/// Standard deviation of the CHSH estimate with `n_pairs` split evenly over
/// four settings, each correlation with variance `(1 - E^2) / (n/4)`.
pub fn chsh_sigma(v: f64, n_pairs: f64) -> f64 {
    let e = v / std::f64::consts::SQRT_2;
    (4.0 * (1.0 - e * e) / (n_pairs / 4.0)).sqrt()
}

/// `(S - 2) / sigma_S`.
pub fn violation_sigmas(v: f64, n_pairs: u64) -> Result<f64> {
    check_range("v", v, 0.0, 1.0)?;
    if n_pairs < 4 {
        return Err(Error::Invalid(format!(
            "need at least 4 pairs (one per setting), got {n_pairs}"
        )));
    }
    Ok((chsh_expected(v) - 2.0) / chsh_sigma(v, n_pairs as f64))
}

/// Smallest pair count whose expected violation reaches `k` standard deviations.
pub fn pairs_for_sigmas(v: f64, k: f64) -> Result<u64> {
    check_range("v", v, 0.0, 1.0)?;
    check_positive("k", k)?;
    let excess = chsh_expected(v) - 2.0;
    if excess <= 1e-12 {
        return Err(Error::NoViolation(v));
    }
    let e = v / std::f64::consts::SQRT_2;
    // k = excess / sqrt(16 (1 - E^2) / n)
    let n = 16.0 * (1.0 - e * e) * k * k / (excess * excess);
    if n.is_nan() || n >= 1e18 {
        return Err(Error::Invalid(format!(
            "pair count for v={v}, k={k} overflows"
        )));
    }
    let mut n = (n.ceil() as u64).max(4);
    // guard the ceiling against rounding in the closed form
    for _ in 0..4 {
        if violation_sigmas(v, n)? >= k {
            break;
        }
        n += 1;
    }
    Ok(n)
}

/// Atom-atom pairs per second: `rep_rate * eta^2 * transmission * p_bsm`.
pub fn pair_rate(plan: &ExperimentPlan) -> Result<f64> {
    plan.validate()?;
    Ok(plan.rep_rate * plan.eta_ph * plan.eta_ph * plan.transmission * plan.p_bsm)
}

/// Heralded atom-photon pairs per second in one node: `attempt_rate * eta`.
pub fn heralding_rate(plan: &ExperimentPlan) -> Result<f64> {
    plan.validate()?;
    Ok(plan.attempt_rate * plan.eta_ph)
}

/// Seconds of wall-clock time to collect `n_pairs`.
pub fn measurement_duration(n_pairs: u64, rate: f64, duty: f64) -> Result<f64> {
    check_positive("rate", rate)?;
    check_range("duty", duty, 0.0, 1.0)?;
    check_positive("duty", duty)?;
    Ok(n_pairs as f64 / (rate * duty))
}

/// Probability that fluorescence readout has projected the atom after
/// `n_lifetimes` excited-state lifetimes.
pub fn collapse_probability(n_lifetimes: f64) -> Result<f64> {
    check_non_negative("n_lifetimes", n_lifetimes)?;
    Ok(-(-n_lifetimes).exp_m1())
}

/// Distance light covers during the measurement, meters.
pub fn min_separation(t_meas: f64) -> Result<f64> {
    check_non_negative("t_meas", t_meas)?;
    Ok(SPEED_OF_LIGHT * t_meas)
}

pub fn build_plan(plan: &ExperimentPlan) -> Result<PlanReport> {
    plan.validate()?;
    let v_atat = swapped_visibility(plan.v_atph, plan.v_atph, plan.bsm_fidelity)?;
    let pairs_needed = pairs_for_sigmas(v_atat, plan.target_sigmas)?;
    let rate = pair_rate(plan)?;
    let t_meas =
        (plan.t_stirap + plan.n_lifetimes * plan.lifetime_tau).max(plan.measurement_window);
    Ok(PlanReport {
        v_atat,
        chsh_s: chsh_expected(v_atat),
        pairs_needed,
        pair_rate: rate,
        heralding_rate: heralding_rate(plan)?,
        duration: measurement_duration(pairs_needed, rate, plan.duty)?,
        collapse_probability: collapse_probability(plan.n_lifetimes)?,
        measurement_time: t_meas,
        min_separation: min_separation(t_meas)?,
    })
}
