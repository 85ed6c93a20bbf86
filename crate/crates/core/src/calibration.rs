//! Noise parameters that reproduce target fringe visibilities and fidelity.
//!
//! Under the noise model the correlation matrix of the noisy state is
//! `s * diag(lx, -ly, lz)` with `lx = c b`, `ly = c a`, `lz = a b`, where
//! `a = 1 - 2 flip_x`, `b = 1 - 2 flip_y`, `c = 1 - 2 dephasing` and
//! `s = 1 - depolarizing`. Readout confusion scales every observed
//! correlation by `k = 1 - eps01 - eps10`. The visibilities fix `lx` and
//! `ly`, the fidelity fixes `lz`, and the three products invert in closed form.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measurement::{beta_grid, simulate_scan, AtomSetting, Detector, Sampling};
use crate::metrics::{fidelity, fit_fringe, fringe_from_dataset};
use crate::physics::{apply_noise, ideal_state, psi_plus, NoiseModel};
use crate::qmath::overlap;
use crate::tomography::{
    extract_correlations, linear_inversion, simulate_tomography, TomographySet,
};

/// Agreement demanded between targets and the re-simulated observables.
pub const CALIBRATION_TOL: f64 = 1e-3;

/// Fringe visibilities for atomic sigma_x and sigma_y analysis, and the
/// fidelity seen through the same readout.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Observables {
    pub vx: f64,
    pub vy: f64,
    pub fidelity: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub noise: NoiseModel,
    pub targets: Observables,
    pub achieved: Observables,
    pub max_error: f64,
}

/// Observables of the noisy ideal state, computed by exact-mode simulation:
/// fitted 18-point fringes and linear-inversion tomography.
pub fn simulate_observables(noise: &NoiseModel) -> Result<Observables> {
    let rho = ideal_state();
    let betas = beta_grid(18);
    let mut v = [0.0; 2];
    for (slot, atom) in [AtomSetting::SIGMA_X, AtomSetting::SIGMA_Y]
        .into_iter()
        .enumerate()
    {
        let ds = simulate_scan(&rho, atom, &betas, 1000, noise, Sampling::Exact)?;
        v[slot] = fit_fringe(&fringe_from_dataset(&ds, atom, Detector::Apd1)?)?.visibility;
    }
    let ds = simulate_tomography(&rho, 1000, noise, Sampling::Exact)?;
    let c = extract_correlations(&TomographySet::from_dataset(&ds)?);
    // fidelity is linear in rho, so the unprojected estimate is used as is
    let f = overlap(&psi_plus(), &linear_inversion(&c))?;
    Ok(Observables {
        vx: v[0],
        vy: v[1],
        fidelity: f,
    })
}

/// Fidelity of the state alone (no readout), for reference.
pub fn state_fidelity(noise: &NoiseModel) -> Result<f64> {
    let rho = apply_noise(&ideal_state(), noise)?;
    fidelity(&rho)
}

/// Fidelity interval reachable for visibilities `(vx, vy)` with the fixed
/// parts of `base`. `None` when the visibilities alone are out of reach.
pub fn fidelity_frontier(vx: f64, vy: f64, base: &NoiseModel) -> Option<(f64, f64)> {
    let ks = (1.0 - base.eps01 - base.eps10) * (1.0 - base.depolarizing);
    if ks <= 0.0 || vx <= 0.0 || vy <= 0.0 || vx > ks || vy > ks {
        return None;
    }
    let (lx, ly) = (vx / ks, vy / ks);
    let lo = lx * ly;
    let hi = (lx / ly).min(ly / lx);
    Some((
        (1.0 + vx + vy + ks * lo) / 4.0,
        (1.0 + vx + vy + ks * hi) / 4.0,
    ))
}

/// Solves for `dephasing`, `flip_x` and `flip_y`, keeping `depolarizing`,
/// `eps01` and `eps10` from `base`, then checks the result by re-simulation.
pub fn calibrate(targets: Observables, base: &NoiseModel) -> Result<Calibration> {
    base.validate()?;
    let Observables {
        vx,
        vy,
        fidelity: f,
    } = targets;
    for (name, v) in [("vx", vx), ("vy", vy), ("fidelity", f)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::Infeasible(format!("{name} = {v} is outside [0, 1]")));
        }
    }
    let k = 1.0 - base.eps01 - base.eps10;
    let s = 1.0 - base.depolarizing;
    let ks = k * s;
    if ks <= 0.0 {
        return Err(Error::Infeasible(
            "readout confusion and depolarization leave no visible correlation".into(),
        ));
    }
    if vx > ks + 1e-12 || vy > ks + 1e-12 {
        return Err(Error::Infeasible(format!(
            "visibilities ({vx}, {vy}) exceed the ceiling {ks:.6} set by depolarizing and readout"
        )));
    }
    if vx <= 0.0 || vy <= 0.0 {
        return Err(Error::Infeasible(
            "zero visibility needs the depolarizing parameter, not flip noise".into(),
        ));
    }
    let lx = (vx / ks).min(1.0);
    let ly = (vy / ks).min(1.0);
    let lz = (4.0 * f - 1.0 - vx - vy) / ks;
    let (lo, hi) = (lx * ly, (lx / ly).min(ly / lx));
    let slack = 1e-12;
    if !(lz >= lo - slack && lz <= hi + slack) {
        let (f_lo, f_hi) = fidelity_frontier(vx, vy, base).expect("visibilities checked above");
        return Err(Error::Infeasible(format!(
            "fidelity {f} is unreachable with visibilities ({vx}, {vy}); achievable fidelity is [{f_lo:.6}, {f_hi:.6}]"
        )));
    }
    let lz = lz.clamp(lo, hi);
    let a = (ly * lz / lx).sqrt().min(1.0);
    let b = (lx * lz / ly).sqrt().min(1.0);
    let c = (lx * ly / lz).sqrt().min(1.0);
    let noise = NoiseModel {
        dephasing: (1.0 - c) / 2.0,
        flip_x: (1.0 - a) / 2.0,
        flip_y: (1.0 - b) / 2.0,
        ..*base
    };
    let achieved = simulate_observables(&noise)?;
    let max_error = (achieved.vx - vx)
        .abs()
        .max((achieved.vy - vy).abs())
        .max((achieved.fidelity - f).abs());
    if max_error > CALIBRATION_TOL {
        return Err(Error::Infeasible(format!(
            "re-simulated observables {achieved:?} miss the targets by {max_error:.3e}"
        )));
    }
    Ok(Calibration {
        noise,
        targets,
        achieved,
        max_error,
    })
}
