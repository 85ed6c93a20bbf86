//! The atom-photon state produced by the `F'=0 -> F=1` decay, and the noise
//! channels that degrade it.

use std::f64::consts::FRAC_1_SQRT_2;

use serde::{Deserialize, Serialize};

use crate::error::{check_range, Error, Result};
use crate::qmath::{
    identity2, identity4, pauli, tensor_product, Axis, ComplexMatrix, DensityMatrix, Ket, C64,
    NORM_TOL,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarization {
    SigmaPlus,
    Pi,
    SigmaMinus,
}

/// One spontaneous-emission branch of the excited level.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecayChannel {
    /// Final Zeeman sublevel, one of -1, 0, +1.
    pub m_f: i8,
    pub polarization: Polarization,
    pub amplitude: C64,
    /// Whether the photon reaches the collection optics on the quantization axis.
    pub collected: bool,
}

impl DecayChannel {
    /// The three `F'=0 -> F=1` branches with Clebsch-Gordan amplitudes
    /// `<1 m; 1 -m | 0 0> = (-1)^(1-m) / sqrt(3)`.
    pub fn standard_set() -> [DecayChannel; 3] {
        let w = 1.0 / 3f64.sqrt();
        [
            DecayChannel {
                m_f: -1,
                polarization: Polarization::SigmaPlus,
                amplitude: C64::new(w, 0.0),
                collected: true,
            },
            DecayChannel {
                m_f: 0,
                polarization: Polarization::Pi,
                amplitude: C64::new(-w, 0.0),
                collected: false,
            },
            DecayChannel {
                m_f: 1,
                polarization: Polarization::SigmaMinus,
                amplitude: C64::new(w, 0.0),
                collected: true,
            },
        ]
    }

    fn validate(&self) -> Result<()> {
        let expected = match self.m_f {
            -1 => Polarization::SigmaPlus,
            0 => Polarization::Pi,
            1 => Polarization::SigmaMinus,
            m => return Err(Error::Invalid(format!("m_F = {m} is not a F=1 sublevel"))),
        };
        if self.polarization != expected {
            return Err(Error::Invalid(format!(
                "decay to m_F = {} emits {:?}, not {:?}",
                self.m_f, expected, self.polarization
            )));
        }
        if self.collected == (self.polarization == Polarization::Pi) {
            return Err(Error::Invalid(
                "exactly the pi channel is uncollected on the quantization axis".into(),
            ));
        }
        Ok(())
    }
}

/// `|Psi+> = (|-1>|s+> + |+1>|s->) / sqrt(2)`, amplitudes `(1, 0, 0, 1) / sqrt(2)`.
pub fn psi_plus() -> Ket {
    let h = C64::new(FRAC_1_SQRT_2, 0.0);
    let z = C64::new(0.0, 0.0);
    Ket::new(&[h, z, z, h]).expect("4 amplitudes")
}

pub fn ideal_state() -> DensityMatrix {
    DensityMatrix::pure(&psi_plus()).expect("Bell state is physical")
}

/// Coherent superposition of the collected decay branches.
pub fn state_from_channels(channels: &[DecayChannel]) -> Result<DensityMatrix> {
    for ch in channels {
        ch.validate()?;
    }
    let total: f64 = channels.iter().map(|c| c.amplitude.norm_sqr()).sum();
    if (total - 1.0).abs() > NORM_TOL {
        return Err(Error::NotNormalized(total.sqrt()));
    }
    let mut amps = [C64::new(0.0, 0.0); 4];
    for ch in channels.iter().filter(|c| c.collected) {
        // |-1>|s+> is index 0, |+1>|s-> is index 3
        let idx = match ch.polarization {
            Polarization::SigmaPlus => 0,
            Polarization::SigmaMinus => 3,
            Polarization::Pi => unreachable!("validated"),
        };
        amps[idx] += ch.amplitude;
    }
    let ket = Ket::new(&amps)?;
    if ket.norm() == 0.0 {
        return Err(Error::Invalid(
            "no collected decay channel: no photon reaches the analyzer".into(),
        ));
    }
    DensityMatrix::pure(&ket)
}

/// Parameters of the channels between the ideal state and the measured data.
///
/// State channels act in this order: white noise, then atomic `sigma_z`,
/// `sigma_x` and `sigma_y` flips. Readout confusion acts on measurement
/// outcomes, not on the state (see [`crate::measurement::apply_readout_confusion`]).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseModel {
    /// Weight `p` of `I/4` admixture.
    pub depolarizing: f64,
    /// Weight `q` of the atomic phase flip `(sigma_z (x) I) rho (sigma_z (x) I)`.
    pub dephasing: f64,
    /// Weight of the atomic bit flip `sigma_x (x) I`.
    pub flip_x: f64,
    /// Weight of the atomic flip `sigma_y (x) I`.
    pub flip_y: f64,
    /// Probability that a true "transferred" (F=2) outcome is read as "remained".
    pub eps01: f64,
    /// Probability that a true "remained" (F=1) outcome is read as "transferred".
    pub eps10: f64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self::NONE
    }
}

impl NoiseModel {
    pub const NONE: NoiseModel = NoiseModel {
        depolarizing: 0.0,
        dephasing: 0.0,
        flip_x: 0.0,
        flip_y: 0.0,
        eps01: 0.0,
        eps10: 0.0,
    };

    pub fn depolarizing(p: f64) -> Self {
        Self {
            depolarizing: p,
            ..Self::NONE
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_range("depolarizing", self.depolarizing, 0.0, 1.0)?;
        check_range("dephasing", self.dephasing, 0.0, 1.0)?;
        check_range("flip_x", self.flip_x, 0.0, 1.0)?;
        check_range("flip_y", self.flip_y, 0.0, 1.0)?;
        check_range("eps01", self.eps01, 0.0, 1.0)?;
        check_range("eps10", self.eps10, 0.0, 1.0)?;
        Ok(())
    }

    pub fn has_readout_confusion(&self) -> bool {
        self.eps01 != 0.0 || self.eps10 != 0.0
    }
}

fn atomic_pauli_channel(rho: &ComplexMatrix, axis: Axis, weight: f64) -> ComplexMatrix {
    if weight == 0.0 {
        return *rho;
    }
    let k = tensor_product(&pauli(axis), &identity2()).expect("2x2 factors");
    rho.scale_re(1.0 - weight) + (k * *rho * k).scale_re(weight)
}

pub fn apply_noise(rho: &DensityMatrix, noise: &NoiseModel) -> Result<DensityMatrix> {
    noise.validate()?;
    if rho.dim() != 4 {
        return Err(Error::Dimension {
            expected: 4,
            got: rho.dim(),
        });
    }
    let p = noise.depolarizing;
    let mut m = rho.scale_re(1.0 - p) + identity4().scale_re(p / 4.0);
    m = atomic_pauli_channel(&m, Axis::Z, noise.dephasing);
    m = atomic_pauli_channel(&m, Axis::X, noise.flip_x);
    m = atomic_pauli_channel(&m, Axis::Y, noise.flip_y);
    DensityMatrix::new(m)
}

/// `V |Psi+><Psi+| + (1 - V) I/4`.
pub fn werner(v: f64) -> Result<DensityMatrix> {
    check_range("visibility", v, 0.0, 1.0)?;
    let m = ideal_state().scale_re(v) + identity4().scale_re((1.0 - v) / 4.0);
    DensityMatrix::new(m)
}
