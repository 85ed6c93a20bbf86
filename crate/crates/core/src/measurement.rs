//! Projective measurements on the atom-photon pair and finite-count sampling.
//!
//! Outcome cells are indexed `2 * atom + detector`, with atom outcome 0 =
//! transferred to F=2 and 1 = remained in F=1, detector 0 = APD1 and
//! 1 = APD2. This matches the CSV column order
//! `n_f2_apd1, n_f2_apd2, n_f1_apd1, n_f1_apd2`.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_range, Error, Result};
use crate::physics::{apply_noise, NoiseModel};
use crate::qmath::{tensor_product, ComplexMatrix, DensityMatrix, Ket, C64};

pub type Probabilities = [f64; 4];
pub type Counts = [f64; 4];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AtomOutcome {
    /// Transferred to F=2 and removed before fluorescence detection.
    Transferred,
    /// Remained in F=1.
    Remained,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Detector {
    Apd1,
    Apd2,
}

impl Detector {
    pub const BOTH: [Detector; 2] = [Detector::Apd1, Detector::Apd2];

    pub fn index(self) -> usize {
        match self {
            Detector::Apd1 => 0,
            Detector::Apd2 => 1,
        }
    }
}

pub fn cell(atom: AtomOutcome, det: Detector) -> usize {
    let a = match atom {
        AtomOutcome::Transferred => 0,
        AtomOutcome::Remained => 1,
    };
    2 * a + det.index()
}

/// STIRAP analysis setting: the transferred state is
/// `sin(theta) |-1> + e^{i phi} cos(theta) |+1>`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AtomSetting {
    pub theta: f64,
    pub phi: f64,
}

impl AtomSetting {
    pub const SIGMA_X: AtomSetting = AtomSetting {
        theta: FRAC_PI_4,
        phi: 0.0,
    };
    pub const SIGMA_Y: AtomSetting = AtomSetting {
        theta: FRAC_PI_4,
        phi: FRAC_PI_2,
    };
    /// Transfers `|m_F=-1>`, the `+1` eigenstate of `sigma_z`.
    pub const SIGMA_Z: AtomSetting = AtomSetting {
        theta: FRAC_PI_2,
        phi: 0.0,
    };

    pub fn new(theta: f64, phi: f64) -> Result<Self> {
        if !theta.is_finite() || !phi.is_finite() {
            return Err(Error::Invalid(format!(
                "atom setting angles must be finite (theta = {theta}, phi = {phi})"
            )));
        }
        Ok(Self { theta, phi })
    }

    pub fn transferred_state(&self) -> Ket {
        let (s, c) = self.theta.sin_cos();
        Ket::new(&[C64::new(s, 0.0), C64::from_polar(c, self.phi)]).expect("2 amplitudes")
    }

    pub fn remained_state(&self) -> Ket {
        let (s, c) = self.theta.sin_cos();
        Ket::new(&[C64::new(c, 0.0), -C64::from_polar(s, self.phi)]).expect("2 amplitudes")
    }

    /// Bloch vector of the transferred state.
    pub fn bloch(&self) -> [f64; 3] {
        let s2 = (2.0 * self.theta).sin();
        [
            s2 * self.phi.cos(),
            s2 * self.phi.sin(),
            -(2.0 * self.theta).cos(),
        ]
    }
}

/// Photon polarization analysis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "basis", rename_all = "lowercase")]
pub enum PhotonSetting {
    /// Half-wave plate rotated by `beta`: APD1 projects on
    /// `(|s+> + e^{2 i beta} |s->) / sqrt(2)`.
    Linear { beta: f64 },
    /// Quarter-wave-plate configuration: APD1 projects on `|s+>`.
    Circular,
}

impl PhotonSetting {
    pub fn linear(beta: f64) -> Result<Self> {
        if !beta.is_finite() {
            return Err(Error::Invalid(format!("beta must be finite, got {beta}")));
        }
        Ok(Self::Linear { beta })
    }

    pub fn apd1_state(&self) -> Ket {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        match *self {
            PhotonSetting::Linear { beta } => {
                Ket::new(&[C64::new(h, 0.0), C64::from_polar(h, 2.0 * beta)]).expect("2")
            }
            PhotonSetting::Circular => {
                Ket::new(&[C64::new(1.0, 0.0), C64::new(0.0, 0.0)]).expect("2")
            }
        }
    }

    pub fn apd2_state(&self) -> Ket {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        match *self {
            PhotonSetting::Linear { beta } => {
                Ket::new(&[C64::new(h, 0.0), -C64::from_polar(h, 2.0 * beta)]).expect("2")
            }
            PhotonSetting::Circular => {
                Ket::new(&[C64::new(0.0, 0.0), C64::new(1.0, 0.0)]).expect("2")
            }
        }
    }

    pub fn bloch(&self) -> [f64; 3] {
        match *self {
            PhotonSetting::Linear { beta } => [(2.0 * beta).cos(), (2.0 * beta).sin(), 0.0],
            PhotonSetting::Circular => [0.0, 0.0, 1.0],
        }
    }

    pub fn beta(&self) -> Option<f64> {
        match *self {
            PhotonSetting::Linear { beta } => Some(beta),
            PhotonSetting::Circular => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasurementSetting {
    pub atom: AtomSetting,
    pub photon: PhotonSetting,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

impl MeasurementSetting {
    pub fn new(atom: AtomSetting, photon: PhotonSetting) -> Self {
        Self {
            atom,
            photon,
            label: None,
        }
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }

    /// POVM elements `Pi_atom (x) Pi_detector`, indexed by outcome cell.
    pub fn outcome_operators(&self) -> [ComplexMatrix; 4] {
        let (t, r) = atom_projectors(&self.atom);
        let (d1, d2) = photon_projectors(&self.photon);
        let k = |a: &ComplexMatrix, b: &ComplexMatrix| tensor_product(a, b).expect("2x2");
        [k(&t, &d1), k(&t, &d2), k(&r, &d1), k(&r, &d2)]
    }
}

/// Projectors `(APD1, APD2)`; APD1 carries the `+` sign.
pub fn photon_projectors(s: &PhotonSetting) -> (ComplexMatrix, ComplexMatrix) {
    (s.apd1_state().projector(), s.apd2_state().projector())
}

/// Projectors `(transferred, remained)`.
pub fn atom_projectors(s: &AtomSetting) -> (ComplexMatrix, ComplexMatrix) {
    (
        s.transferred_state().projector(),
        s.remained_state().projector(),
    )
}

pub fn joint_probabilities(rho: &DensityMatrix, s: &MeasurementSetting) -> Result<Probabilities> {
    if rho.dim() != 4 {
        return Err(Error::Dimension {
            expected: 4,
            got: rho.dim(),
        });
    }
    let ops = s.outcome_operators();
    let mut p = [0.0; 4];
    for (pk, op) in p.iter_mut().zip(&ops) {
        // exact zeros can come out as -1e-17
        *pk = rho.trace_product_re(op).max(0.0);
    }
    Ok(p)
}

fn check_probability_vector(p: &[f64]) -> Result<()> {
    if p.iter().any(|&x| !x.is_finite() || x < -1e-12) {
        return Err(Error::Invalid(format!(
            "negative or non-finite probability in {p:?}"
        )));
    }
    let s: f64 = p.iter().sum();
    if (s - 1.0).abs() > 1e-9 {
        return Err(Error::Invalid(format!("probabilities sum to {s}, not 1")));
    }
    Ok(())
}

/// Flips the atomic outcome label: `eps01` is P(read remained | transferred),
/// `eps10` is P(read transferred | remained).
pub fn apply_readout_confusion(p: &Probabilities, eps01: f64, eps10: f64) -> Result<Probabilities> {
    check_range("eps01", eps01, 0.0, 1.0)?;
    check_range("eps10", eps10, 0.0, 1.0)?;
    check_probability_vector(p)?;
    let mut out = [0.0; 4];
    for d in 0..2 {
        let t = p[d];
        let r = p[2 + d];
        out[d] = t * (1.0 - eps01) + r * eps10;
        out[2 + d] = r * (1.0 - eps10) + t * eps01;
    }
    Ok(out)
}

/// Independent random stream for record `index` under `seed`.
pub fn substream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Exact multinomial draw of `n` trials by per-trial inverse-CDF lookup.
pub fn multinomial<R: Rng + ?Sized>(p: &[f64], n: u64, rng: &mut R) -> Result<Vec<u64>> {
    check_probability_vector(p)?;
    let mut cdf = Vec::with_capacity(p.len());
    let mut acc = 0.0;
    for &x in p {
        acc += x.max(0.0);
        cdf.push(acc);
    }
    let last_positive = p
        .iter()
        .rposition(|&x| x > 0.0)
        .ok_or_else(|| Error::Invalid("all probabilities are zero".into()))?;
    let mut counts = vec![0u64; p.len()];
    for _ in 0..n {
        let u: f64 = rng.gen::<f64>() * acc;
        let k = cdf.iter().position(|&c| u < c).unwrap_or(last_positive);
        counts[k] += 1;
    }
    Ok(counts)
}

/// Multinomial counts of `n` trials over the four outcome cells.
pub fn sample_counts(p: &Probabilities, n: u64, seed: u64) -> Result<[u64; 4]> {
    if n == 0 {
        return Err(Error::Invalid("need at least one trial".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v = multinomial(p, n, &mut rng)?;
    Ok([v[0], v[1], v[2], v[3]])
}

/// Exact mode returns expected counts `n * p` instead of drawing.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind", content = "seed")]
pub enum Sampling {
    Exact,
    Seeded(u64),
}

impl Sampling {
    pub fn seed(&self) -> Option<u64> {
        match self {
            Sampling::Exact => None,
            Sampling::Seeded(s) => Some(*s),
        }
    }
}

/// How many heralded trials are spent on one measurement setting.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrialBudget {
    /// `n` trials split over both detectors at random.
    PerSetting(u64),
    /// `n` trials conditioned on each detector, as for one fringe data point.
    PerDetector(u64),
}

impl TrialBudget {
    fn n(&self) -> u64 {
        match *self {
            TrialBudget::PerSetting(n) | TrialBudget::PerDetector(n) => n,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CountRecord {
    pub setting: MeasurementSetting,
    /// Indexed by outcome cell; fractional in exact mode.
    pub counts: Counts,
}

impl CountRecord {
    pub fn new(setting: MeasurementSetting, counts: Counts) -> Result<Self> {
        if counts.iter().any(|&c| !c.is_finite() || c < 0.0) {
            return Err(Error::Invalid(format!(
                "counts must be non-negative, got {counts:?}"
            )));
        }
        let rec = Self { setting, counts };
        if rec.total() < 1.0 - 1e-9 {
            return Err(Error::Invalid(format!(
                "record needs at least one trial, total = {}",
                rec.total()
            )));
        }
        Ok(rec)
    }

    pub fn total(&self) -> f64 {
        self.counts.iter().sum()
    }

    pub fn count(&self, atom: AtomOutcome, det: Detector) -> f64 {
        self.counts[cell(atom, det)]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataMode {
    Simulated,
    Ingested,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub mode: DataMode,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub exact: bool,
    #[serde(default)]
    pub noise: Option<NoiseModel>,
    #[serde(default)]
    pub budget: Option<TrialBudget>,
}

impl DatasetMeta {
    pub fn ingested() -> Self {
        Self {
            mode: DataMode::Ingested,
            seed: None,
            exact: false,
            noise: None,
            budget: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub records: Vec<CountRecord>,
    pub meta: DatasetMeta,
}

impl Dataset {
    pub fn new(records: Vec<CountRecord>, meta: DatasetMeta) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::Invalid("dataset has no records".into()));
        }
        Ok(Self { records, meta })
    }
}

fn draw(p: &[f64], n: u64, sampling: Sampling, rng: &mut Option<ChaCha8Rng>) -> Result<Vec<f64>> {
    match sampling {
        Sampling::Exact => Ok(p.iter().map(|&x| x * n as f64).collect()),
        Sampling::Seeded(_) => {
            let rng = rng.as_mut().expect("seeded sampling has a stream");
            Ok(multinomial(p, n, rng)?
                .into_iter()
                .map(|c| c as f64)
                .collect())
        }
    }
}

/// Noisy state, readout confusion and finite statistics for a list of settings.
///
/// Record `i` draws from `substream(seed, i)`, so results depend only on the
/// seed and the record position.
pub fn simulate(
    rho: &DensityMatrix,
    settings: &[MeasurementSetting],
    budget: TrialBudget,
    noise: &NoiseModel,
    sampling: Sampling,
) -> Result<Dataset> {
    if settings.is_empty() {
        return Err(Error::Invalid("no measurement settings".into()));
    }
    if budget.n() == 0 {
        return Err(Error::Invalid("trial budget must be at least 1".into()));
    }
    let state = apply_noise(rho, noise)?;
    let mut records = Vec::with_capacity(settings.len());
    for (i, setting) in settings.iter().enumerate() {
        let mut p = joint_probabilities(&state, setting)?;
        let s: f64 = p.iter().sum();
        p.iter_mut().for_each(|x| *x /= s);
        let p = apply_readout_confusion(&p, noise.eps01, noise.eps10)?;
        let mut rng = sampling.seed().map(|seed| substream(seed, i as u64));
        let counts = match budget {
            TrialBudget::PerSetting(n) => {
                let c = draw(&p, n, sampling, &mut rng)?;
                [c[0], c[1], c[2], c[3]]
            }
            TrialBudget::PerDetector(n) => {
                let mut c = [0.0; 4];
                for d in 0..2 {
                    let pd = p[d] + p[2 + d];
                    if pd <= 0.0 {
                        continue;
                    }
                    let cond = [p[d] / pd, p[2 + d] / pd];
                    let k = draw(&cond, n, sampling, &mut rng)?;
                    c[d] = k[0];
                    c[2 + d] = k[1];
                }
                c
            }
        };
        records.push(CountRecord::new(setting.clone(), counts)?);
    }
    Dataset::new(
        records,
        DatasetMeta {
            mode: DataMode::Simulated,
            seed: sampling.seed(),
            exact: sampling == Sampling::Exact,
            noise: Some(*noise),
            budget: Some(budget),
        },
    )
}

/// Correlation fringe: one record per analyzer angle, `n_per_point` heralded
/// trials per detector.
pub fn simulate_scan(
    rho: &DensityMatrix,
    atom: AtomSetting,
    betas: &[f64],
    n_per_point: u64,
    noise: &NoiseModel,
    sampling: Sampling,
) -> Result<Dataset> {
    if betas.is_empty() {
        return Err(Error::Invalid("beta grid is empty".into()));
    }
    let settings = betas
        .iter()
        .map(|&b| Ok(MeasurementSetting::new(atom, PhotonSetting::linear(b)?)))
        .collect::<Result<Vec<_>>>()?;
    simulate(
        rho,
        &settings,
        TrialBudget::PerDetector(n_per_point),
        noise,
        sampling,
    )
}

/// `n` equally spaced analyzer angles over one fringe period `[0, pi)`.
pub fn beta_grid(n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| k as f64 * std::f64::consts::PI / n as f64)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::physics::{ideal_state, werner};
    use crate::qmath::{identity2, pauli, Axis};
    use std::f64::consts::PI;

    fn eigenprojectors(axis: Axis) -> (ComplexMatrix, ComplexMatrix) {
        let s = pauli(axis);
        (
            (identity2() + s).scale_re(0.5),
            (identity2() - s).scale_re(0.5),
        )
    }

    fn conditional_f1(p: &Probabilities, d: Detector) -> f64 {
        let r = p[cell(AtomOutcome::Remained, d)];
        r / (r + p[cell(AtomOutcome::Transferred, d)])
    }

    #[test]
    fn photon_projectors_at_zero_and_quarter_pi() {
        let (p1, p2) = photon_projectors(&PhotonSetting::Linear { beta: 0.0 });
        let (x1, x2) = eigenprojectors(Axis::X);
        assert!(p1.max_abs_diff(&x1) < 1e-15 && p2.max_abs_diff(&x2) < 1e-15);
        let (p1, p2) = photon_projectors(&PhotonSetting::Linear { beta: PI / 4.0 });
        let (y1, y2) = eigenprojectors(Axis::Y);
        assert!(p1.max_abs_diff(&y1) < 1e-15 && p2.max_abs_diff(&y2) < 1e-15);
        let (p1, p2) = photon_projectors(&PhotonSetting::Circular);
        let (z1, z2) = eigenprojectors(Axis::Z);
        assert!(p1.max_abs_diff(&z1) < 1e-15 && p2.max_abs_diff(&z2) < 1e-15);
    }

    #[test]
    fn atom_projectors_for_named_settings() {
        let (t, _) = atom_projectors(&AtomSetting {
            theta: PI / 2.0,
            phi: 1.234,
        });
        let want = ComplexMatrix::from_real_diagonal(&[1.0, 0.0]).unwrap();
        assert!(t.max_abs_diff(&want) < 1e-15);
        for (setting, axis) in [
            (AtomSetting::SIGMA_X, Axis::X),
            (AtomSetting::SIGMA_Y, Axis::Y),
            (AtomSetting::SIGMA_Z, Axis::Z),
        ] {
            let (t, r) = atom_projectors(&setting);
            let (plus, minus) = eigenprojectors(axis);
            assert!(t.max_abs_diff(&plus) < 1e-15, "{axis}");
            assert!(r.max_abs_diff(&minus) < 1e-15, "{axis}");
        }
    }

    #[test]
    fn projectors_complete_and_orthogonal() {
        for k in 0..40 {
            let x = k as f64 * 0.37;
            let (a, b) = photon_projectors(&PhotonSetting::Linear { beta: x });
            let (c, d) = atom_projectors(&AtomSetting {
                theta: x,
                phi: 1.7 * x,
            });
            for (p, q) in [(a, b), (c, d)] {
                assert!((p + q).max_abs_diff(&identity2()) < 1e-15);
                assert!((p * q).frobenius_norm() < 1e-15);
                assert!((p * p).max_abs_diff(&p) < 1e-15);
            }
        }
    }

    #[test]
    fn bloch_vectors_match_projectors() {
        let s = AtomSetting {
            theta: 0.3,
            phi: 1.1,
        };
        let (t, _) = atom_projectors(&s);
        let n = s.bloch();
        for axis in Axis::ALL {
            let e = t.trace_product_re(&pauli(axis));
            assert!((e - n[axis.index()]).abs() < 1e-15);
        }
    }

    #[test]
    fn maximally_mixed_gives_uniform() {
        let rho = DensityMatrix::maximally_mixed(4).unwrap();
        let s = MeasurementSetting::new(
            AtomSetting {
                theta: 0.4,
                phi: 2.0,
            },
            PhotonSetting::Linear { beta: 0.9 },
        );
        let p = joint_probabilities(&rho, &s).unwrap();
        for x in p {
            assert!((x - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn ideal_fringe_convention_and_visibility() {
        let rho = ideal_state();
        let mut lo: f64 = 1.0;
        let mut hi: f64 = 0.0;
        for k in 0..90 {
            let beta = k as f64 * PI / 90.0;
            let s = MeasurementSetting::new(AtomSetting::SIGMA_X, PhotonSetting::Linear { beta });
            let p = joint_probabilities(&rho, &s).unwrap();
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            let c = conditional_f1(&p, Detector::Apd1);
            // brute-force enumeration of |<remained, apd1|Psi+>|^2 / P(apd1)
            let amp = {
                let r = AtomSetting::SIGMA_X.remained_state();
                let d = PhotonSetting::Linear { beta }.apd1_state();
                let joint = r.tensor(&d).unwrap();
                let psi = crate::physics::psi_plus();
                joint
                    .amplitudes()
                    .iter()
                    .zip(psi.amplitudes())
                    .map(|(a, b)| a.conj() * b)
                    .sum::<C64>()
            };
            assert!((c - amp.norm_sqr() / 0.5).abs() < 1e-12);
            assert!((c - (1.0 - (2.0 * beta).cos()) / 2.0).abs() < 1e-12);
            lo = lo.min(c);
            hi = hi.max(c);
        }
        assert!(lo.abs() < 1e-12 && (hi - 1.0).abs() < 1e-12);
    }

    #[test]
    fn werner_fringe_visibility() {
        let rho = werner(0.86).unwrap();
        for axis_setting in [AtomSetting::SIGMA_X, AtomSetting::SIGMA_Y] {
            let vals: Vec<f64> = (0..180)
                .map(|k| {
                    let s = MeasurementSetting::new(
                        axis_setting,
                        PhotonSetting::Linear {
                            beta: k as f64 * PI / 180.0,
                        },
                    );
                    conditional_f1(&joint_probabilities(&rho, &s).unwrap(), Detector::Apd2)
                })
                .collect();
            let max = vals.iter().cloned().fold(f64::MIN, f64::max);
            let min = vals.iter().cloned().fold(f64::MAX, f64::min);
            assert!((max - min - 0.86).abs() < 1e-12);
        }
    }

    #[test]
    fn detectors_are_in_phase_opposition_and_period_pi() {
        let rho = crate::physics::apply_noise(
            &ideal_state(),
            &NoiseModel {
                depolarizing: 0.1,
                flip_x: 0.05,
                ..NoiseModel::NONE
            },
        )
        .unwrap();
        for atom in [
            AtomSetting::SIGMA_X,
            AtomSetting::SIGMA_Y,
            AtomSetting {
                theta: 0.3,
                phi: 0.2,
            },
        ] {
            for k in 0..37 {
                let beta = k as f64 * 0.17;
                let at = |b: f64| {
                    joint_probabilities(
                        &rho,
                        &MeasurementSetting::new(atom, PhotonSetting::Linear { beta: b }),
                    )
                    .unwrap()
                };
                let c1 = conditional_f1(&at(beta), Detector::Apd1);
                let c2 = conditional_f1(&at(beta + PI / 2.0), Detector::Apd2);
                assert!((c1 - c2).abs() < 1e-12);
                let shifted = at(beta + PI);
                for (a, b) in at(beta).iter().zip(shifted) {
                    assert!((a - b).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn global_phase_of_atomic_superposition_is_irrelevant() {
        // (theta, phi) and (pi - theta, phi + pi) describe the same ray up to a sign
        let rho = werner(0.7).unwrap();
        let a = AtomSetting {
            theta: 0.4,
            phi: 0.9,
        };
        let b = AtomSetting {
            theta: PI - 0.4,
            phi: 0.9 + PI,
        };
        let photon = PhotonSetting::Linear { beta: 0.3 };
        let pa = joint_probabilities(&rho, &MeasurementSetting::new(a, photon)).unwrap();
        let pb = joint_probabilities(&rho, &MeasurementSetting::new(b, photon)).unwrap();
        for (x, y) in pa.iter().zip(pb) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn readout_confusion_identity_and_scramble() {
        let p = [0.1, 0.2, 0.3, 0.4];
        assert_eq!(apply_readout_confusion(&p, 0.0, 0.0).unwrap(), p);
        let q = apply_readout_confusion(&p, 0.5, 0.5).unwrap();
        let transferred = q[0] + q[1];
        assert!((transferred - 0.5).abs() < 1e-15);
        assert!(apply_readout_confusion(&p, 1.1, 0.0).is_err());
        assert!(apply_readout_confusion(&[0.5, 0.6, 0.0, 0.0], 0.1, 0.1).is_err());
    }

    #[test]
    fn readout_confusion_scales_visibility() {
        let rho = werner(0.86).unwrap();
        let eps = 0.07;
        let vis = |e: f64| {
            let vals: Vec<f64> = (0..360)
                .map(|k| {
                    let s = MeasurementSetting::new(
                        AtomSetting::SIGMA_X,
                        PhotonSetting::Linear {
                            beta: k as f64 * PI / 360.0,
                        },
                    );
                    let p = joint_probabilities(&rho, &s).unwrap();
                    conditional_f1(&apply_readout_confusion(&p, e, e).unwrap(), Detector::Apd1)
                })
                .collect();
            vals.iter().cloned().fold(f64::MIN, f64::max)
                - vals.iter().cloned().fold(f64::MAX, f64::min)
        };
        assert!((vis(eps) - (1.0 - 2.0 * eps) * 0.86).abs() < 1e-12);
    }

    #[test]
    fn degenerate_distribution_sampling() {
        assert_eq!(
            sample_counts(&[1.0, 0.0, 0.0, 0.0], 300, 9).unwrap(),
            [300, 0, 0, 0]
        );
        assert_eq!(
            sample_counts(&[0.0, 0.0, 0.0, 1.0], 5, 1).unwrap(),
            [0, 0, 0, 5]
        );
        assert!(sample_counts(&[0.5, 0.0, 0.0, 0.0], 5, 1).is_err());
    }

    #[test]
    fn sampling_is_deterministic_per_seed() {
        let p = [0.1, 0.2, 0.3, 0.4];
        assert_eq!(
            sample_counts(&p, 300, 42).unwrap(),
            sample_counts(&p, 300, 42).unwrap()
        );
        assert_ne!(
            sample_counts(&p, 300, 42).unwrap(),
            sample_counts(&p, 300, 43).unwrap()
        );
        let c = sample_counts(&p, 300, 42).unwrap();
        assert_eq!(c.iter().sum::<u64>(), 300);
    }

    #[test]
    fn sample_means_within_three_standard_errors() {
        let p = [0.07, 0.43, 0.43, 0.07];
        let n = 300u64;
        let seeds = 1000;
        let mut sums = [0.0; 4];
        for seed in 0..seeds {
            let c = sample_counts(&p, n, seed).unwrap();
            for k in 0..4 {
                sums[k] += c[k] as f64 / n as f64;
            }
        }
        for k in 0..4 {
            let mean = sums[k] / seeds as f64;
            let se = (p[k] * (1.0 - p[k]) / (n as f64 * seeds as f64)).sqrt();
            assert!(
                (mean - p[k]).abs() < 3.0 * se,
                "cell {k}: {mean} vs {}",
                p[k]
            );
        }
    }

    #[test]
    fn conditional_frequency_spread_matches_binomial() {
        // mid-fringe point: P(F=1 | APD1) = 1/2
        let p = [0.25, 0.25, 0.25, 0.25];
        let n = 300u64;
        let freqs: Vec<f64> = (0..1000)
            .map(|seed| {
                let c = sample_counts(&p, n, seed).unwrap();
                c[2] as f64 / (c[0] + c[2]) as f64
            })
            .collect();
        let mean = freqs.iter().sum::<f64>() / freqs.len() as f64;
        let sd = (freqs.iter().map(|f| (f - mean).powi(2)).sum::<f64>() / (freqs.len() - 1) as f64)
            .sqrt();
        // binomial prediction with the expected number of APD1 events
        let predicted = (0.25f64 / (n as f64 * 0.5)).sqrt();
        assert!((sd / predicted - 1.0).abs() < 0.2, "sd {sd} vs {predicted}");
    }

    #[test]
    fn scan_exact_mode_and_determinism() {
        let betas = beta_grid(18);
        let ds = simulate_scan(
            &ideal_state(),
            AtomSetting::SIGMA_X,
            &betas,
            300,
            &NoiseModel::NONE,
            Sampling::Exact,
        )
        .unwrap();
        assert_eq!(ds.records.len(), 18);
        for (rec, beta) in ds.records.iter().zip(&betas) {
            let n1 = rec.count(AtomOutcome::Remained, Detector::Apd1)
                + rec.count(AtomOutcome::Transferred, Detector::Apd1);
            assert!((n1 - 300.0).abs() < 1e-9);
            let c = rec.count(AtomOutcome::Remained, Detector::Apd1) / n1;
            assert!((c - (1.0 - (2.0 * beta).cos()) / 2.0).abs() < 1e-12);
        }
        let noise = NoiseModel::depolarizing(0.14);
        let a = simulate_scan(
            &ideal_state(),
            AtomSetting::SIGMA_Y,
            &betas,
            300,
            &noise,
            Sampling::Seeded(7),
        )
        .unwrap();
        let b = simulate_scan(
            &ideal_state(),
            AtomSetting::SIGMA_Y,
            &betas,
            300,
            &noise,
            Sampling::Seeded(7),
        )
        .unwrap();
        assert_eq!(a, b);
        for rec in &a.records {
            for d in Detector::BOTH {
                let n =
                    rec.count(AtomOutcome::Remained, d) + rec.count(AtomOutcome::Transferred, d);
                assert_eq!(n, 300.0);
            }
        }
    }

    #[test]
    fn record_validation() {
        let s = MeasurementSetting::new(AtomSetting::SIGMA_X, PhotonSetting::Circular);
        assert!(CountRecord::new(s.clone(), [0.0; 4]).is_err());
        assert!(CountRecord::new(s.clone(), [-1.0, 2.0, 0.0, 0.0]).is_err());
        assert!(CountRecord::new(s, [1.0, 0.0, 0.0, 0.0]).is_ok());
        assert!(simulate_scan(
            &ideal_state(),
            AtomSetting::SIGMA_X,
            &[],
            10,
            &NoiseModel::NONE,
            Sampling::Exact
        )
        .is_err());
    }
}
