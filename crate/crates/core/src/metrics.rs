//! Scalar figures of merit for two-qubit states and fringe scans.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measurement::{AtomOutcome, AtomSetting, Dataset, Detector, PhotonSetting};
use crate::physics::psi_plus;
use crate::qmath::{
    hermitian_eigenvalues, identity2, jacobi_hermitian, overlap, partial_transpose, pauli,
    tensor_product, Axis, ComplexMatrix, DensityMatrix, Ket, Subsystem, C64,
};

/// `<target| rho |target>`.
pub fn fidelity_to_target(rho: &DensityMatrix, target: &Ket) -> Result<f64> {
    overlap(target, rho)
}

/// Fidelity with the ideal atom-photon state.
pub fn fidelity(rho: &DensityMatrix) -> Result<f64> {
    fidelity_to_target(rho, &psi_plus())
}

/// Sum of the magnitudes of the negative eigenvalues of the partial transpose.
pub fn negativity(rho: &DensityMatrix) -> Result<f64> {
    if rho.dim() != 4 {
        return Err(Error::Dimension {
            expected: 4,
            got: rho.dim(),
        });
    }
    let pt = partial_transpose(rho, Subsystem::Photon)?;
    Ok(hermitian_eigenvalues(&pt)?
        .into_iter()
        .filter(|&l| l < 0.0)
        .map(f64::abs)
        .sum())
}

pub fn purity(rho: &DensityMatrix) -> f64 {
    rho.trace_product_re(rho)
}

/// `T[i][j] = <sigma_i (atom) sigma_j (photon)>`.
pub fn correlation_matrix(rho: &ComplexMatrix) -> Result<[[f64; 3]; 3]> {
    let mut t = [[0.0; 3]; 3];
    for i in Axis::ALL {
        for j in Axis::ALL {
            let op = tensor_product(&pauli(i), &pauli(j))?;
            t[i.index()][j.index()] = rho.trace_product_re(&op);
        }
    }
    Ok(t)
}

/// Unit Bloch vectors of the two atomic and two photonic analyzer directions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChshSettings {
    pub a: [f64; 3],
    pub a_prime: [f64; 3],
    pub b: [f64; 3],
    pub b_prime: [f64; 3],
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChshResult {
    pub value: f64,
    pub settings: ChshSettings,
}

fn mat_vec(t: &[[f64; 3]; 3], v: &[f64; 3]) -> [f64; 3] {
    let mut out = [0.0; 3];
    for i in 0..3 {
        out[i] = (0..3).map(|j| t[i][j] * v[j]).sum();
    }
    out
}

fn dot3(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn unit(v: [f64; 3]) -> Option<[f64; 3]> {
    let n = dot3(&v, &v).sqrt();
    (n > 1e-12).then(|| [v[0] / n, v[1] / n, v[2] / n])
}

fn cross(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// Some unit vector orthogonal to `v`.
fn orthogonal_to(v: &[f64; 3]) -> [f64; 3] {
    let e = if v[0].abs() < 0.9 {
        [1.0, 0.0, 0.0]
    } else {
        [0.0, 1.0, 0.0]
    };
    unit(cross(v, &e)).expect("non-parallel")
}

/// CHSH combination `E(a,b) + E(a,b') + E(a',b) - E(a',b')` with `E(x,y) = x.T.y`.
pub fn chsh_value(t: &[[f64; 3]; 3], s: &ChshSettings) -> f64 {
    let e = |x: &[f64; 3], y: &[f64; 3]| dot3(x, &mat_vec(t, y));
    e(&s.a, &s.b) + e(&s.a, &s.b_prime) + e(&s.a_prime, &s.b) - e(&s.a_prime, &s.b_prime)
}

/// Maximal CHSH value `2 sqrt(s1^2 + s2^2)` from the two largest singular
/// values of the correlation matrix, with settings that attain it.
pub fn chsh_max(rho: &DensityMatrix) -> Result<ChshResult> {
    let t = correlation_matrix(rho)?;
    let mut tt = [C64::new(0.0, 0.0); 9];
    for i in 0..3 {
        for j in 0..3 {
            tt[i * 3 + j] = C64::new((0..3).map(|k| t[k][i] * t[k][j]).sum(), 0.0);
        }
    }
    let (vals, vecs) = jacobi_hermitian(&mut tt, 3);
    let col = |k: usize| [vecs[k].re, vecs[3 + k].re, vecs[6 + k].re];
    let l1 = vals[2].max(0.0);
    let l2 = vals[1].max(0.0);
    let v1 = col(2);
    let v2 = col(1);
    let phi = l2.sqrt().atan2(l1.sqrt());
    let (s, c) = phi.sin_cos();
    let b = [0, 1, 2].map(|k| c * v1[k] + s * v2[k]);
    let b_prime = [0, 1, 2].map(|k| c * v1[k] - s * v2[k]);
    let a = unit(mat_vec(&t, &v1)).unwrap_or(v1);
    let a_prime = unit(mat_vec(&t, &v2)).unwrap_or_else(|| orthogonal_to(&a));
    let settings = ChshSettings {
        a,
        a_prime,
        b,
        b_prime,
    };
    Ok(ChshResult {
        value: 2.0 * (l1 + l2).sqrt(),
        settings,
    })
}

fn sphere(theta: f64, phi: f64) -> [f64; 3] {
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = phi.sin_cos();
    [st * cp, st * sp, ct]
}

fn settings_from_angles(x: &[f64; 8]) -> ChshSettings {
    ChshSettings {
        a: sphere(x[0], x[1]),
        a_prime: sphere(x[2], x[3]),
        b: sphere(x[4], x[5]),
        b_prime: sphere(x[6], x[7]),
    }
}

/// Direct search over the eight analyzer angles, for validating [`chsh_max`].
pub fn chsh_numeric(rho: &DensityMatrix, starts: usize, seed: u64) -> Result<ChshResult> {
    let t = correlation_matrix(rho)?;
    let mut rng = crate::measurement::substream(seed, 0);
    let mut best: Option<(f64, [f64; 8])> = None;
    for _ in 0..starts.max(1) {
        let mut x = [0.0; 8];
        for v in x.iter_mut() {
            *v = rng.gen::<f64>() * std::f64::consts::TAU;
        }
        let mut f = chsh_value(&t, &settings_from_angles(&x));
        let mut step = 0.5;
        while step > 1e-10 {
            let mut improved = false;
            for k in 0..8 {
                for dir in [1.0, -1.0] {
                    let mut y = x;
                    y[k] += dir * step;
                    let fy = chsh_value(&t, &settings_from_angles(&y));
                    if fy > f {
                        x = y;
                        f = fy;
                        improved = true;
                    }
                }
            }
            if !improved {
                step *= 0.5;
            }
        }
        if best.is_none_or(|(b, _)| f > b) {
            best = Some((f, x));
        }
    }
    let (value, x) = best.expect("at least one start");
    Ok(ChshResult {
        value,
        settings: settings_from_angles(&x),
    })
}

/// Summary numbers emitted for a reconstructed state.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateMetrics {
    pub fidelity: f64,
    pub negativity: f64,
    pub chsh_max: f64,
    pub purity: f64,
}

pub fn state_metrics(rho: &DensityMatrix) -> Result<StateMetrics> {
    Ok(StateMetrics {
        fidelity: fidelity(rho)?,
        negativity: negativity(rho)?,
        chsh_max: chsh_max(rho)?.value,
        purity: purity(rho),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FringePoint {
    pub beta: f64,
    /// Conditional probability of finding the atom in F=1.
    pub p: f64,
    pub n: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FringeScan {
    pub detector: Detector,
    pub atom: AtomSetting,
    pub points: Vec<FringePoint>,
}

/// F=1 probability conditioned on `detector`, for every linear-basis record
/// that uses `atom`.
pub fn fringe_from_dataset(
    ds: &Dataset,
    atom: AtomSetting,
    detector: Detector,
) -> Result<FringeScan> {
    let mut points = Vec::new();
    for rec in &ds.records {
        let same_atom = (rec.setting.atom.theta - atom.theta).abs() < 1e-9
            && (rec.setting.atom.phi - atom.phi).abs() < 1e-9;
        let PhotonSetting::Linear { beta } = rec.setting.photon else {
            continue;
        };
        if !same_atom {
            continue;
        }
        let r = rec.count(AtomOutcome::Remained, detector);
        let n = r + rec.count(AtomOutcome::Transferred, detector);
        if n > 0.0 {
            points.push(FringePoint { beta, p: r / n, n });
        }
    }
    if points.is_empty() {
        return Err(Error::Invalid(format!(
            "no linear-basis records for atomic setting (theta={}, phi={})",
            atom.theta, atom.phi
        )));
    }
    points.sort_by(|a, b| a.beta.total_cmp(&b.beta));
    Ok(FringeScan {
        detector,
        atom,
        points,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VisibilityFit {
    /// Peak-to-peak amplitude of the fitted curve.
    pub visibility: f64,
    pub offset: f64,
    /// Phase of `cos(2 beta - phase)`.
    pub phase: f64,
    pub rms_residual: f64,
    /// Fitted curve leaves [0, 1].
    pub clipped: bool,
}

impl VisibilityFit {
    pub fn eval(&self, beta: f64) -> f64 {
        self.offset + 0.5 * self.visibility * (2.0 * beta - self.phase).cos()
    }
}

fn solve3(m: [[f64; 3]; 3], r: [f64; 3]) -> Option<[f64; 3]> {
    let mut a = [[0.0; 4]; 3];
    for i in 0..3 {
        a[i][..3].copy_from_slice(&m[i]);
        a[i][3] = r[i];
    }
    for c in 0..3 {
        let p = (c..3).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))?;
        a.swap(c, p);
        if a[c][c].abs() < 1e-300 {
            return None;
        }
        for i in (c + 1)..3 {
            let f = a[i][c] / a[c][c];
            let pivot = a[c];
            for (x, p) in a[i].iter_mut().zip(pivot).skip(c) {
                *x -= f * p;
            }
        }
    }
    let mut x = [0.0; 3];
    for i in (0..3).rev() {
        let s: f64 = ((i + 1)..3).map(|k| a[i][k] * x[k]).sum();
        x[i] = (a[i][3] - s) / a[i][i];
    }
    Some(x)
}

/// Least squares on `p = c0 + c1 cos 2beta + c2 sin 2beta`.
pub fn fit_fringe(scan: &FringeScan) -> Result<VisibilityFit> {
    let pts = &scan.points;
    if pts.len() < 4 {
        return Err(Error::DegenerateFit(format!(
            "need at least 4 points, got {}",
            pts.len()
        )));
    }
    let mut m = [[0.0; 3]; 3];
    let mut r = [0.0; 3];
    for pt in pts {
        let row = [1.0, (2.0 * pt.beta).cos(), (2.0 * pt.beta).sin()];
        for i in 0..3 {
            r[i] += row[i] * pt.p;
            for j in 0..3 {
                m[i][j] += row[i] * row[j];
            }
        }
    }
    let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    let n = pts.len() as f64;
    if det.abs() < 1e-9 * n * n * n {
        return Err(Error::DegenerateFit(
            "analyzer angles do not span the fringe (all equal modulo pi/2)".into(),
        ));
    }
    let c = solve3(m, r).ok_or_else(|| Error::DegenerateFit("singular normal equations".into()))?;
    let amp = c[1].hypot(c[2]);
    let fit = VisibilityFit {
        visibility: 2.0 * amp,
        offset: c[0],
        phase: c[2].atan2(c[1]),
        rms_residual: 0.0,
        clipped: c[0] + amp > 1.0 + 1e-12 || c[0] - amp < -1e-12,
    };
    let ss: f64 = pts
        .iter()
        .map(|pt| (pt.p - fit.eval(pt.beta)).powi(2))
        .sum();
    Ok(VisibilityFit {
        rms_residual: (ss / n).sqrt(),
        ..fit
    })
}

/// Fringe visibility implied by `rho` for an atomic setting and detector.
///
/// The conditional probability is sinusoidal in beta only when the photon
/// marginal has no linear polarization component; other states are rejected.
pub fn analytic_visibility(
    rho: &DensityMatrix,
    atom: &AtomSetting,
    _detector: Detector,
) -> Result<f64> {
    let (_, remained) = crate::measurement::atom_projectors(atom);
    let bx = rho.trace_product_re(&tensor_product(&identity2(), &pauli(Axis::X))?);
    let by = rho.trace_product_re(&tensor_product(&identity2(), &pauli(Axis::Y))?);
    if bx.abs() > 1e-12 || by.abs() > 1e-12 {
        return Err(Error::Invalid(format!(
            "photon marginal is linearly polarized ({bx:.3e}, {by:.3e}); fringe is not sinusoidal"
        )));
    }
    let x = rho.trace_product_re(&tensor_product(&remained, &pauli(Axis::X))?);
    let y = rho.trace_product_re(&tensor_product(&remained, &pauli(Axis::Y))?);
    // both detectors share the amplitude and differ by pi in phase
    Ok(2.0 * x.hypot(y))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measurement::{
        beta_grid, joint_probabilities, simulate_scan, substream, MeasurementSetting, Sampling,
    };
    use crate::physics::{apply_noise, ideal_state, werner, NoiseModel};
    use crate::qmath::tensor_product as kron;
    use std::f64::consts::{FRAC_1_SQRT_2, PI, SQRT_2};

    fn random_qubit(rng: &mut impl Rng) -> ComplexMatrix {
        let mut t = ComplexMatrix::zeros(2).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                t[(i, j)] = C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5);
            }
        }
        let a = t.dagger() * t;
        a.scale_re(1.0 / a.trace().re).hermitian_part()
    }

    fn scan_of(points: Vec<(f64, f64)>) -> FringeScan {
        FringeScan {
            detector: Detector::Apd1,
            atom: AtomSetting::SIGMA_X,
            points: points
                .into_iter()
                .map(|(beta, p)| FringePoint { beta, p, n: 1.0 })
                .collect(),
        }
    }

    #[test]
    fn fidelity_examples() {
        assert!((fidelity(&ideal_state()).unwrap() - 1.0).abs() < 1e-12);
        for v in [0.0, 0.3, 0.86, 1.0] {
            let f = fidelity(&werner(v).unwrap()).unwrap();
            assert!((f - (3.0 * v + 1.0) / 4.0).abs() < 1e-12);
        }
    }

    #[test]
    fn fidelity_is_linear() {
        let r1 = werner(0.4).unwrap();
        let r2 = apply_noise(
            &ideal_state(),
            &NoiseModel {
                flip_x: 0.2,
                ..NoiseModel::NONE
            },
        )
        .unwrap();
        let alpha = 0.37;
        let mix = DensityMatrix::new(r1.scale_re(alpha) + r2.scale_re(1.0 - alpha)).unwrap();
        let lhs = fidelity(&mix).unwrap();
        let rhs = alpha * fidelity(&r1).unwrap() + (1.0 - alpha) * fidelity(&r2).unwrap();
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn negativity_examples() {
        assert!((negativity(&ideal_state()).unwrap() - 0.5).abs() < 1e-12);
        assert!(
            negativity(&DensityMatrix::maximally_mixed(4).unwrap())
                .unwrap()
                .abs()
                < 1e-12
        );
        let n = negativity(&werner(0.844).unwrap()).unwrap();
        assert!((n - (3.0 * 0.844 - 1.0) / 4.0).abs() < 1e-12);
        assert!((n - 0.382).abs() < 0.002);
    }

    #[test]
    fn product_states_have_zero_negativity() {
        let mut rng = substream(1, 1);
        for _ in 0..50 {
            let rho = kron(&random_qubit(&mut rng), &random_qubit(&mut rng)).unwrap();
            let rho = DensityMatrix::new(rho).unwrap();
            assert!(negativity(&rho).unwrap() < 1e-12);
        }
    }

    #[test]
    fn purity_examples() {
        assert!((purity(&ideal_state()) - 1.0).abs() < 1e-12);
        assert!((purity(&DensityMatrix::maximally_mixed(2).unwrap()) - 0.5).abs() < 1e-12);
        let m = werner(0.86).unwrap().marginal(Subsystem::Atom).unwrap();
        assert!((purity(&m) - 0.5).abs() < 1e-12);
        // Werner purity (1 + 3 V^2) / 4
        assert!((purity(&werner(0.5).unwrap()) - (1.0 + 0.75) / 4.0).abs() < 1e-12);
    }

    #[test]
    fn chsh_examples() {
        let ideal = chsh_max(&ideal_state()).unwrap();
        assert!((ideal.value - 2.0 * SQRT_2).abs() < 1e-12);
        let t = correlation_matrix(&ideal_state()).unwrap();
        assert!((chsh_value(&t, &ideal.settings) - ideal.value).abs() < 1e-12);
        assert!((chsh_max(&werner(FRAC_1_SQRT_2).unwrap()).unwrap().value - 2.0).abs() < 1e-12);
        let s = chsh_max(&werner(0.74).unwrap()).unwrap().value;
        assert!((s - 2.0 * SQRT_2 * 0.74).abs() < 1e-12);
        assert!((s - 2.093).abs() < 1e-3);
    }

    #[test]
    fn chsh_werner_line() {
        for k in 0..=20 {
            let v = k as f64 / 20.0;
            let s = chsh_max(&werner(v).unwrap()).unwrap().value;
            assert!((s - 2.0 * SQRT_2 * v).abs() < 1e-9, "v={v}");
        }
    }

    #[test]
    fn chsh_settings_attain_the_bound_and_match_search() {
        let noise = NoiseModel {
            depolarizing: 0.05,
            flip_x: 0.03,
            flip_y: 0.08,
            dephasing: 0.02,
            ..NoiseModel::NONE
        };
        let rho = apply_noise(&ideal_state(), &noise).unwrap();
        let closed = chsh_max(&rho).unwrap();
        let t = correlation_matrix(&rho).unwrap();
        assert!((chsh_value(&t, &closed.settings) - closed.value).abs() < 1e-10);
        let numeric = chsh_numeric(&rho, 8, 3).unwrap();
        assert!(
            (numeric.value - closed.value).abs() < 1e-6,
            "{} vs {}",
            numeric.value,
            closed.value
        );
        assert!(numeric.value <= closed.value + 1e-12);
    }

    #[test]
    fn chsh_of_mixed_state_is_zero() {
        let r = chsh_max(&DensityMatrix::maximally_mixed(4).unwrap()).unwrap();
        assert!(r.value.abs() < 1e-12);
    }

    #[test]
    fn fit_recovers_noiseless_fringe() {
        let pts = beta_grid(18)
            .into_iter()
            .map(|b| (b, 0.5 + 0.5 * (2.0 * b - 0.3).cos()))
            .collect();
        let fit = fit_fringe(&scan_of(pts)).unwrap();
        assert!((fit.visibility - 1.0).abs() < 1e-9);
        assert!((fit.offset - 0.5).abs() < 1e-9);
        assert!((fit.phase - 0.3).abs() < 1e-9);
        assert!(fit.rms_residual < 1e-9);
        assert!(!fit.clipped);
    }

    #[test]
    fn fit_flat_and_clipped() {
        let flat = fit_fringe(&scan_of(
            beta_grid(8).into_iter().map(|b| (b, 0.5)).collect(),
        ))
        .unwrap();
        assert!(flat.visibility < 1e-12);
        let over = fit_fringe(&scan_of(
            beta_grid(8)
                .into_iter()
                .map(|b| (b, 0.6 + 0.5 * (2.0 * b).cos()))
                .collect(),
        ))
        .unwrap();
        assert!(over.clipped);
    }

    #[test]
    fn fit_rejects_degenerate_designs() {
        assert!(matches!(
            fit_fringe(&scan_of(vec![(0.0, 0.1), (0.5, 0.4), (1.0, 0.8)])),
            Err(Error::DegenerateFit(_))
        ));
        let same = vec![
            (0.2, 0.1),
            (0.2 + PI / 2.0, 0.9),
            (0.2 + PI, 0.1),
            (0.2, 0.12),
        ];
        assert!(matches!(
            fit_fringe(&scan_of(same)),
            Err(Error::DegenerateFit(_))
        ));
    }

    #[test]
    fn fit_of_exact_probabilities_matches_analytic_visibility() {
        let noise = NoiseModel {
            depolarizing: 0.07,
            flip_x: 0.04,
            flip_y: 0.06,
            ..NoiseModel::NONE
        };
        let rho = apply_noise(&ideal_state(), &noise).unwrap();
        for atom in [AtomSetting::SIGMA_X, AtomSetting::SIGMA_Y] {
            let want = analytic_visibility(&rho, &atom, Detector::Apd1).unwrap();
            for det in Detector::BOTH {
                let pts = beta_grid(12)
                    .into_iter()
                    .map(|b| {
                        let s = MeasurementSetting::new(atom, PhotonSetting::Linear { beta: b });
                        let p = joint_probabilities(&rho, &s).unwrap();
                        let d = det.index();
                        (b, p[2 + d] / (p[d] + p[2 + d]))
                    })
                    .collect();
                let fit = fit_fringe(&scan_of(pts)).unwrap();
                assert!((fit.visibility - want).abs() < 1e-6);
            }
        }
        // Werner closed form: V
        let w = werner(0.8).unwrap();
        assert!(
            (analytic_visibility(&w, &AtomSetting::SIGMA_X, Detector::Apd2).unwrap() - 0.8).abs()
                < 1e-12
        );
    }

    #[test]
    fn analytic_visibility_rejects_polarized_photon() {
        let plus = Ket::new(&[C64::new(FRAC_1_SQRT_2, 0.0), C64::new(FRAC_1_SQRT_2, 0.0)]).unwrap();
        let rho = kron(&identity2().scale_re(0.5), &plus.projector()).unwrap();
        let rho = DensityMatrix::new(rho).unwrap();
        assert!(analytic_visibility(&rho, &AtomSetting::SIGMA_X, Detector::Apd1).is_err());
    }

    #[test]
    fn fringe_extraction_from_scan_dataset() {
        let ds = simulate_scan(
            &werner(0.86).unwrap(),
            AtomSetting::SIGMA_X,
            &beta_grid(18),
            300,
            &NoiseModel::NONE,
            Sampling::Exact,
        )
        .unwrap();
        for det in Detector::BOTH {
            let scan = fringe_from_dataset(&ds, AtomSetting::SIGMA_X, det).unwrap();
            assert_eq!(scan.points.len(), 18);
            assert!(scan.points.iter().all(|p| (p.n - 300.0).abs() < 1e-9));
            let fit = fit_fringe(&scan).unwrap();
            assert!((fit.visibility - 0.86).abs() < 1e-9);
        }
        // APD1 has zero F=1 probability at beta = 0 for the ideal-like state
        let scan = fringe_from_dataset(&ds, AtomSetting::SIGMA_X, Detector::Apd1).unwrap();
        assert!((scan.points[0].p - 0.07).abs() < 1e-9);
        assert!(fringe_from_dataset(&ds, AtomSetting::SIGMA_Y, Detector::Apd1).is_err());
    }
}
