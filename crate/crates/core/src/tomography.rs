//! Two-qubit state reconstruction from the nine Pauli-Pauli settings.
//!
//! The maximum-likelihood estimate is parameterized as `rho = T^dagger T / tr(T^dagger T)`
//! with `T` lower triangular (4 real diagonal + 6 complex off-diagonal entries),
//! which keeps every iterate positive semidefinite with unit trace. The
//! multinomial log-likelihood is maximized with L-BFGS and an Armijo
//! backtracking line search using the analytic gradient.

use std::cmp::Ordering;
use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measurement::{
    joint_probabilities, multinomial, simulate, substream, AtomSetting, CountRecord, Dataset,
    MeasurementSetting, PhotonSetting, Sampling, TrialBudget,
};
use crate::metrics::{state_metrics, StateMetrics};
use crate::parallel::map_indexed;
use crate::physics::NoiseModel;
use crate::qmath::{
    hermitian_eigen, identity2, identity4, pauli, tensor_product, Axis, ComplexMatrix,
    DensityMatrix, C64, HERMITIAN_TOL,
};

const CANONICAL_TOL: f64 = 1e-9;

/// `(axis, sign)` such that the "+" outcome of the setting is the `sign`
/// eigenvalue of `sigma_axis`.
type Role = (Axis, f64);

fn canonical_role(bloch: [f64; 3]) -> Option<Role> {
    for axis in Axis::ALL {
        let k = axis.index();
        let others = (0..3)
            .filter(|&i| i != k)
            .all(|i| bloch[i].abs() < CANONICAL_TOL);
        if others && (bloch[k].abs() - 1.0).abs() < CANONICAL_TOL {
            return Some((axis, bloch[k].signum()));
        }
    }
    None
}

fn photon_axis_setting(axis: Axis) -> PhotonSetting {
    match axis {
        Axis::X => PhotonSetting::Linear { beta: 0.0 },
        Axis::Y => PhotonSetting::Linear {
            beta: std::f64::consts::FRAC_PI_4,
        },
        Axis::Z => PhotonSetting::Circular,
    }
}

fn atom_axis_setting(axis: Axis) -> AtomSetting {
    match axis {
        Axis::X => AtomSetting::SIGMA_X,
        Axis::Y => AtomSetting::SIGMA_Y,
        Axis::Z => AtomSetting::SIGMA_Z,
    }
}

fn axis_letter(axis: Axis) -> char {
    match axis {
        Axis::X => 'x',
        Axis::Y => 'y',
        Axis::Z => 'z',
    }
}

/// The nine settings `sigma_i (atom) x sigma_j (photon)`, labeled e.g. `"xz"`.
pub fn canonical_settings() -> Vec<MeasurementSetting> {
    let mut out = Vec::with_capacity(9);
    for a in Axis::ALL {
        for p in Axis::ALL {
            out.push(
                MeasurementSetting::new(atom_axis_setting(a), photon_axis_setting(p))
                    .with_label(format!("{}{}", axis_letter(a), axis_letter(p))),
            );
        }
    }
    out
}

/// Simulated tomography data with `n_per_setting` heralded trials per setting.
pub fn simulate_tomography(
    rho: &DensityMatrix,
    n_per_setting: u64,
    noise: &NoiseModel,
    sampling: Sampling,
) -> Result<Dataset> {
    simulate(
        rho,
        &canonical_settings(),
        TrialBudget::PerSetting(n_per_setting),
        noise,
        sampling,
    )
}

fn sort_key_cmp(a: &CountRecord, b: &CountRecord) -> Ordering {
    let pk = |s: &PhotonSetting| match *s {
        PhotonSetting::Linear { beta } => (0u8, beta),
        PhotonSetting::Circular => (1u8, 0.0),
    };
    let (pa, pb) = (pk(&a.setting.photon), pk(&b.setting.photon));
    a.setting
        .atom
        .theta
        .total_cmp(&b.setting.atom.theta)
        .then(a.setting.atom.phi.total_cmp(&b.setting.atom.phi))
        .then(pa.0.cmp(&pb.0))
        .then(pa.1.total_cmp(&pb.1))
        .then_with(|| {
            a.counts
                .iter()
                .zip(&b.counts)
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(Ordering::Equal)
        })
}

/// Records restricted to the canonical Pauli-Pauli settings, in a fixed order.
#[derive(Clone, Debug)]
pub struct TomographySet {
    records: Vec<CountRecord>,
    roles: Vec<(Role, Role)>,
}

impl TomographySet {
    pub fn from_dataset(ds: &Dataset) -> Result<Self> {
        Self::from_records(&ds.records)
    }

    pub fn from_records(records: &[CountRecord]) -> Result<Self> {
        let mut kept: Vec<CountRecord> = records
            .iter()
            .filter(|r| {
                canonical_role(r.setting.atom.bloch()).is_some()
                    && canonical_role(r.setting.photon.bloch()).is_some()
            })
            .cloned()
            .collect();
        // fixed order makes every downstream reduction independent of input order
        kept.sort_by(sort_key_cmp);
        let roles: Vec<(Role, Role)> = kept
            .iter()
            .map(|r| {
                (
                    canonical_role(r.setting.atom.bloch()).expect("filtered"),
                    canonical_role(r.setting.photon.bloch()).expect("filtered"),
                )
            })
            .collect();
        let mut missing = Vec::new();
        for a in Axis::ALL {
            for p in Axis::ALL {
                if !roles.iter().any(|((ra, _), (rp, _))| *ra == a && *rp == p) {
                    missing.push(format!("atom {a} x photon {p}"));
                }
            }
        }
        if !missing.is_empty() {
            return Err(Error::MissingSettings(missing));
        }
        Ok(Self {
            records: kept,
            roles,
        })
    }

    pub fn records(&self) -> &[CountRecord] {
        &self.records
    }
}

/// Pauli expectation values estimated from counts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationData {
    /// `t[i][j] = <sigma_i (x) sigma_j>`.
    pub t: [[f64; 3]; 3],
    /// `<sigma_i (x) I>`.
    pub a: [f64; 3],
    /// `<I (x) sigma_j>`.
    pub b: [f64; 3],
    /// Trials behind each `t[i][j]`.
    pub n_eff: [[f64; 3]; 3],
}

impl CorrelationData {
    /// Expectation values of a known state.
    pub fn of_state(rho: &ComplexMatrix) -> Result<Self> {
        if rho.dim() != 4 {
            return Err(Error::Dimension {
                expected: 4,
                got: rho.dim(),
            });
        }
        let mut c = CorrelationData {
            t: [[0.0; 3]; 3],
            a: [0.0; 3],
            b: [0.0; 3],
            n_eff: [[0.0; 3]; 3],
        };
        for i in Axis::ALL {
            let si = pauli(i);
            c.a[i.index()] = rho.trace_product_re(&tensor_product(&si, &identity2())?);
            c.b[i.index()] = rho.trace_product_re(&tensor_product(&identity2(), &si)?);
            for j in Axis::ALL {
                let op = tensor_product(&si, &pauli(j))?;
                c.t[i.index()][j.index()] = rho.trace_product_re(&op);
            }
        }
        Ok(c)
    }
}

pub fn extract_correlations(set: &TomographySet) -> CorrelationData {
    let mut t_num = [[0.0; 3]; 3];
    let mut t_den = [[0.0; 3]; 3];
    let mut a_num = [0.0; 3];
    let mut a_den = [0.0; 3];
    let mut b_num = [0.0; 3];
    let mut b_den = [0.0; 3];
    for (rec, &((ax, sa), (px, sp))) in set.records.iter().zip(&set.roles) {
        let (i, j) = (ax.index(), px.index());
        let n = rec.total();
        for cell in 0..4 {
            let c = rec.counts[cell];
            // cell = 2 * atom + detector; outcome 0 is the "+" result of each side
            let ea = if cell / 2 == 0 { sa } else { -sa };
            let ep = if cell % 2 == 0 { sp } else { -sp };
            t_num[i][j] += c * ea * ep;
            a_num[i] += c * ea;
            b_num[j] += c * ep;
        }
        t_den[i][j] += n;
        a_den[i] += n;
        b_den[j] += n;
    }
    let mut out = CorrelationData {
        t: [[0.0; 3]; 3],
        a: [0.0; 3],
        b: [0.0; 3],
        n_eff: t_den,
    };
    for i in 0..3 {
        out.a[i] = a_num[i] / a_den[i];
        out.b[i] = b_num[i] / b_den[i];
        for j in 0..3 {
            out.t[i][j] = t_num[i][j] / t_den[i][j];
        }
    }
    out
}

/// Pauli expansion `(I + sum a_i s_i(x)I + sum b_j I(x)s_j + sum T_ij s_i(x)s_j) / 4`.
pub fn linear_inversion(c: &CorrelationData) -> ComplexMatrix {
    let mut m = identity4();
    let id = identity2();
    for i in Axis::ALL {
        let si = pauli(i);
        m = m + tensor_product(&si, &id)
            .expect("2x2")
            .scale_re(c.a[i.index()]);
        m = m + tensor_product(&id, &si)
            .expect("2x2")
            .scale_re(c.b[i.index()]);
        for j in Axis::ALL {
            let op = tensor_product(&si, &pauli(j)).expect("2x2");
            m = m + op.scale_re(c.t[i.index()][j.index()]);
        }
    }
    m.scale_re(0.25)
}

/// Euclidean projection of `v` onto the probability simplex.
pub fn project_to_simplex(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut tau = 0.0;
    for (j, &uj) in u.iter().enumerate() {
        cum += uj;
        let t = (cum - 1.0) / (j + 1) as f64;
        if uj - t > 0.0 {
            tau = t;
        }
    }
    v.iter().map(|&x| (x - tau).max(0.0)).collect()
}

/// Closest density matrix in Frobenius norm: keep the eigenvectors, project
/// the spectrum onto the simplex.
pub fn project_physical(m: &ComplexMatrix) -> Result<DensityMatrix> {
    let dev = m.hermitian_deviation();
    if dev > HERMITIAN_TOL {
        return Err(Error::NotHermitian(dev));
    }
    let eig = hermitian_eigen(&m.hermitian_part())?;
    let lam = project_to_simplex(&eig.values);
    let rho = eig.reconstruct(&lam).hermitian_part();
    let tr = rho.trace().re;
    DensityMatrix::new(rho.scale_re(1.0 / tr))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MleOptions {
    pub max_iterations: usize,
    /// Stop once the relative log-likelihood change stays below this.
    pub rel_tol: f64,
    /// Pseudo-count given to empty cells inside the likelihood; `None` leaves them empty.
    pub zero_count_prior: Option<f64>,
}

impl Default for MleOptions {
    fn default() -> Self {
        Self {
            max_iterations: 5000,
            rel_tol: 1e-10,
            zero_count_prior: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub method: String,
    pub log_likelihood: f64,
    pub initial_log_likelihood: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Cells that received the zero-count pseudo-count.
    pub regularized_cells: usize,
    pub zero_count_prior: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct MleResult {
    pub state: DensityMatrix,
    pub report: FitReport,
}

struct Likelihood {
    terms: Vec<(ComplexMatrix, f64)>,
    total: f64,
    regularized: usize,
}

impl Likelihood {
    fn new(set: &TomographySet, prior: Option<f64>) -> Self {
        let mut terms = Vec::new();
        let mut regularized = 0;
        for rec in &set.records {
            let ops = rec.setting.outcome_operators();
            for (op, &n) in ops.into_iter().zip(&rec.counts) {
                let n = match prior {
                    Some(c) if n == 0.0 => {
                        regularized += 1;
                        c
                    }
                    _ => n,
                };
                if n > 0.0 {
                    terms.push((op, n));
                }
            }
        }
        let total = terms.iter().map(|t| t.1).sum();
        Self {
            terms,
            total,
            regularized,
        }
    }

    fn value(&self, rho: &ComplexMatrix) -> f64 {
        let mut l = 0.0;
        for (op, n) in &self.terms {
            let p = rho.trace_product_re(op);
            if p <= 0.0 {
                return f64::NEG_INFINITY;
            }
            l += n * p.ln();
        }
        l
    }

    /// Log-likelihood and its gradient with respect to the 16 real factor parameters.
    fn value_and_gradient(&self, x: &[f64; 16]) -> (f64, [f64; 16]) {
        let t = factor_from_params(x);
        let a = t.dagger() * t;
        let tr_a = a.trace().re;
        let rho = a.scale_re(1.0 / tr_a);
        let mut l = 0.0;
        let mut r = ComplexMatrix::zeros(4).expect("4x4");
        for (op, n) in &self.terms {
            let p = rho.trace_product_re(op);
            if p <= 0.0 {
                return (f64::NEG_INFINITY, [0.0; 16]);
            }
            l += n * p.ln();
            r = r + op.scale_re(n / p);
        }
        // tr(R rho) equals the total count
        let g = (r - identity4().scale_re(self.total)).scale_re(1.0 / tr_a);
        let m = g * t.dagger();
        let mut grad = [0.0; 16];
        for (k, &(i, _)) in PARAM_LAYOUT.iter().enumerate() {
            grad[k] = 2.0 * m[(i, i)].re;
        }
        for (slot, &(i, j)) in OFFDIAG.iter().enumerate() {
            let mji = m[(j, i)];
            grad[4 + 2 * slot] = 2.0 * mji.re;
            grad[4 + 2 * slot + 1] = -2.0 * mji.im;
        }
        (l, grad)
    }
}

const PARAM_LAYOUT: [(usize, usize); 4] = [(0, 0), (1, 1), (2, 2), (3, 3)];
const OFFDIAG: [(usize, usize); 6] = [(1, 0), (2, 0), (2, 1), (3, 0), (3, 1), (3, 2)];

fn factor_from_params(x: &[f64; 16]) -> ComplexMatrix {
    let mut t = ComplexMatrix::zeros(4).expect("4x4");
    for (k, &(i, j)) in PARAM_LAYOUT.iter().enumerate() {
        t[(i, j)] = C64::new(x[k], 0.0);
    }
    for (slot, &(i, j)) in OFFDIAG.iter().enumerate() {
        t[(i, j)] = C64::new(x[4 + 2 * slot], x[4 + 2 * slot + 1]);
    }
    t
}

fn params_from_factor(t: &ComplexMatrix) -> [f64; 16] {
    let mut x = [0.0; 16];
    for (k, &(i, j)) in PARAM_LAYOUT.iter().enumerate() {
        x[k] = t[(i, j)].re;
    }
    for (slot, &(i, j)) in OFFDIAG.iter().enumerate() {
        x[4 + 2 * slot] = t[(i, j)].re;
        x[4 + 2 * slot + 1] = t[(i, j)].im;
    }
    x
}

fn density_from_params(x: &[f64; 16]) -> ComplexMatrix {
    let t = factor_from_params(x);
    let a = t.dagger() * t;
    a.scale_re(1.0 / a.trace().re).hermitian_part()
}

/// Lower-triangular `T` with `T^dagger T = rho` for positive definite `rho`.
fn factor_of(rho: &ComplexMatrix) -> Option<ComplexMatrix> {
    // Cholesky of the index-reversed matrix gives rho = U U^dagger with U upper.
    let n = 4;
    let mut rev = ComplexMatrix::zeros(4).ok()?;
    for i in 0..n {
        for j in 0..n {
            rev[(i, j)] = rho[(n - 1 - i, n - 1 - j)];
        }
    }
    let mut l = ComplexMatrix::zeros(4).ok()?;
    for j in 0..n {
        let mut d = rev[(j, j)].re;
        for k in 0..j {
            d -= l[(j, k)].norm_sqr();
        }
        if d <= 0.0 || !d.is_finite() {
            return None;
        }
        let d = d.sqrt();
        l[(j, j)] = C64::new(d, 0.0);
        for i in (j + 1)..n {
            let mut s = rev[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)].conj();
            }
            l[(i, j)] = s / d;
        }
    }
    let mut u = ComplexMatrix::zeros(4).ok()?;
    for i in 0..n {
        for j in 0..n {
            u[(i, j)] = l[(n - 1 - i, n - 1 - j)];
        }
    }
    Some(u.dagger())
}

fn dot(a: &[f64; 16], b: &[f64; 16]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Multinomial log-likelihood of the set's counts under `rho` (no constant term).
pub fn log_likelihood(set: &TomographySet, rho: &ComplexMatrix, opts: &MleOptions) -> f64 {
    Likelihood::new(set, opts.zero_count_prior).value(rho)
}

/// Default starting point: linear inversion projected onto the physical set.
pub fn default_initial_state(set: &TomographySet) -> Result<DensityMatrix> {
    project_physical(&linear_inversion(&extract_correlations(set)))
}

pub fn mle_reconstruct(
    set: &TomographySet,
    init: Option<&DensityMatrix>,
    opts: &MleOptions,
) -> Result<MleResult> {
    if opts.rel_tol <= 0.0 || opts.max_iterations == 0 {
        return Err(Error::Invalid(
            "MLE needs a positive tolerance and iteration cap".into(),
        ));
    }
    let like = Likelihood::new(set, opts.zero_count_prior);
    let init = match init {
        Some(r) => *r,
        None => default_initial_state(set)?,
    };
    if init.dim() != 4 {
        return Err(Error::Dimension {
            expected: 4,
            got: init.dim(),
        });
    }
    let init_ll = like.value(&init);

    // slight admixture of I/4 so the factorization exists for rank-deficient starts
    let delta = 1e-8;
    let start = init.scale_re(1.0 - delta) + identity4().scale_re(delta / 4.0);
    let t0 = factor_of(&start)
        .ok_or_else(|| Error::Unphysical("initial state has no triangular factorization".into()))?;
    let mut x = params_from_factor(&t0);

    // minimize f = -L
    let eval = |x: &[f64; 16]| {
        let (l, g) = like.value_and_gradient(x);
        let mut ng = [0.0; 16];
        for k in 0..16 {
            ng[k] = -g[k];
        }
        (-l, ng)
    };
    let (mut f, mut g) = eval(&x);
    let mut history: VecDeque<([f64; 16], [f64; 16], f64)> = VecDeque::new();
    const MEMORY: usize = 10;
    let mut iterations = 0;
    let mut converged = false;
    let mut small_steps = 0;
    let grad_tol = 1e-12 * like.total.max(1.0);

    if f.is_finite() {
        while iterations < opts.max_iterations {
            let gnorm = dot(&g, &g).sqrt();
            if gnorm <= grad_tol {
                converged = true;
                break;
            }
            iterations += 1;

            // two-loop recursion
            let mut q = g;
            let mut alphas = Vec::with_capacity(history.len());
            for (s, y, rho) in history.iter().rev() {
                let a = rho * dot(s, &q);
                for k in 0..16 {
                    q[k] -= a * y[k];
                }
                alphas.push(a);
            }
            let gamma = history
                .back()
                .map(|(s, y, _)| dot(s, y) / dot(y, y))
                .unwrap_or_else(|| (0.1 / gnorm).min(1.0));
            for v in q.iter_mut() {
                *v *= gamma;
            }
            for ((s, y, rho), a) in history.iter().zip(alphas.iter().rev()) {
                let b = rho * dot(y, &q);
                for k in 0..16 {
                    q[k] += s[k] * (a - b);
                }
            }
            let mut d = [0.0; 16];
            for k in 0..16 {
                d[k] = -q[k];
            }
            let mut slope = dot(&g, &d);
            if slope.is_nan() || slope >= 0.0 {
                history.clear();
                let scale = (0.1 / gnorm).min(1.0);
                for k in 0..16 {
                    d[k] = -g[k] * scale;
                }
                slope = dot(&g, &d);
            }

            let mut step = 1.0;
            let mut accepted = None;
            for _ in 0..60 {
                let mut xn = x;
                for k in 0..16 {
                    xn[k] += step * d[k];
                }
                let (fn_, gn) = eval(&xn);
                if fn_.is_finite() && fn_ <= f + 1e-4 * step * slope {
                    accepted = Some((xn, fn_, gn));
                    break;
                }
                step *= 0.5;
            }
            let Some((xn, fn_, gn)) = accepted else {
                // no decrease along a descent direction: at the optimum to machine precision
                converged = history.is_empty() || gnorm <= 1e3 * grad_tol;
                if !converged {
                    history.clear();
                    continue;
                }
                break;
            };

            let mut s = [0.0; 16];
            let mut y = [0.0; 16];
            for k in 0..16 {
                s[k] = xn[k] - x[k];
                y[k] = gn[k] - g[k];
            }
            let sy = dot(&s, &y);
            if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() {
                history.push_back((s, y, 1.0 / sy));
                if history.len() > MEMORY {
                    history.pop_front();
                }
            }
            let change = (f - fn_).abs();
            x = xn;
            f = fn_;
            g = gn;
            if change <= opts.rel_tol * f.abs().max(1.0) {
                small_steps += 1;
                if small_steps >= 3 {
                    converged = true;
                    break;
                }
            } else {
                small_steps = 0;
            }
        }
    }

    let fitted = density_from_params(&x);
    let fitted_ll = like.value(&fitted);
    let (state, ll) = if fitted_ll >= init_ll || init_ll.is_nan() {
        (DensityMatrix::new(fitted)?, fitted_ll)
    } else {
        (init, init_ll)
    };
    Ok(MleResult {
        state,
        report: FitReport {
            method: "mle".into(),
            log_likelihood: ll,
            initial_log_likelihood: init_ll,
            iterations,
            converged,
            regularized_cells: like.regularized,
            zero_count_prior: opts.zero_count_prior,
        },
    })
}

/// Mean, standard deviation and central 95% interval of bootstrap replicas.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Spread {
    pub mean: f64,
    pub std: f64,
    pub lo: f64,
    pub hi: f64,
}

impl Spread {
    /// Sorts first, so the result does not depend on the order of `values`.
    pub fn of(values: &[f64]) -> Self {
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let var = if v.len() > 1 {
            v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        let q = |f: f64| v[((f * (n - 1.0)).round() as usize).min(v.len() - 1)];
        Self {
            mean,
            std: var.sqrt(),
            lo: q(0.025),
            hi: q(0.975),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BootstrapSummary {
    pub replicas: usize,
    pub fidelity: Spread,
    pub negativity: Spread,
    pub chsh_max: Spread,
    pub purity: Spread,
}

/// Parametric bootstrap: resample every record's total from `state`, refit,
/// and collect the state metrics. Replica `r` uses its own substream.
pub fn bootstrap(
    set: &TomographySet,
    state: &DensityMatrix,
    replicas: usize,
    seed: u64,
    workers: usize,
    opts: &MleOptions,
) -> Result<BootstrapSummary> {
    if replicas < 2 {
        return Err(Error::Invalid("bootstrap needs at least 2 replicas".into()));
    }
    let probs = set
        .records
        .iter()
        .map(|r| joint_probabilities(state, &r.setting))
        .collect::<Result<Vec<_>>>()?;
    let one = |r: usize| -> Result<StateMetrics> {
        let mut rng = substream(seed, r as u64);
        let records = set
            .records
            .iter()
            .zip(&probs)
            .map(|(rec, p)| {
                let c = multinomial(p, rec.total().round() as u64, &mut rng)?;
                CountRecord::new(
                    rec.setting.clone(),
                    [c[0], c[1], c[2], c[3]].map(|x| x as f64),
                )
            })
            .collect::<Result<Vec<_>>>()?;
        let replica = TomographySet::from_records(&records)?;
        state_metrics(&mle_reconstruct(&replica, None, opts)?.state)
    };
    let results = map_indexed(replicas, workers, one)
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let col = |f: fn(&StateMetrics) -> f64| Spread::of(&results.iter().map(f).collect::<Vec<_>>());
    Ok(BootstrapSummary {
        replicas,
        fidelity: col(|m| m.fidelity),
        negativity: col(|m| m.negativity),
        chsh_max: col(|m| m.chsh_max),
        purity: col(|m| m.purity),
    })
}
