use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use atom_photon::bell::{build_plan, ExperimentPlan, PlanReport};
use atom_photon::calibration::{calibrate as solve_calibration, Calibration, Observables};
use atom_photon::config::{Config, NOISE_KEYS};
use atom_photon::io::{
    read_dataset, read_json, real_part_table, write_dataset, write_json, StateFile,
};
use atom_photon::measurement::{
    beta_grid, simulate, AtomSetting, Detector, MeasurementSetting, PhotonSetting, Sampling,
    TrialBudget,
};
use atom_photon::metrics::{
    analytic_visibility, chsh_max, fit_fringe, fringe_from_dataset, state_metrics, ChshSettings,
    StateMetrics, VisibilityFit,
};
use atom_photon::physics::{apply_noise, ideal_state, werner, NoiseModel};
use atom_photon::qmath::DensityMatrix;
use atom_photon::tomography::{
    bootstrap, default_initial_state, mle_reconstruct, simulate_tomography, BootstrapSummary,
    FitReport, MleOptions, TomographySet,
};
use serde::Serialize;

use crate::Global;

/// Offsets the bootstrap streams from the simulation streams of the same seed.
const BOOTSTRAP_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

/// Output files of one command; removed again unless the command completes.
struct Outputs {
    prefix: String,
    written: Vec<PathBuf>,
    committed: bool,
}

impl Outputs {
    fn new(prefix: &Path) -> Result<Self> {
        let prefix = prefix.to_string_lossy().into_owned();
        if prefix.is_empty() {
            bail!("--out prefix is empty");
        }
        if let Some(parent) = Path::new(&prefix).parent() {
            if !parent.as_os_str().is_empty() && !parent.is_dir() {
                bail!("output directory {} does not exist", parent.display());
            }
        }
        Ok(Self {
            prefix,
            written: Vec::new(),
            committed: false,
        })
    }

    /// Registers `<prefix><suffix>` for cleanup and returns it.
    fn path(&mut self, suffix: &str) -> PathBuf {
        let p = PathBuf::from(format!("{}{suffix}", self.prefix));
        self.written.push(p.clone());
        p
    }

    fn commit(mut self) {
        self.committed = true;
    }
}

impl Drop for Outputs {
    fn drop(&mut self) {
        if !self.committed {
            for p in &self.written {
                let _ = fs::remove_file(p);
            }
        }
    }
}

fn load_config(g: &Global, allowed: &[&str]) -> Result<Config> {
    let mut cfg = match &g.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    for o in &g.overrides {
        cfg.apply_override(o)?;
    }
    cfg.ensure_known(allowed)?;
    Ok(cfg)
}

fn sampling(g: &Global) -> Sampling {
    if g.exact {
        Sampling::Exact
    } else {
        Sampling::Seeded(g.seed)
    }
}

/// `noise = calibrated` (default) starts from the noise reproducing the
/// measured visibilities 0.85 / 0.87 and fidelity 0.875; `noise = none` from
/// a noiseless channel. Individual `noise.*` keys override either.
fn noise_from(cfg: &Config) -> Result<NoiseModel> {
    let base = match cfg.get_str("noise").unwrap_or("calibrated") {
        "none" => NoiseModel::NONE,
        "calibrated" => {
            solve_calibration(
                Observables {
                    vx: 0.85,
                    vy: 0.87,
                    fidelity: 0.875,
                },
                &NoiseModel::NONE,
            )?
            .noise
        }
        other => bail!("noise must be `calibrated` or `none`, got `{other}`"),
    };
    Ok(NoiseModel::from_config(cfg, &base)?)
}

fn state_from(cfg: &Config) -> Result<DensityMatrix> {
    match cfg.get_str("state").unwrap_or("ideal") {
        "ideal" => Ok(ideal_state()),
        s => match s.strip_prefix("werner:") {
            Some(v) => {
                let v: f64 = v
                    .parse()
                    .map_err(|_| anyhow!("bad Werner visibility in `{s}`"))?;
                Ok(werner(v)?)
            }
            None => bail!("state must be `ideal` or `werner:<V>`, got `{s}`"),
        },
    }
}

fn with_keys(own: &[&'static str]) -> Vec<&'static str> {
    own.iter()
        .copied()
        .chain(["noise"])
        .chain(NOISE_KEYS)
        .collect()
}

#[derive(Serialize)]
struct FringeSummary {
    basis: String,
    detector: Detector,
    #[serde(flatten)]
    fit: VisibilityFit,
    /// Visibility implied by the simulated state and readout, in exact mode.
    #[serde(skip_serializing_if = "Option::is_none")]
    expected_visibility: Option<f64>,
}

#[derive(Serialize)]
struct ScanReport {
    seed: Option<u64>,
    exact: bool,
    noise: NoiseModel,
    n_per_detector: u64,
    points: usize,
    fits: Vec<FringeSummary>,
}

pub fn scan(g: &Global) -> Result<()> {
    let cfg = load_config(g, &with_keys(&["points", "n", "bases", "state"]))?;
    let points: usize = cfg.get_or("points", 18)?;
    let n: u64 = cfg.get_or("n", 300)?;
    if points < 4 {
        bail!("points = {points}: a fringe fit needs at least 4");
    }
    if n == 0 {
        bail!("n must be positive");
    }
    let mut bases = Vec::new();
    for b in cfg.get_str("bases").unwrap_or("x,y").split(',') {
        match b.trim() {
            "x" => bases.push(("sigma_x", AtomSetting::SIGMA_X)),
            "y" => bases.push(("sigma_y", AtomSetting::SIGMA_Y)),
            other => bail!("unknown atomic basis `{other}` (use x, y)"),
        }
    }
    let noise = noise_from(&cfg)?;
    let rho = state_from(&cfg)?;
    let betas = beta_grid(points);
    let settings: Vec<MeasurementSetting> = bases
        .iter()
        .flat_map(|(name, atom)| {
            betas.iter().enumerate().map(move |(i, &beta)| {
                MeasurementSetting::new(*atom, PhotonSetting::Linear { beta })
                    .with_label(format!("{name}/{i}"))
            })
        })
        .collect();
    let ds = simulate(
        &rho,
        &settings,
        TrialBudget::PerDetector(n),
        &noise,
        sampling(g),
    )?;

    let noisy = apply_noise(&rho, &noise)?;
    let k = 1.0 - noise.eps01 - noise.eps10;
    let mut fits = Vec::new();
    let mut table = String::new();
    for (name, atom) in &bases {
        for det in Detector::BOTH {
            let scan = fringe_from_dataset(&ds, *atom, det)?;
            let fit = fit_fringe(&scan)?;
            let expected = if g.exact {
                analytic_visibility(&noisy, atom, det).ok().map(|v| v * k)
            } else {
                None
            };
            for p in &scan.points {
                let err = (p.p * (1.0 - p.p) / p.n).sqrt();
                writeln!(
                    table,
                    "{name},{det:?},{:.16e},{},{},{}",
                    p.beta, p.p, err, p.n
                )?;
            }
            fits.push(FringeSummary {
                basis: name.to_string(),
                detector: det,
                fit,
                expected_visibility: expected,
            });
        }
    }

    let mut out = Outputs::new(&g.out)?;
    let csv = out.path(".counts.csv");
    out.path(".counts.json");
    write_dataset(&csv, &ds)?;
    let report = ScanReport {
        seed: ds.meta.seed,
        exact: g.exact,
        noise,
        n_per_detector: n,
        points,
        fits,
    };
    write_json(&out.path(".scan.json"), &report)?;
    fs::write(
        out.path(".fringe.csv"),
        format!("basis,detector,beta,p,err,n\n{table}"),
    )?;
    for f in &report.fits {
        println!(
            "{} {:?}: visibility {:.4}, offset {:.4}, phase {:.4} rad{}",
            f.basis,
            f.detector,
            f.fit.visibility,
            f.fit.offset,
            f.fit.phase,
            if f.fit.clipped { " (clipped)" } else { "" }
        );
    }
    out.commit();
    Ok(())
}

#[derive(Serialize)]
struct MetricsReport {
    method: String,
    #[serde(flatten)]
    metrics: StateMetrics,
    chsh_settings: ChshSettings,
    records: usize,
    total_counts: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    fit: Option<FitReport>,
    bootstrap: Option<BootstrapSummary>,
}

pub fn tomo(g: &Global) -> Result<()> {
    let cfg = load_config(
        g,
        &with_keys(&[
            "input",
            "n",
            "state",
            "method",
            "bootstrap",
            "zero_count_prior",
        ]),
    )?;
    let method = cfg.get_str("method").unwrap_or("mle").to_string();
    if method != "mle" && method != "linear" {
        bail!("method must be `mle` or `linear`, got `{method}`");
    }
    let replicas: usize = cfg.get_or("bootstrap", 250)?;
    let opts = MleOptions {
        zero_count_prior: cfg.get("zero_count_prior")?,
        ..MleOptions::default()
    };
    let mut out = Outputs::new(&g.out)?;
    let ds = match cfg.get_str("input") {
        Some(path) => read_dataset(Path::new(path)).with_context(|| format!("reading {path}"))?,
        None => {
            let n: u64 = cfg.get_or("n", 300)?;
            if n == 0 {
                bail!("n must be positive");
            }
            let ds = simulate_tomography(&state_from(&cfg)?, n, &noise_from(&cfg)?, sampling(g))?;
            let csv = out.path(".counts.csv");
            out.path(".counts.json");
            write_dataset(&csv, &ds)?;
            ds
        }
    };
    let set = TomographySet::from_dataset(&ds)?;
    let (state, fit) = if method == "mle" {
        let r = mle_reconstruct(&set, None, &opts)?;
        if !r.report.converged {
            eprintln!(
                "warning: likelihood maximization hit the iteration cap ({} iterations)",
                r.report.iterations
            );
        }
        (r.state, Some(r.report))
    } else {
        (default_initial_state(&set)?, None)
    };
    let metrics = state_metrics(&state)?;
    // resampling fractional expected counts has no meaning, so exact mode skips it
    let boot = if replicas > 0 && !ds.meta.exact {
        Some(bootstrap(
            &set,
            &state,
            replicas,
            g.seed ^ BOOTSTRAP_SALT,
            g.workers,
            &opts,
        )?)
    } else {
        None
    };
    let report = MetricsReport {
        method,
        metrics,
        chsh_settings: chsh_max(&state)?.settings,
        records: set.records().len(),
        total_counts: set.records().iter().map(|r| r.total()).sum(),
        fit: fit.clone(),
        bootstrap: boot,
    };
    write_json(&out.path(".state.json"), &StateFile::new(&state, fit))?;
    write_json(&out.path(".metrics.json"), &report)?;

    println!("real part of the reconstructed state:");
    print!("{}", real_part_table(&state));
    let err = |f: fn(&BootstrapSummary) -> f64| {
        boot.as_ref()
            .map(|b| format!(" +- {:.3}", f(b)))
            .unwrap_or_default()
    };
    println!(
        "fidelity   {:.4}{}",
        metrics.fidelity,
        err(|b| b.fidelity.std)
    );
    println!(
        "negativity {:.4}{}",
        metrics.negativity,
        err(|b| b.negativity.std)
    );
    println!("purity     {:.4}{}", metrics.purity, err(|b| b.purity.std));
    println!(
        "chsh_max   {:.4}{}",
        metrics.chsh_max,
        err(|b| b.chsh_max.std)
    );
    out.commit();
    Ok(())
}

pub fn calibrate(g: &Global) -> Result<()> {
    let cfg = load_config(g, &with_keys(&["vx", "vy", "fidelity"]))?;
    let targets = Observables {
        vx: cfg.get_or("vx", 0.85)?,
        vy: cfg.get_or("vy", 0.87)?,
        fidelity: cfg.get_or("fidelity", 0.875)?,
    };
    let base = NoiseModel::from_config(&cfg, &NoiseModel::NONE)?;
    let cal: Calibration = solve_calibration(targets, &base)?;
    let mut out = Outputs::new(&g.out)?;
    let text = format!(
        "# noise reproducing vx = {}, vy = {}, fidelity = {}\n{}",
        targets.vx,
        targets.vy,
        targets.fidelity,
        cal.noise.to_config().to_text()
    );
    fs::write(out.path(".noise.conf"), &text)?;
    write_json(&out.path(".calibration.json"), &cal)?;
    print!("{text}");
    println!(
        "# re-simulated: vx = {:.6}, vy = {:.6}, fidelity = {:.6} (max error {:.1e})",
        cal.achieved.vx, cal.achieved.vy, cal.achieved.fidelity, cal.max_error
    );
    out.commit();
    Ok(())
}

const PLAN_KEYS: [&str; 13] = [
    "v_atph",
    "bsm_fidelity",
    "eta_ph",
    "transmission",
    "rep_rate",
    "p_bsm",
    "duty",
    "attempt_rate",
    "target_sigmas",
    "t_stirap",
    "n_lifetimes",
    "lifetime_tau",
    "measurement_window",
];

#[derive(Serialize)]
struct PlanFile {
    plan: ExperimentPlan,
    report: PlanReport,
}

pub fn plan(g: &Global) -> Result<()> {
    let mut allowed = PLAN_KEYS.to_vec();
    allowed.push("input");
    let cfg = load_config(g, &allowed)?;
    let mut plan: ExperimentPlan = match cfg.get_str("input") {
        Some(p) => read_json(Path::new(p)).with_context(|| format!("reading plan {p}"))?,
        None => ExperimentPlan::default(),
    };
    {
        let fields: [&mut f64; 13] = [
            &mut plan.v_atph,
            &mut plan.bsm_fidelity,
            &mut plan.eta_ph,
            &mut plan.transmission,
            &mut plan.rep_rate,
            &mut plan.p_bsm,
            &mut plan.duty,
            &mut plan.attempt_rate,
            &mut plan.target_sigmas,
            &mut plan.t_stirap,
            &mut plan.n_lifetimes,
            &mut plan.lifetime_tau,
            &mut plan.measurement_window,
        ];
        for (key, field) in PLAN_KEYS.iter().zip(fields) {
            if let Some(v) = cfg.get(key)? {
                *field = v;
            }
        }
    }
    let report = build_plan(&plan)?;
    let mut out = Outputs::new(&g.out)?;
    write_json(&out.path(".plan.json"), &PlanFile { plan, report })?;

    const DAY: f64 = 86_400.0;
    println!("{:<28} {:>14} {:>14}", "quantity", "model", "quoted");
    let rows = [
        (
            "atom-atom visibility",
            format!("{:.4}", report.v_atat),
            "0.74",
        ),
        ("CHSH value", format!("{:.4}", report.chsh_s), "-"),
        (
            "pairs for target sigmas",
            report.pairs_needed.to_string(),
            "~7000",
        ),
        (
            "pair rate [1/min]",
            format!("{:.3}", report.pair_rate * 60.0),
            "~1",
        ),
        (
            "heralded pairs [1/s]",
            format!("{:.3}", report.heralding_rate),
            "~0.2",
        ),
        (
            "duration [days]",
            format!("{:.2}", report.duration / DAY),
            "12",
        ),
        (
            "readout completion",
            format!("{:.5}", report.collapse_probability),
            ">0.99",
        ),
        (
            "measurement time [us]",
            format!("{:.3}", report.measurement_time * 1e6),
            "<0.5",
        ),
        (
            "min separation [m]",
            format!("{:.2}", report.min_separation),
            "150",
        ),
    ];
    for (q, m, p) in rows {
        println!("{q:<28} {m:>14} {p:>14}");
    }
    out.commit();
    Ok(())
}
