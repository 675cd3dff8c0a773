//! Monte Carlo wave-function (quantum jump) unraveling of the master equation.
//!
//! Between jumps the state follows `i d|ψ⟩/dt = H_eff|ψ⟩`, whose norm decays.
//! A threshold `r ∈ (0, 1)` is drawn; when `⟨ψ|ψ⟩` falls to `r` a photon is
//! emitted. The emission time is located by bisection, the channel is picked
//! with a second uniform number from `P_j ∝ κ_j ⟨A_j†A_j⟩`, the jump is
//! applied and a new threshold is drawn.
//!
//! Trajectories are propagated in the same displaced frame as the master
//! equation (see [`crate::frame`]). Channel 1 always uses the photon jump
//! `A₁ = â₁ = α₁ + d̂₁`, so channel-1 records are photon detections in the
//! output of cavity 1. Channel 2 is either the photon jump as well or the
//! fluctuation jump `d̂₂` (see [`Channel2`]).

use std::cell::RefCell;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::SystemParams;
use crate::error::{Result, UpbError};
use crate::fockspace::{Cavity, HilbertSpace, QOperator};
use crate::frame::{Frame, FrameModel};
use crate::ode::{Dopri5, OdeSystem, Tolerances};
use crate::state::WaveFunction;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// Trajectories per work unit. The ensemble result depends on the chunking
/// only through floating-point summation order, which is fixed here.
const CHUNK: usize = 256;

/// Jump operator used for the second cavity.
///
/// `Photon` records the photons leaking out of cavity 2. `Fluctuation`
/// unravels channel 2 with `d̂₂ = â₂ − α₂(t)`, which reproduces the same
/// master equation and leaves the statistics of the channel-1 record
/// unchanged, while avoiding the many uninformative jumps produced by the
/// large coherent amplitude in cavity 2 under strong drive. In the lab
/// frame both choices coincide.
///
/// The price is that `d̂₂` jumps are rare but change the state a lot, so
/// ensemble estimates of `n₁`, `n₂` become heavy-tailed and their sample
/// standard errors are unreliable for small ensembles. Use `Photon` when the
/// sampled observables matter.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Channel2 {
    #[default]
    Photon,
    Fluctuation,
}

/// Starting state of every trajectory (in the lab frame; the reference
/// amplitudes start at zero).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum InitialState {
    #[default]
    Vacuum,
    Fock {
        n1: usize,
        n2: usize,
    },
}

/// Settings shared by every trajectory of a campaign.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryConfig {
    pub space: HilbertSpace,
    pub frame: Frame,
    pub channel2: Channel2,
    pub initial: InitialState,
    pub t_start: f64,
    pub horizon: f64,
    /// Jump-time localization tolerance (1/κ).
    pub jump_tolerance: f64,
    /// Times at which `n₁`, `n₂` are sampled (may be empty).
    pub sample_times: Vec<f64>,
    pub tolerances: Tolerances,
}

impl TrajectoryConfig {
    pub fn new(space: HilbertSpace, horizon: f64) -> Self {
        Self {
            space,
            frame: Frame::Lab,
            channel2: Channel2::Photon,
            initial: InitialState::Vacuum,
            t_start: 0.0,
            horizon,
            jump_tolerance: 1e-3,
            sample_times: Vec::new(),
            tolerances: Tolerances::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.horizon > self.t_start) || !self.horizon.is_finite() || !self.t_start.is_finite() {
            return Err(UpbError::InvalidParameter(format!(
                "trajectory horizon {} must exceed start {}",
                self.horizon, self.t_start
            )));
        }
        if !(self.jump_tolerance > 0.0) {
            return Err(UpbError::InvalidParameter("jump tolerance must be positive".into()));
        }
        let in_range = self.sample_times.iter().all(|&t| t >= self.t_start && t <= self.horizon);
        let sorted = self.sample_times.windows(2).all(|w| w[0] < w[1]);
        if !in_range || !sorted {
            return Err(UpbError::InvalidParameter(
                "sample times must be increasing and inside [t_start, horizon]".into(),
            ));
        }
        if let InitialState::Fock { n1, n2 } = self.initial {
            if self.space.encode(n1, n2).is_none() {
                return Err(UpbError::InvalidParameter(format!("|{n1},{n2}> outside truncation {}", self.space)));
            }
        }
        Ok(())
    }
}

/// One photon emission.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JumpEvent {
    pub time: f64,
    pub channel: u8,
}

/// Emission history of one trajectory (one pulse).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JumpRecord {
    pub trajectory_id: u64,
    pub seed: u64,
    pub pulse_index: u64,
    pub events: Vec<JumpEvent>,
}

impl JumpRecord {
    /// Channel-1 emission times.
    pub fn channel1_times(&self) -> impl Iterator<Item = f64> + '_ {
        self.events.iter().filter(|e| e.channel == 1).map(|e| e.time)
    }
}

/// A trajectory's record plus its observable samples `[n₁, n₂]` at the
/// configured sample times.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryOutput {
    pub record: JumpRecord,
    pub samples: Vec<[f64; 2]>,
}

/// Non-Hermitian generator on `[ψ, α₁, α₂]`.
struct EffectiveDynamics<'a> {
    model: &'a FrameModel,
    channel2: Channel2,
    h: RefCell<QOperator>,
}

impl<'a> EffectiveDynamics<'a> {
    fn new(model: &'a FrameModel, channel2: Channel2) -> Self {
        Self { model, channel2, h: RefCell::new(model.hamiltonian_template()) }
    }

    /// Offsets `β_j` such that channel `j` jumps with `â_j − β_j`.
    fn beta(&self, alpha: [Complex64; 2]) -> [Complex64; 2] {
        match self.channel2 {
            Channel2::Photon => [ZERO, ZERO],
            Channel2::Fluctuation => [ZERO, alpha[1]],
        }
    }
}

impl OdeSystem for EffectiveDynamics<'_> {
    fn dim(&self) -> usize {
        self.model.space().dim() + 2
    }

    fn rhs(&self, t: f64, y: &[Complex64], dy: &mut [Complex64]) {
        let n = y.len() - 2;
        let alpha = [y[n], y[n + 1]];
        let alpha_dot = self.model.alpha_dot(t, alpha);
        let coeffs = self.model.hamiltonian_coeffs(t, alpha, alpha_dot, self.beta(alpha));
        let mut h = self.h.borrow_mut();
        self.model.assemble_hamiltonian(&coeffs, &mut h);
        h.apply(&y[..n], &mut dy[..n]);
        dy[..n].iter_mut().for_each(|v| *v *= -I);
        dy[n] = alpha_dot[0];
        dy[n + 1] = alpha_dot[1];
    }
}

fn norm_sqr(psi: &[Complex64]) -> f64 {
    psi.iter().map(|a| a.norm_sqr()).sum()
}

/// Propagates `psi` from `t0` to `t0 + dt` under the lab-frame effective
/// Hamiltonian `H − (i/2)Σ κ_j â_j†â_j`, without jumps. The result is not
/// renormalized.
pub fn evolve_nonhermitian(
    psi: &WaveFunction,
    params: &SystemParams,
    t0: f64,
    dt: f64,
    tol: Tolerances,
) -> Result<WaveFunction> {
    if !(dt > 0.0) {
        return Err(UpbError::InvalidParameter(format!("time step must be positive, got {dt}")));
    }
    let dim = psi.amplitudes().len();
    let model = FrameModel::new(params, crate::QuantumState::space(psi), Frame::Lab)?;
    let sys = EffectiveDynamics::new(&model, Channel2::Photon);
    let mut y = psi.amplitudes().to_vec();
    y.extend([ZERO, ZERO]);
    let mut stepper = Dopri5::new(&sys, t0, y, tol);
    stepper.advance_to(t0 + dt)?;
    WaveFunction::new(model.space(), stepper.y()[..dim].to_vec())
}

/// Seed of trajectory `id` in a campaign, from an independent ChaCha stream.
pub fn trajectory_seed(master_seed: u64, id: u64) -> u64 {
    let mut g = ChaCha8Rng::seed_from_u64(master_seed);
    g.set_stream(id);
    g.next_u64()
}

/// Scratch operators reused across trajectories.
struct Workspace {
    jumps: [QOperator; 2],
    buf: Vec<Complex64>,
}

impl Workspace {
    fn sample(&mut self, model: &FrameModel, y: &[Complex64]) -> [f64; 2] {
        let n = y.len() - 2;
        let psi = &y[..n];
        let norm = norm_sqr(psi);
        let mut out = [0.0; 2];
        for (c, cav) in [Cavity::One, Cavity::Two].into_iter().enumerate() {
            model.number_operator(cav, y[n + c]).apply(psi, &mut self.buf);
            let v: Complex64 = psi.iter().zip(&self.buf).map(|(a, b)| a.conj() * b).sum();
            out[c] = v.re / norm;
        }
        out
    }

    /// `κ_j ‖A_j ψ‖²` for both channels; also assembles the jump operators.
    fn channel_weights(&mut self, model: &FrameModel, channel2: Channel2, y: &[Complex64]) -> [f64; 2] {
        let n = y.len() - 2;
        let gammas = match channel2 {
            Channel2::Photon => [y[n], y[n + 1]],
            Channel2::Fluctuation => [y[n], ZERO],
        };
        let p = model.params();
        let kappas = [p.kappa1, p.kappa2];
        let mut w = [0.0; 2];
        for (c, cav) in [Cavity::One, Cavity::Two].into_iter().enumerate() {
            model.assemble_field(cav, gammas[c], &mut self.jumps[c]);
            self.jumps[c].apply(&y[..n], &mut self.buf);
            w[c] = kappas[c] * norm_sqr(&self.buf);
        }
        w
    }

    fn apply_jump(&mut self, y: &mut [Complex64], channel: usize) -> Result<()> {
        let n = y.len() - 2;
        self.jumps[channel].apply(&y[..n], &mut self.buf);
        let norm = norm_sqr(&self.buf);
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(UpbError::InvalidParameter(format!("jump produced a state with norm² {norm}")));
        }
        let s = 1.0 / norm.sqrt();
        for (dst, src) in y[..n].iter_mut().zip(&self.buf) {
            *dst = src * s;
        }
        Ok(())
    }
}

/// Reusable per-thread machinery for running trajectories.
pub struct TrajectoryRunner<'a> {
    config: &'a TrajectoryConfig,
    model: FrameModel,
    work: Workspace,
}

impl<'a> TrajectoryRunner<'a> {
    pub fn new(params: &SystemParams, config: &'a TrajectoryConfig) -> Result<Self> {
        config.validate()?;
        let model = FrameModel::new(params, config.space, config.frame)?;
        let jumps = [model.field_template(Cavity::One), model.field_template(Cavity::Two)];
        let work = Workspace { jumps, buf: vec![ZERO; config.space.dim()] };
        Ok(Self { config, model, work })
    }

    fn initial_state(&self) -> Vec<Complex64> {
        let space = self.config.space;
        let mut y = vec![ZERO; space.dim() + 2];
        let (n1, n2) = match self.config.initial {
            InitialState::Vacuum => (0, 0),
            InitialState::Fock { n1, n2 } => (n1, n2),
        };
        y[space.encode(n1, n2).expect("validated")] = Complex64::new(1.0, 0.0);
        y
    }

    /// Runs one trajectory with its own random stream.
    pub fn run(&mut self, trajectory_id: u64, seed: u64) -> Result<TrajectoryOutput> {
        let fail = |e: UpbError| UpbError::Trajectory { trajectory_id, reason: e.to_string() };
        self.run_inner(trajectory_id, seed).map_err(fail)
    }

    fn run_inner(&mut self, trajectory_id: u64, seed: u64) -> Result<TrajectoryOutput> {
        let cfg = self.config;
        let y0 = self.initial_state();
        let Self { model, work, .. } = self;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sys = EffectiveDynamics::new(model, cfg.channel2);
        let mut stepper = Dopri5::new(&sys, cfg.t_start, y0.clone(), cfg.tolerances);
        let mut threshold = open_unit(&mut rng);
        let mut events = Vec::new();
        let mut samples = Vec::with_capacity(cfg.sample_times.len());
        let mut next_sample = 0;
        let mut y_prev = y0;
        let n = y_prev.len() - 2;
        loop {
            let t = stepper.t();
            if next_sample < cfg.sample_times.len() && t >= cfg.sample_times[next_sample] {
                samples.push(work.sample(model, stepper.y()));
                next_sample += 1;
                continue;
            }
            if t >= cfg.horizon {
                break;
            }
            let t_stop = cfg.sample_times.get(next_sample).copied().unwrap_or(cfg.horizon).min(cfg.horizon);
            y_prev.copy_from_slice(stepper.y());
            let t_new = stepper.step(t_stop)?;
            if norm_sqr(&stepper.y()[..n]) <= threshold {
                let (t_jump, mut y_jump) = locate_jump(&mut stepper, t, &y_prev, t_new, threshold, cfg.jump_tolerance);
                let w = work.channel_weights(model, cfg.channel2, &y_jump);
                let total = w[0] + w[1];
                if !(total > 0.0) {
                    return Err(UpbError::InvalidParameter(format!("zero emission probability at t = {t_jump}")));
                }
                let u: f64 = rng.random();
                let channel = if u * total < w[0] { 0 } else { 1 };
                work.apply_jump(&mut y_jump, channel)?;
                events.push(JumpEvent { time: t_jump, channel: channel as u8 + 1 });
                stepper.reset_state(t_jump, &y_jump);
                threshold = open_unit(&mut rng);
            }
        }
        Ok(TrajectoryOutput {
            record: JumpRecord { trajectory_id, seed, pulse_index: trajectory_id, events },
            samples,
        })
    }
}

/// Bisects `[t0, t1]` for the first time at which the norm reaches the
/// threshold, using single Runge–Kutta steps from the state at `t0`.
fn locate_jump<S: OdeSystem>(
    stepper: &mut Dopri5<'_, S>,
    t0: f64,
    y0: &[Complex64],
    t1: f64,
    threshold: f64,
    tolerance: f64,
) -> (f64, Vec<Complex64>) {
    let n = y0.len() - 2;
    let mut y_hi = stepper.y().to_vec();
    let (mut lo, mut hi) = (0.0, t1 - t0);
    while hi - lo > tolerance {
        let mid = 0.5 * (lo + hi);
        stepper.reset_state(t0, y0);
        let y_mid = stepper.trial_step(mid);
        if norm_sqr(&y_mid[..n]) <= threshold {
            hi = mid;
            y_hi.copy_from_slice(y_mid);
        } else {
            lo = mid;
        }
    }
    (t0 + hi, y_hi)
}

/// Uniform draw in the open interval (0, 1).
fn open_unit(rng: &mut ChaCha8Rng) -> f64 {
    loop {
        let r: f64 = rng.random();
        if r > 0.0 {
            return r;
        }
    }
}

/// Runs a single trajectory.
pub fn run_trajectory(
    params: &SystemParams,
    config: &TrajectoryConfig,
    trajectory_id: u64,
    seed: u64,
) -> Result<TrajectoryOutput> {
    TrajectoryRunner::new(params, config)?.run(trajectory_id, seed)
}

/// A trajectory that could not be completed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryFailure {
    pub trajectory_id: u64,
    pub reason: String,
}

/// Records and sampled observables of a campaign. `records` holds only the
/// completed trajectories; failures are listed separately and excluded from
/// all averages.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryEnsemble {
    pub records: Vec<JumpRecord>,
    pub n_trajectories: usize,
    pub failures: Vec<TrajectoryFailure>,
    pub grid: Vec<f64>,
    pub n1_mean: Vec<f64>,
    pub n1_variance: Vec<f64>,
    pub n2_mean: Vec<f64>,
    pub n2_variance: Vec<f64>,
}

impl TrajectoryEnsemble {
    /// Wraps existing records (e.g. read back from a log) without observables.
    pub fn from_records(records: Vec<JumpRecord>) -> Self {
        Self {
            n_trajectories: records.len(),
            records,
            failures: Vec::new(),
            grid: Vec::new(),
            n1_mean: Vec::new(),
            n1_variance: Vec::new(),
            n2_mean: Vec::new(),
            n2_variance: Vec::new(),
        }
    }

    /// Standard error of the sampled mean `n_j` at every grid point.
    pub fn standard_error(&self, cavity: Cavity) -> Vec<f64> {
        let var = match cavity {
            Cavity::One => &self.n1_variance,
            Cavity::Two => &self.n2_variance,
        };
        let n = self.n_trajectories.max(1) as f64;
        var.iter().map(|v| (v / n).sqrt()).collect()
    }

    /// Number of channel-`c` emissions in `[t1, t2)` over all trajectories.
    pub fn count_events(&self, channel: u8, t1: f64, t2: f64) -> u64 {
        self.records
            .iter()
            .flat_map(|r| r.events.iter())
            .filter(|e| e.channel == channel && e.time >= t1 && e.time < t2)
            .count() as u64
    }
}

#[derive(Default)]
struct Partial {
    records: Vec<JumpRecord>,
    failures: Vec<TrajectoryFailure>,
    sums: Vec<[f64; 4]>,
}

/// Runs `n_traj` trajectories with seeds derived from `master_seed`.
///
/// Work is split into fixed chunks of consecutive trajectory ids and the
/// chunk results are combined in id order, so the output does not depend on
/// the number of worker threads.
pub fn run_ensemble(
    params: &SystemParams,
    config: &TrajectoryConfig,
    n_traj: usize,
    master_seed: u64,
) -> Result<TrajectoryEnsemble> {
    if n_traj == 0 {
        return Err(UpbError::InvalidParameter("ensemble needs at least one trajectory".into()));
    }
    config.validate()?;
    params.validate()?;
    let n_samples = config.sample_times.len();
    let chunks: Vec<(usize, usize)> =
        (0..n_traj).step_by(CHUNK).map(|start| (start, (start + CHUNK).min(n_traj))).collect();
    let partials: Vec<Result<Partial>> = chunks
        .par_iter()
        .map(|&(start, end)| {
            let mut runner = TrajectoryRunner::new(params, config)?;
            let mut part = Partial { sums: vec![[0.0; 4]; n_samples], ..Default::default() };
            for id in start as u64..end as u64 {
                let seed = trajectory_seed(master_seed, id);
                match runner.run(id, seed) {
                    Ok(out) => {
                        debug_assert_eq!(out.samples.len(), n_samples);
                        for (acc, s) in part.sums.iter_mut().zip(&out.samples) {
                            acc[0] += s[0];
                            acc[1] += s[0] * s[0];
                            acc[2] += s[1];
                            acc[3] += s[1] * s[1];
                        }
                        part.records.push(out.record);
                    }
                    Err(e) => part.failures.push(TrajectoryFailure { trajectory_id: id, reason: e.to_string() }),
                }
            }
            Ok(part)
        })
        .collect();
    let mut records = Vec::with_capacity(n_traj);
    let mut failures = Vec::new();
    let mut sums = vec![[0.0; 4]; n_samples];
    for p in partials {
        let p = p?;
        records.extend(p.records);
        failures.extend(p.failures);
        for (acc, s) in sums.iter_mut().zip(&p.sums) {
            for k in 0..4 {
                acc[k] += s[k];
            }
        }
    }
    let m = records.len();
    let (mut n1_mean, mut n1_variance, mut n2_mean, mut n2_variance) = (vec![], vec![], vec![], vec![]);
    if m > 0 {
        let mf = m as f64;
        let var = |s: f64, s2: f64| if m > 1 { ((s2 - s * s / mf) / (mf - 1.0)).max(0.0) } else { 0.0 };
        for s in &sums {
            n1_mean.push(s[0] / mf);
            n1_variance.push(var(s[0], s[1]));
            n2_mean.push(s[2] / mf);
            n2_variance.push(var(s[2], s[3]));
        }
    } else {
        n1_mean = vec![f64::NAN; n_samples];
        n1_variance = n1_mean.clone();
        n2_mean = n1_mean.clone();
        n2_variance = n1_mean.clone();
    }
    Ok(TrajectoryEnsemble {
        records,
        n_trajectories: m,
        failures,
        grid: config.sample_times.clone(),
        n1_mean,
        n1_variance,
        n2_mean,
        n2_variance,
    })
}

/// Campaign metadata written next to a jump log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignMetadata {
    pub code_version: String,
    pub master_seed: u64,
    pub n_requested: usize,
    pub n_trajectories: usize,
    pub failures: Vec<TrajectoryFailure>,
    pub params: SystemParams,
    pub config: TrajectoryConfig,
}

#[derive(Debug, Serialize, Deserialize)]
struct LogRow {
    trajectory_id: u64,
    seed: u64,
    pulse_index: u64,
    event_time: f64,
    channel: u8,
}

/// Sidecar path for a log: `events.csv` → `events.meta.json`.
pub fn metadata_path(log: &Path) -> PathBuf {
    log.with_extension("meta.json")
}

/// Writes the jump log (one row per event) and its metadata sidecar.
pub fn write_jump_log(path: &Path, ensemble: &TrajectoryEnsemble, meta: &CampaignMetadata) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(BufWriter::new(File::create(path)?));
    w.write_record(["trajectory_id", "seed", "pulse_index", "event_time", "channel"])?;
    for r in &ensemble.records {
        for e in &r.events {
            w.serialize(LogRow {
                trajectory_id: r.trajectory_id,
                seed: r.seed,
                pulse_index: r.pulse_index,
                event_time: e.time,
                channel: e.channel,
            })?;
        }
    }
    w.flush()?;
    let mut side = BufWriter::new(File::create(metadata_path(path))?);
    serde_json::to_writer_pretty(&mut side, meta).map_err(|e| UpbError::Config(e.to_string()))?;
    side.write_all(b"\n")?;
    Ok(())
}

/// Reads a jump log back. Trajectories without events are restored from the
/// sidecar, which lists the campaign size and the failed ids.
pub fn read_jump_log(path: &Path) -> Result<(TrajectoryEnsemble, CampaignMetadata)> {
    let meta: CampaignMetadata = serde_json::from_reader(BufReader::new(File::open(metadata_path(path))?))
        .map_err(|e| UpbError::Config(format!("metadata sidecar: {e}")))?;
    let mut r = csv::ReaderBuilder::new().has_headers(false).from_reader(BufReader::new(File::open(path)?));
    let mut rows = r.records();
    match rows.next() {
        Some(Ok(h)) if h.iter().eq(["trajectory_id", "seed", "pulse_index", "event_time", "channel"]) => {}
        Some(Err(e)) => return Err(e.into()),
        _ => return Err(UpbError::Parse { offset: 0, message: "missing or unexpected jump log header".into() }),
    }
    let failed: std::collections::HashSet<u64> = meta.failures.iter().map(|f| f.trajectory_id).collect();
    let mut records: Vec<JumpRecord> = (0..meta.n_requested as u64)
        .filter(|id| !failed.contains(id))
        .map(|id| JumpRecord {
            trajectory_id: id,
            seed: trajectory_seed(meta.master_seed, id),
            pulse_index: id,
            events: Vec::new(),
        })
        .collect();
    let mut index = vec![usize::MAX; meta.n_requested];
    for (i, rec) in records.iter().enumerate() {
        index[rec.trajectory_id as usize] = i;
    }
    for row in rows {
        let row = row?;
        let offset = row.position().map_or(0, |p| p.byte());
        let row: LogRow = row.deserialize(None).map_err(|e| UpbError::Parse { offset, message: e.to_string() })?;
        let slot = index.get(row.trajectory_id as usize).copied().unwrap_or(usize::MAX);
        if slot == usize::MAX || !(row.channel == 1 || row.channel == 2) || !row.event_time.is_finite() {
            return Err(UpbError::Parse { offset, message: format!("invalid event for trajectory {}", row.trajectory_id) });
        }
        let rec = &mut records[slot];
        if rec.events.last().is_some_and(|e| e.time >= row.event_time) {
            return Err(UpbError::Parse { offset, message: "event times must increase within a trajectory".into() });
        }
        rec.seed = row.seed;
        rec.pulse_index = row.pulse_index;
        rec.events.push(JumpEvent { time: row.event_time, channel: row.channel });
    }
    if records.len() != meta.n_trajectories {
        return Err(UpbError::Config(format!(
            "sidecar reports {} trajectories but lists {} after failures",
            meta.n_trajectories,
            records.len()
        )));
    }
    let mut ensemble = TrajectoryEnsemble::from_records(records);
    ensemble.failures = meta.failures.clone();
    Ok((ensemble, meta))
}
