//! Hanbury Brown–Twiss style statistics on channel-1 emission records.
//!
//! The main estimator tiles a global window `[T₁, T₂]` (width ΔT) with
//! `N_w = ⌊ΔT/Δt⌋` contiguous sub-windows `[T₁ + wΔt, T₁ + (w+1)Δt)`. A
//! trajectory with `c` emissions inside a sub-window contributes
//! `c(c−1)/2` pairs. The Poissonian reference is
//!
//! ```text
//! expected = N_traj · Σ_w μ_w² / 2,   μ_w = (singles in w) / N_traj
//! ```
//!
//! which is what a Poisson process with the same per-window mean counts
//! would produce, so `g² = pairs / expected` and its error is
//! `√pairs / expected`.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{equal_time_minimum, pulse_profile, PulseShape, SystemParams};
use crate::error::{Result, UpbError};
use crate::fockspace::HilbertSpace;
use crate::frame::Frame;
use crate::ode::Tolerances;
use crate::trajectories::{JumpEvent, JumpRecord, TrajectoryEnsemble};

/// How a window position was chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CenterRule {
    Explicit,
    G2Minimum,
}

/// Global filtering window `[t1, t2]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterWindow {
    pub t1: f64,
    pub t2: f64,
    pub center_rule: CenterRule,
}

impl FilterWindow {
    pub fn new(t1: f64, t2: f64) -> Result<Self> {
        Self::with_rule(t1, t2, CenterRule::Explicit)
    }

    /// Window of the given width centered on `center`.
    pub fn centered(center: f64, width: f64, rule: CenterRule) -> Result<Self> {
        Self::with_rule(center - 0.5 * width, center + 0.5 * width, rule)
    }

    fn with_rule(t1: f64, t2: f64, center_rule: CenterRule) -> Result<Self> {
        if !(t2 > t1) || !t1.is_finite() || !t2.is_finite() {
            return Err(UpbError::FilterWindow(format!("need t1 < t2, got [{t1}, {t2}]")));
        }
        Ok(Self { t1, t2, center_rule })
    }

    pub fn width(&self) -> f64 {
        self.t2 - self.t1
    }

    pub fn center(&self) -> f64 {
        0.5 * (self.t1 + self.t2)
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.t1 && t < self.t2
    }
}

/// Centers a window of `width` on the minimum of the equal-time g⁽²⁾(t,t)
/// within the first pulse of a Gaussian train. Only times where n₁ exceeds
/// 5% of its peak are considered, so the noisy tails of the pulse are
/// ignored.
pub fn locate_filter_window(
    params: &SystemParams,
    space: HilbertSpace,
    frame: Frame,
    width: f64,
    tol: Tolerances,
) -> Result<FilterWindow> {
    let PulseShape::GaussianTrain { sigma_t, period, .. } = params.drive else {
        return Err(UpbError::FilterWindow("locating a window needs a pulsed drive".into()));
    };
    if !(width > 0.0) || width > period {
        return Err(UpbError::FilterWindow(format!("width {width} must lie in (0, pulse period {period}]")));
    }
    let step = sigma_t / 100.0;
    let n = (period / step).ceil() as usize;
    let grid: Vec<f64> = (0..=n).map(|i| period * i as f64 / n as f64).collect();
    let profile = pulse_profile(params, space, frame, &grid, tol, false)?;
    let center = equal_time_minimum(&profile, 0.05)
        .ok_or_else(|| UpbError::FilterWindow("no interior minimum of g2(t,t) within the pulse".into()))?;
    let window = FilterWindow::centered(center, width, CenterRule::G2Minimum)?;
    if window.t1 < 0.0 || window.t2 > period {
        return Err(UpbError::FilterWindow(format!(
            "window [{}, {}] leaves the pulse period [0, {period}]",
            window.t1, window.t2
        )));
    }
    Ok(window)
}

/// Filtered pair statistics for one sub-window width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairCountResult {
    pub delta_t: f64,
    pub pair_count: u64,
    pub singles: u64,
    pub poisson_expected: f64,
    pub g2: f64,
    /// `√pairs / expected`. This treats the pair count as Poissonian, which
    /// holds when the mean singles per sub-window μ is small (the spread of
    /// `c(c−1)/2` for Poisson `c` exceeds it by `√(1 + 2μ)`). When no pair
    /// was seen this is the one-count upper bound `1 / expected` and
    /// `one_sided` is set.
    pub error: f64,
    pub one_sided: bool,
}

fn sub_windows(window: &FilterWindow, delta_t: f64) -> Result<usize> {
    if !(delta_t > 0.0) || delta_t > window.width() * (1.0 + 1e-12) {
        return Err(UpbError::FilterWindow(format!(
            "sub-window {delta_t} must lie in (0, {}]",
            window.width()
        )));
    }
    Ok(((window.width() / delta_t) * (1.0 + 1e-12)).floor() as usize)
}

/// Per-sub-window singles and total pairs.
fn tally(records: &[JumpRecord], window: &FilterWindow, delta_t: f64, n_w: usize) -> (Vec<u64>, u64) {
    let mut singles = vec![0u64; n_w];
    let mut pairs = 0u64;
    let mut counts: Vec<(usize, u64)> = Vec::new();
    for r in records {
        counts.clear();
        for t in r.channel1_times() {
            if t < window.t1 {
                continue;
            }
            let w = ((t - window.t1) / delta_t).floor() as usize;
            if w >= n_w {
                continue;
            }
            singles[w] += 1;
            match counts.iter_mut().find(|(k, _)| *k == w) {
                Some((_, c)) => *c += 1,
                None => counts.push((w, 1)),
            }
        }
        pairs += counts.iter().map(|&(_, c)| c * (c - 1) / 2).sum::<u64>();
    }
    (singles, pairs)
}

/// Expected pair count of a Poisson process with the same mean singles per
/// sub-window: `N_traj · Σ_w μ_w²/2`.
pub fn poisson_expectation(ensemble: &TrajectoryEnsemble, window: &FilterWindow, delta_t: f64) -> Result<f64> {
    let n_w = sub_windows(window, delta_t)?;
    if ensemble.n_trajectories == 0 {
        return Ok(0.0);
    }
    let (singles, _) = tally(&ensemble.records, window, delta_t, n_w);
    Ok(expected_from_singles(&singles, ensemble.n_trajectories))
}

fn expected_from_singles(singles: &[u64], n_traj: usize) -> f64 {
    let n = n_traj as f64;
    singles.iter().map(|&s| (s as f64 / n).powi(2)).sum::<f64>() * n / 2.0
}

/// Sliding-window g⁽²⁾(Δt) from the channel-1 records.
pub fn filtered_pair_statistics(
    ensemble: &TrajectoryEnsemble,
    window: &FilterWindow,
    delta_t: f64,
) -> Result<PairCountResult> {
    let n_w = sub_windows(window, delta_t)?;
    let (singles, pairs) = tally(&ensemble.records, window, delta_t, n_w);
    let total: u64 = singles.iter().sum();
    if total == 0 {
        return Err(UpbError::UndefinedCorrelation { occupation: 0.0 });
    }
    let expected = expected_from_singles(&singles, ensemble.n_trajectories);
    let (error, one_sided) =
        if pairs == 0 { (1.0 / expected, true) } else { ((pairs as f64).sqrt() / expected, false) };
    Ok(PairCountResult {
        delta_t,
        pair_count: pairs,
        singles: total,
        poisson_expected: expected,
        g2: pairs as f64 / expected,
        error,
        one_sided,
    })
}

/// [`filtered_pair_statistics`] for every width, in order.
pub fn filter_scan(
    ensemble: &TrajectoryEnsemble,
    window: &FilterWindow,
    delta_ts: &[f64],
) -> Vec<Result<PairCountResult>> {
    delta_ts.par_iter().map(|&dt| filtered_pair_statistics(ensemble, window, dt)).collect()
}

/// `count` geometrically spaced widths from `first` to `last` inclusive.
pub fn delta_t_grid(first: f64, last: f64, count: usize) -> Result<Vec<f64>> {
    if !(first > 0.0) || !(last >= first) || count == 0 {
        return Err(UpbError::InvalidParameter(format!("invalid width grid {first}..{last} x {count}")));
    }
    if count == 1 {
        return Ok(vec![first]);
    }
    let ratio = (last / first).ln() / (count - 1) as f64;
    let mut g: Vec<f64> = (0..count).map(|i| first * (ratio * i as f64).exp()).collect();
    g[count - 1] = last;
    Ok(g)
}

/// Pair counts binned by pulse separation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoincidenceHistogram {
    /// Integer pulse separations `−K..=K`.
    pub separations: Vec<i64>,
    /// Ordered photon pairs per separation.
    pub counts: Vec<u64>,
}

impl CoincidenceHistogram {
    pub fn count_at(&self, separation: i64) -> u64 {
        self.separations.iter().position(|&s| s == separation).map_or(0, |i| self.counts[i])
    }

    /// Mean of the bins with nonzero separation.
    pub fn side_peak_mean(&self) -> f64 {
        let side: Vec<u64> =
            self.separations.iter().zip(&self.counts).filter(|(s, _)| **s != 0).map(|(_, c)| *c).collect();
        side.iter().sum::<u64>() as f64 / side.len().max(1) as f64
    }
}

/// Arranges the single-pulse records in a random order as a synthetic pulse
/// train (record k occupies `[kT, (k+1)T)`) and histograms the delays between
/// all ordered pairs of channel-1 photons in bins of width `T` centered on
/// integer separations up to `max_separation`. With a window, only photons
/// inside it are kept.
pub fn coincidence_histogram(
    ensemble: &TrajectoryEnsemble,
    pulse_period: f64,
    window: Option<&FilterWindow>,
    max_separation: usize,
    seed: u64,
) -> Result<CoincidenceHistogram> {
    if !(pulse_period > 0.0) {
        return Err(UpbError::InvalidParameter(format!("pulse period must be positive, got {pulse_period}")));
    }
    let mut order: Vec<usize> = (0..ensemble.records.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let pulses: Vec<Vec<f64>> = order
        .iter()
        .enumerate()
        .map(|(slot, &i)| {
            ensemble.records[i]
                .channel1_times()
                .filter(|&t| window.is_none_or(|w| w.contains(t)))
                .map(|t| slot as f64 * pulse_period + t)
                .collect()
        })
        .collect();
    let k_max = max_separation as i64;
    let mut counts = vec![0u64; 2 * max_separation + 1];
    let reach = max_separation + 1;
    for k in 0..pulses.len() {
        for a in 0..pulses[k].len() {
            let ta = pulses[k][a];
            for (k2, other) in pulses.iter().enumerate().skip(k).take(reach + 1) {
                let start = if k2 == k { a + 1 } else { 0 };
                for &tb in &other[start..] {
                    let bin = ((tb - ta).abs() / pulse_period).round() as i64;
                    if bin <= k_max {
                        counts[(k_max + bin) as usize] += 1;
                        counts[(k_max - bin) as usize] += 1;
                    }
                }
            }
        }
    }
    Ok(CoincidenceHistogram { separations: (-k_max..=k_max).collect(), counts })
}

/// Rate of pulses that leave exactly one channel-1 photon in the window.
pub fn single_photon_yield(ensemble: &TrajectoryEnsemble, window: &FilterWindow, pulse_rate: f64) -> f64 {
    if ensemble.n_trajectories == 0 {
        return 0.0;
    }
    let singles = ensemble
        .records
        .iter()
        .filter(|r| r.channel1_times().filter(|&t| window.contains(t)).count() == 1)
        .count();
    singles as f64 / ensemble.n_trajectories as f64 * pulse_rate
}

/// Records of a homogeneous Poisson process of the given rate on `[t_a, t_b)`.
pub fn synthetic_poisson(n_traj: usize, rate: f64, t_a: f64, t_b: f64, seed: u64) -> TrajectoryEnsemble {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let records = (0..n_traj as u64)
        .map(|id| {
            let mut events = Vec::new();
            let mut t = t_a;
            loop {
                let u: f64 = 1.0 - rng.random::<f64>();
                t += -u.ln() / rate;
                if t >= t_b {
                    break;
                }
                events.push(JumpEvent { time: t, channel: 1 });
            }
            JumpRecord { trajectory_id: id, seed, pulse_index: id, events }
        })
        .collect();
    TrajectoryEnsemble::from_records(records)
}

/// Records with exactly one channel-1 event per trajectory, uniform on
/// `[t_a, t_b)`.
pub fn synthetic_single_photons(n_traj: usize, t_a: f64, t_b: f64, seed: u64) -> TrajectoryEnsemble {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let records = (0..n_traj as u64)
        .map(|id| JumpRecord {
            trajectory_id: id,
            seed,
            pulse_index: id,
            events: vec![JumpEvent { time: rng.random_range(t_a..t_b), channel: 1 }],
        })
        .collect();
    TrajectoryEnsemble::from_records(records)
}
