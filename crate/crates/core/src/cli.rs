//! The `upb` command-line front end.
//!
//! Runs are described by a TOML [`RunConfig`]. Any field can be overridden
//! from the command line with `--set section.key=value` (the value is parsed
//! as TOML), and a handful of common fields have dedicated flags; flags are
//! applied after the file, so they win. Every subcommand that writes files
//! also writes `config.resolved.toml` (the merged configuration and the tool
//! version) into its output directory.
//!
//! Energies and times in the configuration are in units of ħκ and 1/κ by
//! default. With `units = "si"`, energies are in μeV and times in ns, and
//! they are converted with the `[scale]` section. CSV outputs are always in
//! κ-units, with extra SI columns where useful.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::counting::{
    coincidence_histogram, delta_t_grid, filter_scan, locate_filter_window, single_photon_yield, CenterRule,
    FilterWindow,
};
use crate::device::{self, PhysicalScale};
use crate::dynamics::{
    equal_time_minimum, filtered_g2_scan, g2_tau_cw, pulse_profile, sweep_drive, tiled_filtered_g2,
    upward_crossing, PulseShape, SystemParams,
};
use crate::error::{Result, UpbError};
use crate::fockspace::{Cavity, HilbertSpace};
use crate::frame::Frame;
use crate::ode::Tolerances;
use crate::trajectories::{
    read_jump_log, run_ensemble, write_jump_log, CampaignMetadata, Channel2, TrajectoryConfig,
};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Environment variable naming the default output directory.
pub const OUTPUT_DIR_ENV: &str = "UPB_OUTPUT_DIR";

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Units {
    #[default]
    Kappa,
    Si,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScaleConfig {
    pub hbar_kappa_uev: f64,
    pub photon_energy_ev: f64,
}

impl Default for ScaleConfig {
    fn default() -> Self {
        Self { hbar_kappa_uev: 1.0, photon_energy_ev: 0.8 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemConfig {
    pub delta1: f64,
    pub delta2: f64,
    pub u1: f64,
    pub u2: f64,
    pub j_coupling: f64,
    pub kappa1: f64,
    pub kappa2: f64,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self { delta1: -0.29, delta2: -0.29, u1: 0.001, u2: 0.001, j_coupling: 19.6, kappa1: 1.0, kappa2: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpaceConfig {
    pub n1_levels: usize,
    pub n2_levels: usize,
}

impl Default for SpaceConfig {
    fn default() -> Self {
        Self { n1_levels: 4, n2_levels: 18 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnsembleConfig {
    pub n_traj: usize,
    pub master_seed: u64,
    pub channel2: Channel2,
    pub jump_tolerance: f64,
    /// End of every trajectory; defaults to the end of the first pulse
    /// (t0 + 4σ) for pulsed drives and to 10 for constant drives.
    pub horizon: Option<f64>,
    /// Observable samples per trajectory (0 disables sampling).
    pub samples: usize,
    /// Tolerances of the trajectory integrator (the master equation uses
    /// `[solver]`).
    pub tolerances: Tolerances,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        Self {
            n_traj: 1000,
            master_seed: 1,
            channel2: Channel2::Photon,
            jump_tolerance: 1e-3,
            horizon: None,
            samples: 21,
            tolerances: Tolerances::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Spacing {
    #[default]
    Linear,
    Log,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub f_min: f64,
    pub f_max: f64,
    pub points: usize,
    pub spacing: Spacing,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self { f_min: 1.0, f_max: 150.0, points: 40, spacing: Spacing::Log }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct G2TauConfig {
    pub tau_max: f64,
    pub points: usize,
}

impl Default for G2TauConfig {
    fn default() -> Self {
        Self { tau_max: 8.0, points: 801 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PulsedConfig {
    /// End of the simulated interval; defaults to t0 + 4σ.
    pub t_end: Option<f64>,
    pub grid_points: usize,
    /// Width of the global window for the tiled (Monte Carlo equivalent)
    /// curve.
    pub window_width: f64,
    /// Widths of the single window centered on the g²(t,t) minimum.
    pub width_min: f64,
    pub width_max: f64,
    pub width_points: usize,
    /// Sub-window widths of the tiled curve.
    pub delta_t_points: usize,
    /// Simpson intervals of each centered window.
    pub intervals: usize,
    /// Largest quadrature step of the tiled curve.
    pub max_step: f64,
}

impl Default for PulsedConfig {
    fn default() -> Self {
        Self {
            t_end: None,
            grid_points: 481,
            window_width: 2.3853,
            width_min: 0.0152,
            width_max: 0.4,
            width_points: 40,
            delta_t_points: 16,
            intervals: 16,
            max_step: 0.005,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterConfig {
    /// Global window width ΔT.
    pub window_width: f64,
    /// Window center; located at the g²(t,t) minimum when absent.
    pub window_center: Option<f64>,
    /// Smallest sub-window Δt of the scan (the largest is ΔT).
    pub delta_t_min: f64,
    pub delta_t_points: usize,
    /// Short filter used for the filtered histogram and the yield.
    pub short_width: f64,
    pub pulse_rate_hz: f64,
    pub histogram_max_separation: usize,
    pub histogram_seed: u64,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            window_width: 2.3853,
            window_center: None,
            delta_t_min: 0.009875,
            delta_t_points: 16,
            short_width: 0.11395,
            pulse_rate_hz: 5e7,
            histogram_max_separation: 5,
            histogram_seed: 7,
        }
    }
}

/// Complete, serializable description of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub units: Units,
    pub frame: Frame,
    pub output_dir: Option<PathBuf>,
    pub scale: ScaleConfig,
    pub system: SystemConfig,
    pub drive: PulseShape,
    pub space: SpaceConfig,
    pub solver: Tolerances,
    pub ensemble: EnsembleConfig,
    pub sweep: SweepConfig,
    pub g2tau: G2TauConfig,
    pub pulsed: PulsedConfig,
    pub filter: FilterConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            units: Units::Kappa,
            frame: Frame::Lab,
            output_dir: None,
            scale: ScaleConfig::default(),
            system: SystemConfig::default(),
            drive: PulseShape::Constant { amplitude: 30.0 },
            space: SpaceConfig::default(),
            solver: Tolerances::default(),
            ensemble: EnsembleConfig::default(),
            sweep: SweepConfig::default(),
            g2tau: G2TauConfig::default(),
            pulsed: PulsedConfig::default(),
            filter: FilterConfig::default(),
        }
    }
}

impl RunConfig {
    /// Parses a TOML document and applies `key.path=value` overrides.
    pub fn from_toml(text: &str, overrides: &[String]) -> Result<Self> {
        let file: toml::Table = toml::from_str(text).map_err(|e| UpbError::Config(e.to_string()))?;
        let mut table = toml::Table::try_from(Self::default()).map_err(|e| UpbError::Config(e.to_string()))?;
        merge_tables(&mut table, file);
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        table.try_into().map_err(|e: toml::de::Error| UpbError::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| UpbError::Config(e.to_string()))
    }

    pub fn physical_scale(&self) -> Result<PhysicalScale> {
        PhysicalScale::new(self.scale.hbar_kappa_uev, self.scale.photon_energy_ev)
    }

    /// Converts a configured energy to units of ħκ.
    fn energy(&self, v: f64) -> Result<f64> {
        Ok(match self.units {
            Units::Kappa => v,
            Units::Si => self.physical_scale()?.energy_from_uev(v),
        })
    }

    /// Converts a configured time to units of 1/κ.
    fn time(&self, v: f64) -> Result<f64> {
        Ok(match self.units {
            Units::Kappa => v,
            Units::Si => self.physical_scale()?.seconds_to_time_units(v * 1e-9),
        })
    }

    /// The same configuration expressed in κ-units.
    pub fn to_kappa_units(&self) -> Result<Self> {
        let mut c = self.clone();
        c.units = Units::Kappa;
        let s = &self.system;
        c.system = SystemConfig {
            delta1: self.energy(s.delta1)?,
            delta2: self.energy(s.delta2)?,
            u1: self.energy(s.u1)?,
            u2: self.energy(s.u2)?,
            j_coupling: self.energy(s.j_coupling)?,
            kappa1: self.energy(s.kappa1)?,
            kappa2: self.energy(s.kappa2)?,
        };
        c.drive = match self.drive {
            PulseShape::Constant { amplitude } => PulseShape::Constant { amplitude: self.energy(amplitude)? },
            PulseShape::GaussianTrain { amplitude, sigma_t, period, t0, n_pulses } => PulseShape::GaussianTrain {
                amplitude: self.energy(amplitude)?,
                sigma_t: self.time(sigma_t)?,
                period: self.time(period)?,
                t0: self.time(t0)?,
                n_pulses,
            },
        };
        c.ensemble.jump_tolerance = self.time(self.ensemble.jump_tolerance)?;
        c.ensemble.horizon = self.ensemble.horizon.map(|h| self.time(h)).transpose()?;
        c.sweep.f_min = self.energy(self.sweep.f_min)?;
        c.sweep.f_max = self.energy(self.sweep.f_max)?;
        c.g2tau.tau_max = self.time(self.g2tau.tau_max)?;
        c.pulsed.t_end = self.pulsed.t_end.map(|t| self.time(t)).transpose()?;
        c.pulsed.window_width = self.time(self.pulsed.window_width)?;
        c.pulsed.width_min = self.time(self.pulsed.width_min)?;
        c.pulsed.width_max = self.time(self.pulsed.width_max)?;
        c.pulsed.max_step = self.time(self.pulsed.max_step)?;
        c.filter.window_width = self.time(self.filter.window_width)?;
        c.filter.window_center = self.filter.window_center.map(|t| self.time(t)).transpose()?;
        c.filter.delta_t_min = self.time(self.filter.delta_t_min)?;
        c.filter.short_width = self.time(self.filter.short_width)?;
        Ok(c)
    }

    /// System parameters in κ-units.
    pub fn system_params(&self) -> Result<SystemParams> {
        let k = self.to_kappa_units()?;
        let s = k.system;
        let p = SystemParams {
            delta1: s.delta1,
            delta2: s.delta2,
            u1: s.u1,
            u2: s.u2,
            j_coupling: s.j_coupling,
            kappa1: s.kappa1,
            kappa2: s.kappa2,
            drive: k.drive,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn hilbert_space(&self) -> Result<HilbertSpace> {
        HilbertSpace::new(self.space.n1_levels, self.space.n2_levels)
    }

    /// Output directory: the configured one, else `$UPB_OUTPUT_DIR`, else
    /// `upb-out`.
    pub fn resolve_output_dir(&self) -> PathBuf {
        self.output_dir
            .clone()
            .or_else(|| std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("upb-out"))
    }
}

/// Overlays `file` on `base` key by key. The drive table is replaced whole,
/// because its fields depend on the pulse kind.
fn merge_tables(base: &mut toml::Table, file: toml::Table) {
    for (key, value) in file {
        match (base.get_mut(&key), value) {
            (Some(toml::Value::Table(b)), toml::Value::Table(f)) if key != "drive" => merge_tables(b, f),
            (_, v) => {
                base.insert(key, v);
            }
        }
    }
}

fn apply_override(table: &mut toml::Table, spec: &str) -> Result<()> {
    let (path, raw) =
        spec.split_once('=').ok_or_else(|| UpbError::Config(format!("override `{spec}` is not key=value")))?;
    let keys: Vec<&str> = path.trim().split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(UpbError::Config(format!("bad key path `{path}`")));
    }
    let value = parse_value(raw.trim())?;
    let (last, parents) = keys.split_last().expect("non-empty");
    let mut t = table;
    for k in parents {
        let entry = t.entry(k.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        t = entry.as_table_mut().ok_or_else(|| UpbError::Config(format!("`{k}` is not a table")))?;
    }
    t.insert(last.to_string(), value);
    Ok(())
}

/// TOML literal, or a bare string when it does not parse as one.
fn parse_value(raw: &str) -> Result<toml::Value> {
    let doc = format!("v = {raw}");
    match toml::from_str::<toml::Table>(&doc) {
        Ok(mut t) => Ok(t.remove("v").expect("key present")),
        Err(_) => Ok(toml::Value::String(raw.to_string())),
    }
}

#[derive(Debug, Parser)]
#[command(name = "upb", version, about = "Photon statistics of a driven Kerr photonic molecule")]
pub struct Cli {
    /// TOML run configuration.
    #[arg(long, short, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (overrides the configuration and $UPB_OUTPUT_DIR).
    #[arg(long, short, global = true)]
    pub output: Option<PathBuf>,
    /// Override a configuration field, e.g. `--set space.n1_levels=5`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    #[arg(long, global = true, value_enum)]
    pub units: Option<Units>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Optimal coupling and detuning for a given Kerr energy.
    Optimal {
        /// U/ħκ.
        #[arg(long, allow_negative_numbers = true)]
        u: f64,
    },
    /// Steady state versus cw drive amplitude.
    Sweep,
    /// Steady-state delay correlation g²(τ).
    G2tau,
    /// Deterministic pulsed protocol: n₁(t), g²(t,t) and filtered g²(ΔT).
    Pulsed,
    /// Monte Carlo wave-function campaign.
    Traj(TrajArgs),
    /// Sliding-window statistics of an existing jump log.
    FilterScan(FilterScanArgs),
    /// Kerr energy of a mode-profile file.
    EstimateU(EstimateArgs),
    /// Write an analytic test profile.
    Profile(ProfileArgs),
}

#[derive(Debug, Args)]
pub struct TrajArgs {
    #[arg(long)]
    pub n_traj: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads (0 = all cores). Results do not depend on it.
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
}

#[derive(Debug, Args)]
pub struct FilterScanArgs {
    /// Jump log written by `upb traj`.
    #[arg(long)]
    pub records: PathBuf,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[arg(long)]
    pub profile: PathBuf,
    /// ħω of the mode in eV.
    #[arg(long, default_value_t = 0.825)]
    pub photon_energy: f64,
    /// Tensor-collapse factor D.
    #[arg(long, default_value_t = 24.0)]
    pub d_factor: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProfileKind {
    Box,
    L3,
}

#[derive(Debug, Args)]
pub struct ProfileArgs {
    #[arg(value_enum)]
    pub kind: ProfileKind,
    #[arg(long)]
    pub out: PathBuf,
    /// Grid points per lattice constant (l3) or per axis (box).
    #[arg(long, default_value_t = 8)]
    pub resolution: usize,
}

/// Resolved configuration written next to the outputs.
#[derive(Debug, Serialize)]
struct Snapshot<'a> {
    upb_version: &'a str,
    command: &'a str,
    config: &'a RunConfig,
}

/// Parses the arguments and runs; returns the exit code.
pub fn main_with_args<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            if code == 0 {
                let _ = write!(out, "{e}");
            } else {
                let msg = e.to_string();
                let first = msg.lines().next().unwrap_or("").trim_start_matches("error: ");
                let _ = writeln!(err, "error kind=usage message={first:?}");
            }
            return code;
        }
    };
    match run(&cli, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error kind={} message={:?}", e.kind(), e.to_string());
            1
        }
    }
}

/// Loads the configuration and applies command-line overrides.
pub fn load_config(cli: &Cli) -> Result<RunConfig> {
    let text = match &cli.config {
        Some(p) => std::fs::read_to_string(p)?,
        None => String::new(),
    };
    let mut cfg = RunConfig::from_toml(&text, &cli.overrides)?;
    if let Some(u) = cli.units {
        cfg.units = u;
    }
    if let Some(o) = &cli.output {
        cfg.output_dir = Some(o.clone());
    }
    Ok(cfg)
}

pub fn run(cli: &Cli, out: &mut dyn Write) -> Result<()> {
    match &cli.command {
        Command::Optimal { u } => {
            let (j, delta) = device::optimal_conditions(*u)?;
            writeln!(out, "j_opt={j:.6} delta_opt={delta:.6}")?;
            Ok(())
        }
        Command::Profile(a) => write_profile(a, out),
        Command::EstimateU(a) => estimate_u(a, out),
        Command::Sweep => with_output(cli, "sweep", out, cmd_sweep),
        Command::G2tau => with_output(cli, "g2tau", out, cmd_g2tau),
        Command::Pulsed => with_output(cli, "pulsed", out, cmd_pulsed),
        Command::Traj(a) => {
            let mut cfg = load_config(cli)?;
            if let Some(n) = a.n_traj {
                cfg.ensemble.n_traj = n;
            }
            if let Some(s) = a.seed {
                cfg.ensemble.master_seed = s;
            }
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(a.threads)
                .build()
                .map_err(|e| UpbError::Config(e.to_string()))?;
            let mut buf = Vec::new();
            let res = pool.install(|| run_in_dir(&cfg, "traj", &mut buf, cmd_traj));
            out.write_all(&buf)?;
            res
        }
        Command::FilterScan(a) => {
            let cfg = load_config(cli)?;
            run_in_dir(&cfg, "filter-scan", out, |c, dir, o| cmd_filter_scan(c, &a.records, dir, o))
        }
    }
}

fn with_output(
    cli: &Cli,
    name: &str,
    out: &mut dyn Write,
    f: fn(&RunConfig, &Path, &mut dyn Write) -> Result<()>,
) -> Result<()> {
    let cfg = load_config(cli)?;
    run_in_dir(&cfg, name, out, f)
}

fn run_in_dir<F>(cfg: &RunConfig, name: &str, out: &mut dyn Write, f: F) -> Result<()>
where
    F: FnOnce(&RunConfig, &Path, &mut dyn Write) -> Result<()>,
{
    let dir = cfg.resolve_output_dir();
    std::fs::create_dir_all(&dir)?;
    let mut resolved = cfg.clone();
    resolved.output_dir = Some(dir.clone());
    let snap = Snapshot { upb_version: VERSION, command: name, config: &resolved };
    let text = toml::to_string(&snap).map_err(|e| UpbError::Config(e.to_string()))?;
    std::fs::write(dir.join("config.resolved.toml"), text)?;
    f(cfg, &dir, out)?;
    writeln!(out, "wrote {}", dir.display())?;
    Ok(())
}

fn csv_writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    Ok(csv::Writer::from_path(path)?)
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![a],
        _ => (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect(),
    }
}

fn cmd_sweep(cfg: &RunConfig, dir: &Path, _out: &mut dyn Write) -> Result<()> {
    let params = cfg.system_params()?;
    let k = cfg.to_kappa_units()?;
    let space = cfg.hilbert_space()?;
    let scale = cfg.physical_scale()?;
    let s = k.sweep;
    let f_values = match s.spacing {
        Spacing::Linear => linspace(s.f_min, s.f_max, s.points),
        Spacing::Log => delta_t_grid(s.f_min, s.f_max, s.points)?,
    };
    let rows = sweep_drive(&params.with_drive(PulseShape::Constant { amplitude: 0.0 }), space, &f_values);
    let mut w = csv_writer(&dir.join("sweep.csv"))?;
    w.write_record(["f", "f_uev", "input_power_w", "n1", "n2", "g2_zero", "emission_rate_hz", "error"])?;
    for r in rows {
        let f = r.f.to_string();
        let f_uev = scale.energy_uev(r.f).to_string();
        let power = device::input_power(r.f, &scale).to_string();
        match r.outcome {
            Ok(p) => w.write_record([
                f,
                f_uev,
                power,
                p.n1.to_string(),
                p.n2.to_string(),
                p.g2_zero.to_string(),
                device::emission_rate(p.n1, &scale).to_string(),
                String::new(),
            ])?,
            Err(e) => w.write_record([f, f_uev, power, String::new(), String::new(), String::new(), String::new(), e])?,
        }
    }
    w.flush()?;
    Ok(())
}

fn cmd_g2tau(cfg: &RunConfig, dir: &Path, _out: &mut dyn Write) -> Result<()> {
    let params = cfg.system_params()?;
    let k = cfg.to_kappa_units()?;
    let scale = cfg.physical_scale()?;
    let grid = linspace(0.0, k.g2tau.tau_max, k.g2tau.points);
    let res = g2_tau_cw(&params, cfg.hilbert_space()?, &grid, cfg.solver)?;
    let mut w = csv_writer(&dir.join("g2tau.csv"))?;
    w.write_record(["tau", "tau_ps", "g2"])?;
    for (t, g) in res.grid.iter().zip(&res.values) {
        w.write_record([t.to_string(), (scale.time_units_to_seconds(*t) * 1e12).to_string(), g.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Summary of the deterministic pulsed run.
#[derive(Debug, Serialize)]
struct PulsedSummary {
    n1_peak: f64,
    t_peak: f64,
    g2_minimum_time: f64,
    window: FilterWindow,
    crossing_half: Option<f64>,
    crossing_half_ps: Option<f64>,
    crossing_one: Option<f64>,
    crossing_one_ps: Option<f64>,
}

fn pulse_end(params: &SystemParams) -> Result<f64> {
    match params.drive {
        PulseShape::GaussianTrain { sigma_t, t0, .. } => Ok(t0 + 4.0 * sigma_t),
        PulseShape::Constant { .. } => Err(UpbError::Config("this subcommand needs a gaussian-train drive".into())),
    }
}

fn cmd_pulsed(cfg: &RunConfig, dir: &Path, out: &mut dyn Write) -> Result<()> {
    let params = cfg.system_params()?;
    let k = cfg.to_kappa_units()?;
    let space = cfg.hilbert_space()?;
    let scale = cfg.physical_scale()?;
    let ps = |t: f64| scale.time_units_to_seconds(t) * 1e12;
    let t_end = match k.pulsed.t_end {
        Some(t) => t,
        None => pulse_end(&params)?,
    };
    let grid = linspace(0.0, t_end, k.pulsed.grid_points.max(3));
    let prof = pulse_profile(&params, space, cfg.frame, &grid, cfg.solver, false)?;
    let mut w = csv_writer(&dir.join("profile.csv"))?;
    w.write_record(["t", "t_ns", "drive", "n1", "n2", "g2_equal_time"])?;
    for i in 0..prof.times.len() {
        let t = prof.times[i];
        w.write_record([
            t.to_string(),
            (ps(t) * 1e-3).to_string(),
            params.drive.amplitude_at(t).to_string(),
            prof.n1[i].to_string(),
            prof.n2[i].to_string(),
            prof.g2_equal_time[i].to_string(),
        ])?;
    }
    w.flush()?;
    let peak = prof.peak_index().ok_or_else(|| UpbError::Config("empty time grid".into()))?;
    let center = equal_time_minimum(&prof, 0.05)
        .ok_or_else(|| UpbError::FilterWindow("no interior minimum of g2(t,t)".into()))?;
    let widths = linspace(k.pulsed.width_min, k.pulsed.width_max, k.pulsed.width_points);
    let scan = filtered_g2_scan(&params, space, cfg.frame, 0.0, center, &widths, k.pulsed.intervals, cfg.solver)?;
    let mut w = csv_writer(&dir.join("filtered_centered.csv"))?;
    w.write_record(["width", "width_ps", "g2", "refinement_change"])?;
    for p in &scan {
        w.write_record([p.width.to_string(), ps(p.width).to_string(), p.g2.to_string(), p.refinement_change.to_string()])?;
    }
    w.flush()?;
    let window = FilterWindow::centered(center, k.pulsed.window_width, CenterRule::G2Minimum)?;
    let dts = delta_t_grid(k.filter.delta_t_min, window.width(), k.pulsed.delta_t_points)?;
    let mut w = csv_writer(&dir.join("filtered_tiled.csv"))?;
    w.write_record(["delta_t", "delta_t_ps", "g2", "refinement_change"])?;
    for dt in dts {
        let r = tiled_filtered_g2(&params, space, cfg.frame, 0.0, (window.t1, window.t2), dt, k.pulsed.max_step, cfg.solver)?;
        w.write_record([dt.to_string(), ps(dt).to_string(), r.value.to_string(), r.refinement_change.to_string()])?;
    }
    w.flush()?;
    let x: Vec<f64> = scan.iter().map(|p| p.width).collect();
    let y: Vec<f64> = scan.iter().map(|p| p.g2).collect();
    let half = upward_crossing(&x, &y, 0.5);
    let one = upward_crossing(&x, &y, 1.0);
    let summary = PulsedSummary {
        n1_peak: prof.n1[peak],
        t_peak: prof.times[peak],
        g2_minimum_time: center,
        window,
        crossing_half: half,
        crossing_half_ps: half.map(ps),
        crossing_one: one,
        crossing_one_ps: one.map(ps),
    };
    write_json(&dir.join("summary.json"), &summary)?;
    writeln!(
        out,
        "n1_peak={:.6} t_peak={:.4} g2_min_time={:.4} crossing_half_ps={} crossing_one_ps={}",
        summary.n1_peak,
        summary.t_peak,
        center,
        fmt_opt(summary.crossing_half_ps),
        fmt_opt(summary.crossing_one_ps)
    )?;
    Ok(())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "none".to_string(), |x| format!("{x:.2}"))
}

fn write_json<T: Serialize>(path: &Path, v: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(v).map_err(|e| UpbError::Config(e.to_string()))?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

/// Trajectory settings derived from a run configuration.
pub fn trajectory_config(cfg: &RunConfig) -> Result<TrajectoryConfig> {
    let params = cfg.system_params()?;
    let k = cfg.to_kappa_units()?;
    let horizon = match (k.ensemble.horizon, params.drive) {
        (Some(h), _) => h,
        (None, PulseShape::Constant { .. }) => 10.0,
        (None, _) => pulse_end(&params)?,
    };
    let mut tc = TrajectoryConfig::new(cfg.hilbert_space()?, horizon);
    tc.frame = cfg.frame;
    tc.channel2 = k.ensemble.channel2;
    tc.jump_tolerance = k.ensemble.jump_tolerance;
    tc.tolerances = k.ensemble.tolerances;
    tc.sample_times = match k.ensemble.samples {
        0 => vec![],
        1 => vec![horizon],
        n => linspace(0.0, horizon, n),
    };
    Ok(tc)
}

fn cmd_traj(cfg: &RunConfig, dir: &Path, out: &mut dyn Write) -> Result<()> {
    let params = cfg.system_params()?;
    let tc = trajectory_config(cfg)?;
    let ens = run_ensemble(&params, &tc, cfg.ensemble.n_traj, cfg.ensemble.master_seed)?;
    let meta = CampaignMetadata {
        code_version: VERSION.to_string(),
        master_seed: cfg.ensemble.master_seed,
        n_requested: cfg.ensemble.n_traj,
        n_trajectories: ens.n_trajectories,
        failures: ens.failures.clone(),
        params,
        config: tc,
    };
    write_jump_log(&dir.join("events.csv"), &ens, &meta)?;
    let mut w = csv_writer(&dir.join("observables.csv"))?;
    w.write_record(["t", "n1_mean", "n1_stderr", "n2_mean", "n2_stderr"])?;
    let se1 = ens.standard_error(Cavity::One);
    let se2 = ens.standard_error(Cavity::Two);
    for i in 0..ens.grid.len() {
        w.write_record([
            ens.grid[i].to_string(),
            ens.n1_mean[i].to_string(),
            se1[i].to_string(),
            ens.n2_mean[i].to_string(),
            se2[i].to_string(),
        ])?;
    }
    w.flush()?;
    let c1: usize = ens.records.iter().map(|r| r.channel1_times().count()).sum();
    writeln!(
        out,
        "trajectories={} failures={} channel1_events={}",
        ens.n_trajectories,
        ens.failures.len(),
        c1
    )?;
    for f in &ens.failures {
        writeln!(out, "failed trajectory_id={} reason={:?}", f.trajectory_id, f.reason)?;
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct FilterSummary {
    window: FilterWindow,
    short_window: FilterWindow,
    n_trajectories: usize,
    single_photon_yield_hz: f64,
}

fn cmd_filter_scan(cfg: &RunConfig, records: &Path, dir: &Path, out: &mut dyn Write) -> Result<()> {
    let (ens, meta) = read_jump_log(records)?;
    if ens.n_trajectories == 0 {
        return Err(UpbError::Config(format!("{} holds no trajectories", records.display())));
    }
    let k = cfg.to_kappa_units()?;
    let scale = cfg.physical_scale()?;
    let ps = |t: f64| scale.time_units_to_seconds(t) * 1e12;
    let window = match k.filter.window_center {
        Some(c) => FilterWindow::centered(c, k.filter.window_width, CenterRule::Explicit)?,
        None => locate_filter_window(&meta.params, meta.config.space, meta.config.frame, k.filter.window_width, cfg.solver)?,
    };
    let dts = delta_t_grid(k.filter.delta_t_min, window.width(), k.filter.delta_t_points)?;
    let mut w = csv_writer(&dir.join("filter_scan.csv"))?;
    w.write_record(["delta_t", "delta_t_ps", "pair_count", "poisson_expected", "g2", "error", "one_sided"])?;
    for (dt, r) in dts.iter().zip(filter_scan(&ens, &window, &dts)) {
        match r {
            Ok(r) => w.write_record([
                dt.to_string(),
                ps(*dt).to_string(),
                r.pair_count.to_string(),
                r.poisson_expected.to_string(),
                r.g2.to_string(),
                r.error.to_string(),
                r.one_sided.to_string(),
            ])?,
            Err(e) => writeln!(out, "delta_t={dt} skipped: {e}")?,
        }
    }
    w.flush()?;
    let short = FilterWindow::centered(window.center(), k.filter.short_width, CenterRule::G2Minimum)?;
    let period = match meta.params.drive {
        PulseShape::GaussianTrain { period, .. } => period,
        PulseShape::Constant { .. } => meta.config.horizon - meta.config.t_start,
    };
    let kmax = k.filter.histogram_max_separation;
    let seed = k.filter.histogram_seed;
    let full = coincidence_histogram(&ens, period, None, kmax, seed)?;
    let filtered = coincidence_histogram(&ens, period, Some(&short), kmax, seed)?;
    let mut w = csv_writer(&dir.join("histogram.csv"))?;
    w.write_record(["separation", "count_unfiltered", "count_filtered"])?;
    for i in 0..full.separations.len() {
        w.write_record([full.separations[i].to_string(), full.counts[i].to_string(), filtered.counts[i].to_string()])?;
    }
    w.flush()?;
    let summary = FilterSummary {
        window,
        short_window: short,
        n_trajectories: ens.n_trajectories,
        single_photon_yield_hz: single_photon_yield(&ens, &short, k.filter.pulse_rate_hz),
    };
    write_json(&dir.join("filter_summary.json"), &summary)?;
    writeln!(out, "window=[{:.5}, {:.5}] yield_hz={:.6e}", window.t1, window.t2, summary.single_photon_yield_hz)?;
    Ok(())
}

fn estimate_u(a: &EstimateArgs, out: &mut dyn Write) -> Result<()> {
    let grid = device::ModeProfileGrid::load(&a.profile)?;
    let est = device::effective_u(&grid, a.photon_energy, a.d_factor)?;
    writeln!(
        out,
        "u_uev={:.6e} coarse_u_uev={} relative_change={} input_norm={:.6e}",
        est.u_uev,
        est.coarse_u_uev.map_or_else(|| "none".into(), |v| format!("{v:.6e}")),
        est.relative_change.map_or_else(|| "none".into(), |v| format!("{v:.3e}")),
        est.input_norm
    )?;
    Ok(())
}

fn write_profile(a: &ProfileArgs, out: &mut dyn Write) -> Result<()> {
    let grid = match a.kind {
        ProfileKind::Box => {
            let n = a.resolution;
            device::box_profile([n, n, n], [1e-6, 1e-6, 0.5e-6], 3.48 * 3.48, 0.9e-18)?
        }
        ProfileKind::L3 => device::l3_profile(&device::L3Params::default(), a.resolution)?,
    };
    grid.save(&a.out)?;
    writeln!(out, "wrote {} ({}x{}x{})", a.out.display(), grid.shape[0], grid.shape[1], grid.shape[2])?;
    Ok(())
}
