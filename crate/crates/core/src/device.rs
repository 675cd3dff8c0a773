//! Device-level quantities: optimal blockade parameters, the Kerr energy of a
//! discretized cavity mode, and conversion of model outputs to SI units.

use std::io::{BufRead, Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Result, UpbError};

/// Reduced Planck constant in eV·s.
pub const HBAR_EV_S: f64 = 6.582_119_569e-16;
/// Elementary charge (J per eV).
pub const EV_J: f64 = 1.602_176_634e-19;
/// Vacuum permittivity in F/m.
pub const EPSILON_0: f64 = 8.854_187_8128e-12;

/// Optimal tunnel coupling and detuning (κ units) for a given Kerr energy.
///
/// `J_opt = √(2/(3√3) · ħκ/U)`, `Δ_opt = −κ/(2√3)`.
pub fn optimal_conditions(u_over_hbar_kappa: f64) -> Result<(f64, f64)> {
    if !(u_over_hbar_kappa > 0.0) || !u_over_hbar_kappa.is_finite() {
        return Err(UpbError::InvalidParameter(format!(
            "Kerr energy must be positive, got {u_over_hbar_kappa}"
        )));
    }
    let j = (2.0 / (3.0 * 3f64.sqrt()) / u_over_hbar_kappa).sqrt();
    let delta = -1.0 / (2.0 * 3f64.sqrt());
    Ok((j, delta))
}

/// Energy scale that maps the dimensionless model onto a device.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalScale {
    /// ħκ in μeV.
    pub hbar_kappa_uev: f64,
    /// ħω_c in eV.
    pub photon_energy_ev: f64,
}

impl PhysicalScale {
    pub fn new(hbar_kappa_uev: f64, photon_energy_ev: f64) -> Result<Self> {
        let ok = |x: f64| x.is_finite() && x > 0.0;
        if !ok(hbar_kappa_uev) || !ok(photon_energy_ev) {
            return Err(UpbError::InvalidParameter(format!(
                "physical scale must be positive (hbar_kappa = {hbar_kappa_uev} ueV, photon energy = {photon_energy_ev} eV)"
            )));
        }
        Ok(Self { hbar_kappa_uev, photon_energy_ev })
    }

    /// ħκ = 1 μeV, ħω_c = 0.8 eV.
    pub fn reference() -> Self {
        Self { hbar_kappa_uev: 1.0, photon_energy_ev: 0.8 }
    }

    /// κ in rad/s.
    pub fn kappa_rad_per_s(&self) -> f64 {
        self.hbar_kappa_uev * 1e-6 / HBAR_EV_S
    }

    /// The model time unit 1/κ in seconds.
    pub fn time_unit_s(&self) -> f64 {
        1.0 / self.kappa_rad_per_s()
    }

    pub fn seconds_to_time_units(&self, s: f64) -> f64 {
        s * self.kappa_rad_per_s()
    }

    pub fn time_units_to_seconds(&self, t: f64) -> f64 {
        t * self.time_unit_s()
    }

    /// Energy in μeV of a model energy given in units of ħκ.
    pub fn energy_uev(&self, e_over_hbar_kappa: f64) -> f64 {
        e_over_hbar_kappa * self.hbar_kappa_uev
    }

    /// Model energy (units of ħκ) of an energy in μeV.
    pub fn energy_from_uev(&self, uev: f64) -> f64 {
        uev / self.hbar_kappa_uev
    }

    /// Angular frequency (rad/s) of a model energy in units of ħκ.
    pub fn angular_frequency(&self, e_over_hbar_kappa: f64) -> f64 {
        e_over_hbar_kappa * self.kappa_rad_per_s()
    }

    /// Model energy of an angular frequency in rad/s.
    pub fn from_angular_frequency(&self, omega: f64) -> f64 {
        omega / self.kappa_rad_per_s()
    }
}

impl Default for PhysicalScale {
    fn default() -> Self {
        Self::reference()
    }
}

/// Photon emission rate n₁κ/2π in Hz.
pub fn emission_rate(n1: f64, scale: &PhysicalScale) -> f64 {
    n1 * scale.kappa_rad_per_s() / (2.0 * std::f64::consts::PI)
}

/// Input power ħω_c·(F/ħ)/2π in W for a drive amplitude given in units of ħκ.
pub fn input_power(f_over_hbar_kappa: f64, scale: &PhysicalScale) -> f64 {
    let f_rad_s = scale.angular_frequency(f_over_hbar_kappa);
    scale.photon_energy_ev * EV_J * f_rad_s / (2.0 * std::f64::consts::PI)
}

/// Energy in J stored by `photons` intracavity photons.
pub fn intracavity_energy(photons: f64, scale: &PhysicalScale) -> f64 {
    photons * scale.photon_energy_ev * EV_J
}

/// Cavity mode sampled on a regular Cartesian grid (SI lengths).
///
/// Per-point arrays are stored row-major with `z` fastest:
/// `index = (ix·ny + iy)·nz + iz`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeProfileGrid {
    pub shape: [usize; 3],
    pub spacing: [f64; 3],
    /// Complex field vector per point: `[re_x, re_y, re_z, im_x, im_y, im_z]`.
    pub field: Vec<[f64; 6]>,
    pub epsilon: Vec<f64>,
    pub chi3: Vec<f64>,
}

/// Result of [`effective_u`] with its refinement estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KerrEstimate {
    pub u_uev: f64,
    /// Same quantity on the factor-2 coarsened grid; `None` when some axis
    /// has an odd number of points.
    pub coarse_u_uev: Option<f64>,
    /// |U − U_coarse| / |U|.
    pub relative_change: Option<f64>,
    /// Σ|α|²dV of the input before normalization.
    pub input_norm: f64,
}

impl ModeProfileGrid {
    pub fn new(
        shape: [usize; 3],
        spacing: [f64; 3],
        field: Vec<[f64; 6]>,
        epsilon: Vec<f64>,
        chi3: Vec<f64>,
    ) -> Result<Self> {
        let g = Self { shape, spacing, field, epsilon, chi3 };
        g.validate()?;
        Ok(g)
    }

    pub fn points(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing.iter().product()
    }

    pub fn index(&self, ix: usize, iy: usize, iz: usize) -> usize {
        (ix * self.shape[1] + iy) * self.shape[2] + iz
    }

    pub fn validate(&self) -> Result<()> {
        if self.shape.iter().any(|&n| n == 0) {
            return Err(UpbError::InvalidParameter(format!("grid shape {:?} has an empty axis", self.shape)));
        }
        if self.spacing.iter().any(|&h| !(h > 0.0 && h.is_finite())) {
            return Err(UpbError::InvalidParameter(format!("grid spacing {:?} must be positive", self.spacing)));
        }
        let n = self.points();
        if self.field.len() != n || self.epsilon.len() != n || self.chi3.len() != n {
            return Err(UpbError::InvalidParameter(format!(
                "grid arrays do not match shape {:?} ({} points)",
                self.shape, n
            )));
        }
        if let Some(e) = self.epsilon.iter().find(|e| !(**e >= 1.0)) {
            return Err(UpbError::InvalidParameter(format!("relative permittivity {e} below 1")));
        }
        if self.chi3.iter().chain(self.field.iter().flatten()).any(|x| !x.is_finite()) {
            return Err(UpbError::InvalidParameter("non-finite field or chi3 value".into()));
        }
        Ok(())
    }

    /// Σ|α|²·dV.
    pub fn norm(&self) -> f64 {
        self.field.iter().map(|f| f.iter().map(|x| x * x).sum::<f64>()).sum::<f64>() * self.cell_volume()
    }

    /// Rescales the field so that Σ|α|²·dV = 1.
    pub fn normalize(&mut self) -> Result<()> {
        let n = self.norm();
        if !(n > 0.0) {
            return Err(UpbError::InvalidParameter("mode profile field is identically zero".into()));
        }
        let s = 1.0 / n.sqrt();
        self.field.iter_mut().flatten().for_each(|x| *x *= s);
        Ok(())
    }

    /// Grid with doubled spacing whose cells average 2×2×2 blocks of the
    /// original. `None` unless every axis has an even number of points.
    pub fn coarsened(&self) -> Option<Self> {
        if self.shape.iter().any(|&n| n < 2 || n % 2 == 1) {
            return None;
        }
        let shape = self.shape.map(|n| n / 2);
        let m: usize = shape.iter().product();
        let mut out = Self {
            shape,
            spacing: self.spacing.map(|h| 2.0 * h),
            field: Vec::with_capacity(m),
            epsilon: Vec::with_capacity(m),
            chi3: Vec::with_capacity(m),
        };
        for cx in 0..shape[0] {
            for cy in 0..shape[1] {
                for cz in 0..shape[2] {
                    let mut f = [0.0; 6];
                    let (mut e, mut c) = (0.0, 0.0);
                    for (dx, dy, dz) in (0..8).map(|b| (b >> 2, (b >> 1) & 1, b & 1)) {
                        let k = self.index(2 * cx + dx, 2 * cy + dy, 2 * cz + dz);
                        for (acc, x) in f.iter_mut().zip(&self.field[k]) {
                            *acc += x / 8.0;
                        }
                        e += self.epsilon[k] / 8.0;
                        c += self.chi3[k] / 8.0;
                    }
                    out.field.push(f);
                    out.epsilon.push(e);
                    out.chi3.push(c);
                }
            }
        }
        Some(out)
    }

    /// Σ χ³/ε² |α|⁴ dV / (Σ|α|² dV)², in m⁻³/(V²/m²).
    fn kerr_integral(&self) -> f64 {
        let norm = self.norm();
        let dv = self.cell_volume();
        let s: f64 = self
            .field
            .iter()
            .zip(&self.epsilon)
            .zip(&self.chi3)
            .map(|((f, e), c)| {
                let a2: f64 = f.iter().map(|x| x * x).sum();
                c / (e * e) * a2 * a2
            })
            .sum();
        s * dv / (norm * norm)
    }

    /// Writes the binary profile format.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{MAGIC}")?;
        writeln!(w, "shape {} {} {}", self.shape[0], self.shape[1], self.shape[2])?;
        writeln!(w, "spacing {:e} {:e} {:e}", self.spacing[0], self.spacing[1], self.spacing[2])?;
        writeln!(w, "fields {FIELD_BLOCKS}")?;
        writeln!(w, "end")?;
        for c in 0..6 {
            for f in &self.field {
                w.write_all(&f[c].to_le_bytes())?;
            }
        }
        for block in [&self.epsilon, &self.chi3] {
            for x in block {
                w.write_all(&x.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        let f = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(f);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    /// Reads the binary profile format. Errors carry the byte offset.
    pub fn read_from<R: Read>(r: R) -> Result<Self> {
        let mut r = std::io::BufReader::new(r);
        let mut offset = 0u64;
        let mut line = String::new();
        let mut next_line = |r: &mut std::io::BufReader<R>, offset: &mut u64| -> Result<(u64, String)> {
            line.clear();
            let start = *offset;
            let n = r.read_line(&mut line).map_err(|e| parse_err(start, e.to_string()))?;
            if n == 0 {
                return Err(parse_err(start, "unexpected end of header".into()));
            }
            *offset += n as u64;
            Ok((start, line.trim_end().to_string()))
        };

        let (at, magic) = next_line(&mut r, &mut offset)?;
        if magic != MAGIC {
            return Err(parse_err(at, format!("bad magic {magic:?}, expected {MAGIC:?}")));
        }
        let (at, s) = next_line(&mut r, &mut offset)?;
        let shape: [usize; 3] = header_values(at, &s, "shape")?;
        let (at, s) = next_line(&mut r, &mut offset)?;
        let spacing: [f64; 3] = header_values(at, &s, "spacing")?;
        let (at, s) = next_line(&mut r, &mut offset)?;
        let [fields]: [usize; 1] = header_values(at, &s, "fields")?;
        if fields != FIELD_BLOCKS {
            return Err(parse_err(at, format!("expected {FIELD_BLOCKS} data blocks, header says {fields}")));
        }
        let (at, s) = next_line(&mut r, &mut offset)?;
        if s != "end" {
            return Err(parse_err(at, format!("expected end of header, found {s:?}")));
        }
        if shape.iter().any(|&n| n == 0) {
            return Err(parse_err(at, format!("grid shape {shape:?} has an empty axis")));
        }
        let n = shape
            .iter()
            .try_fold(1usize, |acc, &x| acc.checked_mul(x))
            .filter(|n| n.checked_mul(8 * FIELD_BLOCKS).is_some())
            .ok_or_else(|| parse_err(at, "grid too large".into()))?;

        let mut read_block = |offset: &mut u64| -> Result<Vec<f64>> {
            let mut bytes = Vec::new();
            let want = (n * 8) as u64;
            let got = (&mut r).take(want).read_to_end(&mut bytes).map_err(|e| parse_err(*offset, e.to_string()))?;
            if (got as u64) < want {
                return Err(parse_err(
                    *offset + got as u64,
                    format!("truncated data block: expected {want} bytes, found {got}"),
                ));
            }
            *offset += want;
            Ok(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect())
        };
        let mut field = vec![[0.0; 6]; n];
        for c in 0..6 {
            let block = read_block(&mut offset)?;
            for (f, x) in field.iter_mut().zip(block) {
                f[c] = x;
            }
        }
        let epsilon = read_block(&mut offset)?;
        let chi3 = read_block(&mut offset)?;
        let mut rest = [0u8; 1];
        if r.read(&mut rest).map_err(|e| parse_err(offset, e.to_string()))? != 0 {
            return Err(parse_err(offset, "trailing bytes after data blocks".into()));
        }
        Self::new(shape, spacing, field, epsilon, chi3).map_err(|e| parse_err(offset, e.to_string()))
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::read_from(std::fs::File::open(path)?)
    }
}

const MAGIC: &str = "UPB-MODE-PROFILE 1";
const FIELD_BLOCKS: usize = 8;

fn parse_err(offset: u64, message: String) -> UpbError {
    UpbError::Parse { offset, message }
}

fn header_values<T: std::str::FromStr, const N: usize>(at: u64, line: &str, key: &str) -> Result<[T; N]> {
    let mut parts = line.split_whitespace();
    if parts.next() != Some(key) {
        return Err(parse_err(at, format!("expected `{key}` line, found {line:?}")));
    }
    let vals: Vec<T> = parts
        .map(|p| p.parse::<T>().map_err(|_| parse_err(at, format!("bad `{key}` value {p:?}"))))
        .collect::<Result<_>>()?;
    vals.try_into()
        .map_err(|v: Vec<T>| parse_err(at, format!("`{key}` needs {N} values, found {}", v.len())))
}

/// Kerr interaction energy U = D(ħω)²/(8ε₀) Σ[χ³/ε²]|α|⁴dV in μeV, with the
/// field normalized to Σ|α|²dV = 1 and a factor-2 coarsening estimate.
pub fn effective_u(grid: &ModeProfileGrid, photon_energy_ev: f64, d_factor: f64) -> Result<KerrEstimate> {
    grid.validate()?;
    if !(photon_energy_ev > 0.0) || !d_factor.is_finite() {
        return Err(UpbError::InvalidParameter("photon energy must be positive and D finite".into()));
    }
    let input_norm = grid.norm();
    if !(input_norm > 0.0) {
        return Err(UpbError::InvalidParameter("mode profile field is identically zero".into()));
    }
    let prefactor = d_factor * (photon_energy_ev * EV_J).powi(2) / (8.0 * EPSILON_0) / (EV_J * 1e-6);
    let u_uev = prefactor * grid.kerr_integral();
    let coarse_u_uev = grid.coarsened().filter(|c| c.norm() > 0.0).map(|c| prefactor * c.kerr_integral());
    let relative_change = coarse_u_uev.map(|c| if u_uev == 0.0 { 0.0 } else { ((u_uev - c) / u_uev).abs() });
    Ok(KerrEstimate { u_uev, coarse_u_uev, relative_change, input_norm })
}

/// Closed form for a uniform field filling a box of volume `volume_m3`.
pub fn uniform_box_u(photon_energy_ev: f64, d_factor: f64, chi3: f64, epsilon: f64, volume_m3: f64) -> f64 {
    d_factor * (photon_energy_ev * EV_J).powi(2) * chi3 / (8.0 * EPSILON_0 * epsilon * epsilon * volume_m3)
        / (EV_J * 1e-6)
}

/// Uniform, x-polarized field filling the whole grid.
pub fn box_profile(shape: [usize; 3], size_m: [f64; 3], epsilon: f64, chi3: f64) -> Result<ModeProfileGrid> {
    if shape.iter().any(|&n| n == 0) {
        return Err(UpbError::InvalidParameter("box profile needs a non-empty grid".into()));
    }
    let spacing = [0, 1, 2].map(|k| size_m[k] / shape[k] as f64);
    let n: usize = shape.iter().product();
    ModeProfileGrid::new(shape, spacing, vec![[1.0, 0.0, 0.0, 0.0, 0.0, 0.0]; n], vec![epsilon; n], vec![chi3; n])
}

/// Parameters of the synthetic L3-like photonic-crystal mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct L3Params {
    /// Lattice constant (m).
    pub lattice: f64,
    /// Hole radius over lattice constant.
    pub radius_ratio: f64,
    /// Slab thickness (m).
    pub thickness: f64,
    /// Slab relative permittivity.
    pub epsilon: f64,
    /// Slab χ³ (m²/V²).
    pub chi3: f64,
    /// Envelope widths (m) along the cavity axis, in plane, out of plane.
    pub sigma: [f64; 3],
    /// Simulation box (m).
    pub size: [f64; 3],
}

impl Default for L3Params {
    /// Silicon membrane (n ≈ 3.48, t = 220 nm, a = 420 nm, r = 0.25a) near
    /// 1.5 μm, with χ³ = 0.9×10⁻¹⁸ m²/V².
    fn default() -> Self {
        Self {
            lattice: 420e-9,
            radius_ratio: 0.25,
            thickness: 220e-9,
            epsilon: 3.48 * 3.48,
            chi3: 0.9e-18,
            sigma: [0.55e-6, 0.30e-6, 0.11e-6],
            size: [4.0e-6, 2.4e-6, 1.0e-6],
        }
    }
}

/// Synthetic L3-like mode: a y-polarized Gaussian envelope modulated at the
/// band-edge wavevector π/a along the cavity axis, inside a slab perforated
/// by a triangular lattice of air holes with three holes omitted at the
/// center. `points_per_lattice` sets the in-plane resolution; every axis
/// gets an even number of points so that the refinement estimate exists.
pub fn l3_profile(params: &L3Params, points_per_lattice: usize) -> Result<ModeProfileGrid> {
    if points_per_lattice < 2 {
        return Err(UpbError::InvalidParameter("need at least 2 points per lattice constant".into()));
    }
    let a = params.lattice;
    let h = a / points_per_lattice as f64;
    let shape = params.size.map(|s| 2 * ((s / (2.0 * h)).round() as usize).max(1));
    let spacing = [0, 1, 2].map(|k| params.size[k] / shape[k] as f64);
    let radius = params.radius_ratio * a;
    let row = a * 3f64.sqrt() / 2.0;
    let in_hole = |x: f64, y: f64| {
        let j = (y / row).round();
        let offset = if (j as i64).rem_euclid(2) == 1 { 0.5 * a } else { 0.0 };
        let i = ((x - offset) / a).round();
        // the three removed holes of the L3 defect
        if j == 0.0 && i.abs() <= 1.0 {
            return false;
        }
        let (dx, dy) = (x - (i * a + offset), y - j * row);
        dx * dx + dy * dy < radius * radius
    };
    let n: usize = shape.iter().product();
    let mut field = Vec::with_capacity(n);
    let mut epsilon = Vec::with_capacity(n);
    let mut chi3 = Vec::with_capacity(n);
    let centre = |k: usize, i: usize| (i as f64 + 0.5) * spacing[k] - 0.5 * params.size[k];
    for ix in 0..shape[0] {
        let x = centre(0, ix);
        for iy in 0..shape[1] {
            let y = centre(1, iy);
            for iz in 0..shape[2] {
                let z = centre(2, iz);
                let material = z.abs() <= 0.5 * params.thickness && !in_hole(x, y);
                let env = (-(x * x) / (2.0 * params.sigma[0].powi(2))
                    - (y * y) / (2.0 * params.sigma[1].powi(2))
                    - (z * z) / (2.0 * params.sigma[2].powi(2)))
                .exp();
                let amp = env * (std::f64::consts::PI * x / a).cos();
                field.push([0.0, amp, 0.0, 0.0, 0.0, 0.0]);
                epsilon.push(if material { params.epsilon } else { 1.0 });
                chi3.push(if material { params.chi3 } else { 0.0 });
            }
        }
    }
    ModeProfileGrid::new(shape, spacing, field, epsilon, chi3)
}
