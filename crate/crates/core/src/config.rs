//! Simulation configuration: baseline parameter set, TOML loading with
//! per-key defaults, validation, and physical-constant derivations.
//!
//! Internal units are micrometers and microseconds throughout; config keys
//! carry their unit in the name and are converted on load.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_4, PI};

use serde::{Deserialize, Serialize};

use crate::chain::{EncoderConfig, ReceiverChainConfig};
use crate::error::ConfigError;
use crate::geometry::{CylindricalPosition, OutletPolicy, VesselGeometry};

/// Boltzmann constant, J/K.
pub const BOLTZMANN_J_PER_K: f64 = 1.380_649e-23;

/// Stokes-Einstein diffusion coefficient for a sphere of radius `radius_um`
/// in a fluid of viscosity `viscosity_pa_s` at `temperature_k`, returned in
/// um^2/us.
pub fn stokes_einstein_diffusivity(radius_um: f64, temperature_k: f64, viscosity_pa_s: f64) -> f64 {
    assert!(radius_um > 0.0 && temperature_k > 0.0 && viscosity_pa_s > 0.0);
    let radius_m = radius_um * 1e-6;
    let d_m2_per_s = BOLTZMANN_J_PER_K * temperature_k / (6.0 * PI * viscosity_pa_s * radius_m);
    // 1 m^2/s = 1e12 um^2 / 1e6 us.
    d_m2_per_s * 1e6
}

/// Bulk fluid parameters. Velocity is the cross-sectional mean of the
/// parabolic profile; zero is allowed for diffusion-only studies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FluidCharacteristics {
    pub mean_flow_velocity_um_per_us: f64,
    pub viscosity_pa_s: f64,
    pub temperature_k: f64,
}

/// A mobile cell population (not the information carriers).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeciesSpec {
    pub name: String,
    pub radius_um: f64,
    pub concentration_per_mm3: f64,
    pub receptor_count: u32,
    pub receptor_radius_um: f64,
    pub diffusivity_um2_per_us: f64,
}

/// Information-carrying molecules, released in bursts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CarrierSpec {
    pub radius_um: f64,
    pub diffusivity_um2_per_us: f64,
}

/// The single mobile transmitter cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransmitterSpec {
    /// Release-time position: azimuth, radial offset from the axis, axial
    /// coordinate.
    pub position: CylindricalPosition,
    pub radius_um: f64,
    pub receptor_count: u32,
    pub receptor_radius_um: f64,
    pub diffusivity_um2_per_us: f64,
}

/// Receptor bookkeeping at receiver cells.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "capture", rename_all = "snake_case")]
pub enum CaptureMode {
    /// Receptor occupancy is ignored; every contact sees the full coverage.
    Unlimited,
    /// Each assimilation consumes a receptor, restored `recycle_time_us`
    /// later (never, when absent).
    Finite {
        #[serde(skip_serializing_if = "Option::is_none")]
        recycle_time_us: Option<f64>,
    },
}

/// Wall receiver tiling and receptor parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReceiverLayout {
    pub cell_side_um: f64,
    pub receptor_count: u32,
    pub receptor_radius_um: f64,
    /// Axial band of the wall covered by receiver cells; the rest of the
    /// wall is purely reflective.
    pub band_min_um: f64,
    pub band_max_um: f64,
    pub capture: CaptureMode,
}

/// Fully validated simulation configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub geometry: VesselGeometry,
    pub fluid: FluidCharacteristics,
    pub species: Vec<SpeciesSpec>,
    pub carrier: CarrierSpec,
    pub transmitter: TransmitterSpec,
    pub receiver: ReceiverLayout,
    pub encoder: EncoderConfig,
    pub chain: ReceiverChainConfig,
    pub time_step_us: f64,
    pub duration_us: f64,
    pub seed: u64,
    pub threads: usize,
    pub deterministic: bool,
    pub carrier_carrier_collisions: bool,
    pub poisson_populations: bool,
    /// Carrier capture by receptor-bearing mobile cells (off: mobile cells
    /// only bounce carriers).
    pub mobile_capture: bool,
}

impl Default for SimulationConfig {
    /// The baseline parameter set: a 30 um x 1.35 mm vessel at physiological
    /// cell densities, 5 us stepping, 8 s horizon.
    fn default() -> Self {
        let fluid = FluidCharacteristics {
            mean_flow_velocity_um_per_us: 5e-4, // 0.5 mm/s
            viscosity_pa_s: 1.3e-3,
            temperature_k: 310.0,
        };
        let d = |radius_um: f64| {
            stokes_einstein_diffusivity(radius_um, fluid.temperature_k, fluid.viscosity_pa_s)
        };
        SimulationConfig {
            geometry: VesselGeometry::new(30.0, 1350.0),
            fluid,
            species: vec![
                SpeciesSpec {
                    name: "platelet".into(),
                    radius_um: 1.0,
                    concentration_per_mm3: 2e5,
                    receptor_count: 1000,
                    receptor_radius_um: 0.004,
                    diffusivity_um2_per_us: d(1.0),
                },
                SpeciesSpec {
                    name: "wbc".into(),
                    radius_um: 5.0,
                    concentration_per_mm3: 4e3,
                    receptor_count: 2000,
                    receptor_radius_um: 0.004,
                    diffusivity_um2_per_us: d(5.0),
                },
                SpeciesSpec {
                    name: "rbc".into(),
                    radius_um: 3.5,
                    concentration_per_mm3: 4e6,
                    receptor_count: 0,
                    receptor_radius_um: 0.0,
                    diffusivity_um2_per_us: d(3.5),
                },
            ],
            carrier: CarrierSpec { radius_um: 0.00175, diffusivity_um2_per_us: d(0.00175) },
            transmitter: TransmitterSpec {
                position: CylindricalPosition::new(FRAC_PI_4, 27.125, 400.0),
                radius_um: 1.0,
                receptor_count: 1000,
                receptor_radius_um: 0.004,
                diffusivity_um2_per_us: d(1.0),
            },
            receiver: ReceiverLayout {
                cell_side_um: 15.0,
                receptor_count: 1000,
                receptor_radius_um: 0.004,
                band_min_um: 0.0,
                band_max_um: 1350.0,
                capture: CaptureMode::Unlimited,
            },
            encoder: EncoderConfig {
                burst_size: 3000,
                frame_bits: 1,
                pulse_period_us: 34.0 * 750.0,
            },
            chain: ReceiverChainConfig {
                window_us: 750.0,
                delay_lines: 33,
                threshold: 2,
                frame_bits: 1,
            },
            time_step_us: 5.0,
            duration_us: 8e6,
            seed: 1,
            threads: 0,
            deterministic: true,
            carrier_carrier_collisions: false,
            poisson_populations: false,
            mobile_capture: false,
        }
    }
}

impl SimulationConfig {
    /// Reduced profile that exercises the same code paths on a workstation:
    /// red-cell concentration divided by ten, 2 s horizon.
    pub fn desk_scale() -> Self {
        let mut cfg = SimulationConfig::default();
        for s in &mut cfg.species {
            if s.name == "rbc" {
                s.concentration_per_mm3 /= 10.0;
            }
        }
        cfg.duration_us = 2e6;
        cfg
    }

    /// Expected population size for a species at the configured geometry.
    pub fn population_count(&self, species: &SpeciesSpec) -> u64 {
        let volume_mm3 = self.geometry.volume_um3() * 1e-9;
        (species.concentration_per_mm3 * volume_mm3).round() as u64
    }

    pub fn steps(&self) -> u64 {
        (self.duration_us / self.time_step_us).round() as u64
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let g = &self.geometry;
        if !(g.radius_um > 0.0) || !(g.length_um > 0.0) {
            return Err(ConfigError::invalid("vessel radius and length must be positive"));
        }
        if !(self.fluid.viscosity_pa_s > 0.0) || !(self.fluid.temperature_k > 0.0) {
            return Err(ConfigError::invalid("viscosity and temperature must be positive"));
        }
        if !(self.fluid.mean_flow_velocity_um_per_us >= 0.0) {
            return Err(ConfigError::invalid("mean flow velocity must be non-negative"));
        }
        if !(self.time_step_us > 0.0) {
            return Err(ConfigError::invalid("time step must be positive"));
        }
        if self.duration_us < self.time_step_us {
            return Err(ConfigError::invalid("duration must cover at least one time step"));
        }
        for s in &self.species {
            if !(s.radius_um > 0.0) {
                return Err(ConfigError::invalid(format!("species {}: radius must be positive", s.name)));
            }
            if s.radius_um >= g.radius_um {
                return Err(ConfigError::invalid(format!(
                    "species {}: radius {} um does not fit the vessel",
                    s.name, s.radius_um
                )));
            }
            if !(s.concentration_per_mm3 >= 0.0) {
                return Err(ConfigError::invalid(format!(
                    "species {}: concentration must be non-negative",
                    s.name
                )));
            }
            if !(s.diffusivity_um2_per_us >= 0.0) {
                return Err(ConfigError::invalid(format!(
                    "species {}: diffusivity must be non-negative",
                    s.name
                )));
            }
        }
        if !(self.carrier.radius_um > 0.0) {
            return Err(ConfigError::invalid("carrier radius must be positive"));
        }
        let tx = &self.transmitter;
        if !(tx.radius_um > 0.0) {
            return Err(ConfigError::invalid("transmitter radius must be positive"));
        }
        if tx.position.r < 0.0 || tx.position.r > g.radius_um - tx.radius_um {
            return Err(ConfigError::invalid("transmitter outside vessel"));
        }
        if tx.position.z < 0.0 || tx.position.z > g.length_um {
            return Err(ConfigError::invalid("transmitter outside vessel"));
        }
        let rx = &self.receiver;
        if !(rx.cell_side_um > 0.0) {
            return Err(ConfigError::invalid("receiver cell side must be positive"));
        }
        if rx.cell_side_um > g.circumference() {
            return Err(ConfigError::invalid(format!(
                "receiver cell side {} um exceeds the vessel circumference {:.3} um",
                rx.cell_side_um,
                g.circumference()
            )));
        }
        if rx.band_min_um < 0.0 || rx.band_max_um > g.length_um || rx.band_min_um > rx.band_max_um {
            return Err(ConfigError::invalid("receiver band must lie within the vessel"));
        }
        if let CaptureMode::Finite { recycle_time_us: Some(t) } = rx.capture {
            if !(t > 0.0) {
                return Err(ConfigError::invalid("receptor recycle time must be positive"));
            }
        }
        if self.encoder.frame_bits == 0 {
            return Err(ConfigError::invalid("frame length must be at least one bit"));
        }
        if !(self.encoder.pulse_period_us > 0.0) {
            return Err(ConfigError::invalid("pulse period must be positive"));
        }
        if !(self.chain.window_us > 0.0) {
            return Err(ConfigError::invalid("counter window must be positive"));
        }
        if self.chain.threshold == 0 {
            return Err(ConfigError::invalid("detection threshold must be at least 1"));
        }
        if self.chain.frame_bits != self.encoder.frame_bits {
            return Err(ConfigError::invalid("chain and encoder frame lengths must agree"));
        }
        Ok(())
    }

    /// Serializes the full configuration; `load_config` on the result yields
    /// an equal configuration.
    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(&ConfigDoc::from(self)).expect("config serialization")
    }
}

/// Parses a TOML configuration document. Missing keys and sections fall back
/// to the baseline defaults; an empty document is the baseline configuration.
pub fn load_config(text: &str) -> Result<SimulationConfig, ConfigError> {
    let doc: ConfigDoc = toml::from_str(text)?;
    let cfg = doc.resolve()?;
    cfg.validate()?;
    Ok(cfg)
}

// ---------------------------------------------------------------------------
// Raw document layer: every key optional, units spelled out.

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    vessel: Option<VesselDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    fluid: Option<FluidDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    simulation: Option<SimulationDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    transmitter: Option<TransmitterDoc>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    species: BTreeMap<String, SpeciesDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    carrier: Option<CarrierDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    receiver: Option<ReceiverDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    encoder: Option<EncoderDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    chain: Option<ChainDoc>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct VesselDoc {
    radius_um: Option<f64>,
    length_um: Option<f64>,
    outlet: Option<OutletPolicy>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FluidDoc {
    #[serde(skip_serializing_if = "Option::is_none")]
    mean_flow_velocity_mm_per_s: Option<f64>,
    mean_flow_velocity_um_per_us: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    viscosity_mpa_s: Option<f64>,
    viscosity_pa_s: Option<f64>,
    temperature_k: Option<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SimulationDoc {
    time_step_us: Option<f64>,
    duration_us: Option<f64>,
    seed: Option<u64>,
    threads: Option<usize>,
    deterministic: Option<bool>,
    carrier_carrier_collisions: Option<bool>,
    poisson_populations: Option<bool>,
    mobile_capture: Option<bool>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TransmitterDoc {
    phi_rad: Option<f64>,
    radial_offset_um: Option<f64>,
    axial_position_um: Option<f64>,
    radius_um: Option<f64>,
    receptor_count: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    receptor_radius_nm: Option<f64>,
    receptor_radius_um: Option<f64>,
    diffusivity_um2_per_us: Option<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpeciesDoc {
    radius_um: Option<f64>,
    concentration_per_mm3: Option<f64>,
    receptor_count: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    receptor_radius_nm: Option<f64>,
    receptor_radius_um: Option<f64>,
    diffusivity_um2_per_us: Option<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CarrierDoc {
    #[serde(skip_serializing_if = "Option::is_none")]
    radius_nm: Option<f64>,
    radius_um: Option<f64>,
    diffusivity_um2_per_us: Option<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ReceiverDoc {
    cell_side_um: Option<f64>,
    receptor_count: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    receptor_radius_nm: Option<f64>,
    receptor_radius_um: Option<f64>,
    band_min_um: Option<f64>,
    band_max_um: Option<f64>,
    capture: Option<String>,
    recycle_time_us: Option<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EncoderDoc {
    burst_size: Option<u64>,
    frame_bits: Option<usize>,
    pulse_period_us: Option<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ChainDoc {
    window_us: Option<f64>,
    delay_lines: Option<usize>,
    threshold: Option<u64>,
}

impl ConfigDoc {
    fn resolve(&self) -> Result<SimulationConfig, ConfigError> {
        let mut cfg = SimulationConfig::default();

        if let Some(v) = &self.vessel {
            if let Some(r) = v.radius_um {
                cfg.geometry.radius_um = r;
            }
            if let Some(l) = v.length_um {
                cfg.geometry.length_um = l;
            }
            if let Some(o) = v.outlet {
                cfg.geometry.outlet = o;
            }
        }
        if let Some(f) = &self.fluid {
            // Internal-unit spellings (as written by config snapshots) win
            // over the table-style units, so round-trips are bit-exact.
            if let Some(v) = f.mean_flow_velocity_um_per_us.or(f.mean_flow_velocity_mm_per_s.map(|v| v * 1e-3)) {
                cfg.fluid.mean_flow_velocity_um_per_us = v;
            }
            if let Some(v) = f.viscosity_pa_s.or(f.viscosity_mpa_s.map(|v| v * 1e-3)) {
                cfg.fluid.viscosity_pa_s = v;
            }
            if let Some(t) = f.temperature_k {
                cfg.fluid.temperature_k = t;
            }
        }
        if let Some(s) = &self.simulation {
            if let Some(v) = s.time_step_us {
                cfg.time_step_us = v;
            }
            if let Some(v) = s.duration_us {
                cfg.duration_us = v;
            }
            if let Some(v) = s.seed {
                cfg.seed = v;
            }
            if let Some(v) = s.threads {
                cfg.threads = v;
            }
            if let Some(v) = s.deterministic {
                cfg.deterministic = v;
            }
            if let Some(v) = s.carrier_carrier_collisions {
                cfg.carrier_carrier_collisions = v;
            }
            if let Some(v) = s.poisson_populations {
                cfg.poisson_populations = v;
            }
            if let Some(v) = s.mobile_capture {
                cfg.mobile_capture = v;
            }
        }

        let stokes = |radius_um: f64| {
            stokes_einstein_diffusivity(radius_um, cfg.fluid.temperature_k, cfg.fluid.viscosity_pa_s)
        };

        // Known species pick up baseline values for unspecified keys; unknown
        // names add populations and must state radius and concentration.
        for (name, doc) in &self.species {
            if let Some(existing) = cfg.species.iter_mut().find(|s| &s.name == name) {
                if let Some(r) = doc.radius_um {
                    existing.radius_um = r;
                }
                if let Some(c) = doc.concentration_per_mm3 {
                    existing.concentration_per_mm3 = c;
                }
                if let Some(n) = doc.receptor_count {
                    existing.receptor_count = n;
                }
                if let Some(a) = doc.receptor_radius_um.or(doc.receptor_radius_nm.map(|a| a * 1e-3)) {
                    existing.receptor_radius_um = a;
                }
                existing.diffusivity_um2_per_us = doc
                    .diffusivity_um2_per_us
                    .unwrap_or_else(|| stokes(existing.radius_um));
            } else {
                let radius = doc.radius_um.ok_or_else(|| {
                    ConfigError::invalid(format!("species {name}: radius_um is required"))
                })?;
                let concentration = doc.concentration_per_mm3.ok_or_else(|| {
                    ConfigError::invalid(format!("species {name}: concentration_per_mm3 is required"))
                })?;
                cfg.species.push(SpeciesSpec {
                    name: name.clone(),
                    radius_um: radius,
                    concentration_per_mm3: concentration,
                    receptor_count: doc.receptor_count.unwrap_or(0),
                    receptor_radius_um: doc
                        .receptor_radius_um
                        .or(doc.receptor_radius_nm.map(|a| a * 1e-3))
                        .unwrap_or(0.0),
                    diffusivity_um2_per_us: doc
                        .diffusivity_um2_per_us
                        .unwrap_or_else(|| stokes(radius)),
                });
            }
        }
        // Baseline species with no override still track the configured fluid.
        for s in &mut cfg.species {
            if !self.species.contains_key(&s.name) {
                s.diffusivity_um2_per_us = stokes(s.radius_um);
            }
        }

        if let Some(c) = &self.carrier {
            if let Some(r) = c.radius_um.or(c.radius_nm.map(|r| r * 1e-3)) {
                cfg.carrier.radius_um = r;
            }
        }
        cfg.carrier.diffusivity_um2_per_us = self
            .carrier
            .as_ref()
            .and_then(|c| c.diffusivity_um2_per_us)
            .unwrap_or_else(|| stokes(cfg.carrier.radius_um));

        if let Some(t) = &self.transmitter {
            let phi = t.phi_rad.unwrap_or(cfg.transmitter.position.phi);
            let r = t.radial_offset_um.unwrap_or(cfg.transmitter.position.r);
            let z = t.axial_position_um.unwrap_or(cfg.transmitter.position.z);
            cfg.transmitter.position = CylindricalPosition::new(phi, r, z);
            if let Some(v) = t.radius_um {
                cfg.transmitter.radius_um = v;
            }
            if let Some(v) = t.receptor_count {
                cfg.transmitter.receptor_count = v;
            }
            if let Some(v) = t.receptor_radius_um.or(t.receptor_radius_nm.map(|a| a * 1e-3)) {
                cfg.transmitter.receptor_radius_um = v;
            }
            cfg.transmitter.diffusivity_um2_per_us = t
                .diffusivity_um2_per_us
                .unwrap_or_else(|| stokes(cfg.transmitter.radius_um));
        } else {
            cfg.transmitter.diffusivity_um2_per_us = stokes(cfg.transmitter.radius_um);
        }

        if let Some(r) = &self.receiver {
            if let Some(v) = r.cell_side_um {
                cfg.receiver.cell_side_um = v;
            }
            if let Some(v) = r.receptor_count {
                cfg.receiver.receptor_count = v;
            }
            if let Some(v) = r.receptor_radius_um.or(r.receptor_radius_nm.map(|a| a * 1e-3)) {
                cfg.receiver.receptor_radius_um = v;
            }
            if let Some(v) = r.band_min_um {
                cfg.receiver.band_min_um = v;
            }
            if let Some(v) = r.band_max_um {
                cfg.receiver.band_max_um = v;
            }
            match r.capture.as_deref() {
                None | Some("unlimited") => {}
                Some("finite") => {
                    cfg.receiver.capture = CaptureMode::Finite { recycle_time_us: r.recycle_time_us };
                }
                Some(other) => {
                    return Err(ConfigError::invalid(format!(
                        "receiver capture mode {other:?} (expected \"unlimited\" or \"finite\")"
                    )));
                }
            }
        }

        if let Some(c) = &self.chain {
            if let Some(v) = c.window_us {
                cfg.chain.window_us = v;
            }
            if let Some(v) = c.delay_lines {
                cfg.chain.delay_lines = v;
            }
            if let Some(v) = c.threshold {
                cfg.chain.threshold = v;
            }
        }
        if let Some(e) = &self.encoder {
            if let Some(v) = e.burst_size {
                cfg.encoder.burst_size = v;
            }
            if let Some(v) = e.frame_bits {
                cfg.encoder.frame_bits = v;
            }
            if let Some(v) = e.pulse_period_us {
                cfg.encoder.pulse_period_us = v;
            }
        }
        cfg.chain.frame_bits = cfg.encoder.frame_bits;
        if self.encoder.as_ref().and_then(|e| e.pulse_period_us).is_none() {
            cfg.encoder.pulse_period_us = cfg.chain.sampling_period_us();
        }

        Ok(cfg)
    }
}

impl From<&SimulationConfig> for ConfigDoc {
    fn from(cfg: &SimulationConfig) -> Self {
        let mut species = BTreeMap::new();
        for s in &cfg.species {
            species.insert(
                s.name.clone(),
                SpeciesDoc {
                    radius_um: Some(s.radius_um),
                    concentration_per_mm3: Some(s.concentration_per_mm3),
                    receptor_count: Some(s.receptor_count),
                    receptor_radius_nm: None,
                    receptor_radius_um: Some(s.receptor_radius_um),
                    diffusivity_um2_per_us: Some(s.diffusivity_um2_per_us),
                },
            );
        }
        let (capture, recycle) = match cfg.receiver.capture {
            CaptureMode::Unlimited => (Some("unlimited".to_string()), None),
            CaptureMode::Finite { recycle_time_us } => (Some("finite".to_string()), recycle_time_us),
        };
        ConfigDoc {
            vessel: Some(VesselDoc {
                radius_um: Some(cfg.geometry.radius_um),
                length_um: Some(cfg.geometry.length_um),
                outlet: Some(cfg.geometry.outlet),
            }),
            fluid: Some(FluidDoc {
                mean_flow_velocity_mm_per_s: None,
                mean_flow_velocity_um_per_us: Some(cfg.fluid.mean_flow_velocity_um_per_us),
                viscosity_mpa_s: None,
                viscosity_pa_s: Some(cfg.fluid.viscosity_pa_s),
                temperature_k: Some(cfg.fluid.temperature_k),
            }),
            simulation: Some(SimulationDoc {
                time_step_us: Some(cfg.time_step_us),
                duration_us: Some(cfg.duration_us),
                seed: Some(cfg.seed),
                threads: Some(cfg.threads),
                deterministic: Some(cfg.deterministic),
                carrier_carrier_collisions: Some(cfg.carrier_carrier_collisions),
                poisson_populations: Some(cfg.poisson_populations),
                mobile_capture: Some(cfg.mobile_capture),
            }),
            transmitter: Some(TransmitterDoc {
                phi_rad: Some(cfg.transmitter.position.phi),
                radial_offset_um: Some(cfg.transmitter.position.r),
                axial_position_um: Some(cfg.transmitter.position.z),
                radius_um: Some(cfg.transmitter.radius_um),
                receptor_count: Some(cfg.transmitter.receptor_count),
                receptor_radius_nm: None,
                receptor_radius_um: Some(cfg.transmitter.receptor_radius_um),
                diffusivity_um2_per_us: Some(cfg.transmitter.diffusivity_um2_per_us),
            }),
            species,
            carrier: Some(CarrierDoc {
                radius_nm: None,
                radius_um: Some(cfg.carrier.radius_um),
                diffusivity_um2_per_us: Some(cfg.carrier.diffusivity_um2_per_us),
            }),
            receiver: Some(ReceiverDoc {
                cell_side_um: Some(cfg.receiver.cell_side_um),
                receptor_count: Some(cfg.receiver.receptor_count),
                receptor_radius_nm: None,
                receptor_radius_um: Some(cfg.receiver.receptor_radius_um),
                band_min_um: Some(cfg.receiver.band_min_um),
                band_max_um: Some(cfg.receiver.band_max_um),
                capture,
                recycle_time_us: recycle,
            }),
            encoder: Some(EncoderDoc {
                burst_size: Some(cfg.encoder.burst_size),
                frame_bits: Some(cfg.encoder.frame_bits),
                pulse_period_us: Some(cfg.encoder.pulse_period_us),
            }),
            chain: Some(ChainDoc {
                window_us: Some(cfg.chain.window_us),
                delay_lines: Some(cfg.chain.delay_lines),
                threshold: Some(cfg.chain.threshold),
            }),
        }
    }
}
