//! Mobile entities: carriers, the transmitter cell and the ambient blood
//! cell populations.

use serde::{Deserialize, Serialize};

use crate::geometry::Vec3;

/// Index into the world's species table.
pub type SpeciesIndex = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParticleStatus {
    Free,
    Assimilated,
    Exited,
}

/// Per-species behavior flags resolved once at world construction.
#[derive(Debug, Clone)]
pub struct SpeciesInfo {
    pub name: String,
    pub radius_um: f64,
    pub diffusivity_um2_per_us: f64,
    /// Carriers are the information molecules; pairwise carrier-carrier
    /// collisions are skipped unless explicitly enabled.
    pub is_carrier: bool,
    /// Receptor coverage fraction of the cell surface, for optional capture
    /// by mobile cells.
    pub surface_coverage: f64,
}

#[derive(Debug, Clone)]
pub struct SpeciesTable {
    pub entries: Vec<SpeciesInfo>,
}

impl SpeciesTable {
    pub fn max_diameter(&self) -> f64 {
        self.entries.iter().map(|s| 2.0 * s.radius_um).fold(0.0, f64::max)
    }
}

/// One simulated particle. Radius and diffusivity are copied out of the
/// species table so the stepping loops touch a single record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Particle {
    pub id: u64,
    pub species: SpeciesIndex,
    pub position: Vec3,
    pub radius_um: f64,
    pub diffusivity_um2_per_us: f64,
    pub status: ParticleStatus,
}

impl Particle {
    pub fn is_free(&self) -> bool {
        self.status == ParticleStatus::Free
    }
}
