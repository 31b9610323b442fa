//! Per-step kinematics before collision resolution: laminar drift along the
//! vessel axis plus Brownian displacement.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::config::FluidCharacteristics;
use crate::geometry::{Vec3, VesselGeometry};
use crate::particle::Particle;

/// Axial velocity of the parabolic laminar profile at radial distance `r`:
/// `2 * v_mean * (1 - (r/R)^2)`. The cross-sectional average equals
/// `v_mean`; the wall value is zero.
#[inline]
pub fn poiseuille_velocity(r: f64, vessel_radius: f64, v_mean: f64) -> f64 {
    debug_assert!((0.0..=vessel_radius).contains(&r));
    let ratio = r / vessel_radius;
    2.0 * v_mean * (1.0 - ratio * ratio)
}

/// Isotropic Brownian displacement over `dt`: each Cartesian component is an
/// independent Gaussian with mean 0 and variance `2 * D * dt`.
#[inline]
pub fn brownian_displacement<R: Rng>(diffusivity: f64, dt: f64, rng: &mut R) -> Vec3 {
    if diffusivity == 0.0 {
        return Vec3::ZERO;
    }
    let sigma = (2.0 * diffusivity * dt).sqrt();
    let gx: f64 = rng.sample(StandardNormal);
    let gy: f64 = rng.sample(StandardNormal);
    let gz: f64 = rng.sample(StandardNormal);
    Vec3::new(gx * sigma, gy * sigma, gz * sigma)
}

/// Proposed position after one step of drift + diffusion. Wall and outlet
/// handling happen after collision resolution, so the proposal may leave the
/// vessel.
#[inline]
pub fn advect_and_diffuse<R: Rng>(
    particle: &Particle,
    geometry: &VesselGeometry,
    fluid: &FluidCharacteristics,
    dt: f64,
    rng: &mut R,
) -> Vec3 {
    debug_assert!(particle.is_free());
    let r = particle.position.radial().min(geometry.radius_um);
    let drift = poiseuille_velocity(r, geometry.radius_um, fluid.mean_flow_velocity_um_per_us) * dt;
    let noise = brownian_displacement(particle.diffusivity_um2_per_us, dt, rng);
    Vec3::new(
        particle.position.x + noise.x,
        particle.position.y + noise.y,
        particle.position.z + drift + noise.z,
    )
}
