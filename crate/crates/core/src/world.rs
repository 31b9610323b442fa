//! The simulation world: population placement, the per-step pipeline
//! (advect/diffuse, collision sweeps, wall and outlet handling, reception),
//! the conservation ledger and the event logs.
//!
//! Determinism contract: every random draw comes from a stream keyed on
//! `(seed, tag, particle id, step)`, collision events are resolved in sorted
//! pair order, and per-step mutations are applied in particle-index order.
//! Identical seed and configuration therefore produce bit-identical event
//! logs at any thread count.

use rand::Rng;
use rayon::prelude::*;

use crate::chain::PulseTrain;
use crate::collision::{
    reflect_at_wall, resolve_collision, CollisionEvent, GridBounds, SpatialGrid, SEPARATION_EPS_UM,
};
use crate::config::SimulationConfig;
use crate::error::SimError;
use crate::flow::advect_and_diffuse;
use crate::geometry::{CylindricalPosition, Vec3};
use crate::particle::{Particle, ParticleStatus, SpeciesInfo, SpeciesTable};
use crate::reception::ReceiverArray;
use crate::rng::{stream, TAG_CAPTURE, TAG_MOBILE_CAPTURE, TAG_MOTION, TAG_PLACEMENT, TAG_RELEASE};

/// Maximum overlap-resolution sweeps per step before residuals are accepted.
pub const MAX_RESOLUTION_SWEEPS: usize = 8;

/// Extra slack added to the grid cell size beyond the largest diameter, so
/// collider buckets tolerate a bounded amount of drift between rebuilds.
const GRID_SKIN_UM: f64 = 1.0;

/// Candidate collider pairs include everything within this distance of
/// contact; the list (and the collider buckets) are rebuilt before the
/// accumulated collider displacement can reach half of it, which keeps
/// detection exact.
const PAIR_SKIN_UM: f64 = 0.5;

/// Particle-count bookkeeping; `free + assimilated + exited` must equal
/// `placed + released` after every step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Ledger {
    pub placed: u64,
    pub released: u64,
    pub free: u64,
    pub assimilated: u64,
    pub exited: u64,
}

impl Ledger {
    pub fn balanced(&self) -> bool {
        self.free + self.assimilated + self.exited == self.placed + self.released
    }
}

/// Per-step record of a status transition, for the optional event log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitionRecord {
    pub time_us: f64,
    pub particle_id: u64,
    pub status: ParticleStatus,
}

/// One resolved collision, recorded when collision logging is enabled.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollisionRecord {
    pub step: u64,
    pub first_id: u64,
    pub second_id: u64,
    pub overlap_um: f64,
}

/// Counters that describe how a step went.
#[derive(Debug, Clone, Copy, Default)]
pub struct StepReport {
    pub collisions_resolved: u64,
    pub sweeps: u32,
    pub residual_overlaps: u64,
    pub assimilated: u64,
    pub exited: u64,
}

pub struct World {
    pub config: SimulationConfig,
    pub species: SpeciesTable,
    pub particles: Vec<Particle>,
    pub receivers: ReceiverArray,
    pub ledger: Ledger,
    pub step_index: u64,
    pub transitions: Vec<TransitionRecord>,
    /// Resolved collisions, populated only when logging is enabled.
    pub collision_log: Vec<CollisionRecord>,
    collision_logging: bool,
    /// Carriers captured by receptor-bearing mobile cells (flag-gated).
    pub mobile_captures: u64,
    seed: u64,
    carrier_species: usize,
    transmitter_index: usize,
    pending_releases: Vec<(f64, u64)>,
    next_release: usize,
    grid: SpatialGrid,
    tracer_flags: Vec<bool>,
    pool: std::sync::Arc<rayon::ThreadPool>,
    serial: bool,
    dirty_scratch: Vec<u32>,
    candidate_pairs: Vec<(u32, u32)>,
    /// Max collider displacement accumulated since the last collider
    /// rebuild; the rebuild cadence keys off it.
    acc_collider_disp: f64,
    force_collider_rebuild: bool,
}

impl World {
    /// Builds and places the initial populations. The seed normally comes
    /// from the configuration; replicates pass a derived seed.
    pub fn new(config: &SimulationConfig) -> Result<Self, SimError> {
        Self::with_seed(config, config.seed)
    }

    pub fn with_seed(config: &SimulationConfig, seed: u64) -> Result<Self, SimError> {
        config.validate()?;
        let mut entries = Vec::new();
        // Species 0 is the transmitter cell, followed by the ambient
        // populations, with carriers last.
        entries.push(SpeciesInfo {
            name: "transmitter".into(),
            radius_um: config.transmitter.radius_um,
            diffusivity_um2_per_us: config.transmitter.diffusivity_um2_per_us,
            is_carrier: false,
            surface_coverage: sphere_coverage(
                config.transmitter.receptor_count,
                config.transmitter.receptor_radius_um,
                config.transmitter.radius_um,
            ),
        });
        for s in &config.species {
            entries.push(SpeciesInfo {
                name: s.name.clone(),
                radius_um: s.radius_um,
                diffusivity_um2_per_us: s.diffusivity_um2_per_us,
                is_carrier: false,
                surface_coverage: sphere_coverage(s.receptor_count, s.receptor_radius_um, s.radius_um),
            });
        }
        let carrier_species = entries.len();
        entries.push(SpeciesInfo {
            name: "carrier".into(),
            radius_um: config.carrier.radius_um,
            diffusivity_um2_per_us: config.carrier.diffusivity_um2_per_us,
            is_carrier: true,
            surface_coverage: 0.0,
        });
        let species = SpeciesTable { entries };

        let receivers = ReceiverArray::tile(&config.geometry, &config.receiver, config.transmitter.position)?;

        let cell_size = species.max_diameter().max(1.0) + GRID_SKIN_UM;
        let bounds = GridBounds::for_vessel(&config.geometry, cell_size);
        let grid = SpatialGrid::build(&[], cell_size, bounds, None)?;

        let threads = if config.threads == 0 {
            std::thread::available_parallelism().map_or(1, |n| n.get())
        } else {
            config.threads
        };
        let pool = std::sync::Arc::new(
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .expect("thread pool"),
        );

        let mut world = World {
            config: config.clone(),
            species,
            particles: Vec::new(),
            receivers,
            ledger: Ledger::default(),
            step_index: 0,
            transitions: Vec::new(),
            collision_log: Vec::new(),
            collision_logging: false,
            mobile_captures: 0,
            seed,
            carrier_species,
            transmitter_index: 0,
            pending_releases: Vec::new(),
            next_release: 0,
            grid,
            tracer_flags: Vec::new(),
            pool,
            serial: threads == 1,
            dirty_scratch: Vec::new(),
            candidate_pairs: Vec::new(),
            acc_collider_disp: 0.0,
            force_collider_rebuild: true,
        };
        world.place_initial_populations();
        world.rebuild_grid();
        Ok(world)
    }

    pub fn time_us(&self) -> f64 {
        self.step_index as f64 * self.config.time_step_us
    }

    pub fn transmitter(&self) -> &Particle {
        &self.particles[self.transmitter_index]
    }

    /// Records every resolved collision into `collision_log`. Off by
    /// default; a desk-scale run resolves tens of collisions per step.
    pub fn enable_collision_logging(&mut self) {
        self.collision_logging = true;
    }

    fn place_initial_populations(&mut self) {
        let tx = self.config.transmitter;
        self.spawn_particle(0, tx.position.to_cartesian());
        // Ambient populations, sequential rejection placement against what
        // is already there.
        let counts: Vec<u64> = self
            .config
            .species
            .iter()
            .enumerate()
            .map(|(k, spec)| {
                if self.config.poisson_populations {
                    let lambda = spec.concentration_per_mm3 * self.config.geometry.volume_um3() * 1e-9;
                    let mut rng = stream(self.seed, TAG_PLACEMENT, (k + 1) as u64, u64::MAX);
                    sample_poisson(lambda, &mut rng)
                } else {
                    self.config.population_count(spec)
                }
            })
            .collect();
        for (k, count) in counts.into_iter().enumerate() {
            let species_index = k + 1;
            for n in 0..count {
                let position = self.sample_free_position(species_index, n);
                self.spawn_particle(species_index, position);
            }
        }
        self.ledger.placed = self.particles.len() as u64;
        self.ledger.free = self.particles.len() as u64;
    }

    /// Rejection-samples a position for a new particle of `species`,
    /// uniform over the admissible cylinder volume, avoiding overlap with
    /// already placed particles. Densities too high for rejection placement
    /// fall back to the least-overlapping candidate with a diagnostic.
    fn sample_free_position(&mut self, species: usize, ordinal: u64) -> Vec3 {
        const MAX_ATTEMPTS: usize = 256;
        let radius = self.species.entries[species].radius_um;
        let geometry = self.config.geometry;
        let r_max = (geometry.radius_um - radius).max(0.0);
        let mut rng = stream(self.seed, TAG_PLACEMENT, species as u64, ordinal);
        let mut best: Option<(f64, Vec3)> = None;
        for _ in 0..MAX_ATTEMPTS {
            let phi: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
            let u: f64 = rng.gen();
            let r = r_max * u.sqrt();
            let z: f64 = rng.gen_range(0.0..geometry.length_um);
            let candidate = CylindricalPosition::new(phi, r, z).to_cartesian();
            let worst = self.worst_overlap_at(candidate, radius);
            if worst <= 0.0 {
                return candidate;
            }
            if best.is_none_or(|(w, _)| worst < w) {
                best = Some((worst, candidate));
            }
        }
        let (overlap, position) = best.expect("placement attempts");
        tracing::warn!(
            species = self.species.entries[species].name.as_str(),
            overlap_um = overlap,
            "placement fallback: population too dense for overlap-free placement"
        );
        position
    }

    fn worst_overlap_at(&self, position: Vec3, radius: f64) -> f64 {
        let mut worst = 0.0f64;
        for p in &self.particles {
            let sum = radius + p.radius_um;
            let d = (position - p.position).norm();
            if d < sum {
                worst = worst.max(sum - d);
            }
        }
        worst
    }

    fn spawn_particle(&mut self, species: usize, position: Vec3) -> usize {
        let info = &self.species.entries[species];
        let idx = self.particles.len();
        self.particles.push(Particle {
            id: idx as u64,
            species,
            position,
            radius_um: info.radius_um,
            diffusivity_um2_per_us: info.diffusivity_um2_per_us,
            status: ParticleStatus::Free,
        });
        self.tracer_flags.push(info.is_carrier && !self.config.carrier_carrier_collisions);
        idx
    }

    /// Schedules carrier releases; times are snapped to step boundaries.
    pub fn schedule_releases(&mut self, train: &PulseTrain) {
        let dt = self.config.time_step_us;
        self.pending_releases = train
            .releases
            .iter()
            .map(|r| ((r.time_us / dt).round() * dt, r.count))
            .collect();
        self.pending_releases.sort_by(|a, b| a.0.total_cmp(&b.0));
        self.next_release = 0;
    }

    /// Releases due at the current step start: carriers appear uniformly
    /// over the transmitter's current surface.
    fn process_releases(&mut self) {
        let now = self.time_us();
        let dt = self.config.time_step_us;
        while self.next_release < self.pending_releases.len() {
            let (t, count) = self.pending_releases[self.next_release];
            if t >= now + dt {
                break;
            }
            self.next_release += 1;
            let pulse = self.next_release as u64;
            if !self.particles[self.transmitter_index].is_free() {
                tracing::warn!(time_us = t, "release skipped: transmitter left the vessel");
                continue;
            }
            let center = self.particles[self.transmitter_index].position;
            let surface = self.particles[self.transmitter_index].radius_um
                + self.config.carrier.radius_um
                + SEPARATION_EPS_UM;
            for k in 0..count {
                let mut rng = stream(self.seed, TAG_RELEASE, pulse, k);
                let dir = sample_unit_vector(&mut rng);
                let mut position = center + dir * surface;
                // Keep release points inside the wall annulus.
                let mut probe = Particle {
                    id: 0,
                    species: self.carrier_species,
                    position,
                    radius_um: self.config.carrier.radius_um,
                    diffusivity_um2_per_us: 0.0,
                    status: ParticleStatus::Free,
                };
                reflect_at_wall(&mut probe, &self.config.geometry);
                position = probe.position;
                // Tracer buckets are rebuilt every step, which indexes the
                // new carrier before any detection runs.
                let idx = self.spawn_particle(self.carrier_species, position);
                if !self.tracer_flags[idx] {
                    self.force_collider_rebuild = true;
                }
            }
            self.ledger.released += count;
            self.ledger.free += count;
        }
    }

    fn rebuild_grid(&mut self) {
        self.grid.rebuild(&self.particles, Some(&self.tracer_flags));
    }

    /// Advances the world by one time step and reports what happened.
    pub fn step(&mut self) -> StepReport {
        if self.serial {
            self.step_inner()
        } else {
            let pool = self.pool.clone();
            pool.install(|| self.step_inner())
        }
    }

    /// One step, running inside the world's pool (or serially): releases,
    /// drift/diffusion proposals, collision sweeps, wall/outlet/reception.
    fn step_inner(&mut self) -> StepReport {
        let mut report = StepReport::default();
        self.process_releases();

        let dt = self.config.time_step_us;
        let step = self.step_index;
        let seed = self.seed;
        let geometry = self.config.geometry;
        let fluid = self.config.fluid;

        // Phase 1: drift + diffusion proposals, in place; each particle owns
        // an independent random stream so order and threads are irrelevant.
        // Tracks the largest collider displacement for the rebuild cadence.
        let tracer_flags = &self.tracer_flags;
        let advect_one = |p: &mut Particle| -> f64 {
            if !p.is_free() {
                return 0.0;
            }
            let mut rng = stream(seed, TAG_MOTION, p.id, step);
            let proposed = advect_and_diffuse(p, &geometry, &fluid, dt, &mut rng);
            let moved = if tracer_flags[p.id as usize] {
                0.0
            } else {
                (proposed - p.position).norm()
            };
            p.position = proposed;
            moved
        };
        let advect_max = if self.serial {
            self.particles.iter_mut().map(advect_one).fold(0.0, f64::max)
        } else {
            self.particles
                .par_iter_mut()
                .with_min_len(512)
                .map(advect_one)
                .reduce(|| 0.0, f64::max)
        };

        // Phase 2: collision sweeps until clean or the sweep budget is spent.
        // Tracer buckets refresh every step; collider buckets and the
        // candidate pair list refresh only when accumulated drift requires.
        self.grid.rebuild_tracers(&self.particles, Some(&self.tracer_flags));
        self.acc_collider_disp += advect_max;
        if self.force_collider_rebuild || 2.0 * self.acc_collider_disp >= PAIR_SKIN_UM {
            self.grid.rebuild_colliders(&self.particles, Some(&self.tracer_flags));
            self.candidate_pairs = self.grid.candidate_pairs(PAIR_SKIN_UM);
            self.acc_collider_disp = 0.0;
            self.force_collider_rebuild = false;
        }
        let mut events = self.collider_overlaps();
        let mut tracer_events = self.grid.tracer_events_live(&self.particles, !self.serial);
        events.append(&mut tracer_events);
        events.sort_by_key(|e| (e.i, e.j));
        let mut sweeps = 0;
        let mut resolution_max = 0.0f64;
        while !events.is_empty() && sweeps < MAX_RESOLUTION_SWEEPS {
            sweeps += 1;
            let mut dirty = std::mem::take(&mut self.dirty_scratch);
            dirty.clear();
            for event in &events {
                // A capture earlier in the sweep may have removed a particle.
                if !self.particles[event.i as usize].is_free()
                    || !self.particles[event.j as usize].is_free()
                {
                    continue;
                }
                let (di, dj) = resolve_collision(event, &mut self.particles);
                if di > 0.0 || dj > 0.0 {
                    report.collisions_resolved += 1;
                    if self.collision_logging {
                        self.collision_log.push(CollisionRecord {
                            step,
                            first_id: self.particles[event.i as usize].id,
                            second_id: self.particles[event.j as usize].id,
                            overlap_um: event.overlap,
                        });
                    }
                    self.maybe_mobile_capture(event, step);
                    if !self.tracer_flags[event.i as usize] {
                        resolution_max = resolution_max.max(di);
                    }
                    if !self.tracer_flags[event.j as usize] {
                        resolution_max = resolution_max.max(dj);
                    }
                    // A displacement below the separation epsilon cannot
                    // open a meaningful new overlap; skip its re-check.
                    if di > SEPARATION_EPS_UM && self.particles[event.i as usize].is_free() {
                        dirty.push(event.i);
                    }
                    if dj > SEPARATION_EPS_UM && self.particles[event.j as usize].is_free() {
                        dirty.push(event.j);
                    }
                }
            }
            dirty.sort_unstable();
            dirty.dedup();
            events = self.recheck_pairs(&dirty);
            self.dirty_scratch = dirty;
        }
        if !events.is_empty() {
            // Sweep budget exhausted: accept residuals below 1% of the
            // smaller radius of each pair, diagnose anything beyond that.
            for event in &events {
                let min_radius = self.particles[event.i as usize]
                    .radius_um
                    .min(self.particles[event.j as usize].radius_um);
                if event.overlap > 0.01 * min_radius {
                    report.residual_overlaps += 1;
                }
            }
            if report.residual_overlaps > 0 {
                tracing::debug!(
                    step,
                    pairs = events.len(),
                    beyond_tolerance = report.residual_overlaps,
                    "overlap resolution did not converge within the sweep budget"
                );
            }
        }
        report.sweeps = sweeps as u32;
        // Phase 3: wall, outlet and reception outcomes, decided in parallel
        // from per-particle streams, applied in index order.
        let decide = |(idx, p): (usize, &Particle)| {
            if !p.is_free() {
                return None;
            }
            let decision =
                wall_decision(p, &geometry, &self.receivers, self.carrier_species, seed, step);
            decision.map(|d| (idx as u32, d))
        };
        let mut decisions: Vec<(u32, WallDecision)> = if self.serial {
            self.particles.iter().enumerate().filter_map(decide).collect()
        } else {
            self.particles
                .par_iter()
                .enumerate()
                .with_min_len(512)
                .filter_map(decide)
                .collect()
        };
        decisions.sort_unstable_by_key(|(idx, _)| *idx);
        let mut wall_max = 0.0f64;
        let event_time = (step + 1) as f64 * dt;
        self.receivers.advance_time(event_time);
        for (idx, decision) in decisions {
            let idx = idx as usize;
            match decision {
                WallDecision::Exit => {
                    self.particles[idx].status = ParticleStatus::Exited;
                    self.ledger.free -= 1;
                    self.ledger.exited += 1;
                    report.exited += 1;
                    self.transitions.push(TransitionRecord {
                        time_us: event_time,
                        particle_id: self.particles[idx].id,
                        status: ParticleStatus::Exited,
                    });
                }
                WallDecision::ReflectOrCapture { cell, draw } => {
                    let captured = match cell {
                        Some(cell) => {
                            self.receivers.try_capture(cell, event_time, self.particles[idx].id, draw)
                        }
                        None => false,
                    };
                    if captured {
                        self.particles[idx].status = ParticleStatus::Assimilated;
                        self.ledger.free -= 1;
                        self.ledger.assimilated += 1;
                        report.assimilated += 1;
                        self.transitions.push(TransitionRecord {
                            time_us: event_time,
                            particle_id: self.particles[idx].id,
                            status: ParticleStatus::Assimilated,
                        });
                    } else {
                        let before = self.particles[idx].position;
                        reflect_at_wall(&mut self.particles[idx], &geometry);
                        if !self.tracer_flags[idx] {
                            wall_max = wall_max.max((self.particles[idx].position - before).norm());
                        }
                    }
                }
            }
        }

        self.acc_collider_disp += resolution_max + wall_max;
        self.step_index += 1;
        debug_assert!(self.ledger.balanced(), "ledger out of balance: {:?}", self.ledger);
        report
    }

    /// Exact overlaps among colliders, scanned from the candidate list with
    /// live positions.
    fn collider_overlaps(&self) -> Vec<CollisionEvent> {
        let mut events = Vec::new();
        for &(i, j) in &self.candidate_pairs {
            let a = &self.particles[i as usize];
            let b = &self.particles[j as usize];
            if !a.is_free() || !b.is_free() {
                continue;
            }
            if let Some(e) = crate::collision::overlap_event(i, j, a, b) {
                events.push(e);
            }
        }
        events
    }

    /// Gathers overlap events touching any dirty particle, deduplicated and
    /// sorted so resolution order stays deterministic.
    fn recheck_pairs(&self, dirty: &[u32]) -> Vec<CollisionEvent> {
        let mut events = Vec::new();
        for &idx in dirty {
            if self.particles[idx as usize].is_free() {
                self.grid.pairs_touching(idx as usize, &self.particles, &mut events);
            }
        }
        events.sort_by_key(|e| (e.i, e.j));
        events.dedup_by_key(|e| (e.i, e.j));
        events
    }

    /// Flag-gated capture of carriers by receptor-bearing mobile cells on
    /// contact, using the same coverage rule as wall reception.
    fn maybe_mobile_capture(&mut self, event: &CollisionEvent, step: u64) {
        if !self.config.mobile_capture {
            return;
        }
        let (i, j) = (event.i as usize, event.j as usize);
        let (carrier_idx, cell_idx) = if self.species.entries[self.particles[i].species].is_carrier {
            (i, j)
        } else if self.species.entries[self.particles[j].species].is_carrier {
            (j, i)
        } else {
            return;
        };
        let coverage = self.species.entries[self.particles[cell_idx].species].surface_coverage;
        if coverage <= 0.0 || !self.particles[carrier_idx].is_free() {
            return;
        }
        let mut rng = stream(self.seed, TAG_MOBILE_CAPTURE, self.particles[carrier_idx].id, step);
        if rng.gen::<f64>() < coverage {
            self.particles[carrier_idx].status = ParticleStatus::Assimilated;
            self.ledger.free -= 1;
            self.ledger.assimilated += 1;
            self.mobile_captures += 1;
            self.transitions.push(TransitionRecord {
                time_us: (step + 1) as f64 * self.config.time_step_us,
                particle_id: self.particles[carrier_idx].id,
                status: ParticleStatus::Assimilated,
            });
        }
    }

    /// Runs `steps` steps, invoking `on_step` after each.
    pub fn run(&mut self, steps: u64, mut on_step: impl FnMut(&World, &StepReport)) {
        for _ in 0..steps {
            let report = self.step();
            on_step(self, &report);
        }
    }

    /// Residual overlap depths among free particles, for invariant checks.
    pub fn current_overlaps(&mut self) -> Vec<CollisionEvent> {
        self.rebuild_grid();
        self.grid.detect_collisions(&self.particles)
    }
}

/// Outcome of the parallel wall-phase scan for one particle.
#[derive(Debug, Clone, Copy)]
enum WallDecision {
    Exit,
    ReflectOrCapture { cell: Option<usize>, draw: f64 },
}

fn wall_decision(
    p: &Particle,
    geometry: &crate::geometry::VesselGeometry,
    receivers: &ReceiverArray,
    carrier_species: usize,
    seed: u64,
    step: u64,
) -> Option<WallDecision> {
    if p.position.z < 0.0 || p.position.z > geometry.length_um {
        return Some(WallDecision::Exit);
    }
    let r = p.position.radial();
    if r <= geometry.radius_um - p.radius_um {
        return None;
    }
    if p.species == carrier_species {
        let contact = CylindricalPosition::from_cartesian(p.position);
        let cell = receivers.cell_at(contact.phi, contact.z);
        if cell.is_some() {
            let mut rng = stream(seed, TAG_CAPTURE, p.id, step);
            return Some(WallDecision::ReflectOrCapture { cell, draw: rng.gen() });
        }
    }
    Some(WallDecision::ReflectOrCapture { cell: None, draw: 1.0 })
}

/// Receptor coverage of a spherical cell surface, clamped to [0, 1].
fn sphere_coverage(receptor_count: u32, receptor_radius_um: f64, cell_radius_um: f64) -> f64 {
    if cell_radius_um <= 0.0 {
        return 0.0;
    }
    let covered = receptor_count as f64 * std::f64::consts::PI * receptor_radius_um * receptor_radius_um;
    let surface = 4.0 * std::f64::consts::PI * cell_radius_um * cell_radius_um;
    (covered / surface).clamp(0.0, 1.0)
}

fn sample_unit_vector<R: Rng>(rng: &mut R) -> Vec3 {
    use rand_distr::StandardNormal;
    loop {
        let v = Vec3::new(
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
        );
        let n = v.norm();
        if n > 1e-12 {
            return v * (1.0 / n);
        }
    }
}

/// Knuth sampling is fine here: only used for optional population draws.
fn sample_poisson<R: Rng>(lambda: f64, rng: &mut R) -> u64 {
    if lambda <= 0.0 {
        return 0;
    }
    // Normal approximation keeps large populations cheap.
    if lambda > 1e3 {
        let g: f64 = rng.sample(rand_distr::StandardNormal);
        return (lambda + g * lambda.sqrt()).round().max(0.0) as u64;
    }
    let l = (-lambda).exp();
    let mut k = 0u64;
    let mut p = 1.0;
    loop {
        p *= rng.gen::<f64>();
        if p <= l {
            return k;
        }
        k += 1;
    }
}
