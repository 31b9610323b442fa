//! Hard-sphere collision handling over a uniform spatial grid.
//!
//! The grid cell size must be at least the largest particle diameter so any
//! overlapping pair sits in the same or adjacent cells. Buckets are stored
//! in compressed (CSR) form with positions packed in bucket order, rebuilt
//! every step; the detection pass walks a half stencil so each pair is
//! examined once. Resolution is positional (overdamped): overlapping
//! centers are pushed apart along the contact normal, split in inverse
//! proportion to radius cubed, so heavy cells are essentially unperturbed
//! by carrier contacts.
//!
//! Within a step, resolution displacements are far smaller than the cell
//! slack, so re-checks against the step's bucket snapshot stay exact.

use rayon::prelude::*;

use crate::error::SimError;
use crate::geometry::{Vec3, VesselGeometry};
use crate::particle::{Particle, ParticleStatus};

/// Gap left between resolved spheres, um.
pub const SEPARATION_EPS_UM: f64 = 1e-6;

/// An overlapping pair detected during a sweep. `normal` points from `j`
/// toward `i` and has unit magnitude; `overlap` is the center-distance
/// deficit at detection time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollisionEvent {
    pub i: u32,
    pub j: u32,
    pub normal: Vec3,
    pub overlap: f64,
}

/// Axis-aligned region covered by the grid.
#[derive(Debug, Clone, Copy)]
pub struct GridBounds {
    pub origin: Vec3,
    pub extent: Vec3,
}

impl GridBounds {
    /// Bounds covering the whole vessel plus one cell of slack on every
    /// side, so pre-reflection proposals still land in the grid.
    pub fn for_vessel(geometry: &VesselGeometry, cell_size: f64) -> Self {
        let r = geometry.radius_um + cell_size;
        GridBounds {
            origin: Vec3::new(-r, -r, -cell_size),
            extent: Vec3::new(2.0 * r, 2.0 * r, geometry.length_um + 2.0 * cell_size),
        }
    }

    /// Bounds covering a free-standing particle set (for tests and tools).
    pub fn covering(particles: &[Particle], cell_size: f64) -> Self {
        let mut lo = Vec3::new(f64::INFINITY, f64::INFINITY, f64::INFINITY);
        let mut hi = Vec3::new(f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in particles.iter().filter(|p| p.is_free()) {
            lo.x = lo.x.min(p.position.x);
            lo.y = lo.y.min(p.position.y);
            lo.z = lo.z.min(p.position.z);
            hi.x = hi.x.max(p.position.x);
            hi.y = hi.y.max(p.position.y);
            hi.z = hi.z.max(p.position.z);
        }
        if lo.x > hi.x {
            lo = Vec3::ZERO;
            hi = Vec3::new(cell_size, cell_size, cell_size);
        }
        GridBounds {
            origin: lo - Vec3::new(cell_size, cell_size, cell_size),
            extent: (hi - lo) + Vec3::new(2.0 * cell_size, 2.0 * cell_size, 2.0 * cell_size),
        }
    }
}

const NO_CELL: u32 = u32::MAX;

/// Packed per-entry record: position and radius in bucket order.
#[derive(Debug, Clone, Copy, Default)]
struct PackedSphere {
    x: f64,
    y: f64,
    z: f64,
    r: f64,
}

impl PackedSphere {
    #[inline]
    fn of(p: &Particle) -> Self {
        PackedSphere { x: p.position.x, y: p.position.y, z: p.position.z, r: p.radius_um }
    }

    #[inline]
    fn overlaps(&self, other: &PackedSphere) -> bool {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        let dz = self.z - other.z;
        let sum = self.r + other.r;
        dx * dx + dy * dy + dz * dz < sum * sum
    }
}

/// One class of particles in CSR bucket form. `occupied` lists the distinct
/// cells holding at least one entry, in no particular order.
#[derive(Debug, Default)]
struct BucketSet {
    start: Vec<u32>,
    entries: Vec<u32>,
    packed: Vec<PackedSphere>,
    occupied: Vec<u32>,
    /// One bit per cell: set when the cell holds any entry. Small enough to
    /// stay cache-resident, so empty neighbor probes are nearly free.
    mask: Vec<u64>,
    scratch: Vec<u32>,
}

impl BucketSet {
    fn rebuild(&mut self, cells: usize, members: &[(u32, u32)], particles: &[Particle], pack: bool) {
        self.scratch.clear();
        self.scratch.resize(cells, 0);
        self.mask.clear();
        self.mask.resize(cells / 64 + 1, 0);
        self.occupied.clear();
        for &(cell, _) in members {
            if self.scratch[cell as usize] == 0 {
                self.occupied.push(cell);
                self.mask[cell as usize >> 6] |= 1u64 << (cell & 63);
            }
            self.scratch[cell as usize] += 1;
        }
        self.start.clear();
        self.start.resize(cells + 1, 0);
        let mut acc = 0u32;
        for c in 0..cells {
            self.start[c] = acc;
            acc += self.scratch[c];
        }
        self.start[cells] = acc;
        self.entries.clear();
        self.entries.resize(acc as usize, 0);
        self.packed.clear();
        if pack {
            self.packed.resize(acc as usize, PackedSphere::default());
        }
        // scratch now tracks the write cursor per cell.
        self.scratch.copy_from_slice(&self.start[..cells]);
        for &(cell, idx) in members {
            let slot = self.scratch[cell as usize] as usize;
            self.scratch[cell as usize] += 1;
            self.entries[slot] = idx;
            if pack {
                self.packed[slot] = PackedSphere::of(&particles[idx as usize]);
            }
        }
    }

    #[inline]
    fn range(&self, cell: usize) -> std::ops::Range<usize> {
        self.start[cell] as usize..self.start[cell + 1] as usize
    }

    #[inline]
    fn is_occupied(&self, cell: usize) -> bool {
        self.mask[cell >> 6] & (1u64 << (cell & 63)) != 0
    }
}

/// Uniform bucket grid over free particles.
///
/// Particles are split into two classes: "colliders" pair among themselves
/// and with everything else; "tracers" pair only against colliders. Running
/// carriers as tracers turns off the physically negligible carrier-carrier
/// interactions and removes their quadratic cost.
#[derive(Debug)]
pub struct SpatialGrid {
    cell_size: f64,
    inv_cell: f64,
    origin: Vec3,
    nx: usize,
    ny: usize,
    nz: usize,
    /// Linear offsets of the 13 forward-stencil neighbors; valid for every
    /// occupied cell thanks to the one-cell guard border.
    half_offsets: [isize; 13],
    /// Linear offsets of the full 27-cell neighborhood (including 0).
    full_offsets: [isize; 27],
    colliders: BucketSet,
    tracers: BucketSet,
    /// Bucket index per particle (NO_CELL when not indexed).
    cell_of: Vec<u32>,
    is_tracer: Vec<bool>,
    member_scratch: Vec<(u32, u32)>,
    tracer_scratch: Vec<(u32, u32)>,
    indexed: usize,
}

impl SpatialGrid {
    /// Builds a grid over all free particles. `tracers`, when given, marks
    /// particles whose mutual pairs are skipped.
    pub fn build(
        particles: &[Particle],
        cell_size: f64,
        bounds: GridBounds,
        tracers: Option<&[bool]>,
    ) -> Result<Self, SimError> {
        let max_diameter = particles
            .iter()
            .filter(|p| p.is_free())
            .map(|p| 2.0 * p.radius_um)
            .fold(0.0, f64::max);
        if cell_size < max_diameter {
            return Err(SimError::CellSizeTooSmall { cell_size, max_diameter });
        }
        // One guard cell on every side keeps all stencil offsets in range.
        let nx = (bounds.extent.x / cell_size).ceil().max(1.0) as usize + 2;
        let ny = (bounds.extent.y / cell_size).ceil().max(1.0) as usize + 2;
        let nz = (bounds.extent.z / cell_size).ceil().max(1.0) as usize + 2;
        let off = |dx: isize, dy: isize, dz: isize| dx + (nx as isize) * (dy + (ny as isize) * dz);
        let mut half_offsets = [0isize; 13];
        for (k, &(dx, dy, dz)) in HALF_STENCIL.iter().enumerate() {
            half_offsets[k] = off(dx, dy, dz);
        }
        let mut full_offsets = [0isize; 27];
        let mut k = 0;
        for dz in -1..=1 {
            for dy in -1..=1 {
                for dx in -1..=1 {
                    full_offsets[k] = off(dx, dy, dz);
                    k += 1;
                }
            }
        }
        let mut grid = SpatialGrid {
            cell_size,
            inv_cell: 1.0 / cell_size,
            origin: bounds.origin,
            nx,
            ny,
            nz,
            half_offsets,
            full_offsets,
            colliders: BucketSet::default(),
            tracers: BucketSet::default(),
            cell_of: Vec::new(),
            is_tracer: Vec::new(),
            member_scratch: Vec::new(),
            tracer_scratch: Vec::new(),
            indexed: 0,
        };
        grid.rebuild(particles, tracers);
        Ok(grid)
    }

    /// Re-indexes all free particles, reusing allocations.
    pub fn rebuild(&mut self, particles: &[Particle], tracers: Option<&[bool]>) {
        self.rebuild_colliders(particles, tracers);
        self.rebuild_tracers(particles, tracers);
    }

    /// Re-indexes the collider class only. Tracer state is left alone.
    pub fn rebuild_colliders(&mut self, particles: &[Particle], tracers: Option<&[bool]>) {
        let cells = self.nx * self.ny * self.nz;
        self.cell_of.resize(particles.len(), NO_CELL);
        self.is_tracer.resize(particles.len(), false);
        let mut members = std::mem::take(&mut self.member_scratch);
        members.clear();
        for (idx, p) in particles.iter().enumerate() {
            if !p.is_free() || tracers.is_some_and(|t| t[idx]) {
                continue;
            }
            let cell = self.cell_index(p.position) as u32;
            self.cell_of[idx] = cell;
            self.is_tracer[idx] = false;
            members.push((cell, idx as u32));
        }
        self.colliders.rebuild(cells, &members, particles, true);
        self.colliders.occupied.sort_unstable();
        self.member_scratch = members;
        self.indexed = self.colliders.entries.len() + self.tracers.entries.len();
    }

    /// Re-indexes the tracer class only; run every step since carriers move
    /// quickly and are spawned mid-run.
    pub fn rebuild_tracers(&mut self, particles: &[Particle], tracers: Option<&[bool]>) {
        let cells = self.nx * self.ny * self.nz;
        self.cell_of.resize(particles.len(), NO_CELL);
        self.is_tracer.resize(particles.len(), false);
        let mut members = std::mem::take(&mut self.tracer_scratch);
        members.clear();
        for (idx, p) in particles.iter().enumerate() {
            if !p.is_free() || !tracers.is_some_and(|t| t[idx]) {
                continue;
            }
            let cell = self.cell_index(p.position) as u32;
            self.cell_of[idx] = cell;
            self.is_tracer[idx] = true;
            members.push((cell, idx as u32));
        }
        self.tracers.rebuild(cells, &members, particles, false);
        self.tracers.occupied.sort_unstable();
        self.tracer_scratch = members;
        self.indexed = self.colliders.entries.len() + self.tracers.entries.len();
    }

    /// Collider pairs within `skin` of contact, for cadence-based candidate
    /// lists: every pair whose centers are closer than `r_i + r_j + skin`,
    /// normalized `i < j`. Must be called right after `rebuild_colliders`.
    pub fn candidate_pairs(&self, skin: f64) -> Vec<(u32, u32)> {
        let mut pairs = Vec::new();
        for &cell in &self.colliders.occupied {
            let cell = cell as usize;
            let range = self.colliders.range(cell);
            for a in range.clone() {
                for b in a + 1..range.end {
                    self.push_if_near(a, b, skin, &mut pairs);
                }
            }
            for &off in &self.half_offsets {
                let other = (cell as isize + off) as usize;
                if !self.colliders.is_occupied(other) {
                    continue;
                }
                for a in range.clone() {
                    for b in self.colliders.range(other) {
                        self.push_if_near(a, b, skin, &mut pairs);
                    }
                }
            }
        }
        pairs.sort_unstable();
        pairs
    }

    #[inline]
    fn push_if_near(&self, a: usize, b: usize, skin: f64, out: &mut Vec<(u32, u32)>) {
        let pa = &self.colliders.packed[a];
        let pb = &self.colliders.packed[b];
        let dx = pa.x - pb.x;
        let dy = pa.y - pb.y;
        let dz = pa.z - pb.z;
        let reach = pa.r + pb.r + skin;
        if dx * dx + dy * dy + dz * dz < reach * reach {
            let (i, j) = (self.colliders.entries[a], self.colliders.entries[b]);
            out.push((i.min(j), i.max(j)));
        }
    }

    /// Tracer-collider overlap events computed from live particle state
    /// against the (possibly slightly stale) collider buckets. Exact as
    /// long as collider drift since their rebuild stays within the grid
    /// slack. Events are sorted by `(i, j)`.
    pub fn tracer_events_live(&self, particles: &[Particle], parallel: bool) -> Vec<CollisionEvent> {
        let run = |chunk: &[u32]| {
            let mut local = Vec::new();
            let mut candidates: Vec<(u32, PackedSphere)> = Vec::new();
            for &cell in chunk {
                self.tracer_pairs_in_cell(cell as usize, particles, &mut candidates, &mut local);
            }
            local
        };
        let mut events = if parallel {
            self.tracers
                .occupied
                .par_chunks(16)
                .map(run)
                .reduce(Vec::new, |mut a, mut b| {
                    a.append(&mut b);
                    a
                })
        } else {
            run(&self.tracers.occupied)
        };
        events.sort_by_key(|e| (e.i, e.j));
        events
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    /// Number of particles currently indexed.
    pub fn indexed_count(&self) -> usize {
        self.indexed
    }

    #[inline]
    fn coords(&self, p: Vec3) -> (usize, usize, usize) {
        // +1 shifts into the interior; clamping keeps stray proposals out
        // of the guard border.
        let cx = ((p.x - self.origin.x) * self.inv_cell).floor() + 1.0;
        let cy = ((p.y - self.origin.y) * self.inv_cell).floor() + 1.0;
        let cz = ((p.z - self.origin.z) * self.inv_cell).floor() + 1.0;
        (
            (cx.max(1.0) as usize).min(self.nx - 2),
            (cy.max(1.0) as usize).min(self.ny - 2),
            (cz.max(1.0) as usize).min(self.nz - 2),
        )
    }

    #[inline]
    fn cell_index(&self, p: Vec3) -> usize {
        let (ix, iy, iz) = self.coords(p);
        ix + self.nx * (iy + self.ny * iz)
    }

    /// Grid cell holding a particle, for consistency checks.
    pub fn cell_of(&self, idx: usize) -> Option<usize> {
        self.cell_of.get(idx).and_then(|&c| (c != NO_CELL).then_some(c as usize))
    }

    /// Exact set of overlapping pairs `(i, j)`, `i < j`, each reported once,
    /// sorted by `(i, j)`. Tracer-tracer pairs are skipped.
    pub fn detect_collisions(&self, particles: &[Particle]) -> Vec<CollisionEvent> {
        self.detect_collisions_with(particles, true)
    }

    /// Detection with an explicit execution strategy; results are identical
    /// either way, events come out sorted by `(i, j)`.
    pub fn detect_collisions_with(&self, particles: &[Particle], parallel: bool) -> Vec<CollisionEvent> {
        let mut events = if parallel {
            // Collider-collider pass: half stencil over occupied cells only.
            let mut events: Vec<CollisionEvent> = self
                .colliders
                .occupied
                .par_chunks(64)
                .map(|chunk| {
                    let mut local = Vec::new();
                    for &cell in chunk {
                        self.collider_pairs_in_cell(cell as usize, &mut local);
                    }
                    local
                })
                .reduce(Vec::new, |mut a, mut b| {
                    a.append(&mut b);
                    a
                });
            // Tracer-collider pass: tracers sharing a cell share its
            // candidate list, gathered once per occupied cell.
            let mut tracer_events: Vec<CollisionEvent> = self
                .tracers
                .occupied
                .par_chunks(16)
                .map(|chunk| {
                    let mut local = Vec::new();
                    let mut candidates: Vec<(u32, PackedSphere)> = Vec::new();
                    for &cell in chunk {
                        self.tracer_pairs_in_cell(cell as usize, particles, &mut candidates, &mut local);
                    }
                    local
                })
                .reduce(Vec::new, |mut a, mut b| {
                    a.append(&mut b);
                    a
                });
            events.append(&mut tracer_events);
            events
        } else {
            let mut events = Vec::new();
            for &cell in &self.colliders.occupied {
                self.collider_pairs_in_cell(cell as usize, &mut events);
            }
            let mut candidates: Vec<(u32, PackedSphere)> = Vec::new();
            for &cell in &self.tracers.occupied {
                self.tracer_pairs_in_cell(cell as usize, particles, &mut candidates, &mut events);
            }
            events
        };
        events.sort_by_key(|e| (e.i, e.j));
        events
    }

    fn collider_pairs_in_cell(&self, cell: usize, out: &mut Vec<CollisionEvent>) {
        let range = self.colliders.range(cell);
        if range.is_empty() {
            return;
        }
        // In-cell pairs.
        for a in range.clone() {
            for b in a + 1..range.end {
                self.emit_if_overlapping(a, b, out);
            }
        }
        // Forward half stencil: 13 neighbor cells by constant offset.
        for &off in &self.half_offsets {
            let other = (cell as isize + off) as usize;
            if !self.colliders.is_occupied(other) {
                continue;
            }
            let other_range = self.colliders.range(other);
            for a in range.clone() {
                for b in other_range.clone() {
                    self.emit_if_overlapping(a, b, out);
                }
            }
        }
    }

    #[inline]
    fn emit_if_overlapping(&self, a: usize, b: usize, out: &mut Vec<CollisionEvent>) {
        let pa = &self.colliders.packed[a];
        let pb = &self.colliders.packed[b];
        if !pa.overlaps(pb) {
            return;
        }
        let ia = self.colliders.entries[a];
        let ib = self.colliders.entries[b];
        out.push(event_from_packed(ia, ib, pa, pb));
    }

    fn tracer_pairs_in_cell(
        &self,
        cell: usize,
        particles: &[Particle],
        candidates: &mut Vec<(u32, PackedSphere)>,
        out: &mut Vec<CollisionEvent>,
    ) {
        candidates.clear();
        for &off in &self.full_offsets {
            let neighbor = (cell as isize + off) as usize;
            if !self.colliders.is_occupied(neighbor) {
                continue;
            }
            for b in self.colliders.range(neighbor) {
                // Live position: the bucket snapshot may be a few steps old.
                let k = self.colliders.entries[b];
                let q = &particles[k as usize];
                if !q.is_free() {
                    continue;
                }
                candidates.push((k, PackedSphere::of(q)));
            }
        }
        if candidates.is_empty() {
            return;
        }
        for t in self.tracers.range(cell) {
            let it = self.tracers.entries[t];
            let q = &particles[it as usize];
            if !q.is_free() {
                continue;
            }
            let pt = PackedSphere::of(q);
            for (ib, pb) in candidates.iter() {
                if pt.overlaps(pb) {
                    out.push(event_from_packed(it, *ib, &pt, pb));
                }
            }
        }
    }

    /// All overlap pairs touching one particle, computed from live particle
    /// state; used by resolution sweeps to re-check only what moved. The
    /// caller deduplicates when both endpoints were dirty.
    pub fn pairs_touching(&self, idx: usize, particles: &[Particle], out: &mut Vec<CollisionEvent>) {
        let tracer = self.is_tracer[idx];
        let p = &particles[idx];
        let home = self.cell_index(p.position);
        for &off in &self.full_offsets {
            let cell = (home as isize + off) as usize;
            if !self.colliders.is_occupied(cell) && (tracer || !self.tracers.is_occupied(cell)) {
                continue;
            }
            for b in self.colliders.range(cell) {
                let k = self.colliders.entries[b] as usize;
                if k == idx || !particles[k].is_free() {
                    continue;
                }
                if let Some(e) = overlap_event(idx as u32, k as u32, p, &particles[k]) {
                    out.push(e);
                }
            }
            if !tracer {
                for b in self.tracers.range(cell) {
                    let k = self.tracers.entries[b] as usize;
                    if k == idx || !particles[k].is_free() {
                        continue;
                    }
                    if let Some(e) = overlap_event(idx as u32, k as u32, p, &particles[k]) {
                        out.push(e);
                    }
                }
            }
        }
    }
}

/// Forward neighbors covering each unordered cell pair exactly once.
const HALF_STENCIL: &[(isize, isize, isize)] = &[
    (1, 0, 0),
    (-1, 1, 0),
    (0, 1, 0),
    (1, 1, 0),
    (-1, -1, 1),
    (0, -1, 1),
    (1, -1, 1),
    (-1, 0, 1),
    (0, 0, 1),
    (1, 0, 1),
    (-1, 1, 1),
    (0, 1, 1),
    (1, 1, 1),
];

#[inline]
fn event_from_packed(i: u32, j: u32, a: &PackedSphere, b: &PackedSphere) -> CollisionEvent {
    let sum = a.r + b.r;
    let (i, j, dx, dy, dz) = if i < j {
        (i, j, a.x - b.x, a.y - b.y, a.z - b.z)
    } else {
        (j, i, b.x - a.x, b.y - a.y, b.z - a.z)
    };
    let dist = (dx * dx + dy * dy + dz * dz).sqrt();
    let normal = if dist > 0.0 {
        Vec3::new(dx / dist, dy / dist, dz / dist)
    } else {
        Vec3::new(0.0, 0.0, 1.0)
    };
    CollisionEvent { i, j, normal, overlap: sum - dist }
}

/// Builds the event for a pair if the spheres interpenetrate.
#[inline]
pub fn overlap_event(i: u32, j: u32, a: &Particle, b: &Particle) -> Option<CollisionEvent> {
    let sum = a.radius_um + b.radius_um;
    let delta = a.position - b.position;
    let dist_sq = delta.norm_squared();
    if dist_sq >= sum * sum {
        return None;
    }
    let dist = dist_sq.sqrt();
    let (i, j, delta) = if i < j { (i, j, delta) } else { (j, i, -delta) };
    let normal = if dist > 0.0 {
        delta * (1.0 / dist)
    } else {
        Vec3::new(0.0, 0.0, 1.0)
    };
    Some(CollisionEvent { i, j, normal, overlap: sum - dist })
}

/// Pushes an overlapping pair apart along the current contact normal until
/// the gap is `SEPARATION_EPS_UM`, splitting the displacement in inverse
/// proportion to radius cubed. A pair already separated by earlier
/// resolutions in the same sweep is left alone. Returns the displacement
/// magnitude applied to each endpoint (zero when nothing moved).
pub fn resolve_collision(event: &CollisionEvent, particles: &mut [Particle]) -> (f64, f64) {
    let (i, j) = (event.i as usize, event.j as usize);
    let target = particles[i].radius_um + particles[j].radius_um + SEPARATION_EPS_UM;
    let delta = particles[i].position - particles[j].position;
    let dist = delta.norm();
    if dist >= target {
        return (0.0, 0.0);
    }
    let normal = if dist > 0.0 { delta * (1.0 / dist) } else { event.normal };
    let needed = target - dist;
    let mi = particles[i].radius_um.powi(3);
    let mj = particles[j].radius_um.powi(3);
    let wi = mj / (mi + mj);
    let wj = mi / (mi + mj);
    particles[i].position += normal * (needed * wi);
    particles[j].position += -normal * (needed * wj);
    (needed * wi, needed * wj)
}

/// Outcome of the wall/outlet pass for one particle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WallOutcome {
    Unchanged,
    Reflected,
    Exited,
}

/// Applies the boundary rules: positions beyond either vessel end mark the
/// particle exited; radial excursions beyond `R - a` are specularly mirrored
/// about the contact annulus, leaving azimuth and axial coordinate alone.
pub fn reflect_at_wall(particle: &mut Particle, geometry: &VesselGeometry) -> WallOutcome {
    if particle.position.z < 0.0 || particle.position.z > geometry.length_um {
        particle.status = ParticleStatus::Exited;
        return WallOutcome::Exited;
    }
    let r_max = geometry.radius_um - particle.radius_um;
    let r = particle.position.radial();
    if r <= r_max {
        return WallOutcome::Unchanged;
    }
    // Fold the radial coordinate into [-r_max, r_max]; a negative value
    // means the path crossed the axis, which the x/y scaling handles.
    let mut rr = r;
    loop {
        if rr > r_max {
            rr = 2.0 * r_max - rr;
        } else if rr < -r_max {
            rr = -2.0 * r_max - rr;
        } else {
            break;
        }
    }
    let scale = rr / r;
    particle.position.x *= scale;
    particle.position.y *= scale;
    WallOutcome::Reflected
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::CylindricalPosition;
    use rand::Rng;

    fn sphere(id: u64, position: Vec3, radius: f64) -> Particle {
        Particle {
            id,
            species: 0,
            position,
            radius_um: radius,
            diffusivity_um2_per_us: 0.0,
            status: ParticleStatus::Free,
        }
    }

    fn grid_over(particles: &[Particle], cell_size: f64) -> SpatialGrid {
        let bounds = GridBounds::covering(particles, cell_size);
        SpatialGrid::build(particles, cell_size, bounds, None).unwrap()
    }

    /// All-pairs reference detector.
    fn brute_force_pairs(particles: &[Particle]) -> Vec<(u32, u32)> {
        let mut pairs = Vec::new();
        for i in 0..particles.len() {
            if !particles[i].is_free() {
                continue;
            }
            for j in i + 1..particles.len() {
                if !particles[j].is_free() {
                    continue;
                }
                let sum = particles[i].radius_um + particles[j].radius_um;
                if (particles[i].position - particles[j].position).norm_squared() < sum * sum {
                    pairs.push((i as u32, j as u32));
                }
            }
        }
        pairs
    }

    #[test]
    fn empty_scene_builds_empty_grid() {
        let grid = grid_over(&[], 10.0);
        assert_eq!(grid.indexed_count(), 0);
        assert!(grid.detect_collisions(&[]).is_empty());
    }

    #[test]
    fn cell_size_below_max_diameter_is_rejected() {
        let particles = vec![sphere(0, Vec3::ZERO, 6.0)];
        let bounds = GridBounds::covering(&particles, 10.0);
        let err = SpatialGrid::build(&particles, 10.0, bounds, None).unwrap_err();
        assert!(matches!(err, SimError::CellSizeTooSmall { .. }));
    }

    #[test]
    fn nearby_pair_is_enumerable() {
        let particles = vec![
            sphere(0, Vec3::new(0.0, 0.0, 0.0), 0.6),
            sphere(1, Vec3::new(1.0, 0.0, 0.0), 0.6),
        ];
        let grid = grid_over(&particles, 10.0);
        let events = grid.detect_collisions(&particles);
        assert_eq!(events.len(), 1);
        assert_eq!((events[0].i, events[0].j), (0, 1));
    }

    #[test]
    fn indexed_count_is_conserved() {
        let mut rng = crate::rng::stream(5, 1, 0, 0);
        let particles: Vec<Particle> = (0..10_000)
            .map(|k| {
                sphere(
                    k,
                    Vec3::new(
                        rng.gen_range(-50.0..50.0),
                        rng.gen_range(-50.0..50.0),
                        rng.gen_range(0.0..500.0),
                    ),
                    rng.gen_range(0.1..5.0),
                )
            })
            .collect();
        let grid = grid_over(&particles, 10.0);
        assert_eq!(grid.indexed_count(), 10_000);
    }

    #[test]
    fn separated_spheres_do_not_collide() {
        let particles = vec![
            sphere(0, Vec3::ZERO, 1.0),
            sphere(1, Vec3::new(2.5, 0.0, 0.0), 1.0),
        ];
        let grid = grid_over(&particles, 10.0);
        assert!(grid.detect_collisions(&particles).is_empty());
    }

    #[test]
    fn overlap_depth_matches_definition() {
        let (ai, aj) = (1.2, 0.8);
        let dist = 0.9 * (ai + aj);
        let particles = vec![
            sphere(0, Vec3::ZERO, ai),
            sphere(1, Vec3::new(dist, 0.0, 0.0), aj),
        ];
        let grid = grid_over(&particles, 10.0);
        let events = grid.detect_collisions(&particles);
        assert_eq!(events.len(), 1);
        assert!((events[0].overlap - 0.1 * (ai + aj)).abs() < 1e-12);
        assert!((events[0].normal.norm() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn grid_matches_brute_force_on_random_scenes() {
        let mut rng = crate::rng::stream(11, 2, 0, 0);
        for scene in 0..20 {
            let n = rng.gen_range(2..500);
            let particles: Vec<Particle> = (0..n)
                .map(|k| {
                    sphere(
                        k,
                        Vec3::new(
                            rng.gen_range(-30.0..30.0),
                            rng.gen_range(-30.0..30.0),
                            rng.gen_range(0.0..60.0),
                        ),
                        rng.gen_range(0.05..2.0),
                    )
                })
                .collect();
            let grid = grid_over(&particles, 4.0);
            let got: Vec<(u32, u32)> =
                grid.detect_collisions(&particles).iter().map(|e| (e.i, e.j)).collect();
            assert_eq!(got, brute_force_pairs(&particles), "scene {scene}");
        }
    }

    #[test]
    fn tracer_pairs_are_skipped() {
        let particles = vec![
            sphere(0, Vec3::ZERO, 0.5),
            sphere(1, Vec3::new(0.4, 0.0, 0.0), 0.5),
            sphere(2, Vec3::new(0.0, 0.4, 0.0), 3.0),
        ];
        let tracers = vec![true, true, false];
        let bounds = GridBounds::covering(&particles, 10.0);
        let grid = SpatialGrid::build(&particles, 10.0, bounds, Some(&tracers)).unwrap();
        let events = grid.detect_collisions(&particles);
        let pairs: Vec<(u32, u32)> = events.iter().map(|e| (e.i, e.j)).collect();
        // 0-1 is tracer-tracer and ignored; both tracers hit the collider.
        assert_eq!(pairs, vec![(0, 2), (1, 2)]);
    }

    #[test]
    fn pairs_touching_sees_both_classes() {
        let particles = vec![
            sphere(0, Vec3::new(0.0, 0.0, 0.0), 1.0),
            sphere(1, Vec3::new(1.5, 0.0, 0.0), 1.0),
            sphere(2, Vec3::new(0.0, 1.2, 0.0), 0.5),
        ];
        let tracers = vec![false, false, true];
        let bounds = GridBounds::covering(&particles, 10.0);
        let grid = SpatialGrid::build(&particles, 10.0, bounds, Some(&tracers)).unwrap();
        let mut events = Vec::new();
        grid.pairs_touching(0, &particles, &mut events);
        let mut pairs: Vec<(u32, u32)> = events.iter().map(|e| (e.i, e.j)).collect();
        pairs.sort_unstable();
        assert_eq!(pairs, vec![(0, 1), (0, 2)]);
    }

    #[test]
    fn equal_radii_split_displacement_evenly() {
        let mut particles = vec![
            sphere(0, Vec3::ZERO, 1.0),
            sphere(1, Vec3::new(1.8, 0.0, 0.0), 1.0),
        ];
        let event = overlap_event(0, 1, &particles[0], &particles[1]).unwrap();
        assert!((event.overlap - 0.2).abs() < 1e-12);
        assert!(resolve_collision(&event, &mut particles).0 > 0.0);
        let half = 0.1 + SEPARATION_EPS_UM / 2.0;
        assert!((particles[0].position.x - (-half)).abs() < 1e-12);
        assert!((particles[1].position.x - (1.8 + half)).abs() < 1e-12);
        // Post-state: no residual overlap.
        assert!(overlap_event(0, 1, &particles[0], &particles[1]).is_none());
    }

    #[test]
    fn mass_split_leaves_heavy_sphere_in_place() {
        // Carrier vs red cell: the carrier absorbs essentially the whole
        // separation, weights (a_rbc^3, a_c^3) / (a_rbc^3 + a_c^3).
        let a_c = 0.00175;
        let a_rbc = 3.5;
        let mut particles = vec![
            sphere(0, Vec3::new(3.0, 0.0, 0.0), a_c),
            sphere(1, Vec3::ZERO, a_rbc),
        ];
        let event = overlap_event(0, 1, &particles[0], &particles[1]).unwrap();
        resolve_collision(&event, &mut particles);
        let needed = a_c + a_rbc + SEPARATION_EPS_UM - 3.0;
        let w_carrier = a_rbc.powi(3) / (a_c.powi(3) + a_rbc.powi(3));
        assert!(w_carrier > 1.0 - 1e-9);
        assert!((particles[0].position.x - (3.0 + needed * w_carrier)).abs() < 1e-12);
        assert!(particles[1].position.x.abs() < needed * (1.0 - w_carrier) + 1e-15);
    }

    #[test]
    fn interior_particle_is_unchanged_by_wall() {
        let geometry = VesselGeometry::new(30.0, 1350.0);
        let mut p = sphere(0, Vec3::new(5.0, 5.0, 100.0), 1.0);
        assert_eq!(reflect_at_wall(&mut p, &geometry), WallOutcome::Unchanged);
        assert_eq!(p.position, Vec3::new(5.0, 5.0, 100.0));
    }

    #[test]
    fn radial_excursion_is_mirrored() {
        let geometry = VesselGeometry::new(30.0, 1350.0);
        let a = 1.0;
        let start = CylindricalPosition::new(1.1, (30.0 - a) + 0.3, 100.0);
        let mut p = sphere(0, start.to_cartesian(), a);
        assert_eq!(reflect_at_wall(&mut p, &geometry), WallOutcome::Reflected);
        let end = CylindricalPosition::from_cartesian(p.position);
        assert!((end.r - ((30.0 - a) - 0.3)).abs() < 1e-12);
        assert!((end.phi - 1.1).abs() < 1e-12);
        assert_eq!(end.z, 100.0);
    }

    #[test]
    fn outlet_crossing_exits() {
        let geometry = VesselGeometry::new(30.0, 1350.0);
        let mut p = sphere(0, Vec3::new(0.0, 0.0, 1351.0), 1.0);
        assert_eq!(reflect_at_wall(&mut p, &geometry), WallOutcome::Exited);
        assert_eq!(p.status, ParticleStatus::Exited);
        let mut q = sphere(1, Vec3::new(0.0, 0.0, -0.5), 1.0);
        assert_eq!(reflect_at_wall(&mut q, &geometry), WallOutcome::Exited);
    }
}
