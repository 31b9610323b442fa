//! Wall-mounted receiver cells: tiling, receptor coverage, and assimilation
//! of carriers on wall contact.
//!
//! The wall band configured for reception is tiled with square cells of the
//! configured side; each ring wraps the circumference with `round(2*pi*R /
//! side)` equal-angle cells, so the rounding slack is absorbed by a slightly
//! narrower angular width. Every wall point inside the band maps to exactly
//! one cell.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::f64::consts::PI;

use rand::Rng;

use crate::config::{CaptureMode, ReceiverLayout};
use crate::error::SimError;
use crate::geometry::{wrap_angle, wrap_angle_signed, CylindricalPosition, VesselGeometry};

/// One assimilation: when it happened and which carrier was captured.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssimilationRecord {
    pub time_us: f64,
    pub carrier_id: u64,
}

/// A wall patch with its receptor population and event log. `delta_phi` and
/// `delta_l_um` locate the cell relative to the transmitter release point.
#[derive(Debug, Clone)]
pub struct ReceiverCell {
    pub ring_index: u32,
    pub ring_position: u32,
    pub center_phi: f64,
    pub center_z_um: f64,
    pub side_um: f64,
    pub receptor_count: u32,
    pub receptor_radius_um: f64,
    pub delta_phi: f64,
    pub delta_l_um: f64,
    pub events: Vec<AssimilationRecord>,
}

/// Fraction of the cell face covered by receptors: `N_r * pi * a_r^2 /
/// side^2`, clamped to [0, 1]. This is the per-contact assimilation
/// probability.
pub fn coverage_fraction(receptor_count: u32, receptor_radius_um: f64, side_um: f64) -> f64 {
    let covered = receptor_count as f64 * PI * receptor_radius_um * receptor_radius_um;
    (covered / (side_um * side_um)).clamp(0.0, 1.0)
}

impl ReceiverCell {
    pub fn coverage_fraction(&self) -> f64 {
        coverage_fraction(self.receptor_count, self.receptor_radius_um, self.side_um)
    }
}

/// Cumulative per-cell assimilation counts at a horizon.
#[derive(Debug, Clone)]
pub struct ReceptionMap {
    pub horizon_us: f64,
    pub rows: Vec<ReceptionMapRow>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReceptionMapRow {
    pub ring_index: u32,
    pub ring_position: u32,
    pub delta_phi: f64,
    pub delta_l_um: f64,
    pub count: u64,
}

impl ReceptionMap {
    pub fn total(&self) -> u64 {
        self.rows.iter().map(|r| r.count).sum()
    }

    pub fn max_count(&self) -> u64 {
        self.rows.iter().map(|r| r.count).max().unwrap_or(0)
    }

    pub fn argmax(&self) -> Option<&ReceptionMapRow> {
        self.rows.iter().filter(|r| r.count > 0).max_by_key(|r| r.count)
    }

    /// Resultant length of the assimilation mass over azimuth: 1 means all
    /// mass in one direction, 0 a perfectly symmetric spread.
    pub fn circular_concentration(&self) -> f64 {
        let total = self.total();
        if total == 0 {
            return 0.0;
        }
        let (mut cx, mut cy) = (0.0, 0.0);
        for r in &self.rows {
            cx += r.count as f64 * r.delta_phi.cos();
            cy += r.count as f64 * r.delta_phi.sin();
        }
        (cx * cx + cy * cy).sqrt() / total as f64
    }
}

/// Finite-receptor bookkeeping: free receptor counts plus a recycle queue.
#[derive(Debug, Clone)]
struct FiniteReceptors {
    free: Vec<u32>,
    recycle_time_us: Option<f64>,
    // (restore time bits, cell) min-heap; f64 bit order equals numeric order
    // for non-negative times.
    pending: BinaryHeap<Reverse<(u64, u32)>>,
}

/// The full receiver tiling with per-cell event logs.
#[derive(Debug, Clone)]
pub struct ReceiverArray {
    pub cells: Vec<ReceiverCell>,
    pub rings: u32,
    pub cells_per_ring: u32,
    band_min_um: f64,
    side_um: f64,
    sector_width: f64,
    phi_origin: f64,
    finite: Option<FiniteReceptors>,
}

impl ReceiverArray {
    /// Tiles the configured wall band. Cell azimuths are aligned so that one
    /// column is centered on the transmitter azimuth; displacements are
    /// measured from the transmitter release point.
    pub fn tile(
        geometry: &VesselGeometry,
        layout: &ReceiverLayout,
        transmitter: CylindricalPosition,
    ) -> Result<Self, SimError> {
        let side = layout.cell_side_um;
        let circumference = geometry.circumference();
        if side > circumference {
            return Err(SimError::DegenerateTiling { side, circumference });
        }
        let cells_per_ring = (circumference / side).round().max(1.0) as u32;
        let extent = layout.band_max_um - layout.band_min_um;
        let rings = (extent / side).floor().max(0.0) as u32;
        let sector_width = 2.0 * PI / cells_per_ring as f64;
        let phi_origin = transmitter.phi - sector_width / 2.0;

        let mut cells = Vec::with_capacity((rings * cells_per_ring) as usize);
        for ring in 0..rings {
            let center_z = layout.band_min_um + (ring as f64 + 0.5) * side;
            for pos in 0..cells_per_ring {
                let center_phi = wrap_angle(transmitter.phi + pos as f64 * sector_width);
                cells.push(ReceiverCell {
                    ring_index: ring,
                    ring_position: pos,
                    center_phi,
                    center_z_um: center_z,
                    side_um: side,
                    receptor_count: layout.receptor_count,
                    receptor_radius_um: layout.receptor_radius_um,
                    delta_phi: wrap_angle_signed(center_phi - transmitter.phi),
                    delta_l_um: center_z - transmitter.z,
                    events: Vec::new(),
                });
            }
        }
        let finite = match layout.capture {
            CaptureMode::Unlimited => None,
            CaptureMode::Finite { recycle_time_us } => Some(FiniteReceptors {
                free: vec![layout.receptor_count; cells.len()],
                recycle_time_us,
                pending: BinaryHeap::new(),
            }),
        };
        Ok(ReceiverArray {
            cells,
            rings,
            cells_per_ring,
            band_min_um: layout.band_min_um,
            side_um: side,
            sector_width,
            phi_origin,
            finite,
        })
    }

    /// The cell owning a wall point, or None outside the tiled band.
    pub fn cell_at(&self, phi: f64, z_um: f64) -> Option<usize> {
        if z_um < self.band_min_um {
            return None;
        }
        let ring = ((z_um - self.band_min_um) / self.side_um).floor() as i64;
        if ring < 0 || ring >= self.rings as i64 {
            return None;
        }
        let rel = wrap_angle(phi - self.phi_origin);
        let slot = ((rel / self.sector_width).floor() as u32).min(self.cells_per_ring - 1);
        Some(ring as usize * self.cells_per_ring as usize + slot as usize)
    }

    /// Releases receptors whose recycle time has arrived.
    pub fn advance_time(&mut self, now_us: f64) {
        if let Some(fin) = &mut self.finite {
            while let Some(&Reverse((bits, cell))) = fin.pending.peek() {
                if f64::from_bits(bits) > now_us {
                    break;
                }
                fin.pending.pop();
                fin.free[cell as usize] += 1;
            }
        }
    }

    /// Current assimilation probability for a contact on `cell`.
    pub fn capture_probability(&self, cell: usize) -> f64 {
        let c = &self.cells[cell];
        match &self.finite {
            None => c.coverage_fraction(),
            Some(fin) => {
                coverage_fraction(fin.free[cell], c.receptor_radius_um, c.side_um)
            }
        }
    }

    /// Records the capture decision for a wall contact given a uniform draw
    /// `u` in [0, 1). Splitting the draw from the decision keeps replays and
    /// thread counts from changing outcomes.
    pub fn try_capture(&mut self, cell: usize, time_us: f64, carrier_id: u64, u: f64) -> bool {
        if u >= self.capture_probability(cell) {
            return false;
        }
        if let Some(fin) = &mut self.finite {
            fin.free[cell] -= 1;
            if let Some(recycle) = fin.recycle_time_us {
                fin.pending.push(Reverse(((time_us + recycle).to_bits(), cell as u32)));
            }
        }
        self.cells[cell].events.push(AssimilationRecord { time_us, carrier_id });
        true
    }

    /// Assimilation attempt for a carrier whose proposed position penetrates
    /// the wall within this cell's patch: capture with the coverage
    /// probability, otherwise the caller wall-reflects the carrier.
    pub fn attempt_assimilation<R: Rng>(
        &mut self,
        cell: usize,
        time_us: f64,
        carrier_id: u64,
        rng: &mut R,
    ) -> bool {
        let u: f64 = rng.gen();
        self.try_capture(cell, time_us, carrier_id, u)
    }

    /// Per-cell cumulative counts of events with `time <= horizon`.
    pub fn reception_map(&self, horizon_us: f64) -> ReceptionMap {
        let rows = self
            .cells
            .iter()
            .map(|c| ReceptionMapRow {
                ring_index: c.ring_index,
                ring_position: c.ring_position,
                delta_phi: c.delta_phi,
                delta_l_um: c.delta_l_um,
                count: c.events.iter().filter(|e| e.time_us <= horizon_us).count() as u64,
            })
            .collect();
        ReceptionMap { horizon_us, rows }
    }

    pub fn total_assimilated(&self) -> u64 {
        self.cells.iter().map(|c| c.events.len() as u64).sum()
    }

    /// Cells in the column azimuthally aligned with the transmitter.
    pub fn aligned_column(&self) -> Vec<usize> {
        self.cells
            .iter()
            .enumerate()
            .filter(|(_, c)| c.ring_position == 0)
            .map(|(i, _)| i)
            .collect()
    }
}
