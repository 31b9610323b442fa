//! CSV emission and the run manifest.
//!
//! With a fixed seed in deterministic mode the CSV bytes are identical
//! across runs and thread counts; only the manifest's wall-clock line
//! varies.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::chain::TraceRow;
use crate::error::ExperimentError;
use crate::particle::ParticleStatus;
use crate::world::TransitionRecord;
use crate::experiment::{
    ExperimentSpec, ExperimentSummary, FrameResult, ImpulseResult, MeasuredStats, ReplicateOutcome,
    SweepResult, REFERENCE_DELAY_LINES, REFERENCE_MAX_ASSIMILATED_PER_CELL, REFERENCE_THRESHOLD,
};
use crate::reception::{ReceiverArray, ReceptionMap};

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<String, ExperimentError> {
    let path = dir.join(name);
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| ExperimentError::io(parent, e))?;
    }
    fs::write(&path, contents).map_err(|e| ExperimentError::io(&path, e))?;
    Ok(name.to_string())
}

fn bits_string(bits: &[bool]) -> String {
    bits.iter().map(|&b| if b { '1' } else { '0' }).collect()
}

pub fn reception_map_csv(map: &ReceptionMap) -> String {
    let mut out = String::from("ring_index,ring_position,delta_phi_rad,delta_l_um,count\n");
    for r in &map.rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.ring_index, r.ring_position, r.delta_phi, r.delta_l_um, r.count
        );
    }
    out
}

pub fn events_csv(result: &ImpulseResult, receivers: &ReceiverArray) -> String {
    let mut out = String::from("time_us,cell_ring,cell_pos,carrier_id\n");
    for (time, cell, carrier) in result.sorted_events() {
        let c = &receivers.cells[cell];
        let _ = writeln!(out, "{},{},{},{}", time, c.ring_index, c.ring_position, carrier);
    }
    out
}

pub fn transitions_csv(transitions: &[TransitionRecord]) -> String {
    let mut out = String::from("time_us,particle_id,status\n");
    for t in transitions {
        let status = match t.status {
            ParticleStatus::Assimilated => "assimilated",
            ParticleStatus::Exited => "exited",
            ParticleStatus::Free => "free",
        };
        let _ = writeln!(out, "{},{},{}", t.time_us, t.particle_id, status);
    }
    out
}

pub fn trace_csv(rows: &[TraceRow]) -> String {
    let mut out = String::from("window_index,t_n_us,c_n,f_n,std_mode,emitted_bit\n");
    for r in rows {
        let bit = match r.emitted_bit {
            Some(true) => "1",
            Some(false) => "0",
            None => "",
        };
        let _ = writeln!(out, "{},{},{},{},{},{}", r.window_index, r.t_end_us, r.c, r.f, r.mode, bit);
    }
    out
}

pub fn sweep_csv(sweep: &SweepResult, receivers: &ReceiverArray) -> String {
    let mut out =
        String::from("delay_lines,threshold,ring_index,ring_position,delta_phi_rad,delta_l_um,decoded_pulses\n");
    for entry in &sweep.entries {
        for (cell, &pulses) in entry.decoded_pulses.iter().enumerate() {
            let c = &receivers.cells[cell];
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                entry.delay_lines,
                entry.threshold,
                c.ring_index,
                c.ring_position,
                c.delta_phi,
                c.delta_l_um,
                pulses
            );
        }
    }
    out
}

pub fn frames_csv(result: &FrameResult, receivers: &ReceiverArray) -> String {
    let mut out = String::from(
        "ring_index,ring_position,delta_phi_rad,delta_l_um,synced,decoded_bits,hamming_distance\n",
    );
    for report in &result.per_cell {
        let c = &receivers.cells[report.cell];
        let bits = report.decoded_bits.as_deref().map(bits_string).unwrap_or_default();
        let hamming = report.hamming.map(|h| h.to_string()).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            c.ring_index,
            c.ring_position,
            c.delta_phi,
            c.delta_l_um,
            report.synced as u8,
            bits,
            hamming
        );
    }
    out
}

pub fn manifest_text(spec: &ExperimentSpec, summary: &ExperimentSummary) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "tool = hemocomm {}", crate::VERSION);
    let _ = writeln!(out, "experiment = {}", summary.kind);
    let _ = writeln!(out, "seed = {}", summary.seed);
    let _ = writeln!(out, "replicates = {}", summary.replicates);
    let _ = writeln!(out, "horizon_us = {}", summary.horizon_us);
    let _ = writeln!(out, "deterministic = {}", spec.config.deterministic);
    let _ = writeln!(out, "threads = {}", spec.config.threads);
    if !spec.bits.is_empty() {
        let _ = writeln!(out, "bits = {}", bits_string(&spec.bits));
    }
    let _ = writeln!(out, "wall_clock_s = {:.3}", summary.wall_clock_s);
    let m = &summary.measured;
    let _ = writeln!(out, "\n[measured]");
    let _ = writeln!(out, "total_assimilated = {}", m.total_assimilated);
    let _ = writeln!(out, "max_assimilated_per_cell = {}", m.max_assimilated_per_cell);
    let _ = writeln!(out, "released = {}", m.released);
    let _ = writeln!(out, "exited = {}", m.exited);
    let _ = writeln!(out, "mobile_captures = {}", m.mobile_captures);
    if let Some(v) = m.effective_downstream_speed_um_per_us {
        // Emergent transport metric; near-wall releases typically land well
        // below the mean flow speed.
        let _ = writeln!(out, "effective_downstream_speed_mm_per_s = {}", v * 1e3);
    }
    if let (Some(p), Some(th)) = (m.best_delay_lines, m.best_threshold) {
        let _ = writeln!(out, "best_delay_lines = {p}");
        let _ = writeln!(out, "best_threshold = {th}");
        let _ = writeln!(out, "best_capable_cells = {}", m.best_capable_cells.unwrap_or(0));
    }
    if let Some(s) = m.synced_cells {
        let _ = writeln!(out, "synced_cells = {s}");
        let _ = writeln!(out, "zero_error_cells = {}", m.zero_error_cells.unwrap_or(0));
    }
    // Published design point these defaults derive from, for side-by-side
    // comparison with the measured values above.
    let _ = writeln!(out, "\n[reference_design]");
    let _ = writeln!(out, "max_assimilated_per_cell = {REFERENCE_MAX_ASSIMILATED_PER_CELL}");
    let _ = writeln!(out, "delay_lines = {REFERENCE_DELAY_LINES}");
    let _ = writeln!(out, "threshold = {REFERENCE_THRESHOLD}");
    let _ = writeln!(out, "\n[files]");
    for f in &summary.files {
        let _ = writeln!(out, "{f}");
    }
    out
}

/// Writes one replicate's outputs into `dir`, returning the file names.
pub fn emit_replicate(
    outcome: &ReplicateOutcome,
    receivers: &ReceiverArray,
    dir: &Path,
) -> Result<Vec<String>, ExperimentError> {
    let mut files = Vec::new();
    match outcome {
        ReplicateOutcome::Impulse(r) => {
            files.push(write_file(dir, "reception_map.csv", &reception_map_csv(&r.map))?);
            files.push(write_file(dir, "events.csv", &events_csv(r, receivers))?);
            files.push(write_file(dir, "transitions.csv", &transitions_csv(&r.transitions))?);
            for (cell, rows) in &r.traces {
                let c = &receivers.cells[*cell];
                let name = format!("traces/trace_r{:03}_p{:02}.csv", c.ring_index, c.ring_position);
                files.push(write_file(dir, &name, &trace_csv(rows))?);
            }
        }
        ReplicateOutcome::Sweep { base, sweep } => {
            files.push(write_file(dir, "reception_map.csv", &reception_map_csv(&base.map))?);
            files.push(write_file(dir, "events.csv", &events_csv(base, receivers))?);
            files.push(write_file(dir, "sweep.csv", &sweep_csv(sweep, receivers))?);
        }
        ReplicateOutcome::Frame(r) => {
            files.push(write_file(dir, "reception_map.csv", &reception_map_csv(&r.map))?);
            files.push(write_file(dir, "frames.csv", &frames_csv(r, receivers))?);
        }
    }
    Ok(files)
}

/// Runs every replicate of `spec`, writes outputs under `output_dir`
/// (replicates beyond the first go into `repNNN/` subdirectories), and
/// finishes with `config.toml` and `manifest.txt`.
pub fn run_and_emit(
    spec: &ExperimentSpec,
    output_dir: &Path,
    progress: Option<&crate::experiment::ProgressCounter>,
) -> Result<ExperimentSummary, ExperimentError> {
    spec.validate()?;
    let started = std::time::Instant::now();
    fs::create_dir_all(output_dir).map_err(|e| ExperimentError::io(output_dir, e))?;
    // The tiling is deterministic; rebuild it for metadata lookups.
    let receivers = ReceiverArray::tile(
        &spec.config.geometry,
        &spec.config.receiver,
        spec.config.transmitter.position,
    )?;

    let mut files = Vec::new();
    let mut measured = MeasuredStats::default();
    for replicate in 0..spec.replicates {
        let outcome = crate::experiment::run_replicate(spec, replicate as u64, progress)?;
        let (dir, prefix): (PathBuf, String) = if spec.replicates == 1 {
            (output_dir.to_path_buf(), String::new())
        } else {
            let sub = format!("rep{replicate:03}");
            (output_dir.join(&sub), format!("{sub}/"))
        };
        for name in emit_replicate(&outcome, &receivers, &dir)? {
            files.push(format!("{prefix}{name}"));
        }
        merge_measured(&mut measured, &outcome.measured());
    }

    files.push(write_file(output_dir, "config.toml", &spec.config.to_toml())?);
    let mut summary = ExperimentSummary {
        kind: spec.kind,
        seed: spec.config.seed,
        replicates: spec.replicates,
        horizon_us: spec.horizon(),
        wall_clock_s: started.elapsed().as_secs_f64(),
        measured,
        files,
    };
    let manifest = manifest_text(spec, &summary);
    summary.files.push(write_file(output_dir, "manifest.txt", &manifest)?);
    Ok(summary)
}

fn merge_measured(into: &mut MeasuredStats, from: &MeasuredStats) {
    into.total_assimilated += from.total_assimilated;
    into.max_assimilated_per_cell = into.max_assimilated_per_cell.max(from.max_assimilated_per_cell);
    into.released += from.released;
    into.exited += from.exited;
    into.mobile_captures += from.mobile_captures;
    if from.best_delay_lines.is_some() {
        into.best_delay_lines = from.best_delay_lines;
        into.best_threshold = from.best_threshold;
        into.best_capable_cells = from.best_capable_cells;
    }
    if let Some(s) = from.synced_cells {
        *into.synced_cells.get_or_insert(0) += s;
        *into.zero_error_cells.get_or_insert(0) += from.zero_error_cells.unwrap_or(0);
    }
}
