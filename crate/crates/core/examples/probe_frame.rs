use hemocomm_core::config::SimulationConfig;
use hemocomm_core::experiment::{run_frame, ExperimentKind, ExperimentSpec};

fn main() {
    let mut cfg = SimulationConfig::desk_scale();
    cfg.threads = 2;
    cfg.seed = 1;
    cfg.duration_us = 600_000.0;
    cfg.transmitter.position.r = 27.125;
    cfg.encoder.frame_bits = 3;
    cfg.chain.frame_bits = 3;
    let mut spec = ExperimentSpec::new(ExperimentKind::Frame, cfg);
    spec.bits = vec![true, false, true];
    let t = std::time::Instant::now();
    let r = run_frame(&spec, 0, None).unwrap();
    let mut aligned_exact = 0;
    let mut synced = 0;
    for report in &r.per_cell {
        let row = &r.map.rows[report.cell];
        if report.synced {
            synced += 1;
        }
        if row.ring_position == 0 && row.delta_l_um.abs() <= 500.0 {
            if let Some(bits) = &report.decoded_bits {
                let s: String = bits.iter().map(|&b| if b { '1' } else { '0' }).collect();
                println!("cell dL={:+.1} decoded {s} (frames {})", row.delta_l_um, report.frames_completed);
                if bits == &spec.bits {
                    aligned_exact += 1;
                }
            }
        }
    }
    println!(
        "synced={synced} aligned_exact={aligned_exact} total_assim={} elapsed={:.0}s",
        r.ledger.assimilated,
        t.elapsed().as_secs_f64()
    );
}
