//! Digital receiver chain and on-off-keying transmitter schedule.
//!
//! The chain at every receiver cell is `WindowCounter -> MovingSumFilter ->
//! SyncThresholdDetector`. The counter bins assimilation events into
//! contiguous windows of duration `T` anchored at simulation time zero and
//! emits a reading `c_n` per window. The moving-sum filter outputs
//! `f_n = c_n + c_{n-1} + ... + c_{n-P}` over the last `P + 1` readings.
//! The detector synchronizes on the first window where `f_n >= Th`, then
//! samples `f` every `(P + 1)` windows to decide one bit per sample,
//! `N` bits per frame, followed by a one-sample guard interval before it
//! returns to the idle search.

use serde::{Deserialize, Serialize};

use crate::error::ChainError;

/// Transmitter pulse-train parameters: `burst_size` carriers per pulse,
/// `frame_bits` information pulses after the sync pulse, `pulse_period_us`
/// between consecutive pulse slots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub burst_size: u64,
    pub frame_bits: usize,
    pub pulse_period_us: f64,
}

/// One scheduled carrier release.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Release {
    pub time_us: f64,
    pub count: u64,
}

/// Ordered release schedule for one frame, starting with the mandatory
/// synchronization pulse at t = 0.
#[derive(Debug, Clone, PartialEq)]
pub struct PulseTrain {
    pub releases: Vec<Release>,
    pub bits: Vec<bool>,
}

impl PulseTrain {
    /// A single burst at t = 0 and nothing else.
    pub fn impulse(burst_size: u64) -> Self {
        PulseTrain {
            releases: vec![Release { time_us: 0.0, count: burst_size }],
            bits: Vec::new(),
        }
    }

    pub fn total_carriers(&self) -> u64 {
        self.releases.iter().map(|r| r.count).sum()
    }
}

/// On-off keying: bit 1 is a burst of `burst_size` carriers in its pulse
/// slot, bit 0 releases nothing. The sync pulse always occupies slot 0.
pub fn encode_ook(bits: &[bool], cfg: &EncoderConfig) -> PulseTrain {
    let mut releases = vec![Release { time_us: 0.0, count: cfg.burst_size }];
    for (k, &bit) in bits.iter().enumerate() {
        if bit {
            releases.push(Release {
                time_us: (k + 1) as f64 * cfg.pulse_period_us,
                count: cfg.burst_size,
            });
        }
    }
    PulseTrain { releases, bits: bits.to_vec() }
}

/// Receiver chain parameters: window duration `T`, delay-line count `P`,
/// decision threshold `Th` and frame length `N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReceiverChainConfig {
    pub window_us: f64,
    pub delay_lines: usize,
    pub threshold: u64,
    pub frame_bits: usize,
}

impl ReceiverChainConfig {
    /// Interval between detector samples (and between transmit pulse slots):
    /// `(P + 1) * T`.
    pub fn sampling_period_us(&self) -> f64 {
        (self.delay_lines + 1) as f64 * self.window_us
    }
}

/// Bins events into contiguous `[.., (n-1)T)`, `[(n-1)T, nT)` windows.
#[derive(Debug, Clone)]
pub struct WindowCounter {
    window_us: f64,
    closed: u64,
    count: u64,
}

impl WindowCounter {
    pub fn new(window_us: f64) -> Self {
        WindowCounter { window_us, closed: 0, count: 0 }
    }

    /// Start time of the currently open window.
    pub fn window_start_us(&self) -> f64 {
        self.closed as f64 * self.window_us
    }

    /// End time of the currently open window.
    pub fn window_end_us(&self) -> f64 {
        (self.closed + 1) as f64 * self.window_us
    }

    /// 1-based index of the currently open window.
    pub fn window_index(&self) -> u64 {
        self.closed + 1
    }

    /// Counts an event into the open window. Events must not precede the
    /// window start; events at or beyond the window end are rejected too,
    /// the caller closes windows until the event fits.
    pub fn ingest(&mut self, time_us: f64) -> Result<(), ChainError> {
        let start = self.window_start_us();
        if time_us < start || time_us >= self.window_end_us() {
            return Err(ChainError::EventOrder { time_us, window_start_us: start });
        }
        self.count += 1;
        Ok(())
    }

    /// Whether `time_us` lies beyond the open window (a close is needed).
    pub fn needs_close(&self, time_us: f64) -> bool {
        time_us >= self.window_end_us()
    }

    /// Closes the open window, returning its reading `c_n` and resetting
    /// the accumulator.
    pub fn close_window(&mut self) -> u64 {
        let c = self.count;
        self.count = 0;
        self.closed += 1;
        c
    }
}

/// Running sum over the last `P + 1` counter readings; readings before the
/// start of time count as zero.
#[derive(Debug, Clone)]
pub struct MovingSumFilter {
    ring: Vec<u64>,
    pos: usize,
    sum: u64,
}

impl MovingSumFilter {
    pub fn new(delay_lines: usize) -> Self {
        MovingSumFilter { ring: vec![0; delay_lines + 1], pos: 0, sum: 0 }
    }

    /// Pushes `c_n`, returns `f_n`.
    pub fn push(&mut self, c: u64) -> u64 {
        self.sum -= self.ring[self.pos];
        self.ring[self.pos] = c;
        self.sum += c;
        self.pos = (self.pos + 1) % self.ring.len();
        self.sum
    }

    pub fn output(&self) -> u64 {
        self.sum
    }
}

/// Detector state; `countdown` is the number of windows left before the
/// next action (bit sample or guard expiry).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum StdMode {
    Idle,
    Receiving { next_bit: usize, countdown: usize },
    Guard { countdown: usize },
}

impl std::fmt::Display for StdMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            StdMode::Idle => write!(f, "idle"),
            StdMode::Receiving { next_bit, .. } => write!(f, "receiving:{next_bit}"),
            StdMode::Guard { .. } => write!(f, "guard"),
        }
    }
}

/// A completed frame: the window where synchronization fired and the `N`
/// decoded bits.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Frame {
    pub sync_window: u64,
    pub bits: Vec<bool>,
}

/// What the detector did while processing one window.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StdAction {
    None,
    Synchronized,
    Bit(bool),
    FrameComplete,
}

/// Synchronization-and-threshold detector.
#[derive(Debug, Clone)]
pub struct SyncThresholdDetector {
    threshold: u64,
    delay_lines: usize,
    frame_bits: usize,
    mode: StdMode,
    current_sync: u64,
    current_bits: Vec<bool>,
    frames: Vec<Frame>,
    sync_count: u64,
    emitted_one_bits: u64,
}

impl SyncThresholdDetector {
    pub fn new(cfg: &ReceiverChainConfig) -> Self {
        SyncThresholdDetector {
            threshold: cfg.threshold,
            delay_lines: cfg.delay_lines,
            frame_bits: cfg.frame_bits,
            mode: StdMode::Idle,
            current_sync: 0,
            current_bits: Vec::new(),
            frames: Vec::new(),
            sync_count: 0,
            emitted_one_bits: 0,
        }
    }

    pub fn mode(&self) -> StdMode {
        self.mode
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn sync_count(&self) -> u64 {
        self.sync_count
    }

    pub fn emitted_one_bits(&self) -> u64 {
        self.emitted_one_bits
    }

    /// Processes the filter output for one closed window. Must be called for
    /// every window in order. A guard interval that expires on this window
    /// falls through to the idle check of the same window, mirroring the
    /// "wait, then resume polling" timing of the detector loop.
    pub fn advance(&mut self, window_index: u64, f: u64) -> StdAction {
        loop {
            match self.mode {
                StdMode::Guard { countdown } => {
                    let countdown = countdown - 1;
                    if countdown == 0 {
                        self.mode = StdMode::Idle;
                        continue;
                    }
                    self.mode = StdMode::Guard { countdown };
                    return StdAction::None;
                }
                StdMode::Idle => {
                    if f >= self.threshold {
                        self.sync_count += 1;
                        self.current_sync = window_index;
                        self.current_bits.clear();
                        self.mode = StdMode::Receiving {
                            next_bit: 1,
                            countdown: self.delay_lines + 1,
                        };
                        return StdAction::Synchronized;
                    }
                    return StdAction::None;
                }
                StdMode::Receiving { next_bit, countdown } => {
                    let countdown = countdown - 1;
                    if countdown > 0 {
                        self.mode = StdMode::Receiving { next_bit, countdown };
                        return StdAction::None;
                    }
                    let bit = f >= self.threshold;
                    if bit {
                        self.emitted_one_bits += 1;
                    }
                    self.current_bits.push(bit);
                    if self.current_bits.len() == self.frame_bits {
                        self.frames.push(Frame {
                            sync_window: self.current_sync,
                            bits: std::mem::take(&mut self.current_bits),
                        });
                        self.mode = StdMode::Guard { countdown: self.delay_lines + 1 };
                        return StdAction::FrameComplete;
                    }
                    self.mode = StdMode::Receiving {
                        next_bit: next_bit + 1,
                        countdown: self.delay_lines + 1,
                    };
                    return StdAction::Bit(bit);
                }
            }
        }
    }
}

/// One row of the per-cell chain trace.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub window_index: u64,
    pub t_end_us: f64,
    pub c: u64,
    pub f: u64,
    pub mode: StdMode,
    pub emitted_bit: Option<bool>,
}

/// Everything the chain produced over a run.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainOutput {
    pub frames: Vec<Frame>,
    pub final_mode: StdMode,
    pub sync_count: u64,
    pub emitted_one_bits: u64,
    pub windows_processed: u64,
}

impl ChainOutput {
    /// Number of pulses the receiver believes it observed: one per
    /// synchronization plus one per decoded 1-bit.
    pub fn decoded_pulses(&self) -> u64 {
        self.sync_count + self.emitted_one_bits
    }
}

/// Streaming receiver chain over one cell's assimilation event log.
#[derive(Debug, Clone)]
pub struct ReceiverChain {
    counter: WindowCounter,
    filter: MovingSumFilter,
    detector: SyncThresholdDetector,
    trace: Option<Vec<TraceRow>>,
}

impl ReceiverChain {
    pub fn new(cfg: &ReceiverChainConfig) -> Self {
        ReceiverChain {
            counter: WindowCounter::new(cfg.window_us),
            filter: MovingSumFilter::new(cfg.delay_lines),
            detector: SyncThresholdDetector::new(cfg),
            trace: None,
        }
    }

    pub fn with_trace(cfg: &ReceiverChainConfig) -> Self {
        let mut chain = Self::new(cfg);
        chain.trace = Some(Vec::new());
        chain
    }

    fn close_window(&mut self) {
        let index = self.counter.window_index();
        let t_end = self.counter.window_end_us();
        let c = self.counter.close_window();
        let f = self.filter.push(c);
        let action = self.detector.advance(index, f);
        if let Some(trace) = &mut self.trace {
            trace.push(TraceRow {
                window_index: index,
                t_end_us: t_end,
                c,
                f,
                mode: self.detector.mode(),
                emitted_bit: match action {
                    StdAction::Bit(b) => Some(b),
                    StdAction::FrameComplete => self.detector.frames().last().and_then(|fr| fr.bits.last().copied()),
                    _ => None,
                },
            });
        }
    }

    /// Feeds one event; events must arrive in non-decreasing time order.
    /// Closes any windows the event has moved past.
    pub fn push_event(&mut self, time_us: f64) -> Result<(), ChainError> {
        while self.counter.needs_close(time_us) {
            self.close_window();
        }
        self.counter.ingest(time_us)
    }

    /// Closes every window that ends at or before `horizon_us` and returns
    /// the accumulated output.
    pub fn finish(mut self, horizon_us: f64) -> ChainOutput {
        while self.counter.window_end_us() <= horizon_us {
            self.close_window();
        }
        ChainOutput {
            frames: self.detector.frames().to_vec(),
            final_mode: self.detector.mode(),
            sync_count: self.detector.sync_count(),
            emitted_one_bits: self.detector.emitted_one_bits(),
            windows_processed: self.counter.window_index() - 1,
        }
    }

    /// Like [`finish`] but also hands back the trace when enabled.
    pub fn finish_with_trace(mut self, horizon_us: f64) -> (ChainOutput, Vec<TraceRow>) {
        while self.counter.window_end_us() <= horizon_us {
            self.close_window();
        }
        let trace = self.trace.take().unwrap_or_default();
        let out = ChainOutput {
            frames: self.detector.frames().to_vec(),
            final_mode: self.detector.mode(),
            sync_count: self.detector.sync_count(),
            emitted_one_bits: self.detector.emitted_one_bits(),
            windows_processed: self.counter.window_index() - 1,
        };
        (out, trace)
    }
}

/// Runs the full chain over a sorted event log. Events at or beyond the
/// horizon are ignored.
pub fn decode_frames(
    events: &[f64],
    cfg: &ReceiverChainConfig,
    horizon_us: f64,
) -> Result<ChainOutput, ChainError> {
    let mut chain = ReceiverChain::new(cfg);
    for &t in events {
        if t >= horizon_us {
            break;
        }
        chain.push_event(t)?;
    }
    Ok(chain.finish(horizon_us))
}
