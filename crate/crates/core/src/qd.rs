//! Kinetic Monte Carlo model of an electrically driven quantum dot.
//!
//! The dot is one of four states: empty, exciton (X), biexciton (X2) or a
//! non-emitting shelved configuration. While the drive is on, carriers are
//! captured pairwise (empty -> X -> X2). X2 decays to X by emitting on the X2
//! line and X decays to empty by emitting on the X line. On every return to
//! empty the dot may shelve, unless the drive fully resets it between pulses.
//!
//! Rates are piecewise constant: each period splits into injection, idle and
//! sweep-out intervals, and waiting times are drawn per interval.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Poisson};
use serde::{Deserialize, Serialize};

use crate::exec::Execution;
use crate::{Error, Result};

/// Missing fields take their default values when deserialized.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QDModel {
    pub tau_x_ns: f64,
    pub tau_x2_ns: f64,
    /// Pair capture rate while injection is on, per ns.
    pub capture_rate: f64,
    pub shelve_probability: f64,
    pub unshelve_rate: f64,
    /// Removal rate of every occupied state during sweep-out, per ns.
    pub sweep_rate: f64,
    /// Emission rate of the marker line while shelved. Zero except in
    /// correlation tests that need a line tied to the shelved state.
    pub shelved_marker_rate: f64,
}

impl Default for QDModel {
    fn default() -> Self {
        Self {
            tau_x_ns: 2.1,
            tau_x2_ns: 0.68,
            capture_rate: 10.0,
            shelve_probability: 0.2,
            unshelve_rate: 0.3,
            sweep_rate: 50.0,
            shelved_marker_rate: 0.0,
        }
    }
}

impl QDModel {
    pub fn validate(&self) -> Result<()> {
        for (field, tau) in [("tau_x_ns", self.tau_x_ns), ("tau_x2_ns", self.tau_x2_ns)] {
            if !(tau.is_finite() && tau > 0.0) {
                return Err(Error::invalid(field, format!("must be finite and > 0, got {tau}")));
            }
        }
        for (field, rate) in [
            ("capture_rate", self.capture_rate),
            ("unshelve_rate", self.unshelve_rate),
            ("sweep_rate", self.sweep_rate),
            ("shelved_marker_rate", self.shelved_marker_rate),
        ] {
            if !(rate.is_finite() && rate >= 0.0) {
                return Err(Error::invalid(field, format!("must be finite and >= 0, got {rate}")));
            }
        }
        if !(0.0..=1.0).contains(&self.shelve_probability) {
            return Err(Error::invalid(
                "shelve_probability",
                format!("must be in [0, 1], got {}", self.shelve_probability),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DriveMode {
    Dc,
    Pulsed,
}

/// What the bias between pulses does to the dot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepOut {
    /// Weak field: carriers stay, emission runs to completion.
    #[default]
    None,
    /// Electrons are removed, destroying excitons; shelving still happens.
    ElectronsOnly,
    /// Both carriers are removed: every occupied state, shelved included, returns to empty.
    FullReset,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriveProgram {
    pub mode: DriveMode,
    pub repetition_rate_mhz: f64,
    pub pulse_width_ps: f64,
    pub sweep_out: SweepOut,
    /// Delay from the end of each pulse to the start of sweep-out.
    #[serde(default)]
    pub sweep_delay_ns: f64,
    pub duration_ns: f64,
}

impl DriveProgram {
    pub fn dc(duration_ns: f64) -> Self {
        Self {
            mode: DriveMode::Dc,
            repetition_rate_mhz: 0.0,
            pulse_width_ps: 0.0,
            sweep_out: SweepOut::None,
            sweep_delay_ns: 0.0,
            duration_ns,
        }
    }

    pub fn pulsed(repetition_rate_mhz: f64, pulse_width_ps: f64, sweep_out: SweepOut, duration_ns: f64) -> Self {
        Self {
            mode: DriveMode::Pulsed,
            repetition_rate_mhz,
            pulse_width_ps,
            sweep_out,
            sweep_delay_ns: 0.0,
            duration_ns,
        }
    }

    pub fn period_ns(&self) -> f64 {
        1e3 / self.repetition_rate_mhz
    }

    fn pulse_ns(&self) -> f64 {
        self.pulse_width_ps * 1e-3
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.duration_ns.is_finite() && self.duration_ns > 0.0) {
            return Err(Error::invalid(
                "duration_ns",
                format!("must be finite and > 0, got {}", self.duration_ns),
            ));
        }
        if self.mode == DriveMode::Dc {
            return Ok(());
        }
        if !(self.repetition_rate_mhz.is_finite() && self.repetition_rate_mhz > 0.0) {
            return Err(Error::invalid("repetition_rate_mhz", "must be finite and > 0"));
        }
        let period = self.period_ns();
        if !(self.pulse_width_ps.is_finite() && self.pulse_width_ps > 0.0 && self.pulse_ns() < period) {
            return Err(Error::invalid(
                "pulse_width_ps",
                format!(
                    "must be > 0 and shorter than the {period} ns period, got {} ps",
                    self.pulse_width_ps
                ),
            ));
        }
        if !(self.sweep_delay_ns.is_finite() && self.sweep_delay_ns >= 0.0) {
            return Err(Error::invalid("sweep_delay_ns", "must be finite and >= 0"));
        }
        if self.sweep_out != SweepOut::None && self.pulse_ns() + self.sweep_delay_ns >= period {
            return Err(Error::invalid(
                "sweep_delay_ns",
                "leaves no sweep-out window inside the period",
            ));
        }
        if self.duration_ns < period {
            return Err(Error::invalid(
                "duration_ns",
                format!("{} ns is shorter than one {period} ns period", self.duration_ns),
            ));
        }
        Ok(())
    }

    /// Piecewise-constant rate intervals `(start, end, injecting, sweeping)` covering `[0, duration]`.
    fn segments(&self) -> impl Iterator<Item = (f64, f64, bool, bool)> + '_ {
        let dc = self.mode == DriveMode::Dc;
        let period = if dc { self.duration_ns } else { self.period_ns() };
        let periods = (self.duration_ns / period).ceil() as usize;
        let (pw, sweep_at) = (self.pulse_ns(), self.pulse_ns() + self.sweep_delay_ns);
        let sweeping = self.sweep_out != SweepOut::None;
        (0..periods).flat_map(move |k| {
            let t0 = k as f64 * period;
            let pieces: Vec<(f64, f64, bool, bool)> = if dc {
                vec![(0.0, self.duration_ns, true, false)]
            } else if sweeping {
                vec![
                    (t0, t0 + pw, true, false),
                    (t0 + pw, t0 + sweep_at, false, false),
                    (t0 + sweep_at, t0 + period, false, true),
                ]
            } else {
                vec![(t0, t0 + pw, true, false), (t0 + pw, t0 + period, false, false)]
            };
            pieces
                .into_iter()
                .map(|(a, b, i, s)| (a, b.min(self.duration_ns), i, s))
                .filter(|(a, b, _, _)| b > a)
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Line {
    X,
    X2,
    /// Marker emitted only from the shelved state.
    Shelved,
}

impl Line {
    pub fn name(self) -> &'static str {
        match self {
            Line::X => "X",
            Line::X2 => "X2",
            Line::Shelved => "shelved",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim() {
            "X" | "x" => Some(Line::X),
            "X2" | "x2" => Some(Line::X2),
            "shelved" => Some(Line::Shelved),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Emission {
    pub time_ns: f64,
    pub line: Line,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmissionRecord {
    pub duration_ns: f64,
    /// Time ordered.
    pub events: Vec<Emission>,
}

impl EmissionRecord {
    pub fn times(&self, line: Line) -> Vec<f64> {
        self.events
            .iter()
            .filter(|e| e.line == line)
            .map(|e| e.time_ns)
            .collect()
    }

    pub fn count(&self, line: Line) -> usize {
        self.events.iter().filter(|e| e.line == line).count()
    }

    /// Events of `line` in each drive period.
    pub fn counts_per_period(&self, drive: &DriveProgram, line: Line) -> Vec<u32> {
        let period = drive.period_ns();
        let n = (self.duration_ns / period).ceil() as usize;
        let mut out = vec![0u32; n];
        for e in self.events.iter().filter(|e| e.line == line) {
            let k = ((e.time_ns / period) as usize).min(n.saturating_sub(1));
            out[k] += 1;
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("time_ns,line\n");
        for e in &self.events {
            let _ = writeln!(out, "{},{}", e.time_ns, e.line.name());
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum State {
    Empty,
    X,
    X2,
    Shelved,
}

/// One trajectory. Deterministic in `(model, drive, seed)`.
pub fn simulate(model: &QDModel, drive: &DriveProgram, seed: u64) -> Result<EmissionRecord> {
    model.validate()?;
    drive.validate()?;
    Ok(trajectory(model, drive, seed, 0))
}

/// `n` independent trajectories on separate streams of the same seed, so
/// each trajectory is the same whatever the scheduling.
pub fn simulate_ensemble(
    model: &QDModel,
    drive: &DriveProgram,
    seed: u64,
    n: usize,
    exec: Execution,
) -> Result<Vec<EmissionRecord>> {
    model.validate()?;
    drive.validate()?;
    Ok(exec.map(n, |i| trajectory(model, drive, seed, i as u64)))
}

fn trajectory(model: &QDModel, drive: &DriveProgram, seed: u64, stream: u64) -> EmissionRecord {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let (gx, gx2) = (1.0 / model.tau_x_ns, 1.0 / model.tau_x2_ns);
    let can_shelve = drive.sweep_out != SweepOut::FullReset;
    let mut state = State::Empty;
    let mut events = Vec::new();

    for (start, end, inject, sweep) in drive.segments() {
        let capture = if inject { model.capture_rate } else { 0.0 };
        let removal = if sweep { model.sweep_rate } else { 0.0 };
        let mut t = start;
        loop {
            // (rate, next state, emitted line)
            let channels: [(f64, State, Option<Line>); 3] = match state {
                State::Empty => [(capture, State::X, None), (0.0, state, None), (0.0, state, None)],
                State::X => [
                    (capture, State::X2, None),
                    (gx, State::Empty, Some(Line::X)),
                    (removal, State::Empty, None),
                ],
                State::X2 => [
                    (gx2, State::X, Some(Line::X2)),
                    (removal, State::Empty, None),
                    (0.0, state, None),
                ],
                State::Shelved => {
                    let reset = if drive.sweep_out == SweepOut::FullReset {
                        removal
                    } else {
                        0.0
                    };
                    [
                        (model.unshelve_rate + reset, State::Empty, None),
                        (model.shelved_marker_rate, State::Shelved, Some(Line::Shelved)),
                        (0.0, state, None),
                    ]
                }
            };
            let total: f64 = channels.iter().map(|c| c.0).sum();
            if total <= 0.0 {
                break;
            }
            let dt: f64 = rng.sample::<f64, _>(Exp1) / total;
            if t + dt >= end {
                break;
            }
            t += dt;
            let mut pick = rng.random::<f64>() * total;
            let mut chosen = channels[0];
            for c in channels {
                chosen = c;
                if pick < c.0 {
                    break;
                }
                pick -= c.0;
            }
            let (_, next, line) = chosen;
            if let Some(line) = line {
                events.push(Emission { time_ns: t, line });
            }
            let returned = next == State::Empty && state != State::Shelved;
            state = if returned && can_shelve && rng.random::<f64>() < model.shelve_probability {
                State::Shelved
            } else {
                next
            };
        }
    }
    EmissionRecord {
        duration_ns: drive.duration_ns,
        events,
    }
}

/// Attenuated pulsed laser: a Poisson number of photons per pulse, spread
/// uniformly over the pulse and labelled as the X line. The classical
/// reference for correlation measurements.
pub fn simulate_laser(drive: &DriveProgram, mean_photons_per_pulse: f64, seed: u64) -> Result<EmissionRecord> {
    drive.validate()?;
    if drive.mode != DriveMode::Pulsed {
        return Err(Error::invalid("mode", "a laser reference needs a pulsed drive"));
    }
    if !(mean_photons_per_pulse.is_finite() && mean_photons_per_pulse > 0.0) {
        return Err(Error::invalid("mean_photons_per_pulse", "must be finite and > 0"));
    }
    let poisson =
        Poisson::new(mean_photons_per_pulse).map_err(|e| Error::invalid("mean_photons_per_pulse", e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (period, pw) = (drive.period_ns(), drive.pulse_ns());
    let mut events = Vec::new();
    let mut k = 0;
    while k as f64 * period < drive.duration_ns {
        let n = poisson.sample(&mut rng) as usize;
        let mut times: Vec<f64> = (0..n).map(|_| k as f64 * period + rng.random::<f64>() * pw).collect();
        times.sort_by(f64::total_cmp);
        events.extend(
            times
                .into_iter()
                .filter(|&t| t < drive.duration_ns)
                .map(|time_ns| Emission { time_ns, line: Line::X }),
        );
        k += 1;
    }
    Ok(EmissionRecord {
        duration_ns: drive.duration_ns,
        events,
    })
}

/// Arrival times folded onto one drive period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayProfile {
    pub bin_ns: f64,
    pub period_ns: f64,
    pub counts: Vec<u64>,
}

impl DecayProfile {
    pub fn bin_centre(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.bin_ns
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Maximum-likelihood lifetime of an exponential truncated to `[start, end)`,
    /// using the bin centres in that range.
    pub fn fit_decay(&self, start_ns: f64, end_ns: f64) -> Result<f64> {
        if !(end_ns > start_ns && start_ns >= 0.0) {
            return Err(Error::invalid("fit_window", "need 0 <= start < end"));
        }
        let (mut n, mut sum) = (0.0, 0.0);
        for (i, &c) in self.counts.iter().enumerate() {
            let t = self.bin_centre(i);
            if t >= start_ns && t < end_ns {
                n += c as f64;
                sum += c as f64 * (t - start_ns);
            }
        }
        if n == 0.0 {
            return Err(Error::Numerical("no counts in the fit window".into()));
        }
        let (mean, span) = (sum / n, end_ns - start_ns);
        // E[t - start] for a truncated exponential; increasing in tau towards span / 2
        let expected = |tau: f64| tau - span / ((span / tau).exp_m1());
        if mean >= 0.5 * span {
            return Err(Error::Numerical("fit window shows no decay".into()));
        }
        let (mut lo, mut hi) = (span * 1e-6, span * 1e6);
        for _ in 0..200 {
            let mid = (lo * hi).sqrt();
            if expected(mid) < mean {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok((lo * hi).sqrt())
    }
}

/// Histogram of `line` emission times modulo the drive period.
pub fn decay_profile(record: &EmissionRecord, drive: &DriveProgram, line: Line, bin_ps: f64) -> Result<DecayProfile> {
    if drive.mode != DriveMode::Pulsed {
        return Err(Error::invalid("mode", "decay profiles need a pulsed drive"));
    }
    drive.validate()?;
    let bin_ns = bin_ps * 1e-3;
    let period = drive.period_ns();
    if !(bin_ns > 0.0 && bin_ns < period) {
        return Err(Error::invalid("bin_ps", "must be > 0 and shorter than the period"));
    }
    let bins = (period / bin_ns).ceil() as usize;
    let mut counts = vec![0u64; bins];
    for e in record.events.iter().filter(|e| e.line == line) {
        let phase = e.time_ns.rem_euclid(period);
        counts[((phase / bin_ns) as usize).min(bins - 1)] += 1;
    }
    Ok(DecayProfile {
        bin_ns,
        period_ns: period,
        counts,
    })
}

/// Fraction of a population with lifetime `lifetime_ns` that emits within `window_ns`.
pub fn qe_truncation_factor(window_ns: f64, lifetime_ns: f64) -> Result<f64> {
    if !(window_ns.is_finite() && window_ns >= 0.0) {
        return Err(Error::invalid("window_ns", "must be finite and >= 0"));
    }
    if !(lifetime_ns.is_finite() && lifetime_ns > 0.0) {
        return Err(Error::invalid("lifetime_ns", "must be finite and > 0"));
    }
    Ok(-(-window_ns / lifetime_ns).exp_m1())
}

/// Single-photon rate gain of one source over another.
pub fn throughput_ratio(collection_gain: f64, rate_gain: f64, qe_factor: f64) -> Result<f64> {
    for (field, v) in [
        ("collection_gain", collection_gain),
        ("rate_gain", rate_gain),
        ("qe_factor", qe_factor),
    ] {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::invalid(field, format!("must be finite and > 0, got {v}")));
        }
    }
    Ok(collection_gain * rate_gain * qe_factor)
}
