//! Hanbury Brown–Twiss detection and correlation.
//!
//! Photons from an [`EmissionRecord`] pass a beam splitter onto two
//! detectors with finite efficiency, Gaussian timing jitter and Poissonian
//! dark and background counts. The two click streams are then correlated
//! over all pairs inside a delay window, not start-stop.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::exec::Execution;
use crate::qd::{EmissionRecord, Line};
use crate::{Error, Result};

/// Missing fields take their default values when deserialized.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectorPair {
    /// Detection probability per photon reaching a detector.
    pub efficiency: f64,
    /// Per detector, counts/s.
    pub dark_rate_hz: f64,
    /// Per detector, counts/s.
    pub background_rate_hz: f64,
    pub timing_jitter_ps: f64,
    /// Probability that a photon goes to arm A.
    pub splitter_ratio: f64,
    pub dead_time_ps: f64,
}

impl Default for DetectorPair {
    fn default() -> Self {
        Self {
            efficiency: 1.0,
            dark_rate_hz: 0.0,
            background_rate_hz: 0.0,
            timing_jitter_ps: 350.0,
            splitter_ratio: 0.5,
            dead_time_ps: 0.0,
        }
    }
}

impl DetectorPair {
    pub fn ideal() -> Self {
        Self {
            timing_jitter_ps: 0.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.efficiency > 0.0 && self.efficiency <= 1.0) {
            return Err(Error::invalid(
                "efficiency",
                format!("must be in (0, 1], got {}", self.efficiency),
            ));
        }
        if !(0.0..=1.0).contains(&self.splitter_ratio) {
            return Err(Error::invalid(
                "splitter_ratio",
                format!("must be in [0, 1], got {}", self.splitter_ratio),
            ));
        }
        for (field, v) in [
            ("dark_rate_hz", self.dark_rate_hz),
            ("background_rate_hz", self.background_rate_hz),
            ("timing_jitter_ps", self.timing_jitter_ps),
            ("dead_time_ps", self.dead_time_ps),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::invalid(field, format!("must be finite and >= 0, got {v}")));
            }
        }
        Ok(())
    }

    /// Dark plus background rate of one detector, per ns.
    pub fn noise_rate_per_ns(&self) -> f64 {
        (self.dark_rate_hz + self.background_rate_hz) * 1e-9
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorrelationMode {
    Auto,
    Cross,
}

/// Click times of both arms, sorted, in ns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionStreams {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub duration_ns: f64,
    pub mode: CorrelationMode,
    pub lines_a: Vec<Line>,
    pub lines_b: Vec<Line>,
}

/// Routes each photon through the splitter and detectors. An arm keeps a
/// photon only if its line is in that arm's filter, so equal filters give an
/// auto-correlation and different ones a cross-correlation.
pub fn detect(
    record: &EmissionRecord,
    detectors: &DetectorPair,
    lines_a: &[Line],
    lines_b: &[Line],
    seed: u64,
) -> Result<DetectionStreams> {
    detectors.validate()?;
    if record.events.windows(2).any(|w| w[1].time_ns < w[0].time_ns) {
        return Err(Error::invalid("record", "events must be sorted by time"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sigma = detectors.timing_jitter_ps * 1e-3;
    let jitter = Normal::new(0.0, sigma).map_err(|e| Error::invalid("timing_jitter_ps", e.to_string()))?;
    let (mut a, mut b) = (Vec::new(), Vec::new());
    for e in &record.events {
        let to_a = rng.random::<f64>() < detectors.splitter_ratio;
        let detected = rng.random::<f64>() < detectors.efficiency;
        let dt = if sigma > 0.0 { jitter.sample(&mut rng) } else { 0.0 };
        let (arm, lines) = if to_a { (&mut a, lines_a) } else { (&mut b, lines_b) };
        if detected && lines.contains(&e.line) {
            arm.push(e.time_ns + dt);
        }
    }
    let duration = record.duration_ns;
    let mean_noise = detectors.noise_rate_per_ns() * duration;
    for arm in [&mut a, &mut b] {
        if mean_noise > 0.0 {
            let n = Poisson::new(mean_noise)
                .map_err(|e| Error::invalid("dark_rate_hz", e.to_string()))?
                .sample(&mut rng) as usize;
            arm.extend((0..n).map(|_| rng.random::<f64>() * duration));
        }
        arm.sort_by(f64::total_cmp);
        let dead = detectors.dead_time_ps * 1e-3;
        if dead > 0.0 {
            let mut last = f64::NEG_INFINITY;
            arm.retain(|&t| {
                let keep = t - last >= dead;
                if keep {
                    last = t;
                }
                keep
            });
        }
    }
    let mode = if lines_a == lines_b {
        CorrelationMode::Auto
    } else {
        CorrelationMode::Cross
    };
    Ok(DetectionStreams {
        a,
        b,
        duration_ns: duration,
        mode,
        lines_a: lines_a.to_vec(),
        lines_b: lines_b.to_vec(),
    })
}

/// Coincidences versus delay `τ = t_B - t_A`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationHistogram {
    /// Left edge of the first bin.
    pub tau_min_ns: f64,
    pub bin_ns: f64,
    pub counts: Vec<u64>,
    pub mode: CorrelationMode,
    pub lines_a: Vec<Line>,
    pub lines_b: Vec<Line>,
    pub rate_a: f64,
    pub rate_b: f64,
    pub duration_ns: f64,
}

impl CorrelationHistogram {
    pub fn bin_edges(&self) -> Vec<f64> {
        (0..=self.counts.len())
            .map(|i| self.tau_min_ns + i as f64 * self.bin_ns)
            .collect()
    }

    pub fn bin_centre(&self, i: usize) -> f64 {
        self.tau_min_ns + (i as f64 + 0.5) * self.bin_ns
    }

    /// Coincidences per bin expected from two uncorrelated streams of the same rates.
    pub fn poisson_level(&self) -> f64 {
        self.rate_a * self.rate_b * self.bin_ns * self.duration_ns
    }

    pub fn g2(&self) -> Vec<f64> {
        let level = self.poisson_level();
        self.counts
            .iter()
            .map(|&c| if level > 0.0 { c as f64 / level } else { 0.0 })
            .collect()
    }

    /// Normalized coincidences over bins whose centres lie in `[lo, hi)`, with
    /// its Poisson standard error.
    pub fn g2_between(&self, lo_ns: f64, hi_ns: f64) -> (f64, f64) {
        let (mut n, mut bins) = (0u64, 0usize);
        for (i, &c) in self.counts.iter().enumerate() {
            let t = self.bin_centre(i);
            if t >= lo_ns && t < hi_ns {
                n += c;
                bins += 1;
            }
        }
        let level = self.poisson_level() * bins as f64;
        if level <= 0.0 {
            return (0.0, 0.0);
        }
        (n as f64 / level, (n.max(1) as f64).sqrt() / level)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("tau_ns,counts,g2_normalized\n");
        for (i, (c, g)) in self.counts.iter().zip(self.g2()).enumerate() {
            let _ = writeln!(out, "{},{c},{g}", self.bin_centre(i));
        }
        out
    }
}

/// Full pairwise correlation within `±window_ns`. Stream A is split into
/// chunks that are histogrammed independently and summed in order.
pub fn correlate(
    streams: &DetectionStreams,
    window_ns: f64,
    bin_ns: f64,
    exec: Execution,
) -> Result<CorrelationHistogram> {
    if !(window_ns.is_finite() && window_ns > 0.0) {
        return Err(Error::invalid("window_ns", "must be finite and > 0"));
    }
    if !(bin_ns > 0.0 && bin_ns <= window_ns / 50.0) {
        return Err(Error::invalid(
            "bin_ns",
            format!("must be in (0, window/50 = {}], got {bin_ns}", window_ns / 50.0),
        ));
    }
    let half = (window_ns / bin_ns).round() as usize;
    let nbins = 2 * half;
    let w = half as f64 * bin_ns;
    let (a, b) = (&streams.a, &streams.b);

    const CHUNK: usize = 4096;
    let chunks = a.len().div_ceil(CHUNK);
    let partial = exec.map(chunks, |k| {
        let mut counts = vec![0u64; nbins];
        let slice = &a[k * CHUNK..((k + 1) * CHUNK).min(a.len())];
        let Some(&first) = slice.first() else {
            return counts;
        };
        let mut j0 = b.partition_point(|&t| t < first - w);
        for &ta in slice {
            while j0 < b.len() && b[j0] < ta - w {
                j0 += 1;
            }
            for &tb in &b[j0..] {
                let d = tb - ta + w;
                if d >= 2.0 * w {
                    break;
                }
                let i = (d / bin_ns) as usize;
                if i < nbins {
                    counts[i] += 1;
                }
            }
        }
        counts
    });
    let mut counts = vec![0u64; nbins];
    for p in partial {
        for (c, x) in counts.iter_mut().zip(p) {
            *c += x;
        }
    }
    let duration = streams.duration_ns;
    Ok(CorrelationHistogram {
        tau_min_ns: -w,
        bin_ns,
        counts,
        mode: streams.mode,
        lines_a: streams.lines_a.clone(),
        lines_b: streams.lines_b.clone(),
        rate_a: a.len() as f64 / duration,
        rate_b: b.len() as f64 / duration,
        duration_ns: duration,
    })
}

/// `g2(0)` of an ideal single-photon signal at rate `R_S` diluted by
/// uncorrelated dark (`R_D`) and background (`R_BK`) counts.
pub fn g2_zero_closed_form(r_s: f64, r_d: f64, r_bk: f64) -> Result<f64> {
    for (field, v) in [("r_s", r_s), ("r_d", r_d), ("r_bk", r_bk)] {
        if !(v.is_finite() && v >= 0.0) {
            return Err(Error::invalid(field, format!("must be finite and >= 0, got {v}")));
        }
    }
    let noise = r_d + r_bk;
    let total = noise + r_s;
    if total <= 0.0 {
        return Err(Error::invalid("rates", "at least one rate must be positive"));
    }
    Ok((2.0 * noise * r_s + noise * noise) / (total * total))
}

/// Noise rate that brings an ideal signal at `r_s` to the given `g2(0)`.
pub fn matched_noise_rate(target_g2: f64, r_s: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&target_g2) {
        return Err(Error::invalid(
            "target_g2",
            format!("must be in [0, 1), got {target_g2}"),
        ));
    }
    if !(r_s.is_finite() && r_s > 0.0) {
        return Err(Error::invalid("r_s", "must be finite and > 0"));
    }
    Ok(r_s * (1.0 / (1.0 - target_g2).sqrt() - 1.0))
}

/// Areas of the pulsed-correlation peaks centred on `m / repetition_rate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeakAreas {
    pub m: Vec<i64>,
    /// Normalized so that the peaks with `|m| >= m_far` average 1.
    pub areas: Vec<f64>,
    pub errors: Vec<f64>,
    /// Coincidences per window, with edge bins prorated.
    pub raw: Vec<f64>,
    pub m_far: i64,
}

impl PeakAreas {
    pub fn area(&self, m: i64) -> Option<f64> {
        self.m.iter().position(|&x| x == m).map(|i| self.areas[i])
    }

    pub fn error(&self, m: i64) -> Option<f64> {
        self.m.iter().position(|&x| x == m).map(|i| self.errors[i])
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("m,area\n");
        for (m, a) in self.m.iter().zip(&self.areas) {
            let _ = writeln!(out, "{m},{a}");
        }
        out
    }
}

/// Peak areas integrated over one full period around each peak.
pub fn peak_area_analysis(hist: &CorrelationHistogram, repetition_rate_mhz: f64, m_far: i64) -> Result<PeakAreas> {
    if !(repetition_rate_mhz.is_finite() && repetition_rate_mhz > 0.0) {
        return Err(Error::invalid("repetition_rate_mhz", "must be finite and > 0"));
    }
    peak_area_analysis_with(hist, repetition_rate_mhz, m_far, 1e3 / repetition_rate_mhz)
}

pub fn peak_area_analysis_with(
    hist: &CorrelationHistogram,
    repetition_rate_mhz: f64,
    m_far: i64,
    integration_window_ns: f64,
) -> Result<PeakAreas> {
    if !(repetition_rate_mhz.is_finite() && repetition_rate_mhz > 0.0) {
        return Err(Error::invalid("repetition_rate_mhz", "must be finite and > 0"));
    }
    let period = 1e3 / repetition_rate_mhz;
    if !(integration_window_ns > 0.0 && integration_window_ns <= period * (1.0 + 1e-12)) {
        return Err(Error::invalid(
            "integration_window_ns",
            format!("must be in (0, {period}] so that peak windows do not overlap"),
        ));
    }
    if m_far < 1 {
        return Err(Error::invalid("m_far", "must be >= 1"));
    }
    let span = -hist.tau_min_ns;
    let m_max = ((span - 0.5 * integration_window_ns) / period + 1e-9).floor() as i64;
    if m_max < m_far {
        return Err(Error::invalid(
            "window_ns",
            format!("histogram reaches |m| = {m_max}, fewer than m_far = {m_far} periods"),
        ));
    }
    let ms: Vec<i64> = (-m_max..=m_max).collect();
    // bins straddling a window edge contribute pro rata
    let half = 0.5 * integration_window_ns;
    let mut raw = vec![0.0; ms.len()];
    for (i, &c) in hist.counts.iter().enumerate() {
        if c == 0 {
            continue;
        }
        let lo = hist.tau_min_ns + i as f64 * hist.bin_ns;
        let hi = lo + hist.bin_ns;
        let first = ((lo + half) / period).floor() as i64;
        let last = ((hi - half) / period).ceil() as i64;
        for m in first.max(-m_max)..=last.min(m_max) {
            let centre = m as f64 * period;
            let overlap = (hi.min(centre + half) - lo.max(centre - half)).max(0.0);
            raw[(m + m_max) as usize] += c as f64 * overlap / hist.bin_ns;
        }
    }
    let far: Vec<f64> = ms
        .iter()
        .zip(&raw)
        .filter(|(m, _)| m.abs() >= m_far)
        .map(|(_, &r)| r)
        .collect();
    let norm = far.iter().sum::<f64>() / far.len() as f64;
    if norm <= 0.0 {
        return Err(Error::Numerical("far peaks are empty; cannot normalize".into()));
    }
    Ok(PeakAreas {
        areas: raw.iter().map(|&r| r / norm).collect(),
        errors: raw.iter().map(|&r| r.max(1.0).sqrt() / norm).collect(),
        m: ms,
        raw,
        m_far,
    })
}
