//! Run configurations: one JSON document per run, either read from disk or
//! taken from a preset compiled into the binary.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use speds_core::cavity::CavityDesign;
use speds_core::dipole::EmissionGeometry;
use speds_core::hbt::DetectorPair;
use speds_core::qd::{DriveMode, DriveProgram, Line, QDModel};

use crate::Failure;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    EmissionPattern,
    CavitySweep,
    Hbt,
    CrossCorr,
    Throughput,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::EmissionPattern => "emission-pattern",
            Command::CavitySweep => "cavity-sweep",
            Command::Hbt => "hbt",
            Command::CrossCorr => "cross-corr",
            Command::Throughput => "throughput",
        }
    }
}

pub struct Preset {
    pub name: &'static str,
    pub command: Command,
    pub json: &'static str,
}

macro_rules! preset {
    ($name:literal, $command:expr) => {
        Preset {
            name: $name,
            command: $command,
            json: include_str!(concat!("../../../presets/", $name, ".json")),
        }
    };
}

pub const PRESETS: &[Preset] = &[
    preset!("fig6a_no_cavity", Command::EmissionPattern),
    preset!("fig6b_cavity", Command::EmissionPattern),
    preset!("homogeneous_air", Command::EmissionPattern),
    preset!("fig5_geometry", Command::CavitySweep),
    preset!("top_mirror_geometry", Command::CavitySweep),
    preset!("fig9_1ghz", Command::Hbt),
    preset!("laser_80mhz", Command::Hbt),
    preset!("dc_equal_noise", Command::Hbt),
    preset!("matched_noise_011", Command::Hbt),
    preset!("fig8_decay", Command::Hbt),
    preset!("fig10_no_sweep", Command::Hbt),
    preset!("fig10_full_reset", Command::Hbt),
    preset!("cascade_x2_x", Command::CrossCorr),
    preset!("exclusion_x_shelved", Command::CrossCorr),
    preset!("throughput", Command::Throughput),
];

pub fn find_preset(name: &str, command: Command) -> Result<&'static Preset, Failure> {
    let Some(p) = PRESETS.iter().find(|p| p.name == name) else {
        let known: Vec<&str> = PRESETS
            .iter()
            .filter(|p| p.command == command)
            .map(|p| p.name)
            .collect();
        return Err(Failure::Usage(format!(
            "unknown preset `{name}` for {}; known: {}",
            command.name(),
            known.join(", ")
        )));
    };
    if p.command != command {
        return Err(Failure::Usage(format!(
            "preset `{name}` belongs to `{}`, not `{}`",
            p.command.name(),
            command.name()
        )));
    }
    Ok(p)
}

fn default_resolution() -> f64 {
    0.5
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmissionConfig {
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub design: Option<CavityDesign>,
    /// Arbitrary layer structure; used when `design` is absent.
    #[serde(default)]
    pub geometry: Option<EmissionGeometry>,
    /// Defaults to the design's aperture, or 0.5 for a custom geometry.
    #[serde(default)]
    pub numerical_aperture: Option<f64>,
    #[serde(default = "default_resolution")]
    pub angular_resolution_deg: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BottomSweep {
    pub max_periods: usize,
    pub numerical_apertures: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopSweep {
    pub bottom_periods: usize,
    pub max_top: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    pub design: CavityDesign,
    #[serde(default)]
    pub bottom_sweep: Option<BottomSweep>,
    #[serde(default)]
    pub top_sweep: Option<TopSweep>,
    #[serde(default = "default_resolution")]
    pub angular_resolution_deg: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceKind {
    #[default]
    Dot,
    /// Poissonian pulsed reference emitter.
    Laser,
}

/// Replaces the detectors' dark and background rates with values derived
/// from the simulated signal rate.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatchedNoise {
    #[serde(default)]
    pub noise_to_signal: Option<f64>,
    #[serde(default)]
    pub target_g2: Option<f64>,
    #[serde(default = "half")]
    pub dark_fraction: f64,
}

fn half() -> f64 {
    0.5
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecayFit {
    pub bin_ps: f64,
    pub fit_start_ns: f64,
    pub fit_end_ns: f64,
}

fn default_m_far() -> i64 {
    10
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HbtConfig {
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub source: SourceKind,
    #[serde(default)]
    pub model: QDModel,
    pub drive: DriveProgram,
    #[serde(default)]
    pub mean_photons_per_pulse: Option<f64>,
    #[serde(default)]
    pub detectors: DetectorPair,
    #[serde(default)]
    pub matched_noise: Option<MatchedNoise>,
    pub lines_a: Vec<Line>,
    pub lines_b: Vec<Line>,
    pub window_ns: f64,
    pub bin_ns: f64,
    #[serde(default = "default_m_far")]
    pub m_far: i64,
    #[serde(default)]
    pub decay: Option<DecayFit>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThroughputConfig {
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    pub collection_gain: f64,
    pub repetition_rate_mhz: f64,
    pub reference_rate_mhz: f64,
    /// Time the emitter is given before sweep-out.
    pub sweep_window_ns: f64,
    pub lifetime_ns: f64,
}

pub fn parse<T: for<'de> Deserialize<'de>>(text: &str, origin: &str) -> Result<T, Failure> {
    serde_json::from_str(text).map_err(|e| Failure::Usage(format!("{origin}: {e}")))
}

fn check(ok: bool, field: &str, reason: &str) -> Result<(), Failure> {
    if ok {
        Ok(())
    } else {
        Err(Failure::Usage(format!("invalid `{field}`: {reason}")))
    }
}

fn aperture(na: f64) -> Result<(), Failure> {
    check(na > 0.0 && na <= 1.0, "numerical_aperture", "must be in (0, 1]")
}

impl EmissionConfig {
    pub fn validate(&self) -> Result<(), Failure> {
        check(
            self.angular_resolution_deg > 0.0 && self.angular_resolution_deg <= 0.5,
            "angular_resolution_deg",
            "must be in (0, 0.5]",
        )?;
        match (&self.design, &self.geometry) {
            (Some(d), None) => d.validate()?,
            (None, Some(g)) => g.validate()?,
            _ => {
                return Err(Failure::Usage(
                    "exactly one of `design` and `geometry` must be given".into(),
                ))
            }
        }
        if let Some(na) = self.numerical_aperture {
            aperture(na)?;
        }
        Ok(())
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<(), Failure> {
        self.design.validate()?;
        check(
            self.angular_resolution_deg > 0.0 && self.angular_resolution_deg <= 0.5,
            "angular_resolution_deg",
            "must be in (0, 0.5]",
        )?;
        check(
            self.bottom_sweep.is_some() || self.top_sweep.is_some(),
            "bottom_sweep",
            "give `bottom_sweep`, `top_sweep` or both",
        )?;
        if let Some(b) = &self.bottom_sweep {
            check(b.max_periods >= 12, "max_periods", "must be >= 12")?;
            check(
                !b.numerical_apertures.is_empty(),
                "numerical_apertures",
                "must not be empty",
            )?;
            for &na in &b.numerical_apertures {
                aperture(na)?;
            }
        }
        if let Some(t) = &self.top_sweep {
            check(t.max_top >= 1, "max_top", "must be >= 1")?;
        }
        Ok(())
    }
}

impl HbtConfig {
    pub fn validate(&self, command: Command) -> Result<(), Failure> {
        self.model.validate()?;
        self.drive.validate()?;
        self.detectors.validate()?;
        check(!self.lines_a.is_empty(), "lines_a", "must name at least one line")?;
        check(!self.lines_b.is_empty(), "lines_b", "must name at least one line")?;
        if command == Command::CrossCorr {
            check(
                self.lines_a != self.lines_b,
                "lines_b",
                "cross-correlation needs different line filters",
            )?;
        }
        check(
            self.window_ns > 0.0 && self.window_ns.is_finite(),
            "window_ns",
            "must be finite and > 0",
        )?;
        check(
            self.bin_ns > 0.0 && self.bin_ns <= self.window_ns / 50.0,
            "bin_ns",
            "must be > 0 and at most window_ns / 50",
        )?;
        check(self.m_far >= 1, "m_far", "must be >= 1")?;
        if self.drive.mode == DriveMode::Pulsed {
            let reach = (self.window_ns / self.drive.period_ns() - 0.5).floor() as i64;
            check(
                reach >= self.m_far,
                "window_ns",
                "must span at least m_far + 1/2 periods",
            )?;
        }
        match self.source {
            SourceKind::Laser => {
                check(
                    self.drive.mode == DriveMode::Pulsed,
                    "source",
                    "the laser reference needs a pulsed drive",
                )?;
                let mu = self.mean_photons_per_pulse.unwrap_or(f64::NAN);
                check(
                    mu > 0.0 && mu.is_finite(),
                    "mean_photons_per_pulse",
                    "must be finite and > 0 for a laser",
                )?;
            }
            SourceKind::Dot => check(
                self.mean_photons_per_pulse.is_none(),
                "mean_photons_per_pulse",
                "applies only to the laser source",
            )?,
        }
        if let Some(n) = &self.matched_noise {
            check(
                n.noise_to_signal.is_some() != n.target_g2.is_some(),
                "matched_noise",
                "give exactly one of `noise_to_signal` and `target_g2`",
            )?;
            if let Some(r) = n.noise_to_signal {
                check(r >= 0.0 && r.is_finite(), "noise_to_signal", "must be finite and >= 0")?;
            }
            if let Some(g) = n.target_g2 {
                check((0.0..1.0).contains(&g), "target_g2", "must be in [0, 1)")?;
            }
            check(
                (0.0..=1.0).contains(&n.dark_fraction),
                "dark_fraction",
                "must be in [0, 1]",
            )?;
        }
        if let Some(d) = &self.decay {
            check(self.drive.mode == DriveMode::Pulsed, "decay", "needs a pulsed drive")?;
            check(d.bin_ps > 0.0, "bin_ps", "must be > 0")?;
            check(
                0.0 <= d.fit_start_ns && d.fit_start_ns < d.fit_end_ns && d.fit_end_ns <= self.drive.period_ns(),
                "fit_end_ns",
                "need 0 <= fit_start_ns < fit_end_ns <= period",
            )?;
        }
        Ok(())
    }
}

impl ThroughputConfig {
    pub fn validate(&self) -> Result<(), Failure> {
        for (field, v) in [
            ("collection_gain", self.collection_gain),
            ("repetition_rate_mhz", self.repetition_rate_mhz),
            ("reference_rate_mhz", self.reference_rate_mhz),
            ("sweep_window_ns", self.sweep_window_ns),
            ("lifetime_ns", self.lifetime_ns),
        ] {
            check(v > 0.0 && v.is_finite(), field, "must be finite and > 0")?;
        }
        Ok(())
    }
}
