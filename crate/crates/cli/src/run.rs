use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};
use speds_core::cavity::{optimize_top_mirror, sweep_bottom_mirror};
use speds_core::dipole::{collection_efficiency, emission_pattern_with, EmissionOptions};
use speds_core::hbt::{
    correlate, detect, g2_zero_closed_form, matched_noise_rate, peak_area_analysis, CorrelationMode, DetectorPair,
};
use speds_core::qd::{
    decay_profile, qe_truncation_factor, simulate, simulate_laser, throughput_ratio, DriveMode, EmissionRecord,
};
use speds_core::Execution;

use crate::config::{self, Command, EmissionConfig, HbtConfig, SourceKind, SweepConfig, ThroughputConfig};
use crate::Failure;

const DEFAULT_SEED: u64 = 1;

pub struct Request {
    pub command: Command,
    pub config: Option<PathBuf>,
    pub preset: Option<String>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

/// Where results go and what to call them.
struct Target {
    dir: PathBuf,
    prefix: String,
    preset: Option<String>,
}

impl Target {
    fn path(&self, suffix: &str) -> PathBuf {
        self.dir.join(format!("{}_{suffix}", self.prefix))
    }

    fn write(&self, suffix: &str, contents: &str) -> Result<PathBuf, Failure> {
        let path = self.path(suffix);
        fs::write(&path, contents).map_err(|e| Failure::Usage(format!("cannot write {}: {e}", path.display())))?;
        Ok(path)
    }

    fn summary(&self, command: Command, seed: Option<u64>, results: Value) -> Result<PathBuf, Failure> {
        let doc = json!({
            "command": command.name(),
            "preset": self.preset,
            "seed": seed,
            "results": results,
        });
        let text = serde_json::to_string_pretty(&doc).expect("summary is plain data") + "\n";
        self.write("summary.json", &text)
    }
}

pub fn execute(req: &Request) -> Result<(), Failure> {
    let (text, origin, prefix) = match (&req.config, &req.preset) {
        (Some(path), _) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Failure::Usage(format!("cannot read config {}: {e}", path.display())))?;
            let stem = path
                .file_stem()
                .map_or("run".into(), |s| s.to_string_lossy().into_owned());
            (text, path.display().to_string(), stem)
        }
        (None, Some(name)) => {
            let p = config::find_preset(name, req.command)?;
            (p.json.to_string(), format!("preset {name}"), name.clone())
        }
        (None, None) => return Err(Failure::Usage("give --config or --preset".into())),
    };
    let target = |from_config: &Option<PathBuf>| -> Result<Target, Failure> {
        let dir = req
            .out
            .clone()
            .or_else(|| from_config.clone())
            .unwrap_or_else(|| PathBuf::from("out"));
        Ok(Target {
            dir,
            prefix: prefix.clone(),
            preset: req.preset.clone(),
        })
    };
    match req.command {
        Command::EmissionPattern => {
            let cfg: EmissionConfig = config::parse(&text, &origin)?;
            cfg.validate()?;
            let t = prepare(target(&cfg.output_dir)?)?;
            emission(&cfg, &t)
        }
        Command::CavitySweep => {
            let cfg: SweepConfig = config::parse(&text, &origin)?;
            cfg.validate()?;
            let t = prepare(target(&cfg.output_dir)?)?;
            cavity_sweep(&cfg, &t)
        }
        Command::Hbt | Command::CrossCorr => {
            let cfg: HbtConfig = config::parse(&text, &origin)?;
            cfg.validate(req.command)?;
            let seed = req.seed.or(cfg.seed).unwrap_or(DEFAULT_SEED);
            let t = prepare(target(&cfg.output_dir)?)?;
            hbt(&cfg, req.command, seed, &t)
        }
        Command::Throughput => {
            let cfg: ThroughputConfig = config::parse(&text, &origin)?;
            cfg.validate()?;
            let t = prepare(target(&cfg.output_dir)?)?;
            throughput(&cfg, &t)
        }
    }
}

fn prepare(t: Target) -> Result<Target, Failure> {
    fs::create_dir_all(&t.dir).map_err(|e| Failure::Usage(format!("invalid `output_dir` {}: {e}", t.dir.display())))?;
    Ok(t)
}

fn announce(path: &Path) {
    println!("wrote {}", path.display());
}

fn emission(cfg: &EmissionConfig, t: &Target) -> Result<(), Failure> {
    let (geometry, na) = match (&cfg.design, &cfg.geometry) {
        (Some(d), _) => (d.geometry()?, cfg.numerical_aperture.unwrap_or(d.numerical_aperture)),
        (None, Some(g)) => (g.clone(), cfg.numerical_aperture.unwrap_or(0.5)),
        (None, None) => unreachable!("validated"),
    };
    let opts = EmissionOptions::with_resolution(cfg.angular_resolution_deg);
    let s = emission_pattern_with(&geometry, &opts)?;
    let eta = collection_efficiency(&s, na)?;
    println!("collection efficiency into NA {na:.2}: {:.3}%", 100.0 * eta);
    println!(
        "total power {:.6}, up {:.6}, down {:.6}, guided {:.6}",
        s.total_power, s.radiated_up, s.radiated_down, s.guided_power
    );
    announce(&t.write("pattern.csv", &s.to_csv())?);
    announce(&t.summary(
        Command::EmissionPattern,
        None,
        json!({
            "numerical_aperture": na,
            "collection_efficiency": eta,
            "total_power": s.total_power,
            "radiated_up": s.radiated_up,
            "radiated_down": s.radiated_down,
            "guided_power": s.guided_power,
            "angular_resolution_deg": s.bin_width_deg,
        }),
    )?);
    Ok(())
}

#[derive(Serialize)]
struct SweepSummary {
    parameter: String,
    numerical_aperture: f64,
    best_value: usize,
    best_efficiency: f64,
    file: String,
}

fn cavity_sweep(cfg: &SweepConfig, t: &Target) -> Result<(), Failure> {
    let opts = EmissionOptions::with_resolution(cfg.angular_resolution_deg);
    let mut results = Vec::new();
    if let Some(b) = &cfg.bottom_sweep {
        results.extend(sweep_bottom_mirror(
            &cfg.design,
            b.max_periods,
            &b.numerical_apertures,
            &opts,
        )?);
    }
    if let Some(top) = &cfg.top_sweep {
        results.push(optimize_top_mirror(
            &cfg.design,
            top.bottom_periods,
            top.max_top,
            &opts,
        )?);
    }
    let mut summaries = Vec::new();
    for r in &results {
        let kind = if r.parameter == "top_periods" { "top" } else { "bottom" };
        let path = t.write(&format!("{kind}_na{:.2}.csv", r.numerical_aperture), &r.to_csv())?;
        println!(
            "{} sweep, NA {:.2}: best {} = {} with efficiency {:.3}%",
            kind,
            r.numerical_aperture,
            r.parameter,
            r.best_value(),
            100.0 * r.best_efficiency()
        );
        announce(&path);
        summaries.push(SweepSummary {
            parameter: r.parameter.clone(),
            numerical_aperture: r.numerical_aperture,
            best_value: r.best_value(),
            best_efficiency: r.best_efficiency(),
            file: path.file_name().unwrap().to_string_lossy().into_owned(),
        });
    }
    announce(&t.summary(Command::CavitySweep, None, json!({ "sweeps": summaries }))?);
    Ok(())
}

/// Signal click rate per detector in counts/s, averaged over the two arms.
fn signal_rate(record: &EmissionRecord, cfg: &HbtConfig, d: &DetectorPair) -> f64 {
    let count =
        |lines: &[speds_core::qd::Line]| record.events.iter().filter(|e| lines.contains(&e.line)).count() as f64;
    let a = count(&cfg.lines_a) * d.splitter_ratio;
    let b = count(&cfg.lines_b) * (1.0 - d.splitter_ratio);
    0.5 * (a + b) * d.efficiency / record.duration_ns * 1e9
}

fn hbt(cfg: &HbtConfig, command: Command, seed: u64, t: &Target) -> Result<(), Failure> {
    let record = match cfg.source {
        SourceKind::Dot => simulate(&cfg.model, &cfg.drive, seed)?,
        SourceKind::Laser => simulate_laser(&cfg.drive, cfg.mean_photons_per_pulse.unwrap_or(1.0), seed)?,
    };
    let mut detectors = cfg.detectors;
    let r_s = signal_rate(&record, cfg, &detectors);
    if let Some(n) = &cfg.matched_noise {
        let noise = match (n.noise_to_signal, n.target_g2) {
            (Some(ratio), _) => ratio * r_s,
            (None, Some(g)) => matched_noise_rate(g, r_s)?,
            (None, None) => unreachable!("validated"),
        };
        detectors.dark_rate_hz = n.dark_fraction * noise;
        detectors.background_rate_hz = (1.0 - n.dark_fraction) * noise;
    }
    // decorrelate the detector stream from the emitter stream
    let streams = detect(
        &record,
        &detectors,
        &cfg.lines_a,
        &cfg.lines_b,
        seed.wrapping_add(0x9e37_79b9_7f4a_7c15),
    )?;
    let hist = correlate(&streams, cfg.window_ns, cfg.bin_ns, Execution::Parallel)?;
    announce(&t.write("histogram.csv", &hist.to_csv())?);

    let auto = streams.mode == CorrelationMode::Auto;
    // the closed form assumes a single-photon emitter
    let prediction = if auto && cfg.source == SourceKind::Dot {
        Some(g2_zero_closed_form(
            r_s,
            detectors.dark_rate_hz,
            detectors.background_rate_hz,
        )?)
    } else {
        None
    };
    let (g2_zero, g2_error, estimator) = if cfg.drive.mode == DriveMode::Pulsed {
        let p = peak_area_analysis(&hist, cfg.drive.repetition_rate_mhz, cfg.m_far)?;
        announce(&t.write("peak_areas.csv", &p.to_csv())?);
        (
            p.area(0).unwrap_or(f64::NAN),
            p.error(0).unwrap_or(f64::NAN),
            "zero_peak_area",
        )
    } else {
        let (g, se) = hist.g2_between(-cfg.bin_ns, cfg.bin_ns);
        (g, se, "central_bins")
    };
    let decay = match &cfg.decay {
        Some(d) => {
            let line = cfg.lines_a[0];
            Some(decay_profile(&record, &cfg.drive, line, d.bin_ps)?.fit_decay(d.fit_start_ns, d.fit_end_ns)?)
        }
        None => None,
    };

    println!("g2(0) ({estimator}): {g2_zero:.4} ± {g2_error:.4}");
    if let Some(p) = prediction {
        println!("noise-limited prediction: {p:.4}");
    }
    if let Some(tau) = decay {
        println!("fitted decay time: {tau:.4} ns");
    }
    announce(&t.summary(
        command,
        Some(seed),
        json!({
            "mode": if auto { "auto" } else { "cross" },
            "g2_zero": g2_zero,
            "g2_zero_error": g2_error,
            "g2_zero_estimator": estimator,
            "g2_zero_prediction": prediction,
            "signal_rate_hz": r_s,
            "dark_rate_hz": detectors.dark_rate_hz,
            "background_rate_hz": detectors.background_rate_hz,
            "clicks_a": streams.a.len(),
            "clicks_b": streams.b.len(),
            "fitted_decay_ns": decay,
        }),
    )?);
    Ok(())
}

fn throughput(cfg: &ThroughputConfig, t: &Target) -> Result<(), Failure> {
    let rate_gain = cfg.repetition_rate_mhz / cfg.reference_rate_mhz;
    let qe = qe_truncation_factor(cfg.sweep_window_ns, cfg.lifetime_ns)?;
    let product = throughput_ratio(cfg.collection_gain, rate_gain, qe)?;
    println!("collection gain       {}", cfg.collection_gain);
    println!(
        "repetition-rate gain  {rate_gain:.3} ({} MHz / {} MHz)",
        cfg.repetition_rate_mhz, cfg.reference_rate_mhz
    );
    println!(
        "quantum-efficiency    {qe:.3} (1 - exp(-{} ns / {} ns))",
        cfg.sweep_window_ns, cfg.lifetime_ns
    );
    println!("single photons per second relative to reference: {product:.0}");
    announce(&t.summary(
        Command::Throughput,
        None,
        json!({
            "collection_gain": cfg.collection_gain,
            "repetition_rate_gain": rate_gain,
            "qe_factor": qe,
            "throughput_ratio": product,
        }),
    )?);
    Ok(())
}
