//! Globally adaptive 21-point Gauss–Kronrod quadrature.
//!
//! The integrands in [`crate::dipole`] are smooth almost everywhere but carry
//! narrow resonances (leaky and regularized guided modes). The driver starts
//! from a uniform panel grid between caller-supplied breakpoints, then
//! bisects every panel whose error estimate exceeds its share of the
//! tolerance. Each refinement round is evaluated through [`Execution`] and the
//! final sum runs in panel order, so the result does not depend on the
//! scheduling.

use crate::exec::Execution;
use crate::{Error, Result};

#[allow(clippy::excessive_precision)]
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

#[allow(clippy::excessive_precision)]
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_958_109_831_074,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

/// Tolerances and limits for [`integrate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// Uniform panels per breakpoint segment before any refinement.
    pub initial_panels: usize,
    pub max_panels: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self {
            abs_tol: 1e-12,
            rel_tol: 1e-9,
            initial_panels: 64,
            max_panels: 200_000,
        }
    }
}

impl QuadOptions {
    /// Same limits with both tolerances divided by `factor` and the starting grid refined by it.
    pub fn tightened(self, factor: f64) -> Self {
        Self {
            abs_tol: self.abs_tol / factor,
            rel_tol: self.rel_tol / factor,
            initial_panels: (self.initial_panels as f64 * factor).ceil() as usize,
            max_panels: (self.max_panels as f64 * factor).ceil() as usize,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub error_estimate: f64,
    pub panels: usize,
    pub evaluations: usize,
}

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

/// One Gauss–Kronrod 10/21 panel. Returns (Kronrod value, error estimate).
pub fn gauss_kronrod21<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let f_center = f(center);
    let mut kronrod = WGK[10] * f_center;
    let mut gauss = 0.0;
    let mut abs_sum = kronrod.abs();
    let mut fv = [(0.0, 0.0); 10];
    for (j, x) in XGK.iter().take(10).enumerate() {
        let dx = half * x;
        let (f1, f2) = (f(center - dx), f(center + dx));
        fv[j] = (f1, f2);
        kronrod += WGK[j] * (f1 + f2);
        abs_sum += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * kronrod;
    let mut asc = WGK[10] * (f_center - mean).abs();
    for (j, (f1, f2)) in fv.iter().enumerate() {
        asc += WGK[j] * ((f1 - mean).abs() + (f2 - mean).abs());
    }
    let width = half.abs();
    let (value, abs_sum, asc) = (kronrod * half, abs_sum * width, asc * width);

    // QUADPACK error rescaling
    let mut err = ((kronrod - gauss) * half).abs();
    if asc != 0.0 && err != 0.0 {
        err = asc * (200.0 * err / asc).powf(1.5).min(1.0);
    }
    if abs_sum > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * abs_sum);
    }
    (value, err)
}

/// Integrates `f` over `[breakpoints[0], breakpoints.last()]`.
///
/// Breakpoints must be ascending; every segment between consecutive
/// breakpoints is seeded with `initial_panels` panels, so breakpoints are the
/// place to put light lines and known resonance positions.
pub fn integrate<F>(f: F, breakpoints: &[f64], opts: QuadOptions, exec: Execution) -> Result<QuadResult>
where
    F: Fn(f64) -> f64 + Sync + Send,
{
    if breakpoints.len() < 2 {
        return Err(Error::invalid("breakpoints", "need at least two"));
    }
    if breakpoints.windows(2).any(|w| !(w[1] >= w[0])) || breakpoints.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid("breakpoints", "must be finite and ascending"));
    }
    let n0 = opts.initial_panels.max(1);
    let mut bounds = Vec::new();
    for w in breakpoints.windows(2) {
        if w[1] == w[0] {
            continue;
        }
        let h = (w[1] - w[0]) / n0 as f64;
        for i in 0..n0 {
            let a = w[0] + h * i as f64;
            let b = if i + 1 == n0 { w[1] } else { w[0] + h * (i + 1) as f64 };
            bounds.push((a, b));
        }
    }
    if bounds.is_empty() {
        return Ok(QuadResult {
            value: 0.0,
            error_estimate: 0.0,
            panels: 0,
            evaluations: 0,
        });
    }

    let eval = |(a, b): (f64, f64)| {
        let (value, error) = gauss_kronrod21(&f, a, b);
        Panel { a, b, value, error }
    };
    let mut panels: Vec<Panel> = exec.map_slice(&bounds, |&ab| eval(ab));
    let mut evaluations = 21 * panels.len();

    loop {
        let value: f64 = panels.iter().map(|p| p.value).sum();
        let error: f64 = panels.iter().map(|p| p.error).sum();
        if !value.is_finite() || !error.is_finite() {
            return Err(Error::Numerical(format!(
                "integrand produced a non-finite value on [{}, {}]",
                breakpoints[0],
                breakpoints[breakpoints.len() - 1]
            )));
        }
        let tol = opts.abs_tol.max(opts.rel_tol * value.abs());
        if error <= tol {
            return Ok(QuadResult {
                value,
                error_estimate: error,
                panels: panels.len(),
                evaluations,
            });
        }
        if panels.len() >= opts.max_panels {
            return Err(Error::Numerical(format!(
                "quadrature did not converge: value {value:.6e}, error estimate {error:.3e} > tolerance {tol:.3e} after {} panels ({evaluations} evaluations)",
                panels.len()
            )));
        }
        // bisect every panel above its fair share of the budget
        let share = tol / panels.len() as f64;
        let mut split = Vec::new();
        let mut keep = Vec::with_capacity(panels.len());
        for p in panels {
            let mid = 0.5 * (p.a + p.b);
            if p.error > share && mid > p.a && mid < p.b {
                split.push((p.a, mid));
                split.push((mid, p.b));
            } else {
                keep.push(p);
            }
        }
        if split.is_empty() {
            return Err(Error::Numerical(format!(
                "quadrature stalled: error estimate {error:.3e} > tolerance {tol:.3e} with no divisible panel"
            )));
        }
        evaluations += 21 * split.len();
        keep.extend(exec.map_slice(&split, |&ab| eval(ab)));
        keep.sort_by(|x, y| x.a.total_cmp(&y.a));
        panels = keep;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn weights_sum_to_interval_length() {
        let g: f64 = 2.0 * WG.iter().sum::<f64>();
        let k: f64 = 2.0 * WGK[..10].iter().sum::<f64>() + WGK[10];
        assert_relative_eq!(g, 2.0, epsilon = 1e-14);
        assert_relative_eq!(k, 2.0, epsilon = 1e-14);
    }

    #[test]
    fn kronrod_is_exact_for_high_degree_polynomials() {
        for k in 0..=31 {
            let (v, _) = gauss_kronrod21(&|x: f64| x.powi(k), 0.0, 1.0);
            assert_relative_eq!(v, 1.0 / (k as f64 + 1.0), max_relative = 1e-13);
        }
    }

    #[test]
    fn adaptive_handles_endpoint_singularity() {
        let r = integrate(
            |x| 1.0 / x.sqrt(),
            &[0.0, 1.0],
            QuadOptions::default(),
            Execution::Sequential,
        )
        .unwrap();
        assert_relative_eq!(r.value, 2.0, max_relative = 1e-8);
    }

    #[test]
    fn narrow_lorentzian_is_resolved() {
        let w = 1e-6;
        let f = |x: f64| w / std::f64::consts::PI / ((x - 0.3).powi(2) + w * w);
        let r = integrate(f, &[0.0, 1.0], QuadOptions::default(), Execution::Parallel).unwrap();
        let exact = ((0.7f64 / w).atan() + (0.3f64 / w).atan()) / std::f64::consts::PI;
        assert_relative_eq!(r.value, exact, max_relative = 1e-8);
    }

    #[test]
    fn parallel_and_sequential_agree_bitwise() {
        let f = |x: f64| (30.0 * x).sin() * (-x).exp();
        let a = integrate(f, &[0.0, 0.5, 3.0], QuadOptions::default(), Execution::Parallel).unwrap();
        let b = integrate(f, &[0.0, 0.5, 3.0], QuadOptions::default(), Execution::Sequential).unwrap();
        assert_eq!(a.value.to_bits(), b.value.to_bits());
    }

    #[test]
    fn budget_exhaustion_reports_diagnostics() {
        let opts = QuadOptions {
            max_panels: 4,
            initial_panels: 2,
            ..QuadOptions::default()
        };
        let err = integrate(|x| (1.0 / x).sin(), &[1e-6, 1.0], opts, Execution::Sequential).unwrap_err();
        match err {
            Error::Numerical(msg) => assert!(msg.contains("error estimate")),
            e => panic!("unexpected {e:?}"),
        }
    }
}
