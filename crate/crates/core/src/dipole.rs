//! Far-field emission of an in-plane dipole embedded in a planar structure.
//!
//! The dipole sits in a lossless host layer. Everything above it is the
//! `upper` stack (entry = host, exit = top half-space, usually air) and
//! everything below it the `lower` stack (entry = host, exit = substrate).
//! The field is expanded in plane waves of normalized in-plane wavevector
//! `u = k_par / (n_host k0)`. For each `u` and polarization the source
//! launches equal tangential-field amplitudes up and down; the two mirrors
//! (`a± = r± exp(2 i k_z d±)`) close a Fabry–Perot loop with denominator
//! `1 - a+ a-`.
//!
//! Powers are normalized to the same dipole in the unbounded host, and are
//! averaged over the in-plane orientation (equivalently over two orthogonal
//! in-plane dipoles), which gives equal TE and TM shares at normal incidence.
//!
//! * dissipated power per unit `u`:
//!   `3/4 Re[ (u/l) Σ_p w_p (1 + a+)(1 + a-) / (1 - a+ a-) ]`, with
//!   `l = k_z / (n_host k0)`, `w_TE = 1`, `w_TM = l²`;
//! * flux into the top half-space per unit `u`:
//!   `Σ_p |S_p|² Re(Y_top) |t+ exp(i k_z d+) (1 + a-) / (1 - a+ a-)|²`, with
//!   `|S_TE|² = 3u / (8 n_host |l|²)` and `|S_TM|² = 3u |l|² / (8 n_host)`,
//!   and symmetrically for the substrate.
//!
//! The far-field angle is `θ` from the upward growth axis: `n_top sin θ =
//! n_host u` above, `n_sub sin(180° - θ) = n_host u` below.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::exec::Execution;
use crate::optics::{admittance, principal_branch, stack_response_with, LayerStack, Polarization, Response};
use crate::quadrature::{integrate, QuadOptions};
use crate::{Error, Result, C64};

/// Extinction added to every finite layer when integrating, so that true
/// guided-mode poles become narrow, integrable peaks.
pub const DEFAULT_REGULARIZATION: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DipoleSource {
    pub vacuum_wavelength_nm: f64,
    pub host_index: C64,
    pub distance_to_upper_nm: f64,
    pub distance_to_lower_nm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmissionGeometry {
    pub upper: LayerStack,
    pub lower: LayerStack,
    pub source: DipoleSource,
}

impl EmissionGeometry {
    pub fn new(upper: LayerStack, lower: LayerStack, source: DipoleSource) -> Result<Self> {
        let g = Self { upper, lower, source };
        g.validate()?;
        Ok(g)
    }

    /// A dipole in an unbounded medium of index `n`.
    pub fn homogeneous(n: f64, vacuum_wavelength_nm: f64) -> Self {
        let host = C64::new(n, 0.0);
        Self {
            upper: LayerStack::bare(host, host),
            lower: LayerStack::bare(host, host),
            source: DipoleSource {
                vacuum_wavelength_nm,
                host_index: host,
                distance_to_upper_nm: 0.0,
                distance_to_lower_nm: 0.0,
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let s = &self.source;
        if !(s.vacuum_wavelength_nm.is_finite() && s.vacuum_wavelength_nm > 0.0) {
            return Err(Error::invalid("vacuum_wavelength_nm", "must be finite and > 0"));
        }
        for (field, d) in [
            ("distance_to_upper_nm", s.distance_to_upper_nm),
            ("distance_to_lower_nm", s.distance_to_lower_nm),
        ] {
            if !(d.is_finite() && d >= 0.0) {
                return Err(Error::invalid(field, format!("must be finite and >= 0, got {d}")));
            }
        }
        if self.upper.entry_index != s.host_index || self.lower.entry_index != s.host_index {
            return Err(Error::invalid(
                "entry_index",
                "upper and lower stacks must both start in the host medium",
            ));
        }
        self.upper.validate()?;
        self.lower.validate()?;
        if !(s.host_index.re.is_finite() && s.host_index.re > 0.0) {
            return Err(Error::invalid("host_index", "Re(n) must be finite and > 0"));
        }
        let all = std::iter::once(s.host_index)
            .chain(self.upper.indices())
            .chain(self.lower.indices());
        for n in all {
            if n.im < 0.0 {
                return Err(Error::Unsupported(format!("gain medium with n = {n}")));
            }
        }
        if s.host_index.im != 0.0 {
            return Err(Error::Unsupported("the host layer must be lossless".into()));
        }
        if self.upper.exit_index.im != 0.0 || self.lower.exit_index.im != 0.0 {
            return Err(Error::Unsupported(
                "far field is undefined in an absorbing half-space".into(),
            ));
        }
        Ok(())
    }

    fn regularized(&self, extinction: f64) -> Self {
        let reg = |s: &LayerStack| LayerStack {
            entry_index: s.entry_index,
            layers: s.layers.iter().map(|l| l.with_added_extinction(extinction)).collect(),
            exit_index: s.exit_index,
        };
        Self {
            upper: reg(&self.upper),
            lower: reg(&self.lower),
            source: self.source,
        }
    }
}

/// Power per degree of polar angle, bin-averaged on a uniform grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AngularPowerSpectrum {
    /// Bin centres in degrees, ascending over (0, 180).
    pub theta_deg: Vec<f64>,
    /// Mean power per degree inside each bin; `Σ density · bin_width` is the radiated power.
    pub power_density: Vec<f64>,
    pub bin_width_deg: f64,
    /// Dissipated power that reaches neither half-space.
    pub guided_power: f64,
    pub total_power: f64,
    pub radiated_up: f64,
    pub radiated_down: f64,
}

impl AngularPowerSpectrum {
    /// Integral of the density over `[0°, 180°]`.
    pub fn radiated_power(&self) -> f64 {
        self.power_density.iter().sum::<f64>() * self.bin_width_deg
    }

    /// Integral of the density over `[lo, hi]` degrees; partial bins are prorated.
    pub fn power_between(&self, lo_deg: f64, hi_deg: f64) -> f64 {
        let w = self.bin_width_deg;
        self.theta_deg
            .iter()
            .zip(&self.power_density)
            .map(|(&c, &p)| {
                let (a, b) = (c - 0.5 * w, c + 0.5 * w);
                let overlap = (b.min(hi_deg) - a.max(lo_deg)).max(0.0);
                p * overlap
            })
            .sum()
    }

    /// CSV with `theta_deg,power_density` columns, scalars as leading comments.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# guided_power = {}", self.guided_power);
        let _ = writeln!(out, "# total_power = {}", self.total_power);
        out.push_str("theta_deg,power_density\n");
        for (t, p) in self.theta_deg.iter().zip(&self.power_density) {
            let _ = writeln!(out, "{t},{p}");
        }
        out
    }

    /// Parses the format written by [`AngularPowerSpectrum::to_csv`].
    pub fn from_csv(text: &str) -> Result<Self> {
        let bad = |why: &str| Error::invalid("csv", why.to_string());
        let mut guided = None;
        let mut total = None;
        let mut theta = Vec::new();
        let mut density = Vec::new();
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
            if let Some(rest) = line.strip_prefix('#') {
                let (key, value) = rest.split_once('=').ok_or_else(|| bad("comment without `=`"))?;
                let value: f64 = value.trim().parse().map_err(|_| bad("unparsable scalar"))?;
                match key.trim() {
                    "guided_power" => guided = Some(value),
                    "total_power" => total = Some(value),
                    _ => {}
                }
            } else if line.starts_with("theta_deg") {
                continue;
            } else {
                let (t, p) = line.split_once(',').ok_or_else(|| bad("expected two columns"))?;
                theta.push(t.trim().parse().map_err(|_| bad("unparsable theta"))?);
                density.push(p.trim().parse().map_err(|_| bad("unparsable density"))?);
            }
        }
        let bin_width_deg = if theta.is_empty() {
            0.0
        } else {
            180.0 / theta.len() as f64
        };
        let mut s = Self {
            theta_deg: theta,
            power_density: density,
            bin_width_deg,
            guided_power: guided.ok_or_else(|| bad("missing guided_power"))?,
            total_power: total.ok_or_else(|| bad("missing total_power"))?,
            radiated_up: 0.0,
            radiated_down: 0.0,
        };
        s.radiated_up = s.power_between(0.0, 90.0);
        s.radiated_down = s.power_between(90.0, 180.0);
        Ok(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmissionOptions {
    pub angular_resolution_deg: f64,
    /// Tolerances for the dissipated-power integral over `k_par`.
    pub k_quadrature: QuadOptions,
    /// Tolerances for each angular bin.
    pub bin_quadrature: QuadOptions,
    pub regularization: f64,
    pub execution: Execution,
}

impl Default for EmissionOptions {
    fn default() -> Self {
        Self {
            angular_resolution_deg: 0.5,
            k_quadrature: QuadOptions {
                abs_tol: 1e-11,
                rel_tol: 1e-9,
                initial_panels: 64,
                max_panels: 400_000,
            },
            bin_quadrature: QuadOptions {
                abs_tol: 1e-13,
                rel_tol: 1e-9,
                initial_panels: 2,
                max_panels: 20_000,
            },
            regularization: DEFAULT_REGULARIZATION,
            execution: Execution::Parallel,
        }
    }
}

impl EmissionOptions {
    pub fn with_resolution(angular_resolution_deg: f64) -> Self {
        Self {
            angular_resolution_deg,
            ..Self::default()
        }
    }
}

/// One in-plane wavevector, stored so that `k_z` stays accurate near the
/// light line of the reference medium: `k_par = s k0` and
/// `(k_z / k0)² = n² - n_ref² + q` with `q = n_ref² - s²` supplied exactly.
#[derive(Debug, Clone, Copy)]
struct Wave {
    s: f64,
    n_ref: f64,
    q: f64,
}

impl Wave {
    /// Angle `a` from the normal in a real medium `n`.
    fn at_angle(n: f64, a: f64) -> Self {
        Self {
            s: n * a.sin(),
            n_ref: n,
            q: (n * a.cos()).powi(2),
        }
    }

    /// `u = cosh ψ` in the host: evanescent there.
    fn evanescent(n_host: f64, psi: f64) -> Self {
        Self {
            s: n_host * psi.cosh(),
            n_ref: n_host,
            q: -(n_host * psi.sinh()).powi(2),
        }
    }

    fn kz_over_k0(&self, n: C64) -> C64 {
        principal_branch((n * n - self.n_ref * self.n_ref + self.q).sqrt())
    }
}

/// Precomputed plane-wave response of a geometry.
struct Solver<'a> {
    g: &'a EmissionGeometry,
    n_host: f64,
    k0: f64,
}

/// Amplitudes of one polarization at one `u`.
struct Loop {
    a_up: C64,
    a_down: C64,
    /// `t± exp(i k_z d±)`, transmission from the dipole plane into each half-space.
    t_up: C64,
    t_down: C64,
    l: C64,
}

impl<'a> Solver<'a> {
    fn new(g: &'a EmissionGeometry) -> Self {
        Self {
            g,
            n_host: g.source.host_index.re,
            k0: 2.0 * PI / g.source.vacuum_wavelength_nm,
        }
    }

    fn fabry_perot(&self, w: &Wave, pol: Polarization) -> Option<Loop> {
        let k0 = self.k0;
        let kz_of = |n: C64| w.kz_over_k0(n) * k0;
        let kz = kz_of(self.g.source.host_index);
        let up: Response = stack_response_with(&self.g.upper, k0, pol, kz_of)?;
        let down: Response = stack_response_with(&self.g.lower, k0, pol, kz_of)?;
        let i = C64::i();
        let ph_up = (i * kz * self.g.source.distance_to_upper_nm).exp();
        let ph_down = (i * kz * self.g.source.distance_to_lower_nm).exp();
        Some(Loop {
            a_up: up.r * ph_up * ph_up,
            a_down: down.r * ph_down * ph_down,
            t_up: up.t * ph_up,
            t_down: down.t * ph_down,
            l: kz / (self.n_host * k0),
        })
    }

    /// Dissipated power per unit `u`, times `l / u` (the free-dipole factor
    /// `u/l` is supplied by the caller together with the Jacobian).
    fn dissipation_core(&self, w: &Wave) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for pol in Polarization::BOTH {
            let Some(fp) = self.fabry_perot(w, pol) else {
                return C64::new(f64::NAN, 0.0);
            };
            let weight = match pol {
                Polarization::Te => C64::new(1.0, 0.0),
                Polarization::Tm => fp.l * fp.l,
            };
            acc += weight * (1.0 + fp.a_up) * (1.0 + fp.a_down) / (1.0 - fp.a_up * fp.a_down);
        }
        0.75 * acc
    }

    /// Flux per unit `u` into the top (`upward`) or bottom half-space.
    fn radiated_density(&self, w: &Wave, upward: bool) -> f64 {
        let exit = if upward {
            self.g.upper.exit_index
        } else {
            self.g.lower.exit_index
        };
        let u = w.s / self.n_host;
        let kz_exit = w.kz_over_k0(exit) * self.k0;
        let mut total = 0.0;
        for pol in Polarization::BOTH {
            let Some(fp) = self.fabry_perot(w, pol) else {
                return 0.0;
            };
            let l2 = fp.l.norm_sqr();
            if l2 == 0.0 {
                return 0.0;
            }
            let source = match pol {
                Polarization::Te => 0.375 * u / (self.n_host * l2),
                Polarization::Tm => 0.375 * u * l2 / self.n_host,
            };
            let y_exit = admittance(exit, kz_exit, self.k0, pol).re;
            let den = 1.0 - fp.a_up * fp.a_down;
            let amp = if upward {
                fp.t_up * (1.0 + fp.a_down) / den
            } else {
                fp.t_down * (1.0 + fp.a_up) / den
            };
            total += source * y_exit * amp.norm_sqr();
        }
        total
    }

    /// Power per radian of polar angle `psi` measured from the axis of the chosen half-space.
    fn angular_density(&self, psi: f64, upward: bool) -> f64 {
        let exit = if upward {
            self.g.upper.exit_index.re
        } else {
            self.g.lower.exit_index.re
        };
        let jac = exit * psi.cos() / self.n_host;
        if jac <= 0.0 {
            return 0.0;
        }
        self.radiated_density(&Wave::at_angle(exit, psi), upward) * jac
    }

    fn media(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self
            .g
            .upper
            .indices()
            .chain(self.g.lower.indices())
            .map(|n| n.re)
            .collect();
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    }

    /// Largest `u` that can carry power: beyond every medium's light line nothing propagates.
    fn u_max(&self) -> f64 {
        let n_max = self.media().into_iter().fold(self.n_host, f64::max);
        n_max / self.n_host
    }

    /// Minima of `|1 - a+ a-|` over `[lo, hi]` in the variable `x`, located
    /// on a uniform scan and polished by golden-section search.
    fn resonances(&self, lo: f64, hi: f64, to_wave: impl Fn(f64) -> Wave) -> Vec<f64> {
        const SCAN: usize = 4000;
        let mut found = Vec::new();
        for pol in Polarization::BOTH {
            let depth = |x: f64| {
                self.fabry_perot(&to_wave(x), pol)
                    .map(|fp| (1.0 - fp.a_up * fp.a_down).norm())
                    .unwrap_or(f64::INFINITY)
            };
            let h = (hi - lo) / SCAN as f64;
            let vals: Vec<f64> = (0..=SCAN).map(|i| depth(lo + h * i as f64)).collect();
            for i in 1..SCAN {
                if vals[i] < vals[i - 1] && vals[i] <= vals[i + 1] && vals[i] < 0.5 {
                    let (mut a, mut b) = (lo + h * (i - 1) as f64, lo + h * (i + 1) as f64);
                    let g = 0.5 * (5f64.sqrt() - 1.0);
                    for _ in 0..60 {
                        let c = b - g * (b - a);
                        let d = a + g * (b - a);
                        if depth(c) < depth(d) {
                            b = d;
                        } else {
                            a = c;
                        }
                    }
                    let x = 0.5 * (a + b);
                    if x > lo && x < hi {
                        found.push(x);
                    }
                }
            }
        }
        found.sort_by(f64::total_cmp);
        found.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
        found
    }

    fn total_power(&self, opts: &QuadOptions, exec: Execution) -> Result<f64> {
        // propagating in the host: u = sin φ, (u / l) du = u dφ
        let mut bp = vec![0.0, FRAC_PI_2];
        for n in self.media() {
            let r = n / self.n_host;
            if r > 0.0 && r < 1.0 {
                bp.push(r.asin());
            }
        }
        let nh = self.n_host;
        bp.extend(self.resonances(0.0, FRAC_PI_2, |phi| Wave::at_angle(nh, phi)));
        bp.sort_by(f64::total_cmp);
        bp.dedup();
        let propagating = integrate(
            |phi| {
                let u = phi.sin();
                (self.dissipation_core(&Wave::at_angle(nh, phi)) * u).re
            },
            &bp,
            *opts,
            exec,
        )?;

        // evanescent in the host: u = cosh ψ, (u / l) du = -i u dψ
        let u_max = self.u_max();
        let mut evanescent = 0.0;
        if u_max > 1.0 {
            let psi_max = (u_max * (1.0 + 1e-3)).acosh();
            let mut bp = vec![0.0, psi_max];
            for n in self.media() {
                let r = n / self.n_host;
                if r > 1.0 {
                    bp.push(r.acosh());
                }
            }
            bp.extend(self.resonances(0.0, psi_max, |psi| Wave::evanescent(nh, psi)));
            bp.sort_by(f64::total_cmp);
            bp.dedup();
            evanescent = integrate(
                |psi| {
                    let u = psi.cosh();
                    (self.dissipation_core(&Wave::evanescent(nh, psi)) * C64::new(0.0, -u)).re
                },
                &bp,
                *opts,
                exec,
            )?
            .value;
        }
        Ok(propagating.value + evanescent)
    }
}

/// Angular emission pattern with default solver settings.
pub fn emission_pattern(geometry: &EmissionGeometry, angular_resolution_deg: f64) -> Result<AngularPowerSpectrum> {
    emission_pattern_with(geometry, &EmissionOptions::with_resolution(angular_resolution_deg))
}

pub fn emission_pattern_with(geometry: &EmissionGeometry, opts: &EmissionOptions) -> Result<AngularPowerSpectrum> {
    geometry.validate()?;
    let res = opts.angular_resolution_deg;
    if !(res.is_finite() && res > 0.0 && res <= 0.5) {
        return Err(Error::invalid(
            "angular_resolution",
            format!("must be in (0, 0.5] degrees, got {res}"),
        ));
    }
    let bins = (180.0 / res).round().max(1.0) as usize;
    let width = 180.0 / bins as f64;

    let reg = geometry.regularized(opts.regularization);
    let solver = Solver::new(&reg);
    let total_power = solver.total_power(&opts.k_quadrature, opts.execution)?;

    let top = reg.upper.exit_index.re;
    let bottom = reg.lower.exit_index.re;
    let bin_power = |i: usize| -> Result<f64> {
        let (a, b) = (width * i as f64, width * (i + 1) as f64);
        let mut acc = 0.0;
        // pieces on either side of the horizon, in radians from each half-space's own axis
        if a < 90.0 && top > 0.0 {
            let (lo, hi) = (a.to_radians(), b.min(90.0).to_radians());
            acc += integrate(
                |psi| solver.angular_density(psi, true),
                &[lo, hi],
                opts.bin_quadrature,
                Execution::Sequential,
            )?
            .value;
        }
        if b > 90.0 && bottom > 0.0 {
            let (lo, hi) = ((180.0 - b).to_radians(), (180.0 - a.max(90.0)).to_radians());
            acc += integrate(
                |psi| solver.angular_density(psi, false),
                &[lo, hi],
                opts.bin_quadrature,
                Execution::Sequential,
            )?
            .value;
        }
        Ok(acc)
    };
    let powers = opts
        .execution
        .map(bins, bin_power)
        .into_iter()
        .collect::<Result<Vec<f64>>>()?;

    let theta_deg: Vec<f64> = (0..bins).map(|i| width * (i as f64 + 0.5)).collect();
    let power_density: Vec<f64> = powers.iter().map(|p| p / width).collect();
    let mut spectrum = AngularPowerSpectrum {
        theta_deg,
        power_density,
        bin_width_deg: width,
        guided_power: 0.0,
        total_power,
        radiated_up: 0.0,
        radiated_down: 0.0,
    };
    spectrum.radiated_up = spectrum.power_between(0.0, 90.0);
    spectrum.radiated_down = spectrum.power_between(90.0, 180.0);
    let guided = total_power - spectrum.radiated_power();
    if guided < -1e-6 * total_power.abs().max(1e-300) || !(total_power > 0.0) {
        return Err(Error::Numerical(format!(
            "energy bookkeeping failed: total {total_power:.9e}, radiated {:.9e}",
            spectrum.radiated_power()
        )));
    }
    spectrum.guided_power = guided.max(0.0);
    Ok(spectrum)
}

/// Radiated power into the top and bottom half-spaces, integrated directly
/// over `k_par` rather than through the angular bins.
pub fn radiated_power_k_space(geometry: &EmissionGeometry, opts: &EmissionOptions) -> Result<(f64, f64)> {
    geometry.validate()?;
    let reg = geometry.regularized(opts.regularization);
    let solver = Solver::new(&reg);
    let mut out = [0.0; 2];
    for (slot, upward) in out.iter_mut().zip([true, false]) {
        let bp = [0.0, FRAC_PI_2];
        *slot = integrate(
            |psi| solver.angular_density(psi, upward),
            &bp,
            QuadOptions {
                initial_panels: 512,
                ..opts.k_quadrature
            },
            opts.execution,
        )?
        .value;
    }
    Ok((out[0], out[1]))
}

/// Fraction of the total dissipated power collected by a lens of the given
/// numerical aperture looking down the growth axis (`θ ≤ asin NA`).
pub fn collection_efficiency(spectrum: &AngularPowerSpectrum, numerical_aperture: f64) -> Result<f64> {
    if !(numerical_aperture > 0.0 && numerical_aperture <= 1.0) {
        return Err(Error::invalid(
            "numerical_aperture",
            format!("must be in (0, 1], got {numerical_aperture}"),
        ));
    }
    if !(spectrum.total_power > 0.0) {
        return Err(Error::invalid("total_power", "spectrum has no power"));
    }
    let theta = numerical_aperture.asin().to_degrees();
    Ok(spectrum.power_between(0.0, theta) / spectrum.total_power)
}

/// Closed-form collection efficiency of an in-plane dipole below a bare
/// high-index surface: normal-incidence transmission times the fraction of
/// the dipole pattern inside the internal escape cone `asin(NA / n)`.
pub fn analytic_no_cavity_efficiency(n: f64, numerical_aperture: f64) -> Result<f64> {
    if !(n.is_finite() && n > 1.0) {
        return Err(Error::invalid("n", format!("must be > 1, got {n}")));
    }
    if !(numerical_aperture > 0.0 && numerical_aperture <= 1.0) {
        return Err(Error::invalid(
            "numerical_aperture",
            format!("must be in (0, 1], got {numerical_aperture}"),
        ));
    }
    let transmission = 1.0 - ((n - 1.0) / (n + 1.0)).powi(2);
    let c = (numerical_aperture / n).asin().cos();
    Ok(transmission * (0.5 - 0.375 * c - 0.125 * c.powi(3)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optics::{build_bragg, N_ALAS, N_GAAS};
    use approx::assert_abs_diff_eq;

    const LAMBDA: f64 = 900.0;

    fn re(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    fn no_cavity() -> EmissionGeometry {
        EmissionGeometry::new(
            LayerStack::bare(re(N_GAAS), re(1.0)),
            LayerStack::bare(re(N_GAAS), re(N_GAAS)),
            DipoleSource {
                vacuum_wavelength_nm: LAMBDA,
                host_index: re(N_GAAS),
                distance_to_upper_nm: 2.0 * LAMBDA,
                distance_to_lower_nm: 0.0,
            },
        )
        .unwrap()
    }

    #[test]
    fn homogeneous_dipole_normalizes_to_one() {
        let s = emission_pattern(&EmissionGeometry::homogeneous(N_GAAS, LAMBDA), 0.5).unwrap();
        assert_abs_diff_eq!(s.total_power, 1.0, epsilon = 1e-4);
        assert_abs_diff_eq!(s.radiated_power(), 1.0, epsilon = 1e-6);
        assert!(s.guided_power < 1e-6);
        let n = s.power_density.len();
        for i in 0..n / 2 {
            assert_abs_diff_eq!(s.power_density[i], s.power_density[n - 1 - i], epsilon = 1e-9);
        }
    }

    #[test]
    fn homogeneous_pattern_is_textbook_in_plane_dipole() {
        let s = emission_pattern(&EmissionGeometry::homogeneous(1.0, LAMBDA), 0.5).unwrap();
        // bin average of (3/8)(1 + cos²θ) sin θ per radian, converted to per degree
        let w = s.bin_width_deg.to_radians();
        let antiderivative = |t: f64| 0.375 * (-t.cos() - t.cos().powi(3) / 3.0);
        for (&c, &p) in s.theta_deg.iter().zip(&s.power_density) {
            let (a, b) = (
                (c - 0.5 * s.bin_width_deg).to_radians(),
                (c + 0.5 * s.bin_width_deg).to_radians(),
            );
            let expected = (antiderivative(b) - antiderivative(a)) / w * (PI / 180.0);
            assert_abs_diff_eq!(p, expected, epsilon = 1e-9);
        }
    }

    #[test]
    fn gain_media_are_unsupported() {
        let mut g = no_cavity();
        g.upper.exit_index = C64::new(1.0, -0.01);
        assert!(matches!(emission_pattern(&g, 0.5), Err(Error::Unsupported(_))));
    }

    #[test]
    fn coarse_resolution_is_rejected() {
        assert!(matches!(
            emission_pattern(&no_cavity(), 1.0),
            Err(Error::InvalidInput {
                field: "angular_resolution",
                ..
            })
        ));
    }

    #[test]
    fn mismatched_entry_media_are_rejected() {
        let mut g = no_cavity();
        g.lower.entry_index = re(3.0);
        assert!(g.validate().is_err());
    }

    #[test]
    fn starved_quadrature_is_a_numerical_failure() {
        let opts = EmissionOptions {
            k_quadrature: QuadOptions {
                abs_tol: 1e-15,
                rel_tol: 1e-15,
                initial_panels: 1,
                max_panels: 8,
            },
            ..EmissionOptions::default()
        };
        let bottom = build_bragg(re(N_GAAS), re(N_ALAS), LAMBDA, 12).unwrap();
        let mut g = no_cavity();
        g.lower = bottom;
        g.source.distance_to_lower_nm = LAMBDA;
        match emission_pattern_with(&g, &opts) {
            Err(Error::Numerical(msg)) => assert!(msg.contains("panels")),
            other => panic!("expected numerical failure, got {other:?}"),
        }
    }

    #[test]
    fn analytic_limits() {
        assert_abs_diff_eq!(analytic_no_cavity_efficiency(3.5, 1e-9).unwrap(), 0.0, epsilon = 1e-15);
        let eta = analytic_no_cavity_efficiency(3.5, 0.5).unwrap();
        assert_eq!(format!("{:.1}%", eta * 100.0), "0.5%");
        assert!(analytic_no_cavity_efficiency(1.0, 0.5).is_err());
        assert!(analytic_no_cavity_efficiency(3.5, 0.0).is_err());
        assert!(analytic_no_cavity_efficiency(3.5, 1.1).is_err());
    }

    #[test]
    fn collection_rejects_bad_aperture() {
        let s = emission_pattern(&EmissionGeometry::homogeneous(1.0, LAMBDA), 0.5).unwrap();
        assert!(collection_efficiency(&s, 0.0).is_err());
        assert!(collection_efficiency(&s, 1.2).is_err());
        assert!(collection_efficiency(&s, 1e-6).unwrap() < 1e-6);
    }

    #[test]
    fn csv_carries_scalars_in_comments() {
        let s = emission_pattern(&EmissionGeometry::homogeneous(1.0, LAMBDA), 0.5).unwrap();
        let csv = s.to_csv();
        let mut lines = csv.lines();
        assert!(lines.next().unwrap().starts_with("# guided_power = "));
        assert!(lines.next().unwrap().starts_with("# total_power = "));
        assert_eq!(lines.next().unwrap(), "theta_deg,power_density");
        let back = AngularPowerSpectrum::from_csv(&csv).unwrap();
        assert_eq!(back.power_density, s.power_density);
        assert_eq!(back.total_power, s.total_power);
    }
}
