//! Planar GaAs microcavities between AlAs/GaAs Bragg mirrors, and sweeps
//! over their period counts.
//!
//! Cavity lengths and dipole depths are in material wavelengths
//! `λ0 / n_GaAs`. The dipole depth is measured down from the top of the
//! cavity, which is the air surface when there is no top mirror.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::dipole::{
    collection_efficiency, emission_pattern_with, AngularPowerSpectrum, DipoleSource, EmissionGeometry, EmissionOptions,
};
use crate::optics::{build_bragg, Layer, LayerStack, DEFAULT_DESIGN_WAVELENGTH_NM, N_AIR, N_ALAS, N_GAAS};
use crate::{Error, Result, C64};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CavityDesign {
    pub bottom_periods: usize,
    pub top_periods: usize,
    /// Cavity length in material wavelengths; a positive multiple of 0.5.
    pub cavity_order: f64,
    /// Distance from the top of the cavity down to the dipole, material wavelengths.
    pub dipole_depth_below_surface: f64,
    pub numerical_aperture: f64,
    pub design_wavelength_nm: f64,
}

/// Three-wavelength cavity on a 12-period mirror, dipole two wavelengths
/// below the GaAs/air surface and one above the mirror.
pub fn fig5_geometry() -> CavityDesign {
    CavityDesign {
        bottom_periods: 12,
        top_periods: 0,
        cavity_order: 3.0,
        dipole_depth_below_surface: 2.0,
        numerical_aperture: 0.5,
        design_wavelength_nm: DEFAULT_DESIGN_WAVELENGTH_NM,
    }
}

/// One-wavelength cavity with the dipole at its centre, 12 bottom periods
/// and the best top mirror found by [`optimize_top_mirror`].
pub fn top_mirror_geometry() -> CavityDesign {
    CavityDesign {
        bottom_periods: 12,
        top_periods: 4,
        cavity_order: 1.0,
        dipole_depth_below_surface: 0.5,
        numerical_aperture: 0.5,
        design_wavelength_nm: DEFAULT_DESIGN_WAVELENGTH_NM,
    }
}

/// Looks up a cavity preset by name.
pub fn preset(name: &str) -> Option<CavityDesign> {
    match name {
        "fig5_geometry" => Some(fig5_geometry()),
        "top_mirror_geometry" => Some(top_mirror_geometry()),
        _ => None,
    }
}

impl CavityDesign {
    pub fn validate(&self) -> Result<()> {
        let order = self.cavity_order;
        if !(order.is_finite() && order > 0.0 && (2.0 * order).fract() == 0.0) {
            return Err(Error::invalid(
                "cavity_order",
                format!("must be a positive multiple of 0.5, got {order}"),
            ));
        }
        let depth = self.dipole_depth_below_surface;
        if !(depth.is_finite() && (0.0..=order).contains(&depth)) {
            return Err(Error::invalid(
                "dipole_depth_below_surface",
                format!("must lie inside the cavity [0, {order}], got {depth}"),
            ));
        }
        if !(self.numerical_aperture > 0.0 && self.numerical_aperture <= 1.0) {
            return Err(Error::invalid(
                "numerical_aperture",
                format!("must be in (0, 1], got {}", self.numerical_aperture),
            ));
        }
        if !(self.design_wavelength_nm.is_finite() && self.design_wavelength_nm > 0.0) {
            return Err(Error::invalid("design_wavelength_nm", "must be finite and > 0"));
        }
        Ok(())
    }

    fn material_wavelength_nm(&self) -> f64 {
        self.design_wavelength_nm / N_GAAS
    }

    /// Height of the dipole above the bottom mirror, material wavelengths.
    pub fn dipole_height_above_mirror(&self) -> f64 {
        self.cavity_order - self.dipole_depth_below_surface
    }

    pub fn geometry(&self) -> Result<EmissionGeometry> {
        self.validate()?;
        let gaas = C64::new(N_GAAS, 0.0);
        let alas = C64::new(N_ALAS, 0.0);
        let lam = self.design_wavelength_nm;
        let mut top = Vec::with_capacity(2 * self.top_periods);
        for _ in 0..self.top_periods {
            top.push(Layer::new(lam / (4.0 * N_ALAS), alas)?);
            top.push(Layer::new(lam / (4.0 * N_GAAS), gaas)?);
        }
        let upper = LayerStack::new(gaas, top, C64::new(N_AIR, 0.0));
        let mirror = build_bragg(gaas, alas, lam, self.bottom_periods)?;
        let lower = LayerStack::new(gaas, mirror.layers, gaas);
        let unit = self.material_wavelength_nm();
        EmissionGeometry::new(
            upper,
            lower,
            DipoleSource {
                vacuum_wavelength_nm: lam,
                host_index: gaas,
                distance_to_upper_nm: self.dipole_depth_below_surface * unit,
                distance_to_lower_nm: self.dipole_height_above_mirror() * unit,
            },
        )
    }

    pub fn emission(&self, opts: &EmissionOptions) -> Result<AngularPowerSpectrum> {
        emission_pattern_with(&self.geometry()?, opts)
    }

    /// Collection efficiency at the design's own numerical aperture.
    pub fn efficiency(&self, opts: &EmissionOptions) -> Result<f64> {
        collection_efficiency(&self.emission(opts)?, self.numerical_aperture)
    }
}

/// Efficiency versus one integer design parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub parameter: String,
    pub numerical_aperture: f64,
    pub values: Vec<usize>,
    pub efficiencies: Vec<f64>,
    /// Index of the largest efficiency; ties go to the first, i.e. fewer periods.
    pub argmax: usize,
}

impl SweepResult {
    fn new(parameter: &str, numerical_aperture: f64, values: Vec<usize>, efficiencies: Vec<f64>) -> Self {
        let mut argmax = 0;
        for (i, &e) in efficiencies.iter().enumerate() {
            if e > efficiencies[argmax] {
                argmax = i;
            }
        }
        Self {
            parameter: parameter.to_string(),
            numerical_aperture,
            values,
            efficiencies,
            argmax,
        }
    }

    pub fn best_value(&self) -> usize {
        self.values[self.argmax]
    }

    pub fn best_efficiency(&self) -> f64 {
        self.efficiencies[self.argmax]
    }

    pub fn efficiency_at(&self, value: usize) -> Option<f64> {
        self.values
            .iter()
            .position(|&v| v == value)
            .map(|i| self.efficiencies[i])
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("parameter,efficiency\n");
        for (v, e) in self.values.iter().zip(&self.efficiencies) {
            let _ = writeln!(out, "{v},{e}");
        }
        out
    }
}

/// Efficiency of `base` with 0..=max_periods bottom periods, one result per aperture.
/// Each design is solved once and read out at every aperture.
pub fn sweep_bottom_mirror(
    base: &CavityDesign,
    max_periods: usize,
    numerical_apertures: &[f64],
    opts: &EmissionOptions,
) -> Result<Vec<SweepResult>> {
    if max_periods < 12 {
        return Err(Error::invalid(
            "max_periods",
            format!("must be >= 12, got {max_periods}"),
        ));
    }
    base.validate()?;
    for &na in numerical_apertures {
        if !(na > 0.0 && na <= 1.0) {
            return Err(Error::invalid(
                "numerical_aperture",
                format!("must be in (0, 1], got {na}"),
            ));
        }
    }
    let values: Vec<usize> = (0..=max_periods).collect();
    let spectra = opts
        .execution
        .map_slice(&values, |&n| {
            CavityDesign {
                bottom_periods: n,
                ..*base
            }
            .emission(opts)
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    numerical_apertures
        .iter()
        .map(|&na| {
            let eff = spectra
                .iter()
                .map(|s| collection_efficiency(s, na))
                .collect::<Result<Vec<_>>>()?;
            Ok(SweepResult::new("bottom_periods", na, values.clone(), eff))
        })
        .collect()
}

/// Efficiency of `base` on `bottom_periods` with 0..=max_top top periods.
pub fn optimize_top_mirror(
    base: &CavityDesign,
    bottom_periods: usize,
    max_top: usize,
    opts: &EmissionOptions,
) -> Result<SweepResult> {
    if max_top < 1 {
        return Err(Error::invalid("max_top", "must be >= 1"));
    }
    base.validate()?;
    let values: Vec<usize> = (0..=max_top).collect();
    let eff = opts
        .execution
        .map_slice(&values, |&n| {
            CavityDesign {
                bottom_periods,
                top_periods: n,
                ..*base
            }
            .efficiency(opts)
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepResult::new("top_periods", base.numerical_aperture, values, eff))
}
