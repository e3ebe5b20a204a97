//! Plane-wave optics of planar layer stacks.
//!
//! Conventions used throughout the crate:
//!
//! * time dependence `exp(-iωt)`, so a wave travelling down the growth axis
//!   through a layer of thickness `d` picks up `exp(+i k_z d)`;
//! * `k_z = sqrt((n k0)^2 - k_par^2)` on the branch `Im k_z >= 0`, with
//!   `Re k_z >= 0` when the imaginary part vanishes;
//! * amplitudes are tangential electric fields for both polarizations. The
//!   tilted (optical) admittance is `k_z / k0` for TE and `n^2 k0 / k_z` for
//!   TM, and `r = (Y0 - Y1) / (Y0 + Y1)` at a bare interface. With this
//!   choice TE and TM reflections coincide at normal incidence.
//!
//! Lengths are in nanometres, wavevectors in rad/nm.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::{Error, Result, C64};

/// Default index of GaAs near 900 nm.
pub const N_GAAS: f64 = 3.5;
/// Default index of AlAs near 900 nm (Al0.98Ga0.02As is treated as AlAs).
pub const N_ALAS: f64 = 2.95;
pub const N_AIR: f64 = 1.0;
pub const DEFAULT_DESIGN_WAVELENGTH_NM: f64 = 900.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Polarization {
    Te,
    Tm,
}

impl Polarization {
    pub const BOTH: [Polarization; 2] = [Polarization::Te, Polarization::Tm];
}

/// A finite layer. Semi-infinite media live on [`LayerStack`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    thickness_nm: f64,
    index: C64,
}

impl Layer {
    pub fn new(thickness_nm: f64, index: C64) -> Result<Self> {
        if !(thickness_nm.is_finite() && thickness_nm > 0.0) {
            return Err(Error::invalid(
                "thickness_nm",
                format!("must be finite and > 0, got {thickness_nm}"),
            ));
        }
        check_index("refractive_index", index)?;
        if index.im < 0.0 {
            return Err(Error::invalid(
                "refractive_index",
                "Im(n) < 0 (gain) is not a passive layer",
            ));
        }
        Ok(Self { thickness_nm, index })
    }

    pub fn thickness_nm(&self) -> f64 {
        self.thickness_nm
    }

    pub fn index(&self) -> C64 {
        self.index
    }

    /// Same thickness, index shifted by `i * extinction`.
    pub fn with_added_extinction(&self, extinction: f64) -> Self {
        Self {
            thickness_nm: self.thickness_nm,
            index: self.index + C64::new(0.0, extinction),
        }
    }
}

/// Ordered layers (top to bottom) between two half-spaces. May be empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerStack {
    pub entry_index: C64,
    pub layers: Vec<Layer>,
    pub exit_index: C64,
}

impl LayerStack {
    pub fn new(entry_index: C64, layers: Vec<Layer>, exit_index: C64) -> Self {
        Self {
            entry_index,
            layers,
            exit_index,
        }
    }

    /// A bare interface between two half-spaces.
    pub fn bare(entry_index: C64, exit_index: C64) -> Self {
        Self::new(entry_index, Vec::new(), exit_index)
    }

    /// The same structure seen from the exit side.
    pub fn reversed(&self) -> Self {
        Self {
            entry_index: self.exit_index,
            layers: self.layers.iter().rev().copied().collect(),
            exit_index: self.entry_index,
        }
    }

    pub fn total_thickness_nm(&self) -> f64 {
        self.layers.iter().map(|l| l.thickness_nm).sum()
    }

    /// Every index in the structure, half-spaces included.
    pub fn indices(&self) -> impl Iterator<Item = C64> + '_ {
        std::iter::once(self.entry_index)
            .chain(self.layers.iter().map(|l| l.index))
            .chain(std::iter::once(self.exit_index))
    }

    pub fn validate(&self) -> Result<()> {
        check_index("entry_index", self.entry_index)?;
        check_index("exit_index", self.exit_index)?;
        for l in &self.layers {
            Layer::new(l.thickness_nm, l.index)?;
        }
        Ok(())
    }
}

/// Incidence parameters for [`fresnel_interface`] and [`stack_response`].
///
/// `k_parallel` may exceed the entry light line; the dipole solver relies on
/// evanescent incidence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlaneWaveQuery {
    pub vacuum_wavelength_nm: f64,
    pub k_parallel: f64,
    pub polarization: Polarization,
}

impl PlaneWaveQuery {
    pub fn normal(vacuum_wavelength_nm: f64, polarization: Polarization) -> Self {
        Self {
            vacuum_wavelength_nm,
            k_parallel: 0.0,
            polarization,
        }
    }

    /// Incidence at polar angle `theta` (radians) inside a medium of real index `n`.
    pub fn at_angle(vacuum_wavelength_nm: f64, n: f64, theta: f64, polarization: Polarization) -> Self {
        Self {
            vacuum_wavelength_nm,
            k_parallel: n * 2.0 * PI / vacuum_wavelength_nm * theta.sin(),
            polarization,
        }
    }

    pub fn k0(&self) -> f64 {
        2.0 * PI / self.vacuum_wavelength_nm
    }

    fn validate(&self) -> Result<()> {
        if !(self.vacuum_wavelength_nm.is_finite() && self.vacuum_wavelength_nm > 0.0) {
            return Err(Error::invalid("vacuum_wavelength_nm", "must be finite and > 0"));
        }
        if !(self.k_parallel.is_finite() && self.k_parallel >= 0.0) {
            return Err(Error::invalid("in_plane_wavevector", "must be finite and >= 0"));
        }
        Ok(())
    }
}

/// Amplitude reflection and transmission (tangential electric field).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Response {
    pub r: C64,
    pub t: C64,
}

impl Response {
    pub fn reflectance(&self) -> f64 {
        self.r.norm_sqr()
    }
}

fn check_index(field: &'static str, n: C64) -> Result<()> {
    if !(n.re.is_finite() && n.im.is_finite()) {
        return Err(Error::invalid(field, "refractive index must be finite"));
    }
    if n.re <= 0.0 {
        return Err(Error::invalid(field, format!("Re(n) must be > 0, got {}", n.re)));
    }
    Ok(())
}

/// Normal wavevector component on the `Im k_z >= 0` branch.
pub fn normal_wavevector(index: C64, k0: f64, k_parallel: f64) -> C64 {
    let nk = index * k0;
    principal_branch((nk * nk - k_parallel * k_parallel).sqrt())
}

/// Picks `Im k_z >= 0`, and `Re k_z >= 0` when the imaginary part vanishes.
pub fn principal_branch(kz: C64) -> C64 {
    if kz.im < 0.0 || (kz.im == 0.0 && kz.re < 0.0) {
        -kz
    } else {
        kz
    }
}

/// Tilted admittance in units of the vacuum admittance.
pub fn admittance(index: C64, kz: C64, k0: f64, polarization: Polarization) -> C64 {
    match polarization {
        Polarization::Te => kz / k0,
        Polarization::Tm => index * index * k0 / kz,
    }
}

fn half_space_admittance(field: &'static str, index: C64, q: &PlaneWaveQuery) -> Result<C64> {
    let k0 = q.k0();
    let kz = normal_wavevector(index, k0, q.k_parallel);
    if q.polarization == Polarization::Tm && kz.norm() == 0.0 {
        return Err(Error::invalid(
            field,
            "TM incidence exactly at the light line of a half-space",
        ));
    }
    Ok(admittance(index, kz, k0, q.polarization))
}

/// Power transmittance weight `Re(Y_exit) / Re(Y_entry)` applied to `|t|^2`.
pub fn transmittance(stack: &LayerStack, q: &PlaneWaveQuery, response: &Response) -> Result<f64> {
    let y0 = half_space_admittance("entry_index", stack.entry_index, q)?;
    let ys = half_space_admittance("exit_index", stack.exit_index, q)?;
    Ok(ys.re / y0.re * response.t.norm_sqr())
}

/// Reflection and transmission at a single interface from medium `n1` into `n2`.
pub fn fresnel_interface(n1: C64, n2: C64, query: &PlaneWaveQuery) -> Result<Response> {
    check_index("n1", n1)?;
    check_index("n2", n2)?;
    stack_response(&LayerStack::bare(n1, n2), query)
}

fn sinc(z: C64) -> C64 {
    if z.norm() < 1e-4 {
        let z2 = z * z;
        C64::new(1.0, 0.0) - z2 / 6.0 + z2 * z2 / 120.0
    } else {
        z.sin() / z
    }
}

/// Characteristic 2x2 matrix of one layer, written so that neither
/// polarization divides by `k_z` (finite at the layer's own light line).
fn layer_matrix(layer: &Layer, kz: C64, k0: f64, pol: Polarization) -> [[C64; 2]; 2] {
    let n = layer.index;
    let d = layer.thickness_nm;
    let delta = kz * d;
    let (c, s) = (delta.cos(), delta.sin());
    let i = C64::i();
    let (m12, m21) = match pol {
        Polarization::Te => (-i * k0 * d * sinc(delta), -i * (kz / k0) * s),
        Polarization::Tm => (-i * kz * s / (n * n * k0), -i * n * n * k0 * d * sinc(delta)),
    };
    [[c, m12], [m21, c]]
}

/// Total amplitude response of the stack, phase referenced to its entry boundary.
pub fn stack_response(stack: &LayerStack, query: &PlaneWaveQuery) -> Result<Response> {
    query.validate()?;
    stack.validate()?;
    let (k0, kp) = (query.k0(), query.k_parallel);
    stack_response_with(stack, k0, query.polarization, |n| normal_wavevector(n, k0, kp)).ok_or_else(|| {
        Error::invalid(
            "in_plane_wavevector",
            "TM incidence exactly at the light line of a half-space",
        )
    })
}

/// Unvalidated core of [`stack_response`]. `kz` maps a medium's index to its
/// normal wavevector, which lets callers supply a cancellation-free form near
/// grazing incidence. Returns `None` only for TM exactly at a half-space light line.
pub(crate) fn stack_response_with<F: Fn(C64) -> C64>(
    stack: &LayerStack,
    k0: f64,
    pol: Polarization,
    kz: F,
) -> Option<Response> {
    let kz0 = kz(stack.entry_index);
    let kzs = kz(stack.exit_index);
    if pol == Polarization::Tm && (kz0.norm() == 0.0 || kzs.norm() == 0.0) {
        return None;
    }
    let y0 = admittance(stack.entry_index, kz0, k0, pol);
    let ys = admittance(stack.exit_index, kzs, k0, pol);
    // [B, C] = M_1 ... M_N [1, ys], accumulated from the bottom up
    let mut b = C64::new(1.0, 0.0);
    let mut c = ys;
    for layer in stack.layers.iter().rev() {
        let m = layer_matrix(layer, kz(layer.index), k0, pol);
        let nb = m[0][0] * b + m[0][1] * c;
        let nc = m[1][0] * b + m[1][1] * c;
        b = nb;
        c = nc;
    }
    let denom = y0 * b + c;
    Some(Response {
        r: (y0 * b - c) / denom,
        t: 2.0 * y0 / denom,
    })
}

/// Which material of a Bragg pair touches the entry medium.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BraggFacing {
    /// Low-index layer first; the usual choice for a high-index cavity spacer.
    #[default]
    LowFirst,
    HighFirst,
}

/// Quarter-wave Bragg mirror of `periods` pairs, each layer `λ / (4 Re n)` thick.
///
/// The low-index layer faces the entry medium; both half-spaces default to
/// `n_high` (a mirror embedded in the high-index material). Use
/// [`build_bragg_facing`] to choose the other orientation.
pub fn build_bragg(n_high: C64, n_low: C64, design_wavelength_nm: f64, periods: usize) -> Result<LayerStack> {
    build_bragg_facing(n_high, n_low, design_wavelength_nm, periods, BraggFacing::LowFirst)
}

pub fn build_bragg_facing(
    n_high: C64,
    n_low: C64,
    design_wavelength_nm: f64,
    periods: usize,
    facing: BraggFacing,
) -> Result<LayerStack> {
    check_index("n_high", n_high)?;
    check_index("n_low", n_low)?;
    if !(design_wavelength_nm.is_finite() && design_wavelength_nm > 0.0) {
        return Err(Error::invalid("design_wavelength_nm", "must be finite and > 0"));
    }
    let quarter = |n: C64| Layer::new(design_wavelength_nm / (4.0 * n.re), n);
    let (first, second) = match facing {
        BraggFacing::LowFirst => (quarter(n_low)?, quarter(n_high)?),
        BraggFacing::HighFirst => (quarter(n_high)?, quarter(n_low)?),
    };
    let layers = (0..periods).flat_map(|_| [first, second]).collect();
    Ok(LayerStack::new(n_high, layers, n_high))
}
