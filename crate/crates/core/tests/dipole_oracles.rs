use speds_core::cavity::{fig5_geometry, top_mirror_geometry, CavityDesign};
use speds_core::dipole::{
    analytic_no_cavity_efficiency, collection_efficiency, emission_pattern, emission_pattern_with,
    radiated_power_k_space, DipoleSource, EmissionGeometry, EmissionOptions,
};
use speds_core::optics::{build_bragg, LayerStack, N_ALAS, N_GAAS};
use speds_core::C64;

fn re(x: f64) -> C64 {
    C64::new(x, 0.0)
}

fn no_cavity() -> CavityDesign {
    CavityDesign {
        bottom_periods: 0,
        ..fig5_geometry()
    }
}

#[test]
fn bare_surface_matches_escape_cone_formula() {
    let s = no_cavity().emission(&EmissionOptions::default()).unwrap();
    for na in [0.1, 0.3, 0.5] {
        let numeric = collection_efficiency(&s, na).unwrap();
        let analytic = analytic_no_cavity_efficiency(N_GAAS, na).unwrap();
        assert!(
            (numeric / analytic - 1.0).abs() < 0.1,
            "NA {na}: numeric {numeric} vs analytic {analytic}"
        );
    }
}

#[test]
fn unbounded_host_radiates_unit_power() {
    for n in [1.0, N_GAAS] {
        let s = emission_pattern(&EmissionGeometry::homogeneous(n, 900.0), 0.5).unwrap();
        assert!((s.total_power - 1.0).abs() < 1e-4);
        assert!((s.radiated_power() - 1.0).abs() < 1e-4);
        assert!(s.guided_power < 1e-4);
        // textbook in-plane pattern averaged over azimuth: 3/8 (1 + cos^2) sin per radian
        let i = s.theta_deg.iter().position(|&t| (t - 45.25).abs() < 1e-9).unwrap();
        let th = 45.25f64.to_radians();
        let expected = 0.375 * (1.0 + th.cos().powi(2)) * th.sin() * std::f64::consts::PI / 180.0;
        assert!((s.power_density[i] / expected - 1.0).abs() < 1e-4);
    }
}

#[test]
fn energy_bookkeeping_closes() {
    let opts = EmissionOptions::default();
    for design in [no_cavity(), fig5_geometry(), top_mirror_geometry()] {
        let g = design.geometry().unwrap();
        let s = emission_pattern_with(&g, &opts).unwrap();
        let (up, down) = radiated_power_k_space(&g, &opts).unwrap();
        let sum = s.radiated_up + s.radiated_down + s.guided_power;
        assert!((sum / s.total_power - 1.0).abs() < 5e-3);
        assert!(((s.radiated_up + s.radiated_down) / (up + down) - 1.0).abs() < 5e-3);
        assert!((s.radiated_up / up - 1.0).abs() < 5e-3);
        assert!(s.guided_power >= 0.0);
    }
}

#[test]
fn mirror_symmetric_structure_has_symmetric_pattern() {
    let mirror = build_bragg(re(N_GAAS), re(N_ALAS), 900.0, 3).unwrap();
    let stack = LayerStack::new(re(N_GAAS), mirror.layers, re(1.0));
    let g = EmissionGeometry::new(
        stack.clone(),
        stack,
        DipoleSource {
            vacuum_wavelength_nm: 900.0,
            host_index: re(N_GAAS),
            distance_to_upper_nm: 128.57,
            distance_to_lower_nm: 128.57,
        },
    )
    .unwrap();
    let s = emission_pattern(&g, 0.5).unwrap();
    let n = s.power_density.len();
    let peak = s.power_density.iter().cloned().fold(0.0, f64::max);
    for i in 0..n / 2 {
        assert!((s.power_density[i] - s.power_density[n - 1 - i]).abs() < 1e-6 * peak.max(1.0));
    }
}

#[test]
fn refinement_moves_efficiency_by_less_than_two_hundredths_of_a_point() {
    let g = fig5_geometry().geometry().unwrap();
    let coarse = collection_efficiency(&emission_pattern_with(&g, &EmissionOptions::default()).unwrap(), 0.5).unwrap();
    let base = EmissionOptions::default();
    let fine_opts = EmissionOptions {
        angular_resolution_deg: 0.25,
        k_quadrature: base.k_quadrature.tightened(4.0),
        bin_quadrature: base.bin_quadrature.tightened(4.0),
        ..base
    };
    let fine = collection_efficiency(&emission_pattern_with(&g, &fine_opts).unwrap(), 0.5).unwrap();
    assert!((coarse - fine).abs() * 100.0 < 0.02, "{coarse} vs {fine}");
}

#[test]
fn absorbed_power_counts_as_non_radiated() {
    let lossy = LayerStack::new(
        re(N_GAAS),
        vec![speds_core::optics::Layer::new(100.0, C64::new(3.0, 0.0))
            .unwrap()
            .with_added_extinction(0.01)],
        re(1.0),
    );
    let g = EmissionGeometry::new(
        lossy,
        LayerStack::bare(re(N_GAAS), re(N_GAAS)),
        fig5_geometry().geometry().unwrap().source,
    );
    let g = g.unwrap();
    let s = emission_pattern(&g, 0.5).unwrap();
    assert!(s.guided_power > 0.0);
}
