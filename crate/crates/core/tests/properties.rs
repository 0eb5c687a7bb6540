use std::f64::consts::PI;

use num_complex::Complex64;
use oamtopo::channel::{exact_element_channel, mode_channel_matrix, mode_coupling, mode_set, LinkConfig, Method};
use oamtopo::geometry::{
    build_cuca, build_cuca_uniform, build_fuca, build_uca, fuca_projection, validate, FucaSpec, Limits, RingSpec,
    DEFAULT_MIN_SPACING,
};
use oamtopo::metrics::symmetric_se;
use oamtopo::transceiver::{demodulate, modulate, modulation_matrix, Constellation, SymbolFrame, TransceiverPlan};
use proptest::prelude::*;

fn set_equal(a: &[[f64; 3]], b: &[[f64; 3]], tol: f64) -> bool {
    a.len() == b.len()
        && a.iter().all(|p| b.iter().any(|q| (p[0] - q[0]).abs() < tol && (p[1] - q[1]).abs() < tol))
}

fn rotate(p: [f64; 3], a: f64) -> [f64; 3] {
    let (s, c) = a.sin_cos();
    [c * p[0] - s * p[1], s * p[0] + c * p[1], p[2]]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn builders_produce_valid_topologies(rings in 1usize..5, half_k in 2usize..9, aperture in 1.0f64..2.0) {
        let k = 2 * half_k;
        if let Ok(t) = build_cuca_uniform(rings, k, aperture, 0.0) {
            let limits = Limits::new(DEFAULT_MIN_SPACING, aperture).with_budget(rings * k);
            prop_assert!(validate(&t, &limits).is_valid());
            prop_assert_eq!(t.element_count(), rings * k);
            prop_assert!(t.element_positions().iter().all(|p| p[0].hypot(p[1]) <= aperture + 1e-12));
        }
        if rings >= 2 {
            if let Ok(t) = build_fuca(&FucaSpec::new(rings, k, 0.6 * aperture, 0.4 * aperture)) {
                prop_assert!(validate(&t, &Limits::new(DEFAULT_MIN_SPACING, aperture)).is_valid());
            }
        }
    }

    #[test]
    fn concentric_layouts_have_ring_symmetry(rings in 1usize..4, half_k in 2usize..9) {
        let k = 2 * half_k;
        let t = build_cuca_uniform(rings, k, 2.0, 0.0).unwrap();
        let pts = t.element_positions();
        let turned: Vec<[f64; 3]> = pts.iter().map(|p| rotate(*p, 2.0 * PI / k as f64)).collect();
        prop_assert!(set_equal(pts, &turned, 1e-12));
    }

    #[test]
    fn projection_matches_coordinate_subtraction(n in 0usize..4, m in 0usize..4, v in 0usize..4, sigma in 0.0f64..1.5) {
        let mut spec = FucaSpec::new(4, 4, 1.2, 0.8);
        spec.subarray_rotation = sigma;
        let g = fuca_projection(&spec, &spec, n, m, v);
        let topo = build_fuca(&spec).unwrap();
        let p = topo.element_positions()[m * 4 + v];
        let c = spec.center(n);
        let direct = (p[0] - c[0]).hypot(p[1] - c[1]);
        prop_assert!((g.virtual_radius - direct).abs() < 1e-12);
        prop_assert!(g.virtual_radius >= 0.0);
        if n == m {
            prop_assert_eq!(g.virtual_radius, 0.8);
            prop_assert_eq!(g.virtual_azimuth, spec.element_azimuth(m, v));
        }
    }

    #[test]
    fn element_channel_distance_law(d in 1.0f64..500.0, extra in 0.0f64..0.2) {
        let cfg = LinkConfig::default();
        let a = exact_element_channel([0.0; 3], [0.0, 0.0, d], &cfg).unwrap();
        let b = exact_element_channel([0.0; 3], [0.0, 0.0, 2.0 * d], &cfg).unwrap();
        prop_assert!((a.norm() / b.norm() - 2.0).abs() < 1e-12);
        // one extra wavelength leaves the phase unchanged
        let lam = cfg.wavelength();
        let c1 = exact_element_channel([0.0; 3], [0.0, 0.0, d + extra], &cfg).unwrap();
        let c2 = exact_element_channel([0.0; 3], [0.0, 0.0, d + extra + lam], &cfg).unwrap();
        let dphi = (c1 / c1.norm() * (c2 / c2.norm()).conj()).arg();
        prop_assert!(dphi.abs() < 1e-8);
    }

    #[test]
    fn discrete_mode_matrix_is_rotation_invariant(angle in 0.0f64..(2.0 * PI), l in -1i32..=2) {
        let cfg = LinkConfig::default();
        let a = build_cuca(&[RingSpec::new(2.0, 4, 0.0), RingSpec::new(1.0, 4, 0.0)]).unwrap();
        let b = build_cuca(&[RingSpec::new(2.0, 4, angle), RingSpec::new(1.0, 4, angle)]).unwrap();
        let ha = mode_channel_matrix(&a, &a, l, &cfg, Method::Discrete).unwrap();
        let hb = mode_channel_matrix(&b, &b, l, &cfg, Method::Discrete).unwrap();
        prop_assert!(ha.max_abs_diff(&hb) < 1e-12 * ha.max_abs());
    }

    #[test]
    fn modulation_is_unitary_up_to_k(half_k in 2usize..17, ring in 0usize..4, sigma in 0.0f64..1.0) {
        let k = 2 * half_k;
        let w = modulation_matrix(k, ring, sigma).unwrap();
        let g = &w.adjoint() * &w;
        let want = oamtopo::numerics::ComplexMatrix::identity(k).scale(Complex64::new(k as f64, 0.0));
        prop_assert!(g.max_abs_diff(&want) < 1e-12 * k as f64);
    }

    #[test]
    fn power_stays_within_budget(rings in 1usize..4, half_k in 2usize..9, budget in 0.01f64..5.0, seed in 0u8..255) {
        let k = 2 * half_k;
        let plan = TransceiverPlan::equal_power(rings, k, budget);
        prop_assert!(plan.validate(budget).is_ok());
        let mut frame = SymbolFrame::zeros(rings, &plan.modes);
        for (i, z) in frame.symbols.iter_mut().enumerate() {
            *z = Constellation::Qpsk.map(((i as u8).wrapping_mul(31) ^ seed) & 3);
        }
        let x = modulate(&frame, &plan).unwrap();
        let p: f64 = x.iter().map(|z| z.norm_sqr()).sum();
        prop_assert!(p <= budget + 1e-12);
        prop_assert!((p - budget).abs() < 1e-9 * budget);
    }

    #[test]
    fn demodulate_after_modulate_is_diagonal(half_k in 2usize..9, sigma in 0.0f64..0.5) {
        let k = 2 * half_k;
        let mut plan = TransceiverPlan::equal_power(1, k, k as f64);
        plan.tx_rotation = sigma;
        for i in 0..plan.modes.len() {
            let mut frame = SymbolFrame::zeros(1, &plan.modes);
            frame.set(0, i, Complex64::new(1.0, 0.0));
            let x = modulate(&frame, &plan).unwrap();
            let d = demodulate(&x, 0, sigma, &plan.modes).unwrap();
            for (j, z) in d.iter().enumerate() {
                if i != j {
                    prop_assert!(z.norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn se_monotone_in_power_and_noise(snr in -10.0f64..30.0, step in 0.5f64..10.0) {
        let t = build_cuca_uniform(2, 8, 2.0, 0.0).unwrap();
        let cfg = LinkConfig::default().with_snr_db(snr);
        let base = symmetric_se(&t, &cfg, Method::Discrete).unwrap().total_bps;
        let mut more_power = cfg;
        more_power.power_budget *= 10f64.powf(step / 10.0);
        let mut more_noise = cfg;
        more_noise.noise_power *= 10f64.powf(step / 10.0);
        prop_assert!(symmetric_se(&t, &more_power, Method::Discrete).unwrap().total_bps >= base);
        prop_assert!(symmetric_se(&t, &more_noise, Method::Discrete).unwrap().total_bps <= base);
    }
}

#[test]
fn concentric_modes_do_not_couple() {
    let cfg = LinkConfig::default();
    for (rings, k) in [(1, 16), (2, 8), (4, 4), (3, 6)] {
        let t = build_cuca_uniform(rings, k, 2.0, 0.0).unwrap();
        let c = mode_coupling(&t, &t, &cfg, &mode_set(k)).unwrap();
        assert!(c.max_leakage_ratio() < 1e-10, "{rings}x{k}: {}", c.max_leakage_ratio());
    }
}

#[test]
fn fuca_analytic_diagonal_equals_ring_gain() {
    let cfg = LinkConfig::default();
    let t = build_fuca(&FucaSpec::new(4, 8, 1.2, 0.8)).unwrap();
    let u = build_uca(8, 0.8, 0.0).unwrap();
    for l in mode_set(8) {
        let f = mode_channel_matrix(&t, &t, l, &cfg, Method::Analytic).unwrap();
        let c = mode_channel_matrix(&u, &u, l, &cfg, Method::Analytic).unwrap();
        for m in 0..4 {
            assert!((f[(m, m)] - c[(0, 0)]).norm() <= 1e-12 * c[(0, 0)].norm().max(1e-30), "l={l} m={m}");
        }
    }
}

#[test]
fn fuca_analytic_tracks_discrete() {
    // the averaged virtual-ring model against the exact composition
    let cfg = LinkConfig::default();
    let t = build_fuca(&FucaSpec::new(4, 8, 1.2, 0.8)).unwrap();
    let mut worst: f64 = 0.0;
    for l in -2..=2 {
        let a = mode_channel_matrix(&t, &t, l, &cfg, Method::Analytic).unwrap();
        let d = mode_channel_matrix(&t, &t, l, &cfg, Method::Discrete).unwrap();
        worst = worst.max(a.max_abs_diff(&d) / d.max_abs());
    }
    assert!(worst < 0.05, "worst relative deviation {worst}");
}
