use oamtopo::channel::LinkConfig;
use oamtopo::geometry::{validate, Limits};
use oamtopo::optimizer::{alternating_optimize, capacity, OptimizerConfig, SearchFamily};

#[test]
fn trace_is_monotone_and_result_is_buildable() {
    let cfg = OptimizerConfig { budget: 12, resolution: 0.05, ..Default::default() };
    let link = LinkConfig::default();
    let r = alternating_optimize(&cfg, &link).unwrap();
    for family in [SearchFamily::Cuca, SearchFamily::Fuca] {
        let caps: Vec<f64> = r.trace.iter().filter(|t| t.family == family).map(|t| t.capacity_bps).collect();
        assert!(caps.windows(2).all(|w| w[1] >= w[0]), "{family:?}: {caps:?}");
    }
    assert!(r.families.iter().all(|f| f.capacity_bps <= r.capacity_bps));
    let topo = r.params.to_topology().unwrap();
    let limits = Limits::new(link.min_spacing, cfg.aperture).with_budget(cfg.budget);
    assert!(validate(&topo, &limits).is_valid());
    assert_eq!(r.tx_positions.len(), r.params.element_count());
    assert!(r.rx_positions.iter().all(|p| (p[2] - link.distance).abs() < 1e-12));
    assert_eq!(r.beamformers.len(), r.params.rings);
    let again = capacity(&r.params, &cfg, &link).unwrap();
    assert!((again - r.capacity_bps).abs() <= 1e-9 * again);
}

#[test]
fn repeated_runs_agree() {
    let cfg = OptimizerConfig { budget: 8, resolution: 0.1, ..Default::default() };
    let link = LinkConfig::default();
    let a = alternating_optimize(&cfg, &link).unwrap();
    let b = alternating_optimize(&cfg, &link).unwrap();
    assert_eq!(a.params, b.params);
    assert_eq!(a.capacity_bps.to_bits(), b.capacity_bps.to_bits());
}
