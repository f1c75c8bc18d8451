use cryoshield::network::{NetworkFile, ThermalNetwork};
use cryoshield::solver::{flux_report, solve_steady_state, SolveOptions};
use cryoshield::studies::{
    apply_overrides, evaluate, final_configuration, run_final_configuration, ModelConfig,
    ViewFactorStore,
};

fn model(rays: u64) -> ModelConfig {
    let mut m = final_configuration();
    m.rays.rays_per_side = rays;
    m
}

fn with(m: &ModelConfig, o: &[&str]) -> ModelConfig {
    let o: Vec<String> = o.iter().map(|s| s.to_string()).collect();
    apply_overrides(m, &o).unwrap()
}

#[test]
fn reference_pipeline_is_balanced_and_ordered() {
    let store = ViewFactorStore::in_memory();
    let e = evaluate(&model(500), &store).unwrap();
    assert!(e.result.converged);
    let s = e.summary().unwrap();
    let sh: Vec<f64> = s.t_shields.iter().map(|t| t.unwrap()).collect();
    // Temperatures fall from the spacecraft side towards the bench.
    assert!(sh[0] > sh[1] && sh[1] > sh[2], "{sh:?}");
    assert!(s.t_ob < 300.0 && s.t_tv < s.t_ob, "{s:?}");
    let closure = flux_report(&e.network, &e.result).closure();
    assert!(closure.abs() <= 10.0 * SolveOptions::default().tolerance);
}

#[test]
fn emissivity_changes_reuse_the_trace() {
    let store = ViewFactorStore::in_memory();
    let m = model(300);
    evaluate(&m, &store).unwrap();
    evaluate(&with(&m, &["coating_fraction=0.5"]), &store).unwrap();
    evaluate(&with(&m, &["network.ccd_q=0.0"]), &store).unwrap();
    assert_eq!(store.traces(), 1);
    evaluate(&with(&m, &["shields.phi3_deg=25.0"]), &store).unwrap();
    assert_eq!(store.traces(), 2);
}

#[test]
fn cached_directory_store_matches_memory() {
    let dir = tempfile::tempdir().unwrap();
    let m = model(300);
    let a = evaluate(&m, &ViewFactorStore::with_dir(dir.path())).unwrap();
    let warm = ViewFactorStore::with_dir(dir.path());
    let b = evaluate(&m, &warm).unwrap();
    assert_eq!(warm.traces(), 0);
    assert_eq!(a.result.temperatures, b.result.temperatures);
}

#[test]
fn network_export_round_trips_through_toml() {
    let store = ViewFactorStore::in_memory();
    let e = evaluate(&model(300), &store).unwrap();
    let text = NetworkFile::from_network(&e.network).to_toml();
    let back: ThermalNetwork<f64> = NetworkFile::parse(&text).unwrap().build(None).unwrap();
    let r = solve_steady_state(&back, &SolveOptions::default()).unwrap();
    for (x, y) in r.temperatures.iter().zip(&e.result.temperatures) {
        assert!((x - y).abs() < 1e-6, "{x} vs {y}");
    }
}

#[test]
fn single_precision_network_tracks_double() {
    let store = ViewFactorStore::in_memory();
    let e = evaluate(&model(300), &store).unwrap();
    let net32: ThermalNetwork<f32> = e.network.cast();
    let opts = SolveOptions {
        tolerance: 1e-3,
        ..SolveOptions::default()
    };
    let r = solve_steady_state(&net32, &opts).unwrap();
    for (x, y) in r.temperatures.iter().zip(&e.result.temperatures) {
        assert!((*x as f64 - y).abs() < 0.05 * y.max(1.0), "{x} vs {y}");
    }
}

#[test]
fn chip_on_bench_warms_it() {
    let store = ViewFactorStore::in_memory();
    let m = model(300);
    let below = run_final_configuration(&m, &store).unwrap();
    let on = run_final_configuration(&with(&m, &["network.chip=\"bench\""]), &store).unwrap();
    assert!(on.summary.t_ob > below.summary.t_ob);
    assert!(on.bench_ranking.iter().any(|(l, _)| l == "chip"));
    assert!(!below.bench_ranking.iter().any(|(l, _)| l == "chip"));
}

#[test]
fn zero_dissipation_makes_the_bench_isothermal() {
    let store = ViewFactorStore::in_memory();
    let m = with(
        &model(300),
        &[
            "network.ccd_q=0.0",
            "network.optics_q=0.0",
            "network.chip_q=0.0",
            "network.harness_area=0.0",
        ],
    );
    let f = run_final_configuration(&m, &store).unwrap();
    assert!(f.bench_spread() < 1e-9, "{}", f.bench_spread());
}
