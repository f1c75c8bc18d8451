//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any failed.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use clap::Parser;
use cryoshield::decoherence::{
    blackbody_rates, regime, visibility, EnvState, ExperimentTimeline, Particle,
};
use cryoshield::geometry::{
    MeshDensity, MeshedScene, Shape, Side, SideProperties, SurfacePrimitive, Vec3,
};
use cryoshield::network::{Conductor, Node, NodeId, RadExchange, ThermalNetwork};
use cryoshield::num::STEFAN_BOLTZMANN;
use cryoshield::solver::{flux_report, jacobian_fd_error, solve_steady_state, SolveOptions};
use cryoshield::studies::{
    apply_overrides, check_coating, check_dissipation, check_shield_geometry,
    check_strut_couplings, evaluate, final_configuration, run_final_configuration, run_sweep,
    ModelConfig, StudyTable, SweepOptions, SweepSpec, TrendCheck, ViewFactorStore,
};
use cryoshield::viewfactor::{
    analytic_disk_viewfactor, check_reciprocity, check_reciprocity_grouped, side_index,
    trace_view_factors, RayBudget,
};
use cryoshield::Network;
use cryoshield_cli::{run, RunConfig};

// Pinned tolerances.
const DISK_RAYS: u64 = 1_000_000;
const DISK_SIGMAS: f64 = 3.0;
const DISK_SECONDS: f64 = 60.0;
const RECIPROCITY_SIGMAS: f64 = 3.0;
/// Float row sums may differ from 1 by one ulp per summed entry.
const ROW_SUM_ULPS_PER_TERM: f64 = 1.0;
const RADIATOR_TOL_K: f64 = 1e-6;
const FLUX_CLOSURE_FACTOR: f64 = 10.0;
const JACOBIAN_REL: f64 = 1e-6;
const JACOBIAN_STATES: usize = 20;
const JACOBIAN_STEP_K: f64 = 1e-3;
const GEOMETRY_SECONDS: f64 = 1800.0;
const OB_SMALLNESS: f64 = 0.2;
const BENCH_SPREAD_MAX: f64 = 0.15;
/// Ray budget of the study sweeps below.
const STUDY_RAYS: u64 = 3000;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

fn from_checks(checks: &[TrendCheck]) -> Outcome {
    let failed: Vec<String> = checks
        .iter()
        .filter(|c| !c.passed)
        .map(|c| c.to_string())
        .collect();
    if failed.is_empty() {
        outcome(true, format!("{} checks", checks.len()))
    } else {
        outcome(false, failed.join("; "))
    }
}

fn study_model() -> ModelConfig {
    let mut m = final_configuration();
    m.rays.rays_per_side = STUDY_RAYS;
    m
}

fn study(name: &str, store: &ViewFactorStore) -> StudyTable {
    let mut spec = SweepSpec::preset(name).expect("preset");
    spec.base = study_model();
    run_sweep(&spec, store, &SweepOptions::default()).expect("sweep")
}

fn t_ob(m: &ModelConfig, store: &ViewFactorStore) -> f64 {
    evaluate(m, store)
        .expect("evaluate")
        .summary()
        .expect("summary")
        .t_ob
}

fn with(m: &ModelConfig, o: &[&str]) -> ModelConfig {
    let o: Vec<String> = o.iter().map(|s| s.to_string()).collect();
    apply_overrides(m, &o).expect("override")
}

fn black() -> SideProperties {
    SideProperties::new(1.0).unwrap()
}

fn c1_disk_oracle() -> Outcome {
    let disk = |z: f64, nz: f64, node: &str| {
        SurfacePrimitive::new(
            Shape::Disk {
                center: Vec3::new(0.0, 0.0, z),
                radius: 1.0,
                normal: Vec3::new(0.0, 0.0, nz),
            },
            black(),
            black(),
            node,
        )
        .with_mesh(MeshDensity(256, 1))
    };
    let scene = MeshedScene::build(vec![disk(0.0, 1.0, "a"), disk(1.0, -1.0, "b")]).unwrap();
    let n_a = scene.facets().iter().filter(|f| f.node == 0).count() as u64;
    let budget = RayBudget {
        rays_per_side: DISK_RAYS / n_a,
        ..RayBudget::default()
    };
    let start = Instant::now();
    let m = trace_view_factors(&scene, &budget).unwrap();
    let secs = start.elapsed().as_secs_f64();
    // Front sides of disk a toward front sides of disk b, area weighted.
    let (mut area, mut af) = (0.0, 0.0);
    for (i, f) in scene.facets().iter().enumerate() {
        if f.node != 0 {
            continue;
        }
        let row = side_index(i, Side::Front);
        let to_b: f64 = m
            .row(row)
            .filter(|&(c, _)| scene.facets()[c / 2].node == 1)
            .map(|(_, v)| v)
            .sum();
        area += f.area;
        af += f.area * to_b;
    }
    let est = af / area;
    let rays = budget.rays_per_side * n_a;
    let exact = analytic_disk_viewfactor(1.0, 1.0, 1.0).unwrap();
    let se = (exact * (1.0 - exact) / rays as f64).sqrt();
    let z = (est - exact).abs() / se;
    outcome(
        z <= DISK_SIGMAS && secs < DISK_SECONDS,
        format!("F = {est:.6} vs {exact:.6} ({z:.2} sigma, {rays} rays, whole scene traced in {secs:.1} s)"),
    )
}

fn c2_reciprocity(store: &ViewFactorStore) -> Outcome {
    let base = study_model();
    let scenes = [
        ("reference", base.clone()),
        ("two shields", with(&base, &["shields.n_shields=2"])),
        ("no lens", with(&base, &["lens=false"])),
    ];
    let mut ok = true;
    let mut notes = Vec::new();
    for (name, m) in scenes {
        let scene = m.build_scene().unwrap();
        let vf = store.get(&scene, &m.rays).unwrap();
        let g = check_reciprocity_grouped(&vf.aggregate_by_node(&scene));
        let f = check_reciprocity(&vf, &scene).unwrap();
        // Integer tallies: hits plus escaped rays account for every ray.
        let exact = (0..vf.n_sides()).all(|r| {
            let hits: u64 = vf.raw_row(r).iter().map(|&(_, h)| h as u64).sum();
            let escaped = (vf.space(r) * vf.rays(r) as f64).round() as u64;
            hits + escaped == vf.rays(r)
        });
        let mut worst_sum: f64 = 0.0;
        let mut sums = exact;
        for r in 0..vf.n_sides() {
            let err = (vf.row_sum(r) - 1.0).abs();
            worst_sum = worst_sum.max(err);
            let terms = vf.raw_row(r).len() as f64 + 1.0;
            sums &= err <= ROW_SUM_ULPS_PER_TERM * terms * f64::EPSILON;
        }
        let node_ok = g.max_z <= RECIPROCITY_SIGMAS;
        ok &= sums && node_ok && f.family_consistent();
        notes.push(format!(
            "{name}: node max z {:.2}, facet {}/{} pairs over 3 sigma (expected {:.1}), integer tallies complete {exact}, max |row sum - 1| {worst_sum:.1e}",
            g.max_z, f.over_3sigma, f.pairs_checked, f.expected_over_3sigma
        ));
    }
    outcome(ok, notes.join("; "))
}

fn c3_solver(store: &ViewFactorStore) -> Outcome {
    let opts = SolveOptions::default();
    let (q, gr, ts) = (1.0, 0.01, 3.0);
    let radiator = Network::new(
        vec![Node::boundary("space", ts), Node::diffusion("plate", q)],
        vec![],
        vec![RadExchange {
            a: NodeId(1),
            b: NodeId(0),
            gr,
        }],
    )
    .unwrap();
    let exact = (q / (STEFAN_BOLTZMANN * gr) + ts.powi(4)).powf(0.25);
    let r = solve_steady_state(&radiator, &opts).unwrap();
    let rad_err = (r.temperatures[1] - exact).abs();

    let (q2, gl) = (0.5, 0.05);
    let pair = Network::new(
        vec![Node::boundary("wall", 300.0), Node::diffusion("n", q2)],
        vec![Conductor::direct(NodeId(0), NodeId(1), gl)],
        vec![],
    )
    .unwrap();
    let p = solve_steady_state(&pair, &opts).unwrap();
    let dt = p.temperatures[1] - 300.0;

    let mut closures = vec![
        flux_report(&radiator, &r).closure().abs(),
        flux_report(&pair, &p).closure().abs(),
    ];
    let base = study_model();
    for m in [
        base.clone(),
        with(
            &base,
            &[
                "network.ccd_q=0.0",
                "network.optics_q=0.0",
                "network.chip_q=0.0",
                "network.harness_area=0.0",
            ],
        ),
        with(&base, &["network.chip=\"bench\""]),
        with(&base, &["lens=false"]),
        with(
            &base,
            &[
                "network.radiative_only=true",
                "network.mli_layers=0",
                "coating_fraction=0.0",
            ],
        ),
    ] {
        let e = evaluate(&m, store).unwrap();
        assert!(e.result.converged);
        closures.push(flux_report(&e.network, &e.result).closure().abs());
    }
    let worst = closures.iter().cloned().fold(0.0, f64::max);
    let closes = worst <= FLUX_CLOSURE_FACTOR * opts.tolerance;
    outcome(
        rad_err <= RADIATOR_TOL_K && dt == q2 / gl && closes,
        format!(
            "radiator error {rad_err:.1e} K, conduction dT = {dt} K (Q/GL = {}), worst flux closure {worst:.1e} W over {} solves",
            q2 / gl,
            closures.len()
        ),
    )
}

fn c4_jacobian(store: &ViewFactorStore) -> Outcome {
    let e = evaluate(&study_model(), store).unwrap();
    let net: &ThermalNetwork<f64> = &e.network;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    for _ in 0..JACOBIAN_STATES {
        let t: Vec<f64> = net
            .nodes()
            .iter()
            .map(|n| match n.kind {
                cryoshield::network::NodeKind::Boundary { t } => t,
                _ => rng.random_range(4.0..320.0),
            })
            .collect();
        worst = worst.max(jacobian_fd_error(net, &t, JACOBIAN_STEP_K));
    }
    outcome(
        worst < JACOBIAN_REL,
        format!(
            "worst relative error {worst:.2e} over {JACOBIAN_STATES} states, {} nodes",
            net.len()
        ),
    )
}

fn c5_geometry(store: &ViewFactorStore) -> Outcome {
    let start = Instant::now();
    let three = study("shield_geometry", store);
    let two = study("shield_geometry_2", store);
    let secs = start.elapsed().as_secs_f64();
    let checks = check_shield_geometry(&three, Some(&two));
    let mut o = from_checks(&checks);
    o.passed &= secs < GEOMETRY_SECONDS;
    o.detail = format!("{}; {:.0} s at {STUDY_RAYS} rays per side", o.detail, secs);
    for c in &checks {
        println!("    {c}");
    }
    o
}

fn c6_struts(store: &ViewFactorStore) -> Outcome {
    let t = study("strut_couplings", store);
    let base = study_model();
    let nominal = t_ob(&base, store);
    let weak = with(
        &base,
        &[&format!(
            "network.strut.gl_st_ob={}",
            base.network.strut.gl_st_ob / 100.0
        )],
    );
    let delta = t_ob(&weak, store) - nominal;
    let rs = format!("{}", base.network.strut.gl_st_rs);
    let checks = check_strut_couplings(&t, &rs, delta, OB_SMALLNESS);
    for c in &checks {
        println!("    {c}");
    }
    from_checks(&checks)
}

fn c7_dissipation(store: &ViewFactorStore) -> Outcome {
    let t = study("dissipation", store);
    let base = with(&study_model(), &["network.optics_q=0.2e-3"]);
    let nominal = t_ob(&base, store);
    let harness = nominal - t_ob(&with(&base, &["network.harness_area=0.0"]), store);
    let struts = nominal - t_ob(&with(&base, &["network.strut.gl_st_ob=1e-9"]), store);
    let checks = check_dissipation(&t, harness, struts);
    for c in &checks {
        println!("    {c}");
    }
    from_checks(&checks)
}

fn c8_coating(store: &ViewFactorStore) -> Outcome {
    let coating = study("coating", store);
    let lens = study("lens", store);
    let checks = check_coating(&coating, Some(&lens));
    for c in &checks {
        println!("    {c}");
    }
    from_checks(&checks)
}

fn c9_final(store: &ViewFactorStore) -> Outcome {
    let base = study_model();
    let f = run_final_configuration(&base, store).unwrap();
    let top: Vec<&str> = f
        .bench_ranking
        .iter()
        .take(2)
        .map(|(l, _)| l.as_str())
        .collect();
    let hottest = top.len() == 2
        && top.contains(&"ccd")
        && top.iter().any(|l| *l == "mirror1" || *l == "mirror2");
    let spread = f.bench_spread();
    let cold = with(
        &base,
        &[
            "network.ccd_q=0.0",
            "network.optics_q=0.0",
            "network.chip_q=0.0",
            "network.harness_area=0.0",
        ],
    );
    let z = run_final_configuration(&cold, store).unwrap();
    let zero_spread = z.bench_spread();
    outcome(
        hottest && spread < BENCH_SPREAD_MAX && zero_spread < base.solver.tolerance,
        format!(
            "hottest {top:?}, T_ob {:.2} K, T_tv {:.2} K, spread {:.2}% of mean, zero-dissipation spread {zero_spread:.1e}",
            f.summary.t_ob,
            f.summary.t_tv,
            100.0 * spread
        ),
    )
}

fn c10_decoherence() -> Outcome {
    let p = Particle::default();
    let tl = ExperimentTimeline::default();
    let env = |te: f64, ti: f64| EnvState {
        t_env: te,
        t_int: ti,
        pressure: 0.0,
    };
    let v =
        |e: EnvState, tl: &ExperimentTimeline| visibility::<f64>(&p, &e, tl).unwrap().visibility;
    let v00 = v(env(0.0, 0.0), &tl);
    let grid: Vec<f64> = (0..=60).map(|i| i as f64).collect();
    let non_increasing = |ys: Vec<f64>| ys.windows(2).all(|w| w[1] <= w[0]);
    let mut mono = true;
    for &fixed in &[0.0, 5.0, 16.4] {
        mono &= non_increasing(grid.iter().map(|&t| v(env(t, fixed), &tl)).collect());
        mono &= non_increasing(grid.iter().map(|&t| v(env(fixed, t), &tl)).collect());
    }
    let e = env(16.4, 16.4);
    mono &= non_increasing(
        (1..=20)
            .map(|k| {
                v(
                    e,
                    &ExperimentTimeline {
                        separation: k as f64 * 10e-9,
                        ..tl
                    },
                )
            })
            .collect(),
    );
    mono &= non_increasing(
        (1..=20)
            .map(|k| {
                v(
                    e,
                    &ExperimentTimeline {
                        t2: k as f64 * 10.0,
                        ..tl
                    },
                )
            })
            .collect(),
    );

    let mut exponents_ok = true;
    let mut worst: f64 = 0.0;
    for t in [0.5, 5.0, 50.0] {
        let lo = blackbody_rates::<f64>(&p, &env(t, t));
        let hi = blackbody_rates::<f64>(&p, &env(2.0 * t, 2.0 * t));
        for (r, n) in [
            (hi.scattering / lo.scattering, 9),
            (hi.absorption / lo.absorption, 6),
            (hi.emission / lo.emission, 6),
        ] {
            let want = 2f64.powi(n);
            let rel = (r / want - 1.0).abs();
            worst = worst.max(rel);
            exponents_ok &= rel < 1e-9;
        }
    }
    let valid = regime(&p, &env(16.4, 16.4), Some(tl.separation)).is_valid();
    outcome(
        v00 == 1.0 && mono && exponents_ok && valid,
        format!(
            "V(0,0) = {v00}, monotone {mono}, worst scaling deviation {worst:.1e}, regime at 90 nm / 16.4 K valid {valid}"
        ),
    )
}

fn cli_run(out: &std::path::Path, threads: usize, args: &[&str]) {
    let mut argv = vec![
        "cryoshield".to_string(),
        "--out".into(),
        out.display().to_string(),
        "--threads".into(),
        threads.to_string(),
    ];
    argv.extend(args.iter().map(|s| s.to_string()));
    run(&RunConfig::try_parse_from(argv).unwrap()).unwrap();
}

fn tree_bytes(dir: &std::path::Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().display().to_string();
                out.push((rel, std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn c11_determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let runs: Vec<std::path::PathBuf> =
        (0..3).map(|k| dir.path().join(format!("run{k}"))).collect();
    for (k, out) in runs.iter().enumerate() {
        let threads = [1, 3, 1][k];
        cli_run(out, threads, &["--rays", "400", "viewfactors"]);
        cli_run(out, threads, &["--rays", "400", "final"]);
        cli_run(
            out,
            threads,
            &["--rays", "400", "sweep", "--preset", "coating"],
        );
        cli_run(
            out,
            threads,
            &[
                "visibility",
                "--from",
                &out.join("final_summary.csv").display().to_string(),
            ],
        );
    }
    let trees: Vec<_> = runs.iter().map(|r| tree_bytes(r)).collect();
    let same = trees[0] == trees[1] && trees[0] == trees[2];
    let files = trees[0].len();
    outcome(
        same && files >= 6,
        format!(
            "{files} artifacts byte-identical across 1 and 3 worker threads and a repeat: {same}"
        ),
    )
}

fn main() {
    let store = ViewFactorStore::in_memory();
    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome + '_>)> = vec![
        ("1 view-factor oracle", Box::new(c1_disk_oracle)),
        (
            "2 reciprocity and completeness",
            Box::new(|| c2_reciprocity(&store)),
        ),
        (
            "3 solver oracles and flux balance",
            Box::new(|| c3_solver(&store)),
        ),
        (
            "4 Jacobian vs finite differences",
            Box::new(|| c4_jacobian(&store)),
        ),
        ("5 shield geometry trend", Box::new(|| c5_geometry(&store))),
        ("6 strut coupling trend", Box::new(|| c6_struts(&store))),
        ("7 dissipation trend", Box::new(|| c7_dissipation(&store))),
        ("8 coating trend", Box::new(|| c8_coating(&store))),
        ("9 final configuration", Box::new(|| c9_final(&store))),
        ("10 decoherence properties", Box::new(c10_decoherence)),
        ("11 determinism", Box::new(c11_determinism)),
    ];
    let mut failed = 0;
    for (name, f) in &criteria {
        let start = Instant::now();
        let o = f();
        let tag = if o.passed { "PASS" } else { "FAIL" };
        println!(
            "{tag} criterion {name} ({:.1} s): {}",
            start.elapsed().as_secs_f64(),
            o.detail
        );
        failed += usize::from(!o.passed);
    }
    println!(
        "acceptance: {} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
