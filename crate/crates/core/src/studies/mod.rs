//! Parameter studies on the reference instrument: single model points,
//! grid sweeps with view-factor reuse, trend checks and the final
//! configuration run.

mod config;
mod plot;
mod sweep;
mod trends;

pub use config::{apply_overrides, parse_override_value, set_dotted, ModelConfig};
pub use plot::write_svg_plot;
pub use sweep::{
    read_study_csv, run_sweep, Axis, StudyRow, StudyTable, SweepOptions, SweepSpec, STUDY_COLUMNS,
};
pub use trends::{
    check_coating, check_dissipation, check_shield_geometry, check_strut_couplings,
    interior_minimum, TrendCheck,
};

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use thiserror::Error;

use crate::geometry::{nodes, GeometryError, MeshedScene};
use crate::network::{build_reference_network, labels, NetworkError, ThermalNetwork};
use crate::solver::{solve_steady_state, Method, SolveError, SolveResult};
use crate::viewfactor::{
    cache_file_name, load_cache, save_cache, trace_view_factors, CacheKey, RayBudget,
    ViewFactorError, ViewFactorMatrix,
};

#[derive(Debug, Error)]
pub enum StudyError {
    #[error("configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    ViewFactor(#[from] ViewFactorError),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error("missing node {0:?}")]
    MissingNode(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("study file: {0}")]
    Format(String),
}

impl StudyError {
    /// Short machine-readable category.
    pub fn category(&self) -> &'static str {
        match self {
            StudyError::Config(_) | StudyError::Network(_) => "config",
            StudyError::Geometry(_) | StudyError::MissingNode(_) => "geometry",
            StudyError::ViewFactor(ViewFactorError::Cache(_)) => "io",
            StudyError::ViewFactor(_) => "geometry",
            StudyError::Solve(SolveError::Options(_)) => "config",
            StudyError::Solve(_) => "convergence",
            StudyError::Io(_) | StudyError::Format(_) => "io",
        }
    }
}

/// View-factor matrices shared between model points with the same geometry
/// and ray budget, held in memory and optionally mirrored to a directory.
#[derive(Debug, Default)]
pub struct ViewFactorStore {
    dir: Option<PathBuf>,
    memory: Mutex<HashMap<CacheKey, Arc<ViewFactorMatrix>>>,
    traces: Mutex<usize>,
}

impl ViewFactorStore {
    pub fn in_memory() -> Self {
        Self::default()
    }

    pub fn with_dir(dir: impl Into<PathBuf>) -> Self {
        ViewFactorStore {
            dir: Some(dir.into()),
            ..Self::default()
        }
    }

    /// Number of traces actually run, as opposed to served from a cache.
    pub fn traces(&self) -> usize {
        *self.traces.lock().unwrap()
    }

    pub fn get(
        &self,
        scene: &MeshedScene,
        budget: &RayBudget,
    ) -> Result<Arc<ViewFactorMatrix>, StudyError> {
        let key = CacheKey {
            geometry_hash: scene.geometry_hash(),
            budget: *budget,
        };
        if let Some(m) = self.memory.lock().unwrap().get(&key) {
            return Ok(m.clone());
        }
        let path = self.dir.as_ref().map(|d| d.join(cache_file_name(&key)));
        let cached = match &path {
            Some(p) => load_cache(p, &key)?,
            None => None,
        };
        let m = match cached {
            Some(m) => m,
            None => {
                let m = trace_view_factors(scene, budget)?;
                *self.traces.lock().unwrap() += 1;
                if let Some(p) = &path {
                    std::fs::create_dir_all(p.parent().unwrap())?;
                    save_cache(&m, p)?;
                }
                m
            }
        };
        let m = Arc::new(m);
        self.memory.lock().unwrap().insert(key, m.clone());
        Ok(m)
    }
}

/// Everything produced by one model point.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub scene: MeshedScene,
    pub view_factors: Arc<ViewFactorMatrix>,
    pub network: ThermalNetwork<f64>,
    pub result: SolveResult<f64>,
}

/// Headline numbers of a converged model point.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSummary {
    pub t_ob: f64,
    pub t_tv: f64,
    /// Outermost first; absent shields are `None`.
    pub t_shields: [Option<f64>; 3],
    pub iterations: usize,
    pub residual: f64,
    pub method: Method,
}

fn node_temperature(
    net: &ThermalNetwork<f64>,
    result: &SolveResult<f64>,
    label: &str,
) -> Result<f64, StudyError> {
    net.node_id(label)
        .map(|id| result.temperatures[id.0])
        .map_err(|_| StudyError::MissingNode(label.into()))
}

/// Effective temperature of the test volume, i.e. the converged temperature
/// of the black, unloaded probe node.
pub fn test_volume_temperature(
    net: &ThermalNetwork<f64>,
    result: &SolveResult<f64>,
) -> Result<f64, StudyError> {
    node_temperature(net, result, nodes::TEST_VOLUME)
}

impl Evaluation {
    pub fn summary(&self) -> Result<PointSummary, StudyError> {
        let (net, res) = (&self.network, &self.result);
        let mut t_shields = [None; 3];
        for (k, t) in t_shields.iter_mut().enumerate() {
            *t = net
                .node_id(&nodes::shield(k + 1))
                .ok()
                .map(|id| res.temperatures[id.0]);
        }
        Ok(PointSummary {
            t_ob: node_temperature(net, res, nodes::BENCH)?,
            t_tv: test_volume_temperature(net, res)?,
            t_shields,
            iterations: res.iterations,
            residual: res.residual_norm,
            method: res.method,
        })
    }
}

/// Builds, traces and solves one model point.
pub fn evaluate(model: &ModelConfig, store: &ViewFactorStore) -> Result<Evaluation, StudyError> {
    let scene = model.build_scene()?;
    let view_factors = store.get(&scene, &model.rays)?;
    let network = build_reference_network::<f64>(&scene, &view_factors, &model.network)?;
    let result = solve_steady_state(&network, &model.solver)?;
    Ok(Evaluation {
        scene,
        view_factors,
        network,
        result,
    })
}

/// Nominal design point: three shields at the default geometry, the full
/// conductive network and MLI on the spacecraft-facing shield sides.
pub fn final_configuration() -> ModelConfig {
    ModelConfig::default()
}

/// Final configuration run with its bench-node ranking.
#[derive(Debug, Clone)]
pub struct FinalRun {
    pub evaluation: Evaluation,
    pub summary: PointSummary,
    /// Labels of the bench and bench-mounted nodes, hottest first.
    pub bench_ranking: Vec<(String, f64)>,
}

impl FinalRun {
    /// `(max - min) / mean` over the bench nodes.
    pub fn bench_spread(&self) -> f64 {
        let t: Vec<f64> = self.bench_ranking.iter().map(|(_, t)| *t).collect();
        let mean = t.iter().sum::<f64>() / t.len() as f64;
        let max = t.iter().cloned().fold(f64::MIN, f64::max);
        let min = t.iter().cloned().fold(f64::MAX, f64::min);
        (max - min) / mean
    }
}

/// Nodes that sit on the bench: the bench itself, the lumped CCD and mirror
/// nodes and the chip when it is mounted there.
fn bench_nodes(net: &ThermalNetwork<f64>) -> Vec<usize> {
    let bench = net.node_id(nodes::BENCH).ok();
    let mut wanted = vec![nodes::BENCH, labels::CCD, labels::MIRROR1, labels::MIRROR2];
    let chip_on_bench = match (net.node_id(labels::CHIP), bench) {
        (Ok(chip), Some(b)) => net
            .conductors()
            .iter()
            .any(|c| (c.a == chip && c.b == b) || (c.b == chip && c.a == b)),
        _ => false,
    };
    if chip_on_bench {
        wanted.push(labels::CHIP);
    }
    let mut out: Vec<usize> = wanted
        .iter()
        .filter_map(|l| net.node_id(l).ok().map(|i| i.0))
        .collect();
    out.sort_unstable();
    out
}

pub fn run_final_configuration(
    model: &ModelConfig,
    store: &ViewFactorStore,
) -> Result<FinalRun, StudyError> {
    let evaluation = evaluate(model, store)?;
    let summary = evaluation.summary()?;
    let net = &evaluation.network;
    let mut bench_ranking: Vec<(String, f64)> = bench_nodes(net)
        .into_iter()
        .map(|i| {
            (
                net.nodes()[i].label.clone(),
                evaluation.result.temperatures[i],
            )
        })
        .collect();
    bench_ranking.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    Ok(FinalRun {
        evaluation,
        summary,
        bench_ranking,
    })
}

/// True when `label` names a cavity mirror node.
pub fn is_mirror(label: &str) -> bool {
    label == labels::MIRROR1 || label == labels::MIRROR2
}
