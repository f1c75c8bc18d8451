//! Command-line pipeline: scene, view factors, network, solve, studies and
//! visibility curves, each writing CSV artifacts with provenance headers.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use thiserror::Error;

use cryoshield::decoherence::{self, CurveMode, CurveSpec, EnvState};
use cryoshield::network::{NetworkError, NetworkFile};
use cryoshield::provenance::{sha256_hex, Provenance};
use cryoshield::solver::{solve_steady_state, write_solve_csv, SolveError};
use cryoshield::studies::{
    self, apply_overrides, final_configuration, read_study_csv, run_final_configuration, run_sweep,
    write_svg_plot, ModelConfig, StudyError, SweepOptions, SweepSpec, ViewFactorStore,
};
use cryoshield::viewfactor::check_reciprocity_grouped;

/// Default output directory when neither `--out` nor the environment sets one.
pub const DEFAULT_OUT: &str = "cryoshield-out";
/// Environment variable naming the default output directory.
pub const OUT_ENV: &str = "CRYOSHIELD_OUT";

#[derive(Debug, Clone, Parser)]
#[command(
    name = "cryoshield",
    version,
    about = "Thermal shield modelling pipeline"
)]
pub struct RunConfig {
    #[command(subcommand)]
    pub command: Command,
    /// Configuration file (TOML) for the subcommand.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, env = OUT_ENV, default_value = DEFAULT_OUT)]
    pub out: PathBuf,
    /// Rays per facet side.
    #[arg(long, global = true)]
    pub rays: Option<u64>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Rays per random stream.
    #[arg(long, global = true)]
    pub batch: Option<u64>,
    /// Solver tolerance on the largest nodal residual, W.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    #[arg(long, global = true)]
    pub max_iter: Option<usize>,
    /// Initial guess: `boundary-mean` or a uniform temperature in K.
    #[arg(long, global = true)]
    pub init: Option<String>,
    /// Dotted-key override such as `network.strut.gl_st_st=0.1` (repeatable).
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Continue a partially written sweep output.
    #[arg(long, global = true)]
    pub resume: bool,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Trace the view factors of a model scene and write node-level factors.
    Viewfactors,
    /// Solve a network file, or the reference network of a model config.
    Solve {
        /// Network file (TOML) to solve instead of the reference network.
        #[arg(long)]
        network: Option<PathBuf>,
    },
    /// Run a parameter study.
    Sweep {
        /// Built-in study instead of `--config`.
        #[arg(long)]
        preset: Option<String>,
    },
    /// Nominal configuration: node temperatures, summary and visibility.
    Final,
    /// Visibility curves against temperature.
    Visibility {
        /// CSV with a `T_tv` column; its first value becomes the fixed
        /// environment temperature.
        #[arg(long)]
        from: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Category {
    Config,
    Geometry,
    Convergence,
    Io,
}

impl Category {
    pub fn as_str(self) -> &'static str {
        match self {
            Category::Config => "config",
            Category::Geometry => "geometry",
            Category::Convergence => "convergence",
            Category::Io => "io",
        }
    }

    pub fn exit_code(self) -> i32 {
        match self {
            Category::Config => 2,
            Category::Geometry => 3,
            Category::Convergence => 4,
            Category::Io => 5,
        }
    }
}

#[derive(Debug, Error)]
#[error("{message}")]
pub struct CliError {
    pub category: Category,
    pub message: String,
}

impl CliError {
    fn new(category: Category, message: impl Into<String>) -> Self {
        CliError {
            category,
            message: message.into(),
        }
    }

    fn config(message: impl Into<String>) -> Self {
        Self::new(Category::Config, message)
    }
}

impl From<StudyError> for CliError {
    fn from(e: StudyError) -> Self {
        let category = match e.category() {
            "geometry" => Category::Geometry,
            "convergence" => Category::Convergence,
            "io" => Category::Io,
            _ => Category::Config,
        };
        CliError::new(category, e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::new(Category::Io, e.to_string())
    }
}

impl From<NetworkError> for CliError {
    fn from(e: NetworkError) -> Self {
        StudyError::from(e).into()
    }
}

impl From<SolveError> for CliError {
    fn from(e: SolveError) -> Self {
        StudyError::from(e).into()
    }
}

/// Paths of the artifacts a run wrote.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunOutput {
    pub artifacts: Vec<PathBuf>,
}

impl RunConfig {
    /// Overrides implied by the numeric flags, applied after `--set`.
    fn flag_overrides(&self) -> Result<Vec<String>, CliError> {
        let mut o = self.overrides.clone();
        if let Some(v) = self.rays {
            o.push(format!("rays.rays_per_side={v}"));
        }
        if let Some(v) = self.seed {
            o.push(format!("rays.seed={v}"));
        }
        if let Some(v) = self.batch {
            o.push(format!("rays.batch_size={v}"));
        }
        if let Some(v) = self.tol {
            o.push(format!("solver.tolerance={v:e}"));
        }
        if let Some(v) = self.max_iter {
            o.push(format!("solver.max_iterations={v}"));
        }
        if let Some(v) = &self.init {
            let guess = match v.as_str() {
                "boundary-mean" | "boundary_mean" => "\"boundary_mean\"".to_string(),
                t => {
                    let t: f64 = t.parse().map_err(|_| {
                        CliError::config(format!(
                            "--init {t:?}: expected boundary-mean or a temperature"
                        ))
                    })?;
                    format!("{{ uniform = {t:e} }}")
                }
            };
            o.push(format!("solver.initial={guess}"));
        }
        Ok(o)
    }

    fn model(&self, default: ModelConfig) -> Result<ModelConfig, CliError> {
        let base = match &self.config {
            Some(p) => {
                let text = read(p)?;
                toml::from_str(&text)
                    .map_err(|e| CliError::config(format!("{}: {e}", p.display())))?
            }
            None => default,
        };
        Ok(apply_overrides(&base, &self.flag_overrides()?)?)
    }

    fn store(&self) -> ViewFactorStore {
        ViewFactorStore::with_dir(self.out.join("cache"))
    }
}

fn read(p: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(p)
        .map_err(|e| CliError::new(Category::Config, format!("{}: {e}", p.display())))
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

fn model_provenance(artifact: &str, m: &ModelConfig) -> Provenance {
    Provenance::new(artifact)
        .with("config_sha256", m.hash())
        .with("seed", m.rays.seed)
        .with("rays_per_side", m.rays.rays_per_side)
        .with("batch_size", m.rays.batch_size)
        .with("tolerance", m.solver.tolerance)
        .with("max_iterations", m.solver.max_iterations)
}

/// Executes one subcommand and flushes every artifact before returning.
pub fn run(cfg: &RunConfig) -> Result<RunOutput, CliError> {
    match cfg.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| CliError::config(e.to_string()))?
            .install(|| dispatch(cfg)),
        None => dispatch(cfg),
    }
}

fn dispatch(cfg: &RunConfig) -> Result<RunOutput, CliError> {
    match &cfg.command {
        Command::Viewfactors => viewfactors(cfg),
        Command::Solve { network } => solve(cfg, network.as_deref()),
        Command::Sweep { preset } => sweep(cfg, preset.as_deref()),
        Command::Final => final_run(cfg),
        Command::Visibility { from } => visibility(cfg, from.as_deref()),
    }
}

fn viewfactors(cfg: &RunConfig) -> Result<RunOutput, CliError> {
    let model = cfg.model(ModelConfig::default())?;
    let scene = model.build_scene()?;
    let m = cfg.store().get(&scene, &model.rays)?;
    let g = m.aggregate_by_node(&scene);
    let rec = check_reciprocity_grouped(&g);
    let names = scene.node_names();
    let path = cfg.out.join("viewfactors.csv");
    let mut out = create(&path)?;
    model_provenance("viewfactors", &model)
        .with("geometry_sha256", scene.geometry_hash())
        .with("reciprocity_max_z", format!("{:.3}", rec.max_z))
        .write(&mut out)?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["from", "to", "area_m2", "F", "std_error"])
        .map_err(io)?;
    for (i, from) in names.iter().enumerate() {
        for j in 0..=names.len() {
            let f = g.f[i][j];
            if f == 0.0 {
                continue;
            }
            let to = names.get(j).map(String::as_str).unwrap_or("space");
            w.write_record([
                from.clone(),
                to.to_string(),
                format!("{:.9e}", g.area[i]),
                format!("{f:.9e}"),
                format!("{:.3e}", g.se[i][j]),
            ])
            .map_err(io)?;
        }
    }
    w.flush()?;
    println!(
        "view factors: {} facets, {} rays per side, reciprocity max z = {:.2}",
        scene.len(),
        model.rays.rays_per_side,
        rec.max_z
    );
    Ok(RunOutput {
        artifacts: vec![path],
    })
}

fn io(e: csv::Error) -> CliError {
    CliError::new(Category::Io, e.to_string())
}

fn solve(cfg: &RunConfig, network: Option<&Path>) -> Result<RunOutput, CliError> {
    let path = cfg.out.join("solve.csv");
    let (net, res, prov) = match network {
        Some(file) => {
            let text = read(file)?;
            let spec = NetworkFile::parse(&text)?;
            // Solver settings come from flags and `--set solver.*` only.
            let model = apply_overrides(&ModelConfig::default(), &cfg.flag_overrides()?)?;
            let net = spec.build::<f64>(file.parent())?;
            let res = solve_steady_state(&net, &model.solver)?;
            let prov = Provenance::new("solve")
                .with("network_sha256", sha256_hex(text.as_bytes()))
                .with("tolerance", model.solver.tolerance)
                .with("max_iterations", model.solver.max_iterations);
            (net, res, prov)
        }
        None => {
            let model = cfg.model(ModelConfig::default())?;
            let ev = studies::evaluate(&model, &cfg.store())?;
            (ev.network, ev.result, model_provenance("solve", &model))
        }
    };
    let prov = prov
        .with("iterations", res.iterations)
        .with("residual_W", format!("{:.3e}", res.residual_norm))
        .with("method", format!("{:?}", res.method).to_lowercase());
    let mut out = create(&path)?;
    write_solve_csv(&net, &res, &prov, &mut out)?;
    out.flush()?;
    println!(
        "solve: {} nodes, {} iterations, residual {:.2e} W",
        net.len(),
        res.iterations,
        res.residual_norm
    );
    Ok(RunOutput {
        artifacts: vec![path],
    })
}

fn sweep(cfg: &RunConfig, preset: Option<&str>) -> Result<RunOutput, CliError> {
    let mut spec = match (preset, &cfg.config) {
        (Some(_), Some(_)) => {
            return Err(CliError::config(
                "give either --preset or --config, not both",
            ))
        }
        (Some(name), None) => SweepSpec::preset(name).ok_or_else(|| {
            CliError::config(format!(
                "unknown preset {name:?}; known: {}",
                SweepSpec::PRESETS.join(", ")
            ))
        })?,
        (None, Some(p)) => SweepSpec::parse(&read(p)?)
            .map_err(|e| CliError::config(format!("{}: {e}", p.display())))?,
        (None, None) => return Err(CliError::config("sweep needs --preset or --config")),
    };
    spec.overrides.extend(cfg.flag_overrides()?);
    let csv_path = cfg.out.join(spec.output_name());
    let table = run_sweep(
        &spec,
        &cfg.store(),
        &SweepOptions {
            output: Some(csv_path.clone()),
            resume: cfg.resume,
        },
    )?;
    let svg_path = csv_path.with_extension("svg");
    let mut svg = create(&svg_path)?;
    write_svg_plot(&table, &spec.name, &mut svg)?;
    svg.flush()?;
    let failed = table.rows.iter().filter(|r| !r.ok()).count();
    println!(
        "sweep {}: {} points, {failed} failed",
        spec.name,
        table.rows.len()
    );
    Ok(RunOutput {
        artifacts: vec![csv_path, svg_path],
    })
}

/// Columns of the final-configuration summary CSV.
pub const SUMMARY_COLUMNS: [&str; 10] = [
    "T_ob",
    "T_tv",
    "T_shield1",
    "T_shield2",
    "T_shield3",
    "iterations",
    "residual",
    "visibility",
    "regime",
    "hottest_bench_nodes",
];

fn final_run(cfg: &RunConfig) -> Result<RunOutput, CliError> {
    let model = cfg.model(final_configuration())?;
    let run = run_final_configuration(&model, &cfg.store())?;
    let s = &run.summary;
    let env = EnvState {
        t_env: s.t_tv,
        t_int: s.t_tv,
        ..EnvState::default()
    };
    let particle = decoherence::Particle::default();
    let timeline = decoherence::ExperimentTimeline::default();
    let vis = decoherence::visibility::<f64>(&particle, &env, &timeline)
        .map_err(|e| CliError::config(e.to_string()))?;
    let prov = model_provenance("final", &model)
        .with("scene_sha256", run.evaluation.scene.content_hash())
        .with("visibility_t_int", "T_tv")
        .with("visibility_t2_s", timeline.t2)
        .with("visibility_separation_m", timeline.separation);

    let nodes_path = cfg.out.join("final_nodes.csv");
    let mut out = create(&nodes_path)?;
    write_solve_csv(
        &run.evaluation.network,
        &run.evaluation.result,
        &prov,
        &mut out,
    )?;
    out.flush()?;

    let summary_path = cfg.out.join("final_summary.csv");
    let mut out = create(&summary_path)?;
    prov.write(&mut out)?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SUMMARY_COLUMNS).map_err(io)?;
    let t = |x: Option<f64>| x.map(|v| format!("{v:.6}")).unwrap_or_default();
    let hottest: Vec<&str> = run
        .bench_ranking
        .iter()
        .take(2)
        .map(|(l, _)| l.as_str())
        .collect();
    w.write_record([
        t(Some(s.t_ob)),
        t(Some(s.t_tv)),
        t(s.t_shields[0]),
        t(s.t_shields[1]),
        t(s.t_shields[2]),
        s.iterations.to_string(),
        format!("{:.3e}", s.residual),
        format!("{:.9}", vis.visibility),
        vis.regime.label().to_string(),
        hottest.join(" "),
    ])
    .map_err(io)?;
    w.flush()?;
    println!(
        "final: T_ob = {:.3} K, T_tv = {:.3} K, visibility {:.4} ({})",
        s.t_ob,
        s.t_tv,
        vis.visibility,
        vis.regime.label()
    );
    Ok(RunOutput {
        artifacts: vec![nodes_path, summary_path],
    })
}

#[derive(Debug, serde::Deserialize)]
#[serde(deny_unknown_fields)]
struct VisibilityFile {
    #[serde(rename = "curve")]
    curves: Vec<CurveSpec>,
}

/// First `T_tv` value of a study or summary CSV.
pub fn first_t_tv(text: &str) -> Result<f64, CliError> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let col = rdr
        .headers()
        .map_err(io)?
        .iter()
        .position(|h| h == "T_tv")
        .ok_or_else(|| CliError::config("input has no T_tv column"))?;
    for rec in rdr.records() {
        let rec = rec.map_err(io)?;
        if let Ok(v) = rec[col].parse::<f64>() {
            return Ok(v);
        }
    }
    Err(CliError::config("input has no T_tv value"))
}

fn visibility(cfg: &RunConfig, from: Option<&Path>) -> Result<RunOutput, CliError> {
    let chained = match from {
        Some(p) => Some(first_t_tv(&read(p)?)?),
        None => None,
    };
    let mut curves = match &cfg.config {
        Some(p) => {
            toml::from_str::<VisibilityFile>(&read(p)?)
                .map_err(|e| CliError::config(format!("{}: {e}", p.display())))?
                .curves
        }
        None => CurveSpec::standard(chained.unwrap_or(EnvState::default().t_env)).to_vec(),
    };
    if let Some(t) = chained {
        for c in &mut curves {
            if let CurveMode::FixedEnvironment { t_env } = &mut c.mode {
                *t_env = t;
            }
        }
    }
    let text = toml::to_string(&toml::Table::from_iter([(
        "curve".to_string(),
        toml::Value::try_from(&curves).map_err(|e| CliError::config(e.to_string()))?,
    )]))
    .map_err(|e| CliError::config(e.to_string()))?;
    let mut prov = Provenance::new("visibility").with("config_sha256", sha256_hex(text.as_bytes()));
    if let Some(t) = chained {
        prov.push("t_env_from_study", t);
    }
    let path = cfg.out.join("visibility.csv");
    let mut out = create(&path)?;
    let pts = decoherence::emit_visibility_curves(&curves, &prov, &mut out).map_err(|e| match e
        .kind()
    {
        std::io::ErrorKind::InvalidInput => CliError::config(e.to_string()),
        _ => e.into(),
    })?;
    out.flush()?;
    println!(
        "visibility: {} points in {} curves",
        pts.len(),
        curves.len()
    );
    Ok(RunOutput {
        artifacts: vec![path],
    })
}

/// Parses a study CSV written by `sweep`.
pub fn load_study(path: &Path) -> Result<studies::StudyTable, CliError> {
    Ok(read_study_csv(&read(path)?)?)
}
