use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::provenance::{sha256_hex, Provenance};

use super::config::{set_dotted, ModelConfig};
use super::{evaluate, PointSummary, StudyError, ViewFactorStore};

/// Result columns following the axis columns of a study CSV.
pub const STUDY_COLUMNS: [&str; 11] = [
    "T_ob",
    "T_tv",
    "T_shield1",
    "T_shield2",
    "T_shield3",
    "iterations",
    "residual",
    "status",
    "scene_hash",
    "seed",
    "rays_per_side",
];

/// One swept parameter: a dotted model-config key and its values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub name: String,
    pub values: Vec<toml::Value>,
}

impl Axis {
    pub fn floats(name: &str, values: &[f64]) -> Axis {
        Axis {
            name: name.into(),
            values: values.iter().map(|&v| toml::Value::Float(v)).collect(),
        }
    }
}

/// Grid study over the Cartesian product of its axes, first axis outermost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub name: String,
    /// Output file name, relative to the output directory.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
    /// `key=value` settings applied to `base` before the axes.
    #[serde(default)]
    pub overrides: Vec<String>,
    #[serde(default)]
    pub base: ModelConfig,
    #[serde(rename = "axis")]
    pub axes: Vec<Axis>,
}

impl SweepSpec {
    pub fn parse(text: &str) -> Result<SweepSpec, StudyError> {
        toml::from_str(text).map_err(|e| StudyError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<SweepSpec, StudyError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| StudyError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("sweep spec serializes")
    }

    pub fn hash(&self) -> String {
        sha256_hex(self.to_toml().as_bytes())
    }

    pub fn output_name(&self) -> String {
        self.output
            .clone()
            .unwrap_or_else(|| format!("{}.csv", self.name))
    }

    fn with(name: &str, overrides: &[&str], axes: Vec<Axis>) -> SweepSpec {
        SweepSpec {
            name: name.into(),
            output: None,
            overrides: overrides.iter().map(|s| s.to_string()).collect(),
            base: ModelConfig::default(),
            axes,
        }
    }

    /// Names accepted by [`SweepSpec::preset`].
    pub const PRESETS: [&'static str; 6] = [
        "shield_geometry",
        "shield_geometry_2",
        "strut_couplings",
        "dissipation",
        "coating",
        "lens",
    ];

    /// Built-in studies of the reference instrument.
    pub fn preset(name: &str) -> Option<SweepSpec> {
        const PHI3: [f64; 8] = [5.0, 10.0, 15.0, 20.0, 25.0, 30.0, 35.0, 40.0];
        const D3: [f64; 4] = [0.10, 0.15, 0.20, 0.25];
        // Bare radiative stack: no struts, dissipation, MLI or bench coating.
        const GEOMETRY_OVERRIDES: &[&str] = &[
            "network.radiative_only=true",
            "network.mli_layers=0",
            "coating_fraction=0.0",
        ];
        let geometry = |n: i64| {
            vec![
                Axis::floats("shields.d3", &D3),
                Axis::floats("shields.phi3_deg", &PHI3),
                Axis {
                    name: "shields.n_shields".into(),
                    values: vec![toml::Value::Integer(n)],
                },
            ]
        };
        Some(match name {
            "shield_geometry" => Self::with(name, GEOMETRY_OVERRIDES, geometry(3)),
            "shield_geometry_2" => Self::with(name, GEOMETRY_OVERRIDES, geometry(2)),
            "strut_couplings" => Self::with(
                name,
                &[],
                vec![
                    Axis::floats("network.strut.gl_st_rs", &[0.005, 0.05, 0.5]),
                    Axis::floats(
                        "network.strut.gl_st_st",
                        &[0.005, 0.01, 0.02, 0.05, 0.1, 0.2, 0.5],
                    ),
                ],
            ),
            "dissipation" => Self::with(
                name,
                &["network.optics_q=0.2e-3"],
                vec![
                    Axis::floats("network.harness_area", &[0.01e-6, 0.1e-6, 1e-6]),
                    Axis::floats("network.ccd_q", &[0.0, 0.1e-3, 0.3e-3, 1e-3, 3e-3, 10e-3]),
                ],
            ),
            "coating" => Self::with(
                name,
                &[
                    "lens=false",
                    "network.harness_area=0.0",
                    "network.ccd_q=0.0",
                    "network.optics_q=0.0",
                ],
                vec![Axis::floats(
                    "coating_fraction",
                    &[0.0, 0.25, 0.5, 0.75, 1.0],
                )],
            ),
            "lens" => Self::with(
                name,
                &[],
                vec![Axis {
                    name: "lens".into(),
                    values: vec![toml::Value::Boolean(true), toml::Value::Boolean(false)],
                }],
            ),
            _ => return None,
        })
    }

    /// Model configuration of every grid point, in output order.
    pub fn points(&self) -> Result<Vec<(Vec<toml::Value>, ModelConfig)>, StudyError> {
        if self.axes.is_empty() {
            return Err(StudyError::Config(format!(
                "study {:?} has no axes",
                self.name
            )));
        }
        for a in &self.axes {
            if a.values.is_empty() {
                return Err(StudyError::Config(format!(
                    "axis {:?} has no values",
                    a.name
                )));
            }
        }
        let base = super::apply_overrides(&self.base, &self.overrides)?.to_value();
        let total: usize = self.axes.iter().map(|a| a.values.len()).product();
        let mut out = Vec::with_capacity(total);
        for mut idx in 0..total {
            let mut vals = vec![toml::Value::Boolean(false); self.axes.len()];
            for (k, a) in self.axes.iter().enumerate().rev() {
                vals[k] = a.values[idx % a.values.len()].clone();
                idx /= a.values.len();
            }
            let mut v = base.clone();
            for (a, x) in self.axes.iter().zip(&vals) {
                set_dotted(&mut v, &a.name, x.clone())?;
            }
            let model = ModelConfig::from_value(v).map_err(|e| {
                StudyError::Config(format!("axis point {}: {e}", fmt_values(&vals)))
            })?;
            out.push((vals, model));
        }
        Ok(out)
    }
}

fn fmt_value(v: &toml::Value) -> String {
    match v {
        toml::Value::String(s) => s.clone(),
        toml::Value::Float(f) => format!("{f}"),
        other => other.to_string(),
    }
}

fn fmt_values(v: &[toml::Value]) -> String {
    v.iter().map(fmt_value).collect::<Vec<_>>().join(",")
}

/// One line of a study table.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyRow {
    /// Axis values as written to the CSV.
    pub axes: Vec<String>,
    pub t_ob: Option<f64>,
    pub t_tv: Option<f64>,
    pub t_shields: [Option<f64>; 3],
    pub iterations: Option<usize>,
    pub residual: Option<f64>,
    /// `ok`, or `failed:<category>`.
    pub status: String,
    pub scene_hash: String,
    pub seed: u64,
    pub rays_per_side: u64,
}

impl StudyRow {
    pub fn ok(&self) -> bool {
        self.status == "ok"
    }

    pub fn axis_f64(&self, k: usize) -> Option<f64> {
        self.axes.get(k)?.parse().ok()
    }

    fn from_outcome(
        vals: &[toml::Value],
        model: &ModelConfig,
        scene_hash: String,
        outcome: Result<PointSummary, StudyError>,
    ) -> StudyRow {
        let mut row = StudyRow {
            axes: vals.iter().map(fmt_value).collect(),
            t_ob: None,
            t_tv: None,
            t_shields: [None; 3],
            iterations: None,
            residual: None,
            status: "ok".into(),
            scene_hash,
            seed: model.rays.seed,
            rays_per_side: model.rays.rays_per_side,
        };
        match outcome {
            Ok(s) => {
                row.t_ob = Some(s.t_ob);
                row.t_tv = Some(s.t_tv);
                row.t_shields = s.t_shields;
                row.iterations = Some(s.iterations);
                row.residual = Some(s.residual);
            }
            Err(e) => {
                log::warn!("study point {} failed: {e}", row.axes.join(","));
                row.status = format!("failed:{}", e.category());
            }
        }
        // Keep exactly what the CSV holds so computed and resumed tables agree.
        let n = row.axes.len();
        StudyRow::parse(&csv::StringRecord::from(row.record()), n).expect("row re-parses")
    }

    fn record(&self) -> Vec<String> {
        let t = |x: Option<f64>| x.map(|v| format!("{v:.6}")).unwrap_or_default();
        let mut r = self.axes.clone();
        r.push(t(self.t_ob));
        r.push(t(self.t_tv));
        for s in self.t_shields {
            r.push(t(s));
        }
        r.push(self.iterations.map(|i| i.to_string()).unwrap_or_default());
        r.push(
            self.residual
                .map(|v| format!("{v:.3e}"))
                .unwrap_or_default(),
        );
        r.push(self.status.clone());
        r.push(self.scene_hash.clone());
        r.push(self.seed.to_string());
        r.push(self.rays_per_side.to_string());
        r
    }

    fn parse(rec: &csv::StringRecord, n_axes: usize) -> Result<StudyRow, StudyError> {
        if rec.len() != n_axes + STUDY_COLUMNS.len() {
            return Err(StudyError::Format(format!(
                "row has {} fields, expected {}",
                rec.len(),
                n_axes + STUDY_COLUMNS.len()
            )));
        }
        let f = |i: usize| -> Result<Option<f64>, StudyError> {
            let s = &rec[n_axes + i];
            if s.is_empty() {
                return Ok(None);
            }
            s.parse()
                .map(Some)
                .map_err(|_| StudyError::Format(format!("bad number {s:?}")))
        };
        let int = |i: usize| -> Result<u64, StudyError> {
            rec[n_axes + i]
                .parse()
                .map_err(|_| StudyError::Format(format!("bad integer {:?}", &rec[n_axes + i])))
        };
        let iterations = match &rec[n_axes + 5] {
            "" => None,
            s => Some(
                s.parse()
                    .map_err(|_| StudyError::Format(format!("bad iteration count {s:?}")))?,
            ),
        };
        Ok(StudyRow {
            axes: rec.iter().take(n_axes).map(str::to_string).collect(),
            t_ob: f(0)?,
            t_tv: f(1)?,
            t_shields: [f(2)?, f(3)?, f(4)?],
            iterations,
            residual: f(6)?,
            status: rec[n_axes + 7].to_string(),
            scene_hash: rec[n_axes + 8].to_string(),
            seed: int(9)?,
            rays_per_side: int(10)?,
        })
    }
}

/// A study table: axis names, rows in grid order and the provenance header.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyTable {
    pub axes: Vec<String>,
    pub rows: Vec<StudyRow>,
    pub provenance: Provenance,
}

impl StudyTable {
    pub fn axis_index(&self, name: &str) -> Option<usize> {
        self.axes.iter().position(|a| a == name)
    }

    /// Groups converged rows by the value of `group` and returns, per group,
    /// `(x, row)` pairs along axis `x` in grid order.
    pub fn lines(&self, group: &str, x: &str) -> Option<BTreeMap<String, Vec<(f64, &StudyRow)>>> {
        let (g, xi) = (self.axis_index(group)?, self.axis_index(x)?);
        let mut out: BTreeMap<String, Vec<(f64, &StudyRow)>> = BTreeMap::new();
        for r in &self.rows {
            out.entry(r.axes[g].clone()).or_default();
            if let (true, Some(xv)) = (r.ok(), r.axis_f64(xi)) {
                out.get_mut(&r.axes[g]).unwrap().push((xv, r));
            }
        }
        Some(out)
    }

    pub fn header_line(&self) -> String {
        self.axes
            .iter()
            .map(String::as_str)
            .chain(STUDY_COLUMNS)
            .collect::<Vec<_>>()
            .join(",")
    }
}

/// Parses a study CSV; the axis count is taken from the header.
pub fn read_study_csv(text: &str) -> Result<StudyTable, StudyError> {
    let provenance = Provenance::parse(text);
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let header = rdr
        .headers()
        .map_err(|e| StudyError::Format(e.to_string()))?
        .clone();
    let n = header.len();
    if n < STUDY_COLUMNS.len()
        || header
            .iter()
            .skip(n - STUDY_COLUMNS.len())
            .ne(STUDY_COLUMNS)
    {
        return Err(StudyError::Format(
            "header does not end with the study columns".into(),
        ));
    }
    let n_axes = n - STUDY_COLUMNS.len();
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| StudyError::Format(e.to_string()))?;
        rows.push(StudyRow::parse(&rec, n_axes)?);
    }
    Ok(StudyTable {
        axes: header.iter().take(n_axes).map(str::to_string).collect(),
        rows,
        provenance,
    })
}

#[derive(Debug, Clone, Default)]
pub struct SweepOptions {
    /// CSV written row by row as points complete.
    pub output: Option<PathBuf>,
    /// Keep the valid rows of an existing output and compute only the rest.
    pub resume: bool,
}

fn provenance_of(spec: &SweepSpec) -> Result<Provenance, StudyError> {
    let base = super::apply_overrides(&spec.base, &spec.overrides)?;
    Ok(Provenance::new("study")
        .with("study", &spec.name)
        .with("spec_sha256", spec.hash())
        .with("seed", base.rays.seed)
        .with("rays_per_side", base.rays.rays_per_side)
        .with("batch_size", base.rays.batch_size)
        .with("tolerance", base.solver.tolerance)
        .with("max_iterations", base.solver.max_iterations)
        .with(
            "axes",
            spec.axes
                .iter()
                .map(|a| a.name.as_str())
                .collect::<Vec<_>>()
                .join(" "),
        ))
}

/// Rows of an existing output that can be kept on resume, and the byte
/// length of the file prefix holding them.
fn resumable(
    path: &Path,
    spec: &SweepSpec,
    prov: &Provenance,
    points: &[(Vec<toml::Value>, ModelConfig)],
) -> Result<(Vec<StudyRow>, usize), StudyError> {
    let text = std::fs::read_to_string(path)?;
    if Provenance::parse(&text).get("spec_sha256") != prov.get("spec_sha256") {
        return Err(StudyError::Format(format!(
            "{} was produced by a different sweep spec",
            path.display()
        )));
    }
    let mut offset = 0;
    let mut header_seen = false;
    let mut rows = Vec::new();
    for line in text.split_inclusive('\n') {
        if !line.ends_with('\n') {
            break;
        }
        if line.starts_with('#') {
            offset += line.len();
            continue;
        }
        if !header_seen {
            header_seen = true;
            offset += line.len();
            continue;
        }
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .from_reader(line.as_bytes());
        let Some(Ok(rec)) = rdr.records().next() else {
            break;
        };
        let Ok(row) = StudyRow::parse(&rec, spec.axes.len()) else {
            break;
        };
        let Some((vals, _)) = points.get(rows.len()) else {
            break;
        };
        if row.axes != vals.iter().map(fmt_value).collect::<Vec<_>>() {
            break;
        }
        rows.push(row);
        offset += line.len();
    }
    if !header_seen {
        return Ok((Vec::new(), 0));
    }
    Ok((rows, offset))
}

/// Runs every grid point in order. Geometry and convergence failures become
/// failed rows; configuration and io errors abort the study.
pub fn run_sweep(
    spec: &SweepSpec,
    store: &ViewFactorStore,
    opts: &SweepOptions,
) -> Result<StudyTable, StudyError> {
    let points = spec.points()?;
    let provenance = provenance_of(spec)?;
    let mut table = StudyTable {
        axes: spec.axes.iter().map(|a| a.name.clone()).collect(),
        rows: Vec::new(),
        provenance: provenance.clone(),
    };

    let mut sink = None;
    if let Some(path) = &opts.output {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        let (kept, offset) = if opts.resume && path.exists() {
            resumable(path, spec, &provenance, &points)?
        } else {
            (Vec::new(), 0)
        };
        let file = if offset > 0 {
            let f = OpenOptions::new().write(true).open(path)?;
            f.set_len(offset as u64)?;
            let mut f = f;
            std::io::Seek::seek(&mut f, std::io::SeekFrom::End(0))?;
            f
        } else {
            let mut f = File::create(path)?;
            provenance.write(&mut f)?;
            writeln!(f, "{}", table.header_line())?;
            f
        };
        if !kept.is_empty() {
            log::info!(
                "{}: resuming after {} of {} points",
                spec.name,
                kept.len(),
                points.len()
            );
        }
        table.rows = kept;
        sink = Some(
            csv::WriterBuilder::new()
                .has_headers(false)
                .from_writer(BufWriter::new(file)),
        );
    }

    for (i, (vals, model)) in points.iter().enumerate().skip(table.rows.len()) {
        log::info!(
            "{} [{}/{}] {}",
            spec.name,
            i + 1,
            points.len(),
            fmt_values(vals)
        );
        let scene_hash = model
            .build_scene()
            .map(|s| s.content_hash())
            .unwrap_or_default();
        let outcome = match evaluate(model, store) {
            Ok(ev) => ev.summary(),
            Err(e @ (StudyError::Io(_) | StudyError::Config(_))) => return Err(e),
            Err(e) => Err(e),
        };
        let row = StudyRow::from_outcome(vals, model, scene_hash, outcome);
        if let Some(w) = sink.as_mut() {
            w.write_record(row.record())
                .map_err(|e| StudyError::Format(e.to_string()))?;
            w.flush()?;
        }
        table.rows.push(row);
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_spec() -> SweepSpec {
        let mut s = SweepSpec::preset("coating").unwrap();
        s.base.rays.rays_per_side = 20;
        s.base.layout.revolved_mesh = crate::geometry::MeshDensity(6, 1);
        s.base.layout.flat_mesh = crate::geometry::MeshDensity(2, 2);
        s.base.layout.probe_mesh = crate::geometry::MeshDensity(4, 2);
        s.axes = vec![Axis::floats("coating_fraction", &[0.0, 1.0])];
        s
    }

    #[test]
    fn grid_order_is_first_axis_outermost() {
        let mut s = tiny_spec();
        s.axes = vec![
            Axis::floats("shields.d3", &[0.1, 0.2]),
            Axis::floats("shields.phi3_deg", &[5.0, 10.0, 15.0]),
        ];
        let p = s.points().unwrap();
        let pairs: Vec<(f64, f64)> = p
            .iter()
            .map(|(_, m)| (m.shields.d3, m.shields.phi3_deg))
            .collect();
        assert_eq!(pairs[0], (0.1, 5.0));
        assert_eq!(pairs[2], (0.1, 15.0));
        assert_eq!(pairs[3], (0.2, 5.0));
    }

    #[test]
    fn bad_axes_are_config_errors() {
        let mut s = tiny_spec();
        s.axes = vec![Axis::floats("shields.nope", &[1.0])];
        assert!(matches!(s.points(), Err(StudyError::Config(_))));
        s.axes = vec![];
        assert!(matches!(s.points(), Err(StudyError::Config(_))));
    }

    #[test]
    fn presets_parse_and_round_trip() {
        for name in SweepSpec::PRESETS {
            let s = SweepSpec::preset(name).unwrap();
            assert!(!s.points().unwrap().is_empty(), "{name}");
            assert_eq!(SweepSpec::parse(&s.to_toml()).unwrap(), s);
        }
        assert!(SweepSpec::preset("nope").is_none());
    }

    #[test]
    fn geometry_failures_are_recorded_not_dropped() {
        let mut s = tiny_spec();
        // Shield 3 at 0.33 m runs into the bench.
        s.axes = vec![Axis::floats("shields.d3", &[0.2, 0.33])];
        let t = run_sweep(&s, &ViewFactorStore::in_memory(), &SweepOptions::default()).unwrap();
        assert_eq!(t.rows.len(), 2);
        assert!(t.rows[0].ok());
        assert_eq!(t.rows[1].status, "failed:geometry");
        assert!(t.rows[1].t_ob.is_none());
    }

    #[test]
    fn csv_round_trips_and_resume_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("study.csv");
        let s = tiny_spec();
        let store = ViewFactorStore::in_memory();
        let opts = SweepOptions {
            output: Some(path.clone()),
            resume: false,
        };
        let full = run_sweep(&s, &store, &opts).unwrap();
        assert_eq!(store.traces(), 1, "coating changes no geometry");
        let bytes = std::fs::read(&path).unwrap();
        let parsed = read_study_csv(std::str::from_utf8(&bytes).unwrap()).unwrap();
        assert_eq!(parsed.rows.len(), 2);
        assert_eq!(parsed.axes, full.axes);
        assert_eq!(parsed.provenance, full.provenance);
        assert!((parsed.rows[1].t_tv.unwrap() - full.rows[1].t_tv.unwrap()).abs() < 1e-6);

        // Drop the last row and leave a torn line behind.
        let text = String::from_utf8(bytes.clone()).unwrap();
        let cut = text.trim_end().rfind('\n').unwrap() + 1;
        std::fs::write(&path, format!("{}0.9,12.", &text[..cut])).unwrap();
        let resumed = run_sweep(
            &s,
            &store,
            &SweepOptions {
                resume: true,
                ..opts.clone()
            },
        )
        .unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), bytes);
        assert_eq!(resumed.rows, parsed.rows);

        let mut other = s.clone();
        other.name = "changed".into();
        assert!(matches!(
            run_sweep(
                &other,
                &store,
                &SweepOptions {
                    resume: true,
                    ..opts
                }
            ),
            Err(StudyError::Format(_))
        ));
    }
}
