use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::provenance::Provenance;

use super::{visibility, DecoherenceError, EnvState, ExperimentTimeline, Particle};

/// Columns of a visibility curve CSV. `V_macrorealistic` is reserved and
/// left empty.
pub const CURVE_COLUMNS: [&str; 10] = [
    "mode",
    "T_env",
    "T_int",
    "lambda_sc",
    "lambda_abs",
    "lambda_em",
    "gas_rate",
    "V",
    "V_macrorealistic",
    "regime",
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum CurveMode {
    /// Internal temperature equal to the swept environment temperature.
    Equilibrium,
    /// Environment held at `t_env` while the internal temperature is swept.
    FixedEnvironment { t_env: f64 },
}

/// A temperature sweep of the visibility on `points` evenly spaced values
/// in `[t_min, t_max]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurveSpec {
    pub mode: CurveMode,
    pub t_min: f64,
    pub t_max: f64,
    pub points: usize,
    #[serde(default)]
    pub particle: Particle,
    #[serde(default)]
    pub timeline: ExperimentTimeline,
    /// Pa
    #[serde(default)]
    pub pressure: f64,
}

impl CurveSpec {
    /// The two standard curves: internal equal to environment over
    /// 0..40 K, and internal over 0..60 K at a fixed environment.
    pub fn standard(t_env: f64) -> [CurveSpec; 2] {
        let base = |mode, t_max| CurveSpec {
            mode,
            t_min: 0.0,
            t_max,
            points: 81,
            particle: Particle::default(),
            timeline: ExperimentTimeline::default(),
            pressure: 0.0,
        };
        [
            base(CurveMode::Equilibrium, 40.0),
            base(CurveMode::FixedEnvironment { t_env }, 60.0),
        ]
    }

    /// Grid value `i`; refining `n` to `2n - 1` points reproduces every
    /// coarse value exactly.
    pub fn temperature(&self, i: usize) -> f64 {
        if self.points == 1 {
            return self.t_min;
        }
        self.t_min + (self.t_max - self.t_min) * (i as f64 / (self.points - 1) as f64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurvePoint {
    pub mode: &'static str,
    pub t_env: f64,
    pub t_int: f64,
    pub lambda_sc: f64,
    pub lambda_abs: f64,
    pub lambda_em: f64,
    pub gas_rate: f64,
    pub visibility: f64,
    pub regime: &'static str,
}

pub fn visibility_curve(spec: &CurveSpec) -> Result<Vec<CurvePoint>, DecoherenceError> {
    if spec.points == 0
        || !(spec.t_min >= 0.0 && spec.t_max >= spec.t_min && spec.t_max.is_finite())
    {
        return Err(DecoherenceError::Environment(format!(
            "curve grid [{}, {}] with {} points is invalid",
            spec.t_min, spec.t_max, spec.points
        )));
    }
    (0..spec.points)
        .map(|i| {
            let t = spec.temperature(i);
            let (mode, t_env, t_int) = match spec.mode {
                CurveMode::Equilibrium => ("equilibrium", t, t),
                CurveMode::FixedEnvironment { t_env } => ("fixed_environment", t_env, t),
            };
            let env = EnvState {
                t_env,
                t_int,
                pressure: spec.pressure,
            };
            let r = visibility::<f64>(&spec.particle, &env, &spec.timeline)?;
            Ok(CurvePoint {
                mode,
                t_env,
                t_int,
                lambda_sc: r.rates.scattering,
                lambda_abs: r.rates.absorption,
                lambda_em: r.rates.emission,
                gas_rate: r.gas_rate,
                visibility: r.visibility,
                regime: r.regime.label(),
            })
        })
        .collect()
}

/// Writes all curves to one CSV after the provenance header.
pub fn emit_visibility_curves<W: Write>(
    specs: &[CurveSpec],
    provenance: &Provenance,
    mut out: W,
) -> Result<Vec<CurvePoint>, std::io::Error> {
    let mut all = Vec::new();
    for s in specs {
        all.extend(
            visibility_curve(s)
                .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidInput, e))?,
        );
    }
    provenance.write(&mut out)?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CURVE_COLUMNS)?;
    for p in &all {
        w.write_record([
            p.mode.to_string(),
            format!("{}", p.t_env),
            format!("{}", p.t_int),
            format!("{:.9e}", p.lambda_sc),
            format!("{:.9e}", p.lambda_abs),
            format!("{:.9e}", p.lambda_em),
            format!("{:.9e}", p.gas_rate),
            format!("{:.12}", p.visibility),
            String::new(),
            p.regime.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(all)
}
