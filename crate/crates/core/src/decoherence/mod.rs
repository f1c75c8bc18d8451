//! Black-body decoherence of a dielectric nanosphere in a position
//! superposition, in the long-wavelength limit.
//!
//! Localization rates, m^-2 s^-1, with `k = k_B T / (hbar c)` and
//! `alpha = (eps - 1) / (eps + 2)`:
//!
//! * scattering  `8! 8 zeta(9) c R^6 k_env^9 Re(alpha)^2 / (9 pi)`
//! * absorption  `16 pi^5 c R^3 k_env^6 Im(alpha) / 189`
//! * emission    as absorption with `k_int`
//!
//! The visibility after separation `d` is held for `t2` is
//! `exp(-(sum of rates) d^2 t2)`. Products are formed as sums of logarithms
//! so the `T^9` and `R^6` factors stay representable in `f32`.

mod curves;

pub use curves::{
    emit_visibility_curves, visibility_curve, CurveMode, CurvePoint, CurveSpec, CURVE_COLUMNS,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::num::Real;

pub const HBAR: f64 = 1.054_571_817e-34;
pub const BOLTZMANN: f64 = 1.380_649e-23;
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
pub const ATOMIC_MASS_UNIT: f64 = 1.660_539_066_60e-27;
/// Riemann zeta(9).
const ZETA_9: f64 = 1.002_008_392_826_082_2;

/// Below this pressure gas collisions are neglected, Pa.
pub const GAS_PRESSURE_THRESHOLD: f64 = 1e-13;
/// Mean molecular mass assumed for residual gas, kg.
pub const GAS_MOLECULE_MASS: f64 = 28.0 * ATOMIC_MASS_UNIT;
/// Thermal wavelength must exceed radius and separation by this factor.
pub const REGIME_MARGIN: f64 = 10.0;
/// Radii over which the long-wavelength treatment is trusted, m.
pub const RADIUS_RANGE: (f64, f64) = (50e-9, 200e-9);

#[derive(Debug, Error, PartialEq)]
pub enum DecoherenceError {
    #[error("invalid particle: {0}")]
    Particle(String),
    #[error("invalid environment: {0}")]
    Environment(String),
    #[error("invalid timeline: {0}")]
    Timeline(String),
}

/// Relative permittivity at thermal wavelengths, `re + i im`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Permittivity {
    pub re: f64,
    pub im: f64,
}

impl Permittivity {
    /// `(eps - 1) / (eps + 2)` as `(re, im)`.
    pub fn clausius_mossotti(&self) -> (f64, f64) {
        let (nr, ni) = (self.re - 1.0, self.im);
        let (dr, di) = (self.re + 2.0, self.im);
        let den = dr * dr + di * di;
        ((nr * dr + ni * di) / den, (ni * dr - nr * di) / den)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Particle {
    /// m
    pub radius: f64,
    /// kg/m^3
    pub density: f64,
    pub permittivity: Permittivity,
}

impl Default for Particle {
    fn default() -> Self {
        Particle {
            radius: 90e-9,
            density: 5510.0,
            permittivity: Permittivity { re: 5.45, im: 0.8 },
        }
    }
}

impl Particle {
    pub fn validate(&self) -> Result<(), DecoherenceError> {
        let bad = |m: String| Err(DecoherenceError::Particle(m));
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return bad(format!("radius {} m must be positive", self.radius));
        }
        if !(self.density > 0.0 && self.density.is_finite()) {
            return bad(format!("density {} kg/m^3 must be positive", self.density));
        }
        let p = self.permittivity;
        if !(p.re.is_finite() && p.im.is_finite() && p.im >= 0.0) {
            return bad(format!(
                "permittivity {} + {}i must be finite with im >= 0",
                p.re, p.im
            ));
        }
        Ok(())
    }

    /// kg
    pub fn mass(&self) -> f64 {
        4.0 / 3.0 * std::f64::consts::PI * self.radius.powi(3) * self.density
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvState {
    /// Environment (radiation field) temperature, K.
    pub t_env: f64,
    /// Internal temperature of the particle, K.
    pub t_int: f64,
    /// Pa
    pub pressure: f64,
}

impl Default for EnvState {
    fn default() -> Self {
        EnvState {
            t_env: 16.4,
            t_int: 16.4,
            pressure: 1e-14,
        }
    }
}

impl EnvState {
    pub fn validate(&self) -> Result<(), DecoherenceError> {
        for (name, v) in [
            ("t_env", self.t_env),
            ("t_int", self.t_int),
            ("pressure", self.pressure),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(DecoherenceError::Environment(format!(
                    "{name} = {v} must be >= 0"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentTimeline {
    /// Free expansion before the superposition is prepared, s.
    pub t1: f64,
    /// Evolution of the prepared superposition, s.
    pub t2: f64,
    /// Superposition separation, m.
    pub separation: f64,
}

impl Default for ExperimentTimeline {
    fn default() -> Self {
        ExperimentTimeline {
            t1: 1.0,
            t2: 100.0,
            separation: 100e-9,
        }
    }
}

impl ExperimentTimeline {
    pub fn validate(&self) -> Result<(), DecoherenceError> {
        for (name, v) in [
            ("t1", self.t1),
            ("t2", self.t2),
            ("separation", self.separation),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(DecoherenceError::Timeline(format!(
                    "{name} = {v} must be > 0"
                )));
            }
        }
        Ok(())
    }
}

/// Whether the long-wavelength formulas apply.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Valid,
    Violated(String),
}

impl Regime {
    pub fn is_valid(&self) -> bool {
        matches!(self, Regime::Valid)
    }

    pub fn label(&self) -> &'static str {
        match self {
            Regime::Valid => "valid",
            Regime::Violated(_) => "violated",
        }
    }
}

/// Thermal photon wavelength `2 pi hbar c / (k_B T)`, m; infinite at 0 K.
pub fn thermal_wavelength(t: f64) -> f64 {
    2.0 * std::f64::consts::PI * HBAR * SPEED_OF_LIGHT / (BOLTZMANN * t)
}

/// Checks the radius range and that the hottest thermal wavelength exceeds
/// both radius and separation by [`REGIME_MARGIN`].
pub fn regime(p: &Particle, env: &EnvState, separation: Option<f64>) -> Regime {
    let mut why = Vec::new();
    if !(RADIUS_RANGE.0..=RADIUS_RANGE.1).contains(&p.radius) {
        why.push(format!(
            "radius {:.3e} m outside [{:.0e}, {:.0e}] m",
            p.radius, RADIUS_RANGE.0, RADIUS_RANGE.1
        ));
    }
    let lambda = thermal_wavelength(env.t_env.max(env.t_int));
    let scale = p.radius.max(separation.unwrap_or(0.0));
    if lambda < REGIME_MARGIN * scale {
        why.push(format!(
            "thermal wavelength {lambda:.3e} m not >> {scale:.3e} m"
        ));
    }
    if why.is_empty() {
        Regime::Valid
    } else {
        Regime::Violated(why.join("; "))
    }
}

/// Localization rates, m^-2 s^-1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rates<R: Real> {
    pub scattering: R,
    pub absorption: R,
    pub emission: R,
}

impl<R: Real> Rates<R> {
    pub fn total(&self) -> R {
        self.scattering + self.absorption + self.emission
    }
}

/// `ln(k_B T / (hbar c))`; minus infinity at 0 K.
fn ln_wavenumber<R: Real>(t: f64) -> R {
    R::lit(t).ln() + R::lit(BOLTZMANN / (HBAR * SPEED_OF_LIGHT)).ln()
}

fn from_ln<R: Real>(x: R) -> R {
    if x == R::neg_infinity() {
        R::zero()
    } else {
        x.exp()
    }
}

/// Black-body scattering, absorption and emission rates. The caller checks
/// validity with [`regime`].
pub fn blackbody_rates<R: Real>(p: &Particle, env: &EnvState) -> Rates<R> {
    let (a_re, a_im) = p.permittivity.clausius_mossotti();
    let ln_c = R::lit(SPEED_OF_LIGHT).ln();
    let ln_r = R::lit(p.radius).ln();
    let ln_sc = R::lit(40320.0 * 8.0 * ZETA_9 / (9.0 * std::f64::consts::PI)).ln();
    let ln_ab = R::lit(16.0 * std::f64::consts::PI.powi(5) / 189.0).ln();
    let ke = ln_wavenumber::<R>(env.t_env);
    let ki = ln_wavenumber::<R>(env.t_int);
    let re2 = R::lit(a_re * a_re);
    let im = R::lit(a_im);
    let scattering = if re2 > R::zero() {
        from_ln(ln_sc + ln_c + R::lit(6.0) * ln_r + R::lit(9.0) * ke + re2.ln())
    } else {
        R::zero()
    };
    let absorption_like = |k: R| {
        if im > R::zero() {
            from_ln(ln_ab + ln_c + R::lit(3.0) * ln_r + R::lit(6.0) * k + im.ln())
        } else {
            R::zero()
        }
    };
    Rates {
        scattering,
        absorption: absorption_like(ke),
        emission: absorption_like(ki),
    }
}

/// Decoherence rate from residual gas collisions in the saturated regime,
/// s^-1, with the gas at the environment temperature.
pub fn gas_collision_rate<R: Real>(p: &Particle, env: &EnvState) -> R {
    let t = env.t_env.max(crate::solver::TEMPERATURE_FLOOR);
    let v_mean = (8.0 * BOLTZMANN * t / (std::f64::consts::PI * GAS_MOLECULE_MASS)).sqrt();
    let pre = 16.0 * std::f64::consts::PI * (2.0 * std::f64::consts::PI).sqrt() / 3f64.sqrt();
    R::lit(pre) * R::lit(env.pressure) * R::lit(p.radius) * R::lit(p.radius)
        / R::lit(v_mean * GAS_MOLECULE_MASS)
}

#[derive(Debug, Clone, PartialEq)]
pub struct VisibilityResult<R: Real> {
    pub rates: Rates<R>,
    /// Gas collision rate, s^-1; zero when the pressure is below
    /// [`GAS_PRESSURE_THRESHOLD`].
    pub gas_rate: R,
    pub visibility: R,
    pub regime: Regime,
    /// True when gas collisions were included.
    pub gas_included: bool,
}

/// Interference visibility after the superposition has evolved for `t2`.
pub fn visibility<R: Real>(
    p: &Particle,
    env: &EnvState,
    tl: &ExperimentTimeline,
) -> Result<VisibilityResult<R>, DecoherenceError> {
    p.validate()?;
    env.validate()?;
    tl.validate()?;
    let rates = blackbody_rates::<R>(p, env);
    let d = R::lit(tl.separation);
    let t2 = R::lit(tl.t2);
    let total = rates.total();
    let bb = if total > R::zero() {
        from_ln(total.ln() + R::lit(2.0) * d.ln() + t2.ln())
    } else {
        R::zero()
    };
    let gas_included = env.pressure > GAS_PRESSURE_THRESHOLD;
    let gas_rate = if gas_included {
        gas_collision_rate::<R>(p, env)
    } else {
        R::zero()
    };
    let exponent = bb + gas_rate * t2;
    let v = (-exponent).exp().max(R::zero()).min(R::one());
    Ok(VisibilityResult {
        rates,
        gas_rate,
        visibility: v,
        regime: regime(p, env, Some(tl.separation)),
        gas_included,
    })
}
