use std::path::Path;

use crate::num::Real;

use super::NetworkError;

/// Tabulated thermal conductivity, piecewise linear between samples and
/// held constant outside the table.
#[derive(Debug, Clone, PartialEq)]
pub struct MaterialTable<R: Real> {
    name: String,
    t: Vec<R>,
    kappa: Vec<R>,
    /// `integral[k]` = integral of kappa from `t[0]` to `t[k]`.
    integral: Vec<R>,
}

/// Tables shipped with the crate, by name.
pub const BUILTIN_MATERIALS: &[(&str, &str)] = &[
    (
        "stainless_304",
        include_str!("../../data/materials/stainless_304.csv"),
    ),
    ("ti6al4v", include_str!("../../data/materials/ti6al4v.csv")),
    ("gfrp", include_str!("../../data/materials/gfrp.csv")),
    ("zerodur", include_str!("../../data/materials/zerodur.csv")),
    ("gold", include_str!("../../data/materials/gold.csv")),
    ("sic", include_str!("../../data/materials/sic.csv")),
];

impl<R: Real> MaterialTable<R> {
    pub fn new(name: &str, samples: &[(f64, f64)]) -> Result<Self, NetworkError> {
        let bad = |why: &str| NetworkError::Material(format!("{name}: {why}"));
        if samples.len() < 2 {
            return Err(bad("needs at least two samples"));
        }
        for w in samples.windows(2) {
            if !(w[1].0 > w[0].0) {
                return Err(bad("temperatures must be strictly increasing"));
            }
        }
        if samples
            .iter()
            .any(|&(t, k)| !(t >= 0.0 && k > 0.0 && t.is_finite() && k.is_finite()))
        {
            return Err(bad("temperatures must be >= 0 and conductivities > 0"));
        }
        let t: Vec<R> = samples.iter().map(|s| R::lit(s.0)).collect();
        let kappa: Vec<R> = samples.iter().map(|s| R::lit(s.1)).collect();
        let mut integral = vec![R::zero()];
        let half = R::lit(0.5);
        for k in 1..t.len() {
            let seg = half * (kappa[k] + kappa[k - 1]) * (t[k] - t[k - 1]);
            integral.push(integral[k - 1] + seg);
        }
        Ok(MaterialTable {
            name: name.to_string(),
            t,
            kappa,
            integral,
        })
    }

    /// Constant conductivity over all temperatures.
    pub fn constant(name: &str, kappa: f64) -> Result<Self, NetworkError> {
        Self::new(name, &[(0.0, kappa), (1.0, kappa)])
    }

    /// Parses `T_K,kappa` CSV with a header row; `#` lines are comments.
    pub fn from_csv(name: &str, text: &str) -> Result<Self, NetworkError> {
        let mut rdr = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let mut samples = Vec::new();
        for rec in rdr.deserialize::<(f64, f64)>() {
            samples.push(rec.map_err(|e| NetworkError::Material(format!("{name}: {e}")))?);
        }
        Self::new(name, &samples)
    }

    pub fn load(path: &Path) -> Result<Self, NetworkError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| NetworkError::Material(format!("{}: {e}", path.display())))?;
        let name = path
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or("material");
        Self::from_csv(name, &text)
    }

    pub fn builtin(name: &str) -> Result<Self, NetworkError> {
        let (_, text) = BUILTIN_MATERIALS
            .iter()
            .find(|(n, _)| *n == name)
            .ok_or_else(|| NetworkError::Material(format!("unknown built-in material {name:?}")))?;
        Self::from_csv(name, text)
    }

    pub fn cast<S: Real>(&self) -> MaterialTable<S> {
        let c = |v: &Vec<R>| v.iter().map(|x| S::lit(x.to_f64_lossy())).collect();
        MaterialTable {
            name: self.name.clone(),
            t: c(&self.t),
            kappa: c(&self.kappa),
            integral: c(&self.integral),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn range(&self) -> (R, R) {
        (self.t[0], self.t[self.t.len() - 1])
    }

    pub fn in_range(&self, t: R) -> bool {
        let (lo, hi) = self.range();
        t >= lo && t <= hi
    }

    fn segment(&self, t: R) -> usize {
        // Index k with t[k] <= t < t[k+1], clamped to the table.
        let n = self.t.len();
        match self.t.iter().position(|&x| x > t) {
            Some(0) => 0,
            Some(k) => k - 1,
            None => n - 2,
        }
    }

    /// Conductivity at `t`, W m^-1 K^-1.
    pub fn kappa(&self, t: R) -> R {
        let (lo, hi) = self.range();
        if t <= lo {
            return self.kappa[0];
        }
        if t >= hi {
            return self.kappa[self.kappa.len() - 1];
        }
        let k = self.segment(t);
        let w = (t - self.t[k]) / (self.t[k + 1] - self.t[k]);
        self.kappa[k] + w * (self.kappa[k + 1] - self.kappa[k])
    }

    /// Conductivity integral from the lowest table temperature to `t`,
    /// W m^-1. Outside the table the conductivity is held at the end value,
    /// so the integral continues linearly.
    pub fn integral(&self, t: R) -> R {
        let (lo, hi) = self.range();
        if t <= lo {
            return self.kappa[0] * (t - lo);
        }
        if t >= hi {
            let n = self.t.len() - 1;
            return self.integral[n] + self.kappa[n] * (t - hi);
        }
        let k = self.segment(t);
        let kt = self.kappa(t);
        self.integral[k] + R::lit(0.5) * (self.kappa[k] + kt) * (t - self.t[k])
    }

    /// Mean conductivity over `[a, b]`; the point value when `a == b`.
    pub fn mean_kappa(&self, a: R, b: R) -> R {
        let d = b - a;
        let scale = a.abs().max(b.abs()).max(R::one());
        if d.abs() <= R::epsilon().sqrt() * scale {
            return self.kappa(R::lit(0.5) * (a + b));
        }
        (self.integral(b) - self.integral(a)) / d
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interpolation_midpoint() {
        let m = MaterialTable::<f64>::new("m", &[(10.0, 0.1), (30.0, 0.3)]).unwrap();
        assert!((m.kappa(20.0) - 0.2).abs() < 1e-15);
        assert_eq!(m.kappa(1.0), 0.1);
        assert_eq!(m.kappa(400.0), 0.3);
    }

    #[test]
    fn linear_kappa_mean_is_midpoint_value() {
        // kappa = a T  =>  mean over [10, 30] = 20 a.
        let a = 0.01;
        let samples: Vec<(f64, f64)> = (1..=50).map(|t| (t as f64, a * t as f64)).collect();
        let m = MaterialTable::<f64>::new("lin", &samples).unwrap();
        assert!((m.mean_kappa(10.0, 30.0) - 20.0 * a).abs() < 1e-14);
        assert!((m.mean_kappa(30.0, 10.0) - 20.0 * a).abs() < 1e-14);
    }

    #[test]
    fn validation() {
        assert!(MaterialTable::<f64>::new("x", &[(1.0, 1.0)]).is_err());
        assert!(MaterialTable::<f64>::new("x", &[(1.0, 1.0), (1.0, 2.0)]).is_err());
        assert!(MaterialTable::<f64>::new("x", &[(1.0, 1.0), (2.0, 0.0)]).is_err());
    }

    #[test]
    fn builtins_parse() {
        for (name, _) in BUILTIN_MATERIALS {
            let m = MaterialTable::<f64>::builtin(name).unwrap();
            assert_eq!(m.range(), (4.0, 300.0));
        }
        let m = MaterialTable::<f32>::builtin("stainless_304").unwrap();
        assert!(m.kappa(300.0) > 14.0);
    }

    proptest::proptest! {
        #[test]
        fn mean_kappa_is_symmetric_and_continuous(a in 1.0f64..400.0, b in 1.0f64..400.0) {
            let m = MaterialTable::<f64>::builtin("stainless_304").unwrap();
            let ab = m.mean_kappa(a, b);
            let ba = m.mean_kappa(b, a);
            proptest::prop_assert!((ab - ba).abs() <= 1e-12 * ab);
            let near = m.mean_kappa(a, a + 1e-6);
            proptest::prop_assert!((near - m.kappa(a)).abs() <= 1e-5 * m.kappa(a));
            let lo = m.kappa(a.min(b));
            let hi = m.kappa(a.max(b));
            // Piecewise-linear kappa is monotone for steel, so the mean lies between the ends.
            proptest::prop_assert!(ab >= lo * (1.0 - 1e-12) && ab <= hi * (1.0 + 1e-12));
        }
    }
}
