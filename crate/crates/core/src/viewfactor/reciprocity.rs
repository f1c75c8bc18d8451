use crate::geometry::MeshedScene;

use super::{GroupViewFactors, ViewFactorError, ViewFactorMatrix};

/// Two-sided tail probability beyond 3 standard errors.
const P_3SIGMA: f64 = 0.002_699_796;

/// Reciprocity `A_i F_ij = A_j F_ji` checked pair by pair.
///
/// Each pair's asymmetry is compared with the pooled standard error of the
/// two estimates. With many pairs a few 3-sigma exceedances are expected by
/// chance, so the report carries both the strict per-pair verdict and a
/// family-wise one that compares the exceedance count with its expectation.
#[derive(Debug, Clone, PartialEq)]
pub struct ReciprocityReport {
    pub pairs_checked: usize,
    /// Largest `|A_i F_ij - A_j F_ji| / max(A_i F_ij, A_j F_ji)`.
    pub worst_relative: f64,
    pub worst_relative_pair: Option<(usize, usize)>,
    /// Largest asymmetry in units of its pooled standard error.
    pub max_z: f64,
    pub max_z_pair: Option<(usize, usize)>,
    pub over_3sigma: usize,
    pub expected_over_3sigma: f64,
}

impl ReciprocityReport {
    /// Every pair agrees within 3 standard errors.
    pub fn per_pair_consistent(&self) -> bool {
        self.over_3sigma == 0
    }

    /// The number of 3-sigma exceedances is within 3 Poisson standard
    /// deviations of what pure sampling noise produces.
    pub fn family_consistent(&self) -> bool {
        let e = self.expected_over_3sigma;
        (self.over_3sigma as f64) <= e + 3.0 * e.sqrt() + 1.0
    }

    fn new() -> Self {
        ReciprocityReport {
            pairs_checked: 0,
            worst_relative: 0.0,
            worst_relative_pair: None,
            max_z: 0.0,
            max_z_pair: None,
            over_3sigma: 0,
            expected_over_3sigma: 0.0,
        }
    }

    /// `a`, `b` are `A_i F_ij` and `A_j F_ji`; `va`, `vb` their variances.
    fn add(&mut self, pair: (usize, usize), a: f64, va: f64, b: f64, vb: f64) {
        let diff = (a - b).abs();
        if a == 0.0 && b == 0.0 {
            return;
        }
        self.pairs_checked += 1;
        let rel = diff / a.max(b).max(f64::EPSILON);
        if rel > self.worst_relative {
            self.worst_relative = rel;
            self.worst_relative_pair = Some(pair);
        }
        let se = (va + vb).sqrt();
        let z = if se > 0.0 {
            diff / se
        } else if diff > 0.0 {
            f64::INFINITY
        } else {
            0.0
        };
        if z > self.max_z {
            self.max_z = z;
            self.max_z_pair = Some(pair);
        }
        if z > 3.0 {
            self.over_3sigma += 1;
        }
        self.expected_over_3sigma = self.pairs_checked as f64 * P_3SIGMA;
    }
}

/// Facet-side level reciprocity over every pair with a non-zero estimate in
/// either direction.
pub fn check_reciprocity(
    m: &ViewFactorMatrix,
    scene: &MeshedScene,
) -> Result<ReciprocityReport, ViewFactorError> {
    m.check_scene(scene)?;
    let area = |s: usize| scene.facets()[s / 2].area;
    // Variances are evaluated under reciprocity, at the pooled estimate
    // p = (A_i F_ij + A_j F_ji) / 2. The per-direction sample variance is
    // zero whenever one direction has no hits and overstates z badly for
    // sparse pairs.
    let null_var = |s: usize, p: f64| {
        let a = area(s);
        let f = (p / a).min(1.0);
        a * a * f * (1.0 - f) / m.rays(s) as f64
    };
    let mut report = ReciprocityReport::new();
    for i in 0..m.n_sides() {
        for &(j, _) in m.raw_row(i) {
            let j = j as usize;
            // Visit each unordered pair once: from the lower index, or from
            // the higher one when the lower row has no entry.
            if j > i || (j < i && m.hits(j, i) == 0) {
                let (a, b) = (area(i) * m.get(i, j), area(j) * m.get(j, i));
                let p = 0.5 * (a + b);
                report.add((i, j), a, null_var(i, p), b, null_var(j, p));
            }
        }
    }
    Ok(report)
}

/// Reciprocity between groups (typically thermal nodes), SPACE excluded.
pub fn check_reciprocity_grouped(g: &GroupViewFactors) -> ReciprocityReport {
    let n = g.area.len();
    let mut report = ReciprocityReport::new();
    for i in 0..n {
        for j in i + 1..n {
            let (a, b) = (g.area[i] * g.f[i][j], g.area[j] * g.f[j][i]);
            let va = (g.area[i] * g.se[i][j]).powi(2);
            let vb = (g.area[j] * g.se[j][i]).powi(2);
            report.add((i, j), a, va, b, vb);
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Facet, SideProperties, Vec3};
    use crate::viewfactor::RayBudget;

    fn unit_squares(n: usize) -> MeshedScene {
        let s = SideProperties::new(1.0).unwrap();
        let facets = (0..n)
            .map(|k| {
                let o = Vec3::new(2.0 * k as f64, 0.0, 0.0);
                Facet::from_polygon(
                    vec![o, o + Vec3::X, o + Vec3::X + Vec3::Y, o + Vec3::Y],
                    Vec3::Z,
                    s,
                    s,
                )
                .unwrap()
            })
            .collect();
        MeshedScene::from_facets(facets, vec!["n".into()]).unwrap()
    }

    fn permutation_matrix(n_facets: usize, hits: u32) -> ViewFactorMatrix {
        // Side i sees side (i + 1) mod 2N and is seen back symmetrically.
        let n = 2 * n_facets;
        let mut rows = vec![Vec::new(); n];
        for i in (0..n).step_by(2) {
            rows[i].push(((i + 1) as u32, hits));
            rows[i + 1].push((i as u32, hits));
        }
        ViewFactorMatrix::from_counts(
            n_facets,
            vec![1000; n],
            rows,
            RayBudget::default(),
            String::new(),
        )
        .unwrap()
    }

    #[test]
    fn symmetric_permutation_has_zero_asymmetry() {
        let scene = unit_squares(3);
        let m = permutation_matrix(3, 1000);
        let r = check_reciprocity(&m, &scene).unwrap();
        assert_eq!(r.pairs_checked, 3);
        assert_eq!(r.worst_relative, 0.0);
        assert!(r.per_pair_consistent());
    }

    #[test]
    fn corrupted_entry_is_flagged() {
        let scene = unit_squares(2);
        let mut m = permutation_matrix(2, 500);
        let r = check_reciprocity(&m, &scene).unwrap();
        assert!(r.per_pair_consistent());
        m.set_hits(0, 1, 800);
        let r = check_reciprocity(&m, &scene).unwrap();
        assert!(!r.per_pair_consistent());
        assert!(r.max_z > 3.0);
        assert_eq!(r.max_z_pair, Some((0, 1)));
    }
}
