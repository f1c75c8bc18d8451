//! Diffuse view factors by Monte Carlo ray tracing.
//!
//! Every facet side emits rays from uniformly sampled points with
//! cosine-weighted directions about the side's normal. A ray tallies on the
//! first facet side it hits, or on SPACE if it leaves the scene. Emissivity
//! plays no part in transport.

mod analytic;
mod cache;
mod reciprocity;

pub use analytic::analytic_disk_viewfactor;
pub use cache::{cache_file_name, load_cache, save_cache, CacheKey};
pub use reciprocity::{check_reciprocity, check_reciprocity_grouped, ReciprocityReport};

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Facet, MeshedScene, Side, Vec3};

#[derive(Debug, Error)]
pub enum ViewFactorError {
    #[error("invalid ray budget: {0}")]
    Budget(String),
    #[error("matrix has {matrix} facets but scene has {scene}")]
    Mismatch { matrix: usize, scene: usize },
    #[error("analytic view factor needs positive inputs, got r1={r1}, r2={r2}, h={h}")]
    NonPositive { r1: f64, r2: f64, h: f64 },
    #[error("view-factor cache: {0}")]
    Cache(String),
}

/// Ray count and random stream layout for a trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RayBudget {
    /// Rays emitted from each facet side.
    pub rays_per_side: u64,
    pub seed: u64,
    /// Rays per independent random stream; the last batch of a side may be short.
    pub batch_size: u64,
}

impl Default for RayBudget {
    fn default() -> Self {
        RayBudget {
            rays_per_side: 10_000,
            seed: DEFAULT_SEED,
            batch_size: 4096,
        }
    }
}

/// Seed used when none is given.
pub const DEFAULT_SEED: u64 = 0x5eed_c01d_2013_0001;

impl RayBudget {
    pub fn validate(&self) -> Result<(), ViewFactorError> {
        if self.rays_per_side == 0 {
            return Err(ViewFactorError::Budget("rays_per_side must be >= 1".into()));
        }
        if self.batch_size == 0 {
            return Err(ViewFactorError::Budget("batch_size must be >= 1".into()));
        }
        Ok(())
    }
}

/// Row/column index of a facet side.
#[inline]
pub fn side_index(facet: usize, side: Side) -> usize {
    2 * facet
        + match side {
            Side::Front => 0,
            Side::Back => 1,
        }
}

#[inline]
pub fn side_of(index: usize) -> (usize, Side) {
    (
        index / 2,
        if index % 2 == 0 {
            Side::Front
        } else {
            Side::Back
        },
    )
}

/// View factors from every facet side (rows) to every facet side plus SPACE
/// (columns), stored as sparse hit counts.
#[derive(Debug, Clone, PartialEq)]
pub struct ViewFactorMatrix {
    n_facets: usize,
    rays: Vec<u64>,
    /// Sorted by column.
    rows: Vec<Vec<(u32, u32)>>,
    space: Vec<f64>,
    budget: RayBudget,
    geometry_hash: String,
}

impl ViewFactorMatrix {
    /// Assembles a matrix from raw tallies. `rows[i]` lists `(column side,
    /// hits)`; the SPACE entry is the remainder of each row.
    pub fn from_counts(
        n_facets: usize,
        rays: Vec<u64>,
        mut rows: Vec<Vec<(u32, u32)>>,
        budget: RayBudget,
        geometry_hash: String,
    ) -> Result<Self, ViewFactorError> {
        let n = 2 * n_facets;
        if rays.len() != n || rows.len() != n {
            return Err(ViewFactorError::Mismatch {
                matrix: rays.len().min(rows.len()) / 2,
                scene: n_facets,
            });
        }
        for (i, row) in rows.iter_mut().enumerate() {
            row.retain(|&(_, h)| h > 0);
            row.sort_by_key(|&(c, _)| c);
            let total: u64 = row.iter().map(|&(_, h)| h as u64).sum();
            if row.iter().any(|&(c, _)| c as usize >= n) || total > rays[i] || rays[i] == 0 {
                return Err(ViewFactorError::Budget(format!("row {i} is inconsistent")));
            }
        }
        let mut m = ViewFactorMatrix {
            n_facets,
            rays,
            rows,
            space: Vec::new(),
            budget,
            geometry_hash,
        };
        m.space = (0..n).map(|i| m.remainder(i)).collect();
        Ok(m)
    }

    /// `1 - sum F` over the row, evaluated on the integer tallies.
    fn remainder(&self, i: usize) -> f64 {
        let hit: u64 = self.rows[i].iter().map(|&(_, h)| h as u64).sum();
        self.rays[i].saturating_sub(hit) as f64 / self.rays[i] as f64
    }

    pub fn n_facets(&self) -> usize {
        self.n_facets
    }

    pub fn n_sides(&self) -> usize {
        2 * self.n_facets
    }

    pub fn budget(&self) -> RayBudget {
        self.budget
    }

    pub fn geometry_hash(&self) -> &str {
        &self.geometry_hash
    }

    pub fn rays(&self, row: usize) -> u64 {
        self.rays[row]
    }

    pub fn hits(&self, row: usize, col: usize) -> u32 {
        let r = &self.rows[row];
        match r.binary_search_by_key(&(col as u32), |&(c, _)| c) {
            Ok(k) => r[k].1,
            Err(_) => 0,
        }
    }

    pub fn raw_row(&self, row: usize) -> &[(u32, u32)] {
        &self.rows[row]
    }

    /// Non-zero entries of a row as `(column side, F)`, SPACE excluded.
    pub fn row(&self, row: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let n = self.rays[row] as f64;
        self.rows[row]
            .iter()
            .map(move |&(c, h)| (c as usize, h as f64 / n))
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.hits(row, col) as f64 / self.rays[row] as f64
    }

    /// Fraction of the row's rays that escaped to space.
    pub fn space(&self, row: usize) -> f64 {
        self.space[row]
    }

    /// Binomial standard error of an entry; `col = None` for SPACE.
    pub fn std_error(&self, row: usize, col: Option<usize>) -> f64 {
        let f = match col {
            Some(c) => self.get(row, c),
            None => self.space(row),
        };
        (f * (1.0 - f) / self.rays[row] as f64).sqrt()
    }

    /// Row sum including SPACE, summed in storage order.
    pub fn row_sum(&self, row: usize) -> f64 {
        let mut s = 0.0;
        for (_, f) in self.row(row) {
            s += f;
        }
        s + self.space(row)
    }

    /// Dense copy: `n_sides` rows of `n_sides + 1` columns, SPACE last.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        (0..self.n_sides())
            .map(|i| {
                let mut r = vec![0.0; self.n_sides() + 1];
                for (c, f) in self.row(i) {
                    r[c] = f;
                }
                r[self.n_sides()] = self.space(i);
                r
            })
            .collect()
    }

    /// Overwrites one tally. Intended for diagnostics and sensitivity tests.
    pub fn set_hits(&mut self, row: usize, col: usize, hits: u32) {
        let r = &mut self.rows[row];
        match r.binary_search_by_key(&(col as u32), |&(c, _)| c) {
            Ok(k) => r[k].1 = hits,
            Err(k) => r.insert(k, (col as u32, hits)),
        }
        r.retain(|&(_, h)| h > 0);
        self.space[row] = self.remainder(row);
    }

    pub fn check_scene(&self, scene: &MeshedScene) -> Result<(), ViewFactorError> {
        if self.n_facets != scene.len() {
            return Err(ViewFactorError::Mismatch {
                matrix: self.n_facets,
                scene: scene.len(),
            });
        }
        Ok(())
    }

    /// Area-weighted view factors between groups of facet sides.
    ///
    /// `group(side)` assigns each side to a group or drops it. The result
    /// has one column per group plus SPACE; rays from a group landing on a
    /// dropped side count towards none of the columns.
    pub fn aggregate(
        &self,
        scene: &MeshedScene,
        n_groups: usize,
        group: impl Fn(usize) -> Option<usize>,
    ) -> GroupViewFactors {
        let mut area = vec![0.0; n_groups];
        let mut af = vec![vec![0.0; n_groups + 1]; n_groups];
        let mut var = vec![vec![0.0; n_groups + 1]; n_groups];
        let mut per_row = vec![0.0; n_groups + 1];
        for i in 0..self.n_sides() {
            let Some(gi) = group(i) else { continue };
            let a = scene.facets()[i / 2].area;
            area[gi] += a;
            per_row.iter_mut().for_each(|x| *x = 0.0);
            for (c, f) in self.row(i) {
                if let Some(gj) = group(c) {
                    per_row[gj] += f;
                }
            }
            per_row[n_groups] = self.space(i);
            let n = self.rays[i] as f64;
            for (g, &f) in per_row.iter().enumerate() {
                af[gi][g] += a * f;
                var[gi][g] += a * a * f * (1.0 - f) / n;
            }
        }
        let f = af
            .iter()
            .zip(&area)
            .map(|(r, &a)| {
                r.iter()
                    .map(|x| if a > 0.0 { x / a } else { 0.0 })
                    .collect()
            })
            .collect();
        let se = var
            .iter()
            .zip(&area)
            .map(|(r, &a)| {
                r.iter()
                    .map(|v| if a > 0.0 { v.sqrt() / a } else { 0.0 })
                    .collect()
            })
            .collect();
        GroupViewFactors { area, f, se }
    }

    /// Groups by thermal node, front and back sides together.
    pub fn aggregate_by_node(&self, scene: &MeshedScene) -> GroupViewFactors {
        let facets = scene.facets();
        self.aggregate(scene, scene.node_names().len(), |s| {
            Some(facets[s / 2].node)
        })
    }
}

/// View factors between groups of facet sides, with SPACE as the last column.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupViewFactors {
    pub area: Vec<f64>,
    pub f: Vec<Vec<f64>>,
    pub se: Vec<Vec<f64>>,
}

struct Emitter {
    tris: Vec<[Vec3; 3]>,
    cdf: Vec<f64>,
}

impl Emitter {
    fn new(f: &Facet) -> Emitter {
        let tris: Vec<[Vec3; 3]> = f.triangles().collect();
        let mut acc = 0.0;
        let mut cdf: Vec<f64> = tris
            .iter()
            .map(|t| {
                acc += 0.5 * (t[1] - t[0]).cross(t[2] - t[0]).norm();
                acc
            })
            .collect();
        for c in &mut cdf {
            *c /= acc;
        }
        Emitter { tris, cdf }
    }

    fn sample(&self, rng: &mut impl Rng) -> Vec3 {
        let pick: f64 = rng.random();
        let k = self
            .cdf
            .iter()
            .position(|&c| pick < c)
            .unwrap_or(self.tris.len() - 1);
        let [a, b, c] = self.tris[k];
        let s = rng.random::<f64>().sqrt();
        let v: f64 = rng.random();
        a * (1.0 - s) + b * (s * (1.0 - v)) + c * (s * v)
    }
}

fn cosine_direction(normal: Vec3, rng: &mut impl Rng) -> Vec3 {
    let u1: f64 = rng.random();
    let u2: f64 = rng.random();
    let r = u1.sqrt();
    let phi = 2.0 * PI * u2;
    let (t, b) = normal.orthonormal_basis();
    t * (r * phi.cos()) + b * (r * phi.sin()) + normal * (1.0 - u1).sqrt()
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Independent stream key for one batch of one row.
fn stream_seed(seed: u64, row: u64, batch: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(seed) ^ row) ^ batch.rotate_left(32))
}

fn trace_row(scene: &MeshedScene, budget: &RayBudget, row: usize) -> (Vec<(u32, u32)>, u64) {
    let (facet, side) = side_of(row);
    let f = &scene.facets()[facet];
    let normal = match side {
        Side::Front => f.normal,
        Side::Back => -f.normal,
    };
    let emitter = Emitter::new(f);
    let bvh = scene.bvh();
    let facets = scene.facets();
    let mut counts: Vec<(u32, u32)> = Vec::new();
    let mut tally = |col: u32| match counts.binary_search_by_key(&col, |&(c, _)| c) {
        Ok(k) => counts[k].1 += 1,
        Err(k) => counts.insert(k, (col, 1)),
    };
    let mut escaped = 0u64;
    let mut done = 0u64;
    let mut batch = 0u64;
    while done < budget.rays_per_side {
        let n = budget.batch_size.min(budget.rays_per_side - done);
        let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(budget.seed, row as u64, batch));
        for _ in 0..n {
            let origin = emitter.sample(&mut rng);
            let dir = cosine_direction(normal, &mut rng);
            match bvh.intersect(origin, dir, 1e-12, f64::INFINITY, Some(facet)) {
                Some(hit) => {
                    let hit_side = if dir.dot(facets[hit.facet].normal) < 0.0 {
                        Side::Front
                    } else {
                        Side::Back
                    };
                    tally(side_index(hit.facet, hit_side) as u32);
                }
                None => escaped += 1,
            }
        }
        done += n;
        batch += 1;
    }
    (counts, escaped)
}

/// Traces `budget.rays_per_side` rays from both sides of every facet.
///
/// Rows are independent and use per-batch random streams keyed by
/// `(seed, row, batch)`, so the result does not depend on the number of
/// worker threads.
pub fn trace_view_factors(
    scene: &MeshedScene,
    budget: &RayBudget,
) -> Result<ViewFactorMatrix, ViewFactorError> {
    budget.validate()?;
    let n = 2 * scene.len();
    let rows: Vec<Vec<(u32, u32)>> = (0..n)
        .into_par_iter()
        .map(|row| trace_row(scene, budget, row).0)
        .collect();
    log::debug!(
        "traced {} rays over {} facet sides",
        budget.rays_per_side * n as u64,
        n
    );
    ViewFactorMatrix::from_counts(
        scene.len(),
        vec![budget.rays_per_side; n],
        rows,
        *budget,
        scene.geometry_hash(),
    )
}
