//! Binary on-disk cache of traced hit counts.
//!
//! Layout (little endian): magic, key, facet count, then per row the ray
//! count, the number of non-zero entries and `(column, hits)` pairs.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{RayBudget, ViewFactorError, ViewFactorMatrix};

const MAGIC: &[u8; 8] = b"CSVFHIT1";

/// What a cached trace must match to be reused.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CacheKey {
    pub geometry_hash: String,
    pub budget: RayBudget,
}

impl CacheKey {
    pub fn of(m: &ViewFactorMatrix) -> CacheKey {
        CacheKey {
            geometry_hash: m.geometry_hash().to_string(),
            budget: m.budget(),
        }
    }
}

pub fn cache_file_name(key: &CacheKey) -> String {
    let h = &key.geometry_hash[..key.geometry_hash.len().min(16)];
    format!(
        "vf-{h}-{:x}-{}-{}.bin",
        key.budget.seed, key.budget.rays_per_side, key.budget.batch_size
    )
}

fn io(e: std::io::Error) -> ViewFactorError {
    ViewFactorError::Cache(e.to_string())
}

pub fn save_cache(m: &ViewFactorMatrix, path: &Path) -> Result<(), ViewFactorError> {
    let tmp = path.with_extension("tmp");
    {
        let mut w = BufWriter::new(File::create(&tmp).map_err(io)?);
        w.write_all(MAGIC).map_err(io)?;
        let hash = m.geometry_hash().as_bytes();
        w.write_all(&(hash.len() as u32).to_le_bytes())
            .map_err(io)?;
        w.write_all(hash).map_err(io)?;
        let b = m.budget();
        for v in [b.seed, b.rays_per_side, b.batch_size, m.n_facets() as u64] {
            w.write_all(&v.to_le_bytes()).map_err(io)?;
        }
        for i in 0..m.n_sides() {
            w.write_all(&m.rays(i).to_le_bytes()).map_err(io)?;
            let row = m.raw_row(i);
            w.write_all(&(row.len() as u32).to_le_bytes()).map_err(io)?;
            for &(c, h) in row {
                w.write_all(&c.to_le_bytes()).map_err(io)?;
                w.write_all(&h.to_le_bytes()).map_err(io)?;
            }
        }
        w.flush().map_err(io)?;
    }
    std::fs::rename(&tmp, path).map_err(io)
}

struct Reader<R: Read>(R);

impl<R: Read> Reader<R> {
    fn u32(&mut self) -> Result<u32, ViewFactorError> {
        let mut b = [0u8; 4];
        self.0.read_exact(&mut b).map_err(io)?;
        Ok(u32::from_le_bytes(b))
    }

    fn u64(&mut self) -> Result<u64, ViewFactorError> {
        let mut b = [0u8; 8];
        self.0.read_exact(&mut b).map_err(io)?;
        Ok(u64::from_le_bytes(b))
    }
}

/// Loads a cached trace. Returns `Ok(None)` when the file is missing or was
/// produced for a different key.
pub fn load_cache(
    path: &Path,
    key: &CacheKey,
) -> Result<Option<ViewFactorMatrix>, ViewFactorError> {
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
        Err(e) => return Err(io(e)),
    };
    let mut r = Reader(BufReader::new(file));
    let mut magic = [0u8; 8];
    r.0.read_exact(&mut magic).map_err(io)?;
    if &magic != MAGIC {
        return Err(ViewFactorError::Cache(format!(
            "{}: not a view-factor cache",
            path.display()
        )));
    }
    let len = r.u32()? as usize;
    if len > 1024 {
        return Err(ViewFactorError::Cache("corrupt header".into()));
    }
    let mut hash = vec![0u8; len];
    r.0.read_exact(&mut hash).map_err(io)?;
    let hash = String::from_utf8(hash).map_err(|e| ViewFactorError::Cache(e.to_string()))?;
    let budget = RayBudget {
        seed: r.u64()?,
        rays_per_side: r.u64()?,
        batch_size: r.u64()?,
    };
    if hash != key.geometry_hash || budget != key.budget {
        return Ok(None);
    }
    let n_facets = r.u64()? as usize;
    let mut rays = Vec::with_capacity(2 * n_facets);
    let mut rows = Vec::with_capacity(2 * n_facets);
    for _ in 0..2 * n_facets {
        rays.push(r.u64()?);
        let nnz = r.u32()? as usize;
        let mut row = Vec::with_capacity(nnz.min(1 << 20));
        for _ in 0..nnz {
            row.push((r.u32()?, r.u32()?));
        }
        rows.push(row);
    }
    ViewFactorMatrix::from_counts(n_facets, rays, rows, budget, hash).map(Some)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_key_mismatch() {
        let budget = RayBudget {
            rays_per_side: 10,
            seed: 3,
            batch_size: 5,
        };
        let rows = vec![vec![(1, 4), (3, 2)], vec![(0, 10)], vec![], vec![(2, 1)]];
        let m = ViewFactorMatrix::from_counts(2, vec![10; 4], rows, budget, "abc".into()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let key = CacheKey::of(&m);
        let path = dir.path().join(cache_file_name(&key));
        save_cache(&m, &path).unwrap();
        assert_eq!(load_cache(&path, &key).unwrap(), Some(m));
        let other = CacheKey {
            budget: RayBudget { seed: 4, ..budget },
            ..key.clone()
        };
        assert_eq!(load_cache(&path, &other).unwrap(), None);
        assert_eq!(load_cache(&dir.path().join("missing"), &key).unwrap(), None);
    }
}
