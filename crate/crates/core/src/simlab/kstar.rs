//! Monte Carlo oracle for the MSE-optimal number of tail order statistics.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TailError};
use crate::estimators::tail_path;
use crate::models::{ContaminationSpec, ModelSpec};
use crate::seed::{splitmix64, SeedSpec};

use super::{config_hash, draw_replication, BATCH};

/// Everything that determines a k* search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KStarKey {
    pub model: ModelSpec,
    pub contamination: Option<ContaminationSpec>,
    pub n: usize,
    pub k0: usize,
    pub replications: usize,
    pub master_seed: u64,
}

impl KStarKey {
    pub fn hash(&self) -> String {
        config_hash(self)
    }
}

/// Result of a k* search: the argmin and the whole MSE curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KStarSearch {
    pub key: KStarKey,
    pub k_star: usize,
    /// `mse[j]` is the Monte Carlo MSE at `k = k0 + 1 + j`.
    pub mse: Vec<f64>,
    /// Stream of every replication, in order; each stream produced the
    /// estimates for all candidate `k`.
    #[serde(skip)]
    pub seeds: Vec<SeedSpec>,
}

impl KStarSearch {
    pub fn mse_at(&self, k: usize) -> Option<f64> {
        k.checked_sub(self.key.k0 + 1)
            .and_then(|j| self.mse.get(j).copied())
    }
}

/// Master seed of the k* streams, kept apart from the experiment streams.
pub fn kstar_master(master_seed: u64) -> u64 {
    splitmix64(master_seed ^ 0x6b73_7461_72)
}

/// Full search over `k = k0+1 ..= n-1`; ties go to the smaller `k`.
pub fn kstar_search(key: &KStarKey) -> Result<KStarSearch> {
    let KStarKey {
        n, k0, replications, ..
    } = *key;
    if n < 3 || k0 + 1 >= n {
        return Err(TailError::index(format!(
            "k* search needs k0 + 1 <= n - 1, got k0 = {k0}, n = {n}"
        )));
    }
    if replications == 0 {
        return Err(TailError::domain("k* search needs at least one replication"));
    }
    let xi = key.model.xi();
    let width = n - 1 - k0;
    let seeds: Vec<SeedSpec> = (0..replications as u64)
        .map(|i| SeedSpec::new(key.master_seed, i))
        .collect();
    let batches: Vec<Result<Vec<f64>>> = seeds
        .par_chunks(BATCH)
        .map(|chunk| {
            let mut acc = vec![0.0; width];
            for &seed in chunk {
                let s = draw_replication(&key.model, key.contamination.as_ref(), n, seed)?;
                let path = tail_path(&s, k0)?;
                for (a, &e) in acc.iter_mut().zip(path.as_slice()) {
                    *a += (e - xi) * (e - xi);
                }
            }
            Ok(acc)
        })
        .collect();
    let mut total = vec![0.0; width];
    for batch in batches {
        for (t, b) in total.iter_mut().zip(batch?) {
            *t += b;
        }
    }
    let mse: Vec<f64> = total.iter().map(|t| t / replications as f64).collect();
    let mut best = 0;
    for (j, &m) in mse.iter().enumerate() {
        if m < mse[best] {
            best = j;
        }
    }
    Ok(KStarSearch {
        key: key.clone(),
        k_star: k0 + 1 + best,
        mse,
        seeds,
    })
}

/// Convenience wrapper returning only the argmin.
pub fn oracle_k_star(
    model: &ModelSpec,
    contamination: Option<&ContaminationSpec>,
    n: usize,
    k0: usize,
    replications: usize,
    master_seed: u64,
) -> Result<usize> {
    kstar_search(&KStarKey {
        model: *model,
        contamination: contamination.copied(),
        n,
        k0,
        replications,
        master_seed,
    })
    .map(|s| s.k_star)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct CachedKStar {
    key: KStarKey,
    k_star: usize,
    mse: Vec<f64>,
}

/// Memoizes k* searches in memory and, optionally, as
/// `kstar-<hash>.json` files in a directory.
#[derive(Debug, Default)]
pub struct KStarCache {
    dir: Option<PathBuf>,
    memory: Mutex<HashMap<String, usize>>,
}

impl KStarCache {
    pub fn in_memory() -> Self {
        Self::default()
    }

    pub fn with_dir(dir: impl Into<PathBuf>) -> Self {
        Self {
            dir: Some(dir.into()),
            memory: Mutex::default(),
        }
    }

    pub fn file_for(dir: &Path, key: &KStarKey) -> PathBuf {
        dir.join(format!("kstar-{}.json", key.hash()))
    }

    pub fn get(&self, key: &KStarKey) -> Result<usize> {
        let hash = key.hash();
        if let Some(&k) = self.memory.lock().unwrap().get(&hash) {
            return Ok(k);
        }
        if let Some(dir) = &self.dir {
            let file = Self::file_for(dir, key);
            if let Ok(text) = std::fs::read_to_string(&file) {
                if let Ok(cached) = serde_json::from_str::<CachedKStar>(&text) {
                    if cached.key == *key {
                        self.memory.lock().unwrap().insert(hash, cached.k_star);
                        return Ok(cached.k_star);
                    }
                }
            }
        }
        let search = kstar_search(key)?;
        if let Some(dir) = &self.dir {
            std::fs::create_dir_all(dir)?;
            let cached = CachedKStar {
                key: key.clone(),
                k_star: search.k_star,
                mse: search.mse,
            };
            let text = serde_json::to_string_pretty(&cached)
                .map_err(|e| TailError::Io(e.to_string()))?;
            std::fs::write(Self::file_for(dir, key), text)?;
        }
        self.memory.lock().unwrap().insert(hash, search.k_star);
        Ok(search.k_star)
    }
}
