//! Deterministic parallel simulation and correlation.
//!
//! Frames are generated by index, so any worker may produce any frame.
//! Correlation splits the stream into fixed-size chunks whose accumulators
//! are merged in chunk order; the result therefore does not depend on the
//! worker count.

use rayon::prelude::*;

use cpi_core::scene::ObjectScene;
use cpi_core::{
    detect_binary, detect_ideal, generate_speckle, CorrelationAccumulator, DetectorParams, Frame,
    OpticalConfig, PayloadKind, PropagationPlan, Result, SpeckleGrid,
};

use crate::config::LoadedConfig;

/// Frames per correlation chunk. A multiple of the 64-frame binary block.
pub const CHUNK: usize = 256;

pub fn thread_pool(workers: usize) -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .expect("thread pool")
}

/// Everything needed to produce frame pair `k` on its own.
#[derive(Debug, Clone)]
pub struct Simulator {
    plan: PropagationPlan,
    grid: SpeckleGrid,
    sigma_c: f64,
    mean_intensity: f64,
    seed: u64,
    detector: Option<DetectorParams>,
}

impl Simulator {
    pub fn new(
        cfg: &OpticalConfig,
        scene: &ObjectScene,
        grid: SpeckleGrid,
        sigma_c: f64,
        mean_intensity: f64,
        seed: u64,
        detector: Option<DetectorParams>,
    ) -> Result<Self> {
        Ok(Self {
            plan: PropagationPlan::new(cfg, scene, grid)?,
            grid,
            sigma_c,
            mean_intensity,
            seed,
            detector,
        })
    }

    pub fn from_config(c: &LoadedConfig) -> Result<Self> {
        Self::new(
            &c.optics,
            &c.scene,
            c.speckle_grid,
            c.sigma_c(),
            c.mean_intensity(),
            c.seed(),
            c.detector,
        )
    }

    pub fn plan(&self) -> &PropagationPlan {
        &self.plan
    }

    pub fn kind(&self) -> PayloadKind {
        if self.detector.is_some() {
            PayloadKind::Binary
        } else {
            PayloadKind::Analog
        }
    }

    pub fn pair(&self, k: u64) -> Result<(Frame, Frame)> {
        let speckle = generate_speckle(self.seed, k, self.grid, self.sigma_c, self.mean_intensity)?;
        let (a, b) = self.plan.propagate(&speckle)?;
        match &self.detector {
            Some(p) => Ok((detect_binary(&a, p, k)?, detect_binary(&b, p, k)?)),
            None => Ok((detect_ideal(&a), detect_ideal(&b))),
        }
    }

    /// Pairs for `indices`, in order.
    pub fn pairs(&self, indices: &[u64], pool: &rayon::ThreadPool) -> Result<Vec<(Frame, Frame)>> {
        pool.install(|| indices.par_iter().map(|&k| self.pair(k)).collect())
    }
}

/// Accumulates `pairs` in fixed chunks, `workers` chunks at a time, and
/// merges the chunk accumulators in order.
pub fn correlate(
    pairs: &[(Frame, Frame)],
    dims_a: (usize, usize),
    dims_b: (usize, usize),
    kind: PayloadKind,
    binning: usize,
    pool: &rayon::ThreadPool,
) -> Result<CorrelationAccumulator> {
    let mut total = CorrelationAccumulator::new(dims_a, dims_b, kind, binning)?;
    let wave = pool.current_num_threads() * CHUNK;
    for group in pairs.chunks(wave) {
        let parts: Vec<CorrelationAccumulator> = pool.install(|| {
            group
                .par_chunks(CHUNK)
                .map(|chunk| {
                    let mut acc = CorrelationAccumulator::new(dims_a, dims_b, kind, binning)?;
                    for (a, b) in chunk {
                        acc.accumulate(a, b)?;
                    }
                    Ok(acc)
                })
                .collect::<Result<_>>()
        })?;
        for p in parts {
            total = total.merge(p)?;
        }
    }
    Ok(total)
}
