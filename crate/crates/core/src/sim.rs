//! Synthetic Spark-SQL-like workloads.
//!
//! A workload is a seeded quadratic bowl over ten latent coordinates derived
//! from a configuration of the default space. Most coordinates are plain
//! unit positions; the two memory pairs are re-expressed as a log footprint
//! and a log overhead ratio, so that the paired memory rules (which scale
//! memory and overhead by the same factor) move along a single axis. The
//! runtime metrics are placed so that every rule threshold sits half a rule
//! step away from the optimum.

use std::f64::consts::{LN_2, PI};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gp::ContextVector;
use crate::metrics::RuntimeMetrics;
use crate::space::{Configuration, SearchSpace, SpaceError};

pub const LATENT_DIM: usize = 10;
pub const DEFAULT_NOISE: f64 = 0.02;
/// Coordinates whose optimum ranges widely across workloads; the others sit
/// in narrow bands shared by all workloads.
pub const VARYING: [usize; 3] = [0, 2, 4];
const DOMINANT: usize = 2;
const DOMINANCE: f64 = 20.0;

const MPB: &str = "spark.sql.files.maxPartitionBytes";
const PARTITIONS: &str = "spark.sql.adaptive.maxNumPostShufflePartitions";
const MAX_EXECUTORS: &str = "spark.dynamicAllocation.maxExecutors";
const DRIVER_CORES: &str = "spark.driver.cores";
const DRIVER_MEMORY: &str = "spark.driver.memory";
const DRIVER_OVERHEAD: &str = "spark.driver.memoryOverhead";
const EXECUTOR_CORES: &str = "spark.executor.cores";
const EXECUTOR_MEMORY: &str = "spark.executor.memory";
const EXECUTOR_OVERHEAD: &str = "spark.executor.memoryOverhead";
const VCORE: &str = "spark.vcore.boost.ratio";

// Latent ranges of the memory coordinates, from the bounds of the default
// space: footprint in GB, ratio = overhead GB / memory GB.
const DRIVER_FOOTPRINT: (f64, f64) = (1.5, 58.0);
const DRIVER_RATIO: (f64, f64) = (0.5 / 48.0, 10.0);
const EXECUTOR_FOOTPRINT: (f64, f64) = (1.5 / 4.0, 76.0);
const EXECUTOR_RATIO: (f64, f64) = (0.5 / 64.0, 12.0);

// Metric centres: the geometric mean of each rule pair's thresholds.
const INPUT_CENTER: f64 = 0.282_842_712_474_619; // sqrt(0.2 * 0.4)
const TASKS_CENTER: f64 = 0.235_749_867_400_689; // sqrt(0.1667 * 0.3334)
const SHUFFLE_CENTER: f64 = 0.447_251_607_040_185; // sqrt(0.1667 * 1.2)
const MEM_AT_OPTIMUM: f64 = 0.8;
const AVG_MEM_SHARE: f64 = 0.83;
const DRIVER_AT_OPTIMUM: f64 = 0.667;
const AVG_DRIVER_SHARE: f64 = 0.9;
const VCORE_TASKS_RATE: f64 = 0.8;

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error("data size must be positive and finite, got {0}")]
    DataSize(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    MapHeavy,
    ReduceHeavy,
    Mixed,
}

impl Family {
    pub const ALL: [Family; 3] = [Family::MapHeavy, Family::ReduceHeavy, Family::Mixed];

    /// (input, shuffle, output) volume per GB of data.
    fn volumes(self) -> (f64, f64, f64) {
        match self {
            Family::MapHeavy => (1.0, 0.1, 0.3),
            Family::ReduceHeavy => (0.6, 0.8, 0.05),
            Family::Mixed => (0.8, 0.4, 0.1),
        }
    }

    fn stages(self) -> f64 {
        match self {
            Family::MapHeavy => 2.0,
            Family::ReduceHeavy => 4.0,
            Family::Mixed => 6.0,
        }
    }

    /// Curvature multipliers of the partition-size and shuffle-partition
    /// coordinates.
    pub fn stage_weights(self) -> (f64, f64) {
        match self {
            Family::MapHeavy => (4.0, 1.0),
            Family::ReduceHeavy => (1.0, 4.0),
            Family::Mixed => (2.0, 2.0),
        }
    }
}

/// Low-rank cross term `weight · (direction · Δ)²`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Interaction {
    pub weight: f64,
    pub direction: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticWorkload {
    pub seed: u64,
    pub family: Family,
    /// Latent optimum at the base data size. Coordinate 2 (executor count)
    /// is derived from `memory_demand_gb` and `executor_jitter` instead.
    pub optimum: Vec<f64>,
    pub curvature: Vec<f64>,
    pub interaction: Vec<Interaction>,
    pub noise_std: f64,
    /// Shift of each optimum coordinate per unit of ln(data / base data).
    pub context_sensitivity: Vec<f64>,
    pub base_data_gb: f64,
    /// Objective at the optimum for the base data size, in GB·h.
    pub base_cost: f64,
    /// Memory the job needs at the base data size; reported as
    /// `total_memory`.
    pub memory_demand_gb: f64,
    pub executor_jitter: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutionResult {
    pub objective: f64,
    pub runtime_s: f64,
    pub avg_memory_gb: f64,
    pub metrics: RuntimeMetrics,
    pub context: ContextVector,
}

fn log_uniform<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    (rng.gen_range(lo.ln()..hi.ln())).exp()
}

fn log_position(v: f64, (lo, hi): (f64, f64)) -> f64 {
    (v / lo).ln() / (hi / lo).ln()
}

fn from_log_position(z: f64, (lo, hi): (f64, f64)) -> f64 {
    lo * (hi / lo).powf(z)
}

/// Executor cap the shipped rules recommend for a given memory demand.
pub fn executor_band(total_memory_gb: f64) -> f64 {
    match total_memory_gb {
        t if t <= 3.0 => 5.0,
        t if t <= 5.0 => 6.0,
        t if t <= 8.0 => 8.0,
        t if t <= 15.0 => 10.0,
        t if t <= 20.0 => 15.0,
        t if t <= 40.0 => 20.0,
        t => t / 2.0,
    }
}

/// Latent coordinates of a configuration of the default space.
pub fn latent(space: &SearchSpace, config: &Configuration) -> Result<[f64; LATENT_DIM], SpaceError> {
    let pos = space.unit_positions(config)?;
    let at = |name: &str| pos[space.index_of(name).expect("default space")];
    let num = |name: &str| config.get_f64(name).expect("validated");

    let d_mem = num(DRIVER_MEMORY);
    let d_ovh = num(DRIVER_OVERHEAD) / 1024.0;
    let e_mem = num(EXECUTOR_MEMORY);
    let e_ovh = num(EXECUTOR_OVERHEAD) / 1024.0;
    let cores = num(EXECUTOR_CORES);
    Ok([
        at(MPB),
        at(PARTITIONS),
        at(MAX_EXECUTORS),
        at(DRIVER_CORES),
        log_position(d_mem + d_ovh, DRIVER_FOOTPRINT),
        log_position(d_ovh / d_mem, DRIVER_RATIO),
        at(EXECUTOR_CORES),
        log_position((e_mem + e_ovh) / cores, EXECUTOR_FOOTPRINT),
        log_position(e_ovh / e_mem, EXECUTOR_RATIO),
        at(VCORE),
    ])
}

/// Inverse of [`latent`], clamped into the space bounds.
pub fn from_latent(space: &SearchSpace, z: &[f64]) -> Configuration {
    let p = |name: &str| space.param(name).expect("default space");
    let mut positions = vec![0.0; space.len()];
    let mut put = |name: &str, u: f64| positions[space.index_of(name).expect("default space")] = u;
    put(MPB, z[0]);
    put(PARTITIONS, z[1]);
    put(MAX_EXECUTORS, z[2]);
    put(DRIVER_CORES, z[3]);
    put(EXECUTOR_CORES, z[6]);
    put(VCORE, z[9]);
    put(DRIVER_MEMORY, 0.0);
    put(DRIVER_OVERHEAD, 0.0);
    put(EXECUTOR_MEMORY, 0.0);
    put(EXECUTOR_OVERHEAD, 0.0);
    let mut config = space.from_unit_positions(&positions);

    let clamp = |name: &str, v: f64| {
        let d = p(name);
        v.clamp(d.denormalize(0.0), d.denormalize(1.0))
    };
    let split = |footprint: f64, ratio: f64| (footprint / (1.0 + ratio), footprint * ratio / (1.0 + ratio));

    let (mem, ovh) = split(from_log_position(z[4], DRIVER_FOOTPRINT), from_log_position(z[5], DRIVER_RATIO));
    config.set(DRIVER_MEMORY, clamp(DRIVER_MEMORY, mem));
    config.set(DRIVER_OVERHEAD, clamp(DRIVER_OVERHEAD, ovh * 1024.0));

    let cores = config.get_f64(EXECUTOR_CORES).expect("numeric choice");
    let footprint = from_log_position(z[7], EXECUTOR_FOOTPRINT) * cores;
    let (mem, ovh) = split(footprint, from_log_position(z[8], EXECUTOR_RATIO));
    config.set(EXECUTOR_MEMORY, clamp(EXECUTOR_MEMORY, mem));
    config.set(EXECUTOR_OVERHEAD, clamp(EXECUTOR_OVERHEAD, ovh * 1024.0));
    config
}

fn random_direction<R: Rng + ?Sized>(rng: &mut R) -> Vec<f64> {
    let v: Vec<f64> = (0..LATENT_DIM).map(|_| StandardNormal.sample(rng)).collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / norm).collect()
}

/// Coordinates whose optimum is continuous; siblings perturb only these.
const CONTINUOUS: [usize; 6] = [0, 1, 4, 5, 7, 8];

/// Optimum ranges of the continuous coordinates.
fn optimum_range(dim: usize) -> (f64, f64) {
    match dim {
        // maxPartitionBytes inside the rule bounds [16M, 4G]
        0 => (0.1, 0.8),
        // shuffle partitions inside the rule bounds [80, 400]
        1 => (0.2, 0.43),
        // driver footprint 4..24 GB, executor 4..12 GB per core; overhead
        // ratios 0.15..0.4 keep the optimum reachable inside the bounds
        4 => (log_position(4.0, DRIVER_FOOTPRINT), log_position(24.0, DRIVER_FOOTPRINT)),
        5 => (log_position(0.15, DRIVER_RATIO), log_position(0.4, DRIVER_RATIO)),
        7 => (log_position(4.0, EXECUTOR_FOOTPRINT), log_position(12.0, EXECUTOR_FOOTPRINT)),
        8 => (log_position(0.15, EXECUTOR_RATIO), log_position(0.4, EXECUTOR_RATIO)),
        _ => (0.0, 1.0),
    }
}

pub fn make_workload(seed: u64, family: Family) -> SyntheticWorkload {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5157_0a4b_1d3e_77c1);
    let mut optimum = vec![0.0; LATENT_DIM];
    for &d in &CONTINUOUS {
        let (lo, hi) = optimum_range(d);
        optimum[d] = rng.gen_range(lo..hi);
    }
    // driver cores: one core; executor cores: one or two; vcore ratio: 2 or 3
    optimum[3] = 0.0;
    optimum[6] = if rng.gen_bool(0.5) { 0.0 } else { 0.5 };
    optimum[9] = if rng.gen_bool(0.5) { 0.5 } else { 1.0 };

    let mut curvature: Vec<f64> = (0..LATENT_DIM).map(|_| log_uniform(&mut rng, 0.3, 3.0)).collect();
    // a few workload-specific coordinates dominate the surface, so unrelated
    // workloads rank configurations differently
    let mut dims = VARYING;
    for k in 0..DOMINANT {
        let j = rng.gen_range(k..dims.len());
        dims.swap(k, j);
        curvature[dims[k]] *= DOMINANCE;
    }
    let (w0, w1) = family.stage_weights();
    curvature[0] *= w0;
    curvature[1] *= w1;

    let mean_c = curvature.iter().sum::<f64>() / LATENT_DIM as f64;
    let interaction = (0..2)
        .map(|_| Interaction { weight: 0.25 * mean_c * rng.gen_range(0.5..1.0), direction: random_direction(&mut rng) })
        .collect();

    let mut context_sensitivity = vec![0.0; LATENT_DIM];
    context_sensitivity[0] = rng.gen_range(0.0..0.05);
    context_sensitivity[1] = rng.gen_range(0.02..0.08);

    let base_data_gb = log_uniform(&mut rng, 10.0, 1000.0);
    let base_cost = base_data_gb * rng.gen_range(0.01..0.05);
    // one of the executor-cap bands, then log-uniform inside it
    const BANDS: [f64; 8] = [1.5, 3.0, 5.0, 8.0, 15.0, 20.0, 40.0, 80.0];
    let band = rng.gen_range(0..BANDS.len() - 1);
    let memory_demand_gb = log_uniform(&mut rng, BANDS[band], BANDS[band + 1]);
    let executor_jitter = rng.gen_range(0.9..1.1);

    let mut w = SyntheticWorkload {
        seed,
        family,
        optimum,
        curvature,
        interaction,
        noise_std: DEFAULT_NOISE,
        context_sensitivity,
        base_data_gb,
        base_cost,
        memory_demand_gb,
        executor_jitter,
    };
    w.optimum[2] = w.executor_optimum(1.0);
    w
}

/// Workloads sharing the surface of `workload` with optimum perturbations of
/// L2 norm at most `radius` over the continuous coordinates.
pub fn siblings(workload: &SyntheticWorkload, n: usize, radius: f64, seed: u64) -> Vec<SyntheticWorkload> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let mut s = workload.clone();
            s.seed = seed.wrapping_mul(1_000_003).wrapping_add(i as u64);
            let dir: Vec<f64> = (0..CONTINUOUS.len()).map(|_| StandardNormal.sample(&mut rng)).collect();
            let norm = dir.iter().map(|x| x * x).sum::<f64>().sqrt();
            let r = radius * rng.gen::<f64>();
            for (k, &d) in CONTINUOUS.iter().enumerate() {
                s.optimum[d] = (s.optimum[d] + r * dir[k] / norm).clamp(0.0, 1.0);
            }
            s.base_data_gb *= rng.gen_range(0.9..1.1);
            s.base_cost = workload.base_cost * s.base_data_gb / workload.base_data_gb;
            s
        })
        .collect()
}

/// Distance between latent optima over the [`VARYING`] coordinates.
pub fn latent_distance(a: &SyntheticWorkload, b: &SyntheticWorkload) -> f64 {
    VARYING.iter().map(|&d| (a.optimum[d] - b.optimum[d]).powi(2)).sum::<f64>().sqrt()
}

/// A fresh workload whose latent optimum is at least `min_distance` from
/// the given one.
pub fn dissimilar(workload: &SyntheticWorkload, min_distance: f64, seed: u64) -> SyntheticWorkload {
    let mut s = seed;
    loop {
        let family = Family::ALL[(s % 3) as usize];
        let w = make_workload(s, family);
        if latent_distance(&w, workload) >= min_distance {
            return w;
        }
        s = s.wrapping_mul(6_364_136_223_846_793_005).wrapping_add(1_442_695_040_888_963_407);
    }
}

impl SyntheticWorkload {
    fn scale(&self, context: &ContextVector) -> f64 {
        context.data_size / self.base_data_gb
    }

    fn executor_optimum(&self, scale: f64) -> f64 {
        let cap = executor_band(self.memory_demand_gb * scale) * self.executor_jitter;
        log_position(cap.clamp(5.0, 10_000.0), (5.0, 10_000.0))
    }

    /// Latent optimum at the given context.
    pub fn optimum_at(&self, context: &ContextVector) -> Vec<f64> {
        let scale = self.scale(context);
        let shift = scale.ln();
        let mut z = self.optimum.clone();
        for d in 0..LATENT_DIM {
            z[d] += self.context_sensitivity[d] * shift;
        }
        z[0] = z[0].clamp(0.05, 0.85);
        z[1] = z[1].clamp(0.15, 0.45);
        z[2] = self.executor_optimum(scale);
        z
    }

    pub fn total_memory(&self, context: &ContextVector) -> f64 {
        self.memory_demand_gb * self.scale(context)
    }

    fn excess(&self, delta: &[f64]) -> f64 {
        let quad: f64 = delta.iter().zip(&self.curvature).map(|(d, c)| c * d * d).sum();
        let cross: f64 = self
            .interaction
            .iter()
            .map(|t| t.weight * t.direction.iter().zip(delta).map(|(u, d)| u * d).sum::<f64>().powi(2))
            .sum();
        quad + cross
    }

    fn delta(&self, space: &SearchSpace, config: &Configuration, context: &ContextVector) -> Result<Vec<f64>, SimError> {
        if !(context.data_size.is_finite() && context.data_size > 0.0) {
            return Err(SimError::DataSize(context.data_size));
        }
        let z = latent(space, config)?;
        Ok(z.iter().zip(self.optimum_at(context)).map(|(a, b)| a - b).collect())
    }

    /// Noiseless objective.
    pub fn expected_objective(&self, space: &SearchSpace, config: &Configuration, context: &ContextVector) -> Result<f64, SimError> {
        let delta = self.delta(space, config, context)?;
        Ok(self.base_cost * self.scale(context) * (1.0 + self.excess(&delta)))
    }

    /// Runtime metrics of a configuration. They are deterministic; only the
    /// objective carries noise.
    pub fn metrics(&self, space: &SearchSpace, config: &Configuration, context: &ContextVector) -> Result<RuntimeMetrics, SimError> {
        let delta = self.delta(space, config, context)?;
        let num = |name: &str| config.get_f64(name).expect("validated");
        let z_opt = self.optimum_at(context);

        let range = |name: &str| {
            let p = space.param(name).expect("default space");
            p.denormalize(1.0) / p.denormalize(0.0)
        };
        // rates putting the rule thresholds half a x2 step from the optimum
        let input_rate = 2.0 * (0.4 / INPUT_CENTER).ln() * range(MPB).ln() / LN_2;
        let shuffle_rate = 2.0 * (1.2 / SHUFFLE_CENTER).ln() * range(PARTITIONS).ln() / LN_2;
        let tasks_rate = 2.0 * (0.3334 / TASKS_CENTER).ln();

        let input = INPUT_CENTER * (input_rate * delta[0]).exp();
        let shuffle = SHUFFLE_CENTER * (-shuffle_rate * delta[1]).exp();
        let tasks = TASKS_CENTER * (-tasks_rate * delta[6] + VCORE_TASKS_RATE * tasks_rate * delta[9]).exp();

        let cores = num(EXECUTOR_CORES);
        let per_core = (num(EXECUTOR_MEMORY) + num(EXECUTOR_OVERHEAD) / 1024.0) / cores;
        let need = from_log_position(z_opt[7], EXECUTOR_FOOTPRINT);
        let max_mem = (MEM_AT_OPTIMUM * need / per_core).min(2.0);
        let driver = num(DRIVER_MEMORY) + num(DRIVER_OVERHEAD) / 1024.0;
        let driver_need = from_log_position(z_opt[4], DRIVER_FOOTPRINT);
        let max_driver = (DRIVER_AT_OPTIMUM * driver_need / driver).min(2.0);

        let data = context.data_size;
        let (input_share, shuffle_share, output_share) = self.family.volumes();
        let total_memory = self.total_memory(context);
        let executor_footprint = per_core * cores;
        let executors = (total_memory / executor_footprint).ceil().clamp(1.0, num(MAX_EXECUTORS));
        let input_gb = data * input_share;
        let shuffle_gb = data * shuffle_share;
        let output_gb = data * output_share;

        let mut m = RuntimeMetrics::default();
        let values = [
            ("stage_max_avg_input_run_time", input),
            ("stage_max_avg_tasks_run_time", tasks),
            ("stage_max_avg_shuffle_read_run_time", shuffle),
            ("max_mem_usage", max_mem),
            ("avg_mem_usage", AVG_MEM_SHARE * max_mem),
            ("max_driver_mem_usage", max_driver),
            ("avg_driver_mem_usage", AVG_DRIVER_SHARE * max_driver),
            ("total_memory", total_memory),
            ("input_size_gb", input_gb),
            ("output_size_gb", output_gb),
            ("shuffle_volume_gb", shuffle_gb),
            ("spill_volume_gb", shuffle_gb * (max_mem - 0.9).max(0.0)),
            ("io_volume_gb", input_gb + shuffle_gb + output_gb),
            ("task_count", (input_gb * 1024.0 * 1024.0 * 1024.0 / num(MPB)).ceil() + num(PARTITIONS).round()),
            ("stage_count", self.family.stages()),
            ("executor_count", executors),
            ("gc_fraction", 0.02 + 0.3 * (max_mem - 0.6).max(0.0)),
        ];
        for (name, v) in values {
            m.set(name, v).expect("known metric");
        }
        Ok(m)
    }

    pub fn execute<R: Rng + ?Sized>(
        &self,
        space: &SearchSpace,
        config: &Configuration,
        context: &ContextVector,
        rng: &mut R,
    ) -> Result<ExecutionResult, SimError> {
        let expected = self.expected_objective(space, config, context)?;
        let eps = if self.noise_std > 0.0 {
            Normal::new(0.0, self.noise_std).expect("finite std").sample(rng).max(-0.5)
        } else {
            0.0
        };
        let objective = expected * (1.0 + eps);
        let metrics = self.metrics(space, config, context)?;

        let driver = config.get_f64(DRIVER_MEMORY).expect("validated") + config.get_f64(DRIVER_OVERHEAD).expect("validated") / 1024.0;
        let executor = config.get_f64(EXECUTOR_MEMORY).expect("validated")
            + config.get_f64(EXECUTOR_OVERHEAD).expect("validated") / 1024.0;
        let avg_memory_gb = driver + executor * metrics.get("executor_count").expect("known metric");
        Ok(ExecutionResult {
            objective,
            runtime_s: objective * 3600.0 / avg_memory_gb,
            avg_memory_gb,
            metrics,
            context: context.clone(),
        })
    }

    /// Context on a given day of a drifting schedule: 2% daily growth plus a
    /// weekly cycle of amplitude 0.1.
    pub fn drift(&self, day: u32) -> ContextVector {
        let d = day as f64;
        ContextVector::new(self.base_data_gb * (1.0 + 0.02 * d + 0.1 * (2.0 * PI * d / 7.0).sin()))
    }

    pub fn base_context(&self) -> ContextVector {
        ContextVector::new(self.base_data_gb)
    }

    /// Dense random probing followed by coordinate descent over the latent
    /// coordinates on the noiseless surface. Test oracle.
    pub fn true_optimum(&self, space: &SearchSpace, context: &ContextVector) -> Result<(Configuration, f64), SimError> {
        const PROBES: usize = 100_000;
        const STEPS: usize = 200;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ 0x0b5e_55ed);
        let f = |c: &Configuration| self.expected_objective(space, c, context);

        let mut best = space.sample_uniform(&mut rng);
        let mut best_y = f(&best)?;
        for _ in 1..PROBES {
            let c = space.sample_uniform(&mut rng);
            let y = f(&c)?;
            if y < best_y {
                best = c;
                best_y = y;
            }
        }

        let mut z = latent(space, &best)?.to_vec();
        for step in 0..STEPS {
            let d = step % LATENT_DIM;
            let candidates: Vec<f64> = if matches!(d, 3 | 6 | 9) {
                vec![0.0, 0.5, 1.0]
            } else {
                let mut probe = |u: f64| {
                    let mut t = z.clone();
                    t[d] = u;
                    f(&from_latent(space, &t)).unwrap_or(f64::INFINITY)
                };
                vec![golden_min(&mut probe, 0.0, 1.0)]
            };
            for u in candidates {
                let mut t = z.clone();
                t[d] = u;
                let c = from_latent(space, &t);
                let y = f(&c)?;
                if y < best_y {
                    best_y = y;
                    // clamping may have moved the point; continue from the
                    // configuration actually evaluated
                    z = latent(space, &c)?.to_vec();
                    best = c;
                }
            }
        }
        Ok((best, best_y))
    }
}

fn golden_min(f: &mut impl FnMut(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > 1e-7 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    (a + b) / 2.0
}

/// Reproducible description of a benchmark suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteManifest {
    pub seeds: Vec<u64>,
    /// Families assigned round-robin over `seeds`.
    pub families: Vec<Family>,
    #[serde(default = "default_noise")]
    pub noise_std: f64,
    /// Days of drift applied per iteration; zero keeps the base context.
    #[serde(default)]
    pub drift_per_iteration: f64,
}

fn default_noise() -> f64 {
    DEFAULT_NOISE
}

impl SuiteManifest {
    pub fn new(seeds: Vec<u64>) -> Self {
        SuiteManifest { seeds, families: Family::ALL.to_vec(), noise_std: DEFAULT_NOISE, drift_per_iteration: 0.0 }
    }

    pub fn workloads(&self) -> Vec<SyntheticWorkload> {
        let families = if self.families.is_empty() { Family::ALL.to_vec() } else { self.families.clone() };
        self.seeds
            .iter()
            .enumerate()
            .map(|(i, &s)| {
                let mut w = make_workload(s, families[i % families.len()]);
                w.noise_std = self.noise_std;
                w
            })
            .collect()
    }

    pub fn context_at(&self, workload: &SyntheticWorkload, iteration: usize) -> ContextVector {
        if self.drift_per_iteration == 0.0 {
            workload.base_context()
        } else {
            workload.drift((iteration as f64 * self.drift_per_iteration).floor() as u32)
        }
    }
}
