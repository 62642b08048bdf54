//! Seeded random k-CNF generation and scaling measurements of the mask
//! engine, with least-squares fits of wall time against an exponential and a
//! polynomial model.

use std::collections::HashSet;
use std::io::Write;
use std::path::PathBuf;
use std::time::Duration;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bitfield::BitFieldError;
use crate::cnf::{write_dimacs, Clause, Formula, Literal, VarId};
use crate::maskset::{decide, Decision, MaskError, Mode, SolveOptions};

/// Clause-to-variable ratio used for k = 3 when none is given.
pub const DEFAULT_RATIO: f64 = 4.3;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("clause width {k} exceeds variable count {v}")]
    WidthExceedsVars { k: usize, v: usize },
    #[error("{c} distinct clauses requested but only {available} exist for v={v}, k={k}")]
    NotEnoughDistinctClauses { c: usize, v: usize, k: usize, available: u128 },
    #[error("fit needs at least 4 distinct variable counts, got {0}")]
    InsufficientPoints(usize),
    #[error("empty variable range {0}..{1}")]
    EmptyRange(usize, usize),
    #[error(transparent)]
    Solve(#[from] MaskError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("thread pool: {0}")]
    Pool(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GenSpec {
    pub v: usize,
    pub c: usize,
    pub k: usize,
    pub seed: u64,
    pub allow_duplicate_clauses: bool,
}

fn binomial(n: usize, k: usize) -> u128 {
    (0..k).fold(1u128, |acc, i| acc.saturating_mul((n - i) as u128) / (i as u128 + 1))
}

/// Random k-CNF: each clause takes `k` distinct variables, sorted, each
/// negated with probability 1/2. Deterministic in the seed.
pub fn generate(spec: &GenSpec) -> Result<Formula, BenchError> {
    let GenSpec { v, c, k, seed, allow_duplicate_clauses } = *spec;
    if k > v {
        return Err(BenchError::WidthExceedsVars { k, v });
    }
    if !allow_duplicate_clauses {
        let available = binomial(v, k).saturating_mul(1u128 << k.min(127));
        if c as u128 > available {
            return Err(BenchError::NotEnoughDistinctClauses { c, v, k, available });
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen = HashSet::new();
    let mut clauses = Vec::with_capacity(c);
    while clauses.len() < c {
        let mut vars = sample(&mut rng, v, k).into_vec();
        vars.sort_unstable();
        let clause: Clause =
            vars.into_iter().map(|var| Literal { var: VarId(var as u32), negated: rng.gen_bool(0.5) }).collect();
        if allow_duplicate_clauses || seen.insert(clause.clone()) {
            clauses.push(clause);
        }
    }
    Ok(Formula::new(v, clauses))
}

/// Mixed corpus for cross-checking: `v` uniform in `1..=max_v`, `k` uniform
/// in `1..=min(4, v)`, clause count spread around the usual satisfiability
/// threshold for that `k` so both answers occur.
pub fn random_corpus(seed: u64, count: usize, max_v: usize) -> Vec<Formula> {
    const THRESHOLD: [f64; 4] = [0.5, 1.0, 4.3, 9.9];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let v = rng.gen_range(1..=max_v.max(1));
            let k = rng.gen_range(1..=v.min(4));
            let top = (THRESHOLD[k - 1] * v as f64 * 1.6).ceil() as usize + 1;
            let spec = GenSpec { v, c: rng.gen_range(1..=top), k, seed: rng.gen(), allow_duplicate_clauses: true };
            generate(&spec).expect("k never exceeds v here")
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RunOutcome {
    #[serde(rename = "SAT")]
    Sat,
    #[serde(rename = "UNSAT")]
    Unsat,
    /// The field width for this `v` is over the configured cap.
    #[serde(rename = "CAPPED")]
    Capped,
}

impl From<Decision> for RunOutcome {
    fn from(d: Decision) -> Self {
        match d {
            Decision::Satisfiable => RunOutcome::Sat,
            Decision::Unsatisfiable => RunOutcome::Unsat,
        }
    }
}

/// One CSV row: `mode,v,c,k,seed,decision,wall_time_ns,bit_ops,words_touched,peak_field_bytes`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScalingRecord {
    pub mode: Mode,
    pub v: usize,
    pub c: usize,
    pub k: usize,
    pub seed: u64,
    pub decision: RunOutcome,
    pub wall_time_ns: u64,
    pub bit_ops: u64,
    pub words_touched: u64,
    pub peak_field_bytes: u64,
}

impl ScalingRecord {
    pub fn wall_time(&self) -> Duration {
        Duration::from_nanos(self.wall_time_ns)
    }
}

#[derive(Debug, Clone)]
pub struct ScalingConfig {
    /// Inclusive range of variable counts.
    pub v_min: usize,
    pub v_max: usize,
    pub ratio: f64,
    pub k: usize,
    pub reps: usize,
    /// Uninstrumented solves per instance; the fastest one is recorded.
    pub timed_runs: usize,
    pub mode: Mode,
    pub seed: u64,
    pub max_width_bits: u64,
    /// Worker threads; 1 runs everything on the calling thread.
    pub threads: usize,
    pub dump_dir: Option<PathBuf>,
}

impl Default for ScalingConfig {
    fn default() -> Self {
        ScalingConfig {
            v_min: 4,
            v_max: 20,
            ratio: DEFAULT_RATIO,
            k: 3,
            reps: 5,
            timed_runs: 3,
            mode: Mode::BlockOps,
            seed: 0,
            max_width_bits: crate::bitfield::DEFAULT_MAX_WIDTH_BITS,
            threads: 1,
            dump_dir: None,
        }
    }
}

pub fn clauses_for(v: usize, ratio: f64) -> usize {
    ((ratio * v as f64).round() as usize).max(1)
}

/// Seed of repetition `rep` at `v`.
pub fn instance_seed(base: u64, v: usize, rep: usize) -> u64 {
    base ^ ((v as u64) << 32) ^ rep as u64
}

/// Runs `reps` instances for each `v` in range. Each instance is solved once
/// with counters on, which supplies the counter columns. Wall time is the
/// fastest of `timed_runs` uninstrumented solves, taken in separate passes
/// over the whole sweep so a slow stretch on the machine spoils at most a
/// few samples per instance. Records come back in `(v, rep)` order whatever the
/// thread count.
pub fn run_scaling(config: &ScalingConfig) -> Result<Vec<ScalingRecord>, BenchError> {
    if config.v_min > config.v_max {
        return Err(BenchError::EmptyRange(config.v_min, config.v_max));
    }
    if config.k > config.v_min {
        return Err(BenchError::WidthExceedsVars { k: config.k, v: config.v_min });
    }
    if let Some(dir) = &config.dump_dir {
        std::fs::create_dir_all(dir)?;
    }
    let jobs: Vec<(usize, usize)> =
        (config.v_min..=config.v_max).flat_map(|v| (0..config.reps).map(move |rep| (v, rep))).collect();
    let timed_opts = SolveOptions {
        mode: config.mode,
        max_width_bits: config.max_width_bits,
        count_ops: false,
        ..Default::default()
    };
    let time_one = |(record, formula): &mut (ScalingRecord, Option<Formula>)| -> Result<(), BenchError> {
        if let Some(formula) = formula {
            let ns = decide(formula, &timed_opts)?.wall_time.as_nanos().min(u64::MAX as u128) as u64;
            record.wall_time_ns = record.wall_time_ns.min(ns);
        }
        Ok(())
    };

    let mut prepared: Vec<(ScalingRecord, Option<Formula>)> = if config.threads <= 1 {
        let mut prepared = jobs.iter().map(|&(v, rep)| prepare(config, v, rep)).collect::<Result<Vec<_>, _>>()?;
        // Alternate the direction of each pass so a slow stretch cannot line
        // up with the same variable counts every time.
        for pass in 0..config.timed_runs.max(1) {
            if pass % 2 == 0 {
                prepared.iter_mut().try_for_each(time_one)?;
            } else {
                prepared.iter_mut().rev().try_for_each(time_one)?;
            }
        }
        prepared
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.threads)
            .build()
            .map_err(|e| BenchError::Pool(e.to_string()))?;
        pool.install(|| -> Result<_, BenchError> {
            let mut prepared =
                jobs.par_iter().map(|&(v, rep)| prepare(config, v, rep)).collect::<Result<Vec<_>, _>>()?;
            for _ in 0..config.timed_runs.max(1) {
                prepared.par_iter_mut().try_for_each(time_one)?;
            }
            Ok(prepared)
        })?
    };
    for (record, formula) in &mut prepared {
        if formula.is_none() {
            record.wall_time_ns = 0;
        }
    }
    Ok(prepared.into_iter().map(|(record, _)| record).collect())
}

/// Generates one instance and solves it with counters on. A capped instance
/// comes back without its formula.
fn prepare(config: &ScalingConfig, v: usize, rep: usize) -> Result<(ScalingRecord, Option<Formula>), BenchError> {
    let seed = instance_seed(config.seed, v, rep);
    let c = clauses_for(v, config.ratio);
    let formula = generate(&GenSpec { v, c, k: config.k, seed, allow_duplicate_clauses: true })?;
    if let Some(dir) = &config.dump_dir {
        let path = dir.join(format!("v{v:02}_r{rep:02}_s{seed}.cnf"));
        std::fs::write(path, write_dimacs(&formula))?;
    }
    let mut record = ScalingRecord {
        mode: config.mode,
        v,
        c,
        k: config.k,
        seed,
        decision: RunOutcome::Capped,
        wall_time_ns: u64::MAX,
        bit_ops: 0,
        words_touched: 0,
        peak_field_bytes: 0,
    };
    let counted = SolveOptions {
        mode: config.mode,
        max_width_bits: config.max_width_bits,
        count_ops: true,
        ..Default::default()
    };
    let warm = match decide(&formula, &counted) {
        Ok(report) => report,
        Err(MaskError::Field(BitFieldError::WidthCapExceeded { .. })) => return Ok((record, None)),
        Err(e) => return Err(e.into()),
    };
    record.decision = warm.decision.into();
    record.bit_ops = warm.counters.bit_ops;
    record.words_touched = warm.counters.words_touched;
    record.peak_field_bytes = warm.peak_field_bytes;
    Ok((record, Some(formula)))
}

pub fn write_csv<W: Write>(records: &[ScalingRecord], out: W) -> Result<(), BenchError> {
    let mut writer = csv::Writer::from_writer(out);
    if records.is_empty() {
        writer.write_record([
            "mode",
            "v",
            "c",
            "k",
            "seed",
            "decision",
            "wall_time_ns",
            "bit_ops",
            "words_touched",
            "peak_field_bytes",
        ])?;
    }
    for record in records {
        writer.serialize(record)?;
    }
    writer.flush()?;
    Ok(())
}

pub fn read_csv<R: std::io::Read>(input: R) -> Result<Vec<ScalingRecord>, BenchError> {
    csv::Reader::from_reader(input).deserialize().map(|row| row.map_err(BenchError::from)).collect()
}

/// Least-squares line `y = intercept + slope * x` and its RMS residual.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fit {
    pub slope: f64,
    pub intercept: f64,
    pub rms_residual: f64,
}

impl Fit {
    fn least_squares(xs: &[f64], ys: &[f64]) -> Fit {
        let n = xs.len() as f64;
        let mean_x = xs.iter().sum::<f64>() / n;
        let mean_y = ys.iter().sum::<f64>() / n;
        let sxx: f64 = xs.iter().map(|x| (x - mean_x).powi(2)).sum();
        let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mean_x) * (y - mean_y)).sum();
        let slope = sxy / sxx;
        Fit::with_slope(xs, ys, slope)
    }

    fn with_slope(xs: &[f64], ys: &[f64], slope: f64) -> Fit {
        let n = xs.len() as f64;
        let intercept = ys.iter().zip(xs).map(|(y, x)| y - slope * x).sum::<f64>() / n;
        let sse: f64 = xs.iter().zip(ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
        Fit { slope, intercept, rms_residual: (sse / n).sqrt() }
    }
}

/// Median wall time at one variable count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingPoint {
    pub v: usize,
    /// `c * v * k`.
    pub size: f64,
    pub median_ns: f64,
}

/// All fits are in log2 units, so residuals are comparable across models.
#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub points: Vec<ScalingPoint>,
    /// log2(time) against v.
    pub exponential: Fit,
    /// log2(time) against log2(c*v*k), free exponent.
    pub power_law: Fit,
    /// log2(time) against log2(c*v*k) with the exponent pinned at 2.
    pub quadratic: Fit,
    /// Multiplicative growth per added variable under the exponential fit.
    pub doubling_factor: f64,
    /// `(v, t(v+1) / t(v))` for consecutive measured variable counts.
    pub step_ratios: Vec<(usize, f64)>,
    pub verdict: String,
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

pub fn scaling_points(records: &[ScalingRecord]) -> Vec<ScalingPoint> {
    let mut vs: Vec<usize> = records.iter().filter(|r| r.decision != RunOutcome::Capped).map(|r| r.v).collect();
    vs.sort_unstable();
    vs.dedup();
    vs.into_iter()
        .map(|v| {
            let rows: Vec<&ScalingRecord> =
                records.iter().filter(|r| r.v == v && r.decision != RunOutcome::Capped).collect();
            let mut times: Vec<f64> = rows.iter().map(|r| r.wall_time_ns.max(1) as f64).collect();
            let mut sizes: Vec<f64> = rows.iter().map(|r| (r.c * r.v * r.k).max(1) as f64).collect();
            ScalingPoint { v, size: median(&mut sizes), median_ns: median(&mut times) }
        })
        .collect()
}

pub fn fit_report(records: &[ScalingRecord]) -> Result<FitReport, BenchError> {
    let points = scaling_points(records);
    if points.len() < 4 {
        return Err(BenchError::InsufficientPoints(points.len()));
    }
    let vs: Vec<f64> = points.iter().map(|p| p.v as f64).collect();
    let log_sizes: Vec<f64> = points.iter().map(|p| p.size.log2()).collect();
    let log_times: Vec<f64> = points.iter().map(|p| p.median_ns.log2()).collect();

    let exponential = Fit::least_squares(&vs, &log_times);
    let power_law = Fit::least_squares(&log_sizes, &log_times);
    let quadratic = Fit::with_slope(&log_sizes, &log_times, 2.0);
    let doubling_factor = exponential.slope.exp2();
    let step_ratios =
        points.windows(2).filter(|w| w[1].v == w[0].v + 1).map(|w| (w[0].v, w[1].median_ns / w[0].median_ns)).collect();

    let better =
        if exponential.rms_residual < power_law.rms_residual { "exponential in v" } else { "polynomial in c*v*k" };
    let verdict = format!(
        "verdict: {better} fits better (rms residual in log2 units: exponential {:.4}, power law {:.4} \
         with exponent {:.2}, fixed quadratic {:.4}); wall time grows x{:.3} per added variable",
        exponential.rms_residual, power_law.rms_residual, power_law.slope, quadratic.rms_residual, doubling_factor
    );
    Ok(FitReport { points, exponential, power_law, quadratic, doubling_factor, step_ratios, verdict })
}
