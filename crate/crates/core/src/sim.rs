//! Monte Carlo RMSE sweeps and closed-form FLOP counts.

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::array::{Angle, ArrayConfig};
use crate::disambiguation::{estimate, EstimateResult, EstimatorOptions, Method};
use crate::error::{DoaError, Result};
use crate::receiver::SourceScenario;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub array: ArrayConfig,
    pub theta0: Angle,
    pub snapshots_per_slot: usize,
    pub snr_grid_db: Vec<f64>,
    pub trials: usize,
    pub master_seed: u64,
    pub methods: Vec<Method>,
    #[serde(default)]
    pub options: EstimatorOptions,
}

impl ExperimentConfig {
    /// 64 antennas, subarrays of 4, 8 snapshots, emitter at 41.345°.
    pub fn reference(snr_grid_db: Vec<f64>, trials: usize, master_seed: u64) -> Self {
        ExperimentConfig {
            array: ArrayConfig::half_wavelength(64, 4).expect("valid geometry"),
            theta0: Angle::from_degrees(41.345).expect("in range"),
            snapshots_per_slot: 8,
            snr_grid_db,
            trials,
            master_seed,
            methods: vec![Method::Fast, Method::Baseline],
            options: EstimatorOptions::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(DoaError::Experiment("trials must be at least 1".into()));
        }
        if self.snr_grid_db.is_empty() {
            return Err(DoaError::Experiment("SNR grid is empty".into()));
        }
        if self.methods.is_empty() {
            return Err(DoaError::Experiment("no methods selected".into()));
        }
        if self.snr_grid_db.iter().any(|s| s.is_nan()) {
            return Err(DoaError::Experiment("SNR grid contains NaN".into()));
        }
        if self.snapshots_per_slot == 0 {
            return Err(DoaError::EmptySlot);
        }
        if self.methods.contains(&Method::Fast) && !self.array.fast_applicable() {
            return Err(DoaError::FastNotApplicable {
                k: self.array.n_subarrays(),
                m: self.array.subarray_size(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RmseRow {
    pub snr_db: f64,
    pub method: Method,
    pub rmse_deg: f64,
    pub trials: usize,
    /// Fraction of trials that selected a candidate other than the one nearest the truth.
    pub failure_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RmseTable {
    pub rows: Vec<RmseRow>,
}

impl RmseTable {
    pub fn get(&self, snr_db: f64, method: Method) -> Option<&RmseRow> {
        self.rows.iter().find(|r| r.snr_db == snr_db && r.method == method)
    }

    /// `snr_db,method,rmse_deg,trials,failure_rate` with a header row and LF endings.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "snr_db,method,rmse_deg,trials,failure_rate")?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{:.6},{},{:.6}",
                r.snr_db, r.method, r.rmse_deg, r.trials, r.failure_rate
            )?;
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("ascii output")
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Per-trial seed derived from the master seed and the trial index.
pub fn trial_seed(master_seed: u64, trial: u64) -> u64 {
    splitmix64(splitmix64(master_seed) ^ trial)
}

/// Random stream used for every estimate: ChaCha8 seeded from a 64-bit value.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Outcome of one Monte Carlo trial.
#[derive(Debug, Clone, Copy, PartialEq)]
struct TrialOutcome {
    error_deg: f64,
    failed: bool,
}

fn score(result: &Result<EstimateResult>, theta0: Angle) -> TrialOutcome {
    match result {
        Ok(res) => {
            let truth = theta0.degrees();
            let nearest = res
                .candidates
                .ambiguous_angles
                .iter()
                .map(|a| (a.degrees() - truth).abs())
                .fold(f64::INFINITY, f64::min);
            let error_deg = res.theta_hat.degrees() - truth;
            TrialOutcome {
                error_deg,
                failed: error_deg.abs() > nearest,
            }
        }
        // worst deviation any candidate in [-90°, 90°] could have
        Err(_) => TrialOutcome {
            error_deg: 90.0 + theta0.degrees().abs(),
            failed: true,
        },
    }
}

/// Runs `trials` estimates for every (SNR, method) cell.
///
/// Trial `t` uses the same seed in every cell, so methods see common random
/// numbers for their first slot. Output is independent of thread scheduling.
pub fn run_rmse_sweep(ec: &ExperimentConfig) -> Result<RmseTable> {
    ec.validate()?;
    let mut rows = Vec::with_capacity(ec.snr_grid_db.len() * ec.methods.len());
    for &snr_db in &ec.snr_grid_db {
        let scn = SourceScenario::new(ec.theta0, snr_db, ec.snapshots_per_slot)?;
        for &method in &ec.methods {
            let outcomes: Vec<TrialOutcome> = (0..ec.trials as u64)
                .into_par_iter()
                .map(|t| {
                    let mut rng = seeded_rng(trial_seed(ec.master_seed, t));
                    score(&estimate(method, &scn, &ec.array, &ec.options, &mut rng), ec.theta0)
                })
                .collect();
            let n = outcomes.len() as f64;
            let mse = outcomes.iter().map(|o| o.error_deg * o.error_deg).sum::<f64>() / n;
            let failures = outcomes.iter().filter(|o| o.failed).count();
            rows.push(RmseRow {
                snr_db,
                method,
                rmse_deg: mse.sqrt(),
                trials: ec.trials,
                failure_rate: failures as f64 / n,
            });
        }
    }
    Ok(RmseTable { rows })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexityReport {
    pub c_original: u64,
    pub c_proposed: u64,
    /// Ratio of the elimination terms, `NM / N = M`.
    pub reduction_term_ratio: f64,
}

/// Literal evaluation of
/// `K²L + (2(K-1))³ + L((2K-2)K + NM)` (baseline) and the same with `NM → N` (fast).
pub fn complexity_flops(cfg: &ArrayConfig, snapshots: usize) -> ComplexityReport {
    let k = cfg.n_subarrays() as u64;
    let n = cfg.n_antennas() as u64;
    let m = cfg.subarray_size() as u64;
    let l = snapshots as u64;
    let shared = k * k * l + (2 * (k - 1)).pow(3) + l * (2 * k - 2) * k;
    ComplexityReport {
        c_original: shared + l * n * m,
        c_proposed: shared + l * n,
        reduction_term_ratio: (n * m) as f64 / n as f64,
    }
}
