//! Second-stage elimination of the grating-lobe candidates.
//!
//! The fast method spends one extra slot: the `K` subarrays are split into
//! `M` groups and group `m` is phase-aligned to candidate `m`, so all
//! candidates are tested at once. The baseline spends one slot per
//! candidate with the entire array aligned to it.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::array::{Angle, ArrayConfig};
use crate::error::{DoaError, Result};
use crate::receiver::{
    build_analog_weights, synthesize_scan_slot, synthesize_stage1_slot, synthesize_stage2_slot, OffsetRule, SlotData,
    SourceScenario,
};
use crate::root_music::{stage1_candidates, CandidateSet, RootSelector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Fast,
    Baseline,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Fast => "fast",
            Method::Baseline => "baseline",
        }
    }

    /// Time slots one estimate occupies.
    pub fn slots(self, cfg: &ArrayConfig) -> usize {
        match self {
            Method::Fast => 2,
            Method::Baseline => 1 + cfg.subarray_size(),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = DoaError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "fast" => Ok(Method::Fast),
            "baseline" => Ok(Method::Baseline),
            other => Err(DoaError::Experiment(format!("unknown method `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CandidatePower {
    pub angle: Angle,
    pub power: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerProfile {
    pub per_candidate: Vec<CandidatePower>,
    pub selected_index: usize,
}

impl PowerProfile {
    /// Argmax with first-index tie-break.
    fn from_powers(angles: &[Angle], powers: Vec<f64>) -> Result<Self> {
        if angles.is_empty() || angles.len() != powers.len() {
            return Err(DoaError::Shape(format!(
                "{} angles, {} powers",
                angles.len(),
                powers.len()
            )));
        }
        let mut selected_index = 0;
        for (i, &p) in powers.iter().enumerate() {
            if p > powers[selected_index] {
                selected_index = i;
            }
        }
        let per_candidate = angles
            .iter()
            .zip(powers)
            .map(|(&angle, power)| CandidatePower { angle, power })
            .collect();
        Ok(PowerProfile {
            per_candidate,
            selected_index,
        })
    }

    pub fn selected(&self) -> Angle {
        self.per_candidate[self.selected_index].angle
    }
}

fn mean_power(slot: &SlotData, row: usize) -> f64 {
    slot.samples.row(row).iter().map(|z| z.norm_sqr()).sum::<f64>() / slot.snapshots() as f64
}

/// `P_r(θ̂_m) = (1/L) Σ_n |r_m(n)|²` for every candidate row, then the argmax.
///
/// Rows past `candidates.len()` belong to padded groups and are ignored.
pub fn group_power_profile(slot2: &SlotData, candidates: &[Angle]) -> Result<PowerProfile> {
    if candidates.is_empty() || slot2.channels() < candidates.len() {
        return Err(DoaError::Shape(format!(
            "{} group rows for {} candidates",
            slot2.channels(),
            candidates.len()
        )));
    }
    if slot2.snapshots() == 0 {
        return Err(DoaError::EmptySlot);
    }
    let powers = (0..candidates.len()).map(|m| mean_power(slot2, m)).collect();
    PowerProfile::from_powers(candidates, powers)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct EstimatorOptions {
    pub selector: RootSelector,
    pub offset_rule: OffsetRule,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateResult {
    pub theta_hat: Angle,
    pub profile: PowerProfile,
    pub slots_consumed: usize,
    pub method: Method,
    pub candidates: CandidateSet,
}

fn stage1<R: Rng + ?Sized>(
    scn: &SourceScenario,
    cfg: &ArrayConfig,
    opts: &EstimatorOptions,
    rng: &mut R,
) -> Result<CandidateSet> {
    let slot = synthesize_stage1_slot(scn, cfg, 1, rng);
    stage1_candidates(&slot, cfg, opts.selector)
}

/// Two-slot estimate: Root-MUSIC on slot 1, grouped analog alignment on slot 2.
pub fn estimate_fast<R: Rng + ?Sized>(
    scn: &SourceScenario,
    cfg: &ArrayConfig,
    opts: &EstimatorOptions,
    rng: &mut R,
) -> Result<EstimateResult> {
    if !cfg.fast_applicable() {
        return Err(DoaError::FastNotApplicable {
            k: cfg.n_subarrays(),
            m: cfg.subarray_size(),
        });
    }
    let candidates = stage1(scn, cfg, opts, rng)?;
    let weights = build_analog_weights(&candidates.ambiguous_angles, cfg, opts.offset_rule)?;
    let slot2 = synthesize_stage2_slot(scn, &weights, cfg, 2, rng)?;
    let profile = group_power_profile(&slot2, &candidates.ambiguous_angles)?;
    Ok(EstimateResult {
        theta_hat: profile.selected(),
        profile,
        slots_consumed: Method::Fast.slots(cfg),
        method: Method::Fast,
        candidates,
    })
}

/// `1 + M` slot estimate: Root-MUSIC on slot 1, then one full-array scan slot per candidate.
///
/// Exactly `M` scan slots are spent; when fewer candidates exist the last
/// one is rescanned and left out of the argmax.
pub fn estimate_baseline<R: Rng + ?Sized>(
    scn: &SourceScenario,
    cfg: &ArrayConfig,
    opts: &EstimatorOptions,
    rng: &mut R,
) -> Result<EstimateResult> {
    let candidates = stage1(scn, cfg, opts, rng)?;
    let angles = &candidates.ambiguous_angles;
    let m = cfg.subarray_size();
    if angles.len() > m {
        return Err(DoaError::TooManyCandidates {
            got: angles.len(),
            max: m,
        });
    }
    let last = *angles.last().ok_or_else(|| DoaError::Shape("no candidates".into()))?;
    let mut powers = Vec::with_capacity(angles.len());
    for slot in 0..m {
        let theta = angles.get(slot).copied().unwrap_or(last);
        let scan = synthesize_scan_slot(scn, theta, cfg, slot as u32 + 2, rng);
        if slot < angles.len() {
            powers.push(mean_power(&scan, 0));
        }
    }
    let profile = PowerProfile::from_powers(angles, powers)?;
    Ok(EstimateResult {
        theta_hat: profile.selected(),
        profile,
        slots_consumed: Method::Baseline.slots(cfg),
        method: Method::Baseline,
        candidates,
    })
}

pub fn estimate<R: Rng + ?Sized>(
    method: Method,
    scn: &SourceScenario,
    cfg: &ArrayConfig,
    opts: &EstimatorOptions,
    rng: &mut R,
) -> Result<EstimateResult> {
    match method {
        Method::Fast => estimate_fast(scn, cfg, opts, rng),
        Method::Baseline => estimate_baseline(scn, cfg, opts, rng),
    }
}

/// Fast-to-baseline delay ratio `2 / (M + 1)`.
pub fn delay_ratio(cfg: &ArrayConfig) -> f64 {
    Method::Fast.slots(cfg) as f64 / Method::Baseline.slots(cfg) as f64
}
