//! Baseband synthesis through the sub-connected hybrid chain.
//!
//! Every slot starts from raw element samples `a(θ0) s(n) + w(n)`, which are
//! then passed through per-subarray analog weights (`v^H x`) and a digital
//! combiner. Stage 1 uses all-zero analog phases and keeps the `K` channels
//! separate; stage 2 steers each group of `P` subarrays to one candidate and
//! sums the group.

use std::f64::consts::FRAC_1_SQRT_2;
use std::io::{Read, Write};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::array::{element_steering, spatial_phase, Angle, ArrayConfig};
use crate::error::{DoaError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SourceScenario {
    pub theta0: Angle,
    /// Per-element SNR `σ_s²/σ_w²` in dB. `+∞` disables noise.
    pub snr_db: f64,
    pub snapshots_per_slot: usize,
    #[serde(skip)]
    muted: bool,
}

impl SourceScenario {
    pub fn new(theta0: Angle, snr_db: f64, snapshots_per_slot: usize) -> Result<Self> {
        if snapshots_per_slot == 0 {
            return Err(DoaError::EmptySlot);
        }
        if snr_db.is_nan() {
            return Err(DoaError::Experiment("SNR is NaN".into()));
        }
        Ok(SourceScenario {
            theta0,
            snr_db,
            snapshots_per_slot,
            muted: false,
        })
    }

    /// Noise-free scenario.
    pub fn noiseless(theta0: Angle, snapshots_per_slot: usize) -> Result<Self> {
        Self::new(theta0, f64::INFINITY, snapshots_per_slot)
    }

    /// Same scenario with the emitter switched off (`s ≡ 0`).
    pub fn muted(mut self) -> Self {
        self.muted = true;
        self
    }

    /// `σ_w² = 10^{-SNR/10}` for unit signal power.
    pub fn noise_variance(&self) -> f64 {
        10f64.powf(-self.snr_db / 10.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlotKind {
    /// `K` digital channels with zero analog phase.
    Stage1,
    /// `M` group sums after candidate-aligned analog weights.
    Stage2,
    /// Single output of the whole array steered to one candidate.
    Scan,
}

impl SlotKind {
    fn code(self) -> u32 {
        match self {
            SlotKind::Stage1 => 1,
            SlotKind::Stage2 => 2,
            SlotKind::Scan => 3,
        }
    }

    fn from_code(code: u32) -> Option<Self> {
        match code {
            1 => Some(SlotKind::Stage1),
            2 => Some(SlotKind::Stage2),
            3 => Some(SlotKind::Scan),
            _ => None,
        }
    }
}

/// One time slot of combined baseband output; columns are snapshots.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotData {
    pub samples: DMatrix<Complex64>,
    pub slot_index: u32,
    pub kind: SlotKind,
}

impl SlotData {
    pub fn channels(&self) -> usize {
        self.samples.nrows()
    }

    pub fn snapshots(&self) -> usize {
        self.samples.ncols()
    }

    /// Writes the slot as `HADS` little-endian binary.
    pub fn write_to<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        w.write_all(b"HADS")?;
        for v in [
            self.channels() as u32,
            self.snapshots() as u32,
            self.slot_index,
            self.kind.code(),
        ] {
            w.write_all(&v.to_le_bytes())?;
        }
        for r in 0..self.channels() {
            for c in 0..self.snapshots() {
                let z = self.samples[(r, c)];
                w.write_all(&(z.re as f32).to_le_bytes())?;
                w.write_all(&(z.im as f32).to_le_bytes())?;
            }
        }
        Ok(())
    }

    /// Reads a slot written by [`SlotData::write_to`]. Samples come back at `f32` precision.
    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let io = |e: std::io::Error| DoaError::Io(e.to_string());
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic).map_err(io)?;
        if &magic != b"HADS" {
            return Err(DoaError::Io("bad magic".into()));
        }
        let mut word = || -> Result<u32> {
            let mut b = [0u8; 4];
            r.read_exact(&mut b).map_err(io)?;
            Ok(u32::from_le_bytes(b))
        };
        let rows = word()? as usize;
        let cols = word()? as usize;
        let slot_index = word()?;
        let kind = SlotKind::from_code(word()?).ok_or_else(|| DoaError::Io("unknown slot kind".into()))?;
        let mut buf = vec![0u8; rows * cols * 8];
        r.read_exact(&mut buf).map_err(io)?;
        let f = |i: usize| f32::from_le_bytes(buf[i..i + 4].try_into().unwrap()) as f64;
        let samples = DMatrix::from_fn(rows, cols, |i, j| {
            let at = (i * cols + j) * 8;
            Complex64::new(f(at), f(at + 4))
        });
        Ok(SlotData {
            samples,
            slot_index,
            kind,
        })
    }
}

/// Offset rule for the first element phase index `H` of subarray `p` in group `m`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OffsetRule {
    /// `H = (m-1)PM + (p-1)M`: the true first-element index of each subarray.
    #[default]
    Contiguous,
    /// `H = (m-1)PM + (P-1)M`, independent of `p`. Kept for comparison only;
    /// it does not phase-align the subarrays of a group.
    AsPrinted,
}

/// Analog phase `α_{mp,i} = (H + i) φ(θ̂_m)` for 1-based group `m`, 1-based
/// subarray `p` and 0-based element `i`.
pub fn apa_phase(m: usize, p: usize, i: usize, theta_m: Angle, cfg: &ArrayConfig, rule: OffsetRule) -> Result<f64> {
    let big_m = cfg.subarray_size();
    let big_p = cfg.group_size().ok_or(DoaError::FastNotApplicable {
        k: cfg.n_subarrays(),
        m: big_m,
    })?;
    if m == 0 || m > big_m || p == 0 || p > big_p || i >= big_m {
        return Err(DoaError::Index(format!(
            "(m, p, i) = ({m}, {p}, {i}) with M = {big_m}, P = {big_p}"
        )));
    }
    let h = match rule {
        OffsetRule::Contiguous => (m - 1) * big_p * big_m + (p - 1) * big_m,
        OffsetRule::AsPrinted => (m - 1) * big_p * big_m + (big_p - 1) * big_m,
    };
    Ok((h + i) as f64 * spatial_phase(theta_m, cfg).radians())
}

/// Constant-modulus phase-shifter settings for the grouped second slot.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalogWeights {
    groups: usize,
    per_group: usize,
    /// Indexed by `m * P + p` (both 0-based); equals the physical subarray index.
    vectors: Vec<Vec<Complex64>>,
    /// Groups carrying a real candidate; padded groups are `false`.
    active: Vec<bool>,
    angles: Vec<Angle>,
}

impl AnalogWeights {
    pub fn groups(&self) -> usize {
        self.groups
    }

    pub fn per_group(&self) -> usize {
        self.per_group
    }

    /// Weight vector of 0-based group `m`, subarray `p`.
    pub fn vector(&self, m: usize, p: usize) -> &[Complex64] {
        &self.vectors[m * self.per_group + p]
    }

    pub fn is_active(&self, m: usize) -> bool {
        self.active[m]
    }

    /// Steering angle used by each group.
    pub fn angles(&self) -> &[Angle] {
        &self.angles
    }
}

fn phase_vector(phases: impl Iterator<Item = f64>, m: usize) -> Vec<Complex64> {
    let scale = 1.0 / (m as f64).sqrt();
    phases.map(|a| Complex64::from_polar(scale, a)).collect()
}

/// Builds one weight vector per (group, subarray) from the candidate angles.
/// Fewer than `M` candidates are padded with the last one, and the padded
/// groups are flagged inactive.
pub fn build_analog_weights(candidates: &[Angle], cfg: &ArrayConfig, rule: OffsetRule) -> Result<AnalogWeights> {
    let m = cfg.subarray_size();
    let p = cfg.group_size().ok_or(DoaError::FastNotApplicable {
        k: cfg.n_subarrays(),
        m,
    })?;
    if candidates.len() > m {
        return Err(DoaError::TooManyCandidates {
            got: candidates.len(),
            max: m,
        });
    }
    let last = *candidates
        .last()
        .ok_or_else(|| DoaError::Shape("no candidates".into()))?;
    let angles: Vec<Angle> = (0..m).map(|g| candidates.get(g).copied().unwrap_or(last)).collect();
    let mut vectors = Vec::with_capacity(m * p);
    for (g, &theta) in angles.iter().enumerate() {
        for s in 0..p {
            let phases = (0..m).map(|i| apa_phase(g + 1, s + 1, i, theta, cfg, rule));
            let phases: Vec<f64> = phases.collect::<Result<_>>()?;
            vectors.push(phase_vector(phases.into_iter(), m));
        }
    }
    Ok(AnalogWeights {
        groups: m,
        per_group: p,
        vectors,
        active: (0..m).map(|g| g < candidates.len()).collect(),
        angles,
    })
}

fn complex_normal<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex64 {
    let s = (variance).sqrt() * FRAC_1_SQRT_2;
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(s * re, s * im)
}

/// Raw `N × L` element samples `a(θ0) s(n) + w(n)`, `s ~ CN(0, 1)`, `w ~ CN(0, σ_w² I)`.
pub fn synthesize_elements<R: Rng + ?Sized>(
    scn: &SourceScenario,
    cfg: &ArrayConfig,
    rng: &mut R,
) -> DMatrix<Complex64> {
    let n = cfg.n_antennas();
    let l = scn.snapshots_per_slot;
    let steering = element_steering(scn.theta0, cfg);
    let sigma2 = scn.noise_variance();
    let mut x = DMatrix::zeros(n, l);
    for col in 0..l {
        let s = if scn.muted {
            Complex64::new(0.0, 0.0)
        } else {
            complex_normal(rng, 1.0)
        };
        for row in 0..n {
            let w = if sigma2 > 0.0 {
                complex_normal(rng, sigma2)
            } else {
                Complex64::new(0.0, 0.0)
            };
            x[(row, col)] = steering[row] * s + w;
        }
    }
    x
}

/// `v^H x` for a weight vector applied to subarray `k` of raw samples, one snapshot.
fn subarray_output(x: &DMatrix<Complex64>, k: usize, col: usize, v: &[Complex64]) -> Complex64 {
    let base = k * v.len();
    v.iter().enumerate().map(|(i, w)| w.conj() * x[(base + i, col)]).sum()
}

/// Stage-1 slot: zero analog phases, `K` separate digital channels.
pub fn synthesize_stage1_slot<R: Rng + ?Sized>(
    scn: &SourceScenario,
    cfg: &ArrayConfig,
    slot_index: u32,
    rng: &mut R,
) -> SlotData {
    let m = cfg.subarray_size();
    let x = synthesize_elements(scn, cfg, rng);
    let v = phase_vector(std::iter::repeat_n(0.0, m), m);
    let samples = DMatrix::from_fn(cfg.n_subarrays(), scn.snapshots_per_slot, |k, col| {
        subarray_output(&x, k, col, &v)
    });
    SlotData {
        samples,
        slot_index,
        kind: SlotKind::Stage1,
    }
}

/// Stage-2 slot: group `m` sums its `P` candidate-steered subarrays (`v_D` all ones).
pub fn synthesize_stage2_slot<R: Rng + ?Sized>(
    scn: &SourceScenario,
    weights: &AnalogWeights,
    cfg: &ArrayConfig,
    slot_index: u32,
    rng: &mut R,
) -> Result<SlotData> {
    if weights.groups * weights.per_group != cfg.n_subarrays()
        || weights.vectors.iter().any(|v| v.len() != cfg.subarray_size())
    {
        return Err(DoaError::Shape(format!(
            "weights for {}x{} subarrays of size {}, array has {} of size {}",
            weights.groups,
            weights.per_group,
            weights.vectors.first().map_or(0, Vec::len),
            cfg.n_subarrays(),
            cfg.subarray_size()
        )));
    }
    let x = synthesize_elements(scn, cfg, rng);
    let samples = DMatrix::from_fn(weights.groups, scn.snapshots_per_slot, |m, col| {
        (0..weights.per_group)
            .map(|p| subarray_output(&x, m * weights.per_group + p, col, weights.vector(m, p)))
            .sum()
    });
    Ok(SlotData {
        samples,
        slot_index,
        kind: SlotKind::Stage2,
    })
}

/// Full-array scan slot: every subarray steered to `theta`, all `K` outputs summed.
pub fn synthesize_scan_slot<R: Rng + ?Sized>(
    scn: &SourceScenario,
    theta: Angle,
    cfg: &ArrayConfig,
    slot_index: u32,
    rng: &mut R,
) -> SlotData {
    let m = cfg.subarray_size();
    let phi = spatial_phase(theta, cfg).radians();
    let weights: Vec<Vec<Complex64>> = (0..cfg.n_subarrays())
        .map(|k| phase_vector((0..m).map(|i| (k * m + i) as f64 * phi), m))
        .collect();
    let x = synthesize_elements(scn, cfg, rng);
    let samples = DMatrix::from_fn(1, scn.snapshots_per_slot, |_, col| {
        weights
            .iter()
            .enumerate()
            .map(|(k, v)| subarray_output(&x, k, col, v))
            .sum()
    });
    SlotData {
        samples,
        slot_index,
        kind: SlotKind::Scan,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::array::{subarray_gain, virtual_manifold};
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn deg(d: f64) -> Angle {
        Angle::from_degrees(d).unwrap()
    }

    fn cfg64() -> ArrayConfig {
        ArrayConfig::half_wavelength(64, 4).unwrap()
    }

    #[test]
    fn rejects_zero_snapshots() {
        assert_eq!(SourceScenario::new(deg(0.0), 0.0, 0), Err(DoaError::EmptySlot));
    }

    #[test]
    fn noiseless_stage1_is_scaled_virtual_manifold() {
        let cfg = cfg64();
        let scn = SourceScenario::noiseless(deg(41.345), 8).unwrap();
        let slot = synthesize_stage1_slot(&scn, &cfg, 1, &mut ChaCha8Rng::seed_from_u64(1));
        assert_eq!((slot.channels(), slot.snapshots()), (16, 8));
        let ad = virtual_manifold(scn.theta0, &cfg);
        for col in 0..8 {
            // recover s(n) from channel 0, then check every channel
            let s = slot.samples[(0, col)] * 2.0 / ad[0];
            for (k, a) in ad.iter().enumerate() {
                assert!((slot.samples[(k, col)] - a * s / 2.0).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn broadside_channels_identical() {
        let cfg = cfg64();
        let scn = SourceScenario::noiseless(deg(0.0), 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let slot = synthesize_stage1_slot(&scn, &cfg, 1, &mut rng);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x = synthesize_elements(&scn, &cfg, &mut rng);
        for col in 0..4 {
            let s = x[(0, col)];
            for k in 0..16 {
                assert!((slot.samples[(k, col)] - s * 2.0).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn stage1_channel_power_matches_model() {
        let cfg = cfg64();
        let scn = SourceScenario::new(deg(41.345), 0.0, 8).unwrap();
        let expected = subarray_gain(scn.theta0, &cfg).norm_sqr() / 4.0 + 1.0;
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let one = synthesize_stage1_slot(&scn, &cfg, 1, &mut rng);
        let single: f64 = one.samples.iter().map(|z| z.norm_sqr()).sum::<f64>() / (16.0 * 8.0);
        assert!((single / expected - 1.0).abs() < 0.30, "{single} vs {expected}");

        let slots = 10_000;
        let mut total = 0.0;
        for b in 0..slots {
            let s = synthesize_stage1_slot(&scn, &cfg, b + 1, &mut rng);
            total += s.samples.iter().map(|z| z.norm_sqr()).sum::<f64>();
        }
        let mean = total / (slots as f64 * 16.0 * 8.0);
        assert!((mean / expected - 1.0).abs() < 0.02, "{mean} vs {expected}");
    }

    #[test]
    fn stage1_noise_calibration() {
        let cfg = cfg64();
        let scn = SourceScenario::new(deg(20.0), 3.0, 100_000).unwrap().muted();
        let slot = synthesize_stage1_slot(&scn, &cfg, 1, &mut ChaCha8Rng::seed_from_u64(5));
        let sigma2 = scn.noise_variance();
        for k in 0..16 {
            let var = slot.samples.row(k).iter().map(|z| z.norm_sqr()).sum::<f64>() / 1e5;
            assert!((var / sigma2 - 1.0).abs() < 0.02, "channel {k}: {var}");
        }
    }

    #[test]
    fn seed_determinism() {
        let cfg = cfg64();
        let scn = SourceScenario::new(deg(-12.0), -5.0, 8).unwrap();
        let a = synthesize_stage1_slot(&scn, &cfg, 1, &mut ChaCha8Rng::seed_from_u64(77));
        let b = synthesize_stage1_slot(&scn, &cfg, 1, &mut ChaCha8Rng::seed_from_u64(77));
        assert_eq!(a, b);
    }

    #[test]
    fn apa_phase_examples() {
        let cfg = cfg64();
        let r = OffsetRule::Contiguous;
        assert_eq!(apa_phase(1, 1, 0, deg(41.345), &cfg, r).unwrap(), 0.0);
        for m in 1..=4 {
            for p in 1..=4 {
                for i in 0..4 {
                    assert_eq!(apa_phase(m, p, i, deg(0.0), &cfg, r).unwrap(), 0.0);
                }
            }
        }
        let phi = std::f64::consts::PI * 41.345f64.to_radians().sin();
        assert_abs_diff_eq!(
            apa_phase(2, 1, 0, deg(41.345), &cfg, r).unwrap(),
            16.0 * phi,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(16.0 * phi, 33.203, epsilon = 1e-2);
        // p-independent printed offset: (m-1)PM + (P-1)M = 0 + 12 for m = 1
        assert_abs_diff_eq!(
            apa_phase(1, 1, 0, deg(41.345), &cfg, OffsetRule::AsPrinted).unwrap(),
            12.0 * phi,
            epsilon = 1e-12
        );
        assert!(apa_phase(0, 1, 0, deg(1.0), &cfg, r).is_err());
        assert!(apa_phase(5, 1, 0, deg(1.0), &cfg, r).is_err());
        assert!(apa_phase(1, 5, 0, deg(1.0), &cfg, r).is_err());
        assert!(apa_phase(1, 1, 4, deg(1.0), &cfg, r).is_err());
        let narrow = ArrayConfig::half_wavelength(128, 16).unwrap();
        assert!(matches!(
            apa_phase(1, 1, 0, deg(1.0), &narrow, r),
            Err(DoaError::FastNotApplicable { .. })
        ));
    }

    #[test]
    fn weights_constant_modulus() {
        let cfg = cfg64();
        let cands = [deg(-57.0777), deg(-19.84), deg(9.24), deg(41.345)];
        let w = build_analog_weights(&cands, &cfg, OffsetRule::Contiguous).unwrap();
        for m in 0..4 {
            for p in 0..4 {
                for z in w.vector(m, p) {
                    assert_abs_diff_eq!(z.norm(), 0.5, epsilon = 1e-12);
                }
            }
        }
        let zero = build_analog_weights(&[deg(0.0); 4], &cfg, OffsetRule::Contiguous).unwrap();
        assert!(zero
            .vectors
            .iter()
            .flatten()
            .all(|z| (z - Complex64::new(0.5, 0.0)).norm() < 1e-15));
    }

    #[test]
    fn weights_padding_and_limits() {
        let cfg = cfg64();
        let w = build_analog_weights(&[deg(-10.0), deg(30.0)], &cfg, OffsetRule::Contiguous).unwrap();
        assert_eq!(w.angles(), &[deg(-10.0), deg(30.0), deg(30.0), deg(30.0)]);
        assert_eq!(
            (0..4).map(|m| w.is_active(m)).collect::<Vec<_>>(),
            [true, true, false, false]
        );
        assert!(matches!(
            build_analog_weights(&[deg(0.0); 5], &cfg, OffsetRule::Contiguous),
            Err(DoaError::TooManyCandidates { got: 5, max: 4 })
        ));
        assert!(build_analog_weights(&[], &cfg, OffsetRule::Contiguous).is_err());
    }

    #[test]
    fn aligned_subarray_has_full_coherent_gain() {
        let cfg = cfg64();
        let theta = deg(41.345);
        let w = build_analog_weights(&[theta; 4], &cfg, OffsetRule::Contiguous).unwrap();
        let a = element_steering(theta, &cfg);
        // v_mp^H a_mp with a unit signal: √M for every (m, p)
        for m in 0..4 {
            for p in 0..4 {
                let base = (m * 4 + p) * 4;
                let y: Complex64 = w
                    .vector(m, p)
                    .iter()
                    .enumerate()
                    .map(|(i, v)| v.conj() * a[base + i])
                    .sum();
                assert_abs_diff_eq!(y.norm(), 2.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn noiseless_true_group_fully_coherent() {
        let cfg = cfg64();
        let scn = SourceScenario::noiseless(deg(41.345), 8).unwrap();
        let cands = [deg(-57.0777), deg(-19.84), deg(9.24), deg(41.345)];
        let w = build_analog_weights(&cands, &cfg, OffsetRule::Contiguous).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let slot = synthesize_stage2_slot(&scn, &w, &cfg, 2, &mut rng).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = synthesize_elements(&scn, &cfg, &mut rng);
        for col in 0..8 {
            let s = x[(0, col)].norm();
            assert_abs_diff_eq!(slot.samples[(3, col)].norm(), 4.0 * 2.0 * s, epsilon = 1e-9);
        }
    }

    #[test]
    fn stage2_noise_variance_bookkeeping() {
        let cfg = cfg64();
        let scn = SourceScenario::new(deg(41.345), -3.0, 100_000).unwrap().muted();
        let cands = [deg(-57.0777), deg(-19.84), deg(9.24), deg(41.345)];
        let w = build_analog_weights(&cands, &cfg, OffsetRule::Contiguous).unwrap();
        let slot = synthesize_stage2_slot(&scn, &w, &cfg, 2, &mut ChaCha8Rng::seed_from_u64(8)).unwrap();
        let expected = 4.0 * scn.noise_variance();
        for m in 0..4 {
            let p = slot.samples.row(m).iter().map(|z| z.norm_sqr()).sum::<f64>() / 1e5;
            assert!((p / expected - 1.0).abs() < 0.02, "group {m}: {p} vs {expected}");
        }
    }

    #[test]
    fn stage2_rejects_foreign_weights() {
        let cfg = cfg64();
        let other = ArrayConfig::half_wavelength(32, 4).unwrap();
        let scn = SourceScenario::noiseless(deg(10.0), 2).unwrap();
        let w = build_analog_weights(&[deg(10.0)], &other, OffsetRule::Contiguous).unwrap();
        assert!(matches!(
            synthesize_stage2_slot(&scn, &w, &cfg, 2, &mut ChaCha8Rng::seed_from_u64(0)),
            Err(DoaError::Shape(_))
        ));
    }

    #[test]
    fn printed_offset_loses_coherence() {
        let cfg = cfg64();
        let theta = deg(41.345);
        let scn = SourceScenario::noiseless(theta, 8).unwrap();
        let w = build_analog_weights(&[theta; 4], &cfg, OffsetRule::AsPrinted).unwrap();
        let slot = synthesize_stage2_slot(&scn, &w, &cfg, 2, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let x = synthesize_elements(&scn, &cfg, &mut ChaCha8Rng::seed_from_u64(3));
        let s = x[(0, 0)].norm();
        assert!(slot.samples[(0, 0)].norm() < 8.0 * s - 1e-3);
    }

    #[test]
    fn scan_slot_noiseless_peak() {
        let cfg = cfg64();
        let theta = deg(-23.5);
        let scn = SourceScenario::noiseless(theta, 4).unwrap();
        let slot = synthesize_scan_slot(&scn, theta, &cfg, 2, &mut ChaCha8Rng::seed_from_u64(4));
        let x = synthesize_elements(&scn, &cfg, &mut ChaCha8Rng::seed_from_u64(4));
        assert_eq!(slot.kind, SlotKind::Scan);
        for col in 0..4 {
            // K √M |s|
            assert_abs_diff_eq!(slot.samples[(0, col)].norm(), 32.0 * x[(0, col)].norm(), epsilon = 1e-9);
        }
    }

    #[test]
    fn binary_dump_layout() {
        let samples = DMatrix::from_row_slice(
            2,
            2,
            &[
                Complex64::new(1.0, -1.0),
                Complex64::new(0.5, 0.25),
                Complex64::new(-2.0, 3.0),
                Complex64::new(0.0, 1.0),
            ],
        );
        let slot = SlotData {
            samples,
            slot_index: 7,
            kind: SlotKind::Stage2,
        };
        let mut buf = Vec::new();
        slot.write_to(&mut buf).unwrap();
        assert_eq!(&buf[..4], b"HADS");
        assert_eq!(&buf[4..20], &[2, 0, 0, 0, 2, 0, 0, 0, 7, 0, 0, 0, 2, 0, 0, 0]);
        assert_eq!(buf.len(), 20 + 4 * 8);
        // row-major: second pair is (0, 1) = 0.5 + 0.25j
        assert_eq!(&buf[28..32], &0.5f32.to_le_bytes());
        assert_eq!(&buf[32..36], &0.25f32.to_le_bytes());
        assert_eq!(SlotData::read_from(&buf[..]).unwrap(), slot);
        assert!(SlotData::read_from(&b"HADX"[..]).is_err());
    }
}
