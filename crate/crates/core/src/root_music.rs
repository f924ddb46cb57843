//! First-stage estimator on the `K`-channel virtual array.
//!
//! Root-MUSIC runs on the bare virtual steering `a_M(ϕ)` with `ϕ = Mφ`. The
//! `2K - 2` root phases are screened by digital phase alignment, and the
//! surviving phase is unfolded into the `M` grating-lobe candidates.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::array::{bare_virtual_steering, wrap_phase, Angle, ArrayConfig, SpatialPhase};
use crate::error::{DoaError, Result};
use crate::receiver::SlotData;

const HERMITIAN_TOL: f64 = 1e-10;
const BOUNDARY_TOL: f64 = 1e-9;

/// Sample covariance `R = (1/L) Σ y(n) y(n)^H`.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceMatrix(DMatrix<Complex64>);

impl CovarianceMatrix {
    /// Wraps an arbitrary square matrix; Hermitian symmetry is checked by [`noise_subspace`].
    pub fn from_matrix(m: DMatrix<Complex64>) -> Result<Self> {
        if !m.is_square() || m.nrows() == 0 {
            return Err(DoaError::Shape(format!(
                "covariance must be square, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        Ok(CovarianceMatrix(m))
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    /// Largest `|R_ij - conj(R_ji)|`.
    pub fn hermitian_defect(&self) -> f64 {
        let m = &self.0;
        let n = m.nrows();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in i..n {
                worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
            }
        }
        worst
    }
}

pub fn sample_covariance(slot: &SlotData) -> Result<CovarianceMatrix> {
    let l = slot.snapshots();
    if l == 0 || slot.channels() == 0 {
        return Err(DoaError::EmptySlot);
    }
    let y = &slot.samples;
    let r = (y * y.adjoint()).unscale(l as f64);
    Ok(CovarianceMatrix(r))
}

/// Orthonormal basis of the noise subspace, with the eigenvalues it spans.
#[derive(Debug, Clone)]
pub struct NoiseSubspace {
    basis: DMatrix<Complex64>,
    eigenvalues: Vec<f64>,
}

impl NoiseSubspace {
    pub fn basis(&self) -> &DMatrix<Complex64> {
        &self.basis
    }

    /// Noise eigenvalues, ascending.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Projector `E_N E_N^H`.
    pub fn projector(&self) -> DMatrix<Complex64> {
        &self.basis * self.basis.adjoint()
    }

    pub fn array_len(&self) -> usize {
        self.basis.nrows()
    }
}

/// Eigenvectors of the `K - n_sources` smallest eigenvalues of a Hermitian `R`.
pub fn noise_subspace(r: &CovarianceMatrix, n_sources: usize) -> Result<NoiseSubspace> {
    let k = r.dim();
    if n_sources == 0 || n_sources >= k {
        return Err(DoaError::Shape(format!(
            "need 0 < n_sources < K, got {n_sources} with K = {k}"
        )));
    }
    let scale = r.0.iter().map(|z| z.norm()).fold(1.0, f64::max);
    let defect = r.hermitian_defect();
    if defect > HERMITIAN_TOL * scale {
        return Err(DoaError::NotHermitian(defect));
    }
    // symmetrize away round-off before the Hermitian solver
    let h = (&r.0 + r.0.adjoint()).unscale(2.0);
    let eig = SymmetricEigen::try_new(h, 1e-15, 10_000).ok_or(DoaError::NoConvergence)?;
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let keep = &order[..k - n_sources];
    let basis = DMatrix::from_fn(k, keep.len(), |i, j| eig.eigenvectors[(i, keep[j])]);
    Ok(NoiseSubspace {
        basis,
        eigenvalues: keep.iter().map(|&i| eig.eigenvalues[i]).collect(),
    })
}

/// Complex polynomial with coefficients in ascending powers of `z`.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial(pub Vec<Complex64>);

impl Polynomial {
    pub fn coeffs(&self) -> &[Complex64] {
        &self.0
    }

    /// Horner evaluation.
    pub fn eval(&self, z: Complex64) -> Complex64 {
        self.0
            .iter()
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c)
    }

    fn derivative_at(&self, z: Complex64) -> Complex64 {
        self.0
            .iter()
            .enumerate()
            .skip(1)
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, (n, &c)| acc * z + c * n as f64)
    }
}

/// `z^{K-1} a_M(z)^H C a_M(z)` for `C = E_N E_N^H`; coefficient `K - 1 + l`
/// is the sum of the `l`-th diagonal of `C` (`l = j - i`).
pub fn music_polynomial(ns: &NoiseSubspace) -> Polynomial {
    let c = ns.projector();
    let k = c.nrows();
    let mut coeffs = vec![Complex64::new(0.0, 0.0); 2 * k - 1];
    for i in 0..k {
        for j in 0..k {
            coeffs[k - 1 + j - i] += c[(i, j)];
        }
    }
    Polynomial(coeffs)
}

fn newton_polish(p: &Polynomial, mut z: Complex64) -> Complex64 {
    let mut best = p.eval(z).norm();
    for _ in 0..3 {
        let d = p.derivative_at(z);
        if d.norm() == 0.0 {
            break;
        }
        let next = z - p.eval(z) / d;
        let val = p.eval(next).norm();
        if val.is_nan() || val >= best {
            break;
        }
        best = val;
        z = next;
    }
    z
}

/// All roots via the eigenvalues of the companion matrix, Newton-polished.
///
/// Negligible leading coefficients (below `1e-12` of the largest) are
/// dropped first, so the root count can be smaller than the nominal degree.
pub fn polynomial_roots(p: &Polynomial) -> Result<Vec<Complex64>> {
    let max = p.0.iter().map(|c| c.norm()).fold(0.0, f64::max);
    if max == 0.0 {
        return Err(DoaError::DegeneratePolynomial);
    }
    let mut hi = p.0.len();
    while p.0[hi - 1].norm() < 1e-12 * max {
        hi -= 1;
    }
    let trimmed = Polynomial(p.0[..hi].to_vec());
    // exact zero roots
    let lo = trimmed.0.iter().take_while(|c| c.norm() == 0.0).count();
    let reduced = &trimmed.0[lo..];
    let degree = reduced.len() - 1;
    let mut roots = vec![Complex64::new(0.0, 0.0); lo];
    if degree == 0 {
        return Ok(roots);
    }
    let lead = reduced[degree];
    let mut companion = DMatrix::<Complex64>::zeros(degree, degree);
    for i in 1..degree {
        companion[(i, i - 1)] = Complex64::new(1.0, 0.0);
    }
    for i in 0..degree {
        companion[(i, degree - 1)] = -reduced[i] / lead;
    }
    let schur = companion.try_schur(1e-15, 10_000).ok_or(DoaError::NoConvergence)?;
    let eig = schur.eigenvalues().ok_or(DoaError::NoConvergence)?;
    roots.extend(eig.iter().map(|&z| newton_polish(&trimmed, z)));
    Ok(roots)
}

/// Rule for reducing the root phases to the single base phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RootSelector {
    /// Maximum digitally phase-aligned power over the stage-1 slot.
    #[default]
    Dpa,
    /// Root closest to the unit circle (classic Root-MUSIC pick).
    NearestUnitCircle,
}

/// Average power of `(1/√K) a_M(ϕ)^H y(n)` over the slot.
pub fn dpa_power(phase: SpatialPhase, slot: &SlotData) -> f64 {
    let k = slot.channels();
    let a = bare_virtual_steering(phase, k);
    let l = slot.snapshots();
    let mut total = 0.0;
    for col in 0..l {
        let y: Complex64 = a
            .iter()
            .enumerate()
            .map(|(i, w)| w.conj() * slot.samples[(i, col)])
            .sum();
        total += y.norm_sqr();
    }
    total / (k as f64 * l as f64)
}

fn unit_circle_distance(z: Complex64) -> f64 {
    (z.norm() - 1.0).abs()
}

/// Screens roots by digital phase alignment; ties fall back to the root
/// nearest the unit circle, then to the smaller `|ϕ|`.
pub fn dpa_select(roots: &[Complex64], slot: &SlotData) -> Result<SpatialPhase> {
    if roots.is_empty() {
        return Err(DoaError::Shape("no roots to select from".into()));
    }
    let scored: Vec<(f64, Complex64)> = roots
        .iter()
        .map(|&z| (dpa_power(SpatialPhase(z.arg()), slot), z))
        .collect();
    let top = scored.iter().map(|s| s.0).fold(0.0, f64::max);
    let tol = 1e-12 * top.max(f64::MIN_POSITIVE);
    let best = scored
        .iter()
        .copied()
        .reduce(|best, cand| {
            if cand.0 > best.0 + tol {
                return cand;
            }
            if cand.0 < best.0 - tol {
                return best;
            }
            let (db, dc) = (unit_circle_distance(best.1), unit_circle_distance(cand.1));
            if dc < db || (dc == db && cand.1.arg().abs() < best.1.arg().abs()) {
                cand
            } else {
                best
            }
        })
        .unwrap();
    Ok(SpatialPhase(best.1.arg()).wrapped())
}

fn nearest_unit_circle(roots: &[Complex64]) -> Result<SpatialPhase> {
    roots
        .iter()
        .min_by(|a, b| unit_circle_distance(**a).total_cmp(&unit_circle_distance(**b)))
        .map(|z| SpatialPhase(z.arg()).wrapped())
        .ok_or_else(|| DoaError::Shape("no roots to select from".into()))
}

/// Base phase, its roots, and the ambiguous angles it unfolds to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSet {
    /// Subarray-level phase `ϕ̂ = Mφ̂`, wrapped into `(-π, π]`.
    pub base_phase: SpatialPhase,
    pub roots: Vec<Complex64>,
    /// Ascending.
    pub ambiguous_angles: Vec<Angle>,
}

impl CandidateSet {
    /// `(phase, magnitude)` of every polynomial root.
    pub fn root_phases(&self) -> Vec<(SpatialPhase, f64)> {
        self.roots.iter().map(|z| (SpatialPhase(z.arg()), z.norm())).collect()
    }
}

/// Every angle whose subarray phase wraps to `base`:
/// `sin θ_i = (ϕ + 2πi) / (2π M d/λ)` over all integers `i` with `|sin θ_i| ≤ 1`.
pub fn expand_ambiguous(base: SpatialPhase, cfg: &ArrayConfig) -> CandidateSet {
    let base = base.wrapped();
    let span = 2.0 * PI * cfg.subarray_size() as f64 * cfg.spacing_over_wavelength();
    let i_lo = ((-span - base.0) / (2.0 * PI)).floor() as i64 - 1;
    let i_hi = ((span - base.0) / (2.0 * PI)).ceil() as i64 + 1;
    let mut sines: Vec<f64> = (i_lo..=i_hi)
        .map(|i| (base.0 + 2.0 * PI * i as f64) / span)
        .filter(|s| s.abs() <= 1.0 + BOUNDARY_TOL)
        .map(|s| {
            if (s.abs() - 1.0).abs() <= BOUNDARY_TOL {
                s.signum()
            } else {
                s
            }
        })
        .collect();
    if sines.contains(&-1.0) {
        sines.retain(|&s| s != 1.0);
    }
    sines.sort_by(f64::total_cmp);
    CandidateSet {
        base_phase: base,
        roots: Vec::new(),
        ambiguous_angles: sines.into_iter().map(Angle::from_sine).collect(),
    }
}

/// Full first stage: covariance, noise subspace, polynomial roots, root selection, unfolding.
pub fn stage1_candidates(slot: &SlotData, cfg: &ArrayConfig, selector: RootSelector) -> Result<CandidateSet> {
    if slot.channels() != cfg.n_subarrays() {
        return Err(DoaError::Shape(format!(
            "stage-1 slot has {} channels, array has {} subarrays",
            slot.channels(),
            cfg.n_subarrays()
        )));
    }
    let r = sample_covariance(slot)?;
    let ns = noise_subspace(&r, 1)?;
    let roots = polynomial_roots(&music_polynomial(&ns))?;
    let base = match selector {
        RootSelector::Dpa => dpa_select(&roots, slot)?,
        RootSelector::NearestUnitCircle => nearest_unit_circle(&roots)?,
    };
    let mut set = expand_ambiguous(base, cfg);
    set.roots = roots;
    Ok(set)
}

/// Wrapped distance between two phases.
pub fn phase_distance(a: f64, b: f64) -> f64 {
    wrap_phase(a - b).abs()
}
