//! Rician fading around the deterministic block gains, water-filling and
//! ergodic capacity.
//!
//! The water level is shared by the whole ensemble by default: only the
//! average of the per-realization total powers is pinned to the budget.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::blockchannel::BlockChannel;
use crate::random::{complex_gaussian, task_rng};
use crate::{Error, Result};

const BISECTION_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct FadingEnsemble {
    num_modes: usize,
    num_subcarriers: usize,
    rician_k: f64,
    seed: u64,
    /// One gain vector per realization, indexed `mode_index * M + m`.
    realizations: Vec<Vec<Complex64>>,
}

impl FadingEnsemble {
    pub fn from_realizations(
        num_modes: usize,
        num_subcarriers: usize,
        realizations: Vec<Vec<Complex64>>,
    ) -> Result<Self> {
        if realizations.is_empty() {
            return Err(Error::InvalidArgument("an ensemble needs at least one realization".into()));
        }
        if realizations.iter().any(|r| r.len() != num_modes * num_subcarriers) {
            return Err(Error::Shape(format!("every realization must hold {} gains", num_modes * num_subcarriers)));
        }
        Ok(Self { num_modes, num_subcarriers, rician_k: f64::INFINITY, seed: 0, realizations })
    }

    pub fn num_modes(&self) -> usize {
        self.num_modes
    }
    pub fn num_subcarriers(&self) -> usize {
        self.num_subcarriers
    }
    pub fn rician_k(&self) -> f64 {
        self.rician_k
    }
    pub fn seed(&self) -> u64 {
        self.seed
    }
    pub fn len(&self) -> usize {
        self.realizations.len()
    }
    pub fn is_empty(&self) -> bool {
        self.realizations.is_empty()
    }
    pub fn realizations(&self) -> &[Vec<Complex64>] {
        &self.realizations
    }

    /// The same realizations restricted to one mode row (mode index, not l).
    pub fn mode_row(&self, mode_index: usize) -> Self {
        let mm = self.num_subcarriers;
        Self {
            num_modes: 1,
            realizations: self
                .realizations
                .iter()
                .map(|r| r[mode_index * mm..(mode_index + 1) * mm].to_vec())
                .collect(),
            ..self.clone()
        }
    }
}

/// h = √(K/(K+1))·h_det + √(1/(K+1))·|h_det|·g per block, g ~ CN(0, 1).
pub fn draw_rician(gains: &[Complex64], k_db: f64, count: usize, seed: u64) -> Result<Vec<Vec<Complex64>>> {
    if count == 0 {
        return Err(Error::InvalidArgument("realization count must be at least 1".into()));
    }
    let k = 10f64.powf(k_db / 10.0);
    let (los, scatter) = if k.is_infinite() { (1.0, 0.0) } else { ((k / (k + 1.0)).sqrt(), (1.0 / (k + 1.0)).sqrt()) };
    Ok((0..count)
        .into_par_iter()
        .map(|r| {
            let mut rng = task_rng(seed, r as u64);
            gains
                .iter()
                .map(|h| {
                    let g = complex_gaussian(&mut rng, 1.0);
                    h * los + g * (h.norm() * scatter)
                })
                .collect()
        })
        .collect())
}

pub fn draw_rician_ensemble(block: &BlockChannel, k_db: f64, count: usize, seed: u64) -> Result<FadingEnsemble> {
    let realizations = draw_rician(&block.gains(), k_db, count, seed)?;
    Ok(FadingEnsemble {
        num_modes: block.num_modes(),
        num_subcarriers: block.num_subcarriers(),
        rician_k: 10f64.powf(k_db / 10.0),
        seed,
        realizations,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct Allocation {
    pub powers: Vec<f64>,
    /// Σ log₂(1 + |h|²p/σ²) in bits.
    pub capacity: f64,
}

/// σ²/|h|² per block; infinite for a zero gain.
fn inverse_gains(gains: &[Complex64], noise: &[f64]) -> Vec<f64> {
    gains
        .iter()
        .zip(noise)
        .map(|(h, s2)| {
            let g = h.norm_sqr();
            if g > 0.0 {
                s2 / g
            } else {
                f64::INFINITY
            }
        })
        .collect()
}

fn fill(inverse: &[f64], level: f64) -> Allocation {
    let mut capacity = 0.0;
    let powers = inverse
        .iter()
        .map(|&inv| {
            let p = (level - inv).max(0.0);
            if p > 0.0 {
                capacity += (1.0 + p / inv).log2();
            }
            p
        })
        .collect();
    Allocation { powers, capacity }
}

/// p = (level − σ²/|h|²)⁺ for one realization.
pub fn waterfill(gains: &[Complex64], noise: &[f64], water_level: f64) -> Result<Allocation> {
    if gains.len() != noise.len() {
        return Err(Error::Shape(format!("{} gains with {} noise variances", gains.len(), noise.len())));
    }
    if !(water_level >= 0.0) {
        return Err(Error::InvalidArgument(format!("water level must be non-negative, got {water_level}")));
    }
    if let Some(s) = noise.iter().find(|s| !(**s > 0.0)) {
        return Err(Error::InvalidArgument(format!("noise variance must be positive, got {s}")));
    }
    Ok(fill(&inverse_gains(gains, noise), water_level))
}

fn total_power(inverse: &[f64], level: f64) -> f64 {
    inverse.iter().map(|&inv| (level - inv).max(0.0)).sum()
}

/// Mean over realizations of the total power at `level`, reduced in
/// realization order.
fn mean_total(inverses: &[Vec<f64>], level: f64) -> f64 {
    let totals: Vec<f64> = inverses.par_iter().map(|inv| total_power(inv, level)).collect();
    totals.iter().sum::<f64>() / totals.len() as f64
}

/// Bisection for the level whose mean total power equals `budget`.
fn bisect_level(inverses: &[Vec<f64>], budget: f64) -> Result<f64> {
    if !(budget > 0.0 && budget.is_finite()) {
        return Err(Error::InvalidArgument(format!("power budget must be positive, got {budget}")));
    }
    let finite_min =
        inverses.iter().flat_map(|r| r.iter().copied()).filter(|x| x.is_finite()).fold(f64::INFINITY, f64::min);
    if !finite_min.is_finite() {
        return Err(Error::Bracket("every channel gain is zero".into()));
    }
    let mut lo = finite_min;
    let mut hi = finite_min + budget;
    let mut expansions = 0;
    while mean_total(inverses, hi) < budget {
        hi = finite_min + 2.0 * (hi - finite_min);
        expansions += 1;
        if expansions > 2000 || !hi.is_finite() {
            return Err(Error::Bracket(format!("no level reaches mean power {budget}")));
        }
    }
    let mut resolved = false;
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            // bracket is down to adjacent floats; nothing closer exists
            resolved = true;
            break;
        }
        if mean_total(inverses, mid) < budget {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let level = 0.5 * (lo + hi);
    let achieved = mean_total(inverses, level);
    if !resolved && (achieved - budget).abs() > BISECTION_TOLERANCE * budget {
        return Err(Error::Bracket(format!("bisection stalled at mean power {achieved} for budget {budget}")));
    }
    Ok(level)
}

fn ensemble_inverses(ensemble: &FadingEnsemble, noise_variance: f64) -> Result<Vec<Vec<f64>>> {
    if !(noise_variance > 0.0) {
        return Err(Error::InvalidArgument(format!("noise variance must be positive, got {noise_variance}")));
    }
    Ok(ensemble
        .realizations
        .par_iter()
        .map(|r| {
            r.iter().map(|h| if h.norm_sqr() > 0.0 { noise_variance / h.norm_sqr() } else { f64::INFINITY }).collect()
        })
        .collect())
}

/// Ensemble-wide water level: mean total power over realizations equals
/// `budget` to a relative 1e−9.
pub fn find_water_level(ensemble: &FadingEnsemble, noise_variance: f64, budget: f64) -> Result<f64> {
    bisect_level(&ensemble_inverses(ensemble, noise_variance)?, budget)
}

/// Water level for a single gain vector with total power `budget`.
pub fn find_instantaneous_level(gains: &[Complex64], noise: &[f64], budget: f64) -> Result<f64> {
    if gains.len() != noise.len() {
        return Err(Error::Shape(format!("{} gains with {} noise variances", gains.len(), noise.len())));
    }
    bisect_level(&[inverse_gains(gains, noise)], budget)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum WaterLevelMode {
    /// One level for all realizations, average power constrained.
    #[default]
    Ensemble,
    /// Each realization water-filled to the full budget on its own.
    PerRealization,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PowerAllocation {
    /// One power vector per realization, indexed like the gains.
    pub powers: Vec<Vec<f64>>,
    /// Shared level in ensemble mode, one per realization otherwise.
    pub water_levels: Vec<f64>,
    pub budget: f64,
    /// Per-realization capacity in bits.
    pub capacities: Vec<f64>,
}

impl PowerAllocation {
    /// Mean over realizations of the per-realization total power.
    pub fn mean_total_power(&self) -> f64 {
        self.powers.iter().map(|p| p.iter().sum::<f64>()).sum::<f64>() / self.powers.len() as f64
    }

    /// Mean power of one block across realizations.
    pub fn mean_block_power(&self, index: usize) -> f64 {
        self.powers.iter().map(|p| p[index]).sum::<f64>() / self.powers.len() as f64
    }
}

pub fn allocate(
    ensemble: &FadingEnsemble,
    noise_variance: f64,
    budget: f64,
    mode: WaterLevelMode,
) -> Result<PowerAllocation> {
    let inverses = ensemble_inverses(ensemble, noise_variance)?;
    let levels = match mode {
        WaterLevelMode::Ensemble => vec![bisect_level(&inverses, budget)?],
        WaterLevelMode::PerRealization => inverses
            .par_iter()
            .map(|inv| bisect_level(std::slice::from_ref(inv), budget))
            .collect::<Result<Vec<_>>>()?,
    };
    let fills: Vec<Allocation> = inverses
        .par_iter()
        .enumerate()
        .map(|(i, inv)| fill(inv, levels[if levels.len() == 1 { 0 } else { i }]))
        .collect();
    let (powers, capacities) = fills.into_iter().map(|a| (a.powers, a.capacity)).unzip();
    Ok(PowerAllocation { powers, water_levels: levels, budget, capacities })
}

/// Mean with its Monte Carlo standard error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
}

impl Estimate {
    pub fn from_samples(samples: &[f64]) -> Self {
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let stderr = if samples.len() > 1 {
            (samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt()
        } else {
            0.0
        };
        Self { mean, stderr }
    }
}

/// Ensemble mean of Σ_l Σ_m log₂(1 + |h|²p/σ²), bits per HODM symbol.
pub fn ergodic_capacity_hodm(
    ensemble: &FadingEnsemble,
    noise_variance: f64,
    budget: f64,
    mode: WaterLevelMode,
) -> Result<Estimate> {
    Ok(Estimate::from_samples(&allocate(ensemble, noise_variance, budget, mode)?.capacities))
}

/// Water-filling over the M subcarrier gains of a single-mode ensemble,
/// bits per OFDM symbol.
pub fn ergodic_capacity_ofdm(
    subcarriers: &FadingEnsemble,
    noise_variance: f64,
    budget: f64,
    mode: WaterLevelMode,
) -> Result<Estimate> {
    if subcarriers.num_modes() != 1 {
        return Err(Error::Shape(format!("OFDM baseline expects one mode row, got {}", subcarriers.num_modes())));
    }
    ergodic_capacity_hodm(subcarriers, noise_variance, budget, mode)
}
