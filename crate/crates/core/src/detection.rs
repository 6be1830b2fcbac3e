//! Zero-forcing detection of one OAM mode across its M subcarriers when
//! the receiver only knows H_l + ρΩ_l.
//!
//! Expectations over the error matrix Ω are Monte Carlo averages. Draws are
//! split into fixed-size chunks, each with its own seeded stream, and the
//! chunk sums are reduced in order, so results do not depend on the thread
//! count.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;

use crate::random::{complex_gaussian, task_rng};
use crate::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

const SINGULAR_TOLERANCE: f64 = 1e-15;
const CHUNK: usize = 250;

/// Which entries of Ω are random.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ErrorStructure {
    /// One independent error per subcarrier gain.
    #[default]
    Diagonal,
    /// Every entry of the M×M matrix independent.
    Full,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CeeModel {
    rho: f64,
    structure: ErrorStructure,
}

impl CeeModel {
    pub fn new(rho: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&rho) {
            return Err(Error::InvalidArgument(format!("estimation accuracy rho must be in [0, 1), got {rho}")));
        }
        Ok(Self { rho, structure: ErrorStructure::Diagonal })
    }

    pub fn perfect() -> Self {
        Self { rho: 0.0, structure: ErrorStructure::Diagonal }
    }

    pub fn with_structure(self, structure: ErrorStructure) -> Self {
        Self { structure, ..self }
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }
    pub fn structure(&self) -> ErrorStructure {
        self.structure
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MonteCarlo {
    pub draws: usize,
    pub seed: u64,
}

impl Default for MonteCarlo {
    fn default() -> Self {
        Self { draws: 10_000, seed: 0 }
    }
}

impl MonteCarlo {
    fn chunks(&self) -> Vec<(u64, usize)> {
        let full = self.draws / CHUNK;
        let mut out: Vec<(u64, usize)> = (0..full).map(|c| (c as u64, CHUNK)).collect();
        if !self.draws.is_multiple_of(CHUNK) {
            out.push((full as u64, self.draws % CHUNK));
        }
        out
    }
}

pub fn draw_error_matrix<R: Rng + ?Sized>(size: usize, structure: ErrorStructure, rng: &mut R) -> CMatrix {
    match structure {
        ErrorStructure::Diagonal => {
            CMatrix::from_diagonal(&CVector::from_iterator(size, (0..size).map(|_| complex_gaussian(rng, 1.0))))
        }
        ErrorStructure::Full => CMatrix::from_fn(size, size, |_, _| complex_gaussian(rng, 1.0)),
    }
}

fn check_channel(h: &[Complex64]) -> Result<()> {
    if h.is_empty() {
        return Err(Error::Shape("empty channel".into()));
    }
    match h.iter().position(|x| x.norm() < SINGULAR_TOLERANCE) {
        Some(index) => Err(Error::SingularChannel { index, magnitude: h[index].norm() }),
        None => Ok(()),
    }
}

fn check_powers(signal_power: f64, noise_power: f64) -> Result<()> {
    if !(signal_power >= 0.0 && noise_power > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "need signal power >= 0 and noise power > 0, got {signal_power} and {noise_power}"
        )));
    }
    Ok(())
}

/// Linearized ZF estimate H⁻¹(I − ρΩH⁻¹)y, which for y = Hs + w equals
/// s + H⁻¹w − ρH⁻¹Ωs − ρH⁻¹ΩH⁻¹w.
pub fn zf_estimate(h: &[Complex64], cee: &CeeModel, omega: &CMatrix, y: &CVector) -> Result<CVector> {
    check_channel(h)?;
    let mm = h.len();
    if omega.shape() != (mm, mm) || y.len() != mm {
        return Err(Error::Shape(format!(
            "channel of length {mm} with {:?} error and {} samples",
            omega.shape(),
            y.len()
        )));
    }
    let hinv_y = CVector::from_iterator(mm, y.iter().zip(h).map(|(a, b)| a / b));
    let inner = y - omega * hinv_y * Complex64::new(cee.rho, 0.0);
    Ok(CVector::from_iterator(mm, inner.iter().zip(h).map(|(a, b)| a / b)))
}

/// Exact ZF with the erroneous estimate, (H + ρΩ)⁻¹y.
pub fn zf_estimate_exact(h: &[Complex64], cee: &CeeModel, omega: &CMatrix, y: &CVector) -> Result<CVector> {
    check_channel(h)?;
    let mm = h.len();
    if omega.shape() != (mm, mm) || y.len() != mm {
        return Err(Error::Shape(format!(
            "channel of length {mm} with {:?} error and {} samples",
            omega.shape(),
            y.len()
        )));
    }
    let estimate = CMatrix::from_diagonal(&CVector::from_column_slice(h)) + omega * Complex64::new(cee.rho, 0.0);
    estimate.lu().solve(y).ok_or(Error::SingularChannel { index: 0, magnitude: 0.0 })
}

/// Covariance of the post-ZF noise H⁻¹ŵ,
///
/// H⁻¹ E[ww^H + ρ²ΩH⁻¹ŵŵ^H H^{−H}Ω^H + ρ²Ωss^HΩ^H] H^{−H},
///
/// with ŵ = w − ρΩs − ρΩH⁻¹w and s, w, Ω drawn jointly. For the diagonal
/// expectation this equals the bracket times (H^H H)⁻¹; sandwiching keeps
/// the finite-sample estimate Hermitian.
pub fn effective_noise_covariance(
    h: &[Complex64],
    cee: &CeeModel,
    signal_power: f64,
    noise_power: f64,
    mc: &MonteCarlo,
) -> Result<CMatrix> {
    check_channel(h)?;
    check_powers(signal_power, noise_power)?;
    let mm = h.len();
    let rho = cee.rho;
    let mut bracket = CMatrix::from_diagonal_element(mm, mm, Complex64::new(noise_power, 0.0));
    if rho > 0.0 && mc.draws > 0 {
        let partials: Vec<CMatrix> = mc
            .chunks()
            .into_par_iter()
            .map(|(stream, count)| {
                let mut rng = task_rng(mc.seed, stream);
                let mut acc = CMatrix::zeros(mm, mm);
                for _ in 0..count {
                    let omega = draw_error_matrix(mm, cee.structure, &mut rng);
                    let s = CVector::from_iterator(mm, (0..mm).map(|_| complex_gaussian(&mut rng, signal_power)));
                    let w = CVector::from_iterator(mm, (0..mm).map(|_| complex_gaussian(&mut rng, noise_power)));
                    let hinv_w = CVector::from_iterator(mm, w.iter().zip(h).map(|(a, b)| a / b));
                    let r = Complex64::new(rho, 0.0);
                    let w_hat = &w - (&omega * &s) * r - (&omega * &hinv_w) * r;
                    let hinv_w_hat = CVector::from_iterator(mm, w_hat.iter().zip(h).map(|(a, b)| a / b));
                    let a = &omega * hinv_w_hat;
                    let b = &omega * &s;
                    acc += &a * a.adjoint() + &b * b.adjoint();
                }
                acc
            })
            .collect();
        let mut sum = CMatrix::zeros(mm, mm);
        for p in partials {
            sum += p;
        }
        bracket += sum * Complex64::new(rho * rho / mc.draws as f64, 0.0);
    }
    let hinv = CMatrix::from_diagonal(&CVector::from_iterator(mm, h.iter().map(|x| x.inv())));
    Ok(&hinv * bracket * hinv.adjoint())
}

/// Per-draw traces of ΩΩ^H and ΩH⁻¹H^{−H}Ω^H, plain and weighted by
/// |h_m|² (the H^H H factor of the loss numerator).
#[derive(Clone, Copy, Debug, Default)]
struct ErrorMoments {
    signal: f64,
    noise: f64,
    signal_weighted: f64,
    noise_weighted: f64,
}

fn error_moments(h: &[Complex64], structure: ErrorStructure, mut rng: impl Rng) -> ErrorMoments {
    let mm = h.len();
    let mut out = ErrorMoments::default();
    let omega = draw_error_matrix(mm, structure, &mut rng);
    for r in 0..mm {
        let hr = h[r].norm_sqr();
        for c in 0..mm {
            let e = omega[(r, c)].norm_sqr();
            if e == 0.0 {
                continue;
            }
            let ni = e / h[c].norm_sqr();
            out.signal += e;
            out.noise += ni;
            out.signal_weighted += hr * e;
            out.noise_weighted += hr * ni;
        }
    }
    out
}

/// Chunk-wise sums of [`ErrorMoments`], in chunk order.
fn moment_chunks(h: &[Complex64], cee: &CeeModel, mc: &MonteCarlo) -> Vec<(usize, ErrorMoments)> {
    mc.chunks()
        .into_par_iter()
        .map(|(stream, count)| {
            let mut rng = task_rng(mc.seed, stream);
            let mut acc = ErrorMoments::default();
            for _ in 0..count {
                let e = error_moments(h, cee.structure, &mut rng);
                acc.signal += e.signal;
                acc.noise += e.noise;
                acc.signal_weighted += e.signal_weighted;
                acc.noise_weighted += e.noise_weighted;
            }
            (count, acc)
        })
        .collect()
}

fn gamma_imperfect(h: &[Complex64], rho: f64, p: f64, s2: f64, moments: &ErrorMoments, draws: f64) -> f64 {
    let mm = h.len() as f64;
    let gain: f64 = h.iter().map(|x| x.norm_sqr()).sum();
    let a = (p * moments.signal + s2 * moments.noise) / draws;
    p * gain / (mm * s2 + rho * rho * a)
}

/// γ_l = tr(E[ss^H]H^H H) / tr(E[ww^H + ρ²Ωss^HΩ^H + ρ²ΩH⁻¹ww^H H^{−H}Ω^H]).
pub fn received_snr(
    h: &[Complex64],
    cee: &CeeModel,
    signal_power: f64,
    noise_power: f64,
    mc: &MonteCarlo,
) -> Result<f64> {
    check_channel(h)?;
    check_powers(signal_power, noise_power)?;
    if cee.rho == 0.0 || mc.draws == 0 {
        return Ok(gamma_imperfect(h, 0.0, signal_power, noise_power, &ErrorMoments::default(), 1.0));
    }
    let total = sum_moments(&moment_chunks(h, cee, mc));
    Ok(gamma_imperfect(h, cee.rho, signal_power, noise_power, &total, mc.draws as f64))
}

fn sum_moments(chunks: &[(usize, ErrorMoments)]) -> ErrorMoments {
    chunks.iter().fold(ErrorMoments::default(), |mut acc, (_, e)| {
        acc.signal += e.signal;
        acc.noise += e.noise;
        acc.signal_weighted += e.signal_weighted;
        acc.noise_weighted += e.noise_weighted;
        acc
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SnrLoss {
    /// Received SNR with perfect estimation.
    pub gamma_perfect: f64,
    /// Received SNR under the error model.
    pub gamma_imperfect: f64,
    /// The linear loss expression
    /// ρ² tr(H^H H E[ss^H] E[A]) / tr(E[ww^H] E[ww^H + ρ²A]),
    /// A = Ωss^HΩ^H + ΩH⁻¹ww^H H^{−H}Ω^H.
    pub linear: f64,
    /// 10·log10(γ_perfect / γ_imperfect).
    pub db: f64,
    /// Standard error of `db` from batch means.
    pub db_stderr: f64,
}

pub fn snr_loss(
    h: &[Complex64],
    cee: &CeeModel,
    signal_power: f64,
    noise_power: f64,
    mc: &MonteCarlo,
) -> Result<SnrLoss> {
    check_channel(h)?;
    check_powers(signal_power, noise_power)?;
    let gamma_perfect = gamma_imperfect(h, 0.0, signal_power, noise_power, &ErrorMoments::default(), 1.0);
    if cee.rho == 0.0 || mc.draws == 0 {
        return Ok(SnrLoss { gamma_perfect, gamma_imperfect: gamma_perfect, linear: 0.0, db: 0.0, db_stderr: 0.0 });
    }
    let (rho, p, s2) = (cee.rho, signal_power, noise_power);
    let mm = h.len() as f64;
    let chunks = moment_chunks(h, cee, mc);
    let total = sum_moments(&chunks);
    let draws = mc.draws as f64;
    let gamma_i = gamma_imperfect(h, rho, p, s2, &total, draws);

    let weighted = (p * total.signal_weighted + s2 * total.noise_weighted) / draws;
    let plain = (p * total.signal + s2 * total.noise) / draws;
    let linear = rho * rho * p * weighted / (s2 * (mm * s2 + rho * rho * plain));

    let db_of = |e: &ErrorMoments, n: f64| 10.0 * (gamma_perfect / gamma_imperfect(h, rho, p, s2, e, n)).log10();
    let batch: Vec<f64> = chunks.iter().map(|(n, e)| db_of(e, *n as f64)).collect();
    let db_stderr = if batch.len() > 1 {
        let k = batch.len() as f64;
        let mean = batch.iter().sum::<f64>() / k;
        (batch.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1.0) / k).sqrt()
    } else {
        0.0
    };
    Ok(SnrLoss {
        gamma_perfect,
        gamma_imperfect: gamma_i,
        linear,
        db: 10.0 * (gamma_perfect / gamma_i).log10(),
        db_stderr,
    })
}
