//! Closed-form per-(mode, subcarrier) block gains.
//!
//! After the 2D-FFT each block (l, m) sees a scalar gain. For the LoS path
//!
//! ```text
//! h_{l,m,LoS} = βλ_m N j^l e^{−j2πq/λ_m} J_l(2πr₁r₂/(λ_m q)) / (4πq),   q = √(D²+r₁²+r₂²)
//! ```
//!
//! and for a compensated reflection at offset o the same form with
//! q_d = √(q² + 4d²), the path coefficient R, j^{−l} and e^{+j2πlo/N} for odd
//! bounce counts, j^{l} and e^{−j2πlo/N} for even ones, and e^{−j2πmo/M} for
//! both. The j-powers are the ones the finite-N element sum converges to.

mod bessel;

pub use bessel::{bessel_j, MAX_ARGUMENT, MAX_ORDER};

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::geometry::{
    path_offsets, path_reflection_coefficient, DelayIndexing, FrameTiming, Parity, PathSet, ReflectionPath, UcaGeometry,
};
use crate::modem::ModeSet;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GainOptions {
    /// Keep the 4π of the free-space amplitude in the closed form. Dropping
    /// it scales every gain by 4π.
    pub include_4pi: bool,
}

impl Default for GainOptions {
    fn default() -> Self {
        Self { include_4pi: true }
    }
}

impl GainOptions {
    fn denominator(&self) -> f64 {
        if self.include_4pi {
            4.0 * PI
        } else {
            1.0
        }
    }
}

fn j_power(p: i64) -> Complex64 {
    match p.rem_euclid(4) {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, 1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, -1.0),
    }
}

fn bessel_order(l: i64) -> Result<i32> {
    i32::try_from(l).map_err(|_| Error::BesselRange { order: i32::MAX, argument: 0.0 })
}

/// Common factor βλN e^{−j2πq/λ} J_l(2πr₁r₂/(λq)) / (4πq).
fn ring_term(geom: &UcaGeometry, q: f64, l: i64, wavelength: f64, opts: GainOptions) -> Result<Complex64> {
    let z = 2.0 * PI * geom.radius_tx() * geom.radius_rx() / (wavelength * q);
    let amp = geom.attenuation() * wavelength * geom.num_elements() as f64 / (opts.denominator() * q);
    let j = bessel_j(bessel_order(l)?, z)?;
    Ok(Complex64::from_polar(amp * j, -2.0 * PI * q / wavelength))
}

pub fn los_block_gain(geom: &UcaGeometry, l: i64, wavelength: f64, opts: GainOptions) -> Result<Complex64> {
    Ok(j_power(l) * ring_term(geom, geom.reference_distance(), l, wavelength, opts)?)
}

/// Post-compensation block gain of one reflection path with path
/// coefficient `coefficient` at integer offset `offset`.
#[allow(clippy::too_many_arguments)]
pub fn reflection_path_block_gain(
    geom: &UcaGeometry,
    path: &ReflectionPath,
    coefficient: f64,
    l: i64,
    m: usize,
    num_subcarriers: usize,
    wavelength: f64,
    offset: i64,
    opts: GainOptions,
) -> Result<Complex64> {
    let qd = geom.reflected_reference_distance(path.total_distance());
    let nn = geom.num_elements() as f64;
    let mode_phase = 2.0 * PI * (l * offset) as f64 / nn;
    let (jp, mode_delay) = match path.parity() {
        Parity::Odd => (j_power(-l), mode_phase),
        Parity::Even => (j_power(l), -mode_phase),
    };
    let sub_delay = -2.0 * PI * (m as i64 * offset) as f64 / num_subcarriers as f64;
    Ok(jp
        * coefficient
        * ring_term(geom, qd, l, wavelength, opts)?
        * Complex64::from_polar(1.0, mode_delay + sub_delay))
}

/// Sum of the compensated reflection terms; `offsets` holds one integer
/// offset per reflection (negative values allowed).
#[allow(clippy::too_many_arguments)]
pub fn reflection_block_gain(
    geom: &UcaGeometry,
    paths: &PathSet,
    l: i64,
    m: usize,
    num_subcarriers: usize,
    wavelength: f64,
    offsets: &[i64],
    opts: GainOptions,
) -> Result<Complex64> {
    if offsets.len() != paths.reflections.len() {
        return Err(Error::Shape(format!(
            "{} offsets for {} reflection paths",
            offsets.len(),
            paths.reflections.len()
        )));
    }
    let mut acc = Complex64::new(0.0, 0.0);
    for (path, &o) in paths.reflections.iter().zip(offsets) {
        let r = path_reflection_coefficient(geom, path)?;
        acc += reflection_path_block_gain(geom, path, r, l, m, num_subcarriers, wavelength, o, opts)?;
    }
    Ok(acc)
}

pub fn total_block_gain(
    geom: &UcaGeometry,
    paths: &PathSet,
    l: i64,
    m: usize,
    timing: &FrameTiming,
    indexing: DelayIndexing,
    opts: GainOptions,
) -> Result<Complex64> {
    let lam = timing.wavelength(m);
    let offsets = path_offsets(geom, paths, timing, indexing);
    let los = if paths.include_los { los_block_gain(geom, l, lam, opts)? } else { Complex64::new(0.0, 0.0) };
    Ok(los + reflection_block_gain(geom, paths, l, m, timing.num_subcarriers, lam, &offsets, opts)?)
}

/// Gain grid over (mode, subcarrier) with the LoS and reflection parts
/// kept apart.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockChannel {
    modes: ModeSet,
    num_subcarriers: usize,
    /// Indexed `mode_index * M + m`.
    los: Vec<Complex64>,
    reflection: Vec<Complex64>,
}

impl BlockChannel {
    pub fn compute(
        geom: &UcaGeometry,
        paths: &PathSet,
        timing: &FrameTiming,
        indexing: DelayIndexing,
        opts: GainOptions,
    ) -> Result<Self> {
        paths.validate_against(geom)?;
        let nn = geom.num_elements();
        let mm = timing.num_subcarriers;
        let modes = ModeSet::new(nn);
        let offsets = path_offsets(geom, paths, timing, indexing);
        let coefficients =
            paths.reflections.iter().map(|p| path_reflection_coefficient(geom, p)).collect::<Result<Vec<_>>>()?;

        let blocks: Vec<(Complex64, Complex64)> = (0..nn * mm)
            .into_par_iter()
            .map(|i| {
                let (l, m) = (modes.mode_at(i / mm), i % mm);
                let lam = timing.wavelength(m);
                let los =
                    if paths.include_los { los_block_gain(geom, l, lam, opts)? } else { Complex64::new(0.0, 0.0) };
                let mut refl = Complex64::new(0.0, 0.0);
                for ((p, &r), &o) in paths.reflections.iter().zip(&coefficients).zip(&offsets) {
                    refl += reflection_path_block_gain(geom, p, r, l, m, mm, lam, o, opts)?;
                }
                Ok((los, refl))
            })
            .collect::<Result<_>>()?;
        let (los, reflection) = blocks.into_iter().unzip();
        Ok(Self { modes, num_subcarriers: mm, los, reflection })
    }

    pub fn from_parts(
        num_modes: usize,
        num_subcarriers: usize,
        los: Vec<Complex64>,
        reflection: Vec<Complex64>,
    ) -> Result<Self> {
        let len = num_modes * num_subcarriers;
        if los.len() != len || reflection.len() != len {
            return Err(Error::Shape(format!("block parts must hold {len} entries")));
        }
        Ok(Self { modes: ModeSet::new(num_modes), num_subcarriers, los, reflection })
    }

    pub fn modes(&self) -> ModeSet {
        self.modes
    }
    pub fn num_modes(&self) -> usize {
        self.modes.len()
    }
    pub fn num_subcarriers(&self) -> usize {
        self.num_subcarriers
    }

    fn index(&self, l: i64, m: usize) -> usize {
        self.modes.index_of(l).expect("mode outside the block grid") * self.num_subcarriers + m
    }

    pub fn los(&self, l: i64, m: usize) -> Complex64 {
        self.los[self.index(l, m)]
    }
    pub fn reflection(&self, l: i64, m: usize) -> Complex64 {
        self.reflection[self.index(l, m)]
    }
    pub fn gain(&self, l: i64, m: usize) -> Complex64 {
        let i = self.index(l, m);
        self.los[i] + self.reflection[i]
    }

    /// All total gains, indexed `mode_index * M + m`.
    pub fn gains(&self) -> Vec<Complex64> {
        self.los.iter().zip(&self.reflection).map(|(a, b)| a + b).collect()
    }

    /// Total gains of mode l across subcarriers.
    pub fn row(&self, l: i64) -> Vec<Complex64> {
        (0..self.num_subcarriers).map(|m| self.gain(l, m)).collect()
    }
}
