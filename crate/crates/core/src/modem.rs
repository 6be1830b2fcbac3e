//! HODM frame chain: 2D-IFFT over (mode, subcarrier), cyclic prefix, the
//! multipath element channel with mode reversal on odd bounces, phase
//! compensation and the 2D-FFT back to blocks.
//!
//! Grids are stored row-major with the element/mode axis outermost. The
//! transmitter applies no scaling; the receiver divides by MN.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftDirection, FftPlanner};

use crate::geometry::{ElementChannel, FrameTiming, Parity, TapSource, UcaGeometry};
use crate::random::{complex_gaussian, task_rng};
use crate::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// The N mode indices ⌊(−N+2)/2⌋ ..= ⌊N/2⌋.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ModeSet {
    num_modes: usize,
}

impl ModeSet {
    pub fn new(num_modes: usize) -> Self {
        Self { num_modes }
    }
    pub fn len(&self) -> usize {
        self.num_modes
    }
    pub fn is_empty(&self) -> bool {
        self.num_modes == 0
    }
    pub fn lowest(&self) -> i64 {
        (2 - self.num_modes as i64).div_euclid(2)
    }
    pub fn highest(&self) -> i64 {
        (self.num_modes as i64).div_euclid(2)
    }
    pub fn modes(&self) -> impl Iterator<Item = i64> {
        self.lowest()..=self.highest()
    }
    pub fn contains(&self, l: i64) -> bool {
        (self.lowest()..=self.highest()).contains(&l)
    }
    pub fn index_of(&self, l: i64) -> Option<usize> {
        self.contains(l).then(|| (l - self.lowest()) as usize)
    }
    pub fn mode_at(&self, index: usize) -> i64 {
        self.lowest() + index as i64
    }
    /// DFT bin carrying mode l.
    pub fn bin_of(&self, l: i64) -> usize {
        l.rem_euclid(self.num_modes as i64) as usize
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SymbolGrid {
    modes: ModeSet,
    num_subcarriers: usize,
    /// Indexed `mode_index * M + m`.
    values: Vec<Complex64>,
}

impl SymbolGrid {
    pub fn zeros(num_modes: usize, num_subcarriers: usize) -> Self {
        Self { modes: ModeSet::new(num_modes), num_subcarriers, values: vec![ZERO; num_modes * num_subcarriers] }
    }

    pub fn from_fn(num_modes: usize, num_subcarriers: usize, mut f: impl FnMut(i64, usize) -> Complex64) -> Self {
        let modes = ModeSet::new(num_modes);
        let mut values = Vec::with_capacity(num_modes * num_subcarriers);
        for l in modes.modes() {
            for m in 0..num_subcarriers {
                values.push(f(l, m));
            }
        }
        Self { modes, num_subcarriers, values }
    }

    /// Unit-energy QPSK symbols from a seeded stream.
    pub fn random_qpsk(num_modes: usize, num_subcarriers: usize, seed: u64) -> Self {
        use rand::Rng;
        let mut rng = task_rng(seed, 0);
        let a = std::f64::consts::FRAC_1_SQRT_2;
        Self::from_fn(num_modes, num_subcarriers, |_, _| {
            let re = if rng.random::<bool>() { a } else { -a };
            let im = if rng.random::<bool>() { a } else { -a };
            Complex64::new(re, im)
        })
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
    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn get(&self, l: i64, m: usize) -> Complex64 {
        let i = self.modes.index_of(l).expect("mode outside the grid");
        self.values[i * self.num_subcarriers + m]
    }

    pub fn set(&mut self, l: i64, m: usize, value: Complex64) {
        let i = self.modes.index_of(l).expect("mode outside the grid");
        self.values[i * self.num_subcarriers + m] = value;
    }

    pub fn energy(&self) -> f64 {
        self.values.iter().map(|x| x.norm_sqr()).sum()
    }
}

/// Transmit samples per element, CP first then the M-sample body.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleFrame {
    num_elements: usize,
    body_len: usize,
    cp_length: usize,
    /// Indexed `n * (cp_length + body_len) + u`.
    samples: Vec<Complex64>,
}

impl SampleFrame {
    pub fn from_body(num_elements: usize, body_len: usize, body: Vec<Complex64>) -> Result<Self> {
        if body.len() != num_elements * body_len {
            return Err(Error::Shape(format!("{} samples for a {num_elements}x{body_len} frame", body.len())));
        }
        Ok(Self { num_elements, body_len, cp_length: 0, samples: body })
    }

    pub fn num_elements(&self) -> usize {
        self.num_elements
    }
    pub fn body_len(&self) -> usize {
        self.body_len
    }
    pub fn cp_length(&self) -> usize {
        self.cp_length
    }
    pub fn extended_len(&self) -> usize {
        self.cp_length + self.body_len
    }
    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    /// Body sample k of element n.
    pub fn body(&self, n: usize, k: usize) -> Complex64 {
        self.samples[n * self.extended_len() + self.cp_length + k]
    }

    /// Sample at u ∈ [−M_c, M) relative to the body start.
    pub fn at(&self, n: usize, u: i64) -> Complex64 {
        self.samples[(n * self.extended_len()) + (self.cp_length as i64 + u) as usize]
    }

    pub fn body_samples(&self) -> Vec<Complex64> {
        (0..self.num_elements)
            .flat_map(|n| (0..self.body_len).map(move |k| (n, k)))
            .map(|(n, k)| self.body(n, k))
            .collect()
    }

    pub fn energy(&self) -> f64 {
        self.body_samples().iter().map(|x| x.norm_sqr()).sum()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReceivedFrame {
    num_elements: usize,
    num_samples: usize,
    /// Indexed `v * M + k`.
    samples: Vec<Complex64>,
    noise_variance: f64,
}

impl ReceivedFrame {
    pub fn new(num_elements: usize, num_samples: usize, samples: Vec<Complex64>, noise_variance: f64) -> Result<Self> {
        if samples.len() != num_elements * num_samples {
            return Err(Error::Shape(format!("{} samples for a {num_elements}x{num_samples} frame", samples.len())));
        }
        Ok(Self { num_elements, num_samples, samples, noise_variance })
    }

    pub fn num_elements(&self) -> usize {
        self.num_elements
    }
    pub fn num_samples(&self) -> usize {
        self.num_samples
    }
    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }
    pub fn noise_variance(&self) -> f64 {
        self.noise_variance
    }
    pub fn get(&self, v: usize, k: usize) -> Complex64 {
        self.samples[v * self.num_samples + k]
    }
    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|x| x.norm_sqr()).sum()
    }
}

fn plan(len: usize, direction: FftDirection) -> Arc<dyn Fft<f64>> {
    FftPlanner::new().plan_fft(len, direction)
}

/// In-place unnormalized DFT along both axes of a rows x cols grid.
fn transform_2d(data: &mut [Complex64], rows: usize, cols: usize, direction: FftDirection) {
    transform_rows(data, cols, direction);
    let col_fft = plan(rows, direction);
    let mut column = vec![ZERO; rows];
    for c in 0..cols {
        for r in 0..rows {
            column[r] = data[r * cols + c];
        }
        col_fft.process(&mut column);
        for r in 0..rows {
            data[r * cols + c] = column[r];
        }
    }
}

/// In-place unnormalized DFT of every length-`cols` row.
fn transform_rows(data: &mut [Complex64], cols: usize, direction: FftDirection) {
    if cols == 0 {
        return;
    }
    plan(cols, direction).process(data);
}

/// X_{n,k} = Σ_l Σ_m s_{l,m} e^{j2πnl/N} e^{j2πmk/M}.
pub fn hodm_modulate(symbols: &SymbolGrid) -> SampleFrame {
    let (nn, mm) = (symbols.num_modes(), symbols.num_subcarriers());
    let modes = symbols.modes();
    let mut grid = vec![ZERO; nn * mm];
    for l in modes.modes() {
        let bin = modes.bin_of(l);
        for m in 0..mm {
            grid[bin * mm + m] = symbols.get(l, m);
        }
    }
    transform_2d(&mut grid, nn, mm, FftDirection::Inverse);
    SampleFrame { num_elements: nn, body_len: mm, cp_length: 0, samples: grid }
}

/// y_{l,m} = (1/MN) Σ_k Σ_v Y_{v,k} e^{−j2πvl/N} e^{−j2πmk/M}.
pub fn hodm_demodulate(received: &ReceivedFrame) -> SymbolGrid {
    let (nn, mm) = (received.num_elements, received.num_samples);
    let mut grid = received.samples.clone();
    transform_2d(&mut grid, nn, mm, FftDirection::Forward);
    let scale = 1.0 / (nn * mm) as f64;
    let modes = ModeSet::new(nn);
    SymbolGrid::from_fn(nn, mm, |l, m| grid[modes.bin_of(l) * mm + m] * scale)
}

/// Prepends the last `cp_length` body samples of every element.
pub fn add_cyclic_prefix(frame: &SampleFrame, cp_length: usize) -> Result<SampleFrame> {
    if cp_length >= frame.body_len && cp_length > 0 {
        return Err(Error::InvalidArgument(format!(
            "cyclic prefix of {cp_length} samples must be shorter than the {}-sample body",
            frame.body_len
        )));
    }
    let mm = frame.body_len;
    let mut samples = Vec::with_capacity(frame.num_elements * (cp_length + mm));
    for n in 0..frame.num_elements {
        samples.extend((mm - cp_length..mm).map(|k| frame.body(n, k)));
        samples.extend((0..mm).map(|k| frame.body(n, k)));
    }
    Ok(SampleFrame { num_elements: frame.num_elements, body_len: mm, cp_length, samples })
}

pub fn remove_cyclic_prefix(frame: &SampleFrame) -> SampleFrame {
    SampleFrame {
        num_elements: frame.num_elements,
        body_len: frame.body_len,
        cp_length: 0,
        samples: frame.body_samples(),
    }
}

/// The stream an odd-bounce path delivers: element n carries what element
/// −n mod N transmitted, which conjugates every spatial phase e^{j2πnl/N}.
pub fn mode_reverse(frame: &SampleFrame) -> SampleFrame {
    let nn = frame.num_elements;
    let len = frame.extended_len();
    let mut samples = Vec::with_capacity(frame.samples.len());
    for n in 0..nn {
        let src = (nn - n) % nn;
        samples.extend_from_slice(&frame.samples[src * len..(src + 1) * len]);
    }
    SampleFrame { samples, ..frame.clone() }
}

/// Runs a CP-extended frame through the channel and strips the CP.
pub fn apply_channel(
    channel: &ElementChannel,
    tx: &SampleFrame,
    noise_variance: f64,
    seed: u64,
) -> Result<ReceivedFrame> {
    apply_channel_with_history(channel, tx, None, noise_variance, seed)
}

/// [`apply_channel`] with the preceding frame on the air. Taps reach into
/// it only if their offset exceeds the CP, which the channel forbids, so the
/// output never depends on it.
///
/// Each tap shifts its input (mode-reversed for odd parity) by its offset in
/// both element index and time, as the delayed wavefront reaches element v
/// from element v − offset. Gains vary per subcarrier, so the coupling is
/// applied per DFT bin of the shifted body.
pub fn apply_channel_with_history(
    channel: &ElementChannel,
    tx: &SampleFrame,
    previous: Option<&SampleFrame>,
    noise_variance: f64,
    seed: u64,
) -> Result<ReceivedFrame> {
    let (nn, mm) = (channel.num_elements(), channel.num_subcarriers());
    if tx.num_elements != nn || tx.body_len != mm {
        return Err(Error::Shape(format!("{}x{} frame for a {nn}x{mm} channel", tx.num_elements, tx.body_len)));
    }
    if let Some(p) = previous {
        if p.num_elements != nn {
            return Err(Error::Shape("previous frame has a different element count".into()));
        }
    }
    if channel.max_offset() > tx.cp_length {
        return Err(Error::CyclicPrefixTooShort { offset: channel.max_offset() as i64, cp_length: tx.cp_length });
    }
    if !(noise_variance >= 0.0) {
        return Err(Error::InvalidArgument(format!("noise variance must be non-negative, got {noise_variance}")));
    }

    let reversed = mode_reverse(tx);
    let reversed_prev = previous.map(mode_reverse);
    let forward = plan(mm, FftDirection::Forward);
    let mut out_freq = vec![ZERO; nn * mm];
    let mut shifted = vec![ZERO; nn * mm];

    for (t, tap) in channel.taps().iter().enumerate() {
        let (src, prev) = match tap.parity {
            Parity::Odd => (&reversed, reversed_prev.as_ref()),
            Parity::Even => (tx, previous),
        };
        let o = tap.offset;
        for n in 0..nn {
            let from = (n + nn - o % nn) % nn;
            for k in 0..mm {
                let u = k as i64 - o as i64;
                shifted[n * mm + k] = if u >= -(src.cp_length as i64) {
                    src.at(from, u)
                } else {
                    prev.map_or(ZERO, |p| {
                        let pos = p.extended_len() as i64 + src.cp_length as i64 + u;
                        p.samples[from * p.extended_len() + pos as usize]
                    })
                };
            }
        }
        forward.process(&mut shifted);
        for m in 0..mm {
            for v in 0..nn {
                let mut acc = ZERO;
                for n in 0..nn {
                    acc += channel.gain(t, m, v, n) * shifted[n * mm + m];
                }
                out_freq[v * mm + m] += acc;
            }
        }
    }

    plan(mm, FftDirection::Inverse).process(&mut out_freq);
    let scale = 1.0 / mm as f64;
    let mut rng = task_rng(seed, 0);
    for x in out_freq.iter_mut() {
        *x *= scale;
        if noise_variance > 0.0 {
            *x += complex_gaussian(&mut rng, noise_variance);
        }
    }
    ReceivedFrame::new(nn, mm, out_freq, noise_variance)
}

/// h_{vn,e} = exp(j2π[2(−1)^μ r₁d_max cos a_n − 2r₂d_max cos a_v] / (λ√(D²+r₁²+r₂²+4d_max²))),
/// μ = 1 for odd parity.
pub fn compensation_factor(
    geom: &UcaGeometry,
    d_max: f64,
    parity: Parity,
    v: usize,
    n: usize,
    wavelength: f64,
) -> Complex64 {
    let (tx, rx) = split_phases(geom, d_max, parity, wavelength);
    Complex64::from_polar(1.0, tx[n] + rx[v])
}

/// Transmit-side (per n) and receive-side (per v) phases of the factor.
fn split_phases(geom: &UcaGeometry, d_max: f64, parity: Parity, wavelength: f64) -> (Vec<f64>, Vec<f64>) {
    let nn = geom.num_elements();
    let denom = wavelength * geom.reflected_reference_distance(d_max);
    let sign = match parity {
        Parity::Odd => -1.0,
        Parity::Even => 1.0,
    };
    let tx = (0..nn)
        .map(|n| 2.0 * PI * 2.0 * sign * geom.radius_tx() * d_max * geom.element_angle(n).cos() / denom)
        .collect();
    let rx =
        (0..nn).map(|v| -2.0 * PI * 2.0 * geom.radius_rx() * d_max * geom.element_angle(v).cos() / denom).collect();
    (tx, rx)
}

/// Receive-side half of the split compensator, one phase per (m, v).
#[derive(Clone, Debug, PartialEq)]
pub struct ReceiverCompensation {
    num_elements: usize,
    /// Indexed `m * N + v`.
    factors: Vec<Complex64>,
}

impl ReceiverCompensation {
    pub fn factor(&self, m: usize, v: usize) -> Complex64 {
        self.factors[m * self.num_elements + v]
    }
}

pub fn receiver_compensation(
    geom: &UcaGeometry,
    d_max: f64,
    parity: Parity,
    timing: &FrameTiming,
) -> ReceiverCompensation {
    let factors = timing
        .wavelengths()
        .into_iter()
        .flat_map(|lam| split_phases(geom, d_max, parity, lam).1)
        .map(|p| Complex64::from_polar(1.0, p))
        .collect();
    ReceiverCompensation { num_elements: geom.num_elements(), factors }
}

/// Transmit-side half of the split compensator: element n of subcarrier m
/// is pre-rotated, which the channel sees as a column weight on every tap.
pub fn transmit_precompensation(
    channel: &ElementChannel,
    geom: &UcaGeometry,
    d_max: f64,
    parity: Parity,
    timing: &FrameTiming,
) -> ElementChannel {
    let tx: Vec<Vec<f64>> =
        timing.wavelengths().into_iter().map(|lam| split_phases(geom, d_max, parity, lam).0).collect();
    channel.map_gains(|_, m, _, n, g| g * Complex64::from_polar(1.0, tx[m][n]))
}

/// Multiplies Y_{v,·} by the receive phase, per subcarrier.
pub fn apply_compensation(received: &ReceivedFrame, factors: &ReceiverCompensation) -> Result<ReceivedFrame> {
    let (nn, mm) = (received.num_elements, received.num_samples);
    if factors.num_elements != nn || factors.factors.len() != nn * mm {
        return Err(Error::Shape("compensation factors do not match the frame".into()));
    }
    let mut grid = received.samples.clone();
    transform_rows(&mut grid, mm, FftDirection::Forward);
    for v in 0..nn {
        for m in 0..mm {
            grid[v * mm + m] *= factors.factor(m, v) / mm as f64;
        }
    }
    transform_rows(&mut grid, mm, FftDirection::Inverse);
    ReceivedFrame::new(nn, mm, grid, received.noise_variance)
}

/// Applies the full factor to every reflection tap with μ taken from that
/// path's own bounce order; LoS taps are untouched. This is the
/// per-category model under which the closed-form reflection gain holds
/// when paths of both parities are present.
pub fn compensate_per_path(
    channel: &ElementChannel,
    geom: &UcaGeometry,
    d_max: f64,
    timing: &FrameTiming,
) -> ElementChannel {
    let lams = timing.wavelengths();
    channel.map_gains(|tap, m, v, n, g| match tap.source {
        TapSource::Los => g,
        TapSource::Reflection { .. } => g * compensation_factor(geom, d_max, tap.parity, v, n, lams[m]),
    })
}
