use num_complex::Complex64;
use rayon::prelude::*;

use super::{
    los_gain, path_delay, path_reflection_coefficient, reflection_gain_with_coefficient, Parity, PathSet, UcaGeometry,
    SPEED_OF_LIGHT,
};
use crate::{Error, Result};

/// Subcarrier grid and cyclic prefix of one HODM frame.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameTiming {
    pub num_subcarriers: usize,
    pub first_frequency: f64,
    pub subcarrier_spacing: f64,
    pub cp_length: usize,
}

impl FrameTiming {
    pub fn new(
        num_subcarriers: usize,
        first_frequency: f64,
        subcarrier_spacing: f64,
        cp_length: usize,
    ) -> Result<Self> {
        if num_subcarriers == 0 {
            return Err(Error::InvalidArgument("subcarrier count must be positive".into()));
        }
        if !(first_frequency > 0.0 && first_frequency.is_finite()) {
            return Err(Error::InvalidArgument(format!("first frequency must be positive, got {first_frequency}")));
        }
        if !(subcarrier_spacing > 0.0 && subcarrier_spacing.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "subcarrier spacing must be positive, got {subcarrier_spacing}"
            )));
        }
        Ok(Self { num_subcarriers, first_frequency, subcarrier_spacing, cp_length })
    }

    /// Symbol duration T_s = 1/Δf.
    pub fn frame_duration(&self) -> f64 {
        1.0 / self.subcarrier_spacing
    }

    /// λ_m = c / (f₀ + mΔf).
    pub fn wavelength(&self, m: usize) -> f64 {
        SPEED_OF_LIGHT / (self.first_frequency + m as f64 * self.subcarrier_spacing)
    }

    pub fn wavelengths(&self) -> Vec<f64> {
        (0..self.num_subcarriers).map(|m| self.wavelength(m)).collect()
    }
}

/// How reflection delays map onto integer sample offsets.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum DelayIndexing {
    /// Path i of category X sits at L_X − i, L_X the ceiling of the largest
    /// normalized delay in the category.
    #[default]
    Literal,
    /// Each path at round(mean τ·M/T_s).
    Physical,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TapSource {
    Los,
    /// Index into `PathSet::reflections`.
    Reflection {
        path: usize,
        order: usize,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChannelTap {
    pub source: TapSource,
    pub parity: Parity,
    pub offset: usize,
    /// Indexed `(m * N + v) * N + n`.
    pub gains: Vec<Complex64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ElementChannel {
    num_elements: usize,
    num_subcarriers: usize,
    cp_length: usize,
    taps: Vec<ChannelTap>,
}

impl ElementChannel {
    pub fn new(num_elements: usize, num_subcarriers: usize, cp_length: usize, taps: Vec<ChannelTap>) -> Result<Self> {
        let len = num_subcarriers * num_elements * num_elements;
        for t in &taps {
            if t.gains.len() != len {
                return Err(Error::Shape(format!("tap holds {} gains, expected {len}", t.gains.len())));
            }
            if t.offset > cp_length {
                return Err(Error::CyclicPrefixTooShort { offset: t.offset as i64, cp_length });
            }
        }
        Ok(Self { num_elements, num_subcarriers, cp_length, taps })
    }

    pub fn num_elements(&self) -> usize {
        self.num_elements
    }
    pub fn num_subcarriers(&self) -> usize {
        self.num_subcarriers
    }
    pub fn cp_length(&self) -> usize {
        self.cp_length
    }
    pub fn taps(&self) -> &[ChannelTap] {
        &self.taps
    }
    pub fn max_offset(&self) -> usize {
        self.taps.iter().map(|t| t.offset).max().unwrap_or(0)
    }

    pub fn gain(&self, tap: usize, m: usize, v: usize, n: usize) -> Complex64 {
        let nn = self.num_elements;
        self.taps[tap].gains[(m * nn + v) * nn + n]
    }

    /// New channel with every gain replaced by `f(tap, m, v, n, gain)`.
    pub fn map_gains<F>(&self, f: F) -> Self
    where
        F: Fn(&ChannelTap, usize, usize, usize, Complex64) -> Complex64 + Sync,
    {
        let nn = self.num_elements;
        let taps = self
            .taps
            .iter()
            .map(|t| {
                let gains =
                    t.gains.iter().enumerate().map(|(i, &g)| f(t, i / (nn * nn), (i / nn) % nn, i % nn, g)).collect();
                ChannelTap { gains, ..t.clone() }
            })
            .collect();
        Self { taps, ..self.clone() }
    }

    /// Keeps only the taps for which `keep` holds.
    pub fn filter_taps(&self, keep: impl Fn(&ChannelTap) -> bool) -> Self {
        Self { taps: self.taps.iter().filter(|t| keep(t)).cloned().collect(), ..self.clone() }
    }
}

/// Largest τ·M/T_s over all element pairs, per reflection path.
pub fn normalized_delays(geom: &UcaGeometry, paths: &PathSet, timing: &FrameTiming) -> Vec<f64> {
    let nn = geom.num_elements();
    let scale = timing.num_subcarriers as f64 / timing.frame_duration();
    paths
        .reflections
        .iter()
        .map(|p| {
            let mut worst: f64 = 0.0;
            for v in 0..nn {
                for n in 0..nn {
                    worst = worst.max(path_delay(geom, p, v, n) * scale);
                }
            }
            worst
        })
        .collect()
}

/// Integer sample offset of each reflection path. Literal offsets can be
/// negative when a category holds more paths than its largest normalized
/// delay; the closed-form gains accept that, the element channel does not.
pub fn path_offsets(geom: &UcaGeometry, paths: &PathSet, timing: &FrameTiming, indexing: DelayIndexing) -> Vec<i64> {
    let delays = normalized_delays(geom, paths, timing);
    match indexing {
        DelayIndexing::Literal => {
            let mut ceiling = [0i64; 4];
            for (p, &d) in paths.reflections.iter().zip(&delays) {
                ceiling[p.order()] = ceiling[p.order()].max(d.ceil() as i64);
            }
            paths.reflections.iter().zip(paths.category_indices()).map(|(p, i)| ceiling[p.order()] - i as i64).collect()
        }
        DelayIndexing::Physical => {
            let nn = geom.num_elements();
            let scale = timing.num_subcarriers as f64 / timing.frame_duration();
            paths
                .reflections
                .iter()
                .map(|p| {
                    let mut sum = 0.0;
                    for v in 0..nn {
                        for n in 0..nn {
                            sum += path_delay(geom, p, v, n);
                        }
                    }
                    (sum / (nn * nn) as f64 * scale).round() as i64
                })
                .collect()
        }
    }
}

/// Per-(v, n, subcarrier) taps for every path, LoS first.
pub fn build_element_channel(
    geom: &UcaGeometry,
    paths: &PathSet,
    timing: &FrameTiming,
    indexing: DelayIndexing,
) -> Result<ElementChannel> {
    paths.validate_against(geom)?;
    let nn = geom.num_elements();
    let mm = timing.num_subcarriers;
    let wavelengths = timing.wavelengths();
    let offsets = path_offsets(geom, paths, timing, indexing);

    let fill = |gain: &(dyn Fn(usize, usize, f64) -> Complex64 + Sync)| -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); mm * nn * nn];
        out.par_chunks_mut(nn * nn).enumerate().for_each(|(m, chunk)| {
            for v in 0..nn {
                for n in 0..nn {
                    chunk[v * nn + n] = gain(v, n, wavelengths[m]);
                }
            }
        });
        out
    };

    let mut taps = Vec::with_capacity(paths.path_count());
    if paths.include_los {
        taps.push(ChannelTap {
            source: TapSource::Los,
            parity: Parity::Even,
            offset: 0,
            gains: fill(&|v, n, lam| los_gain(geom, v, n, lam)),
        });
    }
    for (idx, (path, &offset)) in paths.reflections.iter().zip(&offsets).enumerate() {
        if offset < 0 {
            return Err(Error::NegativeOffset { offset, path: idx });
        }
        if offset as usize > timing.cp_length {
            return Err(Error::CyclicPrefixTooShort { offset, cp_length: timing.cp_length });
        }
        let coefficient = path_reflection_coefficient(geom, path)?;
        taps.push(ChannelTap {
            source: TapSource::Reflection { path: idx, order: path.order() },
            parity: path.parity(),
            offset: offset as usize,
            gains: fill(&|v, n, lam| reflection_gain_with_coefficient(geom, path, coefficient, v, n, lam)),
        });
    }
    ElementChannel::new(nn, mm, timing.cp_length, taps)
}
