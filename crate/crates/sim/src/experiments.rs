//! The seven figure pipelines. Each turns a validated config into one
//! curve file.

use std::f64::consts::PI;
use std::fmt;

use hodm_core::blockchannel::{los_block_gain, reflection_path_block_gain, BlockChannel, GainOptions};
use hodm_core::capacity::{allocate, draw_rician_ensemble, ergodic_capacity_hodm, ergodic_capacity_ofdm, Estimate};
use hodm_core::detection::{snr_loss, CeeModel, MonteCarlo};
use hodm_core::geometry::{path_offsets, path_reflection_coefficient};
use num_complex::Complex64;

use crate::artifact::CurveArtifact;
use crate::config::{Axis, ExperimentConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Experiment {
    GainVsDistance,
    GainVsModes,
    GainVsModeOrder,
    SnrLoss,
    PowerAlloc,
    Capacity,
    CapacityCompare,
}

pub const ALL: [Experiment; 7] = [
    Experiment::GainVsDistance,
    Experiment::GainVsModes,
    Experiment::GainVsModeOrder,
    Experiment::SnrLoss,
    Experiment::PowerAlloc,
    Experiment::Capacity,
    Experiment::CapacityCompare,
];

#[derive(Debug)]
pub enum RunError {
    /// Bad configuration; nothing was computed.
    Invalid(Vec<String>),
    /// The numerics failed part way.
    Core(hodm_core::Error),
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunError::Invalid(msgs) => write!(f, "{}", msgs.join("\n")),
            RunError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for RunError {}

impl From<hodm_core::Error> for RunError {
    fn from(e: hodm_core::Error) -> Self {
        RunError::Core(e)
    }
}

type Run<T> = Result<T, RunError>;

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::GainVsDistance => "gain-vs-distance",
            Experiment::GainVsModes => "gain-vs-modes",
            Experiment::GainVsModeOrder => "gain-vs-mode-order",
            Experiment::SnrLoss => "snr-loss",
            Experiment::PowerAlloc => "power-alloc",
            Experiment::Capacity => "capacity",
            Experiment::CapacityCompare => "capacity-compare",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        ALL.into_iter().find(|e| e.name() == name)
    }

    pub fn file_name(self) -> String {
        format!("{}.csv", self.name())
    }

    /// Allowed (sweep axis, series axis) pairs.
    fn axes(self) -> &'static [(Axis, Option<Axis>)] {
        use Axis::*;
        match self {
            Experiment::GainVsDistance => &[(Distance, None)],
            Experiment::GainVsModes => &[(Modes, Some(Paths)), (Modes, None)],
            Experiment::GainVsModeOrder => &[(ModeOrder, Some(Paths)), (ModeOrder, Some(Modes)), (ModeOrder, None)],
            Experiment::SnrLoss => &[(Snr, Some(Rho)), (Rho, Some(Snr)), (Snr, None), (Rho, None)],
            Experiment::PowerAlloc | Experiment::Capacity => &[(Snr, Some(Modes)), (Snr, Some(Paths)), (Snr, None)],
            Experiment::CapacityCompare => &[(Snr, Some(Subcarriers)), (Snr, None)],
        }
    }

    /// In the capacity figures N and M move together.
    fn ties_modes_to_subcarriers(self) -> bool {
        matches!(self, Experiment::PowerAlloc | Experiment::Capacity)
    }

    fn point(self, cfg: &ExperimentConfig, axis: Axis, value: f64) -> ExperimentConfig {
        let mut c = cfg.at(axis, value);
        if axis == Axis::Modes && self.ties_modes_to_subcarriers() {
            c.num_subcarriers = c.num_elements;
        }
        c
    }

    fn series_points(self, cfg: &ExperimentConfig) -> Vec<(String, ExperimentConfig)> {
        match cfg.series_axis {
            None => vec![(String::new(), cfg.clone())],
            Some(axis) => {
                cfg.series_values.iter().map(|&v| (format!("{axis}={v}"), self.point(cfg, axis, v))).collect()
            }
        }
    }

    fn sweep_points(self, cfg: &ExperimentConfig) -> Vec<(f64, ExperimentConfig)> {
        let axis = cfg.sweep_axis.expect("validated");
        cfg.sweep_values.iter().map(|&x| (x, self.point(cfg, axis, x))).collect()
    }

    /// Base checks, axis compatibility, then every (series, sweep) point.
    pub fn validate(self, cfg: &ExperimentConfig) -> Vec<String> {
        let mut errs = cfg.validate();
        if !errs.is_empty() {
            return errs;
        }
        let pair = (cfg.sweep_axis.expect("validated"), cfg.series_axis);
        if !self.axes().contains(&pair) {
            let allowed: Vec<String> = self
                .axes()
                .iter()
                .map(|(s, r)| match r {
                    Some(r) => format!("{s} with series {r}"),
                    None => format!("{s}"),
                })
                .collect();
            errs.push(format!(
                "sweep_axis/series_axis: {} does not support {}{}; allowed: {}",
                self.name(),
                pair.0,
                pair.1.map(|r| format!(" with series {r}")).unwrap_or_default(),
                allowed.join(", ")
            ));
            return errs;
        }
        let paths_axis = cfg.series_axis == Some(Axis::Paths) || cfg.sweep_axis == Some(Axis::Paths);
        if paths_axis && !cfg.path_orders.is_empty() {
            errs.push("path_orders: a paths axis needs the preset, not an explicit path list".into());
        }
        if self == Experiment::GainVsDistance && cfg.path_orders.is_empty() && cfg.total_paths != 4 {
            errs.push("total_paths: gain-vs-distance shows one path per category, use 4 or list the paths".into());
        }
        for (label, s) in self.series_points(cfg) {
            for (x, p) in self.sweep_points(&s) {
                for m in p.check_point() {
                    let at = if label.is_empty() { format!("x={x}") } else { format!("{label}, x={x}") };
                    let msg = format!("at {at}: {m}");
                    if !errs.contains(&msg) {
                        errs.push(msg);
                    }
                }
            }
        }
        errs
    }

    pub fn run(self, cfg: &ExperimentConfig) -> Run<CurveArtifact> {
        let errs = self.validate(cfg);
        if !errs.is_empty() {
            return Err(RunError::Invalid(errs));
        }
        match self {
            Experiment::GainVsDistance => gain_vs_distance(cfg),
            Experiment::GainVsModes | Experiment::GainVsModeOrder => self.gain_curves(cfg),
            Experiment::SnrLoss => self.snr_loss_curves(cfg),
            Experiment::PowerAlloc => self.power_alloc(cfg),
            Experiment::Capacity => self.capacity(cfg),
            Experiment::CapacityCompare => self.capacity_compare(cfg),
        }
    }

    fn gain_curves(self, cfg: &ExperimentConfig) -> Run<CurveArtifact> {
        let mut out = CurveArtifact::new();
        for (label, s) in self.series_points(cfg) {
            let label = if label.is_empty() { "total".to_string() } else { label };
            for (x, p) in self.sweep_points(&s) {
                let block = block_channel(&p)?;
                out.push(x, label.as_str(), block.gain(p.mode, p.subcarrier).norm(), 0.0);
            }
        }
        Ok(out)
    }

    fn snr_loss_curves(self, cfg: &ExperimentConfig) -> Run<CurveArtifact> {
        let mut out = CurveArtifact::new();
        for (si, (label, s)) in self.series_points(cfg).into_iter().enumerate() {
            let label = if label.is_empty() { format!("rho={}", s.rho) } else { label };
            for (xi, (x, p)) in self.sweep_points(&s).into_iter().enumerate() {
                let h = unit_power_row(&p)?;
                let snr = 10f64.powf(p.snr_db / 10.0);
                let mc = MonteCarlo { draws: p.mc_draws, seed: stream_seed(p.seed, &[si as u64, xi as u64]) };
                let loss = snr_loss(&h, &CeeModel::new(p.rho)?, snr, 1.0, &mc)?;
                out.push(x, label.as_str(), loss.db, loss.db_stderr);
            }
        }
        Ok(out)
    }

    fn power_alloc(self, cfg: &ExperimentConfig) -> Run<CurveArtifact> {
        let mut out = CurveArtifact::new();
        for (si, (label, s)) in self.series_points(cfg).into_iter().enumerate() {
            let prefix = if label.is_empty() { String::new() } else { format!("{label} ") };
            // one fading ensemble per series, shared by every SNR
            let block = block_channel(&s)?;
            let ens = draw_rician_ensemble(&block, s.rician_k_db, s.realizations, stream_seed(s.seed, &[si as u64]))?;
            let modes = block.modes();
            let mm = s.num_subcarriers;
            let mut rows: Vec<(String, Vec<(f64, Estimate)>)> =
                modes.modes().map(|l| (format!("{prefix}l={l}"), Vec::new())).collect();
            rows.push((format!("{prefix}total"), Vec::new()));
            for (x, p) in self.sweep_points(&s) {
                let alloc = allocate(&ens, block_noise_variance(&p)?, p.budget, p.water_level_mode())?;
                for (idx, row) in rows.iter_mut().take(modes.len()).enumerate() {
                    let per_real: Vec<f64> =
                        alloc.powers.iter().map(|pw| pw[idx * mm..(idx + 1) * mm].iter().sum()).collect();
                    row.1.push((x, Estimate::from_samples(&per_real)));
                }
                let totals: Vec<f64> = alloc.powers.iter().map(|pw| pw.iter().sum()).collect();
                rows.last_mut().expect("total row").1.push((x, Estimate::from_samples(&totals)));
            }
            for (name, pts) in rows {
                for (x, e) in pts {
                    out.push(x, name.as_str(), e.mean, e.stderr);
                }
            }
        }
        Ok(out)
    }

    fn capacity(self, cfg: &ExperimentConfig) -> Run<CurveArtifact> {
        let mut out = CurveArtifact::new();
        for (si, (label, s)) in self.series_points(cfg).into_iter().enumerate() {
            let label = if label.is_empty() { "hodm".to_string() } else { label };
            let block = block_channel(&s)?;
            let ens = draw_rician_ensemble(&block, s.rician_k_db, s.realizations, stream_seed(s.seed, &[si as u64]))?;
            for (x, p) in self.sweep_points(&s) {
                let c = ergodic_capacity_hodm(&ens, block_noise_variance(&p)?, p.budget, p.water_level_mode())?;
                out.push(x, label.as_str(), c.mean, c.stderr);
            }
        }
        Ok(out)
    }

    /// HODM against OFDM on the l = 0 row of the same realizations and
    /// the same per-block noise.
    fn capacity_compare(self, cfg: &ExperimentConfig) -> Run<CurveArtifact> {
        let mut out = CurveArtifact::new();
        for (si, (label, s)) in self.series_points(cfg).into_iter().enumerate() {
            let suffix = if label.is_empty() { String::new() } else { format!(" {label}") };
            let block = block_channel(&s)?;
            let ens = draw_rician_ensemble(&block, s.rician_k_db, s.realizations, stream_seed(s.seed, &[si as u64]))?;
            let zero = block.modes().index_of(0).expect("mode 0 always present");
            let ofdm = ens.mode_row(zero);
            for (x, p) in self.sweep_points(&s) {
                let s2 = block_noise_variance(&p)?;
                let h = ergodic_capacity_hodm(&ens, s2, p.budget, p.water_level_mode())?;
                let o = ergodic_capacity_ofdm(&ofdm, s2, p.budget, p.water_level_mode())?;
                out.push(x, format!("hodm{suffix}"), h.mean, h.stderr);
                out.push(x, format!("ofdm{suffix}"), o.mean, o.stderr);
            }
        }
        Ok(sorted_by_series(out))
    }
}

/// Regroups rows so each series is contiguous, keeping first-appearance
/// order of series and the x order within each.
fn sorted_by_series(a: CurveArtifact) -> CurveArtifact {
    let mut out = CurveArtifact::new();
    for s in a.series() {
        for (x, y, e) in a.points(s) {
            out.push(x, s, y, e);
        }
    }
    out
}

fn gain_vs_distance(cfg: &ExperimentConfig) -> Run<CurveArtifact> {
    let mut out = CurveArtifact::new();
    let opts = GainOptions { include_4pi: cfg.include_4pi };
    let paths = cfg.paths()?;
    let names = ["", "primary", "secondary", "triple"];
    let mut counts = [0usize; 4];
    for p in &paths.reflections {
        counts[p.order()] += 1;
    }
    let labels: Vec<String> = paths
        .reflections
        .iter()
        .zip(paths.category_indices())
        .map(
            |(p, i)| {
                if counts[p.order()] > 1 {
                    format!("{}-{i}", names[p.order()])
                } else {
                    names[p.order()].to_string()
                }
            },
        )
        .collect();

    let mut series: Vec<(String, Vec<(f64, f64)>)> = Vec::new();
    if paths.include_los {
        series.push(("los".into(), Vec::new()));
    }
    series.extend(labels.iter().map(|l| (l.clone(), Vec::new())));
    series.push(("total".into(), Vec::new()));

    for &x in &cfg.sweep_values {
        let p = cfg.at(Axis::Distance, x);
        let geom = p.geometry()?;
        let timing = p.timing()?;
        let lam = timing.wavelength(p.subcarrier);
        let offsets = path_offsets(&geom, &paths, &timing, p.indexing());
        let mut total = Complex64::new(0.0, 0.0);
        let mut k = 0;
        if paths.include_los {
            let g = los_block_gain(&geom, p.mode, lam, opts)?;
            total += g;
            series[0].1.push((x, g.norm()));
            k = 1;
        }
        for (i, path) in paths.reflections.iter().enumerate() {
            let r = path_reflection_coefficient(&geom, path)?;
            let g = reflection_path_block_gain(
                &geom,
                path,
                r,
                p.mode,
                p.subcarrier,
                p.num_subcarriers,
                lam,
                offsets[i],
                opts,
            )?;
            total += g;
            series[k + i].1.push((x, g.norm()));
        }
        series.last_mut().expect("total").1.push((x, total.norm()));
    }
    for (name, pts) in series {
        for (x, y) in pts {
            out.push(x, name.as_str(), y, 0.0);
        }
    }
    Ok(out)
}

fn block_channel(cfg: &ExperimentConfig) -> Run<BlockChannel> {
    Ok(BlockChannel::compute(
        &cfg.geometry()?,
        &cfg.paths()?,
        &cfg.timing()?,
        cfg.indexing(),
        GainOptions { include_4pi: cfg.include_4pi },
    )?)
}

/// Row h_{l,·} of the configured mode scaled to unit mean power, so the
/// channel SNR is P/σ².
fn unit_power_row(cfg: &ExperimentConfig) -> Run<Vec<Complex64>> {
    let row = block_channel(cfg)?.row(cfg.mode);
    let mean = row.iter().map(|h| h.norm_sqr()).sum::<f64>() / row.len() as f64;
    if !(mean > 0.0) {
        return Err(RunError::Core(hodm_core::Error::SingularChannel { index: 0, magnitude: 0.0 }));
    }
    Ok(row.iter().map(|h| h / mean.sqrt()).collect())
}

/// Per-block noise σ² = budget·g_ref / (M·N·snr), g_ref = (βλ₀/(4πq))² the
/// single-element LoS power gain. Channel SNR is then the ratio of total
/// transmit power times one element's LoS gain to the total noise over the
/// MN blocks.
pub fn block_noise_variance(cfg: &ExperimentConfig) -> Run<f64> {
    let geom = cfg.geometry()?;
    let lam0 = cfg.timing()?.wavelength(0);
    let g_ref = (geom.attenuation() * lam0 / (4.0 * PI * geom.reference_distance())).powi(2);
    let snr = 10f64.powf(cfg.snr_db / 10.0);
    Ok(cfg.budget * g_ref / ((cfg.num_subcarriers * cfg.num_elements) as f64 * snr))
}

/// SplitMix64 over the master seed and a path of indices: one independent
/// seed per task, fixed by position rather than scheduling.
pub fn stream_seed(master: u64, path: &[u64]) -> u64 {
    let mut z = master;
    for &p in path {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15).wrapping_add(p.wrapping_mul(0xD1B5_4A32_D192_ED03));
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^= z >> 31;
    }
    z
}
