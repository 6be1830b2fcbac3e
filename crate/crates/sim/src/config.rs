//! Experiment configuration: a flat TOML file, every key optional except
//! the sweep. Unknown keys are rejected.

use std::fmt;

use hodm_core::capacity::WaterLevelMode;
use hodm_core::geometry::{DelayIndexing, FrameTiming, PathSet, ReflectionPath, UcaGeometry};
use hodm_core::modem::ModeSet;
use serde::{Deserialize, Serialize};

/// Largest array the Bessel evaluation covers (|l| ≤ 64).
const MAX_ELEMENTS: usize = 128;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Axis {
    /// Axial distance D in metres.
    Distance,
    /// Channel SNR in dB.
    Snr,
    /// Channel-estimation accuracy ρ.
    Rho,
    /// Number of OAM modes N (the capacity runs tie M = N).
    Modes,
    /// Total path count L_p of the preset, 1 + 3k.
    Paths,
    /// OAM mode order l.
    ModeOrder,
    /// Number of subcarriers M.
    Subcarriers,
}

impl Axis {
    pub fn name(self) -> &'static str {
        match self {
            Axis::Distance => "distance",
            Axis::Snr => "snr",
            Axis::Rho => "rho",
            Axis::Modes => "modes",
            Axis::Paths => "paths",
            Axis::ModeOrder => "mode-order",
            Axis::Subcarriers => "subcarriers",
        }
    }

    fn integral(self) -> bool {
        matches!(self, Axis::Modes | Axis::Paths | Axis::ModeOrder | Axis::Subcarriers)
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Indexing {
    #[default]
    Literal,
    Physical,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WaterLevel {
    #[default]
    Ensemble,
    PerRealization,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    // geometry
    pub num_elements: usize,
    pub radius_tx: f64,
    pub radius_rx: f64,
    pub axial_distance: f64,
    pub attenuation: f64,

    // modem
    pub num_subcarriers: usize,
    pub first_frequency: f64,
    pub subcarrier_spacing: f64,
    pub cp_length: usize,

    // paths: explicit list when `path_orders` is non-empty, else the preset
    pub include_los: bool,
    pub path_orders: Vec<usize>,
    pub path_distances: Vec<f64>,
    pub path_permittivities: Vec<f64>,
    pub total_paths: usize,
    pub path_base_distance: f64,
    pub path_distance_step: f64,
    pub permittivity: f64,
    pub delay_indexing: Indexing,
    pub include_4pi: bool,

    // block of interest
    pub mode: i64,
    pub subcarrier: usize,

    // sweep
    pub sweep_axis: Option<Axis>,
    pub sweep_values: Vec<f64>,
    pub series_axis: Option<Axis>,
    pub series_values: Vec<f64>,

    // detection
    pub snr_db: f64,
    pub rho: f64,
    pub mc_draws: usize,

    // capacity
    pub budget: f64,
    pub rician_k_db: f64,
    pub realizations: usize,
    pub water_level: WaterLevel,

    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            num_elements: 8,
            radius_tx: 0.05,
            radius_rx: 0.05,
            axial_distance: 3.0,
            attenuation: 1.0,
            num_subcarriers: 8,
            first_frequency: 60e9,
            subcarrier_spacing: 5e6,
            cp_length: 4,
            include_los: true,
            path_orders: Vec::new(),
            path_distances: Vec::new(),
            path_permittivities: Vec::new(),
            total_paths: 4,
            path_base_distance: 0.3,
            path_distance_step: 0.05,
            permittivity: 15.0,
            delay_indexing: Indexing::Literal,
            include_4pi: true,
            mode: 1,
            subcarrier: 0,
            sweep_axis: None,
            sweep_values: Vec::new(),
            series_axis: None,
            series_values: Vec::new(),
            snr_db: 10.0,
            rho: 0.1,
            mc_draws: 10_000,
            budget: 2.0,
            rician_k_db: 10.0,
            realizations: 1000,
            water_level: WaterLevel::Ensemble,
            seed: 1,
        }
    }
}

/// Every problem found in a config, one message per line.
#[derive(Clone, Debug, PartialEq)]
pub struct ConfigError {
    pub messages: Vec<String>,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, m) in self.messages.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{m}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigError {}

impl ExperimentConfig {
    /// Parses TOML and runs [`ExperimentConfig::validate`].
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text).map_err(|e| ConfigError { messages: vec![e.to_string()] })?;
        let messages = cfg.validate();
        if messages.is_empty() {
            Ok(cfg)
        } else {
            Err(ConfigError { messages })
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Field-level checks of the base configuration. The sweep is checked
    /// point by point through [`ExperimentConfig::at`].
    pub fn validate(&self) -> Vec<String> {
        let mut errs = Vec::new();

        need(&mut errs, self.num_elements > 0, "num_elements: must be positive".into());
        need(
            &mut errs,
            self.num_elements <= MAX_ELEMENTS,
            format!("num_elements: at most {MAX_ELEMENTS} (mode orders beyond 64 are not supported)"),
        );
        for (name, r) in [("radius_tx", self.radius_tx), ("radius_rx", self.radius_rx)] {
            need(&mut errs, r.is_finite() && r >= 0.0, format!("{name}: must be non-negative, got {r}"));
            need(
                &mut errs,
                !(r >= self.axial_distance / 10.0),
                format!(
                    "{name}: radius too large relative to axial distance ({r} m, need < D/10 = {} m)",
                    self.axial_distance / 10.0
                ),
            );
        }
        need(
            &mut errs,
            self.axial_distance.is_finite() && self.axial_distance > 0.0,
            format!("axial_distance: must be positive, got {}", self.axial_distance),
        );
        need(
            &mut errs,
            self.attenuation.is_finite() && self.attenuation > 0.0,
            format!("attenuation: must be positive, got {}", self.attenuation),
        );

        need(&mut errs, self.num_subcarriers > 0, "num_subcarriers: must be positive".into());
        need(
            &mut errs,
            self.first_frequency.is_finite() && self.first_frequency > 0.0,
            format!("first_frequency: must be positive, got {}", self.first_frequency),
        );
        need(
            &mut errs,
            self.subcarrier_spacing.is_finite() && self.subcarrier_spacing > 0.0,
            format!("subcarrier_spacing: must be positive, got {}", self.subcarrier_spacing),
        );
        need(
            &mut errs,
            self.cp_length == 0 || self.cp_length < self.num_subcarriers,
            format!("cp_length: must be below num_subcarriers ({} >= {})", self.cp_length, self.num_subcarriers),
        );

        if self.path_orders.is_empty() {
            need(
                &mut errs,
                self.path_distances.is_empty() && self.path_permittivities.is_empty(),
                "path_distances/path_permittivities: given without path_orders".into(),
            );
            need(
                &mut errs,
                self.total_paths >= 1 && (self.total_paths - 1).is_multiple_of(3),
                format!("total_paths: preset needs 1 + 3k paths, got {}", self.total_paths),
            );
            need(
                &mut errs,
                self.path_base_distance.is_finite() && self.path_base_distance > 0.0,
                format!("path_base_distance: must be positive, got {}", self.path_base_distance),
            );
            need(
                &mut errs,
                self.path_distance_step.is_finite() && self.path_distance_step >= 0.0,
                format!("path_distance_step: must be non-negative, got {}", self.path_distance_step),
            );
            need(
                &mut errs,
                self.permittivity > 1.0,
                format!("permittivity: permittivity must exceed 1, got {}", self.permittivity),
            );
        } else {
            let n = self.path_orders.len();
            need(
                &mut errs,
                self.path_distances.len() == n,
                format!("path_distances: {} entries for {n} paths", self.path_distances.len()),
            );
            need(
                &mut errs,
                self.path_permittivities.is_empty() || self.path_permittivities.len() == n,
                format!("path_permittivities: {} entries for {n} paths", self.path_permittivities.len()),
            );
            for (i, &o) in self.path_orders.iter().enumerate() {
                need(
                    &mut errs,
                    (1..=3).contains(&o),
                    format!("path_orders[{i}]: bounce order must be 1, 2 or 3, got {o}"),
                );
            }
            for (i, &d) in self.path_distances.iter().enumerate() {
                need(&mut errs, d.is_finite() && d > 0.0, format!("path_distances[{i}]: must be positive, got {d}"));
            }
            for (i, &e) in self.path_permittivities.iter().enumerate() {
                need(&mut errs, e > 1.0, format!("path_permittivities[{i}]: permittivity must exceed 1, got {e}"));
            }
        }

        need(
            &mut errs,
            self.subcarrier < self.num_subcarriers,
            format!("subcarrier: {} is not below num_subcarriers", self.subcarrier),
        );
        need(
            &mut errs,
            self.num_elements == 0 || ModeSet::new(self.num_elements).contains(self.mode),
            format!("mode: {} is outside the mode set of {} elements", self.mode, self.num_elements),
        );

        match self.sweep_axis {
            None => need(&mut errs, false, "sweep_axis: required".into()),
            Some(axis) => check_values(&mut errs, "sweep_values", axis, &self.sweep_values),
        }
        match self.series_axis {
            None => need(&mut errs, self.series_values.is_empty(), "series_values: given without series_axis".into()),
            Some(axis) => {
                need(&mut errs, Some(axis) != self.sweep_axis, format!("series_axis: same as sweep_axis ({axis})"));
                check_values(&mut errs, "series_values", axis, &self.series_values);
            }
        }

        need(&mut errs, self.snr_db.is_finite(), format!("snr_db: must be finite, got {}", self.snr_db));
        need(&mut errs, (0.0..1.0).contains(&self.rho), format!("rho: must lie in [0, 1), got {}", self.rho));
        need(&mut errs, self.mc_draws > 0, "mc_draws: must be positive".into());
        need(
            &mut errs,
            self.budget.is_finite() && self.budget > 0.0,
            format!("budget: must be positive, got {}", self.budget),
        );
        need(&mut errs, self.rician_k_db.is_finite(), format!("rician_k_db: must be finite, got {}", self.rician_k_db));
        need(&mut errs, self.realizations > 0, "realizations: must be positive".into());
        errs
    }

    /// The configuration with `axis` set to `value`.
    pub fn at(&self, axis: Axis, value: f64) -> Self {
        let mut c = self.clone();
        match axis {
            Axis::Distance => c.axial_distance = value,
            Axis::Snr => c.snr_db = value,
            Axis::Rho => c.rho = value,
            Axis::Modes => c.num_elements = value as usize,
            Axis::Paths => c.total_paths = value as usize,
            Axis::ModeOrder => c.mode = value as i64,
            Axis::Subcarriers => c.num_subcarriers = value as usize,
        }
        c
    }

    pub fn geometry(&self) -> hodm_core::Result<UcaGeometry> {
        UcaGeometry::new(self.num_elements, self.radius_tx, self.radius_rx, self.axial_distance, self.attenuation)
    }

    pub fn timing(&self) -> hodm_core::Result<FrameTiming> {
        FrameTiming::new(self.num_subcarriers, self.first_frequency, self.subcarrier_spacing, self.cp_length)
    }

    pub fn paths(&self) -> hodm_core::Result<PathSet> {
        if self.path_orders.is_empty() {
            let mut p = PathSet::preset_with_total(
                self.total_paths,
                self.path_base_distance,
                self.path_distance_step,
                self.permittivity,
            )?;
            p.include_los = self.include_los;
            return Ok(p);
        }
        let reflections = self
            .path_orders
            .iter()
            .enumerate()
            .map(|(i, &order)| {
                let eps = self.path_permittivities.get(i).copied().unwrap_or(self.permittivity);
                ReflectionPath::uniform(order, self.path_distances[i], eps)
            })
            .collect::<hodm_core::Result<_>>()?;
        Ok(PathSet { include_los: self.include_los, reflections })
    }

    pub fn indexing(&self) -> DelayIndexing {
        match self.delay_indexing {
            Indexing::Literal => DelayIndexing::Literal,
            Indexing::Physical => DelayIndexing::Physical,
        }
    }

    pub fn water_level_mode(&self) -> WaterLevelMode {
        match self.water_level {
            WaterLevel::Ensemble => WaterLevelMode::Ensemble,
            WaterLevel::PerRealization => WaterLevelMode::PerRealization,
        }
    }

    /// Builds every core object the point needs, reporting the first
    /// failure of each.
    pub fn check_point(&self) -> Vec<String> {
        let mut errs = self.validate();
        if !errs.is_empty() {
            return errs;
        }
        let geom = self.geometry();
        if let Err(e) = &geom {
            errs.push(e.to_string());
        }
        if let Err(e) = self.timing() {
            errs.push(e.to_string());
        }
        match (self.paths(), geom) {
            (Err(e), _) => errs.push(e.to_string()),
            (Ok(p), Ok(g)) => {
                if let Err(e) = p.validate_against(&g) {
                    errs.push(e.to_string());
                }
            }
            _ => {}
        }
        errs
    }
}

fn need(errs: &mut Vec<String>, ok: bool, msg: String) {
    if !ok {
        errs.push(msg);
    }
}

fn check_values(errs: &mut Vec<String>, key: &str, axis: Axis, values: &[f64]) {
    if values.is_empty() {
        errs.push(format!("{key}: must not be empty"));
        return;
    }
    for (i, &v) in values.iter().enumerate() {
        if !v.is_finite() {
            errs.push(format!("{key}[{i}]: must be finite, got {v}"));
        } else if axis.integral() && v.fract() != 0.0 {
            errs.push(format!("{key}[{i}]: {axis} values must be integers, got {v}"));
        } else if matches!(axis, Axis::Modes | Axis::Paths | Axis::Subcarriers) && v < 1.0 {
            errs.push(format!("{key}[{i}]: {axis} values must be at least 1, got {v}"));
        }
    }
    if values.windows(2).any(|w| !(w[1] > w[0])) {
        errs.push(format!("{key}: must be strictly increasing"));
    }
}
