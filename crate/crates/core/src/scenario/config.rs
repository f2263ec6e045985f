//! Flat `key = value` scenario configuration with presets.
//!
//! Keys are dotted (`motion.v_kmh`). A bare key is accepted when it matches
//! the last segment of exactly one known key. Values are in the units named
//! by the key suffix; conversion to SI happens in the accessors below.

use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::channel::ChannelModel;
use crate::cir::{GainModel, RicianModel};
use crate::evolution::EvolutionParams;
use crate::geometry::{TubeScene, Vector3, SPEED_OF_LIGHT};

pub const PRESETS: [&str; 3] = ["tube", "tunnel", "open-hst-approx"];

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },

    #[error("{}unknown key `{key}`", at_line(*.line))]
    UnknownKey { key: String, line: Option<usize> },

    #[error("{}key `{key}` is ambiguous; use one of: {}", at_line(*.line), .candidates.join(", "))]
    AmbiguousKey {
        key: String,
        candidates: Vec<String>,
        line: Option<usize>,
    },

    #[error("{}invalid value `{value}` for `{key}`: expected {expected}", at_line(*.line))]
    BadValue {
        key: String,
        value: String,
        expected: &'static str,
        line: Option<usize>,
    },

    #[error("`{key}`: {constraint}")]
    Validation { key: String, constraint: String },

    #[error("no preset given and required keys are missing: {}", .0.join(", "))]
    MissingKeys(Vec<String>),

    #[error("unknown preset `{name}`; known presets: {}", PRESETS.join(", "))]
    UnknownPreset { name: String },
}

fn at_line(line: Option<usize>) -> String {
    line.map(|l| format!("line {l}: ")).unwrap_or_default()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSection {
    pub radius_m: f64,
    pub axis_height_m: f64,
    pub tx_x_m: f64,
    pub tx_y_m: f64,
    pub tx_z_m: f64,
    /// Initial Rx offset along the axis from the Tx.
    pub d0_m: f64,
    pub rx_y_m: f64,
    pub rx_z_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArraySection {
    pub tx_elements: usize,
    pub rx_elements: usize,
    pub spacing_lambda: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotionSection {
    pub v_kmh: f64,
    /// Sign of the Rx velocity along x.
    pub direction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolutionSection {
    pub birth_rate: f64,
    pub death_rate: f64,
    pub correlation_distance_m: f64,
    pub delay_relaxation_ms: f64,
    pub roughness_m: f64,
    pub rho_s0: f64,
    pub kappa_tx: f64,
    pub kappa_rx: f64,
    pub mean_rays: f64,
    pub mean_virtual_delay_ns: f64,
    pub mean_intra_delay_ns: f64,
    pub intra_power_decay: f64,
    pub ray_shadow_db: f64,
    pub birth_scale: f64,
    pub waveguide_factor: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RicianSection {
    pub k_db: f64,
    pub slope_db_per_m: f64,
    pub reference_distance_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsSection {
    pub dt_step_us: f64,
    pub dt_span_ms: f64,
    pub delta_step_lambda: f64,
    pub delta_span_lambda: f64,
    pub df_points: usize,
    pub df_span_mhz: f64,
    pub delay_bin_ns: f64,
    pub si_threshold: f64,
    pub si_step_us: f64,
    pub si_window_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSection {
    pub duration_s: f64,
    pub step_ms: f64,
    pub log_spacing_m: f64,
    pub realizations: usize,
    pub seed: u64,
    pub instants_s: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub scene: SceneSection,
    pub array: ArraySection,
    pub fc_ghz: f64,
    pub motion: MotionSection,
    pub evolution: EvolutionSection,
    pub rician: RicianSection,
    pub shadow_sigma_db: f64,
    pub stats: StatsSection,
    pub run: RunSection,
}

enum Slot<'a> {
    Real(&'a mut f64),
    Count(&'a mut usize),
    Seed(&'a mut u64),
    Flag(&'a mut bool),
    List(&'a mut Vec<f64>),
}

/// Every key, in canonical order.
pub const KEYS: &[&str] = &[
    "scene.radius_m",
    "scene.axis_height_m",
    "scene.tx_x_m",
    "scene.tx_y_m",
    "scene.tx_z_m",
    "scene.d0_m",
    "scene.rx_y_m",
    "scene.rx_z_m",
    "array.tx_elements",
    "array.rx_elements",
    "array.spacing_lambda",
    "carrier.fc_ghz",
    "motion.v_kmh",
    "motion.direction",
    "evolution.birth_rate",
    "evolution.death_rate",
    "evolution.correlation_distance_m",
    "evolution.delay_relaxation_ms",
    "evolution.roughness_m",
    "evolution.rho_s0",
    "evolution.kappa_tx",
    "evolution.kappa_rx",
    "evolution.mean_rays",
    "evolution.mean_virtual_delay_ns",
    "evolution.mean_intra_delay_ns",
    "evolution.intra_power_decay",
    "evolution.ray_shadow_db",
    "evolution.birth_scale",
    "evolution.waveguide_factor",
    "rician.k_db",
    "rician.slope_db_per_m",
    "rician.reference_distance_m",
    "gain.shadow_sigma_db",
    "stats.dt_step_us",
    "stats.dt_span_ms",
    "stats.delta_step_lambda",
    "stats.delta_span_lambda",
    "stats.df_points",
    "stats.df_span_mhz",
    "stats.delay_bin_ns",
    "stats.si_threshold",
    "stats.si_step_us",
    "stats.si_window_ms",
    "run.duration_s",
    "run.step_ms",
    "run.log_spacing_m",
    "run.realizations",
    "run.seed",
    "run.instants_s",
];

fn keys() -> impl Iterator<Item = &'static str> {
    KEYS.iter().copied()
}

impl ScenarioConfig {
    fn slot(&mut self, key: &str) -> Option<Slot<'_>> {
        use Slot::*;
        let s = &mut self.scene;
        let e = &mut self.evolution;
        let st = &mut self.stats;
        Some(match key {
            "scene.radius_m" => Real(&mut s.radius_m),
            "scene.axis_height_m" => Real(&mut s.axis_height_m),
            "scene.tx_x_m" => Real(&mut s.tx_x_m),
            "scene.tx_y_m" => Real(&mut s.tx_y_m),
            "scene.tx_z_m" => Real(&mut s.tx_z_m),
            "scene.d0_m" => Real(&mut s.d0_m),
            "scene.rx_y_m" => Real(&mut s.rx_y_m),
            "scene.rx_z_m" => Real(&mut s.rx_z_m),
            "array.tx_elements" => Count(&mut self.array.tx_elements),
            "array.rx_elements" => Count(&mut self.array.rx_elements),
            "array.spacing_lambda" => Real(&mut self.array.spacing_lambda),
            "carrier.fc_ghz" => Real(&mut self.fc_ghz),
            "motion.v_kmh" => Real(&mut self.motion.v_kmh),
            "motion.direction" => Real(&mut self.motion.direction),
            "evolution.birth_rate" => Real(&mut e.birth_rate),
            "evolution.death_rate" => Real(&mut e.death_rate),
            "evolution.correlation_distance_m" => Real(&mut e.correlation_distance_m),
            "evolution.delay_relaxation_ms" => Real(&mut e.delay_relaxation_ms),
            "evolution.roughness_m" => Real(&mut e.roughness_m),
            "evolution.rho_s0" => Real(&mut e.rho_s0),
            "evolution.kappa_tx" => Real(&mut e.kappa_tx),
            "evolution.kappa_rx" => Real(&mut e.kappa_rx),
            "evolution.mean_rays" => Real(&mut e.mean_rays),
            "evolution.mean_virtual_delay_ns" => Real(&mut e.mean_virtual_delay_ns),
            "evolution.mean_intra_delay_ns" => Real(&mut e.mean_intra_delay_ns),
            "evolution.intra_power_decay" => Real(&mut e.intra_power_decay),
            "evolution.ray_shadow_db" => Real(&mut e.ray_shadow_db),
            "evolution.birth_scale" => Real(&mut e.birth_scale),
            "evolution.waveguide_factor" => Flag(&mut e.waveguide_factor),
            "rician.k_db" => Real(&mut self.rician.k_db),
            "rician.slope_db_per_m" => Real(&mut self.rician.slope_db_per_m),
            "rician.reference_distance_m" => Real(&mut self.rician.reference_distance_m),
            "gain.shadow_sigma_db" => Real(&mut self.shadow_sigma_db),
            "stats.dt_step_us" => Real(&mut st.dt_step_us),
            "stats.dt_span_ms" => Real(&mut st.dt_span_ms),
            "stats.delta_step_lambda" => Real(&mut st.delta_step_lambda),
            "stats.delta_span_lambda" => Real(&mut st.delta_span_lambda),
            "stats.df_points" => Count(&mut st.df_points),
            "stats.df_span_mhz" => Real(&mut st.df_span_mhz),
            "stats.delay_bin_ns" => Real(&mut st.delay_bin_ns),
            "stats.si_threshold" => Real(&mut st.si_threshold),
            "stats.si_step_us" => Real(&mut st.si_step_us),
            "stats.si_window_ms" => Real(&mut st.si_window_ms),
            "run.duration_s" => Real(&mut self.run.duration_s),
            "run.step_ms" => Real(&mut self.run.step_ms),
            "run.log_spacing_m" => Real(&mut self.run.log_spacing_m),
            "run.realizations" => Count(&mut self.run.realizations),
            "run.seed" => Seed(&mut self.run.seed),
            "run.instants_s" => List(&mut self.run.instants_s),
            _ => return None,
        })
    }

    /// Canonical text form of one value.
    pub fn get(&self, key: &str) -> Option<String> {
        let mut copy = self.clone();
        let text = match copy.slot(key)? {
            Slot::Real(v) => v.to_string(),
            Slot::Count(v) => v.to_string(),
            Slot::Seed(v) => v.to_string(),
            Slot::Flag(v) => v.to_string(),
            Slot::List(v) => v.iter().map(f64::to_string).collect::<Vec<_>>().join(","),
        };
        Some(text)
    }

    /// Sets a value given its (possibly abbreviated) key.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        self.set_at(key, value, None)
    }

    fn set_at(&mut self, key: &str, value: &str, line: Option<usize>) -> Result<(), ConfigError> {
        let full = resolve_key(key, line)?;
        let bad = |expected| ConfigError::BadValue {
            key: full.to_string(),
            value: value.to_string(),
            expected,
            line,
        };
        match self.slot(full).expect("resolved key has a slot") {
            Slot::Real(v) => *v = value.parse().map_err(|_| bad("a number"))?,
            Slot::Count(v) => *v = value.parse().map_err(|_| bad("a non-negative integer"))?,
            Slot::Seed(v) => *v = value.parse().map_err(|_| bad("an unsigned 64-bit integer"))?,
            Slot::Flag(v) => *v = value.parse().map_err(|_| bad("true or false"))?,
            Slot::List(v) => {
                *v = if value.trim().is_empty() {
                    Vec::new()
                } else {
                    value
                        .split(',')
                        .map(|s| s.trim().parse::<f64>())
                        .collect::<Result<_, _>>()
                        .map_err(|_| bad("a comma-separated list of numbers"))?
                }
            }
        }
        Ok(())
    }

    pub fn preset(name: &str) -> Result<Self, ConfigError> {
        let mut c = Self::tube();
        match name {
            "tube" => {}
            "tunnel" => c.evolution.roughness_m = 0.002,
            "open-hst-approx" => {
                c.evolution.waveguide_factor = false;
                c.evolution.birth_scale = 3.0;
            }
            _ => return Err(ConfigError::UnknownPreset { name: name.to_string() }),
        }
        Ok(c)
    }

    fn tube() -> Self {
        Self {
            scene: SceneSection {
                radius_m: 2.0,
                axis_height_m: 2.0,
                tx_x_m: 0.0,
                tx_y_m: 0.0,
                tx_z_m: 4.0,
                d0_m: 600.0,
                rx_y_m: 0.0,
                rx_z_m: 3.0,
            },
            array: ArraySection {
                tx_elements: 2,
                rx_elements: 2,
                spacing_lambda: 1.0,
            },
            fc_ghz: 58.0,
            motion: MotionSection {
                v_kmh: 1080.0,
                direction: -1.0,
            },
            evolution: EvolutionSection {
                birth_rate: 80.0,
                death_rate: 4.0,
                correlation_distance_m: 0.25,
                delay_relaxation_ms: 1.0,
                roughness_m: 0.0,
                rho_s0: 1.0,
                kappa_tx: 6.0,
                kappa_rx: 6.0,
                mean_rays: 10.0,
                mean_virtual_delay_ns: 30.0,
                mean_intra_delay_ns: 5.0,
                intra_power_decay: 2.3,
                ray_shadow_db: 0.0,
                birth_scale: 1.0,
                waveguide_factor: true,
            },
            rician: RicianSection {
                k_db: -6.0,
                slope_db_per_m: 0.0,
                reference_distance_m: 0.0,
            },
            shadow_sigma_db: 0.0,
            stats: StatsSection {
                dt_step_us: 10.0,
                dt_span_ms: 1.0,
                delta_step_lambda: 0.05,
                delta_span_lambda: 3.0,
                df_points: 512,
                df_span_mhz: 400.0,
                delay_bin_ns: 5.0,
                si_threshold: 0.8,
                si_step_us: 2.0,
                si_window_ms: 1.0,
            },
            run: RunSection {
                duration_s: 1.9,
                step_ms: 10.0,
                log_spacing_m: 10.0,
                realizations: 100,
                seed: 1,
                instants_s: vec![0.0],
            },
        }
    }

    /// Canonical serialization: every key in [`KEYS`] order.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for key in keys() {
            out.push_str(key);
            out.push_str(" = ");
            out.push_str(&self.get(key).expect("known key"));
            out.push('\n');
        }
        out
    }

    /// SHA-256 of the canonical text, lower-case hex.
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.to_text().as_bytes()))
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let fail = |key: &str, constraint: &str| {
            Err(ConfigError::Validation {
                key: key.to_string(),
                constraint: constraint.to_string(),
            })
        };
        let positive = [
            ("scene.radius_m", self.scene.radius_m),
            ("carrier.fc_ghz", self.fc_ghz),
            ("array.spacing_lambda", self.array.spacing_lambda),
            ("evolution.birth_rate", self.evolution.birth_rate),
            ("evolution.death_rate", self.evolution.death_rate),
            ("evolution.correlation_distance_m", self.evolution.correlation_distance_m),
            ("evolution.delay_relaxation_ms", self.evolution.delay_relaxation_ms),
            ("evolution.rho_s0", self.evolution.rho_s0),
            ("evolution.kappa_tx", self.evolution.kappa_tx),
            ("evolution.kappa_rx", self.evolution.kappa_rx),
            ("evolution.mean_rays", self.evolution.mean_rays),
            ("evolution.mean_virtual_delay_ns", self.evolution.mean_virtual_delay_ns),
            ("evolution.mean_intra_delay_ns", self.evolution.mean_intra_delay_ns),
            ("stats.dt_step_us", self.stats.dt_step_us),
            ("stats.delta_step_lambda", self.stats.delta_step_lambda),
            ("stats.delay_bin_ns", self.stats.delay_bin_ns),
            ("stats.si_step_us", self.stats.si_step_us),
            ("stats.si_window_ms", self.stats.si_window_ms),
            ("run.step_ms", self.run.step_ms),
            ("run.log_spacing_m", self.run.log_spacing_m),
        ];
        for (key, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return fail(key, "must be a positive finite number");
            }
        }
        let non_negative = [
            ("motion.v_kmh", self.motion.v_kmh),
            ("evolution.roughness_m", self.evolution.roughness_m),
            ("evolution.ray_shadow_db", self.evolution.ray_shadow_db),
            ("evolution.birth_scale", self.evolution.birth_scale),
            ("gain.shadow_sigma_db", self.shadow_sigma_db),
            ("stats.dt_span_ms", self.stats.dt_span_ms),
            ("stats.delta_span_lambda", self.stats.delta_span_lambda),
            ("stats.df_span_mhz", self.stats.df_span_mhz),
            ("run.duration_s", self.run.duration_s),
            ("scene.d0_m", self.scene.d0_m),
        ];
        for (key, v) in non_negative {
            if !(v >= 0.0 && v.is_finite()) {
                return fail(key, "must be a non-negative finite number");
            }
        }
        if self.motion.direction != 1.0 && self.motion.direction != -1.0 {
            return fail("motion.direction", "must be 1 or -1");
        }
        if !(self.evolution.intra_power_decay > 1.0) {
            return fail("evolution.intra_power_decay", "must exceed 1");
        }
        if !(self.rician.k_db.is_finite() && self.rician.slope_db_per_m.is_finite()) {
            return fail("rician.k_db", "must be finite");
        }
        if !(self.stats.si_threshold > 0.0 && self.stats.si_threshold <= 1.0) {
            return fail("stats.si_threshold", "must lie in (0, 1]");
        }
        if self.array.tx_elements == 0 || self.array.rx_elements == 0 {
            return fail("array.tx_elements", "arrays need at least one element");
        }
        if self.stats.df_points == 0 {
            return fail("stats.df_points", "must be at least 1");
        }
        if self.run.realizations == 0 {
            return fail("run.realizations", "must be at least 1");
        }
        if self.run.instants_s.iter().any(|t| !(*t >= 0.0 && t.is_finite())) {
            return fail("run.instants_s", "instants must be non-negative");
        }
        self.channel_model()
            .map(|_| ())
            .map_err(|e| ConfigError::Validation {
                key: "scene".into(),
                constraint: e.to_string(),
            })
    }

    pub fn carrier_hz(&self) -> f64 {
        self.fc_ghz * 1e9
    }

    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_hz()
    }

    /// Speed in m/s.
    pub fn speed(&self) -> f64 {
        self.motion.v_kmh / 3.6
    }

    pub fn velocity(&self) -> Vector3 {
        Vector3::new(self.motion.direction * self.speed(), 0.0, 0.0)
    }

    pub fn scene(&self) -> Result<TubeScene, crate::Error> {
        let s = &self.scene;
        TubeScene::new(
            s.radius_m,
            s.axis_height_m,
            Vector3::new(s.tx_x_m, s.tx_y_m, s.tx_z_m),
            Vector3::new(s.tx_x_m + s.d0_m, s.rx_y_m, s.rx_z_m),
        )
    }

    pub fn evolution_params(&self) -> EvolutionParams {
        let e = &self.evolution;
        EvolutionParams {
            birth_rate: e.birth_rate,
            death_rate: e.death_rate,
            correlation_distance: e.correlation_distance_m,
            delay_relaxation: e.delay_relaxation_ms * 1e-3,
            roughness: e.roughness_m,
            rho_s0: e.rho_s0,
            von_mises_k_tx: e.kappa_tx,
            von_mises_k_rx: e.kappa_rx,
            mean_rays_per_cluster: e.mean_rays,
            mean_virtual_delay: e.mean_virtual_delay_ns * 1e-9,
            mean_intra_delay: e.mean_intra_delay_ns * 1e-9,
            intra_power_decay: e.intra_power_decay,
            per_ray_shadow_sigma: e.ray_shadow_db,
            birth_scale: e.birth_scale,
            waveguide_factor: e.waveguide_factor,
        }
    }

    pub fn rician_model(&self) -> RicianModel {
        RicianModel {
            k_db: self.rician.k_db,
            slope_db_per_m: self.rician.slope_db_per_m,
            reference_distance: self.rician.reference_distance_m,
        }
    }

    pub fn gain_model(&self) -> GainModel {
        GainModel::FreeSpace {
            shadow_sigma_db: self.shadow_sigma_db,
        }
    }

    pub fn channel_model(&self) -> Result<ChannelModel, crate::Error> {
        ChannelModel::new(
            self.scene()?,
            self.array.tx_elements,
            self.array.rx_elements,
            self.array.spacing_lambda * self.wavelength(),
            self.velocity(),
            self.carrier_hz(),
            self.rician_model(),
            self.evolution_params(),
        )
    }

    /// Temporal lags from 0 to the span inclusive, s.
    pub fn dt_grid(&self) -> Vec<f64> {
        uniform_grid(self.stats.dt_step_us * 1e-6, self.stats.dt_span_ms * 1e-3)
    }

    /// Rx separations, in wavelengths.
    pub fn delta_grid_lambda(&self) -> Vec<f64> {
        uniform_grid(self.stats.delta_step_lambda, self.stats.delta_span_lambda)
    }

    /// Frequency lags, `df_points` values from 0 across the span, Hz.
    pub fn df_grid(&self) -> Vec<f64> {
        let n = self.stats.df_points;
        let step = if n > 1 {
            self.stats.df_span_mhz * 1e6 / (n - 1) as f64
        } else {
            0.0
        };
        (0..n).map(|i| i as f64 * step).collect()
    }

    pub fn delay_bin(&self) -> f64 {
        self.stats.delay_bin_ns * 1e-9
    }

    /// Offsets of the PDP snapshots used for stationary intervals, s.
    pub fn si_grid(&self) -> Vec<f64> {
        uniform_grid(self.stats.si_step_us * 1e-6, self.stats.si_window_ms * 1e-3)
    }
}

fn uniform_grid(step: f64, span: f64) -> Vec<f64> {
    let n = (span / step + 1e-9).floor() as usize;
    (0..=n).map(|i| i as f64 * step).collect()
}

/// Full dotted name of a possibly abbreviated key.
pub fn canonical_key(key: &str) -> Result<&'static str, ConfigError> {
    resolve_key(key, None)
}

fn resolve_key(key: &str, line: Option<usize>) -> Result<&'static str, ConfigError> {
    if let Some(k) = keys().find(|k| *k == key) {
        return Ok(k);
    }
    if key.contains('.') {
        return Err(ConfigError::UnknownKey {
            key: key.to_string(),
            line,
        });
    }
    let hits: Vec<&'static str> = keys().filter(|k| k.rsplit('.').next() == Some(key)).collect();
    match hits.as_slice() {
        [one] => Ok(one),
        [] => Err(ConfigError::UnknownKey {
            key: key.to_string(),
            line,
        }),
        many => Err(ConfigError::AmbiguousKey {
            key: key.to_string(),
            candidates: many.iter().map(|s| s.to_string()).collect(),
            line,
        }),
    }
}

struct Entry<'a> {
    key: &'a str,
    value: &'a str,
    line: usize,
}

fn parse_lines(text: &str) -> Result<Vec<Entry<'_>>, ConfigError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("");
        if content.trim().is_empty() {
            continue;
        }
        let Some(eq) = content.find('=') else {
            let column = content.len() - content.trim_start().len() + 1;
            return Err(ConfigError::Parse {
                line,
                column,
                message: "expected `key = value`".into(),
            });
        };
        let key = content[..eq].trim();
        let value = content[eq + 1..].trim();
        if key.is_empty() {
            return Err(ConfigError::Parse {
                line,
                column: eq + 1,
                message: "missing key before `=`".into(),
            });
        }
        if let Some(bad) = key.find(|c: char| !(c.is_ascii_alphanumeric() || c == '_' || c == '.' || c == '-')) {
            let offset = content.find(key).unwrap_or(0);
            return Err(ConfigError::Parse {
                line,
                column: offset + bad + 1,
                message: format!("invalid character in key `{key}`"),
            });
        }
        out.push(Entry { key, value, line });
    }
    Ok(out)
}

/// Parses a configuration document. A `preset = name` line selects the base
/// values; without one, every key must be given.
pub fn load_config(text: &str) -> Result<ScenarioConfig, ConfigError> {
    load_config_with(text, None, &[])
}

/// As [`load_config`], with an explicit preset that takes precedence over
/// the document's and `key=value` overrides applied last.
pub fn load_config_with(
    text: &str,
    preset: Option<&str>,
    overrides: &[(String, String)],
) -> Result<ScenarioConfig, ConfigError> {
    let entries = parse_lines(text)?;
    let doc_preset = entries.iter().rev().find(|e| e.key == "preset").map(|e| e.value);
    let chosen = preset.or(doc_preset);
    let mut config = match chosen {
        Some(name) => ScenarioConfig::preset(name)?,
        None => ScenarioConfig::tube(),
    };
    let mut seen = std::collections::BTreeSet::new();
    for e in entries.iter().filter(|e| e.key != "preset") {
        config.set_at(e.key, e.value, Some(e.line))?;
        seen.insert(resolve_key(e.key, Some(e.line))?);
    }
    for (k, v) in overrides {
        config.set(k, v)?;
        seen.insert(resolve_key(k, None)?);
    }
    if chosen.is_none() {
        let missing: Vec<String> = keys().filter(|k| !seen.contains(k)).map(String::from).collect();
        if !missing.is_empty() {
            return Err(ConfigError::MissingKeys(missing));
        }
    }
    config.validate()?;
    Ok(config)
}

/// Splits `key=value`.
pub fn parse_override(text: &str) -> Result<(String, String), ConfigError> {
    match text.split_once('=') {
        Some((k, v)) if !k.trim().is_empty() => Ok((k.trim().to_string(), v.trim().to_string())),
        _ => Err(ConfigError::Parse {
            line: 0,
            column: 1,
            message: format!("override `{text}` is not of the form key=value"),
        }),
    }
}

impl fmt::Display for ScenarioConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tube_preset_values() {
        let c = load_config("preset = tube").unwrap();
        assert_eq!(c.scene.radius_m, 2.0);
        assert_eq!(c.evolution.roughness_m, 0.0);
        assert_eq!(c.evolution.birth_rate, 80.0);
        assert_eq!(c.evolution.death_rate, 4.0);
        assert_eq!(c.carrier_hz(), 58e9);
        assert_eq!(c.motion.v_kmh, 1080.0);
        assert_eq!(c.scene.d0_m, 600.0);
    }

    #[test]
    fn tunnel_preset_differs_only_in_roughness() {
        let tube = ScenarioConfig::preset("tube").unwrap();
        let mut tunnel = ScenarioConfig::preset("tunnel").unwrap();
        assert_eq!(tunnel.evolution.roughness_m, 0.002);
        tunnel.evolution.roughness_m = 0.0;
        assert_eq!(tunnel, tube);
    }

    #[test]
    fn empty_document_lists_required_keys() {
        match load_config("") {
            Err(ConfigError::MissingKeys(keys)) => {
                assert_eq!(keys.len(), super::keys().count());
                assert!(keys.iter().any(|k| k == "carrier.fc_ghz"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_key_reports_line() {
        let err = load_config("preset = tube\n# c\nmotion.warp = 3\n").unwrap_err();
        assert_eq!(
            err,
            ConfigError::UnknownKey {
                key: "motion.warp".into(),
                line: Some(3)
            }
        );
        assert!(err.to_string().starts_with("line 3:"));
    }

    #[test]
    fn parse_error_has_position() {
        match load_config("preset = tube\n  oops\n") {
            Err(ConfigError::Parse { line, column, .. }) => assert_eq!((line, column), (2, 3)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn bare_key_resolves_by_suffix() {
        let c = load_config_with("", Some("tube"), &[("v_kmh".into(), "2160".into())]).unwrap();
        assert_eq!(c.motion.v_kmh, 2160.0);
        assert!((c.speed() - 600.0).abs() < 1e-12);
    }

    #[test]
    fn unknown_preset_lists_known() {
        let err = load_config("preset = maglev").unwrap_err();
        let msg = err.to_string();
        for p in PRESETS {
            assert!(msg.contains(p));
        }
    }

    #[test]
    fn validation_errors_name_the_key() {
        let err = load_config("preset = tube\ncarrier.fc_ghz = 0\n").unwrap_err();
        assert!(matches!(err, ConfigError::Validation { ref key, .. } if key == "carrier.fc_ghz"));
        let err = load_config("preset = tube\nrun.realizations = 0\n").unwrap_err();
        assert!(matches!(err, ConfigError::Validation { ref key, .. } if key == "run.realizations"));
    }

    #[test]
    fn canonical_text_round_trips() {
        for p in PRESETS {
            let c = ScenarioConfig::preset(p).unwrap();
            let back = load_config(&c.to_text()).unwrap();
            assert_eq!(back, c);
            assert_eq!(back.digest(), c.digest());
        }
        assert_ne!(
            ScenarioConfig::preset("tube").unwrap().digest(),
            ScenarioConfig::preset("tunnel").unwrap().digest()
        );
    }

    #[test]
    fn grids() {
        let c = ScenarioConfig::preset("tube").unwrap();
        let dt = c.dt_grid();
        assert_eq!(dt.len(), 101);
        assert!((dt[100] - 1e-3).abs() < 1e-15);
        assert_eq!(c.df_grid().len(), 512);
        assert!((c.df_grid()[511] - 400e6).abs() < 1e-3);
        assert_eq!(c.delta_grid_lambda().len(), 61);
    }
}
