//! Scene configuration and its text-file ingestion.
//!
//! The on-disk format is TOML whose keys are exactly the field names of
//! [`SceneConfig`]. Power-like fields are linear watts (`*_w`); each of them
//! may instead be given in dBm by swapping the suffix to `*_dbm`, in which
//! case the value is converted at load time. Unspecified keys take the
//! defaults listed in `docs/config_schema.md`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Convert a dBm figure to watts.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    1e-3 * 10f64.powf(dbm / 10.0)
}

pub fn watts_to_dbm(w: f64) -> f64 {
    10.0 * (w / 1e-3).log10()
}

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Geometry {
    #[default]
    Monostatic,
    Bistatic,
}

/// How the target RCS enters the metrics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RcsMode {
    /// `|alpha_t|^2 = sigma_t^2`, reproducible.
    #[default]
    DeterministicExpected,
    /// One complex Gaussian draw per scene seed.
    Sampled,
}

/// BD modulation scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Modulation {
    /// BDs follow a predetermined length-M sequence; the phase block is skipped.
    FixedSequence,
    /// The transmitter may choose the BD phases.
    #[default]
    Dynamic,
}

/// Entity the BDs are scattered around.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BdHost {
    #[default]
    Bs,
    User,
    Target,
}

/// Granularity of the optimized BD phase vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PhaseMode {
    /// One phase vector shared by every symbol of the frame.
    #[default]
    Frame,
    /// An independent phase vector per OFDM symbol.
    PerSymbol,
}

/// Scaling of the log-sum metrics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MetricUnit {
    /// Spectral efficiency in bit/s/Hz: prefix `1 / (M N df T_o)`.
    #[default]
    Normalized,
    /// The raw `df / T_o` prefix.
    Physical,
}

/// Cascade used for the BD term of the bistatic sensing channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BistaticCascade {
    /// `H_st * H_tk * H_kr`: the BD re-radiates the target echo.
    #[default]
    ThroughTarget,
    /// `H_sk * H_kr`: the BD is illuminated directly by the transmitter.
    Direct,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub num_symbols: usize,
    pub num_subcarriers: usize,
    /// Useful symbol duration `T` in seconds.
    pub symbol_duration_s: f64,
    /// Cyclic prefix duration `T_G` in seconds.
    pub guard_duration_s: f64,
    /// Subcarrier spacing; `None` means `1 / T`.
    pub subcarrier_spacing_hz: Option<f64>,
}

impl Default for GridConfig {
    fn default() -> Self {
        let t = 4.1470e-6;
        Self {
            num_symbols: 4,
            num_subcarriers: 128,
            symbol_duration_s: t,
            guard_duration_s: t / 4.0,
            subcarrier_spacing_hz: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BdConfig {
    pub count: usize,
    /// Backscatter attenuation applied to every BD unless `attenuations` is set.
    pub attenuation: f64,
    /// Optional per-BD attenuation list (length `count`).
    pub attenuations: Option<Vec<f64>>,
    /// `[min, max]` distance of each BD from its host, meters.
    pub activity_range_m: [f64; 2],
    pub host: BdHost,
    pub modulation: Modulation,
    /// Optional K x M matrix of +-1 values used in fixed-sequence mode and by
    /// fixed-phase schemes. Drawn from the scene seed when absent.
    pub fixed_sequence: Option<Vec<Vec<i8>>>,
}

impl Default for BdConfig {
    fn default() -> Self {
        Self {
            count: 50,
            attenuation: 0.5,
            attenuations: None,
            activity_range_m: [0.1, 0.5],
            host: BdHost::Bs,
            modulation: Modulation::Dynamic,
            fixed_sequence: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelModelConfig {
    /// Number of propagation paths per link.
    pub paths_per_link: usize,
    pub path_loss_exponent: f64,
    /// Distance at which the link power gain is one.
    pub reference_distance_m: f64,
    /// Mean excess delay of the exponential power-delay profile.
    pub delay_spread_s: f64,
    /// Excess delays are truncated here.
    pub max_excess_delay_s: f64,
    pub max_doppler_hz: f64,
}

impl Default for ChannelModelConfig {
    fn default() -> Self {
        Self {
            paths_per_link: 4,
            path_loss_exponent: 2.0,
            reference_distance_m: 0.1,
            delay_spread_s: 20e-9,
            max_excess_delay_s: 200e-9,
            max_doppler_hz: 200.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BistaticConfig {
    pub rx_position_m: [f64; 2],
    pub cascade: BistaticCascade,
}

impl Default for BistaticConfig {
    fn default() -> Self {
        Self {
            rx_position_m: [0.0, -6.0],
            cascade: BistaticCascade::ThroughTarget,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// eps1: power loop stops once `||P - P_prev||_F^2 <= eps1 * P_t^2`.
    pub power_change: f64,
    /// eps2: SCA loop continues while at least this many REs flip.
    pub re_change: f64,
    /// eps3: phase loop continues while at least this many phase bits flip.
    pub phase_change: f64,
    /// Relative change of both metrics that counts as outer stagnation.
    pub outer_rel: f64,
    /// Consecutive stagnant outer iterations required to stop.
    pub outer_patience: usize,
    pub max_outer: usize,
    /// Rate/SMI floor slack relative to the floor.
    pub feasibility_rel: f64,
    pub max_power_iters: usize,
    pub max_sca_iters: usize,
    pub max_phase_iters: usize,
    /// Passes of single-RE flips scored with a fresh power solve after each
    /// SCA split; zero disables.
    pub re_local_search_passes: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            power_change: 1e-12,
            re_change: 1.0,
            phase_change: 1.0,
            outer_rel: 1e-4,
            outer_patience: 2,
            max_outer: 30,
            feasibility_rel: 1e-6,
            max_power_iters: 100,
            max_sca_iters: 20,
            max_phase_iters: 5,
            re_local_search_passes: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SdrConfig {
    pub randomization_samples: usize,
    /// Annealing slopes run 1, 2, 4, ... up to this value.
    pub anneal_max_slope: f64,
    /// Second-to-first eigenvalue ratio above which X is treated as rank > 1.
    pub rank_ratio: f64,
    pub sdp_max_iters: usize,
    pub sdp_tolerance: f64,
    /// Score rounded phase candidates after re-solving the power block.
    pub power_aware_rounding: bool,
    /// Follow rounding with single-sign flips while they improve the candidate.
    pub flip_polish: bool,
}

impl Default for SdrConfig {
    fn default() -> Self {
        Self {
            randomization_samples: 200,
            anneal_max_slope: 256.0,
            rank_ratio: 1e-3,
            sdp_max_iters: 20_000,
            sdp_tolerance: 1e-7,
            power_aware_rounding: true,
            flip_polish: true,
        }
    }
}

/// Every physical and algorithmic parameter of a scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneConfig {
    pub grid: GridConfig,
    pub bds: BdConfig,
    /// `P_t`
    pub total_power_w: f64,
    /// `P_max`
    pub max_re_power_w: f64,
    /// `sigma_r^2`
    pub noise_radar_w: f64,
    /// `sigma_c^2`
    pub noise_comm_w: f64,
    /// `sigma_t^2`
    pub rcs_variance: f64,
    pub rcs_mode: RcsMode,
    pub carrier_frequency_hz: f64,
    pub distance_bs_target_m: f64,
    pub distance_bs_user_m: f64,
    /// `eta_c`: weight of the sensing gain collected on communication REs.
    pub comm_sensing_weight: f64,
    pub seed: u64,
    pub tolerances: Tolerances,
    /// `delta` of the smoothed l0 surrogate.
    pub sca_delta: f64,
    pub geometry: Geometry,
    pub channel: ChannelModelConfig,
    pub bistatic: BistaticConfig,
    pub metric_unit: MetricUnit,
    pub phase_mode: PhaseMode,
    pub sdr: SdrConfig,
    /// Initial augmented-Lagrangian penalty `rho_0`.
    pub penalty_initial: f64,
    /// `rho_max = penalty_cap_factor * rho_0`.
    pub penalty_cap_factor: f64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            grid: GridConfig::default(),
            bds: BdConfig::default(),
            total_power_w: dbm_to_watts(0.0),
            max_re_power_w: dbm_to_watts(0.0) / 4.0,
            noise_radar_w: dbm_to_watts(-110.0),
            noise_comm_w: dbm_to_watts(-110.0),
            rcs_variance: 1.0,
            rcs_mode: RcsMode::DeterministicExpected,
            carrier_frequency_hz: 28e9,
            distance_bs_target_m: 8.0,
            distance_bs_user_m: 10.0,
            comm_sensing_weight: 0.5,
            seed: 0,
            tolerances: Tolerances::default(),
            sca_delta: 1e-3,
            geometry: Geometry::Monostatic,
            channel: ChannelModelConfig::default(),
            bistatic: BistaticConfig::default(),
            metric_unit: MetricUnit::Normalized,
            phase_mode: PhaseMode::Frame,
            sdr: SdrConfig::default(),
            penalty_initial: 1.0,
            penalty_cap_factor: 1e6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntityPositions {
    pub bs: [f64; 2],
    pub target: [f64; 2],
    pub user: [f64; 2],
    pub rx: [f64; 2],
}

pub fn distance(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// The time-frequency grid derived from a [`GridConfig`].
#[derive(Debug, Clone, PartialEq)]
pub struct OfdmGrid {
    pub num_symbols: usize,
    pub num_subcarriers: usize,
    pub subcarrier_spacing: f64,
    pub symbol_duration: f64,
    pub guard_duration: f64,
    /// `T_o = T + T_G`
    pub total_symbol_duration: f64,
    /// Baseband subcarrier frequencies `f_n = n * df`.
    pub subcarrier_frequencies: Vec<f64>,
    /// Symbol start instants `t_m = m * T_o`.
    pub symbol_start_times: Vec<f64>,
}

impl OfdmGrid {
    pub fn new(cfg: &GridConfig) -> Result<Self> {
        if cfg.num_symbols == 0 {
            return Err(Error::config("grid.num_symbols", "M >= 1"));
        }
        if cfg.num_subcarriers == 0 {
            return Err(Error::config("grid.num_subcarriers", "N >= 1"));
        }
        if !(cfg.symbol_duration_s > 0.0 && cfg.symbol_duration_s.is_finite()) {
            return Err(Error::config("grid.symbol_duration_s", "T > 0"));
        }
        if !(cfg.guard_duration_s > 0.0 && cfg.guard_duration_s.is_finite()) {
            return Err(Error::config("grid.guard_duration_s", "T_G > 0"));
        }
        let df = cfg
            .subcarrier_spacing_hz
            .unwrap_or(1.0 / cfg.symbol_duration_s);
        if !(df > 0.0 && df.is_finite()) {
            return Err(Error::config("grid.subcarrier_spacing_hz", "df > 0"));
        }
        let t_o = cfg.symbol_duration_s + cfg.guard_duration_s;
        Ok(Self {
            num_symbols: cfg.num_symbols,
            num_subcarriers: cfg.num_subcarriers,
            subcarrier_spacing: df,
            symbol_duration: cfg.symbol_duration_s,
            guard_duration: cfg.guard_duration_s,
            total_symbol_duration: t_o,
            subcarrier_frequencies: (0..cfg.num_subcarriers).map(|n| n as f64 * df).collect(),
            symbol_start_times: (0..cfg.num_symbols).map(|m| m as f64 * t_o).collect(),
        })
    }

    pub fn num_res(&self) -> usize {
        self.num_symbols * self.num_subcarriers
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.num_symbols, self.num_subcarriers)
    }
}

impl SceneConfig {
    pub fn ofdm_grid(&self) -> Result<OfdmGrid> {
        OfdmGrid::new(&self.grid)
    }

    /// Per-BD attenuation coefficients.
    pub fn attenuations(&self) -> Vec<f64> {
        match &self.bds.attenuations {
            Some(list) => list.clone(),
            None => vec![self.bds.attenuation; self.bds.count],
        }
    }

    pub fn penalty_cap(&self) -> f64 {
        self.penalty_initial * self.penalty_cap_factor
    }

    /// Positions of the base station, target, user and (bistatic) sensing
    /// receiver in the plane, meters.
    pub fn entity_positions(&self) -> EntityPositions {
        EntityPositions {
            bs: [0.0, 0.0],
            target: [self.distance_bs_target_m, 0.0],
            user: [0.0, self.distance_bs_user_m],
            rx: self.bistatic.rx_position_m,
        }
    }

    /// Largest propagation delay any generated path can have.
    pub fn max_path_delay(&self) -> f64 {
        let pos = self.entity_positions();
        let all = [pos.bs, pos.target, pos.user, pos.rx];
        let mut far = 0.0f64;
        for a in &all {
            for b in &all {
                far = far.max(distance(*a, *b));
            }
        }
        (far + self.bds.activity_range_m[1]) / SPEED_OF_LIGHT + self.channel.max_excess_delay_s
    }

    /// Check every invariant, reporting the first offending key.
    pub fn validate(&self) -> Result<()> {
        let grid = self.ofdm_grid()?;
        let positive = |key: &str, v: f64, what: &str| -> Result<()> {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::config(key, format!("{what} > 0 (got {v})")))
            }
        };
        positive("total_power_w", self.total_power_w, "P_t")?;
        positive("max_re_power_w", self.max_re_power_w, "P_max")?;
        positive("noise_radar_w", self.noise_radar_w, "sigma_r^2")?;
        positive("noise_comm_w", self.noise_comm_w, "sigma_c^2")?;
        positive("sca_delta", self.sca_delta, "delta")?;
        positive("carrier_frequency_hz", self.carrier_frequency_hz, "f_c")?;
        positive("distance_bs_target_m", self.distance_bs_target_m, "D_ST")?;
        positive("distance_bs_user_m", self.distance_bs_user_m, "d_BU")?;
        positive("penalty_initial", self.penalty_initial, "rho_0")?;
        if !(self.penalty_cap_factor >= 1.0) {
            return Err(Error::config("penalty_cap_factor", "must be >= 1"));
        }
        if !(self.rcs_variance >= 0.0 && self.rcs_variance.is_finite()) {
            return Err(Error::config("rcs_variance", "sigma_t^2 >= 0"));
        }
        if !(0.0..=1.0).contains(&self.comm_sensing_weight) {
            return Err(Error::config(
                "comm_sensing_weight",
                format!("0 <= eta_c <= 1 (got {})", self.comm_sensing_weight),
            ));
        }
        let alphas = self.attenuations();
        if alphas.len() != self.bds.count {
            return Err(Error::config(
                "bds.attenuations",
                format!("expected {} entries, got {}", self.bds.count, alphas.len()),
            ));
        }
        if let Some(bad) = alphas.iter().find(|a| !(0.0..=1.0).contains(*a)) {
            return Err(Error::config(
                "bds.attenuation",
                format!("0 <= alpha_k <= 1 (got {bad})"),
            ));
        }
        let [r_lo, r_hi] = self.bds.activity_range_m;
        if !(r_lo > 0.0 && r_hi >= r_lo && r_hi.is_finite()) {
            return Err(Error::config("bds.activity_range_m", "need 0 < min <= max"));
        }
        if let Some(seq) = &self.bds.fixed_sequence {
            if seq.len() != self.bds.count || seq.iter().any(|row| row.len() != grid.num_symbols) {
                return Err(Error::config(
                    "bds.fixed_sequence",
                    format!("must be {} x {}", self.bds.count, grid.num_symbols),
                ));
            }
            if seq.iter().flatten().any(|&x| x != 1 && x != -1) {
                return Err(Error::config(
                    "bds.fixed_sequence",
                    "entries must be +1 or -1",
                ));
            }
        }
        let ch = &self.channel;
        if ch.paths_per_link == 0 {
            return Err(Error::config("channel.paths_per_link", "S_l >= 1"));
        }
        positive(
            "channel.reference_distance_m",
            ch.reference_distance_m,
            "d_ref",
        )?;
        if !(ch.path_loss_exponent >= 0.0) {
            return Err(Error::config("channel.path_loss_exponent", "must be >= 0"));
        }
        if !(ch.delay_spread_s >= 0.0 && ch.max_excess_delay_s >= 0.0) {
            return Err(Error::config(
                "channel.delay_spread_s",
                "delays must be >= 0",
            ));
        }
        if !(ch.max_doppler_hz >= 0.0) {
            return Err(Error::config("channel.max_doppler_hz", "must be >= 0"));
        }
        let worst = self.max_path_delay();
        if worst >= grid.guard_duration {
            return Err(Error::DelayExceedsGuard {
                delay: worst,
                guard: grid.guard_duration,
            });
        }
        let tol = &self.tolerances;
        if tol.max_outer == 0 || tol.max_power_iters == 0 || tol.max_sca_iters == 0 {
            return Err(Error::config("tolerances", "iteration caps must be >= 1"));
        }
        if !(tol.feasibility_rel >= 0.0 && tol.outer_rel > 0.0 && tol.power_change >= 0.0) {
            return Err(Error::config(
                "tolerances",
                "tolerances must be non-negative",
            ));
        }
        if self.sdr.anneal_max_slope < 1.0 {
            return Err(Error::config("sdr.anneal_max_slope", "must be >= 1"));
        }
        Ok(())
    }

    /// Parse a TOML document, applying defaults and `*_dbm` conversions.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let mut table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::Parse(e.to_string()))?;
        convert_dbm_keys(&mut table)?;
        let cfg: SceneConfig = table
            .try_into()
            .map_err(|e: toml::de::Error| Error::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("scene config serializes")
    }
}

/// Load and validate a scene configuration file.
pub fn load_config(path: impl AsRef<Path>) -> Result<SceneConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    SceneConfig::from_toml_str(&text).map_err(|e| match e {
        Error::Parse(msg) => Error::Parse(format!("{}: {msg}", path.display())),
        other => other,
    })
}

const WATT_KEYS: [&str; 4] = [
    "total_power_w",
    "max_re_power_w",
    "noise_radar_w",
    "noise_comm_w",
];

fn convert_dbm_keys(table: &mut toml::Table) -> Result<()> {
    for watt_key in WATT_KEYS {
        let stem = watt_key.trim_end_matches("_w");
        let dbm_key = format!("{stem}_dbm");
        if let Some(v) = table.remove(&dbm_key) {
            if table.contains_key(watt_key) {
                return Err(Error::config(
                    &dbm_key,
                    format!("given together with `{watt_key}`"),
                ));
            }
            let dbm = v
                .as_float()
                .or_else(|| v.as_integer().map(|i| i as f64))
                .ok_or_else(|| Error::config(&dbm_key, "expected a number"))?;
            table.insert(watt_key.to_string(), toml::Value::Float(dbm_to_watts(dbm)));
        }
    }
    Ok(())
}
