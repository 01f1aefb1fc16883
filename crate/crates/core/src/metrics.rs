//! Sensing mutual information, communication rate, their gradients and the
//! augmented Lagrangian.
//!
//! Every metric is a sum of per-RE log terms `prefix * w * log2(1 + g * P)`.
//! The per-RE SNR-per-watt `g` is precomputed once per phase assignment in
//! [`ReGains`], so the allocation solvers never touch complex channels.

use std::f64::consts::LN_2;

use ndarray::{Array2, Zip};
use serde::{Deserialize, Serialize};

use crate::config::{MetricUnit, OfdmGrid, SceneConfig};
use crate::error::{Error, Result};
use crate::scene::{EffectiveChannels, PhaseMatrix, Scene};

/// Full decision variable: RE split, power grid and BD phases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationState {
    /// `true` marks a radar RE, `false` a communication RE. Indexed `[m, n]`.
    pub radar: Array2<bool>,
    /// Watts per RE.
    pub power: Array2<f64>,
    pub phases: PhaseMatrix,
}

impl AllocationState {
    pub fn new(radar: Array2<bool>, power: Array2<f64>, phases: PhaseMatrix) -> Result<Self> {
        if radar.dim() != power.dim() {
            return Err(Error::Shape(format!(
                "indicator is {:?}, power is {:?}",
                radar.dim(),
                power.dim()
            )));
        }
        if phases.num_symbols() != radar.nrows() {
            return Err(Error::Shape(format!(
                "phases cover {} symbols, grid has {}",
                phases.num_symbols(),
                radar.nrows()
            )));
        }
        Ok(Self {
            radar,
            power,
            phases,
        })
    }

    /// Uniform power `P_t / (MN)` clamped to `P_max`.
    pub fn uniform(config: &SceneConfig, radar: Array2<bool>, phases: PhaseMatrix) -> Result<Self> {
        let (m, n) = radar.dim();
        let p = uniform_power(config, m * n);
        Self::new(radar, Array2::from_elem((m, n), p), phases)
    }

    pub fn dim(&self) -> (usize, usize) {
        self.radar.dim()
    }

    pub fn total_power(&self) -> f64 {
        self.power.sum()
    }

    pub fn num_radar(&self) -> usize {
        self.radar.iter().filter(|&&r| r).count()
    }

    /// Check the budget, the per-RE cap and non-negativity.
    pub fn check_power(&self, config: &SceneConfig, rel_tol: f64) -> Result<()> {
        let total = self.total_power();
        if total > config.total_power_w * (1.0 + rel_tol) {
            return Err(Error::Domain(format!(
                "total power {total:.6e} W exceeds budget {:.6e} W",
                config.total_power_w
            )));
        }
        let cap = config.max_re_power_w * (1.0 + rel_tol);
        if let Some(p) = self.power.iter().find(|&&p| !(0.0..=cap).contains(&p)) {
            return Err(Error::Domain(format!(
                "RE power {p:.6e} W outside [0, {:.6e}]",
                config.max_re_power_w
            )));
        }
        Ok(())
    }
}

pub fn uniform_power(config: &SceneConfig, num_res: usize) -> f64 {
    (config.total_power_w / num_res as f64).min(config.max_re_power_w)
}

/// Metric prefix for the configured unit.
pub fn metric_prefix(grid: &OfdmGrid, unit: MetricUnit) -> f64 {
    let df = grid.subcarrier_spacing;
    let to = grid.total_symbol_duration;
    match unit {
        MetricUnit::Normalized => 1.0 / (grid.num_res() as f64 * df * to),
        MetricUnit::Physical => df / to,
    }
}

/// Scalars shared by every per-RE term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricParams {
    pub prefix: f64,
    /// `eta_c`
    pub comm_weight: f64,
}

impl MetricParams {
    pub fn from_scene(scene: &Scene) -> Self {
        Self {
            prefix: metric_prefix(&scene.grid, scene.config.metric_unit),
            comm_weight: scene.config.comm_sensing_weight,
        }
    }

    /// Sensing weight of an RE.
    #[inline]
    pub fn weight(&self, radar: bool) -> f64 {
        if radar {
            1.0
        } else {
            self.comm_weight
        }
    }
}

/// SNR per watt of every RE: `|alpha_t|^2 |G|^4 / sigma_r^2` and `|H_c|^2 / sigma_c^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReGains {
    pub sense: Array2<f64>,
    pub comm: Array2<f64>,
}

impl ReGains {
    pub fn new(eff: &EffectiveChannels, scene: &Scene) -> Self {
        Self::from_parts(eff, scene.rcs_gain(), &scene.config)
    }

    pub fn from_parts(eff: &EffectiveChannels, rcs_gain: f64, config: &SceneConfig) -> Self {
        let sr = rcs_gain / config.noise_radar_w;
        let sc = 1.0 / config.noise_comm_w;
        Self {
            sense: eff.sense.mapv(|g| sr * g.norm_sqr().powi(2)),
            comm: eff.comm.mapv(|h| sc * h.norm_sqr()),
        }
    }

    pub fn for_phases(scene: &Scene, phases: &PhaseMatrix) -> Result<Self> {
        Ok(Self::new(&scene.effective(phases)?, scene))
    }

    pub fn dim(&self) -> (usize, usize) {
        self.sense.dim()
    }
}

/// Achieved `(I_r, C_d)` with the per-RE breakdown.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricPair {
    pub smi: f64,
    pub rate: f64,
    pub sense_scores: Array2<f64>,
    pub rate_scores: Array2<f64>,
}

/// Per-RE sensing score at weight one, ignoring the RE split.
pub fn radar_scores(power: &Array2<f64>, gains: &ReGains, params: &MetricParams) -> Array2<f64> {
    Zip::from(power)
        .and(&gains.sense)
        .map_collect(|&p, &g| params.prefix * (g * p).ln_1p() / LN_2)
}

/// Per-RE rate score as if every RE carried data.
pub fn link_rate_scores(
    power: &Array2<f64>,
    gains: &ReGains,
    params: &MetricParams,
) -> Array2<f64> {
    Zip::from(power)
        .and(&gains.comm)
        .map_collect(|&p, &g| params.prefix * (g * p).ln_1p() / LN_2)
}

pub fn evaluate(
    radar: &Array2<bool>,
    power: &Array2<f64>,
    gains: &ReGains,
    params: &MetricParams,
) -> MetricPair {
    let mut sense_scores = radar_scores(power, gains, params);
    let mut rate_scores = link_rate_scores(power, gains, params);
    Zip::from(&mut sense_scores)
        .and(&mut rate_scores)
        .and(radar)
        .for_each(|s, r, &is_radar| {
            *s *= params.weight(is_radar);
            if is_radar {
                *r = 0.0;
            }
        });
    MetricPair {
        smi: sense_scores.sum(),
        rate: rate_scores.sum(),
        sense_scores,
        rate_scores,
    }
}

/// Metrics of a full state on a scene.
pub fn evaluate_state(state: &AllocationState, scene: &Scene) -> Result<MetricPair> {
    let gains = ReGains::for_phases(scene, &state.phases)?;
    Ok(evaluate(
        &state.radar,
        &state.power,
        &gains,
        &MetricParams::from_scene(scene),
    ))
}

pub fn sensing_mutual_information(
    state: &AllocationState,
    eff: &EffectiveChannels,
    scene: &Scene,
) -> (f64, Array2<f64>) {
    let pair = evaluate(
        &state.radar,
        &state.power,
        &ReGains::new(eff, scene),
        &MetricParams::from_scene(scene),
    );
    (pair.smi, pair.sense_scores)
}

pub fn communication_rate(
    state: &AllocationState,
    eff: &EffectiveChannels,
    scene: &Scene,
) -> (f64, Array2<f64>) {
    let pair = evaluate(
        &state.radar,
        &state.power,
        &ReGains::new(eff, scene),
        &MetricParams::from_scene(scene),
    );
    (pair.rate, pair.rate_scores)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    /// dI_r / dP
    pub smi: Array2<f64>,
    /// dC_d / dP, zero on radar REs.
    pub rate: Array2<f64>,
}

/// Derivative of `prefix * w * log2(1 + g P)` in `P`.
#[inline]
pub fn log_term_slope(prefix_w: f64, gain: f64, power: f64) -> f64 {
    prefix_w * gain / (LN_2 * (1.0 + gain * power))
}

pub fn gradients(
    radar: &Array2<bool>,
    power: &Array2<f64>,
    gains: &ReGains,
    params: &MetricParams,
) -> Gradients {
    let smi = Zip::from(radar)
        .and(power)
        .and(&gains.sense)
        .map_collect(|&r, &p, &g| log_term_slope(params.prefix * params.weight(r), g, p));
    let rate = Zip::from(radar)
        .and(power)
        .and(&gains.comm)
        .map_collect(|&r, &p, &g| {
            if r {
                0.0
            } else {
                log_term_slope(params.prefix, g, p)
            }
        });
    Gradients { smi, rate }
}

pub fn metric_gradients(
    state: &AllocationState,
    eff: &EffectiveChannels,
    scene: &Scene,
) -> Gradients {
    gradients(
        &state.radar,
        &state.power,
        &ReGains::new(eff, scene),
        &MetricParams::from_scene(scene),
    )
}

/// `f + lambda (c - level) - rho/2 (c - level)^2`.
#[inline]
pub fn lagrangian_value(objective: f64, constraint: f64, level: f64, lambda: f64, rho: f64) -> f64 {
    let r = constraint - level;
    objective + lambda * r - 0.5 * rho * r * r
}

pub fn augmented_lagrangian(
    state: &AllocationState,
    eff: &EffectiveChannels,
    scene: &Scene,
    lambda: f64,
    rho: f64,
    rate_floor: f64,
) -> f64 {
    let pair = evaluate(
        &state.radar,
        &state.power,
        &ReGains::new(eff, scene),
        &MetricParams::from_scene(scene),
    );
    lagrangian_value(pair.smi, pair.rate, rate_floor, lambda, rho)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn params() -> MetricParams {
        MetricParams {
            prefix: 1.0,
            comm_weight: 0.5,
        }
    }

    fn random_instance(
        rng: &mut ChaCha8Rng,
        m: usize,
        n: usize,
    ) -> (Array2<bool>, Array2<f64>, ReGains) {
        let radar = Array2::from_shape_fn((m, n), |_| rng.random_bool(0.5));
        let power = Array2::from_shape_fn((m, n), |_| rng.random_range(0.01..1.0));
        let gains = ReGains {
            sense: Array2::from_shape_fn((m, n), |_| rng.random_range(0.1..10.0)),
            comm: Array2::from_shape_fn((m, n), |_| rng.random_range(0.1..10.0)),
        };
        (radar, power, gains)
    }

    #[test]
    fn unit_snr_radar_re_scores_one_bit() {
        let pair = evaluate(
            &array![[true]],
            &array![[2.0]],
            &ReGains {
                sense: array![[0.5]],
                comm: array![[7.0]],
            },
            &params(),
        );
        assert!((pair.smi - 1.0).abs() < 1e-15);
        assert_eq!(pair.rate, 0.0);
    }

    #[test]
    fn snr_three_comm_re_scores_two_bits() {
        let pair = evaluate(
            &array![[false]],
            &array![[1.0]],
            &ReGains {
                sense: array![[0.0]],
                comm: array![[3.0]],
            },
            &params(),
        );
        assert!((pair.rate - 2.0).abs() < 1e-15);
    }

    #[test]
    fn zero_power_zero_metrics() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (radar, _, gains) = random_instance(&mut rng, 3, 5);
        let pair = evaluate(&radar, &Array2::zeros((3, 5)), &gains, &params());
        assert_eq!(pair.smi, 0.0);
        assert_eq!(pair.rate, 0.0);
    }

    #[test]
    fn full_weight_matches_direct_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (radar, power, gains) = random_instance(&mut rng, 4, 4);
        let p = MetricParams {
            prefix: 0.37,
            comm_weight: 1.0,
        };
        let pair = evaluate(&radar, &power, &gains, &p);
        let mut oracle = 0.0;
        for i in 0..4 {
            for j in 0..4 {
                oracle += 0.37 * (1.0 + gains.sense[[i, j]] * power[[i, j]]).log2();
            }
        }
        assert!((pair.smi - oracle).abs() < 1e-12 * oracle);
    }

    #[test]
    fn rate_matches_direct_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (radar, power, gains) = random_instance(&mut rng, 3, 6);
        let pair = evaluate(&radar, &power, &gains, &params());
        let mut oracle = 0.0;
        for ((i, j), &r) in radar.indexed_iter() {
            if !r {
                oracle += (1.0 + gains.comm[[i, j]] * power[[i, j]]).log2();
            }
        }
        assert!((pair.rate - oracle).abs() < 1e-12 * oracle.max(1.0));
    }

    #[test]
    fn all_radar_has_zero_rate() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (_, power, gains) = random_instance(&mut rng, 2, 8);
        let pair = evaluate(&Array2::from_elem((2, 8), true), &power, &gains, &params());
        assert_eq!(pair.rate, 0.0);
    }

    #[test]
    fn gradient_at_origin() {
        let g = gradients(
            &array![[true]],
            &array![[0.0]],
            &ReGains {
                sense: array![[1.0]],
                comm: array![[1.0]],
            },
            &params(),
        );
        assert!((g.smi[[0, 0]] - 1.0 / LN_2).abs() < 1e-15);
        assert_eq!(g.rate[[0, 0]], 0.0);
    }

    #[test]
    fn gradients_match_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let (radar, power, gains) = random_instance(&mut rng, 2, 4);
            let g = gradients(&radar, &power, &gains, &params());
            let h = 1e-6;
            for idx in [(0, 0), (1, 3), (0, 2)] {
                let mut up = power.clone();
                let mut dn = power.clone();
                up[idx] += h;
                dn[idx] -= h;
                let a = evaluate(&radar, &up, &gains, &params());
                let b = evaluate(&radar, &dn, &gains, &params());
                let fd_s = (a.smi - b.smi) / (2.0 * h);
                let fd_r = (a.rate - b.rate) / (2.0 * h);
                assert!((fd_s - g.smi[idx]).abs() <= 1e-6 * g.smi[idx].abs().max(1e-3));
                assert!((fd_r - g.rate[idx]).abs() <= 1e-6 * g.rate[idx].abs().max(1e-3));
            }
        }
    }

    #[test]
    fn lagrangian_at_boundary_is_objective() {
        assert_eq!(lagrangian_value(3.5, 2.0, 2.0, 7.0, 11.0), 3.5);
        assert!((lagrangian_value(3.5, 1.0, 2.0, 0.0, 1e-12) - 3.5).abs() < 1e-11);
        let v = lagrangian_value(1.0, 3.0, 2.0, 0.5, 4.0);
        assert!((v - (1.0 + 0.5 - 2.0)).abs() < 1e-15);
    }
}
