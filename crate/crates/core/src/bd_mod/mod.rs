//! BD phase selection: linearize both metrics in the squared channel
//! magnitudes, lift the sign vector to an SDP, solve it and round back.

pub mod forms;
pub mod rounding;
pub mod sdp;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::{PhaseMode, SceneConfig};
use crate::error::Result;
use crate::metrics::{evaluate, AllocationState, MetricParams, ReGains};
use crate::power_alloc::{solve_exact, PowerLoopSettings, PowerProblem};
use crate::problem::Problem;
use crate::scene::{PhaseMatrix, Scene};

use forms::{lifted_value, phase_block_forms};
use rounding::{polish_flips, round_solution, PhaseObjective, RoundingSettings};
use sdp::{solve_sdp, SdpSettings, TraceRow};

/// True metrics of the scene when the sign vector `x` is written into the
/// listed symbols of `base`.
pub struct MetricObjective<'a> {
    pub scene: &'a Scene,
    pub radar: &'a ndarray::Array2<bool>,
    pub power: &'a ndarray::Array2<f64>,
    pub base: &'a PhaseMatrix,
    pub symbols: &'a [usize],
    pub problem: Problem,
    pub floor: f64,
    /// Re-solve the power block for every candidate instead of keeping `power`.
    pub repower: Option<PowerLoopSettings>,
}

/// Exact power optimum at a fixed split and fixed gains.
pub fn resolve_power(
    scene: &Scene,
    radar: &ndarray::Array2<bool>,
    gains: &ReGains,
    problem: &Problem,
    settings: &PowerLoopSettings,
) -> Result<ndarray::Array2<f64>> {
    let pp = PowerProblem::new(
        radar,
        gains,
        &MetricParams::from_scene(scene),
        problem.mode,
        scene.config.total_power_w,
        scene.config.max_re_power_w,
    )?;
    Ok(solve_exact(&pp, problem, settings.feasibility_rel).0)
}

impl MetricObjective<'_> {
    pub fn phases_for(&self, x: &[i8]) -> PhaseMatrix {
        let mut p = self.base.clone();
        for &m in self.symbols {
            p.set_symbol_vector(m, x);
        }
        p
    }

    pub fn evaluate_phases(&self, phases: &PhaseMatrix) -> (f64, f64) {
        let eff = self
            .scene
            .effective(phases)
            .expect("phase matrix shaped by construction");
        let gains = ReGains::new(&eff, self.scene);
        let params = MetricParams::from_scene(self.scene);
        let pair = match &self.repower {
            Some(settings) => {
                let power = resolve_power(self.scene, self.radar, &gains, &self.problem, settings)
                    .expect("split and gains share the grid shape");
                evaluate(self.radar, &power, &gains, &params)
            }
            None => evaluate(self.radar, self.power, &gains, &params),
        };
        self.problem.split(pair.smi, pair.rate)
    }
}

impl PhaseObjective for MetricObjective<'_> {
    fn num_bds(&self) -> usize {
        self.base.num_bds()
    }

    fn evaluate(&self, x: &[i8]) -> (f64, f64) {
        self.evaluate_phases(&self.phases_for(x))
    }

    fn floor(&self) -> f64 {
        self.floor
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseSettings {
    pub mode: PhaseMode,
    pub max_iters: usize,
    /// Continue while at least this many sign bits flip.
    pub min_changes: f64,
    pub sdp: SdpSettings,
    pub rounding: RoundingSettings,
    pub feasibility_rel: f64,
    pub repower: Option<PowerLoopSettings>,
    pub flip_polish: bool,
}

impl PhaseSettings {
    pub fn from_config(config: &SceneConfig) -> Self {
        Self {
            mode: config.phase_mode,
            max_iters: config.tolerances.max_phase_iters,
            min_changes: config.tolerances.phase_change,
            sdp: SdpSettings {
                max_iters: config.sdr.sdp_max_iters,
                tolerance: config.sdr.sdp_tolerance,
            },
            rounding: RoundingSettings {
                max_slope: config.sdr.anneal_max_slope,
                samples: config.sdr.randomization_samples,
                rank_ratio: config.sdr.rank_ratio,
            },
            feasibility_rel: config.tolerances.feasibility_rel,
            repower: config
                .sdr
                .power_aware_rounding
                .then(|| PowerLoopSettings::from_config(config)),
            flip_polish: config.sdr.flip_polish,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseOutcome {
    pub phases: PhaseMatrix,
    pub iterations: usize,
    /// Total sign bits changed.
    pub flips: usize,
    /// Largest certified SDP bound seen, in surrogate units.
    pub sdp_bound: Option<f64>,
}

/// Objective and constraint forms summed over `symbols`, and the surrogate
/// floor that linearizes the true constraint at the current phases.
pub struct PhaseSubproblem {
    pub objective: DMatrix<f64>,
    pub constraint: DMatrix<f64>,
    pub surrogate_floor: f64,
}

pub fn phase_subproblem(
    scene: &Scene,
    state: &AllocationState,
    problem: &Problem,
    symbols: &[usize],
    current_constraint: f64,
) -> Result<PhaseSubproblem> {
    let (obj_forms, con_forms) = phase_block_forms(scene, state, problem)?;
    let d = scene.num_bds() + 1;
    let mut objective = DMatrix::zeros(d, d);
    let mut constraint = DMatrix::zeros(d, d);
    let mut at_current = 0.0;
    for &m in symbols {
        objective += &obj_forms[m];
        constraint += &con_forms[m];
        at_current += lifted_value(&con_forms[m], &state.phases.symbol_vector(m));
    }
    Ok(PhaseSubproblem {
        objective,
        constraint,
        surrogate_floor: problem.level - current_constraint + at_current,
    })
}

/// Phase block of the alternating loop. Never returns phases that are worse
/// than the incumbent under the (feasibility, objective) order.
pub fn optimize_phases(
    scene: &Scene,
    state: &AllocationState,
    problem: &Problem,
    settings: &PhaseSettings,
    seed: u64,
) -> Result<PhaseOutcome> {
    let k = scene.num_bds();
    let m_sym = scene.grid.num_symbols;
    let mut phases = state.phases.clone();
    if k == 0 {
        return Ok(PhaseOutcome {
            phases,
            iterations: 0,
            flips: 0,
            sdp_bound: None,
        });
    }
    let groups: Vec<Vec<usize>> = match settings.mode {
        PhaseMode::Frame => vec![(0..m_sym).collect()],
        PhaseMode::PerSymbol => (0..m_sym).map(|m| vec![m]).collect(),
    };
    let floor = problem.level - problem.slack(settings.feasibility_rel);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut total_flips = 0;
    let mut iterations = 0;
    let mut sdp_bound: Option<f64> = None;
    while iterations < settings.max_iters.max(1) {
        iterations += 1;
        let mut flips = 0;
        for symbols in &groups {
            let current = AllocationState {
                radar: state.radar.clone(),
                power: state.power.clone(),
                phases: phases.clone(),
            };
            let objective = MetricObjective {
                scene,
                radar: &state.radar,
                power: &state.power,
                base: &phases,
                symbols,
                problem: *problem,
                floor,
                repower: settings.repower,
            };
            let (inc_obj, inc_con) = objective.evaluate_phases(&phases);
            let inc_feasible = inc_con >= floor;
            let sub = phase_subproblem(scene, &current, problem, symbols, inc_con)?;
            let row = (problem.level > 0.0).then(|| TraceRow {
                a: sub.constraint.clone(),
                b: sub.surrogate_floor,
            });
            let sol = match solve_sdp(&sub.objective, row.as_ref(), &settings.sdp) {
                Ok(sol) => sol,
                Err(e) if e.is_infeasible() => solve_sdp(&sub.objective, None, &settings.sdp)?,
                Err(e) => return Err(e),
            };
            sdp_bound = Some(sdp_bound.map_or(sol.upper_bound, |b: f64| b.max(sol.upper_bound)));
            let mut cand = round_solution(&sol, &objective, &settings.rounding, &mut rng);
            if settings.flip_polish {
                cand = polish_flips(cand, &objective);
            }
            let accept = if inc_feasible {
                cand.feasible && cand.objective > inc_obj
            } else {
                cand.feasible || cand.constraint > inc_con
            };
            if accept {
                let next = objective.phases_for(&cand.x);
                flips += next.hamming(&phases);
                phases = next;
            }
        }
        total_flips += flips;
        if (flips as f64) < settings.min_changes {
            break;
        }
    }
    Ok(PhaseOutcome {
        phases,
        iterations,
        flips: total_flips,
        sdp_bound,
    })
}
