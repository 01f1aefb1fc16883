//! Outer block-coordinate loop over the RE split, the power grid and the BD
//! phases, plus the schemes, sweeps and checks built on it.

pub mod bounds;
pub mod cost;
pub mod oracle;
pub mod pareto;
pub mod schemes;

use std::time::Instant;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bd_mod::{optimize_phases, resolve_power, PhaseSettings};
use crate::error::{Error, Result};
use crate::metrics::{evaluate, AllocationState, MetricParams, ReGains};
use crate::power_alloc::{run_power_loop, solve_exact, PowerLoopSettings, PowerProblem};
use crate::problem::Problem;
use crate::re_alloc::{run_sca, ReScores};
use crate::scene::{PhaseMatrix, Scene};

pub use bounds::{certified_bounds, check_certified_feasibility, CertifiedBounds};
pub use cost::{cost_model, CostTriple};
pub use pareto::{
    level_grid, single_objective_maxima, sweep_pareto, verify_region_properties, CurvePoint,
    ParetoCurve, RegionReport, VerifySettings,
};
pub use schemes::{Scheme, SchemeRegistry};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BlockKind {
    Init,
    Re,
    Power,
    Phase,
}

impl BlockKind {
    pub fn as_str(self) -> &'static str {
        match self {
            BlockKind::Init => "init",
            BlockKind::Re => "re",
            BlockKind::Power => "power",
            BlockKind::Phase => "phase",
        }
    }
}

/// One block update, accepted or not.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub outer_iter: usize,
    pub block: BlockKind,
    /// Incumbent metrics after the update decision.
    pub smi: f64,
    pub rate: f64,
    /// Power-loop multiplier and penalty at exit; `NaN` for other blocks.
    pub lambda: f64,
    pub rho: f64,
    pub accepted: bool,
}

/// Incumbent at the end of an outer iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OuterRecord {
    pub outer_iter: usize,
    /// Problem this iteration was solving; a chained start may switch it.
    pub problem: Problem,
    pub smi: f64,
    pub rate: f64,
    pub objective: f64,
    pub feasible: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BcdRun {
    pub scheme: String,
    pub problem: Problem,
    pub state: AllocationState,
    pub smi: f64,
    pub rate: f64,
    pub trace: Vec<TraceRow>,
    pub outer: Vec<OuterRecord>,
    pub converged: bool,
    pub outer_iters: usize,
    pub feasible: bool,
    pub seed: u64,
    pub wall_ms: f64,
    /// Every start the scheme ran, the returned one included.
    pub starts: Vec<StartSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StartSummary {
    pub label: String,
    pub outer_iters: usize,
    pub converged: bool,
    pub feasible: bool,
    pub objective: f64,
}

impl BcdRun {
    pub fn summary(&self, label: &str) -> StartSummary {
        StartSummary {
            label: label.to_string(),
            outer_iters: self.outer_iters,
            converged: self.converged,
            feasible: self.feasible,
            objective: self.objective(),
        }
    }

    /// Longest chain among all starts.
    pub fn max_start_iters(&self) -> usize {
        self.starts
            .iter()
            .map(|s| s.outer_iters)
            .max()
            .unwrap_or(self.outer_iters)
    }

    pub fn objective(&self) -> f64 {
        self.problem.split(self.smi, self.rate).0
    }

    pub fn constraint(&self) -> f64 {
        self.problem.split(self.smi, self.rate).1
    }

    /// Whether the objective never drops between consecutive feasible outer
    /// records, up to `slack` relative.
    pub fn is_monotone(&self, slack: f64) -> bool {
        self.outer.windows(2).all(|w| {
            w[0].problem != w[1].problem
                || !(w[0].feasible && w[1].feasible)
                || w[1].objective >= w[0].objective - slack * w[0].objective.abs().max(1.0)
        })
    }
}

/// Which blocks a scheme updates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Blocks {
    pub re: bool,
    pub power: bool,
    pub phase: bool,
}

impl Blocks {
    pub const FULL: Blocks = Blocks {
        re: true,
        power: true,
        phase: true,
    };
    pub const FIXED_PHASE: Blocks = Blocks {
        re: true,
        power: true,
        phase: false,
    };
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BcdSettings {
    pub max_outer: usize,
    pub outer_rel: f64,
    pub patience: usize,
    pub feasibility_rel: f64,
    pub sca_delta: f64,
    pub re_change: f64,
    pub max_sca_iters: usize,
    pub local_search_passes: usize,
    pub power: PowerLoopSettings,
    pub phase: PhaseSettings,
}

impl BcdSettings {
    pub fn from_scene(scene: &Scene) -> Self {
        let c = &scene.config;
        Self {
            max_outer: c.tolerances.max_outer,
            outer_rel: c.tolerances.outer_rel,
            patience: c.tolerances.outer_patience.max(1),
            feasibility_rel: c.tolerances.feasibility_rel,
            sca_delta: c.sca_delta,
            re_change: c.tolerances.re_change,
            max_sca_iters: c.tolerances.max_sca_iters,
            local_search_passes: c.tolerances.re_local_search_passes,
            power: PowerLoopSettings::from_config(c),
            phase: PhaseSettings::from_config(c),
        }
    }
}

/// Seeded random signs, one vector for the frame or one per symbol.
pub fn random_phases(scene: &Scene, seed: u64) -> PhaseMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x0b5e_ed00);
    let (k, m) = (scene.num_bds(), scene.grid.num_symbols);
    match scene.config.phase_mode {
        crate::config::PhaseMode::Frame => {
            let x: Vec<i8> = (0..k)
                .map(|_| {
                    if rand::Rng::random::<bool>(&mut rng) {
                        1
                    } else {
                        -1
                    }
                })
                .collect();
            PhaseMatrix::from_frame_vector(&x, m).expect("sign vector")
        }
        crate::config::PhaseMode::PerSymbol => PhaseMatrix::random(&mut rng, k, m),
    }
}

/// Seeded 50/50 random split with uniform power.
pub fn random_initial_state(
    scene: &Scene,
    phases: PhaseMatrix,
    seed: u64,
) -> Result<AllocationState> {
    let (m, n) = scene.grid.shape();
    let mut mask: Vec<bool> = (0..m * n).map(|i| i < m * n / 2).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x1a17_5eed);
    mask.shuffle(&mut rng);
    let radar = Array2::from_shape_vec((m, n), mask).expect("grid shape");
    AllocationState::uniform(&scene.config, radar, phases)
}

struct Incumbent {
    state: AllocationState,
    gains: ReGains,
    smi: f64,
    rate: f64,
}

impl Incumbent {
    fn split(&self, problem: &Problem) -> (f64, f64) {
        problem.split(self.smi, self.rate)
    }
}

/// `(feasible, objective)` when a point meets the floor, constraint value otherwise.
pub(crate) fn improves(problem: &Problem, rel: f64, cand: (f64, f64), inc: (f64, f64)) -> bool {
    let cf = problem.satisfied(cand.1, rel);
    let inf = problem.satisfied(inc.1, rel);
    match (cf, inf) {
        (true, true) => cand.0 >= inc.0,
        (true, false) => true,
        (false, true) => false,
        (false, false) => cand.1 > inc.1 || (cand.1 == inc.1 && cand.0 >= inc.0),
    }
}

fn rel_change(new: f64, old: f64) -> f64 {
    let scale = old.abs().max(new.abs());
    if scale == 0.0 {
        0.0
    } else {
        (new - old).abs() / scale
    }
}

/// Run the alternating loop from `init`.
pub fn run_bcd(
    scene: &Scene,
    problem: &Problem,
    init: AllocationState,
    blocks: Blocks,
    settings: &BcdSettings,
    scheme: &str,
) -> Result<BcdRun> {
    let start = Instant::now();
    let params = MetricParams::from_scene(scene);
    let rel = settings.feasibility_rel;
    let gains = ReGains::for_phases(scene, &init.phases)?;
    let pair = evaluate(&init.radar, &init.power, &gains, &params);
    let mut inc = Incumbent {
        state: init,
        gains,
        smi: pair.smi,
        rate: pair.rate,
    };
    let mut trace = vec![TraceRow {
        outer_iter: 0,
        block: BlockKind::Init,
        smi: inc.smi,
        rate: inc.rate,
        lambda: f64::NAN,
        rho: f64::NAN,
        accepted: true,
    }];
    let mut outer = Vec::new();
    let mut stagnant = 0;
    let mut converged = false;
    let mut iters = 0;
    let phase_active = blocks.phase && scene.num_bds() > 0;

    while iters < settings.max_outer.max(1) {
        iters += 1;
        let (smi0, rate0) = (inc.smi, inc.rate);

        if blocks.re {
            let radar = re_block(scene, problem, &inc, &params, settings)?;
            let pair = evaluate(&radar, &inc.state.power, &inc.gains, &params);
            let accepted = radar != inc.state.radar
                && improves(
                    problem,
                    rel,
                    problem.split(pair.smi, pair.rate),
                    inc.split(problem),
                );
            if accepted {
                inc.state.radar = radar;
                inc.smi = pair.smi;
                inc.rate = pair.rate;
            }
            if settings.local_search_passes > 0 {
                if let Some(found) = flip_search(scene, problem, &inc, &params, settings)? {
                    inc.state.radar = found.radar;
                    inc.state.power = found.power;
                    inc.smi = found.smi;
                    inc.rate = found.rate;
                }
            }
            trace.push(row(
                iters,
                BlockKind::Re,
                &inc,
                f64::NAN,
                f64::NAN,
                accepted,
            ));
        }

        if blocks.power {
            let pp = PowerProblem::new(
                &inc.state.radar,
                &inc.gains,
                &params,
                problem.mode,
                scene.config.total_power_w,
                scene.config.max_re_power_w,
            )?;
            let out = run_power_loop(&pp, problem, &settings.power);
            let (lambda, rho) = out
                .trace
                .last()
                .map_or((f64::NAN, f64::NAN), |s| (s.lambda, s.rho));
            let pair = evaluate(&inc.state.radar, &out.power, &inc.gains, &params);
            let accepted = improves(
                problem,
                rel,
                problem.split(pair.smi, pair.rate),
                inc.split(problem),
            );
            if accepted {
                inc.state.power = out.power;
                inc.smi = pair.smi;
                inc.rate = pair.rate;
            }
            trace.push(row(iters, BlockKind::Power, &inc, lambda, rho, accepted));
        }

        if phase_active {
            let seed = scene
                .config
                .seed
                .wrapping_mul(0x9e37_79b9)
                .wrapping_add(iters as u64);
            let out = optimize_phases(scene, &inc.state, problem, &settings.phase, seed)?;
            let gains = ReGains::for_phases(scene, &out.phases)?;
            let power = match &settings.phase.repower {
                Some(ps) => resolve_power(scene, &inc.state.radar, &gains, problem, ps)?,
                None => inc.state.power.clone(),
            };
            let pair = evaluate(&inc.state.radar, &power, &gains, &params);
            let accepted = out.phases != inc.state.phases
                && improves(
                    problem,
                    rel,
                    problem.split(pair.smi, pair.rate),
                    inc.split(problem),
                );
            if accepted {
                inc.state.phases = out.phases;
                inc.state.power = power;
                inc.gains = gains;
                inc.smi = pair.smi;
                inc.rate = pair.rate;
            }
            trace.push(row(
                iters,
                BlockKind::Phase,
                &inc,
                f64::NAN,
                f64::NAN,
                accepted,
            ));
        }

        let (objective, constraint) = inc.split(problem);
        outer.push(OuterRecord {
            outer_iter: iters,
            problem: *problem,
            smi: inc.smi,
            rate: inc.rate,
            objective,
            feasible: problem.satisfied(constraint, rel),
        });
        if rel_change(inc.smi, smi0) < settings.outer_rel
            && rel_change(inc.rate, rate0) < settings.outer_rel
        {
            stagnant += 1;
        } else {
            stagnant = 0;
        }
        if stagnant >= settings.patience {
            converged = true;
            break;
        }
    }

    let feasible = problem.satisfied(inc.split(problem).1, rel);
    Ok(BcdRun {
        scheme: scheme.to_string(),
        problem: *problem,
        smi: inc.smi,
        rate: inc.rate,
        state: inc.state,
        trace,
        outer,
        converged,
        outer_iters: iters,
        feasible,
        seed: scene.config.seed,
        wall_ms: start.elapsed().as_secs_f64() * 1e3,
        starts: Vec::new(),
    })
}

fn row(
    outer_iter: usize,
    block: BlockKind,
    inc: &Incumbent,
    lambda: f64,
    rho: f64,
    accepted: bool,
) -> TraceRow {
    TraceRow {
        outer_iter,
        block,
        smi: inc.smi,
        rate: inc.rate,
        lambda,
        rho,
        accepted,
    }
}

/// RE split for the incumbent power and phases. When no split can meet the
/// floor at this power, the constraint-maximal split is returned.
fn re_block(
    scene: &Scene,
    problem: &Problem,
    inc: &Incumbent,
    params: &MetricParams,
    settings: &BcdSettings,
) -> Result<Array2<bool>> {
    let sense = crate::metrics::radar_scores(&inc.state.power, &inc.gains, params);
    let rate = crate::metrics::link_rate_scores(&inc.state.power, &inc.gains, params);
    let scores = ReScores::new(&sense, &rate, scene.config.comm_sensing_weight)?;
    let start = Array2::zeros(inc.state.radar.dim());
    match run_sca(
        &start,
        &scores,
        problem,
        settings.sca_delta,
        settings.re_change,
        settings.max_sca_iters,
        problem.slack(settings.feasibility_rel),
    ) {
        Ok(out) => Ok(out.radar),
        Err(Error::Infeasible { .. }) => {
            let (_, con) = scores.forms(problem.mode);
            let radar: Vec<bool> = con.coef.iter().map(|&c| c > 0.0).collect();
            Ok(Array2::from_shape_vec(inc.state.radar.dim(), radar).expect("grid shape"))
        }
        Err(e) => Err(e),
    }
}

struct FlipResult {
    radar: Array2<bool>,
    power: Array2<f64>,
    smi: f64,
    rate: f64,
}

/// Best-improvement search over single RE flips, each scored after re-solving
/// the power block. Returns `None` when no flip improves the incumbent.
fn flip_search(
    scene: &Scene,
    problem: &Problem,
    inc: &Incumbent,
    params: &MetricParams,
    settings: &BcdSettings,
) -> Result<Option<FlipResult>> {
    let rel = settings.feasibility_rel;
    let solve = |radar: &Array2<bool>| -> Result<FlipResult> {
        let pp = PowerProblem::new(
            radar,
            &inc.gains,
            params,
            problem.mode,
            scene.config.total_power_w,
            scene.config.max_re_power_w,
        )?;
        let (power, _) = solve_exact(&pp, problem, rel);
        let pair = evaluate(radar, &power, &inc.gains, params);
        Ok(FlipResult {
            radar: radar.clone(),
            power,
            smi: pair.smi,
            rate: pair.rate,
        })
    };
    let mut best: Option<FlipResult> = None;
    let mut current = (inc.state.radar.clone(), inc.split(problem));
    for _ in 0..settings.local_search_passes {
        let n = current.0.len();
        let candidates: Vec<FlipResult> = (0..n)
            .into_par_iter()
            .map(|i| {
                let mut radar = current.0.clone();
                let cell = radar.iter_mut().nth(i).expect("index in range");
                *cell = !*cell;
                solve(&radar)
            })
            .collect::<Result<_>>()?;
        let winner = candidates
            .into_iter()
            .filter(|c| {
                let s = problem.split(c.smi, c.rate);
                improves(problem, rel, s, current.1) && s != current.1
            })
            .reduce(|a, b| {
                if improves(
                    problem,
                    rel,
                    problem.split(b.smi, b.rate),
                    problem.split(a.smi, a.rate),
                ) {
                    b
                } else {
                    a
                }
            });
        let Some(w) = winner else {
            break;
        };
        current = (w.radar.clone(), problem.split(w.smi, w.rate));
        best = Some(w);
    }
    Ok(best)
}

/// Maximize `I_r` subject to `C_d >= gamma_c` with `scheme`.
pub fn solve_p1(
    scene: &Scene,
    gamma_c: f64,
    scheme: &dyn Scheme,
    settings: &BcdSettings,
) -> Result<BcdRun> {
    scheme.solve(scene, &Problem::p1(gamma_c), settings)
}

/// Maximize `C_d` subject to `I_r >= gamma_s` with `scheme`.
pub fn solve_p2(
    scene: &Scene,
    gamma_s: f64,
    scheme: &dyn Scheme,
    settings: &BcdSettings,
) -> Result<BcdRun> {
    scheme.solve(scene, &Problem::p2(gamma_s), settings)
}
