//! Constrained sweeps that trace the boundary, and the region checks run on them.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{evaluate_state, AllocationState};
use crate::problem::{Mode, Problem};
use crate::scene::Scene;

use super::{certified_bounds, BcdRun, BcdSettings, CertifiedBounds, Scheme, TraceRow};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub scheme: String,
    pub mode: Mode,
    pub constraint_level: f64,
    pub smi: f64,
    pub rate: f64,
    pub feasible: bool,
    pub converged: bool,
    pub outer_iters: usize,
    pub seed: u64,
    pub wall_ms: f64,
    pub dominated: bool,
    /// Level whose solution was carried down to this one.
    pub carried_from: Option<f64>,
    pub error: Option<String>,
    #[serde(skip)]
    pub state: Option<AllocationState>,
    #[serde(skip)]
    pub trace: Vec<TraceRow>,
}

impl CurvePoint {
    pub fn from_run(run: BcdRun) -> Self {
        Self {
            scheme: run.scheme,
            mode: run.problem.mode,
            constraint_level: run.problem.level,
            smi: run.smi,
            rate: run.rate,
            feasible: run.feasible,
            converged: run.converged,
            outer_iters: run.outer_iters,
            seed: run.seed,
            wall_ms: run.wall_ms,
            dominated: false,
            carried_from: None,
            error: None,
            state: Some(run.state),
            trace: run.trace,
        }
    }

    fn objective(&self) -> f64 {
        Problem {
            mode: self.mode,
            level: self.constraint_level,
        }
        .split(self.smi, self.rate)
        .0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoCurve {
    pub scheme: String,
    pub mode: Mode,
    pub points: Vec<CurvePoint>,
}

impl ParetoCurve {
    /// Feasible, non-dominated points with duplicates removed, in level order.
    pub fn boundary(&self) -> Vec<&CurvePoint> {
        let mut out: Vec<&CurvePoint> = Vec::new();
        for p in self.points.iter().filter(|p| p.feasible && !p.dominated) {
            if !out.iter().any(|q| q.smi == p.smi && q.rate == p.rate) {
                out.push(p);
            }
        }
        out
    }
}

/// `n` evenly spaced levels from 2% to 98% of `max`.
pub fn level_grid(max: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.5 * max],
        _ => (0..n)
            .map(|i| max * (0.02 + 0.96 * i as f64 / (n - 1) as f64))
            .collect(),
    }
}

/// `(I_max, C_max)` from the two unconstrained solves.
pub fn single_objective_maxima(
    scene: &Scene,
    scheme: &dyn Scheme,
    settings: &BcdSettings,
) -> Result<(f64, f64)> {
    let i_max = scheme.solve(scene, &Problem::p1(0.0), settings)?.smi;
    let c_max = scheme.solve(scene, &Problem::p2(0.0), settings)?.rate;
    Ok((i_max, c_max))
}

/// Solve every level, carry better solutions from higher levels down to lower
/// ones (a point meeting a higher floor meets every lower one) and flag
/// dominated points.
pub fn sweep_pareto(
    scene: &Scene,
    levels: &[f64],
    mode: Mode,
    scheme: &dyn Scheme,
    settings: &BcdSettings,
    parallel: bool,
) -> Result<ParetoCurve> {
    if levels.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Domain(
            "sweep levels must be sorted ascending".into(),
        ));
    }
    let solve_one = |&level: &f64| -> CurvePoint {
        let problem = Problem { mode, level };
        match scheme.solve(scene, &problem, settings) {
            Ok(run) => CurvePoint::from_run(run),
            Err(e) => CurvePoint {
                scheme: scheme.name().to_string(),
                mode,
                constraint_level: level,
                smi: f64::NAN,
                rate: f64::NAN,
                feasible: false,
                converged: false,
                outer_iters: 0,
                seed: scene.config.seed,
                wall_ms: 0.0,
                dominated: false,
                carried_from: None,
                error: Some(e.to_string()),
                state: None,
                trace: Vec::new(),
            },
        }
    };
    let mut points: Vec<CurvePoint> = if parallel {
        levels.par_iter().map(solve_one).collect()
    } else {
        levels.iter().map(solve_one).collect()
    };
    for i in (0..points.len().saturating_sub(1)).rev() {
        let (lo, hi) = points.split_at_mut(i + 1);
        let (here, above) = (&mut lo[i], &hi[0]);
        if above.feasible && (!here.feasible || above.objective() > here.objective()) {
            here.smi = above.smi;
            here.rate = above.rate;
            here.feasible = true;
            here.state.clone_from(&above.state);
            here.carried_from = Some(above.carried_from.unwrap_or(above.constraint_level));
        }
    }
    mark_dominated(&mut points);
    Ok(ParetoCurve {
        scheme: scheme.name().to_string(),
        mode,
        points,
    })
}

fn dominates(a: &CurvePoint, b: &CurvePoint) -> bool {
    a.smi >= b.smi && a.rate >= b.rate && (a.smi > b.smi || a.rate > b.rate)
}

pub fn mark_dominated(points: &mut [CurvePoint]) {
    let flags: Vec<bool> = points
        .iter()
        .map(|p| p.feasible && points.iter().any(|q| q.feasible && dominates(q, p)))
        .collect();
    for (p, d) in points.iter_mut().zip(flags) {
        p.dominated = d;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub constraint_level: f64,
    pub smi: f64,
    pub rate: f64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionReport {
    pub points_checked: usize,
    pub throttles_checked: usize,
    pub throttles_inside: usize,
    pub smi_bound: f64,
    pub rate_bound: f64,
    pub violations: Vec<Violation>,
}

impl RegionReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifySettings {
    pub throttles_per_point: usize,
    pub seed: u64,
}

impl Default for VerifySettings {
    fn default() -> Self {
        Self {
            throttles_per_point: 50,
            seed: 0,
        }
    }
}

fn throttle<R: Rng + ?Sized>(state: &AllocationState, rng: &mut R) -> AllocationState {
    let mut out = state.clone();
    let global: f64 = rng.random_range(0.05..1.0);
    let mute_prob: f64 = rng.random();
    for (p, &radar) in out.power.iter_mut().zip(&state.radar) {
        let local: f64 = rng.random_range(0.5..=1.0);
        *p *= global * local;
        if !radar && rng.random::<f64>() < mute_prob {
            *p = 0.0;
        }
    }
    out
}

/// Downward closure and boundedness of every boundary point of `curve`.
pub fn verify_region_properties(
    curve: &ParetoCurve,
    scene: &Scene,
    settings: &VerifySettings,
) -> Result<RegionReport> {
    let CertifiedBounds {
        smi: smi_ub,
        rate: rate_ub,
    } = certified_bounds(scene);
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    let cfg = &scene.config;
    let mut report = RegionReport {
        points_checked: 0,
        throttles_checked: 0,
        throttles_inside: 0,
        smi_bound: smi_ub,
        rate_bound: rate_ub,
        violations: Vec::new(),
    };
    let tol = 1e-12;
    for point in curve.boundary() {
        let Some(state) = &point.state else {
            continue;
        };
        report.points_checked += 1;
        let mut fail = |reason: String| {
            report.violations.push(Violation {
                constraint_level: point.constraint_level,
                smi: point.smi,
                rate: point.rate,
                reason,
            })
        };
        let base = evaluate_state(state, scene)?;
        if !(0.0..=smi_ub * (1.0 + 1e-9)).contains(&base.smi)
            || !(0.0..=rate_ub * (1.0 + 1e-9)).contains(&base.rate)
        {
            fail(format!("outside [0, {smi_ub:.6e}] x [0, {rate_ub:.6e}]"));
        }
        if state.check_power(cfg, 1e-9).is_err() {
            fail("power budget violated".into());
        }

        let mut half = state.clone();
        half.power.mapv_inplace(|p| 0.5 * p);
        let h = evaluate_state(&half, scene)?;
        let strict = |new: f64, old: f64| if old > 0.0 { new < old } else { new <= old };
        if !strict(h.smi, base.smi) || !strict(h.rate, base.rate) {
            fail("halving power did not decrease both metrics".into());
        }

        let mut muted = state.clone();
        for (p, &radar) in muted.power.iter_mut().zip(&state.radar) {
            if !radar {
                *p = 0.0;
            }
        }
        let mm = evaluate_state(&muted, scene)?;
        if mm.rate != 0.0 || mm.smi > base.smi * (1.0 + tol) {
            fail("muting data REs left a positive rate or raised the SMI".into());
        }

        for _ in 0..settings.throttles_per_point {
            let t = throttle(state, &mut rng);
            let m = evaluate_state(&t, scene)?;
            report.throttles_checked += 1;
            let inside = t.check_power(cfg, 1e-9).is_ok()
                && m.smi >= 0.0
                && m.rate >= 0.0
                && m.smi <= base.smi * (1.0 + tol)
                && m.rate <= base.rate * (1.0 + tol);
            if inside {
                report.throttles_inside += 1;
            } else {
                fail(format!(
                    "throttled point ({:.6e}, {:.6e}) left the region",
                    m.smi, m.rate
                ));
            }
        }
    }
    let boundary = curve.boundary();
    for (i, a) in boundary.iter().enumerate() {
        for b in &boundary[i + 1..] {
            if dominates(a, b) || dominates(b, a) {
                report.violations.push(Violation {
                    constraint_level: a.constraint_level,
                    smi: a.smi,
                    rate: a.rate,
                    reason: format!(
                        "dominance between levels {} and {}",
                        a.constraint_level, b.constraint_level
                    ),
                });
            }
        }
    }
    Ok(report)
}

/// Whether the objective is non-increasing in the level, up to `tol` relative.
pub fn is_level_monotone(curve: &ParetoCurve, tol: f64) -> bool {
    let feasible: Vec<&CurvePoint> = curve.points.iter().filter(|p| p.feasible).collect();
    feasible
        .windows(2)
        .all(|w| w[1].objective() <= w[0].objective() + tol * w[0].objective().abs().max(1.0))
}
