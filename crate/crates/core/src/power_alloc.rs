//! Power allocation at a fixed RE split and fixed BD phases.
//!
//! Every RE carries a utility `A log2(1 + a P) + w B log2(1 + b P)` where the
//! first term belongs to the maximized metric and the second to the floored
//! one. For a fixed constraint weight `w` the problem is separable and is
//! solved by water-filling: each RE's stationarity condition is a quadratic
//! in `P`, and the water level is found by bisection on the budget. The
//! augmented Lagrangian outer loop drives `w` to the constraint multiplier.

use std::f64::consts::LN_2;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{MetricParams, ReGains};
use crate::problem::{Mode, Problem};

/// One RE's two log terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReUtility {
    /// Prefix-times-weight of the maximized metric.
    pub obj_weight: f64,
    /// SNR per watt of the maximized metric.
    pub obj_gain: f64,
    pub con_weight: f64,
    pub con_gain: f64,
}

impl ReUtility {
    #[inline]
    pub fn objective(&self, p: f64) -> f64 {
        self.obj_weight * (self.obj_gain * p).ln_1p() / LN_2
    }

    #[inline]
    pub fn constraint(&self, p: f64) -> f64 {
        self.con_weight * (self.con_gain * p).ln_1p() / LN_2
    }

    #[inline]
    pub fn con_slope(&self, p: f64) -> f64 {
        self.con_weight * self.con_gain / (LN_2 * (1.0 + self.con_gain * p))
    }

    /// Marginal utility at constraint weight `omega`.
    #[inline]
    pub fn slope(&self, p: f64, omega: f64) -> f64 {
        self.obj_weight * self.obj_gain / (LN_2 * (1.0 + self.obj_gain * p))
            + omega * self.con_slope(p)
    }

    /// Power at which the marginal utility equals `mu`, clamped to `[0, cap]`.
    pub fn power_at_level(&self, omega: f64, mu: f64, cap: f64) -> f64 {
        let (a, b) = (self.obj_gain, self.con_gain);
        let alpha = self.obj_weight * a / LN_2;
        let beta = omega * self.con_weight * b / LN_2;
        if alpha + beta <= mu {
            return 0.0;
        }
        if mu <= 0.0 {
            return cap;
        }
        // mu a b P^2 + (mu (a + b) - alpha b - beta a) P + (mu - alpha - beta) = 0
        let qa = mu * a * b;
        let qb = mu * (a + b) - alpha * b - beta * a;
        let qc = mu - alpha - beta;
        let p = if qa > 0.0 {
            let disc = (qb * qb - 4.0 * qa * qc).max(0.0).sqrt();
            if qb > 0.0 {
                -2.0 * qc / (qb + disc)
            } else {
                (disc - qb) / (2.0 * qa)
            }
        } else {
            -qc / qb
        };
        p.clamp(0.0, cap)
    }
}

/// A separable power problem on a flattened grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerProblem {
    pub terms: Vec<ReUtility>,
    pub shape: (usize, usize),
    /// `P_t`
    pub budget: f64,
    /// `P_max`
    pub cap: f64,
}

impl PowerProblem {
    pub fn new(
        radar: &Array2<bool>,
        gains: &ReGains,
        params: &MetricParams,
        mode: Mode,
        budget: f64,
        cap: f64,
    ) -> Result<Self> {
        if radar.dim() != gains.dim() {
            return Err(Error::Shape(format!(
                "indicator {:?}, gains {:?}",
                radar.dim(),
                gains.dim()
            )));
        }
        let terms = radar
            .iter()
            .zip(gains.sense.iter().zip(&gains.comm))
            .map(|(&is_radar, (&gs, &gc))| {
                let sense_w = params.prefix * params.weight(is_radar);
                let rate_w = if is_radar { 0.0 } else { params.prefix };
                match mode {
                    Mode::P1 => ReUtility {
                        obj_weight: sense_w,
                        obj_gain: gs,
                        con_weight: rate_w,
                        con_gain: gc,
                    },
                    Mode::P2 => ReUtility {
                        obj_weight: rate_w,
                        obj_gain: gc,
                        con_weight: sense_w,
                        con_gain: gs,
                    },
                }
            })
            .collect();
        Ok(Self {
            terms,
            shape: radar.dim(),
            budget,
            cap,
        })
    }

    pub fn objective(&self, power: &[f64]) -> f64 {
        self.terms
            .iter()
            .zip(power)
            .map(|(t, &p)| t.objective(p))
            .sum()
    }

    pub fn constraint(&self, power: &[f64]) -> f64 {
        self.terms
            .iter()
            .zip(power)
            .map(|(t, &p)| t.constraint(p))
            .sum()
    }

    pub fn con_gradient_norm(&self, power: &[f64]) -> f64 {
        self.terms
            .iter()
            .zip(power)
            .map(|(t, &p)| t.con_slope(p).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// The same REs with the objective dropped: maximizes the floored metric alone.
    pub fn constraint_only(&self) -> Self {
        let terms = self
            .terms
            .iter()
            .map(|t| ReUtility {
                obj_weight: t.con_weight,
                obj_gain: t.con_gain,
                con_weight: 0.0,
                con_gain: 0.0,
            })
            .collect();
        Self {
            terms,
            ..self.clone()
        }
    }

    pub fn to_grid(&self, power: Vec<f64>) -> Array2<f64> {
        Array2::from_shape_vec(self.shape, power).expect("power length matches grid")
    }
}

/// Water-filling at fixed constraint weight.
#[derive(Debug, Clone, PartialEq)]
pub struct Waterfill {
    pub power: Vec<f64>,
    /// Common marginal utility on interior REs; zero when the budget is slack.
    pub level: f64,
}

/// Maximize `sum_i u_i(P_i; omega)` over `sum P <= P_t`, `0 <= P <= P_max`.
pub fn waterfill(problem: &PowerProblem, omega: f64) -> Waterfill {
    let cap = problem.cap;
    let active: Vec<bool> = problem
        .terms
        .iter()
        .map(|t| t.slope(0.0, omega) > 0.0)
        .collect();
    let n_active = active.iter().filter(|&&a| a).count();
    let at_level = |mu: f64| -> Vec<f64> {
        problem
            .terms
            .iter()
            .zip(&active)
            .map(|(t, &on)| {
                if on {
                    t.power_at_level(omega, mu, cap)
                } else {
                    0.0
                }
            })
            .collect()
    };
    if n_active == 0 {
        return Waterfill {
            power: vec![0.0; problem.terms.len()],
            level: 0.0,
        };
    }
    if n_active as f64 * cap <= problem.budget {
        return Waterfill {
            power: at_level(0.0),
            level: 0.0,
        };
    }
    let budget = problem.budget;
    let total = |p: &[f64]| p.iter().sum::<f64>();
    let spent = |log_mu: f64| -> f64 {
        let mu = log_mu.exp();
        problem
            .terms
            .iter()
            .zip(&active)
            .filter(|(_, &on)| on)
            .map(|(t, _)| t.power_at_level(omega, mu, cap))
            .sum::<f64>()
            - budget
    };
    let hi0 = problem
        .terms
        .iter()
        .map(|t| t.slope(0.0, omega))
        .fold(0.0, f64::max);
    let mut lo0 = hi0;
    while spent(lo0.ln()) < 0.0 {
        lo0 *= 0.5;
        if lo0 < f64::MIN_POSITIVE {
            break;
        }
    }
    let (a, b) = if lo0 < hi0 {
        let (fa, fb) = (spent(lo0.ln()), spent(hi0.ln()));
        illinois(spent, lo0.ln(), fa, hi0.ln(), fb, 1e-15)
    } else {
        (lo0.ln(), hi0.ln())
    };
    let (lo, hi) = (a.exp(), b.exp());
    // Interpolate between the bracketing allocations to spend the budget exactly.
    let p_lo = at_level(lo);
    let p_hi = at_level(hi);
    let (s_lo, s_hi) = (total(&p_lo), total(&p_hi));
    let theta = if s_lo > s_hi {
        ((budget - s_hi) / (s_lo - s_hi)).clamp(0.0, 1.0)
    } else {
        1.0
    };
    let power = p_lo
        .iter()
        .zip(&p_hi)
        .map(|(l, h)| (h + theta * (l - h)).clamp(0.0, cap))
        .collect();
    Waterfill {
        power,
        level: (lo * hi).sqrt(),
    }
}

/// Largest relative stationarity violation `|u'(P) - mu| / mu` over REs
/// strictly inside `(0, P_max)`.
pub fn kkt_residual(problem: &PowerProblem, power: &[f64], omega: f64, level: f64) -> f64 {
    if level <= 0.0 {
        return 0.0;
    }
    let tol = 1e-12 * problem.cap;
    problem
        .terms
        .iter()
        .zip(power)
        .filter(|(_, &p)| p > tol && p < problem.cap - tol)
        .map(|(t, &p)| (t.slope(p, omega) - level).abs() / level)
        .fold(0.0, f64::max)
}

/// Exact maximizer of the inequality-form augmented Lagrangian
/// `f + psi(c - level)`, `psi(t) = lambda t - rho/2 t^2` for `t < lambda/rho`.
///
/// Its stationarity is water-filling at weight `omega = max(0, lambda - rho (c - level))`,
/// so the fixed point in `omega` is found by bisection.
#[derive(Debug, Clone, PartialEq)]
pub struct InnerSolution {
    pub fill: Waterfill,
    pub omega: f64,
}

pub fn inner_solve(problem: &PowerProblem, lambda: f64, rho: f64, level: f64) -> InnerSolution {
    let target = |omega: f64, fill: &Waterfill| {
        (lambda - rho * (problem.constraint(&fill.power) - level)).max(0.0) - omega
    };
    let fill0 = waterfill(problem, 0.0);
    if target(0.0, &fill0) <= 0.0 {
        return InnerSolution {
            fill: fill0,
            omega: 0.0,
        };
    }
    let mut lo: f64 = 0.0;
    let mut hi = (lambda + rho * level.max(0.0)).max(1e-12);
    let mut fill_hi = waterfill(problem, hi);
    while target(hi, &fill_hi) > 0.0 {
        lo = hi;
        hi *= 2.0;
        fill_hi = waterfill(problem, hi);
    }
    let t_lo = target(lo, &waterfill(problem, lo));
    let t_hi = target(hi, &fill_hi);
    let (_, b) = illinois(
        |w| target(w, &waterfill(problem, w)),
        lo,
        t_lo,
        hi,
        t_hi,
        1e-14,
    );
    if b != hi {
        hi = b;
        fill_hi = waterfill(problem, hi);
    }
    InnerSolution {
        fill: fill_hi,
        omega: hi,
    }
}

/// `lambda' = max(0, lambda + rho * residual)`.
pub fn update_multiplier(lambda: f64, rho: f64, residual: f64) -> f64 {
    (lambda + rho * residual).max(0.0)
}

/// `rho' = min(rho * max(2, |grad|_k / |grad|_{k-1}), rho_max)`.
pub fn update_penalty(rho: f64, grad_norm: f64, grad_norm_prev: f64, rho_max: f64) -> f64 {
    let ratio = if grad_norm_prev > 0.0 {
        grad_norm / grad_norm_prev
    } else {
        1.0
    };
    (rho * ratio.max(2.0)).min(rho_max)
}

/// One outer iteration of the power loop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlState {
    pub iteration: usize,
    pub lambda: f64,
    pub rho: f64,
    /// Constraint weight used by the inner water-filling.
    pub omega: f64,
    /// Water level; `-nu` of the budget constraint.
    pub level: f64,
    /// `c - floor`
    pub residual: f64,
    pub grad_norm: f64,
    pub objective: f64,
    pub kkt: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerOutcome {
    pub power: Array2<f64>,
    pub trace: Vec<AlState>,
    pub converged: bool,
    pub feasible: bool,
    pub objective: f64,
    pub constraint: f64,
    /// Stationarity residual of the returned allocation.
    pub kkt: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerLoopSettings {
    /// `eps1`, relative to `P_t^2`.
    pub change_tol: f64,
    pub max_iters: usize,
    pub rho_initial: f64,
    pub rho_max: f64,
    /// Rate/SMI floor slack relative to the floor.
    pub feasibility_rel: f64,
}

impl PowerLoopSettings {
    pub fn from_config(config: &crate::config::SceneConfig) -> Self {
        Self {
            change_tol: config.tolerances.power_change,
            max_iters: config.tolerances.max_power_iters,
            rho_initial: config.penalty_initial,
            rho_max: config.penalty_cap(),
            feasibility_rel: config.tolerances.feasibility_rel,
        }
    }
}

/// Augmented-Lagrangian power loop.
pub fn run_power_loop(
    problem: &PowerProblem,
    floor: &Problem,
    settings: &PowerLoopSettings,
) -> PowerOutcome {
    let level = floor.level;
    let best_con = waterfill(&problem.constraint_only(), 0.0);
    let c_max = problem.constraint(&best_con.power);
    if !floor.satisfied(c_max, settings.feasibility_rel) {
        let power = best_con.power;
        return PowerOutcome {
            objective: problem.objective(&power),
            constraint: c_max,
            kkt: 0.0,
            power: problem.to_grid(power),
            trace: Vec::new(),
            converged: false,
            feasible: false,
        };
    }

    let n = problem.terms.len();
    let mut power = vec![(problem.budget / n as f64).min(problem.cap); n];
    let mut lambda = 0.0;
    let mut rho = settings.rho_initial;
    let mut grad_prev = problem.con_gradient_norm(&power);
    let mut trace = Vec::new();
    let mut converged = false;
    let mut last = InnerSolution {
        fill: Waterfill {
            power: power.clone(),
            level: 0.0,
        },
        omega: 0.0,
    };
    for iteration in 1..=settings.max_iters.max(1) {
        let inner = inner_solve(problem, lambda, rho, level);
        let c = problem.constraint(&inner.fill.power);
        lambda = update_multiplier(lambda, rho, level - c);
        let grad = problem.con_gradient_norm(&inner.fill.power);
        let kkt = kkt_residual(problem, &inner.fill.power, inner.omega, inner.fill.level);
        trace.push(AlState {
            iteration,
            lambda,
            rho,
            omega: inner.omega,
            level: inner.fill.level,
            residual: c - level,
            grad_norm: grad,
            objective: problem.objective(&inner.fill.power),
            kkt,
        });
        rho = update_penalty(rho, grad, grad_prev, settings.rho_max);
        grad_prev = grad;
        let change: f64 = inner
            .fill
            .power
            .iter()
            .zip(&power)
            .map(|(a, b)| (a - b).powi(2))
            .sum();
        power.clone_from(&inner.fill.power);
        last = inner;
        if change <= settings.change_tol * problem.budget.powi(2)
            && floor.satisfied(c, settings.feasibility_rel)
        {
            converged = true;
            break;
        }
    }
    let mut constraint = problem.constraint(&power);
    if !floor.satisfied(constraint, settings.feasibility_rel) {
        last = smallest_feasible_weight(problem, level);
        power.clone_from(&last.fill.power);
        constraint = problem.constraint(&power);
    }
    PowerOutcome {
        objective: problem.objective(&power),
        constraint,
        kkt: kkt_residual(problem, &power, last.omega, last.fill.level),
        feasible: floor.satisfied(constraint, settings.feasibility_rel),
        power: problem.to_grid(power),
        trace,
        converged,
    }
}

/// Exact optimum at a fixed split: water-filling at the smallest constraint
/// weight that meets the floor. Returns the power and whether the floor holds.
pub fn solve_exact(
    problem: &PowerProblem,
    floor: &Problem,
    feasibility_rel: f64,
) -> (Array2<f64>, bool) {
    let free = waterfill(problem, 0.0);
    if floor.satisfied(problem.constraint(&free.power), feasibility_rel) {
        return (problem.to_grid(free.power), true);
    }
    let best_con = waterfill(&problem.constraint_only(), 0.0);
    let c_max = problem.constraint(&best_con.power);
    if !floor.satisfied(c_max, feasibility_rel) {
        return (problem.to_grid(best_con.power), false);
    }
    let sol = smallest_feasible_weight(problem, floor.level);
    let ok = floor.satisfied(problem.constraint(&sol.fill.power), feasibility_rel);
    (problem.to_grid(sol.fill.power), ok)
}

/// Root of a decreasing `f` with `f(a) >= 0 > f(b)` by the Illinois variant of
/// regula falsi. Returns a bracket `(a, b)` with the same signs and
/// `b - a <= rel_tol * max(|b|, b0 - a0)`, or `a == b` at an exact zero. The
/// width floor stops the search at a jump of `f` next to zero.
pub(crate) fn illinois(
    mut f: impl FnMut(f64) -> f64,
    mut a: f64,
    mut fa: f64,
    mut b: f64,
    mut fb: f64,
    rel_tol: f64,
) -> (f64, f64) {
    if fa < 0.0 || fb >= 0.0 {
        return (a, b);
    }
    let width = b - a;
    let mut side = 0i8;
    for _ in 0..400 {
        if b - a <= rel_tol * b.abs().max(a.abs()).max(width) {
            break;
        }
        let mut x = b - fb * (b - a) / (fb - fa);
        if !(x > a && x < b) {
            x = 0.5 * (a + b);
        }
        let fx = f(x);
        if fx == 0.0 {
            return (x, x);
        }
        if fx > 0.0 {
            a = x;
            fa = fx;
            if side == -1 {
                fb *= 0.5;
            }
            side = -1;
        } else {
            b = x;
            fb = fx;
            if side == 1 {
                fa *= 0.5;
            }
            side = 1;
        }
    }
    (a, b)
}

/// Smallest constraint weight whose water-filling meets the floor.
fn smallest_feasible_weight(problem: &PowerProblem, level: f64) -> InnerSolution {
    let meets = |fill: &Waterfill| problem.constraint(&fill.power) >= level;
    let mut hi = 1.0;
    let mut fill_hi = waterfill(problem, hi);
    let mut guard = 0;
    while !meets(&fill_hi) && guard < 200 {
        hi *= 2.0;
        fill_hi = waterfill(problem, hi);
        guard += 1;
    }
    let shortfall = |w: f64| level - problem.constraint(&waterfill(problem, w).power);
    let (_, b) = illinois(shortfall, 0.0, shortfall(0.0), hi, shortfall(hi), 1e-15);
    if b != hi {
        hi = b;
        fill_hi = waterfill(problem, hi);
    }
    InnerSolution {
        fill: fill_hi,
        omega: hi,
    }
}

/// Best objective over a grid on the budget simplex, refined twice around the
/// incumbent. Test oracle for problems with at most four REs.
pub fn grid_search_oracle(problem: &PowerProblem, floor: f64) -> Option<f64> {
    let n = problem.terms.len();
    assert!((2..=4).contains(&n), "grid oracle handles 2 to 4 REs");
    let budget = problem.budget;
    let feasible_value = |p: &[f64]| -> Option<f64> {
        if p.iter().any(|&v| v < -1e-15 || v > problem.cap + 1e-15) {
            return None;
        }
        (problem.constraint(p) >= floor).then(|| problem.objective(p))
    };
    let mut best: Option<(f64, Vec<f64>)> = None;
    let scan = |best: &mut Option<(f64, Vec<f64>)>, center: &[f64], step: f64, half_width: i64| {
        let free = n - 1;
        let mut idx = vec![-half_width; free];
        loop {
            let mut p: Vec<f64> = (0..free)
                .map(|i| center[i] + idx[i] as f64 * step)
                .collect();
            let rest = budget - p.iter().sum::<f64>();
            p.push(rest);
            if let Some(v) = feasible_value(&p) {
                if best.as_ref().is_none_or(|(b, _)| v > *b) {
                    *best = Some((v, p));
                }
            }
            let mut d = 0;
            loop {
                if d == free {
                    return;
                }
                idx[d] += 1;
                if idx[d] <= half_width {
                    break;
                }
                idx[d] = -half_width;
                d += 1;
            }
        }
    };
    let coarse = budget * 1e-2;
    scan(&mut best, &vec![budget / 2.0; n], coarse, 50);
    for (step, width) in [(1e-3, 20), (1e-4, 20)] {
        let center = best.as_ref()?.1.clone();
        scan(&mut best, &center, budget * step, width);
    }
    best.map(|(v, _)| v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn radar_problem(gains: &[f64], budget: f64, cap: f64) -> PowerProblem {
        PowerProblem {
            terms: gains
                .iter()
                .map(|&g| ReUtility {
                    obj_weight: 1.0,
                    obj_gain: g,
                    con_weight: 0.0,
                    con_gain: 0.0,
                })
                .collect(),
            shape: (1, gains.len()),
            budget,
            cap,
        }
    }

    fn settings() -> PowerLoopSettings {
        PowerLoopSettings {
            change_tol: 1e-12,
            max_iters: 100,
            rho_initial: 1.0,
            rho_max: 1e6,
            feasibility_rel: 1e-6,
        }
    }

    fn mixed_problem(rng: &mut ChaCha8Rng, n: usize) -> PowerProblem {
        let terms = (0..n)
            .map(|i| {
                let comm = i % 2 == 0;
                ReUtility {
                    obj_weight: if comm { 0.5 } else { 1.0 },
                    obj_gain: rng.random_range(0.2..5.0),
                    con_weight: if comm { 1.0 } else { 0.0 },
                    con_gain: rng.random_range(0.2..5.0),
                }
            })
            .collect();
        PowerProblem {
            terms,
            shape: (1, n),
            budget: 4.0,
            cap: 4.0,
        }
    }

    #[test]
    fn symmetric_radar_res_split_evenly() {
        let fill = waterfill(&radar_problem(&[2.0, 2.0], 1.0, 10.0), 0.0);
        assert!((fill.power[0] - 0.5).abs() < 1e-12);
        assert!((fill.power[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn classic_water_level() {
        // Inverse gains 1 and 3, budget 4: level 4 gives (3, 1).
        let fill = waterfill(&radar_problem(&[1.0, 1.0 / 3.0], 4.0, 100.0), 0.0);
        assert!((fill.power[0] - 3.0).abs() < 1e-9, "{:?}", fill.power);
        assert!((fill.power[1] - 1.0).abs() < 1e-9);
        let oracle =
            grid_search_oracle(&radar_problem(&[1.0, 1.0 / 3.0], 4.0, 100.0), 0.0).unwrap();
        let got = radar_problem(&[1.0, 1.0 / 3.0], 4.0, 100.0).objective(&fill.power);
        assert!(got >= oracle - 1e-9);
    }

    #[test]
    fn caps_bind_exactly() {
        let fill = waterfill(&radar_problem(&[100.0, 0.01, 0.01], 3.0, 1.2), 0.0);
        assert!(fill.power.iter().all(|&p| (0.0..=1.2).contains(&p)));
        assert!((fill.power.iter().sum::<f64>() - 3.0).abs() < 1e-12);
        assert_eq!(fill.power[0], 1.2);
    }

    #[test]
    fn closed_form_root_is_stationary() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let t = ReUtility {
                obj_weight: rng.random_range(0.1..2.0),
                obj_gain: rng.random_range(1e-3..1e3),
                con_weight: rng.random_range(0.0..2.0),
                con_gain: rng.random_range(1e-3..1e3),
            };
            let omega = rng.random_range(0.0..3.0);
            let mu = rng.random_range(0.01..1.0) * t.slope(0.0, omega);
            let p = t.power_at_level(omega, mu, f64::INFINITY);
            assert!((t.slope(p, omega) - mu).abs() <= 1e-10 * mu);
        }
    }

    #[test]
    fn multiplier_update() {
        assert_eq!(update_multiplier(1.0, 2.0, -1.0), 0.0);
        assert_eq!(update_multiplier(0.7, 3.0, 0.0), 0.7);
        assert!((update_multiplier(0.5, 1.0, 0.3) - 0.8).abs() < 1e-15);
    }

    #[test]
    fn penalty_update() {
        assert_eq!(update_penalty(1.0, 1.0, 1.0, 1e6), 2.0);
        assert_eq!(update_penalty(1.0, 5.0, 1.0, 1e6), 5.0);
        assert_eq!(update_penalty(1e6, 1.0, 1.0, 1e6), 1e6);
    }

    #[test]
    fn slack_floor_stays_unconstrained() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let p = mixed_problem(&mut rng, 4);
        let out = run_power_loop(&p, &Problem::p1(0.0), &settings());
        assert!(out.converged);
        assert!(out.trace.len() <= 2);
        assert!(out.trace.iter().all(|s| s.lambda == 0.0));
    }

    #[test]
    fn loop_matches_grid_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..5 {
            let p = mixed_problem(&mut rng, 4);
            let c_max = p.constraint(&waterfill(&p.constraint_only(), 0.0).power);
            let floor = 0.8 * c_max;
            let out = run_power_loop(&p, &Problem::p1(floor), &settings());
            assert!(out.feasible);
            let oracle = grid_search_oracle(&p, floor).unwrap();
            assert!(
                out.objective >= oracle * (1.0 - 1e-3),
                "{} vs {}",
                out.objective,
                oracle
            );
            assert!(out.kkt < 1e-8, "kkt {}", out.kkt);
        }
    }

    #[test]
    fn unreachable_floor_returns_rate_maximum() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let p = mixed_problem(&mut rng, 4);
        let c_max = p.constraint(&waterfill(&p.constraint_only(), 0.0).power);
        let out = run_power_loop(&p, &Problem::p1(1.5 * c_max), &settings());
        assert!(!out.converged && !out.feasible);
        assert!((out.constraint - c_max).abs() < 1e-12 * c_max);
    }
}
