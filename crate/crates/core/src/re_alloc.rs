//! Radar/communication split of the RE grid.
//!
//! The binary indicator is relaxed to `[0, 1]`, the smoothed l0 constraint is
//! linearized around the current point, and the resulting linear program is
//! solved exactly. The relaxed point is then thresholded, repaired to meet
//! the floor and pruned of needless flips.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::problem::{Mode, Problem};

/// `g(w) = ln(1 + w/delta) / ln(1 + 1/delta)`.
pub fn smooth_l0(w: f64, delta: f64) -> Result<f64> {
    if w < 0.0 || !w.is_finite() {
        return Err(Error::Domain(format!("smoothed l0 needs w >= 0 (got {w})")));
    }
    if delta <= 0.0 {
        return Err(Error::Domain(format!(
            "smoothed l0 needs delta > 0 (got {delta})"
        )));
    }
    Ok((w / delta).ln_1p() / (1.0 / delta).ln_1p())
}

/// Tangent coefficients `(gamma, kappa)` of `g` at each entry.
pub fn sca_linearize(current: &Array2<f64>, delta: f64) -> (Array2<f64>, Array2<f64>) {
    let norm = (1.0 / delta).ln_1p();
    let gamma = current.mapv(|w| 1.0 / (norm * (delta + w)));
    let kappa = ndarray::Zip::from(current)
        .and(&gamma)
        .map_collect(|&w, &g| (w / delta).ln_1p() / norm - g * w);
    (gamma, kappa)
}

/// Per-RE scores at fixed power and phases, flattened row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ReScores {
    /// Sensing score of an RE at weight one.
    pub sense: Vec<f64>,
    /// Rate score of an RE if it carries data.
    pub rate: Vec<f64>,
    /// `eta_c`
    pub comm_weight: f64,
    pub shape: (usize, usize),
}

impl ReScores {
    pub fn new(sense: &Array2<f64>, rate: &Array2<f64>, comm_weight: f64) -> Result<Self> {
        if sense.dim() != rate.dim() {
            return Err(Error::Shape(format!(
                "sense scores {:?}, rate scores {:?}",
                sense.dim(),
                rate.dim()
            )));
        }
        Ok(Self {
            sense: sense.iter().copied().collect(),
            rate: rate.iter().copied().collect(),
            comm_weight,
            shape: sense.dim(),
        })
    }

    pub fn len(&self) -> usize {
        self.sense.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sense.is_empty()
    }

    /// Objective and constraint as affine functions of the indicator.
    pub fn forms(&self, mode: Mode) -> (AffineForm, AffineForm) {
        let eta = self.comm_weight;
        let smi = AffineForm {
            offset: eta * self.sense.iter().sum::<f64>(),
            coef: self.sense.iter().map(|s| (1.0 - eta) * s).collect(),
        };
        let rate = AffineForm {
            offset: self.rate.iter().sum(),
            coef: self.rate.iter().map(|r| -r).collect(),
        };
        match mode {
            Mode::P1 => (smi, rate),
            Mode::P2 => (rate, smi),
        }
    }

    /// `(smi, rate)` of a binary split.
    pub fn metrics(&self, radar: &[bool]) -> (f64, f64) {
        let mut smi = 0.0;
        let mut rate = 0.0;
        for ((&s, &r), &is_radar) in self.sense.iter().zip(&self.rate).zip(radar) {
            if is_radar {
                smi += s;
            } else {
                smi += self.comm_weight * s;
                rate += r;
            }
        }
        (smi, rate)
    }
}

/// `offset + coef . x`
#[derive(Debug, Clone, PartialEq)]
pub struct AffineForm {
    pub offset: f64,
    pub coef: Vec<f64>,
}

impl AffineForm {
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.offset + self.coef.iter().zip(x).map(|(c, v)| c * v).sum::<f64>()
    }

    pub fn eval_binary(&self, x: &[bool]) -> f64 {
        self.offset
            + self
                .coef
                .iter()
                .zip(x)
                .filter(|(_, &b)| b)
                .map(|(c, _)| c)
                .sum::<f64>()
    }
}

/// Maximize `c.x` subject to `a.x >= b` and `lb <= x <= ub`.
///
/// With a single coupling row the optimum is a fractional knapsack: start at
/// the box corner that maximizes `c.x`, then move variables toward the row in
/// order of objective lost per unit of row gained. Returns `None` when the row
/// cannot be met inside the box.
pub fn solve_single_row_lp(
    c: &[f64],
    a: &[f64],
    b: f64,
    lb: &[f64],
    ub: &[f64],
) -> Option<Vec<f64>> {
    let n = c.len();
    let mut x: Vec<f64> = (0..n)
        .map(|i| {
            if c[i] > 0.0 || (c[i] == 0.0 && a[i] > 0.0) {
                ub[i]
            } else {
                lb[i]
            }
        })
        .collect();
    let dot = |x: &[f64]| a.iter().zip(x).map(|(ai, xi)| ai * xi).sum::<f64>();
    let mut deficit = b - dot(&x);
    if deficit <= 0.0 {
        return Some(x);
    }
    // (cost per unit gain, index, direction)
    let mut moves: Vec<(f64, usize, f64)> = (0..n)
        .filter_map(|i| {
            let dir = if a[i] > 0.0 && x[i] < ub[i] {
                1.0
            } else if a[i] < 0.0 && x[i] > lb[i] {
                -1.0
            } else {
                return None;
            };
            Some((c[i].abs() / a[i].abs(), i, dir))
        })
        .collect();
    moves.sort_by(|p, q| p.0.total_cmp(&q.0).then(p.1.cmp(&q.1)));
    for (_, i, dir) in moves {
        let room = if dir > 0.0 {
            ub[i] - x[i]
        } else {
            x[i] - lb[i]
        };
        let gain = room * a[i].abs();
        if gain >= deficit {
            x[i] += dir * deficit / a[i].abs();
            x[i] = x[i].clamp(lb[i], ub[i]);
            return Some(x);
        }
        x[i] += dir * room;
        deficit -= gain;
    }
    // Accept round-off sized shortfalls.
    (deficit <= 1e-12 * b.abs().max(1.0)).then_some(x)
}

/// Optimal relaxed indicator of the linearized subproblem.
///
/// The surrogate constraint `-gamma I + kappa - I <= 0` becomes the lower
/// bound `I >= kappa / (1 + gamma)`. When those bounds leave no feasible
/// point the plain box is used.
pub fn solve_relaxed_allocation(
    scores: &ReScores,
    problem: &Problem,
    gamma: &[f64],
    kappa: &[f64],
) -> Result<Vec<f64>> {
    let (obj, con) = scores.forms(problem.mode);
    let b = problem.level - con.offset;
    let ub = vec![1.0; scores.len()];
    let lb: Vec<f64> = gamma
        .iter()
        .zip(kappa)
        .map(|(g, k)| (k / (1.0 + g)).clamp(0.0, 1.0))
        .collect();
    if let Some(x) = solve_single_row_lp(&obj.coef, &con.coef, b, &lb, &ub) {
        return Ok(x);
    }
    let zeros = vec![0.0; scores.len()];
    solve_single_row_lp(&obj.coef, &con.coef, b, &zeros, &ub).ok_or_else(|| Error::Infeasible {
        level: problem.level,
        bound: con.offset + best_row_value(&con.coef),
    })
}

fn best_row_value(a: &[f64]) -> f64 {
    a.iter().filter(|&&v| v > 0.0).sum()
}

/// `I = 1` where the relaxed value is at least one half.
pub fn threshold_allocation(relaxed: &[f64]) -> Vec<bool> {
    relaxed.iter().map(|&v| v >= 0.5).collect()
}

/// Flip REs toward the floor until it holds, cheapest objective loss per
/// unit of constraint gain first. Returns whether the floor is met.
pub fn repair_allocation(
    radar: &mut [bool],
    obj: &AffineForm,
    con: &AffineForm,
    floor: f64,
) -> bool {
    let mut value = con.eval_binary(radar);
    while value < floor {
        let mut best: Option<(f64, usize)> = None;
        for (i, &x) in radar.iter().enumerate() {
            let sign = if x { -1.0 } else { 1.0 };
            let gain = sign * con.coef[i];
            if gain <= 0.0 {
                continue;
            }
            let loss = (-sign * obj.coef[i]).max(0.0);
            let ratio = loss / gain;
            if best.is_none_or(|(r, _)| ratio < r) {
                best = Some((ratio, i));
            }
        }
        let Some((_, i)) = best else {
            return false;
        };
        value += if radar[i] { -con.coef[i] } else { con.coef[i] };
        radar[i] = !radar[i];
    }
    true
}

/// Undo flips that only cost objective: greedily apply the single flip with
/// the largest objective gain that keeps the floor.
pub fn prune_allocation(radar: &mut [bool], obj: &AffineForm, con: &AffineForm, floor: f64) {
    let mut value = con.eval_binary(radar);
    loop {
        let mut best: Option<(f64, usize)> = None;
        for (i, &x) in radar.iter().enumerate() {
            let sign = if x { -1.0 } else { 1.0 };
            let d_obj = sign * obj.coef[i];
            let d_con = sign * con.coef[i];
            if d_obj > 0.0 && value + d_con >= floor && best.is_none_or(|(g, _)| d_obj > g) {
                best = Some((d_obj, i));
            }
        }
        let Some((_, i)) = best else {
            return;
        };
        value += if radar[i] { -con.coef[i] } else { con.coef[i] };
        radar[i] = !radar[i];
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScaOutcome {
    /// Binary split shaped like the grid; `true` is radar.
    pub radar: Array2<bool>,
    /// Last relaxed point.
    pub relaxed: Array2<f64>,
    /// Incumbent objective after each iteration.
    pub trace: Vec<f64>,
    pub iterations: usize,
    /// Whether the returned split meets the floor.
    pub feasible: bool,
}

/// Linearize, solve, threshold and repair until fewer than `min_changes` REs
/// flip between iterations or `max_iters` is reached.
pub fn run_sca(
    initial: &Array2<f64>,
    scores: &ReScores,
    problem: &Problem,
    delta: f64,
    min_changes: f64,
    max_iters: usize,
    slack: f64,
) -> Result<ScaOutcome> {
    if initial.dim() != scores.shape {
        return Err(Error::Shape(format!(
            "initial indicator {:?}, scores {:?}",
            initial.dim(),
            scores.shape
        )));
    }
    let (obj, con) = scores.forms(problem.mode);
    let floor = problem.level - slack;
    let best_con = con.offset + best_row_value(&con.coef);
    if best_con < floor {
        return Err(Error::Infeasible {
            level: problem.level,
            bound: best_con,
        });
    }
    let shape = scores.shape;
    if obj.coef.iter().all(|&c| c == 0.0) {
        // Objective blind to the split: take the constraint-maximal corner.
        let radar: Vec<bool> = con.coef.iter().map(|&c| c > 0.0).collect();
        let relaxed = radar.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
        return Ok(ScaOutcome {
            radar: Array2::from_shape_vec(shape, radar).expect("shape"),
            relaxed: Array2::from_shape_vec(shape, relaxed).expect("shape"),
            trace: vec![obj.offset],
            iterations: 1,
            feasible: true,
        });
    }

    let mut current = initial.mapv(|v| v.clamp(0.0, 1.0));
    let mut previous = threshold_allocation(current.as_slice().expect("standard layout"));
    let mut incumbent: Option<(Vec<bool>, f64)> = None;
    let mut trace = Vec::new();
    let mut iterations = 0;
    while iterations < max_iters.max(1) {
        iterations += 1;
        let (gamma, kappa) = sca_linearize(&current, delta);
        let relaxed = solve_relaxed_allocation(
            scores,
            problem,
            gamma.as_slice().expect("standard layout"),
            kappa.as_slice().expect("standard layout"),
        )?;
        let mut radar = threshold_allocation(&relaxed);
        let feasible = repair_allocation(&mut radar, &obj, &con, floor);
        if feasible {
            prune_allocation(&mut radar, &obj, &con, floor);
            let value = obj.eval_binary(&radar);
            if incumbent.as_ref().is_none_or(|(_, v)| value > *v) {
                incumbent = Some((radar.clone(), value));
            }
        }
        if let Some((_, v)) = &incumbent {
            trace.push(*v);
        }
        let changes = radar.iter().zip(&previous).filter(|(a, b)| a != b).count();
        current = Array2::from_shape_vec(shape, relaxed).expect("shape");
        previous = radar;
        if (changes as f64) < min_changes {
            break;
        }
    }
    let (radar, feasible) = match incumbent {
        Some((r, _)) => (r, true),
        None => (previous, false),
    };
    Ok(ScaOutcome {
        radar: Array2::from_shape_vec(shape, radar).expect("shape"),
        relaxed: current,
        trace,
        iterations,
        feasible,
    })
}

/// Best binary split by enumeration. Test oracle; at most 20 REs.
pub fn exhaustive_allocation(
    scores: &ReScores,
    problem: &Problem,
    slack: f64,
) -> Result<Option<(Vec<bool>, f64)>> {
    let n = scores.len();
    if n > 20 {
        return Err(Error::Domain(format!(
            "exhaustive split over {n} REs (max 20)"
        )));
    }
    let (obj, con) = scores.forms(problem.mode);
    let floor = problem.level - slack;
    let mut best: Option<(Vec<bool>, f64)> = None;
    for mask in 0u32..(1 << n) {
        let x: Vec<bool> = (0..n).map(|i| mask >> i & 1 == 1).collect();
        if con.eval_binary(&x) < floor {
            continue;
        }
        let v = obj.eval_binary(&x);
        if best.as_ref().is_none_or(|(_, b)| v > *b) {
            best = Some((x, v));
        }
    }
    Ok(best)
}

/// LP optimum by vertex enumeration: every variable at a bound except at most
/// one, which is solved from the active row. Test oracle; at most 16 variables.
pub fn vertex_lp_oracle(c: &[f64], a: &[f64], b: f64, lb: &[f64], ub: &[f64]) -> Option<f64> {
    let n = c.len();
    assert!(n <= 16, "vertex oracle is exponential");
    let mut best: Option<f64> = None;
    let mut consider = |x: &[f64]| {
        let row: f64 = a.iter().zip(x).map(|(p, q)| p * q).sum();
        if row >= b - 1e-12 {
            let v: f64 = c.iter().zip(x).map(|(p, q)| p * q).sum();
            if best.is_none_or(|w| v > w) {
                best = Some(v);
            }
        }
    };
    for mask in 0u32..(1 << n) {
        let x: Vec<f64> = (0..n)
            .map(|i| if mask >> i & 1 == 1 { ub[i] } else { lb[i] })
            .collect();
        consider(&x);
        for j in 0..n {
            if a[j] == 0.0 {
                continue;
            }
            let mut y = x.clone();
            let rest: f64 = (0..n).filter(|&i| i != j).map(|i| a[i] * x[i]).sum();
            y[j] = (b - rest) / a[j];
            if y[j] >= lb[j] && y[j] <= ub[j] {
                consider(&y);
            }
        }
    }
    best
}
