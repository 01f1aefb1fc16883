//! Phase-independent upper bounds on both metrics.
//!
//! `|c_0 + sum_k x_k c_k| <= |c_0| + sum_k |c_k|` for every sign vector, so
//! water-filling the bound gains over the whole grid bounds each metric for
//! every split, power grid and phase matrix.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::metrics::MetricParams;
use crate::power_alloc::{waterfill, PowerProblem, ReUtility};
use crate::problem::{Mode, Problem};
use crate::scene::{CGrid, Scene};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CertifiedBounds {
    pub smi: f64,
    pub rate: f64,
}

impl CertifiedBounds {
    pub fn for_mode(&self, mode: Mode) -> f64 {
        match mode {
            Mode::P1 => self.rate,
            Mode::P2 => self.smi,
        }
    }
}

fn magnitude_bound(direct: &CGrid, bd: &[CGrid]) -> Array2<f64> {
    let mut out = direct.mapv(|c| c.norm());
    for g in bd {
        out.zip_mut_with(g, |acc, c| *acc += c.norm());
    }
    out
}

fn best_single_metric(weight: f64, gains: &Array2<f64>, scene: &Scene) -> f64 {
    let terms: Vec<ReUtility> = gains
        .iter()
        .map(|&g| ReUtility {
            obj_weight: weight,
            obj_gain: g,
            con_weight: 0.0,
            con_gain: 0.0,
        })
        .collect();
    let problem = PowerProblem {
        terms,
        shape: gains.dim(),
        budget: scene.config.total_power_w,
        cap: scene.config.max_re_power_w,
    };
    let fill = waterfill(&problem, 0.0);
    problem.objective(&fill.power)
}

pub fn certified_bounds(scene: &Scene) -> CertifiedBounds {
    let params = MetricParams::from_scene(scene);
    let t = &scene.terms;
    let sr = scene.rcs_gain() / scene.config.noise_radar_w;
    let sc = 1.0 / scene.config.noise_comm_w;
    let sense = magnitude_bound(&t.sense_direct, &t.sense_bd).mapv(|g| sr * g.powi(4));
    let comm = magnitude_bound(&t.comm_direct, &t.comm_bd).mapv(|h| sc * h * h);
    CertifiedBounds {
        smi: best_single_metric(params.prefix * params.comm_weight.max(1.0), &sense, scene),
        rate: best_single_metric(params.prefix, &comm, scene),
    }
}

/// Reject floors above the certified bound of the floored metric.
pub fn check_certified_feasibility(scene: &Scene, problem: &Problem) -> Result<CertifiedBounds> {
    let bounds = certified_bounds(scene);
    let bound = bounds.for_mode(problem.mode);
    if problem.level > bound * (1.0 + 1e-12) {
        return Err(Error::Infeasible {
            level: problem.level,
            bound,
        });
    }
    Ok(bounds)
}
