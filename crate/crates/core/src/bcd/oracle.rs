//! Joint enumeration over RE splits and frame sign vectors with the exact
//! water-filling power solve inside. Test oracle for tiny scenes.

use ndarray::Array2;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::metrics::{MetricParams, ReGains};
use crate::power_alloc::{solve_exact, PowerProblem};
use crate::problem::Problem;
use crate::scene::{PhaseMatrix, Scene};

use super::BcdSettings;

#[derive(Debug, Clone, PartialEq)]
pub struct JointOptimum {
    pub objective: f64,
    pub radar: Array2<bool>,
    pub phases: PhaseMatrix,
}

/// Best objective over every split and every frame sign vector. At most 20
/// REs plus BDs.
pub fn joint_brute_force(
    scene: &Scene,
    problem: &Problem,
    settings: &BcdSettings,
) -> Result<Option<JointOptimum>> {
    let (m, n) = scene.grid.shape();
    let k = scene.num_bds();
    if m * n + k > 20 {
        return Err(Error::Domain(format!(
            "joint enumeration over {} REs and {k} BDs",
            m * n
        )));
    }
    let params = MetricParams::from_scene(scene);
    let per_phase = |mask: u32| -> Result<Option<JointOptimum>> {
        let x: Vec<i8> = (0..k)
            .map(|i| if mask >> i & 1 == 1 { 1 } else { -1 })
            .collect();
        let phases = PhaseMatrix::from_frame_vector(&x, m)?;
        let gains = ReGains::for_phases(scene, &phases)?;
        let mut best: Option<JointOptimum> = None;
        for split in 0u32..(1 << (m * n)) {
            let radar = Array2::from_shape_fn((m, n), |(i, j)| split >> (i * n + j) & 1 == 1);
            let pp = PowerProblem::new(
                &radar,
                &gains,
                &params,
                problem.mode,
                scene.config.total_power_w,
                scene.config.max_re_power_w,
            )?;
            let (power, feasible) = solve_exact(&pp, problem, settings.feasibility_rel);
            let objective = pp.objective(power.as_slice().expect("standard layout"));
            if feasible && best.as_ref().is_none_or(|b| objective > b.objective) {
                best = Some(JointOptimum {
                    objective,
                    radar,
                    phases: phases.clone(),
                });
            }
        }
        Ok(best)
    };
    let per: Vec<Option<JointOptimum>> = (0u32..(1 << k))
        .into_par_iter()
        .map(per_phase)
        .collect::<Result<_>>()?;
    Ok(per
        .into_iter()
        .flatten()
        .fold(None, |acc: Option<JointOptimum>, c| match acc {
            Some(a) if a.objective >= c.objective => Some(a),
            _ => Some(c),
        }))
}
