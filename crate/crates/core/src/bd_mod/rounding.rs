//! Turning an SDP solution into a BD sign vector.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::forms::lifted_value;
use super::sdp::{sorted_eigen, SdpSolution};
use crate::error::{Error, Result};

/// Scores a candidate sign vector as `(objective, constraint)`.
pub trait PhaseObjective: Sync {
    fn num_bds(&self) -> usize;

    fn evaluate(&self, x: &[i8]) -> (f64, f64);

    /// Floor the constraint must reach.
    fn floor(&self) -> f64;

    fn feasible(&self, constraint: f64) -> bool {
        constraint >= self.floor()
    }
}

/// `x~^T Q x~` objective with an optional `x~^T A x~ >= b` floor.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticObjective {
    pub objective: DMatrix<f64>,
    pub constraint: Option<(DMatrix<f64>, f64)>,
}

impl PhaseObjective for QuadraticObjective {
    fn num_bds(&self) -> usize {
        self.objective.nrows() - 1
    }

    fn evaluate(&self, x: &[i8]) -> (f64, f64) {
        let c = self
            .constraint
            .as_ref()
            .map_or(f64::INFINITY, |(a, _)| lifted_value(a, x));
        (lifted_value(&self.objective, x), c)
    }

    fn floor(&self) -> f64 {
        self.constraint
            .as_ref()
            .map_or(f64::NEG_INFINITY, |(_, b)| *b)
    }
}

/// `phi = (pi / 2)(1 - x)`.
pub fn sign_to_phase(x: i8) -> f64 {
    std::f64::consts::FRAC_PI_2 * (1.0 - f64::from(x))
}

pub fn phase_to_sign(phi: f64) -> i8 {
    if phi.cos() >= 0.0 {
        1
    } else {
        -1
    }
}

/// Slopes `1, 2, 4, ...` up to `max_slope`.
pub fn anneal_schedule(max_slope: f64) -> Vec<f64> {
    let mut out = vec![1.0];
    while *out.last().expect("non-empty") * 2.0 <= max_slope {
        out.push(out.last().expect("non-empty") * 2.0);
    }
    out
}

/// Sharpen `tanh(beta v)` along the schedule and read off the hard sign of
/// the final iterate. A zero entry maps to `+1`.
pub fn anneal_signs(v: &[f64], schedule: &[f64]) -> Vec<i8> {
    let soft = schedule.iter().fold(v.to_vec(), |_, &b| {
        v.iter().map(|&vi| (b * vi).tanh()).collect()
    });
    soft.iter().map(|&s| if s < 0.0 { -1 } else { 1 }).collect()
}

/// BD signs from a homogenized vector: `x_k = sign(v_k v_K)`.
pub fn dehomogenize(v: &[f64]) -> Vec<i8> {
    let last = *v.last().expect("homogenized vector is non-empty");
    let s = if last < 0.0 { -1.0 } else { 1.0 };
    v[..v.len() - 1]
        .iter()
        .map(|&vk| if vk * s < 0.0 { -1 } else { 1 })
        .collect()
}

/// Where a rounded candidate came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RoundingSource {
    Eigenvector,
    Randomized,
    Polished,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundedCandidate {
    pub x: Vec<i8>,
    pub objective: f64,
    pub constraint: f64,
    pub feasible: bool,
    pub source: RoundingSource,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoundingSettings {
    pub max_slope: f64,
    pub samples: usize,
    /// `lambda_2 / lambda_1` above which the solution counts as rank > 1.
    pub rank_ratio: f64,
}

/// Dominant-eigenvector rounding with annealing, falling back to Gaussian
/// randomization when `X` is not rank one or the rounded point misses the
/// floor. Returns the best candidate found; feasible candidates win.
pub fn round_solution<R: Rng + ?Sized>(
    sol: &SdpSolution,
    objective: &dyn PhaseObjective,
    settings: &RoundingSettings,
    rng: &mut R,
) -> RoundedCandidate {
    let mut v: Vec<f64> = sol.eigenvector.iter().copied().collect();
    if v.last().is_some_and(|&l| l < 0.0) {
        v.iter_mut().for_each(|e| *e = -*e);
    }
    let hard = anneal_signs(&v, &anneal_schedule(settings.max_slope));
    let x = dehomogenize(&hard.iter().map(|&s| f64::from(s)).collect::<Vec<_>>());
    let (o, c) = objective.evaluate(&x);
    let eig = RoundedCandidate {
        x,
        objective: o,
        constraint: c,
        feasible: objective.feasible(c),
        source: RoundingSource::Eigenvector,
    };
    if eig.feasible && sol.rank_ratio() <= settings.rank_ratio {
        return eig;
    }
    match randomize(&sol.x, objective, settings.samples, rng) {
        Some(r) if better(&r, &eig) => r,
        _ => eig,
    }
}

/// Feasible beats infeasible; then higher objective, or higher constraint
/// among infeasible candidates.
pub fn better(a: &RoundedCandidate, b: &RoundedCandidate) -> bool {
    match (a.feasible, b.feasible) {
        (true, false) => true,
        (false, true) => false,
        (true, true) => a.objective > b.objective,
        (false, false) => a.constraint > b.constraint,
    }
}

/// Best-improvement single-sign flips until none helps.
pub fn polish_flips(start: RoundedCandidate, objective: &dyn PhaseObjective) -> RoundedCandidate {
    let mut best = start;
    loop {
        let next = (0..best.x.len())
            .into_par_iter()
            .map(|i| {
                let mut x = best.x.clone();
                x[i] = -x[i];
                let (o, c) = objective.evaluate(&x);
                RoundedCandidate {
                    feasible: objective.feasible(c),
                    x,
                    objective: o,
                    constraint: c,
                    source: RoundingSource::Polished,
                }
            })
            .reduce_with(|a, b| if better(&b, &a) { b } else { a });
        match next {
            Some(n) if better(&n, &best) => best = n,
            _ => return best,
        }
    }
}

/// Sample `xi ~ N(0, X)`, round each sample and keep the best.
pub fn randomize<R: Rng + ?Sized>(
    x: &DMatrix<f64>,
    objective: &dyn PhaseObjective,
    samples: usize,
    rng: &mut R,
) -> Option<RoundedCandidate> {
    let n = x.nrows();
    let (values, vectors) = sorted_eigen(x);
    let root = DVector::from_iterator(n, values.iter().map(|&v| v.max(0.0).sqrt()));
    let factor = &vectors * DMatrix::from_diagonal(&root);
    let draws: Vec<Vec<i8>> = (0..samples)
        .map(|_| {
            let z = DVector::from_iterator(n, (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)));
            let xi = &factor * z;
            dehomogenize(xi.as_slice())
        })
        .collect();
    draws
        .into_par_iter()
        .map(|x| {
            let (o, c) = objective.evaluate(&x);
            RoundedCandidate {
                feasible: objective.feasible(c),
                x,
                objective: o,
                constraint: c,
                source: RoundingSource::Randomized,
            }
        })
        .reduce_with(|a, b| if better(&b, &a) { b } else { a })
}

/// Best feasible sign vector by enumeration; at most 16 BDs.
pub fn exhaustive_phase_oracle(objective: &dyn PhaseObjective) -> Result<Option<(Vec<i8>, f64)>> {
    let k = objective.num_bds();
    if k > 16 {
        return Err(Error::Domain(format!(
            "exhaustive phase search over {k} BDs (max 16)"
        )));
    }
    let best = (0u32..(1 << k))
        .into_par_iter()
        .filter_map(|mask| {
            let x: Vec<i8> = (0..k)
                .map(|i| if mask >> i & 1 == 1 { -1 } else { 1 })
                .collect();
            let (o, c) = objective.evaluate(&x);
            objective.feasible(c).then_some((x, o))
        })
        .reduce_with(|a, b| {
            if b.1 > a.1 || (b.1 == a.1 && b.0 > a.0) {
                b
            } else {
                a
            }
        });
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bd_mod::forms::rank_one;
    use crate::bd_mod::sdp::{solve_sdp, SdpSettings};
    use num_complex::Complex64;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn sign_phase_round_trip() {
        assert_eq!(sign_to_phase(1), 0.0);
        assert_eq!(sign_to_phase(-1), std::f64::consts::PI);
        for x in [1i8, -1] {
            assert_eq!(phase_to_sign(sign_to_phase(x)), x);
        }
    }

    #[test]
    fn schedule_doubles_to_cap() {
        assert_eq!(
            anneal_schedule(256.0),
            vec![1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0, 128.0, 256.0]
        );
    }

    #[test]
    fn annealing_matches_hard_sign_for_steep_slopes() {
        let v = [0.3, -0.02, 1e-3, -0.7];
        let min = v
            .iter()
            .map(|e: &f64| e.abs())
            .fold(f64::INFINITY, f64::min);
        let sched = anneal_schedule(30.0 / min * 2.0);
        let got = anneal_signs(&v, &sched);
        assert_eq!(got, vec![1, -1, 1, -1]);
    }

    #[test]
    fn rank_one_solution_recovers_signs() {
        let x = [1i8, -1, -1, 1, -1];
        let mut xt: Vec<f64> = x.iter().map(|&s| f64::from(s)).collect();
        xt.push(1.0);
        let v = DVector::from_vec(xt.clone());
        let xx = &v * v.transpose();
        let norm = v.norm();
        let sol = SdpSolution {
            x: xx.clone(),
            objective: 0.0,
            upper_bound: 0.0,
            constraint_value: None,
            eigenvector: -&v / norm,
            eigenvalues: vec![6.0, 0.0, 0.0, 0.0, 0.0, 0.0],
            iterations: 0,
            converged: true,
        };
        let obj = QuadraticObjective {
            objective: xx,
            constraint: None,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let settings = RoundingSettings {
            max_slope: 256.0,
            samples: 10,
            rank_ratio: 1e-3,
        };
        let got = round_solution(&sol, &obj, &settings, &mut rng);
        assert_eq!(got.x, x.to_vec());
        assert_eq!(got.source, RoundingSource::Eigenvector);
    }

    #[test]
    fn oracle_on_single_bd() {
        let q = rank_one(&[Complex64::new(1.0, 0.0), Complex64::new(0.5, 0.0)]);
        let obj = QuadraticObjective {
            objective: q,
            constraint: None,
        };
        let (x, v) = exhaustive_phase_oracle(&obj).unwrap().unwrap();
        assert_eq!(x, vec![1]);
        assert!((v - 2.25).abs() < 1e-15);
    }

    #[test]
    fn oracle_is_permutation_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let v: Vec<Complex64> = (0..6)
            .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        let mut w = v.clone();
        w.swap(0, 3);
        w.swap(1, 4);
        let a = exhaustive_phase_oracle(&QuadraticObjective {
            objective: rank_one(&v),
            constraint: None,
        })
        .unwrap()
        .unwrap();
        let b = exhaustive_phase_oracle(&QuadraticObjective {
            objective: rank_one(&w),
            constraint: None,
        })
        .unwrap()
        .unwrap();
        assert!((a.1 - b.1).abs() < 1e-12 * a.1);
    }

    #[test]
    fn oracle_rejects_large_populations() {
        let obj = QuadraticObjective {
            objective: DMatrix::zeros(18, 18),
            constraint: None,
        };
        assert!(exhaustive_phase_oracle(&obj).is_err());
    }

    #[test]
    fn rounded_sdp_is_near_optimal_on_low_rank_forms() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let settings = RoundingSettings {
            max_slope: 256.0,
            samples: 200,
            rank_ratio: 1e-3,
        };
        let mut good = 0;
        for _ in 0..10 {
            let f = DMatrix::from_fn(9, 2, |_, _| rng.random_range(-1.0..1.0));
            let q = &f * f.transpose();
            let obj = QuadraticObjective {
                objective: q.clone(),
                constraint: None,
            };
            let sol = solve_sdp(&q, None, &SdpSettings::default()).unwrap();
            let got = round_solution(&sol, &obj, &settings, &mut rng);
            let (_, opt) = exhaustive_phase_oracle(&obj).unwrap().unwrap();
            assert!(sol.upper_bound >= opt * (1.0 - 1e-9));
            if got.objective >= 0.95 * opt {
                good += 1;
            }
        }
        assert!(good >= 9, "{good}/10");
    }
}
