//! Homogenized quadratic forms of the effective channels in the BD signs.
//!
//! With `x~ = [x_1, ..., x_K, 1]` and `h~ = [c_1, ..., c_K, c_0]` (BD cascade
//! terms followed by the direct term), `|h~^T x~|^2 = x~^T Re(h~* h~^T) x~`
//! for every real `x~`.

use std::f64::consts::LN_2;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::metrics::{AllocationState, MetricParams, ReGains};
use crate::problem::{Mode, Problem};
use crate::scene::{CascadeTerms, Scene};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Link {
    Sense,
    Comm,
}

/// `[c_1, ..., c_K, c_0]` at RE `(m, n)`.
pub fn homogenized_vector(terms: &CascadeTerms, link: Link, m: usize, n: usize) -> Vec<Complex64> {
    let (bd, direct) = match link {
        Link::Sense => (&terms.sense_bd, &terms.sense_direct),
        Link::Comm => (&terms.comm_bd, &terms.comm_direct),
    };
    bd.iter()
        .map(|g| g[[m, n]])
        .chain(std::iter::once(direct[[m, n]]))
        .collect()
}

/// Real symmetric `Re(v* v^T)`, scaled by `weight`, accumulated into `acc`.
pub fn add_rank_one(acc: &mut DMatrix<f64>, v: &[Complex64], weight: f64) {
    let d = v.len();
    for i in 0..d {
        for j in i..d {
            let e = weight * (v[i].conj() * v[j]).re;
            acc[(i, j)] += e;
            if i != j {
                acc[(j, i)] += e;
            }
        }
    }
}

pub fn rank_one(v: &[Complex64]) -> DMatrix<f64> {
    let mut q = DMatrix::zeros(v.len(), v.len());
    add_rank_one(&mut q, v, 1.0);
    q
}

/// `x~^T Q x~` with `x~ = [x; 1]`.
pub fn lifted_value(q: &DMatrix<f64>, x: &[i8]) -> f64 {
    let d = q.nrows();
    debug_assert_eq!(x.len() + 1, d);
    let xt = |i: usize| if i + 1 == d { 1.0 } else { f64::from(x[i]) };
    let mut acc = 0.0;
    for i in 0..d {
        let xi = xt(i);
        let mut row = 0.0;
        for j in 0..d {
            row += q[(i, j)] * xt(j);
        }
        acc += xi * row;
    }
    acc
}

/// Per-symbol forms of both links.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticForms {
    /// Indexed by symbol.
    pub sense: Vec<DMatrix<f64>>,
    pub comm: Vec<DMatrix<f64>>,
}

impl QuadraticForms {
    pub fn dim(&self) -> usize {
        self.sense.first().map_or(0, |q| q.nrows())
    }

    fn total(forms: &[DMatrix<f64>], symbols: &[usize]) -> DMatrix<f64> {
        let d = forms.first().map_or(0, |q| q.nrows());
        symbols
            .iter()
            .fold(DMatrix::zeros(d, d), |acc, &m| acc + &forms[m])
    }

    pub fn sense_total(&self, symbols: &[usize]) -> DMatrix<f64> {
        Self::total(&self.sense, symbols)
    }

    pub fn comm_total(&self, symbols: &[usize]) -> DMatrix<f64> {
        Self::total(&self.comm, symbols)
    }
}

/// Forms `sum_n weight(m, n) Re(h~* h~^T)` per symbol. With unit weights a
/// symbol's form evaluates to `sum_n |G_{m,n}(x)|^2`.
pub fn build_quadratic_forms(
    terms: &CascadeTerms,
    sense_weight: impl Fn(usize, usize) -> f64,
    comm_weight: impl Fn(usize, usize) -> f64,
) -> QuadraticForms {
    let (m_sym, n_sub) = terms.comm_direct.dim();
    let d = terms.num_bds() + 1;
    let mut sense = Vec::with_capacity(m_sym);
    let mut comm = Vec::with_capacity(m_sym);
    for m in 0..m_sym {
        let mut qs = DMatrix::zeros(d, d);
        let mut qc = DMatrix::zeros(d, d);
        for n in 0..n_sub {
            let ws = sense_weight(m, n);
            if ws != 0.0 {
                add_rank_one(&mut qs, &homogenized_vector(terms, Link::Sense, m, n), ws);
            }
            let wc = comm_weight(m, n);
            if wc != 0.0 {
                add_rank_one(&mut qc, &homogenized_vector(terms, Link::Comm, m, n), wc);
            }
        }
        sense.push(qs);
        comm.push(qc);
    }
    QuadraticForms { sense, comm }
}

/// Slopes of the two metrics in the squared channel magnitudes.
pub fn metric_slopes(
    scene: &Scene,
    state: &AllocationState,
) -> crate::Result<(Vec<f64>, Vec<f64>)> {
    let eff = scene.effective(&state.phases)?;
    let params = MetricParams::from_scene(scene);
    let gains = ReGains::new(&eff, scene);
    let ks = scene.rcs_gain() / scene.config.noise_radar_w;
    let kc = 1.0 / scene.config.noise_comm_w;
    let mut sense = Vec::with_capacity(state.radar.len());
    let mut comm = Vec::with_capacity(state.radar.len());
    for ((idx, &is_radar), &p) in state.radar.indexed_iter().zip(state.power.iter()) {
        let u = eff.sense[idx].norm_sqr();
        let w = params.prefix * params.weight(is_radar);
        // d/du log2(1 + ks P u^2)
        sense.push(w * 2.0 * ks * p * u / (LN_2 * (1.0 + gains.sense[idx] * p)));
        comm.push(if is_radar {
            0.0
        } else {
            params.prefix * kc * p / (LN_2 * (1.0 + gains.comm[idx] * p))
        });
    }
    Ok((sense, comm))
}

/// Forms for the phase block: `(objective form, constraint form)` per symbol.
pub fn phase_block_forms(
    scene: &Scene,
    state: &AllocationState,
    problem: &Problem,
) -> crate::Result<(Vec<DMatrix<f64>>, Vec<DMatrix<f64>>)> {
    let (sense_slope, comm_slope) = metric_slopes(scene, state)?;
    let n_sub = state.radar.ncols();
    let forms = build_quadratic_forms(
        &scene.terms,
        |m, n| sense_slope[m * n_sub + n],
        |m, n| comm_slope[m * n_sub + n],
    );
    Ok(match problem.mode {
        Mode::P1 => (forms.sense, forms.comm),
        Mode::P2 => (forms.comm, forms.sense),
    })
}
