//! Small dense SDP: maximize `<C, X>` over `X >= 0`, `diag(X) = 1`,
//! optionally with one trace row `<A, X> >= b`.
//!
//! Solved by ADMM on the split `X in S` (the affine/half-space set), `Z in
//! PSD`, `X = Z`. Projection onto `S` is exact because the diagonal and the
//! off-diagonal half-space act on orthogonal coordinates. A dual certificate
//! gives a rigorous upper bound on the optimum.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SdpSettings {
    pub max_iters: usize,
    pub tolerance: f64,
}

impl Default for SdpSettings {
    fn default() -> Self {
        Self {
            max_iters: 20_000,
            tolerance: 1e-7,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdpSolution {
    /// PSD with unit diagonal.
    pub x: DMatrix<f64>,
    /// `<C, X>`
    pub objective: f64,
    /// Certified upper bound on the SDP optimum.
    pub upper_bound: f64,
    /// `<A, X>` when a trace row is present.
    pub constraint_value: Option<f64>,
    /// Unit-norm eigenvector of the largest eigenvalue of `X`.
    pub eigenvector: DVector<f64>,
    /// Eigenvalues of `X`, descending.
    pub eigenvalues: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl SdpSolution {
    /// `lambda_2 / lambda_1`
    pub fn rank_ratio(&self) -> f64 {
        match self.eigenvalues.as_slice() {
            [l1, l2, ..] if *l1 > 0.0 => (l2 / l1).max(0.0),
            _ => 0.0,
        }
    }
}

/// One trace row `<A, X> >= b`.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub a: DMatrix<f64>,
    pub b: f64,
}

fn frob(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(p, q)| p * q).sum()
}

fn sym(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Eigen-decomposition with eigenvalues sorted descending.
pub fn sorted_eigen(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(m.clone());
    let mut order: Vec<usize> = (0..m.nrows()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_columns(
        &order
            .iter()
            .map(|&i| eig.eigenvectors.column(i).into_owned())
            .collect::<Vec<_>>(),
    );
    (values, vectors)
}

fn project_psd(m: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(sym(m));
    let clipped = eig.eigenvalues.map(|v| v.max(0.0));
    &eig.eigenvectors * DMatrix::from_diagonal(&clipped) * eig.eigenvectors.transpose()
}

fn lambda_max(m: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(sym(m)).eigenvalues.max()
}

/// Projection onto `{diag = 1} ∩ {<A, X> >= b}`.
fn project_affine(v: &DMatrix<f64>, row: Option<(&DMatrix<f64>, f64, f64)>) -> DMatrix<f64> {
    let mut y = v.clone();
    for i in 0..y.nrows() {
        y[(i, i)] = 1.0;
    }
    if let Some((a_off, b_off, norm2)) = row {
        let val = frob(a_off, &y);
        if val < b_off && norm2 > 0.0 {
            y += a_off * ((b_off - val) / norm2);
        }
    }
    y
}

/// Certified bound `sum d - t b` with `Diag(d) >= C + t A`, for the given `t`.
fn dual_bound(c: &DMatrix<f64>, row: Option<&TraceRow>, x: &DMatrix<f64>, t: f64) -> f64 {
    let m = match row {
        Some(r) => c + &r.a * t,
        None => c.clone(),
    };
    let mx = &m * x;
    let y = DVector::from_iterator(m.nrows(), (0..m.nrows()).map(|i| mx[(i, i)]));
    let shift = lambda_max(&(&m - DMatrix::from_diagonal(&y))).max(0.0);
    y.sum() + shift * m.nrows() as f64 - t * row.map_or(0.0, |r| r.b)
}

/// Minimize the certified bound over the row multiplier `t >= 0`.
fn best_dual_bound(c: &DMatrix<f64>, row: Option<&TraceRow>, x: &DMatrix<f64>) -> f64 {
    let Some(r) = row else {
        return dual_bound(c, None, x, 0.0);
    };
    let f = |t: f64| dual_bound(c, Some(r), x, t);
    let mut best = f(0.0);
    let mut hi = 1.0;
    let mut f_hi = f(hi);
    let mut guard = 0;
    while f_hi < best && guard < 60 {
        best = f_hi;
        hi *= 2.0;
        f_hi = f(hi);
        guard += 1;
    }
    // Golden section on [0, hi]; the bound is only kept when it improves.
    let (mut lo, mut up) = (0.0, hi);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut t1 = up - g * (up - lo);
    let mut t2 = lo + g * (up - lo);
    let (mut f1, mut f2) = (f(t1), f(t2));
    for _ in 0..80 {
        if f1 < f2 {
            up = t2;
            t2 = t1;
            f2 = f1;
            t1 = up - g * (up - lo);
            f1 = f(t1);
        } else {
            lo = t1;
            t1 = t2;
            f1 = f2;
            t2 = lo + g * (up - lo);
            f2 = f(t2);
        }
        if up - lo <= 1e-12 * up.max(1.0) {
            break;
        }
    }
    best.min(f1).min(f2)
}

/// Largest `<A, X>` over the elliptope, as `(attained, certified bound)`.
pub fn row_capacity(a: &DMatrix<f64>, settings: &SdpSettings) -> Result<(f64, f64)> {
    let sol = solve_sdp(a, None, settings)?;
    Ok((sol.objective, sol.upper_bound))
}

/// Solve the SDP. Errors with [`Error::Infeasible`] when the trace row is
/// provably out of reach.
pub fn solve_sdp(
    c: &DMatrix<f64>,
    row: Option<&TraceRow>,
    settings: &SdpSettings,
) -> Result<SdpSolution> {
    let n = c.nrows();
    if n == 0 || c.ncols() != n {
        return Err(Error::Shape(format!(
            "SDP cost is {}x{}",
            c.nrows(),
            c.ncols()
        )));
    }
    if let Some(r) = row {
        if r.a.shape() != c.shape() {
            return Err(Error::Shape("trace row and cost differ in shape".into()));
        }
        let diag: f64 = r.a.diagonal().sum();
        let off_abs: f64 = r.a.iter().map(|v| v.abs()).sum::<f64>() - r.a.diagonal().abs().sum();
        if diag + off_abs < r.b {
            return Err(Error::Infeasible {
                level: r.b,
                bound: diag + off_abs,
            });
        }
        if r.b > diag {
            let (_, bound) = row_capacity(&r.a, settings)?;
            if bound < r.b - 1e-9 * r.b.abs() {
                return Err(Error::Infeasible { level: r.b, bound });
            }
        }
    }

    // Work in normalized units.
    let c_scale = c.norm().max(f64::MIN_POSITIVE);
    let cn = sym(c) / c_scale;
    let row_n = row.map(|r| {
        let s = r.a.norm().max(f64::MIN_POSITIVE);
        let a = sym(&r.a) / s;
        let b = r.b / s;
        let mut a_off = a.clone();
        for i in 0..n {
            a_off[(i, i)] = 0.0;
        }
        let b_off = b - a.diagonal().sum();
        let norm2 = a_off.norm_squared();
        (TraceRow { a, b }, a_off, b_off, norm2)
    });
    let proj_row = row_n
        .as_ref()
        .map(|(_, a_off, b_off, norm2)| (a_off, *b_off, *norm2));

    let mut z = DMatrix::identity(n, n);
    let mut u = DMatrix::zeros(n, n);
    let mut sigma = 1.0 / n as f64;
    let mut converged = false;
    let mut iterations = 0;
    let eps = settings.tolerance;
    while iterations < settings.max_iters {
        iterations += 1;
        let x = project_affine(&(&z - &u + &cn / sigma), proj_row);
        let z_prev = z.clone();
        z = project_psd(&(&x + &u));
        u += &x - &z;
        let r_pri = (&x - &z).norm();
        let r_dual = sigma * (&z - &z_prev).norm();
        let scale = n as f64;
        if r_pri <= eps * scale && r_dual <= eps * scale {
            converged = true;
            break;
        }
        if iterations % 10 == 0 {
            if r_pri > 10.0 * r_dual {
                sigma *= 2.0;
                u *= 0.5;
            } else if r_dual > 10.0 * r_pri {
                sigma *= 0.5;
                u *= 2.0;
            }
        }
    }

    // Unit-diagonal PSD point from the PSD iterate.
    let d = DVector::from_iterator(n, (0..n).map(|i| 1.0 / z[(i, i)].max(1e-300).sqrt()));
    let xs = sym(&(DMatrix::from_diagonal(&d) * &z * DMatrix::from_diagonal(&d)));
    let objective = frob(c, &xs);
    let bound_n = best_dual_bound(&cn, row_n.as_ref().map(|(r, ..)| r), &xs);
    let (eigenvalues, vectors) = sorted_eigen(&xs);
    Ok(SdpSolution {
        constraint_value: row.map(|r| frob(&r.a, &xs)),
        eigenvector: vectors.column(0).into_owned(),
        eigenvalues,
        upper_bound: (bound_n * c_scale).max(objective),
        objective,
        x: xs,
        iterations,
        converged,
    })
}
