//! Bound-constrained least squares: min ‖M·p − b‖² over p ≥ lower, optionally with Σp fixed.
//!
//! A primal active-set method solves each equality-constrained subproblem on the free
//! coordinates with an SVD pseudo-inverse, so rank-deficient designs are fine. If the
//! active set fails to settle, an accelerated projected-gradient run takes over.

use nalgebra::{DMatrix, DVector};

use crate::error::{RasError, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QpOptions {
    /// Target for ‖p − proj(p − ∇)‖∞.
    pub kkt_tol: f64,
    /// Active-set iteration cap; `None` means `10·d + 100`.
    pub max_active_set_iter: Option<usize>,
    pub max_gradient_iter: usize,
}

impl Default for QpOptions {
    fn default() -> Self {
        Self {
            kkt_tol: 1e-8,
            max_active_set_iter: None,
            max_gradient_iter: 50_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub x: Vec<f64>,
    /// ‖M·x − b‖², evaluated directly at `x`.
    pub objective: f64,
    pub kkt_residual: f64,
    pub iterations: usize,
}

/// min ‖M·p − b‖² subject to p ≥ lower and Σp = total.
pub fn simplex_least_squares(
    m: &DMatrix<f64>,
    b: &DVector<f64>,
    lower: f64,
    total: f64,
    opts: &QpOptions,
) -> Result<QpSolution> {
    check_dims(m, b)?;
    let d = m.ncols();
    let radius = total - d as f64 * lower;
    if radius < -1e-12 || !radius.is_finite() {
        return Err(RasError::Config(format!(
            "lower bound {lower} times {d} coordinates exceeds the total {total}"
        )));
    }
    if radius <= 1e-15 {
        let x = vec![lower; d];
        return Ok(finish(m, b, x, lower, Some(radius.max(0.0)), 0));
    }
    let (ms, bs) = shifted(m, b, lower, radius);
    let (q, iterations) = solve_reduced(&ms, &bs, true, opts);
    let x = q.iter().map(|v| lower + radius * v).collect();
    check_kkt(finish(m, b, x, lower, Some(radius), iterations), opts)
}

/// min ‖M·p − b‖² subject to p ≥ lower.
pub fn bounded_least_squares(
    m: &DMatrix<f64>,
    b: &DVector<f64>,
    lower: f64,
    opts: &QpOptions,
) -> Result<QpSolution> {
    check_dims(m, b)?;
    let (ms, bs) = shifted(m, b, lower, 1.0);
    let (r, iterations) = solve_reduced(&ms, &bs, false, opts);
    let x = r.iter().map(|v| lower + v).collect();
    check_kkt(finish(m, b, x, lower, None, iterations), opts)
}

fn check_dims(m: &DMatrix<f64>, b: &DVector<f64>) -> Result<()> {
    if m.nrows() != b.len() || m.ncols() == 0 {
        return Err(RasError::Dimension(format!(
            "design is {}x{} but the target has length {}",
            m.nrows(),
            m.ncols(),
            b.len()
        )));
    }
    Ok(())
}

/// Substitutes p = lower·1 + scale·q: returns (scale·M, b − lower·M·1).
fn shifted(
    m: &DMatrix<f64>,
    b: &DVector<f64>,
    lower: f64,
    scale: f64,
) -> (DMatrix<f64>, DVector<f64>) {
    let row_sums = DVector::from_iterator(m.nrows(), m.row_iter().map(|r| r.sum()));
    (m * scale, b - row_sums * lower)
}

fn finish(
    m: &DMatrix<f64>,
    b: &DVector<f64>,
    mut x: Vec<f64>,
    lower: f64,
    radius: Option<f64>,
    iterations: usize,
) -> QpSolution {
    for v in &mut x {
        if *v < lower {
            *v = lower;
        }
    }
    if let Some(r) = radius {
        // restore the sum exactly after clamping
        let excess: f64 = x.iter().map(|v| v - lower).sum();
        if excess > 0.0 {
            for v in &mut x {
                *v = lower + (*v - lower) * r / excess;
            }
        }
    }
    let xv = DVector::from_column_slice(&x);
    let resid = m * &xv - b;
    let grad = m.transpose() * &resid;
    let z: Vec<f64> = x.iter().zip(grad.iter()).map(|(xi, gi)| xi - gi).collect();
    let proj = match radius {
        Some(r) => {
            let shifted: Vec<f64> = z.iter().map(|v| v - lower).collect();
            project_simplex(&shifted, r)
                .into_iter()
                .map(|v| v + lower)
                .collect()
        }
        None => z.iter().map(|v| v.max(lower)).collect::<Vec<_>>(),
    };
    let kkt_residual = x
        .iter()
        .zip(&proj)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    QpSolution {
        objective: resid.norm_squared(),
        x,
        kkt_residual,
        iterations,
    }
}

fn check_kkt(sol: QpSolution, opts: &QpOptions) -> Result<QpSolution> {
    if sol.kkt_residual < opts.kkt_tol {
        Ok(sol)
    } else {
        Err(RasError::NotConverged {
            iterations: sol.iterations,
            residual: sol.kkt_residual,
            best: sol.x,
        })
    }
}

/// Euclidean projection onto {x ≥ 0, Σx = radius} by sorting.
pub fn project_simplex(v: &[f64], radius: f64) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (j, &uj) in u.iter().enumerate() {
        cum += uj;
        let t = (cum - radius) / (j + 1) as f64;
        if uj - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|x| (x - theta).max(0.0)).collect()
}

/// Solves min ‖M·q − b‖² over q ≥ 0, with Σq = 1 when `simplex`.
fn solve_reduced(
    m: &DMatrix<f64>,
    b: &DVector<f64>,
    simplex: bool,
    opts: &QpOptions,
) -> (Vec<f64>, usize) {
    let d = m.ncols();
    let max_iter = opts.max_active_set_iter.unwrap_or(10 * d + 100);
    if let Some(found) = active_set(m, b, simplex, max_iter, opts.kkt_tol) {
        return found;
    }
    log::debug!(
        "active set did not settle in {max_iter} iterations; switching to projected gradient"
    );
    let (q, it) = projected_gradient(m, b, simplex, opts);
    (q, max_iter + it)
}

fn gradient(m: &DMatrix<f64>, b: &DVector<f64>, q: &[f64]) -> DVector<f64> {
    let qv = DVector::from_column_slice(q);
    m.transpose() * (m * qv - b)
}

fn reduced_kkt(m: &DMatrix<f64>, b: &DVector<f64>, q: &[f64], simplex: bool) -> f64 {
    let g = gradient(m, b, q);
    let z: Vec<f64> = q.iter().zip(g.iter()).map(|(a, b)| a - b).collect();
    let p = if simplex {
        project_simplex(&z, 1.0)
    } else {
        z.iter().map(|v| v.max(0.0)).collect()
    };
    q.iter()
        .zip(&p)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}

/// Minimum-norm least-squares solution of `a·y = r`.
fn lstsq(a: &DMatrix<f64>, r: &DVector<f64>) -> DVector<f64> {
    if a.ncols() == 0 {
        return DVector::zeros(0);
    }
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let eps = smax * (a.nrows().max(a.ncols()) as f64) * f64::EPSILON;
    svd.solve(r, eps.max(f64::MIN_POSITIVE))
        .unwrap_or_else(|_| DVector::zeros(a.ncols()))
}

/// Orthonormal basis of {x ∈ R^k : Σx = 0}, from the Householder reflector mapping e₁ to 1/√k.
fn sum_zero_basis(k: usize) -> DMatrix<f64> {
    let sk = (k as f64).sqrt();
    let mut v = DVector::from_element(k, 1.0);
    v[0] += sk;
    let vv = v.norm_squared();
    DMatrix::from_fn(k, k - 1, |i, j| {
        let col = j + 1;
        let id = if i == col { 1.0 } else { 0.0 };
        id - 2.0 * v[i] * v[col] / vv
    })
}

/// Displacement minimizing the objective over the face spanned by `free`, starting at `q`.
fn face_step(
    m: &DMatrix<f64>,
    b: &DVector<f64>,
    q: &[f64],
    free: &[usize],
    simplex: bool,
) -> Vec<f64> {
    let k = free.len();
    let mut step = vec![0.0; q.len()];
    if k == 0 || (simplex && k == 1) {
        return step;
    }
    let mf = DMatrix::from_fn(m.nrows(), k, |r, c| m[(r, free[c])]);
    let qv = DVector::from_column_slice(q);
    let resid = b - m * qv;
    let dir = if simplex {
        let z = sum_zero_basis(k);
        let y = lstsq(&(&mf * &z), &resid);
        z * y
    } else {
        lstsq(&mf, &resid)
    };
    for (c, &j) in free.iter().enumerate() {
        step[j] = dir[c];
    }
    step
}

fn active_set(
    m: &DMatrix<f64>,
    b: &DVector<f64>,
    simplex: bool,
    max_iter: usize,
    kkt_tol: f64,
) -> Option<(Vec<f64>, usize)> {
    let d = m.ncols();
    let (mut q, mut free): (Vec<f64>, Vec<bool>) = if simplex {
        (vec![1.0 / d as f64; d], vec![true; d])
    } else {
        (vec![0.0; d], vec![false; d])
    };
    for it in 0..max_iter {
        let idx: Vec<usize> = (0..d).filter(|&j| free[j]).collect();
        let step = face_step(m, b, &q, &idx, simplex);
        // ratio test against q ≥ 0
        let mut alpha = 1.0;
        let mut blocking = None;
        for &j in &idx {
            if step[j] < 0.0 {
                let a = q[j] / -step[j];
                if a < alpha {
                    alpha = a;
                    blocking = Some(j);
                }
            }
        }
        for j in 0..d {
            q[j] += alpha * step[j];
        }
        if let Some(j) = blocking {
            q[j] = 0.0;
            free[j] = false;
            for (qj, fj) in q.iter_mut().zip(free.iter_mut()) {
                if *fj && *qj <= 0.0 {
                    *qj = 0.0;
                    *fj = false;
                }
            }
            if simplex && !free.iter().any(|&f| f) {
                return None;
            }
            continue;
        }
        let g = gradient(m, b, &q);
        let nfree = idx.len();
        let lambda = if simplex && nfree > 0 {
            idx.iter().map(|&j| g[j]).sum::<f64>() / nfree as f64
        } else {
            0.0
        };
        let entering = (0..d)
            .filter(|&j| !free[j])
            .map(|j| (j, g[j] - lambda))
            .min_by(|a, b| a.1.total_cmp(&b.1));
        match entering {
            Some((j, mu)) if mu < -kkt_tol * 1e-3 => free[j] = true,
            // otherwise either optimal or stalled on the face; a stalled face is retried
            _ if reduced_kkt(m, b, &q, simplex) < kkt_tol * 1e-2 => return Some((q, it + 1)),
            _ => {}
        }
    }
    None
}

fn projected_gradient(
    m: &DMatrix<f64>,
    b: &DVector<f64>,
    simplex: bool,
    opts: &QpOptions,
) -> (Vec<f64>, usize) {
    let d = m.ncols();
    let h = m.transpose() * m;
    let lip = h.clone().symmetric_eigen().eigenvalues.max().max(1e-12);
    let project = |z: &[f64]| -> Vec<f64> {
        if simplex {
            project_simplex(z, 1.0)
        } else {
            z.iter().map(|v| v.max(0.0)).collect()
        }
    };
    let objective = |q: &[f64]| (m * DVector::from_column_slice(q) - b).norm_squared();
    let mut x = project(&vec![1.0 / d as f64; d]);
    let mut y = x.clone();
    let mut t = 1.0f64;
    let mut fx = objective(&x);
    for it in 0..opts.max_gradient_iter {
        let g = gradient(m, b, &y);
        let z: Vec<f64> = y
            .iter()
            .zip(g.iter())
            .map(|(yi, gi)| yi - gi / lip)
            .collect();
        let x_next = project(&z);
        let f_next = objective(&x_next);
        if f_next > fx {
            // adaptive restart
            t = 1.0;
            y = x.clone();
            continue;
        }
        let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
        let beta = (t - 1.0) / t_next;
        y = x_next
            .iter()
            .zip(&x)
            .map(|(a, b)| a + beta * (a - b))
            .collect();
        x = x_next;
        fx = f_next;
        t = t_next;
        if it % 50 == 0 && reduced_kkt(m, b, &x, simplex) < opts.kkt_tol * 1e-2 {
            return (x, it + 1);
        }
    }
    (x, opts.max_gradient_iter)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid_simplex_min(m: &DMatrix<f64>, b: &DVector<f64>, steps: usize) -> f64 {
        // d = 3 grid over the simplex
        let mut best = f64::INFINITY;
        for i in 0..=steps {
            for j in 0..=(steps - i) {
                let p = DVector::from_vec(vec![
                    i as f64 / steps as f64,
                    j as f64 / steps as f64,
                    (steps - i - j) as f64 / steps as f64,
                ]);
                best = best.min((m * p - b).norm_squared());
            }
        }
        best
    }

    #[test]
    fn simplex_projection_examples() {
        assert_eq!(project_simplex(&[0.5, 0.5], 1.0), vec![0.5, 0.5]);
        assert_eq!(project_simplex(&[2.0, 0.0], 1.0), vec![1.0, 0.0]);
        let p = project_simplex(&[0.2, 0.2, 0.2], 1.0);
        for v in p {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
        assert_eq!(project_simplex(&[3.0, -1.0], 2.0), vec![2.0, 0.0]);
    }

    #[test]
    fn exact_interior_solution_is_recovered() {
        let m = DMatrix::from_row_slice(4, 3, &[1., 0., 0., 0., 1., 0., 0., 0., 1., 1., 1., 0.]);
        let p = DVector::from_vec(vec![0.2, 0.5, 0.3]);
        let b = &m * &p;
        let sol = simplex_least_squares(&m, &b, 0.0, 1.0, &QpOptions::default()).unwrap();
        for (x, t) in sol.x.iter().zip(p.iter()) {
            assert!((x - t).abs() < 1e-12);
        }
        assert!(sol.objective < 1e-20);
    }

    #[test]
    fn boundary_solution_and_nnls() {
        // unconstrained optimum (1.5, -0.5) lies outside the simplex
        let m = DMatrix::<f64>::identity(2, 2);
        let b = DVector::from_vec(vec![1.5, -0.5]);
        let sol = simplex_least_squares(&m, &b, 0.0, 1.0, &QpOptions::default()).unwrap();
        assert!((sol.x[0] - 1.0).abs() < 1e-12 && sol.x[1].abs() < 1e-12);
        assert!((sol.objective - 0.5).abs() < 1e-12);
        let nn = bounded_least_squares(&m, &b, 0.0, &QpOptions::default()).unwrap();
        assert_eq!(nn.x, vec![1.5, 0.0]);
        let lb = simplex_least_squares(&m, &b, 0.2, 1.0, &QpOptions::default()).unwrap();
        assert!((lb.x[0] - 0.8).abs() < 1e-12 && (lb.x[1] - 0.2).abs() < 1e-12);
    }

    #[test]
    fn infeasible_lower_bound_is_a_config_error() {
        let m = DMatrix::<f64>::identity(2, 2);
        let b = DVector::from_vec(vec![0.5, 0.5]);
        assert!(matches!(
            simplex_least_squares(&m, &b, 0.6, 1.0, &QpOptions::default()),
            Err(RasError::Config(_))
        ));
        let tight = simplex_least_squares(&m, &b, 0.5, 1.0, &QpOptions::default()).unwrap();
        assert_eq!(tight.x, vec![0.5, 0.5]);
    }

    #[test]
    fn rank_deficient_design_is_handled() {
        // duplicated columns: any split between them is optimal
        let m = DMatrix::from_row_slice(2, 3, &[1., 1., 0., 0., 0., 1.]);
        let b = DVector::from_vec(vec![0.7, 0.3]);
        let sol = simplex_least_squares(&m, &b, 0.0, 1.0, &QpOptions::default()).unwrap();
        assert!(sol.objective < 1e-20);
        assert!((sol.x[0] + sol.x[1] - 0.7).abs() < 1e-12);
    }

    #[test]
    fn gradient_fallback_converges() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let m = DMatrix::from_fn(6, 4, |_, _| rng.random::<f64>());
        let b = DVector::from_fn(6, |_, _| rng.random::<f64>());
        let opts = QpOptions {
            max_active_set_iter: Some(0),
            ..QpOptions::default()
        };
        let slow = simplex_least_squares(&m, &b, 0.0, 1.0, &opts).unwrap();
        let fast = simplex_least_squares(&m, &b, 0.0, 1.0, &QpOptions::default()).unwrap();
        assert!((slow.objective - fast.objective).abs() < 1e-10);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(128))]

        #[test]
        fn matches_grid_search_and_satisfies_kkt(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let rows = rng.random_range(2..8);
            let m = DMatrix::from_fn(rows, 3, |_, _| rng.random::<f64>());
            let b = DVector::from_fn(rows, |_, _| rng.random::<f64>());
            let sol = simplex_least_squares(&m, &b, 0.0, 1.0, &QpOptions::default()).unwrap();
            prop_assert!(sol.kkt_residual < 1e-8);
            prop_assert!((sol.x.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!(sol.x.iter().all(|&v| v >= 0.0));
            let grid = grid_simplex_min(&m, &b, 200);
            prop_assert!(sol.objective <= grid + 1e-12);
            prop_assert!(grid - sol.objective < 1e-3);
            let direct = (&m * DVector::from_column_slice(&sol.x) - &b).norm_squared();
            prop_assert!((direct - sol.objective).abs() < 1e-10);
        }

        #[test]
        fn larger_random_problems_converge(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let d = rng.random_range(2..40);
            let rows = rng.random_range(3..40);
            let m = DMatrix::from_fn(rows, d, |_, _| if rng.random_bool(0.4) { rng.random::<f64>() } else { 0.0 });
            let b = DVector::from_fn(rows, |_, _| rng.random::<f64>());
            let sol = simplex_least_squares(&m, &b, 0.0, 1.0, &QpOptions::default()).unwrap();
            prop_assert!(sol.kkt_residual < 1e-8);
            let nn = bounded_least_squares(&m, &b, 0.0, &QpOptions::default()).unwrap();
            prop_assert!(nn.kkt_residual < 1e-8);
            prop_assert!(nn.objective <= sol.objective + 1e-10);
        }
    }
}
