//! Bound-constrained Levenberg–Marquardt with an active-set projection.
//!
//! Each iteration solves `(JᵀJ + λ D²) δ = −Jᵀr` over the free variables
//! (those not pinned at a bound by the gradient), projects the trial point
//! back into the box and accepts it only if the gain ratio is positive, so
//! the cost sequence of accepted iterates is non-increasing.

use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmOptions {
    pub max_iterations: usize,
    /// Stop when an accepted step lowers the cost by less than this fraction.
    pub ftol: f64,
    /// Stop when the scaled step is shorter than this fraction of the scaled iterate.
    pub xtol: f64,
    /// Minimum gain ratio for accepting a step.
    pub accept: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            ftol: 1e-10,
            xtol: 1e-10,
            accept: 1e-4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    CostTolerance,
    StepTolerance,
    /// Projected gradient vanished.
    Stationary,
    /// Damping grew without finding a decrease.
    NoProgress,
    MaxIterations,
}

#[derive(Debug, Clone)]
pub struct LmReport<T> {
    pub x: Vec<T>,
    /// `Σ r²` at `x`
    pub cost: T,
    pub iterations: usize,
    pub evaluations: usize,
    pub stop: StopReason,
    /// Cost after every accepted step, starting with the initial cost.
    pub history: Vec<T>,
}

impl<T> LmReport<T> {
    pub fn converged(&self) -> bool {
        !matches!(self.stop, StopReason::MaxIterations)
    }
}

/// Residuals and row-major Jacobian (`m × n`).
pub struct Evaluation<T> {
    pub residuals: Vec<T>,
    pub jacobian: Vec<T>,
}

/// Minimizes `Σ r(x)²` subject to `lower ≤ x ≤ upper` (infinite bounds allowed).
pub fn least_squares<T: Scalar>(
    x0: &[T],
    lower: &[T],
    upper: &[T],
    options: &LmOptions,
    mut eval: impl FnMut(&[T]) -> Evaluation<T>,
) -> LmReport<T> {
    let n = x0.len();
    assert!(lower.len() == n && upper.len() == n);
    let clamp = |x: &mut [T]| {
        for i in 0..n {
            x[i] = x[i].max(lower[i]).min(upper[i]);
        }
    };
    let mut x = x0.to_vec();
    clamp(&mut x);
    let mut cur = eval(&x);
    let mut evaluations = 1;
    let m = cur.residuals.len();
    let sq = |r: &[T]| r.iter().fold(T::zero(), |a, &v| a + v * v);
    let mut cost = sq(&cur.residuals);
    let mut history = vec![cost];

    let ftol = T::lit(options.ftol);
    let xtol = T::lit(options.xtol);
    let accept = T::lit(options.accept);
    let half = T::lit(0.5);
    let two = T::lit(2.0);
    let tiny = T::min_positive_value();

    let mut scale = vec![T::zero(); n];
    let mut lambda = T::zero();
    let mut nu = two;
    let mut iterations = 0;

    let stop = loop {
        if iterations >= options.max_iterations {
            break StopReason::MaxIterations;
        }
        iterations += 1;

        // normal equations for cost/2
        let (a, g) = normal_equations(&cur.jacobian, &cur.residuals, m, n);
        for i in 0..n {
            scale[i] = scale[i].max(a[i * n + i].sqrt());
        }
        if lambda == T::zero() {
            // damping acts on D², so start relative to the scaled diagonal
            let max_diag = (0..n).fold(T::zero(), |acc, i| acc.max(a[i * n + i] / scale[i].max(tiny).powi(2)));
            lambda = T::lit(1e-3) * max_diag.max(tiny);
        }

        // variables held at a bound by the descent direction
        let free: Vec<usize> = (0..n)
            .filter(|&i| !((x[i] <= lower[i] && g[i] > T::zero()) || (x[i] >= upper[i] && g[i] < T::zero())))
            .collect();
        let grad_norm = free.iter().fold(T::zero(), |acc, &i| acc.max((g[i] / scale[i].max(tiny)).abs()));
        if free.is_empty() || grad_norm <= T::lit(1e-300) || cost == T::zero() {
            break StopReason::Stationary;
        }

        let mut accepted = false;
        let mut reason = None;
        while !accepted {
            let k = free.len();
            let mut sys = vec![T::zero(); k * k];
            let mut rhs = vec![T::zero(); k];
            for (p, &i) in free.iter().enumerate() {
                for (q, &j) in free.iter().enumerate() {
                    sys[p * k + q] = a[i * n + j];
                }
                let d = scale[i].max(tiny);
                sys[p * k + p] = sys[p * k + p] + lambda * d * d;
                rhs[p] = -g[i];
            }
            let Some(step) = cholesky_solve(&mut sys, &rhs, k) else {
                lambda = lambda * nu;
                nu = nu * two;
                if !lambda.is_finite() {
                    reason = Some(StopReason::NoProgress);
                    break;
                }
                continue;
            };
            let mut trial = x.clone();
            for (p, &i) in free.iter().enumerate() {
                trial[i] = trial[i] + step[p];
            }
            clamp(&mut trial);
            let delta: Vec<T> = (0..n).map(|i| trial[i] - x[i]).collect();

            let step_norm = (0..n).fold(T::zero(), |acc, i| acc + (scale[i] * delta[i]).powi(2)).sqrt();
            let x_norm = (0..n).fold(T::zero(), |acc, i| acc + (scale[i] * x[i]).powi(2)).sqrt();
            if step_norm <= xtol * (x_norm + xtol) {
                reason = Some(StopReason::StepTolerance);
                break;
            }

            // predicted decrease of cost/2 for the projected step
            let mut quad = T::zero();
            let mut lin = T::zero();
            for i in 0..n {
                lin = lin + g[i] * delta[i];
                let mut row = T::zero();
                for j in 0..n {
                    row = row + a[i * n + j] * delta[j];
                }
                quad = quad + delta[i] * row;
            }
            let predicted = -(lin + half * quad);
            let next = eval(&trial);
            evaluations += 1;
            let next_cost = sq(&next.residuals);
            let actual = half * (cost - next_cost);
            let rho = if predicted > T::zero() { actual / predicted } else { -T::one() };

            if rho > accept && next_cost.is_finite() && next_cost <= cost {
                let rel = (cost - next_cost) / cost.max(tiny);
                x = trial;
                cur = next;
                cost = next_cost;
                history.push(cost);
                let t = two * rho - T::one();
                lambda = lambda * (T::one() / T::lit(3.0)).max(T::one() - t * t * t);
                nu = two;
                accepted = true;
                if rel < ftol {
                    reason = Some(StopReason::CostTolerance);
                }
            } else {
                lambda = lambda * nu;
                nu = nu * two;
                if !lambda.is_finite() || lambda > T::lit(1e300) {
                    reason = Some(StopReason::NoProgress);
                    break;
                }
            }
        }
        if let Some(r) = reason {
            break r;
        }
    };

    LmReport {
        x,
        cost,
        iterations,
        evaluations,
        stop,
        history,
    }
}

fn normal_equations<T: Scalar>(jac: &[T], r: &[T], m: usize, n: usize) -> (Vec<T>, Vec<T>) {
    let mut a = vec![T::zero(); n * n];
    let mut g = vec![T::zero(); n];
    for row in 0..m {
        let j = &jac[row * n..(row + 1) * n];
        for p in 0..n {
            if j[p] == T::zero() {
                continue;
            }
            g[p] = g[p] + j[p] * r[row];
            for q in p..n {
                a[p * n + q] = a[p * n + q] + j[p] * j[q];
            }
        }
    }
    for p in 0..n {
        for q in 0..p {
            a[p * n + q] = a[q * n + p];
        }
    }
    (a, g)
}

/// Solves `A x = b` for symmetric positive definite `A` (overwritten).
pub(crate) fn cholesky_solve<T: Scalar>(a: &mut [T], b: &[T], n: usize) -> Option<Vec<T>> {
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d = d - a[j * n + k] * a[j * n + k];
        }
        if !(d > T::zero()) || !d.is_finite() {
            return None;
        }
        let d = d.sqrt();
        a[j * n + j] = d;
        for i in j + 1..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s = s - a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = s / d;
        }
    }
    let mut y = b.to_vec();
    for i in 0..n {
        for k in 0..i {
            y[i] = y[i] - a[i * n + k] * y[k];
        }
        y[i] = y[i] / a[i * n + i];
    }
    for i in (0..n).rev() {
        for k in i + 1..n {
            y[i] = y[i] - a[k * n + i] * y[k];
        }
        y[i] = y[i] / a[i * n + i];
    }
    Some(y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rosenbrock(x: &[f64]) -> Evaluation<f64> {
        Evaluation {
            residuals: vec![10.0 * (x[1] - x[0] * x[0]), 1.0 - x[0]],
            jacobian: vec![-20.0 * x[0], 10.0, -1.0, 0.0],
        }
    }

    #[test]
    fn cholesky_matches_known_solution() {
        let mut a = vec![4.0f64, 2.0, 2.0, 3.0];
        let x = cholesky_solve(&mut a, &[2.0, 1.0], 2).unwrap();
        assert!((x[0] - 0.5).abs() < 1e-15 && x[1].abs() < 1e-15);
        assert!(cholesky_solve(&mut [1.0, 2.0, 2.0, 1.0], &[1.0, 1.0], 2).is_none());
    }

    #[test]
    fn solves_rosenbrock() {
        let inf = f64::INFINITY;
        let r = least_squares(&[-1.2, 1.0], &[-inf, -inf], &[inf, inf], &LmOptions::default(), rosenbrock);
        assert!(r.converged());
        assert!((r.x[0] - 1.0).abs() < 1e-8 && (r.x[1] - 1.0).abs() < 1e-8, "{:?}", r.x);
    }

    #[test]
    fn respects_bounds() {
        let inf = f64::INFINITY;
        let r = least_squares(&[-1.2, 0.5], &[-inf, -inf], &[0.5, inf], &LmOptions::default(), rosenbrock);
        assert_eq!(r.x[0], 0.5);
        assert!((r.x[1] - 0.25).abs() < 1e-8);
    }

    proptest! {
        #[test]
        fn accepted_costs_never_increase(a in 0.1f64..5.0, b in -2.0f64..2.0, x0 in -3.0f64..3.0, y0 in -3.0f64..3.0) {
            // exponential decay fit to noisy-free data with a bounded rate
            let ts: Vec<f64> = (0..12).map(|i| i as f64 * 0.3).collect();
            let data: Vec<f64> = ts.iter().map(|t| a * (-0.7 * t).exp() + b).collect();
            let r = least_squares(&[x0, 0.1, y0], &[-10.0, 0.0, -10.0], &[10.0, 3.0, 10.0], &LmOptions::default(), |p| {
                let mut res = Vec::new();
                let mut jac = Vec::new();
                for (t, d) in ts.iter().zip(&data) {
                    let e = (-p[1] * t).exp();
                    res.push(p[0] * e + p[2] - d);
                    jac.extend_from_slice(&[e, -p[0] * t * e, 1.0]);
                }
                Evaluation { residuals: res, jacobian: jac }
            });
            for w in r.history.windows(2) {
                prop_assert!(w[1] <= w[0]);
            }
            for (v, (lo, hi)) in r.x.iter().zip([(-10.0, 10.0), (0.0, 3.0), (-10.0, 10.0)]) {
                prop_assert!(*v >= lo && *v <= hi);
            }
        }
    }
}
