//! Small dense Levenberg–Marquardt solver with central-difference Jacobians.

use nalgebra::{DMatrix, DVector};

use crate::scalar::{lit, Scalar};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmOptions<T> {
    pub max_iterations: usize,
    /// Stop once a step falls below this, relative to the parameter norm.
    pub tolerance: T,
    pub initial_damping: T,
}

impl<T: Scalar> Default for LmOptions<T> {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            tolerance: lit(1e-14),
            initial_damping: lit(1e-3),
        }
    }
}

#[derive(Debug, Clone)]
pub struct LmReport<T: Scalar> {
    pub params: DVector<T>,
    pub residuals: DVector<T>,
    /// Euclidean norm of the final residual vector.
    pub cost: T,
    pub iterations: usize,
}

fn jacobian<T: Scalar, F>(f: &F, x: &DVector<T>, steps: &DVector<T>, m: usize) -> DMatrix<T>
where
    F: Fn(&DVector<T>) -> DVector<T>,
{
    let mut jac = DMatrix::zeros(m, x.len());
    for k in 0..x.len() {
        let h = steps[k];
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[k] += h;
        xm[k] -= h;
        let col = (f(&xp) - f(&xm)) / (h + h);
        jac.set_column(k, &col);
    }
    jac
}

/// Minimize ‖f(x)‖² starting from `x0`; `steps` are the finite-difference
/// increments per parameter.
pub fn levenberg_marquardt<T: Scalar, F>(
    f: F,
    x0: DVector<T>,
    steps: &DVector<T>,
    opts: LmOptions<T>,
) -> LmReport<T>
where
    F: Fn(&DVector<T>) -> DVector<T>,
{
    levenberg_marquardt_with_jacobian(
        |x| {
            let r = f(x);
            let jac = jacobian(&f, x, steps, r.len());
            (r, jac)
        },
        x0,
        opts,
    )
}

/// As `levenberg_marquardt`, with `f` returning residuals and their Jacobian.
/// Stops once a step is below `tolerance` relative to ‖x‖ or no damping
/// level lowers the cost.
pub fn levenberg_marquardt_with_jacobian<T: Scalar, F>(
    f: F,
    x0: DVector<T>,
    opts: LmOptions<T>,
) -> LmReport<T>
where
    F: Fn(&DVector<T>) -> (DVector<T>, DMatrix<T>),
{
    let mut x = x0;
    let (mut r, mut jac) = f(&x);
    let mut cost = r.norm_squared();
    let mut lambda = opts.initial_damping;
    let mut iterations = 0;
    while iterations < opts.max_iterations && cost > T::zero() {
        iterations += 1;
        let jt = jac.transpose();
        let jtj = &jt * &jac;
        let grad = &jt * &r;
        let mut improved = false;
        for _ in 0..40 {
            let mut a = jtj.clone();
            for k in 0..a.nrows() {
                let d = jtj[(k, k)].max(lit(1e-30));
                a[(k, k)] += lambda * d;
            }
            let Some(step) = a.lu().solve(&(-&grad)) else {
                lambda *= lit(10.0);
                continue;
            };
            let xn = &x + &step;
            let (rn, jn) = f(&xn);
            let cn = rn.norm_squared();
            // Near a nonzero-residual minimum the cost is flat to rounding;
            // accepting such steps lets the iteration converge on step size.
            if cn <= cost * (T::one() + lit(1e-12)) {
                let small_step = step.norm() <= opts.tolerance * (x.norm() + opts.tolerance);
                x = xn;
                r = rn;
                jac = jn;
                cost = cn;
                lambda = (lambda / lit(3.0)).max(lit(1e-12));
                improved = true;
                if small_step {
                    return LmReport {
                        params: x,
                        residuals: r,
                        cost: cost.sqrt(),
                        iterations,
                    };
                }
                break;
            }
            lambda *= lit(4.0);
        }
        if !improved {
            break;
        }
    }
    LmReport {
        params: x,
        residuals: r,
        cost: cost.sqrt(),
        iterations,
    }
}
