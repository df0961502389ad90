use nalgebra::DVector;

/// A trial point accepted by the line search, with whatever the evaluator
/// produced alongside `φ` and `∇φ`.
#[derive(Debug, Clone)]
pub struct Step<T> {
    pub t: f64,
    pub x: DVector<f64>,
    pub phi: f64,
    pub grad: DVector<f64>,
    pub payload: T,
}

/// The bracketing budget ran out before both conditions held.
#[derive(Debug, Clone)]
pub struct LineSearchFailure<T> {
    /// Largest step seen that satisfied the Armijo condition.
    pub best_armijo: Option<Step<T>>,
    /// Every doubling still satisfied the Armijo condition: `φ` looks
    /// unbounded below along the direction.
    pub unbounded: bool,
}

/// Weak-Wolfe line search by doubling then bisection, starting at `t = 1`.
///
/// `eval` returns `None` for a trial point where the function could not be
/// evaluated to finite values; such a point is treated like an Armijo
/// failure. Up to `max_bisections` bisections and as many doublings are
/// tried.
#[allow(clippy::too_many_arguments)]
pub fn weak_wolfe_linesearch<T, F>(
    mut eval: F,
    x: &DVector<f64>,
    d: &DVector<f64>,
    phi0: f64,
    slope0: f64,
    c1: f64,
    c2: f64,
    max_bisections: usize,
) -> Result<Step<T>, LineSearchFailure<T>>
where
    F: FnMut(&DVector<f64>) -> Option<(f64, DVector<f64>, T)>,
{
    let mut lo = 0.0;
    let mut hi = f64::INFINITY;
    let mut t = 1.0;
    let mut best: Option<Step<T>> = None;
    let mut bisections = 0;
    let mut doublings = 0;
    loop {
        let xt = x + d * t;
        match eval(&xt) {
            Some((phi, grad, payload)) if phi <= phi0 + c1 * t * slope0 => {
                let slope = grad.dot(d);
                let step = Step {
                    t,
                    x: xt,
                    phi,
                    grad,
                    payload,
                };
                if slope >= c2 * slope0 {
                    return Ok(step);
                }
                lo = t;
                best = Some(step);
            }
            _ => hi = t,
        }
        if hi < f64::INFINITY {
            if bisections == max_bisections {
                break;
            }
            bisections += 1;
            t = 0.5 * (lo + hi);
        } else {
            if doublings == max_bisections {
                break;
            }
            doublings += 1;
            t *= 2.0;
        }
    }
    Err(LineSearchFailure {
        best_armijo: best,
        unbounded: hi == f64::INFINITY,
    })
}
