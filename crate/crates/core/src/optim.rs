//! Nelder–Mead simplex minimization.
//!
//! Derivative-free fallback for the restricted Q minimization when the
//! iterated-GMM fixed point oscillates. Standard reflection / expansion /
//! contraction / shrink coefficients.

use nalgebra::DVector;

pub(crate) struct NelderMeadResult {
    pub(crate) x: DVector<f64>,
    pub(crate) value: f64,
}

pub(crate) fn nelder_mead<F>(
    mut f: F,
    x0: &DVector<f64>,
    max_evals: usize,
) -> NelderMeadResult
where
    F: FnMut(&DVector<f64>) -> f64,
{
    const ALPHA: f64 = 1.0; // reflection
    const GAMMA: f64 = 2.0; // expansion
    const RHO: f64 = 0.5; // contraction
    const SIGMA: f64 = 0.5; // shrink

    let dim = x0.len();
    let mut evals = 0usize;
    let mut eval = |x: &DVector<f64>, evals: &mut usize| -> f64 {
        *evals += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };

    // initial simplex: x0 plus a bump in each coordinate
    let mut simplex: Vec<(DVector<f64>, f64)> = Vec::with_capacity(dim + 1);
    let v0 = eval(x0, &mut evals);
    simplex.push((x0.clone(), v0));
    for i in 0..dim {
        let mut x = x0.clone();
        x[i] += 0.1 * (1.0 + x0[i].abs());
        let v = eval(&x, &mut evals);
        simplex.push((x, v));
    }

    while evals < max_evals {
        simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal));
        let best = simplex[0].1;
        let worst = simplex[dim].1;
        if (worst - best).abs() <= 1e-12 * (1.0 + best.abs()) {
            break;
        }

        // centroid of all but the worst point
        let mut centroid = DVector::zeros(dim);
        for (x, _) in simplex.iter().take(dim) {
            centroid += x;
        }
        centroid /= dim as f64;

        let reflected = &centroid + (&centroid - &simplex[dim].0) * ALPHA;
        let fr = eval(&reflected, &mut evals);

        if fr < simplex[0].1 {
            let expanded = &centroid + (&reflected - &centroid) * GAMMA;
            let fe = eval(&expanded, &mut evals);
            simplex[dim] = if fe < fr {
                (expanded, fe)
            } else {
                (reflected, fr)
            };
        } else if fr < simplex[dim - 1].1 {
            simplex[dim] = (reflected, fr);
        } else {
            let contracted = &centroid + (&simplex[dim].0 - &centroid) * RHO;
            let fc = eval(&contracted, &mut evals);
            if fc < simplex[dim].1 {
                simplex[dim] = (contracted, fc);
            } else {
                // shrink towards the best vertex
                let best_x = simplex[0].0.clone();
                for entry in simplex.iter_mut().skip(1) {
                    entry.0 = &best_x + (&entry.0 - &best_x) * SIGMA;
                    entry.1 = eval(&entry.0, &mut evals);
                }
            }
        }
    }

    simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal));
    let (x, value) = simplex.swap_remove(0);
    NelderMeadResult { x, value }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn minimizes_shifted_quadratic() {
        let target = DVector::from_vec(vec![1.5, -2.0, 0.25]);
        let f = |x: &DVector<f64>| (x - &target).norm_squared();
        let res = nelder_mead(f, &DVector::zeros(3), 10_000);
        assert_relative_eq!(res.x, target, epsilon = 1e-4);
        assert!(res.value < 1e-8);
    }

    #[test]
    fn minimizes_rosenbrock_2d() {
        let f = |x: &DVector<f64>| {
            (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2)
        };
        let res = nelder_mead(f, &DVector::from_vec(vec![-1.2, 1.0]), 10_000);
        assert!(res.value < 1e-6, "value = {}", res.value);
    }
}
