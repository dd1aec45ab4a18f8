#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};

use hierreg::model::Hyperparameters;

/// Hyperparameters with every Gamma prior set to (shape, rate) and μ0 = 0.
pub fn hyper_with(dim: usize, shape: f64, rate: f64) -> Hyperparameters {
    Hyperparameters {
        a0: shape,
        b0: rate,
        c0: shape,
        d0: rate,
        e0: shape,
        f0: rate,
        mu0: DVector::zeros(dim),
        epsilon: 1e-10,
        max_iter: 2000,
    }
}

/// Five-point central-difference gradient.
pub fn gradient(f: &dyn Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            let mut at = |offset: f64| {
                probe[i] = x[i] + offset;
                let v = f(&probe);
                probe[i] = x[i];
                v
            };
            (-at(2.0 * h) + 8.0 * at(h) - 8.0 * at(-h) + at(-2.0 * h)) / (12.0 * h)
        })
        .collect()
}

fn hessian(f: &dyn Fn(&[f64]) -> f64, x: &[f64], h: f64) -> DMatrix<f64> {
    let n = x.len();
    let mut hess = DMatrix::zeros(n, n);
    let mut probe = x.to_vec();
    for j in 0..n {
        probe[j] = x[j] + h;
        let up = gradient(f, &probe, h);
        probe[j] = x[j] - h;
        let down = gradient(f, &probe, h);
        probe[j] = x[j];
        for i in 0..n {
            hess[(i, j)] = (up[i] - down[i]) / (2.0 * h);
        }
    }
    0.5 * (&hess + hess.transpose())
}

/// Maximizes `f` by damped Newton steps on finite-difference derivatives.
pub fn maximize(f: &dyn Fn(&[f64]) -> f64, x0: &[f64]) -> Vec<f64> {
    let h = 1e-3;
    let mut x = x0.to_vec();
    let mut fx = f(&x);
    for _ in 0..200 {
        let g = DVector::from_vec(gradient(f, &x, h));
        let hess = hessian(f, &x, h);
        let neg = -&hess;
        let direction = match neg.clone().cholesky() {
            Some(ch) => ch.solve(&g),
            None => g.clone() / (neg.amax().max(1.0)),
        };
        let mut t = 1.0;
        let mut moved = false;
        while t > 1e-12 {
            let cand: Vec<f64> = x.iter().zip(direction.iter()).map(|(a, d)| a + t * d).collect();
            let fc = f(&cand);
            if fc.is_finite() && fc >= fx - 1e-13 * fx.abs() {
                let step = t * direction.norm();
                x = cand;
                fx = fc;
                moved = true;
                if step < 1e-12 {
                    return x;
                }
                break;
            }
            t *= 0.5;
        }
        if !moved {
            break;
        }
    }
    x
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64
}

/// Standard error of the mean of an autocorrelated series by batch means.
pub fn batch_means_se(xs: &[f64], batches: usize) -> f64 {
    let size = xs.len() / batches;
    let means: Vec<f64> = (0..batches).map(|b| mean(&xs[b * size..(b + 1) * size])).collect();
    (variance(&means) / batches as f64).sqrt()
}

/// Empirical quantile with linear interpolation; sorts a copy.
pub fn quantile(xs: &[f64], p: f64) -> f64 {
    let mut sorted = xs.to_vec();
    sorted.sort_by(f64::total_cmp);
    hierreg::gibbs::sorted_quantile(&sorted, p)
}
