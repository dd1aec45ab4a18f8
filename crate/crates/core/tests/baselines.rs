use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, StudentsT};

use hierreg::baselines::{ols_fit, ridge_fit, ridge_fit_centered, write_ols_csv};
use hierreg::Error;

fn random_problem(n: usize, d: usize, seed: u64) -> (DMatrix<f64>, DVector<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = DMatrix::from_fn(n, d, |_, _| rng.random_range(-2.0..2.0));
    let y = DVector::from_fn(n, |i, _| x.row(i).sum() * 0.3 + rng.random_range(-1.0..1.0));
    (x, y)
}

fn qr_solve(x: &DMatrix<f64>, y: &DVector<f64>) -> DVector<f64> {
    let qr = x.clone().qr();
    let qty = qr.q().transpose() * y;
    qr.r().solve_upper_triangular(&qty).unwrap()
}

#[test]
fn ols_matches_qr_reference() {
    for seed in 0..20 {
        let (x, y) = random_problem(40, 6, seed);
        let fit = ols_fit(&x, &y, false).unwrap();
        let reference = qr_solve(&x, &y);
        assert!((&fit.coefficients - &reference).amax() < 1e-8, "seed {seed}");

        let fit = ols_fit(&x, &y, true).unwrap();
        let reference = qr_solve(&x.clone().insert_column(0, 1.0), &y);
        assert!((&fit.coefficients - &reference).amax() < 1e-8, "seed {seed} with intercept");
    }
}

#[test]
fn ols_inference_matches_reference_formulas() {
    let (x, y) = random_problem(25, 3, 99);
    let fit = ols_fit(&x, &y, true).unwrap();
    let design = x.clone().insert_column(0, 1.0);
    let resid = &y - &design * &fit.coefficients;
    let dof = (25 - 4) as f64;
    let sigma2 = resid.norm_squared() / dof;
    assert!((fit.residual_variance - sigma2).abs() < 1e-12);
    let inv = design.tr_mul(&design).try_inverse().unwrap();
    let t = StudentsT::new(0.0, 1.0, dof).unwrap();
    for j in 0..4 {
        let se = (sigma2 * inv[(j, j)]).sqrt();
        assert!((fit.std_errors[j] - se).abs() < 1e-10);
        let tv = fit.coefficients[j] / se;
        assert!((fit.t_values[j] - tv).abs() < 1e-8);
        let p = 2.0 * (1.0 - t.cdf(tv.abs()));
        assert!((fit.p_values[j] - p).abs() < 1e-9, "p {} vs {p}", fit.p_values[j]);
    }
}

#[test]
fn rank_deficient_design_is_reported() {
    let x = DMatrix::from_row_slice(4, 2, &[1.0, 2.0, 2.0, 4.0, 3.0, 6.0, 4.0, 8.0]);
    let y = DVector::from_vec(vec![1.0, 2.0, 2.5, 4.0]);
    assert!(matches!(ols_fit(&x, &y, false), Err(Error::RankDeficient)));
}

#[test]
fn ridge_hand_example() {
    let x = DMatrix::from_row_slice(2, 1, &[1.0, 1.0]);
    let y = DVector::from_vec(vec![1.0, 1.0]);
    let beta = ridge_fit(&x, &y, 2.0).unwrap();
    assert!((beta[0] - 0.5).abs() < 1e-15);
}

#[test]
fn ridge_at_zero_is_ols() {
    let (x, y) = random_problem(30, 4, 5);
    let ridge = ridge_fit(&x, &y, 0.0).unwrap();
    let ols = ols_fit(&x, &y, false).unwrap();
    assert!((ridge - ols.coefficients).amax() < 1e-10);
    assert!(ridge_fit(&x, &y, -1.0).is_err());
}

#[test]
fn centered_ridge_at_zero_is_ols_with_intercept() {
    let (x, y) = random_problem(30, 4, 6);
    let y = y.map(|v| v + 3.0);
    let ridge = ridge_fit_centered(&x, &y, 0.0).unwrap();
    let ols = ols_fit(&x, &y, true).unwrap();
    assert!((ridge.intercept - ols.coefficients[0]).abs() < 1e-10);
    assert!((&ridge.coefficients - ols.coefficients.rows(1, 4)).amax() < 1e-10);
}

#[test]
fn ols_csv_layout() {
    let (x, y) = random_problem(12, 2, 1);
    let fit = ols_fit(&x, &y, true).unwrap();
    let mut buf = Vec::new();
    write_ols_csv(&mut buf, &fit, &["a".to_string(), "b".to_string()]).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "item,estimate,std_error,t_value,p_value");
    assert!(lines[1].starts_with("(Intercept),"));
    assert!(lines[3].starts_with("b,"));
    assert_eq!(lines.len(), 4);
    assert!(write_ols_csv(Vec::new(), &fit, &["a".to_string()]).is_err());
}

proptest! {
    #[test]
    fn residuals_orthogonal_to_design(seed in 0u64..10_000, n in 8usize..40, d in 1usize..5, intercept in any::<bool>()) {
        let (x, y) = random_problem(n, d, seed);
        let fit = ols_fit(&x, &y, intercept).unwrap();
        let design = if intercept { x.clone().insert_column(0, 1.0) } else { x.clone() };
        let resid = &y - &design * &fit.coefficients;
        for j in 0..design.ncols() {
            let col = design.column(j);
            let dot = col.dot(&resid);
            prop_assert!(dot.abs() <= 1e-8 * col.norm() * y.norm().max(1.0));
        }
        prop_assert!(fit.p_values.iter().all(|p| (0.0..=1.0).contains(p)));
    }

    #[test]
    fn ridge_norm_non_increasing(seed in 0u64..10_000, n in 5usize..30, d in 1usize..6) {
        let (x, y) = random_problem(n, d, seed);
        let mut previous = f64::INFINITY;
        for k in 0..13 {
            let lambda = 10f64.powf(-3.0 + 0.5 * k as f64);
            let norm = ridge_fit(&x, &y, lambda).unwrap().norm();
            prop_assert!(norm <= previous * (1.0 + 1e-12));
            previous = norm;
        }
        prop_assert!(ridge_fit(&x, &y, 1e12).unwrap().norm() < 1e-6);
    }
}
