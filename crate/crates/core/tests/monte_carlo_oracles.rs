//! Closed forms checked against brute-force simulation of the same model.

use nalgebra::{DMatrix, DVector};
use ridgekit::augment::{augment_perturb, augment_stochastic, dropout_closed_form, dropout_monte_carlo, DropoutSpec};
use ridgekit::decomp::svd_full;
use ridgekit::ridge::{bias_at, covariance_at, mse_at, ridge_fit};
use ridgekit::rng::{normal_matrix, normal_vec};
use ridgekit::{Dataset, LinearModelTruth};

const DRAWS: usize = 5000;

struct Moments {
    mean: DVector<f64>,
    se: DVector<f64>,
}

/// Sample mean and its standard error, coordinate-wise.
fn moments(samples: &[DVector<f64>]) -> Moments {
    let m = samples.len() as f64;
    let dim = samples[0].len();
    let mut mean = DVector::zeros(dim);
    for s in samples {
        mean += s;
    }
    mean /= m;
    let mut var = DVector::zeros(dim);
    for s in samples {
        let d = s - &mean;
        var += d.component_mul(&d);
    }
    var /= m - 1.0;
    Moments { mean, se: var.map(|v| (v / m).sqrt()) }
}

struct Setup {
    x: DMatrix<f64>,
    truth: LinearModelTruth<f64>,
    /// Ridge estimates from independent noise draws.
    draws: Vec<DVector<f64>>,
}

fn simulate(lambda: f64) -> Setup {
    let x = normal_matrix::<f64>(40, 0, 40, 8);
    let beta = normal_vec::<f64>(40, 9_000, 8) * 2.0;
    let sigma = 1.5;
    let signal = &x * &beta;
    let draws = (0..DRAWS)
        .map(|k| {
            let y = &signal + normal_vec::<f64>(41, k as u64, 40) * sigma;
            ridge_fit(&Dataset::new(x.clone(), y).unwrap(), lambda).unwrap().coefficients
        })
        .collect();
    Setup { x, truth: LinearModelTruth::new(beta, sigma).unwrap(), draws }
}

fn within_se(got: f64, want: f64, se: f64) -> bool {
    (got - want).abs() <= 3.0 * se
}

#[test]
fn bias_matches_simulated_mean() {
    for lambda in [0.5, 20.0] {
        let s = simulate(lambda);
        let f = svd_full(&s.x).unwrap();
        let errs: Vec<_> = s.draws.iter().map(|b| b - &s.truth.beta).collect();
        let m = moments(&errs);
        let bias = bias_at(&f, &s.truth, lambda);
        for j in 0..8 {
            assert!(within_se(m.mean[j], bias[j], m.se[j]), "λ={lambda} j={j}: {} vs {}", m.mean[j], bias[j]);
        }
    }
}

#[test]
fn covariance_matches_simulated_covariance() {
    let lambda = 3.0;
    let s = simulate(lambda);
    let f = svd_full(&s.x).unwrap();
    let cov = covariance_at(&f, &s.truth, lambda).unwrap();
    let center = moments(&s.draws).mean;
    for a in 0..8 {
        for b in a..8 {
            let prods: Vec<_> =
                s.draws.iter().map(|d| DVector::from_element(1, (d[a] - center[a]) * (d[b] - center[b]))).collect();
            let m = moments(&prods);
            // centering at the sample mean scales the expectation by (N-1)/N
            let want = cov[(a, b)] * (DRAWS as f64 - 1.0) / DRAWS as f64;
            assert!(within_se(m.mean[0], want, m.se[0]), "({a},{b}): {} vs {}", m.mean[0], want);
        }
    }
}

#[test]
fn mse_matches_simulated_squared_error() {
    let lambda = 5.0;
    let s = simulate(lambda);
    let f = svd_full(&s.x).unwrap();
    let x0 = normal_vec::<f64>(42, 0, 8);
    let sq: Vec<_> = s
        .draws
        .iter()
        .map(|b| {
            let e = x0.dot(&(b - &s.truth.beta));
            DVector::from_element(1, e * e)
        })
        .collect();
    let m = moments(&sq);
    let want = mse_at(&f, &s.truth, lambda, &x0).unwrap();
    assert!(within_se(m.mean[0], want, m.se[0]), "{} vs {}", m.mean[0], want);
}

fn centered(seed: u64, n: usize, p: usize) -> Dataset<f64> {
    let x = normal_matrix::<f64>(seed, 0, n, p);
    let y = &x * normal_vec::<f64>(seed, 7_000, p) + normal_vec::<f64>(seed, 7_001, n);
    Dataset::centered(x, y).unwrap()
}

fn rel(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a - b).norm() / b.norm()
}

#[test]
fn stochastic_augmentation_within_ten_percent_at_ten_p() {
    let d = centered(11, 50, 6);
    let ridge = ridge_fit(&d, 2.0).unwrap().coefficients;
    let wls = augment_stochastic(&d, 2.0, 60, 3).unwrap().solve().unwrap();
    assert!(rel(&wls, &ridge) < 0.1, "{}", rel(&wls, &ridge));
}

#[test]
fn stochastic_augmentation_error_falls_with_draws() {
    let d = centered(12, 50, 6);
    let ridge = ridge_fit(&d, 2.0).unwrap().coefficients;
    let mut means = Vec::new();
    for n_a in [15, 30, 60, 120, 240, 480] {
        let total: f64 =
            (0..20u64).map(|seed| rel(&augment_stochastic(&d, 2.0, n_a, seed).unwrap().solve().unwrap(), &ridge)).sum();
        means.push(total / 20.0);
    }
    assert!(means.windows(2).all(|w| w[1] < w[0]), "{means:?}");
}

#[test]
fn perturbation_approaches_ridge() {
    let d = centered(13, 30, 5);
    let lam = 4.0;
    let ridge = ridge_fit(&d, lam).unwrap().coefficients;
    let errs: Vec<f64> = [10, 100, 1000]
        .iter()
        .map(|&m| {
            let total: f64 =
                (0..5u64).map(|seed| rel(&augment_perturb(&d, lam, m, seed).unwrap().solve().unwrap(), &ridge)).sum();
            total / 5.0
        })
        .collect();
    assert!(errs.windows(2).all(|w| w[1] < w[0]), "{errs:?}");
    assert!(errs[2] < 0.05, "{errs:?}");
}

#[test]
fn dropout_minimizer_matches_closed_form() {
    // The Monte-Carlo minimizer solves the averaged random normal equations
    // Ĝβ = ĉ. Its offset from the closed form is Ĝ⁻¹ times the averaged score
    // at the closed form, so the standard error of G⁻¹·score bounds it.
    let x = normal_matrix::<f64>(14, 0, 40, 6);
    let y = &x * normal_vec::<f64>(14, 1, 6) + normal_vec::<f64>(14, 2, 40);
    let d = Dataset::new(x, y).unwrap();
    let phi = 0.3;
    let spec = DropoutSpec::for_data(&d, phi).unwrap();
    let beta = dropout_closed_form(&d, &spec).unwrap().coefficients;
    let masks = 200_000;

    let moments = dropout_monte_carlo(&d, phi, masks, 5, 42, |xi| {
        let g = xi.tr_mul(xi);
        let c = xi.tr_mul(&d.y);
        DVector::from_iterator(42, g.iter().copied().chain(c.iter().copied()))
    })
    .unwrap();
    let g_hat = DMatrix::from_column_slice(6, 6, &moments.mean.as_slice()[..36]);
    let c_hat = DVector::from_column_slice(&moments.mean.as_slice()[36..]);
    let beta_mc = g_hat.lu().solve(&c_hat).unwrap();

    let mut g = d.x.tr_mul(&d.x);
    for j in 0..6 {
        g[(j, j)] += spec.penalty_ratio() * spec.column_norms_sq[j];
    }
    let g_inv = g.try_inverse().unwrap();
    let offset = dropout_monte_carlo(&d, phi, masks, 5, 6, |xi| &g_inv * xi.tr_mul(&(&d.y - xi * &beta))).unwrap();
    for j in 0..6 {
        assert!(
            (beta_mc[j] - beta[j]).abs() <= 3.0 * offset.std_error[j],
            "j={j}: {} vs {} (se {})",
            beta_mc[j],
            beta[j],
            offset.std_error[j]
        );
    }
}

#[test]
fn dropout_score_vanishes_as_masks_grow() {
    let x = normal_matrix::<f64>(15, 0, 40, 6);
    let y = &x * normal_vec::<f64>(15, 1, 6) + normal_vec::<f64>(15, 2, 40);
    let d = Dataset::new(x, y).unwrap();
    let spec = DropoutSpec::for_data(&d, 0.4).unwrap();
    let beta = dropout_closed_form(&d, &spec).unwrap().coefficients;
    let norms: Vec<f64> = [1_000, 10_000, 100_000]
        .iter()
        .map(|&m| ridgekit::augment::dropout_score_check(&d, &spec, &beta, m, 9).unwrap().mean.norm())
        .collect();
    assert!(norms.windows(2).all(|w| w[1] < w[0]), "{norms:?}");
}
