mod common;

use ldm_depth::estimation::{estimate_psi, reconstruct, LambdaPool, Shape};
use ldm_depth::simulation::generators::{draw_breakpoints, gen_h_setting1, gen_psi_setting1, iterate_breakpoints};
use ldm_depth::simulation::rng::Substreams;
use ldm_depth::simulation::{metrics, simulate, SimConfig};
use ldm_depth::whyra::{whyra, Correlation};
use ldm_depth::{fit_ldm, Curve, EstimationConfig, Grid, MultiSample, Sampled, WarpingCurve};
use rand::Rng;
use rand_distr::{Distribution, Normal};

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (v / n).sqrt())
}

fn ise(grid: &Grid, a: &[f64], b: &[f64]) -> f64 {
    let sq: Vec<f64> = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).collect();
    grid.integrate(&sq)
}

fn is_valid_warp(w: &WarpingCurve) -> bool {
    let y = w.values();
    y[0] == 0.0 && y[y.len() - 1] == 1.0 && y.windows(2).all(|p| p[1] > p[0])
}

#[test]
fn pattern_error_shrinks_with_sample_size() {
    let g = Grid::unit(101).unwrap();
    let gamma = |t: f64| (1.0 + t + t * t) / 3.0;
    let truth = Curve::from_fn(&g, gamma).unwrap();
    let normal = Normal::new(0.0, 1.0).unwrap();
    let mut err = Vec::new();
    for n in [10usize, 50, 200] {
        let mut e = Vec::new();
        for rep in 0..40u64 {
            let mut rng = common::rng(1000 * n as u64 + rep);
            let rows: Vec<Vec<Curve>> = (0..n)
                .map(|_| {
                    let w: f64 = normal.sample(&mut rng);
                    let h = |t: f64| if w == 0.0 { t } else { (t * w.exp_m1()).ln_1p() / w };
                    vec![Curve::from_fn(&g, |t| gamma(h(t))).unwrap()]
                })
                .collect();
            let x = MultiSample::new(rows).unwrap();
            let est = fit_ldm(&x, &EstimationConfig::default()).unwrap();
            e.push(ise(&g, est.gamma_hat[0].values(), truth.values()));
        }
        err.push(mean_se(&e).0);
    }
    assert!(err[0] > err[1] && err[1] > err[2], "{err:?}");
    assert!(err[1] < 1e-3, "{err:?}");
}

#[test]
fn pooled_amplitude_beats_random_selection() {
    let (mut pooled, mut random) = (Vec::new(), Vec::new());
    for seed in 0..50 {
        let cfg = SimConfig {
            sigma_w: 1.0,
            seed,
            ..SimConfig::default()
        };
        let (x, truth) = simulate(&cfg).unwrap();
        let est = EstimationConfig {
            seed,
            ..Default::default()
        };
        let a = fit_ldm(&x, &est).unwrap();
        let b = fit_ldm(
            &x,
            &EstimationConfig {
                lambda_pool: LambdaPool::RandomPerIndividual,
                ..est
            },
        )
        .unwrap();
        for e in [&a, &b] {
            assert!(e.lambda_index.0 < x.n() && e.lambda_index.1 < x.p());
        }
        pooled.push(metrics(&a, &truth, &x).unwrap().lise);
        random.push(metrics(&b, &truth, &x).unwrap().lise);
    }
    let (p, r) = (mean_se(&pooled).0, mean_se(&random).0);
    assert!(p <= r, "pooled {p} random {r}");
}

#[test]
fn exponential_warps_have_identity_mean_inverse_at_midpoint() {
    let draws = 10_000;
    for sigma in [0.5, 1.0, 2.0] {
        let warps = gen_h_setting1(sigma, draws, &Substreams::new(7)).unwrap();
        let v: Vec<f64> = warps.iter().map(|w| w.eval_inverse(0.5).unwrap()).collect();
        let (m, se) = mean_se(&v);
        assert!((m - 0.5).abs() <= 3.0 * se, "sigma {sigma}: {m} +- {se}");
    }
}

#[test]
fn iterated_warps_have_identity_mean_inverse() {
    let draws = 10_000;
    let ts = [0.1, 0.25, 0.5, 0.75, 0.9];
    let mut rng = common::rng(11);
    let mut sums = vec![Vec::with_capacity(draws); ts.len()];
    for _ in 0..draws {
        let b = draw_breakpoints(0.005, 2500, &mut rng);
        for (k, &t) in ts.iter().enumerate() {
            sums[k].push(iterate_breakpoints(&b, t));
        }
    }
    for (k, &t) in ts.iter().enumerate() {
        let (m, se) = mean_se(&sums[k]);
        assert!((m - t).abs() <= 3.0 * se, "t {t}: {m} +- {se}");
    }
}

#[test]
fn whyra_agreement_drops_with_nuisance_warping() {
    let avg = |sigma_d: f64| {
        let v: Vec<f64> = (0..10)
            .map(|seed| {
                let cfg = SimConfig {
                    sigma_w: 1.0,
                    sigma_d,
                    seed,
                    ..SimConfig::default()
                };
                let (x, _) = simulate(&cfg).unwrap();
                let est = fit_ldm(&x, &EstimationConfig::default()).unwrap();
                whyra(&est.h_hat_componentwise, Correlation::Pearson).unwrap().avg_correlation
            })
            .collect();
        mean_se(&v).0
    };
    let (clean, noisy) = (avg(0.0), avg(1.0));
    assert!(clean > noisy, "{clean} vs {noisy}");
    assert!(clean > 0.9, "{clean}");
}

#[test]
fn unwarped_panel_gives_identity_warps() {
    let cfg = SimConfig {
        n: 20,
        sigma_w: 0.0,
        ..SimConfig::default()
    };
    let (x, _) = simulate(&cfg).unwrap();
    let est = fit_ldm(&x, &EstimationConfig::default()).unwrap();
    let id = WarpingCurve::identity(x.grid());
    for h in &est.h_hat {
        assert!(h.sup_distance(&id) <= 5e-3);
    }
}

#[test]
fn equal_pattern_and_amplitude_give_identity_distortion() {
    let g = Grid::unit(101).unwrap();
    let id = WarpingCurve::identity(&g);
    let lambda = ldm_depth::simulation::generators::gen_lambda(&g).unwrap().sup_normalize().unwrap();
    let psi = estimate_psi(&lambda, &[lambda.clone()], Shape::Monotonized).unwrap();
    assert!(psi[0].sup_distance(&id) <= 5e-3);
}

#[test]
fn distortions_are_recovered_from_exact_patterns() {
    let g = Grid::unit(101).unwrap();
    let truth = gen_psi_setting1(&g).unwrap();
    let cases: [(fn(f64) -> f64, Shape); 2] = [
        (|t| 1.0 + t + t * t, Shape::Increasing),
        (ldm_depth::simulation::generators::lambda0, Shape::Monotonized),
    ];
    for (lambda, shape) in cases {
        let l = Curve::from_fn(&g, lambda).unwrap();
        let gammas: Vec<Curve> = truth
            .iter()
            .map(|w| Curve::from_fn(&g, |t| lambda(w.eval(t))).unwrap())
            .collect();
        let psi = estimate_psi(&l, &gammas, shape).unwrap();
        for (est, w) in psi.iter().zip(&truth) {
            assert!(is_valid_warp(est));
            assert!(est.sup_distance(&w.sample(&g).unwrap()) <= 1e-2);
        }
    }
}

#[test]
fn exact_patterns_reconstruct_observations() {
    for seed in 0..10 {
        let cfg = SimConfig {
            sigma_w: 0.5,
            seed,
            ..SimConfig::default()
        };
        let (x, truth) = simulate(&cfg).unwrap();
        let gamma: Vec<Curve> = truth.gamma.iter().map(|g| g.sup_normalize().unwrap()).collect();
        let xhat = reconstruct(&gamma, &truth.h).unwrap();
        for i in 0..x.n() {
            for j in 0..x.p() {
                let observed = x.get(i, j).sup_normalize().unwrap();
                assert!(xhat[i][j].sup_distance(&observed) <= 1e-2, "seed {seed} ({i}, {j})");
            }
        }
    }
}

#[test]
fn fitted_warps_reconstruct_observations() {
    for seed in 0..20 {
        let cfg = SimConfig {
            sigma_w: 0.5,
            seed,
            ..SimConfig::default()
        };
        let (x, _) = simulate(&cfg).unwrap();
        let est = fit_ldm(&x, &EstimationConfig::default()).unwrap();
        for i in 0..x.n() {
            for j in 0..x.p() {
                let observed = x.get(i, j).sup_normalize().unwrap();
                let c = est.gamma_hat[j].compose(&est.h_hat_componentwise[i][j]).unwrap();
                assert!(c.sup_distance(&observed) <= 1e-2, "seed {seed} ({i}, {j})");
            }
        }
    }
}

#[test]
fn single_component_reconstruction_is_exact_up_to_interpolation() {
    for seed in 0..20 {
        let cfg = SimConfig {
            p: 1,
            psi_setting: 2,
            sigma_w: 0.5,
            m_iter: 500,
            seed,
            ..SimConfig::default()
        };
        let (x, _) = simulate(&cfg).unwrap();
        let est = fit_ldm(&x, &EstimationConfig::default()).unwrap();
        for i in 0..x.n() {
            assert_eq!(est.h_hat[i], est.h_hat_componentwise[i][0]);
            let observed = x.get(i, 0).sup_normalize().unwrap();
            assert!(est.x_hat[i][0].sup_distance(&observed) <= 1e-2, "seed {seed} {i}");
        }
    }
}

#[test]
fn model_conforming_smoke_run() {
    let mut rng = common::rng(5);
    for seed in 0..5 {
        let cfg = SimConfig {
            sigma_w: rng.random_range(0.2..1.5),
            sigma_d: rng.random_range(0.0..1.0),
            sigma_e: 0.01,
            seed,
            ..SimConfig::default()
        };
        let (x, truth) = simulate(&cfg).unwrap();
        let est = fit_ldm(&x, &EstimationConfig::default()).unwrap();
        assert!(est.psi_hat.iter().chain(&est.h_hat).all(is_valid_warp));
        assert!(est.h_hat_componentwise.iter().flatten().all(is_valid_warp));
        let m = metrics(&est, &truth, &x).unwrap();
        assert!(m.lise.is_finite() && m.hmise.is_finite() && m.xmise.is_finite());
    }
}
