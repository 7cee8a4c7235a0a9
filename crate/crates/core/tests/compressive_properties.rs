use cpi_core::compressive::dct::dct_matrix;
use cpi_core::compressive::lasso::solve;
use cpi_core::compressive::{
    build_cs_problem, cross_validate_lambda, lambda_grid, lambda_max, lasso_cd, soft_threshold,
    CsOptions, CsProblem, Dct2, DctSystem, LassoOptions, RowMode,
};
use cpi_core::rng::{keyed_rng, Domain};
use cpi_core::scene::{Mask, MaskGrid};
use cpi_core::{
    generate_speckle, propagate_frame, FramePairStream, ObjectGrid, ObjectScene, OpticalConfig,
    Point2, PropagationPlan, SensorSpec, SpeckleGrid, StreamMeta,
};
use proptest::prelude::*;
use rand::Rng;
use rand_distr::StandardNormal;

fn grid(w: usize, h: usize) -> ObjectGrid {
    ObjectGrid {
        width: w,
        height: h,
        pitch: 1.0,
        center: Point2::default(),
    }
}

fn gaussian(n: usize, seed: u64, stream: u64) -> Vec<f64> {
    let mut rng = keyed_rng(seed, Domain::Synthetic, stream);
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

/// Explicit `Psi` (inverse 2D DCT) as a dense `p x p` matrix, column `k`
/// holding basis image `k`, built from the 1D formula.
fn psi(w: usize, h: usize) -> Vec<f64> {
    let basis = |k: usize, i: usize, n: usize| {
        let a = if k == 0 {
            (1.0 / n as f64).sqrt()
        } else {
            (2.0 / n as f64).sqrt()
        };
        a * (std::f64::consts::PI * (i as f64 + 0.5) * k as f64 / n as f64).cos()
    };
    let p = w * h;
    let mut m = vec![0.0; p * p];
    for ky in 0..h {
        for kx in 0..w {
            for y in 0..h {
                for x in 0..w {
                    m[(y * w + x) * p + ky * w + kx] = basis(kx, x, w) * basis(ky, y, h);
                }
            }
        }
    }
    m
}

fn matmul(a: &[f64], b: &[f64], n: usize, k: usize, m: usize) -> Vec<f64> {
    let mut out = vec![0.0; n * m];
    for r in 0..n {
        for j in 0..k {
            let v = a[r * k + j];
            for c in 0..m {
                out[r * m + c] += v * b[j * m + c];
            }
        }
    }
    out
}

fn dense(y: &[f64], phi: &[f64], w: usize, h: usize) -> CsProblem {
    CsProblem::from_rows(grid(w, h), y.to_vec(), phi.to_vec()).unwrap()
}

#[test]
fn dct_matches_the_cosine_sum() {
    let (w, h) = (5, 3);
    let x = gaussian(w * h, 1, 0);
    let c = Dct2::new(w, h).forward(&x);
    let m = psi(w, h);
    // forward = Psi^T x
    for k in 0..w * h {
        let e: f64 = (0..w * h).map(|i| m[i * w * h + k] * x[i]).sum();
        assert!((c[k] - e).abs() < 1e-12);
    }
    let d = dct_matrix(4);
    for a in 0..4 {
        for b in 0..4 {
            let dot: f64 = (0..4).map(|i| d[a * 4 + i] * d[b * 4 + i]).sum();
            assert!((dot - (a == b) as u8 as f64).abs() < 1e-12);
        }
    }
}

proptest! {
    #[test]
    fn dct_is_orthonormal(w in 1usize..10, h in 1usize..10, seed in any::<u64>()) {
        let d = Dct2::new(w, h);
        let c = gaussian(w * h, seed, 0);
        let x = d.inverse(&c);
        let n1: f64 = c.iter().map(|v| v * v).sum::<f64>().sqrt();
        let n2: f64 = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        prop_assert!((n1 - n2).abs() <= 1e-10 * n1.max(1.0));
        for (a, b) in d.forward(&x).iter().zip(&c) {
            prop_assert!((a - b).abs() <= 1e-10);
        }
    }

    #[test]
    fn soft_threshold_is_the_prox(z in -5.0f64..5.0, t in 0.0f64..3.0) {
        let f = |x: f64| 0.5 * (x - z) * (x - z) + t * x.abs();
        let s = soft_threshold(z, t);
        for k in -200..=200 {
            let x = s + k as f64 * 1e-2;
            prop_assert!(f(s) <= f(x) + 1e-12);
        }
    }

    #[test]
    fn objective_never_increases(seed in any::<u64>(), frac in 0.001f64..0.5) {
        let (w, h, m) = (4, 4, 12);
        let phi = gaussian(m * w * h, seed, 0);
        let y = gaussian(m, seed, 1);
        let p = dense(&y, &phi, w, h);
        let lmax = lambda_max(&p).unwrap();
        let fit = lasso_cd(&p, frac * lmax, &LassoOptions::default()).unwrap().fit;
        for pair in fit.objective.windows(2) {
            prop_assert!(pair[1] <= pair[0] * (1.0 + 1e-12) + 1e-15, "{:?}", pair);
        }
    }
}

#[test]
fn zero_penalty_on_a_square_system_is_least_squares() {
    let (w, h) = (3, 3);
    let p = w * h;
    let phi = gaussian(p * p, 7, 0);
    let y = gaussian(p, 7, 1);
    let problem = dense(&y, &phi, w, h);
    let opts = LassoOptions {
        tol: 1e-14,
        max_sweeps: 200_000,
    };
    let sol = lasso_cd(&problem, 0.0, &opts).unwrap();
    // Residual is orthogonal to the row space: Phi^T r = 0.
    let fit = matmul(&phi, &sol.image, p, p, 1);
    let r: Vec<f64> = y.iter().zip(&fit).map(|(a, b)| a - b).collect();
    for c in 0..p {
        let g: f64 = (0..p).map(|k| phi[k * p + c] * r[k]).sum();
        assert!(g.abs() < 1e-8, "column {c}: {g}");
    }
}

#[test]
fn lambda_max_matches_scaled_correlations_and_zeroes_the_solution() {
    let (w, h, m) = (4, 4, 10);
    let p = w * h;
    let phi = gaussian(m * p, 3, 0);
    let y = gaussian(m, 3, 1);
    let problem = dense(&y, &phi, w, h);
    let z = matmul(&phi, &psi(w, h), m, p, p);
    let mut oracle = 0.0f64;
    for c in 0..p {
        let norm: f64 = (0..m)
            .map(|r| z[r * p + c] * z[r * p + c])
            .sum::<f64>()
            .sqrt();
        let dot: f64 = (0..m).map(|r| z[r * p + c] * y[r]).sum();
        oracle = oracle.max(dot.abs() / norm / m as f64);
    }
    let lmax = lambda_max(&problem).unwrap();
    assert!((lmax - oracle).abs() < 1e-10 * oracle);

    for f in [1.0, 1.5, 10.0] {
        let sol = lasso_cd(&problem, f * lmax, &LassoOptions::default()).unwrap();
        assert!(sol.fit.coefficients.iter().all(|&c| c == 0.0));
        assert!(sol.image.iter().all(|&v| v == 0.0));
    }
    let sol = lasso_cd(&problem, 0.95 * lmax, &LassoOptions::default()).unwrap();
    assert!(sol.fit.coefficients.iter().any(|&c| c != 0.0));
}

#[test]
fn five_sparse_signal_is_recovered() {
    let (w, h, m) = (8, 8, 40);
    let p = w * h;
    for seed in 0..5u64 {
        let mut rng = keyed_rng(seed, Domain::Synthetic, 99);
        let mut support: Vec<usize> = Vec::new();
        while support.len() < 5 {
            let k = rng.random_range(0..p);
            if !support.contains(&k) {
                support.push(k);
            }
        }
        support.sort();
        let mut c = vec![0.0; p];
        for &k in &support {
            let mag: f64 = rng.random_range(1.0..2.0);
            c[k] = if rng.random_bool(0.5) { mag } else { -mag };
        }
        let x = Dct2::new(w, h).inverse(&c);
        let phi = gaussian(m * p, seed, 0);
        let y = matmul(&phi, &x, m, p, 1);
        let problem = dense(&y, &phi, w, h);
        let lmax = lambda_max(&problem).unwrap();
        let opts = LassoOptions {
            tol: 1e-9,
            max_sweeps: 20_000,
        };
        let fit = lasso_cd(&problem, 1e-3 * lmax, &opts).unwrap().fit;
        // Off-support coefficients of a converged fit stay far below the
        // signal but are not always exactly zero.
        let peak = fit.coefficients.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let found: Vec<usize> = (0..p)
            .filter(|&k| fit.coefficients[k].abs() > 0.05 * peak)
            .collect();
        assert_eq!(found, support, "seed {seed}");
        assert!(fit.converged);
        for &k in &support {
            assert!(
                (fit.coefficients[k] - c[k]).abs() <= 0.1 * c[k].abs(),
                "seed {seed} coef {k}"
            );
        }
    }
}

#[test]
fn single_value_grid_and_leave_one_out() {
    let (w, h, m) = (3, 3, 12);
    let phi = gaussian(m * w * h, 4, 0);
    let y = gaussian(m, 4, 1);
    let problem = dense(&y, &phi, w, h);
    let opts = LassoOptions::default();
    let res = cross_validate_lambda(&problem, 3, &[0.25], 0, &opts).unwrap();
    assert_eq!(res.lambda, 0.25);
    let lmax = lambda_max(&problem).unwrap();
    let grid = lambda_grid(lmax, 5, 1e-2);
    assert!(cross_validate_lambda(&problem, m, &grid, 0, &opts).is_ok());
    assert!(cross_validate_lambda(&problem, m + 1, &grid, 0, &opts).is_err());
    assert!(cross_validate_lambda(&problem, 1, &grid, 0, &opts).is_err());
    assert!(cross_validate_lambda(&problem, 3, &[], 0, &opts).is_err());
    assert!(cross_validate_lambda(&problem, 3, &[0.0], 0, &opts).is_err());
    let again = cross_validate_lambda(&problem, m, &grid, 0, &opts).unwrap();
    assert_eq!(
        again,
        cross_validate_lambda(&problem, m, &grid, 0, &opts).unwrap()
    );
}

#[test]
fn pure_noise_selects_the_largest_penalty() {
    let (w, h, m) = (4, 4, 200);
    let opts = LassoOptions::default();
    let mut hits = 0;
    for seed in 0..40u64 {
        let phi = gaussian(m * w * h, seed, 0);
        let y = gaussian(m, seed, 1);
        let problem = dense(&y, &phi, w, h);
        let grid = lambda_grid(lambda_max(&problem).unwrap(), 20, 1e-3);
        let res = cross_validate_lambda(&problem, 5, &grid, seed, &opts).unwrap();
        let pos = grid.iter().position(|&l| l == res.lambda).unwrap();
        assert!(pos < 10, "seed {seed} picked grid point {pos}");
        hits += (pos == 0) as usize;
    }
    assert!(hits >= 24, "largest penalty chosen in {hits}/40 runs");
}

#[test]
fn lambda_grid_is_log_spaced() {
    let g = lambda_grid(2.0, 20, 1e-3);
    assert_eq!(g.len(), 20);
    assert!((g[0] - 2.0).abs() < 1e-12 && (g[19] - 2e-3).abs() < 1e-12);
    for pair in g.windows(3) {
        assert!((pair[0] / pair[1] - pair[1] / pair[2]).abs() < 1e-9);
    }
}

/// Frames of a geometry where every `(rho_a, sigma)` pair maps onto a node
/// of a 7x7 object grid of pitch 10 and `sigma` sits on sensor-B pixel
/// centres, so the assembled rows are exact.
fn exact_toy() -> (OpticalConfig, ObjectScene, ObjectGrid, SpeckleGrid) {
    let cfg = OpticalConfig {
        focused_distance: 100.0,
        magnification: -2.0,
        lens_magnification: 1.0,
        n_paths: 1,
        sensor_a: SensorSpec::new(4, 4, 10.0),
        sensor_b: SensorSpec::new(4, 4, 10.0),
    };
    let og = ObjectGrid {
        width: 7,
        height: 7,
        pitch: 10.0,
        center: Point2::default(),
    };
    let mut rng = keyed_rng(11, Domain::Synthetic, 0);
    let values: Vec<f64> = (0..49).map(|_| rng.random_range(0.0..1.0)).collect();
    let mg = MaskGrid {
        width: 7,
        height: 7,
        pitch: 10.0,
        center: Point2::default(),
    };
    let scene = ObjectScene::single(Mask::new(200.0, mg, values, true).unwrap());
    (cfg, scene, og, SpeckleGrid::new(4, 4, 10.0))
}

fn simulate(
    cfg: &OpticalConfig,
    scene: &ObjectScene,
    sg: SpeckleGrid,
    sigma_c: f64,
    n: u64,
) -> FramePairStream {
    let plan = PropagationPlan::new(cfg, scene, sg).unwrap();
    let pairs = (0..n)
        .map(|k| {
            let sp = generate_speckle(21, k, sg, sigma_c, 1.0).unwrap();
            propagate_frame(&sp, scene, cfg, &plan).unwrap()
        })
        .collect();
    FramePairStream::new(StreamMeta::default(), pairs).unwrap()
}

#[test]
fn toy_rows_reproduce_the_forward_model() {
    let (cfg, scene, og, sg) = exact_toy();
    let stream = simulate(&cfg, &scene, sg, 10.0, 12);
    let problem = build_cs_problem(&stream, &cfg, 200.0, &og, &CsOptions::default()).unwrap();
    assert_eq!(problem.mode(), RowMode::Plenoptic);
    assert_eq!(problem.rows(), 12 * 16);
    let (y, phi) = problem.materialize();
    let x = scene.masks()[0].values().to_vec();
    let fit = matmul(&phi, &x, y.len(), 49, 1);
    let scale = y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for (a, b) in y.iter().zip(&fit) {
        assert!((a - b).abs() <= 1e-5 * scale, "{a} vs {b}");
    }
}

#[test]
fn transparent_object_leaves_a_small_residual() {
    let cfg = OpticalConfig {
        focused_distance: 100.0,
        magnification: -1.0,
        lens_magnification: 1.0,
        n_paths: 1,
        sensor_a: SensorSpec::new(16, 16, 4.0),
        sensor_b: SensorSpec::new(8, 8, 12.0),
    };
    let mg = MaskGrid {
        width: 64,
        height: 64,
        pitch: 4.0,
        center: Point2::default(),
    };
    let scene = ObjectScene::single(Mask::new(125.0, mg, vec![1.0; 64 * 64], false).unwrap());
    let sg = SpeckleGrid::new(32, 32, 3.0);
    let stream = simulate(&cfg, &scene, sg, 8.0, 20);
    let og = ObjectGrid {
        width: 56,
        height: 56,
        pitch: 2.0,
        center: Point2::default(),
    };
    let problem = build_cs_problem(&stream, &cfg, 125.0, &og, &CsOptions { stride: 2 }).unwrap();
    let (y, phi) = problem.materialize();
    let fit = matmul(&phi, &vec![1.0; og.cells()], y.len(), og.cells(), 1);
    // Rows are centred per frame, so a flat object is in the null space:
    // both y and Phi 1 vanish up to sampling error, measured against the
    // size of the individual row terms.
    let p = og.cells();
    let scale: f64 = (0..y.len())
        .map(|r| phi[r * p..(r + 1) * p].iter().map(|v| v.abs()).sum::<f64>())
        .sum::<f64>()
        / y.len() as f64;
    let res: f64 = (y
        .iter()
        .zip(&fit)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / y.len() as f64)
        .sqrt();
    assert!(scale > 0.0);
    assert!(res < 0.05 * scale, "residual {res} vs row scale {scale}");
}

#[test]
fn focused_plane_falls_back_to_bucket_rows() {
    let (cfg, scene, og, sg) = exact_toy();
    let stream = simulate(&cfg, &scene, sg, 10.0, 6);
    let problem = build_cs_problem(&stream, &cfg, 100.0, &og, &CsOptions::default()).unwrap();
    assert_eq!(problem.mode(), RowMode::Bucket);
    assert_eq!(problem.rows(), 6);
    assert!(build_cs_problem(
        &FramePairStream::default(),
        &cfg,
        100.0,
        &og,
        &CsOptions::default()
    )
    .is_err());
    assert!(build_cs_problem(&stream, &cfg, 100.0, &og, &CsOptions { stride: 0 }).is_err());
    assert!(build_cs_problem(&stream, &cfg, -1.0, &og, &CsOptions::default()).is_err());
}

#[test]
fn dct_system_rejects_size_mismatch() {
    let problem = dense(&[1.0, 2.0], &gaussian(8, 0, 0), 2, 2);
    let sys = problem.normal_system();
    assert!(DctSystem::new(&sys, &Dct2::new(3, 3)).is_err());
    let ok = DctSystem::new(&sys, &Dct2::new(2, 2)).unwrap();
    assert!(solve(&ok, -1.0, &LassoOptions::default(), None).is_err());
    assert!(solve(&ok, f64::NAN, &LassoOptions::default(), None).is_err());
}
