use cpi_core::{generate_speckle, speckle_covariance_kernel, Error, SpeckleGrid};

const N: usize = 256;

fn fields(seed: u64, count: u64, sigma_c: f64) -> Vec<Vec<f64>> {
    let grid = SpeckleGrid::new(N, N, 1.0);
    (0..count)
        .map(|k| {
            generate_speckle(seed, k, grid, sigma_c, 2.5)
                .unwrap()
                .intensity()
                .to_vec()
        })
        .collect()
}

/// Normalised intensity covariance at lag `dx` along x, periodic.
fn autocovariance(fields: &[Vec<f64>], dx: usize) -> f64 {
    let mut acc = 0.0;
    let mut n = 0usize;
    for f in fields {
        let m = f.iter().sum::<f64>() / f.len() as f64;
        for j in 0..N {
            for i in 0..N {
                let a = f[j * N + i] - m;
                let b = f[j * N + (i + dx) % N] - m;
                acc += a * b / (m * m);
                n += 1;
            }
        }
    }
    acc / n as f64
}

#[test]
fn contrast_is_one_over_a_million_cells() {
    let fs = fields(11, 16, 2.0);
    let all: Vec<f64> = fs.concat();
    assert!(all.len() >= 1_000_000);
    let mean = all.iter().sum::<f64>() / all.len() as f64;
    let var = all.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / all.len() as f64;
    let contrast = var.sqrt() / mean;
    assert!((contrast - 1.0).abs() <= 0.05, "contrast {contrast}");
}

#[test]
fn intensity_follows_the_negative_exponential_law() {
    let all: Vec<f64> = fields(12, 16, 2.0).concat();
    let mean = all.iter().sum::<f64>() / all.len() as f64;
    for t in [0.5, 1.0, 2.0, 3.0] {
        let frac = all.iter().filter(|&&v| v > t * mean).count() as f64 / all.len() as f64;
        let expect = (-t).exp();
        assert!(
            (frac - expect).abs() < 0.02,
            "P(I > {t}<I>) = {frac}, law gives {expect}"
        );
    }
}

#[test]
fn autocorrelation_half_width_is_sigma_c_sqrt2() {
    let sigma_c = 3.0;
    let fs = fields(13, 16, sigma_c);
    let c: Vec<f64> = (0..12).map(|d| autocovariance(&fs, d)).collect();
    let target = (-1.0f64).exp();
    let k = c
        .iter()
        .position(|&v| v < target)
        .expect("covariance decays");
    // log-linear interpolation between the bracketing lags
    let (l0, l1) = (c[k - 1].ln(), c[k].ln());
    let width = (k - 1) as f64 + (l0 - target.ln()) / (l0 - l1);
    let expect = sigma_c * 2f64.sqrt();
    assert!(
        (width - expect).abs() <= 0.1 * expect,
        "half-width {width}, expected {expect}"
    );
}

#[test]
fn covariance_kernel_matches_generated_fields() {
    let sigma_c = 3.0;
    let fs = fields(14, 16, sigma_c);
    let kernel = speckle_covariance_kernel(sigma_c);
    for d in [0usize, 2, 4, 6, 9] {
        let emp = autocovariance(&fs, d);
        let k = kernel.eval(d as f64, 0.0);
        assert!(
            (emp - k).abs() < 0.06,
            "lag {d}: empirical {emp}, kernel {k}"
        );
    }
    assert_eq!(kernel.eval(0.0, 0.0), 1.0);
    assert!(kernel.eval(1e4, 0.0) < 1e-12);
    let e = kernel.eval(sigma_c * 2f64.sqrt(), 0.0);
    assert!((e - (-1.0f64).exp()).abs() < 1e-12);
}

#[test]
fn distinct_frames_are_uncorrelated() {
    let grid = SpeckleGrid::new(64, 64, 1.0);
    let covs: Vec<f64> = (0..64u64)
        .map(|k| {
            let a = generate_speckle(21, 2 * k, grid, 2.0, 1.0).unwrap();
            let b = generate_speckle(21, 2 * k + 1, grid, 2.0, 1.0).unwrap();
            let (ia, ib) = (a.intensity(), b.intensity());
            let (ma, mb) = (
                ia.iter().sum::<f64>() / 4096.0,
                ib.iter().sum::<f64>() / 4096.0,
            );
            ia.iter()
                .zip(ib)
                .map(|(x, y)| (x - ma) * (y - mb))
                .sum::<f64>()
                / 4096.0
        })
        .collect();
    let n = covs.len() as f64;
    let mean = covs.iter().sum::<f64>() / n;
    let se = (covs.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt() / n.sqrt();
    assert!(
        mean.abs() <= 3.0 * se,
        "mean covariance {mean}, standard error {se}"
    );
}

#[test]
fn mean_is_stationary_across_the_grid() {
    let fs = fields(15, 16, 2.0);
    let (mut left, mut right) = (0.0, 0.0);
    for f in &fs {
        for j in 0..N {
            left += f[j * N..j * N + N / 2].iter().sum::<f64>();
            right += f[j * N + N / 2..(j + 1) * N].iter().sum::<f64>();
        }
    }
    assert!(
        (left / right - 1.0).abs() < 0.03,
        "left/right = {}",
        left / right
    );
}

#[test]
fn fields_are_deterministic_and_scaled() {
    let grid = SpeckleGrid::new(128, 128, 5.0);
    let a = generate_speckle(3, 7, grid, 10.0, 4.0).unwrap();
    let b = generate_speckle(3, 7, grid, 10.0, 4.0).unwrap();
    let c = generate_speckle(3, 8, grid, 10.0, 4.0).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.intensity(), c.intensity());
    // The ensemble mean is the requested one; single frames fluctuate.
    let means: Vec<f64> = (0..64)
        .map(|k| {
            generate_speckle(3, k, grid, 10.0, 4.0)
                .unwrap()
                .intensity()
                .iter()
                .sum::<f64>()
                / grid.cells() as f64
        })
        .collect();
    let mean = means.iter().sum::<f64>() / means.len() as f64;
    assert!((mean - 4.0).abs() < 0.04, "ensemble mean {mean}");
    let spread = means.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / means.len() as f64;
    assert!(spread > 0.0);
    for (z, i) in a.amplitude().iter().zip(a.intensity()) {
        assert!((z.norm_sqr() - i).abs() <= 1e-9 * i.max(1.0));
    }
}

#[test]
fn undersampled_speckle_is_rejected() {
    let grid = SpeckleGrid::new(16, 16, 5.0);
    assert!(matches!(
        generate_speckle(0, 0, grid, 4.0, 1.0),
        Err(Error::Undersampled { .. })
    ));
    assert!(generate_speckle(0, 0, grid, 5.0, 0.0).is_err());
}
