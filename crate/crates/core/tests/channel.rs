use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sim_uplink::channel::*;
use sim_uplink::geometry::square_grid;
use sim_uplink::{CMatrix, Error};

fn budget(area: f64, efficiency: f64) -> NoiseBudget {
    NoiseBudget {
        antenna_noise: 1e-14,
        rf_noise: 1e-12,
        transmit_flux: 0.1,
        effective_area: area,
        transmission_efficiency: 0.7,
        element_efficiency: efficiency,
    }
}

/// Sample covariance of column `k` against `beta * A_eff * Sigma`, on the
/// entries whose correlation magnitude exceeds 0.1. The masked entries must
/// agree to 5% in relative Frobenius norm, and every single entry must lie
/// within five standard errors (the sample mean of `x_i conj(x_j)` for a
/// circular Gaussian has variance `Sigma_ii Sigma_jj / draws`).
#[test]
fn column_covariance_matches_kronecker_law() {
    let lam = 0.1;
    let positions = square_grid(4, lam / 4.0, 0.0);
    let corr = build_correlation(&positions, lam).unwrap();
    let beta = [0.25, 0.04];
    let noise = budget(0.0025, 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let draws = 10_000;
    let n = corr.dim();
    let mut acc = [CMatrix::zeros(n, n), CMatrix::zeros(n, n)];
    for _ in 0..draws {
        let ch = build_channel(&corr, &beta, &noise, &mut rng).unwrap();
        for (k, a) in acc.iter_mut().enumerate() {
            let col = ch.h.column(k);
            *a += col * col.adjoint();
        }
    }
    for (k, a) in acc.iter().enumerate() {
        let scale = beta[k] * 0.0025;
        let (mut err, mut norm) = (0.0, 0.0);
        for i in 0..n {
            for j in 0..n {
                let sigma = corr.sigma[(i, j)];
                if sigma.abs() > 0.1 {
                    let sample = a[(i, j)] / (draws as f64 * scale);
                    err += (sample - sigma).norm_sqr();
                    norm += sigma * sigma;
                    let se = (corr.sigma[(i, i)] * corr.sigma[(j, j)] / draws as f64).sqrt();
                    assert!((sample - sigma).norm() <= 5.0 * se, "k={k} ({i},{j}) {sample} vs {sigma}");
                }
            }
        }
        let rel = (err / norm).sqrt();
        assert!(rel <= 0.05, "k={k}: relative error {rel}");
    }
}

#[test]
fn identity_correlation_power_example() {
    let corr = CorrelationModel::identity(3);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut power = 0.0;
    let draws = 20_000;
    for _ in 0..draws {
        let ch = build_channel(&corr, &[0.25], &budget(0.0025, 1.0), &mut rng).unwrap();
        power += ch.h.iter().map(Complex64::norm_sqr).sum::<f64>() / 3.0;
    }
    let mean = power / draws as f64;
    assert!((mean / 6.25e-4 - 1.0).abs() < 0.02, "{mean}");
}

#[test]
fn element_efficiency_scales_power_only() {
    let corr = CorrelationModel::identity(4);
    let a = build_channel(&corr, &[1.0], &budget(1.0, 1.0), &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
    let b = build_channel(&corr, &[1.0], &budget(1.0, 0.9), &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
    for (x, y) in a.h.iter().zip(b.h.iter()) {
        assert!((y - x * 0.9f64.sqrt()).norm() < 1e-15);
    }
}

#[test]
fn factor_reconstructs_sinc_correlation() {
    let lam = 0.1;
    let corr = build_correlation(&square_grid(8, lam / 2.0, 0.0), lam).unwrap();
    let r = corr.reconstruct();
    for i in 0..corr.dim() {
        for j in 0..corr.dim() {
            assert!((r[(i, j)] - corr.sigma[(i, j)]).norm() < 1e-10);
        }
    }
    // lower triangular factor
    assert!(corr.factor[(0, 5)].norm() == 0.0);
}

#[test]
fn indefinite_input_is_clamped() {
    // eigenvalues 3 and -1
    let sigma = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
    let corr = CorrelationModel::from_matrix(sigma).unwrap();
    let r = corr.reconstruct();
    assert!(r.iter().all(|z| z.re.is_finite()));
    // projection onto the positive eigenvector: 1.5 * [[1,1],[1,1]]
    assert!((r[(0, 1)].re - 1.5).abs() < 1e-6);
}

#[test]
fn channel_file_round_trip_is_bit_exact() {
    let corr = build_correlation(&square_grid(3, 0.05, 0.0), 0.1).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let ensembles: Vec<_> = (0..4)
        .map(|i| {
            let mut ch = build_channel(&corr, &[1e-9, 3e-10], &budget(0.0025, 1.0), &mut rng).unwrap();
            ch.placement_id = i / 2;
            ch.realization_id = i % 2;
            ch
        })
        .collect();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("h.simchan");
    export_channels(&ensembles, &path).unwrap();
    let back = import_channels(&path, Some((9, 2))).unwrap();
    assert_eq!(back.len(), 4);
    for (a, b) in ensembles.iter().zip(&back) {
        assert_eq!(a.placement_id, b.placement_id);
        assert_eq!(a.realization_id, b.realization_id);
        for (x, y) in a.h.iter().zip(b.h.iter()) {
            assert_eq!(x.re.to_bits(), y.re.to_bits());
            assert_eq!(x.im.to_bits(), y.im.to_bits());
        }
        for (x, y) in a.beta.iter().zip(&b.beta) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }
    // rewriting the imported data yields the same bytes
    let again = dir.path().join("h2.simchan");
    export_channels(&back, &again).unwrap();
    assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&again).unwrap());

    assert!(matches!(import_channels(&path, Some((8, 2))), Err(Error::ChannelFormat { .. })));
}

#[test]
fn corrupt_channel_files_name_the_offset() {
    let mut bytes = Vec::new();
    write_channels(&mut bytes, &[]).unwrap();
    let mut bad = bytes.clone();
    bad[3] ^= 0xff;
    match read_channels(bad.as_slice()) {
        Err(Error::ChannelFormat { offset, .. }) => assert_eq!(offset, 3),
        other => panic!("expected format error, got {other:?}"),
    }
    let truncated = &bytes[..10];
    assert!(matches!(read_channels(truncated), Err(Error::ChannelFormat { .. })));
}
