use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sim_uplink::channel::{complex_normal, NoiseBudget};
use sim_uplink::combiner::*;
use sim_uplink::harness::gradcheck::RandomInstance;
use sim_uplink::metrics::{sinr, sinr_digital};
use sim_uplink::{CMatrix, Error};

fn noise() -> NoiseBudget {
    NoiseBudget {
        antenna_noise: 0.2,
        rf_noise: 0.4,
        transmit_flux: 1.0,
        effective_area: 1.0,
        transmission_efficiency: 0.7,
        element_efficiency: 1.0,
    }
}

#[test]
fn zf_on_orthonormal_columns() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let a = CMatrix::from_fn(6, 3, |_, _| complex_normal(&mut rng));
    let q = a.qr().q();
    let g = dpa_zf(&q).unwrap().g;
    let gh = &g * &q;
    for i in 0..3 {
        for j in 0..3 {
            let want = if i == j { 1.0 } else { 0.0 };
            assert!((gh[(i, j)] - Complex64::from(want)).norm() < 1e-12);
        }
        let row_norm: f64 = g.row(i).iter().map(Complex64::norm_sqr).sum::<f64>().sqrt();
        assert!((row_norm - 1.0).abs() < 1e-12);
    }
}

#[test]
fn zf_residual_on_random_channel() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let h = CMatrix::from_fn(64, 2, |_, _| complex_normal(&mut rng));
    let g = dpa_zf(&h).unwrap().g;
    let residual = &g * &h - CMatrix::identity(2, 2);
    assert!(residual.norm() < 1e-10);
}

#[test]
fn zf_rejects_rank_deficient_channel() {
    let col = CMatrix::from_fn(4, 1, |i, _| Complex64::new(i as f64 + 1.0, 0.5));
    let h = CMatrix::from_fn(4, 2, |i, _| col[(i, 0)]);
    match dpa_zf(&h) {
        Err(Error::RankDeficient { condition }) => assert!(condition > ZF_MAX_CONDITION),
        other => panic!("expected rank deficiency, got {other:?}"),
    }
}

#[test]
fn single_user_mrc_and_zf_agree_on_a_digital_array() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let h = CMatrix::from_fn(8, 1, |_, _| complex_normal(&mut rng) * 1e-7);
    let f = CMatrix::from_fn(8, 8, |i, j| if i >= j { complex_normal(&mut rng) * 0.2 + if i == j { 1.0 } else { 0.0 } } else { 0.0.into() });
    let a = sinr_digital(&dpa_mrc(&h).g, &h, &noise(), &f).unwrap();
    let b = sinr_digital(&dpa_zf(&h).unwrap().g, &h, &noise(), &f).unwrap();
    assert!((a.gamma[0] - b.gamma[0]).abs() <= 1e-10 * a.gamma[0]);
}

#[test]
fn combiner_norm_bound() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for layers in 1..=4 {
        let inst = RandomInstance::draw(layers, 6, 2, &mut rng).unwrap();
        let g = compose_sim(&inst.stack, &inst.phases, 0.7).unwrap().g;
        let bound = insertion_loss_factor(0.7, layers) * inst.stack.spectral_norms().iter().product::<f64>();
        assert!(g.singular_values().max() <= bound * (1.0 + 1e-12));
    }
}

#[test]
fn lower_transmission_efficiency_lowers_sinr() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let inst = RandomInstance::draw(3, 5, 2, &mut rng).unwrap();
    let rate = |t: f64| {
        let g = compose_sim(&inst.stack, &inst.phases, t).unwrap().g;
        sinr(&g, &inst.h, &inst.noise, &inst.factor).unwrap().gamma
    };
    let (hi, lo) = (rate(0.9), rate(0.6));
    assert!(hi.iter().zip(&lo).all(|(a, b)| a > b));
}

#[test]
fn matched_filter_leaves_nothing_to_compensate_for_real_positive_inputs() {
    let n = 4;
    let diag = CMatrix::from_fn(n, n, |i, j| if i == j { Complex64::new(0.5, 0.0) } else { Complex64::new(0.0, 0.0) });
    let first = CMatrix::from_fn(1, n, |_, j| Complex64::new(0.3 + j as f64, 0.0));
    let stack = sim_uplink::geometry::PropagationStack::from_matrices(vec![first, diag]).unwrap();
    let h = CMatrix::from_fn(n, 1, |i, _| Complex64::new(1.0 + i as f64, 0.0));
    let mf = matched_filter_phases(&stack, &h, 0).unwrap();
    assert!(mf.phases.as_slice().iter().all(|v| *v == 0.0));
    assert_eq!(mf.undefined_phases, 0);
}

#[test]
fn matched_filter_counts_undefined_phases() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let inst = RandomInstance::draw(2, 4, 1, &mut rng).unwrap();
    let mut h = inst.h.clone();
    h[(2, 0)] = Complex64::new(0.0, 0.0);
    let mf = matched_filter_phases(&inst.stack, &h, 0).unwrap();
    assert!(mf.undefined_phases >= 1);
    assert_eq!(mf.phases.layer(2)[2], 0.0);
}
