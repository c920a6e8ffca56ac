use std::collections::HashSet;

use dsr_core::models::{init_model, InitScheme, Model, ModelSpec, ObservationModel, Trainable};
use dsr_core::Mat;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_state(rng: &mut ChaCha8Rng, m: usize, scale: f64) -> Vec<f64> {
    (0..m).map(|_| rng.random_range(-scale..scale)).collect()
}

fn fd_jacobian(model: &Model<f64>, z: &[f64]) -> Mat<f64> {
    let m = z.len();
    let h = 1e-6;
    let mut j = Mat::zeros(m, m);
    for c in 0..m {
        let mut zp = z.to_vec();
        let mut zm = z.to_vec();
        zp[c] += h;
        zm[c] -= h;
        let fp = model.step(&zp);
        let fm = model.step(&zm);
        for r in 0..m {
            j[(r, c)] = (fp[r] - fm[r]) / (2.0 * h);
        }
    }
    j
}

/// Whether any ReLU pre-activation lies within `margin` of its switching point.
fn near_boundary(model: &Model<f64>, z: &[f64], margin: f64) -> bool {
    match model {
        Model::AlRnn(m) => z[m.first_relu()..].iter().any(|v| v.abs() < margin),
        Model::ShPlrnn(m) => m
            .w2
            .matvec(z)
            .iter()
            .zip(&m.h2)
            .any(|(p, b)| (p + b).abs() < margin),
        Model::Reservoir(_) => false,
    }
}

#[test]
fn jacobians_match_finite_differences() {
    let scheme = InitScheme {
        rc_bias_scale: 0.5,
        rc_input_scale: 0.5,
        ..InitScheme::default()
    };
    let specs = [
        ModelSpec::al_rnn(8, 3, 3),
        ModelSpec::sh_plrnn(3, 20, 3),
        ModelSpec::reservoir(40, 3),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for spec in specs {
        let mut model: Model<f64> = init_model(&spec, 17, &scheme).unwrap();
        if let Model::Reservoir(rc) = &mut model {
            rc.alpha = 0.3;
            rc.w_out = Mat::from_fn(3, 40, |i, j| ((i * 7 + j * 3) % 11) as f64 / 20.0 - 0.25);
        }
        let mut checked = 0;
        while checked < 100 {
            let z = random_state(&mut rng, spec.latent_dim, 2.0);
            if near_boundary(&model, &z, 1e-4) {
                continue;
            }
            let j = model.jacobian(&z);
            let fd = fd_jacobian(&model, &z);
            for (a, b) in j.as_slice().iter().zip(fd.as_slice()) {
                assert!(
                    (a - b).abs() <= 1e-5 * (1.0 + b.abs()),
                    "{:?}: analytic {a} vs fd {b}",
                    spec.family
                );
            }
            checked += 1;
        }
    }
}

#[test]
fn alrnn_region_count_is_bounded() {
    let spec = ModelSpec::al_rnn(10, 3, 3);
    let model: Model<f64> = init_model(&spec, 2, &InitScheme::default()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut distinct = HashSet::new();
    for _ in 0..2000 {
        let z = random_state(&mut rng, 10, 3.0);
        let key: Vec<u64> = model.jacobian(&z).as_slice().iter().map(|v| v.to_bits()).collect();
        distinct.insert(key);
    }
    assert_eq!(distinct.len(), 1 << 3);
}

#[test]
fn rc_spectral_radius_matches_gelfand_oracle() {
    let spec = ModelSpec::reservoir(60, 3);
    let Model::Reservoir(rc) = init_model::<f64>(&spec, 4, &InitScheme::default()).unwrap() else {
        unreachable!()
    };
    // Gelfand's formula by repeated squaring: rho = lim ||W^n||^(1/n).
    let mut a = rc.w.clone();
    let mut log_scale = 0.0;
    let mut power = 1.0f64;
    for _ in 0..40 {
        let s = a.frobenius_norm();
        a = a.scaled(1.0 / s);
        log_scale += s.ln() / power;
        a = a.matmul(&a);
        power *= 2.0;
    }
    let rho = (log_scale + a.frobenius_norm().ln() / power).exp();
    assert!((rho - 0.95).abs() < 1e-6, "rho = {rho}");
}

fn model_strategy() -> impl Strategy<Value = (Model<f64>, u64)> {
    (1usize..8, 0usize..8, any::<u64>()).prop_map(|(m, p, seed)| {
        let spec = ModelSpec::al_rnn(m, p.min(m), 1);
        (init_model(&spec, seed, &InitScheme::default()).unwrap(), seed)
    })
}

proptest! {
    #[test]
    fn alrnn_is_affine_within_a_region((model, seed) in model_strategy()) {
        let Model::AlRnn(net) = &model else { unreachable!() };
        let m = net.latent_dim();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let z1 = random_state(&mut rng, m, 2.0);
        // Perturb only within the region: keep ReLU coordinates on the same side.
        let z2: Vec<f64> = z1
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                let d = rng.random_range(-0.5..0.5);
                if i >= net.first_relu() { v * (1.0 + d) } else { v + d }
            })
            .collect();
        prop_assert_eq!(net.activation_pattern(&z1), net.activation_pattern(&z2));
        let j = model.jacobian(&z1);
        let f1 = model.step(&z1);
        let f2 = model.step(&z2);
        let dz: Vec<f64> = z2.iter().zip(&z1).map(|(a, b)| a - b).collect();
        let lin = j.matvec(&dz);
        for i in 0..m {
            prop_assert!((f2[i] - f1[i] - lin[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn pseudo_inverse_axioms(rows in 1usize..4, extra in 0usize..4, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cols = rows + extra;
        let b = Mat::from_fn(rows, cols, |_, _| rng.random_range(-2.0..2.0));
        let om = ObservationModel::new(b).unwrap();
        let (b, p) = (om.b(), om.b_pinv());
        prop_assert!(b.matmul(p).matmul(b).sub(b).max_abs() < 1e-10);
        prop_assert!(p.matmul(b).matmul(p).sub(p).max_abs() < 1e-10);
    }

    #[test]
    fn flat_parameters_round_trip(m in 1usize..6, h in 1usize..6, seed in any::<u64>()) {
        let mut model: Model<f64> =
            init_model(&ModelSpec::sh_plrnn(m, h, 1), seed, &InitScheme::default()).unwrap();
        let net = model.trainable_mut().unwrap();
        let p: Vec<f64> = (0..net.n_params()).map(|i| i as f64 * 0.01).collect();
        net.set_params(&p).unwrap();
        prop_assert_eq!(net.params(), p);
    }
}

#[test]
fn vjp_matches_finite_differences() {
    let specs = [ModelSpec::al_rnn(5, 2, 2), ModelSpec::sh_plrnn(3, 6, 2)];
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for spec in specs {
        let mut model: Model<f64> = init_model(&spec, 21, &InitScheme::default()).unwrap();
        let m = spec.latent_dim;
        let z = loop {
            let z = random_state(&mut rng, m, 1.5);
            if !near_boundary(&model, &z, 1e-3) {
                break z;
            }
        };
        let g = random_state(&mut rng, m, 1.0);
        let net = model.trainable_mut().unwrap();
        let np = net.n_params();
        let mut gp = vec![0.0; np];
        let mut gz = vec![0.0; m];
        net.vjp(&z, &g, &mut gp, &mut gz);
        let objective = |net: &dyn Trainable<f64>, z: &[f64]| {
            let mut out = vec![0.0; m];
            net.step_into(z, &mut out);
            out.iter().zip(&g).map(|(a, b)| a * b).sum::<f64>()
        };
        let base = net.params();
        for k in 0..np {
            let mut p = base.clone();
            p[k] += 1e-6;
            net.set_params(&p).unwrap();
            let fp = objective(net, &z);
            p[k] -= 2e-6;
            net.set_params(&p).unwrap();
            let fm = objective(net, &z);
            let fd = (fp - fm) / 2e-6;
            assert!((gp[k] - fd).abs() < 1e-6 * (1.0 + fd.abs()), "param {k}: {} vs {fd}", gp[k]);
        }
        net.set_params(&base).unwrap();
        for c in 0..m {
            let mut zp = z.clone();
            zp[c] += 1e-6;
            let mut zm = z.clone();
            zm[c] -= 1e-6;
            let fd = (objective(net, &zp) - objective(net, &zm)) / 2e-6;
            assert!((gz[c] - fd).abs() < 1e-6 * (1.0 + fd.abs()));
        }
    }
}
