use proptest::prelude::*;

use reconlaw::datagen::cifar::CIFAR_PIXELS;
use reconlaw::datagen::{parse_cifar_batch, serialize_cifar_batch, sphere_uniform, CifarRecord, Dataset, DatasetMeta};
use reconlaw::features::{sample_rf_weights, train_rf, Activation};
use reconlaw::harness::PSpec;
use reconlaw::metrics::{assignment_rho, hungarian};
use reconlaw::numkit::{gaussian_matrix, DenseMatrix, RngStream};
use reconlaw::recon::{recon_grad, recon_loss, recon_step, ReconConfig, ReconProblem, ReconState};

fn activation(i: usize) -> Activation {
    [Activation::relu(), Activation::tanh(), Activation::relu_plus_tanh()][i % 3].clone()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn rho_ignores_row_order_of_the_reconstruction(seed in any::<u64>(), n in 1usize..7, d in 1usize..6, flips: bool) {
        let mut rng = RngStream::new(seed);
        let x = gaussian_matrix(&mut rng, n, d, 1.0).unwrap();
        let x_hat = gaussian_matrix(&mut rng, n, d, 1.0).unwrap();
        let shuffled = x_hat.select_rows(&rng.permutation(n));
        let a = assignment_rho(&x, &x_hat, flips).unwrap().rho;
        let b = assignment_rho(&x, &shuffled, flips).unwrap().rho;
        prop_assert!((a - b).abs() <= 1e-12 * a.max(1.0));
        prop_assert!(a >= 0.0);
        prop_assert_eq!(assignment_rho(&x, &x, flips).unwrap().rho, 0.0);
    }

    #[test]
    fn flips_never_increase_rho(seed in any::<u64>(), n in 1usize..7, d in 1usize..6) {
        let mut rng = RngStream::new(seed);
        let x = gaussian_matrix(&mut rng, n, d, 1.0).unwrap();
        let x_hat = gaussian_matrix(&mut rng, n, d, 1.0).unwrap();
        let with = assignment_rho(&x, &x_hat, true).unwrap();
        let without = assignment_rho(&x, &x_hat, false).unwrap();
        prop_assert!(with.rho <= without.rho + 1e-12);
        prop_assert!(without.sign_flips.iter().all(|&s| s == 1));
    }

    #[test]
    fn hungarian_returns_a_permutation(seed in any::<u64>(), n in 1usize..12) {
        let mut rng = RngStream::new(seed);
        let cost = DenseMatrix::from_fn(n, n, |_, _| rng.uniform());
        let mut perm = hungarian(&cost).unwrap();
        perm.sort_unstable();
        prop_assert_eq!(perm, (0..n).collect::<Vec<_>>());
    }

    #[test]
    fn loss_lies_between_zero_and_the_target_energy(seed in any::<u64>(), act in 0usize..3, n in 1usize..4, d in 2usize..7) {
        let mut rng = RngStream::new(seed);
        let p = 10 * n * d;
        let x = sphere_uniform(&mut rng, n, d).unwrap();
        let y = gaussian_matrix(&mut rng, n, 1, 1.0).unwrap();
        let model = train_rf(sample_rf_weights(&mut rng, p, d).unwrap(), activation(act), &x, &y).unwrap();
        let problem = ReconProblem::new(&model, model.readout_targets(), n).unwrap();
        let x_hat = sphere_uniform(&mut rng, n, d).unwrap();
        let loss = recon_loss(&problem, &x_hat).unwrap().normalized(&problem);
        prop_assert!((0.0..=1.0 + 1e-12).contains(&loss), "{}", loss);
    }

    #[test]
    fn steps_stay_on_the_sphere(seed in any::<u64>(), n in 1usize..5, d in 2usize..9, step in 0.1f64..100.0, momentum in 0.0f64..0.99) {
        let mut rng = RngStream::new(seed);
        let x = sphere_uniform(&mut rng, n, d).unwrap();
        let y = gaussian_matrix(&mut rng, n, 1, 1.0).unwrap();
        let model = train_rf(sample_rf_weights(&mut rng, 8 * n * d, d).unwrap(), Activation::tanh(), &x, &y).unwrap();
        let problem = ReconProblem::new(&model, model.readout_targets(), n).unwrap();
        let config = ReconConfig { step, momentum, ..ReconConfig::default() };
        let mut state = ReconState::random(&mut rng, n, d).unwrap();
        for _ in 0..3 {
            let grad = recon_grad(&problem, state.x_hat()).unwrap();
            state = recon_step(state, &grad, &config).unwrap();
            for row in state.x_hat().row_iter() {
                let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
                prop_assert!((norm - (d as f64).sqrt()).abs() < 1e-10);
            }
        }
        prop_assert_eq!(state.iteration(), 3);
    }

    #[test]
    fn grid_entries_round_trip(mult in 1u32..400, unit in 0usize..3) {
        let text = match unit {
            0 => format!("{mult}"),
            1 => format!("{}n", mult as f64 / 4.0),
            _ => format!("{}dn", mult as f64 / 8.0),
        };
        let spec: PSpec = text.parse().unwrap();
        let again: PSpec = spec.to_string().parse().unwrap();
        prop_assert_eq!(spec, again);
    }

    #[test]
    fn datasets_round_trip_through_bytes(seed in any::<u64>(), n in 1usize..6, d in 1usize..9, k in 1usize..4) {
        let mut rng = RngStream::new(seed);
        let x = sphere_uniform(&mut rng, n, d).unwrap();
        let y = gaussian_matrix(&mut rng, n, k, 1.0).unwrap();
        let meta = DatasetMeta { source: "prop".into(), seed: Some(seed), ..Default::default() };
        let data = Dataset::new(x, y, meta).unwrap();
        prop_assert_eq!(Dataset::from_bytes(&data.to_bytes().unwrap()).unwrap(), data);
    }

    #[test]
    fn cifar_records_round_trip(labels in prop::collection::vec(0u8..10, 1..4), fill in any::<u8>()) {
        let records: Vec<CifarRecord> = labels
            .iter()
            .enumerate()
            .map(|(i, &l)| CifarRecord::new(l, (0..CIFAR_PIXELS).map(|j| fill.wrapping_add((i * 31 + j) as u8)).collect()).unwrap())
            .collect();
        let bytes = serialize_cifar_batch(&records);
        prop_assert_eq!(parse_cifar_batch(&bytes).unwrap(), records);
    }
}
