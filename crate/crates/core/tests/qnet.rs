use proptest::prelude::*;
use rand::{Rng as _, SeedableRng};

use tabql::qnet::{epsilon_greedy, grad_check, td_loss, td_update, QNetParams, TdSample};
use tabql::rng::Rng;

fn batch(rng: &mut Rng, n_in: usize, n_out: usize, size: usize) -> Vec<TdSample> {
    (0..size)
        .map(|_| TdSample {
            input: (0..n_in).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            action: rng.gen_range(0..n_out),
            reward: rng.gen_range(-1.0..1.0),
            next_input: (0..n_in).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            terminal: rng.gen_bool(0.3),
        })
        .collect()
}

#[test]
fn uniform_when_epsilon_is_one() {
    let mut rng = Rng::seed_from_u64(9);
    let n = 10_000;
    let mut counts = [0usize; 4];
    for _ in 0..n {
        counts[epsilon_greedy(&[0.0, 5.0, 1.0, 2.0], 1.0, &mut rng)] += 1;
    }
    let p = 0.25;
    let sd = (n as f64 * p * (1.0 - p)).sqrt();
    for c in counts {
        assert!((c as f64 - n as f64 * p).abs() <= 3.0 * sd, "{counts:?}");
    }
}

#[test]
fn greedy_when_epsilon_is_zero() {
    let mut rng = Rng::seed_from_u64(1);
    for _ in 0..100 {
        assert_eq!(epsilon_greedy(&[1.0, 1.0, 0.0], 0.0, &mut rng), 0);
        assert_eq!(epsilon_greedy(&[-1.0, 3.0, 2.0], 0.0, &mut rng), 1);
    }
}

#[test]
fn zero_gradient_batch_has_zero_error() {
    let mut rng = Rng::seed_from_u64(2);
    let params = QNetParams::zeros(3, &[4], 2);
    let b: Vec<TdSample> =
        batch(&mut rng, 3, 2, 5).into_iter().map(|s| TdSample { reward: 0.0, terminal: true, ..s }).collect();
    assert_eq!(grad_check(&params, &params, &b, 0.9, 30, false, &mut rng).unwrap(), 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn gradient_matches_finite_differences(seed in any::<u64>(), n_in in 1usize..5, n_out in 1usize..4, width in 2usize..7, size in 1usize..6) {
        let mut rng = Rng::seed_from_u64(seed);
        let params = QNetParams::init(n_in, &[width], n_out, &mut rng);
        let target = QNetParams::init(n_in, &[width], n_out, &mut rng);
        let b = batch(&mut rng, n_in, n_out, size);
        prop_assert!(grad_check(&params, &target, &b, 0.9, 30, false, &mut rng).unwrap() < 1e-4);
    }

    #[test]
    fn small_steps_descend(seed in any::<u64>(), n_in in 1usize..5, n_out in 1usize..4, size in 1usize..8) {
        let mut rng = Rng::seed_from_u64(seed);
        let mut params = QNetParams::init(n_in, &[8, 8], n_out, &mut rng);
        let target = QNetParams::init(n_in, &[8, 8], n_out, &mut rng);
        let b = batch(&mut rng, n_in, n_out, size);
        let mut prev = td_loss(&params, &target, &b, 0.95).unwrap();
        let mut increase = 0.0;
        for _ in 0..50 {
            td_update(&mut params, &target, &b, 0.95, 1e-3).unwrap();
            let now = td_loss(&params, &target, &b, 0.95).unwrap();
            increase += (now - prev).max(0.0);
            prev = now;
        }
        prop_assert!(increase <= 1e-9, "cumulative increase {}", increase);
    }

    #[test]
    fn checkpoint_bytes_round_trip(seed in any::<u64>(), n_in in 1usize..6, hidden in proptest::collection::vec(1usize..6, 0..3), n_out in 1usize..5) {
        let mut rng = Rng::seed_from_u64(seed);
        let params = QNetParams::init(n_in, &hidden, n_out, &mut rng);
        let back = QNetParams::from_bytes(&params.to_bytes()).unwrap();
        prop_assert_eq!(back, params);
    }
}
