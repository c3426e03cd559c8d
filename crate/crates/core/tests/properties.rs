//! Property tests over random games and profiles: the structural
//! invariants that must hold at every point, not just at the worked
//! examples.

use proptest::prelude::*;

use incentive_dynamics::{incentive_vector, vector_field, Game, Incentive, MixedProfile};

fn arb_shape() -> impl Strategy<Value = Vec<usize>> {
    prop_oneof![
        Just(vec![2, 2]),
        Just(vec![3, 3]),
        Just(vec![4, 4]),
        Just(vec![2, 3]),
        Just(vec![2, 2, 2]),
    ]
}

fn arb_game() -> impl Strategy<Value = Game> {
    arb_shape().prop_flat_map(|shape| {
        let total: usize = shape.iter().product();
        let players = shape.len();
        (
            Just(shape),
            prop::collection::vec(prop::collection::vec(-5.0..5.0f64, total), players),
        )
            .prop_map(|(shape, payoffs)| Game::new(shape, payoffs).expect("valid random game"))
    })
}

fn arb_game_and_profile() -> impl Strategy<Value = (Game, MixedProfile)> {
    arb_game().prop_flat_map(|game| {
        let counts = game.strategy_counts().to_vec();
        let weights: Vec<_> = counts
            .iter()
            .map(|&s| prop::collection::vec(0.05..1.0f64, s))
            .collect();
        (Just(game), weights).prop_map(|(game, raw)| {
            let points: Vec<Vec<f64>> = raw
                .into_iter()
                .map(|w| {
                    let sum: f64 = w.iter().sum();
                    w.into_iter().map(|v| v / sum).collect()
                })
                .collect();
            let profile = MixedProfile::new(points).expect("normalized point");
            (game, profile)
        })
    })
}

fn all_specs() -> Vec<Incentive> {
    vec![
        Incentive::Replicator,
        Incentive::Bnn,
        Incentive::logit(0.5).unwrap(),
        Incentive::Smith,
        Incentive::Projection,
        Incentive::Dash,
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    /// The field moves mass around without creating it: per-player
    /// components sum to zero at every point, for every incentive.
    #[test]
    fn field_components_sum_to_zero((game, x) in arb_game_and_profile()) {
        for spec in all_specs() {
            let field = vector_field(spec, &game, &x).unwrap();
            for (i, f) in field.iter().enumerate() {
                let total: f64 = f.iter().sum();
                let scale = 1.0 + game.payoff_scale();
                prop_assert!(
                    total.abs() <= 1e-12 * scale,
                    "{spec} player {i}: field sums to {total:e}"
                );
            }
        }
    }

    /// Logit is a distribution; bnn, dash, smith and logit never go
    /// negative; projection is centered.
    #[test]
    fn incentive_sign_structure((game, x) in arb_game_and_profile()) {
        for spec in all_specs() {
            let phi = incentive_vector(spec, &game, &x).unwrap();
            for i in 0..game.players() {
                let row = phi.player(i);
                if spec.is_sign_definite() {
                    prop_assert!(row.iter().all(|&v| v >= 0.0), "{spec} negative component");
                }
                match spec {
                    Incentive::Logit { .. } => {
                        let sum: f64 = row.iter().sum();
                        prop_assert!((sum - 1.0).abs() <= 1e-12);
                    }
                    Incentive::Projection => {
                        let sum: f64 = row.iter().sum();
                        prop_assert!(sum.abs() <= 1e-12 * (1.0 + game.payoff_scale()));
                    }
                    _ => {}
                }
            }
        }
    }

    /// Expected payoff is multilinear: affine in one player's point with
    /// everyone else fixed.
    #[test]
    fn utility_is_multilinear(
        (game, x) in arb_game_and_profile(),
        (game2, y) in arb_game_and_profile(),
        t in 0.0..1.0f64,
    ) {
        // reuse the first game; the second draw only supplies another profile shape
        prop_assume!(game.strategy_counts() == game2.strategy_counts());
        for i in 0..game.players() {
            let mut blended = x.points().to_vec();
            blended[i] = x.point(i)
                .iter()
                .zip(y.point(i))
                .map(|(a, b)| t * a + (1.0 - t) * b)
                .collect();
            let mut swapped = x.points().to_vec();
            swapped[i] = y.point(i).to_vec();
            let blended = MixedProfile::new(blended).unwrap();
            let swapped = MixedProfile::new(swapped).unwrap();
            let lhs = game.utility(&blended, i).unwrap();
            let rhs = t * game.utility(&x, i).unwrap() + (1.0 - t) * game.utility(&swapped, i).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-11 * (1.0 + game.payoff_scale()));
        }
    }

    /// The JSON document reproduces every payoff bit-for-bit.
    #[test]
    fn game_json_round_trip_is_bit_exact(game in arb_game()) {
        let back = Game::from_json(&game.to_json()).unwrap();
        prop_assert_eq!(back.strategy_counts(), game.strategy_counts());
        for i in 0..game.players() {
            for (a, b) in back.reduced_matrix(i).iter().zip(game.reduced_matrix(i)) {
                for (x, y) in a.iter().zip(b) {
                    prop_assert_eq!(x.to_bits(), y.to_bits());
                }
            }
        }
    }
}
