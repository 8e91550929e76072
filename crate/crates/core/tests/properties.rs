mod common;

use common::{psd, random_scalar, random_solvable, rng};
use lqgame::control::{backward_riccati, gains_explicit};
use lqgame::decision::{
    backward_enumerate, evaluate_sequence, solve_table, threshold_rule, Decision, Plan, Regime,
    DEFAULT_NODE_LIMIT,
};
use lqgame::estimation::Estimator;
use lqgame::linalg::{inf_norm, min_eigenvalue};
use lqgame::model::{parse_spec, to_config_string, InfoStructure};
use lqgame::simulation::rollout;
use lqgame::Matrix;
use proptest::prelude::*;
use rand::Rng;

fn rel_diff(a: &Matrix, b: &Matrix) -> f64 {
    inf_norm(&(a - b)) / inf_norm(b).max(1e-300)
}

/// `a ⪯ b` up to `tol` relative to the size of `b`.
fn loewner_le(a: &Matrix, b: &Matrix, tol: f64) -> bool {
    min_eigenvalue(&(b - a)) >= -tol * (1.0 + inf_norm(b))
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn factorization_inverts_every_stage(seed in any::<u64>()) {
        let (spec, r) = random_solvable(&mut rng(seed));
        for n in 0..spec.horizon {
            prop_assert!(r.factor_residual(n) <= 1e-9);
            let (kd, ka) = gains_explicit(&spec, &r.l[n + 1], n).unwrap();
            prop_assert!(rel_diff(&kd, &r.defender_gain(n)) <= 1e-8);
            if spec.attacker_dim() > 0 {
                prop_assert!(rel_diff(&ka, &r.attacker_gain(n)) <= 1e-8);
            }
        }
    }

    /// Under strict concavity the diagonal factor has a positive defender
    /// block and a negative attacker block.
    #[test]
    fn diagonal_factor_signs(seed in any::<u64>()) {
        let (spec, r) = random_solvable(&mut rng(seed));
        let md = spec.defender_dim();
        let ma = spec.attacker_dim();
        for f in &r.factors {
            prop_assert!(min_eigenvalue(&f.s_b) > 0.0);
            let td = f.t.view((0, 0), (md, md)).into_owned();
            prop_assert!(min_eigenvalue(&td) > 0.0);
            if ma > 0 {
                prop_assert!(min_eigenvalue(&f.w) > 0.0);
                let ta = f.t.view((md, md), (ma, ma)).into_owned();
                prop_assert!(min_eigenvalue(&(-ta)) > 0.0);
            }
        }
    }

    /// With the attacker idle the defender's cost is still nonnegative, so
    /// every `L_n` is PSD.
    #[test]
    fn cost_to_go_is_psd(seed in any::<u64>()) {
        let (_, r) = random_solvable(&mut rng(seed));
        for l in &r.l {
            prop_assert!(min_eigenvalue(l) >= -1e-9 * (1.0 + inf_norm(l)));
        }
    }

    #[test]
    fn observation_never_increases_covariance(seed in any::<u64>()) {
        let mut g = rng(seed);
        let (spec, _) = random_solvable(&mut g);
        let est = Estimator::new(&spec);
        let q = spec.state_dim();
        let rank = g.random_range(0..=q);
        let p = psd(&mut g, q, rank, 2.0);
        let z = est.predict(&p);
        let (h, _) = est.information(&z).unwrap();
        let post = est.propagate(&p, true).unwrap();
        prop_assert!(min_eigenvalue(&h) >= -1e-9);
        prop_assert!(loewner_le(&post, &z, 1e-9));
        prop_assert!(inf_norm(&(&post - (&z - &h))) <= 1e-9 * (1.0 + inf_norm(&z)));
        prop_assert_eq!(est.propagate(&p, false).unwrap(), z);
    }

    /// `P1 ⪯ P2` implies `Z(P1) ⪯ Z(P2)` and the same after an observation.
    #[test]
    fn prediction_is_monotone(seed in any::<u64>()) {
        let mut g = rng(seed);
        let (spec, _) = random_solvable(&mut g);
        let est = Estimator::new(&spec);
        let q = spec.state_dim();
        let p1 = psd(&mut g, q, q, 1.0);
        let rank = g.random_range(1..=q);
        let p2 = &p1 + psd(&mut g, q, rank, 1.0);
        prop_assert!(loewner_le(&est.predict(&p1), &est.predict(&p2), 1e-9));
        let post1 = est.propagate(&p1, true).unwrap();
        let post2 = est.propagate(&p2, true).unwrap();
        prop_assert!(loewner_le(&post1, &post2, 1e-9));
    }

    /// The closed-form regions agree with solving the table directly
    /// whenever no two of `0, O^d, O^a, T, O^d + O^a` coincide.
    #[test]
    fn threshold_rule_matches_table(
        base in 0.0..100.0f64,
        t in -5.0..60.0f64,
        o_d in 0.0..40.0f64,
        o_a in 0.0..40.0f64,
        cont in -10.0..10.0f64,
    ) {
        let marks = [0.0, o_d, o_a, t, o_d + o_a];
        let separated = marks.iter().enumerate()
            .all(|(i, x)| marks[i + 1..].iter().all(|y| (x - y).abs() > 1e-6));
        prop_assume!(separated);
        // Outcome costs with and without the observation differ by T.
        let cost = [base + t + cont, base + cont];
        let table = [
            [cost[0], cost[0] - o_a],
            [cost[1] + o_d, cost[0] + o_d - o_a],
        ];
        for info in [InfoStructure::DefenderLeads, InfoStructure::AttackerLeads, InfoStructure::Simultaneous] {
            prop_assert_eq!(threshold_rule(info, o_d, o_a, t), solve_table(info, &table));
        }
    }

    /// The covariance trajectory is deterministic, so the tree's values along
    /// its own path are the open-loop values of that decision sequence.
    #[test]
    fn tree_values_equal_open_loop_values(seed in any::<u64>(), horizon in 1usize..8) {
        let spec = random_scalar(&mut rng(seed), horizon);
        let r = backward_riccati(&spec).unwrap();
        let tree = backward_enumerate(&spec, &r, DEFAULT_NODE_LIMIT).unwrap();
        let path = tree.on_path(spec.observation_rule);
        let decisions: Vec<Decision> = path.iter().map(|s| s.decision).collect();
        let open = evaluate_sequence(&spec, &r, &decisions).unwrap();
        prop_assert_eq!(path.len(), horizon);
        prop_assert_eq!(path[0].value, tree.root.value);
        for (a, b) in path.iter().zip(&open) {
            prop_assert_eq!(a.value, b.value);
            prop_assert_eq!(&a.p, &b.p);
        }
    }

    #[test]
    fn config_round_trip(seed in any::<u64>()) {
        let (spec, _) = random_solvable(&mut rng(seed));
        let text = to_config_string(&spec);
        prop_assert_eq!(parse_spec(&text).unwrap(), spec);
    }

    #[test]
    fn validation_catches_perturbations(seed in any::<u64>(), which in 0usize..4) {
        let mut g = rng(seed);
        let (mut spec, _) = random_solvable(&mut g);
        let n = g.random_range(0..spec.horizon);
        let q = spec.state_dim();
        match which {
            0 => spec.q[n][(0, 0)] = -1.0 - spec.q[n].abs().max() * q as f64,
            1 => spec.r_d[n] *= 0.0,
            2 => spec.o_a[n] = -1.0,
            _ => {
                if q > 1 {
                    spec.q[n][(0, 1)] += 1.0;
                } else {
                    spec.sigma_s[(0, 0)] = -1.0;
                }
            }
        }
        prop_assert!(!spec.validate().is_empty());
    }

    /// Only the attacker's block of the factorization is negative, so
    /// `φ ⪰ -P_a' W^{-1} P_a` with `P_a = B^a'LA`. The bound shrinks like
    /// `1/R^a`, which makes `φ` PSD in the limit.
    #[test]
    fn phi_lower_bound_vanishes_for_expensive_attacker(seed in any::<u64>()) {
        let mut g = rng(seed);
        let (mut spec, _) = random_solvable(&mut g);
        let cheap = backward_riccati(&spec).unwrap();
        for ra in &mut spec.r_a {
            let ma = ra.nrows();
            *ra = Matrix::identity(ma, ma) * 1e6;
        }
        let r = backward_riccati(&spec).unwrap();
        for sol in [&cheap, &r] {
            for n in 0..spec.horizon {
                let pa = spec.b_a.transpose() * &sol.l[n + 1] * &spec.a;
                let bound = pa.transpose() * sol.factors[n].w_inverse() * &pa;
                let phi = &sol.phi[n];
                prop_assert!(min_eigenvalue(&(phi + &bound)) >= -1e-9 * (1.0 + inf_norm(phi)));
            }
        }
        for (n, phi) in r.phi.iter().enumerate() {
            let pa = spec.b_a.transpose() * &r.l[n + 1] * &spec.a;
            let shrunk = pa.norm_squared() / 1e6;
            prop_assert!(min_eigenvalue(phi) >= -shrunk * (1.0 + 1e-6) - 1e-9 * inf_norm(phi));
        }
    }

    #[test]
    fn scalar_phi_psd_for_expensive_attacker(seed in any::<u64>(), horizon in 1usize..40) {
        let mut spec = random_scalar(&mut rng(seed), horizon);
        for ra in &mut spec.r_a {
            *ra = Matrix::from_element(1, 1, 1e6);
        }
        let r = backward_riccati(&spec).unwrap();
        for phi in &r.phi {
            prop_assert!(min_eigenvalue(phi) >= -1e-6 * inf_norm(phi));
        }
    }

    #[test]
    fn rollout_costs_add_up(seed in any::<u64>(), horizon in 1usize..8) {
        let spec = random_scalar(&mut rng(seed), horizon);
        let r = backward_riccati(&spec).unwrap();
        let plan = Plan::Tree(backward_enumerate(&spec, &r, DEFAULT_NODE_LIMIT).unwrap());
        let a = rollout(&spec, &r, &plan, seed).unwrap();
        let sum = a.stages.iter().map(|s| s.cost).sum::<f64>() + a.terminal_cost;
        prop_assert_eq!(sum, a.total);
        prop_assert_eq!(a, rollout(&spec, &r, &plan, seed).unwrap());
    }
}

#[test]
fn threshold_rule_regions_are_pure_except_simultaneous() {
    for info in [InfoStructure::DefenderLeads, InfoStructure::AttackerLeads] {
        for t in [-1.0, 1.0, 10.0] {
            assert!(matches!(threshold_rule(info, 2.0, 5.0, t), Regime::Pure(_)));
        }
    }
}
