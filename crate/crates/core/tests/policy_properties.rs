use omvp_core::env::{Action, EnvConfig, WorldState};
use omvp_core::policy::{attention, stack_features, team_inputs, AgentNet, HiddenTokens, Pose, TransformerConfig, TransformerPolicy};
use omvp_core::tensor::{Graph, ParamStore, Tensor};
use omvp_core::trainer::select_actions;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    (0..rows).map(|_| (0..cols).map(|_| rng.gen_range(-2.0..2.0)).collect()).collect()
}

fn flat(m: &[Vec<f64>]) -> Tensor {
    Tensor::matrix(m.len(), m[0].len(), m.concat()).unwrap()
}

/// Straight-line scaled dot-product attention.
fn attention_oracle(q: &[Vec<f64>], k: &[Vec<f64>], v: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let dk = q[0].len() as f64;
    q.iter()
        .map(|qi| {
            let logits: Vec<f64> = k.iter().map(|kj| qi.iter().zip(kj).map(|(a, b)| a * b).sum::<f64>() / dk.sqrt()).collect();
            let top = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let e: Vec<f64> = logits.iter().map(|l| (l - top).exp()).collect();
            let z: f64 = e.iter().sum();
            (0..v[0].len()).map(|c| e.iter().zip(v).map(|(w, vj)| w / z * vj[c]).sum()).collect()
        })
        .collect()
}

#[test]
fn attention_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..20 {
        let (q, k, v) = (matrix(3, 4, &mut rng), matrix(3, 4, &mut rng), matrix(3, 4, &mut rng));
        let mut g = Graph::new();
        let (qv, kv, vv) = (g.input(flat(&q)), g.input(flat(&k)), g.input(flat(&v)));
        let (out, weights) = attention(&mut g, qv, kv, vv).unwrap();
        let expect = attention_oracle(&q, &k, &v);
        for (got, want) in g.value(out).data().iter().zip(expect.concat()) {
            assert!((got - want).abs() < 1e-12);
        }
        for r in 0..3 {
            let s: f64 = g.value(weights).row_slice(r).iter().sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
    }
}

fn t3(tokens: HiddenTokens, store: &mut ParamStore) -> AgentNet {
    let cfg = TransformerConfig { input_dim: 56, d_model: 20, heads: 5, depth: 2, layer_norm: true, hidden_tokens: tokens };
    AgentNet::Transformer(TransformerPolicy::new(cfg, store, "agent", &mut ChaCha8Rng::seed_from_u64(8)).unwrap())
}

/// Reordering keys changes floating-point summation order, so equality holds
/// up to rounding.
fn assert_close(a: &Tensor, b: &Tensor) {
    assert_eq!(a.shape(), b.shape());
    for (x, y) in a.data().iter().zip(b.data()) {
        assert!((x - y).abs() < 1e-12, "{x} vs {y}");
    }
}

fn swap_rows(t: &Tensor, i: usize, j: usize) -> Tensor {
    let mut rows: Vec<Vec<f64>> = (0..t.rows()).map(|r| t.row_slice(r).to_vec()).collect();
    rows.swap(i, j);
    flat(&rows)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn swapping_agents_swaps_q_rows(seed in any::<u64>(), i in 0usize..8, j in 0usize..8, steps in 0usize..4) {
        let env = EnvConfig::new(13, 8, 4);
        let mut world = WorldState::reset(&env, seed).unwrap();
        for _ in 0..steps {
            world.step(&[Action::Forward; 8]).unwrap();
        }
        let (obs, poses) = team_inputs(&world).unwrap();
        let features = stack_features(&obs, &poses, 13).unwrap();

        let mut store = ParamStore::new();
        let net = t3(HiddenTokens::Team, &mut store);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let hidden = flat(&matrix(1, 20, &mut rng));
        let a = net.evaluate(&store, &features, &hidden).unwrap();
        let b = net.evaluate(&store, &swap_rows(&features, i, j), &hidden).unwrap();
        assert_close(&swap_rows(&a.q, i, j), &b.q);
        assert_close(&a.hidden, &b.hidden);
    }
}

#[test]
fn swapped_observations_and_poses_swap_q_rows() {
    let world = WorldState::reset(&EnvConfig::new(13, 8, 4), 21).unwrap();
    let (mut obs, mut poses): (Vec<_>, Vec<Pose>) = team_inputs(&world).unwrap();
    let mut store = ParamStore::new();
    let net = t3(HiddenTokens::Team, &mut store);
    let h = net.initial_hidden(1, 8);
    let a = net.evaluate(&store, &stack_features(&obs, &poses, 13).unwrap(), &h).unwrap();
    obs.swap(2, 6);
    poses.swap(2, 6);
    let b = net.evaluate(&store, &stack_features(&obs, &poses, 13).unwrap(), &h).unwrap();
    assert_close(&swap_rows(&a.q, 2, 6), &b.q);
}

#[test]
fn epsilon_greedy_frequencies() {
    let q = Tensor::matrix(1, 5, vec![0.0, 3.0, 1.0, 3.0, -1.0]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let draws = 1_000_000;

    let mut counts = [0usize; 5];
    for _ in 0..draws {
        counts[select_actions(&q, 1.0, &mut rng)[0].index()] += 1;
    }
    for c in counts {
        assert!((c as f64 / draws as f64 - 0.2).abs() < 0.002, "{counts:?}");
    }

    let mut counts = [0usize; 5];
    for _ in 0..draws {
        counts[select_actions(&q, 0.1, &mut rng)[0].index()] += 1;
    }
    // Ties resolve to the lowest index, so action 1 is the greedy choice.
    let expect = [0.02, 0.92, 0.02, 0.02, 0.02];
    for (c, e) in counts.iter().zip(expect) {
        assert!((*c as f64 / draws as f64 - e).abs() < 0.002, "{counts:?}");
    }

    assert!((0..100).all(|_| select_actions(&q, 0.0, &mut rng)[0] == Action::Backward));
}
