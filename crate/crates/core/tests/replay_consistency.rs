//! Training-time unrolls replay the Q-values seen while acting.

use omvp_core::env::EnvConfig;
use omvp_core::tensor::Graph;
use omvp_core::trainer::{make_batch, unroll_q, Algorithm, ModelConfig, NetPair, Rollout};

fn acting_q(nets: &NetPair, env: &EnvConfig, seed: u64) -> Vec<Vec<f64>> {
    let mut rollout = Rollout::new(env, nets.actor(), 0.3, seed).unwrap();
    let mut out = Vec::new();
    while !rollout.is_done() {
        out.push(rollout.step().unwrap().evaluation.unwrap().q.data().to_vec());
    }
    out
}

fn check(alg: Algorithm) {
    let env = EnvConfig::new(7, 2, 1);
    let model = ModelConfig { d_model: 20, heads: 2, rnn_hidden: 12, mixer_embed: 8, hyper_hidden: 8, ..ModelConfig::default() };
    let nets = NetPair::new(alg, &model, &env, 9).unwrap();
    for seed in 0..4 {
        let ep = omvp_core::trainer::collect_episode(&env, nets.actor(), 0.3, seed).unwrap();
        let acted = acting_q(&nets, &env, seed);
        assert_eq!(acted.len(), ep.len());
        for start in [0, ep.len() / 2, ep.len() - 1] {
            let window = (ep.len() - start).min(5);
            let batch = make_batch(&[&ep], &[start], window, nets.hidden_shape()).unwrap();
            let mut g = Graph::new();
            let qs = unroll_q(&nets.agent, &nets.online, &mut g, &batch, window).unwrap();
            // From t = 0 the hidden state is exactly zero; later starts reload
            // it from f32 storage.
            let tol = if start == 0 { 1e-12 } else { 1e-4 };
            for (k, &q) in qs.iter().enumerate() {
                for (a, b) in g.value(q).data().iter().zip(&acted[start + k]) {
                    assert!((a - b).abs() < tol, "{alg:?} seed {seed} start {start} step {k}: {a} vs {b}");
                }
            }
        }
    }
}

#[test]
fn transformer_unroll_matches_acting() {
    check(Algorithm::T3Qmix);
}

#[test]
fn recurrent_unroll_matches_acting() {
    check(Algorithm::Qmix);
}
