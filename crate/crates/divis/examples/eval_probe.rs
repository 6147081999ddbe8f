use divis::evalharness::{build_seen_suite, evaluate, EvalConfig};
use divis::qpolicy::{GreedyQPolicy, QNet};
use divis::rollouts::RolloutConfig;
use divis::worldgen::fixtures;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let ckpt = &args[1];
    let max_steps: usize = args[2].parse().unwrap();
    let net = QNet::load(std::path::Path::new(ckpt)).unwrap();
    let policy = GreedyQPolicy {
        net: &net,
        epsilon: 0.0,
    };
    let cfg = EvalConfig {
        rollout: RolloutConfig {
            max_steps,
            ..RolloutConfig::default()
        },
        ..EvalConfig::default()
    };
    let envs = fixtures::all();
    let m = evaluate(&policy, &envs, &build_seen_suite(), &cfg).unwrap();
    println!(
        "T={max_steps} success {:.1}% coll {:.1}% mean_len {:.1}",
        m.success_rate, m.collision_rate, m.mean_episode_len
    );
}
