//! Shared instance generators for the integration suites.

use coevo::net::{LayeredNetwork, ModelParams};
use coevo::rng::rng_for;
use coevo::NodeSet;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Random strongly connected instance with heterogeneous parameters.
pub struct Instance {
    pub net: LayeredNetwork,
    pub params: ModelParams,
}

pub fn random_instance(n: usize, seed: u64) -> Instance {
    let net = LayeredNetwork::random_regularized(n, seed).unwrap();
    let mut rng = rng_for(seed, "params");
    let lambda: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..=1.0)).collect();
    let beta: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..=1.0)).collect();
    Instance { net, params: ModelParams::new(lambda, beta).unwrap() }
}

/// Subset where each node is included independently with probability `p`.
pub fn random_subset(n: usize, p: f64, rng: &mut ChaCha8Rng) -> NodeSet {
    (0..n).filter(|_| rng.gen::<f64>() < p).collect()
}
