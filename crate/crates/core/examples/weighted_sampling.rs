// Inclusion frequencies of weighted sampling without replacement versus
// exact enumeration of sequential weighted draws.
//
//     cargo run --release --example weighted_sampling

use dynsample::samplers::weighted_sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Exact marginal inclusion probabilities of `k` sequential draws, each
/// proportional to weight among the items not yet drawn.
fn enumerate(weights: &[f64], k: usize) -> Vec<f64> {
    fn go(weights: &[f64], k: usize, taken: &mut Vec<usize>, p: f64, out: &mut [f64]) {
        if taken.len() == k {
            for &i in taken.iter() {
                out[i] += p;
            }
            return;
        }
        let rest: f64 = (0..weights.len())
            .filter(|i| !taken.contains(i))
            .map(|i| weights[i])
            .sum();
        for i in 0..weights.len() {
            if !taken.contains(&i) {
                taken.push(i);
                go(weights, k, taken, p * weights[i] / rest, out);
                taken.pop();
            }
        }
    }
    let mut out = vec![0.0; weights.len()];
    go(weights, k, &mut Vec::new(), 1.0, &mut out);
    out
}

fn main() {
    let weights = [0.4, 0.25, 0.15, 0.1, 0.07, 0.03];
    let k = 3;
    let trials = 200_000;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut counts = vec![0u32; weights.len()];
    for _ in 0..trials {
        for i in weighted_sample(&weights, k, &mut rng) {
            counts[i] += 1;
        }
    }
    let exact = enumerate(&weights, k);
    println!("item  weight  sampled   exact");
    for i in 0..weights.len() {
        let f = counts[i] as f64 / trials as f64;
        println!("{i:>4} {:>7.2} {f:>8.4} {:>7.4}", weights[i], exact[i]);
    }
    println!(
        "inclusion probabilities sum to k = {:.4}",
        exact.iter().sum::<f64>()
    );
}
