//! Finite-difference check of a graph convolution followed by edge
//! pooling and max pooling on a random graph.

use deeptective::nn::{check_gradients, EdgePoolParams, GcnLayerParams, GraphBatch, NormAdj, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).expect("shape matches")
}

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (n, din, dout) = (6, 4, 3);
    let edges = [(0, 1), (1, 2), (2, 3), (1, 4), (4, 5)];
    let adj = NormAdj::new(n, &edges, false);
    let graph = GraphBatch::single(n, &edges);
    let inputs = [
        random(&mut rng, &[n, din]),
        random(&mut rng, &[din, dout]),
        random(&mut rng, &[2 * dout]),
        random(&mut rng, &[1]),
    ];
    let errors = check_gradients(&inputs, 1e-5, |t, v| {
        let h = t.gcn_conv(v[0], &adj, &GcnLayerParams { theta: v[1] }).unwrap();
        let h = t.relu(h);
        let (pooled, _, _) = t.edge_pool(h, &graph, &EdgePoolParams { w: v[2], b: v[3] }).unwrap();
        let g = t.global_max_pool(pooled).unwrap();
        t.sum(g)
    });
    for (name, e) in ["X", "Theta", "pool w", "pool b"].iter().zip(&errors) {
        println!("{name:<7} relative error {e:.2e}");
    }
}
