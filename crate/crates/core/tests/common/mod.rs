//! Independent oracles and fixtures shared by the integration tests.
#![allow(dead_code)]

use deeptective::nn::{Direction, GruLayerParams, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn rand_tensor(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

pub fn rand_gru(rng: &mut ChaCha8Rng, h: usize, d: usize, direction: Direction) -> GruLayerParams<Tensor> {
    let mut m = |r, c| rand_tensor(rng, &[r, c]);
    let (w_ir, w_iz, w_in, w_hr, w_hz, w_hn) = (m(h, d), m(h, d), m(h, d), m(h, h), m(h, h), m(h, h));
    let mut v = |n| rand_tensor(rng, &[n]);
    GruLayerParams {
        w_ir,
        w_iz,
        w_in,
        w_hr,
        w_hz,
        w_hn,
        b_ir: v(h),
        b_iz: v(h),
        b_in: v(h),
        b_hr: v(h),
        b_hz: v(h),
        b_hn: v(h),
        hidden: h,
        direction,
    }
}

fn sig(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// The four gate equations, one element at a time.
pub fn scalar_gru_cell(x: &[f64], h: &[f64], p: &GruLayerParams<Tensor>) -> Vec<f64> {
    let hs = p.hidden;
    let d = x.len();
    let mv = |w: &Tensor, v: &[f64], i: usize| -> f64 {
        let cols = v.len();
        v.iter().enumerate().map(|(j, x)| w.data()[i * cols + j] * x).sum()
    };
    assert_eq!(p.w_ir.shape(), &[hs, d]);
    let mut out = vec![0.0; hs];
    for i in 0..hs {
        let r = sig(mv(&p.w_ir, x, i) + p.b_ir.data()[i] + mv(&p.w_hr, h, i) + p.b_hr.data()[i]);
        let z = sig(mv(&p.w_iz, x, i) + p.b_iz.data()[i] + mv(&p.w_hz, h, i) + p.b_hz.data()[i]);
        let n = (mv(&p.w_in, x, i) + p.b_in.data()[i] + r * (mv(&p.w_hn, h, i) + p.b_hn.data()[i])).tanh();
        out[i] = (1.0 - z) * n + z * h[i];
    }
    out
}

/// Greedy edge contraction by repeated full scans for the best free edge.
pub fn brute_edge_pool(x: &[Vec<f64>], edges: &[(usize, usize)], w: &[f64], b: f64) -> (Vec<Vec<f64>>, Vec<usize>) {
    let n = x.len();
    let d = x.first().map_or(0, Vec::len);
    let score = |&(i, j): &(usize, usize)| {
        let mut a = b;
        for k in 0..d {
            a += w[k] * x[i][k];
        }
        for k in 0..d {
            a += w[d + k] * x[j][k];
        }
        sig(a)
    };
    let scores: Vec<f64> = edges.iter().map(score).collect();
    let mut free = vec![true; n];
    let mut pairs: Vec<(usize, usize, f64)> = Vec::new();
    loop {
        let mut best: Option<usize> = None;
        for (e, &(i, j)) in edges.iter().enumerate() {
            if i == j || !free[i] || !free[j] {
                continue;
            }
            if best.is_none_or(|bi| scores[e] > scores[bi]) {
                best = Some(e);
            }
        }
        let Some(e) = best else { break };
        let (i, j) = edges[e];
        free[i] = false;
        free[j] = false;
        pairs.push((i, j, scores[e]));
    }
    // clusters keyed by smallest member
    let mut clusters: Vec<(usize, Vec<f64>, Vec<usize>)> = Vec::new();
    for &(i, j, s) in &pairs {
        let f: Vec<f64> = (0..d).map(|k| s * (x[i][k] + x[j][k])).collect();
        clusters.push((i.min(j), f, vec![i, j]));
    }
    for i in 0..n {
        if free[i] {
            clusters.push((i, x[i].clone(), vec![i]));
        }
    }
    clusters.sort_by_key(|c| c.0);
    let mut mapping = vec![0; n];
    for (new, c) in clusters.iter().enumerate() {
        for &m in &c.2 {
            mapping[m] = new;
        }
    }
    (clusters.into_iter().map(|c| c.1).collect(), mapping)
}
