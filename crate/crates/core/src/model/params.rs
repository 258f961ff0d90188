use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::arch::ArchitectureConfig;
use crate::nn::init::{normal, uniform_fan_in};
use crate::nn::{Direction, EdgePoolParams, GcnLayerParams, GruLayerParams, LinearParams, Tensor};

/// Every trainable tensor of the classifier.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<T> {
    pub embed_tokens: T,
    pub embed_nodes: T,
    /// `[forward, backward]` per layer.
    pub gru: Vec<[GruLayerParams<T>; 2]>,
    pub gcn: Vec<GcnLayerParams<T>>,
    pub pool: Vec<EdgePoolParams<T>>,
    pub fc: Vec<LinearParams<T>>,
}

fn dir_name(d: Direction) -> &'static str {
    match d {
        Direction::Forward => "fwd",
        Direction::Backward => "bwd",
    }
}

impl<T> ModelParams<T> {
    /// Qualified names in storage order.
    pub fn names(&self) -> Vec<String> {
        let mut out = vec!["embed.tokens".to_string(), "embed.nodes".to_string()];
        for (l, pair) in self.gru.iter().enumerate() {
            for p in pair {
                for n in GruLayerParams::<T>::NAMES {
                    out.push(format!("gru.l{l}.{}.{n}", dir_name(p.direction)));
                }
            }
        }
        for i in 0..self.gcn.len() {
            out.push(format!("gcn.l{i}.Theta"));
        }
        for i in 0..self.pool.len() {
            out.push(format!("pool.l{i}.w"));
            out.push(format!("pool.l{i}.b"));
        }
        for i in 0..self.fc.len() {
            out.push(format!("fc.l{i}.W"));
            out.push(format!("fc.l{i}.b"));
        }
        out
    }

    /// Tensors in the same order as [`names`](Self::names).
    pub fn tensors(&self) -> Vec<&T> {
        let mut out = vec![&self.embed_tokens, &self.embed_nodes];
        for pair in &self.gru {
            for p in pair {
                out.extend(p.tensors());
            }
        }
        out.extend(self.gcn.iter().map(|g| &g.theta));
        for p in &self.pool {
            out.push(&p.w);
            out.push(&p.b);
        }
        for f in &self.fc {
            out.push(&f.w);
            out.push(&f.b);
        }
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut T> {
        let mut out = vec![&mut self.embed_tokens, &mut self.embed_nodes];
        for pair in &mut self.gru {
            for p in pair {
                out.extend(p.tensors_mut());
            }
        }
        out.extend(self.gcn.iter_mut().map(|g| &mut g.theta));
        for p in &mut self.pool {
            out.push(&mut p.w);
            out.push(&mut p.b);
        }
        for f in &mut self.fc {
            out.push(&mut f.w);
            out.push(&mut f.b);
        }
        out
    }

    pub fn map<U>(&self, mut f: impl FnMut(&T) -> U) -> ModelParams<U> {
        ModelParams {
            embed_tokens: f(&self.embed_tokens),
            embed_nodes: f(&self.embed_nodes),
            gru: self.gru.iter().map(|[a, b]| [a.map(|_, t| f(t)), b.map(|_, t| f(t))]).collect(),
            gcn: self.gcn.iter().map(|g| GcnLayerParams { theta: f(&g.theta) }).collect(),
            pool: self.pool.iter().map(|p| EdgePoolParams { w: f(&p.w), b: f(&p.b) }).collect(),
            fc: self.fc.iter().map(|l| LinearParams { w: f(&l.w), b: f(&l.b) }).collect(),
        }
    }
}

impl ModelParams<Tensor> {
    /// Seeded initialization: embeddings N(0,1)·0.1, weights uniform in
    /// ±1/√fan_in, biases zero.
    pub fn init(arch: &ArchitectureConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (v, e, h) = (arch.vocab_size, arch.embed_dim, arch.gru_hidden);
        let embed_tokens = normal(&mut rng, &[v, e], 0.1);
        let embed_nodes = normal(&mut rng, &[v, e], 0.1);
        let mut gru = Vec::with_capacity(arch.gru_layers);
        for l in 0..arch.gru_layers {
            let d = if l == 0 { e } else { 2 * h };
            let mut layer = |direction| {
                let mut w = |cols: usize| uniform_fan_in(&mut rng, &[h, cols], cols);
                let (w_ir, w_iz, w_in, w_hr, w_hz, w_hn) = (w(d), w(d), w(d), w(h), w(h), w(h));
                let b = || Tensor::zeros(&[h]);
                GruLayerParams {
                    w_ir,
                    w_iz,
                    w_in,
                    w_hr,
                    w_hz,
                    w_hn,
                    b_ir: b(),
                    b_iz: b(),
                    b_in: b(),
                    b_hr: b(),
                    b_hz: b(),
                    b_hn: b(),
                    hidden: h,
                    direction,
                }
            };
            let fwd = layer(Direction::Forward);
            let bwd = layer(Direction::Backward);
            gru.push([fwd, bwd]);
        }
        let mut gcn = Vec::new();
        let mut pool = Vec::new();
        for win in arch.gcn_dims.windows(2) {
            gcn.push(GcnLayerParams { theta: uniform_fan_in(&mut rng, &[win[0], win[1]], win[0]) });
            pool.push(EdgePoolParams {
                w: uniform_fan_in(&mut rng, &[2 * win[1]], 2 * win[1]),
                b: Tensor::zeros(&[1]),
            });
        }
        let mut fc = Vec::new();
        let mut din = arch.fc_input();
        for &dout in &arch.fc_dims {
            fc.push(LinearParams { w: uniform_fan_in(&mut rng, &[dout, din], din), b: Tensor::zeros(&[dout]) });
            din = dout;
        }
        ModelParams { embed_tokens, embed_nodes, gru, gcn, pool, fc }
    }

    pub fn count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    /// Expected `(name, shape)` list for an architecture.
    pub fn expected_shapes(arch: &ArchitectureConfig) -> Vec<(String, Vec<usize>)> {
        let shapes = Self::shape_params(arch);
        shapes.names().into_iter().zip(shapes.tensors().into_iter().cloned()).collect()
    }

    /// Zero tensors of the right shapes.
    pub fn init_shapes(arch: &ArchitectureConfig) -> Self {
        Self::shape_params(arch).map(|s| Tensor::zeros(s))
    }

    fn shape_params(arch: &ArchitectureConfig) -> ModelParams<Vec<usize>> {
        let (v, e, h) = (arch.vocab_size, arch.embed_dim, arch.gru_hidden);
        let gru = (0..arch.gru_layers)
            .map(|l| {
                let d = if l == 0 { e } else { 2 * h };
                let mk = |direction| GruLayerParams {
                    w_ir: vec![h, d],
                    w_iz: vec![h, d],
                    w_in: vec![h, d],
                    w_hr: vec![h, h],
                    w_hz: vec![h, h],
                    w_hn: vec![h, h],
                    b_ir: vec![h],
                    b_iz: vec![h],
                    b_in: vec![h],
                    b_hr: vec![h],
                    b_hz: vec![h],
                    b_hn: vec![h],
                    hidden: h,
                    direction,
                };
                [mk(Direction::Forward), mk(Direction::Backward)]
            })
            .collect();
        let gcn = arch.gcn_dims.windows(2).map(|w| GcnLayerParams { theta: vec![w[0], w[1]] }).collect();
        let pool = arch.gcn_dims.windows(2).map(|w| EdgePoolParams { w: vec![2 * w[1]], b: vec![1] }).collect();
        let mut din = arch.fc_input();
        let fc = arch
            .fc_dims
            .iter()
            .map(|&dout| {
                let l = LinearParams { w: vec![dout, din], b: vec![dout] };
                din = dout;
                l
            })
            .collect();
        ModelParams { embed_tokens: vec![v, e], embed_nodes: vec![v, e], gru, gcn, pool, fc }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::Granularity;

    #[test]
    fn names_shapes_and_count() {
        let arch = ArchitectureConfig::tiny(Granularity::Function, 30);
        let p = ModelParams::init(&arch, 1);
        let names = p.names();
        assert_eq!(names.len(), p.tensors().len());
        assert_eq!(names[2], "gru.l0.fwd.W_ir");
        assert!(names.contains(&"gcn.l1.Theta".to_string()));
        for ((n, shape), t) in ModelParams::expected_shapes(&arch).iter().zip(p.tensors()) {
            assert_eq!(shape.as_slice(), t.shape(), "{n}");
        }
        let unique: std::collections::HashSet<_> = names.iter().collect();
        assert_eq!(unique.len(), names.len());
    }

    #[test]
    fn full_parameter_count() {
        let arch = ArchitectureConfig::full(Granularity::File, 300);
        let total: usize = ModelParams::expected_shapes(&arch).iter().map(|(_, s)| s.iter().product::<usize>()).sum();
        // GCN 28M, FC 5.1M, GRU 0.3M, embeddings 60k
        assert!((33_000_000..34_000_000).contains(&total), "{total}");
    }

    #[test]
    fn init_is_seeded() {
        let arch = ArchitectureConfig::tiny(Granularity::File, 30);
        assert_eq!(ModelParams::init(&arch, 5), ModelParams::init(&arch, 5));
        assert_ne!(ModelParams::init(&arch, 5), ModelParams::init(&arch, 6));
        let p = ModelParams::init(&arch, 5);
        assert!(p.fc[0].b.data().iter().all(|&b| b == 0.0));
        let a = 1.0 / (arch.fc_input() as f64).sqrt();
        assert!(p.fc[0].w.data().iter().all(|w| w.abs() <= a));
    }
}
