//! Model layers as tape operations.

use std::collections::BTreeSet;

use rand::Rng;

use super::tape::{sigmoid, Grads, Tape, Var};
use super::tensor::{gemm, NnError, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Backward,
}

/// One direction of one GRU layer. `W_i*` are H×D_in, `W_h*` are H×H.
#[derive(Debug, Clone, PartialEq)]
pub struct GruLayerParams<T> {
    pub w_ir: T,
    pub w_iz: T,
    pub w_in: T,
    pub w_hr: T,
    pub w_hz: T,
    pub w_hn: T,
    pub b_ir: T,
    pub b_iz: T,
    pub b_in: T,
    pub b_hr: T,
    pub b_hz: T,
    pub b_hn: T,
    pub hidden: usize,
    pub direction: Direction,
}

impl<T> GruLayerParams<T> {
    pub const NAMES: [&'static str; 12] =
        ["W_ir", "W_iz", "W_in", "W_hr", "W_hz", "W_hn", "b_ir", "b_iz", "b_in", "b_hr", "b_hz", "b_hn"];

    pub fn tensors(&self) -> [&T; 12] {
        [
            &self.w_ir, &self.w_iz, &self.w_in, &self.w_hr, &self.w_hz, &self.w_hn, &self.b_ir, &self.b_iz, &self.b_in,
            &self.b_hr, &self.b_hz, &self.b_hn,
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut T; 12] {
        [
            &mut self.w_ir,
            &mut self.w_iz,
            &mut self.w_in,
            &mut self.w_hr,
            &mut self.w_hz,
            &mut self.w_hn,
            &mut self.b_ir,
            &mut self.b_iz,
            &mut self.b_in,
            &mut self.b_hr,
            &mut self.b_hz,
            &mut self.b_hn,
        ]
    }

    pub fn map<U>(&self, mut f: impl FnMut(&str, &T) -> U) -> GruLayerParams<U> {
        let n = Self::NAMES;
        GruLayerParams {
            w_ir: f(n[0], &self.w_ir),
            w_iz: f(n[1], &self.w_iz),
            w_in: f(n[2], &self.w_in),
            w_hr: f(n[3], &self.w_hr),
            w_hz: f(n[4], &self.w_hz),
            w_hn: f(n[5], &self.w_hn),
            b_ir: f(n[6], &self.b_ir),
            b_iz: f(n[7], &self.b_iz),
            b_in: f(n[8], &self.b_in),
            b_hr: f(n[9], &self.b_hr),
            b_hz: f(n[10], &self.b_hz),
            b_hn: f(n[11], &self.b_hn),
            hidden: self.hidden,
            direction: self.direction,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GcnLayerParams<T> {
    /// D_in×D_out.
    pub theta: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EdgePoolParams<T> {
    /// Length 2·D: source half then target half.
    pub w: T,
    /// Length 1.
    pub b: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearParams<T> {
    /// out×in.
    pub w: T,
    pub b: T,
}

impl Tape {
    /// Rows of `table` selected by `ids`.
    pub fn embedding(&mut self, table: Var, ids: &[u32]) -> Result<Var, NnError> {
        let (rows, e) = (self.value(table).rows(), self.value(table).cols());
        if let Some(&id) = ids.iter().find(|&&id| id as usize >= rows) {
            return Err(NnError::IdOutOfRange { id, rows });
        }
        let t = self.data(table);
        let mut out = Vec::with_capacity(ids.len() * e);
        for &id in ids {
            let id = id as usize;
            out.extend_from_slice(&t[id * e..(id + 1) * e]);
        }
        let ids = ids.to_vec();
        Ok(self.push(Tensor::matrix(ids.len(), e, out), &[table], move |g, grads| {
            grads.acc(table, |buf| {
                for (r, &id) in ids.iter().enumerate() {
                    let id = id as usize;
                    buf[id * e..(id + 1) * e].iter_mut().zip(&g[r * e..(r + 1) * e]).for_each(|(b, x)| *b += x);
                }
            })
        }))
    }

    /// One GRU step built from primitive ops:
    /// r = σ(W_ir x + b_ir + W_hr h + b_hr), z likewise,
    /// n = tanh(W_in x + b_in + r ∗ (W_hn h + b_hn)), h' = (1−z) ∗ n + z ∗ h.
    pub fn gru_cell(&mut self, x: Var, h: Var, p: &GruLayerParams<Var>) -> Result<Var, NnError> {
        let hsz = p.hidden;
        let din = self.value(p.w_ir).cols();
        if self.value(x).len() != din || self.value(h).len() != hsz {
            return Err(NnError::shape("gru_cell", (din, hsz), (self.value(x).len(), self.value(h).len())));
        }
        let xr = self.linear(x, p.w_ir, p.b_ir)?;
        let hr = self.linear(h, p.w_hr, p.b_hr)?;
        let r = self.add(xr, hr)?;
        let r = self.sigmoid(r);
        let xz = self.linear(x, p.w_iz, p.b_iz)?;
        let hz = self.linear(h, p.w_hz, p.b_hz)?;
        let z = self.add(xz, hz)?;
        let z = self.sigmoid(z);
        let xn = self.linear(x, p.w_in, p.b_in)?;
        let hn = self.linear(h, p.w_hn, p.b_hn)?;
        let rhn = self.mul(r, hn)?;
        let n = self.add(xn, rhn)?;
        let n = self.tanh(n);
        let omz = self.one_minus(z);
        let a = self.mul(omz, n)?;
        let b = self.mul(z, h)?;
        self.add(a, b)
    }

    /// Run one GRU direction over `x: T×D` from a zero state. Row `t` of the
    /// T×H result is the state after consuming position `t`, so a backward
    /// pass ends at row 0.
    pub fn gru_sequence(&mut self, x: Var, p: &GruLayerParams<Var>) -> Result<Var, NnError> {
        let hs = p.hidden;
        let (steps, din) = (self.value(x).rows(), self.value(x).cols());
        for (i, &w) in p.tensors().iter().enumerate() {
            let want: &[usize] = match i {
                0..=2 => &[hs, din],
                3..=5 => &[hs, hs],
                _ => &[hs],
            };
            if self.value(*w).shape() != want {
                return Err(NnError::shape("gru_sequence", want, self.value(*w).shape()));
            }
        }
        let xd = self.data(x);
        let w: Vec<_> = p.tensors().iter().map(|&&v| self.data(v)).collect();

        // input projections for all steps at once
        let proj = |wi: &[f64], bi: &[f64]| {
            let mut out = Vec::with_capacity(steps * hs);
            for _ in 0..steps {
                out.extend_from_slice(bi);
            }
            gemm(steps, din, hs, &xd, false, wi, true, &mut out, 1.0);
            out
        };
        let (xr, xz, xn) = (proj(&w[0], &w[6]), proj(&w[1], &w[7]), proj(&w[2], &w[8]));

        let order: Vec<usize> = match p.direction {
            Direction::Forward => (0..steps).collect(),
            Direction::Backward => (0..steps).rev().collect(),
        };
        let mut out = vec![0.0; steps * hs];
        let (mut rs, mut zs, mut ns, mut hns) =
            (vec![0.0; steps * hs], vec![0.0; steps * hs], vec![0.0; steps * hs], vec![0.0; steps * hs]);
        // state entering each step, in processing order
        let mut prevs = vec![0.0; steps * hs];
        let mut h = vec![0.0; hs];
        let mut gh = vec![0.0; hs];
        for (k, &t) in order.iter().enumerate() {
            let s = t * hs..(t + 1) * hs;
            prevs[k * hs..(k + 1) * hs].copy_from_slice(&h);
            gh.copy_from_slice(&w[9]);
            gemm(1, hs, hs, &h, false, &w[3], true, &mut gh, 1.0);
            for i in 0..hs {
                rs[s.start + i] = sigmoid(xr[s.start + i] + gh[i]);
            }
            gh.copy_from_slice(&w[10]);
            gemm(1, hs, hs, &h, false, &w[4], true, &mut gh, 1.0);
            for i in 0..hs {
                zs[s.start + i] = sigmoid(xz[s.start + i] + gh[i]);
            }
            gh.copy_from_slice(&w[11]);
            gemm(1, hs, hs, &h, false, &w[5], true, &mut gh, 1.0);
            for i in 0..hs {
                let j = s.start + i;
                hns[j] = gh[i];
                ns[j] = (xn[j] + rs[j] * gh[i]).tanh();
                h[i] = (1.0 - zs[j]) * ns[j] + zs[j] * h[i];
            }
            out[s].copy_from_slice(&h);
        }

        let parents: Vec<Var> = std::iter::once(x).chain(p.tensors().iter().map(|&&v| v)).collect();
        let pv = parents.clone();
        Ok(self.push(Tensor::matrix(steps, hs, out), &parents, move |g, grads: &mut Grads| {
            // pre-activation gradients, indexed by position
            let (mut dar, mut daz, mut dan, mut dhn) =
                (vec![0.0; steps * hs], vec![0.0; steps * hs], vec![0.0; steps * hs], vec![0.0; steps * hs]);
            // previous states rearranged by position, for the weight gradients
            let mut hprev = vec![0.0; steps * hs];
            let mut dh = vec![0.0; hs];
            let mut dprev = vec![0.0; hs];
            for (k, &t) in order.iter().enumerate().rev() {
                let base = t * hs;
                let hp = &prevs[k * hs..(k + 1) * hs];
                hprev[base..base + hs].copy_from_slice(hp);
                for i in 0..hs {
                    let j = base + i;
                    let d = dh[i] + g[j];
                    let (r, z, n) = (rs[j], zs[j], ns[j]);
                    let dn = d * (1.0 - z);
                    let dz = d * (hp[i] - n);
                    dprev[i] = d * z;
                    let an = dn * (1.0 - n * n);
                    dan[j] = an;
                    dhn[j] = an * r;
                    dar[j] = an * hns[j] * r * (1.0 - r);
                    daz[j] = dz * z * (1.0 - z);
                }
                gemm(1, hs, hs, &dar[base..base + hs], false, &w[3], false, &mut dprev, 1.0);
                gemm(1, hs, hs, &daz[base..base + hs], false, &w[4], false, &mut dprev, 1.0);
                gemm(1, hs, hs, &dhn[base..base + hs], false, &w[5], false, &mut dprev, 1.0);
                std::mem::swap(&mut dh, &mut dprev);
            }
            let col_sum = |d: &[f64], buf: &mut [f64]| {
                for t in 0..steps {
                    buf.iter_mut().zip(&d[t * hs..(t + 1) * hs]).for_each(|(b, x)| *b += x);
                }
            };
            grads.acc(pv[0], |buf| {
                gemm(steps, hs, din, &dar, false, &w[0], false, buf, 1.0);
                gemm(steps, hs, din, &daz, false, &w[1], false, buf, 1.0);
                gemm(steps, hs, din, &dan, false, &w[2], false, buf, 1.0);
            });
            grads.acc(pv[1], |buf| gemm(hs, steps, din, &dar, true, &xd, false, buf, 1.0));
            grads.acc(pv[2], |buf| gemm(hs, steps, din, &daz, true, &xd, false, buf, 1.0));
            grads.acc(pv[3], |buf| gemm(hs, steps, din, &dan, true, &xd, false, buf, 1.0));
            grads.acc(pv[4], |buf| gemm(hs, steps, hs, &dar, true, &hprev, false, buf, 1.0));
            grads.acc(pv[5], |buf| gemm(hs, steps, hs, &daz, true, &hprev, false, buf, 1.0));
            grads.acc(pv[6], |buf| gemm(hs, steps, hs, &dhn, true, &hprev, false, buf, 1.0));
            grads.acc(pv[7], |buf| col_sum(&dar, buf));
            grads.acc(pv[8], |buf| col_sum(&daz, buf));
            grads.acc(pv[9], |buf| col_sum(&dan, buf));
            grads.acc(pv[10], |buf| col_sum(&dar, buf));
            grads.acc(pv[11], |buf| col_sum(&daz, buf));
            grads.acc(pv[12], |buf| col_sum(&dhn, buf));
        }))
    }

    /// Stacked bidirectional GRU. Returns the concatenated final forward
    /// and backward states of every layer (2·layers·H values); an empty
    /// sequence gives zeros.
    pub fn gru_forward<R: Rng + ?Sized>(
        &mut self,
        x: Var,
        layers: &[[GruLayerParams<Var>; 2]],
        dropout: f64,
        training: bool,
        rng: &mut R,
    ) -> Result<Var, NnError> {
        let steps = self.value(x).rows();
        let width: usize = layers.iter().map(|l| l[0].hidden + l[1].hidden).sum();
        if steps == 0 || self.value(x).is_empty() {
            return Ok(self.constant(Tensor::zeros(&[width])));
        }
        let mut input = x;
        let mut feats = Vec::with_capacity(2 * layers.len());
        for (l, pair) in layers.iter().enumerate() {
            let f = self.gru_sequence(input, &pair[0])?;
            let b = self.gru_sequence(input, &pair[1])?;
            feats.push(self.row(f, steps - 1));
            feats.push(self.row(b, 0));
            if l + 1 < layers.len() {
                input = self.concat_cols(&[f, b])?;
                input = self.dropout(input, dropout, training, rng);
            }
        }
        self.concat_cols(&feats)
    }

    /// `Â_norm · X`, the propagation half of a graph convolution.
    pub fn propagate(&mut self, x: Var, adj: &NormAdj) -> Result<Var, NnError> {
        let (n, d) = (self.value(x).rows(), self.value(x).cols());
        if n != adj.n {
            return Err(NnError::shape("propagate", adj.n, n));
        }
        let xd = self.data(x);
        let mut out = vec![0.0; n * d];
        for (i, row) in adj.rows.iter().enumerate() {
            let o = &mut out[i * d..(i + 1) * d];
            for &(j, a) in row {
                o.iter_mut().zip(&xd[j * d..(j + 1) * d]).for_each(|(y, v)| *y += a * v);
            }
        }
        let adj = adj.clone();
        Ok(self.push(Tensor::matrix(n, d, out), &[x], move |g, grads| {
            grads.acc(x, |buf| {
                for (i, row) in adj.rows.iter().enumerate() {
                    let gi = &g[i * d..(i + 1) * d];
                    for &(j, a) in row {
                        buf[j * d..(j + 1) * d].iter_mut().zip(gi).for_each(|(b, v)| *b += a * v);
                    }
                }
            })
        }))
    }

    /// `D̂^{-1/2} Â D̂^{-1/2} X Θ` (no activation).
    pub fn gcn_conv(&mut self, x: Var, adj: &NormAdj, p: &GcnLayerParams<Var>) -> Result<Var, NnError> {
        if self.value(x).cols() != self.value(p.theta).rows() {
            return Err(NnError::shape("gcn_conv", self.value(p.theta).rows(), self.value(x).cols()));
        }
        let ax = self.propagate(x, adj)?;
        self.matmul(ax, p.theta)
    }

    /// Score every edge, greedily contract the best non-overlapping ones
    /// and merge each pair into `s·(x_i + x_j)`.
    pub fn edge_pool(
        &mut self,
        x: Var,
        graph: &GraphBatch,
        p: &EdgePoolParams<Var>,
    ) -> Result<(Var, GraphBatch, Vec<usize>), NnError> {
        let (n, d) = (self.value(x).rows(), self.value(x).cols());
        if n != graph.nodes() {
            return Err(NnError::shape("edge_pool", graph.nodes(), n));
        }
        if self.value(p.w).len() != 2 * d || self.value(p.b).len() != 1 {
            return Err(NnError::shape("edge_pool", 2 * d, self.value(p.w).len()));
        }
        let (xd, wd, bd) = (self.data(x), self.data(p.w), self.data(p.b));
        let plan = PoolPlan::new(&xd, d, &wd, bd[0], graph);

        let mut out = vec![0.0; plan.new_nodes * d];
        for c in &plan.clusters {
            let o = &mut out[c.new * d..(c.new + 1) * d];
            match c.merged {
                Some((j, s, _)) => {
                    for k in 0..d {
                        o[k] = s * (xd[c.first * d + k] + xd[j * d + k]);
                    }
                }
                None => o.copy_from_slice(&xd[c.first * d..(c.first + 1) * d]),
            }
        }
        let pooled = GraphBatch { segment: plan.segment.clone(), edges: plan.edges.clone(), graphs: graph.graphs };
        let mapping = plan.mapping.clone();
        let (w, b) = (p.w, p.b);
        let var = self.push(Tensor::matrix(plan.new_nodes, d, out), &[x, p.w, p.b], move |g, grads| {
            let mut dx = vec![0.0; n * d];
            let mut dw = vec![0.0; 2 * d];
            let mut db = 0.0;
            for c in &plan.clusters {
                let gc = &g[c.new * d..(c.new + 1) * d];
                let i = c.first;
                match c.merged {
                    Some((j, s, _)) => {
                        let mut ds = 0.0;
                        for k in 0..d {
                            dx[i * d + k] += s * gc[k];
                            dx[j * d + k] += s * gc[k];
                            ds += gc[k] * (xd[i * d + k] + xd[j * d + k]);
                        }
                        let dl = ds * s * (1.0 - s);
                        // score reads [x_src; x_dst]
                        let (src, dst) = c.merged_edge();
                        for k in 0..d {
                            dw[k] += dl * xd[src * d + k];
                            dw[d + k] += dl * xd[dst * d + k];
                            dx[src * d + k] += dl * wd[k];
                            dx[dst * d + k] += dl * wd[d + k];
                        }
                        db += dl;
                    }
                    None => dx[i * d..(i + 1) * d].iter_mut().zip(gc).for_each(|(a, v)| *a += v),
                }
            }
            grads.add_into(x, &dx);
            grads.add_into(w, &dw);
            grads.add_into(b, &[db]);
        });
        Ok((var, pooled, mapping))
    }

    /// Per-graph column maxima (`graphs × D`). Gradient goes to the first
    /// maximising node; graphs without nodes pool to zeros.
    pub fn segment_max_pool(&mut self, x: Var, segment: &[usize], graphs: usize) -> Result<Var, NnError> {
        let (n, d) = (self.value(x).rows(), self.value(x).cols());
        if segment.len() != n {
            return Err(NnError::shape("segment_max_pool", n, segment.len()));
        }
        let xd = self.data(x);
        let mut arg: Vec<Option<usize>> = vec![None; graphs * d];
        for (i, &s) in segment.iter().enumerate() {
            for k in 0..d {
                let slot = &mut arg[s * d + k];
                if slot.is_none_or(|a| xd[i * d + k] > xd[a * d + k]) {
                    *slot = Some(i);
                }
            }
        }
        let out: Vec<f64> = arg.iter().enumerate().map(|(idx, a)| a.map_or(0.0, |i| xd[i * d + idx % d])).collect();
        Ok(self.push(Tensor::matrix(graphs, d, out), &[x], move |g, grads| {
            grads.acc(x, |buf| {
                for (idx, a) in arg.iter().enumerate() {
                    if let Some(i) = a {
                        buf[i * d + idx % d] += g[idx];
                    }
                }
            })
        }))
    }

    /// Column maxima of a single graph's node matrix.
    pub fn global_max_pool(&mut self, x: Var) -> Result<Var, NnError> {
        let n = self.value(x).rows();
        if n == 0 || self.value(x).is_empty() {
            return Err(NnError::EmptyGraph);
        }
        let pooled = self.segment_max_pool(x, &vec![0; n], 1)?;
        let d = self.value(x).cols();
        self.reshape(pooled, &[d])
    }

    /// Inverted dropout; identity outside training.
    pub fn dropout<R: Rng + ?Sized>(&mut self, x: Var, p: f64, training: bool, rng: &mut R) -> Var {
        if !training || p <= 0.0 {
            return x;
        }
        let keep = 1.0 - p;
        let mask: Vec<f64> =
            (0..self.value(x).len()).map(|_| if rng.random::<f64>() < keep { 1.0 / keep } else { 0.0 }).collect();
        let xd = self.data(x);
        let out: Vec<f64> = xd.iter().zip(&mask).map(|(a, m)| a * m).collect();
        let out = Tensor::new(self.value(x).shape(), out).expect("same size");
        self.push(out, &[x], move |g, grads| {
            grads.acc(x, |buf| buf.iter_mut().zip(g).zip(&mask).for_each(|((b, v), m)| *b += v * m))
        })
    }

    /// Mean of `-log softmax(logits_b)[label_b]` over the batch; with
    /// class weights, the weighted mean.
    pub fn cross_entropy(&mut self, logits: Var, labels: &[usize], weights: Option<&[f64]>) -> Result<Var, NnError> {
        let (b, c) = (self.value(logits).rows(), self.value(logits).cols());
        if labels.len() != b || labels.iter().any(|&l| l >= c) || weights.is_some_and(|w| w.len() != c) {
            return Err(NnError::shape("cross_entropy", (b, c), labels.len()));
        }
        let ld = self.data(logits);
        let mut probs = Vec::with_capacity(b * c);
        let mut total = 0.0;
        let mut norm = 0.0;
        let ws: Vec<f64> = labels.iter().map(|&l| weights.map_or(1.0, |w| w[l])).collect();
        for (r, &l) in labels.iter().enumerate() {
            let p = softmax(&ld[r * c..(r + 1) * c]);
            total += -ws[r] * log_softmax_at(&ld[r * c..(r + 1) * c], l);
            norm += ws[r];
            probs.extend(p);
        }
        let labels = labels.to_vec();
        Ok(self.push(Tensor::scalar(total / norm), &[logits], move |g, grads| {
            grads.acc(logits, |buf| {
                for (r, &l) in labels.iter().enumerate() {
                    let scale = g[0] * ws[r] / norm;
                    for k in 0..c {
                        let y = if k == l { 1.0 } else { 0.0 };
                        buf[r * c + k] += scale * (probs[r * c + k] - y);
                    }
                }
            })
        }))
    }
}

pub fn softmax(x: &[f64]) -> Vec<f64> {
    let m = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = x.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

fn log_softmax_at(x: &[f64], i: usize) -> f64 {
    let m = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + x.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
    x[i] - lse
}

/// Normalised adjacency `D̂^{-1/2} (A + I) D̂^{-1/2}` in row-list form.
#[derive(Debug, Clone, PartialEq)]
pub struct NormAdj {
    pub n: usize,
    pub rows: Vec<Vec<(usize, f64)>>,
}

impl NormAdj {
    /// Binary adjacency from a directed edge list, symmetrised unless
    /// `directed`, with self-loops added.
    pub fn new(n: usize, edges: &[(usize, usize)], directed: bool) -> Self {
        let mut sets: Vec<BTreeSet<usize>> = (0..n).map(|i| BTreeSet::from([i])).collect();
        for &(i, j) in edges {
            sets[i].insert(j);
            if !directed {
                sets[j].insert(i);
            }
        }
        let deg: Vec<f64> = sets.iter().map(|s| s.len() as f64).collect();
        let rows = sets
            .iter()
            .enumerate()
            .map(|(i, s)| s.iter().map(|&j| (j, 1.0 / (deg[i] * deg[j]).sqrt())).collect())
            .collect();
        NormAdj { n, rows }
    }

    pub fn dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n * self.n];
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, a) in row {
                out[i * self.n + j] = a;
            }
        }
        out
    }
}

/// Disjoint union of graphs: node `i` belongs to graph `segment[i]`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct GraphBatch {
    pub segment: Vec<usize>,
    /// Directed, no self-loops, no duplicates.
    pub edges: Vec<(usize, usize)>,
    pub graphs: usize,
}

impl GraphBatch {
    pub fn single(n: usize, edges: &[(usize, usize)]) -> Self {
        let mut b = GraphBatch::default();
        b.push(n, edges);
        b
    }

    /// Append a graph; its node ids are offset past the current ones.
    pub fn push(&mut self, n: usize, edges: &[(usize, usize)]) {
        let off = self.segment.len();
        let mut es: Vec<(usize, usize)> =
            edges.iter().filter(|(i, j)| i != j).map(|&(i, j)| (i + off, j + off)).collect();
        es.sort_unstable();
        es.dedup();
        self.edges.extend(es);
        self.segment.extend(std::iter::repeat_n(self.graphs, n));
        self.graphs += 1;
    }

    pub fn nodes(&self) -> usize {
        self.segment.len()
    }
}

#[derive(Debug, Clone)]
struct Cluster {
    new: usize,
    first: usize,
    /// Partner node, score, and the contracted edge as (src, dst).
    merged: Option<(usize, f64, (usize, usize))>,
}

impl Cluster {
    fn merged_edge(&self) -> (usize, usize) {
        self.merged.expect("merged cluster").2
    }
}

struct PoolPlan {
    clusters: Vec<Cluster>,
    new_nodes: usize,
    mapping: Vec<usize>,
    segment: Vec<usize>,
    edges: Vec<(usize, usize)>,
}

impl PoolPlan {
    fn new(x: &[f64], d: usize, w: &[f64], b: f64, graph: &GraphBatch) -> Self {
        let n = graph.nodes();
        let scores: Vec<f64> = graph
            .edges
            .iter()
            .map(|&(i, j)| {
                let mut a = b;
                for k in 0..d {
                    a += w[k] * x[i * d + k] + w[d + k] * x[j * d + k];
                }
                sigmoid(a)
            })
            .collect();
        let mut order: Vec<usize> = (0..scores.len()).collect();
        order.sort_by(|&a, &c| scores[c].total_cmp(&scores[a]).then(a.cmp(&c)));

        // partner node, edge score, contracted edge
        type Match = Option<(usize, f64, (usize, usize))>;
        let mut partner: Vec<Match> = vec![None; n];
        let mut used = vec![false; n];
        for e in order {
            let (i, j) = graph.edges[e];
            if i == j || used[i] || used[j] {
                continue;
            }
            used[i] = true;
            used[j] = true;
            let (lo, hi) = (i.min(j), i.max(j));
            partner[lo] = Some((hi, scores[e], (i, j)));
        }

        let mut mapping = vec![usize::MAX; n];
        let mut clusters = Vec::new();
        for i in 0..n {
            if mapping[i] != usize::MAX {
                continue;
            }
            let new = clusters.len();
            mapping[i] = new;
            if let Some((j, _, _)) = partner[i] {
                mapping[j] = new;
            }
            clusters.push(Cluster { new, first: i, merged: partner[i] });
        }
        let segment = clusters.iter().map(|c| graph.segment[c.first]).collect();
        let mut edges: Vec<(usize, usize)> =
            graph.edges.iter().map(|&(i, j)| (mapping[i], mapping[j])).filter(|(i, j)| i != j).collect();
        edges.sort_unstable();
        edges.dedup();
        PoolPlan { new_nodes: clusters.len(), clusters, mapping, segment, edges }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn softmax_sums_to_one() {
        let p = softmax(&[1000.0, 1000.0, -5.0, 3.0]);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(p.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn uniform_cross_entropy() {
        let mut t = Tape::new();
        let l = t.constant(Tensor::matrix(1, 4, vec![0.0; 4]));
        let loss = t.cross_entropy(l, &[2], None).unwrap();
        assert!((t.value(loss).item() - 4f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn path_adjacency() {
        let a = NormAdj::new(3, &[(0, 1), (1, 2)], false);
        let s6 = 1.0 / 6f64.sqrt();
        let want = [0.5, s6, 0.0, s6, 1.0 / 3.0, s6, 0.0, s6, 0.5];
        for (x, y) in a.dense().iter().zip(want) {
            assert!((x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn pool_two_nodes() {
        let mut t = Tape::new();
        let x = t.constant(Tensor::from_rows(&[vec![1.0, 2.0], vec![3.0, -4.0]]));
        let w = t.constant(Tensor::vector(vec![0.0; 4]));
        let b = t.constant(Tensor::vector(vec![0.0]));
        let (y, g, m) = t.edge_pool(x, &GraphBatch::single(2, &[(0, 1)]), &EdgePoolParams { w, b }).unwrap();
        assert_eq!(t.value(y).data(), &[2.0, -1.0]);
        assert!(g.edges.is_empty());
        assert_eq!(m, [0, 0]);
    }

    #[test]
    fn pool_without_edges_is_identity() {
        let mut t = Tape::new();
        let x = t.constant(Tensor::from_rows(&[vec![1.0], vec![2.0], vec![3.0]]));
        let w = t.constant(Tensor::vector(vec![0.3, 0.1]));
        let b = t.constant(Tensor::vector(vec![0.0]));
        let (y, g, m) = t.edge_pool(x, &GraphBatch::single(3, &[]), &EdgePoolParams { w, b }).unwrap();
        assert_eq!(t.value(y).data(), &[1.0, 2.0, 3.0]);
        assert_eq!((g.nodes(), m), (3, vec![0, 1, 2]));
    }

    #[test]
    fn max_pool_definition() {
        let mut t = Tape::new();
        let x = t.constant(Tensor::from_rows(&[vec![1.0, 5.0], vec![3.0, 2.0]]));
        let y = t.global_max_pool(x).unwrap();
        assert_eq!(t.value(y).data(), &[3.0, 5.0]);
        let e = t.constant(Tensor::zeros(&[0, 2]));
        assert_eq!(t.global_max_pool(e).unwrap_err(), NnError::EmptyGraph);
    }

    #[test]
    fn embedding_rows_and_range() {
        let mut t = Tape::new();
        let tab = t.param(Tensor::from_rows(&[vec![0.0, 1.0], vec![2.0, 3.0], vec![4.0, 5.0]]));
        let y = t.embedding(tab, &[2, 2]).unwrap();
        assert_eq!(t.value(y).data(), &[4.0, 5.0, 4.0, 5.0]);
        let s = t.sum(y);
        let g = t.backward(s);
        assert_eq!(g.get(tab).unwrap(), &[0.0, 0.0, 0.0, 0.0, 2.0, 2.0]);
        assert!(matches!(t.embedding(tab, &[3]), Err(NnError::IdOutOfRange { id: 3, rows: 3 })));
    }
}
