//! Graph convolution stack: `H ← ReLU(Â H Θ + b)` per layer, global sum
//! pooling, linear head. Batches are stacked node-wise with a
//! block-diagonal `Â`.

use ndarray::{Array1, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::nn::{relative_error, uniform_array, Dense, Parameters, WeightFile};
use crate::workspace_graph::{normalized_adjacency, WorkspaceGraph, FEATURE_WIDTH};

pub const GNN_VERSION: &str = "hrcplan-gcn-planner/1";
pub const OUTPUT_DIM: usize = 6;

/// Row-compressed sparse matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseAdj {
    n: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseAdj {
    pub fn from_dense(a: &Array2<f64>) -> Self {
        let n = a.nrows();
        let mut indptr = Vec::with_capacity(n + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for row in a.rows() {
            for (j, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    indices.push(j);
                    values.push(v);
                }
            }
            indptr.push(indices.len());
        }
        Self {
            n,
            indptr,
            indices,
            values,
        }
    }

    /// Normalized propagation operator of a graph's adjacency.
    pub fn normalized(a: &Array2<f64>) -> Self {
        Self::from_dense(&normalized_adjacency(a))
    }

    pub fn block_diag(blocks: &[&SparseAdj]) -> Self {
        let n = blocks.iter().map(|b| b.n).sum();
        let nnz = blocks.iter().map(|b| b.values.len()).sum();
        let mut indptr = Vec::with_capacity(n + 1);
        let mut indices = Vec::with_capacity(nnz);
        let mut values = Vec::with_capacity(nnz);
        indptr.push(0);
        let mut off = 0;
        for b in blocks {
            for r in 0..b.n {
                for k in b.indptr[r]..b.indptr[r + 1] {
                    indices.push(b.indices[k] + off);
                    values.push(b.values[k]);
                }
                indptr.push(indices.len());
            }
            off += b.n;
        }
        Self {
            n,
            indptr,
            indices,
            values,
        }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    /// `self · x`
    pub fn matmul(&self, x: &Array2<f64>) -> Array2<f64> {
        let w = x.ncols();
        let xs = x.as_standard_layout();
        let xs = xs.as_slice().expect("standard layout");
        let mut out = vec![0.0; self.n * w];
        for r in 0..self.n {
            let dst = &mut out[r * w..(r + 1) * w];
            for k in self.indptr[r]..self.indptr[r + 1] {
                let v = self.values[k];
                let src = &xs[self.indices[k] * w..(self.indices[k] + 1) * w];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += v * s;
                }
            }
        }
        Array2::from_shape_vec((self.n, w), out).expect("shape")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GcnLayer {
    pub theta: Array2<f64>,
    pub b: Array1<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GnnWeights {
    pub version: String,
    pub layers: Vec<GcnLayer>,
    pub head: Dense,
}

impl GnnWeights {
    pub fn zeros(widths: &[usize]) -> Self {
        let mut layers = Vec::new();
        let mut input = FEATURE_WIDTH;
        for &w in widths {
            layers.push(GcnLayer {
                theta: Array2::zeros((input, w)),
                b: Array1::zeros(w),
            });
            input = w;
        }
        Self {
            version: GNN_VERSION.to_string(),
            layers,
            head: Dense::zeros(input, OUTPUT_DIM),
        }
    }

    /// He-uniform GCN weights, small head so initial steps are short.
    pub fn init(widths: &[usize], seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut w = Self::zeros(widths);
        for l in &mut w.layers {
            let bound = (6.0 / l.theta.nrows() as f64).sqrt();
            l.theta = uniform_array(l.theta.nrows(), l.theta.ncols(), bound, &mut rng);
        }
        let fan_in = w.head.w.nrows() as f64;
        w.head.w = uniform_array(w.head.w.nrows(), OUTPUT_DIM, 0.1 / fan_in.sqrt(), &mut rng);
        w
    }

    pub fn widths(&self) -> Vec<usize> {
        self.layers.iter().map(|l| l.theta.ncols()).collect()
    }

    /// `[6, w1, .., wL, 6]`
    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut v = vec![FEATURE_WIDTH];
        v.extend(self.widths());
        v.push(OUTPUT_DIM);
        v
    }

    pub fn validate(&self) -> Result<()> {
        let mut input = FEATURE_WIDTH;
        for (i, l) in self.layers.iter().enumerate() {
            if l.theta.nrows() != input || l.b.len() != l.theta.ncols() {
                return Err(Error::ShapeMismatch(format!("GCN layer {i} dimensions do not chain")));
            }
            input = l.theta.ncols();
        }
        if self.head.w.dim() != (input, OUTPUT_DIM) || self.head.b.len() != OUTPUT_DIM {
            return Err(Error::ShapeMismatch("planner head must map the pooled embedding to 6 values".into()));
        }
        Ok(())
    }

    pub fn to_file(&self) -> WeightFile {
        WeightFile::capture(&self.version, self.layer_sizes(), self)
    }

    pub fn from_file(file: &WeightFile) -> Result<Self> {
        let s = &file.layer_sizes;
        if s.len() < 3 || s[0] != FEATURE_WIDTH || s[s.len() - 1] != OUTPUT_DIM {
            return Err(Error::ShapeMismatch(format!("planner layer sizes {s:?}")));
        }
        let mut w = Self::zeros(&s[1..s.len() - 1]);
        w.version = file.version.clone();
        file.restore_into(&mut w)?;
        Ok(w)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        self.to_file().save(path)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_file(&WeightFile::load(path)?)
    }
}

impl Parameters for GnnWeights {
    fn param_slices(&self) -> Vec<&[f64]> {
        let mut v: Vec<&[f64]> = Vec::new();
        for l in &self.layers {
            v.push(l.theta.as_slice().unwrap());
            v.push(l.b.as_slice().unwrap());
        }
        v.push(self.head.w.as_slice().unwrap());
        v.push(self.head.b.as_slice().unwrap());
        v
    }

    fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut v: Vec<&mut [f64]> = Vec::new();
        for l in &mut self.layers {
            v.push(l.theta.as_slice_mut().unwrap());
            v.push(l.b.as_slice_mut().unwrap());
        }
        v.push(self.head.w.as_slice_mut().unwrap());
        v.push(self.head.b.as_slice_mut().unwrap());
        v
    }
}

pub(crate) struct GcnCache {
    /// Input to each layer.
    inputs: Vec<Array2<f64>>,
    /// Pre-activation of each layer.
    pre: Vec<Array2<f64>>,
    pooled: Array2<f64>,
}

/// Stacked forward pass. `offsets` has one entry per graph plus the total
/// node count. Returns `graphs × 6`.
pub(crate) fn forward_batch(
    w: &GnnWeights,
    x: &Array2<f64>,
    adj: &SparseAdj,
    offsets: &[usize],
    keep_cache: bool,
) -> (Array2<f64>, Option<GcnCache>) {
    let mut inputs = Vec::new();
    let mut pre = Vec::new();
    let mut h = x.clone();
    for l in &w.layers {
        let z = adj.matmul(&h.dot(&l.theta)) + &l.b;
        let next = z.mapv(|v| v.max(0.0));
        if keep_cache {
            inputs.push(h);
            pre.push(z);
        }
        h = next;
    }
    let graphs = offsets.len() - 1;
    let mut pooled = Array2::zeros((graphs, h.ncols()));
    for g in 0..graphs {
        let s = h.slice(ndarray::s![offsets[g]..offsets[g + 1], ..]).sum_axis(Axis(0));
        pooled.row_mut(g).assign(&s);
    }
    let out = w.head.forward(&pooled);
    let cache = keep_cache.then_some(GcnCache { inputs, pre, pooled });
    (out, cache)
}

pub(crate) fn backward(w: &GnnWeights, cache: &GcnCache, adj: &SparseAdj, offsets: &[usize], d_out: &Array2<f64>) -> GnnWeights {
    let mut g = GnnWeights::zeros(&w.widths());
    g.head.w = cache.pooled.t().dot(d_out);
    g.head.b = d_out.sum_axis(Axis(0));
    let d_pooled = d_out.dot(&w.head.w.t());
    let n = offsets[offsets.len() - 1];
    let mut dh = Array2::zeros((n, d_pooled.ncols()));
    for gi in 0..offsets.len() - 1 {
        for r in offsets[gi]..offsets[gi + 1] {
            dh.row_mut(r).assign(&d_pooled.row(gi));
        }
    }
    for l in (0..w.layers.len()).rev() {
        let mut dz = dh;
        ndarray::Zip::from(&mut dz).and(&cache.pre[l]).for_each(|d, &z| {
            if z <= 0.0 {
                *d = 0.0;
            }
        });
        g.layers[l].b = dz.sum_axis(Axis(0));
        // Â is symmetric, so Âᵀ dZ = Â dZ
        let dm = adj.matmul(&dz);
        g.layers[l].theta = cache.inputs[l].t().dot(&dm);
        dh = dm.dot(&w.layers[l].theta.t());
    }
    g
}

/// Raw network output for one graph.
pub fn gnn_forward(g: &WorkspaceGraph, w: &GnnWeights) -> Result<[f64; OUTPUT_DIM]> {
    let t = g.node_count();
    if g.features.ncols() != FEATURE_WIDTH || g.adjacency.dim() != (t, t) {
        return Err(Error::ShapeMismatch(format!(
            "graph features {:?} / adjacency {:?}",
            g.features.dim(),
            g.adjacency.dim()
        )));
    }
    w.validate()?;
    let adj = SparseAdj::normalized(&g.adjacency);
    Ok(forward_with(w, &g.features, &adj))
}

/// Forward pass with a precomputed propagation operator.
pub(crate) fn forward_with(w: &GnnWeights, features: &Array2<f64>, adj: &SparseAdj) -> [f64; OUTPUT_DIM] {
    let (out, _) = forward_batch(w, features, adj, &[0, features.nrows()], false);
    std::array::from_fn(|j| out[[0, j]])
}

fn probe_loss(w: &GnnWeights, x: &Array2<f64>, adj: &SparseAdj, offsets: &[usize], coef: &Array2<f64>) -> f64 {
    let (out, _) = forward_batch(w, x, adj, offsets, false);
    (&out * coef).sum()
}

/// Largest relative error between backprop and central differences
/// (h = 1e-5) on two random 5-node graphs through a width-8 stack.
pub fn gradient_check(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let widths = [8; 5];
    let mut w = GnnWeights::zeros(&widths);
    for s in w.param_slices_mut() {
        s.iter_mut().for_each(|v| *v = rng.random_range(-1.0..1.0));
    }
    let graph = |rng: &mut ChaCha8Rng| {
        let mut a = Array2::zeros((5, 5));
        for i in 0..5 {
            for j in i + 1..5 {
                if rng.random::<f64>() < 0.5 {
                    a[[i, j]] = 1.0;
                    a[[j, i]] = 1.0;
                }
            }
        }
        SparseAdj::normalized(&a)
    };
    let (a1, a2) = (graph(&mut rng), graph(&mut rng));
    let adj = SparseAdj::block_diag(&[&a1, &a2]);
    let offsets = [0, 5, 10];
    let x = uniform_array(10, FEATURE_WIDTH, 1.0, &mut rng);
    let coef = uniform_array(2, OUTPUT_DIM, 1.0, &mut rng);

    let (_, cache) = forward_batch(&w, &x, &adj, &offsets, true);
    let grads = backward(&w, cache.as_ref().expect("cache requested"), &adj, &offsets, &coef);
    let analytic: Vec<f64> = grads.param_slices().iter().flat_map(|s| s.iter().copied()).collect();

    let h = 1e-5;
    let mut worst: f64 = 0.0;
    let mut idx = 0;
    for a in 0..w.param_slices().len() {
        for k in 0..w.param_slices()[a].len() {
            let orig = w.param_slices()[a][k];
            w.param_slices_mut()[a][k] = orig + h;
            let lp = probe_loss(&w, &x, &adj, &offsets, &coef);
            w.param_slices_mut()[a][k] = orig - h;
            let lm = probe_loss(&w, &x, &adj, &offsets, &coef);
            w.param_slices_mut()[a][k] = orig;
            worst = worst.max(relative_error(analytic[idx], (lp - lm) / (2.0 * h)));
            idx += 1;
        }
    }
    worst
}
