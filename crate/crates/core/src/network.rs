//! Feed-forward network `u_theta`: SiLU activations between affine maps,
//! linear output layer. The network is evaluated three ways: plain `f64`
//! (metrics and the multiplier update), generic jets (closed-form checks
//! and 1D derivative metrics), and a fused tape path used for training
//! where whole affine rows become single graph nodes.

use std::io::{Read, Write};
use std::path::Path;

use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::autodiff::{Jet2, Scalar, Tape, Var};
use crate::sampling::PointSet;

#[derive(Debug, Error)]
pub enum NetworkError {
    #[error("network input has dimension {expected}, point has {got}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("depth must be at least 2 and width at least 1 (got L={depth}, h={width})")]
    BadArchitecture { depth: usize, width: usize },
    #[error("snapshot: {0}")]
    BadSnapshot(String),
    #[error("snapshot io: {0}")]
    Io(#[from] std::io::Error),
}

/// All weights and biases `{W_k, b_k}` of the network, stored flat in
/// layer order: `W_1` row-major, `b_1`, `W_2`, ... The flat layout is what
/// the optimizer state and the tape binding mirror.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    in_dim: usize,
    width: usize,
    depth: usize,
    seed: u64,
    pub theta: Vec<f64>,
}

/// Sigmoid-weighted linear unit, `x * sigmoid(x)`.
pub fn silu(x: f64) -> f64 {
    Scalar::silu(x)
}

impl MlpParams {
    /// Layer widths `[d, h, .., h, 1]` (`depth` affine maps).
    pub fn dims(&self) -> Vec<usize> {
        layer_dims(self.in_dim, self.width, self.depth)
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn param_count(&self) -> usize {
        self.theta.len()
    }

    /// Glorot-uniform initialization: weights of layer `k` drawn from
    /// `U(-a, a)` with `a = sqrt(6 / (d_k + d_{k+1}))`, biases zero.
    /// Deterministic for a given seed.
    pub fn init(depth: usize, width: usize, in_dim: usize, seed: u64) -> Result<Self, NetworkError> {
        if depth < 2 || width == 0 || in_dim == 0 {
            return Err(NetworkError::BadArchitecture { depth, width });
        }
        let dims = layer_dims(in_dim, width, depth);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut theta = Vec::with_capacity(flat_len(&dims));
        for k in 0..depth {
            let (n_in, n_out) = (dims[k], dims[k + 1]);
            let a = (6.0 / (n_in + n_out) as f64).sqrt();
            let dist = Uniform::new_inclusive(-a, a);
            theta.extend((0..n_out * n_in).map(|_| dist.sample(&mut rng)));
            theta.extend(std::iter::repeat(0.0).take(n_out));
        }
        Ok(MlpParams {
            in_dim,
            width,
            depth,
            seed,
            theta,
        })
    }

    /// Wrap an explicit parameter vector (tests and snapshot loading).
    pub fn from_theta(
        depth: usize,
        width: usize,
        in_dim: usize,
        theta: Vec<f64>,
    ) -> Result<Self, NetworkError> {
        let dims = layer_dims(in_dim, width, depth);
        let expected = flat_len(&dims);
        if theta.len() != expected {
            return Err(NetworkError::ShapeMismatch {
                expected,
                got: theta.len(),
            });
        }
        Ok(MlpParams {
            in_dim,
            width,
            depth,
            seed: 0,
            theta,
        })
    }

    /// Plain forward pass `C_L ∘ silu ∘ C_{L-1} ∘ .. ∘ silu ∘ C_1 (x)`.
    /// No activation after the last affine map.
    pub fn forward(&self, x: &[f64]) -> Result<f64, NetworkError> {
        if x.len() != self.in_dim {
            return Err(NetworkError::ShapeMismatch {
                expected: self.in_dim,
                got: x.len(),
            });
        }
        let mut cur = x.to_vec();
        let mut next = Vec::new();
        let dims = self.dims();
        let mut off = 0;
        for k in 0..self.depth {
            let (n_in, n_out) = (dims[k], dims[k + 1]);
            next.clear();
            for j in 0..n_out {
                let row = &self.theta[off + j * n_in..off + (j + 1) * n_in];
                let mut acc = 0.0;
                for (w, xv) in row.iter().zip(&cur) {
                    acc += w * xv;
                }
                acc += self.theta[off + n_out * n_in + j];
                next.push(if k + 1 < self.depth { silu(acc) } else { acc });
            }
            std::mem::swap(&mut cur, &mut next);
            off += n_out * (n_in + 1);
        }
        Ok(cur[0])
    }

    /// Forward over many points; scratch buffers are reused internally.
    pub fn forward_batch<'a>(
        &self,
        points: impl Iterator<Item = &'a [f64]>,
    ) -> Result<Vec<f64>, NetworkError> {
        points.map(|p| self.forward(p)).collect()
    }

    /// Forward over a whole point set, blocked so the inner loops run
    /// along the batch lane. Summation order matches [`MlpParams::forward`]
    /// exactly, so the two paths agree bit for bit.
    pub fn forward_many(&self, pts: &PointSet) -> Result<Vec<f64>, NetworkError> {
        if pts.dim() != self.in_dim {
            return Err(NetworkError::ShapeMismatch {
                expected: self.in_dim,
                got: pts.dim(),
            });
        }
        const B: usize = 32;
        let dims = self.dims();
        let widest = *dims.iter().max().unwrap();
        let n = pts.len();
        let mut out = vec![0.0; n];
        let mut cur = vec![0.0; widest * B];
        let mut next = vec![0.0; widest * B];
        let mut acc = [0.0; B];
        for bs in (0..n).step_by(B) {
            let nb = B.min(n - bs);
            for l in 0..nb {
                let p = pts.point(bs + l);
                for i in 0..self.in_dim {
                    cur[i * B + l] = p[i];
                }
            }
            let mut off = 0;
            for k in 0..self.depth {
                let (n_in, n_out) = (dims[k], dims[k + 1]);
                for j in 0..n_out {
                    acc[..nb].fill(0.0);
                    for i in 0..n_in {
                        let w = self.theta[off + j * n_in + i];
                        let row = &cur[i * B..i * B + nb];
                        for (a, x) in acc[..nb].iter_mut().zip(row) {
                            *a += w * x;
                        }
                    }
                    let b = self.theta[off + n_out * n_in + j];
                    if k + 1 < self.depth {
                        for l in 0..nb {
                            next[j * B + l] = silu(acc[l] + b);
                        }
                    } else {
                        for l in 0..nb {
                            next[j * B + l] = acc[l] + b;
                        }
                    }
                }
                std::mem::swap(&mut cur, &mut next);
                off += n_out * (n_in + 1);
            }
            out[bs..bs + nb].copy_from_slice(&cur[..nb]);
        }
        Ok(out)
    }

    /// Bind the parameters as tape leaves. Must be the first nodes on the
    /// tape; everything recorded afterwards differentiates back to them.
    pub fn bind<'t>(&self, tape: &'t Tape) -> BoundNet<'t> {
        let vars = tape.bind_params(&self.theta);
        debug_assert_eq!(vars.len(), self.theta.len());
        BoundNet {
            tape,
            dims: self.dims(),
        }
    }

    /// Write a snapshot: fixed little-endian header (depth, width, input
    /// dimension, seed, count) followed by the raw `f64` parameters.
    /// Round-trips bit-exactly.
    pub fn save(&self, path: &Path) -> Result<(), NetworkError> {
        let mut buf = Vec::with_capacity(36 + 8 * self.theta.len());
        buf.extend_from_slice(SNAPSHOT_MAGIC);
        buf.extend_from_slice(&(self.depth as u32).to_le_bytes());
        buf.extend_from_slice(&(self.width as u32).to_le_bytes());
        buf.extend_from_slice(&(self.in_dim as u32).to_le_bytes());
        buf.extend_from_slice(&self.seed.to_le_bytes());
        buf.extend_from_slice(&(self.theta.len() as u64).to_le_bytes());
        for v in &self.theta {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        std::fs::File::create(path)?.write_all(&buf)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, NetworkError> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        if bytes.len() < 36 || &bytes[..8] != SNAPSHOT_MAGIC {
            return Err(NetworkError::BadSnapshot("bad magic or truncated header".into()));
        }
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap()) as usize;
        let u64_at = |o: usize| u64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
        let (depth, width, in_dim) = (u32_at(8), u32_at(12), u32_at(16));
        let seed = u64_at(20);
        let count = u64_at(28) as usize;
        if bytes.len() != 36 + 8 * count {
            return Err(NetworkError::BadSnapshot(format!(
                "expected {} parameter bytes, found {}",
                8 * count,
                bytes.len() - 36
            )));
        }
        let theta: Vec<f64> = bytes[36..]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let mut p = MlpParams::from_theta(depth, width, in_dim, theta)
            .map_err(|e| NetworkError::BadSnapshot(e.to_string()))?;
        p.seed = seed;
        Ok(p)
    }
}

const SNAPSHOT_MAGIC: &[u8; 8] = b"MLPSNAP1";

fn layer_dims(in_dim: usize, width: usize, depth: usize) -> Vec<usize> {
    let mut dims = Vec::with_capacity(depth + 1);
    dims.push(in_dim);
    dims.extend(std::iter::repeat(width).take(depth.saturating_sub(1)));
    dims.push(1);
    dims
}

fn flat_len(dims: &[usize]) -> usize {
    dims.windows(2).map(|w| w[1] * (w[0] + 1)).sum()
}

/// Generic forward pass over any [`Scalar`]: the reference evaluation the
/// fused tape path is tested against, also usable with jet components.
pub fn forward_with<S: Scalar>(theta: &[S], dims: &[usize], x: &[S]) -> S {
    let depth = dims.len() - 1;
    let mut cur: Vec<S> = x.to_vec();
    let mut off = 0;
    for k in 0..depth {
        let (n_in, n_out) = (dims[k], dims[k + 1]);
        let mut next = Vec::with_capacity(n_out);
        for j in 0..n_out {
            let mut acc = theta[off] .constant_like(0.0);
            for i in 0..n_in {
                acc = acc + theta[off + j * n_in + i] * cur[i];
            }
            acc = acc + theta[off + n_out * n_in + j];
            next.push(if k + 1 < depth { acc.silu() } else { acc });
        }
        cur = next;
        off += n_out * (n_in + 1);
    }
    cur[0]
}

/// Jet-valued forward pass: seeds come from the caller, the network is
/// traversed once per direction.
pub fn forward_jets<S: Scalar>(theta: &[S], dims: &[usize], x: &[Jet2<S>]) -> Jet2<S> {
    let depth = dims.len() - 1;
    let mut cur: Vec<Jet2<S>> = x.to_vec();
    let mut off = 0;
    for k in 0..depth {
        let (n_in, n_out) = (dims[k], dims[k + 1]);
        let mut next = Vec::with_capacity(n_out);
        for j in 0..n_out {
            let mut acc = Jet2::constant(theta[off].constant_like(0.0));
            for i in 0..n_in {
                acc = acc + Jet2::constant(theta[off + j * n_in + i]) * cur[i];
            }
            acc = acc + Jet2::constant(theta[off + n_out * n_in + j]);
            next.push(if k + 1 < depth { acc.silu() } else { acc });
        }
        cur = next;
        off += n_out * (n_in + 1);
    }
    cur[0]
}

/// Network bound to a tape: parameters are leaves `0..P`, evaluations
/// append fused affine rows. One spatial pass yields the value and, per
/// requested direction, the first (and optionally second) directional
/// derivative — all as graph nodes.
pub struct BoundNet<'t> {
    tape: &'t Tape,
    dims: Vec<usize>,
}

/// Value and per-direction derivative nodes of one network evaluation.
pub struct NetJets<'t> {
    pub value: Var<'t>,
    pub d1: Vec<Var<'t>>,
    pub d2: Vec<Var<'t>>,
}

impl<'t> NetJets<'t> {
    /// View direction `i` as a jet (second-order passes only).
    pub fn jet(&self, i: usize) -> Jet2<Var<'t>> {
        Jet2 {
            v: self.value,
            d1: self.d1[i],
            d2: self.d2[i],
        }
    }
}

impl<'t> BoundNet<'t> {
    pub fn tape(&self) -> &'t Tape {
        self.tape
    }

    pub fn in_dim(&self) -> usize {
        self.dims[0]
    }

    /// Value-only evaluation.
    pub fn eval(&self, x: &[f64]) -> Var<'t> {
        self.eval_jets(x, &[], false).value
    }

    /// Evaluate at `x` carrying jets along each direction in `dirs`.
    /// With `second_order` the per-direction second derivatives are
    /// produced as well (enough for the Hessian trace, since directions
    /// never mix).
    pub fn eval_jets(&self, x: &[f64], dirs: &[&[f64]], second_order: bool) -> NetJets<'t> {
        assert_eq!(x.len(), self.dims[0], "input dimension mismatch");
        for d in dirs {
            assert_eq!(d.len(), self.dims[0], "direction dimension mismatch");
        }
        let depth = self.dims.len() - 1;
        let nd = dirs.len();
        let mut w = crate::autodiff::tape::TapeWriter::new(self.tape);

        // Seed spans: point coordinates, then each direction's components.
        let x0 = push_consts(&mut w, x);
        let dir_spans: Vec<u32> = dirs.iter().map(|d| push_consts(&mut w, d)).collect();

        let mut off = 0u32; // parameter offset of the current layer
        let mut v_span = x0;
        let mut d1_spans = dir_spans;
        let mut d2_spans: Vec<u32> = Vec::new(); // empty until after layer 1
        let mut n_in = self.dims[0] as u32;

        for k in 0..depth {
            let n_out = self.dims[k + 1] as u32;
            let w_base = off;
            let b_base = off + n_out * n_in;

            // Affine map: rows of W are contiguous parameter spans.
            let av = first_id(&mut w, n_out, |w, j| {
                w.affine_dot(w_base + j * n_in, v_span, n_in, b_base + j)
            });
            let ad1: Vec<u32> = d1_spans
                .iter()
                .map(|&s| first_id(&mut w, n_out, |w, j| w.dot(w_base + j * n_in, s, n_in)))
                .collect();
            let ad2: Vec<u32> = if second_order && nd > 0 {
                if k == 0 {
                    // Curvature of the seeds is zero; an affine map keeps it so.
                    (0..nd)
                        .map(|_| first_id(&mut w, n_out, |w, _| w.constant(0.0)))
                        .collect()
                } else {
                    d2_spans
                        .iter()
                        .map(|&s| first_id(&mut w, n_out, |w, j| w.dot(w_base + j * n_in, s, n_in)))
                        .collect()
                }
            } else {
                Vec::new()
            };

            if k + 1 < depth {
                v_span = first_id(&mut w, n_out, |w, j| w.silu(av + j));
                d1_spans = ad1
                    .iter()
                    .map(|&s| first_id(&mut w, n_out, |w, j| w.silu_d1(av + j, s + j)))
                    .collect();
                if second_order && nd > 0 {
                    d2_spans = ad1
                        .iter()
                        .zip(&ad2)
                        .map(|(&s1, &s2)| {
                            first_id(&mut w, n_out, |w, j| w.silu_d2(av + j, s1 + j, s2 + j))
                        })
                        .collect();
                }
            } else {
                v_span = av;
                d1_spans = ad1;
                d2_spans = ad2;
            }
            off += n_out * (n_in + 1);
            n_in = n_out;
        }

        NetJets {
            value: w.var(v_span),
            d1: d1_spans.iter().map(|&s| w.var(s)).collect(),
            d2: d2_spans.iter().map(|&s| w.var(s)).collect(),
        }
    }

    /// Gradient of the network with respect to the point, as nodes.
    pub fn spatial_gradient(&self, x: &[f64]) -> Vec<Var<'t>> {
        let dirs = coordinate_dirs(x.len());
        let refs: Vec<&[f64]> = dirs.iter().map(|d| d.as_slice()).collect();
        self.eval_jets(x, &refs, false).d1
    }

    /// Laplacian of the network at `x` as one node: the trace of the
    /// Hessian assembled from per-coordinate jets.
    pub fn laplacian(&self, x: &[f64]) -> Var<'t> {
        let dirs = coordinate_dirs(x.len());
        let refs: Vec<&[f64]> = dirs.iter().map(|d| d.as_slice()).collect();
        let jets = self.eval_jets(x, &refs, true);
        let mut acc = jets.d2[0];
        for &d in &jets.d2[1..] {
            acc = acc + d;
        }
        acc
    }
}

pub(crate) fn coordinate_dirs(d: usize) -> Vec<Vec<f64>> {
    (0..d)
        .map(|i| {
            let mut e = vec![0.0; d];
            e[i] = 1.0;
            e
        })
        .collect()
}

fn push_consts(w: &mut crate::autodiff::tape::TapeWriter, vals: &[f64]) -> u32 {
    let mut first = 0;
    for (i, &v) in vals.iter().enumerate() {
        let id = w.constant(v);
        if i == 0 {
            first = id;
        }
    }
    first
}

fn first_id(
    w: &mut crate::autodiff::tape::TapeWriter,
    n: u32,
    mut f: impl FnMut(&mut crate::autodiff::tape::TapeWriter, u32) -> u32,
) -> u32 {
    let mut first = 0;
    for j in 0..n {
        let id = f(w, j);
        if j == 0 {
            first = id;
        }
    }
    first
}

/// Hard boundary conditioning on the unit ball:
/// `(1 - |x|^2) u_theta(x) + |x|^2 u*(x)`. Exact on `|x| = 1` for any
/// parameters.
pub fn forward_hard_bc(
    params: &MlpParams,
    x: &[f64],
    exact_boundary_extension: impl Fn(&[f64]) -> f64,
) -> Result<f64, NetworkError> {
    let r2: f64 = x.iter().map(|v| v * v).sum();
    Ok((1.0 - r2) * params.forward(x)? + r2 * exact_boundary_extension(x))
}
