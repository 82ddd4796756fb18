//! Exact derivatives of a fully connected tanh network.
//!
//! The forward pass carries, per input coordinate, the directional first and
//! second derivative alongside the value. Affine layers act linearly on all
//! channels; the elementwise tanh mixes them with its own derivatives, so
//! the propagated diagonal second derivatives are exact, not approximate.
//! Parameter gradients come from reverse accumulation over that same
//! computation, which keeps gradients of losses containing `u`, `du/dx_i`
//! and `d2u/dx_i2` exact as well.
//!
//! Batched entry points stack all channels of all points into one matrix per
//! layer so the heavy work is a handful of GEMM calls; the per-point
//! summation order is fixed, so results are bit-reproducible within a build.

use ndarray::{s, Array1, Array2, Axis};
use rand::Rng;

use crate::{Error, Point, Result};

/// Network output value plus derivatives with respect to the inputs.
///
/// `backward` also accepts this shape as the adjoint of a scalar loss with
/// respect to the same three fields.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalBundle {
    pub value: f64,
    /// du/dx_i per input coordinate.
    pub input_grad: Vec<f64>,
    /// d2u/dx_i2 per input coordinate (diagonal of the Hessian).
    pub input_hess_diag: Vec<f64>,
}

impl EvalBundle {
    pub fn zeros(dim: usize) -> Self {
        EvalBundle {
            value: 0.0,
            input_grad: vec![0.0; dim],
            input_hess_diag: vec![0.0; dim],
        }
    }
}

/// Which derivative channels a batched forward pass carries. Second
/// derivatives are propagated through the first-derivative channels, so
/// there is no hessian-without-gradient variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChannelSet {
    /// Values only; bundles report zero derivatives.
    Value,
    /// Values and input gradients.
    Grad,
    /// Values, input gradients and diagonal second derivatives.
    Full,
}

impl ChannelSet {
    fn rows_per_point(self, d: usize) -> usize {
        match self {
            ChannelSet::Value => 1,
            ChannelSet::Grad => 1 + d,
            ChannelSet::Full => 1 + 2 * d,
        }
    }

    fn has_grad(self) -> bool {
        !matches!(self, ChannelSet::Value)
    }

    fn has_hess(self) -> bool {
        matches!(self, ChannelSet::Full)
    }
}

/// Fully connected scalar-output network, tanh hidden activations, identity
/// output, all arithmetic in f64.
#[derive(Debug, Clone)]
pub struct Network {
    widths: Vec<usize>,
    /// weights[l] has shape [widths[l+1], widths[l]].
    weights: Vec<Array2<f64>>,
    biases: Vec<Array1<f64>>,
}

fn validate_widths(widths: &[usize]) -> Result<()> {
    if widths.len() < 2 {
        return Err(Error::Config(format!(
            "network needs at least input and output widths, got {widths:?}"
        )));
    }
    if widths.iter().any(|&w| w == 0) {
        return Err(Error::Config(format!("zero width in {widths:?}")));
    }
    if *widths.last().unwrap() != 1 {
        return Err(Error::Config(format!(
            "output width must be 1, got {widths:?}"
        )));
    }
    Ok(())
}

impl Network {
    /// Glorot-uniform weights drawn layer by layer in row-major order,
    /// biases zero. The draw order is part of the reproducibility contract.
    pub fn glorot<R: Rng>(widths: &[usize], rng: &mut R) -> Result<Self> {
        validate_widths(widths)?;
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for l in 0..widths.len() - 1 {
            let (fan_in, fan_out) = (widths[l], widths[l + 1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let mut w = Array2::zeros((fan_out, fan_in));
            for o in 0..fan_out {
                for i in 0..fan_in {
                    w[[o, i]] = rng.random_range(-limit..limit);
                }
            }
            weights.push(w);
            biases.push(Array1::zeros(fan_out));
        }
        Ok(Network {
            widths: widths.to_vec(),
            weights,
            biases,
        })
    }

    /// Multiply the input-layer weights by `scale` and move each first-layer
    /// unit's tanh transition onto its anchor point (`b_j = -w_j . a_j`).
    /// With plain Glorot weights every unit varies on an O(1) input scale;
    /// a gradient method with a small step size then needs thousands of
    /// epochs just to grow the weight magnitudes that sharp solution
    /// features require. Scaling up front puts sharp basis functions in the
    /// span from the start, and anchoring spreads them over the region of
    /// interest instead of stacking their active zones near the origin.
    /// One anchor per first-hidden-layer unit.
    pub fn spread_input_layer(&mut self, scale: f64, anchors: &[Point]) -> Result<()> {
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::Config(format!(
                "input-layer scale must be positive, got {scale}"
            )));
        }
        let (dim, units) = (self.widths[0], self.widths[1]);
        if anchors.len() != units || anchors.iter().any(|a| a.len() != dim) {
            return Err(Error::Config(format!(
                "need {units} anchors of dimension {dim}"
            )));
        }
        self.weights[0] *= scale;
        for (j, anchor) in anchors.iter().enumerate() {
            self.biases[0][j] = -(0..dim).map(|i| self.weights[0][[j, i]] * anchor[i]).sum::<f64>();
        }
        Ok(())
    }

    /// All-zero parameters; the forward map is identically zero.
    pub fn zeros(widths: &[usize]) -> Result<Self> {
        validate_widths(widths)?;
        let weights = (0..widths.len() - 1)
            .map(|l| Array2::zeros((widths[l + 1], widths[l])))
            .collect();
        let biases = (0..widths.len() - 1)
            .map(|l| Array1::zeros(widths[l + 1]))
            .collect();
        Ok(Network {
            widths: widths.to_vec(),
            weights,
            biases,
        })
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn input_dim(&self) -> usize {
        self.widths[0]
    }

    pub fn param_count(&self) -> usize {
        self.widths
            .windows(2)
            .map(|w| w[0] * w[1] + w[1])
            .sum()
    }

    /// Flatten parameters layer-major, weights (row-major) before biases.
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in 0..self.weights.len() {
            out.extend(self.weights[l].iter());
            out.extend(self.biases[l].iter());
        }
        out
    }

    /// Inverse of [`params`](Self::params); the length must match exactly.
    pub fn set_params(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(Error::Contract(format!(
                "parameter vector has length {}, network needs {}",
                flat.len(),
                self.param_count()
            )));
        }
        let mut k = 0;
        for l in 0..self.weights.len() {
            for w in self.weights[l].iter_mut() {
                *w = flat[k];
                k += 1;
            }
            for b in self.biases[l].iter_mut() {
                *b = flat[k];
                k += 1;
            }
        }
        Ok(())
    }

    /// Value and exact input derivatives at a single point.
    pub fn evaluate(&self, x: &[f64]) -> Result<EvalBundle> {
        let d = self.input_dim();
        if x.len() != d {
            return Err(Error::Contract(format!(
                "point has dimension {}, network expects {}",
                x.len(),
                d
            )));
        }
        // Channel layout per layer: value, then d first and d second
        // directional derivatives, one Vec each.
        let mut val = x.to_vec();
        let mut grad: Vec<Vec<f64>> = (0..d)
            .map(|i| (0..d).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        let mut hess: Vec<Vec<f64>> = vec![vec![0.0; d]; d];

        let n_affine = self.weights.len();
        for l in 0..n_affine {
            let w = &self.weights[l];
            let b = &self.biases[l];
            let out_w = w.nrows();
            let matvec = |v: &[f64]| -> Vec<f64> {
                (0..out_w)
                    .map(|o| {
                        let row = w.row(o);
                        row.iter().zip(v).map(|(a, b)| a * b).sum::<f64>()
                    })
                    .collect()
            };
            let mut zv: Vec<f64> = matvec(&val);
            for (o, z) in zv.iter_mut().enumerate() {
                *z += b[o];
            }
            let mut zg: Vec<Vec<f64>> = grad.iter().map(|g| matvec(g)).collect();
            let mut zh: Vec<Vec<f64>> = hess.iter().map(|h| matvec(h)).collect();

            if l < n_affine - 1 {
                for o in 0..out_w {
                    let t = zv[o].tanh();
                    let s = 1.0 - t * t;
                    zv[o] = t;
                    for i in 0..d {
                        let g = zg[i][o];
                        zg[i][o] = s * g;
                        zh[i][o] = s * zh[i][o] - 2.0 * t * s * g * g;
                    }
                }
            }
            val = zv;
            grad = zg;
            hess = zh;
        }

        Ok(EvalBundle {
            value: val[0],
            input_grad: grad.into_iter().map(|g| g[0]).collect(),
            input_hess_diag: hess.into_iter().map(|h| h[0]).collect(),
        })
    }

    /// Values only, batched; used where derivatives are not needed.
    pub fn forward_values(&self, points: &[Point]) -> Result<Vec<f64>> {
        let d = self.input_dim();
        let n = points.len();
        let mut a = Array2::zeros((n, d));
        for (k, p) in points.iter().enumerate() {
            if p.len() != d {
                return Err(Error::Contract(format!(
                    "point {k} has dimension {}, network expects {d}",
                    p.len()
                )));
            }
            for j in 0..d {
                a[[k, j]] = p[j];
            }
        }
        let n_affine = self.weights.len();
        for l in 0..n_affine {
            let mut z = a.dot(&self.weights[l].t());
            z += &self.biases[l];
            if l < n_affine - 1 {
                z.mapv_inplace(f64::tanh);
            }
            a = z;
        }
        Ok(a.column(0).to_vec())
    }

    /// Forward pass over a batch keeping every intermediate needed for
    /// [`BatchTape::backward`], with all derivative channels.
    pub fn forward_batch(&self, points: &[Point]) -> Result<BatchTape<'_>> {
        self.forward_batch_on(ChannelSet::Full, points)
    }

    /// Forward pass carrying only the requested channels; cuts the row
    /// count from `(1+2d)n` to `n` or `(1+d)n` when derivatives are not
    /// needed, which matters for wide batches in high dimension.
    pub fn forward_batch_on(
        &self,
        ch: ChannelSet,
        points: &[Point],
    ) -> Result<BatchTape<'_>> {
        let d = self.input_dim();
        let n = points.len();
        if n == 0 {
            return Err(Error::Contract("empty point batch".into()));
        }
        let rows = n * ch.rows_per_point(d);
        let mut a0 = Array2::zeros((rows, d));
        for (k, p) in points.iter().enumerate() {
            if p.len() != d {
                return Err(Error::Contract(format!(
                    "point {k} has dimension {}, network expects {d}",
                    p.len()
                )));
            }
            for j in 0..d {
                a0[[k, j]] = p[j];
            }
            if ch.has_grad() {
                // gradient channel i starts as the unit vector e_i
                for i in 0..d {
                    a0[[n + i * n + k, i]] = 1.0;
                }
            }
        }

        let n_affine = self.weights.len();
        let mut acts: Vec<Array2<f64>> = Vec::with_capacity(n_affine + 1);
        let mut pres: Vec<Array2<f64>> = Vec::with_capacity(n_affine.saturating_sub(1));
        acts.push(a0);
        for l in 0..n_affine {
            let a = acts.last().unwrap();
            let mut z = to_standard(a.dot(&self.weights[l].t()));
            {
                let mut v = z.slice_mut(s![0..n, ..]);
                v += &self.biases[l];
            }
            if l < n_affine - 1 {
                let post = activate_stacked(&z, n, d, ch);
                pres.push(z);
                acts.push(post);
            } else {
                acts.push(z);
            }
        }
        Ok(BatchTape {
            net: self,
            n,
            d,
            ch,
            acts,
            pres,
        })
    }

    /// Loss value and the flat parameter gradient for a scalar loss defined
    /// on the evaluation bundles of a point batch. The closure returns the
    /// loss together with the adjoint of the loss with respect to each
    /// bundle, in batch order.
    pub fn parameter_gradient<L>(&self, points: &[Point], loss: L) -> Result<(f64, Vec<f64>)>
    where
        L: FnOnce(&[EvalBundle]) -> (f64, Vec<EvalBundle>),
    {
        self.parameter_gradient_on(ChannelSet::Full, points, loss)
    }

    /// [`parameter_gradient`](Self::parameter_gradient) over a reduced
    /// channel set; the loss must not touch channels that are not carried
    /// (their bundle fields read zero and their adjoints must stay zero).
    pub fn parameter_gradient_on<L>(
        &self,
        ch: ChannelSet,
        points: &[Point],
        loss: L,
    ) -> Result<(f64, Vec<f64>)>
    where
        L: FnOnce(&[EvalBundle]) -> (f64, Vec<EvalBundle>),
    {
        let tape = self.forward_batch_on(ch, points)?;
        let bundles = tape.bundles();
        let (value, adjoints) = loss(&bundles);
        let grad = tape.backward(&adjoints)?;
        Ok((value, grad))
    }

    /// Write the checkpoint: a short header, the widths, then one parameter
    /// per line in Rust's shortest round-trip decimal form.
    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        use std::io::Write;
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(f, "fipinn-network v1")?;
        let widths: Vec<String> = self.widths.iter().map(|w| w.to_string()).collect();
        writeln!(f, "widths {}", widths.join(" "))?;
        for p in self.params() {
            writeln!(f, "{p}")?;
        }
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut lines = text.lines();
        match lines.next() {
            Some("fipinn-network v1") => {}
            other => {
                return Err(Error::Config(format!(
                    "unrecognized checkpoint header {other:?}"
                )))
            }
        }
        let widths_line = lines
            .next()
            .ok_or_else(|| Error::Config("checkpoint missing widths line".into()))?;
        let widths: Vec<usize> = widths_line
            .strip_prefix("widths ")
            .ok_or_else(|| Error::Config("checkpoint missing widths prefix".into()))?
            .split_whitespace()
            .map(|t| {
                t.parse::<usize>()
                    .map_err(|e| Error::Config(format!("bad width {t:?}: {e}")))
            })
            .collect::<Result<_>>()?;
        let mut net = Network::zeros(&widths)?;
        let params: Vec<f64> = lines
            .map(|t| {
                t.parse::<f64>()
                    .map_err(|e| Error::Config(format!("bad parameter {t:?}: {e}")))
            })
            .collect::<Result<_>>()?;
        if params.len() != net.param_count() {
            return Err(Error::Config(format!(
                "checkpoint has {} parameters, widths {widths:?} need {}",
                params.len(),
                net.param_count()
            )));
        }
        net.set_params(&params)?;
        Ok(net)
    }
}

/// Force row-major contiguous storage. GEMM results are usually already
/// standard, but ndarray returns a column-major array when the inner
/// dimension is 1 (e.g. the first layer of a 1-D-input network), and the
/// stacked-channel kernels below index raw slices in row-major order.
fn to_standard(z: Array2<f64>) -> Array2<f64> {
    if z.is_standard_layout() {
        z
    } else {
        let shape = (z.nrows(), z.ncols());
        let v: Vec<f64> = z.iter().copied().collect();
        Array2::from_shape_vec(shape, v).expect("element count preserved")
    }
}

/// Apply tanh to the value block and propagate the derivative channel
/// blocks that are carried. Row layout: `[0,n)` values, `[n(1+i), n(2+i))`
/// gradient channel i, `[n(1+d+i), n(2+d+i))` second-derivative channel i.
fn activate_stacked(z: &Array2<f64>, n: usize, d: usize, ch: ChannelSet) -> Array2<f64> {
    let w = z.ncols();
    let rows = z.nrows();
    let zs = z.as_slice().expect("stacked matrix is standard layout");
    let mut out = vec![0.0; zs.len()];
    let mut t = vec![0.0; w];
    let mut sp = vec![0.0; w];
    for k in 0..n {
        let vb = k * w;
        for j in 0..w {
            let tv = zs[vb + j].tanh();
            t[j] = tv;
            sp[j] = 1.0 - tv * tv;
            out[vb + j] = tv;
        }
        if ch.has_hess() {
            for i in 0..d {
                let gb = (n + i * n + k) * w;
                let hb = (n * (1 + d) + i * n + k) * w;
                for j in 0..w {
                    let g = zs[gb + j];
                    out[gb + j] = sp[j] * g;
                    out[hb + j] = sp[j] * zs[hb + j] - 2.0 * t[j] * sp[j] * g * g;
                }
            }
        } else if ch.has_grad() {
            for i in 0..d {
                let gb = (n + i * n + k) * w;
                for j in 0..w {
                    out[gb + j] = sp[j] * zs[gb + j];
                }
            }
        }
    }
    Array2::from_shape_vec((rows, w), out).expect("shape preserved")
}

/// Saved forward state of one batch; produces bundles and, given bundle
/// adjoints, the flat parameter gradient.
pub struct BatchTape<'n> {
    net: &'n Network,
    n: usize,
    d: usize,
    ch: ChannelSet,
    /// acts[0] is the stacked input, acts[l+1] the post-activation output of
    /// affine layer l (for the last layer, the raw output).
    acts: Vec<Array2<f64>>,
    /// pre-activation outputs of the hidden affine layers, in layer order.
    pres: Vec<Array2<f64>>,
}

impl BatchTape<'_> {
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Point k's outputs; channels the batch does not carry read zero.
    pub fn bundle(&self, k: usize) -> EvalBundle {
        let (n, d) = (self.n, self.d);
        let out = self.acts.last().unwrap();
        let mut b = EvalBundle::zeros(d);
        b.value = out[[k, 0]];
        if self.ch.has_grad() {
            for i in 0..d {
                b.input_grad[i] = out[[n + i * n + k, 0]];
            }
        }
        if self.ch.has_hess() {
            for i in 0..d {
                b.input_hess_diag[i] = out[[n * (1 + d) + i * n + k, 0]];
            }
        }
        b
    }

    pub fn bundles(&self) -> Vec<EvalBundle> {
        (0..self.n).map(|k| self.bundle(k)).collect()
    }

    /// Reverse pass. `adjoints[k]` holds the partial derivatives of the loss
    /// with respect to point k's bundle fields. Returns the gradient in the
    /// flat layout of [`Network::params`].
    pub fn backward(&self, adjoints: &[EvalBundle]) -> Result<Vec<f64>> {
        let (n, d) = (self.n, self.d);
        if adjoints.len() != n {
            return Err(Error::Contract(format!(
                "{} adjoints for a batch of {n}",
                adjoints.len()
            )));
        }
        let rows = n * self.ch.rows_per_point(d);
        let mut adj = Array2::zeros((rows, 1));
        for (k, a) in adjoints.iter().enumerate() {
            if a.input_grad.len() != d || a.input_hess_diag.len() != d {
                return Err(Error::Contract(format!(
                    "adjoint {k} has dimension {}, batch has {d}",
                    a.input_grad.len()
                )));
            }
            adj[[k, 0]] = a.value;
            for i in 0..d {
                if self.ch.has_grad() {
                    adj[[n + i * n + k, 0]] = a.input_grad[i];
                } else if a.input_grad[i] != 0.0 {
                    return Err(Error::Contract(format!(
                        "adjoint {k} uses the gradient channel, which this batch does not carry"
                    )));
                }
                if self.ch.has_hess() {
                    adj[[n * (1 + d) + i * n + k, 0]] = a.input_hess_diag[i];
                } else if a.input_hess_diag[i] != 0.0 {
                    return Err(Error::Contract(format!(
                        "adjoint {k} uses the hessian channel, which this batch does not carry"
                    )));
                }
            }
        }

        let n_affine = self.net.weights.len();
        let mut w_grads: Vec<Array2<f64>> = Vec::with_capacity(n_affine);
        let mut b_grads: Vec<Array1<f64>> = Vec::with_capacity(n_affine);
        for l in (0..n_affine).rev() {
            // adj is the adjoint of the pre-activation output of layer l
            let a_in = &self.acts[l];
            w_grads.push(adj.t().dot(a_in));
            b_grads.push(adj.slice(s![0..n, ..]).sum_axis(Axis(0)));
            if l > 0 {
                let post = to_standard(adj.dot(&self.weights_of(l)));
                adj = self.deactivate_adjoint(post, l - 1);
            }
        }
        w_grads.reverse();
        b_grads.reverse();

        let mut flat = Vec::with_capacity(self.net.param_count());
        for l in 0..n_affine {
            flat.extend(w_grads[l].iter());
            flat.extend(b_grads[l].iter());
        }
        Ok(flat)
    }

    fn weights_of(&self, l: usize) -> ndarray::ArrayView2<'_, f64> {
        self.net.weights[l].view()
    }

    /// Pull an adjoint back through the tanh of hidden layer `h` (output of
    /// affine layer h), from post-activation to pre-activation channels.
    fn deactivate_adjoint(&self, post_adj: Array2<f64>, h: usize) -> Array2<f64> {
        let (n, d) = (self.n, self.d);
        let pre = &self.pres[h];
        let act = &self.acts[h + 1];
        let w = pre.ncols();
        let ps = pre.as_slice().expect("standard layout");
        let ts = act.as_slice().expect("standard layout");
        let rows = n * self.ch.rows_per_point(d);
        // raw-vec order below assumes row-major; callers standardize first
        debug_assert!(post_adj.is_standard_layout());
        let mut outv = post_adj.into_raw_vec_and_offset().0;
        let mut acc = vec![0.0; w];
        for k in 0..n {
            let vb = k * w;
            for j in 0..w {
                let t = ts[vb + j];
                let s = 1.0 - t * t;
                acc[j] = s * outv[vb + j];
            }
            if self.ch.has_hess() {
                for i in 0..d {
                    let gb = (n + i * n + k) * w;
                    let hb = (n * (1 + d) + i * n + k) * w;
                    for j in 0..w {
                        let t = ts[vb + j];
                        let s = 1.0 - t * t;
                        let d2 = -2.0 * t * s;
                        let d3 = s * (6.0 * t * t - 2.0);
                        let g = ps[gb + j];
                        let hh = ps[hb + j];
                        let ag = outv[gb + j];
                        let ah = outv[hb + j];
                        acc[j] += d2 * g * ag + (d3 * g * g + d2 * hh) * ah;
                        outv[gb + j] = s * ag + 2.0 * d2 * g * ah;
                        outv[hb + j] = s * ah;
                    }
                }
            } else if self.ch.has_grad() {
                for i in 0..d {
                    let gb = (n + i * n + k) * w;
                    for j in 0..w {
                        let t = ts[vb + j];
                        let s = 1.0 - t * t;
                        let ag = outv[gb + j];
                        acc[j] += -2.0 * t * s * ps[gb + j] * ag;
                        outv[gb + j] = s * ag;
                    }
                }
            }
            outv[vb..vb + w].copy_from_slice(&acc);
        }
        Array2::from_shape_vec((rows, w), outv).expect("shape preserved")
    }
}
