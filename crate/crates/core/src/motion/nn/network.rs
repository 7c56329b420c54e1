//! Small convolutional regressor with hand-written backpropagation.
//!
//! Layout: four 3x3 stride-2 convolutions with rectifiers, adaptive average
//! pooling to `pool_side x pool_side`, dropout, then three fully connected
//! layers ending in two outputs. Activations are row-major `[c][y][x]`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct NetConfig {
    pub in_channels: usize,
    pub input_side: usize,
    pub conv_channels: [usize; 4],
    pub pool_side: usize,
    pub fc_hidden: [usize; 2],
    pub dropout: f64,
}

impl Default for NetConfig {
    fn default() -> Self {
        NetConfig {
            in_channels: 4,
            input_side: 64,
            conv_channels: [16, 32, 64, 64],
            pool_side: 2,
            fc_hidden: [64, 32],
            dropout: 0.5,
        }
    }
}

pub const OUTPUTS: usize = 2;

impl NetConfig {
    pub fn validate(&self) -> Result<()> {
        if self.in_channels == 0 || self.input_side < 2 || self.pool_side == 0 {
            return Err(Error::InvalidConfig(format!(
                "network needs channels >= 1, side >= 2, pool >= 1: {self:?}"
            )));
        }
        if self.conv_channels.contains(&0) || self.fc_hidden.contains(&0) {
            return Err(Error::InvalidConfig("layer widths must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::InvalidConfig(format!(
                "dropout must lie in [0, 1), got {}",
                self.dropout
            )));
        }
        Ok(())
    }

    /// Spatial side after each convolution.
    pub fn conv_sides(&self) -> [usize; 4] {
        let mut side = self.input_side;
        std::array::from_fn(|_| {
            side = conv_out(side);
            side
        })
    }

    pub fn feature_len(&self) -> usize {
        self.conv_channels[3] * self.pool_side * self.pool_side
    }

    /// `(name, shape)` of every parameter tensor in storage order.
    pub fn tensor_shapes(&self) -> Vec<(String, Vec<usize>)> {
        let mut out = Vec::new();
        let mut cin = self.in_channels;
        for (i, &cout) in self.conv_channels.iter().enumerate() {
            out.push((format!("conv{}.weight", i + 1), vec![cout, cin, 3, 3]));
            out.push((format!("conv{}.bias", i + 1), vec![cout]));
            cin = cout;
        }
        let widths = [
            self.feature_len(),
            self.fc_hidden[0],
            self.fc_hidden[1],
            OUTPUTS,
        ];
        for i in 0..3 {
            out.push((
                format!("fc{}.weight", i + 1),
                vec![widths[i + 1], widths[i]],
            ));
            out.push((format!("fc{}.bias", i + 1), vec![widths[i + 1]]));
        }
        out
    }

    pub fn input_len(&self) -> usize {
        self.in_channels * self.input_side * self.input_side
    }
}

fn conv_out(side: usize) -> usize {
    (side + 2 - 3) / 2 + 1
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(name: &str, shape: &[usize]) -> Self {
        Tensor {
            name: name.to_string(),
            shape: shape.to_vec(),
            data: vec![0.0; shape.iter().product()],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub cfg: NetConfig,
    /// conv1.w, conv1.b, ..., conv4.b, fc1.w, fc1.b, ..., fc3.b
    pub params: Vec<Tensor>,
}

/// Per-sample intermediate values kept for the backward pass.
pub struct Cache {
    cols: Vec<Vec<f64>>,
    conv_out: Vec<Vec<f64>>,
    pooled: Vec<f64>,
    mask: Vec<f64>,
    fc_in: Vec<Vec<f64>>,
    fc_out: Vec<Vec<f64>>,
}

impl Network {
    /// He-normal initialization from a seed; biases start at zero.
    pub fn new(cfg: NetConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let shapes = cfg.tensor_shapes();
        let last = shapes.len() - 2;
        let params = shapes
            .iter()
            .enumerate()
            .map(|(i, (name, shape))| {
                let mut t = Tensor::zeros(name, shape);
                if shape.len() > 1 {
                    let fan_in: usize = shape[1..].iter().product();
                    let gain = if i == last { 1.0 } else { 2.0 };
                    let normal = Normal::new(0.0, (gain / fan_in as f64).sqrt()).unwrap();
                    t.data.iter_mut().for_each(|v| *v = normal.sample(&mut rng));
                }
                t
            })
            .collect();
        Ok(Network { cfg, params })
    }

    pub fn from_tensors(cfg: NetConfig, params: Vec<Tensor>) -> Result<Self> {
        cfg.validate()?;
        let shapes = cfg.tensor_shapes();
        if shapes.len() != params.len() {
            return Err(Error::ShapeMismatch(format!(
                "expected {} tensors, found {}",
                shapes.len(),
                params.len()
            )));
        }
        for ((name, shape), t) in shapes.iter().zip(&params) {
            if *name != t.name
                || *shape != t.shape
                || t.data.len() != shape.iter().product::<usize>()
            {
                return Err(Error::ShapeMismatch(format!(
                    "tensor {} {:?} does not match {name} {shape:?}",
                    t.name, t.shape
                )));
            }
            if t.data.iter().any(|v| !v.is_finite()) {
                return Err(Error::ShapeMismatch(format!(
                    "tensor {name} has non-finite values"
                )));
            }
        }
        Ok(Network { cfg, params })
    }

    pub fn zero_grads(&self) -> Vec<Vec<f64>> {
        self.params
            .iter()
            .map(|t| vec![0.0; t.data.len()])
            .collect()
    }

    /// Draws an inverted-dropout mask over the pooled features.
    pub fn dropout_mask(&self, rng: &mut impl Rng) -> Vec<f64> {
        let p = self.cfg.dropout;
        let keep = 1.0 / (1.0 - p);
        (0..self.cfg.feature_len())
            .map(|_| {
                if p > 0.0 && rng.gen::<f64>() < p {
                    0.0
                } else {
                    keep
                }
            })
            .collect()
    }

    /// Inference forward pass (dropout disabled).
    pub fn predict(&self, input: &[f64]) -> Result<[f64; OUTPUTS]> {
        if input.len() != self.cfg.input_len() {
            return Err(Error::ShapeMismatch(format!(
                "input has {} values, network expects {}",
                input.len(),
                self.cfg.input_len()
            )));
        }
        let (y, _) = self.forward(input, None);
        Ok(y)
    }

    /// Forward pass; `mask` enables dropout with the given multipliers.
    pub fn forward(&self, input: &[f64], mask: Option<&[f64]>) -> ([f64; OUTPUTS], Cache) {
        let cfg = &self.cfg;
        let sides = cfg.conv_sides();
        let mut cols = Vec::with_capacity(4);
        let mut conv_out = Vec::with_capacity(4);
        let mut x = input.to_vec();
        let (mut cin, mut side) = (cfg.in_channels, cfg.input_side);
        for l in 0..4 {
            let cout = cfg.conv_channels[l];
            let so = sides[l];
            let c = im2col(&x, cin, side, so);
            let k = cin * 9;
            let p = so * so;
            let mut z = vec![0.0; cout * p];
            gemm(
                cout,
                k,
                p,
                &self.params[2 * l].data,
                false,
                &c,
                false,
                &mut z,
                0.0,
            );
            let bias = &self.params[2 * l + 1].data;
            for (o, row) in z.chunks_mut(p).enumerate() {
                for v in row.iter_mut() {
                    *v = (*v + bias[o]).max(0.0);
                }
            }
            cols.push(c);
            conv_out.push(z.clone());
            x = z;
            cin = cout;
            side = so;
        }
        let pooled = adaptive_pool(&x, cin, side, cfg.pool_side);
        let mask_vec = mask.map(|m| m.to_vec()).unwrap_or_default();
        let mut h: Vec<f64> = match mask {
            Some(m) => pooled.iter().zip(m).map(|(a, b)| a * b).collect(),
            None => pooled.clone(),
        };
        let mut fc_in = Vec::with_capacity(3);
        let mut fc_out = Vec::with_capacity(3);
        for l in 0..3 {
            let w = &self.params[8 + 2 * l];
            let b = &self.params[9 + 2 * l].data;
            let (rows, cols_n) = (w.shape[0], w.shape[1]);
            let mut out = b.clone();
            for (r, o) in out.iter_mut().enumerate() {
                let row = &w.data[r * cols_n..(r + 1) * cols_n];
                *o += row.iter().zip(&h).map(|(a, b)| a * b).sum::<f64>();
            }
            if l < 2 {
                out.iter_mut().for_each(|v| *v = v.max(0.0));
            }
            debug_assert_eq!(out.len(), rows);
            fc_in.push(h);
            fc_out.push(out.clone());
            h = out;
        }
        let y = [h[0], h[1]];
        (
            y,
            Cache {
                cols,
                conv_out,
                pooled,
                mask: mask_vec,
                fc_in,
                fc_out,
            },
        )
    }

    /// Accumulates parameter gradients for output gradient `dy` into `grads`.
    pub fn backward(&self, cache: &Cache, dy: [f64; OUTPUTS], grads: &mut [Vec<f64>]) {
        let cfg = &self.cfg;
        let mut dh: Vec<f64> = dy.to_vec();
        for l in (0..3).rev() {
            if l < 2 {
                for (d, &o) in dh.iter_mut().zip(&cache.fc_out[l]) {
                    if o <= 0.0 {
                        *d = 0.0;
                    }
                }
            }
            let w = &self.params[8 + 2 * l];
            let (rows, cols_n) = (w.shape[0], w.shape[1]);
            let input = &cache.fc_in[l];
            {
                let gw = &mut grads[8 + 2 * l];
                for r in 0..rows {
                    let g = dh[r];
                    if g != 0.0 {
                        for (gv, &iv) in gw[r * cols_n..(r + 1) * cols_n].iter_mut().zip(input) {
                            *gv += g * iv;
                        }
                    }
                }
            }
            for (gb, &g) in grads[9 + 2 * l].iter_mut().zip(&dh) {
                *gb += g;
            }
            let mut dx = vec![0.0; cols_n];
            for r in 0..rows {
                let g = dh[r];
                if g != 0.0 {
                    for (d, &wv) in dx.iter_mut().zip(&w.data[r * cols_n..(r + 1) * cols_n]) {
                        *d += g * wv;
                    }
                }
            }
            dh = dx;
        }
        if !cache.mask.is_empty() {
            dh.iter_mut().zip(&cache.mask).for_each(|(d, m)| *d *= m);
        }
        debug_assert_eq!(dh.len(), cache.pooled.len());
        let sides = cfg.conv_sides();
        let mut dx = adaptive_pool_backward(&dh, cfg.conv_channels[3], sides[3], cfg.pool_side);
        for l in (0..4).rev() {
            let cout = cfg.conv_channels[l];
            let cin = if l == 0 {
                cfg.in_channels
            } else {
                cfg.conv_channels[l - 1]
            };
            let so = sides[l];
            let p = so * so;
            let k = cin * 9;
            for (d, &a) in dx.iter_mut().zip(&cache.conv_out[l]) {
                if a <= 0.0 {
                    *d = 0.0;
                }
            }
            gemm(
                cout,
                p,
                k,
                &dx,
                false,
                &cache.cols[l],
                true,
                &mut grads[2 * l],
                1.0,
            );
            for (o, gb) in grads[2 * l + 1].iter_mut().enumerate() {
                *gb += dx[o * p..(o + 1) * p].iter().sum::<f64>();
            }
            if l > 0 {
                let mut dcols = vec![0.0; k * p];
                gemm(
                    k,
                    cout,
                    p,
                    &self.params[2 * l].data,
                    true,
                    &dx,
                    false,
                    &mut dcols,
                    0.0,
                );
                let side_in = if l == 0 { cfg.input_side } else { sides[l - 1] };
                dx = col2im(&dcols, cin, side_in, so);
            }
        }
    }
}

/// Row-major `C = A * B + beta * C` with optional transposes of stored
/// matrices (`A` is `m x k` after transposition, `B` is `k x n`).
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    ta: bool,
    b: &[f64],
    tb: bool,
    c: &mut [f64],
    beta: f64,
) {
    let (rsa, csa) = if ta { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if tb { (1, k as isize) } else { (n as isize, 1) };
    debug_assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n);
    // SAFETY: slice lengths cover every index addressed by the strides above.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

fn im2col(x: &[f64], c: usize, side: usize, so: usize) -> Vec<f64> {
    let p = so * so;
    let mut cols = vec![0.0; c * 9 * p];
    for ch in 0..c {
        let plane = &x[ch * side * side..(ch + 1) * side * side];
        for ky in 0..3 {
            for kx in 0..3 {
                let row = &mut cols[((ch * 9) + ky * 3 + kx) * p..((ch * 9) + ky * 3 + kx + 1) * p];
                for oy in 0..so {
                    let iy = (oy * 2 + ky) as isize - 1;
                    if iy < 0 || iy >= side as isize {
                        continue;
                    }
                    let src = &plane[iy as usize * side..(iy as usize + 1) * side];
                    for ox in 0..so {
                        let ix = (ox * 2 + kx) as isize - 1;
                        if ix >= 0 && ix < side as isize {
                            row[oy * so + ox] = src[ix as usize];
                        }
                    }
                }
            }
        }
    }
    cols
}

fn col2im(cols: &[f64], c: usize, side: usize, so: usize) -> Vec<f64> {
    let p = so * so;
    let mut x = vec![0.0; c * side * side];
    for ch in 0..c {
        let plane = &mut x[ch * side * side..(ch + 1) * side * side];
        for ky in 0..3 {
            for kx in 0..3 {
                let row = &cols[((ch * 9) + ky * 3 + kx) * p..((ch * 9) + ky * 3 + kx + 1) * p];
                for oy in 0..so {
                    let iy = (oy * 2 + ky) as isize - 1;
                    if iy < 0 || iy >= side as isize {
                        continue;
                    }
                    for ox in 0..so {
                        let ix = (ox * 2 + kx) as isize - 1;
                        if ix >= 0 && ix < side as isize {
                            plane[iy as usize * side + ix as usize] += row[oy * so + ox];
                        }
                    }
                }
            }
        }
    }
    x
}

/// Bin `i` of `n` over `len` samples: `[floor(i*len/n), ceil((i+1)*len/n))`.
fn pool_bin(i: usize, n: usize, len: usize) -> (usize, usize) {
    (i * len / n, ((i + 1) * len).div_ceil(n))
}

fn adaptive_pool(x: &[f64], c: usize, side: usize, out: usize) -> Vec<f64> {
    let mut pooled = Vec::with_capacity(c * out * out);
    for ch in 0..c {
        let plane = &x[ch * side * side..(ch + 1) * side * side];
        for by in 0..out {
            let (y0, y1) = pool_bin(by, out, side);
            for bx in 0..out {
                let (x0, x1) = pool_bin(bx, out, side);
                let mut s = 0.0;
                for y in y0..y1 {
                    s += plane[y * side + x0..y * side + x1].iter().sum::<f64>();
                }
                pooled.push(s / ((y1 - y0) * (x1 - x0)) as f64);
            }
        }
    }
    pooled
}

fn adaptive_pool_backward(d: &[f64], c: usize, side: usize, out: usize) -> Vec<f64> {
    let mut dx = vec![0.0; c * side * side];
    let mut k = 0;
    for ch in 0..c {
        let plane = &mut dx[ch * side * side..(ch + 1) * side * side];
        for by in 0..out {
            let (y0, y1) = pool_bin(by, out, side);
            for bx in 0..out {
                let (x0, x1) = pool_bin(bx, out, side);
                let g = d[k] / ((y1 - y0) * (x1 - x0)) as f64;
                k += 1;
                for y in y0..y1 {
                    plane[y * side + x0..y * side + x1]
                        .iter_mut()
                        .for_each(|v| *v += g);
                }
            }
        }
    }
    dx
}

/// Per-sample loss `mean_j (y_j - t_j)^2` and its gradient.
pub fn mse(y: [f64; OUTPUTS], t: [f64; OUTPUTS]) -> (f64, [f64; OUTPUTS]) {
    let n = OUTPUTS as f64;
    let d = [y[0] - t[0], y[1] - t[1]];
    (
        (d[0] * d[0] + d[1] * d[1]) / n,
        [2.0 * d[0] / n, 2.0 * d[1] / n],
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> NetConfig {
        NetConfig {
            in_channels: 2,
            input_side: 40,
            conv_channels: [2, 3, 3, 2],
            pool_side: 2,
            fc_hidden: [4, 3],
            dropout: 0.3,
        }
    }

    fn loss(net: &Network, x: &[f64], mask: &[f64], t: [f64; 2]) -> f64 {
        mse(net.forward(x, Some(mask)).0, t).0
    }

    #[test]
    fn shapes_follow_config() {
        let cfg = NetConfig::default();
        assert_eq!(cfg.conv_sides(), [32, 16, 8, 4]);
        assert_eq!(cfg.feature_len(), 256);
        let net = Network::new(cfg, 0).unwrap();
        assert_eq!(net.params.len(), 14);
        assert_eq!(net.params[0].shape, vec![16, 4, 3, 3]);
        assert_eq!(net.params[8].shape, vec![64, 256]);
        assert_eq!(net.params[13].shape, vec![2]);
    }

    #[test]
    fn pool_bins_overlap_for_odd_sides() {
        assert_eq!(pool_bin(0, 2, 3), (0, 2));
        assert_eq!(pool_bin(1, 2, 3), (1, 3));
        assert_eq!(pool_bin(1, 2, 1), (0, 1));
    }

    #[test]
    fn gemm_transposes() {
        // A = [[1,2,3],[4,5,6]], B = [[1,0],[0,1],[1,1]]
        let a = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let b = [1.0, 0.0, 0.0, 1.0, 1.0, 1.0];
        let mut c = [0.0; 4];
        gemm(2, 3, 2, &a, false, &b, false, &mut c, 0.0);
        assert_eq!(c, [4.0, 5.0, 10.0, 11.0]);
        // A^T stored as 3x2.
        let at = [1.0, 4.0, 2.0, 5.0, 3.0, 6.0];
        let bt = [1.0, 0.0, 1.0, 0.0, 1.0, 1.0];
        let mut c2 = [1.0; 4];
        gemm(2, 3, 2, &at, true, &bt, true, &mut c2, 1.0);
        assert_eq!(c2, [5.0, 6.0, 11.0, 12.0]);
    }

    #[test]
    fn forward_is_deterministic() {
        let net = Network::new(tiny(), 3).unwrap();
        let x: Vec<f64> = (0..net.cfg.input_len())
            .map(|i| ((i * 37) % 11) as f64 / 11.0)
            .collect();
        assert_eq!(net.predict(&x).unwrap(), net.predict(&x).unwrap());
        assert!(net.predict(&x[1..]).is_err());
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut net = Network::new(tiny(), 11).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        // Non-zero biases so no unit sits exactly at a kink.
        for t in net.params.iter_mut() {
            if t.shape.len() == 1 {
                t.data
                    .iter_mut()
                    .for_each(|v| *v = rng.gen_range(0.05..0.2));
            }
        }
        let x: Vec<f64> = (0..net.cfg.input_len())
            .map(|_| rng.gen_range(0.0..1.0))
            .collect();
        let mask = net.dropout_mask(&mut rng);
        let t = [0.3, -0.7];
        let (y, cache) = net.forward(&x, Some(&mask));
        let mut grads = net.zero_grads();
        net.backward(&cache, mse(y, t).1, &mut grads);
        let eps = 1e-4;
        for ti in 0..net.params.len() {
            let mut num = vec![0.0; grads[ti].len()];
            for j in 0..num.len() {
                let orig = net.params[ti].data[j];
                net.params[ti].data[j] = orig + eps;
                let lp = loss(&net, &x, &mask, t);
                net.params[ti].data[j] = orig - eps;
                let lm = loss(&net, &x, &mask, t);
                net.params[ti].data[j] = orig;
                num[j] = (lp - lm) / (2.0 * eps);
            }
            let diff: f64 = num
                .iter()
                .zip(&grads[ti])
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt();
            let scale = num
                .iter()
                .map(|v| v * v)
                .sum::<f64>()
                .sqrt()
                .max(grads[ti].iter().map(|v| v * v).sum::<f64>().sqrt());
            assert!(scale > 0.0, "{} has zero gradient", net.params[ti].name);
            assert!(
                diff / scale < 1e-3,
                "{}: rel err {}",
                net.params[ti].name,
                diff / scale
            );
        }
    }
}
