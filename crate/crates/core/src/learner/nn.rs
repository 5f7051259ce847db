//! Minimal convolutional building blocks with hand-written backward passes.
//!
//! Activations are stored channel-major (`C x N x H x W`) so that every
//! convolution is one matrix product over the whole batch and per-channel
//! statistics are contiguous.

use rand::Rng;

use crate::scalar::Scalar;

const BN_EPS: f64 = 1e-5;
const BN_MOMENTUM: f64 = 0.1;

#[derive(Clone, Debug, PartialEq)]
pub struct Act<T> {
    pub c: usize,
    pub n: usize,
    pub h: usize,
    pub w: usize,
    pub data: Vec<T>,
}

impl<T: Scalar> Act<T> {
    pub fn zeros(c: usize, n: usize, h: usize, w: usize) -> Self {
        Act {
            c,
            n,
            h,
            w,
            data: vec![T::zero(); c * n * h * w],
        }
    }

    /// Elements per channel.
    pub fn plane(&self) -> usize {
        self.n * self.h * self.w
    }

    fn same_shape(&self, data: Vec<T>) -> Self {
        Act {
            c: self.c,
            n: self.n,
            h: self.h,
            w: self.w,
            data,
        }
    }
}

/// A named tensor with its gradient and momentum buffer. Running statistics
/// are stored as non-trainable params so they travel with checkpoints.
#[derive(Clone, Debug, PartialEq)]
pub struct Param<T> {
    pub name: String,
    pub value: Vec<T>,
    pub grad: Vec<T>,
    pub velocity: Vec<T>,
    pub trainable: bool,
}

impl<T: Scalar> Param<T> {
    fn new(name: String, value: Vec<T>, trainable: bool) -> Self {
        let n = value.len();
        Param {
            name,
            value,
            grad: vec![T::zero(); if trainable { n } else { 0 }],
            velocity: vec![T::zero(); if trainable { n } else { 0 }],
            trainable,
        }
    }

    fn uniform(name: String, len: usize, bound: f64, rng: &mut impl Rng) -> Self {
        let value = (0..len).map(|_| T::lit(rng.gen_range(-bound..bound))).collect();
        Self::new(name, value, true)
    }
}

/// Row-major `rows x cols` to `cols x rows`, in cache-sized tiles.
fn transpose<T: Scalar>(a: &[T], rows: usize, cols: usize) -> Vec<T> {
    const TILE: usize = 32;
    let mut out = vec![T::zero(); a.len()];
    for r0 in (0..rows).step_by(TILE) {
        for c0 in (0..cols).step_by(TILE) {
            for r in r0..(r0 + TILE).min(rows) {
                for c in c0..(c0 + TILE).min(cols) {
                    out[c * rows + r] = a[r * cols + c];
                }
            }
        }
    }
    out
}

#[derive(Clone, Debug)]
pub struct Conv2d<T> {
    pub cin: usize,
    pub cout: usize,
    pub k: usize,
    pub stride: usize,
    pub pad: usize,
    pub weight: Param<T>,
    pub bias: Option<Param<T>>,
    cache: Option<(Vec<T>, [usize; 3])>,
}

impl<T: Scalar> Conv2d<T> {
    pub fn new(name: &str, cin: usize, cout: usize, k: usize, stride: usize, bias: bool, rng: &mut impl Rng) -> Self {
        let fan_in = cin * k * k;
        let bound = 1.0 / (fan_in as f64).sqrt();
        Conv2d {
            cin,
            cout,
            k,
            stride,
            pad: k / 2,
            weight: Param::uniform(format!("{name}.weight"), cout * fan_in, bound, rng),
            bias: bias.then(|| Param::uniform(format!("{name}.bias"), cout, bound, rng)),
            cache: None,
        }
    }

    fn out_dim(&self, d: usize) -> usize {
        (d + 2 * self.pad - self.k) / self.stride + 1
    }

    fn is_pointwise(&self) -> bool {
        self.k == 1 && self.stride == 1 && self.pad == 0
    }

    /// Valid output columns `[lo, hi)` for kernel column `kj` and the
    /// matching first input column.
    fn col_range(&self, kj: usize, w: usize, ow: usize) -> (usize, usize, isize) {
        let (s, pad) = (self.stride as isize, self.pad as isize);
        let first = kj as isize - pad;
        let lo = if first >= 0 { 0 } else { ((-first + s - 1) / s) as usize };
        let hi = (((w as isize - 1 - first) / s + 1).max(0) as usize).min(ow);
        (lo, hi.max(lo), first)
    }

    fn im2col(&self, x: &Act<T>, oh: usize, ow: usize) -> Vec<T> {
        let (k, s, pad) = (self.k, self.stride, self.pad as isize);
        let np = x.n * oh * ow;
        let mut col = vec![T::zero(); self.cin * k * k * np];
        for ci in 0..self.cin {
            for ki in 0..k {
                for kj in 0..k {
                    let row = (ci * k + ki) * k + kj;
                    let dst = &mut col[row * np..(row + 1) * np];
                    let (lo, hi, first) = self.col_range(kj, x.w, ow);
                    if lo == hi {
                        continue;
                    }
                    let start = (first + (lo * s) as isize) as usize;
                    for n in 0..x.n {
                        let src = &x.data[(ci * x.n + n) * x.h * x.w..][..x.h * x.w];
                        for oy in 0..oh {
                            let iy = (oy * s + ki) as isize - pad;
                            if iy < 0 || iy >= x.h as isize {
                                continue;
                            }
                            let srow = &src[iy as usize * x.w..][..x.w];
                            let drow = &mut dst[(n * oh + oy) * ow..][lo..hi];
                            if s == 1 {
                                drow.copy_from_slice(&srow[start..start + (hi - lo)]);
                            } else {
                                for (d, v) in drow.iter_mut().zip(srow[start..].iter().step_by(s)) {
                                    *d = *v;
                                }
                            }
                        }
                    }
                }
            }
        }
        col
    }

    fn col2im(&self, col: &[T], n: usize, h: usize, w: usize, oh: usize, ow: usize) -> Act<T> {
        let (k, s, pad) = (self.k, self.stride, self.pad as isize);
        let np = n * oh * ow;
        let mut dx = Act::zeros(self.cin, n, h, w);
        for ci in 0..self.cin {
            for ki in 0..k {
                for kj in 0..k {
                    let row = (ci * k + ki) * k + kj;
                    let src = &col[row * np..(row + 1) * np];
                    let (lo, hi, first) = self.col_range(kj, w, ow);
                    if lo == hi {
                        continue;
                    }
                    let start = (first + (lo * s) as isize) as usize;
                    for b in 0..n {
                        let dst = &mut dx.data[(ci * n + b) * h * w..][..h * w];
                        for oy in 0..oh {
                            let iy = (oy * s + ki) as isize - pad;
                            if iy < 0 || iy >= h as isize {
                                continue;
                            }
                            let srow = &src[(b * oh + oy) * ow..][lo..hi];
                            let drow = &mut dst[iy as usize * w..][..w];
                            for (d, &v) in drow[start..].iter_mut().step_by(s).zip(srow) {
                                *d += v;
                            }
                        }
                    }
                }
            }
        }
        dx
    }

    fn run(&self, x: &Act<T>) -> (Act<T>, Vec<T>) {
        assert_eq!(x.c, self.cin, "conv input channels");
        let (oh, ow) = (self.out_dim(x.h), self.out_dim(x.w));
        let np = x.n * oh * ow;
        let kk = self.cin * self.k * self.k;
        let col = if self.is_pointwise() { x.data.clone() } else { self.im2col(x, oh, ow) };
        let mut out = vec![T::zero(); self.cout * np];
        T::gemm(
            self.cout,
            kk,
            np,
            T::one(),
            &self.weight.value,
            kk as isize,
            1,
            &col,
            np as isize,
            1,
            T::zero(),
            &mut out,
            np as isize,
            1,
        );
        if let Some(b) = &self.bias {
            for (co, chunk) in out.chunks_mut(np).enumerate() {
                let v = b.value[co];
                chunk.iter_mut().for_each(|o| *o += v);
            }
        }
        let act = Act {
            c: self.cout,
            n: x.n,
            h: oh,
            w: ow,
            data: out,
        };
        (act, col)
    }

    pub fn eval(&self, x: &Act<T>) -> Act<T> {
        self.run(x).0
    }

    pub fn train(&mut self, x: &Act<T>) -> Act<T> {
        let (y, col) = self.run(x);
        self.cache = Some((col, [x.n, x.h, x.w]));
        y
    }

    pub fn backward(&mut self, dy: &Act<T>, want_dx: bool) -> Option<Act<T>> {
        let (col, [n, h, w]) = self.cache.take().expect("conv backward without forward");
        let np = dy.plane();
        let kk = self.cin * self.k * self.k;
        // dW += dY (cout x np) * col^T (np x kk). The product is much faster
        // with col^T materialized contiguously.
        let col_t = transpose(&col, kk, np);
        T::gemm(
            self.cout,
            np,
            kk,
            T::one(),
            &dy.data,
            np as isize,
            1,
            &col_t,
            kk as isize,
            1,
            T::one(),
            &mut self.weight.grad,
            kk as isize,
            1,
        );
        if let Some(b) = &mut self.bias {
            for (co, chunk) in dy.data.chunks(np).enumerate() {
                b.grad[co] += chunk.iter().copied().sum::<T>();
            }
        }
        if !want_dx {
            return None;
        }
        // dcol = W^T (kk x cout) * dY (cout x np)
        let mut dcol = vec![T::zero(); kk * np];
        T::gemm(
            kk,
            self.cout,
            np,
            T::one(),
            &self.weight.value,
            1,
            kk as isize,
            &dy.data,
            np as isize,
            1,
            T::zero(),
            &mut dcol,
            np as isize,
            1,
        );
        if self.is_pointwise() {
            return Some(Act {
                c: self.cin,
                n,
                h,
                w,
                data: dcol,
            });
        }
        Some(self.col2im(&dcol, n, h, w, dy.h, dy.w))
    }

    pub fn params<'a>(&'a self, out: &mut Vec<&'a Param<T>>) {
        out.push(&self.weight);
        out.extend(self.bias.as_ref());
    }

    pub fn params_mut<'a>(&'a mut self, out: &mut Vec<&'a mut Param<T>>) {
        out.push(&mut self.weight);
        out.extend(self.bias.as_mut());
    }
}

#[derive(Clone, Debug)]
pub struct BatchNorm2d<T> {
    pub gamma: Param<T>,
    pub beta: Param<T>,
    pub running_mean: Param<T>,
    pub running_var: Param<T>,
    cache: Option<(Vec<T>, Vec<T>)>,
}

impl<T: Scalar> BatchNorm2d<T> {
    pub fn new(name: &str, c: usize) -> Self {
        BatchNorm2d {
            gamma: Param::new(format!("{name}.gamma"), vec![T::one(); c], true),
            beta: Param::new(format!("{name}.beta"), vec![T::zero(); c], true),
            running_mean: Param::new(format!("{name}.running_mean"), vec![T::zero(); c], false),
            running_var: Param::new(format!("{name}.running_var"), vec![T::one(); c], false),
            cache: None,
        }
    }

    pub fn eval(&self, x: &Act<T>) -> Act<T> {
        let m = x.plane();
        let eps = T::lit(BN_EPS);
        let mut y = x.data.clone();
        for (ch, chunk) in y.chunks_mut(m).enumerate() {
            let scale = self.gamma.value[ch] / (self.running_var.value[ch] + eps).sqrt();
            let shift = self.beta.value[ch] - self.running_mean.value[ch] * scale;
            chunk.iter_mut().for_each(|v| *v = *v * scale + shift);
        }
        x.same_shape(y)
    }

    pub fn train(&mut self, x: &Act<T>) -> Act<T> {
        let m = x.plane();
        let mf = T::from_usize(m).expect("plane size");
        let eps = T::lit(BN_EPS);
        let mom = T::lit(BN_MOMENTUM);
        let mut xhat = x.data.clone();
        let mut inv_std = Vec::with_capacity(x.c);
        let mut y = vec![T::zero(); x.data.len()];
        for (ch, (chunk, out)) in xhat.chunks_mut(m).zip(y.chunks_mut(m)).enumerate() {
            let mean = chunk.iter().copied().sum::<T>() / mf;
            let var = chunk.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / mf;
            let is = T::one() / (var + eps).sqrt();
            let (g, b) = (self.gamma.value[ch], self.beta.value[ch]);
            for (v, o) in chunk.iter_mut().zip(out.iter_mut()) {
                *v = (*v - mean) * is;
                *o = *v * g + b;
            }
            inv_std.push(is);
            let unbiased = if m > 1 { var * mf / (mf - T::one()) } else { var };
            let rm = &mut self.running_mean.value[ch];
            *rm = (T::one() - mom) * *rm + mom * mean;
            let rv = &mut self.running_var.value[ch];
            *rv = (T::one() - mom) * *rv + mom * unbiased;
        }
        self.cache = Some((xhat, inv_std));
        x.same_shape(y)
    }

    pub fn backward(&mut self, dy: &Act<T>) -> Act<T> {
        let (xhat, inv_std) = self.cache.take().expect("batchnorm backward without forward");
        let m = dy.plane();
        let mf = T::from_usize(m).expect("plane size");
        let mut dx = vec![T::zero(); dy.data.len()];
        for ch in 0..dy.c {
            let r = ch * m..(ch + 1) * m;
            let (d, xh) = (&dy.data[r.clone()], &xhat[r.clone()]);
            let dbeta: T = d.iter().copied().sum();
            let dgamma: T = d.iter().zip(xh).map(|(&a, &b)| a * b).sum();
            self.beta.grad[ch] += dbeta;
            self.gamma.grad[ch] += dgamma;
            let k = self.gamma.value[ch] * inv_std[ch] / mf;
            for ((o, &g), &h) in dx[r].iter_mut().zip(d).zip(xh) {
                *o = k * (mf * g - dbeta - h * dgamma);
            }
        }
        dy.same_shape(dx)
    }

    pub fn params<'a>(&'a self, out: &mut Vec<&'a Param<T>>) {
        out.extend([&self.gamma, &self.beta, &self.running_mean, &self.running_var]);
    }

    pub fn params_mut<'a>(&'a mut self, out: &mut Vec<&'a mut Param<T>>) {
        out.extend([
            &mut self.gamma,
            &mut self.beta,
            &mut self.running_mean,
            &mut self.running_var,
        ]);
    }
}

pub fn relu<T: Scalar>(mut x: Act<T>) -> Act<T> {
    x.data.iter_mut().for_each(|v| *v = v.max(T::zero()));
    x
}

/// Gradient through a ReLU given its output.
pub fn relu_backward<T: Scalar>(y: &Act<T>, mut dy: Act<T>) -> Act<T> {
    for (d, &o) in dy.data.iter_mut().zip(&y.data) {
        if o <= T::zero() {
            *d = T::zero();
        }
    }
    dy
}

/// Source taps for one axis of a bilinear resize with half-pixel centers.
fn taps(inp: usize, out: usize) -> Vec<(usize, usize, f64)> {
    let scale = inp as f64 / out as f64;
    (0..out)
        .map(|o| {
            let src = ((o as f64 + 0.5) * scale - 0.5).max(0.0);
            let i0 = (src.floor() as usize).min(inp - 1);
            let i1 = (i0 + 1).min(inp - 1);
            (i0, i1, src - i0 as f64)
        })
        .collect()
}

pub fn resize_bilinear<T: Scalar>(x: &Act<T>, oh: usize, ow: usize) -> Act<T> {
    let (ty, tx) = (taps(x.h, oh), taps(x.w, ow));
    let mut y = Act::zeros(x.c, x.n, oh, ow);
    for (src, dst) in x.data.chunks(x.h * x.w).zip(y.data.chunks_mut(oh * ow)) {
        for (oy, &(y0, y1, ly)) in ty.iter().enumerate() {
            let ly = T::lit(ly);
            for (ox, &(x0, x1, lx)) in tx.iter().enumerate() {
                let lx = T::lit(lx);
                let top = src[y0 * x.w + x0] * (T::one() - lx) + src[y0 * x.w + x1] * lx;
                let bot = src[y1 * x.w + x0] * (T::one() - lx) + src[y1 * x.w + x1] * lx;
                dst[oy * ow + ox] = top * (T::one() - ly) + bot * ly;
            }
        }
    }
    y
}

pub fn resize_bilinear_backward<T: Scalar>(dy: &Act<T>, h: usize, w: usize) -> Act<T> {
    let (ty, tx) = (taps(h, dy.h), taps(w, dy.w));
    let mut dx = Act::zeros(dy.c, dy.n, h, w);
    for (src, dst) in dy.data.chunks(dy.h * dy.w).zip(dx.data.chunks_mut(h * w)) {
        for (oy, &(y0, y1, ly)) in ty.iter().enumerate() {
            let ly = T::lit(ly);
            for (ox, &(x0, x1, lx)) in tx.iter().enumerate() {
                let lx = T::lit(lx);
                let g = src[oy * dy.w + ox];
                dst[y0 * w + x0] += g * (T::one() - ly) * (T::one() - lx);
                dst[y0 * w + x1] += g * (T::one() - ly) * lx;
                dst[y1 * w + x0] += g * ly * (T::one() - lx);
                dst[y1 * w + x1] += g * ly * lx;
            }
        }
    }
    dx
}

fn add_into<T: Scalar>(a: &mut Act<T>, b: &Act<T>) {
    a.data.iter_mut().zip(&b.data).for_each(|(x, &y)| *x += y);
}

/// Conv, batch norm, optional ReLU.
#[derive(Clone, Debug)]
pub struct ConvBn<T> {
    pub conv: Conv2d<T>,
    pub bn: BatchNorm2d<T>,
    relu: bool,
    out: Option<Act<T>>,
}

impl<T: Scalar> ConvBn<T> {
    #[allow(clippy::too_many_arguments)]
    pub fn new(name: &str, cin: usize, cout: usize, k: usize, stride: usize, relu: bool, rng: &mut impl Rng) -> Self {
        ConvBn {
            conv: Conv2d::new(&format!("{name}.conv"), cin, cout, k, stride, false, rng),
            bn: BatchNorm2d::new(&format!("{name}.bn"), cout),
            relu,
            out: None,
        }
    }

    pub fn eval(&self, x: &Act<T>) -> Act<T> {
        let y = self.bn.eval(&self.conv.eval(x));
        if self.relu {
            relu(y)
        } else {
            y
        }
    }

    pub fn train(&mut self, x: &Act<T>) -> Act<T> {
        let z = self.conv.train(x);
        let y = self.bn.train(&z);
        if self.relu {
            let y = relu(y);
            self.out = Some(y.clone());
            y
        } else {
            y
        }
    }

    pub fn backward(&mut self, dy: Act<T>, want_dx: bool) -> Option<Act<T>> {
        let dy = match self.out.take() {
            Some(y) if self.relu => relu_backward(&y, dy),
            _ => dy,
        };
        let dz = self.bn.backward(&dy);
        self.conv.backward(&dz, want_dx)
    }

    pub fn params<'a>(&'a self, out: &mut Vec<&'a Param<T>>) {
        self.conv.params(out);
        self.bn.params(out);
    }

    pub fn params_mut<'a>(&'a mut self, out: &mut Vec<&'a mut Param<T>>) {
        self.conv.params_mut(out);
        self.bn.params_mut(out);
    }
}

/// Basic residual block: two 3x3 conv-BN layers plus an identity or
/// projected shortcut, followed by ReLU.
#[derive(Clone, Debug)]
pub struct ResBlock<T> {
    pub a: ConvBn<T>,
    pub b: ConvBn<T>,
    pub shortcut: Option<ConvBn<T>>,
    pub stride: usize,
    out: Option<Act<T>>,
}

impl<T: Scalar> ResBlock<T> {
    pub fn new(name: &str, cin: usize, cout: usize, stride: usize, rng: &mut impl Rng) -> Self {
        let project = stride != 1 || cin != cout;
        ResBlock {
            a: ConvBn::new(&format!("{name}.a"), cin, cout, 3, stride, true, rng),
            b: ConvBn::new(&format!("{name}.b"), cout, cout, 3, 1, false, rng),
            shortcut: project.then(|| ConvBn::new(&format!("{name}.shortcut"), cin, cout, 1, stride, false, rng)),
            stride,
            out: None,
        }
    }

    pub fn eval(&self, x: &Act<T>) -> Act<T> {
        let mut y = self.b.eval(&self.a.eval(x));
        match &self.shortcut {
            Some(s) => add_into(&mut y, &s.eval(x)),
            None => add_into(&mut y, x),
        }
        relu(y)
    }

    pub fn train(&mut self, x: &Act<T>) -> Act<T> {
        let h = self.a.train(x);
        let mut y = self.b.train(&h);
        match &mut self.shortcut {
            Some(s) => add_into(&mut y, &s.train(x)),
            None => add_into(&mut y, x),
        }
        let y = relu(y);
        self.out = Some(y.clone());
        y
    }

    pub fn backward(&mut self, dy: Act<T>) -> Act<T> {
        let y = self.out.take().expect("block backward without forward");
        let d = relu_backward(&y, dy);
        let dh = self.b.backward(d.clone(), true).expect("dx requested");
        let mut dx = self.a.backward(dh, true).expect("dx requested");
        match &mut self.shortcut {
            Some(s) => add_into(&mut dx, &s.backward(d, true).expect("dx requested")),
            None => add_into(&mut dx, &d),
        }
        dx
    }

    pub fn params<'a>(&'a self, out: &mut Vec<&'a Param<T>>) {
        self.a.params(out);
        self.b.params(out);
        if let Some(s) = &self.shortcut {
            s.params(out);
        }
    }

    pub fn params_mut<'a>(&'a mut self, out: &mut Vec<&'a mut Param<T>>) {
        self.a.params_mut(out);
        self.b.params_mut(out);
        if let Some(s) = &mut self.shortcut {
            s.params_mut(out);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_act(c: usize, n: usize, h: usize, w: usize, rng: &mut impl Rng) -> Act<f64> {
        let mut a = Act::zeros(c, n, h, w);
        a.data.iter_mut().for_each(|v| *v = rng.gen_range(-1.0..1.0));
        a
    }

    fn dot(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }

    #[test]
    fn conv_matches_direct_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let conv = Conv2d::<f64>::new("c", 2, 3, 3, 2, true, &mut rng);
        let x = random_act(2, 2, 5, 4, &mut rng);
        let y = conv.eval(&x);
        assert_eq!((y.h, y.w), (3, 2));
        for co in 0..3 {
            for n in 0..2 {
                for oy in 0..3 {
                    for ox in 0..2 {
                        let mut s = conv.bias.as_ref().unwrap().value[co];
                        for ci in 0..2 {
                            for ki in 0..3 {
                                for kj in 0..3 {
                                    let iy = (oy * 2 + ki) as isize - 1;
                                    let ix = (ox * 2 + kj) as isize - 1;
                                    if iy < 0 || ix < 0 || iy >= 5 || ix >= 4 {
                                        continue;
                                    }
                                    let xv = x.data[((ci * 2 + n) * 5 + iy as usize) * 4 + ix as usize];
                                    s += conv.weight.value[((co * 2 + ci) * 3 + ki) * 3 + kj] * xv;
                                }
                            }
                        }
                        let got = y.data[((co * 2 + n) * 3 + oy) * 2 + ox];
                        assert!((got - s).abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn conv_backward_is_adjoint() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut conv = Conv2d::<f64>::new("c", 3, 2, 3, 2, false, &mut rng);
        let x = random_act(3, 2, 6, 5, &mut rng);
        let y = conv.train(&x);
        let dy = random_act(y.c, y.n, y.h, y.w, &mut rng);
        let dx = conv.backward(&dy, true).unwrap();
        // <conv(x), dy> = <x, conv^T(dy)> for a bias-free conv.
        assert!((dot(&y.data, &dy.data) - dot(&x.data, &dx.data)).abs() < 1e-10);
    }

    #[test]
    fn resize_backward_is_adjoint() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = random_act(2, 1, 6, 6, &mut rng);
        let y = resize_bilinear(&x, 11, 11);
        let dy = random_act(2, 1, 11, 11, &mut rng);
        let dx = resize_bilinear_backward(&dy, 6, 6);
        assert!((dot(&y.data, &dy.data) - dot(&x.data, &dx.data)).abs() < 1e-10);
    }

    #[test]
    fn resize_to_same_size_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = random_act(1, 1, 5, 5, &mut rng);
        assert_eq!(resize_bilinear(&x, 5, 5), x);
    }

    #[test]
    fn batchnorm_train_normalizes_and_tracks_stats() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut bn = BatchNorm2d::<f64>::new("bn", 2);
        let x = random_act(2, 4, 3, 3, &mut rng);
        let y = bn.train(&x);
        for ch in y.data.chunks(y.plane()) {
            let mean: f64 = ch.iter().sum::<f64>() / ch.len() as f64;
            assert!(mean.abs() < 1e-12);
        }
        assert!(bn.running_mean.value.iter().any(|&v| v != 0.0));
    }
}
