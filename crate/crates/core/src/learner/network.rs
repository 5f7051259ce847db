use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::perception::StateTensor;
use crate::scalar::Scalar;

use super::nn::{resize_bilinear, resize_bilinear_backward, Act, Conv2d, ConvBn, Param, ResBlock};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    #[default]
    Desk,
    Full,
}

impl std::str::FromStr for Scale {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "desk" => Ok(Scale::Desk),
            "full" => Ok(Scale::Full),
            _ => Err(Error::config(format!("unknown scale {s:?}, expected desk or full"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockSpec {
    pub channels: usize,
    pub stride: usize,
}

/// Architecture of a fully convolutional network: a stem conv, residual
/// blocks, then three 1x1 convs with two bilinear upsamplings that restore
/// the input resolution.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub input_channels: usize,
    pub output_channels: usize,
    pub stem: usize,
    pub blocks: Vec<BlockSpec>,
    pub head: [usize; 2],
}

impl NetworkSpec {
    pub fn for_scale(scale: Scale, input_channels: usize, output_channels: usize) -> Self {
        let b = |channels, stride| BlockSpec { channels, stride };
        match scale {
            Scale::Desk => NetworkSpec {
                input_channels,
                output_channels,
                stem: 16,
                blocks: vec![b(16, 1), b(16, 1), b(32, 2), b(32, 1)],
                head: [32, 16],
            },
            Scale::Full => NetworkSpec {
                input_channels,
                output_channels,
                stem: 64,
                blocks: vec![
                    b(64, 1),
                    b(64, 1),
                    b(128, 2),
                    b(128, 1),
                    b(256, 2),
                    b(256, 1),
                    b(512, 1),
                    b(512, 1),
                ],
                head: [128, 32],
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let widths = [self.input_channels, self.output_channels, self.stem, self.head[0], self.head[1]];
        if widths.contains(&0) || self.blocks.iter().any(|b| b.channels == 0 || !(1..=2).contains(&b.stride)) {
            return Err(Error::config(format!("invalid network spec {self:?}")));
        }
        Ok(())
    }
}

/// Fully convolutional network whose output has the input's spatial size.
#[derive(Clone, Debug)]
pub struct FcnNet<T> {
    spec: NetworkSpec,
    stem: ConvBn<T>,
    blocks: Vec<ResBlock<T>>,
    head_a: ConvBn<T>,
    head_b: ConvBn<T>,
    head_out: Conv2d<T>,
    resize_from: Option<[(usize, usize); 2]>,
}

impl<T: Scalar> FcnNet<T> {
    pub fn new(spec: NetworkSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let stem = ConvBn::new("stem", spec.input_channels, spec.stem, 3, 1, true, &mut rng);
        let mut cin = spec.stem;
        let mut blocks = Vec::with_capacity(spec.blocks.len());
        for (i, b) in spec.blocks.iter().enumerate() {
            blocks.push(ResBlock::new(&format!("block{i}"), cin, b.channels, b.stride, &mut rng));
            cin = b.channels;
        }
        let head_a = ConvBn::new("head0", cin, spec.head[0], 1, 1, true, &mut rng);
        let head_b = ConvBn::new("head1", spec.head[0], spec.head[1], 1, 1, true, &mut rng);
        let head_out = Conv2d::new("head2", spec.head[1], spec.output_channels, 1, 1, true, &mut rng);
        Ok(FcnNet {
            spec,
            stem,
            blocks,
            head_a,
            head_b,
            head_out,
            resize_from: None,
        })
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    /// Upsampling targets: the resolution before the last downsampling
    /// block, then the input resolution.
    fn resize_targets(&self, h: usize, w: usize) -> [(usize, usize); 2] {
        let (mut ch, mut cw) = (h, w);
        let mut before_last = (h, w);
        for b in &self.spec.blocks {
            if b.stride == 2 {
                before_last = (ch, cw);
                ch = ch.div_ceil(2);
                cw = cw.div_ceil(2);
            }
        }
        [before_last, (h, w)]
    }

    fn check_input(&self, x: &Act<T>) -> Result<()> {
        if x.c != self.spec.input_channels {
            return Err(Error::shape(
                format!("{} input channels", self.spec.input_channels),
                format!("{} channels", x.c),
            ));
        }
        if x.n == 0 || x.h == 0 || x.w == 0 {
            return Err(Error::input("empty batch"));
        }
        Ok(())
    }

    /// Inference with running normalization statistics.
    pub fn eval_batch(&self, x: &Act<T>) -> Result<Act<T>> {
        self.check_input(x)?;
        let [t1, t2] = self.resize_targets(x.h, x.w);
        let mut y = self.stem.eval(x);
        for b in &self.blocks {
            y = b.eval(&y);
        }
        let y = resize_bilinear(&self.head_a.eval(&y), t1.0, t1.1);
        let y = resize_bilinear(&self.head_b.eval(&y), t2.0, t2.1);
        Ok(self.head_out.eval(&y))
    }

    /// Training-mode forward pass (batch statistics), caching what
    /// [`FcnNet::backward`] needs.
    pub fn train_batch(&mut self, x: &Act<T>) -> Result<Act<T>> {
        self.check_input(x)?;
        let [t1, t2] = self.resize_targets(x.h, x.w);
        let mut y = self.stem.train(x);
        for b in &mut self.blocks {
            y = b.train(&y);
        }
        let a = self.head_a.train(&y);
        let from1 = (a.h, a.w);
        let a = resize_bilinear(&a, t1.0, t1.1);
        let b = self.head_b.train(&a);
        let from2 = (b.h, b.w);
        let b = resize_bilinear(&b, t2.0, t2.1);
        self.resize_from = Some([from1, from2]);
        Ok(self.head_out.train(&b))
    }

    /// Accumulates parameter gradients for the last training forward pass.
    pub fn backward(&mut self, dy: &Act<T>) {
        let [from1, from2] = self.resize_from.take().expect("backward without forward");
        let d = self.head_out.backward(dy, true).expect("dx requested");
        let d = resize_bilinear_backward(&d, from2.0, from2.1);
        let d = self.head_b.backward(d, true).expect("dx requested");
        let d = resize_bilinear_backward(&d, from1.0, from1.1);
        let mut d = self.head_a.backward(d, true).expect("dx requested");
        for b in self.blocks.iter_mut().rev() {
            d = b.backward(d);
        }
        self.stem.backward(d, false);
    }

    /// Parameters in checkpoint order.
    pub fn params(&self) -> Vec<&Param<T>> {
        let mut out = Vec::new();
        self.stem.params(&mut out);
        for b in &self.blocks {
            b.params(&mut out);
        }
        self.head_a.params(&mut out);
        self.head_b.params(&mut out);
        self.head_out.params(&mut out);
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        let mut out = Vec::new();
        self.stem.params_mut(&mut out);
        for b in &mut self.blocks {
            b.params_mut(&mut out);
        }
        self.head_a.params_mut(&mut out);
        self.head_b.params_mut(&mut out);
        self.head_out.params_mut(&mut out);
        out
    }

    pub fn zero_grad(&mut self) {
        for p in self.params_mut() {
            p.grad.iter_mut().for_each(|g| *g = T::zero());
        }
    }

    pub fn parameter_count(&self) -> usize {
        self.params().iter().filter(|p| p.trainable).map(|p| p.value.len()).sum()
    }

    /// Hard copy of every parameter and running statistic.
    pub fn copy_from(&mut self, other: &FcnNet<T>) {
        for (dst, src) in self.params_mut().into_iter().zip(other.params()) {
            dst.value.copy_from_slice(&src.value);
        }
    }

    pub fn same_values(&self, other: &FcnNet<T>) -> bool {
        self.params().iter().zip(other.params()).all(|(a, b)| a.value == b.value)
    }

    /// Forward pass on single states in evaluation mode.
    pub fn forward(&self, states: &[&StateTensor<T>]) -> Result<Vec<StateTensor<T>>> {
        Ok(unpack(&self.eval_batch(&pack(states)?)?))
    }
}

/// Stacks per-sample `C x H x W` tensors into a channel-major batch.
pub fn pack<T: Scalar>(states: &[&StateTensor<T>]) -> Result<Act<T>> {
    let Some(first) = states.first() else {
        return Err(Error::input("empty batch"));
    };
    let (c, s) = (first.channels(), first.size());
    if let Some(bad) = states.iter().find(|t| t.channels() != c || t.size() != s) {
        return Err(Error::shape(
            format!("{c}x{s}x{s}"),
            format!("{}x{}x{}", bad.channels(), bad.size(), bad.size()),
        ));
    }
    let n = states.len();
    let mut act = Act::zeros(c, n, s, s);
    let p = s * s;
    for (b, t) in states.iter().enumerate() {
        for ch in 0..c {
            act.data[(ch * n + b) * p..][..p].copy_from_slice(t.channel_slice(ch));
        }
    }
    Ok(act)
}

/// Inverse of [`pack`] for square maps.
pub fn unpack<T: Scalar>(act: &Act<T>) -> Vec<StateTensor<T>> {
    let p = act.h * act.w;
    (0..act.n)
        .map(|b| {
            let mut data = Vec::with_capacity(act.c * p);
            for ch in 0..act.c {
                data.extend_from_slice(&act.data[(ch * act.n + b) * p..][..p]);
            }
            StateTensor::from_raw(act.c, act.h, data).expect("square maps")
        })
        .collect()
}
