//! Layer kernels. Parametric layers keep weights and biases as flat vectors;
//! gradients live outside the layer so several workers can share one model.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LayerSpec {
    Conv { out_channels: usize, kernel_h: usize, kernel_w: usize, padding: usize },
    Relu,
    Flatten,
    Dense { units: usize },
}

impl LayerSpec {
    /// 3x3 convolution with same padding.
    pub fn conv3x3(out_channels: usize) -> Self {
        LayerSpec::Conv { out_channels, kernel_h: 3, kernel_w: 3, padding: 1 }
    }

    pub fn dense(units: usize) -> Self {
        LayerSpec::Dense { units }
    }
}

/// Per-sample shape `(channels, rows, cols)`.
pub type SampleShape = [usize; 3];

#[derive(Debug, Clone, PartialEq)]
pub struct Conv2d {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel_h: usize,
    pub kernel_w: usize,
    pub padding: usize,
    pub in_h: usize,
    pub in_w: usize,
    /// `[out, in, kh, kw]`.
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Conv2d {
    pub fn out_h(&self) -> usize {
        self.in_h + 2 * self.padding + 1 - self.kernel_h
    }

    pub fn out_w(&self) -> usize {
        self.in_w + 2 * self.padding + 1 - self.kernel_w
    }

    fn fan_in(&self) -> usize {
        self.in_channels * self.kernel_h * self.kernel_w
    }

    /// Output columns `ox` whose tap `kj` reads a real (unpadded) input column.
    fn col_range(&self, kj: usize) -> (usize, usize) {
        let lo = self.padding.saturating_sub(kj);
        let hi = (self.in_w + self.padding).saturating_sub(kj).min(self.out_w());
        (lo, hi.max(lo))
    }

    fn forward(&self, x: &Tensor) -> Tensor {
        let n = x.batch();
        let (ho, wo) = (self.out_h(), self.out_w());
        let (hi, wi) = (self.in_h, self.in_w);
        let mut out = Tensor::zeros([n, self.out_channels, ho, wo]);
        let od = out.data_mut();
        let xd = x.data();
        for b in 0..n {
            for oc in 0..self.out_channels {
                let plane = &mut od[((b * self.out_channels + oc) * ho * wo)..((b * self.out_channels + oc + 1) * ho * wo)];
                plane.fill(self.bias[oc]);
                for ic in 0..self.in_channels {
                    let input = &xd[((b * self.in_channels + ic) * hi * wi)..((b * self.in_channels + ic + 1) * hi * wi)];
                    for ki in 0..self.kernel_h {
                        for kj in 0..self.kernel_w {
                            let w = self.weight[((oc * self.in_channels + ic) * self.kernel_h + ki) * self.kernel_w + kj];
                            let (lo, hi_x) = self.col_range(kj);
                            for oy in 0..ho {
                                let iy = oy + ki;
                                if iy < self.padding || iy - self.padding >= hi {
                                    continue;
                                }
                                let row = &input[(iy - self.padding) * wi..];
                                let orow = &mut plane[oy * wo..(oy + 1) * wo];
                                for ox in lo..hi_x {
                                    orow[ox] += w * row[ox + kj - self.padding];
                                }
                            }
                        }
                    }
                }
            }
        }
        out
    }

    fn backward(&self, x: &Tensor, grad_out: &Tensor, gw: &mut [f64], gb: &mut [f64]) -> Tensor {
        let n = x.batch();
        let (ho, wo) = (self.out_h(), self.out_w());
        let (hi, wi) = (self.in_h, self.in_w);
        let mut grad_in = Tensor::zeros(x.shape());
        let gid = grad_in.data_mut();
        let xd = x.data();
        let gd = grad_out.data();
        for b in 0..n {
            for oc in 0..self.out_channels {
                let g = &gd[((b * self.out_channels + oc) * ho * wo)..((b * self.out_channels + oc + 1) * ho * wo)];
                gb[oc] += g.iter().sum::<f64>();
                for ic in 0..self.in_channels {
                    let base = (b * self.in_channels + ic) * hi * wi;
                    for ki in 0..self.kernel_h {
                        for kj in 0..self.kernel_w {
                            let widx = ((oc * self.in_channels + ic) * self.kernel_h + ki) * self.kernel_w + kj;
                            let w = self.weight[widx];
                            let (lo, hi_x) = self.col_range(kj);
                            let mut acc = 0.0;
                            for oy in 0..ho {
                                let iy = oy + ki;
                                if iy < self.padding || iy - self.padding >= hi {
                                    continue;
                                }
                                let start = base + (iy - self.padding) * wi + kj;
                                let grow = &g[oy * wo..(oy + 1) * wo];
                                for ox in lo..hi_x {
                                    let ix = start + ox - self.padding;
                                    acc += grow[ox] * xd[ix];
                                    gid[ix] += w * grow[ox];
                                }
                            }
                            gw[widx] += acc;
                        }
                    }
                }
            }
        }
        grad_in
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub inputs: usize,
    pub units: usize,
    /// `[units, inputs]`.
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    fn forward(&self, x: &Tensor) -> Tensor {
        let n = x.batch();
        let mut out = Vec::with_capacity(n * self.units);
        for b in 0..n {
            let xi = x.sample(b);
            for o in 0..self.units {
                let row = &self.weight[o * self.inputs..(o + 1) * self.inputs];
                out.push(self.bias[o] + row.iter().zip(xi).map(|(w, v)| w * v).sum::<f64>());
            }
        }
        Tensor::matrix(n, self.units, out).expect("dense output shape")
    }

    fn backward(&self, x: &Tensor, grad_out: &Tensor, gw: &mut [f64], gb: &mut [f64]) -> Tensor {
        let n = x.batch();
        let mut grad_in = Tensor::zeros(x.shape());
        let gid = grad_in.data_mut();
        for b in 0..n {
            let xi = x.sample(b);
            let g = grad_out.sample(b);
            let gi = &mut gid[b * self.inputs..(b + 1) * self.inputs];
            for o in 0..self.units {
                let go = g[o];
                if go == 0.0 {
                    continue;
                }
                gb[o] += go;
                let row = &self.weight[o * self.inputs..(o + 1) * self.inputs];
                let grow = &mut gw[o * self.inputs..(o + 1) * self.inputs];
                for i in 0..self.inputs {
                    grow[i] += go * xi[i];
                    gi[i] += go * row[i];
                }
            }
        }
        grad_in
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Layer {
    Conv(Conv2d),
    Dense(Dense),
    Relu,
    Flatten,
}

fn he_uniform<R: Rng + ?Sized>(count: usize, fan_in: usize, rng: &mut R) -> Vec<f64> {
    let limit = (6.0 / fan_in as f64).sqrt();
    (0..count).map(|_| rng.random_range(-limit..limit)).collect()
}

impl Layer {
    /// Builds the layer for inputs of shape `input`, returning it with its output shape.
    pub fn build<R: Rng + ?Sized>(spec: &LayerSpec, input: SampleShape, rng: &mut R) -> Result<(Layer, SampleShape)> {
        let [c, h, w] = input;
        match *spec {
            LayerSpec::Conv { out_channels, kernel_h, kernel_w, padding } => {
                if out_channels == 0 || kernel_h == 0 || kernel_w == 0 {
                    return Err(Error::Config("convolution needs positive channels and kernel size".into()));
                }
                if h + 2 * padding < kernel_h || w + 2 * padding < kernel_w {
                    return Err(Error::Config(format!(
                        "{kernel_h}x{kernel_w} kernel does not fit a {h}x{w} input with padding {padding}"
                    )));
                }
                let mut conv = Conv2d {
                    in_channels: c,
                    out_channels,
                    kernel_h,
                    kernel_w,
                    padding,
                    in_h: h,
                    in_w: w,
                    weight: Vec::new(),
                    bias: vec![0.0; out_channels],
                };
                conv.weight = he_uniform(out_channels * c * kernel_h * kernel_w, conv.fan_in(), rng);
                let out = [out_channels, conv.out_h(), conv.out_w()];
                Ok((Layer::Conv(conv), out))
            }
            LayerSpec::Dense { units } => {
                if h != 1 || w != 1 {
                    return Err(Error::Config(format!("dense layer needs flattened input, got {input:?}")));
                }
                if units == 0 {
                    return Err(Error::Config("dense layer needs at least one unit".into()));
                }
                let weight = he_uniform(units * c, c, rng);
                Ok((Layer::Dense(Dense { inputs: c, units, weight, bias: vec![0.0; units] }), [units, 1, 1]))
            }
            LayerSpec::Relu => Ok((Layer::Relu, input)),
            LayerSpec::Flatten => Ok((Layer::Flatten, [c * h * w, 1, 1])),
        }
    }

    pub fn forward(&self, x: &Tensor) -> Tensor {
        match self {
            Layer::Conv(c) => c.forward(x),
            Layer::Dense(d) => d.forward(x),
            Layer::Relu => {
                let data = x.data().iter().map(|&v| v.max(0.0)).collect();
                Tensor::new(x.shape(), data).expect("same shape")
            }
            Layer::Flatten => {
                let n = x.batch();
                x.clone().reshape([n, x.sample_len(), 1, 1]).expect("same size")
            }
        }
    }

    /// Gradient with respect to the input; parameter gradients are accumulated
    /// into `grads` (weight then bias).
    pub fn backward(&self, x: &Tensor, grad_out: &Tensor, grads: &mut [Vec<f64>]) -> Tensor {
        match self {
            Layer::Conv(c) => {
                let (gw, gb) = split_pair(grads);
                c.backward(x, grad_out, gw, gb)
            }
            Layer::Dense(d) => {
                let (gw, gb) = split_pair(grads);
                d.backward(x, grad_out, gw, gb)
            }
            Layer::Relu => {
                let data = x.data().iter().zip(grad_out.data()).map(|(&v, &g)| if v > 0.0 { g } else { 0.0 }).collect();
                Tensor::new(x.shape(), data).expect("same shape")
            }
            Layer::Flatten => grad_out.clone().reshape(x.shape()).expect("same size"),
        }
    }

    /// Parameter vectors, weight then bias.
    pub fn params(&self) -> Vec<&Vec<f64>> {
        match self {
            Layer::Conv(c) => vec![&c.weight, &c.bias],
            Layer::Dense(d) => vec![&d.weight, &d.bias],
            _ => Vec::new(),
        }
    }

    pub fn params_mut(&mut self) -> Vec<&mut Vec<f64>> {
        match self {
            Layer::Conv(c) => vec![&mut c.weight, &mut c.bias],
            Layer::Dense(d) => vec![&mut d.weight, &mut d.bias],
            _ => Vec::new(),
        }
    }

    pub fn num_param_tensors(&self) -> usize {
        match self {
            Layer::Conv(_) | Layer::Dense(_) => 2,
            _ => 0,
        }
    }
}

fn split_pair(grads: &mut [Vec<f64>]) -> (&mut [f64], &mut [f64]) {
    let (w, b) = grads.split_at_mut(1);
    (&mut w[0], &mut b[0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn rng() -> rand_chacha::ChaCha8Rng {
        rand_chacha::ChaCha8Rng::seed_from_u64(0)
    }

    #[test]
    fn identity_kernel_is_identity() {
        let spec = LayerSpec::Conv { out_channels: 1, kernel_h: 1, kernel_w: 1, padding: 0 };
        let (mut layer, shape) = Layer::build(&spec, [1, 3, 4], &mut rng()).unwrap();
        assert_eq!(shape, [1, 3, 4]);
        if let Layer::Conv(c) = &mut layer {
            c.weight = vec![1.0];
        }
        let x = Tensor::new([2, 1, 3, 4], (0..24).map(|v| v as f64 * 0.7 - 3.0).collect()).unwrap();
        assert_eq!(layer.forward(&x), x);
    }

    #[test]
    fn same_padding_matches_direct_sum() {
        let (layer, shape) = Layer::build(&LayerSpec::conv3x3(2), [2, 4, 5], &mut rng()).unwrap();
        assert_eq!(shape, [2, 4, 5]);
        let x = Tensor::new([1, 2, 4, 5], (0..40).map(|v| ((v * 17) % 11) as f64 - 5.0).collect()).unwrap();
        let y = layer.forward(&x);
        let Layer::Conv(c) = &layer else { unreachable!() };
        for oc in 0..2 {
            for oy in 0..4 {
                for ox in 0..5 {
                    let mut want = c.bias[oc];
                    for ic in 0..2 {
                        for ki in 0..3 {
                            for kj in 0..3 {
                                let (iy, ix) = (oy as i64 + ki as i64 - 1, ox as i64 + kj as i64 - 1);
                                if (0..4).contains(&iy) && (0..5).contains(&ix) {
                                    want += c.weight[((oc * 2 + ic) * 3 + ki) * 3 + kj] * x.data()[(ic * 4 + iy as usize) * 5 + ix as usize];
                                }
                            }
                        }
                    }
                    assert!((y.data()[(oc * 4 + oy) * 5 + ox] - want).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn dense_requires_flat_input() {
        assert!(Layer::build(&LayerSpec::dense(3), [2, 2, 2], &mut rng()).is_err());
        let (_, shape) = Layer::build(&LayerSpec::Flatten, [2, 2, 2], &mut rng()).unwrap();
        assert_eq!(shape, [8, 1, 1]);
    }

    #[test]
    fn he_uniform_bounds() {
        let (layer, _) = Layer::build(&LayerSpec::dense(50), [24, 1, 1], &mut rng()).unwrap();
        let limit = (6.0f64 / 24.0).sqrt();
        assert!(layer.params()[0].iter().all(|w| w.abs() <= limit));
        assert!(layer.params()[1].iter().all(|&b| b == 0.0));
    }
}
