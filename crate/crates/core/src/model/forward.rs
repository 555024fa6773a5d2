//! Inference-mode forward pass on CPU.

use super::arch::Architecture;
use super::plan::{plan, same_out, Block};
use super::weights::WeightSet;
use crate::error::{Error, Result};
use crate::frontend::FeatureMap;

const BN_EPS: f32 = 1e-3;

/// Channel-major activation volume `[c][h][w]`; `h` is time, `w` coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct Activation {
    pub c: usize,
    pub h: usize,
    pub w: usize,
    pub data: Vec<f32>,
}

impl Activation {
    fn zeros(c: usize, h: usize, w: usize) -> Self {
        Self {
            c,
            h,
            w,
            data: vec![0.0; c * h * w],
        }
    }

    fn plane(&self, ch: usize) -> &[f32] {
        let n = self.h * self.w;
        &self.data[ch * n..(ch + 1) * n]
    }

    fn plane_mut(&mut self, ch: usize) -> &mut [f32] {
        let n = self.h * self.w;
        &mut self.data[ch * n..(ch + 1) * n]
    }

    pub fn from_features(fm: &FeatureMap) -> Self {
        Self {
            c: 1,
            h: fm.n_frames(),
            w: fm.n_coeffs(),
            data: fm.values().to_vec(),
        }
    }
}

fn sigmoid(x: f32) -> f32 {
    1.0 / (1.0 + (-x).exp())
}

fn swish(x: f32) -> f32 {
    x * sigmoid(x)
}

/// Same-padded 2-D convolution. `weight` is `[cout, cin/groups, k, k]`.
fn conv2d(x: &Activation, weight: &[f32], cout: usize, k: usize, stride: usize, groups: usize) -> Activation {
    let cin_g = x.c / groups;
    let cout_g = cout / groups;
    let (oh, ow) = (same_out(x.h, stride), same_out(x.w, stride));
    let pad = |inp: usize, out: usize| ((out - 1) * stride + k).saturating_sub(inp) / 2;
    let (ph, pw) = (pad(x.h, oh), pad(x.w, ow));
    let mut y = Activation::zeros(cout, oh, ow);
    for co in 0..cout {
        let g = co / cout_g;
        let out = y.plane_mut(co);
        for ci in 0..cin_g {
            let src = x.plane(g * cin_g + ci);
            let kern = &weight[(co * cin_g + ci) * k * k..(co * cin_g + ci + 1) * k * k];
            for ky in 0..k {
                for kx in 0..k {
                    let wv = kern[ky * k + kx];
                    if wv == 0.0 {
                        continue;
                    }
                    for oy in 0..oh {
                        let iy = (oy * stride + ky) as isize - ph as isize;
                        if iy < 0 || iy >= x.h as isize {
                            continue;
                        }
                        let row = &src[iy as usize * x.w..(iy as usize + 1) * x.w];
                        let orow = &mut out[oy * ow..(oy + 1) * ow];
                        for (ox, o) in orow.iter_mut().enumerate() {
                            let ix = (ox * stride + kx) as isize - pw as isize;
                            if ix >= 0 && (ix as usize) < x.w {
                                *o += wv * row[ix as usize];
                            }
                        }
                    }
                }
            }
        }
    }
    y
}

fn batch_norm(x: &mut Activation, ws: &WeightSet, prefix: &str) -> Result<()> {
    let gamma = &ws.get(&format!("{prefix}.bn.weight"))?.data;
    let beta = &ws.get(&format!("{prefix}.bn.bias"))?.data;
    let mean = &ws.get(&format!("{prefix}.bn.running_mean"))?.data;
    let var = &ws.get(&format!("{prefix}.bn.running_var"))?.data;
    for ch in 0..x.c {
        let scale = gamma[ch] / (var[ch] + BN_EPS).sqrt();
        let shift = beta[ch] - mean[ch] * scale;
        x.plane_mut(ch).iter_mut().for_each(|v| *v = *v * scale + shift);
    }
    Ok(())
}

fn conv_bn(
    x: &Activation,
    ws: &WeightSet,
    prefix: &str,
    cout: usize,
    k: usize,
    stride: usize,
    groups: usize,
    act: bool,
) -> Result<Activation> {
    let w = ws.get(&format!("{prefix}.conv.weight"))?;
    let mut y = conv2d(x, &w.data, cout, k, stride, groups);
    batch_norm(&mut y, ws, prefix)?;
    if act {
        y.data.iter_mut().for_each(|v| *v = swish(*v));
    }
    Ok(y)
}

fn squeeze_excite(x: &mut Activation, ws: &WeightSet, prefix: &str) -> Result<()> {
    let rw = ws.get(&format!("{prefix}.se.reduce.weight"))?;
    let rb = &ws.get(&format!("{prefix}.se.reduce.bias"))?.data;
    let ew = &ws.get(&format!("{prefix}.se.expand.weight"))?.data;
    let eb = &ws.get(&format!("{prefix}.se.expand.bias"))?.data;
    let sq = rw.shape[0];
    let n = (x.h * x.w) as f32;
    let pooled: Vec<f32> = (0..x.c).map(|c| x.plane(c).iter().sum::<f32>() / n).collect();
    let squeezed: Vec<f32> = (0..sq)
        .map(|s| {
            let z: f32 = rw.data[s * x.c..(s + 1) * x.c].iter().zip(&pooled).map(|(a, b)| a * b).sum();
            swish(z + rb[s])
        })
        .collect();
    for c in 0..x.c {
        let z: f32 = ew[c * sq..(c + 1) * sq].iter().zip(&squeezed).map(|(a, b)| a * b).sum();
        let gate = sigmoid(z + eb[c]);
        x.plane_mut(c).iter_mut().for_each(|v| *v *= gate);
    }
    Ok(())
}

fn check_input(arch: &Architecture, fm: &FeatureMap) -> Result<()> {
    if fm.n_coeffs() != arch.in_coeffs || arch.in_channels != 1 {
        return Err(Error::Shape(format!(
            "input has {} coefficients, architecture expects {} on {} channel(s)",
            fm.n_coeffs(),
            arch.in_coeffs,
            arch.in_channels
        )));
    }
    if fm.n_frames() == 0 {
        return Err(Error::Shape("input has no frames".into()));
    }
    Ok(())
}

/// Runs every layer up to (not including) global average pooling.
pub fn pre_pool(arch: &Architecture, ws: &WeightSet, features: &FeatureMap) -> Result<Activation> {
    check_input(arch, features)?;
    ws.check(arch)?;
    let mut x = Activation::from_features(features);
    for pb in plan(arch) {
        let p = &pb.prefix;
        x = match pb.block {
            Block::Stem {
                cout, kernel, stride, ..
            } => conv_bn(&x, ws, p, cout, kernel, stride, 1, true)?,
            Block::MBConv {
                cin,
                cout,
                expansion,
                kernel,
                stride,
            } => {
                let mid = cin * expansion;
                let residual = pb.block.residual();
                let mut h = if expansion != 1 {
                    conv_bn(&x, ws, &format!("{p}.expand"), mid, 1, 1, 1, true)?
                } else {
                    x.clone()
                };
                h = conv_bn(&h, ws, &format!("{p}.dw"), mid, kernel, stride, mid, true)?;
                squeeze_excite(&mut h, ws, p)?;
                let mut out = conv_bn(&h, ws, &format!("{p}.project"), cout, 1, 1, 1, false)?;
                if residual {
                    out.data.iter_mut().zip(&x.data).for_each(|(o, i)| *o += i);
                }
                out
            }
            Block::Head { cout, .. } => conv_bn(&x, ws, p, cout, 1, 1, 1, true)?,
        };
    }
    Ok(x)
}

/// Global average pool followed by the classifier. Dropout is the identity
/// at inference.
pub fn pool_logits(ws: &WeightSet, x: &Activation) -> Result<Vec<f64>> {
    let w = ws.get("classifier.weight")?;
    let b = &ws.get("classifier.bias")?.data;
    let classes = w.shape[0];
    if w.shape[1] != x.c {
        return Err(Error::Shape(format!(
            "classifier expects {} channels, activation has {}",
            w.shape[1], x.c
        )));
    }
    let n = (x.h * x.w) as f64;
    let pooled: Vec<f64> = (0..x.c)
        .map(|c| x.plane(c).iter().map(|&v| f64::from(v)).sum::<f64>() / n)
        .collect();
    Ok((0..classes)
        .map(|k| {
            let row = &w.data[k * x.c..(k + 1) * x.c];
            row.iter().zip(&pooled).map(|(&a, b)| f64::from(a) * b).sum::<f64>() + f64::from(b[k])
        })
        .collect())
}

pub fn logits(arch: &Architecture, ws: &WeightSet, features: &FeatureMap) -> Result<Vec<f64>> {
    pool_logits(ws, &pre_pool(arch, ws, features)?)
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Class distribution for one feature map.
pub fn forward(arch: &Architecture, ws: &WeightSet, features: &FeatureMap) -> Result<Vec<f64>> {
    let z = logits(arch, ws, features)?;
    if z.iter().any(|v| !v.is_finite()) {
        return Err(Error::Shape("non-finite logits".into()));
    }
    Ok(softmax(&z))
}
