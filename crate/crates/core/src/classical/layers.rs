//! CNN building blocks with hand-written backward passes.
//!
//! Feature maps are `(channels, height, width)` tensors. Convolution is
//! valid (no padding) with stride 1, computed as cross-correlation.

use crate::classical::Tensor;
use crate::error::{HqnnError, Result};

fn dims3(t: &Tensor, what: &str) -> Result<(usize, usize, usize)> {
    t.expect_rank(what, 3)?;
    let s = t.shape();
    Ok((s[0], s[1], s[2]))
}

/// `(C_in,H,W) ⋆ (C_out,C_in,k,k) + bias → (C_out, H−k+1, W−k+1)`.
pub fn conv2d_forward(input: &Tensor, kernels: &Tensor, bias: &[f64]) -> Result<Tensor> {
    let (c_in, h, w) = dims3(input, "conv2d input")?;
    kernels.expect_rank("conv2d kernels", 4)?;
    let ks = kernels.shape();
    let (c_out, k) = (ks[0], ks[2]);
    if ks[1] != c_in || ks[3] != k {
        return Err(HqnnError::structural(format!("kernels {ks:?} incompatible with input channels {c_in}")));
    }
    if k > h || k > w {
        return Err(HqnnError::structural(format!("kernel {k} larger than input {h}x{w}")));
    }
    if bias.len() != c_out {
        return Err(HqnnError::structural(format!("{} biases for {c_out} output channels", bias.len())));
    }
    let (oh, ow) = (h - k + 1, w - k + 1);
    let x = input.data();
    let kd = kernels.data();
    let mut out = vec![0.0; c_out * oh * ow];
    for co in 0..c_out {
        let plane = &mut out[co * oh * ow..(co + 1) * oh * ow];
        plane.fill(bias[co]);
        for ci in 0..c_in {
            let xin = &x[ci * h * w..(ci + 1) * h * w];
            for di in 0..k {
                for dj in 0..k {
                    let kv = kd[((co * c_in + ci) * k + di) * k + dj];
                    for i in 0..oh {
                        let src = &xin[(i + di) * w + dj..(i + di) * w + dj + ow];
                        let dst = &mut plane[i * ow..(i + 1) * ow];
                        for (d, s) in dst.iter_mut().zip(src) {
                            *d += kv * s;
                        }
                    }
                }
            }
        }
    }
    Tensor::new(vec![c_out, oh, ow], out)
}

/// Gradients of [`conv2d_forward`]: `(input_grad, kernel_grad, bias_grad)`.
pub fn conv2d_backward(upstream: &Tensor, input: &Tensor, kernels: &Tensor) -> Result<(Tensor, Tensor, Vec<f64>)> {
    let (c_in, h, w) = dims3(input, "conv2d input")?;
    kernels.expect_rank("conv2d kernels", 4)?;
    let ks = kernels.shape().to_vec();
    let (c_out, k) = (ks[0], ks[2]);
    if ks[1] != c_in || k > h || k > w {
        return Err(HqnnError::structural("conv2d backward: kernels do not match input"));
    }
    let (oh, ow) = (h - k + 1, w - k + 1);
    upstream.expect_shape("conv2d upstream gradient", &[c_out, oh, ow])?;
    let g = upstream.data();
    let x = input.data();
    let kd = kernels.data();
    let mut dx = vec![0.0; c_in * h * w];
    let mut dk = vec![0.0; kd.len()];
    let bias_grad: Vec<f64> = (0..c_out).map(|co| g[co * oh * ow..(co + 1) * oh * ow].iter().sum()).collect();
    for co in 0..c_out {
        let gplane = &g[co * oh * ow..(co + 1) * oh * ow];
        for ci in 0..c_in {
            let xin = &x[ci * h * w..(ci + 1) * h * w];
            let dxin = &mut dx[ci * h * w..(ci + 1) * h * w];
            for di in 0..k {
                for dj in 0..k {
                    let kidx = ((co * c_in + ci) * k + di) * k + dj;
                    let kv = kd[kidx];
                    let mut acc = 0.0;
                    for i in 0..oh {
                        let row = (i + di) * w + dj;
                        let grow = &gplane[i * ow..(i + 1) * ow];
                        let xs = &xin[row..row + ow];
                        let dxs = &mut dxin[row..row + ow];
                        for ((gv, xv), dv) in grow.iter().zip(xs).zip(dxs.iter_mut()) {
                            acc += gv * xv;
                            *dv += gv * kv;
                        }
                    }
                    dk[kidx] += acc;
                }
            }
        }
    }
    Ok((Tensor::new(vec![c_in, h, w], dx)?, Tensor::new(ks, dk)?, bias_grad))
}

/// 2×2 max pooling with stride 2. Returns the pooled map and, for every
/// output cell, the flat input index of the selected element. Ties go to the
/// first cell of the window in row-major order.
pub fn maxpool2x2_forward(input: &Tensor) -> Result<(Tensor, Vec<usize>)> {
    let (c, h, w) = dims3(input, "maxpool input")?;
    if h % 2 != 0 || w % 2 != 0 {
        return Err(HqnnError::structural(format!("2x2 max pooling needs even spatial dims, got {h}x{w}")));
    }
    let (oh, ow) = (h / 2, w / 2);
    let x = input.data();
    let mut out = Vec::with_capacity(c * oh * ow);
    let mut argmax = Vec::with_capacity(c * oh * ow);
    for ch in 0..c {
        for i in 0..oh {
            for j in 0..ow {
                let base = ch * h * w + 2 * i * w + 2 * j;
                let mut best = base;
                for cand in [base + 1, base + w, base + w + 1] {
                    if x[cand] > x[best] {
                        best = cand;
                    }
                }
                out.push(x[best]);
                argmax.push(best);
            }
        }
    }
    Ok((Tensor::new(vec![c, oh, ow], out)?, argmax))
}

/// Routes each upstream gradient to the input cell recorded in `argmax`.
pub fn maxpool2x2_backward(upstream: &Tensor, argmax: &[usize], input_shape: &[usize]) -> Result<Tensor> {
    if upstream.len() != argmax.len() {
        return Err(HqnnError::structural("maxpool backward: upstream and argmax lengths differ"));
    }
    let mut dx = Tensor::zeros(input_shape);
    let data = dx.data_mut();
    for (&g, &idx) in upstream.data().iter().zip(argmax) {
        *data.get_mut(idx).ok_or_else(|| HqnnError::structural("maxpool backward: argmax index out of range"))? += g;
    }
    Ok(dx)
}

/// Drops a trailing row and/or column so both spatial dims are even.
pub fn crop_to_even(input: &Tensor) -> Result<Tensor> {
    let (c, h, w) = dims3(input, "crop input")?;
    let (eh, ew) = (h - h % 2, w - w % 2);
    if eh == 0 || ew == 0 {
        return Err(HqnnError::structural(format!("{h}x{w} map is too small to pool")));
    }
    if (eh, ew) == (h, w) {
        return Ok(input.clone());
    }
    let x = input.data();
    let mut out = Vec::with_capacity(c * eh * ew);
    for ch in 0..c {
        for i in 0..eh {
            let row = ch * h * w + i * w;
            out.extend_from_slice(&x[row..row + ew]);
        }
    }
    Tensor::new(vec![c, eh, ew], out)
}

/// Adjoint of [`crop_to_even`]: zero-fills the dropped border.
pub fn crop_to_even_backward(upstream: &Tensor, input_shape: &[usize]) -> Result<Tensor> {
    let (c, h, w) = (input_shape[0], input_shape[1], input_shape[2]);
    let (_, eh, ew) = dims3(upstream, "crop upstream")?;
    let mut dx = Tensor::zeros(input_shape);
    let g = upstream.data();
    let data = dx.data_mut();
    for ch in 0..c {
        for i in 0..eh {
            let dst = ch * h * w + i * w;
            let src = (ch * eh + i) * ew;
            data[dst..dst + ew].copy_from_slice(&g[src..src + ew]);
        }
    }
    Ok(dx)
}

pub fn relu_forward(input: &Tensor) -> Tensor {
    let mut out = input.clone();
    relu_in_place(out.data_mut());
    out
}

pub fn relu_in_place(values: &mut [f64]) {
    for v in values {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
}

/// Passes gradient where the forward input was strictly positive.
pub fn relu_backward(upstream: &Tensor, input: &Tensor) -> Result<Tensor> {
    input.expect_shape("relu backward input", upstream.shape())?;
    let mut out = upstream.clone();
    relu_mask(out.data_mut(), input.data());
    Ok(out)
}

pub fn relu_mask(grad: &mut [f64], forward_input: &[f64]) {
    for (g, &x) in grad.iter_mut().zip(forward_input) {
        if x <= 0.0 {
            *g = 0.0;
        }
    }
}

/// `W·x + b` with `W` of shape `(out, in)`.
pub fn dense_forward(input: &[f64], weights: &Tensor, bias: &[f64]) -> Result<Vec<f64>> {
    weights.expect_rank("dense weights", 2)?;
    let (out_dim, in_dim) = (weights.shape()[0], weights.shape()[1]);
    if input.len() != in_dim || bias.len() != out_dim {
        return Err(HqnnError::structural(format!(
            "dense layer {out_dim}x{in_dim} got input {} and bias {}",
            input.len(),
            bias.len()
        )));
    }
    Ok((0..out_dim).map(|o| bias[o] + weights.row(o).iter().zip(input).map(|(w, x)| w * x).sum::<f64>()).collect())
}

/// Returns `(Wᵀ·g, g⊗x, g)`.
pub fn dense_backward(upstream: &[f64], input: &[f64], weights: &Tensor) -> Result<(Vec<f64>, Tensor, Vec<f64>)> {
    weights.expect_rank("dense weights", 2)?;
    let (out_dim, in_dim) = (weights.shape()[0], weights.shape()[1]);
    if upstream.len() != out_dim || input.len() != in_dim {
        return Err(HqnnError::structural("dense backward: shape mismatch"));
    }
    let mut dx = vec![0.0; in_dim];
    let mut dw = Vec::with_capacity(out_dim * in_dim);
    for (o, &g) in upstream.iter().enumerate() {
        for (d, w) in dx.iter_mut().zip(weights.row(o)) {
            *d += g * w;
        }
        dw.extend(input.iter().map(|x| g * x));
    }
    Ok((dx, Tensor::new(vec![out_dim, in_dim], dw)?, upstream.to_vec()))
}

/// Cross-entropy of `softmax(logits)` against `label`, and its gradient
/// `softmax(logits) − onehot(label)`.
pub fn softmax_cross_entropy(logits: &[f64], label: usize) -> Result<(f64, Vec<f64>)> {
    if label >= logits.len() {
        return Err(HqnnError::structural(format!("label {label} out of range for {} logits", logits.len())));
    }
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    let loss = (sum.ln() - (logits[label] - max)).max(0.0);
    let mut grad: Vec<f64> = exps.iter().map(|e| e / sum).collect();
    grad[label] -= 1.0;
    Ok((loss, grad))
}
