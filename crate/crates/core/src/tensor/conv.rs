//! Convolution and max-pooling primitives over [N, C, H, W] tensors.
//!
//! `conv2d` uses cross-correlation semantics with valid (unpadded) output,
//! matching the classic LeNet5 convention.

use alloc::boxed::Box;
use alloc::rc::Rc;
use alloc::vec;

use super::{ensure_finite, BackwardFn, MilError, Result, Tensor};

fn dims4(t: &Tensor, op: &'static str) -> Result<(usize, usize, usize, usize)> {
    match t.shape[..] {
        [n, c, h, w] => Ok((n, c, h, w)),
        _ => Err(MilError::ShapeMismatch {
            op,
            lhs: t.shape.clone(),
            rhs: alloc::vec![],
        }),
    }
}

/// Valid cross-correlation of `x` [N, C, H, W] with `weights`
/// [OC, C, KH, KW] and per-channel `bias` [OC], differentiable in all
/// three inputs.
pub fn conv2d(x: &Tensor, weights: &Tensor, bias: &Tensor, stride: usize) -> Result<Tensor> {
    let (n, c, h, w) = dims4(x, "conv2d")?;
    let (oc, c2, kh, kw) = dims4(weights, "conv2d")?;
    if c != c2 || bias.data.len() != oc {
        return Err(MilError::ShapeMismatch {
            op: "conv2d",
            lhs: x.shape.clone(),
            rhs: weights.shape.clone(),
        });
    }
    if stride == 0 {
        return Err(MilError::Config("conv2d stride must be >= 1".into()));
    }
    if kh > h || kw > w {
        return Err(MilError::InvalidTensor(alloc::format!(
            "conv2d kernel {kh}x{kw} larger than input {h}x{w}"
        )));
    }
    let oh = (h - kh) / stride + 1;
    let ow = (w - kw) / stride + 1;

    let mut out = vec![0.0; n * oc * oh * ow];
    {
        let xd = &x.data;
        let wd = &weights.data;
        let bd = &bias.data;
        for ni in 0..n {
            for oci in 0..oc {
                let oplane = &mut out[(ni * oc + oci) * oh * ow..(ni * oc + oci + 1) * oh * ow];
                oplane.fill(bd[oci]);
                for ci in 0..c {
                    let xplane = &xd[(ni * c + ci) * h * w..(ni * c + ci + 1) * h * w];
                    for khi in 0..kh {
                        for kwi in 0..kw {
                            let wv = wd[((oci * c + ci) * kh + khi) * kw + kwi];
                            for ohi in 0..oh {
                                let xrow = &xplane[(ohi * stride + khi) * w + kwi..];
                                let orow = &mut oplane[ohi * ow..(ohi + 1) * ow];
                                if stride == 1 {
                                    for (o, &xv) in orow.iter_mut().zip(&xrow[..ow]) {
                                        *o += wv * xv;
                                    }
                                } else {
                                    for (owi, o) in orow.iter_mut().enumerate() {
                                        *o += wv * xrow[owi * stride];
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    ensure_finite("conv2d", &out)?;

    let xd = Rc::clone(&x.data);
    let wd = Rc::clone(&weights.data);
    let (px, pw, pb) = (x.node, weights.node, bias.node);
    let backward: BackwardFn = Box::new(move |g| {
        let mut gx = vec![0.0; n * c * h * w];
        let mut gw = vec![0.0; oc * c * kh * kw];
        let mut gb = vec![0.0; oc];
        for ni in 0..n {
            for oci in 0..oc {
                let gplane = &g[(ni * oc + oci) * oh * ow..(ni * oc + oci + 1) * oh * ow];
                gb[oci] += gplane.iter().sum::<f64>();
                for ci in 0..c {
                    let xplane = &xd[(ni * c + ci) * h * w..(ni * c + ci + 1) * h * w];
                    let gxplane_base = (ni * c + ci) * h * w;
                    for khi in 0..kh {
                        for kwi in 0..kw {
                            let widx = ((oci * c + ci) * kh + khi) * kw + kwi;
                            let wv = wd[widx];
                            let mut wacc = 0.0;
                            for ohi in 0..oh {
                                let grow = &gplane[ohi * ow..(ohi + 1) * ow];
                                let base = (ohi * stride + khi) * w + kwi;
                                if stride == 1 {
                                    let xrow = &xplane[base..base + ow];
                                    wacc +=
                                        grow.iter().zip(xrow).map(|(&a, &b)| a * b).sum::<f64>();
                                    let gxrow = &mut gx[gxplane_base + base..gxplane_base + base + ow];
                                    for (gxv, &gv) in gxrow.iter_mut().zip(grow) {
                                        *gxv += wv * gv;
                                    }
                                } else {
                                    for (owi, &gv) in grow.iter().enumerate() {
                                        let xi = base + owi * stride;
                                        wacc += gv * xplane[xi];
                                        gx[gxplane_base + xi] += wv * gv;
                                    }
                                }
                            }
                            gw[widx] += wacc;
                        }
                    }
                }
            }
        }
        vec![(px, gx), (pw, gw), (pb, gb)]
    });
    Ok(x.tape
        .push(vec![n, oc, oh, ow], out, Some(backward), None))
}

/// Non-overlapping max pooling with a square window; trailing rows/columns
/// that do not fill a window are dropped.
pub fn maxpool2d(x: &Tensor, window: usize) -> Result<Tensor> {
    let (n, c, h, w) = dims4(x, "maxpool2d")?;
    if window == 0 || window > h || window > w {
        return Err(MilError::InvalidTensor(alloc::format!(
            "maxpool2d window {window} invalid for input {h}x{w}"
        )));
    }
    let oh = h / window;
    let ow = w / window;
    let planes = n * c;
    let mut out = vec![0.0; planes * oh * ow];
    let mut argmax = vec![0usize; planes * oh * ow];
    for p in 0..planes {
        let xplane = &x.data[p * h * w..(p + 1) * h * w];
        for ohi in 0..oh {
            for owi in 0..ow {
                let mut best = f64::NEG_INFINITY;
                let mut best_idx = 0;
                for dy in 0..window {
                    for dx in 0..window {
                        let idx = (ohi * window + dy) * w + owi * window + dx;
                        if xplane[idx] > best {
                            best = xplane[idx];
                            best_idx = idx;
                        }
                    }
                }
                out[(p * oh + ohi) * ow + owi] = best;
                argmax[(p * oh + ohi) * ow + owi] = best_idx;
            }
        }
    }
    ensure_finite("maxpool2d", &out)?;
    let px = x.node;
    let backward: BackwardFn = Box::new(move |g| {
        let mut gx = vec![0.0; planes * h * w];
        for p in 0..planes {
            for o in 0..oh * ow {
                gx[p * h * w + argmax[p * oh * ow + o]] += g[p * oh * ow + o];
            }
        }
        vec![(px, gx)]
    });
    Ok(x.tape.push(vec![n, c, oh, ow], out, Some(backward), None))
}
