//! Building blocks with explicit forward caches and backward passes.
//!
//! Activations are single-sample `(C, H, W)` tensors stored channel-major in
//! flat vectors. Parameters live in one flat vector; layers only hold offsets.

use rand::Rng;

use super::scalar::{gemm, Scalar};

/// A named slice of the flat parameter vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segment {
    pub name: String,
    pub offset: usize,
    pub len: usize,
}

impl Segment {
    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len
    }
}

/// How a segment is initialized.
#[derive(Debug, Clone, Copy)]
pub(crate) enum Init {
    /// Uniform in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`.
    FanIn(usize),
    Const(f64),
}

#[derive(Debug, Default, Clone)]
pub(crate) struct LayoutBuilder {
    pub segments: Vec<Segment>,
    pub inits: Vec<Init>,
    pub total: usize,
}

impl LayoutBuilder {
    pub fn alloc(&mut self, name: String, len: usize, init: Init) -> usize {
        let offset = self.total;
        self.segments.push(Segment { name, offset, len });
        self.inits.push(init);
        self.total += len;
        offset
    }

    pub fn init_params<T: Scalar, R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<T> {
        let mut params = vec![T::zero(); self.total];
        for (seg, init) in self.segments.iter().zip(&self.inits) {
            let slot = &mut params[seg.range()];
            match *init {
                Init::FanIn(fan_in) => {
                    let bound = 1.0 / (fan_in as f64).sqrt();
                    for p in slot {
                        *p = T::of(rng.random_range(-bound..bound));
                    }
                }
                Init::Const(v) => slot.fill(T::of(v)),
            }
        }
        params
    }
}

/// Square convolution with stride 1 and "same" zero padding (`k` odd).
#[derive(Debug, Clone)]
pub(crate) struct Conv {
    pub cin: usize,
    pub cout: usize,
    pub k: usize,
    pub w: usize,
    pub b: usize,
}

pub(crate) struct ConvCache<T> {
    /// im2col matrix `(cin*k*k) x (h*w)`, or the input itself for 1x1.
    cols: Vec<T>,
    h: usize,
    w: usize,
}

impl Conv {
    pub fn new(lb: &mut LayoutBuilder, name: &str, cin: usize, cout: usize, k: usize) -> Self {
        let fan_in = cin * k * k;
        let w = lb.alloc(format!("{name}.weight"), cout * fan_in, Init::FanIn(fan_in));
        let b = lb.alloc(format!("{name}.bias"), cout, Init::FanIn(fan_in));
        Self { cin, cout, k, w, b }
    }

    pub fn param_count(cin: usize, cout: usize, k: usize) -> usize {
        cout * cin * k * k + cout
    }

    fn weight<'a, T>(&self, p: &'a [T]) -> &'a [T] {
        &p[self.w..self.w + self.cout * self.cin * self.k * self.k]
    }

    pub fn forward<T: Scalar>(&self, p: &[T], x: &[T], h: usize, w: usize) -> (Vec<T>, ConvCache<T>) {
        let hw = h * w;
        debug_assert_eq!(x.len(), self.cin * hw);
        let cols = if self.k == 1 { x.to_vec() } else { im2col(x, self.cin, h, w, self.k) };
        let mut out = vec![T::zero(); self.cout * hw];
        for (o, chunk) in out.chunks_mut(hw).enumerate() {
            chunk.fill(p[self.b + o]);
        }
        let kk = self.cin * self.k * self.k;
        gemm(self.cout, kk, hw, self.weight(p), false, &cols, false, &mut out, true);
        (out, ConvCache { cols, h, w })
    }

    pub fn backward<T: Scalar>(&self, p: &[T], g: &mut [T], cache: &ConvCache<T>, dy: &[T]) -> Vec<T> {
        let hw = cache.h * cache.w;
        let kk = self.cin * self.k * self.k;
        for (o, chunk) in dy.chunks(hw).enumerate() {
            g[self.b + o] += chunk.iter().copied().sum();
        }
        let wlen = self.cout * kk;
        gemm(self.cout, hw, kk, dy, false, &cache.cols, true, &mut g[self.w..self.w + wlen], true);
        let mut dcols = vec![T::zero(); kk * hw];
        gemm(kk, self.cout, hw, self.weight(p), true, dy, false, &mut dcols, false);
        if self.k == 1 {
            dcols
        } else {
            col2im(&dcols, self.cin, cache.h, cache.w, self.k)
        }
    }
}

fn im2col<T: Scalar>(x: &[T], c: usize, h: usize, w: usize, k: usize) -> Vec<T> {
    let hw = h * w;
    let pad = (k / 2) as isize;
    let mut cols = vec![T::zero(); c * k * k * hw];
    for ci in 0..c {
        let plane = &x[ci * hw..(ci + 1) * hw];
        for ky in 0..k {
            for kx in 0..k {
                let row = &mut cols[((ci * k + ky) * k + kx) * hw..][..hw];
                let dy = ky as isize - pad;
                let dx = kx as isize - pad;
                for y in 0..h {
                    let sy = y as isize + dy;
                    if sy < 0 || sy >= h as isize {
                        continue;
                    }
                    let src = &plane[sy as usize * w..][..w];
                    let dst = &mut row[y * w..][..w];
                    let x0 = (-dx).max(0) as usize;
                    let x1 = (w as isize - dx).min(w as isize) as usize;
                    for xx in x0..x1 {
                        dst[xx] = src[(xx as isize + dx) as usize];
                    }
                }
            }
        }
    }
    cols
}

fn col2im<T: Scalar>(cols: &[T], c: usize, h: usize, w: usize, k: usize) -> Vec<T> {
    let hw = h * w;
    let pad = (k / 2) as isize;
    let mut x = vec![T::zero(); c * hw];
    for ci in 0..c {
        let plane = &mut x[ci * hw..(ci + 1) * hw];
        for ky in 0..k {
            for kx in 0..k {
                let row = &cols[((ci * k + ky) * k + kx) * hw..][..hw];
                let dy = ky as isize - pad;
                let dx = kx as isize - pad;
                for y in 0..h {
                    let sy = y as isize + dy;
                    if sy < 0 || sy >= h as isize {
                        continue;
                    }
                    let src = &row[y * w..][..w];
                    let dst = &mut plane[sy as usize * w..][..w];
                    let x0 = (-dx).max(0) as usize;
                    let x1 = (w as isize - dx).min(w as isize) as usize;
                    for xx in x0..x1 {
                        dst[(xx as isize + dx) as usize] += src[xx];
                    }
                }
            }
        }
    }
    x
}

/// Fully connected layer on a vector.
#[derive(Debug, Clone)]
pub(crate) struct Linear {
    pub nin: usize,
    pub nout: usize,
    pub w: usize,
    pub b: usize,
}

impl Linear {
    pub fn new(lb: &mut LayoutBuilder, name: &str, nin: usize, nout: usize) -> Self {
        let w = lb.alloc(format!("{name}.weight"), nin * nout, Init::FanIn(nin));
        let b = lb.alloc(format!("{name}.bias"), nout, Init::FanIn(nin));
        Self { nin, nout, w, b }
    }

    pub fn param_count(nin: usize, nout: usize) -> usize {
        nin * nout + nout
    }

    pub fn forward<T: Scalar>(&self, p: &[T], x: &[T]) -> Vec<T> {
        let mut out = p[self.b..self.b + self.nout].to_vec();
        gemm(self.nout, self.nin, 1, &p[self.w..self.w + self.nin * self.nout], false, x, false, &mut out, true);
        out
    }

    pub fn backward<T: Scalar>(&self, p: &[T], g: &mut [T], x: &[T], dy: &[T]) -> Vec<T> {
        for (gb, &d) in g[self.b..self.b + self.nout].iter_mut().zip(dy) {
            *gb += d;
        }
        let wlen = self.nin * self.nout;
        gemm(self.nout, 1, self.nin, dy, false, x, false, &mut g[self.w..self.w + wlen], true);
        let mut dx = vec![T::zero(); self.nin];
        gemm(self.nin, self.nout, 1, &p[self.w..self.w + wlen], true, dy, false, &mut dx, false);
        dx
    }
}

pub(crate) const NORM_EPS: f64 = 1e-5;

/// Group normalization with per-channel affine parameters.
#[derive(Debug, Clone)]
pub(crate) struct GroupNorm {
    pub c: usize,
    pub groups: usize,
    pub gamma: usize,
    pub beta: usize,
}

pub(crate) struct NormCache<T> {
    xhat: Vec<T>,
    inv_std: Vec<T>,
}

impl GroupNorm {
    pub fn new(lb: &mut LayoutBuilder, name: &str, c: usize, groups: usize) -> Self {
        let gamma = lb.alloc(format!("{name}.gamma"), c, Init::Const(1.0));
        let beta = lb.alloc(format!("{name}.beta"), c, Init::Const(0.0));
        Self { c, groups, gamma, beta }
    }

    pub fn param_count(c: usize) -> usize {
        2 * c
    }

    pub fn forward<T: Scalar>(&self, p: &[T], x: &[T], hw: usize) -> (Vec<T>, NormCache<T>) {
        let per_group = self.c / self.groups * hw;
        let n = T::of(per_group as f64);
        let eps = T::of(NORM_EPS);
        let mut xhat = vec![T::zero(); x.len()];
        let mut inv_std = Vec::with_capacity(self.groups);
        for (gx, gh) in x.chunks(per_group).zip(xhat.chunks_mut(per_group)) {
            let mean = gx.iter().copied().sum::<T>() / n;
            let var = gx.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / n;
            let is = T::one() / (var + eps).sqrt();
            for (o, &v) in gh.iter_mut().zip(gx) {
                *o = (v - mean) * is;
            }
            inv_std.push(is);
        }
        let mut y = xhat.clone();
        for (ch, chunk) in y.chunks_mut(hw).enumerate() {
            let (ga, be) = (p[self.gamma + ch], p[self.beta + ch]);
            for v in chunk {
                *v = *v * ga + be;
            }
        }
        (y, NormCache { xhat, inv_std })
    }

    pub fn backward<T: Scalar>(&self, p: &[T], g: &mut [T], cache: &NormCache<T>, dy: &[T], hw: usize) -> Vec<T> {
        let mut dxhat = vec![T::zero(); dy.len()];
        for ch in 0..self.c {
            let r = ch * hw..(ch + 1) * hw;
            let (mut dg, mut db) = (T::zero(), T::zero());
            let ga = p[self.gamma + ch];
            for ((&d, &xh), o) in dy[r.clone()].iter().zip(&cache.xhat[r.clone()]).zip(&mut dxhat[r]) {
                dg += d * xh;
                db += d;
                *o = d * ga;
            }
            g[self.gamma + ch] += dg;
            g[self.beta + ch] += db;
        }
        let per_group = self.c / self.groups * hw;
        let n = T::of(per_group as f64);
        let mut dx = vec![T::zero(); dy.len()];
        for (gi, ((dxh, xh), out)) in dxhat
            .chunks(per_group)
            .zip(cache.xhat.chunks(per_group))
            .zip(dx.chunks_mut(per_group))
            .enumerate()
        {
            let sum_d = dxh.iter().copied().sum::<T>();
            let sum_dx = dxh.iter().zip(xh).map(|(&a, &b)| a * b).sum::<T>();
            let scale = cache.inv_std[gi] / n;
            for ((o, &d), &x) in out.iter_mut().zip(dxh).zip(xh) {
                *o = scale * (n * d - sum_d - x * sum_dx);
            }
        }
        dx
    }
}

pub(crate) fn sigmoid<T: Scalar>(x: T) -> T {
    T::one() / (T::one() + (-x).exp())
}

pub(crate) fn silu<T: Scalar>(x: &[T]) -> Vec<T> {
    x.iter().map(|&v| v * sigmoid(v)).collect()
}

/// Backward of `silu` given its input.
pub(crate) fn silu_backward<T: Scalar>(x: &[T], dy: &[T]) -> Vec<T> {
    x.iter()
        .zip(dy)
        .map(|(&v, &d)| {
            let s = sigmoid(v);
            d * s * (T::one() + v * (T::one() - s))
        })
        .collect()
}

/// 2x2 average pooling.
pub(crate) fn avg_pool2<T: Scalar>(x: &[T], c: usize, h: usize, w: usize) -> Vec<T> {
    let (oh, ow) = (h / 2, w / 2);
    let quarter = T::of(0.25);
    let mut out = vec![T::zero(); c * oh * ow];
    for ch in 0..c {
        let src = &x[ch * h * w..];
        let dst = &mut out[ch * oh * ow..];
        for y in 0..oh {
            for xx in 0..ow {
                let i = 2 * y * w + 2 * xx;
                dst[y * ow + xx] = (src[i] + src[i + 1] + src[i + w] + src[i + w + 1]) * quarter;
            }
        }
    }
    out
}

pub(crate) fn avg_pool2_backward<T: Scalar>(dy: &[T], c: usize, h: usize, w: usize) -> Vec<T> {
    let (oh, ow) = (h / 2, w / 2);
    let quarter = T::of(0.25);
    let mut dx = vec![T::zero(); c * h * w];
    for ch in 0..c {
        for y in 0..h {
            for xx in 0..w {
                dx[ch * h * w + y * w + xx] = dy[ch * oh * ow + (y / 2) * ow + xx / 2] * quarter;
            }
        }
    }
    dx
}

/// Nearest-neighbour 2x upsampling.
pub(crate) fn upsample2<T: Scalar>(x: &[T], c: usize, h: usize, w: usize) -> Vec<T> {
    let (oh, ow) = (2 * h, 2 * w);
    let mut out = vec![T::zero(); c * oh * ow];
    for ch in 0..c {
        for y in 0..oh {
            for xx in 0..ow {
                out[ch * oh * ow + y * ow + xx] = x[ch * h * w + (y / 2) * w + xx / 2];
            }
        }
    }
    out
}

pub(crate) fn upsample2_backward<T: Scalar>(dy: &[T], c: usize, h: usize, w: usize) -> Vec<T> {
    let ow = 2 * w;
    let mut dx = vec![T::zero(); c * h * w];
    for ch in 0..c {
        let src = &dy[ch * 4 * h * w..];
        for y in 0..h {
            for xx in 0..w {
                let i = 2 * y * ow + 2 * xx;
                dx[ch * h * w + y * w + xx] = src[i] + src[i + 1] + src[i + ow] + src[i + ow + 1];
            }
        }
    }
    dx
}

/// Sinusoidal embedding of a scalar position.
pub(crate) fn sinusoidal<T: Scalar>(position: f64, dim: usize) -> Vec<T> {
    let half = dim / 2;
    let mut out = Vec::with_capacity(dim);
    for i in 0..half {
        let freq = (-(10_000f64.ln()) * i as f64 / half as f64).exp();
        out.push(T::of((position * freq).sin()));
    }
    for i in 0..half {
        let freq = (-(10_000f64.ln()) * i as f64 / half as f64).exp();
        out.push(T::of((position * freq).cos()));
    }
    out
}
