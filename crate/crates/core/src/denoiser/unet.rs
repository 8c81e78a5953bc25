use serde::{Deserialize, Serialize};

use super::layers::{
    avg_pool2, avg_pool2_backward, silu, silu_backward, sinusoidal, upsample2, upsample2_backward, Conv, ConvCache,
    GroupNorm, LayoutBuilder, Linear, NormCache, Segment,
};
use super::scalar::Scalar;
use crate::error::{Error, Result};

/// Shape of the U-shaped epsilon network.
///
/// Each entry of `widths` is one encoder stage at half the resolution of the
/// previous one; the decoder mirrors it with skip connections.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Arch {
    pub height: usize,
    pub width: usize,
    pub widths: Vec<usize>,
    pub time_dim: usize,
    pub groups: usize,
}

impl Arch {
    /// Two down stages of 32 and 64 channels with a 64-dim time embedding.
    pub fn desk(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            widths: vec![32, 64],
            time_dim: 64,
            groups: 8,
        }
    }

    pub fn down_stages(&self) -> usize {
        self.widths.len()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArch(msg));
        if self.widths.is_empty() {
            return bad("at least one stage is required".into());
        }
        if self.widths.contains(&0) || self.time_dim == 0 || self.groups == 0 {
            return bad(format!("zero-width layer in {self:?}"));
        }
        if self.time_dim % 2 != 0 {
            return bad(format!("time embedding dimension {} must be even", self.time_dim));
        }
        let factor = 1 << self.widths.len();
        if self.height % factor != 0 || self.width % factor != 0 {
            return bad(format!(
                "{}x{} input is not divisible by 2^{}",
                self.height,
                self.width,
                self.widths.len()
            ));
        }
        let n = self.widths.len();
        for i in 0..n {
            let up = if i == n - 1 { self.widths[i] } else { self.widths[i + 1] };
            for c in [self.widths[i], up + self.widths[i]] {
                if c % self.groups != 0 {
                    return bad(format!("{c} channels are not divisible into {} groups", self.groups));
                }
            }
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        toml::to_string(self).expect("arch serializes")
    }

    pub fn from_text(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Format(format!("bad architecture descriptor: {e}")))
    }
}

/// Pre-activation residual block with an additive time embedding.
#[derive(Debug, Clone)]
struct ResBlock {
    cout: usize,
    norm1: GroupNorm,
    conv1: Conv,
    time: Linear,
    norm2: GroupNorm,
    conv2: Conv,
    skip: Option<Conv>,
}

struct ResCache<T> {
    n1: NormCache<T>,
    h1: Vec<T>,
    c1: ConvCache<T>,
    n2: NormCache<T>,
    h2: Vec<T>,
    c2: ConvCache<T>,
    skip: Option<ConvCache<T>>,
}

impl ResBlock {
    fn new(lb: &mut LayoutBuilder, name: &str, cin: usize, cout: usize, arch: &Arch) -> Self {
        Self {
            cout,
            norm1: GroupNorm::new(lb, &format!("{name}.norm1"), cin, arch.groups),
            conv1: Conv::new(lb, &format!("{name}.conv1"), cin, cout, 3),
            time: Linear::new(lb, &format!("{name}.time"), arch.time_dim, cout),
            norm2: GroupNorm::new(lb, &format!("{name}.norm2"), cout, arch.groups),
            conv2: Conv::new(lb, &format!("{name}.conv2"), cout, cout, 3),
            skip: (cin != cout).then(|| Conv::new(lb, &format!("{name}.skip"), cin, cout, 1)),
        }
    }

    fn forward<T: Scalar>(&self, p: &[T], x: &[T], temb: &[T], h: usize, w: usize) -> (Vec<T>, ResCache<T>) {
        let hw = h * w;
        let (a, n1) = self.norm1.forward(p, x, hw);
        let h1 = a;
        let (mut c, c1) = self.conv1.forward(p, &silu(&h1), h, w);
        let tb = self.time.forward(p, temb);
        for (chunk, &b) in c.chunks_mut(hw).zip(&tb) {
            chunk.iter_mut().for_each(|v| *v += b);
        }
        let (h2, n2) = self.norm2.forward(p, &c, hw);
        let (mut out, c2) = self.conv2.forward(p, &silu(&h2), h, w);
        let skip = match &self.skip {
            Some(conv) => {
                let (s, cache) = conv.forward(p, x, h, w);
                out.iter_mut().zip(&s).for_each(|(o, v)| *o += *v);
                Some(cache)
            }
            None => {
                out.iter_mut().zip(x).for_each(|(o, v)| *o += *v);
                None
            }
        };
        (
            out,
            ResCache {
                n1,
                h1,
                c1,
                n2,
                h2,
                c2,
                skip,
            },
        )
    }

    /// Returns the input gradient; adds the time-embedding gradient to `dtemb`.
    fn backward<T: Scalar>(
        &self,
        p: &[T],
        g: &mut [T],
        cache: &ResCache<T>,
        temb: &[T],
        dy: &[T],
        dtemb: &mut [T],
        hw: usize,
    ) -> Vec<T> {
        let mut dx = match (&self.skip, &cache.skip) {
            (Some(conv), Some(sc)) => conv.backward(p, g, sc, dy),
            _ => dy.to_vec(),
        };
        let da2 = self.conv2.backward(p, g, &cache.c2, dy);
        let dh2 = silu_backward(&cache.h2, &da2);
        let dc = self.norm2.backward(p, g, &cache.n2, &dh2, hw);
        let dtb: Vec<T> = dc.chunks(hw).map(|ch| ch.iter().copied().sum()).collect();
        let dt = self.time.backward(p, g, temb, &dtb);
        dtemb.iter_mut().zip(&dt).for_each(|(a, b)| *a += *b);
        let da1 = self.conv1.backward(p, g, &cache.c1, &dc);
        let dh1 = silu_backward(&cache.h1, &da1);
        let dxn = self.norm1.backward(p, g, &cache.n1, &dh1, hw);
        dx.iter_mut().zip(&dxn).for_each(|(a, b)| *a += *b);
        dx
    }
}

/// Layer offsets of the network; the parameters themselves are external.
#[derive(Debug, Clone)]
pub struct UNet {
    arch: Arch,
    time1: Linear,
    time2: Linear,
    stem: Conv,
    enc: Vec<ResBlock>,
    mid: ResBlock,
    dec: Vec<ResBlock>,
    norm_out: GroupNorm,
    conv_out: Conv,
    layout: LayoutBuilder,
}

/// Everything the backward pass needs from one forward evaluation.
pub struct ForwardCache<T> {
    t_pos: f64,
    temb0: Vec<T>,
    t1: Vec<T>,
    t2: Vec<T>,
    temb: Vec<T>,
    stem: ConvCache<T>,
    enc: Vec<ResCache<T>>,
    mid: ResCache<T>,
    dec: Vec<ResCache<T>>,
    nout: NormCache<T>,
    hout: Vec<T>,
    cout: ConvCache<T>,
}

impl UNet {
    pub fn new(arch: &Arch) -> Result<Self> {
        arch.validate()?;
        let mut lb = LayoutBuilder::default();
        let d = arch.time_dim;
        let time1 = Linear::new(&mut lb, "time.fc1", d, d);
        let time2 = Linear::new(&mut lb, "time.fc2", d, d);
        let w = &arch.widths;
        let n = w.len();
        let stem = Conv::new(&mut lb, "stem", 1, w[0], 3);
        let mut enc = Vec::with_capacity(n);
        for i in 0..n {
            let cin = if i == 0 { w[0] } else { w[i - 1] };
            enc.push(ResBlock::new(&mut lb, &format!("enc{i}"), cin, w[i], arch));
        }
        let mid = ResBlock::new(&mut lb, "mid", w[n - 1], w[n - 1], arch);
        let mut dec = Vec::with_capacity(n);
        for i in 0..n {
            let up = if i == n - 1 { w[n - 1] } else { w[i + 1] };
            dec.push(ResBlock::new(&mut lb, &format!("dec{i}"), up + w[i], w[i], arch));
        }
        let norm_out = GroupNorm::new(&mut lb, "out.norm", w[0], arch.groups);
        let conv_out = Conv::new(&mut lb, "out.conv", w[0], 1, 3);
        Ok(Self {
            arch: arch.clone(),
            time1,
            time2,
            stem,
            enc,
            mid,
            dec,
            norm_out,
            conv_out,
            layout: lb,
        })
    }

    pub fn arch(&self) -> &Arch {
        &self.arch
    }

    pub fn param_count(&self) -> usize {
        self.layout.total
    }

    pub fn segments(&self) -> &[Segment] {
        &self.layout.segments
    }

    pub(crate) fn layout(&self) -> &LayoutBuilder {
        &self.layout
    }

    /// Embedding position for step `t` of a `steps`-step schedule.
    pub fn time_position(t: usize, steps: usize) -> f64 {
        1000.0 * t as f64 / steps as f64
    }

    pub fn forward<T: Scalar>(&self, p: &[T], x: &[T], t_pos: f64) -> (Vec<T>, ForwardCache<T>) {
        let (mut h, mut w) = (self.arch.height, self.arch.width);
        debug_assert_eq!(x.len(), h * w);
        let temb0 = sinusoidal::<T>(t_pos, self.arch.time_dim);
        let t1 = self.time1.forward(p, &temb0);
        let t2 = self.time2.forward(p, &silu(&t1));
        let temb = silu(&t2);

        let (mut act, stem) = self.stem.forward(p, x, h, w);
        let mut skips = Vec::with_capacity(self.enc.len());
        let mut enc = Vec::with_capacity(self.enc.len());
        for block in &self.enc {
            let (out, cache) = block.forward(p, &act, &temb, h, w);
            enc.push(cache);
            act = avg_pool2(&out, block.cout, h, w);
            skips.push(out);
            h /= 2;
            w /= 2;
        }
        let (out, mid) = self.mid.forward(p, &act, &temb, h, w);
        act = out;
        let mut dec: Vec<ResCache<T>> = Vec::with_capacity(self.dec.len());
        let mut channels = self.mid.cout;
        for (i, block) in self.dec.iter().enumerate().rev() {
            let mut up = upsample2(&act, channels, h, w);
            h *= 2;
            w *= 2;
            up.extend_from_slice(&skips[i]);
            let (out, cache) = block.forward(p, &up, &temb, h, w);
            dec.push(cache);
            act = out;
            channels = block.cout;
        }
        dec.reverse();
        let (n, nout) = self.norm_out.forward(p, &act, h * w);
        let (y, cout) = self.conv_out.forward(p, &silu(&n), h, w);
        (
            y,
            ForwardCache {
                t_pos,
                temb0,
                t1,
                t2,
                temb,
                stem,
                enc,
                mid,
                dec,
                nout,
                hout: n,
                cout,
            },
        )
    }

    /// Accumulate `d(loss)/d(params)` into `g` given `d(loss)/d(output)`.
    pub fn backward<T: Scalar>(&self, p: &[T], g: &mut [T], cache: &ForwardCache<T>, dy: &[T]) {
        debug_assert!(cache.t_pos.is_finite());
        let n = self.enc.len();
        let (h0, w0) = (self.arch.height, self.arch.width);
        let hw_at = |level: usize| (h0 >> level) * (w0 >> level);
        let mut dtemb = vec![T::zero(); self.arch.time_dim];

        let da = self.conv_out.backward(p, g, &cache.cout, dy);
        let dn = silu_backward(&cache.hout, &da);
        let mut d = self.norm_out.backward(p, g, &cache.nout, &dn, hw_at(0));

        let mut dskips: Vec<Vec<T>> = vec![Vec::new(); n];
        for i in 0..n {
            let block = &self.dec[i];
            let din = block.backward(p, g, &cache.dec[i], &cache.temb, &d, &mut dtemb, hw_at(i));
            let up_channels = if i == n - 1 { self.mid.cout } else { self.dec[i + 1].cout };
            let split = up_channels * hw_at(i);
            dskips[i] = din[split..].to_vec();
            d = upsample2_backward(&din[..split], up_channels, h0 >> (i + 1), w0 >> (i + 1));
        }
        d = self
            .mid
            .backward(p, g, &cache.mid, &cache.temb, &d, &mut dtemb, hw_at(n));
        for i in (0..n).rev() {
            let block = &self.enc[i];
            let mut dout = avg_pool2_backward(&d, block.cout, h0 >> i, w0 >> i);
            dout.iter_mut().zip(&dskips[i]).for_each(|(a, b)| *a += *b);
            d = block.backward(p, g, &cache.enc[i], &cache.temb, &dout, &mut dtemb, hw_at(i));
        }
        self.stem.backward(p, g, &cache.stem, &d);

        let dt2 = silu_backward(&cache.t2, &dtemb);
        let ds1 = self.time2.backward(p, g, &silu(&cache.t1), &dt2);
        let dt1 = silu_backward(&cache.t1, &ds1);
        self.time1.backward(p, g, &cache.temb0, &dt1);
    }
}

/// Parameter count derived from the descriptor alone.
pub fn analytic_param_count(arch: &Arch) -> usize {
    let d = arch.time_dim;
    let block = |cin: usize, cout: usize| {
        GroupNorm::param_count(cin)
            + Conv::param_count(cin, cout, 3)
            + Linear::param_count(d, cout)
            + GroupNorm::param_count(cout)
            + Conv::param_count(cout, cout, 3)
            + if cin != cout { Conv::param_count(cin, cout, 1) } else { 0 }
    };
    let w = &arch.widths;
    let n = w.len();
    let mut total = 2 * Linear::param_count(d, d) + Conv::param_count(1, w[0], 3);
    for i in 0..n {
        total += block(if i == 0 { w[0] } else { w[i - 1] }, w[i]);
        total += block((if i == n - 1 { w[n - 1] } else { w[i + 1] }) + w[i], w[i]);
    }
    total += block(w[n - 1], w[n - 1]);
    total + GroupNorm::param_count(w[0]) + Conv::param_count(w[0], 1, 3)
}
