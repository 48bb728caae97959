//! Dense channel-first volumes and the conv/upsample kernels the network is
//! built from. Layout is (C, Z, Y, X) row-major with X fastest, so the
//! stride-1 convolution inner loops are contiguous saxpys.

use crate::scalar::Real;

/// A (channels, Z, Y, X) tensor backed by a flat buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct Vol<T> {
    pub c: usize,
    pub z: usize,
    pub y: usize,
    pub x: usize,
    pub data: Vec<T>,
}

impl<T: Real> Vol<T> {
    pub fn zeros(c: usize, z: usize, y: usize, x: usize) -> Self {
        Self {
            c,
            z,
            y,
            x,
            data: vec![T::zero(); c * z * y * x],
        }
    }

    pub fn from_vec(c: usize, z: usize, y: usize, x: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), c * z * y * x);
        Self { c, z, y, x, data }
    }

    pub fn spatial(&self) -> (usize, usize, usize) {
        (self.z, self.y, self.x)
    }

    #[inline]
    pub fn channel_offset(&self, c: usize) -> usize {
        c * self.z * self.y * self.x
    }

    #[inline]
    pub fn row_offset(&self, c: usize, z: usize, y: usize) -> usize {
        ((c * self.z + z) * self.y + y) * self.x
    }
}

/// Parameters (or gradients) of one 3D convolution: weights indexed
/// [co][ci][kz][ky][kx] plus one bias per output channel.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvParam<T> {
    pub c_out: usize,
    pub c_in: usize,
    pub k: usize,
    pub w: Vec<T>,
    pub b: Vec<T>,
}

impl<T: Real> ConvParam<T> {
    pub fn zeros(c_out: usize, c_in: usize, k: usize) -> Self {
        Self {
            c_out,
            c_in,
            k,
            w: vec![T::zero(); c_out * c_in * k * k * k],
            b: vec![T::zero(); c_out],
        }
    }

    #[inline]
    fn w_at(&self, co: usize, ci: usize, kz: usize, ky: usize, kx: usize) -> T {
        self.w[(((co * self.c_in + ci) * self.k + kz) * self.k + ky) * self.k + kx]
    }

    #[inline]
    fn w_idx(&self, co: usize, ci: usize, kz: usize, ky: usize, kx: usize) -> usize {
        (((co * self.c_in + ci) * self.k + kz) * self.k + ky) * self.k + kx
    }

    pub fn len(&self) -> usize {
        self.w.len() + self.b.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Output extent of one spatial axis for kernel k, pad k/2, given stride.
pub fn conv_out_len(n: usize, k: usize, stride: usize) -> usize {
    let pad = k / 2;
    (n + 2 * pad - k) / stride + 1
}

/// Valid output index range [lo, hi) along one axis for kernel tap `kk`:
/// input index `o * stride + kk - pad` stays inside [0, n).
#[inline]
fn tap_bounds(n_in: usize, n_out: usize, kk: usize, pad: usize, stride: usize) -> (usize, usize) {
    let shift = kk as isize - pad as isize;
    let lo = if shift >= 0 {
        0
    } else {
        ((-shift) as usize).div_ceil(stride)
    };
    let max_in = n_in as isize - shift; // exclusive bound on o * stride
    if max_in <= 0 {
        return (0, 0);
    }
    let hi = ((max_in as usize).div_ceil(stride)).min(n_out);
    (lo.min(hi), hi)
}

/// Direct 3D convolution, zero padding k/2.
pub fn conv3_forward<T: Real>(input: &Vol<T>, p: &ConvParam<T>, stride: usize) -> Vol<T> {
    assert_eq!(input.c, p.c_in);
    let pad = p.k / 2;
    let (zo, yo, xo) = (
        conv_out_len(input.z, p.k, stride),
        conv_out_len(input.y, p.k, stride),
        conv_out_len(input.x, p.k, stride),
    );
    let mut out = Vol::zeros(p.c_out, zo, yo, xo);

    for co in 0..p.c_out {
        let bias = p.b[co];
        let co_base = out.channel_offset(co);
        out.data[co_base..co_base + zo * yo * xo]
            .iter_mut()
            .for_each(|v| *v = bias);

        for ci in 0..p.c_in {
            for kz in 0..p.k {
                let (z_lo, z_hi) = tap_bounds(input.z, zo, kz, pad, stride);
                for ky in 0..p.k {
                    let (y_lo, y_hi) = tap_bounds(input.y, yo, ky, pad, stride);
                    for kx in 0..p.k {
                        let (x_lo, x_hi) = tap_bounds(input.x, xo, kx, pad, stride);
                        if x_lo >= x_hi {
                            continue;
                        }
                        let wv = p.w_at(co, ci, kz, ky, kx);
                        if wv == T::zero() {
                            continue;
                        }
                        for z in z_lo..z_hi {
                            let zi = z * stride + kz - pad;
                            for y in y_lo..y_hi {
                                let yi = y * stride + ky - pad;
                                let o_base = out.row_offset(co, z, y);
                                let i_base = input.row_offset(ci, zi, yi);
                                if stride == 1 {
                                    let shift = kx as isize - pad as isize;
                                    let i_start = (i_base as isize + x_lo as isize + shift) as usize;
                                    let len = x_hi - x_lo;
                                    let orow = &mut out.data[o_base + x_lo..o_base + x_hi];
                                    let irow = &input.data[i_start..i_start + len];
                                    for (ov, iv) in orow.iter_mut().zip(irow) {
                                        *ov += wv * *iv;
                                    }
                                } else {
                                    for x in x_lo..x_hi {
                                        let xi = x * stride + kx - pad;
                                        out.data[o_base + x] += wv * input.data[i_base + xi];
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

/// Gradients of a convolution: fills `grad` (same shape as `p`) and returns
/// the gradient with respect to the input.
pub fn conv3_backward<T: Real>(
    input: &Vol<T>,
    p: &ConvParam<T>,
    stride: usize,
    g_out: &Vol<T>,
    grad: &mut ConvParam<T>,
) -> Vol<T> {
    let pad = p.k / 2;
    let (zo, yo, xo) = (g_out.z, g_out.y, g_out.x);
    let mut g_in = Vol::zeros(input.c, input.z, input.y, input.x);

    for co in 0..p.c_out {
        // Bias gradient: plain sum over the output channel.
        let co_base = g_out.channel_offset(co);
        let mut acc = T::zero();
        for &g in &g_out.data[co_base..co_base + zo * yo * xo] {
            acc += g;
        }
        grad.b[co] += acc;

        for ci in 0..p.c_in {
            for kz in 0..p.k {
                let (z_lo, z_hi) = tap_bounds(input.z, zo, kz, pad, stride);
                for ky in 0..p.k {
                    let (y_lo, y_hi) = tap_bounds(input.y, yo, ky, pad, stride);
                    for kx in 0..p.k {
                        let (x_lo, x_hi) = tap_bounds(input.x, xo, kx, pad, stride);
                        if x_lo >= x_hi {
                            continue;
                        }
                        let wv = p.w_at(co, ci, kz, ky, kx);
                        let mut wg = T::zero();
                        for z in z_lo..z_hi {
                            let zi = z * stride + kz - pad;
                            for y in y_lo..y_hi {
                                let yi = y * stride + ky - pad;
                                let o_base = g_out.row_offset(co, z, y);
                                let i_base = input.row_offset(ci, zi, yi);
                                if stride == 1 {
                                    let shift = kx as isize - pad as isize;
                                    let i_start = (i_base as isize + x_lo as isize + shift) as usize;
                                    let len = x_hi - x_lo;
                                    let grow = &g_out.data[o_base + x_lo..o_base + x_hi];
                                    let irow = &input.data[i_start..i_start + len];
                                    for (gv, iv) in grow.iter().zip(irow) {
                                        wg += *gv * *iv;
                                    }
                                    let girow = &mut g_in.data[i_start..i_start + len];
                                    for (gi, gv) in girow.iter_mut().zip(grow) {
                                        *gi += wv * *gv;
                                    }
                                } else {
                                    for x in x_lo..x_hi {
                                        let xi = x * stride + kx - pad;
                                        let gv = g_out.data[o_base + x];
                                        wg += gv * input.data[i_base + xi];
                                        g_in.data[i_base + xi] += wv * gv;
                                    }
                                }
                            }
                        }
                        let wi = grad.w_idx(co, ci, kz, ky, kx);
                        grad.w[wi] += wg;
                    }
                }
            }
        }
    }
    g_in
}

/// In-place ReLU; returns the activated volume.
pub fn relu<T: Real>(mut v: Vol<T>) -> Vol<T> {
    for e in v.data.iter_mut() {
        if *e < T::zero() {
            *e = T::zero();
        }
    }
    v
}

/// ReLU gradient: zero wherever the activated output was zero.
pub fn relu_backward<T: Real>(activated: &Vol<T>, mut g: Vol<T>) -> Vol<T> {
    for (gv, &av) in g.data.iter_mut().zip(&activated.data) {
        if av <= T::zero() {
            *gv = T::zero();
        }
    }
    g
}

/// Nearest-neighbor 2x upsampling of every spatial axis.
pub fn upsample2<T: Real>(input: &Vol<T>) -> Vol<T> {
    let mut out = Vol::zeros(input.c, input.z * 2, input.y * 2, input.x * 2);
    for c in 0..input.c {
        for z in 0..out.z {
            for y in 0..out.y {
                let i_base = input.row_offset(c, z / 2, y / 2);
                let o_base = out.row_offset(c, z, y);
                for x in 0..out.x {
                    out.data[o_base + x] = input.data[i_base + x / 2];
                }
            }
        }
    }
    out
}

/// Adjoint of [`upsample2`]: each input cell collects its 8 children.
pub fn upsample2_backward<T: Real>(g_out: &Vol<T>) -> Vol<T> {
    let mut g_in = Vol::zeros(g_out.c, g_out.z / 2, g_out.y / 2, g_out.x / 2);
    for c in 0..g_out.c {
        for z in 0..g_out.z {
            for y in 0..g_out.y {
                let o_base = g_out.row_offset(c, z, y);
                let i_base = g_in.row_offset(c, z / 2, y / 2);
                for x in 0..g_out.x {
                    g_in.data[i_base + x / 2] += g_out.data[o_base + x];
                }
            }
        }
    }
    g_in
}

/// Elementwise sum of two equally shaped volumes.
pub fn add<T: Real>(mut a: Vol<T>, b: &Vol<T>) -> Vol<T> {
    assert_eq!(a.data.len(), b.data.len());
    for (av, bv) in a.data.iter_mut().zip(&b.data) {
        *av += *bv;
    }
    a
}

/// Logistic sigmoid applied elementwise.
pub fn sigmoid<T: Real>(mut v: Vol<T>) -> Vol<T> {
    for e in v.data.iter_mut() {
        *e = T::one() / (T::one() + (-*e).exp());
    }
    v
}
