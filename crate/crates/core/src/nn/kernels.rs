//! Numeric kernels. Inputs and outputs are `f32`; sums run in `f64` in a
//! fixed order.

/// Dot product with four interleaved `f64` partial sums, combined as
/// `(s0 + s1) + (s2 + s3)` followed by the tail.
#[inline]
pub(crate) fn dot(a: &[f32], b: &[f32]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut s = [0.0f64; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let (ta, tb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        s[0] += f64::from(x[0]) * f64::from(y[0]);
        s[1] += f64::from(x[1]) * f64::from(y[1]);
        s[2] += f64::from(x[2]) * f64::from(y[2]);
        s[3] += f64::from(x[3]) * f64::from(y[3]);
    }
    let mut total = (s[0] + s[1]) + (s[2] + s[3]);
    for (x, y) in ta.iter().zip(tb) {
        total += f64::from(*x) * f64::from(*y);
    }
    total
}

#[inline]
fn axpy(acc: &mut [f64], alpha: f64, x: &[f32]) {
    for (a, &v) in acc.iter_mut().zip(x) {
        *a += alpha * f64::from(v);
    }
}

#[inline]
fn store(dst: &mut [f32], src: &[f64]) {
    for (d, &s) in dst.iter_mut().zip(src) {
        *d = s as f32;
    }
}

/// `y[n, :] = b + x[n, :] . W` with `W` stored `[inputs, outputs]`.
pub(crate) fn dense_forward(x: &[f32], w: &[f32], b: &[f32], rows: usize) -> Vec<f32> {
    let outputs = b.len();
    let inputs = w.len() / outputs;
    let mut y = vec![0.0f32; rows * outputs];
    let mut acc = vec![0.0f64; outputs];
    for n in 0..rows {
        for (a, &bias) in acc.iter_mut().zip(b) {
            *a = f64::from(bias);
        }
        let xr = &x[n * inputs..(n + 1) * inputs];
        for (k, &xv) in xr.iter().enumerate() {
            if xv != 0.0 {
                axpy(&mut acc, f64::from(xv), &w[k * outputs..(k + 1) * outputs]);
            }
        }
        store(&mut y[n * outputs..(n + 1) * outputs], &acc);
    }
    y
}

/// Returns `(dx, dW, db)`.
pub(crate) fn dense_backward(
    x: &[f32],
    w: &[f32],
    dy: &[f32],
    rows: usize,
    outputs: usize,
) -> (Vec<f32>, Vec<f32>, Vec<f32>) {
    let inputs = w.len() / outputs;
    let mut dx = vec![0.0f32; rows * inputs];
    let mut dw = vec![0.0f64; inputs * outputs];
    let mut db = vec![0.0f64; outputs];
    for n in 0..rows {
        let dyr = &dy[n * outputs..(n + 1) * outputs];
        let xr = &x[n * inputs..(n + 1) * inputs];
        for (k, d) in dx[n * inputs..(n + 1) * inputs].iter_mut().enumerate() {
            *d = dot(&w[k * outputs..(k + 1) * outputs], dyr) as f32;
        }
        for (k, &xv) in xr.iter().enumerate() {
            if xv != 0.0 {
                axpy(&mut dw[k * outputs..(k + 1) * outputs], f64::from(xv), dyr);
            }
        }
        for (a, &g) in db.iter_mut().zip(dyr) {
            *a += f64::from(g);
        }
    }
    let mut dw32 = vec![0.0f32; dw.len()];
    store(&mut dw32, &dw);
    let mut db32 = vec![0.0f32; outputs];
    store(&mut db32, &db);
    (dx, dw32, db32)
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct Window {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
    pub out_height: usize,
    pub out_width: usize,
}

impl Window {
    fn in_plane(&self) -> usize {
        self.height * self.width
    }

    fn out_plane(&self) -> usize {
        self.out_height * self.out_width
    }

    fn is_pointwise(&self) -> bool {
        self.kernel == 1 && self.stride == 1 && self.padding == 0
    }

    /// Input coordinate for output position `o` and kernel offset `k`.
    #[inline]
    fn source(&self, o: usize, k: usize, limit: usize) -> Option<usize> {
        let pos = (o * self.stride + k) as isize - self.padding as isize;
        (pos >= 0 && (pos as usize) < limit).then_some(pos as usize)
    }

    /// Output positions `[lo, hi)` whose tap at offset `k` lands inside
    /// `[0, limit)`.
    fn valid_range(&self, k: usize, limit: usize, out: usize) -> (usize, usize) {
        let (s, p) = (self.stride, self.padding);
        let lo = if k >= p { 0 } else { (p - k).div_ceil(s) };
        let hi = if limit + p > k { ((limit + p - k - 1) / s + 1).min(out) } else { 0 };
        (lo, hi.max(lo))
    }

    /// Column matrix `[C * k * k, out_plane]` for one image.
    fn im2col(&self, img: &[f32]) -> Vec<f32> {
        let k = self.kernel;
        let p = self.out_plane();
        let (s, pad) = (self.stride, self.padding);
        let mut col = vec![0.0f32; self.channels * k * k * p];
        for c in 0..self.channels {
            let plane = &img[c * self.in_plane()..(c + 1) * self.in_plane()];
            for ky in 0..k {
                let (oy_lo, oy_hi) = self.valid_range(ky, self.height, self.out_height);
                for kx in 0..k {
                    let (ox_lo, ox_hi) = self.valid_range(kx, self.width, self.out_width);
                    if ox_lo >= ox_hi {
                        continue;
                    }
                    let row = &mut col[((c * k + ky) * k + kx) * p..][..p];
                    for oy in oy_lo..oy_hi {
                        let iy = oy * s + ky - pad;
                        let src = &plane[iy * self.width..(iy + 1) * self.width];
                        let dst = &mut row[oy * self.out_width..(oy + 1) * self.out_width];
                        let ix0 = ox_lo * s + kx - pad;
                        if s == 1 {
                            dst[ox_lo..ox_hi].copy_from_slice(&src[ix0..ix0 + (ox_hi - ox_lo)]);
                        } else {
                            for (d, &v) in dst[ox_lo..ox_hi].iter_mut().zip(src[ix0..].iter().step_by(s)) {
                                *d = v;
                            }
                        }
                    }
                }
            }
        }
        col
    }

    fn col2im(&self, col: &[f64], img: &mut [f64]) {
        let k = self.kernel;
        let p = self.out_plane();
        for c in 0..self.channels {
            let plane = &mut img[c * self.in_plane()..(c + 1) * self.in_plane()];
            for ky in 0..k {
                for kx in 0..k {
                    let row = &col[((c * k + ky) * k + kx) * p..][..p];
                    for oy in 0..self.out_height {
                        let Some(iy) = self.source(oy, ky, self.height) else {
                            continue;
                        };
                        for ox in 0..self.out_width {
                            if let Some(ix) = self.source(ox, kx, self.width) {
                                plane[iy * self.width + ix] += row[oy * self.out_width + ox];
                            }
                        }
                    }
                }
            }
        }
    }
}

/// `out[o, j] = sum_i a[o, i] * b[i, j]` with `a` `[rows, inner]` and `b`
/// `[inner, cols]`. Each entry is summed from zero in ascending `i`, the same
/// order as a plain triple loop, so neither the tiling nor the instruction set
/// changes any result.
fn matmul_f64(a: &[f32], b: &[f32], rows: usize, inner: usize, cols: usize, out: &mut [f64]) {
    assert!(a.len() >= rows * inner && b.len() >= inner * cols && out.len() >= rows * cols);
    #[cfg(target_arch = "x86_64")]
    if std::arch::is_x86_feature_detected!("avx2") {
        // SAFETY: the CPU supports AVX2.
        unsafe { matmul_avx2(a, b, rows, inner, cols, out) };
        return;
    }
    matmul_tiled::<4, 4>(a, b, rows, inner, cols, out);
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2")]
unsafe fn matmul_avx2(a: &[f32], b: &[f32], rows: usize, inner: usize, cols: usize, out: &mut [f64]) {
    matmul_tiled::<4, 8>(a, b, rows, inner, cols, out);
}

#[inline(always)]
fn matmul_tiled<const R: usize, const C: usize>(
    a: &[f32],
    b: &[f32],
    rows: usize,
    inner: usize,
    cols: usize,
    out: &mut [f64],
) {
    let mut panel = vec![0.0f64; R * inner];
    let mut o = 0;
    while o < rows {
        let oc = R.min(rows - o);
        if oc == R {
            for i in 0..inner {
                for t in 0..R {
                    panel[i * R + t] = f64::from(a[(o + t) * inner + i]);
                }
            }
        }
        let mut j = 0;
        while j < cols {
            let jc = C.min(cols - j);
            if oc == R && jc == C {
                let mut acc = [[0.0f64; C]; R];
                for (brow, av) in b[..inner * cols].chunks_exact(cols).zip(panel.chunks_exact(R)) {
                    let bv: &[f32; C] = brow[j..j + C].try_into().unwrap();
                    let bv = bv.map(f64::from);
                    let av: &[f64; R] = av.try_into().unwrap();
                    for t in 0..R {
                        for u in 0..C {
                            acc[t][u] += av[t] * bv[u];
                        }
                    }
                }
                for (t, row) in acc.iter().enumerate() {
                    out[(o + t) * cols + j..][..C].copy_from_slice(row);
                }
            } else {
                for t in 0..oc {
                    for u in 0..jc {
                        let mut s = 0.0f64;
                        for i in 0..inner {
                            s += f64::from(a[(o + t) * inner + i]) * f64::from(b[i * cols + j + u]);
                        }
                        out[(o + t) * cols + j + u] = s;
                    }
                }
            }
            j += C;
        }
        o += R;
    }
}

pub(crate) fn conv_forward(x: &[f32], w: &[f32], win: &Window, out_channels: usize, batch: usize) -> Vec<f32> {
    let p = win.out_plane();
    let r = win.channels * win.kernel * win.kernel;
    let in_len = win.channels * win.in_plane();
    let mut y = vec![0.0f32; batch * out_channels * p];
    let mut acc = vec![0.0f64; out_channels * p];
    for n in 0..batch {
        let img = &x[n * in_len..(n + 1) * in_len];
        let owned;
        let col: &[f32] = if win.is_pointwise() {
            img
        } else {
            owned = win.im2col(img);
            &owned
        };
        matmul_f64(w, col, out_channels, r, p, &mut acc);
        store(&mut y[n * out_channels * p..(n + 1) * out_channels * p], &acc);
    }
    y
}

/// Returns `(dx, dW)`.
pub(crate) fn conv_backward(
    x: &[f32],
    w: &[f32],
    dy: &[f32],
    win: &Window,
    out_channels: usize,
    batch: usize,
) -> (Vec<f32>, Vec<f32>) {
    let p = win.out_plane();
    let r = win.channels * win.kernel * win.kernel;
    let in_len = win.channels * win.in_plane();
    let mut dw = vec![0.0f64; out_channels * r];
    let mut dx = vec![0.0f32; batch * in_len];
    let mut dcol = vec![0.0f64; r * p];
    let mut wt = vec![0.0f32; r * out_channels];
    for co in 0..out_channels {
        for ri in 0..r {
            wt[ri * out_channels + co] = w[co * r + ri];
        }
    }
    let mut dimg = vec![0.0f64; in_len];
    for n in 0..batch {
        let img = &x[n * in_len..(n + 1) * in_len];
        let owned;
        let col: &[f32] = if win.is_pointwise() {
            img
        } else {
            owned = win.im2col(img);
            &owned
        };
        let dyn_ = &dy[n * out_channels * p..(n + 1) * out_channels * p];
        for co in 0..out_channels {
            let g = &dyn_[co * p..(co + 1) * p];
            for ri in 0..r {
                dw[co * r + ri] += dot(g, &col[ri * p..(ri + 1) * p]);
            }
        }
        matmul_f64(&wt, dyn_, r, out_channels, p, &mut dcol);
        let out = &mut dx[n * in_len..(n + 1) * in_len];
        if win.is_pointwise() {
            store(out, &dcol);
        } else {
            dimg.fill(0.0);
            win.col2im(&dcol, &mut dimg);
            store(out, &dimg);
        }
    }
    let mut dw32 = vec![0.0f32; dw.len()];
    store(&mut dw32, &dw);
    (dx, dw32)
}

/// Average pooling; padded positions are excluded from the divisor.
pub(crate) fn avg_pool_forward(x: &[f32], win: &Window, batch: usize) -> Vec<f32> {
    let (ip, op) = (win.in_plane(), win.out_plane());
    let mut y = vec![0.0f32; batch * win.channels * op];
    let taps = |o: usize, limit: usize| {
        let start = (o * win.stride) as isize - win.padding as isize;
        let lo = start.max(0) as usize;
        let hi = ((start + win.kernel as isize).max(0) as usize).min(limit);
        (lo, hi.max(lo))
    };
    let rows: Vec<(usize, usize)> = (0..win.out_height).map(|oy| taps(oy, win.height)).collect();
    let columns: Vec<(usize, usize)> = (0..win.out_width).map(|ox| taps(ox, win.width)).collect();
    for plane in 0..batch * win.channels {
        let src = &x[plane * ip..(plane + 1) * ip];
        let dst = &mut y[plane * op..(plane + 1) * op];
        for (oy, &(y0, y1)) in rows.iter().enumerate() {
            for (ox, &(x0, x1)) in columns.iter().enumerate() {
                let mut sum = 0.0f64;
                for iy in y0..y1 {
                    for &v in &src[iy * win.width + x0..iy * win.width + x1] {
                        sum += f64::from(v);
                    }
                }
                let count = ((y1 - y0) * (x1 - x0)).max(1);
                dst[oy * win.out_width + ox] = (sum / count as f64) as f32;
            }
        }
    }
    y
}

pub(crate) fn avg_pool_backward(dy: &[f32], win: &Window, batch: usize) -> Vec<f32> {
    let (ip, op) = (win.in_plane(), win.out_plane());
    let mut dx = vec![0.0f32; batch * win.channels * ip];
    let mut acc = vec![0.0f64; ip];
    let mut taps = Vec::with_capacity(win.kernel * win.kernel);
    for plane in 0..batch * win.channels {
        let g = &dy[plane * op..(plane + 1) * op];
        acc.fill(0.0);
        for oy in 0..win.out_height {
            for ox in 0..win.out_width {
                taps.clear();
                for ky in 0..win.kernel {
                    let Some(iy) = win.source(oy, ky, win.height) else {
                        continue;
                    };
                    for kx in 0..win.kernel {
                        if let Some(ix) = win.source(ox, kx, win.width) {
                            taps.push(iy * win.width + ix);
                        }
                    }
                }
                let share = f64::from(g[oy * win.out_width + ox]) / taps.len().max(1) as f64;
                for &t in &taps {
                    acc[t] += share;
                }
            }
        }
        store(&mut dx[plane * ip..(plane + 1) * ip], &acc);
    }
    dx
}

/// Per-channel normalisation over batch and spatial positions. Returns the
/// normalised values and each channel's `1 / sqrt(var + eps)`.
pub(crate) fn batch_norm_forward(
    x: &[f32],
    batch: usize,
    channels: usize,
    plane: usize,
    eps: f64,
) -> (Vec<f32>, Vec<f64>) {
    let mut y = vec![0.0f32; x.len()];
    let mut inv_std = vec![0.0f64; channels];
    let count = (batch * plane) as f64;
    for c in 0..channels {
        let mut sum = 0.0f64;
        for n in 0..batch {
            let s = &x[(n * channels + c) * plane..][..plane];
            sum += s.iter().map(|&v| f64::from(v)).sum::<f64>();
        }
        let mean = sum / count;
        let mut sq = 0.0f64;
        for n in 0..batch {
            let s = &x[(n * channels + c) * plane..][..plane];
            sq += s.iter().map(|&v| (f64::from(v) - mean).powi(2)).sum::<f64>();
        }
        let istd = 1.0 / (sq / count + eps).sqrt();
        inv_std[c] = istd;
        for n in 0..batch {
            let base = (n * channels + c) * plane;
            for (d, &v) in y[base..base + plane].iter_mut().zip(&x[base..base + plane]) {
                *d = ((f64::from(v) - mean) * istd) as f32;
            }
        }
    }
    (y, inv_std)
}

/// `dx = inv_std * (dy - mean(dy) - y * mean(dy * y))` per channel.
pub(crate) fn batch_norm_backward(
    y: &[f32],
    dy: &[f32],
    inv_std: &[f64],
    batch: usize,
    plane: usize,
) -> Vec<f32> {
    let channels = inv_std.len();
    let count = (batch * plane) as f64;
    let mut dx = vec![0.0f32; y.len()];
    for (c, &istd) in inv_std.iter().enumerate() {
        let mut sum_dy = 0.0f64;
        let mut sum_dy_y = 0.0f64;
        for n in 0..batch {
            let base = (n * channels + c) * plane;
            for (&g, &v) in dy[base..base + plane].iter().zip(&y[base..base + plane]) {
                sum_dy += f64::from(g);
                sum_dy_y += f64::from(g) * f64::from(v);
            }
        }
        let (mean_dy, mean_dy_y) = (sum_dy / count, sum_dy_y / count);
        for n in 0..batch {
            let base = (n * channels + c) * plane;
            for i in base..base + plane {
                dx[i] = (istd
                    * (f64::from(dy[i]) - mean_dy - f64::from(y[i]) * mean_dy_y))
                    as f32;
            }
        }
    }
    dx
}

pub(crate) fn global_avg_pool_forward(x: &[f32], planes: usize, plane: usize) -> Vec<f32> {
    (0..planes)
        .map(|i| {
            let s: f64 = x[i * plane..(i + 1) * plane].iter().map(|&v| f64::from(v)).sum();
            (s / plane as f64) as f32
        })
        .collect()
}

pub(crate) fn global_avg_pool_backward(dy: &[f32], plane: usize) -> Vec<f32> {
    let mut dx = Vec::with_capacity(dy.len() * plane);
    for &g in dy {
        let share = (f64::from(g) / plane as f64) as f32;
        dx.extend(std::iter::repeat_n(share, plane));
    }
    dx
}
