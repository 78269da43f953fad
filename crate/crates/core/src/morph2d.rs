//! Sliding-window 2D morphology and the image-side plumbing.
//!
//! `dilate2d`/`erode2d` slide a structuring element over the image:
//!
//! ```text
//! (X (+) S)(i,j) = max_{(u,v)} X(i - (u - au), j - (v - av)) + S(u,v)
//! (X (-) S)(i,j) = min_{(u,v)} X(i + (u - au), j + (v - av)) - S(u,v)
//! ```
//!
//! with the anchor `(au, av)` at the centre cell for odd sizes (top-left of
//! centre for even sizes). Each output pixel is exactly a 1D dilation of the
//! flattened window by the flattened structuring element —
//! [`flatten_window_equiv`] exposes that cross-check — so every 1D property
//! (duality, soft sandwich, gradients) carries over.
//!
//! Borders are handled by [`Padding`]: `Replicate` clamps source indices
//! (the training default), `Infinite` pads with the reduction identity
//! (-inf for dilation, +inf for erosion), which preserves the textbook
//! morphology identities.

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::network::{sigmoid, Mode};
use crate::scalar::Real;
use crate::tropical::{argmax_value, log_sum_exp_scaled, Hardness, Vector};

/// 2D array with channels, planar layout: `data[(c*h + i)*w + j]`.
///
/// Pixel data for images lives in `[0,1]`; feature maps are unconstrained
/// (but always finite).
#[derive(Debug, Clone, PartialEq)]
pub struct ImageGrid<T> {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<T>,
}

impl<T: Real> ImageGrid<T> {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<T>) -> Result<Self> {
        if height == 0 || width == 0 || channels == 0 {
            return Err(Error::dim("image dims must be >= 1"));
        }
        if data.len() != height * width * channels {
            return Err(Error::dim(format!(
                "{height}x{width}x{channels} image needs {} values, got {}",
                height * width * channels,
                data.len()
            )));
        }
        if let Some(bad) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::nonfinite(format!("pixel {bad} is {}", data[bad])));
        }
        Ok(ImageGrid { height, width, channels, data })
    }

    pub fn zeros(height: usize, width: usize, channels: usize) -> Self {
        ImageGrid {
            height,
            width,
            channels,
            data: vec![T::zero(); height * width * channels],
        }
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> T) -> Result<Self> {
        let mut data = Vec::with_capacity(height * width);
        for i in 0..height {
            for j in 0..width {
                data.push(f(i, j));
            }
        }
        ImageGrid::new(height, width, 1, data)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn get(&self, c: usize, i: usize, j: usize) -> T {
        self.data[(c * self.height + i) * self.width + j]
    }

    pub fn set(&mut self, c: usize, i: usize, j: usize, v: T) {
        self.data[(c * self.height + i) * self.width + j] = v;
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    /// One channel as a fresh single-channel grid.
    pub fn channel(&self, c: usize) -> ImageGrid<T> {
        let plane = self.height * self.width;
        ImageGrid {
            height: self.height,
            width: self.width,
            channels: 1,
            data: self.data[c * plane..(c + 1) * plane].to_vec(),
        }
    }

    /// Stack single-channel grids of equal size into one multi-channel grid.
    pub fn stack(parts: &[ImageGrid<T>]) -> Result<ImageGrid<T>> {
        let first = parts.first().ok_or_else(|| Error::dim("stack of zero grids"))?;
        let mut data = Vec::with_capacity(first.height * first.width * parts.len());
        for p in parts {
            if p.height != first.height || p.width != first.width || p.channels != 1 {
                return Err(Error::dim("stack requires equal-size single-channel grids"));
            }
            data.extend_from_slice(&p.data);
        }
        ImageGrid::new(first.height, first.width, parts.len(), data)
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> ImageGrid<T> {
        ImageGrid {
            height: self.height,
            width: self.width,
            channels: self.channels,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    fn same_shape(&self, other: &ImageGrid<T>) -> Result<()> {
        if self.height != other.height
            || self.width != other.width
            || self.channels != other.channels
        {
            return Err(Error::dim(format!(
                "shape mismatch: {}x{}x{} vs {}x{}x{}",
                self.height, self.width, self.channels, other.height, other.width, other.channels
            )));
        }
        Ok(())
    }

    /// Long-format CSV (`channel,row,col,value`) for plotting feature maps.
    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "channel,row,col,value")?;
        for c in 0..self.channels {
            for i in 0..self.height {
                for j in 0..self.width {
                    writeln!(out, "{c},{i},{j},{}", self.get(c, i, j))?;
                }
            }
        }
        Ok(())
    }
}

/// Structuring element on an `a x b` grid with an anchor cell.
#[derive(Debug, Clone, PartialEq)]
pub struct StructuringElement2D<T> {
    rows: usize,
    cols: usize,
    anchor: (usize, usize),
    data: Vec<T>,
}

impl<T: Real> StructuringElement2D<T> {
    /// Anchor defaults to the centre cell `((a-1)/2, (b-1)/2)`.
    pub fn new(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::dim("structuring element dims must be >= 1"));
        }
        if data.len() != rows * cols {
            return Err(Error::dim(format!(
                "{rows}x{cols} structuring element needs {} values, got {}",
                rows * cols,
                data.len()
            )));
        }
        if let Some(bad) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::nonfinite(format!("SE entry {bad} is {}", data[bad])));
        }
        Ok(StructuringElement2D {
            rows,
            cols,
            anchor: ((rows - 1) / 2, (cols - 1) / 2),
            data,
        })
    }

    /// All-zero (flat) element: dilation becomes a local max filter.
    pub fn flat(rows: usize, cols: usize) -> Self {
        StructuringElement2D {
            rows,
            cols,
            anchor: ((rows - 1) / 2, (cols - 1) / 2),
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn anchor(&self) -> (usize, usize) {
        self.anchor
    }

    pub fn get(&self, u: usize, v: usize) -> T {
        self.data[u * self.cols + v]
    }

    pub fn set(&mut self, u: usize, v: usize, val: T) {
        debug_assert!(val.is_finite());
        self.data[u * self.cols + v] = val;
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    /// 180-degree rotation, anchor mirrored; the `S` of the duality identity
    /// `erode(X, S) = -dilate(-X, reflect(S))`.
    pub fn reflect(&self) -> StructuringElement2D<T> {
        let mut data = Vec::with_capacity(self.data.len());
        for u in (0..self.rows).rev() {
            for v in (0..self.cols).rev() {
                data.push(self.get(u, v));
            }
        }
        StructuringElement2D {
            rows: self.rows,
            cols: self.cols,
            anchor: (self.rows - 1 - self.anchor.0, self.cols - 1 - self.anchor.1),
            data,
        }
    }
}

/// Border policy for the sliding window.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Padding {
    /// Clamp source indices to the image edge (training default).
    Replicate,
    /// Pad with the reduction identity: -inf for dilation, +inf for erosion.
    Infinite,
}

fn check_fit<T: Real>(x: &ImageGrid<T>, s: &StructuringElement2D<T>) -> Result<()> {
    if x.channels != 1 {
        return Err(Error::Unsupported(
            "2D morphology operates on single-channel grids; split channels first".into(),
        ));
    }
    if s.rows > x.height || s.cols > x.width {
        return Err(Error::dim(format!(
            "{}x{} structuring element does not fit {}x{} image",
            s.rows, s.cols, x.height, x.width
        )));
    }
    Ok(())
}

/// Window geometry shared by the hot loops: image extent, SE anchor, access
/// direction (dilation mirrors the window), and border policy.
#[derive(Clone, Copy)]
struct WindowAccess {
    h: usize,
    w: usize,
    anchor: (usize, usize),
    mirrored: bool,
    padding: Padding,
}

impl WindowAccess {
    /// Source pixel paired with SE cell `(u,v)` at output `(i,j)`, or `None`
    /// if outside and padding is `Infinite`.
    #[inline]
    fn source(&self, i: usize, j: usize, u: usize, v: usize) -> Option<(usize, usize)> {
        let (du, dv) = (
            u as isize - self.anchor.0 as isize,
            v as isize - self.anchor.1 as isize,
        );
        let (si, sj) = if self.mirrored {
            (i as isize - du, j as isize - dv)
        } else {
            (i as isize + du, j as isize + dv)
        };
        match self.padding {
            Padding::Replicate => Some((
                si.clamp(0, self.h as isize - 1) as usize,
                sj.clamp(0, self.w as isize - 1) as usize,
            )),
            Padding::Infinite => {
                if si >= 0 && si < self.h as isize && sj >= 0 && sj < self.w as isize {
                    Some((si as usize, sj as usize))
                } else {
                    None
                }
            }
        }
    }
}

/// Grayscale dilation; same-size output.
pub fn dilate2d<T: Real>(
    x: &ImageGrid<T>,
    s: &StructuringElement2D<T>,
    padding: Padding,
) -> Result<ImageGrid<T>> {
    morph2d_apply(x, s, padding, Mode::Hard, true)
}

/// Grayscale erosion; same-size output.
pub fn erode2d<T: Real>(
    x: &ImageGrid<T>,
    s: &StructuringElement2D<T>,
    padding: Padding,
) -> Result<ImageGrid<T>> {
    morph2d_apply(x, s, padding, Mode::Hard, false)
}

/// Soft (log-sum-exp) dilation with hardness `beta`.
pub fn soft_dilate2d<T: Real>(
    x: &ImageGrid<T>,
    s: &StructuringElement2D<T>,
    h: Hardness<T>,
    padding: Padding,
) -> Result<ImageGrid<T>> {
    morph2d_apply(x, s, padding, Mode::Soft(h), true)
}

/// Soft erosion with hardness `beta`.
pub fn soft_erode2d<T: Real>(
    x: &ImageGrid<T>,
    s: &StructuringElement2D<T>,
    h: Hardness<T>,
    padding: Padding,
) -> Result<ImageGrid<T>> {
    morph2d_apply(x, s, padding, Mode::Soft(h), false)
}

fn morph2d_apply<T: Real>(
    x: &ImageGrid<T>,
    s: &StructuringElement2D<T>,
    padding: Padding,
    mode: Mode<T>,
    dilation: bool,
) -> Result<ImageGrid<T>> {
    check_fit(x, s)?;
    let (h, w) = (x.height, x.width);
    let access = WindowAccess { h, w, anchor: s.anchor, mirrored: dilation, padding };
    let mut out = ImageGrid::zeros(h, w, 1);
    let mut window: Vec<T> = Vec::with_capacity(s.rows * s.cols);
    for i in 0..h {
        for j in 0..w {
            window.clear();
            for u in 0..s.rows {
                for v in 0..s.cols {
                    if let Some((si, sj)) = access.source(i, j, u, v) {
                        let px = x.get(0, si, sj);
                        window.push(if dilation {
                            px + s.get(u, v)
                        } else {
                            s.get(u, v) - px
                        });
                    }
                }
            }
            let val = match mode {
                Mode::Hard => argmax_value(window.iter().copied()).1,
                Mode::Soft(hard) => log_sum_exp_scaled(&window, hard.beta(), None),
            };
            out.set(0, i, j, if dilation { val } else { -val });
        }
    }
    Ok(out)
}

/// Cross-check tying 2D to the 1D core: at an interior pixel, the dilation is
/// exactly the 1D dilation of the flattened window by the flattened element.
pub fn flatten_window_equiv<T: Real>(
    x: &ImageGrid<T>,
    s: &StructuringElement2D<T>,
    i: usize,
    j: usize,
) -> Result<T> {
    check_fit(x, s)?;
    let (au, av) = s.anchor;
    let top = i as isize - au as isize;
    let left = j as isize - av as isize;
    let bottom = top + s.rows as isize - 1;
    let right = left + s.cols as isize - 1;
    if top < 0 || left < 0 || bottom >= x.height as isize || right >= x.width as isize {
        return Err(Error::invalid(format!(
            "window at ({i},{j}) reaches off-image; interior pixels only"
        )));
    }
    let access = WindowAccess {
        h: x.height,
        w: x.width,
        anchor: s.anchor,
        mirrored: true,
        padding: Padding::Infinite,
    };
    let mut win = Vec::with_capacity(s.rows * s.cols);
    for u in 0..s.rows {
        for v in 0..s.cols {
            let (si, sj) = access
                .source(i, j, u, v)
                .expect("interior window is in-bounds");
            win.push(x.get(0, si, sj));
        }
    }
    let flat_window = Vector::new(win)?;
    let flat_se = Vector::new(s.data.clone())?;
    crate::tropical::dilate(&flat_window, &flat_se)
}

/// A 2D morphological block: `n` dilation plus `m` erosion filters per input
/// channel, then a per-pixel linear combination of the stacked feature maps.
///
/// Filter for (channel `c`, dilation slot `i`) sits at `filters_plus[c*n + i]`;
/// feature maps stack as all dilation maps (channel-major) then all erosion
/// maps, and `weights` is `c_out x (channels * (n + m))`.
#[derive(Debug, Clone, PartialEq)]
pub struct MorphBlock2D<T> {
    channels_in: usize,
    n_dilation: usize,
    n_erosion: usize,
    filters_plus: Vec<StructuringElement2D<T>>,
    filters_minus: Vec<StructuringElement2D<T>>,
    weights: Matrix<T>,
    bias: Option<Vec<T>>,
    mode: Mode<T>,
    padding: Padding,
}

impl<T: Real> MorphBlock2D<T> {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        channels_in: usize,
        filters_plus: Vec<StructuringElement2D<T>>,
        filters_minus: Vec<StructuringElement2D<T>>,
        weights: Matrix<T>,
        bias: Option<Vec<T>>,
        mode: Mode<T>,
        padding: Padding,
    ) -> Result<Self> {
        if channels_in == 0 {
            return Err(Error::dim("block needs >= 1 input channel"));
        }
        if !filters_plus.len().is_multiple_of(channels_in) || !filters_minus.len().is_multiple_of(channels_in) {
            return Err(Error::dim("filter count must be a multiple of the channel count"));
        }
        let n_dilation = filters_plus.len() / channels_in;
        let n_erosion = filters_minus.len() / channels_in;
        if n_dilation + n_erosion == 0 {
            return Err(Error::invalid("block needs at least one filter"));
        }
        let all = filters_plus.iter().chain(&filters_minus);
        let (a, b) = {
            let first = filters_plus.iter().chain(&filters_minus).next().expect("non-empty");
            (first.rows, first.cols)
        };
        for f in all {
            if f.rows != a || f.cols != b {
                return Err(Error::dim("all filters in a block share one size"));
            }
        }
        let maps = channels_in * (n_dilation + n_erosion);
        if weights.cols() != maps {
            return Err(Error::dim(format!(
                "combination weights expect {maps} feature maps, matrix has {} columns",
                weights.cols()
            )));
        }
        if let Some(bias) = &bias {
            if bias.len() != weights.rows() {
                return Err(Error::dim("bias length must equal output channel count"));
            }
        }
        Ok(MorphBlock2D {
            channels_in,
            n_dilation,
            n_erosion,
            filters_plus,
            filters_minus,
            weights,
            bias,
            mode,
            padding,
        })
    }

    pub fn n_dilation(&self) -> usize {
        self.n_dilation
    }

    pub fn n_erosion(&self) -> usize {
        self.n_erosion
    }

    pub fn out_channels(&self) -> usize {
        self.weights.rows()
    }

    pub fn filter_size(&self) -> (usize, usize) {
        let f = self
            .filters_plus
            .iter()
            .chain(&self.filters_minus)
            .next()
            .expect("block has at least one filter");
        (f.rows, f.cols)
    }

    pub fn filters_plus_mut(&mut self) -> &mut [StructuringElement2D<T>] {
        &mut self.filters_plus
    }

    pub fn filters_minus_mut(&mut self) -> &mut [StructuringElement2D<T>] {
        &mut self.filters_minus
    }

    pub fn weights_mut(&mut self) -> &mut Matrix<T> {
        &mut self.weights
    }

    /// Block tag, e.g. `DE_6^{3x3}-L_4`.
    pub fn tag(&self) -> String {
        let (a, b) = self.filter_size();
        let c = self.out_channels();
        if self.n_dilation == self.n_erosion {
            format!("DE_{}^{{{a}x{b}}}-L_{c}", self.n_dilation)
        } else {
            format!("D{}E{}^{{{a}x{b}}}-L_{c}", self.n_dilation, self.n_erosion)
        }
    }

    /// All feature maps in stacking order (dilation maps first).
    fn feature_maps(&self, x: &ImageGrid<T>) -> Result<Vec<ImageGrid<T>>> {
        if x.channels != self.channels_in {
            return Err(Error::dim(format!(
                "block expects {} channels, image has {}",
                self.channels_in, x.channels
            )));
        }
        let mut maps = Vec::with_capacity(self.channels_in * (self.n_dilation + self.n_erosion));
        for c in 0..self.channels_in {
            let plane = x.channel(c);
            for i in 0..self.n_dilation {
                let s = &self.filters_plus[c * self.n_dilation + i];
                maps.push(morph2d_apply(&plane, s, self.padding, self.mode, true)?);
            }
        }
        for c in 0..self.channels_in {
            let plane = x.channel(c);
            for j in 0..self.n_erosion {
                let s = &self.filters_minus[c * self.n_erosion + j];
                maps.push(morph2d_apply(&plane, s, self.padding, self.mode, false)?);
            }
        }
        Ok(maps)
    }

    /// Forward pass: filters, stack, per-pixel linear combination.
    pub fn forward(&self, x: &ImageGrid<T>) -> Result<ImageGrid<T>> {
        let maps = self.feature_maps(x)?;
        let (h, w) = (x.height, x.width);
        let c_out = self.out_channels();
        let mut out = ImageGrid::zeros(h, w, c_out);
        for c in 0..c_out {
            for i in 0..h {
                for j in 0..w {
                    let mut acc = self
                        .bias
                        .as_ref()
                        .map(|b| b[c])
                        .unwrap_or_else(T::zero);
                    for (f, map) in maps.iter().enumerate() {
                        acc += self.weights.get(c, f) * map.get(0, i, j);
                    }
                    out.set(c, i, j, acc);
                }
            }
        }
        Ok(out)
    }

    /// Reverse-mode gradients of `sum(upstream * output)` for every block
    /// parameter, plus the gradient with respect to the input image.
    pub fn backward(
        &self,
        x: &ImageGrid<T>,
        upstream: &ImageGrid<T>,
    ) -> Result<(Block2DGrads<T>, ImageGrid<T>)> {
        let maps = self.feature_maps(x)?;
        let (h, w) = (x.height, x.width);
        if upstream.height != h || upstream.width != w || upstream.channels != self.out_channels() {
            return Err(Error::dim("upstream shape must match block output"));
        }

        let mut g_weights = Matrix::zeros(self.weights.rows(), self.weights.cols());
        let mut g_bias = self.bias.as_ref().map(|b| vec![T::zero(); b.len()]);
        // downstream gradient per feature map
        let mut g_maps: Vec<ImageGrid<T>> = maps.iter().map(|_| ImageGrid::zeros(h, w, 1)).collect();
        for c in 0..self.out_channels() {
            for i in 0..h {
                for j in 0..w {
                    let u = upstream.get(c, i, j);
                    if let Some(gb) = &mut g_bias {
                        gb[c] += u;
                    }
                    for (f, map) in maps.iter().enumerate() {
                        g_weights.set(c, f, g_weights.get(c, f) + u * map.get(0, i, j));
                        let cur = g_maps[f].get(0, i, j);
                        g_maps[f].set(0, i, j, cur + self.weights.get(c, f) * u);
                    }
                }
            }
        }

        let mut g_plus: Vec<StructuringElement2D<T>> = self
            .filters_plus
            .iter()
            .map(|s| StructuringElement2D::flat(s.rows, s.cols))
            .collect();
        let mut g_minus: Vec<StructuringElement2D<T>> = self
            .filters_minus
            .iter()
            .map(|s| StructuringElement2D::flat(s.rows, s.cols))
            .collect();
        let mut g_input = ImageGrid::zeros(h, w, self.channels_in);

        let n_maps_plus = self.channels_in * self.n_dilation;
        for (f, g_map) in g_maps.iter().enumerate() {
            let dilation = f < n_maps_plus;
            let (c, s, g_s) = if dilation {
                let c = f / self.n_dilation;
                let slot = f % self.n_dilation;
                let idx = c * self.n_dilation + slot;
                (c, &self.filters_plus[idx], &mut g_plus[idx])
            } else {
                let e = f - n_maps_plus;
                let c = e / self.n_erosion;
                let slot = e % self.n_erosion;
                let idx = c * self.n_erosion + slot;
                (c, &self.filters_minus[idx], &mut g_minus[idx])
            };
            accumulate_morph_grads(
                &x.channel(c),
                s,
                self.padding,
                self.mode,
                dilation,
                g_map,
                g_s,
                &mut g_input,
                c,
            );
        }

        Ok((
            Block2DGrads {
                filters_plus: g_plus,
                filters_minus: g_minus,
                weights: g_weights,
                bias: g_bias,
            },
            g_input,
        ))
    }

    pub fn params_to_vec(&self) -> Vec<T> {
        let mut out = Vec::new();
        for f in &self.filters_plus {
            out.extend_from_slice(&f.data);
        }
        for f in &self.filters_minus {
            out.extend_from_slice(&f.data);
        }
        out.extend_from_slice(self.weights.data());
        if let Some(b) = &self.bias {
            out.extend_from_slice(b);
        }
        out
    }

    pub fn set_params_from(&mut self, flat: &[T]) -> Result<()> {
        let mut it = flat.iter().copied();
        let mut take = |dst: &mut [T]| -> Result<()> {
            for d in dst {
                *d = it.next().ok_or_else(|| Error::dim("parameter vector too short"))?;
            }
            Ok(())
        };
        for f in &mut self.filters_plus {
            take(&mut f.data)?;
        }
        for f in &mut self.filters_minus {
            take(&mut f.data)?;
        }
        take(self.weights.data_mut())?;
        if let Some(b) = &mut self.bias {
            take(b)?;
        }
        if it.next().is_some() {
            return Err(Error::dim("parameter vector too long"));
        }
        Ok(())
    }
}

/// Forward pass of a 2D morphological block; see [`MorphBlock2D::forward`].
pub fn forward_block2d<T: Real>(block: &MorphBlock2D<T>, x: &ImageGrid<T>) -> Result<ImageGrid<T>> {
    block.forward(x)
}

/// Gradients of a [`MorphBlock2D`], shaped like its parameters.
#[derive(Debug, Clone)]
pub struct Block2DGrads<T> {
    pub filters_plus: Vec<StructuringElement2D<T>>,
    pub filters_minus: Vec<StructuringElement2D<T>>,
    pub weights: Matrix<T>,
    pub bias: Option<Vec<T>>,
}

impl<T: Real> Block2DGrads<T> {
    pub fn to_vec(&self) -> Vec<T> {
        let mut out = Vec::new();
        for f in &self.filters_plus {
            out.extend_from_slice(&f.data);
        }
        for f in &self.filters_minus {
            out.extend_from_slice(&f.data);
        }
        out.extend_from_slice(self.weights.data());
        if let Some(b) = &self.bias {
            out.extend_from_slice(b);
        }
        out
    }
}

/// Scatter map/SE gradients of one morphological filter application.
#[allow(clippy::too_many_arguments)]
fn accumulate_morph_grads<T: Real>(
    plane: &ImageGrid<T>,
    s: &StructuringElement2D<T>,
    padding: Padding,
    mode: Mode<T>,
    dilation: bool,
    g_map: &ImageGrid<T>,
    g_s: &mut StructuringElement2D<T>,
    g_input: &mut ImageGrid<T>,
    channel: usize,
) {
    let (h, w) = (plane.height, plane.width);
    let access = WindowAccess { h, w, anchor: s.anchor, mirrored: dilation, padding };
    let mut cells: Vec<(usize, usize, usize, usize)> = Vec::with_capacity(s.rows * s.cols);
    let mut window: Vec<T> = Vec::with_capacity(s.rows * s.cols);
    let mut weights: Vec<T> = Vec::new();
    for i in 0..h {
        for j in 0..w {
            let u_out = g_map.get(0, i, j);
            if u_out == T::zero() {
                continue;
            }
            cells.clear();
            window.clear();
            for u in 0..s.rows {
                for v in 0..s.cols {
                    if let Some((si, sj)) = access.source(i, j, u, v) {
                        cells.push((u, v, si, sj));
                        let px = plane.get(0, si, sj);
                        window.push(if dilation {
                            px + s.get(u, v)
                        } else {
                            s.get(u, v) - px
                        });
                    }
                }
            }
            match mode {
                Mode::Hard => {
                    let (k, _) = argmax_value(window.iter().copied());
                    let (u, v, si, sj) = cells[k];
                    // erosion output is -max(s - x): d/ds = -1, d/dx = +1 there
                    let s_sign = if dilation { T::one() } else { -T::one() };
                    g_s.set(u, v, g_s.get(u, v) + s_sign * u_out);
                    let cur = g_input.get(channel, si, sj);
                    g_input.set(channel, si, sj, cur + u_out);
                }
                Mode::Soft(hard) => {
                    log_sum_exp_scaled(&window, hard.beta(), Some(&mut weights));
                    let s_sign = if dilation { T::one() } else { -T::one() };
                    for (k, &(u, v, si, sj)) in cells.iter().enumerate() {
                        let wk = weights[k];
                        g_s.set(u, v, g_s.get(u, v) + s_sign * u_out * wk);
                        let cur = g_input.get(channel, si, sj);
                        g_input.set(channel, si, sj, cur + u_out * wk);
                    }
                }
            }
        }
    }
}

/// 2x2 stride-2 max pooling per channel; an odd trailing row/column is dropped.
pub fn maxpool2<T: Real>(x: &ImageGrid<T>) -> ImageGrid<T> {
    let (h, w) = (x.height / 2, x.width / 2);
    let h = h.max(1).min(x.height); // 1-pixel inputs pass through
    let w = w.max(1).min(x.width);
    let mut out = ImageGrid::zeros(h, w, x.channels);
    for c in 0..x.channels {
        for i in 0..h {
            for j in 0..w {
                let (i0, j0) = (2 * i, 2 * j);
                let mut m = x.get(c, i0.min(x.height - 1), j0.min(x.width - 1));
                for di in 0..2 {
                    for dj in 0..2 {
                        let (ii, jj) = (i0 + di, j0 + dj);
                        if ii < x.height && jj < x.width {
                            m = m.max(x.get(c, ii, jj));
                        }
                    }
                }
                out.set(c, i, j, m);
            }
        }
    }
    out
}

/// Nearest-neighbour 2x upsampling per channel.
pub fn upsample_nearest2<T: Real>(x: &ImageGrid<T>) -> ImageGrid<T> {
    let (h, w) = (x.height * 2, x.width * 2);
    let mut out = ImageGrid::zeros(h, w, x.channels);
    for c in 0..x.channels {
        for i in 0..h {
            for j in 0..w {
                out.set(c, i, j, x.get(c, i / 2, j / 2));
            }
        }
    }
    out
}

/// Elementwise logistic map into (0,1).
pub fn sigmoid_map<T: Real>(x: &ImageGrid<T>) -> ImageGrid<T> {
    x.map(sigmoid)
}

/// Recover the haze-free image from the haze model `I = t J + K`:
/// `J = min((I - K)/t, 1)`, clamped below at 0 for image validity.
pub fn dehaze_reconstruct<T: Real>(
    i: &ImageGrid<T>,
    t: &ImageGrid<T>,
    k: &ImageGrid<T>,
) -> Result<ImageGrid<T>> {
    i.same_shape(t)?;
    i.same_shape(k)?;
    if t.data.iter().any(|&v| v <= T::zero() || v > T::one()) {
        return Err(Error::invalid(
            "transmittance must lie in (0, 1]; zero would divide out the scene",
        ));
    }
    let mut out = ImageGrid::zeros(i.height, i.width, i.channels);
    for (idx, o) in out.data.iter_mut().enumerate() {
        let j = (i.data[idx] - k.data[idx]) / t.data[idx];
        *o = j.min(T::one()).max(T::zero());
    }
    Ok(out)
}
