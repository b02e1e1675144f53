//! Gate heatmaps and montages.
//!
//! A gate channel is blurred at gate resolution (separable Gaussian,
//! replicate padding), upsampled bilinearly to the canvas with corners
//! aligned, and multiplied into the input image for the overlay panels.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use crate::digest::sha256_hex;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const BLUR_SIZE: usize = 5;
pub const BLUR_SIGMA: f64 = 0.8;

/// Normalised 1-D Gaussian weights; the 2-D kernel is their outer product.
pub fn gaussian_weights(size: usize, sigma: f64) -> Result<Vec<f64>> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::invalid(format!("blur sigma must be positive, got {sigma}")));
    }
    if size.is_multiple_of(2) {
        return Err(Error::invalid(format!("blur kernel size must be odd, got {size}")));
    }
    let r = (size / 2) as f64;
    let w: Vec<f64> = (0..size)
        .map(|i| {
            let x = i as f64 - r;
            (-(x * x) / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let total: f64 = w.iter().sum();
    Ok(w.into_iter().map(|v| v / total).collect())
}

/// Separable Gaussian blur of an `H x W` channel with replicate padding.
pub fn gaussian_blur(channel: &Tensor, size: usize, sigma: f64) -> Result<Tensor> {
    let (h, w) = channel.dims2()?;
    let k = gaussian_weights(size, sigma)?;
    let r = (size / 2) as isize;
    let src = channel.data();
    let clamp = |i: isize, n: usize| i.clamp(0, n as isize - 1) as usize;
    let mut rows = vec![0.0f64; h * w];
    for y in 0..h {
        for x in 0..w {
            rows[y * w + x] = k
                .iter()
                .enumerate()
                .map(|(j, &kw)| kw * f64::from(src[y * w + clamp(x as isize + j as isize - r, w)]))
                .sum();
        }
    }
    let mut out = Vec::with_capacity(h * w);
    for y in 0..h {
        for x in 0..w {
            let v: f64 = k
                .iter()
                .enumerate()
                .map(|(j, &kw)| kw * rows[clamp(y as isize + j as isize - r, h) * w + x])
                .sum();
            out.push(v as f32);
        }
    }
    Tensor::new(vec![h, w], out)
}

/// Bilinear upsampling with corner alignment: source position of target
/// pixel `i` is `i * (src - 1) / (dst - 1)`.
pub fn upsample(channel: &Tensor, height: usize, width: usize) -> Result<Tensor> {
    let (h, w) = channel.dims2()?;
    if height < h || width < w {
        return Err(Error::shape(format!(
            "cannot upsample {h}x{w} to smaller {height}x{width}"
        )));
    }
    let axis = |src: usize, dst: usize| -> Vec<(usize, usize, f64)> {
        (0..dst)
            .map(|i| {
                let pos = if dst == 1 {
                    0.0
                } else {
                    i as f64 * (src - 1) as f64 / (dst - 1) as f64
                };
                let lo = (pos.floor() as usize).min(src - 1);
                let hi = (lo + 1).min(src - 1);
                (lo, hi, pos - lo as f64)
            })
            .collect()
    };
    let ys = axis(h, height);
    let xs = axis(w, width);
    let s = channel.data();
    let at = |y: usize, x: usize| f64::from(s[y * w + x]);
    let mut out = Vec::with_capacity(height * width);
    for &(y0, y1, fy) in &ys {
        for &(x0, x1, fx) in &xs {
            let top = at(y0, x0) * (1.0 - fx) + at(y0, x1) * fx;
            let bottom = at(y1, x0) * (1.0 - fx) + at(y1, x1) * fx;
            out.push((top * (1.0 - fy) + bottom * fy) as f32);
        }
    }
    Tensor::new(vec![height, width], out)
}

/// Pixelwise `input * heat`: attended regions keep their brightness.
pub fn overlay(heat: &Tensor, input: &Tensor) -> Result<Tensor> {
    if heat.shape() != input.shape() {
        return Err(Error::shape(format!(
            "heatmap {:?} and image {:?} differ",
            heat.shape(),
            input.shape()
        )));
    }
    let data = heat.data().iter().zip(input.data()).map(|(h, x)| h * x).collect();
    Tensor::new(input.shape().to_vec(), data)
}

/// Blur then upsample one gate channel to the canvas size.
pub fn heatmap(channel: &Tensor, height: usize, width: usize) -> Result<Tensor> {
    upsample(&gaussian_blur(channel, BLUR_SIZE, BLUR_SIGMA)?, height, width)
}

/// Channel `c` of a `C x H x W` (or `1 x C x H x W`) gate as an `H x W`
/// tensor.
pub fn gate_channel(gate: &Tensor, c: usize) -> Result<Tensor> {
    let (channels, h, w) = match gate.shape() {
        [1, ch, h, w] | [ch, h, w] => (*ch, *h, *w),
        s => return Err(Error::shape(format!("expected one gate map, got shape {s:?}"))),
    };
    if c >= channels {
        return Err(Error::invalid(format!("channel {c} of {channels}")));
    }
    Tensor::new(vec![h, w], gate.data()[c * h * w..(c + 1) * h * w].to_vec())
}

fn to_gray(v: f32) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Pixel layout of a montage: the input panel on top, then a 4 x 4 grid of
/// gate heatmaps, then a 4 x 4 grid of overlays. Every panel is the canvas
/// scaled by `zoom` with nearest-neighbour replication.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MontageLayout {
    pub canvas: (usize, usize),
    pub zoom: usize,
    pub channels: usize,
}

impl MontageLayout {
    pub const GRID: usize = 4;
    pub const GAP: usize = 4;
    pub const BACKGROUND: u8 = 40;

    pub fn new(canvas: (usize, usize), zoom: usize, channels: usize) -> Result<Self> {
        if zoom == 0 || channels == 0 || channels > Self::GRID * Self::GRID {
            return Err(Error::invalid(format!("montage of {channels} channels at zoom {zoom}")));
        }
        Ok(Self { canvas, zoom, channels })
    }

    pub fn panel_size(&self) -> (usize, usize) {
        (self.canvas.0 * self.zoom, self.canvas.1 * self.zoom)
    }

    pub fn size(&self) -> (usize, usize) {
        let (ph, pw) = self.panel_size();
        let g = Self::GRID;
        // input row, two grids, separated by double gaps between groups
        let height = ph * (1 + 2 * g) + Self::GAP * (2 + 2 * (g - 1) + 2 * 2);
        let width = pw * g + Self::GAP * (g + 1);
        (height, width)
    }

    /// Top-left corner of the input panel.
    pub fn input_origin(&self) -> (usize, usize) {
        (Self::GAP, Self::GAP)
    }

    /// Top-left corner of channel `c` in group 0 (gates) or 1 (overlays).
    pub fn panel_origin(&self, group: usize, c: usize) -> (usize, usize) {
        let (ph, pw) = self.panel_size();
        let g = Self::GRID;
        let group_top = Self::GAP + ph + 2 * Self::GAP + group * (g * ph + (g - 1) * Self::GAP + 2 * Self::GAP);
        let (row, col) = (c / g, c % g);
        (group_top + row * (ph + Self::GAP), Self::GAP + col * (pw + Self::GAP))
    }
}

/// An 8-bit grayscale raster.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    pub height: usize,
    pub width: usize,
    pub pixels: Vec<u8>,
}

impl GrayImage {
    pub fn filled(height: usize, width: usize, v: u8) -> Self {
        Self {
            height,
            width,
            pixels: vec![v; height * width],
        }
    }

    /// Nearest-neighbour zoom of an `H x W` tensor with values in `[0, 1]`.
    pub fn from_tensor(t: &Tensor, zoom: usize) -> Result<Self> {
        let (h, w) = t.dims2()?;
        let mut img = Self::filled(h * zoom, w * zoom, 0);
        for y in 0..h * zoom {
            for x in 0..w * zoom {
                img.pixels[y * w * zoom + x] = to_gray(t.data()[(y / zoom) * w + x / zoom]);
            }
        }
        Ok(img)
    }

    fn blit(&mut self, src: &GrayImage, (top, left): (usize, usize)) {
        for y in 0..src.height {
            let row = &src.pixels[y * src.width..(y + 1) * src.width];
            let start = (top + y) * self.width + left;
            self.pixels[start..start + src.width].copy_from_slice(row);
        }
    }

    pub fn crop(&self, (top, left): (usize, usize), height: usize, width: usize) -> Self {
        let mut out = Self::filled(height, width, 0);
        for y in 0..height {
            let start = (top + y) * self.width + left;
            out.pixels[y * width..(y + 1) * width].copy_from_slice(&self.pixels[start..start + width]);
        }
        out
    }

    /// PNG bytes with fixed encoder settings.
    pub fn png_bytes(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        {
            let mut enc = png::Encoder::new(&mut out, self.width as u32, self.height as u32);
            enc.set_color(png::ColorType::Grayscale);
            enc.set_depth(png::BitDepth::Eight);
            enc.set_compression(png::Compression::Default);
            enc.set_filter(png::FilterType::NoFilter);
            let mut w = enc
                .write_header()
                .map_err(|e| Error::Format(format!("png header: {e}")))?;
            w.write_image_data(&self.pixels)
                .map_err(|e| Error::Format(format!("png data: {e}")))?;
        }
        Ok(out)
    }

    pub fn save_png(&self, path: &Path) -> Result<String> {
        let bytes = self.png_bytes()?;
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        std::io::Write::write_all(&mut w, &bytes).map_err(|e| Error::io(path, e))?;
        std::io::Write::flush(&mut w).map_err(|e| Error::io(path, e))?;
        Ok(sha256_hex(&bytes))
    }
}

/// Heatmap and overlay panels for every channel of one gate map.
pub fn channel_panels(gate: &Tensor, input: &Tensor) -> Result<Vec<(Tensor, Tensor)>> {
    let (h, w) = input.dims2()?;
    let channels = match gate.shape() {
        [1, c, _, _] | [c, _, _] => *c,
        s => return Err(Error::shape(format!("expected one gate map, got shape {s:?}"))),
    };
    (0..channels)
        .map(|c| {
            let heat = heatmap(&gate_channel(gate, c)?, h, w)?;
            let over = overlay(&heat, input)?;
            Ok((heat, over))
        })
        .collect()
}

/// Renders the montage for one gate map and an `H x W` input image.
pub fn montage(gate: &Tensor, input: &Tensor, zoom: usize) -> Result<GrayImage> {
    let (h, w) = input.dims2()?;
    let panels = channel_panels(gate, input)?;
    let layout = MontageLayout::new((h, w), zoom, panels.len())?;
    let (mh, mw) = layout.size();
    let mut img = GrayImage::filled(mh, mw, MontageLayout::BACKGROUND);
    img.blit(&GrayImage::from_tensor(input, zoom)?, layout.input_origin());
    for (c, (heat, over)) in panels.iter().enumerate() {
        img.blit(&GrayImage::from_tensor(heat, zoom)?, layout.panel_origin(0, c));
        img.blit(&GrayImage::from_tensor(over, zoom)?, layout.panel_origin(1, c));
    }
    Ok(img)
}

/// Writes the montage as PNG and returns the file's SHA-256.
pub fn render_montage(gate: &Tensor, input: &Tensor, zoom: usize, path: &Path) -> Result<String> {
    montage(gate, input, zoom)?.save_png(path)
}

/// `{task}_{run}_{sample}_{variant}.png`
pub fn montage_file_name(task: &str, run: usize, sample: usize, variant: &str) -> String {
    format!("{task}_{run}_{sample}_{variant}.png")
}

/// Mean gate value of every `(sample, channel, slot)` in an
/// `N x C x H x W` batch whose width splits evenly into `slots` column bands.
pub fn slot_means(gates: &Tensor, slots: usize) -> Result<Vec<Vec<Vec<f64>>>> {
    let (n, c, h, w) = gates.dims4()?;
    if slots == 0 || w % slots != 0 {
        return Err(Error::invalid(format!("width {w} does not split into {slots} slots")));
    }
    let band = w / slots;
    let d = gates.data();
    Ok((0..n)
        .map(|i| {
            (0..c)
                .map(|ch| {
                    let plane = &d[(i * c + ch) * h * w..(i * c + ch + 1) * h * w];
                    (0..slots)
                        .map(|s| {
                            let total: f64 = (0..h)
                                .flat_map(|y| &plane[y * w + s * band..y * w + (s + 1) * band])
                                .map(|&v| f64::from(v))
                                .sum();
                            total / (h * band) as f64
                        })
                        .collect()
                })
                .collect()
        })
        .collect())
}

/// Per-channel `(attended, other)` means averaged over samples, where
/// `attended[i]` is the slot sample `i` should attend and "other" is the
/// mean over its remaining slots.
pub fn attention_contrast(means: &[Vec<Vec<f64>>], attended: &[usize]) -> Result<Vec<(f64, f64)>> {
    if means.is_empty() || means.len() != attended.len() {
        return Err(Error::invalid(format!(
            "{} gate maps but {} attended slots",
            means.len(),
            attended.len()
        )));
    }
    let channels = means[0].len();
    let n = means.len() as f64;
    let mut out = vec![(0.0, 0.0); channels];
    for (sample, &a) in means.iter().zip(attended) {
        for (acc, slots) in out.iter_mut().zip(sample) {
            if a >= slots.len() || slots.len() < 2 {
                return Err(Error::invalid(format!("slot {a} of {}", slots.len())));
            }
            let other: f64 = slots
                .iter()
                .enumerate()
                .filter(|&(s, _)| s != a)
                .map(|(_, v)| v)
                .sum::<f64>()
                / (slots.len() - 1) as f64;
            acc.0 += slots[a] / n;
            acc.1 += other / n;
        }
    }
    Ok(out)
}

/// Number of channels whose attended mean exceeds the other mean by more
/// than `margin`.
pub fn separated_channels(contrast: &[(f64, f64)], margin: f64) -> usize {
    contrast.iter().filter(|(a, o)| a - o > margin).count()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(h: usize, w: usize, data: Vec<f32>) -> Tensor {
        Tensor::new(vec![h, w], data).unwrap()
    }

    #[test]
    fn kernel_is_normalised_and_symmetric() {
        let k = gaussian_weights(5, 0.8).unwrap();
        assert!((k.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(k[0], k[4]);
        assert_eq!(k[1], k[3]);
        assert!(gaussian_weights(5, 0.0).is_err());
        assert!(gaussian_weights(5, -1.0).is_err());
    }

    #[test]
    fn blur_keeps_constants() {
        let c = t(6, 9, vec![0.37; 54]);
        let b = gaussian_blur(&c, 5, 0.8).unwrap();
        assert!(b.data().iter().all(|&v| (v - 0.37).abs() < 1e-6));
    }

    #[test]
    fn upsample_checkerboard_centre() {
        let c = t(2, 2, vec![0.0, 1.0, 1.0, 0.0]);
        let three = upsample(&c, 3, 3).unwrap();
        assert_eq!(three.data()[4], 0.5);
        let four = upsample(&c, 4, 4).unwrap();
        let centre: f32 = [5, 6, 9, 10].iter().map(|&i| four.data()[i]).sum::<f32>() / 4.0;
        assert!((centre - 0.5).abs() < 1e-6);
        // corners are kept exactly
        assert_eq!(
            [four.data()[0], four.data()[3], four.data()[12], four.data()[15]],
            [0.0, 1.0, 1.0, 0.0]
        );
    }

    #[test]
    fn upsample_identity_and_rejection() {
        let c = t(2, 3, vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6]);
        assert_eq!(upsample(&c, 2, 3).unwrap(), c);
        assert!(upsample(&c, 1, 3).is_err());
    }

    #[test]
    fn overlay_identity_and_black() {
        let img = t(2, 2, vec![0.1, 0.5, 0.9, 1.0]);
        assert_eq!(overlay(&t(2, 2, vec![1.0; 4]), &img).unwrap(), img);
        assert!(overlay(&t(2, 2, vec![0.0; 4]), &img)
            .unwrap()
            .data()
            .iter()
            .all(|&v| v == 0.0));
        assert!(overlay(&t(1, 4, vec![1.0; 4]), &img).is_err());
    }

    #[test]
    fn layout_fits_and_does_not_overlap() {
        let l = MontageLayout::new((28, 56), 2, 16).unwrap();
        let (mh, mw) = l.size();
        let (ph, pw) = l.panel_size();
        let mut seen = vec![false; mh * mw];
        let mut claim = |(top, left): (usize, usize)| {
            assert!(top + ph <= mh && left + pw <= mw);
            for y in top..top + ph {
                for x in left..left + pw {
                    assert!(!seen[y * mw + x]);
                    seen[y * mw + x] = true;
                }
            }
        };
        claim(l.input_origin());
        for g in 0..2 {
            for c in 0..16 {
                claim(l.panel_origin(g, c));
            }
        }
    }

    #[test]
    fn slot_contrast_and_count() {
        // 1 sample, 2 channels, 1x4 maps: channel 0 bright left, channel 1 flat
        let g = Tensor::new(vec![1, 2, 1, 4], vec![0.9, 0.9, 0.1, 0.1, 0.5, 0.5, 0.5, 0.5]).unwrap();
        let m = slot_means(&g, 2).unwrap();
        assert!((m[0][0][0] - 0.9).abs() < 1e-6 && (m[0][0][1] - 0.1).abs() < 1e-6);
        let left = attention_contrast(&m, &[0]).unwrap();
        assert_eq!(separated_channels(&left, 0.0), 1);
        assert_eq!(separated_channels(&left, 0.1), 1);
        let right = attention_contrast(&m, &[1]).unwrap();
        assert_eq!(separated_channels(&right, 0.0), 0);
        assert!(slot_means(&g, 3).is_err());
        assert!(attention_contrast(&m, &[0, 1]).is_err());
    }

    #[test]
    fn three_slot_other_is_the_mean_of_the_rest() {
        let g = Tensor::new(vec![1, 1, 1, 3], vec![0.2, 0.8, 0.5]).unwrap();
        let c = attention_contrast(&slot_means(&g, 3).unwrap(), &[1]).unwrap();
        assert!((c[0].0 - 0.8).abs() < 1e-6 && (c[0].1 - 0.35).abs() < 1e-6);
    }
}
