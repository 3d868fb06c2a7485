//! Pixel-level augmentations for producing perturbed validation images:
//! horizontal shift, brightness offset, linear contrast and Gaussian blur.

use rand::{Rng, RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use serde::{Deserialize, Serialize};

use crate::{CalibError, Result};

/// 8-bit image, row-major, channels interleaved.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RasterImage {
    width: usize,
    height: usize,
    channels: usize,
    pixels: Vec<u8>,
}

impl RasterImage {
    pub fn new(width: usize, height: usize, channels: usize, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(CalibError::invalid("image dimensions must be positive"));
        }
        if channels != 1 && channels != 3 {
            return Err(CalibError::invalid(format!(
                "images have 1 or 3 channels, got {channels}"
            )));
        }
        if pixels.len() != width * height * channels {
            return Err(CalibError::invalid(format!(
                "{} pixel values for a {width}x{height}x{channels} image",
                pixels.len()
            )));
        }
        Ok(Self {
            width,
            height,
            channels,
            pixels,
        })
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: u8) -> Result<Self> {
        Self::new(width, height, channels, vec![value; width * height * channels])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn get(&self, x: usize, y: usize, c: usize) -> u8 {
        self.pixels[(y * self.width + x) * self.channels + c]
    }

    fn map_values(&self, f: impl Fn(u8) -> u8) -> Self {
        Self {
            pixels: self.pixels.iter().map(|&v| f(v)).collect(),
            ..self.clone()
        }
    }

    pub fn mirrored_horizontally(&self) -> Self {
        let mut out = self.clone();
        let ch = self.channels;
        for row in out.pixels.chunks_exact_mut(self.width * ch) {
            let src = row.to_vec();
            for x in 0..self.width {
                let from = (self.width - 1 - x) * ch;
                row[x * ch..(x + 1) * ch].copy_from_slice(&src[from..from + ch]);
            }
        }
        out
    }
}

/// `out(x, y) = in(x − dx, y)`, black where the source falls outside the image.
pub fn shift_x(img: &RasterImage, dx: i64) -> Result<RasterImage> {
    let w = img.width as i64;
    if dx.abs() >= w {
        return Err(CalibError::invalid(format!(
            "shift {dx} must be smaller in magnitude than the width {w}"
        )));
    }
    let ch = img.channels;
    let mut out = vec![0u8; img.pixels.len()];
    for y in 0..img.height {
        let row = y * img.width * ch;
        for x in 0..img.width {
            let src = x as i64 - dx;
            if (0..w).contains(&src) {
                let (d, s) = (row + x * ch, row + src as usize * ch);
                out[d..d + ch].copy_from_slice(&img.pixels[s..s + ch]);
            }
        }
    }
    RasterImage::new(img.width, img.height, ch, out)
}

pub fn brightness(img: &RasterImage, delta: i64) -> RasterImage {
    img.map_values(|v| (v as i64 + delta).clamp(0, 255) as u8)
}

/// `v → clamp(round(alpha · (v − 127) + 127))`, rounding half away from zero.
pub fn linear_contrast(img: &RasterImage, alpha: f64) -> Result<RasterImage> {
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(CalibError::invalid(format!("contrast alpha must be positive, got {alpha}")));
    }
    Ok(img.map_values(|v| (alpha * (v as f64 - 127.0) + 127.0).round().clamp(0.0, 255.0) as u8))
}

fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil() as usize;
    let mut k: Vec<f64> = (0..=radius)
        .map(|i| (-((i * i) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let total = k[0] + 2.0 * k[1..].iter().sum::<f64>();
    for w in &mut k {
        *w /= total;
    }
    k
}

/// Convolves one line of `len` samples (stride `step`) with a symmetric half-kernel.
/// Mirror pairs are summed before weighting so the result is exactly mirror-symmetric.
fn convolve_line(src: &[f64], dst: &mut [f64], start: usize, step: usize, len: usize, half: &[f64]) {
    let at = |i: i64| src[start + i.clamp(0, len as i64 - 1) as usize * step];
    for i in 0..len as i64 {
        let mut acc = half[0] * at(i);
        for (r, &w) in half.iter().enumerate().skip(1) {
            let r = r as i64;
            acc += w * (at(i - r) + at(i + r));
        }
        dst[start + i as usize * step] = acc;
    }
}

/// Separable Gaussian blur, radius `ceil(3σ)`, clamp-to-edge borders.
pub fn gaussian_blur(img: &RasterImage, sigma: f64) -> Result<RasterImage> {
    if !(sigma.is_finite() && sigma >= 0.0) {
        return Err(CalibError::invalid(format!("blur sigma must be non-negative, got {sigma}")));
    }
    if sigma == 0.0 {
        return Ok(img.clone());
    }
    let half = gaussian_kernel(sigma);
    let (w, h, ch) = (img.width, img.height, img.channels);
    let src: Vec<f64> = img.pixels.iter().map(|&v| v as f64).collect();
    let mut tmp = vec![0.0; src.len()];
    for y in 0..h {
        for c in 0..ch {
            convolve_line(&src, &mut tmp, y * w * ch + c, ch, w, &half);
        }
    }
    let mut out = vec![0.0; src.len()];
    for x in 0..w {
        for c in 0..ch {
            convolve_line(&tmp, &mut out, x * ch + c, w * ch, h, &half);
        }
    }
    let pixels = out.iter().map(|v| v.round().clamp(0.0, 255.0) as u8).collect();
    RasterImage::new(w, h, ch, pixels)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AugmentKind {
    ShiftX { lo: i64, hi: i64 },
    Brightness { lo: i64, hi: i64 },
    Contrast { alpha: f64 },
    Blur { lo: f64, hi: f64 },
}

/// A randomized augmentation: parameters are drawn per image from the kind's range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AugmentOp {
    pub kind: AugmentKind,
    pub seed: u64,
}

/// Parameter actually used for one draw.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AugmentParam {
    Shift(i64),
    Brightness(i64),
    Contrast(f64),
    Blur(f64),
}

impl AugmentKind {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            AugmentKind::ShiftX { lo, hi } | AugmentKind::Brightness { lo, hi } => lo <= hi,
            AugmentKind::Contrast { alpha } => alpha.is_finite() && alpha > 0.0,
            AugmentKind::Blur { lo, hi } => lo.is_finite() && hi.is_finite() && 0.0 <= lo && lo <= hi,
        };
        if ok {
            Ok(())
        } else {
            Err(CalibError::InvalidConfig(format!("invalid augmentation parameters {self:?}")))
        }
    }
}

impl std::str::FromStr for AugmentKind {
    type Err = CalibError;

    /// `shift:lo,hi`, `bright:lo,hi`, `contrast:alpha` or `blur:lo,hi`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || {
            CalibError::InvalidConfig(format!(
                "invalid augmentation {s:?}; expected shift:LO,HI | bright:LO,HI | contrast:ALPHA | blur:LO,HI"
            ))
        };
        let (name, args) = s.split_once(':').ok_or_else(bad)?;
        let args: Vec<&str> = args.split(',').map(str::trim).collect();
        let ints = || -> Result<(i64, i64)> {
            match args.as_slice() {
                [a, b] => Ok((a.parse().map_err(|_| bad())?, b.parse().map_err(|_| bad())?)),
                _ => Err(bad()),
            }
        };
        let kind = match name {
            "shift" => {
                let (lo, hi) = ints()?;
                AugmentKind::ShiftX { lo, hi }
            }
            "bright" | "brightness" => {
                let (lo, hi) = ints()?;
                AugmentKind::Brightness { lo, hi }
            }
            "contrast" => match args.as_slice() {
                [a] => AugmentKind::Contrast { alpha: a.parse().map_err(|_| bad())? },
                _ => return Err(bad()),
            },
            "blur" => match args.as_slice() {
                [a, b] => AugmentKind::Blur {
                    lo: a.parse().map_err(|_| bad())?,
                    hi: b.parse().map_err(|_| bad())?,
                },
                _ => return Err(bad()),
            },
            _ => return Err(bad()),
        };
        kind.validate()?;
        Ok(kind)
    }
}

impl AugmentOp {
    fn rng(&self, draw_index: u64) -> Xoshiro256PlusPlus {
        // golden-ratio increment decorrelates neighbouring draw indices
        Xoshiro256PlusPlus::seed_from_u64(self.seed ^ draw_index.wrapping_mul(0x9E37_79B9_7F4A_7C15))
    }

    /// Parameter for draw `draw_index`: integers uniform on `[lo, hi]`, reals uniform on `[lo, hi)`.
    pub fn sample_param(&self, draw_index: u64) -> Result<AugmentParam> {
        self.kind.validate()?;
        let mut rng = self.rng(draw_index);
        Ok(match self.kind {
            AugmentKind::ShiftX { lo, hi } => AugmentParam::Shift(rng.gen_range(lo..=hi)),
            AugmentKind::Brightness { lo, hi } => AugmentParam::Brightness(rng.gen_range(lo..=hi)),
            AugmentKind::Contrast { alpha } => AugmentParam::Contrast(alpha),
            AugmentKind::Blur { lo, hi } => {
                let u = (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
                AugmentParam::Blur(lo + (hi - lo) * u)
            }
        })
    }
}

pub fn apply_param(img: &RasterImage, param: AugmentParam) -> Result<RasterImage> {
    match param {
        AugmentParam::Shift(dx) => shift_x(img, dx),
        AugmentParam::Brightness(delta) => Ok(brightness(img, delta)),
        AugmentParam::Contrast(alpha) => linear_contrast(img, alpha),
        AugmentParam::Blur(sigma) => gaussian_blur(img, sigma),
    }
}

/// Draws the op's parameter from `(seed, draw_index)` and applies it.
pub fn apply_random(img: &RasterImage, op: &AugmentOp, draw_index: u64) -> Result<RasterImage> {
    apply_param(img, op.sample_param(draw_index)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn gray_row(values: &[u8]) -> RasterImage {
        RasterImage::new(values.len(), 1, 1, values.to_vec()).unwrap()
    }

    #[test]
    fn shift_examples() {
        let img = gray_row(&[10, 20, 30, 40]);
        assert_eq!(shift_x(&img, 0).unwrap(), img);
        assert_eq!(shift_x(&img, -1).unwrap().pixels(), &[20, 30, 40, 0]);
        assert_eq!(shift_x(&img, 2).unwrap().pixels(), &[0, 0, 10, 20]);
        assert!(shift_x(&img, 4).is_err());
        assert!(shift_x(&img, -4).is_err());

        let wide = RasterImage::filled(32, 2, 3, 9).unwrap();
        let s = shift_x(&wide, -4).unwrap();
        for y in 0..2 {
            for x in 0..32 {
                for c in 0..3 {
                    assert_eq!(s.get(x, y, c), if x >= 28 { 0 } else { 9 });
                }
            }
        }
    }

    #[test]
    fn brightness_clamps() {
        let img = gray_row(&[200, 100, 0, 255]);
        assert_eq!(brightness(&img, 0), img);
        assert_eq!(brightness(&img, 150).pixels(), &[255, 250, 150, 255]);
        assert_eq!(brightness(&img, -150).pixels(), &[50, 0, 0, 105]);
    }

    #[test]
    fn contrast_examples() {
        let all: Vec<u8> = (0..=255).collect();
        let img = gray_row(&all);
        assert_eq!(linear_contrast(&img, 1.0).unwrap(), img);
        let half = linear_contrast(&img, 0.5).unwrap();
        assert_eq!(half.pixels()[255], 191);
        assert_eq!(half.pixels()[0], 64);
        assert_eq!(half.pixels()[127], 127);
        assert!(linear_contrast(&img, 0.0).is_err());
        let white = RasterImage::filled(4, 4, 3, 255).unwrap();
        assert!(linear_contrast(&white, 0.5).unwrap().pixels().iter().all(|&v| v == 191));
    }

    #[test]
    fn blur_examples() {
        let img = gray_row(&[0, 255, 0]);
        assert_eq!(gaussian_blur(&img, 0.0).unwrap(), img);
        let b = gaussian_blur(&img, 0.5).unwrap();
        let p = b.pixels();
        assert!(p[1] < 255 && p[0] > 0 && p[2] > 0, "{p:?}");
        assert_eq!(p[0], p[2]);

        // direct convolution oracle on an interior pixel, no borders involved
        let mut row = vec![0u8; 11];
        row[5] = 255;
        let img = gray_row(&row);
        let b = gaussian_blur(&img, 0.5).unwrap();
        let w: Vec<f64> = (-2i32..=2).map(|i| (-(i * i) as f64 / 0.5).exp()).collect();
        let norm: f64 = w.iter().sum();
        for (k, &wk) in w.iter().enumerate() {
            let expected = (255.0 * wk / norm).round() as u8;
            assert_eq!(b.pixels()[3 + k], expected);
        }
        let total: u32 = b.pixels().iter().map(|&v| v as u32).sum();
        assert!((total as i32 - 255).abs() <= 3, "{total}");
        assert!(gaussian_blur(&img, -1.0).is_err());
    }

    #[test]
    fn blur_preserves_constants() {
        for sigma in [0.1, 0.5, 1.0, 2.7] {
            let img = RasterImage::filled(7, 5, 3, 173).unwrap();
            assert_eq!(gaussian_blur(&img, sigma).unwrap(), img);
        }
    }

    #[test]
    fn augment_parsing() {
        assert_eq!("shift:-8,-4".parse::<AugmentKind>().unwrap(), AugmentKind::ShiftX { lo: -8, hi: -4 });
        assert_eq!("bright:-150,150".parse::<AugmentKind>().unwrap(), AugmentKind::Brightness { lo: -150, hi: 150 });
        assert_eq!("contrast:0.5".parse::<AugmentKind>().unwrap(), AugmentKind::Contrast { alpha: 0.5 });
        assert_eq!("blur:0,1".parse::<AugmentKind>().unwrap(), AugmentKind::Blur { lo: 0.0, hi: 1.0 });
        for bad in ["shift:-4,-8", "contrast:0", "blur:1,0", "rotate:3", "shift:1", "blur:-1,1"] {
            assert!(bad.parse::<AugmentKind>().is_err(), "{bad}");
        }
    }

    #[test]
    fn random_application() {
        let img = RasterImage::filled(32, 32, 3, 120).unwrap();
        let fixed = AugmentOp { kind: AugmentKind::ShiftX { lo: -4, hi: -4 }, seed: 1 };
        for i in 0..20 {
            assert_eq!(fixed.sample_param(i).unwrap(), AugmentParam::Shift(-4));
        }
        let op = AugmentOp { kind: AugmentKind::Blur { lo: 0.0, hi: 1.0 }, seed: 7 };
        assert_eq!(apply_random(&img, &op, 3).unwrap(), apply_random(&img, &op, 3).unwrap());

        let op = AugmentOp { kind: AugmentKind::Brightness { lo: -150, hi: 150 }, seed: 2024 };
        let n = 20_000;
        let draws: Vec<f64> = (0..n)
            .map(|i| match op.sample_param(i).unwrap() {
                AugmentParam::Brightness(d) => {
                    assert!((-150..=150).contains(&d));
                    d as f64
                }
                p => panic!("{p:?}"),
            })
            .collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        // uniform on 301 integers: sd = sqrt((301^2 - 1) / 12)
        let se = ((301f64 * 301.0 - 1.0) / 12.0).sqrt() / (n as f64).sqrt();
        assert!(mean.abs() < 3.0 * se, "mean {mean}, se {se}");
        assert!(draws.contains(&-150.0) && draws.contains(&150.0));
    }

    fn image() -> impl Strategy<Value = RasterImage> {
        (1usize..12, 1usize..8, prop_oneof![Just(1usize), Just(3usize)]).prop_flat_map(|(w, h, c)| {
            prop::collection::vec(any::<u8>(), w * h * c)
                .prop_map(move |px| RasterImage::new(w, h, c, px).unwrap())
        })
    }

    proptest! {
        #[test]
        fn ops_preserve_shape(img in image(), delta in -300i64..300, alpha in 0.01f64..4.0, sigma in 0.0f64..3.0) {
            let outs = [
                brightness(&img, delta),
                linear_contrast(&img, alpha).unwrap(),
                gaussian_blur(&img, sigma).unwrap(),
                shift_x(&img, delta % img.width() as i64).unwrap(),
            ];
            for o in outs {
                prop_assert_eq!((o.width(), o.height(), o.channels()), (img.width(), img.height(), img.channels()));
            }
        }

        #[test]
        fn shift_round_trip_on_interior(img in image(), raw in 0i64..100) {
            let w = img.width() as i64;
            let dx = raw % w;
            let back = shift_x(&shift_x(&img, dx).unwrap(), -dx).unwrap();
            for y in 0..img.height() {
                for x in 0..img.width() {
                    // columns whose value passed through the filled region are excluded
                    if (x as i64) < w - dx {
                        for c in 0..img.channels() {
                            prop_assert_eq!(back.get(x, y, c), img.get(x, y, c));
                        }
                    }
                }
            }
        }

        #[test]
        fn blur_commutes_with_mirroring(img in image(), sigma in 0.05f64..2.5) {
            let a = gaussian_blur(&img.mirrored_horizontally(), sigma).unwrap();
            let b = gaussian_blur(&img, sigma).unwrap().mirrored_horizontally();
            prop_assert_eq!(a, b);
        }
    }
}
