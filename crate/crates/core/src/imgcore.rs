//! Image representation, value-space conversions, resizing and PNG I/O.
//!
//! Images are channel-first `[C, H, W]`. Two value spaces exist: `Storage01`
//! (`[0, 1]`, what files hold) and `Network11` (`[-1, 1]`, what the networks see).

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Space {
    Storage01,
    Network11,
}

impl Space {
    fn bounds(self) -> (f64, f64) {
        match self {
            Space::Storage01 => (0.0, 1.0),
            Space::Network11 => (-1.0, 1.0),
        }
    }
}

/// A `[C, H, W]` image with `C` in `{1, 3}` and values inside its space's range.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageTensor<T> {
    data: Tensor<T>,
    space: Space,
}

impl<T: Scalar> ImageTensor<T> {
    pub fn new(data: Tensor<T>, space: Space) -> Result<Self> {
        let dims = data.dims();
        if dims.len() != 3 {
            return Err(Error::Shape(format!("image must be [C, H, W], got {dims:?}")));
        }
        if !matches!(dims[0], 1 | 3) {
            return Err(Error::Shape(format!("image must have 1 or 3 channels, got {}", dims[0])));
        }
        if dims[1] == 0 || dims[2] == 0 {
            return Err(Error::Shape(format!("image extent must be positive, got {dims:?}")));
        }
        let (lo, hi) = space.bounds();
        let (lo, hi) = (T::lit(lo), T::lit(hi));
        if let Some(v) = data.data().iter().find(|v| !(**v >= lo && **v <= hi)) {
            return Err(Error::Space(format!("value {v} outside {space:?} range")));
        }
        Ok(ImageTensor { data, space })
    }

    /// Constant-valued image.
    pub fn filled(channels: usize, height: usize, width: usize, value: T, space: Space) -> Result<Self> {
        Self::new(Tensor::full(&[channels, height, width], value), space)
    }

    pub fn tensor(&self) -> &Tensor<T> {
        &self.data
    }

    pub fn into_tensor(self) -> Tensor<T> {
        self.data
    }

    pub fn space(&self) -> Space {
        self.space
    }

    pub fn channels(&self) -> usize {
        self.data.dims()[0]
    }

    pub fn height(&self) -> usize {
        self.data.dims()[1]
    }

    pub fn width(&self) -> usize {
        self.data.dims()[2]
    }

    /// `v -> 2v - 1`.
    pub fn to_network(&self) -> Result<Self> {
        self.expect_space(Space::Storage01)?;
        let two = T::lit(2.0);
        Ok(ImageTensor { data: self.data.map(|v| two * v - T::one()), space: Space::Network11 })
    }

    /// `v -> (v + 1) / 2`.
    pub fn from_network(&self) -> Result<Self> {
        self.expect_space(Space::Network11)?;
        let half = T::lit(0.5);
        Ok(ImageTensor { data: self.data.map(|v| (v + T::one()) * half), space: Space::Storage01 })
    }

    /// Interpret a network output (possibly a hair outside `[-1, 1]` from
    /// rounding) as an image, clamping into range.
    pub fn from_network_tensor(t: Tensor<T>) -> Result<Self> {
        let one = T::one();
        Self::new(t.map(|v| v.max(-one).min(one)), Space::Network11)
    }

    fn expect_space(&self, want: Space) -> Result<()> {
        if self.space != want {
            return Err(Error::Space(format!("expected {want:?} image, got {:?}", self.space)));
        }
        Ok(())
    }

    /// Repeat a single channel three times (no-op for RGB).
    pub fn to_rgb(&self) -> Self {
        if self.channels() == 3 {
            return self.clone();
        }
        let mut v = Vec::with_capacity(self.data.len() * 3);
        for _ in 0..3 {
            v.extend_from_slice(self.data.data());
        }
        let data = Tensor::from_vec(&[3, self.height(), self.width()], v).expect("rgb dims");
        ImageTensor { data, space: self.space }
    }
}

/// 8-bit quantized image, `[C, H, W]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ImageU8 {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub data: Vec<u8>,
}

/// `round(v * 255)` with half-away-from-zero rounding.
pub fn quantize<T: Scalar>(img: &ImageTensor<T>) -> Result<ImageU8> {
    img.expect_space(Space::Storage01)?;
    let data = img
        .tensor()
        .data()
        .iter()
        .map(|v| (v.as_f64() * 255.0).round().clamp(0.0, 255.0) as u8)
        .collect();
    Ok(ImageU8 { channels: img.channels(), height: img.height(), width: img.width(), data })
}

pub fn dequantize<T: Scalar>(img: &ImageU8) -> ImageTensor<T> {
    let d = img.data.iter().map(|&v| T::lit(f64::from(v) / 255.0)).collect();
    let t = Tensor::from_vec(&[img.channels, img.height, img.width], d).expect("u8 dims");
    ImageTensor { data: t, space: Space::Storage01 }
}

/// Bilinear resize with corner pixel centers aligned.
pub fn resize<T: Scalar>(img: &ImageTensor<T>, height: usize, width: usize) -> Result<ImageTensor<T>> {
    if height == 0 || width == 0 {
        return Err(Error::Invalid(format!("resize target must be positive, got {height}x{width}")));
    }
    let (c, h, w) = (img.channels(), img.height(), img.width());
    if (h, w) == (height, width) {
        return Ok(img.clone());
    }
    let axis = |out: usize, inp: usize| -> Vec<(usize, usize, f64)> {
        (0..out)
            .map(|o| {
                let pos = if out == 1 { 0.0 } else { o as f64 * (inp - 1) as f64 / (out - 1) as f64 };
                let i0 = (pos.floor() as usize).min(inp - 1);
                let i1 = (i0 + 1).min(inp - 1);
                (i0, i1, pos - i0 as f64)
            })
            .collect()
    };
    let rows = axis(height, h);
    let cols = axis(width, w);
    let src = img.tensor().data();
    let mut out = Vec::with_capacity(c * height * width);
    for ch in 0..c {
        let plane = &src[ch * h * w..(ch + 1) * h * w];
        for &(r0, r1, fr) in &rows {
            for &(c0, c1, fc) in &cols {
                let p = |r: usize, cc: usize| plane[r * w + cc].as_f64();
                let top = p(r0, c0) + (p(r0, c1) - p(r0, c0)) * fc;
                let bot = p(r1, c0) + (p(r1, c1) - p(r1, c0)) * fc;
                out.push(T::lit(top + (bot - top) * fr));
            }
        }
    }
    let t = Tensor::from_vec(&[c, height, width], out)?;
    // Convex combinations stay in range up to rounding; clamp the rounding away.
    let (lo, hi) = img.space().bounds();
    let t = t.map(|v| v.max(T::lit(lo)).min(T::lit(hi)));
    ImageTensor::new(t, img.space())
}

pub fn load_png<T: Scalar>(path: impl AsRef<Path>) -> Result<ImageTensor<T>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut decoder = png::Decoder::new(BufReader::new(file));
    decoder.set_transformations(png::Transformations::IDENTITY);
    let decode_err = |e: png::DecodingError| Error::Decode { path: path.into(), reason: e.to_string() };
    let mut reader = decoder.read_info().map_err(decode_err)?;
    let (color, depth) = reader.output_color_type();
    let unsupported = |reason: String| Error::UnsupportedFormat { path: path.into(), reason };
    let (stored, keep) = match color {
        png::ColorType::Grayscale => (1, 1),
        png::ColorType::GrayscaleAlpha => (2, 1),
        png::ColorType::Rgb => (3, 3),
        png::ColorType::Rgba => (4, 3),
        png::ColorType::Indexed => return Err(unsupported("palette images".into())),
    };
    let max = match depth {
        png::BitDepth::Eight => 255.0,
        png::BitDepth::Sixteen => 65535.0,
        other => return Err(unsupported(format!("bit depth {other:?}"))),
    };
    let mut buf = vec![0; reader.output_buffer_size()];
    let info = reader.next_frame(&mut buf).map_err(decode_err)?;
    let (h, w) = (info.height as usize, info.width as usize);
    let sample = |idx: usize| -> f64 {
        match depth {
            png::BitDepth::Sixteen => f64::from(u16::from_be_bytes([buf[2 * idx], buf[2 * idx + 1]])),
            _ => f64::from(buf[idx]),
        }
    };
    let line = info.line_size;
    let bytes_per_sample = if depth == png::BitDepth::Sixteen { 2 } else { 1 };
    let mut data = vec![T::zero(); keep * h * w];
    for i in 0..h {
        for j in 0..w {
            for c in 0..keep {
                let byte = i * line + (j * stored + c) * bytes_per_sample;
                data[(c * h + i) * w + j] = T::lit(sample(byte / bytes_per_sample) / max);
            }
        }
    }
    ImageTensor::new(Tensor::from_vec(&[keep, h, w], data)?, Space::Storage01)
}

/// Write an 8-bit PNG (grayscale or RGB).
pub fn save_png<T: Scalar>(img: &ImageTensor<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let q = quantize(img)?;
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut enc = png::Encoder::new(BufWriter::new(file), q.width as u32, q.height as u32);
    enc.set_color(if q.channels == 3 { png::ColorType::Rgb } else { png::ColorType::Grayscale });
    enc.set_depth(png::BitDepth::Eight);
    let io = |e: png::EncodingError| Error::Io {
        path: path.into(),
        source: std::io::Error::other(e.to_string()),
    };
    let mut writer = enc.write_header().map_err(io)?;
    let plane = q.height * q.width;
    let mut interleaved = vec![0u8; q.data.len()];
    for p in 0..plane {
        for c in 0..q.channels {
            interleaved[p * q.channels + c] = q.data[c * plane + p];
        }
    }
    writer.write_image_data(&interleaved).map_err(io)?;
    writer.finish().map_err(io)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn write_raw_png(path: &Path, w: u32, h: u32, color: png::ColorType, depth: png::BitDepth, data: &[u8]) {
        let f = File::create(path).unwrap();
        let mut e = png::Encoder::new(BufWriter::new(f), w, h);
        e.set_color(color);
        e.set_depth(depth);
        let mut wr = e.write_header().unwrap();
        wr.write_image_data(data).unwrap();
    }

    #[test]
    fn load_8bit_values() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("white.png");
        write_raw_png(&p, 1, 1, png::ColorType::Grayscale, png::BitDepth::Eight, &[255]);
        let img = load_png::<f64>(&p).unwrap();
        assert_eq!(img.tensor().data(), &[1.0]);

        let p = dir.path().join("mid.png");
        write_raw_png(&p, 1, 1, png::ColorType::Rgb, png::BitDepth::Eight, &[128, 128, 128]);
        let img = load_png::<f64>(&p).unwrap();
        assert_eq!(img.channels(), 3);
        assert!((img.tensor().data()[0] - 128.0 / 255.0).abs() < 1e-15);
    }

    #[test]
    fn load_16bit_scales_by_65535() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("g16.png");
        write_raw_png(&p, 2, 1, png::ColorType::Grayscale, png::BitDepth::Sixteen, &[0xff, 0xff, 0x80, 0x00]);
        let img = load_png::<f64>(&p).unwrap();
        assert_eq!(img.tensor().data()[0], 1.0);
        assert!((img.tensor().data()[1] - 32768.0 / 65535.0).abs() < 1e-15);
    }

    #[test]
    fn load_errors_are_distinct() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(load_png::<f32>(dir.path().join("nope.png")), Err(Error::NotFound(_))));

        let p = dir.path().join("t.png");
        write_raw_png(&p, 4, 4, png::ColorType::Rgb, png::BitDepth::Eight, &[7; 48]);
        let bytes = std::fs::read(&p).unwrap();
        std::fs::write(&p, &bytes[..bytes.len() / 2]).unwrap();
        assert!(matches!(load_png::<f32>(&p), Err(Error::Decode { .. })));

        let p = dir.path().join("b1.png");
        write_raw_png(&p, 8, 1, png::ColorType::Grayscale, png::BitDepth::One, &[0b1010_1010]);
        assert!(matches!(load_png::<f32>(&p), Err(Error::UnsupportedFormat { .. })));
    }

    #[test]
    fn save_then_load_constant_half() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("half.png");
        let img = ImageTensor::<f32>::filled(3, 2, 2, 0.5, Space::Storage01).unwrap();
        save_png(&img, &p).unwrap();
        let back = load_png::<f64>(&p).unwrap();
        assert!(back.tensor().data().iter().all(|&v| v == 128.0 / 255.0));
    }

    #[test]
    fn save_to_missing_directory_is_io_error() {
        let dir = tempfile::tempdir().unwrap();
        let img = ImageTensor::<f32>::filled(1, 1, 1, 0.5, Space::Storage01).unwrap();
        let err = save_png(&img, dir.path().join("missing/sub/x.png")).unwrap_err();
        assert!(matches!(err, Error::NotFound(_) | Error::Io { .. }));
    }

    #[test]
    fn network_mapping_examples() {
        let img = ImageTensor::<f64>::new(
            Tensor::from_vec(&[1, 1, 3], vec![0.0, 1.0, 0.5]).unwrap(),
            Space::Storage01,
        )
        .unwrap();
        let n = img.to_network().unwrap();
        assert_eq!(n.tensor().data(), &[-1.0, 1.0, 0.0]);
        assert!(n.to_network().is_err(), "wrong-space input rejected");
        assert_eq!(n.from_network().unwrap(), img);
    }

    #[test]
    fn construction_enforces_invariants() {
        assert!(ImageTensor::<f32>::filled(2, 1, 1, 0.0, Space::Storage01).is_err());
        assert!(ImageTensor::<f32>::filled(1, 0, 1, 0.0, Space::Storage01).is_err());
        assert!(ImageTensor::<f32>::filled(1, 1, 1, -0.5, Space::Storage01).is_err());
        assert!(ImageTensor::<f32>::filled(1, 1, 1, -0.5, Space::Network11).is_ok());
    }

    #[test]
    fn quantize_examples() {
        let img = ImageTensor::<f64>::new(
            Tensor::from_vec(&[1, 1, 3], vec![0.5, 1.0, 0.0019]).unwrap(),
            Space::Storage01,
        )
        .unwrap();
        assert_eq!(quantize(&img).unwrap().data, vec![128, 255, 0]);
    }

    #[test]
    fn resize_examples() {
        let c = ImageTensor::<f64>::filled(3, 5, 7, 0.7, Space::Storage01).unwrap();
        let r = resize(&c, 13, 2).unwrap();
        assert!(r.tensor().data().iter().all(|v| (v - 0.7).abs() < 1e-12));
        assert_eq!(resize(&c, 5, 7).unwrap(), c);
        assert!(resize(&c, 0, 3).is_err());

        let t = Tensor::from_vec(&[1, 2, 2], vec![0.0, 1.0, 0.0, 1.0]).unwrap();
        let img = ImageTensor::<f64>::new(t, Space::Storage01).unwrap();
        let r = resize(&img, 2, 3).unwrap();
        assert_eq!(r.tensor().data(), &[0.0, 0.5, 1.0, 0.0, 0.5, 1.0]);
    }

    proptest! {
        #[test]
        fn network_round_trip_exact(v in prop::collection::vec(0.0f64..=1.0, 6)) {
            let img = ImageTensor::new(Tensor::from_vec(&[1, 2, 3], v).unwrap(), Space::Storage01).unwrap();
            let back = img.to_network().unwrap().from_network().unwrap();
            // 2v - 1 drops low-order bits of small v, so the round trip is exact
            // only up to one unit of 1.0's precision; quantized values never move.
            prop_assert!(back.tensor().max_abs_diff(img.tensor()) <= f64::EPSILON);
            prop_assert_eq!(quantize(&back).unwrap(), quantize(&img).unwrap());
        }

        #[test]
        fn resize_preserves_range(v in prop::collection::vec(0.0f64..=1.0, 12), h in 1usize..9, w in 1usize..9) {
            let img = ImageTensor::new(Tensor::from_vec(&[1, 3, 4], v).unwrap(), Space::Storage01).unwrap();
            let r = resize(&img, h, w).unwrap();
            prop_assert!(r.tensor().min() >= img.tensor().min() - 1e-6);
            prop_assert!(r.tensor().max() <= img.tensor().max() + 1e-6);
        }

        #[test]
        fn png_round_trip_within_half_step(v in prop::collection::vec(0.0f64..=1.0, 12)) {
            let dir = tempfile::tempdir().unwrap();
            let p = dir.path().join("r.png");
            let img = ImageTensor::new(Tensor::from_vec(&[3, 2, 2], v).unwrap(), Space::Storage01).unwrap();
            save_png(&img, &p).unwrap();
            let back = load_png::<f64>(&p).unwrap();
            prop_assert!(back.tensor().max_abs_diff(img.tensor()) <= 1.0 / 510.0 + 1e-12);
            let q = dequantize::<f64>(&quantize(&img).unwrap());
            prop_assert_eq!(back, q);
        }
    }
}
