use std::io::{self, Write};

/// Row-major, channel-interleaved float image.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub data: Vec<f64>,
}

impl Image {
    pub fn filled(width: usize, height: usize, channels: usize, value: f64) -> Self {
        Self {
            width,
            height,
            channels,
            data: vec![value; width * height * channels],
        }
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize, c: usize) -> f64 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    pub fn pixel(&self, x: usize, y: usize) -> &[f64] {
        let i = (y * self.width + x) * self.channels;
        &self.data[i..i + self.channels]
    }

    pub fn max_abs_diff(&self, other: &Image) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn mean_abs_diff(&self, other: &Image) -> f64 {
        let sum: f64 = self.data.iter().zip(&other.data).map(|(a, b)| (a - b).abs()).sum();
        sum / self.data.len().max(1) as f64
    }
}

/// Peak signal-to-noise ratio in dB for images in `[0, 1]`.
pub fn psnr(a: &Image, b: &Image) -> f64 {
    let mse: f64 = a
        .data
        .iter()
        .zip(&b.data)
        .map(|(x, y)| (x.clamp(0.0, 1.0) - y.clamp(0.0, 1.0)).powi(2))
        .sum::<f64>()
        / a.data.len().max(1) as f64;
    if mse == 0.0 {
        f64::INFINITY
    } else {
        -10.0 * mse.log10()
    }
}

/// Binary PPM (P6), 8 bits per channel, values clamped to `[0, 1]`.
pub fn write_ppm<W: Write>(img: &Image, w: &mut W) -> io::Result<()> {
    if img.channels != 3 {
        return Err(io::Error::new(io::ErrorKind::InvalidInput, "PPM needs 3 channels"));
    }
    write!(w, "P6\n{} {}\n255\n", img.width, img.height)?;
    let bytes: Vec<u8> = img
        .data
        .iter()
        .map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
        .collect();
    w.write_all(&bytes)
}

/// Binary PGM (P5), 16-bit big-endian samples in millimeters.
pub fn write_pgm16<W: Write>(depth: &Image, w: &mut W) -> io::Result<()> {
    if depth.channels != 1 {
        return Err(io::Error::new(io::ErrorKind::InvalidInput, "PGM needs 1 channel"));
    }
    write!(w, "P5\n{} {}\n65535\n", depth.width, depth.height)?;
    let mut bytes = Vec::with_capacity(depth.data.len() * 2);
    for v in &depth.data {
        let mm = (v * 1000.0).round().clamp(0.0, 65535.0) as u16;
        bytes.extend_from_slice(&mm.to_be_bytes());
    }
    w.write_all(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ppm_and_pgm_headers() {
        let mut out = Vec::new();
        write_ppm(&Image::filled(2, 1, 3, 0.5), &mut out).unwrap();
        assert!(out.starts_with(b"P6\n2 1\n255\n"));
        assert_eq!(out.len(), 11 + 6);
        assert_eq!(out[11], 128);

        let mut out = Vec::new();
        write_pgm16(&Image::filled(1, 1, 1, 1.234), &mut out).unwrap();
        assert!(out.starts_with(b"P5\n1 1\n65535\n"));
        assert_eq!(&out[out.len() - 2..], &1234u16.to_be_bytes());
    }

    #[test]
    fn psnr_of_identical_is_infinite() {
        let a = Image::filled(3, 3, 3, 0.2);
        assert!(psnr(&a, &a).is_infinite());
        let b = Image::filled(3, 3, 3, 0.3);
        assert!((psnr(&a, &b) - 20.0).abs() < 1e-9);
    }
}
