//! Gaussian-window STFT, Doppler-band cropping and receiver fusion.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{precondition, ProcessError};

/// Default Doppler band kept in spectrograms, ±Hz.
pub const DOPPLER_BAND_HZ: f64 = 60.0;
/// Side length of the fused image.
pub const IMAGE_SIZE: usize = 224;
pub const IMAGE_CHANNELS: usize = 3;

/// `w[n] = exp(-½((n - (len-1)/2) / sigma)²)`.
pub fn gaussian_window(len: usize, sigma: f64) -> Result<Vec<f64>, ProcessError> {
    if len < 3 {
        return Err(precondition("window length must be at least 3"));
    }
    if !(sigma > 0.0) {
        return Err(precondition("window sigma must be positive"));
    }
    let c = (len - 1) as f64 / 2.0;
    let mut w: Vec<f64> = (0..len)
        .map(|n| {
            let x = (n as f64 - c) / sigma;
            (-0.5 * x * x).exp()
        })
        .collect();
    // mirror so w[n] == w[len-1-n] bit for bit
    for n in 0..len / 2 {
        w[len - 1 - n] = w[n];
    }
    Ok(w)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StftParams {
    pub window_len: usize,
    /// Gaussian standard deviation, in samples.
    pub sigma: f64,
    pub hop: usize,
    pub nfft: usize,
}

impl Default for StftParams {
    fn default() -> Self {
        StftParams {
            window_len: 256,
            sigma: 256.0 / 6.0,
            hop: 16,
            nfft: 1024,
        }
    }
}

impl StftParams {
    pub fn validate(&self) -> Result<(), ProcessError> {
        if self.hop == 0 || self.hop > self.window_len {
            return Err(precondition("hop must be in 1..=window_len"));
        }
        if self.nfft < self.window_len {
            return Err(precondition("nfft must be at least window_len"));
        }
        if !(self.sigma > 0.0) {
            return Err(precondition("sigma must be positive"));
        }
        Ok(())
    }

    pub fn n_frames(&self, n_samples: usize) -> usize {
        if n_samples < self.window_len {
            0
        } else {
            (n_samples - self.window_len) / self.hop + 1
        }
    }

    /// Time of the centre of frame `k`, seconds.
    pub fn frame_time(&self, k: usize, sample_rate_hz: f64) -> f64 {
        (k * self.hop) as f64 / sample_rate_hz + (self.window_len - 1) as f64 / 2.0 / sample_rate_hz
    }
}

/// Complex STFT laid out `[freq][frame]`, frequency rows ordered from
/// `-fs/2` up to (excluding) `+fs/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct Stft {
    pub nfft: usize,
    pub n_frames: usize,
    pub sample_rate_hz: f64,
    pub data: Vec<Complex64>,
}

impl Stft {
    pub fn bin_freq(&self, row: usize) -> f64 {
        (row as f64 - (self.nfft / 2) as f64) * self.sample_rate_hz / self.nfft as f64
    }

    pub fn at(&self, row: usize, frame: usize) -> Complex64 {
        self.data[row * self.n_frames + frame]
    }
}

pub fn stft(series: &[Complex64], params: &StftParams, sample_rate_hz: f64) -> Result<Stft, ProcessError> {
    params.validate()?;
    if series.len() < params.window_len {
        return Err(precondition(format!(
            "series of {} samples is shorter than the {}-sample window",
            series.len(),
            params.window_len
        )));
    }
    let window = gaussian_window(params.window_len, params.sigma)?;
    let nfft = params.nfft;
    let n_frames = params.n_frames(series.len());
    let fft = FftPlanner::<f64>::new().plan_fft_forward(nfft);
    let mut data = vec![Complex64::new(0.0, 0.0); nfft * n_frames];
    let mut buf = vec![Complex64::new(0.0, 0.0); nfft];
    let half = nfft / 2;
    for k in 0..n_frames {
        let start = k * params.hop;
        buf.fill(Complex64::new(0.0, 0.0));
        for (b, (x, w)) in buf
            .iter_mut()
            .zip(series[start..start + params.window_len].iter().zip(&window))
        {
            *b = x * w;
        }
        fft.process(&mut buf);
        // fftshift: bin (i + half) mod nfft goes to row i
        for row in 0..nfft {
            data[row * n_frames + k] = buf[(row + nfft - half) % nfft];
        }
    }
    Ok(Stft {
        nfft,
        n_frames,
        sample_rate_hz,
        data,
    })
}

/// Magnitude spectrogram restricted to the Doppler band.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    pub receiver_id: u16,
    /// Descending, from `+band` to `-band`.
    pub freqs_hz: Vec<f64>,
    pub times_s: Vec<f64>,
    /// `[freq][time]`
    pub mag: Vec<f64>,
}

impl Spectrogram {
    pub fn n_freqs(&self) -> usize {
        self.freqs_hz.len()
    }

    pub fn n_times(&self) -> usize {
        self.times_s.len()
    }

    pub fn at(&self, f: usize, t: usize) -> f64 {
        self.mag[f * self.n_times() + t]
    }

    /// Frequency of the strongest bin in each frame.
    pub fn peak_freqs(&self) -> Vec<f64> {
        let nt = self.n_times();
        (0..nt)
            .map(|t| {
                let best = (0..self.n_freqs())
                    .max_by(|&a, &b| self.at(a, t).total_cmp(&self.at(b, t)))
                    .unwrap_or(0);
                self.freqs_hz[best]
            })
            .collect()
    }

    /// Debug dump: two f64 dims (n_freqs, n_times), then f32 magnitudes.
    pub fn write_dump(&self, path: impl AsRef<Path>) -> Result<(), ProcessError> {
        let path = path.as_ref();
        let io = |e| ProcessError::Io {
            path: path.to_path_buf(),
            source: e,
        };
        let mut w = BufWriter::new(File::create(path).map_err(io)?);
        w.write_all(&(self.n_freqs() as f64).to_le_bytes()).map_err(io)?;
        w.write_all(&(self.n_times() as f64).to_le_bytes()).map_err(io)?;
        for v in &self.mag {
            w.write_all(&(*v as f32).to_le_bytes()).map_err(io)?;
        }
        w.flush().map_err(io)
    }
}

/// Keeps bins with `|f| <= band_hz`, highest frequency first.
pub fn doppler_crop(spec: &Stft, band_hz: f64, times_s: Vec<f64>) -> Result<Spectrogram, ProcessError> {
    if !(band_hz > 0.0 && band_hz < spec.sample_rate_hz / 2.0) {
        return Err(precondition(format!("band {band_hz} Hz must be inside (0, fs/2)")));
    }
    if times_s.len() != spec.n_frames {
        return Err(precondition("one time stamp per frame is required"));
    }
    let rows: Vec<usize> = (0..spec.nfft)
        .rev()
        .filter(|&r| spec.bin_freq(r).abs() <= band_hz + 1e-9)
        .collect();
    let mut mag = Vec::with_capacity(rows.len() * spec.n_frames);
    for &r in &rows {
        mag.extend((0..spec.n_frames).map(|k| spec.at(r, k).norm()));
    }
    Ok(Spectrogram {
        receiver_id: 0,
        freqs_hz: rows.iter().map(|&r| spec.bin_freq(r)).collect(),
        times_s,
        mag,
    })
}

/// STFT and crop in one step, with frame-centre time stamps.
pub fn doppler_spectrogram(
    series: &[Complex64],
    params: &StftParams,
    sample_rate_hz: f64,
    band_hz: f64,
) -> Result<Spectrogram, ProcessError> {
    let s = stft(series, params, sample_rate_hz)?;
    let times = (0..s.n_frames).map(|k| params.frame_time(k, sample_rate_hz)).collect();
    doppler_crop(&s, band_hz, times)
}

/// Fixed-size, 3-channel image with values in `[0, 1]`, laid out
/// `[channel][row][col]`. Row 0 holds the highest positive Doppler.
#[derive(Debug, Clone, PartialEq)]
pub struct FusedImage {
    pub height: usize,
    pub width: usize,
    pub pixels: Vec<f32>,
}

impl FusedImage {
    pub fn at(&self, c: usize, r: usize, col: usize) -> f32 {
        self.pixels[(c * self.height + r) * self.width + col]
    }

    /// Binary form: three f64 dims (channels, height, width), then f32 pixels.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(24 + 4 * self.pixels.len());
        for d in [IMAGE_CHANNELS, self.height, self.width] {
            out.extend_from_slice(&(d as f64).to_le_bytes());
        }
        for p in &self.pixels {
            out.extend_from_slice(&p.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, ProcessError> {
        let dim = |i: usize| -> Result<usize, ProcessError> {
            let b = bytes
                .get(8 * i..8 * i + 8)
                .ok_or_else(|| precondition("image header truncated"))?;
            let v = f64::from_le_bytes(b.try_into().expect("8 bytes"));
            if v >= 0.0 && v.fract() == 0.0 && v < 1e9 {
                Ok(v as usize)
            } else {
                Err(precondition(format!("bad image dimension {v}")))
            }
        };
        let (c, h, w) = (dim(0)?, dim(1)?, dim(2)?);
        if c != IMAGE_CHANNELS {
            return Err(precondition(format!("expected 3 channels, found {c}")));
        }
        let n = c * h * w;
        if bytes.len() != 24 + 4 * n {
            return Err(precondition("image payload length does not match its header"));
        }
        let pixels: Vec<f32> = bytes[24..]
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().expect("4 bytes")))
            .collect();
        if pixels.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(precondition("image pixels must lie in [0, 1]"));
        }
        Ok(FusedImage {
            height: h,
            width: w,
            pixels,
        })
    }
}

/// Bilinear resampling with half-pixel centres and edge clamping.
pub fn resize_bilinear(src: &[f64], h: usize, w: usize, out_h: usize, out_w: usize) -> Vec<f64> {
    let coords = |n_out: usize, n_in: usize| -> Vec<(usize, usize, f64)> {
        let scale = n_in as f64 / n_out as f64;
        (0..n_out)
            .map(|i| {
                let x = ((i as f64 + 0.5) * scale - 0.5).max(0.0);
                let x0 = (x.floor() as usize).min(n_in - 1);
                let x1 = (x0 + 1).min(n_in - 1);
                (x0, x1, x - x0 as f64)
            })
            .collect()
    };
    let rows = coords(out_h, h);
    let cols = coords(out_w, w);
    let mut out = Vec::with_capacity(out_h * out_w);
    for &(r0, r1, fr) in &rows {
        for &(c0, c1, fc) in &cols {
            let top = src[r0 * w + c0] * (1.0 - fc) + src[r0 * w + c1] * fc;
            let bot = src[r1 * w + c0] * (1.0 - fc) + src[r1 * w + c1] * fc;
            out.push(top * (1.0 - fr) + bot * fr);
        }
    }
    out
}

/// Concatenates receivers along time (ascending receiver id), normalises by
/// the global maximum, resizes to `size x size` and replicates to 3 channels.
pub fn fuse_receivers(specs: &[Spectrogram], size: usize) -> Result<FusedImage, ProcessError> {
    let first = specs
        .first()
        .ok_or_else(|| precondition("need at least one spectrogram"))?;
    if size == 0 {
        return Err(precondition("image size must be positive"));
    }
    if specs.iter().any(|s| s.freqs_hz != first.freqs_hz) {
        return Err(ProcessError::AxisMismatch);
    }
    let mut ordered: Vec<&Spectrogram> = specs.iter().collect();
    ordered.sort_by_key(|s| s.receiver_id);
    let nf = first.n_freqs();
    let total_t: usize = ordered.iter().map(|s| s.n_times()).sum();
    if nf == 0 || total_t == 0 {
        return Err(precondition("spectrograms must be non-empty"));
    }
    let mut cat = vec![0.0; nf * total_t];
    let mut col = 0;
    for s in &ordered {
        let nt = s.n_times();
        for f in 0..nf {
            cat[f * total_t + col..f * total_t + col + nt].copy_from_slice(&s.mag[f * nt..(f + 1) * nt]);
        }
        col += nt;
    }
    let max = cat.iter().copied().fold(0.0_f64, f64::max);
    if max > 0.0 {
        for v in cat.iter_mut() {
            *v /= max;
        }
    }
    let resized = resize_bilinear(&cat, nf, total_t, size, size);
    let plane: Vec<f32> = resized.iter().map(|v| v.clamp(0.0, 1.0) as f32).collect();
    let mut pixels = Vec::with_capacity(IMAGE_CHANNELS * plane.len());
    for _ in 0..IMAGE_CHANNELS {
        pixels.extend_from_slice(&plane);
    }
    Ok(FusedImage {
        height: size,
        width: size,
        pixels,
    })
}

/// Pixel row whose centre corresponds to `freq_hz` in a fused image built
/// from spectrograms with the given (descending, uniform) frequency axis.
pub fn row_for_freq(freqs_hz: &[f64], freq_hz: f64, size: usize) -> f64 {
    let step = freqs_hz[0] - freqs_hz[1];
    let src = (freqs_hz[0] - freq_hz) / step;
    (src + 0.5) * size as f64 / freqs_hz.len() as f64 - 0.5
}

/// 8-bit grayscale PNG of channel 0, `byte = round(255·value)`.
pub fn export_image(img: &FusedImage, path: impl AsRef<Path>) -> Result<(), ProcessError> {
    let path = path.as_ref();
    let io = |e: std::io::Error| ProcessError::Io {
        path: path.to_path_buf(),
        source: e,
    };
    let bytes = image_bytes(img);
    let file = File::create(path).map_err(io)?;
    let mut enc = png::Encoder::new(BufWriter::new(file), img.width as u32, img.height as u32);
    enc.set_color(png::ColorType::Grayscale);
    enc.set_depth(png::BitDepth::Eight);
    let png_err = |e: png::EncodingError| io(std::io::Error::other(e));
    let mut writer = enc.write_header().map_err(png_err)?;
    writer.write_image_data(&bytes).map_err(png_err)?;
    writer.finish().map_err(png_err)
}

/// Grayscale bytes of channel 0, row-major.
pub fn image_bytes(img: &FusedImage) -> Vec<u8> {
    img.pixels[..img.height * img.width]
        .iter()
        .map(|v| (255.0 * v.clamp(0.0, 1.0)).round() as u8)
        .collect()
}
