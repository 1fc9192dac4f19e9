//! Analytic test signals sampled on a grid, optionally band-projected onto a
//! range of the frequency scale coordinate t_{A*}.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::anisotropy::Dilation;
use crate::error::{Error, Result};
use crate::fft::{l2_norm, Spectral};
use crate::grid::SpatialGrid;
use crate::spectra::{smooth_step, FrequencyScales};

pub const BATTERY_SEED: u64 = 0x5EED;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", rename_all_fields = "camelCase")]
pub enum SignalDescriptor {
    Gaussian { center: Vec<f64>, width: f64 },
    ModulatedGaussian { center: Vec<f64>, width: f64, frequency: Vec<f64>, phase: f64 },
    /// A seeded superposition of modulated Gaussian packets.
    BandLimitedRandom { seed: u64, packets: usize },
    IndicatorSmoothed { center: Vec<f64>, halfwidth: f64, smoothing: f64 },
    /// Samples that do not come from an analytic formula.
    Sampled,
}

/// Smooth band indicator on the frequency scale coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Band {
    pub lo: f64,
    pub hi: f64,
    #[serde(default = "default_ramp")]
    pub ramp: f64,
}

fn default_ramp() -> f64 {
    0.25
}

impl Band {
    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi, ramp: default_ramp() }
    }

    pub fn taper(&self, t: f64) -> f64 {
        smooth_step((t - self.lo) / self.ramp) * smooth_step((self.hi - t) / self.ramp)
    }
}

#[derive(Debug, Clone)]
pub struct TestSignal {
    pub grid: SpatialGrid,
    pub descriptor: SignalDescriptor,
    pub band: Option<Band>,
    pub samples: Vec<Complex64>,
    pub spectrum: Vec<Complex64>,
}

fn gaussian(x: &[f64], c: &[f64], w: f64) -> f64 {
    let r2: f64 = x.iter().zip(c).map(|(a, b)| (a - b).powi(2)).sum();
    (-r2 / (2.0 * w * w)).exp()
}

impl SignalDescriptor {
    pub fn eval(&self, x: &[f64]) -> Result<Complex64> {
        Ok(match self {
            Self::Gaussian { center, width } => Complex64::new(gaussian(x, center, *width), 0.0),
            Self::ModulatedGaussian { center, width, frequency, phase } => {
                let arg = 2.0 * std::f64::consts::PI * x.iter().zip(frequency).map(|(a, b)| a * b).sum::<f64>() + phase;
                Complex64::new(gaussian(x, center, *width) * arg.cos(), 0.0)
            }
            Self::BandLimitedRandom { seed, packets } => {
                let mut acc = Complex64::new(0.0, 0.0);
                for p in random_packets(*seed, *packets, x.len()) {
                    acc += p.eval(x)?;
                }
                acc
            }
            Self::IndicatorSmoothed { center, halfwidth, smoothing } => {
                let v: f64 = x
                    .iter()
                    .zip(center)
                    .map(|(a, c)| smooth_step((halfwidth + smoothing / 2.0 - (a - c).abs()) / smoothing))
                    .product();
                Complex64::new(v, 0.0)
            }
            Self::Sampled => return Err(Error::InvalidParameter("sampled signals have no formula".into())),
        })
    }

    fn check_dim(&self, d: usize) -> Result<()> {
        let lens: Vec<usize> = match self {
            Self::Gaussian { center, .. } | Self::IndicatorSmoothed { center, .. } => vec![center.len()],
            Self::ModulatedGaussian { center, frequency, .. } => vec![center.len(), frequency.len()],
            _ => vec![],
        };
        for got in lens {
            if got != d {
                return Err(Error::DimensionMismatch { expected: d, got });
            }
        }
        Ok(())
    }
}

/// Packets of a band-limited random signal: unit-direction carriers with
/// magnitudes in [0.3, 1.5], centers within ±2, widths in [0.8, 1.6].
fn random_packets(seed: u64, packets: usize, d: usize) -> Vec<SignalDescriptor> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..packets)
        .map(|_| {
            let center: Vec<f64> = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
            let dir = random_unit(&mut rng, d);
            let mag = rng.random_range(0.3..1.5);
            SignalDescriptor::ModulatedGaussian {
                center,
                width: rng.random_range(0.8..1.6),
                frequency: dir.iter().map(|v| v * mag).collect(),
                phase: rng.random_range(0.0..std::f64::consts::TAU),
            }
        })
        .collect()
}

fn random_unit(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let n = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if n > 0.1 && n <= 1.0 {
            return v.iter().map(|a| a / n).collect();
        }
    }
}

impl TestSignal {
    pub fn from_samples(grid: SpatialGrid, samples: Vec<Complex64>) -> Result<Self> {
        if samples.len() != grid.len() {
            return Err(Error::DimensionMismatch { expected: grid.len(), got: samples.len() });
        }
        let spectrum = Spectral::new(grid).to_fourier(&samples);
        Ok(Self { grid, descriptor: SignalDescriptor::Sampled, band: None, samples, spectrum })
    }

    pub fn from_spectrum(grid: SpatialGrid, spectrum: Vec<Complex64>) -> Result<Self> {
        if spectrum.len() != grid.len() {
            return Err(Error::DimensionMismatch { expected: grid.len(), got: spectrum.len() });
        }
        let samples = Spectral::new(grid).from_fourier(spectrum.clone());
        Ok(Self { grid, descriptor: SignalDescriptor::Sampled, band: None, samples, spectrum })
    }

    /// Samples the descriptor; with a band, multiplies f̂ by the band taper of
    /// t_{A*}(ξ) (zero at ξ = 0).
    pub fn new(grid: SpatialGrid, descriptor: SignalDescriptor, band: Option<(Band, &FrequencyScales)>) -> Result<Self> {
        descriptor.check_dim(grid.d)?;
        let mut x = vec![0.0; grid.d];
        let mut samples = Vec::with_capacity(grid.len());
        for k in 0..grid.len() {
            grid.point(k, &mut x);
            samples.push(descriptor.eval(&x)?);
        }
        let spec = Spectral::new(grid);
        let mut spectrum = spec.to_fourier(&samples);
        if let Some((b, fs)) = band {
            fs.grid.check_same(&grid)?;
            for (v, t) in spectrum.iter_mut().zip(&fs.t) {
                *v *= t.map_or(0.0, |t| b.taper(t));
            }
            samples = spec.from_fourier(spectrum.clone());
        }
        Ok(Self { grid, descriptor, band: band.map(|b| b.0), samples, spectrum })
    }

    pub fn norm(&self) -> f64 {
        l2_norm(&self.samples, self.grid.cell_volume())
    }

    pub fn scaled(&self, c: Complex64) -> Self {
        Self {
            samples: self.samples.iter().map(|v| v * c).collect(),
            spectrum: self.spectrum.iter().map(|v| v * c).collect(),
            ..self.clone()
        }
    }

    pub fn moduli(&self) -> Vec<f64> {
        self.samples.iter().map(|v| v.norm()).collect()
    }
}

/// Descriptors of the ten-signal battery; carriers are placed at scale
/// coordinates inside `band` and centers inside the middle half of the box.
pub fn battery_descriptors(grid: &SpatialGrid, dual: &Dilation, band: Band, seed: u64) -> Result<Vec<SignalDescriptor>> {
    let d = grid.d;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = grid.half_extent;
    let inner = (band.lo + band.ramp, band.hi - band.ramp);
    let carrier = |rng: &mut ChaCha8Rng| -> Result<Vec<f64>> {
        let dir = random_unit(rng, d);
        let t0 = dual.scale(&dir)?;
        let tau = if inner.1 > inner.0 { rng.random_range(inner.0..inner.1) } else { 0.5 * (band.lo + band.hi) };
        dual.continuous_power_vec(tau - t0, &dir)
    };
    let mut out = Vec::with_capacity(10);
    for _ in 0..6 {
        let center: Vec<f64> = (0..d).map(|_| rng.random_range(-x / 4.0..x / 4.0)).collect();
        let frequency = carrier(&mut rng)?;
        out.push(SignalDescriptor::ModulatedGaussian {
            center,
            width: rng.random_range(x / 10.0..x / 6.0),
            frequency,
            phase: rng.random_range(0.0..std::f64::consts::TAU),
        });
    }
    for _ in 0..2 {
        out.push(SignalDescriptor::BandLimitedRandom { seed: rng.random(), packets: 6 });
    }
    out.push(SignalDescriptor::IndicatorSmoothed {
        center: (0..d).map(|_| rng.random_range(-x / 8.0..x / 8.0)).collect(),
        halfwidth: x / 6.0,
        smoothing: x / 12.0,
    });
    out.push(SignalDescriptor::Gaussian { center: vec![0.0; d], width: x / 12.0 });
    Ok(out)
}

pub fn battery(fs: &FrequencyScales, dual: &Dilation, band: Band, seed: u64) -> Result<Vec<TestSignal>> {
    battery_descriptors(&fs.grid, dual, band, seed)?
        .into_iter()
        .map(|desc| TestSignal::new(fs.grid, desc, Some((band, fs))))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::anisotropy::ExpansiveMatrix;

    #[test]
    fn descriptors_roundtrip_json() {
        let d = SignalDescriptor::ModulatedGaussian { center: vec![0.0], width: 1.0, frequency: vec![0.5], phase: 0.0 };
        let text = serde_json::to_string(&d).unwrap();
        assert!(text.contains("\"kind\":\"modulated-gaussian\""));
        assert_eq!(serde_json::from_str::<SignalDescriptor>(&text).unwrap(), d);
        let e: SignalDescriptor = serde_json::from_str(r#"{"kind":"band-limited-random","seed":3,"packets":2}"#).unwrap();
        assert_eq!(e, SignalDescriptor::BandLimitedRandom { seed: 3, packets: 2 });
    }

    #[test]
    fn battery_is_seeded_and_band_limited() {
        let dil = Dilation::new(ExpansiveMatrix::diagonal(&[2.0]).unwrap()).unwrap();
        let dual = dil.adjoint().unwrap();
        let grid = SpatialGrid::new(1, 256, 8.0).unwrap();
        let fs = FrequencyScales::new(grid, &dual).unwrap();
        let band = Band::new(0.0, 1.5);
        let a = battery(&fs, &dual, band, BATTERY_SEED).unwrap();
        let b = battery(&fs, &dual, band, BATTERY_SEED).unwrap();
        assert_eq!(a.len(), 10);
        for (s, t) in a.iter().zip(&b) {
            assert_eq!(s.samples, t.samples);
            assert!(s.norm() > 1e-3, "{:?}", s.descriptor);
            for (v, tt) in s.spectrum.iter().zip(&fs.t) {
                if let Some(tt) = tt {
                    if *tt < band.lo || *tt > band.hi {
                        assert_eq!(*v, Complex64::new(0.0, 0.0));
                    }
                }
            }
        }
        let c = battery(&fs, &dual, band, 7).unwrap();
        assert_ne!(a[0].samples, c[0].samples);
    }

    #[test]
    fn dimension_is_checked() {
        let grid = SpatialGrid::new(2, 8, 1.0).unwrap();
        let d = SignalDescriptor::Gaussian { center: vec![0.0], width: 1.0 };
        assert!(matches!(TestSignal::new(grid, d, None), Err(Error::DimensionMismatch { .. })));
    }
}
