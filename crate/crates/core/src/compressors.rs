//! Compression operators with bounded relative error.
//!
//! Every compressor `𝒞` here satisfies, for some `C ≥ 0`, `δ ∈ (0, 1]` and
//! `r > 0`,
//!
//! ```text
//! E‖𝒞(x) − x‖²   ≤ C ‖x‖²
//! E‖𝒞(x)/r − x‖² ≤ (1 − δ) ‖x‖²
//! ```
//!
//! [`Compressor::constants`] returns the certified triple for a given vector
//! dimension and [`certify_constants`] checks it by Monte Carlo.
//!
//! A compressed vector is always produced through a [`CompressedPayload`],
//! which holds exactly the data a sender would put on the wire and its size
//! in bits, so bit accounting cannot drift from what was actually encoded.

use std::fmt;

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::{self, Purpose};

/// Default width of one transmitted scalar.
pub const DEFAULT_SCALAR_BITS: u32 = 32;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Compressor {
    /// Sends the vector as is.
    Identity,
    /// Unbiased stochastic rounding onto `2^bits − 1` levels scaled by ‖x‖∞.
    Quantize { bits: u32 },
    /// Keeps the `k` largest-magnitude entries.
    TopK { k: usize },
    /// `(‖x‖₁/d)·sign(x)`.
    NormSign,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CompressorConstants {
    pub c: f64,
    pub delta: f64,
    pub r: f64,
}

impl CompressorConstants {
    /// Unbiased operator with relative variance `c`: `r = 1 + c`, `δ = 1/(1 + c)`.
    fn unbiased(c: f64) -> Self {
        Self {
            c,
            delta: 1.0 / (1.0 + c),
            r: 1.0 + c,
        }
    }
}

impl fmt::Display for Compressor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Compressor::Identity => write!(f, "identity"),
            Compressor::Quantize { bits } => write!(f, "quantize(b={bits})"),
            Compressor::TopK { k } => write!(f, "topk(k={k})"),
            Compressor::NormSign => write!(f, "normsign"),
        }
    }
}

impl Compressor {
    pub fn validate(&self, d: usize) -> Result<()> {
        match *self {
            Compressor::Quantize { bits } if !(1..=32).contains(&bits) => Err(Error::InvalidParameter(
                format!("quantizer needs 1 <= bits <= 32, got {bits}"),
            )),
            Compressor::TopK { k } if k == 0 || k > d => Err(Error::InvalidParameter(format!(
                "top-k needs 1 <= k <= d = {d}, got {k}"
            ))),
            _ => Ok(()),
        }
    }

    pub fn is_identity(&self) -> bool {
        matches!(self, Compressor::Identity)
    }

    /// Certified `(C, δ, r)` at dimension `d`.
    pub fn constants(&self, d: usize) -> CompressorConstants {
        match *self {
            Compressor::Identity => CompressorConstants {
                c: 0.0,
                delta: 1.0,
                r: 1.0,
            },
            Compressor::Quantize { bits } => CompressorConstants::unbiased(quantizer_variance_bound(d, bits)),
            Compressor::TopK { k } => {
                let kept = k.min(d) as f64 / d as f64;
                CompressorConstants {
                    c: 1.0 - kept,
                    delta: kept,
                    r: 1.0,
                }
            }
            Compressor::NormSign => CompressorConstants {
                c: 1.0 - 1.0 / d as f64,
                delta: 1.0 / d as f64,
                r: 1.0,
            },
        }
    }

    /// Payload size in bits for a `d`-vector with `l`-bit scalars.
    pub fn bits(&self, d: usize, l: u32) -> u64 {
        let (d, l) = (d as u64, u64::from(l));
        match *self {
            Compressor::Identity => d * l,
            Compressor::Quantize { bits } => (u64::from(bits) + 1) * d + l,
            Compressor::TopK { k } => k as u64 * (l + index_bits(d)),
            Compressor::NormSign => d + l,
        }
    }

    pub fn compress<R: Rng + ?Sized>(&self, x: &[f64], l: u32, rng: &mut R) -> CompressedPayload {
        match *self {
            Compressor::Identity => identity_compress(x, l).1,
            Compressor::Quantize { bits } => stochastic_quantize(x, bits, l, rng).1,
            Compressor::TopK { k } => top_k_compress(x, k, l).1,
            Compressor::NormSign => norm_sign_compress(x, l).1,
        }
    }
}

/// `min((d−1)/(4s²), √(d−1)/(2s))` with `s = 2^bits − 1`.
///
/// The largest-magnitude entry is reproduced exactly; every other entry has
/// rounding variance at most `(‖x‖∞/s)²·min(1/4, s|x_j|/‖x‖∞)`.
fn quantizer_variance_bound(d: usize, bits: u32) -> f64 {
    let s = levels(bits) as f64;
    let rest = d.saturating_sub(1) as f64;
    (rest / (4.0 * s * s)).min(rest.sqrt() / (2.0 * s))
}

fn levels(bits: u32) -> u64 {
    (1u64 << bits) - 1
}

/// ⌈log₂ d⌉
fn index_bits(d: u64) -> u64 {
    if d <= 1 {
        0
    } else {
        u64::from(64 - (d - 1).leading_zeros())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum PayloadData {
    Dense(Vec<f64>),
    Quantized {
        norm_inf: f64,
        negative: Vec<bool>,
        levels: Vec<u32>,
        max_level: u32,
    },
    Sparse {
        dim: usize,
        indices: Vec<u32>,
        values: Vec<f64>,
    },
    Signs {
        scale: f64,
        signs: Vec<i8>,
    },
}

/// The exact content of one transmission and its size.
#[derive(Clone, Debug, PartialEq)]
pub struct CompressedPayload {
    pub data: PayloadData,
    pub bit_count: u64,
}

impl CompressedPayload {
    pub fn dim(&self) -> usize {
        match &self.data {
            PayloadData::Dense(v) => v.len(),
            PayloadData::Quantized { levels, .. } => levels.len(),
            PayloadData::Sparse { dim, .. } => *dim,
            PayloadData::Signs { signs, .. } => signs.len(),
        }
    }

    /// Reconstructs the compressed vector a receiver would see.
    pub fn decode_into(&self, out: &mut [f64]) {
        assert_eq!(out.len(), self.dim(), "decode buffer has wrong length");
        match &self.data {
            PayloadData::Dense(v) => out.copy_from_slice(v),
            PayloadData::Quantized {
                norm_inf,
                negative,
                levels,
                max_level,
            } => {
                let step = norm_inf / f64::from(*max_level);
                for ((o, &neg), &k) in out.iter_mut().zip(negative).zip(levels) {
                    let mag = step * f64::from(k);
                    *o = if neg { -mag } else { mag };
                }
            }
            PayloadData::Sparse { indices, values, .. } => {
                out.fill(0.0);
                for (&i, &v) in indices.iter().zip(values) {
                    out[i as usize] = v;
                }
            }
            PayloadData::Signs { scale, signs } => {
                for (o, &s) in out.iter_mut().zip(signs) {
                    *o = scale * f64::from(s);
                }
            }
        }
    }

    pub fn decode(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.decode_into(&mut out);
        out
    }
}

pub fn identity_compress(x: &[f64], l: u32) -> (Vec<f64>, CompressedPayload) {
    let payload = CompressedPayload {
        data: PayloadData::Dense(x.to_vec()),
        bit_count: Compressor::Identity.bits(x.len(), l),
    };
    (x.to_vec(), payload)
}

/// `out_j = ‖x‖∞·sign(x_j)·k_j/s` with `k_j = ⌊s|x_j|/‖x‖∞ + u_j⌋`,
/// `u_j ~ U[0, 1)`, `s = 2^bits − 1`. Coordinate-wise unbiased.
pub fn stochastic_quantize<R: Rng + ?Sized>(
    x: &[f64],
    bits: u32,
    l: u32,
    rng: &mut R,
) -> (Vec<f64>, CompressedPayload) {
    assert!((1..=32).contains(&bits), "quantizer bits must be in 1..=32");
    let s = levels(bits);
    let norm_inf = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut negative = Vec::with_capacity(x.len());
    let mut lv = Vec::with_capacity(x.len());
    for &xj in x {
        // draw even for zero input so stream consumption does not depend on x
        let u: f64 = rng.gen();
        let k = if norm_inf > 0.0 {
            ((s as f64) * xj.abs() / norm_inf + u).floor().min(s as f64) as u32
        } else {
            0
        };
        negative.push(xj < 0.0);
        lv.push(k);
    }
    let payload = CompressedPayload {
        data: PayloadData::Quantized {
            norm_inf,
            negative,
            levels: lv,
            max_level: s as u32,
        },
        bit_count: Compressor::Quantize { bits }.bits(x.len(), l),
    };
    (payload.decode(), payload)
}

/// Keeps the `k` largest `|x_j|`, ties broken toward the lower index.
pub fn top_k_compress(x: &[f64], k: usize, l: u32) -> (Vec<f64>, CompressedPayload) {
    let d = x.len();
    assert!(k >= 1 && k <= d, "top-k needs 1 <= k <= d");
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| x[b].abs().total_cmp(&x[a].abs()).then(a.cmp(&b)));
    let mut kept = order[..k].to_vec();
    kept.sort_unstable();
    let payload = CompressedPayload {
        data: PayloadData::Sparse {
            dim: d,
            indices: kept.iter().map(|&i| i as u32).collect(),
            values: kept.iter().map(|&i| x[i]).collect(),
        },
        bit_count: Compressor::TopK { k }.bits(d, l),
    };
    (payload.decode(), payload)
}

pub fn norm_sign_compress(x: &[f64], l: u32) -> (Vec<f64>, CompressedPayload) {
    let d = x.len();
    let scale = if d == 0 {
        0.0
    } else {
        x.iter().map(|v| v.abs()).sum::<f64>() / d as f64
    };
    let signs = x
        .iter()
        .map(|&v| {
            if v > 0.0 {
                1
            } else if v < 0.0 {
                -1
            } else {
                0
            }
        })
        .collect();
    let payload = CompressedPayload {
        data: PayloadData::Signs { scale, signs },
        bit_count: Compressor::NormSign.bits(d, l),
    };
    (payload.decode(), payload)
}

/// Monte Carlo estimates of the compressor constants.
#[derive(Clone, Debug, PartialEq)]
pub struct CertificationReport {
    pub compressor: Compressor,
    pub dim: usize,
    pub samples: usize,
    pub declared: CompressorConstants,
    /// Mean of ‖𝒞(x) − x‖² / ‖x‖².
    pub c_mean: f64,
    pub c_std_err: f64,
    pub c_max: f64,
    /// Mean of ‖𝒞(x)/r − x‖² / ‖x‖².
    pub scaled_mean: f64,
    pub scaled_std_err: f64,
    /// `1 − scaled_mean`.
    pub delta_estimate: f64,
    /// Mean of 𝒞(x)_j − x_j pooled over all coordinates.
    pub bias_mean: f64,
    pub bias_std_err: f64,
}

fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Draws `n_samples` standard-normal vectors of dimension `d` and checks both
/// compressor inequalities at the declared constants, allowing three standard
/// errors of slack.
pub fn certify_constants(compressor: Compressor, d: usize, n_samples: usize, seed: u64) -> Result<CertificationReport> {
    compressor.validate(d)?;
    certify_against(compressor, compressor.constants(d), d, n_samples, seed)
}

/// [`certify_constants`] against an explicitly declared triple.
pub fn certify_against(
    compressor: Compressor,
    declared: CompressorConstants,
    d: usize,
    n_samples: usize,
    seed: u64,
) -> Result<CertificationReport> {
    if n_samples == 0 {
        return Err(Error::InvalidParameter("certification needs at least one sample".into()));
    }
    let normal = rand_normal_sampler();
    let mut ratios = Vec::with_capacity(n_samples);
    let mut scaled = Vec::with_capacity(n_samples);
    let mut bias = Vec::with_capacity(n_samples * d);
    let mut x = vec![0.0; d];
    for s in 0..n_samples as u64 {
        let mut input_rng = rng::stream(seed, Purpose::Bench, 0, s);
        for v in x.iter_mut() {
            *v = normal(&mut input_rng);
        }
        let norm_sq: f64 = x.iter().map(|v| v * v).sum();
        if norm_sq == 0.0 {
            continue;
        }
        let mut comp_rng = rng::stream(seed, Purpose::Compression, 0, s);
        let out = compressor.compress(&x, DEFAULT_SCALAR_BITS, &mut comp_rng).decode();
        let err: f64 = out.iter().zip(&x).map(|(o, v)| (o - v).powi(2)).sum();
        let serr: f64 = out.iter().zip(&x).map(|(o, v)| (o / declared.r - v).powi(2)).sum();
        ratios.push(err / norm_sq);
        scaled.push(serr / norm_sq);
        bias.extend(out.iter().zip(&x).map(|(o, v)| o - v));
    }
    let (c_mean, c_std_err) = mean_and_se(&ratios);
    let (scaled_mean, scaled_std_err) = mean_and_se(&scaled);
    let (bias_mean, bias_std_err) = mean_and_se(&bias);
    let report = CertificationReport {
        compressor,
        dim: d,
        samples: ratios.len(),
        declared,
        c_mean,
        c_std_err,
        c_max: ratios.iter().copied().fold(0.0, f64::max),
        scaled_mean,
        scaled_std_err,
        delta_estimate: 1.0 - scaled_mean,
        bias_mean,
        bias_std_err,
    };
    if c_mean > declared.c + 3.0 * c_std_err {
        return Err(Error::Certification {
            compressor: compressor.to_string(),
            empirical: c_mean,
            declared: declared.c,
            std_err: c_std_err,
        });
    }
    if scaled_mean > 1.0 - declared.delta + 3.0 * scaled_std_err {
        return Err(Error::Certification {
            compressor: format!("{compressor} (r-scaled)"),
            empirical: scaled_mean,
            declared: 1.0 - declared.delta,
            std_err: scaled_std_err,
        });
    }
    Ok(report)
}

fn rand_normal_sampler() -> impl Fn(&mut rand_chacha::ChaCha8Rng) -> f64 {
    // Box-Muller; avoids pulling rand_distr for one distribution
    |rng| {
        let u1: f64 = 1.0 - rng.gen::<f64>();
        let u2: f64 = rng.gen();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }
}
