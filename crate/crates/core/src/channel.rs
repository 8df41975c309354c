//! Block-fading SNR models, sampling, and the capacity/threshold arithmetic.
//!
//! All SNRs are linear. Conversion from dB happens at the user boundary via
//! [`db_to_linear`].

use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::{BrqError, Result};

/// Shannon capacity `log2(1 + snr)` in bits per channel use.
pub fn capacity(snr: f64) -> Result<f64> {
    if !(snr >= 0.0) {
        return Err(BrqError::invalid(format!("SNR must be >= 0, got {snr}")));
    }
    Ok(snr.ln_1p() / std::f64::consts::LN_2)
}

/// Minimal SNR `2^rate - 1` that supports `rate` bits per channel use.
pub fn inv_capacity(rate: f64) -> Result<f64> {
    if !(rate >= 0.0) {
        return Err(BrqError::invalid(format!("rate must be >= 0, got {rate}")));
    }
    Ok((rate * std::f64::consts::LN_2).exp_m1())
}

/// Capacity for an SNR already known to be valid.
#[inline]
pub(crate) fn cap(snr: f64) -> f64 {
    snr.max(0.0).ln_1p() / std::f64::consts::LN_2
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(snr: f64) -> f64 {
    10.0 * snr.log10()
}

/// Per-slot SNR distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FadingModel {
    /// Exponentially distributed SNR with the given mean.
    Rayleigh { mean_snr: f64 },
    /// Constant SNR in every slot.
    Deterministic { snr: f64 },
    /// A recorded sequence of SNRs. Sampling replays it in order; analytic
    /// expectations treat it as an empirical distribution.
    EmpiricalTrace(Vec<f64>),
}

impl FadingModel {
    pub fn rayleigh(mean_snr: f64) -> Result<Self> {
        let m = FadingModel::Rayleigh { mean_snr };
        m.validate()?;
        Ok(m)
    }

    pub fn deterministic(snr: f64) -> Result<Self> {
        let m = FadingModel::Deterministic { snr };
        m.validate()?;
        Ok(m)
    }

    pub fn empirical_trace(snrs: Vec<f64>) -> Result<Self> {
        let m = FadingModel::EmpiricalTrace(snrs);
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            FadingModel::Rayleigh { mean_snr } => {
                if !(*mean_snr > 0.0 && mean_snr.is_finite()) {
                    return Err(BrqError::invalid(format!(
                        "Rayleigh mean SNR must be finite and > 0, got {mean_snr}"
                    )));
                }
            }
            FadingModel::Deterministic { snr } => {
                if !(*snr >= 0.0 && snr.is_finite()) {
                    return Err(BrqError::invalid(format!("SNR must be >= 0, got {snr}")));
                }
            }
            FadingModel::EmpiricalTrace(trace) => {
                if trace.is_empty() {
                    return Err(BrqError::invalid("empirical trace is empty"));
                }
                if let Some(bad) = trace.iter().find(|g| !(**g >= 0.0 && g.is_finite())) {
                    return Err(BrqError::invalid(format!(
                        "trace SNR must be >= 0, got {bad}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Probability `P(snr >= threshold)` that a slot is decodable.
    pub fn decode_prob(&self, threshold: f64) -> Result<f64> {
        if !(threshold >= 0.0) {
            return Err(BrqError::invalid(format!(
                "threshold SNR must be >= 0, got {threshold}"
            )));
        }
        self.validate()?;
        Ok(match self {
            FadingModel::Rayleigh { mean_snr } => (-threshold / mean_snr).exp(),
            FadingModel::Deterministic { snr } => {
                if *snr >= threshold {
                    1.0
                } else {
                    0.0
                }
            }
            FadingModel::EmpiricalTrace(trace) => {
                let hits = trace.iter().filter(|g| **g >= threshold).count();
                hits as f64 / trace.len() as f64
            }
        })
    }

    /// Density of the SNR at `snr`. Only continuous models have one.
    pub fn pdf(&self, snr: f64) -> Result<f64> {
        if !(snr >= 0.0) {
            return Err(BrqError::invalid(format!("SNR must be >= 0, got {snr}")));
        }
        match self {
            FadingModel::Rayleigh { mean_snr } => Ok((-snr / mean_snr).exp() / mean_snr),
            _ => Err(BrqError::NoDensity),
        }
    }

    /// Mean SNR of the model.
    pub fn mean_snr(&self) -> f64 {
        match self {
            FadingModel::Rayleigh { mean_snr } => *mean_snr,
            FadingModel::Deterministic { snr } => *snr,
            FadingModel::EmpiricalTrace(t) => t.iter().sum::<f64>() / t.len() as f64,
        }
    }
}

/// A deterministic stream of per-slot SNR draws from one model.
///
/// Owns its generator; a trace model is replayed from the start.
#[derive(Debug)]
pub struct SnrStream<'m, R> {
    model: &'m FadingModel,
    rng: R,
    cursor: usize,
    exp: Option<Exp<f64>>,
}

impl<'m, R: Rng> SnrStream<'m, R> {
    pub fn new(model: &'m FadingModel, rng: R) -> Result<Self> {
        model.validate()?;
        let exp = match model {
            FadingModel::Rayleigh { mean_snr } => {
                Some(Exp::new(1.0 / mean_snr).map_err(|e| BrqError::invalid(e.to_string()))?)
            }
            _ => None,
        };
        Ok(SnrStream {
            model,
            rng,
            cursor: 0,
            exp,
        })
    }

    pub fn next_snr(&mut self) -> Result<f64> {
        sample_snr_inner(
            self.model,
            &mut self.rng,
            &mut self.cursor,
            self.exp.as_ref(),
        )
    }

    pub fn samples_drawn(&self) -> usize {
        self.cursor
    }
}

/// One draw from `model`. Trace models are read at `*cursor`, which advances.
pub fn sample_snr<R: Rng>(model: &FadingModel, rng: &mut R, cursor: &mut usize) -> Result<f64> {
    let exp = match model {
        FadingModel::Rayleigh { mean_snr } => {
            Some(Exp::new(1.0 / mean_snr).map_err(|e| BrqError::invalid(e.to_string()))?)
        }
        _ => None,
    };
    sample_snr_inner(model, rng, cursor, exp.as_ref())
}

fn sample_snr_inner<R: Rng>(
    model: &FadingModel,
    rng: &mut R,
    cursor: &mut usize,
    exp: Option<&Exp<f64>>,
) -> Result<f64> {
    let g = match model {
        FadingModel::Rayleigh { .. } => exp.expect("exponential sampler").sample(rng),
        FadingModel::Deterministic { snr } => *snr,
        FadingModel::EmpiricalTrace(trace) => {
            let g = *trace
                .get(*cursor)
                .ok_or(BrqError::TraceExhausted(trace.len()))?;
            g
        }
    };
    *cursor += 1;
    Ok(g)
}

/// How bits are counted inside a slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Accounting {
    /// Real-valued bit counts (the large-N limit).
    #[default]
    Fluid,
    /// Whole bits; parity is rounded up.
    Integer,
}

/// Delayed feedback available to the transmitter after each slot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum FeedbackMode {
    /// The exact SNR of every slot.
    FullCsit,
    /// `bits` feedback bits per slot, pooled over blocks of `block_len` slots.
    Quantized { bits: f64, block_len: usize },
}

/// Link-level parameters shared by the analytic and simulated paths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkConfig {
    /// Codebook rate in bits per channel use.
    pub rate: f64,
    /// Channel uses per slot.
    pub slot_len: u32,
    pub feedback: FeedbackMode,
    pub accounting: Accounting,
}

impl LinkConfig {
    pub fn new(rate: f64, slot_len: u32) -> Result<Self> {
        let c = LinkConfig {
            rate,
            slot_len,
            feedback: FeedbackMode::FullCsit,
            accounting: Accounting::Fluid,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn with_feedback(mut self, feedback: FeedbackMode) -> Result<Self> {
        self.feedback = feedback;
        self.validate()?;
        Ok(self)
    }

    pub fn with_accounting(mut self, accounting: Accounting) -> Result<Self> {
        self.accounting = accounting;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rate > 0.0 && self.rate.is_finite()) {
            return Err(BrqError::invalid(format!(
                "rate must be > 0, got {}",
                self.rate
            )));
        }
        if self.slot_len == 0 {
            return Err(BrqError::invalid("slot length must be >= 1 channel use"));
        }
        if let FeedbackMode::Quantized { bits, block_len } = self.feedback {
            if !(bits >= 0.0 && bits.is_finite()) {
                return Err(BrqError::invalid(format!(
                    "feedback bits must be >= 0, got {bits}"
                )));
            }
            if block_len < 2 {
                return Err(BrqError::invalid(format!(
                    "block length must be >= 2, got {block_len}"
                )));
            }
        }
        if self.accounting == Accounting::Integer {
            let b = self.bits_per_packet_exact();
            if (b - b.round()).abs() > 1e-9 {
                return Err(BrqError::invalid(format!(
                    "integer accounting needs a whole number of bits per packet, N*R = {b}"
                )));
            }
        }
        Ok(())
    }

    /// Decoding threshold `2^R - 1`, always recomputed from the rate.
    pub fn threshold_snr(&self) -> f64 {
        (self.rate * std::f64::consts::LN_2).exp_m1()
    }

    fn bits_per_packet_exact(&self) -> f64 {
        self.slot_len as f64 * self.rate
    }

    /// Bits `N*R` carried by every packet.
    pub fn bits_per_packet(&self) -> f64 {
        match self.accounting {
            Accounting::Fluid => self.bits_per_packet_exact(),
            Accounting::Integer => self.bits_per_packet_exact().round(),
        }
    }

    /// True when `snr` is enough to decode a rate-R packet on its own.
    ///
    /// Decided on the SNR threshold so full feedback and the receiver agree
    /// on slot outcomes bit-for-bit.
    pub fn decodable(&self, snr: f64) -> bool {
        snr >= self.threshold_snr()
    }
}
