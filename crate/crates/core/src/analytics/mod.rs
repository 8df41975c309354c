//! Closed-form performance of BRQ and its reference schemes.
//!
//! Every expectation over a Rayleigh SNR is computed by adaptive quadrature
//! in the normalized variable `u = snr / mean`, cut where the exponential
//! density underflows. Tail probabilities use the closed form `exp(-x/mean)`.
//! Deterministic and trace models are handled as discrete distributions.

pub mod quadrature;

use serde::{Deserialize, Serialize};

use crate::channel::{cap, capacity, inv_capacity, FadingModel};
use crate::{BrqError, Result};

pub use quadrature::QuadratureSpec;

/// `exp(-u)` is below the smallest subnormal past this many means.
const TAIL_CUT: f64 = 745.0;

/// Curve family a [`RatePoint`] belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Scheme {
    BrqFull,
    BrqQuantized { feedback_bits: f64 },
    PriorFixedPower,
    Waterfilling,
    RLimited,
}

/// One point of an average-rate curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatePoint {
    pub mean_snr: f64,
    pub rate: f64,
    pub scheme: Scheme,
    /// Average rate in bits per channel use.
    pub value: f64,
}

/// Expectation of `f(snr)` restricted to `lo <= snr < hi`.
///
/// `kinks` are interior points where `f` is not smooth.
fn expect_on<F: Fn(f64) -> f64>(
    model: &FadingModel,
    f: F,
    lo: f64,
    hi: f64,
    kinks: &[f64],
    quad: &QuadratureSpec,
) -> Result<f64> {
    model.validate()?;
    if !(hi > lo) {
        return Ok(0.0);
    }
    match model {
        FadingModel::Rayleigh { mean_snr } => {
            let m = *mean_snr;
            let u_lo = lo / m;
            let u_hi = (hi / m).min(TAIL_CUT);
            if u_hi <= u_lo {
                return Ok(0.0);
            }
            let mut pts = vec![u_lo];
            let mut edge = 1.0;
            while edge < u_hi {
                if edge > u_lo {
                    pts.push(edge);
                }
                edge *= 2.0;
            }
            pts.extend(
                kinks
                    .iter()
                    .map(|k| k / m)
                    .filter(|u| *u > u_lo && *u < u_hi),
            );
            pts.push(u_hi);
            pts.sort_by(f64::total_cmp);
            pts.dedup();
            quadrature::integrate_pieces(|u| f(m * u) * (-u).exp(), &pts, quad)
        }
        FadingModel::Deterministic { snr } => Ok(if *snr >= lo && *snr < hi {
            f(*snr)
        } else {
            0.0
        }),
        FadingModel::EmpiricalTrace(trace) => {
            let s: f64 = trace
                .iter()
                .filter(|g| **g >= lo && **g < hi)
                .map(|g| f(*g))
                .sum();
            Ok(s / trace.len() as f64)
        }
    }
}

fn check_rate(rate: f64) -> Result<f64> {
    if !(rate >= 0.0) || rate.is_nan() {
        return Err(BrqError::invalid(format!("rate must be >= 0, got {rate}")));
    }
    inv_capacity(rate)
}

/// Average BRQ rate with full delayed CSIT:
/// `E[C(snr); snr < snr_R] + R * p_R`.
pub fn avg_rate_full_csit(model: &FadingModel, rate: f64, quad: &QuadratureSpec) -> Result<f64> {
    avg_rate_with_distortion(model, rate, 0.0, quad)
}

/// Average rate of the rate-limited reference that knows the SNR up front and
/// transmits at `min(C(snr), R)`. Computed as a single expectation of the
/// clipped capacity, independently of [`avg_rate_full_csit`].
pub fn avg_rate_r_limited(model: &FadingModel, rate: f64, quad: &QuadratureSpec) -> Result<f64> {
    let thr = check_rate(rate)?;
    if rate == 0.0 {
        return Ok(0.0);
    }
    expect_on(
        model,
        |g| cap(g).min(rate),
        0.0,
        f64::INFINITY,
        &[thr],
        quad,
    )
}

/// Ergodic capacity `E[C(snr)]` at unit power without adaptation.
pub fn avg_rate_prior_fixed_power(model: &FadingModel, quad: &QuadratureSpec) -> Result<f64> {
    expect_on(model, cap, 0.0, f64::INFINITY, &[], quad)
}

/// Average power spent by water-filling with cutoff `level`:
/// `E[(1/level - 1/snr)^+]`.
fn waterfilling_power(model: &FadingModel, level: f64, quad: &QuadratureSpec) -> Result<f64> {
    expect_on(
        model,
        |g| (1.0 / level - 1.0 / g).max(0.0),
        level,
        f64::INFINITY,
        &[],
        quad,
    )
}

/// Solves the water-filling cutoff for an average power budget.
///
/// Power is `(1/level - 1/snr)^+`. The bracket is bisected until it
/// collapses, so the level is as accurate as the power integral.
pub fn waterfilling_level(
    model: &FadingModel,
    power_budget: f64,
    quad: &QuadratureSpec,
) -> Result<f64> {
    if !(power_budget > 0.0 && power_budget.is_finite()) {
        return Err(BrqError::invalid(format!(
            "power budget must be > 0, got {power_budget}"
        )));
    }
    let eps = 1e-12;
    let mut lo = eps;
    let mut hi = 1.0 / eps;
    let excess = |l: f64| waterfilling_power(model, l, quad).map(|p| p - power_budget);
    let mut expansions = 0;
    while excess(lo)? < 0.0 {
        lo *= 1e-3;
        expansions += 1;
        if expansions > 20 || lo == 0.0 {
            return Err(BrqError::BisectionFailure(
                "no positive power at any water level (all SNR mass at zero?)".into(),
            ));
        }
    }
    expansions = 0;
    while excess(hi)? > 0.0 {
        hi *= 1e3;
        expansions += 1;
        if expansions > 20 || !hi.is_finite() {
            return Err(BrqError::BisectionFailure(
                "could not bracket the water level".into(),
            ));
        }
    }
    // Geometric bisection: the level spans many decades.
    for _ in 0..400 {
        let mid = (lo * hi).sqrt();
        let e = excess(mid)?;
        if e == 0.0 || hi / lo - 1.0 < 1e-15 {
            return Ok(mid);
        }
        if e > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(BrqError::BisectionFailure(
        "water level bisection did not converge".into(),
    ))
}

/// Average rate with prior CSIT and water-filling power control.
pub fn waterfilling_rate(
    model: &FadingModel,
    power_budget: f64,
    quad: &QuadratureSpec,
) -> Result<f64> {
    model.validate()?;
    let all_zero = match model {
        FadingModel::Rayleigh { .. } => false,
        FadingModel::Deterministic { snr } => *snr == 0.0,
        FadingModel::EmpiricalTrace(t) => t.iter().all(|g| *g == 0.0),
    };
    if all_zero {
        if !(power_budget > 0.0) {
            return Err(BrqError::invalid("power budget must be > 0"));
        }
        return Ok(0.0);
    }
    let level = waterfilling_level(model, power_budget, quad)?;
    expect_on(
        model,
        |g| (g / level).log2().max(0.0),
        level,
        f64::INFINITY,
        &[],
        quad,
    )
}

/// Mean delay in slots of a new bit: the number of failed slots before the
/// first decodable one, a geometric law with mean `(1 - p)/p`.
pub fn delay_from_decode_prob(p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(BrqError::invalid(format!("probability out of range: {p}")));
    }
    if p == 0.0 {
        return Err(BrqError::InfiniteDelay);
    }
    Ok((1.0 - p) / p)
}

pub fn avg_delay_slots(model: &FadingModel, rate: f64) -> Result<f64> {
    let thr = check_rate(rate)?;
    delay_from_decode_prob(model.decode_prob(thr)?)
}

/// Channel uses `(N, M)` of the variable-length IR example: a first phase of
/// `N` uses at rate R, then `M = N (R - C)/C` uses carrying the parity at C.
/// `M` is infinite when the channel carries nothing.
pub fn two_phase_channel_uses(rate: f64, snr: f64, slot_len: f64) -> Result<(f64, f64)> {
    let c = capacity(snr)?;
    if !(rate > 0.0) {
        return Err(BrqError::invalid(format!("rate must be > 0, got {rate}")));
    }
    if c >= rate {
        return Ok((slot_len, 0.0));
    }
    if c == 0.0 {
        return Ok((slot_len, f64::INFINITY));
    }
    Ok((slot_len, slot_len * (rate - c) / c))
}

/// Equivalent rate `min(R, C(snr))` of incremental redundancy when the SNR
/// holds over both phases.
pub fn two_phase_ir_rate(rate: f64, snr: f64) -> Result<f64> {
    let c = capacity(snr)?;
    if !(rate > 0.0) {
        return Err(BrqError::invalid(format!("rate must be > 0, got {rate}")));
    }
    Ok(rate.min(c))
}

/// Rate `(R + C(g1) + C(g2)) / 3` of the three-slot backtrack example where
/// the first two slots are in outage.
pub fn three_slot_example_rate(rate: f64, snr1: f64, snr2: f64) -> Result<f64> {
    let (c1, c2) = (capacity(snr1)?, capacity(snr2)?);
    if !(c1 < rate && c2 < rate) {
        return Err(BrqError::invalid(
            "both leading slots must be in outage (C(snr) < R)",
        ));
    }
    Ok((rate + c1 + c2) / 3.0)
}

/// Binary entropy in bits.
pub fn binary_entropy(p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(BrqError::invalid(format!("probability out of range: {p}")));
    }
    if p == 0.0 || p == 1.0 {
        return Ok(0.0);
    }
    Ok(-p * p.log2() - (1.0 - p) * (1.0 - p).log2())
}

/// Upper bound `mean * 2^-(F - H(p_R))` on the achievable distortion when
/// `F - H(p_R)` bits per slot quantize an exponential SNR.
pub fn distortion_bound(feedback_bits: f64, decode_prob: f64, mean_snr: f64) -> Result<f64> {
    let h = binary_entropy(decode_prob)?;
    if !(mean_snr > 0.0) {
        return Err(BrqError::invalid(format!(
            "mean SNR must be > 0, got {mean_snr}"
        )));
    }
    if !(feedback_bits > h) {
        return Err(BrqError::InsufficientFeedback {
            feedback_bits,
            entropy: h,
        });
    }
    Ok(mean_snr * (-(feedback_bits - h)).exp2())
}

/// Average BRQ rate when the transmitter only learns a lower bound
/// `(snr - d)^+` on every outage SNR.
pub fn avg_rate_with_distortion(
    model: &FadingModel,
    rate: f64,
    distortion: f64,
    quad: &QuadratureSpec,
) -> Result<f64> {
    let thr = check_rate(rate)?;
    if !(distortion >= 0.0) {
        return Err(BrqError::invalid(format!(
            "distortion must be >= 0, got {distortion}"
        )));
    }
    let p = model.decode_prob(thr)?;
    let outage = expect_on(
        model,
        |g| cap(g - distortion),
        distortion.min(thr),
        thr,
        &[],
        quad,
    )?;
    Ok(outage + rate * p)
}

/// Average BRQ rate with `F` feedback bits per slot, with the distortion set
/// by [`distortion_bound`]. Only defined for Rayleigh fading.
pub fn avg_rate_quantized(
    model: &FadingModel,
    rate: f64,
    feedback_bits: f64,
    quad: &QuadratureSpec,
) -> Result<f64> {
    let mean = match model {
        FadingModel::Rayleigh { mean_snr } => *mean_snr,
        _ => {
            return Err(BrqError::UnsupportedModel(
                "distortion law needs Rayleigh fading",
            ))
        }
    };
    let thr = check_rate(rate)?;
    let p = model.decode_prob(thr)?;
    let d = distortion_bound(feedback_bits, p, mean)?;
    avg_rate_with_distortion(model, rate, d, quad)
}

/// Evaluates one scheme's analytic average rate.
pub fn rate_point(
    model: &FadingModel,
    rate: f64,
    scheme: Scheme,
    quad: &QuadratureSpec,
) -> Result<RatePoint> {
    let value = match scheme {
        Scheme::BrqFull => avg_rate_full_csit(model, rate, quad)?,
        Scheme::BrqQuantized { feedback_bits } => {
            avg_rate_quantized(model, rate, feedback_bits, quad)?
        }
        Scheme::PriorFixedPower => avg_rate_prior_fixed_power(model, quad)?,
        Scheme::Waterfilling => waterfilling_rate(model, 1.0, quad)?,
        Scheme::RLimited => avg_rate_r_limited(model, rate, quad)?,
    };
    Ok(RatePoint {
        mean_snr: model.mean_snr(),
        rate,
        scheme,
        value,
    })
}
