//! Browser bindings for the BRQ rate calculator and a small simulator.
//!
//! Every export returns a JSON string; errors surface as JS exceptions.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use brq_core::analytics::{
    avg_rate_full_csit, avg_rate_prior_fixed_power, avg_rate_quantized, waterfilling_rate,
    QuadratureSpec,
};
use brq_core::channel::{capacity, db_to_linear, FadingModel, FeedbackMode, LinkConfig};
use brq_core::engine::{replication_rng, sweep_threshold_ratio};
use brq_core::protocol::{run_session, SessionOptions};
use brq_core::BrqError;
use serde::Serialize;
use wasm_bindgen::prelude::*;

const MAX_POINTS: usize = 2000;
const MAX_SLOTS: u32 = 200_000;

fn grid(start: f64, stop: f64, step: f64) -> Result<Vec<f64>, String> {
    if !(step > 0.0) || !(stop >= start) || !start.is_finite() || !stop.is_finite() {
        return Err("grid needs finite start <= stop and step > 0".into());
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    if n >= MAX_POINTS {
        return Err(format!("grid has more than {MAX_POINTS} points"));
    }
    Ok((0..=n).map(|i| start + i as f64 * step).collect())
}

fn quantized(model: &FadingModel, rate: f64, f: f64) -> Result<Option<f64>, BrqError> {
    match avg_rate_quantized(model, rate, f, &QuadratureSpec::default()) {
        Ok(v) => Ok(Some(v)),
        Err(BrqError::InsufficientFeedback { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

#[derive(Serialize)]
struct RateCurves {
    mean_snr_db: Vec<f64>,
    rate: Vec<f64>,
    waterfilling: Vec<f64>,
    prior_fixed: Vec<f64>,
    brq_full: Vec<f64>,
    brq_quantized: Vec<Option<f64>>,
}

pub fn rate_curves_json(
    db_start: f64,
    db_stop: f64,
    db_step: f64,
    rate_factor: f64,
    feedback_bits: f64,
) -> Result<String, String> {
    if !(rate_factor > 0.0) {
        return Err("rate factor must be > 0".into());
    }
    let q = QuadratureSpec::default();
    let dbs = grid(db_start, db_stop, db_step)?;
    let mut out = RateCurves {
        mean_snr_db: dbs.clone(),
        rate: Vec::new(),
        waterfilling: Vec::new(),
        prior_fixed: Vec::new(),
        brq_full: Vec::new(),
        brq_quantized: Vec::new(),
    };
    for db in dbs {
        let g = db_to_linear(db);
        let m = FadingModel::rayleigh(g).map_err(|e| e.to_string())?;
        let r = (1.0 + rate_factor * g).log2();
        let eval = || -> Result<_, BrqError> {
            Ok((
                waterfilling_rate(&m, 1.0, &q)?,
                avg_rate_prior_fixed_power(&m, &q)?,
                avg_rate_full_csit(&m, r, &q)?,
                quantized(&m, r, feedback_bits)?,
            ))
        };
        let (wf, prior, full, quant) = eval().map_err(|e| e.to_string())?;
        out.rate.push(r);
        out.waterfilling.push(wf);
        out.prior_fixed.push(prior);
        out.brq_full.push(full);
        out.brq_quantized.push(quant);
    }
    serde_json::to_string(&out).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct QuantizedSeries {
    feedback_bits: f64,
    values: Vec<Option<f64>>,
}

#[derive(Serialize)]
struct ThresholdSweep {
    ratio: Vec<f64>,
    brq_full: Vec<f64>,
    quantized: Vec<QuantizedSeries>,
}

pub fn threshold_sweep_json(
    mean_snr_db: f64,
    ratio_stop: f64,
    ratio_step: f64,
    feedback_bits: &[f64],
) -> Result<String, String> {
    let ratios = grid(0.0, ratio_stop, ratio_step)?;
    let rows = sweep_threshold_ratio(
        db_to_linear(mean_snr_db),
        &ratios,
        feedback_bits,
        &QuadratureSpec::default(),
    )
    .map_err(|e| e.to_string())?;
    let out = ThresholdSweep {
        ratio: ratios,
        brq_full: rows.iter().map(|r| r.brq_full).collect(),
        quantized: feedback_bits
            .iter()
            .enumerate()
            .map(|(i, f)| QuantizedSeries {
                feedback_bits: *f,
                values: rows.iter().map(|r| r.brq_quantized[i].1).collect(),
            })
            .collect(),
    };
    serde_json::to_string(&out).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct SimulationTrace {
    rate: f64,
    slot_len: u32,
    delivered_rate: f64,
    analytic_full: f64,
    analytic_quantized: Option<f64>,
    renewals: usize,
    undelivered_bits: f64,
    integrity_ok: bool,
    snr: Vec<f64>,
    renewal: Vec<bool>,
    /// Bits credited by renewals up to each slot.
    cumulative_brq: Vec<f64>,
    /// Cumulative `N min(C, R)`, the prior-CSIT reference on the same trace.
    cumulative_limited: Vec<f64>,
}

/// `feedback_bits <= 0` runs with full CSIT.
pub fn simulate_trace_json(
    mean_snr_db: f64,
    rate_factor: f64,
    slots: u32,
    seed: u32,
    feedback_bits: f64,
    block_len: u32,
) -> Result<String, String> {
    if slots == 0 || slots > MAX_SLOTS {
        return Err(format!("slots must be in 1..={MAX_SLOTS}"));
    }
    if !(rate_factor > 0.0) {
        return Err("rate factor must be > 0".into());
    }
    let err = |e: BrqError| e.to_string();
    let g = db_to_linear(mean_snr_db);
    let model = FadingModel::rayleigh(g).map_err(err)?;
    let rate = (1.0 + rate_factor * g).log2();
    let n = 100;
    let mut link = LinkConfig::new(rate, n).map_err(err)?;
    let mut horizon = slots as u64;
    if feedback_bits > 0.0 {
        let l = block_len as usize;
        link = link
            .with_feedback(FeedbackMode::Quantized {
                bits: feedback_bits,
                block_len: l,
            })
            .map_err(err)?;
        horizon = horizon.div_ceil(2 * l as u64) * 2 * l as u64;
    }
    let opts = SessionOptions {
        record_slots: true,
        ..Default::default()
    };
    let log = run_session(
        &link,
        &model,
        horizon,
        replication_rng(seed as u64, 0),
        opts,
    )
    .map_err(err)?;

    let mut snr = Vec::with_capacity(log.slots.len());
    let mut renewal = Vec::with_capacity(log.slots.len());
    let mut cumulative_brq = Vec::with_capacity(log.slots.len());
    let mut cumulative_limited = Vec::with_capacity(log.slots.len());
    let (mut brq, mut limited) = (0.0, 0.0);
    for s in &log.slots {
        brq += s.reward;
        limited += n as f64 * capacity(s.snr).map_err(err)?.min(rate);
        snr.push(s.snr);
        renewal.push(s.renewal);
        cumulative_brq.push(brq);
        cumulative_limited.push(limited);
    }
    let out = SimulationTrace {
        rate,
        slot_len: n,
        delivered_rate: log.delivered_rate(),
        analytic_full: avg_rate_full_csit(&model, rate, &QuadratureSpec::default()).map_err(err)?,
        analytic_quantized: if feedback_bits > 0.0 {
            quantized(&model, rate, feedback_bits).map_err(err)?
        } else {
            None
        },
        renewals: log.renewals.len(),
        undelivered_bits: log.undelivered_bits,
        integrity_ok: log.integrity_ok,
        snr,
        renewal,
        cumulative_brq,
        cumulative_limited,
    };
    serde_json::to_string(&out).map_err(|e| e.to_string())
}

/// Analytic rates against mean SNR in dB at `R = log2(1 + k mean_snr)`.
#[wasm_bindgen(js_name = rateCurves)]
pub fn rate_curves(
    db_start: f64,
    db_stop: f64,
    db_step: f64,
    rate_factor: f64,
    feedback_bits: f64,
) -> Result<String, JsError> {
    rate_curves_json(db_start, db_stop, db_step, rate_factor, feedback_bits)
        .map_err(|e| JsError::new(&e))
}

/// Absolute rates at a fixed mean SNR against the threshold-to-mean ratio.
#[wasm_bindgen(js_name = thresholdSweep)]
pub fn threshold_sweep(
    mean_snr_db: f64,
    ratio_stop: f64,
    ratio_step: f64,
    feedback_bits: Vec<f64>,
) -> Result<String, JsError> {
    threshold_sweep_json(mean_snr_db, ratio_stop, ratio_step, &feedback_bits)
        .map_err(|e| JsError::new(&e))
}

/// One seeded session with per-slot records.
#[wasm_bindgen(js_name = simulateTrace)]
pub fn simulate_trace(
    mean_snr_db: f64,
    rate_factor: f64,
    slots: u32,
    seed: u32,
    feedback_bits: f64,
    block_len: u32,
) -> Result<String, JsError> {
    simulate_trace_json(
        mean_snr_db,
        rate_factor,
        slots,
        seed,
        feedback_bits,
        block_len,
    )
    .map_err(|e| JsError::new(&e))
}
