//! Seeded Monte Carlo replications, summary statistics and the parameter
//! sweeps behind the rate-vs-SNR and rate-vs-threshold tables.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::analytics::{
    avg_rate_full_csit, avg_rate_prior_fixed_power, avg_rate_quantized, waterfilling_rate,
    QuadratureSpec, RatePoint, Scheme,
};
use crate::channel::{db_to_linear, inv_capacity, FadingModel, FeedbackMode, LinkConfig};
use crate::protocol::{run_session, SessionLog, SessionOptions};
use crate::{BrqError, Result};

/// Two-sided 95% normal quantile.
const Z95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub seed: u64,
    pub replications: usize,
    /// Slots per replication.
    pub horizon: u64,
    pub include_warmup: bool,
    /// Carry real payload bits (integer accounting only).
    pub carry_payload: bool,
}

impl RunConfig {
    pub fn new(seed: u64, replications: usize, horizon: u64) -> Self {
        RunConfig {
            seed,
            replications,
            horizon,
            include_warmup: false,
            carry_payload: false,
        }
    }

    pub fn validate(&self, link: &LinkConfig) -> Result<()> {
        if self.replications == 0 {
            return Err(BrqError::invalid("replications must be >= 1"));
        }
        if self.horizon == 0 {
            return Err(BrqError::invalid("horizon must be >= 1 slot"));
        }
        if let FeedbackMode::Quantized { block_len, .. } = link.feedback {
            if !self.horizon.is_multiple_of(2 * block_len as u64) {
                return Err(BrqError::invalid(format!(
                    "horizon {} must be a multiple of 2L = {}",
                    self.horizon,
                    2 * block_len
                )));
            }
        }
        Ok(())
    }
}

/// SplitMix64 finalizer.
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of substream `index` of `seed`.
pub fn substream_seed(seed: u64, index: u64) -> u64 {
    mix64(mix64(seed) ^ mix64(index.wrapping_add(0x632b_e59b_d9b4_e019)))
}

pub fn replication_rng(seed: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(substream_seed(seed, index))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
}

/// Aggregate over replications. Confidence half-widths use the normal
/// approximation on replication means.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsSummary {
    pub replications: usize,
    pub rate_mean: f64,
    pub rate_half_width: f64,
    pub delay_mean: f64,
    pub delay_half_width: f64,
    /// Delivered bits by delay in slots (index = delay).
    pub delay_histogram: Vec<f64>,
    pub renewals: u64,
    pub delivered_bits: f64,
    pub undelivered_bits: f64,
    pub integrity: Verdict,
    pub replication_rates: Vec<f64>,
}

/// Per-replication reduction of a [`SessionLog`].
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationStats {
    pub rate: f64,
    pub mean_delay: f64,
    pub delay_histogram: Vec<f64>,
    pub renewals: u64,
    pub delivered_bits: f64,
    pub undelivered_bits: f64,
    pub integrity_ok: bool,
}

impl ReplicationStats {
    pub fn from_log(log: &SessionLog) -> Self {
        let mut hist: Vec<f64> = Vec::new();
        for r in log.renewals.iter().filter(|r| r.slot >= log.warmup) {
            for (bits, d) in &r.delays {
                let d = *d as usize;
                if hist.len() <= d {
                    hist.resize(d + 1, 0.0);
                }
                hist[d] += bits;
            }
        }
        ReplicationStats {
            rate: log.delivered_rate(),
            mean_delay: log.mean_delay(),
            delay_histogram: hist,
            renewals: log.renewals.len() as u64,
            delivered_bits: log.delivered_bits,
            undelivered_bits: log.undelivered_bits,
            integrity_ok: log.integrity_ok,
        }
    }
}

fn mean_and_half_width(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, Z95 * (var / n as f64).sqrt())
}

/// Combines replications in index order.
pub fn summarize(reps: &[ReplicationStats]) -> StatsSummary {
    let rates: Vec<f64> = reps.iter().map(|r| r.rate).collect();
    let delays: Vec<f64> = reps
        .iter()
        .map(|r| r.mean_delay)
        .filter(|d| d.is_finite())
        .collect();
    let (rate_mean, rate_half_width) = mean_and_half_width(&rates);
    let (delay_mean, delay_half_width) = mean_and_half_width(&delays);
    let mut hist: Vec<f64> = Vec::new();
    for r in reps {
        if hist.len() < r.delay_histogram.len() {
            hist.resize(r.delay_histogram.len(), 0.0);
        }
        for (h, v) in hist.iter_mut().zip(&r.delay_histogram) {
            *h += v;
        }
    }
    StatsSummary {
        replications: reps.len(),
        rate_mean,
        rate_half_width,
        delay_mean,
        delay_half_width,
        delay_histogram: hist,
        renewals: reps.iter().map(|r| r.renewals).sum(),
        delivered_bits: reps.iter().map(|r| r.delivered_bits).sum(),
        undelivered_bits: reps.iter().map(|r| r.undelivered_bits).sum(),
        integrity: if reps.iter().all(|r| r.integrity_ok) {
            Verdict::Pass
        } else {
            Verdict::Fail
        },
        replication_rates: rates,
    }
}

/// Runs replication `index` of `run` and returns its full log.
pub fn run_replication(
    run: &RunConfig,
    link: &LinkConfig,
    model: &FadingModel,
    index: usize,
    record_slots: bool,
) -> Result<SessionLog> {
    let opts = SessionOptions {
        record_slots,
        include_warmup: run.include_warmup,
        payload_seed: run
            .carry_payload
            .then(|| substream_seed(run.seed ^ 0x0050_4159_4c4f_4144, index as u64)),
    };
    run_session(
        link,
        model,
        run.horizon,
        replication_rng(run.seed, index as u64),
        opts,
    )
    .map_err(|e| BrqError::InReplication {
        index,
        source: Box::new(e),
    })
}

fn replicate(
    run: &RunConfig,
    link: &LinkConfig,
    model: &FadingModel,
) -> Result<Vec<ReplicationStats>> {
    let one = |i: usize| {
        run_replication(run, link, model, i, false).map(|log| ReplicationStats::from_log(&log))
    };
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..run.replications).into_par_iter().map(one).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..run.replications).map(one).collect()
    }
}

/// Runs independent replications (in parallel when enabled) and aggregates
/// them. The result depends only on the configuration, not on scheduling.
pub fn run_replicated(
    run: &RunConfig,
    link: &LinkConfig,
    model: &FadingModel,
) -> Result<StatsSummary> {
    link.validate()?;
    run.validate(link)?;
    Ok(summarize(&replicate(run, link, model)?))
}

/// Simulation settings for sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimSettings {
    pub seed: u64,
    pub replications: usize,
    pub horizon: u64,
    pub slot_len: u32,
    pub block_len: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub half_width: f64,
}

/// Columns of one rate factor `k` (`R = log2(1 + k mean_snr)`) in a
/// mean-SNR sweep row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateColumns {
    pub rate_factor: f64,
    pub rate: f64,
    pub decode_prob: f64,
    pub brq_full: f64,
    /// `(F, rate)`; `None` when `F` does not exceed the mask entropy.
    pub brq_quantized: Vec<(f64, Option<f64>)>,
    pub sim_full: Option<Estimate>,
    pub sim_quantized: Vec<(f64, Option<Estimate>)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnrSweepRow {
    pub mean_snr_db: f64,
    pub mean_snr: f64,
    pub waterfilling: f64,
    pub prior_fixed: f64,
    pub by_rate: Vec<RateColumns>,
}

impl SnrSweepRow {
    /// Flattens the row into rate points.
    pub fn points(&self) -> Vec<RatePoint> {
        let mut out = vec![
            RatePoint {
                mean_snr: self.mean_snr,
                rate: f64::INFINITY,
                scheme: Scheme::Waterfilling,
                value: self.waterfilling,
            },
            RatePoint {
                mean_snr: self.mean_snr,
                rate: f64::INFINITY,
                scheme: Scheme::PriorFixedPower,
                value: self.prior_fixed,
            },
        ];
        for c in &self.by_rate {
            out.push(RatePoint {
                mean_snr: self.mean_snr,
                rate: c.rate,
                scheme: Scheme::BrqFull,
                value: c.brq_full,
            });
            for (f, v) in &c.brq_quantized {
                if let Some(v) = v {
                    out.push(RatePoint {
                        mean_snr: self.mean_snr,
                        rate: c.rate,
                        scheme: Scheme::BrqQuantized { feedback_bits: *f },
                        value: *v,
                    });
                }
            }
        }
        out
    }
}

fn optional_quantized(
    model: &FadingModel,
    rate: f64,
    f: f64,
    quad: &QuadratureSpec,
) -> Result<Option<f64>> {
    match avg_rate_quantized(model, rate, f, quad) {
        Ok(v) => Ok(Some(v)),
        Err(BrqError::InsufficientFeedback { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

fn simulate_point(
    sim: &SimSettings,
    model: &FadingModel,
    rate: f64,
    feedback: FeedbackMode,
    stream: u64,
) -> Result<Option<Estimate>> {
    let mut link = LinkConfig::new(rate, sim.slot_len)?.with_feedback(feedback)?;
    link.validate()?;
    let mut horizon = sim.horizon;
    if let FeedbackMode::Quantized { block_len, .. } = feedback {
        let period = 2 * block_len as u64;
        horizon = horizon.div_ceil(period) * period;
    }
    let run = RunConfig::new(substream_seed(sim.seed, stream), sim.replications, horizon);
    link = link.with_accounting(crate::channel::Accounting::Fluid)?;
    match run_replicated(&run, &link, model) {
        Ok(s) => Ok(Some(Estimate {
            mean: s.rate_mean,
            half_width: s.rate_half_width,
        })),
        Err(e) if matches!(e.root(), BrqError::InsufficientFeedback { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Rates over a grid of mean SNRs (dB), Rayleigh fading, for each rate
/// factor `k` and each feedback budget. Optionally adds simulated rates.
pub fn sweep_mean_snr(
    grid_db: &[f64],
    rate_factors: &[f64],
    feedback_bits: &[f64],
    sim: Option<&SimSettings>,
    quad: &QuadratureSpec,
) -> Result<Vec<SnrSweepRow>> {
    if grid_db.is_empty() {
        return Err(BrqError::invalid("SNR grid is empty"));
    }
    if let Some(k) = rate_factors.iter().find(|k| !(**k > 0.0)) {
        return Err(BrqError::invalid(format!(
            "rate factor must be > 0, got {k}"
        )));
    }
    let mut rows = Vec::with_capacity(grid_db.len());
    let mut stream = 0u64;
    for db in grid_db {
        let g = db_to_linear(*db);
        let model = FadingModel::rayleigh(g)?;
        let waterfilling = waterfilling_rate(&model, 1.0, quad)?;
        let prior_fixed = avg_rate_prior_fixed_power(&model, quad)?;
        let mut by_rate = Vec::with_capacity(rate_factors.len());
        for k in rate_factors {
            let rate = (1.0 + k * g).log2();
            let decode_prob = model.decode_prob(inv_capacity(rate)?)?;
            let brq_full = avg_rate_full_csit(&model, rate, quad)?;
            let brq_quantized = feedback_bits
                .iter()
                .map(|f| optional_quantized(&model, rate, *f, quad).map(|v| (*f, v)))
                .collect::<Result<Vec<_>>>()?;
            let (mut sim_full, mut sim_quantized) = (None, Vec::new());
            if let Some(sim) = sim {
                sim_full = simulate_point(sim, &model, rate, FeedbackMode::FullCsit, stream)?;
                stream += 1;
                for f in feedback_bits {
                    let fb = FeedbackMode::Quantized {
                        bits: *f,
                        block_len: sim.block_len,
                    };
                    sim_quantized.push((*f, simulate_point(sim, &model, rate, fb, stream)?));
                    stream += 1;
                }
            }
            by_rate.push(RateColumns {
                rate_factor: *k,
                rate,
                decode_prob,
                brq_full,
                brq_quantized,
                sim_full,
                sim_quantized,
            });
        }
        rows.push(SnrSweepRow {
            mean_snr_db: *db,
            mean_snr: g,
            waterfilling,
            prior_fixed,
            by_rate,
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioSweepRow {
    /// Threshold-to-mean ratio `snr_R / mean_snr`.
    pub ratio: f64,
    pub rate: f64,
    pub decode_prob: f64,
    pub brq_full: f64,
    pub brq_quantized: Vec<(f64, Option<f64>)>,
}

/// Absolute rates at a fixed mean SNR as the decoding threshold moves:
/// `R = log2(1 + ratio * mean_snr)`.
pub fn sweep_threshold_ratio(
    mean_snr: f64,
    ratios: &[f64],
    feedback_bits: &[f64],
    quad: &QuadratureSpec,
) -> Result<Vec<RatioSweepRow>> {
    let model = FadingModel::rayleigh(mean_snr)?;
    if ratios.is_empty() {
        return Err(BrqError::invalid("ratio grid is empty"));
    }
    ratios
        .iter()
        .map(|ratio| {
            if !(*ratio >= 0.0) {
                return Err(BrqError::invalid(format!(
                    "ratio must be >= 0, got {ratio}"
                )));
            }
            let rate = (1.0 + ratio * mean_snr).log2();
            Ok(RatioSweepRow {
                ratio: *ratio,
                rate,
                decode_prob: model.decode_prob(ratio * mean_snr)?,
                brq_full: avg_rate_full_csit(&model, rate, quad)?,
                brq_quantized: feedback_bits
                    .iter()
                    .map(|f| optional_quantized(&model, rate, *f, quad).map(|v| (*f, v)))
                    .collect::<Result<Vec<_>>>()?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytics::QuadratureSpec;
    use crate::protocol::run_full_csit;

    fn rayleigh10() -> FadingModel {
        FadingModel::rayleigh(10.0).unwrap()
    }

    #[test]
    fn single_replication_matches_session() {
        let link = LinkConfig::new(21f64.log2(), 100).unwrap();
        let run = RunConfig::new(77, 1, 20_000);
        let s = run_replicated(&run, &link, &rayleigh10()).unwrap();
        let log = run_full_csit(
            &link,
            &rayleigh10(),
            20_000,
            replication_rng(77, 0),
            SessionOptions::default(),
        )
        .unwrap();
        assert_eq!(s.rate_mean, log.delivered_rate());
        assert_eq!(s.rate_half_width, 0.0);
        assert_eq!(s.renewals, log.renewals.len() as u64);
    }

    #[test]
    fn deterministic_summary() {
        let link = LinkConfig::new(21f64.log2(), 100).unwrap();
        let run = RunConfig::new(3, 6, 10_000);
        let a = run_replicated(&run, &link, &rayleigh10()).unwrap();
        let b = run_replicated(&run, &link, &rayleigh10()).unwrap();
        assert_eq!(a, b);
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
    }

    #[test]
    fn thread_count_does_not_matter() {
        let link = LinkConfig::new(3.0, 50).unwrap();
        let run = RunConfig::new(5, 8, 5_000);
        let m = FadingModel::rayleigh(4.0).unwrap();
        let one = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        let four = rayon::ThreadPoolBuilder::new()
            .num_threads(4)
            .build()
            .unwrap();
        let a = one.install(|| run_replicated(&run, &link, &m)).unwrap();
        let b = four.install(|| run_replicated(&run, &link, &m)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn substreams_differ() {
        let seeds: std::collections::HashSet<u64> =
            (0..1000).map(|i| substream_seed(1, i)).collect();
        assert_eq!(seeds.len(), 1000);
        assert_ne!(substream_seed(1, 0), substream_seed(2, 0));
    }

    #[test]
    fn ci_covers_quadrature() {
        let r = 21f64.log2();
        let link = LinkConfig::new(r, 100).unwrap();
        // A single 95% interval misses one seed in twenty (seed 2024 does);
        // calibration over seeds is checked below.
        let run = RunConfig::new(1, 20, 100_000);
        let s = run_replicated(&run, &link, &rayleigh10()).unwrap();
        let want = avg_rate_full_csit(&rayleigh10(), r, &QuadratureSpec::default()).unwrap();
        assert!(
            (s.rate_mean - want).abs() <= s.rate_half_width,
            "{} +- {} vs {want}",
            s.rate_mean,
            s.rate_half_width
        );
        assert_eq!(s.integrity, Verdict::Pass);
    }

    #[test]
    fn ci_calibration_over_seeds() {
        let r = 21f64.log2();
        let link = LinkConfig::new(r, 100).unwrap();
        let want = avg_rate_full_csit(&rayleigh10(), r, &QuadratureSpec::default()).unwrap();
        let covered = (0..100)
            .filter(|seed| {
                let s = run_replicated(&RunConfig::new(*seed, 20, 100_000), &link, &rayleigh10())
                    .unwrap();
                (s.rate_mean - want).abs() <= s.rate_half_width
            })
            .count();
        // Short horizons bias the rate low by the open chain at the end
        // (about 17/horizon here), so use the long-horizon configuration.
        assert!(covered >= 90, "covered {covered}/100");
    }

    #[test]
    fn rejects_invalid_runs() {
        let link = LinkConfig::new(2.0, 10).unwrap();
        assert!(run_replicated(&RunConfig::new(0, 0, 10), &link, &rayleigh10()).is_err());
        assert!(run_replicated(&RunConfig::new(0, 1, 0), &link, &rayleigh10()).is_err());
        let q = link
            .with_feedback(FeedbackMode::Quantized {
                bits: 2.0,
                block_len: 4,
            })
            .unwrap();
        assert!(run_replicated(&RunConfig::new(0, 1, 10), &q, &rayleigh10()).is_err());
    }

    #[test]
    fn errors_carry_replication_index() {
        let link = LinkConfig::new(2.0, 10).unwrap();
        let m = FadingModel::empirical_trace(vec![1.0; 5]).unwrap();
        let e = run_replicated(&RunConfig::new(0, 2, 10), &link, &m).unwrap_err();
        assert!(matches!(e, BrqError::InReplication { index: 0, .. }));
        assert!(matches!(e.root(), BrqError::TraceExhausted(5)));
    }

    #[test]
    fn snr_sweep_single_point_and_decode_prob() {
        let q = QuadratureSpec::default();
        let rows = sweep_mean_snr(&[0.0, 10.0, 20.0], &[2.0], &[1.0], None, &q).unwrap();
        for row in &rows {
            let c = &row.by_rate[0];
            assert!((c.decode_prob - (-2f64).exp()).abs() < 1e-12);
            let m = FadingModel::rayleigh(row.mean_snr).unwrap();
            assert_eq!(c.brq_full, avg_rate_full_csit(&m, c.rate, &q).unwrap());
            assert!(row.points().len() >= 3);
        }
        assert!(sweep_mean_snr(&[], &[2.0], &[], None, &q).is_err());
    }

    #[test]
    fn snr_sweep_with_simulation() {
        let q = QuadratureSpec::default();
        let sim = SimSettings {
            seed: 1,
            replications: 4,
            horizon: 20_000,
            slot_len: 100,
            block_len: 16,
        };
        let rows = sweep_mean_snr(&[10.0], &[2.0], &[2.0], Some(&sim), &q).unwrap();
        let c = &rows[0].by_rate[0];
        let est = c.sim_full.unwrap();
        assert!((est.mean - c.brq_full).abs() < 0.05);
        let qe = c.sim_quantized[0].1.unwrap();
        assert!(qe.mean <= c.brq_full);
    }

    #[test]
    fn ratio_sweep_limits_and_ordering() {
        let q = QuadratureSpec::default();
        let ratios: Vec<f64> = (0..=40).map(|i| i as f64 * 0.1).collect();
        let rows = sweep_threshold_ratio(10.0, &ratios, &[1.0, 2.0, 8.0], &q).unwrap();
        assert_eq!(rows[0].brq_full, 0.0);
        for row in &rows {
            let v: Vec<Option<f64>> = row.brq_quantized.iter().map(|x| x.1).collect();
            if let (Some(a), Some(b)) = (v[0], v[1]) {
                assert!(a <= b + 1e-9);
            }
            assert!(v[1].unwrap() <= v[2].unwrap() + 1e-9);
            assert!(v[2].unwrap() <= row.brq_full + 1e-9);
        }
    }
}
