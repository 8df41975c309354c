//! The subcommands. Each turns a resolved [`ExperimentConfig`] into output
//! bytes; nothing here depends on wall-clock time or thread count.

use std::io::Write;
use std::path::Path;

use brq_core::analytics::{
    avg_delay_slots, avg_rate_full_csit, avg_rate_prior_fixed_power, avg_rate_quantized,
    avg_rate_r_limited, waterfilling_rate, QuadratureSpec,
};
use brq_core::channel::{
    db_to_linear, inv_capacity, linear_to_db, Accounting, FadingModel, FeedbackMode, LinkConfig,
};
use brq_core::engine::{
    run_replicated, run_replication, sweep_mean_snr, sweep_threshold_ratio, RunConfig, SimSettings,
    StatsSummary, Verdict,
};
use brq_core::BrqError;

use crate::config::{CommandKind, ExperimentConfig, Format, Grid, ModelKind};
use crate::table::{Cell, Table};
use crate::CliError;

pub const DEFAULT_MEAN_SNR_DB: f64 = 10.0;
pub const DEFAULT_SLOT_LEN: u32 = 100;
pub const DEFAULT_BLOCK_LEN: usize = 64;
pub const DEFAULT_SEED: u64 = 1;
pub const DEFAULT_SLOTS: u64 = 100_000;
pub const DEFAULT_REPLICATIONS: usize = 20;
pub const FIG4_SNR_GRID_DB: Grid = Grid {
    start: 0.0,
    stop: 30.0,
    step: 1.0,
};
pub const FIG5_RATIO_GRID: Grid = Grid {
    start: 0.0,
    stop: 5.0,
    step: 0.05,
};

/// Runs the configured command, using a dedicated thread pool when
/// `threads` is set.
pub fn run(cfg: &ExperimentConfig) -> Result<(), CliError> {
    match cfg.threads {
        Some(0) => Err(CliError::Usage("threads must be >= 1".into())),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;
            pool.install(|| dispatch(cfg))
        }
        None => dispatch(cfg),
    }
}

fn dispatch(cfg: &ExperimentConfig) -> Result<(), CliError> {
    match cfg.command {
        Some(CommandKind::Analytic) => {
            let t = analytic_table(cfg)?;
            emit_table(cfg, &t, Format::Csv)
        }
        Some(CommandKind::Fig4) => {
            let t = fig4_table(cfg)?;
            emit_table(cfg, &t, Format::Csv)
        }
        Some(CommandKind::Fig5) => {
            let t = fig5_table(cfg)?;
            emit_table(cfg, &t, Format::Csv)
        }
        Some(CommandKind::Simulate) => simulate(cfg),
        Some(CommandKind::Validate) => validate(cfg),
        None => Err(CliError::Usage("no command given".into())),
    }
}

fn write_bytes(path: Option<&Path>, bytes: &[u8]) -> Result<(), CliError> {
    let res = match path {
        Some(p) => std::fs::write(p, bytes),
        None => std::io::stdout().lock().write_all(bytes),
    };
    res.map_err(|source| CliError::Io {
        path: path.map_or_else(|| "<stdout>".into(), Path::to_path_buf),
        source,
    })
}

fn emit_table(cfg: &ExperimentConfig, t: &Table, default: Format) -> Result<(), CliError> {
    let bytes = match cfg.format.unwrap_or(default) {
        Format::Csv => t.to_csv(),
        Format::Json => t.to_json().into_bytes(),
    };
    write_bytes(cfg.out.as_deref(), &bytes)
}

fn quad() -> QuadratureSpec {
    QuadratureSpec::default()
}

fn fname(f: f64) -> String {
    format!("F{f}")
}

fn single<T: Copy>(v: Option<&[T]>, what: &str, default: T) -> Result<T, CliError> {
    match v {
        None => Ok(default),
        Some([x]) => Ok(*x),
        Some(_) => Err(CliError::Usage(format!(
            "{what} takes a single value for this command"
        ))),
    }
}

fn read_trace(path: &Path) -> Result<Vec<f64>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| {
            l.parse::<f64>()
                .map(db_to_linear)
                .map_err(|_| CliError::Usage(format!("{}: bad SNR value {l:?}", path.display())))
        })
        .collect()
}

/// Fading models for each requested mean SNR (one model for a trace).
fn models(cfg: &ExperimentConfig) -> Result<Vec<FadingModel>, CliError> {
    let dbs = cfg
        .mean_snr_db
        .clone()
        .unwrap_or_else(|| vec![DEFAULT_MEAN_SNR_DB]);
    match cfg.model.unwrap_or(ModelKind::Rayleigh) {
        ModelKind::Rayleigh => Ok(dbs
            .iter()
            .map(|d| FadingModel::rayleigh(db_to_linear(*d)))
            .collect::<Result<_, _>>()?),
        ModelKind::Deterministic => Ok(dbs
            .iter()
            .map(|d| FadingModel::deterministic(db_to_linear(*d)))
            .collect::<Result<_, _>>()?),
        ModelKind::Trace => {
            let path = cfg
                .trace
                .as_deref()
                .ok_or_else(|| CliError::Usage("model = trace needs a trace file".into()))?;
            Ok(vec![FadingModel::empirical_trace(read_trace(path)?)?])
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum RateSpec {
    Fixed(f64),
    Factor(f64),
}

impl RateSpec {
    fn rate(self, mean_snr: f64) -> f64 {
        match self {
            RateSpec::Fixed(r) => r,
            RateSpec::Factor(k) => (1.0 + k * mean_snr).log2(),
        }
    }
}

fn rate_specs(cfg: &ExperimentConfig, default_factors: &[f64]) -> Result<Vec<RateSpec>, CliError> {
    match (cfg.rate, &cfg.rate_factor) {
        (Some(_), Some(_)) => Err(CliError::Usage(
            "give either rate or rate-factor, not both".into(),
        )),
        (Some(r), None) if r < 0.0 => Err(CliError::Usage(format!("rate must be >= 0, got {r}"))),
        (Some(r), None) => Ok(vec![RateSpec::Fixed(r)]),
        (None, ks) => {
            let ks = ks.as_deref().unwrap_or(default_factors);
            if let Some(k) = ks.iter().find(|k| !(**k > 0.0)) {
                return Err(CliError::Usage(format!("rate-factor must be > 0, got {k}")));
            }
            Ok(ks.iter().map(|k| RateSpec::Factor(*k)).collect())
        }
    }
}

fn optional(r: Result<f64, BrqError>) -> Result<Option<f64>, CliError> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(BrqError::InsufficientFeedback { .. }) => Ok(None),
        Err(e) => Err(e.into()),
    }
}

fn ratio(num: Option<f64>, den: f64) -> Cell {
    num.map(|n| n / den).into()
}

/// One row per (mean SNR, rate).
pub fn analytic_table(cfg: &ExperimentConfig) -> Result<Table, CliError> {
    let q = quad();
    let fs = cfg.feedback_bits.clone().unwrap_or_default();
    let rates = rate_specs(cfg, &[2.0])?;
    let mut cols: Vec<String> = [
        "mean_snr_db",
        "rate_factor",
        "rate_R",
        "p_R",
        "delay_slots",
        "wf_rate",
        "prior_fixed_rate",
        "brq_full_rate",
        "r_limited_rate",
        "normalized_brq_full_rate",
    ]
    .map(String::from)
    .to_vec();
    cols.extend(fs.iter().map(|f| format!("brq_quant_rate_{}", fname(*f))));
    cols.extend(
        fs.iter()
            .map(|f| format!("normalized_brq_quant_rate_{}", fname(*f))),
    );
    let mut t = Table::new(cols);
    for model in models(cfg)? {
        let g = model.mean_snr();
        let wf = waterfilling_rate(&model, 1.0, &q)?;
        let prior = avg_rate_prior_fixed_power(&model, &q)?;
        for spec in &rates {
            let r = spec.rate(g);
            let p = model.decode_prob(inv_capacity(r)?)?;
            let delay = match avg_delay_slots(&model, r) {
                Ok(d) => d,
                Err(BrqError::InfiniteDelay) => f64::INFINITY,
                Err(e) => return Err(e.into()),
            };
            let full = avg_rate_full_csit(&model, r, &q)?;
            let quant = fs
                .iter()
                .map(|f| optional(avg_rate_quantized(&model, r, *f, &q)))
                .collect::<Result<Vec<_>, _>>()?;
            let mut row = vec![
                linear_to_db(g).into(),
                match spec {
                    RateSpec::Factor(k) => Cell::Num(*k),
                    RateSpec::Fixed(_) => Cell::Empty,
                },
                r.into(),
                p.into(),
                delay.into(),
                wf.into(),
                prior.into(),
                full.into(),
                avg_rate_r_limited(&model, r, &q)?.into(),
                ratio(Some(full), wf),
            ];
            row.extend(quant.iter().map(|v| Cell::from(*v)));
            row.extend(quant.iter().map(|v| ratio(*v, wf)));
            t.push(row);
        }
    }
    Ok(t)
}

fn rayleigh_only(cfg: &ExperimentConfig, what: &str) -> Result<(), CliError> {
    match cfg.model {
        None | Some(ModelKind::Rayleigh) => Ok(()),
        Some(_) => Err(CliError::Usage(format!(
            "{what} is defined for Rayleigh fading only"
        ))),
    }
}

/// Rates normalized by the water-filling rate over a mean-SNR grid, one row
/// per grid point, columns per rate factor `k` and feedback budget `F`.
pub fn fig4_table(cfg: &ExperimentConfig) -> Result<Table, CliError> {
    rayleigh_only(cfg, "fig4")?;
    if cfg.rate.is_some() {
        return Err(CliError::Usage("fig4 takes rate-factor, not rate".into()));
    }
    let grid = match &cfg.mean_snr_db {
        Some(v) => v.clone(),
        None => cfg.snr_grid_db.unwrap_or(FIG4_SNR_GRID_DB).points(),
    };
    let ks = cfg.rate_factor.clone().unwrap_or_else(|| vec![2.0, 3.0]);
    let fs = cfg.feedback_bits.clone().unwrap_or_else(|| vec![1.0]);
    let sim = cfg.simulate.unwrap_or(false).then(|| SimSettings {
        seed: cfg.seed.unwrap_or(DEFAULT_SEED),
        replications: cfg.replications.unwrap_or(4),
        horizon: cfg.slots.unwrap_or(20_000),
        slot_len: cfg.slot_len.unwrap_or(DEFAULT_SLOT_LEN),
        block_len: cfg.block_len.unwrap_or(DEFAULT_BLOCK_LEN),
    });
    let rows = sweep_mean_snr(&grid, &ks, &fs, sim.as_ref(), &quad())?;

    let mut cols: Vec<String> = [
        "mean_snr_db",
        "wf_rate",
        "prior_fixed_rate",
        "normalized_prior_fixed_rate",
    ]
    .map(String::from)
    .to_vec();
    for k in &ks {
        cols.push(format!("rate_R_k{k}"));
        cols.push(format!("p_R_k{k}"));
        cols.push(format!("brq_full_rate_k{k}"));
        cols.push(format!("normalized_brq_full_rate_k{k}"));
        for f in &fs {
            cols.push(format!("brq_quant_rate_{}_k{k}", fname(*f)));
            cols.push(format!("normalized_brq_quant_rate_{}_k{k}", fname(*f)));
        }
        if sim.is_some() {
            cols.push(format!("sim_brq_full_rate_k{k}"));
            cols.push(format!("sim_brq_full_half_width_k{k}"));
            for f in &fs {
                cols.push(format!("sim_brq_quant_rate_{}_k{k}", fname(*f)));
                cols.push(format!("sim_brq_quant_half_width_{}_k{k}", fname(*f)));
            }
        }
    }
    let mut t = Table::new(cols);
    for row in rows {
        let wf = row.waterfilling;
        let mut cells = vec![
            row.mean_snr_db.into(),
            wf.into(),
            row.prior_fixed.into(),
            ratio(Some(row.prior_fixed), wf),
        ];
        for c in &row.by_rate {
            cells.push(c.rate.into());
            cells.push(c.decode_prob.into());
            cells.push(c.brq_full.into());
            cells.push(ratio(Some(c.brq_full), wf));
            for (_, v) in &c.brq_quantized {
                cells.push((*v).into());
                cells.push(ratio(*v, wf));
            }
            if sim.is_some() {
                cells.push(c.sim_full.map(|e| e.mean).into());
                cells.push(c.sim_full.map(|e| e.half_width).into());
                for (_, e) in &c.sim_quantized {
                    cells.push(e.map(|e| e.mean).into());
                    cells.push(e.map(|e| e.half_width).into());
                }
            }
        }
        t.push(cells);
    }
    Ok(t)
}

/// Absolute rates at a fixed mean SNR against the threshold-to-mean ratio.
pub fn fig5_table(cfg: &ExperimentConfig) -> Result<Table, CliError> {
    rayleigh_only(cfg, "fig5")?;
    let db = single(
        cfg.mean_snr_db.as_deref(),
        "mean-snr-db",
        DEFAULT_MEAN_SNR_DB,
    )?;
    let ratios = cfg.ratio_grid.unwrap_or(FIG5_RATIO_GRID).points();
    let fs = cfg
        .feedback_bits
        .clone()
        .unwrap_or_else(|| vec![1.0, 2.0, 8.0]);
    let rows = sweep_threshold_ratio(db_to_linear(db), &ratios, &fs, &quad())?;
    let mut cols: Vec<String> = ["ratio", "rate_R", "p_R", "brq_full_rate"]
        .map(String::from)
        .to_vec();
    cols.extend(fs.iter().map(|f| format!("brq_quant_rate_{}", fname(*f))));
    let mut t = Table::new(cols);
    for r in rows {
        let mut cells = vec![
            r.ratio.into(),
            r.rate.into(),
            r.decode_prob.into(),
            r.brq_full.into(),
        ];
        cells.extend(r.brq_quantized.iter().map(|(_, v)| Cell::from(*v)));
        t.push(cells);
    }
    Ok(t)
}

/// Everything `simulate` needs, resolved from the config.
#[derive(Debug, Clone)]
pub struct SimulationSetup {
    pub model: FadingModel,
    pub link: LinkConfig,
    pub run: RunConfig,
}

pub fn simulation_setup(cfg: &ExperimentConfig) -> Result<SimulationSetup, CliError> {
    let model = match models(cfg)?.as_slice() {
        [m] => m.clone(),
        _ => {
            return Err(CliError::Usage(
                "simulate takes a single mean-snr-db".into(),
            ))
        }
    };
    let spec = match rate_specs(cfg, &[2.0])?.as_slice() {
        [s] => *s,
        _ => {
            return Err(CliError::Usage(
                "simulate takes a single rate-factor".into(),
            ))
        }
    };
    let rate = spec.rate(model.mean_snr());
    let feedback = match cfg.feedback_bits.as_deref() {
        None => FeedbackMode::FullCsit,
        Some([f]) => FeedbackMode::Quantized {
            bits: *f,
            block_len: cfg.block_len.unwrap_or(DEFAULT_BLOCK_LEN),
        },
        Some(_) => {
            return Err(CliError::Usage(
                "simulate takes a single feedback-bits value".into(),
            ))
        }
    };
    let link = LinkConfig::new(rate, cfg.slot_len.unwrap_or(DEFAULT_SLOT_LEN))?
        .with_feedback(feedback)?
        .with_accounting(cfg.mode.unwrap_or(Accounting::Fluid))?;
    let run = RunConfig {
        seed: cfg.seed.unwrap_or(DEFAULT_SEED),
        replications: cfg.replications.unwrap_or(DEFAULT_REPLICATIONS),
        horizon: cfg.slots.unwrap_or(DEFAULT_SLOTS),
        include_warmup: cfg.include_warmup.unwrap_or(false),
        carry_payload: cfg.payload.unwrap_or(false),
    };
    if run.horizon == 0 {
        return Err(CliError::Usage("slots must be >= 1".into()));
    }
    if run.replications == 0 {
        return Err(CliError::Usage("replications must be >= 1".into()));
    }
    if run.carry_payload && link.accounting != Accounting::Integer {
        return Err(CliError::Usage("payload needs mode = integer".into()));
    }
    run.validate(&link)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(SimulationSetup { model, link, run })
}

pub fn summary_json(s: &StatsSummary) -> String {
    let mut out = serde_json::to_string_pretty(s).expect("serialize summary");
    out.push('\n');
    out
}

pub fn summary_table(s: &StatsSummary) -> Table {
    let mut t = Table::new(
        [
            "replications",
            "rate_mean",
            "rate_half_width",
            "delay_mean",
            "delay_half_width",
            "renewals",
            "delivered_bits",
            "undelivered_bits",
            "integrity",
        ]
        .map(String::from)
        .to_vec(),
    );
    t.push(vec![
        (s.replications as f64).into(),
        s.rate_mean.into(),
        s.rate_half_width.into(),
        s.delay_mean.into(),
        s.delay_half_width.into(),
        (s.renewals as f64).into(),
        s.delivered_bits.into(),
        s.undelivered_bits.into(),
        Cell::Text(
            if s.integrity == Verdict::Pass {
                "pass"
            } else {
                "fail"
            }
            .into(),
        ),
    ]);
    t
}

fn slot_log(setup: &SimulationSetup) -> Result<Table, CliError> {
    let log = run_replication(&setup.run, &setup.link, &setup.model, 0, true)?;
    let mut t = Table::new(
        [
            "slot",
            "instance",
            "snr",
            "eff_snr",
            "parity_bits",
            "new_bits",
            "decoded",
            "renewal",
            "chain_len",
            "reward",
        ]
        .map(String::from)
        .to_vec(),
    );
    for s in &log.slots {
        t.push(vec![
            (s.slot as f64).into(),
            (s.instance as f64).into(),
            s.snr.into(),
            s.eff_snr.into(),
            s.parity_bits.into(),
            s.new_bits.into(),
            Cell::Text(s.decoded.to_string()),
            Cell::Text(s.renewal.to_string()),
            (s.chain_len as f64).into(),
            s.reward.into(),
        ]);
    }
    Ok(t)
}

fn simulate(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let setup = simulation_setup(cfg)?;
    let summary = run_replicated(&setup.run, &setup.link, &setup.model)?;
    match cfg.format.unwrap_or(Format::Json) {
        Format::Json => write_bytes(cfg.out.as_deref(), summary_json(&summary).as_bytes())?,
        Format::Csv => write_bytes(cfg.out.as_deref(), &summary_table(&summary).to_csv())?,
    }
    if let Some(path) = &cfg.log {
        write_bytes(Some(path), &slot_log(&setup)?.to_csv())?;
    }
    if summary.integrity == Verdict::Fail {
        return Err(CliError::Integrity(
            "receiver output is not the in-order prefix of the source".into(),
        ));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
    /// The configuration cannot run this check (e.g. feedback too small).
    Skip,
}

/// Outcome of one `validate` check.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub status: Status,
    pub detail: String,
}

fn check(name: &'static str, pass: bool, detail: String) -> Check {
    let status = if pass { Status::Pass } else { Status::Fail };
    Check {
        name,
        status,
        detail,
    }
}

/// Cross-checks of simulation against analytics at the configured point.
pub fn validation_checks(cfg: &ExperimentConfig) -> Result<Vec<Check>, CliError> {
    rayleigh_only(cfg, "validate")?;
    let q = quad();
    let g = db_to_linear(single(
        cfg.mean_snr_db.as_deref(),
        "mean-snr-db",
        DEFAULT_MEAN_SNR_DB,
    )?);
    let model = FadingModel::rayleigh(g)?;
    let spec = match rate_specs(cfg, &[2.0])?.as_slice() {
        [s] => *s,
        _ => {
            return Err(CliError::Usage(
                "validate takes a single rate-factor".into(),
            ))
        }
    };
    let rate = spec.rate(g);
    let mut fs = cfg
        .feedback_bits
        .clone()
        .unwrap_or_else(|| vec![1.0, 2.0, 8.0]);
    fs.sort_by(f64::total_cmp);
    let n = cfg.slot_len.unwrap_or(DEFAULT_SLOT_LEN);
    let l = cfg.block_len.unwrap_or(DEFAULT_BLOCK_LEN);
    let seed = cfg.seed.unwrap_or(DEFAULT_SEED);
    let reps = cfg.replications.unwrap_or(DEFAULT_REPLICATIONS);
    let slots = cfg.slots.unwrap_or(DEFAULT_SLOTS);
    if slots == 0 || reps == 0 {
        return Err(CliError::Usage(
            "slots and replications must be >= 1".into(),
        ));
    }
    let mut checks = Vec::new();

    let wf = waterfilling_rate(&model, 1.0, &q)?;
    let prior = avg_rate_prior_fixed_power(&model, &q)?;
    let full = avg_rate_full_csit(&model, rate, &q)?;
    let quant: Vec<Option<f64>> = fs
        .iter()
        .map(|f| optional(avg_rate_quantized(&model, rate, *f, &q)))
        .collect::<Result<_, _>>()?;
    let mut chain = vec![wf, prior, full];
    chain.extend(quant.iter().rev().flatten());
    checks.push(check(
        "analytic-ordering",
        chain.windows(2).all(|w| w[0] + 1e-9 >= w[1]),
        format!(
            "wf {wf:.6} >= prior {prior:.6} >= full {full:.6} >= quantized [{}]",
            fs.iter()
                .zip(&quant)
                .map(|(f, v)| match v {
                    Some(v) => format!("F = {f}: {v:.6}"),
                    None => format!("F = {f}: n/a"),
                })
                .collect::<Vec<_>>()
                .join(", ")
        ),
    ));

    let link = LinkConfig::new(rate, n)?;
    let run = RunConfig::new(seed, reps, slots);
    let s = run_replicated(&run, &link, &model)?;
    checks.push(check(
        "full-csit-rate",
        (s.rate_mean - full).abs() <= s.rate_half_width,
        format!(
            "simulated {:.6} +- {:.6}, analytic {full:.6}",
            s.rate_mean, s.rate_half_width
        ),
    ));
    let delay = avg_delay_slots(&model, rate)?;
    checks.push(check(
        "full-csit-delay",
        (s.delay_mean - delay).abs() <= s.delay_half_width.max(0.02 * delay),
        format!(
            "simulated {:.4} +- {:.4}, analytic {delay:.4}",
            s.delay_mean, s.delay_half_width
        ),
    ));
    checks.push(check(
        "full-csit-integrity",
        s.integrity == Verdict::Pass,
        format!("{:?}", s.integrity),
    ));

    let period = 2 * l as u64;
    let qrun = RunConfig::new(seed, reps, slots.div_ceil(period) * period);
    for (f, analytic) in fs.iter().zip(&quant) {
        let qlink = link.with_feedback(FeedbackMode::Quantized {
            bits: *f,
            block_len: l,
        })?;
        match run_replicated(&qrun, &qlink, &model) {
            Ok(s) => checks.push(check(
                "quantized-safety",
                s.integrity == Verdict::Pass && s.rate_mean <= full + s.rate_half_width,
                format!(
                    "F = {f}: simulated {:.6} +- {:.6} (asymptotic {}), full {full:.6}, integrity {:?}",
                    s.rate_mean,
                    s.rate_half_width,
                    analytic.map_or("n/a".into(), |a| format!("{a:.6}")),
                    s.integrity
                ),
            )),
            Err(e) if matches!(e.root(), BrqError::InsufficientFeedback { .. } | BrqError::BudgetExceeded { .. }) => {
                checks.push(Check {
                    name: "quantized-safety",
                    status: Status::Skip,
                    detail: format!("F = {f}, L = {l}: {}", e.root()),
                })
            }
            Err(e) => return Err(e.into()),
        }
    }
    Ok(checks)
}

fn validate(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let checks = validation_checks(cfg)?;
    let mut text = String::new();
    for c in &checks {
        let tag = match c.status {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Skip => "SKIP",
        };
        text.push_str(&format!("{tag} {}: {}\n", c.name, c.detail));
    }
    write_bytes(cfg.out.as_deref(), text.as_bytes())?;
    match checks.iter().filter(|c| c.status == Status::Fail).count() {
        0 => Ok(()),
        n => Err(CliError::ValidationFailed(n)),
    }
}
