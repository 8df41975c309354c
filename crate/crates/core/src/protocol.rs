//! BRQ transmitter and receiver state machines.
//!
//! After an outage the transmitter learns (a lower bound on) the SNR of the
//! failed slot and spends exactly the missing `N (R - C(snr))` bits of the
//! next packet on parity for it; the rest of the packet carries new bits.
//! The receiver buffers undecodable slots and, at the first decodable one,
//! walks the chain backwards using each packet's parity to recover its
//! predecessor.
//!
//! Coding is not simulated. A slot decodes on its own iff `C(snr) >= R`, and
//! a buffered slot is recoverable iff its successor carried at least the
//! missing number of parity bits. Payload integrity is tracked by moving
//! windows of a source stream (and, in integer accounting, the bits
//! themselves) through the chain.

use std::collections::BTreeMap;

use bitvec::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{cap, Accounting, FadingModel, FeedbackMode, LinkConfig, SnrStream};
use crate::quantizer::{
    decode_feedback_block, effective_snr, encode_feedback_block, plan_quantizer, Bits,
    FeedbackBlock, QuantizerConfig, SlotFeedback,
};
use crate::{BrqError, Result};

/// Delayed feedback the transmitter applies to an instance's next packet.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum TxFeedback {
    /// Previous slot decoded (or no predecessor): all new bits.
    Ack,
    /// Previous slot failed; this SNR is known not to exceed the true one.
    EffectiveSnr(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PayloadWindow {
    pub offset: f64,
    pub len: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Packet {
    pub slot: u64,
    pub instance: usize,
    /// Position of this packet's new bits in the source fetch order.
    pub seq: u64,
    pub parity_bits: f64,
    pub new_bits: f64,
    /// Slot of the predecessor protected by `parity_bits`.
    pub bin_ref: Option<u64>,
    pub payload: PayloadWindow,
    /// The new bits themselves, when payload is carried.
    pub data: Option<Bits>,
    /// Effective SNR the parity was sized for; `None` after an Ack.
    pub feedback_snr: Option<f64>,
}

/// Parity needed to recover a slot whose SNR is at least `eff_snr`.
///
/// Fluid: `N (R - C)^+`. Integer: rounded up to whole bits.
pub fn parity_bit_count(rate: f64, eff_snr: f64, slot_len: u32, mode: Accounting) -> f64 {
    let fluid = slot_len as f64 * (rate - cap(eff_snr)).max(0.0);
    match mode {
        Accounting::Fluid => fluid,
        Accounting::Integer => {
            let r = fluid.ceil();
            // Guard against ceil(x.0000000001) from rounding in C().
            if r - fluid > 1.0 - 1e-9 { r - 1.0 } else { r }.min((slot_len as f64 * rate).round())
        }
    }
}

/// Sum of new bits delivered at a renewal preceded by outage slots with
/// the given (effective) SNRs: `N (R + sum C(snr))`.
pub fn reward_of_chain(rate: f64, slot_len: u32, outage_snrs: &[f64]) -> Result<f64> {
    let mut sum = 0.0;
    for g in outage_snrs {
        let c = crate::channel::capacity(*g)?;
        if !(c < rate) {
            return Err(BrqError::invalid(format!(
                "SNR {g} is not an outage at rate {rate}"
            )));
        }
        sum += c;
    }
    Ok(slot_len as f64 * (rate + sum))
}

/// Pseudo-random payload source, generated on demand.
#[derive(Debug, Clone)]
pub struct SourceStream {
    rng: ChaCha8Rng,
    bits: Bits,
}

impl SourceStream {
    pub fn new(seed: u64) -> Self {
        SourceStream {
            rng: ChaCha8Rng::seed_from_u64(seed),
            bits: Bits::new(),
        }
    }

    fn ensure(&mut self, len: usize) {
        while self.bits.len() < len {
            let w: u64 = self.rng.random();
            self.bits
                .extend_from_bitslice(w.to_be_bytes().view_bits::<Msb0>());
        }
    }

    pub fn slice(&mut self, offset: usize, len: usize) -> &BitSlice<u8, Msb0> {
        self.ensure(offset + len);
        &self.bits[offset..offset + len]
    }
}

/// Transmitter of one session. Instances share one source stream.
#[derive(Debug, Clone)]
pub struct TxState {
    link: LinkConfig,
    cursor: f64,
    next_seq: u64,
    last_slot: Vec<Option<u64>>,
    source: Option<SourceStream>,
}

impl TxState {
    pub fn new(link: LinkConfig, instances: usize) -> Self {
        TxState {
            link,
            cursor: 0.0,
            next_seq: 0,
            last_slot: vec![None; instances.max(1)],
            source: None,
        }
    }

    /// Carries real payload bits; needs integer accounting.
    pub fn with_payload(mut self, seed: u64) -> Result<Self> {
        if self.link.accounting != Accounting::Integer {
            return Err(BrqError::invalid("payload bits need integer accounting"));
        }
        self.source = Some(SourceStream::new(seed));
        Ok(self)
    }

    /// Offset of the next unsent source bit.
    pub fn stream_cursor(&self) -> f64 {
        self.cursor
    }

    pub fn source_mut(&mut self) -> Option<&mut SourceStream> {
        self.source.as_mut()
    }

    /// Builds the packet for `slot` of `instance` given that instance's
    /// feedback about its previous slot.
    pub fn tx_step(&mut self, instance: usize, slot: u64, feedback: TxFeedback) -> Result<Packet> {
        let prev = *self
            .last_slot
            .get(instance)
            .ok_or_else(|| BrqError::invalid(format!("no BRQ instance {instance}")))?;
        let total = self.link.bits_per_packet();
        let (parity, bin_ref, feedback_snr) = match feedback {
            TxFeedback::Ack => (0.0, None, None),
            TxFeedback::EffectiveSnr(g) => {
                if !(g >= 0.0) {
                    return Err(BrqError::invalid(format!(
                        "effective SNR must be >= 0, got {g}"
                    )));
                }
                let prev = prev.ok_or_else(|| {
                    BrqError::invalid(format!("instance {instance} has no predecessor to protect"))
                })?;
                let r =
                    parity_bit_count(self.link.rate, g, self.link.slot_len, self.link.accounting);
                if r > 0.0 {
                    (r, Some(prev), Some(g))
                } else {
                    (0.0, None, Some(g))
                }
            }
        };
        let new_bits = (total - parity).max(0.0);
        let payload = PayloadWindow {
            offset: self.cursor,
            len: new_bits,
        };
        let data = self.source.as_mut().map(|s| {
            s.slice(payload.offset as usize, new_bits as usize)
                .to_bitvec()
        });
        self.cursor += new_bits;
        let seq = self.next_seq;
        self.next_seq += 1;
        self.last_slot[instance] = Some(slot);
        Ok(Packet {
            slot,
            instance,
            seq,
            parity_bits: parity,
            new_bits,
            bin_ref,
            payload,
            data,
            feedback_snr,
        })
    }
}

/// Reward credited at one renewal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenewalRecord {
    pub slot: u64,
    pub instance: usize,
    /// Slots in the chain, renewal included.
    pub chain_len: usize,
    /// New bits recovered at this renewal.
    pub reward: f64,
    /// `(bits, delay in slots)` per recovered packet, oldest first.
    pub delays: Vec<(f64, u64)>,
    /// True SNRs of the buffered outage slots, oldest first.
    pub outage_snrs: Vec<f64>,
    /// SNRs the transmitter sized parity for, aligned with `outage_snrs`.
    pub outage_eff_snrs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RxEvent {
    Buffered,
    Renewal(RenewalRecord),
}

#[derive(Debug, Clone)]
struct BufferedSlot {
    snr: f64,
    packet: Packet,
}

/// In-order reassembly of recovered new bits.
#[derive(Debug, Clone, Default)]
pub struct DecodedStream {
    next_seq: u64,
    end_offset: f64,
    pending: BTreeMap<u64, (PayloadWindow, Option<Bits>)>,
    bits: Option<Bits>,
    contiguous: bool,
}

impl DecodedStream {
    fn new(carry_bits: bool) -> Self {
        DecodedStream {
            bits: carry_bits.then(Bits::new),
            contiguous: true,
            ..Default::default()
        }
    }

    fn accept(&mut self, seq: u64, window: PayloadWindow, data: Option<Bits>) {
        self.pending.insert(seq, (window, data));
        while let Some((w, d)) = self.pending.remove(&self.next_seq) {
            if w.offset != self.end_offset {
                self.contiguous = false;
            }
            self.end_offset = w.offset + w.len;
            if let (Some(out), Some(d)) = (self.bits.as_mut(), d) {
                out.extend_from_bitslice(&d);
            }
            self.next_seq += 1;
        }
    }

    /// Length of the in-order prefix.
    pub fn prefix_len(&self) -> f64 {
        self.end_offset
    }

    pub fn bits(&self) -> Option<&Bits> {
        self.bits.as_ref()
    }

    /// Windows recovered but still waiting for an earlier packet.
    pub fn out_of_order(&self) -> impl Iterator<Item = (&PayloadWindow, Option<&Bits>)> {
        self.pending.values().map(|(w, d)| (w, d.as_ref()))
    }

    pub fn is_contiguous(&self) -> bool {
        self.contiguous
    }
}

/// Receiver of one session: a chain buffer per BRQ instance plus the
/// shared reassembly of the decoded stream.
#[derive(Debug, Clone)]
pub struct RxState {
    link: LinkConfig,
    buffers: Vec<Vec<BufferedSlot>>,
    anchors: Vec<Option<u64>>,
    decoded: DecodedStream,
}

impl RxState {
    pub fn new(link: LinkConfig, instances: usize, carry_bits: bool) -> Self {
        let n = instances.max(1);
        RxState {
            link,
            buffers: vec![Vec::new(); n],
            anchors: vec![None; n],
            decoded: DecodedStream::new(carry_bits),
        }
    }

    pub fn decoded(&self) -> &DecodedStream {
        &self.decoded
    }

    /// Slot of the last renewal of an instance.
    pub fn chain_anchor(&self, instance: usize) -> Option<u64> {
        self.anchors.get(instance).copied().flatten()
    }

    /// New bits sitting in undecoded buffers.
    pub fn buffered_bits(&self) -> f64 {
        self.buffers
            .iter()
            .flatten()
            .map(|b| b.packet.new_bits)
            .sum()
    }

    pub fn buffered_slots(&self) -> usize {
        self.buffers.iter().map(Vec::len).sum()
    }

    pub fn rx_step(&mut self, snr: f64, packet: Packet) -> Result<RxEvent> {
        let instance = packet.instance;
        let buffer = self
            .buffers
            .get_mut(instance)
            .ok_or_else(|| BrqError::invalid(format!("no BRQ instance {instance}")))?;
        if let Some(last) = buffer.last() {
            if last.packet.slot >= packet.slot {
                return Err(BrqError::invalid("packets must arrive in slot order"));
            }
        }
        if !self.link.decodable(snr) {
            buffer.push(BufferedSlot { snr, packet });
            return Ok(RxEvent::Buffered);
        }

        let t = packet.slot;
        let n = self.link.slot_len as f64;
        let slack = 1e-9 * self.link.bits_per_packet().max(1.0);
        // newest first: the renewal packet, then buffered predecessors
        let mut chain: Vec<BufferedSlot> = vec![BufferedSlot { snr, packet }];
        while let Some(prev) = buffer.pop() {
            let current = &chain.last().expect("chain has the renewal packet").packet;
            let required = n * (self.link.rate - cap(prev.snr)).max(0.0);
            let linked = current.bin_ref == Some(prev.packet.slot);
            if !linked || current.parity_bits + slack < required {
                return Err(BrqError::ChainBroken {
                    slot: prev.packet.slot,
                    parity: if linked { current.parity_bits } else { 0.0 },
                    required,
                });
            }
            chain.push(prev);
        }
        let oldest = &chain.last().expect("non-empty chain").packet;
        if let Some(missing) = oldest.bin_ref {
            return Err(BrqError::ChainBroken {
                slot: missing,
                parity: oldest.parity_bits,
                required: f64::NAN,
            });
        }

        let chain_len = chain.len();
        let mut outage_snrs = Vec::with_capacity(chain_len - 1);
        let mut outage_eff_snrs = Vec::with_capacity(chain_len - 1);
        for i in (1..chain_len).rev() {
            outage_snrs.push(chain[i].snr);
            outage_eff_snrs.push(chain[i - 1].packet.feedback_snr.unwrap_or(0.0));
        }
        let mut reward = 0.0;
        let mut delays = Vec::with_capacity(chain_len);
        for b in chain.into_iter().rev() {
            let p = b.packet;
            reward += p.new_bits;
            delays.push((p.new_bits, t - p.slot));
            self.decoded.accept(p.seq, p.payload, p.data);
        }
        self.anchors[instance] = Some(t);
        Ok(RxEvent::Renewal(RenewalRecord {
            slot: t,
            instance,
            chain_len,
            reward,
            delays,
            outage_snrs,
            outage_eff_snrs,
        }))
    }
}

/// Odd or even block of the interleaved quantized schedule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BlockParity {
    Odd,
    Even,
}

/// Where a slot sits in the interleaved block schedule
/// `(odd 1), (even 1), (odd 2), (even 2), ...`. Block and position are 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduledSlot {
    pub parity: BlockParity,
    pub block: u64,
    pub position: usize,
}

impl ScheduledSlot {
    /// Index of the BRQ instance serving this slot, in `0..2L`.
    pub fn instance(&self, block_len: usize) -> usize {
        let base = match self.parity {
            BlockParity::Odd => 0,
            BlockParity::Even => block_len,
        };
        base + self.position - 1
    }
}

pub fn schedule_instance(slot: u64, block_len: usize) -> Result<ScheduledSlot> {
    if block_len < 2 {
        return Err(BrqError::invalid(format!(
            "block length must be >= 2, got {block_len}"
        )));
    }
    let l = block_len as u64;
    let within = slot % (2 * l);
    Ok(ScheduledSlot {
        parity: if within < l {
            BlockParity::Odd
        } else {
            BlockParity::Even
        },
        block: slot / (2 * l) + 1,
        position: (within % l) as usize + 1,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct SessionOptions {
    /// Keep a per-slot log.
    pub record_slots: bool,
    /// Count the first `2L` slots of a quantized session in the statistics.
    pub include_warmup: bool,
    /// Move real payload bits (integer accounting only) seeded by this value.
    pub payload_seed: Option<u64>,
}

/// One line of the per-slot log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlotRecord {
    pub slot: u64,
    pub instance: usize,
    pub snr: f64,
    /// Effective SNR the parity of this packet was sized for.
    pub eff_snr: Option<f64>,
    pub parity_bits: f64,
    pub new_bits: f64,
    /// Packet recovered by the end of the session.
    pub decoded: bool,
    /// A renewal happened in this slot.
    pub renewal: bool,
    pub chain_len: usize,
    pub reward: f64,
}

/// Outcome of one simulated session.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionLog {
    pub link: LinkConfig,
    pub horizon: u64,
    /// Leading slots excluded from [`SessionLog::delivered_rate`].
    pub warmup: u64,
    pub slots: Vec<SlotRecord>,
    pub renewals: Vec<RenewalRecord>,
    pub injected_bits: f64,
    pub delivered_bits: f64,
    /// New bits still buffered at the horizon.
    pub undelivered_bits: f64,
    /// Length of the in-order decoded prefix.
    pub in_order_bits: f64,
    /// Recovered bits held back behind a window that is still buffered.
    pub out_of_order_bits: f64,
    pub integrity_ok: bool,
    pub quantizer: Option<QuantizerConfig>,
    pub feedback_bits_sent: usize,
}

impl SessionLog {
    /// Rewards of renewals after the warm-up, per channel use.
    pub fn delivered_rate(&self) -> f64 {
        let measured = self.horizon - self.warmup;
        if measured == 0 {
            return 0.0;
        }
        let bits: f64 = self
            .renewals
            .iter()
            .filter(|r| r.slot >= self.warmup)
            .map(|r| r.reward)
            .sum();
        bits / (self.link.slot_len as f64 * measured as f64)
    }

    /// Bit-weighted mean delay of delivered new bits, in slots.
    pub fn mean_delay(&self) -> f64 {
        let (mut bits, mut weighted) = (0.0, 0.0);
        for r in self.renewals.iter().filter(|r| r.slot >= self.warmup) {
            for (b, d) in &r.delays {
                bits += b;
                weighted += b * *d as f64;
            }
        }
        if bits > 0.0 {
            weighted / bits
        } else {
            f64::NAN
        }
    }
}

struct Session<'m, R> {
    link: LinkConfig,
    opts: SessionOptions,
    snrs: SnrStream<'m, R>,
    tx: TxState,
    rx: RxState,
    slots: Vec<SlotRecord>,
    renewals: Vec<RenewalRecord>,
}

impl<'m, R: Rng> Session<'m, R> {
    fn new(
        link: LinkConfig,
        model: &'m FadingModel,
        rng: R,
        instances: usize,
        opts: SessionOptions,
    ) -> Result<Self> {
        link.validate()?;
        let mut tx = TxState::new(link, instances);
        if let Some(seed) = opts.payload_seed {
            tx = tx.with_payload(seed)?;
        }
        Ok(Session {
            link,
            opts,
            snrs: SnrStream::new(model, rng)?,
            tx,
            rx: RxState::new(link, instances, opts.payload_seed.is_some()),
            slots: Vec::new(),
            renewals: Vec::new(),
        })
    }

    /// Runs one slot; returns the true SNR.
    fn step(&mut self, instance: usize, slot: u64, feedback: TxFeedback) -> Result<f64> {
        let pkt = self.tx.tx_step(instance, slot, feedback)?;
        let snr = self.snrs.next_snr()?;
        if self.opts.record_slots {
            self.slots.push(SlotRecord {
                slot,
                instance,
                snr,
                eff_snr: pkt.feedback_snr,
                parity_bits: pkt.parity_bits,
                new_bits: pkt.new_bits,
                decoded: false,
                renewal: false,
                chain_len: 0,
                reward: 0.0,
            });
        }
        if let RxEvent::Renewal(rec) = self.rx.rx_step(snr, pkt)? {
            if self.opts.record_slots {
                let here = self.slots.last_mut().expect("recorded above");
                here.renewal = true;
                here.chain_len = rec.chain_len;
                here.reward = rec.reward;
                for (_, d) in &rec.delays {
                    self.slots[(slot - d) as usize].decoded = true;
                }
            }
            self.renewals.push(rec);
        }
        Ok(snr)
    }

    fn finish(
        mut self,
        horizon: u64,
        warmup: u64,
        quantizer: Option<QuantizerConfig>,
        feedback_bits_sent: usize,
    ) -> SessionLog {
        let injected_bits = self.tx.stream_cursor();
        let delivered_bits: f64 = self.renewals.iter().map(|r| r.reward).sum();
        let decoded = self.rx.decoded();
        let mut integrity_ok = decoded.is_contiguous();
        if let Some(src) = self.tx.source_mut() {
            if let Some(bits) = decoded.bits() {
                integrity_ok &= src.slice(0, bits.len()) == bits.as_bitslice();
            }
            for (w, d) in decoded.out_of_order() {
                if let Some(d) = d {
                    integrity_ok &= src.slice(w.offset as usize, w.len as usize) == d.as_bitslice();
                }
            }
        }
        SessionLog {
            link: self.link,
            horizon,
            warmup,
            undelivered_bits: self.rx.buffered_bits(),
            in_order_bits: decoded.prefix_len(),
            out_of_order_bits: decoded.out_of_order().map(|(w, _)| w.len).sum(),
            integrity_ok,
            slots: self.slots,
            renewals: self.renewals,
            injected_bits,
            delivered_bits,
            quantizer,
            feedback_bits_sent,
        }
    }
}

/// Simulates BRQ with the exact SNR of every slot fed back before the next.
pub fn run_full_csit<R: Rng>(
    link: &LinkConfig,
    model: &FadingModel,
    horizon: u64,
    rng: R,
    opts: SessionOptions,
) -> Result<SessionLog> {
    if horizon == 0 {
        return Err(BrqError::invalid("horizon must be >= 1 slot"));
    }
    let mut s = Session::new(*link, model, rng, 1, opts)?;
    let mut feedback = TxFeedback::Ack;
    for t in 0..horizon {
        let snr = s.step(0, t, feedback)?;
        feedback = if link.decodable(snr) {
            TxFeedback::Ack
        } else {
            TxFeedback::EffectiveSnr(snr)
        };
    }
    Ok(s.finish(horizon, 0, None, 0))
}

/// Simulates block-interleaved BRQ with `F` feedback bits per slot.
///
/// Slot `l` of every odd (even) block belongs to instance `l` (`L + l`).
/// The feedback message of a block is sent during the following block of
/// the other parity and applied in the next block of the same parity. The
/// first block of each parity sends only new bits.
pub fn run_quantized<R: Rng>(
    link: &LinkConfig,
    model: &FadingModel,
    horizon: u64,
    rng: R,
    opts: SessionOptions,
) -> Result<SessionLog> {
    let (bits, l) = match link.feedback {
        FeedbackMode::Quantized { bits, block_len } => (bits, block_len),
        FeedbackMode::FullCsit => {
            return Err(BrqError::invalid(
                "quantized run needs a feedback bit budget",
            ))
        }
    };
    let period = 2 * l as u64;
    if horizon == 0 || !horizon.is_multiple_of(period) {
        return Err(BrqError::invalid(format!(
            "horizon {horizon} must be a positive multiple of 2L = {period}"
        )));
    }
    let threshold = link.threshold_snr();
    let qcfg = plan_quantizer(bits, l, model.decode_prob(threshold)?, threshold)?;
    let mut s = Session::new(*link, model, rng, 2 * l, opts)?;

    let mut pending: [Option<FeedbackBlock>; 2] = [None, None];
    let mut feedback_bits_sent = 0;
    let mut block_snrs = Vec::with_capacity(l);
    let mut t = 0u64;
    while t < horizon {
        let parity_idx = usize::from(schedule_instance(t, l)?.parity == BlockParity::Even);
        let feedback: Vec<TxFeedback> = match pending[parity_idx].take() {
            None => vec![TxFeedback::Ack; l],
            Some(block) => decode_feedback_block(&block, &qcfg)?
                .into_iter()
                .map(|f| match f {
                    SlotFeedback::Ack => TxFeedback::Ack,
                    SlotFeedback::QuantizedSnr(rep) => {
                        TxFeedback::EffectiveSnr(effective_snr(rep, qcfg.cell_width))
                    }
                })
                .collect(),
        };
        block_snrs.clear();
        for fb in feedback {
            let at = schedule_instance(t, l)?;
            block_snrs.push(s.step(at.instance(l), t, fb)?);
            t += 1;
        }
        let block = encode_feedback_block(&block_snrs, &qcfg)?;
        feedback_bits_sent += block.encoded_bits.len();
        pending[parity_idx] = Some(block);
    }
    let warmup = if opts.include_warmup { 0 } else { period };
    Ok(s.finish(horizon, warmup, Some(qcfg), feedback_bits_sent))
}

/// Runs the scheme selected by the link's feedback mode.
pub fn run_session<R: Rng>(
    link: &LinkConfig,
    model: &FadingModel,
    horizon: u64,
    rng: R,
    opts: SessionOptions,
) -> Result<SessionLog> {
    match link.feedback {
        FeedbackMode::FullCsit => run_full_csit(link, model, horizon, rng, opts),
        FeedbackMode::Quantized { .. } => run_quantized(link, model, horizon, rng, opts),
    }
}
