//! Finite-feedback CSIT: one message per block of `L` slots, carrying which
//! slots decoded plus a quantized SNR for every slot that did not.
//!
//! Bit layout of a block (MSB first):
//!
//! ```text
//! | success count k : ceil(log2(L+1)) | pattern rank : ceil(log2 C(L,k)) | cell index : ceil(log2 K) per failed slot |
//! ```
//!
//! The pattern rank is the colexicographic rank of the set of successful
//! slot positions. Cell indices follow in ascending slot order.
//!
//! SNRs below the threshold are quantized on a uniform grid of width `d`.
//! The reported value is the upper edge of the cell, so the transmitter's
//! estimate `(reported - d)^+` is the lower edge and never exceeds the true
//! SNR.

use bitvec::prelude::*;
use num_bigint::BigUint;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::analytics::binary_entropy;
use crate::{BrqError, Result};

/// Largest cell-index width used by the planner; keeps cell edges exact
/// integers-times-width in `f64`.
const MAX_CELL_BITS: usize = 52;

pub type Bits = BitVec<u8, Msb0>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantizerConfig {
    /// Feedback bits per slot.
    pub feedback_bits: f64,
    /// Slots per block.
    pub block_len: usize,
    /// Decoding threshold `2^R - 1`.
    pub threshold: f64,
    /// Cell width `d`.
    pub cell_width: f64,
    /// Number of cells `K = ceil(threshold / d)`.
    pub cells: u64,
}

impl QuantizerConfig {
    pub fn new(
        feedback_bits: f64,
        block_len: usize,
        threshold: f64,
        cell_width: f64,
    ) -> Result<Self> {
        if !(feedback_bits >= 0.0) {
            return Err(BrqError::invalid(format!(
                "feedback bits must be >= 0, got {feedback_bits}"
            )));
        }
        if block_len < 1 {
            return Err(BrqError::invalid("block length must be >= 1"));
        }
        if !(threshold > 0.0 && threshold.is_finite()) {
            return Err(BrqError::invalid(format!(
                "threshold must be > 0, got {threshold}"
            )));
        }
        if !(cell_width > 0.0 && cell_width.is_finite()) {
            return Err(BrqError::invalid(format!(
                "cell width must be > 0, got {cell_width}"
            )));
        }
        let k = (threshold / cell_width).ceil().max(1.0);
        if k > (1u64 << 62) as f64 {
            return Err(BrqError::invalid("cell width too small for the threshold"));
        }
        Ok(QuantizerConfig {
            feedback_bits,
            block_len,
            threshold,
            cell_width,
            cells: k as u64,
        })
    }

    /// Hard per-block budget `floor(L F)`.
    pub fn budget_bits(&self) -> usize {
        (self.block_len as f64 * self.feedback_bits).floor() as usize
    }

    pub fn count_bits(&self) -> usize {
        ceil_log2_u64(self.block_len as u64 + 1)
    }

    pub fn cell_bits(&self) -> usize {
        ceil_log2_u64(self.cells)
    }

    /// Reported SNR for a cell: its upper edge.
    pub fn representative(&self, cell: u64) -> f64 {
        (cell + 1) as f64 * self.cell_width
    }
}

fn ceil_log2_u64(x: u64) -> usize {
    debug_assert!(x >= 1);
    (64 - (x - 1).leading_zeros()) as usize
}

fn ceil_log2_big(x: &BigUint) -> usize {
    debug_assert!(!x.is_zero());
    (x - 1u32).bits() as usize
}

/// Safe SNR estimate `(reported - d)^+`.
pub fn effective_snr(reported: f64, distortion: f64) -> f64 {
    (reported - distortion).max(0.0)
}

/// Cell index of an outage SNR.
///
/// The index is the largest `k < K` whose effective SNR, computed exactly as
/// the transmitter will compute it, does not exceed `snr`.
pub fn quantize_snr(snr: f64, config: &QuantizerConfig) -> Result<u64> {
    if !(snr >= 0.0) {
        return Err(BrqError::invalid(format!("SNR must be >= 0, got {snr}")));
    }
    if snr >= config.threshold {
        return Err(BrqError::invalid(format!(
            "SNR {snr} is decodable (threshold {}); report it in the mask",
            config.threshold
        )));
    }
    let d = config.cell_width;
    let eff = |k: u64| effective_snr(config.representative(k), d);
    let mut k = ((snr / d).floor() as u64).min(config.cells - 1);
    while k > 0 && eff(k) > snr {
        k -= 1;
    }
    while k + 1 < config.cells && eff(k + 1) <= snr {
        k += 1;
    }
    Ok(k)
}

/// Pascal triangle rows `0..=n`.
fn binomial_table(n: usize) -> Vec<Vec<BigUint>> {
    let mut rows: Vec<Vec<BigUint>> = Vec::with_capacity(n + 1);
    for i in 0..=n {
        let mut row = vec![BigUint::one(); i + 1];
        for j in 1..i {
            row[j] = &rows[i - 1][j - 1] + &rows[i - 1][j];
        }
        rows.push(row);
    }
    rows
}

fn binom(table: &[Vec<BigUint>], n: usize, k: usize) -> BigUint {
    if k > n {
        BigUint::zero()
    } else {
        table[n][k].clone()
    }
}

fn push_uint(bits: &mut Bits, value: u64, width: usize) {
    for i in (0..width).rev() {
        bits.push((value >> i) & 1 == 1);
    }
}

fn push_big(bits: &mut Bits, value: &BigUint, width: usize) {
    for i in (0..width).rev() {
        bits.push(value.bit(i as u64));
    }
}

/// Encoded feedback for one block.
#[derive(Debug, Clone, PartialEq)]
pub struct FeedbackBlock {
    pub success_mask: Vec<bool>,
    /// One cell per failed slot, ascending by slot.
    pub cell_indices: Vec<u64>,
    pub encoded_bits: Bits,
}

/// What the transmitter learns about one slot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SlotFeedback {
    Ack,
    QuantizedSnr(f64),
}

/// Size in bits of a block with `successes` decodable slots.
pub fn encoded_len(config: &QuantizerConfig, successes: usize) -> usize {
    let table = binomial_table(config.block_len);
    config.count_bits()
        + ceil_log2_big(&binom(&table, config.block_len, successes))
        + (config.block_len - successes) * config.cell_bits()
}

pub fn encode_feedback_block(snrs: &[f64], config: &QuantizerConfig) -> Result<FeedbackBlock> {
    let l = config.block_len;
    if snrs.len() != l {
        return Err(BrqError::invalid(format!(
            "expected {l} SNRs for one block, got {}",
            snrs.len()
        )));
    }
    let success_mask: Vec<bool> = snrs.iter().map(|g| *g >= config.threshold).collect();
    let cell_indices = snrs
        .iter()
        .filter(|g| **g < config.threshold)
        .map(|g| quantize_snr(*g, config))
        .collect::<Result<Vec<_>>>()?;
    let k = success_mask.iter().filter(|s| **s).count();

    let table = binomial_table(l);
    let patterns = binom(&table, l, k);
    let pattern_bits = ceil_log2_big(&patterns);
    let needed = config.count_bits() + pattern_bits + cell_indices.len() * config.cell_bits();
    let budget = config.budget_bits();
    if needed > budget {
        return Err(BrqError::BudgetExceeded { needed, budget });
    }

    let mut rank = BigUint::zero();
    for (i, pos) in success_mask
        .iter()
        .enumerate()
        .filter(|(_, s)| **s)
        .map(|(p, _)| p)
        .enumerate()
    {
        rank += binom(&table, pos, i + 1);
    }

    let mut bits = Bits::with_capacity(needed);
    push_uint(&mut bits, k as u64, config.count_bits());
    push_big(&mut bits, &rank, pattern_bits);
    for c in &cell_indices {
        push_uint(&mut bits, *c, config.cell_bits());
    }
    debug_assert_eq!(bits.len(), needed);
    Ok(FeedbackBlock {
        success_mask,
        cell_indices,
        encoded_bits: bits,
    })
}

struct Reader<'a> {
    bits: &'a BitSlice<u8, Msb0>,
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, width: usize) -> Result<&BitSlice<u8, Msb0>> {
        if self.pos + width > self.bits.len() {
            return Err(BrqError::DecodeError(format!(
                "truncated: need {width} bits at offset {}, have {}",
                self.pos,
                self.bits.len()
            )));
        }
        let s = &self.bits[self.pos..self.pos + width];
        self.pos += width;
        Ok(s)
    }

    fn uint(&mut self, width: usize) -> Result<u64> {
        Ok(self
            .take(width)?
            .iter()
            .fold(0u64, |acc, b| (acc << 1) | *b as u64))
    }

    fn big(&mut self, width: usize) -> Result<BigUint> {
        let mut v = BigUint::zero();
        for b in self.take(width)?.iter() {
            v <<= 1u32;
            if *b {
                v += 1u32;
            }
        }
        Ok(v)
    }
}

/// Parses a block back into its success mask and cell indices.
pub fn decode_block_bits(
    bits: &BitSlice<u8, Msb0>,
    config: &QuantizerConfig,
) -> Result<(Vec<bool>, Vec<u64>)> {
    let l = config.block_len;
    let mut r = Reader { bits, pos: 0 };
    let k = r.uint(config.count_bits())? as usize;
    if k > l {
        return Err(BrqError::DecodeError(format!(
            "success count {k} exceeds block length {l}"
        )));
    }
    let table = binomial_table(l);
    let patterns = binom(&table, l, k);
    let mut rank = r.big(ceil_log2_big(&patterns))?;
    if rank >= patterns {
        return Err(BrqError::DecodeError("pattern rank out of range".into()));
    }
    let mut mask = vec![false; l];
    let mut upper = l;
    for i in (1..=k).rev() {
        // Largest position p < upper with C(p, i) <= rank.
        let mut p = upper - 1;
        while binom(&table, p, i) > rank {
            p -= 1;
        }
        rank -= binom(&table, p, i);
        mask[p] = true;
        upper = p;
    }
    let mut cells = Vec::with_capacity(l - k);
    for _ in 0..(l - k) {
        let c = r.uint(config.cell_bits())?;
        if c >= config.cells {
            return Err(BrqError::DecodeError(format!(
                "cell index {c} >= {}",
                config.cells
            )));
        }
        cells.push(c);
    }
    if r.pos != bits.len() {
        return Err(BrqError::DecodeError(format!(
            "{} trailing bits after block",
            bits.len() - r.pos
        )));
    }
    Ok((mask, cells))
}

/// Transmitter-side view of a block: an Ack per decodable slot and the
/// reported (upper-edge) SNR for every other slot.
pub fn decode_feedback_block(
    block: &FeedbackBlock,
    config: &QuantizerConfig,
) -> Result<Vec<SlotFeedback>> {
    decode_feedback_bits(&block.encoded_bits, config)
}

pub fn decode_feedback_bits(
    bits: &BitSlice<u8, Msb0>,
    config: &QuantizerConfig,
) -> Result<Vec<SlotFeedback>> {
    let (mask, cells) = decode_block_bits(bits, config)?;
    let mut cells = cells.into_iter();
    Ok(mask
        .into_iter()
        .map(|ok| {
            if ok {
                SlotFeedback::Ack
            } else {
                SlotFeedback::QuantizedSnr(
                    config.representative(cells.next().expect("cell per failure")),
                )
            }
        })
        .collect())
}

/// Picks the finest grid `d = threshold / 2^b` for which a block with every
/// slot in outage fits in `floor(L F)` bits.
pub fn plan_cell_width(
    feedback_bits: f64,
    block_len: usize,
    decode_prob: f64,
    threshold: f64,
) -> Result<f64> {
    plan_quantizer(feedback_bits, block_len, decode_prob, threshold).map(|c| c.cell_width)
}

pub fn plan_quantizer(
    feedback_bits: f64,
    block_len: usize,
    decode_prob: f64,
    threshold: f64,
) -> Result<QuantizerConfig> {
    let h = binary_entropy(decode_prob)?;
    if !(feedback_bits > h) {
        return Err(BrqError::InsufficientFeedback {
            feedback_bits,
            entropy: h,
        });
    }
    let probe = QuantizerConfig::new(feedback_bits, block_len, threshold, threshold)?;
    let budget = probe.budget_bits();
    let count = probe.count_bits();
    if count > budget {
        return Err(BrqError::InsufficientFeedback {
            feedback_bits,
            entropy: h,
        });
    }
    let cell_bits = ((budget - count) / block_len).min(MAX_CELL_BITS);
    let width = threshold / (1u64 << cell_bits) as f64;
    QuantizerConfig::new(feedback_bits, block_len, threshold, width)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cfg(f: f64, l: usize, thr: f64, d: f64) -> QuantizerConfig {
        QuantizerConfig::new(f, l, thr, d).unwrap()
    }

    #[test]
    fn effective_snr_examples() {
        assert_eq!(effective_snr(5.0, 2.0), 3.0);
        assert_eq!(effective_snr(1.0, 2.0), 0.0);
        let (g, d) = (4.25, 0.75);
        assert_eq!(effective_snr(g + d, d), g);
    }

    #[test]
    fn quantize_examples() {
        let c = cfg(2.0, 4, 3.0, 1.0);
        assert_eq!(c.cells, 3);
        assert_eq!(quantize_snr(0.0, &c).unwrap(), 0);
        assert_eq!(c.representative(0), 1.0);
        assert_eq!(effective_snr(c.representative(0), 1.0), 0.0);
        let k = quantize_snr(2.5, &c).unwrap();
        assert_eq!(k, 2);
        assert_eq!(c.representative(k), 3.0);
        assert_eq!(effective_snr(3.0, 1.0), 2.0);
        assert!(quantize_snr(3.0, &c).is_err());
        assert!(quantize_snr(-0.1, &c).is_err());
    }

    #[test]
    fn fidelity_holds_on_random_samples() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100_000 {
            let thr: f64 = rng.random_range(0.1..100.0);
            let d: f64 = thr / rng.random_range(1.0..1000.0);
            let c = cfg(4.0, 8, thr, d);
            let g = rng.random_range(0.0..thr);
            let k = quantize_snr(g, &c).unwrap();
            let eff = effective_snr(c.representative(k), c.cell_width);
            assert!(eff <= g, "eff={eff} g={g}");
            assert!(
                g < eff + c.cell_width * (1.0 + 1e-12),
                "g={g} eff={eff} d={d}"
            );
        }
    }

    #[test]
    fn all_success_costs_mask_only() {
        let c = cfg(2.0, 4, 3.0, 1.0);
        let b = encode_feedback_block(&[5.0, 3.0, 9.0, 4.0], &c).unwrap();
        assert!(b.cell_indices.is_empty());
        // count (3 bits) + rank of the single full pattern (0 bits)
        assert_eq!(b.encoded_bits.len(), 3);
        assert_eq!(
            decode_feedback_block(&b, &c).unwrap(),
            vec![SlotFeedback::Ack; 4]
        );
    }

    #[test]
    fn worked_block_exceeds_budget() {
        // mask (1,0,0,0): 3 count bits + 2 rank bits + 3 cells x 2 bits = 11 > 8
        let c = cfg(2.0, 4, 3.0, 1.0);
        assert_eq!(c.cells, 3);
        assert_eq!(c.cell_bits(), 2);
        assert_eq!(
            encode_feedback_block(&[4.0, 0.2, 2.9, 1.1], &c),
            Err(BrqError::BudgetExceeded {
                needed: 11,
                budget: 8
            })
        );
    }

    #[test]
    fn worked_block_fits_with_coarser_cells() {
        // d = 1.5: K = 2, one bit per cell, 3 + 2 + 3 = 8 bits.
        let c = cfg(2.0, 4, 3.0, 1.5);
        let b = encode_feedback_block(&[4.0, 0.2, 2.9, 1.1], &c).unwrap();
        assert_eq!(b.success_mask, vec![true, false, false, false]);
        assert_eq!(b.cell_indices, vec![0, 1, 0]);
        // k=1 -> 001, rank of {0} = C(0,1) = 0 -> 00, cells 0 1 0
        assert_eq!(b.encoded_bits, bits![u8, Msb0; 0, 0, 1, 0, 0, 0, 1, 0]);
        assert_eq!(
            decode_feedback_block(&b, &c).unwrap(),
            vec![
                SlotFeedback::Ack,
                SlotFeedback::QuantizedSnr(1.5),
                SlotFeedback::QuantizedSnr(3.0),
                SlotFeedback::QuantizedSnr(1.5),
            ]
        );
        // K = 1 (d = 3): mask only.
        let c1 = cfg(2.0, 4, 3.0, 3.0);
        let b1 = encode_feedback_block(&[4.0, 0.2, 2.9, 1.1], &c1).unwrap();
        assert_eq!(b1.encoded_bits.len(), 5);
        assert_eq!(
            decode_block_bits(&b1.encoded_bits, &c1).unwrap().1,
            vec![0, 0, 0]
        );
    }

    #[test]
    fn malformed_blocks_rejected() {
        let c = cfg(2.0, 4, 3.0, 1.5);
        let b = encode_feedback_block(&[4.0, 0.2, 2.9, 1.1], &c).unwrap();
        let mut short = b.encoded_bits.clone();
        short.pop();
        assert!(matches!(
            decode_feedback_bits(&short, &c),
            Err(BrqError::DecodeError(_))
        ));
        let mut long = b.encoded_bits.clone();
        long.push(false);
        assert!(matches!(
            decode_feedback_bits(&long, &c),
            Err(BrqError::DecodeError(_))
        ));
        // count field 7 > L = 4
        let bad = bits![u8, Msb0; 1, 1, 1];
        assert!(matches!(
            decode_feedback_bits(bad, &c),
            Err(BrqError::DecodeError(_))
        ));
        assert!(matches!(
            decode_feedback_bits(bits![u8, Msb0;], &c),
            Err(BrqError::DecodeError(_))
        ));
    }

    #[test]
    fn roundtrip_random_blocks() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for i in 0..10_000 {
            let l = 2 + i % 70;
            let thr = 20.0;
            let c = cfg(40.0, l, thr, thr / 64.0);
            let snrs: Vec<f64> = (0..l).map(|_| rng.random_range(0.0..30.0)).collect();
            let b = encode_feedback_block(&snrs, &c).unwrap();
            assert!(b.encoded_bits.len() <= c.budget_bits());
            let (mask, cells) = decode_block_bits(&b.encoded_bits, &c).unwrap();
            assert_eq!(mask, b.success_mask);
            assert_eq!(cells, b.cell_indices);
        }
    }

    #[test]
    fn plan_examples() {
        let p = (-2f64).exp();
        let d = plan_cell_width(8.0, 64, p, 21.0).unwrap();
        // Brute force over K = 2^b: the finest grid whose all-outage block fits.
        let budget = (64.0 * 8.0f64).floor() as usize;
        let best_b = (0..=MAX_CELL_BITS)
            .filter(|b| 7 + 64 * b <= budget)
            .max()
            .unwrap();
        assert_eq!(best_b, 7);
        assert_eq!(d, 21.0 / 128.0);
        let h = binary_entropy(p).unwrap();
        assert!(matches!(
            plan_cell_width(h, 64, p, 21.0),
            Err(BrqError::InsufficientFeedback { .. })
        ));
        // F = 1 with L = 64: K = 1 is all that fits.
        let d1 = plan_cell_width(1.0, 64, p, 20.0).unwrap();
        assert_eq!(d1, 20.0);
        let c = QuantizerConfig::new(1.0, 64, 20.0, d1).unwrap();
        assert_eq!(c.cells, 1);
        assert_eq!(
            effective_snr(c.representative(quantize_snr(19.9, &c).unwrap()), d1),
            0.0
        );
        // Budget below the count field.
        assert!(matches!(
            plan_cell_width(0.05, 64, 0.0, 20.0),
            Err(BrqError::InsufficientFeedback { .. })
        ));
    }

    #[test]
    fn all_outage_block_fits_planned_budget() {
        let p = (-2f64).exp();
        for f in [1.0, 2.0, 3.5, 8.0] {
            for l in [2, 3, 8, 16, 64, 100] {
                let c = plan_quantizer(f, l, p, 20.0).unwrap();
                assert!(encoded_len(&c, 0) <= c.budget_bits(), "f={f} l={l}");
            }
        }
    }

    proptest! {
        #[test]
        fn plan_nonincreasing_in_feedback(f1 in 0.7f64..20.0, df in 0.0f64..10.0, lexp in 1u32..8) {
            let l = 1usize << lexp;
            let p = (-2f64).exp();
            let a = plan_cell_width(f1, l, p, 20.0);
            let b = plan_cell_width(f1 + df, l, p, 20.0);
            if let (Ok(a), Ok(b)) = (&a, &b) {
                prop_assert!(b <= a);
            }
            prop_assert!(!(a.is_ok() && b.is_err()));
        }

        #[test]
        fn plan_nonincreasing_in_dyadic_block_length(f in 0.7f64..20.0, lexp in 1u32..9) {
            let p = (-2f64).exp();
            let a = plan_cell_width(f, 1 << lexp, p, 20.0);
            let b = plan_cell_width(f, 1 << (lexp + 1), p, 20.0);
            if let (Ok(a), Ok(b)) = (&a, &b) {
                prop_assert!(b <= a);
            }
            prop_assert!(!(a.is_ok() && b.is_err()));
        }

        #[test]
        fn encode_decode_roundtrip(snrs in proptest::collection::vec(0.0f64..40.0, 2..40), kb in 0u32..8) {
            let c = cfg(64.0, snrs.len(), 20.0, 20.0 / (1u64 << kb) as f64);
            let b = encode_feedback_block(&snrs, &c).unwrap();
            let fb = decode_feedback_block(&b, &c).unwrap();
            for (g, f) in snrs.iter().zip(fb) {
                match f {
                    SlotFeedback::Ack => prop_assert!(*g >= 20.0),
                    SlotFeedback::QuantizedSnr(rep) => {
                        prop_assert!(*g < 20.0);
                        prop_assert!(effective_snr(rep, c.cell_width) <= *g);
                    }
                }
            }
        }
    }
}
