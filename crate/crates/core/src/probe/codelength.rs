use serde::{Deserialize, Serialize};

use super::schedule::TransmissionSchedule;
use super::{Classifier, Example, ProbeError, ProbeTrainer};
use crate::seed::RunSeed;

/// Probabilities are floored here before taking logs.
pub const PROB_FLOOR: f64 = 1e-12;

/// Cost of sending `n` labels with no model: `n * log2(k)` bits.
pub fn uniform_codelength(n: usize, k: usize) -> f64 {
    if k.is_power_of_two() {
        // exact for the common case
        (n as f64) * (k.trailing_zeros() as f64)
    } else {
        n as f64 * (k as f64).log2()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockCode {
    pub start: usize,
    pub end: usize,
    pub bits: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OnlineCode {
    pub bits: f64,
    /// The first block, sent with the uniform code, followed by one entry
    /// per retrained model.
    pub blocks: Vec<BlockCode>,
    pub clamped: usize,
}

/// Bits to send the labels of `examples` with `model`.
pub fn block_bits(model: &dyn Classifier, examples: &[Example]) -> (f64, usize) {
    let mut bits = 0.0;
    let mut clamped = 0;
    for ex in examples {
        let p = model.predict_proba(&ex.x)[ex.y];
        if p < PROB_FLOOR {
            clamped += 1;
        }
        bits -= p.max(PROB_FLOOR).log2();
    }
    (bits, clamped)
}

/// Online (prequential) codelength of the label stream.
///
/// The first block goes out with the uniform code. Each later block is
/// coded by a model trained from scratch on everything sent before it.
/// Model `i` is seeded from `seed` and `i` alone, so a receiver holding
/// the same seed can rebuild it.
pub fn online_codelength(
    stream: &[Example],
    k: usize,
    schedule: &TransmissionSchedule,
    trainer: &dyn ProbeTrainer,
    val: &[Example],
    seed: RunSeed,
) -> Result<OnlineCode, ProbeError> {
    let cuts = schedule.boundaries(stream.len());
    let Some(&first) = cuts.first() else {
        return Err(ProbeError::Empty("training stream".into()));
    };
    let mut blocks = vec![BlockCode {
        start: 0,
        end: first,
        bits: uniform_codelength(first, k),
    }];
    let mut clamped = 0;
    for (i, w) in cuts.windows(2).enumerate() {
        let (start, end) = (w[0], w[1]);
        let model = trainer.fit(&stream[..start], val, seed.child(&format!("block{i}")))?;
        let (bits, c) = block_bits(model.as_ref(), &stream[start..end]);
        clamped += c;
        blocks.push(BlockCode { start, end, bits });
    }
    if clamped > 0 {
        tracing::warn!(clamped, "label probabilities floored at {PROB_FLOOR}");
    }
    Ok(OnlineCode {
        bits: blocks.iter().map(|b| b.bits).sum(),
        blocks,
        clamped,
    })
}
