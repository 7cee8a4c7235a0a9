//! Accumulation throughput of the float and bit-packed correlation paths.

use std::time::Instant;

use rand::RngCore;

use cpi_core::rng::{keyed_rng, Domain};
use cpi_core::{
    CorrelationAccumulator, CorrelationTensor, Error, Frame, FramePairStream, Normalization,
    PayloadKind, Result, SensorTag, StreamMeta,
};

/// Smallest stream worth timing.
pub const MIN_FRAMES: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BenchMode {
    /// Per-pixel `f64` products summed into a dense outer-product array.
    NaiveFloat,
    BitPacked,
}

impl BenchMode {
    pub fn name(self) -> &'static str {
        match self {
            BenchMode::NaiveFloat => "naive-float",
            BenchMode::BitPacked => "bit-packed",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Throughput {
    pub mode: BenchMode,
    pub frames: usize,
    pub seconds: f64,
    pub frames_per_sec: f64,
    /// Packed bytes of one (A, B) pair as stored on disk.
    pub pair_bytes: usize,
    pub bytes_per_sec: f64,
}

/// Times one accumulation pass over a binary stream and returns the
/// finalised tensor along with the throughput.
pub fn bench_accumulate(
    stream: &FramePairStream,
    mode: BenchMode,
) -> Result<(Throughput, CorrelationTensor)> {
    let Some((a0, b0)) = stream.pairs().first() else {
        return Err(Error::Empty("benchmark stream"));
    };
    if stream.len() < MIN_FRAMES {
        return Err(Error::NotEnoughFrames {
            needed: MIN_FRAMES as u64,
            have: stream.len() as u64,
        });
    }
    if a0.kind() != PayloadKind::Binary {
        return Err(Error::PayloadMismatch);
    }
    let dims_a = (a0.width(), a0.height());
    let dims_b = (b0.width(), b0.height());
    let start = Instant::now();
    let tensor = match mode {
        BenchMode::NaiveFloat => naive_float(stream, dims_a, dims_b)?,
        BenchMode::BitPacked => {
            let mut acc = CorrelationAccumulator::new(dims_a, dims_b, PayloadKind::Binary, 1)?;
            for (a, b) in stream.pairs() {
                acc.accumulate(a, b)?;
            }
            acc.flush();
            acc.finalize()?
        }
    };
    let seconds = start.elapsed().as_secs_f64();
    let pair_bytes = a0.payload_bytes() + b0.payload_bytes();
    let frames_per_sec = stream.len() as f64 / seconds;
    Ok((
        Throughput {
            mode,
            frames: stream.len(),
            seconds,
            frames_per_sec,
            pair_bytes,
            bytes_per_sec: frames_per_sec * pair_bytes as f64,
        },
        tensor,
    ))
}

/// Plain float accumulation: unpack each frame to `f64` and add every
/// product `a * b` into a dense array.
fn naive_float(
    stream: &FramePairStream,
    dims_a: (usize, usize),
    dims_b: (usize, usize),
) -> Result<CorrelationTensor> {
    let na = dims_a.0 * dims_a.1;
    let nb = dims_b.0 * dims_b.1;
    let mut sum_a = vec![0.0f64; na];
    let mut sum_b = vec![0.0f64; nb];
    let mut sum_ab = vec![0.0f64; na * nb];
    let mut fa = vec![0.0f64; na];
    let mut fb = vec![0.0f64; nb];
    for (a, b) in stream.pairs() {
        a.write_f64(&mut fa);
        b.write_f64(&mut fb);
        for (s, v) in sum_a.iter_mut().zip(&fa) {
            *s += v;
        }
        for (s, v) in sum_b.iter_mut().zip(&fb) {
            *s += v;
        }
        for (ib, &vb) in fb.iter().enumerate() {
            for (s, &va) in sum_ab[ib * na..(ib + 1) * na].iter_mut().zip(&fa) {
                *s += va * vb;
            }
        }
    }
    let n = stream.len() as f64;
    let mut data = vec![0.0; na * nb];
    for (ib, &sb) in sum_b.iter().enumerate() {
        let mb = sb / n;
        for ((g, &sab), &sa) in data[ib * na..(ib + 1) * na]
            .iter_mut()
            .zip(&sum_ab[ib * na..])
            .zip(&sum_a)
        {
            *g = sab / n - (sa / n) * mb;
        }
    }
    CorrelationTensor::new(
        dims_a,
        dims_b,
        stream.len() as u64,
        Normalization::Raw,
        data,
    )
}

/// Uniformly random binary frames (each pixel 1 with probability 1/2).
pub fn random_binary_stream(
    frames: usize,
    dims_a: (usize, usize),
    dims_b: (usize, usize),
    seed: u64,
) -> Result<FramePairStream> {
    let make = |w: usize, h: usize, tag: SensorTag, k: u64, rng: &mut rand_chacha::ChaCha8Rng| {
        let rb = w.div_ceil(8);
        let mut bytes = vec![0u8; rb * h];
        rng.fill_bytes(&mut bytes);
        if w % 8 != 0 {
            let keep = (1u8 << (w % 8)) - 1;
            for row in bytes.chunks_exact_mut(rb) {
                row[rb - 1] &= keep;
            }
        }
        Frame::binary(w, h, k, tag, bytes)
    };
    let pairs = (0..frames as u64)
        .map(|k| {
            let mut rng = keyed_rng(seed, Domain::Synthetic, k);
            Ok((
                make(dims_a.0, dims_a.1, SensorTag::A, k, &mut rng)?,
                make(dims_b.0, dims_b.1, SensorTag::B, k, &mut rng)?,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    FramePairStream::new(
        StreamMeta {
            seed,
            ..StreamMeta::default()
        },
        pairs,
    )
}
