use alloc::vec::Vec;

use super::bitpack::{and_popcount_into, scatter_bits};
use super::tensor::{CorrelationTensor, Normalization};
use crate::error::{Error, Result};
use crate::float::{comp_add, two_sum};
use crate::frame::{Frame, Payload, PayloadKind};

/// Frames per transposed block of the binary path.
const BLOCK: u32 = 64;

/// Raw moments of an accumulator with compensation folded in.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentSums {
    pub frames: u64,
    pub sum_a: Vec<f64>,
    pub sum_b: Vec<f64>,
    /// `rho_b`-major outer-product sums.
    pub sum_ab: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
struct AnalogSums {
    sum_a: Vec<f64>,
    comp_a: Vec<f64>,
    sum_b: Vec<f64>,
    comp_b: Vec<f64>,
    sum_ab: Vec<f64>,
    comp_ab: Vec<f64>,
    scratch_a: Vec<f64>,
    scratch_b: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
struct BinarySums {
    sum_a: Vec<u64>,
    sum_b: Vec<u64>,
    totals: Vec<u64>,
    /// 32-bit coincidence lanes, spilled into `totals` before they can overflow.
    lanes: Vec<u32>,
    /// Upper bound on any lane value since the last spill.
    lane_load: u64,
    block_a: Vec<u64>,
    block_b: Vec<u64>,
    block_len: u32,
}

#[derive(Debug, Clone, PartialEq)]
enum State {
    Analog(AnalogSums),
    Binary(BinarySums),
}

/// Streaming, mergeable moment accumulator for the correlation function.
///
/// Sensor-B frames may be sum-pooled into `binning x binning` macro-pixels
/// before the outer product; the resulting tensor has the binned sensor-B
/// dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationAccumulator {
    dims_a: (usize, usize),
    dims_b: (usize, usize),
    binning: usize,
    kind: PayloadKind,
    frames: u64,
    bin_of: Vec<u32>,
    state: State,
}

impl CorrelationAccumulator {
    pub fn new(
        dims_a: (usize, usize),
        dims_b: (usize, usize),
        kind: PayloadKind,
        binning: usize,
    ) -> Result<Self> {
        if dims_a.0 * dims_a.1 == 0 || dims_b.0 * dims_b.1 == 0 {
            return Err(Error::DimensionMismatch(
                "sensor dims must be nonzero".into(),
            ));
        }
        if binning == 0 || dims_b.0 % binning != 0 || dims_b.1 % binning != 0 {
            return Err(Error::InvalidParameter {
                name: "binning",
                reason: alloc::format!(
                    "factor {binning} does not divide the {}x{} sensor",
                    dims_b.0,
                    dims_b.1
                ),
            });
        }
        let na = dims_a.0 * dims_a.1;
        let bw = dims_b.0 / binning;
        let nb = bw * (dims_b.1 / binning);
        let bin_of = (0..dims_b.0 * dims_b.1)
            .map(|k| {
                let (i, j) = (k % dims_b.0, k / dims_b.0);
                ((j / binning) * bw + i / binning) as u32
            })
            .collect();
        let state = match kind {
            PayloadKind::Analog => State::Analog(AnalogSums {
                sum_a: alloc::vec![0.0; na],
                comp_a: alloc::vec![0.0; na],
                sum_b: alloc::vec![0.0; nb],
                comp_b: alloc::vec![0.0; nb],
                sum_ab: alloc::vec![0.0; na * nb],
                comp_ab: alloc::vec![0.0; na * nb],
                scratch_a: alloc::vec![0.0; na],
                scratch_b: alloc::vec![0.0; nb],
            }),
            PayloadKind::Binary => State::Binary(BinarySums {
                sum_a: alloc::vec![0; na],
                sum_b: alloc::vec![0; nb],
                totals: alloc::vec![0; na * nb],
                lanes: alloc::vec![0; na * nb],
                lane_load: 0,
                block_a: alloc::vec![0; na],
                block_b: alloc::vec![0; dims_b.0 * dims_b.1],
                block_len: 0,
            }),
        };
        Ok(Self {
            dims_a,
            dims_b,
            binning,
            kind,
            frames: 0,
            bin_of,
            state,
        })
    }

    pub fn frames(&self) -> u64 {
        self.frames
    }

    pub fn kind(&self) -> PayloadKind {
        self.kind
    }

    pub fn binning(&self) -> usize {
        self.binning
    }

    pub fn dims_a(&self) -> (usize, usize) {
        self.dims_a
    }

    /// Sensor-B dims before binning.
    pub fn dims_b(&self) -> (usize, usize) {
        self.dims_b
    }

    pub fn binned_dims_b(&self) -> (usize, usize) {
        (self.dims_b.0 / self.binning, self.dims_b.1 / self.binning)
    }

    fn pixels_a(&self) -> usize {
        self.dims_a.0 * self.dims_a.1
    }

    fn check_frames(&self, a: &Frame, b: &Frame) -> Result<()> {
        if (a.width(), a.height()) != self.dims_a || (b.width(), b.height()) != self.dims_b {
            return Err(Error::DimensionMismatch(alloc::format!(
                "frames {}x{} / {}x{} do not match accumulator {:?} / {:?}",
                a.width(),
                a.height(),
                b.width(),
                b.height(),
                self.dims_a,
                self.dims_b
            )));
        }
        if a.kind() != self.kind || b.kind() != self.kind {
            return Err(Error::PayloadMismatch);
        }
        Ok(())
    }

    /// Adds one frame pair.
    pub fn accumulate(&mut self, a: &Frame, b: &Frame) -> Result<()> {
        self.check_frames(a, b)?;
        let na = self.pixels_a();
        let (aw, ah) = self.dims_a;
        let (bw, bh) = self.dims_b;
        match &mut self.state {
            State::Analog(s) => {
                a.write_f64(&mut s.scratch_a);
                s.scratch_b.iter_mut().for_each(|v| *v = 0.0);
                match b.payload() {
                    Payload::Analog(v) => {
                        for (k, x) in v.iter().enumerate() {
                            s.scratch_b[self.bin_of[k] as usize] += *x as f64;
                        }
                    }
                    Payload::Binary(_) => {
                        for (k, x) in b.to_f64().iter().enumerate() {
                            s.scratch_b[self.bin_of[k] as usize] += x;
                        }
                    }
                }
                for (k, x) in s.scratch_a.iter().enumerate() {
                    comp_add(&mut s.sum_a[k], &mut s.comp_a[k], *x);
                }
                for (k, x) in s.scratch_b.iter().enumerate() {
                    comp_add(&mut s.sum_b[k], &mut s.comp_b[k], *x);
                }
                for (ib, &vb) in s.scratch_b.iter().enumerate() {
                    let sums = &mut s.sum_ab[ib * na..(ib + 1) * na];
                    let comps = &mut s.comp_ab[ib * na..(ib + 1) * na];
                    for ((sv, cv), &va) in sums.iter_mut().zip(comps.iter_mut()).zip(&s.scratch_a) {
                        comp_add(sv, cv, vb * va);
                    }
                }
            }
            State::Binary(s) => {
                let (Payload::Binary(pa), Payload::Binary(pb)) = (a.payload(), b.payload()) else {
                    return Err(Error::PayloadMismatch);
                };
                scatter_bits(&mut s.block_a, pa, aw, ah, s.block_len);
                scatter_bits(&mut s.block_b, pb, bw, bh, s.block_len);
                s.block_len += 1;
                if s.block_len == BLOCK {
                    flush_block(s, &self.bin_of, na, self.binning);
                }
            }
        }
        self.frames += 1;
        Ok(())
    }

    /// Pushes any partially filled binary block into the counters.
    pub fn flush(&mut self) {
        let na = self.pixels_a();
        if let State::Binary(s) = &mut self.state {
            flush_block(s, &self.bin_of, na, self.binning);
            spill_lanes(s);
        }
    }

    /// Combines two accumulators over disjoint frame sets.
    pub fn merge(mut self, mut other: Self) -> Result<Self> {
        if self.dims_a != other.dims_a
            || self.dims_b != other.dims_b
            || self.binning != other.binning
        {
            return Err(Error::DimensionMismatch(
                "accumulator layouts differ".into(),
            ));
        }
        if self.kind != other.kind {
            return Err(Error::PayloadMismatch);
        }
        self.flush();
        other.flush();
        match (&mut self.state, &other.state) {
            (State::Analog(x), State::Analog(y)) => {
                merge_comp(&mut x.sum_a, &mut x.comp_a, &y.sum_a, &y.comp_a);
                merge_comp(&mut x.sum_b, &mut x.comp_b, &y.sum_b, &y.comp_b);
                merge_comp(&mut x.sum_ab, &mut x.comp_ab, &y.sum_ab, &y.comp_ab);
            }
            (State::Binary(x), State::Binary(y)) => {
                add_u64(&mut x.sum_a, &y.sum_a);
                add_u64(&mut x.sum_b, &y.sum_b);
                add_u64(&mut x.totals, &y.totals);
            }
            _ => return Err(Error::PayloadMismatch),
        }
        self.frames += other.frames;
        Ok(self)
    }

    /// Current moments (pending binary blocks included).
    pub fn moments(&self) -> MomentSums {
        match &self.state {
            State::Analog(s) => MomentSums {
                frames: self.frames,
                sum_a: fold(&s.sum_a, &s.comp_a),
                sum_b: fold(&s.sum_b, &s.comp_b),
                sum_ab: fold(&s.sum_ab, &s.comp_ab),
            },
            State::Binary(_) => {
                let (sa, sb, sab) = self.binary_counts();
                MomentSums {
                    frames: self.frames,
                    sum_a: sa.iter().map(|&v| v as f64).collect(),
                    sum_b: sb.iter().map(|&v| v as f64).collect(),
                    sum_ab: sab.iter().map(|&v| v as f64).collect(),
                }
            }
        }
    }

    /// Exact integer moments of a binary accumulator, `(sum_a, sum_b, sum_ab)`.
    ///
    /// # Panics
    /// On an analog accumulator.
    pub fn binary_counts(&self) -> (Vec<u64>, Vec<u64>, Vec<u64>) {
        let mut tmp = self.clone();
        tmp.flush();
        match tmp.state {
            State::Binary(s) => (s.sum_a, s.sum_b, s.totals),
            State::Analog(_) => panic!("binary_counts on an analog accumulator"),
        }
    }

    /// Per-pixel mean of the sensor-A frames seen so far.
    pub fn mean_a(&self) -> Vec<f64> {
        let n = self.frames.max(1) as f64;
        match &self.state {
            State::Analog(s) => fold(&s.sum_a, &s.comp_a).iter().map(|v| v / n).collect(),
            State::Binary(s) => s
                .sum_a
                .iter()
                .zip(&s.block_a)
                .map(|(&t, w)| (t + w.count_ones() as u64) as f64 / n)
                .collect(),
        }
    }

    /// `Gamma = sum_ab / N - (sum_a / N)(sum_b / N)`; needs `N >= 2`.
    pub fn finalize(&self) -> Result<CorrelationTensor> {
        if self.frames < 2 {
            return Err(Error::NotEnoughFrames {
                needed: 2,
                have: self.frames,
            });
        }
        let m = self.moments();
        let n = self.frames as f64;
        let na = self.pixels_a();
        let mut data = alloc::vec![0.0; m.sum_ab.len()];
        for (ib, &sb) in m.sum_b.iter().enumerate() {
            let mb = sb / n;
            let row = &m.sum_ab[ib * na..(ib + 1) * na];
            for ((g, &sab), &sa) in data[ib * na..(ib + 1) * na]
                .iter_mut()
                .zip(row)
                .zip(&m.sum_a)
            {
                *g = sab / n - (sa / n) * mb;
            }
        }
        CorrelationTensor::new(
            self.dims_a,
            self.binned_dims_b(),
            self.frames,
            Normalization::Raw,
            data,
        )
    }
}

fn fold(s: &[f64], c: &[f64]) -> Vec<f64> {
    s.iter().zip(c).map(|(a, b)| a + b).collect()
}

fn merge_comp(s: &mut [f64], c: &mut [f64], os: &[f64], oc: &[f64]) {
    for (((s, c), os), oc) in s.iter_mut().zip(c.iter_mut()).zip(os).zip(oc) {
        let (sum, err) = two_sum(*s, *os);
        *s = sum;
        *c = (*c + *oc) + err;
    }
}

fn add_u64(x: &mut [u64], y: &[u64]) {
    for (a, b) in x.iter_mut().zip(y) {
        *a += b;
    }
}

fn flush_block(s: &mut BinarySums, bin_of: &[u32], na: usize, binning: usize) {
    if s.block_len == 0 {
        return;
    }
    // a lane of a binned pixel can gain binning^2 counts per frame
    let per_block = s.block_len as u64 * (binning * binning) as u64;
    if s.lane_load + per_block > u32::MAX as u64 {
        spill_lanes(s);
    }
    for (sa, w) in s.sum_a.iter_mut().zip(&s.block_a) {
        *sa += w.count_ones() as u64;
    }
    for (ib, &tb) in s.block_b.iter().enumerate() {
        if tb == 0 {
            continue;
        }
        let bin = bin_of[ib] as usize;
        s.sum_b[bin] += tb.count_ones() as u64;
        and_popcount_into(&mut s.lanes[bin * na..(bin + 1) * na], &s.block_a, tb);
    }
    s.lane_load += per_block;
    s.block_a.iter_mut().for_each(|w| *w = 0);
    s.block_b.iter_mut().for_each(|w| *w = 0);
    s.block_len = 0;
}

fn spill_lanes(s: &mut BinarySums) {
    if s.lane_load == 0 {
        return;
    }
    for (t, l) in s.totals.iter_mut().zip(s.lanes.iter_mut()) {
        *t += *l as u64;
        *l = 0;
    }
    s.lane_load = 0;
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::SensorTag;
    use alloc::vec;

    fn ones(w: usize, h: usize, tag: SensorTag, k: u64) -> Frame {
        Frame::from_bits(w, h, k, tag, &vec![1; w * h])
    }

    #[test]
    fn identical_all_ones_pairs() {
        let mut acc = CorrelationAccumulator::new((3, 2), (2, 2), PayloadKind::Binary, 1).unwrap();
        for k in 0..70 {
            acc.accumulate(&ones(3, 2, SensorTag::A, k), &ones(2, 2, SensorTag::B, k))
                .unwrap();
        }
        let (_, _, sab) = acc.binary_counts();
        assert!(sab.iter().all(|&v| v == 70));
        assert_eq!(acc.frames(), 70);
        let g = acc.finalize().unwrap();
        assert!(g.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn finalize_needs_two_frames() {
        let mut acc = CorrelationAccumulator::new((1, 1), (1, 1), PayloadKind::Binary, 1).unwrap();
        assert!(matches!(acc.finalize(), Err(Error::NotEnoughFrames { .. })));
        acc.accumulate(&ones(1, 1, SensorTag::A, 0), &ones(1, 1, SensorTag::B, 0))
            .unwrap();
        assert!(acc.finalize().is_err());
    }

    #[test]
    fn mismatched_frames_rejected() {
        let mut acc = CorrelationAccumulator::new((2, 2), (2, 2), PayloadKind::Binary, 1).unwrap();
        let a = ones(2, 1, SensorTag::A, 0);
        let b = ones(2, 2, SensorTag::B, 0);
        assert!(matches!(
            acc.accumulate(&a, &b),
            Err(Error::DimensionMismatch(_))
        ));
        let a = ones(2, 2, SensorTag::A, 0).to_analog();
        assert_eq!(acc.accumulate(&a, &b), Err(Error::PayloadMismatch));
        let other = CorrelationAccumulator::new((2, 2), (2, 2), PayloadKind::Analog, 1).unwrap();
        assert_eq!(acc.merge(other), Err(Error::PayloadMismatch));
    }

    #[test]
    fn binning_must_divide() {
        assert!(CorrelationAccumulator::new((2, 2), (4, 4), PayloadKind::Analog, 3).is_err());
        let acc = CorrelationAccumulator::new((2, 2), (4, 4), PayloadKind::Analog, 2).unwrap();
        assert_eq!(acc.binned_dims_b(), (2, 2));
    }

    #[test]
    fn binned_binary_matches_binned_analog() {
        let mut bin = CorrelationAccumulator::new((3, 1), (4, 2), PayloadKind::Binary, 2).unwrap();
        let mut ana = CorrelationAccumulator::new((3, 1), (4, 2), PayloadKind::Analog, 2).unwrap();
        let mut s = 99u64;
        let mut bit = || {
            s = s
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            (s >> 62 == 0) as u8
        };
        for k in 0..150 {
            let ab: Vec<u8> = (0..3).map(|_| bit()).collect();
            let bb: Vec<u8> = (0..8).map(|_| bit()).collect();
            let fa = Frame::from_bits(3, 1, k, SensorTag::A, &ab);
            let fb = Frame::from_bits(4, 2, k, SensorTag::B, &bb);
            bin.accumulate(&fa, &fb).unwrap();
            ana.accumulate(&fa.to_analog(), &fb.to_analog()).unwrap();
        }
        assert_eq!(bin.moments(), ana.moments());
        assert_eq!(bin.finalize().unwrap(), ana.finalize().unwrap());
    }

    #[test]
    fn lanes_spill_before_overflow() {
        let mut s = BinarySums {
            sum_a: vec![0],
            sum_b: vec![0],
            totals: vec![0],
            lanes: vec![u32::MAX - 10],
            lane_load: u32::MAX as u64 - 10,
            block_a: vec![u64::MAX],
            block_b: vec![u64::MAX],
            block_len: 64,
        };
        flush_block(&mut s, &[0], 1, 1);
        assert_eq!(s.totals[0], u32::MAX as u64 - 10);
        assert_eq!(s.lanes[0], 64);
        assert_eq!(s.lane_load, 64);
    }
}
