//! Per-shot sensor frames and paired frame streams.
//!
//! Binary payloads are bit-packed row-major, least significant bit first;
//! each row is padded to a whole byte and padding bits are always zero.

use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Which sensor produced a frame. `Image` tags derived 2D maps that reuse
/// the frame container (refocused images, reconstructions).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SensorTag {
    A,
    B,
    Image,
}

impl SensorTag {
    pub fn code(self) -> u8 {
        match self {
            SensorTag::A => 0,
            SensorTag::B => 1,
            SensorTag::Image => 2,
        }
    }

    pub fn from_code(c: u8) -> Option<Self> {
        match c {
            0 => Some(SensorTag::A),
            1 => Some(SensorTag::B),
            2 => Some(SensorTag::Image),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PayloadKind {
    Analog,
    Binary,
}

impl PayloadKind {
    pub fn code(self) -> u8 {
        match self {
            PayloadKind::Analog => 0,
            PayloadKind::Binary => 1,
        }
    }

    pub fn from_code(c: u8) -> Option<Self> {
        match c {
            0 => Some(PayloadKind::Analog),
            1 => Some(PayloadKind::Binary),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    /// Mean photons per pixel per exposure.
    Analog(Vec<f32>),
    /// Packed bits, `height * row_bytes(width)` bytes.
    Binary(Vec<u8>),
}

/// Bytes per packed row.
#[inline]
pub fn row_bytes(width: usize) -> usize {
    width.div_ceil(8)
}

/// Packs one 0/1 value per pixel (any nonzero counts as 1).
pub fn pack_bits(width: usize, height: usize, bits: &[u8]) -> Vec<u8> {
    assert_eq!(bits.len(), width * height);
    let rb = row_bytes(width);
    let mut out = alloc::vec![0u8; rb * height];
    for j in 0..height {
        let row = &bits[j * width..(j + 1) * width];
        let dst = &mut out[j * rb..(j + 1) * rb];
        for (i, &b) in row.iter().enumerate() {
            if b != 0 {
                dst[i >> 3] |= 1 << (i & 7);
            }
        }
    }
    out
}

/// Inverse of [`pack_bits`].
pub fn unpack_bits(width: usize, height: usize, packed: &[u8]) -> Vec<u8> {
    let rb = row_bytes(width);
    assert_eq!(packed.len(), rb * height);
    let mut out = Vec::with_capacity(width * height);
    for j in 0..height {
        let src = &packed[j * rb..(j + 1) * rb];
        for i in 0..width {
            out.push((src[i >> 3] >> (i & 7)) & 1);
        }
    }
    out
}

/// Checks length and zero padding of a packed payload.
pub fn check_packed(width: usize, height: usize, packed: &[u8]) -> Result<()> {
    let rb = row_bytes(width);
    if packed.len() != rb * height {
        return Err(Error::MalformedFrame(alloc::format!(
            "binary payload has {} bytes, expected {}",
            packed.len(),
            rb * height
        )));
    }
    let spare = rb * 8 - width;
    if spare > 0 {
        let pad_mask = !((1u16 << (8 - spare)) - 1) as u8;
        for j in 0..height {
            if packed[j * rb + rb - 1] & pad_mask != 0 {
                return Err(Error::MalformedFrame(alloc::format!(
                    "nonzero padding bits in row {j}"
                )));
            }
        }
    }
    Ok(())
}

/// One exposure of one sensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    width: usize,
    height: usize,
    index: u64,
    sensor: SensorTag,
    payload: Payload,
}

impl Frame {
    pub fn analog(
        width: usize,
        height: usize,
        index: u64,
        sensor: SensorTag,
        values: Vec<f32>,
    ) -> Result<Self> {
        if values.len() != width * height {
            return Err(Error::MalformedFrame(alloc::format!(
                "analog payload has {} values, expected {}",
                values.len(),
                width * height
            )));
        }
        if let Some((index, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && **v >= 0.0))
        {
            return Err(Error::InvalidIntensity {
                index,
                value: *v as f64,
            });
        }
        Ok(Self {
            width,
            height,
            index,
            sensor,
            payload: Payload::Analog(values),
        })
    }

    pub fn binary(
        width: usize,
        height: usize,
        index: u64,
        sensor: SensorTag,
        packed: Vec<u8>,
    ) -> Result<Self> {
        check_packed(width, height, &packed)?;
        Ok(Self {
            width,
            height,
            index,
            sensor,
            payload: Payload::Binary(packed),
        })
    }

    /// Binary frame from one 0/1 value per pixel.
    pub fn from_bits(
        width: usize,
        height: usize,
        index: u64,
        sensor: SensorTag,
        bits: &[u8],
    ) -> Self {
        Self {
            width,
            height,
            index,
            sensor,
            payload: Payload::Binary(pack_bits(width, height, bits)),
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> usize {
        self.width * self.height
    }

    pub fn index(&self) -> u64 {
        self.index
    }

    pub fn sensor(&self) -> SensorTag {
        self.sensor
    }

    pub fn payload(&self) -> &Payload {
        &self.payload
    }

    pub fn kind(&self) -> PayloadKind {
        match self.payload {
            Payload::Analog(_) => PayloadKind::Analog,
            Payload::Binary(_) => PayloadKind::Binary,
        }
    }

    pub fn with_index(mut self, index: u64) -> Self {
        self.index = index;
        self
    }

    /// Pixel values as `f64` (binary pixels become 0.0 or 1.0).
    pub fn to_f64(&self) -> Vec<f64> {
        let mut out = alloc::vec![0.0; self.pixels()];
        self.write_f64(&mut out);
        out
    }

    pub fn write_f64(&self, out: &mut [f64]) {
        match &self.payload {
            Payload::Analog(v) => {
                for (o, x) in out.iter_mut().zip(v) {
                    *o = *x as f64;
                }
            }
            Payload::Binary(p) => {
                let rb = row_bytes(self.width);
                for j in 0..self.height {
                    for i in 0..self.width {
                        let bit = (p[j * rb + (i >> 3)] >> (i & 7)) & 1;
                        out[j * self.width + i] = bit as f64;
                    }
                }
            }
        }
    }

    /// The same pixel data as an analog frame (binary 0/1 becomes 0.0/1.0).
    pub fn to_analog(&self) -> Frame {
        match &self.payload {
            Payload::Analog(_) => self.clone(),
            Payload::Binary(_) => Frame {
                payload: Payload::Analog(self.to_f64().into_iter().map(|v| v as f32).collect()),
                ..self.clone()
            },
        }
    }

    /// Size of the payload in bytes.
    pub fn payload_bytes(&self) -> usize {
        match &self.payload {
            Payload::Analog(v) => v.len() * 4,
            Payload::Binary(p) => p.len(),
        }
    }
}

/// Acquisition metadata shared by every pair of a stream.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct StreamMeta {
    /// Hex digest of the configuration that produced the stream.
    pub config_digest: String,
    pub seed: u64,
    /// Free-form exposure description, e.g. `gate_ns=10.8;exposure_ns=10235`.
    pub exposure: String,
}

/// Frames acquired simultaneously by the two sensors.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FramePairStream {
    meta: StreamMeta,
    pairs: Vec<(Frame, Frame)>,
}

impl FramePairStream {
    pub fn new(meta: StreamMeta, pairs: Vec<(Frame, Frame)>) -> Result<Self> {
        if let Some((a0, b0)) = pairs.first() {
            for (k, (a, b)) in pairs.iter().enumerate() {
                if a.index != b.index {
                    return Err(Error::MalformedFrame(alloc::format!(
                        "pair {k}: frame indices {} and {} differ",
                        a.index,
                        b.index
                    )));
                }
                if a.sensor != SensorTag::A || b.sensor != SensorTag::B {
                    return Err(Error::MalformedFrame(alloc::format!(
                        "pair {k}: sensor tags must be (a, b)"
                    )));
                }
                if (a.width, a.height, a.kind()) != (a0.width, a0.height, a0.kind())
                    || (b.width, b.height, b.kind()) != (b0.width, b0.height, b0.kind())
                {
                    return Err(Error::DimensionMismatch(alloc::format!(
                        "pair {k} differs in size or payload kind from pair 0"
                    )));
                }
            }
        }
        Ok(Self { meta, pairs })
    }

    pub fn meta(&self) -> &StreamMeta {
        &self.meta
    }

    pub fn pairs(&self) -> &[(Frame, Frame)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Sub-stream made of the pairs at `indices` (positions, not frame indices).
    pub fn select(&self, indices: &[usize]) -> Self {
        Self {
            meta: self.meta.clone(),
            pairs: indices.iter().map(|&i| self.pairs[i].clone()).collect(),
        }
    }

    pub fn into_pairs(self) -> Vec<(Frame, Frame)> {
        self.pairs
    }
}
