//! Binary file formats: frame files (`CPIF`), correlation tensors (`CPIG`)
//! and voxel volumes (`CPIV`). All integers and floats are little-endian.

use std::io::{self, Read, Write};

use cpi_core::frame::row_bytes;
use cpi_core::tomography::VoxelGrid;
use cpi_core::{CorrelationTensor, Frame, Normalization, Payload, PayloadKind, SensorTag};

pub const FRAME_MAGIC: &[u8; 4] = b"CPIF";
pub const TENSOR_MAGIC: &[u8; 4] = b"CPIG";
pub const VOXEL_MAGIC: &[u8; 4] = b"CPIV";
pub const VERSION: u8 = 1;

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("bad magic: expected {expected:?}, found {found:?}")]
    Magic { expected: [u8; 4], found: [u8; 4] },
    #[error("unsupported format version {0}")]
    Version(u8),
    #[error("invalid header field {0}")]
    Header(&'static str),
    #[error(transparent)]
    Core(#[from] cpi_core::Error),
}

pub type Result<T> = std::result::Result<T, FormatError>;

/// Header of a frame file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameHeader {
    pub kind: PayloadKind,
    pub sensor: SensorTag,
    pub width: u32,
    pub height: u32,
}

impl FrameHeader {
    pub fn of(f: &Frame) -> Result<Self> {
        Ok(Self {
            kind: f.kind(),
            sensor: f.sensor(),
            width: u32::try_from(f.width()).map_err(|_| FormatError::Header("frame width"))?,
            height: u32::try_from(f.height()).map_err(|_| FormatError::Header("frame height"))?,
        })
    }

    pub fn frame_bytes(&self) -> usize {
        let (w, h) = (self.width as usize, self.height as usize);
        match self.kind {
            PayloadKind::Analog => w * h * 4,
            PayloadKind::Binary => row_bytes(w) * h,
        }
    }
}

fn read_array<const N: usize>(r: &mut impl Read) -> Result<[u8; N]> {
    let mut b = [0u8; N];
    r.read_exact(&mut b)?;
    Ok(b)
}

fn check_magic(r: &mut impl Read, expected: &[u8; 4]) -> Result<()> {
    let found = read_array::<4>(r)?;
    if &found != expected {
        return Err(FormatError::Magic {
            expected: *expected,
            found,
        });
    }
    Ok(())
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    Ok(u32::from_le_bytes(read_array(r)?))
}

fn read_u64(r: &mut impl Read) -> Result<u64> {
    Ok(u64::from_le_bytes(read_array(r)?))
}

/// Writes the file header announcing `count` frames.
pub fn write_frame_header(w: &mut impl Write, header: &FrameHeader, count: u32) -> Result<()> {
    w.write_all(FRAME_MAGIC)?;
    w.write_all(&[VERSION, header.kind.code(), header.sensor.code(), 0])?;
    w.write_all(&header.width.to_le_bytes())?;
    w.write_all(&header.height.to_le_bytes())?;
    w.write_all(&count.to_le_bytes())?;
    Ok(())
}

/// Writes one frame body after checking it against `header`.
pub fn write_frame_body(w: &mut impl Write, header: &FrameHeader, f: &Frame) -> Result<()> {
    if (f.width(), f.height()) != (header.width as usize, header.height as usize)
        || f.kind() != header.kind
        || f.sensor() != header.sensor
    {
        return Err(FormatError::Header("frame does not match file header"));
    }
    match f.payload() {
        Payload::Analog(v) => {
            let mut buf = Vec::with_capacity(v.len() * 4);
            for x in v {
                buf.extend_from_slice(&x.to_le_bytes());
            }
            w.write_all(&buf)?;
        }
        Payload::Binary(p) => w.write_all(p)?,
    }
    Ok(())
}

/// Writes `frames` (all matching `header`) as one frame file.
pub fn write_frames(w: &mut impl Write, header: &FrameHeader, frames: &[&Frame]) -> Result<()> {
    let count = u32::try_from(frames.len()).map_err(|_| FormatError::Header("frame count"))?;
    write_frame_header(w, header, count)?;
    for f in frames {
        write_frame_body(w, header, f)?;
    }
    Ok(())
}

pub fn read_frame_header(r: &mut impl Read) -> Result<(FrameHeader, u32)> {
    check_magic(r, FRAME_MAGIC)?;
    let [version, kind, sensor, _reserved] = read_array::<4>(r)?;
    if version != VERSION {
        return Err(FormatError::Version(version));
    }
    let kind = PayloadKind::from_code(kind).ok_or(FormatError::Header("payload kind"))?;
    let sensor = SensorTag::from_code(sensor).ok_or(FormatError::Header("sensor tag"))?;
    let width = read_u32(r)?;
    let height = read_u32(r)?;
    if width == 0 || height == 0 {
        return Err(FormatError::Header("frame dims"));
    }
    let count = read_u32(r)?;
    Ok((
        FrameHeader {
            kind,
            sensor,
            width,
            height,
        },
        count,
    ))
}

/// Reads a frame file; frame `k` gets index `first_index + k`.
pub fn read_frames(r: &mut impl Read, first_index: u64) -> Result<(FrameHeader, Vec<Frame>)> {
    let (h, count) = read_frame_header(r)?;
    let (w, ht) = (h.width as usize, h.height as usize);
    let mut frames = Vec::with_capacity(count as usize);
    let mut buf = vec![0u8; h.frame_bytes()];
    for k in 0..count as u64 {
        r.read_exact(&mut buf)?;
        let idx = first_index + k;
        let f = match h.kind {
            PayloadKind::Analog => {
                let v = buf
                    .chunks_exact(4)
                    .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                    .collect();
                Frame::analog(w, ht, idx, h.sensor, v)?
            }
            PayloadKind::Binary => Frame::binary(w, ht, idx, h.sensor, buf.clone())?,
        };
        frames.push(f);
    }
    Ok((h, frames))
}

pub fn write_tensor(w: &mut impl Write, t: &CorrelationTensor) -> Result<()> {
    w.write_all(TENSOR_MAGIC)?;
    w.write_all(&[VERSION])?;
    let (a, b) = (t.dims_a(), t.dims_b());
    for d in [a.0, a.1, b.0, b.1] {
        let d = u32::try_from(d).map_err(|_| FormatError::Header("tensor dims"))?;
        w.write_all(&d.to_le_bytes())?;
    }
    w.write_all(&t.frames().to_le_bytes())?;
    w.write_all(&[t.normalization().code()])?;
    let mut buf = Vec::with_capacity(t.data().len() * 8);
    for v in t.data() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn read_tensor(r: &mut impl Read) -> Result<CorrelationTensor> {
    check_magic(r, TENSOR_MAGIC)?;
    let [version] = read_array::<1>(r)?;
    if version != VERSION {
        return Err(FormatError::Version(version));
    }
    let mut d = [0usize; 4];
    for x in &mut d {
        *x = read_u32(r)? as usize;
    }
    let frames = read_u64(r)?;
    let [norm] = read_array::<1>(r)?;
    let norm = Normalization::from_code(norm).ok_or(FormatError::Header("normalization"))?;
    let n = d.iter().product::<usize>();
    let mut raw = vec![0u8; n * 8];
    r.read_exact(&mut raw)?;
    let data = raw
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    Ok(CorrelationTensor::new(
        (d[0], d[1]),
        (d[2], d[3]),
        frames,
        norm,
        data,
    )?)
}

/// Voxel file: magic, dims `u32 x 3`, lateral pitch (um) and axial pitch
/// (mm) as `f64`, then the values as `f32` with z slowest.
pub fn write_voxels(w: &mut impl Write, g: &VoxelGrid) -> Result<()> {
    w.write_all(VOXEL_MAGIC)?;
    for d in [g.dims.0, g.dims.1, g.dims.2] {
        let d = u32::try_from(d).map_err(|_| FormatError::Header("voxel dims"))?;
        w.write_all(&d.to_le_bytes())?;
    }
    w.write_all(&g.pitch_xy.to_le_bytes())?;
    w.write_all(&g.pitch_z.to_le_bytes())?;
    let mut buf = Vec::with_capacity(g.values.len() * 4);
    for v in &g.values {
        buf.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

/// Reads a voxel file. The format carries no origin; the returned grid is
/// laterally centred with its first slab at `z0` mm.
pub fn read_voxels(r: &mut impl Read, z0: f64) -> Result<VoxelGrid> {
    check_magic(r, VOXEL_MAGIC)?;
    let dims = (
        read_u32(r)? as usize,
        read_u32(r)? as usize,
        read_u32(r)? as usize,
    );
    let pxy = f64::from_le_bytes(read_array(r)?);
    let pz = f64::from_le_bytes(read_array(r)?);
    let mut g = VoxelGrid::centred(dims, pxy, z0, z0 + pz * dims.2 as f64)?;
    let mut raw = vec![0u8; g.voxels() * 4];
    r.read_exact(&mut raw)?;
    g.values = raw
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    Ok(g)
}
