//! Implementations of the `cpi` subcommands. Each returns the report it
//! wrote, so the same code paths are usable from tests.

use std::fmt;
use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use cpi_core::compressive::{cs_reconstruct, CsOptions, CsSettings, LambdaChoice};
use cpi_core::metrics::{pearson, sharpness, visibility, PeakHint};
use cpi_core::refocus::{refocus_onto, Interpolation};
use cpi_core::rng::{keyed_rng, Domain};
use cpi_core::tomography::{
    art_solve, build_rays, linearize, mlem_solve, LinearizeOptions, SystemMatrix, VoxelGrid,
};
use cpi_core::{
    CorrelationTensor, Frame, FramePairStream, Image, ObjectGrid, OpticalConfig, PayloadKind,
    SensorTag, StreamMeta,
};

use crate::bench::{bench_accumulate, random_binary_stream, BenchMode, Throughput};
use crate::config::{ConfigError, DetectorMode, LoadedConfig};
use crate::format::{self, FormatError, FrameHeader};
use crate::pipeline::{correlate as correlate_pairs, thread_pool, Simulator, CHUNK};
use crate::report::{join, Report};

pub const FRAMES_A: &str = "frames_a.cpif";
pub const FRAMES_B: &str = "frames_b.cpif";
pub const MANIFEST: &str = "manifest.txt";

/// Failure of a command, classified by exit code.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CliError {
    Usage(String),
    Validation(String),
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Validation(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Validation(m) => write!(f, "invalid input: {m}"),
            CliError::Runtime(m) => write!(f, "error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<cpi_core::Error> for CliError {
    fn from(e: cpi_core::Error) -> Self {
        use cpi_core::Error as E;
        match e {
            E::NoPeaks | E::AllMasked | E::DegenerateRay => CliError::Runtime(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Read { .. } => CliError::Runtime(e.to_string()),
            ConfigError::Core(c) => c.into(),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<FormatError> for CliError {
    fn from(e: FormatError) -> Self {
        match e {
            FormatError::Io(_) => CliError::Runtime(e.to_string()),
            FormatError::Core(c) => c.into(),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

fn io_err(path: &Path) -> impl Fn(io::Error) -> CliError + '_ {
    move |e| CliError::Runtime(format!("{}: {e}", path.display()))
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Report file written next to `out`.
pub fn report_path(out: &Path) -> PathBuf {
    out.with_extension("txt")
}

struct HashWriter<W> {
    inner: W,
    hash: Sha256,
}

impl<W: Write> Write for HashWriter<W> {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        let n = self.inner.write(buf)?;
        self.hash.update(&buf[..n]);
        Ok(n)
    }

    fn flush(&mut self) -> io::Result<()> {
        self.inner.flush()
    }
}

fn create(path: &Path) -> CliResult<HashWriter<BufWriter<File>>> {
    Ok(HashWriter {
        inner: BufWriter::new(File::create(path).map_err(io_err(path))?),
        hash: Sha256::new(),
    })
}

fn finish(w: HashWriter<BufWriter<File>>, path: &Path) -> CliResult<String> {
    let HashWriter { mut inner, hash } = w;
    inner.flush().map_err(io_err(path))?;
    Ok(hex::encode(hash.finalize()))
}

fn file_digest(path: &Path) -> CliResult<String> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn dims(d: (usize, usize)) -> String {
    format!("{}x{}", d.0, d.1)
}

fn write_report(report: &Report, path: &Path) -> CliResult<()> {
    report.write(path).map_err(io_err(path))
}

pub struct SimulateArgs {
    pub config: PathBuf,
    pub frames: Option<u64>,
    pub mode: Option<DetectorMode>,
    pub out: PathBuf,
    pub workers: usize,
}

/// Simulates frame pairs and writes them with a manifest into `out`.
pub fn simulate(args: &SimulateArgs) -> CliResult<Report> {
    let mut cfg = LoadedConfig::from_file(&args.config)?;
    if let Some(m) = args.mode {
        cfg.config.detector.mode = m;
        cfg.detector = cfg.config.detector_params()?;
    }
    let n = args.frames.unwrap_or(cfg.frames());
    let count = u32::try_from(n)
        .map_err(|_| CliError::Validation(format!("frame count {n} exceeds the file limit")))?;
    let sim = Simulator::from_config(&cfg)?;
    fs::create_dir_all(&args.out).map_err(io_err(&args.out))?;

    let o = &cfg.optics;
    let mut report = Report::new();
    report
        .push("config_digest", &cfg.digest)
        .push("seed", cfg.seed())
        .push("frames", n)
        .push(
            "payload",
            if sim.kind() == PayloadKind::Binary {
                "binary"
            } else {
                "analog"
            },
        )
        .push("dims_a", dims((o.sensor_a.width, o.sensor_a.height)))
        .push("dims_b", dims((o.sensor_b.width, o.sensor_b.height)));
    if let Some(d) = &cfg.detector {
        report
            .push("pdp", d.pdp)
            .push("gate_ns", d.gate_ns)
            .push("exposure_ns", d.exposure_ns)
            .push("dark_count_rate", d.dark_count_rate);
    }

    if n > 0 {
        let header = |s: &cpi_core::SensorSpec, tag| FrameHeader {
            kind: sim.kind(),
            sensor: tag,
            width: s.width as u32,
            height: s.height as u32,
        };
        let (ha, hb) = (
            header(&o.sensor_a, SensorTag::A),
            header(&o.sensor_b, SensorTag::B),
        );
        let (pa, pb) = (args.out.join(FRAMES_A), args.out.join(FRAMES_B));
        let (mut wa, mut wb) = (create(&pa)?, create(&pb)?);
        format::write_frame_header(&mut wa, &ha, count)?;
        format::write_frame_header(&mut wb, &hb, count)?;
        let pool = thread_pool(args.workers);
        let wave = (pool.current_num_threads() * CHUNK) as u64;
        let mut start = 0;
        while start < n {
            let idx: Vec<u64> = (start..n.min(start + wave)).collect();
            for (a, b) in sim.pairs(&idx, &pool)? {
                format::write_frame_body(&mut wa, &ha, &a)?;
                format::write_frame_body(&mut wb, &hb, &b)?;
            }
            start += wave;
        }
        report
            .push("frames_a_sha256", finish(wa, &pa)?)
            .push("frames_b_sha256", finish(wb, &pb)?);
    }
    write_report(&report, &args.out.join(MANIFEST))?;
    Ok(report)
}

fn read_frame_file(path: &Path) -> CliResult<Vec<Frame>> {
    let f = File::open(path).map_err(io_err(path))?;
    Ok(format::read_frames(&mut BufReader::new(f), 0)?.1)
}

/// Reads a directory written by [`simulate`].
pub fn read_frames_dir(dir: &Path) -> CliResult<(Report, FramePairStream)> {
    if !dir.is_dir() {
        return Err(CliError::Runtime(format!(
            "{}: not a frames directory",
            dir.display()
        )));
    }
    let mpath = dir.join(MANIFEST);
    let text = fs::read_to_string(&mpath).map_err(io_err(&mpath))?;
    let manifest = Report::parse(&text)
        .ok_or_else(|| CliError::Validation(format!("{}: malformed manifest", mpath.display())))?;
    let (pa, pb) = (dir.join(FRAMES_A), dir.join(FRAMES_B));
    let pairs = if manifest.get("frames") == Some("0") && !pa.exists() {
        Vec::new()
    } else {
        let a = read_frame_file(&pa)?;
        let b = read_frame_file(&pb)?;
        if a.len() != b.len() {
            return Err(CliError::Validation(format!(
                "{} has {} frames, {} has {}",
                FRAMES_A,
                a.len(),
                FRAMES_B,
                b.len()
            )));
        }
        a.into_iter().zip(b).collect()
    };
    let meta = StreamMeta {
        config_digest: manifest
            .get("config_digest")
            .unwrap_or_default()
            .to_string(),
        seed: manifest
            .get("seed")
            .and_then(|s| s.parse().ok())
            .unwrap_or(0),
        exposure: String::new(),
    };
    Ok((manifest, FramePairStream::new(meta, pairs)?))
}

pub struct CorrelateArgs {
    pub frames: PathBuf,
    pub binning: usize,
    pub out: PathBuf,
    pub workers: usize,
}

/// Correlation tensor of `stream`, accumulated in fixed chunks.
pub fn correlate_stream(
    stream: &FramePairStream,
    binning: usize,
    workers: usize,
) -> CliResult<CorrelationTensor> {
    let Some((a, b)) = stream.pairs().first() else {
        return Err(CliError::Validation("no frames to correlate".into()));
    };
    let pool = thread_pool(workers);
    let acc = correlate_pairs(
        stream.pairs(),
        (a.width(), a.height()),
        (b.width(), b.height()),
        a.kind(),
        binning,
        &pool,
    )?;
    Ok(acc.finalize()?)
}

pub fn correlate(args: &CorrelateArgs) -> CliResult<Report> {
    let (manifest, stream) = read_frames_dir(&args.frames)?;
    let gamma = correlate_stream(&stream, args.binning, args.workers)?;
    let mut w = create(&args.out)?;
    format::write_tensor(&mut w, &gamma)?;
    let digest = finish(w, &args.out)?;
    let mut report = Report::new();
    report
        .push(
            "input_config_digest",
            manifest.get("config_digest").unwrap_or_default(),
        )
        .push(
            "input_frames_a_sha256",
            manifest.get("frames_a_sha256").unwrap_or_default(),
        )
        .push("frames", gamma.frames())
        .push("dims_a", dims(gamma.dims_a()))
        .push("dims_b", dims(gamma.dims_b()))
        .push("binning", args.binning)
        .push("normalization", "raw")
        .push("tensor_sha256", digest);
    write_report(&report, &report_path(&args.out))?;
    Ok(report)
}

pub fn read_tensor_file(path: &Path) -> CliResult<CorrelationTensor> {
    let f = File::open(path).map_err(io_err(path))?;
    Ok(format::read_tensor(&mut BufReader::new(f))?)
}

/// Depths to refocus on.
#[derive(Debug, Clone, PartialEq)]
pub enum DepthSpec {
    Single(f64),
    /// `count` depths evenly spaced from `from` to `to` inclusive.
    Stack {
        from: f64,
        to: f64,
        count: usize,
    },
}

impl DepthSpec {
    /// Parses `s1..s2:k`.
    pub fn parse_stack(s: &str) -> CliResult<Self> {
        let bad = || CliError::Usage(format!("stack `{s}` is not of the form s1..s2:k"));
        let (range, k) = s.split_once(':').ok_or_else(bad)?;
        let (a, b) = range.split_once("..").ok_or_else(bad)?;
        Ok(DepthSpec::Stack {
            from: a.trim().parse().map_err(|_| bad())?,
            to: b.trim().parse().map_err(|_| bad())?,
            count: k.trim().parse().map_err(|_| bad())?,
        })
    }

    pub fn depths(&self) -> Vec<f64> {
        match *self {
            DepthSpec::Single(s) => vec![s],
            DepthSpec::Stack { from, count: 1, .. } => vec![from],
            DepthSpec::Stack { from, to, count } => (0..count)
                .map(|i| from + (to - from) * i as f64 / (count - 1) as f64)
                .collect(),
        }
    }
}

/// Writes images as analog frames on sensor A. Negative values (possible in
/// a covariance) are clamped to zero; the number clamped is returned.
pub fn write_images(path: &Path, images: &[&Image]) -> CliResult<(usize, String)> {
    let mut clamped = 0;
    let frames = images
        .iter()
        .enumerate()
        .map(|(k, img)| {
            let v = img
                .data
                .iter()
                .map(|&x| {
                    if x < 0.0 {
                        clamped += 1;
                    }
                    x.max(0.0) as f32
                })
                .collect();
            Frame::analog(img.width, img.height, k as u64, SensorTag::A, v)
        })
        .collect::<cpi_core::Result<Vec<_>>>()?;
    let Some(first) = frames.first() else {
        return Err(CliError::Validation("no images to write".into()));
    };
    let header = FrameHeader::of(first)?;
    let mut w = create(path)?;
    format::write_frames(&mut w, &header, &frames.iter().collect::<Vec<_>>())?;
    Ok((clamped, finish(w, path)?))
}

pub struct RefocusArgs {
    pub gamma: PathBuf,
    pub config: PathBuf,
    pub depths: DepthSpec,
    /// Sample every slice on the grid conjugate to this depth instead of
    /// each slice's own grid.
    pub grid_depth: Option<f64>,
    pub out: PathBuf,
}

pub fn refocus(args: &RefocusArgs) -> CliResult<Report> {
    let cfg = LoadedConfig::from_file(&args.config)?;
    let gamma = read_tensor_file(&args.gamma)?;
    let depths = args.depths.depths();
    if depths.is_empty() {
        return Err(CliError::Validation("empty depth stack".into()));
    }
    let slices = depths
        .iter()
        .map(|&s| {
            let grid = cfg.optics.object_grid(args.grid_depth.unwrap_or(s));
            refocus_onto(&gamma, &cfg.optics, s, &grid, Interpolation::Bilinear)
        })
        .collect::<cpi_core::Result<Vec<_>>>()?;
    let (clamped, digest) = write_images(
        &args.out,
        &slices.iter().map(|r| &r.image).collect::<Vec<_>>(),
    )?;
    let mut report = Report::new();
    report
        .push("input_tensor_sha256", file_digest(&args.gamma)?)
        .push("config_digest", &cfg.digest)
        .push("slices", slices.len())
        .push("depths", join(&depths));
    for (k, r) in slices.iter().enumerate() {
        let valid = r.valid();
        report
            .push(&format!("pitch.{k}"), r.pitch())
            .push(&format!("coverage.{k}"), r.coverage())
            .push(
                &format!("sharpness.{k}"),
                sharpness(&r.image, r.pitch(), Some(&valid)),
            );
    }
    report
        .push("clamped_pixels", clamped)
        .push("images_sha256", digest);
    write_report(&report, &report_path(&args.out))?;
    Ok(report)
}

/// `m` distinct indices out of `0..n`, sorted, chosen by `seed`.
pub fn subset_indices(n: usize, m: usize, seed: u64) -> Vec<usize> {
    use rand::Rng;
    let mut rng = keyed_rng(seed, Domain::Subset, n as u64);
    let mut idx: Vec<usize> = (0..n).collect();
    let m = m.min(n);
    for i in 0..m {
        let j = rng.random_range(i..n);
        idx.swap(i, j);
    }
    let mut out = idx[..m].to_vec();
    out.sort_unstable();
    out
}

/// Mask transmission averaged over `k x k` blocks of the grid conjugate to
/// sensor A at `depth`; `None` when the scene has no mask there.
pub fn ground_truth(cfg: &LoadedConfig, depth: f64, k: usize) -> CliResult<Option<Image>> {
    let Ok(mask) = cfg.scene.mask_at(depth) else {
        return Ok(None);
    };
    let fine = cfg.optics.object_grid(depth);
    let data = (0..fine.height)
        .flat_map(|j| (0..fine.width).map(move |i| (i, j)))
        .map(|(i, j)| mask.sample(fine.node(i, j)))
        .collect();
    Ok(Some(
        Image::new(fine.width, fine.height, data)?.downsample_mean(k, None)?,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LambdaArg {
    Value(f64),
    CrossValidate,
}

impl LambdaArg {
    pub fn parse(s: &str) -> CliResult<Self> {
        if s == "cv" {
            return Ok(LambdaArg::CrossValidate);
        }
        s.parse()
            .map(LambdaArg::Value)
            .map_err(|_| CliError::Usage(format!("lambda must be a number or `cv`, got `{s}`")))
    }
}

pub struct CsArgs {
    pub frames: PathBuf,
    pub config: PathBuf,
    pub fraction: f64,
    pub depth: f64,
    pub lambda: LambdaArg,
    /// Block size merging object-plane cells into CS unknowns.
    pub downsample: usize,
    pub stride: usize,
    pub folds: usize,
    pub seed: u64,
    pub out: PathBuf,
    pub workers: usize,
}

pub fn cs(args: &CsArgs) -> CliResult<Report> {
    if !(args.fraction > 0.0 && args.fraction <= 1.0) {
        return Err(CliError::Validation(format!(
            "fraction must lie in (0, 1], got {}",
            args.fraction
        )));
    }
    let cfg = LoadedConfig::from_file(&args.config)?;
    let (_, stream) = read_frames_dir(&args.frames)?;
    if stream.meta().config_digest != cfg.digest {
        return Err(CliError::Validation(
            "frames were simulated from a different configuration".into(),
        ));
    }
    let m = ((args.fraction * stream.len() as f64).round() as usize).max(2);
    let subset = stream.select(&subset_indices(stream.len(), m, args.seed));
    let grid: ObjectGrid = cfg
        .optics
        .object_grid(args.depth)
        .coarsened(args.downsample)?;
    let truth = ground_truth(&cfg, args.depth, args.downsample)?;

    let r_red = match &truth {
        Some(t) => {
            let gamma = correlate_stream(&subset, 1, args.workers)?;
            let fine = cfg.optics.object_grid(args.depth);
            let r = refocus_onto(
                &gamma,
                &cfg.optics,
                args.depth,
                &fine,
                Interpolation::Bilinear,
            )?;
            let valid = r.valid();
            let img = r.image.downsample_mean(args.downsample, Some(&valid))?;
            let flat = img.data.iter().all(|&v| v == img.data[0]);
            if flat {
                None
            } else {
                Some(pearson(&img.data, &t.data)?)
            }
        }
        None => None,
    };
    let settings = CsSettings {
        rows: CsOptions {
            stride: args.stride,
        },
        lambda: match args.lambda {
            LambdaArg::Value(v) => LambdaChoice::Fixed(v),
            LambdaArg::CrossValidate => LambdaChoice::CrossValidate {
                folds: args.folds,
                points: 20,
                ratio: 1e-3,
                seed: args.seed,
            },
        },
        ..CsSettings::default()
    };
    let rec = cs_reconstruct(
        &subset,
        &cfg.optics,
        args.depth,
        &grid,
        &settings,
        truth.as_ref().map(|t| t.data.as_slice()),
    )?;
    let (clamped, digest) = write_images(&args.out, &[&rec.image])?;

    let mut report = Report::new();
    report
        .push("config_digest", &cfg.digest)
        .push("frames_total", stream.len())
        .push("frames_used", subset.len())
        .push("subset_seed", args.seed)
        .push("depth", args.depth)
        .push("grid", dims((grid.width, grid.height)))
        .push("grid_pitch", grid.pitch)
        .push("stride", args.stride)
        .push("rows", rec.rows)
        .push("lambda", rec.lambda)
        .push("lambda_max", rec.lambda_max)
        .push(
            "lambda_choice",
            if rec.cv.is_some() { "cv" } else { "fixed" },
        )
        .push("converged", rec.converged)
        .push("sweeps", rec.sweeps);
    if let (Some(rr), Some(rc)) = (r_red, rec.pearson) {
        report.push("r_red", rr).push("r_cs", rc);
    }
    report
        .push("clamped_pixels", clamped)
        .push("image_sha256", digest);
    write_report(&report, &report_path(&args.out))?;
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Solver {
    Mlem,
    Art,
}

/// Voxel grid given as `nx,ny,nz,pitch_xy,z0,z1` (um for the pitch, mm for
/// the axial range).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub dims: (usize, usize, usize),
    pub pitch_xy: f64,
    pub z0: f64,
    pub z1: f64,
}

impl GridSpec {
    pub fn parse(s: &str) -> CliResult<Self> {
        let bad = || {
            CliError::Usage(format!(
                "grid `{s}` is not of the form nx,ny,nz,pitch_xy,z0,z1"
            ))
        };
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        if parts.len() != 6 {
            return Err(bad());
        }
        let n = |i: usize| parts[i].parse::<usize>().map_err(|_| bad());
        let f = |i: usize| parts[i].parse::<f64>().map_err(|_| bad());
        Ok(Self {
            dims: (n(0)?, n(1)?, n(2)?),
            pitch_xy: f(3)?,
            z0: f(4)?,
            z1: f(5)?,
        })
    }

    pub fn grid(&self) -> CliResult<VoxelGrid> {
        Ok(VoxelGrid::centred(
            self.dims,
            self.pitch_xy,
            self.z0,
            self.z1,
        )?)
    }
}

pub struct TomoArgs {
    pub gamma: PathBuf,
    pub reference: PathBuf,
    pub config: PathBuf,
    pub grid: GridSpec,
    pub solver: Solver,
    pub iters: usize,
    pub relaxation: f64,
    pub out: PathBuf,
}

/// Volume reconstruction from a tensor and its object-free reference.
pub fn tomo_volume(
    cfg: &OpticalConfig,
    gamma: &CorrelationTensor,
    reference: &CorrelationTensor,
    grid: &VoxelGrid,
    solver: Solver,
    iters: usize,
    relaxation: f64,
    report: &mut Report,
) -> CliResult<VoxelGrid> {
    let eff = cfg.for_tensor(gamma.dims_a(), gamma.dims_b())?;
    let rays = build_rays(&eff, gamma.dims_a(), gamma.dims_b())?;
    let opts = LinearizeOptions::default();
    let meas = linearize(gamma, reference, &opts)?;
    let sys = SystemMatrix::build(&rays, grid)?;
    report
        .push("rays", sys.rows())
        .push("valid_rays", meas.valid_count())
        .push("nonzeros", sys.nonzeros())
        .push("linearize_floor", opts.floor)
        .push("linearize_p_max", opts.p_max)
        .push("iterations", iters);
    let volume = match solver {
        Solver::Mlem => {
            let r = mlem_solve(&sys, &meas, iters)?;
            report
                .push("solver", "mlem")
                .push(
                    "unobserved_voxels",
                    r.unobserved.iter().filter(|&&u| u).count(),
                )
                .push(
                    "log_likelihood",
                    r.log_likelihood.last().copied().unwrap_or(f64::NAN),
                );
            r.volume
        }
        Solver::Art => {
            let r = art_solve(&sys, &meas, iters, relaxation)?;
            report
                .push("solver", "art")
                .push("relaxation", relaxation)
                .push("residual", r.residual.last().copied().unwrap_or(f64::NAN));
            r.volume
        }
    };
    report.push("slab_sums", join(&volume.slab_sums()));
    Ok(volume)
}

pub fn tomo(args: &TomoArgs) -> CliResult<Report> {
    let cfg = LoadedConfig::from_file(&args.config)?;
    let gamma = read_tensor_file(&args.gamma)?;
    let reference = read_tensor_file(&args.reference)?;
    let grid = args.grid.grid()?;
    let mut report = Report::new();
    report
        .push("input_tensor_sha256", file_digest(&args.gamma)?)
        .push("reference_tensor_sha256", file_digest(&args.reference)?)
        .push(
            "grid",
            format!("{}x{}x{}", grid.dims.0, grid.dims.1, grid.dims.2),
        );
    let volume = tomo_volume(
        &cfg.optics,
        &gamma,
        &reference,
        &grid,
        args.solver,
        args.iters,
        args.relaxation,
        &mut report,
    )?;
    let mut w = create(&args.out)?;
    format::write_voxels(&mut w, &volume)?;
    report.push("volume_sha256", finish(w, &args.out)?);
    write_report(&report, &report_path(&args.out))?;
    Ok(report)
}

pub struct MetricsArgs {
    pub image: PathBuf,
    pub reference: Option<PathBuf>,
    /// Frame of a multi-frame image file.
    pub frame: usize,
    /// Pixel pitch (um) for the sharpness value; 1 gives per-pixel units.
    pub pitch: f64,
    pub out: Option<PathBuf>,
}

fn load_image(path: &Path, frame: usize) -> CliResult<Image> {
    let frames = read_frame_file(path)?;
    let f = frames
        .get(frame)
        .ok_or_else(|| CliError::Validation(format!("{} has no frame {frame}", path.display())))?;
    Ok(Image::new(f.width(), f.height(), f.to_f64())?)
}

pub fn metrics(args: &MetricsArgs) -> CliResult<Report> {
    let img = load_image(&args.image, args.frame)?;
    let mut report = Report::new();
    let (lo, hi) = img
        .data
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| {
            (l.min(v), h.max(v))
        });
    report
        .push("width", img.width)
        .push("height", img.height)
        .push("mean", img.data.iter().sum::<f64>() / img.data.len() as f64)
        .push("min", lo)
        .push("max", hi)
        .push("sharpness", sharpness(&img, args.pitch, None));
    match visibility(&img.column_profile(), PeakHint::None) {
        Ok(v) => report.push("visibility", v),
        Err(cpi_core::Error::NoPeaks) => report.push("visibility", "none"),
        Err(e) => return Err(e.into()),
    };
    if let Some(r) = &args.reference {
        let reference = load_image(r, args.frame)?;
        report.push("pearson", pearson(&img.data, &reference.data)?);
    }
    if let Some(out) = &args.out {
        write_report(&report, out)?;
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BenchSelect {
    NaiveFloat,
    BitPacked,
    Both,
}

pub struct BenchArgs {
    /// Frames directory; synthetic frames are generated when absent.
    pub frames: Option<PathBuf>,
    pub mode: BenchSelect,
    pub synthetic_frames: usize,
    pub dims_a: (usize, usize),
    pub dims_b: (usize, usize),
    pub seed: u64,
    pub out: Option<PathBuf>,
}

fn push_throughput(report: &mut Report, t: &Throughput) {
    let m = t.mode.name();
    report
        .push(&format!("{m}.seconds"), t.seconds)
        .push(&format!("{m}.frames_per_sec"), t.frames_per_sec)
        .push(&format!("{m}.bytes_per_sec"), t.bytes_per_sec);
}

pub fn bench(args: &BenchArgs) -> CliResult<Report> {
    let stream = match &args.frames {
        Some(dir) => read_frames_dir(dir)?.1,
        None => random_binary_stream(args.synthetic_frames, args.dims_a, args.dims_b, args.seed)?,
    };
    let modes: &[BenchMode] = match args.mode {
        BenchSelect::NaiveFloat => &[BenchMode::NaiveFloat],
        BenchSelect::BitPacked => &[BenchMode::BitPacked],
        BenchSelect::Both => &[BenchMode::NaiveFloat, BenchMode::BitPacked],
    };
    let mut report = Report::new();
    let mut results = Vec::new();
    for &m in modes {
        let (t, g) = bench_accumulate(&stream, m)?;
        if results.is_empty() {
            report
                .push("frames", t.frames)
                .push("pair_bytes", t.pair_bytes);
        }
        push_throughput(&mut report, &t);
        results.push((t, g));
    }
    if let [(tn, gn), (tp, gp)] = results.as_slice() {
        let identical = gn
            .data()
            .iter()
            .zip(gp.data())
            .all(|(x, y)| x.to_bits() == y.to_bits());
        report
            .push("speedup", tp.frames_per_sec / tn.frames_per_sec)
            .push("gamma_identical", identical);
        if !identical {
            return Err(CliError::Runtime(
                "float and bit-packed paths disagree".into(),
            ));
        }
    }
    if let Some(out) = &args.out {
        write_report(&report, out)?;
    }
    Ok(report)
}
