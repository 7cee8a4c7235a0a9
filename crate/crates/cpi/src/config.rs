//! Run configuration files (TOML).
//!
//! ```toml
//! [optics]
//! s_o = 100.0
//! magnification = -1.2
//! lens_magnification = 1.0
//! n_paths = 1
//! dims_a = [64, 64]
//! pitch_a = 5.0
//! dims_b = [16, 16]
//! pitch_b = 50.0
//!
//! [[scene.masks]]
//! kind = "double-slit"          # or "triple-slit", "image-file"
//! depth = 120.0
//! grid = [128, 128]
//! pitch = 4.0
//! slit_distance = 80.0
//!
//! [speckle]
//! grid = [32, 32]
//! pitch = 25.0
//! sigma_c = 50.0
//! mean_intensity = 200.0      # binary frames need a few hundred
//!
//! [detector]
//! mode = "binary"               # or "analog"
//!
//! [run]
//! frames = 5000
//! seed = 7
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use sha2::{Digest, Sha256};

use cpi_core::scene::{Mask, MaskGrid, ObjectScene};
use cpi_core::{DetectorParams, OpticalConfig, Point2, SensorSpec, SpeckleGrid};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{0}")]
    Parse(#[from] toml::de::Error),
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Core(#[from] cpi_core::Error),
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OpticsSection {
    pub s_o: f64,
    pub magnification: f64,
    pub lens_magnification: f64,
    #[serde(default = "one")]
    pub n_paths: u8,
    pub dims_a: [usize; 2],
    pub pitch_a: f64,
    pub dims_b: [usize; 2],
    pub pitch_b: f64,
}

fn one() -> u8 {
    1
}

fn unit() -> f64 {
    1.0
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MaskKind {
    DoubleSlit,
    TripleSlit,
    ImageFile,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaskSection {
    pub kind: MaskKind,
    pub depth: f64,
    /// Node pitch (um).
    pub pitch: f64,
    /// Node counts; taken from the image for `image-file`.
    #[serde(default)]
    pub grid: Option<[usize; 2]>,
    #[serde(default)]
    pub center: [f64; 2],
    /// Centre-to-centre slit distance (um); slits are half as wide.
    #[serde(default)]
    pub slit_distance: Option<f64>,
    /// PNG file, relative to the config file. Grey level 255 is fully
    /// transparent.
    #[serde(default)]
    pub path: Option<PathBuf>,
    #[serde(default = "unit")]
    pub slit_transmission: f64,
    #[serde(default)]
    pub background: f64,
    #[serde(default = "yes")]
    pub opaque_surround: bool,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSection {
    pub masks: Vec<MaskSection>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpeckleSection {
    pub grid: [usize; 2],
    pub pitch: f64,
    pub sigma_c: f64,
    #[serde(default = "unit")]
    pub mean_intensity: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DetectorMode {
    #[default]
    Binary,
    Analog,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectorSection {
    pub mode: DetectorMode,
    pub pdp: f64,
    pub gate_ns: f64,
    pub exposure_ns: f64,
    pub dark_count_rate: f64,
}

impl Default for DetectorSection {
    fn default() -> Self {
        let d = DetectorParams::default();
        Self {
            mode: DetectorMode::Binary,
            pdp: d.pdp,
            gate_ns: d.gate_ns,
            exposure_ns: d.exposure_ns,
            dark_count_rate: d.dark_count_rate,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub frames: u64,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default)]
    pub dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub optics: OpticsSection,
    pub scene: SceneSection,
    pub speckle: SpeckleSection,
    #[serde(default)]
    pub detector: DetectorSection,
    pub run: RunSection,
    #[serde(default)]
    pub output: OutputSection,
}

/// A parsed configuration with its resolved masks and content digest.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: RunConfig,
    pub optics: OpticalConfig,
    pub scene: ObjectScene,
    pub speckle_grid: SpeckleGrid,
    pub detector: Option<DetectorParams>,
    /// SHA-256 (hex) over the config text and every referenced mask file.
    pub digest: String,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(text)?)
    }

    pub fn optical_config(&self) -> Result<OpticalConfig, ConfigError> {
        let o = &self.optics;
        let cfg = OpticalConfig {
            focused_distance: o.s_o,
            magnification: o.magnification,
            lens_magnification: o.lens_magnification,
            n_paths: o.n_paths,
            sensor_a: SensorSpec::new(o.dims_a[0], o.dims_a[1], o.pitch_a),
            sensor_b: SensorSpec::new(o.dims_b[0], o.dims_b[1], o.pitch_b),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn detector_params(&self) -> Result<Option<DetectorParams>, ConfigError> {
        let d = &self.detector;
        if d.mode == DetectorMode::Analog {
            return Ok(None);
        }
        let p = DetectorParams {
            pdp: d.pdp,
            gate_ns: d.gate_ns,
            exposure_ns: d.exposure_ns,
            dark_count_rate: d.dark_count_rate,
            seed: self.run.seed,
        };
        p.validate()?;
        Ok(Some(p))
    }

    pub fn speckle_grid(&self) -> Result<SpeckleGrid, ConfigError> {
        let s = &self.speckle;
        if s.grid[0] == 0 || s.grid[1] == 0 || !(s.pitch > 0.0) {
            return Err(ConfigError::Invalid(
                "speckle grid and pitch must be positive".into(),
            ));
        }
        if !(s.sigma_c >= s.pitch) {
            return Err(ConfigError::Invalid(format!(
                "speckle sigma_c {} is below the grid pitch {}",
                s.sigma_c, s.pitch
            )));
        }
        if !(s.mean_intensity > 0.0) {
            return Err(ConfigError::Invalid(
                "speckle mean_intensity must be positive".into(),
            ));
        }
        Ok(SpeckleGrid::new(s.grid[0], s.grid[1], s.pitch))
    }
}

fn build_mask(m: &MaskSection, base: &Path, digest: &mut Sha256) -> Result<Mask, ConfigError> {
    let center = Point2::new(m.center[0], m.center[1]);
    let need_grid = || {
        m.grid
            .ok_or_else(|| ConfigError::Invalid(format!("mask at depth {} needs `grid`", m.depth)))
    };
    let slits = |centers: &[f64], d: f64| -> Result<Mask, ConfigError> {
        let [w, h] = need_grid()?;
        let grid = MaskGrid {
            width: w,
            height: h,
            pitch: m.pitch,
            center,
        };
        Ok(Mask::slits(
            m.depth,
            grid,
            0.5 * d,
            centers,
            m.slit_transmission,
            m.background,
            m.opaque_surround,
        )?)
    };
    let distance = || {
        m.slit_distance.filter(|d| *d > 0.0).ok_or_else(|| {
            ConfigError::Invalid(format!(
                "slit mask at depth {} needs a positive `slit_distance`",
                m.depth
            ))
        })
    };
    match m.kind {
        MaskKind::DoubleSlit => {
            let d = distance()?;
            slits(&[center.x - 0.5 * d, center.x + 0.5 * d], d)
        }
        MaskKind::TripleSlit => {
            let d = distance()?;
            slits(&[center.x - d, center.x, center.x + d], d)
        }
        MaskKind::ImageFile => {
            let rel = m.path.as_ref().ok_or_else(|| {
                ConfigError::Invalid(format!("image mask at depth {} needs `path`", m.depth))
            })?;
            let path = base.join(rel);
            let bytes = fs::read(&path).map_err(|source| ConfigError::Read {
                path: path.clone(),
                source,
            })?;
            digest.update(&bytes);
            let img = image::load_from_memory(&bytes)
                .map_err(|e| ConfigError::Invalid(format!("{}: {e}", path.display())))?
                .to_luma8();
            let (w, h) = (img.width() as usize, img.height() as usize);
            if let Some(g) = m.grid {
                if g != [w, h] {
                    return Err(ConfigError::Invalid(format!(
                        "mask grid {}x{} does not match the {w}x{h} image",
                        g[0], g[1]
                    )));
                }
            }
            let grid = MaskGrid {
                width: w,
                height: h,
                pitch: m.pitch,
                center,
            };
            let values = img.pixels().map(|p| p.0[0] as f64 / 255.0).collect();
            Ok(Mask::new(m.depth, grid, values, m.opaque_surround)?)
        }
    }
}

impl LoadedConfig {
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_str(&text, base)
    }

    /// Parses `text`, resolving mask files relative to `base`.
    pub fn from_str(text: &str, base: &Path) -> Result<Self, ConfigError> {
        let config = RunConfig::parse(text)?;
        let mut digest = Sha256::new();
        digest.update(text.as_bytes());
        let optics = config.optical_config()?;
        if config.scene.masks.is_empty() {
            return Err(ConfigError::Invalid("scene needs at least one mask".into()));
        }
        let masks = config
            .scene
            .masks
            .iter()
            .map(|m| build_mask(m, base, &mut digest))
            .collect::<Result<Vec<_>, _>>()?;
        let scene = ObjectScene::new(masks)?;
        let speckle_grid = config.speckle_grid()?;
        let detector = config.detector_params()?;
        Ok(Self {
            config,
            optics,
            scene,
            speckle_grid,
            detector,
            digest: hex::encode(digest.finalize()),
        })
    }

    pub fn seed(&self) -> u64 {
        self.config.run.seed
    }

    pub fn frames(&self) -> u64 {
        self.config.run.frames
    }

    pub fn sigma_c(&self) -> f64 {
        self.config.speckle.sigma_c
    }

    pub fn mean_intensity(&self) -> f64 {
        self.config.speckle.mean_intensity
    }
}
