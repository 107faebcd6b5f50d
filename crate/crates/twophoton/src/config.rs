//! Plain-text `key = value` experiment configuration.
//!
//! Blank lines are ignored and `#` starts a comment that runs to the end of
//! the line. Every key has a
//! default, so an empty file describes the reference geometry. The same format
//! is written next to simulated frame files as a `.meta` sidecar.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use twophoton_core::framepipe::{PairFilter, DEFAULT_MIN_PATCH};
use twophoton_core::sensor::{CameraModel, PeakDistribution};

use crate::error::{AppError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Illumination {
    /// Free-space propagation from the crystal to the slits over `distance`.
    Fresnel,
    /// Lens in a 2f arrangement between crystal and slits.
    Fourier2f,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PumpKind {
    Uniform,
    Gaussian,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    /// Effective transverse source width, metres.
    pub pump_width: f64,
    pub pump_shape: PumpKind,
    /// Source-to-slit distance, metres.
    pub distance: f64,
    pub illumination: Illumination,
    pub slit_separation: f64,
    pub slit_width: f64,
    pub wavelength: f64,
    pub focal_length: f64,
    /// Average illumination over the slit openings instead of using their centers.
    pub slit_averaging: bool,
    /// Apply the single-slit diffraction envelope to detector patterns.
    pub envelope: bool,
    /// Quadrature nodes across the source.
    pub source_nodes: usize,
    /// Overrides the pair ratio computed from the geometry.
    pub psi: Option<f64>,
    pub camera: CameraModel,
    pub frames: u64,
    pub mean_pairs: f64,
    pub pair_filter: PairFilter,
    pub min_patch: usize,
    pub superpixel: usize,
    /// Worker threads; 0 lets the runtime decide.
    pub threads: usize,
    /// Contiguous frame ranges analyzed independently and merged in order.
    pub workers: usize,
    pub out_dir: PathBuf,
    pub sweep_distances: Vec<f64>,
    pub sweep_monte_carlo: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            pump_width: 60e-6,
            pump_shape: PumpKind::Uniform,
            distance: 0.54,
            illumination: Illumination::Fresnel,
            slit_separation: 0.70e-3,
            slit_width: 0.35e-3,
            wavelength: 812e-9,
            focal_length: 50e-3,
            slit_averaging: false,
            envelope: false,
            source_nodes: 4096,
            psi: None,
            camera: CameraModel::default(),
            frames: 240_000,
            mean_pairs: 0.1,
            pair_filter: PairFilter::default(),
            min_patch: DEFAULT_MIN_PATCH,
            superpixel: 4,
            threads: 0,
            workers: 8,
            out_dir: PathBuf::from("out"),
            sweep_distances: vec![0.055, 0.063, 0.30, 0.54, 0.87],
            sweep_monte_carlo: false,
        }
    }
}

fn bad(key: &str, value: &str, what: &str) -> AppError {
    AppError::Config(format!("`{key} = {value}`: {what}"))
}

fn num<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| bad(key, value, "not a valid number"))
}

fn flag(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(bad(key, value, "expected true or false")),
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| AppError::io(path, e))?;
        Self::parse(&text).map_err(|e| match e {
            AppError::Config(msg) => AppError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (n, line) in text.lines().enumerate() {
            let line = line.split_once('#').map_or(line, |(head, _)| head).trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                AppError::Config(format!("line {}: expected `key = value`", n + 1))
            })?;
            cfg.set(key.trim(), value.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Sets one key from its text form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let cam = &mut self.camera;
        match key {
            "pump_width" => self.pump_width = num(key, value)?,
            "pump_shape" => {
                self.pump_shape = match value {
                    "uniform" => PumpKind::Uniform,
                    "gaussian" => PumpKind::Gaussian,
                    _ => return Err(bad(key, value, "expected uniform or gaussian")),
                }
            }
            "distance" => self.distance = num(key, value)?,
            "illumination" => {
                self.illumination = match value {
                    "fresnel" => Illumination::Fresnel,
                    "fourier-2f" => Illumination::Fourier2f,
                    _ => return Err(bad(key, value, "expected fresnel or fourier-2f")),
                }
            }
            "slit_separation" => self.slit_separation = num(key, value)?,
            "slit_width" => self.slit_width = num(key, value)?,
            "wavelength" => self.wavelength = num(key, value)?,
            "focal_length" => self.focal_length = num(key, value)?,
            "slit_averaging" => self.slit_averaging = flag(key, value)?,
            "envelope" => self.envelope = flag(key, value)?,
            "source_nodes" => self.source_nodes = num(key, value)?,
            "psi" => {
                self.psi = if value == "auto" {
                    None
                } else {
                    Some(num(key, value)?)
                }
            }
            "width" => cam.width = num(key, value)?,
            "height" => cam.height = num(key, value)?,
            "pixel_pitch" => cam.pitch = num(key, value)?,
            "efficiency" => cam.efficiency = num(key, value)?,
            "patch_size" => cam.patch_size = num(key, value)?,
            "peak_min" | "peak_max" => {
                let v: u16 = num(key, value)?;
                let (lo, hi) = match cam.peak {
                    PeakDistribution::Constant(c) => (c, c),
                    PeakDistribution::Uniform { lo, hi } => (lo, hi),
                };
                let (lo, hi) = if key == "peak_min" { (v, hi) } else { (lo, v) };
                cam.peak = if lo == hi {
                    PeakDistribution::Constant(lo)
                } else {
                    PeakDistribution::Uniform { lo, hi }
                };
            }
            "neighbor_min" => cam.neighbor_fraction.0 = num(key, value)?,
            "neighbor_max" => cam.neighbor_fraction.1 = num(key, value)?,
            "threshold" => cam.threshold = num(key, value)?,
            "dark_rate" => cam.dark_rate = num(key, value)?,
            "dark_min" => cam.dark_level.0 = num(key, value)?,
            "dark_max" => cam.dark_level.1 = num(key, value)?,
            "strip_start" => cam.strip.0 = num(key, value)?,
            "strip_end" => cam.strip.1 = num(key, value)?,
            "seed" => cam.seed = num(key, value)?,
            "frames" => self.frames = num(key, value)?,
            "mean_pairs" => self.mean_pairs = num(key, value)?,
            "pair_ratio" => {
                let (a, b) = value
                    .split_once('/')
                    .ok_or_else(|| bad(key, value, "expected a ratio like 1/3"))?;
                let (a, b) = (num(key, a.trim())?, num(key, b.trim())?);
                self.pair_filter =
                    PairFilter::new(a, b).map_err(|e| bad(key, value, &e.to_string()))?;
            }
            "min_patch" => self.min_patch = num(key, value)?,
            "superpixel" => self.superpixel = num(key, value)?,
            "threads" => self.threads = num(key, value)?,
            "workers" => self.workers = num(key, value)?,
            "out" => self.out_dir = PathBuf::from(value),
            "sweep_distances" => {
                self.sweep_distances = value
                    .split(',')
                    .map(|s| num(key, s.trim()))
                    .collect::<Result<Vec<f64>>>()?;
            }
            "sweep_monte_carlo" => self.sweep_monte_carlo = flag(key, value)?,
            _ => return Err(AppError::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let lengths = [
            ("pump_width", self.pump_width),
            ("distance", self.distance),
            ("slit_separation", self.slit_separation),
            ("wavelength", self.wavelength),
            ("focal_length", self.focal_length),
        ];
        for (name, v) in lengths {
            if !(v > 0.0 && v.is_finite()) {
                return Err(AppError::Config(format!(
                    "`{name}` must be positive, got {v}"
                )));
            }
        }
        if !(self.slit_width >= 0.0 && self.slit_width < self.slit_separation) {
            return Err(AppError::Config(
                "`slit_width` must lie in [0, slit_separation)".into(),
            ));
        }
        if self.source_nodes < 2 {
            return Err(AppError::Config("`source_nodes` must be at least 2".into()));
        }
        if let Some(p) = self.psi {
            if !(p.abs() <= 1.0) {
                return Err(AppError::Config(format!(
                    "`psi` must lie in [-1, 1], got {p}"
                )));
            }
        }
        self.camera
            .validate()
            .map_err(|e| AppError::Config(e.to_string()))?;
        if !(self.mean_pairs >= 0.0 && self.mean_pairs.is_finite()) {
            return Err(AppError::Config("`mean_pairs` must be non-negative".into()));
        }
        if self.superpixel == 0 || self.workers == 0 {
            return Err(AppError::Config(
                "`superpixel` and `workers` must be at least 1".into(),
            ));
        }
        if self.frames > u32::MAX as u64 {
            return Err(AppError::Config(
                "`frames` exceeds the frame-file limit".into(),
            ));
        }
        if self
            .sweep_distances
            .iter()
            .any(|d| !(*d > 0.0 && d.is_finite()))
        {
            return Err(AppError::Config(
                "`sweep_distances` must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Fringe period at the detector, `lambda f / a`.
    pub fn period(&self) -> f64 {
        self.wavelength * self.focal_length / self.slit_separation
    }

    /// Every key with its current value, in a form [`parse`](Self::parse) reads back.
    pub fn to_kv(&self) -> String {
        let cam = &self.camera;
        let (peak_min, peak_max) = match cam.peak {
            PeakDistribution::Constant(c) => (c, c),
            PeakDistribution::Uniform { lo, hi } => (lo, hi),
        };
        let mut s = String::new();
        let mut kv = |k: &str, v: String| writeln!(s, "{k} = {v}").expect("writing to a String");
        kv("pump_width", self.pump_width.to_string());
        kv(
            "pump_shape",
            match self.pump_shape {
                PumpKind::Uniform => "uniform",
                PumpKind::Gaussian => "gaussian",
            }
            .into(),
        );
        kv("distance", self.distance.to_string());
        kv(
            "illumination",
            match self.illumination {
                Illumination::Fresnel => "fresnel",
                Illumination::Fourier2f => "fourier-2f",
            }
            .into(),
        );
        kv("slit_separation", self.slit_separation.to_string());
        kv("slit_width", self.slit_width.to_string());
        kv("wavelength", self.wavelength.to_string());
        kv("focal_length", self.focal_length.to_string());
        kv("slit_averaging", self.slit_averaging.to_string());
        kv("envelope", self.envelope.to_string());
        kv("source_nodes", self.source_nodes.to_string());
        kv("psi", self.psi.map_or("auto".into(), |p| p.to_string()));
        kv("width", cam.width.to_string());
        kv("height", cam.height.to_string());
        kv("pixel_pitch", cam.pitch.to_string());
        kv("efficiency", cam.efficiency.to_string());
        kv("patch_size", cam.patch_size.to_string());
        kv("peak_min", peak_min.to_string());
        kv("peak_max", peak_max.to_string());
        kv("neighbor_min", cam.neighbor_fraction.0.to_string());
        kv("neighbor_max", cam.neighbor_fraction.1.to_string());
        kv("threshold", cam.threshold.to_string());
        kv("dark_rate", cam.dark_rate.to_string());
        kv("dark_min", cam.dark_level.0.to_string());
        kv("dark_max", cam.dark_level.1.to_string());
        kv("strip_start", cam.strip.0.to_string());
        kv("strip_end", cam.strip.1.to_string());
        kv("seed", cam.seed.to_string());
        kv("frames", self.frames.to_string());
        kv("mean_pairs", self.mean_pairs.to_string());
        kv(
            "pair_ratio",
            format!("{}/{}", self.pair_filter.num, self.pair_filter.den),
        );
        kv("min_patch", self.min_patch.to_string());
        kv("superpixel", self.superpixel.to_string());
        kv("threads", self.threads.to_string());
        kv("workers", self.workers.to_string());
        kv("out", self.out_dir.display().to_string());
        kv(
            "sweep_distances",
            self.sweep_distances
                .iter()
                .map(|d| d.to_string())
                .collect::<Vec<_>>()
                .join(", "),
        );
        kv("sweep_monte_carlo", self.sweep_monte_carlo.to_string());
        s
    }
}

/// Sidecar path for a frame file: `frames.bifr` -> `frames.bifr.meta`.
pub fn sidecar_path(frames: &Path) -> PathBuf {
    let mut s = frames.as_os_str().to_owned();
    s.push(".meta");
    PathBuf::from(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let c = ExperimentConfig::parse("# nothing\n\n").unwrap();
        assert_eq!(c, ExperimentConfig::default());
        assert!((c.period() - 58e-6).abs() < 1e-12);
    }

    #[test]
    fn round_trips_through_text() {
        let mut c = ExperimentConfig::default();
        c.set("psi", "0.6").unwrap();
        c.set("illumination", "fourier-2f").unwrap();
        c.set("pair_ratio", "2/5").unwrap();
        c.set("peak_min", "50000").unwrap();
        c.set("sweep_distances", "0.1, 0.2").unwrap();
        c.set("seed", "99").unwrap();
        assert_eq!(ExperimentConfig::parse(&c.to_kv()).unwrap(), c);
    }

    #[test]
    fn trailing_comments_are_ignored() {
        let c = ExperimentConfig::parse("psi = 0.25   # override\n  # note\ndistance = 0.3#cm")
            .unwrap();
        assert_eq!(c.psi, Some(0.25));
        assert_eq!(c.distance, 0.3);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(
            ExperimentConfig::parse("nonsense"),
            Err(AppError::Config(_))
        ));
        assert!(matches!(
            ExperimentConfig::parse("colour = red"),
            Err(AppError::Config(_))
        ));
        assert!(matches!(
            ExperimentConfig::parse("distance = -1"),
            Err(AppError::Config(_))
        ));
        assert!(matches!(
            ExperimentConfig::parse("psi = 1.5"),
            Err(AppError::Config(_))
        ));
        assert!(matches!(
            ExperimentConfig::parse("patch_size = 4"),
            Err(AppError::Config(_))
        ));
        assert!(matches!(
            ExperimentConfig::parse("pair_ratio = 1/0"),
            Err(AppError::Config(_))
        ));
        assert_eq!(
            ExperimentConfig::parse("distance = x")
                .unwrap_err()
                .exit_code(),
            2
        );
    }

    #[test]
    fn sidecar_name() {
        assert_eq!(
            sidecar_path(Path::new("a/frames.bifr")),
            PathBuf::from("a/frames.bifr.meta")
        );
    }
}
