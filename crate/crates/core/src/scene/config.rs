//! The input configuration space: resolution levels, grid layouts,
//! presentation modes and the sampling configuration that combines them.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest number of frames a configuration may carry.
pub const MAX_FRAMES: u32 = 10;
pub const MIN_INTERVAL_MS: u32 = 100;
pub const MAX_INTERVAL_MS: u32 = 1000;
pub const INTERVAL_STEP_MS: u32 = 100;

const LEVELS: [(u32, u32); 6] = [
    (160, 90),
    (320, 180),
    (480, 270),
    (640, 360),
    (960, 540),
    (1920, 1080),
];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("resolution level {0} is outside 1..=6")]
    ResolutionLevel(u8),
    #[error("frame count {0} is outside 1..=10")]
    FrameCount(u32),
    #[error("interval {0} ms is not one of 100, 200, ..., 1000")]
    Interval(u32),
    #[error("grid {0} is invalid: rows and cols must be >= 1 and rows*cols <= 10")]
    Grid(GridLayout),
    #[error("collage grid {grid} holds {} frames but frame count is {frame_count}", grid.cells())]
    GridMismatch { grid: GridLayout, frame_count: u32 },
    #[error("cannot parse {what} from {input:?}")]
    Parse { what: &'static str, input: String },
}

/// Per-frame output resolution. Always 16:9, one of six fixed levels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Resolution {
    level: u8,
}

impl Resolution {
    pub const COUNT: u8 = LEVELS.len() as u8;

    pub fn from_level(level: u8) -> Result<Self, ConfigError> {
        if (1..=Self::COUNT).contains(&level) {
            Ok(Self { level })
        } else {
            Err(ConfigError::ResolutionLevel(level))
        }
    }

    /// All six levels, ascending by pixel count.
    pub fn all() -> impl Iterator<Item = Resolution> {
        (1..=Self::COUNT).map(|level| Resolution { level })
    }

    pub fn lowest() -> Self {
        Self { level: 1 }
    }

    pub fn highest() -> Self {
        Self { level: Self::COUNT }
    }

    pub fn level(self) -> u8 {
        self.level
    }

    pub fn width(self) -> u32 {
        LEVELS[usize::from(self.level - 1)].0
    }

    pub fn height(self) -> u32 {
        LEVELS[usize::from(self.level - 1)].1
    }

    pub fn pixels(self) -> u64 {
        u64::from(self.width()) * u64::from(self.height())
    }
}

impl fmt::Display for Resolution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}×{}", self.width(), self.height())
    }
}

impl Serialize for Resolution {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.level.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Resolution {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let level = u8::deserialize(d)?;
        Resolution::from_level(level).map_err(serde::de::Error::custom)
    }
}

/// Spatial arrangement of frames inside a collage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GridLayout {
    pub rows: u32,
    pub cols: u32,
}

impl GridLayout {
    /// Builds a layout usable as a sampling grid (at most ten cells).
    pub fn new(rows: u32, cols: u32) -> Result<Self, ConfigError> {
        let grid = Self { rows, cols };
        if rows == 0 || cols == 0 || grid.cells() > MAX_FRAMES {
            return Err(ConfigError::Grid(grid));
        }
        Ok(grid)
    }

    /// A single horizontal strip of `n` frames.
    pub fn row(n: u32) -> Result<Self, ConfigError> {
        Self::new(1, n)
    }

    pub fn cells(self) -> u32 {
        self.rows * self.cols
    }
}

impl fmt::Display for GridLayout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}×{}", self.rows, self.cols)
    }
}

impl FromStr for GridLayout {
    type Err = ConfigError;

    /// Accepts `2x3`, `2X3` or `2×3`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || ConfigError::Parse {
            what: "grid",
            input: s.to_string(),
        };
        let normalized = s.trim().replace(['×', 'X'], "x");
        let (r, c) = normalized.split_once('x').ok_or_else(err)?;
        let rows = r.trim().parse().map_err(|_| err())?;
        let cols = c.trim().parse().map_err(|_| err())?;
        Self::new(rows, cols)
    }
}

impl Serialize for GridLayout {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format!("{}x{}", self.rows, self.cols))
    }
}

impl<'de> Deserialize<'de> for GridLayout {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// How frames reach a model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PresentationMode {
    /// One composite image.
    Collage,
    /// All frames as attachments of a single message.
    Separate,
    /// One frame per conversational turn.
    Batch,
}

impl PresentationMode {
    pub const ALL: [PresentationMode; 3] = [Self::Collage, Self::Separate, Self::Batch];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Collage => "collage",
            Self::Separate => "separate",
            Self::Batch => "batch",
        }
    }
}

impl fmt::Display for PresentationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PresentationMode {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "collage" | "c" => Ok(Self::Collage),
            "separate" | "s" => Ok(Self::Separate),
            "batch" | "b" => Ok(Self::Batch),
            _ => Err(ConfigError::Parse {
                what: "presentation mode",
                input: s.to_string(),
            }),
        }
    }
}

/// One point in the configuration space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "RawSamplingConfig")]
pub struct SamplingConfig {
    pub interval_ms: u32,
    pub frame_count: u32,
    pub resolution: Resolution,
    pub grid: GridLayout,
    pub mode: PresentationMode,
}

#[derive(Deserialize)]
struct RawSamplingConfig {
    interval_ms: u32,
    frame_count: u32,
    resolution: Resolution,
    grid: GridLayout,
    mode: PresentationMode,
}

impl TryFrom<RawSamplingConfig> for SamplingConfig {
    type Error = ConfigError;

    fn try_from(raw: RawSamplingConfig) -> Result<Self, Self::Error> {
        SamplingConfig::new(
            raw.interval_ms,
            raw.frame_count,
            raw.resolution,
            raw.grid,
            raw.mode,
        )
    }
}

impl SamplingConfig {
    pub fn new(
        interval_ms: u32,
        frame_count: u32,
        resolution: Resolution,
        grid: GridLayout,
        mode: PresentationMode,
    ) -> Result<Self, ConfigError> {
        let config = Self {
            interval_ms,
            frame_count,
            resolution,
            grid,
            mode,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(1..=MAX_FRAMES).contains(&self.frame_count) {
            return Err(ConfigError::FrameCount(self.frame_count));
        }
        if !(MIN_INTERVAL_MS..=MAX_INTERVAL_MS).contains(&self.interval_ms)
            || self.interval_ms % INTERVAL_STEP_MS != 0
        {
            return Err(ConfigError::Interval(self.interval_ms));
        }
        GridLayout::new(self.grid.rows, self.grid.cols)?;
        if self.mode == PresentationMode::Collage && self.grid.cells() != self.frame_count {
            return Err(ConfigError::GridMismatch {
                grid: self.grid,
                frame_count: self.frame_count,
            });
        }
        Ok(())
    }

    /// Stable short identifier, e.g. `r1-n4-g2x2-t200-collage`.
    pub fn key(&self) -> String {
        format!(
            "r{}-n{}-g{}x{}-t{}-{}",
            self.resolution.level(),
            self.frame_count,
            self.grid.rows,
            self.grid.cols,
            self.interval_ms,
            self.mode
        )
    }
}

impl fmt::Display for SamplingConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} frames, {} grid, {} ms, level {} ({}), {}",
            self.frame_count,
            self.grid,
            self.interval_ms,
            self.resolution.level(),
            self.resolution,
            self.mode
        )
    }
}
