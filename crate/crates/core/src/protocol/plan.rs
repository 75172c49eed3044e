use std::collections::HashSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frames::enumerate_grids;
use crate::scene::{
    ConfigError, GridLayout, PresentationMode, Resolution, SamplingConfig, INTERVAL_STEP_MS,
    MAX_FRAMES, MAX_INTERVAL_MS, MIN_INTERVAL_MS,
};

/// A configuration axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dimension {
    Resolution,
    Frames,
    Interval,
    Grid,
    Mode,
}

impl Dimension {
    pub const ALL: [Dimension; 5] = [
        Dimension::Resolution,
        Dimension::Frames,
        Dimension::Interval,
        Dimension::Grid,
        Dimension::Mode,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Dimension::Resolution => "resolution",
            Dimension::Frames => "frames",
            Dimension::Interval => "interval",
            Dimension::Grid => "grid",
            Dimension::Mode => "mode",
        }
    }

    /// The value of this dimension in `config`, as a group label.
    pub fn value_of(self, config: &SamplingConfig) -> String {
        match self {
            Dimension::Resolution => format!("L{}", config.resolution.level()),
            Dimension::Frames => config.frame_count.to_string(),
            Dimension::Interval => format!("{}ms", config.interval_ms),
            Dimension::Grid => config.grid.to_string(),
            Dimension::Mode => config.mode.as_str().to_string(),
        }
    }

    /// Sort key that puts this dimension's values in natural order.
    pub fn order_key(self, config: &SamplingConfig) -> (u32, u32) {
        match self {
            Dimension::Resolution => (config.resolution.level() as u32, 0),
            Dimension::Frames => (config.frame_count, 0),
            Dimension::Interval => (config.interval_ms, 0),
            Dimension::Grid => (config.grid.rows * config.grid.cols, config.grid.rows),
            Dimension::Mode => (
                PresentationMode::ALL.iter().position(|m| *m == config.mode).unwrap_or(0) as u32,
                0,
            ),
        }
    }
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Dimension {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Dimension::ALL
            .into_iter()
            .find(|d| d.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| format!("unknown dimension {s:?} (resolution, frames, interval, grid, mode)"))
    }
}

/// Which grid(s) to use for each frame count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum GridSpec {
    Fixed(GridLayout),
    /// `1×N`.
    SingleRow,
    /// Every `r×c` with `r·c = N`.
    All,
}

impl GridSpec {
    pub fn grids_for(self, frames: u32) -> Vec<GridLayout> {
        match self {
            GridSpec::Fixed(g) => vec![g],
            GridSpec::SingleRow => GridLayout::row(frames).into_iter().collect(),
            GridSpec::All => enumerate_grids(frames).unwrap_or_default(),
        }
    }
}

impl TryFrom<String> for GridSpec {
    type Error = String;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        match s.trim() {
            "single_row" | "1xN" => Ok(GridSpec::SingleRow),
            "all" => Ok(GridSpec::All),
            other => other.parse().map(GridSpec::Fixed).map_err(|e: ConfigError| e.to_string()),
        }
    }
}

impl From<GridSpec> for String {
    fn from(g: GridSpec) -> String {
        match g {
            GridSpec::Fixed(g) => format!("{}x{}", g.rows, g.cols),
            GridSpec::SingleRow => "single_row".into(),
            GridSpec::All => "all".into(),
        }
    }
}

fn default_evaluations() -> u32 {
    10
}

/// One phase of the protocol. Every axis lists the values it takes; the
/// `varied` axis is the one under study and the others are held fixed (a
/// fixed axis may still hold two values, e.g. the two resolution extremes).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhasePlan {
    pub phase: u8,
    pub varied: Dimension,
    pub resolutions: Vec<u8>,
    pub frame_counts: Vec<u32>,
    pub intervals_ms: Vec<u32>,
    pub grid: GridSpec,
    pub modes: Vec<PresentationMode>,
    #[serde(default = "default_evaluations")]
    pub evaluations_per_config: u32,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlanError {
    #[error("phase {phase}: {message}")]
    Invalid { phase: u8, message: String },
    #[error("phase {phase}: config {config} is inconsistent: {source}")]
    Config {
        phase: u8,
        config: String,
        source: ConfigError,
    },
    #[error("plan file {path}: {message}")]
    Io { path: String, message: String },
}

const EXTREMES: [u8; 2] = [1, 6];

fn all_intervals() -> Vec<u32> {
    (MIN_INTERVAL_MS..=MAX_INTERVAL_MS)
        .step_by(INTERVAL_STEP_MS as usize)
        .collect()
}

impl PhasePlan {
    fn base(phase: u8, varied: Dimension) -> Self {
        Self {
            phase,
            varied,
            resolutions: EXTREMES.to_vec(),
            frame_counts: vec![4],
            intervals_ms: vec![200],
            grid: GridSpec::Fixed(GridLayout { rows: 2, cols: 2 }),
            modes: vec![PresentationMode::Collage],
            evaluations_per_config: default_evaluations(),
            seed: 0,
        }
    }

    /// Resolution: all six levels; 2×2 collage at 200 ms.
    pub fn resolution_phase() -> Self {
        Self {
            resolutions: (1..=6).collect(),
            ..Self::base(1, Dimension::Resolution)
        }
    }

    /// Frame count: 1 to 10 frames in a 1×N collage at 200 ms, levels 1 and 6.
    pub fn frame_count_phase() -> Self {
        Self {
            frame_counts: (1..=MAX_FRAMES).collect(),
            grid: GridSpec::SingleRow,
            ..Self::base(2, Dimension::Frames)
        }
    }

    /// Interval: 100 to 1000 ms; 4 frames in a 1×4 collage, levels 1 and 6.
    pub fn interval_phase() -> Self {
        Self {
            intervals_ms: all_intervals(),
            grid: GridSpec::Fixed(GridLayout { rows: 1, cols: 4 }),
            ..Self::base(3, Dimension::Interval)
        }
    }

    /// Layout: every grid for every frame count at 200 ms, levels 1 and 6.
    pub fn layout_phase() -> Self {
        Self {
            frame_counts: (1..=MAX_FRAMES).collect(),
            grid: GridSpec::All,
            ..Self::base(4, Dimension::Grid)
        }
    }

    /// Presentation: collage, separate and batch with 4 frames (2×2) at
    /// 200 ms, levels 1 and 6.
    pub fn presentation_phase() -> Self {
        Self {
            modes: PresentationMode::ALL.to_vec(),
            ..Self::base(5, Dimension::Mode)
        }
    }

    /// The five standard phases in order.
    pub fn standard() -> Vec<Self> {
        vec![
            Self::resolution_phase(),
            Self::frame_count_phase(),
            Self::interval_phase(),
            Self::layout_phase(),
            Self::presentation_phase(),
        ]
    }

    pub fn standard_phase(phase: u8) -> Option<Self> {
        Self::standard().into_iter().find(|p| p.phase == phase)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_evaluations(mut self, n: u32) -> Self {
        self.evaluations_per_config = n;
        self
    }

    /// Reads a plan file holding either one plan or a list of plans.
    pub fn load_all(path: impl AsRef<Path>) -> Result<Vec<Self>, PlanError> {
        let path = path.as_ref();
        let io = |message: String| PlanError::Io {
            path: path.display().to_string(),
            message,
        };
        let text = std::fs::read_to_string(path).map_err(|e| io(e.to_string()))?;
        let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| io(e.to_string()))?;
        let plans: Vec<Self> = if value.is_array() {
            serde_json::from_value(value)
        } else {
            serde_json::from_value(value).map(|p| vec![p])
        }
        .map_err(|e| io(e.to_string()))?;
        for p in &plans {
            p.validate()?;
        }
        Ok(plans)
    }

    pub fn validate(&self) -> Result<(), PlanError> {
        let invalid = |message: String| PlanError::Invalid {
            phase: self.phase,
            message,
        };
        if self.resolutions.is_empty()
            || self.frame_counts.is_empty()
            || self.intervals_ms.is_empty()
            || self.modes.is_empty()
        {
            return Err(invalid("every axis needs at least one value".into()));
        }
        if self.evaluations_per_config == 0 {
            return Err(invalid("evaluations_per_config must be positive".into()));
        }
        for &l in &self.resolutions {
            Resolution::from_level(l).map_err(|e| invalid(e.to_string()))?;
        }
        if self.varied == Dimension::Grid && matches!(self.grid, GridSpec::Fixed(_)) {
            return Err(invalid("a varied grid needs grid \"all\" or \"single_row\"".into()));
        }
        self.expand().map(|_| ())
    }

    /// The cross product of all axes, validated and deduplicated, in a
    /// stable order.
    pub fn expand(&self) -> Result<Vec<SamplingConfig>, PlanError> {
        let mut out = Vec::new();
        let mut seen = HashSet::new();
        for &level in &self.resolutions {
            let resolution = Resolution::from_level(level).map_err(|e| PlanError::Invalid {
                phase: self.phase,
                message: e.to_string(),
            })?;
            for &frames in &self.frame_counts {
                let grids = self.grid.grids_for(frames);
                if grids.is_empty() {
                    return Err(PlanError::Invalid {
                        phase: self.phase,
                        message: format!("no grid for {frames} frames"),
                    });
                }
                for &interval in &self.intervals_ms {
                    for &grid in &grids {
                        for &mode in &self.modes {
                            let config = SamplingConfig {
                                interval_ms: interval,
                                frame_count: frames,
                                resolution,
                                grid,
                                mode,
                            };
                            config.validate().map_err(|source| PlanError::Config {
                                phase: self.phase,
                                config: config.key(),
                                source,
                            })?;
                            if seen.insert(config.key()) {
                                out.push(config);
                            }
                        }
                    }
                }
            }
        }
        Ok(out)
    }
}

/// Configs per phase and their sum over `plans`.
pub fn expansion_counts(plans: &[PhasePlan]) -> Result<(Vec<usize>, usize), PlanError> {
    let counts = plans
        .iter()
        .map(|p| p.expand().map(|c| c.len()))
        .collect::<Result<Vec<_>, _>>()?;
    let total = counts.iter().sum();
    Ok((counts, total))
}
