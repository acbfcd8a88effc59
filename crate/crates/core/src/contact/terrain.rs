//! One-dimensional height-field terrain laid over a rigid flat floor.

use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TerrainConfig {
    pub cell_size: f64,
    pub span: f64,
    /// World x of the first cell when `x_offset` is zero.
    pub start_x: f64,
    /// Peak obstacle height used when generating the field.
    pub peak_height: f64,
    /// `x_offset` is drawn from `[-x_offset_range, x_offset_range]`.
    pub x_offset_range: f64,
    /// `z_offset` is drawn from `[z_offset_min, 0]`.
    pub z_offset_min: f64,
}

impl Default for TerrainConfig {
    fn default() -> Self {
        Self {
            cell_size: 0.04,
            span: 10.0,
            start_x: -1.0,
            peak_height: 0.04,
            x_offset_range: 0.5,
            z_offset_min: -0.04,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TerrainField {
    pub heights: Vec<f64>,
    pub cell_size: f64,
    pub start_x: f64,
    pub x_offset: f64,
    pub z_offset: f64,
}

impl TerrainField {
    /// A field with no obstacles; `height_at` is 0 everywhere.
    pub fn flat(config: &TerrainConfig) -> Self {
        Self::from_unit_samples(config, std::iter::repeat(0.0), 0.0)
    }

    /// Samples every cell height i.i.d. from `U[0, peak_height]`.
    ///
    /// Heights are drawn as unit samples scaled by the peak, so one seed yields
    /// the same obstacle layout at every peak height.
    pub fn generate(config: &TerrainConfig, rng: &mut impl Rng, peak_height: f64) -> Self {
        assert!(peak_height >= 0.0, "peak height must be non-negative");
        let cells = num_cells(config);
        let samples: Vec<f64> = (0..cells).map(|_| rng.gen::<f64>()).collect();
        Self::from_unit_samples(config, samples, peak_height)
    }

    fn from_unit_samples(config: &TerrainConfig, samples: impl IntoIterator<Item = f64>, peak: f64) -> Self {
        let cells = num_cells(config);
        Self {
            heights: samples.into_iter().take(cells).map(|u| u * peak).collect(),
            cell_size: config.cell_size,
            start_x: config.start_x,
            x_offset: 0.0,
            z_offset: 0.0,
        }
    }

    pub fn peak(&self) -> f64 {
        self.heights.iter().copied().fold(0.0, f64::max)
    }

    fn cell_height(&self, x: f64) -> Option<f64> {
        let local = (x - self.x_offset - self.start_x) / self.cell_size;
        if local < 0.0 {
            return None;
        }
        self.heights.get(local.floor() as usize).copied()
    }

    /// Ground height under `x`: the shifted field or the flat floor, whichever is higher.
    pub fn height_at(&self, x: f64) -> f64 {
        match self.cell_height(x) {
            Some(h) => (h + self.z_offset).max(0.0),
            None => 0.0,
        }
    }

    /// Moves the field to fresh random offsets unless the robot is in double support.
    /// Returns whether the offsets changed.
    pub fn randomize(&mut self, config: &TerrainConfig, rng: &mut impl Rng, in_double_support: bool) -> bool {
        if in_double_support {
            return false;
        }
        let r = config.x_offset_range;
        self.x_offset = if r > 0.0 { rng.gen_range(-r..=r) } else { 0.0 };
        self.z_offset = if config.z_offset_min < 0.0 {
            rng.gen_range(config.z_offset_min..=0.0)
        } else {
            0.0
        };
        true
    }
}

fn num_cells(config: &TerrainConfig) -> usize {
    (config.span / config.cell_size).round() as usize
}
