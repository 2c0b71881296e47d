//! Optional JSON file with defaults for the flags.

use std::path::Path;

use amrvol_core::MarchParams;
use serde::Deserialize;

use crate::{usage, CliError};

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(rename_all = "camelCase", default, deny_unknown_fields)]
pub struct CliConfig {
    /// Ray-marching defaults (same keys as the library's `MarchParams`).
    pub march: MarchParams,
    pub max_brick_width: u32,
    pub resolution: [u32; 2],
    pub fov: f64,
    pub port: u16,
}

impl Default for CliConfig {
    fn default() -> Self {
        Self {
            march: MarchParams::default(),
            max_brick_width: amrvol_core::bricks::DEFAULT_MAX_BRICK_WIDTH,
            resolution: [512, 512],
            fov: 45.0,
            port: amrvol_service::DEFAULT_PORT,
        }
    }
}

impl CliConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else { return Ok(Self::default()) };
        let text = std::fs::read_to_string(path)
            .map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
        let config: CliConfig = serde_json::from_str(&text)
            .map_err(|e| usage(format!("config {}: {e}", path.display())))?;
        config.march.validate().map_err(|e| usage(format!("config {}: {e}", path.display())))?;
        let [w, h] = config.resolution;
        if w == 0 || h == 0 || config.max_brick_width == 0 {
            return Err(usage(format!("config {}: sizes must be positive", path.display())));
        }
        Ok(config)
    }
}
