use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use anyhow::Context;
use interplay_core::vision::ColorPalette;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub listen: SocketAddr,
    pub checkpoint: PathBuf,
    /// Loaded at startup when present; `POST /calibration` writes it.
    pub calibration: Option<PathBuf>,
    /// Session journals live in `data_dir/sessions`.
    pub data_dir: PathBuf,
    pub palette: ColorPalette,
    pub log_level: String,
    /// Projector resolution, in pixels, of the suggestion overlay.
    pub projector_size: (u32, u32),
    /// Overlay stroke width in projector pixels.
    pub overlay_width_px: f64,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            listen: SocketAddr::from(([127, 0, 0, 1], 8080)),
            checkpoint: PathBuf::from("model.iskt"),
            calibration: None,
            data_dir: PathBuf::from("data"),
            palette: ColorPalette::default(),
            log_level: "info".into(),
            projector_size: (1920, 1080),
            overlay_width_px: 4.0,
        }
    }
}

impl ServiceConfig {
    /// Reads a JSON config; missing fields take their defaults.
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn sessions_dir(&self) -> PathBuf {
        self.data_dir.join("sessions")
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        self.palette.validate().context("palette")?;
        let (w, h) = self.projector_size;
        anyhow::ensure!(
            w > 0 && h > 0,
            "projector size must be non-zero, got {w}x{h}"
        );
        anyhow::ensure!(
            self.overlay_width_px.is_finite() && self.overlay_width_px > 0.0,
            "overlay width must be positive"
        );
        Ok(())
    }
}
