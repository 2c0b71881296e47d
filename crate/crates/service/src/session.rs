//! Shared render state.
//!
//! Renders read an immutable [`Snapshot`]. Edits are serialized: each one
//! builds the next snapshot (rebuilding hierarchies where needed) and then
//! swaps it in, so a frame never sees a half-applied edit.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};
use std::time::{Duration, Instant};

use amrvol_core::io::encode_png;
use amrvol_core::{
    region_stats, render_frame, Camera, DVec3, FrameStats, GradientMode, MarchParams, Scene,
    TransferFunction,
};
use serde::Serialize;

use crate::error::ServiceError;

/// Largest accepted frame edge, in pixels.
pub const MAX_FRAME_EDGE: u32 = 4096;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CameraPose {
    pub pos: DVec3,
    pub look: DVec3,
    pub up: DVec3,
    pub fov: f64,
}

impl CameraPose {
    /// Default view from outside the scene bounds.
    pub fn overview(scene: &Scene) -> Self {
        let b = scene.model().bounds;
        let cam = Camera::orbit(&b, 35.0, 25.0, 1.8, 45.0, 1, 1)
            .unwrap_or_else(|_| Camera::look_at(DVec3::Z * 4.0, DVec3::ZERO, DVec3::Y, 45.0, 1, 1).unwrap());
        Self { pos: cam.position, look: b.center(), up: DVec3::Y, fov: 45.0 }
    }

    pub fn camera(&self, width: u32, height: u32) -> Result<Camera, ServiceError> {
        Ok(Camera::look_at(self.pos, self.look, self.up, self.fov, width, height)?)
    }
}

/// Everything a frame is rendered from.
#[derive(Clone, Debug)]
pub struct Snapshot {
    pub scene: Scene,
    pub pose: CameraPose,
    pub params: MarchParams,
    /// Increases with every published edit.
    pub version: u64,
    /// Increases with every edit that rebuilt a hierarchy.
    pub rebuild_seq: u64,
    /// Time spent rebuilding for the latest rebuild.
    pub rebuild_ms: f64,
}

#[derive(Clone, Copy, Debug, Default)]
pub struct SessionOptions {
    /// Artificial delay added to every rebuild, to exercise edits that overlap
    /// with rendering.
    pub rebuild_delay: Option<Duration>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SceneInfo {
    pub fields: Vec<String>,
    pub bounds: [[f64; 3]; 2],
    pub value_range: [f64; 2],
    pub stats: SceneStats,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SceneStats {
    pub cells: usize,
    pub bricks: usize,
    pub regions: usize,
    pub avg_bricks_per_region: f64,
    pub avg_bricks_per_region_by_volume: f64,
}

#[derive(Clone, Debug)]
pub struct RenderedFrame {
    pub id: u64,
    pub width: u32,
    pub height: u32,
    pub png: Vec<u8>,
    pub stats: FrameStats,
    /// Version of the snapshot the frame was rendered from.
    pub version: u64,
}

/// Optional parameter edits; absent fields are left alone.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ParamsEdit {
    pub rate_scale: Option<f64>,
    pub gradient: Option<GradientMode>,
    pub seed: Option<u64>,
}

pub struct Session {
    current: RwLock<Arc<Snapshot>>,
    edits: tokio::sync::Mutex<()>,
    pending_tf: Mutex<Option<TransferFunction>>,
    pending_iso: Mutex<Option<Option<f64>>>,
    next_frame: AtomicU64,
    reported_rebuild: Mutex<u64>,
    info: SceneInfo,
    options: SessionOptions,
}

impl Session {
    pub fn new(scene: Scene, options: SessionOptions) -> Self {
        let info = scene_info(&scene);
        let snapshot = Snapshot {
            pose: CameraPose::overview(&scene),
            params: MarchParams::default(),
            version: 0,
            rebuild_seq: 0,
            rebuild_ms: 0.0,
            scene,
        };
        Self {
            current: RwLock::new(Arc::new(snapshot)),
            edits: tokio::sync::Mutex::new(()),
            pending_tf: Mutex::new(None),
            pending_iso: Mutex::new(None),
            next_frame: AtomicU64::new(1),
            reported_rebuild: Mutex::new(0),
            info,
            options,
        }
    }

    pub fn info(&self) -> &SceneInfo {
        &self.info
    }

    pub fn snapshot(&self) -> Arc<Snapshot> {
        self.current.read().unwrap().clone()
    }

    fn publish(&self, next: Snapshot) {
        *self.current.write().unwrap() = Arc::new(next);
    }

    /// Replaces the transfer function and rebuilds the volume hierarchy.
    /// Edits queued while a rebuild runs are coalesced: only the latest
    /// transfer function is built.
    pub async fn set_tf(&self, tf: TransferFunction) -> Result<(), ServiceError> {
        tf.validate()?;
        *self.pending_tf.lock().unwrap() = Some(tf);
        let _guard = self.edits.lock().await;
        // an earlier holder of the lock may already have applied this edit
        let Some(tf) = self.pending_tf.lock().unwrap().take() else { return Ok(()) };
        let base = self.snapshot();
        let delay = self.options.rebuild_delay;
        let scene = tokio::task::spawn_blocking(move || {
            let start = Instant::now();
            if let Some(d) = delay {
                std::thread::sleep(d);
            }
            base.scene.with_tf(tf).map(|s| (s, start.elapsed().as_secs_f64() * 1e3))
        })
        .await
        .map_err(|e| ServiceError::Render(e.to_string()))?;
        let (scene, ms) = scene?;
        let base = self.snapshot();
        self.publish(Snapshot {
            scene,
            version: base.version + 1,
            rebuild_seq: base.rebuild_seq + 1,
            rebuild_ms: ms,
            ..(*base).clone()
        });
        Ok(())
    }

    /// Sets or clears the iso-value and rebuilds the iso hierarchy only.
    pub async fn set_iso(&self, iso: Option<f64>) -> Result<(), ServiceError> {
        if iso.is_some_and(|v| !v.is_finite()) {
            return Err(ServiceError::Invalid("iso value must be finite".into()));
        }
        *self.pending_iso.lock().unwrap() = Some(iso);
        let _guard = self.edits.lock().await;
        let Some(iso) = self.pending_iso.lock().unwrap().take() else { return Ok(()) };
        let base = self.snapshot();
        let delay = self.options.rebuild_delay;
        let (scene, ms) = tokio::task::spawn_blocking(move || {
            let start = Instant::now();
            if let Some(d) = delay {
                std::thread::sleep(d);
            }
            let s = base.scene.with_iso(iso);
            (s, start.elapsed().as_secs_f64() * 1e3)
        })
        .await
        .map_err(|e| ServiceError::Render(e.to_string()))?;
        let base = self.snapshot();
        self.publish(Snapshot {
            scene,
            version: base.version + 1,
            rebuild_seq: base.rebuild_seq + 1,
            rebuild_ms: ms,
            ..(*base).clone()
        });
        Ok(())
    }

    pub async fn set_camera(&self, pose: CameraPose) -> Result<(), ServiceError> {
        pose.camera(1, 1)?;
        let _guard = self.edits.lock().await;
        let base = self.snapshot();
        self.publish(Snapshot { pose, version: base.version + 1, ..(*base).clone() });
        Ok(())
    }

    pub async fn set_params(&self, edit: ParamsEdit) -> Result<(), ServiceError> {
        let _guard = self.edits.lock().await;
        let base = self.snapshot();
        let mut params = base.params.clone();
        if let Some(r) = edit.rate_scale {
            params.rate_scale = r;
        }
        if let Some(g) = edit.gradient {
            params.gradient = g;
        }
        if let Some(s) = edit.seed {
            params.seed = s;
        }
        params.validate()?;
        self.publish(Snapshot { params, version: base.version + 1, ..(*base).clone() });
        Ok(())
    }

    /// Renders the current snapshot. The rebuild time of a snapshot is
    /// reported by the first frame rendered from it and zero afterwards.
    pub async fn render(&self, width: u32, height: u32) -> Result<RenderedFrame, ServiceError> {
        if width == 0 || height == 0 || width > MAX_FRAME_EDGE || height > MAX_FRAME_EDGE {
            return Err(ServiceError::Invalid(format!(
                "frame size must be between 1x1 and {MAX_FRAME_EDGE}x{MAX_FRAME_EDGE}, got {width}x{height}"
            )));
        }
        let snap = self.snapshot();
        let camera = snap.pose.camera(width, height)?;
        let render_snap = snap.clone();
        let (frame, png) = tokio::task::spawn_blocking(move || {
            let frame = render_frame(&render_snap.scene, &camera, &render_snap.params)?;
            let png = encode_png(frame.width, frame.height, &frame.pixels)?;
            Ok::<_, ServiceError>((frame, png))
        })
        .await
        .map_err(|e| ServiceError::Render(e.to_string()))??;
        let mut stats = frame.stats;
        {
            let mut reported = self.reported_rebuild.lock().unwrap();
            if snap.rebuild_seq > *reported {
                *reported = snap.rebuild_seq;
                stats.bvh_rebuild_ms = snap.rebuild_ms;
            }
        }
        Ok(RenderedFrame {
            id: self.next_frame.fetch_add(1, Ordering::SeqCst),
            width,
            height,
            png,
            stats,
            version: snap.version,
        })
    }
}

fn scene_info(scene: &Scene) -> SceneInfo {
    let model = scene.model();
    let rs = region_stats(scene.regions());
    let (lo, hi) = model.value_range(scene.field);
    SceneInfo {
        fields: model.fields.clone(),
        bounds: [model.bounds.lo.to_array(), model.bounds.hi.to_array()],
        value_range: [lo as f64, hi as f64],
        stats: SceneStats {
            cells: model.cell_count(),
            bricks: model.bricks.len(),
            regions: rs.regions,
            avg_bricks_per_region: rs.avg_bricks_by_count,
            avg_bricks_per_region_by_volume: rs.avg_bricks_by_volume,
        },
    }
}
