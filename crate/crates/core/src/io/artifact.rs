//! Built-model artifacts: bricks, regions and the optional brick tree.

use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bricks::{BrickBuildParams, BrickKdTree};
use crate::error::Error;
use crate::model::AmrModel;
use crate::regions::ActiveBrickRegion;
use crate::scene::VolumeData;

const MAGIC: &[u8; 4] = b"AMRB";
const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Payload {
    params: BrickBuildParams,
    model: AmrModel,
    regions: Vec<ActiveBrickRegion>,
    kd_tree: Option<BrickKdTree>,
}

pub fn save_artifact(path: impl AsRef<Path>, data: &VolumeData, params: &BrickBuildParams) -> Result<(), Error> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    let payload = PayloadRef {
        params,
        model: &data.model,
        regions: &data.regions,
        kd_tree: &data.kd_tree,
    };
    bincode::serialize_into(&mut w, &payload).map_err(|e| Error::Artifact(e.to_string()))?;
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct PayloadRef<'a> {
    params: &'a BrickBuildParams,
    model: &'a AmrModel,
    regions: &'a [ActiveBrickRegion],
    kd_tree: &'a Option<BrickKdTree>,
}

/// Loads an artifact and rebuilds the point-location hierarchy.
pub fn load_artifact(path: impl AsRef<Path>) -> Result<(VolumeData, BrickBuildParams), Error> {
    let mut r = BufReader::new(std::fs::File::open(path)?);
    let mut header = [0u8; 8];
    r.read_exact(&mut header)
        .map_err(|_| Error::Artifact("file too short for an artifact header".into()))?;
    if &header[..4] != MAGIC {
        return Err(Error::Artifact("not a brick artifact (bad magic)".into()));
    }
    let version = u32::from_le_bytes(header[4..].try_into().unwrap());
    if version != VERSION {
        return Err(Error::Artifact(format!("unsupported artifact version {version}")));
    }
    let p: Payload = bincode::deserialize_from(&mut r).map_err(|e| Error::Artifact(e.to_string()))?;
    if p.model.scalars.len() != p.model.fields.len()
        || p.model.scalars.iter().any(|s| s.len() != p.model.cell_count())
    {
        return Err(Error::Artifact("scalar arrays do not match the bricks".into()));
    }
    Ok((VolumeData::new(p.model, p.regions, p.kd_tree), p.params))
}
