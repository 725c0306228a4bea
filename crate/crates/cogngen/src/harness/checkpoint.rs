//! Whole-agent checkpoints.
//!
//! A checkpoint is a JSON manifest (circuits, slot buffer, exploration state,
//! counters) plus a binary sidecar holding the episodic trace table, which is
//! far too large to serialize as text. The sidecar lives next to the manifest
//! and is referenced by file name, so a checkpoint can be moved as a pair.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dynamics::DynamicsModel;
use crate::episodic::EpisodicMemory;
use crate::gridworld::Task;
use crate::motor::{ExplorationSchedule, MotorModel};
use crate::ngc::Scalar;
use crate::slotwm::SlotBuffer;
use crate::{Error, Result};

use super::cogngen_loop::CogNGenAgent;
use super::CogNGenParams;

const VERSION: &str = "cogngen-checkpoint-v1";

#[derive(Serialize, Deserialize)]
#[serde(bound = "")]
struct Manifest<F: Scalar> {
    version: String,
    task: Task,
    params: CogNGenParams,
    slot: SlotBuffer<F>,
    dynamics: DynamicsModel<F>,
    motor: MotorModel<F>,
    schedule: ExplorationSchedule,
    env_steps: u64,
    episodic_file: String,
}

fn sidecar_name(path: &Path) -> String {
    let base = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "checkpoint".to_string());
    format!("{base}.mem")
}

/// Write the agent to `path` (manifest) and `path.mem` (trace table).
pub fn save<F: Scalar>(path: &Path, agent: &CogNGenAgent<F>) -> Result<()> {
    if let Some(dir) = path.parent()
        && !dir.as_os_str().is_empty()
    {
        std::fs::create_dir_all(dir)?;
    }
    let episodic_file = sidecar_name(path);
    let manifest = Manifest {
        version: VERSION.to_string(),
        task: agent.task,
        params: agent.params,
        slot: agent.slot.clone(),
        dynamics: agent.dynamics.clone(),
        motor: agent.motor.clone(),
        schedule: agent.schedule,
        env_steps: agent.env_steps,
        episodic_file: episodic_file.clone(),
    };
    let out = BufWriter::new(File::create(path)?);
    serde_json::to_writer(out, &manifest)?;
    let sidecar = path.with_file_name(episodic_file);
    let mut out = BufWriter::new(File::create(sidecar)?);
    agent.episodic.write_binary(&mut out)?;
    Ok(())
}

/// Restore an agent saved with [`save`].
pub fn load<F: Scalar>(path: &Path) -> Result<CogNGenAgent<F>> {
    let manifest: Manifest<F> = serde_json::from_reader(BufReader::new(File::open(path)?))?;
    if manifest.version != VERSION {
        return Err(Error::config(format!(
            "unsupported checkpoint version '{}'",
            manifest.version
        )));
    }
    let sidecar = path.with_file_name(&manifest.episodic_file);
    let mut reader = BufReader::new(File::open(&sidecar).map_err(|e| {
        Error::config(format!(
            "checkpoint sidecar {} is missing: {e}",
            sidecar.display()
        ))
    })?);
    let episodic = EpisodicMemory::read_binary(&mut reader)?;
    Ok(CogNGenAgent {
        params: manifest.params,
        task: manifest.task,
        slot: manifest.slot,
        dynamics: manifest.dynamics,
        motor: manifest.motor,
        episodic,
        schedule: manifest.schedule,
        env_steps: manifest.env_steps,
    })
}
