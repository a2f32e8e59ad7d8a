//! Run lifecycle: integrate a scenario to `t_end` and write its artifacts.

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use log::{info, warn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec;
use crate::io::frames::{eikonal_file_name, frame_file_name, write_eikonal_dump, write_frame, Frame};
use crate::io::summary::{write_summary, SummarySeries};
use crate::params::ModelParams;
use crate::scenario::{RunControls, Scenario};
use crate::sim::{Diagnostics, Simulation};

pub const FRAMES_DIR: &str = "frames";
pub const METADATA_FILE: &str = "run.json";
pub const RESOLVED_SCENARIO_FILE: &str = "scenario.resolved.scn";
pub const TRUNCATED_FILE: &str = "TRUNCATED";

/// Contents of `run.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunMetadata {
    pub name: String,
    pub version: String,
    /// Fully resolved scenario next to this file.
    pub scenario_file: String,
    pub params: ModelParams,
    pub run: RunControls,
    pub particles: usize,
    pub steps: u64,
    pub threads: usize,
    pub truncated: bool,
    pub error: Option<String>,
    pub final_exposed_percent: f64,
    pub exited: usize,
    pub wall_clock_s: f64,
    pub diagnostics: Diagnostics,
}

/// What a finished run reports back.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub final_exposed_percent: f64,
    pub exited: usize,
    pub steps: u64,
    pub wall_clock: Duration,
    pub series: SummarySeries,
    pub diagnostics: Diagnostics,
    pub output_dir: Option<PathBuf>,
}

pub fn read_metadata(dir: &Path) -> Result<RunMetadata> {
    let path = dir.join(METADATA_FILE);
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        path,
        message: e.to_string(),
    })
}

fn steps_per(interval: f64, dt: f64) -> u64 {
    ((interval / dt).round() as u64).max(1)
}

struct Writer {
    dir: PathBuf,
    frames: PathBuf,
    dump_eikonal: bool,
}

impl Writer {
    fn create(dir: &Path, scenario: &Scenario) -> Result<Self> {
        let frames = dir.join(FRAMES_DIR);
        std::fs::create_dir_all(&frames).map_err(|e| Error::io(&frames, e))?;
        let marker = dir.join(TRUNCATED_FILE);
        if marker.exists() {
            std::fs::remove_file(&marker).map_err(|e| Error::io(&marker, e))?;
        }
        scenario.save(dir.join(RESOLVED_SCENARIO_FILE))?;
        Ok(Writer {
            dir: dir.to_path_buf(),
            frames,
            dump_eikonal: scenario.run.dump_eikonal,
        })
    }

    fn frame(&self, sim: &Simulation, index: u64) -> Result<()> {
        let s = sim.state();
        let frame = Frame::from_particles(s.t, &s.particles, sim.params().exposure_threshold);
        write_frame(&self.frames.join(frame_file_name(index)), &frame)?;
        if self.dump_eikonal {
            if let Some(nav) = &s.navigation {
                write_eikonal_dump(&self.frames.join(eikonal_file_name(index)), s.t, nav)?;
            }
        }
        Ok(())
    }

    fn finish(&self, sim: &Simulation, series: &SummarySeries, wall: Duration, error: Option<&Error>) -> Result<()> {
        write_summary(&self.dir, series)?;
        let s = sim.state();
        let meta = RunMetadata {
            name: sim.scenario().name.clone(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            scenario_file: RESOLVED_SCENARIO_FILE.to_string(),
            params: sim.params().clone(),
            run: sim.scenario().run.clone(),
            particles: s.particles.len(),
            steps: s.step,
            threads: exec::worker_threads(),
            truncated: error.is_some(),
            error: error.map(|e| e.to_string()),
            final_exposed_percent: sim.exposed_percent(),
            exited: s.diagnostics.removed_particles,
            wall_clock_s: wall.as_secs_f64(),
            diagnostics: s.diagnostics.clone(),
        };
        let path = self.dir.join(METADATA_FILE);
        let json = serde_json::to_string_pretty(&meta).map_err(|e| Error::Data(e.to_string()))?;
        std::fs::write(&path, json).map_err(|e| Error::io(&path, e))?;
        if let Some(e) = error {
            let marker = self.dir.join(TRUNCATED_FILE);
            std::fs::write(&marker, format!("{e}\n")).map_err(|e| Error::io(&marker, e))?;
        }
        Ok(())
    }
}

/// Integrate `scenario` to `t_end`, writing into `scenario.run.output_dir`
/// when one is set.
pub fn run(scenario: &Scenario) -> Result<RunOutcome> {
    let out = scenario.run.output_dir.clone();
    run_simulation(Simulation::new(scenario.clone())?, out.as_deref())
}

/// Drive `sim` to its `t_end`. Frames go to `out/frames` every frame
/// interval, the summary series and metadata at the end; an aborted run
/// still writes what it has and leaves a `TRUNCATED` marker.
pub fn run_simulation(mut sim: Simulation, out: Option<&Path>) -> Result<RunOutcome> {
    let started = Instant::now();
    let writer = out.map(|d| Writer::create(d, sim.scenario())).transpose()?;
    let params = sim.params().clone();
    let total = params.total_steps();
    let frame_every = steps_per(sim.scenario().run.frame_interval, params.dt);
    let summary_every = steps_per(sim.scenario().run.summary_interval, params.dt);
    let mut series = SummarySeries::new(sim.state().obstacles.iter().map(|o| o.id.clone()).collect());

    let record = |sim: &Simulation, series: &mut SummarySeries| -> Result<()> {
        let step = sim.state().step;
        if step % summary_every == 0 {
            series.record(sim.state(), sim.exposed_percent());
        }
        if let Some(w) = &writer {
            if step % frame_every == 0 {
                w.frame(sim, step / frame_every)?;
            }
        }
        Ok(())
    };

    info!(
        "running '{}': {} particles, {} steps",
        sim.scenario().name,
        sim.state().particles.len(),
        total
    );
    let mut failure = record(&sim, &mut series).err();
    while failure.is_none() && sim.state().step < total {
        failure = sim.advance().and_then(|_| record(&sim, &mut series)).err();
        let step = sim.state().step;
        if step % (100 * summary_every) == 0 {
            info!("t = {:.1} s, exposed {:.2} %", sim.state().t, sim.exposed_percent());
        }
    }
    let wall = started.elapsed();
    if let Some(w) = &writer {
        if let Err(e) = w.finish(&sim, &series, wall, failure.as_ref()) {
            warn!("could not finish output directory: {e}");
            if failure.is_none() {
                return Err(e);
            }
        }
    }
    if let Some(e) = failure {
        return Err(e);
    }
    let s = sim.state();
    Ok(RunOutcome {
        final_exposed_percent: sim.exposed_percent(),
        exited: s.diagnostics.removed_particles,
        steps: s.step,
        wall_clock: wall,
        series,
        diagnostics: s.diagnostics.clone(),
        output_dir: out.map(Path::to_path_buf),
    })
}
