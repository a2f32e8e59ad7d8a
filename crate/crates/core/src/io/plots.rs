//! Static SVG figures from run directories.

use std::path::{Path, PathBuf};

use log::warn;
use plotters::prelude::*;

use crate::contagion::Label;
use crate::error::{Error, Result};
use crate::io::frames::{frame_file_name, read_frame, Frame};
use crate::io::run::{read_metadata, FRAMES_DIR, RESOLVED_SCENARIO_FILE};
use crate::io::summary::{obstacle_file_name, read_exposure, read_obstacle_track, EXPOSURE_FILE};
use crate::scenario::{load_scenario, Scenario};

/// Snapshot times of the scatter and density figures (s).
pub const SNAPSHOT_TIMES: [f64; 4] = [10.0, 20.0, 30.0, 40.0];

/// Edge of the density heatmap cells (m).
pub const DENSITY_CELL: f64 = 2.0;

const WIDTH: u32 = 900;

fn plot_err<E: std::fmt::Display>(path: &Path) -> impl Fn(E) -> Error + '_ {
    move |e| Error::Data(format!("plotting {}: {e}", path.display()))
}

pub fn label_color(label: Label) -> RGBColor {
    match label {
        Label::Infected => RED,
        Label::Exposed => BLUE,
        Label::Susceptible => GREEN,
    }
}

/// Exposed percentage against time, one line per run.
pub fn plot_exposure(series: &[(String, Vec<(f64, f64)>)], path: &Path) -> Result<()> {
    let err = plot_err(path);
    let t_max = series
        .iter()
        .flat_map(|(_, s)| s.iter().map(|p| p.0))
        .fold(0.0f64, f64::max)
        .max(1e-9);
    let y_max = series
        .iter()
        .flat_map(|(_, s)| s.iter().map(|p| p.1))
        .fold(0.0f64, f64::max)
        .max(1.0)
        * 1.1;
    let root = SVGBackend::new(path, (WIDTH, 500)).into_drawing_area();
    root.fill(&WHITE).map_err(&err)?;
    let mut chart = ChartBuilder::on(&root)
        .margin(15)
        .x_label_area_size(40)
        .y_label_area_size(50)
        .build_cartesian_2d(0.0..t_max, 0.0..y_max)
        .map_err(&err)?;
    chart
        .configure_mesh()
        .x_desc("t (s)")
        .y_desc("exposed (%)")
        .draw()
        .map_err(&err)?;
    for (k, (name, s)) in series.iter().enumerate() {
        let color = Palette99::pick(k).to_rgba();
        chart
            .draw_series(LineSeries::new(s.iter().copied(), color.stroke_width(2)))
            .map_err(&err)?
            .label(name.clone())
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], color.stroke_width(2)));
    }
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .draw()
        .map_err(&err)?;
    root.present().map_err(&err)
}

fn domain_area<'a>(path: &'a Path, scenario: &Scenario) -> DrawingArea<SVGBackend<'a>, plotters::coord::Shift> {
    let (w, h) = (scenario.domain.width, scenario.domain.height);
    let height = ((WIDTH as f64) * h / w).round() as u32 + 60;
    SVGBackend::new(path, (WIDTH, height.max(200))).into_drawing_area()
}

/// Alive particles coloured by label, obstacles as grey rectangles.
pub fn plot_labels(frame: &Frame, scenario: &Scenario, obstacles: &[[f64; 4]], path: &Path) -> Result<()> {
    let err = plot_err(path);
    let root = domain_area(path, scenario);
    root.fill(&WHITE).map_err(&err)?;
    let mut chart = ChartBuilder::on(&root)
        .margin(10)
        .caption(format!("t = {:.1} s", frame.t), ("sans-serif", 18))
        .x_label_area_size(30)
        .y_label_area_size(40)
        .build_cartesian_2d(0.0..scenario.domain.width, 0.0..scenario.domain.height)
        .map_err(&err)?;
    chart.configure_mesh().disable_mesh().draw().map_err(&err)?;
    draw_obstacles(&mut chart, obstacles).map_err(&err)?;
    chart
        .draw_series(
            frame
                .rows
                .iter()
                .filter(|r| r.alive)
                .map(|r| Circle::new((r.x, r.y), 3, label_color(r.label).filled())),
        )
        .map_err(&err)?;
    root.present().map_err(&err)
}

type Chart<'a, 'b> = ChartContext<
    'a,
    SVGBackend<'b>,
    Cartesian2d<plotters::coord::types::RangedCoordf64, plotters::coord::types::RangedCoordf64>,
>;

fn draw_obstacles(
    chart: &mut Chart<'_, '_>,
    obstacles: &[[f64; 4]],
) -> std::result::Result<(), DrawingAreaErrorKind<std::io::Error>> {
    chart
        .draw_series(
            obstacles.iter().map(|[cx, cy, hx, hy]| {
                Rectangle::new([(cx - hx, cy - hy), (cx + hx, cy + hy)], BLACK.mix(0.4).filled())
            }),
        )
        .map(|_| ())
}

/// Mean particle density on square cells of `DENSITY_CELL`.
pub fn density_grid(frame: &Frame, width: f64, height: f64) -> (usize, usize, Vec<f64>) {
    let nx = (width / DENSITY_CELL).ceil() as usize;
    let ny = (height / DENSITY_CELL).ceil() as usize;
    let mut sum = vec![0.0; nx * ny];
    let mut count = vec![0usize; nx * ny];
    for r in frame.rows.iter().filter(|r| r.alive) {
        let i = ((r.x / DENSITY_CELL) as usize).min(nx - 1);
        let j = ((r.y / DENSITY_CELL) as usize).min(ny - 1);
        sum[i * ny + j] += r.rho;
        count[i * ny + j] += 1;
    }
    let mean = sum
        .iter()
        .zip(&count)
        .map(|(s, &c)| if c > 0 { s / c as f64 } else { 0.0 })
        .collect();
    (nx, ny, mean)
}

/// Heatmap of [`density_grid`] scaled to `rho_max`.
pub fn plot_density(frame: &Frame, scenario: &Scenario, obstacles: &[[f64; 4]], path: &Path) -> Result<()> {
    let err = plot_err(path);
    let (w, h) = (scenario.domain.width, scenario.domain.height);
    let (nx, ny, rho) = density_grid(frame, w, h);
    let scale = scenario.params.rho_max;
    let root = domain_area(path, scenario);
    root.fill(&WHITE).map_err(&err)?;
    let mut chart = ChartBuilder::on(&root)
        .margin(10)
        .caption(format!("density, t = {:.1} s", frame.t), ("sans-serif", 18))
        .x_label_area_size(30)
        .y_label_area_size(40)
        .build_cartesian_2d(0.0..w, 0.0..h)
        .map_err(&err)?;
    chart.configure_mesh().disable_mesh().draw().map_err(&err)?;
    chart
        .draw_series((0..nx).flat_map(|i| (0..ny).map(move |j| (i, j))).filter_map(|(i, j)| {
            let v = rho[i * ny + j];
            (v > 0.0).then(|| {
                let c = ViridisRGB::get_color_normalized(v.min(scale), 0.0, scale);
                let (x0, y0) = (i as f64 * DENSITY_CELL, j as f64 * DENSITY_CELL);
                Rectangle::new([(x0, y0), (x0 + DENSITY_CELL, y0 + DENSITY_CELL)], c.filled())
            })
        }))
        .map_err(&err)?;
    draw_obstacles(&mut chart, obstacles).map_err(&err)?;
    root.present().map_err(&err)
}

/// x-velocity of an obstacle's centre against time.
pub fn plot_obstacle_vx(track: &[[f64; 5]], id: &str, path: &Path) -> Result<()> {
    let err = plot_err(path);
    let t_max = track.last().map_or(1.0, |r| r[0]).max(1e-9);
    let v_lo = track.iter().map(|r| r[3]).fold(0.0f64, f64::min);
    let v_hi = track.iter().map(|r| r[3]).fold(0.0f64, f64::max);
    let pad = 0.1 * (v_hi - v_lo).max(0.5);
    let root = SVGBackend::new(path, (WIDTH, 450)).into_drawing_area();
    root.fill(&WHITE).map_err(&err)?;
    let mut chart = ChartBuilder::on(&root)
        .margin(15)
        .caption(format!("obstacle {id}"), ("sans-serif", 18))
        .x_label_area_size(40)
        .y_label_area_size(50)
        .build_cartesian_2d(0.0..t_max, (v_lo - pad)..(v_hi + pad))
        .map_err(&err)?;
    chart
        .configure_mesh()
        .x_desc("t (s)")
        .y_desc("v_x (m/s)")
        .draw()
        .map_err(&err)?;
    chart
        .draw_series(LineSeries::new(
            track.iter().map(|r| (r[0], r[3])),
            BLUE.stroke_width(2),
        ))
        .map_err(&err)?;
    root.present().map_err(&err)
}

fn run_label(dir: &Path) -> String {
    read_metadata(dir)
        .map(|m| m.name)
        .unwrap_or_else(|_| dir.display().to_string())
}

/// Obstacle `[cx, cy, hx, hy]` of `run` at the summary row nearest `t`.
fn obstacles_at(run: &Path, scenario: &Scenario, t: f64) -> Vec<[f64; 4]> {
    scenario
        .obstacles
        .iter()
        .map(|o| {
            let track = read_obstacle_track(&run.join(obstacle_file_name(&o.id))).unwrap_or_default();
            let pos = track
                .iter()
                .min_by(|a, b| (a[0] - t).abs().total_cmp(&(b[0] - t).abs()))
                .map_or([o.center.x, o.center.y], |r| [r[1], r[2]]);
            [pos[0], pos[1], o.half_extents.x, o.half_extents.y]
        })
        .collect()
}

/// Render every figure class available from `runs` into `out`. The exposure
/// figure overlays all runs; the others come from the first run. Figures
/// whose data are missing are skipped with a warning.
pub fn emit_plots(runs: &[PathBuf], out: &Path) -> Result<Vec<PathBuf>> {
    let primary = runs
        .first()
        .ok_or_else(|| Error::Data("no run directory given".into()))?;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let mut written = Vec::new();

    let mut series = Vec::new();
    for r in runs {
        match read_exposure(&r.join(EXPOSURE_FILE)) {
            Ok(s) => series.push((run_label(r), s)),
            Err(e) => warn!("skipping exposure series of {}: {e}", r.display()),
        }
    }
    if series.is_empty() {
        warn!("no exposure series found; skipping exposure figure");
    } else {
        let path = out.join("exposure.svg");
        plot_exposure(&series, &path)?;
        written.push(path);
    }

    let scenario = match load_scenario(primary.join(RESOLVED_SCENARIO_FILE)) {
        Ok(s) => s,
        Err(e) => {
            warn!("skipping snapshot figures: {e}");
            return Ok(written);
        }
    };
    let frame_interval = scenario.run.frame_interval;
    for &t in &SNAPSHOT_TIMES {
        let index = (t / frame_interval).round() as u64;
        let frame_path = primary.join(FRAMES_DIR).join(frame_file_name(index));
        let frame = match read_frame(&frame_path) {
            Ok(f) => f,
            Err(e) => {
                warn!("skipping snapshots at t = {t}: {e}");
                continue;
            }
        };
        let obstacles = obstacles_at(primary, &scenario, t);
        let labels = out.join(format!("labels_t{t:02.0}.svg"));
        plot_labels(&frame, &scenario, &obstacles, &labels)?;
        written.push(labels);
        let density = out.join(format!("density_t{t:02.0}.svg"));
        plot_density(&frame, &scenario, &obstacles, &density)?;
        written.push(density);
    }

    for o in &scenario.obstacles {
        let track_path = primary.join(obstacle_file_name(&o.id));
        match read_obstacle_track(&track_path) {
            Ok(track) if o.moving => {
                let path = out.join(format!("obstacle_{}_vx.svg", o.id));
                plot_obstacle_vx(&track, &o.id, &path)?;
                written.push(path);
            }
            Ok(_) => {}
            Err(e) => warn!("skipping velocity figure of obstacle {}: {e}", o.id),
        }
    }
    Ok(written)
}
