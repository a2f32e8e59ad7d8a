//! Declarative scenario description: corridor geometry, populations with
//! their seeding blocks, obstacles, parameters and run controls.
//!
//! Scenario files are TOML. A minimal file gives the domain and at least one
//! population; every model constant falls back to [`ModelParams::default`]
//! when the `[params]` table is absent.
//!
//! ```toml
//! name = "corridor_uni"
//!
//! [domain]
//! width = 100.0
//! height = 50.0
//! walls = [{ from = [0.0, 0.0], to = [100.0, 0.0] }, { from = [0.0, 50.0], to = [100.0, 50.0] }]
//! exits = [{ id = "east", side = "right", interval = [0.0, 50.0] }]
//!
//! [[populations]]
//! id = "walkers"
//! goal = "east"
//! spacing = 1.575
//! block = { min = [2.0, 5.0], max = [27.0, 45.0] }
//! fractions = [1.0, 0.0, 0.0]
//! sub_blocks = [{ min = [12.0, 20.0], max = [16.0, 30.0], fractions = [0.0, 0.0, 1.0] }]
//! ```

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::contagion::{classify, Fractions};
use crate::error::{Error, Result};
use crate::geometry::{Rect, Segment, Side, Vec2};
use crate::params::ModelParams;
use crate::pedestrians::ParticleState;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExitRegion {
    pub id: String,
    pub side: Side,
    /// Covered interval along the side (y for left/right, x for bottom/top).
    pub interval: [f64; 2],
}

impl ExitRegion {
    /// The exit as a segment on the domain boundary.
    pub fn segment(&self, domain: &Domain) -> Segment {
        let [a, b] = self.interval;
        match self.side {
            Side::Left => Segment::new(Vec2::new(0.0, a), Vec2::new(0.0, b)),
            Side::Right => Segment::new(Vec2::new(domain.width, a), Vec2::new(domain.width, b)),
            Side::Bottom => Segment::new(Vec2::new(a, 0.0), Vec2::new(b, 0.0)),
            Side::Top => Segment::new(Vec2::new(a, domain.height), Vec2::new(b, domain.height)),
        }
    }

    /// Whether a boundary crossing at coordinate `along` (measured along the
    /// side) falls inside this exit.
    pub fn covers(&self, along: f64) -> bool {
        along >= self.interval[0] && along <= self.interval[1]
    }

    /// Distance from `p` to the exit segment.
    pub fn distance(&self, domain: &Domain, p: Vec2) -> f64 {
        let seg = self.segment(domain);
        let r = Rect::new(
            Vec2::new(seg.from.x.min(seg.to.x), seg.from.y.min(seg.to.y)),
            Vec2::new(seg.from.x.max(seg.to.x), seg.from.y.max(seg.to.y)),
        );
        r.distance(p)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Domain {
    pub width: f64,
    pub height: f64,
    #[serde(default)]
    pub walls: Vec<Segment>,
    #[serde(default)]
    pub exits: Vec<ExitRegion>,
}

impl Domain {
    pub fn bounds(&self) -> Rect {
        Rect::new(Vec2::ZERO, Vec2::new(self.width, self.height))
    }

    pub fn exit(&self, id: &str) -> Option<&ExitRegion> {
        self.exits.iter().find(|e| e.id == id)
    }

    fn side_extent(&self, side: Side) -> f64 {
        match side {
            Side::Left | Side::Right => self.height,
            Side::Bottom | Side::Top => self.width,
        }
    }

    /// Side and along-side interval of a wall lying on the domain boundary.
    fn boundary_wall_interval(&self, w: &Segment) -> Option<(Side, [f64; 2])> {
        let (lo_x, hi_x) = (w.from.x.min(w.to.x), w.from.x.max(w.to.x));
        let (lo_y, hi_y) = (w.from.y.min(w.to.y), w.from.y.max(w.to.y));
        if w.is_horizontal() {
            if w.from.y == 0.0 {
                return Some((Side::Bottom, [lo_x, hi_x]));
            }
            if w.from.y == self.height {
                return Some((Side::Top, [lo_x, hi_x]));
            }
        } else {
            if w.from.x == 0.0 {
                return Some((Side::Left, [lo_y, hi_y]));
            }
            if w.from.x == self.width {
                return Some((Side::Right, [lo_y, hi_y]));
            }
        }
        None
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.width.is_finite() && self.width > 0.0) {
            return Err(Error::validation("domain.width", "must be > 0"));
        }
        if !(self.height.is_finite() && self.height > 0.0) {
            return Err(Error::validation("domain.height", "must be > 0"));
        }
        let bounds = self.bounds();
        for (k, w) in self.walls.iter().enumerate() {
            if !w.is_axis_aligned() || w.length() <= 0.0 {
                return Err(Error::validation(
                    format!("domain.walls[{k}]"),
                    "must be a non-degenerate axis-aligned segment",
                ));
            }
            if !bounds.contains(w.from) || !bounds.contains(w.to) {
                return Err(Error::validation(
                    format!("domain.walls[{k}]"),
                    "must lie inside the domain",
                ));
            }
        }
        let mut ids = HashSet::new();
        for (k, e) in self.exits.iter().enumerate() {
            if !ids.insert(e.id.as_str()) {
                return Err(Error::validation(
                    format!("domain.exits[{k}].id"),
                    format!("duplicate exit id '{}'", e.id),
                ));
            }
            let [a, b] = e.interval;
            if !(a < b && a >= 0.0 && b <= self.side_extent(e.side)) {
                return Err(Error::validation(
                    format!("domain.exits[{k}].interval"),
                    "must be an increasing interval on the domain boundary",
                ));
            }
            for (wk, w) in self.walls.iter().enumerate() {
                if let Some((side, [wa, wb])) = self.boundary_wall_interval(w) {
                    if side == e.side && wa.max(a) < wb.min(b) {
                        return Err(Error::validation(
                            format!("domain.exits[{k}]"),
                            format!("overlaps wall segment {wk}"),
                        ));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Nested rectangle inside a seeding block with its own initial fractions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubBlock {
    pub min: Vec2,
    pub max: Vec2,
    pub fractions: Fractions,
}

impl SubBlock {
    pub fn rect(&self) -> Rect {
        Rect::new(self.min, self.max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Population {
    pub id: String,
    pub goal: String,
    pub spacing: f64,
    pub block: Rect,
    #[serde(default = "Fractions::susceptible")]
    pub fractions: Fractions,
    #[serde(default)]
    pub sub_blocks: Vec<SubBlock>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObstacleSpec {
    pub id: String,
    pub center: Vec2,
    pub half_extents: Vec2,
    #[serde(default)]
    pub moving: bool,
    #[serde(default)]
    pub goal: Option<String>,
}

impl ObstacleSpec {
    pub fn rect(&self) -> Rect {
        Rect::from_center(self.center, self.half_extents)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    #[default]
    FastMarching,
    Sweeping,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunControls {
    /// Seconds between particle frames.
    pub frame_interval: f64,
    /// Seconds between rows of the summary series.
    pub summary_interval: f64,
    pub output_dir: Option<PathBuf>,
    pub solver: SolverKind,
    /// Write the eikonal fields alongside every frame.
    pub dump_eikonal: bool,
}

impl Default for RunControls {
    fn default() -> Self {
        RunControls {
            frame_interval: 0.5,
            summary_interval: 0.1,
            output_dir: None,
            solver: SolverKind::FastMarching,
            dump_eikonal: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Scenario {
    pub name: String,
    pub domain: Domain,
    pub populations: Vec<Population>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub obstacles: Vec<ObstacleSpec>,
    pub params: ModelParams,
    pub run: RunControls,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    #[serde(default)]
    name: Option<String>,
    domain: Domain,
    #[serde(default)]
    populations: Vec<Population>,
    #[serde(default)]
    obstacles: Vec<ObstacleSpec>,
    #[serde(default)]
    params: Option<toml::Table>,
    #[serde(default)]
    run: RunControls,
}

/// Load and validate a scenario file.
pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let fallback = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "scenario".to_string());
    parse_scenario(&text, &fallback).map_err(|e| match e {
        Error::Parse { message, .. } => Error::Parse {
            path: path.to_path_buf(),
            message,
        },
        other => other,
    })
}

/// Parse and validate scenario text.
pub fn parse_scenario(text: &str, fallback_name: &str) -> Result<Scenario> {
    let raw: ScenarioFile = toml::from_str(text).map_err(|e| Error::Parse {
        path: PathBuf::from("<text>"),
        message: e.to_string(),
    })?;
    let params = match raw.params {
        None => ModelParams::default(),
        Some(table) => ModelParams::from_table(table)?,
    };
    let scenario = Scenario {
        name: raw.name.unwrap_or_else(|| fallback_name.to_string()),
        domain: raw.domain,
        populations: raw.populations,
        obstacles: raw.obstacles,
        params,
        run: raw.run,
    };
    scenario.validate()?;
    Ok(scenario)
}

impl Scenario {
    /// Fully resolved scenario text; loading it back yields an equal scenario.
    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scenario serializes to TOML")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_toml_string()).map_err(|e| Error::io(path, e))
    }

    pub fn population_index(&self, id: &str) -> Option<usize> {
        self.populations.iter().position(|p| p.id == id)
    }

    /// Smallest lattice spacing over all populations.
    pub fn base_spacing(&self) -> f64 {
        self.populations.iter().map(|p| p.spacing).fold(f64::INFINITY, f64::min)
    }

    pub fn validate(&self) -> Result<()> {
        self.domain.validate()?;
        self.params.validate()?;
        if self.populations.is_empty() {
            return Err(Error::validation("populations", "at least one population is required"));
        }
        let bounds = self.domain.bounds();
        let mut ids = HashSet::new();
        for (k, o) in self.obstacles.iter().enumerate() {
            let field = format!("obstacles[{k}]");
            if !ids.insert(o.id.as_str()) {
                return Err(Error::validation(
                    format!("{field}.id"),
                    format!("duplicate id '{}'", o.id),
                ));
            }
            if !(o.half_extents.x > 0.0 && o.half_extents.y > 0.0) {
                return Err(Error::validation(format!("{field}.half_extents"), "must be positive"));
            }
            if !bounds.contains_rect(&o.rect()) {
                return Err(Error::validation(field.clone(), "rectangle must lie inside the domain"));
            }
            match (&o.goal, o.moving) {
                (Some(goal), _) => {
                    if self.domain.exit(goal).is_none() {
                        return Err(Error::validation(
                            format!("{field}.goal"),
                            format!("'{goal}' does not name an exit region"),
                        ));
                    }
                }
                (None, true) => {
                    return Err(Error::validation(
                        format!("{field}.goal"),
                        "moving obstacles need a goal",
                    ))
                }
                (None, false) => {}
            }
        }
        let mut ids = HashSet::new();
        for (k, p) in self.populations.iter().enumerate() {
            let field = format!("populations[{k}]");
            if !ids.insert(p.id.as_str()) {
                return Err(Error::validation(
                    format!("{field}.id"),
                    format!("duplicate id '{}'", p.id),
                ));
            }
            if self.domain.exit(&p.goal).is_none() {
                return Err(Error::validation(
                    format!("{field}.goal"),
                    format!("'{}' does not name an exit region", p.goal),
                ));
            }
            if !(p.spacing.is_finite() && p.spacing > 0.0) {
                return Err(Error::validation(format!("{field}.spacing"), "must be > 0"));
            }
            if !(p.block.min.x < p.block.max.x && p.block.min.y < p.block.max.y) {
                return Err(Error::validation(format!("{field}.block"), "min must be below max"));
            }
            if !bounds.contains_rect(&p.block) {
                return Err(Error::validation(
                    format!("{field}.block"),
                    "must lie inside the domain",
                ));
            }
            for o in &self.obstacles {
                if o.rect().overlaps(&p.block) {
                    return Err(Error::validation(
                        format!("{field}.block"),
                        format!("overlaps obstacle '{}'", o.id),
                    ));
                }
            }
            p.fractions
                .check_simplex()
                .map_err(|r| Error::validation(format!("{field}.fractions"), r))?;
            for (s, sb) in p.sub_blocks.iter().enumerate() {
                sb.fractions
                    .check_simplex()
                    .map_err(|r| Error::validation(format!("{field}.sub_blocks[{s}].fractions"), r))?;
                if !(sb.min.x < sb.max.x && sb.min.y < sb.max.y) {
                    return Err(Error::validation(
                        format!("{field}.sub_blocks[{s}]"),
                        "min must be below max",
                    ));
                }
            }
        }
        let r = &self.run;
        if !(r.frame_interval > 0.0 && r.summary_interval > 0.0) {
            return Err(Error::validation(
                "run",
                "frame_interval and summary_interval must be > 0",
            ));
        }
        Ok(())
    }
}

/// Lattice positions of a block: cell-centred points of the `spacing` grid
/// anchored at the lower-left corner; cells crossing the block edge are
/// dropped.
pub fn lattice_points(block: &Rect, spacing: f64) -> Vec<Vec2> {
    let nx = (block.width() / spacing + 1e-9).floor() as usize;
    let ny = (block.height() / spacing + 1e-9).floor() as usize;
    let mut pts = Vec::with_capacity(nx * ny);
    for i in 0..nx {
        for j in 0..ny {
            pts.push(Vec2::new(
                block.min.x + (i as f64 + 0.5) * spacing,
                block.min.y + (j as f64 + 0.5) * spacing,
            ));
        }
    }
    pts
}

/// Seed the initial particle cloud.
pub fn seed_particles(scenario: &Scenario) -> Result<Vec<ParticleState>> {
    let threshold = scenario.params.exposure_threshold;
    let mut particles = Vec::new();
    for (k, pop) in scenario.populations.iter().enumerate() {
        let pts = lattice_points(&pop.block, pop.spacing);
        if pts.is_empty() {
            return Err(Error::validation(
                format!("populations[{k}].block"),
                "seeding block holds no lattice cell at this spacing",
            ));
        }
        let rho0 = 1.0 / (pop.spacing * pop.spacing);
        let mass = rho0 * pop.spacing * pop.spacing;
        for x in pts {
            let alpha = pop
                .sub_blocks
                .iter()
                .rev()
                .find(|sb| sb.rect().contains(x))
                .map(|sb| sb.fractions)
                .unwrap_or(pop.fractions);
            particles.push(ParticleState {
                x,
                u: Vec2::ZERO,
                rho: rho0,
                m: mass,
                alpha,
                pop: k,
                alive: true,
                seeded: classify(alpha, threshold),
            });
        }
    }
    Ok(particles)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contagion::Label;

    const MINIMAL: &str = r#"
name = "t"
[domain]
width = 100.0
height = 50.0
walls = [{ from = [0.0, 0.0], to = [100.0, 0.0] }, { from = [0.0, 50.0], to = [100.0, 50.0] }]
exits = [{ id = "east", side = "right", interval = [0.0, 50.0] }]

[[populations]]
id = "p"
goal = "east"
spacing = 1.0
block = { min = [10.0, 10.0], max = [20.0, 20.0] }
fractions = [1.0, 0.0, 0.0]
sub_blocks = [{ min = [10.0, 10.0], max = [12.0, 20.0], fractions = [0.0, 0.0, 1.0] }]
"#;

    #[test]
    fn minimal_file_gets_default_params() {
        let s = parse_scenario(MINIMAL, "x").unwrap();
        assert_eq!(s.domain.width, 100.0);
        assert_eq!(s.domain.height, 50.0);
        assert_eq!(s.params, ModelParams::default());
    }

    #[test]
    fn ten_by_ten_block_gives_hundred_particles() {
        let s = parse_scenario(MINIMAL, "x").unwrap();
        let ps = seed_particles(&s).unwrap();
        assert_eq!(ps.len(), 100);
        for p in &ps {
            assert_eq!(p.u, Vec2::ZERO);
            assert_eq!(p.rho, 1.0);
            let a = p.alpha;
            assert_eq!(a.s + a.e + a.i, 1.0);
        }
        let infected = ps.iter().filter(|p| p.seeded == Label::Infected).count();
        // columns at x = 10.5 and 11.5
        assert_eq!(infected, 20);
        assert!(ps
            .iter()
            .filter(|p| p.x.x < 12.0)
            .all(|p| p.alpha == Fractions::new(0.0, 0.0, 1.0)));
    }

    #[test]
    fn lattice_spacing_gives_unit_density() {
        let s = 1.575f64;
        let text = MINIMAL.replace("spacing = 1.0", "spacing = 1.575");
        let sc = parse_scenario(&text, "x").unwrap();
        let ps = seed_particles(&sc).unwrap();
        let rho0 = 1.0 / (s * s);
        assert!((rho0 - 0.4031).abs() < 1e-4);
        assert!(ps.iter().all(|p| p.rho == rho0));
        assert!(ps.iter().all(|p| p.m == rho0 * s * s));
    }

    #[test]
    fn zero_spacing_rejected() {
        let text = MINIMAL.replace("spacing = 1.0", "spacing = 0.0");
        let err = parse_scenario(&text, "x").unwrap_err();
        assert!(err.to_string().contains("spacing"), "{err}");
    }

    #[test]
    fn params_table_without_v_max_rejected() {
        let text = format!("{MINIMAL}\n[params]\nrho_max = 10.0\n");
        let err = parse_scenario(&text, "x").unwrap_err();
        assert!(err.to_string().contains("V_max"), "{err}");
    }

    #[test]
    fn parse_error_has_location() {
        let err = parse_scenario("[domain]\nwidth = \n", "x").unwrap_err();
        assert!(matches!(err, Error::Parse { .. }));
        assert!(err.to_string().contains("line"), "{err}");
    }

    #[test]
    fn unresolved_goal_rejected() {
        let text = MINIMAL.replace("goal = \"east\"", "goal = \"west\"");
        assert!(parse_scenario(&text, "x").is_err());
    }

    #[test]
    fn exit_overlapping_wall_rejected() {
        let text = MINIMAL.replace(
            "exits = [{ id = \"east\", side = \"right\", interval = [0.0, 50.0] }]",
            "exits = [{ id = \"east\", side = \"bottom\", interval = [10.0, 20.0] }]",
        );
        let err = parse_scenario(&text, "x").unwrap_err();
        assert!(err.to_string().contains("overlaps wall"), "{err}");
    }

    #[test]
    fn empty_block_rejected() {
        let text = MINIMAL.replace("spacing = 1.0", "spacing = 20.0");
        let s = parse_scenario(&text, "x").unwrap();
        assert!(seed_particles(&s).is_err());
    }

    #[test]
    fn block_overlapping_obstacle_rejected() {
        let text = format!("{MINIMAL}\n[[obstacles]]\nid = \"o\"\ncenter = [15.0, 15.0]\nhalf_extents = [1.0, 1.0]\n");
        assert!(parse_scenario(&text, "x").is_err());
    }

    #[test]
    fn saved_scenario_reloads_identically() {
        let s = parse_scenario(MINIMAL, "x").unwrap();
        let text = s.to_toml_string();
        let again = parse_scenario(&text, "y").unwrap();
        assert_eq!(s, again);
        assert_eq!(seed_particles(&s).unwrap(), seed_particles(&again).unwrap());
    }
}
