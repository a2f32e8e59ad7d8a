//! Scalar model constants. Defaults are the corridor study values; the
//! numerical knobs (cutoffs, refresh interval, penalty) are tunable as well.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Keys that must be present in an explicit `[params]` table that does not
/// declare `preset = "defaults"`.
pub const REQUIRED_KEYS: &[&str] = &[
    "V_max",
    "rho_max",
    "T",
    "C_r",
    "l_r",
    "C_r_obs",
    "l_r_obs",
    "i_o",
    "V_max_obs",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelParams {
    /// Free walking speed (m/s).
    #[serde(rename = "V_max")]
    pub v_max: f64,
    /// Jam density (ped/m²).
    pub rho_max: f64,
    /// Relaxation time of the pedestrian velocity (s).
    #[serde(rename = "T")]
    pub t_relax: f64,
    #[serde(rename = "C_r")]
    pub c_r: f64,
    pub l_r: f64,
    #[serde(rename = "C_r_obs")]
    pub c_r_obs: f64,
    pub l_r_obs: f64,
    /// Infectivity (m²/s²).
    pub i_o: f64,
    /// Recovery rate (1/s).
    pub nu: f64,
    /// Incubation rate (1/s).
    pub theta: f64,
    #[serde(rename = "V_max_obs")]
    pub v_max_obs: f64,
    #[serde(rename = "T_obs")]
    pub t_obs: f64,
    pub dt: f64,
    pub t_end: f64,
    pub contact_time_enabled: bool,
    /// Eikonal value pinned on wall and obstacle ghosts (s).
    pub phi_wall: f64,
    /// Speed floor keeping the eikonal well posed at jam density (m/s).
    #[serde(rename = "V_min")]
    pub v_min: f64,
    /// Re-solve the eikonal fields every this many steps.
    pub eikonal_every: u32,
    /// Exposure label threshold on alpha_E.
    pub exposure_threshold: f64,
    /// Radius of the contagion kernel sum (m).
    pub h_phi: f64,
    /// Morse interaction radius in units of `l_r`.
    pub morse_cutoff: f64,
    /// Short-range obstacle penalty on pedestrians.
    pub penalty_enabled: bool,
    #[serde(rename = "C_pen")]
    pub c_pen: f64,
    pub l_pen: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams {
            v_max: 2.0,
            rho_max: 10.0,
            t_relax: 0.001,
            c_r: 50.0,
            l_r: 2.0,
            c_r_obs: 50.0,
            l_r_obs: 1.0,
            i_o: 0.04,
            nu: 0.0,
            theta: 0.0,
            v_max_obs: 3.0,
            t_obs: 0.001,
            dt: 0.001,
            t_end: 40.0,
            contact_time_enabled: true,
            phi_wall: 1.0e5,
            v_min: 0.05,
            eikonal_every: 10,
            exposure_threshold: 0.05,
            h_phi: 2.5,
            morse_cutoff: 5.0,
            penalty_enabled: true,
            c_pen: 50.0,
            l_pen: 0.5,
        }
    }
}

impl ModelParams {
    /// Morse interaction radius between pedestrians (m).
    pub fn h_morse(&self) -> f64 {
        self.morse_cutoff * self.l_r
    }

    /// Radius for the obstacle-crowd potential around an obstacle with the
    /// given largest half extent (m).
    pub fn h_morse_obstacle(&self, max_half_extent: f64) -> f64 {
        self.morse_cutoff * self.l_r_obs + max_half_extent
    }

    /// Number of whole steps covering `t_end`.
    pub fn total_steps(&self) -> u64 {
        (self.t_end / self.dt).round() as u64
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("V_max", self.v_max),
            ("rho_max", self.rho_max),
            ("T", self.t_relax),
            ("C_r", self.c_r),
            ("l_r", self.l_r),
            ("C_r_obs", self.c_r_obs),
            ("l_r_obs", self.l_r_obs),
            ("i_o", self.i_o),
            ("V_max_obs", self.v_max_obs),
            ("T_obs", self.t_obs),
            ("dt", self.dt),
            ("phi_wall", self.phi_wall),
            ("V_min", self.v_min),
            ("h_phi", self.h_phi),
            ("morse_cutoff", self.morse_cutoff),
            ("l_pen", self.l_pen),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::validation(name, format!("must be finite and > 0, got {v}")));
            }
        }
        let non_negative = [
            ("nu", self.nu),
            ("theta", self.theta),
            ("t_end", self.t_end),
            ("C_pen", self.c_pen),
        ];
        for (name, v) in non_negative {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::validation(name, format!("must be finite and >= 0, got {v}")));
            }
        }
        if self.v_min >= self.v_max {
            return Err(Error::validation("V_min", "must be below V_max"));
        }
        if self.eikonal_every == 0 {
            return Err(Error::validation("eikonal_every", "must be at least 1"));
        }
        if !(self.exposure_threshold > 0.0 && self.exposure_threshold < 1.0) {
            return Err(Error::validation("exposure_threshold", "must lie in (0, 1)"));
        }
        Ok(())
    }

    /// Build from an explicit `[params]` table. Without `preset = "defaults"`
    /// every key in [`REQUIRED_KEYS`] has to be given.
    pub fn from_table(mut table: toml::Table) -> Result<Self> {
        let preset = match table.remove("preset") {
            None => None,
            Some(toml::Value::String(s)) => Some(s),
            Some(other) => {
                return Err(Error::validation(
                    "params.preset",
                    format!("expected a string, got {other}"),
                ))
            }
        };
        match preset.as_deref() {
            None => {
                for key in REQUIRED_KEYS {
                    if !table.contains_key(*key) {
                        return Err(Error::validation(
                            format!("params.{key}"),
                            "required key missing (or set preset = \"defaults\" to inherit defaults)",
                        ));
                    }
                }
            }
            Some("defaults") => {}
            Some(other) => return Err(Error::validation("params.preset", format!("unknown preset '{other}'"))),
        }
        let params: ModelParams = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::validation("params", e.message().to_string()))?;
        params.validate()?;
        Ok(params)
    }
}
