//! Simulation configuration and its validation.

use serde::{Deserialize, Serialize};

use crate::channel::ChannelParams;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    /// Joint power control / sub-channel pruning.
    Proposed,
    /// Single-BS max-gain association, round-robin channels, equal power.
    MaxSinr,
}

/// How user positions are drawn for a drop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Placement {
    /// Uniform over the whole square.
    Uniform,
    /// Uniform in a disk of `near_macro_radius` around the macro BS.
    NearMacro,
    /// Uniform in a disk of `near_femto_radius` around a uniformly chosen femto.
    NearFemto,
}

/// How femto BS coordinates are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FemtoLayout {
    /// Evenly spaced on a circle of radius `area_side / (2√2)` around the
    /// macro, first femto at 45°. Four femtos land on `(±side/4, ±side/4)`.
    Ring,
    /// Drawn i.i.d. uniform over the square with every drop.
    Uniform,
    /// Taken verbatim from `femto_positions`.
    Explicit,
}

/// Parses a unit enum from its kebab-case name, e.g. `"near-femto"`.
pub(crate) fn parse_name<T: serde::de::DeserializeOwned>(s: &str) -> Result<T> {
    serde_json::from_value(serde_json::Value::String(s.to_string()))
        .map_err(|_| Error::Config(format!("unrecognised value {s:?}")))
}

macro_rules! from_name {
    ($($t:ty),*) => {$(
        impl std::str::FromStr for $t {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                parse_name(s)
            }
        }
    )*};
}

from_name!(Algorithm, Placement, FemtoLayout, crate::channel::InterferenceModel);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub num_users: usize,
    pub num_femtos: usize,
    pub num_subchannels: usize,
    /// Sub-channels usable by the macro BS (`1..=num_subchannels`); the
    /// rest are femto-exclusive.
    pub macro_subchannels: usize,
    pub area_side: f64,
    pub channel: ChannelParams,
    pub algorithm: Algorithm,
    pub fairness: bool,
    pub drops: usize,
    pub seed: u64,
    pub placement: Placement,
    pub near_macro_radius: f64,
    pub near_femto_radius: f64,
    pub femto_layout: FemtoLayout,
    pub femto_positions: Vec<[f64; 2]>,
    /// Power loop stopping tolerance as a fraction of `p_max`.
    pub power_tol_rel: f64,
    pub max_sweeps: usize,
    /// Outage threshold in bps/Hz.
    pub gamma_th: f64,
    /// Number of leading drops whose full convergence trace is written out.
    pub trace_drops: usize,
    pub output: Option<String>,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            num_users: 25,
            num_femtos: 4,
            num_subchannels: 20,
            macro_subchannels: 20,
            area_side: 1000.0,
            channel: ChannelParams::default(),
            algorithm: Algorithm::Proposed,
            fairness: true,
            drops: 100,
            seed: 1,
            placement: Placement::Uniform,
            near_macro_radius: 200.0,
            near_femto_radius: 40.0,
            femto_layout: FemtoLayout::Ring,
            femto_positions: Vec::new(),
            power_tol_rel: 1e-6,
            max_sweeps: 200,
            gamma_th: 0.6,
            trace_drops: 1,
            output: None,
        }
    }
}

impl SimConfig {
    pub fn num_bss(&self) -> usize {
        1 + self.num_femtos
    }

    /// Absolute power-loop tolerance in watts.
    pub fn power_tol(&self) -> f64 {
        self.power_tol_rel * self.channel.p_max_watts()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.num_users == 0 {
            return bad("num_users must be at least 1".into());
        }
        if self.num_subchannels == 0 {
            return bad("num_subchannels must be at least 1".into());
        }
        if self.macro_subchannels == 0 || self.macro_subchannels > self.num_subchannels {
            return bad(format!(
                "macro_subchannels must lie in 1..={}, got {}",
                self.num_subchannels, self.macro_subchannels
            ));
        }
        if self.drops == 0 {
            return bad("drops must be at least 1".into());
        }
        if !(self.area_side.is_finite() && self.area_side >= 0.0) {
            return bad(format!("area_side must be finite and >= 0, got {}", self.area_side));
        }
        for (name, r) in [
            ("near_macro_radius", self.near_macro_radius),
            ("near_femto_radius", self.near_femto_radius),
        ] {
            if !(r.is_finite() && r >= 0.0) {
                return bad(format!("{name} must be finite and >= 0, got {r}"));
            }
        }
        if self.placement == Placement::NearFemto && self.num_femtos == 0 {
            return bad("near-femto placement needs at least one femto BS".into());
        }
        if self.femto_layout == FemtoLayout::Explicit {
            if self.femto_positions.len() != self.num_femtos {
                return bad(format!(
                    "explicit femto layout lists {} positions for {} femtos",
                    self.femto_positions.len(),
                    self.num_femtos
                ));
            }
            let half = self.area_side / 2.0;
            for p in &self.femto_positions {
                if !p.iter().all(|c| c.is_finite() && c.abs() <= half) {
                    return bad(format!("femto position {p:?} lies outside the square"));
                }
            }
        }
        if !(self.power_tol_rel.is_finite() && self.power_tol_rel > 0.0) {
            return bad(format!("power_tol_rel must be > 0, got {}", self.power_tol_rel));
        }
        if self.max_sweeps == 0 {
            return bad("max_sweeps must be at least 1".into());
        }
        if !(self.gamma_th.is_finite() && self.gamma_th >= 0.0) {
            return bad(format!("gamma_th must be finite and >= 0, got {}", self.gamma_th));
        }
        self.channel.validate()
    }
}
