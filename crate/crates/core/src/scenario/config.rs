use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ctd::{CtdConfig, EventType};
use crate::dissemination::{BroadcastProtocol, GameConfig, TimerConfig};
use crate::geom::Point;
use crate::metrics::DEFAULT_RINGS;
use crate::radio::RadioConfig;
use crate::routing::DEFAULT_W_FLOOR;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Parse(String),
    #[error("{}", .0.join("; "))]
    Invalid(Vec<String>),
    #[error("unknown preset {0:?}")]
    UnknownPreset(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Protocol {
    #[serde(rename = "gpsr")]
    Gpsr,
    #[serde(rename = "3mrp")]
    Mrp,
    #[serde(rename = "3mrp-dsw")]
    MrpDsw,
    #[serde(rename = "flooding-distance")]
    FloodingDistance,
    #[serde(rename = "jsf")]
    Jsf,
    #[serde(rename = "nsf")]
    Nsf,
    #[serde(rename = "njl")]
    Njl,
    #[serde(rename = "add-vod")]
    AddVod,
    #[serde(rename = "add-fg")]
    AddFg,
    #[serde(rename = "timer-fixed")]
    TimerFixed,
    #[serde(rename = "timer-speed")]
    TimerSpeed,
    #[serde(rename = "timer-map")]
    TimerMap,
    #[serde(rename = "ctd-query")]
    CtdQuery,
    #[serde(rename = "ctd-passive")]
    CtdPassive,
    #[serde(rename = "none-assessment")]
    NoneAssessment,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProtocolFamily {
    Routing,
    Broadcast(BroadcastProtocol),
    Ctd,
}

impl Protocol {
    pub const ALL: [Protocol; 15] = [
        Protocol::Gpsr,
        Protocol::Mrp,
        Protocol::MrpDsw,
        Protocol::FloodingDistance,
        Protocol::Jsf,
        Protocol::Nsf,
        Protocol::Njl,
        Protocol::AddVod,
        Protocol::AddFg,
        Protocol::TimerFixed,
        Protocol::TimerSpeed,
        Protocol::TimerMap,
        Protocol::CtdQuery,
        Protocol::CtdPassive,
        Protocol::NoneAssessment,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Protocol::Gpsr => "gpsr",
            Protocol::Mrp => "3mrp",
            Protocol::MrpDsw => "3mrp-dsw",
            Protocol::FloodingDistance => "flooding-distance",
            Protocol::Jsf => "jsf",
            Protocol::Nsf => "nsf",
            Protocol::Njl => "njl",
            Protocol::AddVod => "add-vod",
            Protocol::AddFg => "add-fg",
            Protocol::TimerFixed => "timer-fixed",
            Protocol::TimerSpeed => "timer-speed",
            Protocol::TimerMap => "timer-map",
            Protocol::CtdQuery => "ctd-query",
            Protocol::CtdPassive => "ctd-passive",
            Protocol::NoneAssessment => "none-assessment",
        }
    }

    pub fn family(self) -> ProtocolFamily {
        use BroadcastProtocol as B;
        match self {
            Protocol::Gpsr | Protocol::Mrp | Protocol::MrpDsw => ProtocolFamily::Routing,
            Protocol::CtdQuery | Protocol::CtdPassive | Protocol::NoneAssessment => ProtocolFamily::Ctd,
            Protocol::FloodingDistance => ProtocolFamily::Broadcast(B::FloodingDistance),
            Protocol::Jsf => ProtocolFamily::Broadcast(B::Jsf),
            Protocol::Nsf => ProtocolFamily::Broadcast(B::Nsf),
            Protocol::Njl => ProtocolFamily::Broadcast(B::Njl),
            Protocol::AddVod => ProtocolFamily::Broadcast(B::AddVod),
            Protocol::AddFg => ProtocolFamily::Broadcast(B::AddFg),
            Protocol::TimerFixed => ProtocolFamily::Broadcast(B::TimerFixed),
            Protocol::TimerSpeed => ProtocolFamily::Broadcast(B::TimerSpeed),
            Protocol::TimerMap => ProtocolFamily::Broadcast(B::TimerMap),
        }
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Protocol {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Protocol::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| format!("unknown protocol {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AreaConfig {
    pub width: f64,
    pub height: f64,
    pub block_size: f64,
    pub obstacles: bool,
    pub speed_limit: f64,
    /// Road graph file replacing the generated grid.
    pub road_graph: Option<PathBuf>,
    /// Vehicle trace file replacing generated trips.
    pub mobility_trace: Option<PathBuf>,
}

impl Default for AreaConfig {
    fn default() -> Self {
        AreaConfig {
            width: 2500.0,
            height: 2500.0,
            block_size: 250.0,
            obstacles: false,
            speed_limit: crate::roadnet::DEFAULT_SPEED_LIMIT,
            road_graph: None,
            mobility_trace: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BeaconMode {
    Fixed,
    /// Interval grows with the locally sensed channel load.
    Atb,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BeaconConfig {
    pub mode: BeaconMode,
    pub interval: f64,
    pub i_min: f64,
    pub i_max: f64,
    pub size_bytes: u32,
    /// Defaults to three times the longest beacon interval.
    pub neighbor_timeout: Option<f64>,
}

impl Default for BeaconConfig {
    fn default() -> Self {
        BeaconConfig { mode: BeaconMode::Fixed, interval: 1.0, i_min: 0.5, i_max: 2.0, size_bytes: 100, neighbor_timeout: None }
    }
}

impl BeaconConfig {
    pub fn timeout(&self) -> f64 {
        self.neighbor_timeout.unwrap_or(match self.mode {
            BeaconMode::Fixed => 3.0 * self.interval,
            BeaconMode::Atb => 3.0 * self.i_max,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RoutingConfig {
    /// Smoothing factor of the weight update.
    pub lambda: f64,
    pub w_floor: f64,
    pub density_ref: f64,
    pub mac_retries: u32,
    pub ttl: u32,
    /// Roadside unit positions.
    pub rsus: Vec<[f64; 2]>,
}

impl Default for RoutingConfig {
    fn default() -> Self {
        RoutingConfig { lambda: 0.5, w_floor: DEFAULT_W_FLOOR, density_ref: 100.0, mac_retries: 3, ttl: 64, rsus: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WarningConfig {
    /// Warning origin; defaults to the center of the road network.
    pub origin: Option<[f64; 2]>,
    pub start: f64,
    /// Frames of the synthetic video; ignored when `frame_trace` is set.
    pub frames: u32,
    pub fps: f64,
    /// Mean video bitrate of the synthetic trace, bits/s.
    pub bitrate: f64,
    pub mtu: u32,
    pub frame_trace: Option<PathBuf>,
    pub ttl: u32,
    /// Seconds a carried copy stays eligible for forwarding.
    pub lifetime: f64,
    /// Upper bound of the random delay before a rebroadcast.
    pub jitter: f64,
    /// Distance-flooding threshold as a fraction of `r_max`.
    pub d_threshold_factor: f64,
    /// Cap on copies pushed to one newly met neighbor per contact.
    pub scf_burst: u32,
}

impl Default for WarningConfig {
    fn default() -> Self {
        WarningConfig {
            origin: None,
            start: 2.0,
            frames: 250,
            fps: 25.0,
            bitrate: 150_000.0,
            mtu: 1400,
            frame_trace: None,
            ttl: 64,
            lifetime: 60.0,
            jitter: 0.01,
            d_threshold_factor: 0.8,
            scf_burst: 16,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AlertsConfig {
    pub senders: u32,
    pub time: f64,
    /// Event location; defaults to the center of the road network.
    pub origin: Option<[f64; 2]>,
    pub event_type: EventType,
    pub size_bytes: u32,
}

impl Default for AlertsConfig {
    fn default() -> Self {
        AlertsConfig { senders: 1, time: 2.0, origin: None, event_type: EventType::Accident, size_bytes: 200 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepParam {
    #[serde(rename = "ctd.p_a")]
    CtdPa,
    #[serde(rename = "game.cost_k")]
    GameCostK,
    #[serde(rename = "radio.per_link_loss")]
    PerLinkLoss,
    #[serde(rename = "pedestrian_count")]
    PedestrianCount,
    #[serde(rename = "alerts.senders")]
    AlertSenders,
    #[serde(rename = "timers.t_fixed")]
    TimerFixed,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::CtdPa => "ctd.p_a",
            SweepParam::GameCostK => "game.cost_k",
            SweepParam::PerLinkLoss => "radio.per_link_loss",
            SweepParam::PedestrianCount => "pedestrian_count",
            SweepParam::AlertSenders => "alerts.senders",
            SweepParam::TimerFixed => "timers.t_fixed",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub param: SweepParam,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default = "default_name")]
    pub name: String,
    #[serde(default = "default_duration")]
    pub duration: f64,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub densities: Vec<f64>,
    #[serde(default)]
    pub pedestrian_count: u32,
    pub protocols: Vec<Protocol>,
    #[serde(default = "default_rings")]
    pub rings: Vec<f64>,
    #[serde(default = "default_level")]
    pub ci_level: f64,
    #[serde(default)]
    pub area: AreaConfig,
    #[serde(default)]
    pub radio: RadioConfig,
    #[serde(default)]
    pub beacon: BeaconConfig,
    #[serde(default)]
    pub routing: RoutingConfig,
    #[serde(default)]
    pub game: GameConfig,
    #[serde(default)]
    pub timers: TimerConfig,
    #[serde(default)]
    pub ctd: CtdConfig,
    #[serde(default)]
    pub warning: WarningConfig,
    #[serde(default)]
    pub alerts: AlertsConfig,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
    /// Directory that relative paths resolve against.
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

fn default_name() -> String {
    "scenario".into()
}
fn default_duration() -> f64 {
    30.0
}
fn default_rings() -> Vec<f64> {
    DEFAULT_RINGS.to_vec()
}
fn default_level() -> f64 {
    0.95
}

impl ScenarioConfig {
    pub fn from_toml_str(s: &str) -> Result<Self, ConfigError> {
        toml::from_str(s).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Read a config file; relative paths inside it resolve against its directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        let mut cfg = Self::from_toml_str(&text)
            .map_err(|e| ConfigError::Parse(format!("{}: {}", path.display(), e)))?;
        cfg.base_dir = path.parent().map(Path::to_path_buf);
        Ok(cfg)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        match &self.base_dir {
            Some(dir) if p.is_relative() => dir.join(p),
            _ => p.to_path_buf(),
        }
    }

    pub fn needs_vehicles(&self) -> bool {
        self.protocols.iter().any(|p| p.family() != ProtocolFamily::Ctd)
    }

    /// Check every invariant, collecting all violations as `field: message`.
    pub fn validate(&self) -> Vec<String> {
        let mut errs = Vec::new();
        let mut push = |field: &str, msg: String| errs.push(format!("{field}: {msg}"));
        if !(self.duration > 0.0) {
            push("duration", format!("must be positive, got {}", self.duration));
        }
        if self.seeds.is_empty() {
            push("seeds", "must not be empty".into());
        }
        if self.protocols.is_empty() {
            push("protocols", "must not be empty".into());
        }
        if self.densities.iter().any(|d| !(*d > 0.0 && d.is_finite())) {
            push("densities", "every density must be positive".into());
        }
        if self.needs_vehicles() && self.densities.is_empty() && self.area.mobility_trace.is_none() {
            push("densities", "vehicle protocols need at least one density".into());
        }
        if self.protocols.iter().any(|p| p.family() == ProtocolFamily::Ctd)
            && self.pedestrian_count == 0
            && !matches!(&self.sweep, Some(s) if s.param == SweepParam::PedestrianCount)
        {
            push("pedestrian_count", "assessment protocols need pedestrians".into());
        }
        if self.rings.is_empty() || self.rings.windows(2).any(|w| w[0] >= w[1]) || self.rings[0] <= 0.0 {
            push("rings", "must be non-empty, positive and strictly increasing".into());
        }
        if !(self.ci_level > 0.0 && self.ci_level < 1.0) {
            push("ci_level", format!("must lie in (0, 1), got {}", self.ci_level));
        }
        let a = &self.area;
        if self.area.road_graph.is_none() {
            if !(a.width > 0.0 && a.height > 0.0) {
                push("area", "width and height must be positive".into());
            }
            if !(a.block_size > 0.0 && a.block_size < a.width.min(a.height)) {
                push("area.block_size", "must be positive and below min(width, height)".into());
            }
        }
        if !(a.speed_limit > 0.0) {
            push("area.speed_limit", "must be positive".into());
        }
        for (field, p) in [("area.road_graph", &a.road_graph), ("area.mobility_trace", &a.mobility_trace), ("warning.frame_trace", &self.warning.frame_trace)] {
            if let Some(p) = p {
                let full = self.resolve(p);
                if !full.is_file() {
                    push(field, format!("file not found: {}", full.display()));
                }
            }
        }
        for e in self.radio.validate() {
            push("radio", e.to_string());
        }
        for e in self.game.validate() {
            push("game", e.to_string());
        }
        for e in self.timers.validate() {
            push("timers", e.to_string());
        }
        for e in self.ctd.validate() {
            push("ctd", e.to_string());
        }
        let b = &self.beacon;
        if !(b.interval > 0.0 && b.i_min > 0.0 && b.i_min <= b.i_max) || b.size_bytes == 0 {
            push("beacon", "need interval > 0, 0 < i_min <= i_max and size_bytes > 0".into());
        }
        if b.neighbor_timeout.is_some_and(|t| !(t > 0.0)) {
            push("beacon.neighbor_timeout", "must be positive".into());
        }
        let r = &self.routing;
        if !(0.0..=1.0).contains(&r.lambda) {
            push("routing.lambda", format!("must lie in [0, 1], got {}", r.lambda));
        }
        if !(0.0..=0.2).contains(&r.w_floor) {
            push("routing.w_floor", format!("must lie in [0, 0.2], got {}", r.w_floor));
        }
        if !(r.density_ref > 0.0) {
            push("routing.density_ref", "must be positive".into());
        }
        if r.ttl == 0 {
            push("routing.ttl", "must be positive".into());
        }
        if self.protocols.iter().any(|p| p.family() == ProtocolFamily::Routing) && r.rsus.is_empty() {
            push("routing.rsus", "routing protocols need at least one roadside unit".into());
        }
        let w = &self.warning;
        if !(w.start >= 0.0 && w.fps > 0.0 && w.bitrate > 0.0 && w.lifetime > 0.0 && w.jitter >= 0.0) {
            push("warning", "need start >= 0, fps > 0, bitrate > 0, lifetime > 0, jitter >= 0".into());
        }
        if w.frames == 0 && w.frame_trace.is_none() {
            push("warning.frames", "must be positive".into());
        }
        if w.mtu == 0 || w.ttl == 0 {
            push("warning", "mtu and ttl must be positive".into());
        }
        if !(0.0..=1.0).contains(&w.d_threshold_factor) {
            push("warning.d_threshold_factor", "must lie in [0, 1]".into());
        }
        if self.alerts.senders == 0 || self.alerts.size_bytes == 0 || !(self.alerts.time >= 0.0) {
            push("alerts", "need senders > 0, size_bytes > 0 and time >= 0".into());
        }
        if let Some(s) = &self.sweep {
            if s.values.is_empty() {
                push("sweep.values", "must not be empty".into());
            }
            for &v in &s.values {
                let bad = match s.param {
                    SweepParam::CtdPa | SweepParam::PerLinkLoss => !(0.0..=1.0).contains(&v),
                    SweepParam::GameCostK | SweepParam::TimerFixed => !(v > 0.0),
                    SweepParam::PedestrianCount | SweepParam::AlertSenders => !(v >= 1.0 && v.fract() == 0.0),
                };
                if bad {
                    push("sweep.values", format!("{v} is invalid for {}", s.param.name()));
                }
            }
        }
        errs
    }

    /// Validate, turning violations into one error.
    pub fn check(&self) -> Result<(), ConfigError> {
        let errs = self.validate();
        if errs.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::Invalid(errs))
        }
    }

    /// Copy with one sweep value applied.
    pub fn with_sweep_value(&self, param: SweepParam, value: f64) -> ScenarioConfig {
        let mut c = self.clone();
        match param {
            SweepParam::CtdPa => c.ctd.p_a = value,
            SweepParam::GameCostK => c.game.cost_k = value,
            SweepParam::PerLinkLoss => c.radio.per_link_loss = value,
            SweepParam::PedestrianCount => c.pedestrian_count = value as u32,
            SweepParam::AlertSenders => c.alerts.senders = value as u32,
            SweepParam::TimerFixed => c.timers.t_fixed = value,
        }
        c
    }

    pub fn origin_or(&self, center: Point) -> Point {
        self.warning.origin.map(|[x, y]| Point::new(x, y)).unwrap_or(center)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal() -> &'static str {
        "seeds = [1]\nprotocols = [\"add-vod\"]\ndensities = [40.0]\n"
    }

    #[test]
    fn minimal_config_is_valid() {
        let cfg = ScenarioConfig::from_toml_str(minimal()).unwrap();
        assert!(cfg.validate().is_empty(), "{:?}", cfg.validate());
        assert_eq!(cfg.rings, DEFAULT_RINGS.to_vec());
        assert_eq!(cfg.radio.r_max, 300.0);
    }

    #[test]
    fn all_errors_listed() {
        let text = "seeds = []\nprotocols = [\"add-vod\"]\ndensities = [40.0]\n[game]\nalpha1 = 7.0\nalpha2 = 4.0\n";
        let errs = ScenarioConfig::from_toml_str(text).unwrap().validate();
        assert!(errs.iter().any(|e| e.contains("alpha1+alpha2 must equal 10")), "{errs:?}");
        assert!(errs.iter().any(|e| e.starts_with("seeds")), "{errs:?}");
        assert_eq!(errs.len(), 2);
    }

    #[test]
    fn unknown_field_rejected_with_path() {
        let text = format!("{}[radio]\nrange = 3.0\n", minimal());
        let err = ScenarioConfig::from_toml_str(&text).unwrap_err().to_string();
        assert!(err.contains("range"), "{err}");
    }

    #[test]
    fn protocol_names_round_trip() {
        for p in Protocol::ALL {
            assert_eq!(p.name().parse::<Protocol>().unwrap(), p);
        }
    }

    #[test]
    fn missing_trace_file_reported() {
        let text = format!("{}[warning]\nframe_trace = \"/nonexistent/frames.csv\"\n", minimal());
        let errs = ScenarioConfig::from_toml_str(&text).unwrap().validate();
        assert!(errs.iter().any(|e| e.starts_with("warning.frame_trace")), "{errs:?}");
    }
}
