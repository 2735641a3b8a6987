//! Scenario configuration: schema, validation and bundled presets.
//!
//! Configs are TOML. Every section is optional except the top-level
//! `protocols` and `seeds`; omitted fields take the defaults below.
//!
//! ```toml
//! name = "example"
//! duration = 30.0            # seconds of simulated time
//! seeds = [1, 2, 3]
//! densities = [40.0]         # vehicles per km²; empty for pedestrian-only runs
//! pedestrian_count = 0
//! protocols = ["add-vod", "flooding-distance"]
//! rings = [300.0, 600.0, 1200.0, 1500.0]
//! ci_level = 0.95
//!
//! [area]      # width, height, block_size, obstacles, road_graph (path), mobility_trace (path)
//! [radio]     # r_max, bitrate, per_link_loss, obstacle_blocking, slot
//! [beacon]    # mode ("fixed" | "atb"), interval, i_min, i_max, size_bytes, neighbor_timeout
//! [routing]   # lambda, w_floor, density_ref, mac_retries, ttl, rsus = [[x, y], ...]
//! [game]      # mechanism, cost_k, fg_benefit, fg_cost, fg_tol, fg_max_iters, alpha1, alpha2
//! [timers]    # t_fixed, t_min, t_max, poll
//! [ctd]       # reply_window, majority_threshold, p_a, dup_radius, dup_window
//! [warning]   # origin, start, frames, fps, bitrate, mtu, frame_trace (path), ttl, lifetime, jitter, d_threshold_factor
//! [alerts]    # senders, time, origin, event_type, size_bytes
//! [sweep]     # param = "ctd.p_a", values = [0.0, 0.2]
//! ```
//!
//! Relative paths are resolved against the config file's directory.

mod config;
mod presets;

pub use config::{
    AlertsConfig, AreaConfig, BeaconConfig, BeaconMode, ConfigError, Protocol, ProtocolFamily, RoutingConfig,
    ScenarioConfig, SweepConfig, SweepParam, WarningConfig,
};
pub use presets::{preset, preset_names, preset_source};
