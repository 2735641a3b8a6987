//! Reduced scenarios and run-log checks shared by the property suites.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use warnsim_core::experiment::{run_experiment, ExperimentOptions};
use warnsim_core::message::MessageKind;
use warnsim_core::netsim::{simulate, RunLog, RunOptions, RunOutput};
use warnsim_core::report::summary_json;
use warnsim_core::routing::MetricWeights;
use warnsim_core::scenario::{preset, Protocol, ScenarioConfig};

/// Every protocol, for property strategies.
pub const PROTOCOLS: [Protocol; 15] = [
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

/// A scenario small enough for many property cases, shaped for `protocol`.
pub fn small_config(protocol: Protocol) -> ScenarioConfig {
    let mut cfg = match protocol {
        Protocol::Gpsr | Protocol::Mrp | Protocol::MrpDsw => {
            let mut c = preset("routing-3mrp").unwrap();
            c.area.width = 850.0;
            c.routing.rsus = vec![[850.0, 340.0]];
            c.warning.frames = 8;
            c.densities = vec![100.0];
            c
        }
        Protocol::CtdQuery | Protocol::CtdPassive | Protocol::NoneAssessment => {
            let mut c = preset("ctd-1000").unwrap();
            c.pedestrian_count = 150;
            c.area.width = 400.0;
            c.area.height = 400.0;
            c.ctd.p_a = 0.3;
            c.sweep = None;
            c
        }
        Protocol::TimerFixed | Protocol::TimerSpeed | Protocol::TimerMap => {
            let mut c = preset("timers-25").unwrap();
            c.area.width = 1000.0;
            c.area.height = 1000.0;
            c.densities = vec![40.0];
            c.sweep = None;
            c
        }
        _ => {
            let mut c = preset("leganes-add").unwrap();
            c.area.width = 1000.0;
            c.area.height = 1000.0;
            c.warning.frames = 5;
            c.densities = vec![40.0];
            c
        }
    };
    cfg.duration = 6.0;
    cfg.protocols = vec![protocol];
    cfg.seeds = vec![1];
    cfg
}

pub fn run_logged(protocol: Protocol, seed: u64) -> RunOutput {
    let cfg = small_config(protocol);
    let density = cfg.densities.first().copied().unwrap_or(0.0);
    simulate(&cfg, protocol, density, seed, &RunOptions { record_log: true }).expect("simulation runs")
}

/// Same seed twice gives identical ledgers, logs and summary bytes.
pub fn check_determinism(protocol: Protocol, seed: u64) -> Result<(), String> {
    let a = run_logged(protocol, seed);
    let b = run_logged(protocol, seed);
    if a != b {
        return Err(format!("{protocol:?} seed {seed}: run outputs differ"));
    }
    let mut cfg = small_config(protocol);
    cfg.seeds = vec![seed, seed + 1];
    let opts = ExperimentOptions::default();
    let ra = summary_json(&run_experiment(&cfg, &opts).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    let rb = summary_json(&run_experiment(&cfg, &opts).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    if ra.as_bytes() != rb.as_bytes() {
        return Err(format!("{protocol:?} seed {seed}: summary bytes differ"));
    }
    Ok(())
}

pub fn check_conservation(out: &RunOutput) -> Result<(), String> {
    let l = &out.ledger;
    if !l.conserved() {
        return Err(format!(
            "received {} + collision {} + link {} != receivable {}",
            l.received, l.lost_collision, l.lost_link, l.receivable
        ));
    }
    Ok(())
}

pub fn check_weights(log: &RunLog, floor: f64) -> Result<(), String> {
    for (t, node, w) in &log.weights {
        check_weight_vector(w, floor).map_err(|e| format!("node {node} at t={t}: {e}"))?;
    }
    Ok(())
}

pub fn check_weight_vector(w: &MetricWeights, floor: f64) -> Result<(), String> {
    let a = w.to_array();
    let sum: f64 = a.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(format!("weights sum to {sum}"));
    }
    if let Some(v) = a.iter().find(|&&v| v < floor - 1e-12) {
        return Err(format!("weight {v} below floor {floor}"));
    }
    Ok(())
}

fn broadcast_kind(k: MessageKind) -> bool {
    matches!(k, MessageKind::Warning | MessageKind::Alert)
}

/// Each node accepts a broadcast payload once; every later copy is flagged a
/// duplicate. Forward-once protocols transmit each payload at most once per node.
pub fn check_at_most_once(protocol: Protocol, log: &RunLog) -> Result<(), String> {
    let mut accepted: BTreeSet<(u32, MessageKind, u64)> = BTreeSet::new();
    for rx in log.rx.iter().filter(|r| broadcast_kind(r.kind)) {
        let key = (rx.receiver.0, rx.kind, rx.id.0);
        let seen = accepted.contains(&key);
        if !rx.duplicate && seen {
            return Err(format!("node {} accepted {:?} {} twice", rx.receiver, rx.kind, rx.id.0));
        }
        if rx.duplicate && !seen && rx.receiver != origin_of(log, rx.kind, rx.id.0) {
            return Err(format!("node {} flagged first copy of {} as duplicate", rx.receiver, rx.id.0));
        }
        accepted.insert(key);
    }
    if matches!(protocol, Protocol::FloodingDistance | Protocol::NoneAssessment) {
        let mut sent: BTreeMap<(u32, u64), u32> = BTreeMap::new();
        for tx in log.tx.iter().filter(|t| broadcast_kind(t.kind)) {
            let c = sent.entry((tx.sender.0, tx.id.0)).or_default();
            *c += 1;
            if *c > 1 {
                return Err(format!("node {} sent payload {} twice", tx.sender, tx.id.0));
            }
        }
    }
    Ok(())
}

fn origin_of(log: &RunLog, kind: MessageKind, id: u64) -> warnsim_core::NodeId {
    log.tx
        .iter()
        .find(|t| t.kind == kind && t.id.0 == id)
        .map(|t| t.origin)
        .unwrap_or(warnsim_core::NodeId(u32::MAX))
}

/// Every relayed payload was first received by the relay, with a strictly
/// larger TTL than the one it carries onward.
pub fn check_ttl(log: &RunLog) -> Result<(), String> {
    let mut first_ttl: BTreeMap<(u32, MessageKind, u64), u32> = BTreeMap::new();
    let mut rx = log.rx.iter().peekable();
    for tx in log.tx.iter().filter(|t| matches!(t.kind, MessageKind::Warning | MessageKind::Alert | MessageKind::Data)) {
        while let Some(r) = rx.next_if(|r| r.t <= tx.t) {
            first_ttl.entry((r.receiver.0, r.kind, r.id.0)).or_insert(r.ttl);
        }
        if tx.sender == tx.origin {
            continue;
        }
        let Some(&got) = first_ttl.get(&(tx.sender.0, tx.kind, tx.id.0)) else {
            return Err(format!("node {} sent {:?} {} before receiving it", tx.sender, tx.kind, tx.id.0));
        };
        if tx.ttl >= got {
            return Err(format!(
                "node {} relayed {:?} {} with ttl {} after receiving ttl {}",
                tx.sender, tx.kind, tx.id.0, tx.ttl, got
            ));
        }
    }
    Ok(())
}

/// All run-log invariants of one logged run.
pub fn check_run(protocol: Protocol, out: &RunOutput, floor: f64) -> Result<(), String> {
    let log = out.log.as_ref().ok_or("run log missing")?;
    check_conservation(out)?;
    check_weights(log, floor)?;
    check_at_most_once(protocol, log)?;
    check_ttl(log)
}
