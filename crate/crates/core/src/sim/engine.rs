use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::NodeId;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("cannot schedule event at t={at} before current clock {now}")]
    ScheduleInPast { at: f64, now: f64 },
    #[error("invalid event time {0}")]
    InvalidTime(f64),
    #[error("run_until({t_end}) is before current clock {now}")]
    RunBackwards { t_end: f64, now: f64 },
    #[error("event handler failed at t={time} (seq {sequence}, {kind:?}): {message}")]
    Handler {
        time: f64,
        sequence: u64,
        kind: EventKind,
        message: String,
    },
}

/// Event tag, used for trace records and diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EventKind {
    TransmitStart,
    TransmitEnd,
    TimerExpiry,
    Beacon,
    MobilityStep,
    MetricSnapshot,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Target {
    Engine,
    Node(NodeId),
}

/// Opaque handle returned by [`Scheduler::schedule`]; permits cancellation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EventHandle(u64);

#[derive(Debug, Clone)]
pub struct SimEvent<P> {
    pub fire_time: f64,
    pub sequence: u64,
    pub target: Target,
    pub kind: EventKind,
    pub payload: P,
}

impl<P> SimEvent<P> {
    pub fn handle(&self) -> EventHandle {
        EventHandle(self.sequence)
    }
}

struct Queued<P>(SimEvent<P>);

impl<P> PartialEq for Queued<P> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl<P> Eq for Queued<P> {}

impl<P> PartialOrd for Queued<P> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<P> Ord for Queued<P> {
    // BinaryHeap is a max-heap: invert so the earliest (time, seq) pops first.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .0
            .fire_time
            .total_cmp(&self.0.fire_time)
            .then_with(|| other.0.sequence.cmp(&self.0.sequence))
    }
}

/// Time-ordered event queue plus simulation clock.
pub struct Scheduler<P> {
    heap: BinaryHeap<Queued<P>>,
    cancelled: HashSet<u64>,
    next_sequence: u64,
    clock: f64,
    processed: u64,
}

impl<P> Default for Scheduler<P> {
    fn default() -> Self {
        Self::new()
    }
}

impl<P> Scheduler<P> {
    pub fn new() -> Self {
        Scheduler {
            heap: BinaryHeap::new(),
            cancelled: HashSet::new(),
            next_sequence: 0,
            clock: 0.0,
            processed: 0,
        }
    }

    pub fn now(&self) -> f64 {
        self.clock
    }

    /// Number of events handed to a handler so far.
    pub fn processed(&self) -> u64 {
        self.processed
    }

    /// Events still queued, including cancelled ones not yet discarded.
    pub fn pending(&self) -> usize {
        self.heap.len()
    }

    pub fn schedule(
        &mut self,
        fire_time: f64,
        target: Target,
        kind: EventKind,
        payload: P,
    ) -> Result<EventHandle, SimError> {
        if !fire_time.is_finite() {
            return Err(SimError::InvalidTime(fire_time));
        }
        if fire_time < self.clock {
            return Err(SimError::ScheduleInPast {
                at: fire_time,
                now: self.clock,
            });
        }
        let sequence = self.next_sequence;
        self.next_sequence += 1;
        self.heap.push(Queued(SimEvent {
            fire_time,
            sequence,
            target,
            kind,
            payload,
        }));
        Ok(EventHandle(sequence))
    }

    /// Schedule relative to the current clock.
    pub fn schedule_in(
        &mut self,
        delay: f64,
        target: Target,
        kind: EventKind,
        payload: P,
    ) -> Result<EventHandle, SimError> {
        self.schedule(self.clock + delay, target, kind, payload)
    }

    /// Cancel a queued event. Returns false if it was already cancelled.
    pub fn cancel(&mut self, handle: EventHandle) -> bool {
        if handle.0 >= self.next_sequence {
            return false;
        }
        self.cancelled.insert(handle.0)
    }

    /// Fire time of the next live event.
    pub fn peek_time(&mut self) -> Option<f64> {
        self.discard_cancelled();
        self.heap.peek().map(|q| q.0.fire_time)
    }

    /// Pop the next live event and advance the clock to its fire time.
    pub fn pop(&mut self) -> Option<SimEvent<P>> {
        self.discard_cancelled();
        let Queued(ev) = self.heap.pop()?;
        debug_assert!(ev.fire_time >= self.clock);
        self.clock = ev.fire_time;
        self.processed += 1;
        Some(ev)
    }

    fn discard_cancelled(&mut self) {
        while let Some(top) = self.heap.peek() {
            if self.cancelled.remove(&top.0.sequence) {
                self.heap.pop();
            } else {
                break;
            }
        }
    }

    /// Process every event with `fire_time <= t_end`, then set the clock to `t_end`.
    ///
    /// The handler receives the scheduler back so it can queue follow-up events.
    /// A handler error aborts the run and is wrapped with the failing event's context.
    pub fn run_until<F, E>(&mut self, t_end: f64, mut handler: F) -> Result<f64, SimError>
    where
        F: FnMut(&mut Scheduler<P>, SimEvent<P>) -> Result<(), E>,
        E: std::fmt::Display,
    {
        if t_end < self.clock {
            return Err(SimError::RunBackwards {
                t_end,
                now: self.clock,
            });
        }
        while let Some(t) = self.peek_time() {
            if t > t_end {
                break;
            }
            let ev = self.pop().expect("peeked event");
            let (time, sequence, kind) = (ev.fire_time, ev.sequence, ev.kind);
            handler(self, ev).map_err(|e| SimError::Handler {
                time,
                sequence,
                kind,
                message: e.to_string(),
            })?;
        }
        self.clock = t_end;
        Ok(self.clock)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn drain(s: &mut Scheduler<u32>, t_end: f64) -> Vec<u32> {
        let mut out = Vec::new();
        s.run_until(t_end, |_, ev| {
            out.push(ev.payload);
            Ok::<_, SimError>(())
        })
        .unwrap();
        out
    }

    #[test]
    fn fires_at_scheduled_time() {
        let mut s = Scheduler::new();
        s.run_until(1.0, |_, _: SimEvent<u32>| Ok::<_, SimError>(()))
            .unwrap();
        s.schedule(5.0, Target::Engine, EventKind::TimerExpiry, 1).unwrap();
        let mut fired = None;
        s.run_until(10.0, |_, ev| {
            fired = Some(ev.fire_time);
            Ok::<_, SimError>(())
        })
        .unwrap();
        assert_eq!(fired, Some(5.0));
    }

    #[test]
    fn equal_times_fire_in_sequence_order() {
        let mut s = Scheduler::new();
        for p in 0..10u32 {
            s.schedule(5.0, Target::Node(NodeId(9 - p)), EventKind::Beacon, p)
                .unwrap();
        }
        assert_eq!(drain(&mut s, 6.0), (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn scheduling_in_the_past_fails() {
        let mut s: Scheduler<u32> = Scheduler::new();
        s.run_until(1.0, |_, _| Ok::<_, SimError>(())).unwrap();
        let err = s
            .schedule(0.5, Target::Engine, EventKind::TimerExpiry, 0)
            .unwrap_err();
        assert_eq!(err, SimError::ScheduleInPast { at: 0.5, now: 1.0 });
    }

    #[test]
    fn empty_queue_advances_to_end() {
        let mut s: Scheduler<u32> = Scheduler::new();
        assert_eq!(s.run_until(10.0, |_, _| Ok::<_, SimError>(())).unwrap(), 10.0);
    }

    #[test]
    fn partial_run_stops_at_horizon() {
        let mut s = Scheduler::new();
        for (i, t) in [1.0, 2.0, 3.0].into_iter().enumerate() {
            s.schedule(t, Target::Engine, EventKind::TimerExpiry, i as u32)
                .unwrap();
        }
        assert_eq!(drain(&mut s, 2.5), vec![0, 1]);
        assert_eq!(s.now(), 2.5);
        assert_eq!(drain(&mut s, 5.0), vec![2]);
    }

    #[test]
    fn cancelled_events_never_fire() {
        let mut s = Scheduler::new();
        let a = s.schedule(1.0, Target::Engine, EventKind::TimerExpiry, 1).unwrap();
        s.schedule(2.0, Target::Engine, EventKind::TimerExpiry, 2).unwrap();
        assert!(s.cancel(a));
        assert!(!s.cancel(a));
        assert_eq!(drain(&mut s, 3.0), vec![2]);
    }

    #[test]
    fn handler_errors_carry_context() {
        let mut s = Scheduler::new();
        s.schedule(1.5, Target::Engine, EventKind::MobilityStep, 0u32).unwrap();
        let err = s
            .run_until(2.0, |_, _| Err::<(), _>("boom"))
            .unwrap_err();
        match err {
            SimError::Handler { time, kind, message, .. } => {
                assert_eq!(time, 1.5);
                assert_eq!(kind, EventKind::MobilityStep);
                assert_eq!(message, "boom");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn handlers_can_schedule_follow_ups() {
        let mut s = Scheduler::new();
        s.schedule(0.0, Target::Engine, EventKind::TimerExpiry, 0u32).unwrap();
        let mut count = 0;
        s.run_until(10.0, |sched, ev| {
            count += 1;
            if ev.payload < 4 {
                sched.schedule_in(1.0, Target::Engine, EventKind::TimerExpiry, ev.payload + 1)?;
            }
            Ok::<_, SimError>(())
        })
        .unwrap();
        assert_eq!(count, 5);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn dequeue_order_is_time_then_sequence(times in proptest::collection::vec(0u8..20, 1..200)) {
                let mut s = Scheduler::new();
                for (i, t) in times.iter().enumerate() {
                    s.schedule(*t as f64 * 0.5, Target::Engine, EventKind::TimerExpiry, i).unwrap();
                }
                let mut seen = Vec::new();
                s.run_until(100.0, |_, ev| { seen.push((ev.fire_time, ev.sequence)); Ok::<_, SimError>(()) }).unwrap();
                prop_assert_eq!(seen.len(), times.len());
                for w in seen.windows(2) {
                    prop_assert!(w[0].0 < w[1].0 || (w[0].0 == w[1].0 && w[0].1 < w[1].1));
                }
            }
        }
    }
}
