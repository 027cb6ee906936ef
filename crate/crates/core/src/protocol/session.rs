use super::snapshot::{make_delta, snapshot, Snapshot};
use super::wire::{codes, WireMessage, PROTO_VERSION};
use crate::sim::{checkpoint_due, InputFrame, World};
use std::collections::VecDeque;

/// Maximum number of queued, unconsumed input frames.
pub const INPUT_QUEUE_CAP: usize = 8;
/// A full snapshot goes out on every tick divisible by this.
pub const FULL_SNAPSHOT_INTERVAL: u64 = 100;

/// One client driving one world. Transport-free: the caller feeds text frames
/// in and sends whatever comes out.
pub struct Session {
    pub id: String,
    world: World,
    site_digest: String,
    scenario_digest: String,
    established: bool,
    queue: VecDeque<InputFrame>,
    pub dropped_inputs: u64,
    pub last_acked_input: Option<u64>,
    last_sent: Snapshot,
    resync: bool,
    log: Vec<InputFrame>,
    checkpoints: Vec<(u64, u64)>,
}

impl Session {
    pub fn new(id: String, world: World, site_digest: String, scenario_digest: String) -> Session {
        let last_sent = snapshot(&world);
        let checkpoints = vec![(world.state.tick, world.hash())];
        Session {
            id,
            world,
            site_digest,
            scenario_digest,
            established: false,
            queue: VecDeque::new(),
            dropped_inputs: 0,
            last_acked_input: None,
            last_sent,
            resync: false,
            log: Vec::new(),
            checkpoints,
        }
    }

    pub fn world(&self) -> &World {
        &self.world
    }

    pub fn established(&self) -> bool {
        self.established
    }

    pub fn queued_inputs(&self) -> usize {
        self.queue.len()
    }

    /// Every frame consumed so far, in tick order.
    pub fn replay_log(&self) -> &[InputFrame] {
        &self.log
    }

    /// `(tick, state hash)` every checkpoint interval, starting at tick 0.
    pub fn checkpoints(&self) -> &[(u64, u64)] {
        &self.checkpoints
    }

    /// Handle one inbound text frame. Returns the immediate replies.
    pub fn handle_text(&mut self, text: &str) -> Vec<WireMessage> {
        let msg = match WireMessage::decode(text) {
            Ok(m) => m,
            Err(e) => return vec![WireMessage::error(e.code(), e.to_string())],
        };
        self.handle(msg)
    }

    pub fn handle(&mut self, msg: WireMessage) -> Vec<WireMessage> {
        match msg {
            WireMessage::Hello { proto, .. } => {
                if proto != PROTO_VERSION {
                    return vec![WireMessage::error(
                        codes::PROTO,
                        format!("server speaks proto {PROTO_VERSION}, client sent {proto}"),
                    )];
                }
                if self.established {
                    return vec![];
                }
                self.established = true;
                self.last_sent = snapshot(&self.world);
                vec![
                    WireMessage::Welcome {
                        session: self.id.clone(),
                        tick_hz: self.world.ctx.config().tick_hz,
                        site_digest: self.site_digest.clone(),
                        scenario_digest: self.scenario_digest.clone(),
                    },
                    WireMessage::Snapshot(self.last_sent.clone()),
                ]
            }
            WireMessage::Input { .. } if !self.established => vec![WireMessage::error(
                codes::NOT_READY,
                "send hello before input",
            )],
            WireMessage::Input { .. } => {
                let frame = msg.as_input().expect("input message");
                self.queue.push_back(frame);
                if self.queue.len() > INPUT_QUEUE_CAP {
                    let dropped = self.queue.pop_front().expect("non-empty queue");
                    self.dropped_inputs += 1;
                    return vec![WireMessage::error(
                        codes::INPUT_OVERFLOW,
                        format!(
                            "input queue full; dropped frame for tick {} ({} dropped so far)",
                            dropped.tick, self.dropped_inputs
                        ),
                    )];
                }
                vec![]
            }
            WireMessage::Ping { ts } => vec![WireMessage::Pong { ts }],
            WireMessage::Resync => {
                self.resync = true;
                vec![]
            }
            other => vec![WireMessage::error(
                codes::UNSUPPORTED,
                format!("server does not accept `{}` frames", tag_of(&other)),
            )],
        }
    }

    /// Advance the world one tick with the oldest queued frame, or a neutral
    /// one. Returns the outbound frames for this tick.
    pub fn tick(&mut self) -> Vec<WireMessage> {
        if !self.established {
            return vec![];
        }
        let tick = self.world.state.tick;
        let frame = match self.queue.pop_front() {
            Some(f) => {
                self.last_acked_input = Some(f.tick);
                InputFrame { tick, ..f }
            }
            None => InputFrame::neutral(tick),
        };
        let events = self
            .world
            .step(&frame)
            .expect("frame is stamped with the world tick")
            .to_vec();
        self.log.push(frame);
        let now = self.world.state.tick;
        if checkpoint_due(now) {
            self.checkpoints.push((now, self.world.hash()));
        }
        let curr = snapshot(&self.world);
        let mut out = vec![WireMessage::Delta(make_delta(
            &self.last_sent,
            &curr,
            events,
        ))];
        if now.is_multiple_of(FULL_SNAPSHOT_INTERVAL) || self.resync {
            self.resync = false;
            out.push(WireMessage::Snapshot(curr.clone()));
        }
        self.last_sent = curr;
        out
    }
}

fn tag_of(m: &WireMessage) -> &'static str {
    match m {
        WireMessage::Hello { .. } => "hello",
        WireMessage::Input { .. } => "input",
        WireMessage::Ping { .. } => "ping",
        WireMessage::Resync => "resync",
        WireMessage::Welcome { .. } => "welcome",
        WireMessage::Snapshot(_) => "snapshot",
        WireMessage::Delta(_) => "delta",
        WireMessage::Pong { .. } => "pong",
        WireMessage::Error { .. } => "error",
    }
}
