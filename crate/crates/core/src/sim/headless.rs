use super::{checkpoint_due, Event, InputFrame, World};

/// Artifacts of a run without a client.
#[derive(Debug, Clone, Default)]
pub struct HeadlessRun {
    pub events: Vec<Event>,
    /// `(tick, hash)` at tick 0 and every checkpoint interval after it.
    pub checkpoints: Vec<(u64, u64)>,
    /// Frames actually consumed, one per tick.
    pub log: Vec<InputFrame>,
}

/// Step `world` for `ticks` ticks, feeding `script[tick]` when present and a
/// neutral frame otherwise. `observe` sees the world after every tick.
pub fn run_headless_with(
    world: &mut World,
    script: &[InputFrame],
    ticks: u64,
    mut observe: impl FnMut(&World, &[Event]),
) -> HeadlessRun {
    let mut run = HeadlessRun::default();
    let start = world.state.tick;
    if checkpoint_due(start) {
        run.checkpoints.push((start, world.hash()));
    }
    for _ in 0..ticks {
        let tick = world.state.tick;
        let frame = script
            .get(tick as usize)
            .map(|f| InputFrame { tick, ..*f })
            .unwrap_or_else(|| InputFrame::neutral(tick));
        let events = world.step(&frame).expect("frame matches world tick");
        run.events.extend_from_slice(events);
        run.log.push(frame);
        observe(world, &world.state.event_queue);
        let now = world.state.tick;
        if checkpoint_due(now) {
            run.checkpoints.push((now, world.hash()));
        }
    }
    run
}

pub fn run_headless(world: &mut World, script: &[InputFrame], ticks: u64) -> HeadlessRun {
    run_headless_with(world, script, ticks, |_, _| {})
}
