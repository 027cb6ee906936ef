//! The guided barrier tour: scenario definition, progress state and the
//! world mutations that resolve each barrier.

mod mutation;
mod scenario;
mod state;

pub use mutation::{
    apply_resolution, max_strip_gap, ArrowGuide, MutationError, MutationRecord, ObstacleAnimation,
    RuntimeGeometry,
};
pub use scenario::{
    validate_scenario, BarrierDef, BarrierKind, BarrierScenario, Highlight, MutationSpec,
    ScenarioError, StartPose, Trigger,
};
pub use state::{
    advance_tour, guided_path, init_tour, trigger_node, BarrierPhase, PathPoint, TourError,
    TourState,
};
