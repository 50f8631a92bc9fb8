//! Metric families, their asymptotics, and the shift/lapse reductions.

mod decay;
mod family;
mod fields;
mod grid;
mod reduce;

pub use decay::{geometric_samples, verify_decay, DecayReport, FieldDecay, DECAY_SLACK};
pub use family::{FamilySpec, MetricFamily};
pub use fields::{
    constant_field, FieldRef, FieldSamples, FieldSpec, FourierSeries, FrozenField, PowerField, ProductField,
    ScalarField, SeparableField, Term, TimeEnd, TimeProfile,
};
pub use grid::{GridSpec, SpinStructure};
pub use reduce::{
    christoffel, conformal_reduce, reduce, shift_flow_reduce, FlowPoint, PullbackField, PullbackMetric, ShiftFlow,
    FLOW_FREEZE_TIME,
};
