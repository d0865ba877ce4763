pub mod agents;
pub mod baselines;
pub mod driftwatch;
pub mod engine;
pub mod fixtures;
pub mod forecast;
pub mod scenario;
