//! Deterministic discrete-event simulation of adaptive overlay construction
//! for blockchain block dissemination.
//!
//! Every node keeps a *scoring set*, ranked by how early each peer relays new
//! blocks, and a *close set*, ranked by ping RTT, and periodically swaps the
//! worst members of each for uniformly random peers. The crate simulates the
//! resulting overlay together with header-then-pull block forwarding and
//! measures how quickly blocks reach the whole network.
//!
//! Module map:
//!
//! * [`config`]: experiment parameters and their validation
//! * [`latency`]: city-trace, planar and explicit latency models
//! * [`engine`]: the seeded event scheduler
//! * [`pss`]: uniform peer sampling
//! * [`protocol`]: node state machine and the [`Simulation`] driver
//! * [`metrics`]: progress curves, percentiles and overlay statistics
//! * [`oracle`]: shortest-path delivery oracle for frozen overlays
//! * [`experiment`]: single runs, sweeps and CSV outputs

pub mod config;
pub mod engine;
pub mod experiment;
pub mod latency;
pub mod metrics;
pub mod oracle;
pub mod protocol;
pub mod pss;

pub use config::{BlockId, ConfigError, ExperimentConfig, ForwardingMode, NodeId, SimTime, ValidatedConfig};
pub use latency::LatencyModel;
pub use protocol::{SimOptions, Simulation};
