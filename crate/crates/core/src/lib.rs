//! Contact graph routing for delay-tolerant networks, with a linear
//! programming reference for judging routing decisions.
//!
//! The `examples/` directory walks through each piece: `contact_plan_io`,
//! `route_search`, `forwarding_policies`, `lp_oracle`, `fig1_walkthrough`
//! and `congestion_sweep`.

pub mod cli;
pub mod error;
pub mod experiments;
pub mod forwarding;
pub mod lp;
pub mod plan;
pub mod routing;
pub mod sim;

pub use error::{Error, Result};
pub use forwarding::{Packet, Policy};
pub use plan::{ContactId, ContactPlan, NodeId, StateGrid};
pub use routing::{Route, RouteTable};
pub use sim::{Demand, Metrics};
