pub mod actor;
pub mod bench;
pub mod algodiff;
pub mod broadcast;
pub mod element;
pub mod error;
pub mod lazy;
pub mod linalg;
pub mod models;
pub mod ndarray;
pub mod optim;
pub mod slice;

pub use element::{Element, Kind};
pub use error::{Error, Result};
pub use ndarray::{AnyArray, Fill, Ndarray};
pub use slice::{FancyEntry, FancySpec, SliceEntry, SliceSpec};
pub use broadcast::{broadcast_plan, BroadcastPlan};
