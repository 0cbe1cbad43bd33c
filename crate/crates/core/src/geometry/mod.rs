//! Target trajectories, observer path and the bearing map with its
//! derivatives. Everything here is immutable after construction and all
//! operations are pure functions.

mod bearing;
mod observer;
mod trajectory;

pub use bearing::{
    bearing, bearing_from, bearing_of_trajectory, bearing_residual, grad_theta_bearing,
    grad_theta_bearing_at, grad_x_bearing, hess_theta_bearing, wrap_angle,
};
pub use observer::{
    build_observer_path, default_maneuvering_spec, ObserverPath, ObserverSpec, Segment,
};
pub use trajectory::{uniform_linear_theta, TrajectoryModel};
