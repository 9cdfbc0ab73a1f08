//! Polytopes, interval boxes, a small dense LP solver, and set-distance
//! bounds. Everything downstream (reachability, branching, the online
//! engine) builds on these primitives.

mod distance;
mod interval;
mod lp;
mod polytope;

pub use distance::{
    box_distance, point_distance, set_distance_upper, set_distance_upper_capped,
    DEFAULT_VERTEX_CAP,
};
pub use interval::IntervalBox;
pub use lp::{lp_solve_rows, LpSolution, LpStatus, FEAS_TOL};
pub use polytope::{Constraint, Containment, Polytope};
