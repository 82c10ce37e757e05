//! Analysis and simulation of hard-core random-access networks on complete
//! K-partite conflict graphs: transition and escape times, their limiting
//! laws, throughput starvation, and mixing-time lower bounds.

pub mod asymptotics;
pub mod bd;
pub mod chain;
pub mod laplace;
pub mod mixing;
pub mod model;
pub mod simulate;
