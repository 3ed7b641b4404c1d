pub mod eval;
pub mod instance;
pub mod logic;
pub mod pair;
pub mod solvers;
pub mod stats;
