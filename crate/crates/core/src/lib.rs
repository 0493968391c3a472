//! Compiler from Clifford+T circuits to the initialisation/CNOT/measurement
//! (ICM) form, with a topological geometry backend and a statevector oracle.

pub mod circuit;
pub mod db;
pub mod geometry;
pub mod matrix;
pub mod par;
pub mod render;
pub mod sim;
pub mod transform;
pub mod unitary;
pub mod verify;
