pub mod lattice;
pub mod rational;
pub mod state;
pub mod observable;
pub mod causality;
pub mod generate;
pub mod io;
