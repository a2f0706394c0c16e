//! Six-step BLDC drive simulation and a small feed-forward network engine
//! that learns drive signals from the simulated traces.
//!
//! * [`motor`]: trapezoidal back-EMF machine model
//! * [`drive`]: Hall sensors, commutation table, PWM and inverter bridge
//! * [`controller`]: PI speed loop
//! * [`sim`]: fixed-step closed-loop simulation and trace CSV
//! * [`ann`]: multilayer perceptron, training loop and the four prediction cases

pub mod ann;
pub mod controller;
pub mod drive;
pub mod motor;
pub mod sim;
