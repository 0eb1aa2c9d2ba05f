//! Delay systems: network simulation and the wave-equation case study.

pub mod network;
pub mod pde;
pub mod wave;

pub use network::{
    simulate_network, step_signal, BlockKind, DelayNetwork, NetworkSim, Signal, Source, Traces,
};
pub use pde::{simulate_wave_pde, Reference, WavePde, WaveScenario};
pub use wave::{
    build_gtilde, build_phi, closed_loop_network, decomposition_residual, ghat_closed_form, k0,
    phi_response, q_factor, recover_controller, wave_plant,
};
