//! Density-matrix dynamics: thermal preparation, ideal microwave rotations,
//! interaction-frame RF evolution and the Davies ENDOR experiments built
//! from them.

mod analysis;
mod drive;
mod experiments;
mod output;
mod propagate;
mod pulses;
mod state;

pub use analysis::{find_features, fit_rabi_frequency, power_law_exponent, window_amplitude};
pub use drive::{magnetic_drive, zeeman_operator, Drive, DriveComponent, Waveform};
pub use experiments::{
    davies_endor_spectrum, esr_lines, hahn_echo_power_sweep, rabi_map, Davies, DaviesSetup, FieldScales, HahnTemplate,
    MagneticLeak, ReadoutLine, RfChannel, CONVERGENCE_TOLERANCE,
};
pub use output::{RabiMap, SpectrumResult};
pub use propagate::{evolve, free_propagator, max_step, pulse_propagator, InteractionFrame, RwaWindow, POINTS_PER_PERIOD};
pub use pulses::{selective_pulse, Channel, Element, Pulse, PulseSequence, Readout};
pub use state::{boltzmann_populations, thermal_state, DensityState};
