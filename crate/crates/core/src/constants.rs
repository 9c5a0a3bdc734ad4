use serde::{Deserialize, Serialize};

/// CODATA 2018 values in the units the node models use (gauss for fields).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhysicalConstants {
    /// Bohr magneton, J/G.
    pub mu_b: f64,
    /// Reduced Planck constant, J·s.
    pub hbar: f64,
    /// Boltzmann constant, J/K.
    pub k_b: f64,
    /// Mass of ⁸⁷Rb, kg.
    pub m_rb87: f64,
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self {
            mu_b: 9.274_010_078_3e-28,
            hbar: 1.054_571_817e-34,
            k_b: 1.380_649e-23,
            // 86.909 180 531 u × 1.660 539 066 60e-27 kg/u
            m_rb87: 86.909_180_531 * 1.660_539_066_60e-27,
        }
    }
}

impl PhysicalConstants {
    /// Larmor angular rate per gauss, `µ_B/ħ` in rad·s⁻¹·G⁻¹.
    pub fn larmor_rate(&self) -> f64 {
        self.mu_b / self.hbar
    }
}
