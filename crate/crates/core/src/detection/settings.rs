//! Measurement bases at the two nodes and the node-B sign conventions.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{QuantumError, Result};
use crate::Observable;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum NodeBasis {
    Z,
    X,
    Y,
    A0,
    A1,
    B0,
    B1,
}

impl NodeBasis {
    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s.trim().to_ascii_uppercase().as_str() {
            "Z" => Self::Z,
            "X" => Self::X,
            "Y" => Self::Y,
            "A0" => Self::A0,
            "A1" => Self::A1,
            "B0" => Self::B0,
            "B1" => Self::B1,
            other => return Err(QuantumError::InvalidParameter(format!("unknown basis {other}"))),
        })
    }
}

impl fmt::Display for NodeBasis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

/// Eigenvalue assignment of Z at node B: `+1` is the standard `|U⟩ ↦ +1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SignConvention {
    /// Sign of Z_B inside B0 and B1.
    pub chsh_z_sign: f64,
    /// Sign of Z_B when measuring Z for the fidelity correlators.
    pub fidelity_z_sign: f64,
}

impl Default for SignConvention {
    fn default() -> Self {
        Self {
            chsh_z_sign: -1.0,
            fidelity_z_sign: 1.0,
        }
    }
}

impl SignConvention {
    pub fn validate(&self) -> Result<()> {
        if self.chsh_z_sign.abs() != 1.0 || self.fidelity_z_sign.abs() != 1.0 {
            return Err(QuantumError::InvalidParameter("sign conventions must be +1 or -1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BasisSetting {
    pub label: String,
    pub node_a: NodeBasis,
    pub node_b: NodeBasis,
}

impl BasisSetting {
    pub fn new(node_a: NodeBasis, node_b: NodeBasis) -> Self {
        Self {
            label: format!("{node_a}{node_b}"),
            node_a,
            node_b,
        }
    }

    /// `A0B0, A0B1, A1B0, A1B1`.
    pub fn chsh() -> [Self; 4] {
        use NodeBasis::*;
        [Self::new(A0, B0), Self::new(A0, B1), Self::new(A1, B0), Self::new(A1, B1)]
    }

    /// `XX, YY, ZZ`.
    pub fn fidelity() -> [Self; 3] {
        use NodeBasis::*;
        [Self::new(X, X), Self::new(Y, Y), Self::new(Z, Z)]
    }

    pub fn validate(&self) -> Result<()> {
        use NodeBasis::*;
        if matches!(self.node_a, B0 | B1) || matches!(self.node_b, A0 | A1) {
            return Err(QuantumError::InvalidParameter(format!(
                "setting {}: node A takes Z/X/Y/A0/A1, node B takes Z/X/Y/B0/B1",
                self.label
            )));
        }
        Ok(())
    }
}

fn z_scaled(sign: f64) -> Observable {
    let z = Observable::pauli_z();
    if sign < 0.0 {
        z.negated().renamed("Z")
    } else {
        z
    }
}

/// Qubit observables `(node A, node B)` for a setting. `⇓`/`U` is the first basis state.
pub fn project_basis(setting: &BasisSetting, conv: &SignConvention) -> Result<(Observable, Observable)> {
    setting.validate()?;
    conv.validate()?;
    use NodeBasis::*;
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let a = match setting.node_a {
        Z | A0 => Observable::pauli_z().renamed(if setting.node_a == A0 { "A0" } else { "Z" }),
        X | A1 => Observable::pauli_x().renamed(if setting.node_a == A1 { "A1" } else { "X" }),
        Y => Observable::pauli_y(),
        B0 | B1 => unreachable!("validated"),
    };
    let x = Observable::pauli_x();
    let b = match setting.node_b {
        Z => z_scaled(conv.fidelity_z_sign),
        X => x,
        Y => Observable::pauli_y(),
        B0 => Observable::combine(&[(-h, &z_scaled(conv.chsh_z_sign)), (h, &x)], "B0")?,
        B1 => Observable::combine(&[(-h, &z_scaled(conv.chsh_z_sign)), (-h, &x)], "B1")?,
        A0 | A1 => unreachable!("validated"),
    };
    Ok((a, b))
}
