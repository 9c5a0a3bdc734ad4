use std::fmt::Debug;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};

/// Real scalar backing the complex matrices of the state engine: `f32` or `f64`.
pub trait Real: Float + FloatConst + FromPrimitive + ToPrimitive + NumAssign + Debug + Default + Send + Sync + 'static {
    /// Lossless-enough conversion from a literal.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in scalar type")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Tolerance for quantities that are exact in algebra (Hermiticity, trace).
    fn exact_tol() -> Self;

    /// Tolerance for accumulated arithmetic (eigenvalues, channel completeness).
    fn accum_tol() -> Self;
}

impl Real for f32 {
    fn exact_tol() -> Self {
        1e-5
    }
    fn accum_tol() -> Self {
        1e-4
    }
}

impl Real for f64 {
    fn exact_tol() -> Self {
        1e-10
    }
    fn accum_tol() -> Self {
        1e-9
    }
}
