use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Raised-cosine truncation window. `t1` is the flat-top half-width and `t2`
/// the total half-width, both in units of the useful symbol duration T.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowParams {
    pub t1: f64,
    pub t2: f64,
}

impl Default for WindowParams {
    fn default() -> Self {
        WindowParams { t1: 0.125, t2: 0.25 }
    }
}

impl WindowParams {
    pub fn new(t1: f64, t2: f64) -> Result<Self> {
        let w = WindowParams { t1, t2 };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t1 > 0.0 && self.t1 <= self.t2) {
            return Err(Error::InvalidWindow(format!(
                "need 0 < T1 <= T2, got T1 = {}, T2 = {}",
                self.t1, self.t2
            )));
        }
        if self.t2 > 0.5 {
            return Err(Error::InvalidWindow(format!("T2 = {} exceeds half the symbol", self.t2)));
        }
        Ok(())
    }

    /// w(t) with t in units of T.
    pub fn weight(&self, t: f64) -> f64 {
        let a = t.abs();
        if a <= self.t1 {
            1.0
        } else if a <= self.t2 {
            0.5 + 0.5 * (std::f64::consts::PI * (a - self.t1) / (self.t2 - self.t1)).cos()
        } else {
            0.0
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape() {
        let w = WindowParams::default();
        assert_eq!(w.weight(0.0), 1.0);
        assert_eq!(w.weight(0.125), 1.0);
        assert!((w.weight(0.1875) - 0.5).abs() < 1e-15);
        assert!(w.weight(0.25).abs() < 1e-15);
        assert_eq!(w.weight(0.3), 0.0);
        assert_eq!(w.weight(-0.1875), w.weight(0.1875));
    }

    #[test]
    fn rejects_bad_windows() {
        assert!(WindowParams::new(0.0, 0.1).is_err());
        assert!(WindowParams::new(0.2, 0.1).is_err());
        assert!(WindowParams::new(0.25, 0.6).is_err());
        assert!(WindowParams::new(0.5, 0.5).is_ok());
    }
}
