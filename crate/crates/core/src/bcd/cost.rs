//! Hardware cost of an N-element RIS against N BDs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostTriple {
    pub ris: f64,
    pub bd_spp: f64,
    pub bd_sp: f64,
}

/// `c` is the RIS-to-BD phase-control cost ratio and must lie in `[2, 10]`.
pub fn cost_model(n: f64, c: f64, c0: f64) -> Result<CostTriple> {
    if !(n >= 0.0) || !n.is_finite() {
        return Err(Error::Domain(format!(
            "element count {n} must be finite and >= 0"
        )));
    }
    if !(2.0..=10.0).contains(&c) {
        return Err(Error::Domain(format!("cost ratio c = {c} outside [2, 10]")));
    }
    if !(c0 > 0.0) || !c0.is_finite() {
        return Err(Error::Domain(format!("unit cost C0 = {c0} must be > 0")));
    }
    Ok(CostTriple {
        ris: 100.0 / 23.0 * n * c0,
        bd_spp: (1.0 / c + 50.0 / 23.0) * n * c0,
        bd_sp: 7.0 / 23.0 * n * c0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hundred_elements() {
        let t = cost_model(100.0, 2.0, 1.0).unwrap();
        assert!((t.ris - 434.78).abs() < 5e-3);
        assert!((t.bd_spp - 267.39).abs() < 5e-3);
        assert!((t.bd_sp - 30.43).abs() < 5e-3);
    }

    #[test]
    fn zero_elements_cost_nothing() {
        let t = cost_model(0.0, 5.0, 3.0).unwrap();
        assert_eq!((t.ris, t.bd_spp, t.bd_sp), (0.0, 0.0, 0.0));
    }

    #[test]
    fn ratio_out_of_range() {
        assert!(cost_model(10.0, 1.5, 1.0).is_err());
        assert!(cost_model(10.0, 10.5, 1.0).is_err());
        assert!(cost_model(-1.0, 2.0, 1.0).is_err());
    }
}
