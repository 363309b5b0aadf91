use crate::error::{Error, Result};
use crate::scalar::Real;

/// A bond's remaining flows placed on the curve grid.
///
/// `stages[i]` is the 1-based grid stage of payment `i`; the flow there is
/// discounted through stages `1..stages[i]-1`. `alphas[i]` is the flow
/// divided by the nominal, so the last entry is `1 + coupon/100`.
#[derive(Debug, Clone, PartialEq)]
pub struct CashFlowSchedule<T> {
    pub bond_id: String,
    pub stages: Vec<usize>,
    pub alphas: Vec<T>,
}

impl<T: Real> CashFlowSchedule<T> {
    pub fn new(bond_id: impl Into<String>, stages: Vec<usize>, alphas: Vec<T>) -> Result<Self> {
        let bond_id = bond_id.into();
        if stages.is_empty() || stages.len() != alphas.len() {
            return Err(Error::Domain(format!("{bond_id}: schedule needs matching, nonempty stages and flows")));
        }
        if stages[0] == 0 || stages.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Domain(format!("{bond_id}: stages must be 1-based and strictly increasing")));
        }
        if alphas.iter().any(|a| !(*a > T::zero())) {
            return Err(Error::Domain(format!("{bond_id}: flows must be positive")));
        }
        Ok(CashFlowSchedule { bond_id, stages, alphas })
    }

    /// Number of payments, `n_j`.
    pub fn len(&self) -> usize {
        self.stages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stages.is_empty()
    }

    /// Stage of the final payment, `R_{n_j}`.
    pub fn last_stage(&self) -> usize {
        *self.stages.last().expect("schedule is nonempty")
    }

    pub fn cast<U: Real>(&self) -> CashFlowSchedule<U> {
        CashFlowSchedule {
            bond_id: self.bond_id.clone(),
            stages: self.stages.clone(),
            alphas: self.alphas.iter().map(|a| U::lit(a.as_f64())).collect(),
        }
    }
}
