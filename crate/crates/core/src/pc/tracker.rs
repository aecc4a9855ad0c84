use serde::{Deserialize, Serialize};

use super::{PcKernel, PeakEvent};
use crate::error::{Error, Result};

/// How the budgets are applied across the symbols a tracker sees.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BudgetScope {
    /// Estimates reset every symbol; each symbol must meet the budget alone.
    PerSymbol,
    /// Estimates accumulate over all symbols opened so far and the budget is
    /// enforced on their average, so a peaky symbol can borrow from quiet ones.
    #[default]
    Running,
}

/// Normalisation of the summed per-antenna EVM increments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EvmSumMode {
    /// Δp_in·Σ_m|A_p|² / S_t. Each antenna carries S_t/M, so this is the
    /// antenna-averaged EVM.
    #[default]
    AsPrinted,
    /// Additionally divide by M.
    DivideByAntennas,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Increments {
    pub evm: f64,
    pub aclr: Vec<f64>,
}

/// Recursive EVM and per-antenna ACLR estimates against their budgets.
///
/// Estimates are stored as sums over opened symbols; reported values divide
/// by the symbol count. Both sums only grow.
#[derive(Debug, Clone, PartialEq)]
pub struct DistortionTracker {
    pub evm_budget: f64,
    pub aclr_budget: f64,
    pub antennas: usize,
    pub total_power: f64,
    pub scope: BudgetScope,
    pub evm_mode: EvmSumMode,
    evm_sum: f64,
    aclr_sum: Vec<f64>,
    symbols: u64,
    initial_evm: f64,
    initial_aclr: f64,
}

impl DistortionTracker {
    /// Budgets are linear ratios.
    pub fn new(evm_budget: f64, aclr_budget: f64, antennas: usize, total_power: f64) -> Result<Self> {
        if !(evm_budget > 0.0 && aclr_budget > 0.0) {
            return Err(Error::Config("budgets must be positive".into()));
        }
        if antennas == 0 || !(total_power > 0.0) {
            return Err(Error::Config("need at least one antenna and positive power".into()));
        }
        Ok(DistortionTracker {
            evm_budget,
            aclr_budget,
            antennas,
            total_power,
            scope: BudgetScope::default(),
            evm_mode: EvmSumMode::default(),
            evm_sum: 0.0,
            aclr_sum: vec![0.0; antennas],
            symbols: 0,
            initial_evm: 0.0,
            initial_aclr: 0.0,
        })
    }

    pub fn with_scope(mut self, scope: BudgetScope) -> Self {
        self.scope = scope;
        self
    }

    pub fn with_evm_mode(mut self, mode: EvmSumMode) -> Self {
        self.evm_mode = mode;
        self
    }

    /// Pre-cancellation measured values each symbol starts from.
    pub fn with_initial(mut self, evm: f64, aclr: f64) -> Self {
        self.initial_evm = evm;
        self.initial_aclr = aclr;
        self
    }

    /// Open the next symbol.
    pub fn begin_symbol(&mut self) {
        match self.scope {
            BudgetScope::PerSymbol => {
                self.symbols = 1;
                self.evm_sum = self.initial_evm;
                self.aclr_sum.iter_mut().for_each(|a| *a = self.initial_aclr);
            }
            BudgetScope::Running => {
                self.symbols += 1;
                self.evm_sum += self.initial_evm;
                self.aclr_sum.iter_mut().for_each(|a| *a += self.initial_aclr);
            }
        }
    }

    pub fn symbols(&self) -> u64 {
        self.symbols
    }

    fn allowance(&self) -> f64 {
        self.symbols.max(1) as f64
    }

    /// Current EVM estimate ε_e.
    pub fn evm(&self) -> f64 {
        self.evm_sum / self.allowance()
    }

    /// Current ACLR estimate of antenna `m`.
    pub fn aclr(&self, m: usize) -> f64 {
        self.aclr_sum[m] / self.allowance()
    }

    pub fn max_aclr(&self) -> f64 {
        self.aclr_sum.iter().cloned().fold(0.0, f64::max) / self.allowance()
    }

    pub fn evm_admits(&self, inc: &Increments) -> bool {
        self.evm_sum + inc.evm <= self.evm_budget * self.allowance()
    }

    pub fn aclr_admits(&self, inc: &Increments) -> bool {
        let cap = self.aclr_budget * self.allowance();
        self.aclr_sum.iter().zip(&inc.aclr).all(|(a, d)| a + d <= cap)
    }

    pub fn commit(&mut self, inc: &Increments) {
        self.evm_sum += inc.evm;
        for (a, d) in self.aclr_sum.iter_mut().zip(&inc.aclr) {
            *a += d;
        }
    }

    /// Fold another tracker's sums into this one (same configuration).
    pub fn merge(&mut self, other: &DistortionTracker) {
        self.evm_sum += other.evm_sum;
        for (a, b) in self.aclr_sum.iter_mut().zip(&other.aclr_sum) {
            *a += b;
        }
        self.symbols += other.symbols;
    }
}

/// Δε_e = (Δp_in/S_t)·Σ_m|A_p|² and Δε_a^(m) = (M·Δp_o/S_t)·|A_p^(m)|².
pub fn estimate_increments(events: &[Option<PeakEvent>], k: &PcKernel, tr: &DistortionTracker) -> Increments {
    let m = tr.antennas as f64;
    let mut aclr = vec![0.0; tr.antennas];
    let mut sum = 0.0;
    for ev in events.iter().flatten() {
        let p = ev.excess * ev.excess;
        sum += p;
        aclr[ev.antenna] += m * k.delta_p_out * p / tr.total_power;
    }
    let mut evm = k.delta_p_in * sum / tr.total_power;
    if tr.evm_mode == EvmSumMode::DivideByAntennas {
        evm /= m;
    }
    Increments { evm, aclr }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn running_scope_accumulates_allowance() {
        let mut t = DistortionTracker::new(0.01, 1e-5, 1, 1.0).unwrap();
        t.begin_symbol();
        let big = Increments { evm: 0.015, aclr: vec![0.0] };
        assert!(!t.evm_admits(&big));
        t.commit(&Increments { evm: 0.002, aclr: vec![0.0] });
        t.begin_symbol();
        assert!(t.evm_admits(&big));
        t.commit(&big);
        assert!((t.evm() - 0.0085).abs() < 1e-15);
    }

    #[test]
    fn per_symbol_scope_resets() {
        let mut t = DistortionTracker::new(0.01, 1e-5, 2, 1.0).unwrap().with_scope(BudgetScope::PerSymbol);
        t.begin_symbol();
        t.commit(&Increments { evm: 0.009, aclr: vec![5e-6, 0.0] });
        t.begin_symbol();
        assert_eq!(t.evm(), 0.0);
        assert_eq!(t.max_aclr(), 0.0);
    }
}
