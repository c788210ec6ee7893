//! Operation counters threaded through the datapath so that the cost model
//! reads counts from real executions instead of hand formulas.

use std::ops::AddAssign;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpCounts {
    pub mults: u64,
    pub adds: u64,
    pub lookups: u64,
}

impl OpCounts {
    #[inline]
    pub(crate) fn mul(&mut self, n: u64) {
        self.mults += n;
    }

    #[inline]
    pub(crate) fn add(&mut self, n: u64) {
        self.adds += n;
    }

    #[inline]
    pub(crate) fn lookup(&mut self, n: u64) {
        self.lookups += n;
    }

    pub fn is_zero(&self) -> bool {
        *self == OpCounts::default()
    }
}

impl AddAssign for OpCounts {
    fn add_assign(&mut self, rhs: Self) {
        self.mults += rhs.mults;
        self.adds += rhs.adds;
        self.lookups += rhs.lookups;
    }
}
