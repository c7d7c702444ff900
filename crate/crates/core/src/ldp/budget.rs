// Copyright 2026 The deid Authors
// SPDX-License-Identifier: Apache-2.0

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Tag;

/// Categories that draw on the budget.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BudgetPool {
    DateAge,
    Location,
}

impl BudgetPool {
    pub fn for_tag(tag: Tag) -> Result<Self> {
        match tag {
            Tag::Date | Tag::Age => Ok(BudgetPool::DateAge),
            Tag::Loc => Ok(BudgetPool::Location),
            other => Err(Error::NotBudgeted(other)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitPolicy {
    /// A quarter to locations, three quarters to dates and ages.
    FixedQuarters,
    /// Pools sized by the number of mentions each category has in the document.
    ProportionalOccurrences,
    Custom(BTreeMap<BudgetPool, f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub label: String,
    pub epsilon: f64,
}

/// A document's ε budget. Each pool is handed out at most once and split
/// evenly over the values it protects; sequential composition means the
/// ledger total never exceeds `epsilon_total`.
#[derive(Debug, Clone)]
pub struct PrivacyBudget {
    epsilon_total: f64,
    policy: SplitPolicy,
    occurrences: BTreeMap<BudgetPool, usize>,
    allocated: BTreeSet<BudgetPool>,
    ledger: Vec<LedgerEntry>,
}

const SLACK: f64 = 1e-12;

impl PrivacyBudget {
    pub fn new(epsilon_total: f64, policy: SplitPolicy) -> Result<Self> {
        if !(epsilon_total > 0.0 && epsilon_total.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "epsilon_total must be positive and finite, got {epsilon_total}"
            )));
        }
        if let SplitPolicy::Custom(fractions) = &policy {
            if fractions.values().any(|f| !(*f >= 0.0)) {
                return Err(Error::InvalidParameter(
                    "custom fractions must be non-negative".into(),
                ));
            }
            let sum: f64 = fractions.values().sum();
            if (sum - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidParameter(format!(
                    "custom fractions sum to {sum}, not 1"
                )));
            }
        }
        Ok(PrivacyBudget {
            epsilon_total,
            policy,
            occurrences: BTreeMap::new(),
            allocated: BTreeSet::new(),
            ledger: Vec::new(),
        })
    }

    /// Mention counts used by [`SplitPolicy::ProportionalOccurrences`].
    pub fn with_occurrences(mut self, date_age: usize, location: usize) -> Self {
        self.occurrences.insert(BudgetPool::DateAge, date_age);
        self.occurrences.insert(BudgetPool::Location, location);
        self
    }

    pub fn epsilon_total(&self) -> f64 {
        self.epsilon_total
    }

    pub fn policy(&self) -> &SplitPolicy {
        &self.policy
    }

    pub fn ledger(&self) -> &[LedgerEntry] {
        &self.ledger
    }

    pub fn spent(&self) -> f64 {
        self.ledger.iter().map(|e| e.epsilon).sum()
    }

    pub fn remaining(&self) -> f64 {
        (self.epsilon_total - self.spent()).max(0.0)
    }

    /// Size of a pool under the split policy.
    pub fn pool_epsilon(&self, pool: BudgetPool) -> Result<f64> {
        let eps = self.epsilon_total;
        Ok(match &self.policy {
            SplitPolicy::FixedQuarters => match pool {
                BudgetPool::Location => eps / 4.0,
                BudgetPool::DateAge => eps * 3.0 / 4.0,
            },
            SplitPolicy::ProportionalOccurrences => {
                if self.occurrences.is_empty() {
                    return Err(Error::InvalidParameter(
                        "proportional split needs occurrence counts".into(),
                    ));
                }
                let total: usize = self.occurrences.values().sum();
                let mine = self.occurrences.get(&pool).copied().unwrap_or(0);
                if total == 0 {
                    0.0
                } else {
                    eps * mine as f64 / total as f64
                }
            }
            SplitPolicy::Custom(fractions) => eps * fractions.get(&pool).copied().unwrap_or(0.0),
        })
    }

    /// Hands the category's whole pool out in `n` equal shares and records it.
    pub fn allocate(&mut self, category: Tag, n: usize) -> Result<Vec<f64>> {
        if n == 0 {
            return Err(Error::InvalidParameter(
                "cannot allocate to zero occurrences".into(),
            ));
        }
        let pool = BudgetPool::for_tag(category)?;
        let amount = self.pool_epsilon(pool)?;
        if self.allocated.contains(&pool) {
            return Err(Error::BudgetExhausted {
                requested: amount,
                remaining: 0.0,
            });
        }
        if self.spent() + amount > self.epsilon_total * (1.0 + SLACK) {
            return Err(Error::BudgetExhausted {
                requested: amount,
                remaining: self.remaining(),
            });
        }
        if !(amount > 0.0) {
            return Err(Error::BudgetExhausted {
                requested: 0.0,
                remaining: self.remaining(),
            });
        }
        self.allocated.insert(pool);
        self.ledger.push(LedgerEntry {
            label: format!(
                "{} ({n} values)",
                match pool {
                    BudgetPool::DateAge => "date_age",
                    BudgetPool::Location => "location",
                }
            ),
            epsilon: amount,
        });
        Ok(vec![amount / n as f64; n])
    }
}
