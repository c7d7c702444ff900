// Copyright 2026 The deid Authors
// SPDX-License-Identifier: Apache-2.0

//! ε-local differential privacy primitives and the budget that feeds them.

mod budget;
mod laplace;
mod planar;

pub use budget::{BudgetPool, LedgerEntry, PrivacyBudget, SplitPolicy};
pub use laplace::{bounded_laplace, bounded_scale, laplace, sample_laplace, NoiseScale};
pub use planar::{lambert_w_minus1, planar_laplace, planar_radius, radial_cdf};
