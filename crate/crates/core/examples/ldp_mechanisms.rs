// Copyright 2026 The deid Authors
// SPDX-License-Identifier: Apache-2.0

//! The noise primitives and the per-document budget.
//!
//!     cargo run --example ldp_mechanisms

use deid::ldp::{
    bounded_laplace, bounded_scale, laplace, planar_laplace, NoiseScale, PrivacyBudget, SplitPolicy,
};
use deid::Tag;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

fn main() -> deid::Result<()> {
    let mut rng = ChaCha20Rng::seed_from_u64(7);

    for eps in [0.1, 1.0, 10.0] {
        let s = NoiseScale::new(61.0, eps)?;
        let plain: Vec<f64> = (0..5).map(|_| laplace(30.0, s, &mut rng)).collect();
        let bounded: Vec<f64> = (0..5)
            .map(|_| bounded_laplace(30.0, 0.0, 61.0, s, &mut rng))
            .collect::<deid::Result<_>>()?;
        println!(
            "eps {eps:>4}: scale {:>8.2}, bounded scale {:>8.2}",
            s.scale(),
            bounded_scale(61.0, eps)
        );
        println!("  laplace(30)         {plain:.1?}");
        println!("  bounded in [0, 61]  {bounded:.1?}");
    }

    for eps in [0.1, 1.0] {
        let radii: Vec<f64> = (0..10_000)
            .map(|_| planar_laplace(eps, &mut rng).map(|p| p.0))
            .collect::<deid::Result<_>>()?;
        let mean = radii.iter().sum::<f64>() / radii.len() as f64;
        println!(
            "planar eps {eps}: mean radius {mean:.2} km (expected {:.2})",
            2.0 / eps
        );
    }

    let mut budget = PrivacyBudget::new(1.0, SplitPolicy::FixedQuarters)?;
    println!("date shares: {:?}", budget.allocate(Tag::Date, 3)?);
    println!("location shares: {:?}", budget.allocate(Tag::Loc, 2)?);
    println!("ledger: {:?}, spent {}", budget.ledger(), budget.spent());
    println!(
        "second date allocation: {}",
        budget.allocate(Tag::Age, 1).unwrap_err()
    );
    Ok(())
}
