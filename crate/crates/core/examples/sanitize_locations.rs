// Copyright 2026 The deid Authors
// SPDX-License-Identifier: Apache-2.0

//! Location surrogates: a planar Laplace draw snapped to the gazetteer, one
//! draw per city per document.
//!
//!     cargo run --example sanitize_locations [epsilon_per_km]

use deid::location::{great_circle_km, substitute_location, Gazetteer, LocationMemo};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

fn main() -> deid::Result<()> {
    let epsilon: f64 = std::env::args()
        .nth(1)
        .and_then(|a| a.parse().ok())
        .unwrap_or(0.1);
    let gaz = Gazetteer::default();
    let mut rng = ChaCha20Rng::seed_from_u64(11);

    let mut memo = LocationMemo::default();
    for surface in [
        "Bermont",
        "90400",
        "12 rue des Vosges, Belfort",
        "bermont",
        "Trifouillis",
    ] {
        let (text, id) = substitute_location(&gaz, surface, epsilon, &mut memo, &mut rng)?;
        println!("{surface:<28} -> {text} ({})", gaz.city(id).name);
    }

    // how far surrogates land at this epsilon
    let origin = gaz.by_name("Belfort").expect("in shipped gazetteer");
    let o = gaz.city(origin);
    let mut same = 0;
    let mut total_km = 0.0;
    let n = 2000;
    for _ in 0..n {
        let mut memo = LocationMemo::default();
        let (_, y) = substitute_location(&gaz, "Belfort", epsilon, &mut memo, &mut rng)?;
        let c = gaz.city(y);
        same += usize::from(y == origin);
        total_km += great_circle_km(o.latitude, o.longitude, c.latitude, c.longitude);
    }
    println!(
        "Belfort over {n} documents: kept {same} times, mean displacement {:.1} km",
        total_km / n as f64
    );
    Ok(())
}
