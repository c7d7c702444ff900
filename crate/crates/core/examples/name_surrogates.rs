// Copyright 2026 The deid Authors
// SPDX-License-Identifier: Apache-2.0

//! Name surrogates that keep family ties, and shape-preserving masks.
//!
//!     cargo run --example name_surrogates

use deid::model::{Source, Tag, TaggedSpan};
use deid::surrogates::{substitute_formatted, substitute_name, NameLookupTable, NamePools};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

fn main() {
    let pools = NamePools::default();
    let mut rng = ChaCha20Rng::seed_from_u64(5);
    let mut table = NameLookupTable::default();
    for name in [
        "M. Jean Dupont",
        "Mme Marie Dupont",
        "Dupont",
        "Jean Dupont",
        "Dr Paul ROCHE",
    ] {
        println!(
            "{name:<18} -> {}",
            substitute_name(&mut table, &pools, name, &mut rng)
        );
    }

    for (tag, s) in [
        (Tag::Phone, "03 84 11 22 33"),
        (Tag::Phone, "+33 6 12 34 56 78"),
        (Tag::Email, "jean.dupont@chu-belfort.fr"),
        (Tag::Url, "https://www.chu-belfort.fr/dossier/4521"),
        (Tag::Id, "AB1234567"),
    ] {
        let span = TaggedSpan {
            start: 0,
            end: s.chars().count(),
            tag,
            source: Source::Merged,
            surface: s.into(),
        };
        println!(
            "{:<6} {s:<40} -> {}",
            tag,
            substitute_formatted(&span, &mut rng)
        );
    }
}
