// Copyright 2026 The deid Authors
// SPDX-License-Identifier: Apache-2.0

use clap::Parser;

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    std::process::exit(deid::cli::run(deid::cli::Cli::parse()));
}
