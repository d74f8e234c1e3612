//! The full benchmark matrix on the heart data, written to `out/benchmark`.
//!
//! cargo run --release --example benchmark_heart -- 20 baseline,perf-hpo,init-only

use glassboost::cli::{cmd_benchmark, BenchmarkOptions, Context, DataSpec, BENCHMARK_CONFIGS};
use glassboost::dataio::SplitSpec;
use glassboost::pretrain::PretrainConfig;

fn main() -> glassboost::Result<()> {
    let mut args = std::env::args().skip(1);
    let trials = args.next().and_then(|s| s.parse().ok()).unwrap_or(20);
    let configs: Vec<String> = match args.next() {
        Some(list) => list.split(',').map(str::to_string).collect(),
        None => BENCHMARK_CONFIGS.iter().map(|s| s.to_string()).collect(),
    };
    let ctx = Context::new(1337, "out/benchmark");
    let data = DataSpec::new("data/heart.csv", "diameter narrowing").with_sensitive("gender");
    let opts = BenchmarkOptions {
        configs,
        trials,
        pretrain: PretrainConfig::default(),
    };
    let (plan, report) = cmd_benchmark(&ctx, &data, &SplitSpec::default(), &opts, false)?;
    println!("{plan:#?}");
    if let Some(r) = report {
        println!("{}", r.matrix.to_markdown());
    }
    Ok(())
}
