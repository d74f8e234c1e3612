//! Global importances, one local breakdown and a shape table from a heart
//! model.
//!
//! cargo run --release --example explain_model -- age

use glassboost::dataio::{load_csv, LoadOptions};
use glassboost::ebm::{fit, sigmoid, EbmHyperparams};
use glassboost::explain::{explain_global, explain_local, export_shape_function};

fn main() -> glassboost::Result<()> {
    let term = std::env::args().nth(1).unwrap_or_else(|| "age".into());
    let frame = load_csv("data/heart.csv", "diameter narrowing", None, &LoadOptions::default())?;
    let model = fit(&frame, &EbmHyperparams::default(), None)?;

    println!("term importance (mean |contribution|):");
    for e in explain_global(&model, &frame)?.ranked() {
        println!("  {:>2}. {:<24} {:.4}", e.rank, e.term, e.importance);
    }

    let local = explain_local(&model, frame.row(0));
    println!("\nrow 0: intercept {:+.4}", local.intercept);
    for (name, c) in &local.contributions {
        println!("  {name:<24} {c:+.4}");
    }
    println!("  total {:+.4} -> p = {:.4}", local.total, sigmoid(local.total));

    let shape = export_shape_function(&model, &term)?;
    println!("\nshape of {term}:");
    for row in &shape.rows {
        println!("  {:<28} {:+.4}  (n = {})", row.label, row.score, row.density);
    }
    Ok(())
}
