//! In-memory walk through the whole pipeline: synthesize a two-appliance
//! home, train a disaggregator on day one, predict day two from the
//! aggregate alone, score the prediction, and render the usage report.
//!
//! Run with: cargo run --example end_to_end

use nalm::disagg;
use nalm::eval;
use nalm::events::extract_usages;
use nalm::report::{build_model, render_report};
use nalm::synth;
use nalm::trace::{aggregate, ApplianceId};

fn main() -> anyhow::Result<()> {
    let seed = 42;
    let scenario = synth::generate("demo", seed)?;
    println!(
        "scenario '{}': {} appliances, user {}, home {}",
        scenario.name,
        scenario.train.len(),
        scenario.user,
        scenario.home
    );

    // Day one: the virtual smart meter sums the per-appliance traces, and the
    // schedule ground truth labels every second.
    let train_aggregate = aggregate(&scenario.train)?;
    let model = disagg::train(&train_aggregate, &scenario.train_truth, &scenario.train_config, seed)?;
    println!("trained {} backend", scenario.train_config.backend);

    // Day two: only the aggregate is observed.
    let test_aggregate = aggregate(&scenario.test)?;
    let predicted = disagg::predict(&model, &test_aggregate)?;

    let evaluation = eval::confusion(&predicted, &scenario.test_truth)?;
    let rows = eval::metric_rows(&evaluation)?;
    print!("{}", eval::format_table(&rows));

    let usages = extract_usages(&predicted, scenario.debounce);
    let catalog: Vec<ApplianceId> = predicted.appliances().cloned().collect();
    let behavior = build_model(&scenario.user, &scenario.home, usages, &catalog)?;
    print!("{}", render_report(&behavior, &Default::default())?);
    Ok(())
}
