//! Parameter and MAC accounting for the compact model.

use kwskit::model::{build_a0, count_flops, param_report, toggle_report, ParamConventions, REFERENCE_PARAMS};

fn main() {
    let a0 = build_a0();
    let report = param_report(&a0, &ParamConventions::default());
    for (stage, count) in a0.stages.iter().zip(&report.stages) {
        println!("{:>2} {:<18} {:>4} ch x{} -> {:>7}", count.stage, stage.operator.to_string(), stage.channels, stage.repeats, count.params);
    }
    println!("total {} (reference {REFERENCE_PARAMS})", report.total);

    let toggles = toggle_report(&a0, REFERENCE_PARAMS);
    for row in toggles.conventions.iter().chain(&toggles.one_layer_fewer) {
        println!("  {:<46} {:>7} ({:+})", row.label, row.total, row.delta);
    }

    let flops = count_flops(&a0, (198, 40));
    println!("198x40 input: {} MACs, {} FLOPs", flops.macs, flops.flops);
}
