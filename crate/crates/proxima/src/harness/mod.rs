//! Experiment harness behind the command-line surface: config files and
//! overrides, the ablation suite with normalized scoring, objective
//! interpolation sweeps, clip-geometry tables, and plot-data exports.

pub mod clipgeom;
pub mod config;
pub mod interp;
pub mod plotdata;
pub mod suite;

pub use clipgeom::{clip_geometry_table, AdvantageSign};
pub use config::{
    apply_pairs, config_hash, parse_config_file, parse_overrides, parse_variant, render_pairs,
    to_pairs, variant_label,
};
pub use interp::{
    collect_eval_batch, default_alphas, interpolate_objectives, load_checkpoint_pair,
    InterpolationSweep,
};
pub use plotdata::emit_plot_data;
pub use suite::{run_suite, SuiteResult, SuiteSpec};
