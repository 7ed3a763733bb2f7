mod bench;
mod calibrate;
mod compensate;
mod coverage;
mod simulate;

pub use bench::bench;
pub use calibrate::calibrate;
pub use compensate::compensate;
pub use coverage::coverage;
pub use simulate::simulate;

/// Shortest round-trip decimal form, so tables are stable across runs.
fn num(v: f64) -> String {
    format!("{v}")
}
