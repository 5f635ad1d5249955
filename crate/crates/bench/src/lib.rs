//! Fixtures shared by the benchmarks.

use htl_core::{generate_synthetic, Dataset, DomainTag, SyntheticSpec};

/// Offset Doppler pair at the benchmark noise level.
pub fn spec() -> SyntheticSpec {
    SyntheticSpec::doppler_offset(0.01)
}

pub fn source(n: usize) -> Dataset {
    generate_synthetic(&spec(), n, DomainTag::Source, 1).expect("valid spec")
}

pub fn target(n: usize) -> Dataset {
    generate_synthetic(&spec(), n, DomainTag::Target, 2).expect("valid spec")
}

/// Equispaced queries on the unit interval.
pub fn queries(count: usize) -> Vec<Vec<f64>> {
    htl_core::query_grid(1, 0.0, 1.0, count, 0)
}
