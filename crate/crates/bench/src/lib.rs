//! Inputs shared by the criterion benchmarks in `benches/`.

use liouville::catalog::{get_system, SystemDefinition, SystemParams};

/// Catalog system with default parameters.
pub fn system(name: &str) -> SystemDefinition {
    get_system(name, &SystemParams::new()).expect("catalog system")
}

/// `n` vortices with strengths `1, .., 1, -(n - 1)`.
pub fn vortices(n: usize) -> SystemDefinition {
    let mut xi = vec![1.0; n - 1];
    xi.push(-((n - 1) as f64));
    let params: SystemParams = [("xi".to_string(), xi)].into_iter().collect();
    get_system("vortices", &params).expect("vortex system")
}
