//! Shared fixtures for the criterion benches.

use damp_core::damp::{build_sensors, local_compute_w};
use damp_core::{generate_instance, Partition, ProblemInstance};

/// Instance at the default experiment scale (N = 5000, κ = 0.2, ρ = 0.1, σ = 0.02).
pub fn full_scale_instance(seed: u64) -> ProblemInstance {
    generate_instance(5000, 0.2, 0.1, 0.02, seed).expect("valid parameters")
}

/// First-iteration contributions `w^p` (x = 0, z = y) for `sensors` sensors,
/// together with the threshold β = τ·σ_0.
pub fn first_iteration_contributions(
    instance: &ProblemInstance,
    sensors: usize,
    tau: f64,
) -> (Vec<Vec<f64>>, f64) {
    let partition = Partition::balanced(instance.m(), sensors).expect("enough rows");
    let mut states = build_sensors(instance, &partition).expect("matching partition");
    let x = vec![0.0; instance.n()];
    for s in &mut states {
        local_compute_w(s, &x).expect("dimensions agree");
    }
    let sigma = damp_core::sigma_estimate(&instance.y, instance.m()).expect("nonempty");
    (states.into_iter().map(|s| s.w).collect(), tau * sigma)
}
