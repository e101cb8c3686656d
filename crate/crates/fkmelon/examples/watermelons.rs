//! Brownian watermelons: sample by Hermitian matrix bridges and by offset
//! rejection, and gate both against the analytic midpoint marginal.

use fkmelon::watermelon::{
    ks_threshold_one, midpoint_ks_gate, sample_watermelon, MarginalDensity, WatermelonMethod,
};

fn main() {
    let r = 2;
    let density = MarginalDensity::new(r, 0.5).unwrap();
    println!(
        "marginal normalization (quadrature vs closed form): {:.8} vs {:.8}",
        density.normalization(),
        MarginalDensity::closed_form_norm(r, 0.5)
    );
    let n = 4000;
    for (name, method) in [
        ("matrix bridge", WatermelonMethod::MatrixBridge),
        ("rejection eps=0.05", WatermelonMethod::EpsilonRejection(5)),
    ] {
        let samples = sample_watermelon(r, 64, n, method, 9).unwrap();
        let ks = midpoint_ks_gate(&samples, &density);
        println!(
            "{name:>20}: midpoint KS {:.4} (gate {:.4}) over {} samples",
            ks,
            ks_threshold_one(n),
            samples.len()
        );
    }
}
