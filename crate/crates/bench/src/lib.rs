//! Fixtures shared by the criterion benchmarks in `benches/`.

use lcmil::pipeline::{synthesize_slide, NoiseChoice, Slide};
use lcmil::SynthSpec;

/// Square synthetic slide with 30% S-I noise.
pub fn slide(side: usize, seed: u64) -> Slide {
    let spec = SynthSpec {
        width: side,
        height: side,
        lesion_scale: side as f64 / 8.0,
        ..SynthSpec::default()
    };
    synthesize_slide(
        &spec,
        &NoiseChoice::S1 {
            rho0: 0.3,
            rho1: 0.3,
        },
        seed,
        0,
    )
    .expect("fixture parameters are valid")
}

#[cfg(test)]
mod tests {
    #[test]
    fn fixture_builds() {
        let s = super::slide(32, 1);
        assert_eq!(s.grid.width(), 32);
        assert!(s.coarse.grid.count() > 0);
    }
}
