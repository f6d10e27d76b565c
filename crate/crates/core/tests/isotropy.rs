//! Directional tail profiles of an isotropic process agree across directions.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use xdep_core::extremes::{directional_tail_profile, rank_transform_frechet, UniformScores};
use xdep_core::rng::StreamKey;
use xdep_core::sim::{simulate, CorrelationModel, MaxStableKind, ProcessSpec, SiteSet};

#[test]
fn isotropic_brown_resnick_has_overlapping_directional_curves() {
    let sites = SiteSet::uniform(40, &mut ChaCha8Rng::seed_from_u64(21)).unwrap();
    let spec = ProcessSpec::MaxStable {
        kind: MaxStableKind::BrownResnick,
        model: CorrelationModel::new(0.5, 1.0).unwrap(),
    };
    let sample = simulate(&spec, &sites, 4000, StreamKey::new(5, 0)).unwrap();
    let scores = UniformScores::from_frechet(&rank_transform_frechet(&sample.values).unwrap());
    let bins = 5;
    let profile = directional_tail_profile(&scores, &sites, 0.975, bins).unwrap();
    let mut compared = 0;
    for bin in 0..bins {
        let cells: Vec<_> = profile.iter().filter(|p| p.bin == bin && p.pairs >= 10).collect();
        if cells.len() < 4 {
            continue;
        }
        let pairs: usize = cells.iter().map(|p| p.pairs).sum();
        let pooled = cells.iter().map(|p| p.chi * p.pairs as f64).sum::<f64>() / pairs as f64;
        for c in &cells {
            assert!((c.chi - pooled).abs() < 0.1, "bin {bin} direction {}: {} vs pooled {pooled}", c.direction, c.chi);
        }
        compared += 1;
    }
    assert!(compared >= 2, "too few bins populated in every direction");
}
