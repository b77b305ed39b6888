//! Shared fixtures for the benchmarks.

use warpfin::{preset, CampaignSpec, CheckKind, EvalPoint, MetricFamily};

/// Campaign over a preset with the given checks.
pub fn campaign(name: &str, n: usize, samples: usize, checks: &[CheckKind]) -> CampaignSpec {
    CampaignSpec {
        family: preset(name).expect("known preset"),
        n,
        samples,
        seed: 42,
        checks: checks.to_vec(),
        ..CampaignSpec::default()
    }
}

/// A preset family and `count` deterministic sample points.
pub fn fixture(name: &str, n: usize, count: usize) -> (MetricFamily, Vec<EvalPoint>) {
    let spec = campaign(name, n, count, &[]);
    let family = spec.build_family().expect("preset builds");
    let points = (0..count).map(|i| spec.sample_point(i).expect("valid point")).collect();
    (family, points)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_are_deterministic() {
        let (_, a) = fixture("randers", 3, 4);
        let (_, b) = fixture("randers", 3, 4);
        assert_eq!(a, b);
        assert!(a.iter().all(|p| p.n() == 3));
    }
}
