//! Partitions of a compact interval: construction (uniform, Chebyshev,
//! seeded random), reflection, refinement sequences, and serialization as a
//! bare JSON array of knots.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::str::FromStr;
use thiserror::Error;

/// Interior knots of a random partition may not sit closer than this
/// fraction of the interval length to each other or to the endpoints.
pub const MIN_GAP_FRACTION: f64 = 1e-6;

#[derive(Debug, Error, PartialEq)]
pub enum PartitionError {
    #[error("invalid interval: left endpoint {0} must be strictly below right endpoint {1}")]
    InvalidInterval(f64, f64),
    #[error("a partition needs at least 2 knots, got {0}")]
    TooFewKnots(usize),
    #[error("knots must be finite and strictly increasing (violation at index {0})")]
    KnotsNotIncreasing(usize),
    #[error("sizes must be a nonempty strictly increasing list of integers >= 2")]
    BadSizes,
}

/// Strictly increasing knots `a = x_0 < x_1 < ... < x_{k-1} = b`, `k >= 2`.
///
/// Serializes to/from a bare JSON array of knots; deserialization
/// re-validates the ordering invariant.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    knots: Vec<f64>,
}

impl Partition {
    /// Validates and wraps an explicit knot vector.
    pub fn from_knots(knots: Vec<f64>) -> Result<Self, PartitionError> {
        if knots.len() < 2 {
            return Err(PartitionError::TooFewKnots(knots.len()));
        }
        if !knots[0].is_finite() {
            return Err(PartitionError::KnotsNotIncreasing(0));
        }
        for i in 1..knots.len() {
            if !knots[i].is_finite() || knots[i] <= knots[i - 1] {
                return Err(PartitionError::KnotsNotIncreasing(i));
            }
        }
        Ok(Self { knots })
    }

    /// `k` equally spaced knots on `[a, b]`.
    pub fn uniform(a: f64, b: f64, k: usize) -> Result<Self, PartitionError> {
        check_interval(a, b)?;
        if k < 2 {
            return Err(PartitionError::TooFewKnots(k));
        }
        let mut knots: Vec<f64> = (0..k)
            .map(|i| a + (b - a) * i as f64 / (k - 1) as f64)
            .collect();
        knots[0] = a;
        knots[k - 1] = b;
        Self::from_knots(knots)
    }

    /// Endpoints plus the `k - 2` Chebyshev points of the first kind mapped
    /// from `[-1, 1]` to `[a, b]`, in increasing order.
    pub fn chebyshev_first_kind(a: f64, b: f64, k: usize) -> Result<Self, PartitionError> {
        check_interval(a, b)?;
        if k < 2 {
            return Err(PartitionError::TooFewKnots(k));
        }
        let n = k - 2;
        let mid = 0.5 * (a + b);
        let half = 0.5 * (b - a);
        let mut knots = Vec::with_capacity(k);
        knots.push(a);
        // cos((2i - 1) pi / (2n)) decreases in i; push in reverse for
        // ascending order.
        for i in (1..=n).rev() {
            let c = ((2 * i - 1) as f64 * std::f64::consts::PI / (2.0 * n as f64)).cos();
            knots.push(mid + half * c);
        }
        knots.push(b);
        Self::from_knots(knots)
    }

    /// `k - 2` interior knots drawn uniformly at random (deterministic in
    /// `seed`), redrawn until every gap is at least
    /// `MIN_GAP_FRACTION * (b - a)`.
    pub fn random(a: f64, b: f64, k: usize, seed: u64) -> Result<Self, PartitionError> {
        check_interval(a, b)?;
        if k < 2 {
            return Err(PartitionError::TooFewKnots(k));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let min_gap = MIN_GAP_FRACTION * (b - a);
        loop {
            let mut knots = Vec::with_capacity(k);
            knots.push(a);
            let mut interior: Vec<f64> = (0..k - 2).map(|_| rng.gen_range(a..b)).collect();
            interior.sort_by(f64::total_cmp);
            knots.extend(interior);
            knots.push(b);
            if knots.windows(2).all(|w| w[1] - w[0] >= min_gap) {
                return Self::from_knots(knots);
            }
        }
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    /// Number of knots `k` (the partition has `k - 1` subintervals).
    pub fn len(&self) -> usize {
        self.knots.len()
    }

    pub fn is_empty(&self) -> bool {
        false // invariant: at least two knots
    }

    pub fn a(&self) -> f64 {
        self.knots[0]
    }

    pub fn b(&self) -> f64 {
        *self.knots.last().unwrap()
    }

    /// Mesh norm: the largest gap between consecutive knots.
    pub fn norm(&self) -> f64 {
        self.knots
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(0.0, f64::max)
    }

    /// Index `i` of the subinterval `[x_i, x_{i+1}]` containing `x`; the
    /// right endpoint belongs to the last subinterval.
    pub fn locate(&self, x: f64) -> Option<usize> {
        if x < self.a() || x > self.b() {
            return None;
        }
        let i = match self.knots.binary_search_by(|k| k.total_cmp(&x)) {
            Ok(i) => i,
            Err(i) => i - 1,
        };
        Some(i.min(self.knots.len() - 2))
    }

    /// Mirror image about the interval midpoint:
    /// `y_i = a + b - x_{k-1-i}`. Same interval, reversed gap pattern.
    pub fn reflect(&self) -> Partition {
        let s = self.a() + self.b();
        let mut knots: Vec<f64> = self.knots.iter().rev().map(|&x| s - x).collect();
        // Endpoints map to each other exactly regardless of rounding.
        knots[0] = self.a();
        let k = knots.len();
        knots[k - 1] = self.b();
        Partition { knots }
    }
}

fn check_interval(a: f64, b: f64) -> Result<(), PartitionError> {
    if a.is_finite() && b.is_finite() && b > a {
        Ok(())
    } else {
        Err(PartitionError::InvalidInterval(a, b))
    }
}

impl Serialize for Partition {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.knots.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Partition {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let knots = Vec::<f64>::deserialize(deserializer)?;
        Partition::from_knots(knots).map_err(serde::de::Error::custom)
    }
}

/// The partition families the report tooling can sweep over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PartitionKind {
    Uniform,
    Chebyshev,
    Random,
}

impl PartitionKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            PartitionKind::Uniform => "uniform",
            PartitionKind::Chebyshev => "chebyshev",
            PartitionKind::Random => "random",
        }
    }
}

impl FromStr for PartitionKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "uniform" => Ok(PartitionKind::Uniform),
            "chebyshev" => Ok(PartitionKind::Chebyshev),
            "random" => Ok(PartitionKind::Random),
            other => Err(format!(
                "unknown partition kind `{other}` (expected uniform, chebyshev, or random)"
            )),
        }
    }
}

/// Builds one partition per entry of `sizes` (strictly increasing, each
/// `>= 2`). Random partitions derive an independent stream per size from
/// `seed`, so reports are reproducible regardless of evaluation order.
pub fn sequence(
    kind: PartitionKind,
    a: f64,
    b: f64,
    sizes: &[usize],
    seed: u64,
) -> Result<Vec<Partition>, PartitionError> {
    if sizes.is_empty() || sizes[0] < 2 || sizes.windows(2).any(|w| w[1] <= w[0]) {
        return Err(PartitionError::BadSizes);
    }
    sizes
        .iter()
        .enumerate()
        .map(|(i, &k)| match kind {
            PartitionKind::Uniform => Partition::uniform(a, b, k),
            PartitionKind::Chebyshev => Partition::chebyshev_first_kind(a, b, k),
            PartitionKind::Random => {
                let stream = seed ^ 0x9E37_79B9_7F4A_7C15u64.wrapping_mul(i as u64 + 1);
                Partition::random(a, b, k, stream)
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn uniform_frozen_case() {
        let p = Partition::uniform(0.0, 1.0, 5).unwrap();
        assert_eq!(p.knots(), &[0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(p.norm(), 0.25);
    }

    #[test]
    fn chebyshev_frozen_case() {
        // Interior knots for k = 4 are cos(pi/4) and cos(3 pi/4), i.e.
        // +-sqrt(2)/2, sorted ascending between the endpoints.
        let p = Partition::chebyshev_first_kind(-1.0, 1.0, 4).unwrap();
        let half_sqrt2 = 2.0_f64.sqrt() / 2.0;
        assert_eq!(p.len(), 4);
        assert_eq!(p.knots()[0], -1.0);
        assert_relative_eq!(p.knots()[1], -half_sqrt2, max_relative = 1e-15);
        assert_relative_eq!(p.knots()[2], half_sqrt2, max_relative = 1e-15);
        assert_eq!(p.knots()[3], 1.0);
    }

    #[test]
    fn random_respects_min_gap_and_pigeonhole() {
        let p = Partition::random(0.0, 1.0, 50, 42).unwrap();
        assert_eq!(p.len(), 50);
        let min_gap = p
            .knots()
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min);
        assert!(min_gap >= MIN_GAP_FRACTION);
        // The largest of 49 gaps covering a unit interval is at least 1/49.
        assert!(p.norm() >= 1.0 / 49.0);
    }

    #[test]
    fn random_is_deterministic_in_seed() {
        let p = Partition::random(0.0, 1.0, 12, 7).unwrap();
        let q = Partition::random(0.0, 1.0, 12, 7).unwrap();
        assert_eq!(p, q);
        let r = Partition::random(0.0, 1.0, 12, 8).unwrap();
        assert_ne!(p, r);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(matches!(
            Partition::uniform(1.0, 0.0, 5),
            Err(PartitionError::InvalidInterval(..))
        ));
        assert!(matches!(
            Partition::uniform(0.0, 1.0, 1),
            Err(PartitionError::TooFewKnots(1))
        ));
        assert!(matches!(
            Partition::from_knots(vec![0.0, 0.5, 0.5, 1.0]),
            Err(PartitionError::KnotsNotIncreasing(2))
        ));
        assert!(matches!(
            Partition::from_knots(vec![0.0, f64::NAN, 1.0]),
            Err(PartitionError::KnotsNotIncreasing(1))
        ));
    }

    #[test]
    fn reflect_mirrors_generic_knots() {
        let p = Partition::from_knots(vec![0.0, 0.1, 1.0]).unwrap();
        let r = p.reflect();
        assert_eq!(r.knots()[0], 0.0);
        assert_relative_eq!(r.knots()[1], 0.9, max_relative = 1e-15);
        assert_eq!(r.knots()[2], 1.0);
        // Generic intervals only guarantee reflection up to one rounding of
        // a + b - x; the double reflection lands within an ulp.
        for (orig, back) in p.knots().iter().zip(r.reflect().knots()) {
            assert_relative_eq!(orig, back, max_relative = 1e-15, epsilon = 1e-15);
        }
    }

    #[test]
    fn reflect_is_exact_where_subtraction_is() {
        // On a symmetric interval a + b = 0, so reflection is negation:
        // exact in floating point, hence an exact involution with exactly
        // equal norms. Dyadic uniform grids are exact for the same reason.
        for seed in 0..20 {
            let p = Partition::random(-1.0, 1.0, 9, seed).unwrap();
            let r = p.reflect();
            assert_eq!(r.reflect(), p, "involution failed at seed {seed}");
            assert_eq!(r.norm(), p.norm(), "norm changed at seed {seed}");
        }
        let p = Partition::uniform(0.0, 1.0, 5).unwrap();
        assert_eq!(p.reflect().reflect(), p);
        assert_eq!(p.reflect().norm(), p.norm());
    }

    #[test]
    fn locate_finds_subintervals() {
        let p = Partition::uniform(0.0, 1.0, 5).unwrap();
        assert_eq!(p.locate(0.0), Some(0));
        assert_eq!(p.locate(0.25), Some(1));
        assert_eq!(p.locate(0.6), Some(2));
        assert_eq!(p.locate(1.0), Some(3));
        assert_eq!(p.locate(1.1), None);
        assert_eq!(p.locate(-0.1), None);
    }

    #[test]
    fn sequence_validates_sizes_and_decreases_norms() {
        assert!(sequence(PartitionKind::Uniform, 0.0, 1.0, &[5, 5], 0).is_err());
        assert!(sequence(PartitionKind::Uniform, 0.0, 1.0, &[], 0).is_err());
        let seq = sequence(PartitionKind::Chebyshev, 0.0, 1.0, &[5, 9, 17, 33, 65], 0).unwrap();
        for w in seq.windows(2) {
            assert!(
                w[1].norm() < w[0].norm(),
                "chebyshev norms must strictly decrease"
            );
        }
    }

    #[test]
    fn json_roundtrip_is_a_bare_array() {
        let p = Partition::uniform(0.0, 1.0, 3).unwrap();
        let s = serde_json::to_string(&p).unwrap();
        assert_eq!(s, "[0.0,0.5,1.0]");
        let q: Partition = serde_json::from_str(&s).unwrap();
        assert_eq!(p, q);
        assert!(serde_json::from_str::<Partition>("[0.0,0.5,0.25]").is_err());
    }
}
