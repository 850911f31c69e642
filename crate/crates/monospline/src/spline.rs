//! Piecewise polynomials over a partition, stored per piece in local
//! coordinates `t = (x - x_i) / (x_{i+1} - x_i)`.
//!
//! Includes evaluation, smoothness-defect measurement, negation, the
//! shape-preserving C^l Hermite interpolant (the feasible competitor behind
//! the error bounds in [`crate::analysis`]), whole-spline monotonicity
//! certification, and the `{knots, order, smoothness, pieces}` JSON schema.

use crate::partition::{Partition, PartitionError};
use crate::poly::{certify_nondecreasing, CertStatus, MonotoneCertificate, Polynomial};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Absolute tolerance on continuity defects accepted when deserializing.
pub const SMOOTHNESS_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum SplineError {
    #[error("point {0} lies outside the spline domain [{1}, {2}]")]
    OutOfDomain(f64, f64, f64),
    #[error("expected {expected} pieces for {knots} knots, got {got}")]
    PieceCountMismatch {
        knots: usize,
        expected: usize,
        got: usize,
    },
    #[error("piece {index} has degree bound {got}, order allows {order}")]
    DegreeTooHigh {
        index: usize,
        got: usize,
        order: usize,
    },
    #[error("smoothness {smoothness} requires order >= {required}")]
    SmoothnessTooHigh { smoothness: usize, required: usize },
    #[error("derivative {derivative} jumps by {defect:.3e} at interior knot {knot}")]
    NotSmooth {
        derivative: usize,
        knot: usize,
        defect: f64,
    },
    #[error("interpolation data is not nondecreasing at index {index}")]
    NonMonotoneData { index: usize },
    #[error("duplicate abscissa at index {index}")]
    DuplicateAbscissa { index: usize },
    #[error("abscissae must increase (violation at index {index})")]
    AbscissaNotIncreasing { index: usize },
    #[error("need at least two interpolation points, got {0}")]
    TooFewPoints(usize),
    #[error(transparent)]
    Partition(#[from] PartitionError),
}

/// A piecewise polynomial of order `m` (degree bound per piece) over a
/// partition, intended to be C^`smoothness`.
///
/// The constructor enforces the structural invariants (piece count, degree
/// bounds, `smoothness <= order - 1`); continuity itself is asserted where
/// data enters from outside (deserialization) via [`Spline::validate_smoothness`].
#[derive(Debug, Clone, PartialEq)]
pub struct Spline {
    partition: Partition,
    pieces: Vec<Polynomial>,
    order: usize,
    smoothness: usize,
}

impl Spline {
    pub fn new(
        partition: Partition,
        pieces: Vec<Polynomial>,
        order: usize,
        smoothness: usize,
    ) -> Result<Self, SplineError> {
        let expected = partition.len() - 1;
        if pieces.len() != expected {
            return Err(SplineError::PieceCountMismatch {
                knots: partition.len(),
                expected,
                got: pieces.len(),
            });
        }
        if order < 1 || smoothness > order - 1 {
            return Err(SplineError::SmoothnessTooHigh {
                smoothness,
                required: smoothness + 1,
            });
        }
        let mut padded = Vec::with_capacity(pieces.len());
        for (index, p) in pieces.into_iter().enumerate() {
            if p.degree_bound() > order {
                return Err(SplineError::DegreeTooHigh {
                    index,
                    got: p.degree_bound(),
                    order,
                });
            }
            let mut coeffs = p.coeffs().to_vec();
            coeffs.resize(order + 1, 0.0);
            padded.push(Polynomial::new(&coeffs));
        }
        Ok(Self {
            partition,
            pieces: padded,
            order,
            smoothness,
        })
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    /// Pieces in local coordinates, one per subinterval.
    pub fn pieces(&self) -> &[Polynomial] {
        &self.pieces
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn smoothness(&self) -> usize {
        self.smoothness
    }

    pub fn a(&self) -> f64 {
        self.partition.a()
    }

    pub fn b(&self) -> f64 {
        self.partition.b()
    }

    /// Value at `x`; errors outside `[a, b]`.
    pub fn eval(&self, x: f64) -> Result<f64, SplineError> {
        let i = self
            .partition
            .locate(x)
            .ok_or(SplineError::OutOfDomain(x, self.a(), self.b()))?;
        let knots = self.partition.knots();
        let t = (x - knots[i]) / (knots[i + 1] - knots[i]);
        Ok(self.pieces[i].eval(t))
    }

    /// `j`-th derivative (with respect to `x`) at `x`.
    pub fn eval_derivative(&self, x: f64, j: usize) -> Result<f64, SplineError> {
        let i = self
            .partition
            .locate(x)
            .ok_or(SplineError::OutOfDomain(x, self.a(), self.b()))?;
        let knots = self.partition.knots();
        let h = knots[i + 1] - knots[i];
        let t = (x - knots[i]) / h;
        let mut d = self.pieces[i].clone();
        for _ in 0..j {
            d = d.derivative();
        }
        Ok(d.eval(t) / h.powi(j as i32))
    }

    /// Largest jump of the `j`-th derivative across interior knots.
    pub fn smoothness_defect(&self, j: usize) -> f64 {
        let knots = self.partition.knots();
        let mut defect = 0.0f64;
        for i in 0..self.pieces.len() - 1 {
            let h_left = knots[i + 1] - knots[i];
            let h_right = knots[i + 2] - knots[i + 1];
            let mut left = self.pieces[i].clone();
            let mut right = self.pieces[i + 1].clone();
            for _ in 0..j {
                left = left.derivative();
                right = right.derivative();
            }
            let jump = (left.eval(1.0) / h_left.powi(j as i32))
                - (right.eval(0.0) / h_right.powi(j as i32));
            defect = defect.max(jump.abs());
        }
        defect
    }

    /// Checks C^0..C^l continuity within `tol` (absolute on derivative
    /// jumps); used on deserialized data.
    pub fn validate_smoothness(&self, tol: f64) -> Result<(), SplineError> {
        for j in 0..=self.smoothness {
            let defect = self.smoothness_defect(j);
            if defect > tol {
                // Recover the worst knot for the message.
                let knots = self.partition.knots();
                let mut worst = (0, 0.0f64);
                for i in 0..self.pieces.len() - 1 {
                    let h_l = knots[i + 1] - knots[i];
                    let h_r = knots[i + 2] - knots[i + 1];
                    let mut left = self.pieces[i].clone();
                    let mut right = self.pieces[i + 1].clone();
                    for _ in 0..j {
                        left = left.derivative();
                        right = right.derivative();
                    }
                    let jump = (left.eval(1.0) / h_l.powi(j as i32))
                        - (right.eval(0.0) / h_r.powi(j as i32));
                    if jump.abs() > worst.1 {
                        worst = (i + 1, jump.abs());
                    }
                }
                return Err(SplineError::NotSmooth {
                    derivative: j,
                    knot: worst.0,
                    defect: worst.1,
                });
            }
        }
        Ok(())
    }

    /// The spline `x -> -s(x)`.
    pub fn negate(&self) -> Spline {
        Spline {
            partition: self.partition.clone(),
            pieces: self.pieces.iter().map(|p| p.scale(-1.0)).collect(),
            order: self.order,
            smoothness: self.smoothness,
        }
    }
}

/// Orientation certified for a [`MonotoneSpline`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    NonDecreasing,
    NonIncreasing,
}

/// A spline together with per-piece monotonicity certificates.
///
/// `direction` states which monotonicity the certificates establish; for
/// `NonIncreasing` they certify the negated pieces.
#[derive(Debug, Clone, PartialEq)]
pub struct MonotoneSpline {
    spline: Spline,
    certificates: Vec<MonotoneCertificate>,
    direction: Direction,
}

impl MonotoneSpline {
    pub fn spline(&self) -> &Spline {
        &self.spline
    }

    pub fn into_spline(self) -> Spline {
        self.spline
    }

    pub fn certificates(&self) -> &[MonotoneCertificate] {
        &self.certificates
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    pub fn eval(&self, x: f64) -> Result<f64, SplineError> {
        self.spline.eval(x)
    }

    /// Mirrors the certified orientation: the negated spline with flipped
    /// direction, certificates carried over.
    pub fn negate(&self) -> MonotoneSpline {
        MonotoneSpline {
            spline: self.spline.negate(),
            certificates: self.certificates.clone(),
            direction: match self.direction {
                Direction::NonDecreasing => Direction::NonIncreasing,
                Direction::NonIncreasing => Direction::NonDecreasing,
            },
        }
    }
}

impl Serialize for MonotoneSpline {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.spline.serialize(serializer)
    }
}

/// Outcome of certifying a whole spline as nondecreasing.
#[derive(Debug, Clone)]
pub enum SplineMonotonicity {
    Certified(MonotoneSpline),
    /// Some piece's derivative is provably negative at the witness (given
    /// in global coordinates).
    Refuted {
        piece: usize,
        witness: f64,
    },
    /// A piece could be neither certified nor refuted within the budget.
    Undecided {
        piece: usize,
    },
}

/// Certifies each piece nondecreasing on its subinterval (equivalently, the
/// local polynomial on [0, 1] since subinterval widths are positive).
pub fn certify_spline_monotone(s: &Spline, elevation_budget: usize) -> SplineMonotonicity {
    let mut certificates = Vec::with_capacity(s.pieces.len());
    for (i, piece) in s.pieces.iter().enumerate() {
        let cert = certify_nondecreasing(piece, (0.0, 1.0), elevation_budget)
            .expect("local interval (0, 1) is nondegenerate");
        match cert.status {
            CertStatus::Refuted { witness } => {
                let knots = s.partition.knots();
                let x = knots[i] + (knots[i + 1] - knots[i]) * witness;
                return SplineMonotonicity::Refuted {
                    piece: i,
                    witness: x,
                };
            }
            CertStatus::Unknown => return SplineMonotonicity::Undecided { piece: i },
            _ => certificates.push(cert),
        }
    }
    SplineMonotonicity::Certified(MonotoneSpline {
        spline: s.clone(),
        certificates,
        direction: Direction::NonDecreasing,
    })
}

/// Shape-preserving C^l Hermite interpolant through nondecreasing data.
///
/// On each data interval the piece matches the end values and has vanishing
/// derivatives 1..=l at both ends, using the minimal order `2l + 1`:
/// `p_i(t) = y_i + (y_{i+1} - y_i) H_l(t)` with
/// `H_l(t) = int_0^t u^l (1-u)^l du / B(l+1, l+1)`. `H_l' >= 0`, so each
/// piece is monotone between its data values — the interpolant never
/// overshoots, and `|P(x) - f(x)| <= max_i (y_{i+1} - y_i)` for any `f`
/// sharing the data. `l = 0` is the broken line; `l = 1` the smoothstep
/// kernel `3t^2 - 2t^3`.
pub fn monotone_interpolant(
    points: &[(f64, f64)],
    l: usize,
) -> Result<MonotoneSpline, SplineError> {
    if points.len() < 2 {
        return Err(SplineError::TooFewPoints(points.len()));
    }
    for i in 1..points.len() {
        if points[i].0 == points[i - 1].0 {
            return Err(SplineError::DuplicateAbscissa { index: i });
        }
        if points[i].0 < points[i - 1].0 {
            return Err(SplineError::AbscissaNotIncreasing { index: i });
        }
        if points[i].1 < points[i - 1].1 {
            return Err(SplineError::NonMonotoneData { index: i });
        }
    }
    let kernel = hermite_kernel(l);
    let order = 2 * l + 1;
    let partition = Partition::from_knots(points.iter().map(|p| p.0).collect())?;
    let mut pieces = Vec::with_capacity(points.len() - 1);
    let mut certificates = Vec::with_capacity(points.len() - 1);
    for w in points.windows(2) {
        let (y0, y1) = (w[0].1, w[1].1);
        let mut coeffs = kernel.scale(y1 - y0).coeffs().to_vec();
        coeffs[0] = y0;
        let piece = Polynomial::new(&coeffs);
        let cert = certify_nondecreasing(&piece, (0.0, 1.0), 0)
            .expect("local interval (0, 1) is nondegenerate");
        debug_assert!(
            cert.is_certified(),
            "kernel derivative has nonnegative Bernstein coefficients"
        );
        certificates.push(cert);
        pieces.push(piece);
    }
    let spline = Spline::new(partition, pieces, order, l)?;
    Ok(MonotoneSpline {
        spline,
        certificates,
        direction: Direction::NonDecreasing,
    })
}

/// Monomial coefficients of `H_l` (degree `2l + 1`, maps 0 -> 0, 1 -> 1,
/// derivatives 1..=l vanish at both ends).
fn hermite_kernel(l: usize) -> Polynomial {
    // Integrand u^l (1-u)^l expanded, then integrated term by term.
    let mut coeffs = vec![0.0; 2 * l + 2];
    for k in 0..=l {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        coeffs[l + k + 1] = sign * binomial_f(l, k) / (l + k + 1) as f64;
    }
    let norm: f64 = coeffs.iter().sum();
    Polynomial::new(&coeffs).scale(1.0 / norm)
}

fn binomial_f(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    let mut r = 1.0;
    for i in 0..k {
        r = r * (n - i) as f64 / (i + 1) as f64;
    }
    r
}

#[derive(Serialize, Deserialize)]
struct SplineRepr {
    knots: Vec<f64>,
    order: usize,
    smoothness: usize,
    pieces: Vec<Vec<f64>>,
}

impl Serialize for Spline {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        SplineRepr {
            knots: self.partition.knots().to_vec(),
            order: self.order,
            smoothness: self.smoothness,
            pieces: self.pieces.iter().map(|p| p.coeffs().to_vec()).collect(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Spline {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let repr = SplineRepr::deserialize(deserializer)?;
        let partition = Partition::from_knots(repr.knots).map_err(serde::de::Error::custom)?;
        let pieces = repr.pieces.iter().map(|c| Polynomial::new(c)).collect();
        let spline = Spline::new(partition, pieces, repr.order, repr.smoothness)
            .map_err(serde::de::Error::custom)?;
        spline
            .validate_smoothness(SMOOTHNESS_TOL)
            .map_err(serde::de::Error::custom)?;
        Ok(spline)
    }
}

/// Largest gap `max_i (y_{i+1} - y_i)` of interpolation data; the envelope
/// bound for any interpolant that is monotone between data values.
pub fn data_gap(points: &[(f64, f64)]) -> f64 {
    points
        .windows(2)
        .map(|w| w[1].1 - w[0].1)
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn line_data() -> Vec<(f64, f64)> {
        vec![(0.0, 0.0), (0.5, 0.2), (1.0, 1.0)]
    }

    #[test]
    fn broken_line_interpolant() {
        let p = monotone_interpolant(&line_data(), 0).unwrap();
        assert_eq!(p.spline().order(), 1);
        assert_relative_eq!(p.eval(0.25).unwrap(), 0.1, max_relative = 1e-15);
        assert_relative_eq!(p.eval(0.75).unwrap(), 0.6, max_relative = 1e-15);
        assert!(p.certificates().iter().all(|c| c.is_certified()));
    }

    #[test]
    fn smoothstep_kernel_frozen() {
        // l = 1 on the unit square must be exactly 3t^2 - 2t^3.
        let p = monotone_interpolant(&[(0.0, 0.0), (1.0, 1.0)], 1).unwrap();
        let coeffs = p.spline().pieces()[0].coeffs();
        assert_relative_eq!(coeffs[0], 0.0, epsilon = 1e-15);
        assert_relative_eq!(coeffs[1], 0.0, epsilon = 1e-15);
        assert_relative_eq!(coeffs[2], 3.0, max_relative = 1e-14);
        assert_relative_eq!(coeffs[3], -2.0, max_relative = 1e-14);
    }

    #[test]
    fn hermite_kernel_boundary_conditions() {
        for l in 0..=3 {
            let k = hermite_kernel(l);
            assert_relative_eq!(k.eval(0.0), 0.0, epsilon = 1e-14);
            assert_relative_eq!(k.eval(1.0), 1.0, max_relative = 1e-13);
            let mut d = k;
            for _ in 1..=l {
                d = d.derivative();
                assert_relative_eq!(d.eval(0.0), 0.0, epsilon = 1e-12);
                assert_relative_eq!(d.eval(1.0), 0.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn interpolant_smoothness_matches_l() {
        let data = vec![(0.0, 0.0), (0.3, 0.1), (0.7, 0.9), (1.0, 1.0)];
        let broken = monotone_interpolant(&data, 0).unwrap();
        assert!(broken.spline().smoothness_defect(0) < 1e-12);
        assert!(broken.spline().smoothness_defect(1) > 0.1); // slopes jump

        let smooth = monotone_interpolant(&data, 1).unwrap();
        assert!(smooth.spline().smoothness_defect(0) < 1e-12);
        assert!(smooth.spline().smoothness_defect(1) < 1e-12);

        let smoother = monotone_interpolant(&data, 2).unwrap();
        for j in 0..=2 {
            assert!(smoother.spline().smoothness_defect(j) < 1e-10);
        }
    }

    #[test]
    fn interpolant_rejects_bad_data() {
        assert!(matches!(
            monotone_interpolant(&[(0.0, 0.0)], 0),
            Err(SplineError::TooFewPoints(1))
        ));
        assert!(matches!(
            monotone_interpolant(&[(0.0, 0.0), (0.0, 1.0)], 0),
            Err(SplineError::DuplicateAbscissa { index: 1 })
        ));
        assert!(matches!(
            monotone_interpolant(&[(0.0, 0.0), (1.0, 1.0), (0.5, 2.0)], 0),
            Err(SplineError::AbscissaNotIncreasing { index: 2 })
        ));
        assert!(matches!(
            monotone_interpolant(&[(0.0, 1.0), (1.0, 0.0)], 0),
            Err(SplineError::NonMonotoneData { index: 1 })
        ));
    }

    #[test]
    fn interpolant_stays_within_data_envelope() {
        // Monotone pieces between data values imply |P - broken line| is at
        // most the largest data gap.
        let data = vec![(0.0, 0.0), (0.2, 0.05), (0.5, 0.75), (1.0, 1.0)];
        let p = monotone_interpolant(&data, 2).unwrap();
        let broken = monotone_interpolant(&data, 0).unwrap();
        let gap = data_gap(&data);
        for i in 0..=1000 {
            let x = i as f64 / 1000.0;
            let diff = (p.eval(x).unwrap() - broken.eval(x).unwrap()).abs();
            assert!(
                diff <= gap + 1e-12,
                "envelope violated at {x}: {diff} > {gap}"
            );
        }
    }

    #[test]
    fn eval_out_of_domain_errors() {
        let p = monotone_interpolant(&line_data(), 0).unwrap();
        assert!(matches!(p.eval(1.5), Err(SplineError::OutOfDomain(..))));
        assert!(matches!(p.eval(-0.5), Err(SplineError::OutOfDomain(..))));
    }

    #[test]
    fn negation_flips_values_and_direction() {
        let p = monotone_interpolant(&line_data(), 1).unwrap();
        let n = p.negate();
        assert_eq!(n.direction(), Direction::NonIncreasing);
        for i in 0..=20 {
            let x = i as f64 / 20.0;
            assert_relative_eq!(n.eval(x).unwrap(), -p.eval(x).unwrap(), epsilon = 1e-15);
        }
    }

    #[test]
    fn certify_refutes_a_dipping_piece() {
        let partition = Partition::uniform(0.0, 1.0, 3).unwrap();
        let pieces = vec![
            Polynomial::new(&[0.0, 1.0]),
            Polynomial::new(&[1.0, -0.5]), // decreasing second piece
        ];
        let s = Spline::new(partition, pieces, 1, 0).unwrap();
        match certify_spline_monotone(&s, 6) {
            SplineMonotonicity::Refuted { piece, witness } => {
                assert_eq!(piece, 1);
                assert!((0.5..=1.0).contains(&witness));
                assert!(s.eval_derivative(witness, 1).unwrap() < 0.0);
            }
            other => panic!("expected refutation, got {other:?}"),
        }
    }

    #[test]
    fn json_schema_and_validation() {
        let p = monotone_interpolant(&line_data(), 1).unwrap();
        let json = serde_json::to_value(p.spline()).unwrap();
        let obj = json.as_object().unwrap();
        for key in ["knots", "order", "smoothness", "pieces"] {
            assert!(obj.contains_key(key), "missing key {key}");
        }
        let back: Spline = serde_json::from_value(json).unwrap();
        assert_eq!(&back, p.spline());

        // A value-discontinuous spline must be rejected on the way in.
        let bad = serde_json::json!({
            "knots": [0.0, 0.5, 1.0],
            "order": 1,
            "smoothness": 0,
            "pieces": [[0.0, 1.0], [5.0, 1.0]],
        });
        let err = serde_json::from_value::<Spline>(bad)
            .unwrap_err()
            .to_string();
        assert!(err.contains("jumps"), "unexpected error: {err}");
    }

    #[test]
    fn structural_invariants_enforced() {
        let partition = Partition::uniform(0.0, 1.0, 3).unwrap();
        assert!(matches!(
            Spline::new(partition.clone(), vec![Polynomial::new(&[0.0])], 1, 0),
            Err(SplineError::PieceCountMismatch { .. })
        ));
        let cubic = vec![Polynomial::new(&[0.0, 0.0, 0.0, 1.0]); 2];
        assert!(matches!(
            Spline::new(partition.clone(), cubic, 2, 0),
            Err(SplineError::DegreeTooHigh { .. })
        ));
        let lines = vec![Polynomial::new(&[0.0, 1.0]); 2];
        assert!(matches!(
            Spline::new(partition, lines, 1, 1),
            Err(SplineError::SmoothnessTooHigh { .. })
        ));
    }
}
