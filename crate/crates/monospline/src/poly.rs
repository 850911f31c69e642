//! Polynomials in the monomial basis, Bernstein-basis views on an interval,
//! monotonicity certificates, and two Markov-type inequality checks.
//!
//! The monomial basis is the source of truth everywhere in this crate;
//! Bernstein views are derived on demand (certificates, cone constraints)
//! and converted back only in tests.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default tolerance attached to monotonicity certificates: a certificate
/// asserts the derivative is `>= -tolerance` wherever it claims control.
pub const DEFAULT_CERT_TOLERANCE: f64 = 1e-9;

/// Uniform probe count used by certificate fallbacks and agreement checks.
pub const PROBE_POINTS: usize = 1001;

/// Grid density used to locate polynomial extrema before local refinement.
pub const EXTREMUM_GRID: usize = 10_001;

/// Absolute slack below which the Markov-type lemma check reports failure.
pub const LEMMA_SLACK_TOL: f64 = 1e-9;

/// Relative slack allowed by the classical Markov inequality check.
pub const MARKOV_REL_TOL: f64 = 1e-6;

#[derive(Debug, Error, PartialEq)]
pub enum PolyError {
    #[error("degenerate interval: left endpoint {0} must be strictly below right endpoint {1}")]
    DegenerateInterval(f64, f64),
    #[error("polynomial is not nondecreasing on the interval (derivative {deriv:.3e} at x = {witness:.6})")]
    NotMonotone { witness: f64, deriv: f64 },
}

/// Dense polynomial `c0 + c1 x + ... + cm x^m` stored by ascending degree.
///
/// `coeffs.len()` is always `degree_bound + 1`; trailing zeros are legal and
/// meaningful (the *bound* drives Markov-type checks, not the exact degree).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polynomial {
    coeffs: Vec<f64>,
}

impl Polynomial {
    /// Builds a polynomial from ascending monomial coefficients.
    /// An empty slice is the zero polynomial of degree bound 0.
    pub fn new(coeffs: &[f64]) -> Self {
        if coeffs.is_empty() {
            Self { coeffs: vec![0.0] }
        } else {
            Self {
                coeffs: coeffs.to_vec(),
            }
        }
    }

    /// Zero polynomial with the given degree bound.
    pub fn zero(degree_bound: usize) -> Self {
        Self {
            coeffs: vec![0.0; degree_bound + 1],
        }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn degree_bound(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// Exact degree after trimming trailing zero coefficients.
    pub fn degree(&self) -> usize {
        self.coeffs.iter().rposition(|&c| c != 0.0).unwrap_or(0)
    }

    /// Horner evaluation.
    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    /// Derivative; the degree bound drops by one (never below zero).
    pub fn derivative(&self) -> Polynomial {
        if self.coeffs.len() == 1 {
            return Polynomial::new(&[0.0]);
        }
        let coeffs: Vec<f64> = self
            .coeffs
            .iter()
            .enumerate()
            .skip(1)
            .map(|(j, &c)| j as f64 * c)
            .collect();
        Polynomial { coeffs }
    }

    /// Antiderivative with the given constant term.
    pub fn antiderivative(&self, constant: f64) -> Polynomial {
        let mut coeffs = Vec::with_capacity(self.coeffs.len() + 1);
        coeffs.push(constant);
        for (j, &c) in self.coeffs.iter().enumerate() {
            coeffs.push(c / (j + 1) as f64);
        }
        Polynomial { coeffs }
    }

    /// Coefficient-wise sum; the degree bound is the larger of the two.
    pub fn add(&self, other: &Polynomial) -> Polynomial {
        let n = self.coeffs.len().max(other.coeffs.len());
        let mut coeffs = vec![0.0; n];
        for (i, c) in coeffs.iter_mut().enumerate() {
            *c = self.coeffs.get(i).copied().unwrap_or(0.0)
                + other.coeffs.get(i).copied().unwrap_or(0.0);
        }
        Polynomial { coeffs }
    }

    /// Product of two polynomials.
    pub fn multiply(&self, other: &Polynomial) -> Polynomial {
        let mut coeffs = vec![0.0; self.coeffs.len() + other.coeffs.len() - 1];
        for (i, &a) in self.coeffs.iter().enumerate() {
            for (j, &b) in other.coeffs.iter().enumerate() {
                coeffs[i + j] += a * b;
            }
        }
        Polynomial { coeffs }
    }

    /// Scales every coefficient.
    pub fn scale(&self, c: f64) -> Polynomial {
        Polynomial {
            coeffs: self.coeffs.iter().map(|&a| a * c).collect(),
        }
    }

    /// Composition with an affine map: returns `q(t) = p(shift + scale * t)`.
    pub fn compose_affine(&self, shift: f64, scale: f64) -> Polynomial {
        let n = self.coeffs.len();
        let mut q = vec![0.0; n];
        for j in 0..n {
            let cj = self.coeffs[j];
            if cj == 0.0 {
                continue;
            }
            for (k, qk) in q.iter_mut().enumerate().take(j + 1) {
                *qk += cj * binomial(j, k) * shift.powi((j - k) as i32) * scale.powi(k as i32);
            }
        }
        Polynomial { coeffs: q }
    }
}

/// Bernstein-basis representation of a polynomial over `[a, b]`:
/// `p(x) = sum_i coeffs[i] * B_{i,n}(t)` with `t = (x - a) / (b - a)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BernsteinView {
    pub interval: (f64, f64),
    pub coeffs: Vec<f64>,
}

impl BernsteinView {
    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// De Casteljau evaluation at a point of the interval.
    pub fn eval(&self, x: f64) -> f64 {
        let (a, b) = self.interval;
        let t = (x - a) / (b - a);
        let mut beta = self.coeffs.clone();
        for r in 1..beta.len() {
            for i in 0..beta.len() - r {
                beta[i] = beta[i] * (1.0 - t) + beta[i + 1] * t;
            }
        }
        beta[0]
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    let mut r = 1.0;
    for i in 0..k {
        r = r * (n - i) as f64 / (i + 1) as f64;
    }
    r
}

/// Converts a monomial-basis polynomial to its Bernstein coefficients on
/// `[a, b]`. The Bernstein degree equals the polynomial's degree bound.
pub fn to_bernstein(p: &Polynomial, interval: (f64, f64)) -> Result<BernsteinView, PolyError> {
    let (a, b) = interval;
    if !(b > a) {
        return Err(PolyError::DegenerateInterval(a, b));
    }
    // Local monomial coefficients: q(t) = p(a + (b - a) t) on t in [0, 1].
    let q = p.compose_affine(a, b - a);
    let n = q.degree_bound();
    let mut coeffs = vec![0.0; n + 1];
    for (i, c) in coeffs.iter_mut().enumerate() {
        for (j, &qj) in q.coeffs().iter().enumerate().take(i + 1) {
            *c += binomial(i, j) / binomial(n, j) * qj;
        }
    }
    Ok(BernsteinView { interval, coeffs })
}

/// Inverse of [`to_bernstein`]: recovers monomial coefficients in the
/// original variable.
pub fn from_bernstein(view: &BernsteinView) -> Polynomial {
    let n = view.degree();
    // Monomial coefficients in the local variable t.
    let mut q = vec![0.0; n + 1];
    for (k, c) in q.iter_mut().enumerate() {
        for (i, &bi) in view.coeffs.iter().enumerate().take(k + 1) {
            let sign = if (k - i) % 2 == 0 { 1.0 } else { -1.0 };
            *c += bi * binomial(n, i) * binomial(n - i, k - i) * sign;
        }
    }
    // Substitute t = (x - a) / (b - a).
    let (a, b) = view.interval;
    let h = b - a;
    Polynomial::new(&q).compose_affine(-a / h, 1.0 / h)
}

/// Raises the Bernstein degree by `r` without changing the polynomial.
pub fn degree_elevate(view: &BernsteinView, r: usize) -> BernsteinView {
    let mut coeffs = view.coeffs.clone();
    for _ in 0..r {
        let n = coeffs.len(); // old degree + 1
        let mut next = vec![0.0; n + 1];
        next[0] = coeffs[0];
        next[n] = coeffs[n - 1];
        for i in 1..n {
            let w = i as f64 / n as f64;
            next[i] = w * coeffs[i - 1] + (1.0 - w) * coeffs[i];
        }
        coeffs = next;
    }
    BernsteinView {
        interval: view.interval,
        coeffs,
    }
}

/// Outcome of a monotonicity certification attempt.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum CertStatus {
    /// The derivative's sign was analysed in closed form (degree <= 2).
    CertifiedExact,
    /// Bernstein coefficients of the derivative became nonnegative (up to
    /// tolerance) after `elevation` degree elevations.
    CertifiedSufficient { elevation: usize },
    /// The derivative is provably below `-tolerance` at the witness point.
    Refuted { witness: f64 },
    /// Neither certified within the elevation budget nor refuted by probing.
    Unknown,
}

/// A monotonicity certificate: `status` plus the tolerance it was issued at.
///
/// Certified statuses guarantee the derivative is `>= -tolerance` everywhere
/// on the certified interval; `Refuted` guarantees it is `< -tolerance` at
/// the witness.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonotoneCertificate {
    pub status: CertStatus,
    pub tolerance: f64,
}

impl MonotoneCertificate {
    pub fn is_certified(&self) -> bool {
        matches!(
            self.status,
            CertStatus::CertifiedExact | CertStatus::CertifiedSufficient { .. }
        )
    }
}

/// Certifies that `p` is nondecreasing on the interval, with the default
/// certificate tolerance.
///
/// Derivative degree <= 2 is decided exactly (endpoint/vertex analysis);
/// higher degrees try Bernstein-coefficient nonnegativity with up to
/// `elevation_budget` degree elevations, then fall back to a uniform probe
/// that can only refute or report `Unknown`.
pub fn certify_nondecreasing(
    p: &Polynomial,
    interval: (f64, f64),
    elevation_budget: usize,
) -> Result<MonotoneCertificate, PolyError> {
    certify_nondecreasing_with_tolerance(p, interval, elevation_budget, DEFAULT_CERT_TOLERANCE)
}

/// As [`certify_nondecreasing`] with an explicit tolerance.
pub fn certify_nondecreasing_with_tolerance(
    p: &Polynomial,
    interval: (f64, f64),
    elevation_budget: usize,
    tolerance: f64,
) -> Result<MonotoneCertificate, PolyError> {
    let (a, b) = interval;
    if !(b > a) {
        return Err(PolyError::DegenerateInterval(a, b));
    }
    let d = p.derivative();
    let deg = d.degree();
    let made = |status| MonotoneCertificate { status, tolerance };

    if deg <= 2 {
        // Closed-form minimum of the derivative over [a, b].
        let mut candidates = vec![a, b];
        if deg == 2 {
            let c = d.coeffs();
            let vertex = -c[1] / (2.0 * c[2]);
            if vertex > a && vertex < b {
                candidates.push(vertex);
            }
        }
        let (witness, min) = candidates
            .iter()
            .map(|&x| (x, d.eval(x)))
            .min_by(|u, v| u.1.total_cmp(&v.1))
            .unwrap();
        return Ok(if min >= -tolerance {
            made(CertStatus::CertifiedExact)
        } else {
            made(CertStatus::Refuted { witness })
        });
    }

    // Bernstein sufficient condition with elevation. Coefficients
    // >= -tolerance imply the derivative >= -tolerance pointwise because
    // the Bernstein basis is a nonnegative partition of unity.
    let mut view = to_bernstein(&d, interval)?;
    for r in 0..=elevation_budget {
        if view.coeffs.iter().all(|&c| c >= -tolerance) {
            return Ok(made(CertStatus::CertifiedSufficient { elevation: r }));
        }
        view = degree_elevate(&view, 1);
    }

    // Probe fallback: can refute, never certify.
    let step = (b - a) / (PROBE_POINTS - 1) as f64;
    let (witness, min) = (0..PROBE_POINTS)
        .map(|i| {
            let x = a + step * i as f64;
            (x, d.eval(x))
        })
        .min_by(|u, v| u.1.total_cmp(&v.1))
        .unwrap();
    Ok(if min < -tolerance {
        made(CertStatus::Refuted { witness })
    } else {
        made(CertStatus::Unknown)
    })
}

/// Result of the Markov-type lemma check for nondecreasing polynomials.
///
/// For `P` nondecreasing of degree at most `m` on `[a, b]`, the point
/// `x1 = a + (b - a) / (2 m^2 + 1)` satisfies
/// `P(x1) <= P(a) + (2 m^2 / (2 m^2 + 1)) (P(b) - P(a))`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct MarkovLemmaCheck {
    pub holds: bool,
    pub lhs: f64,
    pub rhs: f64,
}

impl MarkovLemmaCheck {
    /// Nonnegative when the inequality holds: `rhs - lhs`.
    pub fn slack(&self) -> f64 {
        self.rhs - self.lhs
    }
}

/// Evaluates the Markov-type lemma for a certified-nondecreasing `p` with
/// `m = p.degree_bound()`. Errors when certification refutes monotonicity.
pub fn check_markov_lemma(
    p: &Polynomial,
    interval: (f64, f64),
) -> Result<MarkovLemmaCheck, PolyError> {
    let cert = certify_nondecreasing(p, interval, 6)?;
    if let CertStatus::Refuted { witness } = cert.status {
        return Err(PolyError::NotMonotone {
            witness,
            deriv: p.derivative().eval(witness),
        });
    }
    let (a, b) = interval;
    let m = p.degree_bound() as f64;
    let denom = 2.0 * m * m + 1.0;
    let lhs = p.eval(a + (b - a) / denom);
    let rhs = p.eval(a) + (2.0 * m * m / denom) * (p.eval(b) - p.eval(a));
    Ok(MarkovLemmaCheck {
        holds: rhs - lhs >= -LEMMA_SLACK_TOL,
        lhs,
        rhs,
    })
}

/// Result of the classical Markov inequality check on `[-1, 1]`:
/// `max |Q'| <= m^2 max |Q|` for degree bound `m`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct MarkovInequalityCheck {
    pub holds: bool,
    /// `max |Q'| / (m^2 max |Q|)`; 1 is the extremal (Chebyshev) case.
    pub ratio: f64,
}

/// Checks the classical Markov inequality for `p` on `[-1, 1]`, locating
/// both extrema on a dense grid with golden-section refinement.
pub fn check_markov_inequality(p: &Polynomial) -> MarkovInequalityCheck {
    let m = p.degree_bound() as f64;
    if p.degree_bound() == 0 {
        return MarkovInequalityCheck {
            holds: true,
            ratio: 0.0,
        };
    }
    let d = p.derivative();
    let (_, max_p) = max_abs_on(|x| p.eval(x), -1.0, 1.0, EXTREMUM_GRID);
    let (_, max_d) = max_abs_on(|x| d.eval(x), -1.0, 1.0, EXTREMUM_GRID);
    if max_p <= f64::MIN_POSITIVE {
        return MarkovInequalityCheck {
            holds: max_d <= f64::MIN_POSITIVE,
            ratio: 0.0,
        };
    }
    let ratio = max_d / (m * m * max_p);
    MarkovInequalityCheck {
        holds: ratio <= 1.0 + MARKOV_REL_TOL,
        ratio,
    }
}

/// Maximizes `|f|` over `[lo, hi]`: dense grid scan followed by
/// golden-section refinement in the bracketing cell. Returns `(x, |f(x)|)`.
pub(crate) fn max_abs_on(f: impl Fn(f64) -> f64, lo: f64, hi: f64, grid: usize) -> (f64, f64) {
    let step = (hi - lo) / (grid - 1) as f64;
    let mut best_i = 0;
    let mut best = f64::NEG_INFINITY;
    for i in 0..grid {
        let v = f(lo + step * i as f64).abs();
        if v > best {
            best = v;
            best_i = i;
        }
    }
    let left = lo + step * best_i.saturating_sub(1) as f64;
    let right = (lo + step * (best_i + 1) as f64).min(hi);
    golden_max(|x| f(x).abs(), left, right)
}

/// Golden-section search for the maximum of `g` on `[a, b]`.
fn golden_max(g: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut gc, mut gd) = (g(c), g(d));
    for _ in 0..80 {
        if gc > gd {
            b = d;
            d = c;
            gd = gc;
            c = b - INV_PHI * (b - a);
            gc = g(c);
        } else {
            a = c;
            c = d;
            gc = gd;
            d = a + INV_PHI * (b - a);
            gd = g(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, g(x))
}

/// Draws a structurally nondecreasing polynomial with degree bound `m >= 1`:
/// the antiderivative of `u^2 + v^2` for random `u`, `v` of degree
/// `(m - 1) / 2`, plus a random constant.
pub fn random_nondecreasing(m: usize, rng: &mut impl Rng) -> Polynomial {
    assert!(m >= 1, "degree bound must be at least 1");
    let half = (m - 1) / 2;
    let draw = |rng: &mut dyn rand::RngCore| {
        let coeffs: Vec<f64> = (0..=half).map(|_| rng.gen_range(-1.0..1.0)).collect();
        Polynomial::new(&coeffs)
    };
    let u = draw(rng);
    let v = draw(rng);
    let d = u.multiply(&u).add(&v.multiply(&v));
    let mut p = d.antiderivative(rng.gen_range(-1.0..1.0));
    // Pad so the degree bound is exactly m (the construction can fall short
    // by one for even m).
    let mut coeffs = p.coeffs().to_vec();
    coeffs.resize(m + 1, 0.0);
    p = Polynomial::new(&coeffs);
    p
}

/// Aggregate result of a randomized Markov-type lemma sweep at one degree.
#[derive(Debug, Clone, Serialize)]
pub struct LemmaSuiteReport {
    pub degree_bound: usize,
    pub count: usize,
    pub violations: usize,
    /// Smallest absolute slack `rhs - lhs` observed.
    pub min_slack: f64,
    /// Smallest slack relative to the range `P(b) - P(a)`.
    pub min_relative_slack: f64,
    /// Polynomial attaining `min_slack` (ascending coefficients) and the
    /// interval it was checked on — the offender when a violation occurs.
    pub extremal: Option<(Polynomial, (f64, f64))>,
}

/// Runs `count` random Markov-type lemma checks at degree bound `m` on
/// random intervals, deterministically from `seed`.
pub fn run_markov_lemma_suite(m: usize, count: usize, seed: u64) -> LemmaSuiteReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = LemmaSuiteReport {
        degree_bound: m,
        count,
        violations: 0,
        min_slack: f64::INFINITY,
        min_relative_slack: f64::INFINITY,
        extremal: None,
    };
    for _ in 0..count {
        let a = rng.gen_range(-2.0..2.0);
        let b = a + rng.gen_range(0.5..2.5);
        let p = random_nondecreasing(m, &mut rng);
        let check = check_markov_lemma(&p, (a, b))
            .expect("structurally nondecreasing polynomial cannot be refuted");
        let slack = check.slack();
        if !check.holds {
            report.violations += 1;
        }
        if slack < report.min_slack {
            report.min_slack = slack;
            report.extremal = Some((p.clone(), (a, b)));
        }
        let range = p.eval(b) - p.eval(a);
        if range > 1e-12 {
            report.min_relative_slack = report.min_relative_slack.min(slack / range);
        }
    }
    report
}

/// Aggregate result of a randomized classical-Markov sweep.
#[derive(Debug, Clone, Serialize)]
pub struct InequalitySuiteReport {
    pub count: usize,
    pub violations: usize,
    /// Largest `max |Q'| / (m^2 max |Q|)` observed (1 is extremal).
    pub max_ratio: f64,
    /// Polynomial attaining `max_ratio` — the offender when a violation
    /// occurs.
    pub extremal: Option<Polynomial>,
}

/// Runs `count` classical Markov inequality checks on random polynomials of
/// degree bound 1..=5 with coefficients in [-1, 1], deterministically.
pub fn run_markov_inequality_suite(count: usize, seed: u64) -> InequalitySuiteReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = InequalitySuiteReport {
        count,
        violations: 0,
        max_ratio: 0.0,
        extremal: None,
    };
    for _ in 0..count {
        let deg = rng.gen_range(1..=5usize);
        let coeffs: Vec<f64> = (0..=deg).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let p = Polynomial::new(&coeffs);
        let check = check_markov_inequality(&p);
        if !check.holds {
            report.violations += 1;
        }
        if check.ratio > report.max_ratio {
            report.max_ratio = check.ratio;
            report.extremal = Some(p);
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn bernstein_of_square_has_zero_middle_coefficient() {
        // Hand derivation on [0, 1]: b0 = p(0) = 0, b2 = p(1) = 1, and the
        // endpoint-derivative condition 2 (b1 - b0) = p'(0) = 0 gives b1 = 0.
        let p = Polynomial::new(&[0.0, 0.0, 1.0]);
        let view = to_bernstein(&p, (0.0, 1.0)).unwrap();
        assert_eq!(view.coeffs.len(), 3);
        assert_relative_eq!(view.coeffs[0], 0.0, epsilon = 1e-15);
        assert_relative_eq!(view.coeffs[1], 0.0, epsilon = 1e-15);
        assert_relative_eq!(view.coeffs[2], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn bernstein_rejects_degenerate_interval() {
        let p = Polynomial::new(&[1.0, 2.0]);
        assert_eq!(
            to_bernstein(&p, (1.0, 1.0)).unwrap_err(),
            PolyError::DegenerateInterval(1.0, 1.0)
        );
    }

    #[test]
    fn bernstein_roundtrip_on_shifted_interval() {
        let p = Polynomial::new(&[0.5, -1.25, 0.0, 2.0]);
        let view = to_bernstein(&p, (-1.0, 2.0)).unwrap();
        let q = from_bernstein(&view);
        for (a, b) in p.coeffs().iter().zip(q.coeffs()) {
            assert_relative_eq!(a, b, epsilon = 1e-13, max_relative = 1e-13);
        }
    }

    #[test]
    fn de_casteljau_matches_monomial_evaluation() {
        let p = Polynomial::new(&[1.0, -2.0, 0.5, 3.0, -0.25]);
        let view = to_bernstein(&p, (-0.5, 1.75)).unwrap();
        for i in 0..=100 {
            let x = -0.5 + 2.25 * i as f64 / 100.0;
            assert_relative_eq!(
                view.eval(x),
                p.eval(x),
                epsilon = 1e-11,
                max_relative = 1e-11
            );
        }
    }

    #[test]
    fn elevation_preserves_values() {
        let p = Polynomial::new(&[0.3, 1.0, -0.7, 0.2]);
        let view = to_bernstein(&p, (0.0, 1.0)).unwrap();
        let up = degree_elevate(&view, 4);
        assert_eq!(up.degree(), 7);
        for i in 0..=100 {
            let x = i as f64 / 100.0;
            assert_relative_eq!(up.eval(x), p.eval(x), epsilon = 1e-12, max_relative = 1e-12);
        }
    }

    #[test]
    fn lemma_frozen_case_cubic() {
        // P = x^3 on [0, 1], m = 3: x1 = 1/19, lhs = (1/19)^3, rhs = 18/19.
        let p = Polynomial::new(&[0.0, 0.0, 0.0, 1.0]);
        let check = check_markov_lemma(&p, (0.0, 1.0)).unwrap();
        assert!(check.holds);
        assert_relative_eq!(check.lhs, (1.0f64 / 19.0).powi(3), max_relative = 1e-13);
        assert_relative_eq!(check.rhs, 18.0 / 19.0, max_relative = 1e-13);
    }

    #[test]
    fn lemma_linear_family_has_one_third_relative_slack() {
        // For linear P, lhs sits 1/3 of the range above P(a) while rhs sits
        // 2/3 up, so slack / range = 1/3 exactly.
        let p = Polynomial::new(&[-0.4, 2.5]);
        let check = check_markov_lemma(&p, (-1.0, 3.0)).unwrap();
        let range = p.eval(3.0) - p.eval(-1.0);
        assert_relative_eq!(check.slack() / range, 1.0 / 3.0, max_relative = 1e-12);
    }

    #[test]
    fn lemma_rejects_decreasing_input() {
        let p = Polynomial::new(&[0.0, -1.0]);
        assert!(matches!(
            check_markov_lemma(&p, (0.0, 1.0)),
            Err(PolyError::NotMonotone { .. })
        ));
    }

    #[test]
    fn markov_equality_for_chebyshev_t2() {
        // T2 = 2x^2 - 1 attains the classical Markov bound: max |T2'| = 4,
        // m^2 max |T2| = 4.
        let t2 = Polynomial::new(&[-1.0, 0.0, 2.0]);
        let check = check_markov_inequality(&t2);
        assert!(check.holds);
        assert_relative_eq!(check.ratio, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn certify_exact_for_low_degree() {
        // (x^3)' = 3x^2 has a vertex minimum of exactly 0 inside [-1, 1].
        let p = Polynomial::new(&[0.0, 0.0, 0.0, 1.0]);
        let cert = certify_nondecreasing(&p, (-1.0, 1.0), 6).unwrap();
        assert_eq!(cert.status, CertStatus::CertifiedExact);
    }

    #[test]
    fn certify_refutes_decreasing_line() {
        let p = Polynomial::new(&[1.0, -1.0]);
        let cert = certify_nondecreasing(&p, (0.0, 1.0), 6).unwrap();
        match cert.status {
            CertStatus::Refuted { witness } => {
                assert!(p.derivative().eval(witness) < -cert.tolerance);
            }
            other => panic!("expected refutation, got {other:?}"),
        }
    }

    #[test]
    fn certify_needs_elevation_for_quartic() {
        // P' = (2t - 1)^2 (t + 1/10) + 1/5 is strictly positive on [0, 1]
        // but its degree-3 Bernstein coefficients are [0.3, 0.5, -0.5, 1.3];
        // the sign pattern only clears after elevating 3 times (degree 6).
        let dp = Polynomial::new(&[0.3, 0.6, -3.6, 4.0]);
        let p = dp.antiderivative(0.0);
        let cert = certify_nondecreasing(&p, (0.0, 1.0), 6).unwrap();
        assert_eq!(
            cert.status,
            CertStatus::CertifiedSufficient { elevation: 3 }
        );
    }

    #[test]
    fn certify_unknown_when_budget_too_small() {
        let dp = Polynomial::new(&[0.3, 0.6, -3.6, 4.0]);
        let p = dp.antiderivative(0.0);
        let cert = certify_nondecreasing(&p, (0.0, 1.0), 0).unwrap();
        assert_eq!(cert.status, CertStatus::Unknown);
    }

    #[test]
    fn lemma_suite_clean_across_degrees() {
        for m in 1..=5 {
            let report = run_markov_lemma_suite(m, 200, 11 + m as u64);
            assert_eq!(report.violations, 0, "violations at degree {m}");
            assert!(report.min_slack >= -LEMMA_SLACK_TOL);
        }
    }

    #[test]
    fn inequality_suite_clean() {
        let report = run_markov_inequality_suite(500, 23);
        assert_eq!(report.violations, 0);
        assert!(report.max_ratio <= 1.0 + MARKOV_REL_TOL);
    }
}
