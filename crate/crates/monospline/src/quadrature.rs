//! Gauss–Legendre quadrature: fixed rules for the solver's discretized
//! objective, composite/adaptive drivers for error measurement.

/// Maximum bisection depth used around sign changes of a residual.
pub const MAX_KINK_DEPTH: usize = 14;

/// A Gauss–Legendre rule on the reference interval `[-1, 1]`.
///
/// Nodes are the roots of the Legendre polynomial `P_n`, found by Newton
/// iteration from the Chebyshev-based initial guess; weights are
/// `2 / ((1 - x^2) P_n'(x)^2)`. Accurate to machine precision for the rule
/// sizes used here (exact for polynomials of degree `2n - 1`).
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "rule size must be positive");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        // Roots come in +- pairs; compute the upper half.
        for i in 0..n.div_ceil(2) {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() <= 1e-16 * x.abs().max(1.0) {
                    let (_, d) = legendre_with_derivative(n, x);
                    dp = d;
                    break;
                }
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Nodes and weights mapped onto `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let mid = 0.5 * (a + b);
        let half = 0.5 * (b - a);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&x, &w)| (mid + half * x, half * w))
    }

    /// Integral of `f` over `[a, b]` with this rule.
    pub fn integrate(&self, a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
        self.mapped(a, b).map(|(x, w)| w * f(x)).sum()
    }
}

/// Legendre polynomial `P_n(x)` and its derivative by the three-term
/// recurrence.
fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Integrates `|r|^p` over `[a, b]`, bisecting (up to `MAX_KINK_DEPTH`
/// levels) wherever the residual `r` changes sign across the rule's nodes,
/// so the rule never straddles a kink of `|r|^p` it can resolve.
pub fn integrate_abs_pow(
    rule: &GaussLegendre,
    a: f64,
    b: f64,
    p: f64,
    r: &impl Fn(f64) -> f64,
) -> f64 {
    fn recurse(
        rule: &GaussLegendre,
        a: f64,
        b: f64,
        p: f64,
        r: &impl Fn(f64) -> f64,
        depth: usize,
    ) -> f64 {
        let mut has_pos = false;
        let mut has_neg = false;
        let mut sum = 0.0;
        for (x, w) in rule.mapped(a, b) {
            let v = r(x);
            has_pos |= v > 0.0;
            has_neg |= v < 0.0;
            sum += w * v.abs().powf(p);
        }
        if depth == 0 || !(has_pos && has_neg) {
            return sum;
        }
        let mid = 0.5 * (a + b);
        recurse(rule, a, mid, p, r, depth - 1) + recurse(rule, mid, b, p, r, depth - 1)
    }
    recurse(rule, a, b, p, r, MAX_KINK_DEPTH)
}

/// Integrates `f` over `[a, b]` by composite panel doubling until two
/// successive refinements agree within `tol` (absolute + relative), starting
/// from a single panel. Used to cross-check closed forms.
pub fn integrate_to_tolerance(
    rule: &GaussLegendre,
    a: f64,
    b: f64,
    tol: f64,
    f: impl Fn(f64) -> f64,
) -> f64 {
    let mut panels = 1usize;
    let mut prev = rule.integrate(a, b, &f);
    loop {
        panels *= 2;
        let h = (b - a) / panels as f64;
        let mut sum = 0.0;
        for i in 0..panels {
            let lo = a + h * i as f64;
            let hi = if i + 1 == panels { b } else { lo + h };
            sum += rule.integrate(lo, hi, &f);
        }
        if (sum - prev).abs() <= tol * (1.0 + sum.abs()) || panels >= 4096 {
            return sum;
        }
        prev = sum;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn nodes_and_weights_are_symmetric_and_normalized() {
        for n in [1, 2, 3, 8, 32, 64] {
            let rule = GaussLegendre::new(n);
            let total: f64 = rule.weights.iter().sum();
            assert_relative_eq!(total, 2.0, max_relative = 1e-14);
            for i in 0..n {
                assert_relative_eq!(rule.nodes[i], -rule.nodes[n - 1 - i], epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn rule_is_exact_for_polynomials() {
        // A 32-point rule integrates degree <= 63 exactly: check x^10 and
        // x^63 against closed forms on [0, 1].
        let rule = GaussLegendre::new(32);
        let v10 = rule.integrate(0.0, 1.0, |x| x.powi(10));
        assert_relative_eq!(v10, 1.0 / 11.0, max_relative = 1e-14);
        let v63 = rule.integrate(0.0, 1.0, |x| x.powi(63));
        assert_relative_eq!(v63, 1.0 / 64.0, max_relative = 1e-12);
    }

    #[test]
    fn two_point_rule_frozen_values() {
        // Classical: nodes +-1/sqrt(3), weights 1.
        let rule = GaussLegendre::new(2);
        assert_relative_eq!(rule.nodes[1], 1.0 / 3.0_f64.sqrt(), max_relative = 1e-15);
        assert_relative_eq!(rule.weights[0], 1.0, max_relative = 1e-15);
    }

    #[test]
    fn kink_splitting_handles_absolute_value() {
        // integral of |x - 1/3| over [0, 1] = (1/3)^2/2 + (2/3)^2/2 = 5/18.
        let rule = GaussLegendre::new(8);
        let v = integrate_abs_pow(&rule, 0.0, 1.0, 1.0, &|x| x - 1.0 / 3.0);
        assert_relative_eq!(v, 5.0 / 18.0, max_relative = 1e-9);
        // Without splitting the 8-point rule is visibly off.
        let raw = rule.integrate(0.0, 1.0, |x| (x - 1.0f64 / 3.0).abs());
        assert!((raw - 5.0 / 18.0).abs() > 1e-6);
    }

    #[test]
    fn panel_doubling_reaches_tolerance_on_stiff_monomial() {
        // x^99 concentrates near 1; a single 32-point panel is not enough
        // but doubling converges to 1/100.
        let rule = GaussLegendre::new(32);
        let v = integrate_to_tolerance(&rule, 0.0, 1.0, 1e-13, |x| x.powi(99));
        assert_relative_eq!(v, 0.01, max_relative = 1e-10);
    }
}
