//! Empirical convergence analysis around the projection operator: moduli of
//! continuity, sup-norm error measurement, convergence tables over partition
//! sequences (with the interpolation-based error bound alongside), and the
//! classical `x^n` example separating L^p convergence from uniform
//! convergence.

use crate::approx::{
    lp_distance_with_points, project, ApproxConfig, ApproxError, Monotonicity, TargetFunction,
};
use crate::partition::Partition;
use crate::quadrature::{integrate_to_tolerance, GaussLegendre};
use crate::spline::Spline;
use serde::Serialize;
use thiserror::Error;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Default evaluation grid for sup-norm and modulus estimation.
pub const DEFAULT_GRID: usize = 10_001;

/// Fixed column layout of [`ConvergenceReport::to_csv`].
pub const CSV_HEADER: &str =
    "size,norm,lp_error,sup_global,sup_inner,endpoint_a,endpoint_b,interp_bound,opt_gap";

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("delta = {delta} is outside (0, {span}]")]
    InvalidDelta { delta: f64, span: f64 },
    #[error("interval [{lo}, {hi}] is not a nondegenerate subinterval of the domain")]
    BadInterval { lo: f64, hi: f64 },
    #[error("exponent p must be a finite real >= 1, got {0}")]
    InvalidExponent(f64),
    #[error(transparent)]
    Approx(#[from] ApproxError),
}

// ---------------------------------------------------------------------------
// Modulus of continuity
// ---------------------------------------------------------------------------

/// `omega_f(delta) = sup { |f(x) - f(y)| : |x - y| <= delta }`, taken from
/// the closed form when the target carries one, reduced to a single sweep
/// `max_x |f(min(x + delta, b)) - f(x)|` for tagged-monotone targets, and
/// estimated over all grid pairs otherwise; the grid maximum is refined once
/// on a 10x finer local grid.
pub fn modulus_of_continuity(
    f: &TargetFunction,
    delta: f64,
    grid: usize,
) -> Result<f64, AnalysisError> {
    let (a, b) = (f.a(), f.b());
    let span = b - a;
    if !(delta > 0.0) || delta > span * (1.0 + 1e-12) {
        return Err(AnalysisError::InvalidDelta { delta, span });
    }
    if let Some(v) = f.exact_modulus(delta) {
        return Ok(v);
    }
    let grid = grid.max(3);
    let step = span / (grid - 1) as f64;
    let xs = |i: usize| a + step * i as f64;

    if f.monotonicity() != Monotonicity::None {
        // For monotone f the sup is attained on pairs exactly delta apart
        // (or clipped at b), so a single sweep suffices.
        let gain = |x: f64| (f.eval((x + delta).min(b)) - f.eval(x)).abs();
        let mut best = 0.0f64;
        let mut best_x = a;
        for i in 0..grid {
            let g = gain(xs(i));
            if g > best {
                best = g;
                best_x = xs(i);
            }
        }
        let lo = (best_x - step).max(a);
        let hi = (best_x + step).min(b);
        for i in 0..=20 {
            let x = lo + (hi - lo) * i as f64 / 20.0;
            best = best.max(gain(x));
        }
        return Ok(best);
    }

    // Generic continuous target: scan all grid pairs within delta.
    let vals: Vec<f64> = (0..grid).map(|i| f.eval(xs(i))).collect();
    let window = (delta / step).floor() as usize + 1;
    let mut best = 0.0f64;
    let mut best_pair = (a, a);
    for i in 0..grid {
        for j in i + 1..=(i + window).min(grid - 1) {
            if xs(j) - xs(i) > delta * (1.0 + 1e-12) {
                break;
            }
            let d = (vals[j] - vals[i]).abs();
            if d > best {
                best = d;
                best_pair = (xs(i), xs(j));
            }
        }
    }
    // One local refinement around the best pair.
    let fine = 10usize;
    for di in 0..=2 * fine {
        let x = (best_pair.0 - step + step * di as f64 / fine as f64).clamp(a, b);
        for dj in 0..=2 * fine {
            let y = (best_pair.1 - step + step * dj as f64 / fine as f64).clamp(a, b);
            if (y - x).abs() <= delta * (1.0 + 1e-12) {
                best = best.max((f.eval(y) - f.eval(x)).abs());
            }
        }
    }
    Ok(best)
}

// ---------------------------------------------------------------------------
// Sup distance
// ---------------------------------------------------------------------------

/// `sup |f - s|` over `[lo, hi]` on a dense grid, sharpened once by a
/// golden-section search in the bracket around the grid argmax.
pub fn sup_distance(
    f: &TargetFunction,
    s: &Spline,
    interval: (f64, f64),
    grid: usize,
) -> Result<f64, AnalysisError> {
    let (lo, hi) = interval;
    let (a, b) = (s.a(), s.b());
    let slack = 1e-12 * (b - a);
    if !(lo < hi) || lo < a - slack || hi > b + slack {
        return Err(AnalysisError::BadInterval { lo, hi });
    }
    let (lo, hi) = (lo.max(a), hi.min(b));
    let grid = grid.max(3);
    let err = |x: f64| {
        let x = x.clamp(a, b);
        (f.eval(x) - s.eval(x).expect("clamped into domain")).abs()
    };
    let step = (hi - lo) / (grid - 1) as f64;
    let mut best = 0.0f64;
    let mut best_i = 0usize;
    for i in 0..grid {
        let e = err(lo + step * i as f64);
        if e > best {
            best = e;
            best_i = i;
        }
    }
    // Golden-section refinement in the bracket around the argmax.
    let mut left = lo + step * best_i.saturating_sub(1) as f64;
    let mut right = (lo + step * (best_i + 1) as f64).min(hi);
    let inv_phi = 0.5 * (5.0f64.sqrt() - 1.0);
    let mut x1 = right - inv_phi * (right - left);
    let mut x2 = left + inv_phi * (right - left);
    let (mut e1, mut e2) = (err(x1), err(x2));
    for _ in 0..60 {
        if e1 < e2 {
            left = x1;
            x1 = x2;
            e1 = e2;
            x2 = left + inv_phi * (right - left);
            e2 = err(x2);
        } else {
            right = x2;
            x2 = x1;
            e2 = e1;
            x1 = right - inv_phi * (right - left);
            e1 = err(x1);
        }
    }
    Ok(best.max(e1).max(e2))
}

// ---------------------------------------------------------------------------
// Convergence reports
// ---------------------------------------------------------------------------

/// One projection instance measured every way the claims need.
#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceRow {
    /// Number of knots (k).
    pub partition_size: usize,
    /// Mesh norm `max h_i`.
    pub partition_norm: f64,
    /// Measured `‖f − s‖_p`.
    pub lp_error: f64,
    /// `sup |f − s|` over the whole domain.
    pub sup_error_global: f64,
    /// `sup |f − s|` over the inner interval.
    pub sup_error_inner: f64,
    /// `|s(a) − f(a)|`.
    pub endpoint_a: f64,
    /// `|s(b) − f(b)|`.
    pub endpoint_b: f64,
    /// `(b − a)^{1/p} · omega_f(‖Delta‖)` — the interpolant-based upper
    /// bound, defined only when `m >= 2l + 1`.
    pub interp_bound: Option<f64>,
    pub optimality_gap: f64,
}

/// Convergence table for one target under one configuration, rows ordered
/// by decreasing mesh norm.
#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceReport {
    pub function: String,
    pub p: f64,
    pub m: usize,
    pub l: usize,
    /// Inner observation window `[c, d]`.
    pub inner: (f64, f64),
    pub rows: Vec<ConvergenceRow>,
}

impl ConvergenceReport {
    /// Renders the fixed CSV layout ([`CSV_HEADER`]); an absent bound is an
    /// empty field. Floats use shortest-roundtrip formatting, so identical
    /// runs produce identical bytes.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        for r in &self.rows {
            out.push('\n');
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}",
                r.partition_size,
                r.partition_norm,
                r.lp_error,
                r.sup_error_global,
                r.sup_error_inner,
                r.endpoint_a,
                r.endpoint_b,
                r.interp_bound.map(|v| v.to_string()).unwrap_or_default(),
                r.optimality_gap
            ));
        }
        out.push('\n');
        out
    }
}

/// Default inner observation window: the middle 80% of the domain.
pub fn default_inner_interval(f: &TargetFunction) -> (f64, f64) {
    let (a, b) = (f.a(), f.b());
    (a + 0.1 * (b - a), b - 0.1 * (b - a))
}

/// Projects `f` on every partition and measures the errors. A projection
/// that exhausts its iteration budget still contributes its (certified)
/// result — the optimality gap column keeps it honest. Rows are sorted by
/// decreasing mesh norm.
pub fn run_convergence(
    f: &TargetFunction,
    partitions: &[Partition],
    cfg: &ApproxConfig,
    inner: (f64, f64),
) -> Result<ConvergenceReport, AnalysisError> {
    cfg.validate().map_err(AnalysisError::Approx)?;
    let (a, b) = (f.a(), f.b());
    if !(inner.0 < inner.1) || inner.0 < a - 1e-12 || inner.1 > b + 1e-12 {
        return Err(AnalysisError::BadInterval {
            lo: inner.0,
            hi: inner.1,
        });
    }

    let row_of = |partition: &Partition| -> Result<ConvergenceRow, AnalysisError> {
        let result = match project(f, partition, cfg) {
            Ok(r) => r,
            Err(ApproxError::NonConvergence { result, .. }) => *result,
            Err(e) => return Err(e.into()),
        };
        let spline = result.spline.spline();
        let sup_error_global = sup_distance(f, spline, (a, b), DEFAULT_GRID)?;
        let sup_error_inner = sup_distance(f, spline, inner, DEFAULT_GRID)?;
        let endpoint_a = (spline.eval(a).expect("a in domain") - f.eval(a)).abs();
        let endpoint_b = (spline.eval(b).expect("b in domain") - f.eval(b)).abs();
        let interp_bound = if cfg.m > 2 * cfg.l {
            let omega = modulus_of_continuity(f, partition.norm(), DEFAULT_GRID)?;
            Some((b - a).powf(1.0 / cfg.p) * omega)
        } else {
            None
        };
        Ok(ConvergenceRow {
            partition_size: partition.len(),
            partition_norm: partition.norm(),
            lp_error: result.objective,
            sup_error_global,
            sup_error_inner,
            endpoint_a,
            endpoint_b,
            interp_bound,
            optimality_gap: result.optimality_gap,
        })
    };

    #[cfg(feature = "parallel")]
    let collected: Result<Vec<ConvergenceRow>, AnalysisError> =
        partitions.par_iter().map(row_of).collect();
    #[cfg(not(feature = "parallel"))]
    let collected: Result<Vec<ConvergenceRow>, AnalysisError> =
        partitions.iter().map(row_of).collect();
    let mut rows = collected?;
    rows.sort_by(|x, y| y.partition_norm.total_cmp(&x.partition_norm));

    Ok(ConvergenceReport {
        function: f.id().to_string(),
        p: cfg.p,
        m: cfg.m,
        l: cfg.l,
        inner,
        rows,
    })
}

// ---------------------------------------------------------------------------
// The x^n counterexample
// ---------------------------------------------------------------------------

/// One row of the `x^n` table: `‖x^n‖_p` on `[0, 1]` both in closed form
/// and by quadrature, plus the (grid-estimated) sup norm. The closed form is
/// `(1 / (np + 1))^{1/p}`, which vanishes as `n` grows while the sup norm
/// stays at 1 — L^p convergence without uniform convergence.
#[derive(Debug, Clone, Serialize)]
pub struct CounterexampleRow {
    pub n: u32,
    pub lp_norm: f64,
    pub lp_norm_quadrature: f64,
    pub sup_norm: f64,
}

pub fn counterexample_xn(ns: &[u32], p: f64) -> Result<Vec<CounterexampleRow>, AnalysisError> {
    if !(p >= 1.0) || !p.is_finite() {
        return Err(AnalysisError::InvalidExponent(p));
    }
    let rule = GaussLegendre::new(64);
    let zero = Spline::new(
        Partition::uniform(0.0, 1.0, 2).expect("unit interval"),
        vec![crate::poly::Polynomial::new(&[0.0])],
        1,
        0,
    )
    .expect("zero spline");
    ns.iter()
        .map(|&n| {
            let lp_norm = (1.0 / (n as f64 * p + 1.0)).powf(1.0 / p);
            let integral = integrate_to_tolerance(&rule, 0.0, 1.0, 1e-13, |x| x.powf(n as f64 * p));
            let lp_norm_quadrature = integral.max(0.0).powf(1.0 / p);
            let f =
                TargetFunction::new(format!("x^{n}"), 0.0, 1.0, move |x: f64| x.powi(n as i32))?;
            let sup_norm = sup_distance(&f, &zero, (0.0, 1.0), DEFAULT_GRID)?;
            Ok(CounterexampleRow {
                n,
                lp_norm,
                lp_norm_quadrature,
                sup_norm,
            })
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Builtin targets
// ---------------------------------------------------------------------------

/// The builtin corpus: eight nondecreasing targets on `[0, 1]`, each with a
/// closed-form modulus of continuity.
pub fn builtin_functions() -> Vec<TargetFunction> {
    let make = |id: &str, f: fn(f64) -> f64, omega: fn(f64) -> f64| -> TargetFunction {
        TargetFunction::new(id, 0.0, 1.0, f)
            .expect("unit interval is valid")
            .tagged(Monotonicity::NonDecreasing)
            .expect("builtin targets are nondecreasing")
            .with_exact_modulus(omega)
    };
    vec![
        make("identity", |x| x, |d| d.min(1.0)),
        make("constant", |_| 0.5, |_| 0.0),
        make(
            "square",
            |x| x * x,
            |d| {
                let d = d.min(1.0);
                d * (2.0 - d)
            },
        ),
        make("sqrt", |x| x.sqrt(), |d| d.min(1.0).sqrt()),
        make("cbrt", |x| x.cbrt(), |d| d.min(1.0).cbrt()),
        make(
            "smoothstep",
            |x| x * x * (3.0 - 2.0 * x),
            |d| {
                let d = d.min(1.0);
                1.5 * d - 0.5 * d * d * d
            },
        ),
        make(
            "plateau",
            |x| {
                if x < 1.0 / 3.0 {
                    1.5 * x
                } else if x <= 2.0 / 3.0 {
                    0.5
                } else {
                    0.5 + 1.5 * (x - 2.0 / 3.0)
                }
            },
            |d| {
                let d = d.min(1.0);
                if d <= 1.0 / 3.0 {
                    1.5 * d
                } else if d <= 2.0 / 3.0 {
                    0.5
                } else {
                    1.5 * d - 0.5
                }
            },
        ),
        make(
            "exp",
            |x| ((3.0 * x).exp() - 1.0) / (3.0f64.exp() - 1.0),
            |d| {
                let d = d.min(1.0);
                3.0f64.exp() * (1.0 - (-3.0 * d).exp()) / (3.0f64.exp() - 1.0)
            },
        ),
    ]
}

/// Looks a builtin target up by id.
pub fn builtin(id: &str) -> Option<TargetFunction> {
    builtin_functions().into_iter().find(|f| f.id() == id)
}

/// Measured `‖f − s‖_p` re-exported here so reports and CLI share one
/// quadrature convention.
pub fn lp_error(f: &TargetFunction, s: &Spline, p: f64, points_per_piece: usize) -> f64 {
    lp_distance_with_points(f, s, p, points_per_piece)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::Polynomial;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    #[test]
    fn exact_modulus_short_circuits() {
        let f = builtin("smoothstep").unwrap();
        // (3/2) * 0.2 - 0.2^3 / 2 = 0.296
        let v = modulus_of_continuity(&f, 0.2, 101).unwrap();
        assert_abs_diff_eq!(v, 0.296, epsilon = 1e-15);
    }

    #[test]
    fn monotone_reduction_matches_closed_form() {
        let f = TargetFunction::new("sqrt", 0.0, 1.0, |x: f64| x.sqrt())
            .unwrap()
            .tagged(Monotonicity::NonDecreasing)
            .unwrap();
        let v = modulus_of_continuity(&f, 0.04, DEFAULT_GRID).unwrap();
        assert_abs_diff_eq!(v, 0.2, epsilon = 1e-6);
    }

    #[test]
    fn generic_estimator_handles_nonmonotone_targets() {
        let f = TargetFunction::new("wave", 0.0, 1.0, |x: f64| {
            (2.0 * std::f64::consts::PI * x).sin()
        })
        .unwrap();
        // sup over |x - y| <= 1/4 of |sin 2pi x - sin 2pi y| = sqrt(2).
        let v = modulus_of_continuity(&f, 0.25, 2001).unwrap();
        assert_abs_diff_eq!(v, 2.0f64.sqrt(), epsilon = 1e-3);
    }

    #[test]
    fn all_builtin_moduli_match_independent_estimates() {
        // Re-estimate each closed-form modulus through the tagged-monotone
        // sweep (an independently implemented path) at several deltas.
        for f in builtin_functions() {
            let estimator = TargetFunction::new(f.id(), 0.0, 1.0, {
                let g = f.clone();
                move |x| g.eval(x)
            })
            .unwrap()
            .tagged(Monotonicity::NonDecreasing)
            .unwrap();
            for delta in [0.07, 1.0 / 9.0, 0.4, 0.8] {
                let exact = f.exact_modulus(delta).unwrap();
                let est = modulus_of_continuity(&estimator, delta, 20_001).unwrap();
                assert!(
                    (exact - est).abs() <= 2e-3 * (1.0 + exact),
                    "{} at delta {}: exact {} vs estimate {}",
                    f.id(),
                    delta,
                    exact,
                    est
                );
                assert!(
                    est <= exact * (1.0 + 1e-9) + 1e-12,
                    "{}: estimate {} exceeds claimed exact modulus {}",
                    f.id(),
                    est,
                    exact
                );
            }
        }
    }

    #[test]
    fn invalid_delta_is_rejected() {
        let f = builtin("identity").unwrap();
        assert!(matches!(
            modulus_of_continuity(&f, 0.0, 101),
            Err(AnalysisError::InvalidDelta { .. })
        ));
        assert!(matches!(
            modulus_of_continuity(&f, 1.5, 101),
            Err(AnalysisError::InvalidDelta { .. })
        ));
    }

    #[test]
    fn sup_distance_finds_interior_maxima() {
        // |x^2 - x| has its max 1/4 at x = 1/2, strictly between the grid
        // points of a coarse even-sized grid.
        let f = TargetFunction::new("square", 0.0, 1.0, |x| x * x).unwrap();
        let line = Spline::new(
            Partition::uniform(0.0, 1.0, 2).unwrap(),
            vec![Polynomial::new(&[0.0, 1.0])],
            1,
            0,
        )
        .unwrap();
        let v = sup_distance(&f, &line, (0.0, 1.0), 100).unwrap();
        assert_abs_diff_eq!(v, 0.25, epsilon = 1e-10);
        assert!(matches!(
            sup_distance(&f, &line, (0.5, 0.2), 100),
            Err(AnalysisError::BadInterval { .. })
        ));
        assert!(matches!(
            sup_distance(&f, &line, (-0.5, 1.0), 100),
            Err(AnalysisError::BadInterval { .. })
        ));
    }

    #[test]
    fn counterexample_rows_match_closed_forms() {
        let ns: Vec<u32> = (1..=10).collect();
        let rows = counterexample_xn(&ns, 1.0).unwrap();
        assert_abs_diff_eq!(rows[0].lp_norm, 0.5, epsilon = 1e-15);
        for row in &rows {
            assert_relative_eq!(row.lp_norm, row.lp_norm_quadrature, epsilon = 1e-10);
            assert!(row.sup_norm >= 1.0 - 1e-9 && row.sup_norm <= 1.0 + 1e-12);
        }
        for w in rows.windows(2) {
            assert!(
                w[1].lp_norm < w[0].lp_norm,
                "lp norms must strictly decrease"
            );
        }
        assert!(matches!(
            counterexample_xn(&ns, 0.5),
            Err(AnalysisError::InvalidExponent(_))
        ));
    }

    #[test]
    fn builtin_corpus_is_complete_and_consistent() {
        let fns = builtin_functions();
        assert!(fns.len() >= 8);
        for f in &fns {
            assert_eq!((f.a(), f.b()), (0.0, 1.0));
            assert_eq!(f.monotonicity(), Monotonicity::NonDecreasing);
            assert!(f.exact_modulus(0.5).is_some());
            assert!(builtin(f.id()).is_some());
        }
        assert!(builtin("nope").is_none());
    }

    #[test]
    fn convergence_report_shrinks_errors_and_freezes_csv_layout() {
        let f = builtin("sqrt").unwrap();
        let cfg = ApproxConfig::new(2.0, 1, 0);
        let partitions: Vec<Partition> = [3usize, 5, 9]
            .iter()
            .map(|&k| Partition::uniform(0.0, 1.0, k).unwrap())
            .collect();
        let inner = default_inner_interval(&f);
        let report = run_convergence(&f, &partitions, &cfg, inner).unwrap();
        assert_eq!(report.rows.len(), 3);
        for w in report.rows.windows(2) {
            assert!(w[0].partition_norm > w[1].partition_norm);
            assert!(w[1].lp_error <= w[0].lp_error + 1e-12);
        }
        for row in &report.rows {
            let bound = row.interp_bound.expect("m = 1, l = 0 has a bound");
            assert!(row.lp_error <= bound + 1e-9, "{row:?}");
            assert!(row.sup_error_inner <= row.sup_error_global + 1e-12);
        }
        let csv = report.to_csv();
        assert!(csv.starts_with(CSV_HEADER));
        assert_eq!(csv.lines().count(), 4);
        let rerun = run_convergence(&f, &partitions, &cfg, inner).unwrap();
        assert_eq!(
            csv,
            rerun.to_csv(),
            "reports must be byte-identical across runs"
        );
    }

    #[test]
    fn bound_column_is_empty_when_undefined() {
        // m = 2, l = 1 leaves m < 2l + 1: no bound column.
        let f = builtin("smoothstep").unwrap();
        let cfg = ApproxConfig::new(2.0, 2, 1);
        let partitions = vec![Partition::uniform(0.0, 1.0, 5).unwrap()];
        let report = run_convergence(&f, &partitions, &cfg, default_inner_interval(&f)).unwrap();
        assert!(report.rows[0].interp_bound.is_none());
        let line = report.to_csv().lines().nth(1).unwrap().to_string();
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(fields.len(), 9);
        assert!(fields[7].is_empty());
    }

    #[test]
    fn bad_inner_interval_is_rejected() {
        let f = builtin("sqrt").unwrap();
        let cfg = ApproxConfig::new(2.0, 1, 0);
        let partitions = vec![Partition::uniform(0.0, 1.0, 5).unwrap()];
        assert!(matches!(
            run_convergence(&f, &partitions, &cfg, (0.9, 0.1)),
            Err(AnalysisError::BadInterval { .. })
        ));
    }
}
