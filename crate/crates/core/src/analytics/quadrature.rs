//! Globally adaptive Gauss-Kronrod (7/15) quadrature on finite intervals.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::{BrqError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_subdivisions: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            rel_tol: 1e-9,
            abs_tol: 1e-12,
            max_subdivisions: 2000,
        }
    }
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) {
            return Err(BrqError::invalid("quadrature tolerances must be > 0"));
        }
        if self.max_subdivisions == 0 {
            return Err(BrqError::invalid("max_subdivisions must be >= 1"));
        }
        Ok(())
    }
}

// Kronrod abscissae and weights; odd indices are the embedded Gauss nodes.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Segment {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let pair = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    Segment {
        a,
        b,
        value: kronrod * half,
        error: ((kronrod - gauss) * half).abs(),
    }
}

/// Integrates `f` over `[a, b]`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, spec: &QuadratureSpec) -> Result<f64> {
    integrate_pieces(f, &[a, b], spec)
}

/// Integrates `f` over consecutive pieces `[p0, p1], [p1, p2], ...`.
///
/// Breakpoints should sit on kinks of the integrand. Empty pieces are skipped.
pub fn integrate_pieces<F: Fn(f64) -> f64>(
    f: F,
    breakpoints: &[f64],
    spec: &QuadratureSpec,
) -> Result<f64> {
    spec.validate()?;
    if breakpoints.len() < 2 {
        return Ok(0.0);
    }
    if breakpoints.iter().any(|p| !p.is_finite()) {
        return Err(BrqError::invalid("quadrature limits must be finite"));
    }
    let mut heap = BinaryHeap::new();
    for w in breakpoints.windows(2) {
        if w[1] > w[0] {
            heap.push(gk15(&f, w[0], w[1]));
        } else if w[1] < w[0] {
            return Err(BrqError::invalid(
                "quadrature breakpoints must be ascending",
            ));
        }
    }
    let mut subdivisions = heap.len();
    loop {
        let (total, err) = heap
            .iter()
            .fold((0.0, 0.0), |(v, e), s| (v + s.value, e + s.error));
        let tol = spec.abs_tol.max(spec.rel_tol * total.abs());
        if err <= tol {
            return Ok(total);
        }
        if subdivisions >= spec.max_subdivisions {
            return Err(BrqError::QuadratureNonConvergence {
                achieved: err,
                requested: tol,
            });
        }
        let worst = heap.pop().expect("non-empty heap");
        let mid = 0.5 * (worst.a + worst.b);
        if !(mid > worst.a && mid < worst.b) {
            // Interval at machine resolution; nothing more to gain here.
            return Ok(total);
        }
        heap.push(gk15(&f, worst.a, mid));
        heap.push(gk15(&f, mid, worst.b));
        subdivisions += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_exact() {
        let q = QuadratureSpec::default();
        let v = integrate(|x| 3.0 * x * x + 2.0 * x + 1.0, 0.0, 2.0, &q).unwrap();
        assert!((v - 14.0).abs() < 1e-12);
    }

    #[test]
    fn exponential_and_log() {
        let q = QuadratureSpec::default();
        let v = integrate(|x: f64| (-x).exp(), 0.0, 50.0, &q).unwrap();
        assert!((v - (1.0 - (-50f64).exp())).abs() < 1e-12);
        // int_0^1 ln(x) dx = -1, integrable endpoint singularity
        let v = integrate(|x: f64| if x > 0.0 { x.ln() } else { 0.0 }, 0.0, 1.0, &q).unwrap();
        assert!((v + 1.0).abs() < 1e-8);
    }

    #[test]
    fn kink_with_breakpoint() {
        let q = QuadratureSpec::default();
        let v = integrate_pieces(|x: f64| x.min(1.0), &[0.0, 1.0, 3.0], &q).unwrap();
        assert!((v - 2.5).abs() < 1e-13);
    }

    #[test]
    fn reports_non_convergence() {
        let q = QuadratureSpec {
            max_subdivisions: 3,
            ..Default::default()
        };
        let r = integrate(|x: f64| (50.0 * x).sin().abs(), 0.0, 10.0, &q);
        assert!(matches!(r, Err(BrqError::QuadratureNonConvergence { .. })));
    }

    #[test]
    fn rejects_bad_spec() {
        let q = QuadratureSpec {
            rel_tol: 0.0,
            ..Default::default()
        };
        assert!(integrate(|x| x, 0.0, 1.0, &q).is_err());
    }
}
