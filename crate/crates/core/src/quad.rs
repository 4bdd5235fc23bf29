//! Globally adaptive Gauss–Kronrod (7/15-point) quadrature on finite intervals.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

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
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];

// Gauss weights for the odd-indexed Kronrod nodes (and the centre).
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub absolute: f64,
    pub relative: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self {
            absolute: 0.0,
            relative: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
}

struct Segment {
    lower: f64,
    upper: f64,
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

fn kronrod<F: Fn(f64) -> f64>(f: &F, lower: f64, upper: f64) -> Segment {
    let centre = 0.5 * (lower + upper);
    let half = 0.5 * (upper - lower);
    let fc = f(centre);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for (j, (&x, &w)) in XGK.iter().zip(&WGK).take(7).enumerate() {
        let dx = half * x;
        let pair = f(centre - dx) + f(centre + dx);
        kronrod += w * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    let value = kronrod * half;
    let raw = ((kronrod - gauss) * half).abs();
    // QUADPACK-style error scaling.
    let error = if raw > 0.0 {
        let scaled = (200.0 * raw / value.abs().max(f64::MIN_POSITIVE)).powf(1.5);
        raw.min(value.abs() * scaled.min(1.0)).max(50.0 * f64::EPSILON * value.abs())
    } else {
        0.0
    };
    Segment {
        lower,
        upper,
        value,
        error,
    }
}

/// Integrate `f` over `[lower, upper]` until the summed error estimate drops
/// below `max(absolute, relative·|I|)` or `max_segments` is reached.
pub fn integrate<F: Fn(f64) -> f64>(
    f: F,
    lower: f64,
    upper: f64,
    tol: Tolerance,
    max_segments: usize,
) -> Result<Estimate> {
    if lower == upper {
        return Ok(Estimate {
            value: 0.0,
            error: 0.0,
            evaluations: 0,
        });
    }
    let mut heap = BinaryHeap::new();
    let first = kronrod(&f, lower, upper);
    let mut value = first.value;
    let mut error = first.error;
    let mut evaluations = 15;
    heap.push(first);
    while error > tol.absolute.max(tol.relative * value.abs()) {
        if heap.len() >= max_segments {
            return Err(Error::Quadrature {
                lower,
                upper,
                estimate: error,
                tolerance: tol.absolute.max(tol.relative * value.abs()),
            });
        }
        let worst = heap.pop().expect("heap holds at least one segment");
        let mid = 0.5 * (worst.lower + worst.upper);
        if mid <= worst.lower || mid >= worst.upper {
            // Interval can no longer be split in floating point.
            heap.push(worst);
            return Err(Error::Quadrature {
                lower,
                upper,
                estimate: error,
                tolerance: tol.absolute.max(tol.relative * value.abs()),
            });
        }
        let left = kronrod(&f, worst.lower, mid);
        let right = kronrod(&f, mid, worst.upper);
        evaluations += 30;
        value += left.value + right.value - worst.value;
        error += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
    }
    // Re-sum to shed the drift of the running updates.
    let value = heap.iter().map(|s| s.value).sum();
    let error = heap.iter().map(|s| s.error).sum();
    Ok(Estimate {
        value,
        error,
        evaluations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn polynomials_are_exact() {
        let r = integrate(|x| x.powi(5) - 2.0 * x, 0.0, 2.0, Tolerance::default(), 10).unwrap();
        assert_relative_eq!(r.value, 64.0 / 6.0 - 4.0, max_relative = 1e-14);
        assert_eq!(r.evaluations, 15);
    }

    #[test]
    fn smooth_and_peaked_integrands() {
        let r = integrate(|x: f64| x.exp(), 0.0, 1.0, Tolerance::default(), 100).unwrap();
        assert_relative_eq!(r.value, std::f64::consts::E - 1.0, max_relative = 1e-12);
        let tol = Tolerance {
            absolute: 0.0,
            relative: 1e-10,
        };
        let r = integrate(|x: f64| 1.0 / (1e-4 + x * x), -1.0, 1.0, tol, 500).unwrap();
        let exact = 2.0 / 1e-2 * (1.0f64 / 1e-2).atan();
        assert_relative_eq!(r.value, exact, max_relative = 1e-9);
        assert!(r.error <= 1e-10 * r.value.abs());
    }

    #[test]
    fn reports_failure_when_budget_exhausted() {
        let tol = Tolerance {
            absolute: 0.0,
            relative: 1e-14,
        };
        let err = integrate(|x: f64| x.abs().sqrt().sin() / x.abs().max(1e-300), -1.0, 1.0, tol, 3)
            .unwrap_err();
        assert_eq!(err.class(), "quadrature");
    }

    #[test]
    fn empty_interval() {
        let r = integrate(|_| 1.0, 2.0, 2.0, Tolerance::default(), 10).unwrap();
        assert_eq!(r.value, 0.0);
    }
}
