//! Central finite differences with Richardson extrapolation.
//!
//! Derivatives of orders 1..=4 at the origin are taken from 7-point central
//! stencils on the step ladder `h, 2h, 4h, ...` and extrapolated to zero step.

use crate::linalg::C64;

/// Stencil weights on offsets `-3..=3` and the leading error power.
const STENCILS: [([f64; 7], f64, i32); 4] = [
    ([-1.0, 9.0, -45.0, 0.0, 45.0, -9.0, 1.0], 60.0, 6),
    ([2.0, -27.0, 270.0, -490.0, 270.0, -27.0, 2.0], 180.0, 6),
    ([1.0, -8.0, 13.0, 0.0, -13.0, 8.0, -1.0], 8.0, 4),
    ([-1.0, 12.0, -39.0, 56.0, -39.0, 12.0, -1.0], 6.0, 4),
];

pub const MAX_ORDER: usize = 4;

/// Step configuration for the extrapolated differences.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FiniteDifference {
    /// Finest step; coarser levels use `2^l * step`.
    pub step: f64,
    /// Number of step levels in the Richardson table.
    pub levels: usize,
}

impl Default for FiniteDifference {
    fn default() -> Self {
        Self {
            step: 1e-2,
            levels: 4,
        }
    }
}

/// One extrapolated derivative.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Extrapolated {
    pub value: C64,
    /// Difference between the last two extrapolants.
    pub truncation: f64,
    /// The same quantity one level coarser (`INFINITY` if unavailable).
    pub previous_truncation: f64,
    /// Stencil weight sum divided by `h^k` at the finest level; multiply by
    /// the function noise to get a roundoff estimate.
    pub noise_gain: f64,
}

impl FiniteDifference {
    fn steps(&self) -> Vec<f64> {
        (0..self.levels)
            .rev()
            .map(|l| self.step * 2f64.powi(l as i32))
            .collect()
    }

    /// Positive abscissae the caller must evaluate (negatives are mirrored),
    /// ascending.
    pub fn abscissae(&self) -> Vec<f64> {
        let mut xs: Vec<f64> = self
            .steps()
            .into_iter()
            .flat_map(|h| (1..=3).map(move |i| i as f64 * h))
            .collect();
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        xs.dedup_by(|a, b| (*a - *b).abs() <= 1e-15 * b.abs());
        xs
    }

    /// Extrapolated derivatives `f^{(k)}(0)` for `k = 1..=max_order`.
    ///
    /// `positive[i]` and `negative[i]` hold `f(x_i)` and `f(-x_i)` for
    /// `x_i = abscissae()[i]`; `at_zero` is `f(0)`.
    pub fn derivatives(
        &self,
        at_zero: C64,
        positive: &[C64],
        negative: &[C64],
        max_order: usize,
    ) -> Vec<Extrapolated> {
        assert!((1..=MAX_ORDER).contains(&max_order));
        let xs = self.abscissae();
        assert_eq!(positive.len(), xs.len());
        assert_eq!(negative.len(), xs.len());
        let lookup = |x: f64| -> C64 {
            if x == 0.0 {
                return at_zero;
            }
            let target = x.abs();
            let i = xs
                .iter()
                .position(|&a| (a - target).abs() <= 1e-12 * target)
                .expect("abscissa requested outside the evaluated set");
            if x > 0.0 {
                positive[i]
            } else {
                negative[i]
            }
        };
        let steps = self.steps();
        (0..max_order)
            .map(|k| {
                let (weights, denom, order) = STENCILS[k];
                let raw: Vec<C64> = steps
                    .iter()
                    .map(|&h| {
                        let sum: C64 = weights
                            .iter()
                            .enumerate()
                            .map(|(j, &w)| lookup((j as f64 - 3.0) * h) * w)
                            .sum();
                        sum / (denom * h.powi(k as i32 + 1))
                    })
                    .collect();
                let finest = *steps.last().unwrap();
                let gain = weights.iter().map(|w| w.abs()).sum::<f64>()
                    / (denom * finest.powi(k as i32 + 1));
                let mut ex = richardson(&raw, order);
                ex.noise_gain = gain;
                ex
            })
            .collect()
    }
}

/// Richardson table for values at steps halving left to right, with error
/// expansion in even powers starting at `h^order`.
fn richardson(values: &[C64], order: i32) -> Extrapolated {
    let n = values.len();
    let mut table: Vec<Vec<C64>> = vec![values.to_vec()];
    for j in 1..n {
        let prev = &table[j - 1];
        let factor = 2f64.powi(order + 2 * (j as i32 - 1)) - 1.0;
        let next: Vec<C64> = (1..prev.len())
            .map(|i| prev[i] + (prev[i] - prev[i - 1]) / factor)
            .collect();
        table.push(next);
    }
    let best = *table[n - 1].last().unwrap();
    let truncation = if n >= 2 {
        (best - *table[n - 2].last().unwrap()).norm()
    } else {
        f64::INFINITY
    };
    let previous_truncation = if n >= 3 {
        (*table[n - 2].last().unwrap() - *table[n - 3].last().unwrap()).norm()
    } else {
        f64::INFINITY
    };
    Extrapolated {
        value: best,
        truncation,
        previous_truncation,
        noise_gain: 0.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eval(fd: &FiniteDifference, f: impl Fn(f64) -> C64) -> Vec<Extrapolated> {
        let xs = fd.abscissae();
        let pos: Vec<C64> = xs.iter().map(|&x| f(x)).collect();
        let neg: Vec<C64> = xs.iter().map(|&x| f(-x)).collect();
        fd.derivatives(f(0.0), &pos, &neg, 4)
    }

    #[test]
    fn stencils_are_exact_on_low_polynomials() {
        // Each single-level stencil differentiates x^k exactly.
        let fd = FiniteDifference { step: 0.1, levels: 1 };
        for k in 1..=4usize {
            let d = eval(&fd, |x| C64::new(x.powi(k as i32), 0.0));
            let fact: f64 = (1..=k).map(|i| i as f64).product();
            assert!((d[k - 1].value.re - fact).abs() < 1e-9, "order {k}");
        }
    }

    #[test]
    fn extrapolated_exponential() {
        let fd = FiniteDifference::default();
        // e^{a x} - 1 evaluated without cancellation, like a CGF through 0
        let a = C64::new(0.7, 1.3);
        let d = eval(&fd, |x| crate::linalg::exp_m1(a * x));
        for (k, e) in d.iter().enumerate() {
            let want = a.powi(k as i32 + 1);
            assert!((e.value - want).norm() < 1e-9 * want.norm(), "k={k}: {}", e.value);
            assert!(e.truncation < 1e-8);
        }
    }

    #[test]
    fn abscissae_are_deduplicated() {
        let fd = FiniteDifference::default();
        let xs = fd.abscissae();
        assert_eq!(xs.len(), 9);
        assert!((xs[0] - 0.01).abs() < 1e-15);
        assert!((xs[8] - 0.24).abs() < 1e-15);
    }
}
