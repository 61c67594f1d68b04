//! Fluctuation symmetry of the counting statistics.
//!
//! On each ladder link only the product of the two off-diagonal entries enters
//! the characteristic polynomial. With reservoir `c` counted and `o` the other
//! one, that product contains `e^{-i chi}` and `e^{+i chi}` weighted by
//! `up_c down_o` and `up_o down_c`; shifting `chi -> -chi - i A` swaps them
//! when `e^A = n_c (1+n_o) / (n_o (1+n_c))`. Hence
//! `det(lambda - L(chi)) = det(lambda - L(-chi - i A))` for every `lambda`,
//! for any `N`, and in the long-time limit `P_n / P_{-n} = e^{-A n}`.

use std::ops::RangeInclusive;

use crate::error::{invalid, FcsError, Result};
use crate::liouvillian::{LadderGenerator, LadderTilt};
use crate::linalg::{Tridiagonal, C64};
use crate::model::{ReservoirLabel, SystemParams};
use crate::spectral::BranchTracker;
use crate::transient::{propagate_n_resolved, pn_distribution, NResolvedState, TransientOptions};

/// The other terminal of a two-terminal setup.
fn partner(label: ReservoirLabel) -> Result<ReservoirLabel> {
    match label {
        ReservoirLabel::Source => Ok(ReservoirLabel::Drain),
        ReservoirLabel::Drain => Ok(ReservoirLabel::Source),
        ReservoirLabel::Single => Err(invalid("counted", "needs a two-terminal setup")),
    }
}

/// `A = ln[n_c (1+n_o) / (n_o (1+n_c))]` for counted reservoir `c`.
///
/// Counting the drain gives `ln[n_D(1+n_S) / (n_S(1+n_D))]`, which for thermal
/// baths equals `Omega (beta_S - beta_D)`.
pub fn affinity(params: &SystemParams, counted: ReservoirLabel) -> Result<f64> {
    let c = params.reservoir(counted)?.occupation;
    let o = params.reservoir(partner(counted)?)?.occupation;
    if c == 0.0 || o == 0.0 {
        return Err(FcsError::AffinityDivergence);
    }
    Ok(c.ln() - o.ln() + o.ln_1p() - c.ln_1p())
}

/// `Omega (beta_S - beta_D)`.
pub fn thermal_affinity(omega: f64, beta_source: f64, beta_drain: f64) -> f64 {
    omega * (beta_source - beta_drain)
}

#[derive(Clone, Debug, PartialEq)]
pub struct AffinityReport {
    pub counted: ReservoirLabel,
    pub affinity: f64,
    /// `Omega (beta_S - beta_D)`, when inverse temperatures were supplied.
    pub thermal_affinity: Option<f64>,
    /// Largest relative mismatch of the characteristic polynomial at matched
    /// `(chi, lambda)` pairs.
    pub polynomial_violation: f64,
    /// Largest mismatch of the tracked eigenvalue relative to
    /// `max(|lambda|, 1e-6 |L|)`, over the grid points where tracking
    /// succeeded.
    pub eigenvalue_violation: Option<f64>,
    pub tracked_points: usize,
}

/// Tridiagonal determinant `det((M - lambda)/s)` by the continuant recurrence.
/// Only link products `lower_i * upper_i` enter.
fn scaled_determinant(m: &Tridiagonal, lambda: C64, s: f64) -> C64 {
    let mut prev = C64::new(1.0, 0.0);
    let mut cur = (m.diag[0] - lambda) / s;
    for k in 1..m.dim() {
        let next = (m.diag[k] - lambda) / s * cur - m.lower[k - 1] * m.upper[k - 1] / (s * s) * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// Evaluate both sides of `f(chi) = f(-chi - i A)` over `chi_grid`.
pub fn symmetry_check(
    params: &SystemParams,
    chi_grid: &[f64],
    counted: ReservoirLabel,
    inverse_temperatures: Option<(f64, f64)>,
) -> Result<AffinityReport> {
    let a = affinity(params, counted)?;
    let gen = LadderGenerator::new(params);
    let tilt = LadderTilt::counting(&gen, counted)?;
    let scale = gen.matrix().norm_inf().max(f64::MIN_POSITIVE);
    let tracker = BranchTracker::default();

    let mut poly = 0.0f64;
    let mut eig: Option<f64> = None;
    let mut tracked = 0;
    for &chi in chi_grid {
        let here = C64::new(chi, 0.0);
        let mirror = C64::new(-chi, -a);
        let m1 = tilt.matrix_at(here);
        let m2 = tilt.matrix_at(mirror);
        for radius in [0.1, 0.5, 1.0, 3.0] {
            for j in 0..8 {
                let lambda = C64::from_polar(radius * scale, 0.3 + j as f64 * std::f64::consts::FRAC_PI_4)
                    - C64::new(0.5 * scale, 0.0);
                let f1 = scaled_determinant(&m1, lambda, scale);
                let f2 = scaled_determinant(&m2, lambda, scale);
                let size = f1.norm().max(f2.norm());
                if size > 0.0 {
                    poly = poly.max((f1 - f2).norm() / size);
                }
            }
        }
        // The mirror image of the path 0 -> chi runs from -iA (where the
        // branch is back at zero) to -chi - iA.
        let l1 = tracker.track(&tilt, &[here]);
        let l2 = tracker.track(&tilt, &[C64::new(0.0, -a), mirror]);
        if let (Ok(l1), Ok(l2)) = (l1, l2) {
            let size = l1[0].norm().max(l2[1].norm()).max(1e-6 * scale);
            let v = (l1[0] - l2[1]).norm() / size;
            eig = Some(eig.map_or(v, |e| e.max(v)));
            tracked += 1;
        }
    }
    Ok(AffinityReport {
        counted,
        affinity: a,
        thermal_affinity: inverse_temperatures
            .map(|(bs, bd)| thermal_affinity(params.omega(), bs, bd)),
        polynomial_violation: poly,
        eigenvalue_violation: eig,
        tracked_points: tracked,
    })
}

/// Probabilities below this are treated as unresolved.
pub const PROBABILITY_FLOOR: f64 = 1e-300;

#[derive(Clone, Debug, PartialEq)]
pub struct FluctuationTheoremReport {
    pub counted: ReservoirLabel,
    pub time: f64,
    /// Predicted `ln(P_n/P_{-n}) / n`, equal to `-A`.
    pub slope: f64,
    /// `(n, ln(P_n/P_{-n}))` for each checked `n`.
    pub log_ratios: Vec<(i64, f64)>,
    pub max_deviation: f64,
}

/// Propagate from the stationary state for `t`, then compare
/// `ln(P_n / P_{-n})` with `-A n` for the positive `n` in `counts`.
pub fn fluctuation_theorem_check(
    params: &SystemParams,
    t: f64,
    counts: RangeInclusive<i64>,
    counted: ReservoirLabel,
) -> Result<FluctuationTheoremReport> {
    let a = affinity(params, counted)?;
    let options = TransientOptions {
        counted: Some(counted),
        ..Default::default()
    };
    let start = NResolvedState::stationary(params)?;
    let state = propagate_n_resolved(&start, params, t, &options)?;
    let pn = pn_distribution(&state);
    let mut log_ratios = Vec::new();
    let mut max_deviation = 0.0f64;
    for n in counts.filter(|n| *n > 0) {
        let (plus, minus) = (pn.prob(n), pn.prob(-n));
        if plus < PROBABILITY_FLOOR || minus < PROBABILITY_FLOOR {
            return Err(FcsError::InsufficientStatistics {
                n,
                floor: PROBABILITY_FLOOR,
            });
        }
        let r = plus.ln() - minus.ln();
        max_deviation = max_deviation.max((r + a * n as f64).abs());
        log_ratios.push((n, r));
    }
    Ok(FluctuationTheoremReport {
        counted,
        time: t,
        slope: -a,
        log_ratios,
        max_deviation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn thermal(n: usize, bs: f64, bd: f64) -> SystemParams {
        SystemParams::thermal(n, 1.0, 1.0, 1.0 / bs, 1.0, 1.0 / bd).unwrap()
    }

    #[test]
    fn affinity_of_thermal_baths() {
        let p = thermal(2, 0.5, 1.0);
        assert_relative_eq!(affinity(&p, ReservoirLabel::Drain).unwrap(), -0.5, max_relative = 1e-12);
        assert_relative_eq!(affinity(&p, ReservoirLabel::Source).unwrap(), 0.5, max_relative = 1e-12);
        let p = SystemParams::two_terminal(2, 1.0, 1.0, 1.0, 0.0).unwrap();
        assert_eq!(affinity(&p, ReservoirLabel::Drain), Err(FcsError::AffinityDivergence));
    }

    #[test]
    fn zero_affinity_is_reflection() {
        let p = SystemParams::two_terminal(3, 0.4, 0.8, 1.7, 0.8).unwrap();
        let r = symmetry_check(&p, &[0.2, 1.1], ReservoirLabel::Drain, None).unwrap();
        assert_eq!(r.affinity, 0.0);
        assert!(r.polynomial_violation < 1e-13);
    }

    #[test]
    fn two_level_symmetry() {
        let p = thermal(1, 1.0, 0.5);
        let r = symmetry_check(&p, &[-2.0, -0.4, 0.1, 0.9, 2.5], ReservoirLabel::Drain, Some((1.0, 0.5))).unwrap();
        assert!(r.polynomial_violation < 1e-10, "{r:?}");
        assert!(r.eigenvalue_violation.unwrap() < 1e-10, "{r:?}");
        assert_relative_eq!(r.affinity, r.thermal_affinity.unwrap(), max_relative = 1e-12);
    }

    #[test]
    fn broken_rates_break_the_symmetry() {
        // wrong affinity: shifting by a different amount must fail
        let p = thermal(3, 0.5, 1.0);
        let tilt_gen = LadderGenerator::new(&p);
        let tilt = LadderTilt::counting(&tilt_gen, ReservoirLabel::Drain).unwrap();
        let a = affinity(&p, ReservoirLabel::Drain).unwrap();
        let m1 = tilt.matrix_at(C64::new(0.4, 0.0));
        let m2 = tilt.matrix_at(C64::new(-0.4, -0.9 * a));
        let lambda = C64::new(-1.0, 0.5);
        let f1 = scaled_determinant(&m1, lambda, 1.0);
        let f2 = scaled_determinant(&m2, lambda, 1.0);
        assert!((f1 - f2).norm() > 1e-3 * f1.norm());
    }

    #[test]
    fn equilibrium_ratio_is_one() {
        let p = thermal(2, 0.7, 0.7);
        let r = fluctuation_theorem_check(&p, 5.0, 1..=3, ReservoirLabel::Drain).unwrap();
        assert!(r.max_deviation < 1e-10, "{r:?}");
    }
}
