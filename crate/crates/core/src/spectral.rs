//! Tracking the eigenvalue branch that passes through zero at `chi = 0`.
//!
//! The branch is followed by continuation in the counting field. At every
//! step the eigenvector is refined by shifted inverse iteration and the
//! eigenvalue is read off from the exact identity
//!
//! ```text
//! lambda(chi) = tr[(L(chi) - L(0)) v] / tr[v]
//! ```
//!
//! which holds for any right eigenvector `v` because `tr L(0) = 0`. The
//! numerator only involves the counting-field increments `e^{+-i chi} - 1`,
//! so `lambda` comes out with a small relative error even where it is tiny
//! compared with the generator norm.

use crate::error::{FcsError, Result};
use crate::linalg::{norm2, C64};

/// A generator family `L(chi)` with a trace-preserving `L(0)`.
pub trait TiltedGenerator {
    fn dim(&self) -> usize;

    /// A normalized null vector of `L(0)` (trace one) on the branch of
    /// interest.
    fn stationary(&self) -> Vec<C64>;

    /// The trace covector applied to `v`.
    fn trace(&self, v: &[C64]) -> C64;

    fn apply(&self, chi: C64, v: &[C64]) -> Vec<C64>;

    /// Overwrite `rhs` with `(L(chi) - shift)^{-1} rhs`. Returns `false` on a
    /// zero pivot.
    fn solve_shifted(&self, chi: C64, shift: C64, rhs: &mut [C64]) -> bool;

    /// `tr[(L(chi) - L(0)) v]`, assembled without forming `L(chi)`.
    fn jump_functional(&self, chi: C64, v: &[C64]) -> C64;

    /// Rough size of `L(0)`, for residual checks.
    fn norm_estimate(&self) -> f64;
}

/// Continuation settings for following the dominant branch.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BranchTracker {
    /// Largest step in `|chi|` between refinements.
    pub max_step: f64,
    /// Relative convergence tolerance on the eigenvalue.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Minimum `|<v_prev, v_next>|` between consecutive normalized
    /// eigenvectors before the step is declared ambiguous.
    pub min_overlap: f64,
}

impl Default for BranchTracker {
    fn default() -> Self {
        Self {
            max_step: 0.05,
            tolerance: 1e-14,
            max_iterations: 60,
            min_overlap: 0.5,
        }
    }
}

#[derive(Clone, Debug)]
struct BranchState {
    chi: C64,
    lambda: C64,
    vector: Vec<C64>,
}

impl BranchTracker {
    /// Follow the branch from `chi = 0` through `points` in the given order
    /// and return the eigenvalue at each of them.
    pub fn track<G: TiltedGenerator + ?Sized>(&self, op: &G, points: &[C64]) -> Result<Vec<C64>> {
        self.track_path(op, points, 1.0)
    }

    /// Like [`track`](Self::track), for a path coordinate `s` with
    /// `|d chi / d s| = speed`.
    pub fn track_path<G: TiltedGenerator + ?Sized>(
        &self,
        op: &G,
        points: &[C64],
        speed: f64,
    ) -> Result<Vec<C64>> {
        let mut state = BranchState {
            chi: C64::default(),
            lambda: C64::default(),
            vector: normalized(op.stationary()),
        };
        let mut previous: Option<(C64, C64)> = None;
        let mut out = Vec::with_capacity(points.len());
        for &target in points {
            let segment = target - state.chi;
            let steps = ((segment.norm() * speed) / self.max_step).ceil().max(1.0) as usize;
            if segment.norm() == 0.0 {
                out.push(state.lambda);
                continue;
            }
            let origin = state.chi;
            for s in 1..=steps {
                let chi = origin + segment * (s as f64 / steps as f64);
                let guess = match previous {
                    Some((chi_p, lambda_p)) if chi_p != state.chi => {
                        let slope = (state.lambda - lambda_p) / (state.chi - chi_p);
                        state.lambda + slope * (chi - state.chi)
                    }
                    _ => state.lambda,
                };
                let next = self.refine(op, chi, guess, &state.vector)?;
                let overlap = inner(&state.vector, &next.vector).norm();
                if overlap < self.min_overlap {
                    return Err(crossing(chi));
                }
                previous = Some((state.chi, state.lambda));
                state = next;
            }
            out.push(state.lambda);
        }
        Ok(out)
    }

    fn refine<G: TiltedGenerator + ?Sized>(
        &self,
        op: &G,
        chi: C64,
        guess: C64,
        start: &[C64],
    ) -> Result<BranchState> {
        let norm = op.norm_estimate().max(f64::MIN_POSITIVE);
        let mut x = start.to_vec();
        let mut shift = guess;
        let mut last_change = f64::INFINITY;
        let mut lambda = guess;
        for iteration in 0..self.max_iterations {
            let mut y = x.clone();
            let mut ok = op.solve_shifted(chi, shift, &mut y) && all_finite(&y);
            if !ok {
                // Exactly singular shift: nudge it off the eigenvalue.
                let nudge = C64::new(1e-13 * (shift.norm() + norm * 1e-3), 0.0);
                y = x.clone();
                ok = op.solve_shifted(chi, shift + nudge, &mut y) && all_finite(&y);
            }
            if !ok {
                return Err(crossing(chi));
            }
            let y = phase_fixed(op, normalized(y));
            let tr = op.trace(&y);
            if tr.norm() < 1e-200 {
                return Err(crossing(chi));
            }
            let next = op.jump_functional(chi, &y) / tr;
            last_change = (next - lambda).norm();
            lambda = next;
            shift = next;
            x = y;
            let scale = lambda.norm().max(f64::MIN_POSITIVE);
            if iteration > 0 && last_change <= self.tolerance * scale {
                break;
            }
        }
        let scale = lambda.norm().max(f64::MIN_POSITIVE);
        let residual = {
            let lx = op.apply(chi, &x);
            let r: Vec<C64> = lx.iter().zip(&x).map(|(a, b)| a - lambda * b).collect();
            norm2(&r) / (norm + lambda.norm())
        };
        // Where the increments cancel to a tiny eigenvalue (e.g. at the
        // mirror point of chi = 0) only absolute accuracy is available.
        let settled = last_change <= 1e3 * self.tolerance * scale || last_change <= 1e-14 * norm;
        if !settled || !(residual <= 1e-10) {
            return Err(crossing(chi));
        }
        Ok(BranchState {
            chi,
            lambda,
            vector: x,
        })
    }
}

fn crossing(chi: C64) -> FcsError {
    FcsError::EigenvalueCrossing {
        chi_re: chi.re,
        chi_im: chi.im,
    }
}

fn all_finite(v: &[C64]) -> bool {
    v.iter().all(|x| x.re.is_finite() && x.im.is_finite())
}

fn normalized(mut v: Vec<C64>) -> Vec<C64> {
    let n = norm2(&v);
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    v
}

fn phase_fixed<G: TiltedGenerator + ?Sized>(op: &G, mut v: Vec<C64>) -> Vec<C64> {
    let tr = op.trace(&v);
    if tr.norm() > 0.0 {
        let phase = tr.conj() / tr.norm();
        v.iter_mut().for_each(|x| *x *= phase);
    }
    v
}

fn inner(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}
