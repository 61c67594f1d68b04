//! The collective master equation restricted to the maximal-spin ladder.
//!
//! On populations of `|j, m>` (`j = N/2`) the collective jump operators only
//! connect neighbouring ladder states, so the generator is a tridiagonal
//! birth-death matrix. Every link rate is kept split by reservoir and by
//! direction so that counting fields can be attached afterwards.
//!
//! Counting convention: a photon emitted into a counted reservoir advances the
//! detector count by one and carries `e^{+i chi}`; a photon absorbed from it
//! carries `e^{-i chi}`.

use crate::error::{FcsError, Result};
use crate::linalg::{exp_m1, Tridiagonal, C64};
use crate::model::{ReservoirLabel, SystemParams};
use crate::spectral::{BranchTracker, TiltedGenerator};

/// `|<m+1|J+|m>|^2 = j(j+1) - m(m+1)` for ladder offset `k = m + j`.
pub fn absorption_coefficient(n_atoms: usize, k: usize) -> f64 {
    if k >= n_atoms {
        return 0.0;
    }
    ((n_atoms - k) * (k + 1)) as f64
}

/// `|<m-1|J-|m>|^2 = j(j+1) - m(m-1)` for ladder offset `k = m + j`.
pub fn emission_coefficient(n_atoms: usize, k: usize) -> f64 {
    if k == 0 || k > n_atoms {
        return 0.0;
    }
    (k * (n_atoms + 1 - k)) as f64
}

/// Link rates of one reservoir. Link `i` joins ladder states `i` and `i+1`.
#[derive(Clone, Debug, PartialEq)]
pub struct ReservoirRates {
    pub label: ReservoirLabel,
    /// `i -> i+1`, absorption of a photon from the reservoir.
    pub up: Vec<f64>,
    /// `i+1 -> i`, emission of a photon into the reservoir.
    pub down: Vec<f64>,
}

/// Real rate generator of the ladder populations, split per reservoir.
#[derive(Clone, Debug, PartialEq)]
pub struct LadderGenerator {
    n_atoms: usize,
    rates: Vec<ReservoirRates>,
}

/// Counting fields attached to reservoirs. Reservoirs that are not listed
/// are uncounted (`chi = 0`). Complex values are allowed so the generator
/// can be continued off the real axis.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CountingAssignment {
    fields: Vec<(ReservoirLabel, C64)>,
}

impl CountingAssignment {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn single(label: ReservoirLabel, chi: f64) -> Self {
        Self::single_complex(label, C64::new(chi, 0.0))
    }

    pub fn single_complex(label: ReservoirLabel, chi: C64) -> Self {
        Self {
            fields: vec![(label, chi)],
        }
    }

    pub fn with(mut self, label: ReservoirLabel, chi: C64) -> Self {
        match self.fields.iter_mut().find(|(l, _)| *l == label) {
            Some(entry) => entry.1 = chi,
            None => self.fields.push((label, chi)),
        }
        self
    }

    pub fn chi(&self, label: ReservoirLabel) -> C64 {
        self.fields
            .iter()
            .find(|(l, _)| *l == label)
            .map(|(_, c)| *c)
            .unwrap_or_default()
    }

    pub fn fields(&self) -> &[(ReservoirLabel, C64)] {
        &self.fields
    }
}

impl LadderGenerator {
    pub fn new(params: &SystemParams) -> Self {
        let n = params.n_atoms();
        let rates = params
            .reservoirs()
            .iter()
            .map(|r| ReservoirRates {
                label: r.label,
                up: (0..n)
                    .map(|i| r.absorption_rate() * absorption_coefficient(n, i))
                    .collect(),
                down: (0..n)
                    .map(|i| r.emission_rate() * emission_coefficient(n, i + 1))
                    .collect(),
            })
            .collect();
        Self { n_atoms: n, rates }
    }

    pub fn n_atoms(&self) -> usize {
        self.n_atoms
    }

    pub fn dim(&self) -> usize {
        self.n_atoms + 1
    }

    pub fn rates(&self) -> &[ReservoirRates] {
        &self.rates
    }

    pub fn reservoir_rates(&self, label: ReservoirLabel) -> Result<&ReservoirRates> {
        self.rates
            .iter()
            .find(|r| r.label == label)
            .ok_or_else(|| FcsError::UnknownReservoir(label.to_string()))
    }

    /// Total `i -> i+1` rate on link `i`.
    pub fn up_rate(&self, link: usize) -> f64 {
        self.rates.iter().map(|r| r.up[link]).sum()
    }

    /// Total `i+1 -> i` rate on link `i`.
    pub fn down_rate(&self, link: usize) -> f64 {
        self.rates.iter().map(|r| r.down[link]).sum()
    }

    /// Column-stochastic real generator at `chi = 0` (`d rho/dt = L rho`).
    pub fn matrix(&self) -> Tridiagonal {
        let n = self.n_atoms;
        let up: Vec<f64> = (0..n).map(|i| self.up_rate(i)).collect();
        let down: Vec<f64> = (0..n).map(|i| self.down_rate(i)).collect();
        let diag = (0..=n)
            .map(|k| {
                let out_up = if k < n { up[k] } else { 0.0 };
                let out_down = if k > 0 { down[k - 1] } else { 0.0 };
                C64::new(-(out_up + out_down), 0.0)
            })
            .collect();
        Tridiagonal::new(
            up.into_iter().map(|x| C64::new(x, 0.0)).collect(),
            diag,
            down.into_iter().map(|x| C64::new(x, 0.0)).collect(),
        )
    }

    /// Attach counting fields to the jump terms.
    pub fn dress(&self, assign: &CountingAssignment) -> Result<CountedGenerator> {
        for (label, _) in assign.fields() {
            self.reservoir_rates(*label)?;
        }
        let directions: Vec<C64> = self.rates.iter().map(|r| assign.chi(r.label)).collect();
        Ok(CountedGenerator::from_directions(self.clone(), directions))
    }

    /// Column sums of the `chi = 0` generator.
    pub fn column_sums(&self) -> Vec<f64> {
        let m = self.matrix();
        (0..self.dim())
            .map(|k| {
                let mut s = m.diag[k].re;
                if k + 1 < self.dim() {
                    s += m.lower[k].re;
                }
                if k > 0 {
                    s += m.upper[k - 1].re;
                }
                s
            })
            .collect()
    }
}

pub fn build_generator(params: &SystemParams) -> LadderGenerator {
    LadderGenerator::new(params)
}

pub fn dress_with_counting(
    gen: &LadderGenerator,
    assign: &CountingAssignment,
) -> Result<CountedGenerator> {
    gen.dress(assign)
}

/// The generator `L(chi)` with the counting phases applied.
///
/// The dressed matrix is kept alongside its difference from `L(0)`, which is
/// assembled directly from `e^{+-i chi} - 1` so that small-`chi` quantities do
/// not suffer cancellation against the large diagonal.
#[derive(Clone, Debug)]
pub struct CountedGenerator {
    base: LadderGenerator,
    /// Per-reservoir counting field (in reservoir order of `base`).
    chi: Vec<C64>,
    matrix: Tridiagonal,
}

impl CountedGenerator {
    fn from_directions(base: LadderGenerator, chi: Vec<C64>) -> Self {
        let matrix = dressed_matrix(&base, &chi, C64::new(1.0, 0.0));
        Self { base, chi, matrix }
    }

    pub fn matrix(&self) -> &Tridiagonal {
        &self.matrix
    }

    pub fn base(&self) -> &LadderGenerator {
        &self.base
    }

    pub fn dim(&self) -> usize {
        self.base.dim()
    }

    /// Coefficients of `det(L(chi) - lambda)` in ascending powers of lambda.
    pub fn characteristic_polynomial(&self) -> Vec<C64> {
        self.matrix.characteristic_polynomial()
    }

    /// `det(L(chi) - lambda)` evaluated directly.
    pub fn characteristic_value(&self, lambda: C64) -> C64 {
        self.matrix.shifted_determinant(lambda)
    }

    /// Eigenvalue continuously connected to `0` at `chi = 0`, tracked along
    /// the straight path `s * chi`, `s` in `[0, 1]`.
    pub fn dominant_eigenvalue(&self) -> Result<C64> {
        self.dominant_eigenvalue_with(&BranchTracker::default())
    }

    pub fn dominant_eigenvalue_with(&self, tracker: &BranchTracker) -> Result<C64> {
        // L depends on chi only through e^{i chi}: wrap the real parts into
        // (-pi, pi] so the path from the origin is as short as possible.
        let wrapped: Vec<C64> = self.chi.iter().map(|&c| wrap_phase(c)).collect();
        let length = wrapped.iter().map(|c| c.norm()).fold(0.0, f64::max);
        let tilt = LadderTilt::new(&self.base, wrapped);
        let values = tracker.track_path(&tilt, &[C64::new(1.0, 0.0)], length)?;
        Ok(values[0])
    }
}

fn wrap_phase(c: C64) -> C64 {
    use std::f64::consts::PI;
    let re = c.re - 2.0 * PI * ((c.re + PI) / (2.0 * PI)).floor();
    let re = if re <= -PI { re + 2.0 * PI } else { re };
    C64::new(re, c.im)
}

/// `L` with every counted reservoir's field multiplied by `scale`.
fn dressed_matrix(base: &LadderGenerator, chi: &[C64], scale: C64) -> Tridiagonal {
    let mut m = base.matrix();
    let (lower, upper) = jump_deltas(base, chi, scale);
    for i in 0..base.n_atoms() {
        m.lower[i] += lower[i];
        m.upper[i] += upper[i];
    }
    m
}

/// `L(chi) - L(0)` on the two off-diagonal bands.
fn jump_deltas(base: &LadderGenerator, chi: &[C64], scale: C64) -> (Vec<C64>, Vec<C64>) {
    let n = base.n_atoms();
    let mut lower = vec![C64::default(); n];
    let mut upper = vec![C64::default(); n];
    for (r, &c) in base.rates().iter().zip(chi) {
        if c == C64::default() {
            continue;
        }
        let i_chi = C64::i() * c * scale;
        let absorb = exp_m1(-i_chi);
        let emit = exp_m1(i_chi);
        for i in 0..n {
            lower[i] += absorb * r.up[i];
            upper[i] += emit * r.down[i];
        }
    }
    (lower, upper)
}

/// Ladder generator seen as a one-parameter family `L(s * chi_dir)`.
#[derive(Clone, Debug)]
pub struct LadderTilt<'a> {
    base: &'a LadderGenerator,
    directions: Vec<C64>,
    stationary: Vec<f64>,
}

impl<'a> LadderTilt<'a> {
    /// `directions[a]` multiplies the path coordinate for reservoir `a`.
    pub fn new(base: &'a LadderGenerator, directions: Vec<C64>) -> Self {
        let stationary = stationary_from_rates(base);
        Self {
            base,
            directions,
            stationary,
        }
    }

    /// Count a single reservoir with unit weight.
    pub fn counting(base: &'a LadderGenerator, label: ReservoirLabel) -> Result<Self> {
        base.reservoir_rates(label)?;
        let directions = base
            .rates()
            .iter()
            .map(|r| {
                if r.label == label {
                    C64::new(1.0, 0.0)
                } else {
                    C64::default()
                }
            })
            .collect();
        Ok(Self::new(base, directions))
    }

    pub fn matrix_at(&self, chi: C64) -> Tridiagonal {
        dressed_matrix(self.base, &self.directions, chi)
    }
}

/// Stationary ladder state built from the detailed-balance ratios of the
/// actual link rates.
pub(crate) fn stationary_from_rates(base: &LadderGenerator) -> Vec<f64> {
    let n = base.n_atoms();
    let mut p = Vec::with_capacity(n + 1);
    let mut w = 1.0;
    p.push(w);
    for i in 0..n {
        let down = base.down_rate(i);
        w = if down > 0.0 { w * base.up_rate(i) / down } else { 0.0 };
        p.push(w);
    }
    // Rescale before normalizing in case the ratios overflow.
    let max = p.iter().cloned().fold(0.0, f64::max);
    if !max.is_finite() {
        return geometric_fallback(base);
    }
    let total: f64 = p.iter().sum();
    p.iter_mut().for_each(|x| *x /= total);
    p
}

fn geometric_fallback(base: &LadderGenerator) -> Vec<f64> {
    let n = base.n_atoms();
    let mut logw = vec![0.0; n + 1];
    for i in 0..n {
        logw[i + 1] = logw[i] + base.up_rate(i).ln() - base.down_rate(i).ln();
    }
    let max = logw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut p: Vec<f64> = logw.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = p.iter().sum();
    p.iter_mut().for_each(|x| *x /= total);
    p
}

impl TiltedGenerator for LadderTilt<'_> {
    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn stationary(&self) -> Vec<C64> {
        self.stationary.iter().map(|&x| C64::new(x, 0.0)).collect()
    }

    fn trace(&self, v: &[C64]) -> C64 {
        v.iter().sum()
    }

    fn apply(&self, chi: C64, v: &[C64]) -> Vec<C64> {
        self.matrix_at(chi).matvec(v)
    }

    fn solve_shifted(&self, chi: C64, shift: C64, rhs: &mut [C64]) -> bool {
        self.matrix_at(chi).factor_shifted(shift).solve(rhs)
    }

    fn jump_functional(&self, chi: C64, v: &[C64]) -> C64 {
        // 1^T (L(chi) - L(0)) v: the lower band entry of link i lands in
        // row i+1, the upper one in row i; the trace just sums them.
        let (lower, upper) = jump_deltas(self.base, &self.directions, chi);
        (0..self.base.n_atoms())
            .map(|i| lower[i] * v[i] + upper[i] * v[i + 1])
            .sum()
    }

    fn norm_estimate(&self) -> f64 {
        self.base.matrix().norm_inf()
    }
}
