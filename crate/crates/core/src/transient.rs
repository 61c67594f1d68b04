//! Transient counting statistics.
//!
//! The count-resolved populations `rho_m^{(n)}(t)` obey
//!
//! ```text
//! d/dt rho^{(n)} = L_0 rho^{(n)} + L_+ rho^{(n-1)} + L_- rho^{(n+1)}
//! ```
//!
//! where `L_+` (`L_-`) holds the emissions into (absorptions from) the counted
//! reservoir. This is a continuous-time Markov chain on `(n, m)`, which is
//! propagated by uniformization: `e^{Gt} = sum_k Poisson(k; Lambda t) P^k`
//! with the stochastic matrix `P = 1 + G/Lambda`. Every term is nonnegative,
//! so there is no cancellation and the error is the truncated Poisson tail.

use std::ops::RangeInclusive;

use nalgebra::DMatrix;

use crate::error::{invalid, FcsError, Result};
use crate::liouvillian::{CountingAssignment, LadderGenerator};
use crate::linalg::C64;
use crate::model::{stationary_distribution, ReservoirLabel, SystemParams};

/// Counted reservoir when none is given: the drain if there is one,
/// otherwise the only bath.
pub fn default_counted(params: &SystemParams) -> ReservoirLabel {
    if params.drain().is_ok() {
        ReservoirLabel::Drain
    } else {
        params.reservoirs()[0].label
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TransientOptions {
    /// `None` picks [`default_counted`].
    pub counted: Option<ReservoirLabel>,
    /// Largest expected number of jumps `Lambda dt` per uniformization step.
    pub max_jumps_per_step: f64,
    /// Probability allowed in the outermost count rows before the window grows.
    pub edge_tolerance: f64,
    /// Probability allowed to leave the window over the whole propagation,
    /// split evenly between the steps.
    pub leak_tolerance: f64,
    /// Largest number of count rows.
    pub window_cap: usize,
}

impl Default for TransientOptions {
    fn default() -> Self {
        Self {
            counted: None,
            max_jumps_per_step: 20.0,
            edge_tolerance: 1e-10,
            leak_tolerance: 1e-12,
            window_cap: 1 << 16,
        }
    }
}

/// Populations resolved by ladder state and detector count.
#[derive(Clone, Debug, PartialEq)]
pub struct NResolvedState {
    n_atoms: usize,
    n_min: i64,
    /// Row-major: `rows[(n - n_min) * (N+1) + m]`.
    rows: Vec<f64>,
    time: f64,
}

impl NResolvedState {
    /// Counter at zero, ladder populations `rho` (indexed by `k = m + N/2`),
    /// count window `[-5, N+5]`.
    pub fn from_populations(rho: &[f64]) -> Result<Self> {
        if rho.is_empty() {
            return Err(invalid("rho", "empty population vector"));
        }
        if rho.iter().any(|p| !(p.is_finite() && *p >= -1e-12)) {
            return Err(invalid("rho", "populations must be finite and nonnegative"));
        }
        let total: f64 = rho.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(invalid("rho", format!("populations sum to {total}, not 1")));
        }
        let n_atoms = rho.len() - 1;
        let n_min = -5;
        let n_max = n_atoms as i64 + 5;
        let dim = n_atoms + 1;
        let mut rows = vec![0.0; (n_max - n_min + 1) as usize * dim];
        let zero = (-n_min) as usize * dim;
        rows[zero..zero + dim].copy_from_slice(rho);
        Ok(Self {
            n_atoms,
            n_min,
            rows,
            time: 0.0,
        })
    }

    /// All atoms excited, counter at zero.
    pub fn all_excited(n_atoms: usize) -> Self {
        let mut rho = vec![0.0; n_atoms + 1];
        rho[n_atoms] = 1.0;
        Self::from_populations(&rho).expect("valid basis state")
    }

    /// Stationary ladder state, counter at zero.
    pub fn stationary(params: &SystemParams) -> Result<Self> {
        Self::from_populations(&stationary_distribution(params)?)
    }

    pub fn n_atoms(&self) -> usize {
        self.n_atoms
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    fn dim(&self) -> usize {
        self.n_atoms + 1
    }

    fn n_rows(&self) -> usize {
        self.rows.len() / self.dim()
    }

    /// Inclusive count window.
    pub fn window(&self) -> (i64, i64) {
        (self.n_min, self.n_min + self.n_rows() as i64 - 1)
    }

    /// `rho_k^{(n)}`; zero outside the window.
    pub fn population(&self, n: i64, k: usize) -> f64 {
        let (lo, hi) = self.window();
        if n < lo || n > hi || k > self.n_atoms {
            return 0.0;
        }
        self.rows[(n - lo) as usize * self.dim() + k]
    }

    pub fn total_probability(&self) -> f64 {
        self.rows.iter().sum()
    }

    /// Probability in the first and last count rows.
    pub fn edge_mass(&self) -> (f64, f64) {
        let d = self.dim();
        let first: f64 = self.rows[..d].iter().sum();
        let last: f64 = self.rows[self.rows.len() - d..].iter().sum();
        (first, last)
    }

    /// Most negative entry (roundoff only).
    pub fn min_entry(&self) -> f64 {
        self.rows.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Ladder populations summed over counts.
    pub fn ladder_populations(&self) -> Vec<f64> {
        let d = self.dim();
        let mut out = vec![0.0; d];
        for row in self.rows.chunks(d) {
            out.iter_mut().zip(row).for_each(|(a, b)| *a += b);
        }
        out
    }

    fn grow(&mut self, below: usize, above: usize) {
        let d = self.dim();
        let mut rows = vec![0.0; (self.n_rows() + below + above) * d];
        rows[below * d..below * d + self.rows.len()].copy_from_slice(&self.rows);
        self.rows = rows;
        self.n_min -= below as i64;
    }
}

/// Per-link rates split into the counted reservoir and everything else.
struct SplitRates {
    counted_up: Vec<f64>,
    counted_down: Vec<f64>,
    other_up: Vec<f64>,
    other_down: Vec<f64>,
    exit: Vec<f64>,
    lambda: f64,
}

impl SplitRates {
    fn new(gen: &LadderGenerator, counted: Option<ReservoirLabel>) -> Result<Self> {
        let n = gen.n_atoms();
        let mut s = Self {
            counted_up: vec![0.0; n],
            counted_down: vec![0.0; n],
            other_up: vec![0.0; n],
            other_down: vec![0.0; n],
            exit: vec![0.0; n + 1],
            lambda: 0.0,
        };
        if let Some(label) = counted {
            gen.reservoir_rates(label)?;
        }
        for r in gen.rates() {
            let (up, down) = if Some(r.label) == counted {
                (&mut s.counted_up, &mut s.counted_down)
            } else {
                (&mut s.other_up, &mut s.other_down)
            };
            up.iter_mut().zip(&r.up).for_each(|(a, b)| *a += b);
            down.iter_mut().zip(&r.down).for_each(|(a, b)| *a += b);
        }
        for i in 0..n {
            let up = s.counted_up[i] + s.other_up[i];
            let down = s.counted_down[i] + s.other_down[i];
            s.exit[i] += up;
            s.exit[i + 1] += down;
        }
        s.lambda = s.exit.iter().copied().fold(0.0, f64::max);
        Ok(s)
    }
}

/// Poisson weights `e^{-x} x^k / k!` until the remaining tail is negligible.
fn poisson_weights(x: f64) -> Vec<f64> {
    let mut w = vec![(-x).exp()];
    let mut cumulative = w[0];
    let mut k = 0usize;
    loop {
        k += 1;
        let next = w[k - 1] * x / k as f64;
        w.push(next);
        cumulative += next;
        if (k as f64 > x && (1.0 - cumulative < 1e-16 || next < 1e-18)) || k > 10_000 {
            break;
        }
    }
    w
}

/// One application of `P = 1 + G/Lambda` on the count-resolved chain.
/// Returns the probability pushed below/above the window.
fn step_resolved(
    rates: &SplitRates,
    dim: usize,
    input: &[f64],
    output: &mut [f64],
) -> (f64, f64) {
    let rows = input.len() / dim;
    let inv = 1.0 / rates.lambda;
    let n = dim - 1;
    output.iter_mut().for_each(|x| *x = 0.0);
    let (mut below, mut above) = (0.0, 0.0);
    for r in 0..rows {
        let base = r * dim;
        for k in 0..dim {
            let p = input[base + k];
            if p == 0.0 {
                continue;
            }
            output[base + k] += p * (1.0 - rates.exit[k] * inv);
            if k < n {
                output[base + k + 1] += p * rates.other_up[k] * inv;
                let absorbed = p * rates.counted_up[k] * inv;
                if r > 0 {
                    output[base - dim + k + 1] += absorbed;
                } else {
                    below += absorbed;
                }
            }
            if k > 0 {
                output[base + k - 1] += p * rates.other_down[k - 1] * inv;
                let emitted = p * rates.counted_down[k - 1] * inv;
                if r + 1 < rows {
                    output[base + dim + k - 1] += emitted;
                } else {
                    above += emitted;
                }
            }
        }
    }
    (below, above)
}

/// `e^{G dt} x` by uniformization. Returns leaked mass below/above.
fn uniformized(rates: &SplitRates, dim: usize, x: &[f64], dt: f64) -> (Vec<f64>, f64, f64) {
    let weights = poisson_weights(rates.lambda * dt);
    let mut acc: Vec<f64> = x.iter().map(|v| v * weights[0]).collect();
    let mut term = x.to_vec();
    let mut next = vec![0.0; x.len()];
    let (mut below, mut above) = (0.0, 0.0);
    // Mass that left the window after j steps is lost from every later term,
    // weighted by the probability of at least j+1 jumps.
    let mut tail = 1.0 - weights[0];
    for w in weights.iter().skip(1) {
        let (b, a) = step_resolved(rates, dim, &term, &mut next);
        below += b * tail;
        above += a * tail;
        tail -= w;
        std::mem::swap(&mut term, &mut next);
        acc.iter_mut().zip(&term).for_each(|(s, t)| *s += w * t);
    }
    (acc, below, above)
}

fn counted_label(params: &SystemParams, options: &TransientOptions) -> ReservoirLabel {
    options.counted.unwrap_or_else(|| default_counted(params))
}

/// Advance `state` by `duration`.
pub fn propagate_n_resolved(
    state: &NResolvedState,
    params: &SystemParams,
    duration: f64,
    options: &TransientOptions,
) -> Result<NResolvedState> {
    if !(duration.is_finite() && duration >= 0.0) {
        return Err(invalid("t", "duration must be finite and nonnegative"));
    }
    if params.n_atoms() != state.n_atoms {
        return Err(invalid("state", "atom number differs from the parameters"));
    }
    let gen = LadderGenerator::new(params);
    let rates = SplitRates::new(&gen, Some(counted_label(params, options)))?;
    let mut out = state.clone();
    out.time += duration;
    if rates.lambda == 0.0 || duration == 0.0 {
        return Ok(out);
    }
    let steps = (rates.lambda * duration / options.max_jumps_per_step).ceil().max(1.0) as usize;
    let dt = duration / steps as f64;
    let dim = state.dim();
    let budget = options.leak_tolerance / steps as f64;
    for _ in 0..steps {
        loop {
            let (next, below, above) = uniformized(&rates, dim, &out.rows, dt);
            if below > budget || above > budget {
                let width = out.n_rows();
                grow_checked(
                    &mut out,
                    if below > budget { width } else { 0 },
                    if above > budget { width } else { 0 },
                    options,
                )?;
                continue;
            }
            out.rows = next;
            break;
        }
        let (first, last) = out.edge_mass();
        if first > options.edge_tolerance || last > options.edge_tolerance {
            let width = out.n_rows();
            grow_checked(
                &mut out,
                if first > options.edge_tolerance { width } else { 0 },
                if last > options.edge_tolerance { width } else { 0 },
                options,
            )?;
        }
    }
    Ok(out)
}

fn grow_checked(
    state: &mut NResolvedState,
    below: usize,
    above: usize,
    options: &TransientOptions,
) -> Result<()> {
    if state.n_rows() + below + above > options.window_cap {
        return Err(FcsError::WindowOverflow {
            cap: options.window_cap,
        });
    }
    state.grow(below, above);
    Ok(())
}

/// Detector count distribution on a contiguous window.
#[derive(Clone, Debug, PartialEq)]
pub struct CountDistribution {
    n_min: i64,
    probabilities: Vec<f64>,
}

impl CountDistribution {
    pub fn new(n_min: i64, probabilities: Vec<f64>) -> Self {
        Self {
            n_min,
            probabilities,
        }
    }

    pub fn n_min(&self) -> i64 {
        self.n_min
    }

    pub fn n_max(&self) -> i64 {
        self.n_min + self.probabilities.len() as i64 - 1
    }

    /// `P_n`, zero outside the stored window.
    pub fn prob(&self, n: i64) -> f64 {
        if n < self.n_min || n > self.n_max() {
            return 0.0;
        }
        self.probabilities[(n - self.n_min) as usize]
    }

    pub fn iter(&self) -> impl Iterator<Item = (i64, f64)> + '_ {
        self.probabilities
            .iter()
            .enumerate()
            .map(move |(i, &p)| (self.n_min + i as i64, p))
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn total(&self) -> f64 {
        self.probabilities.iter().sum()
    }

    /// Cumulants `<<n^k>>`, `k = 1..=max_order` (at most 4).
    pub fn cumulants(&self, max_order: usize) -> Vec<f64> {
        assert!((1..=4).contains(&max_order));
        let total = self.total();
        let mean = self.iter().map(|(n, p)| n as f64 * p).sum::<f64>() / total;
        let central = |j: i32| {
            self.iter()
                .map(|(n, p)| (n as f64 - mean).powi(j) * p)
                .sum::<f64>()
                / total
        };
        let (m2, m3, m4) = (central(2), central(3), central(4));
        [mean, m2, m3, m4 - 3.0 * m2 * m2][..max_order].to_vec()
    }
}

/// `P_n(t) = sum_m rho_m^{(n)}(t)`.
pub fn pn_distribution(state: &NResolvedState) -> CountDistribution {
    let d = state.dim();
    CountDistribution {
        n_min: state.n_min,
        probabilities: state.rows.chunks(d).map(|r| r.iter().sum()).collect(),
    }
}

/// Unconditioned ladder populations `e^{L_0 t} rho`.
pub fn evolve_populations(params: &SystemParams, rho: &[f64], t: f64) -> Result<Vec<f64>> {
    if rho.len() != params.ladder_dim() {
        return Err(invalid("rho", "length must be N+1"));
    }
    if !(t.is_finite() && t >= 0.0) {
        return Err(invalid("t", "time must be finite and nonnegative"));
    }
    let gen = LadderGenerator::new(params);
    let rates = SplitRates::new(&gen, None)?;
    evolve_with(&rates, rho, t, TransientOptions::default().max_jumps_per_step)
}

fn evolve_with(rates: &SplitRates, rho: &[f64], t: f64, max_jumps: f64) -> Result<Vec<f64>> {
    if rates.lambda == 0.0 || t == 0.0 {
        return Ok(rho.to_vec());
    }
    let steps = (rates.lambda * t / max_jumps).ceil().max(1.0) as usize;
    let dt = t / steps as f64;
    let mut x = rho.to_vec();
    for _ in 0..steps {
        // a single count row: no leakage bookkeeping needed since every
        // transition is routed back into the same row
        x = uniformized(rates, rho.len(), &x, dt).0;
    }
    Ok(x)
}

/// Emission rate `d<n>/dt` into the counted reservoir after starting with all
/// atoms excited, sampled at ascending `times`.
pub fn flash_rate(
    params: &SystemParams,
    times: &[f64],
    counted: Option<ReservoirLabel>,
) -> Result<Vec<f64>> {
    if times.windows(2).any(|w| w[1] < w[0]) || times.first().is_some_and(|t| *t < 0.0) {
        return Err(invalid("times", "must be nonnegative and ascending"));
    }
    let label = counted.unwrap_or_else(|| default_counted(params));
    let gen = LadderGenerator::new(params);
    let r = gen.reservoir_rates(label)?.clone();
    let rates = SplitRates::new(&gen, None)?;
    let n = params.n_atoms();
    let mut rho = vec![0.0; n + 1];
    rho[n] = 1.0;
    let mut now = 0.0;
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        rho = evolve_with(&rates, &rho, t - now, 20.0)?;
        now = t;
        let rate: f64 = (0..n)
            .map(|i| r.down[i] * rho[i + 1] - r.up[i] * rho[i])
            .sum();
        out.push(rate);
    }
    Ok(out)
}

/// A detector that integrates counts over `resolution`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DetectorWindow {
    resolution: f64,
    count: i64,
}

impl DetectorWindow {
    pub fn new(resolution: f64, count: i64) -> Result<Self> {
        if !(resolution.is_finite() && resolution > 0.0) {
            return Err(invalid("resolution", "must be finite and positive"));
        }
        Ok(Self { resolution, count })
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn count(&self) -> i64 {
        self.count
    }
}

/// Shift between quadratures with `M` and `2M` nodes that is accepted.
pub const QUADRATURE_TOLERANCE: f64 = 1e-8;
const MAX_NODES: usize = 1 << 14;

/// `P_n^{dt}` for every `n` in `counts`:
/// `(1/2pi) int tr[e^{L(chi) dt - i n chi} rho] dchi` by the trapezoidal rule,
/// doubling the node count until the result settles.
pub fn finite_bandwidth_distribution(
    params: &SystemParams,
    rho: &[f64],
    resolution: f64,
    counts: RangeInclusive<i64>,
    counted: Option<ReservoirLabel>,
) -> Result<Vec<f64>> {
    DetectorWindow::new(resolution, 0)?;
    if rho.len() != params.ladder_dim() {
        return Err(invalid("rho", "length must be N+1"));
    }
    let label = counted.unwrap_or_else(|| default_counted(params));
    let gen = LadderGenerator::new(params);
    gen.reservoir_rates(label)?;
    let reach = counts.start().abs().max(counts.end().abs()) as usize;
    let mut nodes = 64.max(4 * (reach + 1));
    let rho_c: Vec<C64> = rho.iter().map(|&p| C64::new(p, 0.0)).collect();
    let mut samples = characteristic_samples(&gen, label, &rho_c, resolution, nodes)?;
    let mut previous = project(&samples, &counts);
    loop {
        // doubling reuses the existing nodes and adds the midpoints
        let mids = characteristic_samples_shifted(&gen, label, &rho_c, resolution, nodes)?;
        samples = samples
            .iter()
            .zip(&mids)
            .flat_map(|(a, b)| [*a, *b])
            .collect();
        nodes *= 2;
        let current = project(&samples, &counts);
        let shift = previous
            .iter()
            .zip(&current)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if shift <= QUADRATURE_TOLERANCE {
            return Ok(current);
        }
        if nodes >= MAX_NODES {
            return Err(FcsError::QuadratureUnderresolved { shift });
        }
        previous = current;
    }
}

/// [`finite_bandwidth_distribution`] for one count.
pub fn finite_bandwidth_pn(
    params: &SystemParams,
    rho: &[f64],
    window: &DetectorWindow,
    counted: Option<ReservoirLabel>,
) -> Result<f64> {
    let n = window.count;
    Ok(finite_bandwidth_distribution(params, rho, window.resolution, n..=n, counted)?[0])
}

fn node(j: usize, nodes: usize, offset: f64) -> f64 {
    -std::f64::consts::PI + 2.0 * std::f64::consts::PI * (j as f64 + offset) / nodes as f64
}

fn characteristic_samples(
    gen: &LadderGenerator,
    label: ReservoirLabel,
    rho: &[C64],
    dt: f64,
    nodes: usize,
) -> Result<Vec<(f64, C64)>> {
    (0..nodes)
        .map(|j| {
            let chi = node(j, nodes, 0.0);
            Ok((chi, propagated_trace(gen, label, rho, dt, chi)?))
        })
        .collect()
}

fn characteristic_samples_shifted(
    gen: &LadderGenerator,
    label: ReservoirLabel,
    rho: &[C64],
    dt: f64,
    nodes: usize,
) -> Result<Vec<(f64, C64)>> {
    (0..nodes)
        .map(|j| {
            let chi = node(j, nodes, 0.5);
            Ok((chi, propagated_trace(gen, label, rho, dt, chi)?))
        })
        .collect()
}

/// `tr[e^{L(chi) dt} rho]` through a dense matrix exponential.
fn propagated_trace(
    gen: &LadderGenerator,
    label: ReservoirLabel,
    rho: &[C64],
    dt: f64,
    chi: f64,
) -> Result<C64> {
    let dressed = gen.dress(&CountingAssignment::single(label, chi))?;
    let m: DMatrix<C64> = dressed.matrix().to_dense() * C64::new(dt, 0.0);
    let e = m.exp();
    let v = e * nalgebra::DVector::from_column_slice(rho);
    Ok(v.iter().sum())
}

fn project(samples: &[(f64, C64)], counts: &RangeInclusive<i64>) -> Vec<f64> {
    let m = samples.len() as f64;
    counts
        .clone()
        .map(|n| {
            samples
                .iter()
                .map(|&(chi, f)| (f * C64::from_polar(1.0, -(n as f64) * chi)).re)
                .sum::<f64>()
                / m
        })
        .collect()
}

/// Count distribution over `[t, t + resolution]` from the count-resolved
/// chain, for comparison with [`finite_bandwidth_distribution`].
pub fn windowed_distribution(
    params: &SystemParams,
    rho: &[f64],
    resolution: f64,
    options: &TransientOptions,
) -> Result<CountDistribution> {
    DetectorWindow::new(resolution, 0)?;
    let start = NResolvedState::from_populations(rho)?;
    Ok(pn_distribution(&propagate_n_resolved(&start, params, resolution, options)?))
}
