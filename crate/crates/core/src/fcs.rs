//! Stationary counting statistics: current and cumulants `C_1..C_4`.
//!
//! Two independent pipelines are provided and are expected to agree:
//!
//! * [`cumulants_eigenvalue`] differentiates the tracked eigenvalue
//!   `lambda(chi)` numerically (extrapolated central differences).
//! * [`cumulants_resolvent`] expands `tr[(z - L(s))^{-1} rho]` in the counting
//!   variable `s = i chi` and in `z` around its pole at the origin, which gives
//!   the long-time polynomials of every moment, and converts those to
//!   cumulants. Only projected solves with the singular `L(0)` are needed.

use crate::analytics::{
    current_closed_form, limit_cumulants, zero_bias_noise, LimitKind, NoiseBranch,
};
use crate::error::{FcsError, Result};
use crate::liouvillian::{
    absorption_coefficient, emission_coefficient, stationary_from_rates, LadderGenerator,
    LadderTilt,
};
use crate::linalg::C64;
use crate::model::{ReservoirLabel, SystemParams};
use crate::numdiff::{FiniteDifference, MAX_ORDER};
use crate::spectral::BranchTracker;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CumulantMethod {
    Eigenvalue,
    Resolvent,
    /// Eigenvalue route on the full product-space generator.
    FullSpace,
}

impl CumulantMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            CumulantMethod::Eigenvalue => "eigenvalue",
            CumulantMethod::Resolvent => "resolvent",
            CumulantMethod::FullSpace => "full-space",
        }
    }
}

/// Current cumulants `C_k` (rate units) with error estimates and, for the
/// resolvent route, the long-time offsets `S_k` of `<<n^k(t)>> -> C_k t + S_k`.
#[derive(Clone, Debug, PartialEq)]
pub struct CumulantSet {
    pub method: CumulantMethod,
    values: Vec<f64>,
    errors: Vec<f64>,
    shifts: Option<Vec<f64>>,
}

impl CumulantSet {
    /// Highest order stored.
    pub fn max_order(&self) -> usize {
        self.values.len()
    }

    /// `C_k`, `k` starting at 1.
    pub fn c(&self, k: usize) -> f64 {
        self.values[k - 1]
    }

    pub fn get(&self, k: usize) -> Option<f64> {
        k.checked_sub(1).and_then(|i| self.values.get(i)).copied()
    }

    pub fn error(&self, k: usize) -> f64 {
        self.errors[k - 1]
    }

    pub fn shift(&self, k: usize) -> Option<f64> {
        self.shifts.as_ref().map(|s| s[k - 1])
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn errors(&self) -> &[f64] {
        &self.errors
    }

    pub fn shifts(&self) -> Option<&[f64]> {
        self.shifts.as_deref()
    }
}

fn check_order(max_order: usize) -> Result<()> {
    if !(1..=MAX_ORDER).contains(&max_order) {
        return Err(FcsError::InvalidParameter {
            name: "orders",
            reason: format!("cumulant order must be in 1..={MAX_ORDER}, got {max_order}"),
        });
    }
    Ok(())
}

/// Null vector of the `chi = 0` generator, normalized to unit trace.
pub fn stationary_state_numeric(gen: &LadderGenerator) -> Result<Vec<f64>> {
    let n = gen.n_atoms();
    if (0..n).any(|i| gen.down_rate(i) <= 0.0) {
        return Err(FcsError::NonUniqueStationaryState);
    }
    let rho = stationary_from_rates(gen);
    let m = gen.matrix();
    let x: Vec<C64> = rho.iter().map(|&r| C64::new(r, 0.0)).collect();
    let residual = crate::linalg::norm2(&m.matvec(&x));
    if !(residual <= 1e-12 * m.norm_inf().max(1.0)) {
        return Err(FcsError::NonUniqueStationaryState);
    }
    Ok(rho)
}

/// Stationary photon current into the counted reservoir:
/// emission into it minus absorption from it.
///
/// Counting the drain gives a positive current for `n_S > n_D`; counting
/// the source gives the same magnitude with the opposite sign.
pub fn current_numeric(params: &SystemParams, counted: ReservoirLabel) -> Result<f64> {
    let gen = LadderGenerator::new(params);
    let rho = stationary_state_numeric(&gen)?;
    let r = params.reservoir(counted)?;
    let n = params.n_atoms();
    let emitted: f64 = (0..=n).map(|k| emission_coefficient(n, k) * rho[k]).sum();
    let absorbed: f64 = (0..=n).map(|k| absorption_coefficient(n, k) * rho[k]).sum();
    Ok(r.gamma * (1.0 + r.occupation) * emitted - r.gamma * r.occupation * absorbed)
}

/// Settings for the eigenvalue-derivative pipeline.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EigenvalueOptions {
    pub differences: FiniteDifference,
    pub tracker: BranchTracker,
    /// Relative noise assumed on each `lambda(chi)` sample.
    pub sample_noise: f64,
    /// Halve the step (up to this many times) while the estimated error of
    /// any cumulant exceeds `target` relative to its size. Zero disables.
    pub refinements: usize,
    pub target: f64,
}

impl Default for EigenvalueOptions {
    fn default() -> Self {
        Self {
            differences: FiniteDifference::default(),
            tracker: BranchTracker::default(),
            sample_noise: 1e-14,
            refinements: 6,
            target: 1e-9,
        }
    }
}

/// Cumulants `C_k = (-i d/dchi)^k lambda(chi)` at `chi = 0` from
/// extrapolated finite differences of the tracked eigenvalue.
pub fn cumulants_eigenvalue(
    params: &SystemParams,
    counted: ReservoirLabel,
    max_order: usize,
    options: &EigenvalueOptions,
) -> Result<CumulantSet> {
    check_order(max_order)?;
    let gen = LadderGenerator::new(params);
    let tilt = LadderTilt::counting(&gen, counted)?;
    cumulants_from_branch(&tilt, max_order, options)
}

/// Shared by the ladder and full-space routes.
pub(crate) fn cumulants_from_branch<G: crate::spectral::TiltedGenerator + ?Sized>(
    op: &G,
    max_order: usize,
    options: &EigenvalueOptions,
) -> Result<CumulantSet> {
    let mut best: Option<(f64, Attempt)> = None;
    let mut last_err = None;
    let mut fd = options.differences;
    for _ in 0..=options.refinements {
        match differentiate(op, max_order, options, fd) {
            Ok(attempt) => {
                let worst = attempt.worst_relative_error();
                let done = worst <= options.target;
                let improved = best.as_ref().map_or(true, |(w, _)| worst < *w);
                if improved {
                    best = Some((worst, attempt));
                }
                // Once smaller steps stop helping, roundoff has taken over.
                if done || !improved {
                    break;
                }
            }
            // Large steps can leave the disc where the branch is isolated.
            Err(e @ FcsError::EigenvalueCrossing { .. }) => last_err = Some(e),
            Err(e) => return Err(e),
        }
        fd.step *= 0.5;
    }
    let attempt = match (best, last_err) {
        (Some((worst, attempt)), _) if worst <= 1e-4 => attempt,
        (_, Some(e)) => return Err(e),
        (Some((_, attempt)), None) => {
            attempt.diagnose()?;
            return Err(FcsError::StepTooLarge { step: attempt.step });
        }
        (None, None) => unreachable!("at least one attempt is made"),
    };
    attempt.diagnose()?;
    Ok(CumulantSet {
        method: CumulantMethod::Eigenvalue,
        values: attempt.values,
        errors: attempt.errors,
        shifts: None,
    })
}

struct Attempt {
    step: f64,
    values: Vec<f64>,
    errors: Vec<f64>,
    roundoff: Vec<f64>,
    truncation: Vec<(f64, f64)>,
}

impl Attempt {
    fn scale(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).fold(f64::MIN_POSITIVE, f64::max)
    }

    /// Errors measured against `max(|C_k|, 1e-3 max_j |C_j|)`, so that
    /// cumulants vanishing by symmetry do not demand absolute accuracy.
    fn worst_relative_error(&self) -> f64 {
        let floor = 1e-3 * self.scale();
        self.values
            .iter()
            .zip(&self.errors)
            .map(|(v, e)| e / v.abs().max(floor))
            .fold(0.0, f64::max)
    }

    fn diagnose(&self) -> Result<()> {
        let scale = self.scale();
        for (k, &(trunc, previous)) in self.truncation.iter().enumerate() {
            if self.roundoff[k] > 1e-4 * scale {
                return Err(FcsError::StepTooSmall {
                    step: self.step,
                    estimate: self.roundoff[k],
                });
            }
            if trunc > previous && trunc > 1e-6 * scale {
                return Err(FcsError::StepTooLarge { step: self.step });
            }
        }
        Ok(())
    }
}

fn differentiate<G: crate::spectral::TiltedGenerator + ?Sized>(
    op: &G,
    max_order: usize,
    options: &EigenvalueOptions,
    fd: FiniteDifference,
) -> Result<Attempt> {
    let xs = fd.abscissae();
    let pos: Vec<C64> = xs.iter().map(|&x| C64::new(x, 0.0)).collect();
    let neg: Vec<C64> = xs.iter().map(|&x| C64::new(-x, 0.0)).collect();
    let lambda_pos = options.tracker.track(op, &pos)?;
    let lambda_neg = options.tracker.track(op, &neg)?;
    let noise = options.sample_noise
        * lambda_pos
            .iter()
            .chain(&lambda_neg)
            .map(|l| l.norm())
            .fold(0.0, f64::max);
    let derivs = fd.derivatives(C64::default(), &lambda_pos, &lambda_neg, max_order);

    let mut attempt = Attempt {
        step: fd.step,
        values: Vec::with_capacity(max_order),
        errors: Vec::with_capacity(max_order),
        roundoff: Vec::with_capacity(max_order),
        truncation: Vec::with_capacity(max_order),
    };
    for (k, d) in derivs.iter().enumerate() {
        // (-i)^{k+1}
        let phase = C64::new(0.0, -1.0).powu(k as u32 + 1);
        let c = phase * d.value;
        let round = noise * d.noise_gain;
        attempt.values.push(c.re);
        attempt.errors.push(d.truncation + round + c.im.abs() + f64::MIN_POSITIVE);
        attempt.roundoff.push(round);
        attempt.truncation.push((d.truncation, d.previous_truncation));
    }
    Ok(attempt)
}

/// Highest `z` power kept in the Laurent expansions.
const TOP_POWER: i32 = MAX_ORDER as i32 + 1;

/// Vector-valued Laurent series in `z` truncated at `z^TOP_POWER`.
#[derive(Clone, Debug)]
struct LaurentVec {
    low: i32,
    coeffs: Vec<Vec<f64>>,
}

impl LaurentVec {
    fn zero(dim: usize, low: i32) -> Self {
        let len = (TOP_POWER - low + 1) as usize;
        Self {
            low,
            coeffs: vec![vec![0.0; dim]; len],
        }
    }

    fn powers(&self) -> impl Iterator<Item = (i32, &Vec<f64>)> {
        self.coeffs.iter().enumerate().map(move |(i, c)| (self.low + i as i32, c))
    }

    fn add_at(&mut self, power: i32, v: &[f64], factor: f64) {
        if power > TOP_POWER {
            return;
        }
        assert!(power >= self.low);
        let slot = &mut self.coeffs[(power - self.low) as usize];
        slot.iter_mut().zip(v).for_each(|(a, b)| *a += factor * b);
    }
}

/// Projected solves against the singular stationary generator.
struct Resolvent<'a> {
    gen: &'a LadderGenerator,
    rho: Vec<f64>,
    up: Vec<f64>,
    down: Vec<f64>,
}

impl<'a> Resolvent<'a> {
    fn new(gen: &'a LadderGenerator) -> Result<Self> {
        let rho = stationary_state_numeric(gen)?;
        let n = gen.n_atoms();
        Ok(Self {
            gen,
            rho,
            up: (0..n).map(|i| gen.up_rate(i)).collect(),
            down: (0..n).map(|i| gen.down_rate(i)).collect(),
        })
    }

    /// Drazin inverse applied to `y`: the unique `x` with `L0 x = Q y` and
    /// `1^T x = 0`, where `Q = 1 - rho 1^T`.
    ///
    /// For a birth-death generator `(L0 x)_k = J_{k-1} - J_k` with link flux
    /// `J_k = up_k x_k - down_k x_{k+1}`, so the fluxes follow from partial
    /// sums of `Q y` and `x` from a forward sweep whose amplification ratio
    /// `up_k / down_k = n_M/(1+n_M)` stays below one.
    fn drazin(&self, y: &[f64]) -> Result<Vec<f64>> {
        let n = self.gen.n_atoms();
        let total: f64 = y.iter().sum();
        let w: Vec<f64> = y.iter().zip(&self.rho).map(|(a, r)| a - r * total).collect();
        let mut x = vec![0.0; n + 1];
        let mut flux = 0.0;
        for k in 0..n {
            flux -= w[k];
            x[k + 1] = (self.up[k] * x[k] - flux) / self.down[k];
        }
        let shift: f64 = x.iter().sum();
        x.iter_mut().zip(&self.rho).for_each(|(a, r)| *a -= r * shift);
        if x.iter().any(|v| !v.is_finite()) {
            return Err(FcsError::SingularSolve("non-finite projected solution".into()));
        }
        // residual of L0 x = w
        let scale = self.gen.matrix().norm_inf();
        let lx = self.apply_l0(&x);
        let res = lx.iter().zip(&w).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let xmax = x.iter().map(|v| v.abs()).fold(0.0, f64::max);
        let wmax = w.iter().map(|v| v.abs()).fold(0.0, f64::max);
        let ymax = y.iter().map(|v| v.abs()).fold(0.0, f64::max);
        if res > 1e-9 * (scale * xmax + wmax) + 1e-13 * ymax {
            return Err(FcsError::SingularSolve(format!(
                "projected residual {res:e} exceeds threshold"
            )));
        }
        Ok(x)
    }

    fn apply_l0(&self, x: &[f64]) -> Vec<f64> {
        let n = self.gen.n_atoms();
        let mut out = vec![0.0; n + 1];
        for k in 0..n {
            let j = self.up[k] * x[k] - self.down[k] * x[k + 1];
            out[k] -= j;
            out[k + 1] += j;
        }
        out
    }

    /// `(z - L0)^{-1} V = P V / z - sum_{j>=0} z^j D^{j+1} V`.
    fn apply(&self, v: &LaurentVec) -> Result<LaurentVec> {
        let dim = self.rho.len();
        let mut out = LaurentVec::zero(dim, v.low - 1);
        for (p, coeff) in v.powers() {
            if coeff.iter().all(|&c| c == 0.0) {
                continue;
            }
            let trace: f64 = coeff.iter().sum();
            out.add_at(p - 1, &self.rho, trace);
            let mut d = self.drazin(coeff)?;
            let mut power = p;
            while power <= TOP_POWER {
                out.add_at(power, &d, -1.0);
                d = self.drazin(&d)?;
                power += 1;
            }
        }
        Ok(out)
    }
}

/// `(-i d/dchi)^j L(chi)` at zero for the counted reservoir:
/// emission jumps plus `(-1)^j` absorption jumps.
fn jump_derivative(gen: &LadderGenerator, counted: ReservoirLabel, j: usize, v: &[f64]) -> Result<Vec<f64>> {
    let r = gen.reservoir_rates(counted)?;
    let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
    let n = gen.n_atoms();
    let mut out = vec![0.0; n + 1];
    for i in 0..n {
        out[i] += r.down[i] * v[i + 1];
        out[i + 1] += sign * r.up[i] * v[i];
    }
    Ok(out)
}

/// Polynomials in `t`, lowest power first.
mod poly {
    pub fn mul(a: &[f64], b: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; a.len() + b.len() - 1];
        for (i, x) in a.iter().enumerate() {
            for (j, y) in b.iter().enumerate() {
                out[i + j] += x * y;
            }
        }
        out
    }

    pub fn axpy(acc: &mut Vec<f64>, factor: f64, x: &[f64]) {
        if acc.len() < x.len() {
            acc.resize(x.len(), 0.0);
        }
        acc.iter_mut().zip(x).for_each(|(a, b)| *a += factor * b);
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

/// Long-time polynomial parts of the raw moments `<n^k(t)>`, `k = 0..=max_order`,
/// for a detector started at zero in the stationary state.
pub fn moment_polynomials(
    params: &SystemParams,
    counted: ReservoirLabel,
    max_order: usize,
) -> Result<Vec<Vec<f64>>> {
    check_order(max_order)?;
    let gen = LadderGenerator::new(params);
    gen.reservoir_rates(counted)?;
    let res = Resolvent::new(&gen)?;
    let dim = gen.dim();

    // X(s, z) = (z - L(s))^{-1} rho solves X = R rho + R dL(s) X with
    // dL(s) = sum_j s^j / j! L_j, order by order in s.
    let mut x_orders: Vec<LaurentVec> = Vec::with_capacity(max_order + 1);
    let mut x0 = LaurentVec::zero(dim, -1);
    x0.add_at(-1, &res.rho, 1.0);
    x_orders.push(x0);
    for a in 1..=max_order {
        let low = -(a as i32) - 1;
        let mut rhs = LaurentVec::zero(dim, low + 1);
        for j in 1..=a {
            let inv_fact = 1.0 / factorial(j);
            for (p, coeff) in x_orders[a - j].powers() {
                if coeff.iter().all(|&c| c == 0.0) {
                    continue;
                }
                let lv = jump_derivative(&gen, counted, j, coeff)?;
                rhs.add_at(p, &lv, inv_fact);
            }
        }
        x_orders.push(res.apply(&rhs)?);
    }

    // <n^a(t)> = a! * sum_q c_{a,-q} t^{q-1}/(q-1)!, c = coefficients of 1^T X_a.
    let mut moments = Vec::with_capacity(max_order + 1);
    for (a, xa) in x_orders.iter().enumerate() {
        let mut poly = vec![0.0; a + 1];
        for (p, coeff) in xa.powers() {
            if p >= 0 {
                continue;
            }
            let q = (-p) as usize;
            if q > a + 1 {
                continue;
            }
            let trace: f64 = coeff.iter().sum();
            poly[q - 1] += factorial(a) * trace / factorial(q - 1);
        }
        moments.push(poly);
    }
    Ok(moments)
}

/// Third cumulant from moments:
/// `<<n^3>> = <n^3> - 3 <<n>> <<n^2>> - <<n>>^3`.
pub fn third_cumulant(m3: &[f64], k1: &[f64], k2: &[f64]) -> Vec<f64> {
    let mut out = m3.to_vec();
    poly::axpy(&mut out, -3.0, &poly::mul(k1, k2));
    poly::axpy(&mut out, -1.0, &poly::mul(k1, &poly::mul(k1, k1)));
    out
}

/// Cumulant polynomials from moment polynomials (`moments[0] = [1]`).
pub fn cumulants_from_moments(moments: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut kappa: Vec<Vec<f64>> = vec![vec![0.0]];
    for n in 1..moments.len() {
        let next = if n == 3 {
            third_cumulant(&moments[3], &kappa[1], &kappa[2])
        } else {
            let mut acc = moments[n].clone();
            for m in 1..n {
                let term = poly::mul(&kappa[m], &moments[n - m]);
                poly::axpy(&mut acc, -binomial(n - 1, m - 1), &term);
            }
            acc
        };
        kappa.push(next);
    }
    kappa
}

/// Cumulants and shifts from the Laurent expansion of the resolvent.
pub fn cumulants_resolvent(
    params: &SystemParams,
    counted: ReservoirLabel,
    max_order: usize,
) -> Result<CumulantSet> {
    let moments = moment_polynomials(params, counted, max_order)?;
    let kappa = cumulants_from_moments(&moments);
    let mut values = Vec::with_capacity(max_order);
    let mut shifts = Vec::with_capacity(max_order);
    let mut errors = Vec::with_capacity(max_order);
    for k in 1..=max_order {
        let p = &kappa[k];
        let c = p.get(1).copied().unwrap_or(0.0);
        let s = p[0];
        // Powers t^2.. cancel analytically; what is left is numerical error,
        // measured against the size of the terms that cancelled.
        let leftover = p.iter().skip(2).map(|v| v.abs()).fold(0.0, f64::max);
        let size = moments[k].iter().map(|v| v.abs()).fold(0.0, f64::max);
        values.push(c);
        shifts.push(s);
        errors.push(leftover + 64.0 * f64::EPSILON * (size + c.abs()) + f64::MIN_POSITIVE);
    }
    Ok(CumulantSet {
        method: CumulantMethod::Resolvent,
        values,
        errors,
        shifts: Some(shifts),
    })
}

/// One comparison in a cross-validation run.
#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub quantity: String,
    pub value: f64,
    pub reference: f64,
    pub discrepancy: f64,
    pub tolerance: f64,
}

impl Check {
    pub fn passed(&self) -> bool {
        self.discrepancy <= self.tolerance
    }
}

#[derive(Clone, Debug)]
pub struct CrossValidation {
    pub eigenvalue: CumulantSet,
    pub resolvent: CumulantSet,
    pub checks: Vec<Check>,
}

impl CrossValidation {
    /// Largest method-to-method relative discrepancy.
    pub fn max_method_discrepancy(&self) -> f64 {
        self.checks
            .iter()
            .filter(|c| c.quantity.starts_with("method"))
            .map(|c| c.discrepancy)
            .fold(0.0, f64::max)
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(Check::passed)
    }

    pub fn first_failure(&self) -> Option<&Check> {
        self.checks.iter().find(|c| !c.passed())
    }
}

/// Method-agreement tolerance.
pub const METHOD_TOLERANCE: f64 = 1e-6;

fn relative(value: f64, reference: f64, floor: f64) -> f64 {
    (value - reference).abs() / reference.abs().max(floor)
}

/// Run both cumulant pipelines on the drain and compare them with each other
/// and with whichever closed-form limit applies.
pub fn cross_validate(params: &SystemParams) -> Result<CrossValidation> {
    let counted = ReservoirLabel::Drain;
    let eig = cumulants_eigenvalue(params, counted, 4, &EigenvalueOptions::default())?;
    let res = cumulants_resolvent(params, counted, 4)?;
    let scale = res.values().iter().map(|v| v.abs()).fold(f64::MIN_POSITIVE, f64::max);
    // Cumulants that vanish by symmetry are compared on the scale of the
    // largest one.
    let floor = 1e-3 * scale;
    let mut checks = Vec::new();
    for k in 1..=4 {
        checks.push(Check {
            quantity: format!("method C{k}"),
            value: eig.c(k),
            reference: res.c(k),
            discrepancy: relative(eig.c(k), res.c(k), floor),
            tolerance: METHOD_TOLERANCE,
        });
    }
    let current = current_closed_form(params)?;
    checks.push(Check {
        quantity: "closed-form C1".into(),
        value: res.c(1),
        reference: current,
        discrepancy: relative(res.c(1), current, floor),
        tolerance: 1e-9,
    });

    let s = params.source()?;
    let d = params.drain()?;
    let n = params.n_atoms() as f64;
    if d.occupation == 0.0 && s.occupation <= 1e-3 && s.occupation * n <= 0.1 {
        for k in 1..=4 {
            let want = limit_cumulants(LimitKind::PoissonSmallBias, params, k as u32)?;
            checks.push(Check {
                quantity: format!("poisson C{k}"),
                value: res.c(k),
                reference: want,
                discrepancy: relative(res.c(k), want, 0.0),
                tolerance: 1e-2,
            });
        }
    }
    if s.occupation >= 1e3 * n * (n + 2.0) * (1.0 + d.occupation) {
        for k in 1..=4 {
            let want = limit_cumulants(LimitKind::LargeBias, params, k as u32)?;
            checks.push(Check {
                quantity: format!("large-bias C{k}"),
                value: res.c(k),
                reference: want,
                discrepancy: relative(res.c(k), want, 0.0),
                tolerance: 1e-2,
            });
        }
    }
    if s.occupation == d.occupation && s.gamma == d.gamma && s.occupation >= 100.0 * n {
        let (c2, c4) = zero_bias_noise(params.n_atoms(), s.occupation, s.gamma, NoiseBranch::Large)?;
        for (k, want) in [(2, c2), (4, c4)] {
            checks.push(Check {
                quantity: format!("zero-bias C{k}"),
                value: res.c(k),
                reference: want,
                discrepancy: relative(res.c(k), want, 0.0),
                tolerance: 5e-2,
            });
        }
    }
    let report = CrossValidation {
        eigenvalue: eig,
        resolvent: res,
        checks,
    };
    Ok(report)
}

/// [`cross_validate`], turned into an error when any check fails.
pub fn cross_validate_strict(params: &SystemParams) -> Result<CrossValidation> {
    let report = cross_validate(params)?;
    if let Some(bad) = report.first_failure() {
        return Err(FcsError::Validation {
            quantity: bad.quantity.clone(),
            detail: format!(
                "{} vs reference {} (relative {:.3e} > {:.1e})",
                bad.value, bad.reference, bad.discrepancy, bad.tolerance
            ),
        });
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::liouvillian::CountingAssignment;
    use approx::assert_relative_eq;

    fn tt(n: usize, gs: f64, ns: f64, gd: f64, nd: f64) -> SystemParams {
        SystemParams::two_terminal(n, gs, ns, gd, nd).unwrap()
    }

    #[test]
    fn stationary_numeric_examples() {
        let p = tt(2, 1.0, 2.0, 1.0, 0.0);
        let rho = stationary_state_numeric(&LadderGenerator::new(&p)).unwrap();
        for (a, b) in rho.iter().zip([4.0 / 7.0, 2.0 / 7.0, 1.0 / 7.0]) {
            assert_relative_eq!(*a, b, max_relative = 1e-14);
        }
        let p = tt(4, 1.0, 0.0, 1.0, 0.0);
        assert_eq!(stationary_state_numeric(&LadderGenerator::new(&p)).unwrap(), vec![1.0, 0.0, 0.0, 0.0, 0.0]);
        let p = tt(3, 0.0, 1.0, 0.0, 1.0);
        assert_eq!(
            stationary_state_numeric(&LadderGenerator::new(&p)),
            Err(FcsError::NonUniqueStationaryState)
        );
    }

    #[test]
    fn current_examples() {
        let p = tt(2, 1.0, 2.0, 1.0, 0.0);
        assert_relative_eq!(current_numeric(&p, ReservoirLabel::Drain).unwrap(), 6.0 / 7.0, max_relative = 1e-14);
        assert_relative_eq!(current_numeric(&p, ReservoirLabel::Source).unwrap(), -6.0 / 7.0, max_relative = 1e-14);
        let p = tt(5, 0.3, 1.1, 0.8, 1.1);
        assert!(current_numeric(&p, ReservoirLabel::Drain).unwrap().abs() < 1e-12);
    }

    /// Analytic derivatives of the 2x2 dominant eigenvalue:
    /// lambda = (T + sqrt(T^2 - 4 D))/2 with T constant and D(chi) linear in
    /// e^{+-i chi}; first and second derivatives in closed form.
    fn two_level_c1_c2(p: &SystemParams) -> (f64, f64) {
        let g = LadderGenerator::new(p);
        let d = g.reservoir_rates(ReservoirLabel::Drain).unwrap();
        let s = g.reservoir_rates(ReservoirLabel::Source).unwrap();
        let (a_s, a_d, e_s, e_d) = (s.up[0], d.up[0], s.down[0], d.down[0]);
        let up = a_s + a_d;
        let down = e_s + e_d;
        // lambda solves lambda^2 + (up+down) lambda + up*down - u(chi) w(chi) = 0
        // with u = a_s + a_d e^{-i chi}, w = e_s + e_d e^{i chi}.
        // Let g(chi) = u w - up*down; lambda = (-(up+down) + sqrt((up+down)^2 + 4 g))/2.
        // Derivatives in s = i chi: g' = a_s e_d - a_d e_s, g'' = a_s e_d + a_d e_s at 0.
        let t = up + down;
        let g1 = a_s * e_d - a_d * e_s;
        let g2 = a_s * e_d + a_d * e_s;
        // lambda(s) with root r(g) = (-t + sqrt(t^2 + 4g))/2: r' = 1/t, r'' = -2/t^3.
        let c1 = g1 / t;
        let c2 = g2 / t - 2.0 * g1 * g1 / t.powi(3);
        (c1, c2)
    }

    #[test]
    fn eigenvalue_route_matches_two_level_closed_form() {
        for (gs, ns, gd, nd) in [(1.0, 0.5, 1.0, 0.0), (0.3, 2.0, 1.4, 0.7), (2.0, 0.01, 0.5, 0.2)] {
            let p = tt(1, gs, ns, gd, nd);
            let (c1, c2) = two_level_c1_c2(&p);
            let eig = cumulants_eigenvalue(&p, ReservoirLabel::Drain, 2, &EigenvalueOptions::default()).unwrap();
            assert!((eig.c(1) - c1).abs() < 1e-8 * c1.abs().max(1e-3), "{} vs {}", eig.c(1), c1);
            assert!((eig.c(2) - c2).abs() < 1e-8 * c2.abs().max(1e-3), "{} vs {}", eig.c(2), c2);
            let res = cumulants_resolvent(&p, ReservoirLabel::Drain, 2).unwrap();
            assert_relative_eq!(res.c(1), c1, max_relative = 1e-12);
            assert_relative_eq!(res.c(2), c2, max_relative = 1e-12);
        }
    }

    #[test]
    fn poisson_regime_both_routes() {
        let p = tt(3, 1.0, 1e-3, 1.0, 0.0);
        let want = 0.5 * 3.0 * 1e-3;
        let eig = cumulants_eigenvalue(&p, ReservoirLabel::Drain, 4, &EigenvalueOptions::default()).unwrap();
        let res = cumulants_resolvent(&p, ReservoirLabel::Drain, 4).unwrap();
        for k in 1..=4 {
            assert!((eig.c(k) - want).abs() < 1e-2 * want, "eig C{k} = {}", eig.c(k));
            assert!((res.c(k) - want).abs() < 1e-2 * want, "res C{k} = {}", res.c(k));
        }
    }

    #[test]
    fn zero_bias_odd_cumulants_vanish() {
        let p = tt(4, 1.0, 0.7, 1.0, 0.7);
        let eig = cumulants_eigenvalue(&p, ReservoirLabel::Drain, 4, &EigenvalueOptions::default()).unwrap();
        let res = cumulants_resolvent(&p, ReservoirLabel::Drain, 4).unwrap();
        for set in [&eig, &res] {
            assert!(set.c(1).abs() <= 1e-9, "{:?}", set);
            assert!(set.c(3).abs() <= 1e-9, "{:?}", set);
            assert!(set.c(2) > 0.0);
        }
    }

    #[test]
    fn printed_third_cumulant_relation_matches_recursion() {
        // moments of a Poisson(mu t) variable: cumulants all mu t
        let mu = 0.37;
        let k = [vec![0.0], vec![0.0, mu], vec![0.0, mu], vec![0.0, mu]];
        // m1 = k1, m2 = k2 + k1^2, m3 = k3 + 3 k1 k2 + k1^3
        let m1 = k[1].clone();
        let m2 = {
            let mut a = k[2].clone();
            poly::axpy(&mut a, 1.0, &poly::mul(&k[1], &k[1]));
            a
        };
        let m3 = {
            let mut a = k[3].clone();
            poly::axpy(&mut a, 3.0, &poly::mul(&k[1], &k[2]));
            poly::axpy(&mut a, 1.0, &poly::mul(&k[1], &poly::mul(&k[1], &k[1])));
            a
        };
        let kap = cumulants_from_moments(&[vec![1.0], m1, m2, m3.clone()]);
        for (got, want) in kap[3].iter().zip(&k[3]) {
            assert!((got - want).abs() < 1e-15);
        }
        assert!(kap[3].iter().skip(2).all(|c| c.abs() < 1e-15));
        let printed = third_cumulant(&m3, &k[1], &k[2]);
        assert!((printed[1] - mu).abs() < 1e-15);
    }

    #[test]
    fn large_bias_third_cumulant() {
        // n_D = 0, N = 4: C3 -> Gamma_D N(N+2)/6 = 4
        let p = tt(4, 1.0, 1e6, 1.0, 0.0);
        let res = cumulants_resolvent(&p, ReservoirLabel::Drain, 4).unwrap();
        assert!((res.c(3) - 4.0).abs() / 4.0 < 1e-2, "{}", res.c(3));
    }

    #[test]
    fn resolvent_first_cumulant_is_the_current() {
        for p in [tt(2, 1.0, 2.0, 1.0, 0.0), tt(9, 0.4, 3.3, 1.6, 0.2), tt(30, 1.0, 50.0, 2.0, 1.0)] {
            let res = cumulants_resolvent(&p, ReservoirLabel::Drain, 1).unwrap();
            assert_relative_eq!(res.c(1), current_closed_form(&p).unwrap(), max_relative = 1e-10);
        }
    }

    #[test]
    fn counting_the_source_flips_odd_cumulants() {
        let p = tt(3, 0.8, 1.5, 1.2, 0.3);
        let d = cumulants_resolvent(&p, ReservoirLabel::Drain, 4).unwrap();
        let s = cumulants_resolvent(&p, ReservoirLabel::Source, 4).unwrap();
        for k in 1..=4 {
            let sign = if k % 2 == 1 { -1.0 } else { 1.0 };
            assert_relative_eq!(s.c(k), sign * d.c(k), max_relative = 1e-9);
        }
    }

    #[test]
    fn order_limits() {
        let p = tt(2, 1.0, 1.0, 1.0, 0.0);
        assert!(cumulants_resolvent(&p, ReservoirLabel::Drain, 5).is_err());
        assert!(cumulants_resolvent(&p, ReservoirLabel::Drain, 0).is_err());
        let single = SystemParams::single_bath(2, 1.0, 0.5).unwrap();
        assert!(matches!(
            cumulants_resolvent(&single, ReservoirLabel::Drain, 2),
            Err(FcsError::UnknownReservoir(_))
        ));
    }

    #[test]
    fn tiny_step_is_flagged() {
        let p = tt(6, 1.0, 2.0, 1.0, 0.5);
        let opts = EigenvalueOptions {
            differences: FiniteDifference { step: 1e-6, levels: 4 },
            refinements: 0,
            ..Default::default()
        };
        let err = cumulants_eigenvalue(&p, ReservoirLabel::Drain, 4, &opts).unwrap_err();
        assert!(matches!(err, FcsError::StepTooSmall { .. }), "{err:?}");
    }

    #[test]
    fn eigenvalue_agrees_with_direct_dressing() {
        let p = tt(5, 1.0, 0.9, 0.7, 0.1);
        let g = LadderGenerator::new(&p);
        let tilt = LadderTilt::counting(&g, ReservoirLabel::Drain).unwrap();
        let tracked = BranchTracker::default().track(&tilt, &[C64::new(0.3, 0.0)]).unwrap()[0];
        let direct = g
            .dress(&CountingAssignment::single(ReservoirLabel::Drain, 0.3))
            .unwrap()
            .dominant_eigenvalue()
            .unwrap();
        assert!((tracked - direct).norm() < 1e-13);
    }
}
