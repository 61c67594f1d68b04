//! Closed-form reference results for currents and cumulants.
//!
//! These are the values every numerical path is checked against.

use crate::error::{invalid, FcsError, Result};
use crate::liouvillian::absorption_coefficient;
use crate::model::{classical_rate, effective_occupation, SystemParams};

fn check_occupation(n_m: f64) -> Result<()> {
    if !(n_m >= 0.0 && n_m.is_finite()) {
        return Err(invalid("n_M", format!("must be finite and >= 0, got {n_m}")));
    }
    Ok(())
}

fn check_atoms(n_atoms: usize) -> Result<()> {
    if n_atoms == 0 {
        return Err(invalid("N", "at least one emitter is required"));
    }
    Ok(())
}

/// Degree of collectivity `sigma_N(n_M)`.
///
/// Evaluated as `<A>/(1 + n_M)`, the mean absorption coefficient over the
/// geometric ladder state. This is algebraically identical to the quotient
/// `[(N - 2n)(1+n)^{N+1} + n^{N+1}(2 + N + 2n)] / [(1+n)^{N+1} - n^{N+1}]`
/// but is a sum of positive terms, so it keeps full relative precision in
/// the collective regime where the quotient cancels catastrophically.
pub fn sigma_n(n_atoms: usize, n_m: f64) -> Result<f64> {
    check_atoms(n_atoms)?;
    check_occupation(n_m)?;
    let ratio = n_m / (1.0 + n_m);
    let (mut num, mut den, mut w) = (0.0, 0.0, 1.0);
    for k in 0..=n_atoms {
        num += w * absorption_coefficient(n_atoms, k);
        den += w;
        w *= ratio;
    }
    Ok(num / den / (1.0 + n_m))
}

/// `sigma_N` straight from the rational expression, with `(1+n)^{N+1}`
/// divided out. Accurate while `n_M` is not large compared with `N`.
pub fn sigma_n_quotient(n_atoms: usize, n_m: f64) -> Result<f64> {
    check_atoms(n_atoms)?;
    check_occupation(n_m)?;
    let n = n_atoms as f64;
    let q = if n_m == 0.0 {
        0.0
    } else {
        ((n + 1.0) * (n_m / (1.0 + n_m)).ln()).exp()
    };
    Ok(((n - 2.0 * n_m) + q * (2.0 + n + 2.0 * n_m)) / (1.0 - q))
}

/// Stationary source-to-drain photon current `(n_S - n_D) gamma_cl sigma_N`.
pub fn current_closed_form(params: &SystemParams) -> Result<f64> {
    let gamma_cl = classical_rate(params)?;
    let bath = effective_occupation(params)?;
    let bias = params.source()?.occupation - params.drain()?.occupation;
    Ok(bias * gamma_cl * sigma_n(params.n_atoms(), bath.n_m)?)
}

/// Large-`N` scaling form `N [coth(N / 2n_M) - 2 n_M / N]`.
pub fn sigma_asymptotic(n_atoms: usize, n_m: f64) -> Result<f64> {
    check_atoms(n_atoms)?;
    if !(n_m > 0.0) {
        return Err(FcsError::Domain {
            what: "sigma_asymptotic (n_M must be > 0)",
            value: n_m,
        });
    }
    let n = n_atoms as f64;
    let x = n / (2.0 * n_m);
    Ok(n * coth_minus_inverse(x))
}

/// `coth(x) - 1/x`, by series below `x = 0.1`.
fn coth_minus_inverse(x: f64) -> f64 {
    if x < 0.1 {
        // x/3 - x^3/45 + 2x^5/945 - x^7/4725 + 2x^9/93555 - 1382 x^11/638512875
        let x2 = x * x;
        x * (1.0 / 3.0
            + x2 * (-1.0 / 45.0
                + x2 * (2.0 / 945.0
                    + x2 * (-1.0 / 4725.0
                        + x2 * (2.0 / 93555.0 + x2 * (-1382.0 / 638512875.0))))))
    } else {
        1.0 / x.tanh() - 1.0 / x
    }
}

/// Transport regime by the ratio `n_M / N`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Regime {
    Linear,
    Crossover,
    Collective,
}

impl Regime {
    pub fn as_str(&self) -> &'static str {
        match self {
            Regime::Linear => "linear",
            Regime::Crossover => "crossover",
            Regime::Collective => "collective",
        }
    }
}

/// `n_M / N` thresholds separating the regimes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RegimeThresholds {
    pub linear_below: f64,
    pub collective_above: f64,
}

impl Default for RegimeThresholds {
    fn default() -> Self {
        Self {
            linear_below: 0.1,
            collective_above: 10.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScalingRegimeReport {
    pub sigma_n: f64,
    pub regime: Regime,
    /// The scaling form at the same `(N, n_M)`; `N` when `n_M = 0`.
    pub asymptote: f64,
}

pub fn scaling_regime(
    n_atoms: usize,
    n_m: f64,
    thresholds: RegimeThresholds,
) -> Result<ScalingRegimeReport> {
    let sigma = sigma_n(n_atoms, n_m)?;
    let ratio = n_m / n_atoms as f64;
    let regime = if ratio < thresholds.linear_below {
        Regime::Linear
    } else if ratio > thresholds.collective_above {
        Regime::Collective
    } else {
        Regime::Crossover
    };
    let asymptote = if n_m > 0.0 {
        sigma_asymptotic(n_atoms, n_m)?
    } else {
        n_atoms as f64
    };
    Ok(ScalingRegimeReport {
        sigma_n: sigma,
        regime,
        asymptote,
    })
}

/// Linear-response thermal conductance between two baths at temperature `T`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ThermalConductance {
    /// `Omega * dI/dT_S` at `T_S = T_D = T`, exact.
    pub exact: f64,
    /// `gamma_cl (Omega/T) N(N+2)/6`, valid for `T >> Omega`.
    pub high_temperature: f64,
    /// `gamma_cl (Omega/T)^2 N e^{-Omega/T}`, valid for `T << Omega`.
    pub low_temperature: f64,
}

pub fn thermal_conductance(
    n_atoms: usize,
    omega: f64,
    temperature: f64,
    gamma_source: f64,
    gamma_drain: f64,
) -> Result<ThermalConductance> {
    check_atoms(n_atoms)?;
    if !(temperature > 0.0 && omega > 0.0) {
        return Err(invalid("temperature", "temperature and omega must be > 0"));
    }
    let sum = gamma_source + gamma_drain;
    if !(sum > 0.0) {
        return Err(FcsError::DegenerateCouplings);
    }
    let gamma_cl = gamma_source * gamma_drain / sum;
    let x = omega / temperature;
    let occ = 1.0 / x.exp_m1();
    // dn/dT = (x/T) n (1 + n)
    let dn_dt = x / temperature * occ * (1.0 + occ);
    let n = n_atoms as f64;
    Ok(ThermalConductance {
        exact: omega * gamma_cl * sigma_n(n_atoms, occ)? * dn_dt,
        high_temperature: gamma_cl * x * n * (n + 2.0) / 6.0,
        low_temperature: gamma_cl * x * x * n * (-x).exp(),
    })
}

/// Long-time moments `<n^k>` of photons emitted by `N` initially excited
/// emitters into a single bath with `e^{beta Omega} = (1 + n_B)/n_B`.
pub fn equilibrium_moments(n_atoms: usize, beta_omega: f64, k: u32) -> Result<f64> {
    check_atoms(n_atoms)?;
    if k == 0 {
        return Err(invalid("k", "moment order must be >= 1"));
    }
    if beta_omega.is_nan() {
        return Err(invalid("beta_omega", "NaN"));
    }
    if beta_omega == f64::INFINITY {
        return Ok((n_atoms as f64).powi(k as i32));
    }
    // Weights e^{m x} shifted by the largest exponent.
    let top = if beta_omega >= 0.0 { n_atoms as f64 * beta_omega } else { 0.0 };
    let (mut num, mut den) = (0.0, 0.0);
    for m in 0..=n_atoms {
        let w = (m as f64 * beta_omega - top).exp();
        num += (m as f64).powi(k as i32) * w;
        den += w;
    }
    Ok(num / den)
}

/// High-temperature limit of the emitted-photon cumulants `(k1, k2, k3, k4)`.
pub fn equilibrium_cumulants_high_t(n_atoms: usize) -> Result<[f64; 4]> {
    check_atoms(n_atoms)?;
    let n = n_atoms as f64;
    let s = n * (n + 2.0);
    Ok([n / 2.0, s / 12.0, 0.0, -s * (s + 2.0) / 120.0])
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NoiseBranch {
    /// Leading terms of the expansion in `n_E`.
    Small,
    /// Asymptote for `n_E >> N`.
    Large,
}

/// Validity limits for the zero-bias series.
pub const SMALL_BRANCH_MAX_OCCUPATION: f64 = 0.1;
pub const LARGE_BRANCH_MIN_RATIO: f64 = 10.0;

/// Zero-bias noise `(C2, C4)` for symmetric couplings `Gamma_S = Gamma_D =
/// gamma` and equal occupations `n_E`.
pub fn zero_bias_noise(
    n_atoms: usize,
    n_e: f64,
    gamma: f64,
    branch: NoiseBranch,
) -> Result<(f64, f64)> {
    check_atoms(n_atoms)?;
    check_occupation(n_e)?;
    let n = n_atoms as f64;
    match branch {
        NoiseBranch::Small => {
            if n_e > SMALL_BRANCH_MAX_OCCUPATION {
                return Err(FcsError::BranchMisuse {
                    formula: "small-occupation noise series",
                    detail: format!("n_E = {n_e} > {SMALL_BRANCH_MAX_OCCUPATION}"),
                });
            }
            let den = (1.0 + n_e).powf(n + 1.0) - n_e.powf(n + 1.0);
            let pre = gamma * n_e * (1.0 + n_e);
            let c2 = pre / den * (n + (n + 2.0) * (n - 1.0) * n_e);
            let c4 = pre / den.powi(3) * (n + (3.0 * n * (n + 2.0) - 8.0) * n_e);
            Ok((c2, c4))
        }
        NoiseBranch::Large => {
            if n_e < LARGE_BRANCH_MIN_RATIO * n {
                return Err(FcsError::BranchMisuse {
                    formula: "large-occupation noise asymptote",
                    detail: format!("n_E = {n_e} < {LARGE_BRANCH_MIN_RATIO} N"),
                });
            }
            let s = n * (n + 2.0);
            Ok((gamma * n_e * s / 6.0, gamma * n_e * s * (s + 12.0) / 360.0))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LimitKind {
    /// `n_D = 0`, small `n_S`: Poissonian transfer at rate `gamma_cl N n_S`.
    PoissonSmallBias,
    /// `n_S -> infinity`: two counter-propagating Poisson processes.
    LargeBias,
}

/// Cumulant `C_k` in one of the analytically solvable bias limits.
pub fn limit_cumulants(kind: LimitKind, params: &SystemParams, k: u32) -> Result<f64> {
    if !(1..=4).contains(&k) {
        return Err(invalid("k", "cumulant order must be in 1..=4"));
    }
    let n = params.n_atoms() as f64;
    match kind {
        LimitKind::PoissonSmallBias => {
            Ok(classical_rate(params)? * n * params.source()?.occupation)
        }
        LimitKind::LargeBias => {
            let d = params.drain()?;
            let even = if k % 2 == 0 { 1.0 } else { 0.0 };
            Ok(d.gamma * n * (n + 2.0) / 6.0 * (1.0 + 2.0 * d.occupation * even))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn sigma_examples() {
        for n in [1, 2, 5, 40] {
            assert_relative_eq!(sigma_n(n, 0.0).unwrap(), n as f64);
        }
        for nm in [0.0, 1e-3, 0.5, 1.0, 7.0, 1e3, 1e6] {
            assert_relative_eq!(sigma_n(1, nm).unwrap() * (1.0 + 2.0 * nm), 1.0, max_relative = 1e-13);
        }
        assert_relative_eq!(sigma_n(2, 1.0).unwrap(), 6.0 / 7.0, max_relative = 1e-15);
    }

    #[test]
    fn sigma_forms_agree_where_quotient_is_well_conditioned() {
        for n in [1usize, 2, 3, 8, 30] {
            for nm in [0.0, 0.01, 0.3, 1.0, 2.5] {
                assert_relative_eq!(
                    sigma_n(n, nm).unwrap(),
                    sigma_n_quotient(n, nm).unwrap(),
                    max_relative = 1e-11
                );
            }
        }
    }

    #[test]
    fn sigma_increases_with_size() {
        for nm in [0.0, 0.1, 1.0, 10.0, 1e4] {
            let mut prev = 0.0;
            for n in 1..=128 {
                let s = sigma_n(n, nm).unwrap();
                assert!(s > prev, "n_M={nm}, N={n}");
                prev = s;
            }
        }
    }

    #[test]
    fn current_examples() {
        let p = SystemParams::two_terminal(2, 1.0, 2.0, 1.0, 0.0).unwrap();
        assert_relative_eq!(current_closed_form(&p).unwrap(), 6.0 / 7.0, max_relative = 1e-15);
        let p = SystemParams::two_terminal(5, 0.3, 1.7, 2.0, 1.7).unwrap();
        assert_eq!(current_closed_form(&p).unwrap(), 0.0);
    }

    #[test]
    fn large_bias_current_saturates() {
        // n_S -> infinity, n_D = 0: I -> Gamma_D N(N+2)/6
        let p = SystemParams::two_terminal(8, 1.0, 1e6, 1.0, 0.0).unwrap();
        let i = current_closed_form(&p).unwrap();
        assert_relative_eq!(i, 80.0 / 6.0, max_relative = 1e-4);
    }

    #[test]
    fn bias_antisymmetry() {
        let p = SystemParams::two_terminal(6, 0.7, 3.0, 1.9, 0.4).unwrap();
        let a = current_closed_form(&p).unwrap();
        let b = current_closed_form(&p.swapped().unwrap()).unwrap();
        assert_relative_eq!(a, -b, max_relative = 1e-14);
    }

    #[test]
    fn asymptote_limits() {
        assert_relative_eq!(sigma_asymptotic(50, 1e-4).unwrap(), 50.0, max_relative = 1e-5);
        let n = 10usize;
        let nm = 1e5;
        assert_relative_eq!(
            sigma_asymptotic(n, nm).unwrap(),
            (n * n) as f64 / (6.0 * nm),
            max_relative = 1e-8
        );
        // The scaling form misses sigma_N by O(1/N): 2.25% at N = 64 and
        // 0.58% at N = 256 for n_M = N.
        let gap = |n: usize| {
            let s = sigma_n(n, n as f64).unwrap();
            (s - sigma_asymptotic(n, n as f64).unwrap()).abs() / s
        };
        assert!((0.0224..0.0226).contains(&gap(64)), "{}", gap(64));
        assert!((0.0057..0.0058).contains(&gap(256)), "{}", gap(256));
        assert!(gap(1024) < 0.0015);
        // series/direct branches meet continuously
        let lo = coth_minus_inverse(0.1 - 1e-12) + 1e-12 / 3.0;
        let hi = coth_minus_inverse(0.1);
        assert_relative_eq!(lo, hi, max_relative = 1e-12);
    }

    #[test]
    fn regime_tags() {
        let t = RegimeThresholds::default();
        assert_eq!(scaling_regime(10, 0.5, t).unwrap().regime, Regime::Linear);
        assert_eq!(scaling_regime(10, 10.0, t).unwrap().regime, Regime::Crossover);
        assert_eq!(scaling_regime(10, 1e3, t).unwrap().regime, Regime::Collective);
        assert_eq!(scaling_regime(10, 0.0, t).unwrap().asymptote, 10.0);
    }

    /// Finite difference in T of the closed-form current.
    fn conductance_fd(n: usize, t: f64) -> f64 {
        let dt = 1e-5 * t;
        let cur = |ts: f64| {
            let p = SystemParams::thermal(n, 1.0, 1.0, ts, 1.0, t).unwrap();
            current_closed_form(&p).unwrap()
        };
        (cur(t + dt) - cur(t - dt)) / (2.0 * dt)
    }

    #[test]
    fn thermal_conductance_branches() {
        let hot = thermal_conductance(4, 1.0, 100.0, 1.0, 1.0).unwrap();
        assert_relative_eq!(hot.exact, conductance_fd(4, 100.0), max_relative = 1e-6);
        assert!((hot.exact - hot.high_temperature).abs() / hot.high_temperature < 0.05);

        let cold = thermal_conductance(4, 1.0, 0.05, 1.0, 1.0).unwrap();
        assert_relative_eq!(cold.exact, conductance_fd(4, 0.05), max_relative = 1e-5);
        assert!((cold.exact - cold.low_temperature).abs() / cold.low_temperature < 0.10);

        let k8 = thermal_conductance(8, 1.0, 100.0, 1.0, 1.0).unwrap().high_temperature;
        let k2 = thermal_conductance(2, 1.0, 100.0, 1.0, 1.0).unwrap().high_temperature;
        assert_relative_eq!(k8 / k2, 10.0, max_relative = 1e-14);
    }

    #[test]
    fn equilibrium_moment_examples() {
        assert_relative_eq!(equilibrium_moments(1, 2f64.ln(), 1).unwrap(), 2.0 / 3.0, max_relative = 1e-15);
        assert_relative_eq!(equilibrium_moments(7, 800.0, 3).unwrap(), 343.0, max_relative = 1e-15);
        assert_eq!(equilibrium_moments(7, f64::INFINITY, 2).unwrap(), 49.0);
        // flat weights
        let brute: f64 = (0..=5).map(|m| (m * m) as f64).sum::<f64>() / 6.0;
        assert_relative_eq!(equilibrium_moments(5, 0.0, 2).unwrap(), brute, max_relative = 1e-15);
    }

    /// Cumulants of the uniform distribution on {0..=n} by enumeration.
    fn uniform_cumulants(n: usize) -> [f64; 4] {
        let xs: Vec<f64> = (0..=n).map(|m| m as f64).collect();
        let len = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / len;
        let mu = |p: i32| xs.iter().map(|x| (x - mean).powi(p)).sum::<f64>() / len;
        [mean, mu(2), mu(3), mu(4) - 3.0 * mu(2) * mu(2)]
    }

    #[test]
    fn high_temperature_cumulants() {
        let c = equilibrium_cumulants_high_t(2).unwrap();
        for (a, b) in c.iter().zip([1.0, 2.0 / 3.0, 0.0, -2.0 / 3.0]) {
            assert_relative_eq!(*a, b, epsilon = 1e-15);
        }
        let c = equilibrium_cumulants_high_t(1).unwrap();
        for (a, b) in c.iter().zip([0.5, 0.25, 0.0, -0.125]) {
            assert_relative_eq!(*a, b, epsilon = 1e-15);
        }
        for n in 1..=20 {
            let want = uniform_cumulants(n);
            let got = equilibrium_cumulants_high_t(n).unwrap();
            for k in 0..4 {
                assert!((got[k] - want[k]).abs() <= 1e-10 * want[k].abs().max(1.0));
            }
        }
    }

    #[test]
    fn zero_bias_examples() {
        let (c2, c4) = zero_bias_noise(2, 100.0, 1.0, NoiseBranch::Large).unwrap();
        assert_relative_eq!(c2, 4.0 / 3.0 * 100.0, max_relative = 1e-15);
        assert_relative_eq!(c4, 4.0 / 9.0 * 100.0, max_relative = 1e-15);
        let (c2, _) = zero_bias_noise(3, 1e-8, 1.0, NoiseBranch::Small).unwrap();
        assert_relative_eq!(c2, 3.0 * 1e-8, max_relative = 1e-6);
        assert!(matches!(
            zero_bias_noise(3, 0.5, 1.0, NoiseBranch::Small),
            Err(FcsError::BranchMisuse { .. })
        ));
        assert!(matches!(
            zero_bias_noise(3, 5.0, 1.0, NoiseBranch::Large),
            Err(FcsError::BranchMisuse { .. })
        ));
    }

    #[test]
    fn limit_examples() {
        let p = SystemParams::two_terminal(3, 1.0, 0.01, 1.0, 0.0).unwrap();
        for k in 1..=4 {
            assert_relative_eq!(limit_cumulants(LimitKind::PoissonSmallBias, &p, k).unwrap(), 0.015, max_relative = 1e-14);
        }
        let p = SystemParams::two_terminal(2, 1.0, 1e6, 1.0, 0.0).unwrap();
        for k in 1..=4 {
            assert_relative_eq!(limit_cumulants(LimitKind::LargeBias, &p, k).unwrap(), 4.0 / 3.0, max_relative = 1e-15);
        }
        let p = SystemParams::two_terminal(2, 1.0, 1e6, 1.0, 1.0).unwrap();
        let c: Vec<f64> = (1..=4).map(|k| limit_cumulants(LimitKind::LargeBias, &p, k).unwrap()).collect();
        assert_relative_eq!(c[0], 4.0 / 3.0, max_relative = 1e-15);
        assert_relative_eq!(c[1], 4.0, max_relative = 1e-15);
        assert_relative_eq!(c[2], 4.0 / 3.0, max_relative = 1e-15);
        assert_relative_eq!(c[3], 4.0, max_relative = 1e-15);
    }
}
