//! Scenario parameters, reservoir occupations and the stationary ladder state.
//!
//! Units follow `hbar = k_B = 1`. Rates are expressed in whatever reference
//! rate the caller picks; nothing here assumes a particular scale.
//!
//! Ladder states `|j, m>` with `j = N/2` are stored by the integer offset
//! `k = m + N/2`, so `k = 0` is the collective ground state and `k = N` the
//! fully excited state.

use std::fmt;

use crate::error::{invalid, FcsError, Result};

/// Role of a reservoir in a scenario.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ReservoirLabel {
    Source,
    Drain,
    /// The only bath of a single-reservoir (equilibration / Dicke decay) setup.
    Single,
}

impl fmt::Display for ReservoirLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ReservoirLabel::Source => "source",
            ReservoirLabel::Drain => "drain",
            ReservoirLabel::Single => "single",
        })
    }
}

/// Coupling rate and photon occupation of one bosonic reservoir at the
/// transition frequency.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReservoirParams {
    pub label: ReservoirLabel,
    /// Single-emitter spontaneous emission rate into this reservoir.
    pub gamma: f64,
    /// Mean photon occupation at the transition frequency.
    pub occupation: f64,
}

impl ReservoirParams {
    pub fn new(label: ReservoirLabel, gamma: f64, occupation: f64) -> Result<Self> {
        if !(gamma >= 0.0 && gamma.is_finite()) {
            return Err(invalid("gamma", format!("must be finite and >= 0, got {gamma}")));
        }
        if !(occupation >= 0.0 && occupation.is_finite()) {
            return Err(invalid(
                "occupation",
                format!("must be finite and >= 0, got {occupation}"),
            ));
        }
        Ok(Self {
            label,
            gamma,
            occupation,
        })
    }

    /// Total rate for exciting one emitter out of this reservoir.
    pub(crate) fn absorption_rate(&self) -> f64 {
        self.gamma * self.occupation
    }

    /// Total rate for one emitter to emit into this reservoir.
    pub(crate) fn emission_rate(&self) -> f64 {
        self.gamma * (1.0 + self.occupation)
    }
}

/// The complete description of a scenario: `N` identical two-level emitters
/// with splitting `omega`, coupled to one or two reservoirs.
#[derive(Clone, Debug, PartialEq)]
pub struct SystemParams {
    n_atoms: usize,
    omega: f64,
    reservoirs: Vec<ReservoirParams>,
}

impl SystemParams {
    pub fn new(n_atoms: usize, omega: f64, reservoirs: Vec<ReservoirParams>) -> Result<Self> {
        if n_atoms == 0 {
            return Err(invalid("N", "at least one emitter is required"));
        }
        if !(omega > 0.0 && omega.is_finite()) {
            return Err(invalid("omega", format!("must be finite and > 0, got {omega}")));
        }
        if reservoirs.is_empty() || reservoirs.len() > 2 {
            return Err(invalid(
                "reservoirs",
                format!("expected 1 or 2 reservoirs, got {}", reservoirs.len()),
            ));
        }
        if reservoirs.len() == 2 && reservoirs[0].label == reservoirs[1].label {
            return Err(invalid("reservoirs", "labels must be unique"));
        }
        for r in &reservoirs {
            ReservoirParams::new(r.label, r.gamma, r.occupation)?;
        }
        Ok(Self {
            n_atoms,
            omega,
            reservoirs,
        })
    }

    /// Source/drain scenario with `omega = 1`.
    pub fn two_terminal(
        n_atoms: usize,
        gamma_source: f64,
        n_source: f64,
        gamma_drain: f64,
        n_drain: f64,
    ) -> Result<Self> {
        Self::new(
            n_atoms,
            1.0,
            vec![
                ReservoirParams::new(ReservoirLabel::Source, gamma_source, n_source)?,
                ReservoirParams::new(ReservoirLabel::Drain, gamma_drain, n_drain)?,
            ],
        )
    }

    /// Single bath scenario with `omega = 1`.
    pub fn single_bath(n_atoms: usize, gamma: f64, occupation: f64) -> Result<Self> {
        Self::new(
            n_atoms,
            1.0,
            vec![ReservoirParams::new(ReservoirLabel::Single, gamma, occupation)?],
        )
    }

    /// Source/drain scenario between thermal baths at temperatures `t_source`
    /// and `t_drain`.
    pub fn thermal(
        n_atoms: usize,
        omega: f64,
        gamma_source: f64,
        t_source: f64,
        gamma_drain: f64,
        t_drain: f64,
    ) -> Result<Self> {
        let occ = |t: f64| {
            if !(t > 0.0) {
                return Err(invalid("temperature", format!("must be > 0, got {t}")));
            }
            thermal_occupation(1.0 / t, omega)
        };
        Self::new(
            n_atoms,
            omega,
            vec![
                ReservoirParams::new(ReservoirLabel::Source, gamma_source, occ(t_source)?)?,
                ReservoirParams::new(ReservoirLabel::Drain, gamma_drain, occ(t_drain)?)?,
            ],
        )
    }

    pub fn with_omega(mut self, omega: f64) -> Result<Self> {
        if !(omega > 0.0 && omega.is_finite()) {
            return Err(invalid("omega", format!("must be finite and > 0, got {omega}")));
        }
        self.omega = omega;
        Ok(self)
    }

    pub fn n_atoms(&self) -> usize {
        self.n_atoms
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn reservoirs(&self) -> &[ReservoirParams] {
        &self.reservoirs
    }

    pub fn reservoir(&self, label: ReservoirLabel) -> Result<&ReservoirParams> {
        self.reservoirs
            .iter()
            .find(|r| r.label == label)
            .ok_or_else(|| FcsError::UnknownReservoir(label.to_string()))
    }

    pub fn source(&self) -> Result<&ReservoirParams> {
        self.reservoir(ReservoirLabel::Source)
    }

    pub fn drain(&self) -> Result<&ReservoirParams> {
        self.reservoir(ReservoirLabel::Drain)
    }

    /// Copy of the scenario with source and drain exchanged (labels kept in
    /// place, parameters swapped).
    pub fn swapped(&self) -> Result<Self> {
        let s = *self.source()?;
        let d = *self.drain()?;
        Self::new(
            self.n_atoms,
            self.omega,
            vec![
                ReservoirParams::new(ReservoirLabel::Source, d.gamma, d.occupation)?,
                ReservoirParams::new(ReservoirLabel::Drain, s.gamma, s.occupation)?,
            ],
        )
    }

    /// Ladder dimension `N + 1`.
    pub fn ladder_dim(&self) -> usize {
        self.n_atoms + 1
    }
}

/// The single fictitious bath the emitters thermalize with.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EffectiveBath {
    pub n_m: f64,
    /// `+inf` when `n_m == 0`.
    pub beta_m: f64,
}

/// Coupling-weighted mean occupation of the reservoirs, and the matching
/// inverse temperature.
pub fn effective_occupation(params: &SystemParams) -> Result<EffectiveBath> {
    let (num, den) = params
        .reservoirs()
        .iter()
        .fold((0.0, 0.0), |(num, den), r| {
            (num + r.gamma * r.occupation, den + r.gamma)
        });
    let n_m = match params.reservoirs() {
        [single] => single.occupation,
        _ if den > 0.0 => num / den,
        _ => return Err(FcsError::DegenerateCouplings),
    };
    let beta_m = if n_m > 0.0 {
        (1.0 / n_m).ln_1p() / params.omega()
    } else {
        f64::INFINITY
    };
    Ok(EffectiveBath { n_m, beta_m })
}

/// Bose occupation `1/(e^{beta*omega} - 1)`.
pub fn thermal_occupation(beta: f64, omega: f64) -> Result<f64> {
    let x = beta * omega;
    if x.is_nan() || x <= 0.0 {
        return Err(FcsError::Domain {
            what: "thermal_occupation (beta * omega must be > 0)",
            value: x,
        });
    }
    Ok(1.0 / x.exp_m1())
}

/// A laser-pumped lossy cavity used as a tunable photon source.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CavitySource {
    pub pump: f64,
    pub kappa: f64,
    pub laser_frequency: f64,
}

impl CavitySource {
    pub fn new(pump: f64, kappa: f64, laser_frequency: f64) -> Result<Self> {
        if !(kappa > 0.0) {
            return Err(invalid("kappa", format!("must be > 0, got {kappa}")));
        }
        if !(pump >= 0.0) {
            return Err(invalid("pump", format!("must be >= 0, got {pump}")));
        }
        if !(laser_frequency > 0.0) {
            return Err(invalid(
                "laser_frequency",
                format!("must be > 0, got {laser_frequency}"),
            ));
        }
        Ok(Self {
            pump,
            kappa,
            laser_frequency,
        })
    }

    /// Lorentzian cavity occupation seen at transition frequency `omega`.
    pub fn occupation(&self, omega: f64) -> f64 {
        let detuning = omega - self.laser_frequency;
        self.pump * self.pump / (detuning * detuning + self.kappa * self.kappa)
    }
}

pub fn cavity_source_occupation(src: &CavitySource, omega: f64) -> f64 {
    src.occupation(omega)
}

/// Series transfer rate `Gs*Gd/(Gs+Gd)`.
pub fn classical_rate(params: &SystemParams) -> Result<f64> {
    let s = params.source()?;
    let d = params.drain()?;
    let sum = s.gamma + d.gamma;
    if sum <= 0.0 {
        return Err(FcsError::DegenerateCouplings);
    }
    Ok(s.gamma * d.gamma / sum)
}

/// Geometric Boltzmann weights on the ladder for occupation `n_m`,
/// normalized, indexed by `k = 0..=n_atoms`.
pub fn geometric_ladder(n_atoms: usize, n_m: f64) -> Vec<f64> {
    let ratio = if n_m.is_infinite() {
        1.0
    } else {
        n_m / (1.0 + n_m)
    };
    let mut weights = Vec::with_capacity(n_atoms + 1);
    let mut w = 1.0;
    for _ in 0..=n_atoms {
        weights.push(w);
        w *= ratio;
    }
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    weights
}

/// Stationary ladder populations `rho_k`, `k = m + N/2`.
pub fn stationary_distribution(params: &SystemParams) -> Result<Vec<f64>> {
    let bath = effective_occupation(params)?;
    Ok(geometric_ladder(params.n_atoms(), bath.n_m))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn effective_occupation_examples() {
        let p = SystemParams::two_terminal(2, 1.0, 2.0, 1.0, 0.0).unwrap();
        assert_relative_eq!(effective_occupation(&p).unwrap().n_m, 1.0);
        let p = SystemParams::two_terminal(2, 1.0, 5.0, 0.0, 123.0).unwrap();
        assert_relative_eq!(effective_occupation(&p).unwrap().n_m, 5.0);
        let p = SystemParams::two_terminal(2, 2.0, 3.0, 1.0, 0.0).unwrap();
        assert_relative_eq!(effective_occupation(&p).unwrap().n_m, 2.0);
    }

    #[test]
    fn effective_occupation_rejects_zero_couplings() {
        let p = SystemParams::two_terminal(1, 0.0, 1.0, 0.0, 1.0).unwrap();
        assert_eq!(effective_occupation(&p), Err(FcsError::DegenerateCouplings));
    }

    #[test]
    fn vacuum_has_infinite_beta() {
        let p = SystemParams::two_terminal(3, 1.0, 0.0, 1.0, 0.0).unwrap();
        let b = effective_occupation(&p).unwrap();
        assert_eq!(b.n_m, 0.0);
        assert!(b.beta_m.is_infinite());
    }

    #[test]
    fn single_bath_uses_its_occupation() {
        let p = SystemParams::single_bath(4, 0.0, 0.7).unwrap();
        assert_eq!(effective_occupation(&p).unwrap().n_m, 0.7);
    }

    #[test]
    fn thermal_occupation_examples() {
        assert_eq!(thermal_occupation(f64::INFINITY, 1.0).unwrap(), 0.0);
        assert_relative_eq!(thermal_occupation(2f64.ln(), 1.0).unwrap(), 1.0, max_relative = 1e-14);
        let x = 0.01;
        let n = thermal_occupation(x, 1.0).unwrap();
        // 1/x - 1/2 + x/12 - x^3/720
        let series = 1.0 / x - 0.5 + x / 12.0 - x.powi(3) / 720.0;
        assert_relative_eq!(n, series, max_relative = 1e-12);
        assert_relative_eq!(n, 99.500833, max_relative = 1e-7);
        assert!(thermal_occupation(0.0, 1.0).is_err());
        assert!(thermal_occupation(-1.0, 1.0).is_err());
    }

    #[test]
    fn cavity_examples() {
        let c = CavitySource::new(2.0, 2.0, 1.0).unwrap();
        assert_relative_eq!(c.occupation(1.0), 1.0);
        let c = CavitySource::new(4.0, 2.0, 1.0).unwrap();
        assert_relative_eq!(c.occupation(1.0), 4.0);
        let c = CavitySource::new(1.0, 1.0, 1.0).unwrap();
        assert_relative_eq!(cavity_source_occupation(&c, 2.0), 0.5);
        assert!(CavitySource::new(1.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn classical_rate_examples() {
        let p = SystemParams::two_terminal(1, 2.5, 0.0, 2.5, 0.0).unwrap();
        assert_relative_eq!(classical_rate(&p).unwrap(), 1.25);
        let p = SystemParams::two_terminal(1, 3.0, 0.0, 1.0, 0.0).unwrap();
        assert_relative_eq!(classical_rate(&p).unwrap(), 0.75);
        let p = SystemParams::two_terminal(1, 3.0, 0.0, 0.0, 0.0).unwrap();
        assert_eq!(classical_rate(&p).unwrap(), 0.0);
        let p = SystemParams::two_terminal(1, 0.0, 0.0, 0.0, 0.0).unwrap();
        assert!(classical_rate(&p).is_err());
    }

    #[test]
    fn stationary_examples() {
        let p = SystemParams::two_terminal(2, 1.0, 2.0, 1.0, 0.0).unwrap();
        let rho = stationary_distribution(&p).unwrap();
        for (got, want) in rho.iter().zip([4.0 / 7.0, 2.0 / 7.0, 1.0 / 7.0]) {
            assert_relative_eq!(*got, want, max_relative = 1e-15);
        }
        assert_eq!(geometric_ladder(5, 0.0), vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        for w in geometric_ladder(2, f64::INFINITY) {
            assert_relative_eq!(w, 1.0 / 3.0);
        }
    }

    #[test]
    fn parameter_validation() {
        assert!(SystemParams::two_terminal(0, 1.0, 1.0, 1.0, 1.0).is_err());
        assert!(SystemParams::two_terminal(1, -1.0, 1.0, 1.0, 1.0).is_err());
        assert!(SystemParams::two_terminal(1, 1.0, -0.5, 1.0, 1.0).is_err());
        assert!(SystemParams::single_bath(1, 1.0, 1.0).unwrap().with_omega(0.0).is_err());
        let r = ReservoirParams::new(ReservoirLabel::Drain, 1.0, 1.0).unwrap();
        assert!(SystemParams::new(1, 1.0, vec![r, r]).is_err());
        assert!(SystemParams::new(1, 1.0, vec![]).is_err());
    }
}
