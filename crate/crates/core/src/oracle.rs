//! Brute-force reference: the collective master equation on the full
//! `2^N`-dimensional product space, vectorized to `4^N` dimensions.
//!
//! Column stacking is used throughout, `vec(A rho B) = (B^T ⊗ A) vec(rho)`,
//! so the trace covector is `vec(1)`. The ladder reduction only describes the
//! maximal-spin (fully symmetric) sector; every state handled here is kept in
//! that sector by the projection `rho -> P rho P`, which commutes with the
//! generator because `J^±` and `J^z` commute with the symmetrizer.

use nalgebra::{DMatrix, DVector};

use crate::error::{FcsError, Result};
use crate::fcs::{cumulants_from_branch, CumulantMethod, CumulantSet, EigenvalueOptions};
use crate::linalg::{exp_m1, C64};
use crate::model::{ReservoirLabel, SystemParams};
use crate::spectral::TiltedGenerator;

/// Largest atom number accepted.
pub const MAX_ATOMS: usize = 3;

/// `J^+`, `J^-`, `J^z` on `N` qubits. Bit `i` of a basis index is atom `i`,
/// with 1 the excited state.
fn collective_operators(n_atoms: usize) -> (DMatrix<C64>, DMatrix<C64>, DMatrix<C64>) {
    let d = 1usize << n_atoms;
    let mut plus = DMatrix::zeros(d, d);
    let mut z = DMatrix::zeros(d, d);
    for s in 0..d {
        for i in 0..n_atoms {
            let bit = 1 << i;
            if s & bit == 0 {
                plus[(s | bit, s)] += C64::new(1.0, 0.0);
                z[(s, s)] -= C64::new(1.0, 0.0);
            } else {
                z[(s, s)] += C64::new(1.0, 0.0);
            }
        }
    }
    let minus = plus.transpose();
    (plus, minus, z)
}

/// Projector onto the fully symmetric subspace (span of Dicke states).
fn symmetric_projector(n_atoms: usize) -> DMatrix<C64> {
    let d = 1usize << n_atoms;
    let mut p = DMatrix::zeros(d, d);
    for k in 0..=n_atoms {
        let members: Vec<usize> = (0..d).filter(|s| s.count_ones() as usize == k).collect();
        let w = 1.0 / members.len() as f64;
        for &a in &members {
            for &b in &members {
                p[(a, b)] = C64::new(w, 0.0);
            }
        }
    }
    p
}

/// `-i (Omega/2) [J^z, rho]`.
fn hamiltonian_part(jz: &DMatrix<C64>, half_omega: C64) -> DMatrix<C64> {
    let d = jz.nrows();
    let id = DMatrix::<C64>::identity(d, d);
    (kron(&id, jz) - kron(&jz.transpose(), &id)) * (C64::new(0.0, -1.0) * half_omega)
}

fn kron(a: &DMatrix<C64>, b: &DMatrix<C64>) -> DMatrix<C64> {
    a.kronecker(b)
}

/// Vectorized generator split as `L(chi) = L_0 + (e^{i chi}-1) E + (e^{-i chi}-1) A`,
/// with `E` (`A`) the emission (absorption) jumps of the counted reservoir.
#[derive(Clone, Debug)]
pub struct FullSpaceGenerator {
    n_atoms: usize,
    base: DMatrix<C64>,
    emission: DMatrix<C64>,
    absorption: DMatrix<C64>,
    projector: DMatrix<C64>,
    trace: DVector<C64>,
    stationary: Vec<C64>,
}

/// Assemble the vectorized generator with reservoir `counted` dressed.
pub fn build_full_generator(
    params: &SystemParams,
    counted: ReservoirLabel,
) -> Result<FullSpaceGenerator> {
    let n = params.n_atoms();
    if n > MAX_ATOMS {
        return Err(FcsError::SizeCap {
            max: MAX_ATOMS,
            got: n,
        });
    }
    params.reservoir(counted)?;
    let d = 1usize << n;
    let id = DMatrix::<C64>::identity(d, d);
    let (jp, jm, jz) = collective_operators(n);
    let half_omega = C64::new(0.5 * params.omega(), 0.0);

    let mut base = hamiltonian_part(&jz, half_omega);
    let mut emission = DMatrix::zeros(d * d, d * d);
    let mut absorption = DMatrix::zeros(d * d, d * d);
    let jmjp = &jm * &jp;
    let jpjm = &jp * &jm;
    for r in params.reservoirs() {
        let up = C64::new(r.gamma * r.occupation, 0.0);
        let down = C64::new(r.gamma * (1.0 + r.occupation), 0.0);
        // J^+ rho J^- and J^- rho J^+
        let absorb = kron(&jm.transpose(), &jp) * up;
        let emit = kron(&jp.transpose(), &jm) * down;
        base += &absorb + &emit;
        base -= (kron(&id, &jmjp) + kron(&jmjp.transpose(), &id)) * (up * 0.5);
        base -= (kron(&id, &jpjm) + kron(&jpjm.transpose(), &id)) * (down * 0.5);
        if r.label == counted {
            emission += emit;
            absorption += absorb;
        }
    }

    let mut trace = DVector::zeros(d * d);
    for k in 0..d {
        trace[k + k * d] = C64::new(1.0, 0.0);
    }
    let p = symmetric_projector(n);
    let projector = kron(&p.transpose(), &p);
    let mut gen = FullSpaceGenerator {
        n_atoms: n,
        base,
        emission,
        absorption,
        projector,
        trace,
        stationary: Vec::new(),
    };
    gen.stationary = gen.symmetric_stationary()?;
    Ok(gen)
}

impl FullSpaceGenerator {
    pub fn n_atoms(&self) -> usize {
        self.n_atoms
    }

    /// `L(chi)` as a dense matrix.
    pub fn matrix(&self, chi: C64) -> DMatrix<C64> {
        let i_chi = C64::new(0.0, 1.0) * chi;
        &self.base + &self.emission * exp_m1(i_chi) + &self.absorption * exp_m1(-i_chi)
    }

    /// `vec(1)^T L(0)`, which vanishes for a trace-preserving generator.
    pub fn trace_defect(&self) -> f64 {
        (self.trace.transpose() * &self.base)
            .iter()
            .map(|x| x.norm())
            .fold(0.0, f64::max)
    }

    /// Density matrix `rho` (`2^N x 2^N`) from a vectorized state.
    pub fn unvec(&self, v: &[C64]) -> DMatrix<C64> {
        let d = 1usize << self.n_atoms;
        DMatrix::from_column_slice(d, d, v)
    }

    fn project(&self, v: &mut [C64]) {
        let x = &self.projector * DVector::from_column_slice(v);
        v.copy_from_slice(x.as_slice());
    }

    /// Stationary state in the symmetric sector by inverse iteration from the
    /// fully excited state.
    fn symmetric_stationary(&self) -> Result<Vec<C64>> {
        let d = 1usize << self.n_atoms;
        let mut v = vec![C64::default(); d * d];
        v[(d - 1) + (d - 1) * d] = C64::new(1.0, 0.0);
        let norm = self.norm_estimate().max(f64::MIN_POSITIVE);
        let shift = C64::new(-1e-9 * norm, 0.0);
        let lu = (&self.base - DMatrix::identity(d * d, d * d) * shift).lu();
        for _ in 0..4 {
            let x = lu
                .solve(&DVector::from_column_slice(&v))
                .ok_or_else(|| FcsError::SingularSolve("full-space stationary state".into()))?;
            v.copy_from_slice(x.as_slice());
            self.project(&mut v);
            let tr = self.trace(&v);
            v.iter_mut().for_each(|x| *x /= tr);
        }
        let residual = (&self.base * DVector::from_column_slice(&v)).norm();
        if !(residual <= 1e-12 * norm) {
            return Err(FcsError::NonUniqueStationaryState);
        }
        Ok(v)
    }

    /// Stationary populations of the Dicke states `|D_k>`, `k` excitations.
    pub fn dicke_populations(&self) -> Vec<f64> {
        let rho = self.unvec(&self.stationary);
        let d = 1usize << self.n_atoms;
        (0..=self.n_atoms)
            .map(|k| {
                let members: Vec<usize> = (0..d).filter(|s| s.count_ones() as usize == k).collect();
                let mut acc = C64::default();
                for &a in &members {
                    for &b in &members {
                        acc += rho[(a, b)];
                    }
                }
                acc.re / members.len() as f64
            })
            .collect()
    }
}

impl TiltedGenerator for FullSpaceGenerator {
    fn dim(&self) -> usize {
        self.base.nrows()
    }

    fn stationary(&self) -> Vec<C64> {
        self.stationary.clone()
    }

    fn trace(&self, v: &[C64]) -> C64 {
        let d = 1usize << self.n_atoms;
        (0..d).map(|k| v[k + k * d]).sum()
    }

    fn apply(&self, chi: C64, v: &[C64]) -> Vec<C64> {
        (self.matrix(chi) * DVector::from_column_slice(v)).as_slice().to_vec()
    }

    fn solve_shifted(&self, chi: C64, shift: C64, rhs: &mut [C64]) -> bool {
        let n = self.dim();
        let m = self.matrix(chi) - DMatrix::identity(n, n) * shift;
        match m.lu().solve(&DVector::from_column_slice(rhs)) {
            Some(x) if x.iter().all(|c| c.re.is_finite() && c.im.is_finite()) => {
                rhs.copy_from_slice(x.as_slice());
                self.project(rhs);
                true
            }
            _ => false,
        }
    }

    fn jump_functional(&self, chi: C64, v: &[C64]) -> C64 {
        let i_chi = C64::new(0.0, 1.0) * chi;
        let x = DVector::from_column_slice(v);
        let e = &self.emission * &x;
        let a = &self.absorption * &x;
        exp_m1(i_chi) * self.trace(e.as_slice()) + exp_m1(-i_chi) * self.trace(a.as_slice())
    }

    fn norm_estimate(&self) -> f64 {
        self.base
            .row_iter()
            .map(|r| r.iter().map(|x| x.norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

/// `C_1..C_4` of the counted reservoir from the full-space generator,
/// differentiated exactly like the ladder eigenvalue.
pub fn oracle_current_and_cumulants(
    params: &SystemParams,
    counted: ReservoirLabel,
) -> Result<CumulantSet> {
    let gen = build_full_generator(params, counted)?;
    let mut set = cumulants_from_branch(&gen, 4, &EigenvalueOptions::default())?;
    set.method = CumulantMethod::FullSpace;
    Ok(set)
}
