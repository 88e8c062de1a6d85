//! Truncated-Hilbert-space primitives: ion and trap data, Fock spaces,
//! spin⊗motion density matrices, exact ion–laser coupling matrix elements,
//! and thermal phonon distributions.
//!
//! The electronic qubit lives on the narrow S ↔ D quadrupole transition;
//! the motional degree of freedom is one harmonic mode truncated at `n_max`.
//! Basis ordering is (electronic ⊗ Fock) with S first: index = e·(n_max+1) + n.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::constants::{ATOMIC_MASS_UNIT, CA40_MASS_AMU, HBAR};
use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Electronic basis states of the optical qubit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Electronic {
    /// S₁/₂ ground state.
    S,
    /// Metastable D₅/₂ shelving state.
    D,
}

impl Electronic {
    pub fn index(self) -> usize {
        match self {
            Electronic::S => 0,
            Electronic::D => 1,
        }
    }
}

/// Spatial axis of the trap.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Axis::X => "x",
            Axis::Y => "y",
            Axis::Z => "z",
        }
    }

    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];
}

impl std::fmt::Display for Axis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

impl std::str::FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "x" | "X" => Ok(Axis::X),
            "y" | "Y" => Ok(Axis::Y),
            "z" | "Z" => Ok(Axis::Z),
            other => Err(Error::domain(format!("unknown axis `{other}`"))),
        }
    }
}

/// Physical constants of one ion species relevant to the simulation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IonSpecies {
    mass: f64,
    qubit_wavelength: f64,
    dipole_linewidth: f64,
    d_state_lifetime: f64,
}

impl IonSpecies {
    /// Build a species from its atomic mass (amu), qubit wavelength (m),
    /// dipole-transition linewidth Γ (rad/s) and metastable-state lifetime (s).
    pub fn new(
        mass_amu: f64,
        qubit_wavelength: f64,
        dipole_linewidth: f64,
        d_state_lifetime: f64,
    ) -> Result<Self> {
        if mass_amu <= 0.0 {
            return Err(Error::domain("ion mass must be positive"));
        }
        if qubit_wavelength <= 0.0 {
            return Err(Error::domain("qubit wavelength must be positive"));
        }
        if dipole_linewidth <= 0.0 {
            return Err(Error::domain("dipole linewidth must be positive"));
        }
        if d_state_lifetime <= 0.0 {
            return Err(Error::domain("metastable lifetime must be positive"));
        }
        Ok(IonSpecies {
            mass: mass_amu * ATOMIC_MASS_UNIT,
            qubit_wavelength,
            dipole_linewidth,
            d_state_lifetime,
        })
    }

    /// ⁴⁰Ca⁺: 729 nm qubit, 20 MHz dipole linewidth, ~1 s D₅/₂ lifetime.
    pub fn ca40() -> Self {
        IonSpecies::new(
            CA40_MASS_AMU,
            729.0e-9,
            2.0 * std::f64::consts::PI * 20.0e6,
            1.0,
        )
        .expect("ca40 constants are valid")
    }

    /// Ion mass in kg.
    pub fn mass(&self) -> f64 {
        self.mass
    }

    /// Qubit transition wavelength in m.
    pub fn qubit_wavelength(&self) -> f64 {
        self.qubit_wavelength
    }

    /// Dipole (detection/cooling) transition linewidth Γ in rad/s.
    pub fn dipole_linewidth(&self) -> f64 {
        self.dipole_linewidth
    }

    /// Lifetime of the metastable shelving state in s.
    pub fn d_state_lifetime(&self) -> f64 {
        self.d_state_lifetime
    }

    /// Wavenumber k = 2π/λ of the qubit laser, 1/m.
    pub fn wavenumber(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.qubit_wavelength
    }

    /// Recoil frequency ω_rec = ħk²/(2m) of the qubit transition, rad/s.
    pub fn recoil_frequency(&self) -> f64 {
        let k = self.wavenumber();
        HBAR * k * k / (2.0 * self.mass)
    }
}

/// Trap secular frequencies and the qubit-laser beam geometry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrapConfig {
    secular_frequencies: [f64; 3],
    laser_direction: [f64; 3],
}

impl TrapConfig {
    /// Build from angular secular frequencies (rad/s) and the unit direction
    /// cosines of the qubit beam.
    pub fn new(secular_frequencies: [f64; 3], laser_direction: [f64; 3]) -> Result<Self> {
        for (axis, &w) in Axis::ALL.iter().zip(secular_frequencies.iter()) {
            if w <= 0.0 {
                return Err(Error::domain(format!(
                    "secular frequency along {axis} must be positive"
                )));
            }
        }
        let norm2: f64 = laser_direction.iter().map(|c| c * c).sum();
        if (norm2 - 1.0).abs() > 1e-12 {
            return Err(Error::domain(format!(
                "laser direction cosines must form a unit vector (|c|² = {norm2})"
            )));
        }
        Ok(TrapConfig {
            secular_frequencies,
            laser_direction,
        })
    }

    /// Build from cycle frequencies in Hz; multiplied by 2π on ingestion.
    pub fn from_cycle_frequencies(
        frequencies_hz: [f64; 3],
        laser_direction: [f64; 3],
    ) -> Result<Self> {
        let two_pi = 2.0 * std::f64::consts::PI;
        TrapConfig::new(
            [
                two_pi * frequencies_hz[0],
                two_pi * frequencies_hz[1],
                two_pi * frequencies_hz[2],
            ],
            laser_direction,
        )
    }

    /// Angular secular frequency along one axis, rad/s.
    pub fn secular_frequency(&self, axis: Axis) -> f64 {
        self.secular_frequencies[axis.index()]
    }

    pub fn secular_frequencies(&self) -> [f64; 3] {
        self.secular_frequencies
    }

    /// Direction cosine of the qubit beam along one axis.
    pub fn laser_projection(&self, axis: Axis) -> f64 {
        self.laser_direction[axis.index()]
    }

    pub fn laser_direction(&self) -> [f64; 3] {
        self.laser_direction
    }

    /// Axis of weakest confinement; a linear crystal aligns along it.
    pub fn crystal_axis(&self) -> Axis {
        let mut best = Axis::X;
        for axis in Axis::ALL {
            if self.secular_frequency(axis) < self.secular_frequency(best) {
                best = axis;
            }
        }
        best
    }
}

/// Truncated Fock space of one motional mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FockSpace {
    n_max: usize,
}

impl FockSpace {
    pub fn new(n_max: usize) -> Result<Self> {
        if n_max < 1 {
            return Err(Error::domain("Fock truncation n_max must be at least 1"));
        }
        Ok(FockSpace { n_max })
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    /// Dimension n_max + 1 of the truncated space.
    pub fn dim(&self) -> usize {
        self.n_max + 1
    }

    /// Annihilation operator a, (n_max+1)-dimensional.
    pub fn annihilation(&self) -> DMatrix<C64> {
        let d = self.dim();
        let mut a = DMatrix::zeros(d, d);
        for n in 1..d {
            a[(n - 1, n)] = C64::new((n as f64).sqrt(), 0.0);
        }
        a
    }

    /// Creation operator a†.
    pub fn creation(&self) -> DMatrix<C64> {
        self.annihilation().transpose()
    }

    /// Number operator a†a.
    pub fn number(&self) -> DMatrix<C64> {
        let d = self.dim();
        DMatrix::from_fn(d, d, |i, j| {
            if i == j {
                C64::new(i as f64, 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        })
    }
}

/// Default truncation for a thermal state of mean occupation `nbar`:
/// n_max = max(20, ⌈4·n̄ + 20⌉), keeping truncated weight below ~10⁻⁶.
pub fn default_n_max(nbar: f64) -> usize {
    (4.0 * nbar + 20.0).ceil().max(20.0) as usize
}

/// Phonon occupation probabilities p_n, n = 0..n_max.
#[derive(Debug, Clone, PartialEq)]
pub struct PhononDistribution {
    p: Vec<f64>,
}

impl PhononDistribution {
    pub fn new(p: Vec<f64>) -> Result<Self> {
        if p.is_empty() {
            return Err(Error::domain("phonon distribution must not be empty"));
        }
        if p.iter().any(|&x| x < 0.0 || !x.is_finite()) {
            return Err(Error::domain("phonon occupation probabilities must be ≥ 0"));
        }
        let sum: f64 = p.iter().sum();
        if (sum - 1.0).abs() > 1e-8 {
            return Err(Error::domain(format!(
                "phonon distribution must be normalized (Σp = {sum})"
            )));
        }
        Ok(PhononDistribution { p })
    }

    /// Ground state |n = 0⟩ on a space truncated at `n_max`.
    pub fn ground(n_max: usize) -> Self {
        let mut p = vec![0.0; n_max + 1];
        p[0] = 1.0;
        PhononDistribution { p }
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.p
    }

    pub fn n_max(&self) -> usize {
        self.p.len() - 1
    }

    /// Mean occupation ⟨n⟩.
    pub fn mean(&self) -> f64 {
        self.p
            .iter()
            .enumerate()
            .map(|(n, &pn)| n as f64 * pn)
            .sum()
    }

    /// Ground-state occupation p₀.
    pub fn p0(&self) -> f64 {
        self.p[0]
    }
}

/// Density matrix on (electronic two-level) ⊗ (truncated Fock) space.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumState {
    n_max: usize,
    rho: DMatrix<C64>,
}

impl QuantumState {
    /// Pure state |e, n⟩ on a space truncated at `n_max`.
    pub fn pure(electronic: Electronic, n: usize, n_max: usize) -> Result<Self> {
        if n > n_max {
            return Err(Error::domain(format!(
                "Fock index {n} exceeds truncation n_max = {n_max}"
            )));
        }
        let dim = 2 * (n_max + 1);
        let mut rho = DMatrix::zeros(dim, dim);
        let idx = electronic.index() * (n_max + 1) + n;
        rho[(idx, idx)] = C64::new(1.0, 0.0);
        Ok(QuantumState { n_max, rho })
    }

    /// |S, 0⟩: electronic ground state, motional ground state.
    pub fn ground(n_max: usize) -> Self {
        QuantumState::pure(Electronic::S, 0, n_max).expect("n = 0 always fits")
    }

    /// Electronic S ⊗ diagonal phonon mixture.
    pub fn from_phonon_distribution(dist: &PhononDistribution) -> Self {
        let n_max = dist.n_max();
        let dim = 2 * (n_max + 1);
        let mut rho = DMatrix::zeros(dim, dim);
        for (n, &pn) in dist.probabilities().iter().enumerate() {
            rho[(n, n)] = C64::new(pn, 0.0);
        }
        QuantumState { n_max, rho }
    }

    /// Wrap an explicit density matrix, validating the state invariants.
    pub fn from_density_matrix(rho: DMatrix<C64>) -> Result<Self> {
        let dim = rho.nrows();
        if dim != rho.ncols() || dim % 2 != 0 || dim < 4 {
            return Err(Error::domain(
                "density matrix must be square with dimension 2(n_max+1), n_max ≥ 1",
            ));
        }
        let state = QuantumState {
            n_max: dim / 2 - 1,
            rho,
        };
        state.validate()?;
        Ok(state)
    }

    /// Check Hermiticity (10⁻¹⁰), unit trace (10⁻⁸) and numerical positivity
    /// (min eigenvalue ≥ −10⁻⁸).
    pub fn validate(&self) -> Result<()> {
        let rho = &self.rho;
        let herm = (rho - rho.adjoint()).norm();
        if herm > 1e-10 {
            return Err(Error::domain(format!(
                "density matrix not Hermitian (‖ρ−ρ†‖ = {herm:.3e})"
            )));
        }
        let trace = rho.trace();
        if (trace.re - 1.0).abs() > 1e-8 || trace.im.abs() > 1e-8 {
            return Err(Error::domain(format!(
                "density matrix trace {trace} differs from 1"
            )));
        }
        let min_eig = crate::dynamics::hermitian_eigenvalues(rho)
            .into_iter()
            .fold(f64::INFINITY, f64::min);
        if min_eig < -1e-8 {
            return Err(Error::domain(format!(
                "density matrix not positive (min eigenvalue {min_eig:.3e})"
            )));
        }
        Ok(())
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    /// Full Hilbert-space dimension 2(n_max+1).
    pub fn dim(&self) -> usize {
        2 * (self.n_max + 1)
    }

    pub fn density_matrix(&self) -> &DMatrix<C64> {
        &self.rho
    }

    pub(crate) fn density_matrix_mut(&mut self) -> &mut DMatrix<C64> {
        &mut self.rho
    }

    pub(crate) fn from_parts(n_max: usize, rho: DMatrix<C64>) -> Self {
        QuantumState { n_max, rho }
    }

    /// Basis index of |e, n⟩.
    pub fn index(&self, electronic: Electronic, n: usize) -> usize {
        electronic.index() * (self.n_max + 1) + n
    }

    /// Population of the basis state |e, n⟩.
    pub fn population(&self, electronic: Electronic, n: usize) -> f64 {
        let i = self.index(electronic, n);
        self.rho[(i, i)].re
    }

    /// Total population of the D (shelved) electronic manifold.
    pub fn p_excited(&self) -> f64 {
        (0..=self.n_max)
            .map(|n| self.population(Electronic::D, n))
            .sum()
    }

    /// Phonon populations traced over the electronic state.
    pub fn phonon_populations(&self) -> Vec<f64> {
        (0..=self.n_max)
            .map(|n| self.population(Electronic::S, n) + self.population(Electronic::D, n))
            .collect()
    }

    /// Mean phonon number ⟨n⟩.
    pub fn mean_phonon(&self) -> f64 {
        self.phonon_populations()
            .iter()
            .enumerate()
            .map(|(n, &p)| n as f64 * p)
            .sum()
    }

    pub fn trace(&self) -> f64 {
        self.rho.trace().re
    }
}

/// Lamb-Dicke parameter η = k·(beam projection)·√(ħ/(2mω)).
pub fn lamb_dicke(species: &IonSpecies, mode_frequency: f64, projection: f64) -> Result<f64> {
    if mode_frequency <= 0.0 {
        return Err(Error::domain("mode frequency must be positive"));
    }
    if projection.abs() > 1.0 + 1e-12 {
        return Err(Error::domain("beam projection must satisfy |c| ≤ 1"));
    }
    let x0 = (HBAR / (2.0 * species.mass() * mode_frequency)).sqrt();
    Ok(species.wavenumber() * projection.abs() * x0)
}

/// Generalized Laguerre polynomial L_k^α(x) by the three-term recurrence.
fn generalized_laguerre(k: usize, alpha: f64, x: f64) -> f64 {
    if k == 0 {
        return 1.0;
    }
    let mut lm1 = 1.0;
    let mut l = 1.0 + alpha - x;
    for j in 1..k {
        let jf = j as f64;
        let next = ((2.0 * jf + 1.0 + alpha - x) * l - (jf + alpha) * lm1) / (jf + 1.0);
        lm1 = l;
        l = next;
    }
    l
}

/// Signed/phased displacement-operator matrix element ⟨n+s| e^{iη(a+a†)} |n⟩.
///
/// Used by the dynamics engine, where the relative phases i^{|s|} and the
/// Laguerre sign matter for multi-sideband interference.
pub fn displacement_element(n: usize, s: i32, eta: f64) -> Result<C64> {
    let m = n as i64 + s as i64;
    if m < 0 {
        return Err(Error::domain(format!(
            "Fock level n+s = {m} does not exist"
        )));
    }
    let m = m as usize;
    let (lo, hi) = if m < n { (m, n) } else { (n, m) };
    let k = hi - lo;
    let x = eta * eta;
    // √(lo!/hi!) = 1/√(∏_{j=lo+1}^{hi} j)
    let mut ratio = 1.0;
    for j in (lo + 1)..=hi {
        ratio /= j as f64;
    }
    let magnitude = (-x / 2.0).exp() * eta.powi(k as i32) * ratio.sqrt();
    let laguerre = generalized_laguerre(lo, k as f64, x);
    // (iη)^k carries the phase i^k
    let phase = C64::i().powu(k as u32);
    Ok(phase * magnitude * laguerre)
}

/// Coupling strength |⟨n+s| e^{iη(a+a†)} |n⟩| of the s-th sideband from
/// Fock level n: e^{−η²/2} η^{|s|} √(n_<!/n_>!) |L_{n_<}^{|s|}(η²)|.
pub fn coupling_strength(n: usize, s: i32, eta: f64) -> Result<f64> {
    Ok(displacement_element(n, s, eta)?.norm())
}

/// Thermal distribution p_n ∝ n̄ⁿ/(1+n̄)^{n+1}, renormalized over the truncation.
pub fn thermal_distribution(nbar: f64, n_max: usize) -> Result<PhononDistribution> {
    if nbar < 0.0 {
        return Err(Error::domain("mean occupation n̄ must be ≥ 0"));
    }
    if n_max < 1 {
        return Err(Error::domain("n_max must be at least 1"));
    }
    let mut p = Vec::with_capacity(n_max + 1);
    if nbar == 0.0 {
        p.push(1.0);
        p.extend(std::iter::repeat(0.0).take(n_max));
    } else {
        let q = nbar / (1.0 + nbar);
        let mut w = 1.0 / (1.0 + nbar);
        for _ in 0..=n_max {
            p.push(w);
            w *= q;
        }
        let sum: f64 = p.iter().sum();
        for pn in &mut p {
            *pn /= sum;
        }
    }
    PhononDistribution::new(p)
}

/// Doppler-limit result: the clamp flag marks Γ < ω configurations where the
/// zero-point convention would give a negative n̄.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DopplerLimit {
    pub nbar: f64,
    pub clamped: bool,
}

/// Mean occupation at the Doppler limit E = ħΓ/2 with the zero-point term:
/// ħΓ/2 = ħω(n̄ + 1/2), i.e. n̄ = Γ/(2ω) − 1/2, clamped at zero.
pub fn doppler_limit_nbar(species: &IonSpecies, mode_frequency: f64) -> Result<DopplerLimit> {
    if mode_frequency <= 0.0 {
        return Err(Error::domain("mode frequency must be positive"));
    }
    let nbar = species.dipole_linewidth() / (2.0 * mode_frequency) - 0.5;
    if nbar < 0.0 {
        Ok(DopplerLimit {
            nbar: 0.0,
            clamped: true,
        })
    } else {
        Ok(DopplerLimit {
            nbar,
            clamped: false,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    const TWO_PI: f64 = 2.0 * PI;

    #[test]
    fn lamb_dicke_perpendicular_beam_vanishes() {
        let ca = IonSpecies::ca40();
        let eta = lamb_dicke(&ca, TWO_PI * 1.0e6, 0.0).unwrap();
        assert_eq!(eta, 0.0);
    }

    #[test]
    fn lamb_dicke_ca40_at_4_51_mhz() {
        // Hand evaluation of k·√(ħ/2mω) with CODATA constants: 0.045640.
        let ca = IonSpecies::ca40();
        let eta = lamb_dicke(&ca, TWO_PI * 4.51e6, 1.0).unwrap();
        assert!((eta - 0.0456).abs() < 1e-4, "η = {eta}");
        assert!((eta - 0.045640).abs() < 5e-6, "η = {eta}");
    }

    #[test]
    fn lamb_dicke_scales_as_inverse_sqrt_frequency() {
        let ca = IonSpecies::ca40();
        let w = TWO_PI * 2.0e6;
        let e1 = lamb_dicke(&ca, w, 0.7).unwrap();
        let e2 = lamb_dicke(&ca, 4.0 * w, 0.7).unwrap();
        assert!((e1 / e2 - 2.0).abs() < 1e-12);
    }

    #[test]
    fn lamb_dicke_rejects_nonpositive_frequency() {
        let ca = IonSpecies::ca40();
        assert!(lamb_dicke(&ca, 0.0, 1.0).is_err());
        assert!(lamb_dicke(&ca, -1.0, 1.0).is_err());
    }

    #[test]
    fn recoil_frequency_ca40() {
        // ħk²/2m at 729 nm ≈ 2π·9.4 kHz
        let ca = IonSpecies::ca40();
        let w_rec = ca.recoil_frequency();
        assert!(
            (w_rec / TWO_PI / 1e3 - 9.4).abs() < 0.1,
            "{}",
            w_rec / TWO_PI
        );
    }

    #[test]
    fn coupling_identity_at_zero_displacement() {
        assert_eq!(coupling_strength(0, 0, 0.0).unwrap(), 1.0);
    }

    #[test]
    fn coupling_rejects_missing_level() {
        assert!(coupling_strength(0, -1, 0.1).is_err());
        assert!(coupling_strength(2, -3, 0.1).is_err());
    }

    #[test]
    fn coupling_symmetric_under_level_swap() {
        for &eta in &[0.01, 0.1, 0.3] {
            for n in 0..12usize {
                for s in -(n as i32)..=4 {
                    let a = coupling_strength(n, s, eta).unwrap();
                    let b = coupling_strength((n as i32 + s) as usize, -s, eta).unwrap();
                    assert!((a - b).abs() < 1e-15, "n={n} s={s} η={eta}");
                }
            }
        }
    }

    #[test]
    fn coupling_in_unit_interval() {
        for n in 0..20usize {
            for s in -(n.min(3) as i32)..=3 {
                let c = coupling_strength(n, s, 0.3).unwrap();
                assert!((0.0..=1.0).contains(&c));
            }
        }
    }

    #[test]
    fn blue_sideband_ratio_approaches_sqrt2() {
        // Ω₁₂/Ω₀₁ → √2 in the Lamb-Dicke regime, within 1% for η ≤ 0.1.
        for &eta in &[0.001, 0.01, 0.05, 0.1] {
            let r = coupling_strength(1, 1, eta).unwrap() / coupling_strength(0, 1, eta).unwrap();
            assert!((r / 2f64.sqrt() - 1.0).abs() < 0.01, "η = {eta}: ratio {r}");
        }
    }

    #[test]
    fn lamb_dicke_limit_of_first_sideband() {
        // coupling(n,+1,η)/(η√(n+1)) → 1 with deviation < η²(n+1)
        for &eta in &[1e-3, 1e-2, 0.05] {
            for n in 0..=10usize {
                let c = coupling_strength(n, 1, eta).unwrap();
                let ratio = c / (eta * ((n + 1) as f64).sqrt());
                assert!(
                    (ratio - 1.0).abs() < eta * eta * (n + 1) as f64,
                    "n={n} η={eta} ratio={ratio}"
                );
            }
        }
    }

    #[test]
    fn thermal_distribution_zero_temperature() {
        let d = thermal_distribution(0.0, 10).unwrap();
        assert_eq!(d.p0(), 1.0);
        assert_eq!(d.mean(), 0.0);
    }

    #[test]
    fn thermal_distribution_geometric_law() {
        // n̄ = 1: p₀ = 1/2, p₁ = 1/4, p₂ = 1/8 before renormalization.
        let d = thermal_distribution(1.0, 60).unwrap();
        let p = d.probabilities();
        assert!((p[0] - 0.5).abs() < 1e-9);
        assert!((p[1] - 0.25).abs() < 1e-9);
        assert!((p[2] - 0.125).abs() < 1e-9);
    }

    #[test]
    fn thermal_distribution_mean_recovered() {
        let d = thermal_distribution(10.0, 100).unwrap();
        assert!((d.mean() / 10.0 - 1.0).abs() < 1e-3, "mean {}", d.mean());
        // monotone non-increasing
        let p = d.probabilities();
        for w in p.windows(2) {
            assert!(w[1] <= w[0] + 1e-15);
        }
    }

    #[test]
    fn thermal_distribution_rejects_negative_mean() {
        assert!(thermal_distribution(-0.1, 10).is_err());
    }

    #[test]
    fn doppler_limit_paper_anchor() {
        // Γ = 2π·20 MHz, ω = 2π·1 MHz → n̄ = 9.5
        let ca = IonSpecies::ca40();
        let d = doppler_limit_nbar(&ca, TWO_PI * 1.0e6).unwrap();
        assert!((d.nbar - 9.5).abs() < 1e-9, "{}", d.nbar);
        assert!(!d.clamped);
    }

    #[test]
    fn doppler_limit_clamps_at_zero() {
        let ca = IonSpecies::ca40();
        // boundary Γ = ω gives n̄ = 0 without clamping
        let d = doppler_limit_nbar(&ca, ca.dipole_linewidth()).unwrap();
        assert_eq!(d.nbar, 0.0);
        assert!(!d.clamped);
        // stiffer mode: the convention would go negative and clamps
        let d = doppler_limit_nbar(&ca, 2.0 * ca.dipole_linewidth()).unwrap();
        assert_eq!(d.nbar, 0.0);
        assert!(d.clamped);
    }

    #[test]
    fn doppler_limit_at_700_khz() {
        // Γ/(2ω) − 1/2 = 20/1.4 − 0.5 ≈ 13.8 (order of tens of phonons)
        let ca = IonSpecies::ca40();
        let d = doppler_limit_nbar(&ca, TWO_PI * 0.7e6).unwrap();
        assert!((d.nbar - 13.7857).abs() < 1e-3, "{}", d.nbar);
    }

    #[test]
    fn pure_state_invariants() {
        let st = QuantumState::pure(Electronic::D, 3, 10).unwrap();
        st.validate().unwrap();
        assert_eq!(st.p_excited(), 1.0);
        assert_eq!(st.mean_phonon(), 3.0);
    }

    #[test]
    fn thermal_state_invariants() {
        let d = thermal_distribution(2.0, 40).unwrap();
        let st = QuantumState::from_phonon_distribution(&d);
        st.validate().unwrap();
        assert!((st.mean_phonon() - d.mean()).abs() < 1e-12);
        assert_eq!(st.p_excited(), 0.0);
    }

    #[test]
    fn pure_state_rejects_overflow_index() {
        assert!(QuantumState::pure(Electronic::S, 11, 10).is_err());
    }

    #[test]
    fn trap_config_validates_unit_vector() {
        assert!(TrapConfig::new([1.0, 1.0, 1.0], [0.5, 0.5, 0.5]).is_err());
        let t = TrapConfig::from_cycle_frequencies(
            [2.16e6, 2.07e6, 4.51e6],
            [
                0.0,
                std::f64::consts::FRAC_1_SQRT_2,
                std::f64::consts::FRAC_1_SQRT_2,
            ],
        )
        .unwrap();
        assert_eq!(t.crystal_axis(), Axis::Y);
        assert!((t.secular_frequency(Axis::Z) - TWO_PI * 4.51e6).abs() < 1.0);
    }

    #[test]
    fn default_truncation_floor() {
        assert_eq!(default_n_max(0.0), 20);
        assert_eq!(default_n_max(9.5), 58);
        assert_eq!(default_n_max(20.0), 100);
    }

    #[test]
    fn ladder_operators_satisfy_commutator() {
        // [a, a†] = 1 away from the truncation boundary
        let space = FockSpace::new(12).unwrap();
        let a = space.annihilation();
        let comm = &a * space.creation() - space.creation() * &a;
        for n in 0..space.dim() - 1 {
            assert!((comm[(n, n)].re - 1.0).abs() < 1e-14);
        }
        let num = space.number();
        assert_eq!(num[(5, 5)].re, 5.0);
    }
}
