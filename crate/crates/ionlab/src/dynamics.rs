//! Time evolution of the spin⊗Fock state under laser drive and noise.
//!
//! The drive on the S ↔ D transition is expanded into sideband terms
//! |s| ≤ s_max with exact displacement-operator couplings. Closed-system
//! pulse segments are propagated exactly: the term set is mapped to an
//! equivalent time-independent Hamiltonian in a rotating frame (possible
//! whenever the oscillation detunings are affine in the sideband order,
//! which holds for every term set produced by [`build_drive`]) and
//! eigendecomposed. Open-system segments integrate the Lindblad master
//! equation with a fixed-step RK4 whose step is set by the fastest
//! oscillation, the Rabi frequency, and the noise rates.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::quantum::{
    coupling_strength, displacement_element, Electronic, IonSpecies, PhononDistribution,
    QuantumState,
};
use crate::sequence::{Pulse, PulseTarget};

pub type C64 = Complex64;

/// Default integrator tolerance; the RK4 step shrinks as tol^(1/4).
pub const DEFAULT_TOL: f64 = 1e-9;

/// Default number of sideband orders retained on each side of the carrier.
pub const DEFAULT_S_MAX: usize = 2;

/// Eigenvalues of a Hermitian matrix (ascending).
pub fn hermitian_eigenvalues(m: &DMatrix<C64>) -> Vec<f64> {
    let (mut vals, _) = jacobi_hermitian_eig(m.clone());
    vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
    vals
}

/// Cyclic Jacobi eigendecomposition of a Hermitian matrix: A = V·diag(λ)·V†.
///
/// The drive Hamiltonians carry kHz-scale splittings of near-degenerate
/// pairs on top of a GHz-scale diagonal ladder; Jacobi resolves each 2×2
/// subproblem at its own scale and keeps the eigenvectors orthogonal by
/// construction, where tridiagonalization-based solvers mix the clusters.
pub fn jacobi_hermitian_eig(mut a: DMatrix<C64>) -> (Vec<f64>, DMatrix<C64>) {
    let n = a.nrows();
    let mut v = DMatrix::<C64>::identity(n, n);
    if n <= 1 {
        return (a.iter().map(|x| x.re).collect(), v);
    }
    let diag_scale = (0..n).map(|i| a[(i, i)].re.abs()).fold(1.0f64, f64::max);
    let tol = 1e-14 * diag_scale;

    for _sweep in 0..60 {
        let mut max_off = 0.0f64;
        for p in 0..n - 1 {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                let r = apq.norm();
                max_off = max_off.max(r);
                if r <= tol {
                    continue;
                }
                let phase = apq / r; // e^{iθ}
                let app = a[(p, p)].re;
                let aqq = a[(q, q)].re;
                let tau = (aqq - app) / (2.0 * r);
                let t = -tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                // J: columns p,q → (c·e_p + s·phase*·e_q, −s·phase·e_p + c·e_q)
                let sp = s * phase;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp + sp.conj() * akq;
                    a[(k, q)] = -sp * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk + sp * aqk;
                    a[(q, k)] = -sp.conj() * apk + c * aqk;
                }
                // clean rounding on the Hermitian structure
                a[(p, q)] = C64::new(0.0, 0.0);
                a[(q, p)] = C64::new(0.0, 0.0);
                a[(p, p)] = C64::new(a[(p, p)].re, 0.0);
                a[(q, q)] = C64::new(a[(q, q)].re, 0.0);
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp + sp.conj() * vkq;
                    v[(k, q)] = -sp * vkp + c * vkq;
                }
            }
        }
        if max_off <= tol {
            break;
        }
    }
    ((0..n).map(|i| a[(i, i)].re).collect(), v)
}

/// One rotating-frame component of the laser drive.
///
/// The interaction Hamiltonian of a term is
/// (Ω/2)·e^{i(Δt + φ)}·σ₊ ⊗ Σ_n M_{n,n+s}(η)|n+s⟩⟨n| + h.c.,
/// with the full complex displacement matrix elements M.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriveTerm {
    /// Sideband order s (0 = carrier, +1 = blue, −1 = red, ...).
    pub sideband: i32,
    /// Ω/2 in rad/s; the state-dependent coupling is Ω/2 · M_{n,n+s}(η).
    pub half_rabi: f64,
    /// Oscillation detuning Δ = s·ω_trap − δ in rad/s.
    pub detuning: f64,
    /// Drive phase in rad.
    pub phase: f64,
    /// Lamb-Dicke parameter of the addressed mode.
    pub eta: f64,
}

impl DriveTerm {
    /// State-dependent coupling (Ω/2)·M_{n,n+s}(η) in rad/s.
    pub fn coupling(&self, n: usize) -> Result<f64> {
        Ok(self.half_rabi * coupling_strength(n, self.sideband, self.eta)?)
    }

    /// Shift the phase by Δ·t0, referencing the term to a later segment start.
    pub fn with_phase_shift(mut self, t0: f64) -> Self {
        self.phase += self.detuning * t0;
        self
    }
}

/// Open-system rates: electronic dephasing, D-state decay, motional heating.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    /// Transverse electronic decay rate γ_⊥ in 1/s; coherences decay as e^{−γ_⊥ t}.
    pub dephasing_rate: f64,
    /// D₅/₂ → S₁/₂ decay rate (1/lifetime) in 1/s, phonon-conserving.
    pub d_decay_rate: f64,
    /// Heating rate ṅ_h in quanta/s (equal-rate a, a† jumps).
    pub heating_rate: f64,
}

impl NoiseModel {
    pub fn new(dephasing_rate: f64, d_decay_rate: f64, heating_rate: f64) -> Result<Self> {
        if dephasing_rate < 0.0 || d_decay_rate < 0.0 || heating_rate < 0.0 {
            return Err(Error::domain("noise rates must be ≥ 0"));
        }
        Ok(NoiseModel {
            dephasing_rate,
            d_decay_rate,
            heating_rate,
        })
    }

    /// Closed system: all rates zero.
    pub fn none() -> Self {
        NoiseModel {
            dephasing_rate: 0.0,
            d_decay_rate: 0.0,
            heating_rate: 0.0,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.dephasing_rate == 0.0 && self.d_decay_rate == 0.0 && self.heating_rate == 0.0
    }
}

/// Rate-equation sideband-cooling parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoolingParams {
    /// Red-sideband cooling rate per phonon, 1/s.
    pub a_minus: f64,
    /// Competing heating rate per phonon from off-resonant processes, 1/s.
    pub a_plus: f64,
    /// Cooling duration, s.
    pub duration: f64,
}

impl CoolingParams {
    pub fn new(a_minus: f64, a_plus: f64, duration: f64) -> Result<Self> {
        if !(a_minus > a_plus && a_plus >= 0.0) {
            return Err(Error::domain(
                "cooling requires A₋ > A₊ ≥ 0 (net phonon removal)",
            ));
        }
        if duration < 0.0 {
            return Err(Error::domain("cooling duration must be ≥ 0"));
        }
        Ok(CoolingParams {
            a_minus,
            a_plus,
            duration,
        })
    }

    /// Steady-state mean occupation A₊/(A₋ − A₊).
    pub fn steady_state_nbar(&self) -> f64 {
        self.a_plus / (self.a_minus - self.a_plus)
    }

    /// Choose A₋, A₊ that reach a given steady-state n̄ with cooling rate A₋.
    pub fn for_steady_state(nbar_ss: f64, a_minus: f64, duration: f64) -> Result<Self> {
        if nbar_ss < 0.0 {
            return Err(Error::domain("steady-state n̄ must be ≥ 0"));
        }
        let a_plus = a_minus * nbar_ss / (1.0 + nbar_ss);
        CoolingParams::new(a_minus, a_plus, duration)
    }

    /// Rate coefficients from the drive parameters, for a quadrupole
    /// transition whose upper state is repump-broadened to an effective
    /// linewidth Γ_eff ≪ ω_trap: the saturated red sideband removes
    /// phonons at A₋ = (ηΩ)²/Γ_eff while off-resonant carrier scattering
    /// feeds them back at A₊ = A₋·(Γ_eff/(2ω_trap))², giving the usual
    /// resolved-sideband limit n̄_ss ≈ (Γ_eff/(2ω_trap))².
    pub fn from_drive(
        eta: f64,
        omega_rabi: f64,
        effective_linewidth: f64,
        omega_trap: f64,
        duration: f64,
    ) -> Result<Self> {
        if eta <= 0.0 || omega_rabi <= 0.0 {
            return Err(Error::domain("cooling drive requires η > 0 and Ω > 0"));
        }
        if effective_linewidth <= 0.0 {
            return Err(Error::domain("effective linewidth must be positive"));
        }
        if effective_linewidth >= 2.0 * omega_trap {
            return Err(Error::domain(
                "sideband cooling requires the resolved regime Γ_eff < 2ω_trap",
            ));
        }
        let a_minus = (eta * omega_rabi).powi(2) / effective_linewidth;
        let a_plus = a_minus * (effective_linewidth / (2.0 * omega_trap)).powi(2);
        CoolingParams::new(a_minus, a_plus, duration)
    }
}

/// Expand a pulse into drive terms for sideband orders |s| ≤ s_max.
///
/// The laser detuning from the carrier is δ = (target offset) + extra
/// detuning; each term oscillates at Δ_s = s·ω_trap − δ. Exactly
/// 2·s_max + 1 terms are returned, carrier included.
pub fn build_drive(
    pulse: &Pulse,
    eta: f64,
    omega_trap: f64,
    s_max: usize,
) -> Result<Vec<DriveTerm>> {
    if eta < 0.0 {
        return Err(Error::domain("Lamb-Dicke parameter must be ≥ 0"));
    }
    if s_max < 1 {
        return Err(Error::domain("s_max must be at least 1"));
    }
    let delta = pulse_detuning(pulse, omega_trap);
    let half_rabi = pulse.rabi_frequency / 2.0;
    let mut terms = Vec::with_capacity(2 * s_max + 1);
    for s in -(s_max as i32)..=(s_max as i32) {
        terms.push(DriveTerm {
            sideband: s,
            half_rabi,
            detuning: s as f64 * omega_trap - delta,
            phase: pulse.phase,
            eta,
        });
    }
    Ok(terms)
}

/// Laser detuning δ = ω_laser − ω_atom implied by a pulse target.
pub fn pulse_detuning(pulse: &Pulse, omega_trap: f64) -> f64 {
    let base = match pulse.target {
        PulseTarget::Carrier => 0.0,
        PulseTarget::RedSideband(_) => -omega_trap,
        PulseTarget::BlueSideband(_) => omega_trap,
    };
    base + pulse.extra_detuning
}

// ---------------------------------------------------------------------------
// exact propagation of time-independent segments
// ---------------------------------------------------------------------------

/// Sparse triplet form of the coupling operator Σ (Ω/2)e^{iφ}σ₊⊗T_s + h.c.
struct CouplingTriplets {
    entries: Vec<(usize, usize, C64)>,
}

fn coupling_triplets(n_max: usize, terms: &[DriveTerm]) -> Result<CouplingTriplets> {
    let block = n_max + 1;
    let mut entries = Vec::new();
    for term in terms {
        let phase = C64::from_polar(term.half_rabi, term.phase);
        for n in 0..=n_max {
            let m = n as i64 + term.sideband as i64;
            if m < 0 || m > n_max as i64 {
                continue;
            }
            let elem = phase * displacement_element(n, term.sideband, term.eta)?;
            // σ₊ block: row in D manifold, column in S manifold
            entries.push((block + m as usize, n, elem));
        }
    }
    Ok(CouplingTriplets { entries })
}

/// Exact propagator for a drive whose detunings Δ_s are affine in s.
pub struct UnitaryPropagator {
    n_max: usize,
    eigenvalues: DVector<f64>,
    eigenvectors: DMatrix<C64>,
    /// Diagonal of the frame generator G = g_D·P_D + ω_eff·n̂.
    frame_diag: Vec<f64>,
}

impl UnitaryPropagator {
    /// Build the propagator, or fail if no exact rotating frame exists.
    pub fn new(n_max: usize, terms: &[DriveTerm]) -> Result<Self> {
        let (omega_eff, g_d) = affine_frame(terms)
            .ok_or_else(|| Error::integrator("drive detunings are not affine in sideband order"))?;
        let block = n_max + 1;
        let dim = 2 * block;

        let mut h = DMatrix::<C64>::zeros(dim, dim);
        // static frame: H = G + V, with V the coupling operator
        for n in 0..block {
            h[(n, n)] = C64::new(omega_eff * n as f64, 0.0);
            h[(block + n, block + n)] = C64::new(omega_eff * n as f64 + g_d, 0.0);
        }
        let trip = coupling_triplets(n_max, terms)?;
        for &(r, c, v) in &trip.entries {
            h[(r, c)] += v;
            h[(c, r)] += v.conj();
        }

        let (eigenvalues, eigenvectors) = jacobi_hermitian_eig(h);
        let mut frame_diag = vec![0.0; dim];
        for n in 0..block {
            frame_diag[n] = omega_eff * n as f64;
            frame_diag[block + n] = omega_eff * n as f64 + g_d;
        }
        Ok(UnitaryPropagator {
            n_max,
            eigenvalues: DVector::from_vec(eigenvalues),
            eigenvectors,
            frame_diag,
        })
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    /// Full unitary U(t) in the interaction picture.
    pub fn unitary(&self, t: f64) -> DMatrix<C64> {
        // W e^{-iΛt} W†
        let mut scaled = self.eigenvectors.clone();
        for (j, mut col) in scaled.column_iter_mut().enumerate() {
            let ph = C64::from_polar(1.0, -self.eigenvalues[j] * t);
            for x in col.iter_mut() {
                *x *= ph;
            }
        }
        let mut u = scaled * self.eigenvectors.adjoint();
        // rotate back to the interaction picture: e^{iGt} U
        for (i, mut row) in u.row_iter_mut().enumerate() {
            let ph = C64::from_polar(1.0, self.frame_diag[i] * t);
            for x in row.iter_mut() {
                *x *= ph;
            }
        }
        u
    }

    /// Evolve a state for time `t`.
    pub fn evolve(&self, state: &QuantumState, t: f64) -> QuantumState {
        let u = self.unitary(t);
        let rho = &u * state.density_matrix() * u.adjoint();
        QuantumState::from_parts(self.n_max, rho)
    }
}

/// Fit Δ_s = s·ω_eff + g_D over the term set; `None` if no exact fit exists.
fn affine_frame(terms: &[DriveTerm]) -> Option<(f64, f64)> {
    if terms.is_empty() {
        return Some((0.0, 0.0));
    }
    let n = terms.len() as f64;
    let sum_s: f64 = terms.iter().map(|t| t.sideband as f64).sum();
    let sum_ss: f64 = terms.iter().map(|t| (t.sideband as f64).powi(2)).sum();
    let sum_d: f64 = terms.iter().map(|t| t.detuning).sum();
    let sum_sd: f64 = terms.iter().map(|t| t.sideband as f64 * t.detuning).sum();
    let det = n * sum_ss - sum_s * sum_s;
    let (omega_eff, g_d) = if det.abs() < 1e-9 {
        // all terms share one sideband order
        (0.0, sum_d / n)
    } else {
        (
            (n * sum_sd - sum_s * sum_d) / det,
            (sum_ss * sum_d - sum_s * sum_sd) / det,
        )
    };
    let scale = terms
        .iter()
        .map(|t| t.detuning.abs())
        .fold(1.0f64, f64::max);
    let exact = terms
        .iter()
        .all(|t| (t.sideband as f64 * omega_eff + g_d - t.detuning).abs() <= 1e-9 * scale);
    exact.then_some((omega_eff, g_d))
}

/// Evolve a state unitarily under the drive terms for `duration`.
///
/// Term sets with an exact rotating frame (always the case for
/// [`build_drive`] output) are propagated by eigendecomposition, exact to
/// machine precision; other sets fall back to fixed-step RK4 with the step
/// shrunk as tol^(1/4).
pub fn evolve_unitary(
    state: &QuantumState,
    terms: &[DriveTerm],
    duration: f64,
    tol: f64,
) -> Result<QuantumState> {
    if duration < 0.0 {
        return Err(Error::domain("duration must be ≥ 0"));
    }
    if duration == 0.0 || terms.is_empty() {
        return Ok(state.clone());
    }
    if let Ok(prop) = UnitaryPropagator::new(state.n_max(), terms) {
        return Ok(prop.evolve(state, duration));
    }
    evolve_master_rk4(state, terms, &NoiseModel::none(), duration, tol)
}

/// Evolve a state under drive and Lindblad dissipators for `duration`.
///
/// Dissipators: dephasing √(γ_⊥/2)σ_z, phonon-conserving D → S decay, and
/// infinite-temperature heating (equal-rate a, a† jumps at ṅ_h).
pub fn evolve_lindblad(
    state: &QuantumState,
    terms: &[DriveTerm],
    noise: &NoiseModel,
    duration: f64,
    tol: f64,
) -> Result<QuantumState> {
    if duration < 0.0 {
        return Err(Error::domain("duration must be ≥ 0"));
    }
    if duration == 0.0 {
        return Ok(state.clone());
    }
    if noise.is_zero() {
        return evolve_unitary(state, terms, duration, tol);
    }
    let out = evolve_master_rk4(state, terms, noise, duration, tol)?;
    check_evolved_state(&out)?;
    Ok(out)
}

fn check_evolved_state(state: &QuantumState) -> Result<()> {
    let rho = state.density_matrix();
    let herm = (rho - rho.adjoint()).norm();
    if herm > 1e-8 {
        return Err(Error::integrator(format!(
            "Hermiticity violated after evolution (‖ρ−ρ†‖ = {herm:.3e})"
        )));
    }
    let tr = rho.trace();
    if (tr.re - 1.0).abs() > 1e-8 {
        return Err(Error::integrator(format!(
            "trace drifted to {} during evolution",
            tr.re
        )));
    }
    let min_eig = hermitian_eigenvalues(rho)
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    if min_eig < -1e-6 {
        return Err(Error::integrator(format!(
            "positivity violated beyond tolerance (min eigenvalue {min_eig:.3e})"
        )));
    }
    Ok(())
}

/// RK4 master-equation integrator in the interaction picture.
fn evolve_master_rk4(
    state: &QuantumState,
    terms: &[DriveTerm],
    noise: &NoiseModel,
    duration: f64,
    tol: f64,
) -> Result<QuantumState> {
    let n_max = state.n_max();
    let trip = coupling_triplets(n_max, terms)?;

    // characteristic rates: fastest phase, Rabi frequency, noise
    let max_detuning = terms.iter().map(|t| t.detuning.abs()).fold(0.0, f64::max);
    let max_rabi = terms.iter().map(|t| 2.0 * t.half_rabi).fold(0.0, f64::max);
    let noise_rate = noise
        .dephasing_rate
        .max(noise.d_decay_rate)
        .max(noise.heating_rate * (n_max as f64 + 1.0));

    let two_pi = 2.0 * std::f64::consts::PI;
    let mut dt = f64::INFINITY;
    if max_detuning > 0.0 {
        dt = dt.min(two_pi / (20.0 * max_detuning));
    }
    if max_rabi > 0.0 {
        dt = dt.min(two_pi / (40.0 * max_rabi));
    }
    if noise_rate > 0.0 {
        dt = dt.min(1.0 / (20.0 * noise_rate));
    }
    // shrink with tolerance: RK4 global error scales as dt⁴
    let refine = (tol / 1e-6).powf(0.25).clamp(0.01, 1.0);
    dt *= refine;
    if !dt.is_finite() {
        dt = duration;
    }
    let n_steps = (duration / dt).ceil().max(16.0);
    if n_steps > 5e7 {
        return Err(Error::integrator(format!(
            "step-size underflow: {n_steps:.1e} steps required"
        )));
    }
    let n_steps = n_steps as usize;
    let h = duration / n_steps as f64;

    let mut rho = state.density_matrix().clone();
    let dim = rho.nrows();
    let mut k1 = DMatrix::<C64>::zeros(dim, dim);
    let mut k2 = k1.clone();
    let mut k3 = k1.clone();
    let mut k4 = k1.clone();
    let mut tmp = k1.clone();

    // dst += w·src, elementwise
    fn add_scaled(dst: &mut DMatrix<C64>, w: f64, src: &DMatrix<C64>) {
        dst.iter_mut()
            .zip(src.iter())
            .for_each(|(d, s)| *d += w * s);
    }

    let rhs = |t: f64, r: &DMatrix<C64>, out: &mut DMatrix<C64>| {
        master_rhs(t, r, out, &trip, terms, noise, n_max);
    };

    for step in 0..n_steps {
        let t = step as f64 * h;
        rhs(t, &rho, &mut k1);
        tmp.copy_from(&rho);
        add_scaled(&mut tmp, h / 2.0, &k1);
        rhs(t + h / 2.0, &tmp, &mut k2);
        tmp.copy_from(&rho);
        add_scaled(&mut tmp, h / 2.0, &k2);
        rhs(t + h / 2.0, &tmp, &mut k3);
        tmp.copy_from(&rho);
        add_scaled(&mut tmp, h, &k3);
        rhs(t + h, &tmp, &mut k4);

        add_scaled(&mut rho, h / 6.0, &k1);
        add_scaled(&mut rho, h / 3.0, &k2);
        add_scaled(&mut rho, h / 3.0, &k3);
        add_scaled(&mut rho, h / 6.0, &k4);
    }

    Ok(QuantumState::from_parts(n_max, rho))
}

/// dρ/dt = −i[H(t), ρ] + dissipators, written into `out`.
fn master_rhs(
    t: f64,
    rho: &DMatrix<C64>,
    out: &mut DMatrix<C64>,
    trip: &CouplingTriplets,
    terms: &[DriveTerm],
    noise: &NoiseModel,
    n_max: usize,
) {
    let dim = rho.nrows();
    let block = n_max + 1;
    out.fill(C64::new(0.0, 0.0));

    // Hamiltonian part: the triplets were built per term in order, so the
    // phase of entry groups follows the term list.
    // -i (Hρ - ρH) with H = Σ_k e^{iΔ_k t}·A_k + h.c.
    let mut entry_idx = 0;
    for term in terms {
        // count entries for this term (same loop bounds as coupling_triplets)
        let mut count = 0;
        for n in 0..=n_max {
            let m = n as i64 + term.sideband as i64;
            if m >= 0 && m <= n_max as i64 {
                count += 1;
            }
        }
        let osc = C64::from_polar(1.0, term.detuning * t);
        for &(r, c, v) in &trip.entries[entry_idx..entry_idx + count] {
            let hv = v * osc; // H[r,c]; H[c,r] = conj
            let neg_i = C64::new(0.0, -1.0);
            // -i H ρ  and  +i ρ H for both (r,c) and (c,r) entries
            for j in 0..dim {
                let add = neg_i * hv * rho[(c, j)];
                out[(r, j)] += add;
                let add2 = neg_i * hv.conj() * rho[(r, j)];
                out[(c, j)] += add2;
            }
            for i in 0..dim {
                let sub = neg_i * rho[(i, r)] * hv;
                out[(i, c)] -= sub;
                let sub2 = neg_i * rho[(i, c)] * hv.conj();
                out[(i, r)] -= sub2;
            }
        }
        entry_idx += count;
    }

    // dephasing: electronic cross blocks decay at γ_⊥
    if noise.dephasing_rate > 0.0 {
        let g = noise.dephasing_rate;
        for i in 0..block {
            for j in block..dim {
                out[(i, j)] -= g * rho[(i, j)];
                out[(j, i)] -= g * rho[(j, i)];
            }
        }
    }

    // D → S decay, phonon-conserving
    if noise.d_decay_rate > 0.0 {
        let g = noise.d_decay_rate;
        for n in 0..block {
            for m in 0..block {
                let gain = g * rho[(block + n, block + m)];
                out[(n, m)] += gain;
                out[(block + n, block + m)] -= gain;
            }
        }
        for i in 0..block {
            for j in block..dim {
                out[(i, j)] -= 0.5 * g * rho[(i, j)];
                out[(j, i)] -= 0.5 * g * rho[(j, i)];
            }
        }
    }

    // heating: equal-rate a and a† jumps, acting on the Fock index only
    if noise.heating_rate > 0.0 {
        let g = noise.heating_rate;
        for e in 0..2usize {
            for f in 0..2usize {
                let ro = e * block;
                let co = f * block;
                for n in 0..block {
                    for m in 0..block {
                        let nn = n as f64;
                        let mm = m as f64;
                        let mut d = C64::new(0.0, 0.0);
                        // a ρ a†
                        if n + 1 < block && m + 1 < block {
                            d += ((nn + 1.0) * (mm + 1.0)).sqrt() * rho[(ro + n + 1, co + m + 1)];
                        }
                        // a† ρ a
                        if n >= 1 && m >= 1 {
                            d += (nn * mm).sqrt() * rho[(ro + n - 1, co + m - 1)];
                        }
                        // −½{a†a + aa†, ρ}, with aa† truncated consistently
                        let na = nn + if n + 1 < block { nn + 1.0 } else { 0.0 };
                        let nb = mm + if m + 1 < block { mm + 1.0 } else { 0.0 };
                        d -= 0.5 * (na + nb) * rho[(ro + n, co + m)];
                        out[(ro + n, co + m)] += g * d;
                    }
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// rate-equation sideband cooling
// ---------------------------------------------------------------------------

/// Evolve a phonon distribution under the sideband-cooling rate equations
/// dp_n/dt = A₋[(n+1)p_{n+1} − n p_n] + A₊[n p_{n−1} − (n+1)p_n],
/// written in flux form so that Σp_n is conserved exactly.
pub fn sideband_cool(
    dist: &PhononDistribution,
    params: &CoolingParams,
) -> Result<PhononDistribution> {
    CoolingParams::new(params.a_minus, params.a_plus, params.duration)?;
    let p0 = dist.probabilities().to_vec();
    let n_levels = p0.len();

    let rate_scale = (params.a_minus + params.a_plus) * n_levels as f64;
    let dt = 0.5 / rate_scale;
    let n_steps = (params.duration / dt).ceil().max(1.0) as usize;
    let h = params.duration / n_steps as f64;

    // dp/dt via bond fluxes: up_n = A₊(n+1)p_n (n→n+1), down_n = A₋ n p_n
    let rhs = |p: &[f64], out: &mut [f64]| {
        out.fill(0.0);
        for n in 0..n_levels {
            if n + 1 < n_levels {
                let up = params.a_plus * (n as f64 + 1.0) * p[n];
                out[n] -= up;
                out[n + 1] += up;
            }
            if n >= 1 {
                let down = params.a_minus * n as f64 * p[n];
                out[n] -= down;
                out[n - 1] += down;
            }
        }
    };

    let mut p = p0;
    let mut k1 = vec![0.0; n_levels];
    let mut k2 = vec![0.0; n_levels];
    let mut k3 = vec![0.0; n_levels];
    let mut k4 = vec![0.0; n_levels];
    let mut tmp = vec![0.0; n_levels];
    for _ in 0..n_steps {
        rhs(&p, &mut k1);
        for i in 0..n_levels {
            tmp[i] = p[i] + 0.5 * h * k1[i];
        }
        rhs(&tmp, &mut k2);
        for i in 0..n_levels {
            tmp[i] = p[i] + 0.5 * h * k2[i];
        }
        rhs(&tmp, &mut k3);
        for i in 0..n_levels {
            tmp[i] = p[i] + h * k3[i];
        }
        rhs(&tmp, &mut k4);
        for i in 0..n_levels {
            p[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    // clip RK4 rounding noise at the positivity boundary
    for x in &mut p {
        if *x < 0.0 && *x > -1e-12 {
            *x = 0.0;
        }
    }
    let sum: f64 = p.iter().sum();
    for x in &mut p {
        *x /= sum;
    }
    PhononDistribution::new(p)
}

// ---------------------------------------------------------------------------
// gate-speed limit scan
// ---------------------------------------------------------------------------

/// Result of a blue-sideband gate-speed scan.
#[derive(Debug, Clone)]
pub struct GateSpeedScan {
    /// Probed π-times, s.
    pub times: Vec<f64>,
    /// Infidelity 1 − P(D,1) at each π-time, drive tuned to the
    /// light-shifted sideband resonance.
    pub infidelity: Vec<f64>,
    /// Monotone non-increasing envelope (running maximum from the right).
    pub envelope: Vec<f64>,
    /// First time meeting the fidelity target (envelope-interpolated);
    /// `None` when the target is unreachable on the grid.
    pub t_min: Option<f64>,
}

/// Scan the infidelity of a blue-sideband π-pulse versus its duration.
///
/// For each grid time t the Rabi frequency is set so the resonant π-time
/// equals t; the state |S,0⟩ then evolves with the carrier and both first
/// sidebands retained. Off-resonant carrier coupling shifts the sideband
/// resonance, so the laser detuning is tuned to the dressed resonance
/// (coarse scan plus golden-section refinement around the second-order
/// light-shift estimate) before the infidelity 1 − P(D,1) is recorded.
pub fn gate_speed_scan(
    species: &IonSpecies,
    omega_mode: f64,
    eta: f64,
    fidelity_target: f64,
    t_grid: &[f64],
) -> Result<GateSpeedScan> {
    let _ = species; // geometry is already folded into η
    if omega_mode <= 0.0 {
        return Err(Error::domain("mode frequency must be positive"));
    }
    if !(0.0 < fidelity_target && fidelity_target < 1.0) {
        return Err(Error::domain("fidelity target must lie in (0,1)"));
    }
    if t_grid.is_empty() {
        return Err(Error::domain("time grid must not be empty"));
    }
    if t_grid.windows(2).any(|w| w[1] <= w[0]) || t_grid[0] <= 0.0 {
        return Err(Error::domain("time grid must be positive and ascending"));
    }

    let n_max = 8;
    let m01 = coupling_strength(0, 1, eta)?;
    let m00 = coupling_strength(0, 0, eta)?;
    let m11 = coupling_strength(1, 1, eta)?;
    let m21 = coupling_strength(1, 1, eta).and(coupling_strength(2, -1, eta))?;
    let state0 = QuantumState::ground(n_max);

    let infidelity_at = |omega_rabi: f64, delta: f64, t: f64| -> Result<f64> {
        let terms: Vec<DriveTerm> = (-1..=1)
            .map(|s| DriveTerm {
                sideband: s,
                half_rabi: omega_rabi / 2.0,
                detuning: s as f64 * omega_mode - delta,
                phase: 0.0,
                eta,
            })
            .collect();
        let prop = UnitaryPropagator::new(n_max, &terms)?;
        let out = prop.evolve(&state0, t);
        Ok(1.0 - out.population(Electronic::D, 1))
    };

    let mut infidelity = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        let omega_rabi = std::f64::consts::PI / (t * m01);
        // second-order light-shift estimate of the dressed-resonance offset
        let shift = omega_rabi * omega_rabi / (4.0 * omega_mode)
            * (m00 * m00 + m11 * m11 + 0.5 * m21 * m21);
        let best = if shift < 1e-9 * omega_mode {
            infidelity_at(omega_rabi, omega_mode, t)?
        } else {
            // coarse scan over the dressed-resonance neighborhood
            let lo = omega_mode - 3.0 * shift;
            let hi = omega_mode + 1.5 * shift;
            let coarse = 25usize;
            let mut best_k = 0usize;
            let mut best_v = f64::INFINITY;
            for k in 0..coarse {
                let d = lo + (hi - lo) * k as f64 / (coarse - 1) as f64;
                let v = infidelity_at(omega_rabi, d, t)?;
                if v < best_v {
                    best_v = v;
                    best_k = k;
                }
            }
            let step = (hi - lo) / (coarse - 1) as f64;
            let mut a = lo + step * (best_k.saturating_sub(1)) as f64;
            let mut b = (lo + step * (best_k + 1) as f64).min(hi);
            // golden-section refinement
            let gr = 0.5 * (5f64.sqrt() - 1.0);
            let mut x1 = b - gr * (b - a);
            let mut x2 = a + gr * (b - a);
            let mut f1 = infidelity_at(omega_rabi, x1, t)?;
            let mut f2 = infidelity_at(omega_rabi, x2, t)?;
            for _ in 0..40 {
                if f1 < f2 {
                    b = x2;
                    x2 = x1;
                    f2 = f1;
                    x1 = b - gr * (b - a);
                    f1 = infidelity_at(omega_rabi, x1, t)?;
                } else {
                    a = x1;
                    x1 = x2;
                    f1 = f2;
                    x2 = a + gr * (b - a);
                    f2 = infidelity_at(omega_rabi, x2, t)?;
                }
            }
            best_v.min(f1).min(f2)
        };
        infidelity.push(best.max(0.0));
    }

    // monotone non-increasing envelope: running max from the right
    let mut envelope = infidelity.clone();
    for k in (0..envelope.len().saturating_sub(1)).rev() {
        envelope[k] = envelope[k].max(envelope[k + 1]);
    }

    let target_inf = 1.0 - fidelity_target;
    let t_min = envelope.iter().position(|&e| e <= target_inf).map(|k| {
        if k == 0 {
            t_grid[0]
        } else {
            // log-space interpolation between the bracketing grid points
            let (e0, e1) = (envelope[k - 1], envelope[k]);
            if e0 <= 0.0 || e1 <= 0.0 || e0 <= target_inf {
                t_grid[k]
            } else {
                let f = (e0.ln() - target_inf.ln()) / (e0.ln() - e1.ln());
                t_grid[k - 1] + f.clamp(0.0, 1.0) * (t_grid[k] - t_grid[k - 1])
            }
        }
    });

    Ok(GateSpeedScan {
        times: t_grid.to_vec(),
        infidelity,
        envelope,
        t_min,
    })
}
