//! Equilibrium positions and normal modes of linear ion Coulomb crystals,
//! and identification of first- and second-order sideband lines in an
//! excitation spectrum.
//!
//! Positions are dimensionless, in units of the Coulomb length scale
//! ℓ = (e²/(4πε₀ M ω_z²))^{1/3}. The axial Hessian at equilibrium gives the
//! axial modes (COM at ω_z, breathing at √3·ω_z); the transverse Hessian is
//! an affine function of the axial one, giving the radial COM at ω_radial
//! and the two-ion rocking mode at √(ω_radial² − ω_z²).

use nalgebra::{DMatrix, DVector};

use crate::constants::COULOMB_E2;
use crate::error::{Error, Result};
use crate::quantum::{Axis, IonSpecies, TrapConfig};

/// Equilibrium of an N-ion linear crystal in dimensionless axial units.
#[derive(Debug, Clone, PartialEq)]
pub struct CrystalEquilibrium {
    pub n_ions: usize,
    /// Strictly increasing dimensionless positions, antisymmetric about 0.
    pub u: Vec<f64>,
}

impl CrystalEquilibrium {
    /// Largest force residual at the solution.
    pub fn residual(&self) -> f64 {
        gradient(&self.u).iter().fold(0.0f64, |a, g| a.max(g.abs()))
    }
}

/// Label of one normal mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModeLabel {
    /// In-phase axial oscillation at ω_z.
    Com,
    /// Out-of-phase axial stretch at √3·ω_z.
    Breathing,
    /// k-th higher axial mode.
    HigherAxial(usize),
    /// In-phase transverse oscillation at the radial trap frequency.
    RadialCom,
    /// Out-of-phase transverse tilt at √(ω_radial² − ω_axial²).
    Rocking,
    /// k-th higher transverse mode.
    HigherRadial(usize),
}

impl std::fmt::Display for ModeLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ModeLabel::Com => write!(f, "com"),
            ModeLabel::Breathing => write!(f, "breathing"),
            ModeLabel::HigherAxial(k) => write!(f, "axial-{k}"),
            ModeLabel::RadialCom => write!(f, "com"),
            ModeLabel::Rocking => write!(f, "rocking"),
            ModeLabel::HigherRadial(k) => write!(f, "radial-{k}"),
        }
    }
}

/// One normal mode: frequency, unit eigenvector over ions, label, axis.
#[derive(Debug, Clone, PartialEq)]
pub struct Mode {
    pub frequency: f64,
    pub eigenvector: Vec<f64>,
    pub label: ModeLabel,
    pub axis: Axis,
}

/// Normal modes, sorted by ascending frequency within each axis.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ModeSpectrum {
    pub modes: Vec<Mode>,
}

impl ModeSpectrum {
    pub fn merged(parts: Vec<ModeSpectrum>) -> ModeSpectrum {
        ModeSpectrum {
            modes: parts.into_iter().flat_map(|p| p.modes).collect(),
        }
    }

    pub fn find(&self, axis: Axis, label: ModeLabel) -> Option<&Mode> {
        self.modes
            .iter()
            .find(|m| m.axis == axis && m.label == label)
    }
}

/// A sideband line: |Σ c_k ω_k| with the signed composition over modes.
#[derive(Debug, Clone, PartialEq)]
pub struct SidebandLine {
    /// Magnitude of the detuning from the carrier, rad/s.
    pub detuning: f64,
    /// (mode index, coefficient) pairs with nonzero coefficients.
    pub composition: Vec<(usize, i32)>,
    /// Σ|c_k| ∈ {1, 2}.
    pub order: usize,
}

impl SidebandLine {
    /// Human-readable composition such as `breathing(y) - com(z)`.
    pub fn describe(&self, spectrum: &ModeSpectrum) -> String {
        let mut parts = Vec::new();
        for (idx, coeff) in &self.composition {
            let mode = &spectrum.modes[*idx];
            let name = format!("{}({})", mode.label, mode.axis);
            let piece = match coeff.abs() {
                1 => name,
                k => format!("{k}{name}"),
            };
            if parts.is_empty() {
                if *coeff < 0 {
                    parts.push(format!("-{piece}"));
                } else {
                    parts.push(piece);
                }
            } else if *coeff < 0 {
                parts.push(format!("- {piece}"));
            } else {
                parts.push(format!("+ {piece}"));
            }
        }
        parts.join(" ")
    }
}

// ---------------------------------------------------------------------------
// equilibrium
// ---------------------------------------------------------------------------

/// ∂V/∂u_m of V = Σ u²/2 + Σ_{i<j} 1/|u_i − u_j| for sorted positions.
fn gradient(u: &[f64]) -> Vec<f64> {
    let n = u.len();
    let mut g = vec![0.0; n];
    for m in 0..n {
        g[m] = u[m];
        for p in 0..n {
            if p == m {
                continue;
            }
            let d = u[m] - u[p];
            g[m] -= d.signum() / (d * d);
        }
    }
    g
}

/// Axial Hessian of the dimensionless potential at `u`.
fn axial_hessian(u: &[f64]) -> DMatrix<f64> {
    let n = u.len();
    DMatrix::from_fn(n, n, |m, p| {
        if m == p {
            let s: f64 = (0..n)
                .filter(|&q| q != m)
                .map(|q| 1.0 / (u[m] - u[q]).abs().powi(3))
                .sum();
            1.0 + 2.0 * s
        } else {
            -2.0 / (u[m] - u[p]).abs().powi(3)
        }
    })
}

/// Equally spaced Newton seed with spacing 2·N^0.56/N.
fn seed_positions(n: usize) -> Vec<f64> {
    let spacing = 2.0 * (n as f64).powf(0.56) / n as f64;
    (0..n)
        .map(|i| (i as f64 - (n as f64 - 1.0) / 2.0) * spacing)
        .collect()
}

/// Solve the force balance of an N-ion linear crystal by damped Newton
/// iteration from an equally spaced seed.
pub fn equilibrium_positions(n_ions: usize) -> Result<CrystalEquilibrium> {
    if n_ions < 1 || n_ions > 32 {
        return Err(Error::domain("crystal size must be between 1 and 32 ions"));
    }
    if n_ions == 1 {
        return Ok(CrystalEquilibrium {
            n_ions,
            u: vec![0.0],
        });
    }
    let mut u = seed_positions(n_ions);
    let mut g = gradient(&u);
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut gn = norm(&g);
    for _ in 0..200 {
        if gn < 1e-13 {
            break;
        }
        let hess = axial_hessian(&u);
        let rhs = DVector::from_iterator(u.len(), g.iter().map(|x| -x));
        let step = hess
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::solver("singular Hessian in Newton iteration"))?;
        // damped step with backtracking on the gradient norm
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let trial: Vec<f64> = u
                .iter()
                .zip(step.iter())
                .map(|(x, d)| x + alpha * d)
                .collect();
            let ordered = trial.windows(2).all(|w| w[1] > w[0]);
            if ordered {
                let gt = gradient(&trial);
                let gtn = norm(&gt);
                if gtn < gn {
                    u = trial;
                    g = gt;
                    gn = gtn;
                    accepted = true;
                    break;
                }
            }
            alpha *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    if gn >= 1e-12 {
        return Err(Error::solver(format!(
            "Newton iteration for {n_ions} ions stalled at residual {gn:.3e}"
        )));
    }
    Ok(CrystalEquilibrium { n_ions, u })
}

/// Coulomb length scale ℓ = (e²/(4πε₀ M ω_z²))^{1/3} in m.
pub fn length_scale(species: &IonSpecies, omega_z: f64) -> Result<f64> {
    if omega_z <= 0.0 {
        return Err(Error::domain("axial frequency must be positive"));
    }
    Ok((COULOMB_E2 / (species.mass() * omega_z * omega_z)).cbrt())
}

/// Physical ion positions u·ℓ in m.
pub fn physical_spacing(n_ions: usize, omega_z: f64, species: &IonSpecies) -> Result<Vec<f64>> {
    let eq = equilibrium_positions(n_ions)?;
    let scale = length_scale(species, omega_z)?;
    Ok(eq.u.iter().map(|u| u * scale).collect())
}

// ---------------------------------------------------------------------------
// normal modes
// ---------------------------------------------------------------------------

/// Eigenpairs of a symmetric matrix, ascending, with a deterministic
/// eigenvector sign (largest-magnitude component positive).
fn symmetric_eig_sorted(m: DMatrix<f64>) -> (Vec<f64>, Vec<Vec<f64>>) {
    let eig = nalgebra::SymmetricEigen::new(m);
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap());
    let mut values = Vec::with_capacity(n);
    let mut vectors = Vec::with_capacity(n);
    for &k in &order {
        values.push(eig.eigenvalues[k]);
        let mut v: Vec<f64> = eig.eigenvectors.column(k).iter().copied().collect();
        let lead = v
            .iter()
            .cloned()
            .max_by(|a, b| a.abs().partial_cmp(&b.abs()).unwrap())
            .unwrap_or(1.0);
        if lead < 0.0 {
            for x in &mut v {
                *x = -*x;
            }
        }
        vectors.push(v);
    }
    (values, vectors)
}

fn overlap(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    (dot / (na * nb)).abs()
}

/// Axial normal modes: eigenvalues λ_k of the axial Hessian give
/// frequencies √λ_k · ω_z.
pub fn axial_modes(n_ions: usize, omega_z: f64) -> Result<ModeSpectrum> {
    axial_modes_along(n_ions, omega_z, Axis::Z)
}

/// Axial modes with an explicit crystal axis (for crystals aligned along
/// x or y in a spherical trap).
pub fn axial_modes_along(n_ions: usize, omega_z: f64, axis: Axis) -> Result<ModeSpectrum> {
    if omega_z <= 0.0 {
        return Err(Error::domain("axial frequency must be positive"));
    }
    let eq = equilibrium_positions(n_ions)?;
    if n_ions == 1 {
        return Ok(ModeSpectrum {
            modes: vec![Mode {
                frequency: omega_z,
                eigenvector: vec![1.0],
                label: ModeLabel::Com,
                axis,
            }],
        });
    }
    let (values, vectors) = symmetric_eig_sorted(axial_hessian(&eq.u));
    let modes = values
        .into_iter()
        .zip(vectors)
        .enumerate()
        .map(|(k, (lam, v))| Mode {
            frequency: lam.max(0.0).sqrt() * omega_z,
            eigenvector: v,
            label: match k {
                0 => ModeLabel::Com,
                1 => ModeLabel::Breathing,
                k => ModeLabel::HigherAxial(k),
            },
            axis,
        })
        .collect();
    Ok(ModeSpectrum { modes })
}

/// Transverse normal modes along one radial axis.
///
/// The transverse Hessian is B = (α + 1/2)·I − A/2 with α = (ω_r/ω_z)² and
/// A the axial Hessian, so it shares the axial eigenvectors. An eigenvalue
/// ≤ 0 means the linear crystal is unstable and is reported as an error.
pub fn radial_modes(
    n_ions: usize,
    omega_radial: f64,
    omega_z: f64,
    axis: Axis,
) -> Result<ModeSpectrum> {
    if omega_radial <= 0.0 || omega_z <= 0.0 {
        return Err(Error::domain("trap frequencies must be positive"));
    }
    let eq = equilibrium_positions(n_ions)?;
    if n_ions == 1 {
        return Ok(ModeSpectrum {
            modes: vec![Mode {
                frequency: omega_radial,
                eigenvector: vec![1.0],
                label: ModeLabel::RadialCom,
                axis,
            }],
        });
    }
    let n = n_ions;
    let alpha = (omega_radial / omega_z).powi(2);
    let b = DMatrix::from_fn(n, n, |m, p| {
        if m == p {
            let s: f64 = (0..n)
                .filter(|&q| q != m)
                .map(|q| 1.0 / (eq.u[m] - eq.u[q]).abs().powi(3))
                .sum();
            alpha - s
        } else {
            1.0 / (eq.u[m] - eq.u[p]).abs().powi(3)
        }
    });
    let (values, vectors) = symmetric_eig_sorted(b);
    if values[0] <= 0.0 {
        return Err(Error::domain(format!(
            "linear crystal unstable along {axis}: transverse eigenvalue {:.3e} ≤ 0 \
             (ω_radial too small)",
            values[0]
        )));
    }
    let uniform: Vec<f64> = vec![1.0; n];
    let modes = values
        .into_iter()
        .zip(vectors)
        .enumerate()
        .map(|(k, (lam, v))| {
            let label = if overlap(&v, &uniform) > 0.99 {
                ModeLabel::RadialCom
            } else if overlap(&v, &eq.u) > 0.99 {
                ModeLabel::Rocking
            } else {
                ModeLabel::HigherRadial(k)
            };
            Mode {
                frequency: lam.sqrt() * omega_z,
                eigenvector: v,
                label,
                axis,
            }
        })
        .collect();
    Ok(ModeSpectrum { modes })
}

/// Full mode spectrum of a crystal in a trap: the crystal aligns along the
/// weakest axis; the other two axes carry transverse modes.
pub fn full_spectrum(n_ions: usize, trap: &TrapConfig) -> Result<ModeSpectrum> {
    let crystal_axis = trap.crystal_axis();
    let omega_axial = trap.secular_frequency(crystal_axis);
    let mut parts = vec![axial_modes_along(n_ions, omega_axial, crystal_axis)?];
    for axis in Axis::ALL {
        if axis == crystal_axis {
            continue;
        }
        parts.push(radial_modes(
            n_ions,
            trap.secular_frequency(axis),
            omega_axial,
            axis,
        )?);
    }
    Ok(ModeSpectrum::merged(parts))
}

// ---------------------------------------------------------------------------
// sideband identification
// ---------------------------------------------------------------------------

/// Enumerate all sideband lines |Σ c_k ω_k| with Σ|c_k| ≤ max_order,
/// deduplicated within 10⁻⁶ relative, zero-detuning differences suppressed.
pub fn identify_sidebands(spectrum: &ModeSpectrum, max_order: usize) -> Result<Vec<SidebandLine>> {
    if spectrum.modes.is_empty() {
        return Err(Error::domain("mode spectrum is empty"));
    }
    if !(1..=2).contains(&max_order) {
        return Err(Error::domain("sideband order must be 1 or 2"));
    }
    let omega: Vec<f64> = spectrum.modes.iter().map(|m| m.frequency).collect();
    let scale = omega.iter().cloned().fold(0.0f64, f64::max);
    let tol = 1e-6 * scale;

    let mut candidates: Vec<SidebandLine> = Vec::new();
    for k in 0..omega.len() {
        candidates.push(SidebandLine {
            detuning: omega[k],
            composition: vec![(k, 1)],
            order: 1,
        });
    }
    if max_order >= 2 {
        for k in 0..omega.len() {
            candidates.push(SidebandLine {
                detuning: 2.0 * omega[k],
                composition: vec![(k, 2)],
                order: 2,
            });
        }
        for j in 0..omega.len() {
            for k in (j + 1)..omega.len() {
                candidates.push(SidebandLine {
                    detuning: omega[j] + omega[k],
                    composition: vec![(j, 1), (k, 1)],
                    order: 2,
                });
                let diff = omega[j] - omega[k];
                let (detuning, comp) = if diff >= 0.0 {
                    (diff, vec![(j, 1), (k, -1)])
                } else {
                    (-diff, vec![(k, 1), (j, -1)])
                };
                candidates.push(SidebandLine {
                    detuning,
                    composition: comp,
                    order: 2,
                });
            }
        }
    }

    // suppress zero-detuning lines, dedupe by frequency, prefer lower order
    candidates.retain(|c| c.detuning > tol);
    candidates.sort_by(|a, b| {
        a.detuning
            .partial_cmp(&b.detuning)
            .unwrap()
            .then(a.order.cmp(&b.order))
    });
    let mut lines: Vec<SidebandLine> = Vec::new();
    for c in candidates {
        match lines.last() {
            Some(last) if (c.detuning - last.detuning).abs() <= tol => {}
            _ => lines.push(c),
        }
    }
    Ok(lines)
}
