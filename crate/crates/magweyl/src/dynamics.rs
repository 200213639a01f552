//! Classical phase-space flow and an estimator for the measure of
//! near-periodic orbits on an energy shell.
//!
//! The Hamiltonian is `H(x, ξ) = |ξ|² − V(x)` on ℝ³ × ℝ³, so the equations
//! of motion are `ẋ = 2ξ`, `ξ̇ = ∇V(x)`. Potentials are analytic callables
//! with exact gradients — never grid samples — so the flow is free of
//! interpolation error. The integrator is the symplectic kick–drift–kick
//! (velocity-Verlet) splitting, which conserves `H` to `O(step²)` uniformly
//! over the horizon and is exactly linear for constant potentials.
//!
//! [`periodic_measure`] estimates the Liouville fraction of the energy shell
//! `{ |ξ|² = V(x) + τ }` occupied by orbits that come back near their start:
//! the shell measure disintegrates as `dx · (r(x)/2) dΩ` with
//! `r(x) = √(V(x)+τ)`, so positions are drawn by rejection with the coarea
//! weight `r(x)` and momenta uniformly on the sphere of radius `r(x)`. An
//! orbit counts as returning once it first leaves the ball of radius `2ρ`
//! about its initial phase point and afterwards re-enters the ball of radius
//! `ρ`, at some time `t ≤ T`; the two-threshold rule discards the trivial
//! near-return at `t ≈ 0` that every continuous orbit exhibits. The estimate
//! is a plain sample fraction with a Wilson 95% confidence interval, and the
//! un-normalized shell volume is reported separately so fractions can be
//! converted to absolute measures.
//!
//! Sampling is deterministic for a fixed seed: sample `i` draws from its own
//! counter-mode RNG stream, so results are independent of thread scheduling.

use std::f64::consts::PI;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative energy drift the integrator is expected to hold over a
/// configured horizon; exceeding it means the step is too coarse for the
/// requested audit, exceeding [`STEP_INSTABILITY_TOL`] means the scheme is
/// outside its stability region altogether.
pub const FLOW_DRIFT_TOL: f64 = 1e-6;

/// Relative energy drift treated as a hard step instability: the flow
/// aborts with an error instead of returning a garbage trajectory.
pub const STEP_INSTABILITY_TOL: f64 = 1e-2;

/// Minimum Monte-Carlo sample count accepted by [`periodic_measure`].
pub const MIN_SAMPLES: usize = 100;

/// z-score of the two-sided 95% Wilson confidence interval.
const WILSON_Z: f64 = 1.959963984540054;

/// Midpoints per axis for the shell-volume quadrature.
const VOLUME_QUADRATURE_N: usize = 64;

/// Rejection-sampling attempts per sample before the shell is declared
/// effectively empty over the sampling box.
const MAX_REJECTION_ATTEMPTS: usize = 100_000;

/// Analytic potential presets for the classical flow. Values and gradients
/// are exact closed forms evaluated at arbitrary points of ℝ³.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ClassicalPotential {
    /// `V(x) = 1 − |x|²`. Every orbit of `ẋ = 2ξ, ξ̇ = −2x` is a circle of
    /// angular frequency 2, so the whole shell is periodic with period π.
    Harmonic,
    /// `V(x) ≡ level`. Force-free straight-line motion `x(t) = x₀ + 2ξ₀t`;
    /// no orbit returns. The sampling box is the unit cube about the origin
    /// (any box is equivalent by translation invariance).
    Free { level: f64 },
    /// `V(x) = 1 − |x|² − (strength/2)·Σ_a x_a⁴`, a softened well whose
    /// per-axis oscillation period depends on amplitude. Orbits are
    /// quasi-periodic on 3-tori, so only near-commensurate ones return
    /// within a finite horizon and the periodic measure sits strictly
    /// between 0 and 1.
    AnharmonicWell { strength: f64 },
}

impl ClassicalPotential {
    /// Potential value at `x`.
    pub fn value(&self, x: [f64; 3]) -> f64 {
        let r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
        match self {
            ClassicalPotential::Harmonic => 1.0 - r2,
            ClassicalPotential::Free { level } => *level,
            ClassicalPotential::AnharmonicWell { strength } => {
                let q4 = x.iter().map(|&c| c * c * c * c).sum::<f64>();
                1.0 - r2 - 0.5 * strength * q4
            }
        }
    }

    /// Exact gradient `∇V(x)`.
    pub fn grad(&self, x: [f64; 3]) -> [f64; 3] {
        match self {
            ClassicalPotential::Harmonic => [-2.0 * x[0], -2.0 * x[1], -2.0 * x[2]],
            ClassicalPotential::Free { .. } => [0.0; 3],
            ClassicalPotential::AnharmonicWell { strength } => {
                std::array::from_fn(|a| -2.0 * x[a] - 2.0 * strength * x[a] * x[a] * x[a])
            }
        }
    }

    /// Supremum of `V` over ℝ³ (all presets are bounded above).
    fn max_value(&self) -> f64 {
        match self {
            ClassicalPotential::Harmonic | ClassicalPotential::AnharmonicWell { .. } => 1.0,
            ClassicalPotential::Free { level } => *level,
        }
    }

    /// Reject non-finite parameters.
    fn validate_params(&self) -> Result<()> {
        let p = match self {
            ClassicalPotential::Harmonic => return Ok(()),
            ClassicalPotential::Free { level } => *level,
            ClassicalPotential::AnharmonicWell { strength } => *strength,
        };
        if !p.is_finite() {
            return Err(Error::Domain("classical potential parameter must be finite".into()));
        }
        Ok(())
    }

    /// Half-side of the cubic sampling box that contains the energy shell
    /// `{ V + τ ≥ 0 }`, or [`Error::EmptyShell`] when that set is empty.
    ///
    /// For the well presets `V ≤ 1 − |x|²`, so the shell lies inside the
    /// ball of radius `√(1+τ)` and is empty when `1 + τ ≤ 0` (the softening
    /// term only shrinks it further; a negative softening strength would
    /// unbound the shell and is rejected). The free preset has an unbounded
    /// translation-invariant shell, represented by the unit box.
    fn sampling_half_side(&self, tau: f64) -> Result<f64> {
        match self {
            ClassicalPotential::Harmonic => {
                if 1.0 + tau <= 0.0 {
                    return Err(Error::EmptyShell);
                }
                Ok((1.0 + tau).sqrt())
            }
            ClassicalPotential::Free { level } => {
                if level + tau < 0.0 {
                    return Err(Error::EmptyShell);
                }
                Ok(1.0)
            }
            ClassicalPotential::AnharmonicWell { strength } => {
                if *strength < 0.0 {
                    return Err(Error::Domain(
                        "anharmonic softening strength must be nonnegative so the energy shell stays bounded"
                            .into(),
                    ));
                }
                if 1.0 + tau <= 0.0 {
                    return Err(Error::EmptyShell);
                }
                Ok((1.0 + tau).sqrt())
            }
        }
    }
}

/// A point of phase space ℝ³ × ℝ³.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub x: [f64; 3],
    pub xi: [f64; 3],
}

/// Conserved energy `H(x, ξ) = |ξ|² − V(x)`.
pub fn classical_energy(potential: &ClassicalPotential, p: &PhasePoint) -> f64 {
    let k: f64 = p.xi.iter().map(|&c| c * c).sum();
    k - potential.value(p.x)
}

/// A discretely sampled orbit: state `k` is at time `times[k] = k·step`.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub positions: Vec<[f64; 3]>,
    pub momenta: Vec<[f64; 3]>,
    /// Energy of the initial state.
    pub initial_energy: f64,
    /// Largest relative energy deviation `|H(t) − H(0)| / max(|H(0)|, 1)`
    /// observed along the trajectory.
    pub max_energy_drift: f64,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn state(&self, k: usize) -> PhasePoint {
        PhasePoint { x: self.positions[k], xi: self.momenta[k] }
    }
}

/// One kick–drift–kick step of size `dt` for `ẋ = 2ξ`, `ξ̇ = ∇V(x)`.
#[inline]
fn verlet_step(potential: &ClassicalPotential, x: &mut [f64; 3], xi: &mut [f64; 3], dt: f64) {
    let g = potential.grad(*x);
    for a in 0..3 {
        xi[a] += 0.5 * dt * g[a];
    }
    for a in 0..3 {
        x[a] += dt * 2.0 * xi[a];
    }
    let g = potential.grad(*x);
    for a in 0..3 {
        xi[a] += 0.5 * dt * g[a];
    }
}

fn relative_drift(h: f64, h0: f64) -> f64 {
    (h - h0).abs() / h0.abs().max(1.0)
}

/// Integrate the flow of `H = |ξ|² − V` from `(x0, ξ0)` with a fixed step,
/// recording every state. The step count is `⌈horizon/step⌉`, so the
/// trajectory always covers the full horizon (overshooting the endpoint by
/// less than one step).
///
/// Errors with [`Error::SolveFailed`] if the state becomes non-finite or the
/// relative energy drift exceeds [`STEP_INSTABILITY_TOL`] — the signature of
/// a step outside the integrator's stability region.
pub fn flow(
    potential: &ClassicalPotential,
    x0: [f64; 3],
    xi0: [f64; 3],
    horizon: f64,
    step: f64,
) -> Result<Trajectory> {
    potential.validate_params()?;
    if !horizon.is_finite() || horizon <= 0.0 {
        return Err(Error::Domain("flow horizon must be finite and positive".into()));
    }
    if !step.is_finite() || step <= 0.0 {
        return Err(Error::Domain("flow step must be finite and positive".into()));
    }
    if x0.iter().chain(xi0.iter()).any(|c| !c.is_finite()) {
        return Err(Error::Domain("flow initial state must be finite".into()));
    }
    let n_steps = (horizon / step).ceil() as usize;
    if n_steps > 50_000_000 {
        return Err(Error::Domain(format!(
            "flow would take {n_steps} steps; shrink the horizon or grow the step"
        )));
    }

    let h0 = classical_energy(potential, &PhasePoint { x: x0, xi: xi0 });
    let mut x = x0;
    let mut xi = xi0;
    let mut times = Vec::with_capacity(n_steps + 1);
    let mut positions = Vec::with_capacity(n_steps + 1);
    let mut momenta = Vec::with_capacity(n_steps + 1);
    times.push(0.0);
    positions.push(x);
    momenta.push(xi);
    let mut max_drift = 0.0f64;
    for k in 1..=n_steps {
        verlet_step(potential, &mut x, &mut xi, step);
        if x.iter().chain(xi.iter()).any(|c| !c.is_finite()) {
            return Err(Error::SolveFailed(format!(
                "classical flow diverged to a non-finite state at t = {:.6}",
                k as f64 * step
            )));
        }
        let h = classical_energy(potential, &PhasePoint { x, xi });
        let drift = relative_drift(h, h0);
        if drift > STEP_INSTABILITY_TOL {
            return Err(Error::SolveFailed(format!(
                "step instability: relative energy drift {:.3e} at t = {:.6} (step {:.3e} is too coarse)",
                drift,
                k as f64 * step,
                step
            )));
        }
        max_drift = max_drift.max(drift);
        times.push(k as f64 * step);
        positions.push(x);
        momenta.push(xi);
    }
    Ok(Trajectory { times, positions, momenta, initial_energy: h0, max_energy_drift: max_drift })
}

/// Configuration of a periodic-measure estimation run.
///
/// Invariants checked by [`FlowConfig::validate`]: `step ≤ return_radius/10`
/// (so the return window is resolved by several steps), `samples ≥`
/// [`MIN_SAMPLES`], and positive finite `horizon`, `step`, `return_radius`.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct FlowConfig {
    pub potential: ClassicalPotential,
    /// Shell offset: momenta satisfy `|ξ|² = V(x) + tau`.
    pub tau: f64,
    /// Time horizon `T` within which a return must occur.
    pub horizon: f64,
    /// Integrator step.
    pub step: f64,
    /// Phase-space return radius ρ.
    pub return_radius: f64,
    /// Monte-Carlo sample count.
    pub samples: usize,
    /// Master RNG seed; sample `i` uses stream `i` of this seed.
    pub seed: u64,
}

impl FlowConfig {
    pub fn validate(&self) -> Result<()> {
        self.potential.validate_params()?;
        if !self.tau.is_finite() {
            return Err(Error::Domain("shell offset tau must be finite".into()));
        }
        if !self.horizon.is_finite() || self.horizon <= 0.0 {
            return Err(Error::Domain("horizon must be finite and positive".into()));
        }
        if !self.step.is_finite() || self.step <= 0.0 {
            return Err(Error::Domain("step must be finite and positive".into()));
        }
        if !self.return_radius.is_finite() || self.return_radius <= 0.0 {
            return Err(Error::Domain("return radius must be finite and positive".into()));
        }
        if self.step > self.return_radius / 10.0 * (1.0 + 1e-12) {
            return Err(Error::Domain(format!(
                "step {:.3e} must not exceed a tenth of the return radius {:.3e}",
                self.step, self.return_radius
            )));
        }
        if self.samples < MIN_SAMPLES {
            return Err(Error::Domain(format!(
                "need at least {MIN_SAMPLES} samples, got {}",
                self.samples
            )));
        }
        Ok(())
    }
}

/// One Monte-Carlo sample: the initial shell point and the first return
/// time (`None` if the orbit never re-entered the ρ-ball within the
/// horizon after leaving the 2ρ-ball).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub x: [f64; 3],
    pub xi: [f64; 3],
    pub return_time: Option<f64>,
}

/// Scalar summary of a periodic-measure run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasureSummary {
    /// Fraction of sampled shell measure on near-periodic orbits.
    pub estimate: f64,
    /// Wilson 95% confidence interval.
    pub ci_low: f64,
    pub ci_high: f64,
    pub returned: usize,
    pub samples: usize,
    /// Liouville volume `2π ∫ √(V+τ)₊ dx` of the shell over the sampling
    /// box (midpoint quadrature); reported separately so the normalized
    /// fraction can be converted to an absolute measure.
    pub shell_volume: f64,
    /// Mean of the recorded return times, when any orbit returned.
    pub mean_return_time: Option<f64>,
    /// Largest relative energy drift over all sampled trajectories.
    pub max_energy_drift: f64,
}

/// Full result: summary plus the per-sample records.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasureResult {
    pub summary: MeasureSummary,
    pub records: Vec<SampleRecord>,
}

impl MeasureResult {
    /// Write one CSV row per sample: initial phase point and return time
    /// (empty field when the orbit did not return).
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "x0,x1,x2,xi0,xi1,xi2,return_time")?;
        for r in &self.records {
            let t = r.return_time.map(|t| t.to_string()).unwrap_or_default();
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                r.x[0], r.x[1], r.x[2], r.xi[0], r.xi[1], r.xi[2], t
            )?;
        }
        Ok(())
    }

    /// Write the scalar summary as pretty JSON.
    pub fn write_json<W: Write>(&self, mut w: W) -> Result<()> {
        serde_json::to_writer_pretty(&mut w, &self.summary)
            .map_err(|e| Error::FieldFormat(format!("summary serialization failed: {e}")))?;
        writeln!(w)?;
        Ok(())
    }
}

/// Wilson 95% score interval for `k` successes in `n` trials.
fn wilson_interval(k: usize, n: usize) -> (f64, f64) {
    let n = n as f64;
    let p = k as f64 / n;
    let z2 = WILSON_Z * WILSON_Z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = WILSON_Z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Midpoint quadrature of the shell volume `2π ∫_box √(V+τ)₊ dx`.
fn shell_volume(potential: &ClassicalPotential, tau: f64, half_side: f64) -> f64 {
    let n = VOLUME_QUADRATURE_N;
    let cell = 2.0 * half_side / n as f64;
    let coord = |i: usize| -half_side + (i as f64 + 0.5) * cell;
    let mut sum = 0.0;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let v = potential.value([coord(i), coord(j), coord(k)]) + tau;
                if v > 0.0 {
                    sum += v.sqrt();
                }
            }
        }
    }
    2.0 * PI * sum * cell * cell * cell
}

/// Draw one Liouville-distributed shell point: positions by rejection with
/// the coarea weight `√(V+τ)₊`, momenta uniformly on the sphere of radius
/// `√(V(x)+τ)`.
fn draw_shell_point(
    potential: &ClassicalPotential,
    tau: f64,
    half_side: f64,
    w_max: f64,
    rng: &mut ChaCha8Rng,
) -> Result<PhasePoint> {
    for _ in 0..MAX_REJECTION_ATTEMPTS {
        let x: [f64; 3] = std::array::from_fn(|_| rng.gen_range(-half_side..half_side));
        let v = potential.value(x) + tau;
        let w = if v > 0.0 { v.sqrt() } else { 0.0 };
        if rng.gen::<f64>() * w_max <= w && w > 0.0 {
            // Uniform direction on S²: cos θ uniform in [−1, 1], φ uniform.
            let z = 2.0 * rng.gen::<f64>() - 1.0;
            let phi = 2.0 * PI * rng.gen::<f64>();
            let s = (1.0 - z * z).max(0.0).sqrt();
            let xi = [w * s * phi.cos(), w * s * phi.sin(), w * z];
            return Ok(PhasePoint { x, xi });
        }
    }
    // Only reachable when the accepted region has vanishing weight.
    Err(Error::EmptyShell)
}

/// Squared phase-space distance between `(x, ξ)` and `(x0, ξ0)`.
#[inline]
fn phase_dist2(x: &[f64; 3], xi: &[f64; 3], x0: &[f64; 3], xi0: &[f64; 3]) -> f64 {
    let mut d = 0.0;
    for a in 0..3 {
        let dx = x[a] - x0[a];
        let dxi = xi[a] - xi0[a];
        d += dx * dx + dxi * dxi;
    }
    d
}

/// Stream the orbit of `p0` for `⌊horizon/step⌋` steps and report the first
/// ρ-return time (two-threshold rule) plus the max relative energy drift.
fn integrate_return(
    potential: &ClassicalPotential,
    p0: PhasePoint,
    horizon: f64,
    step: f64,
    rho: f64,
) -> Result<(Option<f64>, f64)> {
    let n_steps = (horizon / step + 1e-9).floor() as usize;
    let h0 = classical_energy(potential, &p0);
    let mut x = p0.x;
    let mut xi = p0.xi;
    let rho2 = rho * rho;
    let depart2 = 4.0 * rho2;
    let mut armed = false;
    let mut max_drift = 0.0f64;
    for k in 1..=n_steps {
        verlet_step(potential, &mut x, &mut xi, step);
        if x.iter().chain(xi.iter()).any(|c| !c.is_finite()) {
            return Err(Error::SolveFailed(format!(
                "classical flow diverged to a non-finite state at t = {:.6}",
                k as f64 * step
            )));
        }
        let h = classical_energy(potential, &PhasePoint { x, xi });
        let drift = relative_drift(h, h0);
        if drift > STEP_INSTABILITY_TOL {
            return Err(Error::SolveFailed(format!(
                "step instability: relative energy drift {:.3e} at t = {:.6} (step {:.3e} is too coarse)",
                drift,
                k as f64 * step,
                step
            )));
        }
        max_drift = max_drift.max(drift);
        let d2 = phase_dist2(&x, &xi, &p0.x, &p0.xi);
        if !armed {
            if d2 >= depart2 {
                armed = true;
            }
        } else if d2 < rho2 {
            return Ok((Some(k as f64 * step), max_drift));
        }
    }
    Ok((None, max_drift))
}

/// Estimate the Liouville fraction of the energy shell
/// `{ |ξ|² = V(x) + τ }` carried by orbits that return to within
/// `return_radius` of their start (after first leaving twice that distance)
/// within the horizon.
///
/// Deterministic for a fixed seed: sample `i` draws from RNG stream `i`, so
/// the records are identical however the samples are scheduled across
/// threads. Errors: [`Error::Domain`] for invalid configuration,
/// [`Error::EmptyShell`] when `{V + τ ≥ 0}` is empty over the sampling box,
/// [`Error::SolveFailed`] on step instability.
pub fn periodic_measure(config: &FlowConfig) -> Result<MeasureResult> {
    config.validate()?;
    let half_side = config.potential.sampling_half_side(config.tau)?;
    let w_max2 = config.potential.max_value() + config.tau;
    if w_max2 <= 0.0 {
        return Err(Error::EmptyShell);
    }
    let w_max = w_max2.sqrt();
    let volume = shell_volume(&config.potential, config.tau, half_side);

    let drafted: Vec<(SampleRecord, f64)> = (0..config.samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(i as u64);
            let p0 = draw_shell_point(&config.potential, config.tau, half_side, w_max, &mut rng)?;
            let (return_time, drift) = integrate_return(
                &config.potential,
                p0,
                config.horizon,
                config.step,
                config.return_radius,
            )?;
            Ok((SampleRecord { x: p0.x, xi: p0.xi, return_time }, drift))
        })
        .collect::<Result<Vec<(SampleRecord, f64)>>>()?;

    let max_energy_drift = drafted.iter().map(|&(_, d)| d).fold(0.0f64, f64::max);
    let records: Vec<SampleRecord> = drafted.into_iter().map(|(r, _)| r).collect();

    let returned = records.iter().filter(|r| r.return_time.is_some()).count();
    let estimate = returned as f64 / config.samples as f64;
    let (ci_low, ci_high) = wilson_interval(returned, config.samples);
    let mean_return_time = if returned > 0 {
        let sum: f64 = records.iter().filter_map(|r| r.return_time).sum();
        Some(sum / returned as f64)
    } else {
        None
    };

    Ok(MeasureResult {
        summary: MeasureSummary {
            estimate,
            ci_low,
            ci_high,
            returned,
            samples: config.samples,
            shell_volume: volume,
            mean_return_time,
            max_energy_drift,
        },
        records,
    })
}
