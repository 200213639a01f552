//! Experiment orchestration: JSON configuration, parameter sweeps with
//! resumable on-disk records, exponent fitting over sweep results, and
//! report generation.
//!
//! A sweep walks the `(h, κ)` grid of an [`ExperimentConfig`]: each point
//! runs the field minimizer, the phase-space (Weyl) expressions, and the
//! regularity diagnostics, then persists one [`SweepRecord`] under
//! `output_dir/p_<hash>/` alongside the minimizer state blobs. The
//! directory name is a content hash of the physics identity of the point
//! (potential, grid, h, κ, solver settings, seed — everything that affects
//! the numbers, and nothing that doesn't, so archives can be relocated), so
//! re-running the same sweep finds the finished points and skips them. The
//! top-level `index.csv` is rebuilt from the records at the end of every
//! run by the single sweep driver; records themselves are never rewritten.
//!
//! Fitting groups records by κ and regresses `log |Tr⁻ + Weyl₁|` (and the
//! gradient-corrected variant) against `log h` via
//! [`crate::scalelab::fit_exponent`] — both targets are fitted and labeled
//! because the asymptotic statements in the source material leave the
//! intended comparison ambiguous. Reports render a fixed-column table plus
//! a plot-ready CSV with the predicted remainder envelopes where they
//! apply.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dynamics::FlowConfig;
use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::grid::Grid;
use crate::localize::{build_partition, ism_check, localized_trace_minus};
use crate::pauli::{min_resolved_h, PauliOperator};
use crate::potential::{sample_potential, Preset};
use crate::scalelab::{fit_exponent, predicted_remainder, FitReport, ScaleState};
use crate::selfgen::{diagnostics, minimize, Diagnostics, MinimizeOptions, MinimizerState};
use crate::spectra::{SmoothingSpec, Solver};
use crate::weyl;

/// Serializable minimizer settings (the warm-start field of
/// [`MinimizeOptions`] is runtime-only and deliberately absent here).
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct MinimizerSettings {
    pub mixing: f64,
    pub max_iters: usize,
    pub tolerance: f64,
    pub solver: Solver,
}

impl Default for MinimizerSettings {
    fn default() -> Self {
        MinimizerSettings { mixing: 0.5, max_iters: 60, tolerance: 1e-3, solver: Solver::Dense }
    }
}

impl MinimizerSettings {
    pub fn to_options(&self, smoothing_l: Option<f64>) -> Result<MinimizeOptions> {
        let smoothing = match smoothing_l {
            Some(l) => Some(SmoothingSpec::new(l)?),
            None => None,
        };
        Ok(MinimizeOptions {
            mixing: self.mixing,
            max_iters: self.max_iters,
            tolerance: self.tolerance,
            smoothing,
            solver: self.solver.clone(),
            start: None,
        })
    }
}

/// A box-centered cutoff request for localized traces.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct CutoffSettings {
    /// Support radius of the cutoff around the box center.
    pub radius: f64,
    /// Fraction of the radius taken by the smooth ramp, in (0, 1].
    pub taper: f64,
}

/// One self-describing experiment: a potential, a grid, the `(h, κ)` sweep
/// lists, and the per-point analysis settings. `plan` emits this with every
/// default explicit so archived configs replay without ambiguity.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Potential preset sampled onto the grid.
    pub preset: Preset,
    /// Grid sites per axis.
    pub dims: [usize; 3],
    /// Periodic box lengths.
    pub box_len: [f64; 3],
    /// Semiclassical parameters to sweep (each must be resolvable on the
    /// grid).
    pub h_values: Vec<f64>,
    /// Field couplings to sweep.
    pub kappa_values: Vec<f64>,
    pub minimizer: MinimizerSettings,
    /// Optional trace-smoothing scale forwarded to the minimizer.
    pub smoothing_l: Option<f64>,
    /// Optional localized-trace cutoff (computed at the minimizer's A*).
    pub cutoff: Option<CutoffSettings>,
    /// Optional partition lattice scale for localization defect checks.
    pub partition_gamma: Option<f64>,
    /// Optional classical return-measure run configuration.
    pub dynamics: Option<FlowConfig>,
    pub output_dir: PathBuf,
    /// Master seed recorded into every point's identity.
    pub seed: u64,
}

impl ExperimentConfig {
    /// The fully-defaulted plan: a deep well on a 16³ torus of side 2π with
    /// a three-point h sweep at one coupling. Every field is explicit.
    pub fn plan() -> ExperimentConfig {
        ExperimentConfig {
            preset: Preset::default_well(),
            dims: [16; 3],
            box_len: [2.0 * std::f64::consts::PI; 3],
            h_values: vec![0.9, 0.75, 0.6],
            kappa_values: vec![0.5],
            minimizer: MinimizerSettings {
                solver: Solver::Iterative(Default::default()),
                ..Default::default()
            },
            smoothing_l: None,
            cutoff: Some(CutoffSettings { radius: 1.8, taper: 0.5 }),
            partition_gamma: Some(std::f64::consts::PI),
            dynamics: Some(FlowConfig {
                potential: crate::dynamics::ClassicalPotential::Harmonic,
                tau: 0.0,
                horizon: 4.0,
                step: 1e-3,
                return_radius: 1e-2,
                samples: 200,
                seed: 7,
            }),
            output_dir: PathBuf::from("out"),
            seed: 7,
        }
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.dims, self.box_len)
    }

    /// Collect every violation into one [`Error::InvalidConfig`], each
    /// message naming the offending field.
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        let grid = match self.grid() {
            Ok(g) => Some(g),
            Err(e) => {
                problems.push(format!("dims/box_len: {e}"));
                None
            }
        };
        if self.h_values.is_empty() {
            problems.push("h_values: list must be nonempty".into());
        }
        if self.kappa_values.is_empty() {
            problems.push("kappa_values: list must be nonempty".into());
        }
        if let Some(g) = &grid {
            let h_min = min_resolved_h(g);
            for (i, &h) in self.h_values.iter().enumerate() {
                if !h.is_finite() || h <= 0.0 {
                    problems.push(format!("h_values[{i}]: h = {h} must be positive and finite"));
                } else if h < h_min {
                    problems.push(format!(
                        "h_values[{i}]: h = {h} is unresolved on this grid (needs h >= {h_min:.6})"
                    ));
                }
            }
        }
        for (i, &k) in self.kappa_values.iter().enumerate() {
            if !k.is_finite() || k <= 0.0 {
                problems.push(format!("kappa_values[{i}]: kappa = {k} must be positive and finite"));
            }
        }
        if !(self.minimizer.mixing > 0.0 && self.minimizer.mixing <= 1.0) {
            problems.push(format!(
                "minimizer.mixing: {} must lie in (0, 1]",
                self.minimizer.mixing
            ));
        }
        if self.minimizer.max_iters == 0 {
            problems.push("minimizer.max_iters: must be at least 1".into());
        }
        if !(self.minimizer.tolerance > 0.0 && self.minimizer.tolerance.is_finite()) {
            problems.push(format!(
                "minimizer.tolerance: {} must be positive and finite",
                self.minimizer.tolerance
            ));
        }
        if let Some(l) = self.smoothing_l {
            if !(l > 0.0 && l.is_finite()) {
                problems.push(format!("smoothing_l: {l} must be positive and finite"));
            }
        }
        if let Some(c) = &self.cutoff {
            if !(c.radius > 0.0 && c.radius.is_finite()) {
                problems.push(format!("cutoff.radius: {} must be positive and finite", c.radius));
            }
            if !(c.taper > 0.0 && c.taper <= 1.0) {
                problems.push(format!("cutoff.taper: {} must lie in (0, 1]", c.taper));
            }
        }
        if let Some(g) = self.partition_gamma {
            if !(g > 0.0 && g.is_finite()) {
                problems.push(format!("partition_gamma: {g} must be positive and finite"));
            }
        }
        if let Some(d) = &self.dynamics {
            if let Err(e) = d.validate() {
                problems.push(format!("dynamics: {e}"));
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(problems))
        }
    }
}

/// Parse a config file; JSON syntax errors keep serde's line/column info.
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text)
        .map_err(|e| Error::InvalidConfig(vec![format!("{}: {e}", path.display())]))
}

/// Localization numbers computed at the minimizing field.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct LocalizedValues {
    /// Partition lattice scale the values were computed at.
    pub gamma: f64,
    pub members: usize,
    /// `sup |Σψ_j² − 1|` of the partition.
    pub completeness_defect: f64,
    /// Largest relative localization-identity defect over random spinors.
    pub ism_defect: f64,
    /// `Σ_j Tr⁻(ψ_j H ψ_j)` over the partition members.
    pub member_trace_sum: f64,
}

/// One persisted sweep point. Written once (append-only discipline): a
/// completed point is never rewritten by a resumed sweep, and re-running
/// with the same config and seed reproduces the values.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepRecord {
    pub h: f64,
    pub kappa: f64,
    /// Negative-eigenvalue sum at the minimizing field.
    pub trace_minus: f64,
    /// Total energy E(A*) = trace term + field term.
    pub energy: f64,
    /// Leading phase-space value (sign convention `Tr⁻ ≈ −weyl1`).
    pub weyl1: f64,
    /// Gradient-corrected phase-space value (unit correction constants).
    pub weyl_corrected: f64,
    pub field_energy: f64,
    pub el_residual: f64,
    pub converged: bool,
    pub iterations: usize,
    pub diagnostics: Diagnostics,
    pub localized: Option<LocalizedValues>,
    /// Localized trace through the configured box-center cutoff.
    pub cutoff_trace_minus: Option<f64>,
    /// Unix timestamps (seconds) bracketing the computation.
    pub started_at: u64,
    pub finished_at: u64,
    pub seed: u64,
}

/// Fixed column set of the sweep index CSV.
pub const INDEX_HEADER: &str =
    "h,kappa,trace_minus,energy,weyl1,weyl1_corr,field_energy,mu,el_residual,converged";

impl SweepRecord {
    pub fn index_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.h,
            self.kappa,
            self.trace_minus,
            self.energy,
            self.weyl1,
            self.weyl_corrected,
            self.field_energy,
            self.diagnostics.mu,
            self.el_residual,
            self.converged
        )
    }
}

/// Everything that determines a point's numbers — and nothing else. The
/// output directory is deliberately excluded so archives can move.
#[derive(Serialize)]
struct PointIdentity<'a> {
    preset: &'a Preset,
    dims: [usize; 3],
    box_len: [f64; 3],
    h: f64,
    kappa: f64,
    minimizer: &'a MinimizerSettings,
    smoothing_l: Option<f64>,
    cutoff: Option<CutoffSettings>,
    partition_gamma: Option<f64>,
    seed: u64,
}

/// Content hash naming a sweep point's directory: `p_<12 hex chars>`.
pub fn point_key(config: &ExperimentConfig, h: f64, kappa: f64) -> String {
    let identity = PointIdentity {
        preset: &config.preset,
        dims: config.dims,
        box_len: config.box_len,
        h,
        kappa,
        minimizer: &config.minimizer,
        smoothing_l: config.smoothing_l,
        cutoff: config.cutoff,
        partition_gamma: config.partition_gamma,
        seed: config.seed,
    };
    let canonical = serde_json::to_string(&identity).expect("identity serializes");
    let digest = Sha256::digest(canonical.as_bytes());
    let hex: String = digest.iter().take(6).map(|b| format!("{b:02x}")).collect();
    format!("p_{hex}")
}

fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

/// Run the full analysis of one `(h, κ)` point.
fn run_point(
    config: &ExperimentConfig,
    grid: &Grid,
    v: &ScalarField,
    h: f64,
    kappa: f64,
) -> Result<(SweepRecord, MinimizerState)> {
    let started_at = unix_now();
    let options = config.minimizer.to_options(config.smoothing_l)?;
    let state = minimize(v, h, kappa, &options)?;

    let wr = weyl::report(v, h, 0.0, 1.0, 1.0)?;
    // Reference magnetic scale at the canonical exponent pair (α, β) = (3/2, 0).
    let m_ref = ScaleState::new(h, kappa, 1.0, 1.5, 0.0)?.m;
    let diag = diagnostics(&state.a, h, kappa, m_ref)?;

    let op_needed = config.partition_gamma.is_some() || config.cutoff.is_some();
    let op = if op_needed {
        Some(PauliOperator::assemble(grid, state.a.clone(), v.clone(), h)?)
    } else {
        None
    };

    let localized = match (config.partition_gamma, &op) {
        (Some(gamma), Some(op)) => {
            let partition = build_partition(grid, gamma)?;
            let ism_defect = ism_check(op, &partition, 8)?;
            let mut member_trace_sum = 0.0;
            for psi in partition.members() {
                member_trace_sum +=
                    localized_trace_minus(op, psi, h, &config.minimizer.solver)?;
            }
            Some(LocalizedValues {
                gamma,
                members: partition.len(),
                completeness_defect: partition.completeness_defect(),
                ism_defect,
                member_trace_sum,
            })
        }
        _ => None,
    };

    let cutoff_trace_minus = match (&config.cutoff, &op) {
        (Some(c), Some(op)) => {
            let spec = crate::cutoff::make_cutoff(grid, grid.center(), c.radius, c.taper)?;
            Some(localized_trace_minus(op, &spec.psi, h, &config.minimizer.solver)?)
        }
        _ => None,
    };

    let record = SweepRecord {
        h,
        kappa,
        trace_minus: state.trace_minus,
        energy: state.energy,
        weyl1: wr.weyl1,
        weyl_corrected: wr.corrected,
        field_energy: state.field_energy,
        el_residual: state.el_residual,
        converged: state.converged,
        iterations: state.iterations,
        diagnostics: diag,
        localized,
        cutoff_trace_minus,
        started_at,
        finished_at: unix_now(),
        seed: config.seed,
    };
    Ok((record, state))
}

/// Outcome of a sweep run; `records` is sorted by `(h, κ)` and matches the
/// rebuilt `index.csv`.
#[derive(Clone, Debug)]
pub struct SweepOutcome {
    pub records: Vec<SweepRecord>,
    /// Points computed in this run.
    pub computed: usize,
    /// Points skipped because a finished record was found on disk.
    pub skipped: usize,
    pub index_path: PathBuf,
}

/// Run (or resume) the `(h, κ)` sweep. With `resume` set, points whose
/// record file already parses are loaded instead of recomputed — the
/// content-hashed directory name guarantees the record matches the config.
/// Points run on a worker pool of `workers` threads (`None` uses the global
/// pool); each point is independent, and the index CSV is rebuilt once at
/// the end by this single writer.
pub fn run_sweep(
    config: &ExperimentConfig,
    workers: Option<usize>,
    resume: bool,
) -> Result<SweepOutcome> {
    config.validate()?;
    let grid = config.grid()?;
    let v = sample_potential(&config.preset, &grid)?;
    fs::create_dir_all(&config.output_dir)?;

    let mut points = Vec::new();
    for &h in &config.h_values {
        for &kappa in &config.kappa_values {
            points.push((h, kappa));
        }
    }

    let run_all = || -> Result<Vec<(SweepRecord, bool)>> {
        points
            .par_iter()
            .map(|&(h, kappa)| {
                let dir = config.output_dir.join(point_key(config, h, kappa));
                let record_path = dir.join("record.json");
                if resume && record_path.exists() {
                    if let Ok(text) = fs::read_to_string(&record_path) {
                        if let Ok(record) = serde_json::from_str::<SweepRecord>(&text) {
                            return Ok((record, true));
                        }
                    }
                }
                let (record, state) = run_point(config, &grid, &v, h, kappa)?;
                fs::create_dir_all(&dir)?;
                state.save(&dir, "state")?;
                let json = serde_json::to_string_pretty(&record)
                    .map_err(|e| Error::FieldFormat(format!("record serialization: {e}")))?;
                fs::write(&record_path, json + "\n")?;
                Ok((record, false))
            })
            .collect()
    };

    let results = match workers {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| Error::Domain(format!("worker pool: {e}")))?;
            pool.install(run_all)?
        }
        None => run_all()?,
    };

    let skipped = results.iter().filter(|(_, s)| *s).count();
    let computed = results.len() - skipped;
    let mut records: Vec<SweepRecord> = results.into_iter().map(|(r, _)| r).collect();
    records.sort_by(|a, b| a.h.total_cmp(&b.h).then(a.kappa.total_cmp(&b.kappa)));

    let index_path = config.output_dir.join("index.csv");
    let mut index = String::from(INDEX_HEADER);
    index.push('\n');
    for r in &records {
        index.push_str(&r.index_row());
        index.push('\n');
    }
    fs::write(&index_path, index)?;

    Ok(SweepOutcome { records, computed, skipped, index_path })
}

/// One labeled exponent fit: which coupling, which comparison target.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct FitGroup {
    pub kappa: f64,
    /// `"weyl1"` or `"weyl1_corrected"` — both are fitted and labeled
    /// because the source asymptotics leave the intended target ambiguous.
    pub target: &'static str,
    pub fit: FitReport,
}

/// Fit `log |Tr⁻ + Weyl|` against `log h` per coupling, for both the
/// leading and the gradient-corrected Weyl value. Groups with fewer than
/// three distinct h are skipped; erroring only when nothing is fittable.
pub fn fit_sweep(records: &[SweepRecord]) -> Result<Vec<FitGroup>> {
    let mut kappas: Vec<f64> = records.iter().map(|r| r.kappa).collect();
    kappas.sort_by(f64::total_cmp);
    kappas.dedup();

    let mut groups = Vec::new();
    let mut best_distinct = 0usize;
    for &kappa in &kappas {
        let of_kappa: Vec<&SweepRecord> =
            records.iter().filter(|r| r.kappa == kappa).collect();
        let mut distinct: Vec<f64> = of_kappa.iter().map(|r| r.h).collect();
        distinct.sort_by(f64::total_cmp);
        distinct.dedup();
        best_distinct = best_distinct.max(distinct.len());
        if distinct.len() < 3 {
            continue;
        }
        let leading: Vec<(f64, f64)> = of_kappa
            .iter()
            .map(|r| (r.h, (r.trace_minus + r.weyl1).abs()))
            .collect();
        let corrected: Vec<(f64, f64)> = of_kappa
            .iter()
            .map(|r| (r.h, (r.trace_minus + r.weyl_corrected).abs()))
            .collect();
        groups.push(FitGroup { kappa, target: "weyl1", fit: fit_exponent(&leading)? });
        groups.push(FitGroup {
            kappa,
            target: "weyl1_corrected",
            fit: fit_exponent(&corrected)?,
        });
    }
    if groups.is_empty() {
        return Err(Error::InsufficientData { need: 3, got: best_distinct });
    }
    Ok(groups)
}

/// Fixed column set of the report CSV.
pub const REPORT_HEADER: &str = "h,kappa,energy,trace_minus,field_energy,weyl1,weyl1_corr,\
abs_err_weyl1,abs_err_weyl1_corr,remainder_value,remainder_regime";

/// Render the human-readable comparison table and the plot-ready CSV.
/// Every number is read straight off a [`SweepRecord`] (or is an arithmetic
/// combination of its fields); zero records produce a header-only table.
pub fn write_report(
    records: &[SweepRecord],
    table: &mut impl Write,
    csv: &mut impl Write,
) -> Result<()> {
    writeln!(
        table,
        "{:>8} {:>8} {:>14} {:>14} {:>14} {:>14} {:>12} {:>12} {:>18}",
        "h",
        "kappa",
        "energy",
        "weyl1",
        "weyl1_corr",
        "|Tr- + W1|",
        "remainder",
        "regime",
        "converged"
    )?;
    writeln!(csv, "{REPORT_HEADER}")?;
    for r in records {
        let err1 = (r.trace_minus + r.weyl1).abs();
        let err_corr = (r.trace_minus + r.weyl_corrected).abs();
        let remainder = if r.h > 0.0 && r.h < 1.0 {
            Some(predicted_remainder(r.kappa, r.h, 1.0, 1.0)?)
        } else {
            None
        };
        let (rem_value, regime) = match &remainder {
            Some(p) => (format!("{:.6e}", p.value), format!("{:?}", p.regime)),
            None => (String::new(), String::new()),
        };
        writeln!(
            table,
            "{:>8.4} {:>8.4} {:>14.6e} {:>14.6e} {:>14.6e} {:>14.6e} {:>12} {:>12} {:>18}",
            r.h, r.kappa, r.energy, r.weyl1, r.weyl_corrected, err1, rem_value, regime, r.converged
        )?;
        writeln!(
            csv,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.h,
            r.kappa,
            r.energy,
            r.trace_minus,
            r.field_energy,
            r.weyl1,
            r.weyl_corrected,
            err1,
            err_corr,
            rem_value,
            regime
        )?;
    }
    writeln!(table, "-- {} record(s)", records.len())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    /// Small, fast end-to-end config: a weak well binds nothing, so each
    /// point's minimizer contracts straight to the zero field.
    fn small_config(out: &Path) -> ExperimentConfig {
        ExperimentConfig {
            preset: Preset::GaussianWell { amplitude: 0.8, width: 0.8, floor: -0.3 },
            dims: [6; 3],
            box_len: [3.0; 3],
            h_values: vec![0.9, 0.8, 0.7],
            kappa_values: vec![0.5],
            minimizer: MinimizerSettings { max_iters: 40, ..Default::default() },
            smoothing_l: None,
            cutoff: None,
            partition_gamma: None,
            dynamics: None,
            output_dir: out.to_path_buf(),
            seed: 7,
        }
    }

    #[test]
    fn plan_is_valid_and_roundtrips_through_json() {
        let plan = ExperimentConfig::plan();
        plan.validate().unwrap();
        let json = serde_json::to_string_pretty(&plan).unwrap();
        let back: ExperimentConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(plan, back);
    }

    #[test]
    fn validation_collects_field_named_messages() {
        let mut config = ExperimentConfig::plan();
        config.h_values = vec![0.9, 0.01]; // 0.01 unresolved on 16³/2π
        config.kappa_values = vec![-1.0];
        config.minimizer.mixing = 1.5;
        config.partition_gamma = Some(-2.0);
        let err = config.validate().unwrap_err();
        assert!(err.is_validation());
        match &err {
            Error::InvalidConfig(problems) => {
                assert!(problems.len() >= 4, "got {problems:?}");
                assert!(problems.iter().any(|p| p.contains("h_values[1]")));
                assert!(problems.iter().any(|p| p.contains("kappa_values[0]")));
                assert!(problems.iter().any(|p| p.contains("minimizer.mixing")));
                assert!(problems.iter().any(|p| p.contains("partition_gamma")));
            }
            other => panic!("expected InvalidConfig, got {other:?}"),
        }

        let empty = ExperimentConfig { h_values: vec![], ..ExperimentConfig::plan() };
        let err = empty.validate().unwrap_err();
        match err {
            Error::InvalidConfig(problems) => {
                assert!(problems.iter().any(|p| p.contains("h_values")))
            }
            other => panic!("expected InvalidConfig, got {other:?}"),
        }
    }

    #[test]
    fn config_parse_errors_carry_position_info() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("bad.json");
        fs::write(&path, "{\n  \"preset\": {\n").unwrap();
        let err = load_config(&path).unwrap_err();
        match err {
            Error::InvalidConfig(problems) => {
                assert_eq!(problems.len(), 1);
                assert!(problems[0].contains("line"), "message: {}", problems[0]);
            }
            other => panic!("expected InvalidConfig, got {other:?}"),
        }
    }

    #[test]
    fn point_keys_separate_physics_but_not_location() {
        let dir = tempdir().unwrap();
        let config = small_config(dir.path());
        let base = point_key(&config, 0.9, 0.5);
        assert_eq!(base, point_key(&config, 0.9, 0.5));
        assert_ne!(base, point_key(&config, 0.8, 0.5));
        assert_ne!(base, point_key(&config, 0.9, 0.25));
        let reseeded = ExperimentConfig { seed: 8, ..config.clone() };
        assert_ne!(base, point_key(&reseeded, 0.9, 0.5));
        let moved = ExperimentConfig {
            output_dir: PathBuf::from("elsewhere"),
            ..config.clone()
        };
        assert_eq!(base, point_key(&moved, 0.9, 0.5));
        assert!(base.starts_with("p_") && base.len() == 14);
    }

    #[test]
    fn sweep_runs_persists_and_resumes() {
        let dir = tempdir().unwrap();
        let config = small_config(dir.path());
        let first = run_sweep(&config, Some(2), true).unwrap();
        assert_eq!(first.records.len(), 3);
        assert_eq!(first.computed, 3);
        assert_eq!(first.skipped, 0);
        for r in &first.records {
            assert!(r.converged, "point (h={}, κ={}) did not converge", r.h, r.kappa);
            assert!(r.weyl1 > 0.0);
            assert!(r.finished_at >= r.started_at);
            let key = point_key(&config, r.h, r.kappa);
            let point_dir = dir.path().join(key);
            assert!(point_dir.join("record.json").exists());
            assert!(point_dir.join("state.json").exists());
        }
        // h sorted ascending in the outcome and the index.
        assert!(first.records.windows(2).all(|w| w[0].h <= w[1].h));
        let index = fs::read_to_string(&first.index_path).unwrap();
        let lines: Vec<&str> = index.lines().collect();
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[0], INDEX_HEADER);
        assert_eq!(lines[1].split(',').count(), 10);

        // Second run: all three points are found on disk and skipped, and
        // the reloaded records agree bit-for-bit where it matters.
        let second = run_sweep(&config, Some(2), true).unwrap();
        assert_eq!(second.computed, 0);
        assert_eq!(second.skipped, 3);
        for (a, b) in first.records.iter().zip(&second.records) {
            assert_eq!(a.energy, b.energy);
            assert_eq!(a.trace_minus, b.trace_minus);
            assert_eq!(a.el_residual, b.el_residual);
            assert_eq!(a.weyl1, b.weyl1);
        }
    }

    fn synthetic_record(h: f64, kappa: f64, trace: f64, weyl1: f64) -> SweepRecord {
        SweepRecord {
            h,
            kappa,
            trace_minus: trace,
            energy: trace,
            weyl1,
            weyl_corrected: weyl1 * 1.01,
            field_energy: 0.0,
            el_residual: 0.0,
            converged: true,
            iterations: 1,
            diagnostics: Diagnostics {
                mu: 0.0,
                mu_bar: 1.0,
                m_ref: 1.0,
                sigma: 0.0,
                grad_norm: 0.0,
                holder_theta: 1.5,
                holder_seminorm: 0.0,
            },
            localized: None,
            cutoff_trace_minus: None,
            started_at: 0,
            finished_at: 0,
            seed: 7,
        }
    }

    #[test]
    fn fit_groups_by_coupling_and_recovers_the_exponent() {
        // Tr⁻ = −weyl1 − 2/h exactly: the leading-target error is 2·h⁻¹.
        let records: Vec<SweepRecord> = [0.9, 0.75, 0.6, 0.5]
            .iter()
            .map(|&h| synthetic_record(h, 0.5, -(10.0 + 2.0 / h), 10.0))
            .collect();
        let groups = fit_sweep(&records).unwrap();
        assert_eq!(groups.len(), 2);
        let leading = groups.iter().find(|g| g.target == "weyl1").unwrap();
        assert_eq!(leading.kappa, 0.5);
        assert!((leading.fit.full.p - 1.0).abs() <= 1e-10);
        assert!((leading.fit.full.constant - 2.0).abs() <= 1e-10);

        // Too few distinct h: nothing fittable.
        let short = &records[..2];
        assert!(matches!(
            fit_sweep(short),
            Err(Error::InsufficientData { need: 3, got: 2 })
        ));
    }

    #[test]
    fn report_renders_empty_and_populated_tables() {
        let mut table = Vec::new();
        let mut csv = Vec::new();
        write_report(&[], &mut table, &mut csv).unwrap();
        let table_text = String::from_utf8(table).unwrap();
        assert!(table_text.contains("0 record(s)"));
        let csv_text = String::from_utf8(csv).unwrap();
        assert_eq!(csv_text.lines().count(), 1);
        assert_eq!(csv_text.lines().next().unwrap(), REPORT_HEADER);

        let records = vec![
            synthetic_record(0.9, 0.5, -11.0, 10.0),
            synthetic_record(0.75, 0.5, -12.0, 11.0),
        ];
        let mut table = Vec::new();
        let mut csv = Vec::new();
        write_report(&records, &mut table, &mut csv).unwrap();
        let table_text = String::from_utf8(table).unwrap();
        assert!(table_text.contains("2 record(s)"));
        let csv_text = String::from_utf8(csv).unwrap();
        assert_eq!(csv_text.lines().count(), 3);
        let row: Vec<&str> = csv_text.lines().nth(1).unwrap().split(',').collect();
        assert_eq!(row.len(), 11);
        assert_eq!(row[0].parse::<f64>().unwrap(), 0.75); // sorted input order kept
    }
}
