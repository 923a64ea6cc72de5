//! Search orchestration: fixed planning, per-response surrogate refits,
//! candidate proposal, and per-seed bookkeeping.
//!
//! A run executes independent seeds. Each seed simulates a fixed planning
//! design, then iterates: fit one surrogate per response on everything
//! simulated so far (targets oriented so lower is always worse), propose
//! the most promising unvisited candidate per response, simulate it, and
//! fold the result back in. Worst cases and violations are recomputed from
//! the simulation log, never carried as separate mutable state.

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::acquisition::{
    lcb, refine_pool, select_candidate, AcquisitionError, GdOptions, DEFAULT_DUPLICATE_RADIUS,
};
use crate::circuit::{make_simulator, Simulator, SimulatorError};
use crate::hyperspace::{CircuitModel, ConfigurationPoint, ResponseSpec, SpaceError};
use crate::sampling::{evaluation_set, fixed_planning_set, DesignSet, SamplingError};
use crate::surrogate::{fit, FitOptions, SurrogateError, TrainedSurrogate};
use crate::surrogate::kernel::{KernelFamily, KernelParams};

/// How many of the lowest-scored evaluation points seed gradient
/// refinement each iteration.
pub const ACQUISITION_SEEDS: usize = 64;

#[derive(Debug, Error)]
pub enum PlannerError {
    #[error("invalid run configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Sampling(#[from] SamplingError),
    #[error(transparent)]
    Surrogate(#[from] SurrogateError),
    #[error(transparent)]
    Acquisition(#[from] AcquisitionError),
    #[error(transparent)]
    Simulator(#[from] SimulatorError),
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error("seed {seed} aborted after {simulated} simulations: {message}")]
    SeedAborted {
        seed: u64,
        simulated: usize,
        message: String,
    },
    #[error("no seed completed")]
    NoSeedsCompleted,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub model: CircuitModel,
    pub fp_budget: usize,
    pub ap_iterations: usize,
    pub eval_target: usize,
    pub seeds: Vec<u64>,
    pub kappa: f64,
    pub gd: GdOptions,
    pub kernel: KernelFamily,
    /// Hyperparameter restarts and optimizer evaluations for the first fit
    /// of a seed, and the cheaper warm-started refits after it.
    pub fit_restarts: usize,
    pub fit_max_evals: usize,
    pub refit_restarts: usize,
    pub refit_max_evals: usize,
    pub duplicate_radius: f64,
    /// Worker threads for seed-level parallelism.
    pub jobs: usize,
    /// Replaces the circuit file's external command when set.
    pub simulator_override: Option<Vec<String>>,
}

impl RunConfig {
    pub fn new(model: CircuitModel) -> Self {
        Self {
            model,
            fp_budget: 100,
            ap_iterations: 10,
            eval_target: crate::sampling::DEFAULT_EVAL_TARGET,
            seeds: (0..10).collect(),
            kappa: 2.0,
            gd: GdOptions::default(),
            kernel: KernelFamily::Matern52,
            fit_restarts: 8,
            fit_max_evals: 70,
            refit_restarts: 2,
            refit_max_evals: 40,
            duplicate_radius: DEFAULT_DUPLICATE_RADIUS,
            jobs: 1,
            simulator_override: None,
        }
    }

    pub fn validate(&self) -> Result<(), PlannerError> {
        self.model.validate()?;
        if self.fp_budget < 8 {
            return Err(PlannerError::Config(format!(
                "fp_budget must be at least 8, got {}",
                self.fp_budget
            )));
        }
        if self.seeds.is_empty() {
            return Err(PlannerError::Config("seeds must be non-empty".into()));
        }
        if !(self.kappa.is_finite() && self.kappa >= 0.0) {
            return Err(PlannerError::Config(format!(
                "kappa must be finite and non-negative, got {}",
                self.kappa
            )));
        }
        if self.eval_target < 4 {
            return Err(PlannerError::Config(format!(
                "eval_target must be at least 4, got {}",
                self.eval_target
            )));
        }
        if self.jobs == 0 {
            return Err(PlannerError::Config("jobs must be at least 1".into()));
        }
        Ok(())
    }
}

/// Simulation stage a point belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stage {
    Fp,
    /// 1-based adaptive iteration index.
    Ap(usize),
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Stage::Fp => write!(f, "FP"),
            Stage::Ap(i) => write!(f, "AP{i}"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimulatedPoint {
    pub point: ConfigurationPoint,
    pub responses: Vec<f64>,
    pub stage: Stage,
}

#[derive(Debug, Clone)]
pub struct BestSoFar {
    /// Raw response value.
    pub value: f64,
    /// Same value oriented so that lower is worse.
    pub oriented: f64,
    pub point: ConfigurationPoint,
    pub stage: Stage,
}

#[derive(Debug, Clone)]
pub struct ViolationRecord {
    pub value: f64,
    pub margin: f64,
    pub point: ConfigurationPoint,
    pub stage: Stage,
}

#[derive(Debug, Clone)]
pub struct IterationFault {
    pub iteration: usize,
    pub response: String,
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct RunState {
    pub seed: u64,
    pub simulated: Vec<SimulatedPoint>,
    pub best_so_far: Vec<Option<BestSoFar>>,
    pub violations: Vec<Vec<ViolationRecord>>,
    pub faults: Vec<IterationFault>,
}

impl RunState {
    fn new(seed: u64, n_responses: usize) -> Self {
        Self {
            seed,
            simulated: Vec::new(),
            best_so_far: vec![None; n_responses],
            violations: vec![Vec::new(); n_responses],
            faults: Vec::new(),
        }
    }

    /// Rebuilds worst cases and violation lists from the simulation log.
    pub fn recompute(&mut self, specs: &[ResponseSpec]) {
        self.best_so_far = vec![None; specs.len()];
        self.violations = vec![Vec::new(); specs.len()];
        for entry in &self.simulated {
            for (r, spec) in specs.iter().enumerate() {
                let value = entry.responses[r];
                let oriented = spec.orient(value);
                let better = match &self.best_so_far[r] {
                    Some(best) => oriented < best.oriented,
                    None => true,
                };
                if better {
                    self.best_so_far[r] = Some(BestSoFar {
                        value,
                        oriented,
                        point: entry.point.clone(),
                        stage: entry.stage,
                    });
                }
                let margin = spec.margin(value).expect("finite simulated value");
                if margin <= 0.0 {
                    self.violations[r].push(ViolationRecord {
                        value,
                        margin,
                        point: entry.point.clone(),
                        stage: entry.stage,
                    });
                }
            }
        }
    }

    /// Worst oriented value per response considering only stages up to and
    /// including `cut`.
    pub fn best_at_stage(&self, r: usize, cut: Stage, specs: &[ResponseSpec]) -> Option<BestSoFar> {
        let mut best: Option<BestSoFar> = None;
        for entry in &self.simulated {
            if entry.stage > cut {
                continue;
            }
            let value = entry.responses[r];
            let oriented = specs[r].orient(value);
            if best.as_ref().map_or(true, |b| oriented < b.oriented) {
                best = Some(BestSoFar {
                    value,
                    oriented,
                    point: entry.point.clone(),
                    stage: entry.stage,
                });
            }
        }
        best
    }
}

/// Per-response violation summary for one completed state.
#[derive(Debug, Clone)]
pub struct ViolationSummary {
    pub response: String,
    pub violated: bool,
    pub worst: Option<BestSoFar>,
}

pub fn detect_violation(state: &RunState, specs: &[ResponseSpec]) -> Vec<ViolationSummary> {
    specs
        .iter()
        .enumerate()
        .map(|(r, spec)| ViolationSummary {
            response: spec.name.clone(),
            violated: !state.violations[r].is_empty(),
            worst: state.best_so_far[r].clone(),
        })
        .collect()
}

/// One seed's full context: simulator, evaluation pool, RNG, warm-start
/// hyperparameters, and the growing state.
pub struct SeedRun<'a> {
    config: &'a RunConfig,
    seed: u64,
    sim: Box<dyn Simulator>,
    rng: ChaCha8Rng,
    state: RunState,
    /// Normalized coordinates of every simulated point, aligned with
    /// `state.simulated`.
    history: Vec<DVector<f64>>,
    eval_set: Option<DesignSet>,
    warm: Vec<Option<KernelParams>>,
}

fn seed_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

impl<'a> SeedRun<'a> {
    pub fn new(config: &'a RunConfig, seed: u64) -> Result<Self, PlannerError> {
        let sim = make_simulator(&config.model, config.simulator_override.as_deref())?;
        Ok(Self::with_simulator(config, seed, sim))
    }

    /// Injectable-simulator constructor, used by tests and by services that
    /// manage simulator processes themselves.
    pub fn with_simulator(config: &'a RunConfig, seed: u64, sim: Box<dyn Simulator>) -> Self {
        Self {
            config,
            seed,
            sim,
            rng: seed_rng(seed, 2),
            state: RunState::new(seed, config.model.n_responses()),
            history: Vec::new(),
            eval_set: None,
            warm: vec![None; config.model.n_responses()],
        }
    }

    pub fn state(&self) -> &RunState {
        &self.state
    }

    pub fn into_state(self) -> RunState {
        self.state
    }

    fn abort(&self, message: String) -> PlannerError {
        PlannerError::SeedAborted {
            seed: self.seed,
            simulated: self.state.simulated.len(),
            message,
        }
    }

    fn record(&mut self, point: ConfigurationPoint, responses: Vec<f64>, stage: Stage) {
        let x = self
            .config
            .model
            .normalize(&point)
            .expect("simulated point normalizes");
        self.history.push(x);
        self.state.simulated.push(SimulatedPoint {
            point,
            responses,
            stage,
        });
    }

    /// Generates and simulates the fixed planning design. Any simulator
    /// error aborts the seed; the partial log stays in the state.
    pub fn fixed_planning(&mut self) -> Result<(), PlannerError> {
        let mut rng = seed_rng(self.seed, 0);
        let design = fixed_planning_set(&self.config.model, self.config.fp_budget, &mut rng)?;
        for point in design.points {
            match self.sim.simulate(&point) {
                Ok(responses) => self.record(point, responses, Stage::Fp),
                Err(e) => {
                    self.state.recompute(&self.config.model.specs);
                    return Err(self.abort(format!("fixed planning simulation failed: {e}")));
                }
            }
        }
        self.state.recompute(&self.config.model.specs);
        Ok(())
    }

    fn eval_set(&mut self) -> Result<&DesignSet, PlannerError> {
        if self.eval_set.is_none() {
            let mut rng = seed_rng(self.seed, 1);
            let design = evaluation_set(&self.config.model, self.config.eval_target, &mut rng)?;
            self.eval_set = Some(design);
        }
        Ok(self.eval_set.as_ref().expect("just filled"))
    }

    /// One adaptive round: per response, fit on everything simulated so
    /// far, propose one candidate, simulate it. A simulator fault discards
    /// the round's partial results and is recorded; the seed continues. A
    /// closed channel aborts the seed.
    pub fn adaptive_iteration(&mut self, iteration: usize) -> Result<(), PlannerError> {
        if self.state.simulated.len() < 2 {
            return Err(PlannerError::Config(
                "adaptive iteration requires at least 2 simulated points".into(),
            ));
        }
        self.eval_set()?;
        let config = self.config;
        let model = &config.model;
        let n_resp = model.n_responses();

        let mut pending: Vec<(ConfigurationPoint, Vec<f64>, DVector<f64>)> = Vec::new();
        for r in 0..n_resp {
            let spec = &model.specs[r];
            let targets: Vec<f64> = self
                .state
                .simulated
                .iter()
                .map(|s| spec.orient(s.responses[r]))
                .collect();
            let opts = FitOptions {
                kernel: self.config.kernel,
                restarts: if self.warm[r].is_some() {
                    self.config.refit_restarts
                } else {
                    self.config.fit_restarts
                },
                max_evals: if self.warm[r].is_some() {
                    self.config.refit_max_evals
                } else {
                    self.config.fit_max_evals
                },
                warm_start: self.warm[r].clone(),
            };
            let surrogate = fit(&self.history, &targets, &opts, &mut self.rng)?;
            self.warm[r] = Some(surrogate.params().clone());

            let x = match self.propose(&surrogate, &pending)? {
                Some(x) => x,
                None => {
                    // Nothing proposable at all; record and move on.
                    self.state.faults.push(IterationFault {
                        iteration,
                        response: spec.name.clone(),
                        message: "candidate pool and evaluation set exhausted".into(),
                    });
                    continue;
                }
            };
            let point = model.denormalize(&x)?;
            match self.sim.simulate(&point) {
                Ok(responses) => pending.push((point, responses, x)),
                Err(e @ (SimulatorError::ChannelClosed | SimulatorError::Spawn(_))) => {
                    self.state.recompute(&model.specs);
                    return Err(self.abort(format!("simulator channel lost: {e}")));
                }
                Err(e) => {
                    self.state.faults.push(IterationFault {
                        iteration,
                        response: spec.name.clone(),
                        message: e.to_string(),
                    });
                    self.state.recompute(&model.specs);
                    return Ok(());
                }
            }
        }
        let stage = Stage::Ap(iteration);
        for (point, responses, _) in pending {
            self.record(point, responses, stage);
        }
        self.state.recompute(&model.specs);
        Ok(())
    }

    /// Candidate for one response: score the evaluation pool, refine the
    /// best seeds by gradient descent, pick the lowest non-duplicate; fall
    /// back to the raw evaluation set when refinement collapses onto
    /// history.
    fn propose(
        &mut self,
        surrogate: &TrainedSurrogate,
        pending: &[(ConfigurationPoint, Vec<f64>, DVector<f64>)],
    ) -> Result<Option<DVector<f64>>, PlannerError> {
        let corner_dims = self.config.model.corner_dims();
        let kappa = self.config.kappa;
        let eval = self.eval_set.as_ref().expect("eval set built");

        let predictions = surrogate.predict_many(&eval.normalized)?;
        let mut scored: Vec<(f64, usize)> = Vec::with_capacity(predictions.len());
        for (i, (mean, std)) in predictions.into_iter().enumerate() {
            scored.push((lcb(mean, std, kappa)?, i));
        }
        scored.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

        let seeds: Vec<DVector<f64>> = scored
            .iter()
            .take(ACQUISITION_SEEDS)
            .map(|&(_, i)| eval.normalized[i].clone())
            .collect();
        let pool = refine_pool(surrogate, &seeds, corner_dims, kappa, &self.config.gd)?;

        let mut history: Vec<DVector<f64>> = self.history.clone();
        history.extend(pending.iter().map(|(_, _, x)| x.clone()));

        match select_candidate(&pool, &history, self.config.duplicate_radius) {
            Ok(choice) => Ok(Some(choice.x.clone())),
            Err(AcquisitionError::Exhausted { .. }) => {
                for &(_, i) in &scored {
                    let x = &eval.normalized[i];
                    let dup = history
                        .iter()
                        .any(|h| (h - x).norm() < self.config.duplicate_radius);
                    if !dup {
                        return Ok(Some(x.clone()));
                    }
                }
                Ok(None)
            }
            Err(e) => Err(e.into()),
        }
    }

    /// Fixed planning plus the configured adaptive rounds.
    pub fn run_to_completion(&mut self) -> Result<(), PlannerError> {
        self.fixed_planning()?;
        for i in 1..=self.config.ap_iterations {
            self.adaptive_iteration(i)?;
        }
        Ok(())
    }
}

/// Fixed planning only, as its own operation: simulate the initial design
/// and return the populated state.
pub fn run_fixed_planning(config: &RunConfig, seed: u64) -> Result<RunState, PlannerError> {
    config.validate()?;
    let mut run = SeedRun::new(config, seed)?;
    run.fixed_planning()?;
    Ok(run.into_state())
}

/// One full seed.
pub fn run_seed(config: &RunConfig, seed: u64) -> Result<RunState, PlannerError> {
    config.validate()?;
    let mut run = SeedRun::new(config, seed)?;
    run.run_to_completion()?;
    Ok(run.into_state())
}

#[derive(Debug, Clone)]
pub struct FailedSeed {
    pub seed: u64,
    pub message: String,
    pub partial_simulations: usize,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub completed: Vec<RunState>,
    pub failed: Vec<FailedSeed>,
}

impl RunReport {
    pub fn any_violation(&self) -> bool {
        self.completed
            .iter()
            .any(|s| s.violations.iter().any(|v| !v.is_empty()))
    }

    pub fn total_simulations(&self) -> usize {
        self.completed.iter().map(|s| s.simulated.len()).sum()
    }
}

/// All seeds, optionally across worker threads. Seed results are reported
/// in configured order regardless of worker scheduling.
pub fn run(config: &RunConfig) -> Result<RunReport, PlannerError> {
    config.validate()?;
    let n = config.seeds.len();
    let jobs = config.jobs.min(n).max(1);
    let mut results: Vec<Option<Result<RunState, PlannerError>>> = Vec::new();
    results.resize_with(n, || None);

    if jobs == 1 {
        for (slot, &seed) in results.iter_mut().zip(&config.seeds) {
            *slot = Some(run_seed(config, seed));
        }
    } else {
        let slots: Vec<std::sync::Mutex<Option<Result<RunState, PlannerError>>>> =
            (0..n).map(|_| std::sync::Mutex::new(None)).collect();
        std::thread::scope(|scope| {
            for worker in 0..jobs {
                let slots = &slots;
                scope.spawn(move || {
                    for i in (worker..n).step_by(jobs) {
                        let out = run_seed(config, config.seeds[i]);
                        *slots[i].lock().expect("seed slot lock") = Some(out);
                    }
                });
            }
        });
        for (slot, cell) in results.iter_mut().zip(slots) {
            *slot = cell.into_inner().expect("seed slot lock");
        }
    }

    let mut completed = Vec::new();
    let mut failed = Vec::new();
    for (i, result) in results.into_iter().enumerate() {
        let seed = config.seeds[i];
        match result.expect("every seed produced a result") {
            Ok(state) => completed.push(state),
            Err(PlannerError::SeedAborted {
                simulated, message, ..
            }) => failed.push(FailedSeed {
                seed,
                message,
                partial_simulations: simulated,
            }),
            Err(e) => return Err(e),
        }
    }
    if completed.is_empty() {
        return Err(PlannerError::NoSeedsCompleted);
    }
    Ok(RunReport { completed, failed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::synthetic::tests::synth_model;
    use crate::circuit::synthetic::SyntheticSimulator;
    use crate::hyperspace::BackendConfig;

    fn small_config(d: usize) -> RunConfig {
        let (model, _) = synth_model(d);
        let mut config = RunConfig::new(model);
        config.fp_budget = 10;
        config.ap_iterations = 2;
        config.eval_target = 80;
        config.seeds = vec![0, 1];
        config.fit_restarts = 2;
        config.fit_max_evals = 25;
        config.refit_restarts = 1;
        config.refit_max_evals = 15;
        config
    }

    #[test]
    fn fixed_planning_simulates_whole_budget() {
        let config = small_config(2);
        let state = run_fixed_planning(&config, 7).unwrap();
        assert_eq!(state.simulated.len(), 10);
        assert!(state.simulated.iter().all(|s| s.stage == Stage::Fp));
        for (r, spec) in config.model.specs.iter().enumerate() {
            let manual = state
                .simulated
                .iter()
                .map(|s| spec.orient(s.responses[r]))
                .fold(f64::INFINITY, f64::min);
            assert_eq!(state.best_so_far[r].as_ref().unwrap().oriented, manual);
        }
        let again = run_fixed_planning(&config, 7).unwrap();
        assert_eq!(state.simulated.len(), again.simulated.len());
        for (a, b) in state.simulated.iter().zip(&again.simulated) {
            assert_eq!(a.point.oc_values, b.point.oc_values);
            for (x, y) in a.responses.iter().zip(&b.responses) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }

    #[test]
    fn adaptive_iteration_adds_one_simulation_per_response() {
        let config = small_config(2);
        let mut run = SeedRun::new(&config, 3).unwrap();
        run.fixed_planning().unwrap();
        let before = run.state().simulated.len();
        run.adaptive_iteration(1).unwrap();
        let state = run.state();
        assert_eq!(state.simulated.len(), before + 3);
        let ap: Vec<_> = state
            .simulated
            .iter()
            .filter(|s| s.stage == Stage::Ap(1))
            .collect();
        assert_eq!(ap.len(), 3);
    }

    #[test]
    fn full_run_counts_and_monotone_best() {
        let config = small_config(2);
        let report = run(&config).unwrap();
        assert_eq!(report.completed.len(), 2);
        assert!(report.failed.is_empty());
        // seeds × (fp + ap × n_responses)
        assert_eq!(report.total_simulations(), 2 * (10 + 2 * 3));
        for state in &report.completed {
            assert!(state.faults.is_empty());
            for r in 0..3 {
                let mut cuts = vec![Stage::Fp];
                cuts.extend((1..=config.ap_iterations).map(Stage::Ap));
                let mut prev = f64::INFINITY;
                for cut in cuts {
                    let best = state
                        .best_at_stage(r, cut, &config.model.specs)
                        .unwrap()
                        .oriented;
                    assert!(best <= prev + 1e-15);
                    prev = best;
                }
                assert_eq!(
                    prev,
                    state.best_so_far[r].as_ref().unwrap().oriented,
                    "final cut equals global best"
                );
            }
        }
    }

    #[test]
    fn same_seed_replays_bit_for_bit() {
        let config = small_config(2);
        let a = run_seed(&config, 5).unwrap();
        let b = run_seed(&config, 5).unwrap();
        assert_eq!(a.simulated.len(), b.simulated.len());
        for (x, y) in a.simulated.iter().zip(&b.simulated) {
            assert_eq!(x.stage, y.stage);
            assert_eq!(x.point.corner_code, y.point.corner_code);
            for (u, v) in x.point.oc_values.iter().zip(&y.point.oc_values) {
                assert_eq!(u.to_bits(), v.to_bits());
            }
            for (u, v) in x.responses.iter().zip(&y.responses) {
                assert_eq!(u.to_bits(), v.to_bits());
            }
        }
    }

    #[test]
    fn candidates_never_duplicate_history() {
        let config = small_config(2);
        let state = run_seed(&config, 1).unwrap();
        let xs: Vec<DVector<f64>> = state
            .simulated
            .iter()
            .map(|s| config.model.normalize(&s.point).unwrap())
            .collect();
        for i in 0..xs.len() {
            for j in (i + 1)..xs.len() {
                assert!(
                    (&xs[i] - &xs[j]).norm() >= config.duplicate_radius,
                    "points {i} and {j} are duplicates"
                );
            }
        }
    }

    struct FaultOnNth {
        inner: SyntheticSimulator,
        calls: usize,
        fault_at: usize,
    }

    impl Simulator for FaultOnNth {
        fn simulate(&mut self, point: &ConfigurationPoint) -> Result<Vec<f64>, SimulatorError> {
            self.calls += 1;
            if self.calls == self.fault_at {
                return Err(SimulatorError::Fault("injected".into()));
            }
            self.inner.simulate(point)
        }
    }

    #[test]
    fn fault_poisons_one_iteration_and_seed_continues() {
        let config = small_config(2);
        let (model, synth) = synth_model(2);
        // Fault on the second simulation of the first adaptive iteration.
        let sim = FaultOnNth {
            inner: SyntheticSimulator::new(model, synth),
            calls: 0,
            fault_at: config.fp_budget + 2,
        };
        let mut run = SeedRun::with_simulator(&config, 4, Box::new(sim));
        run.run_to_completion().unwrap();
        let state = run.into_state();
        assert_eq!(state.faults.len(), 1);
        assert_eq!(state.faults[0].iteration, 1);
        // The faulted iteration contributed nothing; the next one did.
        assert_eq!(state.simulated.len(), config.fp_budget + 3);
        assert!(state
            .simulated
            .iter()
            .all(|s| s.stage != Stage::Ap(1)));
        assert_eq!(
            state
                .simulated
                .iter()
                .filter(|s| s.stage == Stage::Ap(2))
                .count(),
            3
        );
    }

    #[test]
    fn fp_fault_aborts_seed_with_partial_log() {
        let config = small_config(2);
        let (model, synth) = synth_model(2);
        let sim = FaultOnNth {
            inner: SyntheticSimulator::new(model, synth),
            calls: 0,
            fault_at: 4,
        };
        let mut run = SeedRun::with_simulator(&config, 4, Box::new(sim));
        match run.fixed_planning() {
            Err(PlannerError::SeedAborted {
                seed, simulated, ..
            }) => {
                assert_eq!(seed, 4);
                assert_eq!(simulated, 3);
            }
            other => panic!("expected abort, got {other:?}"),
        }
        assert_eq!(run.state().simulated.len(), 3);
    }

    #[test]
    fn failed_seeds_are_reported_separately() {
        let (model, _) = synth_model(2);
        let mut config = RunConfig::new(model);
        // External backend without a command: every seed fails to spawn.
        config.model.backend = BackendConfig::External(crate::hyperspace::ExternalBackend {
            command: vec!["/nonexistent/simulator".into()],
            timeout_secs: 1.0,
        });
        config.seeds = vec![0];
        match run(&config) {
            Err(PlannerError::Simulator(SimulatorError::Spawn(_))) => {}
            other => panic!("expected spawn error, got {other:?}"),
        }
    }

    #[test]
    fn violation_detection_reads_the_log() {
        let mut config = small_config(2);
        // Thresholds chosen so the well response always violates and the
        // others never do: well stays below 10 everywhere.
        config.model.specs[0].threshold = 10.0;
        let state = run_seed(&config, 0).unwrap();
        let summary = detect_violation(&state, &config.model.specs);
        assert!(summary[0].violated);
        assert_eq!(summary[0].response, "well");
        assert_eq!(state.violations[0].len(), state.simulated.len());
        for v in &state.violations[0] {
            assert!(v.margin <= 0.0);
        }
        let empty = RunState::new(0, 3);
        let summary = detect_violation(&empty, &config.model.specs);
        assert!(summary.iter().all(|s| !s.violated && s.worst.is_none()));
    }

    #[test]
    fn parallel_jobs_match_serial_results() {
        let mut config = small_config(2);
        config.seeds = vec![0, 1, 2];
        let serial = run(&config).unwrap();
        config.jobs = 3;
        let parallel = run(&config).unwrap();
        assert_eq!(serial.completed.len(), parallel.completed.len());
        for (a, b) in serial.completed.iter().zip(&parallel.completed) {
            assert_eq!(a.seed, b.seed);
            assert_eq!(a.simulated.len(), b.simulated.len());
            for (x, y) in a.simulated.iter().zip(&b.simulated) {
                for (u, v) in x.responses.iter().zip(&y.responses) {
                    assert_eq!(u.to_bits(), v.to_bits());
                }
            }
        }
    }

    #[test]
    fn config_validation_names_the_field() {
        let (model, _) = synth_model(2);
        let mut config = RunConfig::new(model);
        config.fp_budget = 4;
        match config.validate() {
            Err(PlannerError::Config(msg)) => assert!(msg.contains("fp_budget")),
            other => panic!("expected config error, got {other:?}"),
        }
        let (model, _) = synth_model(2);
        let mut config = RunConfig::new(model);
        config.seeds.clear();
        assert!(config.validate().is_err());
        let (model, _) = synth_model(2);
        let mut config = RunConfig::new(model);
        config.kappa = f64::NAN;
        assert!(config.validate().is_err());
    }
}
