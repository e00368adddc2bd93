//! The stepping loop.
//!
//! Each step evaluates the schedule in repeated ordered passes. Left limits
//! only depend on left limits and block state, so they are final after the
//! first pass; impulses and right limits may flow against the schedule
//! (an Integrator's jump depends on its current input's impulses) and settle
//! in later passes. A step is final once a pass changes nothing.
//!
//! Switch and Decision conditions are watched for sign changes. A trial step
//! that crosses one is bisected until the condition sits within `zc_tol` of
//! zero on the crossed side, and the step that follows an event step reuses
//! its size so that a numerically approximated impulse integrates to its
//! symbolic weight.

use thiserror::Error;

use super::algebraic::{check_linear_loop, solve_loop_samples, LoopError};
use super::flatten::{flatten, FlatGraph, FlattenError};
use super::trace::Trace;
use super::Model;
use crate::blocks::{
    self, heaviside, BlockError, BlockSpec, BlockState, Mode, StepContext, DEFAULT_DIV_TOLERANCE,
    DEFAULT_HISTORY_DEPTH,
};
use crate::signal::StepSample;

const ZENO_STREAK: usize = 1000;

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct SimConfig {
    pub mode: Mode,
    /// Nominal step.
    pub h: f64,
    pub t_end: f64,
    pub zc_tol: f64,
    /// Smallest bisected step.
    pub h_min: f64,
    /// Signals to record; empty means the top definition's outputs.
    pub watch: Vec<String>,
    pub max_order: u32,
    pub history_depth: usize,
    pub div_tolerance: f64,
}

impl SimConfig {
    pub fn new(mode: Mode, h: f64, t_end: f64) -> Self {
        Self {
            mode,
            h,
            t_end,
            zc_tol: 1e-9,
            h_min: 1e-12,
            watch: Vec::new(),
            max_order: 16,
            history_depth: DEFAULT_HISTORY_DEPTH,
            div_tolerance: DEFAULT_DIV_TOLERANCE,
        }
    }

    pub fn watching<S: Into<String>>(mut self, names: impl IntoIterator<Item = S>) -> Self {
        self.watch = names.into_iter().map(Into::into).collect();
        self
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |msg: &str| Err(SimError::InvalidConfig(msg.into()));
        if !(self.h > 0.0 && self.h.is_finite()) {
            return bad("step must be positive and finite");
        }
        if !(self.h_min > 0.0 && self.h_min <= self.h) {
            return bad("minimum step must satisfy 0 < h_min <= h");
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return bad("end time must be positive and finite");
        }
        if !(self.zc_tol > 0.0 && self.zc_tol.is_finite()) {
            return bad("zero-crossing tolerance must be positive and finite");
        }
        if self.history_depth == 0 {
            return bad("history depth must be at least 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Flatten(#[from] FlattenError),
    #[error("unknown signal `{0}`")]
    UnknownSignal(String),
    #[error("{0}")]
    Loop(#[from] LoopError),
    #[error("at t={t}: {source}")]
    Step { t: f64, source: StepError },
    #[error("more than {ZENO_STREAK} consecutive events before t={t}; Zeno behaviour suspected")]
    ZenoSuspected { t: f64 },
}

/// Failure while evaluating one step.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum StepError {
    #[error("block `{path}`: {source}")]
    Block { path: String, source: BlockError },
    #[error(transparent)]
    Loop(#[from] LoopError),
    #[error("signal `{path}` carries an impulse of order {order}, above the limit {limit}")]
    MaxOrderExceeded {
        path: String,
        order: u32,
        limit: u32,
    },
    #[error("impulses and right limits did not settle after {passes} passes")]
    UnresolvedFeedback { passes: usize },
}

/// Outcome of evaluating the graph at one trial time.
#[derive(Debug, Clone)]
struct Evaluation {
    samples: Vec<StepSample>,
    states: Vec<BlockState>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepReport {
    pub h: f64,
    /// The step was shortened (or kept) to land on a condition crossing.
    pub event: bool,
}

/// Owns the mutable state of one simulation run.
pub struct Simulator<'g> {
    graph: &'g FlatGraph,
    config: SimConfig,
    states: Vec<BlockState>,
    samples: Vec<StepSample>,
    time: f64,
    started: bool,
    pending_h: Option<f64>,
    event_streak: usize,
    streak_start: f64,
    warnings: Vec<String>,
}

impl<'g> Simulator<'g> {
    pub fn new(graph: &'g FlatGraph, config: SimConfig) -> Result<Self, SimError> {
        config.validate()?;
        for group in graph.schedule.iter().filter(|g| g.cyclic) {
            check_linear_loop(&graph.blocks, group)?;
        }
        let states = graph
            .blocks
            .iter()
            .map(|b| b.spec.initial_state(config.history_depth))
            .collect();
        Ok(Self {
            graph,
            states,
            samples: vec![StepSample::default(); graph.blocks.len()],
            time: 0.0,
            started: false,
            pending_h: None,
            event_streak: 0,
            streak_start: 0.0,
            warnings: Vec::new(),
            config,
        })
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    /// Last committed sample of every block output.
    pub fn samples(&self) -> &[StepSample] {
        &self.samples
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// Size of the next trial step before any event location.
    pub fn next_step_size(&self) -> f64 {
        self.pending_h.unwrap_or(self.config.h)
    }

    /// Commits the step at t = 0 from the blocks' initial states.
    pub fn initialize(&mut self) -> Result<(), SimError> {
        let ev = self
            .evaluate(0.0, self.config.h)
            .map_err(|source| SimError::Step { t: 0.0, source })?;
        self.samples = ev.samples;
        self.states = ev.states;
        self.started = true;
        Ok(())
    }

    /// Takes one step, shortened to a condition crossing when one occurs.
    pub fn advance(&mut self) -> Result<StepReport, SimError> {
        if !self.started {
            self.initialize()?;
        }
        let h = self.next_step_size();
        self.pending_h = None;
        let trial = self.trial(h)?;
        let (h, ev, event) = if self.crossed(&trial.samples).is_empty() {
            (h, trial, false)
        } else {
            let (h_star, ev) = self.locate_crossing(h, trial)?;
            (h_star, ev, true)
        };
        let before = self.time;
        self.time += h;
        self.samples = ev.samples;
        self.states = ev.states;
        if event {
            self.pending_h = Some(h);
            if self.event_streak == 0 {
                self.streak_start = before;
            }
            self.event_streak += 1;
            if self.event_streak > ZENO_STREAK
                && self.time - self.streak_start < self.config.h_min * ZENO_STREAK as f64
            {
                return Err(SimError::ZenoSuspected { t: self.time });
            }
        } else {
            self.event_streak = 0;
        }
        Ok(StepReport { h, event })
    }

    fn trial(&self, h: f64) -> Result<Evaluation, SimError> {
        let t = self.time + h;
        self.evaluate(t, h)
            .map_err(|source| SimError::Step { t, source })
    }

    /// Bisects the trial step `h`, whose end lies past a crossing, until the
    /// crossed conditions are within `zc_tol` of zero. Returns the committed
    /// step size and its evaluation.
    fn locate_crossing(&mut self, h: f64, at_h: Evaluation) -> Result<(f64, Evaluation), SimError> {
        let mut lo = 0.0;
        let mut hi = h;
        let mut hi_eval = at_h;
        loop {
            let worst = self
                .crossed(&hi_eval.samples)
                .into_iter()
                .fold(0.0f64, |m, c| m.max(c.abs()));
            if worst <= self.config.zc_tol {
                return Ok((hi, hi_eval));
            }
            let mid = lo + 0.5 * (hi - lo);
            if hi - lo <= self.config.h_min || mid <= lo || mid >= hi {
                self.warnings.push(format!(
                    "step underflow at t={:.17e}: crossing located to |c|={worst:e} > zc_tol",
                    self.time + hi
                ));
                return Ok((hi, hi_eval));
            }
            let ev = self.trial(mid)?;
            if self.crossed(&ev.samples).is_empty() {
                lo = mid;
            } else {
                hi = mid;
                hi_eval = ev;
            }
        }
    }

    /// Condition values of every Switch/Decision whose condition changed
    /// side between the last committed step and `trial`.
    fn crossed(&self, trial: &[StepSample]) -> Vec<f64> {
        if !self.started {
            return Vec::new();
        }
        self.graph
            .blocks
            .iter()
            .filter_map(|b| match b.spec {
                BlockSpec::Switch => Some(b.inputs[0]),
                BlockSpec::Decision => Some(b.inputs[2]),
                _ => None,
            })
            .filter_map(|c| {
                let before = heaviside(self.samples[c].right);
                let now = trial[c].left;
                (heaviside(now) != before).then_some(now)
            })
            .collect()
    }

    /// Evaluates every block at time `t` reached by a step of size `h`,
    /// without committing anything.
    fn evaluate(&self, t: f64, h: f64) -> Result<Evaluation, StepError> {
        let graph = self.graph;
        let ctx = StepContext {
            t,
            h,
            mode: self.config.mode,
            div_tolerance: self.config.div_tolerance,
        };
        let mut cur = vec![StepSample::default(); graph.blocks.len()];
        let mut next_states = self.states.clone();
        let max_passes = graph.schedule.len() + self.config.max_order as usize + 3;

        for pass in 0..max_passes {
            let mut changed = false;
            let mut failure: Option<StepError> = None;
            for group in &graph.schedule {
                if group.cyclic {
                    match solve_loop_samples(&graph.blocks, group, &cur) {
                        Ok(values) => {
                            for (&b, s) in group.blocks.iter().zip(values) {
                                changed |= cur[b] != s;
                                cur[b] = s;
                            }
                        }
                        Err(e) => {
                            failure.get_or_insert(e.into());
                        }
                    }
                    continue;
                }
                let b = group.blocks[0];
                let block = &graph.blocks[b];
                let result = {
                    let inputs: Vec<&StepSample> = block.inputs.iter().map(|&s| &cur[s]).collect();
                    blocks::step(&block.spec, &inputs, &self.states[b], &ctx)
                };
                match result {
                    Ok((s, st)) => {
                        changed |= cur[b] != s;
                        cur[b] = s;
                        next_states[b] = st;
                    }
                    Err(source) => {
                        failure.get_or_insert(StepError::Block {
                            path: block.path.clone(),
                            source,
                        });
                    }
                }
            }
            if pass > 0 && !changed {
                if let Some(e) = failure {
                    return Err(e);
                }
                for (b, s) in cur.iter().enumerate() {
                    if let Some(order) = s.impulses.max_order() {
                        if order > self.config.max_order {
                            return Err(StepError::MaxOrderExceeded {
                                path: graph.blocks[b].path.clone(),
                                order,
                                limit: self.config.max_order,
                            });
                        }
                    }
                }
                return Ok(Evaluation {
                    samples: cur,
                    states: next_states,
                });
            }
        }
        Err(StepError::UnresolvedFeedback { passes: max_passes })
    }
}

/// Flattens `top`, then steps until the next step would pass `t_end`.
pub fn simulate(model: &Model, top: &str, config: &SimConfig) -> Result<Trace, SimError> {
    config.validate()?;
    let flat = flatten(model, top)?;
    simulate_flat(&flat, config)
}

pub fn simulate_flat(flat: &FlatGraph, config: &SimConfig) -> Result<Trace, SimError> {
    let names = if config.watch.is_empty() {
        flat.default_watch()
    } else {
        config.watch.clone()
    };
    let watched: Vec<usize> = names
        .iter()
        .map(|n| {
            flat.signal_index(n)
                .ok_or_else(|| SimError::UnknownSignal(n.clone()))
        })
        .collect::<Result<_, _>>()?;

    let mut sim = Simulator::new(flat, config.clone())?;
    let mut trace = Trace::new(names);
    let row = |sim: &Simulator| watched.iter().map(|&i| sim.samples()[i].clone()).collect();

    sim.initialize()?;
    trace.push(0.0, row(&sim));
    // absorbs rounding in the accumulated time
    let slack = 1e-9 * config.h;
    while sim.time() + sim.next_step_size() <= config.t_end + slack {
        sim.advance()?;
        trace.push(sim.time(), row(&sim));
    }
    trace.warnings = sim.warnings().to_vec();
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Definition;
    use crate::signal::ImpulseVector;

    fn model(defs: Vec<Definition>) -> Model {
        Model { definitions: defs }
    }

    #[test]
    fn constant_model_repeats_itself() {
        let m = model(vec![Definition::new("Main")
            .output("y")
            .block("c", BlockSpec::Constant { value: 2.5 })
            .link("c.out", "y")]);
        let tr = simulate(&m, "Main", &SimConfig::new(Mode::Symbolic, 0.1, 1.0)).unwrap();
        assert_eq!(tr.len(), 11);
        assert!(tr.samples[0].iter().all(|s| *s == StepSample::value(2.5)));
    }

    #[test]
    fn end_before_first_step_keeps_initial_sample_only() {
        let m = model(vec![Definition::new("Main")
            .output("y")
            .block("c", BlockSpec::Constant { value: 1.0 })
            .link("c.out", "y")]);
        let tr = simulate(&m, "Main", &SimConfig::new(Mode::Symbolic, 0.1, 0.05)).unwrap();
        assert_eq!(tr.times, vec![0.0]);
    }

    #[test]
    fn free_fall_step() {
        let m = model(vec![Definition::new("Main")
            .output("v")
            .block("g", BlockSpec::Constant { value: -9.81 })
            .block("vel", BlockSpec::Integrator { init: 0.0 })
            .link("g.out", "vel.in")
            .link("vel.out", "v")]);
        let tr = simulate(&m, "Main", &SimConfig::new(Mode::Symbolic, 0.01, 0.03)).unwrap();
        let v: Vec<f64> = tr.samples[0].iter().map(|s| s.left).collect();
        assert_eq!(v[0], 0.0);
        for w in v.windows(2) {
            assert!((w[1] - w[0] + 9.81 * 0.01).abs() < 1e-12);
        }
    }

    #[test]
    fn linear_loop_is_solved_each_step() {
        // x = 0.5 x + 1
        let m = model(vec![Definition::new("Main")
            .output("x")
            .block("half", BlockSpec::Constant { value: 0.5 })
            .block("one", BlockSpec::Constant { value: 1.0 })
            .block("mul", BlockSpec::Multiplier { inputs: 2 })
            .block("sum", BlockSpec::Adder { inputs: 2 })
            .link("half.out", "mul.in1")
            .link("sum.out", "mul.in2")
            .link("mul.out", "sum.in1")
            .link("one.out", "sum.in2")
            .link("sum.out", "x")]);
        let tr = simulate(&m, "Main", &SimConfig::new(Mode::Symbolic, 0.1, 0.2)).unwrap();
        for s in &tr.samples[0] {
            assert!((s.left - 2.0).abs() < 1e-14);
        }
    }

    #[test]
    fn nonlinear_loop_is_rejected_up_front() {
        let m = model(vec![Definition::new("Main")
            .output("x")
            .block("inv", BlockSpec::Inverter)
            .block("neg", BlockSpec::Negator)
            .link("neg.out", "inv.in")
            .link("inv.out", "neg.in")
            .link("inv.out", "x")]);
        let err = simulate(&m, "Main", &SimConfig::new(Mode::Symbolic, 0.1, 1.0)).unwrap_err();
        assert!(matches!(
            err,
            SimError::Loop(LoopError::NonlinearLoop { .. })
        ));
    }

    #[test]
    fn exponential_growth_through_integrator_feedback() {
        // x' = x, x(0) = 1, explicit Euler gives (1 + h)^n
        let m = model(vec![Definition::new("Main")
            .output("x")
            .block("int", BlockSpec::Integrator { init: 1.0 })
            .link("int.out", "int.in")
            .link("int.out", "x")]);
        let tr = simulate(&m, "Main", &SimConfig::new(Mode::Symbolic, 0.5, 2.0)).unwrap();
        let x: Vec<f64> = tr.samples[0].iter().map(|s| s.left).collect();
        assert_eq!(x, vec![1.0, 1.5, 2.25, 3.375, 5.0625]);
    }

    #[test]
    fn block_errors_carry_the_path() {
        let m = model(vec![Definition::new("Main")
            .output("y")
            .block("z", BlockSpec::Constant { value: 0.0 })
            .block("inv", BlockSpec::Inverter)
            .link("z.out", "inv.in")
            .link("inv.out", "y")]);
        let err = simulate(&m, "Main", &SimConfig::new(Mode::Symbolic, 0.1, 1.0)).unwrap_err();
        match err {
            SimError::Step {
                source: StepError::Block { path, source },
                ..
            } => {
                assert_eq!(path, "inv");
                assert!(matches!(source, BlockError::DivisionNearZero { .. }));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn max_order_guard() {
        // Heaviside of (t - 0.25) differentiated three times: order 2 impulse.
        let m = model(vec![Definition::new("Main")
            .output("d3")
            .block("one", BlockSpec::Constant { value: 1.0 })
            .block("clock", BlockSpec::Integrator { init: 0.0 })
            .block("offset", BlockSpec::Constant { value: -0.25 })
            .block("cond", BlockSpec::Adder { inputs: 2 })
            .block("step", BlockSpec::Switch)
            .block("d1", BlockSpec::Derivative { init: 0.0 })
            .block("d2", BlockSpec::Derivative { init: 0.0 })
            .block("d3", BlockSpec::Derivative { init: 0.0 })
            .link("one.out", "clock.in")
            .link("clock.out", "cond.in1")
            .link("offset.out", "cond.in2")
            .link("cond.out", "step.c")
            .link("step.out", "d1.in")
            .link("d1.out", "d2.in")
            .link("d2.out", "d3.in")
            .link("d3.out", "d3")]);
        let mut cfg = SimConfig::new(Mode::Symbolic, 0.1, 1.0);
        let tr = simulate(&m, "Main", &cfg).unwrap();
        assert_eq!(tr.impulses.len(), 1);
        assert_eq!(tr.impulses[0].order, 2);
        cfg.max_order = 1;
        let err = simulate(&m, "Main", &cfg).unwrap_err();
        assert!(matches!(
            err,
            SimError::Step {
                source: StepError::MaxOrderExceeded { order: 2, .. },
                ..
            }
        ));
    }

    #[test]
    fn unknown_watch_name() {
        let m = model(vec![
            Definition::new("Main").block("c", BlockSpec::Constant { value: 1.0 })
        ]);
        let cfg = SimConfig::new(Mode::Symbolic, 0.1, 1.0).watching(["nope"]);
        assert_eq!(
            simulate(&m, "Main", &cfg),
            Err(SimError::UnknownSignal("nope".into()))
        );
    }

    #[test]
    fn invalid_config() {
        let mut cfg = SimConfig::new(Mode::Symbolic, 0.1, 1.0);
        cfg.h_min = 1.0;
        assert!(matches!(cfg.validate(), Err(SimError::InvalidConfig(_))));
        assert!(SimConfig::new(Mode::Symbolic, -1.0, 1.0)
            .validate()
            .is_err());
        assert!(SimConfig::new(Mode::Symbolic, 0.1, 0.0).validate().is_err());
    }

    #[test]
    fn crossing_on_a_grid_point_keeps_the_nominal_step() {
        // condition 0.25 * t - 0.5 hits zero exactly at t = 2 with h = 0.5
        let m = model(vec![Definition::new("Main")
            .output("s")
            .block("rate", BlockSpec::Constant { value: 0.25 })
            .block("clock", BlockSpec::Integrator { init: 0.0 })
            .block("offset", BlockSpec::Constant { value: -0.5 })
            .block("cond", BlockSpec::Adder { inputs: 2 })
            .block("sw", BlockSpec::Switch)
            .link("rate.out", "clock.in")
            .link("clock.out", "cond.in1")
            .link("offset.out", "cond.in2")
            .link("cond.out", "sw.c")
            .link("sw.out", "s")]);
        let tr = simulate(&m, "Main", &SimConfig::new(Mode::Symbolic, 0.5, 3.0)).unwrap();
        assert_eq!(tr.times, vec![0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0]);
        assert_eq!(tr.samples[0][4], StepSample::limits(0.0, 1.0));
        assert!(tr.impulses.is_empty());
        let _ = ImpulseVector::new();
    }
}
