//! Per-step semantics of the primitive blocks.
//!
//! Every block maps its input samples and persistent state to one output
//! sample and a successor state. Block evaluation is pure; the engine decides
//! when a successor state is committed.

use std::collections::VecDeque;
use std::fmt;

use thiserror::Error;

use crate::signal::{
    add_samples, extract_order_zero, leibniz_product, negate_sample, shift_orders_up, SignalError,
    StepSample,
};

/// Default threshold under which the Inverter refuses to divide.
pub const DEFAULT_DIV_TOLERANCE: f64 = 1e-300;

/// Samples kept per Multiplier input for derivative estimation, counting the
/// current one.
pub const DEFAULT_HISTORY_DEPTH: usize = 4;

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize, clap::ValueEnum,
)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Symbolic,
    Numerical,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Symbolic => "symbolic",
            Mode::Numerical => "numerical",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BlockError {
    #[error("more than one Multiplier input carries impulses")]
    BothInputsImpulsive,
    #[error("impulse of order {order} needs {needed} samples of the smooth factor, only {available} retained")]
    InsufficientHistory {
        order: u32,
        needed: usize,
        available: usize,
    },
    #[error("Inverter input carries impulses")]
    ImpulseOnInverter,
    #[error("Inverter input {value} is too close to zero")]
    DivisionNearZero { value: f64 },
    #[error("condition input carries impulses")]
    ImpulseOnCondition,
    #[error("Decision input carries impulses at a switching instant")]
    ImpulseAtSwitchingInstant,
    #[error("impulse reached a block in numerical mode")]
    ImpulseInNumericalMode,
    #[error("expected {expected} inputs, got {got}")]
    Arity { expected: usize, got: usize },
    #[error(transparent)]
    Signal(#[from] SignalError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BlockKind {
    Constant,
    Adder,
    Negator,
    Multiplier,
    Inverter,
    Integrator,
    Derivative,
    Switch,
    Decision,
    Delay,
}

impl BlockKind {
    pub const ALL: [BlockKind; 10] = [
        BlockKind::Constant,
        BlockKind::Adder,
        BlockKind::Negator,
        BlockKind::Multiplier,
        BlockKind::Inverter,
        BlockKind::Integrator,
        BlockKind::Derivative,
        BlockKind::Switch,
        BlockKind::Decision,
        BlockKind::Delay,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BlockKind::Constant => "Constant",
            BlockKind::Adder => "Adder",
            BlockKind::Negator => "Negator",
            BlockKind::Multiplier => "Multiplier",
            BlockKind::Inverter => "Inverter",
            BlockKind::Integrator => "Integrator",
            BlockKind::Derivative => "Derivative",
            BlockKind::Switch => "Switch",
            BlockKind::Decision => "Decision",
            BlockKind::Delay => "Delay",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == name)
    }

    /// Parameter names accepted in a block declaration. The first one may be
    /// given positionally.
    pub fn parameters(self) -> &'static [&'static str] {
        match self {
            BlockKind::Constant => &["value"],
            BlockKind::Adder | BlockKind::Multiplier => &["inputs"],
            BlockKind::Integrator | BlockKind::Derivative | BlockKind::Delay => &["init"],
            _ => &[],
        }
    }
}

/// A primitive block with its parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum BlockSpec {
    Constant { value: f64 },
    Adder { inputs: usize },
    Negator,
    Multiplier { inputs: usize },
    Inverter,
    Integrator { init: f64 },
    Derivative { init: f64 },
    Switch,
    Decision,
    Delay { init: f64 },
}

impl BlockSpec {
    pub fn kind(&self) -> BlockKind {
        match self {
            BlockSpec::Constant { .. } => BlockKind::Constant,
            BlockSpec::Adder { .. } => BlockKind::Adder,
            BlockSpec::Negator => BlockKind::Negator,
            BlockSpec::Multiplier { .. } => BlockKind::Multiplier,
            BlockSpec::Inverter => BlockKind::Inverter,
            BlockSpec::Integrator { .. } => BlockKind::Integrator,
            BlockSpec::Derivative { .. } => BlockKind::Derivative,
            BlockSpec::Switch => BlockKind::Switch,
            BlockSpec::Decision => BlockKind::Decision,
            BlockSpec::Delay { .. } => BlockKind::Delay,
        }
    }

    /// Input port names in evaluation order. Every primitive has the single
    /// output port `out`.
    pub fn input_ports(&self) -> Vec<String> {
        match self {
            BlockSpec::Constant { .. } => vec![],
            BlockSpec::Adder { inputs } | BlockSpec::Multiplier { inputs } => {
                (1..=*inputs).map(|i| format!("in{i}")).collect()
            }
            BlockSpec::Switch => vec!["c".into()],
            BlockSpec::Decision => vec!["u".into(), "v".into(), "c".into()],
            _ => vec!["in".into()],
        }
    }

    /// Whether the output at step n depends on the inputs at step n.
    /// Integrator and Delay only consume previous inputs for their
    /// impulse-free output.
    pub fn has_current_dependency(&self) -> bool {
        !matches!(self, BlockSpec::Integrator { .. } | BlockSpec::Delay { .. })
    }

    pub fn initial_state(&self, history_depth: usize) -> BlockState {
        match self {
            BlockSpec::Integrator { init } => BlockState::Integrator(IntegratorState::new(*init)),
            BlockSpec::Derivative { .. } => BlockState::Derivative { prev: None },
            BlockSpec::Delay { .. } => BlockState::Delay { prev: None },
            BlockSpec::Multiplier { inputs } => {
                BlockState::Multiplier(MultiplierHistory::new(*inputs, history_depth))
            }
            BlockSpec::Switch | BlockSpec::Decision => BlockState::Condition { prev: None },
            _ => BlockState::Stateless,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorState {
    /// Output right limit at the last committed step.
    pub acc: f64,
    /// Input left limit at the last committed step; `None` before the first.
    pub prev_input: Option<f64>,
}

impl IntegratorState {
    pub fn new(init: f64) -> Self {
        Self {
            acc: init,
            prev_input: None,
        }
    }
}

/// Recent left limits of every Multiplier input, newest first.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiplierHistory {
    depth: usize,
    times: VecDeque<f64>,
    values: Vec<VecDeque<f64>>,
}

impl MultiplierHistory {
    pub fn new(inputs: usize, depth: usize) -> Self {
        Self {
            depth: depth.max(1),
            times: VecDeque::new(),
            values: vec![VecDeque::new(); inputs],
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Records the current step's inputs.
    pub fn pushed(&self, t: f64, inputs: &[&StepSample]) -> Self {
        let mut next = self.clone();
        next.times.push_front(t);
        for (hist, s) in next.values.iter_mut().zip(inputs) {
            hist.push_front(s.left);
        }
        let keep = self.depth.saturating_sub(1);
        next.times.truncate(keep);
        for hist in &mut next.values {
            hist.truncate(keep);
        }
        next
    }

    /// Product of every input but `skip`, at each retained time.
    fn smooth_factor(&self, skip: usize) -> Vec<(f64, f64)> {
        self.times
            .iter()
            .enumerate()
            .map(|(n, &t)| {
                let u = self
                    .values
                    .iter()
                    .enumerate()
                    .filter(|&(j, _)| j != skip)
                    .fold(1.0, |acc, (_, h)| acc * h[n]);
                (t, u)
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum BlockState {
    Stateless,
    Integrator(IntegratorState),
    Derivative {
        prev: Option<StepSample>,
    },
    Delay {
        prev: Option<StepSample>,
    },
    Multiplier(MultiplierHistory),
    /// Switch and Decision remember the condition's last right limit.
    Condition {
        prev: Option<f64>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepContext {
    pub t: f64,
    pub h: f64,
    pub mode: Mode,
    pub div_tolerance: f64,
}

impl StepContext {
    pub fn new(t: f64, h: f64, mode: Mode) -> Self {
        Self {
            t,
            h,
            mode,
            div_tolerance: DEFAULT_DIV_TOLERANCE,
        }
    }
}

/// Heaviside step with `H(0) = 1`.
pub fn heaviside(x: f64) -> f64 {
    if x >= 0.0 {
        1.0
    } else {
        0.0
    }
}

/// Evaluates one block for one step.
pub fn step(
    spec: &BlockSpec,
    inputs: &[&StepSample],
    state: &BlockState,
    ctx: &StepContext,
) -> Result<(StepSample, BlockState), BlockError> {
    let expected = spec.input_ports().len();
    if inputs.len() != expected {
        return Err(BlockError::Arity {
            expected,
            got: inputs.len(),
        });
    }
    if ctx.mode == Mode::Numerical && inputs.iter().any(|s| s.has_impulses()) {
        return Err(BlockError::ImpulseInNumericalMode);
    }
    let unchanged = || state.clone();
    match (spec, state) {
        (BlockSpec::Constant { value }, _) => Ok((step_constant(*value), unchanged())),
        (BlockSpec::Adder { .. }, _) => Ok((step_adder(inputs), unchanged())),
        (BlockSpec::Negator, _) => Ok((step_negator(inputs[0]), unchanged())),
        (BlockSpec::Inverter, _) => Ok((step_inverter(inputs[0], ctx.div_tolerance)?, unchanged())),
        (BlockSpec::Multiplier { .. }, BlockState::Multiplier(hist)) => {
            let out = step_multiplier(inputs, hist, ctx.t)?;
            Ok((out, BlockState::Multiplier(hist.pushed(ctx.t, inputs))))
        }
        (BlockSpec::Integrator { .. }, BlockState::Integrator(st)) => {
            let (out, next) = step_integrator(inputs[0], st, ctx.h);
            Ok((out, BlockState::Integrator(next)))
        }
        (BlockSpec::Derivative { init }, BlockState::Derivative { prev }) => {
            let out = step_derivative(inputs[0], prev.as_ref(), *init, ctx.h);
            Ok((
                out,
                BlockState::Derivative {
                    prev: Some(inputs[0].clone()),
                },
            ))
        }
        (BlockSpec::Switch, BlockState::Condition { prev }) => {
            let out = step_switch(inputs[0], *prev, ctx.mode)?;
            Ok((
                out,
                BlockState::Condition {
                    prev: Some(inputs[0].right),
                },
            ))
        }
        (BlockSpec::Decision, BlockState::Condition { prev }) => {
            let out = step_decision(inputs[0], inputs[1], inputs[2], *prev, ctx.mode)?;
            Ok((
                out,
                BlockState::Condition {
                    prev: Some(inputs[2].right),
                },
            ))
        }
        (BlockSpec::Delay { init }, BlockState::Delay { prev }) => {
            let out = step_delay(prev.as_ref(), *init);
            Ok((
                out,
                BlockState::Delay {
                    prev: Some(inputs[0].clone()),
                },
            ))
        }
        (spec, state) => unreachable!("state {state:?} does not belong to {spec:?}"),
    }
}

pub fn step_constant(value: f64) -> StepSample {
    StepSample::value(value)
}

pub fn step_adder(inputs: &[&StepSample]) -> StepSample {
    let mut it = inputs.iter();
    let first = it.next().map(|s| (*s).clone()).unwrap_or_default();
    it.fold(first, |acc, s| add_samples(&acc, s))
}

pub fn step_negator(input: &StepSample) -> StepSample {
    negate_sample(input)
}

/// Product of the inputs. At most one input may carry impulses; those are
/// multiplied by the other inputs' product, whose derivatives come from
/// backward divided differences over the retained left limits.
pub fn step_multiplier(
    inputs: &[&StepSample],
    history: &MultiplierHistory,
    t: f64,
) -> Result<StepSample, BlockError> {
    let left = inputs.iter().fold(1.0, |acc, s| acc * s.left);
    let right = inputs.iter().fold(1.0, |acc, s| acc * s.right);

    let mut impulsive = inputs.iter().enumerate().filter(|(_, s)| s.has_impulses());
    let Some((carrier, v)) = impulsive.next() else {
        return Ok(StepSample::limits(left, right));
    };
    if impulsive.next().is_some() {
        return Err(BlockError::BothInputsImpulsive);
    }

    let order = v.impulses.max_order().unwrap_or(0);
    let needed = order as usize + 1;
    let available = history.len() + 1;
    if available < needed {
        return Err(BlockError::InsufficientHistory {
            order,
            needed,
            available,
        });
    }

    let current = inputs
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != carrier)
        .fold(1.0, |acc, (_, s)| acc * s.left);
    let mut points = Vec::with_capacity(needed);
    points.push((t, current));
    points.extend(history.smooth_factor(carrier).into_iter().take(needed - 1));

    let derivs = backward_derivatives(&points, needed);
    let impulses = leibniz_product(&derivs, &v.impulses)?;
    Ok(StepSample::new(left, right, impulses))
}

/// Estimates `u^(k)` for `k < count` at the newest point. `points` holds
/// `(t, u)` newest first; the `k`-th estimate is `k!` times the divided
/// difference over the `k + 1` newest points.
pub fn backward_derivatives(points: &[(f64, f64)], count: usize) -> Vec<f64> {
    let n = count.min(points.len());
    let mut table: Vec<f64> = points[..n].iter().map(|p| p.1).collect();
    let mut out = Vec::with_capacity(n);
    let mut factorial = 1.0;
    for k in 0..n {
        if k > 0 {
            factorial *= k as f64;
            for j in 0..n - k {
                table[j] = (table[j] - table[j + 1]) / (points[j].0 - points[j + k].0);
            }
        }
        out.push(factorial * table[0]);
    }
    out
}

pub fn step_inverter(input: &StepSample, div_tolerance: f64) -> Result<StepSample, BlockError> {
    if input.has_impulses() {
        return Err(BlockError::ImpulseOnInverter);
    }
    for value in [input.left, input.right] {
        if value.abs() <= div_tolerance {
            return Err(BlockError::DivisionNearZero { value });
        }
    }
    Ok(StepSample::limits(1.0 / input.left, 1.0 / input.right))
}

/// Forward-Euler accumulation over the previous step's input, followed by the
/// jump and order reduction contributed by the current input's impulses.
pub fn step_integrator(
    input: &StepSample,
    state: &IntegratorState,
    h: f64,
) -> (StepSample, IntegratorState) {
    let x = match state.prev_input {
        Some(u) => state.acc + u * h,
        None => state.acc,
    };
    let (jump, rest) = extract_order_zero(&input.impulses);
    let right = x + jump;
    (
        StepSample::new(x, right, rest),
        IntegratorState {
            acc: right,
            prev_input: Some(input.left),
        },
    )
}

/// Backward difference of the impulse-free part plus the distributional
/// derivative of the input's jump and impulses.
pub fn step_derivative(
    input: &StepSample,
    prev: Option<&StepSample>,
    init: f64,
    h: f64,
) -> StepSample {
    let Some(prev) = prev else {
        return StepSample::value(init);
    };
    let base = (input.left - prev.right) / h;
    let mut impulses = shift_orders_up(&input.impulses);
    if input.left != input.right {
        impulses.set(0, input.right - input.left);
    }
    StepSample::new(base, base, impulses)
}

// Left limit of the condition as seen by Switch/Decision. A continuous
// condition whose sign changed since the previous committed step is being
// crossed at this instant, so its left limit lies on the old side.
fn condition_limits(cond: &StepSample, prev: Option<f64>, mode: Mode) -> (f64, f64) {
    match mode {
        Mode::Numerical => (cond.right, cond.right),
        Mode::Symbolic => {
            let left = match prev {
                Some(p) if cond.left == cond.right && heaviside(p) != heaviside(cond.left) => p,
                _ => cond.left,
            };
            (left, cond.right)
        }
    }
}

pub fn step_switch(
    cond: &StepSample,
    prev: Option<f64>,
    mode: Mode,
) -> Result<StepSample, BlockError> {
    if cond.has_impulses() {
        return Err(BlockError::ImpulseOnCondition);
    }
    let (cl, cr) = condition_limits(cond, prev, mode);
    Ok(StepSample::limits(heaviside(cl), heaviside(cr)))
}

pub fn step_decision(
    u: &StepSample,
    v: &StepSample,
    cond: &StepSample,
    prev: Option<f64>,
    mode: Mode,
) -> Result<StepSample, BlockError> {
    if cond.has_impulses() {
        return Err(BlockError::ImpulseOnCondition);
    }
    let (cl, cr) = condition_limits(cond, prev, mode);
    let take_u_left = cl >= 0.0;
    let take_u_right = cr >= 0.0;
    if take_u_left != take_u_right && (u.has_impulses() || v.has_impulses()) {
        return Err(BlockError::ImpulseAtSwitchingInstant);
    }
    let pick = |take_u: bool| if take_u { u } else { v };
    Ok(StepSample::new(
        pick(take_u_left).left,
        pick(take_u_right).right,
        pick(take_u_right).impulses.clone(),
    ))
}

pub fn step_delay(prev: Option<&StepSample>, init: f64) -> StepSample {
    prev.cloned().unwrap_or_else(|| StepSample::value(init))
}
