use crate::signal::{ImpulseVector, StepSample};

/// One impulse coefficient observed on a watched signal.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ImpulseEvent {
    pub time: f64,
    pub signal: String,
    pub order: u32,
    pub coefficient: f64,
}

/// Committed samples of the watched signals.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trace {
    pub signals: Vec<String>,
    /// Strictly increasing committed times.
    pub times: Vec<f64>,
    /// `samples[signal][step]`.
    pub samples: Vec<Vec<StepSample>>,
    pub impulses: Vec<ImpulseEvent>,
    pub warnings: Vec<String>,
}

impl Trace {
    pub fn new(signals: Vec<String>) -> Self {
        let samples = vec![Vec::new(); signals.len()];
        Self {
            signals,
            samples,
            ..Self::default()
        }
    }

    /// Appends one committed step; `row` is indexed like `signals`.
    pub fn push(&mut self, time: f64, row: Vec<StepSample>) {
        debug_assert_eq!(row.len(), self.signals.len());
        debug_assert!(self.times.last().is_none_or(|&t| t < time));
        self.times.push(time);
        for (k, s) in row.into_iter().enumerate() {
            for (order, coefficient) in s.impulses.iter() {
                self.impulses.push(ImpulseEvent {
                    time,
                    signal: self.signals[k].clone(),
                    order,
                    coefficient,
                });
            }
            self.samples[k].push(s);
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn signal_index(&self, name: &str) -> Option<usize> {
        self.signals.iter().position(|s| s == name)
    }

    pub fn signal(&self, name: &str) -> Option<&[StepSample]> {
        self.signal_index(name).map(|k| self.samples[k].as_slice())
    }

    /// Size of the step that ended at index `step`.
    pub fn step_size(&self, step: usize) -> Option<f64> {
        (step > 0 && step < self.times.len()).then(|| self.times[step] - self.times[step - 1])
    }

    /// Rebuilds a trace from impulse-free rows plus an impulse log, attaching
    /// each event to the sample at exactly its time.
    pub fn from_parts(
        signals: Vec<String>,
        times: Vec<f64>,
        limits: Vec<Vec<(f64, f64)>>,
        impulses: Vec<ImpulseEvent>,
    ) -> Result<Self, String> {
        let mut samples: Vec<Vec<StepSample>> = limits
            .into_iter()
            .map(|col| {
                col.into_iter()
                    .map(|(l, r)| StepSample::limits(l, r))
                    .collect()
            })
            .collect();
        for ev in &impulses {
            let k = signals
                .iter()
                .position(|s| *s == ev.signal)
                .ok_or_else(|| format!("impulse on unknown signal `{}`", ev.signal))?;
            let step = times
                .iter()
                .position(|&t| t == ev.time)
                .ok_or_else(|| format!("impulse at t={} is not on the time grid", ev.time))?;
            let s = &mut samples[k][step];
            let mut v: ImpulseVector = s.impulses.clone();
            v.set(ev.order, v.get(ev.order) + ev.coefficient);
            s.impulses = v;
        }
        Ok(Self {
            signals,
            times,
            samples,
            impulses,
            warnings: Vec::new(),
        })
    }
}
