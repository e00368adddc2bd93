//! Hierarchical models, flattening, scheduling and the simulation loop.

mod algebraic;
mod engine;
mod flatten;
mod schedule;
mod trace;

pub use algebraic::{check_linear_loop, solve_linear_loop, Limit, LoopError};
pub use engine::{simulate, simulate_flat, SimConfig, SimError, Simulator, StepError, StepReport};
pub use flatten::{flatten, FlatBlock, FlatGraph, FlattenError};
pub use schedule::{dependency_sort, Group};
pub use trace::{ImpulseEvent, Trace};

use crate::blocks::BlockSpec;

/// A set of named block-diagram definitions.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Model {
    pub definitions: Vec<Definition>,
}

impl Model {
    pub fn definition(&self, name: &str) -> Option<&Definition> {
        self.definitions.iter().find(|d| d.name == name)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Definition {
    pub name: String,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub blocks: Vec<BlockInstance>,
    pub links: Vec<Link>,
}

impl Definition {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            ..Self::default()
        }
    }

    pub fn input(mut self, name: &str) -> Self {
        self.inputs.push(name.into());
        self
    }

    pub fn output(mut self, name: &str) -> Self {
        self.outputs.push(name.into());
        self
    }

    pub fn block(mut self, name: &str, spec: BlockSpec) -> Self {
        self.blocks.push(BlockInstance {
            name: name.into(),
            kind: InstanceKind::Primitive(spec),
        });
        self
    }

    pub fn instance(mut self, name: &str, definition: &str) -> Self {
        self.blocks.push(BlockInstance {
            name: name.into(),
            kind: InstanceKind::Composite(definition.into()),
        });
        self
    }

    /// Adds a link between `a.b` style endpoints; a bare name is a port of
    /// this definition.
    pub fn link(mut self, from: &str, to: &str) -> Self {
        self.links.push(Link {
            from: PortRef::parse(from),
            to: PortRef::parse(to),
        });
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockInstance {
    pub name: String,
    pub kind: InstanceKind,
}

#[derive(Debug, Clone, PartialEq)]
pub enum InstanceKind {
    Primitive(BlockSpec),
    Composite(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PortRef {
    /// `None` refers to a port of the enclosing definition.
    pub block: Option<String>,
    pub port: String,
}

impl PortRef {
    pub fn parse(s: &str) -> Self {
        match s.split_once('.') {
            Some((b, p)) => Self {
                block: Some(b.into()),
                port: p.into(),
            },
            None => Self {
                block: None,
                port: s.into(),
            },
        }
    }
}

impl std::fmt::Display for PortRef {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match &self.block {
            Some(b) => write!(f, "{b}.{}", self.port),
            None => f.write_str(&self.port),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Link {
    pub from: PortRef,
    pub to: PortRef,
}
