use std::collections::{BTreeMap, HashSet};

use thiserror::Error;

use super::schedule::{dependency_sort, Group};
use super::{Definition, InstanceKind, Model, PortRef};
use crate::blocks::BlockSpec;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FlattenError {
    #[error("unknown definition `{name}`{}", located(at))]
    UnknownDefinition { name: String, at: String },
    #[error("definition `{name}` contains itself (via `{at}`)")]
    RecursiveDefinition { name: String, at: String },
    #[error("input `{port}` is not connected")]
    UnconnectedInput { port: String },
    #[error("output `{port}` is not driven")]
    UndrivenOutput { port: String },
    #[error("port `{port}` has more than one driver")]
    MultipleDrivers { port: String },
    #[error("`{port}` does not name an output")]
    UnknownPort { port: String },
    #[error("links around `{port}` form a cycle without any block")]
    WiringCycle { port: String },
}

/// A primitive block of the flattened graph. Its output signal shares the
/// block's index.
#[derive(Debug, Clone, PartialEq)]
pub struct FlatBlock {
    pub path: String,
    pub spec: BlockSpec,
    /// Driving block index for each input port, in `spec.input_ports()` order.
    pub inputs: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlatGraph {
    pub blocks: Vec<FlatBlock>,
    /// Composite and top-level output port names mapped to the primitive
    /// signal that drives them, e.g. `ball/v` or `y`.
    pub aliases: BTreeMap<String, usize>,
    /// Output ports of the top definition, in declaration order.
    pub outputs: Vec<String>,
    pub schedule: Vec<Group>,
}

impl FlatGraph {
    /// Resolves a block path or an output port alias to a signal index.
    pub fn signal_index(&self, name: &str) -> Option<usize> {
        self.aliases
            .get(name)
            .copied()
            .or_else(|| self.blocks.iter().position(|b| b.path == name))
    }

    /// Default signals to watch: the top definition's outputs, or every
    /// block when it has none.
    pub fn default_watch(&self) -> Vec<String> {
        if self.outputs.is_empty() {
            self.blocks.iter().map(|b| b.path.clone()).collect()
        } else {
            self.outputs.clone()
        }
    }
}

fn located(at: &str) -> String {
    if at.is_empty() {
        String::new()
    } else {
        format!(" (instantiated at `{at}`)")
    }
}

type Key = (String, String);

#[derive(Default)]
struct Builder {
    blocks: Vec<FlatBlock>,
    primitive: BTreeMap<String, usize>,
    composites: Vec<(String, String)>,
    drivers: BTreeMap<Key, Key>,
}

fn join(path: &str, name: &str) -> String {
    if path.is_empty() {
        name.to_string()
    } else {
        format!("{path}/{name}")
    }
}

fn key(path: &str, r: &PortRef) -> Key {
    match &r.block {
        Some(b) => (join(path, b), r.port.clone()),
        None => (path.to_string(), r.port.clone()),
    }
}

fn show(k: &Key) -> String {
    if k.0.is_empty() {
        k.1.clone()
    } else {
        format!("{}.{}", k.0, k.1)
    }
}

/// Replaces every composite instance by its definition, recursively, and
/// schedules the resulting primitive graph.
pub fn flatten(model: &Model, top: &str) -> Result<FlatGraph, FlattenError> {
    let def = model
        .definition(top)
        .ok_or_else(|| FlattenError::UnknownDefinition {
            name: top.into(),
            at: String::new(),
        })?;
    let mut b = Builder::default();
    let mut stack = vec![top.to_string()];
    expand(model, def, "", &mut stack, &mut b)?;

    let mut blocks = std::mem::take(&mut b.blocks);
    for block in &mut blocks {
        for port in block.spec.input_ports() {
            let k = (block.path.clone(), port);
            let src = resolve(&b, &k, true)?;
            block.inputs.push(src);
        }
    }

    let mut aliases = BTreeMap::new();
    for out in &def.outputs {
        let k = (String::new(), out.clone());
        aliases.insert(out.clone(), resolve(&b, &k, false)?);
    }
    for (path, name) in &b.composites {
        let d = model.definition(name).expect("expanded above");
        for out in &d.outputs {
            let k = (path.clone(), out.clone());
            aliases.insert(format!("{path}/{out}"), resolve(&b, &k, false)?);
        }
    }

    let schedule = dependency_sort(&blocks);
    Ok(FlatGraph {
        blocks,
        aliases,
        outputs: def.outputs.clone(),
        schedule,
    })
}

fn expand(
    model: &Model,
    def: &Definition,
    path: &str,
    stack: &mut Vec<String>,
    b: &mut Builder,
) -> Result<(), FlattenError> {
    for inst in &def.blocks {
        let child = join(path, &inst.name);
        match &inst.kind {
            InstanceKind::Primitive(spec) => {
                b.primitive.insert(child.clone(), b.blocks.len());
                b.blocks.push(FlatBlock {
                    path: child,
                    spec: spec.clone(),
                    inputs: Vec::new(),
                });
            }
            InstanceKind::Composite(name) => {
                let sub =
                    model
                        .definition(name)
                        .ok_or_else(|| FlattenError::UnknownDefinition {
                            name: name.clone(),
                            at: child.clone(),
                        })?;
                if stack.contains(name) {
                    return Err(FlattenError::RecursiveDefinition {
                        name: name.clone(),
                        at: child,
                    });
                }
                stack.push(name.clone());
                expand(model, sub, &child, stack, b)?;
                stack.pop();
                b.composites.push((child, name.clone()));
            }
        }
    }
    for link in &def.links {
        let src = key(path, &link.from);
        let dst = key(path, &link.to);
        if b.drivers.contains_key(&dst) {
            return Err(FlattenError::MultipleDrivers { port: show(&dst) });
        }
        b.drivers.insert(dst, src);
    }
    Ok(())
}

// Follows links from a consumer port back to the primitive output feeding it.
fn resolve(b: &Builder, start: &Key, is_input: bool) -> Result<usize, FlattenError> {
    let mut seen = HashSet::new();
    let mut k = start.clone();
    loop {
        let Some(src) = b.drivers.get(&k) else {
            return Err(if is_input || &k != start {
                FlattenError::UnconnectedInput { port: show(&k) }
            } else {
                FlattenError::UndrivenOutput { port: show(&k) }
            });
        };
        if let Some(&idx) = b.primitive.get(&src.0) {
            if src.1 == "out" {
                return Ok(idx);
            }
            return Err(FlattenError::UnknownPort { port: show(src) });
        }
        if !seen.insert(src.clone()) {
            return Err(FlattenError::WiringCycle { port: show(src) });
        }
        k = src.clone();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blocks::BlockSpec;

    fn primitives_only() -> Model {
        Model {
            definitions: vec![Definition::new("Main")
                .output("y")
                .block("c", BlockSpec::Constant { value: 1.0 })
                .block("n", BlockSpec::Negator)
                .link("c.out", "n.in")
                .link("n.out", "y")],
        }
    }

    #[test]
    fn primitives_are_kept_as_is() {
        let flat = flatten(&primitives_only(), "Main").unwrap();
        let paths: Vec<_> = flat.blocks.iter().map(|b| b.path.as_str()).collect();
        assert_eq!(paths, ["c", "n"]);
        assert_eq!(flat.blocks[1].inputs, vec![0]);
        assert_eq!(flat.signal_index("y"), Some(1));
    }

    #[test]
    fn nested_definitions_get_slash_paths() {
        let model = Model {
            definitions: vec![
                Definition::new("Inner")
                    .input("x")
                    .output("y")
                    .block("neg", BlockSpec::Negator)
                    .link("x", "neg.in")
                    .link("neg.out", "y"),
                Definition::new("Mid")
                    .input("x")
                    .output("y")
                    .instance("inner", "Inner")
                    .link("x", "inner.x")
                    .link("inner.y", "y"),
                Definition::new("Main")
                    .output("out")
                    .block("k", BlockSpec::Constant { value: 2.0 })
                    .instance("m", "Mid")
                    .link("k.out", "m.x")
                    .link("m.y", "out"),
            ],
        };
        let flat = flatten(&model, "Main").unwrap();
        assert_eq!(flat.blocks[1].path, "m/inner/neg");
        assert_eq!(flat.blocks[1].inputs, vec![0]);
        assert_eq!(flat.signal_index("m/y"), Some(1));
        assert_eq!(flat.signal_index("m/inner/y"), Some(1));
        assert_eq!(flat.signal_index("out"), Some(1));
    }

    #[test]
    fn missing_definition() {
        let model = Model {
            definitions: vec![Definition::new("Main").instance("x", "Nope")],
        };
        assert!(matches!(
            flatten(&model, "Main"),
            Err(FlattenError::UnknownDefinition { name, .. }) if name == "Nope"
        ));
        assert!(matches!(
            flatten(&model, "Other"),
            Err(FlattenError::UnknownDefinition { .. })
        ));
    }

    #[test]
    fn recursion_is_rejected() {
        let model = Model {
            definitions: vec![
                Definition::new("A").instance("b", "B"),
                Definition::new("B").instance("a", "A"),
            ],
        };
        assert!(matches!(
            flatten(&model, "A"),
            Err(FlattenError::RecursiveDefinition { .. })
        ));
    }

    #[test]
    fn unconnected_input() {
        let model = Model {
            definitions: vec![Definition::new("Main").block("n", BlockSpec::Negator)],
        };
        assert_eq!(
            flatten(&model, "Main"),
            Err(FlattenError::UnconnectedInput {
                port: "n.in".into()
            })
        );
    }

    #[test]
    fn double_driver() {
        let model = Model {
            definitions: vec![Definition::new("Main")
                .block("a", BlockSpec::Constant { value: 1.0 })
                .block("n", BlockSpec::Negator)
                .link("a.out", "n.in")
                .link("a.out", "n.in")],
        };
        assert!(matches!(
            flatten(&model, "Main"),
            Err(FlattenError::MultipleDrivers { .. })
        ));
    }
}
