use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use super::ast::*;
use super::lexer::Span;
use crate::blocks::{BlockKind, BlockSpec};
use crate::graph::{BlockInstance, Definition, InstanceKind, Link, Model, PortRef};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum DiagnosticKind {
    DuplicateDefinition,
    DuplicateName,
    UnknownKind,
    InvalidParameter,
    MissingParameter,
    Arity,
    RecursiveDefinition,
    UnknownBlock,
    UnknownPort,
    InvalidEndpoint,
    MultipleDrivers,
    Undriven,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub kind: DiagnosticKind,
    pub span: Span,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "line {}, column {}: {}",
            self.span.line, self.span.col, self.message
        )
    }
}

enum Resolved<'a> {
    Primitive,
    Composite(&'a SourceDefinition),
    Unknown,
}

struct Scope<'a> {
    def: &'a SourceDefinition,
    blocks: HashMap<&'a str, (&'a BlockDecl, Resolved<'a>)>,
}

impl<'a> Scope<'a> {
    fn inputs_of(&self, block: &str) -> Option<Vec<String>> {
        match &self.blocks.get(block)?.1 {
            Resolved::Primitive => None,
            Resolved::Composite(d) => {
                Some(d.ports(Direction::In).map(|p| p.name.clone()).collect())
            }
            Resolved::Unknown => None,
        }
    }
}

/// Checks a parsed model and lowers it. Every problem found is reported,
/// ordered by position.
pub fn validate(src: &SourceModel) -> Result<Model, Vec<Diagnostic>> {
    let mut diags = Vec::new();
    let mut defs: BTreeMap<&str, &SourceDefinition> = BTreeMap::new();
    for d in &src.definitions {
        if defs.contains_key(d.name.name.as_str()) {
            diags.push(diag(
                DiagnosticKind::DuplicateDefinition,
                d.name.span,
                format!("definition `{}` is declared more than once", d.name.name),
            ));
        } else {
            defs.insert(&d.name.name, d);
        }
    }

    let reach = reachability(&defs);
    let mut model = Model::default();
    for d in &src.definitions {
        if !std::ptr::eq(defs[d.name.name.as_str()], d) {
            continue;
        }
        if let Some(def) = check_definition(d, &defs, &reach, &mut diags) {
            model.definitions.push(def);
        }
    }
    if diags.is_empty() {
        Ok(model)
    } else {
        diags.sort_by_key(|d| (d.span.start, d.kind));
        Err(diags)
    }
}

fn diag(kind: DiagnosticKind, span: Span, message: String) -> Diagnostic {
    Diagnostic {
        kind,
        span,
        message,
    }
}

// For each definition, the definitions it instantiates directly or indirectly.
fn reachability<'a>(
    defs: &BTreeMap<&'a str, &'a SourceDefinition>,
) -> BTreeMap<&'a str, BTreeSet<&'a str>> {
    let direct: BTreeMap<&str, BTreeSet<&str>> = defs
        .iter()
        .map(|(&n, d)| {
            let uses = d
                .blocks()
                .map(|b| b.kind.name.as_str())
                .filter(|k| defs.contains_key(k))
                .collect();
            (n, uses)
        })
        .collect();
    direct
        .keys()
        .map(|&n| {
            let mut seen = BTreeSet::new();
            let mut stack: Vec<&str> = direct[n].iter().copied().collect();
            while let Some(m) = stack.pop() {
                if seen.insert(m) {
                    stack.extend(direct[m].iter().copied());
                }
            }
            (n, seen)
        })
        .collect()
}

fn check_definition<'a>(
    d: &'a SourceDefinition,
    defs: &BTreeMap<&'a str, &'a SourceDefinition>,
    reach: &BTreeMap<&'a str, BTreeSet<&'a str>>,
    diags: &mut Vec<Diagnostic>,
) -> Option<Definition> {
    let before = diags.len();
    let mut names: HashMap<&str, Span> = HashMap::new();
    let mut claim = |name: &'a Ident, diags: &mut Vec<Diagnostic>| {
        if names.contains_key(name.name.as_str()) {
            diags.push(diag(
                DiagnosticKind::DuplicateName,
                name.span,
                format!("`{}` is already declared in `{}`", name.name, d.name.name),
            ));
            false
        } else {
            names.insert(&name.name, name.span);
            true
        }
    };
    for p in &d.ports {
        claim(&p.name, diags);
    }

    let mut scope = Scope {
        def: d,
        blocks: HashMap::new(),
    };
    let mut specs: Vec<(&BlockDecl, Option<BlockSpec>)> = Vec::new();
    for b in d.blocks() {
        let fresh = claim(&b.name, diags);
        let (resolved, spec) = if let Some(kind) = BlockKind::from_name(&b.kind.name) {
            (Resolved::Primitive, primitive_spec(kind, b, diags))
        } else if let Some(sub) = defs.get(b.kind.name.as_str()) {
            if sub.name.name == d.name.name
                || reach[sub.name.name.as_str()].contains(d.name.name.as_str())
            {
                diags.push(diag(
                    DiagnosticKind::RecursiveDefinition,
                    b.kind.span,
                    format!(
                        "`{}` instantiates `{}`, which contains `{}`",
                        d.name.name, sub.name.name, d.name.name
                    ),
                ));
            }
            for a in &b.args {
                diags.push(diag(
                    DiagnosticKind::InvalidParameter,
                    a.span,
                    format!("composite block `{}` takes no parameters", b.name.name),
                ));
            }
            (Resolved::Composite(sub), None)
        } else {
            diags.push(diag(
                DiagnosticKind::UnknownKind,
                b.kind.span,
                format!("unknown block kind `{}`", b.kind.name),
            ));
            (Resolved::Unknown, None)
        };
        specs.push((b, spec));
        // a clash with a port still lets links to the block resolve
        if fresh || !scope.blocks.contains_key(b.name.name.as_str()) {
            scope.blocks.insert(&b.name.name, (b, resolved));
        }
    }

    let mut driven: HashMap<(Option<&str>, &str), Span> = HashMap::new();
    let mut links = Vec::new();
    for l in d.links() {
        let src_ok = check_endpoint(&scope, &specs, &l.from, true, diags);
        let dst_ok = check_endpoint(&scope, &specs, &l.to, false, diags);
        if dst_ok {
            let key = (
                l.to.block.as_ref().map(|b| b.name.as_str()),
                l.to.port.name.as_str(),
            );
            if let Some(first) = driven.get(&key) {
                diags.push(diag(
                    DiagnosticKind::MultipleDrivers,
                    l.span,
                    format!("`{}` is already driven by the link at {}", l.to, first),
                ));
            } else {
                driven.insert(key, l.span);
            }
        }
        if src_ok && dst_ok {
            links.push(Link {
                from: port_ref(&l.from),
                to: port_ref(&l.to),
            });
        }
    }

    for (b, spec) in &specs {
        let ports = match spec {
            Some(s) => s.input_ports(),
            None => scope.inputs_of(&b.name.name).unwrap_or_default(),
        };
        for p in ports {
            if !driven.contains_key(&(Some(b.name.name.as_str()), p.as_str())) {
                diags.push(diag(
                    DiagnosticKind::Undriven,
                    b.span,
                    format!("input `{}.{p}` has no driver", b.name.name),
                ));
            }
        }
    }
    for p in d.ports(Direction::Out) {
        if !driven.contains_key(&(None, p.name.as_str())) {
            diags.push(diag(
                DiagnosticKind::Undriven,
                p.span,
                format!("output `{}` of `{}` has no driver", p.name, d.name.name),
            ));
        }
    }

    if diags.len() > before {
        return None;
    }
    Some(Definition {
        name: d.name.name.clone(),
        inputs: d.ports(Direction::In).map(|p| p.name.clone()).collect(),
        outputs: d.ports(Direction::Out).map(|p| p.name.clone()).collect(),
        blocks: specs
            .into_iter()
            .map(|(b, spec)| BlockInstance {
                name: b.name.name.clone(),
                kind: match spec {
                    Some(s) => InstanceKind::Primitive(s),
                    None => InstanceKind::Composite(b.kind.name.clone()),
                },
            })
            .collect(),
        links,
    })
}

fn port_ref(e: &Endpoint) -> PortRef {
    PortRef {
        block: e.block.as_ref().map(|b| b.name.clone()),
        port: e.port.name.clone(),
    }
}

// `source` selects which side of a link the endpoint is on.
fn check_endpoint(
    scope: &Scope,
    specs: &[(&BlockDecl, Option<BlockSpec>)],
    e: &Endpoint,
    source: bool,
    diags: &mut Vec<Diagnostic>,
) -> bool {
    let Some(block) = &e.block else {
        let want = if source {
            Direction::In
        } else {
            Direction::Out
        };
        if scope.def.ports(want).any(|p| p.name == e.port.name) {
            return true;
        }
        let other = scope.def.ports.iter().any(|p| p.name.name == e.port.name);
        let (kind, msg) = if other {
            (
                DiagnosticKind::InvalidEndpoint,
                format!(
                    "`{}` is an {} port and cannot be used as a link {}",
                    e.port.name,
                    if source { "output" } else { "input" },
                    if source { "source" } else { "target" }
                ),
            )
        } else if scope.blocks.contains_key(e.port.name.as_str()) {
            (
                DiagnosticKind::InvalidEndpoint,
                format!(
                    "block `{}` needs a port, e.g. `{}.out`",
                    e.port.name, e.port.name
                ),
            )
        } else {
            (
                DiagnosticKind::UnknownPort,
                format!("`{}` has no port `{}`", scope.def.name.name, e.port.name),
            )
        };
        diags.push(diag(kind, e.port.span, msg));
        return false;
    };
    let Some((_, resolved)) = scope.blocks.get(block.name.as_str()) else {
        diags.push(diag(
            DiagnosticKind::UnknownBlock,
            block.span,
            format!(
                "no block named `{}` in `{}`",
                block.name, scope.def.name.name
            ),
        ));
        return false;
    };
    let ports: Vec<String> = match resolved {
        Resolved::Unknown => return false,
        Resolved::Primitive if source => vec!["out".into()],
        Resolved::Primitive => match specs.iter().find(|(b, _)| b.name.name == block.name) {
            Some((_, Some(spec))) => spec.input_ports(),
            _ => return false,
        },
        Resolved::Composite(d) => {
            let dir = if source {
                Direction::Out
            } else {
                Direction::In
            };
            d.ports(dir).map(|p| p.name.clone()).collect()
        }
    };
    if ports.contains(&e.port.name) {
        return true;
    }
    diags.push(diag(
        DiagnosticKind::UnknownPort,
        e.port.span,
        format!(
            "`{}` has no {} port `{}` (expected one of: {})",
            block.name,
            if source { "output" } else { "input" },
            e.port.name,
            ports.join(", ")
        ),
    ));
    false
}

// Bad arguments are reported and skipped; the spec is still returned so that
// port checks can go on.
fn primitive_spec(
    kind: BlockKind,
    b: &BlockDecl,
    diags: &mut Vec<Diagnostic>,
) -> Option<BlockSpec> {
    let names = kind.parameters();
    let mut values: BTreeMap<&str, (f64, Span)> = BTreeMap::new();
    for (k, a) in b.args.iter().enumerate() {
        let name = match &a.name {
            Some(n) if names.contains(&n.name.as_str()) => {
                names.iter().find(|m| **m == n.name).copied()
            }
            Some(n) => {
                diags.push(diag(
                    DiagnosticKind::InvalidParameter,
                    n.span,
                    format!(
                        "{} has no parameter `{}`{}",
                        kind.name(),
                        n.name,
                        expected_list(names)
                    ),
                ));
                None
            }
            None if k == 0 && !names.is_empty() => Some(names[0]),
            None => {
                diags.push(diag(
                    DiagnosticKind::InvalidParameter,
                    a.span,
                    format!(
                        "{} takes no positional argument here{}",
                        kind.name(),
                        expected_list(names)
                    ),
                ));
                None
            }
        };
        let Some(name) = name else {
            continue;
        };
        if values.insert(name, (a.value, a.span)).is_some() {
            diags.push(diag(
                DiagnosticKind::InvalidParameter,
                a.span,
                format!("parameter `{name}` given twice"),
            ));
        }
    }

    let real = |n: &str, default: Option<f64>| values.get(n).map(|v| v.0).or(default);
    let spec = match kind {
        BlockKind::Constant => match real("value", None) {
            Some(value) => BlockSpec::Constant { value },
            None => {
                diags.push(diag(
                    DiagnosticKind::MissingParameter,
                    b.span,
                    format!("Constant `{}` needs a `value`", b.name.name),
                ));
                return None;
            }
        },
        BlockKind::Adder | BlockKind::Multiplier => {
            let n = real("inputs", Some(2.0)).unwrap();
            if n.fract() != 0.0 || !(2.0..=1024.0).contains(&n) {
                let span = values.get("inputs").map_or(b.span, |v| v.1);
                diags.push(diag(
                    DiagnosticKind::Arity,
                    span,
                    format!(
                        "{} needs an integer number of inputs of at least 2, got {n}",
                        kind.name()
                    ),
                ));
                return None;
            }
            let inputs = n as usize;
            if kind == BlockKind::Adder {
                BlockSpec::Adder { inputs }
            } else {
                BlockSpec::Multiplier { inputs }
            }
        }
        BlockKind::Negator => BlockSpec::Negator,
        BlockKind::Inverter => BlockSpec::Inverter,
        BlockKind::Switch => BlockSpec::Switch,
        BlockKind::Decision => BlockSpec::Decision,
        BlockKind::Integrator => BlockSpec::Integrator {
            init: real("init", Some(0.0)).unwrap(),
        },
        BlockKind::Derivative => BlockSpec::Derivative {
            init: real("init", Some(0.0)).unwrap(),
        },
        BlockKind::Delay => BlockSpec::Delay {
            init: real("init", Some(0.0)).unwrap(),
        },
    };
    Some(spec)
}

fn expected_list(names: &[&str]) -> String {
    if names.is_empty() {
        " (it takes no parameters)".into()
    } else {
        format!(" (expected: {})", names.join(", "))
    }
}
