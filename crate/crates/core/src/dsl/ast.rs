use super::lexer::Span;

#[derive(Debug, Clone, PartialEq)]
pub struct Ident {
    pub name: String,
    pub span: Span,
}

impl Ident {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            span: Span::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    In,
    Out,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PortDecl {
    pub direction: Direction,
    pub name: Ident,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Arg {
    /// `None` for a positional argument.
    pub name: Option<Ident>,
    pub value: f64,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockDecl {
    pub name: Ident,
    /// A primitive kind or the name of another definition.
    pub kind: Ident,
    pub args: Vec<Arg>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Endpoint {
    /// `None` names a port of the enclosing definition.
    pub block: Option<Ident>,
    pub port: Ident,
    pub span: Span,
}

impl std::fmt::Display for Endpoint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match &self.block {
            Some(b) => write!(f, "{}.{}", b.name, self.port.name),
            None => f.write_str(&self.port.name),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkDecl {
    pub from: Endpoint,
    pub to: Endpoint,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Item {
    Block(BlockDecl),
    Link(LinkDecl),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SourceDefinition {
    pub name: Ident,
    pub ports: Vec<PortDecl>,
    pub items: Vec<Item>,
    pub span: Span,
}

impl SourceDefinition {
    pub fn blocks(&self) -> impl Iterator<Item = &BlockDecl> {
        self.items.iter().filter_map(|i| match i {
            Item::Block(b) => Some(b),
            Item::Link(_) => None,
        })
    }

    pub fn links(&self) -> impl Iterator<Item = &LinkDecl> {
        self.items.iter().filter_map(|i| match i {
            Item::Link(l) => Some(l),
            Item::Block(_) => None,
        })
    }

    pub fn ports(&self, direction: Direction) -> impl Iterator<Item = &Ident> {
        self.ports
            .iter()
            .filter(move |p| p.direction == direction)
            .map(|p| &p.name)
    }
}

/// A parsed `.cbd` file, spans included.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SourceModel {
    pub definitions: Vec<SourceDefinition>,
}

impl SourceModel {
    pub fn definition(&self, name: &str) -> Option<&SourceDefinition> {
        self.definitions.iter().find(|d| d.name.name == name)
    }

    /// Copy with every span reset, for structural comparison.
    pub fn without_spans(&self) -> SourceModel {
        let z = Span::default();
        let id = |i: &Ident| Ident {
            name: i.name.clone(),
            span: z,
        };
        let ep = |e: &Endpoint| Endpoint {
            block: e.block.as_ref().map(id),
            port: id(&e.port),
            span: z,
        };
        SourceModel {
            definitions: self
                .definitions
                .iter()
                .map(|d| SourceDefinition {
                    name: id(&d.name),
                    ports: d
                        .ports
                        .iter()
                        .map(|p| PortDecl {
                            direction: p.direction,
                            name: id(&p.name),
                        })
                        .collect(),
                    items: d
                        .items
                        .iter()
                        .map(|item| match item {
                            Item::Block(b) => Item::Block(BlockDecl {
                                name: id(&b.name),
                                kind: id(&b.kind),
                                args: b
                                    .args
                                    .iter()
                                    .map(|a| Arg {
                                        name: a.name.as_ref().map(id),
                                        value: a.value,
                                        span: z,
                                    })
                                    .collect(),
                                span: z,
                            }),
                            Item::Link(l) => Item::Link(LinkDecl {
                                from: ep(&l.from),
                                to: ep(&l.to),
                                span: z,
                            }),
                        })
                        .collect(),
                    span: z,
                })
                .collect(),
        }
    }
}
