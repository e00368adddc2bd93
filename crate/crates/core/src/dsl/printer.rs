use std::fmt::Write;

use super::ast::*;

/// Renders a model in canonical layout. Re-parsing the output gives back the
/// same model up to spans.
pub fn print(model: &SourceModel) -> String {
    let mut out = String::new();
    for (i, def) in model.definitions.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        print_definition(&mut out, def);
    }
    out
}

fn print_definition(out: &mut String, def: &SourceDefinition) {
    write!(out, "cbd {}(", def.name.name).unwrap();
    let mut prev: Option<Direction> = None;
    for p in &def.ports {
        match prev {
            Some(d) if d == p.direction => out.push_str(", "),
            Some(_) => out.push_str("; "),
            None => {}
        }
        if prev != Some(p.direction) {
            out.push_str(match p.direction {
                Direction::In => "in ",
                Direction::Out => "out ",
            });
        }
        out.push_str(&p.name.name);
        prev = Some(p.direction);
    }
    out.push_str(") {\n");
    for item in &def.items {
        match item {
            Item::Block(b) => {
                write!(out, "    block {} = {}(", b.name.name, b.kind.name).unwrap();
                for (k, a) in b.args.iter().enumerate() {
                    if k > 0 {
                        out.push_str(", ");
                    }
                    if let Some(n) = &a.name {
                        write!(out, "{} = ", n.name).unwrap();
                    }
                    write!(out, "{}", number(a.value)).unwrap();
                }
                out.push_str(");\n");
            }
            Item::Link(l) => {
                writeln!(out, "    {} -> {};", l.from, l.to).unwrap();
            }
        }
    }
    out.push_str("}\n");
}

// Shortest text that parses back to the same f64.
fn number(x: f64) -> String {
    format!("{x:?}")
}
