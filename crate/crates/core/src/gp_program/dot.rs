use std::fmt::Write as _;

use super::{Node, ProgramTree};

/// Graphviz rendering of a program, one vertex per tree node.
pub fn to_dot(tree: &ProgramTree) -> String {
    let mut out = String::from("digraph program {\n  node [shape=box, fontname=\"monospace\"];\n");
    let mut next = 0usize;
    emit(tree.root(), &mut next, &mut out);
    out.push_str("}\n");
    out
}

fn emit(n: &Node, next: &mut usize, out: &mut String) -> usize {
    let id = *next;
    *next += 1;
    writeln!(out, "  n{id} [label=\"{}\"];", escape(&n.label())).unwrap();
    for child in n.children() {
        let cid = emit(child, next, out);
        writeln!(out, "  n{id} -> n{cid};").unwrap();
    }
    id
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}
