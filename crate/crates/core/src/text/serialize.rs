//! Canonical textual form of a model: two-space indentation; interfaces,
//! components, connectors and containment in that order; elements in
//! declaration order. Transitions are listed at the end of their machine.

use std::fmt::Write;

use crate::model::{Completeness, Direction, Hsm, State, StateId, StateKind, SystemModel};

/// Renders a model in canonical form.
pub fn serialize(model: &SystemModel) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "system {} {{", model.name);
    for iface in &model.interfaces {
        let _ = writeln!(out, "  interface {} {{", iface.name);
        for m in &iface.messages {
            let dir = match m.direction {
                Direction::Input => "in",
                Direction::Output => "out",
            };
            let params: Vec<String> = m.params.iter().map(|(n, t)| format!("{n}: {t}")).collect();
            let _ = writeln!(out, "    {dir} {}({});", m.name, params.join(", "));
        }
        out.push_str("  }\n");
    }
    for comp in &model.components {
        if comp.level != Completeness::Complete {
            let _ = writeln!(out, "  @level {}", comp.level);
        }
        let _ = writeln!(out, "  component {} {{", comp.name);
        for p in &comp.ports {
            let tilde = if p.conjugated { "~" } else { "" };
            let _ = writeln!(out, "    port {}: {tilde}{};", p.name, p.interface);
        }
        for v in &comp.vars {
            match &v.init {
                Some(init) => {
                    let _ = writeln!(out, "    var {}: {} = {init};", v.name, v.ty);
                }
                None => {
                    let _ = writeln!(out, "    var {}: {};", v.name, v.ty);
                }
            }
        }
        if let Some(hsm) = &comp.behavior {
            write_hsm(hsm, &mut out);
        }
        out.push_str("  }\n");
    }
    for c in &model.connectors {
        let _ = writeln!(out, "  connect {} -- {};", c.a, c.b);
    }
    for (p, c) in &model.containment {
        let _ = writeln!(out, "  contains {p} {c};");
    }
    out.push_str("}\n");
    out
}

fn write_hsm(hsm: &Hsm, out: &mut String) {
    let root = hsm.root_id().clone();
    let _ = writeln!(out, "    statemachine {root} {{");
    write_region(hsm, &root, 6, out);
    for t in hsm.transitions.values() {
        let _ = write!(out, "      transition {}: {} -> {}", t.id, t.src, t.des);
        if !t.triggers.is_empty() {
            let trigs: Vec<String> = t.triggers.iter().map(|m| m.to_string()).collect();
            let _ = write!(out, " on {}", trigs.join(", "));
        }
        if let Some(g) = &t.guard {
            let _ = write!(out, " [{g}]");
        }
        match &t.action {
            Some(a) => {
                let _ = writeln!(out, " / {}", a.render(6));
            }
            None => out.push_str(";\n"),
        }
    }
    out.push_str("    }\n");
}

fn head(s: &State) -> String {
    if s.name == s.id.as_str() {
        format!("{} {}", s.kind.keyword(), s.id)
    } else {
        format!("{} {} {}", s.kind.keyword(), s.id, crate::text::quote(&s.name))
    }
}

fn write_actions(s: &State, indent: usize, out: &mut String) {
    let pad = " ".repeat(indent);
    if let Some(e) = &s.entry {
        let _ = writeln!(out, "{pad}entry {}", e.render(indent));
    }
    if let Some(e) = &s.exit {
        let _ = writeln!(out, "{pad}exit {}", e.render(indent));
    }
}

fn write_region(hsm: &Hsm, parent: &StateId, indent: usize, out: &mut String) {
    let pad = " ".repeat(indent);
    for s in hsm.children(parent.as_str()) {
        match s.kind {
            StateKind::Composite => {
                let _ = writeln!(out, "{pad}{} {{", head(s));
                write_actions(s, indent + 2, out);
                write_region(hsm, &s.id, indent + 2, out);
                let _ = writeln!(out, "{pad}}}");
            }
            StateKind::Basic if s.entry.is_some() || s.exit.is_some() => {
                let _ = writeln!(out, "{pad}{} {{", head(s));
                write_actions(s, indent + 2, out);
                let _ = writeln!(out, "{pad}}}");
            }
            _ => {
                let _ = writeln!(out, "{pad}{};", head(s));
            }
        }
    }
}

/// Reorders states into the pre-order in which [`serialize`] prints them,
/// so that parsing the canonical text yields an equal machine.
pub fn canonicalize(hsm: &mut Hsm) {
    let mut order = Vec::with_capacity(hsm.states.len());
    fn visit(hsm: &Hsm, id: &StateId, order: &mut Vec<StateId>) {
        order.push(id.clone());
        for c in hsm.children(id.as_str()) {
            visit(hsm, &c.id, order);
        }
    }
    let root = hsm.root_id().clone();
    visit(hsm, &root, &mut order);
    if order.len() != hsm.states.len() {
        // Orphaned states (invalid model): keep their relative order at the end.
        for k in hsm.states.keys() {
            if !order.contains(k) {
                order.push(k.clone());
            }
        }
    }
    let mut states = std::mem::take(&mut hsm.states);
    for id in order {
        if let Some(s) = states.shift_remove(id.as_str()) {
            hsm.states.insert(id, s);
        }
    }
}
