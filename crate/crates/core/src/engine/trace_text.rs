//! Compact text rendering of a trace for terminals and golden files.
//!
//! ```text
//! #0 get_stm_objects @root.object
//!    object: "banana" -> banana [c_banana]
//!    => banana [banana_1]
//!    path object banana_1: c_banana -instance_of/<edge>-> banana_1
//! #1 get_stm_locations @root
//!    object: <#0> -> banana [banana_1]
//!    => coffee table [coffee_table_1], living room [living_room]
//! ```

use std::fmt::Write;

use crate::graph::HighlightPath;
use crate::sal::Trace;

pub fn render_trace(trace: &Trace) -> String {
    let mut out = String::new();
    for call in &trace.calls {
        let _ = writeln!(out, "#{} {} @{}", call.index, call.function.name(), call.position);
        for arg in &call.args {
            let given = match (&arg.lemma, arg.from_call) {
                (_, Some(i)) => format!("<#{i}>"),
                (Some(l), None) => format!("{l:?}"),
                (None, None) => "<ids>".to_owned(),
            };
            let _ = writeln!(out, "   {}: {given} -> {}", arg.slot.name(), labelled(arg.id_lemmas.iter().zip(&arg.ids)));
        }
        let outputs = labelled(call.outputs.iter().map(|o| (&o.lemma, &o.id)));
        match call.count {
            Some(n) => {
                let _ = writeln!(out, "   => {n} ({outputs})");
            }
            None => {
                let _ = writeln!(out, "   => {outputs}");
            }
        }
        for p in &call.fragment.paths {
            let _ = writeln!(out, "   path {} {}: {}", p.slot, p.output, render_path(p));
        }
    }
    out
}

fn labelled<'a, L: AsRef<str> + 'a, I: std::fmt::Display + 'a>(items: impl Iterator<Item = (L, &'a I)>) -> String {
    let parts: Vec<String> = items.map(|(l, id)| format!("{} [{id}]", l.as_ref())).collect();
    if parts.is_empty() {
        "nothing".to_owned()
    } else {
        parts.join(", ")
    }
}

pub fn render_path(p: &HighlightPath) -> String {
    let mut s = p.anchor.to_string();
    for step in &p.steps {
        let _ = write!(s, " -{}/{}-> {}", step.kind.label(), step.edge, step.to);
    }
    s
}
