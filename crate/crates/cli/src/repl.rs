//! Line-oriented chat against an in-process engine.

use std::io::{self, BufRead, IsTerminal, Write};
use std::sync::{Arc, Mutex};

use ke_core::engine::{render_trace, EventPayload};
use ke_core::sim::{SimEvent, SimEventKind};
use ke_core::{Engine, TurnKind};

/// Upper bound on simulator ticks spent on one command.
pub const MAX_TICKS: u64 = 100_000;

/// Reads messages until end of input or `quit`. Commands run to completion
/// before the next line is read, and their action outcomes are printed.
pub fn run(mut engine: Engine, input: impl BufRead, out: &mut impl Write) -> io::Result<()> {
    let interactive = io::stdin().is_terminal();
    let sim_events: Arc<Mutex<Vec<SimEvent>>> = Arc::default();
    let sink = sim_events.clone();
    engine.add_listener(move |env| {
        if let EventPayload::Sim { event } = &env.payload {
            sink.lock().expect("listener lock").push(event.clone());
        }
    });
    let session = engine.create_session();
    if interactive {
        write!(out, "> ")?;
        out.flush()?;
    }
    for line in input.lines() {
        let line = line?;
        let text = line.trim();
        if !interactive {
            writeln!(out, "> {text}")?;
        }
        match text {
            "" => {}
            "quit" | "exit" => break,
            _ => {
                let turn = engine.post_chat(&session, text).expect("the session exists");
                writeln!(out, "{}", turn.reply)?;
                if let Some(e) = &turn.error {
                    writeln!(out, "error {}", e.code)?;
                }
                if let Ok(trace) = engine.trace(turn.turn_id) {
                    write!(out, "{}", render_trace(trace))?;
                }
                if turn.kind == TurnKind::Command {
                    sim_events.lock().expect("listener lock").clear();
                    let ticks = engine.run_until_idle(MAX_TICKS);
                    for event in sim_events.lock().expect("listener lock").drain(..) {
                        print_outcome(&event, out)?;
                    }
                    writeln!(out, "({ticks} ticks)")?;
                }
            }
        }
        if interactive {
            write!(out, "> ")?;
            out.flush()?;
        }
    }
    Ok(())
}

fn print_outcome(event: &SimEvent, out: &mut impl Write) -> io::Result<()> {
    match &event.kind {
        SimEventKind::ActionCompleted { action, .. } => writeln!(out, "  done: {action}"),
        SimEventKind::ActionFailed { action, code, reason, .. } => {
            writeln!(out, "  failed: {action}: {} {reason}", serde_json::to_string(code).unwrap_or_default())
        }
        SimEventKind::Alarm { message, .. } => writeln!(out, "  alarm: {message}"),
        _ => Ok(()),
    }
}
