use std::fmt::Write as _;

use madacc::domain::ArgLabel;
use madacc::protocol::DebateRecord;

fn final_label(label: ArgLabel) -> String {
    format!("Final Label: {}", label.as_str().to_uppercase())
}

fn indented(out: &mut String, text: &str) {
    for line in text.lines() {
        let _ = writeln!(out, "    {line}");
    }
}

/// Human-readable trace of one debate: target, Manager estimate, stance
/// assignment, numbered turns, and the Judge's verdict.
pub fn format_trace(record: &DebateRecord) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "Instance: {} (essay {})", record.instance_id, record.essay_id);
    let _ = writeln!(out, "Target:   <TARGET>{}</TARGET>", record.target_text);
    let _ = writeln!(out, "Gold:     {}", record.gold_label);

    match &record.manager_distribution {
        Some(dist) => {
            let mut entries: Vec<_> = dist.iter().collect();
            entries.sort_by(|a, b| b.1.total_cmp(&a.1));
            let shown: Vec<String> = entries.iter().map(|(l, p)| format!("{l} {p:.2}")).collect();
            let _ = writeln!(out, "\nManager:  {}", shown.join(" | "));
        }
        None => {
            let _ = writeln!(out, "\nManager:  (no estimate)");
        }
    }

    if record.failed {
        let _ = writeln!(out, "\nStatus:   failed: {}", record.error.as_deref().unwrap_or("unknown error"));
        let _ = writeln!(out, "Final Label: none");
        return out;
    }

    if record.skipped {
        let _ = writeln!(out, "\nStatus:   skipped (confidence ≥ τ)");
        if let Some(v) = &record.verdict {
            let _ = writeln!(out, "{}", final_label(v.label));
        }
        return out;
    }

    if let Some(stance) = record.stance {
        let _ = writeln!(
            out,
            "Assign:   Proponent → {}, Opponent → {}",
            stance.proponent, stance.opponent
        );
    }

    for turn in record.turns.turns() {
        let _ = writeln!(out, "\n[Turn {}] {} ({})", turn.index, turn.speaker, turn.defended_label);
        indented(&mut out, &turn.content);
    }

    if let Some(v) = &record.verdict {
        let _ = writeln!(out, "\nJudge:");
        indented(&mut out, &v.rationale);
        if record.verdict_outside_stance {
            let _ = writeln!(out, "    (verdict is neither debated label)");
        }
        let _ = writeln!(out, "{}", final_label(v.label));
    }
    out
}
