//! CSV emitters for loss traces and phase timings.

use std::io::{self, Write};

use crate::run::EpochRecord;

pub const TRACE_SCHEMA: &str = "mvmf-trace/1";

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| format!("{x:.6}"))
}

/// One row per epoch; row 0 holds the initial objective with empty timings.
/// An absent decryption phase is written as an empty field.
pub fn write_trace_csv<W: Write>(out: &mut W, seed: u64, initial_objective: f64, trace: &[EpochRecord]) -> io::Result<()> {
    writeln!(out, "# schema={TRACE_SCHEMA} seed={seed}")?;
    writeln!(out, "epoch,objective,local_update_s,local_update_per_client_s,aggregation_s,decryption_s,server_update_s,epoch_s")?;
    writeln!(out, "0,{initial_objective:.10e},,,,,,")?;
    for r in trace {
        let t = &r.timings;
        writeln!(
            out,
            "{},{:.10e},{:.6},{:.6},{:.6},{},{:.6},{:.6}",
            r.epoch,
            r.objective,
            t.local_update,
            t.local_update_per_client,
            t.aggregation,
            opt(t.decryption),
            t.server_update,
            t.epoch
        )?;
    }
    Ok(())
}

/// Long format `(epoch, phase, seconds)`; plaintext runs omit the decryption rows.
pub fn write_phase_csv<W: Write>(out: &mut W, seed: u64, trace: &[EpochRecord]) -> io::Result<()> {
    writeln!(out, "# schema={TRACE_SCHEMA} seed={seed}")?;
    writeln!(out, "epoch,phase,seconds")?;
    for r in trace {
        let t = &r.timings;
        let mut phases = vec![("local_update", t.local_update), ("aggregation", t.aggregation)];
        if let Some(d) = t.decryption {
            phases.push(("decryption", d));
        }
        phases.push(("server_update", t.server_update));
        for (name, secs) in phases {
            writeln!(out, "{},{},{:.6}", r.epoch, name, secs)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::run::PhaseTimings;

    fn record(decryption: Option<f64>) -> EpochRecord {
        EpochRecord {
            epoch: 1,
            objective: 2.5,
            timings: PhaseTimings {
                local_update: 1.0,
                local_update_per_client: 0.5,
                aggregation: 0.25,
                decryption,
                server_update: 0.125,
                epoch: 1.5,
            },
        }
    }

    #[test]
    fn plaintext_trace_leaves_decryption_empty() {
        let mut buf = Vec::new();
        write_trace_csv(&mut buf, 9, 3.0, &[record(None)]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "# schema=mvmf-trace/1 seed=9");
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[3].split(',').nth(5), Some(""));
    }

    #[test]
    fn phase_rows() {
        let mut buf = Vec::new();
        write_phase_csv(&mut buf, 1, &[record(Some(0.1)), record(None)]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().filter(|l| l.contains("decryption")).count(), 1);
        assert_eq!(text.lines().count(), 2 + 4 + 3);
    }
}
