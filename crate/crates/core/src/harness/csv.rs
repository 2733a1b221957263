//! CSV writers. Floats use 17 significant digits so values round-trip.

use std::io::Write;

use crate::error::Result;
use crate::sdirk::{Attempt, Trajectory};

use super::{ConvergenceReport, InvariantRow};

/// Formats `x` with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}

/// `t,y1,...,yd,min_component,h_used,clip_count`
pub fn write_trajectory<W: Write>(out: &mut W, traj: &Trajectory) -> Result<()> {
    let d = traj.states.first().map_or(0, |y| y.dim());
    let mut header = vec!["t".to_string()];
    header.extend((1..=d).map(|i| format!("y{i}")));
    header.extend(["min_component", "h_used", "clip_count"].map(String::from));
    writeln!(out, "{}", header.join(","))?;
    for i in 0..traj.times.len() {
        let mut row = vec![fmt_f64(traj.times[i])];
        row.extend(traj.states[i].iter().map(|&v| fmt_f64(v)));
        row.push(fmt_f64(traj.min_component[i]));
        row.push(fmt_f64(traj.h_used[i]));
        row.push(traj.clip_count[i].to_string());
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

/// `attempt,t,h,accepted,min_predictor`
pub fn write_attempts<W: Write>(out: &mut W, attempts: &[Attempt]) -> Result<()> {
    writeln!(out, "attempt,t,h,accepted,min_predictor")?;
    for a in attempts {
        writeln!(
            out,
            "{},{},{},{},{}",
            a.index,
            fmt_f64(a.t),
            fmt_f64(a.h),
            u8::from(a.accepted),
            fmt_f64(a.min_pred)
        )?;
    }
    Ok(())
}

/// `invariant,correction,exact,error`
pub fn write_invariants<W: Write>(out: &mut W, rows: &[InvariantRow]) -> Result<()> {
    writeln!(out, "invariant,correction,exact,error")?;
    for r in rows {
        writeln!(out, "{},{},{},{}", r.label, r.correction, u8::from(r.exact), fmt_f64(r.error))?;
    }
    Ok(())
}

/// One row per sweep point, then a `# slope` comment line.
pub fn write_convergence<W: Write>(out: &mut W, report: &ConvergenceReport) -> Result<()> {
    writeln!(out, "control,accepted_steps,mean_step,error")?;
    for p in &report.points {
        writeln!(out, "{},{},{},{}", fmt_f64(p.control), p.accepted_steps, fmt_f64(p.mean_step), fmt_f64(p.error))?;
    }
    writeln!(out, "# slope,{}", fmt_f64(report.slope))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits_round_trip() {
        for x in [0.1, 1.0 / 3.0, 6.02214076e23, -2.5e-300, 5e-324] {
            let s = fmt_f64(x);
            assert_eq!(s.parse::<f64>().unwrap(), x, "{s}");
        }
        assert_eq!(fmt_f64(f64::NAN), "NaN");
    }
}
