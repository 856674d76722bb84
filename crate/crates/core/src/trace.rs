//! CSV traces. Floats use 17 significant digits so rows round-trip exactly.

use std::io::Write;

use crate::lms::LmsRow;
use crate::optim::IterationRecord;

/// `{:.16e}` formatting, independent of locale.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn opt_f64(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

pub fn optimizer_header(n: usize) -> Vec<String> {
    let mut h = vec!["iter".to_string()];
    for k in 0..n {
        h.push(format!("z{k}.re"));
        h.push(format!("z{k}.im"));
    }
    h.extend(
        ["loss", "grad_norm", "step_norm", "q_condition", "q_positive_definite"]
            .iter()
            .map(|s| s.to_string()),
    );
    h
}

pub fn write_optimizer_trace<W: Write>(out: W, n: usize, rows: &[IterationRecord]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(optimizer_header(n))?;
    for r in rows {
        let mut rec = vec![r.iter.to_string()];
        for z in r.z.iter() {
            rec.push(fmt_f64(z.re));
            rec.push(fmt_f64(z.im));
        }
        rec.push(fmt_f64(r.loss));
        rec.push(fmt_f64(r.grad_norm));
        rec.push(opt_f64(r.step_norm));
        rec.push(opt_f64(r.q_condition));
        rec.push(r.q_positive_definite.map(|b| b.to_string()).unwrap_or_default());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub const LMS_HEADER: [&str; 3] = ["step", "smoothed_e2", "misalignment"];

pub fn write_lms_trace<W: Write>(out: W, rows: &[LmsRow]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(LMS_HEADER)?;
    for r in rows {
        w.write_record([r.step.to_string(), opt_f64(r.smoothed_e2), fmt_f64(r.misalignment)])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{CVector, C64};

    #[test]
    fn floats_round_trip() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, f64::MIN_POSITIVE, f64::INFINITY] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn optimizer_rows_parse_back() {
        let rows = vec![
            IterationRecord {
                iter: 0,
                z: CVector::from_element(1, C64::new(0.1, -0.2)),
                loss: 1.5,
                grad_norm: 0.3,
                step_norm: Some(0.25),
                q_condition: Some(f64::INFINITY),
                q_positive_definite: Some(false),
            },
            IterationRecord {
                iter: 1,
                z: CVector::from_element(1, C64::new(1.0 / 3.0, 0.0)),
                loss: 0.0,
                grad_norm: 0.0,
                step_norm: None,
                q_condition: None,
                q_positive_definite: None,
            },
        ];
        let mut buf = Vec::new();
        write_optimizer_trace(&mut buf, 1, &rows).unwrap();
        let mut rd = csv::Reader::from_reader(buf.as_slice());
        let recs: Vec<csv::StringRecord> = rd.records().map(|r| r.unwrap()).collect();
        assert_eq!(recs.len(), 2);
        assert_eq!(recs[1][1].parse::<f64>().unwrap(), 1.0 / 3.0);
        assert_eq!(&recs[1][5], "");
        assert_eq!(recs[0][6].parse::<f64>().unwrap(), f64::INFINITY);
    }
}
