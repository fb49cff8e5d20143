//! Serialization shared by the commands. CSV reals carry 17 significant
//! digits; JSON uses the shortest representation that parses back to the
//! same double.

use glmdesign::SolveReport;

use crate::error::CliResult;

pub fn real(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        String::new()
    }
}

pub fn report_json(report: &SolveReport) -> CliResult<String> {
    Ok(serde_json::to_string_pretty(report)? + "\n")
}

pub fn report_csv(report: &SolveReport) -> CliResult<String> {
    let n = report.allocation.len();
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["case_label".to_string(), "objective".to_string()];
    header.extend((1..=n).map(|i| format!("p{i}")));
    header.extend(report.diagnostics.keys().cloned());
    w.write_record(&header)?;
    let mut row = vec![report.case_label.clone(), real(report.objective)];
    row.extend(report.allocation.as_slice().iter().map(|&p| real(p)));
    row.extend(report.diagnostics.values().map(|&v| real(v)));
    w.write_record(&row)?;
    finish(w)
}

pub fn finish(w: csv::Writer<Vec<u8>>) -> CliResult<String> {
    let bytes = w.into_inner().map_err(|e| crate::error::CliError::Output(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| crate::error::CliError::Output(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reals_round_trip() {
        for x in [0.1, 1.0 / 3.0, 1.753_019_050_234_433e-5, -2.5e300, 5e-324] {
            assert_eq!(real(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(real(f64::NAN), "");
    }
}
