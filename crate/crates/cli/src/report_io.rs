//! CSV emission and plot-data transforms.
//!
//! Every file starts with a versioned comment line so downstream scripts
//! can assert the schema before parsing. Numbers are printed with 17
//! significant digits (`{:.16e}`), which round-trips f64 exactly, so a
//! rerun of the same config and seed produces byte-identical files.

use spde_ftle::experiment::{stats, RegimeReport};
use std::io::{self, Write};

pub const CSV_VERSION: &str = "spde-ftle-csv v1";
pub const SAMPLES_HEADER: &str =
    "sample_index,seed,lambda,event_omega0,attractor_value,error_sup,excluded";
pub const SUMMARY_HEADER: &str = "metric,value,ci_low,ci_high,pass";

pub fn write_samples_csv(w: &mut impl Write, report: &RegimeReport) -> io::Result<()> {
    writeln!(w, "# {CSV_VERSION} regime={} kind=samples", report.regime)?;
    writeln!(w, "{SAMPLES_HEADER}")?;
    for r in &report.samples {
        writeln!(
            w,
            "{},{},{:.16e},{},{:.16e},{:.16e},{}",
            r.sample_index, r.seed, r.lambda, r.event_omega0, r.attractor_value, r.error_sup,
            r.excluded
        )?;
    }
    Ok(())
}

pub fn write_summary_csv(w: &mut impl Write, report: &RegimeReport) -> io::Result<()> {
    writeln!(w, "# {CSV_VERSION} regime={} kind=summary", report.regime)?;
    writeln!(w, "{SUMMARY_HEADER}")?;
    for row in &report.summary {
        writeln!(
            w,
            "{},{:.16e},{:.16e},{:.16e},{}",
            row.metric, row.value, row.ci_low, row.ci_high, row.pass
        )?;
    }
    Ok(())
}

/// Split a per-sample CSV into (header, data rows), skipping `#` comments.
fn data_rows(text: &str) -> Result<(Vec<String>, Vec<Vec<String>>), String> {
    let mut lines = text.lines().filter(|l| !l.trim_start().starts_with('#'));
    let header = lines
        .next()
        .ok_or_else(|| "input csv has no header row".to_string())?;
    let cols: Vec<String> = header.split(',').map(|s| s.trim().to_string()).collect();
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<String> = line.split(',').map(|s| s.trim().to_string()).collect();
        if fields.len() != cols.len() {
            return Err(format!(
                "row {} has {} fields, header has {}",
                i + 1,
                fields.len(),
                cols.len()
            ));
        }
        rows.push(fields);
    }
    Ok((cols, rows))
}

fn column_index(cols: &[String], name: &str) -> Result<usize, String> {
    cols.iter()
        .position(|c| c == name)
        .ok_or_else(|| format!("input csv is missing the {name:?} column"))
}

/// Histogram of the finite, non-excluded lambda values in 20 equal bins.
/// An empty input produces just the header.
pub fn plotdata_lambda_hist(text: &str, out: &mut impl Write) -> Result<(), String> {
    let (cols, rows) = data_rows(text)?;
    let lam_i = column_index(&cols, "lambda")?;
    let exc_i = column_index(&cols, "excluded")?;
    let mut values: Vec<f64> = Vec::new();
    for row in &rows {
        if row[exc_i] == "true" {
            continue;
        }
        if let Ok(v) = row[lam_i].parse::<f64>() {
            if v.is_finite() {
                values.push(v);
            }
        }
    }
    writeln!(out, "# {CSV_VERSION} kind=lambda-hist").map_err(|e| e.to_string())?;
    writeln!(out, "bin_lo,bin_hi,count").map_err(|e| e.to_string())?;
    if values.is_empty() {
        return Ok(());
    }
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    // degenerate range: widen symmetrically so every value lands in a bin
    let (lo, hi) = if hi > lo {
        (lo, hi)
    } else {
        let pad = lo.abs().max(1.0) * 1e-9;
        (lo - pad, lo + pad)
    };
    const BINS: usize = 20;
    let width = (hi - lo) / BINS as f64;
    let mut counts = [0usize; BINS];
    for v in &values {
        let k = (((v - lo) / width) as usize).min(BINS - 1);
        counts[k] += 1;
    }
    for (k, c) in counts.iter().enumerate() {
        let b_lo = lo + width * k as f64;
        let b_hi = if k + 1 == BINS { hi } else { lo + width * (k + 1) as f64 };
        writeln!(out, "{b_lo:.16e},{b_hi:.16e},{c}").map_err(|e| e.to_string())?;
    }
    Ok(())
}

/// Per-scale medians of the error column for log-log order plots. The
/// per-sample file stores scales implicitly as equal contiguous blocks in
/// grid order, so the grid must be passed explicitly.
pub fn plotdata_order(text: &str, eps_grid: &[f64], out: &mut impl Write) -> Result<(), String> {
    if eps_grid.is_empty() {
        return Err("kind=order needs --eps-grid with the campaign's scale grid".to_string());
    }
    let (cols, rows) = data_rows(text)?;
    let err_i = column_index(&cols, "error_sup")?;
    writeln!(out, "# {CSV_VERSION} kind=order").map_err(|e| e.to_string())?;
    writeln!(out, "eps,log_eps,median_error,log_median_error").map_err(|e| e.to_string())?;
    if rows.is_empty() {
        return Ok(());
    }
    if rows.len() % eps_grid.len() != 0 {
        return Err(format!(
            "{} rows do not divide into {} equal scale blocks",
            rows.len(),
            eps_grid.len()
        ));
    }
    let block = rows.len() / eps_grid.len();
    for (gi, eps) in eps_grid.iter().enumerate() {
        let mut errs = Vec::with_capacity(block);
        for row in &rows[gi * block..(gi + 1) * block] {
            let v: f64 = row[err_i]
                .parse()
                .map_err(|_| format!("bad error_sup value {:?}", row[err_i]))?;
            if v.is_finite() {
                errs.push(v);
            }
        }
        if errs.is_empty() {
            return Err(format!("no finite errors in the block for eps={eps}"));
        }
        let med = stats::median(&errs);
        writeln!(
            out,
            "{:.16e},{:.16e},{:.16e},{:.16e}",
            eps,
            eps.ln(),
            med,
            med.ln()
        )
        .map_err(|e| e.to_string())?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use spde_ftle::experiment::{SampleRecord, SummaryRow};

    fn report_with_lambdas(lams: &[f64]) -> RegimeReport {
        RegimeReport {
            regime: "I",
            samples: lams
                .iter()
                .enumerate()
                .map(|(i, l)| SampleRecord {
                    sample_index: i as u64,
                    seed: 1,
                    lambda: *l,
                    event_omega0: false,
                    attractor_value: f64::NAN,
                    error_sup: f64::NAN,
                    excluded: false,
                })
                .collect(),
            summary: vec![SummaryRow {
                metric: "max_lambda".to_string(),
                value: 0.5,
                ci_low: f64::NAN,
                ci_high: f64::NAN,
                pass: true,
            }],
        }
    }

    #[test]
    fn histogram_bins_partition_all_samples() {
        let lams: Vec<f64> = (0..100).map(|i| (i as f64) * 0.01 - 0.3).collect();
        let report = report_with_lambdas(&lams);
        let mut csv = Vec::new();
        write_samples_csv(&mut csv, &report).unwrap();
        let mut hist = Vec::new();
        plotdata_lambda_hist(std::str::from_utf8(&csv).unwrap(), &mut hist).unwrap();
        let hist = String::from_utf8(hist).unwrap();
        let counts: usize = hist
            .lines()
            .skip(2)
            .map(|l| l.rsplit(',').next().unwrap().parse::<usize>().unwrap())
            .sum();
        assert_eq!(counts, 100);
        assert_eq!(hist.lines().count(), 22); // version + header + 20 bins
    }

    #[test]
    fn empty_input_yields_header_only() {
        let csv = format!("# {CSV_VERSION} regime=I kind=samples\n{SAMPLES_HEADER}\n");
        let mut hist = Vec::new();
        plotdata_lambda_hist(&csv, &mut hist).unwrap();
        let hist = String::from_utf8(hist).unwrap();
        assert_eq!(hist.lines().count(), 2);
    }

    #[test]
    fn order_series_has_one_row_per_scale() {
        let mut csv = format!("# {CSV_VERSION} regime=approx-order kind=samples\n{SAMPLES_HEADER}\n");
        // two scales, three samples each; error shrinks with the scale
        for (i, e) in [0.9, 1.0, 1.1, 0.09, 0.10, 0.11].iter().enumerate() {
            csv.push_str(&format!("{i},1,NaN,false,NaN,{e:.16e},false\n"));
        }
        let mut out = Vec::new();
        plotdata_order(&csv, &[0.2, 0.1], &mut out).unwrap();
        let out = String::from_utf8(out).unwrap();
        let rows: Vec<&str> = out.lines().skip(2).collect();
        assert_eq!(rows.len(), 2);
        assert!(rows[0].starts_with(&format!("{:.16e}", 0.2)));
        let med: f64 = rows[1].split(',').nth(2).unwrap().parse().unwrap();
        assert!((med - 0.10).abs() < 1e-12);
    }

    #[test]
    fn unknown_columns_and_ragged_rows_are_reported() {
        let bad = "a,b\n1,2,3\n";
        assert!(data_rows(bad).is_err());
        let no_lambda = "a,excluded\n1,false\n";
        let mut sink = Vec::new();
        let err = plotdata_lambda_hist(no_lambda, &mut sink).unwrap_err();
        assert!(err.contains("lambda"), "{err}");
    }
}
