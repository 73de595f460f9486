//! Error/time summary, containment table and pairwise mode comparisons.

use std::fmt::Write as _;

use serde::Serialize;

use crate::error::StatsError;

use super::config::HarnessConfig;
use super::metrics::{errors_of, membrane_containment, summarize, two_sided_t_test, ModeSummary, TTest};
use super::trial::ExperimentRecord;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContainmentRow {
    pub mode: u8,
    pub male_percent: f64,
    pub female_percent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub a: u8,
    pub b: u8,
    /// `None` when the test is undefined for these groups.
    pub test: Option<TTest>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub summaries: Vec<ModeSummary>,
    pub containment: Vec<ContainmentRow>,
    pub comparisons: Vec<Comparison>,
}

pub fn build_report(records: &[ExperimentRecord], cfg: &HarnessConfig) -> Result<Report, StatsError> {
    let summaries = summarize(records)?;
    let modes: Vec<u8> = summaries.iter().map(|s| s.mode).collect();
    let mut containment = Vec::with_capacity(modes.len());
    for &m in &modes {
        let rs: Vec<ExperimentRecord> = records.iter().filter(|r| r.mode == m).cloned().collect();
        let [mw, mh] = cfg.male_membrane;
        let [fw, fh] = cfg.female_membrane;
        containment.push(ContainmentRow {
            mode: m,
            male_percent: membrane_containment(&rs, mw, mh, cfg.containment)?,
            female_percent: membrane_containment(&rs, fw, fh, cfg.containment)?,
        });
    }
    let mut comparisons = Vec::new();
    for (i, &a) in modes.iter().enumerate() {
        for &b in &modes[i + 1..] {
            let test = two_sided_t_test(&errors_of(records, a), &errors_of(records, b), cfg.alpha).ok();
            comparisons.push(Comparison { a, b, test });
        }
    }
    Ok(Report {
        summaries,
        containment,
        comparisons,
    })
}

impl Report {
    pub fn summary_csv(&self) -> String {
        let mut s = String::from(
            "mode,n,incomplete,mean_error_mm,sd_error_mm,mean_time_s,sd_time_s,male_percent,female_percent\n",
        );
        for (m, c) in self.summaries.iter().zip(&self.containment) {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{}",
                m.mode,
                m.n,
                m.incomplete,
                m.mean_error,
                m.sd_error,
                m.mean_time,
                m.sd_time,
                c.male_percent,
                c.female_percent
            );
        }
        s
    }

    pub fn comparisons_csv(&self) -> String {
        let mut s = String::from("mode_a,mode_b,t,df,p,significant\n");
        for c in &self.comparisons {
            match c.test {
                Some(t) => {
                    let _ = writeln!(s, "{},{},{},{},{},{}", c.a, c.b, t.t, t.df, t.p, t.significant);
                }
                None => {
                    let _ = writeln!(s, "{},{},,,,", c.a, c.b);
                }
            }
        }
        s
    }

    pub fn to_text(&self) -> String {
        let mut s = String::from("Localisation error and completion time (mean (sd))\n");
        let _ = writeln!(s, "{:<6}{:>4}{:>20}{:>20}", "mode", "n", "error [mm]", "time [s]");
        for m in &self.summaries {
            let _ = writeln!(
                s,
                "{:<6}{:>4}{:>20}{:>20}{}",
                m.mode,
                m.n,
                format!("{:.2} ({:.2})", m.mean_error, m.sd_error),
                format!("{:.1} ({:.1})", m.mean_time, m.sd_time),
                if m.incomplete > 0 { format!("  [{} incomplete]", m.incomplete) } else { String::new() }
            );
        }
        s.push_str("\nEstimates inside the membrane region [%]\n");
        let _ = writeln!(s, "{:<6}{:>10}{:>10}", "mode", "male", "female");
        for c in &self.containment {
            let _ = writeln!(s, "{:<6}{:>10.1}{:>10.1}", c.mode, c.male_percent, c.female_percent);
        }
        if !self.comparisons.is_empty() {
            s.push_str("\nPairwise error comparisons (two-sided Welch t-test)\n");
            for c in &self.comparisons {
                let _ = match c.test {
                    Some(t) => writeln!(
                        s,
                        "mode {} vs {}: t = {:.3}, df = {:.1}, p = {:.4}{}",
                        c.a,
                        c.b,
                        t.t,
                        t.df,
                        t.p,
                        if t.significant { " *" } else { "" }
                    ),
                    None => writeln!(s, "mode {} vs {}: undefined", c.a, c.b),
                };
            }
        }
        s
    }
}
