use std::fmt::Write as _;

use domain_bridge::eval::EvalReport;
use serde::{Deserialize, Serialize};

use crate::args::GroupBy;

/// Evaluation output shared by `eval`, `train --test` and `baseline`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalDocument {
    pub system: String,
    pub source: String,
    pub target: String,
    pub evaluated: usize,
    pub skipped: usize,
    pub report: EvalReport,
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Long-format `system,source,target,metric,value` rows, one per metric per report.
pub fn plot_rows(docs: &[EvalDocument], group_by: Option<GroupBy>) -> String {
    let mut order: Vec<&EvalDocument> = docs.iter().collect();
    if let Some(key) = group_by {
        order.sort_by(|a, b| {
            let pick = |d: &EvalDocument| match key {
                GroupBy::System => d.system.clone(),
                GroupBy::Source => d.source.clone(),
                GroupBy::Target => d.target.clone(),
            };
            pick(a).cmp(&pick(b))
        });
    }
    let mut out = String::from("system,source,target,metric,value\n");
    for doc in order {
        for (metric, value) in doc.report.metric_rows() {
            writeln!(
                out,
                "{},{},{},{metric},{value}",
                csv_field(&doc.system),
                csv_field(&doc.source),
                csv_field(&doc.target)
            )
            .unwrap();
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use domain_bridge::corpus::Label::{Negative as N, Positive as P};
    use domain_bridge::eval::evaluate;

    fn doc(system: &str, pred: &[domain_bridge::corpus::Label]) -> EvalDocument {
        let gold = [P, P, N, N];
        EvalDocument {
            system: system.into(),
            source: "books".into(),
            target: "dvd, hd".into(),
            evaluated: 4,
            skipped: 0,
            report: evaluate(pred, &gold).unwrap(),
        }
    }

    #[test]
    fn empty_list_is_header_only() {
        assert_eq!(plot_rows(&[], None), "system,source,target,metric,value\n");
    }

    #[test]
    fn two_reports_double_the_rows() {
        let one = plot_rows(&[doc("a", &[P, N, N, N])], None).lines().count() - 1;
        let two = plot_rows(&[doc("a", &[P, N, N, N]), doc("b", &[P, P, N, P])], None).lines().count() - 1;
        assert_eq!(two, 2 * one);
    }

    #[test]
    fn values_round_trip_through_json() {
        let d = doc("x", &[P, N, P, N]);
        let parsed: EvalDocument = serde_json::from_str(&serde_json::to_string(&d).unwrap()).unwrap();
        let csv = plot_rows(&[parsed], None);
        for (line, (_, value)) in csv.lines().skip(1).zip(d.report.metric_rows()) {
            let field = line.rsplit(',').next().unwrap();
            assert_eq!(field.parse::<f64>().unwrap().to_bits(), value.to_bits());
        }
        assert!(csv.contains("\"dvd, hd\""));
    }

    #[test]
    fn grouping_is_stable() {
        let csv = plot_rows(&[doc("b", &[P, P, N, N]), doc("a", &[P, P, N, N])], Some(GroupBy::System));
        assert!(csv.lines().nth(1).unwrap().starts_with("a,"));
    }
}
