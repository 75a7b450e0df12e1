use serde::Serialize;

use crate::driver::{IterationRecord, RunHistory, StopReason};

#[derive(Serialize)]
struct Report<'a> {
    stop_reason: StopReason,
    j_init: f64,
    records: &'a [IterationRecord],
}

/// Pretty-printed JSON with the stop reason and every record.
pub fn json_report(history: &RunHistory) -> String {
    let report = Report { stop_reason: history.stop_reason, j_init: history.j_init, records: &history.records };
    serde_json::to_string_pretty(&report).expect("report fields are serializable")
}

/// One whitespace-separated line per record after a header line.
pub fn text_report(history: &RunHistory) -> String {
    let mut out = String::from("iteration zones j_opt i_max percent_explained tind topt ttot cutting\n");
    for r in &history.records {
        let cutting = r.cutting.as_ref().map_or_else(|| "-".to_string(), |c| format!("{}:{}", c.zone, c.strategy_tag));
        out.push_str(&format!(
            "{} {} {} {} {:.4} {:.6} {:.6} {:.6} {}\n",
            r.iteration, r.zones, r.j_opt, r.i_max, r.percent_explained, r.tind, r.topt, r.ttot, cutting
        ));
    }
    out.push_str(&format!("# stop: {}\n", history.stop_reason.as_str()));
    out
}
