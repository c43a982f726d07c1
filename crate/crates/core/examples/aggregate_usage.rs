//! Turning a usage log and a KB snapshot into a signature dataset.
//!
//! Reads NDJSON from the two paths given, or uses a tiny built-in sample.
//!
//!     cargo run --example aggregate_usage -- usage.ndjson kb.ndjson

use std::io::Cursor;

use dwc::aggregation::aggregate;
use dwc::ingestion::{load_kb_snapshot, load_usage_log, parse_kb_snapshot, parse_usage_log, LoadOptions};

const KB: &str = r#"{"entity":"ada","classes":["person","scientist"],"relations":["name","birthDate"]}
{"entity":"alan","classes":["person","scientist"],"relations":["name"]}
{"entity":"bob","classes":["person"],"relations":["name","height"]}
"#;

const USAGE: &str = r#"{"entity":"ada","relation":"name","count":12}
{"entity":"ada","relation":"field","count":5}
{"entity":"alan","relation":"field","count":7}
{"entity":"alan","relation":"birthDate","count":2}
{"entity":"bob","relation":"height","count":3}
{"entity":"bob","relation":"name"}
{"entity":"nobody","relation":"name","count":4}
"#;

fn main() -> dwc::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let (log, kb) = match args.as_slice() {
        [u, k] => (load_usage_log(u)?, load_kb_snapshot(k)?),
        _ => (
            parse_usage_log(Cursor::new(USAGE), LoadOptions::default())?,
            parse_kb_snapshot(Cursor::new(KB))?,
        ),
    };
    println!("{} records, {} clauses, {} entities in KB", log.records.len(), log.total_count(), kb.len());

    let (ds, agg) = aggregate(&log.records, &kb, 1)?;
    println!("skipped {} records of unknown entities\n", agg.skipped_records);
    for row in &ds.rows {
        let classes = row.signature.canonical_string(&ds.vocabulary);
        let dist: Vec<String> = row
            .observed
            .entries()
            .iter()
            .map(|&(r, p)| format!("{}={p:.2}", ds.vocabulary.relation(r)))
            .collect();
        println!("{classes:<20} usage {:>3}  {}", row.usage_total, dist.join(" "));
    }
    Ok(())
}
