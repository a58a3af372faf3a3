//! `cte status <key>`: current lifecycle position and full history.

use serde::Serialize;

use cte_store::{DocRecord, State};

#[derive(Serialize)]
struct HistoryView<'a> {
    at: String,
    from: &'a str,
    to: &'a str,
    event: String,
    code: Option<u16>,
    note: Option<&'a str>,
}

#[derive(Serialize)]
struct StatusView<'a> {
    access_key: &'a str,
    status: &'a str,
    last_code: Option<u16>,
    ingested_at: String,
    source: Option<String>,
    batch_id: Option<u64>,
    history: Vec<HistoryView<'a>>,
}

fn view(doc: &DocRecord) -> StatusView<'_> {
    StatusView {
        access_key: doc.document.access_key.as_str(),
        status: doc.status().as_str(),
        last_code: doc.last_code,
        ingested_at: doc.ingested_at.to_rfc3339(),
        source: doc
            .source
            .as_ref()
            .map(|s| format!("{}:{}", s.file, s.line)),
        batch_id: doc.batch_id,
        history: doc
            .history
            .iter()
            .map(|h| HistoryView {
                at: h.at.to_rfc3339(),
                from: h.from.as_str(),
                to: h.to.as_str(),
                event: format!("{:?}", h.cause),
                code: h.code,
                note: h.note.as_deref(),
            })
            .collect(),
    }
}

pub fn run(state: &State, access_key: &str, json: bool) -> i32 {
    let Some(doc) = state.doc(access_key) else {
        eprintln!("no document with access key {access_key}");
        return 3;
    };
    let v = view(doc);
    if json {
        println!("{}", serde_json::to_string(&v).expect("view serializes"));
        return 0;
    }
    match v.last_code {
        Some(code) => println!("{} ({code})", v.status),
        None => println!("{}", v.status),
    }
    println!("ACCESS KEY  {}", v.access_key);
    match &v.source {
        Some(src) => println!("INGESTED    {}  from {src}", v.ingested_at),
        None => println!("INGESTED    {}", v.ingested_at),
    }
    if let Some(id) = v.batch_id {
        println!("BATCH       {id}");
    }
    println!("HISTORY");
    for h in &v.history {
        let code = h.code.map(|c| format!(" [{c}]")).unwrap_or_default();
        let note = h.note.map(|n| format!("  {n}")).unwrap_or_default();
        println!(
            "  {}  {} -> {}  {}{}{}",
            h.at, h.from, h.to, h.event, code, note
        );
    }
    0
}
