//! Crash idempotence: interrupting a run between any two external effects
//! and restarting must converge on the same materialized state and the
//! same OUT-directory bytes a crash-free run produces.
//!
//! The scenario below touches every effect kind the gateway performs:
//! document and anomaly journaling, all three dispatch intents, batch
//! creation, sync rejection, receipts, asynchronous results, status hops,
//! withdrawals (approved and refused), numbering voids, confirmations,
//! result-file appends, DACTE writes, and input renames. The harness runs
//! it once uninterrupted to count effects, then once per effect index,
//! killing the tick at exactly that point and recovering.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Duration;

use cte_authority::{Authority, AuthorityConfig, InProcessTransport};
use cte_core::{
    AccessKey, Certificate, Clock, Cnpj, LifecycleStatus, Timestamp, Uf, VirtualClock,
};
use cte_gateway::{
    EffectHooks, Gateway, GatewayConfig, Interrupted, TargetEnvironment, TickError,
};
use cte_store::State;

const T0: u64 = 1_750_000_000_000;
const ISSUED: &str = "2026-03-01T09:30:00Z";

fn est() -> Cnpj {
    Cnpj::complete("112223330001").unwrap()
}

fn make_cert() -> Certificate {
    Certificate::new(
        est(),
        Timestamp::from_ms(0),
        Timestamp::from_ms(u64::MAX / 2),
        b"gw-key".to_vec(),
        b"gw-secret".to_vec(),
    )
    .unwrap()
}

/// The key a document gets when it is the `seq`-th ever ingested: the
/// journaled document counter seeds the random field.
fn key_of(number: u32, seq: u64) -> String {
    AccessKey::compute(
        Uf::new(35).unwrap(),
        Timestamp::parse_rfc3339(ISSUED).unwrap(),
        &est(),
        "001",
        &format!("{number:09}"),
        1,
        &format!("{seq:08}"),
    )
    .unwrap()
    .as_str()
    .to_string()
}

fn issue(cnpj: &str, number: u32) -> String {
    format!("CTE|{cnpj}|001|{number:09}|{ISSUED}|35|43|highway|250000|bagged cement, 20 pallets")
}

enum Step {
    File(&'static str, String),
    Tick,
    Process,
    Advance(u64),
}

fn steps() -> Vec<Step> {
    let a = est().as_str().to_string();
    let bad = "11222333000199";
    let d1 = [
        issue(&a, 1),
        issue(&a, 2),
        issue(&a, 3),
        issue(bad, 4),
        "HELLO|not a record".to_string(),
        issue(&a, 6),
        issue(&a, 7),
        format!("CANCELNUM|{a}|001|6-7|numbering skipped by the issuing system"),
    ]
    .join("\n");
    let d3 = [
        format!("CANCEL|{}|goods returned to sender unsold", key_of(1, 1)),
        format!("CANCEL|{}|too short", key_of(2, 2)),
        format!("CANCEL|{}|goods returned to sender unsold", key_of(999, 77)),
    ]
    .join("\n");
    vec![
        Step::File("d1.txt", d1),
        Step::Tick,
        Step::Process,
        Step::Advance(60_000),
        Step::Tick,
        Step::Advance(60_000),
        Step::File("d3.txt", d3),
        Step::Tick,
        Step::Advance(60_000),
        Step::Tick,
    ]
}

/// Counts effects and fails exactly the `stop_at`-th one.
struct StopAt {
    counter: AtomicUsize,
    stop_at: usize,
}

impl EffectHooks for StopAt {
    fn before_effect(&self, label: &str) -> Result<(), Interrupted> {
        let n = self.counter.fetch_add(1, Ordering::SeqCst) + 1;
        if n == self.stop_at {
            Err(Interrupted {
                label: label.to_string(),
            })
        } else {
            Ok(())
        }
    }
}

fn dir_bytes(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    if let Ok(entries) = fs::read_dir(dir) {
        for entry in entries.flatten() {
            if entry.path().is_file() {
                let name = entry.file_name().to_string_lossy().into_owned();
                out.insert(name, fs::read(entry.path()).unwrap());
            }
        }
    }
    out
}

struct Outcome {
    effects: usize,
    state: State,
    out_files: BTreeMap<String, Vec<u8>>,
    in_names: Vec<String>,
}

/// Runs the scenario, optionally dying at the `stop_at`-th effect and
/// recovering by reopening the gateway and rerunning the killed tick.
fn run(stop_at: Option<usize>) -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let clock = Arc::new(VirtualClock::new(Timestamp::from_ms(T0)));
    let authority = Arc::new(Authority::new(AuthorityConfig::default()));
    let cert = make_cert();
    authority.register_certificate(cert.clone());
    let transport = Arc::new(InProcessTransport::new(authority.clone(), clock.clone()));
    let config = GatewayConfig {
        in_dir: root.join("in"),
        out_dir: root.join("out"),
        journal_path: root.join("journal.log"),
        snapshot_path: root.join("journal.log.snap"),
        tick_interval: Duration::from_secs(60),
        authority_endpoint: "in-process".into(),
        environment: TargetEnvironment::Approval,
        uf: Uf::new(35).unwrap(),
        certificate: cert,
    };

    let hooks = Arc::new(StopAt {
        counter: AtomicUsize::new(0),
        stop_at: stop_at.unwrap_or(usize::MAX),
    });
    let mut gw =
        Gateway::open_with_hooks(config.clone(), transport.clone(), hooks.clone()).unwrap();
    let mut interrupted = false;
    for step in steps() {
        match step {
            Step::File(name, content) => {
                fs::write(config.in_dir.join(name), content).unwrap();
            }
            Step::Advance(ms) => clock.advance_ms(ms),
            Step::Process => {
                authority.process_all(clock.now());
            }
            Step::Tick => match gw.tick(clock.now()) {
                Ok(_) => {}
                Err(TickError::Interrupted(_)) => {
                    assert!(!interrupted, "the hook fires at most once");
                    interrupted = true;
                    // simulate the process dying and restarting: reopen
                    // from disk and rerun the same tick
                    drop(gw);
                    gw = Gateway::open(config.clone(), transport.clone()).unwrap();
                    gw.tick(clock.now()).unwrap();
                }
                Err(e) => panic!("unexpected tick failure: {e}"),
            },
        }
    }
    if stop_at.is_some() {
        assert!(interrupted, "stop_at index beyond the run's effect count");
    }
    let mut in_names: Vec<String> = fs::read_dir(&config.in_dir)
        .unwrap()
        .flatten()
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .collect();
    in_names.sort();
    Outcome {
        effects: hooks.counter.load(Ordering::SeqCst),
        state: gw.state().clone(),
        out_files: dir_bytes(&config.out_dir),
        in_names,
    }
}

#[test]
fn scenario_reaches_the_expected_terminal_state() {
    let outcome = run(None);
    let state = &outcome.state;
    assert_eq!(state.doc(&key_of(1, 1)).unwrap().status(), LifecycleStatus::Cancelled);
    assert_eq!(state.doc(&key_of(2, 2)).unwrap().status(), LifecycleStatus::Approved);
    assert_eq!(state.doc(&key_of(3, 3)).unwrap().status(), LifecycleStatus::Approved);
    assert_eq!(state.doc(&key_of(6, 5)).unwrap().status(), LifecycleStatus::NumberingCancelled);
    assert_eq!(state.doc(&key_of(7, 6)).unwrap().status(), LifecycleStatus::NumberingCancelled);
    let rejected: Vec<_> = state
        .docs()
        .filter(|d| d.status() == LifecycleStatus::Rejected)
        .collect();
    assert_eq!(rejected.len(), 1, "the mistyped-issuer document");
    assert_eq!(rejected[0].last_code, Some(284));
    assert!(state.unresolved_intents().next().is_none());
    // anomalies: the garbage line and the refused short-reason withdrawal
    assert_eq!(state.anomalies().len(), 2);
    assert_eq!(outcome.in_names, vec!["d1.txt.done", "d3.txt.done"]);
    assert_eq!(
        outcome
            .out_files
            .keys()
            .filter(|n| n.starts_with("DACTE-"))
            .count(),
        3
    );
}

#[test]
fn killing_any_effect_recovers_to_the_same_state_and_bytes() {
    let reference = run(None);
    assert!(
        reference.effects > 40,
        "scenario is rich enough to matter: {} effects",
        reference.effects
    );
    for k in 1..=reference.effects {
        let recovered = run(Some(k));
        assert_eq!(
            recovered.state, reference.state,
            "state diverged when dying at effect {k}"
        );
        assert_eq!(
            recovered.out_files, reference.out_files,
            "OUT bytes diverged when dying at effect {k}"
        );
        assert_eq!(
            recovered.in_names, reference.in_names,
            "IN directory diverged when dying at effect {k}"
        );
    }
}
