//! Random-walk property tests: any sequence of accepted events must replay
//! to the identical state, with or without an intermediate snapshot, and
//! every document history must be a contiguous chain of legal transitions.

use proptest::prelude::*;
use tempfile::TempDir;

use cte_core::{
    sign, transition, Certificate, CTeDocument, Cnpj, LifecycleEvent, LifecycleStatus, Modal,
    Timestamp, Uf,
};
use cte_store::{AppliedResult, DispatchIntent, EventBody, IngestSource, Store};

/// SplitMix64: small deterministic generator for picking actions.
struct Rng(u64);

impl Rng {
    fn next(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^ (z >> 31)
    }

    fn below(&mut self, n: u64) -> u64 {
        self.next() % n
    }

    fn pick<'a, T>(&mut self, items: &'a [T]) -> &'a T {
        &items[self.below(items.len() as u64) as usize]
    }
}

const BASES: [&str; 3] = ["112223330001", "445556660001", "778889990001"];

struct Driver {
    store: Store,
    now_s: u64,
    next_number: u32,
    certs: Vec<(Cnpj, Certificate)>,
    next_line: u64,
}

impl Driver {
    fn new(store: Store) -> Self {
        let certs = BASES
            .iter()
            .map(|b| {
                let est = Cnpj::complete(b).unwrap();
                let cert = Certificate::new(
                    est.clone(),
                    Timestamp::from_ms(0),
                    Timestamp::from_ms(9_000_000_000_000),
                    b"key-1".to_vec(),
                    b"secret".to_vec(),
                )
                .unwrap();
                (est, cert)
            })
            .collect();
        Driver {
            store,
            now_s: 1_700_000_000,
            next_number: 1,
            certs,
            next_line: 1,
        }
    }

    fn now(&self) -> Timestamp {
        Timestamp::from_ms(self.now_s * 1000)
    }

    fn append(&mut self, body: EventBody) {
        self.now_s += 7;
        let at = self.now();
        self.store.append(at, body).expect("generated event legal");
    }

    fn source(&mut self) -> IngestSource {
        let line = self.next_line;
        self.next_line += 1;
        IngestSource {
            file: "in/walk.txt".into(),
            line,
        }
    }

    fn docs_in(&self, status: LifecycleStatus) -> Vec<String> {
        self.store
            .state()
            .docs()
            .filter(|d| d.status() == status)
            .map(|d| d.document.access_key.as_str().to_string())
            .collect()
    }

    fn step(&mut self, rng: &mut Rng) {
        match rng.below(14) {
            0 | 1 | 2 => self.new_doc(rng),
            3 => self.pack(rng),
            4 => self.receipt(rng),
            5 => self.sync_reject(rng),
            6 => self.outcome(rng),
            7 => self.poll_processing(rng),
            8 => self.withdraw_intent(rng),
            9 => self.withdraw_outcome(rng),
            10 => self.numbering_intent(rng),
            11 => self.numbering_outcome(rng),
            12 => self.track_or_correct(rng),
            _ => self.refusal_or_anomaly(rng),
        }
    }

    fn new_doc(&mut self, rng: &mut Rng) {
        let (est, cert) = rng.pick(&self.certs).clone();
        let number = self.next_number;
        self.next_number += 1;
        let mut doc = CTeDocument::new(
            est,
            "001",
            &format!("{number:09}"),
            self.now(),
            Modal::Highway,
            Uf::new(35).unwrap(),
            Uf::new(43).unwrap(),
            10_000 + u64::from(number),
            "walk cargo",
            &format!("{number:08}"),
        )
        .unwrap();
        doc.signature = Some(sign(&doc, &cert, self.now()).unwrap());
        let source = Some(self.source());
        self.append(EventBody::DocUpserted {
            document: doc,
            source,
        });
    }

    fn pack(&mut self, rng: &mut Rng) {
        let est = rng.pick(&self.certs).0.as_str().to_string();
        let members: Vec<String> = self
            .store
            .state()
            .docs()
            .filter(|d| {
                d.status() == LifecycleStatus::Draft
                    && d.batch_id.is_none()
                    && d.document.establishment.as_str() == est
            })
            .take(1 + rng.below(4) as usize)
            .map(|d| d.document.access_key.as_str().to_string())
            .collect();
        if members.is_empty() {
            return;
        }
        let batch_id = self.store.state().next_batch_id();
        self.append(EventBody::BatchCreated {
            batch_id,
            establishment: est,
            access_keys: members,
            serialized_size: 1000,
        });
        self.append(EventBody::DispatchIntent {
            intent: DispatchIntent::SendBatch { batch_id },
        });
    }

    fn sendable(&self) -> Vec<u64> {
        self.store
            .state()
            .batches()
            .filter(|b| b.awaiting_send())
            .map(|b| b.batch_id)
            .collect()
    }

    fn receipt(&mut self, rng: &mut Rng) {
        let ids = self.sendable();
        if ids.is_empty() {
            return;
        }
        let batch_id = *rng.pick(&ids);
        let received_at = self.now();
        self.append(EventBody::ReceiptRecorded {
            batch_id,
            receipt: format!("35{:010}{batch_id:03}", self.now_s),
            received_at,
            place: "approval".into(),
        });
    }

    fn sync_reject(&mut self, rng: &mut Rng) {
        let ids = self.sendable();
        if ids.is_empty() {
            return;
        }
        let batch_id = *rng.pick(&ids);
        self.append(EventBody::ResultApplied {
            result: AppliedResult::BatchSync {
                batch_id,
                code: 225,
                message: "request body does not parse".into(),
            },
        });
    }

    fn outcome(&mut self, rng: &mut Rng) {
        let pending: Vec<(u64, String, Vec<String>)> = self
            .store
            .state()
            .batches()
            .filter(|b| b.awaiting_result())
            .map(|b| {
                (
                    b.batch_id,
                    b.receipt.clone().unwrap(),
                    b.access_keys.clone(),
                )
            })
            .collect();
        if pending.is_empty() {
            return;
        }
        let (batch_id, receipt, keys) = rng.pick(&pending).clone();
        let per_doc: Vec<(String, u16)> = keys
            .into_iter()
            .map(|k| {
                let code = if rng.below(4) == 0 { 204 } else { 100 };
                (k, code)
            })
            .collect();
        let completed_at = self.now();
        self.append(EventBody::ResultApplied {
            result: AppliedResult::BatchOutcome {
                batch_id,
                receipt,
                completed_at,
                per_doc,
            },
        });
    }

    fn poll_processing(&mut self, rng: &mut Rng) {
        let keys = self.docs_in(LifecycleStatus::Transmitted);
        if keys.is_empty() {
            return;
        }
        let key = rng.pick(&keys).clone();
        self.append(EventBody::StatusChanged {
            access_key: key,
            from: LifecycleStatus::Transmitted,
            to: LifecycleStatus::Processing,
            cause: LifecycleEvent::TrackingSaysProcessing,
            note: None,
        });
    }

    fn withdraw_intent(&mut self, rng: &mut Rng) {
        let keys = self.docs_in(LifecycleStatus::Approved);
        if keys.is_empty() {
            return;
        }
        let access_key = rng.pick(&keys).clone();
        let source = Some(self.source());
        self.append(EventBody::DispatchIntent {
            intent: DispatchIntent::Withdraw {
                access_key,
                reason: "shipment came back undelivered".into(),
                source,
            },
        });
    }

    fn withdraw_outcome(&mut self, rng: &mut Rng) {
        let keys = self.docs_in(LifecycleStatus::Cancelling);
        if keys.is_empty() {
            return;
        }
        let access_key = rng.pick(&keys).clone();
        let code = if rng.below(3) == 0 { 406 } else { 101 };
        self.append(EventBody::ResultApplied {
            result: AppliedResult::WithdrawOutcome {
                access_key,
                code,
                message: String::new(),
            },
        });
    }

    fn numbering_intent(&mut self, rng: &mut Rng) {
        let candidates: Vec<(String, String, u32)> = self
            .store
            .state()
            .docs()
            .filter(|d| d.status() == LifecycleStatus::Draft && d.batch_id.is_none())
            .map(|d| {
                (
                    d.document.access_key.as_str().to_string(),
                    d.document.establishment.as_str().to_string(),
                    d.document.number.parse().unwrap(),
                )
            })
            .collect();
        if candidates.is_empty() {
            return;
        }
        let (key, est, number) = rng.pick(&candidates).clone();
        let source = Some(self.source());
        self.append(EventBody::DispatchIntent {
            intent: DispatchIntent::WithdrawNumbering {
                establishment: est,
                series: "001".into(),
                from: number,
                to: number,
                reason: "numbering assigned by mistake".into(),
                access_keys: vec![key],
                source,
            },
        });
    }

    fn numbering_outcome(&mut self, rng: &mut Rng) {
        let open: Vec<DispatchIntent> = self
            .store
            .state()
            .unresolved_intents()
            .filter(|i| matches!(i.intent, DispatchIntent::WithdrawNumbering { .. }))
            .map(|i| i.intent.clone())
            .collect();
        if open.is_empty() {
            return;
        }
        if let DispatchIntent::WithdrawNumbering {
            establishment,
            series,
            from,
            to,
            access_keys,
            ..
        } = rng.pick(&open).clone()
        {
            let code = if rng.below(3) == 0 { 406 } else { 102 };
            self.append(EventBody::ResultApplied {
                result: AppliedResult::NumberingOutcome {
                    establishment,
                    series,
                    from,
                    to,
                    code,
                    access_keys,
                },
            });
        }
    }

    fn track_or_correct(&mut self, rng: &mut Rng) {
        let keys = self.docs_in(LifecycleStatus::Approved);
        if keys.is_empty() {
            return;
        }
        let access_key = rng.pick(&keys).clone();
        if rng.below(2) == 0 {
            self.append(EventBody::ResultApplied {
                result: AppliedResult::TrackConfirm {
                    access_key,
                    code: 100,
                    matches: true,
                },
            });
        } else {
            self.append(EventBody::CorrectionNoted {
                access_key,
                text: "recipient street number corrected".into(),
                code: 134,
            });
        }
    }

    fn refusal_or_anomaly(&mut self, rng: &mut Rng) {
        if rng.below(2) == 0 {
            let keys = self.docs_in(LifecycleStatus::Draft);
            if keys.is_empty() {
                return;
            }
            let access_key = rng.pick(&keys).clone();
            let status = self.store.state().doc(&access_key).map(|d| d.status());
            let source = Some(self.source());
            self.append(EventBody::ResultApplied {
                result: AppliedResult::LocalRefusal {
                    access_key,
                    code: 406,
                    operation: "withdraw".into(),
                    status,
                    source,
                },
            });
        } else {
            let source = Some(self.source());
            self.append(EventBody::Anomaly {
                context: "ingest".into(),
                message: "line does not parse".into(),
                source,
            });
        }
    }
}

fn run_walk(seed: u64, steps: usize, snapshot_at: Option<usize>) {
    let dir = TempDir::new().unwrap();
    let jpath = dir.path().join("journal.log");
    let spath = dir.path().join("state.snap");
    let mut driver = Driver::new(Store::open(&jpath, &spath).unwrap());
    let mut rng = Rng(seed);
    for i in 0..steps {
        driver.step(&mut rng);
        if snapshot_at == Some(i) {
            driver.store.write_snapshot().unwrap();
        }
    }
    let live = driver.store.state().clone();
    drop(driver);

    let reopened = Store::open(&jpath, &spath).unwrap();
    assert_eq!(*reopened.state(), live, "replay diverged from live state");

    // Every history is a contiguous legal chain starting at Draft.
    for doc in reopened.state().docs() {
        let mut status = LifecycleStatus::Draft;
        let mut last_seq = 0;
        for h in &doc.history {
            assert_eq!(h.from, status, "history gap for {}", doc.document.access_key);
            assert_eq!(
                transition(h.from, h.cause).expect("legal transition"),
                h.to
            );
            assert!(h.seq >= last_seq, "history out of order");
            last_seq = h.seq;
            status = h.to;
        }
        assert_eq!(status, doc.status(), "history does not end at status");
    }

    // No document belongs to two batches.
    let mut seen = std::collections::BTreeSet::new();
    for batch in reopened.state().batches() {
        for key in &batch.access_keys {
            assert!(seen.insert(key.clone()), "{key} dispatched in two batches");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn random_walk_replays_identically(seed in any::<u64>(), steps in 10usize..120) {
        run_walk(seed, steps, None);
    }

    #[test]
    fn snapshot_point_does_not_change_recovery(
        seed in any::<u64>(),
        steps in 10usize..120,
        cut in 0usize..120,
    ) {
        run_walk(seed, steps, Some(cut.min(steps.saturating_sub(1))));
    }
}
