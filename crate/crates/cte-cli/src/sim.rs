//! Deterministic end-to-end simulation: a seeded traffic generator drives
//! the gateway against an in-process authority under a virtual clock.
//!
//! One virtual day is two ticks: the first ingests the day's file, packs,
//! transmits and resolves withdrawals; the authority then completes its
//! queue; the second collects results, writes DACTEs and confirms. Faulted
//! lines carry a mistyped issuer CNPJ, so they travel to the authority and
//! die there with a certificate-category code. Cancellations target
//! documents approved on earlier days.

use std::collections::BTreeMap;
use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, Instant};

use anyhow::{bail, Context};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use cte_authority::{Authority, AuthorityConfig, InProcessTransport};
use cte_core::{codes, Certificate, Clock, Cnpj, LifecycleStatus, Timestamp, Uf, VirtualClock};
use cte_gateway::{Gateway, GatewayConfig, TargetEnvironment};
use cte_store::State;

const DAY_MS: u64 = 86_400_000;
/// 08:00 UTC, 2026-03-02; every simulated day starts at this hour.
const SIM_EPOCH_MS: u64 = 1_772_438_400_000;
/// Issuing calendar: twenty business days to a month, sixty months to the
/// five-year horizon the storage projection extrapolates to.
const BUSINESS_DAYS_PER_MONTH: u64 = 20;
const MONTHS_IN_FIVE_YEARS: u64 = 60;

const DEST_UFS: [u8; 5] = [43, 41, 33, 31, 52];
const MODALS: [&str; 3] = ["highway", "rail", "waterway"];
const CARGO: [&str; 6] = [
    "bagged cement",
    "steel coils",
    "soybean meal in bulk",
    "refrigerated poultry",
    "ceramic flooring, palletized",
    "agricultural machinery parts",
];

#[derive(Debug, Clone, Serialize)]
pub struct SimParams {
    pub days: u32,
    pub docs_per_day: u32,
    /// Share of issue lines whose issuer CNPJ check digit is mistyped.
    pub fault_rate: f64,
    /// Share of the prior days' approved pool cancelled each day.
    pub cancel_rate: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct LatencyBucket {
    /// Upper bound of the bucket in whole virtual minutes.
    pub minutes: u64,
    pub docs: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SimReport {
    pub params: SimParams,
    pub docs_issued: u64,
    pub docs_faulted: u64,
    pub cancels_requested: u64,
    pub approved: u64,
    pub rejected: u64,
    pub cancelled: u64,
    pub batches_total: u64,
    pub batches_sent: u64,
    pub dactes_written: u64,
    pub result_lines: u64,
    pub anomalies: u64,
    pub max_latency_ms: u64,
    pub latency_histogram: Vec<LatencyBucket>,
    /// Documents per twenty-business-day month at the observed rate.
    pub monthly_estimate: u64,
    /// Linear projection of the store size after sixty such months.
    pub five_year_estimate: u64,
    pub violations: Vec<String>,
}

impl SimReport {
    pub fn invariants_held(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn render_text(&self) -> String {
        let mut s = String::new();
        let p = &self.params;
        s.push_str("SIMULATION REPORT\n");
        s.push_str(&format!("  days                {}\n", p.days));
        s.push_str(&format!("  docs per day        {}\n", p.docs_per_day));
        s.push_str(&format!("  fault rate          {:.4}\n", p.fault_rate));
        s.push_str(&format!("  cancel rate         {:.4}\n", p.cancel_rate));
        s.push_str(&format!("  seed                {}\n", p.seed));
        s.push_str(&format!("  docs issued         {}\n", self.docs_issued));
        s.push_str(&format!("  docs faulted        {}\n", self.docs_faulted));
        s.push_str(&format!("  cancels requested   {}\n", self.cancels_requested));
        s.push_str(&format!("  approved            {}\n", self.approved));
        s.push_str(&format!("  rejected            {}\n", self.rejected));
        s.push_str(&format!("  cancelled           {}\n", self.cancelled));
        s.push_str(&format!("  batches sent        {}\n", self.batches_sent));
        s.push_str(&format!("  batches total       {}\n", self.batches_total));
        s.push_str(&format!("  DACTEs written      {}\n", self.dactes_written));
        s.push_str(&format!("  result lines        {}\n", self.result_lines));
        s.push_str(&format!("  anomalies           {}\n", self.anomalies));
        s.push_str("  latency histogram\n");
        for b in &self.latency_histogram {
            s.push_str(&format!("    within {} min    {}\n", b.minutes, b.docs));
        }
        s.push_str(&format!("  max latency         {} ms\n", self.max_latency_ms));
        s.push_str(&format!(
            "  monthly estimate    {} documents ({} issuing days per month)\n",
            self.monthly_estimate, BUSINESS_DAYS_PER_MONTH
        ));
        s.push_str(&format!(
            "  five-year estimate  {} documents ({} months)\n",
            self.five_year_estimate, MONTHS_IN_FIVE_YEARS
        ));
        if self.violations.is_empty() {
            s.push_str("  invariants          HELD\n");
        } else {
            s.push_str("  invariants          VIOLATED\n");
            for v in &self.violations {
                s.push_str(&format!("    - {v}\n"));
            }
        }
        s
    }
}

/// Everything a caller may want to inspect after a run. The journal and
/// output files stay on disk under the root the caller supplied.
pub struct SimRun {
    pub report: SimReport,
    pub state: State,
    pub journal_path: PathBuf,
    pub out_dir: PathBuf,
    pub elapsed: Duration,
}

pub fn issuer() -> Cnpj {
    Cnpj::complete("112223330001").expect("fixed issuer base")
}

/// The issuer CNPJ with its last check digit bumped: shaped correctly,
/// mod-11 invalid, so it survives ingestion and fails at the authority.
pub fn mistyped_issuer() -> String {
    let good = issuer().as_str().to_string();
    let last = good.as_bytes()[13] - b'0';
    format!("{}{}", &good[..13], (last + 1) % 10)
}

pub fn sim_certificate() -> Certificate {
    Certificate::new(
        issuer(),
        Timestamp::from_ms(0),
        Timestamp::from_ms(u64::MAX / 2),
        b"sim-key".to_vec(),
        b"sim-secret".to_vec(),
    )
    .expect("fixed certificate is valid")
}

/// Gateway wiring for a simulation rooted at `root`.
pub fn gateway_config(root: &Path) -> GatewayConfig {
    GatewayConfig {
        in_dir: root.join("in"),
        out_dir: root.join("out"),
        journal_path: root.join("journal.log"),
        snapshot_path: root.join("journal.log.snap"),
        tick_interval: Duration::from_secs(60),
        authority_endpoint: "in-process".into(),
        environment: TargetEnvironment::Approval,
        uf: Uf::new(35).expect("35 is Sao Paulo"),
        certificate: sim_certificate(),
    }
}

/// The same wiring as a config file body, for running the `cte` commands
/// against a simulation's journal.
pub fn config_toml(config: &GatewayConfig) -> String {
    let cert = &config.certificate;
    format!(
        concat!(
            "in_dir = {:?}\n",
            "out_dir = {:?}\n",
            "journal_path = {:?}\n",
            "snapshot_path = {:?}\n",
            "tick_interval_secs = {}\n",
            "authority_endpoint = \"{}\"\n",
            "environment = \"{}\"\n",
            "uf = {}\n\n",
            "[certificate]\n",
            "subject_cnpj = \"{}\"\n",
            "not_before = \"{}\"\n",
            "not_after = \"{}\"\n",
            "key_id_hex = \"{}\"\n",
            "secret = \"{}\"\n"
        ),
        config.in_dir,
        config.out_dir,
        config.journal_path,
        config.snapshot_path,
        config.tick_interval.as_secs(),
        config.authority_endpoint,
        config.environment.as_str(),
        config.uf.code(),
        cert.subject_cnpj.as_str(),
        cert.not_before.to_rfc3339(),
        cert.not_after.to_rfc3339(),
        cert.key_id_hex(),
        String::from_utf8_lossy(&cert.secret),
    )
}

struct TrafficGen {
    rng: ChaCha8Rng,
    issuer: String,
    mistyped: String,
    next_number: u64,
    faulted_keys_pending: u64,
}

impl TrafficGen {
    fn new(seed: u64) -> Self {
        TrafficGen {
            rng: ChaCha8Rng::seed_from_u64(seed),
            issuer: issuer().as_str().to_string(),
            mistyped: mistyped_issuer(),
            next_number: 1,
            faulted_keys_pending: 0,
        }
    }

    fn pick<'a>(&mut self, list: &[&'a str]) -> &'a str {
        list[self.rng.random_range(0..list.len())]
    }

    fn issue_line(&mut self, at: Timestamp, fault_rate: f64) -> (String, bool) {
        let faulted = fault_rate > 0.0 && self.rng.random_bool(fault_rate);
        let issuer = if faulted {
            self.faulted_keys_pending += 1;
            self.mistyped.clone()
        } else {
            self.issuer.clone()
        };
        let number = self.next_number;
        self.next_number += 1;
        let dest = DEST_UFS[self.rng.random_range(0..DEST_UFS.len())];
        let modal = self.pick(&MODALS);
        let cargo = self.pick(&CARGO);
        let value = self.rng.random_range(100_000..5_000_000u64);
        let line = format!(
            "CTE|{issuer}|001|{number:09}|{}|35|{dest}|{modal}|{value}|{cargo}",
            at.to_rfc3339()
        );
        (line, faulted)
    }

    /// Draws `count` distinct indices from `0..len` (partial Fisher-Yates).
    fn sample(&mut self, len: usize, count: usize) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..len).collect();
        let count = count.min(len);
        for i in 0..count {
            let j = self.rng.random_range(i..len);
            idx.swap(i, j);
        }
        idx.truncate(count);
        idx
    }
}

pub fn run(params: &SimParams, root: &Path) -> anyhow::Result<SimRun> {
    if params.days == 0 || params.docs_per_day == 0 {
        bail!("days and docs-per-day must both be at least 1");
    }
    if !(0.0..=1.0).contains(&params.fault_rate) || !(0.0..=1.0).contains(&params.cancel_rate) {
        bail!("fault-rate and cancel-rate must lie in [0, 1]");
    }
    let started = Instant::now();

    let clock = Arc::new(VirtualClock::new(Timestamp::from_ms(SIM_EPOCH_MS)));
    let authority = Arc::new(Authority::new(AuthorityConfig::default()));
    authority.register_certificate(sim_certificate());
    let transport = Arc::new(InProcessTransport::new(authority.clone(), clock.clone()));
    let config = gateway_config(root);
    let mut gw = Gateway::open(config.clone(), transport).context("opening gateway")?;

    let mut gen = TrafficGen::new(params.seed);
    let mut cancels_requested: BTreeSet<String> = BTreeSet::new();
    let mut approved_pool: Vec<String> = Vec::new();
    let mut pooled: BTreeSet<String> = BTreeSet::new();
    let mut batches_sent = 0u64;

    for day in 0..u64::from(params.days) {
        let day_start = SIM_EPOCH_MS + day * DAY_MS;
        let behind = day_start - clock.now().as_ms();
        clock.advance_ms(behind);
        let now = clock.now();

        let mut lines = Vec::new();
        for _ in 0..params.docs_per_day {
            let (line, _) = gen.issue_line(now, params.fault_rate);
            lines.push(line);
        }
        if params.cancel_rate > 0.0 && !approved_pool.is_empty() {
            let count = (params.cancel_rate * approved_pool.len() as f64).floor() as usize;
            let mut chosen = gen.sample(approved_pool.len(), count);
            chosen.sort_unstable_by(|a, b| b.cmp(a));
            for i in chosen {
                let key = approved_pool.swap_remove(i);
                lines.push(format!(
                    "CANCEL|{key}|cancelled by simulation operator request"
                ));
                cancels_requested.insert(key);
            }
        }
        fs::write(
            config.in_dir.join(format!("day-{day:03}.txt")),
            lines.join("\n"),
        )?;

        let morning = gw.tick(clock.now()).context("morning tick")?;
        batches_sent += morning.batches_sent;
        authority.process_all(clock.now());
        clock.advance_ms(60_000);
        let noon = gw.tick(clock.now()).context("collection tick")?;
        batches_sent += noon.batches_sent;

        for doc in gw.state().docs() {
            if doc.status() == LifecycleStatus::Approved {
                let key = doc.document.access_key.as_str().to_string();
                if pooled.insert(key.clone()) {
                    approved_pool.push(key);
                }
            }
        }
    }

    let state = gw.state().clone();
    let report = build_report(params, &state, &config.out_dir, batches_sent, &cancels_requested)?;
    Ok(SimRun {
        report,
        state,
        journal_path: config.journal_path,
        out_dir: config.out_dir,
        elapsed: started.elapsed(),
    })
}

fn build_report(
    params: &SimParams,
    state: &State,
    out_dir: &Path,
    batches_sent: u64,
    cancels_requested: &BTreeSet<String>,
) -> anyhow::Result<SimReport> {
    let issuer = issuer().as_str().to_string();
    let mut violations = Vec::new();
    let mut approved = 0u64;
    let mut rejected = 0u64;
    let mut cancelled = 0u64;
    let mut faulted = 0u64;
    let mut max_latency = 0u64;
    let mut histogram: BTreeMap<u64, u64> = BTreeMap::new();

    for doc in state.docs() {
        let key = doc.document.access_key.as_str();
        let is_faulted = doc.document.establishment.as_str() != issuer;
        if is_faulted {
            faulted += 1;
        }
        match doc.status() {
            LifecycleStatus::Approved => approved += 1,
            LifecycleStatus::Rejected => rejected += 1,
            LifecycleStatus::Cancelled => cancelled += 1,
            other => violations.push(format!("{key} is not settled: {other}")),
        }
        let expected = if is_faulted {
            LifecycleStatus::Rejected
        } else if cancels_requested.contains(key) {
            LifecycleStatus::Cancelled
        } else {
            LifecycleStatus::Approved
        };
        if doc.status() != expected {
            violations.push(format!(
                "{key} ended {} but should be {expected}",
                doc.status()
            ));
        }
        if is_faulted {
            match doc.last_code {
                Some(code) if codes::category_of(code) == codes::Category::E1Certificate => {}
                other => violations.push(format!(
                    "faulted {key} carries code {other:?}, not a certificate-category code"
                )),
            }
        }
        if let Some(done) = doc
            .history
            .iter()
            .find(|h| {
                h.to == LifecycleStatus::Approved || h.to == LifecycleStatus::Rejected
            })
            .map(|h| h.at)
        {
            let latency = done.as_ms().saturating_sub(doc.ingested_at.as_ms());
            max_latency = max_latency.max(latency);
            *histogram.entry(latency.div_ceil(60_000)).or_default() += 1;
        } else {
            violations.push(format!("{key} never reached a processing result"));
        }
    }

    let docs_issued = state.doc_count();
    let expected_issued = u64::from(params.days) * u64::from(params.docs_per_day);
    if docs_issued != expected_issued {
        violations.push(format!(
            "conservation: {expected_issued} lines issued, {docs_issued} documents stored"
        ));
    }
    if approved + rejected + cancelled != docs_issued {
        violations.push(format!(
            "conservation: {approved}+{rejected}+{cancelled} settled != {docs_issued} issued"
        ));
    }
    let result_lines = state
        .out_lines()
        .iter()
        .filter(|l| l.text.starts_with("RESULT|"))
        .count() as u64;
    let expected_results = docs_issued + cancels_requested.len() as u64;
    if result_lines != expected_results {
        violations.push(format!(
            "conservation: {result_lines} RESULT lines for {expected_results} outcomes"
        ));
    }
    if max_latency > 120_000 {
        violations.push(format!("max latency {max_latency} ms exceeds two minutes"));
    }
    let anomalies = state.anomalies().len() as u64;
    if anomalies != 0 {
        violations.push(format!("{anomalies} anomalies recorded"));
    }
    let unresolved = state.unresolved_intents().count();
    if unresolved != 0 {
        violations.push(format!("{unresolved} dispatch intents left unresolved"));
    }

    let dactes_written = fs::read_dir(out_dir)?
        .flatten()
        .filter(|e| e.file_name().to_string_lossy().starts_with("DACTE-"))
        .count() as u64;
    let ever_approved = state.docs().filter(|d| d.ever_approved()).count() as u64;
    if dactes_written != ever_approved {
        violations.push(format!(
            "{dactes_written} DACTEs on disk for {ever_approved} approvals"
        ));
    }

    let monthly_estimate = docs_issued * BUSINESS_DAYS_PER_MONTH / u64::from(params.days);
    let five_year_estimate = monthly_estimate * MONTHS_IN_FIVE_YEARS;

    Ok(SimReport {
        params: params.clone(),
        docs_issued,
        docs_faulted: faulted,
        cancels_requested: cancels_requested.len() as u64,
        approved,
        rejected,
        cancelled,
        batches_total: state.batches().count() as u64,
        batches_sent,
        dactes_written,
        result_lines,
        anomalies,
        max_latency_ms: max_latency,
        latency_histogram: histogram
            .into_iter()
            .map(|(minutes, docs)| LatencyBucket { minutes, docs })
            .collect(),
        monthly_estimate,
        five_year_estimate,
        violations,
    })
}
