use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

use super::Capability;

#[derive(Debug, Default)]
struct Counters {
    calls: AtomicU64,
    failures: AtomicU64,
    latency_micros: AtomicU64,
}

impl Counters {
    fn snapshot(&self) -> CapabilityStats {
        CapabilityStats {
            calls: self.calls.load(Ordering::Relaxed),
            failures: self.failures.load(Ordering::Relaxed),
            latency_seconds: self.latency_micros.load(Ordering::Relaxed) as f64 / 1e6,
        }
    }
}

/// Monotone call counters, updated atomically from any thread.
#[derive(Debug, Default)]
pub struct CallLedger {
    embed: Counters,
    score: Counters,
    spans: Counters,
    generate: Counters,
    llm_calls: AtomicU64,
    judge_calls: AtomicU64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CapabilityStats {
    pub calls: u64,
    pub failures: u64,
    pub latency_seconds: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LedgerSnapshot {
    pub embed: CapabilityStats,
    pub score: CapabilityStats,
    pub spans: CapabilityStats,
    pub generate: CapabilityStats,
    /// Answer-composition generator calls.
    pub llm_calls: u64,
    /// Citation-judge generator calls.
    pub judge_calls: u64,
}

impl CallLedger {
    fn counters(&self, cap: Capability) -> &Counters {
        match cap {
            Capability::Embed => &self.embed,
            Capability::Score => &self.score,
            Capability::Spans => &self.spans,
            Capability::Generate => &self.generate,
        }
    }

    pub(super) fn record(&self, cap: Capability, seconds: f64, ok: bool) {
        let c = self.counters(cap);
        c.calls.fetch_add(1, Ordering::Relaxed);
        if !ok {
            c.failures.fetch_add(1, Ordering::Relaxed);
        }
        c.latency_micros
            .fetch_add((seconds.max(0.0) * 1e6) as u64, Ordering::Relaxed);
    }

    pub(super) fn count_generation(&self, judge: bool) {
        let counter = if judge { &self.judge_calls } else { &self.llm_calls };
        counter.fetch_add(1, Ordering::Relaxed);
    }

    pub fn llm_calls(&self) -> u64 {
        self.llm_calls.load(Ordering::Relaxed)
    }

    pub fn snapshot(&self) -> LedgerSnapshot {
        LedgerSnapshot {
            embed: self.embed.snapshot(),
            score: self.score.snapshot(),
            spans: self.spans.snapshot(),
            generate: self.generate.snapshot(),
            llm_calls: self.llm_calls.load(Ordering::Relaxed),
            judge_calls: self.judge_calls.load(Ordering::Relaxed),
        }
    }
}
