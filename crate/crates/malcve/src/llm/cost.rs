//! Token estimation and exact cost accounting.
//!
//! Prices are integers in micro-currency units per one million tokens, so
//! `tokens * price` is an exact cost in pico-currency units (1 currency unit
//! = 10^6 micro = 10^12 pico). All arithmetic stays in integers; nothing is
//! rounded until display.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::sync::Mutex;

/// Approximates how many tokens a prompt will consume.
pub trait TokenEstimator: Send + Sync {
    fn estimate(&self, text: &str) -> u64;
}

/// Default heuristic: one token per four characters, rounded up.
pub struct CharsPer4;

impl TokenEstimator for CharsPer4 {
    fn estimate(&self, text: &str) -> u64 {
        let chars = text.chars().count() as u64;
        chars.div_ceil(4)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelPrice {
    /// Micro-currency per 1M input (prompt or embedding) tokens.
    pub input_micro_per_1m: u64,
    /// Micro-currency per 1M output tokens.
    pub output_micro_per_1m: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PriceTable {
    pub models: BTreeMap<String, ModelPrice>,
}

impl Default for PriceTable {
    fn default() -> Self {
        let mut models = BTreeMap::new();
        models.insert(
            "gpt-4o-mini".to_string(),
            ModelPrice {
                input_micro_per_1m: 150_000,
                output_micro_per_1m: 600_000,
            },
        );
        models.insert(
            "text-embedding-3-small".to_string(),
            ModelPrice {
                input_micro_per_1m: 20_000,
                output_micro_per_1m: 0,
            },
        );
        Self { models }
    }
}

impl PriceTable {
    pub fn price_for(&self, model: &str) -> Option<ModelPrice> {
        self.models.get(model).copied()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelUsage {
    pub input_tokens: u64,
    pub output_tokens: u64,
    pub embedding_tokens: u64,
}

/// Aggregate usage and exact cost, suitable for report metadata.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostSnapshot {
    pub per_model: BTreeMap<String, ModelUsage>,
    /// Exact total in pico-currency units.
    pub cost_pico: u128,
    /// Human-readable decimal in whole currency units, e.g. "0.031250".
    pub cost_display: String,
}

/// Thread-safe usage meter. Unknown models still have their tokens counted;
/// they just contribute zero cost.
pub struct CostLedger {
    prices: PriceTable,
    usage: Mutex<BTreeMap<String, ModelUsage>>,
}

impl CostLedger {
    pub fn new(prices: PriceTable) -> Self {
        Self {
            prices,
            usage: Mutex::new(BTreeMap::new()),
        }
    }

    pub fn record_chat(&self, model: &str, input_tokens: u64, output_tokens: u64) {
        let mut usage = self.usage.lock().unwrap();
        let entry = usage.entry(model.to_string()).or_default();
        entry.input_tokens += input_tokens;
        entry.output_tokens += output_tokens;
    }

    pub fn record_embedding(&self, model: &str, tokens: u64) {
        let mut usage = self.usage.lock().unwrap();
        let entry = usage.entry(model.to_string()).or_default();
        entry.embedding_tokens += tokens;
    }

    /// Exact total cost in pico-currency units.
    pub fn cost_pico(&self) -> u128 {
        let usage = self.usage.lock().unwrap();
        usage
            .iter()
            .map(|(model, u)| {
                let Some(price) = self.prices.price_for(model) else {
                    return 0u128;
                };
                (u.input_tokens + u.embedding_tokens) as u128 * price.input_micro_per_1m as u128
                    + u.output_tokens as u128 * price.output_micro_per_1m as u128
            })
            .sum()
    }

    pub fn snapshot(&self) -> CostSnapshot {
        let per_model = self.usage.lock().unwrap().clone();
        let cost_pico = self.cost_pico();
        CostSnapshot {
            per_model,
            cost_pico,
            cost_display: format_pico(cost_pico),
        }
    }
}

/// Renders pico-currency as a decimal in whole units with six fractional
/// digits (micro precision; sub-micro residue is shown only when nonzero).
pub fn format_pico(pico: u128) -> String {
    let units = pico / 1_000_000_000_000;
    let sub = pico % 1_000_000_000_000;
    let micro = sub / 1_000_000;
    let residue = sub % 1_000_000;
    if residue == 0 {
        format!("{units}.{micro:06}")
    } else {
        format!("{units}.{micro:06}_{residue:06}")
    }
}
