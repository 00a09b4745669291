//! Shows the two budget mechanisms on a virtual clock: the token rate
//! limiter, which stalls a grant until the sliding one-minute window has
//! room, and the cost ledger, which prices every recorded call in exact
//! integer picocurrency so totals never drift.
//!
//! ```text
//! cargo run --example rate_and_cost
//! ```

use std::sync::Arc;

use malcve::clock::{Clock, VirtualClock};
use malcve::llm::cost::format_pico;
use malcve::llm::{CostLedger, PriceTable, TokenRateLimiter};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let clock = Arc::new(VirtualClock::at_epoch());
    let limiter = TokenRateLimiter::new(10_000, clock.clone());

    println!("token budget: 10000 per minute");
    for (i, tokens) in [4_000u64, 4_000, 4_000].into_iter().enumerate() {
        let granted_at = limiter.acquire(tokens)?;
        println!(
            "  request {i}: {tokens} tokens granted at t={:?} (clock now {:?})",
            granted_at,
            clock.monotonic()
        );
    }
    println!("  the third grant waited for window headroom\n");

    let ledger = CostLedger::new(PriceTable::default());
    ledger.record_chat("gpt-4o-mini", 95_000, 600);
    ledger.record_embedding("text-embedding-3-small", 70);
    ledger.record_chat("gpt-4o-mini", 1_400, 80);
    ledger.record_chat("experimental-local", 9_999, 777);

    let snapshot = ledger.snapshot();
    println!("recorded usage:");
    for (model, usage) in &snapshot.per_model {
        println!(
            "  {model}: {} in / {} out / {} embedded",
            usage.input_tokens, usage.output_tokens, usage.embedding_tokens
        );
    }
    println!("\ntotal cost: ${}", snapshot.cost_display);
    println!("  (models without a price entry are counted but cost nothing)");

    // The ledger works in integer picocurrency; the display keeps the
    // sub-micro residue visible instead of rounding it away.
    println!("\npico formatting:");
    for pico in [1_500_000_000_000u128, 14_250_000_000, 999] {
        println!("  {pico:>16} pico = ${}", format_pico(pico));
    }
    Ok(())
}
