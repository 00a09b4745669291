//! LLM interface: typed request/response schemas, prompt templates, a mock
//! backend for tests, rate budgeting, and cost accounting.

pub mod backend;
pub mod client;
pub mod cost;
pub mod mock;
pub mod prompts;
pub mod rate;
pub mod types;

pub use backend::{
    ChatRequest, LlmBackend, LlmError, PromptStep, RemoteBackend, LLM_API_KEY_ENV, LLM_URL_ENV,
};
pub use client::{Exchange, LlmClient, LlmClientConfig, MAX_QUERIES};
pub use cost::{CharsPer4, CostLedger, CostSnapshot, PriceTable, TokenEstimator};
pub use mock::MockBackend;
pub use prompts::{PromptHashes, PromptSet};
pub use rate::{InFlightLimiter, RateBudget, RateError, RequestRateLimiter, TokenRateLimiter};
pub use types::{
    CodeSummary, CvePrediction, CveSearchQueries, IndicatorsOfCompromise, SourceUnit, Verdict,
    VerdictLabel, NO_MATCH,
};
