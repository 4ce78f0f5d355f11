//! Evaluation harness: scenarios repeated k times, deterministic checks,
//! pluggable judges and pass^k statistics.

pub mod checks;
pub mod fixture;
pub mod judge;
pub mod passk;
pub mod scenario;
pub mod trace;

pub use checks::{
    compare_json_values, file_set, numeric_file_compare, text_golden, CheckError, Diff,
    NumericComparison,
};
pub use fixture::{
    generate_fixture, generate_fixture_with, replay_spec, FixtureError, FixtureSpec,
};
pub use judge::{
    AdapterConfig, HttpJudge, JudgeAdapter, JudgeError, JudgeRegistry, StubJudge, Verdict,
};
pub use passk::{min_k_for, pass_lower_bound, Basis, PassKError, PassKPolicy};
pub use scenario::{Check, CheckStatus, EvalReport, RunStatus, Runner, Scenario, ScenarioError};
pub use trace::{sha256_hex, FileDigest, TraceEvent, TraceSink, TraceWriter};
