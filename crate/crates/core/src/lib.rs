//! Zero-shot LLM time-series forecasting harness.
//!
//! The pipeline: load a series ([`datasets`]), cut it into forecasting
//! tasks ([`series`]), encode the reference window as digit text
//! ([`codec`]), render a prompt ([`prompts`]), query a completion backend
//! ([`backend`]), parse the completion back into numbers ([`codec`]), and
//! score the forecast ([`eval`]). Runs persist through [`store`].

pub mod backend;
pub mod codec;
pub mod datasets;
pub mod eval;
pub mod prompts;
pub mod series;
pub mod store;

pub use backend::{Backend, BackendConfig, BackendKind, Completion};
pub use codec::{CodecConfig, DecodeDiagnostics};
pub use datasets::{DatasetSpec, Protocol};
pub use eval::{AggregationPolicy, EvalRecord, EvalTask, MetricProtocol, TaskRunner};
pub use prompts::{DatasetContext, PromptSpec, PromptTemplate, PromptText, Strategy};
pub use series::{ForecastTask, Frequency, HorizonPartition, NormStats, TimeSeries};
pub use store::RunStore;
