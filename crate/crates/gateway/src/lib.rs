//! Agents for choice experiments: prompt rendering, reply parsing,
//! synthetic reference agents, and an HTTP chat-completion client.

pub mod agent;
pub mod http;
pub mod parse;
pub mod prompt;
pub mod transcript;

pub use agent::{
    ask_forward, ask_inverse, ask_proportion, effective_completions, Agent, AgentError, AgentResponse, ParseStatus,
    Payload, Query, SyntheticAgent, SyntheticKind,
};
pub use http::{AgentConfig, HttpAgent};
pub use parse::{parse_forward, parse_inverse, parse_proportion, InverseParse, InverseVerdict, Machine};
pub use prompt::{render_forward_prompt, render_inverse_prompt, PromptSpec, Style, Task};
pub use transcript::Transcript;
