//! Off-policy learning for the navigation task: history windows, replay, TD3,
//! collision penalties, learned dynamics, imagination and rollout workers.

pub mod buffer;
pub mod features;
pub mod history;
pub mod model;
pub mod planning;
pub mod rollout;
pub mod safety;
pub mod td3;
pub mod trainer;

pub use buffer::{ReplayBuffer, Source, Transition};
pub use features::{pool_lidar, FeatureConfig};
pub use history::{Frame, HistoryWindow, Window, WindowLayout};
pub use model::{DynamicsConfig, DynamicsModel, KnownReward, RunningNorm};
pub use planning::{
    dyna_augment, mpc_select_action, score_sequence, DynaModel, LearnedModel, MpcConfig, MpcDecision, OracleDyna,
    SimulatorModel, WorldModel,
};
pub use rollout::{
    collect, sample_task, worker_streams, EpisodeSummary, MpcPolicy, NoisyActor, RandomPolicy, RolloutBatch,
    RolloutConfig, UnitPolicy, WorkerStream,
};
pub use safety::{episode_cost_return, shaped_reward, SafetyConfig};
pub use td3::{td3_target, ActorSnapshot, Td3Agent, Td3Config, Td3Losses};
pub use trainer::{PolicyKind, Technique, TrainConfig, TrainedPolicy, Trainer};

use crate::nn::NnError;
use crate::sim::SimError;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RlError {
    #[error("replay buffer holds no eligible transitions")]
    EmptyBuffer,
    #[error("environment set is empty")]
    EmptySet,
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Sim(#[from] SimError),
}
