//! JSON-lines episode traces and bit-exact replay.
//!
//! Line 1 is a header carrying the environment, simulator config and episode
//! seed; every following line records one control step.

use super::{Action, Outcome, SimConfig, SimError, Simulator, StepResult};
use crate::envgen::{EnvGenError, EnvironmentSpec};
use crate::geom::RobotPose;
use serde::{Deserialize, Serialize};
use std::io::{BufRead, Write};
use thiserror::Error;

pub const TRACE_FORMAT: &str = "barnbench-trace";
pub const TRACE_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("trace is empty")]
    Empty,
    #[error("step {step}: {field} differs (recorded {recorded}, replayed {replayed})")]
    Mismatch {
        step: usize,
        field: &'static str,
        recorded: String,
        replayed: String,
    },
    #[error(transparent)]
    Env(#[from] EnvGenError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct HeaderRecord {
    format: String,
    version: u32,
    episode_seed: u64,
    start: RobotPose,
    sim: SimConfig,
    env: serde_json::Value,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceStep {
    pub step: usize,
    pub action: Action,
    pub pose: RobotPose,
    pub reward: f64,
    pub cost: f64,
    pub outcome: Outcome,
    pub sim_time: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeTrace {
    pub env: EnvironmentSpec,
    pub sim: SimConfig,
    pub episode_seed: u64,
    pub start: RobotPose,
    pub steps: Vec<TraceStep>,
}

impl EpisodeTrace {
    pub fn new(env: &EnvironmentSpec, sim: SimConfig, episode_seed: u64, start: RobotPose) -> Self {
        Self {
            env: env.clone(),
            sim,
            episode_seed,
            start,
            steps: Vec::new(),
        }
    }

    pub fn record(&mut self, action: Action, pose: RobotPose, result: &StepResult) {
        self.steps.push(TraceStep {
            step: self.steps.len(),
            action,
            pose,
            reward: result.reward,
            cost: result.cost,
            outcome: result.outcome,
            sim_time: result.sim_time,
        });
    }

    pub fn total_reward(&self) -> f64 {
        self.steps.iter().map(|s| s.reward).sum()
    }

    pub fn outcome(&self) -> Outcome {
        self.steps.last().map_or(Outcome::Running, |s| s.outcome)
    }

    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<(), TraceError> {
        let header = HeaderRecord {
            format: TRACE_FORMAT.to_string(),
            version: TRACE_VERSION,
            episode_seed: self.episode_seed,
            start: self.start,
            sim: self.sim,
            env: self.env.to_json_value(),
        };
        serde_json::to_writer(&mut out, &header).map_err(std::io::Error::from)?;
        out.write_all(b"\n")?;
        for s in &self.steps {
            serde_json::to_writer(&mut out, s).map_err(std::io::Error::from)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("json is utf-8")
    }

    pub fn read_jsonl<R: BufRead>(input: R) -> Result<Self, TraceError> {
        let mut lines = input.lines().enumerate().filter(|(_, l)| !matches!(l, Ok(s) if s.trim().is_empty()));
        let (_, first) = lines.next().ok_or(TraceError::Empty)?;
        let parse_err = |line: usize, e: serde_json::Error| TraceError::Parse {
            line,
            message: e.to_string(),
        };
        let header: HeaderRecord = serde_json::from_str(&first?).map_err(|e| parse_err(1, e))?;
        if header.format != TRACE_FORMAT {
            return Err(TraceError::Parse {
                line: 1,
                message: format!("format is `{}`, expected `{TRACE_FORMAT}`", header.format),
            });
        }
        if header.version != TRACE_VERSION {
            return Err(TraceError::Parse {
                line: 1,
                message: format!("unsupported version {}", header.version),
            });
        }
        header.sim.validate().map_err(|e| TraceError::Parse {
            line: 1,
            message: e.to_string(),
        })?;
        let env = EnvironmentSpec::from_json_value(header.env)?;
        let mut steps = Vec::new();
        for (idx, line) in lines {
            let step: TraceStep = serde_json::from_str(&line?).map_err(|e| parse_err(idx + 1, e))?;
            if step.step != steps.len() {
                return Err(TraceError::Parse {
                    line: idx + 1,
                    message: format!("step index {} out of sequence, expected {}", step.step, steps.len()),
                });
            }
            steps.push(step);
        }
        Ok(Self {
            env,
            sim: header.sim,
            episode_seed: header.episode_seed,
            start: header.start,
            steps,
        })
    }

    pub fn from_jsonl_str(text: &str) -> Result<Self, TraceError> {
        Self::read_jsonl(text.as_bytes())
    }
}

/// Re-runs the recorded actions and checks every recorded field bitwise.
/// Returns the number of verified steps.
pub fn replay(trace: &EpisodeTrace) -> Result<usize, TraceError> {
    let mut sim = Simulator::new(&trace.env, trace.sim)?;
    sim.reset_at(trace.start, trace.episode_seed);
    for (i, rec) in trace.steps.iter().enumerate() {
        let ev = sim.advance(rec.action)?;
        let pose = sim.pose();
        let check = |field: &'static str, a: f64, b: f64| {
            if a.to_bits() == b.to_bits() {
                Ok(())
            } else {
                Err(TraceError::Mismatch {
                    step: i,
                    field,
                    recorded: a.to_string(),
                    replayed: b.to_string(),
                })
            }
        };
        check("reward", rec.reward, ev.reward)?;
        check("cost", rec.cost, ev.cost)?;
        check("sim_time", rec.sim_time, ev.sim_time)?;
        check("pose.x", rec.pose.x, pose.x)?;
        check("pose.y", rec.pose.y, pose.y)?;
        check("pose.theta", rec.pose.theta, pose.theta)?;
        if rec.outcome != ev.outcome {
            return Err(TraceError::Mismatch {
                step: i,
                field: "outcome",
                recorded: rec.outcome.to_string(),
                replayed: ev.outcome.to_string(),
            });
        }
    }
    Ok(trace.steps.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::Action;

    fn sample_trace() -> EpisodeTrace {
        let env = EnvironmentSpec::empty_field("e");
        let cfg = SimConfig::default();
        let mut sim = Simulator::new(&env, cfg).unwrap();
        sim.reset(9).unwrap();
        let mut trace = EpisodeTrace::new(&env, cfg, 9, sim.pose());
        for k in 0..12 {
            let a = Action::new(1.3, 0.7 * (k as f64).sin());
            let r = sim.step(a).unwrap();
            trace.record(a, sim.pose(), &r);
        }
        trace
    }

    #[test]
    fn round_trip_and_replay() {
        let trace = sample_trace();
        let text = trace.to_jsonl();
        assert_eq!(text.lines().count(), 13);
        let back = EpisodeTrace::from_jsonl_str(&text).unwrap();
        assert_eq!(back, trace);
        assert_eq!(replay(&back).unwrap(), 12);
    }

    #[test]
    fn tampered_reward_is_reported() {
        let mut trace = sample_trace();
        trace.steps[4].reward += 1e-12;
        match replay(&trace) {
            Err(TraceError::Mismatch { step: 4, field: "reward", .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn bad_lines_carry_line_numbers() {
        let text = sample_trace().to_jsonl();
        let mut lines: Vec<&str> = text.lines().collect();
        lines[3] = "{\"step\": 2}";
        match EpisodeTrace::from_jsonl_str(&lines.join("\n")) {
            Err(TraceError::Parse { line: 4, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(EpisodeTrace::from_jsonl_str(""), Err(TraceError::Empty)));
    }
}
