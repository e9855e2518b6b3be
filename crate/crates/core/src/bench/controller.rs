use super::BenchError;
use crate::planners::{DWAConfig, DwaPlanner};
use crate::rl::{HistoryWindow, TrainedPolicy, UnitPolicy};
use crate::seed::{derive_seed, rng_from_seed};
use crate::sim::{Action, ActionBounds, Observation, SimConfig};
use rand_chacha::ChaCha8Rng;

/// A closed-loop controller acting on raw observations.
pub trait Controller: Send {
    fn reset(&mut self, episode_seed: u64);
    fn act(&mut self, obs: &Observation) -> Result<Action, BenchError>;
}

/// Builds a fresh controller per evaluation worker.
pub trait ControllerFactory: Sync {
    fn name(&self) -> String;
    fn build(&self, sim: &SimConfig) -> Box<dyn Controller>;
}

#[derive(Debug, Clone, Copy)]
pub struct ConstantController(pub Action);

impl Controller for ConstantController {
    fn reset(&mut self, _: u64) {}

    fn act(&mut self, _: &Observation) -> Result<Action, BenchError> {
        Ok(self.0)
    }
}

impl ControllerFactory for ConstantController {
    fn name(&self) -> String {
        format!("constant({}, {})", self.0.v, self.0.omega)
    }

    fn build(&self, _: &SimConfig) -> Box<dyn Controller> {
        Box::new(*self)
    }
}

#[derive(Debug, Clone)]
pub struct DwaController {
    pub config: DWAConfig,
    planner: Option<DwaPlanner>,
}

impl DwaController {
    pub fn new(config: DWAConfig) -> Self {
        Self { config, planner: None }
    }
}

impl Controller for DwaController {
    fn reset(&mut self, _: u64) {
        self.planner.get_or_insert_with(|| DwaPlanner::new(self.config)).reset();
    }

    fn act(&mut self, obs: &Observation) -> Result<Action, BenchError> {
        Ok(self.planner.get_or_insert_with(|| DwaPlanner::new(self.config)).act(obs))
    }
}

impl ControllerFactory for DwaController {
    fn name(&self) -> String {
        "dwa".into()
    }

    /// Robot geometry, bounds and sensor come from the simulator.
    fn build(&self, sim: &SimConfig) -> Box<dyn Controller> {
        let config = DWAConfig {
            robot_radius: sim.robot_radius,
            bounds: sim.action_bounds,
            lidar: sim.lidar,
            control_dt: sim.control_dt,
            ..self.config
        };
        Box::new(DwaController::new(config))
    }
}

/// A trained policy driven greedily, with its own history window.
pub struct PolicyController {
    policy: TrainedPolicy,
    greedy: Box<dyn UnitPolicy + Send>,
    bounds: ActionBounds,
    window: HistoryWindow,
    last: [f64; 2],
    rng: ChaCha8Rng,
}

impl PolicyController {
    pub fn new(policy: TrainedPolicy, bounds: ActionBounds) -> Self {
        Self {
            greedy: policy.greedy(),
            window: HistoryWindow::new(policy.layout),
            policy,
            bounds,
            last: [0.0; 2],
            rng: rng_from_seed(0),
        }
    }
}

impl Controller for PolicyController {
    fn reset(&mut self, episode_seed: u64) {
        self.window = HistoryWindow::new(self.policy.layout);
        self.last = [0.0; 2];
        self.rng = rng_from_seed(derive_seed(episode_seed, "policy", 0));
    }

    fn act(&mut self, obs: &Observation) -> Result<Action, BenchError> {
        let features = self.policy.features.extract(obs);
        let w = if self.window.current().is_none() {
            self.window.reset(features)
        } else {
            self.window.push(features, &self.last)
        };
        let u = self.greedy.act(&w, &self.policy.layout, &mut self.rng)?;
        self.last = u;
        Ok(self.bounds.from_unit(u))
    }
}

impl ControllerFactory for TrainedPolicy {
    fn name(&self) -> String {
        format!("{}-h{}", self.technique, self.layout.history)
    }

    fn build(&self, sim: &SimConfig) -> Box<dyn Controller> {
        Box::new(PolicyController::new(self.clone(), sim.action_bounds))
    }
}
