//! Task classes, seeded variations, milestone scoring and splits.

pub mod family;
pub mod scoring;
pub mod split;

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

pub use family::{Bindings, Family, Goal, Params, Pool};
pub use scoring::{
    score, Condition, FailCondition, FailConvention, Milestone, ScoreTracker, Scoring,
};
pub use split::{assign_split, Split, SplitCounts, SplitTable};

use crate::error::{Error, Result};
use crate::seed;
use crate::world::messages::fill;
use crate::world::{MatterState, WorldSpec, WorldState};

const DEFAULT_TASKS: &str = include_str!("../../data/tasks.toml");

pub const MIN_VARIATIONS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TaskCategory {
    Matter,
    Measurement,
    Classification,
    Biology,
}

/// Milestone roles a task class may use; each compiles to a [`Condition`]
/// once a variation's entities are known.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Role {
    FocusTarget,
    FocusThermometer,
    FocusCorrectBox,
    FocusAllowedThing,
    FocusedInInventory,
    FocusedInBox,
    AgentInTaskRoom,
    TargetOnHeatSource,
    TargetHeatSourceActive,
    TargetUnderActiveCooler,
    TargetUnderActiveDevice,
    TargetReachesGoalState,
    TargetChangesState,
    TargetMeasured,
    TargetMeasuredInGoalState,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FailRole {
    FocusOutsideAllowed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MilestoneSpec {
    pub when: Role,
    pub points: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskClass {
    pub id: String,
    pub name: String,
    pub category: TaskCategory,
    pub default_count: usize,
    pub description: String,
    pub milestones: Vec<MilestoneSpec>,
    #[serde(default)]
    pub fail: Vec<FailRole>,
    pub family: Family,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TaskFile {
    task: Vec<TaskClass>,
}

/// One playable game: a task class instantiated with concrete parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskVariation {
    pub id: String,
    pub task: String,
    pub index: usize,
    pub seed: u64,
    pub split: Split,
    pub params: Params,
    pub description: String,
    pub initial_world: WorldState,
    pub scoring: Scoring,
    pub bindings: Bindings,
}

fn missing(task: &str, what: &str) -> Error {
    Error::Data {
        name: "tasks".into(),
        message: format!("task {task} has no {what} for its milestone roles"),
    }
}

impl TaskClass {
    fn validate(&self) -> Result<()> {
        let total: u32 = self.milestones.iter().map(|m| m.points).sum();
        if total != 100 {
            return Err(Error::Data {
                name: "tasks".into(),
                message: format!("milestones of {} sum to {total}, not 100", self.id),
            });
        }
        if self.milestones.is_empty() {
            return Err(missing(&self.id, "milestones"));
        }
        Ok(())
    }

    /// Number of distinct parameter tuples in each pool.
    pub fn pool_sizes(&self) -> (usize, usize) {
        (
            self.family.pool_size(Pool::Train),
            self.family.pool_size(Pool::Eval),
        )
    }

    fn compile(&self, b: &Bindings) -> Result<Scoring> {
        let need = |v: Option<crate::world::EntityId>, what: &str| {
            v.ok_or_else(|| missing(&self.id, what))
        };
        let mut milestones = Vec::new();
        for spec in &self.milestones {
            let condition = match spec.when {
                Role::FocusTarget => Condition::Focused {
                    entity: need(b.target, "target")?,
                },
                Role::FocusThermometer => Condition::Focused {
                    entity: need(b.thermometer, "thermometer")?,
                },
                Role::FocusCorrectBox => Condition::Focused {
                    entity: need(b.correct_box, "answer box")?,
                },
                Role::FocusAllowedThing => Condition::FocusedOneOf {
                    entities: b.allowed_things.clone(),
                },
                Role::FocusedInInventory => Condition::FocusedInInventory,
                Role::FocusedInBox => Condition::FocusedInside {
                    holder: need(b.correct_box, "box")?,
                },
                Role::AgentInTaskRoom => Condition::AgentIn {
                    room: b.task_room.ok_or_else(|| missing(&self.id, "task room"))?,
                },
                Role::TargetOnHeatSource => Condition::OnHeater {
                    entity: need(b.target, "target")?,
                },
                Role::TargetHeatSourceActive => Condition::UnderActiveHeater {
                    entity: need(b.target, "target")?,
                },
                Role::TargetUnderActiveCooler => Condition::UnderActiveCooler {
                    entity: need(b.target, "target")?,
                },
                Role::TargetUnderActiveDevice => Condition::UnderActiveDevice {
                    entity: need(b.target, "target")?,
                },
                Role::TargetReachesGoalState => Condition::InState {
                    entity: need(b.target, "target")?,
                    state: b
                        .goal
                        .and_then(Goal::state)
                        .ok_or_else(|| missing(&self.id, "goal state"))?,
                },
                Role::TargetChangesState => Condition::NotInState {
                    entity: need(b.target, "target")?,
                    state: b
                        .initial_state
                        .ok_or_else(|| missing(&self.id, "initial state"))?,
                },
                Role::TargetMeasured => Condition::Measured {
                    entity: need(b.target, "target")?,
                },
                Role::TargetMeasuredInGoalState => Condition::MeasuredInState {
                    entity: need(b.target, "target")?,
                    state: b.goal.and_then(Goal::state).unwrap_or(MatterState::Gas),
                },
            };
            milestones.push(Milestone {
                label: serde_json::to_value(spec.when)?
                    .as_str()
                    .unwrap_or_default()
                    .to_string(),
                condition,
                points: spec.points,
            });
        }
        let mut fails = Vec::new();
        for role in &self.fail {
            match role {
                FailRole::FocusOutsideAllowed => {
                    let mut allowed: BTreeSet<_> = self
                        .milestones
                        .iter()
                        .filter_map(|m| family::focus_entity(m.when, b))
                        .collect();
                    if self
                        .milestones
                        .iter()
                        .any(|m| m.when == Role::FocusAllowedThing)
                    {
                        allowed.extend(b.allowed_things.iter().copied());
                    }
                    fails.push(FailCondition::FocusOutside { allowed });
                }
            }
        }
        Ok(Scoring { milestones, fails })
    }

    /// Instantiates one variation from a parameter tuple.
    pub fn instantiate(
        &self,
        world_spec: &WorldSpec,
        index: usize,
        split: Split,
        params: Params,
        master_seed: u64,
    ) -> Result<TaskVariation> {
        let seed = seed::derive(master_seed, &format!("{}/{index}", self.id));
        let (world, bindings) = params.build(world_spec, seed)?;
        let scoring = self.compile(&bindings)?;
        let slots = params.slots(&world, &bindings);
        let pairs: Vec<(&str, &str)> = slots.iter().map(|(k, v)| (*k, v.as_str())).collect();
        Ok(TaskVariation {
            id: format!("{}-{index}", self.id),
            task: self.id.clone(),
            index,
            seed,
            split,
            params,
            description: fill(&self.description, &pairs),
            initial_world: world,
            scoring,
            bindings,
        })
    }
}

/// Generates `count` variations of `class`. Train-split indices draw from
/// the class's train pool and dev/test indices from its eval pool, so held
/// out parameters never reach training.
pub fn enumerate_variations(
    class: &TaskClass,
    world_spec: &WorldSpec,
    count: usize,
    master_seed: u64,
) -> Result<Vec<TaskVariation>> {
    if count < MIN_VARIATIONS {
        return Err(Error::TooFewVariations {
            task: class.id.clone(),
            count,
            minimum: MIN_VARIATIONS,
        });
    }
    let counts = SplitCounts::for_total(count);
    let mut pools = BTreeMap::new();
    for (pool, requested) in [
        (Pool::Train, counts.train),
        (Pool::Eval, counts.dev + counts.test),
    ] {
        let mut rng = seed::rng(master_seed, &format!("{}/{}/grid", class.id, pool.name()));
        let grid = class.family.grid(pool, &mut rng);
        if requested > grid.len() {
            return Err(Error::InsufficientParameterSpace {
                task: class.id.clone(),
                pool: pool.name(),
                requested,
                available: grid.len(),
            });
        }
        pools.insert(pool.name(), grid);
    }
    (0..count)
        .map(|index| {
            let split = assign_split(index, count);
            let pool = if split == Split::Train {
                "train"
            } else {
                "eval"
            };
            let params = pools[pool][split::pool_position(index, count)].clone();
            class.instantiate(world_spec, index, split, params, master_seed)
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct Catalog {
    pub world: WorldSpec,
    pub classes: Vec<TaskClass>,
}

impl Catalog {
    pub fn parse(tasks_source: &str, world: WorldSpec) -> Result<Self> {
        let file: TaskFile = toml::from_str(tasks_source).map_err(|e| Error::Data {
            name: "tasks".into(),
            message: e.to_string(),
        })?;
        let mut seen = BTreeSet::new();
        for class in &file.task {
            class.validate()?;
            if !seen.insert(class.id.clone()) {
                return Err(Error::Data {
                    name: "tasks".into(),
                    message: format!("duplicate task id {}", class.id),
                });
            }
        }
        Ok(Catalog {
            world,
            classes: file.task,
        })
    }

    pub fn load(tasks_path: &Path, world_path: Option<&Path>) -> Result<Self> {
        let source = std::fs::read_to_string(tasks_path).map_err(|e| Error::io(tasks_path, e))?;
        let world = match world_path {
            Some(p) => WorldSpec::load(p)?,
            None => WorldSpec::builtin().clone(),
        };
        Self::parse(&source, world)
    }

    pub fn builtin() -> &'static Catalog {
        static CATALOG: OnceLock<Catalog> = OnceLock::new();
        CATALOG.get_or_init(|| {
            Catalog::parse(DEFAULT_TASKS, WorldSpec::builtin().clone())
                .expect("built-in task data is valid")
        })
    }

    pub fn class(&self, id: &str) -> Result<&TaskClass> {
        self.classes
            .iter()
            .find(|c| c.id == id)
            .ok_or_else(|| Error::UnknownTask(id.to_string()))
    }

    pub fn enumerate(
        &self,
        id: &str,
        count: usize,
        master_seed: u64,
    ) -> Result<Vec<TaskVariation>> {
        enumerate_variations(self.class(id)?, &self.world, count, master_seed)
    }

    /// Every class at its default count unless overridden.
    pub fn generate(
        &self,
        master_seed: u64,
        counts: &BTreeMap<String, usize>,
    ) -> Result<Vec<TaskVariation>> {
        for id in counts.keys() {
            self.class(id)?;
        }
        let mut out = Vec::new();
        for class in &self.classes {
            let count = counts
                .get(&class.id)
                .copied()
                .unwrap_or(class.default_count);
            out.extend(enumerate_variations(
                class,
                &self.world,
                count,
                master_seed,
            )?);
        }
        Ok(out)
    }

    pub fn split_table(variations: &[TaskVariation]) -> SplitTable {
        let mut table = SplitTable::default();
        for v in variations {
            table.record(&v.task, v.split);
        }
        table
    }
}
