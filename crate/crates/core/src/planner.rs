//! Template gold paths per task family, replay checking, training-set
//! samplers and the corpus exporter.

use std::collections::{BTreeMap, VecDeque};
use std::fs;
use std::io::Write;
use std::path::Path;

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::execute;
use crate::seed;
use crate::tasks::{FailConvention, Goal, Params, ScoreTracker, TaskVariation};
use crate::transcript::{
    pack_transcript, render, DialogTurn, HistoryMode, TokenBudget, Transcript, TurnAnnotation,
};
use crate::world::{
    parse_action, step, EntityId, MatterState, ParseResult, RoomId, StepOutcome, WorldState,
};

/// Most paths emitted per variation.
pub const MAX_PATHS: usize = 3;

/// Waits allowed while a substance changes state.
const MAX_WAITS: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoldPath {
    pub variation: String,
    pub task: String,
    pub actions: Vec<String>,
    pub transcript: Transcript,
}

/// Surface variations between the paths of one variation.
#[derive(Debug, Clone, Copy)]
struct Style {
    /// Opening commands before the solution.
    opening: &'static [&'static str],
    look_on_arrival: bool,
    /// Break route ties by reverse neighbor order.
    alternate_route: bool,
}

const STYLES: [Style; MAX_PATHS] = [
    Style {
        opening: &["look around"],
        look_on_arrival: false,
        alternate_route: false,
    },
    Style {
        opening: &["look around", "inventory"],
        look_on_arrival: true,
        alternate_route: false,
    },
    Style {
        opening: &["inventory", "look around"],
        look_on_arrival: false,
        alternate_route: true,
    },
];

struct Script<'a> {
    variation: &'a TaskVariation,
    world: WorldState,
    style: Style,
    actions: Vec<String>,
}

impl<'a> Script<'a> {
    fn new(variation: &'a TaskVariation, style: Style) -> Self {
        Script {
            variation,
            world: variation.initial_world.clone(),
            style,
            actions: Vec::new(),
        }
    }

    fn fail(&self, reason: impl Into<String>) -> Error {
        Error::Planner {
            variation: self.variation.id.clone(),
            reason: reason.into(),
        }
    }

    /// Issues `text`, which must parse and execute.
    fn act(&mut self, text: &str) -> Result<()> {
        let action = match parse_action(text, &self.world) {
            ParseResult::Parsed(action) => action,
            other => return Err(self.fail(format!("{text:?} does not parse: {other:?}"))),
        };
        let result = step(&mut self.world, &action);
        if result.outcome != StepOutcome::Executed {
            return Err(self.fail(format!("{text:?} did not execute: {}", result.observation)));
        }
        self.actions.push(text.to_string());
        Ok(())
    }

    fn name(&self, id: EntityId) -> String {
        self.world.entity(id).name.clone()
    }

    fn route(&self, to: RoomId) -> Option<Vec<RoomId>> {
        let from = self.world.agent_room;
        let mut previous: BTreeMap<RoomId, RoomId> = BTreeMap::new();
        let mut queue = VecDeque::from([from]);
        while let Some(room) = queue.pop_front() {
            if room == to {
                let mut path = vec![to];
                let mut at = to;
                while at != from {
                    at = previous[&at];
                    path.push(at);
                }
                path.pop();
                path.reverse();
                return Some(path);
            }
            let mut next: Vec<RoomId> = self.world.neighbors(room).map(|(r, _)| r).collect();
            next.sort_by_key(|r| self.world.room(*r).name.clone());
            if self.style.alternate_route {
                next.reverse();
            }
            for r in next {
                if r != from && !previous.contains_key(&r) {
                    previous.insert(r, room);
                    queue.push_back(r);
                }
            }
        }
        None
    }

    /// Walks to `room`, opening closed doors on the way.
    fn goto(&mut self, room: RoomId) -> Result<()> {
        let hops = self
            .route(room)
            .ok_or_else(|| self.fail(format!("no route to {}", self.world.room(room).name)))?;
        for hop in hops {
            let name = self.world.room(hop).name.clone();
            let door = self
                .world
                .door_between(self.world.agent_room, hop)
                .expect("adjacent");
            if !self.world.door(door).is_open {
                self.act(&format!("open door to {name}"))?;
            }
            self.act(&format!("go to {name}"))?;
            if self.style.look_on_arrival {
                self.act("look around")?;
            }
        }
        Ok(())
    }

    fn goto_entity(&mut self, id: EntityId) -> Result<()> {
        match self.world.room_of(id) {
            Some(room) => self.goto(room),
            None => Ok(()),
        }
    }

    fn wait_until(&mut self, done: impl Fn(&WorldState) -> bool) -> Result<()> {
        for _ in 0..MAX_WAITS {
            if done(&self.world) {
                return Ok(());
            }
            self.act("wait")?;
        }
        Err(self.fail("condition not reached while waiting"))
    }

    fn require(&self, id: Option<EntityId>, what: &str) -> Result<EntityId> {
        id.ok_or_else(|| self.fail(format!("variation has no {what}")))
    }

    /// First usable device among `names` whose limit reaches past `needed`.
    fn pick_device(&self, names: &[&str], heating: bool, needed: f64) -> Result<EntityId> {
        for name in names {
            let Some(id) = self.world.find_entity(name) else {
                continue;
            };
            let e = self.world.entity(id);
            let Some(limit) = e.temperature_limit else {
                continue;
            };
            let reaches = if heating {
                limit > needed
            } else {
                limit < needed
            };
            if !e.broken && reaches && e.receptacle.is_some() {
                return Ok(id);
            }
        }
        Err(self.fail(format!("no device reaches {needed} degrees")))
    }

    /// Moves the container holding the target into `device` and runs it.
    fn load_device(&mut self, container: EntityId, device: EntityId) -> Result<()> {
        self.goto_entity(device)?;
        let name = self.name(device);
        if self.world.entity(device).is_open == Some(false) {
            self.act(&format!("open {name}"))?;
        }
        let preposition = match self.world.entity(device).receptacle {
            Some(crate::world::Receptacle::On) => "on",
            _ => "in",
        };
        self.act(&format!(
            "put {} {preposition} {name}",
            self.name(container)
        ))?;
        if self.world.entity(device).activated == Some(false) {
            self.act(&format!("activate {name}"))?;
        }
        Ok(())
    }

    fn change_state(
        &mut self,
        target: EntityId,
        container: EntityId,
        goal: MatterState,
    ) -> Result<()> {
        let (heating, needed, devices): (bool, f64, &[&str]) = match goal {
            MatterState::Solid => (
                false,
                self.world
                    .entity(target)
                    .melting_point()
                    .unwrap_or(f64::NEG_INFINITY),
                &["freezer"],
            ),
            MatterState::Liquid => (
                true,
                self.world
                    .entity(target)
                    .melting_point()
                    .unwrap_or(f64::NEG_INFINITY),
                &["stove", "oven", "forge"],
            ),
            MatterState::Gas => (
                true,
                self.world
                    .entity(target)
                    .boiling_point()
                    .unwrap_or(f64::INFINITY),
                &["stove", "oven", "forge"],
            ),
        };
        let device = self.pick_device(devices, heating, needed)?;
        if !self.world.is_carried(container) {
            self.goto_entity(container)?;
            self.act(&format!("pick up {}", self.name(container)))?;
        }
        self.load_device(container, device)?;
        self.wait_until(|w| w.entity(target).matter_state == Some(goal))
    }

    /// Goal state for the "any change" family given the starting phase.
    fn any_goal(&self, target: EntityId) -> MatterState {
        let e = self.world.entity(target);
        match e.matter_state {
            Some(MatterState::Solid) => MatterState::Liquid,
            Some(MatterState::Gas) => MatterState::Liquid,
            _ => {
                let freezable = self
                    .pick_device(
                        &["freezer"],
                        false,
                        e.melting_point().unwrap_or(f64::NEG_INFINITY),
                    )
                    .is_ok();
                if freezable {
                    MatterState::Solid
                } else {
                    MatterState::Gas
                }
            }
        }
    }

    fn fetch_thermometer(&mut self, thermometer: EntityId) -> Result<()> {
        self.goto_entity(thermometer)?;
        self.act(&format!("pick up {}", self.name(thermometer)))?;
        self.act(&format!("focus on {} in inventory", self.name(thermometer)))
    }

    fn solve(&mut self) -> Result<()> {
        for text in self.style.opening {
            self.act(text)?;
        }
        let b = self.variation.bindings.clone();
        match &self.variation.params {
            Params::ChangeState { goal, .. } => {
                let target = self.require(b.target, "target")?;
                let container = self.require(b.container, "container")?;
                self.goto_entity(container)?;
                self.act(&format!("focus on {}", self.name(target)))?;
                let goal = match goal {
                    Goal::Any => self.any_goal(target),
                    other => other.state().expect("concrete goal"),
                };
                self.change_state(target, container, goal)?;
            }
            Params::Thermometer { .. } => {
                let thermometer = self.require(b.thermometer, "thermometer")?;
                let target = self.require(b.target, "target")?;
                let answer = self.require(b.correct_box, "answer box")?;
                self.fetch_thermometer(thermometer)?;
                self.goto_entity(target)?;
                self.act(&format!("focus on {}", self.name(target)))?;
                self.act(&format!(
                    "use {} on {}",
                    self.name(thermometer),
                    self.name(target)
                ))?;
                self.goto_entity(answer)?;
                self.act(&format!("focus on {}", self.name(answer)))?;
            }
            Params::BoilingPoint { .. } => {
                let thermometer = self.require(b.thermometer, "thermometer")?;
                let target = self.require(b.target, "target")?;
                let container = self.require(b.container, "container")?;
                let answer = self.require(b.correct_box, "answer box")?;
                self.fetch_thermometer(thermometer)?;
                self.goto_entity(container)?;
                self.act(&format!("focus on {}", self.name(target)))?;
                self.change_state(target, container, MatterState::Gas)?;
                self.act(&format!(
                    "use {} on {}",
                    self.name(thermometer),
                    self.name(target)
                ))?;
                self.goto_entity(answer)?;
                self.act(&format!("focus on {}", self.name(answer)))?;
            }
            Params::FindThing { .. } => {
                let thing = self.require(b.target, "thing")?;
                let the_box = self.require(b.correct_box, "box")?;
                self.goto_entity(thing)?;
                self.act(&format!("focus on {}", self.name(thing)))?;
                self.act(&format!("pick up {}", self.name(thing)))?;
                self.goto_entity(the_box)?;
                self.act(&format!(
                    "put {} in {}",
                    self.name(thing),
                    self.name(the_box)
                ))?;
            }
            Params::Lifespan { .. } => {
                let target = self.require(b.target, "animal")?;
                self.goto_entity(target)?;
                self.act(&format!("focus on {}", self.name(target)))?;
            }
        }
        Ok(())
    }
}

/// Result of replaying an action list from a variation's initial world.
#[derive(Debug, Clone, PartialEq)]
pub struct Replay {
    pub transcript: Transcript,
    pub score: u32,
    pub won: bool,
    pub failed: bool,
    /// Number of actions consumed before the game ended.
    pub steps: usize,
}

/// Replays `actions`, stopping early when the game is won or lost.
pub fn replay(variation: &TaskVariation, actions: &[String]) -> Replay {
    let mut world = variation.initial_world.clone();
    let mut tracker = ScoreTracker::new(&variation.scoring);
    tracker.observe(&variation.scoring, &world);
    let mut transcript = Transcript::new(variation.description.clone());
    let mut steps = 0;
    for text in actions {
        if tracker.finished() {
            break;
        }
        steps += 1;
        let (category, observation) = execute(&mut world, text);
        tracker.observe(&variation.scoring, &world);
        let turn = DialogTurn {
            action: text.clone(),
            observation,
        };
        transcript.push(
            turn,
            TurnAnnotation {
                score: tracker.score(FailConvention::LastScoreOnFail),
                category: Some(category),
                intercepted: false,
            },
        );
    }
    Replay {
        transcript,
        score: tracker.score(FailConvention::ZeroOnFail),
        won: tracker.won(),
        failed: tracker.failed(),
        steps,
    }
}

/// Up to three distinct gold paths for `variation`, each verified to replay
/// to a full score.
pub fn plan(variation: &TaskVariation) -> Result<Vec<GoldPath>> {
    let mut paths: Vec<GoldPath> = Vec::new();
    for style in STYLES {
        let mut script = Script::new(variation, style);
        script.solve()?;
        let actions = script.actions;
        if paths.iter().any(|p| p.actions == actions) {
            continue;
        }
        let check = replay(variation, &actions);
        if !check.won || check.score != 100 || check.steps != actions.len() {
            return Err(Error::Planner {
                variation: variation.id.clone(),
                reason: format!(
                    "path replays to {} after {} of {} actions",
                    check.score,
                    check.steps,
                    actions.len()
                ),
            });
        }
        paths.push(GoldPath {
            variation: variation.id.clone(),
            task: variation.task.clone(),
            actions,
            transcript: check.transcript,
        });
    }
    Ok(paths)
}

/// Plans every variation in parallel, keeping catalog order.
pub fn plan_all(variations: &[TaskVariation]) -> Result<Vec<Vec<GoldPath>>> {
    use rayon::prelude::*;
    variations.par_iter().map(plan).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrainSetName {
    AllTrain,
    NoVariations,
    UpTo18,
}

impl TrainSetName {
    pub const ALL: [TrainSetName; 3] = [
        TrainSetName::AllTrain,
        TrainSetName::NoVariations,
        TrainSetName::UpTo18,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TrainSetName::AllTrain => "all-train",
            TrainSetName::NoVariations => "no-variations",
            TrainSetName::UpTo18 => "up-to-18",
        }
    }
}

impl std::str::FromStr for TrainSetName {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        TrainSetName::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| format!("unknown training set {s}"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSet {
    pub name: TrainSetName,
    pub gameplays: Vec<GoldPath>,
}

/// Per-task cap of the smallest training set.
pub const PER_TASK_CAP: usize = 18;

/// Builds the three nested training sets from the paths of train-split
/// variations (one inner list per variation).
pub fn sample_trainsets(paths: &[Vec<GoldPath>], master_seed: u64) -> [TrainSet; 3] {
    let all: Vec<GoldPath> = paths.iter().flatten().cloned().collect();
    let mut one_each = Vec::new();
    for group in paths.iter().filter(|g| !g.is_empty()) {
        let mut rng = seed::rng(
            master_seed,
            &format!("no-variations/{}", group[0].variation),
        );
        one_each.push(group[rng.gen_range(0..group.len())].clone());
    }
    let mut by_task: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, p) in one_each.iter().enumerate() {
        by_task.entry(p.task.as_str()).or_default().push(i);
    }
    let mut keep = vec![false; one_each.len()];
    for (task, members) in &by_task {
        if members.len() <= PER_TASK_CAP {
            members.iter().for_each(|&i| keep[i] = true);
        } else {
            let mut rng = seed::rng(master_seed, &format!("up-to-18/{task}"));
            for j in sample(&mut rng, members.len(), PER_TASK_CAP) {
                keep[members[j]] = true;
            }
        }
    }
    let capped = one_each
        .iter()
        .zip(&keep)
        .filter(|(_, &k)| k)
        .map(|(p, _)| p.clone())
        .collect();
    [
        TrainSet {
            name: TrainSetName::AllTrain,
            gameplays: all,
        },
        TrainSet {
            name: TrainSetName::NoVariations,
            gameplays: one_each,
        },
        TrainSet {
            name: TrainSetName::UpTo18,
            gameplays: capped,
        },
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusDocument {
    pub variation: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExportManifest {
    pub trainset: TrainSetName,
    pub documents: usize,
    pub budget: usize,
    /// Word pieces of each document, in file order.
    pub lengths: Vec<usize>,
    pub mean_actions: f64,
    pub over_budget: usize,
    /// How many prior turns fit the budget at the end of each game.
    pub packed_turns_histogram: BTreeMap<usize, usize>,
}

/// Writes `trainset` as JSONL (`{"variation", "text"}` per line) plus a
/// manifest next to it. Documents longer than the budget are kept whole.
pub fn export_training_file(
    trainset: &TrainSet,
    budget: &TokenBudget,
    path: &Path,
) -> Result<ExportManifest> {
    if trainset.gameplays.is_empty() {
        return Err(Error::EmptyTrainSet);
    }
    let mut out = Vec::new();
    let mut lengths = Vec::new();
    let mut histogram = BTreeMap::new();
    let mut over_budget = 0;
    for gameplay in &trainset.gameplays {
        let text = render(&gameplay.transcript);
        let pieces = budget.count(&text);
        if pieces > budget.max_pieces {
            over_budget += 1;
        }
        lengths.push(pieces);
        if let Ok(packed) = pack_transcript(&gameplay.transcript, budget, HistoryMode::FullHistory)
        {
            *histogram.entry(packed.turns).or_insert(0) += 1;
        }
        serde_json::to_writer(
            &mut out,
            &CorpusDocument {
                variation: gameplay.variation.clone(),
                text,
            },
        )?;
        out.push(b'\n');
    }
    let total_actions: usize = trainset.gameplays.iter().map(|g| g.actions.len()).sum();
    let manifest = ExportManifest {
        trainset: trainset.name,
        documents: trainset.gameplays.len(),
        budget: budget.max_pieces,
        lengths,
        mean_actions: total_actions as f64 / trainset.gameplays.len() as f64,
        over_budget,
        packed_turns_histogram: histogram,
    };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&out).map_err(|e| Error::io(path, e))?;
    let manifest_path = path.with_extension("manifest.json");
    fs::write(&manifest_path, serde_json::to_vec_pretty(&manifest)?)
        .map_err(|e| Error::io(&manifest_path, e))?;
    Ok(manifest)
}

/// Reads an exported corpus back.
pub fn read_training_file(path: &Path) -> Result<Vec<CorpusDocument>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(Error::from))
        .collect()
}
