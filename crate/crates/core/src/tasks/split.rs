//! Train/dev/test assignment.
//!
//! Rule: the first `ceil(total / 2)` indices are train. The remaining indices
//! alternate dev, test, dev, ... so dev gets the extra one when the remainder
//! is odd (10 gives 5/3/2, 12 gives 6/3/3).

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Split {
    Train,
    Dev,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Dev, Split::Test];

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Dev => "dev",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(Split::Train),
            "dev" => Ok(Split::Dev),
            "test" => Ok(Split::Test),
            other => Err(format!("unknown split {other}")),
        }
    }
}

pub fn train_count(total: usize) -> usize {
    total.div_ceil(2)
}

pub fn assign_split(variation_index: usize, total: usize) -> Split {
    debug_assert!(variation_index < total);
    let train = train_count(total);
    if variation_index < train {
        Split::Train
    } else if (variation_index - train).is_multiple_of(2) {
        Split::Dev
    } else {
        Split::Test
    }
}

/// Position of `variation_index` inside its split's pool sequence.
pub fn pool_position(variation_index: usize, total: usize) -> usize {
    let train = train_count(total);
    if variation_index < train {
        variation_index
    } else {
        variation_index - train
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitCounts {
    pub train: usize,
    pub dev: usize,
    pub test: usize,
}

impl SplitCounts {
    pub fn for_total(total: usize) -> Self {
        let train = train_count(total);
        let rest = total - train;
        SplitCounts {
            train,
            dev: rest.div_ceil(2),
            test: rest / 2,
        }
    }

    pub fn get(&self, split: Split) -> usize {
        match split {
            Split::Train => self.train,
            Split::Dev => self.dev,
            Split::Test => self.test,
        }
    }

    pub fn total(&self) -> usize {
        self.train + self.dev + self.test
    }
}

/// Per-task split counts.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitTable {
    pub tasks: BTreeMap<String, SplitCounts>,
}

impl SplitTable {
    pub fn record(&mut self, task: &str, split: Split) {
        let counts = self.tasks.entry(task.to_string()).or_default();
        match split {
            Split::Train => counts.train += 1,
            Split::Dev => counts.dev += 1,
            Split::Test => counts.test += 1,
        }
    }
}
