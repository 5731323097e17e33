//! Staged curriculum over ball distributions and reward configurations.

use serde::{Deserialize, Serialize};

use super::terms::{PoseMode, RewardConfig, SuccessShaping};
use crate::error::{Error, Result};
use crate::sim::DistributionKind;

/// When a stage hands over to the next one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum AdvanceRule {
    /// Advance after this many optimizer iterations in the stage.
    AfterIterations { iterations: u64 },
    /// Advance once the probe success rate reaches the threshold (fraction).
    SuccessAtLeast { threshold: f64 },
}

/// One curriculum stage: a task distribution, a reward configuration, and an
/// optional advancement rule (the final stage usually has none).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurriculumStage {
    #[serde(default)]
    pub name: Option<String>,
    pub distribution: DistributionKind,
    #[serde(default)]
    pub rewards: RewardConfig,
    #[serde(default)]
    pub advance: Option<AdvanceRule>,
}

/// Totally ordered stage list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Curriculum {
    pub stages: Vec<CurriculumStage>,
}

impl Curriculum {
    /// Single-stage curriculum (fixed distribution and rewards).
    pub fn single(distribution: DistributionKind, rewards: RewardConfig) -> Self {
        Curriculum {
            stages: vec![CurriculumStage {
                name: None,
                distribution,
                rewards,
                advance: None,
            }],
        }
    }

    /// The bimodal three-phase schedule: dense pose shaping on the full
    /// table, then distance-to-table shaping with the pose-timestep reward on
    /// a bimodal ball range that widens back out to the full table.
    pub fn bimodal(stage_iterations: u64) -> Self {
        let style = RewardConfig::canonical();
        let stage = |name: &str, dist: DistributionKind, rewards: RewardConfig, last: bool| {
            CurriculumStage {
                name: Some(name.to_string()),
                distribution: dist,
                rewards,
                advance: (!last).then_some(AdvanceRule::AfterIterations {
                    iterations: stage_iterations,
                }),
            }
        };
        let dcps = style.clone().with_pose(PoseMode::Dcps);
        let cpt_dtr = style
            .clone()
            .with_pose(PoseMode::Cpt)
            .with_success_shaping(SuccessShaping::Dtr);
        Curriculum {
            stages: vec![
                stage("dcps-full-table", DistributionKind::FullTable, dcps, false),
                stage(
                    "dtr-cpt-range-0.5-0.7",
                    DistributionKind::BallRange { inner: 0.5, outer: 0.7 },
                    cpt_dtr.clone(),
                    false,
                ),
                stage(
                    "widen-range-0.3-0.7",
                    DistributionKind::BallRange { inner: 0.3, outer: 0.7 },
                    cpt_dtr.clone(),
                    false,
                ),
                stage(
                    "widen-range-0.1-0.7",
                    DistributionKind::BallRange { inner: 0.1, outer: 0.7 },
                    cpt_dtr.clone(),
                    false,
                ),
                stage("full-table", DistributionKind::FullTable, cpt_dtr, true),
            ],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.stages.is_empty() {
            return Err(Error::Config("curriculum needs at least one stage".into()));
        }
        for (i, stage) in self.stages.iter().enumerate() {
            stage.rewards.validate()?;
            if let DistributionKind::BallRange { inner, outer } = stage.distribution {
                if !(0.0 <= inner && inner < outer) {
                    return Err(Error::Config(format!(
                        "stage {i}: ball range requires 0 <= inner < outer"
                    )));
                }
            }
            if let Some(AdvanceRule::SuccessAtLeast { threshold }) = stage.advance {
                if !(0.0..=1.0).contains(&threshold) {
                    return Err(Error::Config(format!(
                        "stage {i}: success threshold must be in [0, 1]"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn stage(&self, index: usize) -> &CurriculumStage {
        &self.stages[index.min(self.stages.len() - 1)]
    }

    pub fn len(&self) -> usize {
        self.stages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stages.is_empty()
    }
}

/// Scheduler position within a curriculum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CurriculumState {
    pub stage_index: usize,
    /// Iteration at which the stage was entered.
    pub entered_iteration: u64,
}

impl Default for CurriculumState {
    fn default() -> Self {
        CurriculumState {
            stage_index: 0,
            entered_iteration: 0,
        }
    }
}

/// Advances the scheduler after `completed_iteration` finished with the given
/// probe success rate. Monotone: stages never regress.
pub fn advance_curriculum(
    curriculum: &Curriculum,
    state: CurriculumState,
    completed_iteration: u64,
    probe_success: f64,
) -> CurriculumState {
    if state.stage_index + 1 >= curriculum.stages.len() {
        return state;
    }
    let stage = &curriculum.stages[state.stage_index];
    let fire = match stage.advance {
        None => false,
        Some(AdvanceRule::AfterIterations { iterations }) => {
            completed_iteration + 1 >= state.entered_iteration + iterations
        }
        Some(AdvanceRule::SuccessAtLeast { threshold }) => probe_success >= threshold,
    };
    if fire {
        CurriculumState {
            stage_index: state.stage_index + 1,
            entered_iteration: completed_iteration + 1,
        }
    } else {
        state
    }
}
