//! Composable reward engine and curriculum scheduling.

mod curriculum;
mod record;
mod terms;

pub use curriculum::{
    advance_curriculum, AdvanceRule, Curriculum, CurriculumStage, CurriculumState,
};
pub use record::EpisodeRecord;
pub use terms::{
    dtr_reward, pose_reward_cps, pose_reward_cpt, pose_reward_dcps, sparse_rewards,
    style_penalties, total_reward, PoseMode, RewardAccumulator, RewardBreakdown, RewardConfig,
    StylePenalties, SuccessShaping,
};
