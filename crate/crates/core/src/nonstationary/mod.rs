//! Learning equilibria on a drifting or switching game stream.

mod etc;
mod multiscale;
mod schedule;

pub use etc::{run_restart_etc, tune_etc, EtcConfig, EtcReport};
pub use multiscale::{
    block_eps, first_block, run_multiscale, run_oblivious, BlockEnd, BlockRecord, ExactTester, MultiscaleReport,
    OracleTester, TestRunner, TesterFactory,
};
pub use schedule::{
    check_legality, compute_block_params, BlockParams, BlockSchedule, EpisodeRecord, LegalityViolation, RandomSpawns,
    ScheduleAction, ScheduledTest, ScriptedSpawns, SpawnSource, TestState,
};
