pub mod canonical;
pub mod composer;
pub mod correction;
pub mod dsl;
pub mod knowledge;
pub mod lm;
pub mod orchestrator;
pub mod planner;
pub mod scenario;
pub mod sim;
pub mod skill;
