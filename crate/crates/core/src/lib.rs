pub mod corpus;
pub mod lexstats;
pub mod providers;
pub mod stattests;
pub mod transform;
pub mod textmetrics;
pub mod classifier;
pub mod report;
pub mod cli;
