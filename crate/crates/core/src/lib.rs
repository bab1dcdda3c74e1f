//! Stable matching with contracts for college admissions markets where each
//! program admits students under two financial terms.

pub mod allocation;
pub mod analysis;
pub mod alt;
pub mod choice;
pub mod da;
pub mod fixtures;
pub mod generator;
pub mod format;
pub mod market;
pub mod oracle;
pub mod related;
pub mod smti;
pub mod stability;

pub use allocation::Allocation;
pub use da::{sp_da, sr_da};
pub use market::{CollegeId, CollegeIx, Contract, FundingPolicy, Market, RawMarket, StudentId, StudentIx, Terms};
pub use stability::{is_certainly_stable, is_stable, Mode, StabilityVerdict};
