//! Worked examples: war with a weak point, a first-price auction, the mountain game and a
//! cooperation dilemma.

pub mod auction;
pub mod mountain;
pub mod pd;
pub mod war;

pub use auction::{auction_checks, AuctionParams, AuctionReport};
pub use mountain::{prop3_verify, region_check, MountainForms, MountainParams, Prop3Report};
pub use pd::{dilemma_game, dilemma_mixed_target, dilemma_target};
pub use war::{build_war_game, war_pbe, WarGame, WarParams, WarPbe};
