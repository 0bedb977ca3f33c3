#![cfg_attr(not(test), no_std)]
extern crate alloc;

pub mod canonical;
pub mod crm;
pub mod dialogue;
pub mod intents;
pub mod kg;
pub mod nlu;
pub mod normalize;
pub mod reasoner;
pub mod record;
pub mod templates;
