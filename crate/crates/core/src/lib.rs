pub mod acquisition;
pub mod benchmark;
pub mod concordance;
pub mod gp;
pub mod metrics;
pub mod rules;
pub mod sim;
pub mod space;
pub mod store;
pub mod transfer;
pub mod tuner;
