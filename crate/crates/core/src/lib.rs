pub mod authenticity;
pub mod canonical;
pub mod comms;
pub mod governance;
pub mod model;
pub mod semantics;
pub mod sim;

#[cfg(test)]
pub(crate) mod testkit;
