// mdbook cannot run listings that depend on a local crate, so every chapter
// is pulled in as the docs of an empty module and `cargo test --doc` runs the
// code blocks. One module per chapter keeps failures traceable to a file.

#[doc = include_str!("src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("src/scenarios.md")]
pub mod scenarios {}
#[doc = include_str!("src/current.md")]
pub mod current {}
#[doc = include_str!("src/cumulants.md")]
pub mod cumulants {}
#[doc = include_str!("src/transients.md")]
pub mod transients {}
#[doc = include_str!("src/fluctuations.md")]
pub mod fluctuations {}
#[doc = include_str!("src/oracle.md")]
pub mod oracle {}
#[doc = include_str!("src/cli.md")]
pub mod cli {}
