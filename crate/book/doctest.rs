// The guide's code blocks are compiled and run by `cargo test --doc` through
// these modules, one per chapter.

#[doc = include_str!("src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("src/sequences.md")]
pub mod sequences {}
#[doc = include_str!("src/operator.md")]
pub mod operator {}
#[doc = include_str!("src/transfer.md")]
pub mod transfer {}
#[doc = include_str!("src/floquet.md")]
pub mod floquet {}
#[doc = include_str!("src/arcs.md")]
pub mod arcs {}
#[doc = include_str!("src/weyl.md")]
pub mod weyl {}
#[doc = include_str!("src/walks.md")]
pub mod walks {}
#[doc = include_str!("src/cli.md")]
pub mod cli {}
