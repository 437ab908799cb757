pub mod bench;
pub mod cli;
pub mod consistency;
pub mod decompose;
pub mod interval;
pub mod io;
pub mod model;
pub mod oracle;
pub mod pareto;
pub mod parse;
pub mod solver;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/models.md")]
    mod models {}
    #[doc = include_str!("../../../book/src/consistency.md")]
    mod consistency {}
    #[doc = include_str!("../../../book/src/fronts.md")]
    mod fronts {}
    #[doc = include_str!("../../../book/src/decomposition.md")]
    mod decomposition {}
    #[doc = include_str!("../../../book/src/fleet.md")]
    mod fleet {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
