//! Doc-test bridge for the `book/` guide.
//!
//! mdBook cannot run snippets against the crate by itself, so each chapter
//! is included here as module documentation; `cargo test --doc` then
//! compiles and runs every fenced code block. A chapter edit that breaks a
//! snippet breaks the build.

#[cfg(doctest)]
mod chapters {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/networks.md")]
    mod networks {}
    #[doc = include_str!("../../../book/src/data-and-envs.md")]
    mod data_and_envs {}
    #[doc = include_str!("../../../book/src/generative-models.md")]
    mod generative_models {}
    #[doc = include_str!("../../../book/src/value-pessimism.md")]
    mod value_pessimism {}
    #[doc = include_str!("../../../book/src/dynamics-filter.md")]
    mod dynamics_filter {}
    #[doc = include_str!("../../../book/src/augmentation.md")]
    mod augmentation {}
    #[doc = include_str!("../../../book/src/downstream-policy.md")]
    mod downstream_policy {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
    #[doc = include_str!("../../../book/src/reproducibility.md")]
    mod reproducibility {}
}
