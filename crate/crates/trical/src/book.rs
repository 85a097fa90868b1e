//! The guide chapters under `book/` double as doc-tests: every fenced Rust
//! block in the book compiles and runs with `cargo test --doc`, keeping the
//! prose in sync with the API.

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/transforms.md")]
    mod transforms {}
    #[doc = include_str!("../../../book/src/world.md")]
    mod world {}
    #[doc = include_str!("../../../book/src/features.md")]
    mod features {}
    #[doc = include_str!("../../../book/src/losses.md")]
    mod losses {}
    #[doc = include_str!("../../../book/src/solvers.md")]
    mod solvers {}
    #[doc = include_str!("../../../book/src/pipeline.md")]
    mod pipeline {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    mod evaluation {}
}
