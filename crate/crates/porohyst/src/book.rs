//! Doc-test hook for the guide: every fenced Rust block in the book's
//! chapters compiles and runs under `cargo test`, so the documentation
//! cannot drift from the library.

macro_rules! chapter {
    ($name:ident, $path:literal) => {
        #[doc = include_str!($path)]
        pub mod $name {}
    };
}

chapter!(introduction, "../../../book/src/introduction.md");
chapter!(hysteresis, "../../../book/src/hysteresis.md");
chapter!(plasticity, "../../../book/src/plasticity.md");
chapter!(constitutive, "../../../book/src/constitutive.md");
chapter!(discretization, "../../../book/src/discretization.md");
chapter!(time_stepping, "../../../book/src/time-stepping.md");
chapter!(energy_audit, "../../../book/src/energy-audit.md");
chapter!(cli, "../../../book/src/cli.md");
