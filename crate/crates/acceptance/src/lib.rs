//! Acceptance checks live in `tests/acceptance.rs`; run `cargo test -p mouldprint-acceptance`.
